use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::types::MatchLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EyeSide {
    L,
    R,
}

impl EyeSide {
    pub fn as_str(self) -> &'static str {
        match self {
            EyeSide::L => "L",
            EyeSide::R => "R",
        }
    }
}

/// One captured eye image and where its extracted features live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub eye_side: EyeSide,
    pub sample_index: u32,
    /// Template file path, relative to the manifest's directory.
    pub template_ref: String,
    /// Row id in the periocular feature CSV.
    pub periocular_ref: String,
    pub eye_area: f64,
    pub brow_area: f64,
}

impl ManifestEntry {
    /// Stable identifier `subject_side_sample`.
    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.subject_id, self.eye_side.as_str(), self.sample_index)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Rejects duplicate `(subject_id, eye_side, sample_index)` keys.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !seen.insert((e.subject_id.as_str(), e.eye_side, e.sample_index)) {
                return Err(EvalError::DuplicateEntry { index: i, id: e.id() });
            }
        }
        Ok(Manifest { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Every unordered pair of images from the same eye side.
    AllVsAllWithinSide,
    /// Pairs of (subject, sample) captures that have both eyes; the left and
    /// right comparisons are later combined with the sum rule.
    LeftRightDisjoint,
}

/// One comparison: manifest entry indices for the left and/or right eye.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub label: MatchLabel,
    pub left: Option<[u32; 2]>,
    pub right: Option<[u32; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSet {
    pub genuine: Vec<Pair>,
    pub impostor: Vec<Pair>,
}

impl PairSet {
    pub fn iter(&self) -> impl Iterator<Item = &Pair> {
        self.genuine.iter().chain(self.impostor.iter())
    }

    pub fn len(&self) -> usize {
        self.genuine.len() + self.impostor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Subject -> sample list, both ordered.
type Groups<T> = BTreeMap<String, Vec<T>>;

fn enumerate<T: Copy>(groups: &Groups<T>, make: impl Fn(MatchLabel, T, T) -> Pair, out: &mut PairSet) {
    let subjects: Vec<&Vec<T>> = groups.values().collect();
    for samples in &subjects {
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                out.genuine.push(make(MatchLabel::Genuine, samples[i], samples[j]));
            }
        }
    }
    for s in 0..subjects.len() {
        for t in s + 1..subjects.len() {
            for &x in subjects[s] {
                for &y in subjects[t] {
                    out.impostor.push(make(MatchLabel::Impostor, x, y));
                }
            }
        }
    }
}

/// Enumerates genuine (same subject) and impostor (different subject) pairs.
/// Subjects and samples are visited in sorted order, so the output order is
/// independent of manifest line order.
pub fn generate_pairs(manifest: &Manifest, protocol: Protocol) -> Result<PairSet, EvalError> {
    let subjects: HashSet<&str> = manifest.entries.iter().map(|e| e.subject_id.as_str()).collect();
    if subjects.len() < 2 {
        return Err(EvalError::TooFewSubjects(subjects.len()));
    }
    let mut out = PairSet::default();
    match protocol {
        Protocol::AllVsAllWithinSide => {
            for side in [EyeSide::L, EyeSide::R] {
                let mut groups: Groups<(u32, u32)> = BTreeMap::new();
                for (i, e) in manifest.entries.iter().enumerate().filter(|(_, e)| e.eye_side == side) {
                    groups.entry(e.subject_id.clone()).or_default().push((e.sample_index, i as u32));
                }
                groups.values_mut().for_each(|v| v.sort_unstable());
                let make = |label, (_, x): (u32, u32), (_, y): (u32, u32)| {
                    let idx = Some([x, y]);
                    match side {
                        EyeSide::L => Pair { label, left: idx, right: None },
                        EyeSide::R => Pair { label, left: None, right: idx },
                    }
                };
                enumerate(&groups, make, &mut out);
            }
        }
        Protocol::LeftRightDisjoint => {
            let mut captures: BTreeMap<(String, u32), [Option<u32>; 2]> = BTreeMap::new();
            for (i, e) in manifest.entries.iter().enumerate() {
                let slot = captures.entry((e.subject_id.clone(), e.sample_index)).or_default();
                slot[(e.eye_side == EyeSide::R) as usize] = Some(i as u32);
            }
            let mut groups: Groups<[u32; 2]> = BTreeMap::new();
            for ((subject, _), sides) in captures {
                if let [Some(l), Some(r)] = sides {
                    groups.entry(subject).or_default().push([l, r]);
                }
            }
            if groups.len() < 2 {
                return Err(EvalError::TooFewSubjects(groups.len()));
            }
            enumerate(&groups, |label, x, y| Pair { label, left: Some([x[0], y[0]]), right: Some([x[1], y[1]]) }, &mut out);
        }
    }
    Ok(out)
}

/// Closed-form `(genuine, impostor)` counts for `subjects` subjects with
/// `samples` images each on one side: `S * C(n, 2)` and `C(S, 2) * n^2`.
pub fn expected_pair_counts(subjects: u64, samples: u64) -> (u64, u64) {
    (subjects * samples * samples.saturating_sub(1) / 2, subjects * subjects.saturating_sub(1) / 2 * samples * samples)
}

/// Element-wise sum of aligned left and right scores.
pub fn sum_rule_combine(left: &[f64], right: &[f64]) -> Result<Vec<f64>, EvalError> {
    if left.len() != right.len() {
        return Err(EvalError::LengthMismatch(left.len(), right.len()));
    }
    Ok(left.iter().zip(right).map(|(l, r)| l + r).collect())
}
