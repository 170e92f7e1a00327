//! Dataset directories, parallel pair scoring and fused-score extraction.
//!
//! A dataset directory holds `manifest.jsonl`, `periocular.csv` and the
//! template files named by the manifest (paths relative to the directory).

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmatch::{match_packed, MatchConfig, MatchError, PackedTemplate};
use crate::eval::{EvalError, Manifest, Pair, PairSet, ScoreSet};
use crate::fusion::{dynamic_fuse, perioc_distance, static_fuse, static_inputs, FusionError, NormalizationParams};
use crate::io::{
    decode_template, encode_template, format_features, format_manifest, parse_features, parse_manifest, read_bytes, read_text,
    write_bytes, FeatureTable, IoError, PairStatus, ScoreRow,
};
use crate::neural::MlpParams;
use crate::synth::Population;
use crate::types::{CueVector, IrisTemplate, MatchLabel, PeriocularRecord};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const PERIOCULAR_FILE: &str = "periocular.csv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("pair {pair}: {source}")]
    Match { pair: u64, source: MatchError },
    #[error("{0}")]
    Invalid(String),
}

/// Manifest plus the loaded per-entry data, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub templates: Vec<IrisTemplate>,
    pub periocular: Vec<PeriocularRecord>,
}

impl From<Population> for Dataset {
    fn from(p: Population) -> Self {
        Dataset { manifest: p.manifest, templates: p.templates, periocular: p.periocular }
    }
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<(), PipelineError> {
    let entries = data.manifest.entries();
    for (e, t) in entries.iter().zip(&data.templates) {
        write_bytes(&dir.join(&e.template_ref), &encode_template(t)?)?;
    }
    let table = FeatureTable {
        dim: data.periocular.first().map_or(0, PeriocularRecord::dim),
        rows: entries.iter().zip(&data.periocular).map(|(e, p)| (e.periocular_ref.clone(), p.features().to_vec())).collect(),
    };
    write_bytes(&dir.join(PERIOCULAR_FILE), &format_features(&table)?)?;
    write_bytes(&dir.join(MANIFEST_FILE), format_manifest(&data.manifest).as_bytes())?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, PipelineError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = parse_manifest(&read_text(&manifest_path)?).map_err(|e| e.in_file(&manifest_path))?;
    let perioc_path = dir.join(PERIOCULAR_FILE);
    let table = parse_features(&read_text(&perioc_path)?).map_err(|e| e.in_file(&perioc_path))?;
    let by_id: HashMap<&str, &Vec<f64>> = table.rows.iter().map(|(id, v)| (id.as_str(), v)).collect();

    let mut templates = Vec::with_capacity(manifest.len());
    let mut periocular = Vec::with_capacity(manifest.len());
    let mut shape = None;
    for e in manifest.entries() {
        let path = dir.join(&e.template_ref);
        let t =
            decode_template(&read_bytes(&path)?).map_err(|err| PipelineError::Invalid(format!("{}: {err}", path.display())))?;
        let dims = (t.height(), t.width());
        if *shape.get_or_insert(dims) != dims {
            return Err(PipelineError::Invalid(format!(
                "{}: template is {}x{}, dataset uses {}x{}",
                path.display(),
                dims.0,
                dims.1,
                shape.unwrap().0,
                shape.unwrap().1
            )));
        }
        templates.push(t);
        let features = by_id
            .get(e.periocular_ref.as_str())
            .ok_or_else(|| PipelineError::Invalid(format!("{}: no row {:?}", perioc_path.display(), e.periocular_ref)))?;
        let record = PeriocularRecord::new((*features).clone(), e.eye_area, e.brow_area)
            .map_err(|err| PipelineError::Invalid(format!("{}: {err}", e.id())))?;
        periocular.push(record);
    }
    Ok(Dataset { manifest, templates, periocular })
}

struct Scorer<'a> {
    data: &'a Dataset,
    packed: Vec<PackedTemplate>,
    config: &'a MatchConfig,
}

fn score_side(s: &Scorer, pair: u64, label: MatchLabel, [i, j]: [u32; 2]) -> Result<ScoreRow, PipelineError> {
    let data = s.data;
    let (i, j) = (i as usize, j as usize);
    let entries = data.manifest.entries();
    let (ea, eb) = (&entries[i], &entries[j]);
    let (ta, tb) = (&data.templates[i], &data.templates[j]);
    let (pa, pb) = (&data.periocular[i], &data.periocular[j]);
    let iris = match match_packed(&s.packed[i], &s.packed[j], s.config) {
        Ok(r) => Some(r),
        Err(MatchError::EmptyJointMask) => None,
        Err(source) => return Err(PipelineError::Match { pair, source }),
    };
    Ok(ScoreRow {
        pair,
        a: ea.id(),
        b: eb.id(),
        label,
        side: ea.eye_side,
        status: if iris.is_some() { PairStatus::Ok } else { PairStatus::IrisMissing },
        ws: iris.map(|r| r.ws_score),
        hd: iris.map(|r| r.hamming),
        perioc_dist: perioc_distance(pa, pb)?,
        perioc_norm: None,
        mask_rate_a: ta.coverage(),
        mask_rate_b: tb.coverage(),
        eye_sum: pa.eye_area() + pb.eye_area(),
        eye_diff: pa.eye_area() - pb.eye_area(),
        brow_sum: pa.brow_area() + pb.brow_area(),
        brow_diff: pa.brow_area() - pb.brow_area(),
        static_score: None,
        dynamic: None,
    })
}

fn score_pair(s: &Scorer, index: u64, pair: &Pair) -> Result<Vec<ScoreRow>, PipelineError> {
    [pair.left, pair.right].into_iter().flatten().map(|ix| score_side(s, index, pair.label, ix)).collect()
}

/// Scores every pair (genuine first, then impostor), one row per side.
/// `threads` only sets the worker count: rows come back in pair order.
pub fn score_pairs(
    data: &Dataset,
    pairs: &PairSet,
    config: &MatchConfig,
    threads: Option<usize>,
) -> Result<Vec<ScoreRow>, PipelineError> {
    let all: Vec<&Pair> = pairs.iter().collect();
    let run = || {
        let scorer = Scorer { data, packed: data.templates.par_iter().map(PackedTemplate::new).collect(), config };
        all.par_iter().enumerate().map(|(i, p)| score_pair(&scorer, i as u64, p)).collect::<Result<Vec<_>, _>>()
    };
    let nested = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::Invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }?;
    Ok(nested.into_iter().flatten().collect())
}

/// Normalization fitted to every row's raw periocular distance.
pub fn fit_normalization(rows: &[ScoreRow]) -> Result<NormalizationParams, PipelineError> {
    Ok(NormalizationParams::fit(rows.iter().map(|r| r.perioc_dist))?)
}

fn normalized(row: &ScoreRow, norm: &NormalizationParams) -> ScoreRow {
    ScoreRow { perioc_norm: Some(norm.normalize(row.perioc_dist)), ..row.clone() }
}

/// Labeled cue vectors for fusion training; rows without an iris score are
/// left out.
pub fn training_set(rows: &[ScoreRow], norm: &NormalizationParams) -> Result<Vec<(CueVector, MatchLabel)>, PipelineError> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if let Some(c) = normalized(row, norm).cues().map_err(FusionError::from)? {
            out.push((c, row.label));
        }
    }
    Ok(out)
}

/// Fills the normalized distance and both fused scores of every row.
pub fn apply_fusion(
    rows: &[ScoreRow],
    params: &MlpParams,
    norm: &NormalizationParams,
    alpha: f64,
    static_weight: f64,
) -> Result<Vec<ScoreRow>, PipelineError> {
    static_fuse(0.0, 0.0, static_weight)?;
    rows.par_iter()
        .map(|row| {
            let mut out = normalized(row, norm);
            if let Some(cues) = out.cues().map_err(FusionError::from)? {
                let (iris, perioc) = static_inputs(cues.iris_score, alpha, cues.perioc_dist);
                out.static_score = Some(static_fuse(iris, perioc, static_weight)?);
                out.dynamic = Some(dynamic_fuse(params, &cues)?);
            }
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Weighted similarity.
    Ws,
    /// Masked Hamming distance.
    Hd,
    /// Raw periocular Euclidean distance.
    Perioc,
    Static,
    Dynamic,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ws, Method::Hd, Method::Perioc, Method::Static, Method::Dynamic];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ws => "ws",
            Method::Hd => "hd",
            Method::Perioc => "perioc",
            Method::Static => "static",
            Method::Dynamic => "dynamic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn higher_is_genuine(self) -> bool {
        !matches!(self, Method::Hd | Method::Perioc)
    }

    pub fn value(self, row: &ScoreRow) -> Option<f64> {
        match self {
            Method::Ws => row.ws,
            Method::Hd => row.hd,
            Method::Perioc => Some(row.perioc_dist),
            Method::Static => row.static_score,
            Method::Dynamic => row.dynamic,
        }
    }
}

/// Scores of one method with the number of pairs left out for a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodScores {
    pub scores: ScoreSet,
    pub excluded: usize,
}

/// Collects one score per pair. With `sum_rule`, rows sharing a pair id are
/// added together (left plus right); otherwise every row is its own pair.
pub fn method_scores(rows: &[ScoreRow], method: Method, sum_rule: bool) -> Result<MethodScores, PipelineError> {
    let (mut genuine, mut impostor, mut excluded) = (Vec::new(), Vec::new(), 0);
    let mut push = |label: MatchLabel, v: Option<f64>| match (label, v) {
        (MatchLabel::Genuine, Some(v)) => genuine.push(v),
        (MatchLabel::Impostor, Some(v)) => impostor.push(v),
        (_, None) => excluded += 1,
    };
    if sum_rule {
        for group in rows.chunk_by(|a, b| a.pair == b.pair) {
            if group.iter().any(|r| r.label != group[0].label) {
                return Err(PipelineError::Invalid(format!("pair {} mixes labels", group[0].pair)));
            }
            let sides: Vec<_> = group.iter().map(|r| r.side).collect();
            if sides.len() != 2 || sides[0] == sides[1] {
                return Err(PipelineError::Invalid(format!("pair {} needs one left and one right row", group[0].pair)));
            }
            let values: Option<Vec<f64>> = group.iter().map(|r| method.value(r)).collect();
            push(group[0].label, values.map(|v| v.iter().sum()));
        }
    } else {
        for row in rows {
            push(row.label, method.value(row));
        }
    }
    Ok(MethodScores { scores: ScoreSet::new(genuine, impostor, method.higher_is_genuine())?, excluded })
}
