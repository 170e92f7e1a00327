use serde::{Deserialize, Serialize};

use super::IoError;
use crate::eval::{EyeSide, RocPoint};
use crate::types::{CueVector, MatchLabel, TypeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Ok,
    /// No jointly valid iris pixels: iris-dependent columns are left empty.
    IrisMissing,
}

/// One per-side comparison. Rows sharing `pair` belong to the same capture
/// pair (both eyes under the sum-rule protocol).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub pair: u64,
    pub a: String,
    pub b: String,
    pub label: MatchLabel,
    pub side: EyeSide,
    pub status: PairStatus,
    pub ws: Option<f64>,
    pub hd: Option<f64>,
    pub perioc_dist: f64,
    pub perioc_norm: Option<f64>,
    pub mask_rate_a: f64,
    pub mask_rate_b: f64,
    pub eye_sum: f64,
    pub eye_diff: f64,
    pub brow_sum: f64,
    pub brow_diff: f64,
    #[serde(rename = "static")]
    pub static_score: Option<f64>,
    pub dynamic: Option<f64>,
}

pub const SCORE_COLUMNS: [&str; 18] = [
    "pair",
    "a",
    "b",
    "label",
    "side",
    "status",
    "ws",
    "hd",
    "perioc_dist",
    "perioc_norm",
    "mask_rate_a",
    "mask_rate_b",
    "eye_sum",
    "eye_diff",
    "brow_sum",
    "brow_diff",
    "static",
    "dynamic",
];

pub const ROC_COLUMNS: [&str; 3] = ["threshold", "far", "tar"];

impl ScoreRow {
    /// The network input; `None` until the periocular distance has been
    /// normalized, and for pairs without an iris score.
    pub fn cues(&self) -> Result<Option<CueVector>, TypeError> {
        let (Some(ws), Some(norm)) = (self.ws, self.perioc_norm) else {
            return Ok(None);
        };
        CueVector::from_array([
            ws,
            norm,
            self.mask_rate_a,
            self.mask_rate_b,
            self.eye_sum,
            self.eye_diff,
            self.brow_sum,
            self.brow_diff,
        ])
        .map(Some)
    }

    fn check(&self) -> Result<(), String> {
        let required = [
            ("perioc_dist", self.perioc_dist),
            ("mask_rate_a", self.mask_rate_a),
            ("mask_rate_b", self.mask_rate_b),
            ("eye_sum", self.eye_sum),
            ("eye_diff", self.eye_diff),
            ("brow_sum", self.brow_sum),
            ("brow_diff", self.brow_diff),
        ];
        let optional = [
            ("ws", self.ws),
            ("hd", self.hd),
            ("perioc_norm", self.perioc_norm),
            ("static", self.static_score),
            ("dynamic", self.dynamic),
        ];
        let all = required.iter().map(|&(n, v)| (n, Some(v))).chain(optional);
        for (name, v) in all {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(format!("column {name} is not finite"));
            }
        }
        if self.perioc_dist < 0.0 {
            return Err("column perioc_dist is negative".into());
        }
        let iris = [self.ws, self.hd, self.static_score, self.dynamic];
        match self.status {
            PairStatus::Ok if self.ws.is_none() || self.hd.is_none() => Err("status ok requires ws and hd".into()),
            PairStatus::IrisMissing if iris.iter().any(Option::is_some) => {
                Err("status iris_missing requires empty ws, hd, static and dynamic".into())
            }
            _ => Ok(()),
        }
    }
}

fn csv_error(e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    IoError::parse(line, e.to_string())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), IoError> {
    let head = reader.headers().map_err(csv_error)?;
    if head.is_empty() {
        return Err(IoError::parse(1, "missing header"));
    }
    if head.iter().ne(expected.iter().copied()) {
        return Err(IoError::parse(1, format!("header must be {}", expected.join(","))));
    }
    Ok(())
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRow>, IoError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    check_header(&mut reader, &SCORE_COLUMNS)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let row: ScoreRow = record.deserialize(None).map_err(|e| IoError::parse(line, e.to_string()))?;
        row.check().map_err(|d| IoError::parse(line, d))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn format_scores(rows: &[ScoreRow]) -> Result<Vec<u8>, IoError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(SCORE_COLUMNS).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| IoError::parse(0, e.to_string()))
}

/// Thresholds may be infinite; rates must lie in `[0, 1]`.
pub fn parse_roc(text: &str) -> Result<Vec<RocPoint>, IoError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    check_header(&mut reader, &ROC_COLUMNS)?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let p: RocPoint = record.deserialize(None).map_err(|e| IoError::parse(line, e.to_string()))?;
        if p.threshold.is_nan() {
            return Err(IoError::parse(line, "threshold is NaN"));
        }
        if !(0.0..=1.0).contains(&p.far) || !(0.0..=1.0).contains(&p.tar) {
            return Err(IoError::parse(line, "rates must lie in [0, 1]"));
        }
        points.push(p);
    }
    Ok(points)
}

pub fn format_roc(points: &[RocPoint]) -> Result<Vec<u8>, IoError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(ROC_COLUMNS).map_err(csv_error)?;
    for p in points {
        w.serialize(p).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| IoError::parse(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_row() -> ScoreRow {
        ScoreRow {
            pair: 3,
            a: "S0001_L_0".into(),
            b: "S0002_L_4".into(),
            label: MatchLabel::Impostor,
            side: EyeSide::L,
            status: PairStatus::Ok,
            ws: Some(0.7083333333333334),
            hd: Some(0.49),
            perioc_dist: 31.25,
            perioc_norm: None,
            mask_rate_a: 0.75,
            mask_rate_b: 1.0,
            eye_sum: 0.45,
            eye_diff: -0.05,
            brow_sum: 0.25,
            brow_diff: 1e-17,
            static_score: None,
            dynamic: Some(0.125),
        }
    }

    #[test]
    fn score_round_trip() {
        let mut missing = sample_row();
        missing.status = PairStatus::IrisMissing;
        missing.ws = None;
        missing.hd = None;
        missing.dynamic = None;
        missing.label = MatchLabel::Genuine;
        let rows = vec![sample_row(), missing];
        let bytes = format_scores(&rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("pair,a,b,label,side,status,ws,hd,perioc_dist,"));
        assert!(text.contains(",genuine,L,iris_missing,,,31.25,,"));
        assert_eq!(parse_scores(&text).unwrap(), rows);
        assert_eq!(format_scores(&parse_scores(&text).unwrap()).unwrap(), bytes);
    }

    #[test]
    fn score_rejections() {
        let text = String::from_utf8(format_scores(&[sample_row()]).unwrap()).unwrap();
        let (head, body) = text.split_once('\n').unwrap();
        let cases = [
            body.replace("impostor", "maybe"),
            body.replace(",0.49,", ",NaN,"),
            body.replace(",0.49,", ",,"),
            body.replace(",ok,", ",iris_missing,"),
            body.replace("31.25", "-1"),
            body.replace(",0.125", ""),
        ];
        for case in cases {
            let doc = format!("{head}\n{body}{case}");
            match parse_scores(&doc) {
                Err(IoError::Parse { line: 3, .. }) => {}
                other => panic!("{case}: {other:?}"),
            }
        }
        assert!(matches!(parse_scores(&text.replacen("hd", "hamming", 1)), Err(IoError::Parse { line: 1, .. })));
        assert!(matches!(parse_scores(""), Err(IoError::Parse { line: 1, .. })));
    }

    #[test]
    fn cues_need_normalization() {
        let mut row = sample_row();
        assert_eq!(row.cues(), Ok(None));
        row.perioc_norm = Some(0.5);
        assert_eq!(row.cues().unwrap().unwrap().to_array()[..2], [0.7083333333333334, 0.5]);
        row.mask_rate_a = 1.5;
        assert!(row.cues().is_err());
    }

    #[test]
    fn roc_round_trip_with_infinite_threshold() {
        let pts = vec![
            RocPoint { threshold: f64::INFINITY, far: 0.0, tar: 0.0 },
            RocPoint { threshold: 0.3, far: 1.0 / 3.0, tar: 0.5 },
            RocPoint { threshold: -2.5, far: 1.0, tar: 1.0 },
        ];
        let bytes = format_roc(&pts).unwrap();
        let text = std::str::from_utf8(&bytes).unwrap();
        assert!(text.starts_with("threshold,far,tar\ninf,0.0,0.0\n"), "{text}");
        assert_eq!(parse_roc(text).unwrap(), pts);
        assert!(parse_roc("threshold,far,tar\n0.5,1.5,0\n").is_err());
        assert!(parse_roc("threshold,far,tar\nNaN,0,0\n").is_err());
    }
}
