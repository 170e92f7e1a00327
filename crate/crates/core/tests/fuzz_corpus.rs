//! Replays the checked-in fuzz seeds through the same checks the fuzz targets
//! run, so the corpus stays meaningful without a nightly toolchain.

use std::path::PathBuf;

use irisfuse::io::*;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seeds: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty(), "no seeds for {target}");
    seeds
}

/// Seeds named `seed_valid*` must be accepted; everything else only has to
/// be handled without panicking.
fn replay<T>(target: &str, mut check: impl FnMut(&[u8]) -> Option<T>) {
    for (name, bytes) in corpus(target) {
        let accepted = check(&bytes).is_some();
        if name.starts_with("seed_valid") {
            assert!(accepted, "{target}/{name} was rejected");
        }
    }
}

fn text(bytes: &[u8]) -> Option<&str> {
    std::str::from_utf8(bytes).ok()
}

#[test]
fn template_file_seeds() {
    replay("template_file", |b| {
        let t = decode_template(b).ok()?;
        assert_eq!(encode_template(&t).unwrap(), b);
        Some(t)
    });
}

#[test]
fn feature_csv_seeds() {
    replay("feature_csv", |b| {
        let table = parse_features(text(b)?).ok()?;
        let again = format_features(&table).unwrap();
        assert_eq!(parse_features(text(&again).unwrap()).unwrap(), table);
        Some(table)
    });
}

#[test]
fn manifest_seeds() {
    replay("manifest", |b| {
        let m = parse_manifest(text(b)?).ok()?;
        assert_eq!(parse_manifest(&format_manifest(&m)).unwrap(), m);
        Some(m)
    });
}

#[test]
fn score_csv_seeds() {
    replay("score_csv", |b| {
        let rows = parse_scores(text(b)?).ok()?;
        assert_eq!(parse_scores(text(&format_scores(&rows).unwrap()).unwrap()).unwrap(), rows);
        Some(rows)
    });
}

#[test]
fn roc_csv_seeds() {
    replay("roc_csv", |b| {
        let points = parse_roc(text(b)?).ok()?;
        assert_eq!(parse_roc(text(&format_roc(&points).unwrap()).unwrap()).unwrap(), points);
        Some(points)
    });
}

#[test]
fn checkpoint_seeds() {
    replay("checkpoint", |b| {
        let c = decode_checkpoint(b).ok()?;
        assert_eq!(decode_checkpoint(&encode_checkpoint(&c).unwrap()).unwrap(), c);
        Some(c)
    });
}
