//! Every writer followed by its reader is the identity on valid data.

use irisfuse::eval::{EyeSide, Manifest, ManifestEntry, RocPoint};
use irisfuse::fusion::NormalizationParams;
use irisfuse::io::*;
use irisfuse::neural::{MlpParams, TrainConfig, TrainOutcome, PARAM_COUNT};
use irisfuse::types::{IrisTemplate, MatchLabel};
use proptest::collection::vec;
use proptest::prelude::*;

fn template() -> impl Strategy<Value = IrisTemplate> {
    (1usize..24, 1usize..70).prop_flat_map(|(h, w)| {
        (vec(0u8..2, h * w), vec(0u8..2, h * w)).prop_map(move |(bits, mask)| IrisTemplate::pack(&bits, &mask, h, w).unwrap())
    })
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6, Just(0.0), Just(-0.0), Just(1e-300), Just(f64::MAX), Just(f64::MIN_POSITIVE)]
}

fn side() -> impl Strategy<Value = EyeSide> {
    prop_oneof![Just(EyeSide::L), Just(EyeSide::R)]
}

fn label() -> impl Strategy<Value = MatchLabel> {
    prop_oneof![Just(MatchLabel::Genuine), Just(MatchLabel::Impostor)]
}

fn score_row() -> impl Strategy<Value = ScoreRow> {
    (
        (any::<u64>(), "[A-Za-z0-9_]{1,12}", "[A-Za-z0-9_ ,\"]{1,12}", label(), side(), any::<bool>()),
        (0.0..2.0f64, 0.0..1.0f64, 0.0..1e3f64, proptest::option::of(0.0..1.0f64)),
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..2.0f64, -1.0..1.0f64, 0.0..2.0f64, -1.0..1.0f64),
        (proptest::option::of(finite()), proptest::option::of(0.0..=1.0f64)),
    )
        .prop_map(|((pair, a, b, label, side, ok), (ws, hd, dist, norm), m, (st, dy))| ScoreRow {
            pair,
            a,
            b,
            label,
            side,
            status: if ok { PairStatus::Ok } else { PairStatus::IrisMissing },
            ws: ok.then_some(ws),
            hd: ok.then_some(hd),
            perioc_dist: dist,
            perioc_norm: norm,
            mask_rate_a: m.0,
            mask_rate_b: m.1,
            eye_sum: m.2,
            eye_diff: m.3,
            brow_sum: m.4,
            brow_diff: m.5,
            static_score: st.filter(|_| ok),
            dynamic: dy.filter(|_| ok),
        })
}

proptest! {
    #[test]
    fn template_file(t in template()) {
        let bytes = encode_template(&t).unwrap();
        prop_assert_eq!(bytes.len(), template_file_len(t.height(), t.width()));
        prop_assert_eq!(decode_template(&bytes).unwrap(), t);
    }

    #[test]
    fn feature_csv(dim in 1usize..6, rows in vec(vec(finite(), 5), 0..8)) {
        let table = FeatureTable {
            dim,
            rows: rows.into_iter().enumerate().map(|(i, v)| (format!("id{i}"), v[..dim].to_vec())).collect(),
        };
        let text = String::from_utf8(format_features(&table).unwrap()).unwrap();
        prop_assert_eq!(parse_features(&text).unwrap(), table);
    }

    #[test]
    fn manifest_jsonl(entries in vec(("[A-Z][0-9]{1,3}", side(), 0u32..50, 0.01..0.6f64, 0.0..0.4f64), 1..10)) {
        let mut seen = std::collections::HashSet::new();
        let entries: Vec<ManifestEntry> = entries
            .into_iter()
            .filter(|(s, side, i, ..)| seen.insert((s.clone(), *side, *i)))
            .map(|(subject_id, eye_side, sample_index, eye_area, brow_area)| ManifestEntry {
                template_ref: format!("templates/{subject_id}.irt"),
                periocular_ref: format!("{subject_id}-{sample_index}"),
                subject_id,
                eye_side,
                sample_index,
                eye_area,
                brow_area,
            })
            .collect();
        let manifest = Manifest::new(entries).unwrap();
        prop_assert_eq!(parse_manifest(&format_manifest(&manifest)).unwrap(), manifest);
    }

    #[test]
    fn score_csv(rows in vec(score_row(), 0..12)) {
        let bytes = format_scores(&rows).unwrap();
        let back = parse_scores(std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert_eq!(&back, &rows);
        prop_assert_eq!(format_scores(&back).unwrap(), bytes);
    }

    #[test]
    fn roc_csv(points in vec((prop_oneof![finite(), Just(f64::INFINITY), Just(f64::NEG_INFINITY)], 0.0..=1.0f64, 0.0..=1.0f64), 0..20)) {
        let points: Vec<RocPoint> = points.into_iter().map(|(threshold, far, tar)| RocPoint { threshold, far, tar }).collect();
        let bytes = format_roc(&points).unwrap();
        prop_assert_eq!(parse_roc(std::str::from_utf8(&bytes).unwrap()).unwrap(), points);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn checkpoint_json(flat in vec(-3.0..3.0f64, PARAM_COUNT), lo in 0.0..10.0f64, span in 0.1..10.0f64, seed: u64) {
        let outcome = TrainOutcome {
            params: MlpParams::from_flat(flat).unwrap(),
            initial_loss: 0.69,
            final_loss: 0.2,
            epochs_run: 7,
            best_epoch: 5,
            history: vec![],
        };
        let config = TrainConfig { seed, ..TrainConfig::default() };
        let c = Checkpoint::new(&outcome, NormalizationParams::new(lo, lo + span).unwrap(), config);
        let bytes = encode_checkpoint(&c).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        prop_assert_eq!(back.params().unwrap(), outcome.params);
        prop_assert_eq!(back, c);
    }
}
