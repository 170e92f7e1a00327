//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use irisfuse::bitmatch::oracle::random_case;
use irisfuse::bitmatch::{black_match_rate, masked_hamming, weighted_similarity, white_match_rate, ShiftPolicy};
use irisfuse::eval::*;
use irisfuse::neural::gradcheck;
use irisfuse::synth::{gen_population, gen_score_scenario, ScoreScenario, SynthConfig};
use irisfuse::types::MatchLabel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn irisfuse(args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_irisfuse")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("irisfuse {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| format!("irisfuse {}: bad JSON: {e}", args.join(" ")))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn kernel_oracle() -> Outcome {
    let start = Instant::now();
    let report = irisfuse(&["oracle", "--pairs", "1000", "--seed", "2024"])?;
    let elapsed = start.elapsed();
    let mismatches = report["mismatches"].as_array().map_or(usize::MAX, Vec::len);
    ensure(
        report["passed"] == true && mismatches == 0 && report["pairs"] == 1000 && elapsed < Duration::from_secs(30),
        format!("1000 pairs from 4x4 to 64x512, {mismatches} mismatches, {:.1} s (limit 30 s)", elapsed.as_secs_f64()),
    )
}

fn ws_hamming_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut checked, mut masked, mut shifted, mut worst) = (0, 0, 0, 0.0f64);
    let mut index = 0;
    while checked < 1000 {
        let case = random_case(&mut rng, index);
        index += 1;
        let policy = ShiftPolicy::new(case.max_shift, case.step).map_err(|e| e.to_string())?;
        let Ok(hd) = masked_hamming(&case.a, &case.b, &policy) else { continue };
        let ws = weighted_similarity(&case.a, &case.b, 1.0, &policy).map_err(|e| e.to_string())?;
        worst = worst.max((ws.score + hd.distance - 1.0).abs());
        checked += 1;
        masked += usize::from(case.a.coverage() < 1.0 || case.b.coverage() < 1.0);
        shifted += usize::from(hd.best_shift != 0);
    }
    ensure(
        worst <= 1e-12 && masked > 0 && shifted > 0,
        format!("max |WS + HD - 1| = {worst:e} over {checked} pairs ({masked} masked, {shifted} best at a nonzero shift)"),
    )
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let reports = gradcheck::run_all(31, 20);
    let elapsed = start.elapsed();
    let summary: Vec<String> = reports.iter().map(|r| format!("{} {:.1e}", r.name, r.max_rel_error)).collect();
    let all = reports.len() == 3 && reports.iter().all(|r| r.passed && r.points == 20 && r.max_rel_error < 1e-4);
    ensure(
        all && elapsed < Duration::from_secs(10),
        format!("20 points each, max rel error {}, {:.2} s (limit 10 s)", summary.join(", "), elapsed.as_secs_f64()),
    )
}

fn manifest(subjects: usize, samples: usize, sides: &[EyeSide]) -> Manifest {
    let entries = (0..subjects)
        .flat_map(|s| sides.iter().flat_map(move |&side| (0..samples).map(move |k| (s, side, k))))
        .map(|(s, side, k)| ManifestEntry {
            subject_id: format!("S{s:04}"),
            eye_side: side,
            sample_index: k as u32,
            template_ref: format!("{s}_{}_{k}.irt", side.as_str()),
            periocular_ref: format!("{s}_{}_{k}", side.as_str()),
            eye_area: 0.25,
            brow_area: 0.1,
        })
        .collect();
    Manifest::new(entries).expect("unique entries")
}

fn protocol_counts() -> Outcome {
    let closed = (expected_pair_counts(159, 10), expected_pair_counts(180, 10));
    let within = generate_pairs(&manifest(159, 10, &[EyeSide::L]), Protocol::AllVsAllWithinSide).map_err(|e| e.to_string())?;
    let summed =
        generate_pairs(&manifest(180, 10, &[EyeSide::L, EyeSide::R]), Protocol::LeftRightDisjoint).map_err(|e| e.to_string())?;
    let generated = (
        (within.genuine.len() as u64, within.impostor.len() as u64),
        (summed.genuine.len() as u64, summed.impostor.len() as u64),
    );
    let expected = ((7_155, 1_256_100), (8_100, 1_611_000));
    ensure(
        closed == expected && generated == expected,
        format!("159x10 single side {:?}, 180x10 sum rule {:?} (closed form {:?})", generated.0, generated.1, closed),
    )
}

fn metric_oracle() -> Outcome {
    let scenario = ScoreScenario {
        genuine_mean: 1.0,
        genuine_std: 1.0,
        impostor_mean: -1.0,
        impostor_std: 1.0,
        n_genuine: 100_000,
        n_impostor: 100_000,
        clamp: None,
    };
    let scores = gen_score_scenario(5, &scenario).map_err(|e| e.to_string())?;
    let expected = Normal::new(0.0, 1.0).expect("standard normal").cdf(-1.0);
    let gaussian = eer(&scores).map_err(|e| e.to_string())?;

    let disjoint =
        ScoreSet::new((0..500).map(|i| 1.0 + i as f64 / 500.0).collect(), (0..700).map(|i| -(i as f64) / 700.0).collect(), true)
            .map_err(|e| e.to_string())?;
    let disjoint_eer = eer(&disjoint).map_err(|e| e.to_string())?;

    let rates = |s: &ScoreSet| -> Result<Vec<(f64, f64)>, String> {
        Ok(roc_curve(s, RocMode::Exact).map_err(|e| e.to_string())?.iter().map(|p| (p.far, p.tar)).collect())
    };
    let base = rates(&scores)?;
    let mut invariant = true;
    for f in [|x: f64| 5.0 * x - 3.0, |x: f64| x.exp(), |x: f64| x.atan()] {
        let mapped = scores.map(f).map_err(|e| e.to_string())?;
        invariant &= rates(&mapped)? == base && eer(&mapped).map_err(|e| e.to_string())? == gaussian;
    }
    ensure(
        (gaussian - expected).abs() <= 0.01 && disjoint_eer == 0.0 && invariant,
        format!(
            "Gaussian EER {gaussian:.4} vs Phi(-1) = {expected:.4}; disjoint EER {disjoint_eer}; ROC invariant under 3 increasing maps: {invariant}"
        ),
    )
}

const SCENARIO: [&str; 12] = [
    "--subjects",
    "40",
    "--samples",
    "6",
    "--height",
    "32",
    "--width",
    "256",
    "--perioc-dim",
    "128",
    "--degraded-fraction",
    "0.3",
];

fn eval_eer(scores: &Path, method: &str, out: &Path) -> Result<f64, String> {
    let s = irisfuse(&["eval", "--scores", p(scores), "--method", method, "--out-dir", p(out), "--max-shift", "8"])?;
    s["eer"].as_f64().ok_or_else(|| format!("no eer in {s}"))
}

fn fusion_benefit() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |name: &str| tmp.path().join(name);
    let start = Instant::now();
    for (name, seed) in [("train", "1"), ("test", "2")] {
        let dir = d(name);
        let mut args = vec!["synth", "--out", p(&dir), "--seed", seed];
        args.extend_from_slice(&SCENARIO);
        irisfuse(&args)?;
        let csv = d(&format!("{name}.csv"));
        irisfuse(&["match", "--data", p(&d(name)), "--out", p(&csv), "--max-shift", "8"])?;
    }
    irisfuse(&["fuse-train", "--scores", p(&d("train.csv")), "--out", p(&d("model.json")), "--seed", "0"])?;
    let fused = d("fused.csv");
    irisfuse(&["score", "--scores", p(&d("test.csv")), "--model", p(&d("model.json")), "--out", p(&fused)])?;
    let ws = eval_eer(&fused, "ws", &d("eval"))?;
    let perioc = eval_eer(&fused, "perioc", &d("eval"))?;
    let dynamic = eval_eer(&fused, "dynamic", &d("eval"))?;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=20 {
        let w = format!("{}", k as f64 / 20.0);
        let swept = d("swept.csv");
        irisfuse(&[
            "score",
            "--scores",
            p(&d("test.csv")),
            "--model",
            p(&d("model.json")),
            "--out",
            p(&swept),
            "--static-weight",
            &w,
        ])?;
        let e = eval_eer(&swept, "static", &d("eval"))?;
        if e < best.0 {
            best = (e, k as f64 / 20.0);
        }
    }
    let elapsed = start.elapsed();
    ensure(
        dynamic < ws && dynamic < perioc && dynamic < best.0 && best.0 <= ws.min(perioc) && elapsed < Duration::from_secs(120),
        format!(
            "EER dynamic {dynamic:.4} < static {:.4} (w = {}) <= min(WS {ws:.4}, periocular {perioc:.4}); pipeline {:.1} s (limit 120 s)",
            best.0,
            best.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn run_pipeline(root: &Path, threads: &str) -> Result<(), String> {
    let d = |name: &str| root.join(name);
    let common = ["--threads", threads];
    let data = d("data");
    let mut synth = vec!["synth", "--out", p(&data), "--seed", "3", "--subjects", "15", "--samples", "4"];
    synth.extend_from_slice(&["--height", "16", "--width", "128", "--perioc-dim", "32", "--degraded-fraction", "0.2"]);
    irisfuse(&synth)?;
    irisfuse(&[&["match", "--data", p(&d("data")), "--out", p(&d("raw.csv")), "--max-shift", "6"][..], &common].concat())?;
    irisfuse(&["fuse-train", "--scores", p(&d("raw.csv")), "--out", p(&d("model.json")), "--epochs", "60", "--seed", "4"])?;
    irisfuse(&["score", "--scores", p(&d("raw.csv")), "--model", p(&d("model.json")), "--out", p(&d("fused.csv"))])?;
    for method in ["ws", "hd", "perioc", "static", "dynamic"] {
        irisfuse(&["eval", "--scores", p(&d("fused.csv")), "--method", method, "--out-dir", p(&d(&format!("eval-{method}")))])?;
    }
    Ok(())
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    run_pipeline(a.path(), "1")?;
    run_pipeline(b.path(), "3")?;
    let (fa, fb) = (files(a.path()), files(b.path()));
    let differing: Vec<String> =
        fa.keys().chain(fb.keys()).filter(|k| fa.get(*k) != fb.get(*k)).map(|k| k.display().to_string()).collect();
    let bytes: usize = fa.values().map(Vec::len).sum();
    ensure(
        differing.is_empty() && fa.len() > 10,
        format!("{} files, {bytes} bytes compared across two runs (1 vs 3 threads); differing: {differing:?}", fa.len()),
    )
}

fn black_white_rates() -> Outcome {
    let cfg = SynthConfig {
        seed: 8,
        num_subjects: 20,
        samples_per_subject: 5,
        white_probability: 0.4,
        max_rotation: 0,
        height: 32,
        width: 256,
        perioc_dim: 4,
        ..SynthConfig::default()
    };
    let pop = gen_population(&cfg).map_err(|e| e.to_string())?;
    let pairs = generate_pairs(&pop.manifest, Protocol::AllVsAllWithinSide).map_err(|e| e.to_string())?;
    let (mut rw, mut rb, mut n) = (0.0, 0.0, 0usize);
    for pair in pairs.genuine.iter().filter(|p| p.label == MatchLabel::Genuine) {
        let [i, j] = pair.left.or(pair.right).expect("one side");
        let (a, b) = (&pop.templates[i as usize], &pop.templates[j as usize]);
        if let (Ok(w), Ok(k)) = (white_match_rate(a, b), black_match_rate(a, b)) {
            rw += w;
            rb += k;
            n += 1;
        }
    }
    let (rw, rb) = (rw / n as f64, rb / n as f64);
    ensure(n > 0 && rb > rw, format!("white prevalence 0.4: mean R_B {rb:.4} > mean R_W {rw:.4} over {n} genuine pairs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("kernel-oracle equivalence", kernel_oracle),
        ("WS/Hamming reduction at alpha = 1", ws_hamming_reduction),
        ("gradient checks", gradient_checks),
        ("protocol pair counts", protocol_counts),
        ("metric oracle", metric_oracle),
        ("end-to-end fusion benefit", fusion_benefit),
        ("determinism", determinism),
        ("black/white matching rates", black_white_rates),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
