//! `irisfuse` command line: synthetic populations, pair scoring, fusion
//! training and verification reports.
//!
//! Every failure exits non-zero with a JSON object on stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use irisfuse::bitmatch::{oracle, MatchConfig, ShiftPolicy, WsNormalization, DEFAULT_ALPHA, DEFAULT_MAX_SHIFT};
use irisfuse::eval::{auc, eer_from_roc, generate_pairs, roc_curve, tar_at_far, EyeSide, Protocol, RocMode, DEFAULT_FAR_TARGET};
use irisfuse::io::{
    decode_checkpoint, encode_checkpoint, format_roc, format_scores, parse_scores, read_bytes, read_text, write_bytes, Checkpoint,
};
use irisfuse::neural::{gradcheck, train_mlp, OptimizerKind, TrainConfig};
use irisfuse::pipeline::{
    apply_fusion, fit_normalization, load_dataset, method_scores, score_pairs, training_set, write_dataset, Dataset, Method,
};
use irisfuse::synth::{gen_population, SynthConfig};

#[derive(Parser)]
#[command(name = "irisfuse", version, about = "Segmentation-aware iris and periocular matching with MLP score fusion")]
struct Cli {
    /// Worker threads for pair scoring; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population into a dataset directory.
    Synth(SynthArgs),
    /// Score every pair of a dataset under a protocol.
    Match(MatchArgs),
    /// Train the fusion network on scored pairs and write a checkpoint.
    FuseTrain(FuseTrainArgs),
    /// Fill the static and dynamic fused scores of a score file.
    Score(ScoreArgs),
    /// ROC, EER and TAR at a fixed FAR for one method.
    Eval(EvalArgs),
    /// Finite-difference checks of every analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Packed kernels against the per-pixel reference matcher.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct MatcherArgs {
    /// Asymmetry between agreeing ones and agreeing zeros, in (0, 2).
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SHIFT)]
    max_shift: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// Weighted similarity over all pixels divided by height * width,
    /// ignoring the masks.
    #[arg(long)]
    literal_eq5: bool,
}

impl MatcherArgs {
    fn config(&self) -> Result<MatchConfig> {
        Ok(MatchConfig {
            alpha: self.alpha,
            policy: ShiftPolicy::new(self.max_shift, self.step)?,
            ws_normalization: if self.literal_eq5 { WsNormalization::Literal } else { WsNormalization::JointValid },
        })
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    subjects: usize,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Eye sides to generate.
    #[arg(long, value_delimiter = ',', default_values = ["L", "R"])]
    sides: Vec<String>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    perioc_dim: Option<usize>,
    #[arg(long)]
    flip_rate: Option<f64>,
    #[arg(long)]
    white_probability: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    coverage: Option<Vec<f64>>,
    #[arg(long)]
    max_rotation: Option<usize>,
    #[arg(long)]
    perioc_between: Option<f64>,
    #[arg(long)]
    perioc_noise: Option<f64>,
    #[arg(long)]
    degraded_fraction: Option<f64>,
    #[arg(long)]
    degraded_flip_rate: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    degraded_coverage: Option<Vec<f64>>,
}

impl SynthArgs {
    fn config(&self) -> Result<SynthConfig> {
        let d = SynthConfig::default();
        let sides = self
            .sides
            .iter()
            .map(|s| match s.as_str() {
                "L" => Ok(EyeSide::L),
                "R" => Ok(EyeSide::R),
                other => bail!("unknown eye side {other:?}, expected L or R"),
            })
            .collect::<Result<_>>()?;
        let pair = |v: &Option<Vec<f64>>, default| v.as_ref().map_or(default, |v| (v[0], v[1]));
        let cfg = SynthConfig {
            seed: self.seed,
            num_subjects: self.subjects,
            samples_per_subject: self.samples,
            sides,
            height: self.height.unwrap_or(d.height),
            width: self.width.unwrap_or(d.width),
            genuine_flip_rate: self.flip_rate.unwrap_or(d.genuine_flip_rate),
            white_probability: self.white_probability.unwrap_or(d.white_probability),
            mask_coverage_range: pair(&self.coverage, d.mask_coverage_range),
            max_rotation: self.max_rotation.unwrap_or(d.max_rotation),
            perioc_dim: self.perioc_dim.unwrap_or(d.perioc_dim),
            perioc_between_std: self.perioc_between.unwrap_or(d.perioc_between_std),
            perioc_within_noise: self.perioc_noise.unwrap_or(d.perioc_within_noise),
            degraded_fraction: self.degraded_fraction.unwrap_or(d.degraded_fraction),
            degraded_flip_rate: self.degraded_flip_rate.unwrap_or(d.degraded_flip_rate),
            degraded_coverage_range: pair(&self.degraded_coverage, d.degraded_coverage_range),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    /// All image pairs from the same eye side.
    WithinSide,
    /// Capture pairs with both eyes, left and right scored separately.
    SumRule,
}

#[derive(Args)]
struct MatchArgs {
    /// Dataset directory written by `synth` or laid out the same way.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "within-side")]
    protocol: ProtocolArg,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Args)]
struct FuseTrainArgs {
    /// Raw score file from `match`.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_enum, default_value = "sgd")]
    optimizer: OptimizerArg,
    #[arg(long)]
    momentum: Option<f64>,
    /// Impostor samples drawn per genuine sample each epoch.
    #[arg(long)]
    impostor_ratio: Option<f64>,
    /// Epochs without improvement before stopping; 0 runs every epoch.
    #[arg(long)]
    patience: Option<usize>,
}

impl FuseTrainArgs {
    fn config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            seed: self.seed,
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            optimizer: match self.optimizer {
                OptimizerArg::Sgd => OptimizerKind::SgdMomentum,
                OptimizerArg::Adam => OptimizerKind::Adam,
            },
            momentum: self.momentum.unwrap_or(d.momentum),
            genuine_impostor_ratio: self.impostor_ratio.unwrap_or(d.genuine_impostor_ratio),
            patience: self.patience.unwrap_or(d.patience),
            ..d
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Weight of the iris score in the static sum; the periocular score gets the rest.
    #[arg(long, default_value_t = 0.5)]
    static_weight: f64,
    /// Must match the value used by `match`; scales the iris score into [0, 1].
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ws,
    Hd,
    Perioc,
    Static,
    Dynamic,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Ws => Method::Ws,
            MethodArg::Hd => Method::Hd,
            MethodArg::Perioc => Method::Perioc,
            MethodArg::Static => Method::Static,
            MethodArg::Dynamic => Method::Dynamic,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Receives `roc.csv` and `summary.json`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "dynamic")]
    method: MethodArg,
    /// Add the left and right rows of every pair before evaluating.
    #[arg(long)]
    sum_rule: bool,
    #[arg(long, default_value_t = DEFAULT_FAR_TARGET)]
    far_target: f64,
    /// Name reported in the summary; defaults to the score file stem.
    #[arg(long)]
    dataset: Option<String>,
    /// Bin the ROC into this many thresholds instead of one per distinct score.
    #[arg(long)]
    roc_bins: Option<usize>,
    /// Reported only: the values `match` was run with.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SHIFT)]
    max_shift: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    points: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
}

#[derive(Serialize)]
struct Summary {
    dataset: String,
    method: &'static str,
    n_genuine: usize,
    n_impostor: usize,
    eer: f64,
    tar_at_far: f64,
    far_target: f64,
    alpha: f64,
    max_shift: usize,
    auc: f64,
    /// Threshold behind `tar_at_far`; a pair is accepted when its score is on
    /// the genuine side of it.
    threshold: f64,
    higher_is_genuine: bool,
    tar_under_resolved: bool,
    sum_rule: bool,
    excluded: usize,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<irisfuse::io::ScoreRow>> {
    Ok(parse_scores(&read_text(path)?).map_err(|e| e.in_file(path))?)
}

fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = args.config()?;
    let population = gen_population(&cfg)?;
    let degraded = population.degraded_subjects.clone();
    let data = Dataset::from(population);
    write_dataset(&args.out, &data)?;
    let mut record = serde_json::to_vec_pretty(&cfg)?;
    record.push(b'\n');
    write_bytes(&args.out.join("synth.json"), &record)?;
    print_json(&json!({
        "out": args.out,
        "entries": data.manifest.len(),
        "degraded_subjects": degraded,
    }))
}

fn run_match(args: &MatchArgs, threads: Option<usize>) -> Result<()> {
    let config = args.matcher.config()?;
    let data = load_dataset(&args.data)?;
    let protocol = match args.protocol {
        ProtocolArg::WithinSide => Protocol::AllVsAllWithinSide,
        ProtocolArg::SumRule => Protocol::LeftRightDisjoint,
    };
    let pairs = generate_pairs(&data.manifest, protocol)?;
    let rows = score_pairs(&data, &pairs, &config, threads)?;
    write_bytes(&args.out, &format_scores(&rows)?)?;
    print_json(&json!({
        "out": args.out,
        "n_genuine": pairs.genuine.len(),
        "n_impostor": pairs.impostor.len(),
        "rows": rows.len(),
    }))
}

fn fuse_train(args: &FuseTrainArgs) -> Result<()> {
    let rows = read_rows(&args.scores)?;
    let norm = fit_normalization(&rows)?;
    let data = training_set(&rows, &norm)?;
    let config = args.config();
    let outcome = train_mlp(&data, &config)?;
    let checkpoint = Checkpoint::new(&outcome, norm, config);
    write_bytes(&args.out, &encode_checkpoint(&checkpoint)?)?;
    print_json(&json!({
        "out": args.out,
        "samples": data.len(),
        "epochs_run": outcome.epochs_run,
        "best_epoch": outcome.best_epoch,
        "initial_loss": outcome.initial_loss,
        "final_loss": outcome.final_loss,
    }))
}

fn score(args: &ScoreArgs) -> Result<()> {
    let checkpoint = decode_checkpoint(&read_bytes(&args.model)?).map_err(|e| e.in_file(&args.model))?;
    let rows = read_rows(&args.scores)?;
    let fused = apply_fusion(&rows, &checkpoint.params()?, &checkpoint.normalization, args.alpha, args.static_weight)?;
    write_bytes(&args.out, &format_scores(&fused)?)?;
    print_json(&json!({ "out": args.out, "rows": fused.len() }))
}

fn eval(args: &EvalArgs) -> Result<()> {
    let method = Method::from(args.method);
    let rows = read_rows(&args.scores)?;
    let collected = method_scores(&rows, method, args.sum_rule)?;
    let scores = &collected.scores;
    let mode = match args.roc_bins {
        Some(n) => RocMode::Binned(n),
        None => RocMode::Exact,
    };
    let roc = roc_curve(scores, mode)?;
    let exact = match mode {
        RocMode::Exact => roc.clone(),
        RocMode::Binned(_) => roc_curve(scores, RocMode::Exact)?,
    };
    let tar = tar_at_far(scores, args.far_target)?;
    let dataset = match &args.dataset {
        Some(name) => name.clone(),
        None => args.scores.file_stem().map_or_else(|| "scores".to_string(), |s| s.to_string_lossy().into_owned()),
    };
    let summary = Summary {
        dataset,
        method: method.as_str(),
        n_genuine: scores.genuine.len(),
        n_impostor: scores.impostor.len(),
        eer: eer_from_roc(&exact),
        tar_at_far: tar.tar,
        far_target: args.far_target,
        alpha: args.alpha,
        max_shift: args.max_shift,
        auc: auc(&exact),
        threshold: tar.threshold,
        higher_is_genuine: scores.higher_is_genuine,
        tar_under_resolved: tar.under_resolved,
        sum_rule: args.sum_rule,
        excluded: collected.excluded,
    };
    write_bytes(&args.out_dir.join("roc.csv"), &format_roc(&roc)?)?;
    // Infinite thresholds are not valid JSON numbers.
    let mut value = serde_json::to_value(&summary)?;
    if !summary.threshold.is_finite() {
        value["threshold"] = json!(summary.threshold.to_string());
    }
    let mut text = serde_json::to_vec_pretty(&value)?;
    text.push(b'\n');
    write_bytes(&args.out_dir.join("summary.json"), &text)?;
    print_json(&value)
}

fn run_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let reports = gradcheck::run_all(args.seed, args.points);
    print_json(&reports)?;
    if let Some(r) = reports.iter().find(|r| !r.passed) {
        bail!("gradient check {} failed: max relative error {:e}", r.name, r.max_rel_error);
    }
    Ok(())
}

fn run_oracle(args: &OracleArgs) -> Result<()> {
    let report = oracle::run_equivalence(args.seed, args.pairs);
    print_json(&report)?;
    if !report.passed {
        bail!(
            "{} of {} pairs disagree with the reference; max |WS + HD - 1| = {:e}",
            report.mismatches.len(),
            report.pairs,
            report.ws_hd_max_deviation
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Match(a) => run_match(a, cli.threads),
        Command::FuseTrain(a) => fuse_train(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::Oracle(a) => run_oracle(a),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth(_) => "synth",
        Command::Match(_) => "match",
        Command::FuseTrain(_) => "fuse-train",
        Command::Score(_) => "score",
        Command::Eval(_) => "eval",
        Command::Gradcheck(_) => "gradcheck",
        Command::Oracle(_) => "oracle",
    }
}

/// The error chain, skipping causes a wrapper already spelled out.
fn describe(e: &anyhow::Error) -> String {
    let mut message = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !message.contains(&text) {
            if !message.is_empty() {
                message.push_str(": ");
            }
            message.push_str(&text);
        }
    }
    message
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string(), 2),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(command_name(&cli.command), describe(&e), 1),
    }
}
