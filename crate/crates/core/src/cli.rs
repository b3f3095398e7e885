//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation error, 2 usage error, 3 internal
//! error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::eval::{self, EvalOptions};
use crate::fusion::{self, InferenceConfig, MarginalTable, Mode};
use crate::geometry::FitParams;
use crate::hypothesis;
use crate::oracle;
use crate::report::{round12, Report};
use crate::scene::{self, ParsedScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    Usage = 2,
    Internal = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
struct CliError {
    status: ExitStatus,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Validation,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Usage,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Internal,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "witb",
    version,
    about = "Infer where hidden objects are from what boxes look and sound like"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute per-object placement probabilities for a scene.
    Infer(InferArgs),
    /// Count (and optionally list) placement hypotheses.
    Enumerate(EnumerateArgs),
    /// Correlate model reports with human ratings.
    Eval(EvalArgs),
    /// Brute-force reference report for a zero-variance scene, or generate a
    /// synthetic scene.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model variant: full, audio or vision.
    #[arg(long, default_value = "full")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trials per visual likelihood.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Packing efficiency in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Lower clamp for sampled lengths (cm).
    #[arg(long, default_value_t = 0.1)]
    dim_floor: f64,
    #[arg(long)]
    allow_empty_boxes: bool,
    #[arg(long, default_value_t = 1e-6)]
    audio_floor: f64,
    /// Run single-threaded. Output is identical either way.
    #[arg(long)]
    serial: bool,
}

impl ModelArgs {
    fn config(&self) -> InferenceConfig {
        InferenceConfig {
            mode: self.mode,
            fit_params: FitParams {
                n_samples: self.samples,
                packing_efficiency: self.eta,
                dim_floor: self.dim_floor,
                master_seed: self.seed,
                parallel: !self.serial,
            },
            allow_empty_boxes: self.allow_empty_boxes,
            audio_floor: self.audio_floor,
            hypothesis_cap: hypothesis::DEFAULT_HYPOTHESIS_CAP,
        }
    }
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    scene: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnumerateArgs {
    #[arg(long)]
    objects: usize,
    #[arg(long)]
    boxes: usize,
    #[arg(long)]
    allow_empty: bool,
    /// Also print every placement, one box-index vector per line.
    #[arg(long)]
    list: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of report documents produced by `infer`.
    #[arg(long)]
    reports: PathBuf,
    /// Ratings table with header scenario_id,participant_id,object,box,rating.
    #[arg(long)]
    human: PathBuf,
    /// Drop scenarios whose split-half agreement is below this value.
    #[arg(long, default_value_t = eval::DEFAULT_EXCLUSION_THRESHOLD)]
    exclude_below: f64,
    /// Disable split-half screening.
    #[arg(long)]
    no_exclusion: bool,
    #[arg(long, default_value_t = eval::DEFAULT_SPLITS)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reject rating groups that do not sum to 100.
    #[arg(long)]
    strict: bool,
    /// Pair individual ratings instead of per-cell means.
    #[arg(long)]
    per_participant: bool,
    /// Include the paired points in the output.
    #[arg(long)]
    points: bool,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, required_unless_present = "generate")]
    scene: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Write a synthetic scene instead of running the reference model.
    #[arg(long)]
    generate: bool,
    #[arg(long, default_value_t = 3)]
    objects: usize,
    #[arg(long, default_value_t = 2)]
    boxes: usize,
    #[arg(long, default_value_t = 0.0)]
    confusion: f64,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command, writing
/// results to `out` and messages to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    ExitStatus::Success
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    ExitStatus::Usage
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Infer(a) => cmd_infer(a, err),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Eval(a) => cmd_eval(a, err),
        Command::Oracle(a) => cmd_oracle(a, err),
    };
    let emitted = result.and_then(|(text, path)| emit(&text, path.as_deref(), out));
    match emitted {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.status
        }
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| CliError::internal(format!("{}: {e}", p.display())))
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::internal(format!("stdout: {e}"))),
    }
}

fn read_scene(path: &Path, err: &mut dyn Write) -> CliResult<ParsedScene> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let (scene, warnings) = scene::load_scene_with_warnings(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    for w in warnings {
        let _ = writeln!(err, "warning: {}: {w}", path.display());
    }
    Ok(scene)
}

fn checked_config(model: &ModelArgs) -> CliResult<InferenceConfig> {
    let cfg = model.config();
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

type Output = (String, Option<PathBuf>);

fn cmd_infer(args: &InferArgs, err: &mut dyn Write) -> CliResult<Output> {
    let cfg = checked_config(&args.model)?;
    let scene = read_scene(&args.scene, err)?;
    let inference = fusion::infer(&scene, &cfg)
        .map_err(|e| CliError::validation(format!("{}: {e}", args.scene.display())))?;
    Ok((
        Report::from_inference(&scene, &cfg, &inference).to_json(),
        args.output.clone(),
    ))
}

fn cmd_enumerate(args: &EnumerateArgs) -> CliResult<Output> {
    let count = hypothesis::count_hypotheses(args.objects, args.boxes, args.allow_empty)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let mut text = format!("{count}\n");
    if args.list {
        let set = hypothesis::enumerate_hypotheses(args.objects, args.boxes, args.allow_empty)
            .map_err(|e| CliError::validation(e.to_string()))?;
        for p in &set {
            let line: Vec<String> = p.assignment().iter().map(|b| b.to_string()).collect();
            text.push_str(&format!("[{}]\n", line.join(",")));
        }
    } else if count > hypothesis::DEFAULT_HYPOTHESIS_CAP {
        return Err(CliError::validation(
            hypothesis::HypothesisError::CapExceeded {
                count: count.to_string(),
                cap: hypothesis::DEFAULT_HYPOTHESIS_CAP,
            }
            .to_string(),
        ));
    }
    Ok((text, None))
}

fn load_reports(dir: &Path) -> CliResult<BTreeMap<String, BTreeMap<String, MarginalTable>>> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut models: BTreeMap<String, BTreeMap<String, MarginalTable>> = BTreeMap::new();
    for p in paths {
        let text = fs::read_to_string(&p)
            .map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
        let report: Report = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: not a report: {e}", p.display())))?;
        let slot = models.entry(report.mode.to_string()).or_default();
        if slot
            .insert(report.scenario_id.clone(), report.marginal_table())
            .is_some()
        {
            return Err(CliError::validation(format!(
                "{}: duplicate report for scenario `{}` in mode `{}`",
                p.display(),
                report.scenario_id,
                report.mode
            )));
        }
    }
    Ok(models)
}

fn cmd_eval(args: &EvalArgs, err: &mut dyn Write) -> CliResult<Output> {
    let human = fs::read_to_string(&args.human)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.human.display())))?;
    let models = load_reports(&args.reports)?;
    let loaded = eval::load_ratings(&human, args.strict)
        .map_err(|e| CliError::validation(format!("{}: {e}", args.human.display())))?;
    for w in &loaded.warnings {
        let _ = writeln!(err, "warning: {}: {w}", args.human.display());
    }
    let opts = EvalOptions {
        exclusion_threshold: (!args.no_exclusion).then_some(args.exclude_below),
        n_splits: args.splits,
        seed: args.seed,
        per_participant: args.per_participant,
    };
    let mut report = eval::correlate(&models, &loaded.ratings, &opts)
        .map_err(|e| CliError::validation(e.to_string()))?;
    for m in report.modes.values_mut() {
        m.r = round12(m.r);
        if args.points {
            for p in &mut m.points {
                p.human = round12(p.human);
                p.model = round12(p.model);
            }
        } else {
            m.points.clear();
        }
    }
    for v in report.split_half.values_mut() {
        *v = v.map(round12);
    }
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::internal(e.to_string()))?;
    text.push('\n');
    Ok((text, args.output.clone()))
}

fn cmd_oracle(args: &OracleArgs, err: &mut dyn Write) -> CliResult<Output> {
    if args.generate {
        if args.objects == 0 || args.boxes == 0 {
            return Err(CliError::usage("--objects and --boxes must be at least 1"));
        }
        let synth =
            oracle::generate_scene(args.model.seed, args.objects, args.boxes, args.confusion);
        return Ok((scene::serialize_scene(&synth.scene), args.output.clone()));
    }
    let cfg = checked_config(&args.model)?;
    let path = args
        .scene
        .as_ref()
        .ok_or_else(|| CliError::usage("--scene is required"))?;
    let scene = read_scene(path, err)?;
    let fail = |e: oracle::OracleError| CliError::validation(format!("{}: {e}", path.display()));
    let marginals = oracle::brute_force_marginals(&scene, &cfg).map_err(fail)?;
    let report = if cfg.mode == Mode::Audio {
        let fallback = fusion::audio_only_baseline(&scene).uniform_fallback;
        Report::build(&scene, &cfg, cfg.mode, &marginals, None, fallback)
    } else {
        let post = oracle::brute_force_posterior(&scene, &cfg).map_err(fail)?;
        let summary = oracle::brute_force_summary(&post);
        Report::build(
            &scene,
            &cfg,
            cfg.mode,
            &marginals,
            Some(&summary),
            Vec::new(),
        )
    };
    Ok((report.to_json(), args.output.clone()))
}
