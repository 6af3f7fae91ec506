//! The `gmc` command line: every subcommand writes its artifacts and a
//! `run.manifest` under `--out-dir`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use gmc_core::control::{evaluate_success, ControllerConfig, Method};
use gmc_core::data::{
    gen_maze, gen_spiral, load_csv_series, load_dataset, save_dataset, DifficultyTier, MazeGenParams, MazeSpec, Split,
    SpiralParams, TrajectoryDataset,
};
use gmc_core::encoder::EncoderPair;
use gmc_core::eval::{eval_waypoints, inpaint_windows, representation_moments, Banks, Planner, WAYPOINT_METHODS};
use gmc_core::inference::{interpolate_special, log_density_many, plan_chain, predict_future, predict_past, PlanResult};
use gmc_core::objective::{train, train_from, TrainConfig};
use gmc_core::oracle::{fit_tabular_critic, uniformity_entropy_check, verify_assumption2, TabularChain};
use gmc_core::tensor::Vector;

pub const MANIFEST_NAME: &str = "run.manifest";
pub const DATASET_NAME: &str = "dataset.jsonl";
pub const CHECKPOINT_NAME: &str = "encoder.gmc";

/// Metric agreement required by `replay`.
pub const REPLAY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Anything that went wrong while running: exit code 1.
    #[error(transparent)]
    Run(#[from] gmc_core::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gmc", version, about = "Temporal contrastive representations and Gauss-Markov planning")]
pub struct Cli {
    /// Seed for generation, training and evaluation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Training config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train an encoder.
    Train(TrainArgs),
    /// Run the oracle suite and, given a checkpoint, the representation checks.
    Verify(VerifyArgs),
    /// Plan waypoints between two validation observations.
    Plan(PlanArgs),
    /// Predict the future or past of a validation observation.
    Predict(PredictArgs),
    /// Waypoint MSE of contrastive planning against the interpolation baselines.
    EvalWaypoints(EvalWaypointsArgs),
    /// Fill in the middle of CSV windows.
    Inpaint(InpaintArgs),
    /// Maze success rates by difficulty tier and method.
    RolloutEval(RolloutArgs),
    /// Re-run the command recorded in a manifest and compare its metrics.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Spiral,
    Maze,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: DatasetKind,
    #[arg(long)]
    pub num_traj: Option<usize>,
    /// Spiral trajectory length.
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long)]
    pub noise_std: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["dataset", "csv"])))]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Train on a CSV time series sliced into windows.
    #[arg(long, requires = "window")]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Overrides `steps` from the config.
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, requires = "dataset")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Critic fitting steps for the oracle suite.
    #[arg(long, default_value_t = 10_000)]
    pub oracle_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanMode {
    Chain,
    Special,
}

impl From<PlanMode> for Planner {
    fn from(m: PlanMode) -> Self {
        match m {
            PlanMode::Chain => Planner::Chain,
            PlanMode::Special => Planner::Interpolate,
        }
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Index into the validation observations.
    #[arg(long)]
    pub start_idx: usize,
    #[arg(long)]
    pub goal_idx: usize,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = PlanMode::Chain)]
    pub mode: PlanMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Future,
    Past,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub idx: usize,
    #[arg(long, value_enum, default_value_t = Direction::Future)]
    pub direction: Direction,
}

#[derive(Debug, Args)]
pub struct EvalWaypointsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = PlanMode::Special)]
    pub mode: PlanMode,
}

#[derive(Debug, Args)]
pub struct InpaintArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = PlanMode::Special)]
    pub mode: PlanMode,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub n_waypoints: usize,
    /// Episodes per difficulty tier.
    #[arg(long, default_value_t = 50)]
    pub episodes: usize,
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long)]
    pub waypoint_tolerance: Option<f64>,
    #[arg(long)]
    pub success_radius: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Everything needed to re-run a command and check its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub seed: u64,
    pub config: Option<TrainConfig>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub metrics: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Other(format!("bad manifest {}: {e}", path.display())))
    }
}

struct Run<'a> {
    cli: &'a Cli,
    manifest: RunManifest,
}

impl<'a> Run<'a> {
    fn new(cli: &'a Cli, args: Vec<String>, command: &str) -> CliResult<Self> {
        fs::create_dir_all(&cli.out_dir)?;
        Ok(Run {
            cli,
            manifest: RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                args,
                cwd: std::env::current_dir()?,
                seed: cli.seed.unwrap_or(0),
                config: None,
                dataset: None,
                checkpoint: None,
                artifacts: Vec::new(),
                metrics: BTreeMap::new(),
            },
        })
    }

    fn seed(&self) -> u64 {
        self.manifest.seed
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.cli.out_dir.join(name);
        fs::write(&path, contents)?;
        self.manifest.artifacts.push(path.clone());
        Ok(path)
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.manifest.metrics.insert(name.into(), value);
    }

    fn finish(mut self) -> CliResult<RunManifest> {
        let path = self.cli.out_dir.join(MANIFEST_NAME);
        self.manifest.artifacts.push(path.clone());
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Other(e.to_string()))?;
        fs::write(&path, text)?;
        if !self.cli.quiet {
            for (k, v) in &self.manifest.metrics {
                println!("{k}: {v}");
            }
        }
        Ok(self.manifest)
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run_args<I, S>(args: I) -> CliResult<RunManifest>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(std::iter::once("gmc".to_string()).chain(args.iter().cloned()))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    run(&cli, args)
}

pub fn run(cli: &Cli, args: Vec<String>) -> CliResult<RunManifest> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(Run::new(cli, args, "gen")?, a),
        Command::Train(a) => cmd_train(Run::new(cli, args, "train")?, a),
        Command::Verify(a) => cmd_verify(Run::new(cli, args, "verify")?, a),
        Command::Plan(a) => cmd_plan(Run::new(cli, args, "plan")?, a),
        Command::Predict(a) => cmd_predict(Run::new(cli, args, "predict")?, a),
        Command::EvalWaypoints(a) => cmd_eval_waypoints(Run::new(cli, args, "eval-waypoints")?, a),
        Command::Inpaint(a) => cmd_inpaint(Run::new(cli, args, "inpaint")?, a),
        Command::RolloutEval(a) => cmd_rollout_eval(Run::new(cli, args, "rollout-eval")?, a),
        Command::Replay(a) => cmd_replay(cli, args, a),
    }
}

fn train_config(cli: &Cli) -> CliResult<TrainConfig> {
    let usage = |e: gmc_core::Error| CliError::Usage(format!("bad config: {e}"));
    let mut cfg = match &cli.config {
        Some(p) => TrainConfig::load(p).map_err(usage)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn dataset_checksum(ds: &TrajectoryDataset) -> f64 {
    ds.trajectories
        .iter()
        .flat_map(|t| t.observations.iter())
        .map(|o| o.iter().sum::<f64>())
        .sum()
}

fn cmd_gen(mut run: Run, a: &GenArgs) -> CliResult<RunManifest> {
    let seed = run.seed();
    let ds = match a.kind {
        DatasetKind::Spiral => {
            let d = SpiralParams::default();
            let p = SpiralParams {
                num_traj: a.num_traj.unwrap_or(d.num_traj),
                len: a.len.unwrap_or(d.len),
                noise_std: a.noise_std.unwrap_or(d.noise_std),
                ..d
            };
            gen_spiral(&p, seed)?
        }
        DatasetKind::Maze => {
            if a.len.is_some() {
                return Err(CliError::Usage("--len applies to spiral datasets only".into()));
            }
            let d = MazeGenParams::default();
            let p = MazeGenParams {
                num_traj: a.num_traj.unwrap_or(d.num_traj),
                noise_std: a.noise_std.unwrap_or(d.noise_std),
                ..d
            };
            gen_maze(&MazeSpec::default_u_maze(), &p, seed)?
        }
    };
    let path = run.cli.out_dir.join(DATASET_NAME);
    save_dataset(&ds, &path)?;
    run.manifest.artifacts.push(path.clone());
    run.manifest.dataset = Some(path.clone());
    run.metric("num_trajectories", ds.len() as f64);
    run.metric("num_observations", ds.num_observations() as f64);
    run.metric("checksum", dataset_checksum(&ds));
    run.say(format!("wrote {}", path.display()));
    run.finish()
}

fn load_encoder(path: &Path) -> CliResult<EncoderPair> {
    Ok(EncoderPair::load(path)?)
}

fn cmd_train(mut run: Run, a: &TrainArgs) -> CliResult<RunManifest> {
    let mut cfg = train_config(run.cli)?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    let ds = match (&a.dataset, &a.csv) {
        (Some(p), _) => {
            run.manifest.dataset = Some(p.clone());
            load_dataset(p)?
        }
        (None, Some(p)) => {
            run.manifest.dataset = Some(p.clone());
            let window = a.window.ok_or_else(|| CliError::Usage("--csv needs --window".into()))?;
            load_csv_series(p, window)?.0
        }
        (None, None) => return Err(CliError::Usage("one of --dataset or --csv is required".into())),
    };
    let out = match &a.resume {
        Some(p) => train_from(load_encoder(p)?, &ds, &cfg)?,
        None => train(&ds, &cfg)?,
    };
    let ckpt = run.cli.out_dir.join(CHECKPOINT_NAME);
    out.encoder.save(&ckpt)?;
    run.manifest.artifacts.push(ckpt.clone());
    run.manifest.checkpoint = Some(ckpt.clone());
    let mut curve = String::from("step\tloss\tinfonce\tconstraint\tlambda\n");
    for p in &out.curve {
        writeln!(curve, "{}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}", p.step, p.loss, p.infonce, p.constraint, p.lambda).unwrap();
    }
    run.write("curve.tsv", &curve)?;
    if let Some(last) = out.curve.last() {
        run.metric("final_loss", last.loss);
        run.metric("final_constraint", last.constraint);
        run.metric("final_lambda", last.lambda);
    }
    run.metric("total_steps", out.encoder.steps as f64);
    run.manifest.config = Some(cfg);
    run.say(format!("wrote {}", ckpt.display()));
    run.finish()
}

struct Report {
    text: String,
}

impl Report {
    fn check(&mut self, run: &mut Run, name: &str, value: f64, pass: bool, threshold: &str) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        writeln!(self.text, "check: {name}\tstatus: {verdict}\tvalue: {value:.6}\tthreshold: {threshold}").unwrap();
        run.metric(format!("{name}.value"), value);
        run.metric(format!("{name}.pass"), pass as u8 as f64);
    }
}

fn cmd_verify(mut run: Run, a: &VerifyArgs) -> CliResult<RunManifest> {
    let seed = run.seed();
    let mut report = Report { text: String::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chain = TabularChain::random(5, 0.9, &mut rng)?;
    let critic = fit_tabular_critic(&chain, 256, a.oracle_steps, seed)?;
    let a2 = verify_assumption2(&critic, &chain)?;
    report.check(&mut run, "assumption2_max_dev", a2.max_abs_dev, a2.max_abs_dev <= 0.05, "<= 0.05");
    run.metric("assumption2_offset", a2.offset);
    run.metric("assumption2_row_offset_variance", a2.row_offset_variance);
    run.metric("assumption2_excluded_pairs", a2.excluded_pairs as f64);
    let cloud: Vec<Vector> = (0..500)
        .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let ue = uniformity_entropy_check(&cloud)?;
    report.check(&mut run, "entropy_identity_residual", ue.identity_residual.abs(), true, "<= 1e-10");

    if let (Some(ck), Some(dp)) = (&a.checkpoint, &a.dataset) {
        run.manifest.checkpoint = Some(ck.clone());
        run.manifest.dataset = Some(dp.clone());
        let enc = load_encoder(ck)?;
        let ds = load_dataset(dp)?;
        let val: Vec<Vector> = ds.observations(Split::Validation).into_iter().map(|(o, _)| o).collect();
        if val.len() < 3 {
            return Err(CliError::Other("validation split has fewer than 3 observations".into()));
        }
        let psis = enc.psi_many(&val)?;
        let m = representation_moments(&psis)?;
        let (c, k) = (enc.c, enc.repr_dim() as f64);
        report.check(&mut run, "mean_sq_norm_over_k", m.mean_sq_norm, m.norm_ok(c), &format!("in [{:.3}, {:.3}]", 0.8 * c, 1.2 * c));
        report.check(&mut run, "mean_norm", m.mean_norm, m.mean_ok(c), &format!("<= {:.4}", 0.2 * (c * k).sqrt()));
        report.check(&mut run, "max_offdiag_corr", m.max_offdiag_corr, m.corr_ok(), "<= 0.25");
        for (i, v) in m.variances.iter().enumerate() {
            run.metric(format!("variance.{i}"), *v);
        }
        // the kernel estimate is quadratic in the sample count
        let stride = (psis.len() / 2000).max(1);
        let sub: Vec<Vector> = psis.iter().step_by(stride).cloned().collect();
        let ue = uniformity_entropy_check(&sub)?;
        report.check(&mut run, "repr_entropy_identity_residual", ue.identity_residual.abs(), true, "<= 1e-10");
        run.metric("repr_uniformity", ue.uniformity);
        run.metric("repr_entropy_estimate", ue.entropy);
    }
    let path = run.write("verify.txt", &report.text)?;
    run.say(report.text.trim_end());
    run.say(format!("wrote {}", path.display()));
    run.finish()
}

fn bank_index(banks: &Banks, idx: usize, flag: &str) -> CliResult<usize> {
    if idx >= banks.observations.len() {
        return Err(CliError::Usage(format!(
            "{flag} {idx} is out of range: the validation bank has {} observations",
            banks.observations.len()
        )));
    }
    Ok(idx)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(",")
}

fn cmd_plan(mut run: Run, a: &PlanArgs) -> CliResult<RunManifest> {
    let enc = load_encoder(&a.checkpoint)?;
    let ds = load_dataset(&a.dataset)?;
    run.manifest.checkpoint = Some(a.checkpoint.clone());
    run.manifest.dataset = Some(a.dataset.clone());
    let banks = Banks::new(&enc, &ds, Split::Validation)?;
    let (s, g) = (bank_index(&banks, a.start_idx, "--start-idx")?, bank_index(&banks, a.goal_idx, "--goal-idx")?);
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let (p0, pt) = (enc.psi(&banks.observations[s])?, enc.psi(&banks.observations[g])?);
    let plan: PlanResult = match a.mode {
        PlanMode::Chain => plan_chain(&p0, &pt, a.n, &enc.a_matrix, enc.c)?,
        PlanMode::Special => interpolate_special(&p0, &pt, a.n, &enc.a_matrix)?,
    };
    let mut out = String::from("waypoint\tmean\tcov_diag\tretrieved\n");
    for (i, w) in plan.waypoints.iter().enumerate() {
        let mean = w.mean();
        let cov = w.covariance();
        let retrieved = banks.retrieve_by_repr(&mean)?;
        writeln!(out, "{}\t{}\t{}\t{}", i + 1, join(&mean), join(cov.diag().as_slice()), join(retrieved)).unwrap();
        run.metric(format!("mean_norm.{}", i + 1), mean.norm());
    }
    run.metric("approximate", plan.approximate as u8 as f64);
    let path = run.write("plan.tsv", &out)?;
    run.say(format!("wrote {}", path.display()));
    run.finish()
}

fn cmd_predict(mut run: Run, a: &PredictArgs) -> CliResult<RunManifest> {
    let enc = load_encoder(&a.checkpoint)?;
    let ds = load_dataset(&a.dataset)?;
    run.manifest.checkpoint = Some(a.checkpoint.clone());
    run.manifest.dataset = Some(a.dataset.clone());
    let banks = Banks::new(&enc, &ds, Split::Validation)?;
    let i = bank_index(&banks, a.idx, "--idx")?;
    let psi = enc.psi(&banks.observations[i])?;
    let belief = match a.direction {
        Direction::Future => predict_future(&psi, &enc.a_matrix, enc.c)?,
        Direction::Past => predict_past(&psi, &enc.a_matrix, enc.c)?,
    };
    let reprs = enc.psi_many(&banks.observations)?;
    let dens = log_density_many(&belief, &reprs)?;
    let mean = belief.mean();
    let cov = belief.covariance();
    let mut out = format!("# mean\t{}\n# cov_diag\t{}\nbank_index\tobservation\tlog_density\n", join(&mean), join(cov.diag().as_slice()));
    for (j, (o, d)) in banks.observations.iter().zip(&dens).enumerate() {
        writeln!(out, "{j}\t{}\t{d:.10e}", join(o)).unwrap();
    }
    let best = dens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    run.metric("max_log_density", best);
    run.metric("mean_log_density", dens.iter().sum::<f64>() / dens.len() as f64);
    run.metric("mean_norm", mean.norm());
    let path = run.write("predict.tsv", &out)?;
    run.say(format!("wrote {}", path.display()));
    run.finish()
}

fn cmd_eval_waypoints(mut run: Run, a: &EvalWaypointsArgs) -> CliResult<RunManifest> {
    let enc = load_encoder(&a.checkpoint)?;
    let ds = load_dataset(&a.dataset)?;
    run.manifest.checkpoint = Some(a.checkpoint.clone());
    run.manifest.dataset = Some(a.dataset.clone());
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let r = eval_waypoints(&enc, &ds, a.n, a.mode.into())?;
    let mut out = String::from("method\twaypoint\tmse\n");
    for (m, name) in WAYPOINT_METHODS.iter().enumerate() {
        for (i, v) in r.per_index[m].iter().enumerate() {
            writeln!(out, "{name}\t{}\t{v:.10e}", i + 1).unwrap();
        }
        run.metric(format!("mse.{name}"), r.mse[m]);
    }
    run.metric("num_pairs", r.num_pairs as f64);
    run.metric("skipped", r.skipped as f64);
    let path = run.write("waypoints.tsv", &out)?;
    run.say(format!("wrote {}", path.display()));
    run.finish()
}

fn cmd_inpaint(mut run: Run, a: &InpaintArgs) -> CliResult<RunManifest> {
    let enc = load_encoder(&a.checkpoint)?;
    run.manifest.checkpoint = Some(a.checkpoint.clone());
    run.manifest.dataset = Some(a.csv.clone());
    let (ds, report) = load_csv_series(&a.csv, a.window)?;
    if report.num_dropped() > 0 {
        run.say(format!(
            "dropped columns: missing [{}] constant [{}]",
            report.dropped_missing.join(", "),
            report.dropped_constant.join(", ")
        ));
    }
    let points = inpaint_windows(&enc, &ds, a.n, a.mode.into())?;
    let mut out = String::from("window\tstep\tcolumn\ttrue\tcontrastive\tobs_interp\n");
    let (mut se_c, mut se_l, mut count) = (0.0, 0.0, 0usize);
    for p in &points {
        for (d, name) in report.kept.iter().enumerate() {
            let raw = |v: &Vector| v[d] * report.stds[d] + report.means[d];
            writeln!(
                out,
                "{}\t{}\t{name}\t{:.10e}\t{:.10e}\t{:.10e}",
                p.window,
                p.step,
                raw(&p.truth),
                raw(&p.contrastive),
                raw(&p.obs_interp)
            )
            .unwrap();
            se_c += (p.contrastive[d] - p.truth[d]).powi(2);
            se_l += (p.obs_interp[d] - p.truth[d]).powi(2);
            count += 1;
        }
    }
    run.metric("mse.contrastive", se_c / count as f64);
    run.metric("mse.obs-interp", se_l / count as f64);
    run.metric("columns_kept", report.kept.len() as f64);
    run.metric("columns_dropped", report.num_dropped() as f64);
    let mut cols = String::from("column\tstatus\n");
    for c in &report.kept {
        writeln!(cols, "{c}\tkept").unwrap();
    }
    for c in &report.dropped_missing {
        writeln!(cols, "{c}\tdropped_missing").unwrap();
    }
    for c in &report.dropped_constant {
        writeln!(cols, "{c}\tdropped_constant").unwrap();
    }
    run.write("columns.tsv", &cols)?;
    let path = run.write("inpaint.tsv", &out)?;
    run.say(format!("wrote {}", path.display()));
    run.finish()
}

fn cmd_rollout_eval(mut run: Run, a: &RolloutArgs) -> CliResult<RunManifest> {
    let enc = load_encoder(&a.checkpoint)?;
    let ds = load_dataset(&a.dataset)?;
    run.manifest.checkpoint = Some(a.checkpoint.clone());
    run.manifest.dataset = Some(a.dataset.clone());
    let d = ControllerConfig::default();
    let ctrl = ControllerConfig {
        gain: a.gain.unwrap_or(d.gain),
        max_step: a.max_step.unwrap_or(d.max_step),
        waypoint_tolerance: a.waypoint_tolerance.unwrap_or(d.waypoint_tolerance),
        success_radius: a.success_radius.unwrap_or(d.success_radius),
        max_steps: a.max_steps.unwrap_or(d.max_steps),
    };
    ctrl.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let table = evaluate_success(&enc, &MazeSpec::default_u_maze(), &ds, &ctrl, a.n_waypoints, a.episodes, run.seed())?;
    for tier in DifficultyTier::ALL {
        for m in Method::ALL {
            if let Some(c) = table.cell(tier, m) {
                run.metric(format!("rate.{tier}.{m}"), c.rate());
                run.metric(format!("mean_steps.{tier}.{m}"), c.mean_steps);
            }
        }
    }
    let mut eps = String::from("method\ttier\tstart\tgoal\tsuccess\tsteps\twaypoints\n");
    for (m, r) in &table.records {
        let wps: Vec<String> = r.waypoints_used.iter().map(|w| join(w)).collect();
        writeln!(
            eps,
            "{m}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.difficulty_tier,
            join(&r.start),
            join(&r.goal),
            r.success,
            r.steps_taken,
            wps.join(";")
        )
        .unwrap();
    }
    run.write("episodes.tsv", &eps)?;
    let path = run.write("success.txt", &format!("{table}\n"))?;
    run.say(table.to_string());
    run.say(format!("wrote {}", path.display()));
    run.finish()
}

/// Replaces the value of `--out-dir` (or appends one).
fn with_out_dir(args: &[String], out: &Path) -> Vec<String> {
    let mut res = Vec::with_capacity(args.len() + 2);
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out-dir" {
            skip = true;
            continue;
        }
        if a.starts_with("--out-dir=") {
            continue;
        }
        res.push(a.clone());
    }
    res.push("--out-dir".into());
    res.push(out.display().to_string());
    res
}

fn cmd_replay(cli: &Cli, args: Vec<String>, a: &ReplayArgs) -> CliResult<RunManifest> {
    let old = RunManifest::load(&a.manifest)?;
    if old.command == "replay" {
        return Err(CliError::Usage("cannot replay a replay manifest".into()));
    }
    fs::create_dir_all(&cli.out_dir)?;
    let out = std::path::absolute(cli.out_dir.join("replayed"))?;
    let here = std::env::current_dir()?;
    std::env::set_current_dir(&old.cwd)?;
    let fresh = run_args(with_out_dir(&old.args, &out));
    std::env::set_current_dir(here)?;
    let fresh = fresh?;

    let mut run = Run::new(cli, args, "replay")?;
    let mut worst: f64 = 0.0;
    let mut lines = String::new();
    for (k, v) in &old.metrics {
        let Some(w) = fresh.metrics.get(k) else {
            return Err(CliError::Other(format!("metric {k} missing from the replay")));
        };
        let gap = (v - w).abs() / v.abs().max(1.0);
        worst = worst.max(gap);
        writeln!(lines, "{k}\t{v:.10e}\t{w:.10e}\t{gap:.3e}").unwrap();
    }
    run.metric("metrics_compared", old.metrics.len() as f64);
    run.metric("max_relative_gap", worst);
    run.write("replay.tsv", &format!("metric\trecorded\treplayed\tgap\n{lines}"))?;
    if worst > REPLAY_TOLERANCE {
        return Err(CliError::Other(format!("replay differs from the manifest by {worst:e}")));
    }
    run.say(format!("replay matched {} metrics (max relative gap {worst:.3e})", old.metrics.len()));
    run.finish()
}
