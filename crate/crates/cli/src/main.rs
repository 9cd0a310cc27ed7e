//! `wavediff` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wavediff::numerics::Tensor2D;
use wavediff::pipeline::{
    ablation_suite, evaluate, evaluate_policy, plan_step, run, seed_list, train,
    train_generator, AblationMode, HistoryQueue, TrainConfig, TrainedBundle,
};
use wavediff::spectral::average_energy_density;
use wavediff::worldkit::{generate_mixture, Dataset, EnvKind, Environment, PolicySpec};
use wavediff::Error;

/// Share of bins, centred on zero frequency, reported in the summary row.
const CENTRAL_HALF_WIDTH: f64 = 0.1;

#[derive(Parser)]
#[command(name = "wavediff", version, about = "Wavelet-split trajectory diffusion planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an offline dataset as JSON Lines.
    GenData(GenDataArgs),
    /// Train a bundle and write a run directory.
    Train(TrainArgs),
    /// Evaluate a trained run in closed loop.
    Eval(EvalArgs),
    /// Generate one plan from a fresh initial state and write it as CSV.
    Sample(SampleArgs),
    /// Centred energy density of a dataset's state sequences, as CSV.
    AnalyzeSpectrum(SpectrumArgs),
    /// Train and evaluate every ablation mode plus the baseline.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct Common {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    env: String,
    /// Comma-separated behaviour policies: random, scripted_expert,
    /// scripted_noisy (uses --sigma), or noisy:<sigma>.
    #[arg(long, default_value = "scripted_expert")]
    policy: String,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Episodes per listed policy.
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Steps per episode.
    #[arg(long, default_value_t = 128)]
    horizon: usize,
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` config file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Overrides the config's ablation mode.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    run: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn parse_policy(name: &str, sigma: f64) -> Result<PolicySpec, Error> {
    match name.trim() {
        "scripted_expert" => Ok(PolicySpec::ScriptedExpert),
        "scripted_noisy" => format!("noisy:{sigma}").parse(),
        other => other.parse(),
    }
}

fn read_dataset(path: &Path) -> Result<(Dataset, String), Error> {
    Dataset::read(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
        other => other,
    })
}

fn load_config(path: Option<&Path>, seed: u64) -> Result<TrainConfig, Error> {
    let mut cfg = TrainConfig::default();
    if let Some(p) = path {
        let text = fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
        cfg.apply_text(&text)?;
    }
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn gen_data(a: &GenDataArgs) -> Result<(), Error> {
    let kind: EnvKind = a.env.parse()?;
    let mut env = Environment::new(kind);
    if let Some(g) = a.gamma {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {g}")));
        }
        env.gamma = g;
    }
    let parts = a
        .policy
        .split(',')
        .map(|p| Ok((parse_policy(p, a.sigma)?, a.episodes)))
        .collect::<Result<Vec<_>, Error>>()?;
    let ds = generate_mixture(&env, &parts, a.horizon, a.common.seed)?;
    let sum = ds.write(&a.common.out)?;
    eprintln!(
        "wrote {} episodes ({} transitions) to {} sha256={sum}",
        ds.episodes.len(),
        ds.transition_count(),
        a.common.out.display()
    );
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<(), Error> {
    let mut cfg = load_config(a.config.as_deref(), a.common.seed)?;
    if let Some(m) = &a.mode {
        cfg.mode = m.parse()?;
    }
    let (ds, sum) = read_dataset(&a.data)?;
    let out = train(&ds, &cfg)?;
    let baseline = if cfg.log_baseline && !cfg.mode.is_baseline() {
        let mut b = cfg.clone();
        b.mode = AblationMode::BaselineTimeDomain;
        Some(train_generator(&ds, &b)?.log)
    } else {
        None
    };
    let baseline = baseline.as_ref().or(cfg.mode.is_baseline().then_some(&out.log));
    run::write_training_run(&a.common.out, &cfg, &sum, &out.bundle, &out.log, baseline)?;
    if let Some(r) = out.inverse_report {
        eprintln!("inverse dynamics validation mse {:.3e}", r.validation_mse);
    }
    if let Some(last) = out.log.epochs.last() {
        eprintln!("final epoch loss {:.4} ratio {:.4}", last.loss, last.ratio);
    }
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<(), Error> {
    let bundle = TrainedBundle::load(&run::checkpoint_dir(&a.run))?;
    let cfg = &bundle.config;
    let episodes = a.episodes.unwrap_or(cfg.eval_episodes);
    let max_steps = a.max_steps.unwrap_or(cfg.eval_max_steps);
    let seeds = seed_list(a.common.seed, a.seeds.unwrap_or(cfg.eval_seeds));
    let env = bundle.env;
    let model = evaluate(&bundle, &env, &seeds, episodes, max_steps)?;
    let random = evaluate_policy(|| PolicySpec::Random, &env, &seeds, episodes, max_steps)?;
    let report = json!({
        "env": env.kind.to_string(),
        "mode": cfg.mode.to_string(),
        "episodes_per_seed": episodes,
        "max_steps": max_steps,
        "model": model,
        "random": random,
    });
    run::write_json(&a.common.out, &report)?;
    eprintln!(
        "model {:.4} ± {:.4}, random {:.4} ± {:.4}",
        model.mean, model.stderr, random.mean, random.stderr
    );
    Ok(())
}

fn sample_cmd(a: &SampleArgs) -> Result<(), Error> {
    let bundle = TrainedBundle::load(&run::checkpoint_dir(&a.run))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut queue = HistoryQueue::new(bundle.config.history);
    queue.push(bundle.env.initial_state(&mut rng));
    let out = plan_step(&bundle, &queue, &mut rng)?;
    fs::write(&a.common.out, plan_csv(&out.plan, &out.action))?;
    Ok(())
}

fn plan_csv(plan: &Tensor2D, action: &[f64]) -> String {
    let mut s = String::from("step");
    for c in 0..plan.cols() {
        write!(s, ",s{c}").expect("string write");
    }
    s.push('\n');
    for r in 0..plan.rows() {
        write!(s, "{r}").expect("string write");
        for v in plan.row(r) {
            write!(s, ",{v}").expect("string write");
        }
        s.push('\n');
    }
    let joined: Vec<String> = action.iter().map(f64::to_string).collect();
    writeln!(s, "# action {}", joined.join(" ")).expect("string write");
    s
}

fn spectrum_cmd(a: &SpectrumArgs) -> Result<(), Error> {
    let (ds, _) = read_dataset(&a.data)?;
    let seqs = ds
        .episodes
        .iter()
        .map(|e| Tensor2D::from_rows(&e.states))
        .collect::<Result<Vec<_>, _>>()?;
    let ed = average_energy_density(&seqs)?;
    let d = ed.density.cols();
    let mut s = String::from("freq");
    for c in 0..d {
        write!(s, ",dim{c}").expect("string write");
    }
    s.push('\n');
    for (r, f) in ed.frequencies.iter().enumerate() {
        write!(s, "{f}").expect("string write");
        for v in ed.density.row(r) {
            write!(s, ",{v}").expect("string write");
        }
        s.push('\n');
    }
    write!(s, "central_band_share").expect("string write");
    for v in ed.band_share(CENTRAL_HALF_WIDTH) {
        write!(s, ",{v}").expect("string write");
    }
    s.push('\n');
    fs::write(&a.common.out, s)?;
    Ok(())
}

fn ablate_cmd(a: &AblateArgs) -> Result<(), Error> {
    let cfg = load_config(a.config.as_deref(), a.common.seed)?;
    let (ds, sum) = read_dataset(&a.data)?;
    let report = ablation_suite(&ds, &sum, &cfg)?;
    fs::create_dir_all(&a.common.out)?;
    let mut csv = String::from("mode,mean_return,stderr,final_ratio,dataset_sha256,seeds\n");
    for row in &report.rows {
        let seeds: Vec<String> = row.eval.seeds.iter().map(u64::to_string).collect();
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.mode,
            row.eval.mean,
            row.eval.stderr,
            row.log.final_ratio().unwrap_or(f64::NAN),
            row.dataset_checksum,
            seeds.join(" ")
        )
        .expect("string write");
        fs::write(
            a.common.out.join(format!("freqshift_{}.csv", row.mode)),
            run::freqshift_csv(&row.log, None)?,
        )?;
    }
    fs::write(a.common.out.join("ablation.csv"), csv)?;
    fs::write(a.common.out.join(run::CONFIG_FILE), cfg.to_text())?;
    Ok(())
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("WAVEDIFF_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("WAVEDIFF_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::Config("WAVEDIFF_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::AnalyzeSpectrum(a) => spectrum_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
