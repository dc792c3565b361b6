use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use rl_lab::config::{RawConfig, RunConfig};
use rl_lab::diag::{write_grid, GridSpec, Spacing};
use rl_lab::error::{usage, CliError, CliResult};
use rl_lab::plot::plot_files;
use rl_lab::train::run_training;
use rl_lab::verify::{run_suite, Fault, Suite};

#[derive(Parser)]
#[command(name = "rl-lab", version, about = "PPO variant experiments: training runs, curves, diagnostics and self-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm on one environment for a list of seeds.
    Train(Box<TrainArgs>),
    /// Write the KL(p‖q) / KL(q‖p) grid over a range of standard deviations.
    DiagAsymmetry(DiagArgs),
    /// Render learning-curve CSVs to an SVG chart.
    Plot(PlotArgs),
    /// Run the numerical self-check suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// clip | kl | cim
    #[arg(long)]
    algo: Option<String>,
    /// pendulum | pointmass
    #[arg(long)]
    env: Option<String>,
    /// Comma-separated seed list, e.g. 0,1,2
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    /// Flat key = value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides RL_LAB_OUT and the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds trained in parallel [default: number of seeds]
    #[arg(long)]
    jobs: Option<usize>,
    /// Write real elapsed time into wall_time_s instead of 0.
    #[arg(long)]
    record_wall_time: bool,
    /// Also save the resolved configuration to this path.
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long)]
    clip_eps: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    d_targ: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// gaussian | laplace | epanechnikov | biweight | triangular | rectangular
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    bandwidth: Option<String>,
    /// fixed | silverman
    #[arg(long)]
    sigma_mode: Option<String>,
    #[arg(long)]
    cim_draws: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    actor_lr: Option<String>,
    #[arg(long)]
    critic_lr: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    actor_steps: Option<String>,
    #[arg(long)]
    critic_steps: Option<String>,
    #[arg(long)]
    episodes_per_iteration: Option<String>,
    /// Comma-separated hidden widths, e.g. 64 or 64,64
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    init_log_std: Option<String>,
    /// true | false
    #[arg(long)]
    normalize_rewards: Option<String>,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("algo", &self.algo),
            ("env", &self.env),
            ("seeds", &self.seeds),
            ("iterations", &self.iterations),
            ("clip_eps", &self.clip_eps),
            ("beta", &self.beta),
            ("d_targ", &self.d_targ),
            ("alpha", &self.alpha),
            ("kernel", &self.kernel),
            ("bandwidth", &self.bandwidth),
            ("sigma_mode", &self.sigma_mode),
            ("cim_draws", &self.cim_draws),
            ("gamma", &self.gamma),
            ("actor_lr", &self.actor_lr),
            ("critic_lr", &self.critic_lr),
            ("batch_size", &self.batch_size),
            ("actor_steps", &self.actor_steps),
            ("critic_steps", &self.critic_steps),
            ("episodes_per_iteration", &self.episodes_per_iteration),
            ("hidden", &self.hidden),
            ("init_log_std", &self.init_log_std),
            ("normalize_rewards", &self.normalize_rewards),
        ]
    }
}

#[derive(Args)]
struct DiagArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    mu1: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    mu2: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    sigma_min: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    sigma_max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 50)]
    grid: usize,
    /// linear | log
    #[arg(long, default_value = "log")]
    spacing: String,
    /// Output CSV [default: <out dir>/asymmetry.csv]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Curve CSVs; each becomes one legend entry named after its file.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Restrict to these suites: kl, asymmetry, cim, pinsker, taylor, grad.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn default_out_dir() -> PathBuf {
    std::env::var_os("RL_LAB_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for (key, value) in args.overrides() {
        if let Some(v) = value {
            raw.set(key, v)?;
        }
    }
    if raw.get("algo").is_none() {
        let mut cmd = Cli::command();
        cmd.build();
        let sub = cmd.find_subcommand_mut("train").expect("train subcommand");
        return Err(usage(format!("missing required --algo (clip|kl|cim)\n\n{}", sub.render_usage())));
    }
    let cfg = RunConfig::from_raw(&raw)?;
    if let Some(path) = &args.save_config {
        cfg.save(path)?;
    }
    let out = cfg.resolve_out(args.out.as_deref());
    let jobs = args.jobs.unwrap_or(cfg.seeds.len());
    if jobs == 0 {
        return Err(usage("--jobs must be >= 1"));
    }
    let outputs = run_training(&cfg, &out, jobs, args.record_wall_time)?;
    for p in &outputs.per_seed {
        println!("{}", p.display());
    }
    println!("{}", outputs.merged.display());
    Ok(())
}

fn cmd_diag(args: DiagArgs) -> CliResult<()> {
    let spec = GridSpec {
        mu1: args.mu1,
        mu2: args.mu2,
        sigma_min: args.sigma_min,
        sigma_max: args.sigma_max,
        grid: args.grid,
        spacing: args.spacing.parse::<Spacing>()?,
    };
    let cells = spec.cells()?;
    let out = args.out.unwrap_or_else(|| default_out_dir().join("asymmetry.csv"));
    write_grid(&out, &cells)?;
    let max = cells.iter().map(|c| c.abs_diff).fold(0.0, f64::max);
    println!("{}: {} cells, max |KL(p‖q) − KL(q‖p)| = {max:.6e}", out.display(), cells.len());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> CliResult<()> {
    plot_files(&args.csv, &args.out)?;
    println!("{}", args.out.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> CliResult<()> {
    let fault = args.inject_fault.as_deref().map(str::parse::<Fault>).transpose()?;
    let suites = if args.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suite.iter().map(|s| s.parse::<Suite>()).collect::<CliResult<Vec<_>>>()?
    };
    let mut failed = Vec::new();
    for s in suites {
        let out = run_suite(s, fault);
        let status = if out.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<10} {:<46} {}", s.name(), s.title(), out.detail);
        if !out.passed {
            failed.push(s.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("failed suites: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Train(a) => cmd_train(*a),
        Command::DiagAsymmetry(a) => cmd_diag(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
