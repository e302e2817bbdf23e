mod simulate;

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use seqregret::divergence::{expected_quantities, Mode};
use seqregret::impossibility::{build_instance, choose_parameters, verify_lower_bound, SearchCaps};
use seqregret::io::format_float;
use seqregret::regret::{BoundInputs, BoundKind, BoundReport};
use seqregret::validation::{run_suite, Suite, ValidateOptions};

/// Environment variable that, when set, replaces the base seed of any command.
pub const SEED_ENV: &str = "SEQREGRET_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "seqregret",
    version,
    about = "Regret of mismatched and universal sequence predictors"
)]
struct Cli {
    /// Worker threads for episode simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Average regret of the mixture learner on a memory-m Markov source.
    Simulate(simulate::SimulateArgs),
    /// Evaluate regret bounds.
    Bounds(BoundsArgs),
    /// Instantiate and check the lower-bound construction.
    Impossibility(ImpossibilityArgs),
    /// Run self-check suites.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Built-in instance whose V_T and KL are computed exactly.
    #[arg(long, value_parser = ["impossibility"])]
    instance: Option<String>,
    #[arg(long, requires = "instance")]
    phi: Option<f64>,
    #[arg(long, requires = "instance")]
    psi: Option<f64>,
    #[arg(long)]
    horizon: usize,
    #[arg(long)]
    delta: Option<f64>,
    /// Loss bound L.
    #[arg(long, default_value_t = 1.0)]
    loss_bound: f64,
    /// Expected average variational distance V_T.
    #[arg(long, conflicts_with = "instance")]
    vt: Option<f64>,
    /// Path-wise average variational distance.
    #[arg(long)]
    vhat: Option<f64>,
    /// Joint KL divergence; accepts `inf`.
    #[arg(long, conflicts_with = "instance")]
    kl: Option<f64>,
}

#[derive(Args, Debug)]
struct ImpossibilityArgs {
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    /// ε(T, δ) = scale · T^(−power) · δ^(−delta-power).
    #[arg(long, default_value_t = 1.0)]
    eps_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    eps_power: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_delta_power: f64,
    #[arg(long, default_value_t = 10_000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SearchCaps::default().max_horizon)]
    t_cap: u64,
    #[arg(long, default_value_t = SearchCaps::default().max_n)]
    n_cap: u64,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Suite to run; all suites when omitted.
    #[arg(long, value_parser = Suite::ALL.map(Suite::name))]
    suite: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Confidence level for the coverage suite (default: 0.01, 0.05, 0.1, 0.25).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Base seed after applying the environment override.
pub fn effective_seed(seed: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(seed),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

fn print_value(name: &str, value: f64) {
    println!("{name} {}", format_float(value));
}

fn bounds(args: &BoundsArgs) -> Result<bool> {
    let (v_expected, joint_kl, loss_bound) = match args.instance.as_deref() {
        Some(_) => {
            let phi = args.phi.context("--instance impossibility needs --phi")?;
            let psi = args.psi.context("--instance impossibility needs --psi")?;
            let inst = build_instance(phi, psi, args.horizon)?;
            let e = expected_quantities(&inst.p, &inst.q, Mode::Exact)?;
            print_value("v_t", e.v_expected);
            print_value("kl", e.joint_kl);
            (Some(e.v_expected), Some(e.joint_kl), inst.loss().bound())
        }
        None => (args.vt, args.kl, args.loss_bound),
    };
    let inputs = BoundInputs {
        loss_bound,
        horizon: args.horizon,
        delta: args.delta,
        v_expected,
        v_hat: args.vhat,
        joint_kl,
    };
    let kinds = [
        BoundKind::ExpectedTv,
        BoundKind::ExpectedKl,
        BoundKind::PathwiseTv,
        BoundKind::HighProbTv,
        BoundKind::HighProbKl,
    ];
    let mut any = false;
    for kind in kinds {
        let available = match kind {
            BoundKind::ExpectedTv => inputs.v_expected.is_some(),
            BoundKind::ExpectedKl => inputs.joint_kl.is_some(),
            BoundKind::PathwiseTv => inputs.delta.is_some() && inputs.v_hat.is_some(),
            BoundKind::HighProbTv => inputs.delta.is_some() && inputs.v_expected.is_some(),
            BoundKind::HighProbKl => inputs.delta.is_some() && inputs.joint_kl.is_some(),
        };
        if available {
            print_value(
                &kind.to_string(),
                BoundReport::evaluate(kind, inputs)?.value,
            );
            any = true;
        }
    }
    if !any {
        bail!("no bound can be evaluated from the given inputs (supply --vt, --vhat, --kl and/or --delta)");
    }
    Ok(true)
}

fn impossibility(args: &ImpossibilityArgs) -> Result<bool> {
    let (scale, p, q) = (args.eps_scale, args.eps_power, args.eps_delta_power);
    if !(scale >= 0.0 && p > 0.0) {
        bail!("epsilon must vanish in T: need --eps-scale >= 0 and --eps-power > 0");
    }
    let eps = move |t: u64, d: f64| scale * (t as f64).powf(-p) * d.powf(-q);
    let caps = SearchCaps {
        max_n: args.n_cap,
        max_horizon: args.t_cap,
    };
    let witness = choose_parameters(args.c, args.alpha, args.beta, &eps, caps)?;
    print!("{witness}");
    let seed = effective_seed(args.seed)?;
    let v = verify_lower_bound(&witness, args.episodes, seed)?;
    println!(
        "exact P(regret >= R1)={} exact P(regret >= R2)={}",
        v.exact_probability_r1, v.exact_probability_r2
    );
    println!(
        "simulated over {} episodes: R1 {} R2 {} (allowed deviation {})",
        v.episodes, v.simulated_r1, v.simulated_r2, v.slack
    );
    println!("verification={}", if v.passed { "pass" } else { "fail" });
    Ok(v.passed)
}

fn validate(args: &ValidateArgs) -> Result<bool> {
    let suites: Vec<Suite> = if args.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suite
            .iter()
            .map(|s| s.parse())
            .collect::<seqregret::Result<_>>()?
    };
    let opts = ValidateOptions {
        trials: args.trials,
        delta: args.delta,
        seed: effective_seed(args.seed)?,
    };
    let mut ok = true;
    for s in suites {
        let report = run_suite(s, &opts)?;
        println!("{report}");
        ok &= report.passed;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Bounds(a) => bounds(a),
        Command::Impossibility(a) => impossibility(a),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
