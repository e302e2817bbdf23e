//! `simulate`: regret curves of the mixture learner against a Markov source.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use seqregret::io::{write_summary_csv, KeyValues};
use seqregret::markov::{sample_theta, theta_seed, MarkovParams, McmcConfig};
use seqregret::predictor::{mismatched_policy, optimal_policy};
use seqregret::regret::{monte_carlo_summary, monte_carlo_traces, run_episode, RegretSummary};
use seqregret::{Alphabet, LossFunction, SequentialDistribution};

use crate::effective_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Predictor {
    /// Closed-form add-one rule.
    Exact,
    /// Metropolis-Hastings estimate of the same mixture.
    Mcmc,
}

impl FromStr for Predictor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

impl Predictor {
    fn name(self) -> &'static str {
        match self {
            Predictor::Exact => "exact",
            Predictor::Mcmc => "mcmc",
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    /// key=value file supplying any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of states S [default: 2].
    #[arg(long)]
    states: Option<usize>,
    /// Chain memory m [default: 3].
    #[arg(long)]
    memory: Option<usize>,
    /// Independent episodes [default: 4000].
    #[arg(long)]
    runs: Option<usize>,
    /// Rounds per episode [default: 1000].
    #[arg(long)]
    horizon: Option<usize>,
    /// Base seed [default: 0]; SEQREGRET_SEED overrides it.
    #[arg(long)]
    seed: Option<u64>,
    /// Learner [default: exact].
    #[arg(long, value_enum)]
    predictor: Option<Predictor>,
    /// Ground-truth transition file: one context per line, S probabilities each.
    #[arg(long)]
    theta: Option<PathBuf>,
    /// Draw a fresh ground truth for every run instead of one per experiment.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    resample_theta: Option<bool>,
    /// Summary CSV path [default: regret_summary.csv]; metadata goes to `<output>.meta`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Metropolis-Hastings iterations per predictive [default: 100000].
    #[arg(long)]
    mcmc_chain_length: Option<usize>,
    /// Iterations discarded before averaging [default: 10000].
    #[arg(long)]
    mcmc_burn_in: Option<usize>,
    /// Keep every k-th state after burn-in [default: 5].
    #[arg(long)]
    mcmc_thinning: Option<usize>,
    /// Half-width of the uniform random-walk step [default: 0.25].
    #[arg(long)]
    mcmc_proposal_scale: Option<f64>,
    /// MCMC seed [default: the base seed].
    #[arg(long)]
    mcmc_seed: Option<u64>,
}

/// Keys a configuration file may set.
const CONFIG_KEYS: [&str; 14] = [
    "states",
    "memory",
    "runs",
    "horizon",
    "seed",
    "predictor",
    "theta",
    "resample-theta",
    "output",
    "mcmc-chain-length",
    "mcmc-burn-in",
    "mcmc-thinning",
    "mcmc-proposal-scale",
    "mcmc-seed",
];

/// Keys written for the reader's benefit and ignored on load.
const INFO_KEYS: [&str; 5] = [
    "command",
    "version",
    "quantiles",
    "quantile-rule",
    "state-labels",
];

#[derive(Debug, Clone, PartialEq)]
struct Settings {
    states: usize,
    memory: usize,
    runs: usize,
    horizon: usize,
    seed: u64,
    predictor: Predictor,
    theta: Option<PathBuf>,
    resample_theta: bool,
    output: PathBuf,
    mcmc: McmcConfig,
}

fn pick<T: FromStr>(flag: Option<T>, config: &KeyValues, key: &str, default: T) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match config.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| anyhow::anyhow!("config: cannot parse {key}={raw:?}")),
        None => Ok(default),
    }
}

fn load_config(path: Option<&Path>) -> Result<KeyValues> {
    let Some(path) = path else {
        return Ok(KeyValues::new());
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let kv = KeyValues::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some((k, _)) = kv
        .iter()
        .find(|(k, _)| !CONFIG_KEYS.contains(k) && !INFO_KEYS.contains(k))
    {
        bail!("{}: unknown key {k:?}", path.display());
    }
    if let Some(cmd) = kv.get("command") {
        if cmd != "simulate" {
            bail!("{}: written by `{cmd}`, not `simulate`", path.display());
        }
    }
    Ok(kv)
}

fn resolve(args: &SimulateArgs) -> Result<Settings> {
    let cfg = load_config(args.config.as_deref())?;
    let seed = effective_seed(pick(args.seed, &cfg, "seed", 0)?)?;
    let defaults = McmcConfig {
        seed,
        ..McmcConfig::default()
    };
    let theta = match (&args.theta, cfg.get("theta")) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) if !p.is_empty() => Some(PathBuf::from(p)),
        _ => None,
    };
    let s = Settings {
        states: pick(args.states, &cfg, "states", 2)?,
        memory: pick(args.memory, &cfg, "memory", 3)?,
        runs: pick(args.runs, &cfg, "runs", 4000)?,
        horizon: pick(args.horizon, &cfg, "horizon", 1000)?,
        seed,
        predictor: pick(args.predictor, &cfg, "predictor", Predictor::Exact)?,
        theta,
        resample_theta: pick(args.resample_theta, &cfg, "resample-theta", false)?,
        output: pick(
            args.output.clone(),
            &cfg,
            "output",
            PathBuf::from("regret_summary.csv"),
        )?,
        mcmc: McmcConfig {
            chain_length: pick(
                args.mcmc_chain_length,
                &cfg,
                "mcmc-chain-length",
                defaults.chain_length,
            )?,
            burn_in: pick(args.mcmc_burn_in, &cfg, "mcmc-burn-in", defaults.burn_in)?,
            thinning: pick(args.mcmc_thinning, &cfg, "mcmc-thinning", defaults.thinning)?,
            proposal_scale: pick(
                args.mcmc_proposal_scale,
                &cfg,
                "mcmc-proposal-scale",
                defaults.proposal_scale,
            )?,
            seed: pick(args.mcmc_seed, &cfg, "mcmc-seed", defaults.seed)?,
        },
    };
    if s.theta.is_some() && s.resample_theta {
        bail!("--theta and --resample-theta are mutually exclusive");
    }
    if s.runs == 0 || s.horizon == 0 {
        bail!("--runs and --horizon must be at least 1");
    }
    Ok(s)
}

fn metadata(s: &Settings) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.insert("command", "simulate");
    kv.insert("version", env!("CARGO_PKG_VERSION"));
    kv.insert("states", s.states);
    kv.insert("memory", s.memory);
    kv.insert("runs", s.runs);
    kv.insert("horizon", s.horizon);
    kv.insert("seed", s.seed);
    kv.insert("predictor", s.predictor.name());
    kv.insert(
        "theta",
        s.theta
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
    );
    kv.insert("resample-theta", s.resample_theta);
    kv.insert("output", s.output.display());
    kv.insert("mcmc-chain-length", s.mcmc.chain_length);
    kv.insert("mcmc-burn-in", s.mcmc.burn_in);
    kv.insert("mcmc-thinning", s.mcmc.thinning);
    kv.insert("mcmc-proposal-scale", s.mcmc.proposal_scale);
    kv.insert("mcmc-seed", s.mcmc.seed);
    kv.insert("quantiles", "5,25,50,75,95");
    kv.insert(
        "quantile-rule",
        "linear interpolation between order statistics",
    );
    kv.insert(
        "state-labels",
        format!(
            "1..{} in files map to internal symbols 0..{}",
            s.states,
            s.states - 1
        ),
    );
    kv
}

fn load_theta(path: &Path, s: &Settings) -> Result<MarkovParams> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let theta =
        MarkovParams::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    if theta.alphabet().size() != s.states || theta.memory() != s.memory {
        bail!(
            "{} describes S={} m={}, but the run uses S={} m={}",
            path.display(),
            theta.alphabet().size(),
            theta.memory(),
            s.states,
            s.memory
        );
    }
    Ok(theta)
}

fn summarize(s: &Settings) -> Result<RegretSummary> {
    let alphabet = Alphabet::new(s.states)?;
    let loss = LossFunction::classification(alphabet);
    let q = match s.predictor {
        Predictor::Exact => SequentialDistribution::laplace_mixture(s.memory, alphabet, s.horizon)?,
        Predictor::Mcmc => {
            SequentialDistribution::mcmc_mixture(s.memory, alphabet, s.horizon, s.mcmc)?
        }
    };
    let learner = mismatched_policy(q, loss.clone())?;
    if s.resample_theta {
        let traces = monte_carlo_traces(s.runs, s.seed, |seed| {
            let theta = sample_theta(s.memory, alphabet, theta_seed(s.seed, seed.stream))?;
            let p = SequentialDistribution::markov(theta, s.horizon)?;
            let optimal = optimal_policy(p.clone(), loss.clone())?;
            run_episode(&p, &learner, &optimal, &loss, seed)
        })?;
        return Ok(RegretSummary::from_traces(&traces, s.seed)?);
    }
    let theta = match &s.theta {
        Some(path) => load_theta(path, s)?,
        None => sample_theta(s.memory, alphabet, theta_seed(s.seed, 0))?,
    };
    let p = SequentialDistribution::markov(theta, s.horizon)?;
    let optimal = optimal_policy(p.clone(), loss.clone())?;
    Ok(monte_carlo_summary(
        &p, &learner, &optimal, &loss, s.runs, s.seed,
    )?)
}

fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn run(args: &SimulateArgs) -> Result<bool> {
    let s = resolve(args)?;
    let summary = summarize(&s)?;
    write_file(&s.output, |w| Ok(write_summary_csv(&summary, w)?))?;
    let meta = meta_path(&s.output);
    write_file(&meta, |w| {
        Ok(w.write_all(metadata(&s).to_text().as_bytes())?)
    })?;
    let last = summary.rounds.last().expect("horizon is at least 1");
    println!(
        "wrote {} rounds x {} runs to {} (metadata: {}); mean average regret at t={}: {}",
        summary.rounds.len(),
        summary.runs,
        s.output.display(),
        meta.display(),
        last.t,
        last.mean
    );
    Ok(true)
}
