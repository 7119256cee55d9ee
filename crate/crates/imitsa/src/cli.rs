//! Command-line front end: configuration parsing and the file-emitting
//! subcommands.
//!
//! Configuration is resolved in three layers: built-in defaults (the
//! reference setup), then a flat `key = value` file (`#` starts a comment,
//! `mu` is a comma list), then command-line flags. Unknown keys and invalid
//! values are rejected with the offending key named.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::dynamics::{
    aggregate_closed_form, aggregate_monotone_velocity, constrained_trajectory, integrate,
    interleaved_double_trajectory, iterations_to_reach, phase_portrait, replicator_closed_form,
    replicator_velocity, sup_norm_deviation, DynamicsConfig, ImitationRule, Trajectory,
};
use crate::model::{nash_equilibrium, ChannelModel, MixtureState};
use crate::policies::{Policy, PolicyParams, SamplingScope};
use crate::reproduce;
use crate::rng::SeedStreams;
use crate::sim::{run_batch, run_once, write_fairness_csv, PayoffMode, SimConfig};
use crate::Error;

#[derive(Parser, Debug)]
#[command(
    name = "imitsa",
    version,
    about = "Imitation-based spectrum access: simulator, mean-field dynamics, equilibria"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the finite-population Monte Carlo simulation.
    Simulate(RunArgs),
    /// Emit mean-field trajectories and the exact-vs-approximate report.
    Dynamics(RunArgs),
    /// Print the Nash equilibrium of the channel model as JSON.
    Ne(RunArgs),
    /// Emit the two-channel phase plane (requires C = 2).
    Phase(RunArgs),
    /// Run every pinned acceptance experiment and write a report.
    Reproduce(ReproduceArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PolicyArg {
    Pisap,
    Disap,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ScopeArg {
    Global,
    Channel,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PayoffArg {
    Expected,
    Stochastic,
}

#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Channel availability probabilities as a comma list, e.g. 0.3,0.5,0.8.
    #[arg(long)]
    pub mu: Option<String>,
    /// Population size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Imitation factor.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Imitation threshold.
    #[arg(long = "epsilon-u")]
    pub epsilon_u: Option<f64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    #[arg(long, value_enum)]
    pub payoff: Option<PayoffArg>,
    /// Slots per iteration (stochastic payoff mode).
    #[arg(long)]
    pub slots: Option<usize>,
    /// Maximum iterations per run.
    #[arg(long)]
    pub iters: Option<u64>,
    /// Independent runs per batch.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// Output directory for the report.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Fully resolved configuration for the file-emitting subcommands.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub sim: SimConfig,
    pub dynamics: DynamicsConfig,
    pub out_dir: PathBuf,
}

/// Unresolved option layer; later layers override earlier ones.
#[derive(Debug, Default, Clone)]
struct RawConfig {
    mu: Option<Vec<f64>>,
    n: Option<usize>,
    sigma: Option<f64>,
    epsilon_u: Option<f64>,
    omega: Option<f64>,
    alpha: Option<f64>,
    exploration: Option<f64>,
    policy: Option<Policy>,
    scope: Option<SamplingScope>,
    payoff: Option<PayoffMode>,
    slots: Option<usize>,
    iters: Option<u64>,
    runs: Option<usize>,
    seed: Option<u64>,
    stop_on_convergence: Option<bool>,
    dt: Option<f64>,
    t_max: Option<f64>,
    out: Option<PathBuf>,
}

fn bad_key(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("key `{key}`: {reason}"))
}

fn parse_mu_list(key: &str, value: &str) -> Result<Vec<f64>, Error> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad_key(key, format!("`{s}` is not a number ({e})")))
        })
        .collect()
}

impl RawConfig {
    fn apply_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected `key = value`, got `{raw_line}`",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            self.apply_key(key, value)?;
        }
        Ok(())
    }

    fn apply_key(&mut self, key: &str, value: &str) -> Result<(), Error> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error>
        where
            T::Err: std::fmt::Display,
        {
            value.parse::<T>().map_err(|e| bad_key(key, e))
        }
        match key {
            "mu" => self.mu = Some(parse_mu_list(key, value)?),
            "n" => self.n = Some(num(key, value)?),
            "sigma" => self.sigma = Some(num(key, value)?),
            "epsilon_u" => self.epsilon_u = Some(num(key, value)?),
            "omega" => self.omega = Some(num(key, value)?),
            "alpha" => self.alpha = Some(num(key, value)?),
            "exploration" => self.exploration = Some(num(key, value)?),
            "policy" => {
                self.policy = Some(match value {
                    "pisap" => Policy::Pisap,
                    "disap" => Policy::Disap,
                    other => return Err(bad_key(key, format!("unknown policy `{other}`"))),
                })
            }
            "scope" => {
                self.scope = Some(match value {
                    "global" => SamplingScope::Global,
                    "channel" => SamplingScope::SameChannel,
                    other => return Err(bad_key(key, format!("unknown scope `{other}`"))),
                })
            }
            "payoff" => {
                self.payoff = Some(match value {
                    "expected" => PayoffMode::Expected,
                    "stochastic" => PayoffMode::Stochastic,
                    other => return Err(bad_key(key, format!("unknown payoff mode `{other}`"))),
                })
            }
            "slots" => self.slots = Some(num(key, value)?),
            "iters" => self.iters = Some(num(key, value)?),
            "runs" => self.runs = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "stop_on_convergence" => self.stop_on_convergence = Some(num(key, value)?),
            "dt" => self.dt = Some(num(key, value)?),
            "t_max" => self.t_max = Some(num(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            other => {
                return Err(Error::InvalidConfig(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    fn apply_flags(&mut self, args: &RunArgs) -> Result<(), Error> {
        if let Some(mu) = &args.mu {
            self.mu = Some(parse_mu_list("mu", mu)?);
        }
        if let Some(n) = args.n {
            self.n = Some(n);
        }
        if let Some(s) = args.sigma {
            self.sigma = Some(s);
        }
        if let Some(e) = args.epsilon_u {
            self.epsilon_u = Some(e);
        }
        if let Some(p) = args.policy {
            self.policy = Some(match p {
                PolicyArg::Pisap => Policy::Pisap,
                PolicyArg::Disap => Policy::Disap,
            });
        }
        if let Some(s) = args.scope {
            self.scope = Some(match s {
                ScopeArg::Global => SamplingScope::Global,
                ScopeArg::Channel => SamplingScope::SameChannel,
            });
        }
        if let Some(p) = args.payoff {
            self.payoff = Some(match p {
                PayoffArg::Expected => PayoffMode::Expected,
                PayoffArg::Stochastic => PayoffMode::Stochastic,
            });
        }
        if let Some(s) = args.slots {
            self.slots = Some(s);
        }
        if let Some(i) = args.iters {
            self.iters = Some(i);
        }
        if let Some(r) = args.runs {
            self.runs = Some(r);
        }
        if let Some(s) = args.seed {
            self.seed = Some(s);
        }
        if let Some(o) = &args.out {
            self.out = Some(o.clone());
        }
        Ok(())
    }

    fn resolve(self) -> Result<ResolvedConfig, Error> {
        let policy = self.policy.unwrap_or(Policy::Pisap);
        let defaults = PolicyParams::defaults_for(policy);
        let params = PolicyParams {
            sigma: self.sigma.unwrap_or(defaults.sigma),
            epsilon_u: self.epsilon_u.unwrap_or(defaults.epsilon_u),
            omega: self.omega.unwrap_or(defaults.omega),
            alpha: self.alpha.unwrap_or(defaults.alpha),
            scope: self.scope.unwrap_or(defaults.scope),
            exploration: self.exploration.unwrap_or(defaults.exploration),
        };
        let channels = ChannelModel::new(self.mu.unwrap_or_else(|| vec![0.3, 0.5, 0.8]))
            .map_err(|e| bad_key("mu", e))?;
        let sim = SimConfig {
            n_sus: self.n.unwrap_or(50),
            channels,
            params,
            policy,
            payoff_mode: self.payoff.unwrap_or(PayoffMode::Expected),
            slots_per_iteration: self.slots.unwrap_or(100),
            max_iterations: self.iters.unwrap_or(500),
            seed: self.seed.unwrap_or(12345),
            runs: self.runs.unwrap_or(100),
            stop_on_convergence: self.stop_on_convergence.unwrap_or(true),
        };
        sim.validate()?;
        let dynamics = DynamicsConfig {
            n: sim.n_sus,
            sigma: params.sigma,
            omega: params.omega,
            alpha: params.alpha,
            dt: self.dt.unwrap_or(0.01),
            t_max: self.t_max.unwrap_or(100.0),
            convergence_tol: 1e-9,
        };
        if !(dynamics.dt > 0.0) {
            return Err(bad_key("dt", "must be positive"));
        }
        if !(dynamics.t_max > 0.0) {
            return Err(bad_key("t_max", "must be positive"));
        }
        Ok(ResolvedConfig {
            sim,
            dynamics,
            out_dir: self.out.unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

/// Resolves defaults, the optional config file, and flag overrides into a
/// validated configuration.
pub fn parse_config(args: &RunArgs) -> Result<ResolvedConfig, Error> {
    let mut raw = RawConfig::default();
    if let Some(path) = &args.config {
        raw.apply_file(path)?;
    }
    raw.apply_flags(args)?;
    raw.resolve()
}

fn create_out_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), Error> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Runs the configured batch; writes the first run's trace CSV, the batch
/// mean fairness CSV and the summary JSON; prints a one-line summary.
pub fn cmd_simulate(cfg: &ResolvedConfig) -> Result<(), Error> {
    create_out_dir(&cfg.out_dir)?;
    let stats = run_batch(&cfg.sim);
    let first = run_once(&cfg.sim, SeedStreams::new(cfg.sim.seed).run_seed(0));

    write_file(&cfg.out_dir.join("trace.csv"), |out| first.write_csv(out))?;
    write_file(&cfg.out_dir.join("fairness.csv"), |out| {
        write_fairness_csv(&stats.mean_fairness, out)
    })?;

    let bound = (cfg.sim.params.epsilon_u > 0.0).then(|| {
        (cfg.sim.n_sus as f64).powi(2)
            / (cfg.sim.channels.mu_min() * cfg.sim.params.sigma * cfg.sim.params.epsilon_u)
    });
    let summary = json!({
        "converged_at_mean": stats.converged_mean,
        "converged_at_max": stats.converged_max,
        "bound": bound,
        "final_counts_mode": stats.final_counts_mode(),
        "jain_at": {
            "100": stats.mean_fairness_at(100),
            "200": stats.mean_fairness_at(200),
        },
        "epsilon_ne": stats.epsilon_ne_all,
    });
    write_file(&cfg.out_dir.join("summary.json"), |out| {
        writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)
    })?;

    println!(
        "simulate: runs={} converged={} mean_iteration={} mode={:?} epsilon_ne={}",
        stats.runs,
        stats.converged_runs,
        stats
            .converged_mean
            .map(|m| format!("{m:.1}"))
            .unwrap_or_else(|| "n/a".into()),
        stats.final_counts_mode(),
        stats.epsilon_ne_all,
    );
    Ok(())
}

fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), Error> {
    write_file(path, |out| traj.write_csv(out))
}

fn mixtures_as_trajectory(states: &[MixtureState]) -> Trajectory {
    Trajectory {
        times: (0..states.len()).map(|t| t as f64).collect(),
        states: states.to_vec(),
    }
}

/// Emits the mean-field trajectory family and a deviation report comparing
/// closed forms against RK4 and the exact constrained maps against their
/// interleaved approximations.
pub fn cmd_dynamics(cfg: &ResolvedConfig) -> Result<(), Error> {
    create_out_dir(&cfg.out_dir)?;
    let channels = &cfg.sim.channels;
    let dcfg = &cfg.dynamics;
    let c = channels.channel_count();
    let uniform = MixtureState::uniform(c);
    let star = nash_equilibrium(channels);

    let repl = integrate(|x| replicator_velocity(x, dcfg, channels), &uniform, dcfg)?;
    let aggr = integrate(
        |x| aggregate_monotone_velocity(x, dcfg, channels),
        &uniform,
        dcfg,
    )?;
    let sampled = |f: &dyn Fn(f64) -> MixtureState| Trajectory {
        times: repl.times.clone(),
        states: repl.times.iter().map(|&t| f(t)).collect(),
    };
    let repl_closed = sampled(&|t| replicator_closed_form(&uniform, t, dcfg, channels));
    let aggr_closed = sampled(&|t| aggregate_closed_form(&uniform, t, dcfg, channels));

    let horizon = 600;
    let pi_exact = constrained_trajectory(
        ImitationRule::Proportional,
        &uniform,
        &uniform,
        horizon,
        dcfg,
        channels,
    );
    let di_exact = constrained_trajectory(
        ImitationRule::Double,
        &uniform,
        &uniform,
        horizon,
        dcfg,
        channels,
    );
    let pi_approx = interleaved_double_trajectory(
        ImitationRule::Proportional,
        &uniform,
        &uniform,
        horizon,
        dcfg,
        channels,
    );
    let di_approx = interleaved_double_trajectory(
        ImitationRule::Double,
        &uniform,
        &uniform,
        horizon,
        dcfg,
        channels,
    );

    write_trajectory_csv(&cfg.out_dir.join("replicator_rk4.csv"), &repl)?;
    write_trajectory_csv(
        &cfg.out_dir.join("replicator_closed_form.csv"),
        &repl_closed,
    )?;
    write_trajectory_csv(&cfg.out_dir.join("aggregate_rk4.csv"), &aggr)?;
    write_trajectory_csv(&cfg.out_dir.join("aggregate_closed_form.csv"), &aggr_closed)?;
    write_trajectory_csv(
        &cfg.out_dir.join("constrained_pi.csv"),
        &mixtures_as_trajectory(&pi_exact),
    )?;
    write_trajectory_csv(
        &cfg.out_dir.join("constrained_di.csv"),
        &mixtures_as_trajectory(&di_exact),
    )?;
    write_trajectory_csv(
        &cfg.out_dir.join("double_replicator.csv"),
        &mixtures_as_trajectory(&pi_approx),
    )?;
    write_trajectory_csv(
        &cfg.out_dir.join("double_aggregate.csv"),
        &mixtures_as_trajectory(&di_approx),
    )?;

    let report = json!({
        "pi_supnorm": sup_norm_deviation(&pi_exact, &pi_approx),
        "di_supnorm": sup_norm_deviation(&di_exact, &di_approx),
        "replicator_closed_vs_rk4": sup_norm_deviation(&repl.states, &repl_closed.states),
        "aggregate_closed_vs_rk4": sup_norm_deviation(&aggr.states, &aggr_closed.states),
        "constrained_pi_iterations_to_1e-3": iterations_to_reach(&pi_exact, &star, 1e-3),
        "constrained_di_iterations_to_1e-3": iterations_to_reach(&di_exact, &star, 1e-3),
        "constrained_pi_converged_at": iterations_to_reach(&pi_exact, &star, dcfg.convergence_tol),
        "constrained_di_converged_at": iterations_to_reach(&di_exact, &star, dcfg.convergence_tol),
    });
    write_file(&cfg.out_dir.join("deviation_report.json"), |out| {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)
    })?;
    println!(
        "dynamics: wrote 8 trajectory files and deviation_report.json to {}",
        cfg.out_dir.display()
    );
    Ok(())
}

/// The equilibrium report of `cmd_ne`: the Nash mixture, the per-channel
/// equilibrium payoff and the (real-valued) equilibrium occupancies.
pub fn ne_report(cfg: &ResolvedConfig) -> serde_json::Value {
    let channels = &cfg.sim.channels;
    let n = cfg.sim.n_sus as f64;
    let star = nash_equilibrium(channels);
    let payoff: Vec<f64> = star
        .fractions()
        .iter()
        .zip(channels.mu())
        .map(|(&x, &mu)| mu / (x * n))
        .collect();
    let occupancy: Vec<f64> = star.fractions().iter().map(|&x| x * n).collect();
    json!({
        "x_star": star.fractions(),
        "payoff": payoff,
        "n_x_star": occupancy,
    })
}

/// Prints the equilibrium report as JSON on stdout.
pub fn cmd_ne(cfg: &ResolvedConfig) -> Result<(), Error> {
    println!(
        "{}",
        serde_json::to_string_pretty(&ne_report(cfg)).expect("serializable equilibrium report")
    );
    Ok(())
}

/// Emits the two-channel phase plane: a velocity grid for both dynamics and
/// sample trajectories.
pub fn cmd_phase(cfg: &ResolvedConfig) -> Result<(), Error> {
    create_out_dir(&cfg.out_dir)?;
    let portrait = phase_portrait(&cfg.sim.channels, &cfg.dynamics, 101)?;
    write_file(&cfg.out_dir.join("phase_grid.csv"), |out| {
        writeln!(out, "x1,replicator_velocity,aggregate_velocity")?;
        for p in &portrait.grid {
            writeln!(
                out,
                "{},{},{}",
                p.x1, p.replicator_velocity, p.aggregate_velocity
            )?;
        }
        Ok(())
    })?;
    write_file(&cfg.out_dir.join("phase_trajectories.csv"), |out| {
        writeln!(out, "dynamic,trajectory,t,x_1")?;
        for (name, trajs) in [
            ("replicator", &portrait.replicator_trajectories),
            ("aggregate", &portrait.aggregate_trajectories),
        ] {
            for (k, traj) in trajs.iter().enumerate() {
                for (t, x) in traj.times.iter().zip(&traj.states) {
                    writeln!(out, "{name},{k},{t},{}", x.fractions()[0])?;
                }
            }
        }
        Ok(())
    })?;
    println!(
        "phase: nullcline at x_1 = {}; wrote phase_grid.csv and phase_trajectories.csv",
        portrait.nullcline_x1
    );
    Ok(())
}

/// Runs every acceptance experiment, writes `reproduce_report.json`, prints
/// one pass/fail line per criterion. Returns whether all criteria passed.
pub fn cmd_reproduce(out_dir: &Path) -> Result<bool, Error> {
    create_out_dir(out_dir)?;
    let results = reproduce::run_all();
    write_file(&out_dir.join("reproduce_report.json"), |out| {
        writeln!(out, "{}", serde_json::to_string_pretty(&results)?)
    })?;
    let mut all = true;
    for r in &results {
        println!("{}", r.summary_line());
        for check in r.checks.iter().filter(|c| !c.passed) {
            println!(
                "    FAIL {}: measured {} expected {}",
                check.label, check.measured, check.expected
            );
        }
        all &= r.passed;
    }
    Ok(all)
}
