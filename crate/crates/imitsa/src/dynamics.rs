//! Mean-field dynamics of the imitation policies.
//!
//! With expected per-SU payoff `pi_i = mu_i / (x_i N)` the population average
//! `pibar = sum_i x_i pi_i = sum_l mu_l / N` is constant, so both flows
//! reduce to affine ODEs that converge exponentially to the Nash mixture
//! `x*_i = mu_i / sum_l mu_l`:
//!
//! * replicator (proportional imitation):
//!   `dx_i/dt = sigma x_i (pi_i - pibar) = sigma (mu_i/N - x_i pibar)`,
//!   solved by `x_i(t) = (x_i(0) - x*_i) exp(-sigma pibar t) + x*_i`;
//! * aggregate monotone (double imitation):
//!   the same field scaled by `(1 + (omega - pibar)/(omega - alpha)) /
//!   (omega - alpha)`, with the correspondingly faster exponential rate.
//!
//! Under the same-channel sampling constraint the state is a migration
//! matrix `m[j][l]` (fraction now on `j` that was on `l` one iteration ago).
//! One exact update multiplies each entry by an imitation gain built from
//! the previous-iteration payoffs; treating the inflow mix of every channel
//! as representative of the whole population decouples the update into two
//! interleaved discrete-time dynamics (one on even, one on odd iterations),
//! each a contraction with fixed point `x*`.

use std::io::Write;

use crate::model::{ChannelModel, MixtureState, SIMPLEX_TOL};
use crate::Error;

/// Parameters of the mean-field computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    /// Population size; enters only through the payoff scale `pi_i = mu_i/(x_i N)`.
    pub n: usize,
    /// Imitation factor.
    pub sigma: f64,
    /// Upper payoff bound of the double imitation weighting.
    pub omega: f64,
    /// Lower payoff bound of the double imitation weighting.
    pub alpha: f64,
    /// Fixed step of the Runge-Kutta integrator, in iteration-time units.
    pub dt: f64,
    /// Integration horizon.
    pub t_max: f64,
    /// Sup-norm distance to the Nash mixture at which a trajectory counts
    /// as converged.
    pub convergence_tol: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            n: 50,
            sigma: 1.0,
            omega: 1.0,
            alpha: 0.0,
            dt: 0.01,
            t_max: 100.0,
            convergence_tol: 1e-9,
        }
    }
}

/// Which imitation rule a constrained map or interleaved approximation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImitationRule {
    Proportional,
    Double,
}

/// Joint proportions of (current channel, previous channel).
///
/// `m[j][l]` is the fraction of the population on channel `j` now that was
/// on channel `l` one iteration earlier. Row sums give the current mixture,
/// column sums the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationMatrix {
    data: Vec<f64>,
    c: usize,
}

impl MigrationMatrix {
    /// Validates a square matrix of nonnegative fractions with total 1.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, Error> {
        let c = rows.len();
        if c < 2 {
            return Err(Error::Domain(format!(
                "migration matrix needs at least 2 channels, got {c}"
            )));
        }
        let mut data = Vec::with_capacity(c * c);
        for row in &rows {
            if row.len() != c {
                return Err(Error::Domain("migration matrix must be square".into()));
            }
            for &v in row {
                if !(v >= 0.0) {
                    return Err(Error::Domain(format!(
                        "migration matrix entry {v} is negative or NaN"
                    )));
                }
                data.push(v);
            }
        }
        let total: f64 = data.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!(
                "migration matrix sums to {total}, expected 1 within {SIMPLEX_TOL}"
            )));
        }
        Ok(Self { data, c })
    }

    /// The matrix of two independent random assignments:
    /// `m[j][l] = x_now[j] * x_prev[l]`.
    pub fn independent(x_now: &MixtureState, x_prev: &MixtureState) -> Self {
        let c = x_now.len();
        debug_assert_eq!(c, x_prev.len());
        let mut data = Vec::with_capacity(c * c);
        for &xn in x_now.fractions() {
            for &xp in x_prev.fractions() {
                data.push(xn * xp);
            }
        }
        Self { data, c }
    }

    pub fn channel_count(&self) -> usize {
        self.c
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.data[j * self.c + l]
    }

    /// Current mixture `x_j = sum_l m[j][l]`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.c)
            .map(|j| self.data[j * self.c..(j + 1) * self.c].iter().sum())
            .collect()
    }

    /// Previous mixture `x_l = sum_j m[j][l]`.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.c];
        for j in 0..self.c {
            for l in 0..self.c {
                sums[l] += self.get(j, l);
            }
        }
        sums
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Expected per-SU payoffs at mixture `x_prev`; channels with zero mass get
/// payoff 0 (their weight in every update term is zero anyway).
fn mean_field_payoffs(x_prev: &[f64], cfg: &DynamicsConfig, channels: &ChannelModel) -> Vec<f64> {
    x_prev
        .iter()
        .zip(channels.mu())
        .map(|(&x, &mu)| {
            if x > 0.0 {
                mu / (x * cfg.n as f64)
            } else {
                0.0
            }
        })
        .collect()
}

/// Replicator velocity at an arbitrary (not necessarily simplex) point,
/// in the reduced affine form `sigma (mu_i/N - x_i sum_l mu_l/N)`.
pub fn replicator_velocity(x: &[f64], cfg: &DynamicsConfig, channels: &ChannelModel) -> Vec<f64> {
    let n = cfg.n as f64;
    let pibar = channels.mu_sum() / n;
    x.iter()
        .zip(channels.mu())
        .map(|(&xi, &mu)| cfg.sigma * (mu / n - xi * pibar))
        .collect()
}

/// Replicator velocity of a mixture; components sum to 0 (simplex tangency).
pub fn replicator_rhs(x: &MixtureState, cfg: &DynamicsConfig, channels: &ChannelModel) -> Vec<f64> {
    replicator_velocity(x.fractions(), cfg, channels)
}

/// The gain multiplying `x_i (pi_i - pibar)` in the aggregate monotone flow.
fn aggregate_gain(cfg: &DynamicsConfig, channels: &ChannelModel) -> f64 {
    let span = cfg.omega - cfg.alpha;
    let pibar = channels.mu_sum() / cfg.n as f64;
    cfg.sigma / span * (1.0 + (cfg.omega - pibar) / span)
}

/// Aggregate monotone velocity at an arbitrary point (reduced affine form).
pub fn aggregate_monotone_velocity(
    x: &[f64],
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> Vec<f64> {
    let n = cfg.n as f64;
    let pibar = channels.mu_sum() / n;
    let gain = aggregate_gain(cfg, channels);
    x.iter()
        .zip(channels.mu())
        .map(|(&xi, &mu)| gain * (mu / n - xi * pibar))
        .collect()
}

/// Aggregate monotone velocity of a mixture.
pub fn aggregate_monotone_rhs(
    x: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> Vec<f64> {
    aggregate_monotone_velocity(x.fractions(), cfg, channels)
}

fn exponential_relaxation(
    x0: &MixtureState,
    t: f64,
    rate: f64,
    channels: &ChannelModel,
) -> MixtureState {
    let star = crate::model::nash_equilibrium(channels);
    let decay = (-rate * t).exp();
    let x = x0
        .fractions()
        .iter()
        .zip(star.fractions())
        .map(|(&x0i, &xsi)| (x0i - xsi) * decay + xsi)
        .collect();
    MixtureState::new(x).expect("relaxation stays on the simplex")
}

/// Closed-form replicator trajectory:
/// `x_i(t) = (x_i(0) - x*_i) exp(-(sum_l mu_l/N) sigma t) + x*_i`.
pub fn replicator_closed_form(
    x0: &MixtureState,
    t: f64,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> MixtureState {
    let rate = cfg.sigma * channels.mu_sum() / cfg.n as f64;
    exponential_relaxation(x0, t, rate, channels)
}

/// Closed-form aggregate monotone trajectory; same fixed point, rate scaled
/// by the double imitation gain.
pub fn aggregate_closed_form(
    x0: &MixtureState,
    t: f64,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> MixtureState {
    let pibar = channels.mu_sum() / cfg.n as f64;
    let rate = aggregate_gain(cfg, channels) * pibar;
    exponential_relaxation(x0, t, rate, channels)
}

/// Shared body of the two constrained maps: every entry of the new matrix is
/// `m[j][i] * gain(pi_i, pihat_j)` where `pihat_j` is the average
/// previous-iteration payoff of the SUs currently on channel `j`.
fn constrained_map<G>(
    m: &MigrationMatrix,
    x_tm1: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
    gain: G,
) -> (MigrationMatrix, MixtureState)
where
    G: Fn(f64, f64) -> f64,
{
    let c = m.channel_count();
    debug_assert_eq!(c, channels.channel_count());
    debug_assert!(
        m.col_sums()
            .iter()
            .zip(x_tm1.fractions())
            .all(|(a, b)| (a - b).abs() < 1e-6),
        "x_tm1 must be the column sums of the migration matrix"
    );
    let rows = m.row_sums();
    let pi = mean_field_payoffs(x_tm1.fractions(), cfg, channels);

    let mut data = vec![0.0; c * c];
    for j in 0..c {
        let xj = rows[j];
        if xj <= 0.0 {
            continue; // empty channel contributes nothing
        }
        let pihat = (0..c).map(|l| m.get(j, l) * pi[l]).sum::<f64>() / xj;
        for i in 0..c {
            // New entry indexed (now = i, previous = j).
            data[i * c + j] = (m.get(j, i) * gain(pi[i], pihat)).max(0.0);
        }
    }
    let total: f64 = data.iter().sum();
    for v in data.iter_mut() {
        *v /= total;
    }
    let next = MigrationMatrix { data, c };
    let mixture = MixtureState::new(next.row_sums()).expect("row sums stay on the simplex");
    (next, mixture)
}

/// Exact one-iteration update of the channel-constrained proportional
/// imitation dynamic. Input: the matrix for (t, t-1) and the mixture at
/// t-1 (its column sums). Output: the matrix for (t+1, t) and the mixture
/// at t+1 (its row sums).
pub fn constrained_pi_map(
    m: &MigrationMatrix,
    x_tm1: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> (MigrationMatrix, MixtureState) {
    let sigma = cfg.sigma;
    constrained_map(m, x_tm1, cfg, channels, |pi_i, pihat| {
        1.0 + sigma * (pi_i - pihat)
    })
}

/// Exact one-iteration update of the channel-constrained double imitation
/// dynamic (payoff bounds fixed at omega = 1, alpha = 0).
pub fn constrained_di_map(
    m: &MigrationMatrix,
    x_tm1: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> (MigrationMatrix, MixtureState) {
    debug_assert!(
        cfg.omega == 1.0 && cfg.alpha == 0.0,
        "the double imitation map is derived for omega = 1, alpha = 0"
    );
    constrained_map(m, x_tm1, cfg, channels, |pi_i, pihat| {
        1.0 + (2.0 - pihat) * (pi_i - pihat)
    })
}

/// One step of the discrete-time replicator map
/// `x_i <- x_i + sigma x_i (pi_i - pibar)`, reporting whether any coordinate
/// had to be clamped at the boundary.
pub fn double_replicator_step_checked(
    x_prev: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> (MixtureState, bool) {
    let raw: Vec<f64> = x_prev
        .fractions()
        .iter()
        .zip(replicator_velocity(x_prev.fractions(), cfg, channels))
        .map(|(&xi, v)| xi + v)
        .collect();
    let clamped = raw.iter().any(|&v| v < 0.0);
    (MixtureState::renormalized(raw), clamped)
}

/// One step of the discrete-time replicator map (one track of the
/// interleaved approximation to the constrained proportional dynamic).
pub fn double_replicator_step(
    x_prev: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> MixtureState {
    double_replicator_step_checked(x_prev, cfg, channels).0
}

/// One step of the discrete-time aggregate monotone map
/// `x_i <- x_i + x_i (2 - pibar)(pi_i - pibar)` (omega = 1, alpha = 0).
pub fn double_aggregate_step_checked(
    x_prev: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> (MixtureState, bool) {
    let n = cfg.n as f64;
    let pibar = channels.mu_sum() / n;
    let raw: Vec<f64> = x_prev
        .fractions()
        .iter()
        .zip(channels.mu())
        .map(|(&xi, &mu)| xi + (2.0 - pibar) * (mu / n - xi * pibar))
        .collect();
    let clamped = raw.iter().any(|&v| v < 0.0);
    (MixtureState::renormalized(raw), clamped)
}

/// One step of the discrete-time aggregate monotone map.
pub fn double_aggregate_step(
    x_prev: &MixtureState,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> MixtureState {
    double_aggregate_step_checked(x_prev, cfg, channels).0
}

/// Infinity norm of the (diagonal) Jacobian of the discrete replicator map:
/// `|1 - sigma sum_l mu_l / N|`. Below 1 the map is a contraction.
pub fn double_replicator_jacobian_norm(cfg: &DynamicsConfig, channels: &ChannelModel) -> f64 {
    (1.0 - cfg.sigma * channels.mu_sum() / cfg.n as f64).abs()
}

/// Trajectory `x(0), x(1), ..., x(iterations)` of the interleaved
/// approximation: two independent copies of the one-step map, seeded by
/// `x0` (even iterations) and `x1` (odd iterations), so that
/// `x(t+1) = step(x(t-1))`.
pub fn interleaved_double_trajectory(
    rule: ImitationRule,
    x0: &MixtureState,
    x1: &MixtureState,
    iterations: usize,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> Vec<MixtureState> {
    let mut xs = vec![x0.clone(), x1.clone()];
    for t in 2..=iterations {
        let next = match rule {
            ImitationRule::Proportional => double_replicator_step(&xs[t - 2], cfg, channels),
            ImitationRule::Double => double_aggregate_step(&xs[t - 2], cfg, channels),
        };
        xs.push(next);
    }
    xs.truncate(iterations + 1);
    xs
}

/// Trajectory of the exact constrained dynamic from initial mixtures
/// `x0`, `x1`, starting from the independent-assignment migration matrix
/// `m[j][l] = x1[j] x0[l]`.
pub fn constrained_trajectory(
    rule: ImitationRule,
    x0: &MixtureState,
    x1: &MixtureState,
    iterations: usize,
    cfg: &DynamicsConfig,
    channels: &ChannelModel,
) -> Vec<MixtureState> {
    let mut xs = vec![x0.clone(), x1.clone()];
    let mut m = MigrationMatrix::independent(x1, x0);
    let mut x_tm1 = x0.clone();
    for t in 1..iterations {
        let x_t = xs[t].clone();
        let (m_next, x_next) = match rule {
            ImitationRule::Proportional => constrained_pi_map(&m, &x_tm1, cfg, channels),
            ImitationRule::Double => constrained_di_map(&m, &x_tm1, cfg, channels),
        };
        xs.push(x_next);
        m = m_next;
        x_tm1 = x_t;
    }
    xs
}

/// Largest pointwise sup-norm distance between two equally indexed
/// trajectories (compared up to the shorter length).
pub fn sup_norm_deviation(a: &[MixtureState], b: &[MixtureState]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}

/// First index at which a trajectory comes within `tol` (sup-norm) of
/// `target`, if any.
pub fn iterations_to_reach(
    trajectory: &[MixtureState],
    target: &MixtureState,
    tol: f64,
) -> Option<usize> {
    trajectory
        .iter()
        .position(|x| x.max_abs_diff(target) <= tol)
}

/// A time-stamped sequence of mixtures.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MixtureState>,
}

impl Trajectory {
    pub fn final_state(&self) -> &MixtureState {
        self.states.last().expect("trajectory is never empty")
    }

    /// CSV export with header `t,x_0,...,x_{C-1}`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let c = self.states[0].len();
        write!(out, "t")?;
        for i in 0..c {
            write!(out, ",x_{i}")?;
        }
        writeln!(out)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(out, "{t}")?;
            for v in x.fractions() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Classical fixed-step RK4 integration of `dx/dt = rhs(x)` from `x0` over
/// `[0, t_max]`; each accepted state is renormalized onto the simplex.
/// Aborts with a diagnostic when the state leaves the admissible region.
pub fn integrate<F>(rhs: F, x0: &MixtureState, cfg: &DynamicsConfig) -> Result<Trajectory, Error>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "dt = {} must be positive",
            cfg.dt
        )));
    }
    let steps = (cfg.t_max / cfg.dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.clone());
    let mut x = x0.fractions().to_vec();

    let axpy = |x: &[f64], h: f64, k: &[f64]| -> Vec<f64> {
        x.iter().zip(k).map(|(&xi, &ki)| xi + h * ki).collect()
    };

    for step in 1..=steps {
        let k1 = rhs(&x);
        let k2 = rhs(&axpy(&x, cfg.dt / 2.0, &k1));
        let k3 = rhs(&axpy(&x, cfg.dt / 2.0, &k2));
        let k4 = rhs(&axpy(&x, cfg.dt, &k3));
        let mut next = x.clone();
        for i in 0..next.len() {
            next[i] += cfg.dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if next.iter().any(|v| !v.is_finite() || v.abs() > 10.0) {
            return Err(Error::Diverged(format!(
                "state left the admissible region at t = {}: {next:?}",
                step as f64 * cfg.dt
            )));
        }
        let renorm = MixtureState::renormalized(next);
        x = renorm.fractions().to_vec();
        times.push(step as f64 * cfg.dt);
        states.push(renorm);
    }
    Ok(Trajectory { times, states })
}

/// A velocity sample of the two-channel phase plane.
#[derive(Debug, Clone, Copy)]
pub struct PhasePoint {
    pub x1: f64,
    pub replicator_velocity: f64,
    pub aggregate_velocity: f64,
}

/// Velocity field and sample trajectories of a two-channel model,
/// parameterized by the fraction `x_1` on the first channel.
#[derive(Debug, Clone)]
pub struct PhasePortrait {
    pub grid: Vec<PhasePoint>,
    /// The shared zero of both fields: `x_1 = mu_1 / (mu_1 + mu_2)`.
    pub nullcline_x1: f64,
    pub replicator_trajectories: Vec<Trajectory>,
    pub aggregate_trajectories: Vec<Trajectory>,
}

/// Builds the phase plane of a two-channel model. Errors when `C != 2`.
pub fn phase_portrait(
    channels: &ChannelModel,
    cfg: &DynamicsConfig,
    grid: usize,
) -> Result<PhasePortrait, Error> {
    if channels.channel_count() != 2 {
        return Err(Error::Unsupported(format!(
            "phase portrait is defined for 2 channels, got {}",
            channels.channel_count()
        )));
    }
    if grid < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid resolution {grid} must be at least 2"
        )));
    }
    let points = (0..grid)
        .map(|k| {
            let x1 = k as f64 / (grid - 1) as f64;
            let x = [x1, 1.0 - x1];
            PhasePoint {
                x1,
                replicator_velocity: replicator_velocity(&x, cfg, channels)[0],
                aggregate_velocity: aggregate_monotone_velocity(&x, cfg, channels)[0],
            }
        })
        .collect();

    let starts = [0.05, 0.25, 0.5, 0.75, 0.95];
    let mut replicator_trajectories = Vec::new();
    let mut aggregate_trajectories = Vec::new();
    for &s in &starts {
        let x0 = MixtureState::new(vec![s, 1.0 - s]).expect("valid start");
        replicator_trajectories.push(integrate(
            |x| replicator_velocity(x, cfg, channels),
            &x0,
            cfg,
        )?);
        aggregate_trajectories.push(integrate(
            |x| aggregate_monotone_velocity(x, cfg, channels),
            &x0,
            cfg,
        )?);
    }
    Ok(PhasePortrait {
        grid: points,
        nullcline_x1: channels.mu()[0] / channels.mu_sum(),
        replicator_trajectories,
        aggregate_trajectories,
    })
}
