//! The spectrum access game: channels, payoffs, equilibria, fairness.
//!
//! `C` licensed channels are shared by `N` secondary users. Channel `i` is
//! free of primary-user activity with probability `mu[i]` and its normalized
//! bandwidth is split evenly among the SUs camped on it, so each of the `n_i`
//! SUs on channel `i` earns `mu[i] / n_i` per iteration. This is a congestion
//! game with potential `P(x) = sum_i (mu_i/N) (ln x_i - ln eps0)` over the
//! population mixture `x`; its unique interior maximizer (and unique Nash
//! equilibrium) is `x*_i = mu_i / sum_l mu_l`, where every channel pays the
//! same `sum_l mu_l / N`.

use crate::Error;

/// Absolute tolerance for payoff equality comparisons.
///
/// Payoffs are ratios of small rationals; exact float equality is brittle.
pub const PAYOFF_TOL: f64 = 1e-12;

/// Tolerated simplex-sum drift for mixtures and migration matrices.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// The channels and their availability probabilities.
///
/// Bandwidth is normalized to 1, so all payoffs live in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    mu: Vec<f64>,
}

impl ChannelModel {
    /// Builds a channel model from per-channel availability probabilities.
    ///
    /// Requires at least two channels and `0 < mu[i] <= 1` for all `i`.
    pub fn new(mu: Vec<f64>) -> Result<Self, Error> {
        if mu.len() < 2 {
            return Err(Error::InvalidChannels(format!(
                "need at least 2 channels, got {}",
                mu.len()
            )));
        }
        for (i, &m) in mu.iter().enumerate() {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::InvalidChannels(format!(
                    "mu[{i}] = {m} is outside (0, 1]"
                )));
            }
        }
        Ok(Self { mu })
    }

    pub fn channel_count(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `sum_l mu_l`, the total free bandwidth per slot.
    pub fn mu_sum(&self) -> f64 {
        self.mu.iter().sum()
    }

    pub fn mu_min(&self) -> f64 {
        self.mu.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Per-SU snapshot of the network at one iteration.
///
/// Carries the current channel of every SU together with the channel it
/// occupied and the payoff it earned one iteration earlier; the channel
/// constrained policies decide on exactly that lagged information.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    channel_now: Vec<usize>,
    channel_prev: Vec<usize>,
    payoff_prev: Vec<f64>,
    iteration: u64,
}

impl NetworkState {
    /// Builds a state from explicit vectors, validating index ranges and
    /// payoff bounds against `num_channels`.
    pub fn new(
        channel_now: Vec<usize>,
        channel_prev: Vec<usize>,
        payoff_prev: Vec<f64>,
        iteration: u64,
        num_channels: usize,
    ) -> Result<Self, Error> {
        let n = channel_now.len();
        if n == 0 {
            return Err(Error::Domain("network state needs at least one SU".into()));
        }
        if channel_prev.len() != n || payoff_prev.len() != n {
            return Err(Error::Domain(format!(
                "state vectors disagree on population size: {n}, {}, {}",
                channel_prev.len(),
                payoff_prev.len()
            )));
        }
        for &ch in channel_now.iter().chain(channel_prev.iter()) {
            if ch >= num_channels {
                return Err(Error::Domain(format!(
                    "channel index {ch} out of range (C = {num_channels})"
                )));
            }
        }
        for &u in &payoff_prev {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::Domain(format!("payoff {u} outside [0, 1]")));
            }
        }
        Ok(Self {
            channel_now,
            channel_prev,
            payoff_prev,
            iteration,
        })
    }

    /// Initial state at iteration 0: no history yet, so the previous channel
    /// is the current one and the previous payoff is what the assignment
    /// earns right now.
    pub fn initial(assignment: Vec<usize>, channel_payoffs: &[f64]) -> Self {
        let payoff_prev = assignment.iter().map(|&ch| channel_payoffs[ch]).collect();
        Self {
            channel_now: assignment.clone(),
            channel_prev: assignment,
            payoff_prev,
            iteration: 0,
        }
    }

    /// The state one iteration later with `new_assignment` as the current
    /// channels; `channel_payoffs` are the per-channel payoffs earned on the
    /// (old) current assignment, which become the previous payoffs.
    pub fn advanced(&self, new_assignment: Vec<usize>, channel_payoffs: &[f64]) -> Self {
        debug_assert_eq!(new_assignment.len(), self.channel_now.len());
        let payoff_prev = self
            .channel_now
            .iter()
            .map(|&ch| channel_payoffs[ch])
            .collect();
        Self {
            channel_prev: self.channel_now.clone(),
            channel_now: new_assignment,
            payoff_prev,
            iteration: self.iteration + 1,
        }
    }

    pub(crate) fn set_iteration(&mut self, iteration: u64) {
        self.iteration = iteration;
    }

    pub fn n_sus(&self) -> usize {
        self.channel_now.len()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn channel_now(&self) -> &[usize] {
        &self.channel_now
    }

    pub fn channel_prev(&self) -> &[usize] {
        &self.channel_prev
    }

    pub fn payoff_prev(&self) -> &[f64] {
        &self.payoff_prev
    }

    /// Number of SUs per channel under the current assignment.
    pub fn channel_counts(&self, num_channels: usize) -> Vec<usize> {
        let mut counts = vec![0usize; num_channels];
        for &ch in &self.channel_now {
            counts[ch] += 1;
        }
        counts
    }
}

/// Population fractions on the channel simplex (mean-field state).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    x: Vec<f64>,
}

impl MixtureState {
    /// Validates nonnegativity and unit sum (within [`SIMPLEX_TOL`]).
    pub fn new(x: Vec<f64>) -> Result<Self, Error> {
        if x.len() < 2 {
            return Err(Error::Domain(format!(
                "mixture needs at least 2 channels, got {}",
                x.len()
            )));
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::Domain(format!("x[{i}] = {v} is negative or NaN")));
            }
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!(
                "mixture sums to {sum}, expected 1 within {SIMPLEX_TOL}"
            )));
        }
        Ok(Self { x })
    }

    pub fn uniform(num_channels: usize) -> Self {
        Self {
            x: vec![1.0 / num_channels as f64; num_channels],
        }
    }

    /// Floors entries at 1e-15 and rescales to unit sum. Keeps mean-field
    /// iterates strictly interior despite floating-point crossings of zero.
    pub(crate) fn renormalized(mut raw: Vec<f64>) -> Self {
        for v in raw.iter_mut() {
            if *v < 1e-15 {
                *v = 1e-15;
            }
        }
        let sum: f64 = raw.iter().sum();
        for v in raw.iter_mut() {
            *v /= sum;
        }
        Self { x: raw }
    }

    pub fn fractions(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `max_i |x_i - other_i|`.
    pub fn max_abs_diff(&self, other: &MixtureState) -> f64 {
        self.x
            .iter()
            .zip(other.x.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Payoff of one SU on a channel with availability `mu_i` shared by `n_i` SUs.
///
/// Panics if `n_i == 0`: the payoff of an empty channel is never queried.
pub fn expected_payoff(mu_i: f64, n_i: usize) -> f64 {
    assert!(n_i >= 1, "payoff of an empty channel is undefined");
    mu_i / n_i as f64
}

/// Per-channel expected payoffs for a count vector; empty channels get NaN
/// (they carry no SU, so their payoff is never read).
pub fn channel_payoffs(counts: &[usize], channels: &ChannelModel) -> Vec<f64> {
    counts
        .iter()
        .zip(channels.mu())
        .map(|(&n, &mu)| {
            if n > 0 {
                expected_payoff(mu, n)
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// The unique Nash equilibrium mixture `x*_i = mu_i / sum_l mu_l`.
pub fn nash_equilibrium(channels: &ChannelModel) -> MixtureState {
    let total = channels.mu_sum();
    MixtureState {
        x: channels.mu().iter().map(|&m| m / total).collect(),
    }
}

/// Potential of the congestion game at mixture `x` for population size `n`:
/// `P(x) = sum_i (mu_i/n) (ln x_i - ln eps0)`.
///
/// `eps0` only shifts `P` by a constant and never affects gradients.
pub fn potential(
    x: &MixtureState,
    channels: &ChannelModel,
    n: usize,
    eps0: f64,
) -> Result<f64, Error> {
    if !(eps0 > 0.0) {
        return Err(Error::Domain(format!("eps0 = {eps0} must be positive")));
    }
    let ln_eps0 = eps0.ln();
    let mut p = 0.0;
    for (i, (&xi, &mu)) in x.fractions().iter().zip(channels.mu()).enumerate() {
        if xi <= 0.0 {
            return Err(Error::Domain(format!(
                "potential undefined at boundary: x[{i}] = {xi}"
            )));
        }
        p += mu / n as f64 * (xi.ln() - ln_eps0);
    }
    Ok(p)
}

/// Gradient of the potential: `dP/dx_i = mu_i / (x_i n)`, the expected
/// per-SU payoff on channel `i` at mixture `x`.
pub fn potential_gradient(
    x: &MixtureState,
    channels: &ChannelModel,
    n: usize,
) -> Result<Vec<f64>, Error> {
    x.fractions()
        .iter()
        .zip(channels.mu())
        .enumerate()
        .map(|(i, (&xi, &mu))| {
            if xi <= 0.0 {
                Err(Error::Domain(format!(
                    "potential gradient undefined at boundary: x[{i}] = {xi}"
                )))
            } else {
                Ok(mu / (xi * n as f64))
            }
        })
        .collect()
}

/// True iff no SU can gain more than `eps` by unilaterally switching channel.
///
/// An SU on channel `i` deviating to `l` would earn `mu_l / (n_l + 1)` (it
/// joins the `n_l` SUs already there; deviation to an empty channel earns the
/// full `mu_l`). Comparisons use [`PAYOFF_TOL`].
pub fn epsilon_ne_check(state: &NetworkState, channels: &ChannelModel, eps: f64) -> bool {
    let counts = state.channel_counts(channels.channel_count());
    for (i, &n_i) in counts.iter().enumerate() {
        if n_i == 0 {
            continue; // no SU on i, nothing to deviate from
        }
        let own = expected_payoff(channels.mu()[i], n_i);
        for (l, &n_l) in counts.iter().enumerate() {
            if l == i {
                continue;
            }
            let gain = channels.mu()[l] / (n_l + 1) as f64 - own;
            if gain > eps + PAYOFF_TOL {
                return false;
            }
        }
    }
    true
}

/// Jain's fairness index `(sum a)^2 / (n sum a^2)` of an allocation vector.
///
/// Equals 1 iff all entries are equal and is at least `1/n`; errors on an
/// all-zero (or negative) vector.
pub fn jain_index(allocations: &[f64]) -> Result<f64, Error> {
    if allocations.is_empty() {
        return Err(Error::Domain("jain index of an empty vector".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (i, &a) in allocations.iter().enumerate() {
        if !(a >= 0.0) {
            return Err(Error::Domain(format!(
                "allocation[{i}] = {a} is negative or NaN"
            )));
        }
        sum += a;
        sum_sq += a * a;
    }
    if sum_sq == 0.0 {
        return Err(Error::Domain(
            "jain index undefined for an all-zero allocation".into(),
        ));
    }
    Ok(sum * sum / (allocations.len() as f64 * sum_sq))
}
