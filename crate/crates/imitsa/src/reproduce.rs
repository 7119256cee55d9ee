//! Pinned-seed reproduction experiments.
//!
//! Each criterion runs one quantitative experiment end to end and reports
//! the measured values against the expected ones. The functions are shared
//! by the `acceptance` test suite (which asserts every criterion) and the
//! `reproduce` CLI subcommand (which emits a machine-readable report).
//! Everything is deterministic: fixed seeds, fixed configurations, no
//! timing-dependent output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    aggregate_closed_form, aggregate_monotone_velocity, constrained_pi_map, constrained_trajectory,
    double_aggregate_step, double_replicator_jacobian_norm, double_replicator_step, integrate,
    interleaved_double_trajectory, replicator_closed_form, replicator_velocity, sup_norm_deviation,
    DynamicsConfig, ImitationRule, MigrationMatrix,
};
use crate::model::{channel_payoffs, nash_equilibrium, ChannelModel, MixtureState, NetworkState};
use crate::policies::{
    disap_decision, is_imitation_stable, pisap_decision, policy_step, Policy, PolicyParams,
    SamplingScope,
};
use crate::rng::SeedStreams;
use crate::sim::{convergence_bound_check, run_batch, run_once, SimConfig};

/// One measured-vs-expected comparison inside a criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub label: String,
    pub measured: String,
    pub expected: String,
    pub passed: bool,
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: Vec<CheckLine>,
}

impl CriterionResult {
    fn new(id: u8, name: &'static str) -> Self {
        Self {
            id,
            name,
            passed: true,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, measured: String, expected: String, ok: bool) {
        self.passed &= ok;
        self.checks.push(CheckLine {
            label: label.into(),
            measured,
            expected,
            passed: ok,
        });
    }

    fn check_le(&mut self, label: impl Into<String>, measured: f64, bound: f64) {
        self.check(
            label,
            format!("{measured:.6e}"),
            format!("<= {bound:.6e}"),
            measured <= bound,
        );
    }

    fn check_true(&mut self, label: impl Into<String>, condition: bool) {
        self.check(label, format!("{condition}"), "true".into(), condition);
    }

    /// One-line summary, e.g. `PASS [3] fairness crossing`.
    pub fn summary_line(&self) -> String {
        format!(
            "{} [{}] {} ({} checks)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.checks.len()
        )
    }
}

fn reference_channels() -> ChannelModel {
    ChannelModel::new(vec![0.3, 0.5, 0.8]).expect("reference channels")
}

fn random_interior_mixture(rng: &mut ChaCha8Rng, c: usize) -> MixtureState {
    let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    MixtureState::new(raw.iter().map(|v| v / sum).collect()).expect("normalized draw")
}

/// Criterion 1: the closed-form Nash equilibrium of the reference channels.
pub fn criterion_1_nash_closed_form() -> CriterionResult {
    let mut result = CriterionResult::new(1, "Nash equilibrium closed form");
    let ne = nash_equilibrium(&reference_channels());
    let expected = [0.1875, 0.3125, 0.5];
    for (i, (&got, want)) in ne.fractions().iter().zip(expected).enumerate() {
        result.check(
            format!("x*[{i}]"),
            format!("{got:.15}"),
            format!("{want} +- 1e-12"),
            (got - want).abs() <= 1e-12,
        );
    }
    result
}

/// Criterion 2: 100 seeded runs of the reference finite-population setup
/// settle near the integer split (9, 16, 25) and every converged state is a
/// 2-epsilon_u equilibrium.
pub fn criterion_2_finite_population_equilibrium() -> CriterionResult {
    let mut result = CriterionResult::new(2, "finite-population equilibrium");
    let cfg = SimConfig {
        runs: 100,
        seed: 1002,
        ..SimConfig::reference()
    };
    let stats = run_batch(&cfg);
    let mode = stats.final_counts_mode().to_vec();
    let target = [9usize, 16, 25];
    for i in 0..3 {
        let diff = (mode[i] as i64 - target[i] as i64).abs();
        result.check(
            format!("modal final count, channel {i}"),
            format!("{}", mode[i]),
            format!("{} +- 2", target[i]),
            diff <= 2,
        );
    }
    result.check(
        "converged runs",
        format!("{}", stats.converged_runs),
        "100".into(),
        stats.converged_runs == 100,
    );
    result.check_true(
        "all converged runs pass the 0.02-equilibrium check",
        stats.epsilon_ne_all,
    );
    result
}

/// Criterion 3: Jain fairness of the channel-constrained policies, averaged
/// over 1000 runs, crosses 0.982 by iteration 250 (proportional) and 150
/// (double), the double rule strictly earlier.
pub fn criterion_3_fairness_crossing() -> CriterionResult {
    let mut result = CriterionResult::new(3, "fairness crossing");
    let horizon = 350u64;
    let base = SimConfig {
        runs: 1000,
        seed: 1003,
        max_iterations: horizon,
        stop_on_convergence: false,
        ..SimConfig::reference()
    };

    // Sigma is 1 for both rules, the value under which the double rule
    // realizes its mean-field gain of roughly (2 - pibar) over the
    // proportional one; at the library's conservative DISAP default of 0.25
    // the double rule would move less probability mass per iteration and
    // the crossing order would invert.
    let constrained = |policy: Policy| PolicyParams {
        sigma: 1.0,
        scope: SamplingScope::SameChannel,
        ..PolicyParams::defaults_for(policy)
    };
    let mut pisap = base.clone();
    pisap.params = constrained(Policy::Pisap);

    let mut disap = base;
    disap.policy = Policy::Disap;
    disap.params = constrained(Policy::Disap);

    let crossing = |cfg: &SimConfig| -> Option<usize> {
        let stats = run_batch(cfg);
        stats.mean_fairness.iter().position(|&j| j >= 0.982)
    };
    let t_pisap = crossing(&pisap);
    let t_disap = crossing(&disap);

    result.check(
        "PISAP crossing of 0.982",
        format!("{t_pisap:?}"),
        "Some(t), t <= 250".into(),
        t_pisap.map(|t| t <= 250).unwrap_or(false),
    );
    result.check(
        "DISAP crossing of 0.982",
        format!("{t_disap:?}"),
        "Some(t), t <= 150".into(),
        t_disap.map(|t| t <= 150).unwrap_or(false),
    );
    result.check(
        "DISAP crosses strictly earlier",
        format!("disap {t_disap:?} vs pisap {t_pisap:?}"),
        "disap < pisap".into(),
        matches!((t_disap, t_pisap), (Some(d), Some(p)) if d < p),
    );
    result
}

/// Criterion 4: closed forms match RK4 integration of both flows to 1e-8
/// over t in [0, 100] at dt = 0.01.
pub fn criterion_4_closed_form_vs_numeric() -> CriterionResult {
    let mut result = CriterionResult::new(4, "closed form vs numeric integration");
    let channels = reference_channels();
    let cfg = DynamicsConfig::default();
    let x0 = MixtureState::new(vec![0.6, 0.3, 0.1]).expect("start");

    let max_err = |closed: &dyn Fn(f64) -> MixtureState, numeric: &crate::dynamics::Trajectory| {
        numeric
            .times
            .iter()
            .zip(&numeric.states)
            .map(|(t, x)| x.max_abs_diff(&closed(*t)))
            .fold(0.0f64, f64::max)
    };

    let repl = integrate(|x| replicator_velocity(x, &cfg, &channels), &x0, &cfg)
        .expect("replicator integration");
    let err_r = max_err(&|t| replicator_closed_form(&x0, t, &cfg, &channels), &repl);
    result.check_le("replicator max |closed - RK4|", err_r, 1e-8);

    let aggr = integrate(
        |x| aggregate_monotone_velocity(x, &cfg, &channels),
        &x0,
        &cfg,
    )
    .expect("aggregate integration");
    let err_a = max_err(&|t| aggregate_closed_form(&x0, t, &cfg, &channels), &aggr);
    result.check_le("aggregate max |closed - RK4|", err_a, 1e-8);
    result
}

/// Criterion 5: the discrete replicator map contracts with the analytic
/// Jacobian norm 0.968 and fixed-point iteration reaches the equilibrium
/// from 100 random interior starts.
pub fn criterion_5_contraction() -> CriterionResult {
    let mut result = CriterionResult::new(5, "contraction of the discrete replicator map");
    let channels = reference_channels();
    let cfg = DynamicsConfig::default();
    let norm = double_replicator_jacobian_norm(&cfg, &channels);
    result.check(
        "Jacobian infinity norm",
        format!("{norm:.15}"),
        "0.968 +- 1e-12".into(),
        (norm - 0.968).abs() <= 1e-12,
    );

    let star = nash_equilibrium(&channels);
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut worst_steps = 0usize;
    let mut all_converged = true;
    for _ in 0..100 {
        let mut x = random_interior_mixture(&mut rng, 3);
        let mut reached = None;
        for step in 1..=2000 {
            x = double_replicator_step(&x, &cfg, &channels);
            if x.max_abs_diff(&star) < 1e-9 {
                reached = Some(step);
                break;
            }
        }
        match reached {
            Some(s) => worst_steps = worst_steps.max(s),
            None => all_converged = false,
        }
    }
    result.check_true(
        "100/100 interior starts reach x* within 1e-9",
        all_converged,
    );
    result.check(
        "worst-case iterations to 1e-9",
        format!("{worst_steps}"),
        "<= 2000".into(),
        worst_steps <= 2000 && all_converged,
    );
    result
}

/// Criterion 6: the exact constrained dynamics and their interleaved
/// approximations stay within sup-norm 0.05 from the uniform start.
pub fn criterion_6_approximation_fidelity() -> CriterionResult {
    let mut result = CriterionResult::new(6, "approximation fidelity of the interleaved maps");
    let channels = reference_channels();
    let cfg = DynamicsConfig::default();
    let uniform = MixtureState::uniform(3);
    let horizon = 600;

    for (rule, label) in [
        (ImitationRule::Proportional, "proportional"),
        (ImitationRule::Double, "double"),
    ] {
        let exact = constrained_trajectory(rule, &uniform, &uniform, horizon, &cfg, &channels);
        let approx =
            interleaved_double_trajectory(rule, &uniform, &uniform, horizon, &cfg, &channels);
        let dev = sup_norm_deviation(&exact, &approx);
        result.check_le(format!("{label}: sup-norm exact vs interleaved"), dev, 0.05);
    }
    result
}

/// Criterion 7: finite-population proportions at t = 2 concentrate around
/// the mean-field prediction as N grows, below the Chebyshev-style bound
/// `C / (N delta)^2`.
pub fn criterion_7_concentration() -> CriterionResult {
    let mut result = CriterionResult::new(7, "finite-population concentration at t = 2");
    let channels = reference_channels();
    let delta = 0.05;
    let seeds = 500usize;
    // Initial proportions whose pairwise products are integer multiples of
    // 1/50, so every population size below realizes them exactly.
    let x0 = MixtureState::new(vec![0.4, 0.4, 0.2]).expect("x0");
    let x1 = MixtureState::new(vec![0.2, 0.4, 0.4]).expect("x1");

    let mut params = PolicyParams::defaults_for(Policy::Pisap);
    params.scope = SamplingScope::SameChannel;
    params.epsilon_u = 0.0;

    let mut prev_prob = f64::INFINITY;
    for &n in &[50usize, 200, 800] {
        // Mean-field prediction for iteration 2; payoffs scale with 1/N, so
        // each population size has its own trajectory.
        let cfg = DynamicsConfig {
            n,
            ..DynamicsConfig::default()
        };
        let m = MigrationMatrix::independent(&x1, &x0);
        let (_, x2) = constrained_pi_map(&m, &x0, &cfg, &channels);
        // Deterministic layout realizing the joint proportions exactly.
        let mut s0 = Vec::with_capacity(n);
        let mut s1 = Vec::with_capacity(n);
        for j in 0..3 {
            for l in 0..3 {
                let k = (n as f64 * x1.fractions()[j] * x0.fractions()[l]).round() as usize;
                for _ in 0..k {
                    s1.push(j);
                    s0.push(l);
                }
            }
        }
        assert_eq!(s0.len(), n, "joint proportions must tile the population");

        let counts0 = {
            let mut c = vec![0usize; 3];
            for &ch in &s0 {
                c[ch] += 1;
            }
            c
        };
        let u0 = channel_payoffs(&counts0, &channels);
        let payoff_prev: Vec<f64> = s0.iter().map(|&ch| u0[ch]).collect();
        let state =
            NetworkState::new(s1.clone(), s0.clone(), payoff_prev, 1, 3).expect("valid state");

        let mut exceed = [0usize; 3];
        for seed in 0..seeds {
            let streams = SeedStreams::new(1007 + seed as u64);
            let next = policy_step(&state, &channels, &params, Policy::Pisap, &streams);
            let counts = next.channel_counts(3);
            for i in 0..3 {
                let p = counts[i] as f64 / n as f64;
                if (p - x2.fractions()[i]).abs() > delta {
                    exceed[i] += 1;
                }
            }
        }
        let worst = exceed.iter().max().copied().unwrap_or(0) as f64 / seeds as f64;
        let bound = 3.0 / (n as f64 * delta).powi(2);
        result.check_le(
            format!("N = {n}: worst per-channel deviation rate"),
            worst,
            bound,
        );
        result.check(
            format!("N = {n}: rate does not increase with N"),
            format!("{worst:.4}"),
            format!("<= {:.4}", prev_prob.min(1.0)),
            worst <= prev_prob,
        );
        prev_prob = worst;
    }
    result
}

/// Criterion 8: empirical convergence times over 1000 reference runs sit
/// far below the worst-case bound `N^2 / (mu_min sigma epsilon_u)`.
pub fn criterion_8_convergence_bound() -> CriterionResult {
    let mut result = CriterionResult::new(8, "convergence-time bound");
    let cfg = SimConfig {
        runs: 1000,
        seed: 1008,
        ..SimConfig::reference()
    };
    let report = convergence_bound_check(&cfg).expect("epsilon_u > 0");
    let expected_bound = 2500.0 / (0.3 * 1.0 * 0.01);
    result.check(
        "bound value",
        format!("{:.2}", report.bound),
        format!("{expected_bound:.2}"),
        (report.bound - expected_bound).abs() < 1e-6,
    );
    result.check(
        "converged runs",
        format!("{}", report.converged_runs),
        "1000".into(),
        report.converged_runs == 1000,
    );
    result.check(
        "empirical max below bound",
        format!("{:?}", report.empirical_max),
        format!("< {:.0}", report.bound),
        !report.violation && report.empirical_max.is_some(),
    );
    result.check(
        "report notes the empirical margin",
        report.note.clone(),
        "mentions the bound factor".into(),
        report.note.contains("factor") && report.margin.map(|m| m > 100.0).unwrap_or(false),
    );
    result
}

const PROPERTY_CASES: usize = 10_000;

/// Criterion 9: randomized property suites, at least 10^4 cases each.
pub fn criterion_9_property_suites() -> CriterionResult {
    let mut result = CriterionResult::new(9, "randomized property suites");
    suite_simplex_conservation(&mut result);
    suite_probability_range(&mut result);
    suite_gating(&mut result);
    suite_imitation_only(&mut result);
    suite_determinism(&mut result);
    suite_fixed_point(&mut result);
    result
}

fn suite_simplex_conservation(result: &mut CriterionResult) {
    let channels = reference_channels();
    let cfg = DynamicsConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let mut violations = 0usize;
    for case in 0..PROPERTY_CASES {
        let sum = match case % 4 {
            0 => {
                let x = random_interior_mixture(&mut rng, 3);
                double_replicator_step(&x, &cfg, &channels)
                    .fractions()
                    .iter()
                    .sum::<f64>()
            }
            1 => {
                let x = random_interior_mixture(&mut rng, 3);
                double_aggregate_step(&x, &cfg, &channels)
                    .fractions()
                    .iter()
                    .sum::<f64>()
            }
            _ => {
                let mut data: Vec<f64> = (0..9).map(|_| rng.random_range(0.5..1.5)).collect();
                let total: f64 = data.iter().sum();
                for v in data.iter_mut() {
                    *v /= total;
                }
                let rows: Vec<Vec<f64>> = data.chunks(3).map(|r| r.to_vec()).collect();
                let m = MigrationMatrix::new(rows).expect("normalized matrix");
                let x_tm1 = MixtureState::new(m.col_sums()).expect("column sums");
                let (m2, x2) = if case % 4 == 2 {
                    constrained_pi_map(&m, &x_tm1, &cfg, &channels)
                } else {
                    crate::dynamics::constrained_di_map(&m, &x_tm1, &cfg, &channels)
                };
                debug_assert!(x2.fractions().iter().all(|&v| v >= 0.0));
                m2.total()
            }
        };
        if (sum - 1.0).abs() > 1e-9 {
            violations += 1;
        }
    }
    result.check(
        format!("simplex conservation over {PROPERTY_CASES} map applications"),
        format!("{violations} violations"),
        "0 violations".into(),
        violations == 0,
    );
}

fn suite_probability_range(result: &mut CriterionResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(9002);
    let mut violations = 0usize;
    for _ in 0..PROPERTY_CASES {
        let params = PolicyParams {
            sigma: rng.random_range(0.05..3.0),
            epsilon_u: rng.random_range(0.0..0.2),
            omega: 1.0,
            alpha: 0.0,
            scope: SamplingScope::Global,
            exploration: 0.0,
        };
        let u_self = rng.random_range(0.0..1.0);
        let u1 = rng.random_range(0.0..1.0);
        let u2 = rng.random_range(0.0..1.0);
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        let p = pisap_decision(u_self, u1, 1, &params).probability;
        let (d1, d2) = disap_decision(
            u_self,
            rng.random_range(0..4),
            (lo, rng.random_range(0..4)),
            (hi, rng.random_range(0..4)),
            &params,
        );
        let ok = (0.0..=1.0).contains(&p)
            && (0.0..=1.0).contains(&d1.probability)
            && (0.0..=1.0).contains(&d2.probability)
            && d1.probability + d2.probability <= 1.0 + 1e-12;
        if !ok {
            violations += 1;
        }
    }
    result.check(
        format!("probabilities in [0,1] over {PROPERTY_CASES} random decisions"),
        format!("{violations} violations"),
        "0 violations".into(),
        violations == 0,
    );
}

fn suite_gating(result: &mut CriterionResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(9003);
    let mut violations = 0usize;
    for _ in 0..PROPERTY_CASES {
        let params = PolicyParams {
            sigma: rng.random_range(0.05..3.0),
            epsilon_u: rng.random_range(0.0..0.3),
            omega: 1.0,
            alpha: 0.0,
            scope: SamplingScope::Global,
            exploration: 0.0,
        };
        // Condition the draw on a closed gate: u_self >= u_target - eps_u.
        let u_target = rng.random_range(0.0..1.0);
        let floor = (u_target - params.epsilon_u).max(0.0);
        let u_self = rng.random_range(floor..1.0);
        if pisap_decision(u_self, u_target, 1, &params).probability != 0.0 {
            violations += 1;
        }
        // Double imitation: the gated sample must contribute nothing.
        let u_other = rng.random_range(0.0..1.0);
        let (s1, s2) = if u_other <= u_target {
            ((u_other, 2), (u_target, 3))
        } else {
            ((u_target, 3), (u_other, 2))
        };
        let (d1, d2) = disap_decision(u_self, 0, s1, s2, &params);
        let gated = if s1.1 == 3 { d1 } else { d2 };
        if u_self >= u_target - params.epsilon_u && gated.probability != 0.0 {
            violations += 1;
        }
    }
    result.check(
        format!("closed gates give exactly zero probability over {PROPERTY_CASES} cases"),
        format!("{violations} violations"),
        "0 violations".into(),
        violations == 0,
    );
}

fn suite_imitation_only(result: &mut CriterionResult) {
    let channels = reference_channels();
    let mut rng = ChaCha8Rng::seed_from_u64(9004);
    let mut checked = 0usize;
    let mut violations = 0usize;
    while checked < PROPERTY_CASES {
        let n = rng.random_range(5..40);
        let now: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let prev: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let mut prev_counts = vec![0usize; 3];
        for &c in &prev {
            prev_counts[c] += 1;
        }
        let u_prev = channel_payoffs(&prev_counts, &channels);
        let payoff_prev: Vec<f64> = prev.iter().map(|&c| u_prev[c]).collect();
        let state =
            NetworkState::new(now.clone(), prev.clone(), payoff_prev, 1, 3).expect("valid state");
        let scope = if rng.random::<bool>() {
            SamplingScope::Global
        } else {
            SamplingScope::SameChannel
        };
        let policy = if rng.random::<bool>() {
            Policy::Pisap
        } else {
            Policy::Disap
        };
        let mut params = PolicyParams::defaults_for(policy);
        params.scope = scope;
        params.epsilon_u = 0.0;
        let next = policy_step(
            &state,
            &channels,
            &params,
            policy,
            &SeedStreams::new(rng.random()),
        );
        for j in 0..n {
            checked += 1;
            let dest = next.channel_now()[j];
            let reachable = match scope {
                SamplingScope::Global => dest == now[j] || (0..n).any(|k| k != j && now[k] == dest),
                SamplingScope::SameChannel => (0..n).any(|k| now[k] == now[j] && prev[k] == dest),
            };
            if !reachable {
                violations += 1;
            }
        }
    }
    result.check(
        format!("movers only copy sampled channels over {checked} SU steps"),
        format!("{violations} violations"),
        "0 violations".into(),
        violations == 0,
    );
}

fn suite_determinism(result: &mut CriterionResult) {
    let mut compared = 0usize;
    let mut violations = 0usize;
    for seed in 0..25u64 {
        let cfg = SimConfig {
            n_sus: 20,
            max_iterations: 100,
            stop_on_convergence: false,
            policy: if seed % 2 == 0 {
                Policy::Pisap
            } else {
                Policy::Disap
            },
            params: PolicyParams {
                scope: if seed % 4 < 2 {
                    SamplingScope::Global
                } else {
                    SamplingScope::SameChannel
                },
                ..PolicyParams::defaults_for(if seed % 2 == 0 {
                    Policy::Pisap
                } else {
                    Policy::Disap
                })
            },
            ..SimConfig::reference()
        };
        let a = run_once(&cfg, seed);
        let b = run_once(&cfg, seed);
        for (ca, cb) in a.counts.iter().zip(&b.counts) {
            for (x, y) in ca.iter().zip(cb) {
                compared += 1;
                if x != y {
                    violations += 1;
                }
            }
        }
        for (x, y) in a.fairness.iter().zip(&b.fairness) {
            compared += 1;
            if x.to_bits() != y.to_bits() {
                violations += 1;
            }
        }
    }
    assert!(compared >= PROPERTY_CASES);
    result.check(
        format!("bit-identical replays over {compared} trace values"),
        format!("{violations} mismatches"),
        "0 mismatches".into(),
        violations == 0,
    );
}

fn suite_fixed_point(result: &mut CriterionResult) {
    let channels = reference_channels();
    let mut rng = ChaCha8Rng::seed_from_u64(9006);
    let mut checked = 0usize;
    let mut violations = 0usize;
    while checked < PROPERTY_CASES {
        let counts: Vec<usize> = (0..3).map(|_| rng.random_range(0..25)).collect();
        if counts.iter().sum::<usize>() < 2 {
            continue;
        }
        let mut assignment = Vec::new();
        for (ch, &k) in counts.iter().enumerate() {
            assignment.extend(std::iter::repeat_n(ch, k));
        }
        let payoffs = channel_payoffs(&counts, &channels);
        let state = NetworkState::initial(assignment, &payoffs);
        let policy = if rng.random::<bool>() {
            Policy::Pisap
        } else {
            Policy::Disap
        };
        let mut params = PolicyParams::defaults_for(policy);
        // Mix tight and loose thresholds to reach stability both ways.
        params.epsilon_u = if rng.random::<bool>() { 0.01 } else { 1.0 };
        if !is_imitation_stable(&state, &channels, &params, policy) {
            continue;
        }
        for _ in 0..20 {
            let next = policy_step(
                &state,
                &channels,
                &params,
                policy,
                &SeedStreams::new(rng.random()),
            );
            checked += 1;
            if next.channel_now() != state.channel_now() {
                violations += 1;
            }
        }
    }
    result.check(
        format!("stable states stay fixed over {checked} random draws"),
        format!("{violations} migrations"),
        "0 migrations".into(),
        violations == 0,
    );
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1_nash_closed_form(),
        criterion_2_finite_population_equilibrium(),
        criterion_3_fairness_crossing(),
        criterion_4_closed_form_vs_numeric(),
        criterion_5_contraction(),
        criterion_6_approximation_fidelity(),
        criterion_7_concentration(),
        criterion_8_convergence_bound(),
        criterion_9_property_suites(),
    ]
}
