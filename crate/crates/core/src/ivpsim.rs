//! Forward simulation by the method of steps, the one-interval node map, and
//! the exponential-stability constants with their perturbation experiment.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{uniform_samples, GridSolution, IntervalSamples};
use crate::lindich::{ExpBound, DEFAULT_SAMPLES_PER_INTERVAL};
use crate::linalg::{inverse, op_norm};
use crate::ode::{integrate, OdeOptions};
use crate::problem::{EPCAGProblem, Nonlinearity};
use crate::quadrature::{composite_gauss_points, GaussLegendre};
use crate::timescale::IndexWindow;

/// Node values `x(θ_first), …, x(θ_last)`; the last one is the starting state.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub first: i64,
    pub values: Vec<DVector<f64>>,
}

impl InitialData {
    pub fn new(first: i64, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("initial data needs at least the starting node"));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("initial vectors differ in length".into()));
        }
        Ok(InitialData { first, values })
    }

    /// The same vector on the nodes `start − depth ..= start`.
    pub fn constant(start: i64, depth: i64, value: DVector<f64>) -> Self {
        InitialData { first: start - depth.max(0), values: vec![value; depth.max(0) as usize + 1] }
    }

    /// `η^j` placed at `θ_{start − p_j}`. Every node from `start − max p_j` to
    /// `start` must receive a value, and coinciding deviations must agree.
    pub fn from_eta(start: i64, deviations: &[i64], eta: &[DVector<f64>]) -> Result<Self> {
        if deviations.len() != eta.len() {
            return Err(Error::Dimension(format!("{} deviations but {} initial vectors", deviations.len(), eta.len())));
        }
        if let Some(&p) = deviations.iter().find(|&&p| p < 0) {
            return Err(Error::NegativeDeviation(p));
        }
        let depth = deviations.iter().copied().max().unwrap_or(0);
        let mut slots: Vec<Option<DVector<f64>>> = vec![None; depth as usize + 1];
        for (&p, v) in deviations.iter().zip(eta) {
            let slot = &mut slots[(depth - p) as usize];
            match slot {
                Some(prev) if (prev.clone() - v).norm() > 0.0 => {
                    return Err(Error::invalid(format!("conflicting initial values at node {}", start - p)))
                }
                _ => *slot = Some(v.clone()),
            }
        }
        let missing: Vec<i64> = slots.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(k, _)| start - depth + k as i64).collect();
        if !missing.is_empty() {
            return Err(Error::InsufficientWindow(format!("the method of steps also needs values at nodes {missing:?}")));
        }
        Self::new(start - depth, slots.into_iter().map(Option::unwrap).collect())
    }

    /// Node values of a computed solution on `start − depth ..= start`.
    pub fn from_solution(sol: &GridSolution, start: i64, depth: i64) -> Result<Self> {
        let values = (start - depth..=start).map(|i| sol.node_value(i).cloned()).collect::<Result<_>>()?;
        Self::new(start - depth, values)
    }

    pub fn start(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, i: i64) -> Option<&DVector<f64>> {
        let k = i - self.first;
        (k >= 0).then(|| self.values.get(k as usize)).flatten()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IvpOptions {
    pub ode: OdeOptions,
    pub samples_per_interval: usize,
}

impl Default for IvpOptions {
    fn default() -> Self {
        IvpOptions { ode: OdeOptions::default(), samples_per_interval: DEFAULT_SAMPLES_PER_INTERVAL }
    }
}

impl IvpOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        IvpOptions { ode: OdeOptions::with_rtol(rtol), ..Default::default() }
    }
}

/// A forward solution together with the history it started from.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub history: InitialData,
    pub grid: GridSolution,
}

impl Trajectory {
    pub fn node_value(&self, i: i64) -> Option<&DVector<f64>> {
        if i < self.grid.first_node {
            self.history.get(i)
        } else {
            self.grid.node_value(i).ok()
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        self.grid.eval(t)
    }
}

fn reject_advanced(problem: &EPCAGProblem) -> Result<()> {
    match problem.deviations.iter().find(|&&p| p < 0) {
        Some(&p) => Err(Error::NegativeDeviation(p)),
        None => Ok(()),
    }
}

fn check_history(problem: &EPCAGProblem, init: &InitialData) -> Result<()> {
    if init.dim() != problem.dim() {
        return Err(Error::Dimension(format!("initial data has dimension {}, system {}", init.dim(), problem.dim())));
    }
    let needed = problem.max_delay();
    if init.start() - init.first < needed {
        return Err(Error::InsufficientWindow(format!(
            "history covers {} nodes before the start, deviations reach back {needed}",
            init.start() - init.first
        )));
    }
    Ok(())
}

/// Method of steps from `θ_start` to `t_end`: on each interval the deviated
/// arguments are frozen at known node values and the ODE is integrated, the
/// end state becoming the next node value.
pub fn solve_ivp(problem: &EPCAGProblem, init: &InitialData, t_end: f64, opts: &IvpOptions) -> Result<Trajectory> {
    reject_advanced(problem)?;
    check_history(problem, init)?;
    let start = init.start();
    let t0 = problem.theta.theta(start)?;
    if !(t_end > t0) {
        return Err(Error::invalid(format!("t_end = {t_end} must exceed the starting node {t0}")));
    }
    let mut nodes = vec![t0];
    let mut node_values = vec![init.values.last().unwrap().clone()];
    let mut intervals = Vec::new();
    let lookup = |i: i64, computed: &[DVector<f64>]| -> DVector<f64> {
        if i >= start {
            computed[(i - start) as usize].clone()
        } else {
            init.get(i).expect("history checked").clone()
        }
    };
    let mut i = start;
    loop {
        let a = nodes[nodes.len() - 1];
        let next = problem.theta.theta(i + 1)?;
        let b = next.min(t_end);
        let frozen: Vec<DVector<f64>> = problem.deviations.iter().map(|&p| lookup(i - p, &node_values)).collect();
        let x0 = node_values.last().unwrap().clone();
        let ts = uniform_samples(a, b, opts.samples_per_interval);
        let values = interval_solution(problem, &frozen, &x0, &ts, &opts.ode)?;
        let end = values.last().unwrap().clone();
        intervals.push(IntervalSamples { ts, values });
        if next <= t_end {
            nodes.push(next);
            node_values.push(end);
        }
        if next >= t_end {
            break;
        }
        i += 1;
    }
    let grid = GridSolution::new(start, nodes, node_values, intervals, [t0, t_end])?;
    Ok(Trajectory { history: init.clone(), grid })
}

/// States at `ts` (starting at `ts[0]` from `x0`) with the node arguments frozen.
fn interval_solution(problem: &EPCAGProblem, frozen: &[DVector<f64>], x0: &DVector<f64>, ts: &[f64], ode: &OdeOptions) -> Result<Vec<DVector<f64>>> {
    let f = &problem.nonlinearity;
    if let Nonlinearity::ProductLogistic { scale, rate } = f {
        if x0[0] > 0.0 {
            // N' = N (a(t) + scale·h) is linear in log N, which keeps N positive
            let args: Vec<f64> = frozen.iter().map(|z| z[0]).collect();
            let growth = scale * rate.eval(&args);
            let a = problem.system.coefficient();
            let ln0 = x0[0].ln();
            return Ok(ts
                .iter()
                .map(|&t| DVector::from_element(1, (ln0 + a.integral(ts[0], t)[(0, 0)] + growth * (t - ts[0])).exp()))
                .collect());
        }
    }
    let rhs = |t: f64, y: &DVector<f64>| problem.system.a_at(t) * y + f.eval(t, y, frozen);
    let mut out = vec![x0.clone()];
    out.extend(integrate(rhs, ts[0], x0, &ts[1..], ode)?);
    Ok(out)
}

const NODE_MAP_PANELS: usize = 8;

/// `x(θ_{i+1}) = X(θ_{i+1}, θ_i) x(θ_i) + ∫ X(θ_{i+1}, s) f(s, frozen) ds` with
/// `i` the last node of `history`.
pub fn node_map(problem: &EPCAGProblem, history: &InitialData) -> Result<DVector<f64>> {
    reject_advanced(problem)?;
    check_history(problem, history)?;
    if problem.nonlinearity.reads_current_state() {
        return Err(Error::invalid("the node map needs a nonlinearity of the node arguments only"));
    }
    let i = history.start();
    let (a, b) = (problem.theta.theta(i)?, problem.theta.theta(i + 1)?);
    let frozen: Vec<DVector<f64>> = problem.deviations.iter().map(|&p| history.get(i - p).unwrap().clone()).collect();
    let rule = GaussLegendre::new(8);
    let points = composite_gauss_points(&rule, a, b, NODE_MAP_PANELS);
    let mut outputs: Vec<f64> = points.iter().map(|(s, _)| *s).collect();
    outputs.push(b);
    // X(b, s) = X(b, a) X(s, a)⁻¹
    let fwd = problem.system.transitions(a, &outputs)?;
    let step = &fwd[points.len()];
    let zero = DVector::zeros(problem.dim());
    let mut x = step * history.values.last().unwrap();
    for ((s, w), m) in points.iter().zip(&fwd) {
        x += step * inverse(m)? * problem.nonlinearity.eval(*s, &zero, &frozen) * *w;
    }
    Ok(x)
}

/// Node values `x(θ_start) … x(θ_{start+count})` by repeated node maps.
pub fn iterate_nodes(problem: &EPCAGProblem, init: &InitialData, count: usize) -> Result<Vec<DVector<f64>>> {
    let mut hist = init.clone();
    let mut out = vec![hist.values.last().unwrap().clone()];
    for _ in 0..count {
        let next = node_map(problem, &hist)?;
        hist.values.push(next.clone());
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Sampled sup of `‖X(t, s)‖` over `0 ≤ t − s ≤ θ̄`.
    pub m_bound: f64,
    pub theta_bar: f64,
    pub lipschitz: f64,
    pub arity: usize,
    /// `M·θ̄·m·l`
    pub product: f64,
    pub passed: bool,
}

const UNIQUENESS_SAMPLES: usize = 64;

/// `M θ̄ m l < 1`, with `θ̄` the largest gap over the node window and `M`
/// sampled over forward transitions no longer than `θ̄`.
pub fn uniqueness_check(problem: &EPCAGProblem, window: IndexWindow) -> Result<UniquenessReport> {
    let lipschitz = problem.lipschitz()?;
    let theta_bar = problem.theta.gap_stats(window, 1.0)?.max_gap;
    let lags: Vec<f64> = (0..=UNIQUENESS_SAMPLES).map(|j| theta_bar * j as f64 / UNIQUENESS_SAMPLES as f64).collect();
    let starts: Vec<f64> = if problem.system.is_constant() {
        vec![0.0]
    } else {
        let values = problem.theta.window_values(window)?;
        values.windows(2).flat_map(|w| [w[0], 0.5 * (w[0] + w[1])]).collect()
    };
    let m_bound = starts
        .par_iter()
        .map(|&s| {
            let outs: Vec<f64> = lags.iter().map(|d| s + d).collect();
            problem.system.transitions(s, &outs).map(|ms| ms.iter().map(op_norm).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let arity = problem.arity();
    let product = m_bound * theta_bar * arity as f64 * lipschitz;
    Ok(UniquenessReport { m_bound, theta_bar, lipschitz, arity, product, passed: product < 1.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    /// `‖X(t,s)‖ ≤ K e^{−σ(t−s)}` for `t ≥ s` with `K ≥ 1`: `P = I`.
    pub c6: bool,
    /// `l < σ/(mK)`
    pub c7: bool,
    /// `ζ > 0`
    pub c8: bool,
    /// `M θ̄ m l < 1`
    pub c9: bool,
}

impl ConditionFlags {
    pub fn first_failure(&self) -> Option<&'static str> {
        [(self.c6, "C6"), (self.c7, "C7"), (self.c8, "C8"), (self.c9, "C9")].into_iter().find(|(ok, _)| !ok).map(|(_, n)| n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    /// `max_j ‖φ^j − ξ(θ_{−p_j})‖`
    pub initial_offset: f64,
    /// Largest `‖x(t,φ) − ξ(t)‖ / (L e^{−a t})` over the samples.
    pub worst_ratio: f64,
    pub worst_time: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k: f64,
    pub sigma: f64,
    pub a: f64,
    pub tau: f64,
    pub zeta: f64,
    /// `L = K δ / ζ`
    pub envelope: f64,
    pub delta: f64,
    pub lipschitz: f64,
    pub arity: usize,
    /// `σ/(mK)`
    pub c7_limit: f64,
    pub conditions: ConditionFlags,
    pub uniqueness: UniquenessReport,
    pub trials: Vec<TrialOutcome>,
    pub all_within: bool,
}

/// `τ`, `ζ = 1 − e^{aτ} K l m/(σ − a)` and `L = Kδ/ζ` for the one-sided
/// envelope `K e^{−σ(t−s)}`, with the stability conditions evaluated on the
/// node window.
pub fn stability_constants(problem: &EPCAGProblem, bound: ExpBound, a: f64, delta: f64, window: IndexWindow) -> Result<StabilityReport> {
    reject_advanced(problem)?;
    if !(a > 0.0 && a < bound.sigma) {
        return Err(Error::invalid(format!("decay rate a = {a} must lie in (0, {})", bound.sigma)));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta must be non-negative"));
    }
    let l = problem.lipschitz()?;
    let m = problem.arity();
    let tau = problem.theta.tau_deviation(&problem.deviations, window)?;
    let (k, sigma) = (bound.k, bound.sigma);
    let zeta = 1.0 - (a * tau).exp() * k * l * m as f64 / (sigma - a);
    let envelope = if zeta > 0.0 { k * delta / zeta } else { f64::INFINITY };
    let c7_limit = sigma / (m as f64 * k);
    let uniqueness = uniqueness_check(problem, window)?;
    let conditions = ConditionFlags {
        c6: problem.dichotomy.rank() == problem.dim() && k >= 1.0,
        c7: l < c7_limit,
        c8: zeta > 0.0,
        c9: uniqueness.passed,
    };
    Ok(StabilityReport {
        k,
        sigma,
        a,
        tau,
        zeta,
        envelope,
        delta,
        lipschitz: l,
        arity: m,
        c7_limit,
        conditions,
        uniqueness,
        trials: Vec::new(),
        all_within: true,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub seed: u64,
    pub t_end: f64,
    /// Absolute allowance for integration error in the envelope comparison.
    pub slack: f64,
    pub ivp: IvpOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { trials: 32, seed: 0, t_end: 20.0, slack: 1e-9, ivp: IvpOptions::default() }
    }
}

/// Uniform draw from the open ball of radius `r`.
fn ball_sample<R: Rng>(rng: &mut R, n: usize, r: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() < 1.0 {
            return v * r;
        }
    }
}

/// Perturb the history of `xi` within `δ`, simulate forward from `θ_0` and
/// check `‖x(t,φ) − ξ(t)‖ ≤ L e^{−a(t−θ_0)}` on every sample up to `t_end`.
pub fn stability_experiment(
    problem: &EPCAGProblem,
    xi: &GridSolution,
    constants: StabilityReport,
    config: &ExperimentConfig,
) -> Result<StabilityReport> {
    let c = &constants.conditions;
    for (ok, name) in [(c.c6, "C6"), (c.c7, "C7"), (c.c8, "C8")] {
        if !ok {
            return Err(Error::ConditionFailed { condition: name, detail: "the perturbation experiment needs C6-C8".into() });
        }
    }
    let depth = problem.max_delay();
    let base = InitialData::from_solution(xi, 0, depth)?;
    let t0 = problem.theta.theta(0)?;
    let [lo, hi] = xi.core;
    if lo > problem.theta.theta(-depth)? || hi < config.t_end {
        return Err(Error::InsufficientWindow(format!("reference solution core {:?} does not cover the experiment", xi.core)));
    }
    let mut report = constants;
    if report.delta == 0.0 {
        // the unperturbed solution is ξ itself
        report.trials.clear();
        report.all_within = true;
        return Ok(report);
    }
    let (envelope, a, delta, n) = (report.envelope, report.a, report.delta, problem.dim());
    let trials: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(trial as u64));
            let offsets: Vec<DVector<f64>> = base.values.iter().map(|_| ball_sample(&mut rng, n, delta)).collect();
            let initial_offset = offsets.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let init = InitialData::new(base.first, base.values.iter().zip(&offsets).map(|(v, d)| v + d).collect())?;
            let traj = solve_ivp(problem, &init, config.t_end, &config.ivp)?;
            let (mut worst_ratio, mut worst_time, mut within) = (0.0f64, t0, true);
            for (_, t, v) in traj.grid.samples() {
                let bound = envelope * (-a * (t - t0)).exp();
                let diff = (v - xi.eval(t)).norm();
                if diff > bound + config.slack {
                    within = false;
                }
                let ratio = diff / bound;
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst_time = t;
                }
            }
            Ok(TrialOutcome { trial, initial_offset, worst_ratio, worst_time, within })
        })
        .collect::<Result<_>>()?;
    report.all_within = trials.iter().all(|t| t.within);
    report.trials = trials;
    Ok(report)
}
