//! The integral operator `Π` on a truncated window and Picard iteration to
//! the bounded (almost-periodic) solution.

use log::{debug, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::apkit::TranslationScan;
use crate::error::{Error, Result};
use crate::grid::GridSolution;
use crate::lindich::{bounded_solution, CauchyCache, DEFAULT_SAMPLES_PER_INTERVAL};
use crate::problem::EPCAGProblem;
use crate::quadrature::{first_derivative_weights, stencil_around};
use crate::timescale::{AlmostPeriodReport, IndexWindow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Region on which accuracy is claimed.
    pub core: [f64; 2],
    pub tol: f64,
    /// Truncation distance; chosen from the tail bound when absent.
    pub t_cut: Option<f64>,
    pub max_iterations: usize,
    pub samples_per_interval: usize,
    /// Proceed even when the contraction margin is at least one.
    pub explore: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            core: [0.0, 20.0],
            tol: 1e-8,
            t_cut: None,
            max_iterations: 500,
            samples_per_interval: DEFAULT_SAMPLES_PER_INTERVAL,
            explore: false,
        }
    }
}

/// `f(t, ψ(θ_{β(t)−p_1}), …)` reading node values of `ψ`.
pub fn f_theta_eval(problem: &EPCAGProblem, psi: &GridSolution, t: f64) -> Result<DVector<f64>> {
    let i = problem.theta.beta(t)?;
    let nodes = problem
        .deviations
        .iter()
        .map(|&p| psi.node_value(i - p).cloned())
        .collect::<Result<Vec<_>>>()?;
    Ok(problem.nonlinearity.eval(t, &psi.eval(t), &nodes))
}

/// `Π` frozen on a node window around the core.
#[derive(Debug)]
pub struct PiOperator<'a> {
    problem: &'a EPCAGProblem,
    cache: CauchyCache,
    core: [f64; 2],
    t_cut: f64,
    samples: usize,
}

impl<'a> PiOperator<'a> {
    /// Window: the core enlarged on both sides by `T_cut + (max|p_j| + 1)·θ̄`.
    pub fn new(problem: &'a EPCAGProblem, config: &SolverConfig) -> Result<Self> {
        if problem.nonlinearity.reads_current_state() {
            return Err(Error::invalid("the integral operator needs a nonlinearity of the node arguments only"));
        }
        let [lo, hi] = config.core;
        if !(lo < hi) {
            return Err(Error::invalid(format!("empty core window {:?}", config.core)));
        }
        if !(config.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        let t_cut = match config.t_cut {
            Some(t) if t >= 0.0 => t,
            Some(t) => return Err(Error::invalid(format!("t_cut must be non-negative, got {t}"))),
            None => default_cut(problem, config.core, config.tol)?,
        };
        let window = node_window(problem, config.core, t_cut)?;
        let nodes = problem.theta.window_values(window).map_err(|e| match e {
            Error::WindowExhausted { .. } => Error::TruncationBudget(format!(
                "switching sequence does not cover the enlarged window {window:?} needed for t_cut = {t_cut}: {e}"
            )),
            other => other,
        })?;
        debug!("operator window: nodes {window:?}, t_cut = {t_cut}");
        let cache = CauchyCache::build(&problem.system, &problem.dichotomy.projection, window.lo, nodes, config.samples_per_interval)?;
        Ok(PiOperator { problem, cache, core: config.core, t_cut, samples: config.samples_per_interval })
    }

    pub fn t_cut(&self) -> f64 {
        self.t_cut
    }

    pub fn core(&self) -> [f64; 2] {
        self.core
    }

    pub fn window(&self) -> [f64; 2] {
        [self.cache.nodes[0], *self.cache.nodes.last().unwrap()]
    }

    pub fn node_window(&self) -> IndexWindow {
        IndexWindow::new(self.cache.first_node, self.cache.first_node + self.cache.nodes.len() as i64 - 1)
    }

    pub fn cache(&self) -> &CauchyCache {
        &self.cache
    }

    /// A function sampled on the operator's grid.
    pub fn sample(&self, f: impl Fn(f64) -> DVector<f64>) -> Result<GridSolution> {
        GridSolution::from_fn(self.cache.first_node, &self.cache.nodes, self.samples, self.core, f)
    }

    pub fn zero(&self) -> GridSolution {
        let n = self.problem.dim();
        self.sample(|_| DVector::zeros(n)).expect("zero function on a valid grid")
    }

    fn check_grid(&self, psi: &GridSolution) -> Result<()> {
        if psi.first_node != self.cache.first_node || psi.nodes.len() != self.cache.nodes.len() || psi.dim != self.problem.dim() {
            return Err(Error::Dimension("candidate is not sampled on the operator's grid".into()));
        }
        Ok(())
    }

    /// Node arguments of `f` on every interval, clamped at the window edges.
    fn frozen_nodes(&self, psi: &GridSolution) -> Vec<Vec<DVector<f64>>> {
        (0..self.cache.interval_count())
            .map(|k| {
                let i = self.cache.first_node + k as i64;
                self.problem.deviations.iter().map(|&p| psi.node_value_clamped(i - p).clone()).collect()
            })
            .collect()
    }

    /// `sup ‖F_θ(ψ)‖` over the quadrature points.
    pub fn forcing_sup(&self, psi: &GridSolution) -> Result<f64> {
        self.check_grid(psi)?;
        let frozen = self.frozen_nodes(psi);
        let zero = DVector::zeros(self.problem.dim());
        let mut sup: f64 = 0.0;
        for (k, kernel) in self.cache.kernels.iter().enumerate() {
            let start = self.cache.nodes[k];
            for (o, _, _) in kernel.quadrature.iter().flatten() {
                sup = sup.max(self.problem.nonlinearity.eval(start + o, &zero, &frozen[k]).norm());
            }
        }
        Ok(sup)
    }

    /// `‖F_θ(ψ)‖ · (K1 e^{−σ1 T}/σ1 + K2 e^{−σ2 T}/σ2)`.
    pub fn tail_bound(&self, psi: &GridSolution) -> Result<f64> {
        Ok(self.forcing_sup(psi)? * self.problem.dichotomy.tail(self.t_cut))
    }

    /// `Π(ψ)(t) = ∫ G(t,s) F_θ(ψ)(s) ds` over the window.
    pub fn apply(&self, psi: &GridSolution) -> Result<GridSolution> {
        self.check_grid(psi)?;
        let frozen = self.frozen_nodes(psi);
        let zero = DVector::zeros(self.problem.dim());
        let f = &self.problem.nonlinearity;
        bounded_solution(&self.cache, |k, s| f.eval(s, &zero, &frozen[k]), self.core)
    }
}

/// Node index window covering the core plus the enlargement.
fn node_window(problem: &EPCAGProblem, core: [f64; 2], t_cut: f64) -> Result<IndexWindow> {
    let reach = problem.max_abs_deviation() + 1;
    let core_window = IndexWindow::new(problem.theta.beta(core[0])?, problem.theta.beta(core[1])? + 1);
    let mut gap = problem.theta.gap_stats(core_window, 1.0)?.max_gap;
    let mut window = core_window;
    for _ in 0..8 {
        let delta = t_cut + reach as f64 * gap;
        let next = IndexWindow::new(
            problem.theta.beta(core[0] - delta).map_err(budget)?,
            problem.theta.beta(core[1] + delta).map_err(budget)? + 1,
        );
        let next_gap = problem.theta.gap_stats(next, 1.0).map_err(budget)?.max_gap;
        let settled = next == window && next_gap <= gap;
        window = next;
        gap = gap.max(next_gap);
        if settled {
            break;
        }
    }
    Ok(window)
}

fn budget(e: Error) -> Error {
    match e {
        Error::OutsideWindow { .. } | Error::WindowExhausted { .. } => {
            Error::TruncationBudget(format!("switching sequence too short for the enlarged window: {e}"))
        }
        other => other,
    }
}

/// Rates tried for the boundary-error estimate, as fractions of the slowest
/// dichotomy rate.
const BOUNDARY_RATES: usize = 40;

/// Default truncation distance.
///
/// The missing tail `‖F‖·(K1 e^{−σ1 T}/σ1 + K2 e^{−σ2 T}/σ2)` is the error
/// made at the window edge; it reaches the core through the node arguments,
/// so it decays only at a rate `γ < σ` for which the operator still contracts
/// in the weight `e^{γ|t − edge|}`:
/// `q_γ = l·m·e^{γ(max|p|+1)θ̄}·(K1/(σ1−γ) + K2/(σ2−γ)) < 1`.
/// The cut is the smallest over `γ` with
/// `‖F‖·W_γ·e^{−γT}/(1 − q_γ) < tol/10`, where `‖F‖ ≤ ‖f(·,0)‖/(1 − margin)`.
fn default_cut(problem: &EPCAGProblem, core: [f64; 2], tol: f64) -> Result<f64> {
    let margin = problem.contraction_margin()?;
    let g = problem.nonlinearity.forcing_sup();
    let forcing = if margin < 1.0 { g / (1.0 - margin) } else { g * 10.0 };
    let budget = tol / 10.0;
    let base = problem.dichotomy.cut_for(forcing, budget);
    if forcing == 0.0 || margin >= 1.0 {
        return Ok(base);
    }
    let window = IndexWindow::new(problem.theta.beta(core[0])?, problem.theta.beta(core[1])? + 1);
    let gap = problem.theta.gap_stats(window, 1.0)?.max_gap;
    let spread = (problem.max_abs_deviation() + 1) as f64 * gap;
    let lm = problem.lipschitz()? * problem.arity() as f64;
    let rate = problem.dichotomy.min_rate();
    let part = |b: Option<crate::lindich::ExpBound>, gamma: f64| b.map_or(0.0, |b| b.k / (b.sigma - gamma));
    let mut best = f64::INFINITY;
    for j in 1..BOUNDARY_RATES {
        let gamma = rate * j as f64 / BOUNDARY_RATES as f64;
        let weight = part(problem.dichotomy.stable, gamma) + part(problem.dichotomy.unstable, gamma);
        let q = lm * (gamma * spread).exp() * weight;
        if q >= 1.0 {
            break;
        }
        let cut = ((forcing * weight / ((1.0 - q) * budget)).ln() / gamma).max(0.0);
        best = best.min(cut);
    }
    Ok(if best.is_finite() { best.max(base) } else { base })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub theoretical_margin: f64,
    /// `update_k / update_{k−1}` for each iteration after the first.
    pub ratios: Vec<f64>,
    /// Sup distance between consecutive iterates over the truncated window.
    pub updates: Vec<f64>,
    pub final_update: f64,
    /// `‖Π(ψ*) − ψ*‖` on the core.
    pub fixed_point_defect: f64,
    pub residual: f64,
    pub tail_bound: f64,
    pub t_cut: f64,
    pub window: [f64; 2],
    pub core: [f64; 2],
    pub converged: bool,
}

impl SolveReport {
    /// Largest ratio from iteration `from` on (1-based), ignoring updates
    /// already at rounding level.
    pub fn max_ratio_after(&self, from: usize, floor: f64) -> Option<f64> {
        self.ratios
            .iter()
            .enumerate()
            .filter(|(k, _)| k + 2 > from && self.updates[*k] > floor)
            .map(|(_, r)| *r)
            .reduce(f64::max)
    }
}

/// Picard iteration `ψ_{k+1} = Π(ψ_k)` from `ψ_0 ≡ 0`.
pub fn picard_solve(problem: &EPCAGProblem, config: &SolverConfig) -> Result<(GridSolution, SolveReport)> {
    let margin = problem.contraction_margin()?;
    if margin >= 1.0 {
        if !config.explore {
            return Err(Error::NonContractive {
                margin,
                detail: "l·m·(K1/σ1 + K2/σ2) ≥ 1; rerun in explore mode to iterate anyway".into(),
            });
        }
        warn!("contraction margin {margin} ≥ 1, iterating in explore mode");
    }
    let op = PiOperator::new(problem, config)?;
    let core = config.core;
    // Π contracts in the sup norm over the whole truncated window; the core
    // alone can see ratios above the margin through delayed nodes.
    let window = op.window();
    let mut psi = op.zero();
    let mut updates: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let next = op.apply(&psi)?;
        let update = next.distance_on(&psi, window).max(node_distance(&next, &psi, window));
        if !update.is_finite() {
            return Err(Error::NonContractive { margin, detail: "iterates became non-finite".into() });
        }
        if let Some(&prev) = updates.last() {
            ratios.push(if prev > 0.0 { update / prev } else { 0.0 });
        }
        updates.push(update);
        psi = next;
        if update < config.tol {
            converged = true;
            break;
        }
        if config.explore && diverging(&updates) {
            return Err(Error::NonContractive { margin, detail: format!("updates grew to {update:.3e}") });
        }
    }
    let final_update = *updates.last().unwrap_or(&0.0);
    if !converged {
        return Err(Error::IterationCap { cap: config.max_iterations, last_update: final_update });
    }
    let fixed_point_defect = op.apply(&psi)?.distance_on(&psi, core);
    let report = SolveReport {
        iterations: updates.len(),
        theoretical_margin: margin,
        ratios,
        updates,
        final_update,
        fixed_point_defect,
        residual: residual(problem, &psi)?,
        tail_bound: op.tail_bound(&psi)?,
        t_cut: op.t_cut(),
        window: op.window(),
        core,
        converged,
    };
    Ok((psi, report))
}

fn diverging(updates: &[f64]) -> bool {
    let first = updates[0].max(1e-300);
    let last = *updates.last().unwrap();
    last > 1e8 * first.max(1.0) || (updates.len() > 10 && updates[updates.len() - 10..].windows(2).all(|w| w[1] > w[0]))
}

fn node_distance(a: &GridSolution, b: &GridSolution, core: [f64; 2]) -> f64 {
    a.nodes
        .iter()
        .zip(a.node_values.iter().zip(&b.node_values))
        .filter(|(t, _)| **t >= core[0] && **t <= core[1])
        .map(|(_, (x, y))| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Width of the one-sided derivative stencils.
const DERIVATIVE_STENCIL: usize = 7;

/// `max ‖ψ'(t) − A(t)ψ(t) − F_θ(ψ)(t)‖` over the dense samples in the core,
/// differentiating within each interval only.
pub fn residual(problem: &EPCAGProblem, psi: &GridSolution) -> Result<f64> {
    let core = psi.core;
    let mut worst: f64 = 0.0;
    for (k, piece) in psi.intervals.iter().enumerate() {
        let ts = &piece.ts;
        if ts.len() < 3 || *ts.last().unwrap() < core[0] || ts[0] > core[1] {
            continue;
        }
        let index = psi.first_node + k as i64;
        let nodes: Vec<DVector<f64>> = problem
            .deviations
            .iter()
            .map(|&p| psi.node_value(index - p).cloned())
            .collect::<Result<_>>()?;
        let width = DERIVATIVE_STENCIL.min(ts.len());
        for (j, &t) in ts.iter().enumerate() {
            if t < core[0] || t > core[1] {
                continue;
            }
            let range = stencil_around(j, ts.len(), width);
            let w = first_derivative_weights(t, &ts[range.clone()]);
            let mut deriv = DVector::zeros(psi.dim);
            for (w, v) in w.iter().zip(&piece.values[range]) {
                deriv.axpy(*w, v, 1.0);
            }
            let x = &piece.values[j];
            let rhs = problem.system.a_at(t) * x + problem.nonlinearity.eval(t, x, &nodes);
            worst = worst.max((deriv - rhs).norm());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApEntry {
    pub tau: f64,
    pub deviation: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApDiagnostic {
    pub epsilon: f64,
    /// `C` in the check `sup ‖ψ(t+τ) − ψ(t)‖ ≤ C·ε`.
    pub bound_constant: f64,
    pub entries: Vec<ApEntry>,
    pub all_within: bool,
}

/// Shifts `τ` that are simultaneously ε-translation numbers of `A`, of the
/// forcing `f(·, 0)`, and of the switching sequence (some `q` with
/// `|θ_{i+q} − θ_i − τ| < ε` on `seq_window`).
pub fn input_translation_numbers(
    problem: &EPCAGProblem,
    epsilon: f64,
    scan: &TranslationScan,
    seq_window: IndexWindow,
) -> Result<AlmostPeriodReport> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let a = problem.system.coefficient();
    let g = problem.nonlinearity.forcing().cloned();
    let values = problem.theta.window_values(seq_window)?;
    let mean_gap = (values.last().unwrap() - values[0]) / (values.len() - 1).max(1) as f64;
    let samples: Vec<f64> = {
        let n = ((scan.verify[1] - scan.verify[0]) / scan.sample_step).floor() as usize;
        (0..=n).map(|k| scan.verify[0] + k as f64 * scan.sample_step).collect()
    };
    let sequence_ok = |tau: f64| {
        let q0 = (tau / mean_gap).round() as i64;
        (q0 - 2..=q0 + 2).filter(|&q| q >= 0).any(|q| {
            (seq_window.lo..=seq_window.hi).all(|i| match (problem.theta.theta(i + q), problem.theta.theta(i)) {
                (Ok(shifted), Ok(base)) => (shifted - base - tau).abs() < epsilon,
                _ => false,
            })
        })
    };
    let function_ok = |tau: f64| {
        samples.iter().all(|&t| {
            let da = (a.eval(t + tau) - a.eval(t)).norm();
            let dg = g.as_ref().map_or(0.0, |g| (g.eval(t + tau) - g.eval(t)).norm());
            da + dg < epsilon
        })
    };
    let periods = scan.taus().into_iter().filter(|&tau| sequence_ok(tau) && function_ok(tau)).collect();
    Ok(AlmostPeriodReport::new(epsilon, periods, scan.search, scan.verify))
}

/// For each shift, `sup ‖ψ(t+τ) − ψ(t)‖` over core samples with `t+τ` in the
/// core, flagged when it exceeds `C·ε` with
/// `C = W·(1 + l·m·max(‖ψ‖, 1))/(1 − margin) + 1`, `W = K1/σ1 + K2/σ2`.
pub fn ap_diagnostic(problem: &EPCAGProblem, psi: &GridSolution, taus: &[f64], epsilon: f64) -> Result<ApDiagnostic> {
    let margin = problem.contraction_margin()?;
    if margin >= 1.0 {
        return Err(Error::NonContractive { margin, detail: "no almost-periodicity bound without contraction".into() });
    }
    let l = problem.lipschitz()?;
    let scale = psi.sup_norm_on(psi.core).max(1.0);
    let weight = problem.dichotomy.kernel_weight();
    let bound_constant = weight * (1.0 + l * problem.arity() as f64 * scale) / (1.0 - margin) + 1.0;
    let core = psi.core;
    let entries: Vec<ApEntry> = taus
        .iter()
        .map(|&tau| {
            let deviation = psi
                .samples()
                .filter(|(_, t, _)| *t >= core[0] && *t <= core[1] && t + tau >= core[0] && t + tau <= core[1])
                .map(|(_, t, v)| (psi.eval(t + tau) - v).norm())
                .fold(0.0, f64::max);
            ApEntry { tau, deviation, flagged: deviation > bound_constant * epsilon }
        })
        .collect();
    let all_within = entries.iter().all(|e| !e.flagged);
    Ok(ApDiagnostic { epsilon, bound_constant, entries, all_within })
}
