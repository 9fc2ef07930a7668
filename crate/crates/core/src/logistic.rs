//! The scalar logistic equation `N' = N (a(t) − h(N(θ_{β(t)−p_1}), …))`:
//! mean value and kernel bounds of `a`, the box constant `μ`, the existence
//! conditions, the backward fixed-point operator and forward simulation.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::apkit::{Shape, TrigPolynomial};
use crate::error::{Error, Result};
use crate::grid::GridSolution;
use crate::ivpsim::{solve_ivp, InitialData, IvpOptions, Trajectory};
use crate::lindich::{bounded_solution, CauchyCache, DichotomyData, ExpBound, LinearSystem, DEFAULT_SAMPLES_PER_INTERVAL};
use crate::ode::OdeOptions;
use crate::problem::{EPCAGProblem, Nonlinearity};
use crate::quadrature::{composite_gauss, GaussLegendre};
use crate::timescale::{IndexWindow, ThetaSequence};

/// Per-capita loss `h(z_1, …, z_m)` evaluated at the deviated nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogisticRate {
    /// `Σ c_j z_j`
    Linear { coeffs: Vec<f64> },
    /// `c · z_1 ⋯ z_m`
    Product { coeff: f64, arity: usize },
    /// `Σ c_j tanh(z_j)`
    Saturated { coeffs: Vec<f64> },
}

impl LogisticRate {
    pub fn validate(&self) -> Result<()> {
        let finite = match self {
            LogisticRate::Linear { coeffs } | LogisticRate::Saturated { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            LogisticRate::Product { coeff, .. } => coeff.is_finite(),
        };
        if !finite {
            return Err(Error::invalid("non-finite logistic coefficient"));
        }
        if self.arity() == 0 {
            return Err(Error::invalid("logistic rate needs at least one argument"));
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        match self {
            LogisticRate::Linear { coeffs } | LogisticRate::Saturated { coeffs } => coeffs.len(),
            LogisticRate::Product { arity, .. } => *arity,
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            LogisticRate::Linear { coeffs } => coeffs.iter().zip(z).map(|(c, z)| c * z).sum(),
            LogisticRate::Saturated { coeffs } => coeffs.iter().zip(z).map(|(c, z)| c * z.tanh()).sum(),
            LogisticRate::Product { coeff, .. } => coeff * z.iter().product::<f64>(),
        }
    }

    /// Lipschitz constant on `[0, H]^m` in the max norm.
    pub fn lipschitz_on(&self, h_box: f64) -> f64 {
        match self {
            LogisticRate::Linear { coeffs } | LogisticRate::Saturated { coeffs } => coeffs.iter().map(|c| c.abs()).sum(),
            LogisticRate::Product { coeff, arity } => coeff.abs() * *arity as f64 * h_box.powi(*arity as i32 - 1),
        }
    }
}

const GRID_BUDGET: f64 = 1e6;

/// `μ = sup z_0 h(z_1, …, z_m)` over `[0, H]^{m+1}`: the corner value for the
/// linear rate, a grid search including the corners otherwise.
pub fn mu_sup(rate: &LogisticRate, h_box: f64) -> Result<f64> {
    if !(h_box > 0.0) {
        return Err(Error::invalid("box size H must be positive"));
    }
    let best = match rate {
        LogisticRate::Linear { coeffs } => coeffs.iter().map(|c| c.max(0.0) * h_box).sum(),
        _ => {
            let m = rate.arity();
            let per_axis = (GRID_BUDGET.powf(1.0 / m as f64).floor() as usize).max(2);
            let axis: Vec<f64> = (0..per_axis).map(|k| h_box * k as f64 / (per_axis - 1) as f64).collect();
            let mut idx = vec![0usize; m];
            let mut z = vec![0.0; m];
            let mut best = f64::NEG_INFINITY;
            loop {
                for (zi, &k) in z.iter_mut().zip(&idx) {
                    *zi = axis[k];
                }
                best = best.max(rate.eval(&z));
                let Some(d) = idx.iter().position(|&k| k + 1 < per_axis) else { break };
                idx[d] += 1;
                idx[..d].iter_mut().for_each(|k| *k = 0);
            }
            best
        }
    };
    Ok(h_box * best.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanValue {
    pub value: f64,
    /// Bound on `|value − M(a)|`; zero in exact mode.
    pub error_estimate: f64,
}

/// `M(a)`: the constant term when `half_window` is `None`, otherwise the
/// average over `[−T, T]` with the bound `Σ |amplitude_k| / (ω_k T)`.
pub fn mean_value(a: &TrigPolynomial, half_window: Option<f64>) -> Result<MeanValue> {
    if a.shape() != Shape::Scalar {
        return Err(Error::Dimension("mean value needs a scalar trigonometric polynomial".into()));
    }
    let Some(t) = half_window else {
        return Ok(MeanValue { value: a.mean()[(0, 0)], error_estimate: 0.0 });
    };
    if !(t > 0.0) {
        return Err(Error::invalid("averaging window must be positive"));
    }
    let rule = GaussLegendre::new(8);
    let panels = ((2.0 * t * (1.0 + a.max_frequency())).ceil() as usize).max(16);
    let value = composite_gauss(&rule, -t, t, panels, |s| a.eval_scalar(s)) / (2.0 * t);
    let error_estimate = a.terms().iter().map(|term| term.cos[(0, 0)].hypot(term.sin[(0, 0)]) / (term.omega * t)).sum();
    Ok(MeanValue { value, error_estimate })
}

/// Lower bound `c_0 − Σ |amplitude_k|` of a scalar trigonometric polynomial.
fn lower_bound(a: &TrigPolynomial) -> f64 {
    a.constant_term()[(0, 0)] - a.terms().iter().map(|t| t.cos[(0, 0)].hypot(t.sin[(0, 0)])).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFit {
    /// Pairs `t ≤ s` are sampled with `t ∈ [−span, span]` and `s − t ≤ horizon`.
    pub span: f64,
    pub horizon: f64,
    pub step: f64,
}

impl Default for KernelFit {
    fn default() -> Self {
        KernelFit { span: 50.0, horizon: 50.0, step: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBounds {
    pub k: f64,
    pub sigma: f64,
    /// Whether the bound was fitted on samples rather than read off `inf a`.
    pub fitted: bool,
}

impl KernelBounds {
    pub fn bound(&self) -> ExpBound {
        ExpBound { k: self.k, sigma: self.sigma }
    }
}

/// `(K, σ)` with `exp(−∫_t^s a) ≤ K e^{−σ(s−t)}` for `t ≤ s`.
///
/// With `a ≥ a_min > 0` this is `(1, a_min)`. Otherwise `σ` ranges over
/// fractions of `M(a)`, `K` is the sampled sup inflated by the largest change
/// the exponent can make between grid points, and the pair with the smallest
/// `K/σ` is kept.
pub fn kernel_bounds(a: &TrigPolynomial, fit: &KernelFit) -> Result<KernelBounds> {
    let mean = mean_value(a, None)?.value;
    if mean <= 0.0 {
        return Err(Error::NoEnvelope(format!("mean value {mean} of a is not positive")));
    }
    let a_min = lower_bound(a);
    if a_min > 0.0 {
        return Ok(KernelBounds { k: 1.0, sigma: a_min, fitted: false });
    }
    let n = (2.0 * fit.span / fit.step).round() as usize;
    let ts: Vec<f64> = (0..=n).map(|k| -fit.span + k as f64 * fit.step).collect();
    let prim: Vec<f64> = ts.iter().map(|&t| a.integral_scalar(0.0, t)).collect();
    let lag = (fit.horizon / fit.step).round() as usize;
    let amplitude = mean - a_min;
    let mut best: Option<KernelBounds> = None;
    for frac in [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95] {
        let sigma = frac * mean;
        let mut sup: f64 = 0.0;
        for i in 0..ts.len() {
            for j in i..(i + lag).min(ts.len() - 1) + 1 {
                sup = sup.max(-(prim[j] - prim[i]) + sigma * (ts[j] - ts[i]));
            }
        }
        let slack = fit.step * ((mean - sigma).abs() + amplitude);
        let k = (sup + slack).exp();
        if best.is_none_or(|b| k / sigma < b.k / b.sigma) {
            best = Some(KernelBounds { k, sigma, fitted: true });
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// The scalar logistic equation with its box `[0, H]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticProblem {
    pub a: TrigPolynomial,
    pub rate: LogisticRate,
    pub deviations: Vec<i64>,
    pub h_box: f64,
    pub theta: ThetaSequence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub mean: f64,
    pub k: f64,
    pub sigma: f64,
    pub mu: f64,
    pub lipschitz: f64,
    pub h_box: f64,
    /// `Kμ/σ`, required `≤ H`
    pub invariance: f64,
    pub invariance_ok: bool,
    /// `(K/σ)(lH + μ)`, required `< 1`
    pub contraction: f64,
    pub contraction_ok: bool,
}

impl ExistenceReport {
    pub fn evaluate(mean: f64, bounds: KernelBounds, mu: f64, lipschitz: f64, h_box: f64) -> Self {
        let (k, sigma) = (bounds.k, bounds.sigma);
        let invariance = k * mu / sigma;
        let contraction = k / sigma * (lipschitz * h_box + mu);
        ExistenceReport {
            mean,
            k,
            sigma,
            mu,
            lipschitz,
            h_box,
            invariance,
            invariance_ok: invariance <= h_box,
            contraction,
            contraction_ok: contraction < 1.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.invariance_ok && self.contraction_ok
    }
}

impl LogisticProblem {
    pub fn new(a: TrigPolynomial, rate: LogisticRate, deviations: Vec<i64>, h_box: f64, theta: ThetaSequence) -> Result<Self> {
        if a.shape() != Shape::Scalar {
            return Err(Error::Dimension("the growth rate a(t) must be scalar".into()));
        }
        rate.validate()?;
        if deviations.len() != rate.arity() {
            return Err(Error::Dimension(format!("{} deviations for a rate of {} arguments", deviations.len(), rate.arity())));
        }
        if let Some(&p) = deviations.iter().find(|&&p| p < 0) {
            return Err(Error::NegativeDeviation(p));
        }
        if !(h_box > 0.0 && h_box.is_finite()) {
            return Err(Error::invalid("box size H must be positive"));
        }
        if rate.eval(&vec![0.0; rate.arity()]) != 0.0 {
            return Err(Error::invalid("the rate must vanish at the origin"));
        }
        let p = LogisticProblem { a, rate, deviations, h_box, theta };
        if p.rate_min_on_box() < 0.0 {
            return Err(Error::invalid("the rate must be non-negative on the box [0, H]^m"));
        }
        Ok(p)
    }

    /// Sampled minimum of `h` over `[0, H]^m`.
    fn rate_min_on_box(&self) -> f64 {
        let neg = match &self.rate {
            LogisticRate::Linear { coeffs } => LogisticRate::Linear { coeffs: coeffs.iter().map(|c| -c).collect() },
            LogisticRate::Saturated { coeffs } => LogisticRate::Saturated { coeffs: coeffs.iter().map(|c| -c).collect() },
            LogisticRate::Product { coeff, arity } => LogisticRate::Product { coeff: -coeff, arity: *arity },
        };
        -mu_sup(&neg, self.h_box).unwrap_or(0.0) / self.h_box
    }

    pub fn lipschitz(&self) -> f64 {
        self.rate.lipschitz_on(self.h_box)
    }

    pub fn existence_conditions(&self, fit: &KernelFit) -> Result<ExistenceReport> {
        let kb = kernel_bounds(&self.a, fit)?;
        let mu = mu_sup(&self.rate, self.h_box)?;
        Ok(ExistenceReport::evaluate(mean_value(&self.a, None)?.value, kb, mu, self.lipschitz(), self.h_box))
    }

    fn linear_system(&self) -> Result<LinearSystem> {
        let a = TrigPolynomial::new(Shape::Matrix(1), self.a.constant_term().clone(), self.a.terms().to_vec())?;
        LinearSystem::new(a, OdeOptions::default())
    }

    /// The same equation as a general problem: `A = a(t)`, `f = −N·h`, `P = 0`.
    pub fn to_epcag(&self, bounds: KernelBounds) -> Result<EPCAGProblem> {
        let dichotomy = DichotomyData::from_override(DMatrix::zeros(1, 1), None, Some(bounds.bound()))?;
        EPCAGProblem::new(
            self.linear_system()?,
            Nonlinearity::ProductLogistic { scale: -1.0, rate: self.rate.clone() },
            self.deviations.clone(),
            self.theta.clone(),
            dichotomy,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub core: [f64; 2],
    pub tol: f64,
    pub max_iterations: usize,
    pub samples_per_interval: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { core: [0.0, 20.0], tol: 1e-10, max_iterations: 200, samples_per_interval: DEFAULT_SAMPLES_PER_INTERVAL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRun {
    /// Constant initial iterate.
    pub start: f64,
    pub iterations: usize,
    pub updates: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup_norm: f64,
    pub zero_solution: bool,
    /// Every iterate is pointwise below its predecessor on the core.
    pub non_increasing: bool,
    /// `‖Π(ψ*) − ψ*‖` on the core.
    pub fixed_point_defect: f64,
    pub tail_bound: f64,
    pub converged: bool,
}

/// The backward operator `Πψ(t) = ∫_t^∞ exp(−∫_t^s a) ψ(s) h(ψ(θ_{β(s)−p_j})) ds`
/// on a truncated window, as the bounded solution of `x' = a(t)x − ψ h` with
/// `P = 0`.
pub struct LogisticOperator<'a> {
    problem: &'a LogisticProblem,
    cache: CauchyCache,
    core: [f64; 2],
    samples: usize,
    tail_bound: f64,
}

impl<'a> LogisticOperator<'a> {
    pub fn new(problem: &'a LogisticProblem, bounds: KernelBounds, mu: f64, config: &LogisticConfig) -> Result<Self> {
        let [lo, hi] = config.core;
        if !(lo < hi) || !(config.tol > 0.0) {
            return Err(Error::invalid("logistic solve needs a non-empty core and a positive tol"));
        }
        let bound = bounds.bound();
        let cut = if mu * bound.tail(0.0) <= config.tol / 10.0 {
            0.0
        } else {
            (bound.k * mu / (bound.sigma * config.tol / 10.0)).ln() / bound.sigma
        };
        let reach = problem.deviations.iter().copied().max().unwrap_or(0) + 1;
        let window = IndexWindow::new(problem.theta.beta(lo)? - reach, problem.theta.beta(hi + cut)? + 1);
        let nodes = problem.theta.window_values(window)?;
        let cache = CauchyCache::build(&problem.linear_system()?, &DMatrix::zeros(1, 1), window.lo, nodes, config.samples_per_interval)?;
        debug!("logistic window {window:?}, cut {cut}");
        Ok(LogisticOperator { problem, cache, core: config.core, samples: config.samples_per_interval, tail_bound: mu * bound.tail(cut) })
    }

    pub fn constant(&self, value: f64) -> GridSolution {
        GridSolution::constant(self.cache.first_node, &self.cache.nodes, self.samples, self.core, DVector::from_element(1, value))
            .expect("valid grid")
    }

    pub fn apply(&self, psi: &GridSolution) -> Result<GridSolution> {
        let rate = &self.problem.rate;
        let loss: Vec<f64> = (0..self.cache.interval_count())
            .map(|k| {
                let i = self.cache.first_node + k as i64;
                let z: Vec<f64> = self.problem.deviations.iter().map(|&p| psi.node_value_clamped(i - p)[0]).collect();
                rate.eval(&z)
            })
            .collect();
        bounded_solution(&self.cache, |k, s| DVector::from_element(1, -psi.eval(s)[0] * loss[k]), self.core)
    }

    fn clamp(&self, mut psi: GridSolution) -> GridSolution {
        let h = self.problem.h_box;
        for v in psi.node_values.iter_mut().chain(psi.intervals.iter_mut().flat_map(|i| i.values.iter_mut())) {
            v[0] = v[0].clamp(0.0, h);
        }
        psi
    }
}

/// Picard iteration of the backward operator from `ψ_0 ≡ start`, iterates
/// clamped into `[0, H]`.
pub fn logistic_fixed_point(problem: &LogisticProblem, config: &LogisticConfig, start: f64, fit: &KernelFit) -> Result<(GridSolution, FixedPointRun)> {
    let report = problem.existence_conditions(fit)?;
    if !report.passed() {
        let detail = format!("Kμ/σ = {:.6} (≤ H = {}), (K/σ)(lH+μ) = {:.6} (< 1)", report.invariance, problem.h_box, report.contraction);
        return Err(Error::ConditionFailed { condition: "logistic existence", detail });
    }
    let bounds = KernelBounds { k: report.k, sigma: report.sigma, fitted: false };
    let op = LogisticOperator::new(problem, bounds, report.mu, config)?;
    let core = config.core;
    let mut psi = op.clamp(op.constant(start));
    let (mut updates, mut ratios): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut non_increasing = true;
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let next = op.clamp(op.apply(&psi)?);
        let update = next.distance_on(&psi, core);
        if next.samples().filter(|(_, t, _)| *t >= core[0] && *t <= core[1]).any(|(_, t, v)| v[0] > psi.eval(t)[0] + 1e-12) {
            non_increasing = false;
        }
        if let Some(&prev) = updates.last() {
            ratios.push(if prev > 0.0 { update / prev } else { 0.0 });
        }
        if updates.len() > 5 && update > 1e3 * updates[0].max(config.tol) {
            return Err(Error::NonContractive { margin: report.contraction, detail: format!("updates grew to {update:.3e}") });
        }
        updates.push(update);
        psi = next;
        if update < config.tol {
            converged = true;
            break;
        }
    }
    let last = *updates.last().unwrap_or(&0.0);
    if !converged {
        return Err(Error::IterationCap { cap: config.max_iterations, last_update: last });
    }
    let fixed_point_defect = op.clamp(op.apply(&psi)?).distance_on(&psi, core);
    let sup_norm = psi.sup_norm_on(core);
    let run = FixedPointRun {
        start,
        iterations: updates.len(),
        updates,
        ratios,
        sup_norm,
        zero_solution: sup_norm < 10.0 * config.tol,
        non_increasing,
        fixed_point_defect,
        tail_bound: op.tail_bound,
        converged,
    };
    Ok((psi, run))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticReport {
    pub existence: ExistenceReport,
    pub from_zero: FixedPointRun,
    pub from_box: FixedPointRun,
    /// `sup |ψ_0* − ψ_H*|` on the core.
    pub start_disagreement: f64,
}

/// Both starts `ψ_0 ≡ 0` and `ψ_0 ≡ H`, compared.
pub fn logistic_analysis(problem: &LogisticProblem, config: &LogisticConfig, fit: &KernelFit) -> Result<(GridSolution, LogisticReport)> {
    let existence = problem.existence_conditions(fit)?;
    let (zero, from_zero) = logistic_fixed_point(problem, config, 0.0, fit)?;
    let (top, from_box) = logistic_fixed_point(problem, config, problem.h_box, fit)?;
    let start_disagreement = top.distance_on(&zero, config.core);
    Ok((top, LogisticReport { existence, from_zero, from_box, start_disagreement }))
}

/// Forward simulation from the constant history `N ≡ n0` on the delayed nodes.
pub fn simulate_logistic(problem: &LogisticProblem, n0: f64, t_end: f64, opts: &IvpOptions) -> Result<Trajectory> {
    if !(n0 > 0.0) {
        return Err(Error::invalid("initial population must be positive"));
    }
    let depth = problem.deviations.iter().copied().max().unwrap_or(0);
    let bounds = kernel_bounds(&problem.a, &KernelFit::default()).unwrap_or(KernelBounds { k: 1.0, sigma: 1.0, fitted: false });
    let general = problem.to_epcag(bounds)?;
    solve_ivp(&general, &InitialData::constant(0, depth, DVector::from_element(1, n0)), t_end, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn three_plus_sin() -> TrigPolynomial {
        TrigPolynomial::scalar(3.0, &[(1.0, 0.0, 1.0)]).unwrap()
    }

    fn example() -> LogisticProblem {
        LogisticProblem::new(three_plus_sin(), LogisticRate::Linear { coeffs: vec![0.05] }, vec![0], 1.0, ThetaSequence::unit()).unwrap()
    }

    #[test]
    fn mean_values() {
        assert_eq!(mean_value(&three_plus_sin(), None).unwrap().value, 3.0);
        let q = TrigPolynomial::scalar(2.0, &[(1.0, 1.0, 0.0), (SQRT_2, 1.0, 0.0)]).unwrap();
        assert_eq!(mean_value(&q, None).unwrap().value, 2.0);
        for a in [three_plus_sin(), q] {
            let exact = mean_value(&a, None).unwrap().value;
            let num = mean_value(&a, Some(1000.0)).unwrap();
            assert!((num.value - exact).abs() <= num.error_estimate + 1e-12);
            assert!((num.value - exact).abs() < 0.01);
        }
    }

    #[test]
    fn kernel_bound_cases() {
        let kb = kernel_bounds(&three_plus_sin(), &KernelFit::default()).unwrap();
        assert_eq!((kb.k, kb.sigma, kb.fitted), (1.0, 2.0, false));
        let kb = kernel_bounds(&TrigPolynomial::constant_scalar(0.7), &KernelFit::default()).unwrap();
        assert_eq!((kb.k, kb.sigma), (1.0, 0.7));
        let a = TrigPolynomial::scalar(0.5, &[(1.0, 1.0, 0.0)]).unwrap();
        let kb = kernel_bounds(&a, &KernelFit::default()).unwrap();
        assert!(kb.fitted && kb.k > 1.0 && kb.sigma < 0.5);
        assert!(matches!(kernel_bounds(&TrigPolynomial::scalar(-0.1, &[(1.0, 1.0, 0.0)]).unwrap(), &KernelFit::default()), Err(Error::NoEnvelope(_))));
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu_sup(&LogisticRate::Linear { coeffs: vec![0.05] }, 1.0).unwrap(), 0.05);
        assert!((mu_sup(&LogisticRate::Product { coeff: 0.1, arity: 2 }, 1.0).unwrap() - 0.1).abs() < 1e-15);
        let mu = mu_sup(&LogisticRate::Saturated { coeffs: vec![0.2] }, 2.0).unwrap();
        assert!((mu - 0.4 * 2.0f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn existence_example() {
        let r = example().existence_conditions(&KernelFit::default()).unwrap();
        assert_eq!((r.k, r.sigma, r.mu), (1.0, 2.0, 0.05));
        assert!((r.invariance - 0.025).abs() < 1e-15 && (r.contraction - 0.05).abs() < 1e-15 && r.passed());
        let kb = KernelBounds { k: 1.0, sigma: 2.0, fitted: false };
        assert!(ExistenceReport::evaluate(3.0, kb, 0.0, 0.0, 1.0).passed());
        let shrunk = ExistenceReport::evaluate(3.0, kb, 0.05, 0.05, 1e-3);
        assert!(!shrunk.invariance_ok);
    }

    #[test]
    fn operator_sign_matches_direct_quadrature() {
        let p = example();
        let cfg = LogisticConfig { core: [0.0, 6.0], ..Default::default() };
        let op = LogisticOperator::new(&p, KernelBounds { k: 1.0, sigma: 2.0, fitted: false }, 0.05, &cfg).unwrap();
        let c = 0.8;
        let image = op.apply(&op.constant(c)).unwrap();
        let rule = GaussLegendre::new(10);
        let a = three_plus_sin();
        for t in [0.5, 2.25, 4.0] {
            let direct = composite_gauss(&rule, t, t + 30.0, 120, |s| (-a.integral_scalar(t, s)).exp() * c * 0.05 * c);
            assert!((image.eval_scalar(t) - direct).abs() < 1e-9, "{t}: {} vs {direct}", image.eval_scalar(t));
        }
    }

    #[test]
    fn fixed_point_runs() {
        let p = example();
        let cfg = LogisticConfig { core: [0.0, 10.0], ..Default::default() };
        let (_, zero) = logistic_fixed_point(&p, &cfg, 0.0, &KernelFit::default()).unwrap();
        assert!(zero.zero_solution && zero.iterations == 1);
        let (_, top) = logistic_fixed_point(&p, &cfg, 1.0, &KernelFit::default()).unwrap();
        assert!(top.converged && top.non_increasing && top.zero_solution);
        assert!(top.ratios.iter().all(|&r| r <= 0.07), "{:?}", top.ratios);
    }

    #[test]
    fn forward_simulation() {
        let seifert = LogisticProblem::new(TrigPolynomial::constant_scalar(1.0), LogisticRate::Linear { coeffs: vec![1.0] }, vec![0], 2.0, ThetaSequence::unit()).unwrap();
        let t = simulate_logistic(&seifert, 1.0, 5.0, &IvpOptions::default()).unwrap();
        assert!(t.grid.samples().all(|(_, _, v)| (v[0] - 1.0).abs() < 1e-14));
        let t = simulate_logistic(&seifert, 0.5, 3.0, &IvpOptions::default()).unwrap();
        assert!((t.node_value(1).unwrap()[0] - 0.5 * 0.5f64.exp()).abs() < 1e-12);
        let t = simulate_logistic(&seifert, 3.0, 30.0, &IvpOptions::default()).unwrap();
        assert!(t.grid.samples().all(|(_, _, v)| v[0] > 0.0));
    }
}
