//! Linear part `x' = A(t)x`: transition matrices, exponential dichotomy data,
//! the Green's function and the bounded solution of the forced system.

use std::collections::HashMap;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apkit::{Shape, TrigPolynomial};
use crate::error::{Error, Result};
use crate::grid::{uniform_samples, GridSolution, IntervalSamples};
use crate::linalg::{
    column_basis, condition_number, identity, inverse, is_idempotent, is_normal, matrix_sign, oblique_projection,
    op_norm, orthonormalize, projection_rank,
};
use crate::ode::{integrate, OdeOptions};
use crate::quadrature::GaussLegendre;

/// Safety margin taken off spectral gaps for non-normal matrices.
pub const DEFAULT_MARGIN: f64 = 0.02;
pub const DEFAULT_SAMPLES_PER_INTERVAL: usize = 32;
const GAUSS_ORDER: usize = 4;
const CONDITION_WARNING: f64 = 1e8;

/// `x' = A(t)x` with a trigonometric-polynomial coefficient matrix.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    a: TrigPolynomial,
    opts: OdeOptions,
}

impl LinearSystem {
    pub fn new(a: TrigPolynomial, opts: OdeOptions) -> Result<Self> {
        if !matches!(a.shape(), Shape::Matrix(_)) {
            return Err(Error::Dimension("the linear part needs a square matrix coefficient".into()));
        }
        if !(opts.rtol > 0.0) {
            return Err(Error::invalid("rtol must be positive"));
        }
        Ok(LinearSystem { a, opts })
    }

    pub fn constant(a: DMatrix<f64>) -> Result<Self> {
        Self::new(TrigPolynomial::constant_matrix(a)?, OdeOptions::default())
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn coefficient(&self) -> &TrigPolynomial {
        &self.a
    }

    pub fn options(&self) -> &OdeOptions {
        &self.opts
    }

    pub fn is_constant(&self) -> bool {
        self.a.is_constant()
    }

    pub fn a_at(&self, t: f64) -> DMatrix<f64> {
        self.a.eval(t)
    }

    /// `X(t_j, s)` for every `t_j` in `outputs`, which must be monotone away from `s`.
    pub fn transitions(&self, s: f64, outputs: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let n = self.dim();
        if self.is_constant() {
            let a = self.a.mean();
            return Ok(outputs.iter().map(|&t| (&a * (t - s)).exp()).collect());
        }
        let rhs = |t: f64, y: &DVector<f64>| {
            let x = DMatrix::from_column_slice(n, n, y.as_slice());
            let d = self.a.eval(t) * x;
            DVector::from_column_slice(d.as_slice())
        };
        let y0 = DVector::from_column_slice(identity(n).as_slice());
        let states = integrate(rhs, s, &y0, outputs, &self.opts)?;
        Ok(states.into_iter().map(|y| DMatrix::from_column_slice(n, n, y.as_slice())).collect())
    }

    /// Cauchy matrix `X(t, s)`.
    pub fn transition(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        Ok(self.transitions(s, &[t])?.pop().expect("one output"))
    }

    /// Fundamental matrix normalised by `X(0) = I`.
    pub fn fundamental(&self, t: f64) -> Result<DMatrix<f64>> {
        self.transition(t, 0.0)
    }

    /// `X(t)PX(t)⁻¹`, with a warning when `X(t)` is badly conditioned.
    pub fn projection_at(&self, projection: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        if self.commutes_with(projection) {
            return Ok(projection.clone());
        }
        let x = self.fundamental(t)?;
        let cond = condition_number(&x);
        if cond > CONDITION_WARNING {
            warn!("fundamental matrix at t = {t} has condition number {cond:.3e}");
        }
        Ok(&x * projection * inverse(&x)?)
    }

    fn commutes_with(&self, p: &DMatrix<f64>) -> bool {
        if !self.is_constant() {
            return false;
        }
        let a = self.a.mean();
        (&a * p - p * &a).norm() <= 1e-12 * (1.0 + a.norm()) * (1.0 + p.norm())
    }
}

/// Exponential envelope `K·exp(−σ·Δt)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpBound {
    pub k: f64,
    pub sigma: f64,
}

impl ExpBound {
    pub fn new(k: f64, sigma: f64) -> Result<Self> {
        if !(k > 0.0 && sigma > 0.0 && k.is_finite() && sigma.is_finite()) {
            return Err(Error::invalid(format!("envelope needs positive finite K and sigma, got ({k}, {sigma})")));
        }
        Ok(ExpBound { k, sigma })
    }

    pub fn weight(&self) -> f64 {
        self.k / self.sigma
    }

    pub fn at(&self, dt: f64) -> f64 {
        self.k * (-self.sigma * dt).exp()
    }

    /// `∫_T^∞ K e^{−σs} ds`.
    pub fn tail(&self, cut: f64) -> f64 {
        self.k * (-self.sigma * cut).exp() / self.sigma
    }
}

/// Where a set of dichotomy constants came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DichotomySource {
    Spectral { horizon: f64, samples: usize },
    Estimated { span: [f64; 2], step: f64, horizon: f64 },
    Override,
}

/// Projection and envelope constants of an exponential dichotomy.
#[derive(Clone, Debug, PartialEq)]
pub struct DichotomyData {
    pub projection: DMatrix<f64>,
    /// `(K1, σ1)`; absent when the stable part is trivial.
    pub stable: Option<ExpBound>,
    /// `(K2, σ2)`; absent when the unstable part is trivial.
    pub unstable: Option<ExpBound>,
    /// Envelope of the full Cauchy matrix, available when `P = I`.
    pub one_sided: Option<ExpBound>,
    pub margin: f64,
    pub source: DichotomySource,
}

impl DichotomyData {
    /// User-supplied constants, validated for shape and idempotence only.
    pub fn from_override(projection: DMatrix<f64>, stable: Option<ExpBound>, unstable: Option<ExpBound>) -> Result<Self> {
        if !is_idempotent(&projection, 1e-10) {
            return Err(Error::invalid("dichotomy projection is not idempotent"));
        }
        let n = projection.nrows();
        let rank = projection_rank(&projection);
        if rank > 0 && stable.is_none() {
            return Err(Error::invalid("K1 and sigma1 are required when P is non-zero"));
        }
        if rank < n && unstable.is_none() {
            return Err(Error::invalid("K2 and sigma2 are required when P is not the identity"));
        }
        let stable = if rank > 0 { stable } else { None };
        let unstable = if rank < n { unstable } else { None };
        let one_sided = if rank == n { stable } else { None };
        Ok(DichotomyData { projection, stable, unstable, one_sided, margin: 0.0, source: DichotomySource::Override })
    }

    pub fn dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn rank(&self) -> usize {
        projection_rank(&self.projection)
    }

    /// `K1/σ1 + K2/σ2`, the sup-norm weight of the Green's function.
    pub fn kernel_weight(&self) -> f64 {
        self.stable.map_or(0.0, |b| b.weight()) + self.unstable.map_or(0.0, |b| b.weight())
    }

    /// `K1 e^{−σ1 T}/σ1 + K2 e^{−σ2 T}/σ2`.
    pub fn tail(&self, cut: f64) -> f64 {
        self.stable.map_or(0.0, |b| b.tail(cut)) + self.unstable.map_or(0.0, |b| b.tail(cut))
    }

    /// Smallest cut `T ≥ 0` whose tail bound for a forcing of size `forcing_sup` is at most `budget`.
    pub fn cut_for(&self, forcing_sup: f64, budget: f64) -> f64 {
        if forcing_sup * self.tail(0.0) <= budget {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while forcing_sup * self.tail(hi) > budget {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if forcing_sup * self.tail(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Slowest decay rate in either direction.
    pub fn min_rate(&self) -> f64 {
        let s = self.stable.map_or(f64::INFINITY, |b| b.sigma);
        let u = self.unstable.map_or(f64::INFINITY, |b| b.sigma);
        s.min(u)
    }
}

/// `l·m·(K1/σ1 + K2/σ2)`.
pub fn contraction_margin(dich: &DichotomyData, lipschitz: f64, deviations: usize) -> f64 {
    lipschitz * deviations as f64 * dich.kernel_weight()
}

/// Green's function `G(t, s)` of the linear system.
pub fn green(sys: &LinearSystem, dich: &DichotomyData, t: f64, s: f64) -> Result<DMatrix<f64>> {
    let ps = sys.projection_at(&dich.projection, s)?;
    let phi = sys.transition(t, s)?;
    if t >= s {
        Ok(phi * ps)
    } else {
        Ok(phi * (ps - identity(sys.dim())))
    }
}

/// Dichotomy of a constant matrix from its spectral splitting, with the
/// default margin (none for normal matrices).
pub fn spectral_dichotomy(a: &DMatrix<f64>) -> Result<DichotomyData> {
    let margin = if is_normal(a) { 0.0 } else { DEFAULT_MARGIN };
    spectral_dichotomy_with(a, margin, 2000)
}

pub fn spectral_dichotomy_with(a: &DMatrix<f64>, margin: f64, samples: usize) -> Result<DichotomyData> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::Dimension("spectral dichotomy needs a non-empty square matrix".into()));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::invalid(format!("margin must lie in [0, 1), got {margin}")));
    }
    let n = a.nrows();
    let scale = op_norm(a).max(1.0);
    let eig = a.complex_eigenvalues();
    if let Some(z) = eig.iter().find(|z| z.re.abs() <= 1e-10 * scale) {
        return Err(Error::ImaginaryAxisEigenvalue { re: z.re, im: z.im });
    }
    let stable_gap = eig.iter().filter(|z| z.re < 0.0).map(|z| -z.re).fold(f64::INFINITY, f64::min);
    let unstable_gap = eig.iter().filter(|z| z.re > 0.0).map(|z| z.re).fold(f64::INFINITY, f64::min);
    let stable_count = eig.iter().filter(|z| z.re < 0.0).count();

    let projection = if stable_count == n {
        identity(n)
    } else if stable_count == 0 {
        DMatrix::zeros(n, n)
    } else {
        (identity(n) - matrix_sign(a)?) * 0.5
    };
    let normal = is_normal(a);
    let horizon_for = |gap: f64| if margin > 0.0 { 10.0 / (margin * gap) } else { 10.0 / gap };

    let envelope = |gen: &DMatrix<f64>, proj: &DMatrix<f64>, gap: f64| -> Result<Option<ExpBound>> {
        if !gap.is_finite() {
            return Ok(None);
        }
        let sigma = gap * (1.0 - margin);
        if normal {
            return ExpBound::new(1.0, sigma).map(Some);
        }
        let dt = horizon_for(gap) / samples as f64;
        let step = (gen * dt).exp();
        let mut m = proj.clone();
        let mut log_scale = 0.0;
        let mut k = op_norm(&m);
        for j in 1..=samples {
            // re-projecting keeps rounding out of the complementary, growing directions
            m = proj * (&step * m);
            let norm = op_norm(&m);
            if norm == 0.0 {
                break;
            }
            log_scale += norm.ln();
            m /= norm;
            k = k.max((log_scale + sigma * j as f64 * dt).exp());
        }
        ExpBound::new(k, sigma).map(Some)
    };
    let stable = envelope(a, &projection, stable_gap)?;
    let unstable = envelope(&(-a), &(identity(n) - &projection), unstable_gap)?;
    let one_sided = if stable_count == n { stable } else { None };
    Ok(DichotomyData {
        projection,
        stable,
        unstable,
        one_sided,
        margin,
        source: DichotomySource::Spectral { horizon: horizon_for(stable_gap.min(unstable_gap)), samples },
    })
}

/// Sampling grid for [`estimate_dichotomy`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationGrid {
    pub span: [f64; 2],
    pub step: f64,
    /// Longest lag `t − s` examined.
    pub horizon: f64,
    pub margin: f64,
    /// Decay rates below this are treated as no decay.
    pub min_rate: f64,
}

impl Default for EstimationGrid {
    fn default() -> Self {
        EstimationGrid { span: [-50.0, 50.0], step: 0.05, horizon: 20.0, margin: DEFAULT_MARGIN, min_rate: 1e-3 }
    }
}

/// Fit dichotomy constants for a candidate projection on a sample grid.
///
/// Decay rates are read off the slope of `ln‖·‖` between half and full
/// horizon, which discounts polynomial transients of non-normal matrices;
/// `K` is then the sampled supremum of the scaled norms.
pub fn estimate_dichotomy(sys: &LinearSystem, candidate: &DMatrix<f64>, grid: &EstimationGrid) -> Result<DichotomyData> {
    let n = sys.dim();
    if candidate.shape() != (n, n) || !is_idempotent(candidate, 1e-10) {
        return Err(Error::invalid("candidate projection must be an idempotent matrix of the system's size"));
    }
    if !(grid.step > 0.0 && grid.horizon >= 2.0 * grid.step && grid.span[1] > grid.span[0]) {
        return Err(Error::invalid("estimation grid needs positive step, horizon of at least two steps, and a non-empty span"));
    }
    let lag = (grid.horizon / grid.step).round() as usize;
    let points = ((grid.span[1] - grid.span[0]) / grid.step).round() as usize + 1;
    if points <= lag {
        return Err(Error::InsufficientWindow(format!("span {:?} is shorter than the horizon {}", grid.span, grid.horizon)));
    }
    let ts: Vec<f64> = (0..points).map(|i| grid.span[0] + i as f64 * grid.step).collect();
    let steps: Vec<DMatrix<f64>> = ts.par_windows(2).map(|w| sys.transition(w[1], w[0])).collect::<Result<_>>()?;
    let steps_inv: Vec<DMatrix<f64>> = steps.iter().map(inverse).collect::<Result<_>>()?;
    let rank = projection_rank(candidate);
    let projections = node_projections(sys, candidate, &steps, &steps_inv)?;

    let fit = |forward: bool, proj_of: &(dyn Fn(usize) -> DMatrix<f64> + Sync)| -> Result<ExpBound> {
        // norms[i][l] = ‖X(t_{i±l}, t_i) P_i‖
        let starts: Vec<usize> = if forward { (0..points - lag).collect() } else { (lag..points).collect() };
        let norms: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&i| {
                let mut m = proj_of(i);
                let mut row = Vec::with_capacity(lag + 1);
                row.push(op_norm(&m));
                for l in 1..=lag {
                    m = if forward { &steps[i + l - 1] * m } else { &steps_inv[i - l] * m };
                    row.push(op_norm(&m));
                }
                row
            })
            .collect();
        let half = lag / 2;
        let span = (lag - half) as f64 * grid.step;
        let rate = norms
            .iter()
            .map(|row| -(row[lag].max(f64::MIN_POSITIVE).ln() - row[half].max(f64::MIN_POSITIVE).ln()) / span)
            .fold(f64::INFINITY, f64::min);
        if !(rate > grid.min_rate) {
            return Err(Error::NoEnvelope(format!(
                "{} part shows decay rate {rate:.3e} on the grid",
                if forward { "stable" } else { "unstable" }
            )));
        }
        let sigma = rate * (1.0 - grid.margin);
        let k = norms
            .iter()
            .flat_map(|row| row.iter().enumerate().map(|(l, v)| v * (sigma * l as f64 * grid.step).exp()))
            .fold(0.0, f64::max);
        ExpBound::new(k, sigma)
    };
    let stable = if rank > 0 { Some(fit(true, &|i| projections[i].clone())?) } else { None };
    let unstable = if rank < n { Some(fit(false, &|i| identity(n) - &projections[i])?) } else { None };
    Ok(DichotomyData {
        projection: candidate.clone(),
        stable,
        unstable,
        one_sided: if rank == n { stable } else { None },
        margin: grid.margin,
        source: DichotomySource::Estimated { span: grid.span, step: grid.step, horizon: grid.horizon },
    })
}

/// Projections `X(t_k)PX(t_k)⁻¹` at a chain of nodes given the node-to-node
/// transitions. Constant systems commuting with `P` keep `P`; otherwise the
/// stable subspace is carried backward from the right end and the unstable
/// one forward from the left, which is the numerically attracting direction
/// for each.
fn node_projections(sys: &LinearSystem, p: &DMatrix<f64>, steps: &[DMatrix<f64>], steps_inv: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    let n = p.nrows();
    let count = steps.len() + 1;
    let rank = projection_rank(p);
    if rank == n {
        return Ok(vec![identity(n); count]);
    }
    if rank == 0 {
        return Ok(vec![DMatrix::zeros(n, n); count]);
    }
    if sys.commutes_with(p) {
        return Ok(vec![p.clone(); count]);
    }
    let mut range = vec![DMatrix::zeros(n, rank); count];
    range[count - 1] = column_basis(p, rank);
    for k in (0..count - 1).rev() {
        range[k] = orthonormalize(&(&steps_inv[k] * &range[k + 1]));
    }
    let mut kernel = vec![DMatrix::zeros(n, n - rank); count];
    kernel[0] = column_basis(&(identity(n) - p), n - rank);
    for k in 0..count - 1 {
        kernel[k + 1] = orthonormalize(&(&steps[k] * &kernel[k]));
    }
    range.iter().zip(&kernel).map(|(r, k)| oblique_projection(r, k)).collect()
}

/// Transition data of one interval `[θ_k, θ_{k+1}]` in offsets from `θ_k`.
#[derive(Debug)]
pub struct IntervalKernel {
    pub length: f64,
    pub offsets: Vec<f64>,
    /// `X(θ_k + offset_j, θ_k)`
    pub forward: Vec<DMatrix<f64>>,
    /// Per sub-panel between consecutive samples: `(offset, weight, X(θ_k, θ_k + offset))`.
    pub quadrature: Vec<Vec<(f64, f64, DMatrix<f64>)>>,
    pub step: DMatrix<f64>,
    pub step_inv: DMatrix<f64>,
}

impl IntervalKernel {
    fn build(sys: &LinearSystem, start: f64, length: f64, samples: usize, rule: &GaussLegendre) -> Result<Self> {
        let offsets = uniform_samples(0.0, length, samples);
        let gauss: Vec<Vec<(f64, f64)>> = offsets.windows(2).map(|w| rule.on(w[0], w[1]).collect()).collect();
        let mut times: Vec<(f64, Option<(usize, usize)>)> = offsets.iter().map(|&o| (o, None)).collect();
        for (p, panel) in gauss.iter().enumerate() {
            times.extend(panel.iter().enumerate().map(|(g, &(o, _))| (o, Some((p, g)))));
        }
        times.sort_by(|a, b| a.0.total_cmp(&b.0));
        let outputs: Vec<f64> = times.iter().map(|(o, _)| start + o).collect();
        let mats = sys.transitions(start, &outputs)?;

        let mut forward = Vec::with_capacity(offsets.len());
        let mut quadrature: Vec<Vec<(f64, f64, DMatrix<f64>)>> = gauss.iter().map(|p| Vec::with_capacity(p.len())).collect();
        for ((_, tag), m) in times.iter().zip(mats) {
            match tag {
                None => forward.push(m),
                Some((p, g)) => {
                    let (o, w) = gauss[*p][*g];
                    quadrature[*p].push((o, w, inverse(&m)?));
                }
            }
        }
        let step = forward.last().expect("at least two samples").clone();
        let step_inv = inverse(&step)?;
        Ok(IntervalKernel { length, offsets, forward, quadrature, step, step_inv })
    }
}

/// Frozen transition data on a chain of switching nodes plus the dichotomy
/// projection at every node.
#[derive(Debug)]
pub struct CauchyCache {
    pub first_node: i64,
    pub nodes: Vec<f64>,
    pub kernels: Vec<Arc<IntervalKernel>>,
    pub projections: Vec<DMatrix<f64>>,
    pub dim: usize,
    pub rtol: f64,
}

impl CauchyCache {
    pub fn build(sys: &LinearSystem, projection: &DMatrix<f64>, first_node: i64, nodes: Vec<f64>, samples: usize) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::EmptyRange("a Cauchy cache needs at least two nodes".into()));
        }
        if projection.shape() != (sys.dim(), sys.dim()) {
            return Err(Error::Dimension("projection size does not match the system".into()));
        }
        let samples = samples.max(2);
        let rule = GaussLegendre::new(GAUSS_ORDER);
        let kernels: Vec<Arc<IntervalKernel>> = if sys.is_constant() {
            // equal interval lengths share their data
            let mut memo: HashMap<u64, Arc<IntervalKernel>> = HashMap::new();
            nodes
                .windows(2)
                .map(|w| {
                    let len = w[1] - w[0];
                    if let Some(k) = memo.get(&len.to_bits()) {
                        return Ok(k.clone());
                    }
                    let k = Arc::new(IntervalKernel::build(sys, 0.0, len, samples, &rule)?);
                    memo.insert(len.to_bits(), k.clone());
                    Ok(k)
                })
                .collect::<Result<_>>()?
        } else {
            nodes
                .par_windows(2)
                .map(|w| IntervalKernel::build(sys, w[0], w[1] - w[0], samples, &rule).map(Arc::new))
                .collect::<Result<_>>()?
        };
        let steps: Vec<DMatrix<f64>> = kernels.iter().map(|k| k.step.clone()).collect();
        let steps_inv: Vec<DMatrix<f64>> = kernels.iter().map(|k| k.step_inv.clone()).collect();
        let projections = node_projections(sys, projection, &steps, &steps_inv)?;
        Ok(CauchyCache { first_node, nodes, kernels, projections, dim: sys.dim(), rtol: sys.options().rtol })
    }

    /// Nodes `t0, t0 + gap, …` covering `[t0, t1]`.
    pub fn uniform(sys: &LinearSystem, projection: &DMatrix<f64>, t0: f64, t1: f64, gap: f64, samples: usize) -> Result<Self> {
        let count = ((t1 - t0) / gap).ceil().max(1.0) as usize;
        let nodes = (0..=count).map(|k| t0 + k as f64 * gap).collect();
        Self::build(sys, projection, 0, nodes, samples)
    }

    pub fn interval_count(&self) -> usize {
        self.kernels.len()
    }

    /// `X(θ_to, θ_from)` assembled from node-to-node factors.
    pub fn node_transition(&self, to: usize, from: usize) -> DMatrix<f64> {
        let mut m = identity(self.dim);
        if to >= from {
            for k in from..to {
                m = &self.kernels[k].step * m;
            }
        } else {
            for k in (to..from).rev() {
                m = &self.kernels[k].step_inv * m;
            }
        }
        m
    }
}

/// Bounded solution of `x' = A(t)x + f(t)` on the cache's node window,
/// with the Green's-function integral truncated to that window.
///
/// `forcing(k, t)` gives `f(t)` for `t` in the closed interval `k`, so that
/// forcings with jumps at the nodes are integrated piece by piece.
pub fn bounded_solution<F>(cache: &CauchyCache, forcing: F, core: [f64; 2]) -> Result<GridSolution>
where
    F: Fn(usize, f64) -> DVector<f64> + Sync,
{
    let n = cache.dim;
    let count = cache.kernels.len();
    // cumulative[k][j] = ∫_{θ_k}^{θ_k + offset_j} X(θ_k, s) f(s) ds
    let cumulative: Vec<Vec<DVector<f64>>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let start = cache.nodes[k];
            let kernel = &cache.kernels[k];
            let mut acc = DVector::zeros(n);
            let mut out = Vec::with_capacity(kernel.offsets.len());
            out.push(acc.clone());
            for panel in &kernel.quadrature {
                for (o, w, back) in panel {
                    acc += back * forcing(k, start + o) * *w;
                }
                out.push(acc.clone());
            }
            out
        })
        .collect();
    for c in cumulative.iter().flatten() {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("forcing produced non-finite values"));
        }
    }
    let jumps: Vec<DVector<f64>> = (0..count).map(|k| &cache.kernels[k].step * cumulative[k].last().unwrap()).collect();

    let eye = identity(n);
    let mut stable = vec![DVector::zeros(n); count + 1];
    for k in 0..count {
        stable[k + 1] = &cache.projections[k + 1] * (&cache.kernels[k].step * &stable[k] + &jumps[k]);
    }
    let mut unstable = vec![DVector::zeros(n); count + 1];
    for k in (0..count).rev() {
        unstable[k] = (&eye - &cache.projections[k]) * (&cache.kernels[k].step_inv * (&jumps[k] + &unstable[k + 1]));
    }
    let node_values: Vec<DVector<f64>> = stable.iter().zip(&unstable).map(|(s, u)| s - u).collect();

    let intervals = (0..count)
        .map(|k| {
            let kernel = &cache.kernels[k];
            let start = cache.nodes[k];
            let ts: Vec<f64> =
                kernel.offsets.iter().enumerate().map(|(j, o)| if j + 1 == kernel.offsets.len() { cache.nodes[k + 1] } else { start + o }).collect();
            let values = kernel.forward.iter().zip(&cumulative[k]).map(|(e, c)| e * (&node_values[k] + c)).collect();
            IntervalSamples { ts, values }
        })
        .collect();
    GridSolution::new(cache.first_node, cache.nodes.clone(), node_values, intervals, core)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn constant_fundamental_matrices() {
        let rot = LinearSystem::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let x = rot.fundamental(0.7).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.7f64.cos(), 0.7f64.sin(), -0.7f64.sin(), 0.7f64.cos()]);
        assert_relative_eq!(x, expect, epsilon = 1e-13);
        let d = LinearSystem::constant(diag(&[-1.0, -2.0])).unwrap();
        assert_relative_eq!(d.fundamental(1.5).unwrap(), diag(&[(-1.5f64).exp(), (-3.0f64).exp()]), epsilon = 1e-13);
    }

    #[test]
    fn scalar_time_varying_fundamental_matches_exponential_of_integral() {
        let a = TrigPolynomial::new(
            Shape::Matrix(1),
            DMatrix::from_element(1, 1, -0.5),
            vec![crate::apkit::TrigTerm { omega: 1.3, cos: DMatrix::from_element(1, 1, 0.4), sin: DMatrix::from_element(1, 1, 0.2) }],
        )
        .unwrap();
        let sys = LinearSystem::new(a.clone(), OdeOptions::default()).unwrap();
        let rule = GaussLegendre::new(12);
        for t in [-2.0, 0.5, 3.0] {
            let integral = crate::quadrature::composite_gauss(&rule, 0.0, t, 8, |s| a.eval_scalar(s));
            assert_relative_eq!(sys.fundamental(t).unwrap()[(0, 0)], integral.exp(), max_relative = 1e-8);
        }
    }

    #[test]
    fn green_function_scalar_cases() {
        let stable = LinearSystem::constant(diag(&[-1.0])).unwrap();
        let d = spectral_dichotomy(&diag(&[-1.0])).unwrap();
        assert_relative_eq!(green(&stable, &d, 2.0, 0.5).unwrap()[(0, 0)], (-1.5f64).exp(), epsilon = 1e-14);
        assert_eq!(green(&stable, &d, 0.0, 0.5).unwrap()[(0, 0)], 0.0);

        let unstable = LinearSystem::constant(diag(&[1.0])).unwrap();
        let d = spectral_dichotomy(&diag(&[1.0])).unwrap();
        assert_relative_eq!(green(&unstable, &d, 0.0, 0.5).unwrap()[(0, 0)], -(-0.5f64).exp(), epsilon = 1e-14);
        assert_eq!(green(&unstable, &d, 1.0, 0.5).unwrap()[(0, 0)], 0.0);

        let mixed = LinearSystem::constant(diag(&[-1.0, 2.0])).unwrap();
        let d = spectral_dichotomy(&diag(&[-1.0, 2.0])).unwrap();
        let g = green(&mixed, &d, 1.0, 0.0).unwrap();
        assert_relative_eq!(g, diag(&[(-1.0f64).exp(), 0.0]), epsilon = 1e-12);
        let g = green(&mixed, &d, 0.0, 1.0).unwrap();
        assert_relative_eq!(g, diag(&[0.0, -(-2.0f64).exp()]), epsilon = 1e-12);
    }

    #[test]
    fn spectral_dichotomy_examples() {
        let d = spectral_dichotomy(&(-identity(2))).unwrap();
        assert_eq!(d.projection, identity(2));
        assert_eq!(d.stable, Some(ExpBound { k: 1.0, sigma: 1.0 }));
        assert_eq!(d.one_sided, d.stable);

        let d = spectral_dichotomy(&diag(&[-1.0, 2.0])).unwrap();
        assert_relative_eq!(d.projection, diag(&[1.0, 0.0]), epsilon = 1e-12);
        assert_eq!(d.stable, Some(ExpBound { k: 1.0, sigma: 1.0 }));
        assert_eq!(d.unstable, Some(ExpBound { k: 1.0, sigma: 2.0 }));

        let jordan = DMatrix::from_row_slice(2, 2, &[-1.0, 10.0, 0.0, -1.0]);
        let d = spectral_dichotomy(&jordan).unwrap();
        assert_eq!(d.projection, identity(2));
        let b = d.stable.unwrap();
        assert_relative_eq!(b.sigma, 1.0 - DEFAULT_MARGIN, epsilon = 1e-15);
        assert!(b.k > 1.0);
        // the fitted envelope dominates the exact norm on a probe grid
        for j in 0..400 {
            let t = j as f64 * 0.37;
            assert!(op_norm(&(&jordan * t).exp()) <= b.at(t) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn imaginary_axis_is_rejected() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(spectral_dichotomy(&rot), Err(Error::ImaginaryAxisEigenvalue { .. })));
    }

    #[test]
    fn estimated_dichotomy_matches_spectral_for_constant_matrices() {
        for a in [diag(&[-1.0, 2.0]), DMatrix::from_row_slice(2, 2, &[-1.0, 10.0, 0.0, -1.0])] {
            let exact = spectral_dichotomy(&a).unwrap();
            let sys = LinearSystem::constant(a).unwrap();
            let grid = EstimationGrid { span: [0.0, 60.0], step: 0.1, horizon: 40.0, ..Default::default() };
            let est = estimate_dichotomy(&sys, &exact.projection, &grid).unwrap();
            let rel = |x: f64, y: f64| (x - y).abs() / y;
            assert!(rel(est.stable.unwrap().sigma, exact.stable.unwrap().sigma) < 0.05);
            if let (Some(e), Some(x)) = (est.unstable, exact.unstable) {
                assert!(rel(e.sigma, x.sigma) < 0.05);
                assert!(rel(e.k, x.k) < 0.05);
            }
        }
    }

    #[test]
    fn estimated_dichotomy_for_oscillating_scalar_rate() {
        let a = TrigPolynomial::new(
            Shape::Matrix(1),
            DMatrix::from_element(1, 1, -2.0),
            vec![crate::apkit::TrigTerm { omega: 1.0, cos: DMatrix::zeros(1, 1), sin: DMatrix::from_element(1, 1, 0.1) }],
        )
        .unwrap();
        let sys = LinearSystem::new(a, OdeOptions::default()).unwrap();
        let grid = EstimationGrid { span: [-20.0, 20.0], step: 0.1, horizon: 20.0, ..Default::default() };
        let d = estimate_dichotomy(&sys, &identity(1), &grid).unwrap();
        let b = d.stable.unwrap();
        assert!(b.sigma >= 1.9, "{b:?}");
        assert!(b.k <= 0.2f64.exp(), "{b:?}");
    }

    #[test]
    fn zero_eigenvalue_has_no_envelope() {
        let sys = LinearSystem::constant(diag(&[0.0, -1.0])).unwrap();
        let grid = EstimationGrid { span: [0.0, 30.0], step: 0.1, horizon: 10.0, ..Default::default() };
        assert!(matches!(estimate_dichotomy(&sys, &identity(2), &grid), Err(Error::NoEnvelope(_))));
    }

    #[test]
    fn contraction_margin_examples() {
        let one = spectral_dichotomy(&diag(&[-1.0])).unwrap();
        assert_eq!(contraction_margin(&one, 0.5, 1), 0.5);
        assert_eq!(contraction_margin(&one, 0.0, 3), 0.0);
        let mixed = spectral_dichotomy(&diag(&[-1.0, 2.0])).unwrap();
        assert_relative_eq!(contraction_margin(&mixed, 0.2, 2), 0.6, epsilon = 1e-15);
    }

    fn scalar_cache(a: f64, window: [f64; 2]) -> (CauchyCache, DichotomyData) {
        let sys = LinearSystem::constant(diag(&[a])).unwrap();
        let d = spectral_dichotomy(&diag(&[a])).unwrap();
        (CauchyCache::uniform(&sys, &d.projection, window[0], window[1], 1.0, 32).unwrap(), d)
    }

    #[test]
    fn bounded_solution_of_constant_forcing() {
        let one = |_: usize, _: f64| DVector::from_element(1, 1.0);
        let (cache, _) = scalar_cache(-1.0, [-40.0, 40.0]);
        let x = bounded_solution(&cache, one, [-5.0, 5.0]).unwrap();
        assert!((x.eval_scalar(0.3) - 1.0).abs() < 1e-12);
        let (cache, _) = scalar_cache(1.0, [-40.0, 40.0]);
        let x = bounded_solution(&cache, one, [-5.0, 5.0]).unwrap();
        assert!((x.eval_scalar(-2.7) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_solution_of_cosine_forcing() {
        let (cache, d) = scalar_cache(-1.0, [-40.0, 40.0]);
        let x = bounded_solution(&cache, |_, t| DVector::from_element(1, t.cos()), [-5.0, 5.0]).unwrap();
        let err = (0..=200)
            .map(|j| -5.0 + j as f64 * 0.05)
            .map(|t| (x.eval_scalar(t) - 0.5 * (t.cos() + t.sin())).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(x.sup_norm() <= d.kernel_weight() * 1.0 + 1e-9);
    }

    #[test]
    fn bounded_solution_with_mixed_dichotomy() {
        // x' = diag(-1, 2) x + (cos t, sin t); exact bounded solution per component
        let a = diag(&[-1.0, 2.0]);
        let sys = LinearSystem::constant(a.clone()).unwrap();
        let d = spectral_dichotomy(&a).unwrap();
        let cache = CauchyCache::uniform(&sys, &d.projection, -30.0, 30.0, 0.7, 24).unwrap();
        let x = bounded_solution(&cache, |_, t| DVector::from_vec(vec![t.cos(), t.sin()]), [-5.0, 5.0]).unwrap();
        for t in [-4.0, 0.0, 2.2] {
            let v = x.eval(t);
            assert!((v[0] - 0.5 * (t.cos() + t.sin())).abs() < 1e-10);
            // y' = 2y + sin t has bounded solution -(2 sin t + cos t)/5
            assert!((v[1] + (2.0 * t.sin() + t.cos()) / 5.0).abs() < 1e-10);
        }
    }

    #[test]
    fn non_commuting_projection_is_propagated() {
        // constant non-normal matrix with a mixed split, P from the sign function
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, 1.5]);
        let d = spectral_dichotomy(&a).unwrap();
        let sys = LinearSystem::constant(a.clone()).unwrap();
        let forcing = |_: usize, _: f64| DVector::from_vec(vec![1.0, -1.0]);
        let cache = CauchyCache::uniform(&sys, &d.projection, -30.0, 30.0, 1.0, 16).unwrap();
        let x = bounded_solution(&cache, forcing, [-5.0, 5.0]).unwrap();
        // constant forcing: bounded solution is the equilibrium -A⁻¹ b
        let eq = -inverse(&a).unwrap() * DVector::from_vec(vec![1.0, -1.0]);
        assert!((x.eval(0.4) - eq).norm() < 1e-10);
    }

    #[test]
    fn cache_cocycle_and_identity() {
        let a = TrigPolynomial::new(
            Shape::Matrix(2),
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]),
            vec![crate::apkit::TrigTerm { omega: 2.0, cos: identity(2) * 0.3, sin: DMatrix::zeros(2, 2) }],
        )
        .unwrap();
        let sys = LinearSystem::new(a, OdeOptions::default()).unwrap();
        let cache = CauchyCache::uniform(&sys, &identity(2), 0.0, 4.0, 1.0, 8).unwrap();
        let direct = sys.transition(3.0, 1.0).unwrap();
        assert_relative_eq!(cache.node_transition(3, 1), direct, epsilon = 1e-9);
        assert_relative_eq!(cache.node_transition(1, 3) * direct, identity(2), epsilon = 1e-9);
        assert_relative_eq!(cache.node_transition(2, 2), identity(2));
    }

    #[test]
    fn cut_for_meets_the_budget() {
        let d = spectral_dichotomy(&diag(&[-1.0, 2.0])).unwrap();
        let cut = d.cut_for(3.0, 1e-9);
        assert!(3.0 * d.tail(cut) <= 1e-9);
        assert!(3.0 * d.tail(cut - 1e-6) > 1e-9);
    }
}
