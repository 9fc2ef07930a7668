//! Trigonometric polynomials as the concrete almost-periodic class, together
//! with translation-number scans and Bohr–Wexler comparisons of piecewise
//! continuous functions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::op_norm;
use crate::quadrature::{lagrange_weights, stencil_around};
use crate::timescale::{align_points, AlmostPeriodReport, ThetaSequence, DEFAULT_MULTIPLICITY_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub omega: f64,
    pub cos: DMatrix<f64>,
    pub sin: DMatrix<f64>,
}

/// `constant + Σ (cos_k·cos(ω_k t) + sin_k·sin(ω_k t))` with scalar, vector or
/// square-matrix coefficients (scalars and vectors are stored as columns).
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    shape: Shape,
    constant: DMatrix<f64>,
    terms: Vec<TrigTerm>,
}

fn shape_dims(shape: Shape) -> (usize, usize) {
    match shape {
        Shape::Scalar => (1, 1),
        Shape::Vector(n) => (n, 1),
        Shape::Matrix(n) => (n, n),
    }
}

impl TrigPolynomial {
    pub fn new(shape: Shape, constant: DMatrix<f64>, terms: Vec<TrigTerm>) -> Result<Self> {
        let dims = shape_dims(shape);
        if dims.0 == 0 {
            return Err(Error::Dimension("trig polynomial of dimension zero".into()));
        }
        if constant.shape() != dims {
            return Err(Error::Dimension(format!("constant term is {:?}, expected {:?}", constant.shape(), dims)));
        }
        for (k, term) in terms.iter().enumerate() {
            if !(term.omega >= 0.0 && term.omega.is_finite()) {
                return Err(Error::invalid(format!("frequency {} must be finite and non-negative", term.omega)));
            }
            if term.cos.shape() != dims || term.sin.shape() != dims {
                return Err(Error::Dimension(format!("term {k} has coefficient shape mismatch")));
            }
            if terms[..k].iter().any(|other| other.omega == term.omega) {
                return Err(Error::invalid(format!("frequency {} appears twice", term.omega)));
            }
        }
        if constant.iter().chain(terms.iter().flat_map(|t| t.cos.iter().chain(t.sin.iter()))).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite coefficient"));
        }
        Ok(TrigPolynomial { shape, constant, terms })
    }

    /// Scalar polynomial from `(omega, cos, sin)` triples.
    pub fn scalar(constant: f64, terms: &[(f64, f64, f64)]) -> Result<Self> {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(
            Shape::Scalar,
            one(constant),
            terms.iter().map(|&(omega, c, s)| TrigTerm { omega, cos: one(c), sin: one(s) }).collect(),
        )
    }

    pub fn constant_scalar(c: f64) -> Self {
        Self::scalar(c, &[]).expect("finite constant")
    }

    pub fn constant_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("matrix coefficient must be square, got {:?}", m.shape())));
        }
        Self::new(Shape::Matrix(m.nrows()), m, Vec::new())
    }

    pub fn constant_vector(v: DVector<f64>) -> Result<Self> {
        let n = v.len();
        Self::new(Shape::Vector(n), DMatrix::from_column_slice(n, 1, v.as_slice()), Vec::new())
    }

    pub fn zero_vector(n: usize) -> Self {
        Self::constant_vector(DVector::zeros(n)).expect("zero vector")
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Row dimension (1 for scalars).
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn constant_term(&self) -> &DMatrix<f64> {
        &self.constant
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for term in &self.terms {
            let (s, c) = (term.omega * t).sin_cos();
            out += &term.cos * c + &term.sin * s;
        }
        out
    }

    pub fn eval_scalar(&self, t: f64) -> f64 {
        let mut out = self.constant[(0, 0)];
        for term in &self.terms {
            let (s, c) = (term.omega * t).sin_cos();
            out += term.cos[(0, 0)] * c + term.sin[(0, 0)] * s;
        }
        out
    }

    pub fn eval_vector(&self, t: f64) -> DVector<f64> {
        self.eval(t).column(0).into_owned()
    }

    /// Upper bound on `sup_t ‖f(t)‖` (operator norm for matrices).
    pub fn sup_bound(&self) -> f64 {
        let norm = |m: &DMatrix<f64>| if m.ncols() == 1 { m.norm() } else { op_norm(m) };
        norm(&self.constant) + self.terms.iter().map(|t| norm(&t.cos) + norm(&t.sin)).sum::<f64>()
    }

    /// Value of `f` when every oscillating term is dropped.
    pub fn mean(&self) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for term in self.terms.iter().filter(|t| t.omega == 0.0) {
            m += &term.cos;
        }
        m
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.omega == 0.0 || (t.cos.iter().all(|&v| v == 0.0) && t.sin.iter().all(|&v| v == 0.0)))
    }

    /// `∫_{t0}^{t1} f`, exactly.
    pub fn integral(&self, t0: f64, t1: f64) -> DMatrix<f64> {
        let mut out = &self.constant * (t1 - t0);
        for term in &self.terms {
            if term.omega == 0.0 {
                out += &term.cos * (t1 - t0);
            } else {
                let w = term.omega;
                let ds = ((w * t1).sin() - (w * t0).sin()) / w;
                let dc = ((w * t0).cos() - (w * t1).cos()) / w;
                out += &term.cos * ds + &term.sin * dc;
            }
        }
        out
    }

    pub fn integral_scalar(&self, t0: f64, t1: f64) -> f64 {
        self.integral(t0, t1)[(0, 0)]
    }

    /// `t ↦ f(t + shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let (s, c) = (term.omega * shift).sin_cos();
                TrigTerm { omega: term.omega, cos: &term.cos * c + &term.sin * s, sin: &term.sin * c - &term.cos * s }
            })
            .collect();
        TrigPolynomial { shape: self.shape, constant: self.constant.clone(), terms }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TrigPolynomial {
            shape: self.shape,
            constant: &self.constant * factor,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm { omega: t.omega, cos: &t.cos * factor, sin: &t.sin * factor })
                .collect(),
        }
    }

    /// Largest frequency present, used to size sampling grids.
    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.omega).fold(0.0, f64::max)
    }
}

/// Grid and verification window for a translation-number scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationScan {
    pub search: [f64; 2],
    pub grid_step: f64,
    pub verify: [f64; 2],
    pub sample_step: f64,
}

impl TranslationScan {
    pub fn taus(&self) -> Vec<f64> {
        grid(self.search, self.grid_step)
    }
}

fn grid(range: [f64; 2], step: f64) -> Vec<f64> {
    let n = ((range[1] - range[0]) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n).map(|k| range[0] + k as f64 * step).collect()
}

/// Grid shifts `τ` with `sup_t ‖f(t+τ) − f(t)‖ < ε` over the verification
/// samples (Frobenius norm for matrix coefficients).
pub fn translation_numbers(f: &TrigPolynomial, epsilon: f64, scan: &TranslationScan) -> Result<AlmostPeriodReport> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if scan.grid_step <= 0.0 || scan.sample_step <= 0.0 {
        return Err(Error::invalid("scan steps must be positive"));
    }
    let samples = grid(scan.verify, scan.sample_step);
    let base: Vec<DMatrix<f64>> = samples.iter().map(|&t| f.eval(t)).collect();
    let periods: Vec<f64> = scan
        .taus()
        .into_par_iter()
        .filter(|&tau| samples.iter().zip(&base).all(|(&t, v)| (f.eval(t + tau) - v).norm() < epsilon))
        .collect();
    Ok(AlmostPeriodReport::new(epsilon, periods, scan.search, scan.verify))
}

/// Smooth description of one piece.
#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Constant(f64),
    /// Dense samples on the piece, evaluated by local polynomial interpolation.
    Sampled { ts: Vec<f64>, values: Vec<f64> },
    Trig(TrigPolynomial),
}

impl Piece {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Piece::Constant(c) => *c,
            Piece::Trig(p) => p.eval_scalar(t),
            Piece::Sampled { ts, values } => {
                if ts.len() == 1 {
                    return values[0];
                }
                let pos = ts.partition_point(|&x| x <= t).saturating_sub(1).min(ts.len() - 2);
                let range = stencil_around(pos, ts.len(), 6);
                let w = lagrange_weights(t, &ts[range.clone()]);
                w.iter().zip(&values[range]).map(|(w, v)| w * v).sum()
            }
        }
    }

    fn shifted(&self, tau: f64) -> Piece {
        match self {
            Piece::Constant(c) => Piece::Constant(*c),
            Piece::Trig(p) => Piece::Trig(p.shifted(tau)),
            Piece::Sampled { ts, values } => Piece::Sampled { ts: ts.iter().map(|t| t - tau).collect(), values: values.clone() },
        }
    }
}

/// Scalar piecewise-smooth function on a window, with jumps only at the
/// listed breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseFunction {
    pub window: [f64; 2],
    /// Interior breakpoints, strictly increasing.
    pub breakpoints: Vec<f64>,
    /// One more piece than breakpoints.
    pub pieces: Vec<Piece>,
    pub right_continuous: bool,
}

impl PiecewiseFunction {
    pub fn new(window: [f64; 2], breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if !(window[0] < window[1]) {
            return Err(Error::invalid(format!("empty window {window:?}")));
        }
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::invalid("need exactly one more piece than breakpoints"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) || breakpoints.iter().any(|&b| b <= window[0] || b >= window[1]) {
            return Err(Error::invalid("breakpoints must be strictly increasing and interior to the window"));
        }
        Ok(PiecewiseFunction { window, breakpoints, pieces, right_continuous: true })
    }

    pub fn continuous(window: [f64; 2], f: TrigPolynomial) -> Result<Self> {
        Self::new(window, Vec::new(), vec![Piece::Trig(f)])
    }

    /// Right-continuous value (left limit when `right_continuous` is false).
    pub fn eval(&self, t: f64) -> f64 {
        if self.right_continuous {
            self.eval_right(t)
        } else {
            self.eval_left(t)
        }
    }

    pub fn eval_right(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.pieces[k].eval(t)
    }

    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b < t);
        self.pieces[k].eval(t)
    }

    /// `t ↦ u(t + tau)`.
    pub fn shifted(&self, tau: f64) -> Self {
        PiecewiseFunction {
            window: [self.window[0] - tau, self.window[1] - tau],
            breakpoints: self.breakpoints.iter().map(|b| b - tau).collect(),
            pieces: self.pieces.iter().map(|p| p.shifted(tau)).collect(),
            right_continuous: self.right_continuous,
        }
    }

    pub fn sup_norm(&self, samples_per_piece: usize) -> f64 {
        let edges = self.edges();
        edges
            .windows(2)
            .flat_map(|w| sample_interval(w[0], w[1], samples_per_piece))
            .map(|t| self.eval(t).abs())
            .fold(0.0, f64::max)
    }

    fn edges(&self) -> Vec<f64> {
        let mut e = vec![self.window[0]];
        e.extend_from_slice(&self.breakpoints);
        e.push(self.window[1]);
        e
    }
}

fn sample_interval(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Which value a composed staircase takes on `[θ_i, θ_{i+1})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComposeMode {
    /// `f(θ_{i−p})`
    Node,
    /// `f(i − p)`, the literal integer reading.
    Index,
}

/// The staircase `t ↦ f(θ_{β(t)−p})` (or `f(β(t)−p)`) on `window`.
pub fn step_compose(
    f: impl Fn(f64) -> f64,
    seq: &ThetaSequence,
    p: i64,
    window: [f64; 2],
    mode: ComposeMode,
) -> Result<PiecewiseFunction> {
    let first = seq.beta(window[0])?;
    let inner = seq.points_in(window[0], window[1])?;
    let mut breakpoints = Vec::new();
    let mut indices = vec![first];
    for (i, v) in inner {
        if v > window[0] && v < window[1] {
            breakpoints.push(v);
            indices.push(i);
        }
    }
    let pieces = indices
        .into_iter()
        .map(|i| {
            let arg = match mode {
                ComposeMode::Node => seq.theta(i - p)?,
                ComposeMode::Index => (i - p) as f64,
            };
            Ok(Piece::Constant(f(arg)))
        })
        .collect::<Result<Vec<_>>>()?;
    PiecewiseFunction::new(window, breakpoints, pieces)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BwComparison {
    pub equivalent: bool,
    pub breakpoints_equivalent: bool,
    /// Largest `|u1 − u2|` over samples outside every breakpoint neighbourhood.
    pub max_deviation: f64,
    pub samples_checked: usize,
    pub window: [f64; 2],
}

pub const DEFAULT_SAMPLES_PER_PIECE: usize = 32;

/// Bohr–Wexler ε-equivalence on the common window of `u1` and `u2`.
pub fn bw_equivalent(u1: &PiecewiseFunction, u2: &PiecewiseFunction, epsilon: f64) -> Result<BwComparison> {
    bw_equivalent_with(u1, u2, epsilon, DEFAULT_SAMPLES_PER_PIECE)
}

pub fn bw_equivalent_with(u1: &PiecewiseFunction, u2: &PiecewiseFunction, epsilon: f64, samples: usize) -> Result<BwComparison> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let window = [u1.window[0].max(u2.window[0]), u1.window[1].min(u2.window[1])];
    if !(window[0] < window[1]) {
        return Err(Error::EmptyRange(format!("windows {:?} and {:?} do not overlap", u1.window, u2.window)));
    }

    let tagged = |u: &PiecewiseFunction| -> Vec<(i64, f64)> {
        u.breakpoints.iter().enumerate().map(|(k, &b)| (k as i64, b)).collect()
    };
    // breakpoints hugging the window edges may have partners outside it
    let required = [window[0] + epsilon, window[1] - epsilon];
    let breakpoints_equivalent = if required[0] <= required[1] {
        align_points(&tagged(u1), &tagged(u2), epsilon, required, DEFAULT_MULTIPLICITY_CAP).equivalent
    } else {
        true
    };

    let mut edges: Vec<f64> = u1.breakpoints.iter().chain(&u2.breakpoints).copied().filter(|&b| b > window[0] && b < window[1]).collect();
    edges.push(window[0]);
    edges.push(window[1]);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let excluded = |t: f64, bps: &[f64]| {
        let k = bps.partition_point(|&b| b < t);
        (k < bps.len() && bps[k] - t < epsilon) || (k > 0 && t - bps[k - 1] < epsilon)
    };

    let mut max_deviation: f64 = 0.0;
    let mut samples_checked = 0;
    for w in edges.windows(2) {
        for t in sample_interval(w[0], w[1], samples) {
            if excluded(t, &u1.breakpoints) || excluded(t, &u2.breakpoints) {
                continue;
            }
            samples_checked += 1;
            max_deviation = max_deviation.max((u1.eval(t) - u2.eval(t)).abs());
        }
    }
    Ok(BwComparison {
        equivalent: breakpoints_equivalent && max_deviation < epsilon,
        breakpoints_equivalent,
        max_deviation,
        samples_checked,
        window,
    })
}

/// Grid shifts `τ` for which `u(· + τ)` is Bohr–Wexler ε-equivalent to `u`.
pub fn bw_translation_numbers(u: &PiecewiseFunction, epsilon: f64, taus: &[f64]) -> Result<AlmostPeriodReport> {
    if taus.is_empty() {
        return Err(Error::EmptyRange("no shifts to test".into()));
    }
    let span = u.window[1] - u.window[0];
    if let Some(&tau) = taus.iter().find(|t| t.abs() >= span) {
        return Err(Error::InsufficientWindow(format!("shift {tau} leaves no overlap on a window of length {span}")));
    }
    let periods = taus
        .par_iter()
        .map(|&tau| bw_equivalent(&u.shifted(tau), u, epsilon).map(|c| (tau, c.equivalent)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter_map(|(tau, ok)| ok.then_some(tau))
        .collect();
    let lo = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AlmostPeriodReport::new(epsilon, periods, [lo, hi], u.window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn eval_examples() {
        let f = TrigPolynomial::scalar(3.0, &[(1.0, 0.0, 1.0)]).unwrap();
        assert_eq!(f.eval_scalar(0.0), 3.0);
        let g = TrigPolynomial::scalar(0.0, &[(1.0, 1.0, 0.0), (SQRT_2, 1.0, 0.0)]).unwrap();
        assert_eq!(g.eval_scalar(0.0), 2.0);
        let m = TrigPolynomial::constant_matrix(-DMatrix::identity(3, 3)).unwrap();
        assert_eq!(m.eval(17.3), -DMatrix::identity(3, 3));
    }

    #[test]
    fn construction_rejects_bad_terms() {
        assert!(TrigPolynomial::scalar(0.0, &[(1.0, 1.0, 0.0), (1.0, 0.0, 1.0)]).is_err());
        assert!(TrigPolynomial::scalar(0.0, &[(-1.0, 1.0, 0.0)]).is_err());
        assert!(TrigPolynomial::constant_matrix(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn integral_and_shift_agree_with_direct_evaluation() {
        let f = TrigPolynomial::scalar(0.5, &[(1.0, 0.3, -0.2), (SQRT_2, 0.0, 1.0), (0.0, 0.25, 0.0)]).unwrap();
        let rule = crate::quadrature::GaussLegendre::new(10);
        let quad = crate::quadrature::composite_gauss(&rule, -1.0, 4.0, 20, |t| f.eval_scalar(t));
        assert!((f.integral_scalar(-1.0, 4.0) - quad).abs() < 1e-12);
        let g = f.shifted(0.7);
        for t in [-3.0, 0.0, 1.1, 5.0] {
            assert!((g.eval_scalar(t) - f.eval_scalar(t + 0.7)).abs() < 1e-14);
        }
        assert_eq!(f.mean()[(0, 0)], 0.75);
    }

    #[test]
    fn sup_bound_dominates_samples() {
        let f = TrigPolynomial::scalar(1.0, &[(1.0, 2.0, -1.0), (3.0, 0.5, 0.5)]).unwrap();
        let bound = f.sup_bound();
        for k in 0..2000 {
            assert!(f.eval_scalar(k as f64 * 0.013).abs() <= bound);
        }
    }

    #[test]
    fn cosine_periods_are_found() {
        let f = TrigPolynomial::scalar(0.0, &[(1.0, 1.0, 0.0)]).unwrap();
        let scan = TranslationScan { search: [0.0, 8.0 * PI], grid_step: PI / 16.0, verify: [0.0, 20.0], sample_step: 0.05 };
        let r = translation_numbers(&f, 1e-9, &scan).unwrap();
        assert_eq!(r.periods.len(), 5);
        for (k, p) in r.periods.iter().enumerate() {
            assert!((p - 2.0 * PI * k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_has_every_translation() {
        let f = TrigPolynomial::constant_scalar(4.0);
        let scan = TranslationScan { search: [0.0, 10.0], grid_step: 0.5, verify: [0.0, 5.0], sample_step: 0.5 };
        assert_eq!(translation_numbers(&f, 1e-12, &scan).unwrap().periods.len(), 21);
    }

    #[test]
    fn staircase_of_identity() {
        let seq = ThetaSequence::unit();
        let u = step_compose(|t| t, &seq, 0, [0.0, 5.0], ComposeMode::Node).unwrap();
        assert_eq!(u.breakpoints, vec![1.0, 2.0, 3.0, 4.0]);
        for t in [0.0, 0.3, 1.0, 2.99, 4.5] {
            assert_eq!(u.eval(t), t.floor());
        }
        let c = step_compose(|_| 7.0, &seq, 2, [0.0, 5.0], ComposeMode::Index).unwrap();
        assert_eq!(c.sup_norm(8), 7.0);
        let sin = TrigPolynomial::scalar(0.0, &[(1.0, 0.0, 1.0)]).unwrap();
        let u = step_compose(|t| sin.eval_scalar(t), &seq, 1, [0.0, 5.0], ComposeMode::Node).unwrap();
        assert_eq!(u.eval(2.5), 1f64.sin());
        assert_eq!(u.eval(3.0), 2f64.sin());
        assert_eq!(u.eval_left(3.0), 1f64.sin());
    }

    #[test]
    fn staircase_shifted_by_small_offset_is_bw_close() {
        // floor(t) vs floor(t - 0.05) as index-mode staircases of a linear ramp
        let ramp = |offset: f64| {
            let bps: Vec<f64> = (1..10).map(|k| k as f64 + offset).collect();
            let pieces = (0..10).map(|k| Piece::Constant(k as f64)).collect();
            PiecewiseFunction::new([0.0 + offset.min(0.0), 10.0], bps, pieces).unwrap()
        };
        let u1 = ramp(0.0);
        let u2 = ramp(0.05);
        let c = bw_equivalent(&u1, &u2, 0.1).unwrap();
        assert!(c.equivalent, "{c:?}");
        assert_eq!(c.max_deviation, 0.0);
        assert!(!bw_equivalent(&u1, &u2, 0.04).unwrap().equivalent);
    }

    #[test]
    fn continuous_functions_reduce_to_sup_distance() {
        let f = TrigPolynomial::scalar(0.0, &[(1.0, 1.0, 0.0)]).unwrap();
        let g = TrigPolynomial::scalar(0.03, &[(1.0, 1.0, 0.0)]).unwrap();
        let u1 = PiecewiseFunction::continuous([0.0, 10.0], f).unwrap();
        let u2 = PiecewiseFunction::continuous([0.0, 10.0], g).unwrap();
        let c = bw_equivalent(&u1, &u2, 0.05).unwrap();
        assert!(c.equivalent);
        assert!((c.max_deviation - 0.03).abs() < 1e-12);
        assert!(!bw_equivalent(&u1, &u2, 0.03).unwrap().equivalent);
    }

    #[test]
    fn periodic_staircase_has_integer_translations() {
        let f = TrigPolynomial::scalar(0.0, &[(2.0 * PI, 0.0, 1.0)]).unwrap();
        let seq = ThetaSequence::uniform(0.25, 0.0).unwrap();
        let u = step_compose(|t| f.eval_scalar(t), &seq, 0, [0.0, 20.0], ComposeMode::Node).unwrap();
        let taus: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
        let r = bw_translation_numbers(&u, 1e-9, &taus).unwrap();
        assert_eq!(r.periods, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampled_piece_interpolates_smooth_data() {
        let ts: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let values = ts.iter().map(|t: &f64| t.exp()).collect();
        let u = PiecewiseFunction::new([0.0, 1.0], vec![], vec![Piece::Sampled { ts, values }]).unwrap();
        assert!((u.eval(0.512) - 0.512f64.exp()).abs() < 1e-9);
    }
}
