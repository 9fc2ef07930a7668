//! The quasilinear system `x' = A(t)x + f(t, x(θ_{β(t)−p_1}), …, x(θ_{β(t)−p_m}))`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::apkit::{Shape, TrigPolynomial};
use crate::error::{Error, Result};
use crate::lindich::{contraction_margin, spectral_dichotomy, DichotomyData, LinearSystem};
use crate::linalg::op_norm;
use crate::logistic::LogisticRate;
use crate::timescale::ThetaSequence;

/// Declarative nonlinearities with certifiable Lipschitz constants.
#[derive(Clone, Debug, PartialEq)]
pub enum Nonlinearity {
    /// `Σ C_j z_j + g(t)`
    Affine { coeffs: Vec<DMatrix<f64>>, forcing: TrigPolynomial },
    /// `Σ C_j tanh(z_j) + g(t)`, `tanh` taken componentwise
    Saturated { coeffs: Vec<DMatrix<f64>>, forcing: TrigPolynomial },
    /// `scale · z_0 · h(z_1, …, z_m)` for a scalar state, `z_0` the current value
    ProductLogistic { scale: f64, rate: LogisticRate },
}

impl Nonlinearity {
    pub fn affine(coeffs: Vec<DMatrix<f64>>, forcing: TrigPolynomial) -> Result<Self> {
        let f = Nonlinearity::Affine { coeffs, forcing };
        f.validate()?;
        Ok(f)
    }

    pub fn saturated(coeffs: Vec<DMatrix<f64>>, forcing: TrigPolynomial) -> Result<Self> {
        let f = Nonlinearity::Saturated { coeffs, forcing };
        f.validate()?;
        Ok(f)
    }

    /// Scalar affine nonlinearity `Σ c_j z_j + g(t)`.
    pub fn scalar_affine(coeffs: &[f64], forcing: TrigPolynomial) -> Result<Self> {
        let forcing = match forcing.shape() {
            Shape::Scalar => TrigPolynomial::new(
                Shape::Vector(1),
                forcing.constant_term().clone(),
                forcing.terms().to_vec(),
            )?,
            _ => forcing,
        };
        Self::affine(coeffs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect(), forcing)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::Affine { coeffs, forcing } | Nonlinearity::Saturated { coeffs, forcing } => {
                if coeffs.is_empty() {
                    return Err(Error::invalid("nonlinearity needs one coefficient matrix per deviation"));
                }
                let n = forcing.dim();
                if !matches!(forcing.shape(), Shape::Vector(_)) {
                    return Err(Error::Dimension("forcing must be vector valued".into()));
                }
                if let Some(c) = coeffs.iter().find(|c| c.shape() != (n, n)) {
                    return Err(Error::Dimension(format!("coefficient of shape {:?} does not match dimension {n}", c.shape())));
                }
                if coeffs.iter().flat_map(|c| c.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::invalid("non-finite coefficient"));
                }
                Ok(())
            }
            Nonlinearity::ProductLogistic { scale, rate } => {
                if !scale.is_finite() {
                    return Err(Error::invalid("logistic scale must be finite"));
                }
                rate.validate()
            }
        }
    }

    /// State dimension, if fixed by the nonlinearity.
    pub fn dim(&self) -> usize {
        match self {
            Nonlinearity::Affine { forcing, .. } | Nonlinearity::Saturated { forcing, .. } => forcing.dim(),
            Nonlinearity::ProductLogistic { .. } => 1,
        }
    }

    /// Number of node arguments `m`.
    pub fn arity(&self) -> usize {
        match self {
            Nonlinearity::Affine { coeffs, .. } | Nonlinearity::Saturated { coeffs, .. } => coeffs.len(),
            Nonlinearity::ProductLogistic { rate, .. } => rate.arity(),
        }
    }

    /// Global Lipschitz constant in the node arguments, `Σ ‖C_j‖`; `None` for
    /// the product form, which is only locally Lipschitz.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Nonlinearity::Affine { coeffs, .. } | Nonlinearity::Saturated { coeffs, .. } => {
                Some(coeffs.iter().map(op_norm).sum())
            }
            Nonlinearity::ProductLogistic { .. } => None,
        }
    }

    /// Whether `f` also reads the current state `x(t)`.
    pub fn reads_current_state(&self) -> bool {
        matches!(self, Nonlinearity::ProductLogistic { .. })
    }

    /// `f(t, 0, …, 0)`.
    pub fn forcing_at(&self, t: f64) -> DVector<f64> {
        match self {
            Nonlinearity::Affine { forcing, .. } | Nonlinearity::Saturated { forcing, .. } => forcing.eval_vector(t),
            Nonlinearity::ProductLogistic { .. } => DVector::zeros(1),
        }
    }

    /// Upper bound on `sup_t ‖f(t, 0, …, 0)‖`.
    pub fn forcing_sup(&self) -> f64 {
        match self {
            Nonlinearity::Affine { forcing, .. } | Nonlinearity::Saturated { forcing, .. } => forcing.sup_bound(),
            Nonlinearity::ProductLogistic { .. } => 0.0,
        }
    }

    pub fn forcing(&self) -> Option<&TrigPolynomial> {
        match self {
            Nonlinearity::Affine { forcing, .. } | Nonlinearity::Saturated { forcing, .. } => Some(forcing),
            Nonlinearity::ProductLogistic { .. } => None,
        }
    }

    /// `f(t, current; nodes)`; `nodes[j]` is the state at the `j`-th deviated node.
    pub fn eval(&self, t: f64, current: &DVector<f64>, nodes: &[DVector<f64>]) -> DVector<f64> {
        match self {
            Nonlinearity::Affine { coeffs, forcing } => {
                let mut out = forcing.eval_vector(t);
                for (c, z) in coeffs.iter().zip(nodes) {
                    out += c * z;
                }
                out
            }
            Nonlinearity::Saturated { coeffs, forcing } => {
                let mut out = forcing.eval_vector(t);
                for (c, z) in coeffs.iter().zip(nodes) {
                    out += c * z.map(f64::tanh);
                }
                out
            }
            Nonlinearity::ProductLogistic { scale, rate } => {
                let args: Vec<f64> = nodes.iter().map(|z| z[0]).collect();
                DVector::from_element(1, scale * current[0] * rate.eval(&args))
            }
        }
    }

    /// Largest observed secant ratio `‖f(t,z) − f(t,w)‖ / max_j ‖z_j − w_j‖`
    /// over random argument pairs in the ball of the given radius.
    pub fn secant_lipschitz<R: Rng>(&self, rng: &mut R, trials: usize, radius: f64) -> f64 {
        let n = self.dim();
        let m = self.arity();
        let mut worst: f64 = 0.0;
        let draw = |rng: &mut R| -> Vec<DVector<f64>> {
            (0..m).map(|_| DVector::from_fn(n, |_, _| rng.random_range(-radius..=radius))).collect()
        };
        for _ in 0..trials {
            let t = rng.random_range(-50.0..50.0);
            let z = draw(rng);
            let w = draw(rng);
            let current = DVector::from_element(n, 1.0);
            let num = (self.eval(t, &current, &z) - self.eval(t, &current, &w)).norm();
            let den = z.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if den > 0.0 {
                worst = worst.max(num / den);
            }
        }
        worst
    }
}

/// A complete system with its switching sequence and dichotomy data.
#[derive(Clone, Debug)]
pub struct EPCAGProblem {
    pub system: LinearSystem,
    pub nonlinearity: Nonlinearity,
    pub deviations: Vec<i64>,
    pub theta: ThetaSequence,
    pub dichotomy: DichotomyData,
}

impl EPCAGProblem {
    pub fn new(
        system: LinearSystem,
        nonlinearity: Nonlinearity,
        deviations: Vec<i64>,
        theta: ThetaSequence,
        dichotomy: DichotomyData,
    ) -> Result<Self> {
        if deviations.is_empty() {
            return Err(Error::invalid("at least one deviation is required"));
        }
        if nonlinearity.arity() != deviations.len() {
            return Err(Error::Dimension(format!(
                "nonlinearity takes {} node arguments but {} deviations were given",
                nonlinearity.arity(),
                deviations.len()
            )));
        }
        let n = system.dim();
        if nonlinearity.dim() != n || dichotomy.dim() != n {
            return Err(Error::Dimension(format!(
                "dimensions disagree: A is {n}x{n}, f has {}, P has {}",
                nonlinearity.dim(),
                dichotomy.dim()
            )));
        }
        Ok(EPCAGProblem { system, nonlinearity, deviations, theta, dichotomy })
    }

    /// Constant `A` with its spectral dichotomy.
    pub fn with_constant_matrix(a: DMatrix<f64>, nonlinearity: Nonlinearity, deviations: Vec<i64>, theta: ThetaSequence) -> Result<Self> {
        let dichotomy = spectral_dichotomy(&a)?;
        Self::new(LinearSystem::constant(a)?, nonlinearity, deviations, theta, dichotomy)
    }

    /// Scalar `x' = a·x + Σ c_j x(θ_{β(t)−p_j}) + g(t)`.
    pub fn scalar_affine(a: f64, coeffs: &[f64], forcing: TrigPolynomial, deviations: Vec<i64>, theta: ThetaSequence) -> Result<Self> {
        Self::with_constant_matrix(
            DMatrix::from_element(1, 1, a),
            Nonlinearity::scalar_affine(coeffs, forcing)?,
            deviations,
            theta,
        )
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// `m`, the number of deviations.
    pub fn arity(&self) -> usize {
        self.deviations.len()
    }

    pub fn lipschitz(&self) -> Result<f64> {
        self.nonlinearity
            .lipschitz()
            .ok_or_else(|| Error::invalid("the product nonlinearity has no global Lipschitz constant"))
    }

    pub fn contraction_margin(&self) -> Result<f64> {
        Ok(contraction_margin(&self.dichotomy, self.lipschitz()?, self.arity()))
    }

    /// Largest `|p_j|`.
    pub fn max_abs_deviation(&self) -> i64 {
        self.deviations.iter().map(|p| p.abs()).max().unwrap_or(0)
    }

    /// `p⁰ = max p_j`.
    pub fn max_delay(&self) -> i64 {
        self.deviations.iter().copied().max().unwrap_or(0)
    }

    pub fn has_advanced_arguments(&self) -> bool {
        self.deviations.iter().any(|&p| p < 0)
    }
}
