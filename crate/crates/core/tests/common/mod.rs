#![allow(dead_code)]

use epcag::apkit::{Shape, TrigPolynomial, TrigTerm};
use epcag::lindich::{spectral_dichotomy, DichotomyData, LinearSystem};
use epcag::timescale::ThetaSequence;
use epcag::{EPCAGProblem, Nonlinearity};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Constant matrix with eigenvalues of modulus in `[0.8, 2]`, stable or mixed,
/// plus a small strictly upper part.
pub fn random_hyperbolic<R: Rng>(rng: &mut R, n: usize, allow_unstable: bool) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let mag = rng.random_range(0.8..2.0);
            if allow_unstable && rng.random_bool(0.4) {
                mag
            } else {
                -mag
            }
        } else if j > i {
            rng.random_range(-0.3..0.3)
        } else {
            0.0
        }
    })
}

pub fn random_forcing<R: Rng>(rng: &mut R, n: usize, terms: usize) -> TrigPolynomial {
    let constant = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
    let terms = (0..terms)
        .map(|_| TrigTerm {
            omega: rng.random_range(0.3..2.0),
            cos: DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0)),
            sin: DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0)),
        })
        .collect();
    TrigPolynomial::new(Shape::Vector(n), constant, terms).unwrap()
}

pub fn random_theta<R: Rng>(rng: &mut R) -> ThetaSequence {
    match rng.random_range(0..3) {
        0 => ThetaSequence::unit(),
        1 => ThetaSequence::uniform(rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5)).unwrap(),
        _ => ThetaSequence::perturbed(rng.random_range(0.05..0.25), rng.random_range(0.5..2.0)).unwrap(),
    }
}

/// Random affine problem whose contraction margin equals `margin`.
pub fn random_affine<R: Rng>(rng: &mut R, margin: f64) -> EPCAGProblem {
    let n = rng.random_range(1..=2);
    let a = random_hyperbolic(rng, n, true);
    let dichotomy = spectral_dichotomy(&a).unwrap();
    let m = rng.random_range(1..=2);
    let deviations: Vec<i64> = (0..m).map(|_| rng.random_range(-1..=2)).collect();
    let raw: Vec<DMatrix<f64>> = (0..m).map(|_| DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))).collect();
    let raw_l: f64 = raw.iter().map(epcag::linalg::op_norm).sum();
    let target_l = margin / (m as f64 * dichotomy.kernel_weight());
    let coeffs = raw.into_iter().map(|c| c * (target_l / raw_l)).collect();
    let f = Nonlinearity::affine(coeffs, random_forcing(rng, n, 2)).unwrap();
    let system = LinearSystem::constant(a).unwrap();
    EPCAGProblem::new(system, f, deviations, random_theta(rng), dichotomy).unwrap()
}

pub fn dichotomy_of(a: &DMatrix<f64>) -> DichotomyData {
    spectral_dichotomy(a).unwrap()
}

pub fn sampled_sup(f: &TrigPolynomial, lo: f64, hi: f64, step: f64) -> f64 {
    let count = ((hi - lo) / step).ceil() as usize;
    (0..=count).map(|k| f.eval_vector(lo + k as f64 * step).norm()).fold(0.0, f64::max)
}

pub fn scalar(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}
