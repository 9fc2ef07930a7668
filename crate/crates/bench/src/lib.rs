//! Fixed problems shared by the benchmarks.

use epcag::apkit::TrigPolynomial;
use epcag::timescale::{IndexedSequence, ThetaSequence};
use epcag::EPCAGProblem;

/// `x' = −x + 0.5 x(θ_{β(t)}) + cos t + cos(√2 t)` on the integer nodes.
pub fn quasi_periodic_scalar() -> EPCAGProblem {
    let forcing = TrigPolynomial::scalar(0.0, &[(1.0, 1.0, 0.0), (std::f64::consts::SQRT_2, 1.0, 0.0)]).expect("valid forcing");
    EPCAGProblem::scalar_affine(-1.0, &[0.5], forcing, vec![0], ThetaSequence::unit()).expect("valid problem")
}

/// Delayed two-argument scalar problem on a perturbed switching sequence.
pub fn perturbed_delayed() -> EPCAGProblem {
    let forcing = TrigPolynomial::scalar(0.5, &[(1.0, 1.0, 0.3)]).expect("valid forcing");
    let theta = ThetaSequence::perturbed(0.2, 1.3).expect("increasing sequence");
    EPCAGProblem::scalar_affine(-1.5, &[0.3, 0.2], forcing, vec![0, 2], theta).expect("valid problem")
}

/// `sin(2π φ i)` for the golden ratio conjugate on `|i| ≤ half_width`.
pub fn golden_sine(half_width: i64) -> IndexedSequence {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    IndexedSequence::from_fn(-half_width..=half_width, |i| (std::f64::consts::TAU * phi * i as f64).sin())
}
