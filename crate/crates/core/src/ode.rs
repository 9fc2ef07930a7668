//! Adaptive Dormand–Prince 5(4) integrator with exact landing on requested
//! output times.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|; `None` leaves the step unrestricted.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_step: None, max_steps: 2_000_000 }
    }
}

impl OdeOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        OdeOptions { rtol, atol: rtol * 1e-2, ..Default::default() }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = rhs(t, y)` from `(t0, y0)` and return the state at each
/// of `outputs`, which must be monotone in the direction of integration.
pub fn integrate<F>(mut rhs: F, t0: f64, y0: &DVector<f64>, outputs: &[f64], opts: &OdeOptions) -> Result<Vec<DVector<f64>>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut result = Vec::with_capacity(outputs.len());
    let Some(&last) = outputs.last() else {
        return Ok(result);
    };
    let dir = if last >= t0 { 1.0 } else { -1.0 };
    if outputs.iter().any(|&t| (t - t0) * dir < 0.0) || outputs.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0) {
        return Err(Error::invalid("integrator outputs must be monotone away from the start time"));
    }

    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = rhs(t, &y);
    let span = (last - t0).abs();
    let mut h_prop = initial_step(&y, &k1, span, opts);
    let mut steps = 0usize;

    for &target in outputs {
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::TooManySteps(opts.max_steps));
            }
            if let Some(hmax) = opts.max_step {
                h_prop = h_prop.min(hmax);
            }
            let mut h = h_prop * dir;
            let landing = (t + h - target) * dir >= 0.0;
            if landing {
                h = target - t;
            }
            let min_step = 16.0 * f64::EPSILON * t.abs().max(1.0);
            if h.abs() < min_step && !landing {
                return Err(Error::StepSizeUnderflow { t });
            }

            let k2 = rhs(t + C2 * h, &(&y + &k1 * (A21 * h)));
            let k3 = rhs(t + C3 * h, &(&y + (&k1 * A31 + &k2 * A32) * h));
            let k4 = rhs(t + C4 * h, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h));
            let k5 = rhs(t + C5 * h, &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
            let k6 = rhs(t + h, &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h));
            let y_new = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
            let k7 = rhs(t + h, &y_new);
            let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

            let mut acc = 0.0;
            for i in 0..y.len() {
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                acc += (err_vec[i] / sc).powi(2);
            }
            let err = if y.is_empty() { 0.0 } else { (acc / y.len() as f64).sqrt() };
            if !err.is_finite() {
                h_prop = 0.2 * h.abs();
                continue;
            }

            if err <= 1.0 {
                t = if landing { target } else { t + h };
                y = y_new;
                k1 = k7;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if landing {
                    // a truncated landing step says little about the next one
                    h_prop = h_prop.min(h.abs() * fac).max(h_prop * 0.5);
                } else {
                    h_prop = h.abs() * fac;
                }
            } else {
                h_prop = h.abs() * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h_prop < min_step {
                    return Err(Error::StepSizeUnderflow { t });
                }
            }
        }
        result.push(y.clone());
    }
    Ok(result)
}

fn initial_step(y: &DVector<f64>, f0: &DVector<f64>, span: f64, opts: &OdeOptions) -> f64 {
    if span == 0.0 {
        return 1.0;
    }
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..y.len() {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let n = y.len().max(1) as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-10 * span)
}
