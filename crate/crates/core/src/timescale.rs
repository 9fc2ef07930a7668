//! Switching sequences `θ`, the identification function `β`, and
//! finite-window diagnostics for almost periodicity of sequences.
//!
//! Every notion here quantifies over all of ℤ in the underlying theory; the
//! functions below can only certify it on a finite window, so every report
//! carries the window it was computed on.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form rule generating `θ_i` for every integer `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    /// `θ_i = offset + i·gap`
    Uniform { gap: f64, offset: f64 },
    /// `θ_i = i + amplitude·sin(omega·i)`
    Perturbed { amplitude: f64, omega: f64 },
}

impl Generator {
    pub fn value(&self, i: i64) -> f64 {
        match *self {
            Generator::Uniform { gap, offset } => offset + i as f64 * gap,
            Generator::Perturbed { amplitude, omega } => {
                let x = i as f64;
                x + amplitude * (omega * x).sin()
            }
        }
    }

    /// Index whose node is close to `t`; callers correct it by local search.
    fn guess(&self, t: f64) -> i64 {
        match *self {
            Generator::Uniform { gap, offset } => ((t - offset) / gap).floor() as i64,
            Generator::Perturbed { .. } => t.floor() as i64,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Generator::Uniform { gap, offset } => {
                if !(gap > 0.0 && gap.is_finite() && offset.is_finite()) {
                    return Err(Error::InvalidSequence(format!("uniform gap must be positive and finite, got {gap}")));
                }
            }
            Generator::Perturbed { amplitude, omega } => {
                // θ_{i+1} - θ_i >= 1 - 2|A||sin(ω/2)|
                if !(amplitude.is_finite() && omega.is_finite()) {
                    return Err(Error::InvalidSequence("perturbed parameters must be finite".into()));
                }
                if 2.0 * amplitude.abs() * (0.5 * omega).sin().abs() >= 1.0 {
                    return Err(Error::InvalidSequence(format!(
                        "perturbed sequence with amplitude {amplitude} and omega {omega} is not strictly increasing"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Inclusive range of node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexWindow {
    pub lo: i64,
    pub hi: i64,
}

impl IndexWindow {
    pub fn new(lo: i64, hi: i64) -> Self {
        IndexWindow { lo, hi }
    }

    pub fn len(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: i64) -> bool {
        self.lo <= i && i <= self.hi
    }
}

/// A strictly increasing switching sequence, stored on a finite window and
/// optionally extended on demand by a generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSequence {
    base_index: i64,
    values: Vec<f64>,
    generator: Option<Generator>,
}

impl ThetaSequence {
    pub fn uniform(gap: f64, offset: f64) -> Result<Self> {
        Self::generated(Generator::Uniform { gap, offset })
    }

    /// `θ_i = i`, the classical greatest-integer case.
    pub fn unit() -> Self {
        Self::uniform(1.0, 0.0).expect("unit sequence is valid")
    }

    pub fn perturbed(amplitude: f64, omega: f64) -> Result<Self> {
        Self::generated(Generator::Perturbed { amplitude, omega })
    }

    pub fn generated(generator: Generator) -> Result<Self> {
        generator.validate()?;
        Ok(ThetaSequence { base_index: 0, values: vec![generator.value(0)], generator: Some(generator) })
    }

    pub fn explicit(base_index: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSequence("explicit sequence needs at least one point".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSequence("explicit sequence contains non-finite values".into()));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSequence(format!("values not strictly increasing: {} then {}", w[0], w[1])));
        }
        Ok(ThetaSequence { base_index, values, generator: None })
    }

    pub fn generator(&self) -> Option<Generator> {
        self.generator
    }

    pub fn stored_window(&self) -> IndexWindow {
        IndexWindow::new(self.base_index, self.base_index + self.values.len() as i64 - 1)
    }

    pub fn stored_values(&self) -> &[f64] {
        &self.values
    }

    /// `θ_i`, from the stored window or the generator.
    pub fn theta(&self, i: i64) -> Result<f64> {
        let w = self.stored_window();
        if w.contains(i) {
            return Ok(self.values[(i - self.base_index) as usize]);
        }
        match self.generator {
            Some(g) => Ok(g.value(i)),
            None => Err(Error::WindowExhausted { index: i, lo: w.lo, hi: w.hi }),
        }
    }

    /// Materialise the generator over `[lo, hi]` (union with the stored window).
    pub fn extend_to(&mut self, lo: i64, hi: i64) -> Result<()> {
        let w = self.stored_window();
        let Some(g) = self.generator else {
            if lo < w.lo || hi > w.hi {
                let index = if lo < w.lo { lo } else { hi };
                return Err(Error::WindowExhausted { index, lo: w.lo, hi: w.hi });
            }
            return Ok(());
        };
        let new_lo = lo.min(w.lo);
        let new_hi = hi.max(w.hi);
        let mut values = Vec::with_capacity((new_hi - new_lo + 1) as usize);
        for i in new_lo..=new_hi {
            values.push(if w.contains(i) { self.values[(i - w.lo) as usize] } else { g.value(i) });
        }
        self.base_index = new_lo;
        self.values = values;
        Ok(())
    }

    /// Index shift: the returned sequence satisfies `θ'_i = θ_{i+shift}`.
    pub fn rebased(&self, shift: i64) -> Self {
        match self.generator {
            Some(Generator::Uniform { gap, offset }) => ThetaSequence {
                base_index: self.base_index - shift,
                values: self.values.clone(),
                generator: Some(Generator::Uniform { gap, offset: offset + shift as f64 * gap }),
            },
            Some(Generator::Perturbed { .. }) => {
                // no closed form for the shifted generator; keep an explicit window
                let w = self.stored_window();
                ThetaSequence { base_index: w.lo - shift, values: self.values.clone(), generator: None }
            }
            None => ThetaSequence { base_index: self.base_index - shift, values: self.values.clone(), generator: None },
        }
    }

    /// Values `θ_lo..=θ_hi`.
    pub fn window_values(&self, window: IndexWindow) -> Result<Vec<f64>> {
        (window.lo..=window.hi).map(|i| self.theta(i)).collect()
    }

    /// All `(i, θ_i)` with `lo <= θ_i <= hi`.
    pub fn points_in(&self, lo: f64, hi: f64) -> Result<Vec<(i64, f64)>> {
        if hi < lo {
            return Ok(Vec::new());
        }
        match self.generator {
            None => {
                let w = self.stored_window();
                Ok(self
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v >= lo && v <= hi)
                    .map(|(k, &v)| (w.lo + k as i64, v))
                    .collect())
            }
            Some(_) => {
                let mut i = self.beta(lo)?;
                if self.theta(i)? < lo {
                    i += 1;
                }
                let mut out = Vec::new();
                loop {
                    let v = self.theta(i)?;
                    if v > hi {
                        break;
                    }
                    out.push((i, v));
                    i += 1;
                }
                Ok(out)
            }
        }
    }

    /// The identification function: `i` with `θ_i <= t < θ_{i+1}`.
    pub fn beta(&self, t: f64) -> Result<i64> {
        if !t.is_finite() {
            return Err(Error::invalid(format!("cannot locate non-finite time {t}")));
        }
        match self.generator {
            Some(g) => {
                let mut i = g.guess(t);
                while self.theta(i)? > t {
                    i -= 1;
                }
                while self.theta(i + 1)? <= t {
                    i += 1;
                }
                Ok(i)
            }
            None => {
                let first = self.values[0];
                let last = *self.values.last().expect("non-empty");
                if t < first || t >= last {
                    return Err(Error::OutsideWindow { t, lo: first, hi: last });
                }
                let k = self.values.partition_point(|&v| v <= t) - 1;
                Ok(self.base_index + k as i64)
            }
        }
    }

    /// `θ_{β(t) - p_j}` for every deviation, in order.
    pub fn deviated_nodes(&self, t: f64, deviations: &[i64]) -> Result<Vec<f64>> {
        let i = self.beta(t)?;
        deviations.iter().map(|&p| self.theta(i - p)).collect()
    }

    /// Supremum over the window of `t - θ_{β(t)-p_j}`, i.e. the maximum of
    /// `θ_{i+1} - θ_{i-p_j}` over the intervals `[θ_i, θ_{i+1})` it contains.
    pub fn tau_deviation(&self, deviations: &[i64], window: IndexWindow) -> Result<f64> {
        if let Some(&p) = deviations.iter().find(|&&p| p < 0) {
            return Err(Error::NegativeDeviation(p));
        }
        if deviations.is_empty() {
            return Err(Error::EmptyRange("no deviations given".into()));
        }
        let mut best = f64::NEG_INFINITY;
        for i in window.lo..window.hi {
            let Ok(right) = self.theta(i + 1) else { continue };
            for &p in deviations {
                if let Ok(left) = self.theta(i - p) {
                    best = best.max(right - left);
                }
            }
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::EmptyRange(format!("no interval of {window:?} has its deviated nodes available")));
        }
        Ok(best)
    }

    /// Gap statistics on the window; `n0` counts the most points of the
    /// window in any closed interval of length `l0`.
    pub fn gap_stats(&self, window: IndexWindow, l0: f64) -> Result<GapStats> {
        if window.is_empty() {
            return Err(Error::EmptyRange("gap statistics need a non-empty window".into()));
        }
        let values = self.window_values(window)?;
        Ok(GapStats::from_points(&values, l0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub min_gap: f64,
    /// θ̄, the largest gap on the window.
    pub max_gap: f64,
    pub l0: f64,
    pub n0: usize,
}

impl GapStats {
    pub fn from_points(values: &[f64], l0: f64) -> Self {
        let mut min_gap = f64::INFINITY;
        let mut max_gap: f64 = 0.0;
        for w in values.windows(2) {
            let g = w[1] - w[0];
            min_gap = min_gap.min(g);
            max_gap = max_gap.max(g);
        }
        let slack = 1e-12 * l0.abs().max(1.0);
        let mut n0 = 0;
        let mut start = 0;
        for end in 0..values.len() {
            while values[end] - values[start] > l0 + slack {
                start += 1;
            }
            n0 = n0.max(end - start + 1);
        }
        GapStats { min_gap, max_gap, l0, n0 }
    }
}

/// Non-decreasing list of support points, possibly with repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    /// `(value, source_index)`: each value is `θ_{source_index}`.
    pub entries: Vec<(f64, i64)>,
    pub multiplicity_bound: usize,
}

impl Representative {
    pub fn new(entries: Vec<(f64, i64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
            return Err(Error::InvalidSequence("representative entries must be non-decreasing".into()));
        }
        let mut bound = 0;
        let mut run = 0;
        for (k, e) in entries.iter().enumerate() {
            if k > 0 && entries[k - 1].1 == e.1 {
                run += 1;
            } else {
                run = 1;
            }
            bound = bound.max(run);
        }
        Ok(Representative { entries, multiplicity_bound: bound })
    }

    /// Check that every value is the stated point of `support`.
    pub fn is_supported_by(&self, support: &ThetaSequence) -> bool {
        self.entries.iter().all(|&(v, i)| support.theta(i).map(|s| s == v).unwrap_or(false))
    }

    pub fn to_indexed(&self, base: i64) -> IndexedSequence {
        IndexedSequence::new(base, self.entries.iter().map(|e| e.0).collect())
    }
}

/// Real scalar sequence on a contiguous index window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedSequence {
    pub base: i64,
    pub values: Vec<f64>,
}

impl IndexedSequence {
    pub fn new(base: i64, values: Vec<f64>) -> Self {
        IndexedSequence { base, values }
    }

    pub fn from_fn(window: RangeInclusive<i64>, f: impl Fn(i64) -> f64) -> Self {
        let base = *window.start();
        IndexedSequence { base, values: window.map(f).collect() }
    }

    pub fn from_theta(seq: &ThetaSequence, window: IndexWindow) -> Result<Self> {
        Ok(IndexedSequence { base: window.lo, values: seq.window_values(window)? })
    }

    pub fn window(&self) -> IndexWindow {
        IndexWindow::new(self.base, self.base + self.values.len() as i64 - 1)
    }

    pub fn get(&self, i: i64) -> Option<f64> {
        let k = i - self.base;
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied()
    }

    /// `γ_i^j = γ_{i+j} - γ_i` over all `i` where both terms exist.
    pub fn difference(&self, j: i64) -> IndexedSequence {
        let w = self.window();
        let lo = w.lo.max(w.lo - j);
        let hi = w.hi.min(w.hi - j);
        if hi < lo {
            return IndexedSequence::new(lo, Vec::new());
        }
        IndexedSequence::from_fn(lo..=hi, |i| self.get(i + j).unwrap() - self.get(i).unwrap())
    }
}

/// Found ε-almost periods (integer shifts) or ε-translation numbers (real
/// shifts) on a tested window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostPeriodReport {
    pub epsilon: f64,
    pub periods: Vec<f64>,
    /// Closed range of shifts that was searched.
    pub search_range: [f64; 2],
    /// Window of indices or times over which the defining inequality was checked.
    pub tested_window: [f64; 2],
    /// Largest gap between consecutive found periods; `None` with fewer than two.
    pub max_gap_between_periods: Option<f64>,
    /// Every subinterval of the search range of length `density_bound`
    /// contains a period.
    pub relatively_dense_on_window: bool,
    pub density_bound: f64,
}

impl AlmostPeriodReport {
    pub fn new(epsilon: f64, mut periods: Vec<f64>, search_range: [f64; 2], tested_window: [f64; 2]) -> Self {
        periods.sort_by(f64::total_cmp);
        let max_gap_between_periods = periods.windows(2).map(|w| w[1] - w[0]).reduce(f64::max);
        let density_bound = 0.5 * (search_range[1] - search_range[0]);
        let mut report = AlmostPeriodReport {
            epsilon,
            periods,
            search_range,
            tested_window,
            max_gap_between_periods,
            relatively_dense_on_window: false,
            density_bound,
        };
        report.relatively_dense_on_window = report.is_dense_within(density_bound);
        report
    }

    pub fn with_density_bound(mut self, bound: f64) -> Self {
        self.density_bound = bound;
        self.relatively_dense_on_window = self.is_dense_within(bound);
        self
    }

    /// Largest empty stretch of the search range, edges included.
    pub fn max_hole(&self) -> f64 {
        let [lo, hi] = self.search_range;
        match (self.periods.first(), self.periods.last()) {
            (Some(&first), Some(&last)) => {
                let inner = self.max_gap_between_periods.unwrap_or(0.0);
                inner.max(first - lo).max(hi - last)
            }
            _ => hi - lo,
        }
    }

    pub fn is_dense_within(&self, bound: f64) -> bool {
        !self.periods.is_empty() && self.max_hole() <= bound
    }

    pub fn integer_periods(&self) -> Vec<i64> {
        self.periods.iter().map(|p| p.round() as i64).collect()
    }

    pub fn contains(&self, period: f64, tol: f64) -> bool {
        self.periods.iter().any(|p| (p - period).abs() <= tol)
    }
}

/// Integer `p` in `p_range` with `|a_{i+p} - a_i| < ε` for every `i` where
/// both terms lie in the window.
pub fn sequence_almost_periods(a: &IndexedSequence, epsilon: f64, p_range: RangeInclusive<i64>) -> Result<AlmostPeriodReport> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let n = a.values.len() as i64;
    if p_range.is_empty() {
        return Err(Error::EmptyRange("empty period range".into()));
    }
    let max_shift = p_range.start().abs().max(p_range.end().abs());
    if max_shift >= n {
        return Err(Error::EmptyRange(format!("window of {n} terms cannot test shifts up to {max_shift}")));
    }
    let periods = p_range
        .clone()
        .filter(|&p| {
            let (lo, hi) = if p >= 0 { (0, n - p) } else { (-p, n) };
            (lo..hi).all(|k| (a.values[(k + p) as usize] - a.values[k as usize]).abs() < epsilon)
        })
        .map(|p| p as f64)
        .collect();
    let w = a.window();
    Ok(AlmostPeriodReport::new(
        epsilon,
        periods,
        [*p_range.start() as f64, *p_range.end() as f64],
        [w.lo as f64, w.hi as f64],
    ))
}

/// Common almost periods of the difference sequences and the set `T_ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquipotentialReport {
    /// Integer `p` that are ε-almost periods of every `γ^j`, `j` in the range.
    pub common_periods: AlmostPeriodReport,
    /// Grid points `τ` for which some `q` has `|γ_i^q - τ| < ε` for all tested `i`.
    pub translation_set: AlmostPeriodReport,
    pub j_range: [i64; 2],
}

/// Finite-window evidence for equipotential almost periodicity of the
/// difference sequences `γ^j`. `T_ε` is sampled on a `τ`-grid of step `ε/4`.
pub fn equipotential_diagnostic(
    gamma: &IndexedSequence,
    epsilon: f64,
    j_range: RangeInclusive<i64>,
    p_range: RangeInclusive<i64>,
    tau_range: [f64; 2],
) -> Result<EquipotentialReport> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if j_range.is_empty() || p_range.is_empty() {
        return Err(Error::EmptyRange("empty j or p range".into()));
    }
    let n = gamma.values.len() as i64;
    let jmax = j_range.start().abs().max(j_range.end().abs());
    let pmax = p_range.start().abs().max(p_range.end().abs());
    if jmax + pmax >= n {
        return Err(Error::InsufficientWindow(format!(
            "window of {n} points cannot test |j| <= {jmax} together with |p| <= {pmax}"
        )));
    }

    let diffs: Vec<IndexedSequence> = j_range.clone().map(|j| gamma.difference(j)).collect();
    let mut common = Vec::new();
    for p in p_range.clone() {
        let ok = diffs.iter().all(|d| {
            let m = d.values.len() as i64;
            let (lo, hi) = if p >= 0 { (0, m - p) } else { (-p, m) };
            (lo..hi).all(|k| (d.values[(k + p) as usize] - d.values[k as usize]).abs() < epsilon)
        });
        if ok {
            common.push(p as f64);
        }
    }

    // For fixed q the admissible τ form the open interval (max γ^q - ε, min γ^q + ε).
    let intervals: Vec<(f64, f64)> = p_range
        .clone()
        .filter_map(|q| {
            let d = gamma.difference(q);
            if d.values.is_empty() {
                return None;
            }
            let lo = d.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = d.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (hi - epsilon < lo + epsilon).then_some((hi - epsilon, lo + epsilon))
        })
        .collect();
    let step = epsilon / 4.0;
    let steps = ((tau_range[1] - tau_range[0]) / step).floor().max(0.0) as usize;
    let taus: Vec<f64> = (0..=steps)
        .map(|k| tau_range[0] + k as f64 * step)
        .filter(|&tau| intervals.iter().any(|&(lo, hi)| lo < tau && tau < hi))
        .collect();

    let w = gamma.window();
    let tested = [w.lo as f64, w.hi as f64];
    Ok(EquipotentialReport {
        common_periods: AlmostPeriodReport::new(epsilon, common, [*p_range.start() as f64, *p_range.end() as f64], tested),
        translation_set: AlmostPeriodReport::new(epsilon, taus, tau_range, tested),
        j_range: [*j_range.start(), *j_range.end()],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub a_index: i64,
    pub a_value: f64,
    pub b_index: i64,
    pub b_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceMatching {
    pub equivalent: bool,
    pub epsilon: f64,
    pub window: [f64; 2],
    /// Monotone alignment witnessing the equivalence (empty when not equivalent).
    pub pairs: Vec<MatchedPair>,
    /// Largest number of pairs sharing one point.
    pub max_multiplicity: usize,
}

impl SequenceMatching {
    /// The two representatives encoded by the matching.
    pub fn representatives(&self) -> Result<(Representative, Representative)> {
        let a = Representative::new(self.pairs.iter().map(|p| (p.a_value, p.a_index)).collect())?;
        let b = Representative::new(self.pairs.iter().map(|p| (p.b_value, p.b_index)).collect())?;
        Ok((a, b))
    }
}

pub const DEFAULT_MULTIPLICITY_CAP: usize = 4;

/// ε-equivalence of two switching sequences on the time window `[t0, t1]`.
///
/// Points inside the window must all be matched; points in the ε-margins
/// outside it may be used but need not be. Matchings are monotone, cover
/// consecutive points, and use each point at most `multiplicity_cap` times.
pub fn eps_equivalent_sequences(
    a: &ThetaSequence,
    b: &ThetaSequence,
    epsilon: f64,
    window: [f64; 2],
    multiplicity_cap: usize,
) -> Result<SequenceMatching> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let pa = a.points_in(window[0] - epsilon, window[1] + epsilon)?;
    let pb = b.points_in(window[0] - epsilon, window[1] + epsilon)?;
    Ok(align_points(&pa, &pb, epsilon, window, multiplicity_cap))
}

/// Dynamic-programming alignment behind [`eps_equivalent_sequences`].
pub fn align_points(a: &[(i64, f64)], b: &[(i64, f64)], epsilon: f64, window: [f64; 2], cap: usize) -> SequenceMatching {
    let cap = cap.max(1);
    let mandatory = |v: f64| v >= window[0] && v <= window[1];
    let fail = || SequenceMatching { equivalent: false, epsilon, window, pairs: Vec::new(), max_multiplicity: 0 };

    let a_req: Vec<bool> = a.iter().map(|p| mandatory(p.1)).collect();
    let b_req: Vec<bool> = b.iter().map(|p| mandatory(p.1)).collect();
    if !a_req.iter().any(|&r| r) && !b_req.iter().any(|&r| r) {
        return SequenceMatching { equivalent: true, epsilon, window, pairs: Vec::new(), max_multiplicity: 0 };
    }
    if a.is_empty() || b.is_empty() {
        return fail();
    }

    // Band of admissible j for each i (both lists are sorted).
    let mut band = Vec::with_capacity(a.len());
    let mut lo = 0usize;
    for &(_, va) in a {
        while lo < b.len() && b[lo].1 <= va - epsilon {
            lo += 1;
        }
        let mut hi = lo;
        while hi < b.len() && b[hi].1 < va + epsilon {
            hi += 1;
        }
        band.push((lo, hi));
    }
    let mut offsets = Vec::with_capacity(a.len() + 1);
    offsets.push(0usize);
    for &(l, h) in &band {
        offsets.push(offsets.last().unwrap() + (h - l));
    }

    // Per cell: s = 0 means (row, col) counts (1, 1); s in 1..cap means the
    // row point is used s+1 times; s in cap..2cap-1 means the column point
    // is used s-cap+2 times.
    let states = 2 * cap - 1;
    let cell = |i: usize, j: usize| -> Option<usize> {
        let (l, h) = band[i];
        (j >= l && j < h).then(|| offsets[i] + (j - l))
    };
    const NONE: usize = usize::MAX;
    const START: usize = usize::MAX - 1;
    let mut pred = vec![NONE; offsets[a.len()] * states];

    let prefix_optional = |req: &[bool], k: usize| req[..k].iter().all(|&r| !r);
    let suffix_optional = |req: &[bool], k: usize| req[k + 1..].iter().all(|&r| !r);
    let counts = |s: usize| -> (usize, usize) {
        if s == 0 {
            (1, 1)
        } else if s < cap {
            (s + 1, 1)
        } else {
            (1, s - cap + 2)
        }
    };
    let encode = |r: usize, c: usize| -> Option<usize> {
        match (r, c) {
            (1, 1) => Some(0),
            (r, 1) if r <= cap => Some(r - 1),
            (1, c) if c <= cap => Some(cap + c - 2),
            _ => None,
        }
    };

    let mut end_state = None;
    for i in 0..a.len() {
        let (l, h) = band[i];
        for j in l..h {
            let id = cell(i, j).unwrap();
            if prefix_optional(&a_req, i) && prefix_optional(&b_req, j) && pred[id * states] == NONE {
                pred[id * states] = START;
            }
            for s in 0..states {
                if pred[id * states + s] == NONE {
                    continue;
                }
                let from = id * states + s;
                if end_state.is_none() && suffix_optional(&a_req, i) && suffix_optional(&b_req, j) {
                    end_state = Some((i, j, s));
                }
                let (r, c) = counts(s);
                let moves = [(i + 1, j + 1, Some(0)), (i, j + 1, encode(r + 1, 1)), (i + 1, j, encode(1, c + 1))];
                for (ni, nj, ns) in moves {
                    let Some(ns) = ns else { continue };
                    if ni >= a.len() || nj >= b.len() {
                        continue;
                    }
                    if let Some(nid) = cell(ni, nj) {
                        let slot = nid * states + ns;
                        if pred[slot] == NONE {
                            pred[slot] = from;
                        }
                    }
                }
            }
        }
    }

    let Some((mut i, mut j, mut s)) = end_state else {
        return fail();
    };
    // Walk predecessors back to the start cell.
    let cell_of = |flat: usize| -> (usize, usize) {
        let i = offsets.partition_point(|&o| o <= flat) - 1;
        (i, band[i].0 + (flat - offsets[i]))
    };
    let mut path = vec![(i, j)];
    let mut max_mult = 1;
    loop {
        let (r, c) = counts(s);
        max_mult = max_mult.max(r).max(c);
        let p = pred[cell(i, j).unwrap() * states + s];
        if p == START {
            break;
        }
        let (pi, pj) = cell_of(p / states);
        i = pi;
        j = pj;
        s = p % states;
        path.push((i, j));
    }
    path.reverse();
    let pairs = path
        .into_iter()
        .map(|(i, j)| MatchedPair { a_index: a[i].0, a_value: a[i].1, b_index: b[j].0, b_value: b[j].1 })
        .collect();
    SequenceMatching { equivalent: true, epsilon, window, pairs, max_multiplicity: max_mult }
}
