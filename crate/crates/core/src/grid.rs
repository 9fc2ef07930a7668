//! Solutions stored as node values plus dense samples on each interval
//! between consecutive switching nodes.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::quadrature::{lagrange_weights, stencil_around};

/// Dense samples of one interval `[θ_k, θ_{k+1}]`, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSamples {
    pub ts: Vec<f64>,
    pub values: Vec<DVector<f64>>,
}

/// Node values `x(θ_k)` for consecutive indices, dense samples per interval,
/// and the core region on which accuracy is claimed.
///
/// `intervals[k]` spans `nodes[k]..nodes[k+1]`; a trajectory may end with a
/// partial interval that starts at the last node.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution {
    pub dim: usize,
    pub first_node: i64,
    pub nodes: Vec<f64>,
    pub node_values: Vec<DVector<f64>>,
    pub intervals: Vec<IntervalSamples>,
    pub core: [f64; 2],
}

/// Interpolation stencil width (local polynomial of degree 5).
const STENCIL: usize = 6;

impl GridSolution {
    pub fn new(
        first_node: i64,
        nodes: Vec<f64>,
        node_values: Vec<DVector<f64>>,
        intervals: Vec<IntervalSamples>,
        core: [f64; 2],
    ) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != node_values.len() {
            return Err(Error::Dimension("one value per node required".into()));
        }
        if intervals.len() + 1 != nodes.len() && intervals.len() != nodes.len() {
            return Err(Error::Dimension(format!("{} intervals do not fit {} nodes", intervals.len(), nodes.len())));
        }
        let dim = node_values[0].len();
        if node_values.iter().chain(intervals.iter().flat_map(|i| i.values.iter())).any(|v| v.len() != dim) {
            return Err(Error::Dimension("inconsistent state dimension".into()));
        }
        if intervals.iter().any(|i| i.ts.len() < 2 || i.ts.len() != i.values.len()) {
            return Err(Error::Dimension("every interval needs at least two samples".into()));
        }
        Ok(GridSolution { dim, first_node, nodes, node_values, intervals, core })
    }

    /// Sample `f` on the given nodes, `samples` points per interval.
    pub fn from_fn(
        first_node: i64,
        nodes: &[f64],
        samples: usize,
        core: [f64; 2],
        f: impl Fn(f64) -> DVector<f64>,
    ) -> Result<Self> {
        let samples = samples.max(2);
        let intervals = nodes
            .windows(2)
            .map(|w| {
                let ts = uniform_samples(w[0], w[1], samples);
                let values = ts.iter().map(|&t| f(t)).collect();
                IntervalSamples { ts, values }
            })
            .collect();
        let node_values = nodes.iter().map(|&t| f(t)).collect();
        Self::new(first_node, nodes.to_vec(), node_values, intervals, core)
    }

    pub fn constant(first_node: i64, nodes: &[f64], samples: usize, core: [f64; 2], value: DVector<f64>) -> Result<Self> {
        Self::from_fn(first_node, nodes, samples, core, |_| value.clone())
    }

    pub fn last_node(&self) -> i64 {
        self.first_node + self.nodes.len() as i64 - 1
    }

    /// Time span covered by the dense samples.
    pub fn span(&self) -> [f64; 2] {
        let last = self.intervals.last().map(|i| *i.ts.last().unwrap()).unwrap_or(self.nodes[0]);
        [self.nodes[0], last]
    }

    pub fn node_value(&self, index: i64) -> Result<&DVector<f64>> {
        let k = index - self.first_node;
        if k < 0 || k as usize >= self.node_values.len() {
            return Err(Error::WindowExhausted { index, lo: self.first_node, hi: self.last_node() });
        }
        Ok(&self.node_values[k as usize])
    }

    /// Node value with indices outside the stored range clamped to the ends.
    pub fn node_value_clamped(&self, index: i64) -> &DVector<f64> {
        let k = (index - self.first_node).clamp(0, self.node_values.len() as i64 - 1);
        &self.node_values[k as usize]
    }

    /// Interval containing `t` (right-continuous), clamped to the stored range.
    pub fn interval_of(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|&n| n <= t).saturating_sub(1);
        k.min(self.intervals.len().saturating_sub(1))
    }

    /// Value at `t` by local interpolation within its interval; times outside
    /// the span are clamped to its ends.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        if self.intervals.is_empty() {
            return self.node_values[0].clone();
        }
        let [lo, hi] = self.span();
        let t = t.clamp(lo, hi);
        let piece = &self.intervals[self.interval_of(t)];
        let ts = &piece.ts;
        let t = t.clamp(ts[0], *ts.last().unwrap());
        let pos = ts.partition_point(|&x| x <= t).saturating_sub(1).min(ts.len() - 2);
        if t == ts[pos] {
            return piece.values[pos].clone();
        }
        let range = stencil_around(pos, ts.len(), STENCIL);
        let w = lagrange_weights(t, &ts[range.clone()]);
        let mut out = DVector::zeros(self.dim);
        for (w, v) in w.iter().zip(&piece.values[range]) {
            out.axpy(*w, v, 1.0);
        }
        out
    }

    pub fn eval_scalar(&self, t: f64) -> f64 {
        self.eval(t)[0]
    }

    /// All `(interval_index, t, value)` samples, interval starts deduplicated.
    pub fn samples(&self) -> impl Iterator<Item = (i64, f64, &DVector<f64>)> + '_ {
        let count = self.intervals.len();
        self.intervals.iter().enumerate().flat_map(move |(k, piece)| {
            let take = if k + 1 == count { piece.ts.len() } else { piece.ts.len() - 1 };
            let index = self.first_node + k as i64;
            piece.ts.iter().zip(&piece.values).take(take).map(move |(&t, v)| {
                // the final sample of the last full interval sits on the next node
                let idx = if k + 1 == count && t == self.nodes.get(k + 1).copied().unwrap_or(f64::NAN) { index + 1 } else { index };
                (idx, t, v)
            })
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_on([f64::NEG_INFINITY, f64::INFINITY])
    }

    /// Sup norm over samples and nodes lying in `range`.
    pub fn sup_norm_on(&self, range: [f64; 2]) -> f64 {
        let inside = |t: f64| t >= range[0] && t <= range[1];
        let nodes = self.nodes.iter().zip(&self.node_values).filter(|(t, _)| inside(**t)).map(|(_, v)| v.norm());
        let dense = self.samples().filter(|(_, t, _)| inside(*t)).map(|(_, _, v)| v.norm());
        nodes.chain(dense).fold(0.0, f64::max)
    }

    /// `sup ‖self(t) − other(t)‖` over the samples of `self` in `range`.
    pub fn distance_on(&self, other: &GridSolution, range: [f64; 2]) -> f64 {
        self.samples()
            .filter(|(_, t, _)| *t >= range[0] && *t <= range[1])
            .map(|(_, t, v)| (v - other.eval(t)).norm())
            .fold(0.0, f64::max)
    }

    /// Largest node jump between a node value and the left-interval limit.
    pub fn continuity_defect(&self) -> f64 {
        self.intervals
            .iter()
            .enumerate()
            .filter_map(|(k, piece)| {
                let end = *piece.ts.last().unwrap();
                let node = self.nodes.get(k + 1)?;
                (end == *node).then(|| (piece.values.last().unwrap() - &self.node_values[k + 1]).norm())
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, x_1..x_n, interval_index`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.dim {
            out.push_str(&format!(",x_{k}"));
        }
        out.push_str(",interval_index\n");
        for (idx, t, v) in self.samples() {
            out.push_str(&format!("{t:.16e}"));
            for x in v.iter() {
                out.push_str(&format!(",{x:.16e}"));
            }
            out.push_str(&format!(",{idx}\n"));
        }
        out
    }
}

/// Samples `(t, x)` from the text written by [`GridSolution::to_csv`].
pub fn read_csv_samples(text: &str) -> Result<Vec<(f64, DVector<f64>)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty CSV"))?;
    let dim = header.split(',').filter(|c| c.starts_with("x_")).count();
    if dim == 0 {
        return Err(Error::invalid("CSV header names no state columns"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(row, line)| {
            let fields: Vec<f64> = line
                .split(',')
                .take(dim + 1)
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("CSV row {}: {e}", row + 2)))?;
            if fields.len() != dim + 1 {
                return Err(Error::invalid(format!("CSV row {} is short", row + 2)));
            }
            Ok((fields[0], DVector::from_column_slice(&fields[1..])))
        })
        .collect()
}

pub fn uniform_samples(a: f64, b: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let mut ts: Vec<f64> = (0..count).map(|j| a + (b - a) * j as f64 / (count - 1) as f64).collect();
    ts[count - 1] = b;
    ts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_samples_round_trip_exactly() {
        let sol = GridSolution::from_fn(0, &nodes(), 8, [0.0, 5.0], |t| DVector::from_vec(vec![t.sin() / 3.0, (-t).exp()])).unwrap();
        let back = read_csv_samples(&sol.to_csv()).unwrap();
        let direct: Vec<_> = sol.samples().map(|(_, t, v)| (t, v.clone())).collect();
        assert_eq!(back, direct);
        assert!(read_csv_samples("t,interval_index\n").is_err());
    }

    fn nodes() -> Vec<f64> {
        (0..=5).map(|k| k as f64).collect()
    }

    #[test]
    fn interpolation_is_accurate_for_smooth_data() {
        let g = GridSolution::from_fn(0, &nodes(), 16, [0.0, 5.0], |t| DVector::from_vec(vec![t.sin(), t * t])).unwrap();
        for t in [0.1, 1.0, 2.37, 4.999] {
            let v = g.eval(t);
            assert!((v[0] - t.sin()).abs() < 1e-8);
            assert!((v[1] - t * t).abs() < 1e-12);
        }
        assert_eq!(g.continuity_defect(), 0.0);
    }

    #[test]
    fn evaluation_clamps_outside_span() {
        let g = GridSolution::from_fn(3, &nodes(), 8, [0.0, 5.0], |t| DVector::from_element(1, t)).unwrap();
        assert_eq!(g.eval_scalar(-2.0), 0.0);
        assert_eq!(g.eval_scalar(9.0), 5.0);
        assert_eq!(g.node_value(4).unwrap()[0], 1.0);
        assert!(g.node_value(9).is_err());
        assert_eq!(g.node_value_clamped(100)[0], 5.0);
    }

    #[test]
    fn csv_lists_each_node_once() {
        let g = GridSolution::from_fn(-1, &nodes(), 3, [0.0, 5.0], |t| DVector::from_element(1, t)).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_1,interval_index");
        // 5 intervals × 2 new samples + final node
        assert_eq!(lines.len(), 1 + 11);
        assert!(lines[1].ends_with(",-1"));
        assert!(lines.last().unwrap().ends_with(",4"));
        let t: f64 = lines[3].split(',').next().unwrap().parse().unwrap();
        assert_eq!(t, 1.0);
        assert!(lines[3].ends_with(",0"));
    }

    #[test]
    fn sup_norm_respects_range() {
        let g = GridSolution::from_fn(0, &nodes(), 5, [0.0, 5.0], |t| DVector::from_element(1, t)).unwrap();
        assert_eq!(g.sup_norm(), 5.0);
        assert_eq!(g.sup_norm_on([0.0, 2.0]), 2.0);
    }
}
