//! JSON problem files and versioned reports.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::apkit::{Shape, TrigPolynomial, TrigTerm};
use crate::apsolve::SolverConfig;
use crate::error::{Error, Result};
use crate::ivpsim::{InitialData, IvpOptions};
use crate::lindich::{
    estimate_dichotomy, spectral_dichotomy, spectral_dichotomy_with, DichotomyData, EstimationGrid, ExpBound, LinearSystem,
    DEFAULT_SAMPLES_PER_INTERVAL,
};
use crate::logistic::{LogisticConfig, LogisticProblem, LogisticRate};
use crate::ode::OdeOptions;
use crate::problem::{EPCAGProblem, Nonlinearity};
use crate::timescale::{IndexedSequence, ThetaSequence};

pub const REPORT_SCHEMA: &str = "epcag/report/v1";

fn schema_err(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(schema_err(path, "expected a non-empty square matrix given as rows"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTermSpec {
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin: Option<Vec<Vec<f64>>>,
}

/// `constant + Σ cos_k cos(ω_k t) + sin_k sin(ω_k t)` with matrix coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTrigSpec {
    pub constant: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<MatrixTermSpec>,
}

impl MatrixTrigSpec {
    pub fn constant(m: &DMatrix<f64>) -> Self {
        MatrixTrigSpec { constant: rows(m), terms: Vec::new() }
    }

    pub fn build(&self, path: &str) -> Result<TrigPolynomial> {
        let c = matrix(&self.constant, &format!("{path}.constant"))?;
        let n = c.nrows();
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let part = |m: &Option<Vec<Vec<f64>>>, name: &str| -> Result<DMatrix<f64>> {
                    let p = format!("{path}.terms[{k}].{name}");
                    match m {
                        Some(r) => matrix(r, &p).and_then(|m| if m.nrows() == n { Ok(m) } else { Err(schema_err(&p, "size differs from constant")) }),
                        None => Ok(DMatrix::zeros(n, n)),
                    }
                };
                Ok(TrigTerm { omega: t.omega, cos: part(&t.cos, "cos")?, sin: part(&t.sin, "sin")? })
            })
            .collect::<Result<_>>()?;
        TrigPolynomial::new(Shape::Matrix(n), c, terms).map_err(|e| schema_err(path, e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorTermSpec {
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorTrigSpec {
    pub constant: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<VectorTermSpec>,
}

impl VectorTrigSpec {
    pub fn build(&self, path: &str) -> Result<TrigPolynomial> {
        let n = self.constant.len();
        if n == 0 {
            return Err(schema_err(&format!("{path}.constant"), "empty vector"));
        }
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let part = |v: &Option<Vec<f64>>, name: &str| -> Result<DMatrix<f64>> {
                    match v {
                        Some(v) if v.len() == n => Ok(DMatrix::from_column_slice(n, 1, v)),
                        Some(_) => Err(schema_err(&format!("{path}.terms[{k}].{name}"), "length differs from constant")),
                        None => Ok(DMatrix::zeros(n, 1)),
                    }
                };
                Ok(TrigTerm { omega: t.omega, cos: part(&t.cos, "cos")?, sin: part(&t.sin, "sin")? })
            })
            .collect::<Result<_>>()?;
        TrigPolynomial::new(Shape::Vector(n), DMatrix::from_column_slice(n, 1, &self.constant), terms)
            .map_err(|e| schema_err(path, e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarTermSpec {
    pub omega: f64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarTrigSpec {
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<ScalarTermSpec>,
}

impl ScalarTrigSpec {
    pub fn build(&self, path: &str) -> Result<TrigPolynomial> {
        let terms: Vec<(f64, f64, f64)> = self.terms.iter().map(|t| (t.omega, t.cos, t.sin)).collect();
        TrigPolynomial::scalar(self.constant, &terms).map_err(|e| schema_err(path, e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `Σ C_j z_j + g(t)`
    Affine { coeffs: Vec<Vec<Vec<f64>>>, forcing: VectorTrigSpec },
    /// `Σ C_j tanh(z_j) + g(t)`
    Saturated { coeffs: Vec<Vec<Vec<f64>>>, forcing: VectorTrigSpec },
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Nonlinearity> {
        let (coeffs, forcing, saturated) = match self {
            NonlinearitySpec::Affine { coeffs, forcing } => (coeffs, forcing, false),
            NonlinearitySpec::Saturated { coeffs, forcing } => (coeffs, forcing, true),
        };
        let g = forcing.build("f.forcing")?;
        let c = coeffs.iter().enumerate().map(|(j, m)| matrix(m, &format!("f.coeffs[{j}]"))).collect::<Result<Vec<_>>>()?;
        let f = if saturated { Nonlinearity::saturated(c, g) } else { Nonlinearity::affine(c, g) };
        f.map_err(|e| schema_err("f", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    /// `θ_i = offset + i·gap`
    Uniform {
        #[serde(default = "one")]
        gap: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `θ_i = i + amplitude·sin(omega·i)`
    Perturbed { amplitude: f64, omega: f64 },
    /// `θ_{base_index + k} = values[k]`
    Explicit { base_index: i64, values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Uniform { gap: 1.0, offset: 0.0 }
    }
}

impl ThetaSpec {
    pub fn build(&self, path: &str) -> Result<ThetaSequence> {
        let seq = match self {
            ThetaSpec::Uniform { gap, offset } => ThetaSequence::uniform(*gap, *offset),
            ThetaSpec::Perturbed { amplitude, omega } => ThetaSequence::perturbed(*amplitude, *omega),
            ThetaSpec::Explicit { base_index, values } => ThetaSequence::explicit(*base_index, values.clone()),
        };
        seq.map_err(|e| schema_err(path, e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub k: f64,
    pub sigma: f64,
}

impl BoundSpec {
    fn build(&self, path: &str) -> Result<ExpBound> {
        ExpBound::new(self.k, self.sigma).map_err(|e| schema_err(path, e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DichotomySpec {
    /// Spectral splitting of a constant `A`.
    Spectral {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
    },
    /// Constants supplied by the user.
    Override {
        projection: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stable: Option<BoundSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unstable: Option<BoundSpec>,
    },
    /// Constants fitted on a sample grid for a candidate projection.
    Estimated {
        projection: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        span: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
    },
}

impl DichotomySpec {
    pub fn build(&self, system: &LinearSystem) -> Result<DichotomyData> {
        let path = "dichotomy";
        match self {
            DichotomySpec::Spectral { margin } => {
                if !system.is_constant() {
                    return Err(schema_err(path, "spectral splitting needs a constant A"));
                }
                let a = system.coefficient().mean();
                match margin {
                    Some(m) => spectral_dichotomy_with(&a, *m, 2000),
                    None => spectral_dichotomy(&a),
                }
            }
            DichotomySpec::Override { projection, stable, unstable } => {
                let p = matrix(projection, "dichotomy.projection")?;
                let s = stable.map(|b| b.build("dichotomy.stable")).transpose()?;
                let u = unstable.map(|b| b.build("dichotomy.unstable")).transpose()?;
                DichotomyData::from_override(p, s, u).map_err(|e| schema_err(path, e.to_string()))
            }
            DichotomySpec::Estimated { projection, span, step, horizon } => {
                let p = matrix(projection, "dichotomy.projection")?;
                let d = EstimationGrid::default();
                let grid = EstimationGrid { span: span.unwrap_or(d.span), step: step.unwrap_or(d.step), horizon: horizon.unwrap_or(d.horizon), ..d };
                estimate_dichotomy(system, &p, &grid)
            }
        }
    }
}

fn default_core() -> [f64; 2] {
    [0.0, 20.0]
}
fn default_tol() -> f64 {
    1e-8
}
fn default_iterations() -> usize {
    500
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES_PER_INTERVAL
}
fn default_rtol() -> f64 {
    1e-10
}
fn default_trials() -> usize {
    32
}
fn default_t_end() -> f64 {
    20.0
}
fn is_false(b: &bool) -> bool {
    !b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_core")]
    pub core: [f64; 2],
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cut: Option<f64>,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_samples")]
    pub samples_per_interval: usize,
    #[serde(default, skip_serializing_if = "is_false")]
    pub explore: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            core: default_core(),
            tol: default_tol(),
            t_cut: None,
            max_iterations: default_iterations(),
            samples_per_interval: default_samples(),
            explore: false,
        }
    }
}

impl SolverSpec {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            core: self.core,
            tol: self.tol,
            t_cut: self.t_cut,
            max_iterations: self.max_iterations,
            samples_per_interval: self.samples_per_interval,
            explore: self.explore,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// The same vector on every history node.
    Constant {
        value: Vec<f64>,
        #[serde(default)]
        start: i64,
    },
    /// `η^j` at node `start − p_j`.
    Eta {
        values: Vec<Vec<f64>>,
        #[serde(default)]
        start: i64,
    },
    /// Node values from `first` up to the starting node.
    History { first: i64, values: Vec<Vec<f64>> },
}

impl InitialSpec {
    pub fn build(&self, deviations: &[i64]) -> Result<InitialData> {
        let path = "simulate.initial";
        let depth = deviations.iter().copied().max().unwrap_or(0).max(0);
        let vecs = |v: &[Vec<f64>]| v.iter().map(|x| DVector::from_column_slice(x)).collect::<Vec<_>>();
        let data = match self {
            InitialSpec::Constant { value, start } => Ok(InitialData::constant(*start, depth, DVector::from_column_slice(value))),
            InitialSpec::Eta { values, start } => InitialData::from_eta(*start, deviations, &vecs(values)),
            InitialSpec::History { first, values } => InitialData::new(*first, vecs(values)),
        };
        data.map_err(|e| schema_err(path, e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub t_end: f64,
    pub initial: InitialSpec,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_samples")]
    pub samples_per_interval: usize,
    /// Start of the window compared against a bounded solution found in the
    /// output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_from: Option<f64>,
}

impl SimulateSpec {
    pub fn ivp_options(&self) -> IvpOptions {
        IvpOptions { ode: OdeOptions::with_rtol(self.rtol), samples_per_interval: self.samples_per_interval }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    pub delta: f64,
    /// Decay rate; `σ/2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticSpec {
    pub a: ScalarTrigSpec,
    #[serde(rename = "f")]
    pub rate: LogisticRate,
    pub deviations: Vec<i64>,
    #[serde(rename = "H")]
    pub h_box: f64,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default = "default_core")]
    pub core: [f64; 2],
    #[serde(default = "default_logistic_tol")]
    pub tol: f64,
    #[serde(default = "default_logistic_iterations")]
    pub max_iterations: usize,
    /// Initial populations for forward runs; random when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starts: Vec<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

fn default_logistic_tol() -> f64 {
    1e-10
}
fn default_logistic_iterations() -> usize {
    200
}

impl LogisticSpec {
    pub fn build(&self) -> Result<LogisticProblem> {
        let a = self.a.build("logistic.a")?;
        let theta = self.theta.build("logistic.theta")?;
        LogisticProblem::new(a, self.rate.clone(), self.deviations.clone(), self.h_box, theta).map_err(|e| schema_err("logistic", e.to_string()))
    }

    pub fn config(&self) -> LogisticConfig {
        LogisticConfig { core: self.core, tol: self.tol, max_iterations: self.max_iterations, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSource {
    /// `a_{base + k} = values[k]`
    Values { base: i64, values: Vec<f64> },
    /// `a_i = amplitude·sin(2π·frequency·i)` for `i` in the window.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: f64,
        window: [i64; 2],
    },
    /// `θ_{i+j} − θ_i` of the top-level switching sequence.
    ThetaDifferences { j: i64, window: [i64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub source: SequenceSource,
    pub epsilon: f64,
    /// Candidate periods `p` tested, inclusive.
    pub periods: [i64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_bound: Option<f64>,
}

impl SequenceSpec {
    pub fn build(&self, theta: &ThetaSpec) -> Result<IndexedSequence> {
        match &self.source {
            SequenceSource::Values { base, values } => {
                if values.is_empty() {
                    return Err(schema_err("sequence.source.values", "empty sequence"));
                }
                Ok(IndexedSequence::new(*base, values.clone()))
            }
            SequenceSource::Sine { amplitude, frequency, window } => {
                let two_pi = std::f64::consts::TAU;
                Ok(IndexedSequence::from_fn(window[0]..=window[1], |i| amplitude * (two_pi * frequency * i as f64).sin()))
            }
            SequenceSource::ThetaDifferences { j, window } => {
                let seq = theta.build("theta")?;
                let values = (window[0]..=window[1]).map(|i| Ok(seq.theta(i + j)? - seq.theta(i)?)).collect::<Result<Vec<f64>>>()?;
                Ok(IndexedSequence::new(window[0], values))
            }
        }
    }
}

/// A problem file; each command reads the sections it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixTrigSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<NonlinearitySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviations: Vec<i64>,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<DichotomySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic: Option<LogisticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSpec>,
    #[serde(default)]
    pub seed: u64,
}

/// Parse a problem file, naming the offending key path on failure.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path: if path.is_empty() { ".".into() } else { path }, message: e.inner().to_string() }
    })?;
    file.validate()?;
    Ok(file)
}

fn positive(value: f64, path: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(schema_err(path, format!("must be positive, got {value}")))
    }
}

fn ordered(range: [f64; 2], path: &str) -> Result<()> {
    if range[0] < range[1] {
        Ok(())
    } else {
        Err(schema_err(path, format!("expected lo < hi, got {range:?}")))
    }
}

impl ProblemFile {
    /// Numeric checks that the types alone do not express.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.solver {
            ordered(s.core, "solver.core")?;
            positive(s.tol, "solver.tol")?;
            if let Some(t) = s.t_cut {
                if !(t >= 0.0) {
                    return Err(schema_err("solver.t_cut", "must be non-negative"));
                }
            }
        }
        if let Some(s) = &self.simulate {
            positive(s.rtol, "simulate.rtol")?;
        }
        if let Some(s) = &self.stability {
            if !(s.delta >= 0.0) {
                return Err(schema_err("stability.delta", "must be non-negative"));
            }
            if let Some(a) = s.a {
                positive(a, "stability.a")?;
            }
            positive(s.t_end, "stability.t_end")?;
        }
        if let Some(l) = &self.logistic {
            positive(l.h_box, "logistic.H")?;
            positive(l.tol, "logistic.tol")?;
            ordered(l.core, "logistic.core")?;
            if let Some(k) = l.starts.iter().position(|&n| !(n > 0.0)) {
                return Err(schema_err(&format!("logistic.starts[{k}]"), "initial populations must be positive"));
            }
        }
        if let Some(s) = &self.sequence {
            positive(s.epsilon, "sequence.epsilon")?;
            if s.periods[0] > s.periods[1] {
                return Err(schema_err("sequence.periods", "expected lo <= hi"));
            }
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverSpec {
        self.solver.clone().unwrap_or_default()
    }

    /// The quasilinear problem from `A`, `f`, `deviations`, `theta` and `dichotomy`.
    pub fn build_problem(&self) -> Result<EPCAGProblem> {
        let a = self.a.as_ref().ok_or_else(|| schema_err("A", "missing; this command needs the linear part"))?;
        let f = self.f.as_ref().ok_or_else(|| schema_err("f", "missing; this command needs the nonlinearity"))?;
        if self.deviations.is_empty() {
            return Err(schema_err("deviations", "at least one deviation is required"));
        }
        let system = LinearSystem::new(a.build("A")?, OdeOptions::default()).map_err(|e| schema_err("A", e.to_string()))?;
        let dichotomy = match &self.dichotomy {
            Some(d) => d.build(&system)?,
            None if system.is_constant() => spectral_dichotomy(&system.coefficient().mean())?,
            None => return Err(schema_err("dichotomy", "required when A is time dependent")),
        };
        let theta = self.theta.build("theta")?;
        EPCAGProblem::new(system, f.build()?, self.deviations.clone(), theta, dichotomy).map_err(|e| schema_err(".", e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// A checked condition or numerical criterion failed.
    Failed,
}

/// Output of every command, carrying the resolved input for reproduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub config: ProblemFile,
    pub result: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, config: ProblemFile, result: serde_json::Value) -> Self {
        Report { schema: REPORT_SCHEMA.into(), command: command.into(), status: Status::Ok, failed_condition: None, message: None, config, result }
    }

    pub fn failed(mut self, condition: impl Into<String>, message: impl Into<String>) -> Self {
        self.status = Status::Failed;
        self.failed_condition = Some(condition.into());
        self.message = Some(message.into());
        self
    }

    /// Parse and check the schema id and the embedded configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let report: Report = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Schema { path: e.path().to_string(), message: e.inner().to_string() })?;
        if report.schema != REPORT_SCHEMA {
            return Err(schema_err("schema", format!("unknown report schema {:?}", report.schema)));
        }
        report.config.validate()?;
        Ok(report)
    }
}
