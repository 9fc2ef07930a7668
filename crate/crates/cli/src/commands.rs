use std::fs;
use std::path::Path;

use epcag::apsolve::picard_solve;
use epcag::grid::read_csv_samples;
use epcag::ivpsim::{solve_ivp, stability_constants, stability_experiment, ExperimentConfig, IvpOptions, StabilityReport};
use epcag::lindich::ExpBound;
use epcag::logistic::{kernel_bounds, logistic_analysis, mean_value, mu_sup, simulate_logistic, KernelFit};
use epcag::schema::{ProblemFile, SolverSpec, StabilitySpec};
use epcag::timescale::{sequence_almost_periods, IndexWindow};
use epcag::{EPCAGProblem, Error, Report, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub core: Option<[f64; 2]>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

fn bad(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

/// Fold command-line overrides into the file so reports carry the resolved input.
pub fn apply_overrides(command: &str, file: &mut ProblemFile, o: &Overrides) -> Result<()> {
    if let Some(tol) = o.tol {
        if !(tol > 0.0) {
            return Err(bad("--tol", "must be positive"));
        }
    }
    if let Some([lo, hi]) = o.core {
        if !(lo < hi) {
            return Err(bad("--core", "expected LO < HI"));
        }
    }
    if let Some(t) = o.t_end {
        if !t.is_finite() {
            return Err(bad("--t-end", "must be finite"));
        }
    }
    if o.trials == Some(0) {
        return Err(bad("--trials", "must be positive"));
    }
    if let Some(seed) = o.seed {
        file.seed = seed;
    }
    if command == "logistic" {
        let spec = file.logistic.as_mut().ok_or_else(|| bad("logistic", "missing"))?;
        if let Some(tol) = o.tol {
            spec.tol = tol;
        }
        if let Some(core) = o.core {
            spec.core = core;
        }
        if let Some(t) = o.t_end {
            spec.t_end = t;
        }
        return Ok(());
    }
    if o.tol.is_some() || o.core.is_some() {
        let solver = file.solver.get_or_insert_with(SolverSpec::default);
        if let Some(tol) = o.tol {
            solver.tol = tol;
        }
        if let Some(core) = o.core {
            solver.core = core;
        }
    }
    if let Some(t) = o.t_end {
        match command {
            "simulate" => file.simulate.as_mut().ok_or_else(|| bad("simulate", "missing"))?.t_end = t,
            "stability" => file.stability.as_mut().ok_or_else(|| bad("stability", "missing"))?.t_end = t,
            _ => {}
        }
    }
    if let Some(n) = o.trials {
        if let Some(s) = file.stability.as_mut() {
            s.trials = n;
        }
    }
    Ok(())
}

/// Condition named in the report for numerical failures; `None` marks invalid input.
pub fn failed_condition(e: &Error) -> Option<String> {
    let name = match e {
        Error::NonContractive { .. } => "contraction",
        Error::ConditionFailed { condition, .. } => condition,
        Error::ImaginaryAxisEigenvalue { .. } | Error::NoEnvelope(_) | Error::Singular(_) => "C4",
        Error::IterationCap { .. } => "convergence",
        Error::StepSizeUnderflow { .. } | Error::TooManySteps(_) => "integration",
        Error::TruncationBudget(_) => "truncation",
        _ => return None,
    };
    Some(name.to_string())
}

pub fn dispatch(command: &str, file: &ProblemFile, out: &Path) -> Result<Report> {
    match command {
        "simulate" => simulate(file, out),
        "solve-ap" => solve_ap(file, out),
        "check" => check(file),
        "stability" => stability(file, out),
        "sequence" => sequence(file),
        "logistic" => logistic(file, out),
        other => Err(Error::Invalid(format!("unknown command {other}"))),
    }
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(out.join(name), text).map_err(|e| Error::Invalid(format!("writing {name}: {e}")))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn solve_ap(file: &ProblemFile, out: &Path) -> Result<Report> {
    let problem = file.build_problem()?;
    let (psi, solve) = picard_solve(&problem, &file.solver().to_config())?;
    write(out, "solution.csv", &psi.to_csv())?;
    let result = json!({
        "contraction_margin": problem.contraction_margin()?,
        "lipschitz": problem.lipschitz()?,
        "kernel_weight": problem.dichotomy.kernel_weight(),
        "sup_norm": psi.sup_norm_on(psi.core),
        "solve": to_value(&solve),
    });
    let report = Report::new("solve-ap", file.clone(), result);
    Ok(if solve.converged { report } else { report.failed("convergence", "Picard iteration did not reach the tolerance") })
}

fn simulate(file: &ProblemFile, out: &Path) -> Result<Report> {
    let spec = file.simulate.as_ref().ok_or_else(|| bad("simulate", "missing; this command needs initial data and t_end"))?;
    let problem = file.build_problem()?;
    let init = spec.initial.build(&problem.deviations)?;
    let traj = solve_ivp(&problem, &init, spec.t_end, &spec.ivp_options())?;
    write(out, "trajectory.csv", &traj.grid.to_csv())?;
    let t0 = problem.theta.theta(init.start())?;
    let mut result = json!({
        "start_time": t0,
        "t_end": spec.t_end,
        "final_value": traj.eval(spec.t_end).as_slice(),
        "sup_norm": traj.grid.sup_norm(),
        "continuity_defect": traj.grid.continuity_defect(),
    });
    let solution = out.join("solution.csv");
    if solution.exists() {
        let text = fs::read_to_string(&solution).map_err(|e| Error::Invalid(format!("reading solution.csv: {e}")))?;
        let from = spec.compare_from.unwrap_or(0.5 * (t0 + spec.t_end));
        let mut sup: f64 = 0.0;
        let mut count = 0usize;
        for (t, x) in read_csv_samples(&text)? {
            if t >= from && t <= spec.t_end {
                sup = sup.max((x - traj.eval(t)).norm());
                count += 1;
            }
        }
        result["solution_agreement"] = json!({ "range": [from, spec.t_end], "samples": count, "sup_diff": if count > 0 { Some(sup) } else { None } });
    }
    Ok(Report::new("simulate", file.clone(), result))
}

/// Node indices whose intervals cover `[lo, hi]`.
fn node_window(problem: &EPCAGProblem, lo: f64, hi: f64) -> Result<IndexWindow> {
    Ok(IndexWindow::new(problem.theta.beta(lo)? - problem.max_delay(), problem.theta.beta(hi)? + 1))
}

/// The envelope `K e^{−σ(t−s)}` of the whole Cauchy matrix, available when `P = I`.
fn one_sided(problem: &EPCAGProblem) -> Option<ExpBound> {
    problem.dichotomy.one_sided.or(if problem.dichotomy.rank() == problem.dim() { problem.dichotomy.stable } else { None })
}

/// `ζ(a)` for the constants of a report.
fn zeta(r: &StabilityReport, a: f64) -> f64 {
    1.0 - (a * r.tau).exp() * r.k * r.lipschitz * r.arity as f64 / (r.sigma - a)
}

/// `σ/2` when it keeps `ζ > 0`, else half the largest rate that does.
fn feasible_rate(r: &StabilityReport) -> f64 {
    let half = 0.5 * r.sigma;
    if zeta(r, half) > 0.0 || zeta(r, 1e-12 * r.sigma) <= 0.0 {
        return half;
    }
    let (mut lo, mut hi) = (0.0, half);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if zeta(r, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * lo
}

fn check(file: &ProblemFile) -> Result<Report> {
    let problem = file.build_problem()?;
    let l = problem.lipschitz()?;
    let margin = problem.contraction_margin()?;
    let dich = &problem.dichotomy;
    let wexler = problem.theta.generator().map(|_| true);
    let mut rng = ChaCha8Rng::seed_from_u64(file.seed);
    let secant = problem.nonlinearity.secant_lipschitz(&mut rng, 500, 10.0);
    let existence = json!({
        "C1": true,
        "C2": true,
        "C3": l.is_finite(),
        "C4": dich.kernel_weight().is_finite(),
        "C5": wexler,
        "contraction": margin < 1.0,
    });
    let [lo, hi] = file.solver().core;
    let stability = if problem.has_advanced_arguments() {
        json!({ "applicable": false })
    } else {
        match one_sided(&problem) {
            None => json!({ "applicable": true, "C6": false }),
            Some(bound) => {
                let window = node_window(&problem, lo, hi)?;
                let probe = stability_constants(&problem, bound, 0.5 * bound.sigma, 0.0, window)?;
                let a = file.stability.as_ref().and_then(|s| s.a).unwrap_or_else(|| feasible_rate(&probe));
                let r = stability_constants(&problem, bound, a, 0.0, window)?;
                json!({
                    "applicable": true,
                    "C6": r.conditions.c6,
                    "C7": r.conditions.c7,
                    "C8": r.conditions.c8,
                    "C9": r.conditions.c9,
                    "a": a,
                    "tau": r.tau,
                    "zeta": r.zeta,
                    "c7_limit": r.c7_limit,
                    "uniqueness_product": r.uniqueness.product,
                })
            }
        }
    };
    let result = json!({
        "contraction_margin": margin,
        "lipschitz": l,
        "arity": problem.arity(),
        "dichotomy": {
            "projection_rank": dich.rank(),
            "stable": dich.stable.map(|b| [b.k, b.sigma]),
            "unstable": dich.unstable.map(|b| [b.k, b.sigma]),
            "kernel_weight": dich.kernel_weight(),
            "source": format!("{:?}", dich.source),
        },
        "existence": existence,
        "stability": stability,
        "secant_spot_check": { "largest_ratio": secant, "within_lipschitz": secant <= l * (1.0 + 1e-12) },
    });
    let failure = ["C1", "C2", "C3", "C4", "C5", "contraction"]
        .into_iter()
        .find(|k| result["existence"][*k] == Value::Bool(false))
        .or_else(|| (result["secant_spot_check"]["within_lipschitz"] == Value::Bool(false)).then_some("C3"));
    let report = Report::new("check", file.clone(), result);
    Ok(match failure {
        Some(c) => report.failed(c, "condition not satisfied"),
        None => report,
    })
}

fn stability(file: &ProblemFile, out: &Path) -> Result<Report> {
    let spec: &StabilitySpec = file.stability.as_ref().ok_or_else(|| bad("stability", "missing; this command needs delta"))?;
    let problem = file.build_problem()?;
    if problem.has_advanced_arguments() {
        return Err(Error::NegativeDeviation(*problem.deviations.iter().min().expect("non-empty")));
    }
    let Some(bound) = one_sided(&problem) else {
        return Ok(Report::new("stability", file.clone(), Value::Null).failed("C6", "the stability analysis needs P = I"));
    };
    let a = spec.a.unwrap_or(0.5 * bound.sigma);
    let window = node_window(&problem, 0.0, spec.t_end)?;
    let constants = stability_constants(&problem, bound, a, spec.delta, window)?;
    if let Some(c) = constants.conditions.first_failure().filter(|c| *c != "C9") {
        return Ok(Report::new("stability", file.clone(), to_value(&constants)).failed(c, "the perturbation experiment needs C6-C8"));
    }
    let mut solver = file.solver().to_config();
    let back = problem.theta.theta(-problem.max_delay())?;
    solver.core = [solver.core[0].min(back - 1.0), solver.core[1].max(spec.t_end + 1.0)];
    let (xi, _) = picard_solve(&problem, &solver)?;
    write(out, "solution.csv", &xi.to_csv())?;
    let config = ExperimentConfig { trials: spec.trials, seed: file.seed, t_end: spec.t_end, ..Default::default() };
    let r = stability_experiment(&problem, &xi, constants, &config)?;
    let report = Report::new("stability", file.clone(), to_value(&r));
    Ok(if !r.all_within {
        report.failed("envelope", "a perturbed trajectory left the envelope L e^{-at}")
    } else if !r.conditions.c9 {
        report.failed("C9", "uniqueness product is not below 1")
    } else {
        report
    })
}

fn sequence(file: &ProblemFile) -> Result<Report> {
    let spec = file.sequence.as_ref().ok_or_else(|| bad("sequence", "missing"))?;
    let seq = spec.build(&file.theta)?;
    let mut r = sequence_almost_periods(&seq, spec.epsilon, spec.periods[0]..=spec.periods[1])?;
    if let Some(b) = spec.density_bound {
        r = r.with_density_bound(b);
    }
    Ok(Report::new("sequence", file.clone(), to_value(&r)))
}

fn logistic(file: &ProblemFile, out: &Path) -> Result<Report> {
    let spec = file.logistic.as_ref().ok_or_else(|| bad("logistic", "missing"))?;
    let problem = spec.build()?;
    let config = spec.config();
    let fit = KernelFit::default();
    let existence = problem.existence_conditions(&fit)?;
    let header = json!({
        "mean_value": mean_value(&problem.a, None)?.value,
        "kernel": to_value(&kernel_bounds(&problem.a, &fit)?),
        "mu": mu_sup(&problem.rate, problem.h_box)?,
        "existence": to_value(&existence),
    });
    if !existence.invariance_ok {
        return Ok(Report::new("logistic", file.clone(), header).failed("logistic.invariance", "K mu / sigma exceeds H"));
    }
    if !existence.contraction_ok {
        return Ok(Report::new("logistic", file.clone(), header).failed("logistic.contraction", "(K/sigma)(l H + mu) is not below 1"));
    }
    let (psi, analysis) = logistic_analysis(&problem, &config, &fit)?;
    write(out, "solution.csv", &psi.to_csv())?;

    let starts: Vec<f64> = if spec.starts.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(file.seed);
        (0..10).map(|_| rng.random_range(0.01..=2.0) * problem.h_box).collect()
    } else {
        spec.starts.clone()
    };
    let mut csv = String::from("run,t,x_1,interval_index\n");
    let mut runs = Vec::new();
    for (k, &n0) in starts.iter().enumerate() {
        let traj = simulate_logistic(&problem, n0, spec.t_end, &IvpOptions::default())?;
        let mut min = f64::INFINITY;
        for (idx, t, v) in traj.grid.samples() {
            csv.push_str(&format!("{k},{t:.16e},{:.16e},{idx}\n", v[0]));
            min = min.min(v[0]);
        }
        runs.push(json!({ "n0": n0, "min": min, "final": traj.eval(spec.t_end)[0], "positive": min > 0.0 }));
    }
    write(out, "trajectory.csv", &csv)?;
    let all_positive = runs.iter().all(|r| r["positive"] == Value::Bool(true));
    let mut result = header;
    result["zero_solution"] = json!(analysis.from_zero.zero_solution);
    result["analysis"] = to_value(&analysis);
    result["runs"] = Value::Array(runs);
    result["all_positive"] = json!(all_positive);
    let report = Report::new("logistic", file.clone(), result);
    Ok(if all_positive { report } else { report.failed("positivity", "a forward run left the positive half-line") })
}
