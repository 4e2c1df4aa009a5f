use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use resonance_core::conditions::{self, ConditionBundle, ConditionError, ConditionKind, ScCase};
use resonance_core::expr;
use resonance_core::solver::{GalerkinProblem, MultiStart, SolveResult, SolverError, SolverSettings};
use resonance_core::spectral::{decompose, eigenpairs, Domain, Mode, Part, SpectralError, DEFAULT_TIE_TOLERANCE};

use crate::config::{ConfigError, Geometry, Resolved};
use crate::output::{num, report_json, sci, to_value, Output, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("spectral basis: {0}")]
    Spectral(#[from] SpectralError),
    #[error("condition checks: {0}")]
    Conditions(#[from] ConditionError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Other(String),
}

fn mode_label(m: Mode) -> String {
    m.numbers().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
}

fn part_label(p: Part) -> &'static str {
    match p {
        Part::Hat => "hat",
        Part::Bar => "bar",
        Part::Tilde => "tilde",
    }
}

fn domain_label(d: &Domain<f64>) -> String {
    match d {
        Domain::Interval { a, b } => format!("interval ({a}, {b})"),
        Domain::Rectangle { lx, ly } => format!("rectangle (0, {lx}) x (0, {ly})"),
    }
}

pub fn problem_summary(r: &Resolved) -> Value {
    let mut v = json!({
        "domain": to_value(&r.domain),
        "k": r.k,
        "n_trunc": r.n,
        "nonlinearity": r.nonlinearity.label(),
        "forcing": r.forcing,
    });
    if let Some(res) = r.projection_residual {
        v["forcing_projection_residual"] = json!(res);
    }
    v
}

pub fn eigen(r: &Resolved) -> Result<Output, RunError> {
    let pairs = eigenpairs(&r.domain, r.n)?;
    let dec = decompose(&pairs, r.k, DEFAULT_TIE_TOLERANCE)?;
    let gaps = dec.gap_constants();
    let lk = dec.lambda_k();

    let mut table = Table::new("eigen", &["rank", "mode", "eigenvalue", "shifted", "part"]);
    for (i, p) in pairs.iter().enumerate() {
        let part = dec.part_of(i);
        table.push(vec![p.index.to_string(), mode_label(p.mode), num(p.eigenvalue), num(p.eigenvalue - lk), part_label(part).into()]);
    }
    let ranks = |part: Part| dec.indices(part).iter().map(|&i| i + 1).collect::<Vec<_>>();
    let body = json!({
        "problem": { "domain": to_value(&r.domain), "k": r.k, "n_trunc": r.n },
        "decomposition": {
            "lambda_k": lk,
            "multiplicity": dec.multiplicity,
            "hat": ranks(Part::Hat),
            "bar": ranks(Part::Bar),
            "tilde": ranks(Part::Tilde),
            "c1": gaps.c1,
            "c3": gaps.c3,
            "lower_gap": dec.lower_gap(),
            "upper_gap": dec.upper_gap(),
        },
        "eigenpairs": pairs.iter().map(|p| json!({ "rank": p.index, "mode": p.mode.numbers(), "eigenvalue": p.eigenvalue })).collect::<Vec<_>>(),
    });

    let mut text = String::new();
    writeln!(text, "domain: {}", domain_label(&r.domain)).unwrap();
    writeln!(text, "k = {}, N = {}, lambda_k = {}, multiplicity m = {}", r.k, r.n, num(lk), dec.multiplicity).unwrap();
    if dec.multiplicity > 1 {
        writeln!(text, "resonant eigenvalue is repeated (m = {})", dec.multiplicity).unwrap();
    }
    match gaps.c1 {
        Some(c1) => writeln!(text, "c1 = {}", num(c1)).unwrap(),
        None => writeln!(text, "c1 = none (k = 1, empty hat part)").unwrap(),
    }
    writeln!(text, "c3 = {}", num(gaps.c3)).unwrap();
    writeln!(text).unwrap();
    writeln!(text, "{:>5}  {:>9}  {:>22}  part", "rank", "mode", "eigenvalue").unwrap();
    for row in &table.rows {
        writeln!(text, "{:>5}  {:>9}  {:>22}  {}", row[0], row[1], row[2], row[4]).unwrap();
    }
    Ok(Output { report: report_json("eigen", body, &[]), tables: vec![table], text, success: true, warnings: vec![] })
}

pub fn run_conditions(problem: &GalerkinProblem<f64>, r: &Resolved) -> Result<ConditionBundle<f64>, RunError> {
    let space = problem.resonant_space();
    Ok(conditions::evaluate(&space, problem.nonlinearity(), &r.conditions)?)
}

fn verdict_table(bundle: &ConditionBundle<f64>) -> Table {
    let mut t = Table::new("conditions", &["condition", "verdict", "min_margin", "uncertainty", "certification"]);
    for rep in &bundle.reports {
        t.push(vec![
            rep.condition.label().into(),
            rep.verdict.to_string(),
            rep.min_margin().map(num).unwrap_or_default(),
            num(rep.uncertainty),
            rep.certification.clone().unwrap_or_default(),
        ]);
    }
    t
}

fn profiles_table(bundle: &ConditionBundle<f64>) -> Table {
    let mut t = Table::new("profiles", &["direction", "t", "potential", "linear", "j"]);
    for p in &bundle.profiles {
        for i in 0..p.t.len() {
            t.push(vec![p.direction.to_string(), num(p.t[i]), num(p.potential[i]), num(p.linear[i]), num(p.j[i])]);
        }
    }
    t
}

pub fn conditions_text(bundle: &ConditionBundle<f64>) -> String {
    let mut text = String::new();
    let a = &bundle.asymptotics;
    let lim = |name: &str, e: &resonance_core::nonlinearity::LimitEstimate<f64>| {
        if e.exists {
            format!("{name} = {} (+/- {})", num(e.value), sci(e.tail_variation))
        } else {
            format!("{name} does not exist (oscillation {})", sci(e.oscillation_amplitude))
        }
    };
    writeln!(text, "nonlinearity: {}", bundle.nonlinearity).unwrap();
    writeln!(text, "resonant ranks: {:?}, f_bar = {:?}", bundle.bar_ranks, bundle.f_bar).unwrap();
    writeln!(text, "{}; {}", lim("g(+inf)", &a.g_plus), lim("g(-inf)", &a.g_minus)).unwrap();
    writeln!(text, "{}; {}", lim("G+", &a.slope_plus), lim("G-", &a.slope_minus)).unwrap();
    writeln!(text).unwrap();
    for rep in &bundle.reports {
        let margin = rep.min_margin().map(|m| format!("min margin {}", sci(m))).unwrap_or_else(|| "no margins".into());
        let cert = rep.certification.as_deref().map(|c| format!(" [{c}]")).unwrap_or_default();
        writeln!(text, "{:<5} {:<13} {}{}", rep.condition.label(), rep.verdict.to_string(), margin, cert).unwrap();
    }
    writeln!(text).unwrap();
    match bundle.sc_case() {
        Some(case) => writeln!(text, "saddle geometry: {case}").unwrap(),
        None => writeln!(text, "neither SC+ nor SC- holds").unwrap(),
    }
    text
}

pub fn conditions(r: &Resolved) -> Result<Output, RunError> {
    let problem = r.problem()?;
    let bundle = run_conditions(&problem, r)?;
    let mut body = serde_json::Map::new();
    body.insert("problem".into(), problem_summary(r));
    body.insert("verdicts".into(), verdict_map(&bundle));
    body.insert("sc_case".into(), to_value(&bundle.sc_case()));
    body.insert("conditions".into(), to_value(&bundle));
    Ok(Output {
        report: report_json("conditions", Value::Object(body), &[]),
        tables: vec![verdict_table(&bundle), profiles_table(&bundle)],
        text: conditions_text(&bundle),
        success: bundle.sc_case().is_some(),
        warnings: vec![],
    })
}

pub fn verdict_map(bundle: &ConditionBundle<f64>) -> Value {
    let mut m = serde_json::Map::new();
    for kind in ConditionKind::ALL {
        m.insert(kind.label().into(), to_value(&bundle.verdict(kind)));
    }
    Value::Object(m)
}

/// Which solves `solve` attempts, with a warning when the verdicts leave
/// the saddle geometry open.
pub fn plan(geometry: Geometry, bundle: Option<&ConditionBundle<f64>>) -> (Vec<Option<ScCase>>, Vec<String>) {
    match geometry {
        Geometry::Newton => (vec![None], vec![]),
        Geometry::ScPlus => (vec![Some(ScCase::Plus)], vec![]),
        Geometry::ScMinus => (vec![Some(ScCase::Minus)], vec![]),
        Geometry::Auto => match bundle.and_then(|b| b.sc_case()) {
            Some(case) => (vec![Some(case)], vec![]),
            None => {
                let why = if bundle.is_some() { "neither SC+ nor SC- holds" } else { "condition checks were skipped" };
                (
                    vec![Some(ScCase::Plus), Some(ScCase::Minus)],
                    vec![format!("{why}; attempting both saddle geometries, existence is not guaranteed")],
                )
            }
        },
    }
}

/// Residual checks reported for each converged point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResidualCheck {
    pub n_test: usize,
    pub norm: f64,
    pub tail_norm: f64,
}

#[derive(Debug, serde::Serialize)]
pub struct Attempt {
    pub geometry: Option<ScCase>,
    pub starts: usize,
    pub solutions: Vec<SolveResult<f64>>,
    pub residual_trial: Vec<ResidualCheck>,
    pub residual_test: Vec<ResidualCheck>,
    pub failures: Vec<SolveResult<f64>>,
}

pub fn attempt(problem: &GalerkinProblem<f64>, geometry: Option<ScCase>, settings: &SolverSettings) -> Result<Attempt, RunError> {
    let ms: MultiStart<f64> = problem.multi_start(geometry, settings)?;
    let n = problem.n();
    let n_test = if settings.n_test == 0 { 2 * n } else { settings.n_test };
    let mut residual_trial = Vec::new();
    let mut residual_test = Vec::new();
    for s in &ms.solutions {
        let w = problem.weak_residual(&s.coeffs, n)?;
        residual_trial.push(ResidualCheck { n_test: n, norm: w.norm, tail_norm: w.tail_norm });
        let w = problem.weak_residual(&s.coeffs, n_test)?;
        residual_test.push(ResidualCheck { n_test, norm: w.norm, tail_norm: w.tail_norm });
    }
    Ok(Attempt { geometry, starts: ms.starts.len(), solutions: ms.solutions, residual_trial, residual_test, failures: ms.failures })
}

fn geometry_label(g: Option<ScCase>) -> String {
    g.map(|c| c.to_string()).unwrap_or_else(|| "newton".into())
}

const SAMPLES_1D: usize = 201;
const SAMPLES_2D: usize = 41;

fn solution_table(problem: &GalerkinProblem<f64>, attempts: &[Attempt]) -> Table {
    let domain = *problem.domain();
    let two_d = domain.dimension() == 2;
    let mut t = if two_d {
        Table::new("solution", &["solution", "geometry", "x", "y", "u"])
    } else {
        Table::new("solution", &["solution", "geometry", "x", "u"])
    };
    let points: Vec<[f64; 2]> = match domain {
        Domain::Interval { a, b } => (0..SAMPLES_1D).map(|i| [a + (b - a) * i as f64 / (SAMPLES_1D - 1) as f64, 0.0]).collect(),
        Domain::Rectangle { lx, ly } => (0..SAMPLES_2D)
            .flat_map(|i| (0..SAMPLES_2D).map(move |j| [lx * i as f64 / (SAMPLES_2D - 1) as f64, ly * j as f64 / (SAMPLES_2D - 1) as f64]))
            .collect(),
    };
    let mut index = 0;
    for a in attempts {
        for s in &a.solutions {
            for &p in &points {
                let u = problem.evaluate_at(&s.coeffs, p);
                let mut row = vec![index.to_string(), geometry_label(a.geometry), num(p[0])];
                if two_d {
                    row.push(num(p[1]));
                }
                row.push(num(u));
                t.push(row);
            }
            index += 1;
        }
    }
    t
}

fn trace_summary(s: &SolveResult<f64>) -> String {
    let mut text = String::new();
    let tail = s.trace.len().saturating_sub(5);
    for e in &s.trace[tail..] {
        let note = e.note.as_deref().map(|n| format!("  {n}")).unwrap_or_default();
        writeln!(text, "    it {:>5}  E = {}  |grad E| = {}  step = {}{}", e.iteration, sci(e.energy), sci(e.gradient_norm), sci(e.step), note)
            .unwrap();
    }
    text
}

pub struct Solved {
    pub bundle: Option<ConditionBundle<f64>>,
    pub attempts: Vec<Attempt>,
    pub warnings: Vec<String>,
}

pub fn solve_all(problem: &GalerkinProblem<f64>, r: &Resolved, skip_conditions: bool) -> Result<Solved, RunError> {
    let bundle = if skip_conditions { None } else { Some(run_conditions(problem, r)?) };
    let (geometries, warnings) = plan(r.geometry, bundle.as_ref());
    let attempts = geometries.into_iter().map(|g| attempt(problem, g, &r.solver)).collect::<Result<Vec<_>, _>>()?;
    Ok(Solved { bundle, attempts, warnings })
}

pub fn solve(r: &Resolved, skip_conditions: bool) -> Result<Output, RunError> {
    let problem = r.problem()?;
    let Solved { bundle, attempts, warnings } = solve_all(&problem, r, skip_conditions)?;
    let converged = attempts.iter().map(|a| a.solutions.len()).sum::<usize>();

    let mut text = String::new();
    if let Some(b) = &bundle {
        text.push_str(&conditions_text(b));
        writeln!(text).unwrap();
    }
    for a in &attempts {
        writeln!(text, "geometry {}: {} starts, {} distinct critical points, {} failed runs", geometry_label(a.geometry), a.starts, a.solutions.len(), a.failures.len())
            .unwrap();
        for ((s, rt), rx) in a.solutions.iter().zip(&a.residual_trial).zip(&a.residual_test) {
            writeln!(
                text,
                "  E = {}  |grad E| = {}  residual(N={}) = {}  residual(N_test={}) = {}  tail = {}  Morse index {}",
                sci(s.energy),
                sci(s.gradient_norm),
                rt.n_test,
                sci(rt.norm),
                rx.n_test,
                sci(rx.norm),
                sci(rx.tail_norm),
                s.morse_index
            )
            .unwrap();
        }
        if a.solutions.is_empty() {
            for f in &a.failures {
                writeln!(text, "  run did not converge after {} iterations:", f.iterations).unwrap();
                text.push_str(&trace_summary(f));
            }
        }
    }
    if converged == 0 {
        writeln!(text, "no converged critical point").unwrap();
    }

    let mut body = serde_json::Map::new();
    body.insert("problem".into(), problem_summary(r));
    body.insert("solver_settings".into(), to_value(&r.solver));
    if let Some(b) = &bundle {
        body.insert("verdicts".into(), verdict_map(b));
        body.insert("sc_case".into(), to_value(&b.sc_case()));
        body.insert("conditions".into(), to_value(b));
    }
    body.insert("attempts".into(), to_value(&attempts));
    body.insert("converged".into(), json!(converged));

    let mut tables = Vec::new();
    if let Some(b) = &bundle {
        tables.push(verdict_table(b));
        tables.push(profiles_table(b));
    }
    tables.push(solution_table(&problem, &attempts));
    // csv format prints the first table: put the solution first.
    tables.rotate_right(1);
    Ok(Output { report: report_json("solve", Value::Object(body), &warnings), tables, text, success: converged > 0, warnings })
}

pub fn parse_check(text: &str, field: bool) -> Output {
    let parsed = if field { expr::parse_field(text) } else { expr::parse(text) };
    match parsed {
        Ok(e) => {
            let derivative = (!field).then(|| e.differentiate().to_string());
            let mut out = format!("ok: {e}\n");
            if let Some(d) = &derivative {
                out.push_str(&format!("d/ds: {d}\n"));
            }
            let body = json!({ "input": text, "valid": true, "canonical": e.to_string(), "derivative": derivative });
            Output { report: report_json("parse-check", body, &[]), tables: vec![], text: out, success: true, warnings: vec![] }
        }
        Err(err) => {
            let offset = err.offset();
            let caret = format!("{}\n{}^\n", text, " ".repeat(text[..offset.min(text.len())].chars().count()));
            let body = json!({ "input": text, "valid": false, "offset": offset, "error": err.to_string() });
            Output {
                report: report_json("parse-check", body, &[]),
                tables: vec![],
                text: format!("invalid: {err}\n{caret}"),
                success: false,
                warnings: vec![],
            }
        }
    }
}
