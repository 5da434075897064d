use std::fmt;
use std::io::Write;

use kflat::moments::{self, moment_report, normalized_moment_limit};
use kflat::simulator::{self, MAX_ACCUMULATED_ORDER};
use kflat::stats::{self, ValidationRow};
use kflat::{MonteCarloOptions, ProcessParams};
use serde_json::{json, Value};

use crate::args::{
    CltArgs, ExactArgs, Format, OutputArgs, ProcessArgs, RunArgs, SimulateArgs, ValidateArgs,
};
use crate::render::{num, open_sink, write_json, Config};

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// The run completed but a check did not pass.
    Failed(String),
    Usage(String),
    Io(String),
    Budget(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) | CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Failed(m) => write!(f, "check failed: {m}"),
            CliError::Usage(m) => write!(f, "invalid arguments: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
            CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl From<kflat::Error> for CliError {
    fn from(e: kflat::Error) -> Self {
        use kflat::Error::*;
        match e {
            BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            OrderOutOfRange(_) | Dimension(_) | InvalidParameter(_) | InsufficientData(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn process_config(command: &str, a: &ProcessArgs) -> Config {
    let mut c = Config::new(command);
    c.push("dim", a.dim as u64)
        .push("k", a.k as u64)
        .push("j", a.j as u64)
        .push_num("intensity", a.intensity)
        .push_num("radius", a.radius)
        .push(
            "convention",
            kflat::MeasureConvention::from(a.convention).as_str(),
        );
    c
}

fn push_run(c: &mut Config, reps: u64, run: &RunArgs) {
    c.push("reps", reps)
        .push("seed", run.seed)
        .push_num("max_flats", run.max_flats);
}

fn mc_options(run: &RunArgs) -> CliResult<MonteCarloOptions> {
    if run.workers == Some(0) {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }
    Ok(MonteCarloOptions {
        workers: run.workers,
        max_expected_flats: run.max_flats,
        ..MonteCarloOptions::default()
    })
}

fn check_reps(reps: u64) -> CliResult {
    if reps == 0 {
        Err(CliError::Usage("reps must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn emit(
    output: &OutputArgs,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> CliResult {
    let mut sink = open_sink(output.out.as_deref())?;
    body(&mut *sink)?;
    sink.flush()?;
    Ok(())
}

fn asymptotic_json(terms: &[kflat::AsymptoticTerm]) -> Value {
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"order": i + 1, "rho_exponent": t.rho_exponent, "coefficient": t.coefficient}))
        .collect()
}

pub fn exact(a: &ExactArgs) -> CliResult {
    let p = a.process.params()?;
    let report = moment_report(&p, a.process.j, a.max_order)?;
    let cov = moments::covariance_matrix(&p)?;
    let n = cov.nrows();
    let limits: Vec<f64> = (1..=a.max_order).map(normalized_moment_limit).collect();

    let mut cfg = process_config("exact", &a.process);
    cfg.push("max_order", a.max_order as u64);

    emit(&a.output, |out| match a.output.format {
        Format::Csv => {
            writeln!(out, "{}", cfg.csv_header())?;
            writeln!(out, "quantity,index,value")?;
            let mut row = |q: &str, idx: &str, v: f64| writeln!(out, "{q},{idx},{}", num(v));
            row("mean", "", report.mean)?;
            row("variance", "", report.variance)?;
            for m in 1..=a.max_order {
                let i = m.to_string();
                row("A", &i, report.functionals[m - 1])?;
                row("mu", &i, report.central_moments.get(m))?;
                row("gamma", &i, report.cumulants.get(m))?;
            }
            for m in 1..=a.max_order {
                let i = m.to_string();
                let mt = report.asymptotic_moments[m - 1];
                let ct = report.asymptotic_cumulants[m - 1];
                row("asym_mu_coefficient", &i, mt.coefficient)?;
                row("asym_mu_exponent", &i, mt.rho_exponent)?;
                row("asym_gamma_coefficient", &i, ct.coefficient)?;
                row("asym_gamma_exponent", &i, ct.rho_exponent)?;
                row("normalized_mu_limit", &i, limits[m - 1])?;
            }
            row("berry_esseen_bound", "", report.berry_esseen_bound)?;
            for r in 0..n {
                for c in 0..n {
                    row("corr", &format!("{r}:{c}"), cov[(r, c)])?;
                }
            }
            Ok(())
        }
        Format::Json => {
            let matrix: Vec<Vec<f64>> = (0..n)
                .map(|r| (0..n).map(|c| cov[(r, c)]).collect())
                .collect();
            let body = json!({
                "config": cfg.json(),
                "mean": report.mean,
                "variance": report.variance,
                "functionals": report.functionals,
                "central_moments": report.central_moments.values(),
                "cumulants": report.cumulants.values(),
                "asymptotic_moments": asymptotic_json(&report.asymptotic_moments),
                "asymptotic_cumulants": asymptotic_json(&report.asymptotic_cumulants),
                "normalized_moment_limits": limits,
                "berry_esseen_bound": report.berry_esseen_bound,
                "correlation_matrix": matrix,
            });
            write_json(out, &body)
        }
    })
}

/// Per-component count, mean and unbiased variance, summed in replication order.
fn summarize(rows: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut means = vec![0.0; width];
    for r in rows {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; width];
    for r in rows {
        for ((s, v), m) in vars.iter_mut().zip(r).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let denom = if rows.len() > 1 { n - 1.0 } else { f64::NAN };
    vars.iter_mut().for_each(|s| *s /= denom);
    (means, vars)
}

fn export_realizations(
    path: &std::path::Path,
    cfg: &Config,
    p: &ProcessParams,
    a: &SimulateArgs,
    opts: &MonteCarloOptions,
) -> CliResult {
    let reals = simulator::simulate_realizations(p, a.reps, a.run.seed, opts)?;
    let mut out = open_sink(Some(path))?;
    serde_json::to_writer(&mut out, &json!({ "config": cfg.json() }))
        .map_err(std::io::Error::from)?;
    writeln!(out)?;
    for (rep, r) in reals.iter().enumerate() {
        let flats: Vec<Value> = r
            .flats
            .iter()
            .map(|f| {
                let frame = f.frame.as_ref();
                json!({
                    "distance": f.distance,
                    "directions": frame.map(|fr| fr.directions.clone()),
                    "offset_direction": frame.map(|fr| fr.offset_direction.clone()),
                })
            })
            .collect();
        serde_json::to_writer(&mut out, &json!({"rep": rep, "flats": flats}))
            .map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> CliResult {
    let p = a.process.params()?;
    check_reps(a.reps)?;
    let opts = mc_options(&a.run)?;
    let width = p.k() + 1;
    let vectors = simulator::simulate_vectors(&p, p.k(), a.reps, a.run.seed, &opts)?;
    let rows: Vec<Vec<f64>> = vectors.into_iter().map(|v| v.0).collect();
    let (means, vars) = summarize(&rows, width);

    let mut cfg = process_config("simulate", &a.process);
    push_run(&mut cfg, a.reps, &a.run);

    if let Some(path) = &a.export_realizations {
        export_realizations(path, &cfg, &p, a, &opts)?;
    }

    let names: Vec<String> = (0..width).map(|j| format!("V{j}")).collect();
    emit(&a.output, |out| match a.output.format {
        Format::Csv => {
            writeln!(out, "{}", cfg.csv_header())?;
            writeln!(out, "rep,{}", names.join(","))?;
            for (i, r) in rows.iter().enumerate() {
                let cells: Vec<String> = r.iter().map(|&v| num(v)).collect();
                writeln!(out, "{i},{}", cells.join(","))?;
            }
            writeln!(out, "# summary count={}", rows.len())?;
            let join = |xs: &[f64]| xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",");
            writeln!(out, "# summary mean={}", join(&means))?;
            writeln!(out, "# summary variance={}", join(&vars))
        }
        Format::Json => write_json(
            out,
            &json!({
                "config": cfg.json(),
                "columns": names,
                "rows": rows,
                "count": rows.len(),
                "mean": means,
                "variance": vars,
            }),
        ),
    })
}

/// Quote a CSV field when it contains a separator or quote.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn validate(a: &ValidateArgs) -> CliResult {
    let p = a.process.params()?;
    check_reps(a.reps)?;
    let max_valid = MAX_ACCUMULATED_ORDER / 2;
    if !(2..=max_valid).contains(&a.max_order) {
        return Err(CliError::Usage(format!(
            "validation order must be in 2..={max_valid}, got {}",
            a.max_order
        )));
    }
    if !(a.threshold > 0.0) {
        return Err(CliError::Usage("threshold must be positive".into()));
    }
    let opts = mc_options(&a.run)?;
    let acc = simulator::run_monte_carlo(
        &p,
        p.k(),
        a.reps,
        (2 * a.max_order).max(4),
        a.run.seed,
        &opts,
    )?;
    let mut rows = stats::validate_against_exact(&p, &acc, a.max_order)?;
    if let (Some(f), Some(first)) = (a.corrupt_exact, rows.first_mut()) {
        *first = first.with_exact(first.exact * f);
    }
    let failures: Vec<&ValidationRow> = rows.iter().filter(|r| !r.passes(a.threshold)).collect();

    let mut cfg = process_config("validate", &a.process);
    cfg.push("max_order", a.max_order as u64);
    push_run(&mut cfg, a.reps, &a.run);
    cfg.push_num("threshold", a.threshold);

    emit(&a.output, |out| match a.output.format {
        Format::Csv => {
            writeln!(out, "{}", cfg.csv_header())?;
            writeln!(out, "quantity,exact,estimate,se,z,pass")?;
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    csv_field(&r.quantity),
                    num(r.exact),
                    num(r.estimate),
                    num(r.se),
                    num(r.z),
                    r.passes(a.threshold)
                )?;
            }
            Ok(())
        }
        Format::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({"quantity": r.quantity, "exact": r.exact, "estimate": r.estimate,
                           "se": r.se, "z": r.z, "pass": r.passes(a.threshold)})
                })
                .collect();
            write_json(
                out,
                &json!({"config": cfg.json(), "rows": table, "pass": failures.is_empty()}),
            )
        }
    })?;

    if failures.is_empty() {
        Ok(())
    } else {
        for r in &failures {
            eprintln!(
                "FAIL {}: exact {} estimate {} se {} z {}",
                r.quantity,
                num(r.exact),
                num(r.estimate),
                num(r.se),
                num(r.z)
            );
        }
        Err(CliError::Failed(format!(
            "{} of {} rows exceed |z| = {}",
            failures.len(),
            rows.len(),
            num(a.threshold)
        )))
    }
}

pub fn clt(a: &CltArgs) -> CliResult {
    let p = a.process.params()?;
    if a.reps < 2 {
        return Err(CliError::Usage("reps must be at least 2".into()));
    }
    if !(a.slope_min <= a.slope_max) {
        return Err(CliError::Usage(
            "slope-min must not exceed slope-max".into(),
        ));
    }
    let opts = mc_options(&a.run)?;
    let fit = stats::clt_rate_fit(
        &p,
        a.process.j,
        &a.rhos,
        a.reps,
        a.run.seed,
        &opts,
        !a.sample_standardization,
    )?;
    let slope_ok = (a.slope_min..=a.slope_max).contains(&fit.slope);
    let dominated = fit.dominated_by_bound();

    let mut cfg = process_config("clt", &a.process);
    cfg.push("rhos", a.rhos.clone());
    push_run(&mut cfg, a.reps, &a.run);
    cfg.push_num("slope_min", a.slope_min)
        .push_num("slope_max", a.slope_max)
        .push(
            "standardization",
            if a.sample_standardization {
                "sample"
            } else {
                "exact"
            },
        );

    emit(&a.output, |out| match a.output.format {
        Format::Csv => {
            writeln!(out, "{}", cfg.csv_header())?;
            writeln!(out, "rho,distance,bound")?;
            for pt in &fit.points {
                writeln!(
                    out,
                    "{},{},{}",
                    num(pt.rho),
                    num(pt.distance),
                    num(pt.bound)
                )?;
            }
            writeln!(
                out,
                "# fit slope={} intercept={}",
                num(fit.slope),
                num(fit.intercept)
            )?;
            writeln!(
                out,
                "# check slope_in_window={slope_ok} dominated_by_bound={dominated}"
            )
        }
        Format::Json => {
            let pts: Vec<Value> = fit
                .points
                .iter()
                .map(|pt| json!({"rho": pt.rho, "distance": pt.distance, "bound": pt.bound}))
                .collect();
            write_json(
                out,
                &json!({
                    "config": cfg.json(),
                    "points": pts,
                    "slope": fit.slope,
                    "intercept": fit.intercept,
                    "slope_in_window": slope_ok,
                    "dominated_by_bound": dominated,
                }),
            )
        }
    })?;

    match (slope_ok, dominated) {
        (true, true) => Ok(()),
        (false, _) => Err(CliError::Failed(format!(
            "slope {} outside [{}, {}]",
            num(fit.slope),
            num(a.slope_min),
            num(a.slope_max)
        ))),
        (true, false) => Err(CliError::Failed(
            "a Kolmogorov distance exceeds its bound".into(),
        )),
    }
}
