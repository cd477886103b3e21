use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExactKind, ProblemKind, RunConfig};
use crate::grid::{grid_points, norm, GridFunction};
use crate::operators::{make_linear_spd, Operator};
use crate::oracle::{verify_lemma_suite, LemmaOptions};
use crate::problems::{exact_solution_with, make_noise, IntegralProblem};
use crate::schedule::Schedule;
use crate::solver::{run_with_reference, ConvergenceClaim, RunReport, StopReason};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_MET: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Reference `(n_δ, relative error)` pairs for the integral testbed with
/// `a_n = 0.1 / (5 + n)^0.99`, `γ = h = 1`.
pub const REFERENCE_ROWS: [(f64, usize, f64); 6] = [
    (0.05, 5, 0.166),
    (0.03, 6, 0.111),
    (0.02, 8, 0.108),
    (0.01, 13, 0.076),
    (0.003, 39, 0.065),
    (0.001, 104, 0.045),
];

pub fn reference_for(delta_rel: f64) -> Option<(usize, f64)> {
    REFERENCE_ROWS
        .iter()
        .find(|(d, _, _)| *d == delta_rel)
        .map(|&(_, n, e)| (n, e))
}

pub struct Testbed {
    pub op: Box<dyn Operator>,
    pub x: Vec<f64>,
    pub u_exact: GridFunction,
    pub f_exact: GridFunction,
}

pub fn build_testbed(cfg: &RunConfig) -> Result<Testbed> {
    let u_exact = match cfg.exact {
        ExactKind::Step => exact_solution_with(cfg.n, cfg.u_at_half)?,
        ExactKind::Zero => GridFunction::zeros(cfg.n),
    };
    let x = grid_points(cfg.n)?;
    let op: Box<dyn Operator> = match cfg.kind {
        ProblemKind::Integral => Box::new(IntegralProblem::with_exact_solution(u_exact.clone())?),
        ProblemKind::Diagonal => {
            let eigs: Vec<f64> = (0..cfg.n).map(|i| 1.0 / ((i + 1) as f64).powi(2)).collect();
            Box::new(make_linear_spd(&eigs)?)
        }
    };
    let f_exact = op.apply(&u_exact)?;
    Ok(Testbed {
        op,
        x,
        u_exact,
        f_exact,
    })
}

/// Noisy data and its noise level; `delta_rel = 0` means exact data.
pub fn noisy_data(
    cfg: &RunConfig,
    tb: &Testbed,
    delta_rel: f64,
    seed: u64,
) -> Result<(GridFunction, f64)> {
    if delta_rel == 0.0 {
        return Ok((tb.f_exact.clone(), 0.0));
    }
    let (f_delta, spec) = make_noise(&tb.f_exact, cfg.noise_model(seed), delta_rel, cfg.norm)?;
    Ok((f_delta, spec.delta))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(dir.join(name), contents))
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", dir.join(name).display())))
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn claim_name(c: ConvergenceClaim) -> &'static str {
    match c {
        ConvergenceClaim::MinimalNormSolution => "minimal_norm_solution",
        ConvergenceClaim::Solution => "solution",
    }
}

fn trace_csv(rep: &RunReport) -> String {
    let mut s = String::from("n,a_n,gamma_n,discrepancy,psi,u_norm\n");
    for r in &rep.trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n, r.a_n, r.gamma_n, r.discrepancy, r.psi, r.u_norm
        );
    }
    s
}

fn vector_txt(v: &GridFunction) -> String {
    v.as_slice().iter().map(|x| format!("{x}\n")).collect()
}

fn solution_csv(tb: &Testbed, u: &GridFunction) -> String {
    let mut s = String::from("x,u_exact,u_final\n");
    for ((x, e), f) in tb.x.iter().zip(tb.u_exact.as_slice()).zip(u.as_slice()) {
        let _ = writeln!(s, "{x},{e},{f}");
    }
    s
}

fn report_txt(rep: &RunReport, stop: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n_delta = {}", opt(rep.n_delta));
    let _ = writeln!(s, "stop_reason = {stop}");
    let _ = writeln!(s, "iterations = {}", rep.trace.len().saturating_sub(1));
    let _ = writeln!(s, "rel_error = {}", opt(rep.rel_error));
    let _ = writeln!(s, "delta = {}", rep.delta);
    let _ = writeln!(s, "threshold = {}", rep.threshold);
    let _ = writeln!(s, "theorem3_start_ok = {}", rep.theorem3_start_ok);
    let _ = writeln!(s, "claim = {}", claim_name(rep.claim));
    let _ = writeln!(s, "max_iterate_norm = {}", rep.max_iterate_norm);
    let _ = writeln!(s, "left_ball = {}", rep.left_ball);
    let _ = writeln!(
        s,
        "initializer_iterations = {}",
        opt(rep.initializer_iterations)
    );
    s.push_str(&rep.certificate_echo.to_string());
    s
}

fn write_run(dir: &Path, tb: &Testbed, rep: &RunReport, stop: &str) -> Result<()> {
    write(dir, "trace.csv", &trace_csv(rep))?;
    write(dir, "final.txt", &vector_txt(&rep.final_iterate))?;
    write(dir, "solution.csv", &solution_csv(tb, &rep.final_iterate))?;
    write(dir, "report.txt", &report_txt(rep, stop))
}

fn run_one(cfg: &RunConfig, tb: &Testbed, delta_rel: f64, seed: u64) -> Result<RunReport> {
    let (f_delta, delta) = noisy_data(cfg, tb, delta_rel, seed)?;
    let schedule = cfg.schedule()?;
    let solver = cfg.solver_config(tb.op.dim())?;
    run_with_reference(
        tb.op.as_ref(),
        &f_delta,
        delta,
        &schedule,
        &solver,
        Some(&tb.u_exact),
    )
}

pub fn solve(cfg: &RunConfig, out: &Path) -> i32 {
    let tb = match build_testbed(cfg) {
        Ok(tb) => tb,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (result, code) = match run_one(cfg, &tb, cfg.delta_rel, cfg.seed) {
        Ok(rep) => {
            let (stop, code) = match rep.stop_reason {
                StopReason::Discrepancy => ("discrepancy", EXIT_OK),
                StopReason::MaxIter => ("max_iter", EXIT_NOT_MET),
            };
            (write_run(out, &tb, &rep, stop), code)
        }
        Err(Error::Diverged {
            iteration,
            norm,
            partial,
        }) => {
            eprintln!("error: iteration diverged at {iteration:?} with ‖u‖ = {norm}");
            let written = match partial {
                Some(rep) => write_run(out, &tb, &rep, "diverged"),
                None => Ok(()),
            };
            (written, EXIT_DIVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    code
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta_rel: f64,
    pub seed: u64,
    pub n_delta: Option<usize>,
    pub rel_error: Option<f64>,
    pub runtime_ms: f64,
    pub status: String,
}

fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    })
}

/// Runs every `(δ_rel, seed)` pair; failures are recorded in the row's status.
pub fn sweep(cfg: &RunConfig, tb: &Testbed) -> Vec<SweepRow> {
    let jobs: Vec<(f64, u64)> = cfg
        .delta_rels
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    jobs.par_iter()
        .map(|&(delta_rel, seed)| {
            let t = Instant::now();
            let result = run_one(cfg, tb, delta_rel, seed);
            let runtime_ms = t.elapsed().as_secs_f64() * 1e3;
            let (n_delta, rel_error, status) = match result {
                Ok(rep) => (
                    rep.n_delta,
                    rep.rel_error,
                    rep.stop_reason.name().to_string(),
                ),
                Err(e) => (None, None, e.to_string().replace([',', '\n'], ";")),
            };
            SweepRow {
                delta_rel,
                seed,
                n_delta,
                rel_error,
                runtime_ms,
                status,
            }
        })
        .collect()
}

pub fn table1_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("delta_rel,seed,n_delta,rel_error,runtime_ms,status\n");
    for r in rows {
        let rel = if r.n_delta.is_some() {
            opt(r.rel_error)
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3},{}",
            r.delta_rel,
            r.seed,
            opt(r.n_delta),
            rel,
            r.runtime_ms,
            r.status
        );
    }
    s
}

/// Medians over terminated runs per `δ_rel`, alongside reference values.
pub fn summary_csv(delta_rels: &[f64], rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "delta_rel,runs,terminated,median_n_delta,median_rel_error,reference_n_delta,reference_rel_error\n",
    );
    for &d in delta_rels {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.delta_rel == d).collect();
        let done: Vec<&&SweepRow> = group.iter().filter(|r| r.n_delta.is_some()).collect();
        let mut ns: Vec<f64> = done
            .iter()
            .filter_map(|r| r.n_delta)
            .map(|n| n as f64)
            .collect();
        let mut es: Vec<f64> = done.iter().filter_map(|r| r.rel_error).collect();
        let reference = reference_for(d);
        let _ = writeln!(
            s,
            "{d},{},{},{},{},{},{}",
            group.len(),
            done.len(),
            opt(median(&mut ns)),
            opt(median(&mut es)),
            opt(reference.map(|r| r.0)),
            opt(reference.map(|r| r.1)),
        );
    }
    s
}

pub fn table1(cfg: &RunConfig, out: &Path) -> i32 {
    let tb = match build_testbed(cfg) {
        Ok(tb) => tb,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = cfg.schedule().and_then(|_| cfg.solver_config(tb.op.dim())) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let rows = sweep(cfg, &tb);
    let written = write(out, "table1.csv", &table1_csv(&rows)).and_then(|_| {
        write(
            out,
            "table1_summary.csv",
            &summary_csv(&cfg.delta_rels, &rows),
        )
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if rows.len() == 1 {
        let single = RunConfig {
            delta_rel: rows[0].delta_rel,
            seed: rows[0].seed,
            ..cfg.clone()
        };
        return solve(&single, out);
    }
    EXIT_OK
}

pub fn verify(cfg: &RunConfig, out: &Path) -> i32 {
    let prepared = (|| -> Result<_> {
        let tb = build_testbed(cfg)?;
        let (f_delta, delta) = noisy_data(cfg, &tb, cfg.delta_rel, cfg.seed)?;
        let schedule = cfg.schedule()?;
        let y_norm = norm(&tb.u_exact, cfg.norm)?;
        Ok((tb, f_delta, delta, schedule, y_norm))
    })();
    let (tb, f_delta, delta, schedule, y_norm) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = write(
        out,
        "schedule_certificate.txt",
        &schedule.certificate().to_string(),
    ) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let opts = LemmaOptions {
        mode: cfg.norm,
        check_tol: cfg.verify_check_tol,
        ..LemmaOptions::default()
    };
    let report = verify_lemma_suite(
        tb.op.as_ref(),
        &schedule,
        &f_delta,
        delta,
        y_norm,
        cfg.verify_n_max,
        cfg.verify_tol,
        opts,
    );
    match report {
        Ok(report) => {
            if let Err(e) = write(out, "lemmas.csv", &report.to_csv()) {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
            if report.all_asserted_pass() {
                EXIT_OK
            } else {
                EXIT_NOT_MET
            }
        }
        Err(Error::Path { index, source }) => match *source {
            Error::NonConvergence { a, .. } => {
                eprintln!("error: oracle did not converge at a = {a} (path index {index})");
                EXIT_ORACLE
            }
            other => {
                eprintln!("error: {other}");
                EXIT_CONFIG
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
