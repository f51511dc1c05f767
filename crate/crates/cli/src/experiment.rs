//! The `run` pipeline: study, CSV outputs, optional dumps and the bump-sum
//! lower-bound check.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use convpart::analysis::{fit_study_rows, lower_bound_check_with, summarize, LowerBoundReport, Method, StudyRow};
use convpart::report::{format_number, write_rates, write_results, write_trace, PartitionDump};
use convpart::{Approximation, ApproximationProblem, FieldFunction, Quadrature};

use crate::config::ExperimentConfig;
use crate::render::render_svg;

/// What a run produced.
#[derive(Debug)]
pub struct Outcome {
    pub rows: Vec<StudyRow<f64>>,
    pub lower_bound: Option<LowerBoundReport<f64>>,
}

/// Runs every `(method, N)` pair and writes the configured artifacts.
///
/// When a build fails the rows finished so far are still written before the
/// error is returned.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    let f = config.corpus()?;
    let quad = Quadrature::<f64>::new(config.quadrature.clone())?;
    let (p, q) = (config.p.0, config.q.0);

    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let mut rows = Vec::new();
    let mut keep: Option<Approximation<f64>> = None;
    let dump_method = config.methods[0];
    let last_budget = *config.budgets.last().expect("validated");
    let mut failure = None;
    'outer: for &n in &config.budgets {
        for &method in &methods {
            match measure(&f, p, q, n, method, &quad) {
                Ok((row, approx)) => {
                    rows.push(row);
                    if method == dump_method && n == last_budget {
                        keep = Some(approx);
                    }
                }
                Err(e) => {
                    failure = Some(e.context(format!("{method} at N={n}")));
                    break 'outer;
                }
            }
        }
    }

    if let Some(path) = &config.outputs.results {
        write_to(path, |w| Ok(write_results(w, &rows, config.timings)?))?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(path) = &config.outputs.rates {
        let summaries = summarize(&f.label(), config.d, p, q, &methods, |m| {
            fit_study_rows(rows.iter().filter(|r| r.method == m))
        })?;
        write_to(path, |w| Ok(write_rates(w, &summaries)?))?;
    }
    if let Some(approx) = &keep {
        let dump = PartitionDump::from_approximant(&approx.approximant, Some(f.label()));
        if let Some(path) = &config.outputs.dump_partition {
            write_to(path, |w| Ok(w.write_all(dump.to_json()?.as_bytes())?))?;
        }
        if let Some(path) = &config.outputs.svg {
            let svg = render_svg(&dump)?;
            write_to(path, |w| Ok(w.write_all(svg.as_bytes())?))?;
        }
        if let Some(path) = &config.outputs.trace {
            let trace = approx
                .trace
                .as_ref()
                .with_context(|| format!("method {dump_method} produces no refinement trace"))?;
            write_to(path, |w| Ok(write_trace(w, trace)?))?;
        }
    }

    let lower_bound = match config.bump_multiplicity().filter(|_| config.lower_bound_check) {
        Some(m) => Some(lower_bound_check_with(m, config.d, q, &quad)?),
        None => None,
    };
    Ok(Outcome { rows, lower_bound })
}

fn measure(
    f: &dyn FieldFunction<f64>,
    p: f64,
    q: f64,
    n: u64,
    method: Method,
    quad: &Quadrature<f64>,
) -> Result<(StudyRow<f64>, Approximation<f64>)> {
    let problem = ApproximationProblem::new(f, p, q, n)?;
    let start = Instant::now();
    let approx = method.build(&problem, quad)?;
    let error = quad.lp_error(f, &approx.approximant, p)?;
    let seconds = start.elapsed().as_secs_f64();
    log::info!(
        "{} {method} N={n}: {} cells, error {error} ({seconds:.2}s)",
        f.label(),
        approx.cells()
    );
    if approx.degenerate_slabs > 0 {
        log::warn!("{method} N={n}: {} slabs received no samples", approx.degenerate_slabs);
    }
    let row = StudyRow {
        label: f.label(),
        d: f.dim(),
        p,
        q,
        method,
        budget: n,
        cells: approx.cells(),
        error,
        seconds,
    };
    Ok((row, approx))
}

/// One-line verdict for a lower-bound report.
pub fn lower_bound_line(r: &LowerBoundReport<f64>) -> String {
    format!(
        "lower-bound m={} d={} N={}: algorithm1 error={} uniform error={} threshold={} (x0.95) {}",
        r.m,
        r.d,
        r.budget,
        format_number(r.algorithm1_error),
        format_number(r.uniform_error),
        format_number(r.threshold),
        if r.passed() { "PASS" } else { "FAIL" }
    )
}

/// Creates `path` (and its parent directory) and hands a buffered writer to
/// `body`.
pub fn write_to(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
