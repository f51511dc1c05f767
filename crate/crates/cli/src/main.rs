use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use convpart::analysis::{audit_trace, fit_study_rows, summarize, Method, StudyRow};
use convpart::report::{format_number, read_results, read_trace, write_rates, PartitionDump, TraceOverrides};
use convpart_cli::config::parse_list;
use convpart_cli::experiment::write_to;
use convpart_cli::{lower_bound_line, render_svg, run_experiment, ExperimentConfig, Exponent};

#[derive(Parser)]
#[command(
    name = "convpart",
    version,
    about = "Adaptive anisotropic piecewise-constant approximation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build approximants over a budget sweep and write results and rates.
    Run(Box<RunArgs>),
    /// Fit convergence rates from a results CSV.
    Rates {
        results: PathBuf,
        /// Write the rate CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a partition dump (d = 2) as SVG.
    Render { dump: PathBuf, out: PathBuf },
    /// Check a refinement trace CSV against the counting-lemma bounds.
    Audit(AuditArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// quad, expdir, ridge, singular_beta, const, linear, bump or bump:m=<k>.
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Error norm exponent, a number or `inf`.
    #[arg(long)]
    p: Option<Exponent>,
    /// Sobolev exponent of the energy.
    #[arg(long)]
    q: Option<Exponent>,
    /// Comma-separated cell budgets, strictly increasing.
    #[arg(long)]
    budgets: Option<String>,
    /// Comma-separated subset of algorithm1, uniform, adaptive_dyadic.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    gl_points: Option<usize>,
    /// Sample points per dyadic cube.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    exclusion_radius: Option<f64>,
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Partition JSON of the first method at the largest budget.
    #[arg(long)]
    dump_partition: Option<PathBuf>,
    /// SVG of the same partition (d = 2).
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Refinement trace CSV of the same run.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also run the bump-sum L_inf separation check (bump functions only).
    #[arg(long)]
    lower_bound_check: bool,
    /// Record wall-clock seconds in the results CSV.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct AuditArgs {
    trace: PathBuf,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    phi_domain: Option<f64>,
    #[arg(long)]
    domain_volume: Option<f64>,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.function {
            c.function = v;
        }
        if let Some(v) = self.d {
            c.d = v;
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = self.q {
            c.q = v;
        }
        if let Some(v) = &self.budgets {
            c.budgets = parse_list(v).context("--budgets")?;
        }
        if let Some(v) = &self.methods {
            c.methods = parse_list::<Method>(v).context("--methods")?;
        }
        if let Some(v) = self.gl_points {
            c.quadrature.gl_points_per_axis = v;
        }
        if let Some(v) = self.samples {
            c.quadrature.samples_per_cube = v;
        }
        if let Some(v) = self.seed {
            c.quadrature.seed = v;
        }
        if let Some(v) = self.exclusion_radius {
            c.quadrature.singular_exclusion_radius = v;
        }
        let o = &mut c.outputs;
        o.results = self.results.or(o.results.take());
        o.rates = self.rates.or(o.rates.take());
        o.dump_partition = self.dump_partition.or(o.dump_partition.take());
        o.svg = self.svg.or(o.svg.take());
        o.trace = self.trace.or(o.trace.take());
        c.lower_bound_check |= self.lower_bound_check;
        c.timings |= self.timings;
        Ok(c)
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("CONVPART_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("CONVPART_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool> {
    let config = args.into_config()?;
    let outcome = run_experiment(&config)?;
    for r in &outcome.rows {
        println!(
            "{} {} N={} cells={} error={}",
            r.label,
            r.method,
            r.budget,
            r.cells,
            format_number(r.error)
        );
    }
    if let Some(lb) = &outcome.lower_bound {
        println!("{}", lower_bound_line(lb));
    }
    Ok(true)
}

fn rates(results: PathBuf, out: Option<PathBuf>) -> Result<bool> {
    let file = File::open(&results).with_context(|| format!("opening {}", results.display()))?;
    let rows: Vec<StudyRow<f64>> =
        read_results(BufReader::new(file)).with_context(|| format!("reading {}", results.display()))?;
    let mut groups: BTreeMap<(String, usize, String, String), Vec<&StudyRow<f64>>> = BTreeMap::new();
    for r in &rows {
        groups
            .entry((r.label.clone(), r.d, format_number(r.p), format_number(r.q)))
            .or_default()
            .push(r);
    }
    let mut summaries = Vec::new();
    for ((label, d, _, _), group) in &groups {
        let (p, q) = (group[0].p, group[0].q);
        let mut methods: Vec<Method> = group.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        summaries.extend(summarize(label, *d, p, q, &methods, |m| {
            let mut mine: Vec<&StudyRow<f64>> = group.iter().copied().filter(|r| r.method == m).collect();
            mine.sort_by_key(|r| r.budget);
            fit_study_rows(mine)
        })?);
    }
    match out {
        Some(path) => write_to(&path, |w| Ok(write_rates(w, &summaries)?))?,
        None => write_rates(io::stdout().lock(), &summaries)?,
    }
    Ok(true)
}

fn render(dump: PathBuf, out: PathBuf) -> Result<bool> {
    let text = std::fs::read_to_string(&dump).with_context(|| format!("reading {}", dump.display()))?;
    let parsed = PartitionDump::from_json(&text).with_context(|| format!("parsing {}", dump.display()))?;
    let svg = render_svg(&parsed)?;
    std::fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
    Ok(true)
}

fn audit(args: AuditArgs) -> Result<bool> {
    let file = File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let overrides = TraceOverrides {
        d: args.d,
        alpha: args.alpha,
        gamma: args.gamma,
        domain_volume: args.domain_volume,
        phi_domain: args.phi_domain,
    };
    let trace =
        read_trace(BufReader::new(file), &overrides).with_context(|| format!("reading {}", args.trace.display()))?;
    let a = audit_trace(&trace)?;
    println!(
        "bound {} ({}): max ratio {} vs constant {} (+1%) {}",
        a.regime,
        a.generations,
        format_number(a.max_ratio),
        format_number(a.constant),
        if a.bound_ok { "PASS" } else { "FAIL" }
    );
    println!(
        "decay: max G_k / (2^(-d alpha) G_(k-1)) = {} {}",
        format_number(a.max_decay),
        if a.decay_ok { "PASS" } else { "FAIL" }
    );
    if trace.generations.len() < 2 {
        bail!("trace has a single generation; nothing to audit");
    }
    Ok(a.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run(args) => run(*args),
        Command::Rates { results, out } => rates(results, out),
        Command::Render { dump, out } => render(dump, out),
        Command::Audit(args) => audit(args),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
