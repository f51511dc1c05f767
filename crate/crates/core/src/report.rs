//! Text formats: study results and rate summaries as CSV, refinement traces
//! as CSV with `#` metadata lines, and partitions as JSON.
//!
//! Numbers are written in shortest round-trip form; `p = ∞` is the string
//! `inf`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{Method, RateRegime, RateSummary, StudyRow};
use crate::approximant::PiecewiseConstant;
use crate::error::{Error, Result};
use crate::geometry::{Cube, SlabCell};
use crate::refinement::{GenerationRecord, RefinementParams, RefinementTrace};
use crate::scalar::{lit, to_f64, Real};

pub const RESULTS_HEADER: [&str; 9] = ["label", "d", "p", "q", "method", "N", "cells", "error", "seconds"];
pub const RATES_HEADER: [&str; 6] = ["label", "method", "slope", "r2", "predicted", "regime"];
pub const TRACE_HEADER: [&str; 6] = ["k", "G_alpha", "N_k", "marked", "t_k", "cells"];

/// Shortest round-trip decimal, `inf` for infinity.
pub fn format_number<T: Real>(x: T) -> String {
    if x.is_infinite() && x > T::zero() {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Inverse of [`format_number`]; also accepts `infinity` and `∞`.
pub fn parse_number<T: Real>(s: &str) -> Result<T> {
    let s = s.trim();
    match s {
        "inf" | "infinity" | "Inf" | "∞" => Ok(T::infinity()),
        _ => s
            .parse::<f64>()
            .map(lit)
            .map_err(|_| Error::Parse(format!("expected a number, got {s:?}"))),
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Writes study rows; `seconds` is `NA` unless `timings` is set, which
/// keeps repeated runs byte-identical.
pub fn write_results<T: Real, W: Write>(out: W, rows: &[StudyRow<T>], timings: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.d.to_string(),
            format_number(r.p),
            format_number(r.q),
            r.method.name().to_string(),
            r.budget.to_string(),
            r.cells.to_string(),
            format_number(r.error),
            if timings {
                format_number(r.seconds)
            } else {
                "NA".to_string()
            },
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<T: Real, R: std::io::Read>(input: R) -> Result<Vec<StudyRow<T>>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Parse(format!(
            "results header must be {}",
            RESULTS_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let int = |i: usize| -> Result<u64> {
            rec[i].trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "column {} must be an integer, got {:?}",
                    RESULTS_HEADER[i], &rec[i]
                ))
            })
        };
        rows.push(StudyRow {
            label: rec[0].to_string(),
            d: int(1)? as usize,
            p: parse_number(&rec[2])?,
            q: parse_number(&rec[3])?,
            method: rec[4].parse()?,
            budget: int(5)?,
            cells: int(6)? as usize,
            error: parse_number(&rec[7])?,
            seconds: if &rec[8] == "NA" {
                f64::NAN
            } else {
                parse_number(&rec[8])?
            },
        });
    }
    Ok(rows)
}

/// Writes one line per summary; missing fits are written as `NA`.
pub fn write_rates<T: Real, W: Write>(out: W, summaries: &[RateSummary<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATES_HEADER).map_err(csv_err)?;
    for s in summaries {
        let (slope, r2) = match &s.fit {
            Some(f) => (format_number(f.slope), format_number(f.r_squared)),
            None => ("NA".to_string(), "NA".to_string()),
        };
        w.write_record([
            s.label.clone(),
            s.method.name().to_string(),
            slope,
            r2,
            format_number(s.predicted),
            s.regime.name().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed line of a rate summary CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct RateLine {
    pub label: String,
    pub method: Method,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub predicted: f64,
    pub regime: RateRegime,
}

pub fn read_rates<R: std::io::Read>(input: R) -> Result<Vec<RateLine>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RATES_HEADER) {
        return Err(Error::Parse(format!("rates header must be {}", RATES_HEADER.join(","))));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s == "NA" {
            Ok(None)
        } else {
            parse_number(s).map(Some)
        }
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(RateLine {
                label: rec[0].to_string(),
                method: rec[1].parse()?,
                slope: opt(&rec[2])?,
                r2: opt(&rec[3])?,
                predicted: parse_number(&rec[4])?,
                regime: rec[5].parse()?,
            })
        })
        .collect()
}

/// Writes `trace` with its parameters as leading `# key=value` lines.
pub fn write_trace<T: Real, W: Write>(mut out: W, trace: &RefinementTrace<T>) -> Result<()> {
    writeln!(out, "# d={}", trace.d)?;
    writeln!(out, "# alpha={}", format_number(trace.alpha))?;
    writeln!(out, "# gamma={}", format_number(trace.gamma))?;
    writeln!(out, "# domain_volume={}", format_number(trace.domain_volume))?;
    writeln!(out, "# phi_domain={}", format_number(trace.phi_domain))?;
    writeln!(out, "# accepted={}", trace.accepted)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for g in &trace.generations {
        w.write_record([
            g.k.to_string(),
            format_number(g.g_alpha),
            g.n_k.to_string(),
            g.marked.to_string(),
            g.t_k.to_string(),
            g.cells.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata that can override or complete the `#` lines of a trace file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceOverrides {
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub domain_volume: Option<f64>,
    pub phi_domain: Option<f64>,
}

/// Reads a trace CSV. Columns beyond the exported ones (thresholds) are
/// not stored, so they come back as zero / `None`.
pub fn read_trace<R: BufRead>(input: R, overrides: &TraceOverrides) -> Result<RefinementTrace<f64>> {
    let mut meta = std::collections::HashMap::new();
    let mut body = String::new();
    for line in input.lines() {
        let line = line?;
        match line.trim_start().strip_prefix('#') {
            Some(rest) => {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
            None => {
                body.push_str(&line);
                body.push('\n');
            }
        }
    }
    let get = |key: &str, o: Option<f64>| -> Result<f64> {
        match (o, meta.get(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(s)) => parse_number(s),
            (None, None) => Err(Error::Parse(format!("trace is missing `{key}`; pass it explicitly"))),
        }
    };
    let d = match overrides.d {
        Some(d) => d,
        None => get("d", None)? as usize,
    };
    let alpha = get("alpha", overrides.alpha)?;
    let gamma = get("gamma", overrides.gamma)?;
    let domain_volume = match (overrides.domain_volume, meta.contains_key("domain_volume")) {
        (None, false) => 1.0,
        (o, _) => get("domain_volume", o)?,
    };
    let phi_domain = get("phi_domain", overrides.phi_domain)?;
    let regime = RefinementParams::new(alpha, gamma)?.regime();

    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse(format!("trace header must be {}", TRACE_HEADER.join(","))));
    }
    let mut generations = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let int = |i: usize| -> Result<u64> {
            rec[i].trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "column {} must be an integer, got {:?}",
                    TRACE_HEADER[i], &rec[i]
                ))
            })
        };
        generations.push(GenerationRecord {
            k: int(0)? as u32,
            g_alpha: parse_number(&rec[1])?,
            n_k: int(2)?,
            marked: int(3)? as usize,
            t_k: int(4)?,
            cells: int(5)? as usize,
            threshold: 0.0,
            min_marked_g: None,
        });
    }
    if generations.is_empty() {
        return Err(Error::Parse("trace has no generations".into()));
    }
    let accepted = match meta.get("accepted") {
        Some(s) => s
            .parse()
            .map_err(|_| Error::Parse(format!("bad accepted index {s:?}")))?,
        None => generations.len().saturating_sub(2),
    };
    Ok(RefinementTrace {
        d,
        alpha,
        gamma,
        regime,
        domain_volume,
        phi_domain,
        generations,
        accepted,
    })
}

/// Serialized cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeDump {
    pub corner: Vec<f64>,
    pub side: f64,
    #[serde(default)]
    pub level: u32,
}

/// Serialized slab cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabDump {
    pub parent: CubeDump,
    pub direction: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub closed_hi: bool,
}

/// Serialized piecewise constant: slab geometry plus index-aligned values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDump {
    pub d: usize,
    #[serde(default)]
    pub label: Option<String>,
    pub domain: CubeDump,
    pub cells: Vec<SlabDump>,
    pub values: Vec<f64>,
}

fn cube_dump<T: Real>(c: &Cube<T>) -> CubeDump {
    CubeDump {
        corner: c.corner().iter().map(|&x| to_f64(x)).collect(),
        side: to_f64(c.side()),
        level: c.level(),
    }
}

impl PartitionDump {
    pub fn from_approximant<T: Real>(s: &PiecewiseConstant<T>, label: Option<String>) -> Self {
        let part = s.partition();
        Self {
            d: part.domain().dim(),
            label,
            domain: cube_dump(part.domain()),
            cells: part
                .cells()
                .iter()
                .map(|c| SlabDump {
                    parent: cube_dump(c.parent()),
                    direction: c.direction().iter().map(|&x| to_f64(x)).collect(),
                    lo: to_f64(c.lo()),
                    hi: to_f64(c.hi()),
                    closed_hi: c.closed_hi(),
                })
                .collect(),
            values: s.values().iter().map(|&v| to_f64(v)).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dump: Self = serde_json::from_str(s)?;
        if dump.values.len() != dump.cells.len() {
            return Err(Error::Parse(format!(
                "{} values for {} cells",
                dump.values.len(),
                dump.cells.len()
            )));
        }
        Ok(dump)
    }

    pub fn domain(&self) -> Result<Cube<f64>> {
        Cube::with_level(self.domain.corner.clone(), self.domain.side, self.domain.level)
    }

    /// Rebuilds the slab cells.
    pub fn slabs(&self) -> Result<Vec<SlabCell<f64>>> {
        self.cells
            .iter()
            .map(|c| {
                let parent = Cube::with_level(c.parent.corner.clone(), c.parent.side, c.parent.level)?;
                SlabCell::from_parts(parent, c.direction.clone(), c.lo, c.hi, c.closed_hi)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::RateFit;
    use crate::approximant::{build, ApproximationProblem};
    use crate::functions::{Corpus, FieldFunction};
    use crate::quadrature::{Quadrature, QuadratureConfig};

    fn row(method: Method, n: u64, error: f64) -> StudyRow<f64> {
        StudyRow {
            label: "bump:m=2".into(),
            d: 2,
            p: f64::INFINITY,
            q: 1.9,
            method,
            budget: n,
            cells: 7,
            error,
            seconds: 0.25,
        }
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456789.125, f64::INFINITY, 2.0] {
            assert_eq!(parse_number::<f64>(&format_number(x)).unwrap(), x);
        }
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(2.0f64), "2");
        assert!(parse_number::<f64>("two").is_err());
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![row(Method::Algorithm1, 4, 0.125), row(Method::Uniform, 16, 1.0 / 3.0)];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows, false).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,d,p,q,method,N,cells,error,seconds\n"));
        assert!(text.contains("bump:m=2,2,inf,1.9,algorithm1,4,7,0.125,NA"));
        let back: Vec<StudyRow<f64>> = read_results(buf.as_slice()).unwrap();
        assert_eq!(back[1].error, 1.0 / 3.0);
        assert!(back[0].seconds.is_nan());
        let mut timed = Vec::new();
        write_results(&mut timed, &rows, true).unwrap();
        assert!(String::from_utf8(timed).unwrap().contains(",0.25\n"));
        assert!(read_results::<f64, _>("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn rates_round_trip() {
        let s = vec![
            RateSummary {
                label: "quad".into(),
                method: Method::Algorithm1,
                fit: Some(RateFit {
                    slope: -0.6,
                    intercept: 0.0,
                    r_squared: 0.99,
                }),
                predicted: -2.0 / 3.0,
                regime: RateRegime::Theorem1,
            },
            RateSummary {
                label: "const".into(),
                method: Method::Uniform,
                fit: None,
                predicted: -2.0 / 3.0,
                regime: RateRegime::Theorem1,
            },
        ];
        let mut buf = Vec::new();
        write_rates(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("const,uniform,NA,NA,"));
        let back = read_rates(buf.as_slice()).unwrap();
        assert_eq!(back[0].slope, Some(-0.6));
        assert_eq!(back[1].slope, None);
        assert_eq!(back[0].regime, RateRegime::Theorem1);
    }

    #[test]
    fn trace_round_trip() {
        let q = Quadrature::new(QuadratureConfig::default()).unwrap();
        let f = Corpus::quad(2);
        let a = build(&ApproximationProblem::new(&f, 2.0, 2.0, 100).unwrap(), &q).unwrap();
        let t = a.trace.unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &t).unwrap();
        let back = read_trace(buf.as_slice(), &TraceOverrides::default()).unwrap();
        assert_eq!(back.generations.len(), t.generations.len());
        assert_eq!(back.alpha, t.alpha);
        assert_eq!(back.phi_domain, t.phi_domain);
        assert_eq!(back.accepted, t.accepted);
        for (a, b) in back.generations.iter().zip(&t.generations) {
            assert_eq!(
                (a.g_alpha, a.n_k, a.marked, a.t_k, a.cells),
                (b.g_alpha, b.n_k, b.marked, b.t_k, b.cells)
            );
        }
        let text = String::from_utf8(buf).unwrap();
        let bare: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(read_trace(bare.as_bytes(), &TraceOverrides::default()).is_err());
        let o = TraceOverrides {
            d: Some(2),
            alpha: Some(t.alpha),
            gamma: Some(0.5),
            domain_volume: None,
            phi_domain: Some(t.phi_domain),
        };
        assert_eq!(
            read_trace(bare.as_bytes(), &o).unwrap().generations.len(),
            t.generations.len()
        );
    }

    #[test]
    fn partition_dump_round_trip() {
        let q = Quadrature::new(QuadratureConfig::default()).unwrap();
        let f = Corpus::expdir(2);
        let a = build(&ApproximationProblem::new(&f, 2.0, 2.0, 64).unwrap(), &q).unwrap();
        let dump = PartitionDump::from_approximant(&a.approximant, Some(f.label()));
        let back = PartitionDump::from_json(&dump.to_json().unwrap()).unwrap();
        assert_eq!(back, dump);
        let slabs = back.slabs().unwrap();
        assert_eq!(slabs.as_slice(), a.approximant.partition().cells());
        assert!(
            PartitionDump::from_json(r#"{"d":2,"domain":{"corner":[0,0],"side":1},"cells":[],"values":[1]}"#).is_err()
        );
    }
}
