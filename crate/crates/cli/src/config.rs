//! Experiment configuration: a JSON file and command-line flags, flags
//! taking precedence.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use convpart::analysis::Method;
use convpart::approximant::check_admissible;
use convpart::report::parse_number;
use convpart::{Corpus, QuadratureConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exponent that may be infinite; reads numbers or the string `inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl std::str::FromStr for Exponent {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Exponent(parse_number(s)?))
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Exponent(x)),
            Raw::Text(s) => parse_number(&s).map(Exponent).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub results: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    pub dump_partition: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: String,
    pub d: usize,
    pub p: Exponent,
    pub q: Exponent,
    pub budgets: Vec<u64>,
    #[serde(with = "method_names")]
    pub methods: Vec<Method>,
    pub quadrature: QuadratureConfig,
    pub outputs: Outputs,
    pub lower_bound_check: bool,
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            function: "quad".into(),
            d: 2,
            p: Exponent(2.0),
            q: Exponent(2.0),
            budgets: vec![64, 256, 1024, 4096],
            methods: vec![Method::Algorithm1, Method::Uniform],
            quadrature: QuadratureConfig::default(),
            outputs: Outputs {
                results: Some("results.csv".into()),
                rates: Some("rates.csv".into()),
                ..Outputs::default()
            },
            lower_bound_check: false,
            timings: false,
        }
    }
}

mod method_names {
    use convpart::analysis::Method;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &[Method], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(Method::name))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Method>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Parses the target function.
    pub fn corpus(&self) -> Result<Corpus<f64>> {
        Ok(Corpus::from_label(&self.function, self.d)?)
    }

    /// `m` when the target is a bump sum.
    pub fn bump_multiplicity(&self) -> Option<usize> {
        match self.corpus().ok()? {
            Corpus::Bump { m, .. } => Some(m),
            _ => None,
        }
    }

    /// Checks every constraint and names the first violated one.
    pub fn validate(&self) -> Result<()> {
        self.corpus()?;
        if self.budgets.is_empty() {
            bail!("budgets must not be empty");
        }
        if self.budgets[0] < 1 {
            bail!("budgets must be >= 1, got {}", self.budgets[0]);
        }
        if let Some(w) = self.budgets.windows(2).find(|w| w[0] >= w[1]) {
            bail!("budgets must be strictly increasing, got {} then {}", w[0], w[1]);
        }
        if self.methods.is_empty() {
            bail!("at least one method is required");
        }
        check_admissible(self.d, self.p.0, self.q.0)?;
        self.quadrature.validate()?;
        if self.lower_bound_check && self.bump_multiplicity().is_none() {
            bail!(
                "--lower-bound-check needs a bump function (bump or bump:m=<k>), got {:?}",
                self.function
            );
        }
        if self.outputs.svg.is_some() && self.d != 2 {
            bail!("rendering supports d=2 only");
        }
        Ok(())
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| anyhow::anyhow!("{x:?}: {e}")))
        .collect()
}
