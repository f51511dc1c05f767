//! Convergence-rate fitting, predicted rates, counting-lemma audits and the
//! bump-sum lower bound.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::approximant::{
    build, build_isotropic_baseline, check_admissible, Approximation, ApproximationProblem, Baseline,
};
use crate::error::{invalid, Error, Result};
use crate::functions::{Corpus, FieldFunction};
use crate::quadrature::Quadrature;
use crate::refinement::{RefinementTrace, Regime};
use crate::scalar::{lit, reciprocal_exponent, to_f64, Real};

/// Relative slack allowed on the counting-lemma bounds.
pub const LEMMA_SLACK: f64 = 0.01;
/// Relative tolerance on the per-generation decay of `G_α`.
pub const DECAY_TOLERANCE: f64 = 1e-9;

/// Least-squares fit of `ln error = intercept + slope · ln N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

pub fn fit_rate<T: Real>(points: &[(u64, T)]) -> Result<RateFit<T>> {
    if points.len() < 3 {
        return invalid(format!("rate fit needs at least 3 points, got {}", points.len()));
    }
    if let Some((n, e)) = points
        .iter()
        .find(|(n, e)| !(*e > T::zero()) || !e.is_finite() || *n == 0)
    {
        return invalid(format!(
            "rate fit needs N >= 1 and positive finite errors, got ({n}, {e})"
        ));
    }
    let mut ns: Vec<u64> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return invalid("rate fit needs distinct N values");
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| to_f64(p.1).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_res <= f64::EPSILON * f64::EPSILON * ss_tot.max(1.0) || ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        slope: lit(slope),
        intercept: lit(intercept),
        r_squared: lit(r_squared),
    })
}

/// Which approximation result governs the predicted rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RateRegime {
    /// Saturation rate `2/(d+1)`.
    Theorem1,
    /// Reduced rate `d(2/d + 1/p − 1/q)`.
    Theorem2,
    /// `d < 2`: only the embedding rate `1/d` is claimed.
    EmbeddingOnly,
}

impl RateRegime {
    pub fn name(&self) -> &'static str {
        match self {
            RateRegime::Theorem1 => "theorem1",
            RateRegime::Theorem2 => "theorem2",
            RateRegime::EmbeddingOnly => "embedding_only",
        }
    }
}

impl fmt::Display for RateRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(RateRegime::Theorem1),
            "theorem2" => Ok(RateRegime::Theorem2),
            "embedding_only" => Ok(RateRegime::EmbeddingOnly),
            other => Err(Error::Parse(format!("unknown rate regime {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictedRate<T> {
    /// `ρ` in `E_N = O(N^{−ρ})`.
    pub rate: T,
    pub regime: RateRegime,
    /// `2/d + 1/p − 1/q > 1/d²`: the rate beats the isotropic `1/d`.
    pub beats_isotropic: bool,
}

/// `d(2/d + 1/p − 1/q)`.
pub fn theorem2_exponent<T: Real>(d: usize, p: T, q: T) -> T {
    let dd: T = lit(d as f64);
    dd * (lit::<T>(2.0) / dd + reciprocal_exponent(p) - q.recip())
}

pub fn predicted_rate<T: Real>(d: usize, p: T, q: T) -> Result<PredictedRate<T>> {
    check_admissible(d, p, q)?;
    let dd: T = lit(d as f64);
    let two: T = lit(2.0);
    let s = two / dd + reciprocal_exponent(p) - q.recip();
    let beats_isotropic = s > (dd * dd).recip();
    if d < 2 {
        return Ok(PredictedRate {
            rate: dd.recip(),
            regime: RateRegime::EmbeddingOnly,
            beats_isotropic,
        });
    }
    if two / (dd + T::one()) + reciprocal_exponent(p) - q.recip() >= T::zero() {
        Ok(PredictedRate {
            rate: two / (dd + T::one()),
            regime: RateRegime::Theorem1,
            beats_isotropic,
        })
    } else {
        Ok(PredictedRate {
            rate: theorem2_exponent(d, p, q),
            regime: RateRegime::Theorem2,
            beats_isotropic,
        })
    }
}

/// Closed-form constant of the counting lemma for `regime`.
///
/// `C₁ = 2^{d(α+1)(γ+2)/(γ+1)} (1 − 2^{−αd(γ+1)/(α+1)})^{−(α+1)/(γ+1)}`,
/// `C₂ = 2^{dα(γ+2)/γ} (1 − 2^{−dγ})^{−1}`.
pub fn lemma_constant<T: Real>(d: usize, gamma: T, alpha: T, regime: Regime) -> Result<T> {
    let (g, a, d) = (to_f64(gamma), to_f64(alpha), d as f64);
    let c = match regime {
        Regime::Lemma1 => {
            if !(g >= 0.0 && g <= a && a > 0.0) {
                return invalid(format!(
                    "C1 needs 0 <= gamma <= alpha and alpha > 0, got gamma={g}, alpha={a}"
                ));
            }
            let head = (d * (a + 1.0) * (g + 2.0) / (g + 1.0)).exp2();
            let base = 1.0 - (-(a * d * (g + 1.0) / (a + 1.0))).exp2();
            head * base.powf(-(a + 1.0) / (g + 1.0))
        }
        Regime::Lemma2 => {
            if !(a > 0.0 && a < g) {
                return invalid(format!("C2 needs 0 < alpha < gamma, got gamma={g}, alpha={a}"));
            }
            (d * a * (g + 2.0) / g).exp2() / (1.0 - (-(d * g)).exp2())
        }
    };
    Ok(lit(c))
}

/// Outcome of checking a refinement trace against its counting lemma.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaAudit<T> {
    pub regime: Regime,
    pub constant: T,
    /// `max_k G_α(□_k) N_k^e / (|Ω|^α Φ(Ω))` over `k ≥ 1`.
    pub max_ratio: T,
    /// `max_k G_α(□_k) / (2^{−dα} G_α(□_{k−1}))` over `k ≥ 1`.
    pub max_decay: T,
    pub bound_ok: bool,
    pub decay_ok: bool,
    pub generations: usize,
}

impl<T: Real> LemmaAudit<T> {
    pub fn passed(&self) -> bool {
        self.bound_ok && self.decay_ok
    }
}

/// Audits every generation `k ≥ 1` of `trace`, including the one rejected
/// for exceeding the budget.
pub fn audit_trace<T: Real>(trace: &RefinementTrace<T>) -> Result<LemmaAudit<T>> {
    let constant = lemma_constant(trace.d, trace.gamma, trace.alpha, trace.regime)?;
    let (a, g) = (to_f64(trace.alpha), to_f64(trace.gamma));
    let exponent = match trace.regime {
        Regime::Lemma1 => (a + 1.0) / (g + 1.0),
        Regime::Lemma2 => a / g,
    };
    let scale = to_f64(trace.domain_volume).powf(a) * to_f64(trace.phi_domain);
    let decay = (-(trace.d as f64) * a).exp2();
    let mut max_ratio = 0.0f64;
    let mut max_decay = 0.0f64;
    for w in trace.generations.windows(2) {
        let (prev, cur) = (to_f64(w[0].g_alpha), to_f64(w[1].g_alpha));
        if scale > 0.0 {
            max_ratio = max_ratio.max(cur * (w[1].n_k as f64).powf(exponent) / scale);
        }
        if prev > 0.0 {
            max_decay = max_decay.max(cur / (decay * prev));
        } else if cur > 0.0 {
            max_decay = f64::INFINITY;
        }
    }
    let c = to_f64(constant);
    Ok(LemmaAudit {
        regime: trace.regime,
        constant,
        max_ratio: lit(max_ratio),
        max_decay: lit(max_decay),
        bound_ok: max_ratio <= c * (1.0 + LEMMA_SLACK),
        decay_ok: max_decay <= 1.0 + DECAY_TOLERANCE,
        generations: trace.generations.len(),
    })
}

/// Approximation methods compared in a study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Algorithm1,
    Uniform,
    AdaptiveDyadic,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Algorithm1, Method::Uniform, Method::AdaptiveDyadic];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Algorithm1 => "algorithm1",
            Method::Uniform => "uniform",
            Method::AdaptiveDyadic => "adaptive_dyadic",
        }
    }

    pub fn build<T: Real>(
        &self,
        problem: &ApproximationProblem<'_, T>,
        quad: &Quadrature<T>,
    ) -> Result<Approximation<T>> {
        match self {
            Method::Algorithm1 => build(problem, quad),
            Method::Uniform => build_isotropic_baseline(problem, quad, Baseline::Uniform),
            Method::AdaptiveDyadic => build_isotropic_baseline(problem, quad, Baseline::AdaptiveDyadic),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::Parse(format!(
                "unknown method {s:?}; expected algorithm1, uniform or adaptive_dyadic"
            ))
        })
    }
}

/// One `(method, N)` measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow<T> {
    pub label: String,
    pub d: usize,
    pub p: T,
    pub q: T,
    pub method: Method,
    pub budget: u64,
    pub cells: usize,
    pub error: T,
    pub seconds: f64,
}

/// Fitted and predicted rate for one method.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSummary<T> {
    pub label: String,
    pub method: Method,
    /// `None` when fewer than three usable points remain.
    pub fit: Option<RateFit<T>>,
    /// Predicted slope `−ρ`.
    pub predicted: T,
    pub regime: RateRegime,
}

/// Errors of several methods over increasing budgets for one function.
#[derive(Clone, Debug)]
pub struct RateStudy<T> {
    pub label: String,
    pub d: usize,
    pub p: T,
    pub q: T,
    pub budgets: Vec<u64>,
    /// Sorted by method, then budget.
    pub rows: Vec<StudyRow<T>>,
    /// Refinement traces of the adaptive runs, keyed like `rows`.
    pub traces: Vec<(Method, u64, RefinementTrace<T>)>,
}

impl<T: Real> RateStudy<T> {
    pub fn run(
        f: &dyn FieldFunction<T>,
        p: T,
        q: T,
        budgets: &[u64],
        methods: &[Method],
        quad: &Quadrature<T>,
    ) -> Result<Self> {
        if budgets.is_empty() {
            return invalid("budgets must not be empty");
        }
        if budgets.windows(2).any(|w| w[0] >= w[1]) || budgets[0] < 1 {
            return invalid(format!("budgets must be strictly increasing and >= 1, got {budgets:?}"));
        }
        if methods.is_empty() {
            return invalid("at least one method is required");
        }
        let mut methods = methods.to_vec();
        methods.sort();
        methods.dedup();
        let mut rows = Vec::new();
        let mut traces = Vec::new();
        for &method in &methods {
            for &n in budgets {
                let problem = ApproximationProblem::new(f, p, q, n)?;
                let start = Instant::now();
                let a = method.build(&problem, quad)?;
                let error = quad.lp_error(f, &a.approximant, p)?;
                let seconds = start.elapsed().as_secs_f64();
                log::info!(
                    "{} {method} N={n}: {} cells, error {error} ({seconds:.2}s)",
                    f.label(),
                    a.cells()
                );
                rows.push(StudyRow {
                    label: f.label(),
                    d: f.dim(),
                    p,
                    q,
                    method,
                    budget: n,
                    cells: a.cells(),
                    error,
                    seconds,
                });
                if let Some(t) = a.trace {
                    traces.push((method, n, t));
                }
            }
        }
        Ok(Self {
            label: f.label(),
            d: f.dim(),
            p,
            q,
            budgets: budgets.to_vec(),
            rows,
            traces,
        })
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &StudyRow<T>> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn error_at(&self, method: Method, budget: u64) -> Option<T> {
        self.rows_for(method).find(|r| r.budget == budget).map(|r| r.error)
    }

    /// Rate fit for `method`, see [`fit_study_rows`].
    pub fn fit(&self, method: Method) -> Option<RateFit<T>> {
        fit_study_rows(self.rows_for(method))
    }

    pub fn summaries(&self) -> Result<Vec<RateSummary<T>>> {
        let mut methods: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        methods.dedup();
        summarize(&self.label, self.d, self.p, self.q, &methods, |m| self.fit(m))
    }
}

/// Fits `ln error` against `ln N` over rows whose partition has more than
/// one cell; `None` if fewer than three such rows remain or an error is
/// not positive.
pub fn fit_study_rows<'a, T: Real + 'a>(rows: impl IntoIterator<Item = &'a StudyRow<T>>) -> Option<RateFit<T>> {
    let points: Vec<(u64, T)> = rows
        .into_iter()
        .filter(|r| r.cells > 1)
        .map(|r| (r.budget, r.error))
        .collect();
    if points.len() < 3 || points.iter().any(|p| !(p.1 > T::zero())) {
        return None;
    }
    fit_rate(&points).ok()
}

/// Pairs fitted slopes with the predicted rate of `(d, p, q)`.
pub fn summarize<T: Real>(
    label: &str,
    d: usize,
    p: T,
    q: T,
    methods: &[Method],
    fit: impl Fn(Method) -> Option<RateFit<T>>,
) -> Result<Vec<RateSummary<T>>> {
    let predicted = predicted_rate(d, p, q)?;
    Ok(methods
        .iter()
        .map(|&m| RateSummary {
            label: label.to_string(),
            method: m,
            fit: fit(m),
            predicted: -predicted.rate,
            regime: predicted.regime,
        })
        .collect())
}

/// Result of the bump-sum separation check.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundReport<T> {
    pub m: usize,
    pub d: usize,
    pub budget: u64,
    /// `‖f_m‖_∞ / 3 = e^{−1}/3`.
    pub threshold: T,
    pub algorithm1_error: T,
    pub uniform_error: T,
    pub algorithm1_cells: usize,
    pub uniform_cells: usize,
}

impl<T: Real> LowerBoundReport<T> {
    /// Both errors reach `0.95 · threshold`.
    pub fn passed(&self) -> bool {
        let bar = lit::<T>(0.95) * self.threshold;
        self.algorithm1_error >= bar && self.uniform_error >= bar
    }
}

/// `L_∞` errors of the slab construction and of the uniform grid for the
/// bump sum `f_m` at budget `m^d`, using `q = 2`.
pub fn lower_bound_check<T: Real>(m: usize, d: usize, quad: &Quadrature<T>) -> Result<LowerBoundReport<T>> {
    lower_bound_check_with(m, d, lit(2.0), quad)
}

pub fn lower_bound_check_with<T: Real>(m: usize, d: usize, q: T, quad: &Quadrature<T>) -> Result<LowerBoundReport<T>> {
    if m < 1 {
        return invalid("bump multiplicity m must be at least 1");
    }
    let budget = (m as u64)
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidArgument(format!("m^d overflows for m={m}, d={d}")))?;
    let f = Corpus::<T>::bump(d, m);
    let problem = ApproximationProblem::new(&f, T::infinity(), q, budget)?;
    let a = Method::Algorithm1.build(&problem, quad)?;
    let u = Method::Uniform.build(&problem, quad)?;
    Ok(LowerBoundReport {
        m,
        d,
        budget,
        threshold: lit::<T>((-1.0f64).exp() / 3.0),
        algorithm1_error: quad.lp_error(&f, &a.approximant, T::infinity())?,
        uniform_error: quad.lp_error(&f, &u.approximant, T::infinity())?,
        algorithm1_cells: a.cells(),
        uniform_cells: u.cells(),
    })
}
