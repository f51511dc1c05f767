//! Test-function corpus with closed-form gradients and Hessians.

use crate::error::{invalid, Error, Result};
use crate::geometry::MAX_DIM;
use crate::scalar::{count, lit, Real};

/// A scalar field on `ℝ^d` with first and second derivatives.
///
/// Hessians are written row-major into a `d×d` buffer.
pub trait FieldFunction<T: Real>: Send + Sync {
    fn label(&self) -> String;
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T], out: &mut [T]);
    fn hessian(&self, x: &[T], out: &mut [T]);

    /// Points where derivatives blow up; quadrature excludes a small ball
    /// around each of them.
    fn singular_points(&self) -> &[Vec<T>] {
        &[]
    }

    /// Which Sobolev classes the function belongs to.
    fn smoothness(&self) -> &str {
        "C^inf: W^2_q for every q"
    }
}

/// `φ(x) = exp(−1/(1−|2x−1|²))` inside the inscribed ball of the unit cube,
/// zero outside.
pub fn bump_phi<T: Real>(x: &[T]) -> T {
    let s = bump_radius_sq(x);
    if s < T::one() {
        (-(T::one() - s).recip()).exp()
    } else {
        T::zero()
    }
}

/// `f_m(x) = Σ_i φ(m x − i + 1)` over the `m^d` grid cells of `(0,1)^d`.
/// Supports are disjoint, so only the bump of the cell containing `x` can be
/// nonzero.
pub fn bump_fm<T: Real>(m: usize, x: &[T]) -> T {
    let mut z = [T::zero(); MAX_DIM];
    let z = bump_local(m, x, &mut z);
    bump_phi(z)
}

#[inline]
fn bump_radius_sq<T: Real>(x: &[T]) -> T {
    x.iter()
        .map(|&xi| {
            let y = xi + xi - T::one();
            y * y
        })
        .sum()
}

/// Local coordinate `m x − (i − 1)` for the grid cell holding `x`.
fn bump_local<'a, T: Real>(m: usize, x: &[T], buf: &'a mut [T; MAX_DIM]) -> &'a [T] {
    let mf = count::<T>(m);
    for (zj, &xj) in buf.iter_mut().zip(x) {
        let s = mf * xj;
        let cell = s.floor().max(T::zero()).min(mf - T::one());
        *zj = s - cell;
    }
    &buf[..x.len()]
}

fn bump_phi_gradient<T: Real>(z: &[T], out: &mut [T]) {
    let s = bump_radius_sq(z);
    if s >= T::one() {
        out.iter_mut().for_each(|g| *g = T::zero());
        return;
    }
    let w = (T::one() - s).recip();
    let phi = (-w).exp();
    let four = lit::<T>(4.0);
    for (g, &zj) in out.iter_mut().zip(z) {
        let y = zj + zj - T::one();
        *g = -four * y * w * w * phi;
    }
}

fn bump_phi_hessian<T: Real>(z: &[T], out: &mut [T]) {
    let d = z.len();
    let s = bump_radius_sq(z);
    if s >= T::one() {
        out.iter_mut().for_each(|h| *h = T::zero());
        return;
    }
    let w = (T::one() - s).recip();
    let phi = (-w).exp();
    let (w2, w3, w4) = (w * w, w * w * w, w * w * w * w);
    for j in 0..d {
        let yj = z[j] + z[j] - T::one();
        for k in 0..d {
            let yk = z[k] + z[k] - T::one();
            let diag = if j == k { lit::<T>(-8.0) * w2 } else { T::zero() };
            out[j * d + k] = phi * (diag + yj * yk * (lit::<T>(16.0) * w4 - lit::<T>(32.0) * w3));
        }
    }
}

/// Members of the test corpus.
#[derive(Clone, Debug, PartialEq)]
pub enum Corpus<T> {
    /// `f ≡ c`.
    Const { d: usize, value: T },
    /// `f = ½|x|²`.
    Quad { d: usize },
    /// `f = ⟨a, x⟩`.
    Linear { a: Vec<T> },
    /// `f = exp(⟨a, x⟩)`.
    ExpDir { a: Vec<T> },
    /// `f = ⟨a, x⟩²`.
    Ridge { a: Vec<T> },
    /// `f = |x − c|^β`.
    SingularBeta {
        center: Vec<T>,
        beta: T,
        singular: Vec<Vec<T>>,
    },
    /// `f_m`, the sum of `m^d` scaled bumps.
    Bump { d: usize, m: usize },
}

impl<T: Real> Corpus<T> {
    pub fn constant(d: usize, value: T) -> Self {
        Corpus::Const { d, value }
    }

    pub fn quad(d: usize) -> Self {
        Corpus::Quad { d }
    }

    pub fn linear(a: Vec<T>) -> Self {
        Corpus::Linear { a }
    }

    pub fn expdir(d: usize) -> Self {
        Corpus::ExpDir { a: diagonal_unit(d) }
    }

    pub fn ridge(d: usize) -> Self {
        Corpus::Ridge { a: diagonal_unit(d) }
    }

    /// `|x − c|^β` centred in the unit cube.
    pub fn singular_beta(d: usize, beta: T) -> Self {
        let center = vec![lit(0.5); d];
        Corpus::SingularBeta {
            singular: vec![center.clone()],
            center,
            beta,
        }
    }

    pub fn bump(d: usize, m: usize) -> Self {
        Corpus::Bump { d, m: m.max(1) }
    }

    /// Resolves a CLI label such as `quad` or `bump:m=4`.
    pub fn from_label(label: &str, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::UnsupportedDimension {
                got: d,
                reason: "corpus functions need 1 <= d <= 8",
            });
        }
        let label = label.trim();
        if let Some(rest) = label.strip_prefix("bump") {
            let m = match rest {
                "" => 1,
                _ => rest
                    .strip_prefix(":m=")
                    .and_then(|v| v.parse::<usize>().ok())
                    .filter(|&m| m >= 1)
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "malformed bump label `{label}`, expected bump:m=<positive integer>"
                        ))
                    })?,
            };
            return Ok(Self::bump(d, m));
        }
        Ok(match label {
            "const" => Self::constant(d, T::one()),
            "quad" => Self::quad(d),
            "linear" => Self::linear(diagonal_unit(d)),
            "expdir" => Self::expdir(d),
            "ridge" => Self::ridge(d),
            "singular_beta" => Self::singular_beta(d, lit(0.5)),
            other => return invalid(format!("unknown function label `{other}`")),
        })
    }
}

fn diagonal_unit<T: Real>(d: usize) -> Vec<T> {
    vec![count::<T>(d).sqrt().recip(); d]
}

#[inline]
fn dot<T: Real>(a: &[T], x: &[T]) -> T {
    a.iter().zip(x).fold(T::zero(), |acc, (&ai, &xi)| acc + ai * xi)
}

impl<T: Real> FieldFunction<T> for Corpus<T> {
    fn label(&self) -> String {
        match self {
            Corpus::Const { .. } => "const".into(),
            Corpus::Quad { .. } => "quad".into(),
            Corpus::Linear { .. } => "linear".into(),
            Corpus::ExpDir { .. } => "expdir".into(),
            Corpus::Ridge { .. } => "ridge".into(),
            Corpus::SingularBeta { .. } => "singular_beta".into(),
            Corpus::Bump { m, .. } => format!("bump:m={m}"),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Corpus::Const { d, .. } | Corpus::Quad { d } | Corpus::Bump { d, .. } => *d,
            Corpus::Linear { a } | Corpus::ExpDir { a } | Corpus::Ridge { a } => a.len(),
            Corpus::SingularBeta { center, .. } => center.len(),
        }
    }

    fn value(&self, x: &[T]) -> T {
        match self {
            Corpus::Const { value, .. } => *value,
            Corpus::Quad { .. } => dot(x, x) * lit(0.5),
            Corpus::Linear { a } => dot(a, x),
            Corpus::ExpDir { a } => dot(a, x).exp(),
            Corpus::Ridge { a } => {
                let t = dot(a, x);
                t * t
            }
            Corpus::SingularBeta { center, beta, .. } => {
                let r2: T = x.iter().zip(center).map(|(&xi, &c)| (xi - c) * (xi - c)).sum();
                r2.powf(*beta * lit(0.5))
            }
            Corpus::Bump { m, .. } => bump_fm(*m, x),
        }
    }

    fn gradient(&self, x: &[T], out: &mut [T]) {
        match self {
            Corpus::Const { .. } => out.iter_mut().for_each(|g| *g = T::zero()),
            Corpus::Quad { .. } => out.copy_from_slice(x),
            Corpus::Linear { a } => out.copy_from_slice(a),
            Corpus::ExpDir { a } => {
                let e = dot(a, x).exp();
                out.iter_mut().zip(a).for_each(|(g, &ai)| *g = ai * e);
            }
            Corpus::Ridge { a } => {
                let t = dot(a, x);
                out.iter_mut().zip(a).for_each(|(g, &ai)| *g = (t + t) * ai);
            }
            Corpus::SingularBeta { center, beta, .. } => {
                let r2: T = x.iter().zip(center).map(|(&xi, &c)| (xi - c) * (xi - c)).sum();
                if r2 == T::zero() {
                    out.iter_mut().for_each(|g| *g = T::zero());
                    return;
                }
                // β r^{β−2} (x − c)
                let scale = *beta * r2.powf((*beta - lit(2.0)) * lit(0.5));
                for ((g, &xi), &c) in out.iter_mut().zip(x).zip(center) {
                    *g = scale * (xi - c);
                }
            }
            Corpus::Bump { m, .. } => {
                let mut z = [T::zero(); MAX_DIM];
                let z = bump_local(*m, x, &mut z);
                bump_phi_gradient(z, out);
                let mf = count::<T>(*m);
                out.iter_mut().for_each(|g| *g = *g * mf);
            }
        }
    }

    fn hessian(&self, x: &[T], out: &mut [T]) {
        let d = x.len();
        match self {
            Corpus::Const { .. } | Corpus::Linear { .. } => out.iter_mut().for_each(|h| *h = T::zero()),
            Corpus::Quad { .. } => {
                for j in 0..d {
                    for k in 0..d {
                        out[j * d + k] = if j == k { T::one() } else { T::zero() };
                    }
                }
            }
            Corpus::ExpDir { a } => {
                let e = dot(a, x).exp();
                for j in 0..d {
                    for k in 0..d {
                        out[j * d + k] = a[j] * a[k] * e;
                    }
                }
            }
            Corpus::Ridge { a } => {
                for j in 0..d {
                    for k in 0..d {
                        out[j * d + k] = lit::<T>(2.0) * a[j] * a[k];
                    }
                }
            }
            Corpus::SingularBeta { center, beta, .. } => {
                let r2: T = x.iter().zip(center).map(|(&xi, &c)| (xi - c) * (xi - c)).sum();
                if r2 == T::zero() {
                    out.iter_mut().for_each(|h| *h = T::zero());
                    return;
                }
                // β r^{β−2} [I + (β−2) (x−c)(x−c)ᵀ / r²]
                let scale = *beta * r2.powf((*beta - lit(2.0)) * lit(0.5));
                let b2 = *beta - lit(2.0);
                for j in 0..d {
                    for k in 0..d {
                        let outer = (x[j] - center[j]) * (x[k] - center[k]) / r2;
                        let id = if j == k { T::one() } else { T::zero() };
                        out[j * d + k] = scale * (id + b2 * outer);
                    }
                }
            }
            Corpus::Bump { m, .. } => {
                let mut z = [T::zero(); MAX_DIM];
                let z = bump_local(*m, x, &mut z);
                bump_phi_hessian(z, out);
                let m2 = count::<T>(*m * *m);
                out.iter_mut().for_each(|h| *h = *h * m2);
            }
        }
    }

    fn singular_points(&self) -> &[Vec<T>] {
        match self {
            Corpus::SingularBeta { singular, .. } => singular,
            _ => &[],
        }
    }

    fn smoothness(&self) -> &str {
        match self {
            Corpus::SingularBeta { .. } => "|x-c|^beta: W^2_q iff q(2-beta) < d (beta=1/2, d=2: q < 4/3)",
            Corpus::Bump { .. } => "C^inf with compact support in each grid cell",
            _ => "C^inf: W^2_q for every q",
        }
    }
}

/// The standard corpus in dimension `d`.
pub fn corpus<T: Real>(d: usize) -> Vec<Corpus<T>> {
    let mut out = vec![
        Corpus::quad(d),
        Corpus::expdir(d),
        Corpus::ridge(d),
        Corpus::singular_beta(d, lit(0.5)),
    ];
    out.extend([1, 2, 4, 8].map(|m| Corpus::bump(d, m)));
    out.push(Corpus::constant(d, T::one()));
    out.push(Corpus::linear(diagonal_unit(d)));
    out
}
