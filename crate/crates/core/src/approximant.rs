//! Piecewise constant approximants on slab partitions.
//!
//! [`build`] refines the unit cube with the `W^1_q + W^2_q` energy, cuts
//! every dyadic cube into equidistant slabs orthogonal to its average
//! gradient and assigns each slab its sampled mean.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::functions::FieldFunction;
use crate::geometry::{slab_split, whole_cube_slab, ConvexPartition, Cube, DyadicPartition, SlabCell};
use crate::quadrature::Quadrature;
use crate::refinement::{n_gamma, refine_to_budget, RefinementParams, RefinementTrace};
use crate::scalar::{lit, reciprocal_exponent, Real};

/// Below this norm the average gradient is treated as zero and slabs are
/// cut along the first axis.
pub const ZERO_GRADIENT: f64 = 1e-10;

/// Checks `1 ≤ p ≤ ∞`, `1 ≤ q < ∞` and `2/d + 1/p − 1/q ≥ 0` (strict for
/// `p = ∞`).
pub fn check_admissible<T: Real>(d: usize, p: T, q: T) -> Result<()> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    if p.is_nan() || p < T::one() {
        return invalid(format!("p must lie in [1, inf], got {p}"));
    }
    if !q.is_finite() || q < T::one() {
        return invalid(format!("q must lie in [1, inf), got {q}"));
    }
    let s = lit::<T>(2.0) / lit(d as f64) + reciprocal_exponent(p) - q.recip();
    if s < T::zero() || (p.is_infinite() && s == T::zero()) {
        return Err(Error::Inadmissible(format!(
            "2/d + 1/p - 1/q = {s} for d={d}, p={p}, q={q}; need >= 0 (> 0 when p = inf)"
        )));
    }
    Ok(())
}

/// Refinement exponent `α = q(2/d + (1/p)(1 + 1/d) − 1/q)`.
pub fn alpha_of<T: Real>(d: usize, p: T, q: T) -> Result<T> {
    check_admissible(d, p, q)?;
    let dd: T = lit(d as f64);
    let two: T = lit(2.0);
    Ok(q * (two / dd + reciprocal_exponent(p) * (T::one() + dd.recip()) - q.recip()))
}

/// A target function together with the error norm, the energy exponent and
/// the cell budget.
#[derive(Clone, Copy)]
pub struct ApproximationProblem<'a, T: Real> {
    f: &'a dyn FieldFunction<T>,
    p: T,
    q: T,
    budget: u64,
}

impl<'a, T: Real> ApproximationProblem<'a, T> {
    pub fn new(f: &'a dyn FieldFunction<T>, p: T, q: T, budget: u64) -> Result<Self> {
        check_admissible(f.dim(), p, q)?;
        if budget < 1 {
            return invalid("cell budget N must be at least 1");
        }
        Ok(Self { f, p, q, budget })
    }

    pub fn function(&self) -> &'a dyn FieldFunction<T> {
        self.f
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn alpha(&self) -> T {
        alpha_of(self.dim(), self.p, self.q).expect("checked on construction")
    }

    /// `2/(d+1) + 1/p − 1/q ≥ 0`: the slab construction reaches the
    /// saturation rate `N^{−2/(d+1)}`.
    pub fn is_optimal(&self) -> bool {
        let d: T = lit(self.dim() as f64);
        lit::<T>(2.0) / (d + T::one()) + reciprocal_exponent(self.p) - self.q.recip() >= T::zero()
    }

    fn domain(&self) -> Result<Cube<T>> {
        Cube::unit(self.dim())
    }
}

impl<T: Real> std::fmt::Debug for ApproximationProblem<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ApproximationProblem")
            .field("f", &self.f.label())
            .field("p", &self.p)
            .field("q", &self.q)
            .field("budget", &self.budget)
            .finish()
    }
}

/// A constant per cell of a convex partition.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstant<T> {
    partition: ConvexPartition<T>,
    values: Vec<T>,
}

impl<T: Real> PiecewiseConstant<T> {
    pub fn new(partition: ConvexPartition<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != partition.len() {
            return invalid(format!("{} values for {} cells", values.len(), partition.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("cell value {v} is not finite"));
        }
        Ok(Self { partition, values })
    }

    pub fn partition(&self) -> &ConvexPartition<T> {
        &self.partition
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of the cell containing `x`, or `None` outside the domain.
    pub fn evaluate(&self, x: &[T]) -> Option<T> {
        self.partition.locate(x).map(|i| self.values[i])
    }
}

/// An approximant with the refinement trace that produced it.
#[derive(Clone, Debug)]
pub struct Approximation<T> {
    pub approximant: PiecewiseConstant<T>,
    /// `None` for the uniform baseline, which does not refine adaptively.
    pub trace: Option<RefinementTrace<T>>,
    /// Slabs whose value fell back to a midpoint evaluation.
    pub degenerate_slabs: usize,
    /// Dyadic cubes sliced along the fallback axis.
    pub zero_gradient_cubes: usize,
}

impl<T: Real> Approximation<T> {
    pub fn cells(&self) -> usize {
        self.approximant.len()
    }
}

/// Isotropic comparison methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Baseline {
    /// Finest uniform dyadic grid with at most `N` cubes.
    Uniform,
    /// The refinement loop with `γ = 0` and the same `α`, no slicing.
    AdaptiveDyadic,
}

/// Runs the slab construction for `problem`.
pub fn build<T: Real>(problem: &ApproximationProblem<'_, T>, quad: &Quadrature<T>) -> Result<Approximation<T>> {
    let f = problem.f;
    let d = problem.dim();
    let gamma = lit::<T>(d as f64).recip();
    let params = RefinementParams::new(problem.alpha(), gamma)?;
    let refined = refine_to_budget(&problem.domain()?, params, problem.budget, |c| {
        quad.energy_phi(f, c, problem.q)
    })?;
    let partition = refined.partition;
    let domain = partition.domain().clone();
    let fans: Vec<(Vec<SlabCell<T>>, bool)> = partition
        .cells()
        .par_iter()
        .map(|cube| {
            let n = n_gamma(cube, &domain, gamma) as usize;
            let h = quad.average_gradient(f, cube)?;
            let norm = h.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm >= lit(ZERO_GRADIENT) {
                let u: Vec<T> = h.iter().map(|&v| v / norm).collect();
                Ok((slab_split(cube, &u, n)?, false))
            } else {
                let mut e1 = vec![T::zero(); d];
                e1[0] = T::one();
                Ok((slab_split(cube, &e1, n)?, true))
            }
        })
        .collect::<Result<_>>()?;
    let zero_gradient_cubes = fans.iter().filter(|(_, z)| *z).count();
    let fans = fans.into_iter().map(|(s, _)| s).collect();
    finish(f, quad, partition, fans, Some(refined.trace), zero_gradient_cubes)
}

/// Builds an isotropic piecewise constant with one value per dyadic cube.
pub fn build_isotropic_baseline<T: Real>(
    problem: &ApproximationProblem<'_, T>,
    quad: &Quadrature<T>,
    mode: Baseline,
) -> Result<Approximation<T>> {
    let f = problem.f;
    let domain = problem.domain()?;
    let (partition, trace) = match mode {
        Baseline::Uniform => (
            DyadicPartition::uniform(domain, uniform_level(problem.dim(), problem.budget)),
            None,
        ),
        Baseline::AdaptiveDyadic => {
            let params = RefinementParams::new(problem.alpha(), T::zero())?;
            let r = refine_to_budget(&domain, params, problem.budget, |c| quad.energy_phi(f, c, problem.q))?;
            (r.partition, Some(r.trace))
        }
    };
    let fans = partition.cells().iter().map(|c| vec![whole_cube_slab(c)]).collect();
    finish(f, quad, partition, fans, trace, 0)
}

/// Largest `L` with `2^{dL} ≤ budget`.
pub fn uniform_level(d: usize, budget: u64) -> u32 {
    let mut level = 0u32;
    while (d as u32) * (level + 1) < 64 && (1u64 << (d as u32 * (level + 1))) <= budget {
        level += 1;
    }
    level
}

fn finish<T: Real>(
    f: &dyn FieldFunction<T>,
    quad: &Quadrature<T>,
    partition: DyadicPartition<T>,
    fans: Vec<Vec<SlabCell<T>>>,
    trace: Option<RefinementTrace<T>>,
    zero_gradient_cubes: usize,
) -> Result<Approximation<T>> {
    let stats = fans
        .par_iter()
        .map(|fan| quad.cell_stats(f, fan))
        .collect::<Result<Vec<_>>>()?;
    let degenerate_slabs = stats.iter().map(|s| s.degenerate).sum();
    let values = stats.iter().flat_map(|s| s.slabs.iter().map(|st| st.mean)).collect();
    let convex = ConvexPartition::from_fans(partition, fans)?;
    Ok(Approximation {
        approximant: PiecewiseConstant::new(convex, values)?,
        trace,
        degenerate_slabs,
        zero_gradient_cubes,
    })
}

/// Affine function `ℓ(x) = mean + ⟨gradient, x − center⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSurrogate<T> {
    pub mean: T,
    pub gradient: Vec<T>,
    pub center: Vec<T>,
}

impl<T: Real> LinearSurrogate<T> {
    pub fn evaluate(&self, x: &[T]) -> T {
        self.mean
            + self
                .gradient
                .iter()
                .zip(x.iter().zip(&self.center))
                .map(|(&g, (&xi, &ci))| g * (xi - ci))
                .sum::<T>()
    }
}

/// The affine approximant built from the cube mean and the average
/// gradient; its mean over `cell` equals that of `f`.
pub fn linear_surrogate<T: Real, F: FieldFunction<T> + ?Sized>(
    f: &F,
    cell: &Cube<T>,
    quad: &Quadrature<T>,
) -> Result<LinearSurrogate<T>> {
    Ok(LinearSurrogate {
        mean: quad.cell_mean(f, cell)?,
        gradient: quad.average_gradient(f, cell)?,
        center: cell.center(),
    })
}
