//! Numerical integration over cubes and slabs.
//!
//! Smooth integrands (Sobolev seminorms, the energy `Φ`, average gradients)
//! use tensor Gauss–Legendre rules. Integrands with slab indicator jumps
//! (cell means, `L_p` errors) use a shifted `R_d` low-discrepancy point set
//! per cube, bucketed into slabs by projection. The shift is keyed on the
//! seed and the cube, so repeated calls see identical samples.

mod gauss;
mod lowdisc;

pub use gauss::{gauss_legendre, gauss_legendre_unit};
pub use lowdisc::{mix_key, RdSequence};

use serde::{Deserialize, Serialize};

use crate::approximant::PiecewiseConstant;
use crate::error::{invalid, Error, Result};
use crate::functions::FieldFunction;
use crate::geometry::{locate_slab, Cube, SlabCell, MAX_DIM};
use crate::scalar::{count, lit, to_f64, Real};

use rayon::prelude::*;

/// Integration settings shared by every quadrature routine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub gl_points_per_axis: usize,
    pub samples_per_cube: usize,
    pub seed: u64,
    pub singular_exclusion_radius: f64,
    pub p_inf_sample_boost: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            gl_points_per_axis: 8,
            samples_per_cube: 1 << 14,
            seed: 0xC0FFEE,
            singular_exclusion_radius: 1e-6,
            p_inf_sample_boost: 4,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gl_points_per_axis < 2 {
            return invalid(format!(
                "gl_points_per_axis must be >= 2, got {}",
                self.gl_points_per_axis
            ));
        }
        if self.samples_per_cube < 256 {
            return invalid(format!(
                "samples_per_cube must be >= 256, got {}",
                self.samples_per_cube
            ));
        }
        if self.p_inf_sample_boost < 1 {
            return invalid("p_inf_sample_boost must be >= 1");
        }
        if !(self.singular_exclusion_radius >= 0.0) || !self.singular_exclusion_radius.is_finite() {
            return invalid("singular_exclusion_radius must be a finite non-negative number");
        }
        Ok(())
    }
}

/// `∫ |D^k f|^q` for every multi-index of order 0, 1 and 2 over one cube.
///
/// Order-2 entries are the upper triangle of the Hessian in row-major order,
/// so each mixed multi-index appears once.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeMoments<T> {
    pub order0: T,
    pub order1: Vec<T>,
    pub order2: Vec<T>,
}

impl<T: Real> DerivativeMoments<T> {
    /// `|f|_{W^k_q}` with the sum-of-`L_q`-norms convention.
    pub fn seminorm(&self, k: u32, q: T) -> Result<T> {
        let inv = q.recip();
        Ok(match k {
            0 => self.order0.powf(inv),
            1 => self.order1.iter().map(|&m| m.powf(inv)).sum(),
            2 => self.order2.iter().map(|&m| m.powf(inv)).sum(),
            _ => return Err(Error::UnsupportedOrder(k)),
        })
    }
}

/// `Φ(ω) = Σ_{k ∈ orders} |f|^q_{W^k_q(ω)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyFunctional<T> {
    q: T,
    orders: Vec<u32>,
}

impl<T: Real> EnergyFunctional<T> {
    pub fn new(q: T, orders: &[u32]) -> Result<Self> {
        check_q(q)?;
        if orders.is_empty() {
            return invalid("energy needs at least one derivative order");
        }
        if let Some(&k) = orders.iter().find(|&&k| k != 1 && k != 2) {
            return Err(Error::UnsupportedOrder(k));
        }
        let mut orders = orders.to_vec();
        orders.sort_unstable();
        orders.dedup();
        Ok(Self { q, orders })
    }

    /// The energy driving refinement: orders 1 and 2.
    pub fn sobolev(q: T) -> Result<Self> {
        Self::new(q, &[1, 2])
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn evaluate<F: FieldFunction<T> + ?Sized>(&self, quad: &Quadrature<T>, f: &F, cell: &Cube<T>) -> Result<T> {
        let max = *self.orders.last().unwrap();
        let moments = quad.moments(f, cell, max, self.q)?;
        self.orders
            .iter()
            .map(|&k| moments.seminorm(k, self.q).map(|s| s.powf(self.q)))
            .sum()
    }
}

fn check_q<T: Real>(q: T) -> Result<()> {
    if !(q >= T::one()) || !q.is_finite() {
        return invalid(format!("integrability exponent q must lie in [1, inf), got {q}"));
    }
    Ok(())
}

/// Per-slab sampling result.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabStat<T> {
    /// Sampled measure of the slab, `samples · |ω| / n`.
    pub volume: T,
    /// Sample mean of `f`, the cell constant `f_δ`.
    pub mean: T,
    /// Number of samples that landed in the slab.
    pub samples: usize,
}

/// Sampling statistics for the slabs of one cube.
#[derive(Clone, Debug, PartialEq)]
pub struct CellStats<T> {
    pub slabs: Vec<SlabStat<T>>,
    /// Total points drawn in the parent, including excluded ones.
    pub drawn: usize,
    /// Points dropped near singular points.
    pub excluded: usize,
    /// Slabs that received no sample.
    pub degenerate: usize,
}

/// Quadrature context: a configuration with its precomputed rule.
#[derive(Clone, Debug)]
pub struct Quadrature<T> {
    config: QuadratureConfig,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> Quadrature<T> {
    pub fn new(config: QuadratureConfig) -> Result<Self> {
        config.validate()?;
        let (x, w) = gauss_legendre_unit(config.gl_points_per_axis);
        Ok(Self {
            nodes: x.into_iter().map(lit).collect(),
            weights: w.into_iter().map(lit).collect(),
            config,
        })
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.config
    }

    fn excluded<F: FieldFunction<T> + ?Sized>(&self, f: &F, x: &[T]) -> bool {
        let r = self.config.singular_exclusion_radius;
        if r <= 0.0 {
            return false;
        }
        let r2: T = lit(r * r);
        f.singular_points()
            .iter()
            .any(|c| c.iter().zip(x).map(|(&ci, &xi)| (xi - ci) * (xi - ci)).sum::<T>() < r2)
    }

    /// Runs `visit(x, w)` over the tensor rule mapped to `cell`, skipping
    /// excluded nodes. Weights include the cell volume.
    fn for_each_node<F: FieldFunction<T> + ?Sized>(&self, f: &F, cell: &Cube<T>, mut visit: impl FnMut(&[T], T)) {
        let d = cell.dim();
        let n = self.nodes.len();
        let vol = cell.volume();
        let mut idx = [0usize; MAX_DIM];
        let mut x = [T::zero(); MAX_DIM];
        let corner = cell.corner();
        let side = cell.side();
        loop {
            let mut w = vol;
            for j in 0..d {
                x[j] = corner[j] + side * self.nodes[idx[j]];
                w = w * self.weights[idx[j]];
            }
            if !self.excluded(f, &x[..d]) {
                visit(&x[..d], w);
            }
            let mut j = 0;
            loop {
                if j == d {
                    return;
                }
                idx[j] += 1;
                if idx[j] < n {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    /// `∫_cell |D^k f|^q` for all multi-indices up to order `max_order`.
    pub fn moments<F: FieldFunction<T> + ?Sized>(
        &self,
        f: &F,
        cell: &Cube<T>,
        max_order: u32,
        q: T,
    ) -> Result<DerivativeMoments<T>> {
        if max_order > 2 {
            return Err(Error::UnsupportedOrder(max_order));
        }
        check_q(q)?;
        check_dim(f, cell)?;
        let d = cell.dim();
        let mut out = DerivativeMoments {
            order0: T::zero(),
            order1: vec![T::zero(); if max_order >= 1 { d } else { 0 }],
            order2: vec![T::zero(); if max_order >= 2 { d * (d + 1) / 2 } else { 0 }],
        };
        let mut grad = [T::zero(); MAX_DIM];
        let mut hess = [T::zero(); MAX_DIM * MAX_DIM];
        let pow = |v: T| if q == T::one() { v.abs() } else { v.abs().powf(q) };
        self.for_each_node(f, cell, |x, w| {
            out.order0 = out.order0 + w * pow(f.value(x));
            if max_order >= 1 {
                f.gradient(x, &mut grad[..d]);
                for (acc, &g) in out.order1.iter_mut().zip(&grad[..d]) {
                    *acc = *acc + w * pow(g);
                }
            }
            if max_order >= 2 {
                f.hessian(x, &mut hess[..d * d]);
                let mut slot = 0;
                for j in 0..d {
                    for k in j..d {
                        out.order2[slot] = out.order2[slot] + w * pow(hess[j * d + k]);
                        slot += 1;
                    }
                }
            }
        });
        Ok(out)
    }

    /// `|f|_{W^k_q(cell)} = Σ_{|κ|=k} ‖D^κ f‖_{L_q(cell)}`.
    pub fn seminorm<F: FieldFunction<T> + ?Sized>(&self, f: &F, cell: &Cube<T>, k: u32, q: T) -> Result<T> {
        if k > 2 {
            return Err(Error::UnsupportedOrder(k));
        }
        self.moments(f, cell, k, q)?.seminorm(k, q)
    }

    /// `Φ(cell) = |f|^q_{W^1_q} + |f|^q_{W^2_q}`.
    pub fn energy_phi<F: FieldFunction<T> + ?Sized>(&self, f: &F, cell: &Cube<T>, q: T) -> Result<T> {
        let m = self.moments(f, cell, 2, q)?;
        Ok(m.seminorm(1, q)?.powf(q) + m.seminorm(2, q)?.powf(q))
    }

    /// `h_ω = |ω|^{-1} ∫_ω ∇f`.
    pub fn average_gradient<F: FieldFunction<T> + ?Sized>(&self, f: &F, cell: &Cube<T>) -> Result<Vec<T>> {
        check_dim(f, cell)?;
        let d = cell.dim();
        let mut acc = vec![T::zero(); d];
        let mut mass = T::zero();
        let mut grad = [T::zero(); MAX_DIM];
        self.for_each_node(f, cell, |x, w| {
            f.gradient(x, &mut grad[..d]);
            for (a, &g) in acc.iter_mut().zip(&grad[..d]) {
                *a = *a + w * g;
            }
            mass = mass + w;
        });
        if mass > T::zero() {
            acc.iter_mut().for_each(|a| *a = *a / mass);
        }
        Ok(acc)
    }

    /// Gauss–Legendre mean of `f` over a cube.
    pub fn cell_mean<F: FieldFunction<T> + ?Sized>(&self, f: &F, cell: &Cube<T>) -> Result<T> {
        check_dim(f, cell)?;
        let mut acc = T::zero();
        let mut mass = T::zero();
        self.for_each_node(f, cell, |x, w| {
            acc = acc + w * f.value(x);
            mass = mass + w;
        });
        Ok(if mass > T::zero() { acc / mass } else { T::zero() })
    }

    /// Low-discrepancy point set of `n` points in `cube`, keyed on the seed
    /// and the cube's position.
    pub fn sampler<'a>(&self, cube: &'a Cube<T>) -> CubeSampler<'a, T> {
        let words = std::iter::once(cube.level() as u64)
            .chain(std::iter::once(to_f64(cube.side()).to_bits()))
            .chain(cube.corner().iter().map(|&c| to_f64(c).to_bits()));
        let key = mix_key(self.config.seed, words);
        CubeSampler {
            seq: RdSequence::new(cube.dim(), key),
            cube,
        }
    }

    /// Buckets `samples_per_cube` points of the common parent into `slabs`
    /// and returns per-slab volumes and means.
    pub fn cell_stats<F: FieldFunction<T> + ?Sized>(&self, f: &F, slabs: &[SlabCell<T>]) -> Result<CellStats<T>> {
        let Some(first) = slabs.first() else {
            return invalid("cell_stats needs at least one slab");
        };
        let parent = first.parent();
        if slabs.iter().any(|s| s.parent() != parent) {
            return invalid("all slabs passed to cell_stats must share one parent cube");
        }
        check_dim(f, parent)?;
        let n = self.config.samples_per_cube;
        let d = parent.dim();
        let sampler = self.sampler(parent);
        let mut sums = vec![T::zero(); slabs.len()];
        let mut counts = vec![0usize; slabs.len()];
        let mut excluded = 0usize;
        let mut x = [T::zero(); MAX_DIM];
        for i in 0..n {
            sampler.point(i as u64, &mut x[..d]);
            if self.excluded(f, &x[..d]) {
                excluded += 1;
                continue;
            }
            let t = first.projection(&x[..d]);
            let k = locate_slab(slabs, t).unwrap_or_else(|| if t < first.lo() { 0 } else { slabs.len() - 1 });
            sums[k] = sums[k] + f.value(&x[..d]);
            counts[k] += 1;
        }
        let unit = parent.volume() / count::<T>(n);
        let mut degenerate = 0;
        let stats = slabs
            .iter()
            .zip(sums.iter().zip(&counts))
            .map(|(slab, (&s, &c))| {
                let mean = if c > 0 {
                    s / count::<T>(c)
                } else {
                    degenerate += 1;
                    f.value(&slab.midpoint_preimage())
                };
                SlabStat {
                    volume: unit * count::<T>(c),
                    mean,
                    samples: c,
                }
            })
            .collect();
        if degenerate > 0 {
            log::debug!(
                "{degenerate} of {} slabs in cube at {:?} received no samples; using midpoint values",
                slabs.len(),
                parent.corner()
            );
        }
        Ok(CellStats {
            slabs: stats,
            drawn: n,
            excluded,
            degenerate,
        })
    }

    /// Sampled `‖f − s‖_{L_p(Ω)}`; `p = ∞` takes the maximum over a boosted
    /// point set.
    pub fn lp_error<F: FieldFunction<T> + ?Sized>(&self, f: &F, s: &PiecewiseConstant<T>, p: T) -> Result<T> {
        if !(p >= T::one()) {
            return invalid(format!("L_p exponent must satisfy p >= 1, got {p}"));
        }
        let partition = s.partition();
        check_dim(f, partition.domain())?;
        let per_cube: Vec<T> = (0..partition.source().len())
            .into_par_iter()
            .map(|i| self.cube_error(f, s, i, p))
            .collect();
        Ok(if p.is_infinite() {
            per_cube.into_iter().fold(T::zero(), T::max)
        } else {
            per_cube.into_iter().sum::<T>().powf(p.recip())
        })
    }

    /// `max |f − s|` (p = ∞) or `∫ |f − s|^p` over one cube of the source
    /// partition.
    fn cube_error<F: FieldFunction<T> + ?Sized>(&self, f: &F, s: &PiecewiseConstant<T>, cube: usize, p: T) -> T {
        let partition = s.partition();
        let fan = partition.fan(cube);
        let values = &s.values()[partition.spans()[cube].clone()];
        let parent = fan[0].parent();
        let d = parent.dim();
        let infinite = p.is_infinite();
        let n = if infinite {
            self.config.samples_per_cube * self.config.p_inf_sample_boost
        } else {
            self.config.samples_per_cube
        };
        let sampler = self.sampler(parent);
        let mut x = [T::zero(); MAX_DIM];
        let mut acc = T::zero();
        let square = p == lit(2.0);
        for i in 0..n {
            sampler.point(i as u64, &mut x[..d]);
            if self.excluded(f, &x[..d]) {
                continue;
            }
            let t = fan[0].projection(&x[..d]);
            let k = locate_slab(fan, t).unwrap_or_else(|| if t < fan[0].lo() { 0 } else { fan.len() - 1 });
            let e = (f.value(&x[..d]) - values[k]).abs();
            acc = if infinite {
                acc.max(e)
            } else if square {
                acc + e * e
            } else {
                acc + e.powf(p)
            };
        }
        if infinite {
            acc
        } else {
            acc * parent.volume() / count::<T>(n)
        }
    }
}

fn check_dim<T: Real, F: FieldFunction<T> + ?Sized>(f: &F, cell: &Cube<T>) -> Result<()> {
    if f.dim() != cell.dim() {
        return Err(Error::UnsupportedDimension {
            got: cell.dim(),
            reason: "function and cell dimensions differ",
        });
    }
    Ok(())
}

/// Deterministic low-discrepancy points in one cube.
#[derive(Clone, Debug)]
pub struct CubeSampler<'a, T> {
    seq: RdSequence,
    cube: &'a Cube<T>,
}

impl<T: Real> CubeSampler<'_, T> {
    #[inline]
    pub fn point(&self, i: u64, out: &mut [T]) {
        let mut u = [0.0f64; MAX_DIM];
        let d = self.seq.dim();
        self.seq.point(i, &mut u[..d]);
        let corner = self.cube.corner();
        let side = self.cube.side();
        for j in 0..d {
            out[j] = corner[j] + side * lit(u[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::Corpus;
    use crate::geometry::slab_split;
    use approx::assert_relative_eq;

    fn quad64() -> Quadrature<f64> {
        Quadrature::new(QuadratureConfig::default()).unwrap()
    }

    fn unit2() -> Cube<f64> {
        Cube::unit(2).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig {
            gl_points_per_axis: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(QuadratureConfig {
            samples_per_cube: 255,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(QuadratureConfig {
            p_inf_sample_boost: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(QuadratureConfig {
            singular_exclusion_radius: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(QuadratureConfig::default().validate().is_ok());
    }

    #[test]
    fn config_json_defaults_and_overrides() {
        let c: QuadratureConfig = serde_json::from_str(r#"{"seed": 5}"#).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.gl_points_per_axis, 8);
        assert!(serde_json::from_str::<QuadratureConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn seminorm_examples() {
        let q = quad64();
        let c = Corpus::constant(2, 1.0);
        assert_eq!(q.seminorm(&c, &unit2(), 1, 2.0).unwrap(), 0.0);

        let quad = Corpus::quad(2);
        assert_relative_eq!(q.seminorm(&quad, &unit2(), 2, 2.0).unwrap(), 2.0, epsilon = 1e-13);

        let lin = Corpus::linear(vec![0.6, 0.8]);
        assert_relative_eq!(q.seminorm(&lin, &unit2(), 1, 1.0).unwrap(), 1.4, epsilon = 1e-13);

        assert!(matches!(
            q.seminorm(&quad, &unit2(), 3, 2.0),
            Err(Error::UnsupportedOrder(3))
        ));
        assert!(q.seminorm(&quad, &unit2(), 1, 0.5).is_err());
    }

    #[test]
    fn zeroth_order_is_lq_norm() {
        // ‖½|x|²‖_{L1((0,1)²)} = 1/3
        let q = quad64();
        assert_relative_eq!(
            q.seminorm(&Corpus::quad(2), &unit2(), 0, 1.0).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn energy_examples() {
        let q = quad64();
        assert_eq!(q.energy_phi(&Corpus::constant(2, 3.0), &unit2(), 1.5).unwrap(), 0.0);
        // (√(1/3) + √(1/3))² + 2² = 4/3 + 4
        let full = q.energy_phi(&Corpus::quad(2), &unit2(), 2.0).unwrap();
        assert_relative_eq!(full, 16.0 / 3.0, epsilon = 1e-12);
        let sub = Cube::new(vec![0.0, 0.0], 0.5).unwrap();
        assert!(q.energy_phi(&Corpus::quad(2), &sub, 2.0).unwrap() < full);

        let functional = EnergyFunctional::sobolev(2.0).unwrap();
        assert_relative_eq!(
            functional.evaluate(&q, &Corpus::quad(2), &unit2()).unwrap(),
            full,
            epsilon = 1e-14
        );
        assert!(EnergyFunctional::new(2.0, &[3]).is_err());
        assert!(EnergyFunctional::new(0.9, &[1]).is_err());
    }

    #[test]
    fn energy_is_additive_for_q_one_and_subadditive_above() {
        let q = quad64();
        let f = Corpus::expdir(2);
        let kids = unit2().children();
        let whole1 = q.energy_phi(&f, &unit2(), 1.0).unwrap();
        let sum1: f64 = kids.iter().map(|c| q.energy_phi(&f, c, 1.0).unwrap()).sum();
        assert_relative_eq!(sum1, whole1, max_relative = 1e-10);
        let g = Corpus::quad(2);
        let whole2 = q.energy_phi(&g, &unit2(), 2.0).unwrap();
        let sum2: f64 = kids.iter().map(|c| q.energy_phi(&g, c, 2.0).unwrap()).sum();
        assert!(sum2 < whole2 * (1.0 - 1e-2), "{sum2} vs {whole2}");
    }

    #[test]
    fn average_gradient_examples() {
        let q = quad64();
        let lin = Corpus::linear(vec![0.6, 0.8]);
        let g = q.average_gradient(&lin, &unit2()).unwrap();
        assert_relative_eq!(g[0], 0.6, epsilon = 1e-14);
        assert_relative_eq!(g[1], 0.8, epsilon = 1e-14);
        let g = q.average_gradient(&Corpus::quad(2), &unit2()).unwrap();
        assert_relative_eq!(g[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(g[1], 0.5, epsilon = 1e-14);
        assert_eq!(
            q.average_gradient(&Corpus::constant(2, 1.0), &unit2()).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn cell_stats_examples() {
        let q = quad64();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let slabs = slab_split(&unit2(), &[s, s], 4).unwrap();

        let stats = q.cell_stats(&Corpus::constant(2, 1.0), &slabs).unwrap();
        assert!(stats.slabs.iter().all(|st| st.mean == 1.0));
        assert_eq!(stats.slabs.iter().map(|st| st.samples).sum::<usize>(), stats.drawn);

        for (st, want) in stats.slabs.iter().zip([0.125, 0.375, 0.375, 0.125]) {
            assert!((st.volume - want).abs() <= 0.01 * want, "{} vs {want}", st.volume);
        }

        let a = [0.6, 0.8];
        let lin = Corpus::linear(a.to_vec());
        let slabs = slab_split(&unit2(), &a, 5).unwrap();
        let stats = q.cell_stats(&lin, &slabs).unwrap();
        assert!(stats.slabs.windows(2).all(|w| w[0].mean < w[1].mean));
    }

    #[test]
    fn cell_stats_rejects_mixed_parents() {
        let q = quad64();
        let a = slab_split(&unit2(), &[1.0, 0.0], 1).unwrap();
        let other = Cube::new(vec![1.0, 0.0], 1.0).unwrap();
        let b = slab_split(&other, &[1.0, 0.0], 1).unwrap();
        let mixed = vec![a[0].clone(), b[0].clone()];
        assert!(q.cell_stats(&Corpus::quad(2), &mixed).is_err());
        assert!(q.cell_stats(&Corpus::quad(2), &[]).is_err());
    }

    #[test]
    fn empty_slab_falls_back_to_midpoint_value() {
        let cfg = QuadratureConfig {
            samples_per_cube: 256,
            ..Default::default()
        };
        let q = Quadrature::<f64>::new(cfg).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let slabs = slab_split(&unit2(), &[s, s], 256).unwrap();
        let lin = Corpus::linear(vec![s, s]);
        let stats = q.cell_stats(&lin, &slabs).unwrap();
        assert!(stats.degenerate > 0);
        let (i, st) = stats.slabs.iter().enumerate().find(|(_, st)| st.samples == 0).unwrap();
        assert_eq!(st.volume, 0.0);
        assert_relative_eq!(st.mean, (slabs[i].lo() + slabs[i].hi()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let q = quad64();
        let cube = Cube::new(vec![0.25, 0.5], 0.25).unwrap();
        let (a, b) = (q.sampler(&cube), q.sampler(&cube));
        let (mut x, mut y) = ([0.0; 2], [0.0; 2]);
        for i in 0..100 {
            a.point(i, &mut x);
            b.point(i, &mut y);
            assert_eq!(x, y);
            assert!(cube.contains(&x));
        }
    }

    #[test]
    fn exclusion_drops_points_near_singularity() {
        let cfg = QuadratureConfig {
            singular_exclusion_radius: 0.1,
            ..Default::default()
        };
        let q = Quadrature::<f64>::new(cfg).unwrap();
        let f = Corpus::singular_beta(2, 0.5);
        let slabs = slab_split(&unit2(), &[1.0, 0.0], 1).unwrap();
        let stats = q.cell_stats(&f, &slabs).unwrap();
        let frac = stats.excluded as f64 / stats.drawn as f64;
        assert!((frac - std::f64::consts::PI * 0.01).abs() < 2e-3, "{frac}");
        assert!((stats.slabs[0].volume - (1.0 - std::f64::consts::PI * 0.01)).abs() < 2e-3);
    }
}
