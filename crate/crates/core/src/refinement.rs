//! Greedy dyadic refinement driven by a subadditive cube functional.
//!
//! Starting from `{Ω}`, every generation splits all cubes whose weighted
//! energy `g_α(ω) = |ω|^α Φ(ω)` reaches `2^{−dα}` times the current maximum.
//! Each cube carries `N_γ(ω) = ⌊(|Ω|/|ω|)^γ⌋` degrees of freedom; the loop
//! stops at the last generation whose total `N_k` fits the budget.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{Cube, DyadicPartition};
use crate::scalar::{lit, to_f64, Real};

/// Deepest dyadic level the engine will create.
pub const MAX_LEVEL: u32 = 52;

/// Which counting lemma the `(α, γ)` pair falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `0 ≤ γ ≤ α`, `Φ` subadditive.
    Lemma1,
    /// `0 < α < γ`, `Φ^{γ/α}` subadditive.
    Lemma2,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Lemma1 => "lemma1",
            Regime::Lemma2 => "lemma2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinementParams<T> {
    alpha: T,
    gamma: T,
    regime: Regime,
}

impl<T: Real> RefinementParams<T> {
    /// Classifies `(α, γ)`; pairs covered by neither lemma are rejected.
    pub fn new(alpha: T, gamma: T) -> Result<Self> {
        if !alpha.is_finite() || !gamma.is_finite() {
            return invalid("alpha and gamma must be finite");
        }
        let regime = if gamma >= T::zero() && gamma <= alpha {
            Regime::Lemma1
        } else if alpha > T::zero() && alpha < gamma {
            Regime::Lemma2
        } else {
            return invalid(format!(
                "(alpha, gamma) = ({alpha}, {gamma}) needs 0 <= gamma <= alpha or 0 < alpha < gamma"
            ));
        };
        Ok(Self { alpha, gamma, regime })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }
}

/// `N_γ(ω) = ⌊2^{γ·d·level}⌋` for a cube `level` halvings below `Ω`.
///
/// Integer exponents are evaluated exactly; otherwise the power is nudged
/// by a relative `1e−12` before flooring.
pub fn n_gamma_at_level<T: Real>(level: u32, d: usize, gamma: T) -> u64 {
    let e = to_f64(gamma) * d as f64 * level as f64;
    let r = e.round();
    if (e - r).abs() <= 1e-9 {
        let r = r.max(0.0) as u32;
        return if r >= 63 { u64::MAX } else { 1u64 << r };
    }
    let v = (e.exp2() * (1.0 + 1e-12)).floor();
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        (v as u64).max(1)
    }
}

/// `N_γ(ω)` for a cube of `domain`.
pub fn n_gamma<T: Real>(cell: &Cube<T>, domain: &Cube<T>, gamma: T) -> u64 {
    n_gamma_at_level(cell.level().saturating_sub(domain.level()), cell.dim(), gamma)
}

/// `g_α(ω) = |ω|^α Φ(ω)`.
pub fn g_alpha<T: Real>(cell: &Cube<T>, phi_value: T, alpha: T) -> T {
    if alpha == T::zero() {
        phi_value
    } else {
        cell.volume().powf(alpha) * phi_value
    }
}

/// Statistics of one generation `□_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord<T> {
    pub k: u32,
    /// `G_α(□_k) = max g_α(ω)`.
    pub g_alpha: T,
    /// `N_k = Σ N_γ(ω)`.
    pub n_k: u64,
    /// `|S_k|`, cubes of `□_{k−1}` split to form `□_k`.
    pub marked: usize,
    /// `t_k = Σ_{ω∈S_k} N_γ(ω)`.
    pub t_k: u64,
    pub cells: usize,
    /// Marking threshold `2^{−dα} G_α(□_{k−1})` (zero for `k = 0`).
    pub threshold: T,
    /// Smallest `g_α` among the marked cubes.
    pub min_marked_g: Option<T>,
}

/// Audit trail of a refinement run.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementTrace<T> {
    pub d: usize,
    pub alpha: T,
    pub gamma: T,
    pub regime: Regime,
    pub domain_volume: T,
    pub phi_domain: T,
    pub generations: Vec<GenerationRecord<T>>,
    /// Index `m` of the returned generation; `generations[m + 1]`, when
    /// present, is the first one over budget.
    pub accepted: usize,
}

impl<T: Real> RefinementTrace<T> {
    pub fn accepted_record(&self) -> &GenerationRecord<T> {
        &self.generations[self.accepted]
    }
}

/// Result of [`refine_to_budget`].
#[derive(Clone, Debug)]
pub struct Refinement<T> {
    pub partition: DyadicPartition<T>,
    /// `Φ` per cell of `partition`, index-aligned.
    pub phi: Vec<T>,
    pub trace: RefinementTrace<T>,
}

/// Runs the refinement loop and returns `□_m` with `N_m ≤ budget < N_{m+1}`.
///
/// `phi` is evaluated once per created cube; evaluations inside one
/// generation run in parallel.
pub fn refine_to_budget<T, P>(
    domain: &Cube<T>,
    params: RefinementParams<T>,
    budget: u64,
    phi: P,
) -> Result<Refinement<T>>
where
    T: Real,
    P: Fn(&Cube<T>) -> Result<T> + Sync,
{
    if budget < 1 {
        return invalid("cell budget N must be at least 1");
    }
    let d = domain.dim();
    let (alpha, gamma) = (params.alpha, params.gamma);
    let decay = lit::<T>(2.0).powf(-(lit::<T>(d as f64) * alpha));
    let root = DyadicPartition::singleton(domain.clone());
    let domain = root.domain().clone();
    let phi_root = phi(&domain)?;
    if !(phi_root >= T::zero()) || !phi_root.is_finite() {
        return invalid(format!(
            "energy on the domain must be finite and non-negative, got {phi_root}"
        ));
    }
    let n_of = |c: &Cube<T>| n_gamma(c, &domain, gamma);
    let g_of = |c: &Cube<T>, v: T| g_alpha(c, v, alpha);

    let mut trace = RefinementTrace {
        d,
        alpha,
        gamma,
        regime: params.regime,
        domain_volume: domain.volume(),
        phi_domain: phi_root,
        generations: vec![GenerationRecord {
            k: 0,
            g_alpha: g_of(&domain, phi_root),
            n_k: 1,
            marked: 0,
            t_k: 0,
            cells: 1,
            threshold: T::zero(),
            min_marked_g: None,
        }],
        accepted: 0,
    };
    let mut part = root;
    let mut phis = vec![phi_root];
    if phi_root == T::zero() {
        return Ok(Refinement {
            partition: part,
            phi: phis,
            trace,
        });
    }

    loop {
        let g: Vec<T> = part.cells().iter().zip(&phis).map(|(c, &v)| g_of(c, v)).collect();
        let g_max = g.iter().copied().fold(T::zero(), T::max);
        let threshold = decay * g_max;
        let marked: Vec<usize> = (0..g.len()).filter(|&i| g[i] >= threshold).collect();
        if marked.iter().any(|&i| part.cells()[i].level() >= MAX_LEVEL) {
            return invalid(format!("refinement exceeded the maximum dyadic level {MAX_LEVEL}"));
        }
        let min_marked_g = marked.iter().map(|&i| g[i]).reduce(T::min);
        let t_k = marked
            .iter()
            .map(|&i| n_of(&part.cells()[i]))
            .fold(0u64, u64::saturating_add);

        let next = part.extend_indices(&marked)?;
        let mut is_marked = vec![false; part.len()];
        marked.iter().for_each(|&i| is_marked[i] = true);
        let fresh: Vec<Cube<T>> = marked.iter().flat_map(|&i| part.cells()[i].children()).collect();
        let fresh_phi = fresh.par_iter().map(&phi).collect::<Result<Vec<T>>>()?;
        let mut fresh_phi = fresh_phi.into_iter();
        let mut next_phis = Vec::with_capacity(next.len());
        for (i, &v) in phis.iter().enumerate() {
            if is_marked[i] {
                next_phis.extend(fresh_phi.by_ref().take(1 << d));
            } else {
                next_phis.push(v);
            }
        }

        let n_k = next.cells().iter().map(&n_of).fold(0u64, u64::saturating_add);
        let g_next = next
            .cells()
            .iter()
            .zip(&next_phis)
            .map(|(c, &v)| g_of(c, v))
            .fold(T::zero(), T::max);
        trace.generations.push(GenerationRecord {
            k: next.generation(),
            g_alpha: g_next,
            n_k,
            marked: marked.len(),
            t_k,
            cells: next.len(),
            threshold,
            min_marked_g,
        });
        if n_k > budget {
            trace.accepted = trace.generations.len() - 2;
            return Ok(Refinement {
                partition: part,
                phi: phis,
                trace,
            });
        }
        part = next;
        phis = next_phis;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Corpus, FieldFunction};
    use crate::quadrature::{Quadrature, QuadratureConfig};
    use approx::assert_relative_eq;

    fn unit(d: usize) -> Cube<f64> {
        Cube::unit(d).unwrap()
    }

    #[test]
    fn n_gamma_examples() {
        assert_eq!(n_gamma_at_level(0, 2, 0.7f64), 1);
        assert_eq!(n_gamma_at_level(2, 2, 0.5f64), 4);
        assert_eq!(n_gamma_at_level(1, 3, 1.0f64 / 3.0), 2);
        assert_eq!(n_gamma_at_level(5, 3, 0.0f64), 1);
        // 2^{0.3·2·3} = 2^{1.8} = 3.48
        assert_eq!(n_gamma_at_level(3, 2, 0.3f64), 3);
        let child = &unit(2).children()[0].children()[3];
        assert_eq!(n_gamma(child, &unit(2), 0.5), 4);
    }

    #[test]
    fn g_alpha_examples() {
        assert_eq!(g_alpha(&unit(2), 3.5, 0.0), 3.5);
        let quarter = Cube::new(vec![0.0, 0.0], 0.5).unwrap();
        assert_relative_eq!(g_alpha(&quarter, 2.0, 1.0), 0.5);
        assert_relative_eq!(g_alpha(&unit(2), 3.0, 2.5), 3.0);
    }

    #[test]
    fn params_classify_regimes() {
        assert_eq!(RefinementParams::new(1.0, 0.5).unwrap().regime(), Regime::Lemma1);
        assert_eq!(RefinementParams::new(0.5, 0.5).unwrap().regime(), Regime::Lemma1);
        assert_eq!(RefinementParams::new(0.0, 0.0).unwrap().regime(), Regime::Lemma1);
        assert_eq!(RefinementParams::new(0.2, 1.0 / 3.0).unwrap().regime(), Regime::Lemma2);
        assert!(RefinementParams::new(0.0, 0.5).is_err());
        assert!(RefinementParams::new(1.0, -0.5).is_err());
    }

    #[test]
    fn constant_function_stays_singleton() {
        let r = refine_to_budget(&unit(2), RefinementParams::new(1.0, 0.5).unwrap(), 1000, |_| Ok(0.0)).unwrap();
        assert_eq!(r.partition.len(), 1);
        assert_eq!(r.trace.generations.len(), 1);
        assert_eq!(r.trace.accepted_record().n_k, 1);
    }

    #[test]
    fn budget_one_keeps_generation_zero() {
        let q = Quadrature::new(QuadratureConfig::default()).unwrap();
        let f = Corpus::quad(2);
        let r = refine_to_budget(&unit(2), RefinementParams::new(2.5, 0.5).unwrap(), 1, |c| {
            q.energy_phi(&f, c, 2.0)
        })
        .unwrap();
        assert_eq!(r.partition.len(), 1);
        assert_eq!(r.trace.accepted, 0);
        assert!(r.trace.generations[1].n_k > 1);
        assert!(
            refine_to_budget(&unit(2), RefinementParams::new(2.5, 0.5).unwrap(), 0, |c| q
                .energy_phi(&f, c, 2.0))
            .is_err()
        );
    }

    /// A bump concentrated in the lower-left quadrant.
    struct OffCenterBump;

    impl FieldFunction<f64> for OffCenterBump {
        fn label(&self) -> String {
            "offcenter".into()
        }
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            crate::functions::bump_phi(&[x[0] * 2.5, x[1] * 2.5])
        }
        fn gradient(&self, x: &[f64], out: &mut [f64]) {
            Corpus::<f64>::bump(2, 1).gradient(&[x[0] * 2.5, x[1] * 2.5], out);
            out.iter_mut().for_each(|g| *g *= 2.5);
        }
        fn hessian(&self, x: &[f64], out: &mut [f64]) {
            Corpus::<f64>::bump(2, 1).hessian(&[x[0] * 2.5, x[1] * 2.5], out);
            out.iter_mut().for_each(|h| *h *= 6.25);
        }
    }

    /// Independent re-implementation of the marking rule over explicit cube
    /// lists, recomputing every energy from scratch.
    fn brute_force_generations(
        f: &OffCenterBump,
        q: &Quadrature<f64>,
        alpha: f64,
        steps: usize,
    ) -> Vec<Vec<(Vec<f64>, f64)>> {
        let mut cells: Vec<(Vec<f64>, f64)> = vec![(vec![0.0, 0.0], 1.0)];
        let mut out = vec![cells.clone()];
        for _ in 0..steps {
            let g: Vec<f64> = cells
                .iter()
                .map(|(c, h)| {
                    let cube = Cube::new(c.clone(), *h).unwrap();
                    (h * h).powf(alpha) * q.energy_phi(f, &cube, 2.0).unwrap()
                })
                .collect();
            let gmax = g.iter().cloned().fold(0.0, f64::max);
            let mut next = Vec::new();
            for ((c, h), gi) in cells.iter().zip(&g) {
                if *gi >= 2f64.powf(-2.0 * alpha) * gmax {
                    for mask in 0..4 {
                        next.push((
                            vec![c[0] + (mask & 1) as f64 * h / 2.0, c[1] + (mask >> 1) as f64 * h / 2.0],
                            h / 2.0,
                        ));
                    }
                } else {
                    next.push((c.clone(), *h));
                }
            }
            cells = next;
            out.push(cells.clone());
        }
        out
    }

    #[test]
    fn marking_matches_brute_force() {
        let q = Quadrature::new(QuadratureConfig::default()).unwrap();
        let f = OffCenterBump;
        let alpha = 1.0;
        let r = refine_to_budget(&unit(2), RefinementParams::new(alpha, 0.5).unwrap(), 100_000, |c| {
            q.energy_phi(&f, c, 2.0)
        })
        .unwrap();
        assert_eq!(r.trace.generations[1].marked, 1);
        let brute = brute_force_generations(&f, &q, alpha, 3);
        let mut part = DyadicPartition::singleton(unit(2));
        for (k, expected) in brute.iter().enumerate().skip(1) {
            assert_eq!(r.trace.generations[k].cells, expected.len(), "generation {k}");
            let phis: Vec<f64> = part.cells().iter().map(|c| q.energy_phi(&f, c, 2.0).unwrap()).collect();
            let g: Vec<f64> = part
                .cells()
                .iter()
                .zip(&phis)
                .map(|(c, &v)| g_alpha(c, v, alpha))
                .collect();
            let gmax = g.iter().cloned().fold(0.0, f64::max);
            let marked: Vec<usize> = (0..g.len()).filter(|&i| g[i] >= 0.25 * gmax).collect();
            part = part.extend_indices(&marked).unwrap();
            let mut ours: Vec<(Vec<f64>, f64)> = part.cells().iter().map(|c| (c.corner().to_vec(), c.side())).collect();
            let mut theirs = expected.clone();
            let key = |a: &(Vec<f64>, f64)| (a.0[0].to_bits(), a.0[1].to_bits(), a.1.to_bits());
            ours.sort_by_key(key);
            theirs.sort_by_key(key);
            assert_eq!(ours, theirs, "generation {k}");
        }
        // the energy sits in the lower-left quadrant, so generation 2 refines
        // only inside it
        let second = &brute[2];
        assert!(second
            .iter()
            .filter(|(_, h)| *h == 0.25)
            .all(|(c, _)| c[0] < 0.5 && c[1] < 0.5));
    }

    #[test]
    fn trace_invariants_for_quad() {
        let q = Quadrature::new(QuadratureConfig::default()).unwrap();
        let f = Corpus::quad(2);
        let alpha = 2.5;
        let r = refine_to_budget(&unit(2), RefinementParams::new(alpha, 0.5).unwrap(), 5000, |c| {
            q.energy_phi(&f, c, 2.0)
        })
        .unwrap();
        let t = &r.trace;
        assert!(t.generations.len() == t.accepted + 2);
        let m = t.accepted_record();
        assert!(m.n_k <= 5000 && t.generations[t.accepted + 1].n_k > 5000);
        let decay = 2f64.powf(-2.0 * alpha);
        for w in t.generations.windows(2) {
            assert!(w[1].n_k > w[0].n_k);
            // a split cube passes from 2^L slabs to 2^d children with 2^{L+1}
            assert!(w[1].n_k <= 8 * w[0].n_k);
            assert!(w[1].g_alpha <= decay * w[0].g_alpha * (1.0 + 1e-9));
            assert!(w[1].min_marked_g.unwrap() >= w[1].threshold);
            assert_eq!(w[1].cells, w[0].cells + 3 * w[1].marked);
        }
        // replay G_α and N_m from the partition itself
        let phis: Vec<f64> = r
            .partition
            .cells()
            .iter()
            .map(|c| q.energy_phi(&f, c, 2.0).unwrap())
            .collect();
        let g = r
            .partition
            .cells()
            .iter()
            .zip(&phis)
            .map(|(c, &v)| g_alpha(c, v, alpha))
            .fold(0.0, f64::max);
        assert_relative_eq!(g, m.g_alpha, max_relative = 1e-12);
        let n: u64 = r
            .partition
            .cells()
            .iter()
            .map(|c| n_gamma(c, r.partition.domain(), 0.5))
            .sum();
        assert_eq!(n, m.n_k);
    }
}
