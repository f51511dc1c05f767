//! Cubes, dyadic subdivisions, slab cells and exact planar slab clipping.

use std::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::scalar::{count, lit, Real};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 8;

/// Axis-aligned cube `[corner, corner + side)^d` at a given dyadic depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube<T> {
    corner: Vec<T>,
    side: T,
    level: u32,
}

impl<T: Real> Cube<T> {
    /// Creates a root cube (level 0).
    pub fn new(corner: Vec<T>, side: T) -> Result<Self> {
        Self::with_level(corner, side, 0)
    }

    pub fn with_level(corner: Vec<T>, side: T, level: u32) -> Result<Self> {
        let d = corner.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::UnsupportedDimension {
                got: d,
                reason: "cube dimension must lie in 1..=8",
            });
        }
        if !(side > T::zero()) || !side.is_finite() {
            return invalid(format!("cube side must be positive and finite, got {side}"));
        }
        if corner.iter().any(|c| !c.is_finite()) {
            return invalid("cube corner coordinates must be finite");
        }
        Ok(Self { corner, side, level })
    }

    /// The unit cube `(0,1)^d`.
    pub fn unit(d: usize) -> Result<Self> {
        Self::new(vec![T::zero(); d], T::one())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    #[inline]
    pub fn corner(&self) -> &[T] {
        &self.corner
    }

    #[inline]
    pub fn side(&self) -> T {
        self.side
    }

    #[inline]
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn volume(&self) -> T {
        self.side.powi(self.dim() as i32)
    }

    pub fn center(&self) -> Vec<T> {
        let half = self.side * lit(0.5);
        self.corner.iter().map(|&c| c + half).collect()
    }

    pub fn diameter(&self) -> T {
        self.side * count::<T>(self.dim()).sqrt()
    }

    /// Half-open membership `corner <= x < corner + side` on every axis.
    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && self.corner.iter().zip(x).all(|(&c, &xi)| xi >= c && xi < c + self.side)
    }

    /// Closed membership `corner <= x <= corner + side`.
    pub fn contains_closed(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && self
                .corner
                .iter()
                .zip(x)
                .all(|(&c, &xi)| xi >= c && xi <= c + self.side)
    }

    /// The `2^d` children of halved side, ordered by the bit pattern of their
    /// offset (bit `j` set means the upper half along axis `j`).
    pub fn children(&self) -> Vec<Cube<T>> {
        let d = self.dim();
        let half = self.side * lit(0.5);
        (0..1usize << d)
            .map(|mask| {
                let corner = self
                    .corner
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| if mask >> j & 1 == 1 { c + half } else { c })
                    .collect();
                Cube {
                    corner,
                    side: half,
                    level: self.level + 1,
                }
            })
            .collect()
    }

    /// All `2^d` vertices.
    pub fn vertices(&self) -> Vec<Vec<T>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                self.corner
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| if mask >> j & 1 == 1 { c + self.side } else { c })
                    .collect()
            })
            .collect()
    }

    /// `⟨u, x − corner⟩`.
    #[inline]
    pub fn project(&self, direction: &[T], x: &[T]) -> T {
        direction
            .iter()
            .zip(x.iter().zip(&self.corner))
            .fold(T::zero(), |acc, (&u, (&xi, &c))| acc + u * (xi - c))
    }

    /// Min and max of `⟨u, x − corner⟩` over the cube, attained at vertices.
    pub fn projection_range(&self, direction: &[T]) -> (T, T) {
        direction.iter().fold((T::zero(), T::zero()), |(a, b), &u| {
            let s = u * self.side;
            if s < T::zero() {
                (a + s, b)
            } else {
                (a, b + s)
            }
        })
    }

    /// Vertices realizing the min and max of the projection.
    fn extreme_vertices(&self, direction: &[T]) -> (Vec<T>, Vec<T>) {
        let lo = self
            .corner
            .iter()
            .zip(direction)
            .map(|(&c, &u)| if u < T::zero() { c + self.side } else { c })
            .collect();
        let hi = self
            .corner
            .iter()
            .zip(direction)
            .map(|(&c, &u)| if u < T::zero() { c } else { c + self.side })
            .collect();
        (lo, hi)
    }

    /// True when `self` is obtained from `domain` by `self.level` halvings
    /// and sits on the induced dyadic grid.
    pub fn is_dyadic_descendant_of(&self, domain: &Cube<T>) -> bool {
        if self.dim() != domain.dim() {
            return false;
        }
        let expected = domain.side * lit::<T>(0.5).powi(self.level as i32);
        let tol = lit::<T>(64.0) * T::epsilon() * domain.side;
        if (expected - self.side).abs() > tol {
            return false;
        }
        let per_axis = lit::<T>(2.0).powi(self.level as i32);
        self.corner.iter().zip(&domain.corner).all(|(&c, &c0)| {
            let steps = (c - c0) / self.side;
            let r = steps.round();
            (steps - r).abs() <= lit(1e-6) && r >= T::zero() && r < per_axis
        })
    }
}

/// A partition of a domain cube obtained by elementary extensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicPartition<T> {
    domain: Cube<T>,
    cells: Vec<Cube<T>>,
    generation: u32,
}

impl<T: Real> DyadicPartition<T> {
    /// `{Ω}`.
    pub fn singleton(domain: Cube<T>) -> Self {
        let root = Cube {
            level: 0,
            ..domain.clone()
        };
        Self {
            domain: root.clone(),
            cells: vec![root],
            generation: 0,
        }
    }

    /// Uniform grid of `2^{d·level}` cubes.
    pub fn uniform(domain: Cube<T>, level: u32) -> Self {
        let mut part = Self::singleton(domain);
        for _ in 0..level {
            let all: Vec<usize> = (0..part.cells.len()).collect();
            part = part.extend_indices(&all).expect("indices in range");
        }
        part
    }

    pub fn domain(&self) -> &Cube<T> {
        &self.domain
    }

    pub fn cells(&self) -> &[Cube<T>] {
        &self.cells
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_volume(&self) -> T {
        self.cells.iter().map(Cube::volume).sum()
    }

    /// Splits every cube in `marked` into its `2^d` children.
    pub fn elementary_extension(&self, marked: &[Cube<T>]) -> Result<Self> {
        let mut indices = Vec::with_capacity(marked.len());
        for cube in marked {
            match self.cells.iter().position(|c| c == cube) {
                Some(i) => indices.push(i),
                None => {
                    return invalid(format!(
                        "marked cube at {:?} (level {}) is not a cell of the partition",
                        cube.corner, cube.level
                    ))
                }
            }
        }
        self.extend_indices(&indices)
    }

    /// Index-based form of [`Self::elementary_extension`]. Children replace
    /// their parent in place, so cell order stays deterministic.
    pub fn extend_indices(&self, marked: &[usize]) -> Result<Self> {
        if marked.is_empty() {
            return invalid("an elementary extension needs at least one marked cube");
        }
        let mut flag = vec![false; self.cells.len()];
        for &i in marked {
            if i >= self.cells.len() {
                return invalid(format!("cell index {i} out of range ({} cells)", self.cells.len()));
            }
            flag[i] = true;
        }
        let split = flag.iter().filter(|&&f| f).count();
        let mut cells = Vec::with_capacity(self.cells.len() + split * ((1 << self.domain.dim()) - 1));
        for (cell, &f) in self.cells.iter().zip(&flag) {
            if f {
                cells.extend(cell.children());
            } else {
                cells.push(cell.clone());
            }
        }
        Ok(Self {
            domain: self.domain.clone(),
            cells,
            generation: self.generation + 1,
        })
    }

    /// Index of the cell containing `x`; faces on the upper boundary of the
    /// domain are treated as closed.
    pub fn locate(&self, x: &[T]) -> Option<usize> {
        if !self.domain.contains_closed(x) {
            return None;
        }
        let top: Vec<T> = self.domain.corner.iter().map(|&c| c + self.domain.side).collect();
        self.cells.iter().position(|cell| {
            cell.corner.iter().zip(x).zip(&top).all(|((&c, &xi), &t)| {
                let upper = c + cell.side;
                xi >= c && (xi < upper || (xi == upper && upper >= t))
            })
        })
    }
}

/// A cube cut by two parallel hyperplanes orthogonal to a unit direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabCell<T> {
    parent: Cube<T>,
    direction: Vec<T>,
    lo: T,
    hi: T,
    closed_hi: bool,
}

impl<T: Real> SlabCell<T> {
    /// Reassembles a slab from stored parts; `direction` must be a unit
    /// vector and `lo ≤ hi`.
    pub fn from_parts(parent: Cube<T>, direction: Vec<T>, lo: T, hi: T, closed_hi: bool) -> Result<Self> {
        if direction.len() != parent.dim() {
            return invalid(format!(
                "direction has {} components, cube has dimension {}",
                direction.len(),
                parent.dim()
            ));
        }
        let norm = direction.iter().map(|&u| u * u).sum::<T>().sqrt();
        if !((norm - T::one()).abs() <= lit(1e-6)) {
            return invalid(format!("slab direction must have unit length, got |u| = {norm}"));
        }
        if !(lo <= hi) {
            return invalid(format!("slab bounds must satisfy lo <= hi, got [{lo}, {hi}]"));
        }
        Ok(Self {
            parent,
            direction,
            lo,
            hi,
            closed_hi,
        })
    }

    pub fn parent(&self) -> &Cube<T> {
        &self.parent
    }

    pub fn direction(&self) -> &[T] {
        &self.direction
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    /// Whether the upper threshold is inclusive (last slab of its cube).
    pub fn closed_hi(&self) -> bool {
        self.closed_hi
    }

    #[inline]
    pub fn projection(&self, x: &[T]) -> T {
        self.parent.project(&self.direction, x)
    }

    #[inline]
    fn accepts_projection(&self, t: T) -> bool {
        t >= self.lo && (t < self.hi || (self.closed_hi && t <= self.hi))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.parent.contains(x) && self.accepts_projection(self.projection(x))
    }

    /// A point of the closed slab whose projection is the slab midpoint.
    pub fn midpoint_preimage(&self) -> Vec<T> {
        let (a, b) = self.parent.projection_range(&self.direction);
        let (va, vb) = self.parent.extreme_vertices(&self.direction);
        let mid = (self.lo + self.hi) * lit(0.5);
        let t = if b > a { (mid - a) / (b - a) } else { lit(0.5) };
        va.iter().zip(&vb).map(|(&p, &q)| p + t * (q - p)).collect()
    }
}

/// Index of the slab (from one parent's fan, ordered by threshold) whose
/// projection interval contains `t`.
pub fn locate_slab<T: Real>(slabs: &[SlabCell<T>], t: T) -> Option<usize> {
    let first = slabs.first()?;
    if t < first.lo {
        return None;
    }
    let i = slabs.partition_point(|s| s.hi <= t);
    if i < slabs.len() {
        Some(i)
    } else {
        let last = slabs.len() - 1;
        slabs[last].accepts_projection(t).then_some(last)
    }
}

/// Splits `cell` into `n` slabs by equidistant hyperplanes orthogonal to the
/// unit vector `direction`, spanning the full projection range of the cube.
pub fn slab_split<T: Real>(cell: &Cube<T>, direction: &[T], n: usize) -> Result<Vec<SlabCell<T>>> {
    if n == 0 {
        return invalid("slab count must be at least 1");
    }
    if direction.len() != cell.dim() {
        return invalid(format!(
            "direction has {} components, cube has dimension {}",
            direction.len(),
            cell.dim()
        ));
    }
    let norm = direction.iter().map(|&u| u * u).sum::<T>().sqrt();
    if norm == T::zero() || !norm.is_finite() {
        return invalid("slab direction must be a nonzero finite vector");
    }
    let tol = lit::<T>(1e-12).max(lit::<T>(16.0) * T::epsilon());
    if (norm - T::one()).abs() > tol {
        return invalid(format!("slab direction must have unit length, got |u| = {norm}"));
    }
    let (a, b) = cell.projection_range(direction);
    let width = b - a;
    let thresholds: Vec<T> = (0..=n)
        .map(|i| {
            if i == n {
                b
            } else {
                a + width * count::<T>(i) / count::<T>(n)
            }
        })
        .collect();
    Ok(thresholds
        .windows(2)
        .enumerate()
        .map(|(i, w)| SlabCell {
            parent: cell.clone(),
            direction: direction.to_vec(),
            lo: w[0],
            hi: w[1],
            closed_hi: i + 1 == n,
        })
        .collect())
}

/// A single slab covering the whole cube, used for isotropic cells.
pub fn whole_cube_slab<T: Real>(cell: &Cube<T>) -> SlabCell<T> {
    let mut e1 = vec![T::zero(); cell.dim()];
    e1[0] = T::one();
    slab_split(cell, &e1, 1)
        .expect("axis direction is a valid unit vector")
        .remove(0)
}

/// Final convex partition: the slabs of every cube of a dyadic subdivision.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPartition<T> {
    cells: Vec<SlabCell<T>>,
    spans: Vec<Range<usize>>,
    source: DyadicPartition<T>,
}

impl<T: Real> ConvexPartition<T> {
    /// Assembles a partition from per-cube slab fans, `fans[i]` belonging to
    /// `source.cells()[i]`.
    pub fn from_fans(source: DyadicPartition<T>, fans: Vec<Vec<SlabCell<T>>>) -> Result<Self> {
        if fans.len() != source.len() {
            return invalid(format!("{} slab fans for {} cubes", fans.len(), source.len()));
        }
        let mut cells = Vec::with_capacity(fans.iter().map(Vec::len).sum());
        let mut spans = Vec::with_capacity(fans.len());
        for (cube, fan) in source.cells().iter().zip(fans) {
            if fan.is_empty() || fan.iter().any(|s| &s.parent != cube) {
                return invalid("every cube needs a non-empty fan of its own slabs");
            }
            let start = cells.len();
            cells.extend(fan);
            spans.push(start..cells.len());
        }
        Ok(Self { cells, spans, source })
    }

    pub fn domain(&self) -> &Cube<T> {
        self.source.domain()
    }

    pub fn cells(&self) -> &[SlabCell<T>] {
        &self.cells
    }

    pub fn source(&self) -> &DyadicPartition<T> {
        &self.source
    }

    /// Slab index ranges, one per source cube.
    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    pub fn fan(&self, cube: usize) -> &[SlabCell<T>] {
        &self.cells[self.spans[cube].clone()]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the slab containing `x`.
    pub fn locate(&self, x: &[T]) -> Option<usize> {
        let cube = self.source.locate(x)?;
        let fan = self.fan(cube);
        let t = fan[0].projection(x);
        locate_slab(fan, t).map(|i| self.spans[cube].start + i)
    }
}

/// Exact polygon of a planar slab, counter-clockwise. Empty when the slab has
/// zero area.
pub fn clip_slab_2d<T: Real>(slab: &SlabCell<T>) -> Result<Vec<[T; 2]>> {
    let cube = slab.parent();
    if cube.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            got: cube.dim(),
            reason: "exact slab clipping is planar only",
        });
    }
    let (x0, y0, h) = (cube.corner[0], cube.corner[1], cube.side);
    let square = vec![[x0, y0], [x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h]];
    let u = [slab.direction[0], slab.direction[1]];
    let proj = |p: &[T; 2]| u[0] * (p[0] - x0) + u[1] * (p[1] - y0);

    // keep proj >= lo, then proj <= hi
    let lower = clip_half_plane(&square, |p| proj(p) - slab.lo);
    let both = clip_half_plane(&lower, |p| slab.hi - proj(p));
    let poly = dedup_vertices(both, h * lit(1e-12));
    if poly.len() < 3 || polygon_area(&poly) <= h * h * lit(1e-14) {
        return Ok(Vec::new());
    }
    Ok(poly)
}

/// Sutherland–Hodgman against `{p : side(p) >= 0}`.
fn clip_half_plane<T: Real>(poly: &[[T; 2]], side: impl Fn(&[T; 2]) -> T) -> Vec<[T; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let Some(mut prev) = poly.last() else { return out };
    let mut prev_s = side(prev);
    for cur in poly {
        let s = side(cur);
        let cur_in = s >= T::zero();
        let prev_in = prev_s >= T::zero();
        if cur_in != prev_in {
            let t = prev_s / (prev_s - s);
            out.push([prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])]);
        }
        if cur_in {
            out.push(*cur);
        }
        prev = cur;
        prev_s = s;
    }
    out
}

fn dedup_vertices<T: Real>(poly: Vec<[T; 2]>, tol: T) -> Vec<[T; 2]> {
    let close = |a: &[T; 2], b: &[T; 2]| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol;
    let mut out: Vec<[T; 2]> = Vec::with_capacity(poly.len());
    for p in poly {
        if out.last().is_none_or(|q| !close(q, &p)) {
            out.push(p);
        }
    }
    while out.len() > 1 && close(&out[0], out.last().unwrap()) {
        out.pop();
    }
    out
}

/// Signed shoelace area (positive for counter-clockwise order).
pub fn polygon_area<T: Real>(poly: &[[T; 2]]) -> T {
    if poly.len() < 3 {
        return T::zero();
    }
    let twice: T = (0..poly.len())
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    twice * lit(0.5)
}
