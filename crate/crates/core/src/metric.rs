//! The action space: the unit cube `[0, 1]^d` under the sup (ℓ∞) metric.
//!
//! For `d = 1` the metric is the absolute difference. Besides the metric this
//! module provides the two covering oracles the policies rely on:
//!
//! - [`cover_space`] / [`cover_ball`] return explicit coverings (phased
//!   pruning).
//! - [`find_uncovered`] scans a finite grid for a point outside a set of balls
//!   (zooming activation). [`CoverageGrid`] answers the same question
//!   incrementally and is what the zooming policy uses per round.
//!
//! Coverage by [`find_uncovered`] is only checked on the grid, so a gap narrower
//! than the grid spacing can go unnoticed.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::ContractError;

/// Centers closer than this are considered the same center.
pub const DEDUP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Sup norm over the unit cube.
    LInf,
}

/// `([0, 1]^dim, metric)`. Its diameter is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space {
    dim: usize,
    metric: Metric,
}

/// An arm: a point of the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Box<[f64]>);

/// Identifier of a ball inside the collection that owns it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BallId(pub u32);

/// Closed ball `B(center, radius)`.
///
/// Confidence balls of the zooming policy can have a radius above 1 or, when
/// the noise level is zero, exactly 0; both are accepted here.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub id: BallId,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, ContractError> {
        if coords.is_empty() {
            return Err(ContractError::ZeroDimension);
        }
        for (axis, &value) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ContractError::CoordinateOutOfRange { axis, value });
            }
        }
        Ok(Point(coords.into_boxed_slice()))
    }

    /// Builds a point, clamping every coordinate into `[0, 1]`.
    pub(crate) fn clamped(coords: Vec<f64>) -> Self {
        Point(coords.into_iter().map(|c| c.clamp(0.0, 1.0)).collect())
    }

    pub fn scalar(x: f64) -> Result<Self, ContractError> {
        Point::new(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Ball {
    pub fn new(center: Point, radius: f64, id: BallId) -> Result<Self, ContractError> {
        if radius.is_nan() || radius < 0.0 {
            return Err(ContractError::NonPositiveRadius(radius));
        }
        Ok(Ball { center, radius, id })
    }

    /// Per-axis `[lo, hi]` of `ball ∩ [0, 1]^d`.
    pub fn clipped_box(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.center
            .coords()
            .iter()
            .map(move |&c| ((c - self.radius).max(0.0), (c + self.radius).min(1.0)))
    }
}

impl Space {
    pub fn unit_cube(dim: usize) -> Result<Self, ContractError> {
        if dim == 0 {
            return Err(ContractError::ZeroDimension);
        }
        Ok(Space { dim, metric: Metric::LInf })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn check(&self, p: &Point) -> Result<(), ContractError> {
        if p.dim() != self.dim {
            return Err(ContractError::DimensionMismatch { expected: self.dim, actual: p.dim() });
        }
        Ok(())
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64, ContractError> {
        self.check(p)?;
        self.check(q)?;
        Ok(sup_distance(p.coords(), q.coords()))
    }

    /// Whether `p` lies in the closed ball.
    pub fn contains(&self, ball: &Ball, p: &Point) -> Result<bool, ContractError> {
        Ok(self.distance(&ball.center, p)? <= ball.radius)
    }
}

pub(crate) fn sup_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).fold(0.0, |acc: f64, (a, b)| acc.max(libm::fabs(a - b)))
}

/// Centers covering `[lo, hi]` with intervals of half-width `r`.
///
/// Centers sit at `lo + r, lo + 3r, ...`; the last one is pulled back to
/// `hi - r` so it does not overshoot. An interval no longer than `2r` gets its
/// midpoint.
fn axis_centers(lo: f64, hi: f64, r: f64) -> Vec<f64> {
    let len = hi - lo;
    if len <= 2.0 * r {
        return vec![0.5 * (lo + hi)];
    }
    let count = libm::ceil(len / (2.0 * r) - 1e-9).max(1.0) as usize;
    (0..count)
        .map(|k| (lo + (2 * k + 1) as f64 * r).min(hi - r))
        .collect()
}

/// Cartesian product of per-axis values in lexicographic order (first axis
/// slowest).
fn product(axes: &[Vec<f64>]) -> Vec<Point> {
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        out.push(Point::clamped(idx.iter().zip(axes).map(|(&i, a)| a[i]).collect()));
        for axis in (0..axes.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < axes[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
    out
}

/// Drops every point within [`DEDUP_TOLERANCE`] of an earlier one.
pub fn dedup_points(points: Vec<Point>) -> Vec<Point> {
    let mut kept: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !kept
            .iter()
            .any(|k| sup_distance(k.coords(), p.coords()) < DEDUP_TOLERANCE)
        {
            kept.push(p);
        }
    }
    kept
}

fn check_radius(r: f64) -> Result<(), ContractError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(ContractError::NonPositiveRadius(r));
    }
    Ok(())
}

/// Centers of an `r`-covering of the whole cube, as an axis grid with spacing
/// `2r`.
pub fn cover_space(space: &Space, r: f64) -> Result<Vec<Point>, ContractError> {
    check_radius(r)?;
    let axis = axis_centers(0.0, 1.0, r);
    let axes = vec![axis; space.dim()];
    Ok(dedup_points(product(&axes)))
}

/// Centers whose `r_child`-balls cover `parent ∩ [0, 1]^d`.
///
/// With `r_child = parent.radius / 2` and a parent inside the cube this is the
/// dyadic split: `parent.center ± parent.radius / 2` on every axis.
pub fn cover_ball(space: &Space, parent: &Ball, r_child: f64) -> Result<Vec<Point>, ContractError> {
    check_radius(r_child)?;
    space.check(&parent.center)?;
    if r_child > parent.radius {
        return Err(ContractError::Other(alloc::format!(
            "child radius {r_child} exceeds parent radius {}",
            parent.radius
        )));
    }
    let axes: Vec<Vec<f64>> = parent
        .clipped_box()
        .map(|(lo, hi)| axis_centers(lo, hi, r_child))
        .collect();
    Ok(dedup_points(product(&axes)))
}

/// Grid values `0, h, 2h, ..., 1` along one axis (1 is always included).
pub fn axis_grid(resolution: f64) -> Result<Vec<f64>, ContractError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(ContractError::BadResolution(resolution));
    }
    let steps = libm::ceil(1.0 / resolution - 1e-9).max(1.0) as usize;
    let mut values: Vec<f64> = (0..steps).map(|k| k as f64 * resolution).filter(|&v| v < 1.0).collect();
    values.push(1.0);
    Ok(values)
}

/// First grid point (lexicographic order) outside every ball, if any.
///
/// This is the brute-force oracle: it checks every grid point against every
/// ball.
pub fn find_uncovered(
    space: &Space,
    balls: &[Ball],
    grid_resolution: f64,
) -> Result<Option<Point>, ContractError> {
    for ball in balls {
        space.check(&ball.center)?;
    }
    let axis = axis_grid(grid_resolution)?;
    let dim = space.dim();
    let total = axis.len().pow(dim as u32);
    let mut coords = vec![0.0; dim];
    for flat in 0..total {
        decode(flat, axis.len(), &axis, &mut coords);
        let covered = balls
            .iter()
            .any(|b| sup_distance(b.center.coords(), &coords) <= b.radius);
        if !covered {
            return Ok(Some(Point(coords.into_boxed_slice())));
        }
    }
    Ok(None)
}

fn decode(mut flat: usize, side: usize, axis: &[f64], out: &mut [f64]) {
    for slot in out.iter_mut().rev() {
        *slot = axis[flat % side];
        flat /= side;
    }
}

/// Uniform sample from `ball ∩ [0, 1]^d` (a box under the sup metric).
pub fn sample_in_ball<R: Rng + ?Sized>(space: &Space, ball: &Ball, rng: &mut R) -> Point {
    debug_assert_eq!(ball.center.dim(), space.dim());
    let coords = ball
        .clipped_box()
        .map(|(lo, hi)| {
            let u: f64 = rng.random();
            (lo + (hi - lo) * u).clamp(lo, hi)
        })
        .collect();
    Point(coords)
}

/// Half-open index ranges, one per axis.
type IndexBox = Vec<(usize, usize)>;

/// Incremental version of [`find_uncovered`] for a growing set of balls whose
/// radii change over time.
///
/// Every grid point carries the number of balls containing it, so a radius
/// update only touches the grid points whose membership changes. Answers are
/// identical to [`find_uncovered`] on the same balls and resolution.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    dim: usize,
    axis: Vec<f64>,
    counts: Vec<u32>,
    uncovered: usize,
    centers: Vec<Point>,
    boxes: Vec<IndexBox>,
}

impl CoverageGrid {
    pub fn new(space: &Space, grid_resolution: f64) -> Result<Self, ContractError> {
        let axis = axis_grid(grid_resolution)?;
        let total = axis.len().pow(space.dim() as u32);
        Ok(CoverageGrid {
            dim: space.dim(),
            axis,
            counts: vec![0; total],
            uncovered: total,
            centers: Vec::new(),
            boxes: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Number of grid points outside every ball.
    pub fn uncovered_count(&self) -> usize {
        self.uncovered
    }

    /// Adds a ball and returns its handle (handles count up from 0).
    pub fn insert(&mut self, center: Point, radius: f64) -> usize {
        debug_assert_eq!(center.dim(), self.dim);
        let new = self.index_box(&center, radius);
        self.apply(&Vec::new(), &new);
        self.centers.push(center);
        self.boxes.push(new);
        self.centers.len() - 1
    }

    pub fn set_radius(&mut self, handle: usize, radius: f64) {
        let new = self.index_box(&self.centers[handle], radius);
        if new == self.boxes[handle] {
            return;
        }
        let old = core::mem::replace(&mut self.boxes[handle], new);
        let new = self.boxes[handle].clone();
        self.apply(&old, &new);
    }

    pub fn first_uncovered(&self) -> Option<Point> {
        if self.uncovered == 0 {
            return None;
        }
        let flat = self.counts.iter().position(|&c| c == 0)?;
        let mut coords = vec![0.0; self.dim];
        decode(flat, self.axis.len(), &self.axis, &mut coords);
        Some(Point(coords.into_boxed_slice()))
    }

    fn index_box(&self, center: &Point, radius: f64) -> IndexBox {
        center
            .coords()
            .iter()
            .map(|&c| {
                // Same predicate as the brute-force scan: |g - c| <= radius.
                let lo = self.axis.partition_point(|&g| g < c && libm::fabs(g - c) > radius);
                let hi = self.axis.partition_point(|&g| g <= c || libm::fabs(g - c) <= radius);
                (lo, hi.max(lo))
            })
            .collect()
    }

    fn apply(&mut self, old: &IndexBox, new: &IndexBox) {
        let side = self.axis.len();
        let inside = |b: &IndexBox, idx: &[usize]| {
            !b.is_empty() && b.iter().zip(idx).all(|(&(lo, hi), &i)| lo <= i && i < hi)
        };
        let mut idx = vec![0usize; self.dim];
        for_each_in_box(old, &mut idx, &mut |idx| {
            if !inside(new, idx) {
                let flat = flatten(idx, side);
                self.counts[flat] -= 1;
                if self.counts[flat] == 0 {
                    self.uncovered += 1;
                }
            }
        });
        for_each_in_box(new, &mut idx, &mut |idx| {
            if !inside(old, idx) {
                let flat = flatten(idx, side);
                if self.counts[flat] == 0 {
                    self.uncovered -= 1;
                }
                self.counts[flat] += 1;
            }
        });
    }
}

fn flatten(idx: &[usize], side: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * side + i)
}

fn for_each_in_box(b: &IndexBox, idx: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if b.is_empty() || b.iter().any(|&(lo, hi)| lo >= hi) {
        return;
    }
    for (slot, &(lo, _)) in idx.iter_mut().zip(b) {
        *slot = lo;
    }
    loop {
        f(idx);
        let mut axis = b.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < b[axis].1 {
                break;
            }
            idx[axis] = b[axis].0;
        }
    }
}
