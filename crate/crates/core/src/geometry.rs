//! Points, axis-parallel boxes, finite box unions and dyadic lattices.
//!
//! Coordinates are stored as a flat vector of length `n + 1` where the last
//! entry is time. All set operations treat boxes as closed.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(x, t)` in `R^n x R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(spatial: &[f64], time: f64) -> Self {
        let mut coords = Vec::with_capacity(spatial.len() + 1);
        coords.extend_from_slice(spatial);
        coords.push(time);
        Point { coords }
    }

    /// Builds a point from `n + 1` coordinates, time last.
    pub fn from_coords(coords: Vec<f64>) -> Self {
        assert!(coords.len() >= 2, "a point needs at least one spatial coordinate and time");
        Point { coords }
    }

    pub fn xt(x: f64, t: f64) -> Self {
        Point { coords: vec![x, t] }
    }

    /// Spatial dimension `n`.
    pub fn n(&self) -> usize {
        self.coords.len() - 1
    }

    /// Full dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn spatial(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }

    pub fn time(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn neg(&self) -> Point {
        Point { coords: self.coords.iter().map(|c| -c).collect() }
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point { coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect() }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.coords, &other.coords)
    }
}

pub fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Closed axis-parallel box. Zero width along an axis is allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    #[serde(rename = "min")]
    pub min_corner: Point,
    #[serde(rename = "max")]
    pub max_corner: Point,
}

impl AxisBox {
    pub fn new(min_corner: Point, max_corner: Point) -> Result<Self> {
        let b = AxisBox { min_corner, max_corner };
        b.validate()?;
        Ok(b)
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() < 2 || lo.len() != hi.len() {
            return Err(Error::InvalidInput(format!(
                "box corners need matching lengths >= 2, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        AxisBox::new(Point::from_coords(lo.to_vec()), Point::from_coords(hi.to_vec()))
    }

    /// `[x0, x1] x [t0, t1]` in the plane.
    pub fn rect(x0: f64, x1: f64, t0: f64, t1: f64) -> Self {
        AxisBox::from_bounds(&[x0, t0], &[x1, t1]).expect("invalid rectangle")
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.lo(), self.hi());
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for (i, (a, b)) in lo.iter().zip(hi).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite box coordinate on axis {i}")));
            }
            if a > b {
                return Err(Error::InvalidInput(format!("box min exceeds max on axis {i}: {a} > {b}")));
            }
        }
        Ok(())
    }

    pub fn lo(&self) -> &[f64] {
        self.min_corner.coords()
    }

    pub fn hi(&self) -> &[f64] {
        self.max_corner.coords()
    }

    pub fn dim(&self) -> usize {
        self.min_corner.dim()
    }

    pub fn n(&self) -> usize {
        self.dim() - 1
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi()[axis] - self.lo()[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.dim()).any(|i| self.side(i) == 0.0)
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Point {
        Point::from_coords(self.lo().iter().zip(self.hi()).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    pub fn diam(&self) -> f64 {
        dist(self.lo(), self.hi())
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.contains_coords(p.coords())
    }

    pub fn contains_coords(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo().iter().zip(self.hi())).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Squared Euclidean distance from `p` to the box, by clamping.
    pub fn distance2_coords(&self, p: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for (x, (a, b)) in p.iter().zip(self.lo().iter().zip(self.hi())) {
            let d = if x < a {
                a - x
            } else if x > b {
                x - b
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    pub fn distance(&self, p: &Point) -> f64 {
        self.distance2_coords(p.coords()).sqrt()
    }

    /// Largest distance from `p` to a point of the box.
    pub fn farthest_distance(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo().iter().zip(self.hi()))
            .map(|(x, (a, b))| {
                let d = (x - a).abs().max((b - x).abs());
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Closed intersection, `None` when empty.
    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        let lo: Vec<f64> = self.lo().iter().zip(other.lo()).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi().iter().zip(other.hi()).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return None;
        }
        Some(AxisBox { min_corner: Point::from_coords(lo), max_corner: Point::from_coords(hi) })
    }

    pub fn intersects(&self, other: &AxisBox) -> bool {
        self.lo()
            .iter()
            .zip(self.hi())
            .zip(other.lo().iter().zip(other.hi()))
            .all(|((a0, a1), (b0, b1))| a0 <= b1 && b0 <= a1)
    }

    /// True when the interiors of two full-dimensional boxes meet.
    pub fn interiors_overlap(&self, other: &AxisBox) -> bool {
        self.lo()
            .iter()
            .zip(self.hi())
            .zip(other.lo().iter().zip(other.hi()))
            .all(|((a0, a1), (b0, b1))| a0 < b1 && b0 < a1)
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        self.lo().iter().zip(other.lo()).all(|(a, b)| a <= b) && self.hi().iter().zip(other.hi()).all(|(a, b)| b <= a)
    }

    /// Concentric box with every side multiplied by `k`.
    pub fn dilate(&self, k: f64) -> AxisBox {
        let c = self.center();
        let lo = c.coords().iter().zip(self.lo()).map(|(c, a)| c - k * (c - a)).collect();
        let hi = c.coords().iter().zip(self.hi()).map(|(c, b)| c + k * (b - c)).collect();
        AxisBox { min_corner: Point::from_coords(lo), max_corner: Point::from_coords(hi) }
    }

    pub fn expand(&self, margin: f64) -> AxisBox {
        AxisBox {
            min_corner: Point::from_coords(self.lo().iter().map(|a| a - margin).collect()),
            max_corner: Point::from_coords(self.hi().iter().map(|b| b + margin).collect()),
        }
    }

    pub fn scaled(&self, lambda: f64) -> AxisBox {
        AxisBox {
            min_corner: Point::from_coords(self.lo().iter().map(|a| lambda * a).collect()),
            max_corner: Point::from_coords(self.hi().iter().map(|b| lambda * b).collect()),
        }
    }

    pub fn translated(&self, v: &[f64]) -> AxisBox {
        AxisBox {
            min_corner: Point::from_coords(self.lo().iter().zip(v).map(|(a, d)| a + d).collect()),
            max_corner: Point::from_coords(self.hi().iter().zip(v).map(|(b, d)| b + d).collect()),
        }
    }

    /// All `2^(n+1)` corners, ordered by the bit pattern of the axis choice.
    pub fn corners(&self) -> Vec<Point> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                Point::from_coords(
                    (0..d).map(|i| if mask >> i & 1 == 1 { self.hi()[i] } else { self.lo()[i] }).collect(),
                )
            })
            .collect()
    }

    /// Parts of `self` outside the interior of `cut`. Pieces have disjoint interiors.
    fn subtract(&self, cut: &AxisBox) -> Vec<AxisBox> {
        if !self.interiors_overlap(cut) {
            return vec![self.clone()];
        }
        let mut pieces = Vec::new();
        let mut rest = self.clone();
        for axis in 0..self.dim() {
            let (a, b) = (rest.lo()[axis], rest.hi()[axis]);
            let (c, d) = (cut.lo()[axis], cut.hi()[axis]);
            if a < c {
                let mut hi = rest.hi().to_vec();
                hi[axis] = c;
                pieces.push(AxisBox::from_bounds(rest.lo(), &hi).expect("valid slab"));
            }
            if d < b {
                let mut lo = rest.lo().to_vec();
                lo[axis] = d;
                pieces.push(AxisBox::from_bounds(&lo, rest.hi()).expect("valid slab"));
            }
            let mut lo = rest.lo().to_vec();
            let mut hi = rest.hi().to_vec();
            lo[axis] = a.max(c);
            hi[axis] = b.min(d);
            rest = AxisBox::from_bounds(&lo, &hi).expect("valid core");
        }
        pieces
    }

    /// Uniform random point of the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        Point::from_coords(
            self.lo()
                .iter()
                .zip(self.hi())
                .map(|(a, b)| if a == b { *a } else { rng.gen_range(*a..=*b) })
                .collect(),
        )
    }
}

/// A compact set given as a finite union of closed boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxUnionSet {
    pub n: usize,
    pub boxes: Vec<AxisBox>,
}

impl BoxUnionSet {
    pub fn new(n: usize, boxes: Vec<AxisBox>) -> Result<Self> {
        let set = BoxUnionSet { n, boxes };
        set.validate()?;
        Ok(set)
    }

    pub fn empty(n: usize) -> Self {
        BoxUnionSet { n, boxes: Vec::new() }
    }

    pub fn single(b: AxisBox) -> Self {
        BoxUnionSet { n: b.n(), boxes: vec![b] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("spatial dimension must be at least 1".into()));
        }
        for b in &self.boxes {
            if b.min_corner.dim() != self.n + 1 {
                return Err(Error::DimensionMismatch { expected: self.n + 1, got: b.min_corner.dim() });
            }
            if b.max_corner.dim() != self.n + 1 {
                return Err(Error::DimensionMismatch { expected: self.n + 1, got: b.max_corner.dim() });
            }
            b.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: BoxUnionSet =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("set JSON: {e}")))?;
        set.validate()?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    pub fn bbox(&self) -> Option<AxisBox> {
        let first = self.boxes.first()?;
        let mut lo = first.lo().to_vec();
        let mut hi = first.hi().to_vec();
        for b in &self.boxes[1..] {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(b.lo()[i]);
                hi[i] = hi[i].max(b.hi()[i]);
            }
        }
        Some(AxisBox::from_bounds(&lo, &hi).expect("bounding box"))
    }

    /// Exact diameter of the union.
    pub fn diam(&self) -> f64 {
        let mut best: f64 = 0.0;
        for a in &self.boxes {
            for b in &self.boxes {
                let d2: f64 = (0..self.dim())
                    .map(|i| {
                        let d = (a.hi()[i] - b.lo()[i]).abs().max((b.hi()[i] - a.lo()[i]).abs());
                        d * d
                    })
                    .sum();
                best = best.max(d2.sqrt());
            }
        }
        best
    }

    /// Lebesgue measure; boxes are assumed interior-disjoint (see [`BoxUnionSet::normalized`]).
    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(AxisBox::volume).sum()
    }

    /// Rewrites the union so that distinct boxes have disjoint interiors.
    /// Degenerate boxes already covered by another box are dropped.
    pub fn normalized(&self) -> BoxUnionSet {
        let mut kept: Vec<AxisBox> = Vec::new();
        for b in &self.boxes {
            if b.is_degenerate() {
                if !self.boxes.iter().any(|o| !o.is_degenerate() && o.contains_box(b))
                    && !kept.iter().any(|o| o.contains_box(b))
                {
                    kept.push(b.clone());
                }
                continue;
            }
            let mut pieces = vec![b.clone()];
            for k in kept.iter().filter(|k| !k.is_degenerate()) {
                pieces = pieces.iter().flat_map(|p| p.subtract(k)).collect();
            }
            kept.extend(pieces.into_iter().filter(|p| !p.is_degenerate()));
        }
        BoxUnionSet { n: self.n, boxes: kept }
    }

    pub fn scaled(&self, lambda: f64) -> BoxUnionSet {
        BoxUnionSet { n: self.n, boxes: self.boxes.iter().map(|b| b.scaled(lambda)).collect() }
    }

    pub fn translated(&self, v: &[f64]) -> BoxUnionSet {
        BoxUnionSet { n: self.n, boxes: self.boxes.iter().map(|b| b.translated(v)).collect() }
    }

    pub fn union(&self, other: &BoxUnionSet) -> BoxUnionSet {
        let mut boxes = self.boxes.clone();
        boxes.extend(other.boxes.iter().cloned());
        BoxUnionSet { n: self.n, boxes }
    }

    /// True when some box of `self` and some box of `other` share interior points.
    pub fn interiors_overlap(&self, other: &BoxUnionSet) -> bool {
        self.boxes.iter().any(|a| other.boxes.iter().any(|b| a.interiors_overlap(b)))
    }

    pub fn intersect_box(&self, b: &AxisBox) -> BoxUnionSet {
        BoxUnionSet { n: self.n, boxes: self.boxes.iter().filter_map(|a| a.intersect(b)).collect() }
    }

    pub fn intersects_box(&self, b: &AxisBox) -> bool {
        self.boxes.iter().any(|a| a.intersects(b))
    }

    /// Random point of the set: a uniformly chosen box, then a uniform point in it.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        let b = &self.boxes[rng.gen_range(0..self.boxes.len())];
        b.sample(rng)
    }
}

/// `dist(p, F)`: minimum point-to-box distance over the boxes of `F`.
pub fn distance_to_set(p: &Point, set: &BoxUnionSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(distance_to_set_coords(p.coords(), set))
}

pub(crate) fn distance_to_set_coords(p: &[f64], set: &BoxUnionSet) -> f64 {
    set.boxes.iter().map(|b| b.distance2_coords(p)).fold(f64::INFINITY, f64::min).sqrt()
}

/// Largest observed `|dist(p,F) - dist(q,F)| / |p - q|` over seeded random pairs.
///
/// Pairs are drawn from the bounding box of `F` enlarged by its diameter (at
/// least 1), half of them as close pairs so the local slope is probed too.
pub fn lipschitz_check(set: &BoxUnionSet, samples: usize, seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidInput("lipschitz_check needs at least 2 samples".into()));
    }
    let bbox = set.bbox().ok_or(Error::EmptySet)?;
    let region = bbox.expand(set.diam().max(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let p = region.sample(&mut rng);
        let q = if k % 2 == 0 {
            region.sample(&mut rng)
        } else {
            let h = 10f64.powf(rng.gen_range(-6.0..0.0));
            Point::from_coords(p.coords().iter().map(|c| c + h * rng.gen_range(-1.0..1.0)).collect())
        };
        let d = p.dist(&q);
        if d == 0.0 {
            continue;
        }
        let diff = (distance_to_set(&p, set)? - distance_to_set(&q, set)?).abs();
        worst = worst.max(diff / d);
    }
    Ok(worst)
}

/// Tensor lattice of points of `b` including its corners, ordered
/// lexicographically by index with the first axis slowest.
pub fn grid(b: &AxisBox, resolution: &[usize]) -> Result<Vec<Point>> {
    if resolution.len() != b.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), got: resolution.len() });
    }
    if let Some(r) = resolution.iter().find(|&&r| r < 2) {
        return Err(Error::InvalidInput(format!("grid resolution must be at least 2, got {r}")));
    }
    let axes: Vec<Vec<f64>> = (0..b.dim())
        .map(|i| {
            let m = resolution[i] - 1;
            (0..=m)
                .map(|k| {
                    if k == m {
                        b.hi()[i]
                    } else {
                        b.lo()[i] + (b.hi()[i] - b.lo()[i]) * (k as f64 / m as f64)
                    }
                })
                .collect()
        })
        .collect();
    let total: usize = resolution.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; b.dim()];
    for _ in 0..total {
        out.push(Point::from_coords(idx.iter().enumerate().map(|(i, &k)| axes[i][k]).collect()));
        for axis in (0..b.dim()).rev() {
            idx[axis] += 1;
            if idx[axis] < resolution[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    Ok(out)
}

/// A cube `origin_shift + base_scale * 2^-generation * (index + [0,1)^(n+1))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub generation: i32,
    pub index: Vec<i64>,
    pub origin_shift: Point,
    pub base_scale: f64,
}

impl DyadicCube {
    pub fn side(&self) -> f64 {
        self.base_scale * 2f64.powi(-self.generation)
    }

    pub fn to_box(&self) -> AxisBox {
        let s = self.side();
        let lo: Vec<f64> =
            self.index.iter().zip(self.origin_shift.coords()).map(|(&k, o)| o + s * k as f64).collect();
        let hi: Vec<f64> = lo.iter().map(|a| a + s).collect();
        AxisBox::from_bounds(&lo, &hi).expect("dyadic cube")
    }

    pub fn center(&self) -> Point {
        self.to_box().center()
    }

    pub fn diam(&self) -> f64 {
        self.side() * (self.index.len() as f64).sqrt()
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube {
            generation: self.generation - 1,
            index: self.index.iter().map(|k| k.div_euclid(2)).collect(),
            origin_shift: self.origin_shift.clone(),
            base_scale: self.base_scale,
        }
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let d = self.index.len();
        (0..1usize << d)
            .map(|mask| DyadicCube {
                generation: self.generation + 1,
                index: self.index.iter().enumerate().map(|(i, k)| 2 * k + (mask >> i & 1) as i64).collect(),
                origin_shift: self.origin_shift.clone(),
                base_scale: self.base_scale,
            })
            .collect()
    }

    /// Whether `other` lies inside `self` (same lattice), in exact integer arithmetic.
    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        if other.generation < self.generation {
            return false;
        }
        let shift = other.generation - self.generation;
        self.index.iter().zip(&other.index).all(|(a, b)| b >> shift == *a)
    }

    /// Disjoint interiors, decided in integer arithmetic.
    pub fn interiors_disjoint(&self, other: &DyadicCube) -> bool {
        !(self.contains_cube(other) || other.contains_cube(self))
    }
}

/// Dyadic lattice anchored at `origin_shift` with unit scale `base_scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicLattice {
    pub origin_shift: Point,
    pub base_scale: f64,
}

impl DyadicLattice {
    pub fn standard(n: usize) -> Self {
        DyadicLattice { origin_shift: Point::from_coords(vec![0.0; n + 1]), base_scale: 1.0 }
    }

    pub fn side(&self, generation: i32) -> f64 {
        self.base_scale * 2f64.powi(-generation)
    }

    pub fn cube(&self, generation: i32, index: Vec<i64>) -> DyadicCube {
        DyadicCube { generation, index, origin_shift: self.origin_shift.clone(), base_scale: self.base_scale }
    }

    /// Integer range of cubes along one axis meeting `[lo, hi]`. A
    /// non-degenerate interval is matched against open cube intervals; a
    /// degenerate one picks the half-open cube containing it.
    fn axis_range(&self, generation: i32, axis: usize, lo: f64, hi: f64) -> (i64, i64) {
        let s = self.side(generation);
        let o = self.origin_shift.coords()[axis];
        let a = (lo - o) / s;
        if lo == hi {
            let k = a.floor() as i64;
            (k, k)
        } else {
            let b = (hi - o) / s;
            (a.floor() as i64, b.ceil() as i64 - 1)
        }
    }

    /// All cubes of `generation` meeting `set`, lexicographically ordered.
    pub fn cover(&self, set: &BoxUnionSet, generation: i32, cap: usize) -> Result<Vec<DyadicCube>> {
        let mut found: BTreeSet<Vec<i64>> = BTreeSet::new();
        for b in &set.boxes {
            let ranges: Vec<(i64, i64)> =
                (0..b.dim()).map(|i| self.axis_range(generation, i, b.lo()[i], b.hi()[i])).collect();
            let count = ranges.iter().try_fold(1u128, |acc, (a, z)| acc.checked_mul((z - a + 1).max(0) as u128));
            match count {
                Some(c) if c <= cap as u128 => {}
                _ => return Err(Error::CoverCap { cap }),
            }
            let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                found.insert(idx.clone());
                if found.len() > cap {
                    return Err(Error::CoverCap { cap });
                }
                for axis in (0..idx.len()).rev() {
                    idx[axis] += 1;
                    if idx[axis] <= ranges[axis].1 {
                        continue 'outer;
                    }
                    idx[axis] = ranges[axis].0;
                }
                break;
            }
        }
        Ok(found.into_iter().map(|index| self.cube(generation, index)).collect())
    }
}

/// Dyadic cubes of the standard lattice (origin-anchored, unit scale) meeting `set`.
pub fn dyadic_cover(set: &BoxUnionSet, generation: i32, cap: usize) -> Result<Vec<DyadicCube>> {
    DyadicLattice::standard(set.n).cover(set, generation, cap)
}

/// Box union formed by the cubes of [`dyadic_cover`].
pub fn dyadic_hull(set: &BoxUnionSet, generation: i32, cap: usize) -> Result<BoxUnionSet> {
    let cubes = dyadic_cover(set, generation, cap)?;
    Ok(BoxUnionSet { n: set.n, boxes: cubes.iter().map(DyadicCube::to_box).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> BoxUnionSet {
        BoxUnionSet::single(AxisBox::rect(0.0, 1.0, 0.0, 1.0))
    }

    #[test]
    fn distances_to_unit_square() {
        let f = unit_square();
        assert_eq!(distance_to_set(&Point::xt(0.3, 0.7), &f).unwrap(), 0.0);
        assert_eq!(distance_to_set(&Point::xt(2.0, 0.0), &f).unwrap(), 1.0);
        let d = distance_to_set(&Point::xt(2.0, 2.0), &f).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(distance_to_set(&Point::xt(0.0, 0.0), &BoxUnionSet::empty(1)), Err(Error::EmptySet)));
    }

    #[test]
    fn lipschitz_ratio_at_most_one() {
        let f = unit_square().union(&BoxUnionSet::single(AxisBox::rect(3.0, 3.5, -1.0, 0.0)));
        assert!(lipschitz_check(&f, 10_000, 7).unwrap() <= 1.0 + 1e-12);
        let point = BoxUnionSet::single(AxisBox::rect(0.5, 0.5, 0.5, 0.5));
        assert!(lipschitz_check(&point, 10_000, 8).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn grid_examples() {
        let b = AxisBox::rect(0.0, 1.0, 0.0, 1.0);
        let corners = grid(&b, &[2, 2]).unwrap();
        assert_eq!(corners, vec![Point::xt(0.0, 0.0), Point::xt(0.0, 1.0), Point::xt(1.0, 0.0), Point::xt(1.0, 1.0)]);
        let nine = grid(&b, &[3, 3]).unwrap();
        assert_eq!(nine.len(), 9);
        assert!(nine.contains(&Point::xt(0.5, 0.5)));
        let seg = grid(&AxisBox::rect(0.5, 0.5, 0.0, 1.0), &[4, 5]).unwrap();
        assert!(seg.iter().all(|p| p.spatial()[0] == 0.5));
        assert!(grid(&b, &[1, 3]).is_err());
    }

    #[test]
    fn cover_examples() {
        let sq = unit_square();
        assert_eq!(dyadic_cover(&sq, 0, 100).unwrap().len(), 1);
        assert_eq!(dyadic_cover(&sq, 1, 100).unwrap().len(), 4);
        let two = sq.union(&sq.translated(&[4.0, 0.0]));
        assert_eq!(dyadic_cover(&two, 0, 100).unwrap().len(), 2);
        assert!(matches!(dyadic_cover(&sq, 6, 100), Err(Error::CoverCap { cap: 100 })));
        let seg = BoxUnionSet::single(AxisBox::rect(0.5, 0.5, 0.0, 1.0));
        assert_eq!(dyadic_cover(&seg, 3, 100).unwrap().len(), 8);
    }

    #[test]
    fn normalization_removes_overlap() {
        let s = BoxUnionSet::new(
            1,
            vec![AxisBox::rect(0.0, 2.0, 0.0, 2.0), AxisBox::rect(1.0, 3.0, 1.0, 3.0), AxisBox::rect(0.5, 0.5, 0.0, 1.0)],
        )
        .unwrap();
        let norm = s.normalized();
        assert!((norm.volume() - 7.0).abs() < 1e-12);
        for (i, a) in norm.boxes.iter().enumerate() {
            for b in &norm.boxes[i + 1..] {
                assert!(!a.interiors_overlap(b));
            }
        }
    }

    #[test]
    fn diameter_of_union() {
        let two = unit_square().union(&unit_square().translated(&[4.0, 0.0]));
        assert!((two.diam() - 26f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn dyadic_parent_child() {
        let lat = DyadicLattice::standard(1);
        let q = lat.cube(2, vec![3, -1]);
        for c in q.children() {
            assert!(q.contains_cube(&c));
            assert_eq!(c.parent(), q);
        }
        let other = lat.cube(2, vec![2, -1]);
        assert!(q.interiors_disjoint(&other));
        assert!(!q.interiors_disjoint(&q.children()[1]));
    }
}
