//! Superlevel sets of the potential `Ũ` of a maximizer, their Whitney
//! decomposition and the selection of a finite cover of `E`.
//!
//! The region is a union of closed grid cells on which the bilinear
//! interpolant of the sampled field exceeds `θ`. Whitney cubes are dyadic
//! cubes `Q` with `20Q` inside the region whose parent fails that test; the
//! parent's `20`-fold cube lies in `41Q`, so `41Q` meets the complement.
//! All cube and cell bounds are integers in units of half the finest cube.

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{lower_bound_lp, LpParams};
use crate::error::{Error, Result};
use crate::geometry::{distance_to_set, AxisBox, BoxUnionSet, DyadicCube, DyadicLattice, Point};
use crate::kernels::KernelKind;
use crate::lattice::{Convolution, IndexBox};
use crate::measures::{ball_box_volume, cell_regularized_potential, dyadic_radii};
use crate::quadrature::QuadOptions;
use crate::variational::PotentialSource;

/// `A` in `AQ ∩ 𝒢^c ≠ ∅` that the construction guarantees.
pub const WHITNEY_A: i64 = 41;
/// The constant reported when every cube already meets the complement at 40.
pub const WHITNEY_A_TARGET: i64 = 40;
const MAX_SHRINKS: usize = 20;
/// The grid margin is doubled up to this value while the region reaches the edge.
const MAX_MARGIN: f64 = 8.0;
const BALL_SEED: u64 = 0x5eed_ba11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Node spacing `h / 2^refine` for cells of side `h`; at least 1.
    pub refine: u32,
    /// Margin around the bounding box of `E`, in units of `diam(E)`.
    pub margin: f64,
    /// Nodes whose far-field bound is below `floor_fraction · min_E Ũ` are
    /// not evaluated; their stored value is that bound.
    pub floor_fraction: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { refine: 1, margin: 1.0, floor_fraction: 1.0 / 64.0 }
    }
}

/// Values of `Ũ` (or an upper bound for it below `floor`) at the nodes
/// `a · spacing`, `a` in the node box, lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub spacing: f64,
    pub node_lo: Vec<i64>,
    pub node_ext: Vec<usize>,
    pub values: Vec<f64>,
    pub exact: Vec<bool>,
    pub floor: f64,
    /// Smallest exact value at nodes of `E`.
    pub min_on_set: f64,
}

impl FieldGrid {
    fn nodes(&self) -> IndexBox {
        IndexBox { lo: self.node_lo.clone(), ext: self.node_ext.clone() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, k: usize) -> Point {
        let a = self.nodes().at(k);
        Point::from_coords(a[..self.node_lo.len()].iter().map(|&v| v as f64 * self.spacing).collect())
    }

    pub fn domain(&self) -> AxisBox {
        let lo: Vec<f64> = self.node_lo.iter().map(|&v| v as f64 * self.spacing).collect();
        let hi: Vec<f64> =
            self.node_lo.iter().zip(&self.node_ext).map(|(&l, &e)| (l + e as i64 - 1) as f64 * self.spacing).collect();
        AxisBox::from_bounds(&lo, &hi).expect("grid domain")
    }

    /// A grid filled from a closure; every value is exact.
    pub fn from_fn<F: Fn(&Point) -> f64 + Sync>(node_lo: Vec<i64>, node_hi: &[i64], spacing: f64, f: F) -> Self {
        let nodes = IndexBox::new(node_lo, node_hi);
        let d = nodes.dim();
        let values: Vec<f64> = (0..nodes.len())
            .into_par_iter()
            .map(|k| {
                let a = nodes.at(k);
                f(&Point::from_coords(a[..d].iter().map(|&v| v as f64 * spacing).collect()))
            })
            .collect();
        let len = values.len();
        FieldGrid {
            spacing,
            node_lo: nodes.lo,
            node_ext: nodes.ext,
            values,
            exact: vec![true; len],
            floor: 0.0,
            min_on_set: f64::NAN,
        }
    }

    pub fn evaluated(&self) -> usize {
        self.exact.iter().filter(|&&e| e).count()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Cells of `μ₀` and its weighted half cells as lattice indices, when they
/// are aligned cubes of a single dyadic side.
fn lattice_cells(source: &PotentialSource) -> Option<(f64, Vec<Vec<i64>>, Vec<f64>, Vec<Vec<i64>>, Vec<f64>)> {
    let cells: Vec<_> = source.mu0.cells.iter().filter(|c| c.density > 0.0 && c.cell.volume() > 0.0).collect();
    let h = cells.first()?.cell.side(0);
    if h.log2().fract() != 0.0 {
        return None;
    }
    let index_of = |b: &AxisBox, side: f64| -> Option<Vec<i64>> {
        (0..b.dim())
            .map(|i| {
                let q = b.lo()[i] / side;
                (b.side(i) == side && q.fract() == 0.0).then_some(q as i64)
            })
            .collect()
    };
    let mu_idx: Vec<Vec<i64>> = cells.iter().map(|c| index_of(&c.cell, h)).collect::<Option<_>>()?;
    let mu_w: Vec<f64> = cells.iter().map(|c| c.density).collect();
    let nu: Vec<_> = source.weighted.cells.iter().filter(|c| c.density > 0.0).collect();
    let nu_idx: Vec<Vec<i64>> = nu.iter().map(|c| index_of(&c.cell, 0.5 * h)).collect::<Option<_>>()?;
    let nu_w: Vec<f64> = nu.iter().map(|c| c.density).collect();
    Some((h, mu_idx, mu_w, nu_idx, nu_w))
}

/// `Ũ` at the given nodes with translation-invariant tables.
struct LatticeField<'a> {
    source: &'a PotentialSource,
    nodes: IndexBox,
    spacing: f64,
    h: f64,
    mu: (Vec<Vec<i64>>, Vec<f64>),
    nu: (Vec<Vec<i64>>, Vec<f64>),
    radii: Vec<f64>,
}

impl LatticeField<'_> {
    fn eval(&self, ks: &[usize]) -> Result<Vec<f64>> {
        let s = self.spacing;
        let d = self.nodes.dim();
        let n = (d - 1) as i32;
        let src = self.source;
        let opts = QuadOptions { abs_tol: 1e-11, rel_tol: 1e-9, max_intervals: 4000 };
        let mut total = vec![0.0; ks.len()];
        for (cells, weights, side) in [(&self.mu.0, &self.mu.1, self.h), (&self.nu.0, &self.nu.1, 0.5 * self.h)] {
            let ratio = (side / s).round() as i64;
            let lo = vec![0.0; d];
            let hi = vec![side; d];
            let pot = Convolution::new(self.nodes.clone(), cells, ratio, |key| {
                let p: Vec<f64> = key.iter().map(|&v| v as f64 * s).collect();
                cell_regularized_potential(KernelKind::PSym, &lo, &hi, &p, src.tau0, &src.bump, &opts)
            })?;
            for (t, v) in total.iter_mut().zip(pot.apply_at(weights, ks)) {
                *t += v;
            }
            drop(pot);
            let cube = AxisBox::from_bounds(&lo, &hi)?;
            let mut best = vec![0.0f64; ks.len()];
            for &r in &self.radii {
                let conv = Convolution::new(self.nodes.clone(), cells, ratio, |key| {
                    let p: Vec<f64> = key.iter().map(|&v| v as f64 * s).collect();
                    Ok(ball_box_volume(&p, r, &cube, BALL_SEED).value)
                })?;
                let rn = r.powi(n);
                for (b, v) in best.iter_mut().zip(conv.apply_at(weights, ks)) {
                    *b = b.max(v / rn);
                }
            }
            for (t, b) in total.iter_mut().zip(best) {
                *t += b;
            }
        }
        Ok(total)
    }
}

/// Samples `Ũ` on a grid over `bbox(E)` enlarged by `margin · diam(E)`.
pub fn field_grid(source: &PotentialSource, set: &BoxUnionSet, params: &GridParams) -> Result<FieldGrid> {
    if set.is_empty() || source.support.is_empty() {
        return Err(Error::EmptySet);
    }
    if params.refine == 0 || !(params.margin >= 1.0) || !(params.floor_fraction > 0.0 && params.floor_fraction <= 1.0) {
        return Err(Error::InvalidInput("grid needs refine >= 1, margin >= 1 and floor fraction in (0, 1]".into()));
    }
    let lattice = lattice_cells(source);
    let h = match &lattice {
        Some((h, ..)) => *h,
        None => 2f64.powf(source.mu0.min_cell_width().log2().floor()),
    };
    let s = h / (1u64 << params.refine) as f64;
    let d = set.dim();
    let bbox = set.bbox().expect("nonempty set");
    let m = params.margin * set.diam();
    let lo: Vec<i64> = (0..d).map(|i| ((bbox.lo()[i] - m) / s).floor() as i64).collect();
    let hi: Vec<i64> = (0..d).map(|i| ((bbox.hi()[i] + m) / s).ceil() as i64).collect();
    let nodes = IndexBox::new(lo, &hi);
    let point = |k: usize| {
        let a = nodes.at(k);
        Point::from_coords(a[..d].iter().map(|&v| v as f64 * s).collect())
    };
    let dist: Vec<f64> = (0..nodes.len()).into_par_iter().map(|k| distance_to_set(&point(k), &source.support)).collect::<Result<_>>()?;
    let on_set: Vec<usize> = (0..nodes.len()).filter(|&k| set.contains(&point(k))).collect();
    if on_set.is_empty() {
        return Err(Error::InvalidInput("no grid node falls on E; refine the grid".into()));
    }
    let domain_diam = (0..d).map(|i| (nodes.ext[i] as f64 * s).powi(2)).sum::<f64>().sqrt();
    let evaluate = |ks: &[usize]| -> Result<Vec<f64>> {
        match &lattice {
            Some((h, mu_idx, mu_w, nu_idx, nu_w)) => LatticeField {
                source,
                nodes: nodes.clone(),
                spacing: s,
                h: *h,
                mu: (mu_idx.clone(), mu_w.clone()),
                nu: (nu_idx.clone(), nu_w.clone()),
                radii: dyadic_radii(source.min_radius, 2.0 * domain_diam),
            }
            .eval(ks),
            None => ks.par_iter().map(|&k| source.eval(&point(k)).map(|w| w.total())).collect(),
        }
    };
    let set_values = evaluate(&on_set)?;
    let min_on_set = set_values.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = params.floor_fraction * min_on_set;
    let mut values: Vec<f64> = dist.iter().map(|&r| source.far_bound(r)).collect();
    let mut exact = vec![false; nodes.len()];
    for (&k, v) in on_set.iter().zip(&set_values) {
        values[k] = *v;
        exact[k] = true;
    }
    let rest: Vec<usize> = (0..nodes.len()).filter(|&k| !exact[k] && values[k] > floor).collect();
    for (&k, v) in rest.iter().zip(evaluate(&rest)?) {
        values[k] = v;
        exact[k] = true;
    }
    Ok(FieldGrid { spacing: s, node_lo: nodes.lo, node_ext: nodes.ext, values, exact, floor, min_on_set })
}

/// Closed grid cells `[c s, (c+1) s]` on which the interpolated field exceeds `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub spacing: f64,
    pub cell_lo: Vec<i64>,
    pub cell_ext: Vec<usize>,
    pub inside: Vec<bool>,
    pub theta: f64,
    pub requested_theta: f64,
    pub shrinks: usize,
}

impl RegionMask {
    fn cells(&self) -> IndexBox {
        IndexBox { lo: self.cell_lo.clone(), ext: self.cell_ext.clone() }
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Whether `p` lies in the interior of the union of region cells,
    /// judged by every cell whose closure contains `p`.
    pub fn contains(&self, p: &Point) -> bool {
        let cells = self.cells();
        let d = cells.dim();
        let mut choices: Vec<Vec<i64>> = Vec::with_capacity(d);
        for i in 0..d {
            let q = p.coords()[i] / self.spacing;
            let f = q.floor() as i64;
            choices.push(if q == q.floor() { vec![f - 1, f] } else { vec![f] });
        }
        let mut idx = vec![0usize; d];
        loop {
            let c: Vec<i64> = (0..d).map(|i| choices[i][idx[i]]).collect();
            match cells.flat(&c) {
                Some(k) if self.inside[k] => {}
                _ => return false,
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return true;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < choices[axis].len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    /// Bounding box of the region cells.
    pub fn bbox(&self) -> Option<AxisBox> {
        let cells = self.cells();
        let d = cells.dim();
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for k in (0..cells.len()).filter(|&k| self.inside[k]) {
            let a = cells.at(k);
            for i in 0..d {
                lo[i] = lo[i].min(a[i]);
                hi[i] = hi[i].max(a[i] + 1);
            }
        }
        if lo[0] == i64::MAX {
            return None;
        }
        let lo: Vec<f64> = lo.iter().map(|&v| v as f64 * self.spacing).collect();
        let hi: Vec<f64> = hi.iter().map(|&v| v as f64 * self.spacing).collect();
        AxisBox::from_bounds(&lo, &hi).ok()
    }
}

fn mask_at(grid: &FieldGrid, theta: f64) -> Vec<bool> {
    let nodes = grid.nodes();
    let d = nodes.dim();
    let cells = IndexBox { lo: grid.node_lo.clone(), ext: grid.node_ext.iter().map(|e| e.saturating_sub(1)).collect() };
    (0..cells.len())
        .into_par_iter()
        .map(|k| {
            let a = cells.at(k);
            (0..1usize << d).all(|mask| {
                let corner: Vec<i64> = (0..d).map(|i| a[i] + (mask >> i & 1) as i64).collect();
                grid.values[nodes.flat(&corner).expect("corner inside grid")] > theta
            })
        })
        .collect()
}

/// Region where the bilinear interpolant exceeds `θ`, halving `θ` until
/// every sample lies inside.
pub fn superlevel_set(grid: &FieldGrid, theta: f64, samples: &[Point]) -> Result<RegionMask> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidInput(format!("threshold must be >= 0, got {theta}")));
    }
    if grid.node_ext.iter().any(|&e| e < 2) {
        return Err(Error::InvalidInput("grid needs at least two nodes per axis".into()));
    }
    let cell_ext: Vec<usize> = grid.node_ext.iter().map(|e| e - 1).collect();
    let mut t = theta;
    for shrinks in 0..=MAX_SHRINKS {
        if t < grid.floor {
            break;
        }
        let mask = RegionMask {
            spacing: grid.spacing,
            cell_lo: grid.node_lo.clone(),
            cell_ext: cell_ext.clone(),
            inside: mask_at(grid, t),
            theta: t,
            requested_theta: theta,
            shrinks,
        };
        if samples.iter().all(|p| mask.contains(p)) {
            return Ok(mask);
        }
        t *= 0.5;
    }
    Err(Error::NoDominance { theta: t })
}

/// Counts of region cells over integer boxes.
struct PrefixCount {
    cells: IndexBox,
    sums: Vec<u32>,
    ext1: Vec<usize>,
}

impl PrefixCount {
    fn new(mask: &RegionMask) -> Self {
        let cells = mask.cells();
        let d = cells.dim();
        let ext1: Vec<usize> = cells.ext.iter().map(|e| e + 1).collect();
        let total: usize = ext1.iter().product();
        let mut sums = vec![0u32; total];
        let big = IndexBox { lo: vec![0; d], ext: ext1.clone() };
        for k in 0..total {
            let a = big.at(k);
            if a[..d].contains(&0) {
                continue;
            }
            let cell: Vec<i64> = (0..d).map(|i| cells.lo[i] + a[i] - 1).collect();
            let mut v = mask.inside[cells.flat(&cell).unwrap()] as i64;
            // inclusion-exclusion over the lower neighbours
            for sub in 1..1usize << d {
                let mut b = a;
                for i in 0..d {
                    if sub >> i & 1 == 1 {
                        b[i] -= 1;
                    }
                }
                let sign = if sub.count_ones() % 2 == 1 { 1 } else { -1 };
                v += sign * sums[big.flat(&b[..d]).unwrap()] as i64;
            }
            sums[k] = v as u32;
        }
        PrefixCount { cells, sums, ext1 }
    }

    /// Region cells with index in `[lo, hi]`, clamped to the mask.
    fn count(&self, lo: &[i64], hi: &[i64]) -> u64 {
        let d = lo.len();
        let mut a = vec![0i64; d];
        let mut b = vec![0i64; d];
        for i in 0..d {
            a[i] = (lo[i] - self.cells.lo[i]).max(0);
            b[i] = (hi[i] - self.cells.lo[i] + 1).min(self.cells.ext[i] as i64);
            if b[i] <= a[i] {
                return 0;
            }
        }
        let big = IndexBox { lo: vec![0; d], ext: self.ext1.clone() };
        let mut total = 0i64;
        for sub in 0..1usize << d {
            let corner: Vec<i64> = (0..d).map(|i| if sub >> i & 1 == 1 { a[i] } else { b[i] }).collect();
            let sign = if sub.count_ones() % 2 == 1 { -1 } else { 1 };
            total += sign * self.sums[big.flat(&corner).unwrap()] as i64;
        }
        total as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyDecomposition {
    pub cubes: Vec<DyadicCube>,
    /// 40 when every `40Q` meets the complement, otherwise 41.
    pub a_constant: i64,
    pub finest_generation: i32,
    /// Cubes left unsplit at their last generation whose `20Q` is not inside.
    pub unresolved: usize,
    pub unresolved_volume: f64,
    /// Cubes whose `40Q` also meets the complement.
    pub meets_at_40: usize,
    /// Largest side ratio between touching cubes.
    pub max_neighbor_ratio: f64,
}

/// Integer geometry of the mask in units of half the finest cube side.
struct Units {
    finest: i32,
    cell_gen: i32,
}

impl Units {
    fn cube_len(&self, g: i32) -> i64 {
        1i64 << (self.finest + 1 - g)
    }

    fn cell_len(&self) -> i64 {
        1i64 << (self.finest + 1 - self.cell_gen)
    }

    /// Cells meeting the closed cube `A Q` along each axis.
    fn closed_range(&self, cube: &DyadicCube, a: i64) -> (Vec<i64>, Vec<i64>) {
        let l = self.cube_len(cube.generation);
        let s = self.cell_len();
        let half = l / 2;
        let lo = cube.index.iter().map(|&q| (half * (2 * q + 1 - a)).div_euclid(s) - if (half * (2 * q + 1 - a)).rem_euclid(s) == 0 { 1 } else { 0 }).collect();
        let hi = cube.index.iter().map(|&q| (half * (2 * q + 1 + a)).div_euclid(s)).collect();
        (lo, hi)
    }

    /// Cells meeting the open cube `Q`.
    fn open_range(&self, cube: &DyadicCube) -> (Vec<i64>, Vec<i64>) {
        let l = self.cube_len(cube.generation);
        let s = self.cell_len();
        let lo = cube.index.iter().map(|&q| (q * l).div_euclid(s)).collect();
        let hi = cube.index.iter().map(|&q| -(-((q + 1) * l)).div_euclid(s) - 1).collect();
        (lo, hi)
    }
}

fn range_size(lo: &[i64], hi: &[i64]) -> u64 {
    lo.iter().zip(hi).map(|(a, b)| (b - a + 1).max(0) as u64).product()
}

fn touches_edge(mask: &RegionMask) -> bool {
    let cells = mask.cells();
    let d = cells.dim();
    (0..cells.len()).any(|k| {
        mask.inside[k] && {
            let a = cells.at(k);
            (0..d).any(|i| a[i] == cells.lo[i] || a[i] == cells.lo[i] + cells.ext[i] as i64 - 1)
        }
    })
}

enum Verdict {
    Accept,
    Split,
    Drop,
    Unresolved,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeParams {
    /// Generations below the mask cells reached everywhere.
    pub extra_generations: i32,
    /// Generations below the mask cells reached near the focus set.
    pub focus_generations: i32,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams { extra_generations: 2, focus_generations: 8 }
    }
}

/// Maximal dyadic cubes with `20Q` inside the region, down to a quarter of
/// the mask cell side.
pub fn whitney_decompose(mask: &RegionMask) -> Result<WhitneyDecomposition> {
    whitney_decompose_with(mask, &DecomposeParams::default(), None)
}

/// As [`whitney_decompose`], refining further where `(5/4)Q` meets `focus`.
pub fn whitney_decompose_with(
    mask: &RegionMask,
    params: &DecomposeParams,
    focus: Option<&BoxUnionSet>,
) -> Result<WhitneyDecomposition> {
    if params.extra_generations < 0 || params.focus_generations < params.extra_generations || params.focus_generations > 20 {
        return Err(Error::InvalidInput("need 0 <= extra_generations <= focus_generations <= 20".into()));
    }
    let cell_gen = -mask.spacing.log2();
    if cell_gen.fract() != 0.0 {
        return Err(Error::InvalidInput(format!("mask spacing {} is not a power of two", mask.spacing)));
    }
    if mask.is_empty() {
        return Err(Error::InvalidInput("region is empty".into()));
    }
    if touches_edge(mask) {
        return Err(Error::UnboundedRegion);
    }
    let d = mask.cell_lo.len();
    let cell_gen = cell_gen as i32;
    let base = cell_gen + params.extra_generations;
    let finest = if focus.is_some() { cell_gen + params.focus_generations } else { base };
    let units = Units { finest, cell_gen };
    let counts = PrefixCount::new(mask);
    let extent = mask.cell_ext.iter().copied().max().unwrap() as f64 * mask.spacing;
    let top = -(extent.log2().ceil() as i32) - 1;
    let lattice = DyadicLattice::standard(d - 1);
    let bbox = mask.bbox().expect("nonempty region");
    let mut level: Vec<DyadicCube> = {
        let side = lattice.side(top);
        let ranges: Vec<(i64, i64)> =
            (0..d).map(|i| ((bbox.lo()[i] / side).floor() as i64, (bbox.hi()[i] / side).ceil() as i64 - 1)).collect();
        let mut out = Vec::new();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            out.push(lattice.cube(top, idx.clone()));
            for axis in (0..d).rev() {
                idx[axis] += 1;
                if idx[axis] <= ranges[axis].1 {
                    continue 'outer;
                }
                idx[axis] = ranges[axis].0;
            }
            break;
        }
        out
    };
    let mut cubes = Vec::new();
    let mut unresolved = 0usize;
    let mut unresolved_volume = 0.0;
    while !level.is_empty() {
        let verdicts: Vec<Verdict> = level
            .par_iter()
            .map(|q| {
                let (lo, hi) = units.open_range(q);
                if counts.count(&lo, &hi) == 0 {
                    return Verdict::Drop;
                }
                let (lo, hi) = units.closed_range(q, 20);
                if counts.count(&lo, &hi) == range_size(&lo, &hi) {
                    Verdict::Accept
                } else if q.generation < base
                    || (q.generation < units.finest && focus.is_some_and(|e| boxes_meet(&q.to_box().dilate(1.25), e)))
                {
                    Verdict::Split
                } else {
                    Verdict::Unresolved
                }
            })
            .collect();
        let mut next = Vec::new();
        for (q, v) in level.into_iter().zip(verdicts) {
            match v {
                Verdict::Accept => cubes.push(q),
                Verdict::Split => next.extend(q.children()),
                Verdict::Drop => {}
                Verdict::Unresolved => {
                    unresolved += 1;
                    unresolved_volume += q.side().powi(d as i32);
                }
            }
        }
        next.sort_by(|a, b| a.index.cmp(&b.index));
        level = next;
    }
    if cubes.iter().any(|c| c.generation == top) {
        return Err(Error::UnboundedRegion);
    }
    let meets = |q: &DyadicCube, a: i64| {
        let (lo, hi) = units.closed_range(q, a);
        counts.count(&lo, &hi) < range_size(&lo, &hi)
    };
    if let Some(q) = cubes.iter().find(|q| !meets(q, WHITNEY_A)) {
        return Err(Error::InvalidInput(format!("cube {:?} at generation {} has 41Q inside the region", q.index, q.generation)));
    }
    let meets_at_40 = cubes.iter().filter(|q| meets(q, WHITNEY_A_TARGET)).count();
    let max_neighbor_ratio = neighbor_ratio(&cubes, top);
    Ok(WhitneyDecomposition {
        a_constant: if meets_at_40 == cubes.len() { WHITNEY_A_TARGET } else { WHITNEY_A },
        cubes,
        finest_generation: units.finest,
        unresolved,
        unresolved_volume,
        meets_at_40,
        max_neighbor_ratio,
    })
}

/// Largest side ratio over touching pairs, found by probing just outside
/// every face, edge and corner of each cube for larger cubes.
fn neighbor_ratio(cubes: &[DyadicCube], top: i32) -> f64 {
    let present: HashSet<(i32, Vec<i64>)> = cubes.iter().map(|c| (c.generation, c.index.clone())).collect();
    let d = cubes.first().map_or(0, |c| c.index.len());
    let dirs = 3usize.pow(d as u32);
    cubes
        .par_iter()
        .map(|q| {
            let mut worst: f64 = 1.0;
            for code in 0..dirs {
                let mut c = code;
                let mut off = vec![0i64; d];
                for o in off.iter_mut() {
                    *o = (c % 3) as i64 - 1;
                    c /= 3;
                }
                if off.iter().all(|&o| o == 0) {
                    continue;
                }
                // the neighbouring cube of q's own size, then its ancestors
                let mut idx: Vec<i64> = q.index.iter().zip(&off).map(|(a, o)| a + o).collect();
                let mut g = q.generation;
                while g >= top {
                    if present.contains(&(g, idx.clone())) {
                        worst = worst.max(2f64.powi(q.generation - g));
                        break;
                    }
                    idx = idx.iter().map(|k| k.div_euclid(2)).collect();
                    g -= 1;
                }
            }
            worst
        })
        .reduce(|| 1.0, f64::max)
}

/// Deterministic lattice points of `E` at `spacing` plus `random` seeded points.
pub fn set_samples(set: &BoxUnionSet, spacing: f64, random: usize, seed: u64) -> Vec<Point> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for b in &set.normalized().boxes {
        let d = b.dim();
        let lo: Vec<i64> = (0..d).map(|i| (b.lo()[i] / spacing).ceil() as i64).collect();
        let hi: Vec<i64> = (0..d).map(|i| (b.hi()[i] / spacing).floor() as i64).collect();
        let nodes = IndexBox::new(lo, &hi);
        for k in 0..nodes.len() {
            let a = nodes.at(k);
            if seen.insert(a[..d].to_vec()) {
                out.push(Point::from_coords(a[..d].iter().map(|&v| v as f64 * spacing).collect()));
            }
        }
        for p in b.corners() {
            out.push(p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.extend((0..random).map(|_| set.sample(&mut rng)));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverStats {
    pub count: usize,
    /// Largest number of the cubes `5𝒬_i` containing a sampled point.
    pub overlap_5: usize,
    pub overlap_points: usize,
    /// `max diam(𝒬_i) / diam(E)`.
    pub max_diam_ratio: f64,
    /// Every `(5/8)𝒬_i` meets `E`.
    pub p1: bool,
    /// `diam(𝒬_i) <= diam(E)/10` for all `i`; only evaluated under the hypothesis flag.
    pub p4: Option<bool>,
    pub samples: usize,
    /// Every sample of `E` lies in some `𝒬_i`, and every `𝒬_i` lies in twice the region's bounding box.
    pub containment: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCover {
    /// `𝒬_i = 2Q_{j_i}`
    pub cubes: Vec<AxisBox>,
    /// `Q_{j_i}`
    pub halves: Vec<DyadicCube>,
    pub theta: f64,
    pub stats: CoverStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    pub random_samples: usize,
    pub overlap_points: usize,
    pub seed: u64,
    pub p4_hypothesis: bool,
}

impl Default for SelectParams {
    fn default() -> Self {
        SelectParams { random_samples: 10_000, overlap_points: 10_000, seed: 0, p4_hypothesis: false }
    }
}

fn boxes_meet(a: &AxisBox, set: &BoxUnionSet) -> bool {
    set.boxes.iter().any(|b| a.intersects(b))
}

/// Largest number of `boxes` containing any of `points`.
pub fn max_multiplicity(boxes: &[AxisBox], points: &[Point]) -> usize {
    points.par_iter().map(|p| boxes.iter().filter(|b| b.contains(p)).count()).max().unwrap_or(0)
}

/// Cubes with `(5/4)Q ∩ E ≠ ∅`, then a greedy subcover of the samples of `E`
/// (largest cubes first, then lexicographic).
pub fn select_cover(
    decomposition: &WhitneyDecomposition,
    mask: &RegionMask,
    set: &BoxUnionSet,
    params: &SelectParams,
) -> Result<WhitneyCover> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut candidates: Vec<&DyadicCube> =
        decomposition.cubes.iter().filter(|q| boxes_meet(&q.to_box().dilate(1.25), set)).collect();
    candidates.sort_by(|a, b| a.generation.cmp(&b.generation).then_with(|| a.index.cmp(&b.index)));
    let samples = set_samples(set, 0.5 * mask.spacing, params.random_samples, params.seed);
    let mut covered = vec![false; samples.len()];
    let mut halves = Vec::new();
    for q in candidates {
        let b = q.to_box();
        let hits: Vec<usize> = (0..samples.len()).filter(|&k| !covered[k] && b.contains(&samples[k])).collect();
        if !hits.is_empty() {
            for k in hits {
                covered[k] = true;
            }
            halves.push(q.clone());
        }
    }
    let uncovered = covered.iter().filter(|&&c| !c).count();
    if uncovered > 0 {
        return Err(Error::NotCovered { uncovered });
    }
    let cubes: Vec<AxisBox> = halves.iter().map(|q| q.to_box().dilate(2.0)).collect();
    let diam = set.diam();
    let max_diam_ratio = cubes.iter().map(|c| c.diam() / diam).fold(0.0, f64::max);
    let p1 = cubes.iter().all(|c| boxes_meet(&c.dilate(0.625), set));
    let five: Vec<AxisBox> = cubes.iter().map(|c| c.dilate(5.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x00be_51a9);
    let hull = five.iter().skip(1).fold(five[0].clone(), |acc, b| hull_of(&acc, b));
    let mut points: Vec<Point> = (0..params.overlap_points).map(|_| hull.sample(&mut rng)).collect();
    points.extend(cubes.iter().map(AxisBox::center));
    let overlap_5 = max_multiplicity(&five, &points);
    let doubled = mask.bbox().map(|b| b.dilate(2.0));
    let containment = doubled.is_some_and(|r| cubes.iter().all(|c| r.contains_box(c)))
        && samples.iter().all(|p| cubes.iter().any(|c| c.contains(p)));
    let p4 = params.p4_hypothesis.then_some(max_diam_ratio <= 0.1);
    let stats = CoverStats {
        count: cubes.len(),
        overlap_5,
        overlap_points: points.len(),
        max_diam_ratio,
        p1,
        p4,
        samples: samples.len(),
        containment,
    };
    Ok(WhitneyCover { cubes, halves, theta: mask.theta, stats })
}

fn hull_of(a: &AxisBox, b: &AxisBox) -> AxisBox {
    let lo: Vec<f64> = a.lo().iter().zip(b.lo()).map(|(x, y)| x.min(*y)).collect();
    let hi: Vec<f64> = a.hi().iter().zip(b.hi()).map(|(x, y)| x.max(*y)).collect();
    AxisBox::from_bounds(&lo, &hi).expect("hull")
}

/// Largest multiplicity of `{k Q_j}` over seeded points in the hull of the
/// region, using a per-generation hash of the cubes.
pub fn dilated_overlap(decomposition: &WhitneyDecomposition, k: f64, points: usize, seed: u64) -> usize {
    let cubes = &decomposition.cubes;
    if cubes.is_empty() {
        return 0;
    }
    let d = cubes[0].index.len();
    let mut by_gen: HashMap<i32, HashSet<Vec<i64>>> = HashMap::new();
    for c in cubes {
        by_gen.entry(c.generation).or_default().insert(c.index.clone());
    }
    let mut gens: Vec<i32> = by_gen.keys().copied().collect();
    gens.sort();
    let hull = cubes.iter().skip(1).fold(cubes[0].to_box(), |acc, c| hull_of(&acc, &c.to_box())).dilate(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<Point> = (0..points).map(|_| hull.sample(&mut rng)).collect();
    samples.extend(cubes.iter().map(DyadicCube::center));
    let reach = ((k - 1.0) / 2.0).ceil() as i64 + 1;
    samples
        .par_iter()
        .map(|p| {
            let mut count = 0;
            for g in &gens {
                let side = 2f64.powi(-g);
                let base: Vec<i64> = p.coords().iter().map(|x| (x / side).floor() as i64).collect();
                let span = (2 * reach + 1) as usize;
                for code in 0..span.pow(d as u32) {
                    let mut c = code;
                    let idx: Vec<i64> = base
                        .iter()
                        .map(|b| {
                            let o = (c % span) as i64 - reach;
                            c /= span;
                            b + o
                        })
                        .collect();
                    if by_gen[g].contains(&idx) {
                        let cube = DyadicLattice::standard(d - 1).cube(*g, idx).to_box().dilate(k);
                        if cube.contains(p) {
                            count += 1;
                        }
                    }
                }
            }
            count
        })
        .max()
        .unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    pub grid: GridParams,
    /// `None` picks half the minimum of `Ũ` over the nodes of `E`.
    pub theta: Option<f64>,
    pub decompose: DecomposeParams,
    pub select: SelectParams,
}

/// Field, region, decomposition and cover in one pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverRun {
    pub cover: WhitneyCover,
    pub grid_spacing: f64,
    pub grid_margin: f64,
    pub grid_nodes: usize,
    pub evaluated_nodes: usize,
    pub min_on_set: f64,
    pub region_cells: usize,
    pub whitney_cubes: usize,
    pub unresolved: usize,
    pub meets_at_40: usize,
    pub max_neighbor_ratio: f64,
    pub theta_shrinks: usize,
}

pub fn build_cover(set: &BoxUnionSet, source: &PotentialSource, params: &CoverParams) -> Result<CoverRun> {
    let mut grid_params = params.grid;
    let (grid, mask, dec) = loop {
        let grid = field_grid(source, set, &grid_params)?;
        let theta = params.theta.unwrap_or(0.5 * grid.min_on_set);
        let samples = set_samples(set, grid.spacing, 0, params.select.seed);
        let mask = superlevel_set(&grid, theta, &samples)?;
        match whitney_decompose_with(&mask, &params.decompose, Some(set)) {
            Err(Error::UnboundedRegion) if grid_params.margin < MAX_MARGIN => grid_params.margin *= 2.0,
            other => break (grid, mask, other?),
        }
    };
    let cover = select_cover(&dec, &mask, set, &params.select)?;
    Ok(CoverRun {
        grid_spacing: grid.spacing,
        grid_margin: grid_params.margin,
        grid_nodes: grid.len(),
        evaluated_nodes: grid.evaluated(),
        min_on_set: grid.min_on_set,
        region_cells: mask.count(),
        whitney_cubes: dec.cubes.len(),
        unresolved: dec.unresolved,
        meets_at_40: dec.meets_at_40,
        max_neighbor_ratio: dec.max_neighbor_ratio,
        theta_shrinks: mask.shrinks,
        cover,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacitySum {
    pub parts: Vec<f64>,
    pub sum: f64,
    pub whole: f64,
    pub ratio: f64,
}

/// `Σ lower(2𝒬_i ∩ E) / lower(E)`.
pub fn capacity_sum_probe(cover: &WhitneyCover, set: &BoxUnionSet, params: &LpParams) -> Result<CapacitySum> {
    let whole = lower_bound_lp(set, params)?.value;
    let parts = cover
        .cubes
        .iter()
        .map(|c| {
            let piece = set.intersect_box(&c.dilate(2.0)).normalized();
            if piece.is_empty() {
                Ok(0.0)
            } else {
                lower_bound_lp(&piece, params).map(|l| l.value)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = parts.iter().sum();
    let ratio = if whole > 0.0 { sum / whole } else { f64::NAN };
    Ok(CapacitySum { parts, sum, whole, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_field() -> FieldGrid {
        // 1 / (1 + |p|²) on [-4, 4]² with spacing 1/8
        FieldGrid::from_fn(vec![-32, -32], &[32, 32], 0.125, |p| 1.0 / (1.0 + p.norm().powi(2)))
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let g = bump_field();
        let m = superlevel_set(&g, 0.0, &[]).unwrap();
        assert_eq!(m.count(), 64 * 64);
        assert_eq!(m.bbox().unwrap(), AxisBox::rect(-4.0, 4.0, -4.0, 4.0));
    }

    #[test]
    fn high_threshold_shrinks() {
        let g = bump_field();
        let m = superlevel_set(&g, 4.0, &[Point::xt(0.0, 0.0)]).unwrap();
        assert_eq!(m.shrinks, 3);
        assert_eq!(m.theta, 0.5);
        assert!(m.contains(&Point::xt(0.0, 0.0)));
        let mut floored = g.clone();
        floored.floor = 0.02;
        let far = Point::xt(3.9, 3.9);
        assert!(matches!(superlevel_set(&floored, 1.0, &[far]), Err(Error::NoDominance { .. })));
    }

    #[test]
    fn mask_is_the_corner_test() {
        let g = bump_field();
        let m = superlevel_set(&g, 0.5, &[]).unwrap();
        // the interpolant exceeds 1/2 on cells whose four corners lie inside the open unit disk
        let want = (-32..32)
            .flat_map(|i| (-32..32).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                [(0, 0), (1, 0), (0, 1), (1, 1)].iter().all(|(a, b)| {
                    let (x, y) = ((i + a) as f64 / 8.0, (j + b) as f64 / 8.0);
                    x * x + y * y < 1.0
                })
            })
            .count();
        assert_eq!(m.count(), want);
    }

    #[test]
    fn edge_region_is_unbounded() {
        let g = bump_field();
        let m = superlevel_set(&g, 0.0, &[]).unwrap();
        assert!(matches!(whitney_decompose(&m), Err(Error::UnboundedRegion)));
    }

    #[test]
    fn integer_ranges() {
        let units = Units { finest: 5, cell_gen: 3 };
        let q = DyadicLattice::standard(1).cube(4, vec![3, -1]);
        // Q = [3/16, 4/16] x [-1/16, 0], cells of side 1/8
        assert_eq!(units.open_range(&q), (vec![1, -1], vec![1, -1]));
        // 3Q = [2/16, 5/16] x [-2/16, 1/16] touches cells 0..=2 and -2..=0
        assert_eq!(units.closed_range(&q, 3), (vec![0, -2], vec![2, 0]));
    }

    #[test]
    fn prefix_counts_match_direct() {
        let g = bump_field();
        let m = superlevel_set(&g, 0.3, &[]).unwrap();
        let counts = PrefixCount::new(&m);
        for (lo, hi) in [([-40, -40], [40, 40]), ([-3, 2], [5, 9]), ([0, 0], [0, 0]), ([-10, -2], [-1, 30])] {
            let mut want = 0;
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    if let Some(k) = m.cells().flat(&[i, j]) {
                        want += m.inside[k] as u64;
                    }
                }
            }
            assert_eq!(counts.count(&lo, &hi), want);
        }
    }
}
