//! Piecewise-constant measures on boxes, their kernel potentials, truncated
//! and regularized potentials, ball measures and the dyadic maximal function.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AxisBox, BoxUnionSet, Point};
use crate::kernels::{kernel_value, BumpProfile, KernelKind};
use crate::quadrature::{integrate, integrate_box, QuadOptions};
use crate::rect2d::unit_potential;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(rename = "box")]
    pub cell: AxisBox,
    pub density: f64,
}

/// Nonnegative density, constant on each of finitely many interior-disjoint boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMeasure {
    pub cells: Vec<Cell>,
}

impl CellMeasure {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        let m = CellMeasure { cells };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = match self.cells.first() {
            Some(c) => c.cell.dim(),
            None => return Ok(()),
        };
        for c in &self.cells {
            if c.cell.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.cell.dim() });
            }
            if !(c.density >= 0.0 && c.density.is_finite()) {
                return Err(Error::InvalidInput(format!("density must be finite and nonnegative, got {}", c.density)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: CellMeasure =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("measure JSON: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    /// Density `density` on every box of `set`.
    pub fn uniform(set: &BoxUnionSet, density: f64) -> Self {
        CellMeasure { cells: set.boxes.iter().map(|b| Cell { cell: b.clone(), density }).collect() }
    }

    pub fn lebesgue(set: &BoxUnionSet) -> Self {
        Self::uniform(set, 1.0)
    }

    pub fn zero(set: &BoxUnionSet) -> Self {
        Self::uniform(set, 0.0)
    }

    pub fn dim(&self) -> Option<usize> {
        self.cells.first().map(|c| c.cell.dim())
    }

    pub fn mass(&self) -> f64 {
        self.cells.iter().map(|c| c.density * c.cell.volume()).sum()
    }

    pub fn max_density(&self) -> f64 {
        self.cells.iter().map(|c| c.density).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> CellMeasure {
        CellMeasure {
            cells: self.cells.iter().map(|c| Cell { cell: c.cell.clone(), density: c.density * factor }).collect(),
        }
    }

    pub fn plus(&self, other: &CellMeasure) -> CellMeasure {
        let mut cells = self.cells.clone();
        cells.extend(other.cells.iter().cloned());
        CellMeasure { cells }
    }

    /// Boxes carrying positive density.
    pub fn support(&self) -> BoxUnionSet {
        let n = self.dim().map_or(1, |d| d - 1);
        BoxUnionSet {
            n,
            boxes: self.cells.iter().filter(|c| c.density > 0.0 && c.cell.volume() > 0.0).map(|c| c.cell.clone()).collect(),
        }
    }

    pub fn min_cell_width(&self) -> f64 {
        self.cells.iter().map(|c| c.cell.min_side()).filter(|&s| s > 0.0).fold(f64::INFINITY, f64::min)
    }
}

/// `∫_cell K(p - y) dy` in the plane from the rectangle closed form.
pub fn cell_potential_2d(kind: KernelKind, lo: &[f64], hi: &[f64], p: &[f64]) -> f64 {
    let lt = hi[1] - lo[1];
    let lx = hi[0] - lo[0];
    if lt <= 0.0 || lx <= 0.0 {
        return 0.0;
    }
    let r = lx / lt;
    let x = (p[0] - lo[0]) / lt;
    let up = || lt * unit_potential(r, x, (p[1] - lo[1]) / lt);
    // P*(p - y) = P(p_x - y_x, (-p_t) - (-y_t)): reflect time.
    let down = || lt * unit_potential(r, x, (hi[1] - p[1]) / lt);
    match kind {
        KernelKind::P => up(),
        KernelKind::PConj => down(),
        KernelKind::PSym => 0.5 * (up() + down()),
    }
}

fn kernel_breaks(lo: &[f64], hi: &[f64], p: &[f64], radius: Option<f64>) -> Vec<Vec<f64>> {
    (0..lo.len())
        .map(|i| {
            let mut b = vec![p[i]];
            if let Some(rad) = radius {
                b.push(p[i] - rad);
                b.push(p[i] + rad);
            }
            b.retain(|&v| v > lo[i] && v < hi[i]);
            b
        })
        .collect()
}

/// `∫_cell K(p - y) dy` by nested adaptive quadrature, the cell split at `p`.
pub fn cell_potential_quadrature(kind: KernelKind, lo: &[f64], hi: &[f64], p: &[f64], opts: &QuadOptions) -> Result<f64> {
    let f = |y: &[f64]| {
        let mut z = [0.0; crate::quadrature::MAX_DIM];
        for i in 0..y.len() {
            z[i] = p[i] - y[i];
        }
        let v = kernel_value(kind, &z[..y.len()]);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    Ok(integrate_box(&f, lo, hi, &kernel_breaks(lo, hi, p, None), opts)?.value)
}

fn cell_potential(kind: KernelKind, cell: &AxisBox, p: &[f64], opts: &QuadOptions) -> Result<f64> {
    if cell.volume() == 0.0 {
        return Ok(0.0);
    }
    if cell.dim() == 2 {
        Ok(cell_potential_2d(kind, cell.lo(), cell.hi(), p))
    } else {
        cell_potential_quadrature(kind, cell.lo(), cell.hi(), p, opts)
    }
}

fn cell_options(tol: f64, cells: usize) -> QuadOptions {
    QuadOptions { abs_tol: tol / cells.max(1) as f64, rel_tol: 1e-10, max_intervals: 4000 }
}

/// `∫ K(p - y) dμ(y)`.
pub fn potential(kind: KernelKind, mu: &CellMeasure, p: &Point, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let opts = cell_options(tol, mu.cells.len());
    let mut total = 0.0;
    for c in mu.cells.iter().filter(|c| c.density > 0.0) {
        total += c.density * cell_potential(kind, &c.cell, p.coords(), &opts)?;
    }
    Ok(total)
}

/// Interval of `ρ >= 0` with `p - ρ u` inside the box.
fn ray_interval(lo: &[f64], hi: &[f64], p: &[f64], u: &[f64]) -> Option<(f64, f64)> {
    let mut a: f64 = 0.0;
    let mut b = f64::INFINITY;
    for i in 0..lo.len() {
        if u[i] == 0.0 {
            if p[i] < lo[i] || p[i] > hi[i] {
                return None;
            }
            continue;
        }
        let r1 = (p[i] - lo[i]) / u[i];
        let r2 = (p[i] - hi[i]) / u[i];
        a = a.max(r1.min(r2));
        b = b.min(r1.max(r2));
    }
    (a < b).then_some((a, b))
}

/// Polar form of `∫_cell K(p - y) w(|p - y|) dy` in the plane, where
/// `radial(ρ) = ∫_0^ρ w`. The kernel's `1/ρ` cancels the Jacobian, leaving a
/// one-dimensional angular integral.
fn polar_part_2d<W: Fn(f64) -> f64>(
    kind: KernelKind,
    lo: &[f64],
    hi: &[f64],
    p: &[f64],
    radial: W,
    opts: &QuadOptions,
) -> Result<f64> {
    let mut breaks = vec![-PI / 2.0, 0.0, PI / 2.0];
    for &x in &[lo[0], hi[0]] {
        for &t in &[lo[1], hi[1]] {
            let (zx, zt) = (p[0] - x, p[1] - t);
            if zx != 0.0 || zt != 0.0 {
                breaks.push(zt.atan2(zx));
            }
        }
    }
    let f = |theta: f64| {
        let u = [theta.cos(), theta.sin()];
        let w = kind.angular(u[1]);
        if w == 0.0 {
            return 0.0;
        }
        match ray_interval(lo, hi, p, &u) {
            Some((a, b)) => w * (radial(b) - radial(a)),
            None => 0.0,
        }
    };
    Ok(integrate(f, -PI, PI, &breaks, opts)?.value)
}

/// `∫_{cell, |p-y| > ε} K(p - y) dy`.
pub fn cell_truncated_potential(kind: KernelKind, cell: &AxisBox, p: &[f64], eps: f64, opts: &QuadOptions) -> Result<f64> {
    if cell.volume() == 0.0 {
        return Ok(0.0);
    }
    let full = cell_potential(kind, cell, p, opts)?;
    if cell.distance2_coords(p) >= eps * eps {
        return Ok(full);
    }
    if cell.dim() == 2 {
        let near = polar_part_2d(kind, cell.lo(), cell.hi(), p, |rho| rho.min(eps), opts)?;
        return Ok((full - near).max(0.0));
    }
    let f = |y: &[f64]| {
        let mut z = [0.0; crate::quadrature::MAX_DIM];
        for i in 0..y.len() {
            z[i] = p[i] - y[i];
        }
        let z = &z[..y.len()];
        if crate::geometry::norm(z) <= eps {
            0.0
        } else {
            kernel_value(kind, z)
        }
    };
    Ok(integrate_box(&f, cell.lo(), cell.hi(), &kernel_breaks(cell.lo(), cell.hi(), p, Some(eps)), opts)?.value)
}

/// `∫ K(p - y) 1{|p - y| > ε} dμ(y)`.
pub fn truncated_potential(kind: KernelKind, mu: &CellMeasure, p: &Point, eps: f64, tol: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {eps}")));
    }
    let opts = cell_options(tol, mu.cells.len());
    let mut total = 0.0;
    for c in mu.cells.iter().filter(|c| c.density > 0.0) {
        total += c.density * cell_truncated_potential(kind, &c.cell, p.coords(), eps, &opts)?;
    }
    Ok(total)
}

/// `∫_cell K(p - y) ψ(|p - y|/τ) dy`.
pub fn cell_regularized_potential(
    kind: KernelKind,
    lo: &[f64],
    hi: &[f64],
    p: &[f64],
    tau: f64,
    bump: &BumpProfile,
    opts: &QuadOptions,
) -> Result<f64> {
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    if vol == 0.0 {
        return Ok(0.0);
    }
    let reach = tau * bump.outer_radius;
    let d2: f64 = (0..lo.len())
        .map(|i| {
            let d = (lo[i] - p[i]).max(p[i] - hi[i]).max(0.0);
            d * d
        })
        .sum();
    if lo.len() == 2 {
        let full = cell_potential_2d(kind, lo, hi, p);
        if d2 >= reach * reach {
            return Ok(full);
        }
        let near = polar_part_2d(kind, lo, hi, p, |rho| tau * bump.complement_integral(rho / tau), opts)?;
        return Ok((full - near).max(0.0));
    }
    if d2 >= reach * reach {
        return cell_potential_quadrature(kind, lo, hi, p, opts);
    }
    let f = |y: &[f64]| {
        let mut z = [0.0; crate::quadrature::MAX_DIM];
        for i in 0..y.len() {
            z[i] = p[i] - y[i];
        }
        crate::kernels::regularized_value(kind, &z[..y.len()], tau, bump)
    };
    let mut breaks = kernel_breaks(lo, hi, p, Some(reach));
    for (i, b) in breaks.iter_mut().enumerate() {
        for v in [p[i] - tau * bump.inner_radius, p[i] + tau * bump.inner_radius] {
            if v > lo[i] && v < hi[i] {
                b.push(v);
            }
        }
    }
    Ok(integrate_box(&f, lo, hi, &breaks, opts)?.value)
}

/// `∫ K(p - y) ψ(|p - y|/τ) dμ(y)`.
pub fn regularized_potential(
    kind: KernelKind,
    mu: &CellMeasure,
    p: &Point,
    tau: f64,
    bump: &BumpProfile,
    tol: f64,
) -> Result<f64> {
    let opts = cell_options(tol, mu.cells.len());
    let mut total = 0.0;
    for c in mu.cells.iter().filter(|c| c.density > 0.0) {
        total += c.density * cell_regularized_potential(kind, c.cell.lo(), c.cell.hi(), p.coords(), tau, bump, &opts)?;
    }
    Ok(total)
}

/// Exact area of the disk of radius `radius` centred at `(cx, cy)` inside
/// `[x0, x1] x [y0, y1]`, integrating chord lengths piece by piece.
pub fn disk_rect_area(cx: f64, cy: f64, radius: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if radius <= 0.0 || x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let (x0, x1, y0, y1) = (x0 - cx, x1 - cx, y0 - cy, y1 - cy);
    let r = radius;
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b || y0 >= r || y1 <= -r {
        return 0.0;
    }
    let r2 = r * r;
    let half_chord = |x: f64| (r2 - x * x).max(0.0).sqrt();
    // ∫ sqrt(r² - x²) dx
    let s = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * half_chord(x) + r2 * (x / r).asin())
    };
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let c = (r2 - y * y).sqrt();
            cuts.push(-c);
            cuts.push(c);
        }
    }
    cuts.retain(|&x| x >= a && x <= b);
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let c = half_chord(0.5 * (u + v));
        // ties happen at tangency, where the arc is the right boundary
        let top_is_circle = c <= y1;
        let bottom_is_circle = -c >= y0;
        let top = if top_is_circle { c } else { y1 };
        let bottom = if bottom_is_circle { -c } else { y0 };
        if top <= bottom {
            continue;
        }
        let arc = s(v) - s(u);
        let width = v - u;
        area += match (top_is_circle, bottom_is_circle) {
            (true, true) => 2.0 * arc,
            (true, false) => arc - y0 * width,
            (false, true) => y1 * width + arc,
            (false, false) => (y1 - y0) * width,
        };
    }
    area.max(0.0)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// Surface measure of the unit sphere `S^{d-1}` in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Measure of a box inside a ball with an error estimate; exact in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMeasure {
    pub value: f64,
    pub error: f64,
}

const HALTON_PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * inv;
        i /= b;
        inv /= base as f64;
    }
    out
}

/// Volume of `B(c, r) ∩ box`. Higher dimensions use a randomly shifted
/// Halton rule with `shifts` independent rotations; the spread of the
/// rotations gives the reported error.
pub fn ball_box_volume(c: &[f64], r: f64, b: &AxisBox, seed: u64) -> BallMeasure {
    let vol = b.volume();
    if vol == 0.0 || r <= 0.0 || b.distance2_coords(c) >= r * r {
        return BallMeasure { value: 0.0, error: 0.0 };
    }
    if b.farthest_distance(c) <= r {
        return BallMeasure { value: vol, error: 0.0 };
    }
    if c.len() == 2 {
        let value = disk_rect_area(c[0], c[1], r, b.lo()[0], b.hi()[0], b.lo()[1], b.hi()[1]);
        return BallMeasure { value, error: 0.0 };
    }
    let d = c.len();
    let lo: Vec<f64> = (0..d).map(|i| b.lo()[i].max(c[i] - r)).collect();
    let hi: Vec<f64> = (0..d).map(|i| b.hi()[i].min(c[i] + r)).collect();
    let sub: f64 = lo.iter().zip(&hi).map(|(a, z)| z - a).product();
    let shifts = 8;
    let per = 1024u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates = Vec::with_capacity(shifts);
    for _ in 0..shifts {
        let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let mut inside = 0u64;
        for k in 1..=per {
            let mut d2 = 0.0;
            for i in 0..d {
                let u = (radical_inverse(k, HALTON_PRIMES[i]) + shift[i]).fract();
                let x = lo[i] + u * (hi[i] - lo[i]) - c[i];
                d2 += x * x;
            }
            if d2 <= r * r {
                inside += 1;
            }
        }
        estimates.push(sub * inside as f64 / per as f64);
    }
    let mean = estimates.iter().sum::<f64>() / shifts as f64;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (shifts - 1) as f64;
    BallMeasure { value: mean, error: 2.0 * (var / shifts as f64).sqrt() }
}

/// `μ(B(c, r))`.
pub fn ball_measure(mu: &CellMeasure, c: &[f64], r: f64, seed: u64) -> BallMeasure {
    let mut out = BallMeasure { value: 0.0, error: 0.0 };
    for cell in mu.cells.iter().filter(|c| c.density > 0.0) {
        let m = ball_box_volume(c, r, &cell.cell, seed);
        out.value += cell.density * m.value;
        out.error += cell.density * m.error;
    }
    out
}

const BALL_SEED: u64 = 0x5eed_ba11;

/// `max_r μ(B_r(p)) / r^n` over the given radii.
pub fn maximal_function(mu: &CellMeasure, p: &Point, radii: &[f64]) -> Result<f64> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("maximal function needs at least one radius".into()));
    }
    let n = p.n() as i32;
    Ok(radii
        .iter()
        .map(|&r| ball_measure(mu, p.coords(), r, BALL_SEED).value / r.powi(n))
        .fold(0.0, f64::max))
}

/// Powers of two from the largest one `<= lo` to the smallest one `>= hi`.
pub fn dyadic_radii(lo: f64, hi: f64) -> Vec<f64> {
    let a = lo.log2().floor() as i32;
    let b = hi.log2().ceil() as i32;
    (a..=b.max(a)).map(|k| 2f64.powi(k)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub constant: f64,
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    /// `max μ(B_r(x̄)) / r^n` over centers x radii.
    pub worst_ratio: f64,
    pub worst_ball: Option<(Point, f64)>,
    /// Summed Monte-Carlo error at the worst ball (zero in the plane).
    pub ball_error: f64,
    /// Radii skipped because `D ω_{n+1} r <= constant` already bounds the ratio.
    pub pruned_radii: Vec<f64>,
    /// Dyadic radii only: the supremum over all radii can exceed
    /// `worst_ratio` by at most this factor.
    pub radius_slack: f64,
}

impl GrowthCertificate {
    pub fn is_valid(&self) -> bool {
        self.worst_ratio <= self.constant
    }
}

/// Centres and radii the growth check insists on: every cell corner and
/// centre, and dyadic radii from half the narrowest cell to twice the
/// diameter of the support.
pub fn mandated_family(mu: &CellMeasure) -> (Vec<Point>, Vec<f64>) {
    let mut seen = HashSet::new();
    let mut centers = Vec::new();
    for c in &mu.cells {
        for p in c.cell.corners().into_iter().chain(std::iter::once(c.cell.center())) {
            if seen.insert(point_key(&p)) {
                centers.push(p);
            }
        }
    }
    let (lo, hi) = radius_range(mu);
    (centers, dyadic_radii(lo, hi))
}

fn radius_range(mu: &CellMeasure) -> (f64, f64) {
    let set = BoxUnionSet { n: mu.dim().unwrap_or(2) - 1, boxes: mu.cells.iter().map(|c| c.cell.clone()).collect() };
    let h = mu.min_cell_width();
    let h = if h.is_finite() { h } else { 1.0 };
    (0.5 * h, (2.0 * set.diam()).max(h))
}

fn point_key(p: &Point) -> Vec<i64> {
    p.coords().iter().map(|x| (x * 1e9).round() as i64).collect()
}

/// Worst growth ratio over `centers x radii`, after checking that the family
/// contains the mandated one.
pub fn growth_check(mu: &CellMeasure, constant: f64, centers: &[Point], radii: &[f64]) -> Result<GrowthCertificate> {
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::InvalidInput("growth check needs nonempty centre and radius families".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("growth radii must be positive".into()));
    }
    let (need_centers, need_radii) = mandated_family(mu);
    let have: HashSet<Vec<i64>> = centers.iter().map(point_key).collect();
    if let Some(miss) = need_centers.iter().find(|p| !have.contains(&point_key(p))) {
        return Err(Error::InvalidInput(format!("growth family misses the cell corner/centre {:?}", miss.coords())));
    }
    if let Some(miss) = need_radii.iter().find(|&&r| !radii.iter().any(|&s| (s - r).abs() <= 1e-12 * r)) {
        return Err(Error::InvalidInput(format!("growth family misses the dyadic radius {miss}")));
    }
    let n = centers[0].n();
    let omega = unit_ball_volume(n + 1);
    let dmax = mu.max_density();
    let (pruned, kept): (Vec<f64>, Vec<f64>) = if n == 1 {
        (Vec::new(), radii.to_vec())
    } else {
        radii.iter().partition(|&&r| dmax * omega * r <= constant)
    };
    let results: Vec<(f64, f64, usize, f64)> = centers
        .par_iter()
        .enumerate()
        .flat_map_iter(|(ci, c)| {
            kept.iter().map(move |&r| {
                let m = ball_measure(mu, c.coords(), r, BALL_SEED);
                (m.value / r.powi(n as i32), m.error / r.powi(n as i32), ci, r)
            })
        })
        .collect();
    let mut worst = (0.0, 0.0, None);
    for (ratio, err, ci, r) in results {
        if ratio > worst.0 {
            worst = (ratio, err, Some((centers[ci].clone(), r)));
        }
    }
    let pruned_bound = pruned.iter().map(|r| dmax * omega * r).fold(0.0, f64::max);
    let worst_ratio = worst.0.max(pruned_bound);
    Ok(GrowthCertificate {
        constant,
        centers: centers.to_vec(),
        radii: radii.to_vec(),
        worst_ratio,
        worst_ball: worst.2,
        ball_error: worst.1,
        pruned_radii: pruned,
        radius_slack: 2f64.powi(n as i32),
    })
}

/// Symmetric-potential values over `points`, in parallel.
pub fn potential_field(kind: KernelKind, mu: &CellMeasure, points: &[Point], tol: f64) -> Result<Vec<f64>> {
    points.par_iter().map(|p| potential(kind, mu, p, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rect2d::vertex_min;

    fn unit_square() -> CellMeasure {
        CellMeasure::lebesgue(&BoxUnionSet::single(AxisBox::rect(0.0, 1.0, 0.0, 1.0)))
    }

    /// Chord-length integral by adaptive quadrature, independent of the
    /// piecewise closed form.
    fn area_oracle(cx: f64, cy: f64, r: f64, b: [f64; 4]) -> f64 {
        let f = |x: f64| {
            let dx = x - cx;
            if dx.abs() >= r {
                return 0.0;
            }
            let c = (r * r - dx * dx).sqrt();
            ((cy + c).min(b[3]) - (cy - c).max(b[2])).max(0.0)
        };
        // kinks where the circle crosses the horizontal edges
        let mut breaks = vec![cx - r, cx + r];
        for y in [b[2], b[3]] {
            let d = r * r - (y - cy) * (y - cy);
            if d > 0.0 {
                breaks.extend([cx - d.sqrt(), cx + d.sqrt()]);
            }
        }
        integrate(f, b[0], b[1], &breaks, &QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, max_intervals: 4000 })
            .unwrap()
            .value
    }

    #[test]
    fn disk_area_against_chord_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let b = [rng.gen_range(-1.0..0.0), rng.gen_range(0.1..1.5), rng.gen_range(-1.0..0.0), rng.gen_range(0.1..1.5)];
            let (cx, cy, r) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.01..3.0));
            let got = disk_rect_area(cx, cy, r, b[0], b[1], b[2], b[3]);
            let want = area_oracle(cx, cy, r, b);
            assert!((got - want).abs() < 1e-9, "{cx} {cy} {r} {b:?}: {got} vs {want}");
        }
        assert!((disk_rect_area(0.5, 0.5, 0.5, 0.0, 1.0, 0.0, 1.0) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn maximal_function_examples() {
        let mu = unit_square();
        let c = Point::xt(0.5, 0.5);
        assert!((maximal_function(&mu, &c, &[0.5]).unwrap() - PI / 2.0).abs() < 1e-14);
        assert_eq!(maximal_function(&mu, &Point::xt(5.0, 5.0), &[0.5, 1.0, 2.0]).unwrap(), 0.0);
        let double = maximal_function(&mu.scaled(2.0), &c, &[0.25, 0.5, 1.0]).unwrap();
        assert!((double - 2.0 * maximal_function(&mu, &c, &[0.25, 0.5, 1.0]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn potential_examples() {
        let mu = unit_square();
        let v = potential(KernelKind::P, &mu, &Point::xt(0.5, 0.5), 1e-10).unwrap();
        assert!((v - (0.5 * 2f64.ln() + PI / 4.0)).abs() < 1e-14);
        assert_eq!(potential(KernelKind::P, &mu, &Point::xt(0.3, -0.2), 1e-10).unwrap(), 0.0);
        assert_eq!(potential(KernelKind::P, &mu.scaled(0.0), &Point::xt(0.3, 0.2), 1e-10).unwrap(), 0.0);
        // corner value of the symmetric potential
        let corner = potential(KernelKind::PSym, &mu, &Point::xt(0.0, 0.0), 1e-10).unwrap();
        assert!((corner - vertex_min(1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_matches_closed_form_per_cell() {
        let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 8000 };
        for (p, kind) in [([0.3, 0.4], KernelKind::P), ([1.7, -0.5], KernelKind::PConj), ([0.0, 1.0], KernelKind::PSym)] {
            let lo = [0.0, 0.0];
            let hi = [1.5, 0.8];
            let q = cell_potential_quadrature(kind, &lo, &hi, &p, &opts).unwrap();
            let c = cell_potential_2d(kind, &lo, &hi, &p);
            assert!((q - c).abs() < 1e-8 * c.max(1e-3), "{q} vs {c}");
        }
    }

    #[test]
    fn truncated_potential_limits() {
        let mu = unit_square();
        let p = Point::xt(0.4, 0.7);
        let full = potential(KernelKind::PSym, &mu, &p, 1e-10).unwrap();
        let small = truncated_potential(KernelKind::PSym, &mu, &p, 1e-6, 1e-10).unwrap();
        assert!((full - small).abs() <= 1e-3);
        assert_eq!(truncated_potential(KernelKind::P, &mu, &p, 2.0, 1e-10).unwrap(), 0.0);
        // ball part of P_sym over a full disk inside the cell is ε·∫|sinθ|/2 = 2ε
        let eps = 0.1;
        let c = Point::xt(0.5, 0.5);
        let part = potential(KernelKind::PSym, &mu, &c, 1e-10).unwrap()
            - truncated_potential(KernelKind::PSym, &mu, &c, eps, 1e-12).unwrap();
        assert!((part - 2.0 * eps).abs() < 1e-10, "{part}");
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let v = truncated_potential(KernelKind::P, &mu, &p, 0.01 * 1.5f64.powi(k), 1e-11).unwrap();
            assert!(v <= prev + 1e-10);
            prev = v;
        }
    }

    #[test]
    fn regularized_cell_matches_quadrature() {
        let b = BumpProfile::default();
        let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 4000 };
        let lo = [0.0, 0.0];
        let hi = [0.5, 0.25];
        for p in [[0.1, 0.1], [0.5, 0.3], [-0.05, 0.2]] {
            for tau in [0.05, 0.2] {
                let fast = cell_regularized_potential(KernelKind::PSym, &lo, &hi, &p, tau, &b, &opts).unwrap();
                let f = |y: &[f64]| crate::kernels::regularized_value(KernelKind::PSym, &[p[0] - y[0], p[1] - y[1]], tau, &b);
                let mut breaks = vec![vec![p[0]], vec![p[1]]];
                for (i, br) in breaks.iter_mut().enumerate() {
                    br.extend([p[i] - tau, p[i] + tau, p[i] - tau / 2.0, p[i] + tau / 2.0]);
                }
                let slow = integrate_box(&f, &lo, &hi, &breaks, &opts).unwrap().value;
                assert!((fast - slow).abs() < 1e-8, "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn growth_of_lebesgue_unit_square() {
        let mu = unit_square();
        let (centers, _) = mandated_family(&mu);
        let radii: Vec<f64> = (-4..=2).map(|k| 2f64.powi(k)).collect();
        let cert = growth_check(&mu, 2.0, &centers, &radii).unwrap();
        // the centre ball of radius 1/2 is the worst one: (π/4)/(1/2)
        assert!((cert.worst_ratio - PI / 2.0).abs() < 1e-14);
        assert!(cert.is_valid());
        let zero = growth_check(&mu.scaled(0.0), 0.0, &centers, &radii).unwrap();
        assert_eq!(zero.worst_ratio, 0.0);
        let doubled = growth_check(&mu.scaled(2.0), 4.0, &centers, &radii).unwrap();
        assert!((doubled.worst_ratio - 2.0 * cert.worst_ratio).abs() < 1e-14);
        assert!(growth_check(&mu, 2.0, &centers[1..], &radii).is_err());
        assert!(growth_check(&mu, 2.0, &centers, &radii[..3]).is_err());
    }

    #[test]
    fn ball_volume_in_three_dimensions() {
        let b = AxisBox::from_bounds(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        let m = ball_box_volume(&[0.5, 0.5, 0.5], 0.5, &b, 3);
        let exact = 4.0 / 3.0 * PI / 8.0;
        assert!((m.value - exact).abs() < 0.02);
        assert!(m.error > 0.0 && (m.value - exact).abs() < 5.0 * m.error + 1e-3);
    }
}
