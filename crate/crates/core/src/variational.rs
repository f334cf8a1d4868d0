//! The variational capacity functional
//!
//! ```text
//! F(μ) = μ(E)² / (μ(E) + ∫ |𝒮μ|² dμ),    𝒮μ = (P_sym ψ_τ₀) * μ
//! ```
//!
//! over piecewise-constant densities with `n`-growth, its maximization by
//! projected ascent, and the four potentials of a maximizer used by the
//! Whitney construction.
//!
//! The energy is computed with a midpoint rule on a grid twice as fine as
//! the cells; `𝒮μ` at those nodes is the inner field that the iterated
//! potential and the weighted maximal function reuse.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dyadic_cover, AxisBox, BoxUnionSet, Point};
use crate::kernels::{BumpProfile, KernelKind};
use crate::measures::{
    ball_box_volume, cell_regularized_potential, dyadic_radii, growth_check, mandated_family, maximal_function,
    regularized_potential, unit_ball_volume, Cell, CellMeasure,
};
use crate::quadrature::QuadOptions;

const BALL_SEED: u64 = 0x5eed_ba11;
const CACHE_QUANTUM: f64 = (1u64 << 24) as f64;
const MAX_HALVINGS: usize = 40;
const POTENTIAL_TOL: f64 = 1e-10;

fn quad_options() -> QuadOptions {
    QuadOptions { abs_tol: 1e-11, rel_tol: 1e-9, max_intervals: 4000 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalProblem {
    pub set: BoxUnionSet,
    pub tau0: f64,
    pub bump: BumpProfile,
    pub candidate: CellMeasure,
    pub growth_constant: f64,
}

impl VariationalProblem {
    /// Cells of the generation-`g` dyadic cover clipped to `set`, carrying the
    /// largest constant density that passes the growth check. `tau0` defaults
    /// to a quarter of the narrowest cell.
    pub fn uniform(set: &BoxUnionSet, generation: i32, tau0: Option<f64>, growth_constant: f64) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        if !(growth_constant > 0.0 && growth_constant.is_finite()) {
            return Err(Error::InvalidInput(format!("growth constant must be positive, got {growth_constant}")));
        }
        let set = set.normalized();
        let mut boxes = Vec::new();
        for cube in dyadic_cover(&set, generation, 1 << 14)? {
            let cb = cube.to_box();
            for b in &set.boxes {
                if let Some(i) = cb.intersect(b) {
                    if i.volume() > 0.0 {
                        boxes.push(i);
                    }
                }
            }
        }
        if boxes.is_empty() {
            return Err(Error::InvalidInput("the set has no volume; the variational problem needs a solid set".into()));
        }
        let unit = CellMeasure { cells: boxes.into_iter().map(|cell| Cell { cell, density: 1.0 }).collect() };
        let tau0 = tau0.unwrap_or(0.25 * unit.min_cell_width());
        let (centers, radii) = mandated_family(&unit);
        let worst = growth_check(&unit, growth_constant, &centers, &radii)?.worst_ratio;
        let candidate = unit.scaled(growth_constant / worst);
        let prob = VariationalProblem { set, tau0, bump: BumpProfile::default(), candidate, growth_constant };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::InvalidInput(format!("τ₀ must be positive, got {}", self.tau0)));
        }
        self.candidate.validate()?;
        if self.candidate.cells.is_empty() {
            return Err(Error::InvalidInput("candidate has no cells".into()));
        }
        if let Some(d) = self.candidate.dim() {
            if d != self.set.dim() {
                return Err(Error::DimensionMismatch { expected: self.set.dim(), got: d });
            }
        }
        for c in self.candidate.cells.iter().filter(|c| c.density > 0.0) {
            let inside = self.set.intersect_box(&c.cell).normalized().volume();
            if inside < c.cell.volume() * (1.0 - 1e-9) {
                return Err(Error::InvalidInput(format!("candidate cell {:?}..{:?} leaves the set", c.cell.lo(), c.cell.hi())));
            }
        }
        let (centers, radii) = mandated_family(&self.candidate);
        let g = growth_check(&self.candidate, self.growth_constant, &centers, &radii)?;
        if !(g.worst_ratio <= self.growth_constant * (1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "candidate fails the growth check: ratio {} > {}",
                g.worst_ratio, self.growth_constant
            )));
        }
        Ok(())
    }
}

/// Discretized `𝒮`, energy and growth constraints on fixed cells.
struct Operator {
    cells: Vec<AxisBox>,
    vol: Vec<f64>,
    nodes: Vec<Point>,
    node_cell: Vec<usize>,
    node_weight: Vec<f64>,
    /// `g[k * cells + c] = ∫_c K_𝒮(node_k - y) dy`
    g: Vec<f64>,
    /// Sparse growth rows with their `rⁿ`.
    balls: Vec<(Vec<(usize, f64)>, f64)>,
    density_cap: f64,
}

fn subcell_centers(b: &AxisBox) -> Vec<Point> {
    let d = b.dim();
    (0..1usize << d)
        .map(|mask| {
            let coords = (0..d)
                .map(|i| {
                    let q = if mask >> (d - 1 - i) & 1 == 1 { 0.75 } else { 0.25 };
                    b.lo()[i] + q * b.side(i)
                })
                .collect();
            Point::from_coords(coords)
        })
        .collect()
}

fn cache_key(p: &Point, b: &AxisBox) -> Vec<i64> {
    let d = b.dim();
    let mut key = Vec::with_capacity(2 * d);
    for i in 0..d {
        key.push(((p.coords()[i] - b.lo()[i]) / b.side(i) * CACHE_QUANTUM).round() as i64);
        key.push(b.side(i).to_bits() as i64);
    }
    key
}

impl Operator {
    fn new(cells: Vec<AxisBox>, tau0: f64, bump: &BumpProfile, growth_constant: f64) -> Result<Self> {
        let nc = cells.len();
        let d = cells[0].dim();
        let vol: Vec<f64> = cells.iter().map(AxisBox::volume).collect();
        let mut nodes = Vec::new();
        let mut node_cell = Vec::new();
        let mut node_weight = Vec::new();
        for (c, b) in cells.iter().enumerate() {
            for p in subcell_centers(b) {
                nodes.push(p);
                node_cell.push(c);
                node_weight.push(vol[c] / (1usize << d) as f64);
            }
        }
        // translation-invariant entries are computed once
        let mut slots: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut reps: Vec<(usize, usize)> = Vec::new();
        let mut index = Vec::with_capacity(nodes.len() * nc);
        for (k, p) in nodes.iter().enumerate() {
            for (c, b) in cells.iter().enumerate() {
                let key = cache_key(p, b);
                let next = reps.len();
                let slot = *slots.entry(key).or_insert(next);
                if slot == next {
                    reps.push((k, c));
                }
                index.push(slot);
            }
        }
        let opts = quad_options();
        let values: Vec<f64> = reps
            .par_iter()
            .map(|&(k, c)| {
                cell_regularized_potential(KernelKind::PSym, cells[c].lo(), cells[c].hi(), nodes[k].coords(), tau0, bump, &opts)
            })
            .collect::<Result<_>>()?;
        let g = index.into_iter().map(|s| values[s]).collect();

        let shell = CellMeasure { cells: cells.iter().map(|b| Cell { cell: b.clone(), density: 0.0 }).collect() };
        let (centers, radii) = mandated_family(&shell);
        let n = (d - 1) as i32;
        let balls = radii
            .iter()
            .flat_map(|&r| centers.iter().map(move |p| (p.clone(), r)))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|(p, r)| {
                let row: Vec<(usize, f64)> = cells
                    .iter()
                    .enumerate()
                    .filter_map(|(c, b)| {
                        let v = ball_box_volume(p.coords(), *r, b, BALL_SEED).value;
                        (v > 0.0).then_some((c, v))
                    })
                    .collect();
                (row, r.powi(n))
            })
            .collect();
        let h = shell.min_cell_width();
        // balls below half the narrowest cell: D ω r <= C
        let density_cap = growth_constant / (unit_ball_volume(d) * 0.5 * h).max(1e-300);
        Ok(Operator { cells, vol, nodes, node_cell, node_weight, g, balls, density_cap })
    }

    fn field(&self, x: &[f64]) -> Vec<f64> {
        let nc = self.cells.len();
        (0..self.nodes.len())
            .into_par_iter()
            .map(|k| self.g[k * nc..(k + 1) * nc].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn mass(&self, x: &[f64]) -> f64 {
        self.vol.iter().zip(x).map(|(v, d)| v * d).sum()
    }

    fn energy(&self, x: &[f64], u: &[f64]) -> f64 {
        (0..self.nodes.len()).map(|k| self.node_weight[k] * x[self.node_cell[k]] * u[k] * u[k]).sum()
    }

    fn evaluate(&self, x: &[f64]) -> State {
        let u = self.field(x);
        let mass = self.mass(x);
        let energy = self.energy(x, &u);
        State { x: x.to_vec(), u, mass, energy }
    }

    fn gradient(&self, s: &State) -> Vec<f64> {
        let nc = self.cells.len();
        let (m, e) = (s.mass, s.energy);
        // ∂E/∂x_c = Σ_{k ∈ c} w_k u_k² + 2 Σ_k g_kc w_k x_{c(k)} u_k
        let weight: Vec<f64> =
            (0..self.nodes.len()).map(|k| self.node_weight[k] * s.x[self.node_cell[k]] * s.u[k]).collect();
        let mut de = vec![0.0; nc];
        for k in 0..self.nodes.len() {
            de[self.node_cell[k]] += self.node_weight[k] * s.u[k] * s.u[k];
            let row = &self.g[k * nc..(k + 1) * nc];
            let w = 2.0 * weight[k];
            if w != 0.0 {
                for (acc, a) in de.iter_mut().zip(row) {
                    *acc += w * a;
                }
            }
        }
        let den = (m + e) * (m + e);
        if den == 0.0 {
            return self.vol.clone();
        }
        (0..nc).map(|c| (2.0 * m * self.vol[c] * (m + e) - m * m * (self.vol[c] + de[c])) / den).collect()
    }

    fn growth_worst(&self, x: &[f64]) -> f64 {
        self.balls
            .iter()
            .map(|(row, rn)| row.iter().map(|&(c, v)| v * x[c]).sum::<f64>() / rn)
            .fold(0.0, f64::max)
    }

    /// Clip to `[0, cap]`, then scale into the growth constraints.
    fn project(&self, x: &[f64], constant: f64) -> Vec<f64> {
        let y: Vec<f64> = x.iter().map(|v| v.clamp(0.0, self.density_cap)).collect();
        let worst = self.growth_worst(&y);
        if worst > constant {
            let s = constant / worst * (1.0 - 1e-14);
            y.iter().map(|v| v * s).collect()
        } else {
            y
        }
    }
}

#[derive(Clone, Debug)]
struct State {
    x: Vec<f64>,
    u: Vec<f64>,
    mass: f64,
    energy: f64,
}

impl State {
    fn value(&self) -> f64 {
        functional(self.mass, self.energy)
    }
}

/// `m² / (m + E)` with `0/0 = 0`.
fn functional(mass: f64, energy: f64) -> f64 {
    if mass <= 0.0 {
        0.0
    } else {
        mass * mass / (mass + energy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub mass: f64,
    pub energy: f64,
}

fn operator_for(prob: &VariationalProblem) -> Result<Operator> {
    let cells = prob.candidate.cells.iter().map(|c| c.cell.clone()).collect();
    Operator::new(cells, prob.tau0, &prob.bump, prob.growth_constant)
}

/// `F` of the candidate together with its mass and energy.
pub fn functional_f(prob: &VariationalProblem) -> Result<FunctionalValue> {
    prob.validate()?;
    let op = operator_for(prob)?;
    let x: Vec<f64> = prob.candidate.cells.iter().map(|c| c.density).collect();
    let s = op.evaluate(&x);
    Ok(FunctionalValue { value: s.value(), mass: s.mass, energy: s.energy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maximizer {
    pub mu0: CellMeasure,
    pub value: f64,
    pub mass: f64,
    pub energy: f64,
    pub tau0: f64,
    /// `F` after every accepted step, starting with the initial iterate.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub rescalings: usize,
    pub growth_worst: f64,
}

/// Scales `s` to `E = m` when `E > m`; `F` strictly increases.
fn normalize(op: &Operator, s: State) -> (State, bool) {
    if s.energy > s.mass && s.mass > 0.0 {
        let lambda = (s.mass / s.energy).sqrt();
        let x: Vec<f64> = s.x.iter().map(|v| v * lambda).collect();
        let mut t = op.evaluate(&x);
        // λ³E can round above λm
        while t.energy > t.mass {
            let x: Vec<f64> = t.x.iter().map(|v| v * (1.0 - 1e-15)).collect();
            t = op.evaluate(&x);
        }
        (t, true)
    } else {
        (s, false)
    }
}

/// Projected gradient ascent on `F` from the candidate and from a seeded
/// perturbation of it, whichever starts higher.
pub fn maximize_f(prob: &VariationalProblem, iterations: usize, seed: u64) -> Result<Maximizer> {
    if iterations == 0 {
        return Err(Error::InvalidInput("iteration budget must be at least 1".into()));
    }
    prob.validate()?;
    let op = operator_for(prob)?;
    let c = prob.growth_constant;
    let mut rescalings = 0;
    let start = |x: Vec<f64>, rescalings: &mut usize| {
        let (s, r) = normalize(&op, op.evaluate(&op.project(&x, c)));
        *rescalings += r as usize;
        s
    };
    let x0: Vec<f64> = prob.candidate.cells.iter().map(|c| c.density).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jittered: Vec<f64> = x0.iter().map(|v| v * (1.0 + 0.05 * (rng.gen::<f64>() - 0.5))).collect();
    let a = start(x0, &mut rescalings);
    let b = start(jittered, &mut rescalings);
    let mut cur = if b.value() > a.value() { b } else { a };
    let mut trace = vec![cur.value()];
    let mut step = 0.5;
    let mut done = 0;
    for _ in 0..iterations {
        let grad = op.gradient(&cur);
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax == 0.0 {
            break;
        }
        let reference = cur.x.iter().copied().fold(0.0, f64::max).max(1e-3 * op.density_cap);
        let mut eta = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let t = eta * reference / gmax;
            let trial: Vec<f64> = cur.x.iter().zip(&grad).map(|(x, g)| x + t * g).collect();
            let (s, r) = normalize(&op, op.evaluate(&op.project(&trial, c)));
            if s.value() > cur.value() {
                accepted = Some((s, r));
                break;
            }
            eta *= 0.5;
        }
        let Some((s, r)) = accepted else { break };
        rescalings += r as usize;
        cur = s;
        trace.push(cur.value());
        done += 1;
        step = (2.0 * eta).min(1.0);
    }
    let mu0 = CellMeasure {
        cells: op.cells.iter().zip(&cur.x).map(|(b, &density)| Cell { cell: b.clone(), density }).collect(),
    };
    Ok(Maximizer {
        value: cur.value(),
        mass: cur.mass,
        energy: cur.energy,
        tau0: prob.tau0,
        trace,
        iterations: done,
        rescalings,
        growth_worst: op.growth_worst(&cur.x),
        mu0,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WhitneyPotentials {
    /// `Mμ₀`
    pub maximal: f64,
    /// `𝒮μ₀`
    pub single: f64,
    /// `𝒮_{μ₀}(𝒮μ₀)`
    pub iterated: f64,
    /// `M(𝒮μ₀ dμ₀)`
    pub weighted_maximal: f64,
}

impl WhitneyPotentials {
    /// `Mμ₀ + 𝒮μ₀ + 𝒮_{μ₀}𝒮μ₀`
    pub fn three_term(&self) -> f64 {
        self.maximal + self.single + self.iterated
    }

    /// All four summands.
    pub fn total(&self) -> f64 {
        self.three_term() + self.weighted_maximal
    }
}

/// A measure `μ₀` with `𝒮μ₀` cached at the midpoints of its half cells;
/// `weighted` is `𝒮μ₀ dμ₀` as a piecewise-constant measure on those half cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSource {
    pub mu0: CellMeasure,
    pub weighted: CellMeasure,
    pub tau0: f64,
    pub bump: BumpProfile,
    /// Smallest radius of the maximal functions.
    pub min_radius: f64,
    /// Support of `μ₀`.
    pub support: BoxUnionSet,
}

impl PotentialSource {
    pub fn new(mu0: &CellMeasure, tau0: f64, bump: &BumpProfile) -> Result<Self> {
        mu0.validate()?;
        if !(tau0 > 0.0) {
            return Err(Error::InvalidInput(format!("τ₀ must be positive, got {tau0}")));
        }
        let support = mu0.support();
        let h = mu0.min_cell_width();
        let min_radius = if h.is_finite() { 0.25 * h } else { 1.0 };
        let cells: Vec<Cell> = mu0.cells.iter().filter(|c| c.density > 0.0 && c.cell.volume() > 0.0).cloned().collect();
        let weighted = if cells.is_empty() {
            CellMeasure { cells: Vec::new() }
        } else {
            let op = Operator::new(cells.iter().map(|c| c.cell.clone()).collect(), tau0, bump, 1.0)?;
            let x: Vec<f64> = cells.iter().map(|c| c.density).collect();
            let u = op.field(&x);
            let mut out = Vec::with_capacity(op.nodes.len());
            for (c, cell) in cells.iter().enumerate() {
                let b = &cell.cell;
                let k0 = c << b.dim();
                for (j, p) in subcell_centers(b).iter().enumerate() {
                    let lo: Vec<f64> = (0..b.dim()).map(|i| p.coords()[i] - 0.25 * b.side(i)).collect();
                    let hi: Vec<f64> = (0..b.dim()).map(|i| p.coords()[i] + 0.25 * b.side(i)).collect();
                    out.push(Cell { cell: AxisBox::from_bounds(&lo, &hi)?, density: cell.density * u[k0 + j] });
                }
            }
            CellMeasure { cells: out }
        };
        Ok(PotentialSource { mu0: mu0.clone(), weighted, tau0, bump: *bump, min_radius, support })
    }

    pub fn mass(&self) -> f64 {
        self.mu0.mass()
    }

    /// `∫ 𝒮μ₀ dμ₀`
    pub fn weighted_mass(&self) -> f64 {
        self.weighted.mass()
    }

    /// Dyadic radii reaching past the whole support from `p`.
    pub fn radii_for(&self, reach: f64) -> Vec<f64> {
        dyadic_radii(self.min_radius, (2.0 * reach).max(self.min_radius))
    }

    pub fn eval(&self, p: &Point) -> Result<WhitneyPotentials> {
        if self.support.is_empty() {
            return Ok(WhitneyPotentials::default());
        }
        let bbox = self.support.bbox().expect("nonempty support");
        let radii = self.radii_for(bbox.farthest_distance(p.coords()));
        Ok(WhitneyPotentials {
            maximal: maximal_function(&self.mu0, p, &radii)?,
            single: regularized_potential(KernelKind::PSym, &self.mu0, p, self.tau0, &self.bump, POTENTIAL_TOL)?,
            iterated: regularized_potential(KernelKind::PSym, &self.weighted, p, self.tau0, &self.bump, POTENTIAL_TOL)?,
            weighted_maximal: maximal_function(&self.weighted, p, &radii)?,
        })
    }

    /// Upper bound for the sum of the four potentials at distance `dist`
    /// from the support: `(3/2) (μ₀(E) + ∫ 𝒮μ₀ dμ₀) / distⁿ`.
    pub fn far_bound(&self, dist: f64) -> f64 {
        let n = self.support.n as i32;
        if dist <= 0.0 {
            return f64::INFINITY;
        }
        1.5 * (self.mass() + self.weighted_mass()) / dist.powi(n)
    }
}

/// The four potentials of `μ₀` at `p`.
pub fn whitney_potentials(mu0: &CellMeasure, p: &Point, tau0: f64, bump: &BumpProfile) -> Result<WhitneyPotentials> {
    PotentialSource::new(mu0, tau0, bump)?.eval(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> BoxUnionSet {
        BoxUnionSet::single(AxisBox::rect(0.0, 1.0, 0.0, 1.0))
    }

    #[test]
    fn zero_measure_gives_zero() {
        let mut prob = VariationalProblem::uniform(&square(), 2, None, 1.0).unwrap();
        prob.candidate = prob.candidate.scaled(0.0);
        let f = functional_f(&prob).unwrap();
        assert_eq!((f.value, f.mass, f.energy), (0.0, 0.0, 0.0));
        let w = whitney_potentials(&prob.candidate, &Point::xt(0.3, 2.0), 0.1, &BumpProfile::default()).unwrap();
        assert_eq!(w.total(), 0.0);
    }

    #[test]
    fn rescaling_raises_f() {
        let prob = VariationalProblem::uniform(&square(), 2, None, 1.0).unwrap();
        let base = functional_f(&prob).unwrap();
        // blow the candidate up until E = M m with M > 1, bypassing growth
        let op = operator_for(&prob).unwrap();
        let x: Vec<f64> = prob.candidate.cells.iter().map(|c| 10.0 * c.density).collect();
        let s = op.evaluate(&x);
        let big_m = s.energy / s.mass;
        assert!(big_m > 1.0);
        let (t, applied) = normalize(&op, s.clone());
        assert!(applied);
        let want = s.mass / (2.0 * big_m.sqrt());
        assert!((t.value() - want).abs() < 1e-9 * want);
        assert!(t.value() > s.mass / (1.0 + big_m));
        assert!(base.value < base.mass);
    }

    #[test]
    fn uniform_candidate_is_feasible() {
        let prob = VariationalProblem::uniform(&square(), 3, None, 1.0).unwrap();
        assert!((prob.tau0 - 0.25 / 8.0).abs() < 1e-15);
        let (c, r) = mandated_family(&prob.candidate);
        let g = growth_check(&prob.candidate, 1.0, &c, &r).unwrap();
        assert!((g.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn candidate_outside_the_set_rejected() {
        let mut prob = VariationalProblem::uniform(&square(), 1, None, 1.0).unwrap();
        prob.candidate.cells[0].cell = AxisBox::rect(1.0, 1.5, 0.0, 0.5);
        assert!(prob.validate().is_err());
    }

    #[test]
    fn gradient_matches_differences() {
        let prob = VariationalProblem::uniform(&square(), 2, None, 1.0).unwrap();
        let op = operator_for(&prob).unwrap();
        let x: Vec<f64> = (0..op.cells.len()).map(|c| 0.3 + 0.01 * c as f64).collect();
        let s = op.evaluate(&x);
        let g = op.gradient(&s);
        let h = 1e-6;
        for c in [0, 5, 15] {
            let mut y = x.clone();
            y[c] += h;
            let up = op.evaluate(&y).value();
            y[c] -= 2.0 * h;
            let down = op.evaluate(&y).value();
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[c]).abs() < 1e-6 * g[c].abs().max(1e-3), "{c}: {fd} vs {}", g[c]);
        }
    }
}
