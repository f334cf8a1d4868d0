//! Lower and upper estimates of the symmetric positive capacity
//!
//! ```text
//! γ_sy,+(E) = sup { μ(E) : μ(B(x̄, r)) <= rⁿ,  ‖P_sym * μ‖_∞ <= 1 }
//! ```
//!
//! The lower bound is a linear program over piecewise-constant densities on
//! the dyadic cells meeting `E` (their union is the dyadic hull `E₀ ⊇ E`).
//! Potential rows live on a lattice of spacing `h / 2^ρ`, growth rows on the
//! mandated ball family, and both are generated lazily: solve, find the most
//! violated rows, append them, re-solve with the dual simplex. The returned
//! witness is re-checked on a finer lattice and scaled down if needed.
//!
//! The upper bound uses a reference measure `μ` on the set: any admissible
//! `ν` satisfies `ν(E) inf_E (P_sym * μ) <= ⟨P_sym * μ, ν⟩ = ⟨μ, P_sym * ν⟩ <= μ(E)`.
//! The infimum is certified by branch and bound; on a box `B` the potential
//! is bounded below by that of the measure eroded by the extent of `B`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dyadic_cover, AxisBox, BoxUnionSet, DyadicCube, Point};
use crate::kernels::KernelKind;
use crate::lattice::{Convolution, IndexBox};
use crate::lp::Simplex;
use crate::measures::{
    ball_box_volume, cell_potential_2d, cell_potential_quadrature, dyadic_radii, growth_check, mandated_family,
    potential, unit_ball_volume, Cell, CellMeasure, GrowthCertificate,
};
use crate::quadrature::QuadOptions;

const ROW_TOL: f64 = 1e-9;
const BALL_SEED: u64 = 0x5eed_ba11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpParams {
    /// Cells have side `2^-generation`.
    pub generation: i32,
    /// Potential rows use the bound `1 / (1 + safety)`.
    pub safety: f64,
    /// Solve lattice spacing `h / 2^solve_refine`, at least 1 so cell
    /// centres are lattice points.
    pub solve_refine: u32,
    /// Verification lattice spacing `h / 2^check_refine`.
    pub check_refine: u32,
    /// Lattice margin around the hull, in units of its diameter.
    pub window: f64,
    /// Constrain `P` and `P*` separately instead of `P_sym`.
    pub both_kernels: bool,
    pub cell_cap: usize,
    pub max_rounds: usize,
    /// Rows appended per round and family; 0 picks `max(64, cells / 4)`.
    pub cuts_per_round: usize,
}

impl Default for LpParams {
    fn default() -> Self {
        LpParams {
            generation: 4,
            safety: 0.1,
            solve_refine: 1,
            check_refine: 3,
            window: 0.5,
            both_kernels: false,
            cell_cap: 4096,
            max_rounds: 200,
            cuts_per_round: 0,
        }
    }
}

impl LpParams {
    pub fn with_generation(generation: i32) -> Self {
        LpParams { generation, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.safety >= 0.0 && self.safety.is_finite()) {
            return Err(Error::InvalidInput(format!("safety factor must be >= 0, got {}", self.safety)));
        }
        if self.solve_refine == 0 || self.check_refine < self.solve_refine || self.check_refine > 6 {
            return Err(Error::InvalidInput("need 1 <= solve_refine <= check_refine <= 6".into()));
        }
        if !(self.window >= 0.0 && self.window.is_finite()) {
            return Err(Error::InvalidInput(format!("window must be >= 0, got {}", self.window)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub cells: usize,
    pub cell_side: f64,
    pub density_cap: f64,
    pub safety: f64,
    pub solve_spacing: f64,
    pub solve_points: usize,
    pub check_spacing: f64,
    pub check_points: usize,
    pub window_margin: f64,
    pub potential_rows: usize,
    pub growth_rows: usize,
    pub rounds: usize,
    pub pivots: usize,
    /// Largest potential on the solve lattice (before the final scaling).
    pub solve_max: f64,
    /// Largest potential on the check lattice (before the final scaling).
    pub check_max: f64,
    /// Worst growth ratio over the mandated family (before the final scaling).
    pub growth_worst: f64,
    /// Factor applied to the LP solution to make it feasible on the check lattice.
    pub scale: f64,
    /// Potential bound outside the lattice window, `mass · sup_{|z| >= margin} K`.
    pub far_bound: f64,
    /// `max(check_max, far_bound)` after scaling; `<= 1` except between lattice points.
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    /// LP optimum before the a-posteriori scaling.
    pub lp_value: f64,
    pub witness: CellMeasure,
    pub growth: GrowthCertificate,
    pub report: ConstraintReport,
}

fn unit_cube_potential(kind: KernelKind, p: &[f64]) -> Result<f64> {
    let d = p.len();
    let lo = vec![0.0; d];
    let hi = vec![1.0; d];
    if d == 2 {
        Ok(cell_potential_2d(kind, &lo, &hi, p))
    } else {
        let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-9, max_intervals: 4000 };
        cell_potential_quadrature(kind, &lo, &hi, p, &opts)
    }
}

/// The dyadic cells of `E₀` with a lattice of potential probe points.
struct Model {
    n: usize,
    h: f64,
    cells: Vec<DyadicCube>,
    hull: BoxUnionSet,
    kinds: Vec<KernelKind>,
}

/// A probe lattice with one table per kernel.
struct Probe {
    refine: u32,
    convs: Vec<Convolution>,
}

impl Model {
    fn new(set: &BoxUnionSet, params: &LpParams) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let cells = dyadic_cover(set, params.generation, params.cell_cap)?;
        let h = 2f64.powi(-params.generation);
        let hull = BoxUnionSet { n: set.n, boxes: cells.iter().map(DyadicCube::to_box).collect() };
        let kinds =
            if params.both_kernels { vec![KernelKind::P, KernelKind::PConj] } else { vec![KernelKind::PSym] };
        Ok(Model { n: set.n, h, cells, hull, kinds })
    }

    fn dim(&self) -> usize {
        self.n + 1
    }

    fn margin(&self, params: &LpParams) -> f64 {
        params.window * self.hull.diam()
    }

    fn probe(&self, refine: u32, params: &LpParams) -> Result<Probe> {
        let d = self.dim();
        let f = 1i64 << refine;
        let s = self.h / f as f64;
        let bbox = self.hull.bbox().expect("nonempty hull");
        let m = self.margin(params);
        let plo: Vec<i64> = (0..d).map(|i| ((bbox.lo()[i] - m) / s).floor() as i64).collect();
        let phi: Vec<i64> = (0..d).map(|i| ((bbox.hi()[i] + m) / s).ceil() as i64).collect();
        let points = IndexBox::new(plo, &phi);
        let cells: Vec<Vec<i64>> = self.cells.iter().map(|c| c.index.clone()).collect();
        let step = 1.0 / f as f64;
        let h = self.h;
        let convs = self
            .kinds
            .iter()
            .map(|&kind| {
                Convolution::new(points.clone(), &cells, f, |key| {
                    let p: Vec<f64> = key.iter().map(|&v| v as f64 * step).collect();
                    Ok(h * unit_cube_potential(kind, &p)?)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Probe { refine, convs })
    }
}

impl Probe {
    fn points(&self) -> &IndexBox {
        &self.convs[0].points
    }

    fn spacing(&self, h: f64) -> f64 {
        h / (1u64 << self.refine) as f64
    }

    /// Potentials of the densities `x` at every lattice point, per kernel.
    fn field(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.convs.iter().map(|c| c.apply(x)).collect()
    }
}

fn witness_measure(model: &Model, x: &[f64]) -> CellMeasure {
    CellMeasure {
        cells: model.cells.iter().zip(x).map(|(c, &d)| Cell { cell: c.to_box(), density: d }).collect(),
    }
}

/// Mandated growth balls as (centre, radius) with, per ball, the cells it
/// meets and their intersection volumes.
struct GrowthFamily {
    balls: Vec<(Point, f64)>,
}

impl GrowthFamily {
    fn new(model: &Model) -> Self {
        let probe = witness_measure(model, &vec![0.0; model.cells.len()]);
        let (centers, radii) = mandated_family(&probe);
        let balls = radii.iter().flat_map(|&r| centers.iter().map(move |c| (c.clone(), r))).collect();
        GrowthFamily { balls }
    }

    fn row(&self, model: &Model, b: usize) -> Vec<f64> {
        let (c, r) = &self.balls[b];
        model.cells.iter().map(|cell| ball_box_volume(c.coords(), *r, &cell.to_box(), BALL_SEED).value).collect()
    }

    /// `μ(B) / rⁿ` for every ball.
    fn ratios(&self, model: &Model, x: &[f64]) -> Vec<f64> {
        let boxes: Vec<(AxisBox, f64)> = model
            .cells
            .iter()
            .zip(x)
            .filter(|(_, &v)| v > 0.0)
            .map(|(c, &v)| (c.to_box(), v))
            .collect();
        let n = model.n as i32;
        self.balls
            .par_iter()
            .map(|(c, r)| {
                let m: f64 = boxes.iter().map(|(b, v)| v * ball_box_volume(c.coords(), *r, b, BALL_SEED).value).sum();
                m / r.powi(n)
            })
            .collect()
    }
}

/// Indices of the `k` largest values above `tol`, ties to the lower index.
fn most_violated(values: &[f64], tol: f64, k: usize, skip: &HashSet<usize>) -> Vec<usize> {
    let mut v: Vec<(usize, f64)> =
        values.iter().copied().enumerate().filter(|&(i, val)| val > tol && !skip.contains(&i)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v.into_iter().map(|(i, _)| i).collect()
}

/// Largest mass of a density on the dyadic cells of `set` with
/// `(1 + δ) P_sym * μ <= 1` on the solve lattice and `μ(B) <= rⁿ` on the
/// mandated balls.
pub fn lower_bound_lp(set: &BoxUnionSet, params: &LpParams) -> Result<LowerBound> {
    params.validate()?;
    let model = Model::new(set, params)?;
    let nc = model.cells.len();
    let d = model.dim();
    let h = model.h;
    let vol = h.powi(d as i32);
    let density_cap = 1.0 / (unit_ball_volume(d) * 0.5 * h);
    let bound = 1.0 / (1.0 + params.safety);
    let cuts = if params.cuts_per_round == 0 { (nc / 4).max(64) } else { params.cuts_per_round };

    let solve = model.probe(params.solve_refine, params)?;
    let family = GrowthFamily::new(&model);
    let mut lp = Simplex::new(vec![vol; nc], vec![density_cap; nc])?;

    // rows scaled so the right-hand side is 1
    let mut added_pot: Vec<HashSet<usize>> = vec![HashSet::new(); model.kinds.len()];
    let mut added_growth: HashSet<usize> = HashSet::new();
    let f = 1i64 << params.solve_refine;
    for c in &model.cells {
        let center: Vec<i64> = c.index.iter().map(|k| f * k + f / 2).collect();
        let k = solve.points().flat(&center).expect("cell centres lie on the solve lattice");
        for q in 0..model.kinds.len() {
            if added_pot[q].insert(k) {
                lp.add_row(&solve.convs[q].row(k).iter().map(|a| a / bound).collect::<Vec<_>>(), 1.0)?;
            }
        }
    }
    let rounds = {
        let mut rounds = 0;
        loop {
            lp.solve()?;
            rounds += 1;
            let x = lp.solution();
            let fields = solve.field(&x);
            let mut added = 0;
            for (q, field) in fields.iter().enumerate() {
                let excess: Vec<f64> = field.iter().map(|v| v / bound - 1.0).collect();
                for k in most_violated(&excess, ROW_TOL, cuts, &added_pot[q]) {
                    added_pot[q].insert(k);
                    lp.add_row(&solve.convs[q].row(k).iter().map(|a| a / bound).collect::<Vec<_>>(), 1.0)?;
                    added += 1;
                }
            }
            let ratios = family.ratios(&model, &x);
            let excess: Vec<f64> = ratios.iter().map(|v| v - 1.0).collect();
            for b in most_violated(&excess, ROW_TOL, cuts, &added_growth) {
                added_growth.insert(b);
                let rn = family.balls[b].1.powi(model.n as i32);
                lp.add_row(&family.row(&model, b).iter().map(|a| a / rn).collect::<Vec<_>>(), 1.0)?;
                added += 1;
            }
            if added == 0 {
                break rounds;
            }
            if rounds >= params.max_rounds {
                return Err(Error::SolverStalled { iterations: lp.pivots, objective: lp.objective() });
            }
        }
    };

    let x = lp.solution();
    let lp_value = lp.objective();
    let solve_max = solve.field(&x).iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let solve_points = solve.points().len();
    let solve_spacing = solve.spacing(h);
    drop(solve);
    let check = model.probe(params.check_refine, params)?;
    let check_max = check.field(&x).iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let witness = witness_measure(&model, &x);
    let (centers, radii) = mandated_family(&witness);
    let growth = growth_check(&witness, 1.0, &centers, &radii)?;
    let growth_worst = growth.worst_ratio;
    let mut scale = 1.0f64.min(1.0 / check_max.max(1e-300)).min(1.0 / growth_worst.max(1e-300));
    // the division can round up by an ulp
    let (witness, growth) = loop {
        let w = witness.scaled(scale);
        let g = growth_check(&w, 1.0, &centers, &radii)?;
        if g.is_valid() && check_max * scale <= 1.0 {
            break (w, g);
        }
        scale *= 1.0 - 1e-14;
    };
    let value = witness.mass();
    let margin = model.margin(params);
    let kernel_sup = if params.both_kernels { 1.0 } else { 0.5 };
    let far_bound = if margin > 0.0 { value * kernel_sup / margin.powi(model.n as i32) } else { f64::INFINITY };
    let report = ConstraintReport {
        cells: nc,
        cell_side: h,
        density_cap,
        safety: params.safety,
        solve_spacing,
        solve_points,
        check_spacing: check.spacing(h),
        check_points: check.points().len(),
        window_margin: margin,
        potential_rows: added_pot.iter().map(HashSet::len).sum(),
        growth_rows: added_growth.len(),
        rounds,
        pivots: lp.pivots,
        solve_max,
        check_max,
        growth_worst,
        scale,
        far_bound,
        max_violation: (check_max * scale).max(far_bound),
    };
    Ok(LowerBound { value, lp_value, witness, growth, report })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityParams {
    /// Stop once the certified infimum is within this relative gap of the
    /// smallest sampled value.
    pub rel_gap: f64,
    pub max_boxes: usize,
    /// Absolute tolerance for potentials that need quadrature.
    pub tol: f64,
}

impl Default for DualityParams {
    fn default() -> Self {
        DualityParams { rel_gap: 0.01, max_boxes: 200_000, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub value: f64,
    pub reference_mass: f64,
    /// Certified lower bound for `inf_E P_sym * μ`.
    pub m_inf: f64,
    /// Smallest potential value actually sampled on `E`.
    pub sampled_min: f64,
    pub sampled_argmin: Point,
    /// `sampled_min - m_inf`.
    pub margin: f64,
    pub boxes: usize,
}

#[derive(Clone, Debug)]
struct Leaf {
    bound: f64,
    cell: AxisBox,
}

impl PartialEq for Leaf {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Leaf {}
impl PartialOrd for Leaf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Leaf {
    // min-heap on the bound, ties by position
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.cell.lo().iter().zip(self.cell.lo()).fold(Ordering::Equal, |o, (a, b)| o.then(a.total_cmp(b))))
    }
}

/// `P_sym * μ` at every point of `b` is at least the potential at the centre
/// of `b` of `μ` with each cell shrunk by the extent of `b`.
fn eroded_bound(mu: &CellMeasure, b: &AxisBox, opts: &QuadOptions) -> Result<f64> {
    let p = b.center();
    let w: Vec<f64> = (0..b.dim()).map(|i| 0.5 * b.side(i)).collect();
    let mut total = 0.0;
    for c in mu.cells.iter().filter(|c| c.density > 0.0) {
        let lo: Vec<f64> = (0..w.len()).map(|i| c.cell.lo()[i] + w[i]).collect();
        let hi: Vec<f64> = (0..w.len()).map(|i| c.cell.hi()[i] - w[i]).collect();
        if lo.iter().zip(&hi).any(|(a, z)| a >= z) {
            continue;
        }
        let v = if lo.len() == 2 {
            cell_potential_2d(KernelKind::PSym, &lo, &hi, p.coords())
        } else {
            cell_potential_quadrature(KernelKind::PSym, &lo, &hi, p.coords(), opts)?
        };
        total += c.density * v;
    }
    Ok(total)
}

/// `μ(E) / inf_E (P_sym * μ)` with the infimum certified by branch and bound.
pub fn upper_bound_duality(set: &BoxUnionSet, mu_ref: &CellMeasure, params: &DualityParams) -> Result<UpperBound> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    mu_ref.validate()?;
    let mass = mu_ref.mass();
    let opts = QuadOptions { abs_tol: params.tol, rel_tol: 1e-9, max_intervals: 4000 };
    let mut heap = BinaryHeap::new();
    let mut best = (f64::INFINITY, set.boxes[0].center());
    let mut count = 0usize;
    let push = |heap: &mut BinaryHeap<Leaf>, best: &mut (f64, Point), cell: AxisBox| -> Result<()> {
        let c = cell.center();
        let v = potential(KernelKind::PSym, mu_ref, &c, params.tol)?;
        if v < best.0 {
            *best = (v, c);
        }
        let bound = eroded_bound(mu_ref, &cell, &opts)?.min(v);
        heap.push(Leaf { bound, cell });
        Ok(())
    };
    for b in &set.normalized().boxes {
        push(&mut heap, &mut best, b.clone())?;
        count += 1;
    }
    let m_inf = loop {
        let leaf = heap.pop().expect("nonempty heap");
        if leaf.bound >= best.0 * (1.0 - params.rel_gap) || count >= params.max_boxes {
            break leaf.bound;
        }
        let axis = (0..leaf.cell.dim()).max_by(|&i, &j| leaf.cell.side(i).total_cmp(&leaf.cell.side(j))).unwrap();
        if leaf.cell.side(axis) == 0.0 {
            break leaf.bound;
        }
        let mid = 0.5 * (leaf.cell.lo()[axis] + leaf.cell.hi()[axis]);
        for (a, z) in [(leaf.cell.lo()[axis], mid), (mid, leaf.cell.hi()[axis])] {
            let mut lo = leaf.cell.lo().to_vec();
            let mut hi = leaf.cell.hi().to_vec();
            lo[axis] = a;
            hi[axis] = z;
            push(&mut heap, &mut best, AxisBox::from_bounds(&lo, &hi)?)?;
            count += 1;
        }
    };
    let margin = best.0 - m_inf;
    if !(m_inf > 0.0) {
        return Err(Error::ReferencePotentialTooSmall { m_inf, margin });
    }
    Ok(UpperBound {
        value: mass / m_inf,
        reference_mass: mass,
        m_inf,
        sampled_min: best.0,
        sampled_argmin: best.1,
        margin,
        boxes: count,
    })
}

/// Merges dyadic cubes of one generation into boxes: runs along the first
/// axis, then runs with identical extents stacked along each further axis.
pub fn merge_cubes(cubes: &[DyadicCube]) -> Vec<AxisBox> {
    if cubes.is_empty() {
        return Vec::new();
    }
    let d = cubes[0].index.len();
    // boxes as integer [lo, hi) ranges
    let mut boxes: Vec<(Vec<i64>, Vec<i64>)> =
        cubes.iter().map(|c| (c.index.clone(), c.index.iter().map(|k| k + 1).collect())).collect();
    for axis in 0..d {
        let mut groups: HashMap<Vec<i64>, Vec<(i64, i64)>> = HashMap::new();
        for (lo, hi) in &boxes {
            let mut key = Vec::with_capacity(2 * d);
            for i in (0..d).filter(|&i| i != axis) {
                key.push(lo[i]);
                key.push(hi[i]);
            }
            groups.entry(key).or_default().push((lo[axis], hi[axis]));
        }
        let mut keys: Vec<_> = groups.keys().cloned().collect();
        keys.sort();
        let mut merged = Vec::new();
        for key in keys {
            let mut runs = groups.remove(&key).unwrap();
            runs.sort();
            let mut cur = runs[0];
            for &(a, b) in &runs[1..] {
                if a == cur.1 {
                    cur.1 = b;
                } else {
                    merged.push((key.clone(), cur));
                    cur = (a, b);
                }
            }
            merged.push((key, cur));
        }
        boxes = merged
            .into_iter()
            .map(|(key, (a, b))| {
                let mut lo = vec![0; d];
                let mut hi = vec![0; d];
                let mut it = key.chunks(2);
                for i in 0..d {
                    if i == axis {
                        lo[i] = a;
                        hi[i] = b;
                    } else {
                        let c = it.next().unwrap();
                        lo[i] = c[0];
                        hi[i] = c[1];
                    }
                }
                (lo, hi)
            })
            .collect();
    }
    boxes.sort();
    let s = cubes[0].side();
    let o = cubes[0].origin_shift.coords().to_vec();
    boxes
        .into_iter()
        .map(|(lo, hi)| {
            let lo: Vec<f64> = lo.iter().zip(&o).map(|(&k, oo)| oo + s * k as f64).collect();
            let hi: Vec<f64> = hi.iter().zip(&o).map(|(&k, oo)| oo + s * k as f64).collect();
            AxisBox::from_bounds(&lo, &hi).expect("merged dyadic box")
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBracket {
    /// `"gamma_sy_plus"`, or `"gamma_tilde_plus"` with both kernels constrained.
    pub capacity: String,
    pub lower: f64,
    pub upper: f64,
    /// The dyadic hull both bounds refer to.
    pub hull: BoxUnionSet,
    pub hull_equals_set: bool,
    pub lower_witness: CellMeasure,
    pub upper_reference: CellMeasure,
    pub constraint_report: ConstraintReport,
    pub growth: GrowthCertificate,
    pub duality: UpperBound,
}

/// LP lower bound and duality upper bound for the dyadic hull of `set`, with
/// Lebesgue measure on the hull as reference.
pub fn estimate_capacity(set: &BoxUnionSet, lp: &LpParams, dual: &DualityParams) -> Result<CapacityBracket> {
    let low = lower_bound_lp(set, lp)?;
    let cubes = dyadic_cover(set, lp.generation, lp.cell_cap)?;
    let hull = BoxUnionSet { n: set.n, boxes: merge_cubes(&cubes) };
    let reference = CellMeasure::lebesgue(&hull);
    let up = upper_bound_duality(&hull, &reference, dual)?;
    if low.value > up.value {
        return Err(Error::InconsistentBracket { lower: low.value, upper: up.value });
    }
    let hull_equals_set = (hull.volume() - set.volume()).abs() <= 1e-12 * hull.volume().max(1.0);
    Ok(CapacityBracket {
        capacity: if lp.both_kernels { "gamma_tilde_plus" } else { "gamma_sy_plus" }.into(),
        lower: low.value,
        upper: up.value,
        hull,
        hull_equals_set,
        lower_witness: low.witness,
        upper_reference: reference,
        constraint_report: low.report,
        growth: low.growth,
        duality: up,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffContent {
    /// `Σ diam(Q)ⁿ` of the best cover; the comparability constant with the
    /// capacity is not included.
    pub value: f64,
    pub generation: Option<i32>,
    pub cubes: usize,
}

/// Smallest `Σ diam(Q)ⁿ` over the dyadic covers of the given generations.
/// Generations whose cover exceeds `cap` are skipped.
pub fn hausdorff_content_upper(
    set: &BoxUnionSet,
    generations: std::ops::RangeInclusive<i32>,
    cap: usize,
) -> Result<HausdorffContent> {
    if set.is_empty() {
        return Ok(HausdorffContent { value: 0.0, generation: None, cubes: 0 });
    }
    let n = set.n as i32;
    let mut best = HausdorffContent { value: f64::INFINITY, generation: None, cubes: 0 };
    for g in generations {
        let cubes = match dyadic_cover(set, g, cap) {
            Ok(c) => c,
            Err(Error::CoverCap { .. }) => continue,
            Err(e) => return Err(e),
        };
        let value: f64 = cubes.iter().map(|c| c.diam().powi(n)).sum();
        if value < best.value {
            best = HausdorffContent { value, generation: Some(g), cubes: cubes.len() };
        }
    }
    if best.generation.is_none() {
        return Err(Error::CoverCap { cap });
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiAdditivity {
    pub union_value: f64,
    pub parts: Vec<f64>,
    pub sum_value: f64,
    pub ratio: f64,
}

/// `lower(∪ E_i) / Σ lower(E_i)` for interior-disjoint sets.
pub fn semi_additivity_probe(sets: &[BoxUnionSet], params: &LpParams) -> Result<SemiAdditivity> {
    if sets.is_empty() {
        return Err(Error::EmptySet);
    }
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if sets[i].interiors_overlap(&sets[j]) {
                return Err(Error::Overlap { first: i, second: j });
            }
        }
    }
    let union = sets[1..].iter().fold(sets[0].clone(), |acc, s| acc.union(s));
    let union_value = lower_bound_lp(&union, params)?.value;
    let parts = sets.iter().map(|s| lower_bound_lp(s, params).map(|l| l.value)).collect::<Result<Vec<_>>>()?;
    let sum_value: f64 = parts.iter().sum();
    let ratio = if sum_value > 0.0 { union_value / sum_value } else { f64::NAN };
    Ok(SemiAdditivity { union_value, parts, sum_value, ratio })
}

/// Dyadic radii of the mandated growth family for a cell side `h` and diameter `diam`.
pub fn growth_radii(h: f64, diam: f64) -> Vec<f64> {
    dyadic_radii(0.5 * h, (2.0 * diam).max(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rect2d::{max_value, vertex_min};

    fn square() -> BoxUnionSet {
        BoxUnionSet::single(AxisBox::rect(0.0, 1.0, 0.0, 1.0))
    }

    #[test]
    fn unit_square_lower_bound() {
        let low = lower_bound_lp(&square(), &LpParams::with_generation(3)).unwrap();
        assert!(low.value >= 0.9 / max_value(1.0), "{}", low.value);
        assert!(low.value <= 2.0 / vertex_min(1.0));
        assert!(low.growth.is_valid());
        assert!(low.report.max_violation <= 1.0 + 1e-12);
    }

    #[test]
    fn unit_square_upper_bound() {
        let up = upper_bound_duality(&square(), &CellMeasure::lebesgue(&square()), &DualityParams::default()).unwrap();
        let exact = 2.0 / vertex_min(1.0);
        assert!(up.value >= exact * (1.0 - 1e-12) && up.value <= 1.05 * exact, "{}", up.value);
        // certified infimum <= corner minimum <= sampled minimum
        assert!(up.m_inf <= vertex_min(1.0) / 2.0 && vertex_min(1.0) / 2.0 <= up.sampled_min);
        assert!(up.sampled_min - up.m_inf <= 0.011 * up.sampled_min);
        let scaled =
            upper_bound_duality(&square(), &CellMeasure::lebesgue(&square()).scaled(3.0), &DualityParams::default())
                .unwrap();
        assert!((scaled.value - up.value).abs() < 1e-12 * up.value);
    }

    #[test]
    fn merged_cubes_cover_the_hull() {
        let set = square().union(&BoxUnionSet::single(AxisBox::rect(1.0, 1.5, 0.0, 0.5)));
        let cubes = dyadic_cover(&set, 2, 1000).unwrap();
        let boxes = merge_cubes(&cubes);
        let total: f64 = boxes.iter().map(AxisBox::volume).sum();
        assert!((total - 1.25).abs() < 1e-15);
        assert!(boxes.len() <= 3);
        for (i, a) in boxes.iter().enumerate() {
            for b in &boxes[i + 1..] {
                assert!(!a.interiors_overlap(b));
            }
        }
    }

    #[test]
    fn hausdorff_content_examples() {
        let c = hausdorff_content_upper(&square(), 0..=0, 100).unwrap();
        assert!((c.value - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(hausdorff_content_upper(&BoxUnionSet::empty(1), 0..=3, 10).unwrap().value, 0.0);
        // a segment of length 1 has content 1; dyadic covers give √2
        let seg = BoxUnionSet::single(AxisBox::rect(0.0, 0.0, 0.0, 1.0));
        let c = hausdorff_content_upper(&seg, 0..=6, 10_000).unwrap();
        assert!((c.value - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let a = square();
        let b = BoxUnionSet::single(AxisBox::rect(0.5, 1.5, 0.0, 1.0));
        assert!(matches!(semi_additivity_probe(&[a, b], &LpParams::with_generation(1)), Err(Error::Overlap { .. })));
    }
}
