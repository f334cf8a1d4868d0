use calcap::constants::a_cz;
use calcap::kernels::{cz_smoothness_probe, kernel_value, size_bound, KernelKind};
use calcap::rect2d::{
    asymptotic_bounds, capacity_formula, max_value, normalized_capacity, unit_sym_potential, vertex_min,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::surface::{default_ranges, rect_surface};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn rect_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let unit = capacity_formula(1.0, 1.0).unwrap_or(f64::NAN);
    out.push(check("unit square formula", (unit - 0.88341).abs() <= 1e-5, format!("{unit}")));

    let worst = (0..1000)
        .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 999.0))
        .map(|r| max_value(r) - 4.0 * vertex_min(r))
        .fold(f64::MIN, f64::max);
    out.push(check("M(r) <= 4 m(r)", worst <= 0.0, format!("max M - 4m = {worst:e}")));

    let mut bad = Vec::new();
    for r in [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
        match asymptotic_bounds(r) {
            Ok(e) if e.contains_value() => {}
            _ => bad.push(r),
        }
    }
    out.push(check("envelopes", bad.is_empty(), format!("outside at {bad:?}")));

    let mut worst_max: f64 = 0.0;
    let mut worst_corner: f64 = 0.0;
    for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let (xr, tr) = default_ranges(r);
        let s = rect_surface(r, KernelKind::P, xr, tr, (101, 101));
        let best = s.rows.iter().copied().fold((0.0, 0.0, f64::MIN), |a, b| if b.2 > a.2 { b } else { a });
        let at_top = best.0 == 0.5 * r && best.1 == 1.0;
        worst_max = worst_max.max(if at_top { (best.2 - max_value(r)).abs() } else { f64::INFINITY });
        let corner = unit_sym_potential(r, 0.0, 0.0);
        worst_corner = worst_corner.max((corner - 0.5 * vertex_min(r)).abs());
    }
    out.push(check("surface maximum at (r/2, 1)", worst_max <= 1e-4, format!("error {worst_max:e}")));
    out.push(check("vertex value m(r)/2", worst_corner <= 1e-12, format!("error {worst_corner:e}")));

    let scale = (capacity_formula(3.0, 2.0).unwrap_or(f64::NAN) - 2.0 * normalized_capacity(1.5)).abs();
    out.push(check("capacity scales with ℓ_t", scale <= 1e-12, format!("error {scale:e}")));
    out
}

fn kernel_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut size_ok = true;
    let mut sym_ok = true;
    for _ in 0..10_000 {
        let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = kernel_value(KernelKind::P, &z);
        let q = kernel_value(KernelKind::PConj, &z);
        let s = kernel_value(KernelKind::PSym, &z);
        size_ok &= [p, q, s].iter().all(|&k| k <= size_bound(&z));
        sym_ok &= (p + q - 2.0 * s).abs() <= 1e-14 * s.max(1e-300);
    }
    let mut out = vec![
        check("size bound", size_ok, "10⁴ points in three dimensions".into()),
        check("P_sym is the mean of P and P*", sym_ok, "10⁴ points".into()),
    ];
    for n in [1, 2] {
        let worst = KernelKind::ALL.iter().map(|&k| cz_smoothness_probe(k, n, 20_000, 11)).fold(0.0, f64::max);
        let cap = a_cz(n).unwrap_or(f64::NAN);
        out.push(check("smoothness constant", worst <= cap, format!("n = {n}: {worst:.3} <= {cap}")));
    }
    out
}

pub fn run_suite(name: &str) -> Result<Vec<Check>, String> {
    match name {
        "rect" => Ok(rect_checks()),
        "kernels" => Ok(kernel_checks()),
        "all" => Ok(rect_checks().into_iter().chain(kernel_checks()).collect()),
        other => Err(format!("unknown suite '{other}' (expected rect, kernels or all)")),
    }
}
