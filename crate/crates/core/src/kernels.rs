//! Pointwise kernels: `P`, its conjugate, the symmetric part, the suppressed
//! kernels and the smoothly truncated (regularized) kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_to_set_coords, BoxUnionSet, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// `t / |x̄|^{n+1}` for `t > 0`, zero otherwise.
    #[serde(rename = "P")]
    P,
    /// `P(-x̄)`.
    #[serde(rename = "P_CONJ")]
    PConj,
    /// `|t| / (2 |x̄|^{n+1})`.
    #[serde(rename = "P_SYM")]
    PSym,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::P, KernelKind::PConj, KernelKind::PSym];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p" => Ok(KernelKind::P),
            "p_conj" | "pconj" | "p*" => Ok(KernelKind::PConj),
            "p_sym" | "psym" | "p_sy" => Ok(KernelKind::PSym),
            other => Err(Error::InvalidInput(format!("unknown kernel '{other}'"))),
        }
    }

    /// Weight of the kernel on the unit sphere, as a function of the time
    /// component `w` of the direction.
    pub(crate) fn angular(self, w: f64) -> f64 {
        match self {
            KernelKind::P => w.max(0.0),
            KernelKind::PConj => (-w).max(0.0),
            KernelKind::PSym => 0.5 * w.abs(),
        }
    }
}

/// `(|z|, |z|^{n+1})` with `|z|` never below `|t|`, so that the size bound
/// `K(z) <= |z|^{-n}` also holds in floating point.
#[inline]
fn radius_and_power(z: &[f64]) -> (f64, f64) {
    let n = z.len() - 1;
    let t = z[n];
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let r = r2.sqrt().max(t.abs());
    let den = if n % 2 == 1 { r2.powi((n as i32 + 1) / 2) } else { r2.powi(n as i32 / 2) * r };
    (r, den)
}

/// Kernel value at the displacement `z` (time last). Returns `+inf` at the origin.
#[inline]
pub fn kernel_value(kind: KernelKind, z: &[f64]) -> f64 {
    let t = z[z.len() - 1];
    let (r, den) = radius_and_power(z);
    if r == 0.0 {
        return f64::INFINITY;
    }
    let num = match kind {
        KernelKind::P => {
            if t > 0.0 {
                t
            } else {
                return 0.0;
            }
        }
        KernelKind::PConj => {
            if t < 0.0 {
                -t
            } else {
                return 0.0;
            }
        }
        KernelKind::PSym => t.abs(),
    };
    let v = num / den;
    if kind == KernelKind::PSym {
        0.5 * v
    } else {
        v
    }
}

/// `|z|^{-n}`, rounded consistently with [`kernel_value`].
pub fn size_bound(z: &[f64]) -> f64 {
    let (r, den) = radius_and_power(z);
    r / den
}

pub fn eval_kernel(kind: KernelKind, x: &Point) -> Result<f64> {
    if x.coords().iter().all(|&c| c == 0.0) {
        return Err(Error::KernelSingularity);
    }
    Ok(kernel_value(kind, x.coords()))
}

/// `Λ(x̄) = dist(x̄, F)` for a closed box union `F`.
#[derive(Clone, Debug)]
pub struct LipschitzDist {
    pub set: BoxUnionSet,
}

impl LipschitzDist {
    pub fn new(set: BoxUnionSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(LipschitzDist { set })
    }

    pub fn eval(&self, p: &Point) -> f64 {
        distance_to_set_coords(p.coords(), &self.set)
    }
}

/// `K(x̄ - ȳ) / (1 + K(x̄ - ȳ)^2 Λ(x̄)^n Λ(ȳ)^n)`.
pub fn eval_suppressed(kind: KernelKind, x: &Point, y: &Point, lambda: &LipschitzDist) -> Result<f64> {
    if x == y {
        return Err(Error::KernelSingularity);
    }
    let n = x.n() as i32;
    let k = kernel_value(kind, x.sub(y).coords());
    let lx = lambda.eval(x).powi(n);
    let ly = lambda.eval(y).powi(n);
    Ok(suppress(k, lx, ly))
}

#[inline]
fn suppress(k: f64, lx: f64, ly: f64) -> f64 {
    // lx * ly and ly * lx round identically, which keeps the P_SYM case symmetric.
    k / (1.0 + k * k * (lx * ly))
}

/// Radial cutoff `ψ`: zero inside `inner_radius`, one outside `outer_radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// 3 selects `3u² - 2u³`, 5 selects `6u⁵ - 15u⁴ + 10u³`.
    pub degree: u32,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile { inner_radius: 0.5, outer_radius: 1.0, degree: 3 }
    }
}

impl BumpProfile {
    pub fn new(inner_radius: f64, outer_radius: f64, degree: u32) -> Result<Self> {
        if !(inner_radius > 0.0 && inner_radius < outer_radius && outer_radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bump radii must satisfy 0 < inner < outer, got {inner_radius}, {outer_radius}"
            )));
        }
        if degree != 3 && degree != 5 {
            return Err(Error::InvalidInput(format!("bump degree must be 3 or 5, got {degree}")));
        }
        Ok(BumpProfile { inner_radius, outer_radius, degree })
    }

    fn width(&self) -> f64 {
        self.outer_radius - self.inner_radius
    }

    /// `ψ(s)` for `s = |x̄|`.
    pub fn value(&self, s: f64) -> f64 {
        if s <= self.inner_radius {
            return 0.0;
        }
        if s >= self.outer_radius {
            return 1.0;
        }
        let u = (s - self.inner_radius) / self.width();
        match self.degree {
            3 => u * u * (3.0 - 2.0 * u),
            _ => u * u * u * (u * (6.0 * u - 15.0) + 10.0),
        }
    }

    /// `∫_0^s (1 - ψ(v)) dv`.
    pub fn complement_integral(&self, s: f64) -> f64 {
        if s <= self.inner_radius {
            return s.max(0.0);
        }
        let w = self.width();
        let u = ((s - self.inner_radius) / w).min(1.0);
        // ∫_0^u (1 - step(v)) dv
        let g = match self.degree {
            3 => u - u * u * u + 0.5 * u * u * u * u,
            _ => u - (u.powi(6) - 3.0 * u.powi(5) + 2.5 * u.powi(4)),
        };
        self.inner_radius + w * g
    }

    /// Sup of `|ψ'|` in units of the unscaled radius.
    pub fn gradient_bound(&self) -> f64 {
        let peak = match self.degree {
            3 => 1.5,
            _ => 1.875,
        };
        peak / self.width()
    }
}

/// `K(x̄) ψ(|x̄| / τ)`, zero at the origin.
pub fn eval_regularized(kind: KernelKind, x: &Point, tau: f64, bump: &BumpProfile) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("τ must be positive, got {tau}")));
    }
    Ok(regularized_value(kind, x.coords(), tau, bump))
}

#[inline]
pub fn regularized_value(kind: KernelKind, z: &[f64], tau: f64, bump: &BumpProfile) -> f64 {
    let r = crate::geometry::norm(z);
    let psi = bump.value(r / tau);
    if psi == 0.0 {
        return 0.0;
    }
    kernel_value(kind, z) * psi
}

fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = crate::geometry::norm(&v);
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Draws `x̄` at unit distance from the origin (the kernels are homogeneous,
/// so this loses nothing) and `x̄′` with `|x̄ - x̄′| <= |x̄|/2`. Half of the
/// samples use tiny increments to probe the local gradient.
fn smoothness_pairs<R: Rng>(rng: &mut R, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let x = random_direction(rng, dim);
    let scale = if rng.gen_bool(0.5) { 0.5 * rng.gen::<f64>() } else { 10f64.powf(rng.gen_range(-8.0..-1.0)) };
    let u = random_direction(rng, dim);
    let xp: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + scale * b).collect();
    (x, xp)
}

/// Largest sampled `|K(x̄) - K(x̄′)| |x̄|^{n+1} / |x̄ - x̄′|` over pairs with
/// `|x̄ - x̄′| <= |x̄|/2` (the pole `ȳ` is placed at the origin).
pub fn cz_smoothness_probe(kind: KernelKind, n: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, xp) = smoothness_pairs(&mut rng, n + 1);
        let h = crate::geometry::dist(&x, &xp);
        if h == 0.0 {
            continue;
        }
        let r = crate::geometry::norm(&x);
        let diff = (kernel_value(kind, &x) - kernel_value(kind, &xp)).abs();
        worst = worst.max(diff * r.powi(n as i32 + 1) / h);
    }
    worst
}

/// The same ratio for suppressed kernels `P_Λ(·, ȳ)` in the first variable.
/// Points are drawn around `F` so that `Λ` takes values across scales.
pub fn suppressed_smoothness_probe(
    kind: KernelKind,
    lambda: &LipschitzDist,
    samples: usize,
    seed: u64,
) -> f64 {
    let n = lambda.set.n;
    let bbox = lambda.set.bbox().expect("nonempty set");
    let region = bbox.expand(lambda.set.diam().max(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let y = region.sample(&mut rng);
        let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
        let (u, up) = smoothness_pairs(&mut rng, n + 1);
        let x = Point::from_coords(y.coords().iter().zip(&u).map(|(a, b)| a + scale * b).collect());
        let xp = Point::from_coords(y.coords().iter().zip(&up).map(|(a, b)| a + scale * b).collect());
        let h = x.dist(&xp);
        if h == 0.0 || xp == y {
            continue;
        }
        let a = eval_suppressed(kind, &x, &y, lambda).expect("distinct points");
        let b = eval_suppressed(kind, &xp, &y, lambda).expect("distinct points");
        worst = worst.max((a - b).abs() * x.dist(&y).powi(n as i32 + 1) / h);
    }
    worst
}

/// Regularized smoothness ratio at scale `τ`. `|x̄|` is drawn log-uniformly in
/// `[10^-2 τ, 10^2 τ]` so the cutoff region is sampled at every `τ`.
pub fn regularized_cz_probe(
    kind: KernelKind,
    n: usize,
    tau: f64,
    bump: &BumpProfile,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, xp) = smoothness_pairs(&mut rng, n + 1);
        let s = tau * 10f64.powf(rng.gen_range(-2.0..2.0));
        let x: Vec<f64> = x.iter().map(|c| c * s).collect();
        let xp: Vec<f64> = xp.iter().map(|c| c * s).collect();
        let h = crate::geometry::dist(&x, &xp);
        if h == 0.0 {
            continue;
        }
        let r = crate::geometry::norm(&x);
        let diff = (regularized_value(kind, &x, tau, bump) - regularized_value(kind, &xp, tau, bump)).abs();
        worst = worst.max(diff * r.powi(n as i32 + 1) / h);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisBox;

    #[test]
    fn direct_values() {
        let k = |kind, x, t| eval_kernel(kind, &Point::xt(x, t)).unwrap();
        assert_eq!(k(KernelKind::P, 0.0, -1.0), 0.0);
        assert_eq!(k(KernelKind::P, 0.0, 2.0), 0.5);
        assert_eq!(k(KernelKind::PSym, 1.0, -1.0), 0.25);
        assert_eq!(k(KernelKind::P, 3.0, 4.0), 4.0 / 25.0);
        assert_eq!(k(KernelKind::PConj, 0.0, -2.0), 0.5);
        assert!(matches!(eval_kernel(KernelKind::P, &Point::xt(0.0, 0.0)), Err(Error::KernelSingularity)));
    }

    #[test]
    fn suppressed_reduces_on_f() {
        let f = LipschitzDist::new(BoxUnionSet::single(AxisBox::rect(0.0, 1.0, 0.0, 1.0))).unwrap();
        let x = Point::xt(0.2, 0.9);
        let y = Point::xt(0.7, 0.1);
        for kind in KernelKind::ALL {
            let plain = kernel_value(kind, x.sub(&y).coords());
            assert_eq!(eval_suppressed(kind, &x, &y, &f).unwrap(), plain);
        }
    }

    #[test]
    fn regularized_edges() {
        let b = BumpProfile::default();
        let tau = 0.3;
        assert_eq!(eval_regularized(KernelKind::PSym, &Point::xt(0.0, 0.0), tau, &b).unwrap(), 0.0);
        let far = Point::xt(0.6 * 0.6, 0.6 * 0.8);
        assert_eq!(
            eval_regularized(KernelKind::PSym, &far, tau, &b).unwrap(),
            eval_kernel(KernelKind::PSym, &far).unwrap()
        );
        assert!(eval_regularized(KernelKind::PSym, &far, 0.0, &b).is_err());
    }

    #[test]
    fn bump_profile_shape() {
        for degree in [3, 5] {
            let b = BumpProfile::new(0.5, 1.0, degree).unwrap();
            let mut prev = 0.0;
            for k in 0..=1000 {
                let s = k as f64 * 1.5e-3;
                let v = b.value(s);
                assert!(v >= prev && (0.0..=1.0).contains(&v));
                prev = v;
            }
            // numerical slope never exceeds the declared bound
            let h = 1e-7;
            let slope = (0..1000)
                .map(|k| 0.5 + 0.5 * k as f64 / 1000.0)
                .map(|s| (b.value(s + h) - b.value(s)) / h)
                .fold(0.0, f64::max);
            assert!(slope <= b.gradient_bound() * (1.0 + 1e-6));
            assert!(slope >= b.gradient_bound() * 0.99);
            // complement integral against midpoint sums
            let s = 0.83;
            let m = 200_000;
            let sum: f64 = (0..m).map(|k| 1.0 - b.value((k as f64 + 0.5) * s / m as f64)).sum::<f64>() * s / m as f64;
            assert!((sum - b.complement_integral(s)).abs() < 1e-9);
            assert!((b.complement_integral(5.0) - b.complement_integral(1.0)).abs() < 1e-15);
        }
        assert!(BumpProfile::new(1.0, 0.5, 3).is_err());
    }

    #[test]
    fn gradient_of_p_in_the_plane_is_inverse_square() {
        // |∇P| = 1/|z|^2 on the upper half plane for n = 1
        let h = 1e-6;
        for &(x, t) in &[(0.3, 0.9), (-1.2, 0.4), (0.01, 2.0)] {
            let f = |x: f64, t: f64| kernel_value(KernelKind::P, &[x, t]);
            let gx = (f(x + h, t) - f(x - h, t)) / (2.0 * h);
            let gt = (f(x, t + h) - f(x, t - h)) / (2.0 * h);
            let r2 = x * x + t * t;
            assert!(((gx * gx + gt * gt).sqrt() * r2 - 1.0).abs() < 1e-6);
        }
    }
}
