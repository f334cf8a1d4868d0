//! Adaptive Gauss–Kronrod (7/15) quadrature in one dimension and its nested
//! tensor extension over boxes.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 2000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Estimate { value: kron * h, error: ((kron - gauss) * h).abs() }
}

struct Piece {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error).then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Adaptive integral of `f` over `[a, b]`, split first at every breakpoint
/// strictly inside the interval. The interval with the largest error estimate
/// is bisected until the summed estimate meets `max(abs_tol, rel_tol |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], opts: &QuadOptions) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut heap = BinaryHeap::new();
    let mut left = lo;
    for &x in cuts.iter().chain(std::iter::once(&hi)) {
        heap.push(Piece { a: left, b: x, est: gk15(&mut f, left, x) });
        left = x;
    }
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.est.value, e + p.est.error));
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(Estimate { value: sign * value, error });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NonConvergent { estimate: error, tol: target });
        }
        let worst = heap.pop().expect("nonempty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // interval exhausted in floating point; accept it as is
            let rest: f64 = heap.iter().map(|p| p.est.error).sum();
            if rest <= target {
                let value: f64 = heap.iter().map(|p| p.est.value).sum::<f64>() + worst.est.value;
                return Ok(Estimate { value: sign * value, error: rest + worst.est.error });
            }
            return Err(Error::NonConvergent { estimate: error, tol: target });
        }
        heap.push(Piece { a: worst.a, b: m, est: gk15(&mut f, worst.a, m) });
        heap.push(Piece { a: m, b: worst.b, est: gk15(&mut f, m, worst.b) });
    }
}

/// Nested adaptive quadrature of `f` over the box `[lo, hi]`. `breaks[i]`
/// lists breakpoints for axis `i`. Degenerate axes give zero.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    breaks: &[Vec<f64>],
    opts: &QuadOptions,
) -> Result<Estimate> {
    let dim = lo.len();
    assert!(dim <= MAX_DIM && hi.len() == dim && breaks.len() == dim);
    if lo.iter().zip(hi).any(|(a, b)| a == b) {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let failure = Cell::new(None);
    let est = nested(f, lo, hi, breaks, opts, 0, [0.0; MAX_DIM], &failure)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

#[allow(clippy::too_many_arguments)]
fn nested<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    breaks: &[Vec<f64>],
    opts: &QuadOptions,
    axis: usize,
    prefix: [f64; MAX_DIM],
    failure: &Cell<Option<Error>>,
) -> Result<Estimate> {
    let dim = lo.len();
    if axis + 1 == dim {
        return integrate(
            |s| {
                let mut c = prefix;
                c[axis] = s;
                f(&c[..dim])
            },
            lo[axis],
            hi[axis],
            &breaks[axis],
            opts,
        );
    }
    let width = hi[axis] - lo[axis];
    let inner = QuadOptions {
        abs_tol: opts.abs_tol / (4.0 * width),
        rel_tol: opts.rel_tol / 4.0,
        max_intervals: opts.max_intervals,
    };
    let mut inner_error = 0.0;
    let outer = integrate(
        |s| {
            let mut c = prefix;
            c[axis] = s;
            match nested(f, lo, hi, breaks, &inner, axis + 1, c, failure) {
                Ok(e) => {
                    inner_error = f64::max(inner_error, e.error);
                    e.value
                }
                Err(e) => {
                    let prev = failure.take();
                    failure.set(Some(prev.unwrap_or(e)));
                    0.0
                }
            }
        },
        lo[axis],
        hi[axis],
        &breaks[axis],
        opts,
    )?;
    Ok(Estimate { value: outer.value, error: outer.error + inner_error * width })
}

/// Gauss–Legendre nodes and weights on `[0, 1]` for `q` in `1..=4`.
pub fn gauss_legendre_unit(q: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (Vec<f64>, Vec<f64>) = match q {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => panic!("Gauss-Legendre order {q} not tabulated"),
    };
    (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let e = integrate(|x| x.powi(5) - 2.0 * x, -1.0, 2.0, &[], &QuadOptions::default()).unwrap();
        assert!((e.value - (64.0 / 6.0 - 1.0 / 6.0 - 3.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_log_singularity() {
        let e = integrate(|x| x.ln(), 0.0, 1.0, &[], &QuadOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 500 })
            .unwrap();
        assert!((e.value + 1.0).abs() < 1e-11);
    }

    #[test]
    fn interior_kink_with_breakpoint() {
        let e = integrate(|x| (x - 0.3).abs(), 0.0, 1.0, &[0.3], &QuadOptions::default()).unwrap();
        assert!((e.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn reversed_limits() {
        let e = integrate(|x| x, 1.0, 0.0, &[], &QuadOptions::default()).unwrap();
        assert!((e.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_integral_of_inverse_distance() {
        // ∫∫_{[0,1]^2} 1/|z| = 2 ln(1+√2)
        let f = |z: &[f64]| 1.0 / (z[0] * z[0] + z[1] * z[1]).sqrt();
        let e = integrate_box(&f, &[0.0, 0.0], &[1.0, 1.0], &[vec![], vec![]], &QuadOptions::default()).unwrap();
        assert!((e.value - 2.0 * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-8);
    }

    #[test]
    fn gauss_legendre_moments() {
        for q in 1..=4 {
            let (x, w) = gauss_legendre_unit(q);
            for p in 0..2 * q {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "q={q} p={p}");
            }
        }
    }
}
