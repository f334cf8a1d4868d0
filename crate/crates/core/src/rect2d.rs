//! Closed-form potentials of a rectangle in the plane and the capacity
//! formula built on them.
//!
//! `R₀ = [0, r] x [0, 1]` carries Lebesgue measure `μ`. `P*μ` vanishes for
//! `t <= 0`; for `0 < t <= 1` and `t > 1` it has the explicit expressions
//! below, obtained by integrating `t/(x²+t²)` over the rectangle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// `(c/2) ln(1 + a/c²)`, extended by 0 at `c = 0`.
#[inline]
fn half_log_term(c: f64, a: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        0.5 * c * (a / (c * c)).ln_1p()
    }
}

/// `(c/2) ln((c² + t²) / (c² + (t-1)²))` for `t > 1`.
#[inline]
fn half_log_ratio(c: f64, t: f64) -> f64 {
    let s = t - 1.0;
    0.5 * c * ((2.0 * t - 1.0) / (c * c + s * s)).ln_1p()
}

/// `atan(c / s)` for `s > 0`.
#[inline]
fn angle(c: f64, s: f64) -> f64 {
    (c / s).atan()
}

/// `P*μ(x, t)` for Lebesgue measure on `[0, r] x [0, 1]`.
///
/// On `0 < t <= 1` the pair `π/2 sgn(x) - atan(t/x)` equals `atan(x/t)`,
/// which is also its limit at `x = 0`; the same identity removes the
/// `x = 0` case on `t > 1`.
pub fn unit_potential(r: f64, x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let y = r - x;
    if t <= 1.0 {
        let t2 = t * t;
        half_log_term(x, t2) + half_log_term(y, t2) + t * (angle(x, t) + angle(y, t))
    } else {
        let s = t - 1.0;
        half_log_ratio(x, t) + half_log_ratio(y, t) + t * (angle(x, t) + angle(y, t)) - s * (angle(x, s) + angle(y, s))
    }
}

/// `P_sym*μ(x, t) = ½ (P*μ(x, t) + P*μ(x, 1 - t))`.
pub fn unit_sym_potential(r: f64, x: f64, t: f64) -> f64 {
    0.5 * (unit_potential(r, x, t) + unit_potential(r, x, 1.0 - t))
}

/// `M(r) = (r/2) ln(1 + 4/r²) + 2 atan(r/2)`, the value of `P*μ` at `(r/2, 1)`.
pub fn max_value(r: f64) -> f64 {
    0.5 * r * (4.0 / (r * r)).ln_1p() + 2.0 * (0.5 * r).atan()
}

/// `m(r) = (r/2) ln(1 + 1/r²) + atan(r)`; `P_sym*μ` equals `m(r)/2` at each vertex.
pub fn vertex_min(r: f64) -> f64 {
    0.5 * r * (1.0 / (r * r)).ln_1p() + r.atan()
}

/// A rectangle `[0, ℓ_x] x [0, ℓ_t]` with `r = ℓ_x / ℓ_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRect {
    pub r: f64,
    pub lx: f64,
    pub lt: f64,
}

impl NormalizedRect {
    pub fn new(lx: f64, lt: f64) -> Result<Self> {
        check_sides(lx, lt)?;
        Ok(NormalizedRect { r: lx / lt, lx, lt })
    }

    /// The normalized rectangle `[0, r] x [0, 1]` itself.
    pub fn unit(r: f64) -> Result<Self> {
        Self::new(r, 1.0)
    }
}

fn check_sides(lx: f64, lt: f64) -> Result<()> {
    if !(lx > 0.0 && lt > 0.0 && lx.is_finite() && lt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "rectangle sides must be positive and finite, got ℓ_x = {lx}, ℓ_t = {lt}; \
             flat rectangles are handled by the capacity estimators"
        )));
    }
    Ok(())
}

/// `P*μ` at `p` for Lebesgue measure on `[0, ℓ_x] x [0, ℓ_t]`.
pub fn rect_potential(rect: &NormalizedRect, p: &Point) -> f64 {
    rect.lt * unit_potential(rect.r, p.spatial()[0] / rect.lt, p.time() / rect.lt)
}

/// `P_sym*μ` at `p` for Lebesgue measure on `[0, ℓ_x] x [0, ℓ_t]`.
pub fn rect_sym_potential(rect: &NormalizedRect, p: &Point) -> f64 {
    rect.lt * unit_sym_potential(rect.r, p.spatial()[0] / rect.lt, p.time() / rect.lt)
}

/// `ℓ_t [½ ln(1 + ℓ_t²/ℓ_x²) + (ℓ_t/ℓ_x) atan(ℓ_x/ℓ_t)]^{-1}`, i.e. `ℓ_t r / m(r)`.
pub fn capacity_formula(lx: f64, lt: f64) -> Result<f64> {
    check_sides(lx, lt)?;
    let q = lt / lx;
    Ok(lt / (0.5 * (q * q).ln_1p() + q * (lx / lt).atan()))
}

/// `r / m(r)`, the formula value for `ℓ_t = 1`.
pub fn normalized_capacity(r: f64) -> f64 {
    r / vertex_min(r)
}

/// The bracket `[ℓ_t r / M(r), 2 ℓ_t r / m(r)]` obtained from Lebesgue measure
/// on the rectangle (admissible after division by `M(r)`) and from the vertex
/// minimum of its symmetric potential.
pub fn rect_bracket(lx: f64, lt: f64) -> Result<(f64, f64)> {
    let rect = NormalizedRect::new(lx, lt)?;
    let r = rect.r;
    Ok((lt * r / max_value(r), 2.0 * lt * r / vertex_min(r)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `r <= 1/2`: `[1/(3|ln r|), 1/|ln r|]`.
    Thin,
    /// `r >= 1`: `[r/2, r]`.
    Wide,
    /// `1/2 < r < 1`: hull of the two neighbouring envelopes.
    Transition,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub lower: f64,
    pub upper: f64,
    pub regime: Regime,
    pub value: f64,
}

impl Envelope {
    pub fn contains_value(&self) -> bool {
        self.lower <= self.value && self.value <= self.upper
    }
}

/// Two-sided envelope for `r / m(r)` together with the value itself.
pub fn asymptotic_bounds(r: f64) -> Result<Envelope> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("r must be positive, got {r}")));
    }
    let value = normalized_capacity(r);
    let l = r.ln().abs();
    let (lower, upper, regime) = if r <= 0.5 {
        (1.0 / (3.0 * l), 1.0 / l, Regime::Thin)
    } else if r >= 1.0 {
        (0.5 * r, r, Regime::Wide)
    } else {
        ((1.0 / (3.0 * l)).min(0.5 * r), (1.0 / l).max(r), Regime::Transition)
    };
    Ok(Envelope { lower, upper, regime, value })
}
