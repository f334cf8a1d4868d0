use std::io::Write;
use std::path::Path;

use calcap::kernels::KernelKind;
use calcap::rect2d::{unit_potential, unit_sym_potential};

/// Values on a `w x h` grid, rows ordered by `x` then `t`.
pub struct Surface {
    pub rows: Vec<(f64, f64, f64)>,
}

fn axis(range: (f64, f64), count: usize) -> Vec<f64> {
    let span = range.1 - range.0;
    (0..count).map(|k| range.0 + span * k as f64 / (count - 1) as f64).collect()
}

/// Default window: `x ∈ [-r/2, 3r/2]`, `t ∈ [-1/2, 5/2]`. With an odd node
/// count per axis the top centre `(r/2, 1)` is a node.
pub fn default_ranges(r: f64) -> ((f64, f64), (f64, f64)) {
    ((-0.5 * r, 1.5 * r), (-0.5, 2.5))
}

/// Potential of Lebesgue measure on `[0, r] x [0, 1]`.
pub fn rect_surface(r: f64, kind: KernelKind, x_range: (f64, f64), t_range: (f64, f64), grid: (usize, usize)) -> Surface {
    let xs = axis(x_range, grid.0);
    let ts = axis(t_range, grid.1);
    let mut rows = Vec::with_capacity(xs.len() * ts.len());
    for &x in &xs {
        for &t in &ts {
            let v = match kind {
                KernelKind::P => unit_potential(r, x, t),
                KernelKind::PConj => unit_potential(r, x, 1.0 - t),
                KernelKind::PSym => unit_sym_potential(r, x, t),
            };
            rows.push((x, t, v));
        }
    }
    Surface { rows }
}

/// CSV with header `x,t,value`; shortest round-trip formatting.
pub fn export_surface(surface: &Surface, path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "x,t,value")?;
    for (x, t, v) in &surface.rows {
        writeln!(w, "{x},{t},{v}")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use calcap::rect2d::max_value;

    #[test]
    fn grid_count_and_maximum() {
        let r = 0.5;
        let (xr, tr) = default_ranges(r);
        let s = rect_surface(r, KernelKind::P, xr, tr, (101, 101));
        assert_eq!(s.rows.len(), 10201);
        let best = s.rows.iter().copied().fold((0.0, 0.0, f64::MIN), |a, b| if b.2 > a.2 { b } else { a });
        assert_eq!((best.0, best.1), (0.25, 1.0));
        assert!((best.2 - max_value(r)).abs() < 1e-12);
    }

    #[test]
    fn rows_are_lexicographic() {
        let s = rect_surface(2.0, KernelKind::PSym, (-1.0, 3.0), (-1.0, 2.0), (7, 5));
        for w in s.rows.windows(2) {
            assert!((w[0].0, w[0].1) < (w[1].0, w[1].1));
        }
    }
}
