//! Translation-invariant sums over a lattice of points.
//!
//! Cells are cubes of side `ratio · s` with integer indices, points sit at
//! `a · s`. The contribution of a cell to a point depends only on
//! `a - ratio · idx`, so one table of values per offset serves every pair.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub(crate) const MAX_AXES: usize = 8;
const TABLE_LIMIT: usize = 40_000_000;

/// Integer box of lattice indices, iterated in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct IndexBox {
    pub lo: Vec<i64>,
    pub ext: Vec<usize>,
}

impl IndexBox {
    pub fn new(lo: Vec<i64>, hi: &[i64]) -> Self {
        let ext = lo.iter().zip(hi).map(|(a, b)| (b - a + 1).max(0) as usize).collect();
        IndexBox { lo, ext }
    }

    pub fn dim(&self) -> usize {
        self.ext.len()
    }

    pub fn len(&self) -> usize {
        self.ext.iter().product()
    }

    pub fn hi(&self) -> Vec<i64> {
        self.lo.iter().zip(&self.ext).map(|(l, e)| l + *e as i64 - 1).collect()
    }

    pub fn at(&self, mut k: usize) -> [i64; MAX_AXES] {
        let mut out = [0; MAX_AXES];
        for i in (0..self.ext.len()).rev() {
            out[i] = self.lo[i] + (k % self.ext[i]) as i64;
            k /= self.ext[i];
        }
        out
    }

    pub fn flat(&self, a: &[i64]) -> Option<usize> {
        let mut k = 0usize;
        for i in 0..self.ext.len() {
            let v = a[i] - self.lo[i];
            if v < 0 || v as usize >= self.ext[i] {
                return None;
            }
            k = k * self.ext[i] + v as usize;
        }
        Some(k)
    }

    pub fn strides(&self) -> Vec<i64> {
        let mut s = vec![1i64; self.ext.len()];
        for i in (0..self.ext.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.ext[i + 1] as i64;
        }
        s
    }
}

/// Values `f(a - ratio · idx)` for every point `a` and cell `idx`.
pub(crate) struct Convolution {
    pub points: IndexBox,
    point_strides: Vec<i64>,
    values: Vec<f64>,
    cell_shift: Vec<i64>,
    base: i64,
}

impl Convolution {
    pub fn new<F>(points: IndexBox, cells: &[Vec<i64>], ratio: i64, f: F) -> Result<Self>
    where
        F: Fn(&[i64]) -> Result<f64> + Sync,
    {
        let d = points.dim();
        if cells.is_empty() {
            return Err(Error::EmptySet);
        }
        let plo = &points.lo;
        let phi = points.hi();
        let ilo: Vec<i64> = (0..d).map(|i| cells.iter().map(|c| c[i]).min().unwrap()).collect();
        let ihi: Vec<i64> = (0..d).map(|i| cells.iter().map(|c| c[i]).max().unwrap()).collect();
        let klo: Vec<i64> = (0..d).map(|i| plo[i] - ratio * ihi[i]).collect();
        let khi: Vec<i64> = (0..d).map(|i| phi[i] - ratio * ilo[i]).collect();
        let keys = IndexBox::new(klo, &khi);
        let len = keys.len();
        if len > TABLE_LIMIT {
            return Err(Error::InvalidInput(format!(
                "lattice table needs {len} entries (limit {TABLE_LIMIT}); coarsen the lattice or shrink the window"
            )));
        }
        let values: Vec<f64> = (0..len).into_par_iter().map(|k| f(&keys.at(k)[..d])).collect::<Result<_>>()?;
        let strides = keys.strides();
        let cell_shift = cells.iter().map(|c| c.iter().zip(&strides).map(|(k, s)| ratio * k * s).sum()).collect();
        // flat(a - ratio idx) = Σ (a_i - klo_i) s_i - Σ ratio idx_i s_i
        let base = -keys.lo.iter().zip(&strides).map(|(l, s)| l * s).sum::<i64>();
        Ok(Convolution { points, point_strides: strides, values, cell_shift, base })
    }

    fn point_flat(&self, k: usize) -> i64 {
        let a = self.points.at(k);
        self.base + a[..self.points.dim()].iter().zip(&self.point_strides).map(|(x, s)| x * s).sum::<i64>()
    }

    /// Value of every cell at point `k`.
    pub fn row(&self, k: usize) -> Vec<f64> {
        let pf = self.point_flat(k);
        self.cell_shift.iter().map(|cs| self.values[(pf - cs) as usize]).collect()
    }

    /// `Σ_c w_c f(a_k - ratio idx_c)` at the points `ks`.
    pub fn apply_at(&self, weights: &[f64], ks: &[usize]) -> Vec<f64> {
        let active: Vec<(i64, f64)> =
            self.cell_shift.iter().zip(weights).filter(|(_, &w)| w != 0.0).map(|(&c, &w)| (c, w)).collect();
        ks.par_iter()
            .map(|&k| {
                let pf = self.point_flat(k);
                active.iter().map(|(cs, w)| w * self.values[(pf - cs) as usize]).sum()
            })
            .collect()
    }

    pub fn apply(&self, weights: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.points.len()).collect();
        self.apply_at(weights, &all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_box_roundtrip() {
        let b = IndexBox::new(vec![-2, 3], &[1, 5]);
        assert_eq!(b.len(), 12);
        for k in 0..b.len() {
            assert_eq!(b.flat(&b.at(k)[..2]), Some(k));
        }
        assert_eq!(b.flat(&[2, 3]), None);
        assert_eq!(b.hi(), vec![1, 5]);
    }

    #[test]
    fn matches_direct_sum() {
        let points = IndexBox::new(vec![-3, -1], &[4, 6]);
        let cells = vec![vec![0, 0], vec![1, 0], vec![-1, 2]];
        let ratio = 2;
        let f = |z: &[i64]| Ok((z[0] * 7 + z[1] * z[1]) as f64);
        let conv = Convolution::new(points.clone(), &cells, ratio, f).unwrap();
        let w = [0.5, -1.0, 2.0];
        let got = conv.apply(&w);
        for k in 0..points.len() {
            let a = points.at(k);
            let want: f64 = cells
                .iter()
                .zip(&w)
                .map(|(c, wc)| wc * f(&[a[0] - ratio * c[0], a[1] - ratio * c[1]]).unwrap())
                .sum();
            assert_eq!(got[k], want);
            let row = conv.row(k);
            assert_eq!(row.iter().zip(&w).map(|(r, wc)| r * wc).sum::<f64>(), want);
        }
    }
}
