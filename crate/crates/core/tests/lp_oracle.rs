//! The simplex against brute-force vertex enumeration on small programs.

use calcap::lp::Simplex;
use proptest::prelude::*;

/// Solves the square system by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if m < k {
        return vec![];
    }
    let mut out = combinations(m - 1, k);
    for mut c in combinations(m - 1, k - 1) {
        c.push(m - 1);
        out.push(c);
    }
    out
}

/// Best objective over all vertices of `{A x <= b, 0 <= x <= u}`.
fn vertex_max(c: &[f64], a: &[Vec<f64>], b: &[f64], u: &[f64]) -> f64 {
    let n = c.len();
    let mut planes: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), 0.0));
        planes.push((e, u[j]));
    }
    let mut best = f64::NEG_INFINITY;
    for idx in combinations(planes.len(), n) {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        let Some(x) = solve_square(m, rhs) else { continue };
        let feasible = x.iter().zip(u).all(|(&xi, &ui)| xi >= -1e-9 && xi <= ui + 1e-9)
            && a.iter().zip(b).all(|(row, &bi)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9);
        if feasible {
            best = best.max(x.iter().zip(c).map(|(p, q)| p * q).sum());
        }
    }
    best
}

fn program() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..=4, 1usize..=5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-1.0..2.0f64, n),
            prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.0..3.0f64, -1.0..0.0f64], n), m),
            prop::collection::vec(0.0..4.0f64, m),
            prop::collection::vec(0.0..3.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_vertex_enumeration((c, a, b, u) in program()) {
        let want = vertex_max(&c, &a, &b, &u);
        let mut lp = Simplex::new(c.clone(), u.clone()).unwrap();
        for (row, &bi) in a.iter().zip(&b) {
            lp.add_row(row, bi).unwrap();
        }
        lp.solve().unwrap();
        prop_assert!((lp.objective() - want).abs() <= 1e-8 * (1.0 + want.abs()), "{} vs {}", lp.objective(), want);
    }

    #[test]
    fn incremental_rows_agree((c, a, b, u) in program(), split in 0usize..5) {
        let want = vertex_max(&c, &a, &b, &u);
        let mut lp = Simplex::new(c.clone(), u.clone()).unwrap();
        let split = split.min(a.len());
        for (row, &bi) in a.iter().zip(&b).take(split) {
            lp.add_row(row, bi).unwrap();
        }
        lp.solve().unwrap();
        for (row, &bi) in a.iter().zip(&b).skip(split) {
            lp.add_row(row, bi).unwrap();
            lp.solve().unwrap();
        }
        let x = lp.solution();
        for (row, &bi) in a.iter().zip(&b) {
            prop_assert!(row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-8);
        }
        prop_assert!((lp.objective() - want).abs() <= 1e-8 * (1.0 + want.abs()));
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let n = 40;
    let c: Vec<f64> = (0..n).map(|j| 1.0 + (j % 7) as f64 * 0.1).collect();
    let build = || {
        let mut lp = Simplex::new(c.clone(), vec![5.0; n]).unwrap();
        for i in 0..60 {
            let row: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + ((i * 31 + j * 17) % 23) as f64)).collect();
            lp.add_row(&row, 1.0 + (i % 3) as f64).unwrap();
        }
        lp.solve().unwrap();
        lp.solution()
    };
    let a = build();
    let b = build();
    assert_eq!(a, b);
}
