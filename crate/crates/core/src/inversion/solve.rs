//! Solvers for `(I + W^2) f = r`: truncated Neumann series and restarted GMRES, both
//! matrix-free in the weighted `L^2(M)` inner product; plus power iteration for `|W|`.

use crate::error::{GeoError, Result};
use crate::grid::InteriorField;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

type Op<'a> = dyn Fn(&InteriorField) -> Result<InteriorField> + 'a;

#[derive(Clone, Debug)]
pub struct NeumannResult {
    pub solution: InteriorField,
    /// `|W^{2j} r|` for `j = 0, 1, ...`.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// Number of terms summed.
    pub terms: usize,
}

/// `f = sum_j (-1)^j W^{2j} r`, stopped once an increment falls below `tol |r|`.
/// Three consecutive growing increments abort with [`GeoError::Divergence`].
pub fn neumann_solve(w2: &Op, r: &InteriorField, weights: &[f64], k_max: usize, tol: f64) -> Result<NeumannResult> {
    let r_norm = r.norm(weights);
    let mut sol = r.clone();
    let mut term = r.clone();
    let mut increments = vec![r_norm];
    let mut ratios = Vec::new();
    let mut growing = 0;
    if r_norm == 0.0 {
        return Ok(NeumannResult { solution: sol, increments, ratios, converged: true, terms: 1 });
    }
    for j in 1..=k_max {
        term = w2(&term)?;
        let inc = term.norm(weights);
        let prev = *increments.last().expect("non-empty");
        let ratio = if prev > 0.0 { inc / prev } else { 0.0 };
        increments.push(inc);
        ratios.push(ratio);
        if inc < tol * r_norm {
            return Ok(NeumannResult { solution: sol, increments, ratios, converged: true, terms: j });
        }
        let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
        sol.axpy(Complex64::new(sign, 0.0), &term);
        growing = if ratio > 1.0 { growing + 1 } else { 0 };
        if growing >= 3 {
            return Err(GeoError::Divergence { iterations: j, ratio });
        }
    }
    Ok(NeumannResult { solution: sol, increments, ratios, converged: false, terms: k_max + 1 })
}

#[derive(Clone, Debug, Serialize)]
pub struct KrylovResult {
    #[serde(skip)]
    pub solution: Option<InteriorField>,
    pub iterations: usize,
    pub converged: bool,
    /// Final relative residual.
    pub residual: f64,
    pub history: Vec<f64>,
}

fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    if b.norm() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}

/// Restarted GMRES for `A x = b`, starting from `x = 0`.
pub fn gmres(a: &Op, b: &InteriorField, weights: &[f64], restart: usize, tol: f64, max_iter: usize) -> Result<KrylovResult> {
    let b_norm = b.norm(weights);
    let mut x = InteriorField::zeros(b.grid, b.nch);
    let mut history = vec![1.0];
    if b_norm == 0.0 {
        return Ok(KrylovResult { solution: Some(x), iterations: 0, converged: true, residual: 0.0, history });
    }
    let m = restart.max(1);
    let mut iters = 0;
    loop {
        let ax = a(&x)?;
        let r = b.sub(&ax);
        let beta = r.norm(weights);
        let rel = beta / b_norm;
        if rel < tol || iters >= max_iter {
            return Ok(KrylovResult { solution: Some(x), iterations: iters, converged: rel < tol, residual: rel, history });
        }
        let mut v: Vec<InteriorField> = Vec::with_capacity(m + 1);
        let mut v0 = r;
        v0.scale(Complex64::new(1.0 / beta, 0.0));
        v.push(v0);
        let mut h = vec![vec![Complex64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![Complex64::new(0.0, 0.0); m];
        let mut g = vec![Complex64::new(0.0, 0.0); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = a(&v[k])?;
            for (i, vi) in v.iter().enumerate() {
                let hik = w.inner(vi, weights);
                h[i][k] = hik;
                w.axpy(-hik, vi);
            }
            let hn = w.norm(weights);
            h[k + 1][k] = Complex64::new(hn, 0.0);
            for i in 0..k {
                let t = h[i][k] * cs[i] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + h[i + 1][k] * cs[i];
                h[i][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = h[k][k] * c + s * h[k + 1][k];
            h[k + 1][k] = Complex64::new(0.0, 0.0);
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            iters += 1;
            k_used = k + 1;
            let rel = g[k + 1].norm() / b_norm;
            history.push(rel);
            if rel < tol || iters >= max_iter || hn == 0.0 {
                break;
            }
            w.scale(Complex64::new(1.0 / hn, 0.0));
            v.push(w);
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![Complex64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.axpy(*yj, &v[j]);
        }
    }
}

/// Power iteration on `W^* W`; returns the estimate of `|W|` in the weighted norm.
pub fn operator_norm_estimate(w: &Op, w_adj: &Op, shape: &InteriorField, weights: &[f64], iters: usize, seed: u64) -> Result<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut x = shape.clone();
    for k in shape.grid.mask_nodes() {
        for z in x.node_mut(k) {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    x.fill_ghosts();
    let mut est: f64 = 0.0;
    for _ in 0..iters.max(1) {
        let n = x.norm(weights);
        if n == 0.0 {
            return Ok(0.0);
        }
        x.scale(Complex64::new(1.0 / n, 0.0));
        let wx = w(&x)?;
        est = wx.norm(weights);
        if est == 0.0 {
            return Ok(0.0);
        }
        x = w_adj(&wx)?;
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DiskGrid;
    use crate::linalg::CVec;

    fn field(grid: DiskGrid) -> InteriorField {
        InteriorField::from_fn(grid, 2, |x, y| {
            CVec::from_slice(&[Complex64::new(1.0 + x, y), Complex64::new(x * y, 0.5 - x)])
        })
    }

    fn weights(grid: DiskGrid) -> Vec<f64> {
        (0..grid.len()).map(|k| if grid.in_mask(k) { grid.h() * grid.h() } else { 0.0 }).collect()
    }

    /// Diagonal test operator `f -> m(x, y) f`.
    fn diag(m: impl Fn(f64, f64) -> Complex64 + Copy) -> impl Fn(&InteriorField) -> Result<InteriorField> {
        move |f: &InteriorField| {
            let g = f.grid;
            Ok(f.map_nodes(f.nch, |k, v| {
                let (x, y) = g.xy(k);
                CVec::from_slice(v).scale(m(x, y))
            }))
        }
    }

    #[test]
    fn neumann_for_contraction() {
        let g = DiskGrid::new(12, 1.0);
        let w = weights(g);
        let r = field(g);
        let op = diag(|x, _| Complex64::new(0.3 + 0.2 * x, 0.1));
        let w2 = |f: &InteriorField| op(&op(f)?);
        let res = neumann_solve(&w2, &r, &w, 100, 1e-12).unwrap();
        assert!(res.converged);
        let back = {
            let mut b = res.solution.clone();
            b.axpy(Complex64::new(1.0, 0.0), &w2(&res.solution).unwrap());
            b
        };
        assert!(back.sub(&r).norm(&w) < 1e-10 * r.norm(&w));
        assert!(res.ratios.iter().all(|&q| q <= 0.25 + 1e-12));
        // W = 0: one term.
        let zero = |f: &InteriorField| Ok(InteriorField::zeros(f.grid, f.nch));
        let z = neumann_solve(&zero, &r, &w, 10, 1e-12).unwrap();
        assert_eq!(z.terms, 1);
        assert_eq!(z.solution, r);
        // Growth is reported as divergence.
        let big = diag(|_, _| Complex64::new(1.5, 0.0));
        let b2 = |f: &InteriorField| big(&big(f)?);
        assert!(matches!(neumann_solve(&b2, &r, &w, 50, 1e-12), Err(GeoError::Divergence { .. })));
    }

    #[test]
    fn gmres_solves_non_normal_systems() {
        let g = DiskGrid::new(12, 1.0);
        let w = weights(g);
        let b = field(g);
        // I + W^2 with W well outside the Neumann regime.
        let op = diag(|x, y| Complex64::new(1.5 * x, 1.2 * y));
        let a = |f: &InteriorField| {
            let mut out = f.clone();
            out.axpy(Complex64::new(1.0, 0.0), &op(&op(f)?)?);
            Ok(out)
        };
        let res = gmres(&a, &b, &w, 30, 1e-10, 500).unwrap();
        assert!(res.converged, "{:?}", res.history.last());
        let x = res.solution.unwrap();
        assert!(a(&x).unwrap().sub(&b).norm(&w) < 1e-9 * b.norm(&w));
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let g = DiskGrid::new(16, 1.0);
        let w = weights(g);
        let m = |x: f64, y: f64| Complex64::new(0.5 + 0.3 * x, 0.2 * y);
        let op = diag(m);
        let adj = diag(move |x, y| m(x, y).conj());
        let est = operator_norm_estimate(&op, &adj, &field(g), &w, 200, 3).unwrap();
        let exact = g.mask_nodes().into_iter().map(|k| m(g.xy(k).0, g.xy(k).1).norm()).fold(0.0, f64::max);
        assert!(est <= exact + 1e-12 && est > 0.97 * exact, "{est} {exact}");
    }
}
