//! Sampling grids and fields: a padded Cartesian grid over the chart disk,
//! the fan-beam torus over the boundary circle, and sphere-bundle samples.

use crate::linalg::CVec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ghost layers on each side of the interior grid.
pub const PAD: usize = 4;

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Weights of the 4-point Lagrange stencil on nodes `0..4` evaluated at `t`.
#[inline]
pub fn lagrange4(t: f64) -> [f64; 4] {
    let (a, b, c, d) = (t, t - 1.0, t - 2.0, t - 3.0);
    [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]
}

/// Cell-centred `n x n` grid on `[-R, R]^2`, stored with `PAD` extra layers per side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskGrid {
    pub n: usize,
    pub radius: f64,
}

impl DiskGrid {
    pub fn new(n: usize, radius: f64) -> Self {
        assert!(n >= 4, "grid needs at least 4 cells per side");
        Self { n, radius }
    }

    pub fn side(&self) -> usize {
        self.n + 2 * PAD
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + (i as f64 - PAD as f64 + 0.5) * self.h()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.side(), idx / self.side())
    }

    pub fn xy(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.coord(i), self.coord(j))
    }

    pub fn in_mask(&self, idx: usize) -> bool {
        let (x, y) = self.xy(idx);
        x * x + y * y < self.radius * self.radius
    }

    pub fn mask_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.in_mask(k)).collect()
    }

    /// Continuous storage index of coordinate `x`.
    fn fractional(&self, x: f64) -> f64 {
        (x + self.radius) / self.h() - 0.5 + PAD as f64
    }

    /// Base index and weights of the cubic stencil around `x`.
    fn stencil(&self, x: f64) -> (usize, [f64; 4]) {
        let p = self.fractional(x);
        let base = (p.floor() as isize - 1).clamp(0, self.side() as isize - 4) as usize;
        (base, lagrange4(p - base as f64))
    }
}

/// Vector-valued (`nch` channels) samples on a [`DiskGrid`], ghosts included.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorField {
    pub grid: DiskGrid,
    pub nch: usize,
    pub data: Vec<Complex64>,
}

impl InteriorField {
    pub fn zeros(grid: DiskGrid, nch: usize) -> Self {
        Self { grid, nch, data: vec![CZERO; grid.len() * nch] }
    }

    /// Samples `f` at every storage node, ghosts included.
    pub fn from_fn(grid: DiskGrid, nch: usize, f: impl Fn(f64, f64) -> CVec) -> Self {
        let mut out = Self::zeros(grid, nch);
        for k in 0..grid.len() {
            let (x, y) = grid.xy(k);
            out.node_mut(k).copy_from_slice(f(x, y).as_slice());
        }
        out
    }

    /// Samples `f` inside the disk only, then extrapolates ghosts.
    pub fn from_fn_masked(grid: DiskGrid, nch: usize, f: impl Fn(f64, f64) -> CVec) -> Self {
        let mut out = Self::zeros(grid, nch);
        for k in grid.mask_nodes() {
            let (x, y) = grid.xy(k);
            out.node_mut(k).copy_from_slice(f(x, y).as_slice());
        }
        out.fill_ghosts();
        out
    }

    pub fn node(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.nch..(k + 1) * self.nch]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.nch..(k + 1) * self.nch]
    }

    pub fn node_vec(&self, k: usize) -> CVec {
        CVec::from_slice(self.node(k))
    }

    /// Replaces every non-mask value by polynomial extrapolation from the disk,
    /// layer by layer outward; nodes beyond `PAD` layers are zeroed.
    pub fn fill_ghosts(&mut self) {
        let g = self.grid;
        let side = g.side() as isize;
        let mut filled: Vec<bool> = (0..g.len()).map(|k| g.in_mask(k)).collect();
        for k in 0..g.len() {
            if !filled[k] {
                self.node_mut(k).fill(CZERO);
            }
        }
        let dirs: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        for _layer in 0..PAD + 1 {
            let mut updates: Vec<(usize, Vec<Complex64>)> = Vec::new();
            for k in 0..g.len() {
                if filled[k] {
                    continue;
                }
                let (i, j) = g.ij(k);
                let (i, j) = (i as isize, j as isize);
                let mut best = 0usize;
                let mut acc = vec![CZERO; self.nch];
                let mut count = 0usize;
                for (di, dj) in dirs {
                    let mut run = 0usize;
                    for s in 1..=4 {
                        let (a, b) = (i + di * s, j + dj * s);
                        if a < 0 || b < 0 || a >= side || b >= side || !filled[(b * side + a) as usize] {
                            break;
                        }
                        run = s as usize;
                    }
                    if run == 0 || run < best {
                        continue;
                    }
                    if run > best {
                        best = run;
                        acc.iter_mut().for_each(|z| *z = CZERO);
                        count = 0;
                    }
                    let at = |s: isize| ((j + dj * s) * side + (i + di * s)) as usize;
                    for c in 0..self.nch {
                        let f1 = self.data[at(1) * self.nch + c];
                        acc[c] += match run {
                            1 => f1,
                            2 => 2.0 * f1 - self.data[at(2) * self.nch + c],
                            3 => 3.0 * f1 - 3.0 * self.data[at(2) * self.nch + c] + self.data[at(3) * self.nch + c],
                            _ => {
                                4.0 * f1 - 6.0 * self.data[at(2) * self.nch + c] + 4.0 * self.data[at(3) * self.nch + c]
                                    - self.data[at(4) * self.nch + c]
                            }
                        };
                    }
                    count += 1;
                }
                if count > 0 {
                    let inv = 1.0 / count as f64;
                    updates.push((k, acc.into_iter().map(|z| z * inv).collect()));
                }
            }
            if updates.is_empty() {
                break;
            }
            for (k, v) in updates {
                self.node_mut(k).copy_from_slice(&v);
                filled[k] = true;
            }
        }
    }

    /// Tensor-product cubic Lagrange interpolation.
    pub fn interp(&self, x: f64, y: f64) -> CVec {
        let mut out = CVec::zeros(self.nch);
        self.interp_into(x, y, &mut out);
        out
    }

    pub fn interp_into(&self, x: f64, y: f64, out: &mut CVec) {
        let (bi, wx) = self.grid.stencil(x);
        let (bj, wy) = self.grid.stencil(y);
        let side = self.grid.side();
        for c in 0..self.nch {
            out[c] = CZERO;
        }
        for (b, wyb) in wy.iter().enumerate() {
            let row = (bj + b) * side + bi;
            for (a, wxa) in wx.iter().enumerate() {
                let w = wyb * wxa;
                let base = (row + a) * self.nch;
                for c in 0..self.nch {
                    out[c] += self.data[base + c] * w;
                }
            }
        }
    }

    /// Fourth-order centred differences in x and y; ghosts of the results are re-extrapolated.
    pub fn gradient(&self) -> (InteriorField, InteriorField) {
        let g = self.grid;
        let side = g.side();
        let inv12h = 1.0 / (12.0 * g.h());
        let mut dx = Self::zeros(g, self.nch);
        let mut dy = Self::zeros(g, self.nch);
        for j in 2..side - 2 {
            for i in 2..side - 2 {
                let k = g.index(i, j);
                for c in 0..self.nch {
                    let f = |a: usize, b: usize| self.data[g.index(a, b) * self.nch + c];
                    dx.data[k * self.nch + c] =
                        (f(i - 2, j) - 8.0 * f(i - 1, j) + 8.0 * f(i + 1, j) - f(i + 2, j)) * inv12h;
                    dy.data[k * self.nch + c] =
                        (f(i, j - 2) - 8.0 * f(i, j - 1) + 8.0 * f(i, j + 1) - f(i, j + 2)) * inv12h;
                }
            }
        }
        dx.fill_ghosts();
        dy.fill_ghosts();
        (dx, dy)
    }

    /// Centred differences without ghost refill; callers that sampled analytically
    /// on the full padded grid keep accuracy at the disk edge.
    pub fn gradient_raw(&self) -> (InteriorField, InteriorField) {
        let g = self.grid;
        let side = g.side();
        let inv12h = 1.0 / (12.0 * g.h());
        let mut dx = Self::zeros(g, self.nch);
        let mut dy = Self::zeros(g, self.nch);
        for j in 2..side - 2 {
            for i in 2..side - 2 {
                let k = g.index(i, j);
                for c in 0..self.nch {
                    let f = |a: usize, b: usize| self.data[g.index(a, b) * self.nch + c];
                    dx.data[k * self.nch + c] =
                        (f(i - 2, j) - 8.0 * f(i - 1, j) + 8.0 * f(i + 1, j) - f(i + 2, j)) * inv12h;
                    dy.data[k * self.nch + c] =
                        (f(i, j - 2) - 8.0 * f(i, j - 1) + 8.0 * f(i, j + 1) - f(i, j + 2)) * inv12h;
                }
            }
        }
        (dx, dy)
    }

    pub fn map_nodes(&self, nch_out: usize, f: impl Fn(usize, &[Complex64]) -> CVec) -> Self {
        let mut out = Self::zeros(self.grid, nch_out);
        for k in self.grid.mask_nodes() {
            out.node_mut(k).copy_from_slice(f(k, self.node(k)).as_slice());
        }
        out.fill_ghosts();
        out
    }

    pub fn scale(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn axpy(&mut self, a: Complex64, x: &InteriorField) {
        for (y, x) in self.data.iter_mut().zip(&x.data) {
            *y += a * x;
        }
    }

    pub fn sub(&self, o: &InteriorField) -> InteriorField {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), o);
        out
    }

    /// Weighted inner product over mask nodes, `weights` indexed by storage node.
    pub fn inner(&self, o: &InteriorField, weights: &[f64]) -> Complex64 {
        let mut s = CZERO;
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for c in 0..self.nch {
                s += self.data[k * self.nch + c] * o.data[k * self.nch + c].conj() * w;
            }
        }
        s
    }

    pub fn norm(&self, weights: &[f64]) -> f64 {
        self.inner(self, weights).re.max(0.0).sqrt()
    }

    pub fn max_abs_masked(&self) -> f64 {
        self.grid
            .mask_nodes()
            .into_iter()
            .flat_map(|k| self.node(k).iter().map(|z| z.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    pub fn mask_vec(&self) -> Vec<Complex64> {
        self.grid.mask_nodes().into_iter().flat_map(|k| self.node(k).to_vec()).collect()
    }

    pub fn from_mask_vec(grid: DiskGrid, nch: usize, v: &[Complex64]) -> Self {
        let mut out = Self::zeros(grid, nch);
        for (m, k) in grid.mask_nodes().into_iter().enumerate() {
            out.node_mut(k).copy_from_slice(&v[m * nch..(m + 1) * nch]);
        }
        out.fill_ghosts();
        out
    }
}

/// Samples on the product of a [`DiskGrid`] with `n_theta` equispaced fiber angles.
#[derive(Clone, Debug)]
pub struct SphereBundleField {
    pub grid: DiskGrid,
    pub n_theta: usize,
    pub nch: usize,
    /// Layout `[node][theta][channel]`.
    pub data: Vec<Complex64>,
}

impl SphereBundleField {
    pub fn zeros(grid: DiskGrid, n_theta: usize, nch: usize) -> Self {
        Self { grid, n_theta, nch, data: vec![CZERO; grid.len() * n_theta * nch] }
    }

    pub fn theta(&self, t: usize) -> f64 {
        2.0 * PI * t as f64 / self.n_theta as f64
    }

    pub fn from_fn(grid: DiskGrid, n_theta: usize, nch: usize, f: impl Fn(f64, f64, f64) -> CVec) -> Self {
        let mut out = Self::zeros(grid, n_theta, nch);
        for k in 0..grid.len() {
            let (x, y) = grid.xy(k);
            for t in 0..n_theta {
                let v = f(x, y, out.theta(t));
                out.at_mut(k, t).copy_from_slice(v.as_slice());
            }
        }
        out
    }

    pub fn at(&self, k: usize, t: usize) -> &[Complex64] {
        let o = (k * self.n_theta + t) * self.nch;
        &self.data[o..o + self.nch]
    }

    pub fn at_mut(&mut self, k: usize, t: usize) -> &mut [Complex64] {
        let o = (k * self.n_theta + t) * self.nch;
        &mut self.data[o..o + self.nch]
    }

    /// Fiber slice at angle index `t` as an interior field.
    pub fn slice(&self, t: usize) -> InteriorField {
        let mut out = InteriorField::zeros(self.grid, self.nch);
        for k in 0..self.grid.len() {
            out.node_mut(k).copy_from_slice(self.at(k, t));
        }
        out
    }

    pub fn set_slice(&mut self, t: usize, f: &InteriorField) {
        for k in 0..self.grid.len() {
            let v = f.node(k).to_vec();
            self.at_mut(k, t).copy_from_slice(&v);
        }
    }
}

/// Fan-beam parametrisation of the boundary of the unit sphere bundle.
///
/// `beta` is the boundary angle and `omega` the direction angle measured
/// counter-clockwise from the inward normal, so the chart direction angle is
/// `beta + pi + omega`. Nodes `omega_j = -pi + (j + 1/2) d_omega` avoid tangency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanBeamGrid {
    pub n_beta: usize,
    pub n_omega: usize,
    pub radius: f64,
}

impl FanBeamGrid {
    pub fn new(n_beta: usize, n_omega: usize, radius: f64) -> Self {
        assert!(n_omega % 4 == 0 && n_omega >= 8, "n_omega must be a multiple of 4");
        assert!(n_beta >= 4);
        Self { n_beta, n_omega, radius }
    }

    pub fn len(&self) -> usize {
        self.n_beta * self.n_omega
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn d_beta(&self) -> f64 {
        2.0 * PI / self.n_beta as f64
    }

    pub fn d_omega(&self) -> f64 {
        2.0 * PI / self.n_omega as f64
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.d_beta() * i as f64
    }

    pub fn omega(&self, j: usize) -> f64 {
        -PI + (j as f64 + 0.5) * self.d_omega()
    }

    pub fn theta(&self, i: usize, j: usize) -> f64 {
        self.beta(i) + PI + self.omega(j)
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        let b = self.beta(i);
        (self.radius * b.cos(), self.radius * b.sin())
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_omega + j
    }

    /// Omega indices of the inward-pointing half.
    pub fn plus_range(&self) -> std::ops::Range<usize> {
        self.n_omega / 4..3 * self.n_omega / 4
    }

    pub fn is_plus(&self, j: usize) -> bool {
        self.plus_range().contains(&j)
    }

    pub fn antipode(&self, j: usize) -> usize {
        (j + self.n_omega / 2) % self.n_omega
    }

    /// Boundary angle and fan angle of a chart direction `theta` at boundary angle `beta`.
    pub fn fan_coords(beta: f64, theta: f64) -> (f64, f64) {
        let b = beta.rem_euclid(2.0 * PI);
        let w = (theta - b).rem_euclid(2.0 * PI) - PI;
        (b, w)
    }
}

/// `nch`-channel samples on every node of a [`FanBeamGrid`]; fields supported
/// on the inward half leave the outward entries unused.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    pub grid: FanBeamGrid,
    pub nch: usize,
    /// Layout `[beta][omega][channel]`.
    pub data: Vec<Complex64>,
}

impl BoundaryField {
    pub fn zeros(grid: FanBeamGrid, nch: usize) -> Self {
        Self { grid, nch, data: vec![CZERO; grid.len() * nch] }
    }

    pub fn at(&self, i: usize, j: usize) -> &[Complex64] {
        let o = self.grid.index(i, j) * self.nch;
        &self.data[o..o + self.nch]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [Complex64] {
        let o = self.grid.index(i, j) * self.nch;
        &mut self.data[o..o + self.nch]
    }

    pub fn vec_at(&self, i: usize, j: usize) -> CVec {
        CVec::from_slice(self.at(i, j))
    }

    fn beta_stencil(&self, beta: f64) -> ([usize; 4], [f64; 4]) {
        let nb = self.grid.n_beta;
        let p = beta.rem_euclid(2.0 * PI) / self.grid.d_beta();
        let i0 = p.floor() as isize - 1;
        let w = lagrange4(p - i0 as f64);
        let idx = [0, 1, 2, 3].map(|s| (i0 + s).rem_euclid(nb as isize) as usize);
        (idx, w)
    }

    /// Periodic cubic interpolation on the whole torus.
    pub fn interp_periodic(&self, beta: f64, omega: f64) -> CVec {
        let no = self.grid.n_omega as isize;
        let (bi, wb) = self.beta_stencil(beta);
        let p = (omega + PI).rem_euclid(2.0 * PI) / self.grid.d_omega() - 0.5;
        let j0 = p.floor() as isize - 1;
        let wo = lagrange4(p - j0 as f64);
        let mut out = CVec::zeros(self.nch);
        for (a, &i) in bi.iter().enumerate() {
            for (b, &w) in wo.iter().enumerate() {
                let j = (j0 + b as isize).rem_euclid(no) as usize;
                let v = self.at(i, j);
                let ww = wb[a] * w;
                for c in 0..self.nch {
                    out[c] += v[c] * ww;
                }
            }
        }
        out
    }

    /// Cubic interpolation using inward-half nodes only (stencils shifted at the edges);
    /// `omega` should lie in `[-pi/2, pi/2]`.
    pub fn interp_plus(&self, beta: f64, omega: f64) -> CVec {
        let r = self.grid.plus_range();
        let (lo, hi) = (r.start as isize, r.end as isize - 4);
        let (bi, wb) = self.beta_stencil(beta);
        let p = (omega + PI) / self.grid.d_omega() - 0.5;
        let j0 = (p.floor() as isize - 1).clamp(lo, hi);
        let wo = lagrange4(p - j0 as f64);
        let mut out = CVec::zeros(self.nch);
        for (a, &i) in bi.iter().enumerate() {
            for (b, &w) in wo.iter().enumerate() {
                let v = self.at(i, (j0 + b as isize) as usize);
                let ww = wb[a] * w;
                for c in 0..self.nch {
                    out[c] += v[c] * ww;
                }
            }
        }
        out
    }

    /// Cubic interpolation using outward-half nodes only; `omega` should lie outside `(-pi/2, pi/2)`.
    pub fn interp_minus(&self, beta: f64, omega: f64) -> CVec {
        let r = self.grid.plus_range();
        let (lo, hi) = (r.start as isize, r.end as isize - 4);
        let (bi, wb) = self.beta_stencil(beta);
        // Shift by pi so the outward half maps onto the inward index range.
        let w = (omega + 2.0 * PI).rem_euclid(2.0 * PI) - PI;
        let p = (w + PI) / self.grid.d_omega() - 0.5;
        let j0 = (p.floor() as isize - 1).clamp(lo, hi);
        let wo = lagrange4(p - j0 as f64);
        let mut out = CVec::zeros(self.nch);
        for (a, &i) in bi.iter().enumerate() {
            for (b, &w) in wo.iter().enumerate() {
                let v = self.at(i, self.grid.antipode((j0 + b as isize) as usize));
                let ww = wb[a] * w;
                for c in 0..self.nch {
                    out[c] += v[c] * ww;
                }
            }
        }
        out
    }

    /// Restriction to the inward half: outward entries set to zero.
    pub fn restrict_plus(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.grid.n_beta {
            for j in 0..self.grid.n_omega {
                if !self.grid.is_plus(j) {
                    out.at_mut(i, j).fill(CZERO);
                }
            }
        }
        out
    }

    /// Weighted inner product; `weights` indexed like nodes (zero to exclude).
    pub fn inner(&self, o: &BoundaryField, weights: &[f64]) -> Complex64 {
        let mut s = CZERO;
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for c in 0..self.nch {
                s += self.data[k * self.nch + c] * o.data[k * self.nch + c].conj() * w;
            }
        }
        s
    }

    pub fn norm(&self, weights: &[f64]) -> f64 {
        self.inner(self, weights).re.max(0.0).sqrt()
    }

    pub fn axpy(&mut self, a: Complex64, x: &BoundaryField) {
        for (y, x) in self.data.iter_mut().zip(&x.data) {
            *y += a * x;
        }
    }

    pub fn scale_all(&mut self, a: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= a);
    }

    pub fn sub(&self, o: &BoundaryField) -> BoundaryField {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), o);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(z: f64) -> CVec {
        CVec::from_slice(&[Complex64::new(z, 0.0)])
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        for t in [0.0, 0.3, 1.5, 2.7, 3.2] {
            let w = lagrange4(t);
            let v: f64 = (0..4).map(|k| w[k] * (k as f64).powi(3)).sum();
            assert!((v - t.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_interp_is_fourth_order() {
        let f = |x: f64, y: f64| (2.0 * x).sin() * (1.5 * y).cos();
        let err = |n: usize| {
            let g = DiskGrid::new(n, 1.0);
            let field = InteriorField::from_fn_masked(g, 1, |x, y| cv(f(x, y)));
            let mut e: f64 = 0.0;
            for k in 0..200 {
                let r = 0.999 * (k as f64 / 200.0).sqrt();
                let a = 2.4 * k as f64;
                let (x, y) = (r * a.cos(), r * a.sin());
                e = e.max((field.interp(x, y)[0].re - f(x, y)).abs());
            }
            e
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 1e-4, "{e2}");
        assert!(e1 / e2 > 5.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn gradient_matches_analytic() {
        let g = DiskGrid::new(64, 1.0);
        let field = InteriorField::from_fn_masked(g, 1, |x, y| cv((x * y).exp()));
        let (dx, _) = field.gradient();
        for k in g.mask_nodes() {
            let (x, y) = g.xy(k);
            assert!((dx.node(k)[0].re - y * (x * y).exp()).abs() < 2e-4);
        }
    }

    #[test]
    fn fan_grid_geometry() {
        let g = FanBeamGrid::new(8, 16, 1.0);
        assert_eq!(g.plus_range(), 4..12);
        for j in g.plus_range() {
            assert!(g.omega(j).cos() > 0.0);
            assert!(!g.is_plus(g.antipode(j)));
        }
        let (b, w) = FanBeamGrid::fan_coords(0.5, 0.5 + PI + 0.2);
        assert!((b - 0.5).abs() < 1e-15 && (w - 0.2).abs() < 1e-12);
    }

    #[test]
    fn boundary_interp_periodic_exact_on_trig() {
        let g = FanBeamGrid::new(64, 64, 1.0);
        let mut f = BoundaryField::zeros(g, 1);
        for i in 0..64 {
            for j in 0..64 {
                f.at_mut(i, j)[0] = Complex64::new((g.beta(i) + 2.0 * g.omega(j)).cos(), 0.0);
            }
        }
        let v = f.interp_periodic(1.234, 3.1);
        assert!((v[0].re - (1.234f64 + 6.2).cos()).abs() < 1e-4);
        let v = f.interp_plus(0.3, 1.5);
        assert!((v[0].re - (0.3f64 + 3.0).cos()).abs() < 1e-3);
    }
}
