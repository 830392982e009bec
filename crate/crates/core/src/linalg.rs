//! Stack-allocated complex matrices and vectors for fiber dimensions up to [`MAX_RANK`].
//!
//! Transport ODEs evaluate these at every Runge-Kutta stage, so nothing here allocates.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

pub const MAX_RANK: usize = 4;
const CAP: usize = MAX_RANK * MAX_RANK;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major `n x n` complex matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct CMat {
    n: usize,
    a: [Complex64; CAP],
}

impl std::fmt::Debug for CMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<Vec<Complex64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)]).collect())
            .collect();
        write!(f, "CMat{rows:?}")
    }
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_RANK).contains(&n), "rank {n} outside 1..={MAX_RANK}");
        Self { n, a: [ZERO; CAP] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn scalar(n: usize, s: Complex64) -> Self {
        Self::identity(n).scale(s)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from row-major entries; panics on length mismatch.
    pub fn from_rows(n: usize, entries: &[Complex64]) -> Self {
        assert_eq!(entries.len(), n * n);
        Self::from_fn(n, |i, j| entries[i * n + j])
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = *self;
        for v in m.a[..self.n * self.n].iter_mut() {
            *v *= s;
        }
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        let mut m = *self;
        for v in m.a[..self.n * self.n].iter_mut() {
            *v *= s;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn commutator(&self, o: &Self) -> Self {
        *self * *o - *o * *self
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.a[..self.n * self.n]
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral norm, by power iteration on `M^* M` seeded from every basis vector.
    pub fn op_norm(&self) -> f64 {
        let n = self.n;
        let g = self.adjoint() * *self;
        let mut best: f64 = 0.0;
        for start in 0..n {
            let mut v = CVec::zeros(n);
            v.a[start] = ONE;
            v.a[(start + 1) % n] += Complex64::new(0.3, 0.1);
            let mut est = 0.0;
            for _ in 0..200 {
                let w = g.mul_vec(&v);
                let nw = w.norm();
                if nw == 0.0 {
                    est = 0.0;
                    break;
                }
                let next = nw / v.norm();
                v = w.scale(Complex64::new(1.0 / nw, 0.0));
                if (next - est).abs() <= 1e-15 * next {
                    est = next;
                    break;
                }
                est = next;
            }
            best = best.max(est);
        }
        best.sqrt().min(self.frobenius())
    }

    pub fn max_abs(&self) -> f64 {
        self.a[..self.n * self.n]
            .iter()
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.a[..self.n * self.n].iter().all(|z| *z == ZERO)
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        debug_assert_eq!(self.n, v.n);
        let mut out = CVec::zeros(self.n);
        for i in 0..self.n {
            let mut s = ZERO;
            for j in 0..self.n {
                s += self.a[i * self.n + j] * v.a[j];
            }
            out.a[i] = s;
        }
        out
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` when numerically singular.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        if n == 1 {
            let d = self.a[0];
            return (d.norm() > 1e-300).then(|| Self::scalar(1, ONE / d));
        }
        let mut a = *self;
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(1e-300);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&r, &s| a[(r, col)].norm().total_cmp(&a[(s, col)].norm()))
                .unwrap();
            if a[(piv, col)].norm() <= 1e-14 * scale {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.a.swap(piv * n + j, col * n + j);
                    inv.a.swap(piv * n + j, col * n + j);
                }
            }
            let d = ONE / a[(col, col)];
            for j in 0..n {
                a[(col, j)] *= d;
                inv[(col, j)] *= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    if f != ZERO {
                        for j in 0..n {
                            let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                            a[(r, j)] -= f * ac;
                            inv[(r, j)] -= f * ic;
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    /// Writes `2 n^2` reals (re, im interleaved, row-major).
    pub fn write_reals(&self, out: &mut [f64]) {
        for (k, z) in self.a[..self.n * self.n].iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
    }

    pub fn read_reals(n: usize, src: &[f64]) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n * n {
            m.a[k] = Complex64::new(src[2 * k], src[2 * k + 1]);
        }
        m
    }

    /// `self * rhs` accumulated into `out` as reals; the hot path of the transport ODE.
    pub fn mul_into_reals(lhs_reals: &[f64], rhs: &Self, out: &mut [f64]) {
        let n = rhs.n;
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    let l = Complex64::new(lhs_reals[2 * (i * n + k)], lhs_reals[2 * (i * n + k) + 1]);
                    s += l * rhs.a[k * n + j];
                }
                out[2 * (i * n + j)] = s.re;
                out[2 * (i * n + j) + 1] = s.im;
            }
        }
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.a[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.a[i * self.n + j]
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, o: CMat) -> CMat {
        debug_assert_eq!(self.n, o.n);
        let n = self.n;
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let l = self.a[i * n + k];
                if l == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.a[i * n + j] += l * o.a[k * n + j];
                }
            }
        }
        m
    }
}

impl Add for CMat {
    type Output = CMat;
    fn add(mut self, o: CMat) -> CMat {
        for k in 0..self.n * self.n {
            self.a[k] += o.a[k];
        }
        self
    }
}

impl AddAssign for CMat {
    fn add_assign(&mut self, o: CMat) {
        for k in 0..self.n * self.n {
            self.a[k] += o.a[k];
        }
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(mut self, o: CMat) -> CMat {
        for k in 0..self.n * self.n {
            self.a[k] -= o.a[k];
        }
        self
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_re(-1.0)
    }
}

/// Complex column vector of length `n <= MAX_RANK`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct CVec {
    n: usize,
    a: [Complex64; MAX_RANK],
}

impl CVec {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_RANK).contains(&n));
        Self { n, a: [ZERO; MAX_RANK] }
    }

    pub fn from_slice(v: &[Complex64]) -> Self {
        let mut out = Self::zeros(v.len());
        out.a[..v.len()].copy_from_slice(v);
        out
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.a[..self.n]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut v = *self;
        for z in v.a[..self.n].iter_mut() {
            *z *= s;
        }
        v
    }

    pub fn norm(&self) -> f64 {
        self.a[..self.n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian inner product, conjugate-linear in `other`.
    pub fn dot(&self, other: &Self) -> Complex64 {
        (0..self.n).map(|i| self.a[i] * other.a[i].conj()).sum()
    }
}

impl Index<usize> for CVec {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.a[i]
    }
}

impl IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.a[i]
    }
}

impl Add for CVec {
    type Output = CVec;
    fn add(mut self, o: CVec) -> CVec {
        for i in 0..self.n {
            self.a[i] += o.a[i];
        }
        self
    }
}

impl Sub for CVec {
    type Output = CVec;
    fn sub(mut self, o: CVec) -> CVec {
        for i in 0..self.n {
            self.a[i] -= o.a[i];
        }
        self
    }
}
