//! Attenuated X-ray transforms of functions and their adjoints, plus the
//! `L^2_mu` and `L^2(M)` pairings used to state adjointness.

use crate::connection::MatrixConnection;
use crate::error::Result;
use crate::grid::{BoundaryField, DiskGrid, FanBeamGrid, InteriorField, SphereBundleField};
use crate::harmonics::{fiber_average, mode, pi0_xperp_minus_av};
use crate::linalg::CVec;
use crate::surface::metric::IsothermalMetric;
use crate::transport::{attenuated_integral, extension_at, Backprojection, Problem};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// `L^2(M)` quadrature weights `e^{2 lambda} h^2` on mask nodes, zero elsewhere.
pub fn interior_weights(metric: &IsothermalMetric, grid: &DiskGrid) -> Vec<f64> {
    let mut w = vec![0.0; grid.len()];
    let h2 = grid.h() * grid.h();
    for k in grid.mask_nodes() {
        let (x, y) = grid.xy(k);
        w[k] = (2.0 * metric.lambda(x, y)).exp() * h2;
    }
    w
}

pub fn pairing_mu(h1: &BoundaryField, h2: &BoundaryField, mu_weights: &[f64]) -> Complex64 {
    h1.inner(h2, mu_weights)
}

pub fn pairing_m(f1: &InteriorField, f2: &InteriorField, weights: &[f64]) -> Complex64 {
    f1.inner(f2, weights)
}

fn with_ghosts(f: &InteriorField) -> InteriorField {
    let mut g = f.clone();
    g.fill_ghosts();
    g
}

/// `I_{A,0} f = I_A[f o pi]` on the inward half of `fan`.
pub fn forward_i0(p: &Problem, fan: FanBeamGrid, f: &InteriorField) -> Result<BoundaryField> {
    let f = with_ghosts(f);
    attenuated_integral(p, fan, &|x, y, _| f.interp(x, y))
}

/// `I_{A,k}(f e^{i k theta})`.
pub fn forward_ik(p: &Problem, fan: FanBeamGrid, f: &InteriorField, k: i64) -> Result<BoundaryField> {
    let f = with_ghosts(f);
    attenuated_integral(p, fan, &|x, y, th| f.interp(x, y).scale(Complex64::from_polar(1.0, k as f64 * th)))
}

/// Largest value on the outermost ring of mask nodes relative to the largest value overall.
/// `I_{A,perp}` inversion assumes this vanishes.
pub fn boundary_ring_defect(f: &InteriorField) -> f64 {
    let g = f.grid;
    let side = g.side();
    let mut ring: f64 = 0.0;
    for k in g.mask_nodes() {
        let (i, j) = g.ij(k);
        let edge = i == 0
            || j == 0
            || i + 1 == side
            || j + 1 == side
            || !g.in_mask(g.index(i - 1, j))
            || !g.in_mask(g.index(i + 1, j))
            || !g.in_mask(g.index(i, j - 1))
            || !g.in_mask(g.index(i, j + 1));
        if edge {
            ring = ring.max(f.node(k).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    let top = f.max_abs_masked();
    if top == 0.0 {
        0.0
    } else {
        ring / top
    }
}

/// `I_{A,perp} f = I_A[(X_perp - A_V)(f o pi)]`, with `X_perp(f o pi) = e^{-lambda}(sin f_x - cos f_y)`.
pub fn forward_iperp(p: &Problem, fan: FanBeamGrid, f: &InteriorField) -> Result<BoundaryField> {
    let f = with_ghosts(f);
    let (fx, fy) = f.gradient();
    let metric = p.metric;
    let conn = p.conn;
    attenuated_integral(p, fan, &|x, y, th| {
        let lam = metric.lambda(x, y);
        let (s, c) = th.sin_cos();
        let v = f.interp(x, y);
        let d = (fx.interp(x, y).scale(Complex64::new(s, 0.0)) - fy.interp(x, y).scale(Complex64::new(c, 0.0)))
            .scale(Complex64::new((-lam).exp(), 0.0));
        d - conn.vertical(x, y, th, lam).mul_vec(&v)
    })
}

/// `pi_0 h_psi`, with the extension by `A` (or `-A^*` when `partner`) of the backprojection.
pub fn pi0_extension(bp: &Backprojection, h: &BoundaryField, partner: bool) -> InteriorField {
    let mut f = fiber_average(&bp.extend(h, partner));
    f.fill_ghosts();
    f
}

/// `pi_0 (X_perp - B_V) h_{psi,B}`, where `B` is the connection of the extension:
/// `A` of the backprojection, or `-A^*` when `partner`.
pub fn pi0_xperp_extension(
    metric: &IsothermalMetric,
    conn_b: &MatrixConnection,
    bp: &Backprojection,
    h: &BoundaryField,
    partner: bool,
) -> InteriorField {
    let u = bp.extend(h, partner);
    pi0_xperp_minus_av(metric, conn_b, &mode(&u, 1), &mode(&u, -1))
}

/// `I_{A,0}^* h = 2 pi pi_0 h_{psi,-A^*}`; `bp` must be built for `A`.
pub fn adjoint_i0(bp: &Backprojection, h: &BoundaryField) -> InteriorField {
    let mut f = pi0_extension(bp, h, true);
    f.scale(Complex64::new(2.0 * PI, 0.0));
    f
}

/// `I_{A,perp}^* h = -2 pi pi_0 (X_perp + A_V^*) h_{psi,-A^*}`; `bp` must be built for `p.conn`.
pub fn adjoint_iperp(p: &Problem, bp: &Backprojection, h: &BoundaryField) -> InteriorField {
    let b = p.conn.neg_adjoint();
    let mut f = pi0_xperp_extension(p.metric, &b, bp, h, true);
    f.scale(Complex64::new(-2.0 * PI, 0.0));
    f
}

/// Cross-check of [`adjoint_iperp`] that differentiates the extension pointwise: the base
/// point and direction are moved along the `X_perp` flow and every perturbed point is
/// traced back to the boundary. Quadrature over `n_theta` fiber angles.
pub fn adjoint_iperp_pointwise(p: &Problem, h: &BoundaryField, grid: DiskGrid, n_theta: usize) -> Result<InteriorField> {
    let na = p.conn.neg_adjoint();
    let q = p.with_conn(&na);
    let n = p.rank();
    let eps = 1e-4;
    let nodes = grid.mask_nodes();
    let vals = nodes
        .par_iter()
        .map(|&k| -> Result<CVec> {
            let (x, y) = grid.xy(k);
            let j = p.metric.jet(x, y).unwrap_or_default();
            let el = (-j.lam).exp();
            let mut acc = CVec::zeros(n);
            for t in 0..n_theta {
                let th = 2.0 * PI * t as f64 / n_theta as f64;
                let (s, c) = th.sin_cos();
                let (dx, dy, dt) = (el * s, -el * c, el * (j.lx * c + j.ly * s));
                let fwd = extension_at(&q, h, x + eps * dx, y + eps * dy, th + eps * dt)?;
                let bwd = extension_at(&q, h, x - eps * dx, y - eps * dy, th - eps * dt)?;
                let d = (fwd - bwd).scale(Complex64::new(0.5 / eps, 0.0));
                let u = extension_at(&q, h, x, y, th)?;
                let av = p.conn.vertical(x, y, th, j.lam).adjoint();
                acc = acc + d + av.mul_vec(&u);
            }
            Ok(acc.scale(Complex64::new(-2.0 * PI / n_theta as f64, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = InteriorField::zeros(grid, n);
    for (&k, v) in nodes.iter().zip(&vals) {
        out.node_mut(k).copy_from_slice(v.as_slice());
    }
    out.fill_ghosts();
    Ok(out)
}

/// Lift of an interior field to the sphere bundle, `f o pi`.
pub fn lift(f: &InteriorField, n_theta: usize) -> SphereBundleField {
    crate::harmonics::synthesize(&[(0, f)], n_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{membership_residual, mu_weights, Sign, Twist};
    use crate::flow::FlowOptions;
    use crate::transport::ScatteringData;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Two Gaussians well inside the disk, negligible on its boundary.
    fn phantom(grid: DiskGrid, shift: f64) -> InteriorField {
        let r = grid.radius;
        InteriorField::from_fn(grid, 2, |x, y| {
            let (x, y) = (x / r, y / r);
            let g = (-((x - 0.2 * shift).powi(2) + (y + 0.1).powi(2)) / 0.04).exp();
            let g2 = (-((x + 0.25).powi(2) + (y - 0.2 * shift).powi(2)) / 0.03).exp();
            CVec::from_slice(&[c(g + 0.3 * g2, 0.2 * g2), c(-0.5 * g2, g)])
        })
    }

    fn boundary_data(fan: FanBeamGrid, seed: f64) -> BoundaryField {
        let mut h = BoundaryField::zeros(fan, 2);
        for i in 0..fan.n_beta {
            for j in fan.plus_range() {
                let (b, w) = (fan.beta(i), fan.omega(j));
                h.at_mut(i, j)[0] = c((b + seed).cos() * (1.0 + w.sin()), (2.0 * b).sin() * w.cos());
                h.at_mut(i, j)[1] = c(0.5 + (seed * b).sin() * w, (b - seed).cos());
            }
        }
        h
    }

    #[test]
    fn flat_constant_gives_chord_lengths() {
        let m = IsothermalMetric::euclidean(1.0);
        let a = MatrixConnection::zero(1);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let grid = DiskGrid::new(16, 1.0);
        let fan = FanBeamGrid::new(8, 16, 1.0);
        let one = InteriorField::from_fn(grid, 1, |_, _| CVec::from_slice(&[c(1.0, 0.0)]));
        let d = forward_i0(&p, fan, &one).unwrap();
        for i in 0..8 {
            for j in fan.plus_range() {
                assert!((d.at(i, j)[0].re - 2.0 * fan.omega(j).cos()).abs() < 1e-9);
            }
        }
        assert_eq!(forward_ik(&p, fan, &one, 0).unwrap(), d);
        let zero = InteriorField::zeros(grid, 1);
        assert!(forward_iperp(&p, fan, &zero).unwrap().data.iter().all(|z| z.norm() == 0.0));
        // Constant boundary data: I^*_0 1 = 2 pi, I^*_perp 1 = 0.
        let bp = Backprojection::build(&p, grid, 16).unwrap();
        let mut h = BoundaryField::zeros(fan, 1);
        h.data.iter_mut().for_each(|z| *z = c(1.0, 0.0));
        let a0 = adjoint_i0(&bp, &h);
        assert!(grid.mask_nodes().into_iter().all(|k| (a0.node(k)[0] - c(2.0 * PI, 0.0)).norm() < 1e-9));
        let ap = adjoint_iperp(&p, &bp, &h);
        assert!(ap.max_abs_masked() < 1e-6);
    }

    #[test]
    fn linearity() {
        let m = IsothermalMetric::from_preset("hyperbolic(-1,0.6)").unwrap();
        let a = MatrixConnection::generic_poly(1, 2);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let grid = DiskGrid::new(24, m.radius);
        let fan = FanBeamGrid::new(16, 16, m.radius);
        let (f, g) = (phantom(grid, 1.0), phantom(grid, -1.0));
        let mut comb = f.clone();
        comb.scale(c(0.3, 1.0));
        comb.axpy(c(-2.0, 0.0), &g);
        let mut expect = forward_i0(&p, fan, &f).unwrap();
        expect.scale_all(c(0.3, 1.0));
        expect.axpy(c(-2.0, 0.0), &forward_i0(&p, fan, &g).unwrap());
        let got = forward_i0(&p, fan, &comb).unwrap();
        let err = got.data.iter().zip(&expect.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn ranges_have_symmetry() {
        let m = IsothermalMetric::from_preset("bump(-0.15,0.5,0.1,-0.1,1)").unwrap();
        let a = MatrixConnection::generic_poly(6, 2);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let grid = DiskGrid::new(48, 1.0);
        let fan = FanBeamGrid::new(96, 96, 1.0);
        let d = ScatteringData::build(&p, fan).unwrap();
        let w = mu_weights(&m, &fan);
        let f = phantom(grid, 1.0);
        let r0 = membership_residual(&forward_i0(&p, fan, &f).unwrap(), &d, Sign::Plus, Twist::Direct, &w);
        let rp = membership_residual(&forward_iperp(&p, fan, &f).unwrap(), &d, Sign::Minus, Twist::Direct, &w);
        assert!(r0 < 0.01 && rp < 0.01, "{r0} {rp}");
    }

    #[test]
    fn phase_relation_for_higher_modes() {
        let m = IsothermalMetric::from_preset("sphere_cap(1,0.6)").unwrap();
        let a = MatrixConnection::generic_poly(8, 2);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let grid = DiskGrid::new(32, m.radius);
        let fan = FanBeamGrid::new(16, 32, m.radius);
        let f = phantom(grid, 0.5);
        let w = mu_weights(&m, &fan);
        for k in -2i64..=2 {
            let direct = forward_ik(&p, fan, &f, k).unwrap();
            let shifted = a.phase_shifted(&m, k as f64);
            let mut via = forward_i0(&p.with_conn(&shifted), fan, &f).unwrap();
            for i in 0..fan.n_beta {
                for j in fan.plus_range() {
                    let q = Complex64::from_polar(1.0, k as f64 * fan.theta(i, j));
                    via.at_mut(i, j).iter_mut().for_each(|z| *z *= q);
                }
            }
            let rel = direct.sub(&via).norm(&w) / direct.norm(&w);
            assert!(rel < 0.01, "k={k} {rel}");
        }
    }

    fn adjoint_gaps(metric: &str, conn: MatrixConnection) -> (f64, f64, f64) {
        let m = IsothermalMetric::from_preset(metric).unwrap();
        let p = Problem::new(&m, &conn, FlowOptions::default());
        let grid = DiskGrid::new(48, m.radius);
        let fan = FanBeamGrid::new(64, 64, m.radius);
        let bp = Backprojection::build(&p, grid, 64).unwrap();
        let wm = mu_weights(&m, &fan);
        let wi = interior_weights(&m, &grid);
        let f = phantom(grid, 1.0);
        let h = boundary_data(fan, 0.7);
        let l0 = pairing_mu(&forward_i0(&p, fan, &f).unwrap(), &h, &wm);
        let r0 = pairing_m(&f, &adjoint_i0(&bp, &h), &wi);
        let lp = pairing_mu(&forward_iperp(&p, fan, &f).unwrap(), &h, &wm);
        let rp = pairing_m(&f, &adjoint_iperp(&p, &bp, &h), &wi);
        let small = InteriorField::from_fn(DiskGrid::new(12, m.radius), 2, |x, y| f.interp(x, y));
        let pw = adjoint_iperp_pointwise(&p, &h, small.grid, 64).unwrap();
        let fd = adjoint_iperp(&p, &bp, &h);
        let mut worst: f64 = 0.0;
        for k in small.grid.mask_nodes() {
            let (x, y) = small.grid.xy(k);
            if x * x + y * y < (0.8 * m.radius).powi(2) {
                worst = worst.max((pw.node_vec(k) - fd.interp(x, y)).norm() / fd.max_abs_masked());
            }
        }
        ((l0 - r0).norm() / l0.norm(), (lp - rp).norm() / lp.norm(), worst)
    }

    #[test]
    fn adjoint_pairings() {
        for (metric, conn) in [
            ("euclidean(1)", MatrixConnection::unitary_poly(3, 2)),
            ("hyperbolic(-1,0.6)", MatrixConnection::generic_poly(4, 2)),
        ] {
            let (e0, ep, cross) = adjoint_gaps(metric, conn);
            assert!(e0 < 0.01 && ep < 0.01 && cross < 0.02, "{metric}: {e0} {ep} {cross}");
        }
    }

    #[test]
    fn adjoints_annihilate_opposite_symmetry() {
        // Range I_{A,0} lies in V_{A,+} and range I_{A,perp} in V_{A,-}; I^*_{-A^*,perp}
        // kills the former and I^*_{-A^*,0} the latter.
        let m = IsothermalMetric::from_preset("sphere_cap(1,0.6)").unwrap();
        let a = MatrixConnection::generic_poly(12, 2);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let grid = DiskGrid::new(40, m.radius);
        let fan = FanBeamGrid::new(64, 64, m.radius);
        let f = phantom(grid, 1.0);
        let hp = forward_i0(&p, fan, &f).unwrap();
        let hm = forward_iperp(&p, fan, &f).unwrap();
        let na = a.neg_adjoint();
        let q = p.with_conn(&na);
        let bpq = Backprojection::build(&q, grid, 64).unwrap();
        let wi = interior_weights(&m, &grid);
        let z0 = adjoint_i0(&bpq, &hm);
        let s0 = adjoint_i0(&bpq, &hp);
        let zp = adjoint_iperp(&q, &bpq, &hp);
        let sp = adjoint_iperp(&q, &bpq, &hm);
        let r0 = z0.norm(&wi) / s0.norm(&wi);
        let rp = zp.norm(&wi) / sp.norm(&wi);
        assert!(r0 < 0.01 && rp < 0.01, "{r0} {rp}");
    }
}
