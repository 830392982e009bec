//! Numerical identities used as self-tests: Jacobi-field structure, exit-time
//! variation, Santalo agreement, the explicit `SU(2)` example and the range
//! factorizations.

use crate::boundary::{mu_weights, range_p, Sign};
use crate::connection::{MatrixConnection, Su2Example};
use crate::error::Result;
use crate::flow::{Augment, Flow, FlowOptions};
use crate::grid::{BoundaryField, DiskGrid, FanBeamGrid, InteriorField};
use crate::harmonics::{mu_minus, mu_plus};
use crate::linalg::CVec;
use crate::surface::frame::{perp_field, FrameConvention};
use crate::surface::metric::IsothermalMetric;
use crate::surface::santalo::{santalo_boundary, santalo_interior};
use crate::transport::{duality_residual, Backprojection, Problem};
use crate::xray::{adjoint_i0, adjoint_iperp, forward_i0, forward_iperp};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Random interior phase points `(x, y, theta)` with radius below `0.95 R`.
pub fn random_phase_points(radius: f64, count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = 0.95 * radius * rng.gen::<f64>().sqrt();
            let a = rng.gen::<f64>() * 2.0 * PI;
            (r * a.cos(), r * a.sin(), rng.gen::<f64>() * 2.0 * PI)
        })
        .collect()
}

/// Largest `|b1 c2 - b2 c1 - 1|` over `samples` times on each trace.
pub fn wronskian_residual(metric: &IsothermalMetric, opts: FlowOptions, starts: &[(f64, f64, f64)], samples: usize) -> Result<f64> {
    let flow = Flow::new(metric, None, Augment::JACOBI, opts);
    let mut ws = flow.workspace();
    let mut worst: f64 = 0.0;
    for &(x, y, th) in starts {
        let tau = flow.trace(&mut ws, x, y, th)?;
        for k in 0..=samples {
            let s = flow.state(&mut ws, tau * k as f64 / samples as f64);
            worst = worst.max((s.b1 * s.c2 - s.b2 * s.c1 - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Largest `|b2(phi_s, t - s) - (b2(t) b1(s) - b1(t) b2(s))|` for random `s < t`.
pub fn cocycle_residual(metric: &IsothermalMetric, opts: FlowOptions, starts: &[(f64, f64, f64)], seed: u64) -> Result<f64> {
    let flow = Flow::new(metric, None, Augment::JACOBI, opts);
    let mut ws = flow.workspace();
    let mut ws2 = flow.workspace();
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for &(x, y, th) in starts {
        let tau = flow.trace(&mut ws, x, y, th)?;
        let (mut s, mut t) = (rng.gen::<f64>() * tau, rng.gen::<f64>() * tau);
        if s > t {
            std::mem::swap(&mut s, &mut t);
        }
        let (ss, st) = (flow.state(&mut ws, s), flow.state(&mut ws, t));
        flow.trace(&mut ws2, ss.x, ss.y, ss.th)?;
        let inner = flow.state(&mut ws2, t - s).b2;
        worst = worst.max((inner - (st.b2 * ss.b1 - st.b1 * ss.b2)).abs());
    }
    Ok(worst)
}

/// Largest `|b2(tau) X_perp tau - b1(tau) V tau|` with both derivatives of the exit time by
/// centred differences of step `eps`.
pub fn exit_time_identity_residual(
    metric: &IsothermalMetric,
    opts: FlowOptions,
    starts: &[(f64, f64, f64)],
    eps: f64,
) -> Result<f64> {
    let flow = Flow::new(metric, None, Augment::JACOBI, opts);
    let mut ws = flow.workspace();
    let mut worst: f64 = 0.0;
    for &(x, y, th) in starts {
        let tau = flow.trace(&mut ws, x, y, th)?;
        let s = flow.state(&mut ws, tau);
        let d = perp_field(metric, x, y, th, FrameConvention::default());
        let mut exit = |a: f64, b: f64, c: f64| flow.trace(&mut ws, a, b, c);
        let xp = (exit(x + eps * d[0], y + eps * d[1], th + eps * d[2])?
            - exit(x - eps * d[0], y - eps * d[1], th - eps * d[2])?)
            / (2.0 * eps);
        let v = (exit(x, y, th + eps)? - exit(x, y, th - eps)?) / (2.0 * eps);
        worst = worst.max((s.b2 * xp - s.b1 * v).abs());
    }
    Ok(worst)
}

/// Largest `|U_A^* U_{-A^*} - I|` over `starts`.
pub fn duality_max(p: &Problem, starts: &[(f64, f64, f64)]) -> Result<f64> {
    starts.iter().try_fold(0.0f64, |m, &(x, y, th)| Ok(m.max(duality_residual(p, x, y, th)?)))
}

/// Relative gap between the boundary and interior sides of Santalo's formula.
pub fn santalo_gap(
    metric: &IsothermalMetric,
    fan: &FanBeamGrid,
    opts: FlowOptions,
    f: impl Fn(f64, f64, f64) -> f64 + Sync + Copy,
) -> Result<f64> {
    let lhs = santalo_boundary(metric, fan, opts, f)?;
    let rhs = santalo_interior(metric, 48, 32, f);
    Ok((lhs - rhs).abs() / rhs.abs())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Su2Residuals {
    /// `sup |h(i e^{i phi})|` on the boundary circle.
    pub boundary_trace: f64,
    /// `sup |mu_-(h_1)|` over the grid mask.
    pub mu_minus_h1: f64,
    pub mu_plus_hm1: f64,
    /// `sup |F(e^{i phi}) - diag(e^{-2 i phi}, e^{2 i phi})|`.
    pub boundary_map: f64,
}

/// Residuals of the `SU(2)` example on the unit disk: `h = h_z dz + h_zbar dzbar` with
/// `h_z = F e_1`, `h_zbar = e_1`, so that `h_1 = h_z e^{i theta}`, `h_{-1} = h_zbar e^{-i theta}`.
pub fn su2_residuals(n_grid: usize, n_boundary: usize) -> Su2Residuals {
    let ex = Su2Example;
    let metric = IsothermalMetric::euclidean(1.0);
    let conn = MatrixConnection::su2_example();
    let mut trace: f64 = 0.0;
    let mut map: f64 = 0.0;
    for k in 0..n_boundary {
        let phi = 2.0 * PI * k as f64 / n_boundary as f64;
        let (x, y) = (phi.cos(), phi.sin());
        let (hz, hzb) = ex.h(x, y);
        // Tangent vector i e^{i phi}: dz -> i e^{i phi}, dzbar -> -i e^{-i phi}.
        let v = hz.scale(Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, phi))
            + hzb.scale(Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -phi));
        trace = trace.max(v.norm());
        let f = ex.f(x, y);
        let want = [Complex64::from_polar(1.0, -2.0 * phi), Complex64::from_polar(1.0, 2.0 * phi)];
        let d = (f[(0, 0)] - want[0]).norm() + (f[(1, 1)] - want[1]).norm() + f[(0, 1)].norm() + f[(1, 0)].norm();
        map = map.max(d);
    }
    let grid = DiskGrid::new(n_grid, 1.0);
    let h1 = InteriorField::from_fn(grid, 2, |x, y| ex.h(x, y).0);
    let hm1 = InteriorField::from_fn(grid, 2, |x, y| ex.h(x, y).1);
    Su2Residuals {
        boundary_trace: trace,
        mu_minus_h1: mu_minus(&metric, &conn, &h1, 1).max_abs_masked(),
        mu_plus_hm1: mu_plus(&metric, &conn, &hm1, -1).max_abs_masked(),
        boundary_map: map,
    }
}

/// Smooth boundary function on the inward half, vanishing to fourth order at tangency;
/// Fourier content in `beta` drawn from `seed`.
pub fn smooth_inward_data(fan: FanBeamGrid, nch: usize, seed: u64) -> BoundaryField {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let coef: Vec<[f64; 6]> = (0..nch).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    let mut w = BoundaryField::zeros(fan, nch);
    for i in 0..fan.n_beta {
        let b = fan.beta(i);
        for j in fan.plus_range() {
            let om = fan.omega(j);
            let cut = om.cos().powi(4);
            for (c, k) in coef.iter().enumerate() {
                let re = k[0] + k[1] * b.cos() + k[2] * (2.0 * b).sin() + k[3] * om.sin();
                let im = k[4] * b.sin() + k[5] * om.sin() * b.cos();
                w.at_mut(i, j)[c] = Complex64::new(re, im) * cut;
            }
        }
    }
    w
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FactorizationResiduals {
    /// `|P_+ w - (1/2pi) I_{A,perp} I_{-A^*,0}^* w|_mu / |P_+ w|_mu`.
    pub plus: f64,
    /// `|P_- w + (1/2pi) I_{A,0} I_{-A^*,perp}^* w|_mu / |P_- w|_mu`.
    pub minus: f64,
}

/// Compares `P_{A,+-}` with the composed transforms; `n_theta` fiber samples for the adjoints.
pub fn factorization_residuals(
    p: &Problem,
    data: &crate::transport::ScatteringData,
    grid: DiskGrid,
    n_theta: usize,
    w: &BoundaryField,
) -> Result<FactorizationResiduals> {
    let fan = data.fan;
    let mu = mu_weights(p.metric, &fan);
    let na = p.conn.neg_adjoint();
    let q = p.with_conn(&na);
    let bp = Backprojection::build(&q, grid, n_theta)?;
    let s = Complex64::new(1.0 / (2.0 * PI), 0.0);
    let pp = range_p(w, data, Sign::Plus).restrict_plus();
    let mut g = adjoint_i0(&bp, w);
    g.scale(s);
    let rp = forward_iperp(p, fan, &g)?;
    let pm = range_p(w, data, Sign::Minus).restrict_plus();
    let mut g = adjoint_iperp(&q, &bp, w);
    g.scale(-s);
    let rm = forward_i0(p, fan, &g)?;
    Ok(FactorizationResiduals {
        plus: pp.sub(&rp).norm(&mu) / pp.norm(&mu),
        minus: pm.sub(&rm).norm(&mu) / pm.norm(&mu),
    })
}

/// `sup |v|` helper for tests of vector-valued closures.
pub fn sup_norm(values: impl IntoIterator<Item = CVec>) -> f64 {
    values.into_iter().map(|v| v.norm()).fold(0.0, f64::max)
}
