//! Data-space operators on the boundary of the unit sphere bundle: the
//! extensions `Q_{A,+-}`, folds `B_{A,+-}`, the symmetry spaces `V_{A,+-}`, and the
//! range operators `P_{A,+-} = B_{A,-} H_{+-} Q_{A,+}`.
//!
//! Fields live on a full [`FanBeamGrid`]: omega indices in `plus_range()` form the
//! inward half, the rest the outward half.

use crate::error::Result;
use crate::flow::Augment;
use crate::grid::{BoundaryField, FanBeamGrid};
use crate::harmonics::{hilbert_boundary, Parity};
use crate::linalg::{CMat, CVec};
use crate::surface::metric::IsothermalMetric;
use crate::transport::{Problem, ScatteringData};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Sign of an extension, fold or symmetry class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// Parity of fiber modes kept by `H_{+-}`.
    pub fn parity(self) -> Parity {
        match self {
            Sign::Plus => Parity::Even,
            Sign::Minus => Parity::Odd,
        }
    }
}

/// Which scattering data twists a symmetry class: `C_A`, or `C_{-A^*} = (C_A^*)^{-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Twist {
    Direct,
    NegAdjoint,
}

/// `mu dSigma^2` quadrature weights: `cos(omega) e^{lambda} R d_beta d_omega` on the
/// inward half, zero elsewhere.
pub fn mu_weights(metric: &IsothermalMetric, fan: &FanBeamGrid) -> Vec<f64> {
    let mut w = vec![0.0; fan.len()];
    for i in 0..fan.n_beta {
        let (x, y) = fan.point(i);
        let ds = metric.lambda(x, y).exp() * fan.radius * fan.d_beta() * fan.d_omega();
        for j in fan.plus_range() {
            w[fan.index(i, j)] = fan.omega(j).cos() * ds;
        }
    }
    w
}

/// Uniform weights over the full boundary, for relative norms of full-boundary fields.
pub fn full_weights(fan: &FanBeamGrid) -> Vec<f64> {
    vec![fan.d_beta() * fan.d_omega(); fan.len()]
}

/// Consistency of a set of scattering tables against fresh traces.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct ScatteringChecks {
    /// `max |alpha(alpha(p)) - p|` in fan coordinates.
    pub involution: f64,
    /// `max |tau(alpha_a(p)) - tau(p)|`.
    pub tau_symmetry: f64,
}

/// Retraces from `a(alpha(p))` for every inward node and checks that the geodesic
/// returns to `a(p)` after the same time.
pub fn scattering_checks(p: &Problem, data: &ScatteringData) -> Result<ScatteringChecks> {
    let fan = data.fan;
    let flow = p.flow(Augment::GEOMETRY);
    let idx: Vec<(usize, usize)> = (0..fan.n_beta).flat_map(|i| fan.plus_range().map(move |j| (i, j))).collect();
    let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
    let res = idx
        .par_iter()
        .map_init(
            || flow.workspace(),
            |ws, &(i, j)| -> Result<(f64, f64)> {
                let nd = data.node(i, j);
                let (b, w) = data.alpha_a_plus(i, j);
                let r = fan.radius;
                let tau = flow.trace(ws, r * b.cos(), r * b.sin(), b + PI + w)?;
                let s = flow.state(ws, tau);
                // Exit of the reversed geodesic is a(p); flip back to compare with p.
                let (eb, ew) = FanBeamGrid::fan_coords(s.y.atan2(s.x), s.th + PI);
                let inv = wrap(eb - fan.beta(i)).abs().max(wrap(ew - fan.omega(j)).abs());
                Ok((inv, (tau - nd.tau).abs()))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(res.into_iter().fold(ScatteringChecks::default(), |acc, (a, b)| ScatteringChecks {
        involution: acc.involution.max(a),
        tau_symmetry: acc.tau_symmetry.max(b),
    }))
}

fn twisted(c: &CMat, twist: Twist) -> CMat {
    match twist {
        Twist::Direct => *c,
        Twist::NegAdjoint => crate::transport::partner(c),
    }
}

/// `Q_{A,+-} h`: `h` on the inward half, `+-C_A(q) h(alpha(q))` on the outward half.
pub fn extend_q(h: &BoundaryField, data: &ScatteringData, sign: Sign) -> BoundaryField {
    let fan = data.fan;
    let mut out = h.restrict_plus();
    let s = Complex64::new(sign.value(), 0.0);
    for i in 0..fan.n_beta {
        for j in (0..fan.n_omega).filter(|&j| !fan.is_plus(j)) {
            let (b, w) = data.alpha_minus(i, j);
            let v = data.c_minus(i, j).mul_vec(&h.interp_plus(b, w)).scale(s);
            out.at_mut(i, j).copy_from_slice(v.as_slice());
        }
    }
    out
}

/// `B_{A,+-} g (p) = g(p) +- C_A^{-1}(alpha(p)) g(alpha(p))` on the inward half.
pub fn fold_b(g: &BoundaryField, data: &ScatteringData, sign: Sign) -> BoundaryField {
    let fan = data.fan;
    let mut out = BoundaryField::zeros(fan, g.nch);
    let s = Complex64::new(sign.value(), 0.0);
    for i in 0..fan.n_beta {
        for j in fan.plus_range() {
            let nd = data.node(i, j);
            let ge = g.interp_minus(nd.exit_beta, nd.exit_omega);
            let v = g.vec_at(i, j) + nd.einv.mul_vec(&ge).scale(s);
            out.at_mut(i, j).copy_from_slice(v.as_slice());
        }
    }
    out
}

/// Splits inward data as `h = h_+ + h_-` with `h_+` in `V_{A,+}` and `h_-` in `V_{-A^*,-}`.
pub fn symmetry_decompose(h: &BoundaryField, data: &ScatteringData) -> (BoundaryField, BoundaryField) {
    let fan = data.fan;
    let n = h.nch;
    let id = CMat::identity(n);
    let mut hp = BoundaryField::zeros(fan, n);
    let mut hm = BoundaryField::zeros(fan, n);
    for i in 0..fan.n_beta {
        for j in fan.plus_range() {
            let c = data.node(i, j).c_alpha;
            let ci = data.node(i, j).einv;
            let (b, w) = data.alpha_a_plus(i, j);
            let ha = h.interp_plus(b, w);
            let hv = h.vec_at(i, j);
            let cs = c.adjoint();
            let p = (id + cs * c).inverse().expect("I + C^*C is positive").mul_vec(&(hv + cs.mul_vec(&ha)));
            let m = (id + ci * ci.adjoint()).inverse().expect("positive").mul_vec(&(hv - ci.mul_vec(&ha)));
            hp.at_mut(i, j).copy_from_slice(p.as_slice());
            hm.at_mut(i, j).copy_from_slice(m.as_slice());
        }
    }
    (hp, hm)
}

/// Relative defect of `h(alpha_a(p)) = +-C(alpha(p)) h(p)` in the `mu`-weighted norm.
pub fn membership_residual(h: &BoundaryField, data: &ScatteringData, sign: Sign, twist: Twist, weights: &[f64]) -> f64 {
    let fan = data.fan;
    let mut defect = BoundaryField::zeros(fan, h.nch);
    let s = Complex64::new(sign.value(), 0.0);
    for i in 0..fan.n_beta {
        for j in fan.plus_range() {
            let c = twisted(&data.node(i, j).c_alpha, twist);
            let (b, w) = data.alpha_a_plus(i, j);
            let d = h.interp_plus(b, w) - c.mul_vec(&h.vec_at(i, j)).scale(s);
            defect.at_mut(i, j).copy_from_slice(d.as_slice());
        }
    }
    let scale = h.norm(weights);
    if scale == 0.0 {
        return 0.0;
    }
    defect.norm(weights) / scale
}

/// Relative defect of `g(x, -v) = +-g(x, v)` over the full boundary.
pub fn parity_residual(g: &BoundaryField, sign: Sign) -> f64 {
    let fan = g.grid;
    let mut d = g.clone();
    for i in 0..fan.n_beta {
        for j in 0..fan.n_omega {
            let v = g.vec_at(i, j) - g.vec_at(i, fan.antipode(j)).scale(Complex64::new(sign.value(), 0.0));
            d.at_mut(i, j).copy_from_slice(v.as_slice());
        }
    }
    let w = full_weights(&fan);
    let scale = g.norm(&w);
    if scale == 0.0 {
        0.0
    } else {
        d.norm(&w) / scale
    }
}

/// Projection of full-boundary data onto functions even (`Plus`) or odd in `v`.
pub fn parity_project(g: &BoundaryField, sign: Sign) -> BoundaryField {
    let fan = g.grid;
    let mut out = g.clone();
    for i in 0..fan.n_beta {
        for j in 0..fan.n_omega {
            let v = (g.vec_at(i, j) + g.vec_at(i, fan.antipode(j)).scale(Complex64::new(sign.value(), 0.0)))
                .scale(Complex64::new(0.5, 0.0));
            out.at_mut(i, j).copy_from_slice(v.as_slice());
        }
    }
    out
}

/// `P_{A,+-} w = B_{A,-} H_{+-} Q_{A,+} w`.
pub fn range_p(w: &BoundaryField, data: &ScatteringData, sign: Sign) -> BoundaryField {
    let q = extend_q(w, data, Sign::Plus);
    fold_b(&hilbert_boundary(&q, sign.parity()), data, Sign::Minus)
}

/// Samples a function on the sphere bundle at every node of a fan-beam grid.
pub fn sample_boundary(fan: FanBeamGrid, nch: usize, f: impl Fn(f64, f64, f64) -> CVec) -> BoundaryField {
    let mut out = BoundaryField::zeros(fan, nch);
    for i in 0..fan.n_beta {
        let (x, y) = fan.point(i);
        for j in 0..fan.n_omega {
            out.at_mut(i, j).copy_from_slice(f(x, y, fan.theta(i, j)).as_slice());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::MatrixConnection;
    use crate::flow::FlowOptions;
    use crate::transport::{attenuated_integral, extension_at};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Smooth test function on the sphere bundle with modes -2..=2.
    fn smooth_sm(x: f64, y: f64, th: f64) -> CVec {
        CVec::from_slice(&[
            c(1.0 + x * th.cos() + 0.4 * y * (2.0 * th).sin(), 0.3 * x * y + 0.2 * th.sin()),
            c(0.5 * y - 0.2 * (2.0 * th).cos(), x * x * th.cos()),
        ])
    }

    fn setup(metric: &str, conn: MatrixConnection, nb: usize, no: usize) -> (IsothermalMetric, MatrixConnection, FanBeamGrid) {
        let m = IsothermalMetric::from_preset(metric).unwrap();
        let fan = FanBeamGrid::new(nb, no, m.radius);
        (m, conn, fan)
    }

    #[test]
    fn flat_scattering_tables() {
        let (m, a, fan) = setup("euclidean(1)", MatrixConnection::zero(1), 32, 32);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
        for i in 0..fan.n_beta {
            for j in fan.plus_range() {
                let nd = d.node(i, j);
                assert!(wrap(nd.exit_beta - (fan.beta(i) + PI + 2.0 * fan.omega(j))).abs() < 1e-8);
            }
        }
        let ch = scattering_checks(&p, &d).unwrap();
        assert!(ch.involution < 1e-6 && ch.tau_symmetry < 1e-6, "{ch:?}");
    }

    #[test]
    fn curved_scattering_tables() {
        let (m, a, fan) = setup("bump(-0.15,0.5,0.1,-0.1,1)", MatrixConnection::generic_poly(3, 2), 32, 32);
        let p = Problem::new(&m, &a, FlowOptions::tight());
        let d = ScatteringData::build(&p, fan).unwrap();
        let ch = scattering_checks(&p, &d).unwrap();
        assert!(ch.involution < 1e-6 && ch.tau_symmetry < 1e-6, "{ch:?}");
    }

    #[test]
    fn trivial_extension_and_fold() {
        let (m, a, fan) = setup("euclidean(1)", MatrixConnection::zero(1), 16, 32);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let mut h = BoundaryField::zeros(fan, 1);
        h.data.iter_mut().for_each(|z| *z = c(2.0, -1.0));
        let h = h.restrict_plus();
        let qp = extend_q(&h, &d, Sign::Plus);
        assert!(qp.data.iter().all(|z| (z - c(2.0, -1.0)).norm() < 1e-12));
        let qm = extend_q(&h, &d, Sign::Minus);
        for i in 0..fan.n_beta {
            for j in 0..fan.n_omega {
                let s = if fan.is_plus(j) { 1.0 } else { -1.0 };
                assert!((qm.at(i, j)[0] - qp.at(i, j)[0] * s).norm() < 1e-12);
            }
        }
        assert!(fold_b(&qp, &d, Sign::Minus).data.iter().all(|z| z.norm() < 1e-12));
        assert!(range_p(&h, &d, Sign::Plus).data.iter().all(|z| z.norm() < 1e-12));
        assert!(range_p(&h, &d, Sign::Minus).data.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn q_plus_is_boundary_trace_of_extension() {
        let (m, a, fan) = setup("hyperbolic(-1,0.6)", MatrixConnection::generic_poly(5, 2), 32, 48);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let h = sample_boundary(fan, 2, smooth_sm).restrict_plus();
        let q = extend_q(&h, &d, Sign::Plus);
        let mut err = BoundaryField::zeros(fan, 2);
        for i in (0..fan.n_beta).step_by(3) {
            let (x, y) = fan.point(i);
            for j in 0..fan.n_omega {
                let v = extension_at(&p, &h, x, y, fan.theta(i, j)).unwrap();
                err.at_mut(i, j).copy_from_slice((v - q.vec_at(i, j)).as_slice());
            }
        }
        let w = full_weights(&fan);
        let rel = err.norm(&w) / q.norm(&w);
        assert!(rel < 0.01 / 3.0, "{rel}");
    }

    fn x_plus_a(m: &IsothermalMetric, a: &MatrixConnection, x: f64, y: f64, th: f64) -> CVec {
        let e = 1e-5;
        let j = m.jet(x, y).unwrap();
        let el = (-j.lam).exp();
        let (s, co) = th.sin_cos();
        let dx = (smooth_sm(x + e, y, th) - smooth_sm(x - e, y, th)).scale(c(0.5 / e, 0.0));
        let dy = (smooth_sm(x, y + e, th) - smooth_sm(x, y - e, th)).scale(c(0.5 / e, 0.0));
        let dt = (smooth_sm(x, y, th + e) - smooth_sm(x, y, th - e)).scale(c(0.5 / e, 0.0));
        let xu = (dx.scale(c(co, 0.0)) + dy.scale(c(s, 0.0)) + dt.scale(c(-j.lx * s + j.ly * co, 0.0))).scale(c(el, 0.0));
        xu + a.on_sm(x, y, th, j.lam).mul_vec(&smooth_sm(x, y, th))
    }

    #[test]
    fn fundamental_theorem_fold() {
        let (m, a, fan) = setup("bump(-0.15,0.5,0.1,-0.1,1)", MatrixConnection::generic_poly(7, 2), 48, 64);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let u = sample_boundary(fan, 2, smooth_sm);
        let lhs = fold_b(&u, &d, Sign::Minus);
        let f = |x: f64, y: f64, th: f64| x_plus_a(&m, &a, x, y, th);
        let mut rhs = attenuated_integral(&p, fan, &f).unwrap();
        rhs.scale_all(c(-1.0, 0.0));
        let w = mu_weights(&m, &fan);
        let rel = lhs.sub(&rhs).norm(&w) / rhs.norm(&w);
        assert!(rel < 0.01, "{rel}");
    }

    #[test]
    fn decomposition_flat_and_curved() {
        // Zero connection: h_+- = (h +- h o alpha_a)/2.
        let (m, a, fan) = setup("euclidean(1)", MatrixConnection::zero(2), 32, 48);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let h = sample_boundary(fan, 2, smooth_sm).restrict_plus();
        let (hp, hm) = symmetry_decompose(&h, &d);
        for i in 0..fan.n_beta {
            for j in fan.plus_range() {
                let (b, w) = d.alpha_a_plus(i, j);
                let ha = h.interp_plus(b, w);
                let e = (h.vec_at(i, j) + ha).scale(c(0.5, 0.0)) - hp.vec_at(i, j);
                assert!(e.norm() < 1e-12);
                let e = (h.vec_at(i, j) - ha).scale(c(0.5, 0.0)) - hm.vec_at(i, j);
                assert!(e.norm() < 1e-12);
            }
        }
        let (m, a, fan) = setup("sphere_cap(1,0.6)", MatrixConnection::generic_poly(11, 2), 48, 64);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let w = mu_weights(&m, &fan);
        let h = sample_boundary(fan, 2, smooth_sm).restrict_plus();
        let (hp, hm) = symmetry_decompose(&h, &d);
        let sum = {
            let mut s = hp.clone();
            s.axpy(c(1.0, 0.0), &hm);
            s
        };
        assert!(sum.sub(&h).norm(&w) < 1e-12 * h.norm(&w).max(1.0));
        let r1 = membership_residual(&hp, &d, Sign::Plus, Twist::Direct, &w);
        let r2 = membership_residual(&hm, &d, Sign::Minus, Twist::NegAdjoint, &w);
        assert!(r1 < 0.01 && r2 < 0.01, "{r1} {r2}");
        let ip = hp.inner(&hm, &w).norm() / (hp.norm(&w) * hm.norm(&w));
        assert!(ip < 0.01, "{ip}");
    }

    #[test]
    fn symmetry_of_attenuated_integrals() {
        let (m, a, fan) = setup("hyperbolic(-1,0.6)", MatrixConnection::generic_poly(2, 2), 48, 64);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let w = mu_weights(&m, &fan);
        let even = |x: f64, y: f64, th: f64| {
            CVec::from_slice(&[c(1.0 + x * (2.0 * th).cos(), y), c(x * y, 0.5 * (2.0 * th).sin())])
        };
        let odd = |x: f64, y: f64, th: f64| CVec::from_slice(&[c(x * th.cos(), y * th.sin()), c(th.sin(), x * (3.0 * th).cos())]);
        let ie = attenuated_integral(&p, fan, &even).unwrap();
        let io = attenuated_integral(&p, fan, &odd).unwrap();
        let r1 = membership_residual(&ie, &d, Sign::Plus, Twist::Direct, &w);
        let r2 = membership_residual(&io, &d, Sign::Minus, Twist::Direct, &w);
        assert!(r1 < 0.01 && r2 < 0.01, "{r1} {r2}");
    }

    #[test]
    fn parity_bookkeeping() {
        let (m, a, fan) = setup("sphere_cap(1,0.6)", MatrixConnection::generic_poly(4, 2), 48, 64);
        let p = Problem::new(&m, &a, FlowOptions::default());
        let d = ScatteringData::build(&p, fan).unwrap();
        let w = mu_weights(&m, &fan);
        let h = sample_boundary(fan, 2, smooth_sm).restrict_plus();
        let (hp, _) = symmetry_decompose(&h, &d);
        // h in V_{A,+}: Q_+ h even, Q_- h odd.
        assert!(parity_residual(&extend_q(&hp, &d, Sign::Plus), Sign::Plus) < 0.01);
        assert!(parity_residual(&extend_q(&hp, &d, Sign::Minus), Sign::Minus) < 0.01);
        // h in V_{A,-}: the reverse. Build one from an odd integrand.
        let odd = |x: f64, y: f64, th: f64| CVec::from_slice(&[c(x * th.cos(), y * th.sin()), c(th.sin(), 0.2)]);
        let odd_only = |x: f64, y: f64, th: f64| {
            let a = odd(x, y, th);
            let b = odd(x, y, th + PI);
            (a - b).scale(c(0.5, 0.0))
        };
        let hm = attenuated_integral(&p, fan, &odd_only).unwrap();
        assert!(parity_residual(&extend_q(&hm, &d, Sign::Plus), Sign::Minus) < 0.01);
        assert!(parity_residual(&extend_q(&hm, &d, Sign::Minus), Sign::Plus) < 0.01);
        // q even: B_+- q in V_{A,+-}; q odd: B_+- q in V_{A,-+}.
        let q = sample_boundary(fan, 2, smooth_sm);
        for (par, shift) in [(Sign::Plus, false), (Sign::Minus, true)] {
            let qq = parity_project(&q, par);
            for s in [Sign::Plus, Sign::Minus] {
                let target = if shift { s.flip() } else { s };
                let r = membership_residual(&fold_b(&qq, &d, s), &d, target, Twist::Direct, &w);
                assert!(r < 0.01, "{par:?} {s:?} {r}");
            }
        }
    }
}
