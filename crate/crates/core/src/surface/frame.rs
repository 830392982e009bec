use super::metric::IsothermalMetric;

/// Components of a vector field on the sphere bundle in the `(d/dx, d/dy, d/dtheta)` basis.
pub type Tangent3 = [f64; 3];

/// Orientation convention of the perpendicular field; `perp_sign = -1` is a deliberately
/// wrong convention used to check that validation detects it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameConvention {
    pub perp_sign: f64,
}

impl Default for FrameConvention {
    fn default() -> Self {
        Self { perp_sign: 1.0 }
    }
}

/// Geodesic vector field `X`.
pub fn geodesic_field(m: &IsothermalMetric, x: f64, y: f64, th: f64) -> Tangent3 {
    let j = m.jet(x, y).unwrap_or_default();
    let e = (-j.lam).exp();
    let (s, c) = th.sin_cos();
    [e * c, e * s, e * (-j.lx * s + j.ly * c)]
}

/// Perpendicular field `X_perp = [X, V]`.
pub fn perp_field(m: &IsothermalMetric, x: f64, y: f64, th: f64, conv: FrameConvention) -> Tangent3 {
    let j = m.jet(x, y).unwrap_or_default();
    let e = conv.perp_sign * (-j.lam).exp();
    let (s, c) = th.sin_cos();
    [e * s, -e * c, e * (j.lx * c + j.ly * s)]
}

pub fn vertical_field() -> Tangent3 {
    [0.0, 0.0, 1.0]
}

/// Lie bracket `[U, W]` at a point by centred differences of the component functions.
pub fn lie_bracket(
    u: &dyn Fn(f64, f64, f64) -> Tangent3,
    w: &dyn Fn(f64, f64, f64) -> Tangent3,
    p: [f64; 3],
    eps: f64,
) -> Tangent3 {
    let dir = |f: &dyn Fn(f64, f64, f64) -> Tangent3, v: Tangent3| -> Tangent3 {
        let a = f(p[0] + eps * v[0], p[1] + eps * v[1], p[2] + eps * v[2]);
        let b = f(p[0] - eps * v[0], p[1] - eps * v[1], p[2] - eps * v[2]);
        [(a[0] - b[0]) / (2.0 * eps), (a[1] - b[1]) / (2.0 * eps), (a[2] - b[2]) / (2.0 * eps)]
    };
    let up = u(p[0], p[1], p[2]);
    let wp = w(p[0], p[1], p[2]);
    let dw_u = dir(w, up);
    let du_w = dir(u, wp);
    [dw_u[0] - du_w[0], dw_u[1] - du_w[1], dw_u[2] - du_w[2]]
}

/// Max-norm residuals of `[X,V] = X_perp`, `[X_perp,V] = -X`, `[X,X_perp] = -kappa V` at `p`.
pub fn structure_residuals(m: &IsothermalMetric, p: [f64; 3], conv: FrameConvention) -> [f64; 3] {
    let x = |a: f64, b: f64, t: f64| geodesic_field(m, a, b, t);
    let xp = |a: f64, b: f64, t: f64| perp_field(m, a, b, t, conv);
    let v = |_: f64, _: f64, _: f64| vertical_field();
    let eps = 1e-5;
    let diff = |a: Tangent3, b: Tangent3| (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
    let xv = lie_bracket(&x, &v, p, eps);
    let xpv = lie_bracket(&xp, &v, p, eps);
    let xxp = lie_bracket(&x, &xp, p, eps);
    let xpp = xp(p[0], p[1], p[2]);
    let xx = x(p[0], p[1], p[2]);
    let k = m.curvature(p[0], p[1]);
    [
        diff(xv, xpp),
        diff(xpv, [-xx[0], -xx[1], -xx[2]]),
        diff(xxp, [0.0, 0.0, -k]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_perp_at_zero_angle() {
        let m = IsothermalMetric::euclidean(1.0);
        let p = perp_field(&m, 0.2, 0.1, 0.0, FrameConvention::default());
        assert_eq!(p, [0.0, -1.0, 0.0]);
    }

    #[test]
    fn structure_equations_hold_on_presets() {
        for spec in ["euclidean", "sphere_cap(1,1)", "hyperbolic(-1,0.8)", "bump(0.4,0.3,0.1,0.2,1)"] {
            let m = IsothermalMetric::from_preset(spec).unwrap();
            for p in [[0.1, 0.2, 0.3], [-0.4, 0.3, 2.0], [0.5, -0.5, 4.5]] {
                let r = structure_residuals(&m, p, FrameConvention::default());
                assert!(r.iter().all(|&e| e < 1e-7), "{spec} {p:?} {r:?}");
            }
        }
    }

    #[test]
    fn flipped_convention_is_detected() {
        let m = IsothermalMetric::from_preset("sphere_cap(1,1)").unwrap();
        let r = structure_residuals(&m, [0.1, 0.2, 0.3], FrameConvention { perp_sign: -1.0 });
        assert!(r[0] > 0.5);
    }
}
