use super::metric::IsothermalMetric;
use crate::error::Result;
use crate::flow::{Augment, Flow, FlowOptions};
use crate::grid::FanBeamGrid;
use crate::quadrature::polar_disk_rule;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Boundary side: `int_{d+SM} mu int_0^tau f(phi_t) dt dSigma^2`, with
/// `dSigma^2 = e^lambda R d beta d omega` and `mu = cos omega`.
pub fn santalo_boundary<F>(metric: &IsothermalMetric, fan: &FanBeamGrid, opts: FlowOptions, f: F) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    let flow = Flow::new(metric, None, Augment::GEOMETRY, opts);
    let nodes: Vec<(usize, usize)> =
        (0..fan.n_beta).flat_map(|i| fan.plus_range().map(move |j| (i, j))).collect();
    let parts = nodes
        .par_iter()
        .map_init(
            || (flow.workspace(), Vec::new()),
            |(ws, quad), &(i, j)| -> Result<f64> {
                let (x, y) = fan.point(i);
                let tau = flow.trace(ws, x, y, fan.theta(i, j))?;
                flow.quadrature(0.0, tau, quad);
                let line: f64 = quad
                    .iter()
                    .map(|&(t, w)| {
                        let (px, py, th) = flow.position(ws, t);
                        w * f(px, py, th)
                    })
                    .sum();
                let ds = metric.lambda(x, y).exp() * fan.radius * fan.d_beta() * fan.d_omega();
                Ok(line * fan.omega(j).cos() * ds)
            },
        )
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// Interior side: `int_{SM} f e^{2 lambda} dx dy d theta`.
pub fn santalo_interior<F>(metric: &IsothermalMetric, n_r: usize, n_theta: usize, f: F) -> f64
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    let rule = polar_disk_rule(metric.radius, n_r, 2 * n_r);
    rule.par_iter()
        .map(|&(x, y, w)| {
            let e = (2.0 * metric.lambda(x, y)).exp();
            let s: f64 = (0..n_theta).map(|k| f(x, y, TAU * k as f64 / n_theta as f64)).sum();
            w * e * s * TAU / n_theta as f64
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::simplicity::volume;

    fn check(preset: &str, f: impl Fn(f64, f64, f64) -> f64 + Sync + Copy, tol: f64) {
        let m = IsothermalMetric::from_preset(preset).unwrap();
        let fan = FanBeamGrid::new(96, 96, m.radius);
        let lhs = santalo_boundary(&m, &fan, FlowOptions::default(), f).unwrap();
        let rhs = santalo_interior(&m, 48, 32, f);
        assert!((lhs - rhs).abs() < tol * rhs.abs(), "{preset}: {lhs} vs {rhs}");
    }

    #[test]
    fn constant_function_gives_bundle_volume() {
        for p in ["euclidean", "sphere_cap(1,0.7)", "hyperbolic(-1,0.8)"] {
            let m = IsothermalMetric::from_preset(p).unwrap();
            let rhs = santalo_interior(&m, 48, 8, |_, _, _| 1.0);
            assert!((rhs - TAU * volume(&m)).abs() < 1e-10 * rhs);
            check(p, |_, _, _| 1.0, 2e-3);
        }
    }

    #[test]
    fn direction_dependent_integrand() {
        let f = |x: f64, y: f64, th: f64| (1.0 + x * x + 0.5 * y) * (1.0 + 0.3 * th.cos() + 0.2 * (2.0 * th).sin());
        check("bump(0.4,0.3,0.2,-0.1,1)", f, 2e-3);
        check("hyperbolic(-1,0.6)", f, 2e-3);
    }
}
