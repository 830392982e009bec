use super::metric::IsothermalMetric;
use crate::error::{GeoError, Result};
use crate::flow::{Augment, Flow, FlowOptions};
use crate::grid::FanBeamGrid;
use crate::quadrature::polar_disk_rule;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimplicityOptions {
    pub n_beta: usize,
    pub n_omega: usize,
    /// Samples per trace for the Jacobi-ratio extrema.
    pub samples: usize,
    pub flow: FlowOptions,
}

impl Default for SimplicityOptions {
    fn default() -> Self {
        Self { n_beta: 32, n_omega: 32, samples: 40, flow: FlowOptions::default() }
    }
}

/// Geometric constants of a simple surface, all sampled.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SimplicityReport {
    /// Longest geodesic.
    pub tau_max: f64,
    /// Bounds `c1 <= |b2(x, v, t)| / t <= c2` over sampled geodesic segments.
    pub c1: f64,
    pub c2: f64,
    /// Sup over boundary geodesics of `int t kappa^+` and `int t kappa^-`.
    pub k_plus: f64,
    pub k_minus: f64,
    pub vol: f64,
    pub sup_dkappa: f64,
    pub sup_abs_kappa: f64,
    /// Shortest sampled segment entering the ratio extrema.
    pub t_floor: f64,
    pub min_boundary_curvature: f64,
}

/// Volume `int_M e^{2 lambda} dx dy`.
pub fn volume(metric: &IsothermalMetric) -> f64 {
    polar_disk_rule(metric.radius, 48, 96)
        .iter()
        .map(|&(x, y, w)| w * (2.0 * metric.lambda(x, y)).exp())
        .sum()
}

/// `(sup |d kappa|_g, sup |kappa|)` over a polar sampling including the boundary circle.
pub fn curvature_sups(metric: &IsothermalMetric) -> (f64, f64) {
    let mut pts = polar_disk_rule(metric.radius, 64, 128);
    for k in 0..256 {
        let a = k as f64 * std::f64::consts::TAU / 256.0;
        pts.push((metric.radius * a.cos(), metric.radius * a.sin(), 0.0));
    }
    pts.push((0.0, 0.0, 0.0));
    pts.iter().fold((0.0f64, 0.0f64), |(d, k), &(x, y, _)| {
        (d.max(metric.dkappa_norm(x, y)), k.max(metric.curvature(x, y).abs()))
    })
}

/// Geodesic curvature of the boundary circle, `e^{-lambda}(1/R + d_r lambda)`, minimised over angle.
pub fn min_boundary_curvature(metric: &IsothermalMetric) -> f64 {
    let r = metric.radius;
    (0..256)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 256.0;
            let (c, s) = (a.cos(), a.sin());
            let j = metric.jet(r * c, r * s).unwrap_or_default();
            (-j.lam).exp() * (1.0 / r + j.lx * c + j.ly * s)
        })
        .fold(f64::INFINITY, f64::min)
}

struct TraceStats {
    tau: f64,
    rmin: f64,
    rmax: f64,
    kp: f64,
    km: f64,
}

pub fn simplicity_report(metric: &IsothermalMetric, opts: &SimplicityOptions) -> Result<SimplicityReport> {
    let kb = min_boundary_curvature(metric);
    if kb <= 0.0 {
        return Err(GeoError::NotSimple(format!("boundary not strictly convex (min geodesic curvature {kb:.3e})")));
    }
    let fan = FanBeamGrid::new(opts.n_beta, opts.n_omega, metric.radius);
    let flow = Flow::new(metric, None, Augment::JACOBI, opts.flow);
    let nodes: Vec<(usize, usize)> =
        (0..fan.n_beta).flat_map(|i| fan.plus_range().map(move |j| (i, j))).collect();
    let m = opts.samples.max(8);
    let stats: Vec<TraceStats> = nodes
        .par_iter()
        .map_init(
            || (flow.workspace(), Vec::new()),
            |(ws, quad), &(i, j)| -> Result<TraceStats> {
                let (x, y) = fan.point(i);
                let tau = flow.trace(ws, x, y, fan.theta(i, j))?;
                let st: Vec<_> = (0..m).map(|k| flow.state(ws, tau * k as f64 / (m - 1) as f64)).collect();
                let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
                let dt = tau / (m - 1) as f64;
                for a in 0..m {
                    for b in a + 1..m {
                        // Cocycle: b2 from the intermediate point phi_{t_a}.
                        let b2 = st[b].b2 * st[a].b1 - st[b].b1 * st[a].b2;
                        if b2 >= 0.0 {
                            return Err(GeoError::ConjugatePoint { t: (b - a) as f64 * dt });
                        }
                        let ratio = -b2 / ((b - a) as f64 * dt);
                        rmin = rmin.min(ratio);
                        rmax = rmax.max(ratio);
                    }
                }
                flow.quadrature(0.0, tau, quad);
                let (mut kp, mut km) = (0.0, 0.0);
                for &(t, w) in quad.iter() {
                    let (px, py, _) = flow.position(ws, t);
                    let k = metric.curvature(px, py);
                    kp += w * t * k.max(0.0);
                    km += w * t * (-k).max(0.0);
                }
                Ok(TraceStats { tau, rmin, rmax, kp, km })
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let tau_max = stats.iter().map(|s| s.tau).fold(0.0, f64::max);
    let t_floor = stats.iter().map(|s| s.tau).fold(f64::INFINITY, f64::min) / (m - 1) as f64;
    // The ratio tends to 1 as t -> 0, so 1 belongs to the closure of the sampled set.
    let c1 = stats.iter().map(|s| s.rmin).fold(1.0, f64::min);
    let c2 = stats.iter().map(|s| s.rmax).fold(1.0, f64::max);
    let (sup_dkappa, sup_abs_kappa) = curvature_sups(metric);
    Ok(SimplicityReport {
        tau_max,
        c1,
        c2,
        k_plus: stats.iter().map(|s| s.kp).fold(0.0, f64::max),
        k_minus: stats.iter().map(|s| s.km).fold(0.0, f64::max),
        vol: volume(metric),
        sup_dkappa,
        sup_abs_kappa,
        t_floor,
        min_boundary_curvature: kb,
    })
}
