use super::metric::IsothermalMetric;
use crate::error::{GeoError, Result};
use crate::flow::{Augment, Flow, FlowOptions, FlowState};
use crate::grid::FanBeamGrid;
use rayon::prelude::*;

/// Geodesic from a point of the sphere bundle to its boundary exit, with Jacobi
/// data sampled at equally spaced times.
#[derive(Clone, Debug)]
pub struct GeodesicTrace {
    pub tau: f64,
    pub times: Vec<f64>,
    pub states: Vec<FlowState>,
}

impl GeodesicTrace {
    pub fn exit(&self) -> (f64, f64, f64) {
        let s = self.states.last().expect("trace has samples");
        (s.x, s.y, s.th)
    }
}

/// Traces with Jacobi fields and rejects conjugate points along the way.
pub fn trace_geodesic(
    metric: &IsothermalMetric,
    x: f64,
    y: f64,
    th: f64,
    opts: FlowOptions,
    samples: usize,
) -> Result<GeodesicTrace> {
    let flow = Flow::new(metric, None, Augment::JACOBI, opts);
    let mut ws = flow.workspace();
    let tau = flow.trace(&mut ws, x, y, th)?;
    let samples = samples.max(2);
    let times: Vec<f64> = (0..samples).map(|k| tau * k as f64 / (samples - 1) as f64).collect();
    let states: Vec<FlowState> = times.iter().map(|&t| flow.state(&mut ws, t)).collect();
    for (t, s) in times.iter().zip(&states).skip(1) {
        if s.b2 >= 0.0 {
            return Err(GeoError::ConjugatePoint { t: *t });
        }
    }
    Ok(GeodesicTrace { tau, times, states })
}

/// Exit time from `(x, y, th)`.
pub fn exit_time(metric: &IsothermalMetric, x: f64, y: f64, th: f64, opts: FlowOptions) -> Result<f64> {
    let flow = Flow::new(metric, None, Augment::GEOMETRY, opts);
    let mut ws = flow.workspace();
    flow.trace(&mut ws, x, y, th)
}

/// Exit data of one inward boundary node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitRecord {
    pub tau: f64,
    /// Fan coordinates `(beta', omega')` of the outward exit point.
    pub beta: f64,
    pub omega: f64,
}

/// Exit data for every inward node of `fan`, indexed `[beta][omega - n_omega/4]`.
pub fn exit_map(metric: &IsothermalMetric, fan: &FanBeamGrid, opts: FlowOptions) -> Result<Vec<ExitRecord>> {
    let flow = Flow::new(metric, None, Augment::GEOMETRY, opts);
    let nodes: Vec<(usize, usize)> =
        (0..fan.n_beta).flat_map(|i| fan.plus_range().map(move |j| (i, j))).collect();
    nodes
        .par_iter()
        .map_init(
            || flow.workspace(),
            |ws, &(i, j)| {
                let (x, y) = fan.point(i);
                let tau = flow.trace(ws, x, y, fan.theta(i, j))?;
                let (ex, ey, eth) = flow.position(ws, tau);
                let (b, w) = FanBeamGrid::fan_coords(ey.atan2(ex), eth);
                Ok(ExitRecord { tau, beta: b, omega: w })
            },
        )
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_scattering_relation() {
        // Straight chords: beta' = beta + pi + 2 omega, omega' = pi - omega.
        let m = IsothermalMetric::euclidean(1.0);
        let fan = FanBeamGrid::new(8, 16, 1.0);
        let map = exit_map(&m, &fan, FlowOptions::default()).unwrap();
        let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
        for i in 0..8 {
            for (jj, j) in fan.plus_range().enumerate() {
                let r = map[i * 8 + jj];
                let w = fan.omega(j);
                assert!((r.tau - 2.0 * w.cos()).abs() < 1e-9);
                assert!(wrap(r.beta - (fan.beta(i) + PI + 2.0 * w)).abs() < 1e-8);
                assert!(wrap(r.omega - (PI - w)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn hyperbolic_jacobi_is_sinh() {
        let m = IsothermalMetric::from_preset("hyperbolic(-1,0.8)").unwrap();
        let tr = trace_geodesic(&m, 0.1, 0.2, 1.0, FlowOptions::tight(), 20).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s.b2 + t.sinh()).abs() < 1e-8 * (1.0 + t.sinh()));
            assert!((s.b1 * s.c2 - s.b2 * s.c1 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn large_sphere_cap_has_conjugate_points() {
        // Beyond the hemisphere, diameters of the chart exceed the conjugate distance pi/2.
        let m = IsothermalMetric::constant_curvature(1.0, 1.0).unwrap();
        let big = IsothermalMetric::constant_curvature(4.0, 1.0).unwrap();
        assert!(trace_geodesic(&m, 0.0, 0.0, 0.0, FlowOptions::default(), 50).is_ok());
        let r = trace_geodesic(&big, 0.9, 0.0, PI + 0.05, FlowOptions::default(), 200);
        assert!(matches!(r, Err(GeoError::ConjugatePoint { .. })), "{r:?}");
    }
}
