//! A-priori bound on `|W_A|`, the sups that feed it, and pointwise checks of the
//! kernel estimates it rests on.

use super::kernel::{kernel_value, WKind};
use crate::connection::MatrixConnection;
use crate::error::{GeoError, Result};
use crate::flow::{Augment, Flow, FlowOptions};
use crate::quadrature::polar_disk_rule;
use crate::surface::metric::IsothermalMetric;
use crate::surface::simplicity::SimplicityReport;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub tau: f64,
    /// `sup |(A + A^*)/2|` over the unit circle bundle.
    pub alpha: f64,
    pub sup_star_f: f64,
    pub sup_dkappa: f64,
    pub vol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub inputs: BoundInputs,
    pub c: f64,
    pub c_prime: f64,
    pub bound: f64,
}

impl BoundInputs {
    pub fn evaluate(&self) -> BoundEvaluation {
        let n = self.n as f64;
        let t = self.tau;
        let c = n.powi(3) * (6.0 * self.alpha * t).exp() * self.c2.powi(2) / self.c1.powi(3) * t * t / 2.0;
        let c_prime = n * (2.0 * self.alpha * t).exp() * self.c2.powi(6) / self.c1.powi(5) * t.powi(4) / 24.0;
        let bound = (self.vol / (2.0 * PI)).sqrt()
            * (c * self.sup_star_f.powi(2) + c_prime * self.sup_dkappa.powi(2)).sqrt();
        BoundEvaluation { inputs: *self, c, c_prime, bound }
    }
}

pub fn w_norm_bound(report: &SimplicityReport, n: usize, alpha: f64, sup_star_f: f64, sup_dkappa: f64) -> BoundEvaluation {
    BoundInputs {
        n,
        c1: report.c1,
        c2: report.c2,
        tau: report.tau_max,
        alpha,
        sup_star_f,
        sup_dkappa,
        vol: report.vol,
    }
    .evaluate()
}

/// Bound on `|W|` without connection: `|d kappa| C2^3 tau^2 / (24 C1^{5/2}) sqrt(vol / 2 pi)`.
pub fn no_connection_bound(report: &SimplicityReport) -> f64 {
    report.sup_dkappa * report.c2.powi(3) * report.tau_max.powi(2) / (24.0 * report.c1.powf(2.5))
        * (report.vol / (2.0 * PI)).sqrt()
}

/// `(alpha, sup |*F_A|)` in the spectral norm, sampled on a polar grid plus the boundary circle.
pub fn connection_sups(metric: &IsothermalMetric, conn: &MatrixConnection) -> (f64, f64) {
    if conn.is_zero() {
        return (0.0, 0.0);
    }
    let r = metric.radius;
    let mut pts: Vec<(f64, f64)> = polar_disk_rule(r, 16, 32).into_iter().map(|(x, y, _)| (x, y)).collect();
    pts.extend((0..64).map(|k| {
        let a = k as f64 * 2.0 * PI / 64.0;
        (r * a.cos(), r * a.sin())
    }));
    pts.push((0.0, 0.0));
    let mut alpha: f64 = 0.0;
    let mut f: f64 = 0.0;
    for &(x, y) in &pts {
        let lam = metric.lambda(x, y);
        for k in 0..16 {
            let a = conn.on_sm(x, y, k as f64 * PI / 8.0, lam);
            alpha = alpha.max((a + a.adjoint()).scale_re(0.5).op_norm());
        }
        f = f.max(conn.star_curvature_fast(metric, x, y).op_norm());
    }
    (alpha, f)
}

/// Bound for `conn` scaled by `s`.
pub fn scaled_bound(metric: &IsothermalMetric, report: &SimplicityReport, conn: &MatrixConnection, s: f64) -> BoundEvaluation {
    let c = conn.scaled(Complex64::new(s, 0.0));
    let (alpha, f) = connection_sups(metric, &c);
    w_norm_bound(report, conn.rank(), alpha, f, report.sup_dkappa)
}

/// Real scale `s` with bound of `s A` equal to `target` (bisection; the bound grows with `s`).
pub fn scale_to_bound(
    metric: &IsothermalMetric,
    report: &SimplicityReport,
    conn: &MatrixConnection,
    target: f64,
) -> Result<(f64, BoundEvaluation)> {
    let floor = scaled_bound(metric, report, conn, 0.0);
    if floor.bound >= target {
        return Err(GeoError::Config(format!(
            "curvature alone gives bound {:.3} >= target {target}",
            floor.bound
        )));
    }
    let mut hi = 1.0;
    while scaled_bound(metric, report, conn, hi).bound < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(GeoError::Config("connection too weak to reach the target bound".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if scaled_bound(metric, report, conn, mid).bound < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok((s, scaled_bound(metric, report, conn, s)))
}

/// Pointwise checks along sampled traces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelBoundReport {
    pub points: usize,
    pub max_v_b1_over_b2: f64,
    pub max_v_inv_b2: f64,
    /// Largest `max(|V(b1/b2)|, |V(1/b2)|) / (|d kappa| C2^3 t^2 / (12 C1^2))`; the bound holds when `<= 1`.
    pub worst_ratio: f64,
    /// Largest `|K2(t)|_F / (n^{3/2} e^{3 alpha tau} C2 |*F| t^2 / 2)`.
    pub k2_worst_ratio: f64,
    /// `max |w(t)| / t` over samples with `t < 0.05`, both kernels.
    pub small_t_slope: f64,
}

impl KernelBoundReport {
    /// Factor by which the bound exceeds the sampled values.
    pub fn margin(&self) -> f64 {
        if self.worst_ratio > 0.0 {
            1.0 / self.worst_ratio
        } else {
            f64::INFINITY
        }
    }
}

/// Samples `n_traces` random interior starts, `per_trace` times each, and compares the
/// Jacobi-variation quotients and `K2` against their bounds with the measured `C1`, `C2`.
#[allow(clippy::too_many_arguments)]
pub fn kernel_bound_check(
    metric: &IsothermalMetric,
    conn: &MatrixConnection,
    report: &SimplicityReport,
    flow_opts: FlowOptions,
    n_traces: usize,
    per_trace: usize,
    seed: u64,
) -> Result<KernelBoundReport> {
    let (alpha, sup_f) = connection_sups(metric, conn);
    let n = conn.rank() as f64;
    let v_coef = report.sup_dkappa * report.c2.powi(3) / (12.0 * report.c1.powi(2));
    let k2_coef = n.powf(1.5) * (3.0 * alpha * report.tau_max).exp() * report.c2 * sup_f / 2.0;
    let flow = Flow::new(metric, Some(conn), Augment::KERNEL, flow_opts);
    let mut ws = flow.workspace();
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut out = KernelBoundReport {
        points: 0,
        max_v_b1_over_b2: 0.0,
        max_v_inv_b2: 0.0,
        worst_ratio: 0.0,
        k2_worst_ratio: 0.0,
        small_t_slope: 0.0,
    };
    let ratio = |v: f64, b: f64| if v == 0.0 { 0.0 } else if b > 0.0 { v / b } else { f64::INFINITY };
    for _ in 0..n_traces {
        let r = metric.radius * 0.999 * rng.gen::<f64>().sqrt();
        let a = rng.gen::<f64>() * 2.0 * PI;
        let th = rng.gen::<f64>() * 2.0 * PI;
        let tau = flow.trace(&mut ws, r * a.cos(), r * a.sin(), th)?;
        for k in 0..per_trace {
            let t = tau * (k as f64 + 0.5) / per_trace as f64;
            let s = flow.state(&mut ws, t);
            if s.b2 >= 0.0 {
                return Err(GeoError::ConjugatePoint { t });
            }
            let vq = ((s.b2 * s.vb1 - s.b1 * s.vb2) / (s.b2 * s.b2)).abs();
            let vi = (s.vb2 / (s.b2 * s.b2)).abs();
            out.max_v_b1_over_b2 = out.max_v_b1_over_b2.max(vq);
            out.max_v_inv_b2 = out.max_v_inv_b2.max(vi);
            out.worst_ratio = out.worst_ratio.max(ratio(vq.max(vi), v_coef * t * t));
            out.k2_worst_ratio = out.k2_worst_ratio.max(ratio(s.k2.frobenius(), k2_coef * t * t));
            out.points += 1;
        }
        // Small-t behaviour of the full kernels.
        for k in 1..=8 {
            let t = (0.05 * k as f64 / 8.0).min(tau);
            let s = flow.state(&mut ws, t);
            let w = kernel_value(WKind::A, &s).op_norm().max(kernel_value(WKind::Perp, &s).op_norm());
            out.small_t_slope = out.small_t_slope.max(w / t);
        }
    }
    Ok(out)
}
