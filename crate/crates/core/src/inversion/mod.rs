//! Reconstruction: the boundary filter and one-shot backprojections, the error
//! operators `W_A`, `W_{A,perp}`, Neumann and Krylov solvers, operator-norm
//! estimates and the a-priori bound on `|W_A|`.

pub mod bound;
pub mod kernel;
pub mod solve;
pub mod sweep;

pub use bound::{
    connection_sups, kernel_bound_check, no_connection_bound, scale_to_bound, scaled_bound, w_norm_bound,
    BoundEvaluation, BoundInputs, KernelBoundReport,
};
pub use solve::{gmres, neumann_solve, operator_norm_estimate, KrylovResult, NeumannResult};
pub use sweep::{lambda_sweep, no_connection_row, SweepOptions, SweepRow};
pub use kernel::{apply_w_definitional, apply_w_no_connection, WKind, WOperator, WOptions};

use crate::boundary::{extend_q, fold_b, Sign};
use crate::connection::MatrixConnection;
use crate::error::Result;
use crate::flow::FlowOptions;
use crate::grid::{BoundaryField, DiskGrid, FanBeamGrid, InteriorField};
use crate::harmonics::{hilbert_boundary, Parity};
use crate::surface::metric::IsothermalMetric;
use crate::transport::{Backprojection, Problem, ScatteringData};
use crate::xray::{pi0_extension, pi0_xperp_extension};
use num_complex::Complex64;

/// Everything the filter and backprojection stages need for one metric and connection.
pub struct FilterPlan {
    pub metric: IsothermalMetric,
    pub conn: MatrixConnection,
    pub flow: FlowOptions,
    pub fan: FanBeamGrid,
    pub grid: DiskGrid,
    pub n_theta: usize,
    pub scattering: ScatteringData,
    /// Entry points and `U_A` for every mask node and fiber angle.
    pub backprojection: Backprojection,
}

impl FilterPlan {
    pub fn build(
        metric: &IsothermalMetric,
        conn: &MatrixConnection,
        flow: FlowOptions,
        fan: FanBeamGrid,
        grid: DiskGrid,
        n_theta: usize,
    ) -> Result<Self> {
        let p = Problem::new(metric, conn, flow);
        let scattering = ScatteringData::build(&p, fan)?;
        let backprojection = Backprojection::build(&p, grid, n_theta)?;
        Ok(Self {
            metric: metric.clone(),
            conn: conn.clone(),
            flow,
            fan,
            grid,
            n_theta,
            scattering,
            backprojection,
        })
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem::new(&self.metric, &self.conn, self.flow)
    }

    pub fn rank(&self) -> usize {
        self.conn.rank()
    }

    /// `B_{A,+} H Q_{A,-} d`.
    pub fn filter_stage(&self, d: &BoundaryField) -> BoundaryField {
        let q = extend_q(d, &self.scattering, Sign::Minus);
        fold_b(&hilbert_boundary(&q, Parity::Full), &self.scattering, Sign::Plus)
    }

    /// `f + W_A^2 f` from `d = I_{A,0} f`, as `-1/4 pi_0 (X_perp - A_V) h_{psi,A}` of the filtered data.
    pub fn fbp_i0(&self, d: &BoundaryField) -> InteriorField {
        let h = self.filter_stage(d);
        let mut r = pi0_xperp_extension(&self.metric, &self.conn, &self.backprojection, &h, false);
        r.scale(Complex64::new(-0.25, 0.0));
        r
    }

    /// `f + W_{A,perp}^2 f` from `d = I_{A,perp} f`, as `-1/4 pi_0 h_{psi,A}` of the filtered data.
    pub fn fbp_iperp(&self, d: &BoundaryField) -> InteriorField {
        let h = self.filter_stage(d);
        let mut r = pi0_extension(&self.backprojection, &h, false);
        r.scale(Complex64::new(-0.25, 0.0));
        r
    }
}

/// The filter without connection, written out directly: odd extension across the
/// scattering relation, Hilbert transform by discrete convolution, even fold.
pub fn filter_stage_no_connection(d: &BoundaryField, data: &ScatteringData) -> BoundaryField {
    let fan = data.fan;
    let no = fan.n_omega;
    let nch = d.nch;
    // Q_-: copy inward values, minus the entry value on the outward half.
    let mut q = d.restrict_plus();
    for i in 0..fan.n_beta {
        for j in (0..no).filter(|&j| !fan.is_plus(j)) {
            let (b, w) = data.alpha_minus(i, j);
            let v = d.interp_plus(b, w);
            for c in 0..nch {
                q.at_mut(i, j)[c] = -v[c];
            }
        }
    }
    // Discrete kernel of the multiplier -i sgn(k) with the Nyquist mode removed.
    let dw = fan.d_omega();
    let kern: Vec<f64> = (0..no)
        .map(|m| (1..no.div_ceil(2)).map(|k| (k as f64 * m as f64 * dw).sin()).sum::<f64>() * 2.0 / no as f64)
        .collect();
    let mut hq = BoundaryField::zeros(fan, nch);
    for i in 0..fan.n_beta {
        for j in 0..no {
            for k in 0..no {
                let w = kern[(j + no - k) % no];
                for c in 0..nch {
                    let v = q.at(i, k)[c] * w;
                    hq.at_mut(i, j)[c] += v;
                }
            }
        }
    }
    // B_+: add the exit value.
    let mut out = BoundaryField::zeros(fan, nch);
    for i in 0..fan.n_beta {
        for j in fan.plus_range() {
            let nd = data.node(i, j);
            let e = hq.interp_minus(nd.exit_beta, nd.exit_omega);
            for c in 0..nch {
                out.at_mut(i, j)[c] = hq.at(i, j)[c] + e[c];
            }
        }
    }
    out
}

/// Relative errors `(|r - f|_2 / |f|_2, |r - f|_inf / |f|_inf)` over the mask.
pub fn relative_errors(r: &InteriorField, f: &InteriorField, weights: &[f64]) -> (f64, f64) {
    let d = r.sub(f);
    (d.norm(weights) / f.norm(weights), d.max_abs_masked() / f.max_abs_masked())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::PhantomSpec;
    use crate::xray::{forward_i0, forward_iperp, interior_weights};

    #[test]
    fn filter_without_connection_matches_direct_code() {
        let m = IsothermalMetric::from_preset("bump(-0.15,0.5,0.1,-0.1,1)").unwrap();
        let a = MatrixConnection::zero(2);
        let grid = DiskGrid::new(16, 1.0);
        let fan = FanBeamGrid::new(32, 32, 1.0);
        let plan = FilterPlan::build(&m, &a, FlowOptions::default(), fan, grid, 16).unwrap();
        let f = PhantomSpec::default().sample(grid, 2).unwrap();
        let d = forward_i0(&plan.problem(), fan, &f).unwrap();
        let h1 = plan.filter_stage(&d);
        let h2 = filter_stage_no_connection(&d, &plan.scattering);
        let err = h1.data.iter().zip(&h2.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = h1.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * scale, "{err}");
        let zero = BoundaryField::zeros(fan, 2);
        assert!(plan.filter_stage(&zero).data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn flat_reconstruction_small_grid() {
        let m = IsothermalMetric::euclidean(1.0);
        let a = MatrixConnection::zero(1);
        let grid = DiskGrid::new(48, 1.0);
        let fan = FanBeamGrid::new(96, 96, 1.0);
        let plan = FilterPlan::build(&m, &a, FlowOptions::default(), fan, grid, 48).unwrap();
        let f = PhantomSpec::default().sample(grid, 1).unwrap();
        let w = interior_weights(&m, &grid);
        let r = plan.fbp_i0(&forward_i0(&plan.problem(), fan, &f).unwrap());
        let (e0, _) = relative_errors(&r, &f, &w);
        let rp = plan.fbp_iperp(&forward_iperp(&plan.problem(), fan, &f).unwrap());
        let (ep, _) = relative_errors(&rp, &f, &w);
        assert!(e0 < 0.05 && ep < 0.05, "{e0} {ep}");
    }
}
