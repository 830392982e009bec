//! Reconstruction along the family `lambda A`: forward data, filtered backprojection,
//! then a Krylov solve of `(I + W^2) f = r`, with the iteration count as a
//! conditioning proxy.

use super::kernel::{apply_w_no_connection, WKind, WOperator, WOptions};
use super::solve::gmres;
use super::{filter_stage_no_connection, relative_errors, FilterPlan};
use crate::connection::MatrixConnection;
use crate::error::Result;
use crate::flow::FlowOptions;
use crate::grid::{DiskGrid, FanBeamGrid, InteriorField};
use crate::surface::metric::IsothermalMetric;
use crate::transport::{Problem, ScatteringData};
use crate::xray::{forward_i0, interior_weights, pi0_xperp_extension};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub fan: FanBeamGrid,
    pub grid: DiskGrid,
    /// Fiber samples of the backprojection.
    pub n_theta: usize,
    pub flow: FlowOptions,
    pub w: WOptions,
    pub restart: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            fan: FanBeamGrid::new(64, 64, 1.0),
            grid: DiskGrid::new(32, 1.0),
            n_theta: 64,
            flow: FlowOptions::default(),
            w: WOptions::default(),
            restart: 30,
            tol: 1e-8,
            max_iter: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// Error of the one-shot backprojection `r`.
    pub fbp_rel_l2: f64,
    /// Error after the Krylov solve.
    pub rel_l2: f64,
    pub rel_linf: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

fn solve_row(
    lambda: Complex64,
    f: &InteriorField,
    r: &InteriorField,
    weights: &[f64],
    apply_w: &dyn Fn(&InteriorField) -> Result<InteriorField>,
    opts: &SweepOptions,
) -> Result<SweepRow> {
    let a = |x: &InteriorField| -> Result<InteriorField> {
        let mut out = x.clone();
        out.axpy(Complex64::new(1.0, 0.0), &apply_w(&apply_w(x)?)?);
        Ok(out)
    };
    let k = gmres(&a, r, weights, opts.restart, opts.tol, opts.max_iter)?;
    let sol = k.solution.as_ref().expect("gmres returns its iterate");
    let (rel_l2, rel_linf) = relative_errors(sol, f, weights);
    Ok(SweepRow {
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        fbp_rel_l2: relative_errors(r, f, weights).0,
        rel_l2,
        rel_linf,
        iterations: k.iterations,
        converged: k.converged,
        residual: k.residual,
    })
}

/// One row per `lambda`; non-convergence is recorded, not raised.
pub fn lambda_sweep(
    metric: &IsothermalMetric,
    conn: &MatrixConnection,
    lambdas: &[Complex64],
    f: &InteriorField,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    let weights = interior_weights(metric, &opts.grid);
    lambdas
        .iter()
        .map(|&lambda| {
            let c = conn.scaled(lambda);
            let plan = FilterPlan::build(metric, &c, opts.flow, opts.fan, opts.grid, opts.n_theta)?;
            let d = forward_i0(&plan.problem(), opts.fan, f)?;
            let r = plan.fbp_i0(&d);
            let w = WOperator::build(metric, &c, opts.flow, WKind::A, opts.grid, opts.w)?;
            solve_row(lambda, f, &r, &weights, &|x| w.apply(x), opts)
        })
        .collect()
}

/// The same experiment without any connection machinery: the directly coded filter
/// and the scalar kernel `-V(b1/b2)`.
pub fn no_connection_row(metric: &IsothermalMetric, f: &InteriorField, opts: &SweepOptions) -> Result<SweepRow> {
    let zero = MatrixConnection::zero(f.nch);
    let p = Problem::new(metric, &zero, opts.flow);
    let data = ScatteringData::build(&p, opts.fan)?;
    let bp = crate::transport::Backprojection::build(&p, opts.grid, opts.n_theta)?;
    let d = forward_i0(&p, opts.fan, f)?;
    let h = filter_stage_no_connection(&d, &data);
    let mut r = pi0_xperp_extension(metric, &zero, &bp, &h, false);
    r.scale(Complex64::new(-0.25, 0.0));
    let weights = interior_weights(metric, &opts.grid);
    let w_opts = opts.w;
    let flow = opts.flow;
    solve_row(
        Complex64::new(0.0, 0.0),
        f,
        &r,
        &weights,
        &|x| apply_w_no_connection(metric, flow, WKind::A, x, &w_opts),
        opts,
    )
}
