//! Attenuated transport along geodesics: the propagator `U_A`, scattering data
//! `C_A`, attenuated integrals `I_A f`, first-integral extensions `h_{psi,A}` and
//! interior solutions `u_A^f`.

use crate::connection::MatrixConnection;
use crate::error::Result;
use crate::flow::{Augment, Flow, FlowOptions, FlowWorkspace};
use crate::grid::{BoundaryField, DiskGrid, FanBeamGrid, SphereBundleField};
use crate::linalg::{CMat, CVec};
use crate::surface::metric::IsothermalMetric;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Metric, connection and trace options shared by every transport computation.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub metric: &'a IsothermalMetric,
    pub conn: &'a MatrixConnection,
    pub flow: FlowOptions,
}

/// Integrand on the sphere bundle, `(x, y, theta) -> C^n`.
pub type Integrand<'f> = dyn Fn(f64, f64, f64) -> CVec + Sync + 'f;

impl<'a> Problem<'a> {
    pub fn new(metric: &'a IsothermalMetric, conn: &'a MatrixConnection, flow: FlowOptions) -> Self {
        Self { metric, conn, flow }
    }

    pub fn rank(&self) -> usize {
        self.conn.rank()
    }

    pub fn with_conn<'b>(&self, conn: &'b MatrixConnection) -> Problem<'b>
    where
        'a: 'b,
    {
        Problem { metric: self.metric, conn, flow: self.flow }
    }

    pub fn flow(&self, aug: Augment) -> Flow<'a> {
        Flow::new(self.metric, Some(self.conn), aug, self.flow)
    }
}

/// Where the geodesic through a point enters, and the propagator there.
#[derive(Clone, Copy, Debug)]
pub struct Entry {
    /// Fan coordinates of the entry point on the inward boundary.
    pub beta: f64,
    pub omega: f64,
    /// Backward exit time `tau(x, -v)`.
    pub tau: f64,
    /// `U_A(x, v)`.
    pub u: CMat,
}

/// Traces backwards from `(x, y, th)`; `flow` must carry the transport block.
pub fn backward_entry(flow: &Flow, ws: &mut FlowWorkspace, x: f64, y: f64, th: f64) -> Result<Entry> {
    let tau = flow.trace(ws, x, y, th + PI)?;
    let s = flow.state(ws, tau);
    let (beta, omega) = FanBeamGrid::fan_coords(s.y.atan2(s.x), s.th + PI);
    Ok(Entry { beta, omega, tau, u: s.einv })
}

/// `U_A(x, v)`: the solution of `XU + AU = 0` equal to the identity on the inward boundary.
pub fn propagator_u(p: &Problem, x: f64, y: f64, th: f64) -> Result<CMat> {
    let flow = p.flow(Augment::TRANSPORT);
    let mut ws = flow.workspace();
    Ok(backward_entry(&flow, &mut ws, x, y, th)?.u)
}

/// Scattering data of one inward node `p`.
#[derive(Clone, Copy, Debug)]
pub struct ScatterNode {
    pub tau: f64,
    /// Fan coordinates of the exit point `alpha(p)`.
    pub exit_beta: f64,
    pub exit_omega: f64,
    /// `E_A^{-1}(p, tau) = C_A(alpha(p))^{-1} = C_A(a(p))`.
    pub einv: CMat,
    /// `C_A(alpha(p))`.
    pub c_alpha: CMat,
}

/// Scattering relation and scattering data on a fan-beam grid, one trace per inward node.
#[derive(Clone, Debug)]
pub struct ScatteringData {
    pub fan: FanBeamGrid,
    pub rank: usize,
    nodes: Vec<ScatterNode>,
    /// Worst condition estimate `|C| |C^{-1}|` seen while inverting.
    pub max_condition: f64,
}

impl ScatteringData {
    pub fn build(p: &Problem, fan: FanBeamGrid) -> Result<Self> {
        let flow = p.flow(Augment::TRANSPORT);
        let half = fan.n_omega / 2;
        let idx: Vec<(usize, usize)> = (0..fan.n_beta).flat_map(|i| fan.plus_range().map(move |j| (i, j))).collect();
        let nodes = idx
            .par_iter()
            .map_init(
                || flow.workspace(),
                |ws, &(i, j)| -> Result<ScatterNode> {
                    let (x, y) = fan.point(i);
                    let tau = flow.trace(ws, x, y, fan.theta(i, j))?;
                    let s = flow.state(ws, tau);
                    let (exit_beta, exit_omega) = FanBeamGrid::fan_coords(s.y.atan2(s.x), s.th);
                    let c_alpha = s.einv.inverse().ok_or_else(|| {
                        crate::GeoError::Integration("singular transport matrix".into())
                    })?;
                    Ok(ScatterNode { tau, exit_beta, exit_omega, einv: s.einv, c_alpha })
                },
            )
            .collect::<Result<Vec<_>>>()?;
        debug_assert_eq!(nodes.len(), fan.n_beta * half);
        let max_condition = nodes.iter().map(|n| n.einv.frobenius() * n.c_alpha.frobenius()).fold(0.0, f64::max);
        Ok(Self { fan, rank: p.rank(), nodes, max_condition })
    }

    /// Node data for an inward index `j` in the plus range.
    pub fn node(&self, i: usize, j: usize) -> &ScatterNode {
        let r = self.fan.plus_range();
        debug_assert!(r.contains(&j));
        &self.nodes[i * (r.end - r.start) + (j - r.start)]
    }

    /// `C_A` at an outward node.
    pub fn c_minus(&self, i: usize, j: usize) -> CMat {
        self.node(i, self.fan.antipode(j)).einv
    }

    /// Fan coordinates of `alpha(q)` for an outward node `q`: the entry point of its geodesic.
    pub fn alpha_minus(&self, i: usize, j: usize) -> (f64, f64) {
        let n = self.node(i, self.fan.antipode(j));
        antipodal(n.exit_beta, n.exit_omega)
    }

    /// Fan coordinates of `alpha_a(p) = a(alpha(p))` for an inward node `p`.
    pub fn alpha_a_plus(&self, i: usize, j: usize) -> (f64, f64) {
        let n = self.node(i, j);
        antipodal(n.exit_beta, n.exit_omega)
    }

    /// Interpolated `C_A(alpha(p))` at an arbitrary inward point, via the inward-node table.
    pub fn c_alpha_at(&self, beta: f64, omega: f64) -> CMat {
        let n = self.rank;
        let mut acc = CMat::zeros(n);
        for_each_plus_stencil(&self.fan, beta, omega, |i, j, w| {
            acc += self.node(i, j).c_alpha.scale_re(w);
        });
        acc
    }
}

/// Fan coordinates after flipping the direction.
pub fn antipodal(beta: f64, omega: f64) -> (f64, f64) {
    let w = omega + PI;
    (beta, if w > PI { w - 2.0 * PI } else { w })
}

/// Visits the cubic interpolation stencil of an inward point (same rule as
/// [`BoundaryField::interp_plus`]).
pub fn for_each_plus_stencil(fan: &FanBeamGrid, beta: f64, omega: f64, mut f: impl FnMut(usize, usize, f64)) {
    let nb = fan.n_beta as isize;
    let pb = beta.rem_euclid(2.0 * PI) / fan.d_beta();
    let i0 = pb.floor() as isize - 1;
    let wb = crate::grid::lagrange4(pb - i0 as f64);
    let r = fan.plus_range();
    let (lo, hi) = (r.start as isize, r.end as isize - 4);
    let po = (omega + PI) / fan.d_omega() - 0.5;
    let j0 = (po.floor() as isize - 1).clamp(lo, hi);
    let wo = crate::grid::lagrange4(po - j0 as f64);
    for (a, &wa) in wb.iter().enumerate() {
        let i = (i0 + a as isize).rem_euclid(nb) as usize;
        for (b, &wbb) in wo.iter().enumerate() {
            f(i, (j0 + b as isize) as usize, wa * wbb);
        }
    }
}

/// `I_A f` on the inward half of `fan`; outward entries are zero.
pub fn attenuated_integral(p: &Problem, fan: FanBeamGrid, f: &Integrand) -> Result<BoundaryField> {
    let n = p.rank();
    let flow = p.flow(Augment::TRANSPORT);
    let idx: Vec<(usize, usize)> = (0..fan.n_beta).flat_map(|i| fan.plus_range().map(move |j| (i, j))).collect();
    let vals = idx
        .par_iter()
        .map_init(
            || (flow.workspace(), Vec::new()),
            |(ws, quad), &(i, j)| -> Result<CVec> {
                let (x, y) = fan.point(i);
                let tau = flow.trace(ws, x, y, fan.theta(i, j))?;
                Ok(line_integral(&flow, ws, quad, tau, n, f))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut out = BoundaryField::zeros(fan, n);
    for (&(i, j), v) in idx.iter().zip(&vals) {
        out.at_mut(i, j).copy_from_slice(v.as_slice());
    }
    Ok(out)
}

/// `int_0^tau E^{-1}(t) f(phi_t) dt` along the trace held in `ws`.
pub fn line_integral(
    flow: &Flow,
    ws: &mut FlowWorkspace,
    quad: &mut Vec<(f64, f64)>,
    tau: f64,
    n: usize,
    f: &Integrand,
) -> CVec {
    flow.quadrature(0.0, tau, quad);
    let mut acc = CVec::zeros(n);
    for &(t, w) in quad.iter() {
        let s = flow.state(ws, t);
        let v = f(s.x, s.y, s.th);
        let ev = s.einv.mul_vec(&v).scale(Complex64::new(w, 0.0));
        acc = acc + ev;
    }
    acc
}

/// `u_A^f(x, v)` at one point.
pub fn solution_at(p: &Problem, x: f64, y: f64, th: f64, f: &Integrand) -> Result<CVec> {
    let flow = p.flow(Augment::TRANSPORT);
    let mut ws = flow.workspace();
    let mut quad = Vec::new();
    let tau = flow.trace(&mut ws, x, y, th)?;
    Ok(line_integral(&flow, &mut ws, &mut quad, tau, p.rank(), f))
}

/// `u_A^f` at every masked node of `grid` and every fiber angle.
pub fn transport_solve(p: &Problem, grid: DiskGrid, n_theta: usize, f: &Integrand) -> Result<SphereBundleField> {
    let n = p.rank();
    let flow = p.flow(Augment::TRANSPORT);
    let mask = grid.mask_nodes();
    let rows = mask
        .par_iter()
        .map_init(
            || (flow.workspace(), Vec::new()),
            |(ws, quad), &k| -> Result<Vec<CVec>> {
                let (x, y) = grid.xy(k);
                (0..n_theta)
                    .map(|t| {
                        let th = 2.0 * PI * t as f64 / n_theta as f64;
                        let tau = flow.trace(ws, x, y, th)?;
                        Ok(line_integral(&flow, ws, quad, tau, n, f))
                    })
                    .collect()
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut out = SphereBundleField::zeros(grid, n_theta, n);
    for (&k, row) in mask.iter().zip(&rows) {
        for (t, v) in row.iter().enumerate() {
            out.at_mut(k, t).copy_from_slice(v.as_slice());
        }
    }
    Ok(out)
}

/// Entry points and propagators for every masked node and fiber angle of a grid;
/// realises first-integral extensions `h_{psi,A}` and `h_{psi,-A^*}`.
#[derive(Clone, Debug)]
pub struct Backprojection {
    pub grid: DiskGrid,
    pub n_theta: usize,
    pub rank: usize,
    pub nodes: Vec<usize>,
    entries: Vec<(f64, f64)>,
    /// `U_A` per entry, `rank^2` values each; empty when the connection is zero.
    u: Vec<Complex64>,
}

impl Backprojection {
    pub fn build(p: &Problem, grid: DiskGrid, n_theta: usize) -> Result<Self> {
        let n = p.rank();
        let live = !p.conn.is_zero();
        let flow = p.flow(Augment::TRANSPORT);
        let nodes = grid.mask_nodes();
        let rows = nodes
            .par_iter()
            .map_init(
                || flow.workspace(),
                |ws, &k| -> Result<Vec<Entry>> {
                    let (x, y) = grid.xy(k);
                    (0..n_theta)
                        .map(|t| backward_entry(&flow, ws, x, y, 2.0 * PI * t as f64 / n_theta as f64))
                        .collect()
                },
            )
            .collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::with_capacity(nodes.len() * n_theta);
        let mut u = Vec::with_capacity(if live { nodes.len() * n_theta * n * n } else { 0 });
        for row in &rows {
            for e in row {
                entries.push((e.beta, e.omega));
                if live {
                    for r in 0..n {
                        for c in 0..n {
                            u.push(e.u[(r, c)]);
                        }
                    }
                }
            }
        }
        Ok(Self { grid, n_theta, rank: n, nodes, entries, u })
    }

    pub fn entry(&self, node: usize, t: usize) -> (f64, f64) {
        self.entries[node * self.n_theta + t]
    }

    /// `U_A` at the `node`-th masked node and angle index `t`.
    pub fn u(&self, node: usize, t: usize) -> CMat {
        let n = self.rank;
        if self.u.is_empty() {
            return CMat::identity(n);
        }
        let o = (node * self.n_theta + t) * n * n;
        CMat::from_rows(n, &self.u[o..o + n * n])
    }

    /// `h_{psi,A}` (or `h_{psi,-A^*}` when `adjoint_partner`) sampled on the grid.
    pub fn extend(&self, h: &BoundaryField, adjoint_partner: bool) -> SphereBundleField {
        let n = self.rank;
        let mut out = SphereBundleField::zeros(self.grid, self.n_theta, n);
        let vals: Vec<Vec<CVec>> = (0..self.nodes.len())
            .into_par_iter()
            .map(|a| {
                (0..self.n_theta)
                    .map(|t| {
                        let (b, w) = self.entry(a, t);
                        let hv = h.interp_plus(b, w);
                        if self.u.is_empty() {
                            return hv;
                        }
                        let u = self.u(a, t);
                        let m = if adjoint_partner { partner(&u) } else { u };
                        m.mul_vec(&hv)
                    })
                    .collect()
            })
            .collect();
        for (a, row) in vals.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                out.at_mut(self.nodes[a], t).copy_from_slice(v.as_slice());
            }
        }
        out
    }
}

/// `U_{-A^*} = (U_A^*)^{-1}`.
pub fn partner(u: &CMat) -> CMat {
    u.adjoint().inverse().expect("transport matrices are invertible")
}

/// `h_{psi,A}` at one point by direct tracing.
pub fn extension_at(p: &Problem, h: &BoundaryField, x: f64, y: f64, th: f64) -> Result<CVec> {
    let flow = p.flow(Augment::TRANSPORT);
    let mut ws = flow.workspace();
    let e = backward_entry(&flow, &mut ws, x, y, th)?;
    Ok(e.u.mul_vec(&h.interp_plus(e.beta, e.omega)))
}

/// Residual of `U_A^* U_{-A^*} = I` at a point.
pub fn duality_residual(p: &Problem, x: f64, y: f64, th: f64) -> Result<f64> {
    let u = propagator_u(p, x, y, th)?;
    let na = p.conn.neg_adjoint();
    let v = propagator_u(&p.with_conn(&na), x, y, th)?;
    Ok((u.adjoint() * v - CMat::identity(p.rank())).frobenius())
}

/// Largest residual of `C_A(q) C_A(alpha_a(q)) = I` over outward nodes, with
/// `C_A(alpha_a(q))` obtained from an independent trace started at `alpha_a(a(q))`.
pub fn scattering_identity_residual(p: &Problem, data: &ScatteringData) -> Result<f64> {
    let fan = data.fan;
    let flow = p.flow(Augment::TRANSPORT);
    let idx: Vec<(usize, usize)> = (0..fan.n_beta).flat_map(|i| fan.plus_range().map(move |j| (i, j))).collect();
    let res = idx
        .par_iter()
        .map_init(
            || flow.workspace(),
            |ws, &(i, j)| -> Result<f64> {
                // q = a(p) with p = (i, j); alpha_a(q) = alpha(p), reached by tracing from a(alpha(p)).
                let nd = data.node(i, j);
                let (b, w) = antipodal(nd.exit_beta, nd.exit_omega);
                let r = fan.radius;
                let tau = flow.trace(ws, r * b.cos(), r * b.sin(), b + PI + w)?;
                let c_alpha = flow.state(ws, tau).einv;
                let c_q = data.c_minus(i, fan.antipode(j));
                Ok((c_q * c_alpha - CMat::identity(data.rank)).frobenius())
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(res.into_iter().fold(0.0, f64::max))
}
