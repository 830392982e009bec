//! The error operators `W_A f = pi_0 (X_perp - A_V) u_A^f` and
//! `W_{A,perp} f = pi_0 u_A^{(X_perp - A_V) f}`, realised through their integral
//! kernels along geodesics:
//!
//! `W f(x) = 1/(2 pi) int dtheta int_0^tau w(x, theta, t) f(gamma(t)) dt` with
//! `w_A = K_1 - (b_1/b_2) K_2 - V(b_1/b_2) E^{-1}` and `w_{A,perp} = -K_2/b_2 - V(1/b_2) E^{-1}`.

use crate::connection::MatrixConnection;
use crate::error::{GeoError, Result};
use crate::flow::{Augment, Flow, FlowOptions, FlowState, FlowWorkspace};
use crate::grid::{DiskGrid, InteriorField};
use crate::harmonics::{fiber_average, mode, pi0_xperp_minus_av};
use crate::linalg::{CMat, CVec};
use crate::surface::metric::IsothermalMetric;
use crate::transport::{transport_solve, Problem};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WKind {
    /// `W_A`, the error of the `I_{A,0}` backprojection.
    A,
    /// `W_{A,perp}`, the error of the `I_{A,perp}` backprojection.
    Perp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WOptions {
    pub n_theta: usize,
    /// Kernel samples with `t < eps_rel * tau` are dropped (the kernels vanish at `t = 0`).
    pub eps_rel: f64,
    /// Largest kernel cache kept in memory; above it kernels are recomputed per application.
    pub cache_bytes: usize,
}

impl Default for WOptions {
    fn default() -> Self {
        Self { n_theta: 32, eps_rel: 1e-3, cache_bytes: 1 << 30 }
    }
}

/// Kernel value of one trace sample (without quadrature weight).
pub fn kernel_value(kind: WKind, s: &FlowState) -> CMat {
    let b2 = s.b2;
    match kind {
        WKind::A => {
            let r = s.b1 / b2;
            let v = (b2 * s.vb1 - s.b1 * s.vb2) / (b2 * b2);
            s.k1 - s.k2.scale_re(r) - s.einv.scale_re(v)
        }
        WKind::Perp => {
            let v = -s.vb2 / (b2 * b2);
            s.k2.scale_re(-1.0 / b2) - s.einv.scale_re(v)
        }
    }
}

struct KernelCache {
    /// Entry range of each mask node.
    offsets: Vec<usize>,
    pos: Vec<[f64; 2]>,
    /// `rank^2` values per entry, or one when the connection is zero.
    kern: Vec<Complex64>,
}

/// Matrix-free `W_A` or `W_{A,perp}` on an interior grid.
pub struct WOperator {
    pub kind: WKind,
    pub grid: DiskGrid,
    pub rank: usize,
    pub opts: WOptions,
    metric: IsothermalMetric,
    conn: MatrixConnection,
    flow: FlowOptions,
    nodes: Vec<usize>,
    cache: Option<KernelCache>,
}

fn visit_node(
    flow: &Flow,
    ws: &mut FlowWorkspace,
    quad: &mut Vec<(f64, f64)>,
    kind: WKind,
    x: f64,
    y: f64,
    opts: &WOptions,
    mut sink: impl FnMut(f64, f64, CMat),
) -> Result<()> {
    let nt = opts.n_theta;
    for t in 0..nt {
        let th = 2.0 * PI * t as f64 / nt as f64;
        let tau = flow.trace(ws, x, y, th)?;
        flow.quadrature(opts.eps_rel * tau, tau, quad);
        for &(tt, w) in quad.iter() {
            let s = flow.state(ws, tt);
            if s.b2 >= 0.0 {
                return Err(GeoError::ConjugatePoint { t: tt });
            }
            sink(s.x, s.y, kernel_value(kind, &s).scale_re(w / nt as f64));
        }
    }
    Ok(())
}

impl WOperator {
    pub fn build(
        metric: &IsothermalMetric,
        conn: &MatrixConnection,
        flow: FlowOptions,
        kind: WKind,
        grid: DiskGrid,
        opts: WOptions,
    ) -> Result<Self> {
        let nodes = grid.mask_nodes();
        let mut op = Self {
            kind,
            grid,
            rank: conn.rank(),
            opts,
            metric: metric.clone(),
            conn: conn.clone(),
            flow,
            nodes,
            cache: None,
        };
        if op.estimated_cache_bytes() <= opts.cache_bytes {
            op.cache = Some(op.build_cache()?);
        } else {
            // Still trace once so that geometric failures surface at build time.
            op.apply(&InteriorField::zeros(grid, op.rank))?;
        }
        Ok(op)
    }

    /// Upper estimate of the cache size from the longest chord through the centre.
    pub fn estimated_cache_bytes(&self) -> usize {
        let f = Flow::new(&self.metric, None, Augment::GEOMETRY, self.flow);
        let mut ws = f.workspace();
        let r = self.metric.radius * (1.0 - 1e-9);
        let diam = (0..8)
            .filter_map(|k| {
                let a = k as f64 * PI / 4.0;
                f.trace(&mut ws, r * a.cos(), r * a.sin(), a + PI).ok()
            })
            .fold(0.0, f64::max);
        let per_trace = ((diam * self.flow.panels_per_unit).ceil() as usize + 1) * self.flow.gl_order.max(2);
        let per_entry = 16 + 16 * if self.conn.is_zero() { 1 } else { self.rank * self.rank };
        self.nodes.len() * self.opts.n_theta * per_trace * per_entry
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    fn flow(&self) -> Flow<'_> {
        Flow::new(&self.metric, Some(&self.conn), Augment::KERNEL, self.flow)
    }

    fn build_cache(&self) -> Result<KernelCache> {
        let flow = self.flow();
        let scalar = self.conn.is_zero();
        let n = self.rank;
        let parts = self
            .nodes
            .par_iter()
            .map_init(
                || (flow.workspace(), Vec::new()),
                |(ws, quad), &k| -> Result<(Vec<[f64; 2]>, Vec<Complex64>)> {
                    let (x, y) = self.grid.xy(k);
                    let mut pos = Vec::new();
                    let mut kern = Vec::new();
                    visit_node(&flow, ws, quad, self.kind, x, y, &self.opts, |px, py, m| {
                        pos.push([px, py]);
                        if scalar {
                            kern.push(m[(0, 0)]);
                        } else {
                            for r in 0..n {
                                for c in 0..n {
                                    kern.push(m[(r, c)]);
                                }
                            }
                        }
                    })?;
                    Ok((pos, kern))
                },
            )
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        offsets.push(0);
        let total: usize = parts.iter().map(|p| p.0.len()).sum();
        let mut pos = Vec::with_capacity(total);
        let mut kern = Vec::with_capacity(total * if scalar { 1 } else { n * n });
        for (p, k) in parts {
            pos.extend_from_slice(&p);
            kern.extend_from_slice(&k);
            offsets.push(pos.len());
        }
        Ok(KernelCache { offsets, pos, kern })
    }

    /// `W f`.
    pub fn apply(&self, f: &InteriorField) -> Result<InteriorField> {
        let mut fg = f.clone();
        fg.fill_ghosts();
        let n = self.rank;
        let vals: Vec<CVec> = match &self.cache {
            Some(c) => {
                let scalar = self.conn.is_zero();
                (0..self.nodes.len())
                    .into_par_iter()
                    .map_init(
                        || CVec::zeros(n),
                        |v, a| {
                            let mut acc = CVec::zeros(n);
                            for e in c.offsets[a]..c.offsets[a + 1] {
                                fg.interp_into(c.pos[e][0], c.pos[e][1], v);
                                if scalar {
                                    acc = acc + v.scale(c.kern[e]);
                                } else {
                                    let m = CMat::from_rows(n, &c.kern[e * n * n..(e + 1) * n * n]);
                                    acc = acc + m.mul_vec(v);
                                }
                            }
                            acc
                        },
                    )
                    .collect()
            }
            None => {
                let flow = self.flow();
                self.nodes
                    .par_iter()
                    .map_init(
                        || (flow.workspace(), Vec::new(), CVec::zeros(n)),
                        |(ws, quad, v), &k| -> Result<CVec> {
                            let (x, y) = self.grid.xy(k);
                            let mut acc = CVec::zeros(n);
                            visit_node(&flow, ws, quad, self.kind, x, y, &self.opts, |px, py, m| {
                                fg.interp_into(px, py, v);
                                acc = acc + m.mul_vec(v);
                            })?;
                            Ok(acc)
                        },
                    )
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let mut out = InteriorField::zeros(self.grid, n);
        for (&k, v) in self.nodes.iter().zip(&vals) {
            out.node_mut(k).copy_from_slice(v.as_slice());
        }
        out.fill_ghosts();
        Ok(out)
    }

    /// `W^2 f`.
    pub fn apply_squared(&self, f: &InteriorField) -> Result<InteriorField> {
        self.apply(&self.apply(f)?)
    }
}

/// `W f` with zero connection, from the scalar kernels `-V(b_1/b_2)` (for `W_A`) or
/// `-V(1/b_2)` (for `W_{A,perp}`) on Jacobi fields alone.
pub fn apply_w_no_connection(
    metric: &IsothermalMetric,
    flow_opts: FlowOptions,
    kind: WKind,
    f: &InteriorField,
    opts: &WOptions,
) -> Result<InteriorField> {
    let grid = f.grid;
    let mut fg = f.clone();
    fg.fill_ghosts();
    let aug = Augment { jacobi: true, variation: true, transport: false, kfields: false };
    let flow = Flow::new(metric, None, aug, flow_opts);
    let nodes = grid.mask_nodes();
    let nt = opts.n_theta;
    let vals = nodes
        .par_iter()
        .map_init(
            || (flow.workspace(), Vec::new()),
            |(ws, quad), &k| -> Result<CVec> {
                let (x, y) = grid.xy(k);
                let mut acc = CVec::zeros(f.nch);
                for t in 0..nt {
                    let tau = flow.trace(ws, x, y, 2.0 * PI * t as f64 / nt as f64)?;
                    flow.quadrature(opts.eps_rel * tau, tau, quad);
                    for &(tt, w) in quad.iter() {
                        let s = flow.state(ws, tt);
                        let v = match kind {
                            WKind::A => -(s.b2 * s.vb1 - s.b1 * s.vb2) / (s.b2 * s.b2),
                            WKind::Perp => s.vb2 / (s.b2 * s.b2),
                        };
                        acc = acc + fg.interp(s.x, s.y).scale(Complex64::new(v * w / nt as f64, 0.0));
                    }
                }
                Ok(acc)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut out = InteriorField::zeros(grid, f.nch);
    for (&k, v) in nodes.iter().zip(&vals) {
        out.node_mut(k).copy_from_slice(v.as_slice());
    }
    out.fill_ghosts();
    Ok(out)
}

/// `W f` straight from the definition: solve the transport equation on the grid,
/// then differentiate (for `W_A`) or average (for `W_{A,perp}`).
pub fn apply_w_definitional(p: &Problem, kind: WKind, f: &InteriorField, n_theta: usize) -> Result<InteriorField> {
    let grid = f.grid;
    let mut fg = f.clone();
    fg.fill_ghosts();
    match kind {
        WKind::A => {
            let u = transport_solve(p, grid, n_theta, &|x, y, _| fg.interp(x, y))?;
            Ok(pi0_xperp_minus_av(p.metric, p.conn, &mode(&u, 1), &mode(&u, -1)))
        }
        WKind::Perp => {
            let (fx, fy) = fg.gradient();
            let metric = p.metric;
            let conn = p.conn;
            let u = transport_solve(p, grid, n_theta, &|x, y, th| {
                let lam = metric.lambda(x, y);
                let (s, c) = th.sin_cos();
                let d = (fx.interp(x, y).scale(Complex64::new(s, 0.0)) - fy.interp(x, y).scale(Complex64::new(c, 0.0)))
                    .scale(Complex64::new((-lam).exp(), 0.0));
                d - conn.vertical(x, y, th, lam).mul_vec(&fg.interp(x, y))
            })?;
            let mut out = fiber_average(&u);
            out.fill_ghosts();
            Ok(out)
        }
    }
}
