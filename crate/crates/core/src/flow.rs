//! Augmented geodesic flow: position and angle, optionally with Jacobi fields, their
//! vertical variations, the inverse transport matrix and the curvature-weighted fields `K_l`.

use crate::connection::MatrixConnection;
use crate::error::Result;
use crate::linalg::CMat;
use crate::ode::{DenseSolution, Dopri5, ExitEvent, OdeOptions};
use crate::quadrature::Rule;
use crate::surface::metric::IsothermalMetric;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step in metric arc length.
    pub max_step: f64,
    /// Quadrature panels per unit of arc length along a trace.
    pub panels_per_unit: f64,
    pub gl_order: usize,
    /// Traces longer than this are reported as trapped.
    pub t_max: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, max_step: 0.1, panels_per_unit: 8.0, gl_order: 4, t_max: 100.0 }
    }
}

impl FlowOptions {
    pub fn tight() -> Self {
        Self { rtol: 1e-11, atol: 1e-13, max_step: 0.05, ..Self::default() }
    }
}

/// Which augmented equations to carry along.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Augment {
    pub jacobi: bool,
    pub variation: bool,
    pub transport: bool,
    pub kfields: bool,
}

impl Augment {
    pub const GEOMETRY: Self = Self { jacobi: false, variation: false, transport: false, kfields: false };
    pub const JACOBI: Self = Self { jacobi: true, variation: false, transport: false, kfields: false };
    pub const TRANSPORT: Self = Self { jacobi: false, variation: false, transport: true, kfields: false };
    pub const KERNEL: Self = Self { jacobi: true, variation: true, transport: true, kfields: true };
}

/// Decoded state at one time.
#[derive(Clone, Copy, Debug)]
pub struct FlowState {
    pub x: f64,
    pub y: f64,
    pub th: f64,
    pub b1: f64,
    pub c1: f64,
    pub b2: f64,
    pub c2: f64,
    pub vb1: f64,
    pub vc1: f64,
    pub vb2: f64,
    pub vc2: f64,
    pub einv: CMat,
    pub k1: CMat,
    pub k2: CMat,
}

pub struct Flow<'a> {
    pub metric: &'a IsothermalMetric,
    pub conn: Option<&'a MatrixConnection>,
    pub aug: Augment,
    pub opts: FlowOptions,
    n: usize,
    dim: usize,
    off_var: usize,
    off_einv: usize,
    off_k: usize,
}

/// Per-thread scratch reused across traces.
pub struct FlowWorkspace {
    ode: Dopri5,
    pub sol: DenseSolution,
    buf: Vec<f64>,
}

impl<'a> Flow<'a> {
    /// A zero connection is never integrated; its transport matrices are identities.
    pub fn new(metric: &'a IsothermalMetric, conn: Option<&'a MatrixConnection>, aug: Augment, opts: FlowOptions) -> Self {
        let n = conn.map(|c| c.rank()).unwrap_or(1);
        let live = conn.is_some_and(|c| !c.is_zero()) && (aug.transport || aug.kfields);
        let mut aug = aug;
        if !live {
            aug.transport = false;
            aug.kfields = false;
        }
        if aug.variation || aug.kfields {
            aug.jacobi = true;
        }
        let mut dim = 3;
        if aug.jacobi {
            dim += 4;
        }
        let off_var = dim;
        if aug.variation {
            dim += 4;
        }
        let off_einv = dim;
        if aug.transport || aug.kfields {
            aug.transport = true;
            dim += 2 * n * n;
        }
        let off_k = dim;
        if aug.kfields {
            dim += 4 * n * n;
        }
        Self { metric, conn: if live { conn } else { None }, aug, opts, n, dim, off_var, off_einv, off_k }
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn workspace(&self) -> FlowWorkspace {
        FlowWorkspace { ode: Dopri5::new(self.dim), sol: DenseSolution::default(), buf: vec![0.0; self.dim] }
    }

    #[inline]
    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> bool {
        let (x, yy, th) = (y[0], y[1], y[2]);
        let Some(m) = self.metric.jet(x, yy) else { return false };
        let el = (-m.lam).exp();
        let (s, c) = th.sin_cos();
        dy[0] = el * c;
        dy[1] = el * s;
        dy[2] = el * (-m.lx * s + m.ly * c);
        if self.aug.jacobi {
            dy[3] = -y[4];
            dy[4] = m.kappa * y[3];
            dy[5] = -y[6];
            dy[6] = m.kappa * y[5];
        }
        if self.aug.variation {
            let kp = el * (s * m.kx - c * m.ky);
            let o = self.off_var;
            dy[o] = -y[o + 1];
            dy[o + 1] = m.kappa * y[o] + y[5] * kp * y[3];
            dy[o + 2] = -y[o + 3];
            dy[o + 3] = m.kappa * y[o + 2] + y[5] * kp * y[5];
        }
        if let Some(conn) = self.conn {
            let n = self.n;
            let e = Complex64::from_polar(el, th);
            let em = Complex64::from_polar(el, -th);
            let (a, fstar) = if self.aug.kfields {
                let j = conn.jet(x, yy);
                (j.az.scale(e) + j.azb.scale(em), Some(MatrixConnection::star_curvature_from_jet(&j, m.lam)))
            } else {
                let (az, azb) = conn.components(x, yy);
                (az.scale(e) + azb.scale(em), None)
            };
            let nn2 = 2 * n * n;
            let oe = self.off_einv;
            CMat::mul_into_reals(&y[oe..oe + nn2], &a, &mut dy[oe..oe + nn2]);
            if let Some(f) = fstar {
                let einv = CMat::read_reals(n, &y[oe..oe + nn2]);
                let ef = einv * f;
                for (l, b) in [(0usize, y[3]), (1, y[5])] {
                    let ok = self.off_k + l * nn2;
                    CMat::mul_into_reals(&y[ok..ok + nn2], &a, &mut dy[ok..ok + nn2]);
                    let src = ef.scale_re(b);
                    let mut tmp = [0.0; 32];
                    src.write_reals(&mut tmp[..nn2]);
                    for (d, t) in dy[ok..ok + nn2].iter_mut().zip(&tmp[..nn2]) {
                        *d += t;
                    }
                }
            }
        }
        true
    }

    fn initial_state(&self, x: f64, y: f64, th: f64, out: &mut [f64]) {
        out.fill(0.0);
        out[0] = x;
        out[1] = y;
        out[2] = th;
        if self.aug.jacobi {
            out[3] = 1.0;
            out[6] = 1.0;
        }
        if self.aug.transport {
            let nn2 = 2 * self.n * self.n;
            CMat::identity(self.n).write_reals(&mut out[self.off_einv..self.off_einv + nn2]);
        }
    }

    /// Integrates from `(x, y, th)` to the boundary exit; returns the exit time.
    pub fn trace(&self, ws: &mut FlowWorkspace, x: f64, y: f64, th: f64) -> Result<f64> {
        let r_max = self.metric.radius;
        let r = (x * x + y * y).sqrt();
        let el = self.metric.lambda(x, y).exp();
        let chart_len = if r_max - r < 1e-9 * r_max {
            let mu = -(x * th.cos() + y * th.sin()) / r.max(1e-300);
            2.0 * r_max * mu.max(1e-9)
        } else {
            r_max - r
        };
        if r_max - r < 1e-12 * r_max && x * th.cos() + y * th.sin() >= 0.0 {
            // Outward or tangent at the boundary: the geodesic leaves at once.
            self.initial_state(x, y, th, &mut ws.buf);
            ws.sol.set_constant(&ws.buf);
            return Ok(0.0);
        }
        let ode_opts = OdeOptions {
            rtol: self.opts.rtol,
            atol: self.opts.atol,
            max_step: self.opts.max_step,
            h_init: (0.1 * chart_len * el).clamp(1e-9, self.opts.max_step),
            t_max: self.opts.t_max,
            event_tol: 1e-10 * r_max,
            ..OdeOptions::default()
        };
        let g = move |s: &[f64]| s[0] * s[0] + s[1] * s[1] - r_max * r_max;
        let event = ExitEvent { prefix: 2, g: &g };
        self.initial_state(x, y, th, &mut ws.buf);
        let y0 = std::mem::take(&mut ws.buf);
        let res = ws.ode.integrate(&|s: &[f64], d: &mut [f64]| self.rhs(s, d), &y0, &ode_opts, &event, &mut ws.sol);
        ws.buf = y0;
        res
    }

    /// Decodes the traced state at time `t`.
    pub fn state(&self, ws: &mut FlowWorkspace, t: f64) -> FlowState {
        ws.sol.eval(t, &mut ws.buf);
        self.decode(&ws.buf)
    }

    /// Position and angle only; cheaper than [`Flow::state`].
    pub fn position(&self, ws: &mut FlowWorkspace, t: f64) -> (f64, f64, f64) {
        ws.sol.eval_prefix(t, 3, &mut ws.buf);
        (ws.buf[0], ws.buf[1], ws.buf[2])
    }

    fn decode(&self, v: &[f64]) -> FlowState {
        let n = self.n;
        let nn2 = 2 * n * n;
        let id = CMat::identity(n);
        let z = CMat::zeros(n);
        let j = self.aug.jacobi;
        let var = self.aug.variation;
        let o = self.off_var;
        FlowState {
            x: v[0],
            y: v[1],
            th: v[2],
            b1: if j { v[3] } else { 0.0 },
            c1: if j { v[4] } else { 0.0 },
            b2: if j { v[5] } else { 0.0 },
            c2: if j { v[6] } else { 0.0 },
            vb1: if var { v[o] } else { 0.0 },
            vc1: if var { v[o + 1] } else { 0.0 },
            vb2: if var { v[o + 2] } else { 0.0 },
            vc2: if var { v[o + 3] } else { 0.0 },
            einv: if self.aug.transport { CMat::read_reals(n, &v[self.off_einv..self.off_einv + nn2]) } else { id },
            k1: if self.aug.kfields { CMat::read_reals(n, &v[self.off_k..self.off_k + nn2]) } else { z },
            k2: if self.aug.kfields { CMat::read_reals(n, &v[self.off_k + nn2..self.off_k + 2 * nn2]) } else { z },
        }
    }

    /// Composite Gauss-Legendre nodes and weights on `[t0, tau]`.
    pub fn quadrature(&self, t0: f64, tau: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        if tau <= t0 {
            return;
        }
        let panels = ((tau - t0) * self.opts.panels_per_unit).ceil().max(1.0) as usize;
        thread_local! {
            static RULES: std::cell::RefCell<Vec<Option<Rule>>> = const { std::cell::RefCell::new(Vec::new()) };
        }
        let order = self.opts.gl_order.max(2);
        RULES.with(|r| {
            let mut r = r.borrow_mut();
            if r.len() <= order {
                r.resize(order + 1, None);
            }
            let rule = r[order].get_or_insert_with(|| Rule::gauss_legendre(order));
            rule.composite(t0, tau, panels, out);
        });
    }
}
