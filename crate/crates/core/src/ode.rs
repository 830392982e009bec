//! Adaptive Dormand-Prince 5(4) integrator with continuous (dense) output and
//! a single terminal event: the first exit through `g >= 0` after being inside `g < 0`.

use crate::error::{GeoError, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub h_init: f64,
    pub max_steps: usize,
    /// Integration is abandoned (as trapped) past this time.
    pub t_max: f64,
    /// Bisection stops once `|g|` drops below this.
    pub event_tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: 0.1,
            h_init: 1e-2,
            max_steps: 200_000,
            t_max: 1e3,
            event_tol: 1e-10,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Piecewise quartic interpolant over all accepted steps.
#[derive(Clone, Debug, Default)]
pub struct DenseSolution {
    dim: usize,
    t0: Vec<f64>,
    h: Vec<f64>,
    /// Five coefficient rows of length `dim` per step.
    coef: Vec<f64>,
    t_end: f64,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.t0.len()
    }

    /// Zero-length solution holding `y`.
    pub fn set_constant(&mut self, y: &[f64]) {
        self.dim = y.len();
        self.t0.clear();
        self.t0.push(0.0);
        self.h.clear();
        self.h.push(1.0);
        self.coef.clear();
        self.coef.extend_from_slice(y);
        self.coef.resize(5 * y.len(), 0.0);
        self.t_end = 0.0;
    }

    fn locate(&self, t: f64) -> usize {
        match self.t0.partition_point(|&s| s <= t) {
            0 => 0,
            k => k - 1,
        }
    }

    /// State at `t`; `t` is clamped into `[0, t_end]`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        self.eval_prefix(t, self.dim, out);
    }

    /// First `m` components at `t`.
    pub fn eval_prefix(&self, t: f64, m: usize, out: &mut [f64]) {
        let t = t.clamp(0.0, self.t_end);
        let s = self.locate(t);
        let th = (t - self.t0[s]) / self.h[s];
        let th1 = 1.0 - th;
        let base = s * 5 * self.dim;
        let d = self.dim;
        for i in 0..m {
            let r = |k: usize| self.coef[base + k * d + i];
            out[i] = r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))));
        }
    }
}

/// Terminal event: a scalar function of the state whose sign change stops integration.
pub struct ExitEvent<'a> {
    /// Number of leading state components `g` depends on.
    pub prefix: usize,
    pub g: &'a dyn Fn(&[f64]) -> f64,
}

pub struct Dopri5 {
    dim: usize,
    k: [Vec<f64>; 7],
    y: Vec<f64>,
    y_new: Vec<f64>,
    y_stage: Vec<f64>,
    scratch: Vec<f64>,
}

impl Dopri5 {
    pub fn new(dim: usize) -> Self {
        let v = || vec![0.0; dim];
        Self {
            dim,
            k: [v(), v(), v(), v(), v(), v(), v()],
            y: v(),
            y_new: v(),
            y_stage: v(),
            scratch: v(),
        }
    }

    /// Integrates `y' = f(y)` from `y0` until the exit event fires, writing the
    /// interpolant into `sol`. `f` returns `false` when evaluated outside its domain.
    pub fn integrate<F>(
        &mut self,
        f: &F,
        y0: &[f64],
        opts: &OdeOptions,
        event: &ExitEvent<'_>,
        sol: &mut DenseSolution,
    ) -> Result<f64>
    where
        F: Fn(&[f64], &mut [f64]) -> bool,
    {
        let d = self.dim;
        assert_eq!(y0.len(), d);
        sol.dim = d;
        sol.t0.clear();
        sol.h.clear();
        sol.coef.clear();
        sol.t_end = 0.0;

        self.y.copy_from_slice(y0);
        if !f(&self.y, &mut self.k[0]) {
            return Err(GeoError::Domain("initial state outside metric domain".into()));
        }
        let mut inside = (event.g)(&self.y[..event.prefix]) < -opts.event_tol;
        let mut t = 0.0;
        let mut h = opts.h_init.min(opts.max_step);
        let mut steps = 0usize;
        let mut prefix_buf = vec![0.0; event.prefix];

        loop {
            steps += 1;
            if steps > opts.max_steps {
                return Err(GeoError::Integration(format!("step budget exhausted at t={t}")));
            }
            if t > opts.t_max {
                return Err(GeoError::Trapping { t_max: opts.t_max });
            }
            if h < 1e-14 * (1.0 + t) {
                return Err(GeoError::Integration(format!("step size underflow at t={t}")));
            }
            match self.try_step(f, h, opts) {
                None => {
                    h *= 0.25;
                    continue;
                }
                Some(err) if err > 1.0 => {
                    h *= (0.9 * err.powf(-0.2)).max(0.2);
                    continue;
                }
                Some(err) => {
                    // Accepted: FSAL stage k[6] = f(y_new) is already filled by try_step.
                    let base = sol.coef.len();
                    sol.coef.resize(base + 5 * d, 0.0);
                    for i in 0..d {
                        let ydiff = self.y_new[i] - self.y[i];
                        let bspl = h * self.k[0][i] - ydiff;
                        sol.coef[base + i] = self.y[i];
                        sol.coef[base + d + i] = ydiff;
                        sol.coef[base + 2 * d + i] = bspl;
                        sol.coef[base + 3 * d + i] = ydiff - h * self.k[6][i] - bspl;
                        sol.coef[base + 4 * d + i] = h
                            * (D1 * self.k[0][i]
                                + D3 * self.k[2][i]
                                + D4 * self.k[3][i]
                                + D5 * self.k[4][i]
                                + D6 * self.k[5][i]
                                + D7 * self.k[6][i]);
                    }
                    sol.t0.push(t);
                    sol.h.push(h);
                    let t_new = t + h;
                    sol.t_end = t_new;

                    let g_new = (event.g)(&self.y_new[..event.prefix]);
                    let mut bracket = None;
                    if inside {
                        if g_new >= 0.0 {
                            bracket = Some(t);
                        }
                    } else {
                        // Started on the boundary: look inside the step for the interior excursion.
                        const PROBES: usize = 16;
                        let mut last_neg = None;
                        for p in 1..PROBES {
                            let tp = t + h * p as f64 / PROBES as f64;
                            sol.eval_prefix(tp, event.prefix, &mut prefix_buf);
                            if (event.g)(&prefix_buf) < 0.0 {
                                last_neg = Some(tp);
                            }
                        }
                        if g_new < 0.0 {
                            inside = true;
                        } else if let Some(tn) = last_neg {
                            bracket = Some(tn);
                        } else if steps < 60 {
                            // Glancing start: retry with a much smaller step.
                            sol.t0.pop();
                            sol.h.pop();
                            sol.coef.truncate(base);
                            sol.t_end = t;
                            h *= 0.1;
                            continue;
                        } else {
                            return Err(GeoError::Integration("trajectory never entered the domain".into()));
                        }
                    }
                    if let Some(lo) = bracket {
                        let t_exit = refine_exit(sol, event, lo, t_new, opts.event_tol, &mut prefix_buf);
                        sol.t_end = t_exit;
                        return Ok(t_exit);
                    }

                    t = t_new;
                    std::mem::swap(&mut self.y, &mut self.y_new);
                    self.k.swap(0, 6);
                    let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                    h = (h * fac).min(opts.max_step);
                }
            }
        }
    }

    /// One trial step; returns the scaled error norm or `None` if `f` left its domain.
    fn try_step<F>(&mut self, f: &F, h: f64, opts: &OdeOptions) -> Option<f64>
    where
        F: Fn(&[f64], &mut [f64]) -> bool,
    {
        let d = self.dim;
        let (k, ys, y) = (&mut self.k, &mut self.y_stage, &self.y);
        macro_rules! stage {
            ($dst:expr, $($c:expr => $ki:expr),+) => {{
                for i in 0..d {
                    ys[i] = y[i] + h * (0.0 $(+ $c * k[$ki][i])+);
                }
                let (head, tail) = k.split_at_mut($dst);
                let _ = head;
                if !f(ys, &mut tail[0]) {
                    return None;
                }
            }};
        }
        stage!(1, A21 => 0);
        stage!(2, A31 => 0, A32 => 1);
        stage!(3, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..d {
            self.y_new[i] = y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        if !f(&self.y_new, &mut k[6]) {
            return None;
        }
        let mut acc = 0.0;
        for i in 0..d {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(self.y_new[i].abs());
            self.scratch[i] = e / sc;
            acc += self.scratch[i] * self.scratch[i];
        }
        let err = (acc / d as f64).sqrt();
        err.is_finite().then_some(err)
    }
}

fn refine_exit(
    sol: &DenseSolution,
    event: &ExitEvent<'_>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    buf: &mut [f64],
) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        sol.eval_prefix(mid, event.prefix, buf);
        let g = (event.g)(buf);
        if g.abs() <= tol {
            return mid;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
