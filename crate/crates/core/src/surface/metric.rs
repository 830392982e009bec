use crate::error::{GeoError, Result};
use crate::io;
use std::path::Path;
use std::sync::Arc;

/// Conformal factor and curvature data at a chart point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricJet {
    pub lam: f64,
    pub lx: f64,
    pub ly: f64,
    pub kappa: f64,
    pub kx: f64,
    pub ky: f64,
}

#[derive(Clone, Debug)]
pub enum MetricKind {
    Euclidean,
    /// `lambda = ln 2 - ln(1 + kappa r^2)`.
    ConstantCurvature { kappa: f64 },
    /// `lambda = amp * exp(-|x - c|^2 / (2 width^2))`.
    Bump { amp: f64, width: f64, cx: f64, cy: f64 },
    Table(Arc<SplineTable>),
}

/// Metric `e^{2 lambda}(dx^2 + dy^2)` on the chart disk `|x| <= radius`.
#[derive(Clone, Debug)]
pub struct IsothermalMetric {
    pub kind: MetricKind,
    pub radius: f64,
    pub label: String,
}

impl IsothermalMetric {
    pub fn euclidean(radius: f64) -> Self {
        Self { kind: MetricKind::Euclidean, radius, label: format!("euclidean({radius})") }
    }

    pub fn constant_curvature(kappa: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(GeoError::Domain(format!("chart radius {radius} outside (0, 1]")));
        }
        if 1.0 + kappa * radius * radius <= 0.05 {
            return Err(GeoError::Domain(format!(
                "curvature {kappa} with radius {radius} leaves the conformal chart"
            )));
        }
        let name = if kappa >= 0.0 { "sphere_cap" } else { "hyperbolic" };
        Ok(Self { kind: MetricKind::ConstantCurvature { kappa }, radius, label: format!("{name}({kappa},{radius})") })
    }

    pub fn bump(amp: f64, width: f64, cx: f64, cy: f64, radius: f64) -> Result<Self> {
        if width <= 0.0 || !(radius > 0.0 && radius <= 1.0) {
            return Err(GeoError::Domain("bump width and radius must be positive".into()));
        }
        Ok(Self {
            kind: MetricKind::Bump { amp, width, cx, cy },
            radius,
            label: format!("bump({amp},{width},{cx},{cy},{radius})"),
        })
    }

    pub fn from_table(table: SplineTable) -> Self {
        let radius = table.radius;
        Self { kind: MetricKind::Table(Arc::new(table)), radius, label: "table".into() }
    }

    /// Parses `euclidean`, `sphere_cap(k,R)`, `hyperbolic(k,R)`, `bump(a,w,cx,cy,R)` or `table:<path>`.
    pub fn from_preset(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(path) = spec.strip_prefix("table:") {
            let mut m = Self::from_table(SplineTable::load(Path::new(path))?);
            m.label = spec.to_string();
            return Ok(m);
        }
        let (name, args) = parse_call(spec)?;
        let argc = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(GeoError::Config(format!("metric preset `{name}` takes {n} arguments, got {}", args.len())))
            }
        };
        match name {
            "euclidean" => {
                if args.is_empty() {
                    Ok(Self::euclidean(1.0))
                } else {
                    argc(1)?;
                    Ok(Self::euclidean(args[0]))
                }
            }
            "sphere_cap" => {
                argc(2)?;
                if args[0] <= 0.0 {
                    return Err(GeoError::Config("sphere_cap needs kappa > 0".into()));
                }
                Self::constant_curvature(args[0], args[1])
            }
            "hyperbolic" => {
                argc(2)?;
                if args[0] >= 0.0 {
                    return Err(GeoError::Config("hyperbolic needs kappa < 0".into()));
                }
                Self::constant_curvature(args[0], args[1])
            }
            "bump" => {
                argc(5)?;
                Self::bump(args[0], args[1], args[2], args[3], args[4])
            }
            other => Err(GeoError::Config(format!("unknown metric preset `{other}`"))),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, MetricKind::Euclidean)
    }

    pub fn lambda(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            MetricKind::Euclidean => 0.0,
            MetricKind::ConstantCurvature { kappa } => (2.0 / (1.0 + kappa * (x * x + y * y))).ln(),
            MetricKind::Bump { amp, width, cx, cy } => {
                let (dx, dy) = (x - cx, y - cy);
                amp * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
            MetricKind::Table(t) => t.eval(x, y)[0],
        }
    }

    /// Full jet; `None` outside the domain where the conformal factor is defined.
    #[inline]
    pub fn jet(&self, x: f64, y: f64) -> Option<MetricJet> {
        match &self.kind {
            MetricKind::Euclidean => Some(MetricJet::default()),
            MetricKind::ConstantCurvature { kappa } => {
                let d = 1.0 + kappa * (x * x + y * y);
                if d <= 1e-12 || !d.is_finite() {
                    return None;
                }
                Some(MetricJet {
                    lam: (2.0 / d).ln(),
                    lx: -2.0 * kappa * x / d,
                    ly: -2.0 * kappa * y / d,
                    kappa: *kappa,
                    kx: 0.0,
                    ky: 0.0,
                })
            }
            MetricKind::Bump { amp, width, cx, cy } => {
                let (dx, dy) = (x - cx, y - cy);
                let w2 = width * width;
                let rho2 = dx * dx + dy * dy;
                let lam = amp * (-rho2 / (2.0 * w2)).exp();
                let lx = -lam * dx / w2;
                let ly = -lam * dy / w2;
                let lap = lam * (rho2 / (w2 * w2) - 2.0 / w2);
                let e = (-2.0 * lam).exp();
                let kappa = -e * lap;
                let q = lam / w2 * (4.0 / w2 - rho2 / (w2 * w2));
                let (glx, gly) = (q * dx, q * dy);
                Some(MetricJet {
                    lam,
                    lx,
                    ly,
                    kappa,
                    kx: -e * (glx - 2.0 * lx * lap),
                    ky: -e * (gly - 2.0 * ly * lap),
                })
            }
            MetricKind::Table(t) => {
                let curv = |x: f64, y: f64| {
                    let v = t.eval(x, y);
                    -(-2.0 * v[0]).exp() * (v[3] + v[5])
                };
                let v = t.eval(x, y);
                let d = 1e-5 * self.radius;
                Some(MetricJet {
                    lam: v[0],
                    lx: v[1],
                    ly: v[2],
                    kappa: -(-2.0 * v[0]).exp() * (v[3] + v[5]),
                    kx: (curv(x + d, y) - curv(x - d, y)) / (2.0 * d),
                    ky: (curv(x, y + d) - curv(x, y - d)) / (2.0 * d),
                })
            }
        }
    }

    pub fn curvature(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).map(|j| j.kappa).unwrap_or(f64::NAN)
    }

    /// Metric length of `d kappa` at a point.
    pub fn dkappa_norm(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y)
            .map(|j| (-j.lam).exp() * (j.kx * j.kx + j.ky * j.ky).sqrt())
            .unwrap_or(f64::NAN)
    }
}

/// Parses `name(a, b, ...)` or a bare `name` into numeric arguments.
pub fn parse_call(spec: &str) -> Result<(&str, Vec<f64>)> {
    let spec = spec.trim();
    match spec.find('(') {
        None => Ok((spec, Vec::new())),
        Some(p) => {
            let inner = spec[p + 1..]
                .strip_suffix(')')
                .ok_or_else(|| GeoError::Config(format!("unbalanced parentheses in `{spec}`")))?;
            let args = inner
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| GeoError::Config(format!("bad numeric argument `{s}` in `{spec}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((spec[..p].trim(), args))
        }
    }
}

/// Natural tensor-product cubic B-spline through node values on `[-R, R]^2`.
#[derive(Clone, Debug)]
pub struct SplineTable {
    pub nx: usize,
    pub ny: usize,
    pub radius: f64,
    coef: Vec<f64>,
}

fn natural_coefficients(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut c = vec![0.0; n + 2];
    c[1] = f[0];
    c[n] = f[n - 1];
    if n > 2 {
        // Thomas algorithm for c_{i-1} + 4 c_i + c_{i+1} = 6 f_i, i = 1..n-2.
        let m = n - 2;
        let mut diag = vec![4.0; m];
        let mut rhs: Vec<f64> = (1..n - 1).map(|i| 6.0 * f[i]).collect();
        rhs[0] -= f[0];
        rhs[m - 1] -= f[n - 1];
        for k in 1..m {
            let w = 1.0 / diag[k - 1];
            diag[k] -= w;
            rhs[k] -= w * rhs[k - 1];
        }
        let mut sol = vec![0.0; m];
        sol[m - 1] = rhs[m - 1] / diag[m - 1];
        for k in (0..m - 1).rev() {
            sol[k] = (rhs[k] - sol[k + 1]) / diag[k];
        }
        c[2..n].copy_from_slice(&sol);
    }
    c[0] = 2.0 * c[1] - c[2];
    c[n + 1] = 2.0 * c[n] - c[n - 1];
    c
}

fn basis(t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let s = 1.0 - t;
    (
        [s * s * s / 6.0, (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0, (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0, t * t * t / 6.0],
        [-s * s / 2.0, (3.0 * t * t - 4.0 * t) / 2.0, (-3.0 * t * t + 2.0 * t + 1.0) / 2.0, t * t / 2.0],
        [s, 3.0 * t - 2.0, 1.0 - 3.0 * t, t],
    )
}

impl SplineTable {
    /// `values` row-major with `x` fastest: `values[j * nx + i]`.
    pub fn new(nx: usize, ny: usize, radius: f64, values: &[f64]) -> Result<Self> {
        if nx < 4 || ny < 4 || values.len() != nx * ny {
            return Err(GeoError::Format(format!("table needs >= 4x4 nodes and {} values", nx * ny)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::Format("non-finite table entry".into()));
        }
        let mut rows = vec![0.0; (nx + 2) * ny];
        for j in 0..ny {
            let c = natural_coefficients(&values[j * nx..(j + 1) * nx]);
            rows[j * (nx + 2)..(j + 1) * (nx + 2)].copy_from_slice(&c);
        }
        let mut coef = vec![0.0; (nx + 2) * (ny + 2)];
        for i in 0..nx + 2 {
            let col: Vec<f64> = (0..ny).map(|j| rows[j * (nx + 2) + i]).collect();
            let c = natural_coefficients(&col);
            for (j, v) in c.into_iter().enumerate() {
                coef[j * (nx + 2) + i] = v;
            }
        }
        Ok(Self { nx, ny, radius, coef })
    }

    /// Reads `<path>` (little-endian f64) with its `<path>.json` sidecar `{nx, ny, radius}`.
    pub fn load(path: &Path) -> Result<Self> {
        let (side, values) = io::read_real_table(path)?;
        Self::new(side.nx, side.ny, side.radius, &values)
    }

    /// `[f, fx, fy, fxx, fxy, fyy]`.
    pub fn eval(&self, x: f64, y: f64) -> [f64; 6] {
        let hx = 2.0 * self.radius / (self.nx - 1) as f64;
        let hy = 2.0 * self.radius / (self.ny - 1) as f64;
        let ux = (x + self.radius) / hx;
        let uy = (y + self.radius) / hy;
        let kx = (ux.floor() as isize).clamp(0, self.nx as isize - 2) as usize;
        let ky = (uy.floor() as isize).clamp(0, self.ny as isize - 2) as usize;
        let (bx, dbx, ddbx) = basis(ux - kx as f64);
        let (by, dby, ddby) = basis(uy - ky as f64);
        let mut out = [0.0; 6];
        let w = self.nx + 2;
        for b in 0..4 {
            for a in 0..4 {
                let c = self.coef[(ky + b) * w + kx + a];
                out[0] += c * bx[a] * by[b];
                out[1] += c * dbx[a] * by[b];
                out[2] += c * bx[a] * dby[b];
                out[3] += c * ddbx[a] * by[b];
                out[4] += c * dbx[a] * dby[b];
                out[5] += c * bx[a] * ddby[b];
            }
        }
        out[1] /= hx;
        out[2] /= hy;
        out[3] /= hx * hx;
        out[4] /= hx * hy;
        out[5] /= hy * hy;
        out
    }
}
