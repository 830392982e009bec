//! Matrix-valued connections `A = A_z dz + A_zbar dzbar` on the chart disk, viewed on the
//! sphere bundle as `A(x, theta) = e^{-lambda}(A_z e^{i theta} + A_zbar e^{-i theta})`.

use crate::error::{GeoError, Result};
use crate::io;
use crate::linalg::{CMat, CVec};
use crate::surface::metric::{parse_call, IsothermalMetric, MetricJet};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use std::fmt::Debug;
use std::path::Path;
use std::sync::Arc;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Components and their first partial derivatives at a chart point.
#[derive(Clone, Copy, Debug)]
pub struct ComponentJet {
    pub az: CMat,
    pub azb: CMat,
    pub az_x: CMat,
    pub az_y: CMat,
    pub azb_x: CMat,
    pub azb_y: CMat,
}

impl ComponentJet {
    /// `d_zbar A_z`.
    pub fn dbar_az(&self) -> CMat {
        (self.az_x + self.az_y.scale(I)).scale_re(0.5)
    }

    /// `d_z A_zbar`.
    pub fn d_azb(&self) -> CMat {
        (self.azb_x - self.azb_y.scale(I)).scale_re(0.5)
    }
}

/// Source of connection components; derivatives default to fourth-order differences.
pub trait ComponentField: Send + Sync + Debug {
    fn rank(&self) -> usize;
    fn components(&self, x: f64, y: f64) -> (CMat, CMat);
    fn jet(&self, x: f64, y: f64) -> ComponentJet {
        fd_jet(self, x, y)
    }
}

fn fd4<F: Fn(f64) -> (CMat, CMat)>(f: F, d: f64) -> (CMat, CMat) {
    let (a2, b2) = f(2.0 * d);
    let (a1, b1) = f(d);
    let (m1a, m1b) = f(-d);
    let (m2a, m2b) = f(-2.0 * d);
    let c = 1.0 / (12.0 * d);
    (
        (m2a - m1a.scale_re(8.0) + a1.scale_re(8.0) - a2).scale_re(c),
        (m2b - m1b.scale_re(8.0) + b1.scale_re(8.0) - b2).scale_re(c),
    )
}

pub fn fd_jet<F: ComponentField + ?Sized>(field: &F, x: f64, y: f64) -> ComponentJet {
    let d = 1e-4;
    let (az, azb) = field.components(x, y);
    let (az_x, azb_x) = fd4(|s| field.components(x + s, y), d);
    let (az_y, azb_y) = fd4(|s| field.components(x, y + s), d);
    ComponentJet { az, azb, az_x, az_y, azb_x, azb_y }
}

/// Matrix polynomial `sum c_{pq} x^p y^q`.
#[derive(Clone, Debug)]
pub struct MatPoly {
    n: usize,
    terms: Vec<(i32, i32, CMat)>,
}

impl MatPoly {
    pub fn new(n: usize, terms: Vec<(i32, i32, CMat)>) -> Self {
        Self { n, terms }
    }

    /// Random polynomial of total degree `deg` with entries of size about `amp`.
    pub fn random(n: usize, deg: i32, amp: f64, rng: &mut SplitMix64) -> Self {
        let mut terms = Vec::new();
        for total in 0..=deg {
            for p in 0..=total {
                let c = CMat::from_fn(n, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (amp / (1.0 + total as f64))
                });
                terms.push((p, total - p, c));
            }
        }
        Self { n, terms }
    }

    fn eval_d(&self, x: f64, y: f64, dx: i32, dy: i32) -> CMat {
        let mut out = CMat::zeros(self.n);
        for &(p, q, ref c) in &self.terms {
            if p < dx || q < dy {
                continue;
            }
            let fx = (0..dx).map(|k| (p - k) as f64).product::<f64>();
            let fy = (0..dy).map(|k| (q - k) as f64).product::<f64>();
            let w = fx * fy * x.powi(p - dx) * y.powi(q - dy);
            out += c.scale_re(w);
        }
        out
    }

    pub fn eval(&self, x: f64, y: f64) -> CMat {
        self.eval_d(x, y, 0, 0)
    }

    pub fn adjoint(&self) -> Self {
        Self { n: self.n, terms: self.terms.iter().map(|(p, q, c)| (*p, *q, c.adjoint())).collect() }
    }

    pub fn neg(&self) -> Self {
        Self { n: self.n, terms: self.terms.iter().map(|(p, q, c)| (*p, *q, -*c)).collect() }
    }
}

#[derive(Debug)]
struct ZeroField(usize);

impl ComponentField for ZeroField {
    fn rank(&self) -> usize {
        self.0
    }
    fn components(&self, _: f64, _: f64) -> (CMat, CMat) {
        (CMat::zeros(self.0), CMat::zeros(self.0))
    }
    fn jet(&self, _: f64, _: f64) -> ComponentJet {
        let z = CMat::zeros(self.0);
        ComponentJet { az: z, azb: z, az_x: z, az_y: z, azb_x: z, azb_y: z }
    }
}

/// Polynomial components with exact derivatives.
#[derive(Debug)]
pub struct PolyField {
    pub az: MatPoly,
    pub azb: MatPoly,
}

impl ComponentField for PolyField {
    fn rank(&self) -> usize {
        self.az.n
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        (self.az.eval(x, y), self.azb.eval(x, y))
    }
    fn jet(&self, x: f64, y: f64) -> ComponentJet {
        ComponentJet {
            az: self.az.eval(x, y),
            azb: self.azb.eval(x, y),
            az_x: self.az.eval_d(x, y, 1, 0),
            az_y: self.az.eval_d(x, y, 0, 1),
            azb_x: self.azb.eval_d(x, y, 1, 0),
            azb_y: self.azb.eval_d(x, y, 0, 1),
        }
    }
}

#[derive(Debug)]
struct Scaled {
    inner: Arc<dyn ComponentField>,
    s: Complex64,
}

impl ComponentField for Scaled {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        let (a, b) = self.inner.components(x, y);
        (a.scale(self.s), b.scale(self.s))
    }
    fn jet(&self, x: f64, y: f64) -> ComponentJet {
        let j = self.inner.jet(x, y);
        let s = self.s;
        ComponentJet {
            az: j.az.scale(s),
            azb: j.azb.scale(s),
            az_x: j.az_x.scale(s),
            az_y: j.az_y.scale(s),
            azb_x: j.azb_x.scale(s),
            azb_y: j.azb_y.scale(s),
        }
    }
}

/// `-A^*`: components `(-A_zbar^*, -A_z^*)`.
#[derive(Debug)]
struct NegAdjoint {
    inner: Arc<dyn ComponentField>,
}

impl ComponentField for NegAdjoint {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        let (a, b) = self.inner.components(x, y);
        (-b.adjoint(), -a.adjoint())
    }
    fn jet(&self, x: f64, y: f64) -> ComponentJet {
        let j = self.inner.jet(x, y);
        ComponentJet {
            az: -j.azb.adjoint(),
            azb: -j.az.adjoint(),
            az_x: -j.azb_x.adjoint(),
            az_y: -j.azb_y.adjoint(),
            azb_x: -j.az_x.adjoint(),
            azb_y: -j.az_y.adjoint(),
        }
    }
}

/// Smooth `GL(n, C)`-valued map on the chart.
pub trait GaugeField: Send + Sync + Debug {
    fn rank(&self) -> usize;
    fn value(&self, x: f64, y: f64) -> CMat;
    /// `(d_z g, d_zbar g)`.
    fn wirtinger(&self, x: f64, y: f64) -> (CMat, CMat) {
        let (gx, gy) = fd4(|s| (self.value(x + s, y), self.value(x, y + s)), 1e-4);
        ((gx - gy.scale(I)).scale_re(0.5), (gx + gy.scale(I)).scale_re(0.5))
    }
}

/// `g = (I + N) D` with `N` strictly upper triangular and `D = diag(exp p_k)`, always invertible.
#[derive(Debug)]
pub struct TriangularGauge {
    n: usize,
    upper: MatPoly,
    diag: Vec<MatPoly>,
}

impl TriangularGauge {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut upper = MatPoly::random(n, 2, 0.8, &mut rng);
        for (_, _, c) in upper.terms.iter_mut() {
            for i in 0..n {
                for j in 0..=i {
                    c[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let diag = (0..n).map(|_| MatPoly::random(1, 2, 0.6, &mut rng)).collect();
        Self { n, upper, diag }
    }
}

impl GaugeField for TriangularGauge {
    fn rank(&self) -> usize {
        self.n
    }
    fn value(&self, x: f64, y: f64) -> CMat {
        let mut d = CMat::zeros(self.n);
        for (k, p) in self.diag.iter().enumerate() {
            d[(k, k)] = p.eval(x, y)[(0, 0)].exp();
        }
        (CMat::identity(self.n) + self.upper.eval(x, y)) * d
    }
}

/// Pure-gauge connection `g^{-1} dg`; flat by construction.
#[derive(Debug)]
struct PureGauge {
    g: Arc<dyn GaugeField>,
}

impl ComponentField for PureGauge {
    fn rank(&self) -> usize {
        self.g.rank()
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        let gi = self.g.value(x, y).inverse().expect("gauge field must be invertible");
        let (dz, dzb) = self.g.wirtinger(x, y);
        (gi * dz, gi * dzb)
    }
}

/// Gauge transform `g^{-1} dg + g^{-1} A g`.
#[derive(Debug)]
struct Gauged {
    inner: Arc<dyn ComponentField>,
    g: Arc<dyn GaugeField>,
}

impl ComponentField for Gauged {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        let g = self.g.value(x, y);
        let gi = g.inverse().expect("gauge field must be invertible");
        let (dz, dzb) = self.g.wirtinger(x, y);
        let (a, b) = self.inner.components(x, y);
        (gi * dz + gi * a * g, gi * dzb + gi * b * g)
    }
}

/// `A + k q^{-1} X q` for `q = e^{i theta}`, a scalar shift by `k (-d lambda, dbar lambda)`.
#[derive(Debug)]
struct PhaseShift {
    inner: Arc<dyn ComponentField>,
    metric: IsothermalMetric,
    k: f64,
}

impl ComponentField for PhaseShift {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        let (a, b) = self.inner.components(x, y);
        let j = self.metric.jet(x, y).unwrap_or_default();
        let n = self.rank();
        let dl = Complex64::new(j.lx, -j.ly) * 0.5;
        let dbl = Complex64::new(j.lx, j.ly) * 0.5;
        (a + CMat::scalar(n, -dl * self.k), b + CMat::scalar(n, dbl * self.k))
    }
}

/// Explicit `SU(2)` extension `F` of `diag(e^{-2 i phi}, e^{2 i phi})` to the disk with
/// `A_z = 0`, `A_zbar = -(dbar F) F^{-1}`.
#[derive(Debug, Clone, Copy)]
pub struct Su2Example;

impl Su2Example {
    /// `F = N^{-1} [[zbar^2, -rho], [rho, z^2]]`, `rho = 1 - |z|^2`, `N^2 = |z|^4 + rho^2`.
    pub fn f(&self, x: f64, y: f64) -> CMat {
        let z = Complex64::new(x, y);
        let r2 = x * x + y * y;
        let rho = Complex64::new(1.0 - r2, 0.0);
        let n = (r2 * r2 + (1.0 - r2).powi(2)).sqrt();
        CMat::from_rows(2, &[z.conj() * z.conj(), -rho, rho, z * z]).scale_re(1.0 / n)
    }

    pub fn dbar_f(&self, x: f64, y: f64) -> CMat {
        let z = Complex64::new(x, y);
        let r2 = x * x + y * y;
        let rho = Complex64::new(1.0 - r2, 0.0);
        let n = (r2 * r2 + (1.0 - r2).powi(2)).sqrt();
        let dbar_n = z * (2.0 * r2 - 1.0) / n;
        let g = CMat::from_rows(2, &[z.conj() * z.conj(), -rho, rho, z * z]);
        let dg = CMat::from_rows(2, &[2.0 * z.conj(), z, -z, Complex64::new(0.0, 0.0)]);
        dg.scale_re(1.0 / n) - g.scale(dbar_n / (n * n))
    }

    /// `(h_z, h_zbar) = (F e_1, e_1)`.
    pub fn h(&self, x: f64, y: f64) -> (CVec, CVec) {
        let f = self.f(x, y);
        let e1 = CVec::from_slice(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        (f.mul_vec(&e1), e1)
    }
}

impl ComponentField for Su2Example {
    fn rank(&self) -> usize {
        2
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        let f = self.f(x, y);
        (CMat::zeros(2), -(self.dbar_f(x, y) * f.adjoint()))
    }
}

/// Connection components tabulated on a node grid, cubic Lagrange interpolation.
#[derive(Debug)]
struct TableField {
    n: usize,
    nx: usize,
    ny: usize,
    radius: f64,
    /// Per node: `A_z` then `A_zbar`, each `n^2` row-major.
    data: Vec<Complex64>,
}

impl TableField {
    fn load(path: &Path) -> Result<Self> {
        let side: io::TableSidecar = serde_json::from_str(&std::fs::read_to_string(io::sidecar_path(path))?)?;
        let n = side.n.unwrap_or(1);
        if !(1..=crate::linalg::MAX_RANK).contains(&n) || side.nx < 4 || side.ny < 4 {
            return Err(GeoError::Format("connection table sidecar out of range".into()));
        }
        let raw = io::read_f64_le(path)?;
        let per = 2 * n * n;
        if raw.len() != side.nx * side.ny * per * 2 {
            return Err(GeoError::Format("connection table length does not match its sidecar".into()));
        }
        let data = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(Self { n, nx: side.nx, ny: side.ny, radius: side.radius, data })
    }
}

impl ComponentField for TableField {
    fn rank(&self) -> usize {
        self.n
    }
    fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        let st = |u: f64, m: usize| {
            let p = (u + self.radius) / (2.0 * self.radius) * (m - 1) as f64;
            let b = (p.floor() as isize - 1).clamp(0, m as isize - 4) as usize;
            (b, crate::grid::lagrange4(p - b as f64))
        };
        let (bx, wx) = st(x, self.nx);
        let (by, wy) = st(y, self.ny);
        let nn = self.n * self.n;
        let mut a = CMat::zeros(self.n);
        let mut b = CMat::zeros(self.n);
        for (jj, wyj) in wy.iter().enumerate() {
            for (ii, wxi) in wx.iter().enumerate() {
                let node = (by + jj) * self.nx + bx + ii;
                let base = node * 2 * nn;
                let w = wxi * wyj;
                a += CMat::from_rows(self.n, &self.data[base..base + nn]).scale_re(w);
                b += CMat::from_rows(self.n, &self.data[base + nn..base + 2 * nn]).scale_re(w);
            }
        }
        (a, b)
    }
}

/// A connection together with a label; cheap to clone.
#[derive(Clone, Debug)]
pub struct MatrixConnection {
    field: Arc<dyn ComponentField>,
    pub label: String,
    zero: bool,
}

impl MatrixConnection {
    pub fn new(field: Arc<dyn ComponentField>, label: impl Into<String>) -> Self {
        Self { field, label: label.into(), zero: false }
    }

    pub fn zero(n: usize) -> Self {
        Self { field: Arc::new(ZeroField(n)), label: format!("zero({n})"), zero: true }
    }

    pub fn unitary_poly(seed: u64, n: usize) -> Self {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let p = MatPoly::random(n, 2, 0.6, &mut rng);
        let q = p.adjoint().neg();
        Self::new(Arc::new(PolyField { az: p, azb: q }), format!("unitary_poly({seed},{n})"))
    }

    pub fn generic_poly(seed: u64, n: usize) -> Self {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let p = MatPoly::random(n, 2, 0.6, &mut rng);
        let q = MatPoly::random(n, 2, 0.6, &mut rng);
        Self::new(Arc::new(PolyField { az: p, azb: q }), format!("generic_poly({seed},{n})"))
    }

    pub fn pure_gauge(g: Arc<dyn GaugeField>, label: impl Into<String>) -> Self {
        Self::new(Arc::new(PureGauge { g }), label)
    }

    pub fn su2_example() -> Self {
        Self::new(Arc::new(Su2Example), "su2_example")
    }

    /// Parses `zero[(n)]`, `unitary_poly(seed[,n])`, `generic_poly(seed[,n])`,
    /// `pure_gauge(seed[,n])`, `su2_example`, `table:<path>` or `scale:<complex>:<inner>`.
    pub fn from_preset(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(rest) = spec.strip_prefix("scale:") {
            let (s, inner) = rest
                .split_once(':')
                .ok_or_else(|| GeoError::Config(format!("expected scale:<complex>:<preset>, got `{spec}`")))?;
            let s = parse_complex(s)?;
            let mut c = Self::from_preset(inner)?.scaled(s);
            c.label = spec.to_string();
            return Ok(c);
        }
        if let Some(path) = spec.strip_prefix("table:") {
            return Ok(Self::new(Arc::new(TableField::load(Path::new(path))?), spec));
        }
        let (name, args) = parse_call(spec)?;
        let seed_rank = |default_n: usize| -> Result<(u64, usize)> {
            let seed = *args
                .first()
                .ok_or_else(|| GeoError::Config(format!("`{name}` needs a seed")))?;
            let n = args.get(1).map(|&v| v as usize).unwrap_or(default_n);
            if args.len() > 2 || seed < 0.0 || seed.fract() != 0.0 || !(1..=crate::linalg::MAX_RANK).contains(&n) {
                return Err(GeoError::Config(format!("bad arguments for `{spec}`")));
            }
            Ok((seed as u64, n))
        };
        match name {
            "zero" => Ok(Self::zero(args.first().map(|&v| v as usize).unwrap_or(1).max(1))),
            "unitary_poly" => seed_rank(2).map(|(s, n)| Self::unitary_poly(s, n)),
            "generic_poly" => seed_rank(2).map(|(s, n)| Self::generic_poly(s, n)),
            "pure_gauge" => seed_rank(2).map(|(s, n)| Self::pure_gauge(Arc::new(TriangularGauge::random(n, s)), spec)),
            "su2_example" => Ok(Self::su2_example()),
            other => Err(GeoError::Config(format!("unknown connection preset `{other}`"))),
        }
    }

    pub fn rank(&self) -> usize {
        self.field.rank()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn field(&self) -> &Arc<dyn ComponentField> {
        &self.field
    }

    pub fn components(&self, x: f64, y: f64) -> (CMat, CMat) {
        self.field.components(x, y)
    }

    pub fn jet(&self, x: f64, y: f64) -> ComponentJet {
        self.field.jet(x, y)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        if self.zero || s == Complex64::new(0.0, 0.0) {
            let mut z = Self::zero(self.rank());
            z.label = format!("({})*{s}", self.label);
            return z;
        }
        Self::new(Arc::new(Scaled { inner: self.field.clone(), s }), format!("({})*{s}", self.label))
    }

    /// The connection `-A^*`.
    pub fn neg_adjoint(&self) -> Self {
        if self.zero {
            return self.clone();
        }
        Self::new(Arc::new(NegAdjoint { inner: self.field.clone() }), format!("-({})^*", self.label))
    }

    pub fn gauge_transformed(&self, g: Arc<dyn GaugeField>) -> Self {
        Self::new(Arc::new(Gauged { inner: self.field.clone(), g }), format!("gauge({})", self.label))
    }

    /// `A + k q^{-1} X q` for `q = e^{i theta}`.
    pub fn phase_shifted(&self, metric: &IsothermalMetric, k: f64) -> Self {
        Self::new(
            Arc::new(PhaseShift { inner: self.field.clone(), metric: metric.clone(), k }),
            format!("({})+{k}q^-1Xq", self.label),
        )
    }

    /// `A(x, theta)` given `lambda(x)`.
    #[inline]
    pub fn on_sm(&self, x: f64, y: f64, th: f64, lam: f64) -> CMat {
        let (az, azb) = self.components(x, y);
        let e = Complex64::from_polar((-lam).exp(), th);
        let em = Complex64::from_polar((-lam).exp(), -th);
        az.scale(e) + azb.scale(em)
    }

    /// `A_V = V A`.
    pub fn vertical(&self, x: f64, y: f64, th: f64, lam: f64) -> CMat {
        let (az, azb) = self.components(x, y);
        let e = Complex64::from_polar((-lam).exp(), th);
        let em = Complex64::from_polar((-lam).exp(), -th);
        (az.scale(e) - azb.scale(em)).scale(I)
    }

    /// `*F_A = 2i e^{-2 lambda}(dbar A_z - d A_zbar - [A_z, A_zbar])` from a component jet.
    #[inline]
    pub fn star_curvature_from_jet(j: &ComponentJet, lam: f64) -> CMat {
        (j.dbar_az() - j.d_azb() - j.az.commutator(&j.azb)).scale(I * 2.0 * (-2.0 * lam).exp())
    }

    pub fn star_curvature_fast(&self, metric: &IsothermalMetric, x: f64, y: f64) -> CMat {
        let lam = metric.lambda(x, y);
        Self::star_curvature_from_jet(&self.jet(x, y), lam)
    }

    /// `*F_A = X A_V + X_perp A + [A, A_V]` evaluated with the frame at angle `theta`;
    /// independent of `theta` for a genuine connection.
    pub fn star_curvature(&self, metric: &IsothermalMetric, x: f64, y: f64, th: f64) -> CMat {
        let m = metric.jet(x, y).unwrap_or_default();
        let j = self.jet(x, y);
        let fiber = |p: CMat, q: CMat, px: CMat, py: CMat, qx: CMat, qy: CMat| -> [CMat; 4] {
            let e = Complex64::from_polar((-m.lam).exp(), th);
            let em = Complex64::from_polar((-m.lam).exp(), -th);
            let val = p.scale(e) + q.scale(em);
            let gx = (px - p.scale_re(m.lx)).scale(e) + (qx - q.scale_re(m.lx)).scale(em);
            let gy = (py - p.scale_re(m.ly)).scale(e) + (qy - q.scale_re(m.ly)).scale(em);
            let gt = p.scale(e * I) - q.scale(em * I);
            [val, gx, gy, gt]
        };
        let a = fiber(j.az, j.azb, j.az_x, j.az_y, j.azb_x, j.azb_y);
        let av = fiber(
            j.az.scale(I),
            j.azb.scale(-I),
            j.az_x.scale(I),
            j.az_y.scale(I),
            j.azb_x.scale(-I),
            j.azb_y.scale(-I),
        );
        let el = (-m.lam).exp();
        let (s, c) = th.sin_cos();
        let x_op = |g: &[CMat; 4]| g[1].scale_re(el * c) + g[2].scale_re(el * s) + g[3].scale_re(el * (-m.lx * s + m.ly * c));
        let xp_op = |g: &[CMat; 4]| g[1].scale_re(el * s) - g[2].scale_re(el * c) + g[3].scale_re(el * (m.lx * c + m.ly * s));
        x_op(&av) + xp_op(&a) + a[0].commutator(&av[0])
    }

    /// `sup |A + A^*|` over sampled points; zero for skew-Hermitian (unitary) connections.
    pub fn skew_defect(&self, metric: &IsothermalMetric, samples: &[(f64, f64)]) -> f64 {
        let mut worst: f64 = 0.0;
        for &(x, y) in samples {
            let lam = metric.lambda(x, y);
            for k in 0..8 {
                let th = k as f64 * std::f64::consts::PI / 4.0 + 0.1;
                let a = self.on_sm(x, y, th, lam);
                worst = worst.max((a + a.adjoint()).max_abs());
            }
        }
        worst
    }
}

/// `(lambda jet, component jet, *F)` bundle used by the transport right-hand side.
pub fn curvature_at(conn: &MatrixConnection, m: &MetricJet, x: f64, y: f64) -> CMat {
    MatrixConnection::star_curvature_from_jet(&conn.jet(x, y), m.lam)
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (exponents allowed).
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || GeoError::Config(format!("cannot parse complex number `{s}`"));
    if let Some(body) = t.strip_suffix('i') {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (body[..k].parse::<f64>().map_err(|_| bad())?, &body[k..]),
            None => (0.0, body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            v => v.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(Complex64::new(re, im))
    } else {
        Ok(Complex64::new(t.parse::<f64>().map_err(|_| bad())?, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0.5").unwrap(), c(0.5, 0.0));
        assert_eq!(parse_complex("1+0.3i").unwrap(), c(1.0, 0.3));
        assert_eq!(parse_complex("-2e-1-1e-2i").unwrap(), c(-0.2, -0.01));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn vertical_derivative_matches_difference() {
        let a = MatrixConnection::generic_poly(3, 2);
        let (x, y, th, lam) = (0.2, -0.3, 0.7, 0.4);
        let d = 1e-6;
        let fd = (a.on_sm(x, y, th + d, lam) - a.on_sm(x, y, th - d, lam)).scale_re(0.5 / d);
        assert!((fd - a.vertical(x, y, th, lam)).max_abs() < 1e-8);
    }

    #[test]
    fn frame_curvature_is_angle_independent_and_matches_fast_form() {
        let m = IsothermalMetric::from_preset("bump(0.3,0.4,0.1,0.0,1)").unwrap();
        let a = MatrixConnection::generic_poly(5, 2);
        for &(x, y) in &[(0.1, 0.2), (-0.4, 0.3)] {
            let f0 = a.star_curvature(&m, x, y, 0.0);
            let f1 = a.star_curvature(&m, x, y, std::f64::consts::PI / 3.0);
            let ff = a.star_curvature_fast(&m, x, y);
            assert!((f0 - f1).max_abs() < 1e-12);
            assert!((f0 - ff).max_abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_matches_two_form_oracle() {
        // e^{-2 lambda}(d_x A_y - d_y A_x + [A_x, A_y]) with A_x = A_z + A_zbar, A_y = i(A_z - A_zbar).
        let m = IsothermalMetric::from_preset("sphere_cap(1,1)").unwrap();
        let a = MatrixConnection::generic_poly(11, 2);
        let ax = |x: f64, y: f64| {
            let (p, q) = a.components(x, y);
            p + q
        };
        let ay = |x: f64, y: f64| {
            let (p, q) = a.components(x, y);
            (p - q).scale(I)
        };
        let (x, y, d) = (0.25, -0.1, 1e-5);
        let dxay = (ay(x + d, y) - ay(x - d, y)).scale_re(0.5 / d);
        let dyax = (ax(x, y + d) - ax(x, y - d)).scale_re(0.5 / d);
        let oracle = (dxay - dyax + ax(x, y).commutator(&ay(x, y))).scale_re((-2.0 * m.lambda(x, y)).exp());
        assert!((oracle - a.star_curvature(&m, x, y, 0.4)).max_abs() < 1e-8);
    }

    #[test]
    fn pure_gauge_is_flat() {
        let m = IsothermalMetric::from_preset("hyperbolic(-1,0.8)").unwrap();
        let a = MatrixConnection::from_preset("pure_gauge(7,2)").unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.3, 0.4), (-0.5, 0.1)] {
            assert!(a.star_curvature_fast(&m, x, y).max_abs() < 1e-6);
        }
    }

    #[test]
    fn unitary_preset_is_skew() {
        let m = IsothermalMetric::euclidean(1.0);
        let a = MatrixConnection::unitary_poly(2, 2);
        assert!(a.skew_defect(&m, &[(0.1, 0.2), (-0.5, 0.5)]) < 1e-14);
        let b = MatrixConnection::generic_poly(2, 2);
        assert!(b.skew_defect(&m, &[(0.1, 0.2)]) > 1e-3);
    }

    #[test]
    fn neg_adjoint_on_sm_is_minus_adjoint() {
        let a = MatrixConnection::generic_poly(9, 2);
        let b = a.neg_adjoint();
        let (x, y, th, lam) = (0.1, 0.4, 2.1, -0.2);
        assert!((b.on_sm(x, y, th, lam) + a.on_sm(x, y, th, lam).adjoint()).max_abs() < 1e-14);
    }

    #[test]
    fn su2_boundary_values_and_unitarity() {
        let s = Su2Example;
        for k in 0..16 {
            let phi = k as f64 * 0.39;
            let f = s.f(phi.cos(), phi.sin());
            let target = CMat::from_rows(2, &[Complex64::from_polar(1.0, -2.0 * phi), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(1.0, 2.0 * phi)]);
            assert!((f - target).max_abs() < 1e-14);
        }
        let f = s.f(0.3, -0.2);
        assert!((f * f.adjoint() - CMat::identity(2)).max_abs() < 1e-14);
        let d = 1e-6;
        let fd = ((s.f(0.3 + d, -0.2) - s.f(0.3 - d, -0.2)) + (s.f(0.3, -0.2 + d) - s.f(0.3, -0.2 - d)).scale(I)).scale_re(0.25 / d);
        assert!((fd - s.dbar_f(0.3, -0.2)).max_abs() < 1e-8);
    }

    #[test]
    fn preset_parsing() {
        assert!(MatrixConnection::from_preset("zero").unwrap().is_zero());
        assert_eq!(MatrixConnection::from_preset("generic_poly(3)").unwrap().rank(), 2);
        assert_eq!(MatrixConnection::from_preset("unitary_poly(3,1)").unwrap().rank(), 1);
        let s = MatrixConnection::from_preset("scale:0.5+0.5i:generic_poly(1,1)").unwrap();
        let b = MatrixConnection::generic_poly(1, 1);
        let (p, _) = s.components(0.2, 0.1);
        let (q, _) = b.components(0.2, 0.1);
        assert!((p - q.scale(c(0.5, 0.5))).max_abs() < 1e-15);
        assert!(MatrixConnection::from_preset("scale:0:generic_poly(1)").unwrap().is_zero());
        assert!(MatrixConnection::from_preset("bogus(1)").is_err());
        assert!(MatrixConnection::from_preset("generic_poly(1,9)").is_err());
    }
}
