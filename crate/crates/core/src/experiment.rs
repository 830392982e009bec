//! Experiment drivers behind the command-line subcommands. Each writes its files into
//! an output directory and returns the JSON report it wrote.

use crate::boundary::{mu_weights, range_p, Sign};
use crate::config::{ExperimentConfig, SolverMethod, Transform};
use crate::connection::MatrixConnection;
use crate::error::{GeoError, Result};
use crate::flow::FlowOptions;
use crate::grid::{BoundaryField, DiskGrid, FanBeamGrid, InteriorField};
use crate::inversion::{
    connection_sups, gmres, kernel_bound_check, lambda_sweep, neumann_solve, no_connection_bound, operator_norm_estimate,
    relative_errors, w_norm_bound, BoundEvaluation, FilterPlan, SweepOptions, WKind, WOperator,
};
use crate::io::{load_boundary, save_boundary, save_interior, write_pgm, VERSION};
use crate::surface::frame::{structure_residuals, FrameConvention};
use crate::surface::metric::IsothermalMetric;
use crate::surface::simplicity::{simplicity_report, SimplicityOptions, SimplicityReport};
use crate::transport::{scattering_identity_residual, Problem, ScatteringData};
use crate::validation::{
    cocycle_residual, duality_max, exit_time_identity_residual, factorization_residuals, random_phase_points,
    santalo_gap, smooth_inward_data, su2_residuals, wronskian_residual,
};
use crate::xray::{adjoint_i0, adjoint_iperp, forward_i0, forward_iperp, interior_weights, pairing_m, pairing_mu};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::path::Path;

/// Resolved objects shared by the drivers.
pub struct Setup {
    pub config: ExperimentConfig,
    pub metric: IsothermalMetric,
    pub conn: MatrixConnection,
    pub flow: FlowOptions,
    pub grid: DiskGrid,
    pub fan: FanBeamGrid,
    pub phantom: InteriorField,
    pub weights: Vec<f64>,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.check()?;
        let metric = config.metric()?;
        let conn = config.connection()?;
        let grid = config.disk_grid(metric.radius);
        let phantom = config.phantom.sample(grid, conn.rank())?;
        Ok(Self {
            config: config.clone(),
            flow: config.flow(),
            fan: config.fan(metric.radius),
            weights: interior_weights(&metric, &grid),
            metric,
            conn,
            grid,
            phantom,
        })
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem::new(&self.metric, &self.conn, self.flow)
    }

    fn kind(&self) -> WKind {
        match self.config.transform {
            Transform::I0 => WKind::A,
            Transform::Iperp => WKind::Perp,
        }
    }

    fn forward(&self, f: &InteriorField) -> Result<BoundaryField> {
        match self.config.transform {
            Transform::I0 => forward_i0(&self.problem(), self.fan, f),
            Transform::Iperp => forward_iperp(&self.problem(), self.fan, f),
        }
    }
}

fn envelope(config: &ExperimentConfig, body: impl Serialize) -> Result<Value> {
    let mut v = json!({ "version": VERSION, "config": config.resolved() });
    if let Value::Object(extra) = serde_json::to_value(body)? {
        v.as_object_mut().expect("object").extend(extra);
    }
    Ok(v)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn provenance_lines(config: &ExperimentConfig) -> Vec<String> {
    vec![VERSION.to_string(), format!("config {}", config.resolved())]
}

#[derive(Serialize)]
struct ForwardBody {
    transform: Transform,
    shape: [usize; 3],
    max_abs: f64,
}

/// Writes `data.bin` (with `data.json`) of the phantom's forward transform.
pub fn forward(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    fs::create_dir_all(out)?;
    let s = Setup::new(config)?;
    let d = s.forward(&s.phantom)?;
    save_boundary(&out.join("data.bin"), &d, &config.resolved())?;
    envelope(
        config,
        ForwardBody {
            transform: config.transform,
            shape: [d.grid.n_beta, d.grid.n_omega, d.nch],
            max_abs: d.data.iter().map(|z| z.norm()).fold(0.0, f64::max),
        },
    )
}

/// Outcome of the `(I + W^2) f = r` solve.
#[derive(Clone, Debug, Serialize)]
pub struct SolveOutcome {
    #[serde(skip)]
    pub solution: InteriorField,
    pub method: SolverMethod,
    pub iterations: usize,
    pub converged: bool,
    /// Neumann increments or GMRES relative residuals.
    pub history: Vec<f64>,
}

pub fn solve_fredholm(config: &ExperimentConfig, w: &WOperator, r: &InteriorField, weights: &[f64]) -> Result<SolveOutcome> {
    let sv = &config.solver;
    let w2 = |f: &InteriorField| w.apply_squared(f);
    match sv.method {
        SolverMethod::Neumann => {
            let n = neumann_solve(&w2, r, weights, sv.max_iter, sv.tol)?;
            Ok(SolveOutcome {
                solution: n.solution,
                method: sv.method,
                iterations: n.terms,
                converged: n.converged,
                history: n.increments,
            })
        }
        SolverMethod::Krylov => {
            let a = |f: &InteriorField| -> Result<InteriorField> {
                let mut out = f.clone();
                out.axpy(Complex64::new(1.0, 0.0), &w2(f)?);
                Ok(out)
            };
            let k = gmres(&a, r, weights, sv.restart, sv.tol, sv.max_iter)?;
            Ok(SolveOutcome {
                solution: k.solution.clone().expect("gmres returns its iterate"),
                method: sv.method,
                iterations: k.iterations,
                converged: k.converged,
                history: k.history,
            })
        }
    }
}

fn simplicity(s: &Setup) -> Result<SimplicityReport> {
    simplicity_report(&s.metric, &SimplicityOptions { flow: s.flow, ..SimplicityOptions::default() })
}

fn bound_for(s: &Setup, report: &SimplicityReport) -> BoundEvaluation {
    let (alpha, sup_f) = connection_sups(&s.metric, &s.conn);
    w_norm_bound(report, s.conn.rank(), alpha, sup_f, report.sup_dkappa)
}

/// `|W|` by power iteration, the adjoint applied through the `-A^*` partner operator.
pub fn norm_estimate(s: &Setup, w: &WOperator, iters: usize, seed: u64) -> Result<f64> {
    let partner = s.conn.neg_adjoint();
    let adj_kind = match w.kind {
        WKind::A => WKind::Perp,
        WKind::Perp => WKind::A,
    };
    let wa = WOperator::build(&s.metric, &partner, s.flow, adj_kind, s.grid, s.config.w_options())?;
    operator_norm_estimate(&|f| w.apply(f), &|f| wa.apply(f), &s.phantom, &s.weights, iters, seed)
}

#[derive(Serialize)]
struct ReconstructBody {
    transform: Transform,
    rel_l2: f64,
    rel_linf: f64,
    fbp_rel_l2: f64,
    iterations: usize,
    converged: bool,
    bound: f64,
    norm_estimate: Option<f64>,
    solver: SolveOutcome,
    bound_evaluation: BoundEvaluation,
    simplicity: SimplicityReport,
}

/// Filtered backprojection followed by the Fredholm solve; writes `recon.bin`,
/// `report.json` and `preview.pgm`.
pub fn reconstruct(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    fs::create_dir_all(out)?;
    let s = Setup::new(config)?;
    let d = match &config.data {
        Some(p) => {
            let d = load_boundary(p)?;
            if d.grid != s.fan || d.nch != s.conn.rank() {
                return Err(GeoError::Config(format!("{} does not match the configured fan and rank", p.display())));
            }
            d
        }
        None => s.forward(&s.phantom)?,
    };
    let plan = FilterPlan::build(&s.metric, &s.conn, s.flow, s.fan, s.grid, config.grids.n_theta)?;
    let r = match config.transform {
        Transform::I0 => plan.fbp_i0(&d),
        Transform::Iperp => plan.fbp_iperp(&d),
    };
    let w = WOperator::build(&s.metric, &s.conn, s.flow, s.kind(), s.grid, config.w_options())?;
    let sol = solve_fredholm(config, &w, &r, &s.weights)?;
    let norm = if config.solver.norm_iters > 0 {
        Some(norm_estimate(&s, &w, config.solver.norm_iters, config.seed)?)
    } else {
        None
    };
    let rep = simplicity(&s)?;
    let be = bound_for(&s, &rep);
    let (rel_l2, rel_linf) = relative_errors(&sol.solution, &s.phantom, &s.weights);
    save_interior(&out.join("recon.bin"), &sol.solution, &config.resolved())?;
    write_pgm(&out.join("preview.pgm"), &sol.solution, &provenance_lines(config))?;
    let v = envelope(
        config,
        ReconstructBody {
            transform: config.transform,
            rel_l2,
            rel_linf,
            fbp_rel_l2: relative_errors(&r, &s.phantom, &s.weights).0,
            iterations: sol.iterations,
            converged: sol.converged,
            bound: be.bound,
            norm_estimate: norm,
            solver: sol,
            bound_evaluation: be,
            simplicity: rep,
        },
    )?;
    write_json(&out.join("report.json"), &v)?;
    Ok(v)
}

#[derive(Serialize)]
struct ConstantsBody {
    simplicity: SimplicityReport,
    bound: BoundEvaluation,
    no_connection_bound: f64,
}

/// Simplicity constants and the a-priori bound; writes `constants.json`.
pub fn constants(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    fs::create_dir_all(out)?;
    let s = Setup::new(config)?;
    let rep = simplicity(&s)?;
    let v = envelope(
        config,
        ConstantsBody { bound: bound_for(&s, &rep), no_connection_bound: no_connection_bound(&rep), simplicity: rep },
    )?;
    write_json(&out.join("constants.json"), &v)?;
    Ok(v)
}

pub const SWEEP_HEADER: &str = "lambda_re,lambda_im,fbp_rel_l2,rel_l2,rel_linf,iterations,converged,residual";

/// Reconstruction along `lambda A` for the configured list; writes `sweep.csv`, whose
/// leading `#` lines carry the version and resolved config.
pub fn sweep(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    fs::create_dir_all(out)?;
    let s = Setup::new(config)?;
    let opts = SweepOptions {
        fan: s.fan,
        grid: s.grid,
        n_theta: config.grids.n_theta,
        flow: s.flow,
        w: config.w_options(),
        restart: config.solver.restart,
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
    };
    let rows = lambda_sweep(&s.metric, &s.conn, &config.lambdas()?, &s.phantom, &opts)?;
    let mut text = String::new();
    for l in provenance_lines(config) {
        text.push_str(&format!("# {l}\n"));
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(SWEEP_HEADER.split(',')).map_err(|e| GeoError::Format(e.to_string()))?;
    for r in &rows {
        w.serialize(r).map_err(|e| GeoError::Format(e.to_string()))?;
    }
    text.push_str(&String::from_utf8(w.into_inner().map_err(|e| GeoError::Format(e.to_string()))?).expect("utf8"));
    fs::write(out.join("sweep.csv"), text)?;
    envelope(config, json!({ "rows": rows }))
}

/// Relative GMRES tolerance of the range-test preimage; below it the discretization
/// mismatch between the transform and its filtered backprojection dominates.
pub const RANGE_LOOP_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct RangeLoop {
    /// `|I(f) - P w|_mu / |P w|_mu` with `f` reconstructed from `P w`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Serialize)]
struct RangeBody {
    factorization_plus: f64,
    factorization_minus: f64,
    /// `P_- w` pushed through an `I_{A,0}` preimage and back.
    loop_minus: RangeLoop,
    /// `P_+ w` pushed through an `I_{A,perp}` preimage and back.
    loop_plus: RangeLoop,
    /// `max |P_+- 1|_mu / |1|_mu` for constant `w`.
    constant_w: f64,
}

/// Range characterization on random smooth `w`; writes `report.json`.
pub fn range_test(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    fs::create_dir_all(out)?;
    let s = Setup::new(config)?;
    let p = s.problem();
    let data = ScatteringData::build(&p, s.fan)?;
    let mu = mu_weights(&s.metric, &s.fan);
    let w = smooth_inward_data(s.fan, s.conn.rank(), config.seed);
    let fact = factorization_residuals(&p, &data, s.grid, config.grids.n_theta, &w)?;
    let plan = FilterPlan::build(&s.metric, &s.conn, s.flow, s.fan, s.grid, config.grids.n_theta)?;
    // Least-squares preimage by GMRES on `f -> FBP(I f)`; for `I_{A,perp}` this also
    // recovers boundary values, which the one-shot formula assumes to vanish.
    let close = |sign: Sign| -> Result<RangeLoop> {
        let pw = range_p(&w, &data, sign).restrict_plus();
        let fwd = |f: &InteriorField| match sign {
            Sign::Minus => forward_i0(&p, s.fan, f),
            Sign::Plus => forward_iperp(&p, s.fan, f),
        };
        let fbp = |d: &BoundaryField| match sign {
            Sign::Minus => plan.fbp_i0(d),
            Sign::Plus => plan.fbp_iperp(d),
        };
        let sv = &config.solver;
        let tol = sv.tol.max(RANGE_LOOP_TOL);
        let k = gmres(&|f| Ok(fbp(&fwd(f)?)), &fbp(&pw), &s.weights, sv.restart, tol, sv.max_iter)?;
        let back = fwd(k.solution.as_ref().expect("gmres returns its iterate"))?;
        Ok(RangeLoop {
            residual: back.sub(&pw).norm(&mu) / pw.norm(&mu),
            iterations: k.iterations,
            converged: k.converged,
        })
    };
    let mut one = BoundaryField::zeros(s.fan, s.conn.rank());
    for i in 0..s.fan.n_beta {
        for j in s.fan.plus_range() {
            one.at_mut(i, j).iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        }
    }
    let constant_w = [Sign::Plus, Sign::Minus]
        .iter()
        .map(|&sg| range_p(&one, &data, sg).restrict_plus().norm(&mu) / one.norm(&mu))
        .fold(0.0, f64::max);
    let v = envelope(
        config,
        RangeBody {
            factorization_plus: fact.plus,
            factorization_minus: fact.minus,
            loop_minus: close(Sign::Minus)?,
            loop_plus: close(Sign::Plus)?,
            constant_w,
        },
    )?;
    write_json(&out.join("report.json"), &v)?;
    Ok(v)
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Group {
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Set when the group could not run.
    pub error: Option<String>,
}

fn group(name: &str, run: impl FnOnce() -> Result<Vec<(String, f64, f64)>>) -> Group {
    match run() {
        Ok(items) => {
            let checks: Vec<Check> = items
                .into_iter()
                .map(|(n, value, tolerance)| Check { name: n, value, tolerance, pass: value <= tolerance })
                .collect();
            Group { name: name.into(), pass: checks.iter().all(|c| c.pass), checks, error: None }
        }
        Err(e) => Group { name: name.into(), pass: false, checks: Vec::new(), error: Some(e.to_string()) },
    }
}

/// Runs every identity group on the configured metric and connection at the configured
/// resolution (capped for the costlier groups); writes `report.json`. The caller decides
/// the exit status from the `pass` field.
pub fn validate(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    fs::create_dir_all(out)?;
    let s = Setup::new(config)?;
    let m = &s.metric;
    let r = m.radius;
    let vc = &config.validate;
    let pts = random_phase_points(r, vc.points.max(1), config.seed);
    let tight = FlowOptions { panels_per_unit: s.flow.panels_per_unit, ..FlowOptions::tight() };
    let small_grid = DiskGrid::new(config.grids.n_x.min(32), r);
    let small_fan = FanBeamGrid::new(config.grids.n_beta.min(64), config.grids.n_omega.min(64), r);
    let n_theta = config.grids.n_theta.min(64);
    let mut groups = Vec::new();

    groups.push(group("structure_equations", || {
        let conv = FrameConvention { perp_sign: if vc.flip_perp_orientation { -1.0 } else { 1.0 } };
        let frame = pts
            .iter()
            .map(|&(x, y, th)| structure_residuals(m, [x, y, th], conv).into_iter().fold(0.0, f64::max))
            .fold(0.0, f64::max);
        Ok(vec![
            ("frame_brackets".into(), frame, 1e-5),
            ("wronskian".into(), wronskian_residual(m, tight, &pts, 10)?, 1e-7),
            ("cocycle".into(), cocycle_residual(m, tight, &pts, config.seed)?, 1e-6),
            ("exit_time_identity".into(), exit_time_identity_residual(m, tight, &pts, 1e-4)?, 1e-4),
        ])
    }));

    groups.push(group("transport_identities", || {
        let p = Problem::new(m, &s.conn, tight);
        let fan = FanBeamGrid::new(32, 32, r);
        let data = ScatteringData::build(&p, fan)?;
        Ok(vec![
            ("propagator_duality".into(), duality_max(&p, &pts)?, 1e-8),
            ("scattering_identity".into(), scattering_identity_residual(&p, &data)?, 1e-6),
        ])
    }));

    groups.push(group("santalo", || {
        let fan = FanBeamGrid::new(96, 96, r);
        Ok(vec![
            ("constant".into(), santalo_gap(m, &fan, s.flow, |_, _, _| 1.0)?, 5e-3),
            (
                "direction_dependent".into(),
                santalo_gap(m, &fan, s.flow, |x, y, th| 1.0 + x * th.cos() + (y * th.sin()).powi(2))?,
                5e-3,
            ),
        ])
    }));

    groups.push(group("adjointness", || {
        let p = s.problem();
        let f = config.phantom.sample(small_grid, s.conn.rank())?;
        let wi = interior_weights(m, &small_grid);
        let wm = mu_weights(m, &small_fan);
        let h = smooth_inward_data(small_fan, s.conn.rank(), config.seed + 1);
        let bp = crate::transport::Backprojection::build(&p, small_grid, n_theta)?;
        let gap = |l: Complex64, rr: Complex64| (l - rr).norm() / l.norm().max(rr.norm());
        let l0 = pairing_mu(&forward_i0(&p, small_fan, &f)?, &h, &wm);
        let r0 = pairing_m(&f, &adjoint_i0(&bp, &h), &wi);
        let lp = pairing_mu(&forward_iperp(&p, small_fan, &f)?, &h, &wm);
        let rp = pairing_m(&f, &adjoint_iperp(&p, &bp, &h), &wi);
        Ok(vec![("i0_pairing".into(), gap(l0, r0), 0.01), ("iperp_pairing".into(), gap(lp, rp), 0.01)])
    }));

    groups.push(group("error_operators", || {
        let grid = DiskGrid::new(24, r);
        let wopts = crate::inversion::WOptions { n_theta: 24, ..config.w_options() };
        let wi = interior_weights(m, &grid);
        let f = crate::phantom::PhantomSpec::RandomBumps { count: 3, seed: config.seed }.sample(grid, s.conn.rank())?;
        let g = crate::phantom::PhantomSpec::RandomBumps { count: 3, seed: config.seed + 1 }
            .sample(grid, s.conn.rank())?;
        let wa = WOperator::build(m, &s.conn, s.flow, WKind::A, grid, wopts)?;
        let wp = WOperator::build(m, &s.conn.neg_adjoint(), s.flow, WKind::Perp, grid, wopts)?;
        let l = wa.apply(&f)?.inner(&g, &wi);
        let rr = f.inner(&wp.apply(&g)?, &wi);
        let adj = (l - rr).norm() / (f.norm(&wi) * g.norm(&wi));
        let zero = MatrixConnection::zero(s.conn.rank());
        let wz = WOperator::build(m, &zero, s.flow, WKind::A, grid, wopts)?.apply(&f)?;
        let scalar = crate::inversion::apply_w_no_connection(m, s.flow, WKind::A, &f, &wopts)?;
        let red = wz.sub(&scalar).norm(&wi) / f.norm(&wi);
        Ok(vec![("w_adjointness".into(), adj, 0.01), ("zero_connection_reduction".into(), red, 1e-8)])
    }));

    groups.push(group("kernel_bounds", || {
        let rep = simplicity(&s)?;
        let kb = kernel_bound_check(m, &s.conn, &rep, s.flow, 100, 20, config.seed)?;
        Ok(vec![
            ("jacobi_variation_ratio".into(), kb.worst_ratio, 1.0),
            ("k2_ratio".into(), kb.k2_worst_ratio, 1.0),
        ])
    }));

    groups.push(group("range_factorization", || {
        let p = s.problem();
        let data = ScatteringData::build(&p, small_fan)?;
        let w = smooth_inward_data(small_fan, s.conn.rank(), config.seed);
        let fr = factorization_residuals(&p, &data, small_grid, n_theta, &w)?;
        Ok(vec![("p_plus".into(), fr.plus, 0.02), ("p_minus".into(), fr.minus, 0.02)])
    }));

    groups.push(group("su2_example", || {
        let rr = su2_residuals(256, 256);
        Ok(vec![
            ("boundary_trace".into(), rr.boundary_trace, 1e-8),
            ("boundary_map".into(), rr.boundary_map, 1e-8),
            ("mu_minus_h1".into(), rr.mu_minus_h1, 1e-6),
            ("mu_plus_hm1".into(), rr.mu_plus_hm1, 1e-6),
        ])
    }));

    let pass = groups.iter().all(|g| g.pass);
    let v = envelope(config, json!({ "pass": pass, "groups": groups }))?;
    write_json(&out.join("report.json"), &v)?;
    Ok(v)
}
