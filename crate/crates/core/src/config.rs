//! Experiment configuration: JSON or TOML, unknown keys rejected, every default
//! materialized in the resolved form echoed into outputs.

use crate::connection::{parse_complex, MatrixConnection};
use crate::error::{GeoError, Result};
use crate::flow::FlowOptions;
use crate::grid::{DiskGrid, FanBeamGrid};
use crate::inversion::WOptions;
use crate::phantom::PhantomSpec;
use crate::surface::metric::IsothermalMetric;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsConfig {
    /// Interior grid cells per side.
    pub n_x: usize,
    pub n_beta: usize,
    /// Fiber nodes per boundary point; a multiple of 4.
    pub n_omega: usize,
    /// Fiber samples of backprojections.
    pub n_theta: usize,
    pub panels_per_unit: f64,
}

impl Default for GridsConfig {
    fn default() -> Self {
        Self { n_x: 64, n_beta: 128, n_omega: 128, n_theta: 64, panels_per_unit: 8.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub gl_order: usize,
    pub t_max: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        let f = FlowOptions::default();
        Self { rtol: f.rtol, atol: f.atol, max_step: f.max_step, gl_order: f.gl_order, t_max: f.t_max }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `I_{A,0}` data, reconstructed through `W_A`.
    I0,
    /// `I_{A,perp}` data, reconstructed through `W_{A,perp}`.
    Iperp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Neumann,
    Krylov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES restart length.
    pub restart: usize,
    /// Fiber samples of the error-operator kernels.
    pub w_n_theta: usize,
    pub eps_rel: f64,
    /// Power iterations for the operator-norm estimate; 0 skips it.
    pub norm_iters: usize,
    pub cache_bytes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let w = WOptions::default();
        Self {
            method: SolverMethod::Krylov,
            tol: 1e-8,
            max_iter: 200,
            restart: 30,
            w_n_theta: w.n_theta,
            eps_rel: w.eps_rel,
            norm_iters: 12,
            cache_bytes: w.cache_bytes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Values of `lambda` as complex strings (`"0.3+0.09i"`).
    pub lambdas: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: (0..=10)
                .map(|k| {
                    let t = k as f64 / 10.0;
                    format!("{}+{}i", t, 0.3 * t)
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Random phase points per identity check.
    pub points: usize,
    /// Evaluate the structure equations with a flipped `X_perp`; the group must then fail.
    pub flip_perp_orientation: bool,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { points: 24, flip_perp_orientation: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Metric preset, e.g. `euclidean(1)`, `hyperbolic(-1,0.6)`, `bump(a,w,cx,cy,R)`.
    pub metric: String,
    /// Connection preset, e.g. `zero(2)`, `generic_poly(3,2)`, `pure_gauge(1,2)`.
    pub connection: String,
    /// Complex factor applied to the connection.
    pub connection_scale: String,
    pub grids: GridsConfig,
    pub ode: OdeConfig,
    pub phantom: PhantomSpec,
    pub transform: Transform,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub validate: ValidateConfig,
    /// Boundary data file to reconstruct from instead of synthesizing it from the phantom.
    pub data: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            metric: "euclidean(1)".into(),
            connection: "zero(1)".into(),
            connection_scale: "1".into(),
            grids: GridsConfig::default(),
            ode: OdeConfig::default(),
            phantom: PhantomSpec::default(),
            transform: Transform::I0,
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            validate: ValidateConfig::default(),
            data: None,
            output: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| GeoError::Config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| GeoError::Config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    /// Reads `.toml` as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeoError::Config(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }

    /// The fully resolved configuration as JSON.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Range and consistency checks beyond the schema.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(GeoError::Config(m));
        let g = &self.grids;
        if g.n_x < 8 {
            return bad(format!("grids.n_x = {} is below 8", g.n_x));
        }
        if g.n_omega < 8 || g.n_omega % 4 != 0 {
            return bad(format!("grids.n_omega = {} must be a multiple of 4, at least 8", g.n_omega));
        }
        if g.n_beta < 4 || g.n_theta < 4 {
            return bad("grids.n_beta and grids.n_theta must be at least 4".into());
        }
        if g.panels_per_unit <= 0.0 {
            return bad("grids.panels_per_unit must be positive".into());
        }
        let o = &self.ode;
        if !(o.rtol > 0.0 && o.atol > 0.0 && o.max_step > 0.0 && o.t_max > 0.0) || !(1..=16).contains(&o.gl_order) {
            return bad("ode tolerances, max_step and t_max must be positive; gl_order in 1..=16".into());
        }
        let s = &self.solver;
        if s.tol <= 0.0 || s.restart == 0 || s.w_n_theta < 4 || !(0.0..0.5).contains(&s.eps_rel) {
            return bad("solver: tol > 0, restart > 0, w_n_theta >= 4, eps_rel in [0, 0.5)".into());
        }
        self.metric()?;
        let conn = self.connection()?;
        self.phantom.gaussians(conn.rank())?;
        self.lambdas()?;
        Ok(())
    }

    pub fn metric(&self) -> Result<IsothermalMetric> {
        IsothermalMetric::from_preset(&self.metric)
    }

    pub fn scale(&self) -> Result<Complex64> {
        parse_complex(&self.connection_scale)
    }

    pub fn connection(&self) -> Result<MatrixConnection> {
        let c = MatrixConnection::from_preset(&self.connection)?;
        let s = self.scale()?;
        Ok(if s == Complex64::new(1.0, 0.0) { c } else { c.scaled(s) })
    }

    pub fn lambdas(&self) -> Result<Vec<Complex64>> {
        self.sweep.lambdas.iter().map(|s| parse_complex(s)).collect()
    }

    pub fn flow(&self) -> FlowOptions {
        FlowOptions {
            rtol: self.ode.rtol,
            atol: self.ode.atol,
            max_step: self.ode.max_step,
            panels_per_unit: self.grids.panels_per_unit,
            gl_order: self.ode.gl_order,
            t_max: self.ode.t_max,
        }
    }

    pub fn disk_grid(&self, radius: f64) -> DiskGrid {
        DiskGrid::new(self.grids.n_x, radius)
    }

    pub fn fan(&self, radius: f64) -> FanBeamGrid {
        FanBeamGrid::new(self.grids.n_beta, self.grids.n_omega, radius)
    }

    pub fn w_options(&self) -> WOptions {
        WOptions { n_theta: self.solver.w_n_theta, eps_rel: self.solver.eps_rel, cache_bytes: self.solver.cache_bytes }
    }
}
