//! Composite Gauss-Legendre rules on intervals and a polar product rule on disks.

use gauss_quad::GaussLegendre;
use std::f64::consts::PI;

/// Reference nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn gauss_legendre(order: usize) -> Self {
        let gl = GaussLegendre::new(order.max(2)).expect("valid Gauss-Legendre degree");
        let mut pairs: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (*x, *w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Composite rule on `[a, b]` with `panels` equal panels, appended to `out`.
    pub fn composite(&self, a: f64, b: f64, panels: usize, out: &mut Vec<(f64, f64)>) {
        let panels = panels.max(1);
        let w = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + w * p as f64;
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                out.push((lo + 0.5 * w * (x + 1.0), 0.5 * w * wt));
            }
        }
    }
}

/// Node/weight pairs for `f(x, y)` over the chart disk of radius `radius`
/// (Euclidean chart measure `dx dy`).
pub fn polar_disk_rule(radius: f64, n_r: usize, n_phi: usize) -> Vec<(f64, f64, f64)> {
    let rule = Rule::gauss_legendre(n_r);
    let mut out = Vec::with_capacity(n_r * n_phi);
    let dphi = 2.0 * PI / n_phi as f64;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let r = 0.5 * radius * (x + 1.0);
        let wr = 0.5 * radius * w * r;
        for k in 0..n_phi {
            let phi = dphi * k as f64;
            out.push((r * phi.cos(), r * phi.sin(), wr * dphi));
        }
    }
    out
}
