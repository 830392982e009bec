//! Test objects on the interior grid: Gaussian sums, given explicitly or drawn
//! from a seeded SplitMix64 stream.

use crate::error::{GeoError, Result};
use crate::grid::{DiskGrid, InteriorField};
use crate::linalg::CVec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

/// One Gaussian `amplitude exp(-|x - center|^2 / width^2)`; coordinates are
/// relative to the disk radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian {
    pub center: [f64; 2],
    pub width: f64,
    /// Per-channel amplitude as `[re, im]`.
    pub amplitude: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum PhantomSpec {
    Gaussians { terms: Vec<Gaussian> },
    /// `count` random Gaussians with centers within `0.55 R`, widths in `[0.08, 0.2] R`.
    RandomBumps { count: usize, seed: u64 },
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec::Gaussians {
            terms: vec![
                Gaussian { center: [0.15, -0.1], width: 0.22, amplitude: vec![[1.0, 0.0], [0.0, 0.5]] },
                Gaussian { center: [-0.25, 0.2], width: 0.15, amplitude: vec![[0.4, 0.3], [-0.6, 0.0]] },
            ],
        }
    }
}

impl PhantomSpec {
    /// Resolves to explicit Gaussians with `nch` channels.
    pub fn gaussians(&self, nch: usize) -> Result<Vec<Gaussian>> {
        match self {
            PhantomSpec::Gaussians { terms } => {
                for t in terms {
                    if t.amplitude.is_empty() || t.width <= 0.0 {
                        return Err(GeoError::Config("gaussian needs a positive width and amplitudes".into()));
                    }
                }
                Ok(terms.clone())
            }
            PhantomSpec::RandomBumps { count, seed } => {
                let mut rng = SplitMix64::seed_from_u64(*seed);
                Ok((0..*count)
                    .map(|_| {
                        let r = 0.55 * rng.gen::<f64>().sqrt();
                        let a = rng.gen::<f64>() * std::f64::consts::TAU;
                        let width = 0.08 + 0.12 * rng.gen::<f64>();
                        let amplitude = (0..nch).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
                        Gaussian { center: [r * a.cos(), r * a.sin()], width, amplitude }
                    })
                    .collect())
            }
        }
    }

    /// Samples the phantom at every storage node; a single listed amplitude is
    /// broadcast to all channels.
    pub fn sample(&self, grid: DiskGrid, nch: usize) -> Result<InteriorField> {
        let terms = self.gaussians(nch)?;
        let r = grid.radius;
        Ok(InteriorField::from_fn(grid, nch, |x, y| {
            let mut v = CVec::zeros(nch);
            for t in &terms {
                let d2 = (x / r - t.center[0]).powi(2) + (y / r - t.center[1]).powi(2);
                let g = (-d2 / (t.width * t.width)).exp();
                for c in 0..nch {
                    let a = t.amplitude[c.min(t.amplitude.len() - 1)];
                    v[c] += Complex64::new(a[0], a[1]) * g;
                }
            }
            v
        }))
    }
}
