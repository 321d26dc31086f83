//! Test functions: Gaussian bumps and the default bump family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `amplitude · exp(-|g - center|² / width²)` in Euclidean coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Bump {
    pub fn new(center: Vec<f64>, width: f64) -> Self {
        Bump {
            center,
            width,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self, key: &str, n: usize) -> Result<()> {
        if self.center.len() != n {
            return Err(Error::config(format!("{key}.center"), format!("needs {n} coordinates")));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::config(format!("{key}.width"), "must be positive"));
        }
        Ok(())
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        let w2 = self.width * self.width;
        grid.sample(|x| {
            let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
            self.amplitude * (-d2 / w2).exp()
        })
    }

    /// The bump transported by `δ_λ`: `u(δ_{1/λ} g)`.
    pub fn dilated(&self, lambda: f64, m: usize, alpha: f64) -> DilatedBump {
        DilatedBump {
            bump: self.clone(),
            lambda,
            m,
            alpha,
        }
    }
}

/// `g -> bump(δ_{1/λ} g)`.
#[derive(Clone, Debug)]
pub struct DilatedBump {
    bump: Bump,
    lambda: f64,
    m: usize,
    alpha: f64,
}

impl DilatedBump {
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        let w2 = self.bump.width * self.bump.width;
        let ly = self.lambda.powf(self.alpha + 1.0);
        grid.sample(|x| {
            let d2: f64 = x
                .iter()
                .enumerate()
                .map(|(a, v)| {
                    let s = if a < self.m { self.lambda } else { ly };
                    let d = v / s - self.bump.center[a];
                    d * d
                })
                .sum();
            self.bump.amplitude * (-d2 / w2).exp()
        })
    }
}

/// Ten bumps on the Grushin plane: centers on and off the degenerate line,
/// widths from 0.3 to 0.55.
pub fn default_bump_family() -> Vec<Bump> {
    let centers = [
        [0.0, 0.0],
        [0.5, 0.0],
        [1.0, 0.0],
        [0.0, 0.5],
        [-0.5, 0.3],
        [0.8, -0.6],
        [-1.0, -0.4],
        [0.3, 0.8],
        [-0.3, -0.8],
        [0.0, -0.3],
    ];
    let widths = [0.4, 0.35, 0.3, 0.45, 0.5, 0.35, 0.3, 0.4, 0.55, 0.3];
    centers
        .iter()
        .zip(widths)
        .map(|(c, w)| Bump::new(c.to_vec(), w))
        .collect()
}
