//! Closed registry of named closed-form space-time functions used for initial
//! data, potentials and prescribed conformal flow rates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ManifoldGrid;
use crate::scalar::Real;

/// A function of position and time sampled onto a grid.
pub trait SpaceTimeField<T>: Send + Sync {
    fn sample(&self, grid: &ManifoldGrid, t: T) -> ScalarField<T>;

    /// True when the sample does not depend on `t`; lets callers cache it.
    fn is_stationary(&self) -> bool {
        false
    }
}

impl<T: Real, F> SpaceTimeField<T> for F
where
    F: Fn(&ManifoldGrid, T) -> ScalarField<T> + Send + Sync,
{
    fn sample(&self, grid: &ManifoldGrid, t: T) -> ScalarField<T> {
        self(grid, t)
    }
}

fn default_one() -> f64 {
    1.0
}

fn default_modes() -> Vec<i32> {
    vec![1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Constant {
        value: f64,
    },
    /// `offset + amplitude·e^{-decay·t}·Π_{k_i≠0} sin(2π k_i x_i / L_i)`.
    Sine {
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default = "default_modes")]
        wavenumbers: Vec<i32>,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        decay: f64,
    },
    /// `offset + amplitude·Π_i Θ_s(x_i − c_i)` where `Θ_s` is the periodic
    /// heat kernel at time `width`, summed over images.
    PeriodizedGaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
    Product {
        factors: Vec<Generator>,
    },
}

impl Generator {
    pub fn constant(value: f64) -> Self {
        Generator::Constant { value }
    }

    pub fn sine(amplitude: f64, wavenumbers: &[i32], offset: f64) -> Self {
        Generator::Sine {
            amplitude,
            wavenumbers: wavenumbers.to_vec(),
            offset,
            decay: 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Constant { .. } => "constant",
            Generator::Sine { .. } => "sine",
            Generator::PeriodizedGaussian { .. } => "periodized_gaussian",
            Generator::Product { .. } => "product",
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let finite = |what: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "{} generator: {what} must be finite",
                    self.name()
                )))
            }
        };
        match self {
            Generator::Constant { value } => finite("value", *value),
            Generator::Sine {
                amplitude,
                wavenumbers,
                offset,
                decay,
            } => {
                finite("amplitude", *amplitude)?;
                finite("offset", *offset)?;
                finite("decay", *decay)?;
                if wavenumbers.len() != dim {
                    return Err(Error::InvalidParams(format!(
                        "sine generator needs {dim} wavenumbers, got {}",
                        wavenumbers.len()
                    )));
                }
                Ok(())
            }
            Generator::PeriodizedGaussian {
                center,
                width,
                amplitude,
                offset,
            } => {
                finite("amplitude", *amplitude)?;
                finite("offset", *offset)?;
                if center.len() != dim || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "periodized_gaussian needs a finite {dim}-component center"
                    )));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidParams("periodized_gaussian width must be > 0".into()));
                }
                Ok(())
            }
            Generator::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidParams("product generator needs factors".into()));
                }
                factors.iter().try_for_each(|f| f.validate(dim))
            }
        }
    }

    pub fn eval(&self, grid: &ManifoldGrid, x: [f64; 2], t: f64) -> f64 {
        match self {
            Generator::Constant { value } => *value,
            Generator::Sine {
                amplitude,
                wavenumbers,
                offset,
                decay,
            } => {
                let prod: f64 = wavenumbers
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k != 0)
                    .map(|(a, &k)| (2.0 * PI * k as f64 * x[a] / grid.period(a)).sin())
                    .product();
                offset + amplitude * (-decay * t).exp() * prod
            }
            Generator::PeriodizedGaussian {
                center,
                width,
                amplitude,
                offset,
            } => {
                let prod: f64 = center
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| periodic_heat_kernel(x[a] - c, *width, grid.period(a)))
                    .product();
                offset + amplitude * prod
            }
            Generator::Product { factors } => factors.iter().map(|f| f.eval(grid, x, t)).product(),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            Generator::Sine { decay, .. } => *decay == 0.0,
            Generator::Product { factors } => factors.iter().all(Generator::is_time_independent),
            _ => true,
        }
    }

    pub fn sample<T: Real>(&self, grid: &ManifoldGrid, t: f64) -> ScalarField<T> {
        ScalarField::from_fn(*grid, |x| self.eval(grid, x, t))
    }
}

impl<T: Real> SpaceTimeField<T> for Generator {
    fn sample(&self, grid: &ManifoldGrid, t: T) -> ScalarField<T> {
        Generator::sample(self, grid, t.to_f64_lossy())
    }

    fn is_stationary(&self) -> bool {
        self.is_time_independent()
    }
}

/// Heat kernel of `∂_t = ∂_xx` on a circle of length `period` at time `s`,
/// by the method of images.
pub fn periodic_heat_kernel(x: f64, s: f64, period: f64) -> f64 {
    let spread = (4.0 * s).sqrt();
    let images = (12.0 * spread / period).ceil() as i64 + 1;
    let norm = 1.0 / (4.0 * PI * s).sqrt();
    (-images..=images)
        .map(|k| {
            let d = x - k as f64 * period;
            (-d * d / (4.0 * s)).exp()
        })
        .sum::<f64>()
        * norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_forms() {
        let g: Generator = toml::from_str("kind = \"sine\"\namplitude = 0.1\nwavenumbers = [1, 0]").unwrap();
        assert_eq!(g, Generator::sine(0.1, &[1, 0], 0.0));
        assert!(toml::from_str::<Generator>("kind = \"spline\"").is_err());
    }

    #[test]
    fn sine_product_over_axes() {
        let grid = ManifoldGrid::torus(8, 8).unwrap();
        let g = Generator::sine(2.0, &[1, 1], 1.0);
        let v = g.eval(&grid, [0.25, 0.25], 0.0);
        assert!((v - 3.0).abs() < 1e-14);
        let only_x = Generator::sine(2.0, &[1, 0], 0.0);
        assert!((only_x.eval(&grid, [0.25, 0.9], 0.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn heat_kernel_has_unit_mass() {
        let n = 400;
        let mass: f64 = (0..n)
            .map(|i| periodic_heat_kernel(i as f64 / n as f64, 0.01, 1.0) / n as f64)
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_catches_dimension_errors() {
        assert!(Generator::sine(1.0, &[1], 0.0).validate(2).is_err());
        let g = Generator::PeriodizedGaussian {
            center: vec![0.5],
            width: 0.0,
            amplitude: 1.0,
            offset: 0.0,
        };
        assert!(g.validate(1).is_err());
        assert!(Generator::Product { factors: vec![] }.validate(1).is_err());
    }

    #[test]
    fn decay_makes_time_dependent() {
        let g = Generator::Sine {
            amplitude: 1.0,
            wavenumbers: vec![1],
            offset: 0.0,
            decay: 2.0,
        };
        assert!(!g.is_time_independent());
        let grid = ManifoldGrid::circle(8).unwrap();
        let v = g.eval(&grid, [0.25, 0.0], 0.5);
        assert!((v - (-1.0f64).exp()).abs() < 1e-14);
    }
}
