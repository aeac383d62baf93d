use serde::{Deserialize, Serialize};

use super::Grid1D;
use crate::error::{Error, Result};
use crate::linalg::State;

fn one() -> f64 {
    1.0
}

/// Initial data presets. Vectors carry one entry per state component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        value: Vec<f64>,
    },
    /// `base + amplitude·sin(k x + phase)`
    Sine {
        base: Vec<f64>,
        amplitude: Vec<f64>,
        #[serde(default = "one")]
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `base + amplitude·exp(−d²/(2w²))` with `d` the periodic distance to `center`.
    GaussianBump {
        base: Vec<f64>,
        amplitude: Vec<f64>,
        center: f64,
        width: f64,
    },
    /// `left` outside and `right` on the middle half of the torus, joined by
    /// tanh ramps of the given width.
    TwoStateSmooth {
        left: Vec<f64>,
        right: Vec<f64>,
        width: f64,
    },
}

fn periodic_distance(x: f64, c: f64, l: f64) -> f64 {
    let d = (x - c).rem_euclid(l);
    d.min(l - d)
}

impl InitialData {
    pub fn components(&self) -> usize {
        match self {
            InitialData::Constant { value } => value.len(),
            InitialData::Sine { base, .. } | InitialData::GaussianBump { base, .. } => base.len(),
            InitialData::TwoStateSmooth { left, .. } => left.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let same = |a: &[f64], b: &[f64], what: &str| {
            if a.len() == b.len() {
                Ok(())
            } else {
                Err(Error::config(what, format!("length {} does not match {}", b.len(), a.len())))
            }
        };
        match self {
            InitialData::Constant { .. } => Ok(()),
            InitialData::Sine { base, amplitude, .. } => same(base, amplitude, "initial.amplitude"),
            InitialData::GaussianBump {
                base, amplitude, width, ..
            } => {
                if *width <= 0.0 {
                    return Err(Error::config("initial.width", "must be positive"));
                }
                same(base, amplitude, "initial.amplitude")
            }
            InitialData::TwoStateSmooth { left, right, width } => {
                if *width <= 0.0 {
                    return Err(Error::config("initial.width", "must be positive"));
                }
                same(left, right, "initial.right")
            }
        }
    }

    pub fn at(&self, x: f64, length: f64) -> State {
        match self {
            InitialData::Constant { value } => State::from_column_slice(value),
            InitialData::Sine {
                base,
                amplitude,
                wavenumber,
                phase,
            } => {
                let s = (wavenumber * x + phase).sin();
                State::from_iterator(base.len(), base.iter().zip(amplitude).map(|(b, a)| b + a * s))
            }
            InitialData::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => {
                let d = periodic_distance(x, *center, length);
                let g = (-d * d / (2.0 * width * width)).exp();
                State::from_iterator(base.len(), base.iter().zip(amplitude).map(|(b, a)| b + a * g))
            }
            InitialData::TwoStateSmooth { left, right, width } => {
                let d = periodic_distance(x, 0.5 * length, length);
                let w = 0.5 * (1.0 + ((0.25 * length - d) / width).tanh());
                State::from_iterator(left.len(), left.iter().zip(right).map(|(l, r)| l + (r - l) * w))
            }
        }
    }

    pub fn sample(&self, grid: &Grid1D) -> Result<Vec<State>> {
        self.validate()?;
        Ok((0..grid.n).map(|i| self.at(grid.center(i), grid.length)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_evaluate() {
        let g = Grid1D::new(16, 2.0 * std::f64::consts::PI).unwrap();
        let c = InitialData::Constant { value: vec![1.0, 2.0] }.sample(&g).unwrap();
        assert!(c.iter().all(|u| u[0] == 1.0 && u[1] == 2.0));
        let bump = InitialData::GaussianBump {
            base: vec![0.0],
            amplitude: vec![1.0],
            center: 0.1,
            width: 0.5,
        };
        // periodic distance wraps across x = 0
        assert!((bump.at(g.length - 0.1, g.length)[0] - (-0.08f64).exp()).abs() < 1e-12);
        let two = InitialData::TwoStateSmooth {
            left: vec![1.0],
            right: vec![2.0],
            width: 0.05,
        };
        assert!((two.at(0.0, g.length)[0] - 1.0).abs() < 1e-12);
        assert!((two.at(0.5 * g.length, g.length)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_are_config_errors() {
        let g = Grid1D::new(8, 1.0).unwrap();
        let bad = InitialData::Sine {
            base: vec![1.0, 0.0],
            amplitude: vec![0.1],
            wavenumber: 1.0,
            phase: 0.0,
        };
        assert!(matches!(bad.sample(&g), Err(Error::Config { .. })));
    }
}
