use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, State};
use crate::sampling::{Region, StateSampler};
use crate::solver::{InitialData, TrigComponent, TrigTarget};
use crate::systems::{
    make_duct_gas, make_memory_scalar, make_selfsimilar, AreaProfile, DuctForm, MemoryKernel, NegatedEntropy,
    ScalarFlux, ScalarSanity, SharedLaw, WarpedScalar, ZeroEntropyFlux,
};

/// Built-in systems and toys, selected by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    ScalarSanity {
        #[serde(default = "one")]
        viscosity: f64,
    },
    DuctGas {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "two")]
        gamma: f64,
        #[serde(default = "default_area")]
        area: AreaProfile,
        #[serde(default = "default_form")]
        form: DuctForm,
        /// Row-major 2×2 viscosity; identity when absent.
        #[serde(default)]
        viscosity: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        rho_min: Option<f64>,
    },
    MemoryScalar {
        #[serde(default = "default_flux")]
        flux: ScalarFlux,
        #[serde(default = "default_kernel")]
        kernel: MemoryKernel,
        #[serde(default = "default_resolvent_dt")]
        resolvent_dt: f64,
        #[serde(default = "one")]
        viscosity: f64,
    },
    WarpedScalar {},
    NegatedEntropy {
        inner: Box<SystemConfig>,
    },
    ZeroEntropyFlux {
        inner: Box<SystemConfig>,
    },
    Selfsimilar {
        inner: Box<SystemConfig>,
        btilde: Vec<Vec<f64>>,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_area() -> AreaProfile {
    AreaProfile::sin(2.0, 0.3)
}
fn default_form() -> DuctForm {
    DuctForm::Rewritten
}
fn default_flux() -> ScalarFlux {
    ScalarFlux::Burgers
}
fn default_kernel() -> MemoryKernel {
    MemoryKernel::Exp { rate: 1.0 }
}
fn default_resolvent_dt() -> f64 {
    1e-3
}

fn matrix(rows: &[Vec<f64>], n: usize, path: &str) -> Result<Mat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(path, format!("expected a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(path, "entries must be finite"));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::ScalarSanity { viscosity: 1.0 }
    }
}

impl SystemConfig {
    /// Number of state components.
    pub fn components(&self) -> usize {
        match self {
            SystemConfig::DuctGas { .. } => 2,
            SystemConfig::NegatedEntropy { inner }
            | SystemConfig::ZeroEntropyFlux { inner }
            | SystemConfig::Selfsimilar { inner, .. } => inner.components(),
            _ => 1,
        }
    }

    fn base(&self) -> &SystemConfig {
        match self {
            SystemConfig::NegatedEntropy { inner }
            | SystemConfig::ZeroEntropyFlux { inner }
            | SystemConfig::Selfsimilar { inner, .. } => inner.base(),
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at("system")
    }

    fn validate_at(&self, path: &str) -> Result<()> {
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{path}.{key}"), "must be positive"))
            }
        };
        match self {
            SystemConfig::ScalarSanity { viscosity } => {
                if !viscosity.is_finite() {
                    return Err(Error::config(format!("{path}.viscosity"), "must be finite"));
                }
            }
            SystemConfig::DuctGas {
                kappa,
                gamma,
                area,
                viscosity,
                rho_min,
                ..
            } => {
                positive(*kappa, "kappa")?;
                if !(*gamma > 1.0 && gamma.is_finite()) {
                    return Err(Error::config(format!("{path}.gamma"), "must exceed 1"));
                }
                if !(area.min_value() > 0.0) {
                    return Err(Error::config(format!("{path}.area"), "area must stay positive"));
                }
                if let Some(v) = viscosity {
                    matrix(v, 2, &format!("{path}.viscosity"))?;
                }
                if let Some(r) = rho_min {
                    positive(*r, "rho_min")?;
                }
            }
            SystemConfig::MemoryScalar {
                kernel, resolvent_dt, ..
            } => {
                positive(*resolvent_dt, "resolvent_dt")?;
                let MemoryKernel::Exp { rate } = kernel;
                if !rate.is_finite() {
                    return Err(Error::config(format!("{path}.kernel.rate"), "must be finite"));
                }
            }
            SystemConfig::WarpedScalar {} => {}
            SystemConfig::NegatedEntropy { inner } | SystemConfig::ZeroEntropyFlux { inner } => {
                inner.validate_at(&format!("{path}.inner"))?
            }
            SystemConfig::Selfsimilar { inner, btilde } => {
                inner.validate_at(&format!("{path}.inner"))?;
                matrix(btilde, inner.components(), &format!("{path}.btilde"))?;
            }
        }
        Ok(())
    }

    /// Fresh instance; `horizon` bounds the time range of memory systems.
    pub fn build(&self, horizon: f64) -> Result<SharedLaw> {
        self.validate()?;
        Ok(match self {
            SystemConfig::ScalarSanity { viscosity } => Arc::new(ScalarSanity { viscosity: *viscosity }),
            SystemConfig::DuctGas {
                kappa,
                gamma,
                area,
                form,
                viscosity,
                rho_min,
            } => {
                let mut d = make_duct_gas(*kappa, *gamma, *area);
                d.form = *form;
                if let Some(v) = viscosity {
                    d = d.with_viscosity(matrix(v, 2, "system.viscosity")?);
                }
                if let Some(r) = rho_min {
                    d = d.with_rho_min(*r);
                }
                Arc::new(d)
            }
            SystemConfig::MemoryScalar {
                flux,
                kernel,
                resolvent_dt,
                viscosity,
            } => {
                let t_end = (horizon.max(*resolvent_dt) / resolvent_dt).ceil() * resolvent_dt;
                let mut m = make_memory_scalar(*flux, *kernel, t_end, *resolvent_dt)?;
                m.viscosity = *viscosity;
                Arc::new(m)
            }
            SystemConfig::WarpedScalar {} => Arc::new(WarpedScalar),
            SystemConfig::NegatedEntropy { inner } => Arc::new(NegatedEntropy(inner.build(horizon)?)),
            SystemConfig::ZeroEntropyFlux { inner } => Arc::new(ZeroEntropyFlux(inner.build(horizon)?)),
            SystemConfig::Selfsimilar { inner, btilde } => {
                let law = inner.build(horizon)?;
                let b = matrix(btilde, law.n(), "system.btilde")?;
                Arc::new(make_selfsimilar(law, b))
            }
        })
    }

    /// Smooth periodic data used when the config gives none.
    pub fn default_initial(&self) -> InitialData {
        match self.base() {
            SystemConfig::DuctGas { .. } => InitialData::Sine {
                base: vec![1.0, 0.3],
                amplitude: vec![0.2, 0.1],
                wavenumber: 1.0,
                phase: 0.0,
            },
            SystemConfig::WarpedScalar {} => InitialData::Sine {
                base: vec![0.2],
                amplitude: vec![0.3],
                wavenumber: 1.0,
                phase: 0.0,
            },
            _ => InitialData::Sine {
                base: vec![0.0],
                amplitude: vec![0.5],
                wavenumber: 1.0,
                phase: 0.0,
            },
        }
    }

    /// Travelling-wave reference used when the config gives none.
    pub fn default_target(&self) -> TrigTarget {
        let wave = |mean: f64, amplitude: f64, phase: f64| TrigComponent {
            mean,
            amplitude,
            wavenumber: 1.0,
            speed: 1.0,
            phase,
        };
        let components = match self.base() {
            SystemConfig::DuctGas { .. } => vec![wave(1.0, 0.2, 0.0), wave(0.3, 0.1, 1.0)],
            SystemConfig::WarpedScalar {} => vec![wave(0.2, 0.3, 0.0)],
            _ => vec![wave(0.5, 0.25, 0.0)],
        };
        TrigTarget { components }
    }

    /// Bounded sampling region and floors used when the config gives none.
    pub fn default_region(&self) -> (Region, StateSampler) {
        match self.base() {
            SystemConfig::DuctGas { .. } => (
                Region::Box {
                    lo: vec![0.5, -2.0],
                    hi: vec![2.0, 2.0],
                },
                StateSampler::unconstrained(2).with_floor(0, 0.5),
            ),
            _ => (
                Region::Box {
                    lo: vec![-2.0],
                    hi: vec![2.0],
                },
                StateSampler::unconstrained(1),
            ),
        }
    }

    pub fn torus_length(&self) -> f64 {
        2.0 * PI
    }

    /// Zero history over `[0, horizon]` so memory systems can be evaluated
    /// pointwise; a no-op for the others.
    pub fn quiescent_history(law: &SharedLaw, horizon: f64) -> Result<()> {
        law.record_history(0.0, &[0.0], &[State::zeros(law.n())], horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_toys_build() {
        let cfg: SystemConfig =
            serde_json::from_str(r#"{"kind":"negated_entropy","inner":{"kind":"duct_gas"}}"#).unwrap();
        let law = cfg.build(1.0).unwrap();
        assert_eq!(law.name(), "negated_entropy");
        assert_eq!(cfg.components(), 2);
    }

    #[test]
    fn bad_gamma_cites_its_path() {
        let cfg: SystemConfig = serde_json::from_str(r#"{"kind":"duct_gas","gamma":1.0}"#).unwrap();
        match cfg.build(1.0) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "system.gamma"),
            other => panic!("{:?}", other.err()),
        }
    }

    #[test]
    fn memory_scalar_accepts_quiescent_history() {
        let cfg: SystemConfig = serde_json::from_str(r#"{"kind":"memory_scalar"}"#).unwrap();
        let law = cfg.build(0.5).unwrap();
        SystemConfig::quiescent_history(&law, 0.5).unwrap();
        law.check(&State::from_element(1, 0.3), &[1.0], 0.4).unwrap();
    }
}
