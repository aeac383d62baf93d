//! Isentropic gas flow through a duct of varying cross section `a(x)`.
//!
//! The default [`DuctForm::Rewritten`] divides the weighted system by `a`,
//! leaving `A = U = (ρ, m)`, the homogeneous gas flux and the geometric
//! source `P = (a'/a)(m, m²/ρ)`. [`DuctForm::Weighted`] keeps `A = a(x) U`
//! and is mainly useful as an `x`-dependent conserved map.

use serde::{Deserialize, Serialize};

use super::BalanceLaw;
use crate::error::{Error, Result};
use crate::linalg::{Hessians, Mat, MatrixGradient, State};

pub const DEFAULT_RHO_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum AreaProfile {
    Constant { value: f64 },
    /// `base + amplitude·sin(wavenumber·x)`
    Sin {
        base: f64,
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[allow(non_snake_case)]
impl AreaProfile {
    pub fn Constant(value: f64) -> Self {
        AreaProfile::Constant { value }
    }

    pub fn sin(base: f64, amplitude: f64) -> Self {
        AreaProfile::Sin {
            base,
            amplitude,
            wavenumber: 1.0,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            AreaProfile::Constant { value } => value,
            AreaProfile::Sin {
                base,
                amplitude,
                wavenumber,
            } => base + amplitude * (wavenumber * x).sin(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            AreaProfile::Constant { .. } => 0.0,
            AreaProfile::Sin {
                amplitude,
                wavenumber,
                ..
            } => amplitude * wavenumber * (wavenumber * x).cos(),
        }
    }

    /// Smallest value over a period.
    pub fn min_value(&self) -> f64 {
        match *self {
            AreaProfile::Constant { value } => value,
            AreaProfile::Sin { base, amplitude, .. } => base - amplitude.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuctForm {
    Rewritten,
    Weighted,
}

#[derive(Debug, Clone)]
pub struct DuctGas {
    pub kappa: f64,
    pub gamma: f64,
    pub profile: AreaProfile,
    pub rho_min: f64,
    pub viscosity: Mat,
    pub form: DuctForm,
}

/// Panics on `gamma <= 1`, `kappa <= 0` or a profile that touches zero;
/// config validation rejects those before construction.
pub fn make_duct_gas(kappa: f64, gamma: f64, profile: AreaProfile) -> DuctGas {
    assert!(gamma > 1.0, "gamma must exceed 1");
    assert!(kappa > 0.0, "kappa must be positive");
    assert!(profile.min_value() > 0.0, "area profile must stay positive");
    DuctGas {
        kappa,
        gamma,
        profile,
        rho_min: DEFAULT_RHO_MIN,
        viscosity: Mat::identity(2, 2),
        form: DuctForm::Rewritten,
    }
}

impl DuctGas {
    pub fn weighted(kappa: f64, gamma: f64, profile: AreaProfile) -> Self {
        DuctGas {
            form: DuctForm::Weighted,
            ..make_duct_gas(kappa, gamma, profile)
        }
    }

    pub fn with_viscosity(mut self, viscosity: Mat) -> Self {
        self.viscosity = viscosity;
        self
    }

    pub fn with_rho_min(mut self, rho_min: f64) -> Self {
        self.rho_min = rho_min;
        self
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.kappa * rho.powf(self.gamma)
    }

    /// Derivatives 0..=3 of the internal energy density `h(ρ) = κρ^γ/(γ−1)`.
    fn h(&self, rho: f64) -> [f64; 4] {
        let (k, g) = (self.kappa, self.gamma);
        [
            k * rho.powf(g) / (g - 1.0),
            k * g * rho.powf(g - 1.0) / (g - 1.0),
            k * g * rho.powf(g - 2.0),
            k * g * (g - 2.0) * rho.powf(g - 3.0),
        ]
    }

    fn weight(&self, x: &[f64]) -> f64 {
        match self.form {
            DuctForm::Rewritten => 1.0,
            DuctForm::Weighted => self.profile.value(x[0]),
        }
    }

    fn weight_x(&self, x: &[f64]) -> f64 {
        match self.form {
            DuctForm::Rewritten => 0.0,
            DuctForm::Weighted => self.profile.derivative(x[0]),
        }
    }

    fn gas_flux(&self, u: &State) -> State {
        let (rho, m) = (u[0], u[1]);
        State::from_column_slice(&[m, m * m / rho + self.pressure(rho)])
    }

    fn gas_dflux(&self, u: &State) -> Mat {
        let (rho, m) = (u[0], u[1]);
        let dp = self.kappa * self.gamma * rho.powf(self.gamma - 1.0);
        Mat::from_row_slice(2, 2, &[0.0, 1.0, -m * m / (rho * rho) + dp, 2.0 * m / rho])
    }

    fn gas_eta(&self, u: &State) -> f64 {
        let (rho, m) = (u[0], u[1]);
        0.5 * m * m / rho + self.h(rho)[0]
    }

    fn gas_grad_eta(&self, u: &State) -> State {
        let (rho, m) = (u[0], u[1]);
        State::from_column_slice(&[-0.5 * m * m / (rho * rho) + self.h(rho)[1], m / rho])
    }

    fn gas_hess_eta(&self, u: &State) -> Mat {
        let (rho, m) = (u[0], u[1]);
        let h2 = self.h(rho)[2];
        Mat::from_row_slice(
            2,
            2,
            &[m * m / rho.powi(3) + h2, -m / (rho * rho), -m / (rho * rho), 1.0 / rho],
        )
    }

    fn gas_third(&self, u: &State) -> Hessians {
        let (rho, m) = (u[0], u[1]);
        let h3 = self.h(rho)[3];
        let rrr = -3.0 * m * m / rho.powi(4) + h3;
        let rrm = 2.0 * m / rho.powi(3);
        let rmm = -1.0 / (rho * rho);
        vec![
            Mat::from_row_slice(2, 2, &[rrr, rrm, rrm, rmm]),
            Mat::from_row_slice(2, 2, &[rrm, rmm, rmm, 0.0]),
        ]
    }

    fn gas_q(&self, u: &State) -> f64 {
        let (rho, m) = (u[0], u[1]);
        (m / rho) * (self.gas_eta(u) + self.pressure(rho))
    }

    fn gas_grad_q(&self, u: &State) -> State {
        let (rho, m) = (u[0], u[1]);
        let (k, g) = (self.kappa, self.gamma);
        State::from_column_slice(&[
            -m.powi(3) / rho.powi(3) + k * g * m * rho.powf(g - 2.0),
            1.5 * m * m / (rho * rho) + k * g / (g - 1.0) * rho.powf(g - 1.0),
        ])
    }
}

fn zeros2() -> State {
    State::zeros(2)
}

impl BalanceLaw for DuctGas {
    fn name(&self) -> &str {
        "duct_gas"
    }
    fn n(&self) -> usize {
        2
    }
    fn check(&self, u: &State, _x: &[f64], _t: f64) -> Result<()> {
        if u.len() != 2 {
            return Err(Error::domain("state dimension", u.len() as f64, 2.0));
        }
        if !(u[0] >= self.rho_min) {
            return Err(Error::domain("rho", u[0], self.rho_min));
        }
        if !u[1].is_finite() {
            return Err(Error::domain("m", u[1], f64::NEG_INFINITY));
        }
        Ok(())
    }

    fn a(&self, u: &State, x: &[f64], _t: f64) -> State {
        u * self.weight(x)
    }
    fn da(&self, _u: &State, x: &[f64], _t: f64) -> Mat {
        Mat::identity(2, 2) * self.weight(x)
    }
    fn d2a(&self, _u: &State, _x: &[f64], _t: f64) -> Hessians {
        vec![Mat::zeros(2, 2); 2]
    }
    fn a_t(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        zeros2()
    }

    fn flux(&self, _alpha: usize, u: &State, x: &[f64], _t: f64) -> State {
        self.gas_flux(u) * self.weight(x)
    }
    fn dflux(&self, _alpha: usize, u: &State, x: &[f64], _t: f64) -> Mat {
        self.gas_dflux(u) * self.weight(x)
    }
    fn flux_x(&self, _alpha: usize, u: &State, x: &[f64], _t: f64) -> State {
        self.gas_flux(u) * self.weight_x(x)
    }

    fn source(&self, u: &State, x: &[f64], _t: f64) -> State {
        let (rho, m) = (u[0], u[1]);
        match self.form {
            DuctForm::Rewritten => {
                let s = self.profile.derivative(x[0]) / self.profile.value(x[0]);
                State::from_column_slice(&[s * m, s * m * m / rho])
            }
            DuctForm::Weighted => {
                State::from_column_slice(&[0.0, -self.profile.derivative(x[0]) * self.pressure(rho)])
            }
        }
    }

    fn eta(&self, u: &State, x: &[f64], _t: f64) -> f64 {
        self.gas_eta(u) * self.weight(x)
    }
    fn grad_eta(&self, u: &State, x: &[f64], _t: f64) -> State {
        self.gas_grad_eta(u) * self.weight(x)
    }
    fn hess_eta(&self, u: &State, x: &[f64], _t: f64) -> Mat {
        self.gas_hess_eta(u) * self.weight(x)
    }
    fn eta_t(&self, _u: &State, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn q(&self, _alpha: usize, u: &State, x: &[f64], _t: f64) -> f64 {
        self.gas_q(u) * self.weight(x)
    }
    fn grad_q(&self, _alpha: usize, u: &State, x: &[f64], _t: f64) -> State {
        self.gas_grad_q(u) * self.weight(x)
    }
    fn q_x(&self, _alpha: usize, u: &State, x: &[f64], _t: f64) -> f64 {
        self.gas_q(u) * self.weight_x(x)
    }

    fn g(&self, u: &State, _x: &[f64], _t: f64) -> State {
        self.gas_grad_eta(u)
    }
    fn dg(&self, u: &State, _x: &[f64], _t: f64) -> Mat {
        self.gas_hess_eta(u)
    }
    fn d2g(&self, u: &State, _x: &[f64], _t: f64) -> Hessians {
        self.gas_third(u)
    }
    fn g_t(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        zeros2()
    }
    fn g_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> State {
        zeros2()
    }
    fn dg_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        Mat::zeros(2, 2)
    }

    fn b(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        self.viscosity.clone()
    }
    fn db(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> MatrixGradient {
        vec![Mat::zeros(2, 2); 2]
    }
    fn b_x(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        Mat::zeros(2, 2)
    }
}
