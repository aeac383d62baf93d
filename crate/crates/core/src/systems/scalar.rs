use super::BalanceLaw;
use crate::error::{Error, Result};
use crate::linalg::{Hessians, Mat, MatrixGradient, State};

/// Homogeneous Burgers baseline: `A = u`, `f = u²/2`, `P = 0`, `η = u²/2`,
/// `q = u³/3`, `G = u`, `B = viscosity`.
#[derive(Debug, Clone)]
pub struct ScalarSanity {
    pub viscosity: f64,
}

pub fn make_scalar_sanity() -> ScalarSanity {
    ScalarSanity { viscosity: 1.0 }
}

fn scalar(v: f64) -> State {
    State::from_element(1, v)
}

fn one_by_one(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

impl BalanceLaw for ScalarSanity {
    fn name(&self) -> &str {
        "scalar_sanity"
    }
    fn n(&self) -> usize {
        1
    }
    fn check(&self, u: &State, _x: &[f64], _t: f64) -> Result<()> {
        if u.len() != 1 || !u[0].is_finite() {
            return Err(Error::domain("u", u.get(0).copied().unwrap_or(f64::NAN), f64::NEG_INFINITY));
        }
        Ok(())
    }

    fn a(&self, u: &State, _x: &[f64], _t: f64) -> State {
        u.clone()
    }
    fn da(&self, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(1.0)
    }
    fn d2a(&self, _u: &State, _x: &[f64], _t: f64) -> Hessians {
        vec![one_by_one(0.0)]
    }
    fn a_t(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }

    fn flux(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.5 * u[0] * u[0])
    }
    fn dflux(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(u[0])
    }
    fn flux_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }

    fn source(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }

    fn eta(&self, u: &State, _x: &[f64], _t: f64) -> f64 {
        0.5 * u[0] * u[0]
    }
    fn grad_eta(&self, u: &State, _x: &[f64], _t: f64) -> State {
        u.clone()
    }
    fn hess_eta(&self, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(1.0)
    }
    fn eta_t(&self, _u: &State, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn q(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> f64 {
        u[0].powi(3) / 3.0
    }
    fn grad_q(&self, _alpha: usize, u: &State, _x: &[f64], _t: f64) -> State {
        scalar(u[0] * u[0])
    }
    fn q_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn g(&self, u: &State, _x: &[f64], _t: f64) -> State {
        u.clone()
    }
    fn dg(&self, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(1.0)
    }
    fn d2g(&self, _u: &State, _x: &[f64], _t: f64) -> Hessians {
        vec![one_by_one(0.0)]
    }
    fn g_t(&self, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }
    fn g_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> State {
        scalar(0.0)
    }
    fn dg_x(&self, _alpha: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(0.0)
    }

    fn b(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(self.viscosity)
    }
    fn db(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> MatrixGradient {
        vec![one_by_one(0.0)]
    }
    fn b_x(&self, _alpha: usize, _beta: usize, _u: &State, _x: &[f64], _t: f64) -> Mat {
        one_by_one(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;

    #[test]
    fn structural_values() {
        let s = make_scalar_sanity();
        assert_eq!(s.a(&state(&[2.0]), &[0.0], 0.0)[0], 2.0);
        assert_eq!(s.g(&state(&[2.0]), &[0.0], 0.0)[0], 2.0);
        assert_eq!(s.q(0, &state(&[3.0]), &[0.0], 0.0), 9.0);
        assert_eq!(s.b(0, 0, &state(&[3.0]), &[0.0], 0.0)[(0, 0)], 1.0);
    }
}
