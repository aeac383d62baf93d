//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type State = DVector<f64>;
pub type Mat = DMatrix<f64>;

/// One Hessian per output component: `h[i][(j, k)] = ∂²F_i / ∂U_j ∂U_k`.
pub type Hessians = Vec<Mat>;

/// Derivative of a matrix-valued map: `g[k] = ∂M / ∂U_k`.
pub type MatrixGradient = Vec<Mat>;

pub fn state(values: &[f64]) -> State {
    DVector::from_column_slice(values)
}

pub fn inf_norm(v: &State) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn solve(m: &Mat, rhs: &State, what: &'static str) -> Result<State> {
    if m.nrows() == 1 {
        let a = m[(0, 0)];
        if a == 0.0 || !a.is_finite() {
            return Err(Error::Singular(what));
        }
        return Ok(rhs / a);
    }
    m.clone()
        .lu()
        .solve(rhs)
        .filter(|x| x.iter().all(|c| c.is_finite()))
        .ok_or(Error::Singular(what))
}

/// `Σ_k h[i][(j,k)] w_k` as a matrix over `(i, j)`.
pub fn contract_last(h: &Hessians, w: &State) -> Mat {
    let n = h.len();
    let mut out = Mat::zeros(n, w.len());
    for (i, hi) in h.iter().enumerate() {
        let row = hi * w;
        for j in 0..w.len() {
            out[(i, j)] = row[j];
        }
    }
    out
}

/// `Σ_i c_i h[i]`, e.g. `G·∇²A`.
pub fn weighted_sum(c: &State, h: &Hessians) -> Mat {
    let n = h.first().map_or(0, |m| m.nrows());
    let mut out = Mat::zeros(n, n);
    for (ci, hi) in c.iter().zip(h) {
        out += hi * *ci;
    }
    out
}

/// `Σ_k g[k] v_k`: directional derivative of a matrix-valued map.
pub fn directional(g: &MatrixGradient, v: &State) -> Mat {
    let (r, c) = g.first().map_or((0, 0), |m| m.shape());
    let mut out = Mat::zeros(r, c);
    for (gk, vk) in g.iter().zip(v.iter()) {
        out += gk * *vk;
    }
    out
}

pub fn symmetric_min_eigenvalue(m: &Mat) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    if sym.nrows() == 1 {
        return sym[(0, 0)];
    }
    sym.symmetric_eigenvalues().min()
}

pub fn spectral_radius(m: &Mat) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    if m.nrows() == 2 {
        // closed form avoids the Schur iteration in the hot loop
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = tr * tr / 4.0 - det;
        return if disc >= 0.0 {
            let s = disc.sqrt();
            (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
        } else {
            det.abs().sqrt()
        };
    }
    m.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_matches_eigen_solver() {
        let m = Mat::from_row_slice(2, 2, &[0.0, 1.0, 3.0, 2.0]);
        assert!((spectral_radius(&m) - 3.0).abs() < 1e-12);
        let rot = Mat::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius(&rot) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn contraction_conventions() {
        let h = vec![
            Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]),
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        ];
        let w = state(&[1.0, -1.0]);
        let c = contract_last(&h, &w);
        assert_eq!(c, Mat::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, 1.0]));
        let s = weighted_sum(&state(&[2.0, 1.0]), &h);
        assert_eq!(s, Mat::from_row_slice(2, 2, &[2.0, 5.0, 5.0, 6.0]));
    }

    #[test]
    fn singular_solve_is_an_error() {
        let m = Mat::zeros(2, 2);
        assert!(solve(&m, &state(&[1.0, 1.0]), "test").is_err());
    }
}
