//! Curvature operator of a 4-D warped product `B² × S²` in the frames β and α.

use nalgebra::Matrix6;

use super::{BasePoint, ScalarJet, WarpedState};
use crate::error::{Error, Result};

/// How `(e₁, e₂)` is chosen on the base.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameMode {
    /// Eigenframe of `∇̌²v`, so `λ₅ = 0`. Falls back to `Chart` at degenerate points.
    Eigen,
    /// Gram–Schmidt of `(∂ₓ, ∂ᵧ)`.
    Chart,
}

#[derive(Clone, Debug)]
pub struct UhlenbeckPoint {
    pub lambda: [f64; 5],
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub h: f64,
    /// `√h/Ř`, only where `Ř > 0`.
    pub g: Option<f64>,
    /// `2b₁ + 2a₂ − 2Ř − a₂²/Ř`, only where `Ř ≠ 0`.
    pub p_sign: Option<f64>,
    pub m_beta: Matrix6<f64>,
    pub m_alpha: Matrix6<f64>,
}

#[derive(Clone, Debug)]
pub struct UhlenbeckQuantities {
    pub mode: FrameMode,
    pub points: Vec<UhlenbeckPoint>,
}

/// The orthogonal change of basis from β to the self-dual/anti-self-dual basis α.
pub fn hodge_basis_change() -> Matrix6<f64> {
    #[rustfmt::skip]
    let a = Matrix6::new(
        1.0,  0.0, 0.0,  1.0, 0.0,  0.0,
        0.0,  1.0, 0.0,  0.0, 1.0,  0.0,
        0.0,  0.0, 1.0,  0.0, 0.0,  1.0,
        0.0,  0.0, 1.0,  0.0, 0.0, -1.0,
        0.0, -1.0, 0.0,  0.0, 1.0,  0.0,
        1.0,  0.0, 0.0, -1.0, 0.0,  0.0,
    );
    a / 2f64.sqrt()
}

pub fn m_beta(l: &[f64; 5]) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m[(0, 0)] = 2.0 * l[0];
    m[(1, 1)] = 2.0 * l[2];
    m[(2, 2)] = 2.0 * l[2];
    m[(3, 3)] = 2.0 * l[3];
    m[(4, 4)] = 2.0 * l[3];
    m[(5, 5)] = 2.0 * l[1];
    m[(1, 3)] = l[4];
    m[(3, 1)] = l[4];
    m[(2, 4)] = l[4];
    m[(4, 2)] = l[4];
    m
}

/// `M_α` assembled from its blocks `A = C = diag(a₁,a₂,a₂)` and `B`.
pub fn m_alpha_from_blocks(a1: f64, a2: f64, b1: f64, b2: f64, l5: f64) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    for (i, d) in [a1, a2, a2].iter().enumerate() {
        m[(i, i)] = *d;
        m[(i + 3, i + 3)] = *d;
    }
    let b = [[b1, 0.0, 0.0], [0.0, b2, -l5], [0.0, l5, b2]];
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j + 3)] = b[i][j];
            m[(j + 3, i)] = b[i][j];
        }
    }
    m
}

/// Components of a symmetric base tensor in the ǧ-orthonormal frame from Gram–Schmidt of the chart.
fn chart_frame(bp: &BasePoint, h: &[[f64; 2]; 2]) -> [f64; 3] {
    let g = &bp.g;
    let s1 = g[0][0].sqrt();
    // e₁ = ∂ₓ/√g₁₁, e₂ = (∂ᵧ − (g₁₂/g₁₁)∂ₓ)/√(det/g₁₁)
    let e1 = [1.0 / s1, 0.0];
    let s2 = (bp.det / g[0][0]).sqrt();
    let e2 = [-g[0][1] / g[0][0] / s2, 1.0 / s2];
    let q = |x: &[f64; 2], y: &[f64; 2]| {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += h[i][j] * x[i] * y[j];
            }
        }
        s
    };
    [q(&e1, &e1), q(&e1, &e2), q(&e2, &e2)]
}

pub fn uhlenbeck_point(bp: &BasePoint, lambda_hat: f64, v: &ScalarJet, mode: FrameMode) -> UhlenbeckPoint {
    let hess = bp.hessian(v);
    let [p, q, r] = chart_frame(bp, &hess);
    let (h11, h22, h12) = match mode {
        FrameMode::Chart => (p, r, q),
        FrameMode::Eigen => {
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            if rad <= 1e-12 * (p.abs() + r.abs() + q.abs() + f64::MIN_POSITIVE) {
                (p, r, q)
            } else {
                (mean + rad, mean - rad, 0.0)
            }
        }
    };
    let vv = v.f;
    let r_check = bp.r_check;
    let lambda = [
        r_check,
        (lambda_hat - bp.inner(v, v)) / (vv * vv),
        -h11 / vv,
        -h22 / vv,
        -2.0 * h12 / vv,
    ];
    let a1 = lambda[0] + lambda[1];
    let a2 = lambda[2] + lambda[3];
    let b1 = lambda[0] - lambda[1];
    let b2 = lambda[2] - lambda[3];
    let h = b2 * b2 + lambda[4] * lambda[4];
    let g = (r_check > 0.0).then(|| h.sqrt() / r_check);
    let p_sign = (r_check != 0.0).then(|| 2.0 * b1 + 2.0 * a2 - 2.0 * r_check - a2 * a2 / r_check);
    let mb = m_beta(&lambda);
    let a = hodge_basis_change();
    let m_alpha = a.transpose() * mb * a;
    UhlenbeckPoint { lambda, a1, a2, b1, b2, h, g, p_sign, m_beta: mb, m_alpha }
}

pub fn uhlenbeck<S: WarpedState + ?Sized>(state: &S, mode: FrameMode) -> Result<UhlenbeckQuantities> {
    let fibers = state.fibers();
    if state.base_dim() != 2 || fibers.len() != 1 || fibers[0].n != 2 {
        return Err(Error::DimensionMismatch(
            "Uhlenbeck quantities need a 2-D base with a single S² fiber".into(),
        ));
    }
    let jets = state.warping_jets()?;
    let bps = state.base_points()?;
    let lh = fibers[0].lambda_hat();
    let points = bps
        .iter()
        .zip(&jets[0])
        .map(|(bp, v)| uhlenbeck_point(bp, lh, v, mode))
        .collect();
    Ok(UhlenbeckQuantities { mode, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_change_is_orthogonal() {
        let a = hodge_basis_change();
        let e = (a.transpose() * a - Matrix6::identity()).abs().max();
        assert!(e < 1e-15);
    }

    #[test]
    fn conjugation_matches_blocks() {
        let l = [0.3, -0.7, 1.1, 0.25, -0.4];
        let a = hodge_basis_change();
        let ma = a.transpose() * m_beta(&l) * a;
        let mb = m_alpha_from_blocks(l[0] + l[1], l[2] + l[3], l[0] - l[1], l[2] - l[3], l[4]);
        assert!((ma - mb).abs().max() < 1e-14);
    }
}
