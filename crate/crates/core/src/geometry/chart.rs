//! Product chart: base coordinates followed by hyperspherical coordinates on each fiber.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{BasePoint, PointBlocks, ScalarJet};
use crate::error::{Error, Result};
use crate::model::FiberSpec;

/// Polar angles must stay this far from the poles.
pub const POLE_MARGIN: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub base_coords: Vec<f64>,
    /// `ψ₁..ψ_{n−1}` polar, `ψₙ` azimuthal.
    pub fiber_coords: Vec<Vec<f64>>,
}

impl ChartPoint {
    pub fn validate(&self, base_dim: usize, fibers: &[FiberSpec]) -> Result<()> {
        if self.base_coords.len() != base_dim || self.fiber_coords.len() != fibers.len() {
            return Err(Error::DimensionMismatch("chart point does not match the product".into()));
        }
        for (psi, f) in self.fiber_coords.iter().zip(fibers) {
            if psi.len() != f.n {
                return Err(Error::DimensionMismatch(format!(
                    "fiber S^{} needs {} angles, got {}",
                    f.n,
                    f.n,
                    psi.len()
                )));
            }
            if !(f.lambda_hat() > 0.0) {
                return Err(Error::InvalidInput("the sphere chart needs λ̂ > 0".into()));
            }
            for &angle in &psi[..f.n - 1] {
                if !(POLE_MARGIN..=PI - POLE_MARGIN).contains(&angle) {
                    return Err(Error::ChartSingularity { angle, lo: POLE_MARGIN, hi: PI - POLE_MARGIN });
                }
            }
        }
        Ok(())
    }
}

/// Index offsets of each factor in the product chart.
#[derive(Clone, Debug)]
pub struct ChartLayout {
    pub base_dim: usize,
    pub offsets: Vec<usize>,
    pub n: usize,
}

impl ChartLayout {
    pub fn new(base_dim: usize, fibers: &[FiberSpec]) -> Self {
        let mut offsets = Vec::with_capacity(fibers.len());
        let mut o = base_dim;
        for f in fibers {
            offsets.push(o);
            o += f.n;
        }
        ChartLayout { base_dim, offsets, n: o }
    }

    /// Fiber owning chart index `i`, or `None` for base indices.
    pub fn owner(&self, i: usize) -> Option<usize> {
        if i < self.base_dim {
            return None;
        }
        self.offsets.iter().rposition(|&o| o <= i)
    }
}

/// Diagonal of the round metric of curvature `λ̂` in hyperspherical coordinates:
/// `ĝₖₖ = λ̂⁻¹ Π_{j<k} sin²ψⱼ`.
pub fn sphere_diag(psi: &[f64], lambda_hat: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(psi.len());
    let mut prod = 1.0 / lambda_hat;
    for (k, _) in psi.iter().enumerate() {
        out.push(prod);
        prod *= psi[k].sin().powi(2);
    }
    out
}

/// `Γ̂ᵏᵢⱼ` of the hyperspherical chart (scale invariant), flattened `[k][i][j]`.
pub fn sphere_christoffel(psi: &[f64]) -> Vec<f64> {
    let n = psi.len();
    let g = sphere_diag(psi, 1.0);
    let mut out = vec![0.0; n * n * n];
    let at = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
    for k in 0..n {
        for j in 0..k {
            let c = psi[j].cos() / psi[j].sin();
            out[at(k, k, j)] = c;
            out[at(k, j, k)] = c;
        }
        for j in (k + 1)..n {
            let c = psi[k].cos() / psi[k].sin();
            out[at(k, j, j)] = -c * g[j] / g[k];
        }
    }
    out
}

/// Levi-Civita connection of the warped product in the product chart, flattened `[k][i][j]`.
pub fn christoffel_closed(
    fibers: &[FiberSpec],
    bp: &BasePoint,
    v: &[ScalarJet],
    p: &ChartPoint,
) -> Result<Vec<f64>> {
    p.validate(bp.dim, fibers)?;
    let lay = ChartLayout::new(bp.dim, fibers);
    let n = lay.n;
    let at = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
    let mut out = vec![0.0; n * n * n];
    let d = bp.dim;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                out[at(k, i, j)] = bp.gamma[k][i][j];
            }
        }
    }
    for (a, f) in fibers.iter().enumerate() {
        let o = lay.offsets[a];
        let psi = &p.fiber_coords[a];
        let ghat = sphere_diag(psi, f.lambda_hat());
        let up = bp.grad_up(&v[a]);
        let va = v[a].f;
        for al in 0..f.n {
            let gaa = va * va * ghat[al];
            for k in 0..d {
                out[at(k, o + al, o + al)] = -up[k] / va * gaa;
                let c = v[a].df[k] / va;
                out[at(o + al, k, o + al)] = c;
                out[at(o + al, o + al, k)] = c;
            }
        }
        let gh = sphere_christoffel(psi);
        let m = f.n;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    out[at(o + k, o + i, o + j)] = gh[(k * m + i) * m + j];
                }
            }
        }
    }
    Ok(out)
}

/// Chart metric at a point as a dense `N×N` matrix.
pub fn chart_metric(fibers: &[FiberSpec], g_base: &[[f64; 2]; 2], v: &[f64], p: &ChartPoint) -> Vec<f64> {
    let d = p.base_coords.len();
    let lay = ChartLayout::new(d, fibers);
    let n = lay.n;
    let mut m = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            m[i * n + j] = g_base[i][j];
        }
    }
    for (a, f) in fibers.iter().enumerate() {
        let o = lay.offsets[a];
        for (k, gk) in sphere_diag(&p.fiber_coords[a], f.lambda_hat()).iter().enumerate() {
            m[(o + k) * n + o + k] = v[a] * v[a] * gk;
        }
    }
    m
}

/// `(A ○∧ B)_{ijkl} = A_il B_jk + A_jk B_il − A_ik B_jl − A_jl B_ik`, accumulated with weight `w`.
fn add_kn(r: &mut [f64], n: usize, w: f64, a: &[f64], b: &[f64]) {
    if w == 0.0 {
        return;
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let x = a[i * n + l] * b[j * n + k] + a[j * n + k] * b[i * n + l]
                        - a[i * n + k] * b[j * n + l]
                        - a[j * n + l] * b[i * n + k];
                    r[((i * n + j) * n + k) * n + l] += w * x;
                }
            }
        }
    }
}

/// Full `R_{IJKL} = ⟨R(∂_I,∂_J)∂_K,∂_L⟩` in the product chart assembled from the closed-form blocks.
pub fn riemann_closed(
    fibers: &[FiberSpec],
    pb: &PointBlocks,
    v: &[ScalarJet],
    p: &ChartPoint,
) -> Result<Vec<f64>> {
    let d = pb.dim;
    p.validate(d, fibers)?;
    let lay = ChartLayout::new(d, fibers);
    let n = lay.n;
    let mut gb = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            gb[i * n + j] = pb.g[i][j];
        }
    }
    let mut ga = Vec::with_capacity(fibers.len());
    let mut ba = Vec::with_capacity(fibers.len());
    for (a, f) in fibers.iter().enumerate() {
        let o = lay.offsets[a];
        let mut m = vec![0.0; n * n];
        for (k, gk) in sphere_diag(&p.fiber_coords[a], f.lambda_hat()).iter().enumerate() {
            m[(o + k) * n + o + k] = v[a].f * v[a].f * gk;
        }
        ga.push(m);
        let mut b = vec![0.0; n * n];
        for i in 0..d {
            for j in 0..d {
                b[i * n + j] = pb.base_fiber_block[a][i][j];
            }
        }
        ba.push(b);
    }
    let mut r = vec![0.0; n * n * n * n];
    add_kn(&mut r, n, 0.5 * pb.kappa_base, &gb, &gb);
    for a in 0..fibers.len() {
        add_kn(&mut r, n, 0.5 * pb.kappa_fiber_self[a], &ga[a], &ga[a]);
        add_kn(&mut r, n, 1.0, &ba[a], &ga[a]);
        for b in (a + 1)..fibers.len() {
            add_kn(&mut r, n, pb.kappa_fiber_cross[a][b], &ga[a], &ga[b]);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_owner() {
        let lay = ChartLayout::new(1, &[FiberSpec::unit(2), FiberSpec::unit(3)]);
        assert_eq!(lay.n, 6);
        assert_eq!(lay.owner(0), None);
        assert_eq!(lay.owner(2), Some(0));
        assert_eq!(lay.owner(3), Some(1));
        assert_eq!(lay.owner(5), Some(1));
    }

    #[test]
    fn pole_rejected() {
        let p = ChartPoint { base_coords: vec![0.0], fiber_coords: vec![vec![0.1, 1.0]] };
        assert!(matches!(
            p.validate(1, &[FiberSpec::unit(2)]),
            Err(Error::ChartSingularity { .. })
        ));
    }

    #[test]
    fn s2_christoffels() {
        let psi = [1.1, 0.4];
        let g = sphere_christoffel(&psi);
        // Γ^θ_φφ = −sin θ cos θ, Γ^φ_θφ = cot θ
        assert!((g[(0 * 2 + 1) * 2 + 1] + psi[0].sin() * psi[0].cos()).abs() < 1e-15);
        assert!((g[(1 * 2 + 0) * 2 + 1] - psi[0].cos() / psi[0].sin()).abs() < 1e-15);
    }
}
