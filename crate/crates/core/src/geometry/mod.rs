//! Closed-form geometry of `g = ǧ + Σ vₐ² ĝₐ` over a 1- or 2-dimensional base.
//!
//! Everything is computed pointwise from coordinate jets of the base metric and
//! the warping functions, so grid states and analytic states share one code path.

pub mod chart;
pub mod uhlenbeck;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::FiberSpec;

pub use chart::{christoffel_closed, riemann_closed, ChartLayout, ChartPoint};
pub use uhlenbeck::{uhlenbeck, FrameMode, UhlenbeckPoint, UhlenbeckQuantities};

pub type Sym2 = [[f64; 2]; 2];

/// Metric of the base and its first and second coordinate partials.
/// `dg[k][i][j] = ∂ₖgᵢⱼ`, `ddg[k][l][i][j] = ∂ₖ∂ₗgᵢⱼ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct BaseJet {
    pub dim: usize,
    pub g: Sym2,
    pub dg: [Sym2; 2],
    pub ddg: [[Sym2; 2]; 2],
}

impl BaseJet {
    /// Circle with line element `φ² dθ²`.
    pub fn circle(phi: f64, dphi: f64, ddphi: f64) -> Self {
        let mut j = BaseJet { dim: 1, ..Default::default() };
        j.g[0][0] = phi * phi;
        j.dg[0][0][0] = 2.0 * phi * dphi;
        j.ddg[0][0][0][0] = 2.0 * (dphi * dphi + phi * ddphi);
        j
    }

    /// Surface metric from jets of `(g₁₁, g₁₂, g₂₂)`.
    pub fn surface(g11: &ScalarJet, g12: &ScalarJet, g22: &ScalarJet) -> Self {
        let comps = [[g11, g12], [g12, g22]];
        let mut j = BaseJet { dim: 2, ..Default::default() };
        for i in 0..2 {
            for l in 0..2 {
                let c = comps[i][l];
                j.g[i][l] = c.f;
                for k in 0..2 {
                    j.dg[k][i][l] = c.df[k];
                    for m in 0..2 {
                        j.ddg[k][m][i][l] = c.ddf[k][m];
                    }
                }
            }
        }
        j
    }
}

/// Value, coordinate gradient and coordinate second partials of a base scalar.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScalarJet {
    pub f: f64,
    pub df: [f64; 2],
    pub ddf: Sym2,
}

impl ScalarJet {
    /// Jet of `e^w` from the jet of `w`.
    pub fn exp_of(w: &ScalarJet) -> Self {
        let v = w.f.exp();
        let mut out = ScalarJet { f: v, df: [v * w.df[0], v * w.df[1]], ddf: [[0.0; 2]; 2] };
        for i in 0..2 {
            for j in 0..2 {
                out.ddf[i][j] = v * (w.ddf[i][j] + w.df[i] * w.df[j]);
            }
        }
        out
    }
}

/// Inverse metric, Christoffel symbols and scalar curvature at a base point.
#[derive(Clone, Copy, Debug)]
pub struct BasePoint {
    pub dim: usize,
    pub g: Sym2,
    pub ginv: Sym2,
    pub det: f64,
    /// `gamma[k][i][j] = Γ̌ᵏᵢⱼ`
    pub gamma: [[[f64; 2]; 2]; 2],
    pub r_check: f64,
}

impl BasePoint {
    pub fn new(jet: &BaseJet) -> Self {
        let d = jet.dim;
        let mut ginv = [[0.0; 2]; 2];
        let det = if d == 1 {
            ginv[0][0] = 1.0 / jet.g[0][0];
            jet.g[0][0]
        } else {
            let det = jet.g[0][0] * jet.g[1][1] - jet.g[0][1] * jet.g[1][0];
            ginv[0][0] = jet.g[1][1] / det;
            ginv[1][1] = jet.g[0][0] / det;
            ginv[0][1] = -jet.g[0][1] / det;
            ginv[1][0] = ginv[0][1];
            det
        };
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += ginv[k][l] * (jet.dg[i][l][j] + jet.dg[j][l][i] - jet.dg[l][i][j]);
                    }
                    gamma[k][i][j] = 0.5 * s;
                }
            }
        }
        let r_check = if d == 2 {
            let dd = &jet.ddg;
            let mut q = 0.5 * (dd[1][1][0][0] + dd[0][0][1][1] - 2.0 * dd[0][1][0][1]);
            for p in 0..2 {
                for r in 0..2 {
                    q += jet.g[p][r]
                        * (gamma[p][1][1] * gamma[r][0][0] - gamma[p][1][0] * gamma[r][0][1]);
                }
            }
            -2.0 * q / det
        } else {
            0.0
        };
        BasePoint { dim: d, g: jet.g, ginv, det, gamma, r_check }
    }

    pub fn grad_up(&self, s: &ScalarJet) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.ginv[i][j] * s.df[j];
            }
        }
        out
    }

    /// `⟨∇a, ∇b⟩` with respect to ǧ.
    pub fn inner(&self, a: &ScalarJet, b: &ScalarJet) -> f64 {
        let up = self.grad_up(b);
        (0..self.dim).map(|i| a.df[i] * up[i]).sum()
    }

    /// Covariant Hessian `∂ᵢ∂ⱼf − Γ̌ᵏᵢⱼ∂ₖf` in coordinate components.
    pub fn hessian(&self, s: &ScalarJet) -> Sym2 {
        let mut h = [[0.0; 2]; 2];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut x = s.ddf[i][j];
                for k in 0..self.dim {
                    x -= self.gamma[k][i][j] * s.df[k];
                }
                h[i][j] = x;
            }
        }
        h
    }

    /// `g^{ik} g^{jl} Aᵢⱼ Bₖₗ`
    pub fn sym_inner(&self, a: &Sym2, b: &Sym2) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        s += self.ginv[i][k] * self.ginv[j][l] * a[i][j] * b[k][l];
                    }
                }
            }
        }
        s
    }

    pub fn trace(&self, a: &Sym2) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.ginv[i][j] * a[i][j];
            }
        }
        s
    }
}

/// Curvature of the warped product at one base point.
#[derive(Clone, Debug, Serialize)]
pub struct PointBlocks {
    pub dim: usize,
    pub g: Sym2,
    pub ginv: Sym2,
    /// Gauss curvature of the base, `Ř/2` (zero on a 1-D base).
    pub kappa_base: f64,
    pub kappa_fiber_self: Vec<f64>,
    pub kappa_fiber_cross: Vec<Vec<f64>>,
    /// `−∇̌²vₐ/vₐ` in coordinate components.
    pub base_fiber_block: Vec<Sym2>,
    pub ricci_base: Sym2,
    /// `Rc` restricted to fiber a equals this coefficient times `gₐ = vₐ²ĝₐ`.
    pub ricci_fiber_coeff: Vec<f64>,
    pub scalar_r: f64,
    pub riemann_norm_sq: f64,
}

/// Per-point contributions to `|Rm|²`, split by flavor.
#[derive(Clone, Copy, Debug, Default)]
pub struct NormTerms {
    pub base: f64,
    pub base_fiber: f64,
    pub fiber_self: f64,
    pub fiber_cross: f64,
}

impl NormTerms {
    pub fn total(&self) -> f64 {
        self.base + self.base_fiber + self.fiber_self + self.fiber_cross
    }
}

impl PointBlocks {
    fn sym_inner(&self, a: &Sym2, b: &Sym2) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        s += self.ginv[i][k] * self.ginv[j][l] * a[i][j] * b[k][l];
                    }
                }
            }
        }
        s
    }

    /// Terms of `|Rm|²` in which `keep(a, b)` selects the fiber pairs counted
    /// (`b == a` for single-fiber blocks).
    pub fn norm_terms(&self, fibers: &[FiberSpec], keep: impl Fn(usize, usize) -> bool) -> NormTerms {
        let mut t = NormTerms::default();
        if self.dim == 2 && keep(usize::MAX, usize::MAX) {
            let r = 2.0 * self.kappa_base;
            t.base = r * r;
        }
        for (a, fa) in fibers.iter().enumerate() {
            if !keep(a, a) {
                continue;
            }
            let n = fa.nf();
            let bf = &self.base_fiber_block[a];
            t.base_fiber += 4.0 * n * self.sym_inner(bf, bf);
            t.fiber_self += 2.0 * n * (n - 1.0) * self.kappa_fiber_self[a].powi(2);
        }
        for (a, fa) in fibers.iter().enumerate() {
            for (b, fb) in fibers.iter().enumerate() {
                if a != b && keep(a, b) {
                    t.fiber_cross += 2.0 * fa.nf() * fb.nf() * self.kappa_fiber_cross[a][b].powi(2);
                }
            }
        }
        t
    }
}

/// Closed-form curvature at a point from the base point data and warping jets.
pub fn point_blocks(bp: &BasePoint, fibers: &[FiberSpec], v: &[ScalarJet]) -> PointBlocks {
    let na = fibers.len();
    let d = bp.dim;
    let kappa_base = 0.5 * bp.r_check;
    let hess: Vec<Sym2> = v.iter().map(|s| bp.hessian(s)).collect();
    let kappa_fiber_self: Vec<f64> = (0..na)
        .map(|a| (fibers[a].lambda_hat() - bp.inner(&v[a], &v[a])) / (v[a].f * v[a].f))
        .collect();
    let mut kappa_fiber_cross = vec![vec![0.0; na]; na];
    for a in 0..na {
        for b in (a + 1)..na {
            let k = -bp.inner(&v[a], &v[b]) / (v[a].f * v[b].f);
            kappa_fiber_cross[a][b] = k;
            kappa_fiber_cross[b][a] = k;
        }
    }
    let mut base_fiber_block = vec![[[0.0; 2]; 2]; na];
    let mut ricci_base = [[0.0; 2]; 2];
    for i in 0..d {
        for j in 0..d {
            ricci_base[i][j] = kappa_base * bp.g[i][j];
        }
    }
    for a in 0..na {
        for i in 0..d {
            for j in 0..d {
                let b = -hess[a][i][j] / v[a].f;
                base_fiber_block[a][i][j] = b;
                ricci_base[i][j] += fibers[a].nf() * b;
            }
        }
    }
    let ricci_fiber_coeff: Vec<f64> = (0..na)
        .map(|a| {
            let mut c = (fibers[a].nf() - 1.0) * kappa_fiber_self[a] - bp.trace(&hess[a]) / v[a].f;
            for b in 0..na {
                if b != a {
                    c += fibers[b].nf() * kappa_fiber_cross[a][b];
                }
            }
            c
        })
        .collect();
    let scalar_r = bp.trace(&ricci_base)
        + (0..na).map(|a| fibers[a].nf() * ricci_fiber_coeff[a]).sum::<f64>();
    let mut pb = PointBlocks {
        dim: d,
        g: bp.g,
        ginv: bp.ginv,
        kappa_base,
        kappa_fiber_self,
        kappa_fiber_cross,
        base_fiber_block,
        ricci_base,
        ricci_fiber_coeff,
        scalar_r,
        riemann_norm_sq: 0.0,
    };
    pb.riemann_norm_sq = pb.norm_terms(fibers, |_, _| true).total();
    pb
}

/// A discretized warped product state that can produce coordinate jets at its grid nodes.
pub trait WarpedState {
    fn fibers(&self) -> &[FiberSpec];
    fn base_dim(&self) -> usize;
    fn num_points(&self) -> usize;
    fn base_jets(&self) -> Vec<BaseJet>;
    /// Coordinate jets of an arbitrary base scalar on this state's grid.
    fn scalar_jets(&self, f: &[f64]) -> Vec<ScalarJet>;
    fn warping_fields(&self) -> Vec<Vec<f64>>;

    fn warping_jets(&self) -> Result<Vec<Vec<ScalarJet>>> {
        let fields = self.warping_fields();
        for (a, v) in fields.iter().enumerate() {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
                return Err(Error::NonPositiveWarping { fiber: a, index, value });
            }
        }
        Ok(fields.iter().map(|v| self.scalar_jets(v)).collect())
    }

    fn base_points(&self) -> Result<Vec<BasePoint>> {
        self.base_jets()
            .iter()
            .enumerate()
            .map(|(index, j)| {
                let bp = BasePoint::new(j);
                if bp.det > 0.0 {
                    Ok(bp)
                } else {
                    Err(Error::DegenerateMetric { index, det: bp.det })
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureBlocks {
    pub points: Vec<PointBlocks>,
}

impl CurvatureBlocks {
    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| p.riemann_norm_sq.sqrt()).fold(0.0, f64::max)
    }
}

/// Jets of all warpings at node k, transposed from per-fiber storage.
fn jets_at(jets: &[Vec<ScalarJet>], k: usize) -> Vec<ScalarJet> {
    jets.iter().map(|j| j[k]).collect()
}

pub fn curvature_blocks<S: WarpedState + ?Sized>(state: &S) -> Result<CurvatureBlocks> {
    let jets = state.warping_jets()?;
    let bps = state.base_points()?;
    let fibers = state.fibers();
    let points = bps
        .iter()
        .enumerate()
        .map(|(k, bp)| point_blocks(bp, fibers, &jets_at(&jets, k)))
        .collect();
    Ok(CurvatureBlocks { points })
}

#[derive(Clone, Debug, Serialize)]
pub struct RiemannNorms {
    pub total: Vec<f64>,
    /// Terms with at least one index pair on a fiber of the designated subset.
    pub flat: Vec<f64>,
}

pub fn riemann_norm_sq(blocks: &CurvatureBlocks, fibers: &[FiberSpec], flat: &[usize]) -> RiemannNorms {
    let in_flat = |a: usize| flat.contains(&a);
    let total = blocks.points.iter().map(|p| p.norm_terms(fibers, |_, _| true).total()).collect();
    let flat = blocks
        .points
        .iter()
        .map(|p| {
            p.norm_terms(fibers, |a, b| a != usize::MAX && (in_flat(a) || in_flat(b)))
                .total()
        })
        .collect();
    RiemannNorms { total, flat }
}

/// Full Hessian, Laplacian and Hessian norm of a base function lifted to the warped product.
#[derive(Clone, Debug, Serialize)]
pub struct OperatorPoint {
    pub base_hessian: Sym2,
    /// Restriction of `∇²φ` to fiber a is `fiber_coeffs[a] · gₐ`.
    pub fiber_coeffs: Vec<f64>,
    pub laplacian: f64,
    pub tensor_norm_sq: f64,
}

pub fn operators<S: WarpedState + ?Sized>(phi: &[f64], state: &S) -> Result<Vec<OperatorPoint>> {
    if phi.len() != state.num_points() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} points, state has {}",
            phi.len(),
            state.num_points()
        )));
    }
    let jets = state.warping_jets()?;
    let bps = state.base_points()?;
    let pj = state.scalar_jets(phi);
    let fibers = state.fibers();
    Ok(bps
        .iter()
        .enumerate()
        .map(|(k, bp)| {
            let h = bp.hessian(&pj[k]);
            let coeffs: Vec<f64> =
                jets.iter().map(|v| bp.inner(&v[k], &pj[k]) / v[k].f).collect();
            let laplacian = bp.trace(&h)
                + fibers.iter().zip(&coeffs).map(|(f, c)| f.nf() * c).sum::<f64>();
            let tensor_norm_sq = bp.sym_inner(&h, &h)
                + fibers.iter().zip(&coeffs).map(|(f, c)| f.nf() * c * c).sum::<f64>();
            OperatorPoint { base_hessian: h, fiber_coeffs: coeffs, laplacian, tensor_norm_sq }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conformal_jet(x: f64) -> BaseJet {
        // ǧ = e^{2u}δ with u = 0.1 sin x
        let u = 0.1 * x.sin();
        let (du, ddu) = (0.1 * x.cos(), -0.1 * x.sin());
        let e = (2.0 * u).exp();
        let g11 = ScalarJet {
            f: e,
            df: [2.0 * du * e, 0.0],
            ddf: [[(2.0 * ddu + 4.0 * du * du) * e, 0.0], [0.0, 0.0]],
        };
        let g12 = ScalarJet::default();
        BaseJet::surface(&g11, &g12, &g11)
    }

    #[test]
    fn conformal_base_curvature() {
        for &x in &[0.3, 1.0, 2.5, 4.0] {
            let bp = BasePoint::new(&conformal_jet(x));
            let expect = 0.2 * (-0.2 * x.sin()).exp() * x.sin();
            assert!((bp.r_check - expect).abs() < 1e-14, "{} vs {}", bp.r_check, expect);
        }
    }

    #[test]
    fn cylinder_blocks() {
        let bp = BasePoint::new(&BaseJet::circle(1.0, 0.0, 0.0));
        let v = [ScalarJet { f: 1.0, ..Default::default() }];
        let pb = point_blocks(&bp, &[FiberSpec::unit(2)], &v);
        assert_eq!(pb.scalar_r, 2.0);
        assert_eq!(pb.riemann_norm_sq, 4.0);
        assert_eq!(pb.base_fiber_block[0][0][0], 0.0);
    }
}
