//! Brute-force curvature of the warped product in an explicit product chart.
//!
//! The metric is evaluated pointwise from analytic data; Christoffels come from
//! fourth-order central differences of the metric and the Riemann tensor from
//! central differences of those. Nothing here uses the closed-form block structure.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::chart::{chart_metric, christoffel_closed, riemann_closed, ChartLayout, POLE_MARGIN};
use crate::geometry::{point_blocks, BaseJet, BasePoint, ChartPoint, PointBlocks, ScalarJet};
use crate::model::{BaseKind, FiberSpec};

/// `c + Σ aₖ cos(kₓx + k_y y + φₖ)` with exact jets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fourier {
    pub c: f64,
    pub modes: Vec<(f64, [f64; 2], f64)>,
}

impl Fourier {
    pub fn jet(&self, x: [f64; 2]) -> ScalarJet {
        let mut j = ScalarJet { f: self.c, ..Default::default() };
        for (a, k, ph) in &self.modes {
            let arg = k[0] * x[0] + k[1] * x[1] + ph;
            let (s, c) = arg.sin_cos();
            j.f += a * c;
            for i in 0..2 {
                j.df[i] -= a * k[i] * s;
                for l in 0..2 {
                    j.ddf[i][l] -= a * k[i] * k[l] * c;
                }
            }
        }
        j
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.modes.iter().fold(self.c, |acc, (a, k, ph)| acc + a * (k[0] * x[0] + k[1] * x[1] + ph).cos())
    }

    /// Random low-frequency series with `Σ|aₖ| ≤ amp`.
    pub fn random(rng: &mut impl Rng, dim: usize, c: f64, amp: f64, modes: usize) -> Self {
        let weights: Vec<f64> = (0..modes).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let modes = weights
            .iter()
            .map(|w| {
                let mut k = [rng.gen_range(1..=3) as f64, 0.0];
                if dim == 2 {
                    k[1] = rng.gen_range(-2..=2) as f64;
                }
                (amp * w / total, k, rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        Fourier { c, modes }
    }
}

/// Analytic warped product data: `ǧ` and `vₐ = exp(Fₐ)` given by Fourier series on the base.
#[derive(Clone, Debug, Serialize)]
pub struct AnalyticState {
    pub base: BaseKind,
    pub fibers: Vec<FiberSpec>,
    /// `log φ` on S¹; `(log g₁₁, g₁₂, log g₂₂)` on T².
    pub metric: Vec<Fourier>,
    pub log_v: Vec<Fourier>,
}

impl AnalyticState {
    pub fn random(base: BaseKind, fibers: Vec<FiberSpec>, rng: &mut impl Rng) -> Self {
        let d = base.dim();
        let metric = match base {
            BaseKind::CircleS1 => vec![Fourier::random(rng, 1, 0.0, 0.3, 3)],
            BaseKind::TorusT2 => vec![
                Fourier::random(rng, 2, 0.0, 0.3, 3),
                Fourier::random(rng, 2, 0.0, 0.3, 3),
                Fourier::random(rng, 2, 0.0, 0.3, 3),
            ],
        };
        let log_v = fibers
            .iter()
            .map(|_| {
                let c = rng.gen_range(-0.3..0.3);
                Fourier::random(rng, d, c, 0.4, 3)
            })
            .collect();
        AnalyticState { base, fibers, metric, log_v }
    }

    fn base_x(&self, coords: &[f64]) -> [f64; 2] {
        [coords[0], if coords.len() > 1 { coords[1] } else { 0.0 }]
    }

    pub fn base_jet(&self, coords: &[f64]) -> BaseJet {
        let x = self.base_x(coords);
        match self.base {
            BaseKind::CircleS1 => {
                let p = ScalarJet::exp_of(&self.metric[0].jet(x));
                BaseJet::circle(p.f, p.df[0], p.ddf[0][0])
            }
            BaseKind::TorusT2 => {
                let g11 = ScalarJet::exp_of(&self.metric[0].jet(x));
                let g12 = self.metric[1].jet(x);
                let g22 = ScalarJet::exp_of(&self.metric[2].jet(x));
                BaseJet::surface(&g11, &g12, &g22)
            }
        }
    }

    pub fn base_metric(&self, coords: &[f64]) -> [[f64; 2]; 2] {
        let x = self.base_x(coords);
        match self.base {
            BaseKind::CircleS1 => [[(2.0 * self.metric[0].value(x)).exp(), 0.0], [0.0, 0.0]],
            BaseKind::TorusT2 => {
                let off = self.metric[1].value(x);
                [[self.metric[0].value(x).exp(), off], [off, self.metric[2].value(x).exp()]]
            }
        }
    }

    pub fn warping_jets(&self, coords: &[f64]) -> Vec<ScalarJet> {
        let x = self.base_x(coords);
        self.log_v.iter().map(|f| ScalarJet::exp_of(&f.jet(x))).collect()
    }

    pub fn warpings(&self, coords: &[f64]) -> Vec<f64> {
        let x = self.base_x(coords);
        self.log_v.iter().map(|f| f.value(x).exp()).collect()
    }

    /// Product-chart metric at chart coordinates `x = (base, ψ₁, ψ₂, …)`.
    pub fn metric_at(&self, x: &[f64]) -> Vec<f64> {
        let d = self.base.dim();
        let p = self.split(x);
        chart_metric(&self.fibers, &self.base_metric(&x[..d]), &self.warpings(&x[..d]), &p)
    }

    fn split(&self, x: &[f64]) -> ChartPoint {
        let d = self.base.dim();
        let lay = ChartLayout::new(d, &self.fibers);
        ChartPoint {
            base_coords: x[..d].to_vec(),
            fiber_coords: self.fibers.iter().enumerate().map(|(a, f)| x[lay.offsets[a]..lay.offsets[a] + f.n].to_vec()).collect(),
        }
    }

    pub fn flatten(p: &ChartPoint) -> Vec<f64> {
        let mut x = p.base_coords.clone();
        for f in &p.fiber_coords {
            x.extend_from_slice(f);
        }
        x
    }

    pub fn point_blocks(&self, coords: &[f64]) -> PointBlocks {
        let bp = BasePoint::new(&self.base_jet(coords));
        point_blocks(&bp, &self.fibers, &self.warping_jets(coords))
    }

    pub fn random_point(&self, rng: &mut impl Rng) -> ChartPoint {
        let d = self.base.dim();
        let lo = POLE_MARGIN + 0.05;
        ChartPoint {
            base_coords: (0..d).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
            fiber_coords: self
                .fibers
                .iter()
                .map(|f| {
                    let mut psi: Vec<f64> = (0..f.n - 1).map(|_| rng.gen_range(lo..PI - lo)).collect();
                    psi.push(rng.gen_range(0.0..2.0 * PI));
                    psi
                })
                .collect(),
        }
    }
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-4..=1e-2).contains(&h) {
        return Err(Error::InvalidInput(format!("step {h:e} outside [1e-4, 1e-2]")));
    }
    Ok(())
}

/// Fourth-order central difference of a vector-valued function along coordinate `dir`.
fn central<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], dir: usize, h: f64) -> Vec<f64> {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[dir] += s * h;
        f(&y)
    };
    let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
    (0..m1.len()).map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h)).collect()
}

fn inverse(g: &[f64], n: usize) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, g);
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMetric { index: 0, det: DMatrix::from_row_slice(n, n, g).determinant() })?;
    Ok((0..n * n).map(|k| inv[(k / n, k % n)]).collect())
}

/// `Γᵏᵢⱼ` flattened `[k][i][j]` from differences of the metric.
fn christoffel_from_metric<F: Fn(&[f64]) -> Vec<f64>>(metric: &F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let g = metric(x);
    let ginv = inverse(&g, n)?;
    let dg: Vec<Vec<f64>> = (0..n).map(|l| central(metric, x, l, h)).collect();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let gi = ginv[k * n + l];
                    if gi != 0.0 {
                        s += gi * (dg[i][j * n + l] + dg[j][i * n + l] - dg[l][i * n + j]);
                    }
                }
                out[(k * n + i) * n + j] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

/// Roundoff amplification of the nested second difference.
fn cancellation(state: &AnalyticState, x: &[f64], h: f64) -> f64 {
    let gmax = state.metric_at(x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    f64::EPSILON * gmax / (h * h)
}

pub fn christoffel_fd(state: &AnalyticState, p: &ChartPoint, h: f64) -> Result<Vec<f64>> {
    check_step(h)?;
    p.validate(state.base.dim(), &state.fibers)?;
    christoffel_from_metric(&|y: &[f64]| state.metric_at(y), &AnalyticState::flatten(p), h)
}

/// Riemann tensor from differences, with its raw symmetry and Bianchi defects.
#[derive(Clone, Debug, Serialize)]
pub struct RiemannFd {
    pub n: usize,
    /// `R_{IJKL} = ⟨R(∂_I,∂_J)∂_K,∂_L⟩`, symmetrized.
    pub r: Vec<f64>,
    /// Largest deviation of the raw tensor from its symmetrization.
    pub asymmetry: f64,
    /// `max |R_{IJKL} + R_{JKIL} + R_{KIJL}|` of the symmetrized tensor.
    pub bianchi_defect: f64,
}

impl RiemannFd {
    pub fn at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.r[((i * n + j) * n + k) * n + l]
    }
}

pub fn riemann_fd(state: &AnalyticState, p: &ChartPoint, h: f64) -> Result<RiemannFd> {
    check_step(h)?;
    p.validate(state.base.dim(), &state.fibers)?;
    let x = AnalyticState::flatten(p);
    let c = cancellation(state, &x, h);
    if c > 1e-8 {
        return Err(Error::StepTooSmall { h, cancellation: c });
    }
    let n = x.len();
    let metric = |y: &[f64]| state.metric_at(y);
    let gamma_at = |y: &[f64]| christoffel_from_metric(&metric, y, h).unwrap_or_else(|_| vec![f64::NAN; n * n * n]);
    let gam = gamma_at(&x);
    let dgam: Vec<Vec<f64>> = (0..n).map(|d| central(&gamma_at, &x, d, h)).collect();
    let g = metric(&x);
    let ga = |l: usize, i: usize, j: usize| gam[(l * n + i) * n + j];
    let mut rup = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = dgam[i][(l * n + j) * n + k] - dgam[j][(l * n + i) * n + k];
                    for m in 0..n {
                        s += ga(l, i, m) * ga(m, j, k) - ga(l, j, m) * ga(m, i, k);
                    }
                    rup[((l * n + i) * n + j) * n + k] = s;
                }
            }
        }
    }
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut raw = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    raw[idx(i, j, k, l)] = (0..n).map(|m| g[l * n + m] * rup[((m * n + i) * n + j) * n + k]).sum();
                }
            }
        }
    }
    let mut r = vec![0.0; raw.len()];
    let mut asymmetry = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let s = 0.125
                        * (raw[idx(i, j, k, l)] - raw[idx(j, i, k, l)] - raw[idx(i, j, l, k)] + raw[idx(j, i, l, k)]
                            + raw[idx(k, l, i, j)]
                            - raw[idx(l, k, i, j)]
                            - raw[idx(k, l, j, i)]
                            + raw[idx(l, k, j, i)]);
                    asymmetry = asymmetry.max((s - raw[idx(i, j, k, l)]).abs());
                    r[idx(i, j, k, l)] = s;
                }
            }
        }
    }
    let mut bianchi_defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let b = r[idx(i, j, k, l)] + r[idx(j, k, i, l)] + r[idx(k, i, j, l)];
                    bianchi_defect = bianchi_defect.max(b.abs());
                }
            }
        }
    }
    Ok(RiemannFd { n, r, asymmetry, bianchi_defect })
}

/// Index-pattern class of a Riemann component in the product chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Flavor {
    BaseBase,
    FiberSelf,
    FiberCross,
    BaseFiber,
    /// Every other pattern; zero for a warped product.
    Other,
}

pub const FLAVORS: [Flavor; 5] = [Flavor::BaseBase, Flavor::FiberSelf, Flavor::FiberCross, Flavor::BaseFiber, Flavor::Other];

pub fn flavor(lay: &ChartLayout, idx: [usize; 4]) -> Flavor {
    let owners: Vec<Option<usize>> = idx.iter().map(|&i| lay.owner(i)).collect();
    let nbase = owners.iter().filter(|o| o.is_none()).count();
    let mut fibers: Vec<usize> = owners.iter().flatten().copied().collect();
    fibers.sort_unstable();
    match nbase {
        4 => Flavor::BaseBase,
        0 if fibers[0] == fibers[3] => Flavor::FiberSelf,
        0 if fibers[0] == fibers[1] && fibers[2] == fibers[3] => Flavor::FiberCross,
        2 if fibers[0] == fibers[1] => Flavor::BaseFiber,
        _ => Flavor::Other,
    }
}

/// Per-flavor errors relative to the largest closed-form component.
#[derive(Clone, Debug, Serialize)]
pub struct BlockComparison {
    pub max_rel_error: Vec<(Flavor, f64)>,
    pub christoffel_rel_error: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl BlockComparison {
    pub fn error(&self, f: Flavor) -> f64 {
        self.max_rel_error.iter().find(|(g, _)| *g == f).map_or(0.0, |e| e.1)
    }

    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().map(|e| e.1).chain(self.christoffel_rel_error).fold(0.0, f64::max)
    }

    pub fn failing(&self) -> Vec<Flavor> {
        self.max_rel_error.iter().filter(|e| e.1 > self.tolerance).map(|e| e.0).collect()
    }
}

/// Compares a closed-form Riemann array with the difference oracle, component by component.
pub fn compare_arrays(lay: &ChartLayout, closed: &[f64], fd: &[f64], tol: f64) -> BlockComparison {
    let n = lay.n;
    let scale = closed.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut errs = [0.0f64; 5];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let c = ((i * n + j) * n + k) * n + l;
                    let f = flavor(lay, [i, j, k, l]);
                    let slot = FLAVORS.iter().position(|g| *g == f).unwrap();
                    errs[slot] = errs[slot].max((closed[c] - fd[c]).abs() / scale);
                }
            }
        }
    }
    let max_rel_error: Vec<(Flavor, f64)> = FLAVORS.iter().copied().zip(errs).collect();
    let pass = errs.iter().all(|e| *e <= tol);
    BlockComparison { max_rel_error, christoffel_rel_error: None, tolerance: tol, pass }
}

/// Closed form against the oracle at one chart point, including the connection.
pub fn compare_blocks(state: &AnalyticState, p: &ChartPoint, h: f64, tol: f64) -> Result<BlockComparison> {
    let d = state.base.dim();
    let lay = ChartLayout::new(d, &state.fibers);
    let pb = state.point_blocks(&p.base_coords);
    let vj = state.warping_jets(&p.base_coords);
    let closed = riemann_closed(&state.fibers, &pb, &vj, p)?;
    let fd = riemann_fd(state, p, h)?;
    let mut cmp = compare_arrays(&lay, &closed, &fd.r, tol);
    let bp = BasePoint::new(&state.base_jet(&p.base_coords));
    let gc = christoffel_closed(&state.fibers, &bp, &vj, p)?;
    let gf = christoffel_fd(state, p, h)?;
    let gscale = gc.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let ce = gc.iter().zip(&gf).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / gscale;
    cmp.christoffel_rel_error = Some(ce);
    cmp.pass &= ce <= tol;
    Ok(cmp)
}

/// `|Rm|²` by full contraction of a chart Riemann array with the inverse metric.
pub fn frame_norm_sq(r: &[f64], g: &[f64], n: usize) -> Result<f64> {
    let gi = inverse(g, n)?;
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    // raise one index at a time
    let mut cur = r.to_vec();
    for slot in 0..4 {
        let mut next = vec![0.0; cur.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            let (a, src) = match slot {
                                0 => (gi[i * n + m], idx(m, j, k, l)),
                                1 => (gi[j * n + m], idx(i, m, k, l)),
                                2 => (gi[k * n + m], idx(i, j, m, l)),
                                _ => (gi[l * n + m], idx(i, j, k, m)),
                            };
                            if a != 0.0 {
                                s += a * cur[src];
                            }
                        }
                        next[idx(i, j, k, l)] = s;
                    }
                }
            }
        }
        cur = next;
    }
    Ok(cur.iter().zip(r).map(|(a, b)| a * b).sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSample {
    pub index: usize,
    pub point: ChartPoint,
    pub comparison: BlockComparison,
    /// Relative mismatch of `|Rm|²` between the block formula and the oracle's full contraction.
    pub norm_rel_error: f64,
    pub asymmetry: f64,
    pub bianchi_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub h: f64,
    pub tolerance: f64,
    pub samples: Vec<SweepSample>,
    pub worst: f64,
    pub pass: bool,
}

/// Random states and points, one independent ChaCha stream per sample.
pub fn oracle_sweep(
    base: BaseKind,
    fibers: &[FiberSpec],
    count: usize,
    seed: u64,
    h: f64,
    tol: f64,
) -> Result<SweepReport> {
    let samples = (0..count)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let state = AnalyticState::random(base, fibers.to_vec(), &mut rng);
            let point = state.random_point(&mut rng);
            let comparison = compare_blocks(&state, &point, h, tol)?;
            let fd = riemann_fd(&state, &point, h)?;
            let g = state.metric_at(&AnalyticState::flatten(&point));
            let norm_fd = frame_norm_sq(&fd.r, &g, fd.n)?;
            let norm_closed = state.point_blocks(&point.base_coords).riemann_norm_sq;
            let norm_rel_error = (norm_fd - norm_closed).abs() / norm_closed.abs().max(f64::MIN_POSITIVE);
            Ok(SweepSample {
                index,
                point,
                comparison,
                norm_rel_error,
                asymmetry: fd.asymmetry,
                bianchi_defect: fd.bianchi_defect,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = samples
        .iter()
        .map(|s| s.comparison.worst().max(s.norm_rel_error))
        .fold(0.0, f64::max);
    Ok(SweepReport { seed, h, tolerance: tol, pass: worst <= tol, worst, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_jet_matches_values() {
        let f = Fourier { c: 0.1, modes: vec![(0.3, [2.0, -1.0], 0.4)] };
        let x = [0.7, 1.3];
        let h = 1e-5;
        let j = f.jet(x);
        let dx = (f.value([x[0] + h, x[1]]) - f.value([x[0] - h, x[1]])) / (2.0 * h);
        assert!((j.df[0] - dx).abs() < 1e-9);
        assert!((j.f - f.value(x)).abs() < 1e-15);
    }

    #[test]
    fn step_range_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = AnalyticState::random(BaseKind::CircleS1, vec![FiberSpec::unit(2)], &mut rng);
        let p = s.random_point(&mut rng);
        assert!(matches!(riemann_fd(&s, &p, 0.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn flavor_classes() {
        let lay = ChartLayout::new(1, &[FiberSpec::unit(2), FiberSpec::unit(3)]);
        assert_eq!(flavor(&lay, [0, 0, 0, 0]), Flavor::BaseBase);
        assert_eq!(flavor(&lay, [1, 2, 2, 1]), Flavor::FiberSelf);
        assert_eq!(flavor(&lay, [1, 3, 3, 1]), Flavor::FiberCross);
        assert_eq!(flavor(&lay, [0, 1, 1, 0]), Flavor::BaseFiber);
        assert_eq!(flavor(&lay, [0, 1, 3, 0]), Flavor::Other);
    }
}
