//! Rotationally symmetric gradient shrinkers on ℝ² × S²: `dr² + ρ(r)²dθ² + v(r)² g_{S²}`
//! with potential `f(r)`, integrated outward from the axis.
//!
//! With `F = f′` and `k = ρ′/ρ` the soliton equations reduce to
//!
//! ```text
//! Ř   = 1 + 2k(2v′/v − F)
//! ρ″  = −Řρ/2
//! v″  = −k v′ + F v′ + v((1 − v′²)/v² − ½)
//! F′  = 2v″/v − (Ř − 1)/2
//! ```
//!
//! The state is stored as deviations from the cylinder `ρ = r, v = √2, F = r/2`, so the
//! cylinder shot is reproduced exactly.

use std::f64::consts::SQRT_2;

use ode_solvers::{Dop853, OutputType, SVector, System};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

// [P, P′, δ, δ′, G, H, r]; r rides along so the system is autonomous
type State = SVector<f64, 7>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    Cylinder,
    Incomplete,
    IdentityViolated,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShotOptions {
    /// `f″(0)`
    pub f1: f64,
    /// End of the axis Taylor segment.
    pub r0: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Largest step, and so the coarsest spacing of the output grid.
    pub dr: f64,
    /// A completed shot whose identity residuals exceed this is `IdentityViolated`.
    pub identity_tol: f64,
    /// Any state component beyond this magnitude stops the shot.
    pub blowup: f64,
}

impl Default for ShotOptions {
    fn default() -> Self {
        ShotOptions { f1: 0.5, r0: 1e-3, rtol: 1e-10, atol: 1e-12, dr: 0.01, identity_tol: 1e-6, blowup: 1e6 }
    }
}

/// Maxima over the shot of the identity residuals.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct IdentityResiduals {
    /// `|a₂ + λ₂ − ½|`
    pub a2_plus_lambda2: f64,
    /// `|a₂ b₁|`
    pub a2_b1: f64,
    /// `|f′ v′|`
    pub f_v: f64,
    /// `||Å|² − (v/2)²|B̊|²|`
    pub nicer: f64,
    /// rr- and θθ-components of the base tensor equation.
    pub bt_rr: f64,
    pub bt_tt: f64,
    /// Contractions of the base tensor equation with `∇̌²v` and `∇̌²f`.
    pub id1: f64,
    pub id2: f64,
}

impl IdentityResiduals {
    /// The three pointwise identities a complete shrinker satisfies.
    pub fn lemma_max(&self) -> f64 {
        self.a2_plus_lambda2.max(self.a2_b1).max(self.f_v)
    }

    pub fn max(&self) -> f64 {
        [self.a2_plus_lambda2, self.a2_b1, self.f_v, self.nicer, self.bt_rr, self.bt_tt, self.id1, self.id2]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolitonShot {
    pub v0: f64,
    pub options: ShotOptions,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_p: Vec<f64>,
    pub v: Vec<f64>,
    pub v_p: Vec<f64>,
    pub f: Vec<f64>,
    pub f_p: Vec<f64>,
    pub rho_pp: Vec<f64>,
    pub v_pp: Vec<f64>,
    pub f_pp: Vec<f64>,
    pub r_end: f64,
    pub r_max: f64,
    pub stop_reason: Option<String>,
    pub classification: Classification,
    pub residuals: IdentityResiduals,
    /// Fitted `c` in `R + |∇f|² − f = c`.
    pub normalization_c: f64,
    pub normalization_residual: f64,
    /// `ρ(r₀)/r₀` and `v′(r₀)/r₀` at the end of the axis segment.
    pub axis_rho_ratio: f64,
    pub axis_vp_over_r: f64,
}

/// Pointwise geometry recovered from the deviation state.
#[derive(Clone, Copy, Debug)]
struct Point {
    rho: f64,
    rho_p: f64,
    v: f64,
    v_p: f64,
    ff: f64,
    rho_pp: f64,
    v_pp: f64,
    ff_p: f64,
}

fn point(r: f64, y: &State) -> Point {
    let (p, pp, d, dp, g) = (y[0], y[1], y[2], y[3], y[4]);
    let rho = r + p;
    let rho_p = 1.0 + pp;
    let v = SQRT_2 + d;
    let v_p = dp;
    let ff = 0.5 * r + g;
    let k = rho_p / rho;
    let r_check = (p - r * pp) / rho + 2.0 * k * (2.0 * v_p / v - g);
    let rho_pp = -0.5 * r_check * rho;
    // v² − 2 written so that it vanishes exactly with the deviation
    let q = d * (2.0 * SQRT_2 + d);
    let v_pp = -k * v_p + ff * v_p + (-q - 2.0 * v_p * v_p) / (2.0 * v);
    let ff_p = 0.5 + 2.0 * v_pp / v - 0.5 * r_check;
    Point { rho, rho_p, v, v_p, ff, rho_pp, v_pp, ff_p }
}

struct Shooter {
    blowup: f64,
}

impl Shooter {
    fn invalid(&self, r: f64, y: &State) -> Option<String> {
        let pt = point(r, y);
        if !y.iter().all(|x| x.is_finite()) {
            Some(format!("non-finite state at r = {r:.4}"))
        } else if pt.rho <= 0.0 {
            Some(format!("ρ vanished at r = {r:.4}"))
        } else if pt.v <= 0.0 {
            Some(format!("v vanished at r = {r:.4}"))
        } else if y.iter().any(|x| x.abs() > self.blowup) {
            Some(format!("blow-up at r = {r:.4}"))
        } else {
            None
        }
    }
}

impl System<f64, State> for Shooter {
    fn system(&self, _r: f64, y: &State, dy: &mut State) {
        let pt = point(y[6], y);
        dy[0] = y[1];
        dy[1] = pt.rho_pp;
        dy[2] = y[3];
        dy[3] = pt.v_pp;
        dy[4] = pt.ff_p - 0.5;
        dy[5] = y[4];
        dy[6] = 1.0;
    }

    fn solout(&mut self, r: f64, y: &State, _dy: &State) -> bool {
        self.invalid(r, y).is_some()
    }
}

/// Second-order axis data at `r₀`: `ρ = r + ρ₃r³`, `v = v₀ + v₂r²`, `F = F₁r`.
fn axis_state(v0: f64, f1: f64, r0: f64) -> Result<State> {
    let d0 = v0 - SQRT_2;
    let v2 = -d0 * (2.0 * SQRT_2 + d0) / (8.0 * v0);
    let r_check0 = 1.0 + 2.0 * (4.0 * v2 / v0 - f1);
    let rho3 = -r_check0 / 12.0;
    let y = State::from_column_slice(&[
        rho3 * r0.powi(3),
        3.0 * rho3 * r0 * r0,
        d0 + v2 * r0 * r0,
        2.0 * v2 * r0,
        (f1 - 0.5) * r0,
        0.5 * (f1 - 0.5) * r0 * r0,
        r0,
    ]);
    let ok = y.iter().all(|x| x.is_finite())
        && (v2 * r0 * r0).abs() <= 1e-2 * v0
        && (rho3 * r0 * r0).abs() <= 1e-2;
    if !ok {
        return Err(Error::AxisExpansionFailure(format!(
            "v₀ = {v0:e}, F₁ = {f1}: Taylor terms are not small at r₀ = {r0}"
        )));
    }
    Ok(y)
}

pub fn shoot(v0: f64, r_max: f64) -> Result<SolitonShot> {
    shoot_with(v0, r_max, &ShotOptions::default())
}

pub fn shoot_with(v0: f64, r_max: f64, opt: &ShotOptions) -> Result<SolitonShot> {
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::InvalidInput(format!("v₀ = {v0} must be positive")));
    }
    if !(r_max > opt.r0 && r_max <= 100.0) {
        return Err(Error::InvalidInput(format!("r_max = {r_max} must lie in ({}, 100]", opt.r0)));
    }
    let y0 = axis_state(v0, opt.f1, opt.r0)?;
    let shooter = Shooter { blowup: opt.blowup };
    // The 1/r coefficients look stiff near the axis; a small first step keeps the one-off
    // stiffness probe quiet and n_stiff = MAX disables the periodic one. Steps are capped
    // at dr so the accepted points double as the output grid.
    let mut solver = Dop853::from_param(
        Shooter { blowup: opt.blowup },
        opt.r0,
        r_max,
        opt.dr,
        y0,
        opt.rtol,
        opt.atol,
        0.9,
        0.0,
        0.333,
        6.0,
        opt.dr,
        1e-2 * opt.r0,
        200_000,
        u32::MAX,
        OutputType::Sparse,
    );
    let failure = solver.integrate().err().map(|e| format!("integrator: {e}"));
    let (rs, ys) = (solver.x_out(), solver.y_out());
    let mut keep = rs.len();
    let mut stop_reason = failure;
    for (i, (r, y)) in rs.iter().zip(ys).enumerate() {
        if let Some(reason) = shooter.invalid(*r, y) {
            keep = i;
            stop_reason.get_or_insert(reason);
            break;
        }
    }
    let (rs, ys) = (&rs[..keep], &ys[..keep]);
    let pts: Vec<Point> = rs.iter().zip(ys).map(|(r, y)| point(*r, y)).collect();
    let samples: Vec<RadialSample> = rs
        .iter()
        .zip(ys)
        .zip(&pts)
        .map(|((r, y), p)| RadialSample {
            r: *r,
            rho: p.rho,
            rho_p: p.rho_p,
            rho_pp: p.rho_pp,
            v: p.v,
            v_p: p.v_p,
            v_pp: p.v_pp,
            f: 0.25 * r * r + y[5],
            f_p: p.ff,
            f_pp: p.ff_p,
        })
        .collect();
    let res = residuals_over(&samples);
    let (normalization_c, normalization_residual) = normalization_fit(&samples);
    let r_end = rs.last().copied().unwrap_or(opt.r0);
    if stop_reason.is_none() && r_end < r_max - 1e-9 * r_max {
        stop_reason = Some(format!("stopped at r = {r_end:.4}"));
    }
    let complete = stop_reason.is_none();
    let classification = if !complete {
        Classification::Incomplete
    } else if res.lemma_max() > opt.identity_tol || res.nicer > opt.identity_tol {
        Classification::IdentityViolated
    } else {
        Classification::Cylinder
    };
    let (axis_rho_ratio, axis_vp_over_r) = pts.first().map_or((f64::NAN, f64::NAN), |p| (p.rho / opt.r0, p.v_p / opt.r0));
    Ok(SolitonShot {
        v0,
        options: *opt,
        r: rs.to_vec(),
        rho: pts.iter().map(|p| p.rho).collect(),
        rho_p: pts.iter().map(|p| p.rho_p).collect(),
        v: pts.iter().map(|p| p.v).collect(),
        v_p: pts.iter().map(|p| p.v_p).collect(),
        f: samples.iter().map(|p| p.f).collect(),
        f_p: pts.iter().map(|p| p.ff).collect(),
        rho_pp: pts.iter().map(|p| p.rho_pp).collect(),
        v_pp: pts.iter().map(|p| p.v_pp).collect(),
        f_pp: pts.iter().map(|p| p.ff_p).collect(),
        r_end,
        r_max,
        stop_reason,
        classification,
        residuals: res,
        normalization_c,
        normalization_residual,
        axis_rho_ratio,
        axis_vp_over_r,
    })
}

/// Radial data and derivatives at one radius.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadialSample {
    pub r: f64,
    pub rho: f64,
    pub rho_p: f64,
    pub rho_pp: f64,
    pub v: f64,
    pub v_p: f64,
    pub v_pp: f64,
    pub f: f64,
    pub f_p: f64,
    pub f_pp: f64,
}

impl RadialSample {
    /// `Ř = −2ρ″/ρ`
    pub fn r_check(&self) -> f64 {
        -2.0 * self.rho_pp / self.rho
    }

    /// Scalar curvature of the four-dimensional metric.
    pub fn scalar_curvature(&self) -> f64 {
        let k = self.rho_p / self.rho;
        let lap_v = self.v_pp + k * self.v_p;
        self.r_check() - 4.0 * lap_v / self.v + 2.0 * (1.0 - self.v_p * self.v_p) / (self.v * self.v)
    }

    pub fn residuals(&self) -> IdentityResiduals {
        let p = self;
        let k = p.rho_p / p.rho;
        let r_check = p.r_check();
        let lap_v = p.v_pp + k * p.v_p;
        let lap_f = p.f_pp + k * p.f_p;
        let a2 = -lap_v / p.v;
        let lambda2 = (1.0 - p.v_p * p.v_p) / (p.v * p.v);
        let b1 = r_check - lambda2;
        let a_tf = 0.5 * (p.v_pp - k * p.v_p).powi(2);
        let b_tf = 0.5 * (p.f_pp - k * p.f_p).powi(2);
        let lhs = 0.5 * (r_check - 1.0);
        let hv = [p.v_pp, k * p.v_p];
        let hf = [p.f_pp, k * p.f_p];
        let hv_sq = hv[0] * hv[0] + hv[1] * hv[1];
        let hf_sq = hf[0] * hf[0] + hf[1] * hf[1];
        let hvf = hv[0] * hf[0] + hv[1] * hf[1];
        IdentityResiduals {
            a2_plus_lambda2: (a2 + lambda2 - 0.5).abs(),
            a2_b1: (a2 * b1).abs(),
            f_v: (p.f_p * p.v_p).abs(),
            nicer: (a_tf - 0.25 * p.v * p.v * b_tf).abs(),
            bt_rr: (lhs - 2.0 * p.v_pp / p.v + p.f_pp).abs(),
            bt_tt: (lhs - 2.0 * k * p.v_p / p.v + k * p.f_p).abs(),
            id1: (lhs * lap_v - (2.0 / p.v * hv_sq - hvf)).abs(),
            id2: (lhs * lap_f - (2.0 / p.v * hvf - hf_sq)).abs(),
        }
    }
}

impl IdentityResiduals {
    fn max_with(self, o: IdentityResiduals) -> IdentityResiduals {
        IdentityResiduals {
            a2_plus_lambda2: self.a2_plus_lambda2.max(o.a2_plus_lambda2),
            a2_b1: self.a2_b1.max(o.a2_b1),
            f_v: self.f_v.max(o.f_v),
            nicer: self.nicer.max(o.nicer),
            bt_rr: self.bt_rr.max(o.bt_rr),
            bt_tt: self.bt_tt.max(o.bt_tt),
            id1: self.id1.max(o.id1),
            id2: self.id2.max(o.id2),
        }
    }
}

/// Maxima of the pointwise residuals over `samples`.
pub fn residuals_over(samples: &[RadialSample]) -> IdentityResiduals {
    samples.iter().map(RadialSample::residuals).fold(IdentityResiduals::default(), IdentityResiduals::max_with)
}

/// Midrange fit of `c` in `R + |∇f|² − f = c` and the maximal deviation from it.
pub fn normalization_fit(samples: &[RadialSample]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let (lo, hi) = samples
        .iter()
        .map(|p| p.scalar_curvature() + p.f_p * p.f_p - p.f)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

impl SolitonShot {
    pub fn samples(&self) -> Vec<RadialSample> {
        (0..self.r.len())
            .map(|i| RadialSample {
                r: self.r[i],
                rho: self.rho[i],
                rho_p: self.rho_p[i],
                rho_pp: self.rho_pp[i],
                v: self.v[i],
                v_p: self.v_p[i],
                v_pp: self.v_pp[i],
                f: self.f[i],
                f_p: self.f_p[i],
                f_pp: self.f_pp[i],
            })
            .collect()
    }
}

pub fn identity_residuals(shot: &SolitonShot) -> IdentityResiduals {
    residuals_over(&shot.samples())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub v0: f64,
    pub classification: Classification,
    pub r_end: f64,
    pub lemma_residual: f64,
    pub stop_reason: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub r_max: f64,
    pub entries: Vec<SweepEntry>,
    /// Cylinder classifications with `|v₀ − √2| > 1e−6`.
    pub unexpected_cylinders: usize,
}

pub fn classify_sweep(v0s: &[f64], r_max: f64) -> Result<SweepReport> {
    if v0s.is_empty() {
        return Err(Error::InvalidInput("empty v₀ list".into()));
    }
    let entries = v0s
        .par_iter()
        .map(|&v0| {
            let s = shoot(v0, r_max)?;
            Ok(SweepEntry {
                v0,
                classification: s.classification,
                r_end: s.r_end,
                lemma_residual: s.residuals.lemma_max(),
                stop_reason: s.stop_reason,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let unexpected_cylinders = entries
        .iter()
        .filter(|e| e.classification == Classification::Cylinder && (e.v0 - SQRT_2).abs() > 1e-6)
        .count();
    Ok(SweepReport { r_max, entries, unexpected_cylinders })
}
