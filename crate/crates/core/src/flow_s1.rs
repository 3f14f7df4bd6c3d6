//! Ricci flow of `φ²dθ² + Σ vₐ² ĝₐ` over S¹ in the arclength gauge.
//!
//! The θ grid is fixed; the density φ evolves so that `∂ₛ = φ⁻¹∂_θ` stays the
//! arclength derivative of the evolving metric.

use serde::Serialize;

use crate::error::{Error, Result, Snapshot};
use crate::geometry::{self, BaseJet, ScalarJet, WarpedState};
use crate::integrate::{clip_to_checkpoint, rk4_step};
use crate::model::{FiberSpec, Profile};
use crate::monitors::{self, MonitorConfig, MonitorRecord};
use crate::stencil::Grid1;

#[derive(Clone, Debug)]
pub struct FlowStateS1 {
    pub t: f64,
    pub grid: Grid1,
    pub fibers: Vec<FiberSpec>,
    pub phi: Vec<f64>,
    pub v: Vec<Vec<f64>>,
}

/// Arclength derivatives of every warping.
#[derive(Clone, Debug)]
pub struct SDerivs {
    pub v_s: Vec<Vec<f64>>,
    pub v_ss: Vec<Vec<f64>>,
}

impl FlowStateS1 {
    pub fn theta_grid(&self) -> Vec<f64> {
        self.grid.coords()
    }

    pub fn d_s(&self, f: &[f64]) -> Vec<f64> {
        self.grid.d1(f).iter().zip(&self.phi).map(|(d, p)| d / p).collect()
    }

    /// `f_ss = (f_θθ − (φ_θ/φ) f_θ)/φ²`
    pub fn d_ss(&self, f: &[f64]) -> Vec<f64> {
        let ft = self.grid.d1(f);
        let ftt = self.grid.d2(f);
        let pt = self.grid.d1(&self.phi);
        (0..f.len())
            .map(|i| {
                let p = self.phi[i];
                (ftt[i] - pt[i] / p * ft[i]) / (p * p)
            })
            .collect()
    }

    pub fn s_derivs(&self) -> SDerivs {
        SDerivs {
            v_s: self.v.iter().map(|v| self.d_s(v)).collect(),
            v_ss: self.v.iter().map(|v| self.d_ss(v)).collect(),
        }
    }

    /// Total length `∮ φ dθ`.
    pub fn length(&self) -> f64 {
        self.grid.integrate(&self.phi)
    }

    pub fn min_ds(&self) -> f64 {
        self.phi.iter().fold(f64::INFINITY, |m, &p| m.min(p)) * self.grid.h
    }

    /// Arclength of each node from node 0 (trapezoid rule).
    pub fn arclength(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.grid.m];
        for i in 1..self.grid.m {
            s[i] = s[i - 1] + 0.5 * (self.phi[i - 1] + self.phi[i]) * self.grid.h;
        }
        s
    }

    pub fn vmin(&self, a: usize) -> f64 {
        self.v[a].iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn vmax(&self, a: usize) -> f64 {
        self.v[a].iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
    }

    pub fn global_vmin(&self) -> f64 {
        (0..self.v.len()).map(|a| self.vmin(a)).fold(f64::INFINITY, f64::min)
    }

    fn check(&self) -> Result<()> {
        for (a, v) in self.v.iter().enumerate() {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
                return Err(Error::NonPositiveWarping { fiber: a, index, value });
            }
        }
        if let Some((index, &det)) = self.phi.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
            return Err(Error::DegenerateMetric { index, det });
        }
        Ok(())
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = self.phi.clone();
        for v in &self.v {
            y.extend_from_slice(v);
        }
        y
    }

    fn unpack(&self, y: &[f64], t: f64) -> FlowStateS1 {
        let m = self.grid.m;
        FlowStateS1 {
            t,
            grid: self.grid,
            fibers: self.fibers.clone(),
            phi: y[..m].to_vec(),
            v: y[m..].chunks(m).map(|c| c.to_vec()).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.phi.iter().chain(self.v.iter().flatten()).all(|x| x.is_finite())
    }

    /// One RK4 step of the gauged system.
    pub fn step(&self, dt: f64) -> Result<FlowStateS1> {
        let y = self.pack();
        let y1 = rk4_step(&y, dt, |y| {
            let s = self.unpack(y, self.t);
            let r = rhs_s1(&s)?;
            let mut out = r.dphi;
            for dv in r.dv {
                out.extend(dv);
            }
            Ok::<_, Error>(out)
        })?;
        Ok(self.unpack(&y1, self.t + dt))
    }

    /// Time step `min(C_cfl (min Δs)², C_rxn minₐ vₐ²/(μₐ+1))`.
    pub fn auto_dt(&self, c_cfl: f64, c_rxn: f64) -> f64 {
        let ds = self.min_ds();
        let rxn = self
            .fibers
            .iter()
            .enumerate()
            .map(|(a, f)| self.vmin(a).powi(2) / (f.mu + 1.0))
            .fold(f64::INFINITY, f64::min);
        (c_cfl * ds * ds).min(c_rxn * rxn)
    }
}

impl WarpedState for FlowStateS1 {
    fn fibers(&self) -> &[FiberSpec] {
        &self.fibers
    }

    fn base_dim(&self) -> usize {
        1
    }

    fn num_points(&self) -> usize {
        self.grid.m
    }

    fn base_jets(&self) -> Vec<BaseJet> {
        let d1 = self.grid.d1(&self.phi);
        let d2 = self.grid.d2(&self.phi);
        (0..self.grid.m).map(|i| BaseJet::circle(self.phi[i], d1[i], d2[i])).collect()
    }

    fn scalar_jets(&self, f: &[f64]) -> Vec<ScalarJet> {
        let d1 = self.grid.d1(f);
        let d2 = self.grid.d2(f);
        (0..f.len())
            .map(|i| ScalarJet { f: f[i], df: [d1[i], 0.0], ddf: [[d2[i], 0.0], [0.0, 0.0]] })
            .collect()
    }

    fn warping_fields(&self) -> Vec<Vec<f64>> {
        self.v.clone()
    }
}

#[derive(Clone, Debug)]
pub struct S1Rhs {
    pub dv: Vec<Vec<f64>>,
    pub dphi: Vec<f64>,
}

pub fn rhs_s1(state: &FlowStateS1) -> Result<S1Rhs> {
    state.check()?;
    let d = state.s_derivs();
    let m = state.grid.m;
    let fibers = &state.fibers;
    let dv = (0..fibers.len())
        .map(|a| {
            (0..m)
                .map(|i| {
                    let va = state.v[a][i];
                    let vs = d.v_s[a][i];
                    let mut drift = 0.0;
                    for (b, fb) in fibers.iter().enumerate() {
                        drift += fb.nf() * vs * d.v_s[b][i] / state.v[b][i];
                    }
                    d.v_ss[a][i] + drift - (fibers[a].mu + vs * vs) / va
                })
                .collect()
        })
        .collect();
    let dphi = (0..m)
        .map(|i| {
            let k: f64 = fibers
                .iter()
                .enumerate()
                .map(|(a, f)| f.nf() * d.v_ss[a][i] / state.v[a][i])
                .sum();
            state.phi[i] * k
        })
        .collect();
    Ok(S1Rhs { dv, dphi })
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub single_fiber_pinching: bool,
    pub guarantee_cylinder: bool,
    pub small_gradient: bool,
    /// `min R(·,0)`
    pub r0: f64,
    /// `max v₁(·,0)`
    pub c1: f64,
    pub max_grad_sq_v1: f64,
}

impl AssumptionReport {
    /// Flags computed from the initial state. `guarantee_cylinder` requires `μₐ ≥ nₐ−1` for all
    /// fibers and `r₀c₁² + n₁μ₁ > 0`, the condition under which the pinching rate stays positive.
    pub fn from_state<S: WarpedState + ?Sized>(state: &S, grad_sq_v1: f64) -> Result<Self> {
        let fibers = state.fibers();
        let v = state.warping_fields();
        let minmax = |x: &[f64]| {
            x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)))
        };
        let (_, v1max) = minmax(&v[0]);
        let lhs1 = v1max * v1max / fibers[0].mu;
        let single_fiber_pinching = (1..fibers.len()).all(|a| {
            let (lo, _) = minmax(&v[a]);
            lo * lo / (2.0 * fibers[a].mu) >= lhs1
        });
        let blocks = geometry::curvature_blocks(state)?;
        let r0 = blocks.points.iter().map(|p| p.scalar_r).fold(f64::INFINITY, f64::min);
        let mu_ok = fibers.iter().all(|f| f.mu >= (f.n - 1) as f64);
        let guarantee_cylinder = mu_ok && r0 * v1max * v1max + fibers[0].nf() * fibers[0].mu > 0.0;
        let small_gradient = fibers[0].mu == (fibers[0].n - 1) as f64 && grad_sq_v1 <= 1.0;
        Ok(AssumptionReport {
            single_fiber_pinching,
            guarantee_cylinder,
            small_gradient,
            r0,
            c1: v1max,
            max_grad_sq_v1: grad_sq_v1,
        })
    }
}

#[derive(Clone, Debug)]
pub struct S1Config {
    pub m: usize,
    pub fibers: Vec<FiberSpec>,
    pub profiles: Vec<Profile>,
    pub c_cfl: f64,
    pub c_rxn: f64,
    /// Stop once `minₐ min vₐ` drops below this fraction of its initial value.
    pub eps_stop_rel: f64,
    pub t_max: f64,
    pub max_steps: usize,
    /// Overrides the adaptive step (refinement studies).
    pub fixed_dt: Option<f64>,
    /// Times the stepper lands on exactly; a snapshot is stored at each.
    pub checkpoints: Vec<f64>,
    /// Keep every k-th step as a snapshot (0 disables).
    pub snapshot_every: usize,
    /// Also keep a snapshot whenever `min v` has dropped by this many decades since the last one.
    pub snapshot_dlog10: f64,
    pub monitors: MonitorConfig,
}

impl S1Config {
    pub fn new(m: usize, fibers: Vec<FiberSpec>, profiles: Vec<Profile>) -> Self {
        let monitors = MonitorConfig::for_fibers(fibers.len());
        S1Config {
            m,
            fibers,
            profiles,
            c_cfl: 0.2,
            c_rxn: 0.05,
            eps_stop_rel: 1e-3,
            t_max: f64::INFINITY,
            max_steps: 10_000_000,
            fixed_dt: None,
            checkpoints: Vec::new(),
            snapshot_every: 0,
            snapshot_dlog10: 0.05,
            monitors,
        }
    }
}

pub fn init_state(cfg: &S1Config) -> Result<(FlowStateS1, AssumptionReport)> {
    if cfg.m < 16 {
        return Err(Error::InvalidConfig(format!("M = {} violates M ≥ 16", cfg.m)));
    }
    if cfg.fibers.is_empty() || cfg.fibers.len() != cfg.profiles.len() {
        return Err(Error::InvalidConfig("need one initial profile per fiber".into()));
    }
    for f in &cfg.fibers {
        FiberSpec::new(f.n, f.mu)?;
    }
    let grid = Grid1::new(cfg.m);
    let v = cfg.profiles.iter().map(|p| p.sample1(&grid)).collect::<Result<Vec<_>>>()?;
    for (a, va) in v.iter().enumerate() {
        if let Some((i, x)) = va.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "initial warping of fiber {a} is {x} at node {i}; must be positive"
            )));
        }
    }
    let state = FlowStateS1 { t: 0.0, grid, fibers: cfg.fibers.clone(), phi: vec![1.0; cfg.m], v };
    let gs = state.d_s(&state.v[0]).iter().fold(0.0f64, |m, x| m.max(x * x));
    let report = AssumptionReport::from_state(&state, gs)?;
    Ok((state, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    EpsStop,
    DtUnderflow,
    TimeLimit,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct TrajectoryS1 {
    pub snapshots: Vec<FlowStateS1>,
    pub records: Vec<MonitorRecord>,
    pub termination: Termination,
    pub t_hat: Option<TFit>,
    pub assumptions: AssumptionReport,
    pub eps_stop: f64,
}

impl TrajectoryS1 {
    pub fn final_state(&self) -> &FlowStateS1 {
        self.snapshots.last().expect("trajectory always keeps the final state")
    }
}

pub fn run_s1(cfg: &S1Config) -> Result<TrajectoryS1> {
    let (mut state, assumptions) = init_state(cfg)?;
    let initial_min = state.global_vmin();
    let eps_stop = cfg.eps_stop_rel * initial_min;
    let mut records = vec![monitors::record_s1(&state, 0, 0.0, &cfg.monitors)?];
    let mut snapshots = vec![state.clone()];
    let mut last_snap_vmin = initial_min;
    let mut step = 0usize;
    let termination = loop {
        if state.global_vmin() < eps_stop {
            break Termination::EpsStop;
        }
        if state.t >= cfg.t_max {
            break Termination::TimeLimit;
        }
        if step >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        let mut dt = cfg.fixed_dt.unwrap_or_else(|| state.auto_dt(cfg.c_cfl, cfg.c_rxn));
        if dt < 1e-14 {
            break Termination::DtUnderflow;
        }
        dt = clip_to_checkpoint(state.t, dt, &cfg.checkpoints);
        if state.t + dt > cfg.t_max {
            dt = cfg.t_max - state.t;
        }
        let next = match state.step(dt) {
            Ok(s) if s.is_finite() => s,
            Ok(_) | Err(Error::NonPositiveWarping { .. }) | Err(Error::DegenerateMetric { .. }) => {
                return Err(Error::BlowupDetected {
                    t: state.t + dt,
                    last_good: Box::new(Snapshot::S1(state)),
                })
            }
            Err(e) => return Err(e),
        };
        step += 1;
        state = next;
        records.push(monitors::record_s1(&state, step, dt, &cfg.monitors)?);
        let vmin = state.global_vmin();
        let at_checkpoint = cfg.checkpoints.iter().any(|&c| (c - state.t).abs() <= 1e-14 * c.max(1.0));
        let periodic = cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0;
        let decayed = (last_snap_vmin / vmin).log10() >= cfg.snapshot_dlog10;
        if at_checkpoint || periodic || decayed {
            snapshots.push(state.clone());
            last_snap_vmin = vmin;
        }
    };
    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state.clone());
    }
    let series = monitors::resolved_vmin_series(&records, 0, cfg.monitors.min_neck_resolution);
    let t_hat = estimate_t(&series, cfg.fibers[0].mu, TFitModel::FreeSlope).ok();
    if let Some(fit) = &t_hat {
        monitors::apply_t_hat(&mut records, fit.t_hat);
    }
    Ok(TrajectoryS1 { snapshots, records, termination, t_hat, assumptions, eps_stop })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TFitModel {
    /// `v² = 2μ₁(T − t)` with the slope fixed.
    FixedSlope,
    /// `v² = α(T − t)` with α fitted as well; absorbs slowly varying log corrections.
    FreeSlope,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TFit {
    pub t_hat: f64,
    /// Fitted `α` in `v² ≈ α(T̂ − t)`.
    pub slope: f64,
    /// RMS misfit of `v²` over the fitted window.
    pub residual: f64,
    pub samples: usize,
    pub model: TFitModel,
}

/// Singular time from `(t, min v²)` samples, fitted over the final decade of `v²`.
pub fn estimate_t(series: &[(f64, f64)], mu1: f64, model: TFitModel) -> Result<TFit> {
    let Some(&(_, last)) = series.last() else {
        return Err(Error::InsufficientData("empty series".into()));
    };
    let first = series[0].1;
    if !(last > 0.0) || first < 10.0 * last {
        return Err(Error::InsufficientData(format!(
            "min v² decays only from {first:e} to {last:e}; a full decade is required"
        )));
    }
    let window: Vec<(f64, f64)> = series.iter().copied().filter(|&(_, y)| y <= 10.0 * last).collect();
    if window.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} samples in the final decade, need 10",
            window.len()
        )));
    }
    let n = window.len() as f64;
    let (t_hat, slope) = match model {
        TFitModel::FixedSlope => {
            let a = 2.0 * mu1;
            (window.iter().map(|(t, y)| t + y / a).sum::<f64>() / n, a)
        }
        TFitModel::FreeSlope => {
            let tm = window.iter().map(|p| p.0).sum::<f64>() / n;
            let ym = window.iter().map(|p| p.1).sum::<f64>() / n;
            let sty: f64 = window.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
            let stt: f64 = window.iter().map(|(t, _)| (t - tm).powi(2)).sum();
            let b = sty / stt;
            if !(b < 0.0) {
                return Err(Error::InsufficientData("min v² is not decreasing".into()));
            }
            (tm - ym / b, -b)
        }
    };
    let residual = (window.iter().map(|(t, y)| (y - slope * (t_hat - t)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(TFit { t_hat, slope, residual, samples: window.len(), model })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(v: Vec<f64>) -> FlowStateS1 {
        let m = v.len();
        FlowStateS1 { t: 0.0, grid: Grid1::new(m), fibers: vec![FiberSpec::unit(2)], phi: vec![1.0; m], v: vec![v] }
    }

    #[test]
    fn homogeneous_rhs() {
        let s = state(vec![1.5; 32]);
        let r = rhs_s1(&s).unwrap();
        assert!(r.dv[0].iter().all(|x| (x + 1.0 / 1.5).abs() < 1e-14));
        assert!(r.dphi.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn fixed_slope_fit_exact() {
        let series: Vec<(f64, f64)> = (0..200).map(|i| {
            let t = 0.5 * (1.0 - 0.98f64.powi(i));
            (t, 2.0 * (0.5 - t))
        }).collect();
        let fit = estimate_t(&series, 1.0, TFitModel::FixedSlope).unwrap();
        assert!((fit.t_hat - 0.5).abs() < 1e-14);
        let fit = estimate_t(&series, 1.0, TFitModel::FreeSlope).unwrap();
        assert!((fit.t_hat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_series_rejected() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(estimate_t(&series, 1.0, TFitModel::FreeSlope), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn small_grid_rejected() {
        let cfg = S1Config::new(8, vec![FiberSpec::unit(2)], vec![Profile::Constant(1.0)]);
        assert!(matches!(init_state(&cfg), Err(Error::InvalidConfig(_))));
    }
}
