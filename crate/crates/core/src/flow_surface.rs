//! Gauged flow over a 2-torus: the full base metric `(g₁₁, g₁₂, g₂₂)` and `wₐ = log vₐ`
//! evolve by
//!
//! ```text
//! ∂ₜǧ  = −Ř ǧ + 2 Σ nₐ dwₐ ⊗ dwₐ
//! ∂ₜwₐ = Δ̌wₐ − μₐ e^{−2wₐ}
//! ```

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, Snapshot};
use crate::flow_s1::Termination;
use crate::geometry::{self, BaseJet, BasePoint, ScalarJet, Sym2, WarpedState};
use crate::integrate::{clip_to_checkpoint, rk4_step};
use crate::model::{FiberSpec, Profile};
use crate::monitors::{self, MonitorConfig, MonitorRecord};
use crate::stencil::{Grid2, Jet2Fields};

#[derive(Clone, Debug)]
pub struct FlowStateSurface {
    pub t: f64,
    pub grid: Grid2,
    pub fibers: Vec<FiberSpec>,
    pub g11: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

/// Coordinate jets of a grid field.
pub fn grid_jets(grid: &Grid2, f: &[f64]) -> Vec<ScalarJet> {
    let j = Jet2Fields::new(grid, f);
    (0..f.len())
        .map(|k| ScalarJet {
            f: j.f[k],
            df: [j.fx[k], j.fy[k]],
            ddf: [[j.fxx[k], j.fxy[k]], [j.fxy[k], j.fyy[k]]],
        })
        .collect()
}

impl FlowStateSurface {
    pub fn flat(grid: Grid2, fibers: Vec<FiberSpec>, w: Vec<Vec<f64>>) -> Self {
        let n = grid.len();
        FlowStateSurface { t: 0.0, grid, fibers, g11: vec![1.0; n], g12: vec![0.0; n], g22: vec![1.0; n], w }
    }

    pub fn det(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.g11[k] * self.g22[k] - self.g12[k] * self.g12[k]).collect()
    }

    fn check(&self) -> Result<()> {
        if let Some((index, det)) = self.det().into_iter().enumerate().find(|(k, d)| !(*d > 0.0 && self.g11[*k] > 0.0)) {
            return Err(Error::DegenerateMetric { index, det });
        }
        Ok(())
    }

    pub fn area_density(&self) -> Vec<f64> {
        self.det().iter().map(|d| d.sqrt()).collect()
    }

    pub fn area(&self) -> f64 {
        self.grid.integrate(&self.area_density())
    }

    /// `∬ f dǍ`
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let dens = self.area_density();
        self.grid.integrate(&f.iter().zip(&dens).map(|(a, b)| a * b).collect::<Vec<_>>())
    }

    pub fn vmin(&self, a: usize) -> f64 {
        self.w[a].iter().fold(f64::INFINITY, |m, &x| m.min(x)).exp()
    }

    pub fn global_vmin(&self) -> f64 {
        (0..self.w.len()).map(|a| self.vmin(a)).fold(f64::INFINITY, f64::min)
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.grid.len() * (3 + self.w.len()));
        y.extend_from_slice(&self.g11);
        y.extend_from_slice(&self.g12);
        y.extend_from_slice(&self.g22);
        for w in &self.w {
            y.extend_from_slice(w);
        }
        y
    }

    fn unpack(&self, y: &[f64], t: f64) -> FlowStateSurface {
        let n = self.grid.len();
        let mut chunks = y.chunks(n).map(|c| c.to_vec());
        FlowStateSurface {
            t,
            grid: self.grid,
            fibers: self.fibers.clone(),
            g11: chunks.next().unwrap(),
            g12: chunks.next().unwrap(),
            g22: chunks.next().unwrap(),
            w: chunks.collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.pack().iter().all(|x| x.is_finite())
    }

    pub fn step(&self, dt: f64) -> Result<FlowStateSurface> {
        let y = self.pack();
        let y1 = rk4_step(&y, dt, |y| {
            let r = rhs_surface(&self.unpack(y, self.t))?;
            let mut out = r.dg11;
            out.extend(r.dg12);
            out.extend(r.dg22);
            for dw in r.dw {
                out.extend(dw);
            }
            Ok::<_, Error>(out)
        })?;
        Ok(self.unpack(&y1, self.t + dt))
    }

    /// `min(C_cfl h² λ_min(ǧ), C_rxn minₐ vₐ²/(μₐ+1))`
    pub fn auto_dt(&self, c_cfl: f64, c_rxn: f64) -> f64 {
        let h = self.grid.hx.min(self.grid.hy);
        let lmin = (0..self.grid.len())
            .map(|k| {
                let (a, b, c) = (self.g11[k], self.g12[k], self.g22[k]);
                0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        let rxn = self
            .fibers
            .iter()
            .enumerate()
            .map(|(a, f)| self.vmin(a).powi(2) / (f.mu + 1.0))
            .fold(f64::INFINITY, f64::min);
        (c_cfl * h * h * lmin).min(c_rxn * rxn)
    }
}

impl WarpedState for FlowStateSurface {
    fn fibers(&self) -> &[FiberSpec] {
        &self.fibers
    }

    fn base_dim(&self) -> usize {
        2
    }

    fn num_points(&self) -> usize {
        self.grid.len()
    }

    fn base_jets(&self) -> Vec<BaseJet> {
        let (a, b, c) = (grid_jets(&self.grid, &self.g11), grid_jets(&self.grid, &self.g12), grid_jets(&self.grid, &self.g22));
        (0..self.grid.len()).map(|k| BaseJet::surface(&a[k], &b[k], &c[k])).collect()
    }

    fn scalar_jets(&self, f: &[f64]) -> Vec<ScalarJet> {
        grid_jets(&self.grid, f)
    }

    fn warping_fields(&self) -> Vec<Vec<f64>> {
        self.w.iter().map(|w| w.iter().map(|x| x.exp()).collect()).collect()
    }

    fn warping_jets(&self) -> Result<Vec<Vec<ScalarJet>>> {
        Ok(self
            .w
            .iter()
            .map(|w| grid_jets(&self.grid, w).iter().map(ScalarJet::exp_of).collect())
            .collect())
    }
}

/// Ř of the base metric at every node.
pub fn base_scalar_curvature_2d(state: &FlowStateSurface) -> Result<Vec<f64>> {
    state.check()?;
    Ok(state.base_points()?.iter().map(|bp| bp.r_check).collect())
}

#[derive(Clone, Debug)]
pub struct SurfaceRhs {
    pub dg11: Vec<f64>,
    pub dg12: Vec<f64>,
    pub dg22: Vec<f64>,
    pub dw: Vec<Vec<f64>>,
}

pub fn rhs_surface(state: &FlowStateSurface) -> Result<SurfaceRhs> {
    state.check()?;
    let bps = state.base_points()?;
    let wj: Vec<Vec<ScalarJet>> = state.w.iter().map(|w| grid_jets(&state.grid, w)).collect();
    let fibers = &state.fibers;
    let rows: Vec<([f64; 3], Vec<f64>)> = (0..state.grid.len())
        .into_par_iter()
        .map(|k| {
            let bp = &bps[k];
            let mut dg = [-bp.r_check * bp.g[0][0], -bp.r_check * bp.g[0][1], -bp.r_check * bp.g[1][1]];
            let mut dw = Vec::with_capacity(fibers.len());
            for (a, f) in fibers.iter().enumerate() {
                let j = &wj[a][k];
                let n2 = 2.0 * f.nf();
                dg[0] += n2 * j.df[0] * j.df[0];
                dg[1] += n2 * j.df[0] * j.df[1];
                dg[2] += n2 * j.df[1] * j.df[1];
                dw.push(bp.trace(&bp.hessian(j)) - f.mu * (-2.0 * j.f).exp());
            }
            (dg, dw)
        })
        .collect();
    let n = state.grid.len();
    let mut out = SurfaceRhs {
        dg11: Vec::with_capacity(n),
        dg12: Vec::with_capacity(n),
        dg22: Vec::with_capacity(n),
        dw: vec![Vec::with_capacity(n); fibers.len()],
    };
    for (dg, dw) in rows {
        out.dg11.push(dg[0]);
        out.dg12.push(dg[1]);
        out.dg22.push(dg[2]);
        for (a, x) in dw.into_iter().enumerate() {
            out.dw[a].push(x);
        }
    }
    Ok(out)
}

/// Scalar summaries of the base geometry at one time.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SurfaceMonitors {
    pub t: f64,
    pub r_check_min: f64,
    pub r_check_max: f64,
    /// `max p`, `p = Σ nₐ|∇wₐ|²`
    pub p_max: f64,
    /// `max (Ř + 2p)`
    pub f_upper_max: f64,
    /// `min (Ř − p)`
    pub f_lower_min: f64,
    pub area: f64,
    /// `∬ Ř dǍ`
    pub gauss_bonnet: f64,
    /// `∬ p dǍ`, the area rate on the torus.
    pub area_rate: f64,
    /// Smallest constant `C₀` for which `f ≤ max(C₀, 2μ₁/(3v₁²))` holds at this time.
    pub c0_needed: f64,
    /// Smallest constant `C₁ ≥ 0` for which `Ř ≥ −C₁/v₁²` holds at this time.
    pub c1_needed: f64,
}

pub fn surface_monitors(state: &FlowStateSurface) -> Result<SurfaceMonitors> {
    let bps = state.base_points()?;
    let wj: Vec<Vec<ScalarJet>> = state.w.iter().map(|w| grid_jets(&state.grid, w)).collect();
    let n = state.grid.len();
    let mu1 = state.fibers[0].mu;
    let mut m = SurfaceMonitors {
        t: state.t,
        r_check_min: f64::INFINITY,
        r_check_max: f64::NEG_INFINITY,
        p_max: f64::NEG_INFINITY,
        f_upper_max: f64::NEG_INFINITY,
        f_lower_min: f64::INFINITY,
        ..Default::default()
    };
    let mut r = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for k in 0..n {
        let bp = &bps[k];
        let pk: f64 = state.fibers.iter().enumerate().map(|(a, f)| f.nf() * bp.inner(&wj[a][k], &wj[a][k])).sum();
        let rk = bp.r_check;
        let fu = rk + 2.0 * pk;
        let v1sq = (2.0 * state.w[0][k]).exp();
        m.r_check_min = m.r_check_min.min(rk);
        m.r_check_max = m.r_check_max.max(rk);
        m.p_max = m.p_max.max(pk);
        m.f_upper_max = m.f_upper_max.max(fu);
        m.f_lower_min = m.f_lower_min.min(rk - pk);
        if fu > 2.0 * mu1 / (3.0 * v1sq) {
            m.c0_needed = m.c0_needed.max(fu);
        }
        m.c1_needed = m.c1_needed.max(-rk * v1sq);
        r.push(rk);
        p.push(pk);
    }
    m.area = state.area();
    m.gauss_bonnet = state.integrate(&r);
    m.area_rate = state.integrate(&p);
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct SurfaceConfig {
    pub mx: usize,
    pub my: usize,
    pub fibers: Vec<FiberSpec>,
    /// Initial `vₐ` (not `wₐ`).
    pub profiles: Vec<Profile>,
    /// Initial `(g₁₁, g₁₂, g₂₂)`; flat when `None`.
    pub metric: Option<[Profile; 3]>,
    pub c_cfl: f64,
    pub c_rxn: f64,
    pub eps_stop_rel: f64,
    pub t_max: f64,
    pub max_steps: usize,
    pub fixed_dt: Option<f64>,
    pub checkpoints: Vec<f64>,
    pub snapshot_every: usize,
    pub snapshot_dlog10: f64,
    /// Record monitors every k-th step.
    pub record_every: usize,
    /// Tameness threshold for `max f_upper` at t = 0; only reported.
    pub eta: Option<f64>,
    pub monitors: MonitorConfig,
}

impl SurfaceConfig {
    pub fn new(mx: usize, my: usize, fibers: Vec<FiberSpec>, profiles: Vec<Profile>) -> Self {
        let monitors = MonitorConfig::for_fibers(fibers.len());
        SurfaceConfig {
            mx,
            my,
            fibers,
            profiles,
            metric: None,
            c_cfl: 0.2,
            c_rxn: 0.05,
            eps_stop_rel: 1e-2,
            t_max: f64::INFINITY,
            max_steps: 10_000_000,
            fixed_dt: None,
            checkpoints: Vec::new(),
            snapshot_every: 0,
            snapshot_dlog10: 0.1,
            record_every: 1,
            eta: None,
            monitors,
        }
    }
}

pub fn init_surface(cfg: &SurfaceConfig) -> Result<FlowStateSurface> {
    if cfg.mx < 16 || cfg.my < 16 {
        return Err(Error::InvalidConfig(format!("{}×{} grid violates M ≥ 16", cfg.mx, cfg.my)));
    }
    if cfg.fibers.is_empty() || cfg.fibers.len() != cfg.profiles.len() {
        return Err(Error::InvalidConfig("need one initial profile per fiber".into()));
    }
    for f in &cfg.fibers {
        FiberSpec::new(f.n, f.mu)?;
    }
    let grid = Grid2::new(cfg.mx, cfg.my);
    let mut w = Vec::with_capacity(cfg.fibers.len());
    for (a, p) in cfg.profiles.iter().enumerate() {
        let v = p.sample2(&grid)?;
        if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "initial warping of fiber {a} is {x} at node {i}; must be positive"
            )));
        }
        w.push(v.iter().map(|x| x.ln()).collect());
    }
    let mut state = FlowStateSurface::flat(grid, cfg.fibers.clone(), w);
    if let Some([a, b, c]) = &cfg.metric {
        state.g11 = a.sample2(&grid)?;
        state.g12 = b.sample2(&grid)?;
        state.g22 = c.sample2(&grid)?;
        state
            .check()
            .map_err(|e| Error::InvalidConfig(format!("initial base metric: {e}")))?;
    }
    Ok(state)
}

#[derive(Clone, Debug)]
pub struct TrajectorySurface {
    pub snapshots: Vec<FlowStateSurface>,
    pub records: Vec<MonitorRecord>,
    pub surface: Vec<SurfaceMonitors>,
    pub termination: Termination,
    /// `max f_upper` at t = 0.
    pub f_upper_max0: f64,
    pub eta_tame: Option<bool>,
    pub eps_stop: f64,
}

impl TrajectorySurface {
    pub fn final_state(&self) -> &FlowStateSurface {
        self.snapshots.last().expect("trajectory always keeps the final state")
    }
}

pub fn run_surface(cfg: &SurfaceConfig) -> Result<TrajectorySurface> {
    let mut state = init_surface(cfg)?;
    let initial_min = state.global_vmin();
    let eps_stop = cfg.eps_stop_rel * initial_min;
    let first = surface_monitors(&state)?;
    let f_upper_max0 = first.f_upper_max;
    let mut surface = vec![first];
    let mut records = vec![monitors::record_surface(&state, 0.0, 0, 0.0, &cfg.monitors)?];
    let mut snapshots = vec![state.clone()];
    let mut last_snap_vmin = initial_min;
    let mut step = 0usize;
    let every = cfg.record_every.max(1);
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
            Ok(_) | Err(Error::DegenerateMetric { .. }) | Err(Error::NonPositiveWarping { .. }) => {
                return Err(Error::BlowupDetected {
                    t: state.t + dt,
                    last_good: Box::new(Snapshot::Surface(state)),
                })
            }
            Err(e) => return Err(e),
        };
        step += 1;
        state = next;
        if step % every == 0 {
            surface.push(surface_monitors(&state)?);
            records.push(monitors::record_surface(&state, state.t, step, dt, &cfg.monitors)?);
        }
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
    if surface.last().map(|s| s.t) != Some(state.t) {
        surface.push(surface_monitors(&state)?);
        records.push(monitors::record_surface(&state, state.t, step, 0.0, &cfg.monitors)?);
    }
    Ok(TrajectorySurface {
        snapshots,
        records,
        surface,
        termination,
        f_upper_max0,
        eta_tame: cfg.eta.map(|eta| f_upper_max0 <= eta),
        eps_stop,
    })
}

/// Run-fitted constants of the two base curvature bounds.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SurfaceBounds {
    pub c0: f64,
    pub c1: f64,
}

pub fn surface_bounds(monitors: &[SurfaceMonitors]) -> SurfaceBounds {
    SurfaceBounds {
        c0: monitors.iter().map(|m| m.c0_needed).fold(0.0, f64::max),
        c1: monitors.iter().map(|m| m.c1_needed).fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionResidual {
    pub t: Vec<f64>,
    pub linf: Vec<f64>,
    /// `max |∂ₜ(·)|` at the same times, for scale.
    pub scale: Vec<f64>,
}

impl EvolutionResidual {
    pub fn norm(&self) -> f64 {
        self.linf.iter().copied().fold(0.0, f64::max)
    }
}

/// Three-point derivative at the middle of possibly unequal steps.
fn ddt(f0: f64, f1: f64, f2: f64, h1: f64, h2: f64) -> f64 {
    -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2
}

/// `max |∂ₜq − rhs|` at each interior snapshot, with `(q, rhs) = eval(state)`.
fn time_residual(
    snapshots: &[FlowStateSurface],
    eval: impl Fn(&FlowStateSurface) -> Result<(Vec<f64>, Vec<f64>)> + Sync,
) -> Result<EvolutionResidual> {
    if snapshots.len() < 3 {
        return Err(Error::InsufficientData("need three consecutive snapshots".into()));
    }
    let evals: Vec<(Vec<f64>, Vec<f64>)> = snapshots.par_iter().map(&eval).collect::<Result<_>>()?;
    let mut out = EvolutionResidual { t: vec![], linf: vec![], scale: vec![] };
    for k in 1..snapshots.len() - 1 {
        let (h1, h2) = (snapshots[k].t - snapshots[k - 1].t, snapshots[k + 1].t - snapshots[k].t);
        let (q0, q1, q2) = (&evals[k - 1].0, &evals[k].0, &evals[k + 1].0);
        let rhs = &evals[k].1;
        let mut linf = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..q1.len() {
            let d = ddt(q0[i], q1[i], q2[i], h1, h2);
            linf = linf.max((d - rhs[i]).abs());
            scale = scale.max(d.abs());
        }
        out.t.push(snapshots[k].t);
        out.linf.push(linf);
        out.scale.push(scale);
    }
    Ok(out)
}

/// `Δ̌` of a grid field.
fn laplacian(state: &FlowStateSurface, bps: &[BasePoint], f: &[f64]) -> Vec<f64> {
    let j = grid_jets(&state.grid, f);
    bps.iter().zip(&j).map(|(bp, s)| bp.trace(&bp.hessian(s))).collect()
}

/// Ř and `Δ̌Ř + Ř² − 2Řp + 2Σ nₐ((Δ̌wₐ)² − |∇̌²wₐ|²)`.
pub fn r_check_rhs(state: &FlowStateSurface) -> Result<(Vec<f64>, Vec<f64>)> {
    let bps = state.base_points()?;
    let r: Vec<f64> = bps.iter().map(|b| b.r_check).collect();
    let lap_r = laplacian(state, &bps, &r);
    let wj: Vec<Vec<ScalarJet>> = state.w.iter().map(|w| grid_jets(&state.grid, w)).collect();
    let rhs = (0..r.len())
        .map(|k| {
            let bp = &bps[k];
            let mut p = 0.0;
            let mut q = 0.0;
            for (a, f) in state.fibers.iter().enumerate() {
                let j = &wj[a][k];
                p += f.nf() * bp.inner(j, j);
                let h = bp.hessian(j);
                q += f.nf() * (bp.trace(&h).powi(2) - bp.sym_inner(&h, &h));
            }
            lap_r[k] + r[k] * r[k] - 2.0 * r[k] * p + 2.0 * q
        })
        .collect();
    Ok((r, rhs))
}

pub fn verify_r_evolution(snapshots: &[FlowStateSurface]) -> Result<EvolutionResidual> {
    time_residual(snapshots, r_check_rhs)
}

/// `a₁+b₁ = 2Ř` and `Δ̌(a₁+b₁) + (a₁+b₁)² + 2(a₂²+b₂²+λ₅²)` in the eigenframe.
pub fn uhlen_rhs(state: &FlowStateSurface) -> Result<(Vec<f64>, Vec<f64>)> {
    let uq = geometry::uhlenbeck(state, geometry::FrameMode::Eigen)?;
    let bps = state.base_points()?;
    let s: Vec<f64> = uq.points.iter().map(|p| p.a1 + p.b1).collect();
    let lap = laplacian(state, &bps, &s);
    let rhs = uq
        .points
        .iter()
        .zip(&lap)
        .map(|(p, l)| {
            let x = p.a1 + p.b1;
            l + x * x + 2.0 * (p.a2 * p.a2 + p.b2 * p.b2 + p.lambda[4] * p.lambda[4])
        })
        .collect();
    Ok((s, rhs))
}

/// Residual of the identity for `(∂ₜ−Δ)(a₁+b₁)` on a 4-D product `T² × S²`.
pub fn verify_uhlen_evolution(snapshots: &[FlowStateSurface]) -> Result<EvolutionResidual> {
    time_residual(snapshots, uhlen_rhs)
}

/// `χₐ` and the right side of its evolution in the gauged frame, where `∂ₜ − Δ` acts as `∂ₜ − Δ̌`.
pub fn chi_rhs_surface(state: &FlowStateSurface, a: usize, form: monitors::HessianForm) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = &state.grid;
    let fibers = &state.fibers;
    let nb: Vec<f64> = fibers.iter().map(|f| f.nf()).collect();
    let bps = state.base_points()?;
    let vj = state.warping_jets()?;
    let n = grid.len();
    let hess: Vec<Vec<Sym2>> = vj.iter().map(|j| (0..n).map(|k| bps[k].hessian(&j[k])).collect()).collect();
    let ip = |b: usize, c: usize, k: usize| bps[k].inner(&vj[b][k], &vj[c][k]);
    let bcoef = |b: usize, k: usize| ip(b, a, k) / vj[b][k].f;
    let chi: Vec<f64> = (0..n)
        .map(|k| {
            bps[k].sym_inner(&hess[a][k], &hess[a][k]) + (0..fibers.len()).map(|b| nb[b] * bcoef(b, k).powi(2)).sum::<f64>()
        })
        .collect();
    let lap_chi = laplacian(state, &bps, &chi);
    // ∇̌³vₐ from stencil derivatives of the Hessian components
    let hfield = |i: usize, j: usize| -> Vec<f64> { (0..n).map(|k| hess[a][k][i][j]).collect() };
    let comps = [hfield(0, 0), hfield(0, 1), hfield(1, 1)];
    let dcomps: Vec<[Vec<f64>; 2]> = comps.iter().map(|c| [grid.dx(c), grid.dy(c)]).collect();
    let comp_index = |i: usize, j: usize| if i == j { 2 * i } else { 1 };
    let bfields: Vec<Vec<f64>> = (0..fibers.len()).map(|b| (0..n).map(|k| bcoef(b, k)).collect()).collect();
    let bjets: Vec<Vec<ScalarJet>> = bfields.iter().map(|f| grid_jets(grid, f)).collect();
    let z: Vec<f64> = (0..n).map(|k| (fibers[a].mu + ip(a, a, k)) / vj[a][k].f).collect();
    let zj = grid_jets(grid, &z);
    let rhs = (0..n)
        .map(|k| {
            let bp = &bps[k];
            let h = &hess[a][k];
            let mut t3 = [[[0.0; 2]; 2]; 2];
            for kk in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut x = dcomps[comp_index(i, j)][kk][k];
                        for m in 0..2 {
                            x -= bp.gamma[m][kk][i] * h[m][j] + bp.gamma[m][kk][j] * h[i][m];
                        }
                        t3[kk][i][j] = x;
                    }
                }
            }
            let gi = &bp.ginv;
            let mut third = 0.0;
            for k1 in 0..2 {
                for i1 in 0..2 {
                    for j1 in 0..2 {
                        for k2 in 0..2 {
                            for i2 in 0..2 {
                                for j2 in 0..2 {
                                    third += gi[k1][k2] * gi[i1][i2] * gi[j1][j2] * t3[k1][i1][j1] * t3[k2][i2][j2];
                                }
                            }
                        }
                    }
                }
            }
            for b in 0..fibers.len() {
                let vb = &vj[b][k];
                let up = bp.grad_up(vb);
                let bb = bfields[b][k];
                let cov = [
                    h[0][0] * up[0] + h[0][1] * up[1] - bb * vb.df[0],
                    h[1][0] * up[0] + h[1][1] * up[1] - bb * vb.df[1],
                ];
                let cj = ScalarJet { f: 0.0, df: cov, ddf: [[0.0; 2]; 2] };
                third += nb[b] * (bp.inner(&bjets[b][k], &bjets[b][k]) + 2.0 * bp.inner(&cj, &cj) / (vb.f * vb.f));
            }
            let hz = bp.hessian(&zj[k]);
            let mut hess_inner = bp.sym_inner(h, &hz);
            for b in 0..fibers.len() {
                hess_inner += nb[b] * bcoef(b, k) * bp.inner(&vj[b][k], &zj[k]) / vj[b][k].f;
            }
            let lap_v = bp.trace(h);
            let mut r = lap_chi[k] - 2.0 * third - 2.0 * form.z_sign * hess_inner
                + 2.0 * bp.r_check * (lap_v * lap_v - bp.sym_inner(h, h));
            for b in 0..fibers.len() {
                let vb = vj[b][k].f;
                let gba = ip(b, a, k);
                let gbb = ip(b, b, k);
                r -= form.cross_coeff * nb[b] / (vb * vb) * gba * bp.sym_inner(&hess[b][k], h);
                r += 4.0 * nb[b] * (fibers[b].mu - (nb[b] - 1.0) * gbb) / vb.powi(4) * gba * gba;
                for c in 0..fibers.len() {
                    if c != b {
                        let vc = vj[c][k].f;
                        r -= 4.0 * nb[b] * nb[c] / (vb * vb * vc * vc) * ip(b, c, k) * gba * ip(c, a, k);
                    }
                }
            }
            r
        })
        .collect();
    Ok((chi, rhs))
}

pub fn verify_hessian_evolution_surface(
    snapshots: &[FlowStateSurface],
    a: usize,
    form: monitors::HessianForm,
) -> Result<EvolutionResidual> {
    if snapshots.first().is_some_and(|s| a >= s.fibers.len()) {
        return Err(Error::DimensionMismatch(format!("no fiber {a}")));
    }
    time_residual(snapshots, |s| chi_rhs_surface(s, a, form))
}
