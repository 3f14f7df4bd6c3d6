//! Quantities controlled along the flow: maximum-principle bounds, Q/P, the Hessian
//! quantity F, the neck quantity L on Ω, Type-I ratios, rescaled curvatures, profile
//! bounds at the neck, and the Hessian evolution residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow_s1::FlowStateS1;
use crate::geometry::{self, WarpedState};
use crate::model::FiberSpec;

#[derive(Clone, Debug, Serialize)]
pub struct MonitorConfig {
    /// Threshold δ in `Ω = {(v₁)ₛₛ log(v₁/δ) < 0}`.
    pub delta_omega: f64,
    /// β in `B = β·maxₐ sup|∇vₐ|²`.
    pub beta: f64,
    /// Fibers whose blocks make up `Σ_fl`.
    pub flat: Vec<usize>,
    /// Grid points per neck half-width below which a record counts as unresolved.
    pub min_neck_resolution: f64,
    /// δ in the outer profile region `|σ| ≤ (T−t)^{½−δ}`.
    pub profile_delta: f64,
    pub vmax_rel_tol: f64,
    pub grad_abs_tol: f64,
}

impl MonitorConfig {
    pub fn for_fibers(count: usize) -> Self {
        MonitorConfig {
            delta_omega: 0.1,
            beta: 32.0,
            flat: (1..count).collect(),
            min_neck_resolution: 4.0,
            profile_delta: 0.3,
            vmax_rel_tol: 1e-10,
            grad_abs_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub step: usize,
    pub dt: f64,
    pub vmin: Vec<f64>,
    pub vmax: Vec<f64>,
    pub grad_sq_max: Vec<f64>,
    /// `max χₐ = max |∇²vₐ|²`
    pub chi_max: Vec<f64>,
    /// `max Zₐ = max (μₐ + |∇vₐ|²)/vₐ`
    pub z_max: Vec<f64>,
    /// `min Q`, `Q = 2Σ nₐ log vₐ`.
    pub q_min: f64,
    /// `min P = exp(min Q / 2)`.
    pub p_min: f64,
    /// Same quantities named 𝒬, 𝒫 over a surface base.
    pub qcal_min: Option<f64>,
    pub pcal_min: Option<f64>,
    pub b_const: f64,
    pub f_max: f64,
    pub l_min_on_omega: Option<f64>,
    pub omega_extent: Option<f64>,
    pub omega_components: Option<usize>,
    pub rm_max: f64,
    pub kappa0_neck: Option<f64>,
    pub kappa1_neck: f64,
    pub sigma_fl_max: f64,
    pub neck_index: usize,
    /// Grid points across the neck half-width `√(v₁/Δv₁)`.
    pub neck_resolution: f64,
    pub typei_ratio: Option<f64>,
    pub vmin_sq_over_tt: Option<f64>,
    pub kappa0_rescaled: Option<f64>,
    pub kappa1_rescaled: Option<f64>,
    pub sigma_fl_rescaled: Option<f64>,
}

fn argmin(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
        .0
}

fn max_of(x: impl IntoIterator<Item = f64>) -> f64 {
    x.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(x: impl IntoIterator<Item = f64>) -> f64 {
    x.into_iter().fold(f64::INFINITY, f64::min)
}

/// Fields shared by both bases.
fn record_common<S: WarpedState + ?Sized>(state: &S, cfg: &MonitorConfig) -> Result<(MonitorRecord, Vec<Vec<f64>>)> {
    let fibers = state.fibers();
    let v = state.warping_fields();
    let jets = state.warping_jets()?;
    let bps = state.base_points()?;
    let npts = state.num_points();
    let mut rec = MonitorRecord::default();
    let mut grad_sq = vec![vec![0.0; npts]; fibers.len()];
    for a in 0..fibers.len() {
        for k in 0..npts {
            grad_sq[a][k] = bps[k].inner(&jets[a][k], &jets[a][k]);
        }
    }
    let chi: Vec<Vec<f64>> = v
        .iter()
        .map(|va| Ok(geometry::operators(va, state)?.iter().map(|o| o.tensor_norm_sq).collect()))
        .collect::<Result<_>>()?;
    rec.vmin = v.iter().map(|x| min_of(x.iter().copied())).collect();
    rec.vmax = v.iter().map(|x| max_of(x.iter().copied())).collect();
    rec.grad_sq_max = grad_sq.iter().map(|g| max_of(g.iter().copied())).collect();
    rec.chi_max = chi.iter().map(|c| max_of(c.iter().copied())).collect();
    rec.z_max = (0..fibers.len())
        .map(|a| max_of((0..npts).map(|k| (fibers[a].mu + grad_sq[a][k]) / v[a][k])))
        .collect();
    let q: Vec<f64> = (0..npts)
        .map(|k| 2.0 * fibers.iter().enumerate().map(|(a, f)| f.nf() * v[a][k].ln()).sum::<f64>())
        .collect();
    rec.q_min = min_of(q.iter().copied());
    rec.p_min = (0.5 * rec.q_min).exp();
    rec.b_const = cfg.beta * max_of(rec.grad_sq_max.iter().copied());
    rec.f_max = max_of((0..npts).map(|k| {
        (0..fibers.len()).map(|b| (rec.b_const + grad_sq[b][k]) * chi[b][k]).sum::<f64>()
    }));
    let blocks = geometry::curvature_blocks(state)?;
    let norms = geometry::riemann_norm_sq(&blocks, fibers, &cfg.flat);
    rec.rm_max = max_of(norms.total.iter().map(|x| x.sqrt()));
    rec.sigma_fl_max = max_of(norms.flat.iter().copied());
    let neck = argmin(&v[0]);
    rec.neck_index = neck;
    rec.kappa1_neck = blocks.points[neck].kappa_fiber_self[0];
    let lap = bps[neck].trace(&bps[neck].hessian(&jets[0][neck]));
    let width = (v[0][neck] / lap.max(1e-300)).sqrt();
    rec.neck_resolution = width / neck_spacing(&bps[neck], state);
    Ok((rec, grad_sq))
}

/// Smallest physical grid spacing at a node.
fn neck_spacing<S: WarpedState + ?Sized>(bp: &geometry::BasePoint, state: &S) -> f64 {
    let h = 2.0 * std::f64::consts::PI / (state.num_points() as f64).powf(1.0 / bp.dim as f64);
    if bp.dim == 1 {
        bp.g[0][0].sqrt() * h
    } else {
        let (a, b, c) = (bp.g[0][0], bp.g[0][1], bp.g[1][1]);
        let lmin = 0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt();
        lmin.sqrt() * h
    }
}

pub fn record_s1(state: &FlowStateS1, step: usize, dt: f64, cfg: &MonitorConfig) -> Result<MonitorRecord> {
    let (mut rec, _) = record_common(state, cfg)?;
    rec.t = state.t;
    rec.step = step;
    rec.dt = dt;
    let nq = neck_quantities(state, cfg);
    rec.l_min_on_omega = nq.l_min_on_omega;
    rec.omega_extent = Some(nq.omega_extent);
    rec.omega_components = Some(nq.omega_intervals.len());
    let v1 = &state.v[0];
    let vss = state.d_ss(v1);
    rec.kappa0_neck = Some(-vss[rec.neck_index] / v1[rec.neck_index]);
    Ok(rec)
}

pub fn record_surface<S: WarpedState + ?Sized>(
    state: &S,
    t: f64,
    step: usize,
    dt: f64,
    cfg: &MonitorConfig,
) -> Result<MonitorRecord> {
    let (mut rec, _) = record_common(state, cfg)?;
    rec.t = t;
    rec.step = step;
    rec.dt = dt;
    rec.qcal_min = Some(rec.q_min);
    rec.pcal_min = Some(rec.p_min);
    Ok(rec)
}

/// Fills the fields that need the singular time.
pub fn apply_t_hat(records: &mut [MonitorRecord], t_hat: f64) {
    for r in records {
        let tau = t_hat - r.t;
        if tau <= 0.0 {
            continue;
        }
        r.typei_ratio = Some(tau * r.rm_max);
        r.vmin_sq_over_tt = Some(min_of(r.vmin.iter().copied()).powi(2) / tau);
        r.kappa0_rescaled = r.kappa0_neck.map(|k| tau * k);
        r.kappa1_rescaled = Some(tau * r.kappa1_neck);
        r.sigma_fl_rescaled = Some(tau * tau * r.sigma_fl_max);
    }
}

/// `(t, min vₐ²)` restricted to records whose neck is resolved.
pub fn resolved_vmin_series(records: &[MonitorRecord], a: usize, min_resolution: f64) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.neck_resolution >= min_resolution)
        .map(|r| (r.t, r.vmin[a].powi(2)))
        .collect()
}

/// Indices of records in the final resolved decade `T̂−t ∈ [τ_end, 10τ_end]`.
pub fn resolved_decade(records: &[MonitorRecord], t_hat: f64, min_resolution: f64) -> Result<Vec<usize>> {
    let last = records
        .iter()
        .rposition(|r| r.neck_resolution >= min_resolution && r.t < t_hat)
        .ok_or_else(|| Error::InsufficientData("no resolved records before T̂".into()))?;
    let tau_end = t_hat - records[last].t;
    if t_hat - records[0].t < 10.0 * tau_end {
        return Err(Error::InsufficientData("the resolved part of the run spans less than a decade".into()));
    }
    let idx: Vec<usize> = (0..=last)
        .filter(|&i| t_hat - records[i].t <= 10.0 * tau_end)
        .collect();
    if idx.len() < 10 {
        return Err(Error::InsufficientData(format!("{} records in the resolved decade", idx.len())));
    }
    Ok(idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    VmaxIncreased,
    GradientBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxPrincipleFlags {
    pub step: usize,
    pub vmax_ok: Vec<bool>,
    pub grad_ok: Vec<bool>,
}

impl MaxPrincipleFlags {
    pub fn all_ok(&self) -> bool {
        self.vmax_ok.iter().chain(&self.grad_ok).all(|&b| b)
    }
}

/// Maximum-principle assertions between consecutive records.
pub fn maximum_principle_check(
    prev: &MonitorRecord,
    cur: &MonitorRecord,
    initial_grad_sq: &[f64],
    fibers: &[FiberSpec],
    cfg: &MonitorConfig,
) -> MaxPrincipleFlags {
    let vmax_ok = (0..fibers.len())
        .map(|a| cur.vmax[a] <= prev.vmax[a] * (1.0 + cfg.vmax_rel_tol))
        .collect();
    let grad_ok = (0..fibers.len())
        .map(|a| cur.grad_sq_max[a] <= initial_grad_sq[a].max(fibers[a].lambda_hat()) + cfg.grad_abs_tol)
        .collect();
    MaxPrincipleFlags { step: cur.step, vmax_ok, grad_ok }
}

/// Every violation `(step, fiber, kind)` along a run.
pub fn maximum_principle_sweep(
    records: &[MonitorRecord],
    fibers: &[FiberSpec],
    cfg: &MonitorConfig,
) -> Vec<(usize, usize, Violation)> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for w in records.windows(2) {
        let f = maximum_principle_check(&w[0], &w[1], &first.grad_sq_max, fibers, cfg);
        for a in 0..fibers.len() {
            if !f.vmax_ok[a] {
                out.push((f.step, a, Violation::VmaxIncreased));
            }
            if !f.grad_ok[a] {
                out.push((f.step, a, Violation::GradientBound));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct NeckQuantities {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    pub l: Vec<f64>,
    pub omega: Vec<bool>,
    /// Maximal runs `[start, end]` of Ω on the periodic grid (inclusive, end may wrap).
    pub omega_intervals: Vec<(usize, usize)>,
    pub omega_extent: f64,
    pub l_min_on_omega: Option<f64>,
}

pub fn neck_quantities(state: &FlowStateS1, cfg: &MonitorConfig) -> NeckQuantities {
    let m = state.grid.m;
    let fibers = &state.fibers;
    let d = state.s_derivs();
    let q: Vec<f64> = (0..m)
        .map(|i| 2.0 * fibers.iter().enumerate().map(|(a, f)| f.nf() * state.v[a][i].ln()).sum::<f64>())
        .collect();
    let p = q.iter().map(|x| (0.5 * x).exp()).collect();
    let chi: Vec<Vec<f64>> = (0..fibers.len())
        .map(|a| {
            (0..m)
                .map(|i| {
                    let mut c = d.v_ss[a][i].powi(2);
                    for (b, fb) in fibers.iter().enumerate() {
                        c += fb.nf() * (d.v_s[a][i] * d.v_s[b][i] / state.v[b][i]).powi(2);
                    }
                    c
                })
                .collect()
        })
        .collect();
    let bconst = cfg.beta * max_of(d.v_s.iter().flatten().map(|x| x * x));
    let f = (0..m)
        .map(|i| (0..fibers.len()).map(|b| (bconst + d.v_s[b][i].powi(2)) * chi[b][i]).sum())
        .collect();
    let v1 = &state.v[0];
    let vss = &d.v_ss[0];
    let l: Vec<f64> = (0..m).map(|i| v1[i] * vss[i] * v1[i].ln()).collect();
    let omega: Vec<bool> = (0..m).map(|i| vss[i] * (v1[i] / cfg.delta_omega).ln() < 0.0).collect();
    let omega_intervals = periodic_runs(&omega);
    let omega_extent = (0..m).filter(|&i| omega[i]).map(|i| state.phi[i] * state.grid.h).sum();
    let l_min_on_omega = (0..m).filter(|&i| omega[i]).map(|i| l[i]).reduce(f64::min);
    NeckQuantities { q, p, f, l, omega, omega_intervals, omega_extent, l_min_on_omega }
}

/// Maximal runs of `true` on a periodic boolean array.
pub fn periodic_runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let m = mask.len();
    if mask.iter().all(|&b| b) {
        return vec![(0, m - 1)];
    }
    let Some(start) = (0..m).find(|&i| !mask[i]) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut run: Option<usize> = None;
    for k in 1..=m {
        let i = (start + k) % m;
        match (mask[i], run) {
            (true, None) => run = Some(i),
            (false, Some(s)) => {
                out.push((s, (i + m - 1) % m));
                run = None;
            }
            _ => {}
        }
    }
    out
}

/// L at the endpoints of Ω, located by linear interpolation of the sign change.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaEndpoints {
    /// Endpoints where `(v₁)ₛₛ` changes sign; L vanishes there.
    pub max_abs_l_at_vss_zero: f64,
    /// Endpoints where `v₁` crosses δ; there `v₁(v₁)ₛₛ log(v₁/δ)` vanishes instead of L.
    pub max_abs_shifted_l_at_delta: f64,
    pub vss_endpoints: usize,
    pub delta_endpoints: usize,
}

pub fn omega_endpoints(state: &FlowStateS1, cfg: &MonitorConfig) -> OmegaEndpoints {
    let m = state.grid.m;
    let v1 = &state.v[0];
    let vss = state.d_ss(v1);
    let lfun = |i: usize| v1[i] * vss[i] * v1[i].ln();
    let lshift = |i: usize| v1[i] * vss[i] * (v1[i] / cfg.delta_omega).ln();
    let mut out = OmegaEndpoints {
        max_abs_l_at_vss_zero: 0.0,
        max_abs_shifted_l_at_delta: 0.0,
        vss_endpoints: 0,
        delta_endpoints: 0,
    };
    for i in 0..m {
        let j = (i + 1) % m;
        let (gi, gj) = (lshift(i), lshift(j));
        if (gi < 0.0) == (gj < 0.0) {
            continue;
        }
        if (vss[i] < 0.0) != (vss[j] < 0.0) {
            let w = vss[i] / (vss[i] - vss[j]);
            let l = (1.0 - w) * lfun(i) + w * lfun(j);
            out.max_abs_l_at_vss_zero = out.max_abs_l_at_vss_zero.max(l.abs());
            out.vss_endpoints += 1;
        } else {
            let (li, lj) = ((v1[i] / cfg.delta_omega).ln(), (v1[j] / cfg.delta_omega).ln());
            let w = li / (li - lj);
            let l = (1.0 - w) * gi + w * gj;
            out.max_abs_shifted_l_at_delta = out.max_abs_shifted_l_at_delta.max(l.abs());
            out.delta_endpoints += 1;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSample {
    pub t: f64,
    pub neck_s: f64,
    pub sigma: Vec<f64>,
    pub v1: Vec<f64>,
    pub inner_margin: f64,
    pub outer_margin: Option<f64>,
}

/// The two neck profile bounds evaluated with fitted constants.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileCheck {
    pub samples: Vec<ProfileSample>,
    pub c_inner: f64,
    pub c_outer: f64,
    pub delta: f64,
}

impl ProfileCheck {
    pub fn c(&self) -> f64 {
        self.c_inner.max(self.c_outer)
    }
}

/// Signed arclength from the neck node, wrapped to `[−L/2, L/2)`.
fn signed_sigma(state: &FlowStateS1, neck: usize) -> (f64, Vec<f64>) {
    let s = state.arclength();
    let len = state.length();
    let s0 = s[neck];
    let sigma = s
        .iter()
        .map(|x| {
            let mut d = x - s0;
            if d >= 0.5 * len {
                d -= len;
            } else if d < -0.5 * len {
                d += len;
            }
            d
        })
        .collect();
    (s0, sigma)
}

pub fn profile_check(snapshots: &[&FlowStateS1], t_hat: f64, delta: f64) -> Result<ProfileCheck> {
    if snapshots.is_empty() {
        return Err(Error::InsufficientData("no snapshots in the resolved decade".into()));
    }
    struct Raw {
        t: f64,
        tau: f64,
        lg: f64,
        neck_s: f64,
        sigma: Vec<f64>,
        v1: Vec<f64>,
        n1: f64,
    }
    let raws: Vec<Raw> = snapshots
        .iter()
        .filter(|s| s.t < t_hat)
        .map(|s| {
            let neck = argmin(&s.v[0]);
            let (neck_s, sigma) = signed_sigma(s, neck);
            let tau = t_hat - s.t;
            Raw { t: s.t, tau, lg: -tau.ln(), neck_s, sigma, v1: s.v[0].clone(), n1: s.fibers[0].nf() }
        })
        .collect();
    if raws.is_empty() {
        return Err(Error::InsufficientData("all snapshots lie past T̂".into()));
    }
    let inner = |r: &Raw, sg: f64| sg.abs() <= 2.0 * (r.tau * r.lg).sqrt();
    let outer = |r: &Raw, sg: f64| sg.abs() >= 2.0 * (r.tau * r.lg).sqrt() && sg.abs() <= r.tau.powf(0.5 - delta);
    let mut c_inner = 0.0f64;
    let mut c_outer = 0.0f64;
    for r in &raws {
        let cyl = (2.0 * (r.n1 - 1.0) * r.tau).sqrt();
        for (sg, v) in r.sigma.iter().zip(&r.v1) {
            if inner(r, *sg) && *sg != 0.0 {
                c_inner = c_inner.max((v - cyl) * r.lg * r.tau.sqrt() / (sg * sg));
            }
            if outer(r, *sg) {
                let lg2 = (sg.abs() / (r.tau * r.lg).sqrt()).ln();
                c_outer = c_outer.max(v * r.lg.sqrt() / (sg.abs() * lg2.sqrt()));
            }
        }
    }
    let samples = raws
        .iter()
        .map(|r| {
            let cyl = (2.0 * (r.n1 - 1.0) * r.tau).sqrt();
            let mut inner_margin = f64::INFINITY;
            let mut outer_margin: Option<f64> = None;
            for (sg, v) in r.sigma.iter().zip(&r.v1) {
                if inner(r, *sg) {
                    let bound = cyl + c_inner * sg * sg / (r.lg * r.tau.sqrt());
                    inner_margin = inner_margin.min(bound - v);
                }
                if outer(r, *sg) {
                    let lg2 = (sg.abs() / (r.tau * r.lg).sqrt()).ln();
                    let bound = c_outer * sg.abs() / r.lg.sqrt() * lg2.sqrt();
                    outer_margin = Some(outer_margin.map_or(bound - v, |m: f64| m.min(bound - v)));
                }
            }
            let keep: Vec<usize> = (0..r.sigma.len())
                .filter(|&i| r.sigma[i].abs() <= r.tau.powf(0.5 - delta))
                .collect();
            ProfileSample {
                t: r.t,
                neck_s: r.neck_s,
                sigma: keep.iter().map(|&i| r.sigma[i]).collect(),
                v1: keep.iter().map(|&i| r.v1[i]).collect(),
                inner_margin,
                outer_margin,
            }
        })
        .collect();
    Ok(ProfileCheck { samples, c_inner, c_outer, delta })
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeISeries {
    pub t: Vec<f64>,
    pub typei_ratio: Vec<f64>,
    pub kappa0_rescaled: Vec<f64>,
    pub kappa1_rescaled: Vec<f64>,
    pub sigma_fl_rescaled: Vec<f64>,
    /// `v₁,neck / √(2(n₁−1)(T̂−t))`
    pub neck_ratio: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeIReport {
    pub decade: TypeISeries,
    pub profile: ProfileCheck,
}

/// Type-I ratio, rescaled curvatures and the profile bounds over the final resolved decade.
pub fn type_i_and_rescale(
    records: &[MonitorRecord],
    snapshots: &[FlowStateS1],
    fibers: &[FiberSpec],
    t_hat: f64,
    cfg: &MonitorConfig,
) -> Result<TypeIReport> {
    let idx = resolved_decade(records, t_hat, cfg.min_neck_resolution)?;
    let (t0, t1) = (records[idx[0]].t, records[*idx.last().unwrap()].t);
    let n1 = fibers[0].nf();
    let mut s = TypeISeries {
        t: vec![],
        typei_ratio: vec![],
        kappa0_rescaled: vec![],
        kappa1_rescaled: vec![],
        sigma_fl_rescaled: vec![],
        neck_ratio: vec![],
    };
    for &i in &idx {
        let r = &records[i];
        let tau = t_hat - r.t;
        s.t.push(r.t);
        s.typei_ratio.push(tau * r.rm_max);
        s.kappa0_rescaled.push(tau * r.kappa0_neck.unwrap_or(f64::NAN));
        s.kappa1_rescaled.push(tau * r.kappa1_neck);
        s.sigma_fl_rescaled.push(tau * tau * r.sigma_fl_max);
        s.neck_ratio.push(r.vmin[0] / (2.0 * (n1 - 1.0) * tau).sqrt());
    }
    let snaps: Vec<&FlowStateS1> = snapshots.iter().filter(|x| x.t >= t0 && x.t <= t1).collect();
    let profile = profile_check(&snaps, t_hat, cfg.profile_delta)?;
    Ok(TypeIReport { decade: s, profile })
}

/// Run-fitted constants of the a priori estimates over a window of records.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FittedConstants {
    /// `min P^{2/n₁}/(T̂−t)`
    pub c4: f64,
    /// `max F·(T̂−t)`
    pub c_f: f64,
    /// `max |κ₀| v₁² |log v₁|` at the neck
    pub c_kappa0: f64,
    /// `min v_min²/(T̂−t)` and `max v_min²/(T̂−t)`
    pub vmin_lower: f64,
    pub vmin_upper: f64,
}

pub fn fitted_constants(records: &[MonitorRecord], idx: &[usize], fibers: &[FiberSpec], t_hat: f64) -> FittedConstants {
    let n1 = fibers[0].nf();
    let mut c = FittedConstants {
        c4: f64::INFINITY,
        c_f: 0.0,
        c_kappa0: 0.0,
        vmin_lower: f64::INFINITY,
        vmin_upper: 0.0,
    };
    for &i in idx {
        let r = &records[i];
        let tau = t_hat - r.t;
        if tau <= 0.0 {
            continue;
        }
        c.c4 = c.c4.min(r.p_min.powf(2.0 / n1) / tau);
        c.c_f = c.c_f.max(r.f_max * tau);
        let v1 = r.vmin[0];
        if let Some(k0) = r.kappa0_neck {
            c.c_kappa0 = c.c_kappa0.max(k0.abs() * v1 * v1 * v1.ln().abs());
        }
        let q = min_of(r.vmin.iter().copied()).powi(2) / tau;
        c.vmin_lower = c.vmin_lower.min(q);
        c.vmin_upper = c.vmin_upper.max(q);
    }
    c
}

/// `|a − b| ≤ rel·max(|a|,|b|) + floor`
pub fn stable_within(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}

/// Weights of the two terms of the Hessian evolution that are open to question.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HessianForm {
    /// Coefficient of `Σ_b n_b v_b⁻² ⟨∇v_b,∇vₐ⟩⟨∇̌²v_b,∇̌²vₐ⟩`, entering with a minus sign.
    pub cross_coeff: f64,
    /// Sign of the `−2⟨∇²vₐ, ∇²Zₐ⟩` reaction term.
    pub z_sign: f64,
}

impl HessianForm {
    /// Both the A and B contractions contribute, giving 8.
    pub const CORRECTED: HessianForm = HessianForm { cross_coeff: 8.0, z_sign: 1.0 };
    /// The coefficient 4 as it appears in the printed identity.
    pub const AS_PRINTED: HessianForm = HessianForm { cross_coeff: 4.0, z_sign: 1.0 };
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianResidual {
    pub t: Vec<f64>,
    pub linf: Vec<f64>,
    /// `max |∂ₜχₐ|` at the same times, for scale.
    pub scale: Vec<f64>,
}

impl HessianResidual {
    pub fn norm(&self) -> f64 {
        max_of(self.linf.iter().copied())
    }
}

/// Right-hand side of the χₐ evolution on S¹ with arclength derivatives.
pub fn chi_rhs_s1(state: &FlowStateS1, a: usize, form: HessianForm) -> (Vec<f64>, Vec<f64>) {
    let m = state.grid.m;
    let fibers = &state.fibers;
    let d = state.s_derivs();
    let v = &state.v;
    let nb: Vec<f64> = fibers.iter().map(|f| f.nf()).collect();
    let (vs, vss) = (&d.v_s, &d.v_ss);
    let hess_coeff = |phi_s: &[f64], b: usize, i: usize| v[b][i].recip() * vs[b][i] * phi_s[i];
    let chi: Vec<f64> = (0..m)
        .map(|i| {
            vss[a][i].powi(2) + (0..fibers.len()).map(|b| nb[b] * hess_coeff(&vs[a], b, i).powi(2)).sum::<f64>()
        })
        .collect();
    let chi_s = state.d_s(&chi);
    let chi_ss = state.d_ss(&chi);
    let lap_chi: Vec<f64> = (0..m)
        .map(|i| chi_ss[i] + (0..fibers.len()).map(|b| nb[b] * vs[b][i] * chi_s[i] / v[b][i]).sum::<f64>())
        .collect();
    let vsss = state.d_s(&vss[a]);
    let bfield: Vec<Vec<f64>> = (0..fibers.len())
        .map(|b| (0..m).map(|i| hess_coeff(&vs[a], b, i)).collect())
        .collect();
    let bfield_s: Vec<Vec<f64>> = bfield.iter().map(|x| state.d_s(x)).collect();
    let third: Vec<f64> = (0..m)
        .map(|i| {
            let mut t = vsss[i].powi(2);
            for b in 0..fibers.len() {
                let w = vs[b][i] / v[b][i];
                t += nb[b] * (bfield_s[b][i].powi(2) + 2.0 * (vss[a][i] - bfield[b][i]).powi(2) * w * w);
            }
            t
        })
        .collect();
    let z: Vec<f64> = (0..m).map(|i| (fibers[a].mu + vs[a][i].powi(2)) / v[a][i]).collect();
    let z_s = state.d_s(&z);
    let z_ss = state.d_ss(&z);
    let hess_inner: Vec<f64> = (0..m)
        .map(|i| {
            vss[a][i] * z_ss[i]
                + (0..fibers.len()).map(|b| nb[b] * hess_coeff(&vs[a], b, i) * hess_coeff(&z_s, b, i)).sum::<f64>()
        })
        .collect();
    let rhs = (0..m)
        .map(|i| {
            let ip = |b: usize| vs[b][i] * vs[a][i];
            let mut r = lap_chi[i] - 2.0 * third[i] - 2.0 * form.z_sign * hess_inner[i];
            for b in 0..fibers.len() {
                let vb = v[b][i];
                r -= form.cross_coeff * nb[b] / (vb * vb) * ip(b) * vss[b][i] * vss[a][i];
                r += 4.0 * nb[b] * (fibers[b].mu - (nb[b] - 1.0) * vs[b][i].powi(2)) / vb.powi(4) * ip(b).powi(2);
                for c in 0..fibers.len() {
                    if c != b {
                        let vc = v[c][i];
                        r -= 4.0 * nb[b] * nb[c] / (vb * vb * vc * vc) * (vs[b][i] * vs[c][i]) * ip(b) * ip(c);
                    }
                }
            }
            r
        })
        .collect();
    (chi, rhs)
}

/// Three-point derivative at the middle of possibly unequal steps.
fn ddt(f0: f64, f1: f64, f2: f64, h1: f64, h2: f64) -> f64 {
    -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2
}

/// Residual of the χₐ evolution at every interior snapshot of a run of consecutive states.
pub fn verify_hessian_evolution(snapshots: &[FlowStateS1], a: usize, form: HessianForm) -> Result<HessianResidual> {
    if snapshots.len() < 3 {
        return Err(Error::InsufficientData("need three consecutive snapshots".into()));
    }
    if a >= snapshots[0].fibers.len() {
        return Err(Error::DimensionMismatch(format!("no fiber {a}")));
    }
    let evals: Vec<(Vec<f64>, Vec<f64>)> = snapshots.iter().map(|s| chi_rhs_s1(s, a, form)).collect();
    let mut out = HessianResidual { t: vec![], linf: vec![], scale: vec![] };
    for k in 1..snapshots.len() - 1 {
        let (h1, h2) = (snapshots[k].t - snapshots[k - 1].t, snapshots[k + 1].t - snapshots[k].t);
        let (c0, c1, c2) = (&evals[k - 1].0, &evals[k].0, &evals[k + 1].0);
        let rhs = &evals[k].1;
        let mut linf = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..c1.len() {
            let dt = ddt(c0[i], c1[i], c2[i], h1, h2);
            linf = linf.max((dt - rhs[i]).abs());
            scale = scale.max(dt.abs());
        }
        out.t.push(snapshots[k].t);
        out.linf.push(linf);
        out.scale.push(scale);
    }
    Ok(out)
}
