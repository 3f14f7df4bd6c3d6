//! Mode dispatch and artifact emission.

use std::f64::consts::SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use warpflow::flow_surface::surface_bounds;
use warpflow::monitors::{maximum_principle_sweep, resolved_decade, type_i_and_rescale};
use warpflow::soliton::{classify_sweep, shoot, Classification, SolitonShot};
use warpflow::{
    fd_oracle, run_s1, run_surface, FiberSpec, FlowStateS1, FlowStateSurface, MonitorConfig, MonitorRecord,
    Profile, S1Config, SurfaceConfig,
};

use crate::config::{default_sweep, ConfigError, Mode, MonitorSection, RunConfig, RunSection};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] warpflow::Error),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error("missing artifacts: {0}")]
    MissingArtifacts(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::MissingArtifacts(_) => EXIT_CONFIG,
            RunError::Numerical(_) | RunError::Output { .. } => EXIT_NUMERICAL,
        }
    }
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub detail: String,
}

fn verdict(criterion: &str, name: &str, pass: bool, value: f64, detail: String) -> Verdict {
    Verdict {
        criterion: criterion.into(),
        name: name.into(),
        pass,
        value: value.is_finite().then_some(value),
        detail,
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub seed: u64,
    pub verdicts: Vec<Verdict>,
    /// Checks that could not be evaluated on this run, with the reason.
    pub skipped: Vec<String>,
    pub results: serde_json::Value,
    pub config: serde_json::Value,
}

impl Summary {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            EXIT_PASS
        } else {
            EXIT_ASSERTION
        }
    }
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Output { path: path.to_owned(), message: e.to_string() }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| out_err(path, e))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| out_err(path, e))
}

fn cell(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| out_err(path, e))?;
    w.write_record(header).map_err(|e| out_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

fn per_fiber(name: &str, k: usize) -> impl Iterator<Item = String> + '_ {
    (1..=k).map(move |a| format!("{name}_{a}"))
}

fn write_records(path: &Path, records: &[MonitorRecord], k: usize) -> Result<(), RunError> {
    let mut header: Vec<String> = ["t", "step", "dt"].map(String::from).to_vec();
    for name in ["vmin", "vmax", "grad_sq_max", "chi_max", "z_max"] {
        header.extend(per_fiber(name, k));
    }
    header.extend(
        [
            "q_min", "p_min", "qcal_min", "pcal_min", "b_const", "f_max", "l_min_on_omega", "omega_extent",
            "omega_components", "rm_max", "kappa0_neck", "kappa1_neck", "sigma_fl_max", "neck_index",
            "neck_resolution", "typei_ratio", "vmin_sq_over_tt", "kappa0_rescaled", "kappa1_rescaled",
            "sigma_fl_rescaled",
        ]
        .map(String::from),
    );
    let rows = records.iter().map(|r| {
        let mut row = vec![cell(r.t), r.step.to_string(), cell(r.dt)];
        for v in [&r.vmin, &r.vmax, &r.grad_sq_max, &r.chi_max, &r.z_max] {
            row.extend(v.iter().copied().map(cell));
        }
        row.extend([
            cell(r.q_min),
            cell(r.p_min),
            opt(r.qcal_min),
            opt(r.pcal_min),
            cell(r.b_const),
            cell(r.f_max),
            opt(r.l_min_on_omega),
            opt(r.omega_extent),
            r.omega_components.map(|c| c.to_string()).unwrap_or_default(),
            cell(r.rm_max),
            opt(r.kappa0_neck),
            cell(r.kappa1_neck),
            cell(r.sigma_fl_max),
            r.neck_index.to_string(),
            cell(r.neck_resolution),
            opt(r.typei_ratio),
            opt(r.vmin_sq_over_tt),
            opt(r.kappa0_rescaled),
            opt(r.kappa1_rescaled),
            opt(r.sigma_fl_rescaled),
        ]);
        row
    });
    write_csv(path, &header, rows)
}

fn snapshot_index(dir: &Path, times: &[f64]) -> Result<(), RunError> {
    let rows = times
        .iter()
        .enumerate()
        .map(|(i, t)| vec![i.to_string(), cell(*t), format!("snapshot_{i:05}.csv")]);
    write_csv(&dir.join("index.csv"), &["index", "t", "file"].map(String::from), rows)
}

fn write_s1_snapshots(dir: &Path, snaps: &[FlowStateS1]) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
    for (i, s) in snaps.iter().enumerate() {
        let k = s.v.len();
        let mut header: Vec<String> = ["theta", "s", "phi"].map(String::from).to_vec();
        header.extend(per_fiber("v", k));
        let (theta, arc) = (s.theta_grid(), s.arclength());
        let rows = (0..theta.len()).map(|j| {
            let mut row = vec![cell(theta[j]), cell(arc[j]), cell(s.phi[j])];
            row.extend(s.v.iter().map(|v| cell(v[j])));
            row
        });
        write_csv(&dir.join(format!("snapshot_{i:05}.csv")), &header, rows)?;
    }
    snapshot_index(dir, &snaps.iter().map(|s| s.t).collect::<Vec<_>>())
}

fn write_surface_snapshots(dir: &Path, snaps: &[FlowStateSurface]) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
    for (i, s) in snaps.iter().enumerate() {
        let k = s.w.len();
        let mut header: Vec<String> = ["x", "y", "g11", "g12", "g22"].map(String::from).to_vec();
        header.extend(per_fiber("w", k));
        let rows = (0..s.grid.len()).map(|j| {
            let (x, y) = s.grid.coord(j);
            let mut row = vec![cell(x), cell(y), cell(s.g11[j]), cell(s.g12[j]), cell(s.g22[j])];
            row.extend(s.w.iter().map(|w| cell(w[j])));
            row
        });
        write_csv(&dir.join(format!("snapshot_{i:05}.csv")), &header, rows)?;
    }
    snapshot_index(dir, &snaps.iter().map(|s| s.t).collect::<Vec<_>>())
}

fn monitor_config(sec: &MonitorSection, fibers: usize) -> MonitorConfig {
    let mut m = MonitorConfig::for_fibers(fibers);
    if let Some(x) = sec.delta_omega {
        m.delta_omega = x;
    }
    if let Some(x) = sec.beta {
        m.beta = x;
    }
    if let Some(x) = sec.min_neck_resolution {
        m.min_neck_resolution = x;
    }
    if let Some(x) = sec.profile_delta {
        m.profile_delta = x;
    }
    if let Some(f) = &sec.flat {
        m.flat = f.clone();
    }
    m
}

fn fibers_and_profiles(cfg: &RunConfig) -> (Vec<FiberSpec>, Vec<Profile>) {
    cfg.fibers.iter().map(|f| (f.spec, f.profile.clone())).unzip()
}

fn max_principle_verdict(records: &[MonitorRecord], fibers: &[FiberSpec], m: &MonitorConfig) -> Verdict {
    let viol = maximum_principle_sweep(records, fibers, m);
    let detail = match viol.first() {
        None => format!("no violations over {} recorded steps", records.len().saturating_sub(1)),
        Some((step, a, kind)) => format!("{} violations, first at step {step} on fiber {}: {kind:?}", viol.len(), a + 1),
    };
    verdict("4", "maximum principle", viol.is_empty(), viol.len() as f64, detail)
}

fn fold_min(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::INFINITY, f64::min)
}

fn fold_max(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn run_s1_mode(cfg: &RunConfig, out: &Path) -> Result<Summary, RunError> {
    let (fibers, profiles) = fibers_and_profiles(cfg);
    let k = fibers.len();
    let mut s = S1Config::new(cfg.grid.m.unwrap(), fibers.clone(), profiles);
    let RunSection { t_max, eps_stop_rel, c_cfl, c_rxn, fixed_dt, max_steps, snapshot_every, .. } = cfg.run.clone();
    s.t_max = t_max.unwrap_or(s.t_max);
    s.eps_stop_rel = eps_stop_rel.unwrap_or(s.eps_stop_rel);
    s.c_cfl = c_cfl.unwrap_or(s.c_cfl);
    s.c_rxn = c_rxn.unwrap_or(s.c_rxn);
    s.fixed_dt = fixed_dt;
    s.max_steps = max_steps.unwrap_or(s.max_steps);
    s.snapshot_every = snapshot_every.unwrap_or(s.snapshot_every);
    s.checkpoints = cfg.run.checkpoints.clone();
    s.monitors = monitor_config(&cfg.monitors, k);

    let tr = run_s1(&s)?;
    write_records(&out.join("monitors.csv"), &tr.records, k)?;
    write_s1_snapshots(&out.join("snapshots"), &tr.snapshots)?;

    let mut verdicts = vec![max_principle_verdict(&tr.records, &fibers, &s.monitors)];
    let mut skipped = Vec::new();
    if k >= 2 {
        let v = fold_min(tr.records.iter().flat_map(|r| r.vmin[1..].iter().copied()));
        verdicts.push(verdict("3a", "non-pinching fibers stay positive", v > 0.0, v, format!("min v over fibers 2..{k} = {v:.6}")));
    }
    match (&tr.t_hat, k >= 2) {
        (None, _) => skipped.push("3b, 3c, 9: no singular-time fit".into()),
        (Some(_), false) => skipped.push("3b, 3c, 9: need at least two fibers".into()),
        (Some(fit), true) => match type_i_and_rescale(&tr.records, &tr.snapshots, &fibers, fit.t_hat, &s.monitors) {
            Err(e) => skipped.push(format!("3b, 3c, 9: {e}")),
            Ok(rep) => {
                let d = &rep.decade;
                let (lo, hi) = (fold_min(d.typei_ratio.iter().copied()), fold_max(d.typei_ratio.iter().copied()));
                verdicts.push(verdict(
                    "3b",
                    "Type-I ratio",
                    lo >= 0.4 && hi <= 10.0,
                    hi,
                    format!("(T̂−t)·max|Rm| in [{lo:.4}, {hi:.4}] over {} records, required within [0.4, 10]", d.t.len()),
                ));
                let (lo, hi) = (fold_min(d.neck_ratio.iter().copied()), fold_max(d.neck_ratio.iter().copied()));
                verdicts.push(verdict(
                    "3c",
                    "neck radius ratio",
                    lo >= 0.95 && hi <= 1.05,
                    (lo - 1.0).abs().max((hi - 1.0).abs()),
                    format!("v_neck/√(2(T̂−t)) in [{lo:.4}, {hi:.4}], required within [0.95, 1.05]"),
                ));
                let s9: Vec<f64> = tr.records.iter().filter_map(|r| r.sigma_fl_rescaled).collect();
                let end = resolved_decade(&tr.records, fit.t_hat, s.monitors.min_neck_resolution)?;
                let last = end.last().and_then(|&i| tr.records[i].sigma_fl_rescaled);
                if let (Some(&first), Some(last)) = (s9.first(), last) {
                    let dec = s9.windows(2).filter(|w| w[1] <= w[0]).count();
                    let trend = dec as f64 >= 0.9 * (s9.len() - 1) as f64;
                    verdicts.push(verdict(
                        "9",
                        "rescaled flatness decays",
                        trend && last <= 0.05 * first,
                        last / first,
                        format!("decreasing on {dec}/{} steps, {first:.3e} → {last:.3e}", s9.len() - 1),
                    ));
                } else {
                    skipped.push("9: no rescaled flatness samples".into());
                }
            }
        },
    }

    let last = tr.records.last();
    let results = json!({
        "termination": tr.termination,
        "t_final": last.map(|r| r.t),
        "steps": last.map(|r| r.step),
        "eps_stop": tr.eps_stop,
        "t_hat": tr.t_hat,
        "assumptions": tr.assumptions,
        "records": tr.records.len(),
        "snapshots": tr.snapshots.len(),
    });
    Ok(summary(cfg, verdicts, skipped, results))
}

fn run_surface_mode(cfg: &RunConfig, out: &Path) -> Result<Summary, RunError> {
    let (fibers, profiles) = fibers_and_profiles(cfg);
    let k = fibers.len();
    let mut s = SurfaceConfig::new(cfg.grid.mx.unwrap(), cfg.grid.my.unwrap(), fibers.clone(), profiles);
    let r = &cfg.run;
    s.metric = cfg.metric.clone();
    s.t_max = r.t_max.unwrap_or(s.t_max);
    s.eps_stop_rel = r.eps_stop_rel.unwrap_or(s.eps_stop_rel);
    s.c_cfl = r.c_cfl.unwrap_or(s.c_cfl);
    s.c_rxn = r.c_rxn.unwrap_or(s.c_rxn);
    s.fixed_dt = r.fixed_dt;
    s.max_steps = r.max_steps.unwrap_or(s.max_steps);
    s.snapshot_every = r.snapshot_every.unwrap_or(s.snapshot_every);
    s.record_every = r.record_every.unwrap_or(s.record_every);
    s.checkpoints = r.checkpoints.clone();
    s.eta = r.eta;
    s.monitors = monitor_config(&cfg.monitors, k);

    let tr = run_surface(&s)?;
    write_records(&out.join("monitors.csv"), &tr.records, k)?;
    let header = [
        "t", "r_check_min", "r_check_max", "p_max", "f_upper_max", "f_lower_min", "area", "gauss_bonnet", "area_rate",
        "c0_needed", "c1_needed",
    ]
    .map(String::from);
    let rows = tr.surface.iter().map(|m| {
        [
            m.t, m.r_check_min, m.r_check_max, m.p_max, m.f_upper_max, m.f_lower_min, m.area, m.gauss_bonnet, m.area_rate,
            m.c0_needed, m.c1_needed,
        ]
        .map(cell)
        .to_vec()
    });
    write_csv(&out.join("surface.csv"), &header, rows)?;
    write_surface_snapshots(&out.join("snapshots"), &tr.snapshots)?;

    let gb = fold_max(tr.surface.iter().map(|m| m.gauss_bonnet.abs()));
    let verdicts = vec![
        max_principle_verdict(&tr.records, &fibers, &s.monitors),
        verdict(
            "7b",
            "Gauss-Bonnet",
            gb <= 1e-6,
            gb,
            format!("max |∫Ř dA| = {gb:.3e} over {} samples, required ≤ 1e-6", tr.surface.len()),
        ),
    ];
    let last = tr.surface.last();
    let results = json!({
        "termination": tr.termination,
        "t_final": last.map(|m| m.t),
        "eps_stop": tr.eps_stop,
        "bounds": surface_bounds(&tr.surface),
        "f_upper_max0": tr.f_upper_max0,
        "eta_tame": tr.eta_tame,
        "min_area_rate": fold_min(tr.surface.iter().map(|m| m.area_rate)),
        "records": tr.records.len(),
        "snapshots": tr.snapshots.len(),
    });
    Ok(summary(cfg, verdicts, vec!["7a, 7c: need paired or dedicated runs, see the acceptance test target".into()], results))
}

fn write_profile(path: &Path, s: &SolitonShot) -> Result<(), RunError> {
    let header = ["r", "rho", "rho_p", "rho_pp", "v", "v_p", "v_pp", "f", "f_p", "f_pp"].map(String::from);
    let rows = (0..s.r.len()).map(|i| {
        [s.r[i], s.rho[i], s.rho_p[i], s.rho_pp[i], s.v[i], s.v_p[i], s.v_pp[i], s.f[i], s.f_p[i], s.f_pp[i]]
            .map(cell)
            .to_vec()
    });
    write_csv(path, &header, rows)
}

fn is_cylinder_value(v0: f64) -> bool {
    (v0 - SQRT_2).abs() <= 1e-6
}

fn soliton_mode(cfg: &RunConfig, out: &Path) -> Result<Summary, RunError> {
    let sec = &cfg.soliton;
    let header = ["v0", "classification", "r_end", "lemma_residual", "stop_reason"].map(String::from);
    let note = "classification by ODE shooting is numerical evidence, not a proof";
    let mut verdicts = Vec::new();
    let results;
    if sec.sweep {
        let v0s = if sec.v0.is_empty() { default_sweep() } else { sec.v0.clone() };
        let rep = classify_sweep(&v0s, sec.r_max)?;
        let rows = rep.entries.iter().map(|e| {
            vec![
                cell(e.v0),
                format!("{:?}", e.classification),
                cell(e.r_end),
                cell(e.lemma_residual),
                e.stop_reason.clone().unwrap_or_default(),
            ]
        });
        write_csv(&out.join("shots.csv"), &header, rows)?;
        verdicts.push(verdict(
            "8b",
            "no cylinder off the cylinder value",
            rep.unexpected_cylinders == 0,
            rep.unexpected_cylinders as f64,
            format!("{} shots to r = {}, {} unexpected Cylinder classifications", rep.entries.len(), rep.r_max, rep.unexpected_cylinders),
        ));
        results = json!({ "sweep": rep, "note": note });
    } else {
        let mut shots = Vec::new();
        for (i, &v0) in sec.v0.iter().enumerate() {
            let s = shoot(v0, sec.r_max)?;
            write_profile(&out.join(format!("profile_{i:03}.csv")), &s)?;
            shots.push(s);
        }
        let rows = shots.iter().map(|s| {
            vec![
                cell(s.v0),
                format!("{:?}", s.classification),
                cell(s.r_end),
                cell(s.residuals.lemma_max()),
                s.stop_reason.clone().unwrap_or_default(),
            ]
        });
        write_csv(&out.join("shots.csv"), &header, rows)?;
        for s in shots.iter().filter(|s| is_cylinder_value(s.v0)) {
            let worst = s.residuals.max().max(s.normalization_residual);
            verdicts.push(verdict(
                "8a",
                "cylinder identities",
                s.classification == Classification::Cylinder && worst <= 1e-8,
                worst,
                format!("{:?} to r = {:.3}, max residual {worst:.3e}, required ≤ 1e-8", s.classification, s.r_end),
            ));
            let lemma = s.residuals.lemma_max();
            verdicts.push(verdict("8c", "lemma identities on the cylinder", lemma <= 1e-8, lemma, format!("{lemma:.3e}, required ≤ 1e-8")));
        }
        let off: Vec<&SolitonShot> = shots.iter().filter(|s| !is_cylinder_value(s.v0)).collect();
        if !off.is_empty() {
            let bad = off.iter().filter(|s| s.classification == Classification::Cylinder).count();
            verdicts.push(verdict(
                "8b",
                "no cylinder off the cylinder value",
                bad == 0,
                bad as f64,
                format!("{} shots off v0 = √2, {bad} classified Cylinder", off.len()),
            ));
        }
        let table: Vec<_> = shots
            .iter()
            .map(|s| {
                json!({
                    "v0": s.v0,
                    "classification": s.classification,
                    "r_end": s.r_end,
                    "stop_reason": s.stop_reason,
                    "residuals": s.residuals,
                    "normalization_c": s.normalization_c,
                    "normalization_residual": s.normalization_residual,
                    "axis_rho_ratio": s.axis_rho_ratio,
                    "axis_vp_over_r": s.axis_vp_over_r,
                })
            })
            .collect();
        results = json!({ "shots": table, "note": note });
    }
    Ok(summary(cfg, verdicts, Vec::new(), results))
}

fn oracle_mode(cfg: &RunConfig, out: &Path) -> Result<Summary, RunError> {
    let fibers: Vec<FiberSpec> = if cfg.fibers.is_empty() {
        vec![FiberSpec::unit(2), FiberSpec::unit(3)]
    } else {
        cfg.fibers.iter().map(|f| f.spec).collect()
    };
    let o = &cfg.oracle;
    let rep = fd_oracle::oracle_sweep(o.base, &fibers, o.count, cfg.seed, o.h, o.tolerance)?;
    write_json(&out.join("oracle.json"), &rep)?;
    let v = verdict(
        "1",
        "curvature blocks match the finite-difference oracle",
        rep.pass,
        rep.worst,
        format!("{} samples, worst relative error {:.3e}, tolerance {:e}", rep.samples.len(), rep.worst, rep.tolerance),
    );
    let results = json!({ "base": o.base, "fibers": fibers, "samples": rep.samples.len(), "worst": rep.worst });
    Ok(summary(cfg, vec![v], Vec::new(), results))
}

fn summary(cfg: &RunConfig, verdicts: Vec<Verdict>, skipped: Vec<String>, results: serde_json::Value) -> Summary {
    Summary {
        mode: cfg.mode.name().into(),
        seed: cfg.seed,
        verdicts,
        skipped,
        results,
        config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
    }
}

/// Runs one configured mode other than `report`, writing artifacts and `summary.json` under `cfg.out`.
pub fn run_command(cfg: &RunConfig) -> Result<Summary, RunError> {
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| out_err(out, e))?;
    let summary = match cfg.mode {
        Mode::RunS1 => run_s1_mode(cfg, out)?,
        Mode::RunSurface => run_surface_mode(cfg, out)?,
        Mode::SolitonShoot => soliton_mode(cfg, out)?,
        Mode::OracleCheck => oracle_mode(cfg, out)?,
        Mode::Report => return report(out).map(|d| d.as_summary(cfg.seed)),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunVerdicts {
    pub path: String,
    pub mode: String,
    pub pass: bool,
    pub verdicts: Vec<Verdict>,
    pub skipped: Vec<String>,
}

/// Contents of `verdict.json`.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictDocument {
    pub verdict: String,
    /// `criterion (mode at path)` for every failed check.
    pub failed: Vec<String>,
    pub runs: Vec<RunVerdicts>,
}

impl VerdictDocument {
    pub fn pass(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            EXIT_PASS
        } else {
            EXIT_ASSERTION
        }
    }

    fn as_summary(&self, seed: u64) -> Summary {
        Summary {
            mode: Mode::Report.name().into(),
            seed,
            verdicts: self.runs.iter().flat_map(|r| r.verdicts.clone()).collect(),
            skipped: Vec::new(),
            results: serde_json::to_value(self).unwrap_or_default(),
            config: serde_json::Value::Null,
        }
    }
}

fn read_summary(path: &Path) -> Result<Summary, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::MissingArtifacts(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::MissingArtifacts(format!("{}: {e}", path.display())))
}

/// Aggregates `summary.json` from `dir` and its immediate subdirectories into `dir/verdict.json`.
pub fn report(dir: &Path) -> Result<VerdictDocument, RunError> {
    let mut paths = Vec::new();
    if dir.join("summary.json").is_file() {
        paths.push(dir.join("summary.json"));
    }
    if let Ok(entries) = fs::read_dir(dir) {
        let mut subs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
        subs.sort();
        paths.extend(subs.into_iter().map(|p| p.join("summary.json")).filter(|p| p.is_file()));
    }
    if paths.is_empty() {
        return Err(RunError::MissingArtifacts(format!("no summary.json in {} or its subdirectories", dir.display())));
    }
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for p in &paths {
        let s = read_summary(p)?;
        let rel = p.parent().and_then(|d| d.strip_prefix(dir).ok()).map(|d| d.display().to_string());
        let path = match rel.as_deref() {
            Some("") | None => ".".to_string(),
            Some(r) => r.to_string(),
        };
        for v in s.verdicts.iter().filter(|v| !v.pass) {
            failed.push(format!("{} {} ({} at {path})", v.criterion, v.name, s.mode));
        }
        runs.push(RunVerdicts { path, mode: s.mode.clone(), pass: s.pass(), verdicts: s.verdicts, skipped: s.skipped });
    }
    let doc = VerdictDocument { verdict: if failed.is_empty() { "PASS" } else { "FAIL" }.into(), failed, runs };
    write_json(&dir.join("verdict.json"), &doc)?;
    Ok(doc)
}
