//! Run configuration: a TOML file validated against a fixed schema.
//!
//! Validation never stops at the first problem. Every violation is collected with the
//! line it refers to, so a config with several mistakes is reported in one pass.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use toml_edit::{Document, Item, TableLike, Value};
use warpflow::{BaseKind, FiberSpec, Profile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RunS1,
    RunSurface,
    SolitonShoot,
    OracleCheck,
    Report,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::RunS1, Mode::RunSurface, Mode::SolitonShoot, Mode::OracleCheck, Mode::Report];

    pub fn name(self) -> &'static str {
        match self {
            Mode::RunS1 => "run-s1",
            Mode::RunSurface => "run-surface",
            Mode::SolitonShoot => "soliton-shoot",
            Mode::OracleCheck => "oracle-check",
            Mode::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One schema problem. `line` is 1-based and absent for problems not tied to a key.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}", format_violations(.0))]
    Schema(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    let mut s = format!("{} schema violation{}", v.len(), if v.len() == 1 { "" } else { "s" });
    for x in v {
        s.push_str("\n  ");
        s.push_str(&x.to_string());
    }
    s
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct GridSection {
    pub m: Option<usize>,
    pub mx: Option<usize>,
    pub my: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberEntry {
    pub spec: FiberSpec,
    pub profile: Profile,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSection {
    pub t_max: Option<f64>,
    pub eps_stop_rel: Option<f64>,
    pub c_cfl: Option<f64>,
    pub c_rxn: Option<f64>,
    pub fixed_dt: Option<f64>,
    pub max_steps: Option<usize>,
    pub snapshot_every: Option<usize>,
    pub record_every: Option<usize>,
    pub checkpoints: Vec<f64>,
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MonitorSection {
    pub delta_omega: Option<f64>,
    pub beta: Option<f64>,
    pub min_neck_resolution: Option<f64>,
    pub profile_delta: Option<f64>,
    pub flat: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolitonSection {
    pub v0: Vec<f64>,
    pub sweep: bool,
    pub r_max: f64,
}

impl Default for SolitonSection {
    fn default() -> Self {
        SolitonSection { v0: Vec::new(), sweep: false, r_max: 20.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSection {
    pub base: BaseKind,
    pub count: usize,
    pub h: f64,
    pub tolerance: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { base: BaseKind::CircleS1, count: 100, h: 1e-3, tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    pub grid: GridSection,
    pub fibers: Vec<FiberEntry>,
    pub metric: Option<[Profile; 3]>,
    pub run: RunSection,
    pub monitors: MonitorSection,
    pub soliton: SolitonSection,
    pub oracle: OracleSection,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub v0: Vec<f64>,
    pub sweep: bool,
    pub r_max: Option<f64>,
}

/// Default sweep when `soliton.sweep = true` and no `v0` list is given.
pub fn default_sweep() -> Vec<f64> {
    (0..=12).map(|i| 0.6 + 0.2 * i as f64).collect()
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse_str(&text, overrides)
}

pub fn parse_str(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let doc = Document::parse(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_owned(),
    })?;
    let mut cx = Cx { src: text, errs: Vec::new() };
    let root = doc.as_table();
    cx.keys(root, "", &["mode", "seed", "out", "grid", "fiber", "metric", "run", "monitors", "soliton", "oracle"]);

    let file_mode = cx.string(root, "", "mode").and_then(|(s, span)| match Mode::parse(&s) {
        Some(m) => Some(m),
        None => {
            let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
            cx.err(span, format!("mode \"{s}\" is not one of {}", names.join(", ")));
            None
        }
    });
    let mode = overrides.mode.or(file_mode);
    if mode.is_none() {
        cx.err(None, "mode is required (config key `mode` or --mode)".into());
    }
    let seed = overrides.seed.or_else(|| cx.uint(root, "", "seed").map(|v| v as u64)).unwrap_or(0);
    let out = overrides
        .out
        .clone()
        .or_else(|| cx.string(root, "", "out").map(|(s, _)| PathBuf::from(s)))
        .unwrap_or_else(|| PathBuf::from("out"));

    let grid = cx.table(root, "grid").map_or_else(GridSection::default, |t| cx.grid(t));
    let fibers = cx.fibers(root);
    let metric = cx.table(root, "metric").and_then(|t| cx.metric(t));
    let run = cx.table(root, "run").map_or_else(RunSection::default, |t| cx.run(t));
    let monitors = cx.table(root, "monitors").map_or_else(MonitorSection::default, |t| cx.monitors(t, fibers.len()));
    let mut soliton = cx.table(root, "soliton").map_or_else(SolitonSection::default, |t| cx.soliton(t));
    let oracle = cx.table(root, "oracle").map_or_else(OracleSection::default, |t| cx.oracle(t));

    if !overrides.v0.is_empty() {
        soliton.v0 = overrides.v0.clone();
    }
    soliton.sweep |= overrides.sweep;
    if let Some(r) = overrides.r_max {
        soliton.r_max = r;
    }
    for &v in &overrides.v0 {
        if !(v > 0.0 && v.is_finite()) {
            cx.err(None, format!("--v0 {v} must be positive"));
        }
    }
    if let Some(r) = overrides.r_max {
        cx.check_r_max(r, None);
    }

    match mode {
        Some(Mode::RunS1) => {
            if !has(root, "grid", "m") {
                cx.err(None, "run-s1 requires grid.m".into());
            }
            if root.get("fiber").is_none() {
                cx.err(None, "run-s1 requires at least one [[fiber]]".into());
            }
        }
        Some(Mode::RunSurface) => {
            if !has(root, "grid", "mx") || !has(root, "grid", "my") {
                cx.err(None, "run-surface requires grid.mx and grid.my".into());
            }
            if root.get("fiber").is_none() {
                cx.err(None, "run-surface requires at least one [[fiber]]".into());
            }
        }
        Some(Mode::SolitonShoot) => {
            if soliton.v0.is_empty() && !soliton.sweep {
                cx.err(None, "soliton-shoot requires soliton.v0 (or --v0) or soliton.sweep (or --sweep)".into());
            }
        }
        Some(Mode::OracleCheck) | Some(Mode::Report) | None => {}
    }

    if !cx.errs.is_empty() {
        return Err(ConfigError::Schema(cx.errs));
    }
    Ok(RunConfig { mode: mode.unwrap(), seed, out, grid, fibers, metric, run, monitors, soliton, oracle })
}

fn has(root: &dyn TableLike, table: &str, key: &str) -> bool {
    root.get(table).and_then(|t| t.as_table_like()).is_some_and(|t| t.get(key).is_some())
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

struct Cx<'s> {
    src: &'s str,
    errs: Vec<Violation>,
}

impl Cx<'_> {
    fn err(&mut self, span: Option<Range<usize>>, message: String) {
        let line = span.map(|s| line_of(self.src, s.start));
        self.errs.push(Violation { line, message });
    }

    fn keys(&mut self, t: &dyn TableLike, path: &str, allowed: &[&str]) {
        for (k, _) in t.iter() {
            if !allowed.contains(&k) {
                let span = t.get_key_value(k).and_then(|(key, _)| key.span());
                self.err(span, format!("unknown key `{}`", join(path, k)));
            }
        }
    }

    fn item<'t>(&self, t: &'t dyn TableLike, key: &str) -> Option<(&'t Item, Option<Range<usize>>)> {
        t.get_key_value(key).map(|(k, v)| (v, v.span().or_else(|| k.span())))
    }

    fn table<'t>(&mut self, t: &'t dyn TableLike, key: &str) -> Option<&'t dyn TableLike> {
        let (item, span) = self.item(t, key)?;
        match item.as_table_like() {
            Some(tl) => Some(tl),
            None => {
                self.err(span, format!("`{key}` must be a table"));
                None
            }
        }
    }

    fn value<'t>(&mut self, t: &'t dyn TableLike, path: &str, key: &str, what: &str) -> Option<(&'t Value, Option<Range<usize>>)> {
        let (item, span) = self.item(t, key)?;
        match item.as_value() {
            Some(v) => Some((v, span)),
            None => {
                self.err(span, format!("`{}` must be {what}", join(path, key)));
                None
            }
        }
    }

    fn float(&mut self, t: &dyn TableLike, path: &str, key: &str) -> Option<f64> {
        let (v, span) = self.value(t, path, key, "a number")?;
        match number(v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(span, format!("`{}` must be a finite number", join(path, key)));
                None
            }
        }
    }

    /// A number that must satisfy `ok`; `rule` names the constraint in the message.
    fn float_where(&mut self, t: &dyn TableLike, path: &str, key: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Option<f64> {
        let x = self.float(t, path, key)?;
        if ok(x) {
            Some(x)
        } else {
            let span = self.item(t, key).and_then(|(_, s)| s);
            self.err(span, format!("{} = {x} violates {rule}", join(path, key)));
            None
        }
    }

    fn uint(&mut self, t: &dyn TableLike, path: &str, key: &str) -> Option<usize> {
        let (v, span) = self.value(t, path, key, "a non-negative integer")?;
        match v.as_integer() {
            Some(i) if i >= 0 => Some(i as usize),
            _ => {
                self.err(span, format!("`{}` must be a non-negative integer", join(path, key)));
                None
            }
        }
    }

    fn uint_min(&mut self, t: &dyn TableLike, path: &str, key: &str, min: usize) -> Option<usize> {
        let x = self.uint(t, path, key)?;
        if x >= min {
            Some(x)
        } else {
            let span = self.item(t, key).and_then(|(_, s)| s);
            self.err(span, format!("{} = {x} violates ≥ {min}", join(path, key)));
            None
        }
    }

    fn boolean(&mut self, t: &dyn TableLike, path: &str, key: &str) -> Option<bool> {
        let (v, span) = self.value(t, path, key, "a boolean")?;
        match v.as_bool() {
            Some(b) => Some(b),
            None => {
                self.err(span, format!("`{}` must be a boolean", join(path, key)));
                None
            }
        }
    }

    fn string(&mut self, t: &dyn TableLike, path: &str, key: &str) -> Option<(String, Option<Range<usize>>)> {
        let (v, span) = self.value(t, path, key, "a string")?;
        match v.as_str() {
            Some(s) => Some((s.to_owned(), span)),
            None => {
                self.err(span, format!("`{}` must be a string", join(path, key)));
                None
            }
        }
    }

    fn floats(&mut self, t: &dyn TableLike, path: &str, key: &str) -> Option<Vec<f64>> {
        let (v, span) = self.value(t, path, key, "an array of numbers")?;
        let parsed: Option<Vec<f64>> = v
            .as_array()
            .and_then(|a| a.iter().map(|x| number(x).filter(|x| x.is_finite())).collect());
        if parsed.is_none() {
            self.err(span, format!("`{}` must be an array of finite numbers", join(path, key)));
        }
        parsed
    }

    fn uints(&mut self, t: &dyn TableLike, path: &str, key: &str) -> Option<Vec<usize>> {
        let (v, span) = self.value(t, path, key, "an array of integers")?;
        let parsed: Option<Vec<usize>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_integer().filter(|&i| i >= 0).map(|i| i as usize))
                .collect()
        });
        if parsed.is_none() {
            self.err(span, format!("`{}` must be an array of non-negative integers", join(path, key)));
        }
        parsed
    }

    fn grid(&mut self, t: &dyn TableLike) -> GridSection {
        self.keys(t, "grid", &["m", "mx", "my"]);
        GridSection {
            m: self.uint_min(t, "grid", "m", 16),
            mx: self.uint_min(t, "grid", "mx", 16),
            my: self.uint_min(t, "grid", "my", 16),
        }
    }

    fn fibers(&mut self, root: &dyn TableLike) -> Vec<FiberEntry> {
        let Some((item, span)) = self.item(root, "fiber") else {
            return Vec::new();
        };
        let Some(arr) = item.as_array_of_tables() else {
            self.err(span, "fiber entries must be written as [[fiber]] tables".into());
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, t) in arr.iter().enumerate() {
            let path = format!("fiber[{}]", i + 1);
            self.keys(t, &path, &["n", "mu", "family", "a", "b", "k"]);
            let n = self.uint(t, &path, "n");
            if n.is_none() && t.get("n").is_none() {
                self.err(t.span(), format!("{path}.n is required"));
            }
            let n = n.filter(|&n| {
                if n < 2 {
                    let span = self.item(t, "n").and_then(|(_, s)| s);
                    self.err(span, format!("{path}.n = {n} violates n_a ≥ 2"));
                }
                n >= 2
            });
            let mu = self.float_where(t, &path, "mu", |x| x >= 0.0, "mu_a ≥ 0");
            let mu_given = t.get("mu").is_some();
            let profile = self.profile(t, &path, t.span());
            if let (Some(n), Some(profile)) = (n, profile) {
                if mu_given && mu.is_none() {
                    continue;
                }
                let spec = FiberSpec { n, mu: mu.unwrap_or((n - 1) as f64) };
                out.push(FiberEntry { spec, profile });
            }
        }
        out
    }

    /// `family` plus parameters; the profile must stay positive.
    fn profile(&mut self, t: &dyn TableLike, path: &str, span: Option<Range<usize>>) -> Option<Profile> {
        let (family, fspan) = match self.string(t, path, "family") {
            Some(f) => f,
            None => {
                if t.get("family").is_none() {
                    self.err(span.clone(), format!("{path}.family is required"));
                }
                return None;
            }
        };
        let a = self.float(t, path, "a");
        if a.is_none() && t.get("a").is_none() {
            self.err(span, format!("{path}.a is required"));
        }
        let b = if t.get("b").is_some() { self.float(t, path, "b") } else { Some(0.0) };
        let k = match self.floats(t, path, "k") {
            Some(k) if k.len() == 2 => Some([k[0], k[1]]),
            Some(k) if k.len() == 1 => Some([k[0], 0.0]),
            Some(_) => {
                let s = self.item(t, "k").and_then(|(_, s)| s);
                self.err(s, format!("{path}.k must have one or two entries"));
                None
            }
            None if t.get("k").is_none() => Some([1.0, 0.0]),
            None => None,
        };
        let (a, b, k) = (a?, b?, k?);
        let profile = match family.as_str() {
            "constant" => Profile::Constant(a),
            "cosine" => Profile::Cosine { a, b, k },
            "sine" => Profile::Sine { a, b, k },
            "sincos" => Profile::SinCos { a, b, k },
            other => {
                self.err(fspan, format!("{path}.family \"{other}\" is not one of constant, cosine, sine, sincos"));
                return None;
            }
        };
        let lower = if matches!(profile, Profile::Constant(_)) { a } else { a - b.abs() };
        if lower <= 0.0 {
            let s = self.item(t, "a").and_then(|(_, s)| s);
            self.err(s, format!("{path} profile has minimum {lower} (must stay positive)"));
            return None;
        }
        Some(profile)
    }

    fn metric(&mut self, t: &dyn TableLike) -> Option<[Profile; 3]> {
        self.keys(t, "metric", &["g11", "g12", "g22"]);
        let get = |cx: &mut Self, key: &str, positive: bool| -> Option<Profile> {
            let path = format!("metric.{key}");
            let sub = cx.table(t, key)?;
            cx.keys(sub, &path, &["family", "a", "b", "k"]);
            if positive {
                cx.profile(sub, &path, None)
            } else {
                // Off-diagonal entry: sign is free, so only the family and numbers are checked.
                let (family, fspan) = cx.string(sub, &path, "family")?;
                let a = cx.float(sub, &path, "a").unwrap_or(0.0);
                let b = if sub.get("b").is_some() { cx.float(sub, &path, "b")? } else { 0.0 };
                let k = cx.floats(sub, &path, "k").map_or([1.0, 0.0], |k| [k[0], *k.get(1).unwrap_or(&0.0)]);
                match family.as_str() {
                    "constant" => Some(Profile::Constant(a)),
                    "cosine" => Some(Profile::Cosine { a, b, k }),
                    "sine" => Some(Profile::Sine { a, b, k }),
                    "sincos" => Some(Profile::SinCos { a, b, k }),
                    other => {
                        cx.err(fspan, format!("{path}.family \"{other}\" is not one of constant, cosine, sine, sincos"));
                        None
                    }
                }
            }
        };
        let g11 = get(self, "g11", true);
        let g12 = if t.get("g12").is_some() { get(self, "g12", false) } else { Some(Profile::Constant(0.0)) };
        let g22 = get(self, "g22", true);
        for key in ["g11", "g22"] {
            if t.get(key).is_none() {
                self.err(None, format!("metric.{key} is required when [metric] is given"));
            }
        }
        Some([g11?, g12?, g22?])
    }

    fn run(&mut self, t: &dyn TableLike) -> RunSection {
        let p = "run";
        self.keys(
            t,
            p,
            &["t_max", "eps_stop_rel", "c_cfl", "c_rxn", "fixed_dt", "max_steps", "snapshot_every", "record_every", "checkpoints", "eta"],
        );
        let positive = |x: f64| x > 0.0;
        let checkpoints = self.floats(t, p, "checkpoints").unwrap_or_default();
        if checkpoints.iter().any(|&c| c <= 0.0) {
            let s = self.item(t, "checkpoints").and_then(|(_, s)| s);
            self.err(s, "run.checkpoints must all be positive".into());
        }
        RunSection {
            t_max: self.float_where(t, p, "t_max", positive, "> 0"),
            eps_stop_rel: self.float_where(t, p, "eps_stop_rel", |x| x > 0.0 && x < 1.0, "0 < ε < 1"),
            c_cfl: self.float_where(t, p, "c_cfl", positive, "> 0"),
            c_rxn: self.float_where(t, p, "c_rxn", positive, "> 0"),
            fixed_dt: self.float_where(t, p, "fixed_dt", positive, "> 0"),
            max_steps: self.uint_min(t, p, "max_steps", 1),
            snapshot_every: self.uint(t, p, "snapshot_every"),
            record_every: self.uint_min(t, p, "record_every", 1),
            checkpoints,
            eta: self.float_where(t, p, "eta", positive, "> 0"),
        }
    }

    fn monitors(&mut self, t: &dyn TableLike, fiber_count: usize) -> MonitorSection {
        let p = "monitors";
        self.keys(t, p, &["delta_omega", "beta", "min_neck_resolution", "profile_delta", "flat"]);
        let flat = self.uints(t, p, "flat");
        if let Some(f) = &flat {
            if f.iter().any(|&a| a == 0 || (fiber_count > 0 && a >= fiber_count)) {
                let s = self.item(t, "flat").and_then(|(_, s)| s);
                self.err(s, format!("monitors.flat entries must be fiber indices in 1..{fiber_count} (0 is the pinching fiber)"));
            }
        }
        MonitorSection {
            delta_omega: self.float_where(t, p, "delta_omega", |x| x > 0.0 && x < 1.0, "0 < δ < 1"),
            beta: self.float_where(t, p, "beta", |x| x > 0.0, "> 0"),
            min_neck_resolution: self.float_where(t, p, "min_neck_resolution", |x| x > 0.0, "> 0"),
            profile_delta: self.float_where(t, p, "profile_delta", |x| x > 0.0 && x < 0.5, "0 < δ < ½"),
            flat,
        }
    }

    fn check_r_max(&mut self, r: f64, span: Option<Range<usize>>) -> bool {
        let ok = r > 1e-3 && r <= 100.0;
        if !ok {
            self.err(span, format!("soliton.r_max = {r} violates 1e-3 < r_max ≤ 100"));
        }
        ok
    }

    fn soliton(&mut self, t: &dyn TableLike) -> SolitonSection {
        let p = "soliton";
        self.keys(t, p, &["v0", "sweep", "r_max"]);
        let mut s = SolitonSection::default();
        if let Some(v0) = self.floats(t, p, "v0") {
            if v0.iter().any(|&v| v <= 0.0) {
                let span = self.item(t, "v0").and_then(|(_, s)| s);
                self.err(span, "soliton.v0 entries must be positive".into());
            }
            s.v0 = v0;
        }
        if let Some(b) = self.boolean(t, p, "sweep") {
            s.sweep = b;
        }
        if let Some(r) = self.float(t, p, "r_max") {
            let span = self.item(t, "r_max").and_then(|(_, s)| s);
            if self.check_r_max(r, span) {
                s.r_max = r;
            }
        }
        s
    }

    fn oracle(&mut self, t: &dyn TableLike) -> OracleSection {
        let p = "oracle";
        self.keys(t, p, &["base", "count", "h", "tolerance"]);
        let mut o = OracleSection::default();
        if let Some((b, span)) = self.string(t, p, "base") {
            match b.as_str() {
                "s1" => o.base = BaseKind::CircleS1,
                "t2" => o.base = BaseKind::TorusT2,
                other => self.err(span, format!("oracle.base \"{other}\" is not one of s1, t2")),
            }
        }
        if let Some(c) = self.uint_min(t, p, "count", 1) {
            o.count = c;
        }
        if let Some(h) = self.float_where(t, p, "h", |x| x > 0.0 && x < 0.1, "0 < h < 0.1") {
            o.h = h;
        }
        if let Some(tol) = self.float_where(t, p, "tolerance", |x| x > 0.0, "> 0") {
            o.tolerance = tol;
        }
        o
    }
}

fn number(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}
