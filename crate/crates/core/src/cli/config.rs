//! Flat `key = value` run configuration.
//!
//! Global keys (`seed`, `workers`, `out`) come first; command keys live under
//! a `[command]` header. Sections for other commands are ignored, so one file
//! can hold a whole batch.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::SequenceLength;
use crate::ensemble::FitWeighting;
use crate::sampler::{InitialMeasureSpec, MomentumLaw, PositionLaw, TabulatedDensity};
use crate::time::TimeGrid;
use crate::torus::{TorusPoint, TorusRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GasTrace,
    GasScaling,
    GasMean,
    GasReverse,
    KacTrace,
    KacEnsemble,
    KacBrute,
    Bounds,
    Macro,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::GasTrace,
        Command::GasScaling,
        Command::GasMean,
        Command::GasReverse,
        Command::KacTrace,
        Command::KacEnsemble,
        Command::KacBrute,
        Command::Bounds,
        Command::Macro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::GasTrace => "gas-trace",
            Command::GasScaling => "gas-scaling",
            Command::GasMean => "gas-mean",
            Command::GasReverse => "gas-reverse",
            Command::KacTrace => "kac-trace",
            Command::KacEnsemble => "kac-ensemble",
            Command::KacBrute => "kac-brute",
            Command::Bounds => "bounds",
            Command::Macro => "macro",
        }
    }

    /// Key schema: name, type, default (`None` means required).
    pub fn keys(self) -> &'static [KeySpec] {
        use Kind::*;
        const THERMAL: Option<&str> = Some("thermal:1");
        const HALF: Option<&str> = Some("0:0.5");
        const UNIFORM_HALF: Option<&str> = Some("uniform:0:0.5");
        match self {
            Command::GasTrace => {
                const K: &[KeySpec] = &[
                    KeySpec::new("n", Count { min: 1, max: 1 << 32 }, None),
                    KeySpec::new("region", Region, None),
                    KeySpec::new("grid", Grid, None),
                    KeySpec::new("position", Position, UNIFORM_HALF),
                    KeySpec::new("momentum", Momentum, THERMAL),
                ];
                K
            }
            Command::GasScaling => {
                const K: &[KeySpec] = &[
                    KeySpec::new("n_values", CountList, None),
                    KeySpec::new("histories", Count { min: 1, max: u64::MAX }, Some("100000")),
                    KeySpec::new("epsilon", Unit, Some("0.04")),
                    KeySpec::new("grid", Grid, Some("0:10:25")),
                    KeySpec::new("k_values", CountList, Some("1,5,25")),
                    KeySpec::new("region", Region, HALF),
                    KeySpec::new("position", Position, UNIFORM_HALF),
                    KeySpec::new("momentum", Momentum, THERMAL),
                    KeySpec::new("fit_min_n", Count { min: 0, max: u64::MAX }, Some("0")),
                    KeySpec::new("fit_weighting", Weighting, Some("unweighted")),
                ];
                K
            }
            Command::GasMean => {
                const K: &[KeySpec] = &[
                    KeySpec::new("region", Region, HALF),
                    KeySpec::new("grid", Grid, None),
                    KeySpec::new("position", Position, UNIFORM_HALF),
                    KeySpec::new("momentum", Momentum, THERMAL),
                    KeySpec::new("tail_tol", Positive, Some("1e-12")),
                    KeySpec::new("mc_samples", Count { min: 1, max: 1 << 32 }, Some("100000")),
                ];
                K
            }
            Command::GasReverse => {
                const K: &[KeySpec] = &[
                    KeySpec::new("n", Count { min: 1, max: 1 << 32 }, None),
                    KeySpec::new("region", Region, HALF),
                    KeySpec::new("t_reverse", Positive, None),
                    KeySpec::new("steps", Count { min: 1, max: 1 << 24 }, Some("200")),
                    KeySpec::new("position", Position, UNIFORM_HALF),
                    KeySpec::new("momentum", Momentum, THERMAL),
                ];
                K
            }
            Command::KacTrace => {
                const K: &[KeySpec] = &[
                    KeySpec::new("n", Count { min: 1, max: 1 << 32 }, None),
                    KeySpec::new("mu", Rate, None),
                    KeySpec::new("t_max", Count { min: 0, max: 1 << 40 }, None),
                ];
                K
            }
            Command::KacEnsemble => {
                const K: &[KeySpec] = &[
                    KeySpec::new("n", Count { min: 1, max: 1 << 32 }, None),
                    KeySpec::new("mu", Rate, None),
                    KeySpec::new("histories", Count { min: 1, max: u64::MAX }, Some("10000")),
                    KeySpec::new("t_max", Count { min: 0, max: 1 << 40 }, None),
                    KeySpec::new("epsilon", Unit, Some("0.15")),
                    KeySpec::new("alpha", Unit, Some("0.5")),
                    KeySpec::new("window", Window, Some("theorem3")),
                ];
                K
            }
            Command::KacBrute => {
                const K: &[KeySpec] = &[
                    KeySpec::new("n", Count { min: 1, max: 20 }, None),
                    KeySpec::new("mu", Rate, None),
                    KeySpec::new("t_max", Count { min: 0, max: 1 << 20 }, None),
                ];
                K
            }
            Command::Bounds => {
                const K: &[KeySpec] = &[
                    KeySpec::new("epsilon", Unit, None),
                    KeySpec::new("n", Positive, None),
                    KeySpec::new("eta", Unit, Some("0.5")),
                    KeySpec::new("k", Sequence, Some("1")),
                    KeySpec::new("regions", Count { min: 1, max: 1 << 32 }, Some("1")),
                    KeySpec::new("t_large", Flag, Some("false")),
                ];
                K
            }
            Command::Macro => {
                const K: &[KeySpec] = &[
                    KeySpec::new("n0", Positive, Some("3e19")),
                    KeySpec::new("cell_volume", Positive, Some("1")),
                    KeySpec::new("sub_volume", Positive, Some("1e-3")),
                    KeySpec::new("delta_pi", Positive, Some("5e-6")),
                    KeySpec::new("k", Positive, Some("1")),
                ];
                K
            }
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Value types understood by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Count {
        min: u64,
        max: u64,
    },
    /// Comma-separated positive integers.
    CountList,
    /// Real number in the open interval (0,1).
    Unit,
    /// Real number in (0,1].
    Rate,
    /// Finite real number > 0.
    Positive,
    Flag,
    /// `a:b` per axis, axes separated by commas.
    Region,
    /// `t0:dt:K`.
    Grid,
    /// `uniform:<region>`, `point:x[,y..]` or `mixture:w@x[,y..];w@x..`.
    Position,
    /// `thermal:<mean speed>`, `gaussian:<sigma>` or `tabulated:<edges>;<densities>`.
    Momentum,
    /// `unweighted` or `inverse-variance`.
    Weighting,
    /// Integer count or `maximal`.
    Sequence,
    /// `t_from:t_to`, `theorem3` or `none`.
    Window,
}

impl Kind {
    fn describe(self) -> String {
        match self {
            Kind::Count { min, max } if max == u64::MAX => format!("integer >= {min}"),
            Kind::Count { min, max } => format!("integer in [{min}, {max}]"),
            Kind::CountList => "list of positive integers".into(),
            Kind::Unit => "number in (0,1)".into(),
            Kind::Rate => "number in (0,1]".into(),
            Kind::Positive => "number > 0".into(),
            Kind::Flag => "true or false".into(),
            Kind::Region => "region a:b[,a:b...]".into(),
            Kind::Grid => "grid t0:dt:K".into(),
            Kind::Position => "position law".into(),
            Kind::Momentum => "momentum law".into(),
            Kind::Weighting => "unweighted or inverse-variance".into(),
            Kind::Sequence => "integer >= 1 or `maximal`".into(),
            Kind::Window => "t_from:t_to, theorem3 or none".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
}

impl KeySpec {
    const fn new(name: &'static str, kind: Kind, default: Option<&'static str>) -> Self {
        Self { name, kind, default }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    Syntax,
    Missing,
    Unknown,
    Type,
    Range,
    Conflict,
}

/// One problem found in a config, located by `section.key` path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub path: String,
    pub kind: IssueKind,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            IssueKind::Syntax => "syntax error",
            IssueKind::Missing => "missing key",
            IssueKind::Unknown => "unknown key",
            IssueKind::Type => "type mismatch",
            IssueKind::Range => "out of range",
            IssueKind::Conflict => "conflict",
        };
        write!(f, "{}: {kind}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn has(&self, path: &str, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.path == path && i.kind == kind)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Command keys, in order given.
    pub params: Vec<(String, String)>,
}

/// A validated run: every command key is present and parses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub master_seed: u64,
    pub worker_count: usize,
    pub output_path: PathBuf,
    pub parameters: BTreeMap<String, String>,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT: &str = "results";

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

struct Collector {
    issues: Vec<ConfigIssue>,
}

impl Collector {
    fn push(&mut self, path: impl Into<String>, kind: IssueKind, message: impl Into<String>) {
        self.issues.push(ConfigIssue { path: path.into(), kind, message: message.into() });
    }
}

/// Parse `text` for `command` and apply `overrides`; all problems are
/// reported together.
pub fn parse_config(command: Command, text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut c = Collector { issues: Vec::new() };
    let mut globals: BTreeMap<String, String> = BTreeMap::new();
    let mut params: BTreeMap<String, String> = BTreeMap::new();
    let mut section: Option<String> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                c.push(format!("line {lineno}"), IssueKind::Syntax, format!("bad section header `{line}`"));
                continue;
            };
            let name = name.trim();
            if name.parse::<Command>().is_err() {
                c.push(format!("line {lineno}"), IssueKind::Unknown, format!("unknown section `{name}`"));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            c.push(format!("line {lineno}"), IssueKind::Syntax, format!("expected key = value, got `{line}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim().to_string());
        match section.as_deref() {
            None => match key {
                "seed" | "workers" | "out" => {
                    if globals.insert(key.to_string(), value).is_some() {
                        c.push(key, IssueKind::Conflict, format!("duplicate key (line {lineno})"));
                    }
                }
                _ => c.push(key, IssueKind::Unknown, format!("not a global key (line {lineno})")),
            },
            Some(s) if s == command.name() => {
                if params.insert(key.to_string(), value).is_some() {
                    c.push(format!("{s}.{key}"), IssueKind::Conflict, format!("duplicate key (line {lineno})"));
                }
            }
            Some(_) => {}
        }
    }
    for (k, v) in &overrides.params {
        params.insert(k.clone(), v.clone());
    }

    let master_seed = match (overrides.seed, globals.get("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v.parse().unwrap_or_else(|_| {
            c.push("seed", IssueKind::Type, format!("expected unsigned 64-bit integer, got `{v}`"));
            DEFAULT_SEED
        }),
        (None, None) => DEFAULT_SEED,
    };
    let worker_count = match (overrides.workers, globals.get("workers")) {
        (Some(w), _) => w,
        (None, Some(v)) => v.parse().unwrap_or_else(|_| {
            c.push("workers", IssueKind::Type, format!("expected integer, got `{v}`"));
            1
        }),
        (None, None) => default_workers(),
    };
    if worker_count == 0 {
        c.push("workers", IssueKind::Range, "must be >= 1");
    }
    let output_path = match (&overrides.out, globals.get("out")) {
        (Some(p), _) => p.clone(),
        (None, Some(v)) => PathBuf::from(v),
        (None, None) => PathBuf::from(DEFAULT_OUT),
    };

    let schema = command.keys();
    for key in params.keys() {
        if !schema.iter().any(|s| s.name == key) {
            c.push(format!("{command}.{key}"), IssueKind::Unknown, "not accepted by this command");
        }
    }
    let mut resolved = BTreeMap::new();
    for spec in schema {
        let path = format!("{command}.{}", spec.name);
        let value = match params.get(spec.name).map(String::as_str).or(spec.default) {
            Some(v) => v.to_string(),
            None => {
                c.push(path, IssueKind::Missing, format!("required ({})", spec.kind.describe()));
                continue;
            }
        };
        if let Err((kind, msg)) = check_value(spec.kind, &value) {
            c.push(path, kind, msg);
            continue;
        }
        resolved.insert(spec.name.to_string(), value);
    }

    let config = RunConfig { command, master_seed, worker_count, output_path, parameters: resolved };
    if c.issues.is_empty() {
        cross_check(&config, &mut c);
    }
    if c.issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError { issues: c.issues })
    }
}

type Check = Result<(), (IssueKind, String)>;

fn type_err(kind: Kind, v: &str) -> (IssueKind, String) {
    (IssueKind::Type, format!("expected {}, got `{v}`", kind.describe()))
}

fn check_value(kind: Kind, v: &str) -> Check {
    let range = |msg: String| Err((IssueKind::Range, msg));
    match kind {
        Kind::Count { min, max } => {
            let x: u64 = parse_u64(v).ok_or_else(|| type_err(kind, v))?;
            if x < min || x > max {
                return range(format!("{x} not in [{min}, {max}]"));
            }
        }
        Kind::CountList => {
            let xs = parse_list(v).ok_or_else(|| type_err(kind, v))?;
            if xs.is_empty() || xs.contains(&0) {
                return range(format!("`{v}` must list integers >= 1"));
            }
        }
        Kind::Unit | Kind::Rate | Kind::Positive => {
            let x = parse_f64(v).ok_or_else(|| type_err(kind, v))?;
            let ok = match kind {
                Kind::Unit => x > 0.0 && x < 1.0,
                Kind::Rate => x > 0.0 && x <= 1.0,
                _ => x > 0.0 && x.is_finite(),
            };
            if !ok {
                return range(format!("{x} is not a {}", kind.describe()));
            }
        }
        Kind::Flag => {
            parse_bool(v).ok_or_else(|| type_err(kind, v))?;
        }
        Kind::Region => {
            parse_region(v).map_err(|m| (IssueKind::Type, m))?;
        }
        Kind::Grid => {
            parse_grid(v).map_err(|m| (IssueKind::Type, m))?;
        }
        Kind::Position => {
            parse_position(v).map_err(|m| (IssueKind::Type, m))?;
        }
        Kind::Momentum => {
            parse_momentum(v, 1).map_err(|m| (IssueKind::Type, m))?;
        }
        Kind::Weighting => {
            parse_weighting(v).ok_or_else(|| type_err(kind, v))?;
        }
        Kind::Sequence => {
            parse_sequence(v).ok_or_else(|| type_err(kind, v))?;
        }
        Kind::Window => {
            parse_window(v).map_err(|m| (IssueKind::Type, m))?;
        }
    }
    Ok(())
}

/// Checks that span several keys.
fn cross_check(config: &RunConfig, c: &mut Collector) {
    let cmd = config.command;
    let p = |k: &str| config.parameters.get(k).map(String::as_str);
    if let (Some(region), Some(position)) = (p("region"), p("position")) {
        let d = parse_region(region).map(|r| r.dim()).unwrap_or(0);
        let dp = parse_position(position).map(|l| l.dim()).unwrap_or(0);
        if d != dp {
            c.push(format!("{cmd}.position"), IssueKind::Conflict, format!("{dp}-d law but {d}-d region"));
        }
        if let Some(m) = p("momentum") {
            if let Err(e) = parse_momentum(m, d) {
                c.push(format!("{cmd}.momentum"), IssueKind::Range, e);
            }
        }
    }
    if cmd == Command::Macro {
        let (v, cell) = (parse_f64(p("sub_volume").unwrap_or("")), parse_f64(p("cell_volume").unwrap_or("")));
        if let (Some(v), Some(cell)) = (v, cell) {
            if v >= cell {
                c.push("macro.sub_volume", IssueKind::Conflict, "must be smaller than cell_volume");
            }
        }
    }
    if cmd == Command::GasScaling {
        let grid = p("grid").and_then(|g| parse_grid(g).ok());
        let ks = p("k_values").and_then(parse_list).unwrap_or_default();
        if let Some(g) = grid {
            if let Some(&k) = ks.iter().find(|&&k| k as usize > g.k_count()) {
                c.push(
                    "gas-scaling.k_values",
                    IssueKind::Range,
                    format!("K = {k} exceeds the grid size {}", g.k_count()),
                );
            }
        }
    }
}

pub(crate) fn parse_u64(v: &str) -> Option<u64> {
    let v = v.trim().replace('_', "");
    v.parse().ok().or_else(|| {
        // allow `1e5` for counts when the value is exactly an integer
        let x: f64 = v.parse().ok()?;
        (x >= 0.0 && x.fract() == 0.0 && x < 1.8e19).then_some(x as u64)
    })
}

pub(crate) fn parse_f64(v: &str) -> Option<f64> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

pub(crate) fn parse_list(v: &str) -> Option<Vec<u64>> {
    v.split(',').map(parse_u64).collect()
}

fn parse_reals(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| parse_f64(s).ok_or_else(|| format!("`{s}` is not a number"))).collect()
}

pub fn parse_region(v: &str) -> Result<TorusRegion, String> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for axis in v.split(',') {
        let (a, b) = axis.split_once(':').ok_or_else(|| format!("axis `{axis}` is not a:b"))?;
        lower.push(parse_f64(a).ok_or_else(|| format!("`{a}` is not a number"))?);
        upper.push(parse_f64(b).ok_or_else(|| format!("`{b}` is not a number"))?);
    }
    TorusRegion::new(lower, upper).map_err(|e| e.to_string())
}

pub fn parse_grid(v: &str) -> Result<TimeGrid, String> {
    let parts: Vec<&str> = v.split(':').collect();
    let [t0, dt, k] = parts.as_slice() else {
        return Err(format!("grid `{v}` is not t0:dt:K"));
    };
    let t0 = parse_f64(t0).ok_or_else(|| format!("`{t0}` is not a number"))?;
    let dt = parse_f64(dt).ok_or_else(|| format!("`{dt}` is not a number"))?;
    let k = parse_u64(k).ok_or_else(|| format!("`{k}` is not a count"))?;
    TimeGrid::new(t0, dt, k as usize).map_err(|e| e.to_string())
}

pub fn parse_position(v: &str) -> Result<PositionLaw, String> {
    let (tag, body) = v.split_once(':').ok_or_else(|| format!("position `{v}` has no law tag"))?;
    match tag.trim() {
        "uniform" => Ok(PositionLaw::Uniform(parse_region(body)?)),
        "point" => TorusPoint::new(parse_reals(body)?).map(PositionLaw::PointMass).map_err(|e| e.to_string()),
        "mixture" => {
            let mut comps = Vec::new();
            for atom in body.split(';') {
                let (w, x) = atom.split_once('@').ok_or_else(|| format!("atom `{atom}` is not w@x"))?;
                let w = parse_f64(w).ok_or_else(|| format!("`{w}` is not a weight"))?;
                comps.push((w, TorusPoint::new(parse_reals(x)?).map_err(|e| e.to_string())?));
            }
            PositionLaw::mixture(comps).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown position law `{other}`")),
    }
}

pub fn parse_momentum(v: &str, dim: usize) -> Result<MomentumLaw, String> {
    let (tag, body) = v.split_once(':').ok_or_else(|| format!("momentum `{v}` has no law tag"))?;
    let number = |s: &str| parse_f64(s).ok_or_else(|| format!("`{s}` is not a number"));
    match tag.trim() {
        "thermal" => MomentumLaw::thermal(number(body)?, dim).map_err(|e| e.to_string()),
        "gaussian" => MomentumLaw::gaussian(number(body)?).map_err(|e| e.to_string()),
        "tabulated" => {
            let (edges, dens) = body.split_once(';').ok_or_else(|| "tabulated law is edges;densities".to_string())?;
            TabulatedDensity::new(parse_reals(edges)?, parse_reals(dens)?)
                .map(MomentumLaw::Tabulated)
                .map_err(|e| e.to_string())
        }
        other => Err(format!("unknown momentum law `{other}`")),
    }
}

fn parse_weighting(v: &str) -> Option<FitWeighting> {
    match v.trim() {
        "unweighted" => Some(FitWeighting::Unweighted),
        "inverse-variance" => Some(FitWeighting::InverseVariance),
        _ => None,
    }
}

fn parse_sequence(v: &str) -> Option<SequenceLength> {
    if v.trim() == "maximal" {
        return Some(SequenceLength::Maximal);
    }
    parse_u64(v).filter(|&k| k >= 1).map(SequenceLength::Count)
}

/// Requested `[t_from, t_to]` window for the ring ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    None,
    Theorem3,
    Fixed(u64, u64),
}

fn parse_window(v: &str) -> Result<WindowSpec, String> {
    match v.trim() {
        "none" => Ok(WindowSpec::None),
        "theorem3" => Ok(WindowSpec::Theorem3),
        w => {
            let (a, b) = w.split_once(':').ok_or_else(|| format!("window `{w}` is not t_from:t_to"))?;
            let (a, b) = (parse_u64(a), parse_u64(b));
            match (a, b) {
                (Some(a), Some(b)) if a <= b => Ok(WindowSpec::Fixed(a, b)),
                _ => Err(format!("window `{w}` needs integers t_from <= t_to")),
            }
        }
    }
}

/// Typed access to validated parameters.
impl RunConfig {
    fn raw(&self, key: &str) -> &str {
        self.parameters.get(key).map(String::as_str).unwrap_or_else(|| panic!("key `{key}` not in schema"))
    }

    pub fn count(&self, key: &str) -> u64 {
        parse_u64(self.raw(key)).expect("validated")
    }

    pub fn real(&self, key: &str) -> f64 {
        parse_f64(self.raw(key)).expect("validated")
    }

    pub fn flag(&self, key: &str) -> bool {
        parse_bool(self.raw(key)).expect("validated")
    }

    pub fn counts(&self, key: &str) -> Vec<u64> {
        parse_list(self.raw(key)).expect("validated")
    }

    pub fn region(&self) -> TorusRegion {
        parse_region(self.raw("region")).expect("validated")
    }

    pub fn grid(&self) -> TimeGrid {
        parse_grid(self.raw("grid")).expect("validated")
    }

    pub fn initial(&self) -> InitialMeasureSpec {
        let position = parse_position(self.raw("position")).expect("validated");
        let momentum = parse_momentum(self.raw("momentum"), position.dim()).expect("validated");
        InitialMeasureSpec::new(position, momentum)
    }

    pub fn weighting(&self) -> FitWeighting {
        parse_weighting(self.raw("fit_weighting")).expect("validated")
    }

    pub fn sequence(&self, key: &str) -> SequenceLength {
        parse_sequence(self.raw(key)).expect("validated")
    }

    pub fn window(&self) -> WindowSpec {
        parse_window(self.raw("window")).expect("validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRACE: &str = "seed = 42\nworkers = 2\n\n[gas-trace]\nn = 100\nregion = 0:0.5\ngrid = 0:0.5:240\n";

    #[test]
    fn minimal_gas_trace_is_valid() {
        let cfg = parse_config(Command::GasTrace, TRACE, &Overrides::default()).unwrap();
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.worker_count, 2);
        assert_eq!(cfg.count("n"), 100);
        assert_eq!(cfg.grid().k_count(), 240);
        assert_eq!(cfg.parameters["momentum"], "thermal:1");
    }

    #[test]
    fn epsilon_out_of_range() {
        let text = "[gas-scaling]\nn_values = 500\nepsilon = 1.5\n";
        let err = parse_config(Command::GasScaling, text, &Overrides::default()).unwrap_err();
        assert!(err.has("gas-scaling.epsilon", IssueKind::Range), "{err}");
    }

    #[test]
    fn seed_flag_wins() {
        let o = Overrides { seed: Some(7), ..Default::default() };
        assert_eq!(parse_config(Command::GasTrace, TRACE, &o).unwrap().master_seed, 7);
    }

    #[test]
    fn key_override_wins() {
        let o = Overrides { params: vec![("n".into(), "250".into())], ..Default::default() };
        assert_eq!(parse_config(Command::GasTrace, TRACE, &o).unwrap().count("n"), 250);
    }

    #[test]
    fn all_problems_reported() {
        let text = "bogus = 1\n[gas-trace]\nn = ten\nwhat = 3\n";
        let err = parse_config(Command::GasTrace, text, &Overrides::default()).unwrap_err();
        assert!(err.has("bogus", IssueKind::Unknown));
        assert!(err.has("gas-trace.n", IssueKind::Type));
        assert!(err.has("gas-trace.what", IssueKind::Unknown));
        assert!(err.has("gas-trace.region", IssueKind::Missing));
        assert!(err.has("gas-trace.grid", IssueKind::Missing));
        assert_eq!(err.issues.len(), 5);
    }

    #[test]
    fn other_sections_are_ignored() {
        let text = format!("{TRACE}\n[macro]\nnonsense = yes\n");
        assert!(parse_config(Command::GasTrace, &text, &Overrides::default()).is_ok());
        let bad = format!("{TRACE}\n[gas-tracer]\n");
        assert!(parse_config(Command::GasTrace, &bad, &Overrides::default()).is_err());
    }

    #[test]
    fn brute_force_limit() {
        let err = parse_config(Command::KacBrute, "[kac-brute]\nn = 25\nmu = 0.5\nt_max = 4\n", &Overrides::default())
            .unwrap_err();
        assert!(err.has("kac-brute.n", IssueKind::Range));
    }

    #[test]
    fn dimension_conflict() {
        let text = "[gas-trace]\nn = 10\nregion = 0:0.5,0:0.5\ngrid = 0:1:3\n";
        let err = parse_config(Command::GasTrace, text, &Overrides::default()).unwrap_err();
        assert!(err.has("gas-trace.position", IssueKind::Conflict));
        let ok = format!("{text}position = uniform:0:1,0:0.25\n");
        let cfg = parse_config(Command::GasTrace, &ok, &Overrides::default()).unwrap();
        assert_eq!(cfg.initial().dim(), 2);
    }

    #[test]
    fn law_syntax() {
        assert!(matches!(parse_position("point:0.1,0.2"), Ok(PositionLaw::PointMass(_))));
        assert!(matches!(parse_position("mixture:0.5@0.1;0.5@0.7"), Ok(PositionLaw::Mixture(_))));
        assert!(parse_position("mixture:0.5@0.1;0.4@0.7").is_err());
        assert!(matches!(parse_momentum("tabulated:-1,0,1;0.25,0.75", 1), Ok(MomentumLaw::Tabulated(_))));
        assert!(parse_momentum("maxwell:1", 1).is_err());
        assert_eq!(parse_window("4:32"), Ok(WindowSpec::Fixed(4, 32)));
        assert!(parse_window("32:4").is_err());
        assert_eq!(parse_u64("1e5"), Some(100_000));
        assert_eq!(parse_sequence("maximal"), Some(SequenceLength::Maximal));
    }

    #[test]
    fn every_command_has_defaults_or_required_keys() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>(), Ok(c));
            for k in c.keys() {
                if let Some(d) = k.default {
                    assert!(check_value(k.kind, d).is_ok(), "{c}.{}", k.name);
                }
            }
        }
    }
}
