//! Scenario files: flat `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! scenario = ring-sweep
//! seed = 7
//!
//! [ring]
//! rho = 1.0
//! theta = 1.0
//! b_pl = 0.1
//!
//! [sweep]
//! vary = energy
//! start = 0.5
//! stop = 4.0
//! count = 50
//! ```
//!
//! `#` starts a comment. Lists are comma separated. Keys outside any section
//! are global: `scenario` (required), `seed` (default 42), `format` (csv or
//! json, default csv) and `output` (default stdout).

use std::collections::BTreeMap;
use std::fmt;

use inplane_dirac::gauge::{quantize_positions, FieldConfig};
use inplane_dirac::ring::{ArmModel, RingParams, SweepVariable};
use inplane_dirac::zeromodes::FluxProfile2D;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    AcTheorem,
    GaugeRemoval,
    Quantization,
    RingSweep,
    FilterDesign,
}

const SCENARIOS: [(&str, Scenario); 5] = [
    ("ac-theorem", Scenario::AcTheorem),
    ("gauge-removal", Scenario::GaugeRemoval),
    ("quantization", Scenario::Quantization),
    ("ring-sweep", Scenario::RingSweep),
    ("filter-design", Scenario::FilterDesign),
];

impl Scenario {
    pub fn name(self) -> &'static str {
        SCENARIOS.iter().find(|(_, s)| *s == self).map(|(n, _)| *n).unwrap_or("?")
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Scenario::AcTheorem => &["ac"],
            Scenario::GaugeRemoval => &["field", "grid", "state"],
            Scenario::Quantization => &["field", "quantization"],
            Scenario::RingSweep => &["ring", "sweep"],
            Scenario::FilterDesign => &["ring", "filter"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Gaussian,
    Disk { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcSettings {
    pub flux_quanta: Vec<f64>,
    pub lattice: usize,
    pub spacing: f64,
    pub charge: f64,
    pub profile: Profile,
    pub sector: i32,
    pub gap_threshold: f64,
}

impl AcSettings {
    pub fn profile_for(&self, flux_quanta: f64) -> inplane_dirac::Result<FluxProfile2D> {
        match self.profile {
            Profile::Gaussian => FluxProfile2D::gaussian(self.lattice, self.spacing, flux_quanta, self.charge),
            Profile::Disk { radius } => {
                FluxProfile2D::uniform_disk(self.lattice, self.spacing, flux_quanta, radius, self.charge)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    /// The constant spin-up spinor.
    Constant,
    /// `(exp(x_B + i x_perp), 0)`; a solution only without flux.
    Holomorphic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSettings {
    pub field: FieldConfig,
    /// Nodes per axis, one row per entry.
    pub sizes: Vec<usize>,
    pub x_b0: f64,
    pub x_perp0: f64,
    /// Side of the square sampling window.
    pub extent: f64,
    pub state: StateKind,
    pub s: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizationSettings {
    pub field: FieldConfig,
    pub n_max: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub ring: RingParams,
    pub vary: SweepVariable,
    pub values: Vec<f64>,
    /// Fixed energy when `vary` is not the energy.
    pub energy: f64,
    pub model: ArmModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterSettings {
    pub ring: RingParams,
    pub n_max: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Settings {
    Ac(AcSettings),
    Gauge(GaugeSettings),
    Quantization(QuantizationSettings),
    Sweep(SweepSettings),
    Filter(FilterSettings),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub format: Format,
    pub output: Option<String>,
    pub settings: Settings,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Parse { line: Option<usize>, key: Option<String>, message: String },
    /// Values parse but violate a parameter invariant.
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, key, message } => {
                match (line, key) {
                    (Some(l), Some(k)) => write!(f, "line {l}, key `{k}`: ")?,
                    (Some(l), None) => write!(f, "line {l}: ")?,
                    (None, Some(k)) => write!(f, "key `{k}`: ")?,
                    (None, None) => {}
                }
                f.write_str(message)
            }
            ConfigError::Validation(m) => write!(f, "invalid parameters: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn parse_err(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, key: key.map(String::from), message: message.into() }
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Raw entries keyed by `(section, key)`; the global section is "".
struct Document {
    entries: BTreeMap<(String, String), Entry>,
    section_lines: BTreeMap<String, usize>,
}

const KNOWN_SECTIONS: [&str; 8] = ["ac", "field", "grid", "state", "quantization", "ring", "sweep", "filter"];

fn tokenize(text: &str) -> Result<Document, ConfigError> {
    let mut doc = Document { entries: BTreeMap::new(), section_lines: BTreeMap::new() };
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(Some(n), None, format!("malformed section header {line:?}")))?
                .trim();
            if !KNOWN_SECTIONS.contains(&name) {
                return Err(parse_err(
                    Some(n),
                    None,
                    format!("unknown section [{name}]; expected one of {}", KNOWN_SECTIONS.join(", ")),
                ));
            }
            if doc.section_lines.insert(name.to_string(), n).is_some() {
                return Err(parse_err(Some(n), None, format!("section [{name}] appears twice")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(Some(n), None, format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(parse_err(Some(n), None, "empty key"));
        }
        if value.is_empty() {
            return Err(parse_err(Some(n), Some(key), "empty value"));
        }
        let slot = (section.clone(), key.to_string());
        if let Some(prev) = doc.entries.get(&slot) {
            return Err(parse_err(Some(n), Some(key), format!("duplicate key (first set on line {})", prev.line)));
        }
        doc.entries.insert(slot, Entry { value: value.to_string(), line: n, used: false });
    }
    Ok(doc)
}

impl Document {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let e = self.entries.get_mut(&(section.to_string(), key.to_string()))?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn qualified(section: &str, key: &str) -> String {
        if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        }
    }

    fn parsed<T>(
        &mut self,
        section: &str,
        key: &str,
        what: &str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => f(&v)
                .map(Some)
                .ok_or_else(|| parse_err(Some(line), Some(&Self::qualified(section, key)), format!("expected {what}, got {v:?}"))),
        }
    }

    fn required<T>(&mut self, section: &str, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<T, ConfigError> {
        self.parsed(section, key, what, f)?.ok_or_else(|| {
            let line = self.section_lines.get(section).copied();
            parse_err(line, Some(&Self::qualified(section, key)), "missing required key")
        })
    }

    fn real(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parsed(section, key, "a finite number", parse_real)
    }

    fn real_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.real(section, key)?.unwrap_or(default))
    }

    fn real_required(&mut self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.required(section, key, "a finite number", parse_real)
    }

    fn real_list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.parsed(section, key, "a comma-separated list of numbers", |v| parse_list(v, parse_real))
    }

    /// Rejects leftover keys and sections the scenario does not read.
    fn finish(&self, scenario: Scenario) -> Result<(), ConfigError> {
        for (name, line) in &self.section_lines {
            if !scenario.sections().contains(&name.as_str()) {
                return Err(parse_err(
                    Some(*line),
                    None,
                    format!("section [{name}] is not used by scenario {}", scenario.name()),
                ));
            }
        }
        for ((section, key), e) in &self.entries {
            if !e.used {
                return Err(parse_err(Some(e.line), Some(&Self::qualified(section, key)), "unknown key"));
            }
        }
        Ok(())
    }
}

fn parse_real(v: &str) -> Option<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_int<T: std::str::FromStr>(v: &str) -> Option<T> {
    v.parse::<T>().ok()
}

fn parse_sign(v: &str) -> Option<i32> {
    match v {
        "1" | "+1" => Some(1),
        "-1" => Some(-1),
        _ => None,
    }
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let out: Option<Vec<T>> = v.split(',').map(|s| f(s.trim())).collect();
    out.filter(|l| !l.is_empty())
}

fn validation(context: &str, e: inplane_dirac::Error) -> ConfigError {
    ConfigError::Validation(format!("{context}: {e}"))
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut doc = tokenize(text)?;
    let name = doc.required("", "scenario", "a scenario name", |v| Some(v.to_string()))?;
    let scenario = SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).ok_or_else(|| {
        let line = doc.entries.get(&(String::new(), "scenario".into())).map(|e| e.line);
        let valid: Vec<&str> = SCENARIOS.iter().map(|(n, _)| *n).collect();
        parse_err(line, Some("scenario"), format!("unknown scenario {name:?}; valid scenarios are {{{}}}", valid.join(", ")))
    })?;
    let seed = doc.parsed("", "seed", "a non-negative integer", parse_int::<u64>)?.unwrap_or(DEFAULT_SEED);
    let format = doc.parsed("", "format", "csv or json", Format::parse)?.unwrap_or(Format::Csv);
    let output = doc.take("", "output").map(|(v, _)| v);

    let settings = match scenario {
        Scenario::AcTheorem => Settings::Ac(ac_settings(&mut doc)?),
        Scenario::GaugeRemoval => Settings::Gauge(gauge_settings(&mut doc)?),
        Scenario::Quantization => Settings::Quantization(quantization_settings(&mut doc)?),
        Scenario::RingSweep => Settings::Sweep(sweep_settings(&mut doc)?),
        Scenario::FilterDesign => Settings::Filter(FilterSettings {
            ring: ring_params(&mut doc)?,
            n_max: doc.required("filter", "n_max", "a non-negative integer", parse_int::<u32>)?,
        }),
    };
    doc.finish(scenario)?;
    Ok(RunConfig { scenario, seed, format, output, settings })
}

fn ac_settings(doc: &mut Document) -> Result<AcSettings, ConfigError> {
    let s = "ac";
    let flux_quanta = doc.real_list(s, "flux_quanta")?.ok_or_else(|| parse_err(None, Some("ac.flux_quanta"), "missing required key"))?;
    let lattice = doc.parsed(s, "lattice", "an integer", parse_int::<usize>)?.unwrap_or(48);
    let spacing = doc.real_or(s, "spacing", 1.0)?;
    let charge = doc.real_or(s, "charge", 1.0)?;
    let profile = doc.parsed(s, "profile", "gaussian or disk", |v| match v {
        "gaussian" | "disk" => Some(v.to_string()),
        _ => None,
    })?;
    let radius = doc.real(s, "disk_radius")?;
    let profile = match (profile.as_deref(), radius) {
        (Some("disk"), Some(radius)) => Profile::Disk { radius },
        (Some("disk"), None) => return Err(parse_err(None, Some("ac.disk_radius"), "required when profile = disk")),
        (_, Some(_)) => return Err(parse_err(None, Some("ac.disk_radius"), "only valid with profile = disk")),
        _ => Profile::Gaussian,
    };
    let sector = doc.parsed(s, "sector", "1 or -1", parse_sign)?.unwrap_or(1);
    let gap_threshold = doc.real_or(s, "gap_threshold", 3.0)?;
    if !(gap_threshold > 1.0) {
        return Err(ConfigError::Validation(format!("ac.gap_threshold must exceed 1, got {gap_threshold}")));
    }
    let out = AcSettings { flux_quanta, lattice, spacing, charge, profile, sector, gap_threshold };
    for &fq in &out.flux_quanta {
        out.profile_for(fq).map_err(|e| validation(&format!("FluxProfile2D at flux_quanta = {fq}"), e))?;
    }
    Ok(out)
}

fn field_config(doc: &mut Document) -> Result<FieldConfig, ConfigError> {
    let s = "field";
    let cfg = FieldConfig {
        flux: doc.real_required(s, "flux")?,
        l0: doc.real_or(s, "l0", 1.0)?,
        c: doc.real_or(s, "c", 0.0)?,
        charge: doc.real_or(s, "charge", 1.0)?,
        omega: doc.real_or(s, "omega", 0.0)?,
    };
    cfg.validate().map_err(|e| validation("FieldConfig", e))?;
    Ok(cfg)
}

fn gauge_settings(doc: &mut Document) -> Result<GaugeSettings, ConfigError> {
    let field = field_config(doc)?;
    let sizes = doc
        .parsed("grid", "sizes", "a comma-separated list of integers", |v| parse_list(v, parse_int::<usize>))?
        .unwrap_or_else(|| vec![33, 65]);
    let x_b0 = doc.real_or("grid", "x_b0", 0.0)?;
    let x_perp0 = doc.real_or("grid", "x_perp0", 0.5)?;
    let extent = doc.real_or("grid", "extent", 1.0)?;
    let state = doc.required("state", "kind", "constant or holomorphic", |v| match v {
        "constant" => Some(StateKind::Constant),
        "holomorphic" => Some(StateKind::Holomorphic),
        _ => None,
    })?;
    let s = doc.parsed("state", "s", "1 or -1", parse_sign)?.unwrap_or(1);
    if let Some(n) = sizes.iter().find(|&&n| n < 5) {
        return Err(ConfigError::Validation(format!("grid.sizes: {n} nodes per axis is too few (need >= 5)")));
    }
    if !(extent > 0.0) {
        return Err(ConfigError::Validation(format!("grid.extent must be > 0, got {extent}")));
    }
    // The gauge scalar is singular at x_perp = 0.
    if !(x_perp0 > 0.0) {
        return Err(ConfigError::Validation(format!(
            "grid.x_perp0 must be > 0 (the gauge scalar is singular at x_perp = 0), got {x_perp0}"
        )));
    }
    Ok(GaugeSettings { field, sizes, x_b0, x_perp0, extent, state, s })
}

fn quantization_settings(doc: &mut Document) -> Result<QuantizationSettings, ConfigError> {
    let field = field_config(doc)?;
    let n_max = doc.required("quantization", "n_max", "a non-negative integer", parse_int::<u32>)?;
    // Zero or negative flux has no root on the x >= e l0 branch.
    quantize_positions(&field, n_max).map_err(|e| validation("quantization", e))?;
    Ok(QuantizationSettings { field, n_max })
}

fn ring_params(doc: &mut Document) -> Result<RingParams, ConfigError> {
    let s = "ring";
    let p = RingParams {
        rho: doc.real_required(s, "rho")?,
        theta: doc.real_required(s, "theta")?,
        b_pl: doc.real_required(s, "b_pl")?,
        m_eff: doc.real_or(s, "m_eff", 1.0)?,
        charge: doc.real_or(s, "charge", 1.0)?,
        hbar: doc.real_or(s, "hbar", 1.0)?,
    };
    p.validate().map_err(|e| validation("RingParams", e))?;
    Ok(p)
}

fn sweep_settings(doc: &mut Document) -> Result<SweepSettings, ConfigError> {
    let ring = ring_params(doc)?;
    let s = "sweep";
    let vary = doc.required(s, "vary", "energy, b_pl or theta", |v| match v {
        "energy" => Some(SweepVariable::Energy),
        "b_pl" => Some(SweepVariable::BPl),
        "theta" => Some(SweepVariable::Theta),
        _ => None,
    })?;
    let model = doc
        .parsed(s, "model", "phases or eigenstates", |v| match v {
            "phases" => Some(ArmModel::TiltedFrame),
            "eigenstates" => Some(ArmModel::ExactEigenstates),
            _ => None,
        })?
        .unwrap_or(ArmModel::TiltedFrame);
    let listed = doc.real_list(s, "values")?;
    let start = doc.real(s, "start")?;
    let stop = doc.real(s, "stop")?;
    let count = doc.parsed(s, "count", "a positive integer", parse_int::<usize>)?;
    let values = match (listed, start, stop, count) {
        (Some(v), None, None, None) => v,
        (None, Some(a), Some(b), Some(n)) if n >= 1 => {
            if n == 1 {
                vec![a]
            } else {
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
            }
        }
        (Some(_), ..) => {
            return Err(parse_err(None, Some("sweep.values"), "give either values or start/stop/count, not both"))
        }
        _ => return Err(parse_err(None, Some("sweep"), "need either values or all of start, stop and count >= 1")),
    };
    let energy = match (vary, doc.real(s, "energy")?) {
        (SweepVariable::Energy, Some(_)) => {
            return Err(parse_err(None, Some("sweep.energy"), "fixed energy conflicts with vary = energy"))
        }
        (SweepVariable::Energy, None) => f64::NAN,
        (_, Some(e)) => e,
        (_, None) => return Err(parse_err(None, Some("sweep.energy"), "missing required key")),
    };
    let energies: Vec<f64> = if vary == SweepVariable::Energy { values.clone() } else { vec![energy] };
    for e in energies {
        ring.lead_wavenumber(e).map_err(|err| validation("sweep energy", err))?;
    }
    for &v in &values {
        let mut q = ring;
        match vary {
            SweepVariable::BPl => q.b_pl = v,
            SweepVariable::Theta => q.theta = v,
            SweepVariable::Energy => {}
        }
        q.validate().map_err(|e| validation("RingParams", e))?;
    }
    Ok(SweepSettings { ring, vary, values, energy, model })
}
