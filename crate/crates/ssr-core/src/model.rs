//! Physical system description: generators with five-mass shafts, the
//! electrical network, steady-state loads and the attack injection point.
//!
//! Models are loaded from a sectioned text format (see `load_model`) and are
//! immutable after loading; validation is a separate pass that reports
//! violated invariants as data rather than errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Number of field poles assumed for the rated-speed conversion.
pub const POLE_PAIRS: f64 = 2.0;

/// Masses per shaft: generator rotor plus four turbine sections.
pub const MASSES_PER_SHAFT: usize = 5;

/// Shaft segments (adjacent-mass pairs) per generator.
pub const SEGMENTS_PER_SHAFT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusRole {
    Generator,
    Load,
    Slack,
}

impl BusRole {
    fn parse(s: &str) -> Option<BusRole> {
        match s {
            "generator" => Some(BusRole::Generator),
            "load" => Some(BusRole::Load),
            "slack" => Some(BusRole::Slack),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            BusRole::Generator => "generator",
            BusRole::Load => "load",
            BusRole::Slack => "slack",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub role: BusRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineModel {
    pub from: String,
    pub to: String,
    pub x_pu: f64,
}

/// Five-mass torsional shaft parameters, ordered [g, s1, s2, s3, s4] with
/// stiffnesses on segments (g,s1), (s1,s2), (s2,s3), (s3,s4).
#[derive(Debug, Clone, PartialEq)]
pub struct ShaftParams {
    /// Inertia constants H, seconds.
    pub inertias: [f64; 5],
    /// Damping coefficients D, p.u. torque per p.u. speed deviation.
    pub dampings: [f64; 5],
    /// Shaft stiffnesses K, p.u. torque per electrical radian of twist.
    pub stiffnesses: [f64; 4],
    /// Turbine power fractions B_f for masses s1..s4; sum to 1.
    pub power_fractions: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    pub id: String,
    pub bus: String,
    pub shaft: ShaftParams,
    pub dispatch_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    /// Buses in declaration order; this order fixes matrix row/column layout.
    pub buses: Vec<Bus>,
    pub lines: Vec<LineModel>,
    /// Steady-state loads in MW by bus id.
    pub loads: BTreeMap<String, f64>,
    pub base_mva: f64,
    /// Load bus hosting the storage device.
    pub attack_bus: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    Square,
    Sine,
    None,
}

impl Waveform {
    fn parse(s: &str) -> Option<Waveform> {
        match s {
            "square" => Some(Waveform::Square),
            "sine" => Some(Waveform::Sine),
            "none" => Some(Waveform::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Waveform::Square => "square",
            Waveform::Sine => "sine",
            Waveform::None => "none",
        }
    }
}

/// Injection applied by the compromised storage device, as a load deviation
/// in p.u. on the system base.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub bus: String,
    pub amplitude_pu: f64,
    pub frequency_hz: f64,
    pub waveform: Waveform,
    pub start_s: f64,
    /// Fraction of each period spent at +amplitude (square wave only).
    pub duty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub generators: Vec<GeneratorModel>,
    pub network: NetworkModel,
    pub nominal_frequency_hz: f64,
    /// Rated mechanical angular velocity, rad/s.
    pub omega_0m: f64,
    pub attack: AttackSpec,
}

impl SystemModel {
    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    /// Load buses (role load or slack) in declaration order. These define the
    /// input columns of B_e and of the state-space input matrix.
    pub fn load_buses(&self) -> Vec<&Bus> {
        self.network
            .buses
            .iter()
            .filter(|b| b.role != BusRole::Generator)
            .collect()
    }

    /// Load vector in p.u. on the system base, over `load_buses()` order.
    pub fn loads_pu(&self) -> Vec<f64> {
        self.load_buses()
            .iter()
            .map(|b| self.network.loads.get(&b.id).copied().unwrap_or(0.0) / self.network.base_mva)
            .collect()
    }

    /// Dispatch vector in p.u. on the system base, generator declaration order.
    pub fn dispatch_pu(&self) -> Vec<f64> {
        self.generators
            .iter()
            .map(|g| g.dispatch_mw / self.network.base_mva)
            .collect()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.network.buses.iter().find(|b| b.id == id)
    }
}

/// One violated invariant, reported by `validate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "valid: no violations")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

struct RawSection {
    name: String,
    line: usize,
    keys: Vec<(String, String, usize)>,
}

impl RawSection {
    fn get(&self, key: &str) -> Option<&(String, String, usize)> {
        self.keys.iter().find(|(k, _, _)| k == key)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .map(|(_, v, _)| v.as_str())
            .ok_or_else(|| Error::parse(self.line, format!("[{}] missing key `{}`", self.name, key)))
    }

    fn require_f64(&self, key: &str) -> Result<f64> {
        let (_, v, line) = self
            .get(key)
            .ok_or_else(|| Error::parse(self.line, format!("[{}] missing key `{}`", self.name, key)))?;
        v.parse::<f64>()
            .map_err(|_| Error::parse(*line, format!("`{key}` is not a number: `{v}`")))
    }

    fn optional_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some((_, v, line)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(*line, format!("`{key}` is not a number: `{v}`"))),
        }
    }

    fn numbers<const N: usize>(&self, key: &str) -> Result<[f64; N]> {
        let (_, v, line) = self
            .get(key)
            .ok_or_else(|| Error::parse(self.line, format!("[{}] missing key `{}`", self.name, key)))?;
        let parts: Vec<&str> = v.split_whitespace().collect();
        if parts.len() != N {
            return Err(Error::parse(
                *line,
                format!("`{key}` expects {N} numbers, found {}", parts.len()),
            ));
        }
        let mut out = [0.0; N];
        for (i, p) in parts.iter().enumerate() {
            out[i] = p
                .parse::<f64>()
                .map_err(|_| Error::parse(*line, format!("`{key}` entry {} is not a number: `{p}`", i + 1)))?;
        }
        Ok(out)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, _, line) in &self.keys {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::parse(
                    *line,
                    format!("unknown key `{k}` in section [{}]", self.name),
                ));
            }
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<Vec<RawSection>> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(lineno, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(Error::parse(lineno, "empty section name"));
            }
            sections.push(RawSection {
                name: name.to_string(),
                line: lineno,
                keys: Vec::new(),
            });
        } else {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("expected `key = value`, found `{line}`")))?;
            let section = sections
                .last_mut()
                .ok_or_else(|| Error::parse(lineno, "key before any [section] header"))?;
            let key = k.trim().to_string();
            if section.keys.iter().any(|(existing, _, _)| *existing == key) {
                return Err(Error::parse(
                    lineno,
                    format!("duplicate key `{key}` in section [{}]", section.name),
                ));
            }
            section.keys.push((key, v.trim().to_string(), lineno));
        }
    }
    Ok(sections)
}

/// Default damping when a generator omits `d`: terminal neglected, turbine
/// masses in the low-damping regime.
pub const DEFAULT_DAMPINGS: [f64; 5] = [0.0, 0.01, 0.01, 0.01, 0.01];

/// Parse the sectioned text configuration into a `SystemModel`.
///
/// Sections: `[system]`, repeated `[bus]`, `[line]`, `[generator]`, `[load]`,
/// and one `[attack]`. Unknown sections or keys are rejected with the
/// offending line number.
pub fn load_model(config_text: &str) -> Result<SystemModel> {
    let sections = split_sections(config_text)?;

    let mut base_mva = None;
    let mut frequency_hz = 60.0;
    let mut buses: Vec<(Bus, usize)> = Vec::new();
    let mut lines: Vec<(LineModel, usize)> = Vec::new();
    let mut generators: Vec<(GeneratorModel, usize)> = Vec::new();
    let mut loads: Vec<(String, f64, usize)> = Vec::new();
    let mut attack: Option<(AttackSpec, usize)> = None;

    for s in &sections {
        match s.name.as_str() {
            "system" => {
                s.check_keys(&["base_mva", "frequency_hz"])?;
                base_mva = Some(s.require_f64("base_mva")?);
                if let Some(f) = s.optional_f64("frequency_hz")? {
                    frequency_hz = f;
                }
            }
            "bus" => {
                s.check_keys(&["id", "role"])?;
                let id = s.require("id")?.to_string();
                let role_str = s.require("role")?;
                let role = BusRole::parse(role_str).ok_or_else(|| {
                    Error::parse(s.line, format!("unknown bus role `{role_str}` (generator|load|slack)"))
                })?;
                buses.push((Bus { id, role }, s.line));
            }
            "line" => {
                s.check_keys(&["from", "to", "x_pu"])?;
                lines.push((
                    LineModel {
                        from: s.require("from")?.to_string(),
                        to: s.require("to")?.to_string(),
                        x_pu: s.require_f64("x_pu")?,
                    },
                    s.line,
                ));
            }
            "generator" => {
                s.check_keys(&["id", "bus", "dispatch_mw", "h", "d", "k", "bf"])?;
                let dampings = if s.get("d").is_some() {
                    s.numbers::<5>("d")?
                } else {
                    DEFAULT_DAMPINGS
                };
                generators.push((
                    GeneratorModel {
                        id: s.require("id")?.to_string(),
                        bus: s.require("bus")?.to_string(),
                        dispatch_mw: s.require_f64("dispatch_mw")?,
                        shaft: ShaftParams {
                            inertias: s.numbers::<5>("h")?,
                            dampings,
                            stiffnesses: s.numbers::<4>("k")?,
                            power_fractions: s.numbers::<4>("bf")?,
                        },
                    },
                    s.line,
                ));
            }
            "load" => {
                s.check_keys(&["bus", "mw"])?;
                loads.push((s.require("bus")?.to_string(), s.require_f64("mw")?, s.line));
            }
            "attack" => {
                s.check_keys(&["bus", "amplitude_pu", "frequency_hz", "waveform", "start_s", "duty"])?;
                if attack.is_some() {
                    return Err(Error::parse(s.line, "duplicate [attack] section"));
                }
                let waveform_str = s.require("waveform")?;
                let waveform = Waveform::parse(waveform_str).ok_or_else(|| {
                    Error::parse(s.line, format!("unknown waveform `{waveform_str}` (square|sine|none)"))
                })?;
                attack = Some((
                    AttackSpec {
                        bus: s.require("bus")?.to_string(),
                        amplitude_pu: s.require_f64("amplitude_pu")?,
                        frequency_hz: s.optional_f64("frequency_hz")?.unwrap_or(0.0),
                        waveform,
                        start_s: s.require_f64("start_s")?,
                        duty: s.optional_f64("duty")?.unwrap_or(0.5),
                    },
                    s.line,
                ));
            }
            other => return Err(Error::parse(s.line, format!("unknown section [{other}]"))),
        }
    }

    let base_mva = base_mva.ok_or_else(|| Error::parse(0, "missing [system] section with base_mva"))?;
    let (attack, _) = attack.ok_or_else(|| Error::parse(0, "missing [attack] section"))?;

    // Reference checks with declaration lines.
    let bus_exists = |id: &str| buses.iter().any(|(b, _)| b.id == id);
    for (i, (b, line)) in buses.iter().enumerate() {
        if buses[..i].iter().any(|(other, _)| other.id == b.id) {
            return Err(Error::parse(*line, format!("duplicate bus id `{}`", b.id)));
        }
    }
    for (l, line) in &lines {
        for end in [&l.from, &l.to] {
            if !bus_exists(end) {
                return Err(Error::parse(*line, format!("line references undeclared bus `{end}`")));
            }
        }
    }
    for (i, (g, line)) in generators.iter().enumerate() {
        if generators[..i].iter().any(|(other, _)| other.id == g.id) {
            return Err(Error::parse(*line, format!("duplicate generator id `{}`", g.id)));
        }
        if !bus_exists(&g.bus) {
            return Err(Error::parse(*line, format!("generator `{}` references undeclared bus `{}`", g.id, g.bus)));
        }
    }
    let mut load_map = BTreeMap::new();
    for (bus, mw, line) in &loads {
        if !bus_exists(bus) {
            return Err(Error::parse(*line, format!("load references undeclared bus `{bus}`")));
        }
        if load_map.insert(bus.clone(), *mw).is_some() {
            return Err(Error::parse(*line, format!("duplicate load entry for bus `{bus}`")));
        }
    }
    if !bus_exists(&attack.bus) {
        return Err(Error::model(format!("attack references undeclared bus `{}`", attack.bus)));
    }

    let omega_0m = 2.0 * PI * frequency_hz * (2.0 / POLE_PAIRS);
    Ok(SystemModel {
        generators: generators.into_iter().map(|(g, _)| g).collect(),
        network: NetworkModel {
            buses: buses.into_iter().map(|(b, _)| b).collect(),
            lines: lines.into_iter().map(|(l, _)| l).collect(),
            loads: load_map,
            base_mva,
            attack_bus: attack.bus.clone(),
        },
        nominal_frequency_hz: frequency_hz,
        omega_0m,
        attack,
    })
}

/// Canonical text form of a model; `load_model(serialize(m)) == m`.
pub fn serialize(model: &SystemModel) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "[system]").unwrap();
    writeln!(out, "base_mva = {}", model.network.base_mva).unwrap();
    writeln!(out, "frequency_hz = {}", model.nominal_frequency_hz).unwrap();
    for b in &model.network.buses {
        writeln!(out, "\n[bus]\nid = {}\nrole = {}", b.id, b.role.as_str()).unwrap();
    }
    for l in &model.network.lines {
        writeln!(out, "\n[line]\nfrom = {}\nto = {}\nx_pu = {}", l.from, l.to, l.x_pu).unwrap();
    }
    for g in &model.generators {
        writeln!(out, "\n[generator]").unwrap();
        writeln!(out, "id = {}\nbus = {}\ndispatch_mw = {}", g.id, g.bus, g.dispatch_mw).unwrap();
        let nums = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "h = {}", nums(&g.shaft.inertias)).unwrap();
        writeln!(out, "d = {}", nums(&g.shaft.dampings)).unwrap();
        writeln!(out, "k = {}", nums(&g.shaft.stiffnesses)).unwrap();
        writeln!(out, "bf = {}", nums(&g.shaft.power_fractions)).unwrap();
    }
    for (bus, mw) in &model.network.loads {
        writeln!(out, "\n[load]\nbus = {bus}\nmw = {mw}").unwrap();
    }
    let a = &model.attack;
    writeln!(out, "\n[attack]").unwrap();
    writeln!(out, "bus = {}", a.bus).unwrap();
    writeln!(out, "amplitude_pu = {}", a.amplitude_pu).unwrap();
    writeln!(out, "frequency_hz = {}", a.frequency_hz).unwrap();
    writeln!(out, "waveform = {}", a.waveform.as_str()).unwrap();
    writeln!(out, "start_s = {}", a.start_s).unwrap();
    writeln!(out, "duty = {}", a.duty).unwrap();
    out
}

/// Check every type invariant; violations are data, not errors.
pub fn validate(model: &SystemModel) -> ValidationReport {
    let mut v: Vec<Violation> = Vec::new();
    let mut push = |subject: &str, message: String| {
        v.push(Violation {
            subject: subject.to_string(),
            message,
        })
    };

    if model.network.base_mva <= 0.0 {
        push("system", format!("base_mva must be positive, got {}", model.network.base_mva));
    }
    let expected_omega = 2.0 * PI * model.nominal_frequency_hz * (2.0 / POLE_PAIRS);
    if (model.omega_0m - expected_omega).abs() > 1e-9 * expected_omega.abs().max(1.0) {
        push(
            "system",
            format!("omega_0m {} inconsistent with 2*pi*f*(2/p_f) = {}", model.omega_0m, expected_omega),
        );
    }

    for g in &model.generators {
        let subj = format!("generator {}", g.id);
        let sh = &g.shaft;
        if sh.inertias.iter().any(|&h| h <= 0.0) {
            push(&subj, format!("all inertias must be strictly positive, got {:?}", sh.inertias));
        }
        if sh.dampings.iter().any(|&d| d < 0.0) {
            push(&subj, format!("dampings must be non-negative, got {:?}", sh.dampings));
        }
        if sh.stiffnesses.iter().any(|&k| k <= 0.0) {
            push(&subj, format!("stiffnesses must be strictly positive, got {:?}", sh.stiffnesses));
        }
        if sh.power_fractions.iter().any(|&f| f < 0.0) {
            push(&subj, format!("power fractions must be non-negative, got {:?}", sh.power_fractions));
        }
        let sum: f64 = sh.power_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            push(&subj, format!("fractions sum {sum} != 1"));
        }
        if g.dispatch_mw < 0.0 {
            push(&subj, format!("dispatch must be non-negative, got {} MW", g.dispatch_mw));
        }
        match model.bus(&g.bus) {
            None => push(&subj, format!("bus `{}` not declared", g.bus)),
            Some(b) if b.role != BusRole::Generator => {
                push(&subj, format!("bus `{}` has role {}, expected generator", g.bus, b.role.as_str()))
            }
            _ => {}
        }
    }

    // Each generator-role bus hosts exactly one generator.
    for b in &model.network.buses {
        if b.role == BusRole::Generator {
            let count = model.generators.iter().filter(|g| g.bus == b.id).count();
            if count != 1 {
                push(
                    &format!("bus {}", b.id),
                    format!("generator bus must host exactly one generator, hosts {count}"),
                );
            }
        }
    }

    for l in &model.network.lines {
        if l.x_pu <= 0.0 {
            push(
                &format!("line {}-{}", l.from, l.to),
                format!("reactance must be strictly positive, got {}", l.x_pu),
            );
        }
    }

    let slack_count = model.network.buses.iter().filter(|b| b.role == BusRole::Slack).count();
    if slack_count != 1 {
        push("network", format!("exactly one slack bus required, found {slack_count}"));
    }

    if !network_connected(&model.network) {
        push("network", "network not connected".to_string());
    }

    match model.bus(&model.network.attack_bus) {
        None => push("attack", format!("attack bus `{}` not declared", model.network.attack_bus)),
        Some(b) if b.role == BusRole::Generator => {
            push("attack", format!("attack bus `{}` must have role load or slack", b.id))
        }
        _ => {
            if !model.network.loads.contains_key(&model.network.attack_bus) {
                push("attack", format!("attack bus `{}` has no entry in loads", model.network.attack_bus));
            }
        }
    }
    let a = &model.attack;
    if a.amplitude_pu < 0.0 {
        push("attack", format!("amplitude must be non-negative, got {}", a.amplitude_pu));
    }
    if a.waveform != Waveform::None && a.frequency_hz <= 0.0 {
        push("attack", format!("frequency must be positive for periodic waveforms, got {}", a.frequency_hz));
    }
    if !(a.duty > 0.0 && a.duty < 1.0) {
        push("attack", format!("duty must lie in (0, 1), got {}", a.duty));
    }

    ValidationReport { violations: v }
}

fn network_connected(net: &NetworkModel) -> bool {
    if net.buses.is_empty() {
        return false;
    }
    let index: BTreeMap<&str, usize> = net.buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
    let mut adj = vec![Vec::new(); net.buses.len()];
    for l in &net.lines {
        if let (Some(&i), Some(&j)) = (index.get(l.from.as_str()), index.get(l.to.as_str())) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; net.buses.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
