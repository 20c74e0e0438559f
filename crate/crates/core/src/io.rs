//! The `.feeder.json` document: parsing, unit conversion and radiality.
//!
//! Records carry a `units` flag. With `"si"` powers are in W/var/VA,
//! impedances in ohms, admittances in siemens and currents in amperes; with
//! `"pu"` they are already per-unit. Voltage set points, slack magnitudes
//! and droop settings are always per-unit, and prices are always per
//! per-unit of active power.
//!
//! Bases are per phase: `S_base` is the single-phase power base and every
//! bus has a line-to-neutral kV base, so `Z_base = kV² · 10⁶ / S_base` and
//! `I_base = S_base / (kV · 1000)`.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::network::{
    validate, Bus, Capacitor, DerUnit, DroopSettings, FeederModel, Line, Load, MatrixError, PerPhase, Phase, PhaseMatrix,
    PhaseSet, PvUnit, Substation, TransformerLoss, Violation,
};

pub const SCHEMA_VERSION: u32 = 1;

pub type PhaseMap<T> = BTreeMap<Phase, T>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeederError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("duplicate {kind} id '{id}'")]
    Duplicate { kind: &'static str, id: String },
    #[error("unresolved reference {0}")]
    Unresolved(String),
    #[error("{entity}: bad phase set '{text}'")]
    Phases { entity: String, text: String },
    #[error("{entity}: {message}")]
    Record { entity: String, message: String },
    #[error("line {line}: {source}")]
    Matrix { line: String, source: MatrixError },
    #[error("non-positive base value: {0}")]
    Base(String),
    #[error("feeder fails validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Si,
    Pu,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub base: BaseRecord,
    pub buses: Vec<BusRecord>,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
    #[serde(default)]
    pub loads: Vec<LoadRecord>,
    #[serde(default)]
    pub transformers: Vec<TransformerRecord>,
    #[serde(default)]
    pub capacitors: Vec<CapacitorRecord>,
    #[serde(default)]
    pub pvs: Vec<PvRecord>,
    #[serde(default)]
    pub ders: Vec<DerRecord>,
    #[serde(default)]
    pub substations: Vec<SubstationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRecord {
    /// Single-phase power base, VA.
    pub s_base_va: f64,
    /// Line-to-neutral kV base for buses that do not set their own.
    pub default_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: String,
    pub phases: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kv_base: Option<f64>,
}

/// Complex entries as `[re, im]`; rows are a lower triangle or full.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub phases: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    /// Multiplies `z` and `y` (per-length data times a length).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub z: MatrixRows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<MatrixRows>,
    pub ampacity: PhaseMap<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub id: String,
    pub bus: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    pub p: PhaseMap<f64>,
    pub q: PhaseMap<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerRecord {
    pub id: String,
    pub bus: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    pub no_load_loss: PhaseMap<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitorRecord {
    pub id: String,
    pub bus: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    pub q_max: PhaseMap<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvRecord {
    pub id: String,
    pub bus: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    pub s_rating: PhaseMap<f64>,
    pub p_available: PhaseMap<f64>,
    pub price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub droop: Option<PhaseMap<DroopSettings>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerRecord {
    pub id: String,
    pub bus: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    pub p_max: PhaseMap<f64>,
    pub q_max: PhaseMap<f64>,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstationRecord {
    pub id: String,
    pub bus: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub units: Units,
    pub v_slack: PhaseMap<f64>,
    pub price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<PhaseMap<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<PhaseMap<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<PhaseMap<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<PhaseMap<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown fields are errors.
    #[default]
    Strict,
    /// Unknown fields are logged and ignored.
    Lenient,
}

/// Parses and cross-checks a feeder document. Lower-triangular matrices are
/// completed to full symmetric rows.
pub fn parse_feeder(text: &str, strictness: Strictness) -> Result<FeederDocument, FeederError> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let mut doc: FeederDocument = serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()))
        .and_then(|doc| de.end().map(|_| doc))
        .map_err(|e| FeederError::Syntax {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?;
    if let Some(first) = unknown.first() {
        match strictness {
            Strictness::Strict => return Err(FeederError::UnknownField(first.clone())),
            Strictness::Lenient => {
                for path in &unknown {
                    warn!("ignoring unknown field {path}");
                }
            }
        }
    }
    if doc.schema_version != SCHEMA_VERSION {
        return Err(FeederError::SchemaVersion(doc.schema_version));
    }
    check_references(&doc)?;
    for line in &mut doc.lines {
        let phases = parse_phases(&line.id, &line.phases)?;
        line.z = complete(&line.id, phases, &line.z)?;
        if let Some(y) = &line.y {
            line.y = Some(complete(&line.id, phases, y)?);
        }
    }
    Ok(doc)
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(k) => message[..k].to_string(),
        None => message.to_string(),
    }
}

fn complete(line: &str, phases: PhaseSet, rows: &MatrixRows) -> Result<MatrixRows, FeederError> {
    let m = matrix(line, phases, rows)?;
    Ok((0..m.dim())
        .map(|r| (0..m.dim()).map(|c| [m.at(r, c).re, m.at(r, c).im]).collect())
        .collect())
}

fn matrix(line: &str, phases: PhaseSet, rows: &MatrixRows) -> Result<PhaseMatrix, FeederError> {
    let rows: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
        .collect();
    PhaseMatrix::from_rows(phases, &rows).map_err(|source| FeederError::Matrix {
        line: line.to_string(),
        source,
    })
}

pub fn parse_phases(entity: &str, text: &str) -> Result<PhaseSet, FeederError> {
    let bad = || FeederError::Phases {
        entity: entity.to_string(),
        text: text.to_string(),
    };
    let mut set = PhaseSet::empty();
    for ch in text.chars() {
        let phase: Phase = ch.to_string().parse().map_err(|_| bad())?;
        if set.contains(phase) {
            return Err(bad());
        }
        set.insert(phase);
    }
    if set.is_empty() {
        return Err(bad());
    }
    Ok(set)
}

fn check_references(doc: &FeederDocument) -> Result<(), FeederError> {
    fn unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<(), FeederError> {
        let mut seen = HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                return Err(FeederError::Duplicate {
                    kind,
                    id: id.to_string(),
                });
            }
        }
        Ok(())
    }
    unique("bus", doc.buses.iter().map(|b| b.id.as_str()))?;
    unique("line", doc.lines.iter().map(|r| r.id.as_str()))?;
    unique("load", doc.loads.iter().map(|r| r.id.as_str()))?;
    unique("transformer", doc.transformers.iter().map(|r| r.id.as_str()))?;
    unique("capacitor", doc.capacitors.iter().map(|r| r.id.as_str()))?;
    unique("pv", doc.pvs.iter().map(|r| r.id.as_str()))?;
    unique("der", doc.ders.iter().map(|r| r.id.as_str()))?;
    unique("substation", doc.substations.iter().map(|r| r.id.as_str()))?;

    let buses: HashSet<&str> = doc.buses.iter().map(|b| b.id.as_str()).collect();
    let referenced = doc
        .lines
        .iter()
        .flat_map(|l| [l.from.as_str(), l.to.as_str()])
        .chain(doc.loads.iter().map(|r| r.bus.as_str()))
        .chain(doc.transformers.iter().map(|r| r.bus.as_str()))
        .chain(doc.capacitors.iter().map(|r| r.bus.as_str()))
        .chain(doc.pvs.iter().map(|r| r.bus.as_str()))
        .chain(doc.ders.iter().map(|r| r.bus.as_str()))
        .chain(doc.substations.iter().map(|r| r.bus.as_str()));
    for id in referenced {
        if !buses.contains(id) {
            return Err(FeederError::Unresolved(id.to_string()));
        }
    }
    Ok(())
}

/// Per-phase conversion factors of one bus zone.
#[derive(Debug, Clone, Copy)]
struct Zone {
    z_base: f64,
    i_base: f64,
}

impl Zone {
    fn new(s_base: f64, kv: f64) -> Self {
        Zone {
            z_base: kv * kv * 1e6 / s_base,
            i_base: s_base / (kv * 1000.0),
        }
    }
}

fn per_phase(map: &PhaseMap<f64>, scale: f64) -> PerPhase<f64> {
    map.iter().map(|(p, v)| (*p, v * scale)).collect()
}

fn phase_map(values: &PerPhase<f64>, scale: f64) -> PhaseMap<f64> {
    values.iter().map(|(p, v)| (p, v * scale)).collect()
}

/// Converts a parsed document to the per-unit model and validates it.
pub fn to_per_unit(doc: &FeederDocument) -> Result<FeederModel, FeederError> {
    let s_base = doc.base.s_base_va;
    if !(s_base.is_finite() && s_base > 0.0) {
        return Err(FeederError::Base(format!("s_base_va = {s_base}")));
    }
    let mut model = FeederModel::new(doc.name.clone(), s_base);
    let mut zones = Vec::new();
    for b in &doc.buses {
        let kv = b.kv_base.unwrap_or(doc.base.default_kv);
        if !(kv.is_finite() && kv > 0.0) {
            return Err(FeederError::Base(format!("kv_base of bus {} = {kv}", b.id)));
        }
        let phases = parse_phases(&b.id, &b.phases)?;
        model.buses.push(Bus {
            id: b.id.clone(),
            phases,
            kv_base: kv,
        });
        zones.push(Zone::new(s_base, kv));
    }
    let bus = |id: &str| model_bus(&doc.buses, id);
    let power = |units: Units| if units == Units::Si { 1.0 / s_base } else { 1.0 };

    for r in &doc.lines {
        let from = bus(&r.from)?;
        let to = bus(&r.to)?;
        let phases = parse_phases(&r.id, &r.phases)?;
        let zone = line_zone(r, &zones, from, to)?;
        let length = r.length.unwrap_or(1.0);
        let (z_scale, y_scale, i_scale) = match (r.units, zone) {
            (Units::Pu, _) => (length, length, 1.0),
            (Units::Si, Some(z)) => (length / z.z_base, length * z.z_base, 1.0 / z.i_base),
            (Units::Si, None) => unreachable!("line_zone rejects SI lines across zones"),
        };
        let z = matrix(&r.id, phases, &r.z)?.scaled(z_scale);
        let y = match &r.y {
            Some(rows) => matrix(&r.id, phases, rows)?.scaled(y_scale),
            None => PhaseMatrix::zeros(phases),
        };
        model.lines.push(Line {
            id: r.id.clone(),
            from,
            to,
            phases,
            series_impedance: z,
            shunt_admittance: y,
            ampacity: per_phase(&r.ampacity, i_scale),
        });
    }
    for r in &doc.loads {
        model.loads.push(Load {
            id: r.id.clone(),
            bus: bus(&r.bus)?,
            p: per_phase(&r.p, power(r.units)),
            q: per_phase(&r.q, power(r.units)),
        });
    }
    for r in &doc.transformers {
        model.transformers.push(TransformerLoss {
            id: r.id.clone(),
            bus: bus(&r.bus)?,
            loss: per_phase(&r.no_load_loss, power(r.units)),
        });
    }
    for r in &doc.capacitors {
        model.capacitors.push(Capacitor {
            id: r.id.clone(),
            bus: bus(&r.bus)?,
            q_max: per_phase(&r.q_max, power(r.units)),
        });
    }
    for r in &doc.pvs {
        model.pvs.push(PvUnit {
            id: r.id.clone(),
            bus: bus(&r.bus)?,
            rating: per_phase(&r.s_rating, power(r.units)),
            p_available: per_phase(&r.p_available, power(r.units)),
            droop: r.droop.as_ref().map(|d| d.iter().map(|(p, s)| (*p, *s)).collect()),
            price: r.price,
        });
    }
    for r in &doc.ders {
        model.ders.push(DerUnit {
            id: r.id.clone(),
            bus: bus(&r.bus)?,
            p_max: per_phase(&r.p_max, power(r.units)),
            q_max: per_phase(&r.q_max, power(r.units)),
            price: r.price,
        });
    }
    for r in &doc.substations {
        let scale = power(r.units);
        let opt = |m: &Option<PhaseMap<f64>>| m.as_ref().map(|m| per_phase(m, scale)).unwrap_or_default();
        model.substations.push(Substation {
            id: r.id.clone(),
            bus: bus(&r.bus)?,
            v_slack: per_phase(&r.v_slack, 1.0),
            price: r.price,
            p_min: opt(&r.p_min),
            p_max: opt(&r.p_max),
            q_min: opt(&r.q_min),
            q_max: opt(&r.q_max),
        });
    }

    let violations = validate(&model);
    if !violations.is_empty() {
        return Err(FeederError::Invalid(violations));
    }
    Ok(model)
}

fn model_bus(buses: &[BusRecord], id: &str) -> Result<usize, FeederError> {
    buses
        .iter()
        .position(|b| b.id == id)
        .ok_or_else(|| FeederError::Unresolved(id.to_string()))
}

/// The common zone of both line ends, `None` if the ends differ (allowed only
/// for per-unit records, e.g. a transformer modelled as a line).
fn line_zone(r: &LineRecord, zones: &[Zone], from: usize, to: usize) -> Result<Option<Zone>, FeederError> {
    let (a, b) = (zones[from], zones[to]);
    let same = ((a.z_base - b.z_base) / a.z_base).abs() < 1e-12;
    if same {
        return Ok(Some(a));
    }
    if r.units == Units::Si {
        return Err(FeederError::Record {
            entity: r.id.clone(),
            message: "line joins buses with different kV bases; give it in per-unit".into(),
        });
    }
    Ok(None)
}

fn matrix_rows(m: &PhaseMatrix, scale: f64) -> MatrixRows {
    (0..m.dim())
        .map(|r| (0..m.dim()).map(|c| [m.at(r, c).re * scale, m.at(r, c).im * scale]).collect())
        .collect()
}

/// Converts a model back to a document. With `Units::Si`, every record is
/// written in SI except lines whose ends sit in different voltage zones.
pub fn to_document(model: &FeederModel, units: Units) -> FeederDocument {
    let si = units == Units::Si;
    let s_base = model.s_base_va;
    let power = if si { s_base } else { 1.0 };
    let default_kv = model.buses.first().map(|b| b.kv_base).unwrap_or(1.0);
    let zones: Vec<Zone> = model.buses.iter().map(|b| Zone::new(s_base, b.kv_base)).collect();
    let bus_id = |k: usize| model.buses[k].id.clone();

    let lines = model
        .lines
        .iter()
        .map(|l| {
            let (a, b) = (zones[l.from], zones[l.to]);
            let same = ((a.z_base - b.z_base) / a.z_base).abs() < 1e-12;
            let line_units = if si && same { Units::Si } else { Units::Pu };
            let (zs, ys, is) = if line_units == Units::Si {
                (a.z_base, 1.0 / a.z_base, a.i_base)
            } else {
                (1.0, 1.0, 1.0)
            };
            LineRecord {
                id: l.id.clone(),
                from: bus_id(l.from),
                to: bus_id(l.to),
                phases: l.phases.to_string(),
                units: line_units,
                length: None,
                z: matrix_rows(&l.series_impedance, zs),
                y: (!l.shunt_admittance.is_zero()).then(|| matrix_rows(&l.shunt_admittance, ys)),
                ampacity: phase_map(&l.ampacity, is),
            }
        })
        .collect();

    FeederDocument {
        schema_version: SCHEMA_VERSION,
        name: model.name.clone(),
        base: BaseRecord {
            s_base_va: s_base,
            default_kv,
        },
        buses: model
            .buses
            .iter()
            .map(|b| BusRecord {
                id: b.id.clone(),
                phases: b.phases.to_string(),
                kv_base: (b.kv_base != default_kv).then_some(b.kv_base),
            })
            .collect(),
        lines,
        loads: model
            .loads
            .iter()
            .map(|r| LoadRecord {
                id: r.id.clone(),
                bus: bus_id(r.bus),
                units,
                p: phase_map(&r.p, power),
                q: phase_map(&r.q, power),
            })
            .collect(),
        transformers: model
            .transformers
            .iter()
            .map(|r| TransformerRecord {
                id: r.id.clone(),
                bus: bus_id(r.bus),
                units,
                no_load_loss: phase_map(&r.loss, power),
            })
            .collect(),
        capacitors: model
            .capacitors
            .iter()
            .map(|r| CapacitorRecord {
                id: r.id.clone(),
                bus: bus_id(r.bus),
                units,
                q_max: phase_map(&r.q_max, power),
            })
            .collect(),
        pvs: model
            .pvs
            .iter()
            .map(|r| PvRecord {
                id: r.id.clone(),
                bus: bus_id(r.bus),
                units,
                s_rating: phase_map(&r.rating, power),
                p_available: phase_map(&r.p_available, power),
                price: r.price,
                droop: r.droop.as_ref().map(|d| d.iter().map(|(p, s)| (p, *s)).collect()),
            })
            .collect(),
        ders: model
            .ders
            .iter()
            .map(|r| DerRecord {
                id: r.id.clone(),
                bus: bus_id(r.bus),
                units,
                p_max: phase_map(&r.p_max, power),
                q_max: phase_map(&r.q_max, power),
                price: r.price,
            })
            .collect(),
        substations: model
            .substations
            .iter()
            .map(|r| {
                let opt = |m: &PerPhase<f64>| (!m.is_empty()).then(|| phase_map(m, power));
                SubstationRecord {
                    id: r.id.clone(),
                    bus: bus_id(r.bus),
                    units,
                    v_slack: phase_map(&r.v_slack, 1.0),
                    price: r.price,
                    p_min: opt(&r.p_min),
                    p_max: opt(&r.p_max),
                    q_min: opt(&r.q_min),
                    q_max: opt(&r.q_max),
                }
            })
            .collect(),
    }
}

pub fn serialize_feeder(doc: &FeederDocument) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("feeder documents always serialize");
    text.push('\n');
    text
}

/// Parses, converts and validates in one step.
pub fn load_feeder_str(text: &str, strictness: Strictness) -> Result<FeederModel, FeederError> {
    to_per_unit(&parse_feeder(text, strictness)?)
}

pub fn load_feeder(path: &Path, strictness: Strictness) -> Result<FeederModel, FeederError> {
    let text = std::fs::read_to_string(path).map_err(|e| FeederError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_feeder_str(&text, strictness)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RadialError {
    #[error("disconnected")]
    Disconnected,
    #[error("feeder has no substation bus")]
    NoSubstation,
}

/// Breadth-first parent/child ordering of a radial feeder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadialOrder {
    /// Bus indices, substation first, each bus after its parent.
    pub order: Vec<usize>,
    /// For each bus, the parent bus and the line joining them.
    pub parent: Vec<Option<(usize, usize)>>,
}

impl RadialOrder {
    /// Children of each bus as `(child, line)` pairs, in ordering sequence.
    pub fn children(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.parent.len()];
        for &b in &self.order {
            if let Some((p, l)) = self.parent[b] {
                out[p].push((b, l));
            }
        }
        out
    }
}

/// `Ok(Some(order))` for a tree, `Ok(None)` when the feeder has a loop.
pub fn check_radial(feeder: &FeederModel) -> Result<Option<RadialOrder>, RadialError> {
    let root = feeder.substation_bus().ok_or(RadialError::NoSubstation)?;
    let n = feeder.buses.len();
    let mut adjacency = vec![Vec::new(); n];
    for (k, l) in feeder.lines.iter().enumerate() {
        adjacency[l.from].push((l.to, k));
        adjacency[l.to].push((l.from, k));
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(b) = queue.pop_front() {
        order.push(b);
        for &(next, line) in &adjacency[b] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((b, line));
                queue.push_back(next);
            }
        }
    }
    if order.len() != n {
        return Err(RadialError::Disconnected);
    }
    if feeder.lines.len() != n - 1 {
        return Ok(None);
    }
    Ok(Some(RadialOrder { order, parent }))
}
