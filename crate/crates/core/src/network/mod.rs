//! Per-unit representation of an unbalanced distribution feeder.
//!
//! Every quantity stored here is already per-unit on the feeder's single-phase
//! power base and the line-to-neutral voltage base of the bus it belongs to.
//! Generation is positive in its own field and demand is positive in its own
//! field; the balance equations built later carry the signs.

mod matrix;
mod phase;

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use matrix::{MatrixError, PhaseMatrix};
pub use phase::{PerPhase, Phase, PhaseSet};

/// Cap used in place of an unbounded device limit.
pub const DEFAULT_POWER_CAP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("unknown bus '{0}'")]
    UnknownBus(String),
    #[error("duplicate bus id '{0}'")]
    DuplicateBus(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Line-to-neutral voltage base in kV.
    pub kv_base: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub phases: PhaseSet,
    pub series_impedance: PhaseMatrix,
    pub shunt_admittance: PhaseMatrix,
    pub ampacity: PerPhase<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub id: String,
    pub bus: usize,
    pub p: PerPhase<f64>,
    pub q: PerPhase<f64>,
}

/// Constant no-load (core) loss drawn at a bus.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerLoss {
    pub id: String,
    pub bus: usize,
    pub loss: PerPhase<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capacitor {
    pub id: String,
    pub bus: usize,
    pub q_max: PerPhase<f64>,
}

/// Set points of a Volt-VAr (Q-V) characteristic, per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroopSettings {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub q_max: f64,
}

impl DroopSettings {
    /// IEEE 1547-2018 default set points with the given reactive limit.
    pub fn ieee1547(q_max: f64) -> Self {
        DroopSettings {
            v1: 0.94,
            v2: 0.98,
            v3: 1.02,
            v4: 1.06,
            q_max,
        }
    }

    /// Broken invariants, as short descriptions.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let finite = [self.v1, self.v2, self.v3, self.v4, self.q_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            out.push("set points finite");
            return out;
        }
        if self.v1 >= self.v2 {
            out.push("v1 < v2");
        }
        if self.v2 >= self.v3 {
            out.push("dead-band nonempty");
        }
        if self.v3 >= self.v4 {
            out.push("v3 < v4");
        }
        if self.q_max <= 0.0 {
            out.push("q_max > 0");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvUnit {
    pub id: String,
    pub bus: usize,
    /// Apparent power rating per phase.
    pub rating: PerPhase<f64>,
    pub p_available: PerPhase<f64>,
    /// Present for inverters running a Volt-VAr controller.
    pub droop: Option<PerPhase<DroopSettings>>,
    pub price: f64,
}

impl PvUnit {
    pub fn phases(&self) -> PhaseSet {
        self.rating.phases()
    }

    pub fn has_droop(&self) -> bool {
        self.droop.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerUnit {
    pub id: String,
    pub bus: usize,
    pub p_max: PerPhase<f64>,
    pub q_max: PerPhase<f64>,
    pub price: f64,
}

impl DerUnit {
    pub fn phases(&self) -> PhaseSet {
        self.p_max.phases()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substation {
    pub id: String,
    pub bus: usize,
    /// Slack voltage magnitude; angles are fixed at 0, -120 and +120 degrees.
    pub v_slack: PerPhase<f64>,
    pub price: f64,
    pub p_min: PerPhase<f64>,
    pub p_max: PerPhase<f64>,
    pub q_min: PerPhase<f64>,
    pub q_max: PerPhase<f64>,
}

impl Substation {
    pub fn phases(&self) -> PhaseSet {
        self.v_slack.phases()
    }

    /// Active-power box for `phase`, falling back to the default cap.
    pub fn p_bounds(&self, phase: Phase) -> (f64, f64) {
        (
            self.p_min.get(phase).copied().unwrap_or(-DEFAULT_POWER_CAP),
            self.p_max.get(phase).copied().unwrap_or(DEFAULT_POWER_CAP),
        )
    }

    pub fn q_bounds(&self, phase: Phase) -> (f64, f64) {
        (
            self.q_min.get(phase).copied().unwrap_or(-DEFAULT_POWER_CAP),
            self.q_max.get(phase).copied().unwrap_or(DEFAULT_POWER_CAP),
        )
    }
}

/// Indices of the devices attached to one bus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Attachments {
    pub substations: Vec<usize>,
    pub ders: Vec<usize>,
    pub droop_pvs: Vec<usize>,
    pub plain_pvs: Vec<usize>,
    pub loads: Vec<usize>,
    pub transformers: Vec<usize>,
    pub capacitors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeederModel {
    pub name: String,
    /// Single-phase power base in VA.
    pub s_base_va: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub loads: Vec<Load>,
    pub transformers: Vec<TransformerLoss>,
    pub capacitors: Vec<Capacitor>,
    pub pvs: Vec<PvUnit>,
    pub ders: Vec<DerUnit>,
    pub substations: Vec<Substation>,
}

/// One broken invariant, naming the offending entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub entity: String,
    pub invariant: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.invariant)
    }
}

impl FeederModel {
    pub fn new(name: impl Into<String>, s_base_va: f64) -> Self {
        FeederModel {
            name: name.into(),
            s_base_va,
            buses: Vec::new(),
            lines: Vec::new(),
            loads: Vec::new(),
            transformers: Vec::new(),
            capacitors: Vec::new(),
            pvs: Vec::new(),
            ders: Vec::new(),
            substations: Vec::new(),
        }
    }

    pub fn add_bus(&mut self, id: impl Into<String>, phases: PhaseSet, kv_base: f64) -> Result<usize, NetworkError> {
        let id = id.into();
        if self.bus_index(&id).is_some() {
            return Err(NetworkError::DuplicateBus(id));
        }
        self.buses.push(Bus { id, phases, kv_base });
        Ok(self.buses.len() - 1)
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus(&self, id: &str) -> Result<usize, NetworkError> {
        self.bus_index(id).ok_or_else(|| NetworkError::UnknownBus(id.to_string()))
    }

    /// The bus holding the (single) substation.
    pub fn substation_bus(&self) -> Option<usize> {
        self.substations.first().map(|s| s.bus)
    }

    pub fn attachments(&self, bus: usize) -> Attachments {
        fn at<T>(items: &[T], bus: usize, bus_of: impl Fn(&T) -> usize) -> Vec<usize> {
            items
                .iter()
                .enumerate()
                .filter(|(_, d)| bus_of(d) == bus)
                .map(|(k, _)| k)
                .collect()
        }
        Attachments {
            substations: at(&self.substations, bus, |d| d.bus),
            ders: at(&self.ders, bus, |d| d.bus),
            droop_pvs: at(&self.pvs, bus, |d| d.bus)
                .into_iter()
                .filter(|&k| self.pvs[k].has_droop())
                .collect(),
            plain_pvs: at(&self.pvs, bus, |d| d.bus)
                .into_iter()
                .filter(|&k| !self.pvs[k].has_droop())
                .collect(),
            loads: at(&self.loads, bus, |d| d.bus),
            transformers: at(&self.transformers, bus, |d| d.bus),
            capacitors: at(&self.capacitors, bus, |d| d.bus),
        }
    }

    /// Lines incident to `bus`, with `+1` where the line's current leaves the
    /// bus under the from-to convention and `-1` at the receiving end.
    pub fn incident_lines(&self, bus: usize) -> Vec<(usize, i8)> {
        self.lines
            .iter()
            .enumerate()
            .filter_map(|(k, l)| {
                if l.from == bus {
                    Some((k, 1))
                } else if l.to == bus {
                    Some((k, -1))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Number of (bus, phase) pairs.
    pub fn bus_phase_count(&self) -> usize {
        self.buses.iter().map(|b| b.phases.len()).sum()
    }

    pub fn has_droop_pvs(&self) -> bool {
        self.pvs.iter().any(PvUnit::has_droop)
    }

    /// Whether every bus can be reached from the first bus through lines.
    pub fn is_connected(&self) -> bool {
        if self.buses.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(b) = queue.pop_front() {
            for line in &self.lines {
                let next = if line.from == b {
                    line.to
                } else if line.to == b {
                    line.from
                } else {
                    continue;
                };
                if next < seen.len() && !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Lines attached to the bus named `bus_id`, with orientation signs.
pub fn attached_lines<'a>(feeder: &'a FeederModel, bus_id: &str) -> Result<Vec<(&'a Line, i8)>, NetworkError> {
    let bus = feeder.bus(bus_id)?;
    Ok(feeder
        .incident_lines(bus)
        .into_iter()
        .map(|(k, s)| (&feeder.lines[k], s))
        .collect())
}

/// Every broken invariant of `feeder`. Empty means the model is usable.
pub fn validate(feeder: &FeederModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: &str, invariant: &str| {
        out.push(Violation {
            entity: entity.to_string(),
            invariant: invariant.to_string(),
        })
    };

    if !(feeder.s_base_va.is_finite() && feeder.s_base_va > 0.0) {
        push("feeder", "s_base > 0");
    }

    let mut bus_ids = HashSet::new();
    for bus in &feeder.buses {
        let name = format!("bus {}", bus.id);
        if !bus_ids.insert(bus.id.as_str()) {
            push(&name, "unique id");
        }
        if bus.phases.is_empty() {
            push(&name, "phases nonempty");
        }
        if !(bus.kv_base.is_finite() && bus.kv_base > 0.0) {
            push(&name, "kv_base > 0");
        }
    }

    let nbus = feeder.buses.len();
    let bus_phases = |b: usize| feeder.buses.get(b).map(|bus| bus.phases);

    let mut line_ids = HashSet::new();
    for line in &feeder.lines {
        let name = format!("line {}", line.id);
        if !line_ids.insert(line.id.as_str()) {
            push(&name, "unique id");
        }
        if line.from >= nbus || line.to >= nbus {
            push(&name, "endpoints exist");
            continue;
        }
        if line.from == line.to {
            push(&name, "distinct endpoints");
        }
        if line.phases.is_empty() {
            push(&name, "phases nonempty");
        }
        if !line.phases.is_subset(feeder.buses[line.from].phases) || !line.phases.is_subset(feeder.buses[line.to].phases) {
            push(&name, "phases subset of bus phases");
        }
        if line.series_impedance.phases() != line.phases || line.shunt_admittance.phases() != line.phases {
            push(&name, "matrix phases match line phases");
            continue;
        }
        if !line.series_impedance.is_symmetric() {
            push(&name, "Z symmetric");
        }
        if !line.shunt_admittance.is_symmetric() {
            push(&name, "y symmetric");
        }
        let z = &line.series_impedance;
        if (0..z.dim()).any(|k| z.at(k, k).norm() == 0.0 || !z.at(k, k).norm().is_finite()) {
            push(&name, "Z diagonal nonzero");
        }
        let ok_amp = line.phases.iter().all(|p| {
            line.ampacity
                .get(p)
                .map(|a| a.is_finite() && *a > 0.0)
                .unwrap_or(false)
        });
        if !ok_amp || !line.ampacity.phases().is_subset(line.phases) {
            push(&name, "I_max > 0");
        }
    }

    let mut device_ids = HashSet::new();
    let mut check_device = |out: &mut Vec<Violation>, kind: &str, id: &str, bus: usize, phases: PhaseSet| {
        let name = format!("{kind} {id}");
        if !device_ids.insert(id.to_string()) {
            out.push(Violation {
                entity: name.clone(),
                invariant: "unique id".into(),
            });
        }
        match bus_phases(bus) {
            None => out.push(Violation {
                entity: name,
                invariant: "bus exists".into(),
            }),
            Some(bp) => {
                if phases.is_empty() || !phases.is_subset(bp) {
                    out.push(Violation {
                        entity: name,
                        invariant: "phases subset of bus phases".into(),
                    });
                }
            }
        }
    };

    for load in &feeder.loads {
        check_device(&mut out, "load", &load.id, load.bus, load.p.phases().union(load.q.phases()));
        let name = format!("load {}", load.id);
        if load.p.iter().chain(load.q.iter()).any(|(_, v)| !v.is_finite()) {
            out.push(Violation {
                entity: name,
                invariant: "demands finite".into(),
            });
        }
    }
    for tr in &feeder.transformers {
        check_device(&mut out, "transformer", &tr.id, tr.bus, tr.loss.phases());
        if tr.loss.iter().any(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            out.push(Violation {
                entity: format!("transformer {}", tr.id),
                invariant: "L_T >= 0".into(),
            });
        }
    }
    for cap in &feeder.capacitors {
        check_device(&mut out, "capacitor", &cap.id, cap.bus, cap.q_max.phases());
        if cap.q_max.iter().any(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            out.push(Violation {
                entity: format!("capacitor {}", cap.id),
                invariant: "Q_C_max >= 0".into(),
            });
        }
    }
    for pv in &feeder.pvs {
        check_device(&mut out, "pv", &pv.id, pv.bus, pv.phases());
        let name = format!("pv {}", pv.id);
        let mut pv_push = |inv: &str| {
            out.push(Violation {
                entity: name.clone(),
                invariant: inv.to_string(),
            })
        };
        if pv.p_available.phases() != pv.phases() {
            pv_push("P_av given for every phase");
        }
        if !pv.price.is_finite() {
            pv_push("price finite");
        }
        for (p, s) in pv.rating.iter() {
            let av = pv.p_available.get(p).copied().unwrap_or(0.0);
            if !(s.is_finite() && *s > 0.0) {
                pv_push("S > 0");
            }
            if !(av.is_finite() && av >= 0.0) {
                pv_push("P_av >= 0");
            }
            if av > *s {
                pv_push("P_av <= S");
            }
        }
        if let Some(droop) = &pv.droop {
            if droop.phases() != pv.phases() {
                pv_push("droop settings for every phase");
            }
            for (p, settings) in droop.iter() {
                for v in settings.violations() {
                    pv_push(v);
                }
                if let Some(s) = pv.rating.get(p) {
                    if settings.q_max > *s {
                        pv_push("q_max <= S");
                    }
                }
            }
        }
    }
    for der in &feeder.ders {
        check_device(&mut out, "der", &der.id, der.bus, der.phases());
        let name = format!("der {}", der.id);
        if der.q_max.phases() != der.phases() {
            out.push(Violation {
                entity: name.clone(),
                invariant: "Q_max given for every phase".into(),
            });
        }
        if der.p_max.iter().any(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            out.push(Violation {
                entity: name.clone(),
                invariant: "P_max >= 0".into(),
            });
        }
        if der.q_max.iter().any(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            out.push(Violation {
                entity: name,
                invariant: "Q_max >= 0".into(),
            });
        }
    }
    for sub in &feeder.substations {
        check_device(&mut out, "substation", &sub.id, sub.bus, sub.phases());
        let name = format!("substation {}", sub.id);
        if let Some(bp) = bus_phases(sub.bus) {
            if sub.phases() != bp {
                out.push(Violation {
                    entity: name.clone(),
                    invariant: "slack voltage for every bus phase".into(),
                });
            }
        }
        if sub.v_slack.iter().any(|(_, v)| !(0.9..=1.1).contains(v)) {
            out.push(Violation {
                entity: name.clone(),
                invariant: "slack magnitude in [0.9, 1.1]".into(),
            });
        }
        for p in sub.phases().iter() {
            let (plo, phi) = sub.p_bounds(p);
            let (qlo, qhi) = sub.q_bounds(p);
            if !(plo.is_finite() && phi.is_finite() && plo <= phi && qlo.is_finite() && qhi.is_finite() && qlo <= qhi) {
                out.push(Violation {
                    entity: name.clone(),
                    invariant: "finite ordered power box".into(),
                });
            }
        }
    }

    let substation_buses: HashSet<usize> = feeder.substations.iter().map(|s| s.bus).collect();
    if feeder.substations.len() != 1 || substation_buses.len() != 1 {
        out.push(Violation {
            entity: "feeder".into(),
            invariant: "exactly one substation bus".into(),
        });
    }
    if !feeder.is_connected() {
        out.push(Violation {
            entity: "feeder".into(),
            invariant: "connected".into(),
        });
    }
    // Each phase of a non-slack bus needs a conductor to feed it.
    for (b, bus) in feeder.buses.iter().enumerate() {
        if substation_buses.contains(&b) {
            continue;
        }
        let served = feeder
            .incident_lines(b)
            .into_iter()
            .fold(PhaseSet::empty(), |acc, (k, _)| acc.union(feeder.lines[k].phases));
        if !bus.phases.is_subset(served) {
            out.push(Violation {
                entity: format!("bus {}", bus.id),
                invariant: "every phase served by a line".into(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;

    pub(crate) fn four_bus() -> FeederModel {
        let mut f = FeederModel::new("t", 1e6);
        let abc = PhaseSet::ABC;
        let ids = ["1", "2", "3", "4"];
        for id in ids {
            f.add_bus(id, abc, 2.4018).unwrap();
        }
        for k in 0..3 {
            f.lines.push(Line {
                id: format!("L{}", k + 1),
                from: k,
                to: k + 1,
                phases: abc,
                series_impedance: PhaseMatrix::diagonal(abc, Complex64::new(0.01, 0.02)),
                shunt_admittance: PhaseMatrix::zeros(abc),
                ampacity: PerPhase::uniform(abc, 2.0),
            });
        }
        f.substations.push(Substation {
            id: "S".into(),
            bus: 0,
            v_slack: PerPhase::uniform(abc, 1.0),
            price: 50.0,
            p_min: PerPhase::new(),
            p_max: PerPhase::new(),
            q_min: PerPhase::new(),
            q_max: PerPhase::new(),
        });
        f.loads.push(Load {
            id: "D".into(),
            bus: 3,
            p: PerPhase::uniform(abc, 0.1),
            q: PerPhase::uniform(abc, 0.05),
        });
        f.pvs.push(PvUnit {
            id: "PV".into(),
            bus: 2,
            rating: PerPhase::uniform(abc, 0.1),
            p_available: PerPhase::uniform(abc, 0.08),
            droop: Some(PerPhase::uniform(abc, DroopSettings::ieee1547(0.044))),
            price: 10.0,
        });
        f
    }

    #[test]
    fn well_formed_feeder_has_no_violations() {
        assert_eq!(validate(&four_bus()), vec![]);
    }

    #[test]
    fn empty_dead_band_is_one_violation() {
        let mut f = four_bus();
        let droop = f.pvs[0].droop.as_mut().unwrap();
        for p in Phase::ALL {
            let s = droop.get_mut(p).unwrap();
            s.v3 = s.v2;
        }
        // Restrict to one phase so exactly one violation appears.
        let phases = PhaseSet::single(Phase::A);
        let pv = &mut f.pvs[0];
        pv.rating = PerPhase::uniform(phases, 0.1);
        pv.p_available = PerPhase::uniform(phases, 0.08);
        pv.droop = Some(PerPhase::uniform(phases, DroopSettings { v3: 0.98, ..DroopSettings::ieee1547(0.044) }));
        let v = validate(&f);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].invariant, "dead-band nonempty");
    }

    #[test]
    fn available_power_above_rating() {
        let mut f = four_bus();
        let phases = PhaseSet::single(Phase::B);
        f.pvs[0] = PvUnit {
            id: "PV".into(),
            bus: 2,
            rating: PerPhase::uniform(phases, 1.0),
            p_available: PerPhase::uniform(phases, 1.2),
            droop: None,
            price: 0.0,
        };
        let v = validate(&f);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].invariant, "P_av <= S");
    }

    #[test]
    fn validate_is_pure() {
        let mut f = four_bus();
        f.lines[1].ampacity = PerPhase::new();
        f.substations[0].v_slack.set(Phase::A, 1.3);
        let first = validate(&f);
        assert_eq!(first, validate(&f));
        assert_eq!(first.len(), 2);
    }

    #[test]
    fn disconnected_feeder_flagged() {
        let mut f = four_bus();
        f.lines.pop();
        let v = validate(&f);
        assert!(v.iter().any(|v| v.invariant == "connected"));
    }

    #[test]
    fn attached_lines_orientation() {
        let f = four_bus();
        let at1: Vec<_> = attached_lines(&f, "1").unwrap().into_iter().map(|(l, s)| (l.id.clone(), s)).collect();
        assert_eq!(at1, vec![("L1".to_string(), 1)]);
        let at2: Vec<_> = attached_lines(&f, "2").unwrap().into_iter().map(|(l, s)| (l.id.clone(), s)).collect();
        assert_eq!(at2, vec![("L1".to_string(), -1), ("L2".to_string(), 1)]);
        assert_eq!(attached_lines(&f, "9").unwrap_err(), NetworkError::UnknownBus("9".into()));
    }

    #[test]
    fn star_fan_out() {
        let mut f = FeederModel::new("star", 1e6);
        let a = PhaseSet::single(Phase::A);
        for id in ["1", "2", "3"] {
            f.add_bus(id, a, 1.0).unwrap();
        }
        for (k, to) in [(12, 1), (13, 2)] {
            f.lines.push(Line {
                id: format!("line{k}"),
                from: 0,
                to,
                phases: a,
                series_impedance: PhaseMatrix::diagonal(a, Complex64::new(0.01, 0.01)),
                shunt_admittance: PhaseMatrix::zeros(a),
                ampacity: PerPhase::uniform(a, 1.0),
            });
        }
        let at: Vec<_> = attached_lines(&f, "1").unwrap().into_iter().map(|(l, s)| (l.id.clone(), s)).collect();
        assert_eq!(at, vec![("line12".to_string(), 1), ("line13".to_string(), 1)]);
    }

    #[test]
    fn signs_cancel_per_line() {
        let f = four_bus();
        for k in 0..f.lines.len() {
            let total: i32 = (0..f.buses.len())
                .flat_map(|b| f.incident_lines(b))
                .filter(|(l, _)| *l == k)
                .map(|(_, s)| s as i32)
                .sum();
            assert_eq!(total, 0);
        }
    }

    #[test]
    fn duplicate_bus_rejected() {
        let mut f = four_bus();
        assert_eq!(f.add_bus("2", PhaseSet::ABC, 1.0), Err(NetworkError::DuplicateBus("2".into())));
    }
}
