//! The Volt-VAr (Q-V) droop curve: a scalar evaluator and its exact
//! mixed-integer encoding.
//!
//! The curve has five zones. Binary `z_k = 0` selects zone `k`: its
//! membership rows (the voltage window) and its value row (Q on the branch)
//! become active, while rows of zones with `z_k = 1` are relaxed by Big-M
//! terms. At least one flag must be zero.

use serde::{Deserialize, Serialize};

use crate::milp::{MathProgram, Sense, VarId};
use crate::network::{DroopSettings, FeederModel, PerPhase, Phase, PvUnit};
use crate::opf::DispatchSolution;

/// Default curve-deviation tolerance, pu.
pub const CURVE_TOL: f64 = 1e-4;

/// Reactive output of the droop curve at local voltage `v`.
///
/// Continuous everywhere, so the half-open zone boundaries do not matter.
pub fn droop_q(v: f64, s: &DroopSettings) -> f64 {
    if v <= s.v1 {
        s.q_max
    } else if v < s.v2 {
        s.q_max * (s.v2 - v) / (s.v2 - s.v1)
    } else if v <= s.v3 {
        0.0
    } else if v < s.v4 {
        s.q_max * (v - s.v3) / (s.v3 - s.v4)
    } else {
        -s.q_max
    }
}

/// Zone (1..=5) containing `v`; boundaries go to the lower zone.
pub fn droop_zone(v: f64, s: &DroopSettings) -> u8 {
    if v <= s.v1 {
        1
    } else if v <= s.v2 {
        2
    } else if v <= s.v3 {
        3
    } else if v <= s.v4 {
        4
    } else {
        5
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DroopError {
    #[error("Big-M too small for {pv} phase {phase}: {which} = {value} < required {required}")]
    BigMTooSmall {
        pv: String,
        phase: Phase,
        which: &'static str,
        value: f64,
        required: f64,
    },
    #[error("PV {0} has no droop settings")]
    NoDroop(String),
    #[error("PV {pv} phase {phase}: invalid droop settings ({reason})")]
    Settings { pv: String, phase: Phase, reason: String },
    #[error("PV {pv} phase {phase}: missing voltage or reactive-power variable")]
    MissingVariable { pv: String, phase: Phase },
}

/// Relaxation constants for the Big-M rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMPolicy {
    /// Bound used in the voltage-membership rows, pu.
    pub m_voltage: f64,
    /// Bound used in the reactive-value rows, pu; `None` means `10 · q_max`
    /// of each PV phase.
    pub m_q: Option<f64>,
}

impl Default for BigMPolicy {
    fn default() -> Self {
        BigMPolicy {
            m_voltage: 1.0,
            m_q: None,
        }
    }
}

impl BigMPolicy {
    /// Smallest safe voltage constant for a voltage window `[v_min, v_max]`.
    pub fn min_m_voltage(s: &DroopSettings, v_min: f64, v_max: f64) -> f64 {
        (v_max - s.v1).max(s.v4 - v_min)
    }

    /// Smallest safe reactive constant: the farthest any extended branch line
    /// strays from a value in `[-q_max, q_max]` across the voltage window.
    pub fn min_m_q(s: &DroopSettings, v_min: f64, v_max: f64) -> f64 {
        s.q_max * (1.0 + (v_max - v_min) / (s.v2 - s.v1).min(s.v4 - s.v3))
    }

    /// The `(m_voltage, m_q)` pair for one PV phase, checked against the
    /// minimums.
    pub fn resolve(
        &self,
        pv: &str,
        phase: Phase,
        s: &DroopSettings,
        v_min: f64,
        v_max: f64,
    ) -> Result<(f64, f64), DroopError> {
        let mv = self.m_voltage;
        let mq = self.m_q.unwrap_or(10.0 * s.q_max);
        let need_v = Self::min_m_voltage(s, v_min, v_max);
        if mv < need_v {
            return Err(DroopError::BigMTooSmall {
                pv: pv.to_string(),
                phase,
                which: "m_voltage",
                value: mv,
                required: need_v,
            });
        }
        let need_q = Self::min_m_q(s, v_min, v_max);
        if mq < need_q {
            return Err(DroopError::BigMTooSmall {
                pv: pv.to_string(),
                phase,
                which: "m_q",
                value: mq,
                required: need_q,
            });
        }
        Ok((mv, mq))
    }
}

/// The five zone binaries of each droop phase of one PV.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneFlags {
    pub pv: String,
    pub flags: PerPhase<[VarId; 5]>,
}

impl ZoneFlags {
    /// The selected zone (first flag at zero) of `phase` in `values`.
    pub fn active_zone(&self, phase: Phase, values: &[f64]) -> Option<u8> {
        let flags = self.flags.get(phase)?;
        flags.iter().position(|z| values[z.0] < 0.5).map(|k| k as u8 + 1)
    }
}

/// Variables of one PV phase that the droop rows tie together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopHandles {
    /// Local voltage magnitude.
    pub v: VarId,
    /// Reactive output.
    pub q: VarId,
}

/// Adds the Big-M droop rows for every droop phase of `pv`.
///
/// `v_window` is the voltage-magnitude window enforced on the local bus; it
/// sizes the minimum safe Big-M values.
pub fn encode_droop_milp(
    pv: &PvUnit,
    handles: &PerPhase<DroopHandles>,
    prog: &mut MathProgram,
    policy: &BigMPolicy,
    v_window: (f64, f64),
) -> Result<ZoneFlags, DroopError> {
    let settings = pv.droop.as_ref().ok_or_else(|| DroopError::NoDroop(pv.id.clone()))?;
    let mut flags = PerPhase::new();
    for (phase, s) in settings.iter() {
        if let Some(reason) = s.violations().first() {
            return Err(DroopError::Settings {
                pv: pv.id.clone(),
                phase,
                reason: reason.to_string(),
            });
        }
        let h = handles.get(phase).ok_or_else(|| DroopError::MissingVariable {
            pv: pv.id.clone(),
            phase,
        })?;
        let (mv, mq) = policy.resolve(&pv.id, phase, s, v_window.0, v_window.1)?;
        let tag = format!("{}.{phase}", pv.id);
        let z: [VarId; 5] = std::array::from_fn(|k| prog.add_binary(format!("z{}.{tag}", k + 1)));
        let (v, q) = (h.v, h.q);
        let k2 = s.q_max / (s.v2 - s.v1);
        let k4 = s.q_max / (s.v3 - s.v4);
        let row = |name: &str| format!("{name}.{tag}");
        let abs_le = |prog: &mut MathProgram, name: &str, terms: &[(VarId, f64)], constant: f64, zk: VarId| {
            // |terms + constant| <= mq·zk as two rows.
            let pos = terms.iter().copied().chain([(zk, -mq)]);
            prog.add_constraint(row(&format!("{name}+")), pos, Sense::Le, -constant);
            let neg = terms.iter().map(|(x, a)| (*x, -a)).chain([(zk, -mq)]);
            prog.add_constraint(row(&format!("{name}-")), neg, Sense::Le, constant);
        };

        // Zone 1: v <= v1, q = q_max.
        prog.add_constraint(row("dz1v"), [(v, 1.0), (z[0], -mv)], Sense::Le, s.v1);
        abs_le(prog, "dz1q", &[(q, 1.0)], -s.q_max, z[0]);
        // Zone 2: v1 <= v <= v2, q = -k2 (v - v2).
        prog.add_constraint(row("dz2lo"), [(v, 1.0), (z[1], mv)], Sense::Ge, s.v1);
        prog.add_constraint(row("dz2hi"), [(v, 1.0), (z[1], -mv)], Sense::Le, s.v2);
        abs_le(prog, "dz2q", &[(q, 1.0), (v, k2)], -k2 * s.v2, z[1]);
        // Zone 3: dead band, q = 0.
        prog.add_constraint(row("dz3lo"), [(v, 1.0), (z[2], mv)], Sense::Ge, s.v2);
        prog.add_constraint(row("dz3hi"), [(v, 1.0), (z[2], -mv)], Sense::Le, s.v3);
        abs_le(prog, "dz3q", &[(q, 1.0)], 0.0, z[2]);
        // Zone 4: v3 <= v <= v4, q = k4 (v - v3).
        prog.add_constraint(row("dz4lo"), [(v, 1.0), (z[3], mv)], Sense::Ge, s.v3);
        prog.add_constraint(row("dz4hi"), [(v, 1.0), (z[3], -mv)], Sense::Le, s.v4);
        abs_le(prog, "dz4q", &[(q, 1.0), (v, -k4)], k4 * s.v3, z[3]);
        // Zone 5: v >= v4, q = -q_max.
        prog.add_constraint(row("dz5v"), [(v, 1.0), (z[4], mv)], Sense::Ge, s.v4);
        abs_le(prog, "dz5q", &[(q, 1.0)], s.q_max, z[4]);
        // At least one zone selected.
        prog.add_constraint(row("dzone"), z.iter().map(|&zk| (zk, 1.0)), Sense::Le, 4.0);
        flags.set(phase, z);
    }
    Ok(ZoneFlags {
        pv: pv.id.clone(),
        flags,
    })
}

/// Distance of one scheduled droop phase from its curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDeviation {
    pub pv: String,
    pub phase: Phase,
    pub v: f64,
    pub q: f64,
    pub q_curve: f64,
    pub deviation: f64,
    pub flagged: bool,
}

/// `|Q_scheduled - droop_q(V_scheduled)|` for every droop PV phase, using
/// the scheduled (linearized) local magnitude.
pub fn verify_on_curve(solution: &DispatchSolution, feeder: &FeederModel, tol: f64) -> Vec<CurveDeviation> {
    let mut out = Vec::new();
    for pv in feeder.pvs.iter().filter(|p| p.has_droop()) {
        let settings = pv.droop.as_ref().expect("filtered");
        for (phase, s) in settings.iter() {
            let Some(d) = solution.pv(&pv.id, phase) else {
                continue;
            };
            let q_curve = droop_q(d.v_local, s);
            let deviation = (d.q - q_curve).abs();
            out.push(CurveDeviation {
                pv: pv.id.clone(),
                phase,
                v: d.v_local,
                q: d.q,
                q_curve,
                deviation,
                flagged: deviation > tol,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::solve_milp;

    fn unit() -> DroopSettings {
        DroopSettings::ieee1547(1.0)
    }

    #[test]
    fn curve_values() {
        assert_eq!(droop_q(1.00, &unit()), 0.0);
        assert_eq!(droop_q(0.90, &unit()), 1.0);
        assert!((droop_q(1.04, &unit()) + 0.5).abs() < 1e-12);
        assert!((droop_q(0.96, &unit()) - 0.5).abs() < 1e-12);
        assert_eq!(droop_q(1.10, &unit()), -1.0);
    }

    #[test]
    fn default_policy_clears_minimums() {
        let s = DroopSettings::ieee1547(0.3);
        assert!(BigMPolicy::default().resolve("pv", Phase::A, &s, 0.95, 1.05).is_ok());
        let tight = BigMPolicy {
            m_voltage: 1.0,
            m_q: Some(0.5),
        };
        let err = tight.resolve("pv", Phase::A, &s, 0.95, 1.05).unwrap_err();
        assert!(err.to_string().contains("Big-M too small"));
    }

    fn one_phase(v_fixed: f64) -> (MathProgram, VarId, ZoneFlags) {
        let mut p = MathProgram::new("droop");
        let v = p.add_var("v", v_fixed, v_fixed);
        let q = p.add_var("q", -2.0, 2.0);
        let pv = PvUnit {
            id: "pv".into(),
            bus: 0,
            rating: [(Phase::A, 2.0)].into_iter().collect(),
            p_available: [(Phase::A, 0.0)].into_iter().collect(),
            droop: Some([(Phase::A, unit())].into_iter().collect()),
            price: 0.0,
        };
        let handles = [(Phase::A, DroopHandles { v, q })].into_iter().collect();
        let flags = encode_droop_milp(&pv, &handles, &mut p, &BigMPolicy::default(), (0.95, 1.05)).unwrap();
        (p, q, flags)
    }

    #[test]
    fn dead_band_forces_zero() {
        let (mut p, q, flags) = one_phase(1.00);
        p.set_objective(q, -1.0);
        let r = solve_milp(&p).unwrap();
        assert!(r.is_optimal());
        assert!(r.value(q).abs() < 1e-9);
        assert_eq!(flags.active_zone(Phase::A, &r.values), Some(3));
    }

    #[test]
    fn zone_four_slope() {
        let (mut p, q, _) = one_phase(1.04);
        p.set_objective(q, 1.0);
        let r = solve_milp(&p).unwrap();
        assert!((r.value(q) + 0.5).abs() < 1e-9);
    }

    #[test]
    fn nineteen_rows_per_phase() {
        let (p, _, _) = one_phase(1.0);
        assert_eq!(p.num_constraints(), 19);
        assert_eq!(p.binaries().len(), 5);
    }
}
