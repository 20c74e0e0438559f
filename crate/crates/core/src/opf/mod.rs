//! Iteratively linearized current-voltage OPF on an unbalanced feeder.
//!
//! Each outer iteration lowers the feeder into a MILP around an operating
//! point (bus voltages and injection currents), solves it, and moves the
//! operating point to the solution. The loop stops once no rectangular
//! voltage component moves by more than the tolerance.

mod build;
mod solution;

use std::fmt;
use std::str::FromStr;

use log::info;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::droop::{BigMPolicy, DroopError};
use crate::milp::{solve_lp, solve_milp_with, MathProgram, MilpOptions, ProgramError, Sense, SolveStatus};
use crate::network::{FeederModel, PerPhase, Phase};

pub use build::{
    build_device_constraints, build_droop_constraints, build_line_and_injection_constraints, build_objective,
    build_power_balance, build_program, build_voltage_constraints, fixed_pv_cost, VariableMap, V_COMPONENT_BOUND,
};
pub use solution::{BusPhaseState, DeviceDispatch, DeviceKind, DispatchSolution, IterationLog, LineCurrent, PvDispatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// PV controllers follow their Q-V curve (Big-M droop rows).
    Droop,
    /// PV controllers are limited by rating and available power only.
    NoDroop,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Droop => "droop",
            Mode::NoDroop => "nodroop",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "droop" => Ok(Mode::Droop),
            "nodroop" => Ok(Mode::NoDroop),
            other => Err(format!("unknown mode '{other}' (expected droop or nodroop)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub segments: usize,
    pub max_iterations: usize,
    /// Convergence threshold on `max |ΔVr| + |ΔVi|`, pu.
    pub tolerance: f64,
    /// Voltage magnitude window, pu.
    pub v_min: f64,
    pub v_max: f64,
    pub big_m: BigMPolicy,
    pub milp: MilpOptions,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            segments: 12,
            max_iterations: 10,
            tolerance: 1e-6,
            v_min: 0.95,
            v_max: 1.05,
            big_m: BigMPolicy::default(),
            milp: MilpOptions::default(),
        }
    }
}

impl ScheduleConfig {
    pub fn v_window(&self) -> (f64, f64) {
        (self.v_min, self.v_max)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpfError {
    #[error("line {line} phase {phase}: zero self impedance")]
    SingularImpedance { line: String, phase: Phase },
    #[error("bus {bus} phase {phase}: zero reference voltage magnitude")]
    ZeroReference { bus: String, phase: Phase },
    #[error("polygon needs at least 8 segments, got {0}")]
    Segments(usize),
    #[error("feeder has no substation")]
    NoSubstation,
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Droop(#[from] DroopError),
    #[error("iteration {iteration}: program infeasible; {}", hint_text(.hint))]
    Infeasible { iteration: usize, hint: Vec<String> },
    #[error("iteration {iteration}: solver stopped with status {status}")]
    Solver { iteration: usize, status: SolveStatus },
    #[error("no convergence in {} iterations (last voltage change {:.3e})", .log.len(), .log.last().map(|l| l.max_voltage_change).unwrap_or(f64::NAN))]
    NotConverged { log: Vec<IterationLog> },
}

fn hint_text(hint: &[String]) -> String {
    if hint.is_empty() {
        "no single limit identified".to_string()
    } else {
        format!("limits at their bounds: {}", hint.join(", "))
    }
}

/// Expansion point of the balance and magnitude linearizations.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// Per bus: complex voltage of each phase.
    pub v: Vec<PerPhase<Complex64>>,
    /// Per bus: complex current injected into the network.
    pub i: Vec<PerPhase<Complex64>>,
}

impl OperatingPoint {
    /// Unit voltages at the nominal phase angles and zero currents.
    pub fn flat_start(feeder: &FeederModel) -> Self {
        OperatingPoint {
            v: feeder
                .buses
                .iter()
                .map(|b| b.phases.iter().map(|p| (p, Complex64::from_polar(1.0, p.nominal_angle()))).collect())
                .collect(),
            i: feeder
                .buses
                .iter()
                .map(|b| b.phases.iter().map(|p| (p, Complex64::new(0.0, 0.0))).collect())
                .collect(),
        }
    }

    /// Reads voltages and injections out of a solved program.
    pub fn from_values(vm: &VariableMap, values: &[f64]) -> Self {
        let read = |re: &[PerPhase<crate::milp::VarId>], im: &[PerPhase<crate::milp::VarId>]| {
            re.iter()
                .zip(im)
                .map(|(r, i)| {
                    r.iter()
                        .map(|(p, vr)| {
                            let vi = i.get(p).expect("same phases");
                            (p, Complex64::new(values[vr.0], values[vi.0]))
                        })
                        .collect()
                })
                .collect()
        };
        OperatingPoint {
            v: read(&vm.v_re, &vm.v_im),
            i: read(&vm.inj_re, &vm.inj_im),
        }
    }

    /// `max |ΔVr| + |ΔVi|` over all bus phases.
    pub fn max_voltage_change(&self, other: &OperatingPoint) -> f64 {
        self.v
            .iter()
            .zip(&other.v)
            .flat_map(|(a, b)| {
                a.iter().map(move |(p, va)| {
                    let vb = b.get(p).copied().unwrap_or_default();
                    (va.re - vb.re).abs() + (va.im - vb.im).abs()
                })
            })
            .fold(0.0, f64::max)
    }
}

/// Runs the outer loop from a flat start.
pub fn solve_scheduling(feeder: &FeederModel, mode: Mode, config: &ScheduleConfig) -> Result<DispatchSolution, OpfError> {
    if feeder.substation_bus().is_none() {
        return Err(OpfError::NoSubstation);
    }
    let mut op = OperatingPoint::flat_start(feeder);
    let mut log = Vec::new();
    for iteration in 1..=config.max_iterations {
        let (prog, vm) = build_program(feeder, &op, mode, config.segments, &config.big_m, config.v_window())?;
        let r = solve_milp_with(&prog, &config.milp)?;
        match r.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                return Err(OpfError::Infeasible {
                    iteration,
                    hint: infeasibility_hint(feeder, &op, config),
                })
            }
            status => return Err(OpfError::Solver { iteration, status }),
        }
        let next = OperatingPoint::from_values(&vm, &r.values);
        let change = next.max_voltage_change(&op);
        let magnitude_error = max_magnitude_error(&vm, &r.values);
        info!(
            "iteration {iteration}: objective {:.9e}, magnitude error {magnitude_error:.3e}, voltage change {change:.3e}, {} nodes",
            r.objective, r.nodes
        );
        log.push(IterationLog {
            iteration,
            max_magnitude_error: magnitude_error,
            max_voltage_change: change,
            objective: r.objective,
            bb_nodes: r.nodes,
        });
        op = next;
        if change < config.tolerance {
            return Ok(extract_solution(feeder, mode, config, &vm, &r.values, log));
        }
    }
    Err(OpfError::NotConverged { log })
}

fn max_magnitude_error(vm: &VariableMap, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for b in 0..vm.v_mag.len() {
        for (p, m) in vm.v_mag[b].iter() {
            let vr = x[vm.v_re[b].get(p).expect("phase").0];
            let vi = x[vm.v_im[b].get(p).expect("phase").0];
            worst = worst.max((x[m.0] - vr.hypot(vi)).abs());
        }
    }
    worst
}

fn extract_solution(
    feeder: &FeederModel,
    mode: Mode,
    config: &ScheduleConfig,
    vm: &VariableMap,
    x: &[f64],
    log: Vec<IterationLog>,
) -> DispatchSolution {
    let val = |t: &PerPhase<crate::milp::VarId>, p: Phase| t.get(p).map(|v| x[v.0]).unwrap_or(0.0);
    let mut buses = Vec::new();
    for (b, bus) in feeder.buses.iter().enumerate() {
        for p in bus.phases.iter() {
            buses.push(BusPhaseState {
                bus: bus.id.clone(),
                phase: p,
                v_re: val(&vm.v_re[b], p),
                v_im: val(&vm.v_im[b], p),
                v_hat: val(&vm.v_mag[b], p),
                i_re: val(&vm.inj_re[b], p),
                i_im: val(&vm.inj_im[b], p),
            });
        }
    }
    let mut lines = Vec::new();
    for (l, line) in feeder.lines.iter().enumerate() {
        for p in line.phases.iter() {
            lines.push(LineCurrent {
                line: line.id.clone(),
                phase: p,
                i_re: val(&vm.line_re[l], p),
                i_im: val(&vm.line_im[l], p),
            });
        }
    }
    let mut devices = Vec::new();
    for (s, sub) in feeder.substations.iter().enumerate() {
        for p in sub.phases().iter() {
            devices.push(DeviceDispatch {
                kind: DeviceKind::Substation,
                id: sub.id.clone(),
                bus: feeder.buses[sub.bus].id.clone(),
                phase: p,
                p: val(&vm.sub_p[s], p),
                q: val(&vm.sub_q[s], p),
            });
        }
    }
    for (d, der) in feeder.ders.iter().enumerate() {
        for p in der.phases().iter() {
            devices.push(DeviceDispatch {
                kind: DeviceKind::Der,
                id: der.id.clone(),
                bus: feeder.buses[der.bus].id.clone(),
                phase: p,
                p: val(&vm.der_p[d], p),
                q: val(&vm.der_q[d], p),
            });
        }
    }
    for (k, cap) in feeder.capacitors.iter().enumerate() {
        for p in cap.q_max.phases().iter() {
            devices.push(DeviceDispatch {
                kind: DeviceKind::Capacitor,
                id: cap.id.clone(),
                bus: feeder.buses[cap.bus].id.clone(),
                phase: p,
                p: 0.0,
                q: val(&vm.cap_q[k], p),
            });
        }
    }
    let mut pvs = Vec::new();
    for (f, pv) in feeder.pvs.iter().enumerate() {
        for p in pv.phases().iter() {
            pvs.push(PvDispatch {
                pv: pv.id.clone(),
                bus: feeder.buses[pv.bus].id.clone(),
                phase: p,
                p: val(&vm.pv_p[f], p),
                q: val(&vm.pv_q[f], p),
                v_local: val(&vm.v_mag[pv.bus], p),
                controller: pv.has_droop(),
                zone: vm.zones[f].as_ref().and_then(|z| z.active_zone(p, x)),
            });
        }
    }
    let objective = log.last().map(|l| l.objective).unwrap_or(f64::NAN);
    DispatchSolution {
        feeder: feeder.name.clone(),
        mode,
        segments: config.segments,
        objective,
        fixed_cost: fixed_pv_cost(feeder),
        converged: true,
        iterations: log,
        buses,
        lines,
        devices,
        pvs,
    }
}

/// Names the voltage limits an infeasible iteration would have to move.
///
/// Re-solves the iteration without droop rows and with the magnitude window
/// made elastic, minimising the total window violation.
pub fn infeasibility_hint(feeder: &FeederModel, op: &OperatingPoint, config: &ScheduleConfig) -> Vec<String> {
    let wide = (0.0, 2.0 * V_COMPONENT_BOUND);
    let Ok((mut prog, vm)) = build_program(feeder, op, Mode::NoDroop, config.segments, &config.big_m, wide) else {
        return Vec::new();
    };
    clear_objective(&mut prog);
    let mut slacks = Vec::new();
    for (b, bus) in feeder.buses.iter().enumerate() {
        for (p, m) in vm.v_mag[b].iter() {
            let up = prog.add_var(format!("up.{}.{p}", bus.id), 0.0, wide.1);
            let down = prog.add_var(format!("dn.{}.{p}", bus.id), 0.0, wide.1);
            prog.add_constraint(format!("eup.{}.{p}", bus.id), [(*m, 1.0), (up, -1.0)], Sense::Le, config.v_max);
            prog.add_constraint(format!("edn.{}.{p}", bus.id), [(*m, 1.0), (down, 1.0)], Sense::Ge, config.v_min);
            prog.set_objective(up, 1.0);
            prog.set_objective(down, 1.0);
            slacks.push((bus.id.clone(), p, *m, up, down));
        }
    }
    let Ok(r) = solve_lp(&prog) else {
        return Vec::new();
    };
    if !r.is_optimal() {
        return vec!["infeasible even with the voltage window relaxed (check device and substation limits)".into()];
    }
    let mut hint = Vec::new();
    for (bus, p, m, up, down) in slacks {
        if r.value(up) > 1e-6 {
            hint.push(format!("V[{bus}.{p}] <= {} (needs {:.4})", config.v_max, r.value(m)));
        }
        if r.value(down) > 1e-6 {
            hint.push(format!("V[{bus}.{p}] >= {} (needs {:.4})", config.v_min, r.value(m)));
        }
    }
    hint
}

fn clear_objective(prog: &mut MathProgram) {
    for k in 0..prog.num_vars() {
        prog.set_objective(crate::milp::VarId(k), 0.0);
    }
}
