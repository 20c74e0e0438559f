//! Nonlinear checks that share no code with the optimization model: a
//! backward/forward sweep power flow, dispatch verification against it, and
//! a damped simulation of the local droop controllers.

use num_complex::Complex64;
use serde::Serialize;

use crate::droop::droop_q;
use crate::io::{check_radial, RadialError, RadialOrder};
use crate::network::{FeederModel, Line, PerPhase, Phase};
use crate::opf::DispatchSolution;

pub const SWEEP_TOL: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 200;
/// Nodal power residual above which a bus phase is flagged, pu.
pub const RESIDUAL_TOL: f64 = 1e-3;
/// Allowance outside the voltage window before a sweep magnitude is flagged.
pub const BAND_DELTA: f64 = 5e-3;
pub const DROOP_TOL: f64 = 1e-6;
pub const MAX_DROOP_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error("feeder is meshed; the sweep needs a radial feeder")]
    Meshed,
    #[error("bus {bus} phase {phase} is not served by the line from its parent")]
    Unserved { bus: String, phase: Phase },
    #[error("sweep did not converge in {MAX_SWEEPS} sweeps; mismatch trace {trace:?}")]
    Diverged { trace: Vec<f64> },
    #[error("solution does not match the feeder: {0}")]
    Mismatch(String),
    #[error("droop controllers did not settle in {iterations} iterations; max |Q - droop_q(V)| trace {trace:?}")]
    DroopNotSettled { iterations: usize, trace: Vec<f64> },
}

type Phasors = Vec<PerPhase<Complex64>>;

fn at(table: &Phasors, bus: usize, phase: Phase) -> Complex64 {
    table[bus].get(phase).copied().unwrap_or_default()
}

/// Converged state of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepState {
    /// Per bus.
    pub v: Phasors,
    /// Per line: sending-end current (series plus half shunt at the from bus).
    pub line_current: Phasors,
    /// Per bus: current injected into the network.
    pub injection: Phasors,
    pub sweeps: usize,
    pub max_mismatch: f64,
    /// Largest `|V conj(I) - S|` over the non-slack bus phases.
    pub max_residual: f64,
}

impl SweepState {
    /// `V conj(I)` injected by one bus phase.
    pub fn power(&self, bus: usize, phase: Phase) -> Complex64 {
        at(&self.v, bus, phase) * at(&self.injection, bus, phase).conj()
    }

    pub fn magnitude(&self, bus: usize, phase: Phase) -> Option<f64> {
        self.v[bus].get(phase).map(|v| v.norm())
    }

    /// Largest true magnitude over all bus phases.
    pub fn max_magnitude(&self) -> f64 {
        self.v.iter().flat_map(|b| b.iter().map(|(_, v)| v.norm())).fold(0.0, f64::max)
    }

    /// Active power absorbed by all lines (series and shunt).
    pub fn line_losses(&self, feeder: &FeederModel) -> f64 {
        let mut total = 0.0;
        for (l, line) in feeder.lines.iter().enumerate() {
            for x in line.phases.iter() {
                let i_send = self.line_current[l].get(x).copied().unwrap_or_default();
                let i_recv = i_send - 0.5 * shunt_current(line, &self.v, line.from, x) - 0.5 * shunt_current(line, &self.v, line.to, x);
                total += (at(&self.v, line.from, x) * i_send.conj()).re - (at(&self.v, line.to, x) * i_recv.conj()).re;
            }
        }
        total
    }
}

/// `(y V_bus)[x]` over the line's phases.
fn shunt_current(line: &Line, v: &Phasors, bus: usize, x: Phase) -> Complex64 {
    line.phases
        .iter()
        .map(|n| line.shunt_admittance.get(x, n).unwrap_or_default() * at(v, bus, n))
        .sum()
}

/// `(Z I)[x]` over the line's phases.
fn series_drop(line: &Line, current: &PerPhase<Complex64>, x: Phase) -> Complex64 {
    line.phases
        .iter()
        .map(|m| line.series_impedance.get(x, m).unwrap_or_default() * current.get(m).copied().unwrap_or_default())
        .sum()
}

fn slack_voltages(feeder: &FeederModel) -> Result<Phasors, OracleError> {
    let root = feeder.substation_bus().ok_or(RadialError::NoSubstation)?;
    let sub = feeder
        .substations
        .iter()
        .find(|s| s.bus == root)
        .ok_or(RadialError::NoSubstation)?;
    Ok(feeder
        .buses
        .iter()
        .map(|b| {
            b.phases
                .iter()
                .map(|p| {
                    let mag = sub.v_slack.get(p).copied().unwrap_or(1.0);
                    (p, Complex64::from_polar(mag, p.nominal_angle()))
                })
                .collect()
        })
        .collect())
}

fn radial_order(feeder: &FeederModel) -> Result<RadialOrder, OracleError> {
    let order = check_radial(feeder)?.ok_or(OracleError::Meshed)?;
    for &b in &order.order {
        if let Some((_, l)) = order.parent[b] {
            let line = &feeder.lines[l];
            for p in feeder.buses[b].phases.iter() {
                if !line.phases.contains(p) {
                    return Err(OracleError::Unserved {
                        bus: feeder.buses[b].id.clone(),
                        phase: p,
                    });
                }
            }
        }
    }
    Ok(order)
}

/// Backward/forward sweep with constant-power injections `s` (per bus:
/// generation minus demand). The substation bus is the slack; its entry in
/// `s` is ignored.
pub fn sweep_power_flow(feeder: &FeederModel, s: &Phasors) -> Result<SweepState, OracleError> {
    let order = radial_order(feeder)?;
    let root = order.order[0];
    let children = order.children();
    let n = feeder.buses.len();
    let mut v = slack_voltages(feeder)?;
    // Series current of the parent line of each bus, oriented parent to child.
    let mut toward: Vec<PerPhase<Complex64>> = vec![PerPhase::new(); n];
    let mut trace = Vec::new();

    let mut sweeps = 0;
    let mut mismatch = f64::INFINITY;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        // Backward: current each subtree draws through its parent line.
        for &b in order.order.iter().rev() {
            let Some((_, l)) = order.parent[b] else { continue };
            let line = &feeder.lines[l];
            let mut draw = PerPhase::new();
            for x in feeder.buses[b].phases.iter() {
                let vb = at(&v, b, x);
                let own = if vb.norm() > 0.0 { -(at(s, b, x) / vb).conj() } else { Complex64::default() };
                let mut total = own;
                for &(c, cl) in &children[b] {
                    let child_line = &feeder.lines[cl];
                    if child_line.phases.contains(x) {
                        total += toward[c].get(x).copied().unwrap_or_default() + 0.5 * shunt_current(child_line, &v, b, x);
                    }
                }
                draw.set(x, total);
            }
            for x in line.phases.iter() {
                let d = draw.get(x).copied().unwrap_or_default();
                toward[b].set(x, d + 0.5 * shunt_current(line, &v, b, x));
            }
        }
        // Forward: voltages from the root outwards.
        mismatch = 0.0;
        for &b in &order.order {
            let Some((p, l)) = order.parent[b] else { continue };
            let line = &feeder.lines[l];
            for x in feeder.buses[b].phases.iter() {
                let next = at(&v, p, x) - series_drop(line, &toward[b], x);
                mismatch = f64::max(mismatch, (next - at(&v, b, x)).norm());
                v[b].set(x, next);
            }
        }
        trace.push(mismatch);
        if mismatch < SWEEP_TOL {
            break;
        }
    }
    if mismatch >= SWEEP_TOL {
        return Err(OracleError::Diverged { trace });
    }

    // Line currents in the model's orientation and KCL injections.
    let mut line_current: Phasors = vec![PerPhase::new(); feeder.lines.len()];
    for &b in &order.order {
        let Some((_, l)) = order.parent[b] else { continue };
        let line = &feeder.lines[l];
        for x in line.phases.iter() {
            let t = toward[b].get(x).copied().unwrap_or_default();
            let series = if line.to == b { t } else { -t };
            line_current[l].set(x, series + 0.5 * shunt_current(line, &v, line.from, x));
        }
    }
    let injection = kcl_injections(feeder, &v, &line_current);
    let mut max_residual: f64 = 0.0;
    for (b, bus) in feeder.buses.iter().enumerate() {
        if b == root {
            continue;
        }
        for x in bus.phases.iter() {
            let got = at(&v, b, x) * at(&injection, b, x).conj();
            max_residual = max_residual.max((got - at(s, b, x)).norm());
        }
    }
    Ok(SweepState {
        v,
        line_current,
        injection,
        sweeps,
        max_mismatch: mismatch,
        max_residual,
    })
}

/// Current leaving each bus phase into its lines.
fn kcl_injections(feeder: &FeederModel, v: &Phasors, line_current: &Phasors) -> Phasors {
    let mut inj: Phasors = feeder
        .buses
        .iter()
        .map(|b| b.phases.iter().map(|p| (p, Complex64::default())).collect())
        .collect();
    for (l, line) in feeder.lines.iter().enumerate() {
        for x in line.phases.iter() {
            let i_send = line_current[l].get(x).copied().unwrap_or_default();
            let i_recv = i_send - 0.5 * shunt_current(line, v, line.from, x) - 0.5 * shunt_current(line, v, line.to, x);
            if let Some(e) = inj[line.from].get_mut(x) {
                *e += i_send;
            }
            if let Some(e) = inj[line.to].get_mut(x) {
                *e -= i_recv;
            }
        }
    }
    inj
}

/// Net scheduled power per bus phase from a dispatch. Substation output is
/// included when `with_substation` is set; droop PV reactive output is
/// skipped when `skip_droop_q` is set.
fn scheduled_injections(
    feeder: &FeederModel,
    solution: &DispatchSolution,
    with_substation: bool,
    skip_droop_q: bool,
) -> Result<Phasors, OracleError> {
    let mut s = demand(feeder);
    let bus_of = |id: &str| {
        feeder
            .bus_index(id)
            .ok_or_else(|| OracleError::Mismatch(format!("unknown bus {id}")))
    };
    for d in &solution.devices {
        if d.kind == crate::opf::DeviceKind::Substation && !with_substation {
            continue;
        }
        add(&mut s, bus_of(&d.bus)?, d.phase, Complex64::new(d.p, d.q))?;
    }
    for d in &solution.pvs {
        let q = if skip_droop_q && d.controller { 0.0 } else { d.q };
        add(&mut s, bus_of(&d.bus)?, d.phase, Complex64::new(d.p, q))?;
    }
    Ok(s)
}

fn add(s: &mut Phasors, bus: usize, phase: Phase, value: Complex64) -> Result<(), OracleError> {
    let e = s[bus]
        .get_mut(phase)
        .ok_or_else(|| OracleError::Mismatch(format!("bus index {bus} has no phase {phase}")))?;
    *e += value;
    Ok(())
}

/// Minus loads and transformer no-load losses, per bus phase.
fn demand(feeder: &FeederModel) -> Phasors {
    let mut s: Phasors = feeder
        .buses
        .iter()
        .map(|b| b.phases.iter().map(|p| (p, Complex64::default())).collect())
        .collect();
    for load in &feeder.loads {
        for p in load.p.phases().union(load.q.phases()).iter() {
            if let Some(e) = s[load.bus].get_mut(p) {
                *e -= Complex64::new(
                    load.p.get(p).copied().unwrap_or(0.0),
                    load.q.get(p).copied().unwrap_or(0.0),
                );
            }
        }
    }
    for t in &feeder.transformers {
        for (p, loss) in t.loss.iter() {
            if let Some(e) = s[t.bus].get_mut(p) {
                *e -= Complex64::new(*loss, 0.0);
            }
        }
    }
    s
}

/// Power flow with every controllable resource idle: PVs at available power
/// with zero reactive output, DERs off, capacitors off.
pub fn no_control_flow(feeder: &FeederModel) -> Result<SweepState, OracleError> {
    let mut s = demand(feeder);
    for pv in &feeder.pvs {
        for (p, av) in pv.p_available.iter() {
            add(&mut s, pv.bus, p, Complex64::new(*av, 0.0))?;
        }
    }
    sweep_power_flow(feeder, &s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusCheck {
    pub bus: String,
    pub phase: Phase,
    pub v_hat: f64,
    pub v_sweep: f64,
    /// `|device power - V conj(I)|` at the scheduled point.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub buses: Vec<BusCheck>,
    pub max_voltage_gap: f64,
    pub max_residual: f64,
    pub max_sweep_magnitude: f64,
    pub min_sweep_magnitude: f64,
    /// Bus phases whose scheduled power does not match the scheduled
    /// voltages and currents.
    pub residual_flags: Vec<String>,
    /// Bus phases whose sweep magnitude leaves the widened voltage window.
    pub band_flags: Vec<String>,
    pub sweeps: usize,
}

impl VerifyReport {
    pub fn passes(&self, gap_tol: f64, residual_tol: f64) -> bool {
        self.max_voltage_gap <= gap_tol && self.max_residual <= residual_tol && self.band_flags.is_empty()
    }
}

/// Re-solves the network with all devices fixed at their schedule and
/// compares against the scheduled voltages; also checks the scheduled nodal
/// powers against the scheduled voltages and injection currents.
pub fn verify_dispatch(
    feeder: &FeederModel,
    solution: &DispatchSolution,
    v_window: (f64, f64),
) -> Result<VerifyReport, OracleError> {
    let s = scheduled_injections(feeder, solution, false, false)?;
    let state = sweep_power_flow(feeder, &s)?;
    let device = scheduled_injections(feeder, solution, true, false)?;

    let mut buses = Vec::new();
    let mut residual_flags = Vec::new();
    let mut band_flags = Vec::new();
    let (mut gap, mut worst_residual) = (0.0f64, 0.0f64);
    let (mut vmax, mut vmin) = (0.0f64, f64::INFINITY);
    for (b, bus) in feeder.buses.iter().enumerate() {
        for x in bus.phases.iter() {
            let sched = solution
                .bus(&bus.id, x)
                .ok_or_else(|| OracleError::Mismatch(format!("no voltage for bus {} phase {x}", bus.id)))?;
            let v_sweep = state.magnitude(b, x).unwrap_or(0.0);
            let v = Complex64::new(sched.v_re, sched.v_im);
            let i = Complex64::new(sched.i_re, sched.i_im);
            let residual = (at(&device, b, x) - v * i.conj()).norm();
            gap = gap.max((v_sweep - sched.v_hat).abs());
            worst_residual = worst_residual.max(residual);
            vmax = vmax.max(v_sweep);
            vmin = vmin.min(v_sweep);
            let name = format!("{}.{x}", bus.id);
            if residual > RESIDUAL_TOL {
                residual_flags.push(name.clone());
            }
            if v_sweep < v_window.0 - BAND_DELTA || v_sweep > v_window.1 + BAND_DELTA {
                band_flags.push(name);
            }
            buses.push(BusCheck {
                bus: bus.id.clone(),
                phase: x,
                v_hat: sched.v_hat,
                v_sweep,
                residual,
            });
        }
    }
    Ok(VerifyReport {
        buses,
        max_voltage_gap: gap,
        max_residual: worst_residual,
        max_sweep_magnitude: vmax,
        min_sweep_magnitude: vmin,
        residual_flags,
        band_flags,
        sweeps: state.sweeps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    pub pv: String,
    pub phase: Phase,
    pub v: f64,
    pub q: f64,
    /// The schedule's values for comparison.
    pub v_scheduled: f64,
    pub q_scheduled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub points: Vec<EquilibriumPoint>,
    pub iterations: usize,
}

impl Equilibrium {
    /// Largest `max(|ΔV|, |ΔQ|)` between equilibrium and schedule.
    pub fn max_schedule_gap(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p.v - p.v_scheduled).abs().max((p.q - p.q_scheduled).abs()))
            .fold(0.0, f64::max)
    }
}

/// Lets every droop controller react to its true local voltage, starting
/// from zero reactive output, with all other devices at their schedule:
/// `Q <- (1 - damping) Q + damping · droop_q(V(Q))` until the outputs sit on
/// their curves.
pub fn droop_equilibrium(
    feeder: &FeederModel,
    solution: &DispatchSolution,
    damping: f64,
) -> Result<Equilibrium, OracleError> {
    let base = scheduled_injections(feeder, solution, false, true)?;
    // (pv index, phase, settings, bus)
    let mut units = Vec::new();
    for pv in &feeder.pvs {
        let Some(settings) = &pv.droop else { continue };
        for (p, s) in settings.iter() {
            units.push((pv, p, *s));
        }
    }
    if units.is_empty() {
        return Ok(Equilibrium {
            points: Vec::new(),
            iterations: 0,
        });
    }
    let mut q = vec![0.0; units.len()];
    let mut trace = Vec::new();
    for iteration in 1..=MAX_DROOP_ITERATIONS {
        let mut s = base.clone();
        for ((pv, p, _), qk) in units.iter().zip(&q) {
            add(&mut s, pv.bus, *p, Complex64::new(0.0, *qk))?;
        }
        let state = sweep_power_flow(feeder, &s)?;
        let targets: Vec<f64> = units
            .iter()
            .map(|(pv, p, set)| droop_q(state.magnitude(pv.bus, *p).unwrap_or(0.0), set))
            .collect();
        let off_curve = targets.iter().zip(&q).map(|(t, qk)| (t - qk).abs()).fold(0.0, f64::max);
        trace.push(off_curve);
        if off_curve < DROOP_TOL {
            let points = units
                .iter()
                .zip(&q)
                .map(|((pv, p, _), qk)| {
                    let sched = solution.pv(&pv.id, *p);
                    EquilibriumPoint {
                        pv: pv.id.clone(),
                        phase: *p,
                        v: state.magnitude(pv.bus, *p).unwrap_or(0.0),
                        q: *qk,
                        v_scheduled: sched.map(|d| d.v_local).unwrap_or(f64::NAN),
                        q_scheduled: sched.map(|d| d.q).unwrap_or(f64::NAN),
                    }
                })
                .collect();
            return Ok(Equilibrium { points, iterations: iteration });
        }
        for (qk, t) in q.iter_mut().zip(&targets) {
            *qk = (1.0 - damping) * *qk + damping * t;
        }
    }
    Err(OracleError::DroopNotSettled {
        iterations: MAX_DROOP_ITERATIONS,
        trace,
    })
}
