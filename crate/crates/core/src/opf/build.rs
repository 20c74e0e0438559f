//! Lowering of a feeder and an operating point into a [`MathProgram`].

use num_complex::Complex64;

use crate::droop::{encode_droop_milp, BigMPolicy, DroopHandles, ZoneFlags};
use crate::milp::{add_circle_constraint, MathProgram, Sense, VarId};
use crate::network::{FeederModel, PerPhase, Phase};

use super::{Mode, OperatingPoint, OpfError};

/// Bound on the rectangular voltage components, pu.
pub const V_COMPONENT_BOUND: f64 = 1.5;

/// Handles of every model variable. Indexing follows the feeder's vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    pub v_re: Vec<PerPhase<VarId>>,
    pub v_im: Vec<PerPhase<VarId>>,
    /// Linearized voltage magnitude.
    pub v_mag: Vec<PerPhase<VarId>>,
    /// Net current injected by each bus into the network.
    pub inj_re: Vec<PerPhase<VarId>>,
    pub inj_im: Vec<PerPhase<VarId>>,
    /// Sending-end current of each line.
    pub line_re: Vec<PerPhase<VarId>>,
    pub line_im: Vec<PerPhase<VarId>>,
    pub sub_p: Vec<PerPhase<VarId>>,
    pub sub_q: Vec<PerPhase<VarId>>,
    pub der_p: Vec<PerPhase<VarId>>,
    pub der_q: Vec<PerPhase<VarId>>,
    /// Active output of every PV; fixed for PVs without a controller.
    pub pv_p: Vec<PerPhase<VarId>>,
    /// Reactive output; empty for PVs without a controller.
    pub pv_q: Vec<PerPhase<VarId>>,
    pub cap_q: Vec<PerPhase<VarId>>,
    /// Zone binaries of droop PVs (droop mode only).
    pub zones: Vec<Option<ZoneFlags>>,
}

fn per_phase_vars(
    prog: &mut MathProgram,
    phases: impl Iterator<Item = Phase>,
    mut make: impl FnMut(&mut MathProgram, Phase) -> VarId,
) -> PerPhase<VarId> {
    phases.map(|p| (p, make(prog, p))).collect()
}

impl VariableMap {
    /// Creates every continuous variable with its box bounds. The slack bus
    /// voltage is fixed through its bounds; zone binaries are added later by
    /// the droop encoding.
    pub fn create(feeder: &FeederModel, prog: &mut MathProgram, v_window: (f64, f64)) -> Self {
        let slack_bus = feeder.substation_bus();
        let slack = feeder.substations.first();
        let mut vm = VariableMap {
            v_re: Vec::new(),
            v_im: Vec::new(),
            v_mag: Vec::new(),
            inj_re: Vec::new(),
            inj_im: Vec::new(),
            line_re: Vec::new(),
            line_im: Vec::new(),
            sub_p: Vec::new(),
            sub_q: Vec::new(),
            der_p: Vec::new(),
            der_q: Vec::new(),
            pv_p: Vec::new(),
            pv_q: Vec::new(),
            cap_q: Vec::new(),
            zones: vec![None; feeder.pvs.len()],
        };

        for (b, bus) in feeder.buses.iter().enumerate() {
            let id = &bus.id;
            let fixed = |p: Phase| -> Option<Complex64> {
                if Some(b) != slack_bus {
                    return None;
                }
                let mag = *slack?.v_slack.get(p)?;
                Some(Complex64::from_polar(mag, p.nominal_angle()))
            };
            vm.v_re.push(per_phase_vars(prog, bus.phases.iter(), |pr, p| match fixed(p) {
                Some(v) => pr.add_var(format!("Vr.{id}.{p}"), v.re, v.re),
                None => pr.add_var(format!("Vr.{id}.{p}"), -V_COMPONENT_BOUND, V_COMPONENT_BOUND),
            }));
            vm.v_im.push(per_phase_vars(prog, bus.phases.iter(), |pr, p| match fixed(p) {
                Some(v) => pr.add_var(format!("Vi.{id}.{p}"), v.im, v.im),
                None => pr.add_var(format!("Vi.{id}.{p}"), -V_COMPONENT_BOUND, V_COMPONENT_BOUND),
            }));
            vm.v_mag.push(per_phase_vars(prog, bus.phases.iter(), |pr, p| {
                pr.add_var(format!("Vm.{id}.{p}"), v_window.0, v_window.1)
            }));
            let incident = feeder.incident_lines(b);
            let bound = |p: Phase| {
                1.0 + incident
                    .iter()
                    .filter_map(|(l, _)| feeder.lines[*l].ampacity.get(p))
                    .map(|a| 2.0 * a)
                    .sum::<f64>()
            };
            vm.inj_re.push(per_phase_vars(prog, bus.phases.iter(), |pr, p| {
                pr.add_var(format!("Jr.{id}.{p}"), -bound(p), bound(p))
            }));
            vm.inj_im.push(per_phase_vars(prog, bus.phases.iter(), |pr, p| {
                pr.add_var(format!("Ji.{id}.{p}"), -bound(p), bound(p))
            }));
        }

        for line in &feeder.lines {
            let id = &line.id;
            let cap = |p: Phase| 2.0 * line.ampacity.get(p).copied().unwrap_or(1.0);
            vm.line_re.push(per_phase_vars(prog, line.phases.iter(), |pr, p| {
                pr.add_var(format!("Ir.{id}.{p}"), -cap(p), cap(p))
            }));
            vm.line_im.push(per_phase_vars(prog, line.phases.iter(), |pr, p| {
                pr.add_var(format!("Ii.{id}.{p}"), -cap(p), cap(p))
            }));
        }

        for s in &feeder.substations {
            vm.sub_p.push(per_phase_vars(prog, s.phases().iter(), |pr, p| {
                let (lo, hi) = s.p_bounds(p);
                pr.add_var(format!("PB.{}.{p}", s.id), lo, hi)
            }));
            vm.sub_q.push(per_phase_vars(prog, s.phases().iter(), |pr, p| {
                let (lo, hi) = s.q_bounds(p);
                pr.add_var(format!("QB.{}.{p}", s.id), lo, hi)
            }));
        }
        for d in &feeder.ders {
            vm.der_p.push(per_phase_vars(prog, d.phases().iter(), |pr, p| {
                pr.add_var(format!("PG.{}.{p}", d.id), 0.0, d.p_max.get(p).copied().unwrap_or(0.0))
            }));
            vm.der_q.push(per_phase_vars(prog, d.phases().iter(), |pr, p| {
                let q = d.q_max.get(p).copied().unwrap_or(0.0);
                pr.add_var(format!("QG.{}.{p}", d.id), -q, q)
            }));
        }
        for pv in &feeder.pvs {
            let av = |p: Phase| pv.p_available.get(p).copied().unwrap_or(0.0);
            if pv.has_droop() {
                vm.pv_p.push(per_phase_vars(prog, pv.phases().iter(), |pr, p| {
                    pr.add_var(format!("PV.{}.{p}", pv.id), 0.0, av(p))
                }));
                vm.pv_q.push(per_phase_vars(prog, pv.phases().iter(), |pr, p| {
                    let s = pv.rating.get(p).copied().unwrap_or(0.0);
                    pr.add_var(format!("QV.{}.{p}", pv.id), -s, s)
                }));
            } else {
                // No controller: output pinned to the available power.
                vm.pv_p.push(per_phase_vars(prog, pv.phases().iter(), |pr, p| {
                    pr.add_var(format!("PV.{}.{p}", pv.id), av(p), av(p))
                }));
                vm.pv_q.push(PerPhase::new());
            }
        }
        for c in &feeder.capacitors {
            vm.cap_q.push(per_phase_vars(prog, c.q_max.phases().iter(), |pr, p| {
                pr.add_var(format!("QC.{}.{p}", c.id), 0.0, c.q_max.get(p).copied().unwrap_or(0.0))
            }));
        }
        vm
    }
}

/// Adds `coef · u` for complex `u = (re, im)` to the real and imaginary rows.
fn push_complex(re_row: &mut Vec<(VarId, f64)>, im_row: &mut Vec<(VarId, f64)>, coef: Complex64, re: VarId, im: VarId) {
    re_row.push((re, coef.re));
    re_row.push((im, -coef.im));
    im_row.push((re, coef.im));
    im_row.push((im, coef.re));
}

/// Line current relation and nodal current injections.
///
/// Each line row is the complex relation `Σm Z[x][m] I[m] = V_i[x] - V_j[x] +
/// ½ Σm Z[x][m] Σn y[m][n] V_i[n]` (the current expression multiplied through
/// by the self impedance), split into real and imaginary parts, so the line
/// current is the sending-end current including the half shunt at the sending
/// bus. The receiving bus sees that current minus both half-shunt currents.
pub fn build_line_and_injection_constraints(
    feeder: &FeederModel,
    vm: &VariableMap,
    prog: &mut MathProgram,
) -> Result<(), OpfError> {
    // Extra terms on each bus-phase injection row, from receiving ends.
    let mut inj_terms: Vec<PerPhase<(Vec<(VarId, f64)>, Vec<(VarId, f64)>)>> = feeder
        .buses
        .iter()
        .map(|b| b.phases.iter().map(|p| (p, (Vec::new(), Vec::new()))).collect())
        .collect();

    for (l, line) in feeder.lines.iter().enumerate() {
        let z = &line.series_impedance;
        let y = &line.shunt_admittance;
        for x in line.phases.iter() {
            if z.get(x, x).map(|d| d.norm() == 0.0).unwrap_or(true) {
                return Err(OpfError::SingularImpedance {
                    line: line.id.clone(),
                    phase: x,
                });
            }
        }
        let zero = Complex64::new(0.0, 0.0);
        for x in line.phases.iter() {
            let (mut re_row, mut im_row) = (Vec::new(), Vec::new());
            for m in line.phases.iter() {
                let zxm = z.get(x, m).unwrap_or(zero);
                push_complex(&mut re_row, &mut im_row, zxm, line_var(vm, l, m, true), line_var(vm, l, m, false));
            }
            for n in line.phases.iter() {
                // Coefficient of V_i[n]: -(½ Σm Z[x][m] y[m][n]) - δ(x, n).
                let w: Complex64 = line
                    .phases
                    .iter()
                    .map(|m| z.get(x, m).unwrap_or(zero) * y.get(m, n).unwrap_or(zero))
                    .sum();
                let mut coef = -0.5 * w;
                if n == x {
                    coef -= 1.0;
                }
                push_complex(&mut re_row, &mut im_row, coef, bus_var(&vm.v_re, line.from, n), bus_var(&vm.v_im, line.from, n));
            }
            push_complex(
                &mut re_row,
                &mut im_row,
                Complex64::new(1.0, 0.0),
                bus_var(&vm.v_re, line.to, x),
                bus_var(&vm.v_im, line.to, x),
            );
            prog.add_constraint(format!("line.re.{}.{x}", line.id), re_row, Sense::Eq, 0.0);
            prog.add_constraint(format!("line.im.{}.{x}", line.id), im_row, Sense::Eq, 0.0);

            // Receiving end: -(I - ½ y V_from - ½ y V_to).
            let (re_row, im_row) = inj_terms[line.to].get_mut(x).expect("line phases within bus phases");
            push_complex(re_row, im_row, Complex64::new(1.0, 0.0), line_var(vm, l, x, true), line_var(vm, l, x, false));
            for n in line.phases.iter() {
                let half = -0.5 * y.get(x, n).unwrap_or(zero);
                if half != zero {
                    for b in [line.from, line.to] {
                        push_complex(re_row, im_row, half, bus_var(&vm.v_re, b, n), bus_var(&vm.v_im, b, n));
                    }
                }
            }
        }
    }

    for (b, bus) in feeder.buses.iter().enumerate() {
        let incident = feeder.incident_lines(b);
        for x in bus.phases.iter() {
            let (extra_re, extra_im) = inj_terms[b].get(x).expect("bus phase");
            let mut re_row = vec![(bus_var(&vm.inj_re, b, x), 1.0)];
            let mut im_row = vec![(bus_var(&vm.inj_im, b, x), 1.0)];
            for &(l, sign) in &incident {
                if sign > 0 && feeder.lines[l].phases.contains(x) {
                    re_row.push((line_var(vm, l, x, true), -1.0));
                    im_row.push((line_var(vm, l, x, false), -1.0));
                }
            }
            re_row.extend_from_slice(extra_re);
            im_row.extend_from_slice(extra_im);
            prog.add_constraint(format!("inj.re.{}.{x}", bus.id), re_row, Sense::Eq, 0.0);
            prog.add_constraint(format!("inj.im.{}.{x}", bus.id), im_row, Sense::Eq, 0.0);
        }
    }
    Ok(())
}

fn bus_var(table: &[PerPhase<VarId>], bus: usize, phase: Phase) -> VarId {
    *table[bus].get(phase).expect("bus phase variable")
}

fn line_var(vm: &VariableMap, line: usize, phase: Phase, real: bool) -> VarId {
    let table = if real { &vm.line_re } else { &vm.line_im };
    *table[line].get(phase).expect("line phase variable")
}

/// Device sums equal to the first-order expansion of `V · conj(I)` around
/// the operating point, per bus and phase.
pub fn build_power_balance(feeder: &FeederModel, op: &OperatingPoint, vm: &VariableMap, prog: &mut MathProgram) {
    for (b, bus) in feeder.buses.iter().enumerate() {
        let att = feeder.attachments(b);
        for x in bus.phases.iter() {
            let v0 = op.v[b].get(x).copied().unwrap_or_default();
            let i0 = op.i[b].get(x).copied().unwrap_or_default();
            let (vr, vi) = (bus_var(&vm.v_re, b, x), bus_var(&vm.v_im, b, x));
            let (ir, ii) = (bus_var(&vm.inj_re, b, x), bus_var(&vm.inj_im, b, x));

            let mut p_row: Vec<(VarId, f64)> = Vec::new();
            let mut q_row: Vec<(VarId, f64)> = Vec::new();
            let mut p_demand = 0.0;
            let mut q_demand = 0.0;
            for &s in &att.substations {
                p_row.extend(vm.sub_p[s].get(x).map(|&v| (v, 1.0)));
                q_row.extend(vm.sub_q[s].get(x).map(|&v| (v, 1.0)));
            }
            for &d in &att.ders {
                p_row.extend(vm.der_p[d].get(x).map(|&v| (v, 1.0)));
                q_row.extend(vm.der_q[d].get(x).map(|&v| (v, 1.0)));
            }
            for &f in att.droop_pvs.iter().chain(&att.plain_pvs) {
                p_row.extend(vm.pv_p[f].get(x).map(|&v| (v, 1.0)));
                q_row.extend(vm.pv_q[f].get(x).map(|&v| (v, 1.0)));
            }
            for &k in &att.capacitors {
                q_row.extend(vm.cap_q[k].get(x).map(|&v| (v, 1.0)));
            }
            for &d in &att.loads {
                p_demand += feeder.loads[d].p.get(x).copied().unwrap_or(0.0);
                q_demand += feeder.loads[d].q.get(x).copied().unwrap_or(0.0);
            }
            for &o in &att.transformers {
                p_demand += feeder.transformers[o].loss.get(x).copied().unwrap_or(0.0);
            }

            // P = Vr0 Ir + Vi0 Ii + Ir0 Vr + Ii0 Vi - Vr0 Ir0 - Vi0 Ii0
            p_row.extend([(ir, -v0.re), (ii, -v0.im), (vr, -i0.re), (vi, -i0.im)]);
            let p_const = v0.re * i0.re + v0.im * i0.im;
            prog.add_constraint(format!("bal.p.{}.{x}", bus.id), p_row, Sense::Eq, p_demand - p_const);
            // Q = Vi0 Ir - Vr0 Ii + Ir0 Vi - Ii0 Vr - Vi0 Ir0 + Vr0 Ii0
            q_row.extend([(ir, -v0.im), (ii, v0.re), (vi, -i0.re), (vr, i0.im)]);
            let q_const = v0.im * i0.re - v0.re * i0.im;
            prog.add_constraint(format!("bal.q.{}.{x}", bus.id), q_row, Sense::Eq, q_demand - q_const);
        }
    }
}

/// First-order magnitude `V̂ = (Vr0 Vr + Vi0 Vi) / |V0|`; the magnitude window
/// itself sits on the variable bounds.
pub fn build_voltage_constraints(
    feeder: &FeederModel,
    op: &OperatingPoint,
    vm: &VariableMap,
    prog: &mut MathProgram,
) -> Result<(), OpfError> {
    for (b, bus) in feeder.buses.iter().enumerate() {
        for x in bus.phases.iter() {
            let v0 = op.v[b].get(x).copied().unwrap_or_default();
            let mag = v0.norm();
            if !(mag.is_finite() && mag > 0.0) {
                return Err(OpfError::ZeroReference {
                    bus: bus.id.clone(),
                    phase: x,
                });
            }
            prog.add_constraint(
                format!("vmag.{}.{x}", bus.id),
                [
                    (bus_var(&vm.v_mag, b, x), 1.0),
                    (bus_var(&vm.v_re, b, x), -v0.re / mag),
                    (bus_var(&vm.v_im, b, x), -v0.im / mag),
                ],
                Sense::Eq,
                0.0,
            );
        }
    }
    Ok(())
}

/// Thermal limits and inverter ratings as circumscribing polygons. The box
/// limits of every device already sit on the variable bounds.
pub fn build_device_constraints(
    feeder: &FeederModel,
    vm: &VariableMap,
    prog: &mut MathProgram,
    segments: usize,
) -> Result<(), OpfError> {
    if segments < 8 {
        return Err(OpfError::Segments(segments));
    }
    for (l, line) in feeder.lines.iter().enumerate() {
        for (x, &imax) in line.ampacity.iter() {
            add_circle_constraint(
                prog,
                line_var(vm, l, x, true),
                line_var(vm, l, x, false),
                imax,
                segments,
                &format!("therm.{}.{x}", line.id),
            )?;
        }
    }
    for (f, pv) in feeder.pvs.iter().enumerate() {
        if !pv.has_droop() {
            continue;
        }
        for (x, &s) in pv.rating.iter() {
            let (Some(&p), Some(&q)) = (vm.pv_p[f].get(x), vm.pv_q[f].get(x)) else {
                continue;
            };
            add_circle_constraint(prog, p, q, s, segments, &format!("rating.{}.{x}", pv.id))?;
        }
    }
    Ok(())
}

/// Operating cost of substation energy, DERs and controllable PVs.
pub fn build_objective(feeder: &FeederModel, vm: &VariableMap, prog: &mut MathProgram) {
    for (s, sub) in feeder.substations.iter().enumerate() {
        for (_, &v) in vm.sub_p[s].iter() {
            prog.add_objective(v, sub.price);
        }
    }
    for (d, der) in feeder.ders.iter().enumerate() {
        for (_, &v) in vm.der_p[d].iter() {
            prog.add_objective(v, der.price);
        }
    }
    for (f, pv) in feeder.pvs.iter().enumerate() {
        if pv.has_droop() {
            for (_, &v) in vm.pv_p[f].iter() {
                prog.add_objective(v, pv.price);
            }
        }
    }
}

/// Cost of the PVs without a controller, whose output is fixed.
pub fn fixed_pv_cost(feeder: &FeederModel) -> f64 {
    feeder
        .pvs
        .iter()
        .filter(|pv| !pv.has_droop())
        .flat_map(|pv| pv.p_available.iter().map(move |(_, v)| pv.price * v))
        .fold(0.0, |acc, c| acc + c)
}

/// Adds the droop encoding of every controller PV.
pub fn build_droop_constraints(
    feeder: &FeederModel,
    vm: &mut VariableMap,
    prog: &mut MathProgram,
    policy: &BigMPolicy,
    v_window: (f64, f64),
) -> Result<(), OpfError> {
    for (f, pv) in feeder.pvs.iter().enumerate() {
        if !pv.has_droop() {
            continue;
        }
        let handles: PerPhase<DroopHandles> = pv
            .phases()
            .iter()
            .filter_map(|x| {
                Some((
                    x,
                    DroopHandles {
                        v: *vm.v_mag[pv.bus].get(x)?,
                        q: *vm.pv_q[f].get(x)?,
                    },
                ))
            })
            .collect();
        vm.zones[f] = Some(encode_droop_milp(pv, &handles, prog, policy, v_window)?);
    }
    Ok(())
}

/// Builds the whole program of one outer iteration.
pub fn build_program(
    feeder: &FeederModel,
    op: &OperatingPoint,
    mode: Mode,
    segments: usize,
    policy: &BigMPolicy,
    v_window: (f64, f64),
) -> Result<(MathProgram, VariableMap), OpfError> {
    let mut prog = MathProgram::new(format!("{}-{mode}", feeder.name));
    let mut vm = VariableMap::create(feeder, &mut prog, v_window);
    build_line_and_injection_constraints(feeder, &vm, &mut prog)?;
    build_power_balance(feeder, op, &vm, &mut prog);
    build_voltage_constraints(feeder, op, &vm, &mut prog)?;
    build_device_constraints(feeder, &vm, &mut prog, segments)?;
    if mode == Mode::Droop {
        build_droop_constraints(feeder, &mut vm, &mut prog, policy, v_window)?;
    }
    build_objective(feeder, &vm, &mut prog);
    Ok((prog, vm))
}
