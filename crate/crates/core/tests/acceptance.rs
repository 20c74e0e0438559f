//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines come out in order and unbuffered.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use feederopt::bundled;
use feederopt::cli::{iterations_csv, pv_dispatch_csv, voltages_csv, Comparison};
use feederopt::droop::{droop_q, encode_droop_milp, verify_on_curve, BigMPolicy, DroopHandles, CURVE_TOL};
use feederopt::io::{load_feeder_str, serialize_feeder, to_document, Strictness, Units};
use feederopt::milp::{export_mps, parse_mps, solve_lp, solve_milp, MathProgram, SolveStatus, VarId, VarKind};
use feederopt::network::{DroopSettings, FeederModel, PerPhase, Phase, PvUnit};
use feederopt::opf::{build_program, solve_scheduling, DispatchSolution, Mode, OperatingPoint, ScheduleConfig};
use feederopt::oracle::{droop_equilibrium, no_control_flow, verify_dispatch};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn solve(name: &str, mode: Mode, config: &ScheduleConfig) -> (FeederModel, DispatchSolution, Duration) {
    let feeder = bundled::load(name).expect("bundled feeder");
    let start = Instant::now();
    let sol = solve_scheduling(&feeder, mode, config).unwrap_or_else(|e| panic!("{name} {mode}: {e}"));
    (feeder, sol, start.elapsed())
}

fn max_curve_deviation(sol: &DispatchSolution, feeder: &FeederModel) -> f64 {
    verify_on_curve(sol, feeder, CURVE_TOL)
        .iter()
        .map(|d| d.deviation)
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let (feeder, sol, elapsed) = solve("feeder_unbalanced_13", Mode::Droop, &ScheduleConfig::default());
    let dev = max_curve_deviation(&sol, &feeder);
    let secs = elapsed.as_secs_f64();
    outcome(
        dev <= 1e-4 && secs <= 10.0 && sol.converged,
        format!("max curve deviation {dev:.3e} (<= 1e-4), runtime {secs:.2} s (<= 10 s)"),
    )
}

fn criterion_2() -> Outcome {
    let feeder = bundled::load("feeder_unbalanced_13_high_load").unwrap();
    let cmp = Comparison::run(&feeder, &ScheduleConfig::default()).expect("comparison");
    let (d, n) = (cmp.max_deviation_droop(), cmp.max_deviation_nodroop());
    outcome(
        n > 1e-3 && d <= 1e-4,
        format!("nodroop deviation {n:.3e} (> 1e-3), droop deviation {d:.3e} (<= 1e-4)"),
    )
}

fn criterion_3() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["feeder_smoke_4bus", "feeder_unbalanced_13"] {
        let (_, sol, _) = solve(name, Mode::Droop, &ScheduleConfig::default());
        let e = |k: usize| sol.iterations.get(k).map_or(f64::NAN, |l| l.max_magnitude_error);
        let (e1, e2) = (e(0), e(1));
        let n = sol.iterations.len();
        ok &= e2 <= 1e-5 && e2 < e1 && n <= 5 && sol.converged;
        parts.push(format!("{name}: e1 {e1:.2e}, e2 {e2:.2e}, {n} iterations"));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let config = ScheduleConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in bundled::NAMES {
        let (feeder, sol, _) = solve(name, Mode::Droop, &config);
        let report = verify_dispatch(&feeder, &sol, config.v_window()).expect("sweep");
        ok &= report.max_residual <= 1e-3 && report.max_voltage_gap <= 5e-3;
        parts.push(format!(
            "{name}: residual {:.1e}, gap {:.1e}",
            report.max_residual, report.max_voltage_gap
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let config = ScheduleConfig::default();
    let (feeder, sol, _) = solve("feeder_unbalanced_13_high_pv", Mode::Droop, &config);
    let base = no_control_flow(&feeder).expect("no-control sweep").max_magnitude();
    let report = verify_dispatch(&feeder, &sol, config.v_window()).expect("sweep");
    let vmax = report.max_sweep_magnitude;
    outcome(
        base > 1.05 && vmax <= 1.0501,
        format!("no-control max {base:.4} (> 1.05), droop max {vmax:.5} (<= 1.0501)"),
    )
}

/// Two single-phase droop PVs on a three-bus lateral. `load` and `pv` scale
/// the demand and the PV size.
fn two_pv_feeder(load: f64, pv: f64, slack: f64) -> FeederModel {
    let text = format!(
        r#"{{
  "schema_version": 1,
  "name": "two_pv",
  "base": {{"s_base_va": 1000000, "default_kv": 2.4018}},
  "buses": [{{"id": "S", "phases": "a"}}, {{"id": "M", "phases": "a"}}, {{"id": "E", "phases": "a"}}],
  "lines": [
    {{"id": "SM", "from": "S", "to": "M", "phases": "a", "length": 0.8, "z": [[[0.3465, 1.0179]]], "ampacity": {{"a": 530}}}},
    {{"id": "ME", "from": "M", "to": "E", "phases": "a", "length": 1.2, "z": [[[0.7526, 1.1814]]], "ampacity": {{"a": 530}}}}
  ],
  "loads": [
    {{"id": "DM", "bus": "M", "p": {{"a": {m}}}, "q": {{"a": {qm}}}}},
    {{"id": "DE", "bus": "E", "p": {{"a": {e}}}, "q": {{"a": {qe}}}}}
  ],
  "capacitors": [],
  "pvs": [
    {{"id": "PVM", "bus": "M", "s_rating": {{"a": {s}}}, "p_available": {{"a": {pv}}}, "price": 10,
      "droop": {{"a": {{"v1": 0.94, "v2": 0.98, "v3": 1.02, "v4": 1.06, "q_max": {qmax}}}}}}},
    {{"id": "PVE", "bus": "E", "s_rating": {{"a": {s}}}, "p_available": {{"a": {pv}}}, "price": 12,
      "droop": {{"a": {{"v1": 0.94, "v2": 0.98, "v3": 1.02, "v4": 1.06, "q_max": {qmax}}}}}}}
  ],
  "ders": [],
  "substations": [{{"id": "SUB", "bus": "S", "v_slack": {{"a": {slack}}}, "price": 40}}]
}}"#,
        m = load * 400e3,
        qm = load * 150e3,
        e = load * 600e3,
        qe = load * 250e3,
        s = pv * 625e3,
        pv = pv * 500e3,
        qmax = pv * 0.275,
    );
    load_feeder_str(&text, Strictness::Strict).expect("two-PV feeder")
}

/// Copy of `p` with every binary fixed to `fix` and relaxed to continuous.
fn fix_binaries(p: &MathProgram, fix: &[(VarId, f64)]) -> MathProgram {
    let mut q = MathProgram::new(format!("{}-fixed", p.name));
    for v in p.vars() {
        match v.kind {
            VarKind::Continuous | VarKind::Binary => q.add_var(v.name.clone(), v.lower, v.upper),
        };
    }
    for (id, value) in fix {
        q.set_bounds(*id, *value, *value);
    }
    for c in p.constraints() {
        q.add_constraint(c.name.clone(), c.terms.iter().copied(), c.sense, c.rhs);
    }
    for (k, c) in p.objective().iter().enumerate() {
        if *c != 0.0 {
            q.set_objective(VarId(k), *c);
        }
    }
    q.set_objective_constant(p.objective_constant());
    q
}

/// Best objective over all single-zone selections, one LP each.
fn enumerate_zones(p: &MathProgram, zones: &[[VarId; 5]]) -> Option<f64> {
    let combos = 5usize.pow(zones.len() as u32);
    let mut best: Option<f64> = None;
    for code in 0..combos {
        let mut fix = Vec::new();
        let mut rest = code;
        for flags in zones {
            let pick = rest % 5;
            rest /= 5;
            fix.extend(flags.iter().enumerate().map(|(k, z)| (*z, if k == pick { 0.0 } else { 1.0 })));
        }
        let r = solve_lp(&fix_binaries(p, &fix)).expect("valid LP");
        if r.status == SolveStatus::Optimal {
            best = Some(best.map_or(r.objective, |b: f64| b.min(r.objective)));
        }
    }
    best
}

fn criterion_6() -> Outcome {
    let config = ScheduleConfig::default();
    let cases = [(0.2, 0.5, 1.05), (0.1, 0.1, 1.0), (0.25, 0.1, 1.0), (0.3, 0.3, 1.01), (0.1, 0.8, 1.04)];
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for (load, pv, slack) in cases {
        let feeder = two_pv_feeder(load, pv, slack);
        // Compare at the second linearization, where losses are present.
        let flat = OperatingPoint::flat_start(&feeder);
        let (p0, vm0) = build_program(&feeder, &flat, Mode::Droop, 12, &config.big_m, config.v_window()).unwrap();
        let r0 = solve_milp(&p0).unwrap();
        if !r0.is_optimal() {
            ok = false;
            notes.push(format!("({load}, {pv}, {slack}): first MILP {}", r0.status));
            continue;
        }
        let op = OperatingPoint::from_values(&vm0, &r0.values);
        let (p, vm) = build_program(&feeder, &op, Mode::Droop, 12, &config.big_m, config.v_window()).unwrap();
        let milp = solve_milp(&p).unwrap();
        let flags: Vec<_> = vm.zones.iter().flatten().collect();
        let zones: Vec<[VarId; 5]> = flags
            .iter()
            .flat_map(|z| z.flags.iter().map(|(_, f)| *f).collect::<Vec<_>>())
            .collect();
        if p.binaries().len() > 10 || zones.len() != 2 {
            ok = false;
            notes.push(format!("({load}, {pv}, {slack}): {} binaries", p.binaries().len()));
            continue;
        }
        match (milp.is_optimal(), enumerate_zones(&p, &zones)) {
            (true, Some(best)) => {
                let rel = (milp.objective - best).abs() / best.abs().max(1.0);
                worst = worst.max(rel);
                ok &= rel <= 1e-6;
                let picked: Vec<String> = flags
                    .iter()
                    .map(|z| z.active_zone(Phase::A, &milp.values).map_or("-".into(), |k| k.to_string()))
                    .collect();
                notes.push(format!("zones {}", picked.join("/")));
            }
            (milp_ok, best) => {
                ok = false;
                notes.push(format!("({load}, {pv}, {slack}): MILP {milp_ok}, enumeration {best:?}"));
            }
        }
    }
    outcome(
        ok,
        format!(
            "{} instances, 25 zone LPs each, worst relative gap {worst:.1e} (<= 1e-6); {}",
            cases.len(),
            notes.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let (feeder, sol, _) = solve("feeder_unbalanced_13_high_pv", Mode::Droop, &ScheduleConfig::default());
    let eq = droop_equilibrium(&feeder, &sol, 0.5).expect("equilibrium");
    let gap = eq.max_schedule_gap();
    outcome(
        gap <= 1e-3,
        format!("equilibrium gap {gap:.2e} (<= 1e-3) after {} iterations", eq.iterations),
    )
}

fn criterion_8() -> Outcome {
    let settings = DroopSettings::ieee1547(0.44);
    let mut pv = PvUnit {
        id: "PV".into(),
        bus: 0,
        rating: PerPhase::new(),
        p_available: PerPhase::new(),
        droop: Some(PerPhase::new()),
        price: 0.0,
    };
    pv.rating.set(Phase::A, 1.0);
    pv.p_available.set(Phase::A, 0.5);
    pv.droop.as_mut().unwrap().set(Phase::A, settings);
    let policy = BigMPolicy::default();
    let mut failures = Vec::new();
    let steps = 100;
    for k in 0..=steps {
        let v0 = 0.95 + 1e-3 * k as f64;
        let q0 = droop_q(v0, &settings);
        let mut p = MathProgram::new("single");
        let v = p.add_var("v", v0, v0);
        let q = p.add_var("q", q0 - 1e-6, q0 + 1e-6);
        let mut handles = PerPhase::new();
        handles.set(Phase::A, DroopHandles { v, q });
        encode_droop_milp(&pv, &handles, &mut p, &policy, (0.95, 1.05)).expect("encoding");
        if !solve_milp(&p).unwrap().is_optimal() {
            failures.push(format!("{v0:.3}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} voltages, infeasible at [{}]", steps + 1, failures.join(", ")),
    )
}

fn polygon_ratio(feeder: &FeederModel, sol: &DispatchSolution) -> f64 {
    let mut worst = 0.0f64;
    for d in &sol.pvs {
        let pv = feeder.pvs.iter().find(|p| p.id == d.pv).unwrap();
        let s = *pv.rating.get(d.phase).unwrap();
        worst = worst.max((d.p * d.p + d.q * d.q) / (s * s));
    }
    worst
}

fn criterion_9() -> Outcome {
    let (feeder, sol12, _) = solve("feeder_unbalanced_13_high_pv", Mode::Droop, &ScheduleConfig::default());
    let r12 = polygon_ratio(&feeder, &sol12);
    let config64 = ScheduleConfig {
        segments: 64,
        ..ScheduleConfig::default()
    };
    let (smoke, sol64, _) = solve("feeder_smoke_4bus", Mode::Droop, &config64);
    let r64 = polygon_ratio(&smoke, &sol64);
    outcome(
        r12 <= 1.0719 && r64 <= 1.0049,
        format!("max (P²+Q²)/S²: {r12:.4} at 12 segments (<= 1.0719), {r64:.4} at 64 (<= 1.0049)"),
    )
}

fn artifacts(name: &str) -> [String; 3] {
    let config = ScheduleConfig::default();
    let (feeder, sol, _) = solve(name, Mode::Droop, &config);
    let report = verify_dispatch(&feeder, &sol, config.v_window()).unwrap();
    let devs = verify_on_curve(&sol, &feeder, CURVE_TOL);
    [voltages_csv(&sol, &report), pv_dispatch_csv(&sol, &devs), iterations_csv(&sol)]
}

fn criterion_10() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["feeder_smoke_4bus", "feeder_unbalanced_13"] {
        let same = artifacts(name) == artifacts(name);
        ok &= same;
        parts.push(format!("{name} CSVs identical: {same}"));
    }
    let config = ScheduleConfig::default();
    let mut mps_ok = true;
    let mut feeder_ok = true;
    for name in bundled::NAMES {
        let feeder = bundled::load(name).unwrap();
        let op = OperatingPoint::flat_start(&feeder);
        let (p, _) = build_program(&feeder, &op, Mode::Droop, 12, &config.big_m, config.v_window()).unwrap();
        mps_ok &= parse_mps(&export_mps(&p)).map(|back| back == p).unwrap_or(false);
        for units in [Units::Si, Units::Pu] {
            let text = serialize_feeder(&to_document(&feeder, units));
            feeder_ok &= load_feeder_str(&text, Strictness::Strict)
                .map(|back| same_feeder(&feeder, &back))
                .unwrap_or(false);
        }
    }
    ok &= mps_ok && feeder_ok;
    parts.push(format!("MPS round trip: {mps_ok}"));
    parts.push(format!("feeder round trip: {feeder_ok}"));
    outcome(ok, parts.join("; "))
}

/// Feeders agree to 1e-12 in every per-unit quantity that the solver reads.
fn same_feeder(a: &FeederModel, b: &FeederModel) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
    let pv_ok = a.pvs.len() == b.pvs.len()
        && a.pvs.iter().zip(&b.pvs).all(|(x, y)| {
            x.id == y.id
                && x.bus == y.bus
                && x.rating.iter().zip(y.rating.iter()).all(|(u, v)| u.0 == v.0 && close(*u.1, *v.1))
                && x.p_available
                    .iter()
                    .zip(y.p_available.iter())
                    .all(|(u, v)| u.0 == v.0 && close(*u.1, *v.1))
        });
    let line_ok = a.lines.len() == b.lines.len()
        && a.lines.iter().zip(&b.lines).all(|(x, y)| {
            x.id == y.id
                && x.phases == y.phases
                && (0..x.phases.len()).all(|p| {
                    (0..x.phases.len()).all(|r| {
                        let (u, v) = (x.series_impedance.at(p, r), y.series_impedance.at(p, r));
                        close(u.re, v.re) && close(u.im, v.im)
                    })
                })
        });
    let load_ok = a.loads.len() == b.loads.len()
        && a.loads.iter().zip(&b.loads).all(|(x, y)| {
            let same = |u: &PerPhase<f64>, v: &PerPhase<f64>| {
                u.phases() == v.phases() && u.iter().zip(v.iter()).all(|(s, t)| close(*s.1, *t.1))
            };
            x.id == y.id && same(&x.p, &y.p) && same(&x.q, &y.q)
        });
    a.buses.len() == b.buses.len() && pv_ok && line_ok && load_ok
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("droop schedule on the 13-bus feeder", criterion_1),
        ("droop versus nodroop at high load", criterion_2),
        ("linearization error decay", criterion_3),
        ("power-flow consistency", criterion_4),
        ("overvoltage mitigation at high PV", criterion_5),
        ("MILP matches zone enumeration", criterion_6),
        ("local controller equilibrium", criterion_7),
        ("droop encoding feasibility sweep", criterion_8),
        ("polygon bound on PV capability", criterion_9),
        ("determinism and round trips", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
