use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use feederopt::bundled;
use feederopt::droop::{droop_q, encode_droop_milp, BigMPolicy, DroopHandles};
use feederopt::io::{load_feeder_str, serialize_feeder, to_document, Strictness, Units};
use feederopt::milp::{
    add_circle_constraint, export_mps, parse_mps, polygon_overshoot, solve_milp, MathProgram, Sense, VarId,
};
use feederopt::network::{DroopSettings, FeederModel, PerPhase, Phase, PvUnit};
use feederopt::opf::{build_program, Mode, OperatingPoint};

fn settings() -> impl Strategy<Value = DroopSettings> {
    (0.90..0.99f64, 0.005..0.05f64, 0.0..0.06f64, 0.005..0.05f64, 0.01..1.0f64).prop_map(|(v1, a, b, c, q_max)| {
        DroopSettings {
            v1,
            v2: v1 + a,
            v3: v1 + a + b,
            v4: v1 + a + b + c,
            q_max,
        }
    })
}

proptest! {
    #[test]
    fn droop_curve_is_lipschitz_and_nonincreasing(s in settings(), v in 0.85..1.15f64, dv in 0.0..0.01f64) {
        let slope = (s.q_max / (s.v2 - s.v1)).max(s.q_max / (s.v4 - s.v3));
        let (q0, q1) = (droop_q(v, &s), droop_q(v + dv, &s));
        prop_assert!(q1 <= q0 + 1e-12);
        prop_assert!(q0 - q1 <= slope * dv * (1.0 + 1e-9) + 1e-12);
        prop_assert!(q0.abs() <= s.q_max);
    }

    #[test]
    fn circle_polygon_contains_disc_and_is_bounded(
        segments in 3usize..80,
        radius in 0.01..10.0f64,
        r in 0.0..1.2f64,
        theta in 0.0..(2.0 * PI),
    ) {
        let mut p = MathProgram::new("c");
        let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = p.add_var("y", f64::NEG_INFINITY, f64::INFINITY);
        add_circle_constraint(&mut p, x, y, radius, segments, "c").unwrap();
        let norm = r * radius * polygon_overshoot(segments);
        let point = [norm * theta.cos(), norm * theta.sin()];
        let inside = p.max_violation(&point) <= 1e-12 * radius;
        if norm <= radius {
            prop_assert!(inside);
        }
        if inside {
            prop_assert!(norm <= radius / (PI / segments as f64).cos() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn droop_encoding_pins_q_to_curve(s in settings(), t in 0.0..1.0f64, maximize in any::<bool>()) {
        let v0 = 0.95 + 0.1 * t;
        let mut pv = PvUnit {
            id: "PV".into(),
            bus: 0,
            rating: PerPhase::new(),
            p_available: PerPhase::new(),
            droop: Some(PerPhase::new()),
            price: 0.0,
        };
        pv.rating.set(Phase::A, 2.0 * s.q_max);
        pv.p_available.set(Phase::A, s.q_max);
        pv.droop.as_mut().unwrap().set(Phase::A, s);
        let mut p = MathProgram::new("pv");
        let v = p.add_var("v", v0, v0);
        let q = p.add_var("q", -2.0 * s.q_max, 2.0 * s.q_max);
        p.set_objective(q, if maximize { -1.0 } else { 1.0 });
        let mut handles = PerPhase::new();
        handles.set(Phase::A, DroopHandles { v, q });
        // Steep curves need more than the default reactive constant.
        let policy = BigMPolicy {
            m_voltage: 1.0,
            m_q: Some(1.5 * BigMPolicy::min_m_q(&s, 0.95, 1.05)),
        };
        encode_droop_milp(&pv, &handles, &mut p, &policy, (0.95, 1.05)).unwrap();
        let r = solve_milp(&p).unwrap();
        prop_assert!(r.is_optimal());
        prop_assert!((r.value(q) - droop_q(v0, &s)).abs() <= 1e-7);
    }

    #[test]
    fn line_rows_hold_for_any_complex_solution(
        parts in proptest::collection::vec(-1.0..1.0f64, 12),
        line in 0usize..3,
    ) {
        let f = bundled::load("feeder_smoke_4bus").unwrap();
        let op = OperatingPoint::flat_start(&f);
        let (p, vm) = build_program(&f, &op, Mode::NoDroop, 12, &BigMPolicy::default(), (0.95, 1.05)).unwrap();
        let l = &f.lines[line];
        let vf: Vec<Complex64> = (0..3).map(|k| Complex64::new(parts[2 * k], parts[2 * k + 1])).collect();
        let i: Vec<Complex64> = (0..3).map(|k| Complex64::new(parts[6 + 2 * k], parts[7 + 2 * k])).collect();
        // V_to = V_from - Z (I - ½ y V_from)
        let yv = l.shunt_admittance.mul_vec(&vf);
        let series: Vec<Complex64> = (0..3).map(|k| i[k] - 0.5 * yv[k]).collect();
        let drop = l.series_impedance.mul_vec(&series);
        let mut x = vec![0.0; p.num_vars()];
        for (k, ph) in Phase::ALL.into_iter().enumerate() {
            let vt = vf[k] - drop[k];
            let set = |x: &mut Vec<f64>, t: &[PerPhase<VarId>], b: usize, value: f64| {
                x[t[b].get(ph).unwrap().0] = value;
            };
            set(&mut x, &vm.v_re, l.from, vf[k].re);
            set(&mut x, &vm.v_im, l.from, vf[k].im);
            set(&mut x, &vm.v_re, l.to, vt.re);
            set(&mut x, &vm.v_im, l.to, vt.im);
            set(&mut x, &vm.line_re, line, i[k].re);
            set(&mut x, &vm.line_im, line, i[k].im);
        }
        for c in p.constraints().iter().filter(|c| c.name.starts_with(&format!("line.re.{}.", l.id)) || c.name.starts_with(&format!("line.im.{}.", l.id))) {
            prop_assert!(c.violation(&x) <= 1e-12, "{} {}", c.name, c.violation(&x));
        }
    }

    #[test]
    fn mps_round_trip_is_exact(program in random_program()) {
        let text = export_mps(&program);
        let back = parse_mps(&text).unwrap();
        prop_assert_eq!(back, program);
    }

    #[test]
    fn feeder_round_trip_si_and_pu(scale in proptest::collection::vec(0.01..3.0f64, 9), units_pu in any::<bool>()) {
        let mut f = bundled::load("feeder_smoke_4bus").unwrap();
        for (d, load) in f.loads.iter_mut().enumerate() {
            for (k, ph) in Phase::ALL.into_iter().enumerate() {
                let p = *load.p.get(ph).unwrap();
                load.p.set(ph, p * scale[3 * d + k]);
                let q = *load.q.get(ph).unwrap();
                load.q.set(ph, q / scale[3 * d + k]);
            }
        }
        let units = if units_pu { Units::Pu } else { Units::Si };
        let back = load_feeder_str(&serialize_feeder(&to_document(&f, units)), Strictness::Strict).unwrap();
        prop_assert!(close_feeders(&f, &back));
    }
}

fn close_feeders(a: &FeederModel, b: &FeederModel) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300);
    let same = |u: &PerPhase<f64>, v: &PerPhase<f64>| {
        u.phases() == v.phases() && u.iter().zip(v.iter()).all(|(s, t)| close(*s.1, *t.1))
    };
    let lines = a.lines.iter().zip(&b.lines).all(|(x, y)| {
        let n = x.phases.len();
        (0..n).all(|r| {
            (0..n).all(|c| {
                let (u, v) = (x.series_impedance.at(r, c), y.series_impedance.at(r, c));
                let (s, t) = (x.shunt_admittance.at(r, c), y.shunt_admittance.at(r, c));
                close(u.re, v.re) && close(u.im, v.im) && close(s.re, t.re) && close(s.im, t.im)
            })
        }) && same(&x.ampacity, &y.ampacity)
    });
    a.buses.len() == b.buses.len()
        && a.lines.len() == b.lines.len()
        && lines
        && a.loads.iter().zip(&b.loads).all(|(x, y)| same(&x.p, &y.p) && same(&x.q, &y.q))
        && a.pvs.iter().zip(&b.pvs).all(|(x, y)| same(&x.rating, &y.rating) && same(&x.p_available, &y.p_available))
}

fn name() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z][a-z0-9]{0,7}", "[A-Za-z .#]{9,20}"]
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3..1e3f64, any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(0.1), Just(-1e-300)]
}

fn random_program() -> impl Strategy<Value = MathProgram> {
    let vars = proptest::collection::vec((name(), number(), 0.0..100.0f64, 0u8..4), 1..8);
    let rows = proptest::collection::vec(
        (name(), proptest::collection::vec((0usize..8, number()), 1..5), 0u8..3, number()),
        0..8,
    );
    let objective = proptest::collection::vec(number(), 8);
    (vars, rows, objective).prop_map(|(vars, rows, objective)| {
        let mut p = MathProgram::new("random");
        let mut ids = Vec::new();
        for (name, lo, width, kind) in vars {
            ids.push(match kind {
                0 => p.add_binary(name),
                1 => p.add_var(name, f64::NEG_INFINITY, f64::INFINITY),
                2 => p.add_var(name, lo, f64::INFINITY),
                _ => p.add_var(name, lo, lo + width),
            });
        }
        for (name, terms, sense, rhs) in rows {
            let sense = [Sense::Le, Sense::Eq, Sense::Ge][sense as usize];
            let terms: Vec<(VarId, f64)> = terms.into_iter().map(|(k, a)| (ids[k % ids.len()], a)).collect();
            p.add_constraint(name, terms, sense, rhs);
        }
        for (id, c) in ids.iter().zip(objective) {
            p.set_objective(*id, c);
        }
        p
    })
}
