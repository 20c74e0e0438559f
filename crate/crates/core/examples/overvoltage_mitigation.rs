//! High PV, light load: uncontrolled inverters push the far end of the
//! feeder above 1.05 pu, the droop-aware schedule keeps it inside.

use feederopt::bundled;
use feederopt::opf::{solve_scheduling, Mode, ScheduleConfig};
use feederopt::oracle::{no_control_flow, verify_dispatch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let feeder = bundled::load("feeder_unbalanced_13_high_pv")?;
    let baseline = no_control_flow(&feeder)?;
    println!("no control: max |V| {:.4} pu", baseline.max_magnitude());
    for (b, bus) in feeder.buses.iter().enumerate() {
        for x in bus.phases.iter() {
            let v = baseline.magnitude(b, x).unwrap_or(0.0);
            if v > 1.05 {
                println!("  {}.{x}: {v:.4}", bus.id);
            }
        }
    }

    let config = ScheduleConfig::default();
    let solution = solve_scheduling(&feeder, Mode::Droop, &config)?;
    let report = verify_dispatch(&feeder, &solution, config.v_window())?;
    println!("droop schedule: max sweep |V| {:.5} pu", report.max_sweep_magnitude);
    for pv in &solution.pvs {
        let av = feeder
            .pvs
            .iter()
            .find(|u| u.id == pv.pv)
            .and_then(|u| u.p_available.get(pv.phase).copied())
            .unwrap_or(0.0);
        println!(
            "  {} {}: P {:.3} of {:.3}, Q {:+.4}, zone {:?}",
            pv.pv, pv.phase, pv.p, av, pv.q, pv.zone
        );
    }
    Ok(())
}
