//! Droop-mode schedule of the bundled 4-bus feeder, checked by the sweep.

use feederopt::bundled;
use feederopt::droop::{verify_on_curve, CURVE_TOL};
use feederopt::opf::{solve_scheduling, Mode, ScheduleConfig};
use feederopt::oracle::verify_dispatch;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let feeder = bundled::load("feeder_smoke_4bus")?;
    let config = ScheduleConfig::default();
    let solution = solve_scheduling(&feeder, Mode::Droop, &config)?;

    println!("objective {:.6} (fixed PV cost {:.6})", solution.objective, solution.fixed_cost);
    for it in &solution.iterations {
        println!(
            "iteration {}: magnitude error {:.3e}, voltage change {:.3e}, {} nodes",
            it.iteration, it.max_magnitude_error, it.max_voltage_change, it.bb_nodes
        );
    }
    for pv in &solution.pvs {
        println!(
            "{} {}: P {:.4} Q {:+.4} at V {:.4} (zone {:?})",
            pv.pv, pv.phase, pv.p, pv.q, pv.v_local, pv.zone
        );
    }
    let worst = verify_on_curve(&solution, &feeder, CURVE_TOL)
        .iter()
        .map(|d| d.deviation)
        .fold(0.0, f64::max);
    println!("max curve deviation {worst:.3e}");

    let report = verify_dispatch(&feeder, &solution, config.v_window())?;
    println!(
        "sweep: max |V - V_hat| {:.3e}, max nodal residual {:.3e}",
        report.max_voltage_gap, report.max_residual
    );
    Ok(())
}
