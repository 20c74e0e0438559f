//! Hands the droop schedule's active power to the inverters and lets their
//! own Volt-VAr loops settle; the result should match the schedule.

use feederopt::bundled;
use feederopt::opf::{solve_scheduling, Mode, ScheduleConfig};
use feederopt::oracle::droop_equilibrium;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let feeder = bundled::load("feeder_unbalanced_13_high_pv")?;
    let solution = solve_scheduling(&feeder, Mode::Droop, &ScheduleConfig::default())?;
    let eq = droop_equilibrium(&feeder, &solution, 0.5)?;
    println!("settled after {} damped iterations", eq.iterations);
    for p in &eq.points {
        println!(
            "{} {}: V {:.5} (scheduled {:.5})  Q {:+.5} (scheduled {:+.5})",
            p.pv, p.phase, p.v, p.v_scheduled, p.q, p.q_scheduled
        );
    }
    println!("max gap {:.3e} pu", eq.max_schedule_gap());
    Ok(())
}
