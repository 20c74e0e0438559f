//! Schedules the high-load scenario with and without the droop rows.
//!
//! Without them the optimizer is free to pick any reactive output, and the
//! schedule lands far from what the inverters' own controllers would do.

use feederopt::bundled;
use feederopt::cli::Comparison;
use feederopt::opf::ScheduleConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let feeder = bundled::load("feeder_unbalanced_13_high_load")?;
    let cmp = Comparison::run(&feeder, &ScheduleConfig::default())?;
    println!("{:<8} {:>5} {:>10} {:>10}", "pv", "phase", "droop", "nodroop");
    for (d, n) in cmp.droop_deviations.iter().zip(&cmp.nodroop_deviations) {
        println!("{:<8} {:>5} {:>10.3e} {:>10.3e}", d.pv, d.phase.to_string(), d.deviation, n.deviation);
    }
    println!("{}", cmp.summary());
    Ok(())
}
