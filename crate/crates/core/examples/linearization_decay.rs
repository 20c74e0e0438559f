//! Error of the linearized voltage magnitude over the outer iterations.

use feederopt::bundled;
use feederopt::opf::{solve_scheduling, Mode, ScheduleConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["feeder_smoke_4bus", "feeder_unbalanced_13"] {
        let feeder = bundled::load(name)?;
        let solution = solve_scheduling(&feeder, Mode::Droop, &ScheduleConfig::default())?;
        println!("{name}");
        for it in &solution.iterations {
            println!("  {}  {:.3e}", it.iteration, it.max_magnitude_error);
        }
    }
    Ok(())
}
