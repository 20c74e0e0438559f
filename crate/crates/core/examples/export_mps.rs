//! Writes the first droop-mode program of the smoke feeder as MPS and reads
//! it back.

use feederopt::bundled;
use feederopt::milp::{export_mps, parse_mps};
use feederopt::opf::{build_program, Mode, OperatingPoint, ScheduleConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feeder = bundled::load("feeder_smoke_4bus")?;
    let config = ScheduleConfig::default();
    let op = OperatingPoint::flat_start(&feeder);
    let (program, _) = build_program(&feeder, &op, Mode::Droop, config.segments, &config.big_m, config.v_window())?;
    let text = export_mps(&program);
    let back = parse_mps(&text)?;
    println!(
        "{} lines, {} columns, {} rows, round trip {}",
        text.lines().count(),
        program.num_vars(),
        program.num_constraints(),
        if back == program { "exact" } else { "DIFFERS" }
    );
    for line in text.lines().filter(|l| !l.starts_with('*')).take(12) {
        println!("{line}");
    }
    Ok(())
}
