//! Reads a feeder given in SI units and writes it back in per-unit.

use feederopt::bundled;
use feederopt::io::{serialize_feeder, to_document, Units};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feeder = bundled::load("feeder_smoke_4bus")?;
    let line = &feeder.lines[0];
    println!("{} self impedance, phase a: {:.6} pu", line.id, line.series_impedance.at(0, 0));
    print!("{}", serialize_feeder(&to_document(&feeder, Units::Pu)));
    Ok(())
}
