//! Backward/forward sweep on the IEEE 13-node feeder with every
//! controllable device idle.

use feederopt::bundled;
use feederopt::oracle::no_control_flow;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feeder = bundled::load("feeder_unbalanced_13")?;
    let state = no_control_flow(&feeder)?;
    println!("converged in {} sweeps, mismatch {:.2e}", state.sweeps, state.max_mismatch);
    for (b, bus) in feeder.buses.iter().enumerate() {
        let row: Vec<String> = bus
            .phases
            .iter()
            .map(|x| {
                let v = state.v[b].get(x).copied().unwrap_or_default();
                format!("{x} {:.4}∠{:+7.2}°", v.norm(), v.arg().to_degrees())
            })
            .collect();
        println!("{:>4}  {}", bus.id, row.join("   "));
    }
    println!("line losses {:.5} pu", state.line_losses(&feeder));
    Ok(())
}
