//! Tabulates the IEEE 1547 Volt-VAr characteristic and its zones.

use feederopt::droop::{droop_q, droop_zone};
use feederopt::network::DroopSettings;

fn main() {
    let s = DroopSettings::ieee1547(0.44);
    println!("{:>6}  {:>8}  zone", "V", "Q");
    let mut v = 0.92;
    while v <= 1.0801 {
        println!("{v:>6.3}  {:>+8.4}  {}", droop_q(v, &s), droop_zone(v, &s));
        v += 0.01;
    }
}
