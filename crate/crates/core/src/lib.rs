//! Scheduling of distributed energy resources on unbalanced three-phase
//! distribution feeders, with the Volt-VAr droop curve of PV smart inverters
//! encoded exactly as mixed-integer constraints.

pub mod bundled;
pub mod cli;
pub mod droop;
pub mod io;
pub mod milp;
pub mod network;
pub mod opf;
pub mod oracle;
