use serde::{Deserialize, Serialize};

use crate::network::Phase;

use super::Mode;

/// One outer iteration of the re-linearization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Largest `|V̂ - |V||` over all bus phases.
    pub max_magnitude_error: f64,
    /// Largest `|ΔVr| + |ΔVi|` against the expansion point.
    pub max_voltage_change: f64,
    pub objective: f64,
    pub bb_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusPhaseState {
    pub bus: String,
    pub phase: Phase,
    pub v_re: f64,
    pub v_im: f64,
    /// Linearized magnitude used by the limits and the droop rows.
    pub v_hat: f64,
    /// Current injected by the bus into the network.
    pub i_re: f64,
    pub i_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCurrent {
    pub line: String,
    pub phase: Phase,
    pub i_re: f64,
    pub i_im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Substation,
    Der,
    Capacitor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDispatch {
    pub kind: DeviceKind,
    pub id: String,
    pub bus: String,
    pub phase: Phase,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvDispatch {
    pub pv: String,
    pub bus: String,
    pub phase: Phase,
    pub p: f64,
    pub q: f64,
    /// Scheduled (linearized) magnitude at the PV's bus phase.
    pub v_local: f64,
    pub controller: bool,
    /// Selected droop zone; only in droop mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<u8>,
}

/// Result of a scheduling run, taken from the last outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub feeder: String,
    pub mode: Mode,
    pub segments: usize,
    /// Value of the optimized cost terms.
    pub objective: f64,
    /// Cost of the PVs without a controller (constant, excluded from the
    /// optimized objective).
    pub fixed_cost: f64,
    pub converged: bool,
    pub iterations: Vec<IterationLog>,
    pub buses: Vec<BusPhaseState>,
    pub lines: Vec<LineCurrent>,
    pub devices: Vec<DeviceDispatch>,
    pub pvs: Vec<PvDispatch>,
}

impl DispatchSolution {
    pub fn pv(&self, id: &str, phase: Phase) -> Option<&PvDispatch> {
        self.pvs.iter().find(|d| d.pv == id && d.phase == phase)
    }

    pub fn bus(&self, id: &str, phase: Phase) -> Option<&BusPhaseState> {
        self.buses.iter().find(|b| b.bus == id && b.phase == phase)
    }

    pub fn total_cost(&self) -> f64 {
        self.objective + self.fixed_cost
    }

    pub fn has_zones(&self) -> bool {
        self.pvs.iter().any(|p| p.zone.is_some())
    }
}
