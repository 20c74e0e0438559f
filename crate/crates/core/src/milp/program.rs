use std::fmt;
use std::time::Duration;

/// Absolute feasibility tolerance used by the solvers and every verifier.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Distance from {0, 1} at which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable, no duplicates, no zeros.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramError {
    #[error("variable '{name}' has non-finite or inverted bounds [{lower}, {upper}]")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("constraint '{constraint}' references unknown variable index {index}")]
    UnknownVariable { constraint: String, index: usize },
    #[error("constraint '{0}' has a non-finite coefficient or right-hand side")]
    NonFinite(String),
    #[error("objective has a non-finite coefficient")]
    NonFiniteObjective,
    #[error("binary variable '{0}' must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("circle radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("a circumscribing polygon needs at least 3 segments, got {0}")]
    TooFewSegments(usize),
    #[error("program contains binaries; use solve_milp")]
    HasBinaries,
}

/// A linear (mixed-binary) minimisation problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MathProgram {
    pub name: String,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    objective_constant: f64,
}

impl MathProgram {
    pub fn new(name: impl Into<String>) -> Self {
        MathProgram {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        let id = self.add_var(name, 0.0, 1.0);
        self.vars[id.0].kind = VarKind::Binary;
        id
    }

    /// Adds `sum(terms) sense rhs`. Repeated variables are summed and exact
    /// zeros dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> ConstraintId {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        let mut collected: Vec<(VarId, f64)> = terms.into_iter().collect();
        collected.sort_by_key(|(v, _)| *v);
        for (v, a) in collected {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        });
        ConstraintId(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, var: VarId, coefficient: f64) {
        self.objective[var.0] = coefficient;
    }

    pub fn add_objective(&mut self, var: VarId, coefficient: f64) {
        self.objective[var.0] += coefficient;
    }

    pub fn set_objective_constant(&mut self, value: f64) {
        self.objective_constant = value;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.vars[var.0].lower = lower;
        self.vars[var.0].upper = upper;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn binaries(&self) -> Vec<VarId> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(k, _)| VarId(k))
            .collect()
    }

    pub fn has_binaries(&self) -> bool {
        self.vars.iter().any(|v| v.kind == VarKind::Binary)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &val)| (v.lower - val).max(val - v.upper).max(0.0))
            .fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(bounds, f64::max)
    }

    /// Checks the structural invariants the solvers rely on.
    pub fn validate(&self) -> Result<(), ProgramError> {
        for v in &self.vars {
            if !(v.lower.is_finite() && v.upper.is_finite() && v.lower <= v.upper) {
                return Err(ProgramError::BadBounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ProgramError::BinaryBounds(v.name.clone()));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ProgramError::NonFinite(c.name.clone()));
            }
            for (v, a) in &c.terms {
                if v.0 >= self.vars.len() {
                    return Err(ProgramError::UnknownVariable {
                        constraint: c.name.clone(),
                        index: v.0,
                    });
                }
                if !a.is_finite() {
                    return Err(ProgramError::NonFinite(c.name.clone()));
                }
            }
        }
        if !self.objective.iter().all(|c| c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(ProgramError::NonFiniteObjective);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// One value per variable; for `IterationLimit` in MILP this is the best
    /// incumbent, if any (empty otherwise).
    pub values: Vec<f64>,
    pub objective: f64,
    /// Branch-and-bound nodes (LP relaxations) evaluated.
    pub nodes: usize,
    /// Simplex pivots summed over all relaxations.
    pub iterations: usize,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_terms_merge_and_zeros_drop() {
        let mut p = MathProgram::new("t");
        let x = p.add_var("x", 0.0, 1.0);
        let y = p.add_var("y", 0.0, 1.0);
        let c = p.add_constraint("r", [(y, 1.0), (x, 2.0), (y, -1.0), (x, 0.5)], Sense::Le, 1.0);
        assert_eq!(p.constraint(c).terms, vec![(x, 2.5)]);
    }

    #[test]
    fn validate_rejects_infinite_bounds() {
        let mut p = MathProgram::new("t");
        p.add_var("x", 0.0, f64::INFINITY);
        assert!(matches!(p.validate(), Err(ProgramError::BadBounds { .. })));
    }

    #[test]
    fn validate_rejects_unknown_variable() {
        let mut p = MathProgram::new("t");
        p.add_var("x", 0.0, 1.0);
        p.add_constraint("r", [(VarId(3), 1.0)], Sense::Le, 1.0);
        assert!(matches!(p.validate(), Err(ProgramError::UnknownVariable { index: 3, .. })));
    }
}
