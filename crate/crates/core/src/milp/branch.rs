//! Best-first branch and bound over the binaries of a [`MathProgram`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::debug;

use super::program::{MathProgram, ProgramError, SolveResult, SolveStatus, VarId, INTEGRALITY_TOL};
use super::simplex::{resolve_fixed, solve_relaxation, solve_relaxation_warm, LpOptions, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    pub node_limit: usize,
    /// Nodes whose bound is within this relative distance of the incumbent
    /// are pruned.
    pub relative_gap: f64,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            node_limit: 1_000_000,
            relative_gap: 1e-9,
            lp: LpOptions::default(),
        }
    }
}

pub fn solve_milp(p: &MathProgram) -> Result<SolveResult, ProgramError> {
    solve_milp_with(p, &MilpOptions::default())
}

struct Node {
    id: usize,
    bound: f64,
    fixings: Vec<(VarId, f64)>,
    branch_on: VarId,
    /// Optimal tableau of this node; children start from it.
    warm: Option<WarmStart>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node,
    // must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Incumbent {
    objective: f64,
    node: usize,
    values: Vec<f64>,
}

pub fn solve_milp_with(p: &MathProgram, options: &MilpOptions) -> Result<SolveResult, ProgramError> {
    p.validate()?;
    let start = Instant::now();
    let binaries = p.binaries();
    let base_lower: Vec<f64> = p.vars().iter().map(|v| v.lower).collect();
    let base_upper: Vec<f64> = p.vars().iter().map(|v| v.upper).collect();

    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut incumbent: Option<Incumbent> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut hit_limit = false;

    let bounds_for = |fixings: &[(VarId, f64)]| {
        let mut lower = base_lower.clone();
        let mut upper = base_upper.clone();
        for &(v, val) in fixings {
            lower[v.0] = val;
            upper[v.0] = val;
        }
        (lower, upper)
    };

    let solve_node = |fixings: &[(VarId, f64)], nodes: &mut usize, iterations: &mut usize| {
        let (lower, upper) = bounds_for(fixings);
        let r = solve_relaxation(p, &lower, &upper, &options.lp);
        *nodes += 1;
        *iterations += r.iterations;
        r
    };

    // Warm start from the parent when there is one; a cold solve backs up a
    // warm start that stalls.
    let solve_child = |parent: Option<&WarmStart>, fixings: &[(VarId, f64)], nodes: &mut usize, iterations: &mut usize| {
        *nodes += 1;
        if let (Some(warm), Some(&(var, value))) = (parent, fixings.last()) {
            let (r, next) = resolve_fixed(p, warm, var.0, value, &options.lp);
            *iterations += r.iterations;
            if r.status != SolveStatus::IterationLimit {
                return (r, next);
            }
        }
        let (lower, upper) = bounds_for(fixings);
        let (r, next) = solve_relaxation_warm(p, &lower, &upper, &options.lp);
        *iterations += r.iterations;
        (r, next)
    };

    let prune_level = |inc: &Option<Incumbent>| {
        inc.as_ref()
            .map(|i| i.objective - options.relative_gap * i.objective.abs().max(1.0))
            .unwrap_or(f64::INFINITY)
    };

    // Evaluates a node: returns it for the queue when fractional, records
    // it as incumbent when integral.
    let evaluate = |parent: Option<&WarmStart>,
                        fixings: Vec<(VarId, f64)>,
                        id: usize,
                        nodes: &mut usize,
                        iterations: &mut usize,
                        incumbent: &mut Option<Incumbent>|
     -> Result<Option<Node>, SolveStatus> {
        let (r, warm) = solve_child(parent, &fixings, nodes, iterations);
        match r.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Ok(None),
            other => return Err(other),
        }
        if r.objective >= prune_level(incumbent) {
            return Ok(None);
        }
        match most_fractional(&binaries, &r.values) {
            None => {
                let better = match incumbent {
                    None => true,
                    Some(inc) => r.objective < inc.objective || (r.objective == inc.objective && id < inc.node),
                };
                if better {
                    debug!("incumbent {:.9e} at node {id}", r.objective);
                    *incumbent = Some(Incumbent {
                        objective: r.objective,
                        node: id,
                        values: r.values,
                    });
                }
                Ok(None)
            }
            Some(branch_on) => Ok(Some(Node {
                id,
                bound: r.objective,
                fixings,
                branch_on,
                warm,
            })),
        }
    };

    match evaluate(None, Vec::new(), next_id, &mut nodes, &mut iterations, &mut incumbent) {
        Ok(Some(node)) => heap.push(node),
        Ok(None) => {}
        Err(status) => {
            return Ok(SolveResult {
                status: if status == SolveStatus::Unbounded {
                    SolveStatus::Unbounded
                } else {
                    SolveStatus::IterationLimit
                },
                values: Vec::new(),
                objective: f64::NAN,
                nodes,
                iterations,
                wall_time: start.elapsed(),
            })
        }
    }
    next_id += 1;

    while let Some(node) = heap.pop() {
        if node.bound >= prune_level(&incumbent) {
            continue;
        }
        if nodes >= options.node_limit {
            hit_limit = true;
            break;
        }
        let var = node.branch_on;
        for value in [0.0, 1.0] {
            let mut fixings = node.fixings.clone();
            fixings.push((var, value));
            let id = next_id;
            next_id += 1;
            match evaluate(node.warm.as_ref(), fixings, id, &mut nodes, &mut iterations, &mut incumbent) {
                Ok(Some(child)) => heap.push(child),
                Ok(None) => {}
                Err(_) => hit_limit = true,
            }
        }
    }

    let wall_time = start.elapsed();
    let Some(inc) = incumbent else {
        return Ok(SolveResult {
            status: if hit_limit {
                SolveStatus::IterationLimit
            } else {
                SolveStatus::Infeasible
            },
            values: Vec::new(),
            objective: f64::NAN,
            nodes,
            iterations,
            wall_time,
        });
    };

    // Polish: snap binaries and re-solve the continuous part.
    let mut values = inc.values;
    let mut objective = inc.objective;
    if !binaries.is_empty() {
        let fixings: Vec<(VarId, f64)> = binaries.iter().map(|&v| (v, values[v.0].round())).collect();
        let r = solve_node(&fixings, &mut nodes, &mut iterations);
        if r.status == SolveStatus::Optimal {
            values = r.values;
            objective = r.objective;
        }
    }
    Ok(SolveResult {
        status: if hit_limit {
            SolveStatus::IterationLimit
        } else {
            SolveStatus::Optimal
        },
        values,
        objective,
        nodes,
        iterations,
        wall_time: start.elapsed(),
    })
}

/// The binary farthest from integrality; ties go to the lowest index.
fn most_fractional(binaries: &[VarId], x: &[f64]) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for &v in binaries {
        let frac = (x[v.0] - x[v.0].round()).abs();
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        if best.map(|(_, f)| frac > f).unwrap_or(true) {
            best = Some((v, frac));
        }
    }
    best.map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::program::Sense;

    #[test]
    fn small_knapsack() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5; best is a + c... check all.
        let mut p = MathProgram::new("k");
        let w = [2.0, 3.0, 1.0];
        let v = [5.0, 4.0, 3.0];
        let z: Vec<VarId> = (0..3).map(|k| p.add_binary(format!("z{k}"))).collect();
        for k in 0..3 {
            p.set_objective(z[k], -v[k]);
        }
        p.add_constraint("cap", z.iter().zip(w).map(|(&id, a)| (id, a)), Sense::Le, 5.0);
        let r = solve_milp(&p).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let pick: Vec<f64> = (0..3).map(|k| ((mask >> k) & 1) as f64).collect();
            if pick.iter().zip(w).map(|(x, a)| x * a).sum::<f64>() <= 5.0 {
                best = best.min(-pick.iter().zip(v).map(|(x, c)| x * c).sum::<f64>());
            }
        }
        assert!(r.is_optimal());
        assert!((r.objective - best).abs() < 1e-9);
    }

    #[test]
    fn infeasible_milp() {
        let mut p = MathProgram::new("k");
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.add_constraint("c", [(a, 1.0), (b, 1.0)], Sense::Eq, 1.5);
        assert_eq!(solve_milp(&p).unwrap().status, SolveStatus::Infeasible);
    }
}
