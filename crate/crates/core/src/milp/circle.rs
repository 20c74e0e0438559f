use std::f64::consts::PI;

use super::program::{ConstraintId, MathProgram, ProgramError, Sense, VarId};

/// Adds the circumscribing polygon of the disc `x² + y² <= radius²`: one
/// tangent half-plane `cos θk·x + sin θk·y <= radius` per `θk = 2πk/segments`.
///
/// Every point of the disc stays feasible; feasible points have norm at most
/// `radius / cos(π / segments)`.
pub fn add_circle_constraint(
    p: &mut MathProgram,
    x: VarId,
    y: VarId,
    radius: f64,
    segments: usize,
    name: &str,
) -> Result<Vec<ConstraintId>, ProgramError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(ProgramError::NonPositiveRadius(radius));
    }
    if segments < 3 {
        return Err(ProgramError::TooFewSegments(segments));
    }
    Ok((0..segments)
        .map(|k| {
            let (s, c) = tangent_direction(k, segments);
            p.add_constraint(format!("{name}#{k}"), [(x, c), (y, s)], Sense::Le, radius)
        })
        .collect())
}

/// `(sin θk, cos θk)` with exact zeros and ones on the axes.
fn tangent_direction(k: usize, segments: usize) -> (f64, f64) {
    let theta = 2.0 * PI * k as f64 / segments as f64;
    let snap = |v: f64| {
        if v.abs() < 1e-15 {
            0.0
        } else if (v.abs() - 1.0).abs() < 1e-15 {
            v.signum()
        } else {
            v
        }
    };
    (snap(theta.sin()), snap(theta.cos()))
}

/// Worst-case radial overshoot factor `1 / cos(π / segments)`.
pub fn polygon_overshoot(segments: usize) -> f64 {
    1.0 / (PI / segments as f64).cos()
}
