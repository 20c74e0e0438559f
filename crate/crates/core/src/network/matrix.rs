use num_complex::Complex64;

use super::phase::{Phase, PhaseSet};

/// Symmetric complex matrix indexed by the phases actually present on a line.
///
/// Absent phases have no row or column; nothing is zero-padded.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMatrix {
    phases: PhaseSet,
    entries: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("row {row} has {found} entries; expected {lower} (lower triangle) or {full} (full)")]
    RowLength {
        row: usize,
        found: usize,
        lower: usize,
        full: usize,
    },
    #[error("matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
}

impl PhaseMatrix {
    pub fn zeros(phases: PhaseSet) -> Self {
        let n = phases.len();
        PhaseMatrix {
            phases,
            entries: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn diagonal(phases: PhaseSet, value: Complex64) -> Self {
        let mut m = Self::zeros(phases);
        for k in 0..phases.len() {
            m.set_sym(k, k, value);
        }
        m
    }

    /// Builds from rows that are either all lower-triangular (row `k` holds
    /// `k + 1` entries) or all full. Full input must already be symmetric.
    pub fn from_rows(phases: PhaseSet, rows: &[Vec<Complex64>]) -> Result<Self, MatrixError> {
        let n = phases.len();
        if rows.len() != n {
            return Err(MatrixError::RowCount {
                expected: n,
                found: rows.len(),
            });
        }
        let lower = rows.iter().enumerate().all(|(k, r)| r.len() == k + 1);
        let full = rows.iter().all(|r| r.len() == n);
        if !lower && !full {
            let (row, r) = rows
                .iter()
                .enumerate()
                .find(|(k, r)| r.len() != k + 1 && r.len() != n)
                .unwrap_or((0, &rows[0]));
            return Err(MatrixError::RowLength {
                row,
                found: r.len(),
                lower: row + 1,
                full: n,
            });
        }
        let mut m = Self::zeros(phases);
        for (k, row) in rows.iter().enumerate() {
            for col in 0..=k {
                m.set_sym(k, col, row[col]);
            }
        }
        if full && !lower {
            for k in 0..n {
                for col in (k + 1)..n {
                    let upper = rows[k][col];
                    let mirror = rows[col][k];
                    let scale = upper.norm().max(mirror.norm()).max(1.0);
                    if (upper - mirror).norm() > 1e-12 * scale {
                        return Err(MatrixError::Asymmetric { row: k, col });
                    }
                }
            }
        }
        Ok(m)
    }

    fn set_sym(&mut self, row: usize, col: usize, value: Complex64) {
        let n = self.dim();
        self.entries[row * n + col] = value;
        self.entries[col * n + row] = value;
    }

    pub fn phases(&self) -> PhaseSet {
        self.phases
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Entry by local row/column position.
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    /// Entry by phase pair; `None` when either phase is absent.
    pub fn get(&self, x: Phase, m: Phase) -> Option<Complex64> {
        let r = self.phases.position(x)?;
        let c = self.phases.position(m)?;
        Some(self.at(r, c))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| self.at(r, c) == self.at(c, r)))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PhaseMatrix {
            phases: self.phases,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    /// Lower triangle, row by row.
    pub fn lower_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.dim())
            .map(|r| (0..=r).map(|c| self.at(r, c)).collect())
            .collect()
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.at(r, c) * v[c]).sum())
            .collect()
    }

    /// Matrix product with another matrix over the same phases.
    pub fn mul(&self, other: &PhaseMatrix) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| (0..n).map(|k| self.at(r, k) * other.at(k, c)).sum())
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lower_triangle_is_mirrored() {
        let rows = vec![vec![c(1.0, 2.0)], vec![c(0.1, 0.2), c(3.0, 4.0)]];
        let m = PhaseMatrix::from_rows([Phase::A, Phase::C].into_iter().collect(), &rows).unwrap();
        assert_eq!(m.get(Phase::A, Phase::C), Some(c(0.1, 0.2)));
        assert_eq!(m.get(Phase::C, Phase::A), Some(c(0.1, 0.2)));
        assert_eq!(m.get(Phase::B, Phase::A), None);
        assert!(m.is_symmetric());
    }

    #[test]
    fn asymmetric_full_input_rejected() {
        let rows = vec![vec![c(1.0, 0.0), c(0.5, 0.0)], vec![c(0.4, 0.0), c(1.0, 0.0)]];
        let err = PhaseMatrix::from_rows(PhaseSet::single(Phase::A).union(PhaseSet::single(Phase::B)), &rows);
        assert_eq!(err, Err(MatrixError::Asymmetric { row: 0, col: 1 }));
    }
}
