use std::fmt;

use serde::{Deserialize, Serialize};

/// One conductor of a three-phase feeder. Ordering is fixed: `A < B < C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Phase> {
        Phase::ALL.get(index).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        }
    }

    /// Nominal angle of the balanced positive-sequence phasor, in radians.
    pub fn nominal_angle(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -120f64.to_radians(),
            Phase::C => 120f64.to_radians(),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" | "A" => Ok(Phase::A),
            "b" | "B" => Ok(Phase::B),
            "c" | "C" => Ok(Phase::C),
            other => Err(format!("unknown phase '{other}'")),
        }
    }
}

/// Subset of `{a, b, c}`, iterated in phase order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn empty() -> Self {
        PhaseSet(0)
    }

    pub fn single(phase: Phase) -> Self {
        PhaseSet(1 << phase.index())
    }

    pub fn contains(self, phase: Phase) -> bool {
        self.0 & (1 << phase.index()) != 0
    }

    pub fn insert(&mut self, phase: Phase) {
        self.0 |= 1 << phase.index();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: PhaseSet) -> PhaseSet {
        PhaseSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Position of `phase` among the present phases, if present.
    pub fn position(self, phase: Phase) -> Option<usize> {
        if !self.contains(phase) {
            return None;
        }
        Some(self.iter().take_while(|p| *p != phase).count())
    }

    pub fn to_vec(self) -> Vec<Phase> {
        self.iter().collect()
    }
}

impl FromIterator<Phase> for PhaseSet {
    fn from_iter<I: IntoIterator<Item = Phase>>(iter: I) -> Self {
        let mut set = PhaseSet::empty();
        for p in iter {
            set.insert(p);
        }
        set
    }
}

impl fmt::Debug for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            f.write_str(p.label())?;
        }
        Ok(())
    }
}

/// Per-phase values; a missing entry means the phase is absent.
#[derive(Clone, Debug, PartialEq)]
pub struct PerPhase<T>([Option<T>; 3]);

impl<T> Default for PerPhase<T> {
    fn default() -> Self {
        PerPhase([None, None, None])
    }
}

impl<T> PerPhase<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, phase: Phase) -> Option<&T> {
        self.0[phase.index()].as_ref()
    }

    pub fn get_mut(&mut self, phase: Phase) -> Option<&mut T> {
        self.0[phase.index()].as_mut()
    }

    pub fn set(&mut self, phase: Phase, value: T) {
        self.0[phase.index()] = Some(value);
    }

    pub fn remove(&mut self, phase: Phase) -> Option<T> {
        self.0[phase.index()].take()
    }

    pub fn phases(&self) -> PhaseSet {
        Phase::ALL.into_iter().filter(|p| self.0[p.index()].is_some()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phase, &T)> {
        Phase::ALL
            .into_iter()
            .filter_map(move |p| self.0[p.index()].as_ref().map(|v| (p, v)))
    }

    pub fn map<U>(&self, mut f: impl FnMut(Phase, &T) -> U) -> PerPhase<U> {
        let mut out = PerPhase::new();
        for (p, v) in self.iter() {
            out.set(p, f(p, v));
        }
        out
    }
}

impl<T: Clone> PerPhase<T> {
    /// Same value on every phase of `phases`.
    pub fn uniform(phases: PhaseSet, value: T) -> Self {
        let mut out = PerPhase::new();
        for p in phases.iter() {
            out.set(p, value.clone());
        }
        out
    }
}

impl<T> FromIterator<(Phase, T)> for PerPhase<T> {
    fn from_iter<I: IntoIterator<Item = (Phase, T)>>(iter: I) -> Self {
        let mut out = PerPhase::new();
        for (p, v) in iter {
            out.set(p, v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_order_is_total_and_fixed() {
        assert!(Phase::A < Phase::B && Phase::B < Phase::C);
        assert_eq!(Phase::ALL.len(), 3);
        for (i, p) in Phase::ALL.iter().enumerate() {
            assert_eq!(p.index(), i);
            assert_eq!(Phase::from_index(i), Some(*p));
        }
    }

    #[test]
    fn phase_set_positions() {
        let set: PhaseSet = [Phase::C, Phase::A].into_iter().collect();
        assert_eq!(set.to_vec(), vec![Phase::A, Phase::C]);
        assert_eq!(set.position(Phase::C), Some(1));
        assert_eq!(set.position(Phase::B), None);
        assert!(set.is_subset(PhaseSet::ABC));
        assert!(!PhaseSet::ABC.is_subset(set));
        assert_eq!(set.to_string(), "ac");
    }
}
