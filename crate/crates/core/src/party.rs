use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// One of the four parties. P0 is the helper and garbled-circuit evaluator;
/// P1, P2 and P3 form the evaluator set E.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyId {
    P0,
    P1,
    P2,
    P3,
}

pub use PartyId::{P0, P1, P2, P3};

impl PartyId {
    pub const ALL: [PartyId; 4] = [P0, P1, P2, P3];
    pub const EVALUATORS: [PartyId; 3] = [P1, P2, P3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<PartyId> {
        PartyId::ALL.get(i).copied()
    }

    pub fn is_evaluator(self) -> bool {
        self != P0
    }

    /// For an evaluator P_i, the evaluator P_{i+1} (cyclically within E).
    pub fn next(self) -> PartyId {
        match self {
            P1 => P2,
            P2 => P3,
            P3 => P1,
            P0 => P0,
        }
    }

    /// For an evaluator P_i, the evaluator P_{i-1} (cyclically within E).
    pub fn prev(self) -> PartyId {
        match self {
            P1 => P3,
            P2 => P1,
            P3 => P2,
            P0 => P0,
        }
    }

    /// Slot of λ_{·,i} for evaluator P_i (0-based).
    pub fn slot(self) -> usize {
        debug_assert!(self.is_evaluator());
        self.index() - 1
    }

    pub fn from_slot(slot: usize) -> PartyId {
        PartyId::EVALUATORS[slot]
    }

    pub fn set(self) -> PartySet {
        PartySet(1 << self.index())
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index())
    }
}

impl FromStr for PartyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P0" | "0" => Ok(P0),
            "P1" | "1" => Ok(P1),
            "P2" | "2" => Ok(P2),
            "P3" | "3" => Ok(P3),
            other => Err(Error::InvalidArgument(format!("unknown party {other:?}"))),
        }
    }
}

/// A subset of the four parties, as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartySet(pub u8);

impl PartySet {
    pub const EMPTY: PartySet = PartySet(0);
    pub const ALL: PartySet = PartySet(0b1111);
    pub const E: PartySet = PartySet(0b1110);

    pub fn of(parties: &[PartyId]) -> PartySet {
        PartySet(parties.iter().fold(0, |acc, p| acc | (1 << p.index())))
    }

    /// P \ {p}.
    pub fn without(p: PartyId) -> PartySet {
        PartySet(Self::ALL.0 & !(1 << p.index()))
    }

    pub fn contains(self, p: PartyId) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = PartyId> {
        PartyId::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn union(self, other: PartySet) -> PartySet {
        PartySet(self.0 | other.0)
    }

    pub fn minus(self, other: PartySet) -> PartySet {
        PartySet(self.0 & !other.0)
    }
}

impl fmt::Display for PartySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.members().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_neighbours() {
        assert_eq!(P1.next(), P2);
        assert_eq!(P3.next(), P1);
        assert_eq!(P1.prev(), P3);
        assert_eq!(P2.prev(), P1);
    }

    #[test]
    fn sets() {
        let s = PartySet::without(P2);
        assert!(s.contains(P0) && s.contains(P1) && s.contains(P3) && !s.contains(P2));
        assert_eq!(s.len(), 3);
        assert_eq!(PartySet::of(&[P1, P2, P3]), PartySet::E);
        assert_eq!(s.to_string(), "{P0,P1,P3}");
        assert_eq!("p3".parse::<PartyId>().unwrap(), P3);
    }
}
