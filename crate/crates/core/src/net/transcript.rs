use std::collections::BTreeSet;
use std::fmt;

use super::{Kind, Phase};

/// One party's traffic in one phase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhaseStats {
    pub payload_bits: u64,
    pub hash_bytes: u64,
    pub commitment_bytes: u64,
    pub control_bits: u64,
    pub messages: u64,
    /// Round indices in which this party sent payload or control traffic.
    pub rounds: BTreeSet<u32>,
}

impl PhaseStats {
    pub fn payload_bytes(&self) -> u64 {
        self.payload_bits.div_ceil(8)
    }

    pub fn rounds(&self) -> usize {
        self.rounds.len()
    }

    fn minus(&self, before: &PhaseStats) -> PhaseStats {
        PhaseStats {
            payload_bits: self.payload_bits - before.payload_bits,
            hash_bytes: self.hash_bytes - before.hash_bytes,
            commitment_bytes: self.commitment_bytes - before.commitment_bytes,
            control_bits: self.control_bits - before.control_bits,
            messages: self.messages - before.messages,
            rounds: self.rounds.difference(&before.rounds).copied().collect(),
        }
    }
}

/// Per-phase traffic sent by one party.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub phases: [PhaseStats; 2],
}

impl Transcript {
    pub(crate) fn record(&mut self, phase: Phase, kind: Kind, bits: u64, round: u32) {
        let s = &mut self.phases[phase as usize];
        s.messages += 1;
        match kind {
            Kind::Payload => {
                s.payload_bits += bits;
                s.rounds.insert(round);
            }
            Kind::Control => {
                s.control_bits += bits;
                s.rounds.insert(round);
            }
            Kind::Hash => s.hash_bytes += bits / 8,
            Kind::Commitment => s.commitment_bytes += bits / 8,
        }
    }

    pub fn phase(&self, p: Phase) -> &PhaseStats {
        &self.phases[p as usize]
    }

    /// Traffic added since `before` was snapshotted from the same party.
    pub fn since(&self, before: &Transcript) -> Transcript {
        Transcript { phases: [self.phases[0].minus(&before.phases[0]), self.phases[1].minus(&before.phases[1])] }
    }
}

/// Network-wide totals for one phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseCost {
    /// Distinct rounds in which any party sent payload or control traffic.
    pub rounds: u64,
    pub payload_bits: u64,
    pub hash_bytes: u64,
    pub commitment_bytes: u64,
    pub control_bits: u64,
}

/// Aggregate of the four parties' transcripts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostReport {
    pub offline: PhaseCost,
    pub online: PhaseCost,
}

impl CostReport {
    pub fn from_transcripts<'a>(ts: impl IntoIterator<Item = &'a Transcript>) -> CostReport {
        let mut rounds: [BTreeSet<u32>; 2] = Default::default();
        let mut out = CostReport::default();
        for t in ts {
            for (i, s) in t.phases.iter().enumerate() {
                let c = if i == 0 { &mut out.offline } else { &mut out.online };
                c.payload_bits += s.payload_bits;
                c.hash_bytes += s.hash_bytes;
                c.commitment_bytes += s.commitment_bytes;
                c.control_bits += s.control_bits;
                rounds[i].extend(s.rounds.iter().copied());
            }
        }
        out.offline.rounds = rounds[0].len() as u64;
        out.online.rounds = rounds[1].len() as u64;
        out
    }

    pub fn phase(&self, p: Phase) -> &PhaseCost {
        match p {
            Phase::Offline => &self.offline,
            Phase::Online => &self.online,
        }
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "offline: {} rounds, {} bits; online: {} rounds, {} bits",
            self.offline.rounds, self.offline.payload_bits, self.online.rounds, self.online.payload_bits
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_are_a_union_across_parties() {
        let mut a = Transcript::default();
        let mut b = Transcript::default();
        a.record(Phase::Online, Kind::Payload, 64, 0);
        b.record(Phase::Online, Kind::Payload, 64, 0);
        b.record(Phase::Online, Kind::Payload, 64, 1);
        b.record(Phase::Online, Kind::Hash, 256, 2);
        let r = CostReport::from_transcripts([&a, &b]);
        assert_eq!(r.online.rounds, 2);
        assert_eq!(r.online.payload_bits, 192);
        assert_eq!(r.online.hash_bytes, 32);
        assert_eq!(r.offline, PhaseCost::default());
    }

    #[test]
    fn since_subtracts() {
        let mut a = Transcript::default();
        a.record(Phase::Offline, Kind::Payload, 8, 0);
        let snap = a.clone();
        a.record(Phase::Offline, Kind::Payload, 16, 1);
        let d = a.since(&snap);
        assert_eq!(d.phases[0].payload_bits, 16);
        assert_eq!(d.phases[0].rounds(), 1);
    }
}
