//! Point-to-point messaging among the four parties, with cost metering.

mod commit;
mod digest;
mod local;
mod tcp;
mod transcript;

pub use commit::{commit, open, Commitment, COMMITMENT_BYTES};
pub use digest::{DigestQueue, DIGEST_BYTES};
pub use local::{local_links, LocalLink};
pub use tcp::{tcp_links, TcpLink};
pub use transcript::{CostReport, PhaseCost, PhaseStats, Transcript};

use std::fmt;

use crate::error::{Error, Result};
use crate::party::PartyId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Offline = 0,
    Online = 1,
}

impl Phase {
    pub fn from_byte(b: u8) -> Option<Phase> {
        match b {
            0 => Some(Phase::Offline),
            1 => Some(Phase::Online),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Offline => "offline",
            Phase::Online => "online",
        })
    }
}

/// What a message carries. Only `Payload` counts toward amortized cost;
/// `Control` carries the fair-reconstruction verdict bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Payload = 0,
    Hash = 1,
    Commitment = 2,
    Control = 3,
}

impl Kind {
    pub fn from_byte(b: u8) -> Option<Kind> {
        match b {
            0 => Some(Kind::Payload),
            1 => Some(Kind::Hash),
            2 => Some(Kind::Commitment),
            3 => Some(Kind::Control),
            _ => None,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Payload => "payload",
            Kind::Hash => "hash",
            Kind::Commitment => "commitment",
            Kind::Control => "control",
        })
    }
}

/// What travels on a channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub phase: Phase,
    pub kind: Kind,
    pub body: Vec<u8>,
}

/// A party's endpoint: FIFO channels to each of the three peers.
pub trait Link: Send {
    fn send(&mut self, to: PartyId, frame: Frame) -> Result<()>;
    fn recv(&mut self, from: PartyId) -> Result<Frame>;
}

/// Sender-side description of an outgoing message, visible to interceptors.
#[derive(Clone, Debug)]
pub struct MsgMeta<'a> {
    pub from: PartyId,
    pub to: PartyId,
    pub phase: Phase,
    pub kind: Kind,
    pub label: &'a str,
    /// Bits per packed element (1 for boolean bodies, ℓ for ring bodies,
    /// 8 for opaque byte strings).
    pub elem_bits: u32,
}

/// Hook for rewriting outgoing messages; the adversary harness uses it.
pub trait Interceptor: Send {
    fn intercept(&mut self, meta: &MsgMeta<'_>, body: &mut Vec<u8>);
}

/// A link plus per-party accounting and round bookkeeping.
pub struct Transport {
    me: PartyId,
    link: Box<dyn Link>,
    transcript: Transcript,
    phase: Phase,
    round: [u32; 2],
    interceptor: Option<Box<dyn Interceptor>>,
}

impl Transport {
    pub fn new(me: PartyId, link: Box<dyn Link>) -> Transport {
        Transport {
            me,
            link,
            transcript: Transcript::default(),
            phase: Phase::Offline,
            round: [0; 2],
            interceptor: None,
        }
    }

    pub fn set_interceptor(&mut self, i: Box<dyn Interceptor>) {
        self.interceptor = Some(i);
    }

    pub fn me(&self) -> PartyId {
        self.me
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Round counters for both phases.
    pub fn rounds(&self) -> [u32; 2] {
        self.round
    }

    pub fn set_rounds(&mut self, r: [u32; 2]) {
        self.round = r;
    }

    /// Ends the current communication round of the active phase.
    pub fn barrier(&mut self) {
        self.round[self.phase as usize] += 1;
    }

    /// Sends `body`, charging `bits` to the transcript under `kind`.
    pub fn send(
        &mut self,
        to: PartyId,
        kind: Kind,
        label: &str,
        elem_bits: u32,
        mut body: Vec<u8>,
        bits: u64,
    ) -> Result<()> {
        if let Some(i) = self.interceptor.as_mut() {
            let meta = MsgMeta { from: self.me, to, phase: self.phase, kind, label, elem_bits };
            i.intercept(&meta, &mut body);
        }
        let round = self.round[self.phase as usize];
        self.transcript.record(self.phase, kind, bits, round);
        // A peer that already halted is not an error for the sender; the
        // abort surfaces on the next receive instead.
        let _ = self.link.send(to, Frame { phase: self.phase, kind, body });
        Ok(())
    }

    pub fn recv(&mut self, from: PartyId, kind: Kind) -> Result<Vec<u8>> {
        let frame = self.link.recv(from)?;
        if frame.phase != self.phase {
            return Err(Error::PhaseMismatch {
                expected: self.phase.to_string(),
                got: frame.phase.to_string(),
            });
        }
        if frame.kind != kind {
            return Err(Error::Malformed {
                from,
                reason: format!("expected {kind} message, got {}", frame.kind),
            });
        }
        Ok(frame.body)
    }
}

/// Packs reduced ring elements: bit-packed for width 1, otherwise
/// little-endian with ⌈ℓ/8⌉ bytes each.
pub fn pack(vals: &[u64], bits: u32) -> Vec<u8> {
    if bits == 1 {
        let mut out = vec![0u8; vals.len().div_ceil(8)];
        for (i, v) in vals.iter().enumerate() {
            out[i / 8] |= ((v & 1) as u8) << (i % 8);
        }
        out
    } else {
        let w = bits.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(vals.len() * w);
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes()[..w]);
        }
        out
    }
}

pub fn unpack(body: &[u8], n: usize, bits: u32) -> Option<Vec<u64>> {
    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    if bits == 1 {
        if body.len() != n.div_ceil(8) {
            return None;
        }
        Some((0..n).map(|i| ((body[i / 8] >> (i % 8)) & 1) as u64).collect())
    } else {
        let w = bits.div_ceil(8) as usize;
        if body.len() != n * w {
            return None;
        }
        Some(
            body.chunks_exact(w)
                .map(|c| {
                    let mut b = [0u8; 8];
                    b[..w].copy_from_slice(c);
                    u64::from_le_bytes(b) & mask
                })
                .collect(),
        )
    }
}
