//! Measured communication against the closed-form cost of each protocol.

use std::fmt;
use std::str::FromStr;

use crate::arith::{dot_product, mult, mult_trunc};
use crate::convert::{a2b, a2g, b2a, b2g, bit2a, bit_inject, bits_of, g2a, g2b};
use crate::ctx::{run, Config, MsbMode, Party};
use crate::error::{Error, Result};
use crate::garbled::KAPPA;
use crate::ml::{bit_extract, relu, sigmoid};
use crate::net::{CostReport, Transcript};
use crate::party::{P1, P2};
use crate::ring::Ring;
use crate::sharing::{share, Masked};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Mult,
    DotP,
    MultTr,
    G2B,
    G2A,
    B2G,
    A2G,
    A2B,
    Bit2A,
    B2A,
    BitInj,
    BitExt,
    Relu,
    Sigmoid,
}

impl Protocol {
    pub const ALL: [Protocol; 14] = [
        Protocol::Mult,
        Protocol::DotP,
        Protocol::MultTr,
        Protocol::G2B,
        Protocol::G2A,
        Protocol::B2G,
        Protocol::A2G,
        Protocol::A2B,
        Protocol::Bit2A,
        Protocol::B2A,
        Protocol::BitInj,
        Protocol::BitExt,
        Protocol::Relu,
        Protocol::Sigmoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Mult => "mult",
            Protocol::DotP => "dotp",
            Protocol::MultTr => "multtr",
            Protocol::G2B => "g2b",
            Protocol::G2A => "g2a",
            Protocol::B2G => "b2g",
            Protocol::A2G => "a2g",
            Protocol::A2B => "a2b",
            Protocol::Bit2A => "bit2a",
            Protocol::B2A => "b2a",
            Protocol::BitInj => "bitinj",
            Protocol::BitExt => "bitext",
            Protocol::Relu => "relu",
            Protocol::Sigmoid => "sigmoid",
        }
    }

    /// Closed-form (rounds, bits per instance) for the online phase and,
    /// where one is stated, the offline phase.
    pub fn expected(self, l: u64) -> (Cost, Option<Cost>) {
        let k = KAPPA as u64;
        let log = u64::from(l.trailing_zeros());
        let c = |rounds, bits| Cost { rounds, bits };
        match self {
            Protocol::Mult | Protocol::DotP => (c(1, 3 * l), Some(c(1, 3 * l))),
            Protocol::MultTr => (c(1, 3 * l), None),
            Protocol::G2B => (c(1, 3), None),
            Protocol::G2A => (c(1, 3 * l), None),
            Protocol::B2G => (c(1, k), None),
            Protocol::A2G => (c(1, l * k), None),
            Protocol::A2B => (c(1 + log, 3 * l * log + l), None),
            Protocol::Bit2A => (c(1, 3 * l), Some(c(2, 3 * l + 1))),
            Protocol::B2A => (c(1, 3 * l), None),
            Protocol::BitInj => (c(1, 3 * l), Some(c(2, 6 * l + 1))),
            Protocol::BitExt => (c(3, 5 * l + 2), None),
            Protocol::Relu => (c(4, 8 * l + 2), None),
            Protocol::Sigmoid => (c(5, 16 * l + 7), None),
        }
    }

    /// The activations are costed with mask-multiply-reveal extraction.
    fn uses_paper_msb(self) -> bool {
        matches!(self, Protocol::BitExt | Protocol::Relu | Protocol::Sigmoid)
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Protocol> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown protocol {s:?}")))
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cost {
    pub rounds: u64,
    pub bits: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchParams {
    pub count: usize,
    /// Vector length for the dot product.
    pub d: usize,
}

impl Default for BenchParams {
    fn default() -> BenchParams {
        BenchParams { count: 128, d: 16 }
    }
}

/// Measured totals next to the formula, per instance.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub protocol: Protocol,
    pub ell: u32,
    pub count: usize,
    pub measured: CostReport,
    pub online: Cost,
    pub offline: Option<Cost>,
}

impl BenchRow {
    fn per(&self, total: u64) -> f64 {
        total as f64 / self.count as f64
    }

    fn meets(&self, got_rounds: u64, got_bits: u64, want: Cost) -> bool {
        got_rounds == want.rounds && got_bits == want.bits * self.count as u64
    }

    pub fn online_ok(&self) -> bool {
        self.meets(self.measured.online.rounds, self.measured.online.payload_bits, self.online)
    }

    pub fn offline_ok(&self) -> bool {
        self.offline
            .map_or(true, |c| self.meets(self.measured.offline.rounds, self.measured.offline.payload_bits, c))
    }

    pub fn pass(&self) -> bool {
        self.online_ok() && self.offline_ok()
    }

    pub const CSV_HEADER: &'static str =
        "protocol,ell,count,offline_rounds,offline_bits,online_rounds,online_bits,expected_online_rounds,expected_online_bits,expected_offline,status";

    pub fn csv(&self) -> String {
        let m = &self.measured;
        let off = self.offline.map_or_else(|| "-".to_string(), |c| format!("{}/{}", c.rounds, c.bits));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.ell,
            self.count,
            m.offline.rounds,
            self.per(m.offline.payload_bits),
            m.online.rounds,
            self.per(m.online.payload_bits),
            self.online.rounds,
            self.online.bits,
            off,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

impl fmt::Display for BenchRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.measured;
        let off = self.offline.map_or_else(String::new, |c| format!(" (want {}/{})", c.rounds, c.bits));
        write!(
            f,
            "{:<8} ℓ={:<2} offline {:>2} rnd {:>8} b{off:<16} online {:>2} rnd {:>8} b (want {}/{})  {}",
            self.protocol.name(),
            self.ell,
            m.offline.rounds,
            self.per(m.offline.payload_bits),
            m.online.rounds,
            self.per(m.online.payload_bits),
            self.online.rounds,
            self.online.bits,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

fn measured<T>(p: &mut Party, f: impl FnOnce(&mut Party) -> Result<T>) -> Result<Transcript> {
    let before = p.transcript().clone();
    f(p)?;
    Ok(p.transcript().since(&before))
}

fn values(n: usize, ring: Ring) -> Vec<u64> {
    (0..n as u64).map(|i| ring.reduce(i.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 3)).collect()
}

fn word_bits(p: &mut Party, vals: &[u64], ring: Ring) -> Result<Vec<Vec<Masked>>> {
    let l = ring.bits();
    let flat: Vec<u64> = vals.iter().flat_map(|v| bits_of(*v, l)).collect();
    let s = share(p, P1, Ring::BOOL, &flat, flat.len())?;
    Ok(s.chunks(l as usize).map(<[Masked]>::to_vec).collect())
}

fn instance(proto: Protocol, p: &mut Party, ring: Ring, params: &BenchParams) -> Result<Transcript> {
    let n = params.count;
    let vals = values(n, ring);
    let bits: Vec<u64> = vals.iter().map(|v| v & 1).collect();
    let b = Ring::BOOL;
    match proto {
        Protocol::Mult => {
            let x = share(p, P1, ring, &vals, n)?;
            let y = share(p, P2, ring, &vals, n)?;
            measured(p, |p| mult(p, ring, &x, &y))
        }
        Protocol::DotP => {
            let long = values(n * params.d, ring);
            let x = share(p, P1, ring, &long, long.len())?;
            let y = share(p, P2, ring, &long, long.len())?;
            let xs: Vec<Vec<Masked>> = x.chunks(params.d).map(<[Masked]>::to_vec).collect();
            let ys: Vec<Vec<Masked>> = y.chunks(params.d).map(<[Masked]>::to_vec).collect();
            measured(p, |p| dot_product(p, ring, &xs, &ys))
        }
        Protocol::MultTr => {
            let x = share(p, P1, ring, &vals, n)?;
            let y = share(p, P2, ring, &vals, n)?;
            let f = p.frac_bits().min(ring.bits() - 2);
            measured(p, |p| mult_trunc(p, ring, &x, &y, f))
        }
        Protocol::G2B => {
            let s = share(p, P1, b, &bits, n)?;
            let g = b2g(p, &s)?;
            measured(p, |p| g2b(p, &g))
        }
        Protocol::G2A => {
            let x = share(p, P1, ring, &vals, n)?;
            let g = a2g(p, ring, &x)?;
            measured(p, |p| g2a(p, ring, &g))
        }
        Protocol::B2G => {
            let s = share(p, P1, b, &bits, n)?;
            measured(p, |p| b2g(p, &s))
        }
        Protocol::A2G => {
            let x = share(p, P1, ring, &vals, n)?;
            measured(p, |p| a2g(p, ring, &x))
        }
        Protocol::A2B => {
            let x = share(p, P1, ring, &vals, n)?;
            measured(p, |p| a2b(p, ring, &x))
        }
        Protocol::Bit2A => {
            let s = share(p, P1, b, &bits, n)?;
            measured(p, |p| bit2a(p, ring, &s))
        }
        Protocol::B2A => {
            let w = word_bits(p, &vals, ring)?;
            measured(p, |p| b2a(p, ring, &w))
        }
        Protocol::BitInj => {
            let s = share(p, P1, b, &bits, n)?;
            let x = share(p, P2, ring, &vals, n)?;
            measured(p, |p| bit_inject(p, ring, &s, &x))
        }
        Protocol::BitExt | Protocol::Relu | Protocol::Sigmoid => {
            let x = share(p, P1, ring, &vals, n)?;
            let f: fn(&mut Party, Ring, &[Masked]) -> Result<Vec<Masked>> = match proto {
                Protocol::BitExt => bit_extract,
                Protocol::Relu => relu,
                _ => sigmoid,
            };
            measured(p, |p| f(p, ring, &x))
        }
    }
}

/// Runs one protocol over `params.count` instances in `cfg.ring`.
pub fn bench(cfg: &Config, proto: Protocol, params: &BenchParams) -> Result<BenchRow> {
    if params.count == 0 || params.d == 0 {
        return Err(Error::InvalidArgument("count and d must be positive".into()));
    }
    let mut cfg = cfg.clone();
    if proto.uses_paper_msb() {
        cfg.msb_mode = MsbMode::PaperBitext;
    }
    let ring = cfg.ring;
    let out = run(&cfg, |p| instance(proto, p, ring, params));
    let ts = out.into_values()?;
    let (online, offline) = proto.expected(u64::from(ring.bits()));
    Ok(BenchRow {
        protocol: proto,
        ell: ring.bits(),
        count: params.count,
        measured: CostReport::from_transcripts(&ts),
        online,
        offline,
    })
}

pub fn bench_all(cfg: &Config, params: &BenchParams) -> Result<Vec<BenchRow>> {
    Protocol::ALL.into_iter().map(|p| bench(cfg, p, params)).collect()
}
