//! Scripted single-party corruption.
//!
//! A [`TamperPolicy`] names a corrupt party, a program, the outgoing
//! messages to rewrite and how. Programs always finish with fair
//! reconstruction, so a detected inconsistency anywhere should end with
//! every honest party aborting.
//!
//! Scenario files hold one policy per line:
//!
//! ```text
//! # party program selector mutation
//! P1 mult mult.mprime>P2#0 add:1
//! P0 multtr trunc.ash#* add:1
//! ```
//!
//! A selector is a message label, optionally `>Pk` to restrict the
//! recipient, then `#n` for the n-th matching message (default 0) or `#*`
//! for all of them. Mutations act on the first element of the body:
//! `add:k`, `replace:v`, `flip:i` (bit i of the raw body) and `hash`, which
//! inverts every byte.

use std::fmt;
use std::str::FromStr;

use crate::arith::{dot_product, mult, mult_trunc};
use crate::convert::{a2b, a2g, b2a, b2g, bit2a, bit_inject, g2a, g2b};
use crate::ctx::{run_with, Backend, Config, Party};
use crate::error::{Error, Result};
use crate::garbled::g_share;
use crate::net::{Interceptor, MsgMeta};
use crate::party::{PartyId, P1, P2, P3};
use crate::ring::Ring;
use crate::sharing::{fair_reconstruct, reconstruct, share, Masked};

/// The suite shipped with the crate.
pub const BUNDLED_SUITE: &str = include_str!("../scenarios/abort_suite.txt");

const B: Ring = Ring::BOOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occurrence {
    Nth(usize),
    All,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selector {
    pub label: String,
    pub to: Option<PartyId>,
    pub occurrence: Occurrence,
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Selector> {
        let (head, occurrence) = match s.split_once('#') {
            Some((h, "*")) => (h, Occurrence::All),
            Some((h, n)) => {
                let n = n.parse().map_err(|_| Error::InvalidArgument(format!("bad occurrence {n:?}")))?;
                (h, Occurrence::Nth(n))
            }
            None => (s, Occurrence::Nth(0)),
        };
        let (label, to) = match head.split_once('>') {
            Some((l, t)) => (l, Some(t.parse()?)),
            None => (head, None),
        };
        if label.is_empty() {
            return Err(Error::InvalidArgument("empty message label".into()));
        }
        Ok(Selector { label: label.to_string(), to, occurrence })
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if let Some(t) = self.to {
            write!(f, ">{t}")?;
        }
        match self.occurrence {
            Occurrence::Nth(n) => write!(f, "#{n}"),
            Occurrence::All => f.write_str("#*"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    Add(u64),
    Replace(u64),
    Flip(usize),
    Hash,
}

impl FromStr for Mutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mutation> {
        let num = |v: &str| -> Result<u64> {
            let parsed = match v.strip_prefix("0x") {
                Some(h) => u64::from_str_radix(h, 16).ok(),
                None => v.parse::<u64>().ok().or_else(|| v.parse::<i64>().ok().map(|x| x as u64)),
            };
            parsed.ok_or_else(|| Error::InvalidArgument(format!("bad number {v:?}")))
        };
        match s.split_once(':') {
            Some(("add", v)) => Ok(Mutation::Add(num(v)?)),
            Some(("replace", v)) => Ok(Mutation::Replace(num(v)?)),
            Some(("flip", v)) => Ok(Mutation::Flip(num(v)? as usize)),
            None if s == "hash" => Ok(Mutation::Hash),
            _ => Err(Error::InvalidArgument(format!("unknown mutation {s:?}"))),
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::Add(v) => write!(f, "add:{v}"),
            Mutation::Replace(v) => write!(f, "replace:{v}"),
            Mutation::Flip(i) => write!(f, "flip:{i}"),
            Mutation::Hash => f.write_str("hash"),
        }
    }
}

impl Mutation {
    /// Rewrites a packed body whose elements are `elem_bits` wide.
    pub fn apply(self, body: &mut [u8], elem_bits: u32) {
        if body.is_empty() {
            return;
        }
        if let Mutation::Flip(i) = self {
            if i / 8 < body.len() {
                body[i / 8] ^= 1 << (i % 8);
            }
            return;
        }
        if let Mutation::Hash = self {
            body.iter_mut().for_each(|b| *b = !*b);
            return;
        }
        if elem_bits == 1 {
            let bit = (body[0] & 1) as u64;
            let new = match self {
                Mutation::Add(k) => bit ^ (k & 1),
                Mutation::Replace(v) => v & 1,
                _ => unreachable!(),
            };
            body[0] = (body[0] & !1) | new as u8;
            return;
        }
        let w = (elem_bits.div_ceil(8) as usize).min(body.len());
        let mut buf = [0u8; 8];
        buf[..w].copy_from_slice(&body[..w]);
        let old = u64::from_le_bytes(buf);
        let new = match self {
            Mutation::Add(k) => old.wrapping_add(k),
            Mutation::Replace(v) => v,
            _ => unreachable!(),
        };
        body[..w].copy_from_slice(&new.to_le_bytes()[..w]);
    }
}

/// Protocol compositions the harness can attack. Each one ends with fair
/// reconstruction of its result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Program {
    Share,
    Mult,
    DotP,
    MultTr,
    Bit2A,
    BitInj,
    B2A,
    A2B,
    Rec,
    GShare,
    GShareP0,
    GVShare,
    Garbled,
    FairRec,
}

impl Program {
    pub const ALL: [Program; 14] = [
        Program::Share,
        Program::Mult,
        Program::DotP,
        Program::MultTr,
        Program::Bit2A,
        Program::BitInj,
        Program::B2A,
        Program::A2B,
        Program::Rec,
        Program::GShare,
        Program::GShareP0,
        Program::GVShare,
        Program::Garbled,
        Program::FairRec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Program::Share => "sh",
            Program::Mult => "mult",
            Program::DotP => "dotp",
            Program::MultTr => "multtr",
            Program::Bit2A => "bit2a",
            Program::BitInj => "bitinj",
            Program::B2A => "b2a",
            Program::A2B => "a2b",
            Program::Rec => "rec",
            Program::GShare => "gsh",
            Program::GShareP0 => "gsh0",
            Program::GVShare => "gvsh",
            Program::Garbled => "gc",
            Program::FairRec => "frec",
        }
    }
}

impl FromStr for Program {
    type Err = Error;

    fn from_str(s: &str) -> Result<Program> {
        Program::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown program {s:?}")))
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const XS: [u64; 4] = [3, 1 << 40, u64::MAX, 12345];
const YS: [u64; 4] = [7, 9, 2, 1 << 20];
const BITS: [u64; 4] = [1, 0, 1, 1];
const FRAC: u32 = 13;

fn fx(v: f64) -> u64 {
    (v * f64::from(1u32 << FRAC)).round() as i64 as u64
}

fn bits_of(vals: &[u64], l: u32) -> Vec<u64> {
    vals.iter().flat_map(|v| (0..l).map(move |i| (v >> i) & 1)).collect()
}

fn inputs(p: &mut Party, ring: Ring) -> Result<(Vec<Masked>, Vec<Masked>)> {
    let x = share(p, P1, ring, &XS, XS.len())?;
    let y = share(p, P2, ring, &YS, YS.len())?;
    Ok((x, y))
}

impl Program {
    /// The honest run, at every party.
    fn execute(self, p: &mut Party) -> Result<Vec<u64>> {
        let ring = Ring::Z64;
        match self {
            Program::Share | Program::FairRec => {
                let x = share(p, P1, ring, &XS, XS.len())?;
                fair_reconstruct(p, ring, &x)
            }
            Program::Mult => {
                let (x, y) = inputs(p, ring)?;
                let z = mult(p, ring, &x, &y)?;
                fair_reconstruct(p, ring, &z)
            }
            Program::DotP => {
                let (x, y) = inputs(p, ring)?;
                let z = dot_product(p, ring, &[x], &[y])?;
                fair_reconstruct(p, ring, &z)
            }
            Program::MultTr => {
                let a = [fx(1.5), fx(-2.25), fx(10.0), fx(0.125)];
                let b = [fx(2.0), fx(4.5), fx(-0.5), fx(8.0)];
                let x = share(p, P1, ring, &a, 4)?;
                let y = share(p, P3, ring, &b, 4)?;
                let z = mult_trunc(p, ring, &x, &y, FRAC)?;
                fair_reconstruct(p, ring, &z)
            }
            Program::Bit2A => {
                let b = share(p, P2, B, &BITS, BITS.len())?;
                let a = bit2a(p, ring, &b)?;
                fair_reconstruct(p, ring, &a)
            }
            Program::BitInj => {
                let b = share(p, P3, B, &BITS, BITS.len())?;
                let x = share(p, P1, ring, &XS, XS.len())?;
                let z = bit_inject(p, ring, &b, &x)?;
                fair_reconstruct(p, ring, &z)
            }
            Program::B2A => {
                let flat = share(p, P1, B, &bits_of(&YS, 64), 4 * 64)?;
                let bits: Vec<Vec<Masked>> = flat.chunks(64).map(<[Masked]>::to_vec).collect();
                let a = b2a(p, ring, &bits)?;
                fair_reconstruct(p, ring, &a)
            }
            Program::A2B => {
                let x = share(p, P2, ring, &XS, XS.len())?;
                let bits = a2b(p, ring, &x)?;
                fair_reconstruct(p, B, &bits.concat())
            }
            Program::Rec => {
                let x = share(p, P3, ring, &XS, XS.len())?;
                let opened = reconstruct(p, ring, &x)?;
                let fair = fair_reconstruct(p, ring, &x)?;
                Ok([opened, fair].concat())
            }
            Program::GShare | Program::GShareP0 => {
                let owner = if self == Program::GShare { P1 } else { crate::party::P0 };
                let g = g_share(p, owner, &BITS, BITS.len())?;
                let b = g2b(p, &g)?;
                fair_reconstruct(p, B, &b)
            }
            Program::GVShare => {
                let b = share(p, P1, B, &BITS, BITS.len())?;
                let g = b2g(p, &b)?;
                let back = g2b(p, &g)?;
                fair_reconstruct(p, B, &back)
            }
            Program::Garbled => {
                let x = share(p, P2, ring, &YS, YS.len())?;
                let g = a2g(p, ring, &x)?;
                let back = g2a(p, ring, &g)?;
                fair_reconstruct(p, ring, &back)
            }
        }
    }

    /// Plaintext result and the per-element tolerance.
    fn oracle(self) -> (Vec<u64>, u64) {
        match self {
            Program::Share | Program::FairRec => (XS.to_vec(), 0),
            Program::Mult => (XS.iter().zip(&YS).map(|(a, b)| a.wrapping_mul(*b)).collect(), 0),
            Program::DotP => (vec![XS.iter().zip(&YS).fold(0u64, |s, (a, b)| s.wrapping_add(a.wrapping_mul(*b)))], 0),
            Program::MultTr => ([3.0, -10.125, -5.0, 1.0].iter().map(|v| fx(*v)).collect(), 1),
            Program::Bit2A | Program::GShare | Program::GShareP0 | Program::GVShare => (BITS.to_vec(), 0),
            Program::BitInj => (XS.iter().zip(&BITS).map(|(a, b)| a.wrapping_mul(*b)).collect(), 0),
            Program::B2A | Program::Garbled => (YS.to_vec(), 0),
            Program::A2B => (bits_of(&XS, 64), 0),
            Program::Rec => ([XS, XS].concat(), 0),
        }
    }
}

/// One scenario line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TamperPolicy {
    pub party: PartyId,
    pub program: Program,
    pub selector: Selector,
    pub mutation: Mutation,
}

impl fmt::Display for TamperPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.party, self.program, self.selector, self.mutation)
    }
}

impl FromStr for TamperPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<TamperPolicy> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        let [party, program, selector, mutation] = fields[..] else {
            return Err(Error::InvalidArgument(format!("expected 4 fields, found {}", fields.len())));
        };
        Ok(TamperPolicy {
            party: party.parse()?,
            program: program.parse()?,
            selector: selector.parse()?,
            mutation: mutation.parse()?,
        })
    }
}

/// Parses a scenario file; blank lines and lines starting with `#` are
/// skipped.
pub fn parse_scenarios(text: &str) -> Result<Vec<TamperPolicy>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| l.parse().map_err(|e: Error| Error::Parse { line: i + 1, msg: e.to_string() }))
        .collect()
}

struct Tamper {
    selector: Selector,
    mutation: Mutation,
    seen: usize,
}

impl Interceptor for Tamper {
    fn intercept(&mut self, meta: &MsgMeta<'_>, body: &mut Vec<u8>) {
        if meta.label != self.selector.label || self.selector.to.is_some_and(|t| t != meta.to) {
            return;
        }
        let hit = match self.selector.occurrence {
            Occurrence::All => true,
            Occurrence::Nth(n) => self.seen == n,
        };
        self.seen += 1;
        if hit {
            self.mutation.apply(body, meta.elem_bits);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Every honest party aborted.
    AllHonestAbort,
    /// Every honest party output the correct value.
    Output(Vec<u64>),
    /// Some honest parties aborted while others output the correct value.
    PartialAbort,
    /// An honest party output a wrong value without aborting.
    Violation { party: PartyId, got: Vec<u64> },
}

impl Outcome {
    /// Neither a wrong output nor a split decision among honest parties.
    pub fn is_safe(&self) -> bool {
        matches!(self, Outcome::AllHonestAbort | Outcome::Output(_))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::AllHonestAbort => f.write_str("all-honest-abort"),
            Outcome::Output(_) => f.write_str("output"),
            Outcome::PartialAbort => f.write_str("partial-abort"),
            Outcome::Violation { party, .. } => write!(f, "violation at {party}"),
        }
    }
}

fn close(got: &[u64], want: &[u64], tol: u64) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| g.wrapping_sub(*w).min(w.wrapping_sub(*g)) <= tol)
}

/// Runs `program` with `corrupt` misbehaving as described (or honestly
/// when `policy` is `None`) and classifies the honest parties' results.
pub fn run_program(cfg: &Config, program: Program, policy: Option<&TamperPolicy>) -> Result<Outcome> {
    let corrupt = policy.map(|t| {
        let i: Box<dyn Interceptor> =
            Box::new(Tamper { selector: t.selector.clone(), mutation: t.mutation, seen: 0 });
        (t.party, i)
    });
    let bad = policy.map(|t| t.party);
    let out = run_with(cfg, Backend::Local, corrupt, |p| program.execute(p))?;
    let (want, tol) = program.oracle();
    let mut aborted = 0;
    let mut correct = None;
    for q in PartyId::ALL.into_iter().filter(|q| Some(*q) != bad) {
        match out.result(q) {
            Err(_) => aborted += 1,
            Ok(v) if close(v, &want, tol) => correct = Some(v.clone()),
            Ok(v) => return Ok(Outcome::Violation { party: q, got: v.clone() }),
        }
    }
    Ok(match (aborted, correct) {
        (0, Some(v)) => Outcome::Output(v),
        (_, None) => Outcome::AllHonestAbort,
        _ => Outcome::PartialAbort,
    })
}

pub fn run_with_adversary(cfg: &Config, policy: &TamperPolicy) -> Result<Outcome> {
    run_program(cfg, policy.program, Some(policy))
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub rows: Vec<(TamperPolicy, Outcome)>,
}

impl SuiteReport {
    pub fn count(&self, f: impl Fn(&Outcome) -> bool) -> usize {
        self.rows.iter().filter(|(_, o)| f(o)).count()
    }

    pub fn violations(&self) -> usize {
        self.count(|o| !o.is_safe())
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, o) in &self.rows {
            writeln!(f, "{p:<40} {o}")?;
        }
        Ok(())
    }
}

pub fn run_suite(cfg: &Config, policies: &[TamperPolicy]) -> Result<SuiteReport> {
    let rows = policies
        .iter()
        .map(|p| Ok((p.clone(), run_with_adversary(cfg, p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_forms() {
        let s: Selector = "mult.mprime>P2#3".parse().unwrap();
        assert_eq!(s, Selector { label: "mult.mprime".into(), to: Some(P2), occurrence: Occurrence::Nth(3) });
        assert_eq!(s.to_string(), "mult.mprime>P2#3");
        let s: Selector = "digest#*".parse().unwrap();
        assert_eq!(s.occurrence, Occurrence::All);
        assert_eq!("rec.m".parse::<Selector>().unwrap().occurrence, Occurrence::Nth(0));
        assert!("x>P9".parse::<Selector>().is_err());
    }

    #[test]
    fn mutations_touch_first_element() {
        let mut body = vec![0xff, 0, 0, 0, 0, 0, 0, 0, 9];
        Mutation::Add(1).apply(&mut body, 64);
        assert_eq!(body[..2], [0, 1]);
        Mutation::Replace(5).apply(&mut body, 64);
        assert_eq!(body[..2], [5, 0]);
        let mut bits = vec![0b10];
        Mutation::Add(1).apply(&mut bits, 1);
        assert_eq!(bits, vec![0b11]);
        Mutation::Flip(1).apply(&mut bits, 1);
        assert_eq!(bits, vec![0b01]);
        Mutation::Hash.apply(&mut bits, 8);
        assert_eq!(bits, vec![0xfe]);
    }

    #[test]
    fn scenario_errors_name_the_line() {
        let err = parse_scenarios("# header\n\nP1 mult mult.mprime add:1\nP1 mult\n").unwrap_err();
        assert!(err.to_string().starts_with("line 4"), "{err}");
        assert!(parse_scenarios("").unwrap().is_empty());
    }

    #[test]
    fn honest_runs_match_oracles() {
        let cfg = Config::default();
        for prog in Program::ALL {
            let o = run_program(&cfg, prog, None).unwrap();
            assert!(matches!(o, Outcome::Output(_)), "{prog}: {o}");
        }
    }

    #[test]
    fn bundled_suite_parses() {
        assert!(parse_scenarios(BUNDLED_SUITE).unwrap().len() >= 30);
    }

    #[test]
    fn unused_party_ids_are_rejected() {
        assert!("P4 mult mult.mprime add:1".parse::<TamperPolicy>().is_err());
        assert_eq!("P3 frec frec.share#* add:1".parse::<TamperPolicy>().unwrap().party, P3);
    }
}
