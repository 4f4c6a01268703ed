//! Per-party protocol runtime and the four-party runner.
//!
//! Every party executes the same protocol code on its own thread; branches
//! on [`Party::id`] pick each party's role. Sampling calls must be made by
//! all four parties in the same order, since the draw counter is what keeps
//! the PRF tags aligned.

use std::panic;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::net::{
    local_links, pack, tcp_links, unpack, CostReport, DigestQueue, Interceptor, Kind, Link, Phase, Transcript,
    Transport,
};
use crate::party::{PartyId, PartySet};
use crate::prf::{self, KeyBundle, Tag, ZeroShare};
use crate::ring::{Ring, DEFAULT_FRAC_BITS};

/// How the most significant bit of an arithmetic share is extracted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MsbMode {
    /// The constant-round mask-multiply-reveal protocol. Cheap, but its
    /// identity msb(v) = msb(r) ⊕ msb(r·v) does not hold over rings.
    PaperBitext,
    /// Boolean conversion followed by picking the top bit. Always exact.
    #[default]
    A2bFallback,
}

impl std::str::FromStr for MsbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_bitext" | "paper" => Ok(MsbMode::PaperBitext),
            "a2b_fallback" | "a2b" => Ok(MsbMode::A2bFallback),
            _ => Err(Error::InvalidArgument(format!("unknown msb mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub seed: Vec<u8>,
    /// The arithmetic ring Z_{2^ℓ}.
    pub ring: Ring,
    pub frac_bits: u32,
    pub msb_mode: MsbMode,
    /// Flush deferred hashes after every protocol instead of only before
    /// outputs are revealed.
    pub eager_digests: bool,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            seed: b"trident".to_vec(),
            ring: Ring::Z64,
            frac_bits: DEFAULT_FRAC_BITS,
            msb_mode: MsbMode::default(),
            eager_digests: false,
        }
    }
}

impl Config {
    pub fn with_seed(seed: &[u8]) -> Config {
        Config { seed: seed.to_vec(), ..Config::default() }
    }

    pub fn with_ring(mut self, ring: Ring) -> Config {
        self.ring = ring;
        self
    }
}

/// One party's protocol state.
pub struct Party {
    id: PartyId,
    cfg: Config,
    keys: KeyBundle,
    net: Transport,
    digests: DigestQueue,
    draws: u64,
    rng: ChaCha12Rng,
    offset: Option<u128>,
    circuits: u64,
}

impl Party {
    pub fn new(cfg: Config, keys: KeyBundle, link: Box<dyn Link>) -> Party {
        let id = keys.owner();
        let mut h = Sha256::new();
        h.update(b"trident/private");
        h.update(&cfg.seed);
        h.update([id as u8]);
        let rng = ChaCha12Rng::from_seed(h.finalize().into());
        let mut p = Party {
            id,
            net: Transport::new(id, link),
            cfg,
            keys,
            digests: DigestQueue::default(),
            draws: 0,
            rng,
            offset: None,
            circuits: 0,
        };
        // The free-XOR offset R is fixed per session and known to E only.
        let r = p.sample_u128(PartySet::E, "R", 1)[0];
        p.offset = p.id.is_evaluator().then_some(r | 1);
        p
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn is(&self, p: PartyId) -> bool {
        self.id == p
    }

    pub fn cfg(&self) -> &Config {
        &self.cfg
    }

    pub fn ring(&self) -> Ring {
        self.cfg.ring
    }

    pub fn frac_bits(&self) -> u32 {
        self.cfg.frac_bits
    }

    pub fn set_interceptor(&mut self, i: Box<dyn Interceptor>) {
        self.net.set_interceptor(i);
    }

    pub fn phase(&self) -> Phase {
        self.net.phase()
    }

    pub fn set_phase(&mut self, p: Phase) {
        self.net.set_phase(p);
    }

    pub fn offline(&mut self) {
        self.net.set_phase(Phase::Offline);
    }

    pub fn online(&mut self) {
        self.net.set_phase(Phase::Online);
    }

    pub fn barrier(&mut self) {
        self.net.barrier();
    }

    pub fn transcript(&self) -> &Transcript {
        self.net.transcript()
    }

    /// Free-XOR offset, present at garblers only.
    pub fn offset(&self) -> Option<u128> {
        self.offset
    }

    /// Fresh identifier for a garbled circuit, used in gate tweaks.
    pub fn next_circuit_id(&mut self) -> u64 {
        self.circuits += 1;
        self.circuits
    }

    /// Party-private randomness (never shared through keys).
    pub fn private_rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }

    fn next_tag<'a>(&mut self, domain: &'a str) -> Tag<'a> {
        self.draws += 1;
        Tag { domain, counter: self.draws }
    }

    /// `n` elements from the tape of `set`. Parties outside `set` get zeros
    /// but still advance their draw counter.
    pub fn sample(&mut self, set: PartySet, domain: &str, n: usize, ring: Ring) -> Vec<u64> {
        let tag = self.next_tag(domain);
        match self.keys.key(set) {
            Ok(k) if set.contains(self.id) => prf::sample(k, tag, n, ring),
            _ => vec![0; n],
        }
    }

    pub fn sample_u128(&mut self, set: PartySet, domain: &str, n: usize) -> Vec<u128> {
        let tag = self.next_tag(domain);
        match self.keys.key(set) {
            Ok(k) if set.contains(self.id) => prf::sample_u128(k, tag, n),
            _ => vec![0; n],
        }
    }

    pub fn zero_share(&mut self, domain: &str, n: usize, ring: Ring) -> ZeroShare {
        let tag = self.next_tag(domain);
        prf::zero_share(&self.keys, tag, n, ring)
    }

    pub fn send_ring(&mut self, to: PartyId, label: &str, vals: &[u64], ring: Ring) -> Result<()> {
        let bits = vals.len() as u64 * ring.bits() as u64;
        self.net.send(to, Kind::Payload, label, ring.bits(), pack(vals, ring.bits()), bits)
    }

    pub fn recv_ring(&mut self, from: PartyId, n: usize, ring: Ring) -> Result<Vec<u64>> {
        let body = self.net.recv(from, Kind::Payload)?;
        unpack(&body, n, ring.bits())
            .ok_or_else(|| Error::Malformed { from, reason: format!("expected {n} elements of {} bits", ring.bits()) })
    }

    /// Sends raw bytes, charging `bits` to the transcript under `kind`.
    pub fn send_bytes(&mut self, to: PartyId, kind: Kind, label: &str, body: Vec<u8>, bits: u64) -> Result<()> {
        self.net.send(to, kind, label, 8, body, bits)
    }

    pub fn recv_bytes(&mut self, from: PartyId, kind: Kind) -> Result<Vec<u8>> {
        self.net.recv(from, kind)
    }

    pub fn defer_bytes(&mut self, to: PartyId, bytes: &[u8]) {
        self.digests.defer(to, bytes);
    }

    pub fn expect_bytes(&mut self, from: PartyId, bytes: &[u8]) {
        self.digests.expect(from, bytes);
    }

    /// Queues H(vals) toward `to`.
    pub fn defer_ring(&mut self, to: PartyId, vals: &[u64], ring: Ring) {
        self.digests.defer(to, &pack(vals, ring.bits()));
    }

    /// Queues the values `from` is expected to vouch for.
    pub fn expect_ring(&mut self, from: PartyId, vals: &[u64], ring: Ring) {
        self.digests.expect(from, &pack(vals, ring.bits()));
    }

    /// Sends one digest per receiver with queued values and checks every
    /// digest owed to this party.
    pub fn flush(&mut self) -> Result<()> {
        for (to, d) in self.digests.take_outgoing() {
            self.net.send(to, Kind::Hash, "digest", 8, d.to_vec(), 8 * d.len() as u64)?;
        }
        let mut bad = None;
        for (from, want) in self.digests.take_incoming() {
            let got = self.net.recv(from, Kind::Hash)?;
            if got != want && bad.is_none() {
                bad = Some(from);
            }
        }
        match bad {
            Some(from) => Err(Error::abort(format!("{} saw a digest mismatch from {from}", self.id))),
            None => Ok(()),
        }
    }

    /// Called at the end of each protocol; flushes only in eager mode.
    pub fn end_protocol(&mut self) -> Result<()> {
        if self.cfg.eager_digests {
            self.flush()
        } else {
            Ok(())
        }
    }

    /// Runs two independent sub-protocols whose rounds overlap: each branch
    /// starts at the same round index and the longer one sets the end.
    pub fn parallel<A, B>(
        &mut self,
        a: impl FnOnce(&mut Party) -> Result<A>,
        b: impl FnOnce(&mut Party) -> Result<B>,
    ) -> Result<(A, B)> {
        let phase = self.phase();
        let start = self.net.rounds();
        let ra = a(self)?;
        let end_a = self.net.rounds();
        self.net.set_rounds(start);
        self.set_phase(phase);
        let rb = b(self)?;
        let end_b = self.net.rounds();
        self.net.set_rounds([end_a[0].max(end_b[0]), end_a[1].max(end_b[1])]);
        Ok((ra, rb))
    }
}

/// Which channels connect the parties.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Local,
    /// Localhost sockets; `None` picks free ports.
    Tcp(Option<u16>),
}

/// Results and transcripts of one four-party run, indexed by party.
pub struct RunOutput<T> {
    pub results: Vec<Result<T>>,
    pub transcripts: Vec<Transcript>,
}

impl<T> RunOutput<T> {
    pub fn cost(&self) -> CostReport {
        CostReport::from_transcripts(&self.transcripts)
    }

    pub fn all_ok(&self) -> bool {
        self.results.iter().all(Result::is_ok)
    }

    pub fn result(&self, p: PartyId) -> &Result<T> {
        &self.results[p.index()]
    }

    /// Unwraps every party's result, failing on the first error.
    pub fn into_values(self) -> Result<Vec<T>> {
        self.results.into_iter().collect()
    }
}

/// Hook installed on one party before it starts.
pub type Corruption = (PartyId, Box<dyn Interceptor>);

/// Runs `f` at all four parties over in-process channels.
pub fn run<T, F>(cfg: &Config, f: F) -> RunOutput<T>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    run_with(cfg, Backend::Local, None, f).expect("in-process links cannot fail to open")
}

/// Runs `f` at all four parties on the chosen backend, optionally with one
/// party's outgoing traffic rewritten.
pub fn run_with<T, F>(cfg: &Config, backend: Backend, corrupt: Option<Corruption>, f: F) -> Result<RunOutput<T>>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let links: Vec<Box<dyn Link>> = match backend {
        Backend::Local => local_links().into_iter().map(|l| Box::new(l) as Box<dyn Link>).collect(),
        Backend::Tcp(port) => tcp_links(port)?.into_iter().map(|l| Box::new(l) as Box<dyn Link>).collect(),
    };
    let bundles = prf::setup(&cfg.seed);
    let mut parties: Vec<Party> =
        links.into_iter().zip(bundles).map(|(l, k)| Party::new(cfg.clone(), k, l)).collect();
    if let Some((p, i)) = corrupt {
        parties[p.index()].set_interceptor(i);
    }
    let f = &f;
    let outs: Vec<(Result<T>, Transcript)> = thread::scope(|s| {
        let handles: Vec<_> = parties
            .into_iter()
            .map(|mut p| {
                s.spawn(move || {
                    let r = f(&mut p);
                    let t = p.transcript().clone();
                    (r, t)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|e| panic::resume_unwind(e))).collect()
    });
    let (results, transcripts) = outs.into_iter().unzip();
    Ok(RunOutput { results, transcripts })
}

/// Runs `f` as party `me` alone, over a link to the other three processes.
pub fn run_party<T, F>(cfg: &Config, me: PartyId, link: Box<dyn Link>, f: F) -> (Result<T>, Transcript)
where
    F: FnOnce(&mut Party) -> Result<T>,
{
    let keys = prf::setup(&cfg.seed).into_iter().nth(me.index()).expect("four bundles");
    let mut p = Party::new(cfg.clone(), keys, link);
    let r = f(&mut p);
    (r, p.transcript().clone())
}

/// Value produced identically at every party that finished; errors if any
/// party failed or if two parties disagree.
pub fn agreed<T: PartialEq + Clone>(out: &RunOutput<T>, parties: &[PartyId]) -> Result<T> {
    let mut first: Option<&T> = None;
    for p in parties {
        match &out.results[p.index()] {
            Ok(v) => match first {
                None => first = Some(v),
                Some(f) if f != v => return Err(Error::abort(format!("{p} disagrees"))),
                _ => {}
            },
            Err(e) => return Err(Error::abort(format!("{p}: {e}"))),
        }
    }
    first.cloned().ok_or_else(|| Error::InvalidArgument("no parties".into()))
}
