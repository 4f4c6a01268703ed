//! Masked (⟦·⟧) and replicated (⟨·⟩) sharings: creation, local linear
//! algebra, and reconstruction.
//!
//! A masked sharing of v is m = v + λ₁ + λ₂ + λ₃ (XOR in the boolean ring).
//! Evaluator P_i holds m and every λ_j except λ_i; P0 holds all three λ_j and
//! no m. Slots a party does not hold are stored as zero.

use sha2::{Digest, Sha256};

use crate::ctx::Party;
use crate::error::{Error, Result};
use crate::net::{pack, Kind, Phase};
use crate::party::{PartyId, PartySet, P0, P1, P2, P3};
use crate::ring::Ring;

/// One party's view of ⟦v⟧.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Masked {
    pub m: u64,
    pub lam: [u64; 3],
}

/// One party's view of ⟨v⟩ with v = v₁ + v₂ + v₃. Evaluator P_i holds every
/// component but v_i.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Rep(pub [u64; 3]);

impl Masked {
    /// Drops whatever this party is not supposed to hold.
    pub fn normalize(mut self, me: PartyId) -> Masked {
        if me == P0 {
            self.m = 0;
        } else {
            self.lam[me.slot()] = 0;
        }
        self
    }

    pub fn lam_sum(&self, ring: Ring) -> u64 {
        ring.add(ring.add(self.lam[0], self.lam[1]), self.lam[2])
    }

    pub fn add(self, ring: Ring, o: Masked) -> Masked {
        Masked {
            m: ring.add(self.m, o.m),
            lam: [ring.add(self.lam[0], o.lam[0]), ring.add(self.lam[1], o.lam[1]), ring.add(self.lam[2], o.lam[2])],
        }
    }

    pub fn sub(self, ring: Ring, o: Masked) -> Masked {
        self.add(ring, o.neg(ring))
    }

    pub fn neg(self, ring: Ring) -> Masked {
        Masked { m: ring.neg(self.m), lam: self.lam.map(|l| ring.neg(l)) }
    }

    pub fn scale(self, ring: Ring, c: u64) -> Masked {
        Masked { m: ring.mul(self.m, c), lam: self.lam.map(|l| ring.mul(l, c)) }
    }

    /// ⟦v + c⟧ for a public c: only m moves.
    pub fn add_const(self, ring: Ring, me: PartyId, c: u64) -> Masked {
        if me == P0 {
            self
        } else {
            Masked { m: ring.add(self.m, c), ..self }
        }
    }

    /// ⟦v⟧ for a value every evaluator knows: m = v, λ = 0.
    pub fn joint(ring: Ring, me: PartyId, v: u64) -> Masked {
        Masked { m: if me == P0 { 0 } else { ring.reduce(v) }, lam: [0; 3] }
    }

    /// ⟦v⟧ from ⟨v⟩ with m = 0 and λ = −⟨v⟩.
    pub fn from_rep(ring: Ring, r: Rep) -> Masked {
        Masked { m: 0, lam: r.0.map(|c| ring.neg(c)) }
    }
}

/// c₁·x + c₂·y, elementwise.
pub fn lin_comb(ring: Ring, c1: u64, x: &[Masked], c2: u64, y: &[Masked]) -> Vec<Masked> {
    x.iter().zip(y).map(|(a, b)| a.scale(ring, c1).add(ring, b.scale(ring, c2))).collect()
}

pub fn add(ring: Ring, x: &[Masked], y: &[Masked]) -> Vec<Masked> {
    x.iter().zip(y).map(|(a, b)| a.add(ring, *b)).collect()
}

pub fn sub(ring: Ring, x: &[Masked], y: &[Masked]) -> Vec<Masked> {
    x.iter().zip(y).map(|(a, b)| a.sub(ring, *b)).collect()
}

pub fn add_const(ring: Ring, me: PartyId, x: &[Masked], c: u64) -> Vec<Masked> {
    x.iter().map(|a| a.add_const(ring, me, c)).collect()
}

pub fn joint_share(ring: Ring, me: PartyId, vals: &[u64]) -> Vec<Masked> {
    vals.iter().map(|v| Masked::joint(ring, me, *v)).collect()
}

/// Samples λ components for `n` sharings so that every party in `learners`
/// knows all three. λ_j comes from the key of P\{P_j}, or from the global
/// key when P_j is itself a learner. Components a party cannot derive are 0.
pub fn sample_lambdas(p: &mut Party, n: usize, ring: Ring, learners: PartySet) -> [Vec<u64>; 3] {
    PartyId::EVALUATORS.map(|j| {
        let set = if learners.contains(j) { PartySet::ALL } else { PartySet::without(j) };
        p.sample(set, "lambda", n, ring)
    })
}

fn assemble(p: &Party, ring: Ring, m: &[u64], lams: &[Vec<u64>; 3]) -> Vec<Masked> {
    let me = p.id();
    (0..m.len())
        .map(|i| Masked { m: ring.reduce(m[i]), lam: [lams[0][i], lams[1][i], lams[2][i]] }.normalize(me))
        .collect()
}

fn mask_values(ring: Ring, vals: &[u64], lams: &[Vec<u64>; 3]) -> Vec<u64> {
    vals.iter()
        .enumerate()
        .map(|(i, v)| ring.add(ring.add(ring.add(*v, lams[0][i]), lams[1][i]), lams[2][i]))
        .collect()
}

/// Π_Sh: `owner` secret-shares `vals` (ignored at other parties; only the
/// length `n` must agree).
pub fn share(p: &mut Party, owner: PartyId, ring: Ring, vals: &[u64], n: usize) -> Result<Vec<Masked>> {
    p.offline();
    let lams = sample_lambdas(p, n, ring, owner.set());
    p.online();
    let me = p.id();
    let m = if me == owner {
        check_len(vals, n)?;
        let m = mask_values(ring, vals, &lams);
        for q in PartyId::EVALUATORS.into_iter().filter(|q| *q != owner) {
            p.send_ring(q, "sh.m", &m, ring)?;
        }
        m
    } else if me.is_evaluator() {
        p.recv_ring(owner, n, ring)?
    } else {
        vec![0; n]
    };
    if me.is_evaluator() {
        for q in PartyId::EVALUATORS.into_iter().filter(|q| *q != me) {
            p.defer_ring(q, &m, ring);
            p.expect_ring(q, &m, ring);
        }
    }
    p.barrier();
    let out = assemble(p, ring, &m, &lams);
    p.end_protocol()?;
    Ok(out)
}

fn check_len(vals: &[u64], n: usize) -> Result<()> {
    if vals.len() == n {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("expected {n} inputs, got {}", vals.len())))
    }
}

/// Π_aSh: P0 hands out ⟨v⟩ for its `vals`. Runs in the current phase.
pub fn aux_share(p: &mut Party, ring: Ring, vals: &[u64], n: usize, label: &str) -> Result<Vec<Rep>> {
    let v1 = p.sample(PartySet::without(P1), "ash", n, ring);
    let v2 = p.sample(PartySet::without(P2), "ash", n, ring);
    let me = p.id();
    let v3 = match me {
        P0 => {
            check_len(vals, n)?;
            // Components sum to v.
            let v3: Vec<u64> = (0..n).map(|i| ring.sub(ring.sub(vals[i], v1[i]), v2[i])).collect();
            p.send_ring(P1, label, &v3, ring)?;
            p.send_ring(P2, label, &v3, ring)?;
            v3
        }
        P1 | P2 => {
            let v3 = p.recv_ring(P0, n, ring)?;
            let other = if me == P1 { P2 } else { P1 };
            p.defer_ring(other, &v3, ring);
            p.expect_ring(other, &v3, ring);
            v3
        }
        P3 => vec![0; n],
    };
    p.barrier();
    Ok((0..n)
        .map(|i| {
            let mut c = [v1[i], v2[i], v3[i]];
            if me.is_evaluator() {
                c[me.slot()] = 0;
            }
            Rep(c)
        })
        .collect())
}

/// One verifiable sharing job: `sender` and `verifier` both know `vals`.
#[derive(Clone, Debug)]
pub struct VJob {
    pub sender: PartyId,
    pub verifier: PartyId,
    pub vals: Vec<u64>,
    pub n: usize,
}

impl VJob {
    pub fn new(sender: PartyId, verifier: PartyId, vals: Vec<u64>, n: usize) -> VJob {
        VJob { sender, verifier, vals, n }
    }
}

/// Π_vSh for several jobs in one round. λ sampling happens in the offline
/// phase, the masked value travels online.
pub fn vshare_many(p: &mut Party, ring: Ring, jobs: &[VJob], label: &str) -> Result<Vec<Vec<Masked>>> {
    vshare_many_in(p, ring, jobs, label, Phase::Online)
}

/// Π_vSh with the masked values sent in `phase`; input-independent values
/// can be shared entirely offline.
pub fn vshare_many_in(p: &mut Party, ring: Ring, jobs: &[VJob], label: &str, phase: Phase) -> Result<Vec<Vec<Masked>>> {
    p.offline();
    let lams: Vec<[Vec<u64>; 3]> = jobs
        .iter()
        .map(|j| sample_lambdas(p, j.n, ring, PartySet::of(&[j.sender, j.verifier])))
        .collect();
    p.set_phase(phase);
    let me = p.id();
    let mut ms: Vec<Option<Vec<u64>>> = vec![None; jobs.len()];
    for (k, j) in jobs.iter().enumerate() {
        if me == j.sender || me == j.verifier {
            check_len(&j.vals, j.n)?;
            let m = mask_values(ring, &j.vals, &lams[k]);
            for r in recipients(j) {
                if me == j.sender {
                    p.send_ring(r, label, &m, ring)?;
                } else {
                    p.defer_ring(r, &m, ring);
                }
            }
            ms[k] = Some(m);
        }
    }
    for (k, j) in jobs.iter().enumerate() {
        if recipients(j).any(|r| r == me) {
            let m = p.recv_ring(j.sender, j.n, ring)?;
            p.expect_ring(j.verifier, &m, ring);
            ms[k] = Some(m);
        }
    }
    p.barrier();
    let out = jobs
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let m = ms[k].take().unwrap_or_else(|| vec![0; j.n]);
            assemble(p, ring, &m, &lams[k])
        })
        .collect();
    p.end_protocol()?;
    Ok(out)
}

fn recipients(j: &VJob) -> impl Iterator<Item = PartyId> + '_ {
    PartyId::EVALUATORS.into_iter().filter(move |q| *q != j.sender && *q != j.verifier)
}

pub fn vshare(
    p: &mut Party,
    sender: PartyId,
    verifier: PartyId,
    ring: Ring,
    vals: &[u64],
    n: usize,
) -> Result<Vec<Masked>> {
    let job = VJob::new(sender, verifier, vals.to_vec(), n);
    Ok(vshare_many(p, ring, &[job], "vsh.m")?.pop().unwrap())
}

/// Who sends each party its missing piece in reconstruction, and who
/// vouches for it: (receiver, value sender, hash sender).
const REC_ROUTES: [(PartyId, PartyId, PartyId); 4] = [(P0, P1, P2), (P1, P2, P0), (P2, P3, P0), (P3, P1, P0)];

/// The piece of ⟦v⟧ that `target` lacks: m for P0, λ_i for P_i.
fn missing_piece(target: PartyId, s: &Masked) -> u64 {
    match target {
        P0 => s.m,
        t => s.lam[t.slot()],
    }
}

fn open_with(ring: Ring, me: PartyId, s: &Masked, piece: u64) -> u64 {
    let mut full = *s;
    match me {
        P0 => full.m = piece,
        t => full.lam[t.slot()] = piece,
    }
    ring.sub(full.m, full.lam_sum(ring))
}

/// Π_Rec restricted to `targets`: each target receives its missing piece
/// from one party and a deferred hash of it from another. Returns the
/// values at targets and `None` elsewhere.
pub fn reconstruct_to(p: &mut Party, ring: Ring, x: &[Masked], targets: PartySet) -> Result<Option<Vec<u64>>> {
    p.online();
    p.flush()?;
    let me = p.id();
    for &(t, sender, voucher) in REC_ROUTES.iter().filter(|r| targets.contains(r.0)) {
        let piece: Vec<u64> = x.iter().map(|s| missing_piece(t, s)).collect();
        if me == sender {
            p.send_ring(t, if t == P0 { "rec.m" } else { "rec.lam" }, &piece, ring)?;
        } else if me == voucher {
            p.defer_ring(t, &piece, ring);
        }
    }
    let mut out = None;
    if targets.contains(me) {
        let &(_, sender, voucher) = REC_ROUTES.iter().find(|r| r.0 == me).unwrap();
        let piece = p.recv_ring(sender, x.len(), ring)?;
        p.expect_ring(voucher, &piece, ring);
        out = Some(x.iter().zip(&piece).map(|(s, pc)| open_with(ring, me, s, *pc)).collect());
    }
    p.barrier();
    p.flush()?;
    Ok(out)
}

/// Π_Rec: every party learns the values.
pub fn reconstruct(p: &mut Party, ring: Ring, x: &[Masked]) -> Result<Vec<u64>> {
    Ok(reconstruct_to(p, ring, x, PartySet::ALL)?.expect("all parties are targets"))
}

/// Fair reconstruction: all honest parties output or all abort.
///
/// Each party's verdict (its pending hash checks passed) is agreed on with
/// two all-to-all rounds: everyone sends its bit, then everyone echoes what
/// it received. A party's verdict counts as "continue" only if at least two
/// of the three copies a receiver holds say so, which makes the decision
/// identical at all honest parties with one corruption. Each party then
/// gets its missing piece from two parties plus a hash from a third and
/// keeps the majority-consistent value.
pub fn fair_reconstruct(p: &mut Party, ring: Ring, x: &[Masked]) -> Result<Vec<u64>> {
    p.online();
    let me = p.id();
    let own_ok = match p.flush() {
        Ok(()) => true,
        Err(e) if e.is_abort() => false,
        Err(e) => return Err(e),
    };
    let others: Vec<PartyId> = PartyId::ALL.into_iter().filter(|q| *q != me).collect();

    // Verdict bits.
    for &q in &others {
        p.send_bytes(q, Kind::Control, "frec.flag", vec![own_ok as u8], 1)?;
    }
    let mut direct = [Vote::Missing; 4];
    direct[me.index()] = Vote::from_bool(own_ok);
    for &q in &others {
        direct[q.index()] = match p.recv_bytes(q, Kind::Control) {
            Ok(b) if b.len() == 1 && b[0] <= 1 => Vote::from_bool(b[0] == 1),
            _ => Vote::Missing,
        };
    }
    p.barrier();

    // Echo what everyone said.
    let echo: Vec<u8> = direct.iter().map(|v| *v as u8).collect();
    for &q in &others {
        p.send_bytes(q, Kind::Control, "frec.echo", echo.clone(), 2 * 3)?;
    }
    let mut echoes: [[Vote; 4]; 4] = [[Vote::Missing; 4]; 4];
    for &q in &others {
        if let Ok(b) = p.recv_bytes(q, Kind::Control) {
            if b.len() == 4 {
                for (k, v) in b.iter().enumerate() {
                    echoes[q.index()][k] = Vote::from_byte(*v);
                }
            }
        }
    }
    p.barrier();

    let mut proceed = own_ok;
    for &j in &others {
        let mut votes = vec![direct[j.index()]];
        votes.extend(others.iter().filter(|k| **k != j).map(|k| echoes[k.index()][j.index()]));
        let cont = votes.iter().filter(|v| **v == Vote::Continue).count();
        if cont < 2 {
            proceed = false;
        }
    }
    if !proceed {
        return Err(Error::abort(format!("{me}: fair reconstruction verdict is abort")));
    }

    // Missing pieces: two value copies and one hash per receiver.
    let routes: [(PartyId, [PartyId; 2], PartyId); 4] =
        [(P0, [P1, P2], P3), (P1, [P2, P3], P0), (P2, [P3, P1], P0), (P3, [P1, P2], P0)];
    for &(t, senders, hasher) in &routes {
        let piece: Vec<u64> = x.iter().map(|s| missing_piece(t, s)).collect();
        if senders.contains(&me) {
            p.send_ring(t, "frec.share", &piece, ring)?;
        } else if me == hasher {
            let d = Sha256::digest(pack(&piece, ring.bits())).to_vec();
            p.send_bytes(t, Kind::Hash, "frec.hash", d, 256)?;
        }
    }
    let &(_, senders, hasher) = routes.iter().find(|r| r.0 == me).unwrap();
    let a = p.recv_ring(senders[0], x.len(), ring).ok();
    let b = p.recv_ring(senders[1], x.len(), ring).ok();
    let h = p.recv_bytes(hasher, Kind::Hash).ok();
    p.barrier();
    let matches = |v: &Vec<u64>| h.as_deref() == Some(Sha256::digest(pack(v, ring.bits())).as_slice());
    let piece = match (a, b) {
        (Some(a), Some(b)) if a == b => a,
        (a, b) => a
            .into_iter()
            .chain(b)
            .find(|v| matches(v))
            .ok_or_else(|| Error::abort(format!("{me}: no majority for missing share")))?,
    };
    Ok(x.iter().zip(&piece).map(|(s, pc)| open_with(ring, me, s, *pc)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Vote {
    Abort = 0,
    Continue = 1,
    Missing = 2,
}

impl Vote {
    fn from_bool(b: bool) -> Vote {
        if b {
            Vote::Continue
        } else {
            Vote::Abort
        }
    }

    fn from_byte(b: u8) -> Vote {
        match b {
            0 => Vote::Abort,
            1 => Vote::Continue,
            _ => Vote::Missing,
        }
    }
}

/// Trusted-dealer helpers for tests and benchmarks: build every party's view
/// of a sharing with chosen masks, and open a full set of views.
pub mod dealer {
    use super::*;

    /// All four views of ⟦v⟧ with the given λ components.
    pub fn deal(ring: Ring, v: u64, lam: [u64; 3]) -> [Masked; 4] {
        let lam = lam.map(|l| ring.reduce(l));
        let full = Masked { m: ring.add(ring.reduce(v), ring.add(ring.add(lam[0], lam[1]), lam[2])), lam };
        PartyId::ALL.map(|p| full.normalize(p))
    }

    /// Opens a full set of views, checking that they are mutually consistent.
    pub fn open(ring: Ring, views: &[Masked; 4]) -> Option<u64> {
        let [s0, s1, s2, s3] = views;
        let m = s1.m;
        if s2.m != m || s3.m != m {
            return None;
        }
        let lam = s0.lam;
        let ok = s1.lam[1] == lam[1]
            && s1.lam[2] == lam[2]
            && s2.lam[0] == lam[0]
            && s2.lam[2] == lam[2]
            && s3.lam[0] == lam[0]
            && s3.lam[1] == lam[1];
        ok.then(|| ring.sub(m, s0.lam_sum(ring)))
    }

    /// Transposes per-party vectors of views into per-value arrays.
    pub fn zip_views(per_party: &[Vec<Masked>]) -> Vec<[Masked; 4]> {
        let n = per_party[0].len();
        (0..n).map(|i| [per_party[0][i], per_party[1][i], per_party[2][i], per_party[3][i]]).collect()
    }

    /// Opens ⟨v⟩ from P0's view, checking the evaluators' views agree.
    pub fn open_rep(ring: Ring, views: &[Rep; 4]) -> Option<u64> {
        let c = views[0].0;
        for p in PartyId::EVALUATORS {
            for s in 0..3 {
                if s != p.slot() && views[p.index()].0[s] != c[s] {
                    return None;
                }
            }
        }
        Some(ring.add(ring.add(c[0], c[1]), c[2]))
    }
}
