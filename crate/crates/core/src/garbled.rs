//! The garbled world: P1, P2, P3 garble with a common free-XOR offset R and
//! P0 evaluates.
//!
//! A garbled share of bit v is the zero-label K⁰ at each garbler and the
//! active label K⁰ ⊕ v·R at P0, so lsb(K⁰) ⊕ lsb(label) = v. AND gates use
//! half-gates with two ciphertexts each; XOR and NOT are free.

use sha2::{Digest, Sha256};

use crate::circuit::{GateCircuit, Op, ONE};
use crate::ctx::Party;
use crate::error::{Error, Result};
use crate::net::{commit, open, Commitment, Kind, Phase, COMMITMENT_BYTES};
use crate::party::{PartyId, PartySet, P0, P1, P2};
use crate::ring::Ring;

/// Security parameter κ in bits.
pub const KAPPA: u32 = 128;
const LABEL_BYTES: usize = KAPPA as usize / 8;

pub type Label = u128;

/// One party's view of a garbled-shared bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct GShare(pub Label);

impl GShare {
    pub fn xor(self, o: GShare) -> GShare {
        GShare(self.0 ^ o.0)
    }

    /// NOT flips the garblers' zero-label; P0's label is unchanged.
    pub fn not(self, p: &Party) -> GShare {
        match p.offset() {
            Some(r) => GShare(self.0 ^ r),
            None => self,
        }
    }

    /// A public constant: zero-label c·R at garblers, all-zero label at P0.
    pub fn constant(p: &Party, bit: bool) -> GShare {
        match p.offset() {
            Some(r) if bit => GShare(r),
            _ => GShare(0),
        }
    }

    pub fn lsb(self) -> u64 {
        (self.0 & 1) as u64
    }
}

/// Key derivation for garbled rows: H(K, tweak) truncated to κ bits.
pub trait Kdf {
    fn hash(&self, key: Label, tweak: u128) -> Label;
}

/// SHA-256 based derivation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sha256Kdf;

impl Kdf for Sha256Kdf {
    fn hash(&self, key: Label, tweak: u128) -> Label {
        let mut h = Sha256::new();
        h.update(key.to_le_bytes());
        h.update(tweak.to_le_bytes());
        let d = h.finalize();
        u128::from_le_bytes(d[..LABEL_BYTES].try_into().unwrap())
    }
}

fn tweak(circuit: u64, instance: usize, and_index: usize, half: usize) -> u128 {
    ((circuit as u128) << 64) | ((instance as u128) << 32) | (2 * and_index + half) as u128
}

/// Half-gate ciphertexts, two per AND gate, for a batch of instances of
/// one circuit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GarbledTables {
    pub rows: Vec<[Label; 2]>,
}

impl GarbledTables {
    /// Ciphertexts only, gate by gate; this is what travels to P0.
    pub fn ciphertexts(&self) -> Vec<u8> {
        self.rows.iter().flat_map(|r| r.iter().flat_map(|c| c.to_le_bytes())).collect()
    }

    pub fn from_ciphertexts(bytes: &[u8]) -> Option<GarbledTables> {
        if bytes.len() % (2 * LABEL_BYTES) != 0 {
            return None;
        }
        let rows = bytes
            .chunks(2 * LABEL_BYTES)
            .map(|c| {
                let a = u128::from_le_bytes(c[..LABEL_BYTES].try_into().unwrap());
                let b = u128::from_le_bytes(c[LABEL_BYTES..].try_into().unwrap());
                [a, b]
            })
            .collect();
        Some(GarbledTables { rows })
    }

    /// Self-describing form: the circuit's text, a blank line, then the
    /// ciphertext blocks.
    pub fn to_bytes(&self, circuit: &GateCircuit) -> Vec<u8> {
        let mut out = circuit.to_string().into_bytes();
        out.push(b'\n');
        out.extend(self.ciphertexts());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(GateCircuit, GarbledTables)> {
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::InvalidArgument("missing circuit header".into()))?;
        let text = std::str::from_utf8(&bytes[..split])
            .map_err(|_| Error::InvalidArgument("circuit header is not text".into()))?;
        let c: GateCircuit = text.parse()?;
        let t = GarbledTables::from_ciphertexts(&bytes[split + 2..])
            .ok_or_else(|| Error::InvalidArgument("ciphertext length".into()))?;
        Ok((c, t))
    }
}

/// Garbles one instance: returns its AND rows and the zero-labels of its
/// output wires.
pub fn garble(
    kdf: &dyn Kdf,
    c: &GateCircuit,
    r: Label,
    inputs: &[Label],
    circuit_id: u64,
    instance: usize,
) -> (Vec<[Label; 2]>, Vec<Label>) {
    let mut w = Vec::with_capacity(c.wires());
    w.push(r);
    w.extend_from_slice(inputs);
    let mut rows = Vec::with_capacity(c.and_count());
    for g in c.gates() {
        let out = match g.op {
            Op::Xor => w[g.a] ^ w[g.b],
            Op::Not => w[g.a] ^ r,
            Op::And => {
                let j = rows.len();
                let (a0, b0) = (w[g.a], w[g.b]);
                let (pa, pb) = (a0 & 1, b0 & 1);
                let (ta, tb) = (tweak(circuit_id, instance, j, 0), tweak(circuit_id, instance, j, 1));
                let ha0 = kdf.hash(a0, ta);
                let hb0 = kdf.hash(b0, tb);
                let tg = ha0 ^ kdf.hash(a0 ^ r, ta) ^ if pb == 1 { r } else { 0 };
                let te = hb0 ^ kdf.hash(b0 ^ r, tb) ^ a0;
                let wg = ha0 ^ if pa == 1 { tg } else { 0 };
                let we = hb0 ^ if pb == 1 { te ^ a0 } else { 0 };
                rows.push([tg, te]);
                wg ^ we
            }
        };
        w.push(out);
    }
    (rows, c.outputs().iter().map(|o| w[*o]).collect())
}

/// Evaluates one instance from active input labels.
pub fn evaluate(
    kdf: &dyn Kdf,
    c: &GateCircuit,
    rows: &[[Label; 2]],
    inputs: &[Label],
    circuit_id: u64,
    instance: usize,
) -> Result<Vec<Label>> {
    if rows.len() != c.and_count() || inputs.len() != c.inputs() {
        return Err(Error::InvalidArgument("garbled table does not fit the circuit".into()));
    }
    let mut w = Vec::with_capacity(c.wires());
    w.push(0);
    w.extend_from_slice(inputs);
    let mut j = 0;
    for g in c.gates() {
        let out = match g.op {
            Op::Xor => w[g.a] ^ w[g.b],
            Op::Not => w[g.a],
            Op::And => {
                let (a, b) = (w[g.a], w[g.b]);
                let [tg, te] = rows[j];
                let wg = kdf.hash(a, tweak(circuit_id, instance, j, 0)) ^ if a & 1 == 1 { tg } else { 0 };
                let we = kdf.hash(b, tweak(circuit_id, instance, j, 1)) ^ if b & 1 == 1 { te ^ a } else { 0 };
                j += 1;
                wg ^ we
            }
        };
        w.push(out);
    }
    debug_assert_eq!(w[ONE], 0);
    Ok(c.outputs().iter().map(|o| w[*o]).collect())
}

pub(crate) fn label_bytes(ls: &[Label]) -> Vec<u8> {
    ls.iter().flat_map(|l| l.to_le_bytes()).collect()
}

fn labels_from(bytes: &[u8], n: usize, from: PartyId) -> Result<Vec<Label>> {
    if bytes.len() != n * LABEL_BYTES {
        return Err(Error::Malformed { from, reason: format!("expected {n} labels") });
    }
    Ok(bytes.chunks(LABEL_BYTES).map(|c| u128::from_le_bytes(c.try_into().unwrap())).collect())
}

fn send_labels(p: &mut Party, to: PartyId, label: &str, ls: &[Label]) -> Result<()> {
    p.send_bytes(to, Kind::Payload, label, label_bytes(ls), KAPPA as u64 * ls.len() as u64)
}

fn recv_labels(p: &mut Party, from: PartyId, n: usize) -> Result<Vec<Label>> {
    let b = p.recv_bytes(from, Kind::Payload)?;
    labels_from(&b, n, from)
}

pub(crate) fn active(r: Label, k0: Label, bit: u64) -> Label {
    if bit & 1 == 1 {
        k0 ^ r
    } else {
        k0
    }
}

/// Zero-labels for `n` fresh wires, drawn from the garblers' common tape.
fn fresh_keys(p: &mut Party, n: usize) -> Vec<Label> {
    p.sample_u128(PartySet::E, "gkey", n)
}

/// Commitments to both keys of each wire, from P1 and P2 to P0. Position
/// k of a pair holds the key for bit k ⊕ perm. Returns P0's verified list.
fn commit_keys(p: &mut Party, k0: &[Label], nonces: &[Label], perm: &[u64]) -> Result<Vec<[Commitment; 2]>> {
    let n = k0.len();
    let me = p.id();
    match me {
        P1 | P2 => {
            let r = p.offset().expect("garbler");
            let mut body = Vec::with_capacity(2 * n * COMMITMENT_BYTES);
            for i in 0..n {
                for k in 0..2u64 {
                    let key = active(r, k0[i], k ^ perm[i]);
                    body.extend(commit(&key.to_le_bytes(), &nonces[2 * i + (k ^ perm[i]) as usize].to_le_bytes()));
                }
            }
            let bits = 8 * body.len() as u64;
            p.send_bytes(P0, Kind::Commitment, "gsh.commit", body, bits)?;
            Ok(Vec::new())
        }
        P0 => {
            let a = p.recv_bytes(P1, Kind::Commitment)?;
            let b = p.recv_bytes(P2, Kind::Commitment)?;
            if a != b || a.len() != 2 * n * COMMITMENT_BYTES {
                return Err(Error::abort("P0 received inconsistent key commitments"));
            }
            Ok(a.chunks(2 * COMMITMENT_BYTES)
                .map(|c| [c[..COMMITMENT_BYTES].try_into().unwrap(), c[COMMITMENT_BYTES..].try_into().unwrap()])
                .collect())
        }
        _ => Ok(Vec::new()),
    }
}

/// Offline half of committed sharing: keys, nonces, order bits, and P0's
/// copy of the commitments.
struct Committed {
    k0: Vec<Label>,
    nonces: Vec<Label>,
    comms: Vec<[Commitment; 2]>,
}

fn committed_keys(p: &mut Party, n: usize, permuted: bool) -> Result<(Committed, Vec<u64>)> {
    let k0 = fresh_keys(p, n);
    let nonces = p.sample_u128(PartySet::E, "gnonce", 2 * n);
    let perm = if permuted { p.sample(PartySet::E, "gperm", n, Ring::BOOL) } else { vec![0; n] };
    let comms = commit_keys(p, &k0, &nonces, &perm)?;
    Ok((Committed { k0, nonces, comms }, perm))
}

/// Online half: `sender` decommits the active key of each wire to P0,
/// which checks it against the commitment at `pos(i)` or, with `pos` of
/// `None`, against either one.
fn decommit(
    p: &mut Party,
    sender: PartyId,
    c: &Committed,
    vals: &[u64],
    known_bits: Option<&[u64]>,
    label: &str,
) -> Result<Vec<GShare>> {
    let n = c.k0.len();
    let me = p.id();
    if me == sender {
        let r = p.offset().expect("garbler");
        let keys: Vec<Label> = (0..n).map(|i| active(r, c.k0[i], vals[i])).collect();
        let nonces: Vec<u8> =
            (0..n).flat_map(|i| c.nonces[2 * i + (vals[i] & 1) as usize].to_le_bytes()).collect();
        send_labels(p, P0, label, &keys)?;
        p.send_bytes(P0, Kind::Commitment, "gsh.open", nonces, KAPPA as u64 * n as u64)?;
    }
    let out = if me == P0 {
        let keys = recv_labels(p, sender, n)?;
        let nonces = p.recv_bytes(sender, Kind::Commitment)?;
        let nonces = labels_from(&nonces, n, sender)?;
        for i in 0..n {
            let (kb, nb) = (keys[i].to_le_bytes(), nonces[i].to_le_bytes());
            let ok = match known_bits {
                Some(bits) => open(&c.comms[i][(bits[i] & 1) as usize], &kb, &nb),
                None => c.comms[i].iter().any(|cm| open(cm, &kb, &nb)),
            };
            if !ok {
                return Err(Error::abort(format!("P0 rejected the decommitment from {sender}")));
            }
        }
        keys.into_iter().map(GShare).collect()
    } else {
        c.k0.iter().map(|k| GShare(*k)).collect()
    };
    p.barrier();
    Ok(out)
}

/// Π_Sh^G: `owner` garbled-shares the bits `vals` (ignored elsewhere).
///
/// A garbler owner decommits the active key against commitments sent in
/// tape-permuted order. P0 splits v = v₁ ⊕ v₂, hands v₁ to P1 offline and
/// v₂ to P2 online, and the two garbled sharings are XORed.
pub fn g_share(p: &mut Party, owner: PartyId, vals: &[u64], n: usize) -> Result<Vec<GShare>> {
    if p.id() == owner && vals.len() != n {
        return Err(Error::InvalidArgument(format!("expected {n} bits, got {}", vals.len())));
    }
    let me = p.id();
    if owner != P0 {
        p.offline();
        let (c, _) = committed_keys(p, n, true)?;
        p.barrier();
        p.online();
        return decommit(p, owner, &c, vals, None, "gsh.key");
    }

    p.offline();
    let v1: Vec<u64> = if me == P0 { (0..n).map(|_| rand::Rng::gen::<bool>(p.private_rng()) as u64).collect() } else { Vec::new() };
    let v1 = split_to(p, P1, &v1, n)?;
    let (c1, _) = committed_keys(p, n, false)?;
    p.barrier();
    let s1 = decommit(p, P1, &c1, &v1, (me == P0).then_some(&v1[..]), "gsh.key")?;
    let (c2, _) = committed_keys(p, n, false)?;
    p.barrier();

    p.online();
    let v2: Vec<u64> = if me == P0 { (0..n).map(|i| vals[i] ^ v1[i]).collect() } else { Vec::new() };
    let v2 = split_to(p, P2, &v2, n)?;
    p.barrier();
    let s2 = decommit(p, P2, &c2, &v2, (me == P0).then_some(&v2[..]), "gsh.key")?;
    Ok(s1.iter().zip(&s2).map(|(a, b)| a.xor(*b)).collect())
}

/// P0 sends its bits to `to`; returns them at both ends and zeros elsewhere.
fn split_to(p: &mut Party, to: PartyId, bits: &[u64], n: usize) -> Result<Vec<u64>> {
    match p.id() {
        P0 => {
            p.send_ring(to, "gsh.split", bits, Ring::BOOL)?;
            Ok(bits.to_vec())
        }
        me if me == to => p.recv_ring(P0, n, Ring::BOOL),
        _ => Ok(vec![0; n]),
    }
}

/// Π_vSh^G: two parties that both know the bits `vals` garbled-share them.
///
/// Two garblers: one sends the active key, the other vouches with a
/// deferred hash. A garbler with P0: P1 and P2 commit to both keys in
/// order during the offline phase and the garbler decommits the active
/// one, which P0 checks at the position of the bit it knows.
pub fn g_vshare(p: &mut Party, i: PartyId, j: PartyId, vals: &[u64], n: usize) -> Result<Vec<GShare>> {
    g_vshare_in(p, i, j, vals, n, Phase::Online)
}

/// Π_vSh^G with the keys sent in `phase`.
pub fn g_vshare_in(p: &mut Party, i: PartyId, j: PartyId, vals: &[u64], n: usize, phase: Phase) -> Result<Vec<GShare>> {
    if i == j {
        return Err(Error::InvalidArgument("verifiable sharing needs two distinct parties".into()));
    }
    let me = p.id();
    if (me == i || me == j) && vals.len() != n {
        return Err(Error::InvalidArgument(format!("expected {n} bits, got {}", vals.len())));
    }
    if i != P0 && j != P0 {
        p.offline();
        let k0 = fresh_keys(p, n);
        p.set_phase(phase);
        let out = if me == P0 {
            let keys = recv_labels(p, i, n)?;
            p.expect_bytes(j, &label_bytes(&keys));
            keys.into_iter().map(GShare).collect()
        } else {
            if me == i || me == j {
                let r = p.offset().expect("garbler");
                let keys: Vec<Label> = (0..n).map(|k| active(r, k0[k], vals[k])).collect();
                if me == i {
                    send_labels(p, P0, "gvsh.key", &keys)?;
                } else {
                    p.defer_bytes(P0, &label_bytes(&keys));
                }
            }
            k0.into_iter().map(GShare).collect()
        };
        p.barrier();
        p.end_protocol()?;
        return Ok(out);
    }
    let g = if i == P0 { j } else { i };
    p.offline();
    let (c, _) = committed_keys(p, n, false)?;
    p.barrier();
    p.set_phase(phase);
    let known = if me == P0 { Some(vals) } else { None };
    let out = decommit(p, g, &c, vals, known, "gvsh.key")?;
    p.end_protocol()?;
    Ok(out)
}

/// Garbles `c` for every instance in `inputs` and ships the tables: P1
/// sends the ciphertexts to P0 and P2 vouches with a deferred hash. The
/// transfer is charged to the offline phase. P0 then evaluates.
pub fn eval_garbled(p: &mut Party, c: &GateCircuit, inputs: &[Vec<GShare>]) -> Result<Vec<Vec<GShare>>> {
    if inputs.iter().any(|i| i.len() != c.inputs()) {
        return Err(Error::InvalidArgument(format!("circuit takes {} inputs", c.inputs())));
    }
    let kdf = Sha256Kdf;
    let cid = p.next_circuit_id();
    let me = p.id();
    let phase = p.phase();
    p.offline();
    let ands = c.and_count();
    let mut out = Vec::with_capacity(inputs.len());
    match p.offset() {
        Some(r) => {
            let mut tables = GarbledTables::default();
            for (k, inp) in inputs.iter().enumerate() {
                let zero: Vec<Label> = inp.iter().map(|s| s.0).collect();
                let (rows, outs) = garble(&kdf, c, r, &zero, cid, k);
                tables.rows.extend(rows);
                out.push(outs.into_iter().map(GShare).collect());
            }
            if ands > 0 {
                let bytes = tables.ciphertexts();
                match me {
                    P1 => {
                        let bits = 8 * bytes.len() as u64;
                        p.send_bytes(P0, Kind::Payload, "gc.tables", bytes, bits)?;
                    }
                    P2 => p.defer_bytes(P0, &bytes),
                    _ => {}
                }
            }
        }
        None => {
            let mut tables = GarbledTables::default();
            if ands > 0 {
                let bytes = p.recv_bytes(P1, Kind::Payload)?;
                p.expect_bytes(P2, &bytes);
                tables = GarbledTables::from_ciphertexts(&bytes)
                    .filter(|t| t.rows.len() == ands * inputs.len())
                    .ok_or_else(|| Error::Malformed { from: P1, reason: "garbled table size".into() })?;
            }
            for (k, inp) in inputs.iter().enumerate() {
                let act: Vec<Label> = inp.iter().map(|s| s.0).collect();
                let rows = &tables.rows[k * ands..(k + 1) * ands];
                out.push(evaluate(&kdf, c, rows, &act, cid, k)?.into_iter().map(GShare).collect());
            }
        }
    }
    if ands > 0 {
        p.barrier();
    }
    p.set_phase(phase);
    Ok(out)
}

/// Reconstructs garbled-shared bits toward `targets`.
///
/// Toward P0, P1 sends the lsbs of its zero-labels and P2 vouches for them.
/// Toward a garbler, P0 sends the lsbs of its labels and vouches for the
/// labels themselves with a hash; the garbler recomputes the labels that
/// those bits imply, so a flipped bit cannot pass.
pub fn g_reconstruct_to(p: &mut Party, x: &[GShare], targets: PartySet) -> Result<Option<Vec<u64>>> {
    let n = x.len();
    let me = p.id();
    let b = Ring::BOOL;
    p.online();
    p.flush()?;
    let lsbs: Vec<u64> = x.iter().map(|s| s.lsb()).collect();
    let mut out = None;
    if targets.contains(P0) {
        match me {
            P1 => p.send_ring(P0, "grec.lsb", &lsbs, b)?,
            P2 => p.defer_ring(P0, &lsbs, b),
            P0 => {
                let z = p.recv_ring(P1, n, b)?;
                p.expect_ring(P2, &z, b);
                out = Some((0..n).map(|i| z[i] ^ lsbs[i]).collect());
            }
            _ => {}
        }
    }
    for t in PartyId::EVALUATORS.into_iter().filter(|t| targets.contains(*t)) {
        if me == P0 {
            p.send_ring(t, "grec.lsb", &lsbs, b)?;
            p.defer_bytes(t, &label_bytes(&x.iter().map(|s| s.0).collect::<Vec<_>>()));
        } else if me == t {
            let r = p.offset().expect("garbler");
            let z = p.recv_ring(P0, n, b)?;
            let bits: Vec<u64> = (0..n).map(|i| z[i] ^ lsbs[i]).collect();
            let implied: Vec<Label> = (0..n).map(|i| active(r, x[i].0, bits[i])).collect();
            p.expect_bytes(P0, &label_bytes(&implied));
            out = Some(bits);
        }
    }
    p.barrier();
    p.flush()?;
    Ok(out)
}

pub fn g_reconstruct(p: &mut Party, x: &[GShare]) -> Result<Vec<u64>> {
    Ok(g_reconstruct_to(p, x, PartySet::ALL)?.expect("all parties are targets"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_ppa_sub;

    #[test]
    fn half_gates_truth_table() {
        let kdf = Sha256Kdf;
        let mut b = GateCircuit::builder(2);
        let (x, y) = (b.input(0), b.input(1));
        let a = b.and(x, y);
        let o = b.xor(x, y);
        b.output(a);
        b.output(o);
        let c = b.finish();
        let r: Label = 0x1234_5678_9abc_def0_0fed_cba9_8765_4321 | 1;
        let k = [0xaaaa_u128 << 64 | 77, 0x5555_u128 << 70 | 12];
        let (rows, outs) = garble(&kdf, &c, r, &k, 1, 0);
        assert_eq!(rows.len(), 1);
        for u in 0..2u64 {
            for v in 0..2u64 {
                let act = [active(r, k[0], u), active(r, k[1], v)];
                let got = evaluate(&kdf, &c, &rows, &act, 1, 0).unwrap();
                assert_eq!(got[0], active(r, outs[0], u & v));
                assert_eq!(got[1], active(r, outs[1], u ^ v));
            }
        }
    }

    #[test]
    fn garbled_sub_matches_plaintext() {
        let kdf = Sha256Kdf;
        let c = build_ppa_sub(8).unwrap();
        let r: Label = (7u128 << 100) | 0xdead_beef | 1;
        let k0: Vec<Label> = (0..16u128).map(|i| i.wrapping_mul(0x9e37_79b9_7f4a_7c15_f39c_c060_5ced_c835)).collect();
        let (rows, outs) = garble(&kdf, &c, r, &k0, 3, 0);
        for (x, y) in [(13u64, 5u64), (5, 13), (0, 255), (128, 1)] {
            let bits: Vec<u64> = (0..8).map(|i| (x >> i) & 1).chain((0..8).map(|i| (y >> i) & 1)).collect();
            let act: Vec<Label> = (0..16).map(|i| active(r, k0[i], bits[i])).collect();
            let got = evaluate(&kdf, &c, &rows, &act, 3, 0).unwrap();
            let v = (0..8).fold(0, |acc, i| acc | ((((got[i] ^ outs[i]) & 1) as u64) << i));
            assert_eq!(v, x.wrapping_sub(y) & 0xff);
        }
    }

    #[test]
    fn table_bytes_round_trip() {
        let c = build_ppa_sub(4).unwrap();
        let t = GarbledTables { rows: vec![[1, 2], [3, 4]] };
        let (c2, t2) = GarbledTables::from_bytes(&t.to_bytes(&c)).unwrap();
        assert_eq!((c2, t2), (c, t));
    }
}
