//! Conversions between the arithmetic (A), boolean (B) and garbled (G)
//! worlds.
//!
//! A boolean value of ℓ bits is a vector of ℓ bit sharings, least
//! significant first. Arithmetic and boolean sharings are both [`Masked`];
//! the ring says which world a sharing lives in.

use crate::arith::exchange_missing;
use crate::circuit::{build_ppa_sub, build_rca_sub};
use crate::ctx::Party;
use crate::error::{Error, Result};
use crate::garbled::{active, eval_garbled, g_vshare, g_vshare_in, label_bytes, GShare};
use crate::net::Phase;
use crate::party::{PartyId, PartySet, P0, P1, P2, P3};
use crate::ring::Ring;
use crate::sharing::{aux_share, vshare_many, vshare_many_in, Masked, Rep, VJob};

const B: Ring = Ring::BOOL;

/// Little-endian bits of `v`.
pub fn bits_of(v: u64, bits: u32) -> Vec<u64> {
    (0..bits).map(|i| (v >> i) & 1).collect()
}

pub fn from_bit_vec(bits: &[u64]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, b)| acc | ((b & 1) << i))
}

fn flatten_bits(vals: &[u64], bits: u32) -> Vec<u64> {
    vals.iter().flat_map(|v| bits_of(*v, bits)).collect()
}

fn check_width(x: &[Vec<Masked>], bits: u32) -> Result<()> {
    if x.iter().any(|v| v.len() != bits as usize) {
        return Err(Error::InvalidArgument(format!("boolean values must have {bits} bits")));
    }
    Ok(())
}

/// Splits ⟦v⟧ into v = x − y with x = m − λ₁ (known to P2, P3) and
/// y = λ₂ + λ₃ (known to P1, P0).
fn split_xy(ring: Ring, me: PartyId, s: &Masked) -> (u64, u64) {
    let x = if matches!(me, P2 | P3) { ring.sub(s.m, s.lam[0]) } else { 0 };
    let y = if matches!(me, P0 | P1) { ring.add(s.lam[1], s.lam[2]) } else { 0 };
    (x, y)
}

/// Bits of y at P1 and P0, zeros elsewhere; bits of x at P2 and P3.
fn split_bits(ring: Ring, me: PartyId, x: &[Masked]) -> (Vec<u64>, Vec<u64>) {
    let (xs, ys): (Vec<u64>, Vec<u64>) = x.iter().map(|s| split_xy(ring, me, s)).unzip();
    (flatten_bits(&xs, ring.bits()), flatten_bits(&ys, ring.bits()))
}

fn regroup<T: Copy>(flat: &[T], width: usize) -> Vec<Vec<T>> {
    flat.chunks(width).map(<[T]>::to_vec).collect()
}

/// Π_BG: ⟦v⟧^B → ⟦v⟧^G for bits, as ⟦m ⊕ λ₁⟧^G ⊕ ⟦λ₂ ⊕ λ₃⟧^G.
pub fn b2g(p: &mut Party, x: &[Masked]) -> Result<Vec<GShare>> {
    let n = x.len();
    let me = p.id();
    let xb: Vec<u64> = x.iter().map(|s| if matches!(me, P2 | P3) { s.m ^ s.lam[0] } else { 0 }).collect();
    let yb: Vec<u64> = x.iter().map(|s| if matches!(me, P0 | P1) { s.lam[1] ^ s.lam[2] } else { 0 }).collect();
    let gy = g_vshare_in(p, P1, P0, &yb, n, Phase::Offline)?;
    let gx = g_vshare(p, P2, P3, &xb, n)?;
    Ok(gx.iter().zip(&gy).map(|(a, b)| a.xor(*b)).collect())
}

/// Π_AG: ⟦v⟧^A → ⟦v⟧^G through a garbled subtractor on x − y.
pub fn a2g(p: &mut Party, ring: Ring, x: &[Masked]) -> Result<Vec<Vec<GShare>>> {
    let l = ring.bits();
    let n = x.len() * l as usize;
    let me = p.id();
    let (xb, yb) = split_bits(ring, me, x);
    let gy = g_vshare_in(p, P1, P0, &yb, n, Phase::Offline)?;
    let gx = g_vshare(p, P2, P3, &xb, n)?;
    let sub = build_rca_sub(l)?;
    let inputs: Vec<Vec<GShare>> = regroup(&gx, l as usize)
        .into_iter()
        .zip(regroup(&gy, l as usize))
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect();
    eval_garbled(p, &sub, &inputs)
}

/// Π_AB: ⟦v⟧^A → ⟦v⟧^B by evaluating the parallel-prefix subtractor on
/// boolean sharings of x and y.
pub fn a2b(p: &mut Party, ring: Ring, x: &[Masked]) -> Result<Vec<Vec<Masked>>> {
    let l = ring.bits();
    let n = x.len() * l as usize;
    let me = p.id();
    let (xb, yb) = split_bits(ring, me, x);
    let sy = vshare_many_in(p, B, &[VJob::new(P1, P0, yb, n)], "a2b.y", Phase::Offline)?.remove(0);
    let sx = vshare_many(p, B, &[VJob::new(P2, P3, xb, n)], "a2b.x")?.remove(0);
    let sub = build_ppa_sub(l)?;
    let inputs: Vec<Vec<Masked>> = regroup(&sx, l as usize)
        .into_iter()
        .zip(regroup(&sy, l as usize))
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect();
    sub.eval_shared(p, &inputs)
}

/// Decoding information for garbled outputs: P1 sends the lsbs of the
/// zero-labels to P0 in the offline phase and P2 vouches for them. Returns
/// the decoded bits at P0.
fn decode_at_p0(p: &mut Party, w: &[GShare], label: &str) -> Result<Vec<u64>> {
    let n = w.len();
    let lsbs: Vec<u64> = w.iter().map(|s| s.lsb()).collect();
    let phase = p.phase();
    p.offline();
    let out = match p.id() {
        P1 => {
            p.send_ring(P0, label, &lsbs, B)?;
            Vec::new()
        }
        P2 => {
            p.defer_ring(P0, &lsbs, B);
            Vec::new()
        }
        P0 => {
            let d = p.recv_ring(P1, n, B)?;
            p.expect_ring(P2, &d, B);
            (0..n).map(|i| d[i] ^ lsbs[i]).collect()
        }
        _ => Vec::new(),
    };
    p.barrier();
    p.set_phase(phase);
    Ok(out)
}

/// P0 tells P3 a decoded value and vouches for the active labels behind
/// it; P3 recomputes the labels the value implies. Runs in the current
/// round without a barrier. Returns the value at P0 and P3.
fn reveal_to_p3(p: &mut Party, ring: Ring, w: &[GShare], vals: &[u64], n: usize, label: &str) -> Result<Vec<u64>> {
    match p.id() {
        P0 => {
            p.send_ring(P3, label, vals, ring)?;
            p.defer_bytes(P3, &label_bytes(&w.iter().map(|s| s.0).collect::<Vec<_>>()));
            Ok(vals.to_vec())
        }
        P3 => {
            let r = p.offset().expect("garbler");
            let v = p.recv_ring(P0, n, ring)?;
            let bits = flatten_bits(&v, ring.bits());
            let implied: Vec<u128> = w.iter().zip(&bits).map(|(s, b)| active(r, s.0, *b)).collect();
            p.expect_bytes(P0, &label_bytes(&implied));
            Ok(v)
        }
        _ => Ok(vec![0; n]),
    }
}

/// Π_GB: ⟦v⟧^G → ⟦v⟧^B for bits, via P0 learning v ⊕ r for an r known to
/// P1 and P2.
pub fn g2b(p: &mut Party, x: &[GShare]) -> Result<Vec<Masked>> {
    let n = x.len();
    p.offline();
    let r = p.sample(PartySet::of(&[P1, P2]), "g2b.r", n, B);
    let (rg, rb) = p.parallel(
        |p| g_vshare_in(p, P1, P2, &r, n, Phase::Offline),
        |p| Ok(vshare_many_in(p, B, &[VJob::new(P1, P2, r.clone(), n)], "g2b.r", Phase::Offline)?.remove(0)),
    )?;
    let w: Vec<GShare> = x.iter().zip(&rg).map(|(a, b)| a.xor(*b)).collect();
    let vr = decode_at_p0(p, &w, "g2b.decode")?;

    p.online();
    let vr = reveal_to_p3(p, B, &w, &vr, n, "g2b.vr")?;
    let s = vshare_many(p, B, &[VJob::new(P0, P3, vr, n)], "g2b.vsh")?.remove(0);
    p.end_protocol()?;
    Ok(s.iter().zip(&rb).map(|(a, b)| a.add(B, *b)).collect())
}

/// Π_GA: ⟦v⟧^G (ℓ bits per value) → ⟦v⟧^A, via P0 learning v − r through a
/// garbled subtractor.
pub fn g2a(p: &mut Party, ring: Ring, x: &[Vec<GShare>]) -> Result<Vec<Masked>> {
    let l = ring.bits();
    let n = x.len();
    if x.iter().any(|v| v.len() != l as usize) {
        return Err(Error::InvalidArgument(format!("garbled values must have {l} bits")));
    }
    p.offline();
    let r = p.sample(PartySet::of(&[P1, P2]), "g2a.r", n, ring);
    let rbits = flatten_bits(&r, l);
    let (rg, ra) = p.parallel(
        |p| g_vshare_in(p, P1, P2, &rbits, n * l as usize, Phase::Offline),
        |p| Ok(vshare_many_in(p, ring, &[VJob::new(P1, P2, r.clone(), n)], "g2a.r", Phase::Offline)?.remove(0)),
    )?;
    let sub = build_rca_sub(l)?;
    let inputs: Vec<Vec<GShare>> = x
        .iter()
        .zip(regroup(&rg, l as usize))
        .map(|(a, b)| {
            let mut v = a.clone();
            v.extend(b);
            v
        })
        .collect();
    let w: Vec<GShare> = eval_garbled(p, &sub, &inputs)?.concat();
    let d = decode_at_p0(p, &w, "g2a.decode")?;
    let vr: Vec<u64> = if p.is(P0) { regroup(&d, l as usize).iter().map(|b| from_bit_vec(b)).collect() } else { vec![0; n] };

    p.online();
    let vr = reveal_to_p3(p, ring, &w, &vr, n, "g2a.vr")?;
    let s = vshare_many(p, ring, &[VJob::new(P0, P3, vr, n)], "g2a.vsh")?.remove(0);
    p.end_protocol()?;
    Ok(s.iter().zip(&ra).map(|(a, b)| a.add(ring, *b)).collect())
}

/// P0's ⟨·⟩-sharing of the lifted masks λ_b of boolean sharings.
fn share_lifted_masks(p: &mut Party, ring: Ring, b: &[Masked], label: &str) -> Result<Vec<Rep>> {
    let vals: Vec<u64> = if p.is(P0) { b.iter().map(|s| ring.lift(s.lam_sum(B))).collect() } else { Vec::new() };
    aux_share(p, ring, &vals, b.len(), label)
}

/// Checks that ⟨u⟩ holds the lift of λ_b without revealing either: P1 and
/// P2 blind u ⊕ r_b with a common r, P1 sends its part to P3 along with
/// λ_{b,3} ⊕ r_b, and P2 vouches for the rest.
fn check_lifted_masks(p: &mut Party, ring: Ring, b: &[Masked], u: &[Rep]) -> Result<()> {
    let n = b.len();
    let pair = PartySet::of(&[P1, P2]);
    let r = p.sample(pair, "lift.r", n, ring);
    let rb = p.sample(pair, "lift.rb", n, B);
    // u(1 − 2r_b) + r_b = u ⊕ r_b on bits.
    let flip = |v: u64, rb: u64| if rb == 1 { ring.neg(v) } else { v };
    match p.id() {
        P1 => {
            let x1: Vec<u64> = (0..n).map(|i| b[i].lam[2] ^ rb[i]).collect();
            let y1: Vec<u64> = (0..n)
                .map(|i| ring.add(ring.add(flip(ring.add(u[i].0[1], u[i].0[2]), rb[i]), rb[i]), r[i]))
                .collect();
            p.send_ring(P3, "lift.x", &x1, B)?;
            p.send_ring(P3, "lift.y", &y1, ring)?;
        }
        P2 => {
            let y2: Vec<u64> = (0..n).map(|i| ring.sub(flip(u[i].0[0], rb[i]), r[i])).collect();
            p.defer_ring(P3, &y2, ring);
        }
        P3 => {
            let x1 = p.recv_ring(P1, n, B)?;
            let y1 = p.recv_ring(P1, n, ring)?;
            let want: Vec<u64> = (0..n)
                .map(|i| ring.sub(ring.lift(x1[i] ^ b[i].lam[0] ^ b[i].lam[1]), y1[i]))
                .collect();
            p.expect_ring(P2, &want, ring);
        }
        P0 => {}
    }
    p.barrier();
    Ok(())
}

/// Π_Bit2A: boolean bits → arithmetic sharings of the same bits.
///
/// With u the lift of λ_b and v the lift of m_b, b = v + u − 2uv. ⟦u⟧ comes
/// from P0's checked ⟨u⟩ and ⟦v⟧ is a joint sharing, so uv needs only the
/// online half of a multiplication.
pub fn bit2a(p: &mut Party, ring: Ring, b: &[Masked]) -> Result<Vec<Masked>> {
    let n = b.len();
    let me = p.id();
    p.offline();
    let u = share_lifted_masks(p, ring, b, "bit2a.ash")?;
    check_lifted_masks(p, ring, b, &u)?;
    let lz: [Vec<u64>; 3] = PartyId::EVALUATORS.map(|j| p.sample(PartySet::without(j), "lambda", n, ring));

    p.online();
    let mv: Vec<u64> = b.iter().map(|s| ring.lift(s.m)).collect();
    let mut pieces = [vec![0; n], vec![0; n], vec![0; n]];
    for (k, piece) in pieces.iter_mut().enumerate() {
        if me != P0 && k == me.slot() {
            continue;
        }
        for i in 0..n {
            // −λ_{u,k}·m_v with λ_u = −⟨u⟩.
            piece[i] = ring.add(ring.mul(u[i].0[k], mv[i]), lz[k][i]);
        }
    }
    let muv = exchange_missing(p, ring, pieces, "bit2a.mprime")?;
    p.barrier();
    let out = (0..n)
        .map(|i| {
            let v = Masked::joint(ring, me, mv[i]);
            let uu = Masked::from_rep(ring, u[i]);
            let uv = Masked { m: muv[i], lam: [lz[0][i], lz[1][i], lz[2][i]] }.normalize(me);
            v.add(ring, uu).sub(ring, uv.scale(ring, 2))
        })
        .collect();
    p.end_protocol()?;
    Ok(out)
}

/// Sums three verifiable sharings of per-slot components: slot 1 by
/// (P1, P3), slot 2 by (P2, P1), slot 0 by (P3, P2), all in one round.
fn share_components(p: &mut Party, ring: Ring, comps: [Vec<u64>; 3], n: usize, label: &str) -> Result<Vec<Masked>> {
    let me = p.id();
    let pick = |k: usize, a: PartyId, b: PartyId| if me == a || me == b { comps[k].clone() } else { Vec::new() };
    let jobs = [
        VJob::new(P1, P3, pick(1, P1, P3), n),
        VJob::new(P2, P1, pick(2, P2, P1), n),
        VJob::new(P3, P2, pick(0, P3, P2), n),
    ];
    let s = vshare_many(p, ring, &jobs, label)?;
    Ok((0..n).map(|i| s[0][i].add(ring, s[1][i]).add(ring, s[2][i])).collect())
}

/// Π_B2A: ℓ-bit boolean values → arithmetic, in one online round.
///
/// v = Σ 2^i (q_i + p_i − 2 q_i p_i) with q_i = m_i and p_i = λ_i lifted; the
/// expression is linear in the components of ⟨p_i⟩, so each evaluator pair
/// computes one component and shares it verifiably.
pub fn b2a(p: &mut Party, ring: Ring, x: &[Vec<Masked>]) -> Result<Vec<Masked>> {
    let l = ring.bits();
    check_width(x, l)?;
    let n = x.len();
    let flat: Vec<Masked> = x.concat();
    p.offline();
    let u = share_lifted_masks(p, ring, &flat, "b2a.ash")?;
    check_lifted_masks(p, ring, &flat, &u)?;

    p.online();
    let mut comps = [vec![0; n], vec![0; n], vec![0; n]];
    for (j, val) in x.iter().enumerate() {
        for (i, bit) in val.iter().enumerate() {
            let w = 1u64 << i;
            let q = ring.lift(bit.m);
            let f = ring.sub(1, ring.mul(2, q));
            let pu = &u[j * l as usize + i];
            for k in 0..3 {
                let mut t = ring.mul(pu.0[k], f);
                if k == 1 {
                    t = ring.add(t, q);
                }
                comps[k][j] = ring.add(comps[k][j], ring.mul(w, t));
            }
        }
    }
    let out = share_components(p, ring, comps, n, "b2a.vsh")?;
    p.end_protocol()?;
    Ok(out)
}

/// Checks ⟨y₂⟩ = ⟨y₁⟩·λ_v: P1, P2 and P3 each compute one blinded share of
/// y₁λ_v − y₂; P1 sends its share to P3 and P2 vouches for the negation of
/// its own.
fn check_product(p: &mut Party, ring: Ring, v: &[Masked], y1: &[Rep], y2: &[Rep]) -> Result<()> {
    let n = v.len();
    let zero = p.zero_share("bitinj.zero", n, ring);
    let me = p.id();
    let term = |i: usize, k: usize, blind: &[u64]| {
        let nk = (k + 1) % 3;
        let (a, l) = (y1[i].0, v[i].lam);
        let t = ring.add(ring.add(ring.mul(a[k], l[k]), ring.mul(a[k], l[nk])), ring.mul(a[nk], l[k]));
        ring.sub(ring.add(t, blind[i]), y2[i].0[k])
    };
    match me {
        P1 => {
            let a = zero.a.as_deref().expect("P1 knows A");
            let z2: Vec<u64> = (0..n).map(|i| term(i, 1, a)).collect();
            p.send_ring(P3, "bitinj.z", &z2, ring)?;
        }
        P2 => {
            let bz = zero.b.as_deref().expect("P2 knows B");
            let z3: Vec<u64> = (0..n).map(|i| ring.neg(term(i, 2, bz))).collect();
            p.defer_ring(P3, &z3, ring);
        }
        P3 => {
            let g = zero.gamma.as_deref().expect("P3 knows Γ");
            let z2 = p.recv_ring(P1, n, ring)?;
            let want: Vec<u64> = (0..n).map(|i| ring.add(term(i, 0, g), z2[i])).collect();
            p.expect_ring(P2, &want, ring);
        }
        P0 => {}
    }
    p.barrier();
    Ok(())
}

/// Π_BitInj: ⟦b⟧^B, ⟦v⟧^A → ⟦b·v⟧^A.
///
/// With y₁ = λ_b lifted and y₂ = y₁·λ_v from P0 (both checked offline),
/// b·v = x₀ − x₁λ_v + x₂y₁ + x₃y₂ for public x₀ = m_b m_v, x₁ = m_b,
/// x₂ = m_v − 2m_v m_b and x₃ = 2m_b − 1.
pub fn bit_inject(p: &mut Party, ring: Ring, b: &[Masked], v: &[Masked]) -> Result<Vec<Masked>> {
    if b.len() != v.len() {
        return Err(Error::InvalidArgument("bit and value batches differ in length".into()));
    }
    let n = b.len();
    p.offline();
    let y2_vals: Vec<u64> = if p.is(P0) {
        b.iter().zip(v).map(|(bb, vv)| ring.mul(ring.lift(bb.lam_sum(B)), vv.lam_sum(ring))).collect()
    } else {
        Vec::new()
    };
    let (y1, y2) = p.parallel(
        |p| share_lifted_masks(p, ring, b, "bitinj.ash1"),
        |p| aux_share(p, ring, &y2_vals, n, "bitinj.ash2"),
    )?;
    p.parallel(|p| check_lifted_masks(p, ring, b, &y1), |p| check_product(p, ring, v, &y1, &y2))?;

    p.online();
    let mut comps = [vec![0; n], vec![0; n], vec![0; n]];
    for i in 0..n {
        let mb = ring.lift(b[i].m);
        let mv = v[i].m;
        let x0 = ring.mul(mb, mv);
        let x2 = ring.sub(mv, ring.mul(2, x0));
        let x3 = ring.sub(ring.mul(2, mb), 1);
        for (k, c) in comps.iter_mut().enumerate() {
            let mut t = ring.sub(ring.add(ring.mul(x2, y1[i].0[k]), ring.mul(x3, y2[i].0[k])), ring.mul(mb, v[i].lam[k]));
            if k == 1 {
                t = ring.add(t, x0);
            }
            c[i] = t;
        }
    }
    let out = share_components(p, ring, comps, n, "bitinj.vsh")?;
    p.end_protocol()?;
    Ok(out)
}
