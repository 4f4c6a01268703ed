//! Multiplication, dot product and truncating multiplication over ⟦·⟧.
//!
//! All three share one message pattern: the offline phase turns λ_x·λ_y into
//! ⟨γ⟩ (each evaluator computes one component, blinded by a zero sharing,
//! and passes it on with P0 vouching), and the online phase has each
//! evaluator pair compute one additive piece of the new masked value and
//! hand it to the evaluator that lacks it.

use crate::ctx::Party;
use crate::error::{Error, Result};
use crate::party::{PartyId, PartySet, P0, P1, P2};
use crate::ring::Ring;
use crate::sharing::{aux_share, Masked, Rep};

const fn next_slot(k: usize) -> usize {
    (k + 1) % 3
}

/// λx_k·λy_k + λx_k·λy_{k+1} + λx_{k+1}·λy_k: the cross terms assigned to
/// component k of γ.
fn cross(ring: Ring, x: &Masked, y: &Masked, k: usize) -> u64 {
    let n = next_slot(k);
    let t = ring.add(ring.mul(x.lam[k], y.lam[k]), ring.mul(x.lam[k], y.lam[n]));
    ring.add(t, ring.mul(x.lam[n], y.lam[k]))
}

/// The γ components this party can compute for each output: all three at
/// P0, component me.next() at evaluator me. Zero elsewhere.
fn gamma_components(p: &mut Party, ring: Ring, xs: &[Vec<Masked>], ys: &[Vec<Masked>]) -> [Vec<u64>; 3] {
    let n = xs.len();
    let zero = p.zero_share("gamma", n, ring);
    let me = p.id();
    let slots: Vec<usize> = match me {
        P0 => vec![0, 1, 2],
        e => vec![e.next().slot()],
    };
    let mut out = [vec![0; n], vec![0; n], vec![0; n]];
    for &k in &slots {
        // Slot 1 (γ₂) takes A, slot 2 (γ₃) takes B, slot 0 (γ₁) takes Γ.
        let blind = match k {
            1 => zero.a.as_ref(),
            2 => zero.b.as_ref(),
            _ => zero.gamma.as_ref(),
        }
        .expect("holder of a γ component knows its zero term");
        for i in 0..n {
            let s = xs[i].iter().zip(&ys[i]).fold(0, |acc, (x, y)| ring.add(acc, cross(ring, x, y, k)));
            out[k][i] = ring.add(s, blind[i]);
        }
    }
    out
}

/// Turns per-party γ components into ⟨γ⟩: each evaluator forwards its
/// component to its predecessor, P0 vouches for every forwarded value.
pub(crate) fn reshare(p: &mut Party, ring: Ring, comps: [Vec<u64>; 3], label: &str) -> Result<Vec<Rep>> {
    let n = comps[0].len();
    let me = p.id();
    let mut comps = comps;
    match me {
        P0 => {
            for t in PartyId::EVALUATORS {
                p.defer_ring(t, &comps[t.prev().slot()], ring);
            }
        }
        e => {
            let own = e.next().slot();
            p.send_ring(e.prev(), label, &comps[own], ring)?;
            let got = p.recv_ring(e.next(), n, ring)?;
            p.expect_ring(P0, &got, ring);
            comps[e.prev().slot()] = got;
        }
    }
    p.barrier();
    Ok((0..n).map(|i| Rep([comps[0][i], comps[1][i], comps[2][i]])).collect())
}

/// Online exchange of an additive value held as three components, where
/// component k is known to every evaluator except P_k. Each evaluator gets
/// its missing component from its successor and a deferred hash of it from
/// its predecessor. Returns the sum at evaluators and zeros at P0.
pub(crate) fn exchange_missing(p: &mut Party, ring: Ring, comps: [Vec<u64>; 3], label: &str) -> Result<Vec<u64>> {
    let n = comps[0].len();
    let me = p.id();
    if me == P0 {
        return Ok(vec![0; n]);
    }
    let mut comps = comps;
    p.send_ring(me.prev(), label, &comps[me.prev().slot()], ring)?;
    p.defer_ring(me.next(), &comps[me.next().slot()], ring);
    let got = p.recv_ring(me.next(), n, ring)?;
    p.expect_ring(me.prev(), &got, ring);
    comps[me.slot()] = got;
    Ok((0..n).map(|i| ring.add(ring.add(comps[0][i], comps[1][i]), comps[2][i])).collect())
}

/// Component k of −Σ(λx_k·m_y + λy_k·m_x) for one output.
fn online_piece(ring: Ring, xs: &[Masked], ys: &[Masked], k: usize) -> u64 {
    xs.iter().zip(ys).fold(0, |acc, (x, y)| {
        let t = ring.add(ring.mul(x.lam[k], y.m), ring.mul(y.lam[k], x.m));
        ring.sub(acc, t)
    })
}

fn public_product(ring: Ring, xs: &[Masked], ys: &[Masked]) -> u64 {
    xs.iter().zip(ys).fold(0, |acc, (x, y)| ring.add(acc, ring.mul(x.m, y.m)))
}

fn check_shapes(xs: &[Vec<Masked>], ys: &[Vec<Masked>]) -> Result<()> {
    if xs.len() != ys.len() || xs.iter().zip(ys).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::InvalidArgument("dot product operands differ in shape".into()));
    }
    Ok(())
}

fn held_slots(me: PartyId) -> impl Iterator<Item = usize> {
    (0..3).filter(move |k| me == P0 || *k != me.slot())
}

/// Π_DotP over a batch: output i is Σ_j xs[i][j]·ys[i][j]. Communication
/// is that of a single multiplication per output, whatever the length.
pub fn dot_product(p: &mut Party, ring: Ring, xs: &[Vec<Masked>], ys: &[Vec<Masked>]) -> Result<Vec<Masked>> {
    dot_product_labeled(p, ring, xs, ys, "mult")
}

pub(crate) fn dot_product_labeled(
    p: &mut Party,
    ring: Ring,
    xs: &[Vec<Masked>],
    ys: &[Vec<Masked>],
    label: &str,
) -> Result<Vec<Masked>> {
    check_shapes(xs, ys)?;
    let n = xs.len();
    let me = p.id();
    let (gl, ml) = labels(label);

    p.offline();
    let lz: [Vec<u64>; 3] = PartyId::EVALUATORS.map(|j| p.sample(PartySet::without(j), "lambda", n, ring));
    let comps = gamma_components(p, ring, xs, ys);
    let gamma = reshare(p, ring, comps, &gl)?;

    p.online();
    let mut pieces = [vec![0; n], vec![0; n], vec![0; n]];
    for k in held_slots(me) {
        for i in 0..n {
            let v = ring.add(online_piece(ring, &xs[i], &ys[i], k), gamma[i].0[k]);
            pieces[k][i] = ring.add(v, lz[k][i]);
        }
    }
    let sum = exchange_missing(p, ring, pieces, &ml)?;
    p.barrier();
    let out = (0..n)
        .map(|i| {
            let m = ring.add(sum[i], public_product(ring, &xs[i], &ys[i]));
            Masked { m, lam: [lz[0][i], lz[1][i], lz[2][i]] }.normalize(me)
        })
        .collect();
    p.end_protocol()?;
    Ok(out)
}

fn labels(prefix: &str) -> (String, String) {
    (format!("{prefix}.gamma"), format!("{prefix}.mprime"))
}

/// Π_Mult, elementwise over a batch.
pub fn mult(p: &mut Party, ring: Ring, x: &[Masked], y: &[Masked]) -> Result<Vec<Masked>> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("operands differ in length".into()));
    }
    let xs: Vec<Vec<Masked>> = x.iter().map(|v| vec![*v]).collect();
    let ys: Vec<Vec<Masked>> = y.iter().map(|v| vec![*v]).collect();
    dot_product_labeled(p, ring, &xs, &ys, "mult")
}

/// Clears bits shift−2 and shift−1 of a mask component, so the three
/// components' low parts sum without carrying into bit `shift`.
fn restrict_low(v: u64, shift: u32) -> u64 {
    let low = (1u64 << shift) - 1;
    let keep = (1u64 << (shift - 2)) - 1;
    (v & !low) | (v & keep)
}

/// Truncating dot product: output i ≈ (Σ_j xs[i][j]·ys[i][j]) / 2^shift on
/// signed fixed-point values.
///
/// The result is ⌊a⌋ + ⌊b⌋ + 1 for a + b equal to the exact quotient, so it
/// lands within one unit in the last place of the exact value.
pub fn dot_product_trunc(
    p: &mut Party,
    ring: Ring,
    xs: &[Vec<Masked>],
    ys: &[Vec<Masked>],
    shift: u32,
) -> Result<Vec<Masked>> {
    check_shapes(xs, ys)?;
    if shift < 2 || shift >= ring.bits() {
        return Err(Error::InvalidArgument(format!("truncation shift {shift} for a {}-bit ring", ring.bits())));
    }
    let n = xs.len();
    let me = p.id();

    p.offline();
    let r: [Vec<u64>; 3] = PartyId::EVALUATORS.map(|j| {
        p.sample(PartySet::without(j), "trunc.r", n, ring).into_iter().map(|v| restrict_low(v, shift)).collect()
    });
    let comps = gamma_components(p, ring, xs, ys);
    let rt: Vec<u64> = if me == P0 {
        (0..n).map(|i| ring.sar(ring.add(ring.add(r[0][i], r[1][i]), r[2][i]), shift)).collect()
    } else {
        Vec::new()
    };
    let (gamma, rt_rep) =
        p.parallel(|p| reshare(p, ring, comps, "trunc.gamma"), |p| aux_share(p, ring, &rt, n, "trunc.ash"))?;
    truncation_check(p, ring, &r, &rt_rep, shift)?;

    p.online();
    let mut pieces = [vec![0; n], vec![0; n], vec![0; n]];
    for k in held_slots(me) {
        for i in 0..n {
            let v = ring.add(online_piece(ring, &xs[i], &ys[i], k), gamma[i].0[k]);
            pieces[k][i] = ring.sub(v, r[k][i]);
        }
    }
    let sum = exchange_missing(p, ring, pieces, "trunc.mprime")?;
    p.barrier();
    let out = (0..n)
        .map(|i| {
            let zr_t = if me == P0 { 0 } else { ring.sar(ring.add(sum[i], public_product(ring, &xs[i], &ys[i])), shift) };
            let masked = Masked::joint(ring, me, zr_t).add(ring, Masked::from_rep(ring, rt_rep[i]));
            masked.add_const(ring, me, 1)
        })
        .collect();
    p.end_protocol()?;
    Ok(out)
}

/// P1 blinds its view of r − 2^s·r^t − r_d with a private c and sends it to
/// P2, vouching for c through the digest queue; P2 adds its own view and
/// expects the sum to equal c.
fn truncation_check(p: &mut Party, ring: Ring, r: &[Vec<u64>; 3], rt: &[Rep], shift: u32) -> Result<()> {
    let n = rt.len();
    let me = p.id();
    let low = (1u64 << shift) - 1;
    let term = |k: usize, i: usize| {
        let t = ring.sub(r[k][i], ring.mul(rt[i].0[k], 1u64 << shift));
        ring.sub(t, r[k][i] & low)
    };
    match me {
        P1 => {
            let c: Vec<u64> = (0..n).map(|_| ring.reduce(rand::Rng::gen(p.private_rng()))).collect();
            let m1: Vec<u64> = (0..n).map(|i| ring.add(term(1, i), c[i])).collect();
            p.send_ring(P2, "trunc.check", &m1, ring)?;
            p.defer_ring(P2, &c, ring);
        }
        P2 => {
            let m1 = p.recv_ring(P1, n, ring)?;
            let sum: Vec<u64> = (0..n).map(|i| ring.add(m1[i], ring.add(term(0, i), term(2, i)))).collect();
            p.expect_ring(P1, &sum, ring);
        }
        _ => {}
    }
    p.barrier();
    Ok(())
}

/// Π_MultTr, elementwise: x·y / 2^shift.
pub fn mult_trunc(p: &mut Party, ring: Ring, x: &[Masked], y: &[Masked], shift: u32) -> Result<Vec<Masked>> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("operands differ in length".into()));
    }
    let xs: Vec<Vec<Masked>> = x.iter().map(|v| vec![*v]).collect();
    let ys: Vec<Vec<Masked>> = y.iter().map(|v| vec![*v]).collect();
    dot_product_trunc(p, ring, &xs, &ys, shift)
}
