//! Shared-key setup and PRF tapes for non-interactive common sampling.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::party::{PartyId, PartySet, P0, P1, P2, P3};
use crate::ring::Ring;

pub const KAPPA: usize = 128;

pub type Key = [u8; 16];

/// Every subset of parties with at least two members that gets a key:
/// six pairs, four triples and the global key.
pub fn key_sets() -> Vec<PartySet> {
    (0u8..16).map(PartySet).filter(|s| s.len() >= 2).collect()
}

/// The keys held by one party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyBundle {
    owner: PartyId,
    keys: BTreeMap<PartySet, Key>,
}

impl KeyBundle {
    pub fn owner(&self) -> PartyId {
        self.owner
    }

    pub fn key(&self, set: PartySet) -> Result<&Key> {
        self.keys.get(&set).ok_or_else(|| Error::NoKey(set.to_string()))
    }

    pub fn has(&self, set: PartySet) -> bool {
        self.keys.contains_key(&set)
    }

    pub fn sets(&self) -> impl Iterator<Item = PartySet> + '_ {
        self.keys.keys().copied()
    }
}

/// Dealer routine standing in for the setup functionality: derives every
/// set key from the master seed and hands each party the keys of the sets
/// it belongs to.
pub fn setup(master_seed: &[u8]) -> [KeyBundle; 4] {
    let mut all = BTreeMap::new();
    for set in key_sets() {
        let mut h = Sha256::new();
        h.update(b"trident/setup");
        h.update((master_seed.len() as u64).to_le_bytes());
        h.update(master_seed);
        h.update([set.0]);
        let d = h.finalize();
        let mut k = [0u8; 16];
        k.copy_from_slice(&d[..16]);
        all.insert(set, k);
    }
    PartyId::ALL.map(|p| KeyBundle {
        owner: p,
        keys: all.iter().filter(|(s, _)| s.contains(p)).map(|(s, k)| (*s, *k)).collect(),
    })
}

/// Domain separation for one sampling call: a protocol label plus a
/// monotone draw counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tag<'a> {
    pub domain: &'a str,
    pub counter: u64,
}

impl Tag<'_> {
    fn absorb(&self, h: &mut Sha256) {
        h.update((self.domain.len() as u32).to_le_bytes());
        h.update(self.domain.as_bytes());
        h.update(self.counter.to_le_bytes());
    }
}

fn stream(key: &Key, tag: Tag<'_>) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(key);
    tag.absorb(&mut h);
    ChaCha12Rng::from_seed(h.finalize().into())
}

/// `n` ring elements from the tape of `key` under `tag`.
pub fn sample(key: &Key, tag: Tag<'_>, n: usize, ring: Ring) -> Vec<u64> {
    let mut rng = stream(key, tag);
    if ring.is_bool() {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let w = rng.next_u64();
            let take = (n - out.len()).min(64);
            out.extend((0..take).map(|i| (w >> i) & 1));
        }
        out
    } else {
        (0..n).map(|_| ring.reduce(rng.next_u64())).collect()
    }
}

/// `n` κ-bit strings from the tape of `key` under `tag`.
pub fn sample_u128(key: &Key, tag: Tag<'_>, n: usize) -> Vec<u128> {
    let mut rng = stream(key, tag);
    (0..n)
        .map(|_| {
            let lo = rng.next_u64() as u128;
            let hi = rng.next_u64() as u128;
            (hi << 64) | lo
        })
        .collect()
}

/// One party's view of a zero-sharing A + B + Γ = 0. P0 learns all three
/// terms; P1 learns A, P2 learns B, P3 learns Γ.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZeroShare {
    pub a: Option<Vec<u64>>,
    pub b: Option<Vec<u64>>,
    pub gamma: Option<Vec<u64>>,
}

impl ZeroShare {
    /// The term this evaluator knows (A for P1, B for P2, Γ for P3).
    pub fn own(&self, p: PartyId) -> Option<&[u64]> {
        match p {
            P1 => self.a.as_deref(),
            P2 => self.b.as_deref(),
            P3 => self.gamma.as_deref(),
            P0 => None,
        }
    }
}

/// k₁ = key of P\{P2}, k₂ = key of P\{P3}, k₃ = key of P\{P1}.
pub fn zero_keys() -> [PartySet; 3] {
    [PartySet::without(P2), PartySet::without(P3), PartySet::without(P1)]
}

pub fn zero_share(bundle: &KeyBundle, tag: Tag<'_>, n: usize, ring: Ring) -> ZeroShare {
    let [s1, s2, s3] = zero_keys();
    let draw = |s: PartySet| bundle.key(s).ok().map(|k| sample(k, tag, n, ring));
    let f1 = draw(s1);
    let f2 = draw(s2);
    let f3 = draw(s3);
    let diff = |x: &Option<Vec<u64>>, y: &Option<Vec<u64>>| match (x, y) {
        (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(a, b)| ring.sub(*a, *b)).collect()),
        _ => None,
    };
    ZeroShare { a: diff(&f2, &f1), b: diff(&f3, &f2), gamma: diff(&f1, &f3) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(c: u64) -> Tag<'static> {
        Tag { domain: "test", counter: c }
    }

    #[test]
    fn bundles_match_setup_functionality() {
        let b = setup(b"seed");
        let names = |p: usize| {
            let mut v: Vec<String> = b[p]
                .sets()
                .map(|s| {
                    if s == PartySet::ALL {
                        "kP".to_string()
                    } else {
                        format!("k{}", s.members().map(|m| m.index().to_string()).collect::<String>())
                    }
                })
                .collect();
            v.sort();
            v
        };
        assert_eq!(names(0), ["k01", "k012", "k013", "k02", "k023", "k03", "kP"]);
        assert_eq!(names(1), ["k01", "k012", "k013", "k12", "k123", "k13", "kP"]);
        for p in 0..4 {
            assert_eq!(b[p].sets().count(), 7);
        }
        assert_eq!(setup(b"seed"), b);
        assert_ne!(setup(b"other")[0], b[0]);
    }

    #[test]
    fn common_sampling_agrees() {
        let b = setup(b"s");
        let set = PartySet::of(&[P0, P2, P3]);
        let vals: Vec<Vec<u64>> = [0, 2, 3]
            .iter()
            .map(|&p| sample(b[p].key(set).unwrap(), tag(7), 4, Ring::Z64))
            .collect();
        assert_eq!(vals[0], vals[1]);
        assert_eq!(vals[1], vals[2]);
        assert!(b[1].key(set).is_err());
        let g: Vec<Vec<u64>> =
            (0..4).map(|p| sample(b[p].key(PartySet::ALL).unwrap(), tag(1), 3, Ring::Z64)).collect();
        assert!(g.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn byte_samples_look_uniform() {
        // Chi-squared over 256 cells with 2^16 draws; 255 degrees of freedom.
        let b = setup(b"chi");
        let k = b[0].key(PartySet::ALL).unwrap();
        let mut counts = [0u64; 256];
        for c in 0..16u64 {
            for v in sample(k, tag(c), 4096, Ring::Z8) {
                counts[v as usize] += 1;
            }
        }
        let expected = 65536.0 / 256.0;
        let chi: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // Upper 0.001 quantile of chi-squared with 255 dof is about 330.5.
        assert!(chi < 330.5, "chi^2 = {chi}");
    }

    #[test]
    fn zero_share_telescopes() {
        let b = setup(b"z");
        let z0 = zero_share(&b[0], tag(3), 16, Ring::Z64);
        let (a, bb, g) = (z0.a.clone().unwrap(), z0.b.clone().unwrap(), z0.gamma.clone().unwrap());
        for i in 0..16 {
            assert_eq!(a[i].wrapping_add(bb[i]).wrapping_add(g[i]), 0);
        }
        assert_eq!(zero_share(&b[1], tag(3), 16, Ring::Z64).a.unwrap(), a);
        assert_eq!(zero_share(&b[2], tag(3), 16, Ring::Z64).b.unwrap(), bb);
        assert_eq!(zero_share(&b[3], tag(3), 16, Ring::Z64).gamma.unwrap(), g);
        assert!(zero_share(&b[1], tag(3), 1, Ring::Z64).b.is_none());
        assert_ne!(zero_share(&b[0], tag(4), 16, Ring::Z64).a.unwrap(), a);
    }
}
