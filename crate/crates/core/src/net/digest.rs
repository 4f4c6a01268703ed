use sha2::{Digest, Sha256};

use crate::party::PartyId;

pub const DIGEST_BYTES: usize = 32;

/// Running hashes of values whose cross-check is deferred.
///
/// Outgoing entries accumulate what this party vouches for toward each
/// receiver; incoming entries accumulate what it expects each sender to
/// vouch for. A flush turns each nonempty outgoing entry into one hash
/// message, however many values were queued.
#[derive(Default)]
pub struct DigestQueue {
    out: [Option<Sha256>; 4],
    inc: [Option<Sha256>; 4],
}

impl DigestQueue {
    pub fn defer(&mut self, to: PartyId, bytes: &[u8]) {
        self.out[to.index()].get_or_insert_with(Sha256::new).update(bytes);
    }

    pub fn expect(&mut self, from: PartyId, bytes: &[u8]) {
        self.inc[from.index()].get_or_insert_with(Sha256::new).update(bytes);
    }

    pub fn is_empty(&self) -> bool {
        self.out.iter().chain(self.inc.iter()).all(Option::is_none)
    }

    /// Finished outgoing digests, one per receiver with queued values.
    pub fn take_outgoing(&mut self) -> Vec<(PartyId, [u8; DIGEST_BYTES])> {
        take(&mut self.out)
    }

    /// Finished expected digests, one per sender with queued values.
    pub fn take_incoming(&mut self) -> Vec<(PartyId, [u8; DIGEST_BYTES])> {
        take(&mut self.inc)
    }
}

fn take(slots: &mut [Option<Sha256>; 4]) -> Vec<(PartyId, [u8; DIGEST_BYTES])> {
    slots
        .iter_mut()
        .enumerate()
        .filter_map(|(i, s)| s.take().map(|h| (PartyId::from_index(i).unwrap(), h.finalize().into())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::party::{P1, P2, P3};

    #[test]
    fn one_digest_per_pair() {
        let mut q = DigestQueue::default();
        for i in 0..1024u64 {
            q.defer(P2, &i.to_le_bytes());
        }
        q.defer(P3, b"x");
        let out = q.take_outgoing();
        assert_eq!(out.len(), 2);
        assert!(q.take_outgoing().is_empty());
        assert!(q.is_empty());
    }

    #[test]
    fn tampered_value_changes_digest() {
        let mut a = DigestQueue::default();
        let mut b = DigestQueue::default();
        for i in 0..16u64 {
            a.defer(P1, &i.to_le_bytes());
            let v = if i == 9 { i + 1 } else { i };
            b.expect(P2, &v.to_le_bytes());
        }
        assert_ne!(a.take_outgoing()[0].1, b.take_incoming()[0].1);
    }
}
