use sha2::{Digest, Sha256};

pub const COMMITMENT_BYTES: usize = 32;

pub type Commitment = [u8; COMMITMENT_BYTES];

/// Hash commitment H(value ∥ nonce).
pub fn commit(value: &[u8], nonce: &[u8]) -> Commitment {
    let mut h = Sha256::new();
    h.update((value.len() as u32).to_le_bytes());
    h.update(value);
    h.update(nonce);
    h.finalize().into()
}

pub fn open(c: &Commitment, value: &[u8], nonce: &[u8]) -> bool {
    commit(value, nonce) == *c
}
