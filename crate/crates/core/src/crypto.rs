//! Hashing primitives. H is SHA-256 everywhere in the system.
//!
//! The XOR keystreams here protect the magic number and stored passwords at
//! toy-protocol level only: they hide values from casual observers of the
//! wire or the store file, nothing more.

use sha2::{Digest, Sha256};

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    hex::encode(sha256(parts))
}

/// XOR `data` with the first 16 bytes of `H(key ‖ nonce)`, repeated.
pub fn xor_repeated(key: &[u8], nonce: &[u8], data: &[u8]) -> Vec<u8> {
    let digest = sha256(&[key, nonce]);
    let stream = &digest[..16];
    data.iter().zip(stream.iter().cycle()).map(|(b, k)| b ^ k).collect()
}

/// XOR `data` with the counter-mode stream `H(key ‖ salt ‖ i)` for i = 0, 1, ...
pub fn xor_counter(key: &[u8], salt: &[u8], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    for (i, chunk) in data.chunks(32).enumerate() {
        let block = sha256(&[key, salt, &(i as u32).to_be_bytes()]);
        out.extend(chunk.iter().zip(block.iter()).map(|(b, k)| b ^ k));
    }
    out
}
