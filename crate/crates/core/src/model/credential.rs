use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crypto;

/// A stored user credential.
///
/// The challenge-response login needs the server to recompute
/// `H(user:pass:magic)`, so the password is kept sealed under the
/// installation secret rather than as a one-way digest. `check` is a salted
/// digest used to verify a successful unseal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub salt: String,
    pub sealed: String,
    pub check: String,
}

impl Credential {
    pub fn seal<R: Rng + ?Sized>(password: &str, secret: &str, rng: &mut R) -> Self {
        let salt: [u8; 16] = rng.random();
        let sealed = crypto::xor_counter(secret.as_bytes(), &salt, password.as_bytes());
        Credential {
            salt: hex::encode(salt),
            sealed: hex::encode(sealed),
            check: crypto::sha256_hex(&[&salt, b":", password.as_bytes()]),
        }
    }

    /// Recover the password, or `None` if the secret is wrong or the record corrupt.
    pub fn unseal(&self, secret: &str) -> Option<String> {
        let salt = hex::decode(&self.salt).ok()?;
        let sealed = hex::decode(&self.sealed).ok()?;
        let plain = crypto::xor_counter(secret.as_bytes(), &salt, &sealed);
        let password = String::from_utf8(plain).ok()?;
        self.verifies(&password).then_some(password)
    }

    pub fn verifies(&self, password: &str) -> bool {
        match hex::decode(&self.salt) {
            Ok(salt) => crypto::sha256_hex(&[&salt, b":", password.as_bytes()]) == self.check,
            Err(_) => false,
        }
    }
}
