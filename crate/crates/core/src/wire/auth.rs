//! Magic-number challenge-response sessions.
//!
//! A client presents the installation's special code and receives a fresh
//! magic number, encrypted as `magic XOR stream` where the stream is the
//! first 16 bytes of `H(K || nonce)` repeated. Every later request carries
//! `H(user:pass:magic)`. A session expires `ttl` seconds after issue, after
//! which the client must ask for a new magic number.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

use crate::crypto;
use crate::model::Registry;
use crate::time::Instant;

pub const DEFAULT_TTL: i64 = 300;
/// Sessions kept at most; the oldest are evicted first.
pub const SESSION_CAPACITY: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("BADCODE")]
    BadCode,
    #[error("AUTH")]
    Auth,
    #[error("EXPIRED")]
    Expired,
}

impl AuthError {
    pub fn code(self) -> &'static str {
        match self {
            AuthError::BadCode => "BADCODE",
            AuthError::Auth => "AUTH",
            AuthError::Expired => "EXPIRED",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthSession {
    /// 32 lowercase hex characters.
    pub magic: String,
    pub issued_at: Instant,
    pub ttl: i64,
    pub user: Option<String>,
}

impl AuthSession {
    pub fn expired(&self, now: Instant) -> bool {
        now.secs() - self.issued_at.secs() > self.ttl
    }

    pub fn remaining(&self, now: Instant) -> i64 {
        (self.ttl - (now.secs() - self.issued_at.secs())).max(0)
    }
}

/// Hex-encoded handshake reply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Challenge {
    pub nonce: String,
    pub ciphertext: String,
}

pub fn hash_credentials(user: &str, pass: &str, magic: &str) -> String {
    crypto::sha256_hex(&[user.as_bytes(), b":", pass.as_bytes(), b":", magic.as_bytes()])
}

/// Encrypt or decrypt (the operation is its own inverse).
pub fn magic_cipher(secret: &str, nonce: &[u8], data: &[u8]) -> Vec<u8> {
    crypto::xor_repeated(secret.as_bytes(), nonce, data)
}

/// Client side of the handshake.
pub fn decrypt_magic(secret: &str, nonce_hex: &str, ciphertext_hex: &str) -> Option<String> {
    let nonce = hex::decode(nonce_hex.trim()).ok()?;
    let cipher = hex::decode(ciphertext_hex.trim()).ok()?;
    let plain = String::from_utf8(magic_cipher(secret, &nonce, &cipher)).ok()?;
    (plain.len() == 32 && plain.bytes().all(|b| b.is_ascii_hexdigit())).then_some(plain)
}

fn same(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[derive(Clone, Debug)]
pub struct SessionTable {
    sessions: VecDeque<AuthSession>,
    pub ttl: i64,
}

impl Default for SessionTable {
    fn default() -> Self {
        SessionTable::new(DEFAULT_TTL)
    }
}

impl SessionTable {
    pub fn new(ttl: i64) -> Self {
        SessionTable {
            sessions: VecDeque::new(),
            ttl,
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn get(&self, magic: &str) -> Option<&AuthSession> {
        self.sessions.iter().find(|s| s.magic == magic)
    }

    /// Start a session if `code` is the installation's special code.
    pub fn issue<R: Rng + ?Sized>(
        &mut self,
        code: &str,
        expected_code: &str,
        secret: &str,
        at: Instant,
        rng: &mut R,
    ) -> Result<Challenge, AuthError> {
        if !same(code, expected_code) {
            return Err(AuthError::BadCode);
        }
        let raw: [u8; 16] = rng.random();
        let magic = hex::encode(raw);
        let nonce: [u8; 16] = rng.random();
        let cipher = magic_cipher(secret, &nonce, magic.as_bytes());
        if self.sessions.len() >= SESSION_CAPACITY {
            self.sessions.pop_front();
        }
        self.sessions.push_back(AuthSession {
            magic,
            issued_at: at,
            ttl: self.ttl,
            user: None,
        });
        Ok(Challenge {
            nonce: hex::encode(nonce),
            ciphertext: hex::encode(cipher),
        })
    }

    /// Find the session whose magic reproduces `auth` for `user` and bind it.
    /// Binding drops older sessions of the same user, so a superseded magic
    /// no longer authenticates.
    pub fn authenticate(
        &mut self,
        user: &str,
        auth: &str,
        at: Instant,
        reg: &Registry,
        secret: &str,
    ) -> Result<&AuthSession, AuthError> {
        let password = reg.user(user).and_then(|c| c.unseal(secret)).ok_or(AuthError::Auth)?;
        let auth = auth.trim().to_ascii_lowercase();
        let idx = self
            .sessions
            .iter()
            .position(|s| same(&hash_credentials(user, &password, &s.magic), &auth))
            .ok_or(AuthError::Auth)?;
        if self.sessions[idx].expired(at) {
            return Err(AuthError::Expired);
        }
        let magic = self.sessions[idx].magic.clone();
        let issued = self.sessions[idx].issued_at;
        self.sessions
            .retain(|s| s.magic == magic || s.user.as_deref() != Some(user) || s.issued_at > issued);
        let session = self
            .sessions
            .iter_mut()
            .find(|s| s.magic == magic)
            .expect("session just matched");
        session.user = Some(user.to_string());
        Ok(session)
    }

    /// Forget sessions that expired more than one ttl ago.
    pub fn sweep(&mut self, now: Instant) {
        let ttl = self.ttl;
        self.sessions.retain(|s| now.secs() - s.issued_at.secs() <= 2 * ttl);
    }
}
