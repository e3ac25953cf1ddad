//! Session handling over any [`Transport`].

use robohome_core::map::HomeMap;
use robohome_core::scenario::parse_scenario;
use robohome_core::wire::tables::{parse_status_line, CapabilityTables, StatusRow};
use robohome_core::wire::{
    decode_map, decrypt_magic, encode_sms_scenario, hash_credentials, MalformedMap, RequestEnvelope, Response,
};
use thiserror::Error;

use crate::state::{Cache, CachedSession, ClientState};
use crate::transport::{Transport, TransportError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("handshake reply could not be decrypted; check the shared secret")]
    Handshake,
    #[error("no device data cached; run update-devices first")]
    NoDeviceData,
    /// Input refused before it reached the server, with a wire-style code.
    #[error("{code} {reason}")]
    Rejected { code: String, reason: String },
}

/// Maximum cache ages in seconds before a warning is shown.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Staleness {
    pub device_max_age: i64,
    pub info_max_age: i64,
}

impl Default for Staleness {
    fn default() -> Self {
        Staleness {
            device_max_age: 24 * 3600,
            info_max_age: 60,
        }
    }
}

pub struct Client<T> {
    transport: T,
    pub state: ClientState,
    secret: String,
    password: String,
    pub limits: Staleness,
    clock: Box<dyn Fn() -> i64>,
}

fn system_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs() as i64)
}

fn age_text(secs: i64) -> String {
    match secs {
        s if s >= 2 * 3600 => format!("{} h", s / 3600),
        s if s >= 120 => format!("{} min", s / 60),
        s => format!("{s} s"),
    }
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T, state: ClientState, secret: impl Into<String>, password: impl Into<String>) -> Self {
        Client {
            transport,
            state,
            secret: secret.into(),
            password: password.into(),
            limits: Staleness::default(),
            clock: Box::new(system_now),
        }
    }

    /// Replace the clock used to age caches and sessions.
    pub fn with_clock(mut self, clock: impl Fn() -> i64 + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn with_limits(mut self, limits: Staleness) -> Self {
        self.limits = limits;
        self
    }

    pub fn now(&self) -> i64 {
        (self.clock)()
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    /// Handshake, then prove the credentials with the new magic. The ack
    /// lines are `user=<name>` and `ttl=<seconds left>`.
    pub fn login(&mut self) -> Result<Response, ClientError> {
        self.state.session = None;
        let hello = RequestEnvelope::new("auth.aspx").with("code", self.state.code.clone());
        let reply = self.transport.request(&hello.encode())?;
        let Response::Ok(lines) = &reply else {
            return Ok(reply);
        };
        let [nonce, ciphertext] = lines.as_slice() else {
            return Err(ClientError::Handshake);
        };
        let magic = decrypt_magic(&self.secret, nonce, ciphertext).ok_or(ClientError::Handshake)?;
        let issued_at = self.now();
        let ack = self.send("login.aspx", &[], &magic)?;
        if ack.is_ok() {
            self.state.session = Some(CachedSession { magic, issued_at });
        }
        Ok(ack)
    }

    fn send(&mut self, page: &str, params: &[(&str, &str)], magic: &str) -> Result<Response, ClientError> {
        let mut env = RequestEnvelope::new(page)
            .with("user", self.state.user.clone())
            .with("auth", hash_credentials(&self.state.user, &self.password, magic));
        for (k, v) in params {
            env = env.with(*k, *v);
        }
        Ok(self.transport.request(&env.encode())?)
    }

    /// Call an authenticated page. A missing session logs in first; a
    /// session the server no longer honours is renewed and the call is
    /// retried once.
    pub fn call(&mut self, page: &str, params: &[(&str, &str)]) -> Result<Response, ClientError> {
        let cached = self.state.session.clone();
        let magic = match cached {
            Some(s) => s.magic,
            None => {
                let ack = self.login()?;
                if !ack.is_ok() {
                    return Ok(ack);
                }
                self.state.session.clone().expect("login stored a session").magic
            }
        };
        let reply = self.send(page, params, &magic)?;
        if matches!(reply.code(), "EXPIRED" | "AUTH") && self.state.session.is_some() {
            log::info!("session rejected with {}; renewing", reply.code());
            let ack = self.login()?;
            if !ack.is_ok() {
                return Ok(ack);
            }
            let magic = self.state.session.clone().expect("login stored a session").magic;
            return self.send(page, params, &magic);
        }
        Ok(reply)
    }

    /// Refresh the capability tables. Leaves the info cache alone.
    pub fn update_devices(&mut self) -> Result<Response, ClientError> {
        let reply = self.call("devices.aspx", &[])?;
        if let Response::Ok(lines) = &reply {
            self.state.devices = Some(Cache {
                fetched_at: self.now(),
                lines: lines.clone(),
            });
        }
        Ok(reply)
    }

    /// Refresh the map and status snapshot. Leaves the device cache alone.
    pub fn update_info(&mut self) -> Result<Response, ClientError> {
        let reply = self.call("map.aspx", &[])?;
        if let Response::Ok(lines) = &reply {
            self.state.info = Some(Cache {
                fetched_at: self.now(),
                lines: lines.clone(),
            });
        }
        Ok(reply)
    }

    pub fn tables(&self) -> Option<CapabilityTables> {
        let cache = self.state.devices.as_ref()?;
        Some(CapabilityTables::from_lines(cache.lines.iter().map(String::as_str)))
    }

    /// A prompt to refresh the device tables when they are missing or old.
    pub fn device_warning(&self) -> Option<String> {
        match &self.state.devices {
            None => Some("no device data cached; run `robohome update-devices`".into()),
            Some(c) if c.age(self.now()) > self.limits.device_max_age => Some(format!(
                "device data is {} old; run `robohome update-devices`",
                age_text(c.age(self.now()))
            )),
            Some(_) => None,
        }
    }

    /// A prompt to refresh the map and status when they are missing or old.
    pub fn info_warning(&self) -> Option<String> {
        match &self.state.info {
            None => Some("no status information cached; run `robohome update-info`".into()),
            Some(c) if c.age(self.now()) > self.limits.info_max_age => Some(format!(
                "status information is {} old; run `robohome update-info`",
                age_text(c.age(self.now()))
            )),
            Some(_) => None,
        }
    }

    pub fn cached_map(&self) -> Option<Result<HomeMap, MalformedMap>> {
        let cache = self.state.info.as_ref()?;
        Some(decode_map(cache.lines.iter().map(String::as_str)))
    }

    pub fn cached_status(&self) -> Vec<StatusRow> {
        self.state
            .info
            .as_ref()
            .map(|c| c.lines.iter().filter_map(|l| parse_status_line(l)).collect())
            .unwrap_or_default()
    }

    /// Encode a scenario file for the SMS channel using the cached tables.
    pub fn sms_body(&self, text: &str) -> Result<String, ClientError> {
        let trimmed = text.trim();
        if trimmed.starts_with("SC|") || trimmed.starts_with("ACT|") {
            return Ok(trimmed.to_string());
        }
        let tables = self.tables().ok_or(ClientError::NoDeviceData)?;
        let scenario = parse_scenario(text).map_err(|e| ClientError::Rejected {
            code: "PARSE_ERROR".into(),
            reason: e.to_string(),
        })?;
        encode_sms_scenario(&scenario, &tables).map_err(|e| ClientError::Rejected {
            code: e.code().into(),
            reason: e.reason(),
        })
    }

    pub fn sms_send(&mut self, sender: &str, body: &str) -> Result<Response, ClientError> {
        Ok(self.transport.sms(sender, body)?)
    }
}
