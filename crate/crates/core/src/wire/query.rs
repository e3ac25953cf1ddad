//! Query-string request envelopes: `page?key=value&key=value`.
//!
//! Encoding always joins pairs with a single `&`. Decoding also accepts the
//! doubled `&&` separator seen in hand-written URLs, treats `+` as a space,
//! and rejects malformed escapes instead of passing them through.

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use thiserror::Error;

/// Everything except the RFC 3986 unreserved characters.
const QUERY: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~');

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("MALFORMED_REQUEST {0}")]
pub struct MalformedRequest(pub String);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RequestEnvelope {
    pub page: String,
    /// Decoded pairs in request order.
    pub params: Vec<(String, String)>,
}

impl RequestEnvelope {
    pub fn new(page: impl Into<String>) -> Self {
        RequestEnvelope {
            page: page.into(),
            params: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.push((key.into(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Last path segment, lowercased: `www.test.test/Login.aspx` → `login.aspx`.
    pub fn route(&self) -> String {
        self.page.rsplit('/').next().unwrap_or("").to_ascii_lowercase()
    }

    pub fn encode(&self) -> String {
        encode_request(&self.page, &self.params)
    }
}

pub fn escape(text: &str) -> String {
    utf8_percent_encode(text, QUERY).to_string()
}

/// Strict percent-decoding; `+` reads as a space.
pub fn unescape(text: &str) -> Result<String, MalformedRequest> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let ok = bytes.len() >= i + 3 && bytes[i + 1].is_ascii_hexdigit() && bytes[i + 2].is_ascii_hexdigit();
            if !ok {
                return Err(MalformedRequest(format!("bad percent-escape at byte {i}")));
            }
            i += 3;
        } else {
            i += 1;
        }
    }
    let spaced = text.replace('+', " ");
    percent_decode_str(&spaced)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|_| MalformedRequest("escape does not decode to UTF-8".into()))
}

pub fn encode_request(page: &str, params: &[(String, String)]) -> String {
    let mut out = String::from(page);
    if params.is_empty() {
        return out;
    }
    out.push('?');
    for (i, (k, v)) in params.iter().enumerate() {
        if i > 0 {
            out.push('&');
        }
        out.push_str(&escape(k));
        out.push('=');
        out.push_str(&escape(v));
    }
    out
}

pub fn decode_request(text: &str) -> Result<RequestEnvelope, MalformedRequest> {
    let text = text.trim_end_matches(['\r', '\n']);
    let (page, query) = match text.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (text, None),
    };
    if page.trim().is_empty() {
        return Err(MalformedRequest("missing page".into()));
    }
    let mut env = RequestEnvelope::new(page.trim());
    for pair in query.unwrap_or("").split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        let key = unescape(k)?;
        if key.is_empty() {
            return Err(MalformedRequest("empty key".into()));
        }
        if env.get(&key).is_some() {
            return Err(MalformedRequest(format!("duplicate key {key}")));
        }
        let value = unescape(v)?;
        env.params.push((key, value));
    }
    Ok(env)
}
