//! Line-oriented responses: a status line, then payload records.

use std::fmt;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

/// Characters that would break a `|`-separated record.
const FIELD: &AsciiSet = &CONTROLS.add(b'|').add(b'%');

/// Escape one field of a `|`-separated record.
pub fn field(text: &str) -> String {
    utf8_percent_encode(text, FIELD).to_string()
}

pub fn unfield(text: &str) -> String {
    percent_decode_str(text).decode_utf8_lossy().into_owned()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Response {
    Ok(Vec<String>),
    /// An error code and an optional human-readable reason.
    Err {
        code: String,
        reason: Option<String>,
    },
}

impl Response {
    pub fn ok(lines: impl IntoIterator<Item = String>) -> Self {
        Response::Ok(lines.into_iter().collect())
    }

    pub fn err(code: &str) -> Self {
        Response::Err {
            code: code.to_string(),
            reason: None,
        }
    }

    pub fn err_with(code: &str, reason: impl Into<String>) -> Self {
        let reason = reason.into().replace(['\r', '\n'], " ");
        Response::Err {
            code: code.to_string(),
            reason: (!reason.trim().is_empty()).then_some(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Response::Ok(_))
    }

    pub fn code(&self) -> &str {
        match self {
            Response::Ok(_) => "OK",
            Response::Err { code, .. } => code,
        }
    }

    pub fn lines(&self) -> &[String] {
        match self {
            Response::Ok(lines) => lines,
            Response::Err { .. } => &[],
        }
    }

    /// Parse response text; blank trailing lines are ignored.
    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let status = lines.next()?;
        if status == "OK" {
            return Some(Response::Ok(
                lines.filter(|l| !l.is_empty()).map(str::to_string).collect(),
            ));
        }
        let code = status.strip_prefix("ERR ")?.trim();
        if code.is_empty() {
            return None;
        }
        let reason = lines.find(|l| !l.is_empty()).map(str::to_string);
        Some(Response::Err {
            code: code.to_string(),
            reason,
        })
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Ok(lines) => {
                f.write_str("OK")?;
                for l in lines {
                    write!(f, "\n{l}")?;
                }
            }
            Response::Err { code, reason } => {
                write!(f, "ERR {code}")?;
                if let Some(r) = reason {
                    write!(f, "\n{r}")?;
                }
            }
        }
        f.write_str("\n")
    }
}
