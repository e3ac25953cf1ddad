//! Process exit codes.
//!
//! | code | meaning                                                  |
//! |------|----------------------------------------------------------|
//! | 0    | the server answered `OK`                                 |
//! | 1    | local failure: unreadable file, bad config, no cache     |
//! | 2    | command-line usage error                                 |
//! | 3    | authentication: `BADCODE`, `AUTH`, `EXPIRED`             |
//! | 4    | unknown page or entity: `BADPAGE`, `UNKNOWN_*`           |
//! | 5    | rejected input: parse, validation and SMS errors         |
//! | 6    | `NOT_IMPLEMENTED`                                        |
//! | 7    | any other server error                                   |
//! | 8    | the server could not be reached                          |

pub const OK: i32 = 0;
pub const LOCAL: i32 = 1;
pub const USAGE: i32 = 2;
pub const AUTH: i32 = 3;
pub const NOT_FOUND: i32 = 4;
pub const REJECTED: i32 = 5;
pub const NOT_IMPLEMENTED: i32 = 6;
pub const SERVER: i32 = 7;
pub const UNREACHABLE: i32 = 8;

/// Exit code for a wire status code.
pub fn for_wire_code(code: &str) -> i32 {
    match code {
        "OK" => OK,
        "LOCAL" | "NO_CACHE" => LOCAL,
        "BADCODE" | "AUTH" | "EXPIRED" => AUTH,
        "BADPAGE" => NOT_FOUND,
        c if c.starts_with("UNKNOWN_") => NOT_FOUND,
        "PARSE_ERROR" | "VALIDATION" | "MALFORMED_REQUEST" | "BADACTION" | "STILL_REFERENCED" | "DISABLED"
        | "INVALID_RECORD" | "SHAPE_MISMATCH" => REJECTED,
        c if c.starts_with("SMS_") || c.starts_with("DUPLICATE_") => REJECTED,
        "NOT_IMPLEMENTED" => NOT_IMPLEMENTED,
        _ => SERVER,
    }
}
