//! Client transports and their codecs.

pub mod auth;
pub mod icons;
pub mod mapcodec;
pub mod query;
pub mod response;
pub mod sms;
pub mod tables;

pub use auth::{decrypt_magic, hash_credentials, AuthError, AuthSession, Challenge, SessionTable};
pub use icons::icon_id;
pub use mapcodec::{decode_map, encode_map, MalformedMap};
pub use query::{decode_request, encode_request, MalformedRequest, RequestEnvelope};
pub use response::Response;
pub use sms::{decode_sms, encode_sms_scenario, NameResolver, SmsCommand, SmsError, SmsMessage};
