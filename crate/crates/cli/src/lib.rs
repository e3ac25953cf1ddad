//! Headless client for the robohome server: session handling, the two
//! local caches, and text renderings of every page.

pub mod ascii;
pub mod client;
pub mod config;
pub mod exit;
pub mod render;
pub mod state;
pub mod transport;

pub use client::{Client, ClientError, Staleness};
pub use state::{Cache, CachedSession, ClientState};
pub use transport::{TcpTransport, Transport, TransportError};
