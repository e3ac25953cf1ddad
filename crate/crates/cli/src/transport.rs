use std::io::{self, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use robohome_core::home::Home;
use robohome_core::net::{read_response, HomeHandle};
use robohome_core::wire::{Response, SmsMessage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cannot reach {addr}: {source}")]
    Connect { addr: String, source: io::Error },
    #[error("connection to {addr} failed: {source}")]
    Io { addr: String, source: io::Error },
    #[error("no SMS gateway configured")]
    NoSmsGateway,
    #[error("server has shut down")]
    Shutdown,
}

/// Carries one request at a time to a server and returns its reply.
pub trait Transport {
    fn request(&mut self, line: &str) -> Result<Response, TransportError>;
    fn sms(&mut self, sender: &str, body: &str) -> Result<Response, TransportError>;
}

/// The socket transport: query lines on one port, SMS lines on another.
pub struct TcpTransport {
    gprs: String,
    sms: Option<String>,
    timeout: Duration,
    conn: Option<(TcpStream, BufReader<TcpStream>)>,
}

impl TcpTransport {
    pub fn new(gprs: impl Into<String>, sms: Option<String>) -> Self {
        TcpTransport {
            gprs: gprs.into(),
            sms,
            timeout: Duration::from_secs(10),
            conn: None,
        }
    }

    fn connect(addr: &str, timeout: Duration) -> Result<(TcpStream, BufReader<TcpStream>), TransportError> {
        let err = |source| TransportError::Connect {
            addr: addr.to_string(),
            source,
        };
        let target = addr
            .to_socket_addrs()
            .map_err(err)?
            .next()
            .ok_or_else(|| err(io::Error::new(io::ErrorKind::NotFound, "no address")))?;
        let stream = TcpStream::connect_timeout(&target, timeout).map_err(err)?;
        stream.set_read_timeout(Some(timeout)).map_err(err)?;
        let reader = BufReader::new(stream.try_clone().map_err(err)?);
        Ok((stream, reader))
    }

    fn exchange(
        conn: &mut (TcpStream, BufReader<TcpStream>),
        addr: &str,
        line: &str,
    ) -> Result<Response, TransportError> {
        let io = |source| TransportError::Io {
            addr: addr.to_string(),
            source,
        };
        writeln!(conn.0, "{line}").map_err(io)?;
        conn.0.flush().map_err(io)?;
        read_response(&mut conn.1).map_err(io)
    }
}

impl Transport for TcpTransport {
    fn request(&mut self, line: &str) -> Result<Response, TransportError> {
        if self.conn.is_none() {
            self.conn = Some(Self::connect(&self.gprs, self.timeout)?);
        }
        let conn = self.conn.as_mut().expect("just connected");
        let result = Self::exchange(conn, &self.gprs, line);
        if result.is_err() {
            self.conn = None;
        }
        result
    }

    fn sms(&mut self, sender: &str, body: &str) -> Result<Response, TransportError> {
        let addr = self.sms.clone().ok_or(TransportError::NoSmsGateway)?;
        let mut conn = Self::connect(&addr, self.timeout)?;
        Self::exchange(&mut conn, &addr, &format!("SMS|{sender}|{body}"))
    }
}

/// Direct calls into a server owned by the caller.
impl Transport for Home {
    fn request(&mut self, line: &str) -> Result<Response, TransportError> {
        Ok(self.handle_line(line))
    }

    fn sms(&mut self, sender: &str, body: &str) -> Result<Response, TransportError> {
        Ok(self.handle_sms(&SmsMessage {
            sender: sender.to_string(),
            body: body.to_string(),
        }))
    }
}

/// Messages to a server running on its own thread.
impl Transport for HomeHandle {
    fn request(&mut self, line: &str) -> Result<Response, TransportError> {
        let r = HomeHandle::request(self, line);
        if r.code() == "SHUTDOWN" {
            return Err(TransportError::Shutdown);
        }
        Ok(r)
    }

    fn sms(&mut self, sender: &str, body: &str) -> Result<Response, TransportError> {
        let r = HomeHandle::sms(
            self,
            SmsMessage {
                sender: sender.to_string(),
                body: body.to_string(),
            },
        );
        if r.code() == "SHUTDOWN" {
            return Err(TransportError::Shutdown);
        }
        Ok(r)
    }
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn request(&mut self, line: &str) -> Result<Response, TransportError> {
        (**self).request(line)
    }

    fn sms(&mut self, sender: &str, body: &str) -> Result<Response, TransportError> {
        (**self).sms(sender, body)
    }
}
