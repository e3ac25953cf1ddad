//! Socket front ends. One thread owns the [`Home`]; every listener talks to
//! it through a message queue and waits for the reply.
//!
//! - query-string channel: one request per line, the reply is the response
//!   lines followed by an empty line;
//! - SMS channel: lines of the form `SMS|<sender>|<body>`, same replies;
//! - HTTP gateway: `GET /<page>?<query>` returns the same lines as
//!   `text/plain`, for browser clients.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::config::Listen;
use crate::home::Home;
use crate::runtime::ClockMode;
use crate::time::Instant;
use crate::wire::{Response, SmsMessage};

pub enum Message {
    Line(String, Sender<Response>),
    Sms(SmsMessage, Sender<Response>),
    /// Advance a virtual clock; replies with the number of dispatches.
    Tick(Instant, Sender<usize>),
    /// Run a closure against the home, for tests and embedding.
    Inspect(Box<dyn FnOnce(&mut Home) + Send>),
    Shutdown,
}

/// A cloneable handle for submitting work to the owning thread.
#[derive(Clone)]
pub struct HomeHandle {
    tx: Sender<Message>,
}

impl HomeHandle {
    pub fn request(&self, line: &str) -> Response {
        let (tx, rx) = mpsc::channel();
        if self.tx.send(Message::Line(line.to_string(), tx)).is_err() {
            return Response::err("SHUTDOWN");
        }
        rx.recv().unwrap_or_else(|_| Response::err("SHUTDOWN"))
    }

    pub fn sms(&self, msg: SmsMessage) -> Response {
        let (tx, rx) = mpsc::channel();
        if self.tx.send(Message::Sms(msg, tx)).is_err() {
            return Response::err("SHUTDOWN");
        }
        rx.recv().unwrap_or_else(|_| Response::err("SHUTDOWN"))
    }

    pub fn tick(&self, until: Instant) -> Option<usize> {
        let (tx, rx) = mpsc::channel();
        self.tx.send(Message::Tick(until, tx)).ok()?;
        rx.recv().ok()
    }

    pub fn inspect<T: Send + 'static>(&self, f: impl FnOnce(&mut Home) -> T + Send + 'static) -> Option<T> {
        let (tx, rx) = mpsc::channel();
        let job = Box::new(move |home: &mut Home| {
            let _ = tx.send(f(home));
        });
        self.tx.send(Message::Inspect(job)).ok()?;
        rx.recv().ok()
    }

    pub fn shutdown(&self) {
        let _ = self.tx.send(Message::Shutdown);
    }
}

/// Start the owning thread. A wall-clock home is ticked once a second.
pub fn spawn_home(home: Home) -> (HomeHandle, JoinHandle<Home>) {
    let (tx, rx) = mpsc::channel();
    let join = thread::spawn(move || run_home(home, rx));
    (HomeHandle { tx }, join)
}

fn run_home(mut home: Home, rx: Receiver<Message>) -> Home {
    let wall = home.rt.clock().mode == ClockMode::Wall;
    loop {
        let msg = if wall {
            match rx.recv_timeout(Duration::from_secs(1)) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => {
                    if !home.rt.sync_wall().is_empty() {
                        if let Err(e) = home.write_trace() {
                            log::warn!("trace write failed: {e}");
                        }
                    }
                    let _ = home.rt.db_mut().flush();
                    continue;
                }
                Err(RecvTimeoutError::Disconnected) => break,
            }
        } else {
            match rx.recv() {
                Ok(m) => m,
                Err(_) => break,
            }
        };
        match msg {
            Message::Line(line, reply) => {
                let _ = reply.send(home.handle_line(&line));
            }
            Message::Sms(sms, reply) => {
                let _ = reply.send(home.handle_sms(&sms));
            }
            Message::Tick(until, reply) => {
                let n = home.tick(until).unwrap_or(0);
                let _ = reply.send(n);
            }
            Message::Inspect(f) => f(&mut home),
            Message::Shutdown => break,
        }
    }
    let _ = home.rt.db_mut().flush();
    if let Err(e) = home.write_trace() {
        log::warn!("trace write failed: {e}");
    }
    home
}

/// Split `SMS|<sender>|<body>`; the body may itself contain `|`.
pub fn parse_sms_line(line: &str) -> Option<SmsMessage> {
    let rest = line.trim_end_matches(['\r', '\n']).strip_prefix("SMS|")?;
    let (sender, body) = rest.split_once('|')?;
    Some(SmsMessage {
        sender: sender.to_string(),
        body: body.to_string(),
    })
}

fn serve_lines(stream: TcpStream, handle: HomeHandle, sms: bool) -> io::Result<()> {
    let mut out = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = if sms {
            match parse_sms_line(&line) {
                Some(msg) => handle.sms(msg),
                None => Response::err_with("PARSE_ERROR", "expected SMS|<sender>|<body>"),
            }
        } else {
            handle.request(&line)
        };
        writeln!(out, "{response}")?;
        out.flush()?;
    }
    Ok(())
}

fn accept_loop(listener: TcpListener, handle: HomeHandle, sms: bool) {
    for stream in listener.incoming() {
        match stream {
            Ok(s) => {
                let h = handle.clone();
                thread::spawn(move || {
                    if let Err(e) = serve_lines(s, h, sms) {
                        log::debug!("connection closed: {e}");
                    }
                });
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

pub struct Servers {
    pub gprs: SocketAddr,
    pub sms: SocketAddr,
    pub http: SocketAddr,
    http_server: Arc<tiny_http::Server>,
}

impl Servers {
    /// Stop the gateway; line listeners end with the process.
    pub fn stop_http(&self) {
        self.http_server.unblock();
    }
}

/// Bind all three listeners and serve them on background threads.
pub fn listen(handle: &HomeHandle, addrs: &Listen) -> io::Result<Servers> {
    let gprs = TcpListener::bind(&addrs.gprs)?;
    let sms = TcpListener::bind(&addrs.sms)?;
    let http = tiny_http::Server::http(&addrs.http).map_err(|e| io::Error::other(e.to_string()))?;
    let http = Arc::new(http);
    let servers = Servers {
        gprs: gprs.local_addr()?,
        sms: sms.local_addr()?,
        http: http
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("gateway is not on an IP socket"))?,
        http_server: Arc::clone(&http),
    };
    let h = handle.clone();
    thread::spawn(move || accept_loop(gprs, h, false));
    let h = handle.clone();
    thread::spawn(move || accept_loop(sms, h, true));
    let h = handle.clone();
    thread::spawn(move || gateway_loop(&http, &h));
    log::info!(
        "listening: query {} sms {} http {}",
        servers.gprs,
        servers.sms,
        servers.http
    );
    Ok(servers)
}

const INDEX: &str = "robohome gateway\n\nPages: auth.aspx login.aspx devices.aspx status.aspx map.aspx \
scenario.aspx rule.aspx robots.aspx camera.aspx\n";

fn gateway_loop(server: &tiny_http::Server, handle: &HomeHandle) {
    for mut req in server.incoming_requests() {
        let url = req.url().trim_start_matches('/').to_string();
        let text = if url.is_empty() || url == "index.html" {
            INDEX.to_string()
        } else {
            let mut line = url;
            if *req.method() == tiny_http::Method::Post {
                let mut body = String::new();
                if io::Read::read_to_string(req.as_reader(), &mut body).is_ok() && !body.trim().is_empty() {
                    line.push(if line.contains('?') { '&' } else { '?' });
                    line.push_str(body.trim());
                }
            }
            handle.request(&line).to_string()
        };
        let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"text/plain; charset=utf-8"[..])
            .expect("static header");
        let response = tiny_http::Response::from_string(text).with_header(header);
        if let Err(e) = req.respond(response) {
            log::debug!("gateway reply failed: {e}");
        }
    }
}

/// Read one framed response (lines up to the first empty line).
pub fn read_response(reader: &mut impl BufRead) -> io::Result<Response> {
    let mut text = String::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        if line.trim_end().is_empty() {
            break;
        }
        text.push_str(&line);
    }
    Response::parse(&text).ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("bad response {text:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sms_line_keeps_pipes_in_body() {
        let m = parse_sms_line("SMS|+15550100|SC|Light|D8:on@N").unwrap();
        assert_eq!(m.sender, "+15550100");
        assert_eq!(m.body, "SC|Light|D8:on@N");
        assert!(parse_sms_line("hello").is_none());
    }
}
