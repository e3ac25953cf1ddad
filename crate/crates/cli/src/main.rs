use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use robohome_cli::ascii::{self, Scale};
use robohome_cli::config::{default_state_path, ClientConfig};
use robohome_cli::{exit, render, Client, ClientError, ClientState, TcpTransport};
use robohome_core::config::ServerConfig;
use robohome_core::home::Home;
use robohome_core::net::{listen, spawn_home};
use robohome_core::runtime::ClockMode;
use robohome_core::time::Instant;
use robohome_core::wire::Response;

#[derive(Parser)]
#[command(name = "robohome", version, about = "Drive a robohome server from the command line")]
struct Cli {
    /// Query channel address, host:port.
    #[arg(long, global = true, env = "ROBOHOME_SERVER")]
    server: Option<String>,
    /// JSON settings file; a server configuration file also works.
    #[arg(long, global = true, env = "ROBOHOME_CONFIG")]
    config: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, env = "ROBOHOME_USER")]
    user: Option<String>,
    #[arg(long, global = true, env = "ROBOHOME_PASSWORD", hide_env_values = true)]
    password: Option<String>,
    /// Installation special code sent in the handshake.
    #[arg(long, global = true, env = "ROBOHOME_CODE")]
    code: Option<String>,
    /// Pre-shared secret used to decrypt the handshake reply.
    #[arg(long, global = true, env = "ROBOHOME_SECRET", hide_env_values = true)]
    secret: Option<String>,
    /// Where the session and caches are kept.
    #[arg(long, global = true, env = "ROBOHOME_STATE")]
    state: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Authenticate and cache the session.
    Login,
    /// Refresh the cached device and robot tables.
    UpdateDevices,
    /// Refresh the cached map and status.
    UpdateInfo,
    /// Show the home plan.
    Map {
        /// Draw the plan as text.
        #[arg(long)]
        ascii: bool,
        /// Use the cached plan instead of fetching it.
        #[arg(long)]
        cached: bool,
    },
    /// Current status of every device, or of one.
    Status { oid: Option<u32> },
    /// List, submit and run scenarios
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Manage condition rules
    #[command(subcommand)]
    Rule(RuleCommand),
    /// Robot capabilities.
    Robots,
    /// Submit a scenario file, or a raw `SC|`/`ACT|` body, over SMS.
    SmsSend {
        file: PathBuf,
        /// Sender phone number.
        #[arg(long)]
        sender: Option<String>,
        /// Address of the SMS gateway, host:port.
        #[arg(long, env = "ROBOHOME_SMS_SERVER")]
        sms_server: Option<String>,
    },
    /// Camera feed (not available).
    Camera,
    /// Run a server with its socket listeners.
    Serve {
        /// Overrides the clock named in the config
        #[arg(long, value_enum)]
        clock: Option<ClockArg>,
        /// Virtual seconds per real second.
        #[arg(long, default_value_t = 1)]
        speed: i64,
        /// Dispatch trace file, rewritten as commands go out
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run scenarios in-process on the virtual clock and write the trace.
    Simulate {
        /// Scenario to activate; repeatable.
        #[arg(long = "activate", required = true)]
        activate: Vec<String>,
        /// Activation time, HH:MM or ISO-8601; default is the start time.
        #[arg(long)]
        at: Option<String>,
        /// How long to run, e.g. 90s, 30m, 3h.
        #[arg(long = "for", default_value = "24h")]
        duration: String,
        /// Trace file; printed to stdout when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Stored scenarios with their enabled flag and task count
    List,
    /// Print one scenario in listing form
    Show {
        name: String,
    },
    /// Submit a scenario listing file
    Add {
        file: PathBuf,
    },
    Enable {
        name: String,
    },
    Disable {
        name: String,
    },
    Delete {
        name: String,
    },
    /// Start a scenario and print its ticket
    Activate {
        name: String,
        /// HH:MM or ISO-8601.
        #[arg(long)]
        at: Option<String>,
    },
    /// Drop the pending commands of a ticket
    Cancel {
        ticket: u64,
    },
    /// Tickets issued so far
    Tickets,
}

#[derive(Subcommand)]
enum RuleCommand {
    List,
    /// Submit a rule file
    Add {
        file: PathBuf,
        /// Overrides the name given in the file.
        #[arg(long)]
        name: Option<String>,
    },
    Enable {
        name: String,
    },
    Disable {
        name: String,
    },
    Delete {
        name: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Wall,
    Virtual,
}

/// Everything printed by one command.
struct Report {
    reply: Response,
    text: String,
    warnings: Vec<String>,
    data: Option<serde_json::Value>,
}

impl Report {
    fn new(reply: Response, text: String) -> Self {
        Report {
            reply,
            text,
            warnings: Vec::new(),
            data: None,
        }
    }

    fn warn(mut self, w: Option<String>) -> Self {
        self.warnings.extend(w);
        self
    }

    fn emit(&self, json_mode: bool) -> i32 {
        let (code, reason) = match &self.reply {
            Response::Ok(_) => ("OK", None),
            Response::Err { code, reason } => (code.as_str(), reason.clone()),
        };
        if json_mode {
            let mut v = json!({
                "ok": self.reply.is_ok(),
                "code": code,
                "lines": self.reply.lines(),
                "warnings": self.warnings,
            });
            if let Some(r) = reason {
                v["reason"] = json!(r);
            }
            if let Some(d) = &self.data {
                v["data"] = d.clone();
            }
            println!("{v}");
        } else {
            for w in &self.warnings {
                eprintln!("warning: {w}");
            }
            if self.reply.is_ok() {
                print!("{}", self.text);
            } else {
                match reason {
                    Some(r) => eprintln!("error: {code}: {r}"),
                    None => eprintln!("error: {code}"),
                }
            }
        }
        exit::for_wire_code(code)
    }
}

struct Settings {
    cfg: ClientConfig,
    server: String,
    user: String,
    password: String,
    code: String,
    secret: String,
    state_path: PathBuf,
}

fn settings(cli: &Cli) -> anyhow::Result<Settings> {
    let cfg = match &cli.config {
        Some(p) => ClientConfig::load(p).map_err(|e| anyhow!(e))?,
        None => ClientConfig::default(),
    };
    let server = cli
        .server
        .clone()
        .or_else(|| cfg.server())
        .unwrap_or_else(|| "127.0.0.1:7700".to_string());
    let user = cli
        .user
        .clone()
        .or_else(|| cfg.user.clone())
        .context("no user given; pass --user or set it in the config file")?;
    let password = cli
        .password
        .clone()
        .or_else(|| cfg.password_for(&user))
        .context("no password given; pass --password or set ROBOHOME_PASSWORD")?;
    let code = cli
        .code
        .clone()
        .or_else(|| cfg.special_code.clone())
        .context("no special code given; pass --code")?;
    let secret = cli
        .secret
        .clone()
        .or_else(|| cfg.secret.clone())
        .context("no shared secret given; pass --secret")?;
    let state_path = cli
        .state
        .clone()
        .or_else(|| cfg.state.clone())
        .unwrap_or_else(default_state_path);
    Ok(Settings {
        cfg,
        server,
        user,
        password,
        code,
        secret,
        state_path,
    })
}

fn read_file(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_duration(text: &str) -> anyhow::Result<i64> {
    let text = text.trim();
    let (num, unit) = match text.find(|c: char| !c.is_ascii_digit()) {
        Some(i) => text.split_at(i),
        None => (text, "s"),
    };
    let n: i64 = num.parse().with_context(|| format!("bad duration {text:?}"))?;
    let mult = match unit {
        "s" => 1,
        "m" => 60,
        "h" => 3600,
        "d" => 86_400,
        _ => bail!("bad duration unit in {text:?}; use s, m, h or d"),
    };
    Ok(n * mult)
}

/// `HH:MM` (next occurrence) or ISO-8601.
fn parse_at(text: &str, now: Instant) -> anyhow::Result<Instant> {
    if let Some((h, m)) = text.split_once(':').filter(|_| text.len() <= 5) {
        let (h, m): (u8, u8) = (h.parse()?, m.parse()?);
        if h < 24 && m < 60 {
            return Ok(now.next_wall_time(h, m));
        }
    }
    Instant::parse_iso8601(text).with_context(|| format!("bad time {text:?}; use HH:MM or ISO-8601"))
}

fn run_client(cli: &Cli) -> anyhow::Result<i32> {
    let s = settings(cli)?;
    let state = ClientState::load(&s.state_path)?
        .unwrap_or_default()
        .rebind(&s.server, &s.code, &s.user);
    let sms_server = match &cli.command {
        Command::SmsSend { sms_server, .. } => sms_server.clone(),
        _ => None,
    }
    .or_else(|| s.cfg.sms_server());
    let transport = TcpTransport::new(s.server.clone(), sms_server);
    let mut client = Client::new(transport, state, s.secret.clone(), s.password.clone()).with_limits(s.cfg.staleness());
    let result = command(&mut client, cli, &s);
    // Keep the session even when the command failed.
    client
        .state
        .save(&s.state_path)
        .with_context(|| format!("cannot write {}", s.state_path.display()))?;
    let report = match result {
        Ok(r) => r,
        Err(ClientError::Transport(e)) => {
            eprintln!("error: {e}");
            return Ok(exit::UNREACHABLE);
        }
        Err(ClientError::Rejected { code, reason }) => Report::new(Response::err_with(&code, reason), String::new()),
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(exit::LOCAL);
        }
    };
    Ok(report.emit(cli.json))
}

fn command(client: &mut Client<TcpTransport>, cli: &Cli, s: &Settings) -> Result<Report, ClientError> {
    let local = |e: anyhow::Error| ClientError::Rejected {
        code: "LOCAL".into(),
        reason: format!("{e:#}"),
    };
    Ok(match &cli.command {
        Command::Login => {
            let ack = client.login()?;
            let text = ack.lines().join("\n") + "\n";
            Report::new(ack, text)
        }
        Command::UpdateDevices => {
            let r = client.update_devices()?;
            let text = render::devices(r.lines()) + "\n" + &render::robots(r.lines());
            Report::new(r, text)
        }
        Command::UpdateInfo => {
            let r = client.update_info()?;
            let text = render::status(r.lines(), client.tables().as_ref());
            Report::new(r, text).warn(client.device_warning())
        }
        Command::Map { ascii, cached } => {
            let (reply, warning) = if *cached {
                match &client.state.info {
                    Some(c) => (Response::Ok(c.lines.clone()), client.info_warning()),
                    None => (
                        Response::err_with("NO_CACHE", "nothing cached; run `robohome update-info`"),
                        None,
                    ),
                }
            } else {
                (client.update_info()?, None)
            };
            let map = match client.cached_map().filter(|_| reply.is_ok()) {
                Some(Ok(m)) => Some(m),
                Some(Err(e)) => {
                    return Err(ClientError::Rejected {
                        code: "MALFORMED_MAP".into(),
                        reason: e.0,
                    })
                }
                None => None,
            };
            let text = match (&map, ascii) {
                (Some(m), true) => ascii::render(m, Scale::default()),
                _ => reply.lines().join("\n") + "\n",
            };
            let mut report = Report::new(reply, text).warn(warning);
            report.data = map.map(|m| serde_json::to_value(m).expect("map serializes"));
            report
        }
        Command::Status { oid } => {
            let oid_text = oid.map(|o| o.to_string());
            let params: Vec<(&str, &str)> = oid_text.iter().map(|o| ("oid", o.as_str())).collect();
            let r = client.call("status.aspx", &params)?;
            let text = render::status(r.lines(), client.tables().as_ref());
            Report::new(r, text).warn(client.device_warning())
        }
        Command::Scenario(sc) => scenario(client, sc).map_err(|e| match e.downcast::<ClientError>() {
            Ok(c) => c,
            Err(e) => local(e),
        })?,
        Command::Rule(rc) => rule(client, rc).map_err(|e| match e.downcast::<ClientError>() {
            Ok(c) => c,
            Err(e) => local(e),
        })?,
        Command::Robots => {
            let r = client.call("robots.aspx", &[])?;
            let text = render::robots(r.lines());
            Report::new(r, text)
        }
        Command::SmsSend { file, sender, .. } => {
            let text = read_file(file).map_err(local)?;
            let sender = sender
                .clone()
                .or_else(|| s.cfg.phone())
                .ok_or_else(|| local(anyhow!("no sender; pass --sender")))?;
            let warning = client.device_warning();
            let body = client.sms_body(&text)?;
            let r = client.sms_send(&sender, &body)?;
            let out = format!("sent {} chars: {body}\n", body.chars().count());
            let out = out + &render::scenarios(r.lines()) + &render::tickets(r.lines());
            Report::new(r, out).warn(warning)
        }
        Command::Camera => {
            let r = client.call("camera.aspx", &[])?;
            Report::new(r, String::new())
        }
        Command::Serve { .. } | Command::Simulate { .. } => unreachable!("handled before connecting"),
    })
}

fn scenario(client: &mut Client<TcpTransport>, cmd: &ScenarioCommand) -> anyhow::Result<Report> {
    let page = "scenario.aspx";
    let r = match cmd {
        ScenarioCommand::List => {
            let r = client.call(page, &[("action", "list")])?;
            let t = render::scenarios(r.lines());
            return Ok(Report::new(r, t));
        }
        ScenarioCommand::Show { name } => {
            let r = client.call(page, &[("action", "show"), ("name", name)])?;
            let t = render::text(r.lines());
            return Ok(Report::new(r, t));
        }
        ScenarioCommand::Add { file } => {
            let body = read_file(file)?;
            let r = client.call(page, &[("action", "add"), ("body", &body)])?;
            let t = render::scenarios(r.lines());
            return Ok(Report::new(r, t));
        }
        ScenarioCommand::Enable { name } => client.call(page, &[("action", "enable"), ("name", name)])?,
        ScenarioCommand::Disable { name } => client.call(page, &[("action", "disable"), ("name", name)])?,
        ScenarioCommand::Delete { name } => client.call(page, &[("action", "delete"), ("name", name)])?,
        ScenarioCommand::Activate { name, at } => {
            let mut params = vec![("action", "activate"), ("name", name.as_str())];
            if let Some(at) = at {
                params.push(("at", at));
            }
            client.call(page, &params)?
        }
        ScenarioCommand::Cancel { ticket } => {
            let t = ticket.to_string();
            client.call(page, &[("action", "cancel"), ("ticket", &t)])?
        }
        ScenarioCommand::Tickets => {
            let r = client.call(page, &[("action", "tickets")])?;
            let t = render::tickets(r.lines());
            return Ok(Report::new(r, t));
        }
    };
    let text = r.lines().iter().map(|l| format!("{l}\n")).collect();
    Ok(Report::new(r, text))
}

fn rule(client: &mut Client<TcpTransport>, cmd: &RuleCommand) -> anyhow::Result<Report> {
    let page = "rule.aspx";
    let r = match cmd {
        RuleCommand::List => client.call(page, &[("action", "list")])?,
        RuleCommand::Add { file, name } => {
            let body = read_file(file)?;
            let mut params = vec![("action", "add"), ("body", body.as_str())];
            if let Some(n) = name {
                params.push(("name", n));
            }
            client.call(page, &params)?
        }
        RuleCommand::Enable { name } => client.call(page, &[("action", "enable"), ("name", name)])?,
        RuleCommand::Disable { name } => client.call(page, &[("action", "disable"), ("name", name)])?,
        RuleCommand::Delete { name } => client.call(page, &[("action", "delete"), ("name", name)])?,
    };
    let text = render::rules(r.lines());
    Ok(Report::new(r, text))
}

fn server_config(cli: &Cli) -> anyhow::Result<ServerConfig> {
    let path = cli
        .config
        .as_deref()
        .context("serve and simulate need --config <server.json>")?;
    ServerConfig::load(path).map_err(|e| anyhow!(e))
}

fn serve(cli: &Cli, clock: Option<ClockArg>, speed: i64, trace: Option<PathBuf>) -> anyhow::Result<i32> {
    let mut cfg = server_config(cli)?;
    if let Some(c) = clock {
        cfg.clock = match c {
            ClockArg::Wall => ClockMode::Wall,
            ClockArg::Virtual => ClockMode::Virtual,
        };
    }
    if trace.is_some() {
        cfg.trace = trace;
    }
    let home = Home::from_config(&cfg)?;
    let mut now = home.now();
    let (handle, join) = spawn_home(home);
    let servers = listen(&handle, &cfg.listen)?;
    println!("query  {}", servers.gprs);
    println!("sms    {}", servers.sms);
    println!("http   {}", servers.http);
    if cfg.clock == ClockMode::Virtual && speed > 0 {
        loop {
            thread::sleep(Duration::from_secs(1));
            now = now.plus_secs(speed);
            match handle.tick(now) {
                Some(0) => {}
                Some(_) => {
                    if let Some(Err(e)) = handle.inspect(|h| h.write_trace()) {
                        log::warn!("trace write failed: {e}");
                    }
                }
                None => break,
            }
        }
    }
    join.join().map_err(|_| anyhow!("server thread panicked"))?;
    Ok(exit::OK)
}

fn simulate(
    cli: &Cli,
    names: &[String],
    at: Option<&str>,
    duration: &str,
    trace: Option<&Path>,
) -> anyhow::Result<i32> {
    let mut cfg = server_config(cli)?;
    cfg.clock = ClockMode::Virtual;
    cfg.store = None;
    let mut home = Home::from_config(&cfg)?;
    let start = home.now();
    let at = match at {
        Some(t) => parse_at(t, start)?,
        None => start,
    };
    for name in names {
        home.rt.activate_scenario(name, at)?;
    }
    home.tick(at.max(start).plus_secs(parse_duration(duration)?))?;
    match trace {
        Some(path) => {
            home.rt.log().write_trace(path)?;
            println!("{} dispatches written to {}", home.rt.log().len(), path.display());
        }
        None => print!("{}", home.rt.log().to_jsonl()),
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Serve { clock, speed, trace } => serve(&cli, *clock, *speed, trace.clone()),
        Command::Simulate {
            activate,
            at,
            duration,
            trace,
        } => simulate(&cli, activate, at.as_deref(), duration, trace.as_deref()),
        _ => run_client(&cli),
    };
    let code = match result {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::LOCAL
        }
    };
    ExitCode::from(code as u8)
}
