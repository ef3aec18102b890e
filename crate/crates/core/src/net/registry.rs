use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;

pub const DEFAULT_REGISTRY_PORT: u16 = 7400;
pub const DEFAULT_TTL: Duration = Duration::from_secs(10);
pub const REGISTRY_ENV: &str = "DEPTHGRID_REGISTRY";

/// Registry address from the environment, else the local default.
pub fn registry_endpoint() -> String {
    std::env::var(REGISTRY_ENV).unwrap_or_else(|_| format!("127.0.0.1:{DEFAULT_REGISTRY_PORT}"))
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone)]
pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            start: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }
}

/// Clock advanced by hand, for tests.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    now: Arc<Mutex<Duration>>,
}

impl ManualClock {
    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub server_name: String,
    pub host: String,
    pub port: u16,
    pub camera_ids: Vec<u16>,
    /// Clock reading at the last REGISTER or PING.
    pub last_heartbeat: Duration,
}

impl RegistryEntry {
    pub fn endpoint(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("duplicate")]
    Duplicate,
    #[error("unknown server")]
    Unknown,
    #[error("{0}")]
    Malformed(String),
    #[error("registry replied: {0}")]
    Remote(String),
}

/// The naming service state. Entries expire when not refreshed within the
/// TTL.
pub struct Registry<C: Clock = SystemClock> {
    clock: C,
    ttl: Duration,
    entries: BTreeMap<String, RegistryEntry>,
}

impl<C: Clock> Registry<C> {
    pub fn new(clock: C, ttl: Duration) -> Self {
        Registry {
            clock,
            ttl,
            entries: BTreeMap::new(),
        }
    }

    fn expire(&mut self) {
        let now = self.clock.now();
        let ttl = self.ttl;
        self.entries
            .retain(|_, e| now.saturating_sub(e.last_heartbeat) <= ttl);
    }

    pub fn register(
        &mut self,
        name: &str,
        host: &str,
        port: u16,
        camera_ids: Vec<u16>,
    ) -> Result<(), RegistryError> {
        self.expire();
        if self.entries.contains_key(name) {
            return Err(RegistryError::Duplicate);
        }
        if port == 0 {
            return Err(RegistryError::Malformed("port must be in [1, 65535]".into()));
        }
        self.entries.insert(
            name.to_string(),
            RegistryEntry {
                server_name: name.to_string(),
                host: host.to_string(),
                port,
                camera_ids,
                last_heartbeat: self.clock.now(),
            },
        );
        Ok(())
    }

    pub fn ping(&mut self, name: &str) -> Result<(), RegistryError> {
        self.expire();
        let now = self.clock.now();
        let e = self.entries.get_mut(name).ok_or(RegistryError::Unknown)?;
        e.last_heartbeat = now;
        Ok(())
    }

    pub fn unregister(&mut self, name: &str) -> Result<(), RegistryError> {
        self.expire();
        self.entries
            .remove(name)
            .map(|_| ())
            .ok_or(RegistryError::Unknown)
    }

    pub fn list(&mut self) -> Vec<RegistryEntry> {
        self.expire();
        self.entries.values().cloned().collect()
    }

    /// Executes one protocol line and returns the full reply, newline
    /// terminated.
    pub fn handle_line(&mut self, line: &str) -> String {
        let mut words = line.split_whitespace();
        let reply = |r: Result<(), RegistryError>| match r {
            Ok(()) => "OK\n".to_string(),
            Err(e) => format!("ERR {e}\n"),
        };
        match words.next() {
            Some("REGISTER") => {
                let args: Vec<&str> = words.collect();
                if args.len() < 3 {
                    return "ERR usage: REGISTER <name> <host> <port> <camera_ids...>\n".into();
                }
                let port = match args[2].parse::<u16>() {
                    Ok(p) => p,
                    Err(_) => return format!("ERR bad port {}\n", args[2]),
                };
                let ids: Result<Vec<u16>, _> = args[3..].iter().map(|s| s.parse::<u16>()).collect();
                match ids {
                    Ok(ids) => reply(self.register(args[0], args[1], port, ids)),
                    Err(_) => "ERR bad camera id\n".into(),
                }
            }
            Some("PING") => match (words.next(), words.next()) {
                (Some(name), None) => reply(self.ping(name)),
                _ => "ERR usage: PING <name>\n".into(),
            },
            Some("UNREGISTER") => match (words.next(), words.next()) {
                (Some(name), None) => reply(self.unregister(name)),
                _ => "ERR usage: UNREGISTER <name>\n".into(),
            },
            Some("LIST") if words.next().is_none() => {
                let now = self.clock.now();
                let mut out = String::new();
                for e in self.list() {
                    out.push_str(&format!(
                        "ENTRY {} {} {} {}",
                        e.server_name,
                        e.host,
                        e.port,
                        now.saturating_sub(e.last_heartbeat).as_millis()
                    ));
                    for id in &e.camera_ids {
                        out.push_str(&format!(" {id}"));
                    }
                    out.push('\n');
                }
                out.push_str("END\n");
                out
            }
            Some(other) => format!("ERR unknown command {other}\n"),
            None => "ERR empty command\n".into(),
        }
    }
}

/// TCP front end for a [`Registry`], one thread per connection.
pub struct RegistryServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl RegistryServer {
    pub fn spawn<A: ToSocketAddrs>(addr: A, ttl: Duration) -> std::io::Result<Self> {
        Self::spawn_with_clock(addr, ttl, SystemClock::default())
    }

    pub fn spawn_with_clock<A: ToSocketAddrs, C: Clock + 'static>(
        addr: A,
        ttl: Duration,
        clock: C,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let registry = Arc::new(Mutex::new(Registry::new(clock, ttl)));
        let stop2 = stop.clone();
        let accept = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let registry = registry.clone();
                std::thread::spawn(move || serve_connection(conn, registry));
            }
        });
        Ok(RegistryServer {
            addr,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop ends (it only ends on `shutdown`).
    pub fn join(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for RegistryServer {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_accepting();
        }
    }
}

fn serve_connection<C: Clock>(conn: TcpStream, registry: Arc<Mutex<Registry<C>>>) {
    let Ok(write_half) = conn.try_clone() else { return };
    let mut writer = std::io::BufWriter::new(write_half);
    let reader = BufReader::new(conn);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        let reply = registry.lock().unwrap().handle_line(&line);
        if writer.write_all(reply.as_bytes()).and_then(|_| writer.flush()).is_err() {
            break;
        }
    }
}

/// Blocking client for the registry text protocol.
pub struct RegistryClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl RegistryClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(Duration::from_secs(5)))?;
        Ok(RegistryClient {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }

    fn request(&mut self, line: &str) -> Result<String, super::NetError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.read_line()
    }

    fn read_line(&mut self) -> Result<String, super::NetError> {
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(super::NetError::Protocol("registry closed the connection".into()));
        }
        Ok(reply.trim_end().to_string())
    }

    fn expect_ok(reply: String) -> Result<(), super::NetError> {
        match reply.as_str() {
            "OK" => Ok(()),
            "ERR duplicate" => Err(RegistryError::Duplicate.into()),
            "ERR unknown server" => Err(RegistryError::Unknown.into()),
            _ => Err(RegistryError::Remote(reply).into()),
        }
    }

    pub fn register(&mut self, name: &str, host: &str, port: u16, camera_ids: &[u16]) -> Result<(), super::NetError> {
        let mut line = format!("REGISTER {name} {host} {port}");
        for id in camera_ids {
            line.push_str(&format!(" {id}"));
        }
        let reply = self.request(&line)?;
        Self::expect_ok(reply)
    }

    pub fn ping(&mut self, name: &str) -> Result<(), super::NetError> {
        let reply = self.request(&format!("PING {name}"))?;
        Self::expect_ok(reply)
    }

    pub fn unregister(&mut self, name: &str) -> Result<(), super::NetError> {
        let reply = self.request(&format!("UNREGISTER {name}"))?;
        Self::expect_ok(reply)
    }

    pub fn list(&mut self) -> Result<Vec<RegistryEntry>, super::NetError> {
        let mut line = self.request("LIST")?;
        let mut out = Vec::new();
        loop {
            if line == "END" {
                return Ok(out);
            }
            out.push(parse_entry(&line)?);
            line = self.read_line()?;
        }
    }
}

fn parse_entry(line: &str) -> Result<RegistryEntry, super::NetError> {
    let bad = || super::NetError::Protocol(format!("bad registry line: {line}"));
    let w: Vec<&str> = line.split_whitespace().collect();
    if w.len() < 5 || w[0] != "ENTRY" {
        return Err(bad());
    }
    let port = w[3].parse().map_err(|_| bad())?;
    let age_ms: u64 = w[4].parse().map_err(|_| bad())?;
    let camera_ids = w[5..]
        .iter()
        .map(|s| s.parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    Ok(RegistryEntry {
        server_name: w[1].to_string(),
        host: w[2].to_string(),
        port,
        camera_ids,
        // Reported relative to the reader's now.
        last_heartbeat: Duration::from_millis(age_ms),
    })
}
