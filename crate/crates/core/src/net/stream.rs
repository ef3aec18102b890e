use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::frames::is_keyframe;
use super::mailbox::Mailboxes;
use super::packet::{encode_packet, read_packet, SensorPacket};
use super::NetError;

pub const DEFAULT_STREAM_PORT: u16 = 7401;
/// Packets a subscriber may lag behind before it is dropped.
pub const DEFAULT_SUBSCRIBER_QUEUE: usize = 64;
const HANDSHAKE: &str = "SUB";

pub(crate) fn unix_micros() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_micros() as u64)
        .unwrap_or(0)
}

struct Outbox {
    tx: SyncSender<Arc<Vec<u8>>>,
}

#[derive(Default)]
struct Hub {
    subscribers: Vec<Outbox>,
    /// Latest keyframe per camera, replayed to late subscribers so they can
    /// decode the predicted frames that follow.
    keyframes: BTreeMap<u16, Arc<Vec<u8>>>,
    dropped: u64,
    accepted: u64,
}

/// Pushes every published packet to all subscribed clients.
pub struct StreamServer {
    addr: SocketAddr,
    hub: Arc<Mutex<Hub>>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl StreamServer {
    pub fn bind<A: ToSocketAddrs>(addr: A, queue_bound: usize) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let hub = Arc::new(Mutex::new(Hub::default()));
        let stop = Arc::new(AtomicBool::new(false));
        let (hub2, stop2) = (hub.clone(), stop.clone());
        let accept = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let hub = hub2.clone();
                std::thread::spawn(move || admit(conn, hub, queue_bound.max(1)));
            }
        });
        Ok(StreamServer {
            addr,
            hub,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Sends one packet to every subscriber and returns its size on the
    /// wire. Subscribers whose queue is full are disconnected.
    pub fn publish(&self, packet: &SensorPacket) -> Result<usize, NetError> {
        let bytes = Arc::new(encode_packet(packet)?);
        let mut hub = self.hub.lock().unwrap();
        if is_keyframe(packet) {
            hub.keyframes.insert(packet.camera_id, bytes.clone());
        }
        let before = hub.subscribers.len();
        hub.subscribers.retain(|s| match s.tx.try_send(bytes.clone()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => false,
        });
        hub.dropped += (before - hub.subscribers.len()) as u64;
        Ok(bytes.len())
    }

    pub fn subscriber_count(&self) -> usize {
        self.hub.lock().unwrap().subscribers.len()
    }

    /// Subscribers disconnected so far, for being too slow or gone.
    pub fn dropped_subscribers(&self) -> u64 {
        self.hub.lock().unwrap().dropped
    }

    pub fn accepted_subscribers(&self) -> u64 {
        self.hub.lock().unwrap().accepted
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        self.hub.lock().unwrap().subscribers.clear();
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_now();
        }
    }
}

fn admit(conn: TcpStream, hub: Arc<Mutex<Hub>>, queue_bound: usize) {
    let _ = conn.set_read_timeout(Some(Duration::from_secs(5)));
    let mut line = String::new();
    {
        let Ok(read_half) = conn.try_clone() else { return };
        let mut reader = BufReader::new(read_half);
        if reader.read_line(&mut line).is_err() || line.trim_end() != HANDSHAKE {
            let _ = conn.shutdown(Shutdown::Both);
            return;
        }
    }
    let _ = conn.set_nodelay(true);
    let (tx, rx) = sync_channel::<Arc<Vec<u8>>>(queue_bound + MAX_CAMERAS_REPLAYED);
    {
        let mut hub = hub.lock().unwrap();
        for kf in hub.keyframes.values() {
            let _ = tx.try_send(kf.clone());
        }
        hub.subscribers.push(Outbox { tx });
        hub.accepted += 1;
    }
    let mut out = conn;
    for bytes in rx {
        if out.write_all(&bytes).is_err() {
            break;
        }
    }
    let _ = out.shutdown(Shutdown::Both);
}

const MAX_CAMERAS_REPLAYED: usize = 16;

/// Blocking client side of one stream connection.
pub struct Subscriber {
    reader: BufReader<TcpStream>,
    bytes_read: u64,
}

impl Subscriber {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> std::io::Result<Self> {
        let mut stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.write_all(format!("{HANDSHAKE}\n").as_bytes())?;
        Ok(Subscriber {
            reader: BufReader::with_capacity(1 << 16, stream),
            bytes_read: 0,
        })
    }

    pub fn set_read_timeout(&self, t: Option<Duration>) -> std::io::Result<()> {
        self.reader.get_ref().set_read_timeout(t)
    }

    /// Next packet; `Ok(None)` when the server closed the stream cleanly.
    /// A stream cut inside a packet is an error and nothing partial is
    /// returned.
    pub fn next_packet(&mut self) -> Result<Option<SensorPacket>, NetError> {
        let p = read_packet(&mut self.reader)?;
        if let Some(p) = &p {
            self.bytes_read += p.encoded_len() as u64;
        }
        Ok(p)
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes_read
    }

    fn stream(&self) -> &TcpStream {
        self.reader.get_ref()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FeederOptions {
    pub reconnect: bool,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for FeederOptions {
    fn default() -> Self {
        FeederOptions {
            reconnect: true,
            initial_backoff: Duration::from_millis(100),
            max_backoff: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeederStatus {
    pub connected: bool,
    pub connects: u32,
    /// Times the stream ended, cleanly or not.
    pub stream_ends: u32,
    pub last_error: Option<String>,
}

/// Background reader feeding one server's packets into the mailboxes.
pub struct FeederHandle {
    stop: Arc<AtomicBool>,
    current: Arc<Mutex<Option<TcpStream>>>,
    status: Arc<Mutex<FeederStatus>>,
    thread: Option<JoinHandle<()>>,
}

impl FeederHandle {
    pub fn status(&self) -> FeederStatus {
        self.status.lock().unwrap().clone()
    }

    pub fn is_finished(&self) -> bool {
        self.thread.as_ref().is_none_or(|t| t.is_finished())
    }

    pub fn stop(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(s) = self.current.lock().unwrap().as_ref() {
            let _ = s.shutdown(Shutdown::Both);
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for FeederHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_now();
        }
    }
}

pub fn spawn_feeder(addr: String, mailboxes: Arc<Mailboxes>, options: FeederOptions) -> FeederHandle {
    let stop = Arc::new(AtomicBool::new(false));
    let current = Arc::new(Mutex::new(None::<TcpStream>));
    let status = Arc::new(Mutex::new(FeederStatus::default()));
    let (stop2, current2, status2) = (stop.clone(), current.clone(), status.clone());
    let thread = std::thread::spawn(move || {
        let mut backoff = options.initial_backoff;
        while !stop2.load(Ordering::SeqCst) {
            match Subscriber::connect(addr.as_str()) {
                Ok(mut sub) => {
                    backoff = options.initial_backoff;
                    *current2.lock().unwrap() = sub.stream().try_clone().ok();
                    {
                        let mut st = status2.lock().unwrap();
                        st.connected = true;
                        st.connects += 1;
                    }
                    let mut seen = BTreeSet::new();
                    let end = loop {
                        match sub.next_packet() {
                            Ok(Some(p)) => {
                                seen.insert(p.camera_id);
                                let len = p.encoded_len();
                                mailboxes.put(p, len, unix_micros());
                            }
                            Ok(None) => break None,
                            Err(e) => break Some(e.to_string()),
                        }
                    };
                    // Keyframes from the old connection must not seed
                    // predicted frames from the next one.
                    for cam in seen {
                        mailboxes.reset_camera(cam);
                    }
                    *current2.lock().unwrap() = None;
                    let mut st = status2.lock().unwrap();
                    st.connected = false;
                    st.stream_ends += 1;
                    if end.is_some() {
                        st.last_error = end;
                    }
                }
                Err(e) => status2.lock().unwrap().last_error = Some(e.to_string()),
            }
            if !options.reconnect {
                break;
            }
            let deadline = std::time::Instant::now() + backoff;
            while std::time::Instant::now() < deadline && !stop2.load(Ordering::SeqCst) {
                std::thread::sleep(Duration::from_millis(10));
            }
            backoff = (backoff * 2).min(options.max_backoff);
        }
    });
    FeederHandle {
        stop,
        current,
        status,
        thread: Some(thread),
    }
}
