//! TCP pub/sub server. One accept thread plus a reader and a writer thread per
//! client; the simulation thread only touches the inbound mailbox and the
//! bounded outbound queues, so it never blocks on a socket.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::frame::{encode_frame, Frame, FrameDecoder};

pub const DEFAULT_PORT: u16 = 9090;
pub const DEFAULT_QUEUE_BOUND: usize = 1024;

const ACCEPT_POLL: Duration = Duration::from_millis(2);

pub type ClientId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct Inbound {
    pub client: ClientId,
    pub frame: Frame,
}

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub bind: SocketAddr,
    /// Outbound frames buffered per client before it is dropped as too slow.
    pub queue_bound: usize,
}

impl BridgeConfig {
    pub fn localhost(port: u16) -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], port)),
            queue_bound: DEFAULT_QUEUE_BOUND,
        }
    }
}

struct Client {
    id: ClientId,
    tx: SyncSender<Arc<[u8]>>,
    stream: TcpStream,
}

impl Client {
    fn close(&self) {
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}

struct Shared {
    clients: Mutex<Vec<Client>>,
    shutdown: AtomicBool,
    now_ns: AtomicU64,
    next_id: AtomicU64,
    dropped: AtomicU64,
}

impl Shared {
    fn clients(&self) -> MutexGuard<'_, Vec<Client>> {
        // A panicking I/O thread cannot leave the list half-updated.
        self.clients.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn remove(&self, id: ClientId) {
        let mut clients = self.clients();
        if let Some(pos) = clients.iter().position(|c| c.id == id) {
            clients.remove(pos).close();
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Drops the client's queue without closing the socket, so the writer
    /// flushes what is queued and then closes.
    fn detach(&self, id: ClientId) {
        let mut clients = self.clients();
        if let Some(pos) = clients.iter().position(|c| c.id == id) {
            clients.remove(pos);
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn send_to(&self, id: ClientId, bytes: Arc<[u8]>) {
        let failed = {
            let clients = self.clients();
            match clients.iter().find(|c| c.id == id) {
                Some(c) => c.tx.try_send(bytes).is_err(),
                None => false,
            }
        };
        if failed {
            self.remove(id);
        }
    }
}

pub struct BridgeServer {
    shared: Arc<Shared>,
    mailbox: Receiver<Inbound>,
    local_addr: SocketAddr,
    accept: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for BridgeServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeServer")
            .field("local_addr", &self.local_addr)
            .field("clients", &self.client_count())
            .finish_non_exhaustive()
    }
}

impl BridgeServer {
    pub fn bind(config: &BridgeConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(config.bind)?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            clients: Mutex::new(Vec::new()),
            shutdown: AtomicBool::new(false),
            now_ns: AtomicU64::new(0),
            next_id: AtomicU64::new(0),
            dropped: AtomicU64::new(0),
        });
        let (inbox_tx, mailbox) = mpsc::channel();
        let bound = config.queue_bound.max(1);
        let accept = {
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name("bridge-accept".into())
                .spawn(move || accept_loop(listener, shared, inbox_tx, bound))?
        };
        Ok(Self {
            shared,
            mailbox,
            local_addr,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients().len()
    }

    /// Clients disconnected so far for a full queue, a send failure or a
    /// protocol violation.
    pub fn dropped_count(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }

    /// Blocks until `n` clients are connected or `timeout` passes.
    pub fn wait_for_clients(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while self.client_count() < n {
            if Instant::now() >= deadline {
                return false;
            }
            thread::sleep(ACCEPT_POLL);
        }
        true
    }

    /// Simulation time used to stamp error frames produced by reader threads.
    pub fn set_time(&self, stamp_ns: u64) {
        self.shared.now_ns.store(stamp_ns, Ordering::Relaxed);
    }

    /// Queues already-encoded bytes to every client. Clients whose queue is
    /// full or closed are disconnected.
    pub fn broadcast(&self, bytes: &[u8]) {
        let bytes: Arc<[u8]> = Arc::from(bytes);
        let mut clients = self.shared.clients();
        let mut i = 0;
        while i < clients.len() {
            match clients[i].tx.try_send(Arc::clone(&bytes)) {
                Ok(()) => i += 1,
                Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                    clients.remove(i).close();
                    self.shared.dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }

    pub fn send_to(&self, client: ClientId, frame: &Frame) {
        if let Ok(bytes) = encode_frame(frame) {
            self.shared.send_to(client, Arc::from(bytes));
        }
    }

    /// Every command frame received since the previous drain, in arrival order.
    pub fn drain(&self) -> Vec<Inbound> {
        self.mailbox.try_iter().collect()
    }
}

impl Drop for BridgeServer {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::Relaxed);
        // Writers flush their queues, then close their sockets.
        self.shared.clients().clear();
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, inbox: Sender<Inbound>, bound: usize) {
    while !shared.shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                if let Err(e) = register(stream, &shared, &inbox, bound) {
                    eprintln!("bridge: client setup failed: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(e) => {
                eprintln!("bridge: accept failed: {e}");
                thread::sleep(ACCEPT_POLL);
            }
        }
    }
}

fn register(
    stream: TcpStream,
    shared: &Arc<Shared>,
    inbox: &Sender<Inbound>,
    bound: usize,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
    let (tx, rx) = mpsc::sync_channel::<Arc<[u8]>>(bound);
    let reader = stream.try_clone()?;
    let writer = stream.try_clone()?;
    shared.clients().push(Client { id, tx, stream });

    {
        let shared = Arc::clone(shared);
        thread::Builder::new()
            .name(format!("bridge-write-{id}"))
            .spawn(move || write_loop(writer, rx, id, shared))?;
    }
    {
        let shared = Arc::clone(shared);
        let inbox = inbox.clone();
        thread::Builder::new()
            .name(format!("bridge-read-{id}"))
            .spawn(move || read_loop(reader, id, shared, inbox))?;
    }
    Ok(())
}

fn write_loop(mut stream: TcpStream, rx: Receiver<Arc<[u8]>>, id: ClientId, shared: Arc<Shared>) {
    for bytes in rx {
        if stream.write_all(&bytes).is_err() {
            shared.remove(id);
            return;
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
}

fn read_loop(mut stream: TcpStream, id: ClientId, shared: Arc<Shared>, inbox: Sender<Inbound>) {
    let mut decoder = FrameDecoder::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        decoder.push(&buf[..n]);
        while let Some(next) = decoder.next_frame() {
            match next {
                Ok(frame) => {
                    if inbox.send(Inbound { client: id, frame }).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    let stamp = shared.now_ns.load(Ordering::Relaxed);
                    if let Ok(bytes) = encode_frame(&Frame::fault(stamp, e.code(), e.to_string())) {
                        shared.send_to(id, Arc::from(bytes));
                    }
                    if e.is_fatal() {
                        shared.detach(id);
                        return;
                    }
                }
            }
        }
    }
    shared.remove(id);
}
