//! WebSocket endpoint for human players.
//!
//! Every text message is one frame of the shared line protocol. The server
//! pushes `snapshot` notifications after each tick and an `episode_end`
//! notification when an episode finishes. Clients send
//! `{"kind": "notification", "method": "command", "payload": {"slot": <agent>,
//! "action": <index>}}`; a `request` of the same shape is acknowledged with
//! an empty response. Malformed input is answered with an error frame.

use std::collections::BTreeSet;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde_json::json;
use tungstenite::{Message, WebSocket};

use rlframe_core::wire::{self, ErrorCode, Frame, FrameKind};

use crate::slot::HumanSlot;
use crate::snapshot::Broadcaster;
use crate::HumanError;

const POLL: Duration = Duration::from_millis(5);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    /// Frames buffered per client before new ones are dropped.
    pub queue_capacity: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8765,
            queue_capacity: 64,
        }
    }
}

/// A running server. Dropping it stops accepting and disconnects clients.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    clients: Arc<AtomicUsize>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        self.clients.load(Ordering::SeqCst)
    }

    /// Blocks until at least `n` clients are connected or `timeout` passes.
    pub fn wait_for_clients(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while self.client_count() < n {
            if Instant::now() >= deadline {
                return false;
            }
            thread::sleep(POLL);
        }
        true
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Starts accepting clients that steer `slots` and watch `broadcaster`.
pub fn serve(config: &ServerConfig, slots: Vec<HumanSlot>, broadcaster: Broadcaster) -> Result<ServerHandle, HumanError> {
    let listener = TcpListener::bind((config.host.as_str(), config.port)).map_err(|e| {
        if e.kind() == ErrorKind::AddrInUse {
            HumanError::PortInUse(config.port)
        } else {
            HumanError::Io(e)
        }
    })?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let clients = Arc::new(AtomicUsize::new(0));
    let capacity = config.queue_capacity.max(1);
    let acceptor = {
        let stop = Arc::clone(&stop);
        let clients = Arc::clone(&clients);
        thread::Builder::new().name("human-accept".into()).spawn(move || {
            let mut workers = Vec::new();
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let ctx = Client {
                            slots: slots.clone(),
                            broadcaster: broadcaster.clone(),
                            stop: Arc::clone(&stop),
                            clients: Arc::clone(&clients),
                            capacity,
                        };
                        let spawned = thread::Builder::new()
                            .name(format!("human-{peer}"))
                            .spawn(move || ctx.run(stream, peer));
                        match spawned {
                            Ok(h) => workers.push(h),
                            Err(e) => log::warn!("cannot serve {peer}: {e}"),
                        }
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        thread::sleep(POLL);
                    }
                }
                workers.retain(|h| !h.is_finished());
            }
            for h in workers {
                let _ = h.join();
            }
        })?
    };
    log::info!("human play server listening on ws://{addr}");
    Ok(ServerHandle {
        addr,
        stop,
        clients,
        acceptor: Some(acceptor),
    })
}

struct Client {
    slots: Vec<HumanSlot>,
    broadcaster: Broadcaster,
    stop: Arc<AtomicBool>,
    clients: Arc<AtomicUsize>,
    capacity: usize,
}

impl Client {
    fn run(self, stream: TcpStream, peer: SocketAddr) {
        let ws = stream
            .set_nonblocking(false)
            .and_then(|_| stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT)))
            .map_err(|e| e.to_string())
            .and_then(|_| tungstenite::accept(stream).map_err(|e| e.to_string()));
        let mut ws = match ws {
            Ok(ws) => ws,
            Err(e) => {
                log::warn!("websocket handshake with {peer} failed: {e}");
                return;
            }
        };
        if let Err(e) = ws.get_ref().set_read_timeout(Some(POLL)) {
            log::warn!("{peer}: {e}");
            return;
        }
        let (tx, rx) = sync_channel(self.capacity);
        self.broadcaster.subscribe(tx);
        self.clients.fetch_add(1, Ordering::SeqCst);
        log::info!("human client {peer} connected");
        let mut touched = BTreeSet::new();
        self.pump(&mut ws, &rx, &mut touched);
        for slot in self.slots.iter().filter(|s| touched.contains(&s.agent_index())) {
            slot.clear();
        }
        self.clients.fetch_sub(1, Ordering::SeqCst);
        log::info!("human client {peer} disconnected");
    }

    fn pump(&self, ws: &mut WebSocket<TcpStream>, rx: &Receiver<Arc<str>>, touched: &mut BTreeSet<usize>) {
        while !self.stop.load(Ordering::SeqCst) {
            loop {
                match rx.try_recv() {
                    Ok(line) => {
                        if ws.send(Message::text(line.to_string())).is_err() {
                            return;
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => return,
                }
            }
            match ws.read() {
                Ok(Message::Text(text)) => {
                    if let Some(reply) = self.command(&text, touched) {
                        if ws.send(Message::text(reply.encode())).is_err() {
                            return;
                        }
                    }
                }
                Ok(Message::Close(_)) => return,
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(_) => return,
            }
        }
        let _ = ws.close(None);
        let _ = ws.flush();
    }

    /// Applies one client frame; returns the reply, if any.
    fn command(&self, text: &str, touched: &mut BTreeSet<usize>) -> Option<Frame> {
        let frame = match Frame::decode(text) {
            Ok(f) => f,
            Err(e) => return Some(Frame::error(0, "command", ErrorCode::BadFrame, &e.to_string())),
        };
        let ack = frame.kind == FrameKind::Request;
        let fail = |code, message: String| Some(Frame::error(frame.id, &frame.method, code, &message));
        if !matches!(frame.kind, FrameKind::Request | FrameKind::Notification) {
            return fail(ErrorCode::BadFrame, "expected a request or notification".into());
        }
        if frame.method != "command" {
            return fail(ErrorCode::UnknownMethod, format!("unknown method `{}`", frame.method));
        }
        let parsed = wire::field_u64(&frame.payload, "slot")
            .and_then(|slot| Ok((slot, wire::field_u64(&frame.payload, "action")?)));
        let (agent, action) = match parsed {
            Ok(v) => v,
            Err(e) => return fail(ErrorCode::InvalidParams, e.to_string()),
        };
        let Some(slot) = self.slots.iter().find(|s| s.agent_index() as u64 == agent) else {
            return fail(ErrorCode::InvalidParams, format!("no human slot for agent {agent}"));
        };
        if action >= slot.action_limit() as u64 {
            return fail(
                ErrorCode::InvalidAction,
                format!("action {action} outside [0, {})", slot.action_limit()),
            );
        }
        slot.submit(action as usize);
        touched.insert(slot.agent_index());
        ack.then(|| Frame::response(frame.id, &frame.method, json!({})))
    }
}
