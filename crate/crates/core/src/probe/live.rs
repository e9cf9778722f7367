//! Live mode over UDP. Timestamps come from the host monotonic clock, so
//! RTT resolution and accuracy are bounded by the OS scheduler and socket
//! stack, typically tens of microseconds on loopback.

use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use super::{
    generate_train, wire, Echo, MonotonicClock, ProbeBackend, ProbeError, TrainConfig, TrainStats,
    TxClock,
};

/// Packets allowed in flight before the sender waits for echoes.
pub const DEFAULT_WINDOW: u32 = 64;
/// Idle time after which in-flight packets stop holding the window.
const STALL: Duration = Duration::from_millis(20);
const POLL: Duration = Duration::from_millis(5);
const REFLECTOR_POLL: Duration = Duration::from_millis(50);

fn bind(addr: SocketAddr) -> Result<UdpSocket, ProbeError> {
    UdpSocket::bind(addr).map_err(|source| ProbeError::PortBindFailure {
        addr: addr.to_string(),
        source,
    })
}

/// Stateless echo: every datagram carrying a valid probe header is sent
/// back unchanged; anything else is dropped.
pub struct Reflector {
    socket: UdpSocket,
}

impl Reflector {
    pub fn bind(addr: SocketAddr) -> Result<Self, ProbeError> {
        let socket = bind(addr)?;
        socket.set_read_timeout(Some(REFLECTOR_POLL))?;
        Ok(Self { socket })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ProbeError> {
        Ok(self.socket.local_addr()?)
    }

    /// Echoes until `stop` is set. Returns the number of packets reflected.
    pub fn run(&self, stop: &AtomicBool) -> Result<u64, ProbeError> {
        let mut buf = vec![0u8; 65_536];
        let mut reflected = 0;
        while !stop.load(Ordering::Relaxed) {
            match self.socket.recv_from(&mut buf) {
                Ok((n, peer)) => {
                    if wire::decode_header(&buf[..n]).is_ok() {
                        // A full send buffer only costs this one echo.
                        if self.socket.send_to(&buf[..n], peer).is_ok() {
                            reflected += 1;
                        }
                    }
                }
                Err(e) if is_timeout(&e) => {}
                Err(e) if e.kind() == std::io::ErrorKind::ConnectionReset => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(reflected)
    }
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(
        e.kind(),
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
    )
}

/// Sends one train to `reflector` and waits for the echoes. Completes when
/// every packet is back; otherwise fails with [`ProbeError::Timeout`] once
/// `cfg.timeout_ms` has elapsed, carrying the statistics gathered so far.
pub fn live_measure(cfg: &TrainConfig, reflector: SocketAddr) -> Result<TrainStats, ProbeError> {
    live_measure_windowed(cfg, reflector, DEFAULT_WINDOW)
}

pub fn live_measure_windowed(
    cfg: &TrainConfig,
    reflector: SocketAddr,
    window: u32,
) -> Result<TrainStats, ProbeError> {
    cfg.validate()?;
    let any: SocketAddr = if reflector.is_ipv4() {
        SocketAddr::from(([0, 0, 0, 0], cfg.src_port))
    } else {
        SocketAddr::from((std::net::Ipv6Addr::UNSPECIFIED, cfg.src_port))
    };
    // The configured source address is used only when it is local to this host.
    let socket = match reflector {
        SocketAddr::V4(_) => bind(SocketAddr::from((cfg.src_ip, cfg.src_port))).or_else(|_| bind(any)),
        SocketAddr::V6(_) => bind(any),
    }?;
    socket.connect(reflector)?;

    let count = cfg.count as usize;
    let deadline = Instant::now() + Duration::from_millis(cfg.timeout_ms);
    let mut clock = MonotonicClock::new();
    let mut rx_clock = clock.clone();
    let mut tx_ps = vec![0u64; count];
    let mut rx_ps: Vec<Option<u64>> = vec![None; count];
    let mut received = 0usize;
    let mut sent = 0usize;
    // Packets presumed lost after a stall; they no longer hold the window.
    let mut written_off = 0usize;
    let mut last_progress = Instant::now();
    let mut out = Vec::new();
    let mut buf = vec![0u8; 65_536];
    let mut packets = generate_train(cfg, &mut clock);

    while received < count {
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        while sent < count && sent.saturating_sub(received + written_off) < window as usize {
            let p = packets.next().expect("generator yields count packets");
            let t = p.header.tx_timestamp_ns * 1000;
            wire::encode_into(&p, &mut out);
            // Send errors (for instance ICMP unreachable surfacing here)
            // leave the packet unanswered, so it is counted as lost.
            let _ = socket.send(&out);
            tx_ps[sent] = t;
            sent += 1;
        }
        let wait = POLL.min(deadline.saturating_duration_since(Instant::now()));
        if wait.is_zero() {
            break;
        }
        socket.set_read_timeout(Some(wait))?;
        match socket.recv(&mut buf) {
            Ok(n) => {
                let t = rx_clock.now_ps();
                let Ok(h) = wire::decode_header(&buf[..n]) else {
                    continue;
                };
                let seq = h.seq as usize;
                if h.train_id != cfg.train_id || seq >= sent || rx_ps[seq].is_some() {
                    continue;
                }
                rx_ps[seq] = Some(t);
                received += 1;
                last_progress = Instant::now();
            }
            Err(e) if is_timeout(&e) || e.kind() == std::io::ErrorKind::ConnectionRefused => {
                if last_progress.elapsed() >= STALL {
                    written_off = sent - received;
                    last_progress = Instant::now();
                }
            }
            Err(e) => return Err(e.into()),
        }
    }

    let echoes: Vec<Echo> = (0..sent)
        .map(|i| Echo {
            seq: i as u32,
            tx_ps: tx_ps[i],
            rx_ps: rx_ps[i],
        })
        .collect();
    let stats = super::compute_stats(cfg, &echoes);
    if received < count {
        return Err(ProbeError::Timeout {
            timeout_ms: cfg.timeout_ms,
            partial: stats,
        });
    }
    Ok(stats)
}

/// Live probe bound to one reflector.
#[derive(Debug, Clone)]
pub struct LiveProbe {
    pub reflector: SocketAddr,
}

impl ProbeBackend for LiveProbe {
    fn run_train(&mut self, cfg: &TrainConfig) -> Result<TrainStats, ProbeError> {
        live_measure(cfg, self.reflector)
    }
}
