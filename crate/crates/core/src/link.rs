//! Simulated radio link: 32-byte frames with CRC, seeded latency and loss,
//! acknowledged retransmission and receiver-side deduplication.
//!
//! Wire layout (little-endian), documented in `docs/frame-format.md`:
//! `seq: u16 | kind: u8 | len: u8 | payload[len] | crc16: u16`.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crc::{Crc, CRC_16_IBM_3740};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::GripCommand;
use crate::error::{Error, Result};
use crate::gesture::{ForceLevel, Gesture};
use crate::rng::rng_for;
use crate::sim::ReleaseStrategy;

pub const MAX_FRAME: usize = 32;
pub const MAX_PAYLOAD: usize = 26;
const HEADER: usize = 4;
const CRC: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameKind {
    Vel = 1,
    Grip = 2,
    Feedback = 3,
    Estop = 4,
    Ack = 5,
    Arm = 6,
    Release = 7,
}

impl FrameKind {
    pub const ALL: [FrameKind; 7] = [
        FrameKind::Vel,
        FrameKind::Grip,
        FrameKind::Feedback,
        FrameKind::Estop,
        FrameKind::Ack,
        FrameKind::Arm,
        FrameKind::Release,
    ];

    fn from_u8(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| *k as u8 == b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub seq: u16,
    pub kind: FrameKind,
    payload: Vec<u8>,
}

impl Frame {
    pub fn new(seq: u16, kind: FrameKind, payload: Vec<u8>) -> Result<Self> {
        if payload.len() > MAX_PAYLOAD {
            return Err(Error::Frame(format!(
                "payload of {} bytes exceeds {MAX_PAYLOAD}",
                payload.len()
            )));
        }
        Ok(Frame { seq, kind, payload })
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + self.payload.len() + 2);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(self.kind as u8);
        out.push(self.payload.len() as u8);
        out.extend_from_slice(&self.payload);
        let crc = CRC.checksum(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER + 2 || bytes.len() > MAX_FRAME {
            return Err(Error::Frame(format!("frame length {} out of range", bytes.len())));
        }
        let len = bytes[3] as usize;
        if bytes.len() != HEADER + len + 2 {
            return Err(Error::Frame(format!(
                "declared payload {len} does not match frame length {}",
                bytes.len()
            )));
        }
        let body = &bytes[..HEADER + len];
        let crc = u16::from_le_bytes([bytes[HEADER + len], bytes[HEADER + len + 1]]);
        if CRC.checksum(body) != crc {
            return Err(Error::Frame("crc mismatch".into()));
        }
        let kind = FrameKind::from_u8(bytes[2]).ok_or_else(|| Error::Frame(format!("unknown kind {}", bytes[2])))?;
        Frame::new(u16::from_le_bytes([bytes[0], bytes[1]]), kind, body[HEADER..].to_vec())
    }
}

/// Application messages carried in frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Command {
    /// Base velocity, sent as three `f32`.
    Velocity { vx: f64, vy: f64, omega: f64 },
    Grip(GripCommand),
    /// Vibration cue index 1..=8 and measured force (`f32`).
    Feedback { index: u8, force_n: f64 },
    Estop { engaged: bool },
    Ack { seq: u16 },
    /// Lower the arm to placement height or raise it for transport.
    Arm { lowered: bool },
    Release(ReleaseStrategy),
}

impl Command {
    pub fn kind(&self) -> FrameKind {
        match self {
            Command::Velocity { .. } => FrameKind::Vel,
            Command::Grip(_) => FrameKind::Grip,
            Command::Feedback { .. } => FrameKind::Feedback,
            Command::Estop { .. } => FrameKind::Estop,
            Command::Ack { .. } => FrameKind::Ack,
            Command::Arm { .. } => FrameKind::Arm,
            Command::Release(_) => FrameKind::Release,
        }
    }

    pub fn to_frame(&self, seq: u16) -> Frame {
        let mut p = Vec::new();
        match *self {
            Command::Velocity { vx, vy, omega } => {
                for v in [vx, vy, omega] {
                    p.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            Command::Grip(g) => {
                p.push(match g.gesture {
                    Gesture::Grip => 0,
                    Gesture::Wrist => 1,
                });
                p.push(g.level.number());
            }
            Command::Feedback { index, force_n } => {
                p.push(index);
                p.extend_from_slice(&(force_n as f32).to_le_bytes());
            }
            Command::Estop { engaged } => p.push(engaged as u8),
            Command::Ack { seq } => p.extend_from_slice(&seq.to_le_bytes()),
            Command::Arm { lowered } => p.push(lowered as u8),
            Command::Release(s) => p.push(match s {
                ReleaseStrategy::Gradual => 0,
                ReleaseStrategy::Standard => 1,
                ReleaseStrategy::Light => 2,
            }),
        }
        Frame::new(seq, self.kind(), p).expect("command payloads are small")
    }

    pub fn from_frame(f: &Frame) -> Result<Self> {
        let p = f.payload();
        let bad = || Error::Frame(format!("malformed {:?} payload of {} bytes", f.kind, p.len()));
        let f32_at = |i: usize| -> Result<f64> {
            let b: [u8; 4] = p.get(i..i + 4).ok_or_else(bad)?.try_into().expect("4 bytes");
            Ok(f32::from_le_bytes(b) as f64)
        };
        let cmd = match f.kind {
            FrameKind::Vel if p.len() == 12 => Command::Velocity {
                vx: f32_at(0)?,
                vy: f32_at(4)?,
                omega: f32_at(8)?,
            },
            FrameKind::Grip if p.len() == 2 => {
                let gesture = match p[0] {
                    0 => Gesture::Grip,
                    1 => Gesture::Wrist,
                    _ => return Err(bad()),
                };
                let level = ForceLevel::from_number(p[1]).ok_or_else(bad)?;
                Command::Grip(GripCommand { gesture, level })
            }
            FrameKind::Feedback if p.len() == 5 => Command::Feedback {
                index: p[0],
                force_n: f32_at(1)?,
            },
            FrameKind::Estop if p.len() == 1 => Command::Estop { engaged: p[0] != 0 },
            FrameKind::Ack if p.len() == 2 => Command::Ack {
                seq: u16::from_le_bytes([p[0], p[1]]),
            },
            FrameKind::Arm if p.len() == 1 && p[0] <= 1 => Command::Arm { lowered: p[0] == 1 },
            FrameKind::Release if p.len() == 1 => Command::Release(match p[0] {
                0 => ReleaseStrategy::Gradual,
                1 => ReleaseStrategy::Standard,
                2 => ReleaseStrategy::Light,
                _ => return Err(bad()),
            }),
            _ => return Err(bad()),
        };
        Ok(cmd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub latency_ms: f64,
    /// Latency is uniform on `[latency - jitter, latency + jitter]`.
    pub jitter_ms: f64,
    pub drop_prob: f64,
    pub max_retries: u32,
    pub ack_timeout_ms: f64,
    /// ESTOP frames and their acknowledgements are never dropped.
    pub estop_lossless: bool,
    pub seed: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            latency_ms: 20.0,
            jitter_ms: 10.0,
            drop_prob: 0.01,
            max_retries: 3,
            ack_timeout_ms: 60.0,
            estop_lossless: true,
            seed: 0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop_prob) && self.drop_prob != 1.0 {
            return Err(Error::Config(format!("drop probability {} outside [0, 1]", self.drop_prob)));
        }
        if !(self.latency_ms >= 0.0 && self.jitter_ms >= 0.0 && self.jitter_ms <= self.latency_ms) {
            return Err(Error::Config("latency must be non-negative with jitter <= latency".into()));
        }
        if !(self.ack_timeout_ms > 0.0) {
            return Err(Error::Config("ack timeout must be positive".into()));
        }
        Ok(())
    }
}

/// Timeline of one `send`.
#[derive(Debug, Clone, PartialEq)]
pub struct SendReport {
    pub seq: u16,
    /// Times at which a copy reached the receiver (duplicates included).
    pub deliveries: Vec<f64>,
    /// Transmission attempts made, including the first.
    pub attempts: u32,
    pub first_attempt_dropped: bool,
    /// Set when every attempt went unacknowledged.
    pub failed_at: Option<f64>,
}

impl SendReport {
    pub fn delivered(&self) -> bool {
        !self.deliveries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinkStats {
    pub frames: u64,
    pub attempts: u64,
    pub first_attempt_drops: u64,
    pub failures: u64,
    pub duplicates: u64,
}

/// One direction of the link with its own sequence counter, in-flight queue
/// and receiver deduplication.
#[derive(Debug, Clone)]
pub struct Channel {
    cfg: LinkConfig,
    rng: ChaCha8Rng,
    next_seq: u16,
    /// Pending deliveries keyed by (time in microseconds, insertion order).
    in_flight: BTreeMap<(i64, u64), Frame>,
    order: u64,
    dedup: Dedup,
    pub stats: LinkStats,
}

impl Channel {
    pub fn new(cfg: LinkConfig, stream: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Channel {
            rng: rng_for(cfg.seed, &[0x11e4, stream]),
            cfg,
            next_seq: 0,
            in_flight: BTreeMap::new(),
            order: 0,
            dedup: Dedup::new(1024),
            stats: LinkStats::default(),
        })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    fn latency(&mut self) -> f64 {
        if self.cfg.jitter_ms == 0.0 {
            self.cfg.latency_ms
        } else {
            self.rng
                .random_range(self.cfg.latency_ms - self.cfg.jitter_ms..=self.cfg.latency_ms + self.cfg.jitter_ms)
        }
    }

    fn dropped(&mut self, lossless: bool) -> bool {
        // Always draw so the random stream does not depend on frame kinds.
        let u: f64 = self.rng.random();
        !lossless && u < self.cfg.drop_prob
    }

    /// Schedules a command sent at `now_ms` and returns its timeline.
    pub fn send(&mut self, cmd: &Command, now_ms: f64) -> SendReport {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        let frame = cmd.to_frame(seq);
        let report = self.transmit(&frame, now_ms);
        for &t in &report.deliveries {
            let key = ((t * 1000.0).round() as i64, self.order);
            self.order += 1;
            self.in_flight.insert(key, frame.clone());
        }
        report
    }

    /// Draws the attempt/ack timeline for one frame without queueing it.
    pub fn transmit(&mut self, frame: &Frame, now_ms: f64) -> SendReport {
        let lossless = self.cfg.estop_lossless && frame.kind == FrameKind::Estop;
        let mut deliveries = Vec::new();
        let mut first_attempt_dropped = false;
        let mut attempts = 0;
        let mut acked = false;
        for k in 0..=self.cfg.max_retries {
            attempts += 1;
            let start = now_ms + k as f64 * self.cfg.ack_timeout_ms;
            let lost = self.dropped(lossless);
            if k == 0 {
                first_attempt_dropped = lost;
            }
            if lost {
                continue;
            }
            let arrive = start + self.latency();
            deliveries.push(arrive);
            let ack_lost = self.dropped(lossless);
            let ack_at = arrive + self.latency();
            if !ack_lost && ack_at <= start + self.cfg.ack_timeout_ms {
                acked = true;
                break;
            }
        }
        self.stats.frames += 1;
        self.stats.attempts += attempts as u64;
        self.stats.first_attempt_drops += first_attempt_dropped as u64;
        let failed_at = (!acked).then(|| {
            self.stats.failures += 1;
            now_ms + (self.cfg.max_retries + 1) as f64 * self.cfg.ack_timeout_ms
        });
        SendReport {
            seq: frame.seq,
            deliveries,
            attempts,
            first_attempt_dropped,
            failed_at,
        }
    }

    /// Frames that have arrived by `now_ms`, in arrival order, each sequence
    /// number at most once.
    pub fn receive(&mut self, now_ms: f64) -> Vec<Frame> {
        let limit = ((now_ms * 1000.0).round() as i64, u64::MAX);
        let mut out = Vec::new();
        while let Some(entry) = self.in_flight.first_entry() {
            if *entry.key() > limit {
                break;
            }
            let frame = entry.remove();
            if self.dedup.accept(frame.seq) {
                out.push(frame);
            } else {
                self.stats.duplicates += 1;
            }
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}

/// Remembers the most recent `capacity` sequence numbers.
#[derive(Debug, Clone)]
pub struct Dedup {
    seen: HashSet<u16>,
    order: VecDeque<u16>,
    capacity: usize,
}

impl Dedup {
    pub fn new(capacity: usize) -> Self {
        Dedup {
            seen: HashSet::new(),
            order: VecDeque::new(),
            capacity,
        }
    }

    /// `true` the first time `seq` is seen within the window.
    pub fn accept(&mut self, seq: u16) -> bool {
        if !self.seen.insert(seq) {
            return false;
        }
        self.order.push_back(seq);
        if self.order.len() > self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.seen.remove(&old);
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_little_endian() {
        let f = Frame::new(0x0201, FrameKind::Estop, vec![1]).unwrap();
        let b = f.encode();
        assert_eq!(&b[..5], &[0x01, 0x02, 4, 1, 1]);
        assert_eq!(b.len(), 7);
        // CRC-16/IBM-3740 check value.
        assert_eq!(CRC.checksum(b"123456789"), 0x29B1);
    }

    #[test]
    fn full_frame_fits_radio_payload() {
        let f = Frame::new(7, FrameKind::Vel, vec![0xAB; MAX_PAYLOAD]).unwrap();
        assert_eq!(f.encode().len(), MAX_FRAME);
        assert!(Frame::new(7, FrameKind::Vel, vec![0; 27]).is_err());
    }

    #[test]
    fn command_round_trip() {
        let cmds = [
            Command::Velocity {
                vx: 0.25,
                vy: 0.0,
                omega: -0.5,
            },
            Command::Grip(GripCommand {
                gesture: Gesture::Wrist,
                level: ForceLevel::L3Light,
            }),
            Command::Feedback { index: 7, force_n: 4.5 },
            Command::Estop { engaged: true },
            Command::Ack { seq: 65535 },
            Command::Arm { lowered: true },
            Command::Release(ReleaseStrategy::Gradual),
        ];
        for c in cmds {
            let f = Frame::decode(&c.to_frame(9).encode()).unwrap();
            assert_eq!(Command::from_frame(&f).unwrap(), c);
        }
    }

    #[test]
    fn exact_latency_without_loss() {
        let cfg = LinkConfig {
            latency_ms: 10.0,
            jitter_ms: 0.0,
            drop_prob: 0.0,
            ..LinkConfig::default()
        };
        let mut ch = Channel::new(cfg, 0).unwrap();
        let r = ch.send(&Command::Estop { engaged: true }, 100.0);
        assert_eq!(r.deliveries, vec![110.0]);
        assert_eq!(r.attempts, 1);
        assert!(ch.receive(109.999).is_empty());
        assert_eq!(ch.receive(110.0).len(), 1);
    }

    #[test]
    fn forced_loss_fails_after_all_attempts() {
        let cfg = LinkConfig {
            drop_prob: 1.0,
            max_retries: 3,
            ..LinkConfig::default()
        };
        let mut ch = Channel::new(cfg, 0).unwrap();
        let r = ch.send(&Command::Velocity { vx: 0.1, vy: 0.0, omega: 0.0 }, 0.0);
        assert_eq!(r.attempts, 4);
        assert!(!r.delivered());
        assert_eq!(r.failed_at, Some(240.0));
        // ESTOP is exempt by default.
        assert!(ch.send(&Command::Estop { engaged: true }, 0.0).delivered());
    }

    #[test]
    fn dedup_drops_repeats() {
        let mut d = Dedup::new(4);
        assert!(d.accept(1));
        assert!(!d.accept(1));
        for s in 2..=5 {
            assert!(d.accept(s));
        }
        // 1 has left the window.
        assert!(d.accept(1));
    }
}
