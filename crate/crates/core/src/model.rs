//! Shared domain types: node identifiers, simulated time, geometry, packets,
//! routes and the scenario configuration.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use thiserror::Error;

use crate::crypto::{MacTag, Signature};

/// Identifier of a simulated node. Ids at or above the scenario's node count
/// never belong to a real node (flooders address such phantom destinations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Simulated time with microsecond resolution. Integer-valued so event
/// ordering never depends on floating point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> SimTime {
        SimTime(us)
    }

    /// Rounds to the nearest microsecond; negative inputs clamp to zero.
    pub const fn from_millis(ms: u64) -> SimTime {
        SimTime(ms * 1000)
    }

    pub fn from_secs_f64(secs: f64) -> SimTime {
        if secs <= 0.0 || secs.is_nan() {
            return SimTime(0);
        }
        SimTime((secs * 1e6).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// A point in the simulation area, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Position {
        Position { x, y }
    }
}

/// Euclidean distance in meters.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Trust counter value in fixed point (millionths). Trust steps such as
/// `0.1` accumulate exactly, so threshold crossings happen after the number
/// of steps plain arithmetic predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Trust(i64);

impl Trust {
    const SCALE: f64 = 1e6;

    pub fn from_f64(v: f64) -> Trust {
        Trust((v * Self::SCALE).round() as i64)
    }

    pub const fn from_micros(v: i64) -> Trust {
        Trust(v)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE
    }

    pub const fn micros(self) -> i64 {
        self.0
    }
}

impl Add for Trust {
    type Output = Trust;
    fn add(self, rhs: Trust) -> Trust {
        Trust(self.0 + rhs.0)
    }
}

impl Sub for Trust {
    type Output = Trust;
    fn sub(self, rhs: Trust) -> Trust {
        Trust(self.0 - rhs.0)
    }
}

impl fmt::Display for Trust {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

// ---------------------------------------------------------------------------
// Packets and routes
// ---------------------------------------------------------------------------

/// Fixed header carried by every frame.
pub const HEADER_BYTES: u32 = 48;
/// Size of one entry in an RREP signature chain.
pub const SIGNATURE_ENTRY_BYTES: u32 = 8;
/// Size of a MAC tag field.
pub const MAC_TAG_BYTES: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Rreq,
    Rrep,
    Data,
}

impl PacketKind {
    pub fn is_control(self) -> bool {
        !matches!(self, PacketKind::Data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacketBody {
    Rreq {
        /// Path accumulated so far, starting with the originator.
        hop_record: Vec<NodeId>,
    },
    Rrep {
        /// Selected route from source to destination.
        route: Vec<NodeId>,
        /// Destination-side packet count for the closing epoch.
        p_r: u64,
        /// Destination sequence number.
        dest_seq: u32,
        /// MAC over `p_r || route_id` under the source/destination key.
        mac_tag: MacTag,
        /// Destination signature first, then one per relaying hop.
        signatures: Vec<Signature>,
    },
    Data {
        flow: u32,
        /// Source route this frame follows.
        route: Vec<NodeId>,
        /// Link-layer ciphertext for the current hop.
        payload: Vec<u8>,
        /// Per-hop frame MAC.
        mac_tag: MacTag,
        created_at: SimTime,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub seq: u32,
    pub source: NodeId,
    pub destination: NodeId,
    /// Link-layer sender of the current hop.
    pub originator_of_hop: NodeId,
    pub route_id: u32,
    pub body: PacketBody,
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self.body {
            PacketBody::Rreq { .. } => PacketKind::Rreq,
            PacketBody::Rrep { .. } => PacketKind::Rrep,
            PacketBody::Data { .. } => PacketKind::Data,
        }
    }

    pub fn size_bytes(&self) -> u32 {
        HEADER_BYTES
            + match &self.body {
                PacketBody::Rreq { .. } => 0,
                PacketBody::Rrep { signatures, .. } => {
                    MAC_TAG_BYTES + SIGNATURE_ENTRY_BYTES * signatures.len() as u32
                }
                PacketBody::Data { payload, .. } => MAC_TAG_BYTES + payload.len() as u32,
            }
    }

    /// The path carried by an RREP or data frame.
    pub fn route(&self) -> Option<&[NodeId]> {
        match &self.body {
            PacketBody::Rrep { route, .. } | PacketBody::Data { route, .. } => Some(route),
            PacketBody::Rreq { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    /// Source first, destination last.
    pub full_path: Vec<NodeId>,
    pub route_id: u32,
    pub established_at: SimTime,
    pub valid: bool,
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    None,
    Blackhole,
    Flooding,
    Wormhole,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Blackhole => "blackhole",
            AttackKind::Flooding => "flooding",
            AttackKind::Wormhole => "wormhole",
        }
    }
}

impl FromStr for AttackKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(AttackKind::None),
            "blackhole" => Ok(AttackKind::Blackhole),
            "flooding" => Ok(AttackKind::Flooding),
            "wormhole" => Ok(AttackKind::Wormhole),
            other => Err(format!("unknown attack kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Anct,
    BaselineAodv,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Anct => "anct",
            Protocol::BaselineAodv => "baseline_aodv",
        }
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "anct" => Ok(Protocol::Anct),
            "baseline_aodv" => Ok(Protocol::BaselineAodv),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

/// Block cipher used for link-layer counter mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CipherKind {
    Aes128,
    /// Rotation cipher with hand-checkable vectors.
    Test,
}

impl CipherKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CipherKind::Aes128 => "aes128",
            CipherKind::Test => "test",
        }
    }
}

impl FromStr for CipherKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "aes128" => Ok(CipherKind::Aes128),
            "test" => Ok(CipherKind::Test),
            other => Err(format!("unknown cipher `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Every simulation parameter. `Default` yields the reference scenario:
/// 100 nodes on 1000 m x 1000 m, 250 m radio range, 50 s, 2 Mbps, 512 byte
/// CBR packets, random waypoint at 10 m/s with 5 s pauses.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub node_count: u32,
    pub area_width: f64,
    pub area_height: f64,
    pub radio_range: f64,
    pub sim_duration: f64,
    pub channel_capacity: f64,
    pub packet_size: u32,
    pub cbr_rate: f64,
    /// Explicit flows; when absent `flow_count` random disjoint pairs are drawn.
    pub flow_pairs: Option<Vec<(NodeId, NodeId)>>,
    pub flow_count: u32,
    pub flow_start: f64,
    pub speed: f64,
    pub pause_time: f64,
    pub rng_seed: u64,
    pub delta1: f64,
    pub delta2: f64,
    pub s_min: f64,
    pub t_trust: f64,
    pub tc_initial: f64,
    pub rrep_timeout: f64,
    pub attacker_count: u32,
    /// Explicit attacker placement; when absent attackers are drawn at random.
    pub attacker_nodes: Option<Vec<NodeId>>,
    pub attack_kind: AttackKind,
    pub protocol: Protocol,
    /// Fixed initial positions; when absent placement is uniform random.
    pub positions: Option<Vec<Position>>,
    pub mobility_tick: f64,
    pub loss_probability: f64,
    pub contention_mean: f64,
    pub contention_cap: f64,
    pub queue_cap: u32,
    pub send_buffer: u32,
    pub collection_window: f64,
    pub max_retries: u32,
    pub retry_backoff: f64,
    pub flood_rate: f64,
    pub wormhole_latency: f64,
    pub wormhole_drops_data: bool,
    pub cipher: CipherKind,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            node_count: 100,
            area_width: 1000.0,
            area_height: 1000.0,
            radio_range: 250.0,
            sim_duration: 50.0,
            channel_capacity: 2e6,
            packet_size: 512,
            cbr_rate: 4.0,
            flow_pairs: None,
            flow_count: 10,
            flow_start: 0.0,
            speed: 10.0,
            pause_time: 5.0,
            rng_seed: 1,
            delta1: 0.1,
            delta2: 0.05,
            s_min: 0.5,
            t_trust: 0.5,
            tc_initial: 1.0,
            rrep_timeout: 1.0,
            attacker_count: 0,
            attacker_nodes: None,
            attack_kind: AttackKind::None,
            protocol: Protocol::Anct,
            positions: None,
            mobility_tick: 0.1,
            loss_probability: 0.01,
            contention_mean: 0.0005,
            contention_cap: 0.02,
            queue_cap: 50,
            send_buffer: 64,
            collection_window: 0.05,
            max_retries: 5,
            retry_backoff: 2.0,
            flood_rate: 50.0,
            wormhole_latency: 1e-6,
            wormhole_drops_data: true,
            cipher: CipherKind::Aes128,
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, e.to_string()))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, format!("expected true/false, got `{v}`"))),
    }
}

fn list_items(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_pairs(key: &str, v: &str) -> Result<Vec<(NodeId, NodeId)>, ConfigError> {
    list_items(v)
        .map(|item| {
            let (a, b) = item
                .split_once('-')
                .ok_or_else(|| bad(key, format!("expected `src-dst`, got `{item}`")))?;
            Ok((
                NodeId(parse_num(key, a.trim())?),
                NodeId(parse_num(key, b.trim())?),
            ))
        })
        .collect()
}

fn parse_positions(key: &str, v: &str) -> Result<Vec<Position>, ConfigError> {
    list_items(v)
        .map(|item| {
            let (x, y) = item
                .split_once(':')
                .ok_or_else(|| bad(key, format!("expected `x:y`, got `{item}`")))?;
            Ok(Position::new(
                parse_num(key, x.trim())?,
                parse_num(key, y.trim())?,
            ))
        })
        .collect()
}

fn parse_ids(key: &str, v: &str) -> Result<Vec<NodeId>, ConfigError> {
    list_items(v)
        .map(|item| Ok(NodeId(parse_num(key, item)?)))
        .collect()
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

impl ScenarioConfig {
    /// Names of every recognised scenario key, in file order.
    pub const KEYS: &'static [&'static str] = &[
        "node_count",
        "area_width",
        "area_height",
        "radio_range",
        "sim_duration",
        "channel_capacity",
        "packet_size",
        "cbr_rate",
        "flow_pairs",
        "flow_count",
        "flow_start",
        "speed",
        "pause_time",
        "rng_seed",
        "delta1",
        "delta2",
        "s_min",
        "t_trust",
        "tc_initial",
        "rrep_timeout",
        "attacker_count",
        "attacker_nodes",
        "attack_kind",
        "protocol",
        "positions",
        "mobility_tick",
        "loss_probability",
        "contention_mean",
        "contention_cap",
        "queue_cap",
        "send_buffer",
        "collection_window",
        "max_retries",
        "retry_backoff",
        "flood_rate",
        "wormhole_latency",
        "wormhole_drops_data",
        "cipher",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "node_count" => self.node_count = parse_num(key, v)?,
            "area_width" => self.area_width = parse_num(key, v)?,
            "area_height" => self.area_height = parse_num(key, v)?,
            "radio_range" => self.radio_range = parse_num(key, v)?,
            "sim_duration" => self.sim_duration = parse_num(key, v)?,
            "channel_capacity" => self.channel_capacity = parse_num(key, v)?,
            "packet_size" => self.packet_size = parse_num(key, v)?,
            "cbr_rate" => self.cbr_rate = parse_num(key, v)?,
            "flow_pairs" => self.flow_pairs = Some(parse_pairs(key, v)?),
            "flow_count" => self.flow_count = parse_num(key, v)?,
            "flow_start" => self.flow_start = parse_num(key, v)?,
            "speed" => self.speed = parse_num(key, v)?,
            "pause_time" => self.pause_time = parse_num(key, v)?,
            "rng_seed" => self.rng_seed = parse_num(key, v)?,
            "delta1" => self.delta1 = parse_num(key, v)?,
            "delta2" => self.delta2 = parse_num(key, v)?,
            "s_min" => self.s_min = parse_num(key, v)?,
            "t_trust" => self.t_trust = parse_num(key, v)?,
            "tc_initial" => self.tc_initial = parse_num(key, v)?,
            "rrep_timeout" => self.rrep_timeout = parse_num(key, v)?,
            "attacker_count" => self.attacker_count = parse_num(key, v)?,
            "attacker_nodes" => self.attacker_nodes = Some(parse_ids(key, v)?),
            "attack_kind" => self.attack_kind = v.parse().map_err(|e: String| bad(key, e))?,
            "protocol" => self.protocol = v.parse().map_err(|e: String| bad(key, e))?,
            "positions" => self.positions = Some(parse_positions(key, v)?),
            "mobility_tick" => self.mobility_tick = parse_num(key, v)?,
            "loss_probability" => self.loss_probability = parse_num(key, v)?,
            "contention_mean" => self.contention_mean = parse_num(key, v)?,
            "contention_cap" => self.contention_cap = parse_num(key, v)?,
            "queue_cap" => self.queue_cap = parse_num(key, v)?,
            "send_buffer" => self.send_buffer = parse_num(key, v)?,
            "collection_window" => self.collection_window = parse_num(key, v)?,
            "max_retries" => self.max_retries = parse_num(key, v)?,
            "retry_backoff" => self.retry_backoff = parse_num(key, v)?,
            "flood_rate" => self.flood_rate = parse_num(key, v)?,
            "wormhole_latency" => self.wormhole_latency = parse_num(key, v)?,
            "wormhole_drops_data" => self.wormhole_drops_data = parse_bool(key, v)?,
            "cipher" => self.cipher = v.parse().map_err(|e: String| bad(key, e))?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses a scenario file: `key = value` lines, `#` starts a comment.
    /// Keys not present keep their default value.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: n + 1 })?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    /// Serializes every field in scenario-file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("node_count", self.node_count.to_string());
        put("area_width", self.area_width.to_string());
        put("area_height", self.area_height.to_string());
        put("radio_range", self.radio_range.to_string());
        put("sim_duration", self.sim_duration.to_string());
        put("channel_capacity", self.channel_capacity.to_string());
        put("packet_size", self.packet_size.to_string());
        put("cbr_rate", self.cbr_rate.to_string());
        if let Some(pairs) = &self.flow_pairs {
            put("flow_pairs", join(pairs, |(a, b)| format!("{a}-{b}")));
        }
        put("flow_count", self.flow_count.to_string());
        put("flow_start", self.flow_start.to_string());
        put("speed", self.speed.to_string());
        put("pause_time", self.pause_time.to_string());
        put("rng_seed", self.rng_seed.to_string());
        put("delta1", self.delta1.to_string());
        put("delta2", self.delta2.to_string());
        put("s_min", self.s_min.to_string());
        put("t_trust", self.t_trust.to_string());
        put("tc_initial", self.tc_initial.to_string());
        put("rrep_timeout", self.rrep_timeout.to_string());
        put("attacker_count", self.attacker_count.to_string());
        if let Some(ids) = &self.attacker_nodes {
            put("attacker_nodes", join(ids, |id| id.to_string()));
        }
        put("attack_kind", self.attack_kind.as_str().to_string());
        put("protocol", self.protocol.as_str().to_string());
        if let Some(ps) = &self.positions {
            put("positions", join(ps, |p| format!("{}:{}", p.x, p.y)));
        }
        put("mobility_tick", self.mobility_tick.to_string());
        put("loss_probability", self.loss_probability.to_string());
        put("contention_mean", self.contention_mean.to_string());
        put("contention_cap", self.contention_cap.to_string());
        put("queue_cap", self.queue_cap.to_string());
        put("send_buffer", self.send_buffer.to_string());
        put("collection_window", self.collection_window.to_string());
        put("max_retries", self.max_retries.to_string());
        put("retry_backoff", self.retry_backoff.to_string());
        put("flood_rate", self.flood_rate.to_string());
        put("wormhole_latency", self.wormhole_latency.to_string());
        put("wormhole_drops_data", self.wormhole_drops_data.to_string());
        put("cipher", self.cipher.as_str().to_string());
        out
    }

    /// Number of attackers actually placed in the network.
    pub fn effective_attackers(&self) -> u32 {
        if self.attack_kind == AttackKind::None {
            0
        } else {
            self.attacker_count
        }
    }
}

/// A configuration whose invariants have been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig(ScenarioConfig);

impl ValidatedConfig {
    pub fn into_inner(self) -> ScenarioConfig {
        self.0
    }
}

impl std::ops::Deref for ValidatedConfig {
    type Target = ScenarioConfig;
    fn deref(&self) -> &ScenarioConfig {
        &self.0
    }
}

fn check(cond: bool, msg: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::Invalid(msg.to_string()))
    }
}

fn finite_pos(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Checks every scenario invariant, reporting the first violation.
pub fn validate_config(cfg: ScenarioConfig) -> Result<ValidatedConfig, ConfigError> {
    check(cfg.node_count > 0, "node_count must be > 0")?;
    check(finite_pos(cfg.area_width), "area_width must be > 0")?;
    check(finite_pos(cfg.area_height), "area_height must be > 0")?;
    check(finite_pos(cfg.radio_range), "radio_range must be > 0")?;
    check(finite_pos(cfg.sim_duration), "sim_duration must be > 0")?;
    check(finite_pos(cfg.channel_capacity), "channel_capacity must be > 0")?;
    check(cfg.packet_size > 0, "packet_size must be > 0")?;
    check(finite_pos(cfg.cbr_rate), "cbr_rate must be > 0")?;
    check(finite_nonneg(cfg.flow_start), "flow_start must be >= 0")?;
    check(finite_nonneg(cfg.speed), "speed must be >= 0")?;
    check(finite_nonneg(cfg.pause_time), "pause_time must be >= 0")?;
    check(finite_pos(cfg.delta1), "delta1 must be > 0")?;
    check(finite_nonneg(cfg.delta2), "delta2 must be >= 0")?;
    check(cfg.delta2 < cfg.delta1, "delta2 must be < delta1")?;
    check(cfg.s_min > 0.0 && cfg.s_min <= 1.0, "s_min must be in (0, 1]")?;
    check(cfg.t_trust.is_finite(), "t_trust must be finite")?;
    check(cfg.tc_initial.is_finite(), "tc_initial must be finite")?;
    check(
        cfg.tc_initial > cfg.t_trust,
        "tc_initial must be > t_trust",
    )?;
    check(finite_pos(cfg.rrep_timeout), "rrep_timeout must be > 0")?;
    check(
        cfg.attacker_count < cfg.node_count,
        "attacker_count must be < node_count",
    )?;
    check(finite_pos(cfg.mobility_tick), "mobility_tick must be > 0")?;
    check(
        (0.0..=1.0).contains(&cfg.loss_probability),
        "loss_probability must be in [0, 1]",
    )?;
    check(finite_nonneg(cfg.contention_mean), "contention_mean must be >= 0")?;
    check(finite_nonneg(cfg.contention_cap), "contention_cap must be >= 0")?;
    check(cfg.queue_cap > 0, "queue_cap must be > 0")?;
    check(cfg.send_buffer > 0, "send_buffer must be > 0")?;
    check(
        finite_nonneg(cfg.collection_window),
        "collection_window must be >= 0",
    )?;
    check(finite_nonneg(cfg.retry_backoff), "retry_backoff must be >= 0")?;
    check(finite_pos(cfg.flood_rate), "flood_rate must be > 0")?;
    check(
        finite_pos(cfg.wormhole_latency),
        "wormhole_latency must be > 0",
    )?;

    let n = cfg.node_count;
    let attackers = cfg.effective_attackers();
    if cfg.attack_kind == AttackKind::Wormhole {
        check(
            attackers % 2 == 0,
            "wormhole attackers must come in partner pairs (attacker_count must be even)",
        )?;
    }

    let mut endpoints = std::collections::BTreeSet::new();
    match &cfg.flow_pairs {
        Some(pairs) => {
            check(!pairs.is_empty(), "flow_pairs must not be empty")?;
            for &(s, d) in pairs {
                check(s.0 < n && d.0 < n, "flow endpoints must be < node_count")?;
                check(s != d, "flow source and destination must differ")?;
                endpoints.insert(s);
                endpoints.insert(d);
            }
        }
        None => {
            check(cfg.flow_count > 0, "flow_count must be > 0")?;
            check(
                2 * cfg.flow_count as u64 + attackers as u64 <= n as u64,
                "node_count too small for flow_count disjoint pairs plus attackers",
            )?;
        }
    }

    if let Some(ids) = &cfg.attacker_nodes {
        if cfg.attack_kind != AttackKind::None {
            check(
                ids.len() == cfg.attacker_count as usize,
                "attacker_nodes length must equal attacker_count",
            )?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in ids {
            check(id.0 < n, "attacker_nodes must be < node_count")?;
            check(seen.insert(*id), "attacker_nodes must be distinct")?;
            if cfg.attack_kind != AttackKind::None {
                check(
                    !endpoints.contains(id),
                    "flow endpoints must not be attackers",
                )?;
            }
        }
    } else {
        check(
            (n as usize - endpoints.len()) >= attackers as usize,
            "not enough non-endpoint nodes for attacker_count",
        )?;
    }

    if let Some(ps) = &cfg.positions {
        check(
            ps.len() == n as usize,
            "positions must list exactly node_count entries",
        )?;
        for p in ps {
            check(
                (0.0..=cfg.area_width).contains(&p.x) && (0.0..=cfg.area_height).contains(&p.y),
                "positions must lie inside the area",
            )?;
        }
    }

    Ok(ValidatedConfig(cfg))
}
