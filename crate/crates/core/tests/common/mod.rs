//! A miniature network for scripted protocol traces.
//!
//! Frames are delivered instantly in FIFO order over a fixed topology and
//! timers fire in time order once no frames are pending. Alongside the nodes
//! the harness keeps its own tallies (frames per directed link since the last
//! evaluation, packets seen by each destination since its last reply) so the
//! nodes' counters can be compared against an independent count.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use anct_core::adversary::AttackerProfile;
use anct_core::crypto::KeyStore;
use anct_core::mobility::Connectivity;
use anct_core::model::{
    AttackKind, CipherKind, NodeId, Packet, PacketBody, Protocol, ScenarioConfig, SimTime,
};
use anct_core::routing::{
    Action, Ctx, DropCause, Node, PendingData, ProtocolParams, Timer, TrustRecord,
};

#[derive(Debug, Clone)]
pub struct Frame {
    pub to: NodeId,
    pub from: NodeId,
    pub packet: Packet,
    pub tunneled: bool,
}

/// Harness-side expectation for one trust evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedEval {
    pub observer: NodeId,
    pub neighbor: NodeId,
    pub fc: u64,
    pub p_r: u64,
    pub sr: Option<f64>,
}

#[derive(Debug, Default)]
pub struct Oracle {
    /// Frames delivered per (receiver, sender) since the receiver last
    /// evaluated the sender.
    pub epoch: BTreeMap<(NodeId, NodeId), u64>,
    /// Frames delivered per (receiver, sender) over the whole trace.
    pub total: BTreeMap<(NodeId, NodeId), u64>,
    /// Packets of flow (source -> destination) seen by the destination since
    /// its last reply, keyed (destination, source).
    pub pr: BTreeMap<(NodeId, NodeId), u64>,
    pub evaluations: Vec<ExpectedEval>,
    /// (p_r the oracle expected, p_r the destination put in the reply).
    pub replies: Vec<(u64, u64)>,
}

pub struct Net {
    pub params: ProtocolParams,
    pub keys: KeyStore,
    pub links: Connectivity,
    pub nodes: Vec<Node>,
    pub now: SimTime,
    frames: VecDeque<Frame>,
    timers: Vec<(SimTime, u64, NodeId, Timer)>,
    timer_seq: u64,
    pub trace: Vec<TrustRecord>,
    pub delivered: Vec<(u32, u32, Vec<u8>)>,
    pub dropped: Vec<(u32, DropCause, Option<NodeId>)>,
    /// Every frame handed to a node, in delivery order.
    pub log: Vec<Frame>,
    pub oracle: Oracle,
    /// Corrupt the payload of the next data frame delivered to this node.
    pub tamper_next_data_to: Option<NodeId>,
}

pub fn base_config(protocol: Protocol) -> ScenarioConfig {
    ScenarioConfig {
        protocol,
        cipher: CipherKind::Aes128,
        ..ScenarioConfig::default()
    }
}

impl Net {
    pub fn new(
        node_count: u32,
        edges: &[(u32, u32)],
        protocol: Protocol,
        attackers: Vec<AttackerProfile>,
    ) -> Net {
        let mut cfg = base_config(protocol);
        cfg.node_count = node_count;
        let params = ProtocolParams::from_config(&cfg);
        let nodes = (0..node_count)
            .map(|i| {
                let id = NodeId(i);
                let a = attackers.iter().find(|a| a.node == id).cloned();
                Node::new(id, a, &params)
            })
            .collect();
        Net {
            keys: KeyStore::new(cfg.rng_seed, cfg.cipher),
            params,
            links: Connectivity::from_edges(node_count as usize, edges),
            nodes,
            now: SimTime::ZERO,
            frames: VecDeque::new(),
            timers: Vec::new(),
            timer_seq: 0,
            trace: Vec::new(),
            delivered: Vec::new(),
            dropped: Vec::new(),
            log: Vec::new(),
            oracle: Oracle::default(),
            tamper_next_data_to: None,
        }
    }

    pub fn node(&self, id: u32) -> &Node {
        &self.nodes[id as usize]
    }

    fn with_node<F>(&mut self, id: NodeId, f: F)
    where
        F: FnOnce(&mut Node, &mut Ctx<'_>),
    {
        let mut actions = Vec::new();
        {
            let mut ctx = Ctx {
                now: self.now,
                params: &self.params,
                keys: &self.keys,
                links: &self.links,
                actions: &mut actions,
                trace: &mut self.trace,
            };
            f(&mut self.nodes[id.index()], &mut ctx);
        }
        for a in actions {
            self.apply(id, a);
        }
    }

    fn apply(&mut self, actor: NodeId, action: Action) {
        match action {
            Action::Broadcast(packet) => {
                for &n in self.links.neighbors(actor) {
                    if !self.nodes[actor.index()].excludes(&self.params, n) {
                        self.frames.push_back(Frame {
                            to: n,
                            from: actor,
                            packet: packet.clone(),
                            tunneled: false,
                        });
                    }
                }
            }
            Action::Unicast { to, packet } => {
                if let PacketBody::Rrep {
                    p_r, signatures, ..
                } = &packet.body
                {
                    if actor == packet.destination && signatures.len() == 1 {
                        let key = (actor, packet.source);
                        let expected = self.oracle.pr.insert(key, 0).unwrap_or(0);
                        self.oracle.replies.push((expected, *p_r));
                    }
                }
                assert!(self.links.in_range(actor, to), "unicast over a missing link");
                self.frames.push_back(Frame {
                    to,
                    from: actor,
                    packet,
                    tunneled: false,
                });
            }
            Action::Tunnel { to, packet } => self.frames.push_back(Frame {
                to,
                from: actor,
                packet,
                tunneled: true,
            }),
            Action::Timer { at, timer } => {
                self.timers.push((at, self.timer_seq, actor, timer));
                self.timer_seq += 1;
            }
            Action::Delivered {
                flow,
                seq,
                plaintext,
                ..
            } => self.delivered.push((flow, seq, plaintext)),
            Action::DataDropped {
                flow,
                cause,
                attacker,
            } => self.dropped.push((flow, cause, attacker)),
            Action::RouteBroken {
                source,
                destination,
                route_id,
            } => self.nodes[source.index()].route_broken(destination, route_id),
        }
    }

    fn count(&mut self, f: &Frame) {
        let key = (f.to, f.from);
        *self.oracle.epoch.entry(key).or_default() += 1;
        *self.oracle.total.entry(key).or_default() += 1;
        let receiver_excludes = self.nodes[f.to.index()].excludes(&self.params, f.from);
        match &f.packet.body {
            PacketBody::Rreq { .. } | PacketBody::Data { .. }
                if f.packet.destination == f.to && !receiver_excludes =>
            {
                *self.oracle.pr.entry((f.to, f.packet.source)).or_default() += 1;
            }
            PacketBody::Rrep { route, p_r, .. } if !receiver_excludes => {
                if let Some(pos) = route.iter().position(|&n| n == f.to) {
                    if route.get(pos + 1) == Some(&f.from) {
                        let fc = self.oracle.epoch.insert(key, 0).unwrap_or(0);
                        self.oracle.evaluations.push(ExpectedEval {
                            observer: f.to,
                            neighbor: f.from,
                            fc,
                            p_r: *p_r,
                            sr: (*p_r > 0).then(|| fc as f64 / *p_r as f64),
                        });
                    }
                }
            }
            _ => {}
        }
    }

    fn deliver(&mut self, mut f: Frame) {
        if self.tamper_next_data_to == Some(f.to) {
            if let PacketBody::Data { payload, .. } = &mut f.packet.body {
                payload[0] ^= 0x01;
                self.tamper_next_data_to = None;
            }
        }
        if self.params.trust_enabled() {
            self.count(&f);
        }
        self.log.push(f.clone());
        let Frame {
            to,
            from,
            packet,
            tunneled,
        } = f;
        self.with_node(to, |n, ctx| n.on_frame(ctx, from, &packet, tunneled));
    }

    /// Delivers every pending frame without firing timers.
    pub fn flush_frames(&mut self) {
        while let Some(f) = self.frames.pop_front() {
            self.deliver(f);
        }
    }

    /// Delivers frames and fires timers up to and including `until`.
    pub fn run_until(&mut self, until: SimTime) {
        loop {
            self.flush_frames();
            let next = self
                .timers
                .iter()
                .enumerate()
                .filter(|(_, t)| t.0 <= until)
                .min_by_key(|(_, t)| (t.0, t.1))
                .map(|(i, _)| i);
            let Some(i) = next else { break };
            let (at, _, node, timer) = self.timers.remove(i);
            self.now = self.now.max(at);
            self.with_node(node, |n, ctx| n.on_timer(ctx, timer));
        }
        self.now = self.now.max(until);
    }

    pub fn secs(s: f64) -> SimTime {
        SimTime::from_secs_f64(s)
    }

    /// Hands one data packet to `source` at the current time.
    pub fn send(&mut self, source: u32, destination: u32, flow: u32, seq: u32, payload: &[u8]) {
        let data = PendingData {
            flow,
            seq,
            payload: payload.to_vec(),
            created_at: self.now,
        };
        self.with_node(NodeId(source), |n, ctx| {
            n.originate_data(ctx, NodeId(destination), data)
        });
    }

    /// Starts a discovery at `source` directly.
    pub fn discover(&mut self, source: u32, destination: u32) {
        self.with_node(NodeId(source), |n, ctx| {
            n.initiate_discovery(ctx, NodeId(destination));
        });
    }

    pub fn fc(&self, observer: u32, neighbor: u32) -> u64 {
        self.node(observer)
            .anct()
            .entry(NodeId(neighbor))
            .map_or(0, |e| e.fc)
    }

    /// Differences between every node's counter table and the oracle tallies.
    pub fn table_mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        for node in &self.nodes {
            for e in node.anct().entries() {
                let key = (node.id(), e.neighbor);
                let epoch = self.oracle.epoch.get(&key).copied().unwrap_or(0);
                let total = self.oracle.total.get(&key).copied().unwrap_or(0);
                if e.fc != epoch || e.fc_total != total {
                    out.push(format!(
                        "{}->{}: table fc={} total={}, oracle fc={} total={}",
                        node.id(),
                        e.neighbor,
                        e.fc,
                        e.fc_total,
                        epoch,
                        total
                    ));
                }
            }
        }
        for (&(obs, nb), &total) in &self.oracle.total {
            if self.nodes[obs.index()].anct().entry(nb).is_none() && total > 0 {
                out.push(format!("{obs}->{nb}: missing entry, oracle total={total}"));
            }
        }
        out
    }

    /// Differences between the trust trace and the oracle's evaluations.
    pub fn evaluation_mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.trace.len() != self.oracle.evaluations.len() {
            out.push(format!(
                "{} evaluations traced, oracle expected {}",
                self.trace.len(),
                self.oracle.evaluations.len()
            ));
        }
        for (r, e) in self.trace.iter().zip(&self.oracle.evaluations) {
            let same_sr = match (r.sr, e.sr) {
                (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
                (None, None) => true,
                _ => false,
            };
            if r.observer != e.observer
                || r.neighbor != e.neighbor
                || r.fc != e.fc
                || r.p_r != e.p_r
                || !same_sr
            {
                out.push(format!("traced {r:?}, oracle {e:?}"));
            }
        }
        for (i, &(expected, actual)) in self.oracle.replies.iter().enumerate() {
            if expected != actual {
                out.push(format!("reply {i}: p_r={actual}, oracle counted {expected}"));
            }
        }
        out
    }
}

pub fn blackhole(node: u32) -> AttackerProfile {
    AttackerProfile {
        node: NodeId(node),
        kind: AttackKind::Blackhole,
        partner: None,
        flood_rate: 50.0,
    }
}

pub fn wormhole_pair(a: u32, b: u32) -> Vec<AttackerProfile> {
    let mk = |n: u32, p: u32| AttackerProfile {
        node: NodeId(n),
        kind: AttackKind::Wormhole,
        partner: Some(NodeId(p)),
        flood_rate: 50.0,
    };
    vec![mk(a, b), mk(b, a)]
}

pub fn ids(v: &[u32]) -> Vec<NodeId> {
    v.iter().copied().map(NodeId).collect()
}
