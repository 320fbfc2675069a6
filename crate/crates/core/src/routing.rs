//! On-demand route discovery with the Assured Neighbor based Counter Table.
//!
//! Every node keeps one [`AnctTable`] with a record per observed neighbor:
//!
//! * `fc`: frames received from that neighbor in the current evaluation
//!   epoch (incremented on every reception, reset once the neighbor has been
//!   evaluated),
//! * `tc`: trust counter, raised by `delta1` when an RREP delivered by the
//!   neighbor verifies and lowered by `delta1` when it does not, lowered a
//!   further `delta2` when the neighbor's success ratio `fc / p_r` falls
//!   below `s_min`,
//! * `malicious`: set once `tc` drops to `t_trust`. A node never relays to
//!   or accepts relayed traffic from a neighbor it has marked.
//!
//! Route replies carry a MAC over the destination's packet count `p_r`
//! (keyed with the source/destination key) and a signature chain that starts
//! with the destination and grows by one signature per relaying hop.
//!
//! Nodes are passive state machines: handlers push [`Action`]s that the
//! simulation engine carries out.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::Rng;

use crate::adversary::{self, AttackerProfile};
use crate::crypto::{
    ctr_decrypt, ctr_encrypt, mac_compute, mac_verify, sign, verify_sig, CounterValue, KeyStore,
    MacTag, Signature,
};
use crate::mobility::Connectivity;
use crate::model::{
    AttackKind, NodeId, Packet, PacketBody, PacketKind, Protocol, RouteEntry, ScenarioConfig,
    SimTime, Trust,
};

/// Trust constants of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustParams {
    pub tc_initial: Trust,
    pub delta1: Trust,
    pub delta2: Trust,
    pub s_min: f64,
    pub t_trust: Trust,
}

impl TrustParams {
    pub fn from_config(cfg: &ScenarioConfig) -> TrustParams {
        TrustParams {
            tc_initial: Trust::from_f64(cfg.tc_initial),
            delta1: Trust::from_f64(cfg.delta1),
            delta2: Trust::from_f64(cfg.delta2),
            s_min: cfg.s_min,
            t_trust: Trust::from_f64(cfg.t_trust),
        }
    }
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams::from_config(&ScenarioConfig::default())
    }
}

/// Per-node protocol constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub protocol: Protocol,
    pub trust: TrustParams,
    pub rrep_timeout: SimTime,
    pub collection_window: SimTime,
    pub max_retries: u32,
    pub retry_backoff: SimTime,
    pub send_buffer: usize,
    pub node_count: u32,
    pub wormhole_drops_data: bool,
}

impl ProtocolParams {
    pub fn from_config(cfg: &ScenarioConfig) -> ProtocolParams {
        ProtocolParams {
            protocol: cfg.protocol,
            trust: TrustParams::from_config(cfg),
            rrep_timeout: SimTime::from_secs_f64(cfg.rrep_timeout),
            collection_window: SimTime::from_secs_f64(cfg.collection_window),
            max_retries: cfg.max_retries,
            retry_backoff: SimTime::from_secs_f64(cfg.retry_backoff),
            send_buffer: cfg.send_buffer as usize,
            node_count: cfg.node_count,
            wormhole_drops_data: cfg.wormhole_drops_data,
        }
    }

    pub fn trust_enabled(&self) -> bool {
        self.protocol == Protocol::Anct
    }
}

// ---------------------------------------------------------------------------
// Counter table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct AnctEntry {
    pub neighbor: NodeId,
    /// Frames received from the neighbor since it was last evaluated.
    pub fc: u64,
    /// Frames received from the neighbor over the whole run.
    pub fc_total: u64,
    pub tc: Trust,
    /// Success ratio from the latest evaluation with a non-zero `p_r`.
    pub sr: Option<f64>,
    pub malicious: bool,
}

/// One trust evaluation, as written to the trust trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRecord {
    pub time: SimTime,
    pub observer: NodeId,
    pub neighbor: NodeId,
    /// Epoch forward count the success ratio was computed from.
    pub fc: u64,
    pub p_r: u64,
    pub tc: Trust,
    pub sr: Option<f64>,
    pub verified: bool,
    pub malicious: bool,
}

impl TrustRecord {
    pub const CSV_HEADER: &'static str = "time,observer,neighbor,fc,tc,sr,malicious";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.time,
            self.observer,
            self.neighbor,
            self.fc,
            self.tc,
            self.sr.map(|s| s.to_string()).unwrap_or_default(),
            self.malicious
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnctTable {
    owner: NodeId,
    tc_initial: Trust,
    entries: BTreeMap<NodeId, AnctEntry>,
}

impl AnctTable {
    pub fn new(owner: NodeId, tc_initial: Trust) -> AnctTable {
        AnctTable {
            owner,
            tc_initial,
            entries: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn entry(&self, neighbor: NodeId) -> Option<&AnctEntry> {
        self.entries.get(&neighbor)
    }

    pub fn entries(&self) -> impl Iterator<Item = &AnctEntry> {
        self.entries.values()
    }

    pub fn is_malicious(&self, neighbor: NodeId) -> bool {
        self.entries.get(&neighbor).is_some_and(|e| e.malicious)
    }

    fn entry_mut(&mut self, neighbor: NodeId) -> &mut AnctEntry {
        assert_ne!(neighbor, self.owner, "a node keeps no entry for itself");
        let tc = self.tc_initial;
        self.entries.entry(neighbor).or_insert_with(|| AnctEntry {
            neighbor,
            fc: 0,
            fc_total: 0,
            tc,
            sr: None,
            malicious: false,
        })
    }

    /// Forward counter update: one more frame received from `from`.
    pub fn record_reception(&mut self, from: NodeId) {
        let e = self.entry_mut(from);
        e.fc += 1;
        e.fc_total += 1;
    }

    fn mark_if_untrusted(e: &mut AnctEntry, params: &TrustParams) {
        if !e.malicious && e.tc <= params.t_trust {
            e.malicious = true;
        }
    }

    /// Signature/MAC outcome: `tc += delta1` on success, `tc -= delta1` otherwise.
    pub fn apply_verification(&mut self, neighbor: NodeId, ok: bool, params: &TrustParams) {
        let e = self.entry_mut(neighbor);
        e.tc = if ok {
            e.tc + params.delta1
        } else {
            e.tc - params.delta1
        };
        Self::mark_if_untrusted(e, params);
    }

    /// Success ratio `fc / p_r`; below `s_min` costs `delta2`. Skipped when
    /// `p_r` is zero.
    pub fn apply_success_ratio(
        &mut self,
        neighbor: NodeId,
        p_r: u64,
        params: &TrustParams,
    ) -> Option<f64> {
        let e = self.entry_mut(neighbor);
        if p_r == 0 {
            return None;
        }
        let sr = e.fc as f64 / p_r as f64;
        e.sr = Some(sr);
        if sr < params.s_min {
            e.tc = e.tc - params.delta2;
        }
        Self::mark_if_untrusted(e, params);
        Some(sr)
    }

    /// Full evaluation of the neighbor an RREP arrived from. Closes that
    /// neighbor's forward-count epoch.
    pub fn evaluate(
        &mut self,
        neighbor: NodeId,
        verified: bool,
        p_r: u64,
        params: &TrustParams,
        now: SimTime,
    ) -> TrustRecord {
        self.apply_verification(neighbor, verified, params);
        let sr = self.apply_success_ratio(neighbor, p_r, params);
        let owner = self.owner;
        let e = self.entry_mut(neighbor);
        let record = TrustRecord {
            time: now,
            observer: owner,
            neighbor,
            fc: e.fc,
            p_r,
            tc: e.tc,
            sr,
            verified,
            malicious: e.malicious,
        };
        e.fc = 0;
        record
    }
}

// ---------------------------------------------------------------------------
// Discovery bookkeeping
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryState {
    pub source: NodeId,
    pub destination: NodeId,
    /// 1 for the first route, incremented per attempt.
    pub route_id: u32,
    pub rreq_seq: u32,
    pub deadline: SimTime,
    pub resolved: bool,
    /// Consecutive timed-out attempts before this one.
    pub retries: u32,
}

/// Destination-side packet count for the open epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrCounter {
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingData {
    pub flow: u32,
    pub seq: u32,
    pub payload: Vec<u8>,
    pub created_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropCause {
    Attacker,
    LinkLoss,
    Queue,
    NoRoute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Timer {
    RrepDeadline { destination: NodeId, route_id: u32 },
    ReplyWindow { source: NodeId, seq: u32 },
    BackoffEnd { destination: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Link-layer broadcast to every in-range neighbor the sender has not excluded.
    Broadcast(Packet),
    Unicast { to: NodeId, packet: Packet },
    /// Out-of-band wormhole tunnel to the partner.
    Tunnel { to: NodeId, packet: Packet },
    Timer { at: SimTime, timer: Timer },
    Delivered {
        flow: u32,
        seq: u32,
        created_at: SimTime,
        hops: usize,
        plaintext: Vec<u8>,
    },
    DataDropped {
        flow: u32,
        cause: DropCause,
        attacker: Option<NodeId>,
    },
    /// A relay could not reach the next hop of a source route.
    RouteBroken {
        source: NodeId,
        destination: NodeId,
        route_id: u32,
    },
}

/// Everything a handler may read or emit.
pub struct Ctx<'a> {
    pub now: SimTime,
    pub params: &'a ProtocolParams,
    pub keys: &'a KeyStore,
    pub links: &'a Connectivity,
    pub actions: &'a mut Vec<Action>,
    pub trace: &'a mut Vec<TrustRecord>,
}

impl Ctx<'_> {
    fn emit(&mut self, a: Action) {
        self.actions.push(a);
    }
}

// ---------------------------------------------------------------------------
// Wire encodings used by the MAC and signatures
// ---------------------------------------------------------------------------

/// Message the end-to-end MAC covers: `p_r || route_id`.
pub fn pr_mac_message(p_r: u64, route_id: u32) -> Vec<u8> {
    let mut m = Vec::with_capacity(12);
    m.extend_from_slice(&p_r.to_be_bytes());
    m.extend_from_slice(&route_id.to_be_bytes());
    m
}

/// Canonical RREP body covered by every signature in the chain.
pub fn rrep_body(packet: &Packet) -> Vec<u8> {
    let PacketBody::Rrep {
        route,
        p_r,
        dest_seq,
        mac_tag,
        ..
    } = &packet.body
    else {
        panic!("rrep_body called on a non-RREP packet");
    };
    let mut m = Vec::with_capacity(48 + 4 * route.len());
    m.extend_from_slice(b"RREP");
    m.extend_from_slice(&packet.source.0.to_be_bytes());
    m.extend_from_slice(&packet.destination.0.to_be_bytes());
    m.extend_from_slice(&packet.route_id.to_be_bytes());
    m.extend_from_slice(&packet.seq.to_be_bytes());
    m.extend_from_slice(&dest_seq.to_be_bytes());
    m.extend_from_slice(&p_r.to_be_bytes());
    m.extend_from_slice(&mac_tag.0);
    for n in route {
        m.extend_from_slice(&n.0.to_be_bytes());
    }
    m
}

/// Message signed by the k-th signer: the body followed by all earlier tags.
pub fn chain_message(body: &[u8], earlier: &[Signature]) -> Vec<u8> {
    let mut m = body.to_vec();
    for s in earlier {
        m.extend_from_slice(&s.signer.0.to_be_bytes());
        m.extend_from_slice(&s.tag);
    }
    m
}

fn data_mac_message(packet: &Packet) -> Vec<u8> {
    let PacketBody::Data {
        flow,
        payload,
        created_at,
        ..
    } = &packet.body
    else {
        panic!("data_mac_message called on a non-data packet");
    };
    let mut m = Vec::with_capacity(32 + payload.len());
    m.extend_from_slice(b"DATA");
    m.extend_from_slice(&flow.to_be_bytes());
    m.extend_from_slice(&packet.seq.to_be_bytes());
    m.extend_from_slice(&packet.route_id.to_be_bytes());
    m.extend_from_slice(&packet.source.0.to_be_bytes());
    m.extend_from_slice(&packet.destination.0.to_be_bytes());
    m.extend_from_slice(&packet.originator_of_hop.0.to_be_bytes());
    m.extend_from_slice(&created_at.as_micros().to_be_bytes());
    m.extend_from_slice(payload);
    m
}

/// Checks an RREP as seen by the route member at `position`: the chain must
/// hold the destination's signature followed by one per hop between the
/// destination and this node, in route order, each valid; and the MAC over
/// `p_r` must verify under the source/destination key.
pub fn verify_rrep(keys: &KeyStore, packet: &Packet, position: usize) -> bool {
    let PacketBody::Rrep {
        route,
        p_r,
        mac_tag,
        signatures,
        ..
    } = &packet.body
    else {
        return false;
    };
    if route.len() < 2
        || route[0] != packet.source
        || route[route.len() - 1] != packet.destination
        || position + 1 >= route.len()
    {
        return false;
    }
    if signatures.first().map(|s| s.signer) != Some(packet.destination) {
        return false;
    }
    let expected = &route[position + 1..];
    if signatures.len() != expected.len() {
        return false;
    }
    let body = rrep_body(packet);
    for (k, (sig, signer)) in signatures.iter().zip(expected.iter().rev()).enumerate() {
        if sig.signer != *signer {
            return false;
        }
        let msg = chain_message(&body, &signatures[..k]);
        if !verify_sig(&keys.verification_key(*signer), &msg, sig) {
            return false;
        }
    }
    mac_verify(
        &keys.flow_key(packet.source, packet.destination),
        &pr_mac_message(*p_r, packet.route_id),
        mac_tag,
    )
}

// ---------------------------------------------------------------------------
// Node state machine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Node {
    id: NodeId,
    attacker: Option<AttackerProfile>,
    anct: AnctTable,
    seen_rreqs: HashSet<(NodeId, u32)>,
    rreq_seq: u32,
    dest_seq: u32,
    next_route_id: BTreeMap<NodeId, u32>,
    discoveries: BTreeMap<NodeId, DiscoveryState>,
    backoff: BTreeMap<NodeId, SimTime>,
    routes: BTreeMap<NodeId, RouteEntry>,
    buffers: BTreeMap<NodeId, VecDeque<PendingData>>,
    pr: HashMap<NodeId, PrCounter>,
    pending_replies: HashMap<(NodeId, u32), (Vec<NodeId>, u32)>,
    replied: HashSet<(NodeId, u32)>,
}

impl Node {
    pub fn new(id: NodeId, attacker: Option<AttackerProfile>, params: &ProtocolParams) -> Node {
        Node {
            id,
            attacker,
            anct: AnctTable::new(id, params.trust.tc_initial),
            seen_rreqs: HashSet::new(),
            rreq_seq: 0,
            dest_seq: 0,
            next_route_id: BTreeMap::new(),
            discoveries: BTreeMap::new(),
            backoff: BTreeMap::new(),
            routes: BTreeMap::new(),
            buffers: BTreeMap::new(),
            pr: HashMap::new(),
            pending_replies: HashMap::new(),
            replied: HashSet::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn attacker(&self) -> Option<&AttackerProfile> {
        self.attacker.as_ref()
    }

    pub fn anct(&self) -> &AnctTable {
        &self.anct
    }

    pub fn route_to(&self, destination: NodeId) -> Option<&RouteEntry> {
        self.routes.get(&destination)
    }

    pub fn discovery(&self, destination: NodeId) -> Option<&DiscoveryState> {
        self.discoveries.get(&destination)
    }

    /// Packets counted toward `P_R` for `source` since the last reply.
    pub fn pr_count(&self, source: NodeId) -> u64 {
        self.pr.get(&source).map_or(0, |c| c.count)
    }

    pub fn buffered(&self, destination: NodeId) -> usize {
        self.buffers.get(&destination).map_or(0, VecDeque::len)
    }

    /// Whether this node refuses to exchange relayed traffic with `neighbor`.
    pub fn excludes(&self, params: &ProtocolParams, neighbor: NodeId) -> bool {
        params.trust_enabled() && self.anct.is_malicious(neighbor)
    }

    fn wormhole_partner(&self) -> Option<NodeId> {
        self.attacker
            .as_ref()
            .filter(|a| a.kind == AttackKind::Wormhole)
            .and_then(|a| a.partner)
    }

    fn is_blackhole(&self) -> bool {
        self.attacker
            .as_ref()
            .is_some_and(|a| a.kind == AttackKind::Blackhole)
    }

    /// Sends a unicast frame (or tunnels it to a wormhole partner). Returns
    /// false when the next hop cannot be used.
    fn send_to(&self, ctx: &mut Ctx<'_>, to: NodeId, packet: Packet) -> bool {
        if self.wormhole_partner() == Some(to) {
            ctx.emit(Action::Tunnel { to, packet });
            return true;
        }
        if !ctx.links.in_range(self.id, to) || self.excludes(ctx.params, to) {
            return false;
        }
        ctx.emit(Action::Unicast { to, packet });
        true
    }

    // -- route discovery ----------------------------------------------------

    /// Floods a fresh RREQ for `destination` and arms the reply deadline.
    pub fn initiate_discovery(&mut self, ctx: &mut Ctx<'_>, destination: NodeId) -> DiscoveryState {
        self.start_discovery(ctx, destination, 0)
    }

    fn start_discovery(
        &mut self,
        ctx: &mut Ctx<'_>,
        destination: NodeId,
        retries: u32,
    ) -> DiscoveryState {
        let route_id = {
            let r = self.next_route_id.entry(destination).or_insert(0);
            *r += 1;
            *r
        };
        let seq = self.next_rreq_seq();
        let state = DiscoveryState {
            source: self.id,
            destination,
            route_id,
            rreq_seq: seq,
            deadline: ctx.now + ctx.params.rrep_timeout,
            resolved: false,
            retries,
        };
        self.discoveries.insert(destination, state.clone());
        ctx.emit(Action::Broadcast(Packet {
            seq,
            source: self.id,
            destination,
            originator_of_hop: self.id,
            route_id,
            body: PacketBody::Rreq {
                hop_record: vec![self.id],
            },
        }));
        ctx.emit(Action::Timer {
            at: state.deadline,
            timer: Timer::RrepDeadline {
                destination,
                route_id,
            },
        });
        state
    }

    pub(crate) fn next_rreq_seq(&mut self) -> u32 {
        let seq = self.rreq_seq;
        self.rreq_seq += 1;
        self.seen_rreqs.insert((self.id, seq));
        seq
    }

    fn ensure_discovery(&mut self, ctx: &mut Ctx<'_>, destination: NodeId) {
        if self.backoff.contains_key(&destination) {
            return;
        }
        if let Some(d) = self.discoveries.get(&destination) {
            if !d.resolved && ctx.now < d.deadline {
                return;
            }
        }
        self.initiate_discovery(ctx, destination);
    }

    /// Reply deadline expiry: retry with the next route id, or back off after
    /// `max_retries` consecutive failures.
    pub fn handle_timeout(&mut self, ctx: &mut Ctx<'_>, destination: NodeId, route_id: u32) {
        let Some(d) = self.discoveries.get(&destination) else {
            return;
        };
        if d.resolved || d.route_id != route_id {
            return;
        }
        if d.retries < ctx.params.max_retries {
            let retries = d.retries + 1;
            self.start_discovery(ctx, destination, retries);
        } else {
            let until = ctx.now + ctx.params.retry_backoff;
            self.backoff.insert(destination, until);
            ctx.emit(Action::Timer {
                at: until,
                timer: Timer::BackoffEnd { destination },
            });
        }
    }

    fn end_backoff(&mut self, ctx: &mut Ctx<'_>, destination: NodeId) {
        self.backoff.remove(&destination);
        if self.buffered(destination) > 0 {
            self.initiate_discovery(ctx, destination);
        }
    }

    // -- data origination ----------------------------------------------------

    /// Hands one CBR packet to the routing layer at its source.
    pub fn originate_data(&mut self, ctx: &mut Ctx<'_>, destination: NodeId, data: PendingData) {
        if let Some(route) = self.routes.get(&destination).filter(|r| r.valid).cloned() {
            if self.can_use(ctx, route.next_hop) {
                self.transmit_data(ctx, &route, data);
                return;
            }
            if let Some(r) = self.routes.get_mut(&destination) {
                r.valid = false;
            }
        }
        self.buffer(ctx, destination, data);
        self.ensure_discovery(ctx, destination);
    }

    fn can_use(&self, ctx: &Ctx<'_>, next: NodeId) -> bool {
        self.wormhole_partner() == Some(next)
            || (ctx.links.in_range(self.id, next) && !self.excludes(ctx.params, next))
    }

    fn buffer(&mut self, ctx: &mut Ctx<'_>, destination: NodeId, data: PendingData) {
        let cap = ctx.params.send_buffer;
        let q = self.buffers.entry(destination).or_default();
        if q.len() >= cap {
            if let Some(old) = q.pop_front() {
                ctx.emit(Action::DataDropped {
                    flow: old.flow,
                    cause: DropCause::NoRoute,
                    attacker: None,
                });
            }
        }
        q.push_back(data);
    }

    /// Empties every send buffer, returning the flows of the discarded packets.
    pub fn drain_buffers(&mut self) -> Vec<u32> {
        let mut flows = Vec::new();
        for q in self.buffers.values_mut() {
            flows.extend(q.drain(..).map(|p| p.flow));
        }
        flows
    }

    fn seal_data(
        &self,
        ctx: &Ctx<'_>,
        template: &Packet,
        next: NodeId,
        plaintext: &[u8],
    ) -> Packet {
        let mut packet = template.clone();
        packet.originator_of_hop = self.id;
        let trust = ctx.params.trust_enabled();
        let keys = trust.then(|| ctx.keys.link_keys(self.id, next));
        if let PacketBody::Data { payload, .. } = &mut packet.body {
            *payload = match &keys {
                Some(k) => ctr_encrypt(
                    &k.cipher,
                    CounterValue::for_frame(template.route_id, template.seq),
                    plaintext,
                ),
                None => plaintext.to_vec(),
            };
        }
        let tag = keys
            .map(|k| mac_compute(&k.mac, &data_mac_message(&packet)))
            .unwrap_or_default();
        if let PacketBody::Data { mac_tag, .. } = &mut packet.body {
            *mac_tag = tag;
        }
        packet
    }

    fn transmit_data(&mut self, ctx: &mut Ctx<'_>, route: &RouteEntry, data: PendingData) {
        let template = Packet {
            seq: data.seq,
            source: self.id,
            destination: route.destination,
            originator_of_hop: self.id,
            route_id: route.route_id,
            body: PacketBody::Data {
                flow: data.flow,
                route: route.full_path.clone(),
                payload: Vec::new(),
                mac_tag: MacTag::default(),
                created_at: data.created_at,
            },
        };
        let frame = self.seal_data(ctx, &template, route.next_hop, &data.payload);
        if !self.send_to(ctx, route.next_hop, frame) {
            ctx.emit(Action::DataDropped {
                flow: data.flow,
                cause: DropCause::NoRoute,
                attacker: None,
            });
        }
    }

    /// Marks the route invalid if it is still the one that broke.
    pub fn route_broken(&mut self, destination: NodeId, route_id: u32) {
        if let Some(r) = self.routes.get_mut(&destination) {
            if r.route_id == route_id {
                r.valid = false;
            }
        }
    }

    // -- frame reception -----------------------------------------------------

    pub fn on_frame(&mut self, ctx: &mut Ctx<'_>, from: NodeId, packet: &Packet, tunneled: bool) {
        if ctx.params.trust_enabled() {
            self.anct.record_reception(from);
        }
        if self.excludes(ctx.params, from) {
            if let PacketBody::Data { flow, .. } = packet.body {
                ctx.emit(Action::DataDropped {
                    flow,
                    cause: DropCause::NoRoute,
                    attacker: None,
                });
            }
            return;
        }
        match packet.kind() {
            PacketKind::Rreq => self.handle_rreq(ctx, from, packet, tunneled),
            PacketKind::Rrep => self.handle_rrep(ctx, from, packet),
            PacketKind::Data => self.handle_data(ctx, from, packet),
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx<'_>, timer: Timer) {
        match timer {
            Timer::RrepDeadline {
                destination,
                route_id,
            } => self.handle_timeout(ctx, destination, route_id),
            Timer::ReplyWindow { source, seq } => self.send_reply(ctx, source, seq),
            Timer::BackoffEnd { destination } => self.end_backoff(ctx, destination),
        }
    }

    /// One flooding burst (flooding attackers only).
    pub fn flood_tick<R: Rng + ?Sized>(&mut self, ctx: &mut Ctx<'_>, rng: &mut R) {
        let seq = self.next_rreq_seq();
        let rreq = adversary::flooder_tick(self.id, seq, ctx.params.node_count, rng);
        ctx.emit(Action::Broadcast(rreq));
    }

    fn handle_rreq(&mut self, ctx: &mut Ctx<'_>, from: NodeId, packet: &Packet, tunneled: bool) {
        if packet.destination == self.id {
            self.destination_on_rreq(ctx, packet);
            return;
        }
        if packet.source == self.id || !self.seen_rreqs.insert((packet.source, packet.seq)) {
            return;
        }
        if self.is_blackhole() {
            let forged = adversary::blackhole_on_rreq(
                self.id,
                &ctx.keys.signing_key(self.id),
                packet,
            );
            self.send_to(ctx, from, forged);
            return;
        }
        if let Some(partner) = self.wormhole_partner() {
            ctx.emit(adversary::wormhole_relay(self.id, partner, packet, tunneled));
            return;
        }
        let mut fwd = packet.clone();
        fwd.originator_of_hop = self.id;
        if let PacketBody::Rreq { hop_record } = &mut fwd.body {
            hop_record.push(self.id);
        }
        ctx.emit(Action::Broadcast(fwd));
    }

    /// Counts the RREQ toward `P_R`; the first copy of a new discovery opens
    /// the reply collection window.
    pub fn destination_on_rreq(&mut self, ctx: &mut Ctx<'_>, packet: &Packet) {
        let PacketBody::Rreq { hop_record } = &packet.body else {
            return;
        };
        self.pr.entry(packet.source).or_default().count += 1;
        let key = (packet.source, packet.seq);
        if self.replied.contains(&key) || self.pending_replies.contains_key(&key) {
            return;
        }
        let mut route = hop_record.clone();
        route.push(self.id);
        self.pending_replies.insert(key, (route, packet.route_id));
        ctx.emit(Action::Timer {
            at: ctx.now + ctx.params.collection_window,
            timer: Timer::ReplyWindow {
                source: packet.source,
                seq: packet.seq,
            },
        });
    }

    /// Builds the reply for a closed collection window.
    pub fn build_reply(&mut self, keys: &KeyStore, source: NodeId, seq: u32) -> Option<Packet> {
        let key = (source, seq);
        let (route, route_id) = self.pending_replies.remove(&key)?;
        self.replied.insert(key);
        let p_r = std::mem::take(&mut self.pr.entry(source).or_default().count);
        self.dest_seq += 1;
        let mac_tag = mac_compute(&keys.flow_key(source, self.id), &pr_mac_message(p_r, route_id));
        let mut packet = Packet {
            seq,
            source,
            destination: self.id,
            originator_of_hop: self.id,
            route_id,
            body: PacketBody::Rrep {
                route,
                p_r,
                dest_seq: self.dest_seq,
                mac_tag,
                signatures: Vec::new(),
            },
        };
        let sig = sign(&keys.signing_key(self.id), &rrep_body(&packet));
        if let PacketBody::Rrep { signatures, .. } = &mut packet.body {
            signatures.push(sig);
        }
        Some(packet)
    }

    fn send_reply(&mut self, ctx: &mut Ctx<'_>, source: NodeId, seq: u32) {
        let Some(packet) = self.build_reply(ctx.keys, source, seq) else {
            return;
        };
        let route = packet.route().expect("reply carries a route");
        let prev = route[route.len() - 2];
        self.send_to(ctx, prev, packet);
    }

    fn handle_rrep(&mut self, ctx: &mut Ctx<'_>, from: NodeId, packet: &Packet) {
        let PacketBody::Rrep { route, p_r, .. } = &packet.body else {
            return;
        };
        let Some(pos) = route.iter().position(|&n| n == self.id) else {
            return;
        };
        if route.get(pos + 1) != Some(&from) {
            return;
        }
        if ctx.params.trust_enabled() {
            let verified = verify_rrep(ctx.keys, packet, pos);
            let record = self
                .anct
                .evaluate(from, verified, *p_r, &ctx.params.trust, ctx.now);
            ctx.trace.push(record);
            if !verified {
                return;
            }
        }
        if packet.source == self.id {
            self.source_on_rrep(ctx, packet);
            return;
        }
        if pos == 0 {
            return;
        }
        let prev = route[pos - 1];
        let mut fwd = packet.clone();
        fwd.originator_of_hop = self.id;
        let body = rrep_body(&fwd);
        if let PacketBody::Rrep { signatures, .. } = &mut fwd.body {
            let sig = sign(
                &ctx.keys.signing_key(self.id),
                &chain_message(&body, signatures),
            );
            signatures.push(sig);
        }
        self.send_to(ctx, prev, fwd);
    }

    /// Installs the route carried by a verified reply for the open discovery
    /// and flushes the send buffer along it.
    pub fn source_on_rrep(&mut self, ctx: &mut Ctx<'_>, packet: &Packet) -> Option<RouteEntry> {
        let route = packet.route()?.to_vec();
        let destination = packet.destination;
        let d = self.discoveries.get_mut(&destination)?;
        if d.resolved || d.route_id != packet.route_id || ctx.now > d.deadline {
            return None;
        }
        d.resolved = true;
        let entry = RouteEntry {
            destination,
            next_hop: route[1],
            full_path: route,
            route_id: packet.route_id,
            established_at: ctx.now,
            valid: true,
        };
        self.routes.insert(destination, entry.clone());
        if let Some(mut q) = self.buffers.remove(&destination) {
            while let Some(data) = q.pop_front() {
                self.originate_data(ctx, destination, data);
            }
        }
        Some(entry)
    }

    fn handle_data(&mut self, ctx: &mut Ctx<'_>, from: NodeId, packet: &Packet) {
        let PacketBody::Data {
            flow,
            route,
            payload,
            mac_tag,
            created_at,
        } = &packet.body
        else {
            return;
        };
        let flow = *flow;
        let drop = |ctx: &mut Ctx<'_>, cause, attacker| {
            ctx.emit(Action::DataDropped {
                flow,
                cause,
                attacker,
            })
        };

        let plaintext = if ctx.params.trust_enabled() {
            let keys = ctx.keys.link_keys(from, self.id);
            if !mac_verify(&keys.mac, &data_mac_message(packet), mac_tag) {
                drop(ctx, DropCause::LinkLoss, None);
                return;
            }
            ctr_decrypt(
                &keys.cipher,
                CounterValue::for_frame(packet.route_id, packet.seq),
                payload,
            )
        } else {
            payload.clone()
        };

        if packet.destination == self.id {
            self.pr.entry(packet.source).or_default().count += 1;
            ctx.emit(Action::Delivered {
                flow,
                seq: packet.seq,
                created_at: *created_at,
                hops: route.len().saturating_sub(1),
                plaintext,
            });
            return;
        }

        if let Some(a) = &self.attacker {
            if adversary::drops_data(a, ctx.params.wormhole_drops_data) {
                drop(ctx, DropCause::Attacker, Some(self.id));
                return;
            }
        }

        let next = route
            .iter()
            .position(|&n| n == self.id)
            .and_then(|i| route.get(i + 1))
            .copied();
        let Some(next) = next.filter(|&n| self.can_use(ctx, n)) else {
            drop(ctx, DropCause::NoRoute, None);
            ctx.emit(Action::RouteBroken {
                source: packet.source,
                destination: packet.destination,
                route_id: packet.route_id,
            });
            return;
        };
        let frame = self.seal_data(ctx, packet, next, &plaintext);
        self.send_to(ctx, next, frame);
    }
}
