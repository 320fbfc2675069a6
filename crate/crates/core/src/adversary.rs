//! Attacker placement and the behavior of blackhole, flooding and wormhole
//! nodes. Attackers are otherwise ordinary nodes: these functions are called
//! from the node state machine at the points where an attacker deviates.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::crypto::{sign, MacTag, Signature, SigningKey};
use crate::model::{AttackKind, NodeId, Packet, PacketBody, ScenarioConfig};
use crate::routing::{chain_message, rrep_body, Action};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackerProfile {
    pub node: NodeId,
    pub kind: AttackKind,
    /// Tunnel endpoint for wormhole attackers.
    pub partner: Option<NodeId>,
    /// RREQs per second for flooders.
    pub flood_rate: f64,
}

/// Chooses attackers among the nodes that are not flow endpoints. Random
/// placement shuffles the candidates with `rng` and takes a prefix, so for a
/// fixed seed the attacker set for `k` is contained in the set for `k + 1`.
/// Wormhole attackers are paired in order: (0, 1), (2, 3), ...
pub fn place_attackers<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    flow_endpoints: &[NodeId],
    rng: &mut R,
) -> Vec<AttackerProfile> {
    let count = cfg.effective_attackers() as usize;
    let nodes: Vec<NodeId> = match &cfg.attacker_nodes {
        Some(explicit) => explicit.iter().copied().take(count).collect(),
        None => {
            let mut candidates: Vec<NodeId> = (0..cfg.node_count)
                .map(NodeId)
                .filter(|n| !flow_endpoints.contains(n))
                .collect();
            candidates.shuffle(rng);
            candidates.truncate(count);
            candidates
        }
    };
    nodes
        .iter()
        .enumerate()
        .map(|(i, &node)| AttackerProfile {
            node,
            kind: cfg.attack_kind,
            partner: (cfg.attack_kind == AttackKind::Wormhole).then(|| nodes[i ^ 1]),
            flood_rate: cfg.flood_rate,
        })
        .collect()
}

/// Forged reply from a blackhole: claims a one-hop route to the destination
/// with the freshest possible sequence number. It cannot produce the
/// destination's signature or the end-to-end MAC, so both are junk.
pub fn blackhole_on_rreq(attacker: NodeId, key: &SigningKey, rreq: &Packet) -> Packet {
    let PacketBody::Rreq { hop_record } = &rreq.body else {
        panic!("blackhole_on_rreq called on a non-RREQ packet");
    };
    let mut route = hop_record.clone();
    route.push(attacker);
    route.push(rreq.destination);
    let mut packet = Packet {
        seq: rreq.seq,
        source: rreq.source,
        destination: rreq.destination,
        originator_of_hop: attacker,
        route_id: rreq.route_id,
        body: PacketBody::Rrep {
            route,
            p_r: 1,
            dest_seq: u32::MAX,
            mac_tag: MacTag(key.tag(b"forged-mac")),
            signatures: Vec::new(),
        },
    };
    let body = rrep_body(&packet);
    let forged = Signature {
        signer: rreq.destination,
        tag: key.tag(&body),
    };
    let own = sign(key, &chain_message(&body, &[forged]));
    if let PacketBody::Rrep { signatures, .. } = &mut packet.body {
        signatures.push(forged);
        signatures.push(own);
    }
    packet
}

/// One flooding RREQ, addressed to a node id that does not exist so that it
/// floods the whole connected component.
pub fn flooder_tick<R: Rng + ?Sized>(
    attacker: NodeId,
    seq: u32,
    node_count: u32,
    rng: &mut R,
) -> Packet {
    let bogus = NodeId(node_count + rng.gen_range(0..node_count.max(1)));
    Packet {
        seq,
        source: attacker,
        destination: bogus,
        originator_of_hop: attacker,
        route_id: 1,
        body: PacketBody::Rreq {
            hop_record: vec![attacker],
        },
    }
}

/// Wormhole relay of an RREQ: a copy heard over the air goes through the
/// tunnel, a tunneled copy is rebroadcast at the far end.
pub fn wormhole_relay(attacker: NodeId, partner: NodeId, rreq: &Packet, tunneled: bool) -> Action {
    let mut fwd = rreq.clone();
    fwd.originator_of_hop = attacker;
    if let PacketBody::Rreq { hop_record } = &mut fwd.body {
        hop_record.push(attacker);
    }
    if tunneled {
        Action::Broadcast(fwd)
    } else {
        Action::Tunnel {
            to: partner,
            packet: fwd,
        }
    }
}

/// Whether the attacker discards data frames it is asked to relay.
pub fn drops_data(profile: &AttackerProfile, wormhole_drops_data: bool) -> bool {
    match profile.kind {
        AttackKind::Blackhole => true,
        AttackKind::Wormhole => wormhole_drops_data,
        AttackKind::Flooding | AttackKind::None => false,
    }
}
