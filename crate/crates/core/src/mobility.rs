//! Random waypoint mobility and disk-graph connectivity snapshots.

use rand::Rng;

use crate::model::{distance, NodeId, Position, ScenarioConfig, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointState {
    pub node: NodeId,
    pub current: Position,
    pub target: Position,
    pub speed: f64,
    /// The node stays put until this instant.
    pub pause_until: SimTime,
}

/// Random waypoint parameters for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWaypoint {
    pub width: f64,
    pub height: f64,
    pub speed: f64,
    pub pause: SimTime,
}

impl RandomWaypoint {
    pub fn from_config(cfg: &ScenarioConfig) -> RandomWaypoint {
        RandomWaypoint {
            width: cfg.area_width,
            height: cfg.area_height,
            speed: cfg.speed,
            pause: SimTime::from_secs_f64(cfg.pause_time),
        }
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(rng.gen_range(0.0..=self.width), rng.gen_range(0.0..=self.height))
    }

    fn clamp(&self, p: Position) -> Position {
        Position::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    /// Initial states: uniform positions and targets, or the fixed positions
    /// given (each node then starts at rest on its own waypoint).
    pub fn init_positions<R: Rng + ?Sized>(
        &self,
        node_count: u32,
        fixed: Option<&[Position]>,
        rng: &mut R,
    ) -> Vec<WaypointState> {
        (0..node_count)
            .map(|i| {
                let (current, target) = match fixed {
                    Some(ps) => (ps[i as usize], ps[i as usize]),
                    None => (self.random_point(rng), self.random_point(rng)),
                };
                WaypointState {
                    node: NodeId(i),
                    current,
                    target,
                    speed: self.speed,
                    pause_until: SimTime::ZERO,
                }
            })
            .collect()
    }

    /// Moves a node from `from` to `to`. Travel is straight-line at constant
    /// speed; on arrival the node pauses, then draws a fresh uniform target.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        state: &WaypointState,
        from: SimTime,
        to: SimTime,
        rng: &mut R,
    ) -> WaypointState {
        assert!(to >= from, "cannot advance backwards in time");
        let mut s = state.clone();
        let mut t = from;
        while t < to {
            if t < s.pause_until {
                t = s.pause_until.min(to);
                continue;
            }
            if s.speed <= 0.0 {
                break;
            }
            if s.current == s.target {
                s.target = self.random_point(rng);
                if s.current == s.target {
                    break;
                }
            }
            let remaining = distance(s.current, s.target);
            let needed = remaining / s.speed;
            let available = (to - t).as_secs_f64();
            if needed <= available {
                s.current = s.target;
                let arrival = (t + SimTime::from_secs_f64(needed)).min(to);
                s.pause_until = arrival + self.pause;
                t = arrival;
            } else {
                let f = available / needed;
                s.current = self.clamp(Position::new(
                    s.current.x + (s.target.x - s.current.x) * f,
                    s.current.y + (s.target.y - s.current.y) * f,
                ));
                t = to;
            }
        }
        s
    }
}

/// Who can hear whom at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectivity {
    positions: Vec<Position>,
    adjacency: Vec<Vec<NodeId>>,
    matrix: Vec<bool>,
}

impl Connectivity {
    /// Connectivity given directly as undirected links, for hand-built
    /// topologies. Positions are all at the origin.
    pub fn from_edges(node_count: usize, edges: &[(u32, u32)]) -> Connectivity {
        let n = node_count;
        let mut matrix = vec![false; n * n];
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            let (a, b) = (a as usize, b as usize);
            assert!(a != b && a < n && b < n, "bad edge {a}-{b}");
            if !matrix[a * n + b] {
                matrix[a * n + b] = true;
                matrix[b * n + a] = true;
                adjacency[a].push(NodeId(b as u32));
                adjacency[b].push(NodeId(a as u32));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Connectivity {
            positions: vec![Position::default(); n],
            adjacency,
            matrix,
        }
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.index()]
    }

    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        let n = self.positions.len();
        a.index() < n && b.index() < n && self.matrix[a.index() * n + b.index()]
    }

    pub fn position(&self, node: NodeId) -> Position {
        self.positions[node.index()]
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }
}

/// Disk-graph adjacency: nodes are adjacent iff their distance is at most
/// `radio_range`.
pub fn neighbors(positions: &[Position], radio_range: f64) -> Connectivity {
    let n = positions.len();
    let mut matrix = vec![false; n * n];
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if distance(positions[i], positions[j]) <= radio_range {
                matrix[i * n + j] = true;
                matrix[j * n + i] = true;
                adjacency[i].push(NodeId(j as u32));
                adjacency[j].push(NodeId(i as u32));
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Connectivity {
        positions: positions.to_vec(),
        adjacency,
        matrix,
    }
}
