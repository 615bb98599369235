//! Platoon line graph: nodes, directional and bidirectional links, flows and
//! the one-hop-interference feasibility structure.
//!
//! Node 0 is the platoon leader, nodes `1..=n_r` are platoon members and node
//! `n_r + 1` is the tail. Links and flows use 1-based ids:
//!
//! * right-hand link `l` in `1..=n_r+1` carries `l-1 -> l`,
//! * left-hand link `l` in `n_r+2..=2(n_r+1)` carries `l-n_r-1 -> l-n_r-2`,
//! * bidirectional link `b` pairs right-hand link `b` with its mirror `b+n_r+1`.
//!
//! Right-hand flow `f` runs from the leader to node `f`; left-hand flow `f`
//! runs from node `f-n_r-1` back to the leader.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest platoon accepted by [`Topology::new`]. Feasible-set enumeration
/// grows exponentially with the platoon length.
pub const MAX_VEHICLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BidiId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowId(pub usize);

macro_rules! one_based {
    ($($ty:ident),*) => {$(
        impl $ty {
            /// Zero-based position for indexing dense vectors.
            pub fn index(self) -> usize {
                self.0 - 1
            }

            pub fn from_index(index: usize) -> Self {
                $ty(index + 1)
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    )*};
}

one_based!(LinkId, BidiId, FlowId);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DuplexMode {
    Half,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Away from the platoon leader.
    RightHand,
    /// Towards the platoon leader.
    LeftHand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionalLink {
    pub id: LinkId,
    pub tx: NodeId,
    pub rx: NodeId,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidirectionalLink {
    pub id: BidiId,
    pub right: LinkId,
    pub left: LinkId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: FlowId,
    pub source: NodeId,
    pub destination: NodeId,
    pub direction: Direction,
    /// Links of the route in traversal order, source first.
    pub route: Vec<LinkId>,
    /// Default backlog exponent derived from the hop count.
    pub gamma: f64,
}

impl Flow {
    pub fn hops(&self) -> usize {
        self.route.len()
    }

    pub fn uses(&self, link: LinkId) -> bool {
        self.route.contains(&link)
    }
}

/// Set of directional links stored as a bitmask (bit `l-1` for link `l`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LinkSet(pub u64);

impl LinkSet {
    pub const EMPTY: LinkSet = LinkSet(0);

    pub fn contains(self, link: LinkId) -> bool {
        self.0 & (1 << link.index()) != 0
    }

    pub fn insert(&mut self, link: LinkId) {
        self.0 |= 1 << link.index();
    }

    pub fn with(self, link: LinkId) -> LinkSet {
        LinkSet(self.0 | (1 << link.index()))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: LinkSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = LinkId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(LinkId::from_index(i))
        })
    }
}

impl FromIterator<LinkId> for LinkSet {
    fn from_iter<I: IntoIterator<Item = LinkId>>(iter: I) -> Self {
        let mut set = LinkSet::EMPTY;
        for l in iter {
            set.insert(l);
        }
        set
    }
}

/// Backlog exponent for a flow with `hops` hops in a platoon whose longest
/// route has `max_hops` hops.
pub fn default_gamma(hops: usize, max_hops: usize) -> f64 {
    if hops >= max_hops {
        1.0
    } else if hops == 1 {
        0.8
    } else {
        0.9
    }
}

#[derive(Debug)]
pub struct Topology {
    modes: Vec<DuplexMode>,
    links: Vec<DirectionalLink>,
    bidi: Vec<BidirectionalLink>,
    flows: Vec<Flow>,
    /// Links transmitted (resp. received) by each node.
    tx_links: Vec<Vec<LinkId>>,
    rx_links: Vec<Vec<LinkId>>,
    feasible: OnceLock<Vec<LinkSet>>,
}

impl Clone for Topology {
    fn clone(&self) -> Self {
        Topology {
            modes: self.modes.clone(),
            links: self.links.clone(),
            bidi: self.bidi.clone(),
            flows: self.flows.clone(),
            tx_links: self.tx_links.clone(),
            rx_links: self.rx_links.clone(),
            feasible: OnceLock::new(),
        }
    }
}

impl Topology {
    /// Builds the platoon graph for `n_vehicles` vehicles, marking the nodes in
    /// `fd_positions` as full-duplex.
    pub fn new(n_vehicles: usize, fd_positions: &BTreeSet<usize>) -> Result<Self> {
        if n_vehicles < 3 {
            return Err(Error::TooFewVehicles(n_vehicles));
        }
        if n_vehicles > MAX_VEHICLES {
            return Err(Error::TooManyVehicles(n_vehicles));
        }
        if let Some(&bad) = fd_positions.iter().find(|&&p| p >= n_vehicles) {
            return Err(Error::NodeOutOfRange {
                node: bad,
                last: n_vehicles - 1,
            });
        }

        let n_r = n_vehicles - 2;
        let half = n_r + 1;
        let modes = (0..n_vehicles)
            .map(|i| {
                if fd_positions.contains(&i) {
                    DuplexMode::Full
                } else {
                    DuplexMode::Half
                }
            })
            .collect();

        let mut links = Vec::with_capacity(2 * half);
        for l in 1..=half {
            links.push(DirectionalLink {
                id: LinkId(l),
                tx: NodeId(l - 1),
                rx: NodeId(l),
                direction: Direction::RightHand,
            });
        }
        for l in half + 1..=2 * half {
            links.push(DirectionalLink {
                id: LinkId(l),
                tx: NodeId(l - half),
                rx: NodeId(l - half - 1),
                direction: Direction::LeftHand,
            });
        }

        let bidi = (1..=half)
            .map(|b| BidirectionalLink {
                id: BidiId(b),
                right: LinkId(b),
                left: LinkId(b + half),
            })
            .collect();

        let mut flows = Vec::with_capacity(2 * half);
        for f in 1..=half {
            let route: Vec<LinkId> = (1..=f).map(LinkId).collect();
            flows.push(Flow {
                id: FlowId(f),
                source: NodeId(0),
                destination: NodeId(f),
                direction: Direction::RightHand,
                gamma: default_gamma(route.len(), half),
                route,
            });
        }
        for f in half + 1..=2 * half {
            let route: Vec<LinkId> = (half + 1..=f).rev().map(LinkId).collect();
            flows.push(Flow {
                id: FlowId(f),
                source: NodeId(f - half),
                destination: NodeId(0),
                direction: Direction::LeftHand,
                gamma: default_gamma(route.len(), half),
                route,
            });
        }

        let mut tx_links = vec![Vec::new(); n_vehicles];
        let mut rx_links = vec![Vec::new(); n_vehicles];
        for link in &links {
            tx_links[link.tx.0].push(link.id);
            rx_links[link.rx.0].push(link.id);
        }

        Ok(Topology {
            modes,
            links,
            bidi,
            flows,
            tx_links,
            rx_links,
            feasible: OnceLock::new(),
        })
    }

    /// Number of vehicles `N`.
    pub fn num_nodes(&self) -> usize {
        self.modes.len()
    }

    /// Number of platoon members `N_r = N - 2`.
    pub fn num_members(&self) -> usize {
        self.modes.len() - 2
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn mode(&self, node: NodeId) -> DuplexMode {
        self.modes[node.0]
    }

    pub fn is_full_duplex(&self, node: NodeId) -> bool {
        self.modes[node.0] == DuplexMode::Full
    }

    pub fn fd_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == DuplexMode::Full)
            .map(|(i, _)| NodeId(i))
    }

    pub fn links(&self) -> &[DirectionalLink] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Result<&DirectionalLink> {
        if id.0 == 0 {
            return Err(Error::InvalidLink(id));
        }
        self.links.get(id.index()).ok_or(Error::InvalidLink(id))
    }

    pub fn bidi_links(&self) -> &[BidirectionalLink] {
        &self.bidi
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn flow(&self, id: FlowId) -> Result<&Flow> {
        if id.0 == 0 {
            return Err(Error::InvalidFlow(id));
        }
        self.flows.get(id.index()).ok_or(Error::InvalidFlow(id))
    }

    pub fn default_gammas(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.gamma).collect()
    }

    /// The directional link connecting the same node pair in the opposite direction.
    pub fn mirror(&self, id: LinkId) -> LinkId {
        let half = self.num_members() + 1;
        if id.0 <= half {
            LinkId(id.0 + half)
        } else {
            LinkId(id.0 - half)
        }
    }

    pub fn bidi_of(&self, id: LinkId) -> BidiId {
        let half = self.num_members() + 1;
        BidiId((id.0 - 1) % half + 1)
    }

    pub fn tx_links(&self, node: NodeId) -> &[LinkId] {
        &self.tx_links[node.0]
    }

    pub fn rx_links(&self, node: NodeId) -> &[LinkId] {
        &self.rx_links[node.0]
    }

    /// Flows allowed on `link`, ascending by id.
    pub fn flows_on(&self, link: LinkId) -> impl Iterator<Item = &Flow> + '_ {
        self.flows.iter().filter(move |f| f.uses(link))
    }

    /// Number of flows routed over `link`.
    pub fn congestion(&self, link: LinkId) -> Result<usize> {
        self.link(link)?;
        Ok(self.flows_on(link).count())
    }

    /// Whether `set` can be activated in one slot: every node transmits on at
    /// most one link and receives on at most one, and a half-duplex node
    /// touches at most one active link.
    pub fn is_feasible(&self, set: LinkSet) -> bool {
        if set.0 >> self.links.len() != 0 {
            return false;
        }
        (0..self.num_nodes()).all(|i| {
            let node = NodeId(i);
            let tx = self.tx_links[i]
                .iter()
                .filter(|&&l| set.contains(l))
                .count();
            let rx = self.rx_links[i]
                .iter()
                .filter(|&&l| set.contains(l))
                .count();
            match self.mode(node) {
                DuplexMode::Half => tx + rx <= 1,
                DuplexMode::Full => tx <= 1 && rx <= 1,
            }
        })
    }

    /// All link sets that can be active simultaneously, including the empty
    /// set, in depth-first order over ascending link ids.
    pub fn conflict_free_sets(&self) -> &[LinkSet] {
        self.feasible.get_or_init(|| {
            let mut out = Vec::new();
            self.extend_feasible(0, LinkSet::EMPTY, &mut out);
            out
        })
    }

    fn extend_feasible(&self, next: usize, current: LinkSet, out: &mut Vec<LinkSet>) {
        if next == self.links.len() {
            out.push(current);
            return;
        }
        self.extend_feasible(next + 1, current, out);
        let with = current.with(LinkId::from_index(next));
        if self.is_feasible(with) {
            self.extend_feasible(next + 1, with, out);
        }
    }
}
