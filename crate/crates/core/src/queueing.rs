//! Poisson packet arrivals and per-node, per-flow FIFO queues with
//! store-and-forward relaying at bit granularity.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Flow, FlowId, LinkId, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub flow: FlowId,
    pub size: u64,
    pub arrival_slot: u64,
    pub delivered_slot: Option<u64>,
    /// Bits still to send over the current hop.
    pub remaining_at_head: u64,
}

impl Packet {
    pub fn new(id: u64, flow: FlowId, size: u64, arrival_slot: u64) -> Self {
        Packet {
            id,
            flow,
            size,
            arrival_slot,
            delivered_slot: None,
            remaining_at_head: size,
        }
    }

    /// End-to-end latency in slots, `None` while the packet is in the network.
    pub fn latency(&self) -> Option<u64> {
        self.delivered_slot.map(|d| d - self.arrival_slot)
    }
}

pub fn slots_to_ms(slots: f64, slot_duration: f64) -> f64 {
    slots * slot_duration * 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrivalConfig {
    /// Mean packets per slot for every flow.
    pub rate: f64,
    /// Candidate packet sizes in bits, drawn uniformly.
    pub packet_sizes: Vec<u64>,
}

impl Default for ArrivalConfig {
    fn default() -> Self {
        ArrivalConfig {
            rate: 0.04,
            packet_sizes: vec![40_000, 72_000, 104_000, 136_000],
        }
    }
}

impl ArrivalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::config(
                "arrivals.rate",
                format!("must be a non-negative number, got {}", self.rate),
            ));
        }
        if self.packet_sizes.is_empty() {
            return Err(Error::config("arrivals.packet_sizes", "must not be empty"));
        }
        if self.packet_sizes.contains(&0) {
            return Err(Error::config(
                "arrivals.packet_sizes",
                "sizes must be positive",
            ));
        }
        Ok(())
    }
}

/// Draws this slot's arrivals for every flow. Packet ids are taken from
/// `next_id`, which is advanced.
pub fn generate_arrivals<R: Rng + ?Sized>(
    config: &ArrivalConfig,
    flows: &[Flow],
    slot: u64,
    rng: &mut R,
    next_id: &mut u64,
) -> Vec<Packet> {
    let mut out = Vec::new();
    if config.rate <= 0.0 {
        return out;
    }
    let poisson = Poisson::new(config.rate).expect("rate validated positive");
    for flow in flows {
        let count = poisson.sample(rng) as u64;
        for _ in 0..count {
            let size = config.packet_sizes[rng.random_range(0..config.packet_sizes.len())];
            out.push(Packet::new(*next_id, flow.id, size, slot));
            *next_id += 1;
        }
    }
    out
}

/// Bit accounting used to check conservation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BitLedger {
    pub arrived: u64,
    pub delivered: u64,
    /// Remaining bits of all queued packets, i.e. the sum of all backlogs.
    pub queued: u64,
    /// Bits already sent for partially transmitted packets plus packets
    /// received this slot and not yet committed to the next queue.
    pub in_flight: u64,
}

impl BitLedger {
    pub fn balanced(&self) -> bool {
        self.arrived == self.delivered + self.queued + self.in_flight
    }
}

#[derive(Debug, Clone)]
pub struct QueueState {
    num_flows: usize,
    queues: Vec<VecDeque<Packet>>,
    backlog: Vec<u64>,
    staged: Vec<(NodeId, Packet)>,
    delivered: Vec<Packet>,
    arrived_bits: u64,
    delivered_bits: u64,
}

impl QueueState {
    pub fn new(topology: &Topology) -> Self {
        let cells = topology.num_nodes() * topology.num_flows();
        QueueState {
            num_flows: topology.num_flows(),
            queues: vec![VecDeque::new(); cells],
            backlog: vec![0; cells],
            staged: Vec::new(),
            delivered: Vec::new(),
            arrived_bits: 0,
            delivered_bits: 0,
        }
    }

    fn cell(&self, node: NodeId, flow: FlowId) -> usize {
        node.0 * self.num_flows + flow.index()
    }

    /// Backlog `Q_i^f` in bits.
    pub fn backlog(&self, node: NodeId, flow: FlowId) -> u64 {
        self.backlog[self.cell(node, flow)]
    }

    pub fn queue(&self, node: NodeId, flow: FlowId) -> &VecDeque<Packet> {
        &self.queues[self.cell(node, flow)]
    }

    pub fn total_backlog(&self) -> u64 {
        self.backlog.iter().sum()
    }

    /// Places a freshly arrived packet at its flow's source.
    pub fn enqueue(&mut self, topology: &Topology, packet: Packet) -> Result<()> {
        let source = topology.flow(packet.flow)?.source;
        self.arrived_bits += packet.size;
        self.push(source, packet);
        Ok(())
    }

    fn push(&mut self, node: NodeId, packet: Packet) {
        let c = self.cell(node, packet.flow);
        self.backlog[c] += packet.remaining_at_head;
        self.queues[c].push_back(packet);
    }

    /// Sends up to `budget` bits of `flow` over `link` from the link's
    /// transmitter, FIFO and across packet boundaries. Completed packets are
    /// delivered if the receiver is the destination, otherwise held until
    /// [`QueueState::commit`]. Returns the number of bits sent.
    pub fn serve(
        &mut self,
        topology: &Topology,
        link: LinkId,
        flow: FlowId,
        budget: u64,
        slot: u64,
    ) -> Result<u64> {
        let l = topology.link(link)?;
        let f = topology.flow(flow)?;
        if !f.uses(link) {
            return Err(Error::LinkNotInRoute { link, flow });
        }
        let (rx, destination) = (l.rx, f.destination);
        let c = self.cell(l.tx, flow);
        let mut left = budget.min(self.backlog[c]);
        let sent = left;
        self.backlog[c] -= sent;
        while left > 0 {
            let head = self.queues[c]
                .front_mut()
                .expect("backlog implies a packet");
            let take = left.min(head.remaining_at_head);
            head.remaining_at_head -= take;
            left -= take;
            if head.remaining_at_head == 0 {
                let mut packet = self.queues[c].pop_front().expect("head exists");
                if rx == destination {
                    packet.delivered_slot = Some(slot);
                    self.delivered_bits += packet.size;
                    self.delivered.push(packet);
                } else {
                    packet.remaining_at_head = packet.size;
                    self.staged.push((rx, packet));
                }
            }
        }
        Ok(sent)
    }

    /// Moves packets received during the slot into their next-hop queues.
    pub fn commit(&mut self) {
        for (node, packet) in std::mem::take(&mut self.staged) {
            self.push(node, packet);
        }
    }

    /// Packets delivered since the last call.
    pub fn take_delivered(&mut self) -> Vec<Packet> {
        std::mem::take(&mut self.delivered)
    }

    pub fn ledger(&self) -> BitLedger {
        let heads: u64 = self
            .queues
            .iter()
            .filter_map(|q| q.front())
            .map(|p| p.size - p.remaining_at_head)
            .sum();
        let staged: u64 = self.staged.iter().map(|(_, p)| p.size).sum();
        BitLedger {
            arrived: self.arrived_bits,
            delivered: self.delivered_bits,
            queued: self.total_backlog(),
            in_flight: heads + staged,
        }
    }

    /// Packets still inside the network, per flow.
    pub fn undelivered_by_flow(&self) -> Vec<u64> {
        let mut out = vec![0; self.num_flows];
        for q in &self.queues {
            for p in q {
                out[p.flow.index()] += 1;
            }
        }
        for (_, p) in &self.staged {
            out[p.flow.index()] += 1;
        }
        out
    }
}
