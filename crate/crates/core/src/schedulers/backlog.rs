use crate::queueing::QueueState;
use crate::topology::{FlowId, LinkId, Topology};

/// Exponentiated differential backlogs `W_l^f` and their per-link maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialBacklog {
    num_flows: usize,
    per_flow: Vec<f64>,
    per_link: Vec<f64>,
    best: Vec<Option<FlowId>>,
}

impl DifferentialBacklog {
    /// `W_l^f`; zero when `link` is not on the route of `flow`.
    pub fn flow(&self, link: LinkId, flow: FlowId) -> f64 {
        self.per_flow[link.index() * self.num_flows + flow.index()]
    }

    /// `W_l = max_f W_l^f`.
    pub fn link(&self, link: LinkId) -> f64 {
        self.per_link[link.index()]
    }

    /// Flow attaining `W_l` (lowest id on ties), `None` if `W_l = 0`.
    pub fn best_flow(&self, link: LinkId) -> Option<FlowId> {
        self.best[link.index()]
    }
}

/// Computes `W_l^f = max{Q_tx^γ - Q_rx^γ, 0}` for every flow and every link
/// of its route. The destination keeps no queue, so its backlog counts as 0.
pub fn differential_backlogs(
    queues: &QueueState,
    topology: &Topology,
    gammas: &[f64],
) -> DifferentialBacklog {
    let num_flows = topology.num_flows();
    let num_links = topology.num_links();
    let mut per_flow = vec![0.0; num_links * num_flows];
    for flow in topology.flows() {
        let gamma = gammas[flow.id.index()];
        for &l in &flow.route {
            let link = &topology.links()[l.index()];
            let up = (queues.backlog(link.tx, flow.id) as f64).powf(gamma);
            let down = if link.rx == flow.destination {
                0.0
            } else {
                (queues.backlog(link.rx, flow.id) as f64).powf(gamma)
            };
            per_flow[l.index() * num_flows + flow.id.index()] = (up - down).max(0.0);
        }
    }

    let mut per_link = vec![0.0; num_links];
    let mut best = vec![None; num_links];
    for l in 0..num_links {
        for f in 0..num_flows {
            let w = per_flow[l * num_flows + f];
            if w > per_link[l] {
                per_link[l] = w;
                best[l] = Some(FlowId::from_index(f));
            }
        }
    }

    DifferentialBacklog {
        num_flows,
        per_flow,
        per_link,
        best,
    }
}
