//! Round-synchronous execution substrate with gossip-restricted sends and
//! faithful cost accounting.
//!
//! One round: every node may emit at most one message to one neighbor;
//! deliveries land atomically at the round boundary; receiving many is fine.
//! Model time is rounds times `d_max`. Control traffic (broadcast and
//! convergecast over a BFS tree rooted at the controller) is metered in a
//! separate counter so protocol analyses can see both terms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// A message fits one small tag, one node id, and one fixed-width scalar,
/// which models the logarithmic message-size budget structurally.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Message {
    Packet { color: u16 },
    Control { opcode: u8, scalar: f64, origin: u32 },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Packet { .. } => "packet",
            Message::Control { .. } => "control",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Delivery {
    pub sender: usize,
    pub dest: usize,
    pub message: Message,
}

/// What happened in one round, for tests and tracing.
#[derive(Clone, Debug)]
pub struct Round {
    pub index: u64,
    pub deliveries: Vec<Delivery>,
}

/// Round and model-time accounting.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct CostMeter {
    pub data_rounds: u64,
    pub control_rounds: u64,
    pub d_max: f64,
}

impl CostMeter {
    pub fn new(d_max: f64) -> Self {
        Self { data_rounds: 0, control_rounds: 0, d_max }
    }

    pub fn rounds(&self) -> u64 {
        self.data_rounds + self.control_rounds
    }

    pub fn model_time(&self) -> f64 {
        self.rounds() as f64 * self.d_max
    }
}

/// Per-node send slot for one round; enforces the one-message rule.
#[derive(Default)]
pub struct Outbox {
    slot: Option<(usize, Message)>,
}

impl Outbox {
    pub fn send(&mut self, dest: usize, message: Message) -> Result<()> {
        if self.slot.is_some() {
            return Err(Error::ProtocolViolation(
                "node attempted two sends in one round".into(),
            ));
        }
        self.slot = Some((dest, message));
        Ok(())
    }
}

/// Node behavior under the engine: a pure function of own state, the inbox,
/// and the node's own RNG stream.
pub trait NodeStep: Send {
    fn step(&mut self, round: u64, inbox: &[Message], out: &mut Outbox) -> Result<()>;
}

/// Drives rounds over a fixed set of nodes.
pub struct Engine {
    n: usize,
    inboxes: Vec<Vec<Message>>,
    pub meter: CostMeter,
    round: u64,
    /// When set, every delivery is logged as `round\tsender\tdest\tkind`.
    pub trace: Option<Vec<String>>,
}

impl Engine {
    pub fn new(n: usize, d_max: f64) -> Self {
        Self {
            n,
            inboxes: vec![Vec::new(); n],
            meter: CostMeter::new(d_max),
            round: 0,
            trace: None,
        }
    }

    /// Run one synchronous round: collect at most one outgoing message per
    /// node, then deliver all of them at the barrier.
    pub fn run_round<N: NodeStep>(&mut self, nodes: &mut [N]) -> Result<Round> {
        assert_eq!(nodes.len(), self.n);
        let round = self.round;
        let mut outboxes: Vec<Outbox> = (0..self.n).map(|_| Outbox::default()).collect();

        let step_all = |nodes: &mut [N], outboxes: &mut [Outbox], inboxes: &[Vec<Message>]| {
            nodes
                .iter_mut()
                .zip(outboxes.iter_mut())
                .zip(inboxes.iter())
                .try_for_each(|((node, out), inbox)| node.step(round, inbox, out))
        };

        #[cfg(feature = "parallel")]
        {
            // rayon dispatch costs more than it saves on small node counts
            if self.n >= 256 {
                use rayon::prelude::*;
                nodes
                    .par_iter_mut()
                    .zip(outboxes.par_iter_mut())
                    .zip(self.inboxes.par_iter())
                    .try_for_each(|((node, out), inbox)| node.step(round, inbox, out))?;
            } else {
                step_all(nodes, &mut outboxes, &self.inboxes)?;
            }
        }
        #[cfg(not(feature = "parallel"))]
        step_all(nodes, &mut outboxes, &self.inboxes)?;

        for inbox in &mut self.inboxes {
            inbox.clear();
        }
        let mut deliveries = Vec::new();
        for (sender, out) in outboxes.into_iter().enumerate() {
            if let Some((dest, message)) = out.slot {
                if dest >= self.n {
                    return Err(Error::ProtocolViolation(format!(
                        "node {sender} sent to unknown node {dest}"
                    )));
                }
                self.inboxes[dest].push(message);
                if let Some(trace) = &mut self.trace {
                    trace.push(format!("{round}\t{sender}\t{dest}\t{}", message.kind()));
                }
                deliveries.push(Delivery { sender, dest, message });
            }
        }
        self.round += 1;
        self.meter.data_rounds += 1;
        Ok(Round { index: round, deliveries })
    }

    pub fn inbox(&self, node: usize) -> &[Message] {
        &self.inboxes[node]
    }
}

/// BFS tree rooted at the controller, used for cost-accounted control
/// broadcast and convergecast.
#[derive(Clone, Debug)]
pub struct ControlTree {
    root: usize,
    parent: Vec<Option<usize>>,
    depth: u64,
}

impl ControlTree {
    pub fn build(g: &WeightedGraph, root: usize) -> Result<Self> {
        if g.n() < 2 {
            return Err(Error::InvalidArgument("control tree needs n >= 2".into()));
        }
        let dist = g.bfs_distances(root);
        let mut parent = vec![None; g.n()];
        for u in 0..g.n() {
            if u == root {
                continue;
            }
            // parent: any neighbor one hop closer; lowest id for determinism
            parent[u] = g
                .neighbors(u)
                .iter()
                .map(|&(v, _)| v)
                .find(|&v| dist[v] + 1 == dist[u]);
            if parent[u].is_none() {
                return Err(Error::Internal("unreachable vertex in control tree".into()));
            }
        }
        let depth = dist.iter().map(|&d| d as u64).max().unwrap();
        Ok(Self { root, parent, depth })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, u: usize) -> Option<usize> {
        self.parent[u]
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    /// Push a value from the root to every node; costs `depth` rounds.
    pub fn broadcast<T: Clone>(&self, payload: T, meter: &mut CostMeter) -> Vec<T> {
        meter.control_rounds += self.depth;
        vec![payload; self.parent.len()]
    }

    /// Reduce per-node scalars to the root with max; costs `depth` rounds.
    pub fn convergecast_max(&self, values: &[f64], meter: &mut CostMeter) -> f64 {
        meter.control_rounds += self.depth;
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Gather all per-node scalars at the root; costs `depth` rounds.
    pub fn convergecast_collect(&self, values: &[f64], meter: &mut CostMeter) -> Vec<f64> {
        meter.control_rounds += self.depth;
        values.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;

    struct Silent;
    impl NodeStep for Silent {
        fn step(&mut self, _: u64, _: &[Message], _: &mut Outbox) -> Result<()> {
            Ok(())
        }
    }

    struct SendTo(Option<usize>);
    impl NodeStep for SendTo {
        fn step(&mut self, _: u64, _: &[Message], out: &mut Outbox) -> Result<()> {
            if let Some(dest) = self.0 {
                out.send(dest, Message::Packet { color: 0 })?;
            }
            Ok(())
        }
    }

    struct DoubleSend;
    impl NodeStep for DoubleSend {
        fn step(&mut self, _: u64, _: &[Message], out: &mut Outbox) -> Result<()> {
            out.send(0, Message::Packet { color: 0 })?;
            out.send(0, Message::Packet { color: 0 })?;
            Ok(())
        }
    }

    #[test]
    fn silent_round_counts() {
        let mut eng = Engine::new(3, 2.0);
        let mut nodes = vec![Silent, Silent, Silent];
        let round = eng.run_round(&mut nodes).unwrap();
        assert!(round.deliveries.is_empty());
        assert_eq!(eng.meter.data_rounds, 1);
        assert!(eng.inboxes_empty());
    }

    impl Engine {
        fn inboxes_empty(&self) -> bool {
            self.inboxes.iter().all(|i| i.is_empty())
        }
    }

    #[test]
    fn single_edge_delivery() {
        let mut eng = Engine::new(2, 1.0);
        let mut nodes = vec![SendTo(Some(1)), SendTo(None)];
        eng.run_round(&mut nodes).unwrap();
        assert_eq!(eng.inbox(1).len(), 1);
        assert_eq!(eng.inbox(0).len(), 0);
    }

    #[test]
    fn star_center_receives_all() {
        let mut eng = Engine::new(5, 4.0);
        let mut nodes: Vec<SendTo> =
            (0..5).map(|i| SendTo(if i == 0 { None } else { Some(0) })).collect();
        eng.run_round(&mut nodes).unwrap();
        assert_eq!(eng.inbox(0).len(), 4);
    }

    #[test]
    fn double_send_is_a_fault() {
        let mut eng = Engine::new(1, 1.0);
        let mut nodes = vec![DoubleSend];
        assert!(matches!(
            eng.run_round(&mut nodes),
            Err(Error::ProtocolViolation(_))
        ));
    }

    #[test]
    fn trace_lines() {
        let mut eng = Engine::new(2, 1.0);
        eng.trace = Some(Vec::new());
        let mut nodes = vec![SendTo(Some(1)), SendTo(None)];
        eng.run_round(&mut nodes).unwrap();
        assert_eq!(eng.trace.as_ref().unwrap()[0], "0\t0\t1\tpacket");
    }

    #[test]
    fn model_time_is_rounds_times_dmax() {
        let mut m = CostMeter::new(3.0);
        m.data_rounds = 10;
        m.control_rounds = 4;
        assert_eq!(m.model_time(), 42.0);
    }

    #[test]
    fn control_tree_path3() {
        let g = GraphKind::Path(3).build(0).unwrap();
        let t = ControlTree::build(&g, 0).unwrap();
        assert_eq!(t.depth(), 2);
        let mut m = CostMeter::new(2.0);
        t.broadcast(1.0f64, &mut m);
        assert_eq!(m.control_rounds, 2);
        let v = t.convergecast_max(&[0.1, 0.7, 0.3], &mut m);
        assert_eq!(v, 0.7);
        assert_eq!(m.control_rounds, 4);
    }

    #[test]
    fn control_tree_rejects_singleton() {
        // a 1-vertex graph cannot even be built; check at the tree level too
        let g = GraphKind::Path(2).build(0).unwrap();
        assert!(ControlTree::build(&g, 0).is_ok());
        assert!(WeightedGraph::from_edges(1, vec![]).is_err());
    }

    use crate::graph::WeightedGraph;
}
