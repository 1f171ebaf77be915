//! Distributed tree construction.
//!
//! The root of a tree sends one message carrying its identity and the area to
//! cover. Every receiver decides which of its overlay neighbors become its
//! children from that message and its own routing state alone; no node keeps
//! state about the tree, yet every node of the area receives the message
//! exactly once.

mod area;
pub mod can_tree;
pub mod chord_tree;
mod span;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::hashspace::{RingId, TorusPoint};
use crate::NodeId;

pub use area::AreaSpec;
pub use can_tree::{can_children, tie_break_path, TieDuty};
pub use chord_tree::{chord_children, chord_member, ArcPlan};
pub use span::{
    collect_responses, span_multi_tree, span_tree, tree_edges_are_overlay_hops, CoverageReport,
    Overlay,
};

/// Where the tree is rooted: a ring position for Chord, the anchor point of
/// the root zone for CAN.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootAnchor {
    Ring(RingId),
    Point(TorusPoint),
}

/// The message forwarded while a tree is built.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeMessage {
    pub root: NodeId,
    pub root_center: RootAnchor,
    pub area: AreaSpec,
    /// Chord only: exclusive end of the range delegated to the receiver.
    pub sub_limit: Option<RingId>,
    pub hops: u32,
    pub payload_tag: u64,
}

/// Nodes that silently drop every tree and response message they receive.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultModel {
    pub malicious: BTreeSet<NodeId>,
    /// Lets a malicious root swallow its own query. Off unless asked for.
    pub root_may_be_malicious: bool,
}

impl FaultModel {
    pub fn none() -> Self {
        FaultModel::default()
    }

    pub fn with_malicious(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        FaultModel {
            malicious: nodes.into_iter().collect(),
            root_may_be_malicious: false,
        }
    }

    pub fn is_malicious(&self, node: NodeId) -> bool {
        self.malicious.contains(&node)
    }

    /// Per-node drop flags for a span rooted at `root`.
    pub fn blocked(&self, node_count: usize, root: NodeId) -> Vec<bool> {
        let mut out = vec![false; node_count];
        for &m in &self.malicious {
            if m.index() < node_count && (m != root || self.root_may_be_malicious) {
                out[m.index()] = true;
            }
        }
        out
    }
}

/// Outcome of spanning one tree (or several merged ones).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub receive_count: Vec<u32>,
    /// Hop count of the first delivery.
    pub depth: Vec<Option<u32>>,
    /// Sender of the first delivery.
    pub parent: Vec<Option<NodeId>>,
    pub total_messages: u64,
    /// Number of areas each node's zone or key range meets; one tree per
    /// area, so this is the number of messages the node should receive.
    pub area_hits: Vec<u32>,
    /// In-area nodes that received nothing.
    pub unreached: Vec<NodeId>,
    pub roots: Vec<NodeId>,
}

impl TreeStats {
    pub fn node_count(&self) -> usize {
        self.receive_count.len()
    }

    pub fn in_area_count(&self) -> usize {
        self.area_hits.iter().filter(|&&h| h > 0).count()
    }

    pub fn reached_count(&self) -> usize {
        self.receive_count.iter().filter(|&&c| c > 0).count()
    }

    /// Deliveries beyond the first at each node.
    pub fn duplicates(&self) -> u64 {
        self.total_messages - self.reached_count() as u64
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn mean_depth(&self) -> f64 {
        let (sum, count) = self
            .depth
            .iter()
            .flatten()
            .fold((0u64, 0u64), |(s, c), &d| (s + d as u64, c + 1));
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    }

    pub fn unreached_fraction(&self) -> f64 {
        match self.in_area_count() {
            0 => 0.0,
            n => self.unreached.len() as f64 / n as f64,
        }
    }

    /// Whether every node got exactly one message per area it meets and
    /// nobody else got any.
    pub fn is_exactly_once(&self) -> bool {
        self.receive_count == self.area_hits
    }

    /// Whether parent links form trees hanging off the roots with no cycles.
    pub fn parents_form_forest(&self) -> bool {
        let n = self.node_count();
        for start in 0..n {
            if self.depth[start].is_none() {
                continue;
            }
            let mut cur = NodeId(start as u32);
            let mut steps = 0;
            while let Some(p) = self.parent[cur.index()] {
                if self.depth[p.index()].map(|d| d + 1) != self.depth[cur.index()] {
                    return false;
                }
                cur = p;
                steps += 1;
                if steps > n {
                    return false;
                }
            }
            if !self.roots.contains(&cur) {
                return false;
            }
        }
        true
    }
}
