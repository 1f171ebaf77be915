//! Tree construction on a Chord ring.
//!
//! A node that receives the query is responsible for every node strictly
//! between itself and its delegated limit. It hands each of its distinct
//! fingers inside that range the sub-range up to the next such finger; the
//! last finger inherits the node's own limit. The ranges of the children tile
//! the parent's range, so every member is reached exactly once.

use crate::chord::{ChordNetwork, ChordNode};
use crate::error::{Error, Result};
use crate::hashspace::{RingId, RingSpace};
use crate::NodeId;

use super::{AreaSpec, RootAnchor, TreeMessage};

/// Where the tree over an arc starts and ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArcPlan {
    pub root: NodeId,
    /// Exclusive limit handed to the root; equal to the root's id when the
    /// whole ring is covered.
    pub root_limit: RingId,
    /// Node storing the arc's last key. It receives the query even when its
    /// own id lies past the arc.
    pub boundary: NodeId,
    pub whole_ring: bool,
}

impl ArcPlan {
    pub fn new(net: &ChordNetwork, area: &AreaSpec) -> Result<Self> {
        let ring = net.ring();
        let (start, length) = area.validate_arc(ring)?;
        let root = net.responsible_index(start);
        let last = ring.add(start, length - 1);
        let boundary = net.responsible_index(last);
        let whole_ring = length == ring.size();
        // an arc running past the root and round to a key stored back at the
        // root holds every node
        let wraps_to_root = boundary == root
            && ring.distance(start, net.node(root).id) < ring.distance(start, last);
        let root_limit = if whole_ring || wraps_to_root {
            net.node(root).id
        } else {
            ring.add(net.node(boundary).id, 1)
        };
        Ok(ArcPlan {
            root,
            root_limit,
            boundary,
            whole_ring,
        })
    }

    /// Plan for the whole ring rooted at an arbitrary node.
    pub fn whole_ring_from(net: &ChordNetwork, root: NodeId) -> Self {
        let id = net.node(root).id;
        ArcPlan {
            root,
            root_limit: id,
            boundary: NodeId(((root.index() + net.len() - 1) % net.len()) as u32),
            whole_ring: true,
        }
    }
}

/// Whether `node` stores at least one key of the arc, i.e. lies on the arc or
/// is the successor of its last point.
pub fn chord_member(ring: RingSpace, node: &ChordNode, start: RingId, length: u128) -> bool {
    if ring.in_arc(start, length, node.id) {
        return true;
    }
    let last = ring.add(start, length - 1);
    // keys (predecessor, id]
    let own = if node.predecessor == node.id {
        ring.size()
    } else {
        ring.distance(node.predecessor, node.id)
    };
    let off = ring.distance(node.predecessor, last);
    off > 0 && off <= own || own == ring.size()
}

/// Children of `node` for a Chord tree message, with the limit each child is
/// delegated.
pub fn chord_children(
    ring: RingSpace,
    node: &ChordNode,
    msg: &TreeMessage,
) -> Result<Vec<(RingId, RingId)>> {
    let (start, length) = msg.area.validate_arc(ring)?;
    if !chord_member(ring, node, start, length) {
        return Err(Error::contract(format!(
            "node {} outside the arc it was asked to span",
            node.id
        )));
    }
    let limit = match (msg.sub_limit, &msg.root_center) {
        (Some(limit), _) => limit,
        (None, RootAnchor::Ring(root)) if *root == node.id => {
            if length == ring.size() {
                node.id
            } else {
                return Err(Error::contract("root message without a delegated limit"));
            }
        }
        _ => return Err(Error::contract("non-root Chord message without a limit")),
    };
    Ok(delegate(ring, node, limit))
}

pub(crate) fn delegate(ring: RingSpace, node: &ChordNode, limit: RingId) -> Vec<(RingId, RingId)> {
    let span = match ring.distance(node.id, limit) {
        0 => ring.size(),
        s => s,
    };
    let mut kids: Vec<RingId> = Vec::with_capacity(16);
    for &f in &node.fingers {
        let d = ring.distance(node.id, f);
        if d == 0 || d >= span {
            continue;
        }
        if kids.last() != Some(&f) {
            kids.push(f);
        }
    }
    let mut out = Vec::with_capacity(kids.len());
    for (i, &child) in kids.iter().enumerate() {
        let child_limit = kids.get(i + 1).copied().unwrap_or(limit);
        out.push((child, child_limit));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chord::{build_chord, build_chord_in};
    use crate::hashspace::SimRng;

    fn root_msg(net: &ChordNetwork, plan: &ArcPlan, area: AreaSpec) -> TreeMessage {
        TreeMessage {
            root: plan.root,
            root_center: RootAnchor::Ring(net.node(plan.root).id),
            area,
            sub_limit: Some(plan.root_limit),
            hops: 0,
            payload_tag: 0,
        }
    }

    /// Expands the tree breadth-first using only `chord_children`.
    fn expand(net: &ChordNetwork, area: AreaSpec) -> (Vec<u32>, Vec<u32>) {
        let plan = ArcPlan::new(net, &area).unwrap();
        let mut count = vec![0u32; net.len()];
        let mut depth = vec![0u32; net.len()];
        let mut frontier = vec![(plan.root, plan.root_limit, 0u32)];
        while let Some((at, limit, d)) = frontier.pop() {
            count[at.index()] += 1;
            depth[at.index()] = d;
            let mut msg = root_msg(net, &plan, area.clone());
            msg.sub_limit = Some(limit);
            for (child, lim) in chord_children(net.ring(), net.node(at), &msg).unwrap() {
                frontier.push((net.index_of(child).unwrap(), lim, d + 1));
            }
        }
        (count, depth)
    }

    #[test]
    fn root_only_arc() {
        let ring = RingSpace::new(16).unwrap();
        let net = ChordNetwork::from_ids(ring, [RingId(100), RingId(200), RingId(300)]).unwrap();
        // arc [150, 160) holds no node; its keys live on 200
        let area = AreaSpec::Arc {
            start: RingId(150),
            length: 10,
        };
        let (count, _) = expand(&net, area);
        assert_eq!(count, vec![0, 1, 0]);
        // arc [100, 101) contains node 100 only
        let area = AreaSpec::Arc {
            start: RingId(100),
            length: 1,
        };
        let (count, _) = expand(&net, area);
        assert_eq!(count, vec![1, 0, 0]);
        // arc [250, 120) wraps round to node 100, which stores both ends
        let area = AreaSpec::Arc {
            start: RingId(250),
            length: (1 << 16) - 130,
        };
        let (count, _) = expand(&net, area.clone());
        assert_eq!(count, vec![1, 1, 1]);
        // arc [100, 150): node 100 plus the boundary successor 200
        let area = AreaSpec::Arc {
            start: RingId(100),
            length: 50,
        };
        let (count, _) = expand(&net, area);
        assert_eq!(count, vec![1, 1, 0]);
    }

    #[test]
    fn full_ring_tiles_every_node_once() {
        for seed in 0..5 {
            let net = build_chord(2000, &mut SimRng::new(seed)).unwrap();
            let (count, depth) = expand(&net, AreaSpec::full_ring(net.ring()));
            assert!(count.iter().all(|&c| c == 1));
            let max = *depth.iter().max().unwrap();
            assert!(max <= 11 + 1, "depth {max}");
        }
    }

    #[test]
    fn partial_arcs_reach_exactly_the_members() {
        let ring = RingSpace::new(20).unwrap();
        let mut rng = SimRng::new(12);
        let net = build_chord_in(ring, 400, &mut rng).unwrap();
        for _ in 0..200 {
            let start = RingId(rng.below(ring.size() as u64));
            let length = 1 + rng.below(ring.size() as u64) as u128;
            let area = AreaSpec::Arc { start, length };
            let (count, _) = expand(&net, area);
            for (i, node) in net.nodes().iter().enumerate() {
                let member = chord_member(ring, node, start, length);
                assert_eq!(
                    count[i], member as u32,
                    "node {i} start {start} len {length}"
                );
            }
        }
    }

    #[test]
    fn outside_node_is_rejected() {
        let ring = RingSpace::new(16).unwrap();
        let net = ChordNetwork::from_ids(ring, [RingId(100), RingId(200), RingId(300)]).unwrap();
        let area = AreaSpec::Arc {
            start: RingId(100),
            length: 10,
        };
        let plan = ArcPlan::new(&net, &area).unwrap();
        let msg = root_msg(&net, &plan, area);
        assert!(chord_children(ring, net.node(NodeId(2)), &msg).is_err());
    }
}
