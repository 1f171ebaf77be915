//! Dissemination schemes DTC is compared against: directed flooding over a
//! CAN (application-level multicast) and plain neighbor flooding.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::can::{shared_faces, CanNetwork, Side};
use crate::dtc::{FaultModel, Overlay, TreeStats};
use crate::error::{Error, Result};
use crate::hashspace::{TorusPoint, HALF, UNIT};
use crate::sim::kernel::{propagate, Delivery, Forwarding, Propagation};
use crate::NodeId;

/// Message identifiers each node has already handled.
#[derive(Clone, Debug, Default)]
pub struct SeenCache {
    seen: Vec<HashSet<u64>>,
}

impl SeenCache {
    pub fn new(node_count: usize) -> Self {
        SeenCache {
            seen: vec![HashSet::new(); node_count],
        }
    }

    /// Records `msg` at `node`; true if it was not there before.
    pub fn insert(&mut self, node: NodeId, msg: u64) -> bool {
        self.seen[node.index()].insert(msg)
    }

    pub fn contains(&self, node: NodeId, msg: u64) -> bool {
        self.seen[node.index()].contains(&msg)
    }
}

/// Which axes count as "lower" when a multicast node picks the directions to
/// forward in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisOrder {
    /// Axis 0 first, the order in which zones are split.
    #[default]
    SplitOrder,
    /// Highest axis first.
    Reversed,
}

impl AxisOrder {
    fn before(self, a: usize, b: usize) -> bool {
        match self {
            AxisOrder::SplitOrder => a < b,
            AxisOrder::Reversed => a > b,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Flooded {
    id: u64,
    sender: Option<NodeId>,
}

fn stats(prop: Propagation, root: NodeId) -> TreeStats {
    let n = prop.receive_count.len();
    let unreached = (0..n)
        .filter(|&i| prop.receive_count[i] == 0)
        .map(|i| NodeId(i as u32))
        .collect();
    TreeStats {
        receive_count: prop.receive_count,
        depth: prop.depth,
        parent: prop.parent,
        total_messages: prop.total_messages,
        area_hits: vec![1; n],
        unreached,
        roots: vec![root],
    }
}

/// Multicast by directed flooding over a CAN.
///
/// The root sends to every neighbor. A node reached across a face normal to
/// axis `i` forwards across faces normal to lower axes in both directions and
/// across faces normal to `i` only onward, away from the sender. Along every
/// axis a message travels at most half the space from the root's center in
/// each direction, and each node forwards only the first copy it gets.
pub fn alm_broadcast(net: &CanNetwork, root: NodeId, faults: &FaultModel) -> Result<TreeStats> {
    alm_broadcast_ordered(net, root, faults, AxisOrder::SplitOrder)
}

/// [`alm_broadcast`] with an explicit axis order.
pub fn alm_broadcast_ordered(
    net: &CanNetwork,
    root: NodeId,
    faults: &FaultModel,
    order: AxisOrder,
) -> Result<TreeStats> {
    if root.index() >= net.len() {
        return Err(Error::contract(format!("root {root} outside network")));
    }
    let source = net.zone(root).center();
    let blocked = faults.blocked(net.len(), root);
    let mut cache = SeenCache::new(net.len());
    let initial = Flooded {
        id: 0,
        sender: None,
    };
    let prop = propagate(
        net.len(),
        root,
        initial,
        &blocked,
        Forwarding::EveryReceipt,
        |at, msg, out| {
            if !cache.insert(at, msg.id) {
                return Ok(());
            }
            for to in alm_targets(net, &source, at, msg.sender, order) {
                out.push(Delivery {
                    to,
                    from: None,
                    msg: Flooded {
                        id: msg.id,
                        sender: Some(at),
                    },
                });
            }
            Ok(())
        },
    )?;
    Ok(stats(prop, root))
}

/// Travel along `axis` from the source to a face at `coordinate`, crossed in
/// the direction given by `side`.
fn travelled(source: &TorusPoint, axis: usize, coordinate: u64, side: Side) -> u128 {
    let (s, c) = (source[axis] as u128, coordinate as u128);
    match side {
        Side::Upper => (c + UNIT - s) % UNIT,
        Side::Lower => (s + UNIT - c) % UNIT,
    }
}

fn alm_targets(
    net: &CanNetwork,
    source: &TorusPoint,
    at: NodeId,
    sender: Option<NodeId>,
    order: AxisOrder,
) -> Vec<NodeId> {
    let here = net.zone(at);
    let neighbors = &net.node(at).neighbors;
    let Some(sender) = sender else {
        return neighbors.clone();
    };
    let arrival = shared_faces(here, net.zone(sender));
    let Some(first) = arrival.first() else {
        return Vec::new();
    };
    let axis = first.dim;
    // side of this zone the message leaves through along the arrival axis
    let onward = if arrival.len() > 1 {
        if travelled(source, axis, here.center_coord(axis), Side::Upper) < HALF {
            Side::Upper
        } else {
            Side::Lower
        }
    } else {
        match first.side {
            Side::Lower => Side::Upper,
            Side::Upper => Side::Lower,
        }
    };
    let mut out = Vec::new();
    for &nb in neighbors {
        if nb == sender {
            continue;
        }
        let zone = net.zone(nb);
        let ok = shared_faces(here, zone).iter().any(|f| {
            let direction_ok = order.before(f.dim, axis) || (f.dim == axis && f.side == onward);
            // The upward sweep takes every zone it enters short of the
            // antipode; the downward sweep only zones lying entirely within
            // its half, so the zone holding the antipode is reached once.
            let within = match f.side {
                Side::Upper => travelled(source, f.dim, f.coordinate, Side::Upper) < HALF,
                Side::Lower => travelled(source, f.dim, zone.lo(f.dim), Side::Lower) <= HALF,
            };
            direction_ok && within
        });
        if ok {
            out.push(nb);
        }
    }
    out
}

/// Neighbor flooding: every node forwards the first copy it receives to all
/// overlay neighbors except the one it came from. On Chord the neighbors are
/// the distinct fingers.
pub fn simple_flood(overlay: Overlay<'_>, root: NodeId, faults: &FaultModel) -> Result<TreeStats> {
    if root.index() >= overlay.len() {
        return Err(Error::contract(format!("root {root} outside network")));
    }
    let blocked = faults.blocked(overlay.len(), root);
    let mut cache = SeenCache::new(overlay.len());
    let initial = Flooded {
        id: 0,
        sender: None,
    };
    let prop = propagate(
        overlay.len(),
        root,
        initial,
        &blocked,
        Forwarding::EveryReceipt,
        |at, msg, out| {
            if !cache.insert(at, msg.id) {
                return Ok(());
            }
            let mut send = |to: NodeId| {
                if Some(to) != msg.sender && to != at {
                    out.push(Delivery {
                        to,
                        from: None,
                        msg: Flooded {
                            id: msg.id,
                            sender: Some(at),
                        },
                    });
                }
            };
            match overlay {
                Overlay::Can(net) => net.node(at).neighbors.iter().copied().for_each(&mut send),
                Overlay::Chord(net) => {
                    for f in net.node(at).distinct_fingers() {
                        if let Some(to) = net.index_of(f) {
                            send(to);
                        }
                    }
                }
            }
            Ok(())
        },
    )?;
    Ok(stats(prop, root))
}
