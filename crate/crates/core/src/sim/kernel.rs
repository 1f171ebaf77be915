//! Cycle-based message propagation.
//!
//! Everything sent during cycle `t` is delivered, in send order, during cycle
//! `t + 1`. There is no latency model and no reordering, so a run is a pure
//! function of its inputs.

use crate::error::{Error, Result};
use crate::NodeId;

/// A message in flight.
#[derive(Clone, Debug)]
pub struct Delivery<M> {
    pub to: NodeId,
    pub from: Option<NodeId>,
    pub msg: M,
}

/// When a node hands a message to the forwarding rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Forwarding {
    /// Stateless rules (tree construction) act on every delivery.
    EveryReceipt,
    /// Rules with a seen-cache act only on the first delivery.
    FirstReceipt,
}

/// Raw outcome of one propagation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Propagation {
    pub receive_count: Vec<u32>,
    pub depth: Vec<Option<u32>>,
    pub parent: Vec<Option<NodeId>>,
    pub total_messages: u64,
    pub cycles: u32,
}

/// Runs a propagation from `root`. `blocked[i]` marks nodes that absorb
/// every delivery without acting on it. The root's own copy counts as one
/// received message at depth 0.
pub fn propagate<M, F>(
    node_count: usize,
    root: NodeId,
    initial: M,
    blocked: &[bool],
    policy: Forwarding,
    mut forward: F,
) -> Result<Propagation>
where
    F: FnMut(NodeId, &M, &mut Vec<Delivery<M>>) -> Result<()>,
{
    if root.index() >= node_count {
        return Err(Error::contract(format!("root {root} outside network")));
    }
    let mut out = Propagation {
        receive_count: vec![0; node_count],
        depth: vec![None; node_count],
        parent: vec![None; node_count],
        total_messages: 0,
        cycles: 0,
    };
    // a correct tree needs at most `node_count` levels; anything beyond a
    // generous multiple means the forwarding rule does not terminate
    let max_cycles = 4 * node_count as u32 + 16;
    let mut current = vec![Delivery {
        to: root,
        from: None,
        msg: initial,
    }];
    let mut next = Vec::new();
    let mut cycle = 0u32;
    while !current.is_empty() {
        if cycle > max_cycles {
            return Err(Error::contract("message propagation did not terminate"));
        }
        for delivery in current.drain(..) {
            let at = delivery.to.index();
            out.receive_count[at] += 1;
            out.total_messages += 1;
            let first = out.depth[at].is_none();
            if first {
                out.depth[at] = Some(cycle);
                out.parent[at] = delivery.from;
            }
            if blocked.get(at).copied().unwrap_or(false) {
                continue;
            }
            if first || policy == Forwarding::EveryReceipt {
                let before = next.len();
                forward(delivery.to, &delivery.msg, &mut next)?;
                for d in &mut next[before..] {
                    d.from = Some(delivery.to);
                }
            }
        }
        out.cycles = cycle;
        std::mem::swap(&mut current, &mut next);
        cycle += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Line 0 -> 1 -> 2 -> ... with an extra edge 0 -> 2.
    fn line(n: usize, policy: Forwarding, blocked: &[bool]) -> Propagation {
        propagate(n, NodeId(0), (), blocked, policy, |at, _, out| {
            if at.index() + 1 < n {
                out.push(Delivery {
                    to: NodeId(at.0 + 1),
                    from: None,
                    msg: (),
                });
            }
            if at.0 == 0 && n > 2 {
                out.push(Delivery {
                    to: NodeId(2),
                    from: None,
                    msg: (),
                });
            }
            Ok(())
        })
        .unwrap()
    }

    #[test]
    fn root_counts_itself() {
        let p = line(1, Forwarding::FirstReceipt, &[]);
        assert_eq!(p.receive_count, vec![1]);
        assert_eq!(p.depth, vec![Some(0)]);
        assert_eq!(p.total_messages, 1);
    }

    #[test]
    fn first_receipt_suppresses_reforwarding() {
        let p = line(4, Forwarding::FirstReceipt, &[]);
        assert_eq!(p.receive_count, vec![1, 1, 2, 1]);
        assert_eq!(p.depth, vec![Some(0), Some(1), Some(1), Some(2)]);
        assert_eq!(p.parent[3], Some(NodeId(2)));
        let q = line(4, Forwarding::EveryReceipt, &[]);
        assert_eq!(q.receive_count, vec![1, 1, 2, 2]);
        assert_eq!(q.total_messages, 6);
    }

    #[test]
    fn blocked_nodes_absorb() {
        let p = line(
            5,
            Forwarding::FirstReceipt,
            &[false, true, true, false, false],
        );
        assert_eq!(p.receive_count, vec![1, 1, 1, 0, 0]);
    }

    #[test]
    fn runaway_forwarding_is_an_error() {
        let err = propagate(
            2,
            NodeId(0),
            (),
            &[],
            Forwarding::EveryReceipt,
            |at, _, out| {
                out.push(Delivery {
                    to: NodeId(1 - at.0),
                    from: None,
                    msg: (),
                });
                Ok(())
            },
        );
        assert!(err.is_err());
    }
}
