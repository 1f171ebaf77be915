//! Distributed tree construction (DTC) over simulated Chord and CAN overlays.
//!
//! The crate builds stable overlays ([`chord`], [`can`]), spans trees over a
//! ring arc or a box of the coordinate space using only per-node local
//! knowledge ([`dtc`]), runs the comparison dissemination schemes
//! ([`baselines`]), maps string keys to order-preserving quadtree cells
//! ([`prefix`]) and drives repeated, seeded experiments ([`sim`],
//! [`experiments`]).

pub mod baselines;
pub mod can;
pub mod chord;
pub mod dtc;
pub mod error;
pub mod experiments;
pub mod hashspace;
pub mod prefix;
pub mod sim;

use serde::{Deserialize, Serialize};

pub use can::{build_can, CanNetwork, CanNode, CanZone, FaceDescriptor};
pub use chord::{build_chord, ChordNetwork, ChordNode};
pub use dtc::{AreaSpec, FaultModel, TreeStats};
pub use error::{Error, Result};
pub use hashspace::{RingId, SimRng, TorusBox, TorusPoint};

/// Dense index of a node inside one simulated network.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}
