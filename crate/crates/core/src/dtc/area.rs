use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashspace::{RingId, RingSpace, TorusBox, UNIT};

/// Region a tree is spanned over: an arc of the Chord ring or a box of the
/// CAN coordinate space. Boxes are convex by construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AreaSpec {
    /// The half-open arc `[start, start + length)`.
    Arc {
        start: RingId,
        length: u128,
    },
    CanBox(TorusBox),
}

impl AreaSpec {
    pub fn full_ring(ring: RingSpace) -> Self {
        AreaSpec::Arc {
            start: RingId(0),
            length: ring.size(),
        }
    }

    pub fn whole_space(dims: usize) -> Self {
        AreaSpec::CanBox(TorusBox::whole(dims))
    }

    pub fn validate_arc(&self, ring: RingSpace) -> Result<(RingId, u128)> {
        match *self {
            AreaSpec::Arc { start, length } => {
                if length == 0 || length > ring.size() || !ring.contains(start) {
                    return Err(Error::contract(format!(
                        "arc length {length} outside (0, 2^{}]",
                        ring.bits()
                    )));
                }
                Ok((start, length))
            }
            AreaSpec::CanBox(_) => Err(Error::contract("a Chord tree needs an arc area")),
        }
    }

    pub fn validate_box(&self, dims: usize) -> Result<&TorusBox> {
        match self {
            AreaSpec::CanBox(b) if b.dims() == dims => Ok(b),
            AreaSpec::CanBox(b) => Err(Error::DimensionMismatch {
                expected: dims,
                found: b.dims(),
            }),
            AreaSpec::Arc { .. } => Err(Error::contract("a CAN tree needs a box area")),
        }
    }

    /// Whether two areas share no point. Areas of different kinds are never
    /// compared and count as overlapping.
    pub fn disjoint(&self, other: &AreaSpec, ring: RingSpace) -> bool {
        match (self, other) {
            (
                AreaSpec::Arc {
                    start: a,
                    length: la,
                },
                AreaSpec::Arc {
                    start: b,
                    length: lb,
                },
            ) => ring.distance(*a, *b) >= *la && ring.distance(*b, *a) >= *lb,
            (AreaSpec::CanBox(a), AreaSpec::CanBox(b)) => {
                a.dims() == b.dims()
                    && (0..a.dims()).any(|i| {
                        let ab = (b.lo(i) as u128 + UNIT - a.lo(i) as u128) % UNIT;
                        let ba = (a.lo(i) as u128 + UNIT - b.lo(i) as u128) % UNIT;
                        ab >= a.len(i) && ba >= b.len(i)
                    })
            }
            _ => false,
        }
    }
}
