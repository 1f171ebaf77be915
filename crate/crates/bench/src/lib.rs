//! Fixtures shared by the benchmarks.

use dtc_core::{build_can, build_chord, CanNetwork, ChordNetwork, SimRng};

pub const SEED: u64 = 0xB3;

pub fn can(n: usize, d: usize) -> CanNetwork {
    build_can(n, d, &mut SimRng::new(SEED)).expect("valid size")
}

pub fn chord(n: usize) -> ChordNetwork {
    build_chord(n, &mut SimRng::new(SEED)).expect("valid size")
}
