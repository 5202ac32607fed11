//! Counter-keyed random streams.
//!
//! Every random quantity in a realization is read from a stream addressed by
//! `(seed, realization index, tier stream, slot, role)`. Streams are SplitMix64
//! generators whose starting state is a hash of the address, so any worker can
//! open any stream without shared state, and the k-th exponential of a slot's
//! mark stream does not depend on how many draws other slots consumed.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    /// Point count and positions of one tier.
    Location = 0,
    /// Exponentials summed into the direct-link mark `h`.
    Direct = 1,
    /// Exponentials summed into the interfering-link mark `g`.
    Interference = 2,
    /// Uniform used to assign a parent point to a thinned sub-tier.
    Thinning = 3,
}

/// Slot value used for the per-tier location stream.
pub const TIER_SLOT: u64 = u64::MAX;

/// SplitMix64 output finalizer; a bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub index: u64,
    pub stream: u32,
    pub slot: u64,
    pub role: Role,
}

impl StreamKey {
    pub fn new(seed: u64, index: u64, stream: u32, slot: u64, role: Role) -> Self {
        Self { seed, index, stream, slot, role }
    }

    fn hash(&self) -> u64 {
        let mut h = mix64(self.seed ^ 0x6a09_e667_f3bc_c908);
        h = mix64(h ^ self.index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        h = mix64(h ^ ((u64::from(self.stream) << 8) | self.role as u64));
        mix64(h ^ self.slot.wrapping_mul(0xd1b5_4a32_d192_ed03))
    }

    pub fn open(&self) -> SplitMix64 {
        SplitMix64::seed_from_u64(self.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_stream() {
        let key = StreamKey::new(7, 3, 1, 42, Role::Direct);
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = key.open();
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = key.open();
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn key_fields_all_matter() {
        let base = StreamKey::new(7, 3, 1, 42, Role::Direct);
        let variants = [
            StreamKey { seed: 8, ..base },
            StreamKey { index: 4, ..base },
            StreamKey { stream: 2, ..base },
            StreamKey { slot: 43, ..base },
            StreamKey { role: Role::Interference, ..base },
        ];
        let first = base.open().random::<u64>();
        for v in variants {
            assert_ne!(v.open().random::<u64>(), first, "{v:?}");
        }
    }
}
