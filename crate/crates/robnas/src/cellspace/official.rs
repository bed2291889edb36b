//! Reconstruction of the published benchmark's architecture id order.
//!
//! The published id of an architecture is its position in the benchmark's
//! generation list: the base-5 enumeration of all 15625 cells, shuffled once
//! with a Mersenne-Twister generator seeded with 88 (Fisher-Yates as
//! implemented by CPython's `random.shuffle`). Reproducing that shuffle gives
//! the exact mapping between this toolkit's local ids and the published ids,
//! which otherwise would only be available through a supplied `meta.json`.

use super::SPACE_SIZE;
use once_cell::sync::Lazy;

const N: usize = 624;
const M: usize = 397;
const MATRIX_A: u32 = 0x9908_b0df;
const UPPER_MASK: u32 = 0x8000_0000;
const LOWER_MASK: u32 = 0x7fff_ffff;

/// MT19937 with CPython's seeding and `getrandbits` semantics.
struct Mt19937 {
    mt: [u32; N],
    mti: usize,
}

impl Mt19937 {
    fn from_u32_seed(seed: u32) -> Mt19937 {
        // CPython seeds int arguments through init_by_array over 32-bit words
        let mut rng = Mt19937 { mt: [0; N], mti: N + 1 };
        rng.init_genrand(19_650_218);
        let key = [seed];
        let (mut i, mut j) = (1usize, 0usize);
        let mut k = N.max(key.len());
        while k > 0 {
            let prev = rng.mt[i - 1];
            rng.mt[i] = (rng.mt[i] ^ ((prev ^ (prev >> 30)).wrapping_mul(1_664_525)))
                .wrapping_add(key[j])
                .wrapping_add(j as u32);
            i += 1;
            j += 1;
            if i >= N {
                rng.mt[0] = rng.mt[N - 1];
                i = 1;
            }
            if j >= key.len() {
                j = 0;
            }
            k -= 1;
        }
        k = N - 1;
        while k > 0 {
            let prev = rng.mt[i - 1];
            rng.mt[i] = (rng.mt[i] ^ ((prev ^ (prev >> 30)).wrapping_mul(1_566_083_941)))
                .wrapping_sub(i as u32);
            i += 1;
            if i >= N {
                rng.mt[0] = rng.mt[N - 1];
                i = 1;
            }
            k -= 1;
        }
        rng.mt[0] = 0x8000_0000;
        rng
    }

    fn init_genrand(&mut self, seed: u32) {
        self.mt[0] = seed;
        for i in 1..N {
            let prev = self.mt[i - 1];
            self.mt[i] = 1_812_433_253u32
                .wrapping_mul(prev ^ (prev >> 30))
                .wrapping_add(i as u32);
        }
        self.mti = N;
    }

    fn genrand_u32(&mut self) -> u32 {
        if self.mti >= N {
            for kk in 0..N - M {
                let y = (self.mt[kk] & UPPER_MASK) | (self.mt[kk + 1] & LOWER_MASK);
                self.mt[kk] = self.mt[kk + M] ^ (y >> 1) ^ if y & 1 == 1 { MATRIX_A } else { 0 };
            }
            for kk in N - M..N - 1 {
                let y = (self.mt[kk] & UPPER_MASK) | (self.mt[kk + 1] & LOWER_MASK);
                self.mt[kk] =
                    self.mt[kk + M - N] ^ (y >> 1) ^ if y & 1 == 1 { MATRIX_A } else { 0 };
            }
            let y = (self.mt[N - 1] & UPPER_MASK) | (self.mt[0] & LOWER_MASK);
            self.mt[N - 1] = self.mt[M - 1] ^ (y >> 1) ^ if y & 1 == 1 { MATRIX_A } else { 0 };
            self.mti = 0;
        }
        let mut y = self.mt[self.mti];
        self.mti += 1;
        y ^= y >> 11;
        y ^= (y << 7) & 0x9d2c_5680;
        y ^= (y << 15) & 0xefc6_0000;
        y ^ (y >> 18)
    }

    fn getrandbits(&mut self, k: u32) -> u32 {
        debug_assert!(k >= 1 && k <= 32);
        self.genrand_u32() >> (32 - k)
    }

    /// Uniform draw in `[0, n)` by rejection, as in `Random._randbelow`.
    fn randbelow(&mut self, n: u32) -> u32 {
        let k = 32 - n.leading_zeros();
        loop {
            let r = self.getrandbits(k);
            if r < n {
                return r;
            }
        }
    }

    /// CPython `random.shuffle`: Fisher-Yates from the top.
    fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.randbelow(i as u32 + 1) as usize;
            xs.swap(i, j);
        }
    }
}

/// Bidirectional mapping between local (base-5) ids and published ids.
pub struct OfficialIds {
    local_of_official: Vec<u32>,
    official_of_local: Vec<u32>,
}

impl OfficialIds {
    pub fn local_of_official(&self, official_id: u32) -> u32 {
        self.local_of_official[official_id as usize]
    }

    pub fn official_of_local(&self, local_id: u32) -> u32 {
        self.official_of_local[local_id as usize]
    }

    pub fn len(&self) -> usize {
        self.local_of_official.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

static OFFICIAL: Lazy<OfficialIds> = Lazy::new(|| {
    let mut local_of_official: Vec<u32> = (0..SPACE_SIZE).collect();
    let mut rng = Mt19937::from_u32_seed(88);
    rng.shuffle(&mut local_of_official);
    let mut official_of_local = vec![0u32; SPACE_SIZE as usize];
    for (official, local) in local_of_official.iter().enumerate() {
        official_of_local[*local as usize] = official as u32;
    }
    OfficialIds {
        local_of_official,
        official_of_local,
    }
});

/// The reconstructed published id order (computed once, then cached).
pub fn official_ids() -> &'static OfficialIds {
    &OFFICIAL
}
