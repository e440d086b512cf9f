//! Counter-based uniform source.
//!
//! Every uniform is a pure function of its [`SampleKey`], so the sample
//! stream does not depend on how cubes are scheduled across threads. The
//! block function is Philox4x32-10.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with ten rounds.
#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

// SplitMix64 finalizer; a bijection on u64.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline(always)]
fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Identifies one uniform draw: run seed, iteration, cube, sample within the
/// cube, and coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleKey {
    pub seed: u64,
    pub iteration: u64,
    pub cube: u64,
    pub sample: u32,
    pub axis: u32,
}

impl SampleKey {
    /// The uniform in `[0, 1)` addressed by this key.
    pub fn uniform(&self) -> f64 {
        let stream = IterationStream::new(self.seed, self.iteration);
        let block = stream.block(self.cube, self.sample, self.axis / 2);
        to_unit(block[(self.axis % 2) as usize])
    }
}

/// Uniforms for one `(seed, iteration)` pair.
#[derive(Debug, Clone, Copy)]
pub struct IterationStream {
    key: [u32; 2],
}

impl IterationStream {
    pub fn new(seed: u64, iteration: u64) -> Self {
        let k = seed ^ mix64(iteration);
        IterationStream {
            key: [k as u32, (k >> 32) as u32],
        }
    }

    #[inline]
    fn block(&self, cube: u64, sample: u32, pair: u32) -> [u64; 2] {
        let out = philox4x32([cube as u32, (cube >> 32) as u32, sample, pair], self.key);
        [
            out[0] as u64 | (out[1] as u64) << 32,
            out[2] as u64 | (out[3] as u64) << 32,
        ]
    }

    /// Fills `out[j]` with the uniform for axis `j` of `(cube, sample)`.
    /// Identical to calling [`SampleKey::uniform`] once per axis.
    #[inline]
    pub fn fill(&self, cube: u64, sample: u32, out: &mut [f64]) {
        for (pair, chunk) in out.chunks_mut(2).enumerate() {
            let block = self.block(cube, sample, pair as u32);
            for (slot, bits) in chunk.iter_mut().zip(block) {
                *slot = to_unit(bits);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 reference code.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn fill_matches_keyed_draws() {
        let stream = IterationStream::new(42, 3);
        let mut out = [0.0; 5];
        stream.fill(17, 4, &mut out);
        for (axis, &u) in out.iter().enumerate() {
            let key = SampleKey {
                seed: 42,
                iteration: 3,
                cube: 17,
                sample: 4,
                axis: axis as u32,
            };
            assert_eq!(u.to_bits(), key.uniform().to_bits());
        }
    }

    #[test]
    fn keys_separate_streams() {
        let base = SampleKey {
            seed: 1,
            iteration: 0,
            cube: 0,
            sample: 0,
            axis: 0,
        };
        let variants = [
            SampleKey { seed: 2, ..base },
            SampleKey { iteration: 1, ..base },
            SampleKey { cube: 1, ..base },
            SampleKey { sample: 1, ..base },
            SampleKey { axis: 1, ..base },
        ];
        for v in variants {
            assert_ne!(v.uniform(), base.uniform());
        }
    }

    #[test]
    fn moments_look_uniform() {
        let stream = IterationStream::new(7, 0);
        let n = 200_000u64;
        let mut buf = [0.0; 2];
        let (mut s1, mut s2) = (0.0, 0.0);
        for cube in 0..n / 2 {
            stream.fill(cube, 0, &mut buf);
            for &u in &buf {
                assert!((0.0..1.0).contains(&u));
                s1 += u;
                s2 += u * u;
            }
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        // Standard error of the mean is about 6.5e-4.
        assert!((mean - 0.5).abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 2e-3, "var {var}");
    }
}
