//! Deterministic RNG construction. Every random draw in this crate comes
//! from a stream derived from the user-supplied seed plus a purpose tag,
//! so independent operations never share (or perturb) each other's stream.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(basis: u64, bytes: &[u8]) -> u64 {
    let mut hash = basis;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Builds a stream cipher RNG keyed by `(seed, tag)`.
///
/// The tag is hashed twice with unrelated FNV bases so that short tags
/// still spread across the 256-bit key.
pub(crate) fn rng(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(FNV_OFFSET, tag.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(
        &fnv1a(FNV_OFFSET ^ 0x9e37_79b9_7f4a_7c15, tag.as_bytes()).to_le_bytes(),
    );
    key[24..32].copy_from_slice(&(tag.len() as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_inputs_same_stream() {
        let a: Vec<u64> = (0..8).map(|_| rng(7, "x").random()).collect();
        let b: Vec<u64> = {
            let mut r = rng(7, "x");
            (0..8).map(|_| r.random()).collect()
        };
        // a was rebuilt per draw, b reuses one stream: first draws must agree
        assert_eq!(a[0], b[0]);
        let c: Vec<u64> = {
            let mut r = rng(7, "x");
            (0..8).map(|_| r.random()).collect()
        };
        assert_eq!(b, c);
    }

    #[test]
    fn tag_and_seed_separate_streams() {
        let mut a = rng(7, "subsample");
        let mut b = rng(7, "mix:cs_pdt");
        let mut c = rng(8, "subsample");
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_ne!(x, y);
        assert_ne!(x, z);
    }
}
