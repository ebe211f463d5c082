use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const PAIRS: u64 = 1;
pub(crate) const NOISE: u64 = 2;
pub(crate) const RESPONSE: u64 = 3;
pub(crate) const TIMING: u64 = 4;
pub(crate) const PAIR_NUMBER: u64 = 5;
pub(crate) const ORACLE: u64 = 6;

/// Independent stream for `(seed, block, purpose)`.
pub(crate) fn stream(seed: u64, block: u64, purpose: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&block.to_le_bytes());
    key[16..24].copy_from_slice(&purpose.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Per-channel variant of a purpose.
pub(crate) fn channel_purpose(purpose: u64, channel: usize) -> u64 {
    purpose | ((channel as u64 + 1) << 8)
}

/// Number of failures before the first success of a Bernoulli(`q`) process.
pub(crate) fn geometric_gap<R: Rng + ?Sized>(rng: &mut R, q: f64) -> u64 {
    if q >= 1.0 {
        return 0;
    }
    let u = 1.0 - rng.random::<f64>();
    // `as` saturates for the rare astronomically long gap
    (u.ln() / (-q).ln_1p()).floor() as u64
}

/// Appends the indices in `[start, start + len)` at which a Bernoulli(`q`)
/// process succeeds.
pub(crate) fn bernoulli_hits<R: Rng + ?Sized>(
    rng: &mut R,
    q: f64,
    start: u64,
    len: u64,
    out: &mut Vec<u64>,
) {
    if q <= 0.0 {
        return;
    }
    let end = start + len;
    let mut pos = start;
    loop {
        pos = pos.saturating_add(geometric_gap(rng, q));
        if pos >= end {
            return;
        }
        out.push(pos);
        pos += 1;
    }
}
