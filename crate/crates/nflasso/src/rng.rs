//! Counter-based deterministic randomness.
//!
//! Every draw is a pure function of (seed, counter), so callers index
//! streams by position instead of threading mutable state. That makes
//! simulation output reproducible regardless of evaluation order.

use crate::linalg::normal_quantile_upper;

/// splitmix64 finalizer over the keyed counter.
pub(crate) fn mix(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in the open interval (0, 1).
///
/// Uses 52 bits with a half-ulp offset: the extremes are 2⁻⁵³ and
/// 1 − 2⁻⁵³, both exactly representable, so neither endpoint of (0, 1)
/// can ever be returned. A 53-bit mantissa plus the 0.5 offset would
/// round the top value to exactly 1.0.
pub(crate) fn uniform(seed: u64, counter: u64) -> f64 {
    ((mix(seed, counter) >> 12) as f64 + 0.5) / (1u64 << 52) as f64
}

/// Standard normal draw by inverse-CDF.
pub(crate) fn standard_normal(seed: u64, counter: u64) -> f64 {
    let u = uniform(seed, counter);
    // 1 − u is exact for u ≥ 0.5 (Sterbenz), and both arguments lie in
    // the quantile domain, so the unwraps cannot fire.
    if u < 0.5 {
        -normal_quantile_upper(u).unwrap()
    } else {
        normal_quantile_upper(1.0 - u).unwrap()
    }
}
