//! Shared fixtures for the criterion benches.

use detectllm::stats::{TextStats, TokenStats};

/// Deterministic pseudo-random stats of the given length (splitmix-style,
/// no RNG dependency so the lib stays dependency-free).
pub fn synthetic_stats(len: usize, seed: u64) -> TextStats {
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        (z ^ (z >> 31)) as f64 / u64::MAX as f64
    };
    let tokens = (0..len)
        .map(|i| TokenStats {
            token_text: format!("t{i}"),
            log_prob: -(next() * 9.0 + 0.05),
            rank: 1 + (next() * 400.0) as u32,
            entropy: next() * 8.0,
        })
        .collect();
    TextStats {
        id: format!("bench-{seed}"),
        backend_id: "bench".into(),
        vocab_size: 1 << 20,
        scored_from: 1,
        truncated: false,
        tokens,
    }
}
