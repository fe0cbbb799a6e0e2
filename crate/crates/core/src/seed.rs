/// Derives a child seed from a parent seed and a path of indices.
///
/// SplitMix64 finaliser over each component, so nearby parents and
/// indices produce unrelated streams.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    let mut state = mix(parent ^ 0x6a09_e667_f3bc_c909);
    for &p in path {
        state = mix(state ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
