pub const PROB_CLIP: f64 = 1e-12;

/// Categorical cross-entropy of a probability vector against a class index,
/// with the probability clipped to `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy(p: &[f64], target: usize) -> f64 {
    -p[target].clamp(PROB_CLIP, 1.0 - PROB_CLIP).ln()
}
