use super::Particle;

/// Systematic (low-variance) resampling: N evenly spaced pointers
/// `(u + k) / N`, `u ∈ [0, 1)`, walked over the cumulative weights.
/// Returns the selected source index for each output slot.
///
/// Zero-weight particles own an empty interval and are never selected.
pub(crate) fn systematic(particles: &[Particle], u: f64) -> Vec<usize> {
    let n = particles.len();
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    let last_positive = particles
        .iter()
        .rposition(|p| p.weight > 0.0)
        .expect("normalized weights have a positive entry");
    let step = 1.0 / n as f64;
    let mut pointer = u * step;
    let mut i = 0;
    let mut cumulative = particles[0].weight / total;
    let mut picks = Vec::with_capacity(n);
    for _ in 0..n {
        while pointer >= cumulative && i < last_positive {
            i += 1;
            cumulative += particles[i].weight / total;
        }
        picks.push(i);
        pointer += step;
    }
    picks
}
