use rand::RngCore;

use super::{MclError, Particle, ParticleSet};
use crate::rng::unit;

/// Low-variance (systematic) resampling into `count` equally weighted
/// particles: one uniform offset, then `count` equal strides through the
/// cumulative weights. The weights need not be normalized.
pub fn resample_n<R: RngCore + ?Sized>(set: &ParticleSet, count: usize, rng: &mut R) -> Result<ParticleSet, MclError> {
    let total: f64 = set.particles.iter().map(|p| p.weight).sum();
    if !(total > 0.0 && total.is_finite()) || count == 0 {
        return Err(MclError::DegenerateWeights);
    }
    let n = set.particles.len();
    // work in units of output slots: particle i spans count * w_i / total
    let scale = count as f64 / total;
    let offset = unit(rng);
    let mut idx = 0;
    let mut upper = set.particles[0].weight * scale;
    // rounding can leave the last stride just past the final boundary
    let last_positive = set.particles.iter().rposition(|p| p.weight > 0.0).expect("total weight is positive");
    let w = 1.0 / count as f64;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let u = offset + k as f64;
        while u >= upper && idx + 1 < n {
            idx += 1;
            upper += set.particles[idx].weight * scale;
        }
        let pick = if idx > last_positive { last_positive } else { idx };
        out.push(Particle { pose: set.particles[pick].pose, weight: w });
    }
    Ok(ParticleSet { particles: out })
}

/// Systematic resampling that keeps the particle count.
pub fn resample<R: RngCore + ?Sized>(set: &ParticleSet, rng: &mut R) -> Result<ParticleSet, MclError> {
    resample_n(set, set.len(), rng)
}
