use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::profile::{Meridian, SurfaceProfile};
use crate::weylvol::AdmissibleSet;

const CHUNKS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Rejection estimate of the Liouville volume of
/// `{E2 ≤ σ² + θ*²/f(s)² ≤ E4, θ*/√p ∈ A}`.
///
/// Nothing depends on `θ`, so only `(s, σ, θ*)` is sampled and the result is
/// multiplied by `2π`. Samples are drawn in fixed chunks, each from its own
/// ChaCha stream, so the estimate does not depend on the execution policy.
pub fn montecarlo_volume_check(
    profile: &SurfaceProfile,
    set: &AdmissibleSet,
    e2: f64,
    e4: f64,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<MonteCarloEstimate> {
    if samples < 100_000 {
        return Err(Error::InvalidInput(format!("Monte Carlo needs at least 1e5 samples, got {samples}")));
    }
    if !(0.0 <= e2 && e2 < e4) {
        return Err(Error::InvalidInput(format!("energy window [{e2}, {e4}]")));
    }
    let l = profile.length;
    let r = e4.sqrt();
    let t_max = r * profile.f_max;
    let box_volume = 2.0 * PI * l * (2.0 * r) * (2.0 * t_max);

    let chunks: Vec<u64> = (0..CHUNKS).collect();
    let per_chunk = samples as u64 / CHUNKS;
    let extra = samples as u64 % CHUNKS;
    let hits: u64 = par::map(exec, &chunks, |&c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let n = per_chunk + u64::from(c < extra);
        let mut hit = 0u64;
        for _ in 0..n {
            let s = rng.random::<f64>() * l;
            let sigma = (2.0 * rng.random::<f64>() - 1.0) * r;
            let ts = (2.0 * rng.random::<f64>() - 1.0) * t_max;
            let f = profile.f(s);
            if f <= 0.0 {
                continue;
            }
            let p = sigma * sigma + (ts / f).powi(2);
            if p >= e2 && p <= e4 && set.contains(ts / p.sqrt()) {
                hit += 1;
            }
        }
        hit
    })
    .into_iter()
    .sum();

    let frac = hits as f64 / samples as f64;
    Ok(MonteCarloEstimate {
        estimate: box_volume * frac,
        stderr: box_volume * (frac * (1.0 - frac) / samples as f64).sqrt(),
        samples,
    })
}
