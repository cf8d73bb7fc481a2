use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::Dataset;
use super::model::Model;
use crate::aggregation::check_dims;
use crate::error::{Error, Result};

/// Mixes a run seed with coordinates into an independent stream seed.
pub fn stream_seed(seed: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(seed), |h, &p| mix(h ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSgd {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

/// `epochs` passes of minibatch SGD over `shard`, reshuffled every epoch.
/// Returns the mean minibatch loss of the last epoch.
pub fn local_sgd(
    model: &dyn Model,
    params: &mut [f64],
    data: &Dataset,
    shard: &[usize],
    opts: &LocalSgd,
    seed: u64,
) -> Result<f64> {
    if shard.is_empty() {
        return Err(Error::Invalid("local SGD on an empty shard".into()));
    }
    let batch_size = opts.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = 0.0;
    for epoch in 0..opts.epochs {
        let mut order = shard.to_vec();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let batches = order.len().div_ceil(batch_size);
        for (b, batch) in order.chunks(batch_size).enumerate() {
            let (loss, grad) = model.loss_grad(
                params,
                data,
                batch,
                stream_seed(seed, &[epoch as u64, b as u64]),
            )?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite loss {loss} in epoch {epoch}, batch {b} (learning rate {})",
                    opts.learning_rate
                )));
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= opts.learning_rate * g;
            }
            total += loss;
        }
        last = total / batches as f64;
    }
    Ok(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingCost {
    /// Segment transfers each satellite sends: `2(K − 1)`.
    pub transfers_per_satellite: usize,
    /// Total values moved over the ring.
    pub values_sent: usize,
}

/// Mean of the models of one plane by reduce-scatter then all-gather around the ring.
pub fn ring_allreduce_mean(models: &[Vec<f64>]) -> Result<(Vec<f64>, RingCost)> {
    let k = models.len();
    if k == 0 {
        return Err(Error::Invalid(
            "ring all-reduce over zero satellites".into(),
        ));
    }
    let dim = check_dims(models)?;
    if k == 1 {
        return Ok((
            models[0].clone(),
            RingCost {
                transfers_per_satellite: 0,
                values_sent: 0,
            },
        ));
    }
    let bounds: Vec<usize> = (0..=k).map(|s| s * dim / k).collect();
    let segment = |s: usize| bounds[s]..bounds[s + 1];
    let mut buffers: Vec<Vec<f64>> = models.to_vec();
    let mut values_sent = 0;
    // Step `r`: node `i` passes segment `(i − r) mod K` to `i + 1`, which adds it.
    for r in 0..k - 1 {
        let outgoing: Vec<(usize, Vec<f64>)> = (0..k)
            .map(|i| {
                let s = (i + k - r) % k;
                (s, buffers[i][segment(s)].to_vec())
            })
            .collect();
        for (i, (s, data)) in outgoing.into_iter().enumerate() {
            values_sent += data.len();
            let dst = &mut buffers[(i + 1) % k][segment(s)];
            for (d, v) in dst.iter_mut().zip(&data) {
                *d += v;
            }
        }
    }
    // Node `i` now owns the full sum of segment `(i + 1) mod K`; circulate them.
    for r in 0..k - 1 {
        let outgoing: Vec<(usize, Vec<f64>)> = (0..k)
            .map(|i| {
                let s = (i + 1 + k - r) % k;
                (s, buffers[i][segment(s)].to_vec())
            })
            .collect();
        for (i, (s, data)) in outgoing.into_iter().enumerate() {
            values_sent += data.len();
            buffers[(i + 1) % k][segment(s)].copy_from_slice(&data);
        }
    }
    debug_assert!(buffers.windows(2).all(|w| w[0] == w[1]));
    let scale = k as f64;
    let mean = buffers
        .swap_remove(0)
        .into_iter()
        .map(|v| v / scale)
        .collect();
    Ok((
        mean,
        RingCost {
            transfers_per_satellite: 2 * (k - 1),
            values_sent,
        },
    ))
}
