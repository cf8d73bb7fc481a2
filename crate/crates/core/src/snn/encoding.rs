use rand::Rng;

use crate::error::{Error, Result};

/// `timesteps × width` activations, row-major by timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub timesteps: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(timesteps: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != timesteps * width {
            return Err(Error::Shape(format!(
                "spike train of {} values for {timesteps} x {width}",
                data.len()
            )));
        }
        Ok(Self {
            timesteps,
            width,
            data,
        })
    }

    pub fn zeros(timesteps: usize, width: usize) -> Self {
        Self {
            timesteps,
            width,
            data: vec![0.0; timesteps * width],
        }
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn spike_count(&self) -> u64 {
        self.data.iter().filter(|&&x| x == 1.0).count() as u64
    }
}

/// Bernoulli rate coding: input `i` spikes at each timestep with probability `clamp(x_i, 0, 1)`.
pub fn rate_encode(x: &[f64], timesteps: usize, rng: &mut impl Rng) -> SpikeTrain {
    let mut data = Vec::with_capacity(timesteps * x.len());
    for _ in 0..timesteps {
        for &xi in x {
            let p = xi.clamp(0.0, 1.0);
            data.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        }
    }
    SpikeTrain {
        timesteps,
        width: x.len(),
        data,
    }
}
