use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel-major activation shape. Dense layers use `channels × 1 × 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn flat(len: usize) -> Self {
        Self {
            channels: len,
            height: 1,
            width: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Layer as written in a run configuration; input sizes are inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerConfig {
    Dense {
        outputs: usize,
    },
    Conv {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerKind {
    Dense,
    Conv {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub kind: LayerKind,
    pub input: Shape,
    pub output: Shape,
}

impl Layer {
    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.input.len() * self.output.len(),
            LayerKind::Conv { kernel, .. } => {
                self.output.channels * self.input.channels * kernel * kernel
            }
        }
    }

    pub fn bias_count(&self) -> usize {
        self.output.channels
    }

    /// Multiply-accumulates of one dense evaluation of the layer.
    pub fn macs(&self) -> u64 {
        let m = match self.kind {
            LayerKind::Dense => self.input.len() * self.output.len(),
            LayerKind::Conv { kernel, .. } => {
                self.output.len() * self.input.channels * kernel * kernel
            }
        };
        m as u64
    }

    /// `y = b + W·x`. Zero inputs are skipped, which makes spike inputs cheap.
    pub(crate) fn forward(&self, weights: &[f64], bias: &[f64], x: &[f64], y: &mut [f64]) {
        match self.kind {
            LayerKind::Dense => {
                let n_in = self.input.len();
                y.copy_from_slice(bias);
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (o, yo) in y.iter_mut().enumerate() {
                        *yo += weights[o * n_in + i] * xi;
                    }
                }
            }
            LayerKind::Conv {
                kernel,
                stride,
                padding,
            } => {
                let (ci_n, h, w) = (self.input.channels, self.input.height, self.input.width);
                let (co_n, ho, wo) = (self.output.channels, self.output.height, self.output.width);
                for co in 0..co_n {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut acc = bias[co];
                            for ci in 0..ci_n {
                                for ky in 0..kernel {
                                    let iy = (oy * stride + ky) as isize - padding as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..kernel {
                                        let ix = (ox * stride + kx) as isize - padding as isize;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        let xv = x[(ci * h + iy as usize) * w + ix as usize];
                                        if xv != 0.0 {
                                            acc += weights
                                                [((co * ci_n + ci) * kernel + ky) * kernel + kx]
                                                * xv;
                                        }
                                    }
                                }
                            }
                            y[(co * ho + oy) * wo + ox] = acc;
                        }
                    }
                }
            }
        }
    }

    /// Accumulates weight and bias gradients for upstream `gy`, and writes `∂/∂x` into `gx` if given.
    pub(crate) fn backward(
        &self,
        weights: &[f64],
        x: &[f64],
        gy: &[f64],
        gw: &mut [f64],
        gb: &mut [f64],
        gx: Option<&mut [f64]>,
    ) {
        match self.kind {
            LayerKind::Dense => {
                let n_in = self.input.len();
                for (o, &g) in gy.iter().enumerate() {
                    gb[o] += g;
                    if g == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (gwi, &xi) in row.iter_mut().zip(x) {
                        *gwi += g * xi;
                    }
                }
                if let Some(gx) = gx {
                    gx.fill(0.0);
                    for (o, &g) in gy.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let row = &weights[o * n_in..(o + 1) * n_in];
                        for (gxi, &w) in gx.iter_mut().zip(row) {
                            *gxi += w * g;
                        }
                    }
                }
            }
            LayerKind::Conv {
                kernel,
                stride,
                padding,
            } => {
                let (ci_n, h, w) = (self.input.channels, self.input.height, self.input.width);
                let (co_n, ho, wo) = (self.output.channels, self.output.height, self.output.width);
                let mut gx = gx;
                if let Some(gx) = gx.as_deref_mut() {
                    gx.fill(0.0);
                }
                for co in 0..co_n {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let g = gy[(co * ho + oy) * wo + ox];
                            gb[co] += g;
                            if g == 0.0 {
                                continue;
                            }
                            for ci in 0..ci_n {
                                for ky in 0..kernel {
                                    let iy = (oy * stride + ky) as isize - padding as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..kernel {
                                        let ix = (ox * stride + kx) as isize - padding as isize;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        let xi = (ci * h + iy as usize) * w + ix as usize;
                                        let wi = ((co * ci_n + ci) * kernel + ky) * kernel + kx;
                                        gw[wi] += g * x[xi];
                                        if let Some(gx) = gx.as_deref_mut() {
                                            gx[xi] += weights[wi] * g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Resolved layer stack. Every layer but the last spikes; the last is the readout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input: Shape,
    pub layers: Vec<Layer>,
}

impl Architecture {
    pub fn new(input: Shape, configs: &[LayerConfig]) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::Config("network input is empty".into()));
        }
        if configs.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(configs.len());
        let mut shape = input;
        for (i, cfg) in configs.iter().enumerate() {
            let layer = match *cfg {
                LayerConfig::Dense { outputs } => {
                    if outputs == 0 {
                        return Err(Error::Config(format!("layer {i}: zero outputs")));
                    }
                    Layer {
                        kind: LayerKind::Dense,
                        input: shape,
                        output: Shape::flat(outputs),
                    }
                }
                LayerConfig::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return Err(Error::Config(format!(
                            "layer {i}: conv needs positive channels, kernel and stride"
                        )));
                    }
                    let span_h = shape.height + 2 * padding;
                    let span_w = shape.width + 2 * padding;
                    if span_h < kernel || span_w < kernel {
                        return Err(Error::Config(format!(
                            "layer {i}: kernel {kernel} larger than padded input {span_h}x{span_w}"
                        )));
                    }
                    Layer {
                        kind: LayerKind::Conv {
                            kernel,
                            stride,
                            padding,
                        },
                        input: shape,
                        output: Shape {
                            channels: out_channels,
                            height: (span_h - kernel) / stride + 1,
                            width: (span_w - kernel) / stride + 1,
                        },
                    }
                }
            };
            shape = layer.output;
            layers.push(layer);
        }
        Ok(Self { input, layers })
    }

    /// Checks a deserialized architecture for internal consistency.
    pub fn validate(&self) -> Result<()> {
        let configs: Vec<LayerConfig> = self
            .layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Dense => LayerConfig::Dense {
                    outputs: l.output.len(),
                },
                LayerKind::Conv {
                    kernel,
                    stride,
                    padding,
                } => LayerConfig::Conv {
                    out_channels: l.output.channels,
                    kernel,
                    stride,
                    padding,
                },
            })
            .collect();
        let rebuilt = Architecture::new(self.input, &configs)?;
        if rebuilt != *self {
            return Err(Error::Invalid("layer shapes are inconsistent".into()));
        }
        if self.parameter_count() > MAX_PARAMETERS {
            return Err(Error::Invalid(format!(
                "{} parameters exceeds the limit {MAX_PARAMETERS}",
                self.parameter_count()
            )));
        }
        Ok(())
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output.len())
    }

    pub fn macs(&self) -> Vec<u64> {
        self.layers.iter().map(Layer::macs).collect()
    }

    /// Weights and biases of every layer, then one log-slope per hidden layer.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight_count() + l.bias_count())
            .sum::<usize>()
            + self.hidden_layers()
    }

    /// `(weights start, bias start)` of every layer in the flat parameter vector.
    pub(crate) fn offsets(&self) -> Vec<(usize, usize)> {
        let mut at = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = at;
                let b = w + l.weight_count();
                at = b + l.bias_count();
                (w, b)
            })
            .collect()
    }

    pub(crate) fn log_alpha_offset(&self, hidden: usize) -> usize {
        self.parameter_count() - self.hidden_layers() + hidden
    }
}

/// Upper bound accepted from untrusted architecture files.
pub const MAX_PARAMETERS: usize = 1 << 26;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_counts() {
        let arch = Architecture::new(
            Shape {
                channels: 1,
                height: 16,
                width: 16,
            },
            &[
                LayerConfig::Conv {
                    out_channels: 4,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                },
                LayerConfig::Dense { outputs: 10 },
            ],
        )
        .unwrap();
        assert_eq!(
            arch.layers[0].output,
            Shape {
                channels: 4,
                height: 8,
                width: 8
            }
        );
        assert_eq!(arch.layers[0].macs(), 4 * 64 * 9);
        assert_eq!(arch.layers[1].macs(), 256 * 10);
        assert_eq!(arch.parameter_count(), 4 * 9 + 4 + 2560 + 10 + 1);
        assert!(arch.validate().is_ok());
    }

    #[test]
    fn rejects_bad_layers() {
        let s = Shape::flat(4);
        assert!(Architecture::new(s, &[]).is_err());
        assert!(Architecture::new(s, &[LayerConfig::Dense { outputs: 0 }]).is_err());
        let img = Shape {
            channels: 1,
            height: 2,
            width: 2,
        };
        let conv = LayerConfig::Conv {
            out_channels: 1,
            kernel: 5,
            stride: 1,
            padding: 0,
        };
        assert!(Architecture::new(img, &[conv]).is_err());
    }

    #[test]
    fn conv_matches_dense_equivalent() {
        // A 1x1 stride-1 convolution over a 1x1 image is a dense layer.
        let dense = Layer {
            kind: LayerKind::Dense,
            input: Shape::flat(3),
            output: Shape::flat(2),
        };
        let conv = Layer {
            kind: LayerKind::Conv {
                kernel: 1,
                stride: 1,
                padding: 0,
            },
            input: Shape::flat(3),
            output: Shape::flat(2),
        };
        let w = [0.1, -0.2, 0.3, 0.4, 0.5, -0.6];
        let b = [0.05, -0.05];
        let x = [1.0, 0.0, 2.0];
        let (mut y1, mut y2) = ([0.0; 2], [0.0; 2]);
        dense.forward(&w, &b, &x, &mut y1);
        conv.forward(&w, &b, &x, &mut y2);
        assert_eq!(y1, y2);
        let gy = [0.7, -1.1];
        let (mut gw1, mut gb1, mut gx1) = ([0.0; 6], [0.0; 2], [0.0; 3]);
        let (mut gw2, mut gb2, mut gx2) = ([0.0; 6], [0.0; 2], [0.0; 3]);
        dense.backward(&w, &x, &gy, &mut gw1, &mut gb1, Some(&mut gx1));
        conv.backward(&w, &x, &gy, &mut gw2, &mut gb2, Some(&mut gx2));
        assert_eq!(gw1, gw2);
        assert_eq!(gb1, gb2);
        for (a, b) in gx1.iter().zip(&gx2) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
