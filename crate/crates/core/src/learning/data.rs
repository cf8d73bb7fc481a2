use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::Shape;

/// Labelled examples stored row-major. Quadratic targets use `classes = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input: Shape,
    pub classes: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        input: Shape,
        classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let d = Self {
            input,
            classes,
            features,
            labels,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() * self.dim() {
            return Err(Error::Shape(format!(
                "{} feature values for {} samples of dimension {}",
                self.features.len(),
                self.labels.len(),
                self.dim()
            )));
        }
        if self.classes > 0 {
            if let Some(y) = self.labels.iter().find(|&&y| y >= self.classes) {
                return Err(Error::Invalid(format!(
                    "label {y} with {} classes",
                    self.classes
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.input.len()
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        let d = self.dim();
        (&self.features[i * d..(i + 1) * d], self.labels[i])
    }

    /// One target vector per sample, for the quadratic objective.
    pub fn quadratic(targets: &[Vec<f64>]) -> Result<Self> {
        let dim = targets.first().map_or(0, Vec::len);
        if dim == 0 || targets.iter().any(|t| t.len() != dim) {
            return Err(Error::Shape(
                "quadratic targets must share a positive dimension".into(),
            ));
        }
        Self::new(
            Shape::flat(dim),
            0,
            targets.concat(),
            vec![0; targets.len()],
        )
    }
}

/// Isotropic Gaussian clusters with centres drawn uniformly from `[0.15, 0.85]^dim`,
/// features clipped to `[0, 1]` so they can be rate coded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub dim: usize,
    pub classes: usize,
    pub noise: f64,
}

pub fn gaussian_mixture(
    spec: &MixtureSpec,
    train: usize,
    test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if spec.dim == 0 || spec.classes < 2 || !(spec.noise >= 0.0) {
        return Err(Error::Config(
            "mixture needs dim ≥ 1, classes ≥ 2, noise ≥ 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| rng.random_range(0.15..0.85))
                .collect()
        })
        .collect();
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut draw = |n: usize| {
        let mut features = Vec::with_capacity(n * spec.dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % spec.classes;
            labels.push(c);
            features.extend(
                centres[c]
                    .iter()
                    .map(|&m| (m + normal.sample(&mut rng)).clamp(0.0, 1.0)),
            );
        }
        Dataset::new(Shape::flat(spec.dim), spec.classes, features, labels)
    };
    let train_set = draw(train)?;
    let test_set = draw(test)?;
    Ok((train_set, test_set))
}

/// Grayscale texture images: class `c` is a sinusoidal grating at orientation
/// `c·π/classes`, with per-image phase jitter and pixel noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub side: usize,
    pub classes: usize,
    pub noise: f64,
}

pub fn texture_patterns(
    spec: &PatternSpec,
    train: usize,
    test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if spec.side < 4 || spec.classes < 2 || !(spec.noise >= 0.0) {
        return Err(Error::Config(
            "patterns need side ≥ 4, classes ≥ 2, noise ≥ 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let side = spec.side;
    let shape = Shape {
        channels: 1,
        height: side,
        width: side,
    };
    let freq = 2.0 * std::f64::consts::PI * 3.0 / side as f64;
    let mut draw = |n: usize| {
        let mut features = Vec::with_capacity(n * side * side);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % spec.classes;
            labels.push(c);
            let angle = std::f64::consts::PI * c as f64 / spec.classes as f64;
            let (s, co) = angle.sin_cos();
            let phase = rng.random_range(-0.6..0.6);
            for y in 0..side {
                for x in 0..side {
                    let v = 0.5 + 0.5 * (freq * (x as f64 * co + y as f64 * s) + phase).sin();
                    features.push((v + normal.sample(&mut rng)).clamp(0.0, 1.0));
                }
            }
        }
        Dataset::new(shape, spec.classes, features, labels)
    };
    let train_set = draw(train)?;
    let test_set = draw(test)?;
    Ok((train_set, test_set))
}

/// Sample indices per plane and satellite, plus each plane's class proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub shards: Vec<Vec<Vec<usize>>>,
    pub proportions: Vec<Vec<f64>>,
}

impl Partition {
    pub fn planes(&self) -> usize {
        self.shards.len()
    }

    pub fn satellites_per_plane(&self) -> usize {
        self.shards.first().map_or(0, Vec::len)
    }

    pub fn plane_indices(&self, plane: usize) -> Vec<usize> {
        self.shards[plane].concat()
    }

    /// Sample `plane·K + slot` goes to satellite `(plane, slot)`.
    pub fn one_per_satellite(planes: usize, satellites: usize) -> Self {
        let shards = (0..planes)
            .map(|p| (0..satellites).map(|k| vec![p * satellites + k]).collect())
            .collect();
        Self {
            shards,
            proportions: vec![Vec::new(); planes],
        }
    }
}

const PARTITION_ATTEMPTS: usize = 1000;

/// `Gamma(shape, 1)` sample as a logarithm; stays finite for tiny shapes where
/// the sample itself underflows.
fn log_gamma_sample(shape: f64, rng: &mut impl Rng) -> Result<f64> {
    let g = Gamma::new(shape + 1.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let u: f64 = 1.0 - rng.random::<f64>();
    Ok(g.sample(rng).ln() + u.ln() / shape)
}

/// Draw `p ~ Dirichlet(ς·1_N)` per class and hand the class's samples to planes in
/// those proportions; then deal each plane's samples evenly to its satellites.
/// A draw leaving a satellite empty is discarded and redrawn.
pub fn dirichlet_partition(
    labels: &[usize],
    classes: usize,
    planes: usize,
    satellites: usize,
    varsigma: f64,
    seed: u64,
) -> Result<Partition> {
    if planes == 0 || satellites == 0 || classes == 0 {
        return Err(Error::Config(
            "partition needs planes, satellites and classes ≥ 1".into(),
        ));
    }
    if !(varsigma > 0.0 && varsigma.is_finite()) {
        return Err(Error::Config(format!(
            "heterogeneity {varsigma} must be positive"
        )));
    }
    if labels.len() < planes * satellites {
        return Err(Error::Infeasible(format!(
            "{} samples cannot cover {} satellites",
            labels.len(),
            planes * satellites
        )));
    }
    let mut by_class = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Invalid(format!("label {y} with {classes} classes")));
        }
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..PARTITION_ATTEMPTS {
        let mut plane_samples = vec![Vec::new(); planes];
        let mut counts = vec![vec![0usize; classes]; planes];
        for (c, members) in by_class.iter().enumerate() {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let logs: Vec<f64> = (0..planes)
                .map(|_| log_gamma_sample(varsigma, &mut rng))
                .collect::<Result<_>>()?;
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut cumulative = 0.0;
            let mut start = 0usize;
            for (p, w) in weights.iter().enumerate() {
                cumulative += w / total;
                let end = if p + 1 == planes {
                    members.len()
                } else {
                    ((cumulative * members.len() as f64).round() as usize)
                        .clamp(start, members.len())
                };
                plane_samples[p].extend_from_slice(&members[start..end]);
                counts[p][c] = end - start;
                start = end;
            }
        }
        if plane_samples.iter().any(|s| s.len() < satellites) {
            continue;
        }
        let mut shards = Vec::with_capacity(planes);
        let mut proportions = Vec::with_capacity(planes);
        for (mut samples, count) in plane_samples.into_iter().zip(counts) {
            samples.shuffle(&mut rng);
            let n = samples.len();
            shards.push(
                (0..satellites)
                    .map(|k| {
                        let mut shard =
                            samples[k * n / satellites..(k + 1) * n / satellites].to_vec();
                        shard.sort_unstable();
                        shard
                    })
                    .collect(),
            );
            proportions.push(count.iter().map(|&c| c as f64 / n as f64).collect());
        }
        return Ok(Partition {
            shards,
            proportions,
        });
    }
    Err(Error::Config(format!(
        "no Dirichlet draw gave every satellite a sample in {PARTITION_ATTEMPTS} attempts; \
         use more training samples or a larger heterogeneity"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, classes: usize) -> Vec<usize> {
        (0..n).map(|i| i % classes).collect()
    }

    #[test]
    fn single_plane_gets_everything() {
        let y = labels(100, 4);
        let p = dirichlet_partition(&y, 4, 1, 3, 0.02, 1).unwrap();
        let mut all: Vec<usize> = p.plane_indices(0);
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(p.shards[0].iter().all(|s| s.len() >= 33));
    }

    #[test]
    fn shards_are_a_disjoint_cover() {
        let y = labels(500, 10);
        let p = dirichlet_partition(&y, 10, 5, 4, 0.5, 7).unwrap();
        let mut all: Vec<usize> = p.shards.iter().flatten().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
        assert!(p.shards.iter().flatten().all(|s| !s.is_empty()));
        for props in &p.proportions {
            assert!((props.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let y = labels(300, 6);
        assert_eq!(
            dirichlet_partition(&y, 6, 3, 2, 0.1, 5).unwrap(),
            dirichlet_partition(&y, 6, 3, 2, 0.1, 5).unwrap()
        );
    }

    #[test]
    fn rejects_bad_arguments() {
        let y = labels(10, 2);
        assert!(dirichlet_partition(&y, 2, 3, 4, 1.0, 0).is_err());
        assert!(dirichlet_partition(&y, 2, 2, 1, 0.0, 0).is_err());
        assert!(dirichlet_partition(&[5], 2, 1, 1, 1.0, 0).is_err());
    }

    #[test]
    fn generators_shapes() {
        let (tr, te) = gaussian_mixture(
            &MixtureSpec {
                dim: 8,
                classes: 3,
                noise: 0.1,
            },
            30,
            9,
            2,
        )
        .unwrap();
        assert_eq!((tr.len(), te.len(), tr.dim()), (30, 9, 8));
        assert!(tr.features.iter().all(|v| (0.0..=1.0).contains(v)));
        let (tr, _) = texture_patterns(
            &PatternSpec {
                side: 16,
                classes: 4,
                noise: 0.1,
            },
            8,
            4,
            2,
        )
        .unwrap();
        assert_eq!(tr.dim(), 256);
        assert_eq!(tr.labels, vec![0, 1, 2, 3, 0, 1, 2, 3]);
    }
}
