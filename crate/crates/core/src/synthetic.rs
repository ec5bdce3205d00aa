//! Seeded synthetic class streams with controllable similarity and
//! separability.
//!
//! Normal patches are `mean + noise_sigma * N(0, I)` around a per-class mean.
//! With `latent_dim = k > 0` the noise is confined to a random per-class
//! `k`-dimensional subspace (`noise_sigma * B z`, unit-norm columns in `B`)
//! plus isotropic `residual_sigma` noise. An anomalous test image displaces a fraction of its patches by a constant
//! vector whose every component is `anomaly_offset * noise_sigma`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::{derive_seed, SplitMix64};
use crate::{ClassData, ClassStream, EmbeddingRecord, Embeddings, Error, Label, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SyntheticConfig {
    pub dim: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub train_images: usize,
    pub test_normal: usize,
    pub test_anomalous: usize,
    pub noise_sigma: f64,
    /// Intrinsic dimension of the normal variation; 0 means isotropic in all
    /// `dim` directions.
    pub latent_dim: usize,
    pub residual_sigma: f64,
    /// Per-component displacement of anomalous patches, in units of sigma.
    pub anomaly_offset: f64,
    pub anomalous_patch_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            grid_h: 5,
            grid_w: 10,
            train_images: 40,
            test_normal: 20,
            test_anomalous: 20,
            noise_sigma: 1.0,
            latent_dim: 0,
            residual_sigma: 0.0,
            anomaly_offset: 5.0,
            anomalous_patch_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub name: String,
    pub mean: Vec<f64>,
}

/// Class means grouped into clusters of mutually similar directions.
///
/// Each cluster has a random base direction scaled to `mean_norm`; each class
/// adds an isotropic jitter of norm about `jitter * mean_norm`. Classes are
/// ordered cluster by cluster unless `interleave` is set.
pub fn clustered_means(
    dim: usize,
    clusters: usize,
    per_cluster: usize,
    mean_norm: f64,
    jitter: f64,
    interleave: bool,
    seed: u64,
) -> Vec<ClassSpec> {
    let mut rng = SplitMix64::new(derive_seed(seed, 0xC1A5, 0));
    let bases: Vec<Vec<f64>> = (0..clusters).map(|_| random_direction(&mut rng, dim, mean_norm)).collect();
    let mut specs = Vec::with_capacity(clusters * per_cluster);
    for k in 0..per_cluster * clusters {
        let (cluster, member) = if interleave { (k % clusters, k / clusters) } else { (k / per_cluster, k % per_cluster) };
        let noise = random_direction(&mut rng, dim, jitter * mean_norm);
        let mean = bases[cluster].iter().zip(&noise).map(|(b, n)| b + n).collect();
        specs.push(ClassSpec { name: format!("cluster{cluster}_class{member}"), mean });
    }
    specs
}

fn random_direction(rng: &mut SplitMix64, dim: usize, norm: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n > 1e-12 {
            return v.into_iter().map(|x| x * norm / n).collect();
        }
    }
}

pub fn generate_stream(config: &SyntheticConfig, classes: &[ClassSpec]) -> Result<ClassStream> {
    let patches = config.grid_h * config.grid_w;
    if patches == 0 || config.dim == 0 {
        return Err(Error::InvalidConfig("synthetic grid and dimension must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.anomalous_patch_fraction) {
        return Err(Error::InvalidConfig("anomalous_patch_fraction must lie in [0, 1]".into()));
    }
    let displaced = (libm::round(config.anomalous_patch_fraction * patches as f64) as usize).clamp(1, patches);
    let offset = (config.anomaly_offset * config.noise_sigma) as f32;

    let mut out = Vec::with_capacity(classes.len());
    for (ci, spec) in classes.iter().enumerate() {
        if spec.mean.len() != config.dim {
            return Err(Error::DimensionMismatch { expected: config.dim, found: spec.mean.len() });
        }
        let mut rng = SplitMix64::new(derive_seed(config.seed, 0x5EED, ci as u64));
        let basis: Vec<Vec<f64>> = (0..config.latent_dim).map(|_| random_direction(&mut rng, config.dim, 1.0)).collect();
        let image = |rng: &mut SplitMix64, id: String, label: Label| -> Result<EmbeddingRecord> {
            let mut data = Vec::with_capacity(patches * config.dim);
            let mut patch = alloc::vec![0.0f64; config.dim];
            for _ in 0..patches {
                patch.copy_from_slice(&spec.mean);
                if basis.is_empty() {
                    for v in &mut patch {
                        *v += config.noise_sigma * rng.standard_normal();
                    }
                } else {
                    for b in &basis {
                        let z = config.noise_sigma * rng.standard_normal();
                        for (v, bj) in patch.iter_mut().zip(b) {
                            *v += z * bj;
                        }
                    }
                    for v in &mut patch {
                        *v += config.residual_sigma * rng.standard_normal();
                    }
                }
                data.extend(patch.iter().map(|&v| v as f32));
            }
            if label == Label::Anomalous {
                let chosen = crate::coreset::random_subsample(patches, displaced, rng.next_u64())?;
                for p in chosen {
                    for v in &mut data[p * config.dim..(p + 1) * config.dim] {
                        *v += offset;
                    }
                }
            }
            EmbeddingRecord::new(
                spec.name.clone(),
                id,
                label,
                config.grid_h,
                config.grid_w,
                Embeddings::from_flat(config.dim, data)?,
            )
        };
        let train = (0..config.train_images)
            .map(|i| image(&mut rng, format!("{}/train/{i:04}", spec.name), Label::Normal))
            .collect::<Result<Vec<_>>>()?;
        let mut test = Vec::with_capacity(config.test_normal + config.test_anomalous);
        for i in 0..config.test_normal {
            test.push(image(&mut rng, format!("{}/test/good/{i:04}", spec.name), Label::Normal)?);
        }
        for i in 0..config.test_anomalous {
            test.push(image(&mut rng, format!("{}/test/defect/{i:04}", spec.name), Label::Anomalous)?);
        }
        out.push(ClassData { name: spec.name.clone(), train, test });
    }
    ClassStream::new(config.dim, out)
}
