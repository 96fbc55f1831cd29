//! Seeded synthetic datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectors::VectorSet;

/// A Gaussian mixture with equally likely components.
///
/// Component means are drawn from `N(0, center_std^2)` per coordinate and
/// points add `N(0, noise_std^2)` noise. With `decay > 0`, coordinate `j` of
/// both means and noise is scaled by `(1 + j)^-decay`. With `normalize`,
/// every vector is scaled to unit length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub n_queries: usize,
    pub dim: usize,
    pub components: usize,
    pub center_std: f64,
    pub noise_std: f64,
    pub decay: f64,
    pub normalize: bool,
    pub seed: u64,
}

impl MixtureSpec {
    /// Ten well-separated isotropic components in 128 dimensions.
    pub fn gauss(n: usize, n_queries: usize, seed: u64) -> Self {
        Self {
            n,
            n_queries,
            dim: 128,
            components: 10,
            center_std: 4.0,
            noise_std: 1.0,
            decay: 0.0,
            normalize: false,
            seed,
        }
    }

    /// Unit-norm 96-dimensional vectors with a decaying spectrum and many
    /// loose clusters, resembling CNN descriptors.
    pub fn deep_like(n: usize, n_queries: usize, seed: u64) -> Self {
        Self {
            n,
            n_queries,
            dim: 96,
            components: 100,
            center_std: 1.0,
            noise_std: 0.6,
            decay: 0.7,
            normalize: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim == 0 || self.components == 0 {
            return Err(Error::usage("n, dim and components must be positive"));
        }
        if !(self.center_std >= 0.0 && self.noise_std >= 0.0 && self.decay >= 0.0) {
            return Err(Error::usage("standard deviations and decay must be non-negative"));
        }
        Ok(())
    }

    /// Returns `(database, queries)`; queries are fresh draws from the same
    /// mixture.
    pub fn generate(&self) -> Result<(VectorSet, VectorSet)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let std = Normal::new(0.0f64, 1.0).expect("unit normal");
        let scale: Vec<f64> = (0..self.dim).map(|j| (1.0 + j as f64).powf(-self.decay)).collect();
        let means: Vec<f64> = (0..self.components * self.dim)
            .map(|i| std.sample(&mut rng) * self.center_std * scale[i % self.dim])
            .collect();
        let draw = |count: usize, rng: &mut ChaCha8Rng| -> Result<VectorSet> {
            let mut data = Vec::with_capacity(count * self.dim);
            let mut row = vec![0f64; self.dim];
            for _ in 0..count {
                let c = rng.random_range(0..self.components);
                for j in 0..self.dim {
                    row[j] = means[c * self.dim + j] + std.sample(rng) * self.noise_std * scale[j];
                }
                if self.normalize {
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        row.iter_mut().for_each(|v| *v /= norm);
                    }
                }
                data.extend(row.iter().map(|&v| v as f32));
            }
            VectorSet::new(self.dim, data)
        };
        let base = draw(self.n, &mut rng)?;
        let queries = if self.n_queries == 0 {
            VectorSet::empty(self.dim)?
        } else {
            draw(self.n_queries, &mut rng)?
        };
        Ok((base, queries))
    }
}
