//! State features φ and task vectors w.
//!
//! The encoder is `φ(x) = normalize(σ(W x))` with `σ` either `tanh` or the
//! identity. Training ascends the mean of `φ(s)ᵀw` over a batch, which is the
//! von Mises-Fisher log-likelihood of `w` given `s` up to constants.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::envs::Observation;
use crate::linalg::{dot, norm};
use crate::rng::standard_normal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "identity" | "linear" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Outcome of a feature training call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureUpdate {
    Applied { gradient_norm: f64 },
    /// The map is frozen; parameters were left untouched.
    Skipped,
}

/// Linear-then-activation feature encoder with unit-norm output.
///
/// `weights` is the `feature_dim × obs_dim` matrix stored column by column, so
/// the column for observation coordinate `j` is
/// `weights[j * feature_dim..(j + 1) * feature_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub feature_dim: usize,
    pub obs_dim: usize,
    pub weights: Vec<f64>,
    pub activation: Activation,
    pub trainable: bool,
    pub learning_rate: f64,
}

impl FeatureMap {
    /// Gaussian init with standard deviation `scale`.
    pub fn random<R: Rng + ?Sized>(
        feature_dim: usize,
        obs_dim: usize,
        scale: f64,
        learning_rate: f64,
        rng: &mut R,
    ) -> Self {
        let weights = (0..feature_dim * obs_dim)
            .map(|_| scale * standard_normal(rng))
            .collect();
        FeatureMap {
            feature_dim,
            obs_dim,
            weights,
            activation: Activation::Tanh,
            trainable: true,
            learning_rate,
        }
    }

    /// Identity weights (square), linear activation.
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        FeatureMap {
            feature_dim: dim,
            obs_dim: dim,
            weights,
            activation: Activation::Identity,
            trainable: true,
            learning_rate: 0.01,
        }
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.weights[j * self.feature_dim..(j + 1) * self.feature_dim]
    }

    fn check(&self, obs: &Observation) -> Result<()> {
        if obs.dim() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                actual: obs.dim(),
            });
        }
        Ok(())
    }

    /// Activated, not yet normalized features.
    fn activated(&self, obs: &Observation) -> Vec<f64> {
        let mut u = match obs {
            Observation::Cell { index, .. } => self.column(*index).to_vec(),
            Observation::Vector(x) => {
                let mut u = vec![0.0; self.feature_dim];
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        for (uk, wk) in u.iter_mut().zip(self.column(j)) {
                            *uk += wk * xj;
                        }
                    }
                }
                u
            }
        };
        if self.activation == Activation::Tanh {
            for v in &mut u {
                *v = libm::tanh(*v);
            }
        }
        u
    }

    /// Unit-norm feature vector. A zero pre-normalization vector maps to the
    /// first basis vector.
    pub fn encode(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.check(obs)?;
        Ok(normalize_or_basis(self.activated(obs)))
    }

    /// Gradient of `mean_i φ(s_i)ᵀ w_i` with respect to `weights`.
    pub fn gradient(&self, batch: &[(&Observation, &[f64])]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.weights.len()];
        if batch.is_empty() {
            return Ok(grad);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut du = vec![0.0; self.feature_dim];
        for (obs, w) in batch {
            self.check(obs)?;
            if w.len() != self.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_dim,
                    actual: w.len(),
                });
            }
            let v = self.activated(obs);
            let n = norm(&v);
            if n <= f64::MIN_POSITIVE {
                continue;
            }
            // d(vᵀw/|v|)/dv = (w - φ φᵀw) / |v|
            let phi_w = dot(&v, w) / n;
            for k in 0..self.feature_dim {
                let phi_k = v[k] / n;
                let mut g = (w[k] - phi_k * phi_w) / n;
                if self.activation == Activation::Tanh {
                    g *= 1.0 - v[k] * v[k];
                }
                du[k] = g * scale;
            }
            match obs {
                Observation::Cell { index, .. } => {
                    let col = &mut grad[index * self.feature_dim..(index + 1) * self.feature_dim];
                    for (gk, dk) in col.iter_mut().zip(&du) {
                        *gk += dk;
                    }
                }
                Observation::Vector(x) => {
                    for (j, &xj) in x.iter().enumerate() {
                        let col = &mut grad[j * self.feature_dim..(j + 1) * self.feature_dim];
                        for (gk, dk) in col.iter_mut().zip(&du) {
                            *gk += dk * xj;
                        }
                    }
                }
            }
        }
        Ok(grad)
    }

    /// One gradient ascent step on `mean φ(s)ᵀw`, in place.
    pub fn train(&mut self, batch: &[(&Observation, &[f64])]) -> Result<FeatureUpdate> {
        if !self.trainable {
            return Ok(FeatureUpdate::Skipped);
        }
        let grad = self.gradient(batch)?;
        for (w, g) in self.weights.iter_mut().zip(&grad) {
            *w += self.learning_rate * g;
        }
        Ok(FeatureUpdate::Applied {
            gradient_norm: norm(&grad),
        })
    }

    /// Value-returning form of [`FeatureMap::train`].
    pub fn train_feature(&self, batch: &[(&Observation, &[f64])]) -> Result<(FeatureMap, FeatureUpdate)> {
        let mut next = self.clone();
        let outcome = next.train(batch)?;
        Ok((next, outcome))
    }
}

pub(crate) fn normalize_or_basis(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n <= f64::MIN_POSITIVE || !n.is_finite() {
        v.iter_mut().for_each(|x| *x = 0.0);
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        return v;
    }
    v.iter_mut().for_each(|x| *x /= n);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskOrigin {
    Sampled,
    Regressed,
}

/// Linear reward weights over features.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskVector {
    pub w: Vec<f64>,
    pub origin: TaskOrigin,
}

impl TaskVector {
    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

/// Uniform sample from the unit sphere (normalized Gaussian).
pub fn sample_task<R: Rng + ?Sized>(feature_dim: usize, rng: &mut R) -> TaskVector {
    assert!(feature_dim >= 1, "feature_dim must be positive");
    loop {
        let v: Vec<f64> = (0..feature_dim).map(|_| standard_normal(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return TaskVector {
                w: v.into_iter().map(|x| x / n).collect(),
                origin: TaskOrigin::Sampled,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn identity_encoder_passes_basis_vectors() {
        let map = FeatureMap::identity(3);
        let phi = map.encode(&Observation::Vector(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(phi, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_encoder_ignores_positive_scaling() {
        let mut rng = stream(1, Stream::Init);
        let mut map = FeatureMap::random(5, 4, 1.0, 0.01, &mut rng);
        map.activation = Activation::Identity;
        let x = vec![0.3, -1.2, 0.5, 2.0];
        let a = map.encode(&Observation::Vector(x.clone())).unwrap();
        let b = map
            .encode(&Observation::Vector(x.iter().map(|v| 3.0 * v).collect()))
            .unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_maps_to_first_basis_vector() {
        let map = FeatureMap::identity(3);
        let phi = map.encode(&Observation::Vector(vec![0.0; 3])).unwrap();
        assert_eq!(phi, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let map = FeatureMap::identity(3);
        assert!(map.encode(&Observation::Vector(vec![1.0; 4])).is_err());
    }

    #[test]
    fn one_dimensional_tasks_are_signs() {
        let mut rng = stream(2, Stream::Task);
        for _ in 0..100 {
            let t = sample_task(1, &mut rng);
            assert!(t.w[0] == 1.0 || t.w[0] == -1.0);
        }
    }

    #[test]
    fn frozen_map_is_untouched() {
        let mut rng = stream(3, Stream::Init);
        let mut map = FeatureMap::random(4, 6, 1.0, 0.5, &mut rng);
        map.trainable = false;
        let before = map.clone();
        let obs = Observation::Cell { index: 2, count: 6 };
        let w = [0.5, 0.5, 0.5, 0.5];
        let (after, outcome) = map.train_feature(&[(&obs, &w[..])]).unwrap();
        assert_eq!(outcome, FeatureUpdate::Skipped);
        assert_eq!(after, before);
    }

    #[test]
    fn aligned_batch_has_zero_gradient() {
        let map = FeatureMap::identity(3);
        let obs = Observation::Vector(vec![0.0, 2.0, 0.0]);
        let w = [0.0, 1.0, 0.0];
        let g = map.gradient(&[(&obs, &w[..])]).unwrap();
        assert!(norm(&g) <= 1e-6);
    }
}
