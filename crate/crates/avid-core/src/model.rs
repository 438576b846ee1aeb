//! Dual query/key encoders per modality, the momentum rule tying keys to
//! queries, and the pseudo-label classifier trained under stop-gradient.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::numeric::{
    dot, l2_normalize, norm, softmax_temp, Gradients, Matrix, Mlp, NORM_FLOOR,
};
use crate::rng;

/// A unit-norm representation of one sample in one modality.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Normalizes `v` onto the unit sphere.
    pub fn from_unnormalized(v: Vec<f64>) -> Result<Self> {
        Ok(Embedding {
            values: l2_normalize(&v)?,
        })
    }

    /// Wraps values that are already unit-norm (e.g. read back from a
    /// checkpoint); debug builds verify the invariant.
    pub fn from_unit(values: Vec<f64>) -> Self {
        debug_assert!((norm(&values) - 1.0).abs() < 1e-6);
        Embedding { values }
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Cache from a query forward pass; holds what the backward pass through the
/// normalization head and the MLP needs.
#[derive(Clone, Debug)]
pub struct QueryCache {
    mlp: crate::numeric::ForwardCache,
    unit: Vec<f64>,
    raw_norm: f64,
}

/// Query parameters (gradient-updated) and key parameters (momentum-updated)
/// for one modality; same architecture, independent values.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalityEncoder {
    query: Mlp,
    key: Mlp,
}

impl ModalityEncoder {
    /// Random query net; the key net starts as an exact copy.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        embedding_dim: usize,
        rand: &mut R,
    ) -> Result<Self> {
        let query = Mlp::new_random(&[input_dim, hidden_dim, hidden_dim, embedding_dim], rand)?;
        let key = query.clone();
        Ok(ModalityEncoder { query, key })
    }

    pub fn from_parts(query: Mlp, key: Mlp) -> Result<Self> {
        if !query.same_shape(&key) {
            return Err(CoreError::ShapeMismatch {
                context: "query and key encoders must share a shape",
            });
        }
        Ok(ModalityEncoder { query, key })
    }

    pub fn query_params(&self) -> &Mlp {
        &self.query
    }

    pub fn key_params(&self) -> &Mlp {
        &self.key
    }

    pub fn input_dim(&self) -> usize {
        self.query.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.query.output_dim()
    }

    /// Unit-norm query embedding plus the cache for `query_backward`.
    pub fn encode_query(&self, x: &[f64]) -> Result<(Embedding, QueryCache)> {
        let (raw, mlp) = self.query.forward(x)?;
        let raw_norm = norm(&raw);
        if raw_norm < NORM_FLOOR {
            return Err(CoreError::ZeroNorm);
        }
        let unit: Vec<f64> = raw.iter().map(|v| v / raw_norm).collect();
        Ok((
            Embedding {
                values: unit.clone(),
            },
            QueryCache {
                mlp,
                unit,
                raw_norm,
            },
        ))
    }

    /// Query embedding without a cache.
    pub fn encode_query_only(&self, x: &[f64]) -> Result<Embedding> {
        let raw = self.query.infer(x)?;
        Embedding::from_unnormalized(raw)
    }

    /// Key embedding through the momentum parameters; never receives
    /// gradients.
    pub fn encode_key(&self, x: &[f64]) -> Result<Embedding> {
        let raw = self.key.infer(x)?;
        Embedding::from_unnormalized(raw)
    }

    /// Backpropagates a gradient on the unit embedding through the
    /// normalization head into the query MLP parameters.
    pub fn query_backward(&self, cache: &QueryCache, grad_embedding: &[f64]) -> Result<Gradients> {
        if grad_embedding.len() != self.embedding_dim() {
            return Err(CoreError::StaleCache);
        }
        // q = v / ‖v‖  ⇒  dL/dv = (g − (g·q) q) / ‖v‖
        let projection = dot(grad_embedding, &cache.unit);
        let grad_raw: Vec<f64> = grad_embedding
            .iter()
            .zip(cache.unit.iter())
            .map(|(g, q)| (g - projection * q) / cache.raw_norm)
            .collect();
        let (_, grads) = self.query.backward(&cache.mlp, &grad_raw)?;
        Ok(grads)
    }

    /// Moves the key parameters toward the query parameters by Eq-style
    /// momentum: `key ← m·key + (1−m)·query`.
    pub fn apply_momentum(&mut self, momentum: f64) -> Result<()> {
        let query = self.query.clone();
        momentum_update(&mut self.key, &query, momentum)
    }

    pub fn query_params_mut(&mut self) -> &mut Mlp {
        &mut self.query
    }
}

/// Coordinate-wise momentum update of `target` toward `source`.
pub fn momentum_update(target: &mut Mlp, source: &Mlp, momentum: f64) -> Result<()> {
    if !(0.0..1.0).contains(&momentum) {
        return Err(CoreError::MomentumOutOfRange { got: momentum });
    }
    if !target.same_shape(source) {
        return Err(CoreError::ShapeMismatch {
            context: "momentum update",
        });
    }
    for (t, s) in target.layers_mut().iter_mut().zip(source.layers().iter()) {
        for (tv, sv) in t
            .weight
            .as_mut_slice()
            .iter_mut()
            .zip(s.weight.as_slice().iter())
        {
            *tv = momentum * *tv + (1.0 - momentum) * *sv;
        }
        for (tv, sv) in t.bias.iter_mut().zip(s.bias.iter()) {
            *tv = momentum * *tv + (1.0 - momentum) * *sv;
        }
    }
    Ok(())
}

/// Single affine layer mapping embeddings to bucket probabilities; trained
/// only through its own cross-entropy, never through the encoders.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    weight: Matrix,
    bias: Vec<f64>,
}

impl Classifier {
    pub fn new_random<R: Rng + ?Sized>(
        embedding_dim: usize,
        classes: usize,
        rand: &mut R,
    ) -> Self {
        let std = 1.0 / crate::fmath::sqrt(embedding_dim as f64);
        let mut weight = Matrix::zeros(classes, embedding_dim);
        for x in weight.as_mut_slice() {
            *x = std * rng::standard_normal(rand);
        }
        Classifier {
            weight,
            bias: alloc::vec![0.0; classes],
        }
    }

    pub fn zeros(embedding_dim: usize, classes: usize) -> Self {
        Classifier {
            weight: Matrix::zeros(classes, embedding_dim),
            bias: alloc::vec![0.0; classes],
        }
    }

    pub fn from_parts(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(CoreError::ShapeMismatch {
                context: "classifier bias length",
            });
        }
        Ok(Classifier { weight, bias })
    }

    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Softmax over affine logits.
    pub fn classify(&self, q: &Embedding) -> Result<Vec<f64>> {
        if q.dim() != self.embedding_dim() {
            return Err(CoreError::LengthMismatch {
                expected: self.embedding_dim(),
                got: q.dim(),
            });
        }
        let mut logits = self.weight.matvec(q.as_slice());
        for (l, b) in logits.iter_mut().zip(self.bias.iter()) {
            *l += b;
        }
        softmax_temp(&logits, 1.0)
    }

    /// One gradient step on the cross-entropy between the soft target `g`
    /// and the prediction. The embedding is a constant here; encoder
    /// parameters are untouched by construction.
    pub fn step(&mut self, q: &Embedding, target: &[f64], lr: f64) -> Result<f64> {
        self.batch_step(&[q.clone()], &[target.to_vec()], lr)
    }

    /// Mean cross-entropy step over a batch of (embedding, soft target)
    /// pairs; returns the pre-update loss.
    pub fn batch_step(&mut self, qs: &[Embedding], targets: &[Vec<f64>], lr: f64) -> Result<f64> {
        if qs.is_empty() || qs.len() != targets.len() {
            return Err(CoreError::LengthMismatch {
                expected: qs.len(),
                got: targets.len(),
            });
        }
        let classes = self.classes();
        let scale = 1.0 / qs.len() as f64;
        let mut grad_w = Matrix::zeros(classes, self.embedding_dim());
        let mut grad_b = alloc::vec![0.0; classes];
        let mut loss = 0.0;
        for (q, g) in qs.iter().zip(targets.iter()) {
            if g.len() != classes {
                return Err(CoreError::LengthMismatch {
                    expected: classes,
                    got: g.len(),
                });
            }
            let sum: f64 = g.iter().sum();
            if crate::fmath::abs(sum - 1.0) > 1e-6 {
                return Err(CoreError::InvalidTarget { sum });
            }
            let p = self.classify(q)?;
            for (gj, pj) in g.iter().zip(p.iter()) {
                if *gj > 0.0 {
                    loss -= scale * gj * crate::fmath::ln(*pj);
                }
            }
            // d(CE)/dlogits = p − g
            let dlogits: Vec<f64> = p.iter().zip(g.iter()).map(|(pj, gj)| pj - gj).collect();
            grad_w.add_outer(&dlogits, q.as_slice(), scale);
            for (b, d) in grad_b.iter_mut().zip(dlogits.iter()) {
                *b += scale * d;
            }
        }
        for (w, g) in self
            .weight
            .as_mut_slice()
            .iter_mut()
            .zip(grad_w.as_slice().iter())
        {
            *w -= lr * g;
        }
        for (b, g) in self.bias.iter_mut().zip(grad_b.iter()) {
            *b -= lr * g;
        }
        Ok(loss)
    }
}
