//! Noise-contrastive loss over a query, its paired key, and a contrastive
//! set, plus the bidirectional cross-modal objective and analytic gradients
//! with respect to the query embedding.
//!
//! Keys and stored negatives are constants: gradients flow to the query
//! only, matching the momentum-encoder contract. All embeddings are unit
//! norm by type invariant, so cosine similarity reduces to a dot product;
//! the normalization Jacobian is applied by the encoder head's backward.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::fmath;
use crate::model::Embedding;
use crate::numeric::dot;

/// Loss value plus the gradient with respect to the query embedding.
#[derive(Clone, Debug)]
pub struct NceResult {
    pub loss: f64,
    pub grad_q: Vec<f64>,
    /// Similarity between the query and its paired key, for logging.
    pub positive_similarity: f64,
}

/// Both directional terms of the cross-modal objective, scaled by a
/// per-sample weight.
#[derive(Clone, Debug)]
pub struct AvidResult {
    pub loss: f64,
    pub loss_v2a: f64,
    pub loss_a2v: f64,
    pub grad_q_visual: Vec<f64>,
    pub grad_q_audio: Vec<f64>,
}

fn check_lengths(q: &Embedding, k_pos: &Embedding, negatives: &[&Embedding]) -> Result<()> {
    if k_pos.dim() != q.dim() {
        return Err(CoreError::LengthMismatch {
            expected: q.dim(),
            got: k_pos.dim(),
        });
    }
    for n in negatives {
        if n.dim() != q.dim() {
            return Err(CoreError::LengthMismatch {
                expected: q.dim(),
                got: n.dim(),
            });
        }
    }
    Ok(())
}

/// `−log softmax` of the positive similarity against the contrastive set,
/// with max-subtracted log-sum-exp, returning the query gradient alongside.
pub fn nce_loss(
    q: &Embedding,
    k_pos: &Embedding,
    negatives: &[&Embedding],
    temperature: f64,
) -> Result<NceResult> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(CoreError::NonPositiveTemperature { got: temperature });
    }
    check_lengths(q, k_pos, negatives)?;

    let qs = q.as_slice();
    let mut sims = Vec::with_capacity(negatives.len() + 1);
    sims.push(dot(qs, k_pos.as_slice()));
    for n in negatives {
        sims.push(dot(qs, n.as_slice()));
    }
    let max = sims.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let mut exps: Vec<f64> = sims
        .iter()
        .map(|&s| fmath::exp((s - max) / temperature))
        .collect();
    let total: f64 = exps.iter().sum();
    let loss = fmath::ln(total) - (sims[0] - max) / temperature;

    // σ_j − [j = positive], scaled by 1/τ, contracted against the keys.
    for e in &mut exps {
        *e /= total;
    }
    let mut grad = vec![0.0; q.dim()];
    let coeff_pos = (exps[0] - 1.0) / temperature;
    for (g, k) in grad.iter_mut().zip(k_pos.as_slice()) {
        *g += coeff_pos * k;
    }
    for (sigma, n) in exps[1..].iter().zip(negatives.iter()) {
        let coeff = sigma / temperature;
        for (g, k) in grad.iter_mut().zip(n.as_slice()) {
            *g += coeff * k;
        }
    }
    Ok(NceResult {
        loss,
        grad_q: grad,
        positive_similarity: sims[0],
    })
}

/// Gradient of `nce_loss` with respect to the query embedding.
pub fn nce_grad_q(
    q: &Embedding,
    k_pos: &Embedding,
    negatives: &[&Embedding],
    temperature: f64,
) -> Result<Vec<f64>> {
    Ok(nce_loss(q, k_pos, negatives, temperature)?.grad_q)
}

/// Weighted sum of the visual-to-audio and audio-to-visual terms.
///
/// The visual query is contrasted against its audio key and audio negatives;
/// the audio query against its visual key and visual negatives. Gradients
/// scale linearly with `weight`.
#[allow(clippy::too_many_arguments)]
pub fn avid_loss(
    q_visual: &Embedding,
    q_audio: &Embedding,
    k_visual: &Embedding,
    k_audio: &Embedding,
    negatives_audio: &[&Embedding],
    negatives_visual: &[&Embedding],
    temperature: f64,
    weight: f64,
) -> Result<AvidResult> {
    let v2a = nce_loss(q_visual, k_audio, negatives_audio, temperature)?;
    let a2v = nce_loss(q_audio, k_visual, negatives_visual, temperature)?;
    let scale = |g: Vec<f64>| -> Vec<f64> { g.into_iter().map(|x| weight * x).collect() };
    Ok(AvidResult {
        loss: weight * (v2a.loss + a2v.loss),
        loss_v2a: weight * v2a.loss,
        loss_a2v: weight * a2v.loss,
        grad_q_visual: scale(v2a.grad_q),
        grad_q_audio: scale(a2v.grad_q),
    })
}
