//! Representation-quality measurement: a linear softmax probe on frozen
//! features, clustering purity and normalized mutual information, an
//! optimally-matched label agreement score, and contrastive-set diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::fmath;
use crate::numeric::{
    adam_step, dot, softmax_temp, AdamParams, AdamState, Gradients, Matrix, Mlp,
};
use crate::semlib::SemanticLibrary;

/// Probe outcome on a held-out split.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub split_ratio: f64,
    pub steps: usize,
    pub lr: f64,
}

/// Trains one affine+softmax layer on frozen features and reports held-out
/// accuracy. The split is stratified per class; classes that would lose all
/// training samples abort with `DegenerateSplit`.
pub fn linear_probe<R: Rng + ?Sized>(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    split_ratio: f64,
    lr: f64,
    steps: usize,
    rand: &mut R,
) -> Result<ProbeReport> {
    if features.len() != labels.len() {
        return Err(CoreError::LengthMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(CoreError::EmptyCollection);
    }
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(CoreError::InvalidConfig(
            "split_ratio must lie strictly between 0 and 1".into(),
        ));
    }
    let dim = features[0].len();

    // Stratified shuffle-split.
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(CoreError::InvalidLabel {
                label,
                buckets: n_classes,
            });
        }
        by_class[label].push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        let take = (members.len() as f64 * split_ratio) as usize;
        if take == 0 {
            return Err(CoreError::DegenerateSplit { class });
        }
        // Fisher-Yates on the class members.
        for i in (1..members.len()).rev() {
            let j = rand.gen_range(0..=i);
            members.swap(i, j);
        }
        train_idx.extend_from_slice(&members[..take]);
        test_idx.extend_from_slice(&members[take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    // Single affine layer, zero-initialized; full-batch adaptive updates.
    let mut net = Mlp::from_layers(vec![crate::numeric::Layer {
        weight: Matrix::zeros(n_classes, dim),
        bias: vec![0.0; n_classes],
        activation: crate::numeric::Activation::Identity,
    }])?;
    let mut state = AdamState::new(&net);
    let hp = AdamParams {
        lr,
        weight_decay: 0.0,
        ..AdamParams::default()
    };
    let scale = 1.0 / train_idx.len() as f64;
    for _ in 0..steps {
        let mut grads = Gradients::zeros_like(&net);
        for &i in &train_idx {
            let p = probe_probabilities(&net, &features[i])?;
            let mut dlogits = p;
            dlogits[labels[i]] -= 1.0;
            grads.weights[0].add_outer(&dlogits, &features[i], scale);
            for (b, d) in grads.biases[0].iter_mut().zip(dlogits.iter()) {
                *b += scale * d;
            }
        }
        adam_step(&mut net, &grads, &mut state, &hp)?;
    }

    let accuracy_over = |indices: &[usize]| -> Result<(f64, Vec<usize>, Vec<usize>)> {
        let mut hits = vec![0usize; n_classes];
        let mut totals = vec![0usize; n_classes];
        let mut correct = 0usize;
        for &i in indices {
            let p = probe_probabilities(&net, &features[i])?;
            let predicted = argmax(&p);
            totals[labels[i]] += 1;
            if predicted == labels[i] {
                correct += 1;
                hits[labels[i]] += 1;
            }
        }
        Ok((correct as f64 / indices.len() as f64, hits, totals))
    };
    let (train_accuracy, _, _) = accuracy_over(&train_idx)?;
    let (test_accuracy, hits, totals) = accuracy_over(&test_idx)?;
    let per_class_accuracy = hits
        .iter()
        .zip(totals.iter())
        .map(|(&h, &t)| if t == 0 { 0.0 } else { h as f64 / t as f64 })
        .collect();
    Ok(ProbeReport {
        train_accuracy,
        test_accuracy,
        per_class_accuracy,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        split_ratio,
        steps,
        lr,
    })
}

fn probe_probabilities(net: &Mlp, x: &[f64]) -> Result<Vec<f64>> {
    let logits = net.infer(x)?;
    softmax_temp(&logits, 1.0)
}

/// Index of the largest entry; ties break toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn contingency(pseudo: &[usize], truth: &[usize]) -> Result<(Vec<Vec<usize>>, usize, usize)> {
    if pseudo.len() != truth.len() {
        return Err(CoreError::LengthMismatch {
            expected: pseudo.len(),
            got: truth.len(),
        });
    }
    if pseudo.is_empty() {
        return Err(CoreError::EmptyCollection);
    }
    let clusters = pseudo.iter().max().unwrap() + 1;
    let classes = truth.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; classes]; clusters];
    for (&k, &j) in pseudo.iter().zip(truth.iter()) {
        table[k][j] += 1;
    }
    Ok((table, clusters, classes))
}

/// Purity and NMI (natural-log entropies, geometric-mean normalization).
pub fn cluster_metrics(pseudo: &[usize], truth: &[usize]) -> Result<(f64, f64)> {
    let (table, _, _) = contingency(pseudo, truth)?;
    let n = pseudo.len() as f64;

    let purity = table
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum::<usize>() as f64
        / n;

    let cluster_totals: Vec<usize> = table.iter().map(|row| row.iter().sum()).collect();
    let mut class_totals = vec![0usize; table[0].len()];
    for row in &table {
        for (c, v) in class_totals.iter_mut().zip(row.iter()) {
            *c += v;
        }
    }
    let mut mutual = 0.0;
    for (k, row) in table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let c = count as f64;
            mutual += (c / n)
                * fmath::ln(c * n / (cluster_totals[k] as f64 * class_totals[j] as f64));
        }
    }
    let entropy = |totals: &[usize]| -> f64 {
        totals
            .iter()
            .filter(|&&t| t > 0)
            .map(|&t| {
                let p = t as f64 / n;
                -p * fmath::ln(p)
            })
            .sum()
    };
    let h_pseudo = entropy(&cluster_totals);
    let h_truth = entropy(&class_totals);
    let nmi = if h_pseudo == 0.0 && h_truth == 0.0 {
        1.0
    } else if h_pseudo == 0.0 || h_truth == 0.0 {
        0.0
    } else {
        (mutual / fmath::sqrt(h_pseudo * h_truth)).clamp(0.0, 1.0)
    };
    Ok((purity, nmi))
}

/// Accuracy under the best one-to-one matching of pseudo-labels to classes.
///
/// Exact (subset-DP assignment) when the class count is at most 20; greedy
/// above that, which is only relevant for oversized configurations.
pub fn matched_agreement(pseudo: &[usize], truth: &[usize]) -> Result<f64> {
    let (table, clusters, classes) = contingency(pseudo, truth)?;
    let n = pseudo.len() as f64;
    let matched = if classes <= 20 {
        assignment_dp(&table, clusters, classes)
    } else {
        assignment_greedy(&table, clusters, classes)
    };
    Ok(matched as f64 / n)
}

fn assignment_dp(table: &[Vec<usize>], clusters: usize, classes: usize) -> usize {
    // dp[mask] = best matched count over processed clusters with `mask`
    // classes already taken; clusters may stay unmatched.
    let size = 1usize << classes;
    let mut dp = vec![0usize; size];
    for row in table.iter().take(clusters) {
        let mut next = dp.clone();
        for mask in 0..size {
            let base = dp[mask];
            for class in 0..classes {
                let bit = 1usize << class;
                if mask & bit == 0 {
                    let candidate = base + row[class];
                    if candidate > next[mask | bit] {
                        next[mask | bit] = candidate;
                    }
                }
            }
        }
        dp = next;
    }
    dp.into_iter().max().unwrap_or(0)
}

fn assignment_greedy(table: &[Vec<usize>], clusters: usize, classes: usize) -> usize {
    let mut cells: Vec<(usize, usize, usize)> = Vec::with_capacity(clusters * classes);
    for (k, row) in table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            cells.push((count, k, j));
        }
    }
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_cluster = vec![false; clusters];
    let mut used_class = vec![false; classes];
    let mut total = 0;
    for (count, k, j) in cells {
        if !used_cluster[k] && !used_class[j] {
            used_cluster[k] = true;
            used_class[j] = true;
            total += count;
        }
    }
    total
}

/// Library-structure diagnostics over both modality libraries.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MiningDiagnostics {
    /// Rate of same-class negatives mined by bucket exclusion, over entries
    /// with a real source sample.
    pub faulty_negative_rate: f64,
    pub occupancy_visual: Vec<usize>,
    pub occupancy_audio: Vec<usize>,
    pub mean_within_bucket_cosine: f64,
    pub mean_cross_bucket_cosine: f64,
}

/// Measures bucket compactness and the faulty-negative rate the current
/// libraries would produce for each sample's pseudo-label.
pub fn mining_diagnostics(
    visual_library: &SemanticLibrary,
    audio_library: &SemanticLibrary,
    pseudo_labels: &[Option<usize>],
    classes: &[usize],
) -> MiningDiagnostics {
    let mut faulty = 0u64;
    let mut real = 0u64;
    for library in [visual_library, audio_library] {
        for (i, label) in pseudo_labels.iter().enumerate() {
            let Some(label) = *label else { continue };
            let Ok(negatives) = library.contrastive_set(label) else {
                continue;
            };
            for negative in negatives {
                if let Some(source) = negative.entry.source {
                    real += 1;
                    if classes[source] == classes[i] {
                        faulty += 1;
                    }
                }
            }
        }
    }
    let (mut within_sum, mut within_count) = (0.0, 0u64);
    let (mut cross_sum, mut cross_count) = (0.0, 0u64);
    for library in [visual_library, audio_library] {
        let entries: Vec<(usize, &[f64])> = (0..library.bucket_count())
            .flat_map(|b| library.bucket(b).map(move |e| (b, e.embedding.as_slice())))
            .collect();
        for i in 0..entries.len() {
            for j in i + 1..entries.len() {
                let sim = dot(entries[i].1, entries[j].1);
                if entries[i].0 == entries[j].0 {
                    within_sum += sim;
                    within_count += 1;
                } else {
                    cross_sum += sim;
                    cross_count += 1;
                }
            }
        }
    }
    MiningDiagnostics {
        faulty_negative_rate: if real == 0 {
            0.0
        } else {
            faulty as f64 / real as f64
        },
        occupancy_visual: visual_library.occupancy(),
        occupancy_audio: audio_library.occupancy(),
        mean_within_bucket_cosine: if within_count == 0 {
            0.0
        } else {
            within_sum / within_count as f64
        },
        mean_cross_bucket_cosine: if cross_count == 0 {
            0.0
        } else {
            cross_sum / cross_count as f64
        },
    }
}
