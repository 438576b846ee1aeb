//! Semantic-sensitive libraries: per-bucket embedding stores with queue or
//! momentum updates, soft assignment over bucket anchors, label-guided
//! contrastive-set mining, the uniform-sampling baseline, and the per-sample
//! ambiguity tracker that drives hard-sample weights.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::fmath;
use crate::model::Embedding;
use crate::numeric::dot;
use crate::rng;

/// How stored embeddings are refreshed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LibraryMode {
    /// Append new keys; evict the oldest entry of the bucket when full.
    Queue,
    /// Per-sample slots blended by an exponential moving average.
    Momentum { momentum: f64 },
}

/// One stored representation with its provenance.
#[derive(Clone, Debug)]
pub struct LibraryEntry {
    pub embedding: Embedding,
    /// Index of the originating sample; `None` for the random pre-fill.
    pub source: Option<usize>,
    /// Monotone insertion counter; defines "oldest".
    pub counter: u64,
}

/// A mined negative together with the bucket it came from.
#[derive(Clone, Copy, Debug)]
pub struct MinedNegative<'a> {
    pub bucket: usize,
    pub entry: &'a LibraryEntry,
}

/// Fixed-capacity buckets of embeddings, one bucket per pseudo-semantics.
#[derive(Clone, Debug)]
pub struct SemanticLibrary {
    buckets: Vec<VecDeque<LibraryEntry>>,
    capacity: usize,
    mode: LibraryMode,
    next_counter: u64,
}

impl SemanticLibrary {
    pub fn new(buckets: usize, capacity: usize, mode: LibraryMode) -> Self {
        SemanticLibrary {
            buckets: (0..buckets).map(|_| VecDeque::new()).collect(),
            capacity,
            mode,
            next_counter: 0,
        }
    }

    /// Fills every bucket to capacity with random unit vectors so soft
    /// assignment and mining are defined from the first step.
    pub fn prefill<R: Rng + ?Sized>(&mut self, dim: usize, rand: &mut R) {
        for b in 0..self.buckets.len() {
            while self.buckets[b].len() < self.capacity {
                let embedding = Embedding::from_unit(rng::random_unit_vector(rand, dim));
                let counter = self.next_counter;
                self.next_counter += 1;
                self.buckets[b].push_back(LibraryEntry {
                    embedding,
                    source: None,
                    counter,
                });
            }
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> LibraryMode {
        self.mode
    }

    pub fn bucket(&self, b: usize) -> impl Iterator<Item = &LibraryEntry> {
        self.buckets[b].iter()
    }

    pub fn bucket_len(&self, b: usize) -> usize {
        self.buckets[b].len()
    }

    pub fn total_stored(&self) -> usize {
        self.buckets.iter().map(|b| b.len()).sum()
    }

    pub fn occupancy(&self) -> Vec<usize> {
        self.buckets.iter().map(|b| b.len()).collect()
    }

    /// Probability that the query belongs to each bucket, from exponentiated
    /// query-anchor similarities pooled per bucket.
    pub fn soft_assignment(&self, q: &Embedding, temperature: f64) -> Result<Vec<f64>> {
        if temperature <= 0.0 || !temperature.is_finite() {
            return Err(CoreError::NonPositiveTemperature { got: temperature });
        }
        for (b, bucket) in self.buckets.iter().enumerate() {
            if bucket.is_empty() {
                return Err(CoreError::EmptyBucket { bucket: b });
            }
        }
        // Shared max across the whole library keeps relative magnitudes and
        // bounds the exponents.
        let mut sims: Vec<Vec<f64>> = Vec::with_capacity(self.buckets.len());
        let mut max = f64::NEG_INFINITY;
        for bucket in &self.buckets {
            let s: Vec<f64> = bucket
                .iter()
                .map(|e| dot(q.as_slice(), e.embedding.as_slice()))
                .collect();
            for v in &s {
                max = max.max(*v);
            }
            sims.push(s);
        }
        let mut out = Vec::with_capacity(self.buckets.len());
        let mut total = 0.0;
        for s in &sims {
            let pooled: f64 = s
                .iter()
                .map(|&v| fmath::exp((v - max) / temperature))
                .sum();
            total += pooled;
            out.push(pooled);
        }
        for v in &mut out {
            *v /= total;
        }
        Ok(out)
    }

    /// Every stored embedding from every bucket other than `label`; exactly
    /// the full contrastive set when all buckets are full.
    pub fn contrastive_set(&self, label: usize) -> Result<Vec<MinedNegative<'_>>> {
        if label >= self.buckets.len() {
            return Err(CoreError::InvalidLabel {
                label,
                buckets: self.buckets.len(),
            });
        }
        let mut out = Vec::new();
        for (b, bucket) in self.buckets.iter().enumerate() {
            if b == label {
                continue;
            }
            for entry in bucket {
                out.push(MinedNegative { bucket: b, entry });
            }
        }
        if out.is_empty() {
            return Err(CoreError::EmptyNegativePool);
        }
        Ok(out)
    }

    /// Baseline sampler: `k` entries uniformly without replacement across
    /// all buckets, own bucket included.
    pub fn random_negatives<R: Rng + ?Sized>(
        &self,
        k: usize,
        rand: &mut R,
    ) -> Result<Vec<MinedNegative<'_>>> {
        let total = self.total_stored();
        if total < k {
            return Err(CoreError::InsufficientPool {
                available: total,
                requested: k,
            });
        }
        // Flat index space in bucket-major order, partially shuffled.
        let mut flat: Vec<(usize, usize)> = Vec::with_capacity(total);
        for (b, bucket) in self.buckets.iter().enumerate() {
            for i in 0..bucket.len() {
                flat.push((b, i));
            }
        }
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let j = i + rand.gen_range(0..total - i);
            flat.swap(i, j);
            let (b, slot) = flat[i];
            out.push(MinedNegative {
                bucket: b,
                entry: &self.buckets[b][slot],
            });
        }
        Ok(out)
    }

    /// Stores a key under its pseudo-label.
    ///
    /// Queue mode appends and evicts the bucket's oldest entry past
    /// capacity. Momentum mode blends into the sample's existing slot
    /// (refreshing its recency) wherever it lives, or inserts when absent.
    pub fn update(&mut self, label: usize, key: Embedding, source: usize) -> Result<()> {
        if label >= self.buckets.len() {
            return Err(CoreError::InvalidLabel {
                label,
                buckets: self.buckets.len(),
            });
        }
        let counter = self.next_counter;
        self.next_counter += 1;
        match self.mode {
            LibraryMode::Queue => {
                self.buckets[label].push_back(LibraryEntry {
                    embedding: key,
                    source: Some(source),
                    counter,
                });
                while self.buckets[label].len() > self.capacity {
                    self.buckets[label].pop_front();
                }
            }
            LibraryMode::Momentum { momentum } => {
                for bucket in &mut self.buckets {
                    for entry in bucket.iter_mut() {
                        if entry.source == Some(source) {
                            let blended: Vec<f64> = entry
                                .embedding
                                .as_slice()
                                .iter()
                                .zip(key.as_slice())
                                .map(|(old, new)| momentum * old + (1.0 - momentum) * new)
                                .collect();
                            entry.embedding = Embedding::from_unnormalized(blended)?;
                            entry.counter = counter;
                            return Ok(());
                        }
                    }
                }
                self.buckets[label].push_back(LibraryEntry {
                    embedding: key,
                    source: Some(source),
                    counter,
                });
                while self.buckets[label].len() > self.capacity {
                    let oldest = self.buckets[label]
                        .iter()
                        .enumerate()
                        .min_by_key(|(_, e)| e.counter)
                        .map(|(i, _)| i)
                        .unwrap();
                    self.buckets[label].remove(oldest);
                }
            }
        }
        Ok(())
    }
}

/// Per-sample pseudo-label, epoch-swap counter, and bookkeeping for the
/// once-per-epoch update contract.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoState {
    labels: Vec<Option<usize>>,
    swaps: Vec<u64>,
    last_epoch: Vec<Option<usize>>,
}

impl PseudoState {
    pub fn new(samples: usize) -> Self {
        PseudoState {
            labels: vec![None; samples],
            swaps: vec![0; samples],
            last_epoch: vec![None; samples],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, sample: usize) -> Option<usize> {
        self.labels[sample]
    }

    pub fn ambiguity(&self, sample: usize) -> u64 {
        self.swaps[sample]
    }

    pub fn labels(&self) -> impl Iterator<Item = Option<usize>> + '_ {
        self.labels.iter().copied()
    }

    /// Records the epoch's label for a sample, bumping the swap counter when
    /// the label changed. The very first assignment defines the label
    /// without counting as a swap.
    pub fn record(&mut self, sample: usize, label: usize, epoch: usize) -> Result<()> {
        if self.last_epoch[sample] == Some(epoch) {
            return Err(CoreError::DuplicateEpochUpdate { sample, epoch });
        }
        if let Some(previous) = self.labels[sample] {
            if previous != label {
                self.swaps[sample] += 1;
            }
        }
        self.labels[sample] = Some(label);
        self.last_epoch[sample] = Some(epoch);
        Ok(())
    }

    /// Restores state loaded from a checkpoint.
    pub fn from_parts(
        labels: Vec<Option<usize>>,
        swaps: Vec<u64>,
        last_epoch: Vec<Option<usize>>,
    ) -> Result<Self> {
        if labels.len() != swaps.len() || labels.len() != last_epoch.len() {
            return Err(CoreError::LengthMismatch {
                expected: labels.len(),
                got: swaps.len().min(last_epoch.len()),
            });
        }
        Ok(PseudoState {
            labels,
            swaps,
            last_epoch,
        })
    }

    pub fn swaps(&self) -> &[u64] {
        &self.swaps
    }

    pub fn last_epochs(&self) -> &[Option<usize>] {
        &self.last_epoch
    }
}

/// Raw ambiguity weight before batch renormalization.
pub fn raw_mining_weight(swaps: u64, epoch: usize, alpha: f64) -> f64 {
    1.0 + alpha * swaps as f64 / (epoch + 1) as f64
}

/// Per-sample weights for one batch: all ones when mining is disabled,
/// otherwise ambiguity-scaled and renormalized so the batch mean is one.
pub fn batch_mining_weights(
    state: &PseudoState,
    batch: &[usize],
    epoch: usize,
    alpha: f64,
    enabled: bool,
) -> Vec<f64> {
    if !enabled || batch.is_empty() {
        return vec![1.0; batch.len()];
    }
    let mut weights: Vec<f64> = batch
        .iter()
        .map(|&i| raw_mining_weight(state.ambiguity(i), epoch, alpha))
        .collect();
    let mean: f64 = weights.iter().sum::<f64>() / weights.len() as f64;
    for w in &mut weights {
        *w /= mean;
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn unit(values: Vec<f64>) -> Embedding {
        Embedding::from_unnormalized(values).unwrap()
    }

    fn basis(dim: usize, axis: usize) -> Embedding {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Embedding::from_unit(v)
    }

    #[test]
    fn soft_assignment_is_uniform_over_identical_anchors() {
        let mut lib = SemanticLibrary::new(4, 1, LibraryMode::Queue);
        for b in 0..4 {
            lib.update(b, basis(3, 0), b).unwrap();
        }
        let g = lib.soft_assignment(&basis(3, 1), 0.07).unwrap();
        for x in &g {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_assignment_two_buckets_hand_computed() {
        let mut lib = SemanticLibrary::new(2, 1, LibraryMode::Queue);
        lib.update(0, basis(2, 0), 0).unwrap();
        lib.update(1, basis(2, 1), 1).unwrap();
        let g = lib.soft_assignment(&basis(2, 0), 1.0).unwrap();
        let e = libm::exp(1.0);
        assert!((g[0] - e / (e + 1.0)).abs() < 1e-9);
        assert!((g[1] - 1.0 / (e + 1.0)).abs() < 1e-9);
        assert!((g[0] - 0.7311).abs() < 1e-4);
        assert!((g[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn soft_assignment_single_bucket_is_certain() {
        let mut lib = SemanticLibrary::new(1, 2, LibraryMode::Queue);
        lib.update(0, basis(2, 0), 0).unwrap();
        let g = lib.soft_assignment(&basis(2, 1), 0.07).unwrap();
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn soft_assignment_requires_populated_buckets() {
        let lib = SemanticLibrary::new(3, 2, LibraryMode::Queue);
        assert_eq!(
            lib.soft_assignment(&basis(2, 0), 0.07),
            Err(CoreError::EmptyBucket { bucket: 0 })
        );
    }

    #[test]
    fn soft_assignment_sums_to_one_and_ignores_bucket_order() {
        let mut rng = crate::rng::stream_rng(71, "soft");
        let mut lib = SemanticLibrary::new(3, 4, LibraryMode::Queue);
        lib.prefill(8, &mut rng);
        let q = unit(crate::rng::normal_vector(&mut rng, 8));
        let g = lib.soft_assignment(&q, 0.07).unwrap();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        // Permute entries within each bucket; the pooled sums are unchanged.
        let mut permuted = lib.clone();
        for bucket in &mut permuted.buckets {
            bucket.rotate_left(2);
        }
        let h = permuted.soft_assignment(&q, 0.07).unwrap();
        for (a, b) in g.iter().zip(h.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn contrastive_set_excludes_the_own_bucket_exactly() {
        let mut rng = crate::rng::stream_rng(72, "mine");
        let mut lib = SemanticLibrary::new(3, 4, LibraryMode::Queue);
        lib.prefill(5, &mut rng);
        let negatives = lib.contrastive_set(1).unwrap();
        assert_eq!(negatives.len(), 8);
        assert!(negatives.iter().all(|n| n.bucket != 1));
    }

    #[test]
    fn contrastive_set_errors_when_every_other_bucket_is_empty() {
        let mut lib = SemanticLibrary::new(2, 4, LibraryMode::Queue);
        lib.update(0, basis(3, 0), 0).unwrap();
        assert_eq!(
            lib.contrastive_set(0).unwrap_err(),
            CoreError::EmptyNegativePool
        );
        assert!(lib.contrastive_set(1).is_ok());
    }

    #[test]
    fn contrastive_set_rejects_out_of_range_labels() {
        let lib = SemanticLibrary::new(2, 1, LibraryMode::Queue);
        assert!(matches!(
            lib.contrastive_set(2),
            Err(CoreError::InvalidLabel { .. })
        ));
    }

    #[test]
    fn contrastive_set_matches_brute_force_membership() {
        let mut rng = crate::rng::stream_rng(73, "mine2");
        for trial in 0..200 {
            let buckets = 2 + (trial % 4);
            let mut lib = SemanticLibrary::new(buckets, 5, LibraryMode::Queue);
            // Random partial fill.
            let mut source = 0;
            for b in 0..buckets {
                let n = rng.gen_range(0..=5);
                for _ in 0..n {
                    lib.update(b, unit(crate::rng::normal_vector(&mut rng, 4)), source)
                        .unwrap();
                    source += 1;
                }
            }
            let label = rng.gen_range(0..buckets);
            let expected: Vec<u64> = (0..buckets)
                .filter(|&b| b != label)
                .flat_map(|b| lib.bucket(b).map(|e| e.counter))
                .collect();
            match lib.contrastive_set(label) {
                Ok(mined) => {
                    let mut got: Vec<u64> = mined.iter().map(|n| n.entry.counter).collect();
                    let mut want = expected.clone();
                    got.sort_unstable();
                    want.sort_unstable();
                    assert_eq!(got, want);
                }
                Err(CoreError::EmptyNegativePool) => assert!(expected.is_empty()),
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
    }

    #[test]
    fn random_negatives_returns_whole_pool_when_k_equals_total() {
        let mut rng = crate::rng::stream_rng(74, "rand");
        let mut lib = SemanticLibrary::new(3, 2, LibraryMode::Queue);
        lib.prefill(4, &mut rng);
        let drawn = lib.random_negatives(6, &mut rng).unwrap();
        let mut counters: Vec<u64> = drawn.iter().map(|n| n.entry.counter).collect();
        counters.sort_unstable();
        assert_eq!(counters, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn random_negatives_is_deterministic_under_a_fixed_seed() {
        let mut fill = crate::rng::stream_rng(75, "rand2");
        let mut lib = SemanticLibrary::new(4, 8, LibraryMode::Queue);
        lib.prefill(6, &mut fill);
        let draw = |seed: u64| -> Vec<u64> {
            let mut rng = crate::rng::stream_rng(seed, "draw");
            lib.random_negatives(10, &mut rng)
                .unwrap()
                .iter()
                .map(|n| n.entry.counter)
                .collect()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn random_negatives_rejects_oversized_requests() {
        let mut rng = crate::rng::stream_rng(76, "rand3");
        let mut lib = SemanticLibrary::new(2, 2, LibraryMode::Queue);
        lib.prefill(3, &mut rng);
        assert_eq!(
            lib.random_negatives(5, &mut rng).unwrap_err(),
            CoreError::InsufficientPool {
                available: 4,
                requested: 5
            }
        );
    }

    #[test]
    fn random_negatives_draw_frequencies_are_near_uniform() {
        let mut fill = crate::rng::stream_rng(77, "rand4");
        let buckets = 5;
        let capacity = 4;
        let mut lib = SemanticLibrary::new(buckets, capacity, LibraryMode::Queue);
        lib.prefill(4, &mut fill);
        let mut rng = crate::rng::stream_rng(78, "rand5");
        let draws = 10_000;
        let per_draw = 2;
        let mut counts = vec![0u64; buckets];
        for _ in 0..draws {
            for n in lib.random_negatives(per_draw, &mut rng).unwrap() {
                counts[n.bucket] += 1;
            }
        }
        let total = (draws * per_draw) as f64;
        let p = 1.0 / buckets as f64;
        let sigma = fmath::sqrt(p * (1.0 - p) / total);
        for c in &counts {
            let freq = *c as f64 / total;
            assert!(
                fmath::abs(freq - p) < 3.0 * sigma + 1e-9,
                "freq {freq} vs {p} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn queue_update_is_fifo() {
        let mut lib = SemanticLibrary::new(1, 2, LibraryMode::Queue);
        lib.update(0, basis(2, 0), 10).unwrap();
        lib.update(0, basis(2, 1), 11).unwrap();
        lib.update(0, unit(vec![1.0, 1.0]), 12).unwrap();
        let sources: Vec<_> = lib.bucket(0).map(|e| e.source).collect();
        assert_eq!(sources, vec![Some(11), Some(12)]);
    }

    #[test]
    fn momentum_update_at_fixed_point_keeps_the_entry() {
        let mut lib = SemanticLibrary::new(1, 4, LibraryMode::Momentum { momentum: 0.9 });
        lib.update(0, basis(2, 0), 5).unwrap();
        lib.update(0, basis(2, 0), 5).unwrap();
        let entry = lib.bucket(0).next().unwrap();
        assert!((entry.embedding.as_slice()[0] - 1.0).abs() < 1e-12);
        assert_eq!(lib.bucket_len(0), 1);
    }

    #[test]
    fn momentum_update_blends_and_renormalizes() {
        let mut lib = SemanticLibrary::new(1, 4, LibraryMode::Momentum { momentum: 0.9 });
        lib.update(0, basis(2, 0), 7).unwrap();
        lib.update(0, basis(2, 1), 7).unwrap();
        let entry = lib.bucket(0).next().unwrap();
        // normalize([0.9, 0.1])
        assert!((entry.embedding.as_slice()[0] - 0.993_883_73).abs() < 1e-8);
        assert!((entry.embedding.as_slice()[1] - 0.110_431_53).abs() < 1e-8);
    }

    #[test]
    fn momentum_insert_evicts_oldest_when_full() {
        let mut lib = SemanticLibrary::new(1, 2, LibraryMode::Momentum { momentum: 0.5 });
        lib.update(0, basis(2, 0), 1).unwrap();
        lib.update(0, basis(2, 1), 2).unwrap();
        lib.update(0, unit(vec![1.0, 1.0]), 3).unwrap();
        let sources: Vec<_> = lib.bucket(0).map(|e| e.source).collect();
        assert_eq!(sources, vec![Some(2), Some(3)]);
    }

    #[test]
    fn update_rejects_invalid_labels() {
        let mut lib = SemanticLibrary::new(2, 2, LibraryMode::Queue);
        assert!(matches!(
            lib.update(2, basis(2, 0), 0),
            Err(CoreError::InvalidLabel { .. })
        ));
    }

    #[test]
    fn ambiguity_counts_label_swaps() {
        let mut state = PseudoState::new(1);
        for (epoch, label) in [2usize, 2, 2].iter().enumerate() {
            state.record(0, *label, epoch).unwrap();
        }
        assert_eq!(state.ambiguity(0), 0);

        let mut state = PseudoState::new(1);
        for (epoch, label) in [0usize, 1, 0].iter().enumerate() {
            state.record(0, *label, epoch).unwrap();
        }
        assert_eq!(state.ambiguity(0), 2);

        let mut state = PseudoState::new(1);
        for (epoch, label) in [0usize, 0, 1, 1, 2].iter().enumerate() {
            state.record(0, *label, epoch).unwrap();
        }
        assert_eq!(state.ambiguity(0), 2);
    }

    #[test]
    fn duplicate_epoch_updates_are_rejected() {
        let mut state = PseudoState::new(2);
        state.record(0, 1, 0).unwrap();
        assert_eq!(
            state.record(0, 2, 0),
            Err(CoreError::DuplicateEpochUpdate {
                sample: 0,
                epoch: 0
            })
        );
        // Other samples and later epochs are unaffected.
        state.record(1, 1, 0).unwrap();
        state.record(0, 2, 1).unwrap();
    }

    #[test]
    fn weights_are_one_when_disabled_or_unambiguous() {
        let mut state = PseudoState::new(3);
        for i in 0..3 {
            state.record(i, 0, 0).unwrap();
        }
        let w = batch_mining_weights(&state, &[0, 1, 2], 4, 1.0, true);
        assert_eq!(w, vec![1.0, 1.0, 1.0]);
        let w = batch_mining_weights(&state, &[0, 1, 2], 4, 1.0, false);
        assert_eq!(w, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn weights_follow_the_documented_arithmetic() {
        let mut state = PseudoState::new(2);
        // Sample 1 swaps 4 times over 5 assignments.
        state.record(0, 0, 0).unwrap();
        state.record(1, 0, 0).unwrap();
        for epoch in 1..=4 {
            state.record(0, 0, epoch).unwrap();
            state.record(1, epoch % 2 + 1, epoch).unwrap();
        }
        assert_eq!(state.ambiguity(0), 0);
        assert_eq!(state.ambiguity(1), 4);
        let w = batch_mining_weights(&state, &[0, 1], 7, 1.0, true);
        // Raw weights [1, 1.5] → mean 1.25 → [0.8, 1.2].
        assert!((w[0] - 0.8).abs() < 1e-12);
        assert!((w[1] - 1.2).abs() < 1e-12);
        let mean = (w[0] + w[1]) / 2.0;
        assert!((mean - 1.0).abs() < 1e-9);
    }
}
