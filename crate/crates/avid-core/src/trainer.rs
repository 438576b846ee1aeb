//! The full training procedure: batched encoder passes, negative mining,
//! weighted bidirectional loss, adaptive-moment updates, momentum tracking,
//! library and classifier updates, epoch-boundary pseudo-label refresh with
//! ambiguity tracking, and warm-up gating of hard-sample weights.

use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};
use crate::eval::{argmax, cluster_metrics, linear_probe, matched_agreement};
use crate::loss::avid_loss;
use crate::model::{Classifier, Embedding, ModalityEncoder, QueryCache};
use crate::numeric::{adam_step, AdamParams, AdamState, Gradients};
use crate::rng::stream_rng;
use crate::semlib::{batch_mining_weights, LibraryMode, MinedNegative, PseudoState, SemanticLibrary};
use crate::synthdata::{Dataset, GroundTruth, SyntheticConfig, TrainView};

/// How negatives are selected for each query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MiningMode {
    /// Uniform draws across all buckets, own bucket included.
    Random,
    /// Union of all buckets other than the sample's pseudo-label bucket.
    Acsm,
}

/// Per-sample loss weighting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HardMining {
    Off,
    /// Weight by accumulated pseudo-label swaps after warm-up.
    Ambiguity,
}

/// Library refresh discipline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LibraryKind {
    Queue,
    Momentum,
}

/// Whether library insertion happens before or after the classifier step
/// within an iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpdateOrder {
    LibraryFirst,
    ClassifierFirst,
}

macro_rules! impl_enum_strings {
    ($ty:ty { $($variant:path => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self {
                    $($variant => write!(f, $text)),+
                }
            }
        }
        impl FromStr for $ty {
            type Err = CoreError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(CoreError::InvalidConfig(alloc::format!(
                        "unknown value '{other}' for {}",
                        stringify!($ty)
                    ))),
                }
            }
        }
    };
}

impl_enum_strings!(MiningMode {
    MiningMode::Random => "random",
    MiningMode::Acsm => "acsm",
});
impl_enum_strings!(HardMining {
    HardMining::Off => "off",
    HardMining::Ambiguity => "ambiguity",
});
impl_enum_strings!(LibraryKind {
    LibraryKind::Queue => "queue",
    LibraryKind::Momentum => "momentum",
});
impl_enum_strings!(UpdateOrder {
    UpdateOrder::LibraryFirst => "library_first",
    UpdateOrder::ClassifierFirst => "classifier_first",
});

/// Every knob of a run. `contrastive_size` must divide evenly into
/// `libraries - 1` bucket capacities.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub temperature: f64,
    pub momentum: f64,
    pub library_momentum: f64,
    /// Number of semantic buckets C.
    pub libraries: usize,
    /// Contrastive set size K; per-bucket capacity is K / (C - 1).
    pub contrastive_size: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub classifier_lr: f64,
    pub mining: MiningMode,
    pub library_mode: LibraryKind,
    pub hard_mining: HardMining,
    /// Fraction of epochs before ambiguity weights activate.
    pub warmup_fraction: f64,
    /// Ambiguity weight scale.
    pub alpha: f64,
    pub update_order: UpdateOrder,
    /// Probe cadence in epochs; the final epoch always probes.
    pub probe_interval: usize,
    pub probe_lr: f64,
    pub probe_steps: usize,
    pub probe_split: f64,
    pub seed: u64,
    pub data: SyntheticConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            temperature: 0.07,
            momentum: 0.9,
            library_momentum: 0.9,
            libraries: 10,
            contrastive_size: 504,
            embedding_dim: 16,
            hidden_dim: 64,
            batch_size: 64,
            epochs: 200,
            lr: 1e-4,
            weight_decay: 1e-5,
            classifier_lr: 0.05,
            mining: MiningMode::Acsm,
            library_mode: LibraryKind::Queue,
            hard_mining: HardMining::Off,
            warmup_fraction: 0.5,
            alpha: 1.0,
            update_order: UpdateOrder::LibraryFirst,
            probe_interval: 10,
            probe_lr: 1e-2,
            probe_steps: 500,
            probe_split: 0.8,
            seed: 0,
        data: SyntheticConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        let fail = |msg: String| Err(CoreError::InvalidConfig(msg));
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return fail("temperature must be positive".into());
        }
        for (name, value) in [
            ("momentum", self.momentum),
            ("library_momentum", self.library_momentum),
        ] {
            if !(0.0..1.0).contains(&value) {
                return fail(alloc::format!("{name} must lie in [0, 1), got {value}"));
            }
        }
        if self.libraries < 2 {
            return fail("need at least 2 libraries".into());
        }
        if self.contrastive_size == 0 || self.contrastive_size % (self.libraries - 1) != 0 {
            return fail(alloc::format!(
                "contrastive_size {} must be a positive multiple of libraries - 1 = {}",
                self.contrastive_size,
                self.libraries - 1
            ));
        }
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return fail("model dimensions must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        for (name, value) in [
            ("lr", self.lr),
            ("weight_decay", self.weight_decay),
            ("classifier_lr", self.classifier_lr),
            ("alpha", self.alpha),
            ("probe_lr", self.probe_lr),
        ] {
            if value < 0.0 || !value.is_finite() {
                return fail(alloc::format!("{name} must be non-negative, got {value}"));
            }
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return fail("warmup_fraction must lie in [0, 1]".into());
        }
        if self.probe_interval == 0 {
            return fail("probe_interval must be positive".into());
        }
        if !(self.probe_split > 0.0 && self.probe_split < 1.0) {
            return fail("probe_split must lie strictly between 0 and 1".into());
        }
        Ok(())
    }

    /// Per-bucket capacity implied by the contrastive set size.
    pub fn bucket_capacity(&self) -> usize {
        self.contrastive_size / (self.libraries - 1)
    }

    /// First epoch index at which hard-sample weights may be non-trivial.
    pub fn warmup_epochs(&self) -> usize {
        libm::round(self.epochs as f64 * self.warmup_fraction) as usize
    }

    fn library_mode_value(&self) -> LibraryMode {
        match self.library_mode {
            LibraryKind::Queue => LibraryMode::Queue,
            LibraryKind::Momentum => LibraryMode::Momentum {
                momentum: self.library_momentum,
            },
        }
    }
}

/// All mutable pieces of a run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub visual: ModalityEncoder,
    pub audio: ModalityEncoder,
    pub classifier_visual: Classifier,
    pub classifier_audio: Classifier,
    pub visual_library: SemanticLibrary,
    pub audio_library: SemanticLibrary,
    pub pseudo: PseudoState,
    pub epoch: usize,
    adam_visual: AdamState,
    adam_audio: AdamState,
}

impl TrainState {
    /// Fresh state from the `init` and `library` substreams of the seed.
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init = stream_rng(cfg.seed, "init");
        let visual = ModalityEncoder::new(
            cfg.data.visual_dim,
            cfg.hidden_dim,
            cfg.embedding_dim,
            &mut init,
        )?;
        let audio = ModalityEncoder::new(
            cfg.data.audio_dim,
            cfg.hidden_dim,
            cfg.embedding_dim,
            &mut init,
        )?;
        let classifier_visual = Classifier::new_random(cfg.embedding_dim, cfg.libraries, &mut init);
        let classifier_audio = Classifier::new_random(cfg.embedding_dim, cfg.libraries, &mut init);

        let mut library = stream_rng(cfg.seed, "library");
        let mode = cfg.library_mode_value();
        let mut visual_library = SemanticLibrary::new(cfg.libraries, cfg.bucket_capacity(), mode);
        let mut audio_library = SemanticLibrary::new(cfg.libraries, cfg.bucket_capacity(), mode);
        visual_library.prefill(cfg.embedding_dim, &mut library);
        audio_library.prefill(cfg.embedding_dim, &mut library);

        let adam_visual = AdamState::new(visual.query_params());
        let adam_audio = AdamState::new(audio.query_params());
        Ok(TrainState {
            visual,
            audio,
            classifier_visual,
            classifier_audio,
            visual_library,
            audio_library,
            pseudo: PseudoState::new(cfg.data.samples),
            epoch: 0,
            adam_visual,
            adam_audio,
        })
    }

    /// Rebuilds a state from checkpointed parts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        visual: ModalityEncoder,
        audio: ModalityEncoder,
        classifier_visual: Classifier,
        classifier_audio: Classifier,
        visual_library: SemanticLibrary,
        audio_library: SemanticLibrary,
        pseudo: PseudoState,
        epoch: usize,
    ) -> Self {
        let adam_visual = AdamState::new(visual.query_params());
        let adam_audio = AdamState::new(audio.query_params());
        TrainState {
            visual,
            audio,
            classifier_visual,
            classifier_audio,
            visual_library,
            audio_library,
            pseudo,
            epoch,
            adam_visual,
            adam_audio,
        }
    }

    /// Averaged bucket probabilities over both modality pathways.
    pub fn classify_pair(&self, visual_input: &[f64], audio_input: &[f64]) -> Result<Vec<f64>> {
        let q_v = self.visual.encode_query_only(visual_input)?;
        let q_a = self.audio.encode_query_only(audio_input)?;
        let p_v = self.classifier_visual.classify(&q_v)?;
        let p_a = self.classifier_audio.classify(&q_a)?;
        Ok(p_v
            .iter()
            .zip(p_a.iter())
            .map(|(a, b)| 0.5 * (a + b))
            .collect())
    }
}

/// One structured record per epoch.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss_v2a: f64,
    pub loss_a2v: f64,
    pub faulty_neg_rate: f64,
    pub classifier_agreement: f64,
    pub purity: f64,
    pub nmi: f64,
    #[cfg_attr(
        feature = "serde",
        serde(skip_serializing_if = "Option::is_none", default)
    )]
    pub probe_acc: Option<f64>,
}

/// Hook for side effects at epoch boundaries (metric sinks, checkpoints).
pub trait EpochObserver {
    fn on_epoch(&mut self, state: &TrainState, metrics: &EpochMetrics);
}

/// No-op observer.
impl EpochObserver for () {
    fn on_epoch(&mut self, _state: &TrainState, _metrics: &EpochMetrics) {}
}

/// Final state plus the per-epoch metric history.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub history: Vec<EpochMetrics>,
}

/// Ground-truth-aware counter for mined negatives; measurement only, never
/// part of the optimization path.
struct FaultyMeter<'a> {
    classes: &'a [usize],
    faulty: u64,
    real: u64,
}

impl<'a> FaultyMeter<'a> {
    fn new(truth: &'a GroundTruth) -> Self {
        FaultyMeter {
            classes: &truth.classes,
            faulty: 0,
            real: 0,
        }
    }

    fn observe(&mut self, anchor: usize, negatives: &[MinedNegative<'_>]) {
        let anchor_class = self.classes[anchor];
        for negative in negatives {
            if let Some(source) = negative.entry.source {
                self.real += 1;
                if self.classes[source] == anchor_class {
                    self.faulty += 1;
                }
            }
        }
    }

    fn rate(&self) -> f64 {
        if self.real == 0 {
            0.0
        } else {
            self.faulty as f64 / self.real as f64
        }
    }
}

struct EpochTotals {
    loss_v2a: f64,
    loss_a2v: f64,
    samples: usize,
}

fn embed_refs<'lib>(negs: &[MinedNegative<'lib>]) -> Vec<&'lib Embedding> {
    negs.iter().map(|m| &m.entry.embedding).collect()
}

/// Mines one sample's negatives from one library under the configured mode.
/// An empty non-own pool falls back to uniform sampling.
fn mine<'lib, R: Rng + ?Sized>(
    library: &'lib SemanticLibrary,
    mode: MiningMode,
    label: usize,
    k: usize,
    sampling: &mut R,
) -> Result<Vec<MinedNegative<'lib>>> {
    match mode {
        MiningMode::Acsm => match library.contrastive_set(label) {
            Ok(negatives) => Ok(negatives),
            Err(CoreError::EmptyNegativePool) => library.random_negatives(k, sampling),
            Err(other) => Err(other),
        },
        MiningMode::Random => library.random_negatives(k, sampling),
    }
}

/// Runs the epoch's batches over a frozen shuffle order. Consumes only the
/// stripped view; ground truth enters solely through the measurement meter.
#[allow(clippy::too_many_arguments)]
fn run_epoch(
    state: &mut TrainState,
    view: &TrainView<'_>,
    cfg: &TrainConfig,
    order: &[usize],
    epoch: usize,
    sampling: &mut ChaCha12Rng,
    meter: &mut FaultyMeter<'_>,
) -> Result<EpochTotals> {
    let hard_enabled =
        cfg.hard_mining == HardMining::Ambiguity && epoch >= cfg.warmup_epochs();
    let adam = AdamParams {
        lr: cfg.lr,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
        weight_decay: cfg.weight_decay,
    };
    let mut totals = EpochTotals {
        loss_v2a: 0.0,
        loss_a2v: 0.0,
        samples: 0,
    };

    for batch in order.chunks(cfg.batch_size) {
        let n = batch.len();
        let mut q_visual: Vec<Embedding> = Vec::with_capacity(n);
        let mut q_audio: Vec<Embedding> = Vec::with_capacity(n);
        let mut cache_visual: Vec<QueryCache> = Vec::with_capacity(n);
        let mut cache_audio: Vec<QueryCache> = Vec::with_capacity(n);
        let mut k_visual: Vec<Embedding> = Vec::with_capacity(n);
        let mut k_audio: Vec<Embedding> = Vec::with_capacity(n);
        for &i in batch {
            let (qv, cv) = state.visual.encode_query(view.visual(i))?;
            let (qa, ca) = state.audio.encode_query(view.audio(i))?;
            k_visual.push(state.visual.encode_key(view.visual(i))?);
            k_audio.push(state.audio.encode_key(view.audio(i))?);
            q_visual.push(qv);
            q_audio.push(qa);
            cache_visual.push(cv);
            cache_audio.push(ca);
        }

        let weights = batch_mining_weights(&state.pseudo, batch, epoch, cfg.alpha, hard_enabled);

        let mut grads_visual = Gradients::zeros_like(state.visual.query_params());
        let mut grads_audio = Gradients::zeros_like(state.audio.query_params());
        let scale = 1.0 / n as f64;
        for (slot, &i) in batch.iter().enumerate() {
            let label = state.pseudo.label(i).ok_or(CoreError::InvalidConfig(
                "pseudo-labels must be assigned before training".into(),
            ))?;
            let negs_audio = mine(
                &state.audio_library,
                cfg.mining,
                label,
                cfg.contrastive_size,
                sampling,
            )?;
            let negs_visual = mine(
                &state.visual_library,
                cfg.mining,
                label,
                cfg.contrastive_size,
                sampling,
            )?;
            if cfg.mining == MiningMode::Acsm {
                // Exclusion contract, checked online every step.
                assert!(
                    negs_audio.iter().all(|m| m.bucket != label)
                        && negs_visual.iter().all(|m| m.bucket != label),
                    "mined negative from the anchor's own bucket"
                );
            }
            meter.observe(i, &negs_audio);
            meter.observe(i, &negs_visual);

            let result = avid_loss(
                &q_visual[slot],
                &q_audio[slot],
                &k_visual[slot],
                &k_audio[slot],
                &embed_refs(&negs_audio),
                &embed_refs(&negs_visual),
                cfg.temperature,
                weights[slot],
            )?;
            totals.loss_v2a += result.loss_v2a;
            totals.loss_a2v += result.loss_a2v;

            let gv = state
                .visual
                .query_backward(&cache_visual[slot], &result.grad_q_visual)?;
            let ga = state
                .audio
                .query_backward(&cache_audio[slot], &result.grad_q_audio)?;
            grads_visual.add_scaled(&gv, scale)?;
            grads_audio.add_scaled(&ga, scale)?;
        }
        totals.samples += n;

        adam_step(
            state.visual.query_params_mut(),
            &grads_visual,
            &mut state.adam_visual,
            &adam,
        )?;
        adam_step(
            state.audio.query_params_mut(),
            &grads_audio,
            &mut state.adam_audio,
            &adam,
        )?;
        state.visual.apply_momentum(cfg.momentum)?;
        state.audio.apply_momentum(cfg.momentum)?;

        let insert = |state: &mut TrainState| -> Result<()> {
            for (slot, &i) in batch.iter().enumerate() {
                let label = state.pseudo.label(i).unwrap();
                state
                    .visual_library
                    .update(label, k_visual[slot].clone(), i)?;
                state.audio_library.update(label, k_audio[slot].clone(), i)?;
            }
            Ok(())
        };
        let classify = |state: &mut TrainState| -> Result<()> {
            // Assignments are read against the batch's frozen library state;
            // the classifier then takes one step per sample in batch order.
            let mut targets_visual = Vec::with_capacity(n);
            let mut targets_audio = Vec::with_capacity(n);
            for slot in 0..n {
                targets_visual
                    .push(state.visual_library.soft_assignment(&q_visual[slot], cfg.temperature)?);
                targets_audio
                    .push(state.audio_library.soft_assignment(&q_audio[slot], cfg.temperature)?);
            }
            for slot in 0..n {
                state.classifier_visual.step(
                    &q_visual[slot],
                    &targets_visual[slot],
                    cfg.classifier_lr,
                )?;
                state.classifier_audio.step(
                    &q_audio[slot],
                    &targets_audio[slot],
                    cfg.classifier_lr,
                )?;
            }
            Ok(())
        };
        match cfg.update_order {
            UpdateOrder::LibraryFirst => {
                insert(state)?;
                classify(state)?;
            }
            UpdateOrder::ClassifierFirst => {
                classify(state)?;
                insert(state)?;
            }
        }
    }
    Ok(totals)
}

/// Cold-start assignment: before any training, each sample takes the bucket
/// with the largest averaged soft assignment over the pre-filled libraries.
/// The prefill exists exactly so this is defined at step zero.
pub fn assign_initial_labels(
    state: &mut TrainState,
    view: &TrainView<'_>,
    temperature: f64,
) -> Result<()> {
    for i in 0..view.len() {
        let q_v = state.visual.encode_query_only(view.visual(i))?;
        let q_a = state.audio.encode_query_only(view.audio(i))?;
        let g_v = state.visual_library.soft_assignment(&q_v, temperature)?;
        let g_a = state.audio_library.soft_assignment(&q_a, temperature)?;
        let averaged: Vec<f64> = g_v
            .iter()
            .zip(g_a.iter())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        state.pseudo.record(i, argmax(&averaged), 0)?;
    }
    Ok(())
}

/// Re-labels every sample from the averaged classifier probabilities,
/// recording ambiguity swaps. Returns the labels and the visual query
/// embeddings (reused by the probe).
pub fn refresh_pseudo_labels(
    state: &mut TrainState,
    view: &TrainView<'_>,
    epoch_tag: usize,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let n = view.len();
    let mut labels = Vec::with_capacity(n);
    let mut visual_features = Vec::with_capacity(n);
    for i in 0..n {
        let q_v = state.visual.encode_query_only(view.visual(i))?;
        let q_a = state.audio.encode_query_only(view.audio(i))?;
        let p_v = state.classifier_visual.classify(&q_v)?;
        let p_a = state.classifier_audio.classify(&q_a)?;
        let averaged: Vec<f64> = p_v
            .iter()
            .zip(p_a.iter())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let label = argmax(&averaged);
        state.pseudo.record(i, label, epoch_tag)?;
        labels.push(label);
        visual_features.push(q_v.as_slice().to_vec());
    }
    Ok((labels, visual_features))
}

/// Trains for the configured number of epochs and reports per-epoch metrics.
///
/// The optimization path sees only the stripped input view; hidden classes
/// feed the faulty-negative meter, the agreement/purity metrics, and the
/// probe, all of which are measurement-only.
pub fn train(
    cfg: &TrainConfig,
    data: &Dataset,
    observer: &mut dyn EpochObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.len() != cfg.data.samples {
        return Err(CoreError::InvalidConfig(alloc::format!(
            "dataset holds {} samples but the config expects {}",
            data.len(),
            cfg.data.samples
        )));
    }
    let (view, truth) = data.split();
    let mut state = TrainState::new(cfg)?;
    let mut shuffle = stream_rng(cfg.seed, "shuffle");
    let mut sampling = stream_rng(cfg.seed, "sampling");

    // Initial assignment pass (tag 0) defines every pseudo-label before the
    // first mining decision; it does not count as a swap.
    assign_initial_labels(&mut state, &view, cfg.temperature)?;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..view.len()).collect();
    for epoch in 0..cfg.epochs {
        state.epoch = epoch;
        for i in (1..order.len()).rev() {
            let j = shuffle.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut meter = FaultyMeter::new(&truth);
        let totals = run_epoch(
            &mut state,
            &view,
            cfg,
            &order,
            epoch,
            &mut sampling,
            &mut meter,
        )?;

        let (labels, visual_features) = refresh_pseudo_labels(&mut state, &view, epoch + 1)?;
        let classifier_agreement = matched_agreement(&labels, &truth.classes)?;
        let (purity, nmi) = cluster_metrics(&labels, &truth.classes)?;
        let probe_due = (epoch + 1) % cfg.probe_interval == 0 || epoch + 1 == cfg.epochs;
        let probe_acc = if probe_due {
            let mut probe_rng = stream_rng(cfg.seed, "probe");
            probe_rng.set_stream(epoch as u64 + 1);
            let report = linear_probe(
                &visual_features,
                &truth.classes,
                truth.n_classes,
                cfg.probe_split,
                cfg.probe_lr,
                cfg.probe_steps,
                &mut probe_rng,
            )?;
            Some(report.test_accuracy)
        } else {
            None
        };

        let denominator = totals.samples.max(1) as f64;
        let metrics = EpochMetrics {
            epoch,
            loss_v2a: totals.loss_v2a / denominator,
            loss_a2v: totals.loss_a2v / denominator,
            faulty_neg_rate: meter.rate(),
            classifier_agreement,
            purity,
            nmi,
            probe_acc,
        };
        observer.on_epoch(&state, &metrics);
        history.push(metrics);
    }
    state.epoch = cfg.epochs;
    Ok(TrainOutcome { state, history })
}
