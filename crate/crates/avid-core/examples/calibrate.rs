//! Scratch harness for watching training dynamics (not part of the deliverable).
use avid_core::synthdata::{generate, Dataset};
use avid_core::trainer::{train, EpochMetrics, EpochObserver, MiningMode, TrainConfig, TrainState};
use std::time::Instant;

struct Watch {
    data: Dataset,
    n_buckets: usize,
    every: usize,
    total: usize,
}

impl EpochObserver for Watch {
    fn on_epoch(&mut self, state: &TrainState, m: &EpochMetrics) {
        let classes: Vec<usize> = self.data.pairs.iter().map(|p| p.class_id).collect();
        if m.epoch + 1 == self.total {
            let embeds: Vec<Vec<f64>> = self
                .data
                .pairs
                .iter()
                .map(|p| {
                    state
                        .visual
                        .encode_query_only(&p.visual)
                        .unwrap()
                        .as_slice()
                        .to_vec()
                })
                .collect();
            let (mut wsum, mut wn, mut csum, mut cn) = (0.0f64, 0u64, 0.0f64, 0u64);
            for i in 0..embeds.len() {
                for j in i + 1..embeds.len() {
                    let dot: f64 = embeds[i].iter().zip(&embeds[j]).map(|(a, b)| a * b).sum();
                    if classes[i] == classes[j] {
                        wsum += dot;
                        wn += 1;
                    } else {
                        csum += dot;
                        cn += 1;
                    }
                }
            }
            println!(
                "  class-structure: within {:.4} cross {:.4} margin {:.4}",
                wsum / wn as f64,
                csum / cn as f64,
                wsum / wn as f64 - csum / cn as f64
            );
        }
        if (m.epoch + 1) % self.every != 0 && m.epoch > 2 {
            return;
        }
        let mut hist = vec![0usize; self.n_buckets];
        let mut modal_bucket = vec![vec![0usize; self.n_buckets]; 10];
        for (i, l) in state.pseudo.labels().enumerate() {
            let l = l.unwrap();
            hist[l] += 1;
            modal_bucket[classes[i]][l] += 1;
        }
        let mut mean_recall = 0.0;
        for c in 0..10 {
            let best = (0..self.n_buckets).max_by_key(|&b| modal_bucket[c][b]).unwrap();
            let total: usize = modal_bucket[c].iter().sum();
            mean_recall += modal_bucket[c][best] as f64 / total.max(1) as f64 / 10.0;
        }
        let active = hist.iter().filter(|&&h| h > 0).count();
        let top = *hist.iter().max().unwrap();
        println!(
            "  ep {:>3}  l {:.2}/{:.2}  faulty {:.4}  agree {:.3} purity {:.3} nmi {:.3}  active {active} topshare {:.2} recall {:.2}  probe {}",
            m.epoch, m.loss_v2a, m.loss_a2v, m.faulty_neg_rate, m.classifier_agreement,
            m.purity, m.nmi, top as f64 / classes.len() as f64, mean_recall,
            m.probe_acc.map(|p| format!("{:.3}", p)).unwrap_or_else(|| "-".into())
        );
    }
}

fn main() {
    let mut cfg = TrainConfig::default();
    let mut epochs = 40usize;
    let mut mode = "both".to_string();
    let mut seed = 0u64;
    let mut every = 5usize;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("key=value");
        match k {
            "epochs" => epochs = v.parse().unwrap(),
            "mode" => mode = v.into(),
            "seed" => seed = v.parse().unwrap(),
            "every" => every = v.parse().unwrap(),
            "classifier_lr" => cfg.classifier_lr = v.parse().unwrap(),
            "batch" => cfg.batch_size = v.parse().unwrap(),
            "mnoise" => cfg.data.modality_noise = v.parse().unwrap(),
            "sigma" => cfg.data.noise_sigma = v.parse().unwrap(),
            "lr" => cfg.lr = v.parse().unwrap(),
            "k" => cfg.contrastive_size = v.parse().unwrap(),
            "c" => cfg.libraries = v.parse().unwrap(),
            "probe_interval" => cfg.probe_interval = v.parse().unwrap(),
            "order" => cfg.update_order = v.parse().unwrap(),
            "library_mode" => cfg.library_mode = v.parse().unwrap(),
            other => panic!("unknown key {other}"),
        }
    }
    cfg.epochs = epochs;
    cfg.seed = seed;
    for mining in [MiningMode::Random, MiningMode::Acsm] {
        if (mode == "acsm" && mining == MiningMode::Random)
            || (mode == "random" && mining == MiningMode::Acsm)
        {
            continue;
        }
        let cfg = TrainConfig { mining, ..cfg.clone() };
        let data = generate(&cfg.data, cfg.seed).unwrap();
        let mut watch = Watch {
            data: data.clone(),
            n_buckets: cfg.libraries,
            every,
            total: epochs,
        };
        let t0 = Instant::now();
        let _ = train(&cfg, &data, &mut watch).unwrap();
        println!(
            "--- done: seed {seed} mining {mining:?} clf_lr {} batch {} mnoise {} order {} ({:.1}s)",
            cfg.classifier_lr, cfg.batch_size, cfg.data.modality_noise, cfg.update_order,
            t0.elapsed().as_secs_f64()
        );
    }
}
