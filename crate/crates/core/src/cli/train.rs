use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;

use super::RunConfig;
use crate::data::{NormStats, Utterance, Vocabulary};
use crate::error::{Error, Result};
use crate::lattice::{nll_loss, LossOptions, NllReport};
use crate::model::checkpoint::Checkpoint;
use crate::model::{FlatStartStats, Model};
use crate::numerics::AdamState;
use crate::Prng;

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRecord {
    /// Updates applied so far, counting this one.
    pub update: u64,
    pub mean_nll: f64,
    pub nll_per_frame: f64,
    pub grad_norm: f64,
    /// Seconds spent on this update.
    pub wall_time: f64,
}

impl LogRecord {
    pub const TSV_HEADER: &'static str = "update\tmean_nll\tnll_per_frame\tgrad_norm\twall_time_s";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:?}\t{:?}\t{:?}\t{:.6}",
            self.update, self.mean_nll, self.nll_per_frame, self.grad_norm, self.wall_time
        )
    }

    /// The TSV line without the wall-time column, which varies between runs.
    pub fn deterministic_fields(&self) -> String {
        format!(
            "{}\t{:?}\t{:?}\t{:?}",
            self.update, self.mean_nll, self.nll_per_frame, self.grad_norm
        )
    }
}

/// Single-writer training loop state.
pub struct Trainer {
    config: RunConfig,
    model: Model,
    adam: AdamState,
    norm: NormStats,
    vocab: Vocabulary,
    train: Vec<Utterance>,
    init_tau: f64,
    update: u64,
}

fn check_data(config: &RunConfig, vocab: &Vocabulary, train: &[Utterance]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if vocab.len() != config.model.vocab_size {
        return Err(Error::Config(format!(
            "vocabulary has {} symbols but vocab_size is {}",
            vocab.len(),
            config.model.vocab_size
        )));
    }
    if let Some(u) = train.iter().find(|u| u.frames.cols() != config.model.acoustic_dim) {
        return Err(Error::Config(format!(
            "utterance {} has {}-dim features but acoustic_dim is {}",
            u.id,
            u.frames.cols(),
            config.model.acoustic_dim
        )));
    }
    Ok(())
}

impl Trainer {
    /// Flat start from raw (unnormalized) training data.
    pub fn new(config: RunConfig, vocab: Vocabulary, mut train: Vec<Utterance>) -> Result<Self> {
        config.validate()?;
        check_data(&config, &vocab, &train)?;
        let norm = NormStats::compute(&train)?;
        norm.apply_all(&mut train)?;
        let stats = FlatStartStats {
            symbols: train.iter().map(|u| u.symbols.len()).sum(),
            frames: train.iter().map(|u| u.num_frames()).sum(),
        };
        let init_tau = config
            .init_tau
            .unwrap_or_else(|| Model::init_tau_from_stats(&config.model, Some(stats)));
        let model = Model::flat_start(config.model.clone(), config.seed, init_tau)?;
        let adam = AdamState::new(config.adam.clone(), model.params());
        Ok(Trainer {
            config,
            model,
            adam,
            norm,
            vocab,
            train,
            init_tau,
            update: 0,
        })
    }

    /// Continues from a checkpoint, reusing its normalization statistics.
    pub fn resume(config: RunConfig, ck: Checkpoint, mut train: Vec<Utterance>) -> Result<Self> {
        config.validate()?;
        if ck.model.config() != &config.model {
            return Err(Error::Config("checkpoint model settings differ from the config".into()));
        }
        check_data(&config, &ck.vocab, &train)?;
        ck.norm.apply_all(&mut train)?;
        let adam = match ck.adam {
            Some(mut a) => {
                a.config = config.adam.clone();
                a
            }
            None => {
                let mut a = AdamState::new(config.adam.clone(), ck.model.params());
                a.step = ck.update;
                a
            }
        };
        Ok(Trainer {
            config,
            model: ck.model,
            adam,
            norm: ck.norm,
            vocab: ck.vocab,
            train,
            init_tau: ck.init_tau,
            update: ck.update,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn norm(&self) -> &NormStats {
        &self.norm
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn update(&self) -> u64 {
        self.update
    }

    pub fn init_tau(&self) -> f64 {
        self.init_tau
    }

    pub fn training_data(&self) -> &[Utterance] {
        &self.train
    }

    /// Generator for update `update`; depends only on the seed and the index,
    /// so a resumed run draws the same batches as an uninterrupted one.
    fn update_rng(&self, update: u64) -> Prng {
        let mut rng = Prng::seed_from_u64(self.config.seed);
        rng.set_stream(update);
        rng
    }

    /// Samples a batch, computes the loss and its gradient, applies Adam.
    pub fn step(&mut self) -> Result<LogRecord> {
        let start = Instant::now();
        let mut rng = self.update_rng(self.update);
        let n = self.train.len();
        let batch: Vec<&Utterance> = if self.config.batch_size >= n {
            self.train.iter().collect()
        } else {
            let mut idx = sample(&mut rng, n, self.config.batch_size).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| &self.train[i]).collect()
        };
        let opts = LossOptions {
            dropout: self.config.train_dropout,
            per_frame: self.config.per_frame,
            infeasible: self.config.infeasible,
            gradients: true,
        };
        let out = nll_loss(&self.model, &batch, &opts, &mut rng)?;
        let grads = out.gradients.expect("gradients requested");
        for (p, g) in self.model.params_mut().iter_mut().zip(grads) {
            p.grad = g;
        }
        let report = self.adam.step(self.model.params_mut())?;
        self.update += 1;
        Ok(LogRecord {
            update: self.update,
            mean_nll: out.report.mean_nll,
            nll_per_frame: out.report.nll_per_frame,
            grad_norm: report.grad_norm,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }

    /// NLL of already-normalized utterances, dropout off.
    pub fn evaluate(&self, utts: &[Utterance]) -> Result<NllReport> {
        evaluate(&self.model, utts, false, 0)
    }

    pub fn checkpoint(&self, with_optimizer: bool) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            norm: self.norm.clone(),
            vocab: self.vocab.clone(),
            init_tau: self.init_tau,
            update: self.update,
            run_config: self.config.to_text(),
            adam: with_optimizer.then(|| self.adam.clone()),
        }
    }
}

/// Mean NLL of normalized utterances; infeasible items are skipped and listed.
pub fn evaluate(model: &Model, utts: &[Utterance], dropout: bool, seed: u64) -> Result<NllReport> {
    let batch: Vec<&Utterance> = utts.iter().collect();
    let opts = LossOptions {
        dropout,
        per_frame: false,
        infeasible: crate::lattice::InfeasiblePolicy::Skip,
        gradients: false,
    };
    let mut rng = Prng::seed_from_u64(seed);
    Ok(nll_loss(model, &batch, &opts, &mut rng)?.report)
}
