use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{local_train, select_clients, ClientUpdate, LocalTraining, RoundContext};
use crate::attacks::{Adversary, AttackKind, BenignView, SynthReport};
use crate::config::{DatasetKind, DatasetSection, ExperimentConfig};
use crate::data::{
    dirichlet_partition, iid_partition, load_fashion_mnist, make_blobs_with_noise, make_reference_set, Dataset, Partition,
};
use crate::defenses::{Defense, DefenseContext};
use crate::error::{Error, Result};
use crate::metrics::RoundRecord;
use crate::nn::{accuracy, ClassifierSpec, LabeledBatch, ParamVector};
use crate::rng::{stream, Stream};

/// Default location of the IDX files, relative to the working directory.
pub const DEFAULT_FASHION_DIR: &str = "data/fashion-mnist";

/// Load the dataset a configuration names. Relative IDX paths resolve
/// against `base`.
pub fn load_dataset(section: &DatasetSection, seed: u64, base: &Path) -> Result<Dataset> {
    match section.kind {
        DatasetKind::Blobs => Ok(make_blobs_with_noise(
            section.blob_classes,
            section.blob_per_class,
            section.blob_side,
            section.blob_noise,
            seed,
        )),
        DatasetKind::FashionMnist => {
            let dir = section.path.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_FASHION_DIR));
            load_fashion_mnist(&base.join(dir))
        }
    }
}

/// Execution knobs that do not affect results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Client-training threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Destination of periodic checkpoints (`experiment.checkpoint_interval`).
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub final_params: ParamVector,
    pub malicious: Vec<usize>,
    /// Synthesis diagnostics of every round in which the adversary acted.
    pub synth_reports: Vec<(usize, SynthReport)>,
}

/// A fully prepared experiment: subsampled data, partition, attacker set,
/// defense and initial model.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: ClassifierSpec,
    pub train: LabeledBatch,
    pub test: LabeledBatch,
    pub partition: Partition,
    /// Malicious client ids, ascending.
    pub malicious: Vec<usize>,
    pub defense: Defense,
    pub reference: Option<LabeledBatch>,
    pub initial: ParamVector,
    client_data: Vec<LabeledBatch>,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig, dataset: &Dataset) -> Result<Self> {
        config.validate()?;
        let e = &config.experiment;
        let seed = e.seed;
        let dataset = dataset
            .clone()
            .subsample_train(config.dataset.train_fraction, &mut stream(seed, Stream::Subsample, &[0]))?
            .subsample_test(config.dataset.test_fraction, &mut stream(seed, Stream::Subsample, &[1]))?;
        let spec = ClassifierSpec::new(dataset.train.shape(), config.model.hidden.clone(), dataset.num_classes)?;
        let labels = dataset.train.labels();
        let mut prng = stream(seed, Stream::Partition, &[]);
        let partition = if config.dataset.iid {
            iid_partition(labels, dataset.num_classes, e.clients, &mut prng)?
        } else {
            dirichlet_partition(labels, dataset.num_classes, e.clients, config.dataset.beta, &mut prng)?
        };
        let malicious = if config.attack.kind == AttackKind::None {
            Vec::new()
        } else {
            let mut ids: Vec<usize> = (0..e.clients).collect();
            ids.shuffle(&mut stream(seed, Stream::Attackers, &[]));
            let mut m = ids[..config.malicious_count()].to_vec();
            m.sort_unstable();
            m
        };
        let defense = config.resolve_defense()?;
        let reference = if matches!(defense, Defense::RefD { .. }) {
            let set = make_reference_set(
                &dataset,
                config.defense.reference_size,
                &mut stream(seed, Stream::Reference, &[]),
            )
            .map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("defense.reference_size: {msg}")),
                other => other,
            })?;
            Some(set.batch)
        } else {
            None
        };
        let initial = spec.init_params(&mut stream(seed, Stream::Init, &[]));
        let client_data = partition.assignment.iter().map(|idx| dataset.train.select(idx)).collect();
        Ok(Self {
            config: config.clone(),
            spec,
            train: dataset.train,
            test: dataset.test,
            partition,
            malicious,
            defense,
            reference,
            initial,
            client_data,
        })
    }

    pub fn client_data(&self, client: usize) -> &LabeledBatch {
        &self.client_data[client]
    }

    fn is_malicious(&self, client: usize) -> bool {
        self.malicious.binary_search(&client).is_ok()
    }

    /// Clients that can be selected: every attacker, and benign clients holding data.
    pub fn candidates(&self) -> Vec<usize> {
        (0..self.config.experiment.clients)
            .filter(|&c| self.is_malicious(c) || !self.client_data[c].is_empty())
            .collect()
    }

    pub fn run(&self, opts: &RunOptions) -> Result<RunOutput> {
        match opts.workers {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
                pool.install(|| self.run_rounds(opts))
            }
            None => self.run_rounds(opts),
        }
    }

    fn run_rounds(&self, opts: &RunOptions) -> Result<RunOutput> {
        let e = &self.config.experiment;
        let seed = e.seed;
        let training = LocalTraining {
            lr: e.lr,
            epochs: e.local_epochs,
            batch_size: e.batch_size,
        };
        let mut adversary = if self.malicious.is_empty() {
            None
        } else {
            Some(Adversary::new(&self.config, &self.spec)?)
        };
        let candidates = self.candidates();
        let k = e.selected.min(candidates.len());
        if k < e.selected {
            log::warn!("only {} selectable clients; selecting {k} per round", candidates.len());
        }
        let defense_ctx = DefenseContext {
            spec: &self.spec,
            reference: self.reference.as_ref(),
        };
        let clock = |on: bool| on.then(Instant::now);
        let elapsed = |t: Option<Instant>| t.map(|t| t.elapsed().as_secs_f64() * 1e3).unwrap_or(0.0);
        let mut global = self.initial.clone();
        let mut prev = global.clone();
        let mut records = Vec::with_capacity(e.rounds);
        let mut synth_reports = Vec::new();
        for round in 0..e.rounds {
            let selected = select_clients(&candidates, k, &mut stream(seed, Stream::Selection, &[round as u64]))?;
            let (bad, good): (Vec<usize>, Vec<usize>) = selected.iter().partition(|&&c| self.is_malicious(c));
            let trained: Vec<(ClientUpdate, f64)> = good
                .par_iter()
                .map(|&c| {
                    let mut rng = stream(seed, Stream::Client, &[round as u64, c as u64]);
                    local_train(c, &global, &self.spec, &self.client_data[c], training, &mut rng).map_err(|source| {
                        Error::Client {
                            round,
                            client: c,
                            source: Box::new(source),
                        }
                    })
                })
                .collect::<Result<_>>()?;
            let losses: Vec<f64> = trained.iter().map(|(_, l)| *l).filter(|l| l.is_finite()).collect();
            let mut updates: Vec<ClientUpdate> = trained.into_iter().map(|(u, _)| u).collect();
            let ctx = RoundContext {
                round,
                global: &global,
                prev_global: &prev,
                selected: &selected,
            };
            let mut attack_ms = 0.0;
            if let (Some(adv), false) = (adversary.as_mut(), bad.is_empty()) {
                let started = clock(e.record_timing);
                let view = if adv.kind().needs_benign_view() {
                    BenignView::visible(&updates)
                } else {
                    BenignView::hidden()
                };
                let crafted = adv.craft(&ctx, view).map_err(|source| Error::Client {
                    round,
                    client: bad[0],
                    source: Box::new(source),
                })?;
                attack_ms = elapsed(started);
                if let Some(r) = crafted.synth {
                    synth_reports.push((round, r));
                }
                updates.extend(bad.iter().map(|&c| ClientUpdate {
                    client_id: c,
                    params: crafted.params.clone(),
                    n_samples: crafted.n_samples,
                }));
            }
            updates.sort_by_key(|u| u.client_id);
            let started = clock(e.record_timing);
            let verdict = self.defense.apply(&updates, defense_ctx)?;
            let defense_ms = elapsed(started);
            let malicious_admitted = verdict.admitted.iter().filter(|&&c| self.is_malicious(c)).count();
            verdict
                .aggregate
                .ensure_finite(&format!("aggregate of round {round}"))?;
            prev = std::mem::replace(&mut global, verdict.aggregate);
            let evaluate = (round + 1) % e.eval_interval == 0 || round + 1 == e.rounds;
            let acc = if evaluate {
                Some(accuracy(&global, &self.spec, &self.test)?)
            } else {
                None
            };
            if let (Some(dir), true) = (&opts.checkpoint_dir, e.checkpoint_interval > 0) {
                if (round + 1) % e.checkpoint_interval == 0 {
                    global.write_checkpoint(&dir.join(format!("round_{:05}.ckpt", round + 1)))?;
                }
            }
            log::debug!("round {round}: accuracy {acc:?}, {} of {} attackers admitted", malicious_admitted, bad.len());
            records.push(RoundRecord {
                round,
                accuracy: acc,
                train_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
                selected,
                malicious_selected: bad.len(),
                malicious_admitted,
                defense_ms,
                attack_ms,
            });
        }
        Ok(RunOutput {
            records,
            final_params: global,
            malicious: self.malicious.clone(),
            synth_reports,
        })
    }
}

/// Prepare and run in one call.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset, opts: &RunOptions) -> Result<RunOutput> {
    Experiment::new(config, dataset)?.run(opts)
}
