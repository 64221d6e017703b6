//! The adversary: data-free attacks (DFA-R, DFA-G) and omniscient baselines.
//!
//! The federation loop hands each attack a [`BenignView`]. Data-free attacks
//! receive a hidden view, so their data-free property is structural.

mod baselines;
mod dfa;

pub use baselines::{
    fang_attack, fang_with_lambda, lie_attack, mean_and_std, minmax_attack, random_weights_attack, Direction,
    DistanceBound, Perturbed, BINARY_SEARCH_STEPS, FANG_HALVINGS, GAMMA_UPPER,
};
pub use dfa::{
    adversarial_train, dfa_g_synthesize, dfa_r_synthesize, AdversarialOutcome, AdversarialTraining, SynthOptions,
    SynthReport, SynthSet, DIVERGENCE_LOSS,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::federation::{ClientUpdate, RoundContext};
use crate::nn::{gaussian_noise, ClassifierSpec, FilterLayerSpec, GeneratorSpec, ParamVector};
use crate::rng::{derive_seed, stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    DfaR,
    DfaG,
    Lie,
    MinMax,
    MinSum,
    Fang,
    RandomWeights,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::DfaR => "dfa_r",
            AttackKind::DfaG => "dfa_g",
            AttackKind::Lie => "lie",
            AttackKind::MinMax => "min_max",
            AttackKind::MinSum => "min_sum",
            AttackKind::Fang => "fang",
            AttackKind::RandomWeights => "random_weights",
        }
    }

    pub fn is_data_free(self) -> bool {
        matches!(self, AttackKind::DfaR | AttackKind::DfaG)
    }

    /// Baselines that read the round's benign updates.
    pub fn needs_benign_view(self) -> bool {
        matches!(self, AttackKind::Lie | AttackKind::MinMax | AttackKind::MinSum | AttackKind::Fang)
    }
}

/// The benign updates of the current round, or nothing.
#[derive(Debug, Clone, Copy)]
pub struct BenignView<'a> {
    updates: Option<&'a [ClientUpdate]>,
}

impl<'a> BenignView<'a> {
    pub fn hidden() -> Self {
        Self { updates: None }
    }

    pub fn visible(updates: &'a [ClientUpdate]) -> Self {
        Self { updates: Some(updates) }
    }

    /// The benign updates; an error for a hidden view.
    pub fn updates(&self) -> Result<&'a [ClientUpdate]> {
        self.updates
            .ok_or_else(|| Error::invalid("benign updates are not visible to this attack"))
    }

    pub fn is_hidden(&self) -> bool {
        self.updates.is_none()
    }
}

/// What the adversary produced in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Crafted {
    pub params: ParamVector,
    /// Claimed sample count.
    pub n_samples: usize,
    pub synth: Option<SynthReport>,
}

/// A single adversary controlling every malicious client. Synthesis
/// parameters persist across rounds.
#[derive(Debug, Clone)]
pub struct Adversary {
    kind: AttackKind,
    seed: u64,
    spec: ClassifierSpec,
    synth: SynthOptions,
    training: AdversarialTraining,
    static_mode: bool,
    lie_z: f64,
    direction: Direction,
    fang_lambda0: f64,
    /// Ỹ for DFA-G, fixed for the whole run.
    fixed_label: usize,
    filter: Option<(FilterLayerSpec, ParamVector)>,
    generator: Option<(GeneratorSpec, ParamVector, u64)>,
    /// |S| claimed as the sample count of data-free updates; benign-average
    /// for baselines.
    claimed: usize,
}

impl Adversary {
    pub fn new(cfg: &ExperimentConfig, spec: &ClassifierSpec) -> Result<Self> {
        let a = &cfg.attack;
        let seed = cfg.experiment.seed;
        let mut init = stream(seed, Stream::Adversary, &[u64::MAX]);
        let input = spec.input();
        let filter = if a.kind == AttackKind::DfaR {
            if input.height != input.width {
                return Err(Error::config("attack: dfa_r needs square classifier inputs"));
            }
            let fspec = FilterLayerSpec::new(a.filter_kernel, a.filter_stride, a.filter_padding, input.width, input.channels)
                .map_err(|e| Error::Config(format!("attack.filter_*: {e}")))?;
            let params = fspec.init_params(&mut init);
            Some((fspec, params))
        } else {
            None
        };
        let generator = if a.kind == AttackKind::DfaG {
            let gspec = GeneratorSpec::new(a.generator_noise_dim, a.generator_hidden, input, a.generator_activation)?;
            let theta = gspec.init_params(&mut init);
            let z_seed = a.z_seed.unwrap_or_else(|| derive_seed(seed, Stream::Noise, &[]));
            Some((gspec, theta, z_seed))
        } else {
            None
        };
        let fixed_label = stream(seed, Stream::Label, &[]).random_range(0..spec.num_classes());
        Ok(Self {
            kind: a.kind,
            seed,
            spec: spec.clone(),
            synth: SynthOptions {
                count: a.synth_size,
                epochs: a.synth_epochs,
                lr: a.synth_lr,
            },
            training: AdversarialTraining {
                lambda_reg: a.lambda_reg,
                lr: a.train_lr.unwrap_or(cfg.experiment.lr),
                epochs: a.train_epochs,
                batch_size: cfg.experiment.batch_size,
            },
            static_mode: a.static_mode,
            lie_z: a.lie_z,
            direction: a.direction,
            fang_lambda0: 10.0 * cfg.experiment.lr,
            fixed_label,
            filter,
            generator,
            claimed: a.synth_size.max(1),
        })
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    /// Ỹ of DFA-G.
    pub fn fixed_label(&self) -> usize {
        self.fixed_label
    }

    /// The round's malicious update. `view` must be visible exactly for
    /// attacks that need it.
    pub fn craft(&mut self, ctx: &RoundContext<'_>, view: BenignView<'_>) -> Result<Crafted> {
        let round = ctx.round as u64;
        let mut rng = stream(self.seed, Stream::Adversary, &[round]);
        match self.kind {
            AttackKind::None => Err(Error::invalid("no attack configured")),
            AttackKind::DfaR => {
                let (fspec, filter) = self.filter.as_mut().expect("filter exists for dfa_r");
                if self.static_mode {
                    *filter = fspec.init_params(&mut rng);
                }
                let opts = SynthOptions {
                    epochs: if self.static_mode { 0 } else { self.synth.epochs },
                    ..self.synth
                };
                let label = stream(self.seed, Stream::Label, &[round]).random_range(0..self.spec.num_classes());
                let (set, report) = dfa_r_synthesize(filter, fspec, ctx.global, &self.spec, opts, label, &mut rng)?;
                self.train_on(ctx, &set, report, &mut rng)
            }
            AttackKind::DfaG => {
                let (gspec, theta, z_seed) = self.generator.as_mut().expect("generator exists for dfa_g");
                if self.static_mode {
                    *theta = gspec.init_params(&mut rng);
                }
                let noise = gaussian_noise(*z_seed, self.synth.count, gspec.noise_dim());
                let opts = SynthOptions {
                    epochs: if self.static_mode { 0 } else { self.synth.epochs },
                    ..self.synth
                };
                let (set, report) =
                    dfa_g_synthesize(theta, gspec, ctx.global, &self.spec, &noise, opts, self.fixed_label, &mut rng)?;
                self.train_on(ctx, &set, report, &mut rng)
            }
            AttackKind::RandomWeights => Ok(Crafted {
                params: random_weights_attack(ctx.global.len(), &mut rng),
                n_samples: self.claimed,
                synth: None,
            }),
            AttackKind::Lie | AttackKind::MinMax | AttackKind::MinSum | AttackKind::Fang => {
                let benign = view.updates()?;
                if benign.is_empty() {
                    return Ok(Crafted {
                        params: ctx.global.clone(),
                        n_samples: self.claimed,
                        synth: None,
                    });
                }
                let params: Vec<&ParamVector> = benign.iter().map(|u| &u.params).collect();
                let claimed = benign.iter().map(|u| u.n_samples).sum::<usize>() / benign.len();
                let out = match self.kind {
                    AttackKind::Lie => lie_attack(&params, self.lie_z)?,
                    AttackKind::Fang => fang_attack(&params, ctx.global, self.fang_lambda0)?,
                    _ if params.len() < 2 => lie_attack(&params, 0.0)?,
                    AttackKind::MinMax => minmax_attack(&params, ctx.global, self.direction, DistanceBound::MinMax)?.params,
                    _ => minmax_attack(&params, ctx.global, self.direction, DistanceBound::MinSum)?.params,
                };
                Ok(Crafted {
                    params: out,
                    n_samples: claimed.max(1),
                    synth: None,
                })
            }
        }
    }

    fn train_on(
        &self,
        ctx: &RoundContext<'_>,
        set: &SynthSet,
        report: SynthReport,
        rng: &mut crate::rng::SimRng,
    ) -> Result<Crafted> {
        let out = adversarial_train(ctx.global, ctx.prev_global, &self.spec, set, self.training, rng)?;
        Ok(Crafted {
            params: out.params,
            n_samples: set.len(),
            synth: Some(report),
        })
    }
}
