//! Server-side robust aggregation rules.
//!
//! Selection-based rules (mKrum, Bulyan, RefD) admit a subset of the
//! submitted updates; statistic rules (trimmed mean, median) blend every
//! update coordinate-wise and admit all of them.

mod coordinate;
mod krum;
mod refd;

pub use coordinate::{coordinate_median, trimmed_mean};
pub use krum::{bulyan, krum_scores, mkrum};
pub use refd::{d_score, refd, refd_balance, refd_confidence, refd_score, RefdScore};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::{fedavg, ClientUpdate};
use crate::nn::{ClassifierSpec, LabeledBatch, ParamVector};

/// Outcome of one aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseVerdict {
    /// Admitted client ids, ascending.
    pub admitted: Vec<usize>,
    /// Rejected client ids, ascending.
    pub rejected: Vec<usize>,
    /// Per-update score in submission order (Krum score or D-Score); empty for
    /// rules that do not score.
    pub scores: Vec<f64>,
    pub aggregate: ParamVector,
}

impl DefenseVerdict {
    fn admit_all(updates: &[ClientUpdate], aggregate: ParamVector) -> Self {
        let mut admitted: Vec<usize> = updates.iter().map(|u| u.client_id).collect();
        admitted.sort_unstable();
        Self {
            admitted,
            rejected: Vec::new(),
            scores: Vec::new(),
            aggregate,
        }
    }

    fn from_admitted(updates: &[ClientUpdate], admitted: Vec<usize>, scores: Vec<f64>, aggregate: ParamVector) -> Self {
        let mut admitted = admitted;
        admitted.sort_unstable();
        let mut rejected: Vec<usize> = updates
            .iter()
            .map(|u| u.client_id)
            .filter(|id| admitted.binary_search(id).is_err())
            .collect();
        rejected.sort_unstable();
        Self {
            admitted,
            rejected,
            scores,
            aggregate,
        }
    }
}

/// Coarse family, used to decide whether DPR is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    Fedavg,
    Mkrum,
    Bulyan,
    Trmean,
    Median,
    Refd,
}

impl DefenseKind {
    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::Fedavg => "fedavg",
            DefenseKind::Mkrum => "mkrum",
            DefenseKind::Bulyan => "bulyan",
            DefenseKind::Trmean => "trmean",
            DefenseKind::Median => "median",
            DefenseKind::Refd => "refd",
        }
    }

    /// Whether the rule filters updates, making the pass rate meaningful.
    pub fn is_selection_based(self) -> bool {
        matches!(self, DefenseKind::Mkrum | DefenseKind::Bulyan | DefenseKind::Refd)
    }
}

/// A fully parameterized aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Defense {
    FedAvg,
    MKrum { f: usize, m: usize },
    Bulyan { f: usize },
    TrimmedMean { k: usize },
    Median,
    RefD { alpha: f64, reject: usize },
}

/// What a defense may consult besides the updates.
#[derive(Debug, Clone, Copy)]
pub struct DefenseContext<'a> {
    pub spec: &'a ClassifierSpec,
    /// The server's labeled reference set; required by RefD only.
    pub reference: Option<&'a LabeledBatch>,
}

impl Defense {
    pub fn kind(&self) -> DefenseKind {
        match self {
            Defense::FedAvg => DefenseKind::Fedavg,
            Defense::MKrum { .. } => DefenseKind::Mkrum,
            Defense::Bulyan { .. } => DefenseKind::Bulyan,
            Defense::TrimmedMean { .. } => DefenseKind::Trmean,
            Defense::Median => DefenseKind::Median,
            Defense::RefD { .. } => DefenseKind::Refd,
        }
    }

    /// Check the rule's preconditions for `n` submitted updates.
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::config("a defense needs at least one update per round"));
        }
        match *self {
            Defense::FedAvg | Defense::Median => Ok(()),
            Defense::MKrum { f, m } => {
                krum::check_krum(n, f)?;
                if m == 0 || m > n {
                    return Err(Error::config(format!("mkrum: m = {m} must lie in [1, {n}]")));
                }
                Ok(())
            }
            Defense::Bulyan { f } => krum::check_bulyan(n, f),
            Defense::TrimmedMean { k } => coordinate::check_trim(n, k),
            Defense::RefD { alpha, reject } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::config(format!("refd: alpha must be finite and non-negative, got {alpha}")));
                }
                if reject >= n {
                    return Err(Error::config(format!("refd: X = {reject} must be below n = {n}")));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, updates: &[ClientUpdate], ctx: DefenseContext<'_>) -> Result<DefenseVerdict> {
        self.validate(updates.len())?;
        match *self {
            Defense::FedAvg => Ok(DefenseVerdict::admit_all(updates, fedavg(updates)?)),
            Defense::MKrum { f, m } => mkrum(updates, f, m),
            Defense::Bulyan { f } => bulyan(updates, f),
            Defense::TrimmedMean { k } => {
                let params: Vec<&ParamVector> = updates.iter().map(|u| &u.params).collect();
                Ok(DefenseVerdict::admit_all(updates, trimmed_mean(&params, k)?))
            }
            Defense::Median => {
                let params: Vec<&ParamVector> = updates.iter().map(|u| &u.params).collect();
                Ok(DefenseVerdict::admit_all(updates, coordinate_median(&params)?))
            }
            Defense::RefD { alpha, reject } => {
                let reference = ctx
                    .reference
                    .ok_or_else(|| Error::config("refd needs a reference set"))?;
                refd(updates, ctx.spec, reference, alpha, reject)
            }
        }
    }
}

fn check_dims(params: &[&ParamVector]) -> Result<usize> {
    let dim = params
        .first()
        .ok_or_else(|| Error::Aggregation("aggregation over an empty update list".into()))?
        .len();
    if params.iter().any(|p| p.len() != dim) {
        return Err(Error::dim("updates have different parameter counts"));
    }
    Ok(dim)
}
