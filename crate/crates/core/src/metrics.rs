//! Per-round bookkeeping, the attack success rate and the defense pass rate,
//! and the RefD cost model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "round",
    "accuracy",
    "train_loss",
    "selected",
    "malicious_selected",
    "malicious_admitted",
    "defense_ms",
    "attack_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Test accuracy of the aggregated model; `None` on rounds skipped by the
    /// evaluation interval.
    pub accuracy: Option<f64>,
    /// Mean last-epoch loss of the round's benign clients; `None` without any.
    pub train_loss: Option<f64>,
    pub selected: Vec<usize>,
    pub malicious_selected: usize,
    pub malicious_admitted: usize,
    pub defense_ms: f64,
    pub attack_ms: f64,
}

/// Shortest representation that parses back to the same `f64`, so metrics
/// recomputed from the CSV equal those computed in memory.
fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::invalid(format!("bad {what} value `{field}`")))
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::invalid(format!("bad {what} value `{field}`")))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

impl RoundRecord {
    fn to_fields(&self) -> [String; 8] {
        [
            self.round.to_string(),
            fmt_opt(self.accuracy),
            fmt_opt(self.train_loss),
            self.selected.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
            self.malicious_selected.to_string(),
            self.malicious_admitted.to_string(),
            format!("{:.3}", self.defense_ms),
            format!("{:.3}", self.attack_ms),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != CSV_HEADER.len() {
            return Err(Error::invalid(format!("csv row has {} fields, expected 8", r.len())));
        }
        let selected = if r[3].is_empty() {
            Vec::new()
        } else {
            r[3].split(';').map(|s| parse(s, "selected")).collect::<Result<_>>()?
        };
        Ok(Self {
            round: parse(&r[0], "round")?,
            accuracy: parse_opt(&r[1], "accuracy")?,
            train_loss: parse_opt(&r[2], "train_loss")?,
            selected,
            malicious_selected: parse(&r[4], "malicious_selected")?,
            malicious_admitted: parse(&r[5], "malicious_admitted")?,
            defense_ms: parse(&r[6], "defense_ms")?,
            attack_ms: parse(&r[7], "attack_ms")?,
        })
    }
}

pub fn write_csv<W: std::io::Write>(out: W, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in records {
        w.write_record(r.to_fields()).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[RoundRecord]) -> Result<()> {
    write_csv(std::io::BufWriter::new(std::fs::File::create(path)?), records)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<RoundRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::invalid(format!("unexpected csv header {:?}", header)));
    }
    r.records()
        .map(|row| RoundRecord::from_fields(&row.map_err(csv_error)?))
        .collect()
}

pub fn read_csv_file(path: &Path) -> Result<Vec<RoundRecord>> {
    read_csv(std::fs::File::open(path)?)
}

/// `(acc − acc_m) / acc · 100`; negative when the attacked run beats the baseline.
pub fn asr(acc: f64, acc_m: f64) -> Result<f64> {
    if acc.is_nan() || acc <= 0.0 {
        return Err(Error::UndefinedMetric(format!("ASR needs a positive baseline accuracy, got {acc}")));
    }
    Ok((acc - acc_m) / acc * 100.0)
}

/// `N_p / N_s · 100`; `None` when no attacker was ever selected.
pub fn dpr(n_p: usize, n_s: usize) -> Option<f64> {
    (n_s > 0).then(|| n_p as f64 / n_s as f64 * 100.0)
}

/// Aggregates recomputable from a run's records alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunTotals {
    /// Largest evaluated accuracy.
    pub max_accuracy: f64,
    /// Accuracy of the last evaluated round.
    pub final_accuracy: f64,
    pub n_s: usize,
    pub n_p: usize,
}

pub fn totals(records: &[RoundRecord]) -> Result<RunTotals> {
    let evaluated: Vec<f64> = records.iter().filter_map(|r| r.accuracy).collect();
    let final_accuracy = *evaluated
        .last()
        .ok_or_else(|| Error::UndefinedMetric("run has no evaluated round".into()))?;
    Ok(RunTotals {
        max_accuracy: evaluated.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        final_accuracy,
        n_s: records.iter().map(|r| r.malicious_selected).sum(),
        n_p: records.iter().map(|r| r.malicious_admitted).sum(),
    })
}

/// One run's headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Baseline accuracy of the paired attack-free, defense-free run.
    pub acc: Option<f64>,
    /// Maximum accuracy under attack.
    pub acc_m: f64,
    pub asr_pct: Option<f64>,
    /// Defense pass rate; null for statistic defenses or when no attacker was selected.
    pub dpr_pct: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
    pub final_accuracy: f64,
    pub n_s: usize,
    pub n_p: usize,
    pub attack: String,
    pub defense: String,
    pub rounds_csv: String,
}

impl Summary {
    /// Derive every metric from the records. `selection_based` says whether
    /// the defense filters updates, the only case where DPR is reported.
    pub fn from_records(
        records: &[RoundRecord],
        baseline_acc: Option<f64>,
        selection_based: bool,
        meta: SummaryMeta,
    ) -> Result<Self> {
        let t = totals(records)?;
        let asr_pct = match baseline_acc {
            Some(acc) => Some(asr(acc, t.max_accuracy)?),
            None => None,
        };
        Ok(Self {
            acc: baseline_acc,
            acc_m: t.max_accuracy,
            asr_pct,
            dpr_pct: if selection_based { dpr(t.n_p, t.n_s) } else { None },
            config_hash: meta.config_hash,
            seed: meta.seed,
            final_accuracy: t.final_accuracy,
            n_s: t.n_s,
            n_p: t.n_p,
            attack: meta.attack,
            defense: meta.defense,
            rounds_csv: meta.rounds_csv,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryMeta {
    pub config_hash: String,
    pub seed: u64,
    pub attack: String,
    pub defense: String,
    pub rounds_csv: String,
}

/// Per-unit costs of RefD, in any consistent time unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefdCostModel {
    /// One classifier evaluation on one reference sample.
    pub inference: f64,
    /// Histogram and max-probability bookkeeping per reference sample.
    pub scoring: f64,
    /// Ranking cost per update.
    pub selection: f64,
}

/// Predicted RefD cost for `K` updates and `|D_r|` reference samples:
/// `|D_r|·K·(inference + scoring) + K·selection`.
pub fn overhead_estimate(reference_size: usize, k: usize, cost: RefdCostModel) -> f64 {
    let per_update = reference_size as f64 * (cost.inference + cost.scoring) + cost.selection;
    k as f64 * per_update
}
