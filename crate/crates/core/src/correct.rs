//! Post-reconstruction correction of imputed cells: ±2σ clamping followed by
//! a randomized push away from the imputation center.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::ImputationStats;
use crate::error::{Error, Result};
use crate::seed::cell_rng;
use crate::tabular::{Dataset, MissingMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyDirection {
    /// Values below the center move down, values at or above it move up.
    #[default]
    AwayFromCenter,
    /// Reversed signs: below the center moves up,
    /// above it moves down.
    AsWritten,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub closeness_fraction: f64,
    pub weight_low: f64,
    pub weight_high: f64,
    pub direction: PenaltyDirection,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            closeness_fraction: 0.05,
            weight_low: 0.1,
            weight_high: 0.5,
            direction: PenaltyDirection::AwayFromCenter,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.closeness_fraction > 0.0 && self.closeness_fraction < 0.5) {
            return Err(Error::Config(format!(
                "closeness_fraction {} not in (0, 0.5)",
                self.closeness_fraction
            )));
        }
        if !(0.0 <= self.weight_low
            && self.weight_low <= self.weight_high
            && self.weight_high <= 1.0)
        {
            return Err(Error::Config(format!(
                "penalty weights must satisfy 0 <= low <= high <= 1, got [{}, {}]",
                self.weight_low, self.weight_high
            )));
        }
        Ok(())
    }

    /// Whether `x` sits strictly inside the closeness band around `center`.
    pub fn in_band(&self, x: f64, center: f64, lower: f64, upper: f64) -> bool {
        (x - center).abs() < self.closeness_fraction * (upper - lower)
    }
}

pub fn clamp_bounds(x: f64, lower: f64, upper: f64) -> Result<f64> {
    if lower > upper {
        return Err(Error::InvalidArgument(format!(
            "lower bound {lower} exceeds upper bound {upper}"
        )));
    }
    Ok(x.max(lower).min(upper))
}

pub fn anti_cluster(
    x: f64,
    center: f64,
    lower: f64,
    upper: f64,
    w: f64,
    cfg: &PenaltyConfig,
) -> f64 {
    if !cfg.in_band(x, center, lower, upper) {
        return x;
    }
    let delta = (x - lower).abs().min((x - upper).abs());
    let below = x < center;
    let shifted = match (cfg.direction, below) {
        (PenaltyDirection::AwayFromCenter, true) => x - w * delta,
        (PenaltyDirection::AwayFromCenter, false) => x + w * delta,
        (PenaltyDirection::AsWritten, true) => x + w * delta,
        (PenaltyDirection::AsWritten, false) => x - w * delta,
    };
    shifted.max(lower).min(upper)
}

/// Source of the per-cell random weights for one correction pass.
///
/// Each weight is a pure function of `(seed, theta, row id, column)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStream {
    pub seed: u64,
    pub theta: f64,
}

impl WeightStream {
    pub fn weight(&self, row_id: u64, col: usize, cfg: &PenaltyConfig) -> f64 {
        if cfg.weight_low == cfg.weight_high {
            return cfg.weight_low;
        }
        cell_rng(self.seed, self.theta, row_id, col).random_range(cfg.weight_low..=cfg.weight_high)
    }
}

/// How many masked cells each rule touched, measured before it acted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorrectionTally {
    pub masked: usize,
    pub out_of_bounds: usize,
    pub in_band: usize,
}

/// Corrects masked cells in place. `values` has the dataset's full column
/// layout; `ids` are its row ids.
pub fn correct_values(
    values: &mut Array2<f64>,
    ids: &[u64],
    stats: &ImputationStats,
    mask: &MissingMask,
    cfg: &PenaltyConfig,
    stream: WeightStream,
) -> Result<CorrectionTally> {
    if values.dim() != mask.entries().dim() || ids.len() != values.nrows() {
        return Err(Error::Shape(format!(
            "values {:?} do not match mask {:?}",
            values.dim(),
            mask.entries().dim()
        )));
    }
    let mut tally = CorrectionTally::default();
    for (r, c) in mask.cells() {
        let rec = stats.lookup(ids[r], c).ok_or_else(|| Error::MissingStats {
            row: ids[r],
            column: mask_column_name(mask, c),
        })?;
        let x = values[[r, c]];
        tally.masked += 1;
        if x < rec.lower || x > rec.upper {
            tally.out_of_bounds += 1;
        }
        let clamped = clamp_bounds(x, rec.lower, rec.upper)?;
        if cfg.in_band(clamped, rec.center, rec.lower, rec.upper) {
            tally.in_band += 1;
        }
        let w = stream.weight(ids[r], c, cfg);
        values[[r, c]] = anti_cluster(clamped, rec.center, rec.lower, rec.upper, w, cfg);
    }
    Ok(tally)
}

fn mask_column_name(mask: &MissingMask, col: usize) -> String {
    mask.impute_indices()
        .iter()
        .position(|&c| c == col)
        .map(|i| mask.impute_columns()[i].clone())
        .unwrap_or_else(|| format!("#{col}"))
}

/// Clamps and anti-clusters every masked cell; unmasked cells are untouched.
pub fn correct_reconstruction(
    x_hat: &Dataset,
    stats: &ImputationStats,
    mask: &MissingMask,
    cfg: &PenaltyConfig,
    stream: WeightStream,
) -> Result<Dataset> {
    cfg.validate()?;
    let mut values = x_hat.values().clone();
    correct_values(&mut values, x_hat.ids(), stats, mask, cfg, stream)?;
    x_hat.with_values(values)
}
