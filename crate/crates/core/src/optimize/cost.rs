//! Cost of a rotation angle: observed-cell fidelity plus penalties for
//! masked cells that needed clamping or sat too close to their center.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Scored;
use crate::baseline::ImputationStats;
use crate::correct::{correct_values, CorrectionTally, PenaltyConfig, WeightStream};
use crate::error::{Error, Result};
use crate::pca::{reconstruct_values, PcaModel};
use crate::qrotate::rotate_table;
use crate::tabular::{Dataset, MissingMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub theta: f64,
    pub deviation: f64,
    pub band_penalty: f64,
    pub bound_penalty: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn infeasible(theta: f64) -> Self {
        CostBreakdown {
            theta,
            deviation: f64::INFINITY,
            band_penalty: f64::INFINITY,
            bound_penalty: f64::INFINITY,
            total: f64::INFINITY,
        }
    }
}

impl Scored for CostBreakdown {
    fn total(&self) -> f64 {
        self.total
    }
}

/// Everything a cost evaluation needs, fixed for one optimizer run.
#[derive(Debug, Clone, Copy)]
pub struct CostContext<'a> {
    /// Component scores of the seeded table, n × k.
    pub z: &'a Array2<f64>,
    pub pca: &'a PcaModel,
    pub stats: &'a ImputationStats,
    pub mask: &'a MissingMask,
    pub original: &'a Dataset,
    pub penalty: &'a PenaltyConfig,
    pub lambda_band: f64,
    pub lambda_out: f64,
    /// Seed of the anti-clustering weights; combined with θ per cell.
    pub seed: u64,
}

impl CostContext<'_> {
    /// Dataset column index of each PCA feature.
    fn feature_columns(&self) -> Result<Vec<usize>> {
        self.pca
            .feature_names
            .iter()
            .map(|n| self.original.column_index(n))
            .collect()
    }

    /// The corrected reconstruction at `theta` in the original's full column
    /// layout. Columns outside the PCA features are copied from the original.
    pub fn corrected_table(&self, theta: f64) -> Result<(Array2<f64>, CorrectionTally)> {
        let cols = self.feature_columns()?;
        for &c in self.mask.impute_indices() {
            if !cols.contains(&c) {
                return Err(Error::Config(format!(
                    "impute column {} is not a PCA feature",
                    self.original.column_names()[c]
                )));
            }
        }
        let rotated = rotate_table(self.z, theta)?;
        let x_hat = reconstruct_values(self.pca, &rotated)?;
        let mut values = self.original.values().clone();
        for (j, &c) in cols.iter().enumerate() {
            values.column_mut(c).assign(&x_hat.column(j));
        }
        let stream = WeightStream {
            seed: self.seed,
            theta,
        };
        let tally = correct_values(
            &mut values,
            self.original.ids(),
            self.stats,
            self.mask,
            self.penalty,
            stream,
        )?;
        Ok((values, tally))
    }

    pub fn try_evaluate(&self, theta: f64) -> Result<CostBreakdown> {
        let (values, tally) = self.corrected_table(theta)?;
        let cols = self.feature_columns()?;
        let orig = self.original.values();
        let mut sum = 0.0;
        let mut count = 0usize;
        for (j, &c) in cols.iter().enumerate() {
            let sigma = self.pca.sigma[j];
            for r in 0..orig.nrows() {
                if !self.mask.is_missing(r, c) {
                    sum += (values[[r, c]] - orig[[r, c]]).abs() / sigma;
                    count += 1;
                }
            }
        }
        let deviation = if count == 0 { 0.0 } else { sum / count as f64 };
        let (band_penalty, bound_penalty) = if tally.masked == 0 {
            (0.0, 0.0)
        } else {
            let m = tally.masked as f64;
            (tally.in_band as f64 / m, tally.out_of_bounds as f64 / m)
        };
        Ok(CostBreakdown {
            theta,
            deviation,
            band_penalty,
            bound_penalty,
            total: deviation + self.lambda_band * band_penalty + self.lambda_out * bound_penalty,
        })
    }

    /// Rotation failures become an infinite cost so a search never aborts.
    pub fn evaluate(&self, theta: f64) -> CostBreakdown {
        match self.try_evaluate(theta) {
            Ok(c) => c,
            Err(e) => {
                log::debug!("theta {theta}: {e}");
                CostBreakdown::infeasible(theta)
            }
        }
    }
}
