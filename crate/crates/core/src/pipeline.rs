//! End-to-end imputation: seed, bound, project, optimize the angle, build
//! three corrected candidates, and superimpose their mean onto masked cells.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{
    compute_stats_with, impute_central, CentralTendency, ImputationStats, StatsBasis,
};
use crate::correct::{clamp_bounds, PenaltyConfig};
use crate::error::{Error, Result};
use crate::optimize::{
    minimize, CostBreakdown, CostContext, Evaluation, Method, OptimizerConfig, RankedAngle, TOP_N,
};
use crate::pca::{choose_components, fit, project, PcaModel};
use crate::seed::stage_seed;
use crate::tabular::{derive_mask, Dataset, MissingMask};

pub const DEFAULT_IMPUTE_COLUMNS: [&str; 6] = [
    "SkinThickness",
    "Insulin",
    "BloodPressure",
    "BMI",
    "Glucose",
    "DiabetesPedigreeFunction",
];

/// Which table the metrics compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The central-tendency-seeded table.
    #[default]
    Imputed,
    /// The input as loaded, zeros included.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed. Required; nothing is drawn from the environment.
    pub seed: Option<u64>,
    /// Non-feature column; empty for none.
    pub target_column: String,
    pub impute_columns: Vec<String>,
    /// Defaults to every column except the target.
    pub pca_features: Option<Vec<String>>,
    /// Defaults to the largest power of two not above the feature count.
    pub components: Option<usize>,
    pub central_tendency: CentralTendency,
    /// Center used for the bounds; defaults to `central_tendency`.
    pub stats_measure: Option<CentralTendency>,
    pub stats_basis: StatsBasis,
    pub penalty: PenaltyConfig,
    pub optimizer: OptimizerConfig,
    pub lambda_band: f64,
    pub lambda_out: f64,
    pub reference: Reference,
    pub knn_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            target_column: "Outcome".to_string(),
            impute_columns: DEFAULT_IMPUTE_COLUMNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            pca_features: None,
            components: None,
            central_tendency: CentralTendency::Mean,
            stats_measure: None,
            stats_basis: StatsBasis::Nonzero,
            penalty: PenaltyConfig::default(),
            optimizer: OptimizerConfig::default(),
            lambda_band: 1.0,
            lambda_out: 1.0,
            reference: Reference::Imputed,
            knn_k: 5,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("seed required".to_string()))
    }

    pub fn target(&self) -> Option<&str> {
        (!self.target_column.is_empty()).then_some(self.target_column.as_str())
    }

    pub fn features_for(&self, d: &Dataset) -> Vec<String> {
        self.pca_features
            .clone()
            .unwrap_or_else(|| d.feature_names())
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        self.master_seed()?;
        self.penalty.validate()?;
        if !(self.lambda_band >= 0.0 && self.lambda_out >= 0.0) {
            return Err(Error::Config("penalty weights must be non-negative".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        if let Some(f) = &self.pca_features {
            if let Some(c) = self.impute_columns.iter().find(|c| !f.contains(c)) {
                return Err(Error::Config(format!(
                    "impute column {c:?} is not in pca_features"
                )));
            }
        }
        self.optimizer.validate()
    }
}

/// Data-dependent state shared by every optimizer run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub original: Dataset,
    pub mask: MissingMask,
    pub seeded: Dataset,
    pub stats: ImputationStats,
    pub pca: PcaModel,
    pub scores: ndarray::Array2<f64>,
    pub seeds: Vec<(String, u64)>,
    pub timings: Vec<(String, f64)>,
}

impl Prepared {
    fn penalty_seed(&self) -> u64 {
        self.seeds
            .iter()
            .find(|(n, _)| n == "penalty")
            .map(|s| s.1)
            .expect("penalty seed recorded in prepare")
    }

    pub fn cost_context<'a>(&'a self, cfg: &'a PipelineConfig) -> CostContext<'a> {
        CostContext {
            z: &self.scores,
            pca: &self.pca,
            stats: &self.stats,
            mask: &self.mask,
            original: &self.original,
            penalty: &cfg.penalty,
            lambda_band: cfg.lambda_band,
            lambda_out: cfg.lambda_out,
            seed: self.penalty_seed(),
        }
    }

    pub fn reference(&self, r: Reference) -> &Dataset {
        match r {
            Reference::Imputed => &self.seeded,
            Reference::Raw => &self.original,
        }
    }
}

fn timed<T>(
    timings: &mut Vec<(String, f64)>,
    stage: &str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f();
    timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
    out
}

pub fn prepare(d: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let master = cfg.master_seed()?;
    let mut timings = Vec::new();
    let mask = timed(&mut timings, "mask", || derive_mask(d, &cfg.impute_columns))
        .map_err(Error::in_stage("mask"))?;
    let seeded = timed(&mut timings, "seed_impute", || {
        impute_central(d, &mask, cfg.central_tendency)
    })
    .map_err(Error::in_stage("seed_impute"))?;
    let stats = timed(&mut timings, "stats", || {
        compute_stats_with(
            &seeded,
            d,
            &mask,
            cfg.stats_measure.unwrap_or(cfg.central_tendency),
            cfg.stats_basis,
        )
    })
    .map_err(Error::in_stage("stats"))?;
    let features = cfg.features_for(d);
    if let Some(c) = cfg.impute_columns.iter().find(|c| !features.contains(c)) {
        return Err(Error::Config(format!(
            "impute column {c:?} is not a PCA feature"
        )));
    }
    let (pca, scores) = timed(&mut timings, "pca", || {
        let k = match cfg.components {
            Some(k) => k,
            None => choose_components(features.len())?,
        };
        let pca = fit(&seeded, &features, k)?;
        let scores = project(&pca, &seeded)?;
        Ok((pca, scores))
    })
    .map_err(Error::in_stage("pca"))?;
    let mut seeds = vec![
        ("master".to_string(), master),
        ("penalty".to_string(), stage_seed(master, "penalty", 0)),
    ];
    for (i, m) in Method::ALL.iter().enumerate() {
        seeds.push((
            format!("optimize.{}", m.label()),
            stage_seed(master, "optimize", i as u64),
        ));
    }
    Ok(Prepared {
        original: d.clone(),
        mask,
        seeded,
        stats,
        pca,
        scores,
        seeds,
        timings,
    })
}

#[derive(Debug, Clone)]
pub struct RotationCandidate {
    pub theta: f64,
    pub cost: CostBreakdown,
    /// Full-width corrected reconstruction.
    pub data: Dataset,
    /// Seed of the anti-clustering weights used to build it.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub seed: u64,
    pub candidates: Vec<RotationCandidate>,
    pub history: Vec<Evaluation<CostBreakdown>>,
    pub seconds: f64,
}

impl MethodRun {
    /// Report column names, e.g. `DE_1`.
    pub fn labels(&self) -> Vec<String> {
        (1..=self.candidates.len())
            .map(|i| format!("{}_{i}", self.method.label()))
            .collect()
    }
}

pub fn optimize_angles(p: &Prepared, cfg: &PipelineConfig, method: Method) -> Result<MethodRun> {
    let start = Instant::now();
    let idx = Method::ALL
        .iter()
        .position(|&m| m == method)
        .expect("known method");
    let seed = stage_seed(cfg.master_seed()?, "optimize", idx as u64);
    let opt = OptimizerConfig {
        method,
        seed,
        ..cfg.optimizer.clone()
    };
    let ctx = p.cost_context(cfg);
    let run = minimize(|t| ctx.evaluate(t), &opt).map_err(Error::in_stage("optimize"))?;
    let candidates = run
        .top
        .angles()
        .iter()
        .map(|&RankedAngle { theta, .. }| {
            let (values, _) = ctx.corrected_table(theta)?;
            Ok(RotationCandidate {
                theta,
                cost: ctx.try_evaluate(theta)?,
                data: p.original.with_values(values)?,
                seed: ctx.seed,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(Error::in_stage("candidates"))?;
    Ok(MethodRun {
        method,
        seed,
        candidates,
        history: run.history,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Cell-wise mean of three candidates at masked cells; other cells come
/// from `c1`.
pub fn average_candidates(
    c1: &Dataset,
    c2: &Dataset,
    c3: &Dataset,
    mask: &MissingMask,
) -> Result<Dataset> {
    let dim = c1.values().dim();
    if c2.values().dim() != dim || c3.values().dim() != dim || mask.entries().dim() != dim {
        return Err(Error::Shape("candidate tables are not aligned".to_string()));
    }
    let mut v = c1.values().clone();
    for (r, c) in mask.cells() {
        v[[r, c]] = (c1.get(r, c) + c2.get(r, c) + c3.get(r, c)) / 3.0;
    }
    c1.with_values(v)
}

/// Writes `averaged` into `original` at masked cells, re-clamped to bounds.
pub fn superimpose(
    original: &Dataset,
    averaged: &Dataset,
    stats: &ImputationStats,
    mask: &MissingMask,
) -> Result<Dataset> {
    if averaged.values().dim() != original.values().dim() {
        return Err(Error::Shape(
            "averaged table does not match the original".to_string(),
        ));
    }
    let mut v = original.values().clone();
    for (r, c) in mask.cells() {
        let id = original.ids()[r];
        let rec = stats.lookup(id, c).ok_or_else(|| Error::MissingStats {
            row: id,
            column: original.column_names()[c].clone(),
        })?;
        v[[r, c]] = clamp_bounds(averaged.get(r, c), rec.lower, rec.upper)?;
    }
    original.with_values(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfBounds {
        row_id: u64,
        column: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    Zero {
        row_id: u64,
        column: String,
    },
    ObservedMutation {
        row_id: u64,
        column: String,
        expected: f64,
        found: f64,
    },
    MissingStats {
        row_id: u64,
        column: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_final(
    final_data: &Dataset,
    original: &Dataset,
    stats: &ImputationStats,
    mask: &MissingMask,
) -> ValidationReport {
    let mut violations = Vec::new();
    if final_data.values().dim() != original.values().dim()
        || mask.entries().dim() != original.values().dim()
    {
        violations.push(Violation::ObservedMutation {
            row_id: 0,
            column: "<shape>".to_string(),
            expected: original.n_rows() as f64,
            found: final_data.n_rows() as f64,
        });
        return ValidationReport { violations };
    }
    let names = original.column_names();
    for ((r, c), &orig) in original.values().indexed_iter() {
        let id = original.ids()[r];
        let x = final_data.get(r, c);
        if !mask.is_missing(r, c) {
            if x.to_bits() != orig.to_bits() {
                violations.push(Violation::ObservedMutation {
                    row_id: id,
                    column: names[c].clone(),
                    expected: orig,
                    found: x,
                });
            }
            continue;
        }
        if x == 0.0 {
            violations.push(Violation::Zero {
                row_id: id,
                column: names[c].clone(),
            });
        }
        match stats.lookup(id, c) {
            Some(rec) if !(rec.lower <= x && x <= rec.upper) => {
                violations.push(Violation::OutOfBounds {
                    row_id: id,
                    column: names[c].clone(),
                    value: x,
                    lower: rec.lower,
                    upper: rec.upper,
                })
            }
            Some(_) => {}
            None => violations.push(Violation::MissingStats {
                row_id: id,
                column: names[c].clone(),
            }),
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub final_data: Dataset,
    pub prepared: Prepared,
    pub run: MethodRun,
    pub validation: ValidationReport,
}

impl PipelineOutput {
    pub fn stats(&self) -> &ImputationStats {
        &self.prepared.stats
    }

    pub fn candidates(&self) -> &[RotationCandidate] {
        &self.run.candidates
    }
}

/// Combines one optimizer's candidates into the final table.
pub fn finalize(p: &Prepared, run: &MethodRun) -> Result<(Dataset, ValidationReport)> {
    let [c1, c2, c3] = match run.candidates.as_slice() {
        [a, b, c] => [&a.data, &b.data, &c.data],
        other => {
            return Err(Error::InsufficientMinima { found: other.len() });
        }
    };
    debug_assert_eq!(TOP_N, 3);
    let averaged = average_candidates(c1, c2, c3, &p.mask)?;
    let final_data = superimpose(&p.original, &averaged, &p.stats, &p.mask)?;
    let report = validate_final(&final_data, &p.original, &p.stats, &p.mask);
    Ok((final_data, report))
}

/// Runs the whole pipeline with the configured optimizer.
pub fn run(d: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let mut prepared = prepare(d, cfg)?;
    let run = optimize_angles(&prepared, cfg, cfg.optimizer.method)?;
    prepared
        .timings
        .push((format!("optimize.{}", run.method.label()), run.seconds));
    let start = Instant::now();
    let (final_data, validation) =
        finalize(&prepared, &run).map_err(Error::in_stage("superimpose"))?;
    prepared
        .timings
        .push(("superimpose".to_string(), start.elapsed().as_secs_f64()));
    Ok(PipelineOutput {
        final_data,
        prepared,
        run,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn table(v: ndarray::Array2<f64>) -> Dataset {
        Dataset::new(vec!["a".into(), "b".into()], v, None).unwrap()
    }

    #[test]
    fn averaging_examples() {
        let mask_src = table(array![[0.0, 1.0], [2.0, 3.0]]);
        let mask = derive_mask(&mask_src, &["a".to_string()]).unwrap();
        let c1 = table(array![[1.0, 9.0], [5.0, 5.0]]);
        let c2 = table(array![[2.0, 9.0], [6.0, 5.0]]);
        let c3 = table(array![[3.0, 9.0], [7.0, 5.0]]);
        let avg = average_candidates(&c1, &c2, &c3, &mask).unwrap();
        assert_eq!(avg.get(0, 0), 2.0);
        assert_eq!(avg.get(1, 0), 5.0);
        let same = average_candidates(&c1, &c1, &c1, &mask).unwrap();
        assert_eq!(same, c1);
        let wide = Dataset::new(vec!["x".into()], array![[1.0], [2.0]], None).unwrap();
        assert!(average_candidates(&c1, &c2, &wide, &mask).is_err());
    }

    #[test]
    fn missing_seed_is_config_error() {
        let err = PipelineConfig::default().validate().unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m == "seed required"));
    }

    #[test]
    fn config_toml_round_trip_and_unknown_keys() {
        let cfg = PipelineConfig {
            seed: Some(11),
            ..PipelineConfig::default()
        };
        let back = PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(PipelineConfig::from_toml("seed = 1\nbogus = 2\n").is_err());
        let partial = PipelineConfig::from_toml("seed = 3\n[optimizer]\nbudget = 50\n").unwrap();
        assert_eq!(partial.optimizer.budget, 50);
        assert_eq!(partial.penalty, PenaltyConfig::default());
    }
}
