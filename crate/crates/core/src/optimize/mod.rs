//! Gradient-free search for the rotation angle on `[0, π]`.
//!
//! Every optimizer records each cost evaluation; the three best angles are
//! picked from that full history, not from the final iterates.

mod annealing;
mod cobyla;
pub mod cost;
mod de;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cost::{CostBreakdown, CostContext};

/// Minimum spacing between retained angles, in radians.
pub const MIN_SEPARATION: f64 = 0.05;
pub const TOP_N: usize = 3;
pub const THETA_BOUNDS: (f64, f64) = (0.0, PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DifferentialEvolution,
    Cobyla,
    SimulatedAnnealing,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::DifferentialEvolution,
        Method::Cobyla,
        Method::SimulatedAnnealing,
    ];

    /// Column label prefix used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::DifferentialEvolution => "DE",
            Method::Cobyla => "COBYLA",
            Method::SimulatedAnnealing => "Annealing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeConfig {
    pub population: usize,
    pub mutation: f64,
    pub crossover: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population: 15,
            mutation: 0.8,
            crossover: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingConfig {
    pub initial_temperature: f64,
    pub cooling: f64,
    pub step_sd: f64,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        AnnealingConfig {
            initial_temperature: 1.0,
            cooling: 0.95,
            step_sd: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CobylaConfig {
    pub restarts: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl Default for CobylaConfig {
    fn default() -> Self {
        CobylaConfig {
            restarts: 5,
            rho_begin: 0.3,
            rho_end: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Maximum number of cost evaluations.
    pub budget: usize,
    /// Set by the caller from the run's master seed, never read from config.
    #[serde(skip)]
    pub seed: u64,
    pub de: DeConfig,
    pub annealing: AnnealingConfig,
    pub cobyla: CobylaConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::DifferentialEvolution,
            budget: 200,
            seed: 0,
            de: DeConfig::default(),
            annealing: AnnealingConfig::default(),
            cobyla: CobylaConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("optimizer budget must be positive".into()));
        }
        match self.method {
            Method::DifferentialEvolution => {
                if self.de.population < 4 {
                    return Err(Error::Config("DE population must be at least 4".into()));
                }
                if self.budget < self.de.population {
                    return Err(Error::Config(format!(
                        "budget {} is below the DE population {}",
                        self.budget, self.de.population
                    )));
                }
                if !(self.de.mutation > 0.0 && self.de.mutation <= 2.0)
                    || !(0.0..=1.0).contains(&self.de.crossover)
                {
                    return Err(Error::Config(
                        "DE needs F in (0, 2] and CR in [0, 1]".into(),
                    ));
                }
            }
            Method::SimulatedAnnealing => {
                let a = &self.annealing;
                if !(a.initial_temperature > 0.0
                    && a.cooling > 0.0
                    && a.cooling < 1.0
                    && a.step_sd > 0.0)
                {
                    return Err(Error::Config(
                        "annealing needs T0 > 0, cooling in (0, 1), step_sd > 0".into(),
                    ));
                }
            }
            Method::Cobyla => {
                let c = &self.cobyla;
                if c.restarts == 0 || !(c.rho_begin > c.rho_end && c.rho_end > 0.0) {
                    return Err(Error::Config(
                        "COBYLA needs restarts >= 1 and rho_begin > rho_end > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Anything an optimizer can rank by a scalar.
pub trait Scored: Clone + Send {
    fn total(&self) -> f64;
}

impl Scored for f64 {
    fn total(&self) -> f64 {
        *self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<S> {
    pub index: usize,
    pub theta: f64,
    pub score: S,
}

impl<S: Scored> Evaluation<S> {
    /// Cost with NaN mapped to +∞.
    pub fn cost(&self) -> f64 {
        let c = self.score.total();
        if c.is_nan() {
            f64::INFINITY
        } else {
            c
        }
    }
}

/// Budgeted, history-recording wrapper around a cost function.
pub(crate) struct Evaluator<'f, F, S> {
    f: &'f F,
    budget: usize,
    history: Vec<Evaluation<S>>,
}

impl<'f, F, S> Evaluator<'f, F, S>
where
    F: Fn(f64) -> S + Sync,
    S: Scored,
{
    fn new(f: &'f F, budget: usize) -> Self {
        Evaluator {
            f,
            budget,
            history: Vec::with_capacity(budget),
        }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.budget - self.history.len()
    }

    fn push(&mut self, theta: f64, score: S) -> f64 {
        let e = Evaluation {
            index: self.history.len(),
            theta,
            score,
        };
        let c = e.cost();
        self.history.push(e);
        c
    }

    /// `None` once the budget is spent.
    pub(crate) fn eval(&mut self, theta: f64) -> Option<f64> {
        if self.remaining() == 0 {
            return None;
        }
        let theta = clamp_theta(theta);
        let s = (self.f)(theta);
        Some(self.push(theta, s))
    }

    /// Evaluates as many of `thetas` as the budget allows, in parallel,
    /// recording them in input order.
    pub(crate) fn eval_batch(&mut self, thetas: &[f64]) -> Vec<f64> {
        let n = thetas.len().min(self.remaining());
        let f = self.f;
        let scores: Vec<(f64, S)> = thetas[..n]
            .par_iter()
            .map(|&t| {
                let t = clamp_theta(t);
                (t, f(t))
            })
            .collect();
        scores.into_iter().map(|(t, s)| self.push(t, s)).collect()
    }
}

pub(crate) fn clamp_theta(theta: f64) -> f64 {
    theta.max(THETA_BOUNDS.0).min(THETA_BOUNDS.1)
}

/// Reflects a point back into the angle domain.
pub(crate) fn reflect_theta(theta: f64) -> f64 {
    let (lo, hi) = THETA_BOUNDS;
    let t = if theta < lo {
        lo + (lo - theta)
    } else if theta > hi {
        hi - (theta - hi)
    } else {
        theta
    };
    clamp_theta(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedAngle {
    pub theta: f64,
    pub cost: f64,
}

/// Exactly three angles, ascending cost, pairwise separated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopAngles {
    angles: [RankedAngle; TOP_N],
}

impl TopAngles {
    pub fn angles(&self) -> &[RankedAngle; TOP_N] {
        &self.angles
    }

    pub fn best(&self) -> RankedAngle {
        self.angles[0]
    }
}

/// Picks the lowest-cost finite evaluations that are at least
/// [`MIN_SEPARATION`] apart. Ties in cost go to the earlier evaluation.
pub fn select_top_angles<S: Scored>(history: &[Evaluation<S>]) -> Result<TopAngles> {
    let mut ranked: Vec<&Evaluation<S>> = history.iter().filter(|e| e.cost().is_finite()).collect();
    ranked.sort_by(|a, b| a.cost().total_cmp(&b.cost()).then(a.index.cmp(&b.index)));
    let mut picked: Vec<RankedAngle> = Vec::with_capacity(TOP_N);
    for e in ranked {
        if picked
            .iter()
            .all(|p| (p.theta - e.theta).abs() >= MIN_SEPARATION)
        {
            picked.push(RankedAngle {
                theta: e.theta,
                cost: e.cost(),
            });
            if picked.len() == TOP_N {
                break;
            }
        }
    }
    let found = picked.len();
    let angles: [RankedAngle; TOP_N] = picked
        .try_into()
        .map_err(|_| Error::InsufficientMinima { found })?;
    Ok(TopAngles { angles })
}

#[derive(Debug, Clone)]
pub struct Minimization<S> {
    pub method: Method,
    pub top: TopAngles,
    pub history: Vec<Evaluation<S>>,
}

/// Runs the configured optimizer and returns its top three angles with the
/// full evaluation history.
pub fn minimize<F, S>(cost_fn: F, cfg: &OptimizerConfig) -> Result<Minimization<S>>
where
    F: Fn(f64) -> S + Sync,
    S: Scored,
{
    cfg.validate()?;
    let mut ev = Evaluator::new(&cost_fn, cfg.budget);
    match cfg.method {
        Method::DifferentialEvolution => de::run(&mut ev, &cfg.de, cfg.seed),
        Method::Cobyla => cobyla::run(&mut ev, &cfg.cobyla),
        Method::SimulatedAnnealing => annealing::run(&mut ev, &cfg.annealing, cfg.seed),
    }
    let history = ev.history;
    let top = select_top_angles(&history)?;
    Ok(Minimization {
        method: cfg.method,
        top,
        history,
    })
}

/// Appends one line per evaluation: method, index, θ, deviation, penalties,
/// total.
pub fn write_trace(
    out: &mut impl Write,
    method: Method,
    history: &[Evaluation<CostBreakdown>],
) -> std::io::Result<()> {
    for e in history {
        let s = &e.score;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            method.label(),
            e.index,
            e.theta,
            s.deviation,
            s.band_penalty,
            s.bound_penalty,
            s.total
        )?;
    }
    Ok(())
}

pub fn write_trace_file(
    path: &Path,
    runs: &[(Method, &[Evaluation<CostBreakdown>])],
) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(
        out,
        "method,eval,theta,deviation,band_penalty,bound_penalty,total"
    )
    .map_err(io_err)?;
    for (m, h) in runs {
        write_trace(&mut out, *m, h).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(points: &[(f64, f64)]) -> Vec<Evaluation<f64>> {
        points
            .iter()
            .enumerate()
            .map(|(index, &(theta, score))| Evaluation {
                index,
                theta,
                score,
            })
            .collect()
    }

    #[test]
    fn top_angles_respect_separation() {
        let h = hist(&[
            (1.0, 0.0),
            (1.01, 0.0001),
            (1.04, 0.0002),
            (1.2, 0.04),
            (2.0, 1.0),
        ]);
        let top = select_top_angles(&h).unwrap();
        let thetas: Vec<f64> = top.angles().iter().map(|a| a.theta).collect();
        assert_eq!(thetas, vec![1.0, 1.2, 2.0]);
    }

    #[test]
    fn infinite_costs_are_skipped() {
        let h = hist(&[
            (0.1, f64::INFINITY),
            (0.5, 1.0),
            (1.5, f64::NAN),
            (2.5, 2.0),
        ]);
        assert!(matches!(
            select_top_angles(&h),
            Err(Error::InsufficientMinima { found: 2 })
        ));
    }

    #[test]
    fn budget_below_population_is_config_error() {
        let cfg = OptimizerConfig {
            budget: 10,
            ..OptimizerConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn reflection_stays_in_domain() {
        assert_eq!(reflect_theta(-0.2), 0.2);
        assert!((reflect_theta(PI + 0.3) - (PI - 0.3)).abs() < 1e-15);
        assert_eq!(reflect_theta(-10.0), PI);
    }

    #[test]
    fn history_never_exceeds_budget() {
        for method in Method::ALL {
            let cfg = OptimizerConfig {
                method,
                budget: 37,
                seed: 4,
                ..OptimizerConfig::default()
            };
            let run = minimize(|t: f64| (t - 2.0).powi(2), &cfg).unwrap();
            assert!(run.history.len() <= 37, "{method:?}");
            assert!(run.history.iter().all(|e| (0.0..=PI).contains(&e.theta)));
        }
    }
}
