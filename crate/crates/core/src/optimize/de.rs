//! DE/rand/1/bin on a single coordinate.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{reflect_theta, DeConfig, Evaluator, Scored, THETA_BOUNDS};

pub(super) fn run<F, S>(ev: &mut Evaluator<'_, F, S>, cfg: &DeConfig, seed: u64)
where
    F: Fn(f64) -> S + Sync,
    S: Scored,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = THETA_BOUNDS;
    let np = cfg.population;
    let mut pop: Vec<f64> = (0..np).map(|_| rng.random_range(lo..=hi)).collect();
    let mut fit = ev.eval_batch(&pop);

    while ev.remaining() > 0 {
        let trials: Vec<f64> = (0..np)
            .map(|i| {
                // three distinct donors, none equal to the target
                let picks = sample(&mut rng, np - 1, 3);
                let idx: Vec<usize> = picks
                    .iter()
                    .map(|p| if p >= i { p + 1 } else { p })
                    .collect();
                let mutant =
                    reflect_theta(pop[idx[0]] + cfg.mutation * (pop[idx[1]] - pop[idx[2]]));
                // Binomial crossover always keeps one mutant coordinate; with a
                // single coordinate every trial is the mutant and CR is moot.
                mutant
            })
            .collect();
        let costs = ev.eval_batch(&trials);
        for (i, c) in costs.into_iter().enumerate() {
            if c <= fit[i] {
                pop[i] = trials[i];
                fit[i] = c;
            }
        }
    }
}
