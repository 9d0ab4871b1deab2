//! Metropolis annealing with geometric cooling and Gaussian proposals.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{reflect_theta, AnnealingConfig, Evaluator, Scored, THETA_BOUNDS};

pub(super) fn run<F, S>(ev: &mut Evaluator<'_, F, S>, cfg: &AnnealingConfig, seed: u64)
where
    F: Fn(f64) -> S + Sync,
    S: Scored,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, cfg.step_sd).expect("validated step_sd");
    let (lo, hi) = THETA_BOUNDS;
    let mut x = rng.random_range(lo..=hi);
    let Some(mut fx) = ev.eval(x) else { return };
    let mut t = cfg.initial_temperature;
    loop {
        let cand = reflect_theta(x + step.sample(&mut rng));
        let Some(fc) = ev.eval(cand) else { break };
        let accept = if fc <= fx {
            true
        } else if fx.is_infinite() {
            fc.is_finite()
        } else {
            rng.random::<f64>() < (-(fc - fx) / t).exp()
        };
        if accept {
            x = cand;
            fx = fc;
        }
        t *= cfg.cooling;
    }
}
