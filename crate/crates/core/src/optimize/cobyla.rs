//! Linear-approximation trust region in one dimension, restarted from the
//! midpoints of an even grid over the angle domain.
//!
//! The model is the line through the two most recent vertices. A step of
//! length `rho` goes downhill along it; a failed step halves `rho`. Each
//! restart stops at `rho_end` or when its share of the budget runs out.

use std::f64::consts::PI;

use super::{clamp_theta, CobylaConfig, Evaluator, Scored};

pub(super) fn run<F, S>(ev: &mut Evaluator<'_, F, S>, cfg: &CobylaConfig)
where
    F: Fn(f64) -> S + Sync,
    S: Scored,
{
    let n = cfg.restarts;
    for i in 0..n {
        let share = ev.remaining() / (n - i);
        if share < 2 {
            continue;
        }
        let start = (i as f64 + 0.5) * PI / n as f64;
        let stop_at = ev.remaining() - share;
        descend(ev, start, cfg, stop_at);
    }
}

fn descend<F, S>(ev: &mut Evaluator<'_, F, S>, start: f64, cfg: &CobylaConfig, stop_at: usize)
where
    F: Fn(f64) -> S + Sync,
    S: Scored,
{
    let mut rho = cfg.rho_begin;
    let eval = |ev: &mut Evaluator<'_, F, S>, t: f64| {
        if ev.remaining() <= stop_at {
            None
        } else {
            ev.eval(t)
        }
    };
    let (mut x0, mut x1) = (start, {
        let up = start + rho;
        if up > PI {
            start - rho
        } else {
            up
        }
    });
    let Some(mut f0) = eval(ev, x0) else { return };
    let Some(mut f1) = eval(ev, x1) else { return };
    if f1 < f0 {
        std::mem::swap(&mut x0, &mut x1);
        std::mem::swap(&mut f0, &mut f1);
    }
    while rho > cfg.rho_end {
        // x0 is the best vertex; head away from x1 unless the line says otherwise
        let away = (x0 - x1).signum();
        let slope = (f1 - f0) / (x1 - x0);
        let dir = if slope.is_finite() && slope != 0.0 {
            -slope.signum()
        } else {
            away
        };
        let trial = clamp_theta(x0 + dir * rho);
        if trial == x0 {
            rho *= 0.5;
            let back = clamp_theta(x0 - dir * rho);
            let Some(fb) = eval(ev, back) else { return };
            if fb < f0 {
                (x1, f1) = (x0, f0);
                (x0, f0) = (back, fb);
            } else {
                (x1, f1) = (back, fb);
            }
            continue;
        }
        let Some(ft) = eval(ev, trial) else { return };
        if ft < f0 {
            (x1, f1) = (x0, f0);
            (x0, f0) = (trial, ft);
        } else {
            (x1, f1) = (trial, ft);
            rho *= 0.5;
        }
    }
}
