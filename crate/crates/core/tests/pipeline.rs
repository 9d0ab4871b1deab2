mod common;

use qimpute::optimize::{CostContext, Method};
use qimpute::pca::{project, reconstruct_values};
use qimpute::pipeline::{prepare, run, validate_final, Reference};
use qimpute::tabular::save_csv;
use qimpute::Dataset;

#[test]
fn diabetes_defaults_fill_every_masked_cell_in_bounds() {
    let d = common::diabetes();
    let out = run(&d, &common::config(42)).unwrap();
    assert!(out.validation.is_clean(), "{:?}", out.validation);
    let p = &out.prepared;
    assert_eq!(p.mask.total(), 652);
    for ((r, c), &orig) in d.values().indexed_iter() {
        let x = out.final_data.get(r, c);
        if p.mask.is_missing(r, c) {
            let rec = p.stats.lookup(d.ids()[r], c).unwrap();
            assert!(x != 0.0 && rec.lower <= x && x <= rec.upper);
        } else {
            assert_eq!(x.to_bits(), orig.to_bits());
        }
    }
    assert_eq!(out.candidates().len(), 3);
    let th: Vec<f64> = out.candidates().iter().map(|c| c.theta).collect();
    for i in 0..3 {
        for j in i + 1..3 {
            assert!((th[i] - th[j]).abs() >= 0.05);
        }
    }
}

#[test]
fn averaged_insulin_is_in_bounds() {
    let d = common::diabetes();
    let out = run(&d, &common::config(7)).unwrap();
    let c = d.column_index("Insulin").unwrap();
    let stats = out.stats().column("Insulin").unwrap();
    for r in (0..d.n_rows()).filter(|&r| out.prepared.mask.is_missing(r, c)) {
        let x = out.final_data.get(r, c);
        assert!(stats.lower() <= x && x <= stats.upper());
    }
}

#[test]
fn whole_run_is_byte_deterministic() {
    let d = common::diabetes();
    let tmp = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for i in 0..2 {
        let out = run(&d, &common::config(5)).unwrap();
        let p = tmp.path().join(format!("run{i}.csv"));
        save_csv(&out.final_data, &p).unwrap();
        texts.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn every_optimizer_yields_a_clean_final() {
    let d = common::diabetes();
    for m in Method::ALL {
        let mut cfg = common::config(9);
        cfg.optimizer.method = m;
        let out = run(&d, &cfg).unwrap();
        assert!(out.validation.is_clean(), "{m:?}");
    }
}

#[test]
fn empty_mask_keeps_original() {
    let d = common::diabetes();
    let mut cfg = common::config(1);
    cfg.impute_columns = vec!["DiabetesPedigreeFunction".to_string()];
    let out = run(&d, &cfg).unwrap();
    assert_eq!(out.final_data, d);
}

/// Deviation at θ = 0 equals the plain rank-k truncation residual.
#[test]
fn zero_angle_cost_is_truncation_error() {
    let d = common::diabetes();
    for k in [4, 8] {
        let mut cfg = common::config(2);
        cfg.components = Some(k);
        let p = prepare(&d, &cfg).unwrap();
        let ctx: CostContext = p.cost_context(&cfg);
        let cost = ctx.try_evaluate(0.0).unwrap();

        let back = reconstruct_values(&p.pca, &project(&p.pca, &p.seeded).unwrap()).unwrap();
        let (mut sum, mut n) = (0.0, 0usize);
        for (j, name) in p.pca.feature_names.iter().enumerate() {
            let c = d.column_index(name).unwrap();
            for r in 0..d.n_rows() {
                if !p.mask.is_missing(r, c) {
                    sum += (back[[r, j]] - d.get(r, c)).abs() / p.pca.sigma[j];
                    n += 1;
                }
            }
        }
        let want = sum / n as f64;
        assert!((cost.deviation - want).abs() < 1e-12, "k={k}");
        if k == 8 {
            assert!(cost.deviation < 1e-9);
        }
        assert!(
            (cost.total - (cost.deviation + cost.band_penalty + cost.bound_penalty)).abs() < 1e-15
        );
    }
}

#[test]
fn validation_flags_corruption() {
    let d = common::diabetes();
    let out = run(&d, &common::config(3)).unwrap();
    let p = &out.prepared;
    let ins = d.column_index("Insulin").unwrap();
    let r = (0..d.n_rows())
        .find(|&r| p.mask.is_missing(r, ins))
        .unwrap();
    let mut v = out.final_data.values().clone();
    v[[r, ins]] = 0.0;
    let obs = (0..d.n_rows()).find(|&r| !p.mask.is_missing(r, 0)).unwrap();
    v[[obs, 0]] += 1e-6;
    let bad = out.final_data.with_values(v).unwrap();
    let rep = validate_final(&bad, &d, &p.stats, &p.mask);
    let kinds: Vec<String> = rep.violations.iter().map(|v| format!("{v:?}")).collect();
    assert!(
        kinds
            .iter()
            .any(|k| k.starts_with("Zero") && k.contains("Insulin")),
        "{kinds:?}"
    );
    assert!(
        kinds.iter().any(|k| k.starts_with("ObservedMutation")),
        "{kinds:?}"
    );
}

#[test]
fn raw_reference_is_the_input() {
    let d: Dataset = common::diabetes();
    let p = prepare(&d, &common::config(4)).unwrap();
    assert_eq!(p.reference(Reference::Raw), &d);
    assert_ne!(p.reference(Reference::Imputed), &d);
}
