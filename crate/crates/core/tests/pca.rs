mod common;

use ndarray::{Array2, Axis};
use qimpute::baseline::{impute_central, CentralTendency};
use qimpute::pca::{choose_components, fit, project, reconstruct_values};
use qimpute::tabular::derive_mask;

fn seeded() -> (qimpute::Dataset, Vec<String>) {
    let d = common::diabetes();
    let cfg = common::config(1);
    let mask = derive_mask(&d, &cfg.impute_columns).unwrap();
    let s = impute_central(&d, &mask, CentralTendency::Mean).unwrap();
    let f = s.feature_names();
    (s, f)
}

#[test]
fn diabetes_uses_eight_components() {
    let (_, f) = seeded();
    assert_eq!(f.len(), 8);
    assert_eq!(choose_components(f.len()).unwrap(), 8);
}

#[test]
fn full_rank_round_trip() {
    let (d, f) = seeded();
    let m = fit(&d, &f, f.len()).unwrap();
    let back = reconstruct_values(&m, &project(&m, &d).unwrap()).unwrap();
    for (j, name) in f.iter().enumerate() {
        let col = d.column(name).unwrap();
        for r in 0..d.n_rows() {
            assert!((back[[r, j]] - col[r]).abs() < 1e-8);
        }
    }
}

#[test]
fn components_orthonormal() {
    let (d, f) = seeded();
    let m = fit(&d, &f, 4).unwrap();
    let c = m.components_matrix();
    let g = c.dot(&c.t());
    let eye = Array2::<f64>::eye(4);
    for (a, b) in g.iter().zip(eye.iter()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn explained_variance_equals_eigenvalues() {
    let (d, f) = seeded();
    let m = fit(&d, &f, 8).unwrap();
    let z = project(&m, &d).unwrap();
    let var = z.var_axis(Axis(0), 1.0);
    for (v, l) in var.iter().zip(&m.eigenvalues) {
        assert!((v - l).abs() < 1e-9, "{v} vs {l}");
    }
    // eigenvalues of a correlation matrix sum to d
    assert!((m.spectrum.iter().sum::<f64>() - 8.0).abs() < 1e-9);
}
