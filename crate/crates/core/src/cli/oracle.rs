//! Independent reference computations written out as JSON fixtures.
//!
//! Nothing here calls the library's numerical code: the rotation comes from a
//! complex Kronecker product, KNN from a full sort, and mask counts from the
//! raw CSV text.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::Staging;
use crate::error::{Error, Result};
use crate::pipeline::DEFAULT_IMPUTE_COLUMNS;

pub const ROTATION_SEED: u64 = 20;

fn kron(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// `Rx(θ)^⊗q` as a dense complex matrix.
pub fn rx_tensor(theta: f64, q: u32) -> Vec<Vec<Complex64>> {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(theta / 2.0).sin());
    let rx = vec![vec![c, s], vec![s, c]];
    let mut m = vec![vec![Complex64::new(1.0, 0.0)]];
    for _ in 0..q {
        m = kron(&m, &rx);
    }
    m
}

/// Angles shared by the fixture and the tests that consume it.
pub fn rotation_angles() -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(ROTATION_SEED);
    (0..20)
        .map(|_| rng.random_range(0.0..std::f64::consts::PI))
        .collect()
}

#[derive(Serialize)]
struct RotationCase {
    qubits: u32,
    theta: f64,
    real_part: Vec<Vec<f64>>,
}

/// Zero counts per column read straight from the CSV text.
pub fn zero_counts(text: &str, columns: &[&str]) -> Result<Vec<(String, usize)>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let mut idx = Vec::new();
    for c in columns {
        let i = header
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::UnknownColumn(c.to_string()))?;
        idx.push(i);
    }
    let mut counts = vec![0usize; columns.len()];
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        for (k, &i) in idx.iter().enumerate() {
            if cells[i].parse::<f64>().map(|v| v == 0.0).unwrap_or(false) {
                counts[k] += 1;
            }
        }
    }
    Ok(columns.iter().map(|c| c.to_string()).zip(counts).collect())
}

/// Small table with zeros for the brute-force KNN fixture.
pub fn knn_table() -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let rows = vec![
        vec![1.0, 85.0, 66.0, 29.0],
        vec![8.0, 183.0, 64.0, 0.0],
        vec![1.0, 89.0, 66.0, 23.0],
        vec![0.0, 137.0, 40.0, 35.0],
        vec![5.0, 116.0, 74.0, 0.0],
        vec![3.0, 78.0, 50.0, 32.0],
        vec![10.0, 115.0, 0.0, 0.0],
        vec![2.0, 197.0, 70.0, 45.0],
        vec![4.0, 110.0, 92.0, 0.0],
        vec![10.0, 168.0, 74.0, 0.0],
        vec![1.0, 103.0, 30.0, 38.0],
        vec![1.0, 115.0, 70.0, 30.0],
    ];
    (
        vec!["Pregnancies", "Glucose", "BloodPressure", "SkinThickness"],
        rows,
    )
}

/// Brute-force nan-euclidean KNN: impute columns are 1..=3, zero means missing.
pub fn knn_brute_force(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let missing = |r: usize, c: usize| c >= 1 && rows[r][c] == 0.0;
    let mut mu = vec![0.0; d];
    let mut sd = vec![1.0; d];
    for c in 0..d {
        let obs: Vec<f64> = (0..n)
            .filter(|&r| !missing(r, c))
            .map(|r| rows[r][c])
            .collect();
        let m = obs.iter().sum::<f64>() / obs.len() as f64;
        let v = obs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (obs.len() - 1) as f64;
        mu[c] = m;
        if v > 0.0 {
            sd[c] = v.sqrt();
        }
    }
    let dist = |a: usize, b: usize| {
        let mut s = 0.0;
        let mut present = 0;
        for c in 0..d {
            if missing(a, c) || missing(b, c) {
                continue;
            }
            s += ((rows[a][c] - rows[b][c]) / sd[c]).powi(2);
            present += 1;
        }
        if present == 0 {
            f64::INFINITY
        } else {
            (s * d as f64 / present as f64).sqrt()
        }
    };
    let mut out = rows.to_vec();
    for (r, out_row) in out.iter_mut().enumerate() {
        for c in 1..d {
            if !missing(r, c) {
                continue;
            }
            let mut donors: Vec<(f64, usize)> = (0..n)
                .filter(|&o| !missing(o, c))
                .map(|o| (dist(r, o), o))
                .collect();
            donors.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            out_row[c] = donors[..k].iter().map(|&(_, o)| rows[o][c]).sum::<f64>() / k as f64;
        }
    }
    out
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_oracle(input: &Path, output: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|source| Error::Io {
        path: input.to_path_buf(),
        source,
    })?;
    let stage = Staging::new(output)?;

    let counts = zero_counts(&text, &DEFAULT_IMPUTE_COLUMNS)?;
    let counts: serde_json::Map<String, serde_json::Value> =
        counts.into_iter().map(|(c, n)| (c, json!(n))).collect();
    write_json(&stage.path("mask_counts.json"), &json!(counts))?;

    let mut cases = Vec::new();
    for q in 1..=3 {
        for &theta in &rotation_angles() {
            let m = rx_tensor(theta, q);
            cases.push(RotationCase {
                qubits: q,
                theta,
                real_part: m.iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
            });
        }
    }
    write_json(&stage.path("rotation.json"), &json!(cases))?;

    let (names, rows) = knn_table();
    write_json(
        &stage.path("knn.json"),
        &json!({ "columns": names, "k": 3, "input": rows, "expected": knn_brute_force(&rows, 3) }),
    )?;

    write_json(
        &stage.path("optimizer_toy.json"),
        &json!({ "convex_minimum": 1.0, "tolerance": 0.02, "bimodal_basins": [0.5, 2.5] }),
    )?;
    stage.commit()
}
