//! Per-feature distribution comparisons against a reference table: two-sample
//! KS, 1-D Wasserstein, SD and variance, plus Gaussian KDE curves.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::sample_sd;
use crate::error::{Error, Result};
use crate::tabular::Dataset;

pub const KDE_GRID_POINTS: usize = 512;

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty sample".to_string()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite sample value".to_string(),
        ));
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Asymptotic Kolmogorov tail probability `Q(λ)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Returns `(statistic, p)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check_samples(a, b)?;
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// `∫ |F_a(x) − F_b(x)| dx`, equal to the quantile-function form.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    let (sa, sb) = (sorted(a), sorted(b));
    if sa.len() == sb.len() {
        let s: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / sa.len() as f64);
    }
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut all: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    all.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    for w in all.windows(2) {
        while i < sa.len() && sa[i] <= w[0] {
            i += 1;
        }
        while j < sb.len() && sb[j] <= w[0] {
            j += 1;
        }
        total += (i as f64 / na - j as f64 / nb).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub ks_statistic: f64,
    pub ks_p: f64,
    pub wasserstein: f64,
    pub sd: f64,
    pub variance: f64,
}

/// Metric grid indexed `[feature][method]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub features: Vec<String>,
    pub methods: Vec<String>,
    pub cells: Vec<Vec<MetricCell>>,
}

impl MetricReport {
    pub fn get(&self, feature: &str, method: &str) -> Option<&MetricCell> {
        let f = self.features.iter().position(|x| x == feature)?;
        let m = self.methods.iter().position(|x| x == method)?;
        Some(&self.cells[f][m])
    }

    fn write_table(&self, path: &Path, pick: impl Fn(&MetricCell) -> f64) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        writeln!(out, "feature,{}", self.methods.join(",")).map_err(io_err)?;
        for (f, row) in self.features.iter().zip(&self.cells) {
            let vals: Vec<String> = row.iter().map(|c| format_cell(pick(c))).collect();
            writeln!(out, "{f},{}", vals.join(",")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    /// Writes `ks.csv`, `wasserstein.csv`, `sd.csv` and `variance.csv`;
    /// returns their paths.
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        type Pick = fn(&MetricCell) -> f64;
        let tables: [(&str, Pick); 4] = [
            ("ks.csv", |c| c.ks_p),
            ("wasserstein.csv", |c| c.wasserstein),
            ("sd.csv", |c| c.sd),
            ("variance.csv", |c| c.variance),
        ];
        let mut paths = Vec::new();
        for (name, pick) in tables {
            let p = dir.join(name);
            self.write_table(&p, pick)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// Plain decimal unless the value is tiny, where that would run to dozens of
/// zeros. Both forms parse back to the same `f64`.
fn format_cell(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn column_of(d: &Dataset, feature: &str) -> Result<Vec<f64>> {
    Ok(d.column(feature)?.to_vec())
}

pub fn metric_cell(reference: &[f64], sample: &[f64]) -> Result<MetricCell> {
    let (ks_statistic, ks_p) = ks_two_sample(reference, sample)?;
    let sd = sample_sd(sample);
    Ok(MetricCell {
        ks_statistic,
        ks_p,
        wasserstein: wasserstein_1d(reference, sample)?,
        sd,
        variance: sd * sd,
    })
}

pub fn build_report(
    reference: &Dataset,
    methods: &[(String, &Dataset)],
    features: &[String],
) -> Result<MetricReport> {
    let refs: Vec<Vec<f64>> = features
        .iter()
        .map(|f| column_of(reference, f))
        .collect::<Result<_>>()?;
    let cells = features
        .par_iter()
        .zip(&refs)
        .map(|(f, r)| {
            methods
                .iter()
                .map(|(_, d)| metric_cell(r, &column_of(d, f)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        features: features.to_vec(),
        methods: methods.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    })
}

/// Silverman's rule of thumb; falls back to 1 for a constant sample.
pub fn silverman_bandwidth(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let sd = sample_sd(v);
    let s = sorted(v);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

/// Gaussian KDE on an even grid over `[min − 3h, max + 3h]`.
pub fn kde(v: &[f64], points: usize) -> Result<Vec<(f64, f64)>> {
    if v.is_empty() || points < 2 {
        return Err(Error::InvalidArgument(
            "KDE needs samples and >= 2 grid points".into(),
        ));
    }
    let h = silverman_bandwidth(v);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let norm = 1.0 / (v.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok((0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let dens: f64 = v
                .iter()
                .map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp())
                .sum();
            (x, dens * norm)
        })
        .collect())
}

pub fn write_kde(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "x,density").map_err(io_err)?;
    for (x, y) in curve {
        writeln!(out, "{x},{y}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// One `kde_<feature>_<method>.csv` per pair.
pub fn write_kdes(
    dir: &Path,
    methods: &[(String, &Dataset)],
    features: &[String],
) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::new();
    for f in features {
        for (name, d) in methods {
            let p = dir.join(format!("kde_{f}_{name}.csv"));
            write_kde(&p, &kde(&column_of(d, f)?, KDE_GRID_POINTS)?)?;
            paths.push(p);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 2.0, 5.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), (0.0, 1.0));
        let (d, p) = ks_two_sample(&[0.0; 500], &[1.0; 500]).unwrap();
        assert_eq!(d, 1.0);
        assert!(p < 1e-100);
    }

    #[test]
    fn ks_handles_ties_across_samples() {
        let (d, _) = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]).unwrap();
        assert!((d - 1.0 / 6.0).abs() < 1e-15, "{d}");
        let (d, _) = ks_two_sample(&[1.0, 2.0], &[2.0, 3.0]).unwrap();
        assert_eq!(d, 0.5);
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[3.0, 1.0], &[1.0, 3.0]).unwrap(), 0.0);
        // unequal sizes: point mass at 0 vs uniform on {0, 1, 2}
        assert!((wasserstein_1d(&[0.0], &[0.0, 1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_samples_rejected() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(wasserstein_1d(&[1.0], &[]).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let v: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let curve = kde(&v, KDE_GRID_POINTS).unwrap();
        let dx = curve[1].0 - curve[0].0;
        let area: f64 = curve.iter().map(|p| p.1).sum::<f64>() * dx;
        assert!((area - 1.0).abs() < 0.01, "{area}");
    }
}
