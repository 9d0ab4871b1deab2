//! Amplitude encoding of component rows and exact statevector simulation of
//! a shared-angle Rx rotation on every qubit.
//!
//! The rotated complex state is read back classically as the real part of
//! each amplitude, then renormalized. Because `Rx(θ) = cos(θ/2)·I − i·sin(θ/2)·X`,
//! the real part of `Rx(θ)^⊗q` has entry `(j, j')` equal to
//! `cos^(q−h)(θ/2) · sin^h(θ/2) · (−1)^(h/2)` when the Hamming distance `h`
//! between `j` and `j'` is even, and zero otherwise. That real matrix is built
//! once per angle and applied to every row.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this L2 norm an extracted real vector counts as annihilated.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRow {
    pub amplitudes: Vec<f64>,
    pub norm_factor: f64,
}

impl EncodedRow {
    pub fn is_degenerate(&self) -> bool {
        self.norm_factor == 0.0
    }

    pub fn qubits(&self) -> u32 {
        self.amplitudes.len().trailing_zeros()
    }
}

pub fn encode(z_row: &[f64]) -> Result<EncodedRow> {
    let k = z_row.len();
    if !k.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(k));
    }
    let norm = z_row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(EncodedRow {
            amplitudes: z_row.to_vec(),
            norm_factor: 0.0,
        });
    }
    Ok(EncodedRow {
        amplitudes: z_row.iter().map(|v| v / norm).collect(),
        norm_factor: norm,
    })
}

fn check_angle(theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange(theta))
    }
}

/// `Re(Rx(θ)^⊗q)` as a dense 2^q × 2^q matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRxOperator {
    theta: f64,
    qubits: u32,
    matrix: Array2<f64>,
}

impl RealRxOperator {
    pub fn new(theta: f64, qubits: u32) -> Result<Self> {
        check_angle(theta)?;
        let dim = 1usize << qubits;
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let matrix = Array2::from_shape_fn((dim, dim), |(j, jp)| {
            let h = (j ^ jp).count_ones();
            if h % 2 == 1 {
                return 0.0;
            }
            let sign = if (h / 2) % 2 == 0 { 1.0 } else { -1.0 };
            sign * c.powi((qubits - h) as i32) * s.powi(h as i32)
        });
        Ok(RealRxOperator {
            theta,
            qubits,
            matrix,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    fn apply(&self, e: &EncodedRow, row: usize) -> Result<EncodedRow> {
        if e.amplitudes.len() != self.matrix.nrows() {
            return Err(Error::Shape(format!(
                "row of length {} for a {}-qubit operator",
                e.amplitudes.len(),
                self.qubits
            )));
        }
        if e.is_degenerate() {
            return Err(Error::InvalidArgument(format!(
                "row {row} is degenerate (zero norm) and cannot be rotated"
            )));
        }
        if self.theta == 0.0 {
            return Ok(e.clone());
        }
        let out = self.matrix.dot(&ArrayView1::from(&e.amplitudes));
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < DEGENERATE_NORM {
            return Err(Error::DegenerateAngle { row });
        }
        Ok(EncodedRow {
            amplitudes: out.iter().map(|v| v / norm).collect(),
            norm_factor: e.norm_factor,
        })
    }

    /// Rotates every row of a component table; zero rows pass through.
    pub fn apply_table(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        if self.theta == 0.0 {
            return Ok(z.clone());
        }
        let rows: Vec<Vec<f64>> = (0..z.nrows())
            .into_par_iter()
            .map(|i| {
                let row = z.row(i);
                let e = encode(row.as_slice().expect("standard layout"))?;
                if e.is_degenerate() {
                    return Ok(row.to_vec());
                }
                let r = self.apply(&e, i)?;
                Ok(r.amplitudes.iter().map(|a| a * r.norm_factor).collect())
            })
            .collect::<Result<_>>()?;
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec(z.dim(), flat).map_err(|e| Error::Shape(e.to_string()))
    }
}

pub fn rotate(e: &EncodedRow, theta: f64) -> Result<EncodedRow> {
    RealRxOperator::new(theta, e.qubits())?.apply(e, 0)
}

pub fn rotate_table(z: &Array2<f64>, theta: f64) -> Result<Array2<f64>> {
    let k = z.ncols();
    if !k.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(k));
    }
    let z = z.as_standard_layout().into_owned();
    RealRxOperator::new(theta, k.trailing_zeros())?.apply_table(&z)
}
