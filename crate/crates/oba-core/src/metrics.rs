//! Least-squares fitting of measured word counts against complexity models.
//!
//! The protocol's headline claims are asymptotic — linear words per
//! slot, `O(f·n)` across an adaptive prefix of failures, quadratic per
//! fallback wave — so the harness checks them by regressing measured
//! counts onto the claimed shape and inspecting the coefficient of
//! determination and residuals.  Fits use ordinary least squares via
//! the normal equations; the models here have at most three regressors,
//! where that is numerically unproblematic.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    /// Too few or too degenerate points to determine the coefficients.
    #[error("not enough independent data points for the requested fit")]
    InsufficientData,
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    /// One coefficient per regressor, in input order.
    pub coeffs: Vec<f64>,
    /// Coefficient of determination against the mean-only baseline.
    pub r_squared: f64,
    /// Per-point `observed - predicted`, in input order.
    pub residuals: Vec<f64>,
}

impl Fit {
    /// Predicted value for one row of regressors.
    pub fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coeffs).map(|(x, c)| x * c).sum()
    }
}

/// Ordinary least squares: find `coeffs` minimizing `‖rows·coeffs − ys‖`.
/// Each row lists the regressor values for one observation; include a
/// constant `1.0` column for an intercept.  Fails if there are fewer
/// observations than coefficients or the system is degenerate.
pub fn least_squares(rows: &[Vec<f64>], ys: &[f64]) -> Result<Fit, MetricsError> {
    let m = rows.len();
    if m == 0 || m != ys.len() {
        return Err(MetricsError::InsufficientData);
    }
    let k = rows[0].len();
    if k == 0 || m < k || rows.iter().any(|r| r.len() != k) {
        return Err(MetricsError::InsufficientData);
    }

    // Normal equations: (XᵀX) β = Xᵀy.
    let mut ata = vec![vec![0.0f64; k]; k];
    let mut aty = vec![0.0f64; k];
    for (row, &y) in rows.iter().zip(ys) {
        for i in 0..k {
            for j in 0..k {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let coeffs = solve(ata, aty)?;

    let residuals: Vec<f64> = rows
        .iter()
        .zip(ys)
        .map(|(row, &y)| y - row.iter().zip(&coeffs).map(|(x, c)| x * c).sum::<f64>())
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = ys.iter().sum::<f64>() / m as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res.abs() < 1e-9 {
        1.0
    } else {
        0.0
    };
    Ok(Fit {
        coeffs,
        r_squared,
        residuals,
    })
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, MetricsError> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-12 {
            return Err(MetricsError::InsufficientData);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col].clone();
        for row in col + 1..k {
            let factor = a[row][col] / pivot_row[col];
            for (c, p) in pivot_row.iter().enumerate().skip(col) {
                a[row][c] -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; k];
    for row in (0..k).rev() {
        let upper: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - upper) / a[row][row];
    }
    Ok(x)
}

/// One measured run for [`fit_complexity`]: system size, failures
/// observed, honest words spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostPoint {
    pub n: usize,
    pub f: usize,
    pub words: u64,
}

/// Fit of measured cost onto the adaptive model `a·(f+1)·n + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityFit {
    /// Marginal words per corrupted-slot-weighted party.
    pub a: f64,
    /// Fixed overhead.
    pub b: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Regress measured honest words onto `a·(f+1)·n + b`, the shape the
/// adaptive path promises: a linear bill in `n` whose slope grows with
/// the failures actually encountered, not with the tolerance.
/// Requires points spanning at least four distinct system sizes.
pub fn fit_complexity(points: &[CostPoint]) -> Result<ComplexityFit, MetricsError> {
    let distinct_n: std::collections::BTreeSet<usize> = points.iter().map(|p| p.n).collect();
    if distinct_n.len() < 4 {
        return Err(MetricsError::InsufficientData);
    }
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![((p.f + 1) * p.n) as f64, 1.0])
        .collect();
    let ys: Vec<f64> = points.iter().map(|p| p.words as f64).collect();
    let fit = least_squares(&rows, &ys)?;
    Ok(ComplexityFit {
        a: fit.coeffs[0],
        b: fit.coeffs[1],
        r_squared: fit.r_squared,
        residuals: fit.residuals,
    })
}
