//! Ordinary least squares with an intercept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge term added to the standardized normal equations when they are singular.
pub const RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One coefficient per input, in spec order.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[&[f64]], rows: usize) -> Vec<f64> {
        let mut out = vec![self.intercept; rows];
        for (col, &b) in x.iter().zip(&self.coefficients) {
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += b * v;
            }
        }
        out
    }
}

/// Solves the normal equations on standardized inputs; falls back to a tiny
/// ridge penalty if they are singular.
pub fn fit(x: &[&[f64]], y: &[f64], target: &str) -> Result<LinearModel> {
    let n = y.len();
    let p = x.len();
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let means: Vec<f64> = x.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    // unit scale per column; constant columns keep scale 1 and end up with a zero row
    let scales: Vec<f64> = x
        .iter()
        .zip(&means)
        .map(|(c, m)| {
            let s = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = x
        .iter()
        .zip(means.iter().zip(&scales))
        .map(|(c, (m, s))| c.iter().map(|v| (v - m) / s).collect())
        .collect();

    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        for j in i..p {
            let g: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>() / nf;
            gram[i][j] = g;
            gram[j][i] = g;
        }
        rhs[i] = z[i].iter().zip(y).map(|(a, t)| a * (t - y_mean)).sum::<f64>() / nf;
    }

    let beta = solve(gram.clone(), rhs.clone())
        .or_else(|| {
            let mut ridged = gram;
            for (i, row) in ridged.iter_mut().enumerate() {
                row[i] += RIDGE_LAMBDA;
            }
            solve(ridged, rhs)
        })
        .ok_or_else(|| Error::SingularMatrix(target.to_string()))?;

    let coefficients: Vec<f64> = beta.iter().zip(&scales).map(|(b, s)| b / s).collect();
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularMatrix(target.to_string()));
    }
    Ok(LinearModel {
        coefficients,
        intercept,
    })
}

/// Gaussian elimination with partial pivoting. `None` if a pivot vanishes.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit(&[&x], &y, "y").unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_plane() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.11).cos() * 3.0).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(u, v)| -1.5 * u + 0.25 * v - 4.0).collect();
        let m = fit(&[&a, &b], &y, "y").unwrap();
        assert!((m.coefficients[0] + 1.5).abs() < 1e-9);
        assert!((m.coefficients[1] - 0.25).abs() < 1e-9);
        assert!((m.intercept + 4.0).abs() < 1e-9);
    }

    #[test]
    fn collinear_inputs_use_ridge() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = a.iter().map(|v| 3.0 * v + 1.0).collect();
        let m = fit(&[&a, &b], &y, "y").unwrap();
        let pred = m.predict(&[&a, &b], 20);
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_input_gets_zero_weight() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let c = vec![5.0; 20];
        let y: Vec<f64> = a.iter().map(|v| v - 2.0).collect();
        let m = fit(&[&a, &c], &y, "y").unwrap();
        assert!(m.coefficients[1].abs() < 1e-6);
    }

    #[test]
    fn residuals_orthogonal_to_inputs() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 37) % 17) as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| ((i * 13) % 11) as f64 - 3.0).collect();
        let y: Vec<f64> = (0..50).map(|i| ((i * 7) % 23) as f64).collect();
        let m = fit(&[&a, &b], &y, "y").unwrap();
        let pred = m.predict(&[&a, &b], 50);
        let res: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
        for col in [&a, &b] {
            let dot: f64 = col.iter().zip(&res).map(|(u, r)| u * r).sum();
            let scale: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt()
                * y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(dot.abs() < 1e-6 * scale, "{dot}");
        }
        assert!(res.iter().sum::<f64>().abs() < 1e-9);
    }
}
