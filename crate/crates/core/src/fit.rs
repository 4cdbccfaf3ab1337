//! Small least-squares helpers.

use nalgebra::{DMatrix, DVector};

/// Least-squares coefficients for `y ≈ Σ_j c_j X_j` with columns scaled to
/// unit norm before an SVD solve.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let rows = y.len();
    let cols = columns.len();
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| {
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let a = DMatrix::from_fn(rows, cols, |i, j| columns[j][i] / scales[j]);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-14).expect("SVD with both factors computed");
    x.iter().zip(&scales).map(|(v, s)| v / s).collect()
}

/// Root-mean-square residual of a fit.
pub fn rms_residual(columns: &[Vec<f64>], y: &[f64], coef: &[f64]) -> f64 {
    let n = y.len();
    let ss: f64 = (0..n)
        .map(|i| {
            let pred: f64 = columns.iter().zip(coef).map(|(c, k)| c[i] * k).sum();
            (y[i] - pred).powi(2)
        })
        .sum();
    (ss / n as f64).sqrt()
}

/// Slope of the ordinary least-squares line through `(x, y)`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let ones = vec![1.0; x.len()];
    least_squares(&[ones, x.to_vec()], y)[1]
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}
