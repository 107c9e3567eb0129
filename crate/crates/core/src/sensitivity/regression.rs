//! Polynomial least squares via Householder QR.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressionError {
    #[error("polynomial degree must be at least 1")]
    ZeroDegree,
    #[error("{points} points cannot determine {coefficients} coefficients")]
    Underdetermined { points: usize, coefficients: usize },
    #[error("all x values are identical")]
    ConstantX,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("non-finite input point ({0}, {1})")]
    NonFinite(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub degree: usize,
    pub intercept: bool,
    /// Lowest power first; the constant term leads when `intercept` is set.
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        let first_power = if self.intercept { 0 } else { 1 };
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * x.powi((i + first_power) as i32))
            .sum()
    }

    /// Coefficient of `x^power`, zero when the model has no such term.
    pub fn coefficient(&self, power: usize) -> f64 {
        let first_power = usize::from(!self.intercept);
        power
            .checked_sub(first_power)
            .and_then(|i| self.coefficients.get(i))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Ordinary least squares fit of `y = Σ c_p x^p`, `p` from 0 (or 1 without
/// intercept) to `degree`.
///
/// R² is `1 - SS_res / SS_tot`, with `SS_tot` centered on the mean when the
/// model has an intercept and `Σ y²` otherwise. A zero `SS_tot` gives R² = 0.
pub fn polyfit(points: &[(f64, f64)], degree: usize, intercept: bool) -> Result<RegressionFit, RegressionError> {
    if degree == 0 {
        return Err(RegressionError::ZeroDegree);
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(RegressionError::NonFinite(x, y));
    }
    let cols = degree + usize::from(intercept);
    let rows = points.len();
    if rows <= cols {
        return Err(RegressionError::Underdetermined { points: rows, coefficients: cols });
    }
    if points.iter().all(|p| p.0 == points[0].0) {
        return Err(RegressionError::ConstantX);
    }

    let first_power = usize::from(!intercept);
    // column-major design matrix
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|c| points.iter().map(|&(x, _)| x.powi((c + first_power) as i32)).collect())
        .collect();
    let mut b: Vec<f64> = points.iter().map(|p| p.1).collect();

    let coefficients = solve_least_squares(&mut a, &mut b)?;
    let fit_without_r2 = RegressionFit { degree, intercept, coefficients, r_squared: 0.0 };

    let ss_res: f64 = points.iter().map(|&(x, y)| (y - fit_without_r2.predict(x)).powi(2)).sum();
    let ss_tot: f64 = if intercept {
        let mean = points.iter().map(|p| p.1).sum::<f64>() / rows as f64;
        points.iter().map(|p| (p.1 - mean).powi(2)).sum()
    } else {
        points.iter().map(|p| p.1 * p.1).sum()
    };
    let r_squared = if ss_tot == 0.0 { 0.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RegressionFit { r_squared, ..fit_without_r2 })
}

/// Minimizes `|A c - b|` in place; `a` holds columns of length `b.len()`.
fn solve_least_squares(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>, RegressionError> {
    let cols = a.len();
    let rows = b.len();
    let mut diag = vec![0.0; cols];

    for k in 0..cols {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(RegressionError::RankDeficient);
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        // v = a_k[k..] - alpha e1, stored in place
        a[k][k] -= alpha;
        let v_norm_sq: f64 = a[k][k..].iter().map(|v| v * v).sum();
        let (head, tail) = a.split_at_mut(k + 1);
        let v = &head[k][k..];
        for col in tail.iter_mut() {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum();
            let scale = 2.0 * dot / v_norm_sq;
            for (c, vi) in col[k..].iter_mut().zip(v) {
                *c -= scale * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[k..]).map(|(p, q)| p * q).sum();
        let scale = 2.0 * dot / v_norm_sq;
        for (bi, vi) in b[k..].iter_mut().zip(v) {
            *bi -= scale * vi;
        }
        diag[k] = alpha;
    }

    let largest = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= largest * rows as f64 * 1e-13) {
        return Err(RegressionError::RankDeficient);
    }

    // back substitution with R: diagonal in `diag`, above-diagonal in a[col][row]
    let mut coef = vec![0.0; cols];
    for row in (0..cols).rev() {
        let mut acc = b[row];
        for col in row + 1..cols {
            acc -= a[col][row] * coef[col];
        }
        coef[row] = acc / diag[row];
    }
    Ok(coef)
}
