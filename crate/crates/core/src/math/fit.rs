//! Regression helpers for order, slope and growth-law fits.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use super::linalg::least_squares;

/// Ordinary least-squares line `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| alloc::vec![1.0, x]).collect();
    let beta = least_squares(&rows, ys)?;
    let r_squared = r_squared(&rows, ys, &beta);
    Some(LineFit {
        intercept: beta[0],
        slope: beta[1],
        r_squared,
    })
}

/// Coefficient of determination of a fitted linear model.
pub fn r_squared(rows: &[Vec<f64>], ys: &[f64], beta: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (row, &y) in rows.iter().zip(ys) {
        let pred: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean) * (y - mean);
    }
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Slope of `log(err)` against `log(h)`: the observed convergence order.
pub fn observed_order(steps: &[f64], errors: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    line_fit(&xs, &ys).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_pure_power_law() {
        let hs = [1e-2, 5e-3, 2.5e-3];
        let es: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        assert!((observed_order(&hs, &es).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_line_has_unit_r_squared() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = line_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }
}
