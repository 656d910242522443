//! Least-squares fits used to extract decay rates from indicator sweeps.

use crate::error::{Error, Result};

/// Weighted linear fit y ~ a + b x. Returns (a, b, rms residual).
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() != w.len() || x.len() < 2 {
        return Err(Error::Precondition(format!(
            "linear fit needs matching inputs with >= 2 points, got {}/{}/{}",
            x.len(),
            y.len(),
            w.len()
        )));
    }
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::Precondition("weights must have positive sum".into()));
    }
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, ww)| ww * (a - mx) * (a - mx)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), ww)| ww * (a - mx) * (b - my))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::Numerical("degenerate abscissae in linear fit".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let mut ss = 0.0;
    for i in 0..x.len() {
        let r = y[i] - (a + b * x[i]);
        ss += w[i] * r * r;
    }
    Ok((a, b, (ss / sw).sqrt()))
}

/// Fit y ~ a + b x + c ln(x) by normal equations. Captures a pure
/// exponential rate `b` together with an algebraic prefactor exponent `c`
/// (e^{b x} x^c envelopes). Returns (a, b, c, rms residual).
pub fn exp_with_power_prefactor_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::Precondition(format!(
            "three-parameter fit needs >= 3 matched points, got {n}/{}",
            y.len()
        )));
    }
    if x.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Precondition(
            "three-parameter fit needs positive abscissae".into(),
        ));
    }
    // basis: 1, x, ln x
    let mut a = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for i in 0..n {
        let phi = [1.0, x[i], x[i].ln()];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += phi[r] * phi[c];
            }
            rhs[r] += phi[r] * y[i];
        }
    }
    let sol = solve3(a, rhs)?;
    let mut ss = 0.0;
    for i in 0..n {
        let r = y[i] - (sol[0] + sol[1] * x[i] + sol[2] * x[i].ln());
        ss += r * r;
    }
    Ok((sol[0], sol[1], sol[2], (ss / n as f64).sqrt()))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        if p.abs() < 1e-300 {
            return Err(Error::Numerical("singular normal equations".into()));
        }
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = a[row][col] / p;
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Ok([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}
