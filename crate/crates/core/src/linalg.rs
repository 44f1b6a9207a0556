//! Small dense helpers for the Newton and coordinate-descent solvers.
//! Matrices are row-major `k × k` slices.

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
/// Returns `None` when a pivot falls below `1e-12` times the largest
/// diagonal entry.
pub(crate) fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    debug_assert_eq!(a.len(), k * k);
    if k == 0 {
        return Some(Vec::new());
    }
    let max_diag = (0..k).map(|i| a[i * k + i]).fold(0.0f64, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return None;
    }
    let floor = 1e-12 * max_diag;
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if s <= floor {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for m in 0..i {
            s -= l[i * k + m] * y[m];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for m in i + 1..k {
            s -= l[m * k + i] * x[m];
        }
        x[i] = s / l[i * k + i];
    }
    Some(x)
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
