//! Small dense-vector helpers with fixed reduction order.
//!
//! All sums run in ascending index order so repeated runs (and runs under
//! different thread counts) produce bit-identical results.

/// Dot product in index order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Euclidean norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Squared Euclidean distance.
#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// `y += c * x`
#[inline]
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for i in 0..y.len() {
        y[i] += c * x[i];
    }
}

/// `y *= c`
#[inline]
pub fn scale(y: &mut [f64], c: f64) {
    for v in y.iter_mut() {
        *v *= c;
    }
}

/// Mean of the rows, in row order.
pub fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    assert!(!rows.is_empty());
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for row in rows {
        axpy(&mut out, 1.0, row);
    }
    scale(&mut out, 1.0 / rows.len() as f64);
    out
}
