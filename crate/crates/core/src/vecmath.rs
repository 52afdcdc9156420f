//! Small dense-vector helpers shared across modules.

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Unit-normalize in place; zero vectors are left untouched.
pub(crate) fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

pub(crate) fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Row-major `rows x cols` matrix times vector.
pub(crate) fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    (0..rows).map(|r| dot(&m[r * cols..(r + 1) * cols], v)).collect()
}

/// Arithmetic mean of the selected rows.
pub(crate) fn mean_of(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points[members[0]].len();
    let mut out = vec![0.0; dim];
    for &i in members {
        for (o, x) in out.iter_mut().zip(&points[i]) {
            *o += x;
        }
    }
    let n = members.len() as f64;
    for o in out.iter_mut() {
        *o /= n;
    }
    out
}
