//! Central finite differences with a relative step `1e-6 * (1 + |x|)`.

use nalgebra::{DMatrix, DVector};

pub(crate) fn step_for(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

/// Gradient of a scalar function.
pub fn gradient<F>(x: &DVector<f64>, mut f: F) -> DVector<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let mut probe = x.clone();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|k| {
            let h = step_for(x[k]);
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        }),
    )
}

/// Jacobian of a vector function; row `r` holds the partials of output `r`.
pub fn jacobian<F>(x: &DVector<f64>, mut f: F) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut probe = x.clone();
    let mut columns = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = step_for(x[k]);
        probe[k] = x[k] + h;
        let up = f(&probe);
        probe[k] = x[k] - h;
        let down = f(&probe);
        probe[k] = x[k];
        columns.push((up - down) / (2.0 * h));
    }
    if columns.is_empty() {
        let rows = f(x).len();
        return DMatrix::zeros(rows, 0);
    }
    DMatrix::from_columns(&columns)
}
