//! Small dense complex-arithmetic helpers shared by the frequency scan and
//! the eigen-mode analysis.

use nalgebra::{Complex, DMatrix, DVector};

/// Solve `(s*I - A) z = b` for complex shift `s`. Returns `None` when the
/// shifted matrix is exactly singular (shift on an undamped eigenvalue).
pub fn shifted_solve(a: &DMatrix<f64>, s: Complex<f64>, b: &DVector<f64>) -> Option<DVector<Complex<f64>>> {
    let n = a.nrows();
    let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = Complex::new(-a[(i, j)], 0.0);
        }
        m[(j, j)] += s;
    }
    let rhs = DVector::from_iterator(n, b.iter().map(|&x| Complex::new(x, 0.0)));
    let z = m.lu().solve(&rhs)?;
    if z.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Some(z)
    } else {
        None
    }
}

/// Right eigenvector of `a` for an eigenvalue estimate `lambda`, by shifted
/// inverse iteration from a deterministic start. Good enough for
/// participation ranking; not a refined eigensolver.
pub fn inverse_iteration(a: &DMatrix<f64>, lambda: Complex<f64>) -> Option<DVector<Complex<f64>>> {
    let n = a.nrows();
    let scale = a.amax().max(1.0);
    // Offset keeps the shifted matrix invertible at a true eigenvalue.
    let shift = lambda + Complex::new(1e-7 * scale.max(lambda.norm()), 0.0) * 1e-2;
    let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = Complex::new(a[(i, j)], 0.0);
        }
        m[(j, j)] -= shift;
    }
    let lu = m.lu();
    let mut v = DVector::from_element(n, Complex::new(1.0 / n as f64, 0.0));
    for _ in 0..4 {
        let mut w = lu.solve(&v)?;
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        w /= Complex::new(norm, 0.0);
        v = w;
    }
    Some(v)
}
