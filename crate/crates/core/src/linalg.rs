//! Small dense linear-algebra helpers shared by the rigidity and spectral code.

use nalgebra::DMatrix;

/// Relative singular-value threshold below which a direction counts as null.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Numerical rank: number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * sigma_max).count()
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Spectral radius of a symmetric matrix (largest absolute eigenvalue).
pub fn symmetric_spectral_radius(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m)
        .iter()
        .fold(0.0, |acc, &l| f64::max(acc, l.abs()))
}

/// Spectral (operator 2-) norm of a symmetric matrix.
pub fn symmetric_norm(m: &DMatrix<f64>) -> f64 {
    symmetric_spectral_radius(m)
}

/// Largest absolute element-wise difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| f64::max(acc, (x - y).abs()))
}

/// Rows/columns `idx` of a square matrix, taken `block`-wide per index.
pub fn block_submatrix(
    m: &DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    block: usize,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len() * block, cols.len() * block);
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            let src = m.view((r * block, c * block), (block, block));
            out.view_mut((ri * block, ci * block), (block, block))
                .copy_from(&src);
        }
    }
    out
}
