//! Minimal dense symmetric solves. Matrices here are tiny (at most the node
//! cap on one side, a handful of predictors on the other), so a plain
//! Cholesky with an explicit pivot guard beats pulling in a solver crate:
//! the guard is the contract — rank deficiency must be an error, never a
//! silently garbage solution.

/// Row-major symmetric matrix, n x n.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SymMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
        self.values[j * self.n + i] = v;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Fails when any pivot (the Schur-complement diagonal before its square
/// root) drops to `tol` or below.
pub(crate) fn cholesky(a: &SymMatrix, tol: f64) -> Result<Vec<f64>, Degenerate> {
    let n = a.n;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            return Err(Degenerate { pivot: d, at: j });
        }
        let dj = d.sqrt();
        l[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / dj;
        }
    }
    Ok(l)
}

/// Solve `A x = b` given the Cholesky factor of `A`.
pub(crate) fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * y[k];
        }
        y[i] = v / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[k * n + i] * x[k];
        }
        x[i] = v / l[i * n + i];
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Degenerate {
    pub pivot: f64,
    pub at: usize,
}

/// Least squares of `y` on the given columns (already including any
/// intercept column) via scaled normal equations. Columns are normalized to
/// unit Euclidean length before forming the Gram matrix so the pivot guard
/// reads like `1 - R^2` of a column on its predecessors; `tol` is applied on
/// that scale.
pub(crate) fn least_squares(
    cols: &[Vec<f64>],
    y: &[f64],
    tol: f64,
) -> Result<Vec<f64>, Degenerate> {
    let p = cols.len();
    let n = y.len();
    let scales: Vec<f64> = cols
        .iter()
        .map(|c| {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();

    let mut gram = SymMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            gram.set(i, j, dot / (scales[i] * scales[j]));
        }
    }
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        rhs[i] = cols[i].iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / scales[i];
    }
    let _ = n;

    let l = cholesky(&gram, tol)?;
    let scaled = chol_solve(&l, p, &rhs);
    Ok(scaled
        .into_iter()
        .zip(&scales)
        .map(|(b, s)| b / s)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let mut a = SymMatrix::zeros(2);
        a.set(0, 0, 4.0);
        a.set(0, 1, 1.0);
        a.set(1, 1, 3.0);
        let l = cholesky(&a, 1e-12).unwrap();
        let x = chol_solve(&l, 2, &[1.0, 2.0]);
        // 4x + y = 1, x + 3y = 2  =>  x = 1/11, y = 7/11
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_fails() {
        let mut a = SymMatrix::zeros(2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 1.0);
        a.set(1, 1, 1.0);
        assert!(cholesky(&a, 1e-12).is_err());
    }

    #[test]
    fn least_squares_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let ones = vec![1.0; 10];
        let beta = least_squares(&[ones, x], &y, 1e-10).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-10);
        assert!((beta[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = x.clone();
        let ones = vec![1.0; 10];
        assert!(least_squares(&[ones, x.clone(), x], &y, 1e-10).is_err());
    }
}
