//! Dense linear algebra for the small (`C x C`, `C <= 16`) matrices of the
//! separation pipeline.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest element-wise deviation of `m` from the identity.
pub fn identity_deviation(m: &Array2<f64>) -> f64 {
    m.indexed_iter()
        .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

pub fn max_asymmetry(m: &Array2<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[[x, col]].abs().total_cmp(&a[[y, col]].abs()))
            .unwrap();
        if a[[pivot, col]] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
            }
            det = -det;
        }
        det *= a[[col, col]];
        for row in col + 1..n {
            let f = a[[row, col]] / a[[col, col]];
            for k in col..n {
                a[[row, k]] -= f * a[[col, k]];
            }
        }
    }
    det
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert a {}x{} matrix",
            n,
            m.ncols()
        )));
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut a = m.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[[x, col]].abs().total_cmp(&a[[y, col]].abs()))
            .unwrap();
        if a[[pivot, col]].abs() <= scale * 1e-14 {
            return Err(Error::Singular(determinant(m).abs()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
                inv.swap([pivot, k], [col, k]);
            }
        }
        let p = a[[col, col]];
        for k in 0..n {
            a[[col, k]] /= p;
            inv[[col, k]] /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[[row, col]];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[[row, k]] -= f * a[[col, k]];
                inv[[row, k]] -= f * inv[[col, k]];
            }
        }
    }
    Ok(inv)
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// as the columns of `U`, so that `m = U diag(λ) Uᵀ`. Each eigenvector is
/// signed so that its largest-magnitude component is positive.
pub fn symmetric_eigen(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    if m.nrows() == 2 {
        eigen_2x2(m)
    } else {
        jacobi_eigen(m)
    }
}

/// Closed-form solution of the 2x2 symmetric eigenproblem.
pub fn eigen_2x2(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let (a, b, d) = (m[[0, 0]], 0.5 * (m[[0, 1]] + m[[1, 0]]), m[[1, 1]]);
    let mid = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b);
    let (l1, l2) = (mid + radius, mid - radius);
    let (vx, vy) = if radius == 0.0 {
        (1.0, 0.0)
    } else {
        // Two algebraically equivalent candidates; keep the better-conditioned one.
        let c1 = (l1 - d, b);
        let c2 = (b, l1 - a);
        let pick = if c1.0.hypot(c1.1) >= c2.0.hypot(c2.1) { c1 } else { c2 };
        let n = pick.0.hypot(pick.1);
        (pick.0 / n, pick.1 / n)
    };
    let mut u = Array2::from_shape_vec((2, 2), vec![vx, -vy, vy, vx]).unwrap();
    canonical_signs(&mut u);
    (Array1::from(vec![l1, l2]), u)
}

/// Cyclic Jacobi rotations, iterated until the off-diagonal norm drops below
/// `1e-12 * ||m||_F`.
pub fn jacobi_eigen(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    let threshold = 1e-12 * frobenius(m);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let vals = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut u = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        u.column_mut(dst).assign(&v.column(src));
    }
    canonical_signs(&mut u);
    (vals, u)
}

fn canonical_signs(u: &mut Array2<f64>) {
    for mut col in u.columns_mut() {
        let lead = col
            .iter()
            .copied()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap_or(0.0);
        if lead < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}
