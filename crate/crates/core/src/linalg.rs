//! Small dense solves used by the equations of motion.

use crate::Scalar;

/// Solves a 2x2 system by Cramer's rule. Returns `None` when
/// `|det| <= tol`.
pub fn solve2<T: Scalar>(m: [[T; 2]; 2], b: [T; 2], tol: T) -> Option<[T; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.abs() > tol) {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

pub fn det3<T: Scalar>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Solves a 3x3 system with partially pivoted Gaussian elimination.
/// Returns `None` when a pivot magnitude falls to `tol` or below.
pub fn solve3<T: Scalar>(m: [[T; 3]; 3], b: [T; 3], tol: T) -> Option<[T; 3]> {
    let mut a = [
        [m[0][0], m[0][1], m[0][2], b[0]],
        [m[1][0], m[1][1], m[1][2], b[1]],
        [m[2][0], m[2][1], m[2][2], b[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if !(a[pivot][col].abs() > tol) {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col];
        for row in a[col + 1..].iter_mut() {
            let f = row[col] / p[col];
            for (v, pv) in row[col..].iter_mut().zip(&p[col..]) {
                *v = *v - f * *pv;
            }
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = a[row][3];
        for k in row + 1..3 {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
