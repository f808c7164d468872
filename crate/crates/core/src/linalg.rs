//! Small dense row-major matrices, sized `m x m` with `m = 2n`.

/// `out = a * b`.
pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], m: usize) {
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += a[i * m + k] * b[k * m + j];
            }
            out[i * m + j] = acc;
        }
    }
}

/// `out = a * x`.
pub fn matvec(a: &[f64], x: &[f64], out: &mut [f64], m: usize) {
    for i in 0..m {
        out[i] = (0..m).map(|k| a[i * m + k] * x[k]).sum();
    }
}

/// Inverts `a` into `out` by Gauss-Jordan elimination with partial pivoting.
/// Returns `false` if a pivot falls below `1e-14`.
pub fn invert(a: &[f64], out: &mut [f64], m: usize) -> bool {
    let mut work = a.to_vec();
    out.iter_mut().enumerate().for_each(|(k, v)| *v = if k / m == k % m { 1.0 } else { 0.0 });
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r, &s| work[r * m + col].abs().total_cmp(&work[s * m + col].abs()))
            .unwrap();
        if work[pivot * m + col].abs() < 1e-14 {
            return false;
        }
        if pivot != col {
            for k in 0..m {
                work.swap(pivot * m + k, col * m + k);
                out.swap(pivot * m + k, col * m + k);
            }
        }
        let p = 1.0 / work[col * m + col];
        for k in 0..m {
            work[col * m + k] *= p;
            out[col * m + k] *= p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = work[r * m + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                work[r * m + k] -= f * work[col * m + k];
                out[r * m + k] -= f * out[col * m + k];
            }
        }
    }
    true
}

/// The standard complex structure on `C^n` as a `2n x 2n` matrix:
/// block-diagonal `[[0, -1], [1, 0]]`.
pub fn standard_complex_structure(n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut j = vec![0.0; m * m];
    for b in 0..n {
        let (r, c) = (2 * b, 2 * b);
        j[r * m + c + 1] = -1.0;
        j[(r + 1) * m + c] = 1.0;
    }
    j
}

/// Applies the standard structure to a vector without forming the matrix.
pub fn apply_standard(x: &[f64], out: &mut [f64]) {
    for (pair, o) in x.chunks_exact(2).zip(out.chunks_exact_mut(2)) {
        o[0] = -pair[1];
        o[1] = pair[0];
    }
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_known_matrix() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let mut inv = [0.0; 9];
        assert!(invert(&a, &mut inv, 3));
        let mut id = [0.0; 9];
        matmul(&a, &inv, &mut id, 3);
        for (k, v) in id.iter().enumerate() {
            let e = if k / 3 == k % 3 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-14);
        }
        assert!(!invert(&[1.0, 2.0, 2.0, 4.0], &mut [0.0; 4], 2));
    }

    #[test]
    fn standard_structure_squares_to_minus_one() {
        let j = standard_complex_structure(3);
        let mut sq = vec![0.0; 36];
        matmul(&j, &j, &mut sq, 6);
        for (k, v) in sq.iter().enumerate() {
            assert_eq!(*v, if k / 6 == k % 6 { -1.0 } else { 0.0 });
        }
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (mut a, mut b) = ([0.0; 6], [0.0; 6]);
        matvec(&j, &x, &mut a, 6);
        apply_standard(&x, &mut b);
        assert_eq!(a, b);
    }
}
