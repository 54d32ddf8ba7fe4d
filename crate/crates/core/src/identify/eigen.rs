use crate::scalar::Real;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// `a` is row-major `n × n`. Returns eigenvalues and a row-major matrix whose
/// column `k` is the unit eigenvector of eigenvalue `k`. Only the upper
/// triangle of `a` is trusted.
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(a.len(), n * n, "matrix is not n × n");
    let mut m = a.to_vec();
    for i in 0..n {
        for j in 0..i {
            m[i * n + j] = m[j * n + i];
        }
    }
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }

    let scale: T = m.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if scale == T::zero() {
        return (vec![T::zero(); n], v);
    }
    let tol = T::epsilon() * scale;
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i * n + i]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reconstruct(vals: &[f64], vecs: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| vecs[i * n + k] * vals[k] * vecs[j * n + k]).sum();
            }
        }
        out
    }

    #[test]
    fn diagonal_is_fixed_point() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        let (vals, vecs) = symmetric_eigen(&a, 3);
        assert_eq!(vals, vec![3.0, -1.0, 2.0]);
        assert_eq!(reconstruct(&vals, &vecs, 3), a.to_vec());
    }

    proptest! {
        #[test]
        fn agrees_with_nalgebra(n in 1usize..12, seed in proptest::collection::vec(-1.0f64..1.0, 144)) {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    a[i * n + j] = seed[i * 12 + j];
                    a[j * n + i] = seed[i * 12 + j];
                }
            }
            let (vals, vecs) = symmetric_eigen(&a, n);
            let back = reconstruct(&vals, &vecs, n);
            for (x, y) in back.iter().zip(&a) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let mut ours = vals.clone();
            ours.sort_by(f64::total_cmp);
            let mut theirs: Vec<f64> = nalgebra::DMatrix::from_row_slice(n, n, &a)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            theirs.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&theirs) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            // orthonormal columns
            for p in 0..n {
                for q in 0..n {
                    let dot: f64 = (0..n).map(|k| vecs[k * n + p] * vecs[k * n + q]).sum();
                    let expect = if p == q { 1.0 } else { 0.0 };
                    prop_assert!((dot - expect).abs() < 1e-12);
                }
            }
        }
    }
}
