//! Shared dense linear-algebra helpers: thresholded pseudo-inverse, numerical
//! rank, matrix exponential and the integral kernel `g(t;A)`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Inverse, Norm, OperationNorm, SVD};

use crate::error::{Error, Result};

/// Singular values of `m` in descending order.
pub fn singular_values(m: &Array2<c64>) -> Result<Vec<f64>> {
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.to_vec())
}

/// Numerical rank: number of singular values above `rel * sigma_max`.
pub fn numerical_rank(m: &Array2<c64>, rel: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > rel * smax).count())
}

/// Moore-Penrose pseudo-inverse discarding singular values `<= rel * sigma_max`.
pub fn pinv_thresholded(m: &Array2<c64>, rel: f64) -> Result<Array2<c64>> {
    let (u, s, vt) = m.svd(true, true)?;
    let u = u.expect("svd: requested u");
    let vt = vt.expect("svd: requested vt");
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let sinv: Array1<c64> = s
        .iter()
        .map(|&x| {
            if x > rel * smax && x > 0.0 {
                c64::new(1.0 / x, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })
        .collect();
    // pinv = V S^+ U^*
    let k = s.len();
    let v = vt.slice(ndarray::s![..k, ..]).mapv(|x| x.conj()).reversed_axes();
    let uh = u.slice(ndarray::s![.., ..k]).mapv(|x| x.conj()).reversed_axes();
    let scaled = &v * &sinv; // broadcasts over columns
    Ok(scaled.dot(&uh))
}

/// Condition-style invertibility check: `sigma_min > rel * sigma_max`.
pub fn is_invertible(m: &Array2<c64>, rel: f64) -> Result<bool> {
    let s = singular_values(m)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) => Ok(lo > rel * hi),
        _ => Ok(false),
    }
}

/// Matrix exponential by scaling-and-squaring with a degree-13 Pade approximant.
pub fn expm(a: &Array2<c64>) -> Result<Array2<c64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "expm requires a square matrix, got {}x{}",
            d,
            a.ncols()
        )));
    }
    const THETA13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let norm1 = a.opnorm_one()?;
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.mapv(|x| x / 2f64.powi(s));
    let eye = Array2::<c64>::eye(d);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let u_inner = a6.mapv(|x| x * B[13]) + a4.mapv(|x| x * B[11]) + a2.mapv(|x| x * B[9]);
    let u = a.dot(
        &(a6.dot(&u_inner)
            + a6.mapv(|x| x * B[7])
            + a4.mapv(|x| x * B[5])
            + a2.mapv(|x| x * B[3])
            + eye.mapv(|x| x * B[1])),
    );
    let v_inner = a6.mapv(|x| x * B[12]) + a4.mapv(|x| x * B[10]) + a2.mapv(|x| x * B[8]);
    let v = a6.dot(&v_inner)
        + a6.mapv(|x| x * B[6])
        + a4.mapv(|x| x * B[4])
        + a2.mapv(|x| x * B[2])
        + eye.mapv(|x| x * B[0]);
    let num = &v + &u;
    let den = &v - &u;
    let mut r = den.inv()?.dot(&num);
    for _ in 0..s {
        r = r.dot(&r);
    }
    if r.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Numerical("matrix exponential produced non-finite entries".into()));
    }
    Ok(r)
}

/// The integral kernel `g(t;A) = sum_{k>=0} t^{k+1}/(k+1)! A^k`, which satisfies
/// `A g(t;A) = e^{tA} - I`. Uses the exponential identity when `A` is
/// numerically invertible and the power series otherwise.
pub fn g_kernel(t: f64, a: &Array2<c64>) -> Result<Array2<c64>> {
    let d = a.nrows();
    if is_invertible(a, 1e-10)? {
        let e = expm(&a.mapv(|x| x * t))?;
        let num = e - Array2::<c64>::eye(d);
        return Ok(num.dot(&a.inv()?));
    }
    // g(t;A) = t * sum_k (tA)^k / (k+1)!
    let ta = a.mapv(|x| x * t);
    let mut acc = Array2::<c64>::eye(d);
    let mut term = Array2::<c64>::eye(d);
    for k in 1..=300 {
        term = term.dot(&ta).mapv(|x| x / (k as f64 + 1.0));
        acc = acc + &term;
        if term.norm_l2() < 1e-16 * acc.norm_l2() {
            break;
        }
    }
    Ok(acc.mapv(|x| x * t))
}

/// Krylov matrix `[b, Ab, ..., A^{k-1} b]` as a `d x k` matrix.
pub fn krylov_matrix(a: &Array2<c64>, b: &Array1<c64>, k: usize) -> Array2<c64> {
    let d = b.len();
    let mut m = Array2::<c64>::zeros((d, k));
    let mut v = b.clone();
    for j in 0..k {
        m.column_mut(j).assign(&v);
        if j + 1 < k {
            v = a.dot(&v);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cm(rows: &[&[f64]]) -> Array2<c64> {
        let r = rows.len();
        let c = rows[0].len();
        Array2::from_shape_fn((r, c), |(i, j)| c64::new(rows[i][j], 0.0))
    }

    #[test]
    fn pinv_identity() {
        let eye = Array2::<c64>::eye(3);
        let p = pinv_thresholded(&eye, 1e-12).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((p[[i, j]].re - expect).abs() < 1e-12);
                assert!(p[[i, j]].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_diagonal_with_zero() {
        let m = cm(&[&[2.0, 0.0], &[0.0, 0.0]]);
        let p = pinv_thresholded(&m, 1e-12).unwrap();
        assert!((p[[0, 0]].re - 0.5).abs() < 1e-14);
        assert!(p[[1, 1]].norm() < 1e-14);
    }

    #[test]
    fn pinv_left_inverse_full_rank() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = Array2::from_shape_fn((5, 3), |_| c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let p = pinv_thresholded(&m, 1e-12).unwrap();
        let prod = p.dot(&m);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - c64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn expm_scalar() {
        let m = array![[c64::new(-1.0, 0.0)]];
        let e = expm(&m).unwrap();
        assert!((e[[0, 0]].re - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn expm_rotation_block() {
        // exp([[0,-t],[t,0]]) = rotation by t
        let t = 0.7;
        let m = cm(&[&[0.0, -t], &[t, 0.0]]);
        let e = expm(&m).unwrap();
        assert!((e[[0, 0]].re - t.cos()).abs() < 1e-13);
        assert!((e[[1, 0]].re - t.sin()).abs() < 1e-13);
    }

    #[test]
    fn g_kernel_zero_matrix() {
        let z = Array2::<c64>::zeros((3, 3));
        let g = g_kernel(2.5, &z).unwrap();
        for i in 0..3 {
            assert!((g[[i, i]].re - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn g_kernel_identity_invertible() {
        // A g(1;A) = e^A - I for invertible A
        let a = cm(&[&[0.5, 0.2], &[-0.1, 0.3]]);
        let g = g_kernel(1.0, &a).unwrap();
        let lhs = a.dot(&g);
        let rhs = expm(&a).unwrap() - Array2::<c64>::eye(2);
        let diff = (&lhs - &rhs).norm_l2();
        assert!(diff < 1e-12 * rhs.norm_l2().max(1.0));
    }
}
