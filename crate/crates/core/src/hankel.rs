//! Stacked Hankel-like data matrices, numerical-rank estimation for the number
//! of recoverable eigenvalues, and the confluent-Vandermonde factorization used
//! as a structural test oracle.

use ndarray::{s, Array1, Array2, ArrayView2};
use ndarray_linalg::c64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::systems::{JordanSpec, ObservedSeries};

/// The stacked Hankel-like matrix built from an observed series, together with
/// its two column windows.
///
/// Layout is time-major: block row `m` (of size `|omega|`) of column `l` holds
/// the observed sample at time `m + l`.
#[derive(Debug, Clone)]
pub struct HankelPair {
    full: Array2<c64>,
    m: usize,
    l: usize,
    omega: Vec<usize>,
}

impl HankelPair {
    /// The full `(M-L)|omega| x (L+1)` matrix.
    pub fn full(&self) -> &Array2<c64> {
        &self.full
    }

    /// Columns `1..L` (1-based), i.e. the window at time shift 0.
    pub fn h0(&self) -> ArrayView2<'_, c64> {
        self.full.slice(s![.., ..self.l])
    }

    /// Columns `2..L+1` (1-based), the window at time shift 1.
    pub fn h1(&self) -> ArrayView2<'_, c64> {
        self.full.slice(s![.., 1..])
    }

    /// Window of `L` columns starting at time shift `t` (only 0 and 1 exist).
    pub fn window(&self, t: usize) -> ArrayView2<'_, c64> {
        self.full.slice(s![.., t..t + self.l])
    }

    pub fn n_samples(&self) -> usize {
        self.m
    }

    pub fn window_len(&self) -> usize {
        self.l
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn block_rows(&self) -> usize {
        self.m - self.l
    }
}

/// Build `H_{Omega, M-L, L+1}` from an observed series.
pub fn build_hankel(series: &ObservedSeries, l: usize) -> Result<HankelPair> {
    let m = series.len();
    if l == 0 || l >= m {
        return Err(Error::InvalidArgument(format!(
            "window length L = {l} must satisfy 1 <= L <= M-1 = {}",
            m.saturating_sub(1)
        )));
    }
    let k = series.n_observed();
    let rows = (m - l) * k;
    let mut full = Array2::<c64>::zeros((rows, l + 1));
    for col in 0..=l {
        for blk in 0..m - l {
            let src = series.samples().row(blk + col);
            full.slice_mut(s![blk * k..(blk + 1) * k, col]).assign(&src);
        }
    }
    Ok(HankelPair { full, m, l, omega: series.omega().to_vec() })
}

/// Practical default window length, `floor(M/2)`.
pub fn default_window(m: usize) -> usize {
    (m / 2).max(1)
}

/// Which of the three numerical-rank criteria selects `chosen`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCriterion {
    /// Count of singular values above `eps_rel * sigma_1`.
    Absolute,
    /// Largest consecutive singular-value quotient.
    Quotient,
    /// Largest gap among descending-sorted quotients.
    Gap,
}

/// Rank selection configuration: preferred criterion plus the relative
/// threshold used by the absolute criterion.
#[derive(Debug, Clone, Copy)]
pub struct RankPolicy {
    pub criterion: RankCriterion,
    pub eps_rel: f64,
    /// When the largest quotient falls below this value the spectrum is
    /// considered flat and the absolute criterion is used instead.
    pub flat_guard: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        Self { criterion: RankCriterion::Quotient, eps_rel: 1e-8, flat_guard: 10.0 }
    }
}

/// Output of the numerical-rank estimation: all three criteria plus the
/// selected value.
#[derive(Debug, Clone)]
pub struct RankEstimate {
    pub singular_values: Vec<f64>,
    pub r_abs: usize,
    pub r_quot: usize,
    pub r_gap: usize,
    pub chosen: usize,
    pub criterion_used: RankCriterion,
}

/// Estimate the numerical rank of the stacked Hankel matrix with the default
/// policy (quotient criterion, absolute fallback on flat spectra).
pub fn estimate_rank(pair: &HankelPair, eps_rel: f64) -> Result<RankEstimate> {
    estimate_rank_with(pair, &RankPolicy { eps_rel, ..RankPolicy::default() })
}

pub fn estimate_rank_with(pair: &HankelPair, policy: &RankPolicy) -> Result<RankEstimate> {
    let sv = linalg::singular_values(pair.full())?;
    if sv.is_empty() {
        return Err(Error::InvalidArgument("empty Hankel matrix".into()));
    }
    let smax = sv[0];
    let r_abs = sv.iter().filter(|&&x| x > policy.eps_rel * smax).count();
    let n = sv.len();
    // quotients q_r = sigma_r / sigma_{r+1}, 1-based r in 1..n
    let mut quotients = Vec::with_capacity(n.saturating_sub(1));
    let mut r_quot = 1;
    let mut best = f64::NEG_INFINITY;
    let mut found_inf = false;
    let (rows, cols) = pair.full().dim();
    // singular values at rounding-noise level carry no rank information;
    // quotients among them would otherwise pick arbitrary winners
    let floor = smax * f64::EPSILON * (rows.max(cols) as f64).sqrt();
    for r in 1..n {
        let q = if sv[r] <= floor {
            if sv[r - 1] > floor { f64::INFINITY } else { 1.0 }
        } else {
            sv[r - 1] / sv[r]
        };
        quotients.push(q);
        if q.is_infinite() && !found_inf {
            // noise-level tail: smallest such index wins outright
            r_quot = r;
            found_inf = true;
        }
        if !found_inf && q > best {
            best = q;
            r_quot = r;
        }
    }
    if n == 1 {
        r_quot = if smax > 0.0 { 1 } else { 0 };
    }
    // gap criterion: reorder quotients descending, find the largest drop,
    // report the original index of the quotient before the drop
    let r_gap = if quotients.len() < 2 {
        r_quot
    } else {
        let mut order: Vec<usize> = (0..quotients.len()).collect();
        order.sort_by(|&a, &b| {
            quotients[b].partial_cmp(&quotients[a]).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut best_gap = f64::NEG_INFINITY;
        let mut at = 0;
        for w in 0..order.len() - 1 {
            let hi = quotients[order[w]];
            let lo = quotients[order[w + 1]];
            let gap = if hi.is_infinite() { f64::INFINITY } else { hi - lo };
            if gap > best_gap {
                best_gap = gap;
                at = w;
            }
        }
        order[at] + 1
    };
    let max_quot = quotients.iter().cloned().fold(0.0f64, f64::max);
    let (chosen, criterion_used) = match policy.criterion {
        RankCriterion::Absolute => (r_abs, RankCriterion::Absolute),
        RankCriterion::Quotient if max_quot < policy.flat_guard => {
            (r_abs, RankCriterion::Absolute)
        }
        RankCriterion::Quotient => (r_quot, RankCriterion::Quotient),
        RankCriterion::Gap => (r_gap, RankCriterion::Gap),
    };
    Ok(RankEstimate { singular_values: sv, r_abs, r_quot, r_gap, chosen, criterion_used })
}

/// Split the time-major stack into the `|omega|` per-index scalar Hankel
/// matrices whose vertical stack is a row permutation of the full matrix.
pub fn permute_stacked(pair: &HankelPair) -> Vec<Array2<c64>> {
    let k = pair.omega.len();
    let blocks = pair.block_rows();
    let cols = pair.l + 1;
    (0..k)
        .map(|j| {
            Array2::from_shape_fn((blocks, cols), |(m, l)| pair.full[[m * k + j, l]])
        })
        .collect()
}

/// The confluent-Vandermonde factorization of a single-index Hankel stack:
/// `H(t) = V_left^T Lambda Jhat^t V_right` for `t = 0, 1`.
#[derive(Debug, Clone)]
pub struct JordanFactorization {
    /// `r x (M-L)` confluent Vandermonde block (the left factor, transposed).
    pub v_left: Array2<c64>,
    /// `r x L` confluent Vandermonde block (the right factor).
    pub v_right: Array2<c64>,
    /// `r x r` block-diagonal triangular-Hankel coupling matrix.
    pub lambda: Array2<c64>,
    /// `r x r` reduced Jordan matrix.
    pub jhat: Array2<c64>,
    /// Retained per-eigenvalue local degrees (zero-degree eigenvalues dropped).
    pub local_degrees: Vec<usize>,
}

impl JordanFactorization {
    pub fn total_degree(&self) -> usize {
        self.local_degrees.iter().sum()
    }

    /// Reconstruct `H(t)` as `V_left^T Lambda Jhat^t V_right`.
    pub fn reconstruct(&self, t: usize) -> Array2<c64> {
        let mut jt = Array2::<c64>::eye(self.jhat.nrows());
        for _ in 0..t {
            jt = jt.dot(&self.jhat);
        }
        self.v_left.t().dot(&self.lambda).dot(&jt).dot(&self.v_right)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn confluent_vandermonde(lambda: c64, degree: usize, width: usize) -> Array2<c64> {
    Array2::from_shape_fn((degree, width), |(k, l)| {
        if k > l {
            c64::new(0.0, 0.0)
        } else {
            lambda.powi((l - k) as i32) * binomial(l, k)
        }
    })
}

/// Factorize the single-index Hankel stack of the homogeneous system
/// `x_t = A^t b`, `A = U J U^{-1}`, observed at the single coordinate
/// `omega_index` (1-based).
pub fn jordan_factorization(
    spec: &JordanSpec,
    b: &Array1<c64>,
    omega_index: usize,
    m: usize,
    l: usize,
) -> Result<JordanFactorization> {
    let d = spec.dim();
    if omega_index == 0 || omega_index > d {
        return Err(Error::InvalidArgument(format!(
            "omega index must lie in 1..={d}"
        )));
    }
    if b.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "b must have length {d}, got {}",
            b.len()
        )));
    }
    if l == 0 || l >= m {
        return Err(Error::InvalidArgument("need 1 <= L <= M-1".into()));
    }
    use ndarray_linalg::{Inverse, Norm};
    let u = spec.similarity();
    let uinv = u.inv()?;
    let vb = uinv.dot(b); // U^{-1} b
    let mut ei = Array1::<c64>::zeros(d);
    ei[omega_index - 1] = c64::new(1.0, 0.0);
    let ustar_ei = u.mapv(|x| x.conj()).t().dot(&ei); // U^* e_i

    // per-eigenvalue coupling coefficients alpha_j = <N_s^j b_s, u_s>
    let n_eigs = spec.eigenvalues().len();
    let mut kept: Vec<(usize, usize, Vec<c64>)> = Vec::new(); // (s, r_s, alphas)
    for s in 0..n_eigs {
        let ns = spec.nilpotent(s);
        let bs = spec.segment_of(&vb, s);
        let us = spec.segment_of(&ustar_ei, s);
        let tol = 1e-10 * bs.norm_l2().max(1e-300) * us.norm_l2().max(1e-300);
        let h = spec.multiplicity(s);
        let mut alphas = Vec::with_capacity(h);
        let mut v = bs.clone();
        for _ in 0..h {
            let ip: c64 = v.iter().zip(us.iter()).map(|(x, y)| x * y.conj()).sum();
            alphas.push(ip);
            v = ns.dot(&v);
        }
        let r_s = alphas
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(j, _)| j + 1)
            .max()
            .unwrap_or(0);
        if r_s > 0 {
            alphas.truncate(r_s);
            kept.push((s, r_s, alphas));
        }
    }
    let r: usize = kept.iter().map(|(_, rs, _)| rs).sum();
    if r == 0 {
        return Err(Error::InvalidArgument(
            "no eigenvalue is recoverable from this coordinate".into(),
        ));
    }
    let mut v_left = Array2::<c64>::zeros((r, m - l));
    let mut v_right = Array2::<c64>::zeros((r, l));
    let mut lam = Array2::<c64>::zeros((r, r));
    let mut jhat = Array2::<c64>::zeros((r, r));
    let mut off = 0;
    let mut local_degrees = Vec::with_capacity(kept.len());
    for (s, r_s, alphas) in &kept {
        let lam_s = spec.eigenvalues()[*s];
        v_left
            .slice_mut(s![off..off + r_s, ..])
            .assign(&confluent_vandermonde(lam_s, *r_s, m - l));
        v_right
            .slice_mut(s![off..off + r_s, ..])
            .assign(&confluent_vandermonde(lam_s, *r_s, l));
        for p in 0..*r_s {
            for q in 0..*r_s {
                if p + q < *r_s {
                    lam[[off + p, off + q]] = alphas[p + q];
                }
            }
            jhat[[off + p, off + p]] = lam_s;
            if p + 1 < *r_s {
                jhat[[off + p + 1, off + p]] = c64::new(1.0, 0.0);
            }
        }
        off += r_s;
        local_degrees.push(*r_s);
    }
    Ok(JordanFactorization { v_left, v_right, lambda: lam, jhat, local_degrees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{
        build_from_jordan, difference_transform, observe, simulate_discrete, AffineSystem,
        ObservedSeries, StepKind,
    };
    use crate::testutil::{cx, jordan8_spec, jordan8_system, rvec};
    use ndarray::array;
    use ndarray_linalg::Norm;

    fn scalar_series(values: &[f64]) -> ObservedSeries {
        let samples =
            Array2::from_shape_vec((values.len(), 1), rvec(values).to_vec()).unwrap();
        ObservedSeries::new(vec![1], samples, StepKind::Discrete).unwrap()
    }

    /// Homogeneous defective 8-dim fixture trajectory at the differencing vector w.
    fn jordan8_w_series(omega: &[usize], m: usize) -> ObservedSeries {
        let sys = jordan8_system();
        let d = sys.dim();
        let w = (sys.matrix() - &Array2::<c64>::eye(d)).dot(sys.initial_state()) + sys.drive();
        let homo = AffineSystem::homogeneous(sys.matrix().clone(), w).unwrap();
        observe(&simulate_discrete(&homo, m).unwrap(), omega).unwrap()
    }

    #[test]
    fn scalar_layout_definitional() {
        let pair = build_hankel(&scalar_series(&[1.0, 2.0, 4.0, 8.0]), 2).unwrap();
        assert_eq!(pair.full().nrows(), 2);
        assert_eq!(pair.full().ncols(), 3);
        let expect = [[1.0, 2.0, 4.0], [2.0, 4.0, 8.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(pair.full()[[i, j]], cx(expect[i][j]));
            }
        }
        assert_eq!(pair.h0().ncols(), 2);
        assert_eq!(pair.h1()[[0, 0]], cx(2.0));
    }

    #[test]
    fn rank_two_node_system() {
        let a = array![[cx(0.5), cx(0.0)], [cx(0.0), cx(-0.2)]];
        let sys = AffineSystem::homogeneous(a, rvec(&[1.0, 1.0])).unwrap();
        let series = observe(&simulate_discrete(&sys, 6).unwrap(), &[1, 2]).unwrap();
        let pair = build_hankel(&series, 2).unwrap();
        assert_eq!(linalg::numerical_rank(pair.full(), 1e-10).unwrap(), 2);
    }

    #[test]
    fn rank_jordan8_full_omega() {
        let series = jordan8_w_series(&[1, 2, 4, 7], 24);
        let pair = build_hankel(&series, 8).unwrap();
        assert_eq!(linalg::numerical_rank(pair.full(), 1e-8).unwrap(), 6);
    }

    #[test]
    fn l_out_of_range() {
        let s = scalar_series(&[1.0, 2.0]);
        assert!(build_hankel(&s, 0).is_err());
        assert!(build_hankel(&s, 2).is_err());
    }

    #[test]
    fn estimate_rank_scalar_geometric() {
        let vals: Vec<f64> = (0..10).map(|t| 0.5f64.powi(t)).collect();
        let pair = build_hankel(&scalar_series(&vals), 5).unwrap();
        let est = estimate_rank(&pair, 1e-8).unwrap();
        assert_eq!(est.r_abs, 1);
        assert_eq!(est.r_quot, 1);
        assert_eq!(est.r_gap, 1);
        assert_eq!(est.chosen, 1);
    }

    #[test]
    fn estimate_rank_jordan8_nested_omegas() {
        for (omega, expect) in [
            (vec![1usize], 1usize),
            (vec![1, 4], 4),
            (vec![1, 4, 7], 5),
            (vec![1, 2, 4, 7], 6),
        ] {
            let series = jordan8_w_series(&omega, 24);
            let pair = build_hankel(&series, 8).unwrap();
            let est = estimate_rank(&pair, 1e-8).unwrap();
            assert_eq!(est.chosen, expect, "omega = {omega:?}");
        }
    }

    #[test]
    fn shift_identity_exact() {
        // deleting the first block row of H0 equals deleting the last column's
        // worth of shift: both give the window advanced by one sample
        let series = jordan8_w_series(&[1, 2], 20);
        let pair = build_hankel(&series, 6).unwrap();
        let k = 2;
        let h0 = pair.h0();
        let h1 = pair.h1();
        let rows = pair.full().nrows();
        for i in 0..rows - k {
            for j in 0..pair.window_len() - 1 {
                assert_eq!(h0[[i + k, j]], h1[[i, j]]);
            }
        }
    }

    #[test]
    fn permute_roundtrip_and_rank() {
        let series = jordan8_w_series(&[1, 2, 4], 18);
        let pair = build_hankel(&series, 6).unwrap();
        let parts = permute_stacked(&pair);
        assert_eq!(parts.len(), 3);
        // stacking the parts is a row permutation of full
        for (j, part) in parts.iter().enumerate() {
            for m in 0..pair.block_rows() {
                for l in 0..=pair.window_len() {
                    assert_eq!(part[[m, l]], pair.full()[[m * 3 + j, l]]);
                }
            }
        }
        let stacked = ndarray::concatenate(
            ndarray::Axis(0),
            &parts.iter().map(|p| p.view()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(
            linalg::numerical_rank(&stacked, 1e-10).unwrap(),
            linalg::numerical_rank(pair.full(), 1e-10).unwrap()
        );
        // |omega| = 1 is the identity
        let s1 = jordan8_w_series(&[1], 12);
        let p1 = build_hankel(&s1, 4).unwrap();
        let parts1 = permute_stacked(&p1);
        assert_eq!(parts1[0], *p1.full());
    }

    #[test]
    fn factorization_diagonal_collapses_to_vandermonde() {
        let spec = JordanSpec::new(
            vec![cx(0.5), cx(-0.2)],
            vec![vec![1], vec![1]],
            Array2::eye(2),
        )
        .unwrap();
        let b = rvec(&[1.0, 1.0]);
        let f = jordan_factorization(&spec, &b, 1, 8, 3).unwrap();
        // only eigenvalue 0.5 couples to coordinate 1 under U = I
        assert_eq!(f.local_degrees, vec![1]);
        assert_eq!(f.v_right.nrows(), 1);
        for l in 0..3 {
            assert!((f.v_right[[0, l]] - cx(0.5f64.powi(l as i32))).norm() < 1e-14);
        }
    }

    #[test]
    fn factorization_reconstructs_jordan8() {
        let spec = jordan8_spec();
        let b = rvec(&[8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let (m, l) = (24usize, 8usize);
        let f = jordan_factorization(&spec, &b, 1, m, l).unwrap();
        let sys = build_from_jordan(&spec, b, Array1::zeros(8)).unwrap();
        let series = observe(&simulate_discrete(&sys, m).unwrap(), &[1]).unwrap();
        let pair = build_hankel(&series, l).unwrap();
        for t in 0..2usize {
            let h = pair.window(t).to_owned();
            let rec = f.reconstruct(t);
            let err = (&h - &rec).norm_l2();
            assert!(err <= 1e-10 * h.norm_l2(), "t = {t}, err = {err:.3e}");
        }
    }

    #[test]
    fn factorization_single_block_binomial_entries() {
        // single Jordan block lambda = 0.3, size 2, b = e_1, U = I, omega = {2}:
        // the chain seed is e_1 and coordinate 2 reads t * 0.3^(t-1), so
        // H(0)[m,l] = (m+l) * 0.3^(m+l-1)
        let spec = JordanSpec::new(vec![cx(0.3)], vec![vec![2]], Array2::eye(2)).unwrap();
        let b = rvec(&[1.0, 0.0]);
        let (m, l) = (8usize, 3usize);
        let f = jordan_factorization(&spec, &b, 2, m, l).unwrap();
        let rec = f.reconstruct(0);
        for mm in 0..m - l {
            for ll in 0..l {
                let e = mm + ll;
                let expect = if e == 0 { 0.0 } else { e as f64 * 0.3f64.powi(e as i32 - 1) };
                assert!((rec[[mm, ll]] - cx(expect)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn factorization_matches_differenced_affine() {
        let sys = jordan8_system();
        let d = sys.dim();
        let w = (sys.matrix() - &Array2::<c64>::eye(d)).dot(sys.initial_state()) + sys.drive();
        let spec = jordan8_spec();
        let (m, l) = (20usize, 6usize);
        let f = jordan_factorization(&spec, &w, 1, m, l).unwrap();
        let series = difference_transform(
            &observe(&simulate_discrete(&sys, m + 1).unwrap(), &[1]).unwrap(),
        )
        .unwrap();
        let pair = build_hankel(&series, l).unwrap();
        let h = pair.window(0).to_owned();
        let rec = f.reconstruct(0);
        assert!((&h - &rec).norm_l2() <= 1e-10 * h.norm_l2());
    }
}
