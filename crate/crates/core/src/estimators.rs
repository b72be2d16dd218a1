//! Eigenvalue recovery from an observed series: Prony (LS/TLS), generalized
//! matrix pencil (LS/TLS/SVD) and generalized ESPRIT, plus the principal-log
//! map for continuous-time sampling.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{c64, Eig, Norm, SVD};

use crate::error::{Error, Result};
use crate::hankel;
pub use crate::linalg::pinv_thresholded;
use crate::systems::ObservedSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PronyLs,
    PronyTls,
    MpLs,
    MpTls,
    MpSvd,
    Esprit,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::PronyLs => "prony_ls",
            Method::PronyTls => "prony_tls",
            Method::MpLs => "mp_ls",
            Method::MpTls => "mp_tls",
            Method::MpSvd => "mp_svd",
            Method::Esprit => "esprit",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "prony_ls" => Ok(Method::PronyLs),
            "prony_tls" => Ok(Method::PronyTls),
            "mp_ls" => Ok(Method::MpLs),
            "mp_tls" => Ok(Method::MpTls),
            "mp_svd" => Ok(Method::MpSvd),
            "esprit" => Ok(Method::Esprit),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Ls,
    Tls,
}

/// Estimation knobs. `l`/`r` default to `floor(M/2)` and the rank estimate of
/// the Hankel matrix respectively.
///
/// `eta_rel` scales with the largest estimated eigenvalue modulus (the source
/// algorithm leaves the pruning threshold as an unspecified small constant; we
/// make it relative so the choice is unit-free).
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    pub l: Option<usize>,
    pub r: Option<usize>,
    /// Rank threshold for the absolute criterion.
    pub eps_rel: f64,
    /// Relative modulus below which pencil eigenvalues are discarded as the
    /// structural zeros of the rank-deficient pencil.
    pub eta_rel: f64,
    /// Relative singular-value cutoff for every pseudo-inverse.
    pub pinv_rel: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { l: None, r: None, eps_rel: 1e-8, eta_rel: 1e-8, pinv_rel: 1e-12 }
    }
}

impl EstimatorConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_rel", self.eps_rel),
            ("eta_rel", self.eta_rel),
            ("pinv_rel", self.pinv_rel),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0,1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Recovered spectrum plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    pub eigenvalues: Vec<c64>,
    pub method: Method,
    pub r_used: usize,
    /// Residual of the linear system that was solved (Hankel equation or
    /// shifted-subspace equation); 0 for purely algebraic paths.
    pub residual: f64,
    /// Pencil eigenvalues discarded as structural zeros.
    pub n_pruned: usize,
    /// TLS solve was degenerate and fell back to LS.
    pub tls_fallback: bool,
    /// Set by the continuous-time log map: entries flagged true sit on the
    /// branch cut and are passed through unmapped.
    pub ambiguous: Vec<bool>,
    /// Zero eigenvalues dropped by the continuous-time log map.
    pub n_dropped_zero: usize,
    /// LS coefficient matrix was numerically rank-deficient.
    pub ill_posed: bool,
}

impl SpectrumEstimate {
    fn new(method: Method, r_used: usize, eigenvalues: Vec<c64>) -> Self {
        Self {
            eigenvalues,
            method,
            r_used,
            residual: 0.0,
            n_pruned: 0,
            tls_fallback: false,
            ambiguous: Vec::new(),
            n_dropped_zero: 0,
            ill_posed: false,
        }
    }
}

/// Roots of the monic polynomial `z^n + c_{n-1} z^{n-1} + ... + c_0` via the
/// eigenvalues of its companion matrix.
pub fn companion_roots(monic_coeffs: &[c64]) -> Result<Vec<c64>> {
    let n = monic_coeffs.len();
    if n == 0 {
        return Err(Error::InvalidArgument("polynomial degree must be >= 1".into()));
    }
    let mut comp = Array2::<c64>::zeros((n, n));
    for i in 1..n {
        comp[[i, i - 1]] = c64::new(1.0, 0.0);
    }
    for i in 0..n {
        comp[[i, n - 1]] = -monic_coeffs[i];
    }
    let (vals, _) = comp.eig()?;
    Ok(vals.to_vec())
}

fn eig_values(m: &Array2<c64>) -> Result<Vec<c64>> {
    let (vals, _) = m.eig()?;
    Ok(vals.to_vec())
}

/// Prony's method: solve the Hankel system for the coefficients of the minimal
/// annihilating polynomial, then take its roots.
pub fn prony(series: &ObservedSeries, r: usize, variant: Variant) -> Result<SpectrumEstimate> {
    prony_with(series, r, variant, 1e-12)
}

pub fn prony_with(
    series: &ObservedSeries,
    r: usize,
    variant: Variant,
    pinv_rel: f64,
) -> Result<SpectrumEstimate> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    let m = series.len();
    if m <= r || (m - r) * series.n_observed() < r {
        return Err(Error::InsufficientData(format!(
            "need (M-r)|omega| >= r rows; M = {m}, r = {r}, |omega| = {}",
            series.n_observed()
        )));
    }
    let pair = hankel::build_hankel(series, r)?;
    let h0 = pair.h0().to_owned();
    let h_last = pair.full().column(r).to_owned();

    let mut tls_fallback = false;
    let q: Array1<c64> = match variant {
        Variant::Tls => {
            let (_, _, vt) = pair.full().svd(false, true)?;
            let vt = vt.ok_or(Error::Numerical("SVD returned no right vectors".into()))?;
            // last column of W is the conjugate of the last row of W^*
            let denom = vt[[r, r]].conj();
            let col_norm: f64 = (0..=r).map(|j| vt[[r, j]].norm_sqr()).sum::<f64>().sqrt();
            if denom.norm() < 1e-12 * col_norm.max(f64::MIN_POSITIVE) {
                tls_fallback = true;
                prony_ls_coeffs(&h0, &h_last, pinv_rel)?
            } else {
                Array1::from_iter((0..r).map(|j| vt[[r, j]].conj() / denom))
            }
        }
        Variant::Ls => prony_ls_coeffs(&h0, &h_last, pinv_rel)?,
    };
    let ill_posed = crate::linalg::numerical_rank(&h0, pinv_rel)? < r;
    let roots = companion_roots(q.as_slice().unwrap())?;
    let residual = (&h0.dot(&q) + &h_last).norm_l2();
    let mut est = SpectrumEstimate::new(
        if matches!(variant, Variant::Tls) { Method::PronyTls } else { Method::PronyLs },
        r,
        roots,
    );
    est.residual = residual;
    est.tls_fallback = tls_fallback;
    est.ill_posed = ill_posed;
    Ok(est)
}

fn prony_ls_coeffs(
    h0: &Array2<c64>,
    h_last: &Array1<c64>,
    pinv_rel: f64,
) -> Result<Array1<c64>> {
    let pinv = pinv_thresholded(h0, pinv_rel)?;
    let mut q = -pinv.dot(h_last);
    // iterative refinement: driving the residual to the noise floor is what
    // keeps clustered roots from splitting
    for _ in 0..2 {
        let res = h0.dot(&q) + h_last;
        q = &q - &pinv.dot(&res);
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilVariant {
    Ls,
    Tls,
    Svd,
}

/// Generalized matrix pencil: eigenvalues of a solution `C` of
/// `H(0) C = H(1)`, with the `L - r` structural zeros pruned.
pub fn matrix_pencil(
    series: &ObservedSeries,
    r: usize,
    l: usize,
    variant: PencilVariant,
    eta_rel: f64,
) -> Result<SpectrumEstimate> {
    matrix_pencil_with(series, r, l, variant, eta_rel, 1e-12)
}

pub fn matrix_pencil_with(
    series: &ObservedSeries,
    r: usize,
    l: usize,
    variant: PencilVariant,
    eta_rel: f64,
    pinv_rel: f64,
) -> Result<SpectrumEstimate> {
    let m = series.len();
    if r == 0 || l < r || l + r > m {
        return Err(Error::InvalidArgument(format!(
            "need r <= L <= M - r; r = {r}, L = {l}, M = {m}"
        )));
    }
    let pair = hankel::build_hankel(series, l)?;
    let h0 = pair.h0().to_owned();
    let h1 = pair.h1().to_owned();
    let c = match variant {
        PencilVariant::Ls => {
            let pinv = pinv_thresholded(&h0, pinv_rel)?;
            let mut c = pinv.dot(&h1);
            for _ in 0..2 {
                let res = h0.dot(&c) - &h1;
                c = &c - &pinv.dot(&res);
            }
            c
        }
        PencilVariant::Tls => {
            let aug = ndarray::concatenate(ndarray::Axis(1), &[h0.view(), h1.view()])?;
            let (_, _, vt) = aug.svd(false, true)?;
            let vt = vt.ok_or(Error::Numerical("SVD returned no right vectors".into()))?;
            // the trailing right singular vectors span the nullspace of
            // [H0 H1]; each null column [v1; v2] satisfies H0 v1 = -H1 v2,
            // so the total-least-squares solution of H0 C = H1 is
            // C = -W12 W22^+ with W partitioned into L-row / L-column blocks
            let w = vt.mapv(|x| x.conj()).reversed_axes();
            let top = w.slice(s![..l, l..2 * l]).to_owned();
            let bottom = w.slice(s![l..2 * l, l..2 * l]).to_owned();
            -top.dot(&pinv_thresholded(&bottom, pinv_rel)?)
        }
        PencilVariant::Svd => {
            let (_, _, vt) = pair.full().svd(false, true)?;
            let vt = vt.ok_or(Error::Numerical("SVD returned no right vectors".into()))?;
            if vt.nrows() < r {
                return Err(Error::InsufficientData(format!(
                    "Hankel matrix has fewer than r = {r} singular directions"
                )));
            }
            let left = vt.slice(s![..r, ..l]).to_owned();
            let right = vt.slice(s![..r, 1..l + 1]).to_owned();
            pinv_thresholded(&left, pinv_rel)?.dot(&right)
        }
    };
    let residual = match variant {
        PencilVariant::Ls => (&h0.dot(&c) - &h1).norm_l2(),
        _ => 0.0,
    };
    let raw = eig_values(&c)?;
    let max_mod = raw.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let kept: Vec<c64> = raw.iter().cloned().filter(|z| z.norm() > eta_rel * max_mod).collect();
    let n_pruned = raw.len() - kept.len();
    let method = match variant {
        PencilVariant::Ls => Method::MpLs,
        PencilVariant::Tls => Method::MpTls,
        PencilVariant::Svd => Method::MpSvd,
    };
    let mut est = SpectrumEstimate::new(method, r, kept);
    est.residual = residual;
    est.n_pruned = n_pruned;
    Ok(est)
}

/// Generalized ESPRIT: the signal subspace of the stacked Hankel matrix obeys
/// a shift relation across one-sample time windows; with several observed
/// coordinates the shift removes a whole block of `|omega|` rows.
pub fn esprit(series: &ObservedSeries, r: usize, l: usize) -> Result<SpectrumEstimate> {
    esprit_with(series, r, l, 1e-12)
}

pub fn esprit_with(
    series: &ObservedSeries,
    r: usize,
    l: usize,
    pinv_rel: f64,
) -> Result<SpectrumEstimate> {
    let m = series.len();
    if r == 0 || l < r || l + r > m {
        return Err(Error::InvalidArgument(format!(
            "need r <= L <= M - r; r = {r}, L = {l}, M = {m}"
        )));
    }
    if m - l < r + 1 {
        return Err(Error::InsufficientData(format!(
            "need M - L >= r + 1 block rows; M = {m}, L = {l}, r = {r}"
        )));
    }
    let pair = hankel::build_hankel(series, l)?;
    let (u, _, _) = pair.full().svd(true, false)?;
    let u = u.ok_or(Error::Numerical("SVD returned no left vectors".into()))?;
    if u.ncols() < r {
        return Err(Error::InsufficientData(format!(
            "signal subspace has fewer than r = {r} directions"
        )));
    }
    let k = series.n_observed();
    let rows = pair.full().nrows();
    let sig = u.slice(s![.., ..r]);
    let up = sig.slice(s![..rows - k, ..]).to_owned();
    let down = sig.slice(s![k.., ..]).to_owned();
    let psi = pinv_thresholded(&up, pinv_rel)?.dot(&down);
    let residual = (&up.dot(&psi) - &down).norm_l2();
    let mut est = SpectrumEstimate::new(Method::Esprit, r, eig_values(&psi)?);
    est.residual = residual;
    Ok(est)
}

/// Map discrete multipliers back to continuous-time eigenvalues through the
/// principal logarithm. Multipliers on the negative real axis are ambiguous
/// (the exponential is not injective); they are flagged and passed through.
pub fn continuous_log_map(est: &SpectrumEstimate, dt: f64) -> Result<SpectrumEstimate> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let mut out = Vec::with_capacity(est.eigenvalues.len());
    let mut flags = Vec::with_capacity(est.eigenvalues.len());
    let mut dropped = 0usize;
    for &mu in &est.eigenvalues {
        if mu.norm() == 0.0 {
            dropped += 1;
            continue;
        }
        let log = mu.ln();
        if log.im.abs() >= std::f64::consts::PI * (1.0 - 1e-9) {
            out.push(mu);
            flags.push(true);
        } else {
            out.push(log / dt);
            flags.push(false);
        }
    }
    let mut mapped = est.clone();
    mapped.eigenvalues = out;
    mapped.ambiguous = flags;
    mapped.n_dropped_zero = dropped;
    Ok(mapped)
}

/// One-call front end: pick `L` and `r` (from the rank estimate when not
/// pinned) and dispatch to the requested method.
pub fn estimate(
    series: &ObservedSeries,
    method: Method,
    cfg: &EstimatorConfig,
) -> Result<SpectrumEstimate> {
    cfg.validate()?;
    let m = series.len();
    let l = cfg.l.unwrap_or_else(|| hankel::default_window(m));
    let r = match cfg.r {
        Some(r) => r,
        None => {
            let pair = hankel::build_hankel(series, l.min(m - 1))?;
            let est = hankel::estimate_rank(&pair, cfg.eps_rel)?;
            est.chosen
        }
    };
    if r == 0 {
        return Err(Error::InsufficientData("estimated rank is zero".into()));
    }
    match method {
        Method::PronyLs => prony_with(series, r, Variant::Ls, cfg.pinv_rel),
        Method::PronyTls => prony_with(series, r, Variant::Tls, cfg.pinv_rel),
        Method::MpLs => {
            matrix_pencil_with(series, r, l.min(m - r), PencilVariant::Ls, cfg.eta_rel, cfg.pinv_rel)
        }
        Method::MpTls => {
            matrix_pencil_with(series, r, l.min(m - r), PencilVariant::Tls, cfg.eta_rel, cfg.pinv_rel)
        }
        Method::MpSvd => {
            matrix_pencil_with(series, r, l.min(m - r), PencilVariant::Svd, cfg.eta_rel, cfg.pinv_rel)
        }
        Method::Esprit => {
            let l_ok = l.min(m - r - 1).max(r);
            esprit_with(series, r, l_ok, cfg.pinv_rel)
        }
    }
}

/// Greedy clustering of roots within a fixed radius; returns representatives
/// (cluster means) with multiplicities.
pub fn cluster_roots(roots: &[c64], radius: f64) -> Vec<(c64, usize)> {
    let mut clusters: Vec<(c64, usize)> = Vec::new();
    for &z in roots {
        if let Some((center, count)) = clusters
            .iter_mut()
            .find(|(center, _)| (*center - z).norm() <= radius)
        {
            let n = *count as f64;
            *center = (*center * n + z) / (n + 1.0);
            *count += 1;
        } else {
            clusters.push((z, 1));
        }
    }
    clusters
}
