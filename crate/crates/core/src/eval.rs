//! Metrics (argmin spectrum matching, RMSE, INE), least-squares system
//! fitting for external data, and the seeded experiment grid runner.

use std::path::PathBuf;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{c64, Eig, Norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorConfig, Method};
use crate::graphs;
use crate::hankel;
use crate::io;
use crate::linalg::pinv_thresholded;
use crate::recoverability::{self, ConditionPath};
use crate::systems::{
    difference_transform, observe, simulate_continuous, simulate_discrete, AffineSystem,
    ObservedSeries, StepKind,
};

/// Pairing of estimated eigenvalues with reference values under the argmin
/// rule (reference values may be reused).
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub pairs: Vec<(c64, c64)>,
    pub unmatched_exact: Vec<c64>,
    pub unmatched_est: Vec<c64>,
}

/// Pair every estimate with its closest reference value; ties break to the
/// smallest reference index. Reference values may serve several estimates.
pub fn match_spectra(exact: &[c64], est: &[c64]) -> Result<MatchResult> {
    if exact.is_empty() || est.is_empty() {
        return Err(Error::InvalidArgument("cannot match empty spectra".into()));
    }
    let mut pairs = Vec::with_capacity(est.len());
    let mut used = vec![false; exact.len()];
    for &e in est {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, &x) in exact.iter().enumerate() {
            let dist = (x - e).norm();
            if dist < best_d {
                best_d = dist;
                best = j;
            }
        }
        used[best] = true;
        pairs.push((exact[best], e));
    }
    let unmatched_exact = exact
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(&x, _)| x)
        .collect();
    Ok(MatchResult { pairs, unmatched_exact, unmatched_est: Vec::new() })
}

/// Injective variant: greedy globally-closest assignment without reuse.
/// Leftovers on either side are reported unmatched.
pub fn match_spectra_injective(exact: &[c64], est: &[c64]) -> Result<MatchResult> {
    if exact.is_empty() || est.is_empty() {
        return Err(Error::InvalidArgument("cannot match empty spectra".into()));
    }
    let mut free_e: Vec<usize> = (0..exact.len()).collect();
    let mut free_s: Vec<usize> = (0..est.len()).collect();
    let mut pairs = Vec::new();
    while !free_e.is_empty() && !free_s.is_empty() {
        let mut best = (0usize, 0usize, f64::INFINITY);
        for (pi, &i) in free_s.iter().enumerate() {
            for (pj, &j) in free_e.iter().enumerate() {
                let d = (exact[j] - est[i]).norm();
                if d < best.2 {
                    best = (pi, pj, d);
                }
            }
        }
        let i = free_s.remove(best.0);
        let j = free_e.remove(best.1);
        pairs.push((exact[j], est[i]));
    }
    Ok(MatchResult {
        pairs,
        unmatched_exact: free_e.iter().map(|&j| exact[j]).collect(),
        unmatched_est: free_s.iter().map(|&i| est[i]).collect(),
    })
}

/// Root mean squared error over matched pairs (squared complex modulus).
pub fn rmse(m: &MatchResult) -> f64 {
    if m.pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = m.pairs.iter().map(|(x, e)| (x - e).norm_sqr()).sum();
    (sum / m.pairs.len() as f64).sqrt()
}

/// Infinity-norm error: the largest matched distance.
pub fn ine(m: &MatchResult) -> f64 {
    m.pairs.iter().map(|(x, e)| (x - e).norm()).fold(0.0, f64::max)
}

/// Least-squares one-step linear model fitted to a snapshot matrix
/// (rows are consecutive states): `A = X_future X_past^+`.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub a: Array2<f64>,
    /// `‖A X_past − X_future‖ / ‖X_future‖`.
    pub residual_rel: f64,
    pub rank_deficient: bool,
}

pub fn fit_linear_system(snapshots: &Array2<f64>) -> Result<LinearFit> {
    let m = snapshots.nrows();
    let d = snapshots.ncols();
    if m < 2 {
        return Err(Error::InsufficientData("need at least 2 snapshots".into()));
    }
    // states as columns: past = x_0..x_{M-2}, future = x_1..x_{M-1}
    let past = snapshots.slice(s![..m - 1, ..]).t().mapv(|x| c64::new(x, 0.0));
    let future = snapshots.slice(s![1.., ..]).t().mapv(|x| c64::new(x, 0.0));
    let rank = crate::linalg::numerical_rank(&past, 1e-10)?;
    let a_c = future.dot(&pinv_thresholded(&past, 1e-12)?);
    let fut_norm = future.norm_l2();
    let residual_rel = if fut_norm > 0.0 {
        (&a_c.dot(&past) - &future).norm_l2() / fut_norm
    } else {
        0.0
    };
    Ok(LinearFit {
        a: a_c.mapv(|z| z.re),
        residual_rel,
        rank_deficient: rank < d,
    })
}

/// Channel-wise standardization to mean 0, std 1. Constant channels are
/// centered with the divisor clamped to 1 and reported.
#[derive(Debug, Clone)]
pub struct NormalizedSnapshots {
    pub data: Array2<f64>,
    /// 0-based indices of channels with (numerically) zero variance.
    pub constant_channels: Vec<usize>,
}

pub fn normalize_columns(snapshots: &Array2<f64>) -> NormalizedSnapshots {
    let m = snapshots.nrows() as f64;
    let mut data = snapshots.clone();
    let mut constant = Vec::new();
    for (j, mut col) in data.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / m;
        col.mapv_inplace(|x| x - mean);
        let var = col.iter().map(|x| x * x).sum::<f64>() / m;
        let std = var.sqrt();
        if std < 1e-14 * mean.abs().max(1.0) {
            constant.push(j);
        } else {
            col.mapv_inplace(|x| x / std);
        }
    }
    NormalizedSnapshots { data, constant_channels: constant }
}

/// Where the experiment gets its dynamical system from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourceConfig {
    /// A Jordan-form specification JSON file (matrix, initial state, drive).
    JordanSpec { path: PathBuf },
    /// A seeded generated graph turned into a dynamical operator.
    Graph {
        kind: GraphKind,
        d: usize,
        #[serde(default)]
        edges: Option<usize>,
        #[serde(default)]
        k: Option<usize>,
        operator: OperatorName,
    },
    /// A pre-recorded trajectory CSV; the reference spectrum comes from a
    /// least-squares linear fit to the same data.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Ring,
    Random,
    KnnSphere,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    Transition,
    Diffusion,
    Laplacian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub omega_sets: Vec<Vec<usize>>,
    pub m_values: Vec<usize>,
    /// Fixed Hankel window; `None` means `floor(M/2)` capped for the method.
    #[serde(default)]
    pub l: Option<usize>,
    pub methods: Vec<String>,
    #[serde(default)]
    pub eps_rel: Option<f64>,
    #[serde(default)]
    pub eta_rel: Option<f64>,
    #[serde(default)]
    pub pinv_rel: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Continuous-time sampling step; omitted means discrete time.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// One grid cell of experiment output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub omega: Vec<usize>,
    pub m: usize,
    /// Oracle-predicted annihilator degree (0 when no oracle applies).
    pub r: usize,
    /// Data-estimated rank from the singular-value criteria.
    pub r_hat: usize,
    pub method: String,
    pub rmse: Option<f64>,
    pub ine: Option<f64>,
    pub error: Option<String>,
}

/// The experiment seed, with the environment override applied.
pub fn resolve_seed(config_seed: Option<u64>) -> u64 {
    if let Ok(text) = std::env::var("SPECTRACE_SEED") {
        if let Ok(seed) = text.trim().parse() {
            return seed;
        }
    }
    config_seed.unwrap_or(0)
}

struct PreparedSystem {
    sys: AffineSystem,
    /// Jordan data when exactly known (enables the exact oracle).
    spec: Option<crate::systems::JordanSpec>,
    /// Pre-recorded data instead of a simulator.
    recorded: Option<ObservedSeries>,
    /// Reference spectrum for CSV sources (fitted model eigenvalues).
    csv_reference: Option<Vec<c64>>,
}

fn prepare(config: &ExperimentConfig, seed: u64) -> Result<PreparedSystem> {
    match &config.source {
        SourceConfig::JordanSpec { path } => {
            let (spec, b, c) = io::read_spec_file(path)?;
            let sys = crate::systems::build_from_jordan(&spec, b, c)?;
            Ok(PreparedSystem { sys, spec: Some(spec), recorded: None, csv_reference: None })
        }
        SourceConfig::Graph { kind, d, edges, k, operator } => {
            let graph = match kind {
                GraphKind::Ring => graphs::ring_graph(
                    *d,
                    k.ok_or(Error::InvalidArgument("ring graph needs k".into()))?,
                )?,
                GraphKind::Random => graphs::random_digraph(
                    *d,
                    edges.ok_or(Error::InvalidArgument("random graph needs edges".into()))?,
                    seed,
                )?,
                GraphKind::KnnSphere => graphs::knn_sphere_graph(
                    *d,
                    k.ok_or(Error::InvalidArgument("knn graph needs k".into()))?,
                    seed,
                )?,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let sys = match operator {
                OperatorName::Transition => {
                    let mut x0: Array1<f64> =
                        (0..*d).map(|_| rng.gen_range(0.1..1.0)).collect();
                    let total = x0.sum();
                    x0.mapv_inplace(|x| x / total);
                    graphs::random_walk_system(&graph, &x0)?
                }
                OperatorName::Diffusion | OperatorName::Laplacian => {
                    let op = match operator {
                        OperatorName::Diffusion => graphs::diffusion_operator(&graph),
                        _ => graphs::laplacian(&graph),
                    };
                    let b: Array1<c64> =
                        (0..*d).map(|_| c64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
                    AffineSystem::homogeneous(op.matrix.mapv(|x| c64::new(x, 0.0)), b)?
                }
            };
            Ok(PreparedSystem { sys, spec: None, recorded: None, csv_reference: None })
        }
        SourceConfig::Csv { path } => {
            let series = io::read_trajectory_file(path)?;
            let real: Array2<f64> = series.samples().mapv(|z| z.re);
            let fit = fit_linear_system(&real)?;
            let a_c = fit.a.mapv(|x| c64::new(x, 0.0));
            let (vals, _) = a_c.eig()?;
            let b = series.samples().row(0).to_owned();
            let sys = AffineSystem::homogeneous(a_c, b)?;
            Ok(PreparedSystem {
                sys,
                spec: None,
                recorded: Some(series),
                csv_reference: Some(vals.to_vec()),
            })
        }
    }
}

/// Reference spectrum (with annihilator multiplicities ignored: distinct
/// recoverable values) and the oracle degree for one omega set.
fn reference_for(
    prepared: &PreparedSystem,
    omega: &[usize],
    step: StepKind,
) -> Result<(Vec<c64>, usize)> {
    if let Some(reference) = &prepared.csv_reference {
        return Ok((reference.clone(), 0));
    }
    let v = recoverability::effective_vector(&prepared.sys, step)?;
    let eff = if prepared.sys.is_homogeneous() && matches!(step, StepKind::Discrete) {
        prepared.sys.initial_state().clone()
    } else {
        v
    };
    if let Some(spec) = &prepared.spec {
        let rep = recoverability::recoverable_set_jordan(spec, &eff, omega)?;
        let vals = rep
            .eigenvalues
            .iter()
            .filter(|e| e.recoverable)
            .map(|e| e.eigenvalue)
            .collect();
        return Ok((vals, rep.total_degree));
    }
    let rep = recoverability::recoverable_set_numeric(&prepared.sys.matrix().clone(), &eff, omega)?;
    if rep.path == ConditionPath::DataDriven {
        // no attribution: fall back to the full spectrum as reference
        let (vals, _) = prepared.sys.matrix().eig()?;
        return Ok((vals.to_vec(), rep.total_degree));
    }
    let vals = rep
        .eigenvalues
        .iter()
        .filter(|e| e.recoverable)
        .map(|e| e.eigenvalue)
        .collect();
    Ok((vals, rep.total_degree))
}

fn run_cell(
    prepared: &PreparedSystem,
    config: &ExperimentConfig,
    omega: &[usize],
    m: usize,
    method: Method,
) -> Result<MetricsRow> {
    let step = match config.dt {
        Some(dt) => StepKind::Continuous { dt },
        None => StepKind::Discrete,
    };
    // differencing removes the drive but also kills the homogeneous part's
    // eigenvalue structure at w; only difference when there is a drive or the
    // sampling is continuous
    let needs_difference =
        !prepared.sys.is_homogeneous() || matches!(step, StepKind::Continuous { .. });
    let series = match &prepared.recorded {
        Some(recorded) => {
            let sel: Vec<usize> = omega.to_vec();
            let positions: Vec<usize> = sel
                .iter()
                .map(|i| {
                    recorded.omega().iter().position(|x| x == i).ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "coordinate {i} is not present in the recorded data"
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let take = m.min(recorded.len());
            let mut samples = Array2::<c64>::zeros((take, positions.len()));
            for (cj, &p) in positions.iter().enumerate() {
                samples
                    .slice_mut(s![.., cj])
                    .assign(&recorded.samples().slice(s![..take, p]));
            }
            ObservedSeries::new(sel, samples, recorded.step_kind())?
        }
        None => {
            let extra = usize::from(needs_difference);
            let traj = match step {
                StepKind::Discrete => simulate_discrete(&prepared.sys, m + extra)?,
                StepKind::Continuous { dt } => simulate_continuous(&prepared.sys, dt, m + extra)?,
            };
            let observed = observe(&traj, omega)?;
            if needs_difference {
                difference_transform(&observed)?
            } else {
                observed
            }
        }
    };
    let (reference, r_oracle) = reference_for(prepared, omega, step)?;
    let d = prepared.sys.dim();
    let l_rank = config.l.unwrap_or_else(|| d.min(series.len() - 1).min(series.len() / 2).max(1));
    let pair = hankel::build_hankel(&series, l_rank)?;
    let rank = hankel::estimate_rank(&pair, config.eps_rel.unwrap_or(1e-8))?;
    let est_cfg = EstimatorConfig {
        l: Some(config.l.unwrap_or_else(|| hankel::default_window(series.len()))),
        r: Some(rank.chosen),
        eps_rel: config.eps_rel.unwrap_or(1e-8),
        eta_rel: config.eta_rel.unwrap_or(1e-8),
        pinv_rel: config.pinv_rel.unwrap_or(1e-12),
    };
    let est = estimators::estimate(&series, method, &est_cfg)?;
    // compare multipliers against e^{dt lambda}: mapping the reference forward
    // avoids the branch cut that the log map would hit on the estimates
    let reference = match step {
        StepKind::Continuous { dt } => {
            reference.iter().map(|&z| (z * dt).exp()).collect::<Vec<_>>()
        }
        StepKind::Discrete => reference,
    };
    let matched = match_spectra(&reference, &est.eigenvalues)?;
    Ok(MetricsRow {
        omega: omega.to_vec(),
        m,
        r: r_oracle,
        r_hat: rank.chosen,
        method: method.as_str().to_string(),
        rmse: Some(rmse(&matched)),
        ine: Some(ine(&matched)),
        error: None,
    })
}

/// Run the full grid; rows come back in configuration order regardless of
/// which cells finished first, and failures show up as rows with `error` set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let seed = resolve_seed(config.seed);
    let prepared = prepare(config, seed)?;
    let methods: Vec<Method> = config
        .methods
        .iter()
        .map(|name| Method::parse(name))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for omega in &config.omega_sets {
        for &m in &config.m_values {
            for &method in &methods {
                cells.push((omega.clone(), m, method));
            }
        }
    }
    let rows: Vec<MetricsRow> = cells
        .par_iter()
        .map(|(omega, m, method)| {
            run_cell(&prepared, config, omega, *m, *method).unwrap_or_else(|e| MetricsRow {
                omega: omega.clone(),
                m: *m,
                r: 0,
                r_hat: 0,
                method: method.as_str().to_string(),
                rmse: None,
                ine: None,
                error: Some(e.to_string()),
            })
        })
        .collect();
    Ok(rows)
}

/// Rows as CSV text (stable column order).
pub fn rows_to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["omega", "M", "r", "r_hat", "method", "rmse", "ine", "error"])?;
    for row in rows {
        let omega = row
            .omega
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        wtr.write_record(&[
            omega,
            row.m.to_string(),
            row.r.to_string(),
            row.r_hat.to_string(),
            row.method.clone(),
            row.rmse.map(|x| format!("{x:e}")).unwrap_or_default(),
            row.ine.map(|x| format!("{x:e}")).unwrap_or_default(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}
