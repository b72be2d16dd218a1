//! Affine dynamical systems: construction (directly or from a Jordan
//! specification), discrete and continuous simulation, partial observation and
//! the differencing reduction to homogeneous form.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{c64, Inverse};

use crate::error::{Error, Result};
use crate::linalg;

/// Sampling grid attached to a trajectory or observed series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    Discrete,
    Continuous { dt: f64 },
}

/// The system `x_{t+1} = A x_t + c`, `x_0 = b` (or its continuous analogue
/// `x' = A x + c`, `x(0) = b`).
#[derive(Debug, Clone)]
pub struct AffineSystem {
    a: Array2<c64>,
    b: Array1<c64>,
    c: Array1<c64>,
}

impl AffineSystem {
    pub fn new(a: Array2<c64>, b: Array1<c64>, c: Array1<c64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "system matrix must be square, got {}x{}",
                d,
                a.ncols()
            )));
        }
        if b.len() != d || c.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "state vectors must have length {} (got b: {}, c: {})",
                d,
                b.len(),
                c.len()
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Homogeneous system `x_{t+1} = A x_t` with initial state `b`.
    pub fn homogeneous(a: Array2<c64>, b: Array1<c64>) -> Result<Self> {
        let d = a.nrows();
        let c = Array1::zeros(d);
        Self::new(a, b, c)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.a
    }

    pub fn initial_state(&self) -> &Array1<c64> {
        &self.b
    }

    pub fn drive(&self) -> &Array1<c64> {
        &self.c
    }

    pub fn is_homogeneous(&self) -> bool {
        self.c.iter().all(|x| x.norm() == 0.0)
    }
}

/// Jordan-form specification of a system matrix: distinct eigenvalues, their
/// nilpotent block sizes and a similarity matrix, encoding `A = U J U^{-1}`.
#[derive(Debug, Clone)]
pub struct JordanSpec {
    eigenvalues: Vec<c64>,
    blocks: Vec<Vec<usize>>,
    u: Array2<c64>,
}

impl JordanSpec {
    pub fn new(eigenvalues: Vec<c64>, blocks: Vec<Vec<usize>>, u: Array2<c64>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != blocks.len() {
            return Err(Error::InvalidArgument(
                "need one non-empty block list per eigenvalue".into(),
            ));
        }
        for (i, li) in eigenvalues.iter().enumerate() {
            for lj in eigenvalues.iter().skip(i + 1) {
                if li == lj {
                    return Err(Error::InvalidArgument(format!(
                        "eigenvalues must be pairwise distinct, found {} twice",
                        li
                    )));
                }
            }
        }
        for sizes in &blocks {
            if sizes.is_empty() || sizes.iter().any(|&t| t == 0) {
                return Err(Error::InvalidArgument("block sizes must be positive".into()));
            }
            if sizes.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::InvalidArgument(
                    "block sizes per eigenvalue must be non-increasing".into(),
                ));
            }
        }
        let d: usize = blocks.iter().flatten().sum();
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "similarity matrix must be {d}x{d}, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        if !linalg::is_invertible(&u, 1e-12)? {
            return Err(Error::Singular(
                "similarity matrix is numerically singular".into(),
            ));
        }
        Ok(Self { eigenvalues, blocks, u })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().flatten().sum()
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn similarity(&self) -> &Array2<c64> {
        &self.u
    }

    /// Algebraic multiplicity `h_s` of eigenvalue `s`.
    pub fn multiplicity(&self, s: usize) -> usize {
        self.blocks[s].iter().sum()
    }

    /// Start offset of eigenvalue `s`'s segment in the global index range.
    pub fn segment_offset(&self, s: usize) -> usize {
        (0..s).map(|j| self.multiplicity(j)).sum()
    }

    /// The cyclic nilpotent matrix `N_s` (ones on the subdiagonal within each
    /// block) of dimension `h_s`.
    pub fn nilpotent(&self, s: usize) -> Array2<c64> {
        let h = self.multiplicity(s);
        let mut n = Array2::<c64>::zeros((h, h));
        let mut off = 0;
        for &t in &self.blocks[s] {
            for j in 0..t.saturating_sub(1) {
                n[[off + j + 1, off + j]] = c64::new(1.0, 0.0);
            }
            off += t;
        }
        n
    }

    /// Assemble the Jordan matrix `J = blkdiag(lambda_s I + N_s)`.
    pub fn jordan_matrix(&self) -> Array2<c64> {
        let d = self.dim();
        let mut j = Array2::<c64>::zeros((d, d));
        for s in 0..self.eigenvalues.len() {
            let off = self.segment_offset(s);
            let h = self.multiplicity(s);
            let n = self.nilpotent(s);
            let mut seg = j.slice_mut(s![off..off + h, off..off + h]);
            seg.assign(&n);
            for k in 0..h {
                seg[[k, k]] = self.eigenvalues[s];
            }
        }
        j
    }

    /// Component of `v` in eigenvalue `s`'s invariant segment (length `h_s`).
    pub fn segment_of<'a>(&self, v: &'a Array1<c64>, s: usize) -> Array1<c64> {
        let off = self.segment_offset(s);
        let h = self.multiplicity(s);
        v.slice(s![off..off + h]).to_owned()
    }
}

/// Build the affine system `A = U J U^{-1}` from a Jordan specification.
pub fn build_from_jordan(spec: &JordanSpec, b: Array1<c64>, c: Array1<c64>) -> Result<AffineSystem> {
    let d = spec.dim();
    if b.len() != d || c.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "state vectors must have length {d} (got b: {}, c: {})",
            b.len(),
            c.len()
        )));
    }
    let j = spec.jordan_matrix();
    let uinv = spec.similarity().inv()?;
    let a = spec.similarity().dot(&j).dot(&uinv);
    AffineSystem::new(a, b, c)
}

/// A full-state trajectory: `M` state vectors stored as rows.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Array2<c64>,
    step_kind: StepKind,
}

impl Trajectory {
    pub fn new(states: Array2<c64>, step_kind: StepKind) -> Result<Self> {
        if states.nrows() == 0 {
            return Err(Error::InvalidArgument("trajectory needs at least one state".into()));
        }
        Ok(Self { states, step_kind })
    }

    pub fn states(&self) -> &Array2<c64> {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn step_kind(&self) -> StepKind {
        self.step_kind
    }
}

/// Partial observations `S_Omega x_t`: rows are time samples restricted to the
/// sorted coordinate set `omega` (1-based indices).
#[derive(Debug, Clone)]
pub struct ObservedSeries {
    omega: Vec<usize>,
    samples: Array2<c64>,
    step_kind: StepKind,
}

impl ObservedSeries {
    pub fn new(omega: Vec<usize>, samples: Array2<c64>, step_kind: StepKind) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidArgument("omega must be non-empty".into()));
        }
        if omega.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "omega must be sorted ascending without repeats".into(),
            ));
        }
        if omega[0] == 0 {
            return Err(Error::InvalidArgument("omega indices are 1-based".into()));
        }
        if samples.ncols() != omega.len() {
            return Err(Error::DimensionMismatch(format!(
                "each row must have |omega| = {} entries, got {}",
                omega.len(),
                samples.ncols()
            )));
        }
        Ok(Self { omega, samples, step_kind })
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn samples(&self) -> &Array2<c64> {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn n_observed(&self) -> usize {
        self.omega.len()
    }

    pub fn step_kind(&self) -> StepKind {
        self.step_kind
    }
}

/// Simulate `M` steps of the discrete recursion `x_{t+1} = A x_t + c`.
pub fn simulate_discrete(sys: &AffineSystem, m: usize) -> Result<Trajectory> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    let d = sys.dim();
    let mut states = Array2::<c64>::zeros((m, d));
    let mut x = sys.initial_state().clone();
    for t in 0..m {
        states.row_mut(t).assign(&x);
        if t + 1 < m {
            x = sys.matrix().dot(&x) + sys.drive();
        }
    }
    Trajectory::new(states, StepKind::Discrete)
}

/// Sample the continuous flow at `t = 0, dt, 2 dt, ...` using the exact
/// one-step propagator `x(t+dt) = e^{dt A} x(t) + g(dt;A) c`.
pub fn simulate_continuous(sys: &AffineSystem, dt: f64, m: usize) -> Result<Trajectory> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    if dt <= 0.0 {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let d = sys.dim();
    let prop = linalg::expm(&sys.matrix().mapv(|x| x * dt))?;
    let gc = linalg::g_kernel(dt, sys.matrix())?.dot(sys.drive());
    let mut states = Array2::<c64>::zeros((m, d));
    let mut x = sys.initial_state().clone();
    for t in 0..m {
        states.row_mut(t).assign(&x);
        if t + 1 < m {
            x = prop.dot(&x) + &gc;
        }
    }
    Trajectory::new(states, StepKind::Continuous { dt })
}

/// Apply the observation operator: keep the coordinates in `omega` (1-based).
pub fn observe(traj: &Trajectory, omega: &[usize]) -> Result<ObservedSeries> {
    let d = traj.dim();
    let mut omega = omega.to_vec();
    omega.sort_unstable();
    omega.dedup();
    if omega.is_empty() {
        return Err(Error::InvalidArgument("omega must be non-empty".into()));
    }
    if omega[0] == 0 || *omega.last().unwrap() > d {
        return Err(Error::InvalidArgument(format!(
            "omega indices must lie in 1..={d}"
        )));
    }
    let m = traj.len();
    let mut samples = Array2::<c64>::zeros((m, omega.len()));
    for t in 0..m {
        for (j, &i) in omega.iter().enumerate() {
            samples[[t, j]] = traj.states()[[t, i - 1]];
        }
    }
    ObservedSeries::new(omega, samples, traj.step_kind())
}

/// First differences `y_t = row_{t+1} - row_t`, reducing an affine trajectory
/// to the observation of a homogeneous one with initial state `(A-I)b + c`.
pub fn difference_transform(series: &ObservedSeries) -> Result<ObservedSeries> {
    let m = series.len();
    if m < 2 {
        return Err(Error::InsufficientData(
            "differencing needs at least two rows".into(),
        ));
    }
    let upper = series.samples().slice(s![1.., ..]);
    let lower = series.samples().slice(s![..m - 1, ..]);
    let diff = &upper - &lower;
    ObservedSeries::new(series.omega().to_vec(), diff.to_owned(), series.step_kind())
}
