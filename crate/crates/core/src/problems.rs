//! Objective oracles: deterministic value/gradient pairs and stochastic
//! first-order oracles with an explicit RNG handle.

use std::fs;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::kernels::{Kernel, ReferenceFunction};
use crate::linalg::norm;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("rank {rank} must satisfy 1 <= rank <= min({rows}, {cols})")]
    RankOutOfRange { rank: usize, rows: usize, cols: usize },
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("measurement count {measurements} does not match design matrix with {rows} rows")]
    MeasurementMismatch { rows: usize, measurements: usize },
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: expected 4 integer fields `user item rating timestamp`, got `{content}`")]
    Malformed { line: usize, content: String },
    #[error("line {line}: ids are 1-based, got user {user} item {item}")]
    InvalidId { line: usize, user: i64, item: i64 },
    #[error("no ratings found")]
    Empty,
}

/// Anisotropic smoothness constant `L` of a problem relative to a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothness {
    pub reference: ReferenceFunction,
    pub constant: f64,
}

/// Deterministic value/gradient oracle for `min f(x)` over `ℝⁿ`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Array1<f64>) -> f64;

    fn gradient(&self, x: &Array1<f64>) -> Array1<f64>;

    /// Known infimum `f⋆`.
    fn f_star(&self) -> Option<f64> {
        None
    }

    fn smoothness(&self) -> Option<Smoothness> {
        None
    }

    /// Anisotropic gradient-dominance constant `μ` relative to [`Objective::smoothness`]'s reference.
    fn dominance_constant(&self) -> Option<f64> {
        None
    }

    /// Default starting point: `scale · N(0, I)`.
    fn initial_point(&self, rng: &mut dyn RngCore, scale: f64) -> Array1<f64> {
        Array1::from_iter((0..self.dim()).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        }))
    }
}

/// A stochastic first-order oracle `g(x)`.
pub trait StochasticOracle: Objective {
    /// Minibatch gradient averaged over `batch` draws.
    fn stochastic_gradient(&self, x: &Array1<f64>, rng: &mut dyn RngCore, batch: usize)
        -> Array1<f64>;

    /// Whether `E[g(x)] = ∇f(x)`.
    fn unbiased(&self) -> bool {
        true
    }
}

/// Problems that are a weighted average of atoms, `∇f = Σ wᵢ ∇fᵢ`.
pub trait FiniteSum: Objective {
    fn num_atoms(&self) -> usize;

    /// Sampling probability of atom `i`.
    fn atom_weight(&self, i: usize) -> f64;

    fn atom_gradient(&self, i: usize, x: &Array1<f64>) -> Array1<f64>;
}

/// `f(x) = ½‖x‖²`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    dim: usize,
}

impl Quadratic {
    pub fn new(dim: usize) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(ProblemError::EmptyDimension);
        }
        Ok(Self { dim })
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        0.5 * x.dot(x)
    }

    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        x.clone()
    }

    fn f_star(&self) -> Option<f64> {
        Some(0.0)
    }

    fn smoothness(&self) -> Option<Smoothness> {
        Some(Smoothness {
            reference: ReferenceFunction::isotropic(Kernel::Quadratic),
            constant: 1.0,
        })
    }

    fn dominance_constant(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `f(x) = cosh(‖x‖) - 1`, i.e. `f` equals the cosh isotropic reference
/// function itself.
///
/// Since `∇φ*(∇f(x)) = x`, the anisotropic descent inequality holds with
/// equality at `L = 1`, and the stationarity measure equals `f`, so gradient
/// dominance holds with `μ = 1`.
#[derive(Debug, Clone)]
pub struct SelfCalibratedCosh {
    dim: usize,
}

impl SelfCalibratedCosh {
    pub fn new(dim: usize) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(ProblemError::EmptyDimension);
        }
        Ok(Self { dim })
    }
}

impl Objective for SelfCalibratedCosh {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        let s = (0.5 * norm(x)).sinh();
        2.0 * s * s
    }

    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        let r = norm(x);
        if r == 0.0 {
            return Array1::zeros(x.len());
        }
        let factor = r.sinh() / r;
        x.mapv(|v| v * factor)
    }

    fn f_star(&self) -> Option<f64> {
        Some(0.0)
    }

    fn smoothness(&self) -> Option<Smoothness> {
        Some(Smoothness {
            reference: ReferenceFunction::isotropic(Kernel::Cosh),
            constant: 1.0,
        })
    }

    fn dominance_constant(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// One-dimensional `f(x) = ½[(x-1)² + 2(x+2)²]` with atoms
/// `f'₁(x) = 2(x-1)` and `f'₂(x) = 4(x+2)` drawn with probability ½ each.
///
/// The gradient variance `(x+5)²` is unbounded while the cosh noise measure
/// stays bounded.
#[derive(Debug, Clone, Default)]
pub struct TwoAtomQuadratic;

impl TwoAtomQuadratic {
    pub fn new() -> Self {
        Self
    }

    fn atom_slope(i: usize, x: f64) -> f64 {
        match i {
            0 => 2.0 * (x - 1.0),
            1 => 4.0 * (x + 2.0),
            _ => panic!("atom index {i} out of range"),
        }
    }
}

impl Objective for TwoAtomQuadratic {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        let t = x[0];
        0.5 * ((t - 1.0).powi(2) + 2.0 * (t + 2.0).powi(2))
    }

    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        let t = x[0];
        Array1::from_elem(1, (t - 1.0) + 2.0 * (t + 2.0))
    }

    fn f_star(&self) -> Option<f64> {
        // minimiser x = -1
        Some(3.0)
    }
}

impl FiniteSum for TwoAtomQuadratic {
    fn num_atoms(&self) -> usize {
        2
    }

    fn atom_weight(&self, _i: usize) -> f64 {
        0.5
    }

    fn atom_gradient(&self, i: usize, x: &Array1<f64>) -> Array1<f64> {
        Array1::from_elem(1, Self::atom_slope(i, x[0]))
    }
}

impl StochasticOracle for TwoAtomQuadratic {
    /// Average of `batch` i.i.d. atom draws.
    fn stochastic_gradient(
        &self,
        x: &Array1<f64>,
        rng: &mut dyn RngCore,
        batch: usize,
    ) -> Array1<f64> {
        let batch = batch.max(1);
        let sum: f64 = (0..batch)
            .map(|_| Self::atom_slope(rng.random_range(0..2usize), x[0]))
            .sum();
        Array1::from_elem(1, sum / batch as f64)
    }
}

/// `f(U, V) = ½‖UVᵀ - A‖²_F` over the flattened variable `x = [vec(U), vec(V)]`
/// with `U` (`m×r`) and `V` (`n×r`) stored row-major.
#[derive(Debug, Clone)]
pub struct MatrixFactorization {
    target: Array2<f64>,
    rank: usize,
}

impl MatrixFactorization {
    pub fn new(target: Array2<f64>, rank: usize) -> Result<Self, ProblemError> {
        let (rows, cols) = target.dim();
        if rank == 0 || rank > rows.min(cols) {
            return Err(ProblemError::RankOutOfRange { rank, rows, cols });
        }
        Ok(Self { target, rank })
    }

    /// Target with i.i.d. `N(0, std²)` entries drawn from `seed`.
    pub fn gaussian_target(rows: usize, cols: usize, std: f64, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
        Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng))
    }

    pub fn target(&self) -> &Array2<f64> {
        &self.target
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Splits `x` into `(U, V)` views.
    pub fn factors<'a>(&self, x: &'a Array1<f64>) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>) {
        let (m, n) = self.target.dim();
        let r = self.rank;
        let flat = x.as_slice().expect("iterate must be contiguous");
        let u = ArrayView2::from_shape((m, r), &flat[..m * r]).expect("U block");
        let v = ArrayView2::from_shape((n, r), &flat[m * r..(m + n) * r]).expect("V block");
        (u, v)
    }

    /// Flattens `(U, V)` into an iterate.
    pub fn pack(&self, u: &Array2<f64>, v: &Array2<f64>) -> Array1<f64> {
        u.iter().chain(v.iter()).copied().collect()
    }

    fn residual(&self, x: &Array1<f64>) -> Array2<f64> {
        let (u, v) = self.factors(x);
        u.dot(&v.t()) - &self.target
    }
}

impl Objective for MatrixFactorization {
    fn dim(&self) -> usize {
        let (m, n) = self.target.dim();
        (m + n) * self.rank
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        let r = self.residual(x);
        0.5 * r.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        let (u, v) = self.factors(x);
        let res = u.dot(&v.t()) - &self.target;
        let gu = res.dot(&v);
        let gv = res.t().dot(&u);
        gu.iter().chain(gv.iter()).copied().collect()
    }

    fn f_star(&self) -> Option<f64> {
        None
    }

    /// Entries drawn from `N(0, 1/r)`; `scale` is ignored.
    fn initial_point(&self, rng: &mut dyn RngCore, _scale: f64) -> Array1<f64> {
        let std = 1.0 / (self.rank as f64).sqrt();
        Array1::from_iter((0..self.dim()).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        }))
    }
}

/// `f(x) = 1/(2m) Σ (yᵢ - (aᵢᵀx)²)²`.
#[derive(Debug, Clone)]
pub struct PhaseRetrieval {
    design: Array2<f64>,
    measurements: Array1<f64>,
    truth: Option<Array1<f64>>,
}

impl PhaseRetrieval {
    /// Random instance with `aᵢ, z ~ N(0, 0.5)`, noise `N(0, 16)`
    /// (second argument read as a variance).
    pub fn generate(n: usize, m: usize, seed: u64) -> Result<Self, ProblemError> {
        if n == 0 || m == 0 {
            return Err(ProblemError::EmptyDimension);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entry = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
        let noise = Normal::new(0.0, 4.0).unwrap();
        let design = Array2::from_shape_simple_fn((m, n), || entry.sample(&mut rng));
        let truth = Array1::from_shape_simple_fn(n, || entry.sample(&mut rng));
        let measurements = Array1::from_iter(design.rows().into_iter().map(|a| {
            let p = a.dot(&truth);
            p * p + noise.sample(&mut rng)
        }));
        Ok(Self {
            design,
            measurements,
            truth: Some(truth),
        })
    }

    pub fn from_measurements(
        design: Array2<f64>,
        measurements: Array1<f64>,
    ) -> Result<Self, ProblemError> {
        if design.ncols() == 0 || design.nrows() == 0 {
            return Err(ProblemError::EmptyDimension);
        }
        if design.nrows() != measurements.len() {
            return Err(ProblemError::MeasurementMismatch {
                rows: design.nrows(),
                measurements: measurements.len(),
            });
        }
        Ok(Self {
            design,
            measurements,
            truth: None,
        })
    }

    pub fn truth(&self) -> Option<&Array1<f64>> {
        self.truth.as_ref()
    }

    pub fn num_measurements(&self) -> usize {
        self.design.nrows()
    }

    /// Mean of atom gradients over `indices`, accumulated in the given order.
    fn mean_gradient(&self, indices: impl Iterator<Item = usize>, x: &Array1<f64>) -> Array1<f64> {
        let mut acc = Array1::<f64>::zeros(self.design.ncols());
        let mut count = 0usize;
        for i in indices {
            let a = self.design.row(i);
            let p = a.dot(x);
            let coeff = -2.0 * (self.measurements[i] - p * p) * p;
            acc.scaled_add(coeff, &a);
            count += 1;
        }
        acc / count as f64
    }
}

impl Objective for PhaseRetrieval {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        let m = self.design.nrows();
        let sum: f64 = (0..m)
            .map(|i| {
                let p = self.design.row(i).dot(x);
                let r = self.measurements[i] - p * p;
                r * r
            })
            .sum();
        sum / (2.0 * m as f64)
    }

    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        self.mean_gradient(0..self.design.nrows(), x)
    }

    /// `N(5, 0.5)` entries; `scale` is ignored.
    fn initial_point(&self, rng: &mut dyn RngCore, _scale: f64) -> Array1<f64> {
        let normal = Normal::new(5.0, 0.5f64.sqrt()).unwrap();
        Array1::from_iter((0..self.dim()).map(|_| normal.sample(rng)))
    }
}

impl FiniteSum for PhaseRetrieval {
    fn num_atoms(&self) -> usize {
        self.design.nrows()
    }

    fn atom_weight(&self, _i: usize) -> f64 {
        1.0 / self.design.nrows() as f64
    }

    fn atom_gradient(&self, i: usize, x: &Array1<f64>) -> Array1<f64> {
        self.mean_gradient(std::iter::once(i), x)
    }
}

impl StochasticOracle for PhaseRetrieval {
    /// Minibatch drawn uniformly without replacement and summed in index
    /// order, so `batch >= m` reproduces [`Objective::gradient`] bit for bit.
    fn stochastic_gradient(
        &self,
        x: &Array1<f64>,
        rng: &mut dyn RngCore,
        batch: usize,
    ) -> Array1<f64> {
        let m = self.design.nrows();
        let batch = batch.clamp(1, m);
        if batch == m {
            return self.gradient(x);
        }
        let mut picked = rand::seq::index::sample(rng, m, batch).into_vec();
        picked.sort_unstable();
        self.mean_gradient(picked.into_iter(), x)
    }
}

/// Wraps a deterministic problem as a zero-noise stochastic oracle.
#[derive(Debug, Clone)]
pub struct Noiseless<P>(pub P);

impl<P: Objective> Objective for Noiseless<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Array1<f64>) -> f64 {
        self.0.value(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        self.0.gradient(x)
    }
    fn f_star(&self) -> Option<f64> {
        self.0.f_star()
    }
    fn smoothness(&self) -> Option<Smoothness> {
        self.0.smoothness()
    }
    fn dominance_constant(&self) -> Option<f64> {
        self.0.dominance_constant()
    }
    fn initial_point(&self, rng: &mut dyn RngCore, scale: f64) -> Array1<f64> {
        self.0.initial_point(rng, scale)
    }
}

impl<P: Objective> StochasticOracle for Noiseless<P> {
    fn stochastic_gradient(
        &self,
        x: &Array1<f64>,
        _rng: &mut dyn RngCore,
        _batch: usize,
    ) -> Array1<f64> {
        self.0.gradient(x)
    }
}

/// Central differences `(f(x + h eᵢ) - f(x - h eᵢ)) / 2h`.
pub fn finite_diff_grad<P: Objective + ?Sized>(problem: &P, x: &Array1<f64>, step: f64) -> Array1<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    Array1::from_iter((0..x.len()).map(|i| {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = problem.value(&probe);
        probe[i] = orig - step;
        let down = problem.value(&probe);
        probe[i] = orig;
        (up - down) / (2.0 * step)
    }))
}

/// Reads a MovieLens `u.data` file into a dense `users × items` matrix.
pub fn load_movielens(path: impl AsRef<Path>) -> Result<Array2<f64>, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_movielens(BufReader::new(file)).map_err(|e| match e {
        DataError::Io { source, .. } => DataError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Parses whitespace-separated `user item rating timestamp` rows; unobserved
/// entries are zero and the shape is given by the largest ids.
pub fn parse_movielens<R: Read>(reader: BufReader<R>) -> Result<Array2<f64>, DataError> {
    let mut entries = Vec::new();
    let (mut users, mut items) = (0usize, 0usize);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: String::new(),
            source,
        })?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<i64> = line
            .split_whitespace()
            .map(str::parse::<i64>)
            .collect::<Result<_, _>>()
            .map_err(|_| DataError::Malformed {
                line: lineno,
                content: line.clone(),
            })?;
        if fields.len() != 4 {
            return Err(DataError::Malformed {
                line: lineno,
                content: line,
            });
        }
        let (user, item, rating) = (fields[0], fields[1], fields[2]);
        if user < 1 || item < 1 {
            return Err(DataError::InvalidId {
                line: lineno,
                user,
                item,
            });
        }
        let (u, i) = (user as usize - 1, item as usize - 1);
        users = users.max(u + 1);
        items = items.max(i + 1);
        entries.push((u, i, rating as f64));
    }
    if entries.is_empty() {
        return Err(DataError::Empty);
    }
    let mut a = Array2::zeros((users, items));
    for (u, i, r) in entries {
        a[[u, i]] = r;
    }
    Ok(a)
}

/// Relative error `‖a - b‖ / max(1, ‖b‖)` used by gradient checks.
pub fn relative_error(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    norm(&(a - b)) / norm(b).max(1.0)
}
