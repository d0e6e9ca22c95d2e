//! Brute-force verification of the null-space recovery conditions on tiny
//! instances.
//!
//! Recovery of every k-block-sparse signal is characterized by an
//! inequality over every nonzero kernel vector of the measurement matrix.
//! Exact quantification over the kernel is nonconvex, so for kernels of
//! dimension at most three this module sweeps dense grids on the kernel
//! unit sphere and reports the minimum margin together with the witness
//! that attains it. Both inequality sides are positively homogeneous, so
//! the unit sphere is enough. Margins within 1e-9 of zero are flagged as
//! boundary-indeterminate rather than resolved either way.

use crate::error::{Error, Result};
use crate::solver::{BlockDims, BlockSignal};
use nalgebra::linalg::{Cholesky, SymmetricEigen};
use nalgebra::{DMatrix, DVector};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest kernel dimension the grid sweep accepts.
pub const MAX_NULLSPACE_DIM: usize = 3;

/// Strict inequalities are only trusted beyond this margin.
pub const MARGIN_TOL: f64 = 1e-9;

/// Orthonormal basis of the kernel of a measurement matrix.
#[derive(Debug, Clone)]
pub struct NullspaceBasis {
    /// `(d n) x p` matrix with orthonormal columns spanning the kernel.
    pub basis: DMatrix<f64>,
}

impl NullspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Orthonormal kernel basis via the symmetric eigendecomposition of the
/// kernel projector `I - A^T (A A^T)^{-1} A`.
pub fn nullspace_basis(matrix: &DMatrix<f64>) -> Result<NullspaceBasis> {
    let (rows, cols) = matrix.shape();
    let gram = matrix * matrix.transpose();
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::RankDeficient("A A^T is not positive definite; A lacks full row rank".into())
    })?;
    let expected = cols - rows.min(cols);
    if expected == 0 {
        return Ok(NullspaceBasis { basis: DMatrix::zeros(cols, 0) });
    }
    let projector = DMatrix::identity(cols, cols) - matrix.transpose() * chol.solve(matrix);
    let eig = SymmetricEigen::new(projector);
    // projector eigenvalues cluster at 0 and 1; the 1-eigenvectors span the kernel
    let mut picked: Vec<usize> = (0..cols).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    if picked.len() != expected {
        return Err(Error::RankDeficient(format!(
            "kernel projector has rank {} but {} was expected",
            picked.len(),
            expected
        )));
    }
    picked.sort_unstable();
    let mut basis = DMatrix::zeros(cols, expected);
    for (j, &i) in picked.iter().enumerate() {
        basis.set_column(j, &eig.eigenvectors.column(i));
    }
    Ok(NullspaceBasis { basis })
}

/// A fixed set of nonzero block indices, optionally with the unit
/// directions of the planted blocks (required by the weak check).
#[derive(Debug, Clone)]
pub struct SupportPattern {
    pub kappa: Vec<usize>,
    pub directions: Option<Vec<DVector<f64>>>,
}

impl SupportPattern {
    pub fn new(kappa: Vec<usize>, directions: Option<Vec<DVector<f64>>>) -> Result<Self> {
        let mut sorted = kappa.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != kappa.len() {
            return Err(Error::Domain("support indices must be distinct".into()));
        }
        if let Some(dirs) = &directions {
            if dirs.len() != kappa.len() {
                return Err(Error::MissingDirections);
            }
            for dir in dirs {
                if (dir.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain("block directions must have unit norm".into()));
                }
            }
        }
        Ok(SupportPattern { kappa, directions })
    }

    /// Support and normalized block directions of a planted signal.
    pub fn from_signal(signal: &BlockSignal) -> Result<Self> {
        let dims = signal.dims();
        let mut kappa = Vec::new();
        let mut dirs = Vec::new();
        for i in 0..dims.n {
            let block = signal.values().rows(i * dims.d, dims.d).into_owned();
            let norm = block.norm();
            if norm > 0.0 {
                kappa.push(i);
                dirs.push(block / norm);
            }
        }
        SupportPattern::new(kappa, Some(dirs))
    }
}

/// Outcome of a grid sweep: whether the condition held at every grid point,
/// the worst margin seen, and the kernel vector attaining it.
#[derive(Debug, Clone)]
pub struct CheckReport {
    /// True iff the minimum margin clears [`MARGIN_TOL`].
    pub holds: bool,
    /// True when the minimum margin is within [`MARGIN_TOL`] of zero, i.e.
    /// the grid cannot resolve the strict inequality.
    pub boundary: bool,
    pub min_margin: f64,
    pub witness: DVector<f64>,
    pub grid_points: usize,
}

/// Grid sizes used by the CLI for each kernel dimension.
pub fn default_grid_resolution(dim: usize) -> usize {
    match dim {
        0 | 1 => 2,
        2 => 10_000,
        _ => 100_000,
    }
}

/// Approximate spacing between neighboring grid points on the kernel unit
/// sphere; disagreements with margins below ten spacings are treated as
/// unresolved boundary cases.
pub fn grid_spacing(dim: usize, resolution: usize) -> f64 {
    match dim {
        0 | 1 => f64::EPSILON,
        2 => 2.0 * std::f64::consts::PI / resolution as f64,
        _ => (4.0 * std::f64::consts::PI / resolution as f64).sqrt(),
    }
}

/// Tally of a solver-vs-oracle cross-validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossValidation {
    pub trials: usize,
    /// Trials where the weak check and the solver outcome matched.
    pub agreements: usize,
    /// Disagreements whose condition margin sits within ten grid spacings
    /// of zero, i.e. boundary cases the grid cannot resolve.
    pub boundary_excused: usize,
    /// Disagreements with a clear margin; these indicate a real problem.
    pub hard_disagreements: usize,
    /// Trials whose minimum margin fell inside the indeterminate band.
    pub boundary_indeterminate: usize,
}

impl CrossValidation {
    /// Agreement rate counting boundary-excused disagreements as agreeing.
    pub fn excused_rate(&self) -> f64 {
        (self.agreements + self.boundary_excused) as f64 / self.trials as f64
    }
}

/// Compare [`check_weak`] on the planted pattern against the recovery
/// solver over `trials` random instances. The kernel dimension must not
/// exceed [`MAX_NULLSPACE_DIM`].
pub fn cross_validate(
    dims: &BlockDims,
    trials: usize,
    seed_base: u64,
    grid_resolution: Option<usize>,
    config: &crate::solver::SolverConfig,
) -> Result<CrossValidation> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let p = dims.nullspace_dim();
    if p > MAX_NULLSPACE_DIM {
        return Err(Error::DimensionTooLarge { dim: p, max: MAX_NULLSPACE_DIM });
    }
    let resolution = grid_resolution.unwrap_or_else(|| default_grid_resolution(p));
    let spacing = grid_spacing(p, resolution);

    let run_one = |t: usize| -> Result<(bool, bool, bool)> {
        let instance = crate::harness::generate_instance(dims, seed_base ^ t as u64);
        let basis = nullspace_basis(&instance.matrix)?;
        let pattern = SupportPattern::from_signal(&instance.planted)?;
        let report = check_weak(&basis, dims, &pattern, resolution)?;
        let solved = crate::solver::solve_l2l1(&instance, config)?;
        let success =
            crate::solver::recovery_success(&solved.estimate, &instance.planted, config.success_tol)?;
        let agree = report.holds == success;
        let excusable = !agree && report.min_margin.abs() < 10.0 * spacing;
        Ok((agree, excusable, report.boundary))
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<(bool, bool, bool)> =
        (0..trials).into_par_iter().map(run_one).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<(bool, bool, bool)> = (0..trials).map(run_one).collect::<Result<_>>()?;

    let agreements = outcomes.iter().filter(|o| o.0).count();
    let boundary_excused = outcomes.iter().filter(|o| o.1).count();
    Ok(CrossValidation {
        trials,
        agreements,
        boundary_excused,
        hard_disagreements: trials - agreements - boundary_excused,
        boundary_indeterminate: outcomes.iter().filter(|o| o.2).count(),
    })
}

/// Strong condition: at every kernel grid point, the k largest block norms
/// sum to strictly less than the remaining n - k.
pub fn check_strong(basis: &NullspaceBasis, dims: &BlockDims, grid_resolution: usize) -> Result<CheckReport> {
    check_dims(basis, dims)?;
    let k = dims.k;
    let d = dims.d;
    let n = dims.n;
    sweep(basis, grid_resolution, false, move |w| {
        let mut norms: Vec<f64> = (0..n).map(|i| w.rows(i * d, d).norm()).collect();
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let top: f64 = norms[n - k..].iter().sum();
        let rest: f64 = norms[..n - k].iter().sum();
        rest - top
    })
}

/// Sectional condition for a fixed support: block-norm mass on the support
/// is strictly less than off the support.
pub fn check_sectional(
    basis: &NullspaceBasis,
    dims: &BlockDims,
    pattern: &SupportPattern,
    grid_resolution: usize,
) -> Result<CheckReport> {
    check_dims(basis, dims)?;
    let on = membership(dims, pattern)?;
    let d = dims.d;
    let n = dims.n;
    sweep(basis, grid_resolution, false, move |w| {
        let mut margin = 0.0;
        for i in 0..n {
            let norm = w.rows(i * d, d).norm();
            margin += if on[i] { -norm } else { norm };
        }
        margin
    })
}

/// Weak condition for a fixed support and fixed block directions:
/// `-sum_kappa dir_i^T W_i < sum_{kappa^c} ||W_i||`. Unlike the other two,
/// this is odd in the directions term, so the sweep covers both signs of
/// every grid point.
pub fn check_weak(
    basis: &NullspaceBasis,
    dims: &BlockDims,
    pattern: &SupportPattern,
    grid_resolution: usize,
) -> Result<CheckReport> {
    check_dims(basis, dims)?;
    let on = membership(dims, pattern)?;
    let dirs = pattern.directions.as_ref().ok_or(Error::MissingDirections)?;
    for dir in dirs {
        if dir.len() != dims.d {
            return Err(Error::DimensionMismatch(format!(
                "direction length {} does not match block length {}",
                dir.len(),
                dims.d
            )));
        }
    }
    let margin_fn = weak_margin_fn(dims, pattern, on);
    sweep(basis, grid_resolution, true, margin_fn)
}

/// Sequential variant of [`check_weak`], for benchmarks and for verifying
/// that the parallel sweep reduces to identical results.
pub fn check_weak_seq(
    basis: &NullspaceBasis,
    dims: &BlockDims,
    pattern: &SupportPattern,
    grid_resolution: usize,
) -> Result<CheckReport> {
    check_dims(basis, dims)?;
    let on = membership(dims, pattern)?;
    pattern.directions.as_ref().ok_or(Error::MissingDirections)?;
    let margin_fn = weak_margin_fn(dims, pattern, on);
    sweep_impl(basis, grid_resolution, true, margin_fn, true)
}

fn weak_margin_fn(
    dims: &BlockDims,
    pattern: &SupportPattern,
    on: Vec<bool>,
) -> impl Fn(&DVector<f64>) -> f64 + Sync {
    let d = dims.d;
    let n = dims.n;
    let kappa = pattern.kappa.clone();
    let dirs = pattern.directions.clone().unwrap_or_default();
    move |w| {
        let mut margin = 0.0;
        for i in 0..n {
            if !on[i] {
                margin += w.rows(i * d, d).norm();
            }
        }
        for (dir, &i) in dirs.iter().zip(&kappa) {
            margin += dir.dot(&w.rows(i * d, d));
        }
        margin
    }
}

fn check_dims(basis: &NullspaceBasis, dims: &BlockDims) -> Result<()> {
    if basis.basis.nrows() != dims.signal_len() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows but dims give {}",
            basis.basis.nrows(),
            dims.signal_len()
        )));
    }
    Ok(())
}

fn membership(dims: &BlockDims, pattern: &SupportPattern) -> Result<Vec<bool>> {
    let mut on = vec![false; dims.n];
    for &i in &pattern.kappa {
        if i >= dims.n {
            return Err(Error::Domain(format!("support index {i} out of range for n={}", dims.n)));
        }
        on[i] = true;
    }
    Ok(on)
}

fn sweep(
    basis: &NullspaceBasis,
    grid_resolution: usize,
    signed: bool,
    margin: impl Fn(&DVector<f64>) -> f64 + Sync,
) -> Result<CheckReport> {
    sweep_impl(basis, grid_resolution, signed, margin, false)
}

/// Evaluate the margin over the kernel sphere grid and reduce to the
/// minimum. Ties break on the lower grid index so the witness is
/// deterministic under any parallel split.
fn sweep_impl(
    basis: &NullspaceBasis,
    grid_resolution: usize,
    signed: bool,
    margin: impl Fn(&DVector<f64>) -> f64 + Sync,
    force_sequential: bool,
) -> Result<CheckReport> {
    let p = basis.dim();
    if p > MAX_NULLSPACE_DIM {
        return Err(Error::DimensionTooLarge { dim: p, max: MAX_NULLSPACE_DIM });
    }
    if p == 0 {
        // empty kernel: the condition quantifies over nothing
        return Ok(CheckReport {
            holds: true,
            boundary: false,
            min_margin: f64::INFINITY,
            witness: DVector::zeros(basis.basis.nrows()),
            grid_points: 0,
        });
    }
    if grid_resolution == 0 {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let total = match p {
        1 => 2,
        2 => grid_resolution,
        _ => {
            if signed {
                2 * grid_resolution
            } else {
                grid_resolution
            }
        }
    };
    let eval = |idx: usize| {
        let w = grid_point(basis, p, grid_resolution, signed, idx);
        margin(&w)
    };

    let best = if force_sequential {
        min_by_index_seq(total, &eval)
    } else {
        min_by_index(total, &eval)
    };
    let (min_margin, best_idx) = best;
    let witness = grid_point(basis, p, grid_resolution, signed, best_idx);
    Ok(CheckReport {
        holds: min_margin > MARGIN_TOL,
        boundary: min_margin.abs() <= MARGIN_TOL,
        min_margin,
        witness,
        grid_points: total,
    })
}

/// The idx-th grid point, mapped through the basis into the ambient space.
fn grid_point(basis: &NullspaceBasis, p: usize, resolution: usize, signed: bool, idx: usize) -> DVector<f64> {
    match p {
        1 => {
            let sign = if idx == 0 { 1.0 } else { -1.0 };
            basis.basis.column(0) * sign
        }
        2 => {
            let angle = 2.0 * std::f64::consts::PI * idx as f64 / resolution as f64;
            basis.basis.column(0) * angle.cos() + basis.basis.column(1) * angle.sin()
        }
        _ => {
            // Fibonacci sphere; the mirrored half covers the odd weak term
            let (i, sign) = if signed && idx >= resolution {
                (idx - resolution, -1.0)
            } else {
                (idx, 1.0)
            };
            let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / resolution as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden_angle * i as f64;
            (basis.basis.column(0) * (r * phi.cos())
                + basis.basis.column(1) * (r * phi.sin())
                + basis.basis.column(2) * z)
                * sign
        }
    }
}

#[cfg(feature = "parallel")]
fn min_by_index(total: usize, eval: &(impl Fn(usize) -> f64 + Sync)) -> (f64, usize) {
    (0..total)
        .into_par_iter()
        .map(|i| (eval(i), i))
        .reduce(|| (f64::INFINITY, usize::MAX), tie_break_min)
}

#[cfg(not(feature = "parallel"))]
fn min_by_index(total: usize, eval: &(impl Fn(usize) -> f64 + Sync)) -> (f64, usize) {
    min_by_index_seq(total, eval)
}

fn min_by_index_seq(total: usize, eval: &(impl Fn(usize) -> f64 + Sync)) -> (f64, usize) {
    (0..total).map(|i| (eval(i), i)).fold((f64::INFINITY, usize::MAX), |a, b| tie_break_min(a, b))
}

fn tie_break_min(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn nullspace_of_square_matrix_is_empty() {
        let a = gaussian(6, 6, 1);
        let b = nullspace_basis(&a).unwrap();
        assert_eq!(b.dim(), 0);
        let dims = BlockDims::new(3, 2, 3, 1).unwrap();
        let rep = check_strong(&b, &dims, 100).unwrap();
        assert!(rep.holds && !rep.boundary);
        assert_eq!(rep.grid_points, 0);
    }

    #[test]
    fn nullspace_of_single_row() {
        let a = DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]);
        let b = nullspace_basis(&a).unwrap();
        assert_eq!(b.dim(), 3);
        assert!((&a * &b.basis).norm() < 1e-10);
        // the kernel misses the first coordinate
        for j in 0..3 {
            assert!(b.basis[(0, j)].abs() < 1e-12);
        }
    }

    #[test]
    fn nullspace_is_orthonormal_and_annihilated() {
        let a = gaussian(4, 6, 2);
        let b = nullspace_basis(&a).unwrap();
        assert_eq!(b.dim(), 2);
        assert!((&a * &b.basis).amax() < 1e-10);
        let gram = b.basis.transpose() * &b.basis;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn symmetric_two_block_kernel_fails_strong() {
        // kernel of [1 -1] is spanned by (1,1)/sqrt(2): |w1| = |w2| violates
        // the strict inequality, landing on the boundary
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let b = nullspace_basis(&a).unwrap();
        let dims = BlockDims::new(2, 1, 1, 1).unwrap();
        let rep = check_strong(&b, &dims, 2).unwrap();
        assert!(!rep.holds);
        assert!(rep.boundary);

        let pattern = SupportPattern::new(vec![1], None).unwrap();
        let rep = check_sectional(&b, &dims, &pattern, 2).unwrap();
        assert!(!rep.holds && rep.boundary);
    }

    #[test]
    fn empty_support_sectional_always_holds() {
        let a = gaussian(2, 4, 3);
        let b = nullspace_basis(&a).unwrap();
        let dims = BlockDims::new(2, 2, 1, 0).unwrap();
        let pattern = SupportPattern::new(vec![], None).unwrap();
        let rep = check_sectional(&b, &dims, &pattern, 1000).unwrap();
        assert!(rep.holds, "0 < sum of norms for every unit kernel vector");
    }

    #[test]
    fn weak_requires_directions() {
        let a = gaussian(2, 4, 4);
        let b = nullspace_basis(&a).unwrap();
        let dims = BlockDims::new(2, 2, 1, 1).unwrap();
        let pattern = SupportPattern::new(vec![0], None).unwrap();
        assert!(matches!(
            check_weak(&b, &dims, &pattern, 100),
            Err(Error::MissingDirections)
        ));
    }

    #[test]
    fn dimension_limit_enforced() {
        let a = gaussian(1, 5, 5);
        let b = nullspace_basis(&a).unwrap();
        assert_eq!(b.dim(), 4);
        let dims = BlockDims::new(5, 1, 1, 1).unwrap();
        assert!(matches!(
            check_strong(&b, &dims, 10),
            Err(Error::DimensionTooLarge { dim: 4, max: 3 })
        ));
    }

    #[test]
    fn weak_parallel_and_sequential_agree() {
        // kernel dimension 3 exercises the signed Fibonacci sweep
        let a = gaussian(5, 8, 6);
        let b = nullspace_basis(&a).unwrap();
        assert_eq!(b.dim(), 3);
        let dims = BlockDims::new(8, 1, 5, 1).unwrap();
        let dir = DVector::from_vec(vec![1.0]);
        let pattern = SupportPattern::new(vec![2], Some(vec![dir])).unwrap();
        let par = check_weak(&b, &dims, &pattern, 5000).unwrap();
        let seq = check_weak_seq(&b, &dims, &pattern, 5000).unwrap();
        assert_eq!(par.min_margin, seq.min_margin);
        assert_eq!(par.witness, seq.witness);
        assert_eq!(par.grid_points, 10_000);
    }

    #[test]
    fn pattern_validation() {
        assert!(SupportPattern::new(vec![1, 1], None).is_err());
        let bad_dir = DVector::from_vec(vec![1.0, 1.0]);
        assert!(SupportPattern::new(vec![0], Some(vec![bad_dir])).is_err());
    }
}
