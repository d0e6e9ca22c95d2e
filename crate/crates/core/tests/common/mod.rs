//! Shared test oracles: numeric quadrature of the chi density, Monte Carlo
//! order statistics, and an independent smoothed-minimization reference for
//! the l2/l1 program. Everything here deliberately avoids the library's
//! incomplete-gamma and splitting-solver code paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

/// Chi density with d degrees of freedom, evaluated in log space.
pub fn chi_pdf(d: u32, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let df = d as f64;
    ((1.0 - df / 2.0) * std::f64::consts::LN_2 - ln_gamma(df / 2.0) + (df - 1.0) * t.ln()
        - t * t / 2.0)
        .exp()
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    recurse(f, a, fa, b, fb, m, fm, simpson(fa, fm, fb, b - a), tol, 48)
}

/// Upper integration limit that captures the entire chi(d) tail mass.
pub fn chi_upper_limit(d: u32) -> f64 {
    (d as f64).sqrt() + 20.0
}

/// Chi CDF by quadrature of the density.
pub fn chi_cdf_quadrature(d: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    integrate(&|t| chi_pdf(d, t), 0.0, x, 1e-12)
}

/// Chi quantile by bisection on the quadrature CDF.
pub fn chi_quantile_quadrature(d: u32, p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p));
    if p == 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = chi_upper_limit(d);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if chi_cdf_quadrature(d, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tail moment of the chi distribution by quadrature:
/// integral of t^power dF over the top `theta` probability mass.
pub fn chi_tail_moment_quadrature(d: u32, theta: f64, power: i32) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    let cut = if theta >= 1.0 { 0.0 } else { chi_quantile_quadrature(d, 1.0 - theta) };
    integrate(&|t| t.powi(power) * chi_pdf(d, t), cut, chi_upper_limit(d), 1e-12)
}

/// i.i.d. chi(d) draws (sqrt of a chi-square sample).
pub fn chi_samples(d: u32, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chisq = rand_distr::ChiSquared::new(d as f64).expect("valid dof");
    (0..count).map(|_| rng.sample::<f64, _>(chisq).sqrt()).collect()
}

pub struct TrimmedMoment {
    pub estimate: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of (1/n) * sum of v^power over the top theta
/// fraction of sorted samples, with its plug-in standard error.
pub fn mc_upper_trunc_moment(samples: &[f64], theta: f64, power: i32) -> TrimmedMoment {
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let take = ((theta * n as f64).round() as usize).min(n);
    let cut = n - take;
    let terms: Vec<f64> =
        (0..n).map(|i| if i >= cut { sorted[i].powi(power) } else { 0.0 }).collect();
    let mean = terms.iter().sum::<f64>() / n as f64;
    let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n as f64 - 1.0);
    TrimmedMoment { estimate: mean, std_error: (var / n as f64).sqrt() }
}

/// Orthonormal kernel basis by modified Gram-Schmidt on the projector
/// columns (independent of the library's eigendecomposition route).
pub fn mgs_nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = a.ncols();
    let gram = a * a.transpose();
    let chol = nalgebra::linalg::Cholesky::new(gram).expect("full row rank");
    let projector = DMatrix::identity(cols, cols) - a.transpose() * chol.solve(a);
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for j in 0..cols {
        let mut v = projector.column(j).into_owned();
        for _ in 0..2 {
            for b in &kept {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            kept.push(v / norm);
        }
    }
    let mut basis = DMatrix::zeros(cols, kept.len());
    for (j, b) in kept.iter().enumerate() {
        basis.set_column(j, b);
    }
    basis
}

/// Independent l2/l1 reference: minimize the smoothed objective
/// sum_i sqrt(||X_i||^2 + mu^2) over the affine feasible set parameterized
/// by kernel coordinates, with gradient descent, backtracking, and a mu
/// continuation schedule. Returns the unsmoothed objective at the solution.
pub fn reference_objective(a: &DMatrix<f64>, y: &DVector<f64>, d: usize) -> f64 {
    let scale = y.norm();
    if scale == 0.0 {
        return 0.0;
    }
    let ys = y / scale;
    let gram = a * a.transpose();
    let chol = nalgebra::linalg::Cholesky::new(gram).expect("full row rank");
    let x0 = a.transpose() * chol.solve(&ys);
    let basis = mgs_nullspace(a);
    let p = basis.ncols();
    let n = a.ncols() / d;

    let smoothed = |x: &DVector<f64>, mu: f64| -> (f64, DVector<f64>) {
        let mut value = 0.0;
        let mut grad = DVector::zeros(x.len());
        for i in 0..n {
            let block = x.rows(i * d, d);
            let r = (block.norm_squared() + mu * mu).sqrt();
            value += r;
            grad.rows_mut(i * d, d).copy_from(&(block / r));
        }
        (value, grad)
    };

    let mut v = DVector::zeros(p);
    let mut mu = 0.1;
    while mu > 1e-12 {
        for _ in 0..4000 {
            let x = &x0 + &basis * &v;
            let (value, grad_x) = smoothed(&x, mu);
            let grad = basis.transpose() * grad_x;
            let gn = grad.norm();
            if gn < mu * 1e-3 {
                break;
            }
            let mut step = 1.0;
            loop {
                let candidate = &v - &grad * step;
                let xc = &x0 + &basis * &candidate;
                let (fc, _) = smoothed(&xc, mu);
                if fc <= value - 0.5 * step * gn * gn || step < 1e-16 {
                    v = candidate;
                    break;
                }
                step *= 0.5;
            }
        }
        mu *= 0.25;
    }
    let x = &x0 + &basis * &v;
    scale * (0..n).map(|i| x.rows(i * d, d).norm()).sum::<f64>()
}
