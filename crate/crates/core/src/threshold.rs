//! Strong, sectional, and weak recovery thresholds as functions of the
//! block length.
//!
//! For each threshold kind the implicit theta equation is solved on
//! (beta, 1], the certified undersampling bound `required_alpha` is
//! evaluated at the root, and `threshold_beta` inverts the bound by
//! bisection on beta. The large-d closed forms, the simplified theta = 1
//! conditions, Gordon's escape-probability bound, and the finite-n slack
//! term live here as well.

use crate::error::{Error, Result};
use crate::special::{chi_inv_cdf, chi_mean, chi_upper_trunc_mean, chisq_upper_trunc_mean};
use serde::{Deserialize, Serialize};

/// Which recovery guarantee a threshold certifies: every k-block-sparse
/// signal (strong), every signal on a fixed support (sectional), or a fixed
/// support with fixed block directions (weak).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Strong,
    Sectional,
    Weak,
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThresholdKind::Strong => write!(f, "strong"),
            ThresholdKind::Sectional => write!(f, "sectional"),
            ThresholdKind::Weak => write!(f, "weak"),
        }
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "strong" => Ok(ThresholdKind::Strong),
            "sectional" => Ok(ThresholdKind::Sectional),
            "weak" => Ok(ThresholdKind::Weak),
            other => Err(format!("unknown threshold kind `{other}` (expected strong, sectional, or weak)")),
        }
    }
}

/// A threshold request: kind, block length, sparsity fraction, and the
/// slack parameter of the concentration argument (0 gives the asymptotic
/// curves).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub kind: ThresholdKind,
    pub d: u32,
    pub beta: f64,
    pub epsilon: f64,
}

impl ThresholdQuery {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Domain("block length d must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Domain(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be a finite nonnegative real, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Root of the theta equation together with solve diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct ThetaSolution {
    /// Largest root found on (beta, 1].
    pub theta_hat: f64,
    /// |theta_equation(theta_hat)| after bisection.
    pub residual: f64,
    /// Number of sign changes on the scan grid. More than one means the
    /// equation has several candidate roots; the largest is reported.
    pub sign_changes: usize,
}

/// Solved threshold certificate for one (kind, beta, d, epsilon) query.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Tail-fraction parameter the certificate was evaluated at.
    pub theta_hat: f64,
    /// Minimal undersampling ratio alpha = m/n certified to recover at this
    /// beta (the width expression divided by d).
    pub required_alpha: f64,
    /// True when theta_hat solves the theta equation to tolerance; false
    /// when the explicit theta = 1 certificate was used instead.
    pub converged: bool,
    /// Equation residual at theta_hat.
    pub residual: f64,
    /// Sign changes seen on the scan grid (0 for boundary cases).
    pub sign_changes: usize,
}

/// Result of inverting the certificate: the largest certified beta.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BetaThreshold {
    pub beta: f64,
    /// False when not even beta -> 0 is certifiable at this alpha.
    pub certified: bool,
}

/// Gordon escape-through-a-mesh certificate for a width bound.
#[derive(Debug, Clone, Copy)]
pub struct GaussianWidthBound {
    pub dm: u32,
    pub width: f64,
    pub constant: f64,
    /// Lower bound on the probability that the random subspace misses the
    /// sphere subset, clamped below at 0.
    pub probability_lower_bound: f64,
}

const THETA_GRID: usize = 1_000;
const THETA_RESID_TOL: f64 = 1e-10;
const BETA_BISECT_TOL: f64 = 1e-7;
/// Below this, beta is treated as exactly 0: the theta equation has no
/// interior root there (the conditional tail mean strictly exceeds its own
/// cutoff quantile), and the certificate degenerates continuously to
/// required_alpha = 0.
const BETA_ZERO: f64 = 1e-12;

/// Left-hand side of the theta equation for the given kind.
///
/// Strong uses the full sorted-block population; sectional and weak
/// renormalize the off-support population of mass 1 - beta, which is where
/// the fractions (theta - beta)/(1 - beta) and (1 - theta)/(1 - beta) come
/// from.
pub fn theta_equation(
    kind: ThresholdKind,
    beta: f64,
    d: u32,
    epsilon: f64,
    theta: f64,
) -> Result<f64> {
    ThresholdQuery { kind, d, beta, epsilon }.validate()?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta must lie in (0, 1], got {theta}")));
    }
    if theta < beta {
        // the top-beta tail must be contained in the top-theta tail
        return Err(Error::Domain(format!("theta={theta} below beta={beta}")));
    }
    let quantile_arg = match kind {
        ThresholdKind::Strong => (1.0 + epsilon) * (1.0 - theta),
        _ => (1.0 + epsilon) * (1.0 - theta) / (1.0 - beta),
    };
    if !(0.0..1.0).contains(&quantile_arg) {
        return Err(Error::Domain(format!(
            "quantile argument {quantile_arg} outside [0, 1) at theta={theta}"
        )));
    }
    let psi = expected_width_numerator(kind, beta, d, theta)?;
    Ok((1.0 - epsilon) * psi / theta - chi_inv_cdf(d, quantile_arg)?)
}

/// Per-n expectation of the sorted-block partial sum in the width bound
/// numerator, at tail fraction theta.
fn expected_width_numerator(kind: ThresholdKind, beta: f64, d: u32, theta: f64) -> Result<f64> {
    match kind {
        ThresholdKind::Strong => {
            Ok(chi_upper_trunc_mean(d, theta)? - 2.0 * chi_upper_trunc_mean(d, beta)?)
        }
        ThresholdKind::Sectional => {
            let u = (theta - beta) / (1.0 - beta);
            Ok((1.0 - beta) * chi_upper_trunc_mean(d, u)? - chi_mean(d) * beta)
        }
        ThresholdKind::Weak => {
            let u = (theta - beta) / (1.0 - beta);
            Ok((1.0 - beta) * chi_upper_trunc_mean(d, u)?)
        }
    }
}

/// Certified bound on alpha, i.e. (1/d) times the right-hand side of the
/// threshold inequality, evaluated at a given theta.
fn alpha_bound_at(kind: ThresholdKind, beta: f64, d: u32, theta: f64) -> Result<f64> {
    let df = d as f64;
    let psi = expected_width_numerator(kind, beta, d, theta)?;
    let val = match kind {
        ThresholdKind::Strong => chisq_upper_trunc_mean(d, theta)? - psi * psi / theta,
        _ => {
            let u = (theta - beta) / (1.0 - beta);
            (1.0 - beta) * chisq_upper_trunc_mean(d, u)? + beta * df - psi * psi / theta
        }
    };
    Ok(val / df)
}

/// Solve the theta equation on (beta, 1] by a sign-change scan followed by
/// bisection.
///
/// The scan grid combines log-spaced offsets above the lower bracket with a
/// linear sweep up to 1, so roots in the thin boundary layer at small beta
/// are resolved. If several sign changes exist the largest root is used
/// (it yields the most conservative certificate) and the count is reported.
pub fn solve_theta(kind: ThresholdKind, beta: f64, d: u32, epsilon: f64) -> Result<ThetaSolution> {
    ThresholdQuery { kind, d, beta, epsilon }.validate()?;
    let lo = match kind {
        ThresholdKind::Strong => beta.max(epsilon / (1.0 + epsilon)),
        _ => beta.max(1.0 - (1.0 - beta) / (1.0 + epsilon)),
    };
    let span = 1.0 - lo;
    if span <= 0.0 {
        return Err(Error::NoRoot { kind, beta, d, epsilon });
    }

    let eval = |theta: f64| theta_equation(kind, beta, d, epsilon, theta).ok();

    let half = THETA_GRID / 2;
    let mut grid = Vec::with_capacity(THETA_GRID + 1);
    for j in 0..half {
        // offsets from lo spanning twelve decades
        let t = lo + span * 10f64.powf(-12.0 + 12.0 * j as f64 / half as f64);
        grid.push(t);
    }
    for j in 1..=half {
        grid.push(lo + span * j as f64 / half as f64);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let mut brackets: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &t in &grid {
        if t <= lo || t > 1.0 {
            continue;
        }
        if let Some(v) = eval(t) {
            if let Some((tp, vp)) = prev {
                if vp * v < 0.0 {
                    brackets.push((tp, vp, t, v));
                } else if v == 0.0 {
                    brackets.push((t, 0.0, t, 0.0));
                }
            }
            prev = Some((t, v));
        }
    }
    let &(mut a, mut fa, mut b, _fb) = match brackets.last() {
        Some(br) => br,
        None => return Err(Error::NoRoot { kind, beta, d, epsilon }),
    };

    let mut root = 0.5 * (a + b);
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        root = 0.5 * (a + b);
        let fm = match eval(root) {
            Some(v) => v,
            None => break,
        };
        residual = fm.abs();
        if residual < 1e-13 || (b - a) <= 4.0 * f64::EPSILON * b.max(1e-12) {
            break;
        }
        if fa * fm < 0.0 {
            b = root;
        } else {
            a = root;
            fa = fm;
        }
    }
    if residual < THETA_RESID_TOL {
        return Ok(ThetaSolution { theta_hat: root, residual, sign_changes: brackets.len() });
    }
    if 1.0 - root < 1e-6 {
        // The equation is stiff against theta = 1: the quantile term drops
        // to 0 exactly there while the 1 - theta subtraction cannot resolve
        // the root below this distance. The explicit theta = 1 certificate
        // applies instead; the bound value differs by O(1 - root).
        return Err(Error::NoRoot { kind, beta, d, epsilon });
    }
    if residual < 1e-8 {
        // interval resolved to float limits under a steep slope; theta is
        // as accurate as representable even though the residual is not tiny
        return Ok(ThetaSolution { theta_hat: root, residual, sign_changes: brackets.len() });
    }
    Err(Error::NoConvergence(format!(
        "theta bisection residual {residual:.3e} for {kind} beta={beta} d={d}"
    )))
}

/// Minimal certified alpha for the given (kind, beta, d, epsilon).
///
/// Solves the theta equation and evaluates the width bound at the root.
/// At beta = 0 the root degenerates to the boundary and the bound vanishes;
/// the continuous limit required_alpha = 0 is returned. When no interior
/// root exists but the theta = 1 certificate is still valid (its width
/// numerator is nonnegative), that explicit certificate is returned with
/// `converged = false`; otherwise the query is genuinely uncertifiable and
/// `NoRoot` propagates.
pub fn required_alpha(
    kind: ThresholdKind,
    beta: f64,
    d: u32,
    epsilon: f64,
) -> Result<ThresholdResult> {
    ThresholdQuery { kind, d, beta, epsilon }.validate()?;
    if beta < BETA_ZERO {
        return Ok(ThresholdResult {
            theta_hat: 0.0,
            required_alpha: 0.0,
            converged: true,
            residual: 0.0,
            sign_changes: 0,
        });
    }
    match solve_theta(kind, beta, d, epsilon) {
        Ok(sol) => Ok(ThresholdResult {
            theta_hat: sol.theta_hat,
            required_alpha: alpha_bound_at(kind, beta, d, sol.theta_hat)?,
            converged: true,
            residual: sol.residual,
            sign_changes: sol.sign_changes,
        }),
        Err(Error::NoRoot { .. }) => {
            let psi1 = expected_width_numerator(kind, beta, d, 1.0)?;
            if psi1 > 0.0 {
                Ok(ThresholdResult {
                    theta_hat: 1.0,
                    required_alpha: alpha_bound_at(kind, beta, d, 1.0)?,
                    converged: false,
                    residual: f64::NAN,
                    sign_changes: 0,
                })
            } else {
                Err(Error::NoRoot { kind, beta, d, epsilon })
            }
        }
        Err(e) => Err(e),
    }
}

/// Largest beta (to 1e-6, by bisection) whose certificate satisfies
/// `required_alpha < alpha`. Returns beta = 0 with `certified = false` when
/// not even a vanishing sparsity fraction is certifiable.
pub fn threshold_beta(
    kind: ThresholdKind,
    alpha: f64,
    d: u32,
    epsilon: f64,
) -> Result<BetaThreshold> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    ThresholdQuery { kind, d, beta: 0.0, epsilon }.validate()?;
    let certifies = |b: f64| match required_alpha(kind, b, d, epsilon) {
        Ok(r) => r.required_alpha < alpha,
        Err(_) => false,
    };
    if !certifies(1e-8) {
        return Ok(BetaThreshold { beta: 0.0, certified: false });
    }
    let mut lo = 1e-8;
    let mut hi = 1.0 - 1e-9;
    if certifies(hi) {
        return Ok(BetaThreshold { beta: hi, certified: true });
    }
    while hi - lo > BETA_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if certifies(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BetaThreshold { beta: lo, certified: true })
}

/// d -> infinity closed forms: 4 beta (1 - beta) for strong and sectional,
/// beta (2 - beta) for weak.
pub fn asymptotic_required_alpha(kind: ThresholdKind, beta: f64) -> f64 {
    match kind {
        ThresholdKind::Strong | ThresholdKind::Sectional => 4.0 * beta * (1.0 - beta),
        ThresholdKind::Weak => beta * (2.0 - beta),
    }
}

/// Inverse of the d -> infinity closed forms on their monotone branch:
/// (1 - sqrt(1 - alpha)) / 2 for strong and sectional, 1 - sqrt(1 - alpha)
/// for weak.
pub fn asymptotic_threshold_beta(kind: ThresholdKind, alpha: f64) -> f64 {
    let root = (1.0 - alpha).max(0.0).sqrt();
    match kind {
        ThresholdKind::Strong | ThresholdKind::Sectional => (1.0 - root) / 2.0,
        ThresholdKind::Weak => 1.0 - root,
    }
}

/// The suboptimal theta = 1 certificates, usable at any fixed d:
/// strong `1 - (chi_mean - 2 trunc(beta))^2 / d`,
/// sectional `1 - (1 - 2 beta)^2 chi_mean^2 / d`,
/// weak `1 - (1 - beta)^2 chi_mean^2 / d`.
pub fn simplified_required_alpha(kind: ThresholdKind, beta: f64, d: u32) -> Result<f64> {
    ThresholdQuery { kind, d, beta, epsilon: 0.0 }.validate()?;
    let df = d as f64;
    let cm = chi_mean(d);
    Ok(match kind {
        ThresholdKind::Strong => {
            let psi = cm - 2.0 * chi_upper_trunc_mean(d, beta)?;
            1.0 - psi * psi / df
        }
        ThresholdKind::Sectional => 1.0 - (1.0 - 2.0 * beta).powi(2) * cm * cm / df,
        ThresholdKind::Weak => 1.0 - (1.0 - beta).powi(2) * cm * cm / df,
    })
}

/// Gordon's escape-through-a-mesh probability bound: a uniformly random
/// d(n-m)-dimensional subspace misses a sphere subset of Gaussian width
/// `width` with probability at least
/// `1 - constant * exp(-(sqrt(dm) - 1/(4 sqrt(dm)) - width)^2 / 18)`.
///
/// `constant` is 3.5 (Gordon's original) or 2.5 (the sharpened variant).
pub fn escape_prob_lower_bound(dm: u32, width: f64, constant: f64) -> Result<GaussianWidthBound> {
    if dm == 0 {
        return Err(Error::Domain("dm must be at least 1".into()));
    }
    if !(width >= 0.0) || !width.is_finite() {
        return Err(Error::Domain(format!("width must be a finite nonnegative real, got {width}")));
    }
    if constant != 3.5 && constant != 2.5 {
        return Err(Error::Domain(format!("Gordon constant must be 3.5 or 2.5, got {constant}")));
    }
    let root = (dm as f64).sqrt();
    let margin = root - 1.0 / (4.0 * root) - width;
    if margin <= 0.0 {
        return Err(Error::Domain(format!(
            "width {width} reaches sqrt(dm) - 1/(4 sqrt(dm)) = {:.6}; the bound is vacuous",
            root - 1.0 / (4.0 * root)
        )));
    }
    let p = 1.0 - constant * (-margin * margin / 18.0).exp();
    Ok(GaussianWidthBound { dm, width, constant, probability_lower_bound: p.max(0.0) })
}

/// Finite-n correction to the expected width bound:
/// `sqrt(n) (exp(-n eps^2 delta / (2 (1 + eps))) + exp(-eps^2 psi^2 n / 2))`.
pub fn finite_n_slack(n: u64, delta: f64, psi: f64, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(psi > 0.0) || !(epsilon > 0.0) {
        return Err(Error::Domain(format!("psi and epsilon must be positive, got psi={psi}, epsilon={epsilon}")));
    }
    let nf = n as f64;
    let first = (-nf * epsilon * epsilon * delta / (2.0 * (1.0 + epsilon))).exp();
    let second = (-epsilon * epsilon * psi * psi * nf / 2.0).exp();
    Ok(nf.sqrt() * (first + second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::chi_mean;

    #[test]
    fn theta_equation_trivial_endpoints() {
        // gamma inverse at 0 vanishes and the truncated mean at 1 is the full
        // mean, so the equation at theta = 1, beta = 0 reduces to chi_mean.
        for &d in &[3u32, 15] {
            let v = theta_equation(ThresholdKind::Strong, 0.0, d, 0.0, 1.0).unwrap();
            assert!((v - chi_mean(d)).abs() < 1e-12, "d={d} got {v}");
        }
        let v = theta_equation(ThresholdKind::Weak, 0.0, 15, 0.0, 1.0).unwrap();
        assert!((v - chi_mean(15)).abs() < 1e-12);
    }

    #[test]
    fn theta_equation_domain_errors() {
        assert!(theta_equation(ThresholdKind::Strong, 0.5, 15, 0.0, 0.3).is_err());
        assert!(theta_equation(ThresholdKind::Weak, 0.2, 15, 0.0, 0.0).is_err());
        // epsilon pushes the quantile argument to 1
        assert!(theta_equation(ThresholdKind::Strong, 0.0, 15, 0.5, 0.2).is_err());
    }

    #[test]
    fn solve_theta_resubstitutes() {
        let sol = solve_theta(ThresholdKind::Sectional, 0.1, 5, 0.0).unwrap();
        assert!(sol.theta_hat >= 0.1 && sol.theta_hat <= 1.0);
        let resid = theta_equation(ThresholdKind::Sectional, 0.1, 5, 0.0, sol.theta_hat).unwrap();
        assert!(resid.abs() < 1e-10, "residual {resid}");

        let sol = solve_theta(ThresholdKind::Weak, 0.28, 15, 0.0).unwrap();
        let resid = theta_equation(ThresholdKind::Weak, 0.28, 15, 0.0, sol.theta_hat).unwrap();
        assert!(resid.abs() < 1e-10);
    }

    #[test]
    fn solve_theta_near_degenerate_beta() {
        // nearly full sparsity: either a root hugging 1 or an honest NoRoot
        match solve_theta(ThresholdKind::Weak, 0.9999, 15, 0.0) {
            Ok(sol) => assert!(sol.theta_hat > 0.9999 && sol.theta_hat <= 1.0),
            Err(Error::NoRoot { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn solve_theta_resolves_tiny_beta_boundary_layer() {
        // the root sits ~1e-5 above beta; the log-spaced scan must find it
        let sol = solve_theta(ThresholdKind::Weak, 1e-6, 15, 0.0).unwrap();
        assert!(sol.theta_hat < 1e-3, "theta_hat {}", sol.theta_hat);
        assert!(sol.residual < 1e-10);
        let sol = solve_theta(ThresholdKind::Strong, 1e-4, 15, 0.0).unwrap();
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn required_alpha_limits_and_monotone_anchor() {
        let r0 = required_alpha(ThresholdKind::Weak, 0.0, 15, 0.0).unwrap();
        assert_eq!(r0.required_alpha, 0.0);
        let r3 = required_alpha(ThresholdKind::Weak, 0.3, 15, 0.0).unwrap();
        assert!(r0.required_alpha < r3.required_alpha);
        assert!((0.0..1.0).contains(&r3.required_alpha));
    }

    #[test]
    fn required_alpha_matches_large_d_closed_forms() {
        // Eq-(118)/(123)-style checks at d = 500. The strong certificate at
        // beta = 0.45 sits near 4*0.45*0.55 = 0.99; weak at 0.5 near 0.75.
        let r = required_alpha(ThresholdKind::Strong, 0.45, 500, 0.0).unwrap();
        assert!(
            (r.required_alpha - asymptotic_required_alpha(ThresholdKind::Strong, 0.45)).abs() < 0.02,
            "strong got {}",
            r.required_alpha
        );
        let r = required_alpha(ThresholdKind::Weak, 0.5, 500, 0.0).unwrap();
        assert!((r.required_alpha - 0.75).abs() < 0.02, "weak got {}", r.required_alpha);
    }

    #[test]
    fn required_alpha_uncertifiable_beyond_strong_range() {
        // At finite d the strong certificate cannot reach beta = 1/2: the
        // expected width numerator at theta = 1 is already negative.
        match required_alpha(ThresholdKind::Strong, 0.5, 500, 0.0) {
            Err(Error::NoRoot { .. }) => {}
            other => panic!("expected NoRoot, got {other:?}"),
        }
    }

    #[test]
    fn threshold_beta_anchors() {
        let b = threshold_beta(ThresholdKind::Weak, 1.0, 500, 0.0).unwrap();
        assert!(b.certified && (b.beta - 1.0).abs() < 0.02, "got {}", b.beta);
        let b = threshold_beta(ThresholdKind::Strong, 0.75, 500, 0.0).unwrap();
        assert!((b.beta - 0.25).abs() < 0.02, "got {}", b.beta);
        let b = threshold_beta(ThresholdKind::Weak, 0.5, 15, 0.0).unwrap();
        let k = 100.0 * b.beta;
        assert!((25.0..=31.0).contains(&k), "100 beta_w = {k}");
    }

    #[test]
    fn threshold_beta_rejects_bad_alpha() {
        assert!(threshold_beta(ThresholdKind::Weak, 0.0, 15, 0.0).is_err());
        assert!(threshold_beta(ThresholdKind::Weak, 1.5, 15, 0.0).is_err());
    }

    #[test]
    fn asymptotic_values() {
        assert_eq!(asymptotic_required_alpha(ThresholdKind::Strong, 0.5), 1.0);
        assert_eq!(asymptotic_required_alpha(ThresholdKind::Weak, 0.0), 0.0);
        assert!((asymptotic_required_alpha(ThresholdKind::Weak, 0.5) - 0.75).abs() < 1e-15);
        assert!((asymptotic_threshold_beta(ThresholdKind::Weak, 0.75) - 0.5).abs() < 1e-12);
        assert!((asymptotic_threshold_beta(ThresholdKind::Strong, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simplified_values() {
        let v = simplified_required_alpha(ThresholdKind::Weak, 0.0, 1000).unwrap();
        assert!(v.abs() < 0.002, "got {v}");
        for &d in &[1u32, 15, 100] {
            let v = simplified_required_alpha(ThresholdKind::Sectional, 0.5, d).unwrap();
            assert_eq!(v, 1.0);
        }
        let s = simplified_required_alpha(ThresholdKind::Strong, 0.2, 15).unwrap();
        let r = required_alpha(ThresholdKind::Strong, 0.2, 15, 0.0).unwrap();
        assert!(s >= r.required_alpha - 1e-9);
    }

    #[test]
    fn escape_probability_bound() {
        let b = escape_prob_lower_bound(100, 0.0, 3.5).unwrap();
        let expected = 1.0 - 3.5 * (-(9.975_f64).powi(2) / 18.0).exp();
        assert!((b.probability_lower_bound - expected).abs() < 1e-12);

        // continuity edge: exponent -> 0 means the raw bound tends to
        // 1 - constant < 0, which clamps to 0
        let b = escape_prob_lower_bound(100, 9.975 - 1e-9, 3.5).unwrap();
        assert_eq!(b.probability_lower_bound, 0.0);

        let b = escape_prob_lower_bound(1_000_000, 0.0, 2.5).unwrap();
        assert!((b.probability_lower_bound - 1.0).abs() < 1e-15);

        assert!(escape_prob_lower_bound(100, 50.0, 3.5).is_err());
        assert!(escape_prob_lower_bound(100, 1.0, 3.0).is_err());
    }

    #[test]
    fn finite_n_slack_values() {
        let v = finite_n_slack(1, 1.0, 1.0, 1.0).unwrap();
        let expected = (-0.25_f64).exp() + (-0.5_f64).exp();
        assert!((v - expected).abs() < 1e-14);

        // decay beats the sqrt(n) factor once n is large
        let v = finite_n_slack(1_000_000, 0.3, 0.5, 0.01).unwrap();
        assert!(v < 1e-2, "got {v}");
        let v = finite_n_slack(4_000_000, 0.3, 0.5, 0.01).unwrap();
        assert!(v < 1e-6, "got {v}");

        let n = 100.0_f64;
        let expected = n.sqrt()
            * ((-n * 0.01 * 0.01 * 0.3 / (2.0 * 1.01)).exp() + (-0.01 * 0.01 * 0.25 * n / 2.0).exp());
        let v = finite_n_slack(100, 0.3, 0.5, 0.01).unwrap();
        assert!((v - expected).abs() < 1e-12);

        assert!(finite_n_slack(10, 0.0, 1.0, 1.0).is_err());
        assert!(finite_n_slack(10, 0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for kind in [ThresholdKind::Strong, ThresholdKind::Sectional, ThresholdKind::Weak] {
            let s = kind.to_string();
            assert_eq!(s.parse::<ThresholdKind>().unwrap(), kind);
        }
        assert!("weakest".parse::<ThresholdKind>().is_err());
    }
}
