//! Certified sampling-period bounds and error-estimate constants.
//!
//! For a linear output `h(x) = Cx`, constant observer gain `g = R` and
//! predictor gain `K = -qI`, the sampled-data observer converges exponentially
//! whenever every sampling gap is below
//!
//! ```text
//! T_max = (1/q) ln(1 + w q / beta)     q > 0 or -beta/w < q < 0
//! T_max = w / beta                     q = 0
//! T_max = +inf                         q <= -beta/w
//! ```
//!
//! with `beta = L sqrt(|R'PR|)` and `w` the decay rate of the continuous-time
//! error system measured in the `P`-norm.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::csv::{fmt_f64, CsvTable};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_lower, generalized_symmetric_eig, small_symmetric_eig, symmetric_norm,
};

/// Margin that turns the strict sigma-conditions into decidable ones.
pub const SIGMA_MARGIN: f64 = 1e-9;
/// Absolute width at which sigma bisection stops.
pub const SIGMA_TOL: f64 = 1e-9;
/// Points in the coarse scan of [`optimize_q`].
pub const COARSE_POINTS: usize = 101;

/// `int_0^T exp(a s) ds`, with a series for the removable singularity at `a = 0`.
pub fn exp_integral(a: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0, "exp_integral needs T >= 0");
    let threshold = 1e-12 * (1.0_f64).max(1.0 / t);
    if a.abs() > threshold {
        (a * t).exp_m1() / a
    } else {
        let at = a * t;
        t * (1.0 + at / 2.0 + at * at / 6.0)
    }
}

/// Scalar constants `(omega, gamma, L, q)` of an IOS observer certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IosCertificate {
    pub omega: f64,
    pub gamma: f64,
    pub l: f64,
    pub q: f64,
}

impl IosCertificate {
    pub fn new(omega: f64, gamma: f64, l: f64, q: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::config(format!("omega must be > 0, got {omega}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::config(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::config(format!("L must be >= 0, got {l}")));
        }
        if !q.is_finite() {
            return Err(Error::config(format!("q must be finite, got {q}")));
        }
        Ok(Self { omega, gamma, l, q })
    }
}

/// Quadratic certificate `(C, R, P, omega, L, q)` for a plant with linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCertificate {
    c: DMatrix<f64>,
    r: DMatrix<f64>,
    p: DMatrix<f64>,
    omega: f64,
    l: f64,
    q: f64,
    rpr: f64,
    p_eig: (f64, f64),
}

impl LinearCertificate {
    pub fn new(
        c: DMatrix<f64>,
        r: DMatrix<f64>,
        p: DMatrix<f64>,
        omega: f64,
        l: f64,
        q: f64,
    ) -> Result<Self> {
        let n = p.nrows();
        let outputs = c.nrows();
        if p.ncols() != n {
            return Err(Error::dim(
                "P",
                format!("{n}x{n}"),
                format!("{}x{}", n, p.ncols()),
            ));
        }
        if c.ncols() != n {
            return Err(Error::dim("C columns", n, c.ncols()));
        }
        if r.shape() != (n, outputs) {
            return Err(Error::dim(
                "R",
                format!("{n}x{outputs}"),
                format!("{}x{}", r.nrows(), r.ncols()),
            ));
        }
        if r.iter().all(|v| *v == 0.0) {
            return Err(Error::config("R must be non-zero"));
        }
        let (c1, c2) = positive_definite_bounds(&p)?;
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::config(format!("omega must be > 0, got {omega}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::config(format!("L must be > 0, got {l}")));
        }
        if !q.is_finite() {
            return Err(Error::config(format!("q must be finite, got {q}")));
        }
        let rpr = symmetric_norm(&(r.transpose() * &p * &r))?;
        if !(rpr.is_finite() && rpr > 0.0) {
            return Err(Error::config(format!(
                "|R'PR| must be finite and > 0, got {rpr}"
            )));
        }
        Ok(Self {
            c,
            r,
            p,
            omega,
            l,
            q,
            rpr,
            p_eig: (c1, c2),
        })
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `|R'PR|`, the induced 2-norm of the symmetric p x p matrix `R'PR`.
    pub fn rpr(&self) -> f64 {
        self.rpr
    }

    /// Smallest and largest eigenvalues `(c1, c2)` of `P`.
    pub fn p_eigen_bounds(&self) -> (f64, f64) {
        self.p_eig
    }
}

/// `(lambda_min, lambda_max)` of a symmetric positive definite matrix.
pub fn positive_definite_bounds(p: &DMatrix<f64>) -> Result<(f64, f64)> {
    if p.nrows() != p.ncols() {
        return Err(Error::dim(
            "P",
            "square matrix",
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    crate::linalg::check_symmetric(p, 1e-12, "P")?;
    let eig = small_symmetric_eig(p)?;
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if !(lo > 0.0) {
        return Err(Error::config(format!(
            "P must be positive definite (smallest eigenvalue {lo})"
        )));
    }
    Ok((lo, hi))
}

/// The MASP formula on scalar constants; `+inf` when no restriction applies.
///
/// `rpr` is `|R'PR|`. The returned value is a strict supremum.
pub fn tmax_scalar(omega: f64, l: f64, rpr: f64, q: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::config(format!("omega must be > 0, got {omega}")));
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::config(format!("L must be >= 0, got {l}")));
    }
    if !(rpr.is_finite() && rpr >= 0.0) {
        return Err(Error::config(format!("|R'PR| must be >= 0, got {rpr}")));
    }
    if !q.is_finite() {
        return Err(Error::config(format!("q must be finite, got {q}")));
    }
    let beta = l * rpr.sqrt();
    if beta == 0.0 {
        return Ok(f64::INFINITY);
    }
    if q <= -beta / omega {
        return Ok(f64::INFINITY);
    }
    if q == 0.0 {
        return Ok(omega / beta);
    }
    Ok((omega * q / beta).ln_1p() / q)
}

pub fn tmax_linear(cert: &LinearCertificate) -> Result<f64> {
    tmax_scalar(cert.omega, cert.l, cert.rpr, cert.q)
}

/// Pointwise [`tmax_linear`] of a certificate family over a grid of `q`.
pub fn tmax_curve<F>(family: F, grid: &[f64]) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<LinearCertificate> + Sync,
{
    if grid.is_empty() {
        return Err(Error::config("q grid must not be empty"));
    }
    grid.par_iter()
        .map(|&q| Ok((q, tmax_linear(&family(q)?)?)))
        .collect()
}

/// `q,T_max` with `+inf` written as `inf`.
pub fn curve_csv(curve: &[(f64, f64)]) -> CsvTable {
    let mut table = CsvTable::new(["q", "T_max"]);
    for &(q, t) in curve {
        table.push(vec![fmt_f64(q), fmt_f64(t)]);
    }
    table
}

/// `points` equally spaced values covering `[lo, hi]` (one point when `lo == hi`).
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ if lo == hi => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        hi
                    } else {
                        lo + i as f64 * step
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QOptimum {
    pub q_star: f64,
    pub t_star: f64,
    /// Some grid point has `T_max = +inf`; `q_star` is the first such point.
    pub unbounded: bool,
}

/// Golden-section maximization of a unimodal `f` on `[a, b]` down to width `tol`.
fn golden_section_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    let best = [(mid, fm), (c, fc), (d, fd)]
        .into_iter()
        .fold(
            (mid, fm),
            |acc, cand| if cand.1 > acc.1 { cand } else { acc },
        );
    Ok(best)
}

/// Maximizes `T_max(q)` over `[lo, hi]`: a 101-point scan locates the best
/// cell, golden-section search refines it to width `tol`.
pub fn optimize_q<F>(family: F, lo: f64, hi: f64, tol: f64) -> Result<QOptimum>
where
    F: Fn(f64) -> Result<LinearCertificate> + Sync,
{
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::config(format!(
            "bracket must be finite with lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::config(format!("tol must be > 0, got {tol}")));
    }
    let grid = linspace(lo, hi, COARSE_POINTS);
    let curve = tmax_curve(&family, &grid)?;
    if let Some(&(q, t)) = curve.iter().find(|(_, t)| t.is_infinite()) {
        return Ok(QOptimum {
            q_star: q,
            t_star: t,
            unbounded: true,
        });
    }
    let best = (0..curve.len())
        .reduce(|i, j| if curve[j].1 > curve[i].1 { j } else { i })
        .expect("non-empty grid");
    let (grid_q, grid_t) = curve[best];
    if curve.len() == 1 {
        return Ok(QOptimum {
            q_star: grid_q,
            t_star: grid_t,
            unbounded: false,
        });
    }
    let a = curve[best.saturating_sub(1)].0;
    let b = curve[(best + 1).min(curve.len() - 1)].0;
    let (q, t) = golden_section_max(|q| tmax_linear(&family(q)?), a, b, tol)?;
    let (q_star, t_star) = if t >= grid_t {
        (q, t)
    } else {
        (grid_q, grid_t)
    };
    Ok(QOptimum {
        q_star,
        t_star,
        unbounded: false,
    })
}

/// Constants of the general IOS estimate for sampling diameter `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Result {
    /// Guaranteed decay rate `sigma` in `(0, omega]`.
    pub sigma: f64,
    /// `Omega = (1 - 2 gamma L int_0^T exp((2q + sigma)s) ds)^-1`.
    pub overshoot: f64,
    /// `gamma Omega exp(max(0, 2qT))`, never below `gamma`.
    pub noise_gain: f64,
}

/// Largest `sigma` in `(0, cap]` with `j(sigma) < 1 - SIGMA_MARGIN`, for
/// increasing `j`. `None` when even `sigma -> 0` fails.
fn largest_sigma<J>(j: J, cap: f64) -> Option<f64>
where
    J: Fn(f64) -> f64,
{
    let limit = 1.0 - SIGMA_MARGIN;
    if j(cap) < limit {
        return Some(cap);
    }
    if !(j(0.0) < limit) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > SIGMA_TOL {
        let mid = 0.5 * (lo + hi);
        if j(mid) < limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo > 0.0).then_some(lo)
}

pub fn theorem1_gain(cert: &IosCertificate, t: f64) -> Result<Theorem1Result> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::config(format!("T must be finite and >= 0, got {t}")));
    }
    let scale = 2.0 * cert.gamma * cert.l;
    let lhs = scale * exp_integral(2.0 * cert.q, t);
    if !(lhs < 1.0) {
        return Err(Error::MaspConditionFailed { lhs });
    }
    let j = |sigma: f64| scale * exp_integral(2.0 * cert.q + sigma, t);
    let sigma = largest_sigma(j, cert.omega).ok_or(Error::MaspConditionFailed { lhs })?;
    let overshoot = 1.0 / (1.0 - j(sigma));
    let noise_gain = cert.gamma * overshoot * (2.0 * cert.q * t).max(0.0).exp();
    Ok(Theorem1Result {
        sigma,
        overshoot,
        noise_gain,
    })
}

/// Constants of `|z(t) - x(t)| <= Omega exp(-sigma t)|z0 - x0| + gamma sup|xi|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Constants {
    /// Decay rate in `(0, omega/2)`.
    pub sigma: f64,
    /// `Omega = sqrt(c2/c1) D`.
    pub overshoot: f64,
    /// `gamma = D sqrt(|R'PR| / (omega (omega - 2 sigma))) exp(max(0, qT)) / sqrt(c1)`.
    pub noise_gain: f64,
    /// `D = (1 - L sqrt(|R'PR| / (omega (omega - 2 sigma))) int_0^T exp((q + sigma)s) ds)^-1`.
    pub small_gain: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Theorem2Constants {
    /// Right-hand side of the error estimate at time `t`.
    pub fn bound(&self, t: f64, initial_error: f64, noise_sup: f64) -> f64 {
        self.overshoot * (-self.sigma * t).exp() * initial_error + self.noise_gain * noise_sup
    }
}

/// The contraction condition `L^2 |R'PR| / (omega (omega - 2 sigma)) (int_0^T e^{(q+sigma)s} ds)^2`.
pub fn sigma_condition(cert: &LinearCertificate, t: f64, sigma: f64) -> f64 {
    let (omega, l, q) = (cert.omega, cert.l, cert.q);
    let integral = exp_integral(q + sigma, t);
    l * l * cert.rpr / (omega * (omega - 2.0 * sigma)) * integral * integral
}

pub fn theorem2_constants(cert: &LinearCertificate, t: f64) -> Result<Theorem2Constants> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::config(format!("T must be finite and >= 0, got {t}")));
    }
    let t_max = tmax_linear(cert)?;
    if !(t < t_max) {
        return Err(Error::MaspExceeded { t, t_max });
    }
    let omega = cert.omega;
    let cap = 0.5 * omega - SIGMA_TOL;
    let cap = if cap > 0.0 { cap } else { 0.25 * omega };
    let sigma = largest_sigma(|s| sigma_condition(cert, t, s), cap)
        .ok_or(Error::MaspExceeded { t, t_max })?;

    let k = (cert.rpr / (omega * (omega - 2.0 * sigma))).sqrt();
    let small_gain = 1.0 / (1.0 - cert.l * k * exp_integral(cert.q + sigma, t));
    let (c1, c2) = cert.p_eig;
    Ok(Theorem2Constants {
        sigma,
        overshoot: (c2 / c1).sqrt() * small_gain,
        noise_gain: small_gain * k * (cert.q * t).max(0.0).exp() / c1.sqrt(),
        small_gain,
        c1,
        c2,
    })
}

/// Outcome of deriving `(omega, L)` for a linear plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearCertification {
    Certified {
        omega: f64,
        l: f64,
    },
    /// The `P`-norm decay rate is not positive.
    Infeasible {
        omega: f64,
    },
}

/// Derives the tightest `(omega, L)` for `x' = Ax + Bu`, `y = Cx` with
/// observer gain `R`, Lyapunov matrix `P` and predictor constant `q`:
///
/// * `omega = -lambda_max(P(A-RC) + (A-RC)'P, P) / 2`
/// * `L^2 = lambda_max((A-qI)'C'C(A-qI), P)`
///
/// where `lambda_max(M, P)` is the largest generalized eigenvalue.
pub fn certify_linear(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: f64,
) -> Result<LinearCertification> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim(
            "A",
            format!("{n}x{n}"),
            format!("{}x{}", n, a.ncols()),
        ));
    }
    if p.shape() != (n, n) {
        return Err(Error::dim(
            "P",
            format!("{n}x{n}"),
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }
    if c.ncols() != n {
        return Err(Error::dim("C columns", n, c.ncols()));
    }
    if r.shape() != (n, c.nrows()) {
        return Err(Error::dim(
            "R",
            format!("{n}x{}", c.nrows()),
            format!("{}x{}", r.nrows(), r.ncols()),
        ));
    }
    if r.iter().all(|v| *v == 0.0) {
        return Err(Error::config("R must be non-zero"));
    }
    if !q.is_finite() {
        return Err(Error::config(format!("q must be finite, got {q}")));
    }
    cholesky_lower(p, "P")?;

    let closed = a - r * c;
    let lyap = p * &closed + closed.transpose() * p;
    let lyap = (&lyap + lyap.transpose()) * 0.5;
    let decay = generalized_symmetric_eig(&lyap, p)?;
    let omega = -0.5 * decay[decay.len() - 1];

    let shifted = c * (a - DMatrix::identity(n, n) * q);
    let coupling = shifted.transpose() * &shifted;
    let coupling_eig = generalized_symmetric_eig(&coupling, p)?;
    let l = coupling_eig[coupling_eig.len() - 1].max(0.0).sqrt();

    if omega > 0.0 {
        Ok(LinearCertification::Certified { omega, l })
    } else {
        Ok(LinearCertification::Infeasible { omega })
    }
}

/// Matrices of the harmonic-oscillator example:
/// `C = [1 0]`, `R = [2; 1]`, `P = [[1, -1/2], [-1/2, 1/2]]`, `A = [[0, 1], [-1, 0]]`.
pub fn oscillator_matrices() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[2.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 0.5]),
    )
}

/// `L(q) = sqrt(2 (1 + (1 - q)^2))` for the oscillator example.
pub fn oscillator_l(q: f64) -> f64 {
    (2.0 * (1.0 + (1.0 - q) * (1.0 - q))).sqrt()
}

/// Oscillator certificate with `omega = 1` and the analytic `L(q)`.
pub fn oscillator_certificate(q: f64) -> Result<LinearCertificate> {
    let (_, c, r, p) = oscillator_matrices();
    LinearCertificate::new(c, r, p, 1.0, oscillator_l(q), q)
}

/// Certificate for a linear plant with `(omega, L)` derived by [`certify_linear`].
pub fn derived_certificate(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: f64,
) -> Result<LinearCertificate> {
    match certify_linear(a, c, r, p, q)? {
        LinearCertification::Certified { omega, l } => {
            LinearCertificate::new(c.clone(), r.clone(), p.clone(), omega, l, q)
        }
        LinearCertification::Infeasible { omega } => Err(Error::config(format!(
            "certificate infeasible: P-norm decay rate omega = {omega} is not positive"
        ))),
    }
}
