//! Kernel and Gram matrix construction, extreme-eigenvalue computation, and
//! theoretical spectral bounds with pass/fail comparisons.

use crate::data::is_symmetric;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("matrix must be square and symmetric within 1e-12")]
    Asymmetric,
    #[error("kernel parameter out of range: {0}")]
    InvalidKernelParam(String),
    #[error("inner-product argument {0} outside [-1, 1] beyond tolerance")]
    ArccosDomain(f64),
    #[error("row {index} has norm {norm} (unit rows required)")]
    NonUnitRows { index: usize, norm: f64 },
    #[error("operation not implemented for kernel family `{0}`")]
    UnsupportedFamily(&'static str),
    #[error("series terms stopped decreasing; the spectral sum diverges for this dimension")]
    SeriesDiverges,
    #[error("series did not reach the requested tolerance within the iteration cap")]
    SeriesStalled,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("covariance factor is singular")]
    SingularSigma,
}

/// Kernel families. Radial kernels evaluate `rho(‖y − x‖)`; inner-product
/// kernels evaluate `rho(x' Sigma^2 y / d)`; the arc-cosine kernel evaluates
/// `rho(x' y)` directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `rho(r) = exp(-rho_param r^2)`, `rho_param > 0`.
    RbfGaussian { rho: f64 },
    /// `rho(r) = (rho_param + r^2)^{beta/2}` with `beta < -d`, `beta` not an
    /// even non-negative integer.
    RbfMultiquadric { rho: f64, beta: f64 },
    /// `rho(r) = r^beta`, integer `beta >= 2`; `sigma` defaults to identity.
    InnerPolynomial {
        beta: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<DMatrix<f64>>,
    },
    /// `rho(r) = r (pi - arccos r) / (2 pi)` on unit-norm inputs.
    NtkArccos,
}

impl KernelSpec {
    /// Parameter-range validation; `d` is the input dimension where it matters.
    pub fn validate(&self, d: usize) -> Result<(), SpectraError> {
        match self {
            KernelSpec::RbfGaussian { rho } => {
                if *rho <= 0.0 {
                    return Err(SpectraError::InvalidKernelParam(format!(
                        "gaussian rho must be positive, got {rho}"
                    )));
                }
            }
            KernelSpec::RbfMultiquadric { rho, beta } => {
                if *rho <= 0.0 {
                    return Err(SpectraError::InvalidKernelParam(format!(
                        "multiquadric rho must be positive, got {rho}"
                    )));
                }
                if *beta >= -(d as f64) {
                    return Err(SpectraError::InvalidKernelParam(format!(
                        "multiquadric beta must satisfy beta < -d, got beta={beta}, d={d}"
                    )));
                }
                if *beta >= 0.0 && *beta % 2.0 == 0.0 {
                    return Err(SpectraError::InvalidKernelParam(
                        "multiquadric beta must not be an even non-negative integer".into(),
                    ));
                }
            }
            KernelSpec::InnerPolynomial { beta, sigma } => {
                if *beta < 2 {
                    return Err(SpectraError::InvalidKernelParam(format!(
                        "polynomial beta must be an integer >= 2, got {beta}"
                    )));
                }
                if let Some(s) = sigma {
                    if s.nrows() != d || s.ncols() != d {
                        return Err(SpectraError::Shape(format!(
                            "sigma is {}x{}, expected {d}x{d}",
                            s.nrows(),
                            s.ncols()
                        )));
                    }
                }
            }
            KernelSpec::NtkArccos => {}
        }
        Ok(())
    }

    fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::RbfGaussian { .. } => "rbf-gaussian",
            KernelSpec::RbfMultiquadric { .. } => "rbf-multiquadric",
            KernelSpec::InnerPolynomial { .. } => "inner-polynomial",
            KernelSpec::NtkArccos => "ntk-arccos",
        }
    }

    /// The radial profile `rho(r)`; defined for the RBF families only.
    fn radial(&self, r: f64) -> Result<f64, SpectraError> {
        match self {
            KernelSpec::RbfGaussian { rho } => Ok((-rho * r * r).exp()),
            KernelSpec::RbfMultiquadric { rho, beta } => Ok((rho + r * r).powf(beta / 2.0)),
            other => Err(SpectraError::UnsupportedFamily(other.family_name())),
        }
    }
}

/// `rho(r) = r (pi - arccos r) / (2 pi)` with the argument clamped to
/// `[-1, 1]` within `1e-12`.
pub fn arccos_profile(r: f64) -> Result<f64, SpectraError> {
    if r.abs() > 1.0 + 1e-12 {
        return Err(SpectraError::ArccosDomain(r));
    }
    let r = r.clamp(-1.0, 1.0);
    Ok(r * (std::f64::consts::PI - r.acos()) / (2.0 * std::f64::consts::PI))
}

/// Extreme eigenvalues of a dense symmetric matrix.
pub fn gram_extremes(m: &DMatrix<f64>) -> Result<(f64, f64), SpectraError> {
    if !is_symmetric(m, 1e-12) {
        return Err(SpectraError::Asymmetric);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Operator norm of a symmetric matrix: largest absolute eigenvalue.
pub fn operator_norm(m: &DMatrix<f64>) -> Result<f64, SpectraError> {
    let (lo, hi) = gram_extremes(m)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Entrywise kernel matrix `K_ij = k(x_i, x_j)`, symmetric by construction.
pub fn kernel_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>, SpectraError> {
    let n = x.nrows();
    spec.validate(x.ncols())?;
    let mut k = DMatrix::zeros(n, n);
    match spec {
        KernelSpec::RbfGaussian { .. } | KernelSpec::RbfMultiquadric { .. } => {
            for i in 0..n {
                for j in i..n {
                    let r = if i == j {
                        0.0
                    } else {
                        (x.row(i) - x.row(j)).norm()
                    };
                    let v = spec.radial(r)?;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
        }
        KernelSpec::InnerPolynomial { beta, sigma } => {
            let d = x.ncols() as f64;
            let b = match sigma {
                Some(s) => x * s,
                None => x.clone(),
            };
            for i in 0..n {
                for j in i..n {
                    let v = (b.row(i).dot(&b.row(j)) / d).powi(*beta as i32);
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
        }
        KernelSpec::NtkArccos => {
            for i in 0..n {
                for j in i..n {
                    let v = arccos_profile(x.row(i).dot(&x.row(j)))?;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
        }
    }
    Ok(k)
}

/// Infinite-width tangent-kernel limit for a two-layer ReLU network on
/// unit-norm inputs: entry `x_i'x_j (pi - arccos(x_i'x_j)) / (2 pi)`.
///
/// Rows must have norm 1 within 1e-9; they are renormalized exactly before
/// the closed form is applied.
pub fn ntk_limit_matrix(x: &DMatrix<f64>) -> Result<DMatrix<f64>, SpectraError> {
    let mut unit = x.clone();
    for i in 0..x.nrows() {
        let norm = x.row(i).norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SpectraError::NonUnitRows { index: i, norm });
        }
        let scaled = x.row(i) / norm;
        unit.row_mut(i).copy_from(&scaled);
    }
    kernel_matrix(&KernelSpec::NtkArccos, &unit)
}

/// Upper bound on the largest kernel eigenvalue from the separation distance:
/// `rho(0) + 3 d sum_{t>=1} (t+2)^{d-1} rho(t SD)`, with a certified tail.
///
/// The partial sum stops once the current term and a certified remainder
/// estimate both fall below `truncation_tol` times the running sum; the
/// certified remainder is added to the result so the return value stays an
/// upper bound. Gaussian tails are certified geometrically (the term ratio is
/// decreasing); multiquadric tails by integral comparison, since their term
/// ratios increase toward 1 and a geometric majorant fails there.
pub fn rbf_lambda_max_bound(
    spec: &KernelSpec,
    d: usize,
    sd: f64,
    truncation_tol: f64,
) -> Result<f64, SpectraError> {
    spec.validate(d)?;
    if sd <= 0.0 {
        return Err(SpectraError::InvalidKernelParam(format!(
            "separation distance must be positive, got {sd}"
        )));
    }
    let dd = d as f64;
    let term = |t: f64| -> Result<f64, SpectraError> {
        Ok(3.0 * dd * (t + 2.0).powf(dd - 1.0) * spec.radial(t * sd)?)
    };
    let tail_certificate = |t: f64, current: f64| -> Result<f64, SpectraError> {
        match spec {
            KernelSpec::RbfGaussian { rho } => {
                // Both ratio factors decrease in t, so the ratio at t majorizes
                // every later ratio.
                let ratio =
                    ((t + 3.0) / (t + 2.0)).powf(dd - 1.0) * (-rho * sd * sd * (2.0 * t + 1.0)).exp();
                if ratio >= 1.0 {
                    Ok(f64::INFINITY)
                } else {
                    Ok(current * ratio / (1.0 - ratio))
                }
            }
            KernelSpec::RbfMultiquadric { beta, .. } => {
                // terms <= 3d 3^{d-1} sd^beta u^{d-1+beta} for u >= 1; integrate.
                let p = dd - 1.0 + beta;
                if p >= -1.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(3.0 * dd * 3.0f64.powf(dd - 1.0) * sd.powf(*beta) * t.powf(p + 1.0) / (-(p + 1.0)))
            }
            other => Err(SpectraError::UnsupportedFamily(other.family_name())),
        }
    };

    let mut sum = spec.radial(0.0)?;
    let mut prev = f64::INFINITY;
    let mut non_decreasing_streak = 0usize;
    let mut t = 1.0f64;
    for _ in 0..1_000_000 {
        let a = term(t)?;
        sum += a;
        if a >= prev && a > 0.0 {
            non_decreasing_streak += 1;
            if non_decreasing_streak >= 8 {
                return Err(SpectraError::SeriesDiverges);
            }
        } else {
            non_decreasing_streak = 0;
        }
        let tail = tail_certificate(t, a)?;
        if a < truncation_tol * sum && tail < truncation_tol * sum {
            return Ok(sum + tail);
        }
        prev = a;
        t += 1.0;
    }
    Err(SpectraError::SeriesStalled)
}

/// `M_d = 6.38 d` and `C_d = (1 / (2 Gamma(d/2 + 1))) (M_d / 2^{3/2})^d`,
/// the constants entering the smallest-eigenvalue bound.
pub fn min_eig_constants(d: usize) -> (f64, f64) {
    let dd = d as f64;
    let m_d = 6.38 * dd;
    let ln_c = -(2.0f64).ln() - ln_gamma(dd / 2.0 + 1.0) + dd * (m_d / 2.0f64.powf(1.5)).ln();
    (m_d, ln_c.exp())
}

/// Lower bound on the smallest kernel eigenvalue for the Gaussian RBF:
/// `C_d rho_hat_inf(M_d / SD) SD^{-d}`, using the closed-form Fourier
/// transform `rho_hat(w) = (2 rho)^{-d/2} exp(-‖w‖^2 / (4 rho))` so that
/// `inf_{‖w‖ <= 2M} rho_hat(w) = (2 rho)^{-d/2} exp(-M^2 / rho)`.
pub fn rbf_lambda_min_bound(spec: &KernelSpec, d: usize, sd: f64) -> Result<f64, SpectraError> {
    let rho = match spec {
        KernelSpec::RbfGaussian { rho } => *rho,
        other => return Err(SpectraError::UnsupportedFamily(other.family_name())),
    };
    spec.validate(d)?;
    if sd <= 0.0 {
        return Err(SpectraError::InvalidKernelParam(format!(
            "separation distance must be positive, got {sd}"
        )));
    }
    let dd = d as f64;
    let (m_d, _) = min_eig_constants(d);
    let m = m_d / sd;
    // Assemble in log space; exp may underflow to 0 for large d, which is
    // still a valid (vacuous) lower bound.
    let ln_c = -(2.0f64).ln() - ln_gamma(dd / 2.0 + 1.0) + dd * (m_d / 2.0f64.powf(1.5)).ln();
    let ln_rho0 = -(dd / 2.0) * (2.0 * rho).ln() - m * m / rho;
    Ok((ln_c + ln_rho0 - dd * sd.ln()).exp())
}

/// Outcome of comparing a kernel matrix against its degree-2 linearization.
#[derive(Debug, Clone, Serialize)]
pub struct KlinComparison {
    pub deviation: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Builds `k_lin = (rho(0) + rho''(0)/d) 11' + rho'(0) X Sigma^2 X' / d +
/// (rho(1) - rho(0) - rho'(0)) I` for the inner-product polynomial family
/// and compares `‖K - k_lin‖` against `d^{-1/2} (delta^{-1/2} + ln^{0.51} d)`.
///
/// The general formula keeps the `rho(0)` rank-one coefficient even though
/// the polynomial family has `rho(0) = 0`, which zeroes that contribution.
pub fn klin_comparison(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    delta: f64,
) -> Result<KlinComparison, SpectraError> {
    let (beta, sigma) = match spec {
        KernelSpec::InnerPolynomial { beta, sigma } => (*beta, sigma),
        other => return Err(SpectraError::UnsupportedFamily(other.family_name())),
    };
    spec.validate(x.ncols())?;
    let n = x.nrows();
    let d = x.ncols() as f64;
    // rho(r) = r^beta: rho(0) = 0, rho'(0) = 0 for beta >= 2,
    // rho''(0) = 2 iff beta == 2, rho(1) = 1.
    let rho0 = 0.0;
    let rho1p = 0.0;
    let rho2p = if beta == 2 { 2.0 } else { 0.0 };
    let rho_at_1 = 1.0;

    let k = kernel_matrix(spec, x)?;
    let b = match sigma {
        Some(s) => x * s,
        None => x.clone(),
    };
    let ones = DMatrix::from_element(n, n, 1.0);
    let klin = ones * (rho0 + rho2p / d)
        + (&b * b.transpose()) * (rho1p / d)
        + DMatrix::identity(n, n) * (rho_at_1 - rho0 - rho1p);

    let deviation = operator_norm(&(k - klin))?;
    let bound = d.powf(-0.5) * (delta.powf(-0.5) + d.ln().powf(0.51));
    Ok(KlinComparison {
        deviation,
        bound,
        holds: deviation <= bound,
    })
}

/// Eigenvalue transfer between `X X'` and `X Sigma Sigma' X'`.
#[derive(Debug, Clone, Serialize)]
pub struct EigTransfer {
    pub xxt_min: f64,
    pub xxt_max: f64,
    pub xsst_min: f64,
    pub xsst_max: f64,
    pub sst_min: f64,
    pub sst_max: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
    /// Set when `X` is rank deficient, making the lower inequality vacuous.
    pub lower_vacuous: bool,
}

/// Checks `lambda_max(XX') <= lambda_max(X SS' X') / lambda_min(SS')` and
/// `lambda_min(XX') >= lambda_min(X SS' X') / lambda_max(SS')`.
pub fn eig_transfer(x: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<EigTransfer, SpectraError> {
    if sigma.nrows() != x.ncols() || sigma.ncols() != x.ncols() {
        return Err(SpectraError::Shape(format!(
            "sigma is {}x{}, expected {}x{}",
            sigma.nrows(),
            sigma.ncols(),
            x.ncols(),
            x.ncols()
        )));
    }
    let sst = sigma * sigma.transpose();
    let (sst_min, sst_max) = gram_extremes(&sst)?;
    if sst_min <= 0.0 {
        return Err(SpectraError::SingularSigma);
    }
    let xxt = x * x.transpose();
    let (xxt_min, xxt_max) = gram_extremes(&xxt)?;
    let b = x * sigma;
    let xsst = &b * b.transpose();
    let (xsst_min, xsst_max) = gram_extremes(&xsst)?;

    let upper_bound = xsst_max / sst_min;
    let lower_bound = xsst_min / sst_max;
    let tol_u = 1e-9 * upper_bound.abs().max(1.0);
    let tol_l = 1e-9 * lower_bound.abs().max(1.0);
    Ok(EigTransfer {
        xxt_min,
        xxt_max,
        xsst_min,
        xsst_max,
        sst_min,
        sst_max,
        upper_holds: xxt_max <= upper_bound + tol_u,
        lower_holds: xxt_min >= lower_bound - tol_l,
        lower_vacuous: xxt_min <= 1e-10 * xxt_max.abs().max(1.0),
    })
}

/// One spectral bound check, ready for JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub bound_name: String,
    pub bound_value: f64,
    pub holds: bool,
    pub slack: f64,
}

impl SpectralReport {
    /// Report for an upper bound on `lambda_max`.
    pub fn upper(name: &str, bound_value: f64, lambda_min: f64, lambda_max: f64) -> Self {
        let tol = 1e-9 * bound_value.abs().max(1.0);
        SpectralReport {
            lambda_min,
            lambda_max,
            bound_name: name.to_string(),
            bound_value,
            holds: bound_value >= lambda_max - tol,
            slack: bound_value - lambda_max,
        }
    }

    /// Report for a lower bound on `lambda_min`.
    pub fn lower(name: &str, bound_value: f64, lambda_min: f64, lambda_max: f64) -> Self {
        let tol = 1e-9 * bound_value.abs().max(1.0);
        SpectralReport {
            lambda_min,
            lambda_max,
            bound_name: name.to_string(),
            bound_value,
            holds: bound_value <= lambda_min + tol,
            slack: lambda_min - bound_value,
        }
    }
}
