//! Frozen-state eigenvalues of the super-twisting closed loop and their
//! discretization.
//!
//! For `s != 0` the closed loop is written as `x' = M(s) x` with
//! `x = [s, phi]` and
//!
//! ```text
//! M(s) = [ -k1 |s|^(alpha-1)   1 ]
//!        [ -k2 |s|^(-1)        0 ]
//! ```
//!
//! Exact matching places the eigenvalues of the discrete matrix
//! `Mq = [[u1, Ts], [u2, 1]]` at `exp(lambda * Ts)`:
//!
//! ```text
//! u1 = lq1 + lq2 - 1
//! u2 = (u1 - lq1 * lq2) / Ts
//! ```
//!
//! `u2` is the per-sample increment coefficient of the integral term
//! (`v' = v + u2 * s`); [`DiscreteCoeffs::integral_rate`] gives it per unit
//! time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance on the imaginary part left after combining `lq1`, `lq2`.
pub const IMAG_RESIDUE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizationError {
    #[error("M(s) is undefined at s = 0")]
    SingularState,
    #[error("discrete eigenvalues are not a conjugate or real pair (imaginary residue {residue:e})")]
    NonConjugate { residue: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Matching,
    Euler,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Matching => "matching",
            Scheme::Euler => "euler",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "matching" => Ok(Scheme::Matching),
            "euler" => Ok(Scheme::Euler),
            other => Err(format!("unknown scheme '{other}' (expected matching or euler)")),
        }
    }
}

/// Eigenvalues of `M(s)`; `lambda1` carries the non-negative imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub lambda1: Complex64,
    pub lambda2: Complex64,
}

impl EigenPair {
    pub fn is_complex(&self) -> bool {
        self.lambda1.im != 0.0
    }

    /// Roots of `lambda^2 + b lambda + c = 0`.
    ///
    /// Real roots use the cancellation-free form `q = -(b + sign(b) sqrt(D)) / 2`,
    /// `lambda1 = q`, `lambda2 = c / q`.
    pub fn from_monic(b: f64, c: f64) -> Self {
        let disc = b * b - 4.0 * c;
        if disc >= 0.0 {
            let root = disc.sqrt();
            let q = -0.5 * (b + root.copysign(b));
            let (l1, l2) = if q == 0.0 { (0.0, 0.0) } else { (q, c / q) };
            EigenPair {
                lambda1: Complex64::new(l1, 0.0),
                lambda2: Complex64::new(l2, 0.0),
            }
        } else {
            let re = -0.5 * b;
            let im = 0.5 * (-disc).sqrt();
            EigenPair {
                lambda1: Complex64::new(re, im),
                lambda2: Complex64::new(re, -im),
            }
        }
    }

    pub fn sum(&self) -> Complex64 {
        self.lambda1 + self.lambda2
    }

    pub fn product(&self) -> Complex64 {
        self.lambda1 * self.lambda2
    }
}

/// Matched (or Euler) coefficients of the discrete super-twisting law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCoeffs {
    pub u1_tilde: f64,
    pub u2_tilde: f64,
    /// `u1_tilde - 1`, kept separately because the matched route computes it
    /// without cancellation when `|lambda| Ts` is small.
    pub u1_excess: f64,
}

impl DiscreteCoeffs {
    /// Coefficients of the singular limit `s -> 0`, where `Mq` is the exact
    /// double-integrator step `[[1, Ts], [0, 1]]`.
    pub const IDENTITY: DiscreteCoeffs = DiscreteCoeffs {
        u1_tilde: 1.0,
        u2_tilde: 0.0,
        u1_excess: 0.0,
    };

    /// Integral gain per unit time, `u2_tilde / Ts`.
    pub fn integral_rate(&self, ts: f64) -> f64 {
        self.u2_tilde / ts
    }
}

/// Coefficients `(b, c)` of the characteristic polynomial of `M(s)`.
fn characteristic(k1: f64, k2: f64, s_abs: f64, alpha: f64) -> (f64, f64) {
    (k1 * s_abs.powf(alpha - 1.0), k2 / s_abs)
}

pub fn continuous_eigenvalues(
    k1: f64,
    k2: f64,
    s_abs: f64,
    alpha: f64,
) -> Result<EigenPair, DiscretizationError> {
    if !(s_abs > 0.0) {
        return Err(DiscretizationError::SingularState);
    }
    let (b, c) = characteristic(k1, k2, s_abs, alpha);
    Ok(EigenPair::from_monic(b, c))
}

/// `(exp(lambda1 Ts), exp(lambda2 Ts))`.
pub fn match_eigenvalues(pair: &EigenPair, ts: f64) -> (Complex64, Complex64) {
    let lq1 = (pair.lambda1 * ts).exp();
    if pair.is_complex() && pair.lambda2 == pair.lambda1.conj() {
        (lq1, lq1.conj())
    } else {
        (lq1, (pair.lambda2 * ts).exp())
    }
}

/// Coefficients from the discrete eigenvalues, straight from the defining
/// formulas.
pub fn discrete_coeffs(
    lq1: Complex64,
    lq2: Complex64,
    ts: f64,
) -> Result<DiscreteCoeffs, DiscretizationError> {
    let sum = lq1 + lq2;
    let prod = lq1 * lq2;
    let residue = (sum.im.abs() / sum.norm().max(1.0)).max(prod.im.abs() / prod.norm().max(1.0));
    if residue >= IMAG_RESIDUE_TOL || residue.is_nan() {
        return Err(DiscretizationError::NonConjugate { residue });
    }
    let u1_tilde = sum.re - 1.0;
    Ok(DiscreteCoeffs {
        u1_tilde,
        u2_tilde: (u1_tilde - prod.re) / ts,
        u1_excess: sum.re - 2.0,
    })
}

/// Matched coefficients computed directly from the continuous eigenvalues.
///
/// Algebraically identical to `discrete_coeffs(match_eigenvalues(pair))`, but
/// uses `expm1` so that `u1 - 1` and `u2` keep full relative precision when
/// `|lambda| Ts` is tiny.
pub fn matched_coeffs(pair: &EigenPair, ts: f64) -> DiscreteCoeffs {
    let (u1_excess, u2_ts) = if pair.is_complex() {
        // lambda = sigma +/- i omega:
        //   u1 - 1 = 2 (e^x cos y - 1)      = 2 (expm1(x) - 2 e^x sin^2(y/2))
        //   u2 Ts  = 2 e^x cos y - 1 - e^2x = -expm1(x)^2 - 4 e^x sin^2(y/2)
        let x = pair.lambda1.re * ts;
        let y = pair.lambda1.im * ts;
        let ex = x.exp();
        let em1 = x.exp_m1();
        let hs = (0.5 * y).sin();
        let hs2 = hs * hs;
        (2.0 * (em1 - 2.0 * ex * hs2), -em1 * em1 - 4.0 * ex * hs2)
    } else {
        // (e^a - 1) + (e^b - 1) and -(e^a - 1)(e^b - 1)
        let ea = (pair.lambda1.re * ts).exp_m1();
        let eb = (pair.lambda2.re * ts).exp_m1();
        (ea + eb, -ea * eb)
    };
    DiscreteCoeffs {
        u1_tilde: 1.0 + u1_excess,
        u2_tilde: u2_ts / ts,
        u1_excess,
    }
}

/// `[[u1, Ts], [u2, 1]]`.
pub fn assemble_mq(coeffs: &DiscreteCoeffs, ts: f64) -> [[f64; 2]; 2] {
    [[coeffs.u1_tilde, ts], [coeffs.u2_tilde, 1.0]]
}

/// Forward-Euler step matrix `I + Ts M(s)` written in the same coefficient
/// form: `u1 = 1 - Ts k1 |s|^(alpha-1)`, `u2 = -Ts k2 / |s|`.
pub fn euler_coeffs(
    k1: f64,
    k2: f64,
    s_abs: f64,
    alpha: f64,
    ts: f64,
) -> Result<DiscreteCoeffs, DiscretizationError> {
    if !(s_abs > 0.0) {
        return Err(DiscretizationError::SingularState);
    }
    let (b, c) = characteristic(k1, k2, s_abs, alpha);
    let u1_excess = -ts * b;
    Ok(DiscreteCoeffs {
        u1_tilde: 1.0 + u1_excess,
        u2_tilde: -ts * c,
        u1_excess,
    })
}
