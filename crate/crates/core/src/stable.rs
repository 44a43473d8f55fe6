//! Completely asymmetric stable laws and the closed-form constants that
//! normalise the hitting-time and local-time limits.
//!
//! Parameterisation throughout is `S_alpha(sigma, beta, mu)` with
//! characteristic function
//! `exp(-sigma^a |t|^a (1 - i beta sign(t) tan(pi a / 2)) + i mu t)` for
//! `a != 1` and `exp(-sigma |t| (1 + i beta (2/pi) sign(t) ln|t|) + i mu t)`
//! for `a = 1`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::positive;
use crate::{Error, Result};

/// Uniform draw on the open interval `(0, 1)`.
#[inline]
pub(crate) fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One draw of `S_kappa(1, 1, 0)`, `0 < kappa < 1`, by Chambers-Mallows-Stuck.
///
/// Its Laplace transform is `exp(-t^kappa / cos(pi kappa / 2))`.
pub fn sample_stable_ca<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::param("kappa", format!("must lie in (0, 1), got {kappa}")));
    }
    let v = PI * (open01(rng) - 0.5);
    let w: f64 = Exp1.sample(rng);
    let tan = (FRAC_PI_2 * kappa).tan();
    let b = tan.atan() / kappa;
    let s = (1.0 + tan * tan).powf(0.5 / kappa);
    let a = kappa * (v + b);
    let x = s * a.sin() / v.cos().powf(1.0 / kappa) * ((v - a).cos() / w).powf((1.0 - kappa) / kappa);
    // the law is supported on (0, inf); clamp rounding at the left edge
    Ok(x.max(f64::MIN_POSITIVE))
}

/// One draw of `S_1(8, 1, 0)`, the totally skewed Cauchy law with scale 8.
pub fn sample_cauchy8_ca<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let v = PI * (open01(rng) - 0.5);
    let w: f64 = Exp1.sample(rng);
    let hv = FRAC_PI_2 + v;
    let x = (hv * v.tan() - (FRAC_PI_2 * w * v.cos() / hv).ln()) / FRAC_PI_2;
    // S_1(sigma, 1, 0) = sigma X + (2/pi) sigma ln sigma for X ~ S_1(1, 1, 0)
    8.0 * x + (16.0 / PI) * 8f64.ln()
}

/// Laplace transform of `S_kappa(1, 1, 0)`.
pub fn stable_laplace(kappa: f64, t: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::param("kappa", format!("must lie in (0, 1), got {kappa}")));
    }
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be >= 0, got {t}")));
    }
    Ok((-t.powf(kappa) / (FRAC_PI_2 * kappa).cos()).exp())
}

/// CDF of `S_{1/2}(1, 1, 0)`, the Levy law with scale 1.
pub fn half_stable_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erfc((0.5 / x).sqrt())
    }
}

/// Which end of a bracket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

/// Normalising constants for a given `kappa`.
///
/// `c2` and `c22` only exist for `kappa < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBundle {
    pub kappa: f64,
    /// `4 (1 + kappa)`, the local-time level used by the Bessel identities.
    pub lambda: f64,
    /// `1 / (4 + 2 kappa)`, the base point of the Jacobi scale function.
    pub alpha_kappa: f64,
    pub psi: f64,
    pub c2: Option<f64>,
    pub c4: f64,
    pub c22: Option<f64>,
    pub delta1: f64,
    pub c5: f64,
}

/// `(pi k / (4 Gamma(k)^2 sin(pi k / 2)))^{1/k}`
pub fn psi(kappa: f64) -> f64 {
    let g = gamma(kappa);
    (PI * kappa / (4.0 * g * g * (FRAC_PI_2 * kappa).sin())).powf(1.0 / kappa)
}

/// Small-deviation constant of the weighted Bessel functional, `kappa < 1`.
pub fn c2(kappa: f64) -> Result<f64> {
    below_one(kappa)?;
    let g = gamma(kappa);
    let num = 8.0 * kappa * (PI * kappa).powf(1.0 / kappa) * (1.0 - kappa).powf((1.0 - kappa) / kappa);
    let den = (2.0 * g * g * (PI * kappa).sin()).powf(1.0 / kappa);
    Ok(num / den)
}

/// Left-tail constant of `S_kappa(1, 1, 0)`: `-x^{k/(1-k)} ln P(S < x) -> c22`.
pub fn c22(kappa: f64) -> Result<f64> {
    below_one(kappa)?;
    Ok((1.0 - kappa) * kappa.powf(kappa / (1.0 - kappa)) * (FRAC_PI_2 * kappa).cos().powf(-1.0 / (1.0 - kappa)))
}

fn below_one(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            "kappa",
            format!("constant defined only for 0 < kappa < 1, got {kappa}"),
        ))
    }
}

pub fn constants(kappa: f64, delta1: f64) -> Result<ConstantsBundle> {
    positive("kappa", kappa)?;
    positive("delta1", delta1)?;
    if kappa >= 2.0 {
        // psi involves sin(pi k / 2), which vanishes at k = 2
        return Err(Error::param("kappa", format!("must be < 2, got {kappa}")));
    }
    let lambda = 4.0 * (1.0 + kappa);
    let psi = psi(kappa);
    let c4 = 8.0 * psi * (lambda / kappa).powf(1.0 / kappa);
    let (c2, c22) = if kappa < 1.0 {
        (Some(c2(kappa)?), Some(c22(kappa)?))
    } else {
        (None, None)
    };
    Ok(ConstantsBundle {
        kappa,
        lambda,
        alpha_kappa: 1.0 / (4.0 + 2.0 * kappa),
        psi,
        c2,
        c4,
        c22,
        delta1,
        c5: 2.0 * (lambda / kappa).powf(delta1),
    })
}

impl ConstantsBundle {
    /// `1 +- c5 r^{-delta1}`
    pub fn psi_pm(&self, r: f64, side: Side) -> f64 {
        1.0 + side.sign() * self.c5 * r.powf(-self.delta1)
    }

    /// `kappa r / lambda`, the common limit of `t_+(r)/r` and `t_-(r)/r`.
    pub fn t0(&self, r: f64) -> f64 {
        self.kappa * r / self.lambda
    }
}

/// `t_+-(r) = kappa psi_+-(r) r / lambda`.
///
/// `t_-` is only positive once `r^{delta1} > c5`; below that it is an error.
pub fn t_pm(bundle: &ConstantsBundle, r: f64, side: Side) -> Result<f64> {
    positive("r", r)?;
    let t = bundle.kappa * bundle.psi_pm(r, side) * r / bundle.lambda;
    if t > 0.0 {
        Ok(t)
    } else {
        Err(Error::param(
            "r",
            format!(
                "t_-(r) <= 0: need r^delta1 > c5 = {} (r > {})",
                bundle.c5,
                bundle.c5.powf(1.0 / bundle.delta1)
            ),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn closed_form_constants() {
        let b = constants(1.0, 0.05).unwrap();
        assert_eq!(b.lambda, 8.0);
        assert!((b.alpha_kappa - 1.0 / 6.0).abs() < 1e-15);
        assert!(b.c2.is_none());
        let h = constants(0.5, 0.05).unwrap();
        assert!((h.psi - 1.0 / 32.0).abs() < 1e-14);
        assert!((h.c2.unwrap() - 0.125).abs() < 1e-14);
        assert!((h.c22.unwrap() - 0.5).abs() < 1e-14);
        assert!((h.c4 - 36.0).abs() < 1e-11);
        assert!((h.c5 - 2.0 * 12f64.powf(0.05)).abs() < 1e-14);
        assert!(c2(1.0).is_err());
        assert!(c22(1.5).is_err());
    }

    #[test]
    fn t_pm_sign_condition() {
        let b = constants(0.5, 0.05).unwrap();
        assert!(t_pm(&b, 100.0, Side::Minus).is_err());
        assert!(t_pm(&b, 100.0, Side::Plus).unwrap() > 0.0);
        let b = constants(0.5, 1.0).unwrap();
        let (lo, hi) = (
            t_pm(&b, 100.0, Side::Minus).unwrap(),
            t_pm(&b, 100.0, Side::Plus).unwrap(),
        );
        assert!(hi > lo && lo > 0.0);
        let r = 1e12;
        let b = constants(0.5, 0.05).unwrap();
        let gap = t_pm(&b, r, Side::Plus).unwrap() / r - b.kappa / b.lambda;
        assert!(gap.abs() / (b.kappa / b.lambda) <= 2.0 * b.c5 * 10f64.powf(-12.0 * 0.05));
    }

    #[test]
    fn laplace_examples() {
        assert_eq!(stable_laplace(0.5, 0.0).unwrap(), 1.0);
        assert!((stable_laplace(0.5, 1.0).unwrap() - (-(2f64.sqrt())).exp()).abs() < 1e-15);
        assert!((stable_laplace(0.5, 4.0).unwrap() - (-2.0 * 2f64.sqrt()).exp()).abs() < 1e-15);
        assert!(stable_laplace(1.0, 1.0).is_err());
    }

    #[test]
    fn levy_small_deviation_slope() {
        // -x ln P(S < x) -> c22(1/2) = 1/2 as x -> 0
        let x = 1e-3;
        let slope = -x * half_stable_cdf(x).ln();
        assert!((slope - 0.5).abs() < 5e-3, "{slope}");
    }

    #[test]
    fn stable_samples_positive() {
        let mut rng = Stream::new(3).rng();
        for &k in &[0.1, 0.5, 0.9] {
            for _ in 0..10_000 {
                assert!(sample_stable_ca(k, &mut rng).unwrap() > 0.0);
            }
        }
        assert!(sample_stable_ca(1.0, &mut rng).is_err());
    }
}
