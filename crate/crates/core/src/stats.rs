//! Hypothesis tests used to compare policies across a batch.

use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Beyond this `|z|` the normal tail is evaluated from its asymptotic series.
pub const TAIL_SWITCH: f64 = 8.0;
/// Variance floor for the Welch test.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    /// `(p̂2 − p̂1) / SE` with the pooled standard error.
    pub z: f64,
    /// One-sided p-value for `H_A: p1 < p2`.
    pub p_one_sided: f64,
    pub log10_p_one_sided: f64,
}

/// `log10 P(Z ≥ z)` for standard normal `Z`, accurate far into the tail.
pub fn log10_upper_tail(z: f64) -> f64 {
    if z > TAIL_SWITCH {
        // Q(z) = φ(z)/z · (1 − 1/z² + 3/z⁴ − 15/z⁶ + 105/z⁸ − …)
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)
            + 105.0 / (z2 * z2 * z2 * z2);
        let ln_q = -0.5 * z2 - 0.5 * (2.0 * PI).ln() - z.ln() + series.ln();
        ln_q / LN_10
    } else if z < -TAIL_SWITCH {
        (-(10f64.powf(log10_upper_tail(-z)))).ln_1p() / LN_10
    } else {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).log10()
    }
}

/// Pooled two-proportion z-test of `k1/n1` against `k2/n2`.
pub fn two_proportion_z_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<ZTest> {
    if n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2 {
        return Err(Error::InvalidArgument(format!(
            "invalid proportions {k1}/{n1}, {k2}/{n2}"
        )));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let p1 = k1 as f64 / n1f;
    let p2 = k2 as f64 / n2f;
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let z = if se > 0.0 { (p2 - p1) / se } else { 0.0 };
    let log10_p = log10_upper_tail(z);
    Ok(ZTest {
        z,
        p_one_sided: 10f64.powf(log10_p),
        log10_p_one_sided: log10_p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for `H_A: mean(a) < mean(b)`.
    pub p_less: f64,
    /// One-sided p-value for `H_A: mean(a) > mean(b)`.
    pub p_greater: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom. Each sample variance is floored at [`VARIANCE_FLOOR`].
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "Welch test needs at least 2 samples per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = sample_variance(a).max(VARIANCE_FLOOR) / na;
    let sb = sample_variance(b).max(VARIANCE_FLOOR) / nb;
    let t = (mean(a) - mean(b)) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    Ok(WelchTest {
        t,
        df,
        p_less: dist.cdf(t),
        p_greater: dist.sf(t),
    })
}
