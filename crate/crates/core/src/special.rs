//! Scalar Gaussian functions and log-space helpers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf<T: Scalar>(x: T) -> T {
    (-(x * x) / T::of(2.0)).exp() / (T::TAU()).sqrt()
}

/// Standard normal cdf Φ(x), accurate in both tails.
#[inline]
pub fn std_normal_cdf<T: Scalar>(x: T) -> T {
    T::of(0.5) * (-x * T::FRAC_1_SQRT_2()).erfc()
}

/// Upper tail 1 − Φ(x) without cancellation.
#[inline]
pub fn std_normal_sf<T: Scalar>(x: T) -> T {
    std_normal_cdf(-x)
}

/// log Φ(x). Stays finite far into the lower tail where Φ itself underflows.
pub fn std_normal_log_cdf<T: Scalar>(x: T) -> T {
    if x > T::of(-20.0) {
        return std_normal_cdf(x).ln();
    }
    // Mills-ratio asymptotic series; at |x| >= 20 the truncation error is < 1e-13.
    let x2 = x * x;
    let inv = T::one() / x2;
    let series = T::one() - inv + T::of(3.0) * inv * inv - T::of(15.0) * inv * inv * inv
        + T::of(105.0) * inv * inv * inv * inv;
    -x2 / T::of(2.0) - T::of(0.5) * T::TAU().ln() - (-x).ln() + series.ln()
}

/// Standard normal quantile Φ⁻¹(p) for p in (0, 1).
pub fn std_normal_quantile<T: Scalar>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain(format!(
            "normal quantile requires p in (0,1), got {p}"
        )));
    }
    Ok(probit(p))
}

/// Φ⁻¹ extended to the closed interval: 0 ↦ −∞, 1 ↦ +∞. NaN for anything else.
///
/// Wichura's AS241 (PPND16) rational approximations, relative accuracy about 1e-16.
pub fn probit<T: Scalar>(p: T) -> T {
    if p.is_nan() || p < T::zero() || p > T::one() {
        return T::nan();
    }
    if p == T::zero() {
        return T::neg_infinity();
    }
    if p == T::one() {
        return T::infinity();
    }
    let q = p - T::of(0.5);
    if q.abs() <= T::of(0.425) {
        let r = T::of(0.180625) - q * q;
        return q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r);
    }
    let tail = if q < T::zero() { p } else { T::one() - p };
    tail_probit(tail, q < T::zero())
}

/// Φ⁻¹ evaluated from whichever tail mass is smaller, which keeps full
/// precision when the upper-tail mass `1 − p` is known directly.
///
/// `lower` and `upper` must satisfy lower + upper = 1 in exact arithmetic.
pub fn probit_from_tails<T: Scalar>(lower: T, upper: T) -> T {
    if lower <= upper {
        if (lower - T::of(0.5)).abs() <= T::of(0.425) {
            probit(lower)
        } else {
            tail_probit(lower, true)
        }
    } else if (upper - T::of(0.5)).abs() <= T::of(0.425) {
        -probit(upper)
    } else {
        tail_probit(upper, false)
    }
}

fn tail_probit<T: Scalar>(tail: T, negative: bool) -> T {
    if tail <= T::zero() {
        return if negative {
            T::neg_infinity()
        } else {
            T::infinity()
        };
    }
    let r = (-tail.ln()).sqrt();
    let x = if r <= T::of(5.0) {
        let r = r - T::of(1.6);
        horner(&INTERMEDIATE_NUM, r) / horner(&INTERMEDIATE_DEN, r)
    } else {
        let r = r - T::of(5.0);
        horner(&FAR_NUM, r) / horner(&FAR_DEN, r)
    };
    if negative {
        -x
    } else {
        x
    }
}

/// Polynomial with coefficients ordered from highest degree down.
#[inline]
fn horner<T: Scalar>(coeffs: &[f64], x: T) -> T {
    coeffs.iter().fold(T::zero(), |acc, &c| acc * x + T::of(c))
}

// AS241 coefficient tables, highest degree first.
#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const CENTRAL_NUM: [f64; 8] = [
    2.50908_09287_30122_6727e+3, 3.34305_75583_58812_8105e+4, 6.72657_70927_00870_0853e+4,
    4.59219_53931_54987_1457e+4, 1.37316_93765_50946_1125e+4, 1.97159_09503_06551_4427e+3,
    1.33141_66789_17843_7745e+2, 3.38713_28727_96366_6080e+0,
];
#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const CENTRAL_DEN: [f64; 8] = [
    5.22649_52788_52854_5610e+3, 2.87290_85735_72194_2674e+4, 3.93078_95800_09271_0610e+4,
    2.12137_94301_58659_5867e+4, 5.39419_60214_24751_1077e+3, 6.87187_00749_20579_0830e+2,
    4.23133_30701_60091_1252e+1, 1.0,
];
#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const INTERMEDIATE_NUM: [f64; 8] = [
    7.74545_01427_83414_07640e-4, 2.27238_44989_26918_45833e-2, 2.41780_72517_74506_11770e-1,
    1.27045_82524_52368_38258e+0, 3.64784_83247_63204_60504e+0, 5.76949_72214_60691_40550e+0,
    4.63033_78461_56545_29590e+0, 1.42343_71107_49683_57734e+0,
];
#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const INTERMEDIATE_DEN: [f64; 8] = [
    1.05075_00716_44416_84324e-9, 5.47593_80849_95344_94600e-4, 1.51986_66563_61645_71966e-2,
    1.48103_97642_74800_74590e-1, 6.89767_33498_51000_04550e-1, 1.67638_48301_83803_84940e+0,
    2.05319_16266_37758_82187e+0, 1.0,
];
#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const FAR_NUM: [f64; 8] = [
    2.01033_43992_92288_13265e-7, 2.71155_55687_43487_57815e-5, 1.24266_09473_88078_43860e-3,
    2.65321_89526_57612_30930e-2, 2.96560_57182_85048_91230e-1, 1.78482_65399_17291_33580e+0,
    5.46378_49111_64114_36990e+0, 6.65790_46435_01103_77720e+0,
];
#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const FAR_DEN: [f64; 8] = [
    2.04426_31033_89939_78564e-15, 1.42151_17583_16445_88870e-7, 1.84631_83175_10054_68180e-5,
    7.86869_13114_56132_59100e-4, 1.48753_61290_85061_48525e-2, 1.36929_88092_27358_05310e-1,
    5.99832_20655_58879_37690e-1, 1.0,
];

/// Clamps a copula argument into [eps, 1 − eps].
#[inline]
pub fn clamp_unit<T: Scalar>(u: T, eps: T) -> T {
    u.max(eps).min(T::one() - eps)
}

/// log Σ exp(xᵢ), computed around the maximum. Empty input gives −∞.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}
