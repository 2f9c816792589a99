//! Discrete marginal families on the nonnegative integers.
//!
//! Besides the pmf/cdf/quantile triple each family exposes the two
//! probability-integral devices the copula likelihoods need: the midpoint
//! `{F(y−1) + F(y)}/2` and the continued cdf `F*(y) = F(⌊y⌋) + (y − ⌊y⌋) f(⌊y⌋ + 1)`
//! of `Y − W` with `W` standard uniform.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text::SpecText;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal<T = f64> {
    Poisson {
        rate: T,
    },
    /// Mean/dispersion parameterization: variance = mean + mean² / dispersion.
    NegBinomial {
        mean: T,
        dispersion: T,
    },
    Bernoulli {
        p: T,
    },
}

impl<T: Scalar> Marginal<T> {
    pub fn poisson(rate: T) -> Result<Self> {
        Self::Poisson { rate }.validated()
    }

    pub fn neg_binomial(mean: T, dispersion: T) -> Result<Self> {
        Self::NegBinomial { mean, dispersion }.validated()
    }

    pub fn bernoulli(p: T) -> Result<Self> {
        Self::Bernoulli { p }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Poisson { rate } => rate > T::zero() && rate.is_finite(),
            Self::NegBinomial { mean, dispersion } => {
                mean > T::zero()
                    && dispersion > T::zero()
                    && mean.is_finite()
                    && dispersion.is_finite()
            }
            Self::Bernoulli { p } => p > T::zero() && p < T::one(),
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::domain(format!(
                "invalid marginal parameters: {self}"
            )))
        }
    }

    /// Parameter names in packing order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Self::Poisson { .. } => &["lambda"],
            Self::NegBinomial { .. } => &["mu", "k"],
            Self::Bernoulli { .. } => &["p"],
        }
    }

    pub fn params(&self) -> Vec<T> {
        match *self {
            Self::Poisson { rate } => vec![rate],
            Self::NegBinomial { mean, dispersion } => vec![mean, dispersion],
            Self::Bernoulli { p } => vec![p],
        }
    }

    /// Same family with new parameter values (packing order of [`Self::params`]).
    pub fn with_params(&self, values: &[T]) -> Result<Self> {
        let expected = self.param_names().len();
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        match self {
            Self::Poisson { .. } => Self::poisson(values[0]),
            Self::NegBinomial { .. } => Self::neg_binomial(values[0], values[1]),
            Self::Bernoulli { .. } => Self::bernoulli(values[0]),
        }
    }

    pub fn mean(&self) -> T {
        match *self {
            Self::Poisson { rate } => rate,
            Self::NegBinomial { mean, .. } => mean,
            Self::Bernoulli { p } => p,
        }
    }

    pub fn variance(&self) -> T {
        match *self {
            Self::Poisson { rate } => rate,
            Self::NegBinomial { mean, dispersion } => mean + mean * mean / dispersion,
            Self::Bernoulli { p } => p * (T::one() - p),
        }
    }

    fn in_support(&self, y: i64) -> bool {
        match self {
            Self::Bernoulli { .. } => y == 0 || y == 1,
            _ => y >= 0,
        }
    }

    /// log f(y); −∞ outside the support.
    pub fn ln_pmf(&self, y: i64) -> T {
        if !self.in_support(y) {
            return T::neg_infinity();
        }
        let yt = T::from_i64(y).expect("count representable");
        match *self {
            Self::Poisson { rate } => yt * rate.ln() - rate - (yt + T::one()).ln_gamma(),
            Self::NegBinomial {
                mean,
                dispersion: k,
            } => {
                let denom = (k + mean).ln();
                (yt + k).ln_gamma() - k.ln_gamma() - (yt + T::one()).ln_gamma()
                    + k * (k.ln() - denom)
                    + yt * (mean.ln() - denom)
            }
            Self::Bernoulli { p } => {
                if y == 1 {
                    p.ln()
                } else {
                    (T::one() - p).ln()
                }
            }
        }
    }

    pub fn pmf(&self, y: i64) -> T {
        if !self.in_support(y) {
            return T::zero();
        }
        self.ln_pmf(y).exp()
    }

    /// f(y + 1) / f(y).
    fn pmf_ratio(&self, y: i64) -> T {
        let yt = T::from_i64(y).expect("count representable");
        match *self {
            Self::Poisson { rate } => rate / (yt + T::one()),
            Self::NegBinomial {
                mean,
                dispersion: k,
            } => (yt + k) / (yt + T::one()) * (mean / (k + mean)),
            Self::Bernoulli { p } => {
                if y == 0 {
                    p / (T::one() - p)
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Σ_{t ≥ from} f(t), summed forward until the terms are negligible.
    fn tail_from(&self, from: i64) -> T {
        let from = from.max(0);
        let mut term = self.pmf(from);
        let mut sum = T::zero();
        let mut t = from;
        let tiny = T::epsilon() * T::of(1e-3);
        for _ in 0..10_000_000 {
            if term == T::zero() && t > from {
                break;
            }
            sum = sum + term;
            let r = self.pmf_ratio(t);
            term = term * r;
            t += 1;
            if r < T::one() && term <= sum * tiny {
                break;
            }
        }
        sum
    }

    /// Σ_{t ≤ y} f(t) accumulated forward from zero.
    fn head_through(&self, y: i64) -> T {
        (0..=y).map(|t| self.pmf(t)).sum()
    }

    /// F(y). Switches to `1 − S(y)` once the forward sum passes one half.
    pub fn cdf(&self, y: i64) -> T {
        if y < 0 {
            return T::zero();
        }
        let head = self.head_through(y);
        if head > T::of(0.5) {
            T::one() - self.tail_from(y + 1)
        } else {
            head
        }
    }

    /// Survival function S(y) = 1 − F(y), computed without cancellation.
    pub fn sf(&self, y: i64) -> T {
        if y < 0 {
            return T::one();
        }
        let head = self.head_through(y);
        if head > T::of(0.5) {
            self.tail_from(y + 1)
        } else {
            T::one() - head
        }
    }

    /// Generalized inverse min{y : F(y) ≥ u} for u in (0, 1).
    pub fn quantile(&self, u: T) -> Result<i64> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::domain(format!(
                "quantile requires u in (0,1), got {u}"
            )));
        }
        if let Self::Bernoulli { p } = *self {
            return Ok(if u <= T::one() - p { 0 } else { 1 });
        }
        let covers = |y: i64| self.cdf(y) >= u;
        let mut lo: i64 = -1;
        let mut hi: i64 = self.mean().ceil().to_i64().unwrap_or(1).max(1);
        let mut doublings = 0;
        while !covers(hi) {
            lo = hi;
            hi = hi.saturating_mul(2);
            doublings += 1;
            if doublings > 62 {
                return Err(Error::Numerical(format!(
                    "quantile search diverged at u={u}"
                )));
            }
        }
        // Invariant: F(lo) < u ≤ F(hi).
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if covers(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Midpoint {F(y−1) + F(y)}/2 of the jump at y.
    pub fn dt_midpoint(&self, y: i64) -> Result<T> {
        Ok(self.dt_midpoint_tails(y)?.0)
    }

    /// The midpoint and its complement, each computed from its own tail.
    pub fn dt_midpoint_tails(&self, y: i64) -> Result<(T, T)> {
        if self.pmf(y) <= T::zero() {
            return Err(Error::domain(format!(
                "no probability mass at y={y} under {self}"
            )));
        }
        let two = T::of(2.0);
        let lower = (self.cdf(y - 1) + self.cdf(y)) / two;
        let upper = (self.sf(y - 1) + self.sf(y)) / two;
        Ok((lower, upper))
    }

    /// Continued cdf F*(y) = F(⌊y⌋) + (y − ⌊y⌋) f(⌊y⌋ + 1) for y > −1.
    pub fn continued_cdf(&self, y: T) -> Result<T> {
        if !(y > -T::one()) || !y.is_finite() {
            return Err(Error::domain(format!(
                "continued cdf requires y > -1, got {y}"
            )));
        }
        let fl = y.floor();
        let frac = y - fl;
        let k = fl.to_i64().expect("finite floor");
        Ok(self.cdf(k) + frac * self.pmf(k + 1))
    }

    /// Tabulates f, F and S on 0..=y_max.
    pub fn table(&self, y_max: i64) -> CdfTable<T> {
        CdfTable::new(self, y_max.max(0))
    }

    /// Table extended until the upper tail mass drops below `tail_eps`.
    pub fn support_table(&self, tail_eps: T) -> CdfTable<T> {
        let mut y_max = (self.mean() + T::of(10.0) * self.variance().sqrt())
            .ceil()
            .to_i64()
            .unwrap_or(16)
            .max(1);
        loop {
            let table = self.table(y_max);
            if table.sf(y_max) < tail_eps || y_max > (1 << 40) {
                return table;
            }
            y_max *= 2;
        }
    }
}

/// f, F and S tabulated on 0..=y_max for repeated lookups at fixed parameters.
#[derive(Debug, Clone)]
pub struct CdfTable<T = f64> {
    marginal: Marginal<T>,
    pmf: Vec<T>,
    cdf: Vec<T>,
    sf: Vec<T>,
}

impl<T: Scalar> CdfTable<T> {
    fn new(marginal: &Marginal<T>, y_max: i64) -> Self {
        let len = y_max as usize + 1;
        let pmf: Vec<T> = (0..len as i64).map(|t| marginal.pmf(t)).collect();
        let mut cdf = Vec::with_capacity(len);
        let mut acc = T::zero();
        for &p in &pmf {
            acc = acc + p;
            cdf.push(acc);
        }
        let mut sf = vec![T::zero(); len];
        let mut tail = marginal.tail_from(y_max + 1);
        for t in (0..len).rev() {
            sf[t] = tail;
            tail = tail + pmf[t];
        }
        Self {
            marginal: *marginal,
            pmf,
            cdf,
            sf,
        }
    }

    pub fn y_max(&self) -> i64 {
        self.pmf.len() as i64 - 1
    }

    pub fn pmf(&self, y: i64) -> T {
        match usize::try_from(y) {
            Ok(i) if i < self.pmf.len() => self.pmf[i],
            _ => self.marginal.pmf(y),
        }
    }

    pub fn cdf(&self, y: i64) -> T {
        if y < 0 {
            return T::zero();
        }
        match usize::try_from(y) {
            Ok(i) if i < self.cdf.len() => {
                if self.cdf[i] > T::of(0.5) {
                    T::one() - self.sf[i]
                } else {
                    self.cdf[i]
                }
            }
            _ => self.marginal.cdf(y),
        }
    }

    pub fn sf(&self, y: i64) -> T {
        if y < 0 {
            return T::one();
        }
        match usize::try_from(y) {
            Ok(i) if i < self.sf.len() => self.sf[i],
            _ => self.marginal.sf(y),
        }
    }

    /// min{y : F(y) ≥ u} given both u and 1 − u, searching on the smaller tail.
    pub fn quantile_tails(&self, u: T, one_minus_u: T) -> i64 {
        let idx = if u <= one_minus_u {
            self.cdf.partition_point(|&c| c < u)
        } else {
            self.sf.partition_point(|&s| s > one_minus_u)
        };
        if idx < self.cdf.len() {
            idx as i64
        } else {
            self.marginal
                .quantile(u.min(T::one() - T::epsilon()))
                .unwrap_or(self.y_max())
        }
    }
}

impl<T: Scalar> fmt::Display for Marginal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Poisson { rate } => write!(f, "poisson{{lambda={rate:?}}}"),
            Self::NegBinomial { mean, dispersion } => {
                write!(f, "negbinomial{{mu={mean:?},k={dispersion:?}}}")
            }
            Self::Bernoulli { p } => write!(f, "bernoulli{{p={p:?}}}"),
        }
    }
}

impl<T: Scalar> FromStr for Marginal<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = SpecText::parse(s)?;
        let m = match spec.family.as_str() {
            "poisson" => {
                spec.only(&["lambda"], s)?;
                Self::poisson(T::of(spec.real("lambda", s)?))
            }
            "negbinomial" | "negative_binomial" | "nb" => {
                spec.only(&["mu", "k"], s)?;
                Self::neg_binomial(T::of(spec.real("mu", s)?), T::of(spec.real("k", s)?))
            }
            "bernoulli" => {
                spec.only(&["p"], s)?;
                Self::bernoulli(T::of(spec.real("p", s)?))
            }
            other => {
                return Err(Error::parse(
                    s,
                    format!("unknown marginal family `{other}`"),
                ))
            }
        };
        m.map_err(|e| Error::parse(s, e.to_string()))
    }
}
