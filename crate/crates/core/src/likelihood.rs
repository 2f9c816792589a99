//! The three objective functions for discrete-margin Gaussian copulas.
//!
//! * DT: the copula density evaluated at the jump midpoints
//!   `U_i = {F(Y_i − 1) + F(Y_i)}/2`, times Π f(Y_i).
//! * CE: the Monte Carlo average over jitter rows `W_j` of the copula density
//!   at `F*(Y_i − W_{j,i})`, times Π f(Y_i). All of it in log space.
//! * Exact: the rectangle probability P(Z ∈ Π (Φ⁻¹F(Y_i − 1), Φ⁻¹F(Y_i)]),
//!   plus the literal 2ⁿ inclusion–exclusion sum for very small n.
//!
//! The kernels are generic over [`Scalar`]; the wrappers taking a
//! [`CopulaModel`] and a [`ParamVector`] are f64.

use rand::Rng;

use crate::correlation::CorrelationModel;
use crate::error::{Error, Result};
use crate::marginals::{CdfTable, Marginal};
use crate::model::{CopulaModel, Dataset, ParamVector};
use crate::mvn::{rectangle_prob, RectangleOptions, MAX_RECTANGLE_DIM};
use crate::rng::{Purpose, StreamKey};
use crate::scalar::Scalar;
use crate::special::{log_sum_exp, probit_from_tails};

/// Copula arguments are kept at least this far from 0 and 1.
pub const COPULA_CLAMP: f64 = 1e-15;

/// Largest n for which the 2ⁿ alternating sum is offered.
pub const MAX_ALTERNATING_DIM: usize = 6;

/// m × n standard-uniform jitters, strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct JitterMatrix<T = f64> {
    w: Vec<T>,
    m: usize,
    n: usize,
    key: Option<StreamKey>,
}

impl<T: Scalar> JitterMatrix<T> {
    pub fn generate(m: usize, n: usize, key: StreamKey) -> Self {
        let mut rng = key.rng();
        let w = (0..m * n)
            .map(|_| loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break T::of(u);
                }
            })
            .collect();
        Self {
            w,
            m,
            n,
            key: Some(key),
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut w = Vec::with_capacity(m * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            for &x in row {
                if !(x > T::zero() && x < T::one()) {
                    return Err(Error::domain(format!("jitter {x} outside (0,1)")));
                }
                w.push(x);
            }
        }
        Ok(Self { w, m, n, key: None })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The stream the matrix was generated from, if any.
    pub fn key(&self) -> Option<StreamKey> {
        self.key
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.w[j * self.n..(j + 1) * self.n]
    }
}

/// −½ log|Ω| − ½ zᵀ(Ω⁻¹ − I)z: the log Gaussian copula density at Φ(z).
pub fn gauss_copula_core<T: Scalar>(corr: &CorrelationModel<T>, z: &[T]) -> Result<T> {
    let half = T::of(0.5);
    Ok(-half * corr.log_det() - half * corr.quad_form_excess(z)?)
}

fn table_for<T: Scalar>(marg: &Marginal<T>, y: &[i64]) -> Result<CdfTable<T>> {
    if let Some(&bad) = y.iter().find(|&&v| marg.pmf(v) <= T::zero()) {
        return Err(Error::domain(format!(
            "observation {bad} has zero mass under {marg}"
        )));
    }
    Ok(marg.table(y.iter().copied().max().unwrap_or(0)))
}

fn sum_ln_pmf<T: Scalar>(table: &CdfTable<T>, y: &[i64]) -> T {
    y.iter().map(|&v| table.pmf(v).ln()).sum()
}

/// DT scores Z_i = Φ⁻¹(midpoint of the jump at Y_i), clamped.
pub fn dt_scores<T: Scalar>(marg: &Marginal<T>, y: &[i64]) -> Result<Vec<T>> {
    let table = table_for(marg, y)?;
    Ok(dt_scores_from(&table, y))
}

fn dt_scores_from<T: Scalar>(table: &CdfTable<T>, y: &[i64]) -> Vec<T> {
    let two = T::of(2.0);
    let eps = T::of(COPULA_CLAMP);
    y.iter()
        .map(|&v| {
            let lower = (table.cdf(v - 1) + table.cdf(v)) / two;
            let upper = (table.sf(v - 1) + table.sf(v)) / two;
            probit_from_tails(lower.max(eps), upper.max(eps))
        })
        .collect()
}

/// DT log-likelihood: copula core at the midpoint scores plus Σ log f(Y_i).
pub fn dt_loglik<T: Scalar>(
    corr: &CorrelationModel<T>,
    marg: &Marginal<T>,
    y: &[i64],
) -> Result<T> {
    if y.len() != corr.dim() {
        return Err(Error::Dimension {
            expected: corr.dim(),
            got: y.len(),
        });
    }
    let table = table_for(marg, y)?;
    let z = dt_scores_from(&table, y);
    Ok(gauss_copula_core(corr, &z)? + sum_ln_pmf(&table, y))
}

/// Per-jitter exponents −½ Q_j together with the jitter-free part
/// −½ log|Ω| + Σ log f(Y_i).
fn ce_parts<T: Scalar>(
    corr: &CorrelationModel<T>,
    marg: &Marginal<T>,
    y: &[i64],
    jitters: &JitterMatrix<T>,
) -> Result<(T, Vec<T>)> {
    let n = corr.dim();
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    if jitters.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: jitters.n(),
        });
    }
    let table = table_for(marg, y)?;
    // F*(Y − W) = F(Y − 1) + (1 − W) f(Y);  1 − F*(Y − W) = S(Y) + W f(Y).
    let below: Vec<T> = y.iter().map(|&v| table.cdf(v - 1)).collect();
    let above: Vec<T> = y.iter().map(|&v| table.sf(v)).collect();
    let mass: Vec<T> = y.iter().map(|&v| table.pmf(v)).collect();
    let eps = T::of(COPULA_CLAMP);
    let half = T::of(0.5);
    let mut z = vec![T::zero(); n];
    let exponents = (0..jitters.m())
        .map(|j| {
            let w = jitters.row(j);
            for i in 0..n {
                let lower = below[i] + (T::one() - w[i]) * mass[i];
                let upper = above[i] + w[i] * mass[i];
                z[i] = probit_from_tails(lower.max(eps), upper.max(eps));
            }
            -half * corr.quad_form_excess_unchecked(&z)
        })
        .collect();
    let fixed = -half * corr.log_det() + sum_ln_pmf(&table, y);
    Ok((fixed, exponents))
}

/// CE log-likelihood with common random numbers `jitters`.
pub fn ce_loglik<T: Scalar>(
    corr: &CorrelationModel<T>,
    marg: &Marginal<T>,
    y: &[i64],
    jitters: &JitterMatrix<T>,
) -> Result<T> {
    if jitters.m() == 0 {
        return Err(Error::domain("CE likelihood needs at least one jitter row"));
    }
    let (fixed, exponents) = ce_parts(corr, marg, y, jitters)?;
    // Grouped so the jitter average contributes exactly 0 when all exponents are 0.
    Ok(fixed + (log_sum_exp(&exponents) - T::of_usize(jitters.m()).ln()))
}

/// Delta-method standard error of the CE log-likelihood: sd(terms)/(√m · mean(terms)).
pub fn ce_log_std_error<T: Scalar>(
    corr: &CorrelationModel<T>,
    marg: &Marginal<T>,
    y: &[i64],
    jitters: &JitterMatrix<T>,
) -> Result<T> {
    let m = jitters.m();
    if m < 2 {
        return Err(Error::domain(
            "CE standard error needs at least two jitter rows",
        ));
    }
    let (_, exponents) = ce_parts(corr, marg, y, jitters)?;
    let max = exponents.iter().copied().fold(T::neg_infinity(), T::max);
    let scaled: Vec<T> = exponents.iter().map(|&e| (e - max).exp()).collect();
    let mf = T::of_usize(m);
    let mean = scaled.iter().copied().sum::<T>() / mf;
    let var = scaled.iter().map(|&t| (t - mean) * (t - mean)).sum::<T>() / (mf - T::one());
    Ok(var.sqrt() / (mf.sqrt() * mean))
}

fn parts(
    model: &CopulaModel,
    data: &Dataset,
    theta: &ParamVector,
) -> Result<(CorrelationModel<f64>, Marginal<f64>)> {
    if data.len() != model.n() {
        return Err(Error::Dimension {
            expected: model.n(),
            got: data.len(),
        });
    }
    Ok((model.correlation_at(theta)?, model.marginal_at(theta)?))
}

/// DT log-likelihood ℓ_DT(θ | Y).
pub fn loglik_dt(model: &CopulaModel, data: &Dataset, theta: &ParamVector) -> Result<f64> {
    let (c, m) = parts(model, data, theta)?;
    dt_loglik(&c, &m, &data.y)
}

/// CE log-likelihood ℓ_CE(θ | Y) for a fixed jitter matrix.
pub fn loglik_ce(
    model: &CopulaModel,
    data: &Dataset,
    theta: &ParamVector,
    jitters: &JitterMatrix<f64>,
) -> Result<f64> {
    let (c, m) = parts(model, data, theta)?;
    ce_loglik(&c, &m, &data.y, jitters)
}

/// Standard error of [`loglik_ce`] on the log scale.
pub fn ce_std_error(
    model: &CopulaModel,
    data: &Dataset,
    theta: &ParamVector,
    jitters: &JitterMatrix<f64>,
) -> Result<f64> {
    let (c, m) = parts(model, data, theta)?;
    ce_log_std_error(&c, &m, &data.y, jitters)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactLoglik {
    pub loglik: f64,
    /// Standard error of `loglik` (delta method from the probability scale).
    pub std_error: f64,
    pub probability: f64,
    pub probability_se: f64,
}

impl ExactLoglik {
    fn from_probability(p: f64, se: f64) -> Self {
        Self {
            loglik: p.ln(),
            std_error: if p > 0.0 { se / p } else { f64::INFINITY },
            probability: p,
            probability_se: se,
        }
    }
}

/// Probit bounds (Φ⁻¹F(Y_i − 1), Φ⁻¹F(Y_i)] of the exact likelihood rectangle.
pub fn rectangle_bounds(marg: &Marginal<f64>, y: &[i64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let table = table_for(marg, y)?;
    let lower = y
        .iter()
        .map(|&v| probit_from_tails(table.cdf(v - 1), table.sf(v - 1)))
        .collect();
    let upper = y
        .iter()
        .map(|&v| probit_from_tails(table.cdf(v), table.sf(v)))
        .collect();
    Ok((lower, upper))
}

/// Exact log-likelihood through one Genz rectangle probability. n ≤ 25.
pub fn loglik_exact(
    model: &CopulaModel,
    data: &Dataset,
    theta: &ParamVector,
    opts: &RectangleOptions,
    key: StreamKey,
) -> Result<ExactLoglik> {
    if data.len() > MAX_RECTANGLE_DIM {
        return Err(Error::TooLarge(format!(
            "exact likelihood limited to n <= {MAX_RECTANGLE_DIM} (got {}); use the CE or DT objective",
            data.len()
        )));
    }
    let (c, m) = parts(model, data, theta)?;
    let (lower, upper) = rectangle_bounds(&m, &data.y)?;
    let r = rectangle_prob(&c, &lower, &upper, opts, key)?;
    Ok(ExactLoglik::from_probability(r.estimate, r.standard_error))
}

/// The likelihood as the literal signed sum of 2ⁿ copula cdf values
/// C(U_{1j₁}, …, U_{nj_n}), U_{i0} = F(Y_i), U_{i1} = F(Y_i − 1). n ≤ 6.
pub fn loglik_alternating_sum(
    model: &CopulaModel,
    data: &Dataset,
    theta: &ParamVector,
    opts: &RectangleOptions,
    key: StreamKey,
) -> Result<ExactLoglik> {
    let n = data.len();
    if n > MAX_ALTERNATING_DIM {
        return Err(Error::TooLarge(format!(
            "alternating sum limited to n <= {MAX_ALTERNATING_DIM}, got {n}"
        )));
    }
    let (c, m) = parts(model, data, theta)?;
    let (lower, upper) = rectangle_bounds(&m, &data.y)?;
    let mut total = 0.0;
    let mut var = 0.0;
    for mask in 0u64..(1 << n) {
        let corner: Vec<f64> = (0..n)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    lower[i]
                } else {
                    upper[i]
                }
            })
            .collect();
        if corner.iter().any(|&b| b == f64::NEG_INFINITY) {
            continue;
        }
        let r = rectangle_prob(
            &c,
            &vec![f64::NEG_INFINITY; n],
            &corner,
            opts,
            key.child(Purpose::Rectangle, mask),
        )?;
        let sign = if mask.count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        total += sign * r.estimate;
        var += r.standard_error * r.standard_error;
    }
    Ok(ExactLoglik::from_probability(total, var.sqrt()))
}
