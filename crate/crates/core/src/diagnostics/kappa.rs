//! Bootstrap check of the second Bartlett identity for the DT objective.

use crate::error::{Error, Result};
use crate::fit::{hessian_fd_in, score_fd_in};
use crate::likelihood::loglik_dt;
use crate::linalg::Matrix;
use crate::model::{CopulaModel, Dataset, ParamVector, Simulator};
use crate::parallel::{run_indexed, tree_sum};
use crate::rng::{Purpose, StreamKey};

/// Largest tolerated share of bootstrap replicates whose derivatives fail.
pub const MAX_DROP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct KappaResult {
    /// −mean bootstrap Hessian of ℓ_DT.
    pub j_hat: Matrix<f64>,
    /// Mean bootstrap outer product of the ℓ_DT score.
    pub v_hat: Matrix<f64>,
    pub kappa_hat: f64,
    /// Replicates that entered the averages.
    pub n_b: usize,
    pub dropped: usize,
    pub theta_used: ParamVector,
}

impl KappaResult {
    /// Replaces the bootstrap Ĵ by a supplied information matrix (natural
    /// scale), e.g. the observed information from a fit.
    pub fn with_information(mut self, j: Matrix<f64>) -> Result<Self> {
        if j.dim() != self.v_hat.dim() {
            return Err(Error::Dimension {
                expected: self.v_hat.dim(),
                got: j.dim(),
            });
        }
        self.kappa_hat = j.sub(&self.v_hat).frobenius_norm();
        self.j_hat = j;
        Ok(self)
    }
}

struct Replicate {
    outer: Matrix<f64>,
    neg_hessian: Matrix<f64>,
}

fn replicate_terms(model: &CopulaModel, theta: &[f64], data: &Dataset) -> Option<Replicate> {
    let f =
        |v: &[f64]| loglik_dt(model, data, &ParamVector::natural(v.to_vec())).unwrap_or(f64::NAN);
    let domain = |v: &[f64]| model.in_domain(v);
    let score = score_fd_in(f, theta, domain).values;
    let hess = hessian_fd_in(f, theta, domain).matrix;
    let p = theta.len();
    let outer = Matrix::from_fn(p, |i, j| score[i] * score[j]);
    let finite =
        (0..p).all(|i| (0..p).all(|j| outer[(i, j)].is_finite() && hess[(i, j)].is_finite()));
    finite.then(|| Replicate {
        outer,
        neg_hessian: hess.scale(-1.0),
    })
}

/// κ̂ = ‖Ĵ − V̂‖_F from `n_b` datasets simulated at θ. Replicate i draws from
/// stream (seed, Bootstrap, i), so the result is the same for every
/// `parallelism`.
pub fn kappa(
    model: &CopulaModel,
    theta: &ParamVector,
    n_b: usize,
    seed: u64,
    parallelism: usize,
) -> Result<KappaResult> {
    if n_b < 2 {
        return Err(Error::Domain(format!(
            "bootstrap count must be at least 2, got {n_b}"
        )));
    }
    let theta = model.as_natural(theta)?;
    if !model.in_domain(&theta.values) {
        return Err(Error::Domain(format!(
            "parameter {:?} outside the model domain",
            theta.values
        )));
    }
    let sim = Simulator::new(model, &theta)?;
    let reps = run_indexed(n_b, parallelism, |i| {
        let data = sim.draw(StreamKey::new(seed, Purpose::Bootstrap, i as u64));
        replicate_terms(model, &theta.values, &data)
    })?;
    let kept: Vec<Replicate> = reps.into_iter().flatten().collect();
    let dropped = n_b - kept.len();
    if dropped as f64 > MAX_DROP_FRACTION * n_b as f64 {
        return Err(Error::Numerical(format!(
            "{dropped} of {n_b} bootstrap replicates had non-finite derivatives"
        )));
    }
    let n = kept.len() as f64;
    let outers: Vec<_> = kept.iter().map(|r| r.outer.clone()).collect();
    let hessians: Vec<_> = kept.iter().map(|r| r.neg_hessian.clone()).collect();
    let add = |a: &Matrix<f64>, b: &Matrix<f64>| a.add(b);
    let p = theta.len();
    let v_hat = tree_sum(&outers, &add)
        .unwrap_or_else(|| Matrix::zeros(p))
        .scale(1.0 / n);
    let j_hat = tree_sum(&hessians, &add)
        .unwrap_or_else(|| Matrix::zeros(p))
        .scale(1.0 / n)
        .symmetrized();
    Ok(KappaResult {
        kappa_hat: j_hat.sub(&v_hat).frobenius_norm(),
        j_hat,
        v_hat,
        n_b: kept.len(),
        dropped,
        theta_used: theta,
    })
}

/// One κ̂ cell of a two-parameter design grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaCell {
    pub row_value: f64,
    pub col_value: f64,
    pub result: KappaResult,
}

/// κ̂ over a grid for a model with exactly one correlation and one marginal
/// parameter. Rows vary the marginal parameter, columns the correlation
/// parameter. Every cell uses the same seed, so cells share bootstrap streams.
pub fn kappa_grid(
    model: &CopulaModel,
    marginal_values: &[f64],
    correlation_values: &[f64],
    n_b: usize,
    seed: u64,
    parallelism: usize,
) -> Result<Vec<KappaCell>> {
    if model.n_params() != 2 || model.n_correlation_params() != 1 {
        return Err(Error::Domain(format!(
            "a kappa grid needs one correlation and one marginal parameter, the model has {:?}",
            model.layout()
        )));
    }
    if marginal_values.is_empty() || correlation_values.is_empty() {
        return Err(Error::Domain("kappa grid axes must be nonempty".into()));
    }
    let mut cells = Vec::with_capacity(marginal_values.len() * correlation_values.len());
    for &r in marginal_values {
        for &c in correlation_values {
            let theta = ParamVector::natural(vec![c, r]);
            cells.push(KappaCell {
                row_value: r,
                col_value: c,
                result: kappa(model, &theta, n_b, seed, parallelism)?,
            });
        }
    }
    Ok(cells)
}
