//! Maximum-likelihood fitting of the DT and CE objectives.
//!
//! The search runs Nelder–Mead on the unconstrained scale (atanh, logit, log).
//! Scores and Hessians for diagnostics are central differences on the natural
//! scale.

use std::fmt;

use crate::error::{Error, Result};
use crate::likelihood::{loglik_ce, loglik_dt, JitterMatrix};
use crate::linalg::Matrix;
use crate::model::{CopulaModel, Dataset, ParamVector};
use crate::rng::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when the spread of function values across the simplex falls below this.
    pub f_tol: f64,
    /// ...and every vertex lies within this distance (max norm) of the best one.
    pub x_tol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Extra runs started from the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-8,
            x_tol: 1e-6,
            max_iter: 2000,
            initial_step: 0.2,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Maximizes `f` by Nelder–Mead. Non-finite values count as −∞.
pub fn maximize(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> OptimizeResult {
    let mut evaluations = 0;
    let mut cost = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let mut best = x0.to_vec();
    let mut best_cost = cost(&best);
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..=opts.restarts {
        let run = nelder_mead_run(&mut cost, &best, best_cost, opts);
        iterations += run.iterations;
        converged = run.converged;
        if run.cost <= best_cost {
            best = run.x;
            best_cost = run.cost;
        }
    }
    OptimizeResult {
        x: best,
        value: -best_cost,
        converged: converged && best_cost.is_finite(),
        iterations,
        evaluations,
    }
}

struct Run {
    x: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn nelder_mead_run(
    cost: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    opts: &NelderMeadOptions,
) -> Run {
    let dim = x0.len();
    if dim == 0 {
        return Run {
            x: vec![],
            cost: f0,
            converged: true,
            iterations: 0,
        };
    }
    let mut simplex = vec![x0.to_vec()];
    let mut values = vec![f0];
    for i in 0..dim {
        // Shrink the step until the vertex is evaluable.
        let mut step = opts.initial_step;
        let mut tries = 0;
        loop {
            let mut p = x0.to_vec();
            p[i] += step;
            let v = cost(&p);
            if v.is_finite() || tries >= 30 {
                simplex.push(p);
                values.push(v);
                break;
            }
            step *= if tries % 2 == 0 { -1.0 } else { 0.5 };
            tries += 1;
        }
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (order[0], order[dim], order[dim - 1]);
        let size = order[1..]
            .iter()
            .flat_map(|&i| {
                simplex[i]
                    .iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max);
        if values[worst] - values[best] < opts.f_tol && size < opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; dim];
        for &idx in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = cost(&xr);
        if fr < values[best] {
            let xe = along(2.0);
            let fe = cost(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = along(0.5);
            let fc = cost(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = cost(&xc);
            (xc, fc)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            let p: Vec<f64> = anchor
                .iter()
                .zip(&simplex[idx])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            values[idx] = cost(&p);
            simplex[idx] = p;
        }
    }
    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Run {
        x: simplex[best].clone(),
        cost: values[best],
        converged,
        iterations,
    }
}

/// Finite-difference derivative with a flag for one-sided fallbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub values: Vec<f64>,
    /// Some coordinate had to use a forward/backward difference (error O(h)).
    pub one_sided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdHessian {
    pub matrix: Matrix<f64>,
    pub one_sided: bool,
}

pub const SCORE_REL_STEP: f64 = 1e-5;
pub const HESSIAN_REL_STEP: f64 = 1e-4;

fn step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut p = x.to_vec();
    for &(i, d) in moves {
        p[i] += d;
    }
    p
}

/// Central-difference gradient with steps 1e-5·max(|θ_j|, 1).
pub fn score_fd(f: impl Fn(&[f64]) -> f64, theta: &[f64]) -> FdGradient {
    score_fd_in(f, theta, |_| true)
}

/// [`score_fd`] falling back to one-sided differences where a step leaves `domain`.
pub fn score_fd_in(
    f: impl Fn(&[f64]) -> f64,
    theta: &[f64],
    domain: impl Fn(&[f64]) -> bool,
) -> FdGradient {
    let mut one_sided = false;
    let f0 = std::cell::OnceCell::new();
    let values = (0..theta.len())
        .map(|j| {
            let h = step(theta[j], SCORE_REL_STEP);
            let up = shifted(theta, &[(j, h)]);
            let down = shifted(theta, &[(j, -h)]);
            match (domain(&up), domain(&down)) {
                (true, true) => (f(&up) - f(&down)) / (2.0 * h),
                (true, false) => {
                    one_sided = true;
                    (f(&up) - *f0.get_or_init(|| f(theta))) / h
                }
                (false, true) => {
                    one_sided = true;
                    (*f0.get_or_init(|| f(theta)) - f(&down)) / h
                }
                (false, false) => f64::NAN,
            }
        })
        .collect();
    FdGradient { values, one_sided }
}

/// Central-difference Hessian with steps 1e-4·max(|θ_j|, 1), symmetrized.
pub fn hessian_fd(f: impl Fn(&[f64]) -> f64, theta: &[f64]) -> FdHessian {
    hessian_fd_in(f, theta, |_| true)
}

/// [`hessian_fd`] with forward/backward stencils for coordinates whose
/// central stencil leaves `domain`.
pub fn hessian_fd_in(
    f: impl Fn(&[f64]) -> f64,
    theta: &[f64],
    domain: impl Fn(&[f64]) -> bool,
) -> FdHessian {
    let p = theta.len();
    let h: Vec<f64> = theta.iter().map(|&x| step(x, HESSIAN_REL_STEP)).collect();
    // Direction per coordinate: 0 = central, ±1 = one-sided towards that sign.
    let dir: Vec<i8> = (0..p)
        .map(|j| {
            let up = domain(&shifted(theta, &[(j, h[j])]));
            let down = domain(&shifted(theta, &[(j, -h[j])]));
            match (up, down) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => -1,
                (false, false) => 0,
            }
        })
        .collect();
    let one_sided = dir.iter().any(|&d| d != 0);
    let f0 = f(theta);
    let mut m = Matrix::zeros(p);
    for i in 0..p {
        let hi = h[i];
        m[(i, i)] = if dir[i] == 0 {
            (f(&shifted(theta, &[(i, hi)])) - 2.0 * f0 + f(&shifted(theta, &[(i, -hi)])))
                / (hi * hi)
        } else {
            let s = dir[i] as f64 * hi;
            (f(&shifted(theta, &[(i, 2.0 * s)])) - 2.0 * f(&shifted(theta, &[(i, s)])) + f0)
                / (hi * hi)
        };
        for j in 0..i {
            let hj = h[j];
            let v = if dir[i] == 0 && dir[j] == 0 {
                (f(&shifted(theta, &[(i, hi), (j, hj)]))
                    - f(&shifted(theta, &[(i, hi), (j, -hj)]))
                    - f(&shifted(theta, &[(i, -hi), (j, hj)]))
                    + f(&shifted(theta, &[(i, -hi), (j, -hj)])))
                    / (4.0 * hi * hj)
            } else {
                let si = if dir[i] == 0 { hi } else { dir[i] as f64 * hi };
                let sj = if dir[j] == 0 { hj } else { dir[j] as f64 * hj };
                (f(&shifted(theta, &[(i, si), (j, sj)]))
                    - f(&shifted(theta, &[(i, si)]))
                    - f(&shifted(theta, &[(j, sj)]))
                    + f0)
                    / (si * sj)
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    FdHessian {
        matrix: m.symmetrized(),
        one_sided,
    }
}

/// Λ = 2{ℓ(θ̂) − ℓ(θ₀)}, clamped at zero. Differences below −1e-8 mean θ̂ is
/// not a maximum and are reported as errors.
pub fn likelihood_ratio(loglik_hat: f64, loglik_null: f64) -> Result<f64> {
    let lambda = 2.0 * (loglik_hat - loglik_null);
    if lambda.is_nan() {
        return Err(Error::Numerical("likelihood ratio is NaN".into()));
    }
    if lambda < -1e-8 {
        return Err(Error::Numerical(format!(
            "negative likelihood ratio {lambda:e}: the fitted value is not a maximum"
        )));
    }
    Ok(lambda.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Dt,
    Ce,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dt => "DT",
            Self::Ce => "CE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    pub loglik_at_max: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// −∇²ℓ at the optimum on the unconstrained scale.
    pub hessian_unconstrained: Matrix<f64>,
    pub objective_kind: ObjectiveKind,
}

impl FitResult {
    /// Standard errors on the natural scale by the delta method through the
    /// unconstrained-scale observed information. NaN where it is singular.
    pub fn natural_std_errors(&self, model: &CopulaModel) -> Vec<f64> {
        let p = self.theta_hat.len();
        let Ok(u) = model.to_unconstrained(&self.theta_hat) else {
            return vec![f64::NAN; p];
        };
        let Ok(l) = self.hessian_unconstrained.cholesky() else {
            return vec![f64::NAN; p];
        };
        (0..p)
            .map(|j| {
                let mut e = vec![0.0; p];
                e[j] = 1.0;
                // (H⁻¹)_jj = ‖L⁻¹ e_j‖²
                let v = l.forward_solve(&e);
                let var_u: f64 = v.iter().map(|x| x * x).sum();
                let h = 1e-6;
                let mut up = u.values.clone();
                up[j] += h;
                let mut dn = u.values.clone();
                dn[j] -= h;
                let jac = (model.unconstrained_to_natural(&up)[j]
                    - model.unconstrained_to_natural(&dn)[j])
                    / (2.0 * h);
                jac.abs() * var_u.sqrt()
            })
            .collect()
    }
}

/// Maximizes a natural-scale objective over the unconstrained scale.
pub fn optimize(
    model: &CopulaModel,
    objective: impl Fn(&ParamVector) -> f64,
    start: &ParamVector,
    opts: &NelderMeadOptions,
    kind: ObjectiveKind,
) -> Result<FitResult> {
    let u0 = model.to_unconstrained(start)?;
    let on_unconstrained = |u: &[f64]| {
        let nat = model.unconstrained_to_natural(u);
        if !model.in_domain(&nat) {
            return f64::NEG_INFINITY;
        }
        objective(&ParamVector::natural(nat))
    };
    if !on_unconstrained(&u0.values).is_finite() {
        return Err(Error::Numerical(
            "objective is not finite at the starting point".into(),
        ));
    }
    let res = maximize(on_unconstrained, &u0.values, opts);
    let curvature = hessian_fd(on_unconstrained, &res.x);
    Ok(FitResult {
        theta_hat: ParamVector::natural(model.unconstrained_to_natural(&res.x)),
        loglik_at_max: res.value,
        converged: res.converged,
        iterations: res.iterations,
        evaluations: res.evaluations,
        hessian_unconstrained: curvature.matrix.scale(-1.0),
        objective_kind: kind,
    })
}

/// DT log-likelihood as a total function of θ (−∞ where undefined).
pub fn dt_objective<'a>(
    model: &'a CopulaModel,
    data: &'a Dataset,
) -> impl Fn(&ParamVector) -> f64 + 'a {
    move |theta| loglik_dt(model, data, theta).unwrap_or(f64::NEG_INFINITY)
}

/// CE log-likelihood with fixed jitters as a total function of θ.
pub fn ce_objective<'a>(
    model: &'a CopulaModel,
    data: &'a Dataset,
    jitters: &'a JitterMatrix<f64>,
) -> impl Fn(&ParamVector) -> f64 + 'a {
    move |theta| loglik_ce(model, data, theta, jitters).unwrap_or(f64::NEG_INFINITY)
}

pub fn mle_dt(
    model: &CopulaModel,
    data: &Dataset,
    start: Option<&ParamVector>,
) -> Result<FitResult> {
    model.check_data(data)?;
    let start = match start {
        Some(s) => s.clone(),
        None => moment_start(model, data),
    };
    optimize(
        model,
        dt_objective(model, data),
        &start,
        &NelderMeadOptions::default(),
        ObjectiveKind::Dt,
    )
}

pub const DEFAULT_JITTERS: usize = 1000;

/// CE fit with one jitter matrix (m × n, from `key`) reused for every θ.
pub fn mle_ce(
    model: &CopulaModel,
    data: &Dataset,
    start: Option<&ParamVector>,
    m: usize,
    key: StreamKey,
) -> Result<(FitResult, JitterMatrix<f64>)> {
    model.check_data(data)?;
    let jitters = JitterMatrix::generate(m, model.n(), key);
    let fit = mle_ce_with(model, data, start, &jitters)?;
    Ok((fit, jitters))
}

pub fn mle_ce_with(
    model: &CopulaModel,
    data: &Dataset,
    start: Option<&ParamVector>,
    jitters: &JitterMatrix<f64>,
) -> Result<FitResult> {
    let start = match start {
        Some(s) => s.clone(),
        None => moment_start(model, data),
    };
    optimize(
        model,
        ce_objective(model, data, jitters),
        &start,
        &NelderMeadOptions::default(),
        ObjectiveKind::Ce,
    )
}

/// Method-of-moments starting point, clamped into the fitting domain.
pub fn moment_start(model: &CopulaModel, data: &Dataset) -> ParamVector {
    let y: Vec<f64> = data.y.iter().map(|&v| v as f64).collect();
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut values = Vec::with_capacity(model.n_params());
    for name in model.layout() {
        let v = match name {
            "rho" => {
                let lag: f64 = y
                    .windows(2)
                    .map(|w| (w[0] - mean) * (w[1] - mean))
                    .sum::<f64>()
                    / (n - 1.0).max(1.0);
                (if var > 0.0 { lag / var } else { 0.0 }).clamp(-0.95, 0.95)
            }
            "omega" => exchangeable_moment(model, &y, mean, var).clamp(0.01, 0.95),
            "lambda" | "mu" => mean.max(0.05),
            "k" => {
                if var > mean * 1.01 {
                    (mean * mean / (var - mean)).clamp(0.05, 1e4)
                } else {
                    100.0
                }
            }
            "p" => mean.clamp(0.01, 0.99),
            _ => 1.0,
        };
        values.push(v);
    }
    ParamVector::natural(values)
}

fn exchangeable_moment(model: &CopulaModel, y: &[f64], mean: f64, var: f64) -> f64 {
    let crate::correlation::CorrelationModel::ExchangeableBlocks { sizes, .. } =
        model.correlation_template()
    else {
        return 0.0;
    };
    if var <= 0.0 {
        return 0.0;
    }
    let mut start = 0;
    let mut cross = 0.0;
    let mut pairs = 0usize;
    for &m in sizes {
        let block = &y[start..(start + m).min(y.len())];
        start += m;
        for i in 0..block.len() {
            for j in 0..i {
                cross += (block[i] - mean) * (block[j] - mean);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        cross / (pairs as f64 * var)
    }
}
