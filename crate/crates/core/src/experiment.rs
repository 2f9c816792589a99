//! Replicate studies: likelihood-ratio calibration and likelihood surfaces.

use crate::diagnostics::{
    fit_chisq_mle, fit_gamma_mle, krippendorff_alpha, ks_test_chisq, AlphaResult, ChisqFit,
    GammaFit, KsResult,
};
use crate::error::{Error, Result};
use crate::fit::{ce_objective, dt_objective, likelihood_ratio, mle_ce_with, mle_dt, FitResult};
use crate::likelihood::{loglik_ce, loglik_dt, JitterMatrix};
use crate::model::{CopulaModel, Dataset, ParamVector};
use crate::parallel::run_indexed;
use crate::rng::{Purpose, StreamKey};

pub const DEFAULT_SEED: u64 = 20240611;
/// Share of failed replicates above which a run counts as a numerical failure.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub dt: Option<FitSummary>,
    pub ce: Option<FitSummary>,
    pub error: Option<String>,
}

impl ReplicateOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none()
            && self.dt.as_ref().is_some_and(|f| f.converged)
            && self.ce.as_ref().is_some_and(|f| f.converged)
    }
}

/// Distributional checks on one sample of likelihood ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub ks: KsResult,
    /// Fits use the strictly positive ratios only.
    pub chisq: Option<ChisqFit>,
    pub gamma: Option<GammaFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrSummary {
    pub df: usize,
    pub used: usize,
    pub failed: usize,
    pub dt: RatioSummary,
    pub ce: RatioSummary,
    pub alpha: Option<AlphaResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrExperiment {
    pub outcomes: Vec<ReplicateOutcome>,
    pub summary: LrSummary,
}

impl LrExperiment {
    pub fn failure_fraction(&self) -> f64 {
        self.summary.failed as f64 / self.outcomes.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LrSettings {
    pub replicates: usize,
    pub jitters: usize,
    pub seed: u64,
    pub parallelism: usize,
    pub alpha_resamples: usize,
}

/// Λ at θ₀ for a fit; a negative ratio means the search stopped short, so the
/// fit is repeated from θ₀ and the better optimum kept.
fn ratio_with_retry(
    fit: FitResult,
    at_null: f64,
    refit: impl FnOnce() -> Result<FitResult>,
) -> Result<(FitResult, f64)> {
    match likelihood_ratio(fit.loglik_at_max, at_null) {
        Ok(l) => Ok((fit, l)),
        Err(_) => {
            let again = refit()?;
            let best = if again.loglik_at_max > fit.loglik_at_max {
                again
            } else {
                fit
            };
            let l = likelihood_ratio(best.loglik_at_max, at_null)?;
            Ok((best, l))
        }
    }
}

fn summarize(fit: &FitResult, lambda: f64) -> FitSummary {
    FitSummary {
        theta_hat: fit.theta_hat.values.clone(),
        loglik: fit.loglik_at_max,
        lambda,
        converged: fit.converged,
        iterations: fit.iterations,
    }
}

/// One replicate: simulate at θ₀, fit DT from moments, fit CE from θ̂_DT.
pub fn run_replicate(
    model: &CopulaModel,
    theta0: &ParamVector,
    jitters: usize,
    seed: u64,
    replicate: usize,
) -> ReplicateOutcome {
    let mut out = ReplicateOutcome {
        replicate,
        dt: None,
        ce: None,
        error: None,
    };
    let r = replicate as u64;
    let attempt = || -> Result<(FitSummary, FitSummary)> {
        let data = model.simulate(theta0, StreamKey::new(seed, Purpose::Simulate, r))?;
        let dt_null = dt_objective(model, &data)(theta0);
        let dt_fit = mle_dt(model, &data, None)?;
        let (dt_fit, dt_lambda) =
            ratio_with_retry(dt_fit, dt_null, || mle_dt(model, &data, Some(theta0)))?;
        let w =
            JitterMatrix::generate(jitters, model.n(), StreamKey::new(seed, Purpose::Jitter, r));
        let ce_null = ce_objective(model, &data, &w)(theta0);
        let ce_fit = mle_ce_with(model, &data, Some(&dt_fit.theta_hat), &w)?;
        let (ce_fit, ce_lambda) = ratio_with_retry(ce_fit, ce_null, || {
            mle_ce_with(model, &data, Some(theta0), &w)
        })?;
        Ok((summarize(&dt_fit, dt_lambda), summarize(&ce_fit, ce_lambda)))
    };
    match attempt() {
        Ok((dt, ce)) => {
            out.dt = Some(dt);
            out.ce = Some(ce);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

fn ratio_summary(lambdas: &[f64], df: f64) -> Result<RatioSummary> {
    let positive: Vec<f64> = lambdas.iter().copied().filter(|&l| l > 0.0).collect();
    Ok(RatioSummary {
        ks: ks_test_chisq(lambdas, df)?,
        chisq: fit_chisq_mle(&positive).ok(),
        gamma: fit_gamma_mle(&positive).ok(),
    })
}

pub fn summarize_ratios(
    outcomes: &[ReplicateOutcome],
    df: usize,
    alpha_resamples: usize,
    seed: u64,
) -> Result<LrSummary> {
    let good: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.ok()).collect();
    if good.is_empty() {
        return Err(Error::Numerical("every replicate failed".into()));
    }
    let dt: Vec<f64> = good
        .iter()
        .filter_map(|o| o.dt.as_ref().map(|f| f.lambda))
        .collect();
    let ce: Vec<f64> = good
        .iter()
        .filter_map(|o| o.ce.as_ref().map(|f| f.lambda))
        .collect();
    Ok(LrSummary {
        df,
        used: good.len(),
        failed: outcomes.len() - good.len(),
        dt: ratio_summary(&dt, df as f64)?,
        ce: ratio_summary(&ce, df as f64)?,
        alpha: krippendorff_alpha(&dt, &ce, alpha_resamples, seed).ok(),
    })
}

/// Simulate, fit both objectives and compare Λ_DT and Λ_CE with χ²(p).
pub fn lr_experiment(
    model: &CopulaModel,
    theta0: &ParamVector,
    s: &LrSettings,
) -> Result<LrExperiment> {
    if s.replicates == 0 || s.jitters == 0 {
        return Err(Error::Domain(
            "replicate and jitter counts must be positive".into(),
        ));
    }
    let theta0 = model.as_natural(theta0)?;
    if !model.in_domain(&theta0.values) {
        return Err(Error::Domain(format!(
            "θ₀ = {:?} is outside the model domain",
            theta0.values
        )));
    }
    let outcomes = run_indexed(s.replicates, s.parallelism, |r| {
        run_replicate(model, &theta0, s.jitters, s.seed, r)
    })?;
    let summary = summarize_ratios(&outcomes, model.n_params(), s.alpha_resamples, s.seed)?;
    Ok(LrExperiment { outcomes, summary })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.from],
            k => (0..k)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

/// Bounded parameters count as near their boundary inside this margin.
pub const BOUNDARY_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub first: f64,
    pub second: f64,
    pub loglik_dt: f64,
    pub loglik_ce: f64,
    pub near_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub names: [&'static str; 2],
    pub first_points: usize,
    pub second_points: usize,
    /// Row-major over (first, second).
    pub points: Vec<SurfacePoint>,
}

impl Surface {
    fn argmax(&self, pick: impl Fn(&SurfacePoint) -> f64) -> Option<(usize, usize)> {
        let (best, _) = self
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| pick(p).is_finite())
            .max_by(|a, b| pick(a.1).total_cmp(&pick(b.1)))?;
        Some((best / self.second_points, best % self.second_points))
    }

    pub fn argmax_dt(&self) -> Option<(usize, usize)> {
        self.argmax(|p| p.loglik_dt)
    }

    pub fn argmax_ce(&self) -> Option<(usize, usize)> {
        self.argmax(|p| p.loglik_ce)
    }
}

fn near_boundary(name: &str, v: f64) -> bool {
    match name {
        "rho" => v.abs() > 1.0 - BOUNDARY_MARGIN,
        "omega" | "p" => v < BOUNDARY_MARGIN || v > 1.0 - BOUNDARY_MARGIN,
        _ => v < BOUNDARY_MARGIN,
    }
}

/// ℓ_DT and ℓ_CE over a grid for a two-parameter model. Points where a value
/// is undefined hold NaN and are flagged.
pub fn likelihood_surface(
    model: &CopulaModel,
    data: &Dataset,
    first: Axis,
    second: Axis,
    jitters: &JitterMatrix<f64>,
    parallelism: usize,
) -> Result<Surface> {
    let layout = model.layout();
    if layout.len() != 2 {
        return Err(Error::Domain(format!(
            "a likelihood surface needs a two-parameter model, this one has {layout:?}"
        )));
    }
    model.check_data(data)?;
    let (xs, ys) = (first.values(), second.values());
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Domain(
            "surface axes must have at least one point".into(),
        ));
    }
    let names = [layout[0], layout[1]];
    let points = run_indexed(xs.len() * ys.len(), parallelism, |k| {
        let (a, b) = (xs[k / ys.len()], ys[k % ys.len()]);
        let theta = ParamVector::natural(vec![a, b]);
        let dt = loglik_dt(model, data, &theta).unwrap_or(f64::NAN);
        let ce = loglik_ce(model, data, &theta, jitters).unwrap_or(f64::NAN);
        SurfacePoint {
            first: a,
            second: b,
            loglik_dt: dt,
            loglik_ce: ce,
            near_boundary: near_boundary(names[0], a)
                || near_boundary(names[1], b)
                || !dt.is_finite()
                || !ce.is_finite(),
        }
    })?;
    Ok(Surface {
        names,
        first_points: xs.len(),
        second_points: ys.len(),
        points,
    })
}
