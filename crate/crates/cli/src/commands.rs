use std::path::Path;

use anyhow::{bail, Context, Result};
use dgcopula::diagnostics::{kappa as run_kappa, kappa_grid as run_kappa_grid};
use dgcopula::experiment::{
    likelihood_surface, lr_experiment as run_lr, Axis, LrSettings, MAX_FAILURE_FRACTION,
};
use dgcopula::fit::{ce_objective, dt_objective, likelihood_ratio, mle_ce, mle_dt, FitResult};
use dgcopula::likelihood::JitterMatrix;
use dgcopula::{Dataset, Purpose, StreamKey};

use crate::config::ExperimentConfig;
use crate::output::{num, sibling, Csv};

const ALPHA_RESAMPLES: usize = 1000;

/// Failure of the numerics rather than of the invocation.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<dgcopula::Error>() {
            return match e {
                dgcopula::Error::Numerical(_)
                | dgcopula::Error::NoConvergence(_)
                | dgcopula::Error::NotPositiveDefinite { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn read_data(cfg: &ExperimentConfig, path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read data {}", path.display()))?;
    let data = Dataset::from_csv(&text).with_context(|| format!("in data {}", path.display()))?;
    cfg.model.check_data(&data)?;
    Ok(data)
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(format!("data={}\n", String::from_utf8_lossy(&bytes)))
}

fn fit_header(cfg: &ExperimentConfig) -> Vec<String> {
    let mut h = vec!["replicate".to_string(), "objective".to_string()];
    h.extend(cfg.model.layout().iter().map(|s| s.to_string()));
    h.extend(["loglik", "lr", "converged", "iterations"].map(String::from));
    h
}

fn fit_row(
    replicate: usize,
    kind: &str,
    theta: &[f64],
    loglik: f64,
    lambda: f64,
    converged: bool,
    iterations: usize,
) -> Vec<String> {
    let mut r = vec![replicate.to_string(), kind.to_string()];
    r.extend(theta.iter().map(|&v| num(v)));
    r.extend([
        num(loglik),
        num(lambda),
        converged.to_string(),
        iterations.to_string(),
    ]);
    r
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let dir = cfg
        .out
        .as_deref()
        .context("simulate needs --out DIRECTORY")?;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let theta = cfg.theta0();
    let width = cfg.replicates.saturating_sub(1).to_string().len().max(4);
    for r in 0..cfg.replicates {
        let data = cfg.model.simulate(
            &theta,
            StreamKey::new(cfg.seed, Purpose::Simulate, r as u64),
        )?;
        let mut csv = Csv::new("simulate", cfg, "");
        csv.comment(&format!("replicate: {r}"));
        let body = data.to_csv();
        let mut text = csv.into_string();
        text.push_str(&body);
        let path = dir.join(format!("replicate_{r:0width$}.csv"));
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub fn fit(cfg: &ExperimentConfig, data_path: &Path) -> Result<()> {
    let data = read_data(cfg, data_path)?;
    let theta0 = cfg.theta0();
    let dt = mle_dt(&cfg.model, &data, None)?;
    let key = StreamKey::new(cfg.seed, Purpose::Jitter, 0);
    let (ce, jitters) = mle_ce(&cfg.model, &data, Some(&dt.theta_hat), cfg.jitters, key)?;
    let lambda = |f: &FitResult, at_null: f64| {
        likelihood_ratio(f.loglik_at_max, at_null).unwrap_or(f64::NAN)
    };
    let dt_null = dt_objective(&cfg.model, &data)(&theta0);
    let ce_null = ce_objective(&cfg.model, &data, &jitters)(&theta0);
    let mut csv = Csv::new("fit", cfg, &file_digest(data_path)?);
    csv.comment("lr: likelihood ratio against the parameter values in the family specs");
    csv.row(fit_header(cfg));
    for (f, null) in [(&dt, dt_null), (&ce, ce_null)] {
        csv.row(fit_row(
            0,
            &f.objective_kind.to_string(),
            &f.theta_hat.values,
            f.loglik_at_max,
            lambda(f, null),
            f.converged,
            f.iterations,
        ));
    }
    csv.write(cfg.out.as_deref())
}

pub fn lr_experiment(cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg
        .out
        .as_deref()
        .context("lr-experiment needs --out FILE")?;
    let settings = LrSettings {
        replicates: cfg.replicates,
        jitters: cfg.jitters,
        seed: cfg.seed,
        parallelism: cfg.parallelism,
        alpha_resamples: ALPHA_RESAMPLES,
    };
    let exp = run_lr(&cfg.model, &cfg.theta0(), &settings)?;

    let mut csv = Csv::new("lr-experiment", cfg, "");
    csv.row(fit_header(cfg).into_iter().chain(["error".to_string()]));
    let mut pairs = Csv::new("lr-experiment", cfg, "");
    pairs.row(["replicate", "lr_dt", "lr_ce"]);
    for o in &exp.outcomes {
        let err = o
            .error
            .clone()
            .unwrap_or_default()
            .replace([',', '\n'], ";");
        for (kind, fit) in [("DT", &o.dt), ("CE", &o.ce)] {
            let row = match fit {
                Some(f) => fit_row(
                    o.replicate,
                    kind,
                    &f.theta_hat,
                    f.loglik,
                    f.lambda,
                    f.converged,
                    f.iterations,
                ),
                None => {
                    let nan = vec![f64::NAN; cfg.model.n_params()];
                    fit_row(o.replicate, kind, &nan, f64::NAN, f64::NAN, false, 0)
                }
            };
            csv.row(row.into_iter().chain([err.clone()]));
        }
        if o.ok() {
            if let (Some(d), Some(c)) = (&o.dt, &o.ce) {
                pairs.row([o.replicate.to_string(), num(d.lambda), num(c.lambda)]);
            }
        }
    }
    csv.write(Some(out))?;
    pairs.write(Some(&sibling(out, "pairs")))?;

    let s = &exp.summary;
    let mut sum = Csv::new("lr-experiment", cfg, "");
    sum.row(["statistic", "value"]);
    let mut kv = |k: &str, v: String| {
        sum.row([k.to_string(), v]);
    };
    kv("replicates", exp.outcomes.len().to_string());
    kv("used", s.used.to_string());
    kv("failed", s.failed.to_string());
    kv("df", s.df.to_string());
    for (tag, r) in [("dt", &s.dt), ("ce", &s.ce)] {
        kv(&format!("ks_statistic_{tag}"), num(r.ks.statistic));
        kv(&format!("ks_p_{tag}"), num(r.ks.p_value));
        if let Some(c) = &r.chisq {
            kv(&format!("chisq_df_{tag}"), num(c.df));
            kv(&format!("chisq_df_se_{tag}"), num(c.se));
            kv(&format!("chisq_df_ci_low_{tag}"), num(c.ci.0));
            kv(&format!("chisq_df_ci_high_{tag}"), num(c.ci.1));
            kv(&format!("chisq_aic_{tag}"), num(c.aic));
        }
        if let Some(g) = &r.gamma {
            kv(&format!("gamma_shape_{tag}"), num(g.shape));
            kv(&format!("gamma_scale_{tag}"), num(g.scale));
            kv(&format!("gamma_aic_{tag}"), num(g.aic));
        }
    }
    if let Some(a) = &s.alpha {
        kv("alpha", num(a.alpha));
        kv("alpha_ci_low", num(a.ci.0));
        kv("alpha_ci_high", num(a.ci.1));
    }
    sum.write(Some(&sibling(out, "summary")))?;

    if exp.failure_fraction() > MAX_FAILURE_FRACTION {
        return Err(NumericalFailure(format!(
            "{} of {} replicates failed",
            s.failed,
            exp.outcomes.len()
        ))
        .into());
    }
    Ok(())
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text
        .split_once(':')
        .with_context(|| format!("range `{text}` must be `from:to`"))?;
    let a: f64 = a
        .trim()
        .parse()
        .with_context(|| format!("range `{text}`: bad start"))?;
    let b: f64 = b
        .trim()
        .parse()
        .with_context(|| format!("range `{text}`: bad end"))?;
    Ok((a, b))
}

/// Default axis span for a parameter with true value `v`.
fn default_range(name: &str, v: f64) -> (f64, f64) {
    match name {
        "rho" => (-0.99, 0.99),
        "omega" | "p" => (0.01, 0.99),
        _ => (v / 3.0, 2.0 * v),
    }
}

pub fn surface(
    cfg: &ExperimentConfig,
    data_path: Option<&Path>,
    grid: usize,
    first: Option<&str>,
    second: Option<&str>,
) -> Result<()> {
    let layout = cfg.model.layout();
    if layout.len() != 2 {
        bail!(
            "surface needs a two-parameter model, this one has {}",
            layout.join(",")
        );
    }
    if grid == 0 {
        bail!("--grid must be positive");
    }
    let theta0 = cfg.theta0();
    let (data, extra) = match data_path {
        Some(p) => (read_data(cfg, p)?, file_digest(p)?),
        None => (
            cfg.model
                .simulate(&theta0, StreamKey::new(cfg.seed, Purpose::Simulate, 0))?,
            String::new(),
        ),
    };
    let axis = |spec: Option<&str>, idx: usize| -> Result<Axis> {
        let (from, to) = match spec {
            Some(s) => parse_range(s)?,
            None => default_range(layout[idx], theta0.values[idx]),
        };
        Ok(Axis {
            from,
            to,
            points: grid,
        })
    };
    let (ax1, ax2) = (axis(first, 0)?, axis(second, 1)?);
    let extra = format!("{extra}grid={grid}\nfirst={ax1:?}\nsecond={ax2:?}\n");
    let jitters = JitterMatrix::generate(
        cfg.jitters,
        cfg.model.n(),
        StreamKey::new(cfg.seed, Purpose::Jitter, 0),
    );
    let s = likelihood_surface(&cfg.model, &data, ax1, ax2, &jitters, cfg.parallelism)?;
    let mut csv = Csv::new("surface", cfg, &extra);
    if let (Some(d), Some(c)) = (s.argmax_dt(), s.argmax_ce()) {
        csv.comment(&format!("argmax_dt: {},{}", d.0, d.1));
        csv.comment(&format!("argmax_ce: {},{}", c.0, c.1));
    }
    csv.row([
        layout[0],
        layout[1],
        "loglik_dt",
        "loglik_ce",
        "near_boundary",
    ]);
    for p in &s.points {
        csv.row([
            num(p.first),
            num(p.second),
            num(p.loglik_dt),
            num(p.loglik_ce),
            p.near_boundary.to_string(),
        ]);
    }
    csv.write(cfg.out.as_deref())
}

pub fn kappa(cfg: &ExperimentConfig, data_path: &Path) -> Result<()> {
    let data = read_data(cfg, data_path)?;
    let fit = mle_dt(&cfg.model, &data, None)?;
    if !fit.converged {
        return Err(NumericalFailure("DT fit did not converge".into()).into());
    }
    let k = run_kappa(
        &cfg.model,
        &fit.theta_hat,
        cfg.bootstrap,
        cfg.seed,
        cfg.parallelism,
    )?;
    let mut csv = Csv::new("kappa", cfg, &file_digest(data_path)?);
    csv.row(["quantity", "row", "col", "value"]);
    let layout = cfg.model.layout();
    for (name, v) in layout.iter().zip(&k.theta_used.values) {
        csv.row(["theta", name, "", &num(*v)]);
    }
    for (label, m) in [("j_hat", &k.j_hat), ("v_hat", &k.v_hat)] {
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                csv.row([label, layout[i], layout[j], &num(m[(i, j)])]);
            }
        }
    }
    csv.row(["kappa", "", "", &num(k.kappa_hat)]);
    csv.row(["n_b", "", "", &k.n_b.to_string()]);
    csv.row(["dropped", "", "", &k.dropped.to_string()]);
    csv.write(cfg.out.as_deref())
}

pub fn kappa_grid(cfg: &ExperimentConfig, rows: &[f64], cols: &[f64]) -> Result<()> {
    let cells = run_kappa_grid(
        &cfg.model,
        rows,
        cols,
        cfg.bootstrap,
        cfg.seed,
        cfg.parallelism,
    )?;
    let layout = cfg.model.layout();
    let extra = format!("rows={rows:?}\ncols={cols:?}\n");
    let mut csv = Csv::new("kappa-grid", cfg, &extra);
    csv.comment(&format!(
        "rows: {}, columns: {}, bootstrap: {}",
        layout[1], layout[0], cfg.bootstrap
    ));
    csv.row(
        std::iter::once(layout[1].to_string())
            .chain(cols.iter().map(|c| format!("{}={}", layout[0], num(*c)))),
    );
    for (r, chunk) in rows.iter().zip(cells.chunks(cols.len())) {
        csv.row(std::iter::once(num(*r)).chain(chunk.iter().map(|c| num(c.result.kappa_hat))));
    }
    csv.write(cfg.out.as_deref())
}
