//! Experiment configuration: `key = value` files plus flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dgcopula::experiment::DEFAULT_SEED;
use dgcopula::{CopulaModel, CorrelationModel, Marginal, ParamVector};
use sha2::{Digest, Sha256};

pub const DEFAULT_REPLICATES: usize = 200;
pub const DEFAULT_JITTERS: usize = 1000;
pub const DEFAULT_BOOTSTRAP: usize = 2000;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: CopulaModel,
    pub replicates: usize,
    pub jitters: usize,
    pub bootstrap: usize,
    pub seed: u64,
    pub parallelism: usize,
    pub out: Option<PathBuf>,
}

/// Built-in designs: an AR(1) series with negative binomial counts and a
/// one-way random-effects layout with Poisson counts.
pub fn preset(name: &str) -> Result<&'static str> {
    Ok(match name {
        "ar1-negbin" => "correlation = ar1{rho=0.6,n=200}\nmarginal = negbinomial{mu=12,k=7}\n",
        "anova-poisson" => {
            "correlation = exch{omega=0.7,block=3,groups=20}\nmarginal = poisson{lambda=3}\n"
        }
        other => bail!("unknown preset `{other}` (expected ar1-negbin or anova-poisson)"),
    })
}

fn positive(key: &str, value: &str, line: usize) -> Result<usize> {
    let n: usize = value.parse().with_context(|| {
        format!("line {line}: `{key}` must be a positive integer, got `{value}`")
    })?;
    if n == 0 {
        bail!("line {line}: `{key}` must be positive");
    }
    Ok(n)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut corr = None;
        let mut marg = None;
        let mut names = None;
        let mut cfg = (
            DEFAULT_REPLICATES,
            DEFAULT_JITTERS,
            DEFAULT_BOOTSTRAP,
            DEFAULT_SEED,
            1,
            None,
        );
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                bail!("line {line}: expected `key = value`, got `{trimmed}`");
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "correlation" => {
                    corr = Some(
                        value
                            .parse::<CorrelationModel>()
                            .with_context(|| format!("line {line}: field `correlation`"))?,
                    )
                }
                "marginal" => {
                    marg = Some(
                        value
                            .parse::<Marginal>()
                            .with_context(|| format!("line {line}: field `marginal`"))?,
                    )
                }
                "params" => names = Some((line, value.to_string())),
                "replicates" => cfg.0 = positive(key, value, line)?,
                "jitters" => cfg.1 = positive(key, value, line)?,
                "bootstrap" => cfg.2 = positive(key, value, line)?,
                "seed" => {
                    cfg.3 = value.parse().with_context(|| {
                        format!("line {line}: `seed` must be an unsigned integer")
                    })?
                }
                "parallelism" => cfg.4 = positive(key, value, line)?,
                "out" => cfg.5 = Some(PathBuf::from(value)),
                other => bail!("line {line}: unknown field `{other}`"),
            }
        }
        let model = CopulaModel::new(
            corr.context("missing field `correlation`")?,
            marg.context("missing field `marginal`")?,
        );
        if let Some((line, list)) = names {
            model
                .check_param_names(&list)
                .with_context(|| format!("line {line}: field `params`"))?;
        }
        Ok(Self {
            model,
            replicates: cfg.0,
            jitters: cfg.1,
            bootstrap: cfg.2,
            seed: cfg.3,
            parallelism: cfg.4,
            out: cfg.5,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// True parameter θ₀: the values written in the family specs.
    pub fn theta0(&self) -> ParamVector {
        self.model.template_theta()
    }

    /// Canonical text covering everything that affects results. Parallelism
    /// and the output path are left out.
    pub fn canonical(&self) -> String {
        format!(
            "{}replicates = {}\njitters = {}\nbootstrap = {}\nseed = {}\n",
            self.model, self.replicates, self.jitters, self.bootstrap, self.seed
        )
    }

    pub fn hash(&self, extra: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        h.update(extra.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_preset() {
        let c = ExperimentConfig::parse(preset("ar1-negbin").unwrap()).unwrap();
        assert_eq!(c.theta0().values, vec![0.6, 12.0, 7.0]);
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn errors_name_line_and_field() {
        let err =
            ExperimentConfig::parse("correlation = ar1{rho=0.6,n=5}\nmarginal = poisson{lam=3}\n")
                .unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 2") && msg.contains("marginal"), "{msg}");
        let err = ExperimentConfig::parse("replicates = 0\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 1"));
        let err = ExperimentConfig::parse("colour = red\n").unwrap_err();
        assert!(format!("{err:#}").contains("colour"));
    }

    #[test]
    fn hash_ignores_parallelism_and_out() {
        let base = preset("anova-poisson").unwrap();
        let a = ExperimentConfig::parse(base).unwrap();
        let b = ExperimentConfig::parse(&format!("{base}parallelism = 4\nout = x.csv\n")).unwrap();
        let c = ExperimentConfig::parse(&format!("{base}seed = 5\n")).unwrap();
        assert_eq!(a.hash(""), b.hash(""));
        assert_ne!(a.hash(""), c.hash(""));
    }
}
