//! Copula models: a correlation family and a shared marginal family bound to
//! a packed parameter vector θ = (correlation parameters, marginal parameters).

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::correlation::{CorrelationModel, LowerFactor};
use crate::error::{Error, Result};
use crate::marginals::{CdfTable, Marginal};
use crate::mvn::sample_mvn;
use crate::rng::StreamKey;
use crate::special::std_normal_cdf;

/// Upper end of the fitted intraclass correlation.
pub const OMEGA_FIT_MAX: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Natural,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub scale: Scale,
}

impl ParamVector {
    pub fn natural(values: Vec<f64>) -> Self {
        Self {
            values,
            scale: Scale::Natural,
        }
    }

    pub fn unconstrained(values: Vec<f64>) -> Self {
        Self {
            values,
            scale: Scale::Unconstrained,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transform {
    /// ρ ↔ atanh ρ
    Atanh,
    /// ω, p ↔ logit
    Logit,
    /// positive ↔ log
    Log,
}

impl Transform {
    fn for_name(name: &str) -> Self {
        match name {
            "rho" => Self::Atanh,
            "omega" | "p" => Self::Logit,
            _ => Self::Log,
        }
    }

    fn forward(self, x: f64) -> Option<f64> {
        let ok = match self {
            Self::Atanh => x > -1.0 && x < 1.0,
            Self::Logit => x > 0.0 && x < 1.0,
            Self::Log => x > 0.0 && x.is_finite(),
        };
        if !ok {
            return None;
        }
        Some(match self {
            Self::Atanh => x.atanh(),
            Self::Logit => (x / (1.0 - x)).ln(),
            Self::Log => x.ln(),
        })
    }

    fn inverse(self, u: f64) -> f64 {
        match self {
            Self::Atanh => u.tanh(),
            Self::Logit => 1.0 / (1.0 + (-u).exp()),
            Self::Log => u.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<i64>,
}

impl Dataset {
    pub fn new(y: Vec<i64>) -> Self {
        Self { y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn max(&self) -> i64 {
        self.y.iter().copied().max().unwrap_or(0)
    }

    /// Single-column CSV with header `y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(4 * self.y.len() + 2);
        out.push_str("y\n");
        for v in &self.y {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    /// Parses the [`Self::to_csv`] format; `#` lines are comments.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, "y")) => {}
            Some((no, other)) => {
                return Err(Error::parse(
                    text.lines().nth(no - 1).unwrap_or(""),
                    format!("line {no}: expected header `y`, found `{other}`"),
                ))
            }
            None => return Err(Error::parse("", "empty dataset file")),
        }
        let y = lines
            .map(|(no, l)| {
                l.parse::<i64>()
                    .map_err(|_| Error::parse(l, format!("line {no}: `{l}` is not an integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { y })
    }
}

/// Correlation and marginal families with their structural constants.
///
/// The parameter values stored in the two templates are only used as the
/// default θ (see [`CopulaModel::template_theta`]); every likelihood call takes
/// θ explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaModel {
    correlation: CorrelationModel<f64>,
    marginal: Marginal<f64>,
}

impl CopulaModel {
    pub fn new(correlation: CorrelationModel<f64>, marginal: Marginal<f64>) -> Self {
        Self {
            correlation,
            marginal,
        }
    }

    pub fn correlation_template(&self) -> &CorrelationModel<f64> {
        &self.correlation
    }

    pub fn marginal_template(&self) -> &Marginal<f64> {
        &self.marginal
    }

    pub fn n(&self) -> usize {
        self.correlation.dim()
    }

    /// Number of correlation parameters (q).
    pub fn n_correlation_params(&self) -> usize {
        self.correlation.param_names().len()
    }

    pub fn layout(&self) -> Vec<&'static str> {
        let mut names = self.correlation.param_names().to_vec();
        names.extend_from_slice(self.marginal.param_names());
        names
    }

    pub fn n_params(&self) -> usize {
        self.layout().len()
    }

    /// The parameter values carried by the family templates.
    pub fn template_theta(&self) -> ParamVector {
        let mut v = self.correlation.params();
        v.extend(self.marginal.params());
        ParamVector::natural(v)
    }

    fn check_len(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn natural_values<'a>(&self, theta: &'a ParamVector) -> Result<&'a [f64]> {
        self.check_len(theta)?;
        if theta.scale != Scale::Natural {
            return Err(Error::domain("expected a natural-scale parameter vector"));
        }
        Ok(&theta.values)
    }

    /// Whether θ (natural scale) lies strictly inside the fitting domain.
    pub fn in_domain(&self, values: &[f64]) -> bool {
        values.len() == self.n_params()
            && self
                .layout()
                .iter()
                .zip(values)
                .all(|(name, &x)| match *name {
                    "omega" => x >= 0.0 && x <= OMEGA_FIT_MAX,
                    _ => Transform::for_name(name).forward(x).is_some(),
                })
            && self.correlation_at_values(values).is_ok()
            && self.marginal_at_values(values).is_ok()
    }

    pub fn correlation_at(&self, theta: &ParamVector) -> Result<CorrelationModel<f64>> {
        self.correlation_at_values(self.natural_values(theta)?)
    }

    pub fn marginal_at(&self, theta: &ParamVector) -> Result<Marginal<f64>> {
        self.marginal_at_values(self.natural_values(theta)?)
    }

    pub(crate) fn correlation_at_values(&self, values: &[f64]) -> Result<CorrelationModel<f64>> {
        let q = self.n_correlation_params();
        self.correlation.with_params(&values[..q])
    }

    pub(crate) fn marginal_at_values(&self, values: &[f64]) -> Result<Marginal<f64>> {
        let q = self.n_correlation_params();
        self.marginal.with_params(&values[q..])
    }

    /// Natural → unconstrained: ρ ↦ atanh ρ, ω and p ↦ logit, positive ↦ log.
    pub fn to_unconstrained(&self, theta: &ParamVector) -> Result<ParamVector> {
        let values = self.natural_values(theta)?;
        let out = self
            .layout()
            .iter()
            .zip(values)
            .map(|(name, &x)| {
                Transform::for_name(name).forward(x).ok_or_else(|| {
                    Error::domain(format!("{name}={x} is on or outside its domain boundary"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParamVector::unconstrained(out))
    }

    pub fn to_natural(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.check_len(theta)?;
        if theta.scale != Scale::Unconstrained {
            return Err(Error::domain("expected an unconstrained parameter vector"));
        }
        Ok(ParamVector::natural(
            self.unconstrained_to_natural(&theta.values),
        ))
    }

    /// θ on the natural scale, converting if needed.
    pub fn as_natural(&self, theta: &ParamVector) -> Result<ParamVector> {
        match theta.scale {
            Scale::Natural => {
                self.check_len(theta)?;
                Ok(theta.clone())
            }
            Scale::Unconstrained => self.to_natural(theta),
        }
    }

    pub(crate) fn unconstrained_to_natural(&self, values: &[f64]) -> Vec<f64> {
        self.layout()
            .iter()
            .zip(values)
            .map(|(name, &u)| Transform::for_name(name).inverse(u))
            .collect()
    }

    pub fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: data.len(),
            });
        }
        if let Some(bad) = data.y.iter().find(|&&y| self.marginal.pmf(y) <= 0.0) {
            return Err(Error::domain(format!(
                "observation {bad} outside the support of {}",
                self.marginal
            )));
        }
        Ok(())
    }

    /// One dataset from the direct model: Z ~ N(0, Ω), U = Φ(Z), Y = F⁻¹(U).
    pub fn simulate(&self, theta: &ParamVector, key: StreamKey) -> Result<Dataset> {
        Ok(Simulator::new(self, theta)?.draw(key))
    }
}

/// Cached factor and quantile table for repeated simulation at a fixed θ.
#[derive(Debug, Clone)]
pub struct Simulator {
    factor: LowerFactor<f64>,
    table: CdfTable<f64>,
}

impl Simulator {
    pub fn new(model: &CopulaModel, theta: &ParamVector) -> Result<Self> {
        let corr = model.correlation_at(theta)?;
        let marg = model.marginal_at(theta)?;
        Ok(Self {
            factor: corr.cholesky()?,
            table: marg.support_table(1e-17),
        })
    }

    pub fn draw(&self, key: StreamKey) -> Dataset {
        let z = sample_mvn(&self.factor, &mut key.rng());
        let y = z
            .iter()
            .map(|&zi| {
                self.table
                    .quantile_tails(std_normal_cdf(zi), std_normal_cdf(-zi))
            })
            .collect();
        Dataset { y }
    }
}

impl fmt::Display for CopulaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "correlation = {}", self.correlation)?;
        writeln!(f, "marginal = {}", self.marginal)?;
        writeln!(f, "params = {}", self.layout().join(","))
    }
}

impl FromStr for CopulaModel {
    type Err = Error;

    /// Reads `key = value` lines: `correlation`, `marginal` and optionally
    /// `params` (checked against the families' layout).
    fn from_str(s: &str) -> Result<Self> {
        let mut corr = None;
        let mut marg = None;
        let mut params = None;
        for (no, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(line, format!("line {}: expected key = value", no + 1))
            })?;
            let v = v.trim();
            let at_line = |e: Error| Error::parse(line, format!("line {}: {e}", no + 1));
            match k.trim() {
                "correlation" => corr = Some(v.parse::<CorrelationModel>().map_err(at_line)?),
                "marginal" => marg = Some(v.parse::<Marginal>().map_err(at_line)?),
                "params" => params = Some(v.to_string()),
                other => {
                    return Err(Error::parse(
                        line,
                        format!("line {}: unknown key `{other}`", no + 1),
                    ))
                }
            }
        }
        let model = Self::new(
            corr.ok_or_else(|| Error::parse(s, "missing `correlation`"))?,
            marg.ok_or_else(|| Error::parse(s, "missing `marginal`"))?,
        );
        if let Some(p) = params {
            model.check_param_names(&p)?;
        }
        Ok(model)
    }
}

impl CopulaModel {
    /// Verifies a comma-separated parameter list against the layout.
    pub fn check_param_names(&self, list: &str) -> Result<()> {
        let names: Vec<&str> = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if names != self.layout() {
            return Err(Error::parse(
                list,
                format!(
                    "params must be `{}` for this model",
                    self.layout().join(",")
                ),
            ));
        }
        Ok(())
    }
}
