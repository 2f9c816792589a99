//! Structured correlation families Ω(ω).
//!
//! Each family has closed-form log-determinant and quadratic-form kernels
//! that run in O(n); the dense Cholesky route is kept alongside them for
//! cross-validation and for the Genz integrator, which needs the full matrix.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::text::SpecText;

/// Smallest admissible eigenvalue.
pub const MIN_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel<T = f64> {
    /// Ω_ij = ρ^|i−j|.
    Ar1 {
        rho: T,
        n: usize,
    },
    /// Block diagonal; every off-diagonal entry inside a block equals ω.
    ExchangeableBlocks {
        omega: T,
        sizes: Vec<usize>,
    },
    Identity {
        n: usize,
    },
}

impl<T: Scalar> CorrelationModel<T> {
    pub fn ar1(rho: T, n: usize) -> Result<Self> {
        Self::Ar1 { rho, n }.validated()
    }

    pub fn exchangeable_blocks(omega: T, sizes: Vec<usize>) -> Result<Self> {
        Self::ExchangeableBlocks { omega, sizes }.validated()
    }

    /// `groups` blocks of `block` coordinates each.
    pub fn exchangeable(omega: T, block: usize, groups: usize) -> Result<Self> {
        Self::exchangeable_blocks(omega, vec![block; groups])
    }

    pub fn identity(n: usize) -> Self {
        Self::Identity { n }
    }

    pub fn validated(self) -> Result<Self> {
        if self.dim() == 0 {
            return Err(Error::domain("correlation model of dimension 0"));
        }
        if let Self::ExchangeableBlocks { sizes, .. } = &self {
            if sizes.contains(&0) {
                return Err(Error::domain("exchangeable block of size 0"));
            }
        }
        let min_eig = self.min_eigenvalue_bound();
        if !(min_eig >= T::of(MIN_EIGENVALUE)) {
            return Err(Error::domain(format!(
                "correlation parameter outside the positive-definite region: {self}"
            )));
        }
        Ok(self)
    }

    /// Lower bound on the smallest eigenvalue, exact for exchangeable blocks.
    fn min_eigenvalue_bound(&self) -> T {
        match self {
            Self::Ar1 { rho, n } => {
                if *n == 1 {
                    return T::one();
                }
                let r = rho.abs();
                if !(r < T::one()) {
                    return T::nan();
                }
                (T::one() - r) / (T::one() + r)
            }
            Self::ExchangeableBlocks { omega, sizes } => {
                let m = sizes.iter().copied().max().unwrap_or(1);
                if m == 1 {
                    return T::one();
                }
                let w = *omega;
                (T::one() - w).min(T::one() + T::of_usize(m - 1) * w)
            }
            Self::Identity { .. } => T::one(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ar1 { n, .. } | Self::Identity { n } => *n,
            Self::ExchangeableBlocks { sizes, .. } => sizes.iter().sum(),
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Self::Ar1 { .. } => &["rho"],
            Self::ExchangeableBlocks { .. } => &["omega"],
            Self::Identity { .. } => &[],
        }
    }

    pub fn params(&self) -> Vec<T> {
        match self {
            Self::Ar1 { rho, .. } => vec![*rho],
            Self::ExchangeableBlocks { omega, .. } => vec![*omega],
            Self::Identity { .. } => vec![],
        }
    }

    /// Same structure with new parameter values.
    pub fn with_params(&self, values: &[T]) -> Result<Self> {
        let expected = self.param_names().len();
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        match self {
            Self::Ar1 { n, .. } => Self::ar1(values[0], *n),
            Self::ExchangeableBlocks { sizes, .. } => {
                Self::exchangeable_blocks(values[0], sizes.clone())
            }
            Self::Identity { n } => Ok(Self::identity(*n)),
        }
    }

    pub fn build_dense(&self) -> Matrix<T> {
        match self {
            Self::Ar1 { rho, n } => Matrix::from_fn(*n, |i, j| rho.powi(i.abs_diff(j) as i32)),
            Self::ExchangeableBlocks { omega, sizes } => {
                let block_of = block_index(sizes);
                Matrix::from_fn(self.dim(), |i, j| {
                    if i == j {
                        T::one()
                    } else if block_of[i] == block_of[j] {
                        *omega
                    } else {
                        T::zero()
                    }
                })
            }
            Self::Identity { n } => Matrix::identity(*n),
        }
    }

    /// log |Ω| from the closed forms.
    pub fn log_det(&self) -> T {
        match self {
            Self::Ar1 { rho, n } => T::of_usize(n - 1) * (-(*rho * *rho)).ln_1p(),
            Self::ExchangeableBlocks { omega, sizes } => sizes
                .iter()
                .map(|&m| {
                    let mm1 = T::of_usize(m - 1);
                    mm1 * (-*omega).ln_1p() + (mm1 * *omega).ln_1p()
                })
                .sum(),
            Self::Identity { .. } => T::zero(),
        }
    }

    /// log |Ω| through a dense Cholesky factorization.
    pub fn log_det_dense(&self) -> Result<T> {
        let l = self.build_dense().cholesky()?;
        Ok(T::of(2.0) * (0..l.dim()).map(|i| l[(i, i)].ln()).sum::<T>())
    }

    /// zᵀ(Ω⁻¹ − I)z through the structured inverse.
    pub fn quad_form_excess(&self, z: &[T]) -> Result<T> {
        self.check_len(z)?;
        Ok(self.quad_form_excess_unchecked(z))
    }

    /// [`Self::quad_form_excess`] without the length check, for hot loops.
    pub fn quad_form_excess_unchecked(&self, z: &[T]) -> T {
        match self {
            Self::Ar1 { rho, n } => {
                if *n == 1 {
                    return T::zero();
                }
                // Ω⁻¹ is tridiagonal: diagonal (1, 1+ρ², ..., 1+ρ², 1)/(1−ρ²), off-diagonal −ρ/(1−ρ²).
                let r = *rho;
                let mut sq = T::zero();
                let mut cross = T::zero();
                for i in 0..*n {
                    sq = sq + z[i] * z[i];
                    if i + 1 < *n {
                        cross = cross + z[i] * z[i + 1];
                    }
                }
                let interior = sq - z[0] * z[0] - z[n - 1] * z[n - 1];
                (r * r * (sq + interior) - T::of(2.0) * r * cross) / (T::one() - r * r)
            }
            Self::ExchangeableBlocks { omega, sizes } => {
                let w = *omega;
                let mut start = 0;
                let mut total = T::zero();
                for &m in sizes {
                    let block = &z[start..start + m];
                    start += m;
                    if m == 1 {
                        continue;
                    }
                    let sq: T = block.iter().map(|&x| x * x).sum();
                    let s: T = block.iter().copied().sum();
                    let lead = T::one() + T::of_usize(m - 1) * w;
                    total = total + w * (sq - s * s / lead) / (T::one() - w);
                }
                total
            }
            Self::Identity { .. } => T::zero(),
        }
    }

    /// zᵀ(Ω⁻¹ − I)z through a dense Cholesky solve.
    pub fn quad_form_excess_dense(&self, z: &[T]) -> Result<T> {
        self.check_len(z)?;
        let l = self.build_dense().cholesky()?;
        let x = l.forward_solve(z);
        Ok(x.iter().map(|&v| v * v).sum::<T>() - z.iter().map(|&v| v * v).sum::<T>())
    }

    /// Lower factor L with L Lᵀ = Ω; closed form for AR(1), per-block for exchangeable.
    pub fn cholesky(&self) -> Result<LowerFactor<T>> {
        let n = self.dim();
        let l = match self {
            Self::Ar1 { rho, .. } => {
                let s = (T::one() - *rho * *rho).sqrt();
                Matrix::from_fn(n, |i, j| {
                    if j > i {
                        T::zero()
                    } else if j == 0 {
                        rho.powi(i as i32)
                    } else {
                        rho.powi((i - j) as i32) * s
                    }
                })
            }
            Self::ExchangeableBlocks { omega, sizes } => {
                let mut l = Matrix::zeros(n);
                let mut start = 0;
                for &m in sizes {
                    let block = Matrix::from_fn(m, |i, j| if i == j { T::one() } else { *omega });
                    let lb = block.cholesky().map_err(|e| match e {
                        Error::NotPositiveDefinite { pivot, value } => Error::NotPositiveDefinite {
                            pivot: pivot + start,
                            value,
                        },
                        other => other,
                    })?;
                    for i in 0..m {
                        for j in 0..=i {
                            l[(start + i, start + j)] = lb[(i, j)];
                        }
                    }
                    start += m;
                }
                l
            }
            Self::Identity { .. } => Matrix::identity(n),
        };
        Ok(LowerFactor(l))
    }

    fn check_len(&self, z: &[T]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor of a correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerFactor<T = f64>(pub Matrix<T>);

impl<T: Scalar> LowerFactor<T> {
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    /// L ε, skipping the structural zeros above the diagonal.
    pub fn apply(&self, eps: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let row = self.0.row(i);
                (0..=i).map(|j| row[j] * eps[j]).sum()
            })
            .collect()
    }
}

fn block_index(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &m)| std::iter::repeat_n(b, m))
        .collect()
}

impl<T: Scalar> fmt::Display for CorrelationModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ar1 { rho, n } => write!(f, "ar1{{rho={rho:?},n={n}}}"),
            Self::ExchangeableBlocks { omega, sizes } => {
                let first = sizes.first().copied().unwrap_or(0);
                if sizes.iter().all(|&m| m == first) {
                    write!(
                        f,
                        "exch{{omega={omega:?},block={first},groups={}}}",
                        sizes.len()
                    )
                } else {
                    let joined: Vec<String> = sizes.iter().map(|m| m.to_string()).collect();
                    write!(f, "exch{{omega={omega:?},sizes={}}}", joined.join("/"))
                }
            }
            Self::Identity { n } => write!(f, "identity{{n={n}}}"),
        }
    }
}

impl<T: Scalar> FromStr for CorrelationModel<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = SpecText::parse(s)?;
        let model = match spec.family.as_str() {
            "ar1" => {
                spec.only(&["rho", "n"], s)?;
                Self::ar1(T::of(spec.real("rho", s)?), spec.count("n", s)?)
            }
            "exch" | "exchangeable" => {
                let omega = T::of(spec.real("omega", s)?);
                if spec.fields.iter().any(|(k, _)| k == "sizes") {
                    spec.only(&["omega", "sizes"], s)?;
                    let raw = &spec.fields.iter().find(|(k, _)| k == "sizes").unwrap().1;
                    let sizes = raw
                        .split('/')
                        .map(|p| p.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::parse(s, format!("field `sizes`: bad list `{raw}`")))?;
                    Self::exchangeable_blocks(omega, sizes)
                } else {
                    spec.only(&["omega", "block", "groups"], s)?;
                    Self::exchangeable(omega, spec.count("block", s)?, spec.count("groups", s)?)
                }
            }
            "identity" => {
                spec.only(&["n"], s)?;
                Self::identity(spec.count("n", s)?).validated()
            }
            other => {
                return Err(Error::parse(
                    s,
                    format!("unknown correlation family `{other}`"),
                ))
            }
        };
        model.map_err(|e| Error::parse(s, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ar1_dense() {
        let m = CorrelationModel::ar1(0.6, 3).unwrap().build_dense();
        let expect = Matrix::from_rows(&[
            vec![1.0, 0.6, 0.36],
            vec![0.6, 1.0, 0.6],
            vec![0.36, 0.6, 1.0],
        ])
        .unwrap();
        assert!(m.max_abs_diff(&expect) < 1e-15);
        assert!(m.is_symmetric());
    }

    #[test]
    fn exchangeable_dense_block() {
        let m = CorrelationModel::exchangeable(0.7, 3, 1)
            .unwrap()
            .build_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[(i, j)], if i == j { 1.0 } else { 0.7 });
            }
        }
        let two = CorrelationModel::exchangeable(0.7, 2, 2)
            .unwrap()
            .build_dense();
        assert_eq!(two[(0, 2)], 0.0);
        assert_eq!(two[(2, 3)], 0.7);
    }

    #[test]
    fn log_det_examples() {
        // Dense-determinant oracle values (mpmath).
        let ar = CorrelationModel::ar1(0.6, 3).unwrap();
        assert_abs_diff_eq!(ar.log_det(), -0.892_574_205_256_839, epsilon = 1e-14);
        assert_abs_diff_eq!(ar.log_det_dense().unwrap(), ar.log_det(), epsilon = 1e-12);
        let ex = CorrelationModel::exchangeable(0.7, 3, 1).unwrap();
        assert_abs_diff_eq!(ex.log_det(), -1.532_476_871_297_972, epsilon = 1e-14);
        assert_abs_diff_eq!(ex.log_det_dense().unwrap(), ex.log_det(), epsilon = 1e-12);
        assert_eq!(CorrelationModel::<f64>::identity(4).log_det(), 0.0);
    }

    #[test]
    fn quad_form_examples() {
        let ar = CorrelationModel::ar1(0.6, 2).unwrap();
        assert_abs_diff_eq!(
            ar.quad_form_excess(&[1.0, 1.0]).unwrap(),
            -0.75,
            epsilon = 1e-14
        );
        assert_eq!(ar.quad_form_excess(&[0.0, 0.0]).unwrap(), 0.0);
        let id = CorrelationModel::identity(3);
        assert_eq!(id.quad_form_excess(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(
            ar.quad_form_excess(&[1.0]),
            Err(Error::Dimension {
                expected: 2,
                got: 1
            })
        ));
        let single = CorrelationModel::ar1(0.9, 1).unwrap();
        assert_eq!(single.quad_form_excess(&[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn cholesky_examples() {
        let l = CorrelationModel::ar1(0.6, 2).unwrap().cholesky().unwrap();
        let expect = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
        assert!(l.matrix().max_abs_diff(&expect) < 1e-15);
        let id = CorrelationModel::<f64>::identity(3).cholesky().unwrap();
        assert_eq!(id.matrix(), &Matrix::identity(3));
        let near = CorrelationModel::exchangeable(0.99999, 3, 1).unwrap();
        let l = near.cholesky().unwrap();
        assert!(
            l.matrix()
                .matmul(&l.matrix().transpose())
                .max_abs_diff(&near.build_dense())
                < 1e-10
        );
    }

    #[test]
    fn domain_guards() {
        assert!(CorrelationModel::ar1(1.0, 3).is_err());
        assert!(CorrelationModel::ar1(-1.0, 3).is_err());
        assert!(CorrelationModel::ar1(0.5, 0).is_err());
        assert!(CorrelationModel::exchangeable(-0.5, 3, 2).is_err());
        assert!(CorrelationModel::exchangeable(-0.49, 3, 2).is_ok());
        assert!(CorrelationModel::exchangeable(1.0 - 1e-11, 3, 2).is_err());
        assert!(CorrelationModel::exchangeable(0.5, 0, 2).is_err());
    }

    #[test]
    fn spec_text() {
        let a: CorrelationModel = "ar1{rho=0.6,n=200}".parse().unwrap();
        assert_eq!(a, CorrelationModel::ar1(0.6, 200).unwrap());
        assert_eq!(a.to_string(), "ar1{rho=0.6,n=200}");
        let e: CorrelationModel = "exch{omega=0.7,block=3,groups=20}".parse().unwrap();
        assert_eq!(e.dim(), 60);
        assert_eq!(e.to_string(), "exch{omega=0.7,block=3,groups=20}");
        let u: CorrelationModel = "exch{omega=0.2,sizes=3/2}".parse().unwrap();
        assert_eq!(u.to_string().parse::<CorrelationModel>().unwrap(), u);
        let i: CorrelationModel = "identity{n=60}".parse().unwrap();
        assert_eq!(i, CorrelationModel::identity(60));
        assert!("ar1{rho=2,n=3}".parse::<CorrelationModel>().is_err());
        assert!("ar1{rho=0.2}".parse::<CorrelationModel>().is_err());
    }
}
