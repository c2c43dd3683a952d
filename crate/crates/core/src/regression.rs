//! Norm-constrained least squares and elliptical bonuses.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full refactorization period of the cached inverse.
pub const REFACTOR_EVERY: usize = 512;

/// `Sigma = lambda I + sum phi phi^T` with a cached inverse kept current by
/// Sherman–Morrison updates.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    lambda: f64,
    sigma: DMatrix<f64>,
    inverse: DMatrix<f64>,
    samples: usize,
    since_refactor: usize,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("covariance dimension must be positive".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParams(format!("regularizer must be positive, got {lambda}")));
        }
        Ok(Self {
            lambda,
            sigma: DMatrix::identity(dim, dim) * lambda,
            inverse: DMatrix::identity(dim, dim) / lambda,
            samples: 0,
            since_refactor: 0,
        })
    }

    /// `lambda I + gram`, inverted directly.
    pub fn from_gram(gram: &DMatrix<f64>, lambda: f64, samples: usize) -> Result<Self> {
        let mut acc = Self::new(gram.nrows(), lambda)?;
        acc.sigma += gram;
        acc.samples = samples;
        acc.refactor();
        Ok(acc)
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Adds `phi phi^T`.
    pub fn add(&mut self, phi: &[f64]) {
        let v = DVector::from_column_slice(phi);
        self.sigma.ger(1.0, &v, &v, 1.0);
        self.samples += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
            return;
        }
        let u = &self.inverse * &v;
        let denom = 1.0 + v.dot(&u);
        self.inverse.ger(-1.0 / denom, &u, &u, 1.0);
    }

    /// Recomputes the inverse from a Cholesky factorization of `Sigma`.
    pub fn refactor(&mut self) {
        self.since_refactor = 0;
        self.sigma = (&self.sigma + self.sigma.transpose()) * 0.5;
        if let Some(chol) = self.sigma.clone().cholesky() {
            self.inverse = chol.inverse();
        }
    }

    /// `sqrt(phi^T Sigma^{-1} phi)`.
    pub fn bonus(&self, phi: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for r in 0..d {
            if phi[r] == 0.0 {
                continue;
            }
            let row: f64 = phi.iter().enumerate().map(|(c, p)| self.inverse[(r, c)] * p).sum();
            q += phi[r] * row;
        }
        q.max(0.0).sqrt()
    }
}

/// `||phi||_{Sigma^{-1}}`; the confidence multiplier is applied by callers.
pub fn bonus(acc: &CovarianceAccumulator, phi: &[f64]) -> f64 {
    acc.bonus(phi)
}

/// `proj_[0, H - step](x)` for a 0-based `step` in `0..=H`.
pub fn clip_q(x: f64, step: usize, horizon: usize) -> f64 {
    x.clamp(0.0, (horizon - step) as f64)
}

/// Solution of a constrained least-squares problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub theta: Vec<f64>,
    pub radius: f64,
    /// KKT multiplier of the norm constraint (0 when inactive).
    pub multiplier: f64,
}

impl RegressionFit {
    pub fn predict(&self, phi: &[f64]) -> f64 {
        self.theta.iter().zip(phi).map(|(t, x)| t * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Sufficient statistics `G = sum phi phi^T` and `b = sum y phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsMoments {
    pub gram: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl LsMoments {
    pub fn new(dim: usize) -> Self {
        Self { gram: DMatrix::zeros(dim, dim), rhs: DVector::zeros(dim) }
    }

    pub fn add(&mut self, phi: &[f64], y: f64) {
        let v = DVector::from_column_slice(phi);
        self.gram.ger(1.0, &v, &v, 1.0);
        self.rhs.axpy(y, &v, 1.0);
    }
}

/// Eigendecomposition of a Gram matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct ConstrainedLeastSquares {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    threshold: f64,
}

impl ConstrainedLeastSquares {
    /// Eigenvalues at or below `1e-12 * max` are treated as zero.
    pub fn new(gram: &DMatrix<f64>) -> Result<Self> {
        if gram.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gram matrix"));
        }
        let sym = (gram + gram.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let top = eigenvalues.iter().copied().fold(0.0, f64::max);
        Ok(Self { eigenvalues, eigenvectors: eig.eigenvectors, threshold: 1e-12 * top })
    }

    /// `argmin_{||theta|| <= radius} theta^T G theta - 2 b^T theta`.
    ///
    /// The unconstrained minimum-norm solution is returned if feasible;
    /// otherwise the multiplier `mu` with `||(G + mu I)^{-1} b|| = radius` is
    /// found by safeguarded Newton on the secular equation
    /// `1/||theta(mu)|| = 1/radius`, falling back to bisection.
    pub fn solve(&self, rhs: &DVector<f64>, radius: f64) -> Result<RegressionFit> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParams(format!("radius must be positive, got {radius}")));
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("regression targets"));
        }
        let c: Vec<f64> = (self.eigenvectors.transpose() * rhs).iter().copied().collect();
        let lam = &self.eigenvalues;
        let free: Vec<f64> =
            c.iter().zip(lam).map(|(&ck, &lk)| if lk > self.threshold { ck / lk } else { 0.0 }).collect();
        if norm(&free) <= radius {
            return Ok(self.fit(&free, radius, 0.0));
        }

        let norm_at = |mu: f64| -> (f64, f64) {
            // ||theta(mu)|| and its derivative in mu.
            let (mut n2, mut dn2) = (0.0, 0.0);
            for (&ck, &lk) in c.iter().zip(lam) {
                let den = lk + mu;
                n2 += ck * ck / (den * den);
                dn2 += -2.0 * ck * ck / (den * den * den);
            }
            let n = n2.sqrt();
            (n, dn2 / (2.0 * n))
        };
        let (mut lo, mut hi) = (0.0, norm(&c) / radius);
        let mut mu = 0.5 * hi;
        for _ in 0..200 {
            let (n, dn) = norm_at(mu);
            if (n - radius).abs() <= 1e-13 * radius || hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
            if n > radius {
                lo = mu;
            } else {
                hi = mu;
            }
            // Newton on f(mu) = 1/n - 1/radius, which is nearly linear in mu.
            let f = 1.0 / n - 1.0 / radius;
            let df = -dn / (n * n);
            let step = mu - f / df;
            mu = if df > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        }
        let mut y: Vec<f64> = c.iter().zip(lam).map(|(&ck, &lk)| ck / (lk + mu)).collect();
        let n = norm(&y);
        if n > radius {
            y.iter_mut().for_each(|x| *x *= radius / n);
        }
        Ok(self.fit(&y, radius, mu))
    }

    fn fit(&self, coords: &[f64], radius: f64, multiplier: f64) -> RegressionFit {
        let theta = &self.eigenvectors * DVector::from_column_slice(coords);
        RegressionFit { theta: theta.iter().copied().collect(), radius, multiplier }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Global minimizer of `sum (<phi, theta> - y)^2` over `||theta|| <= radius`.
pub fn fit_constrained_ls<'a, I>(dim: usize, samples: I, radius: f64) -> Result<RegressionFit>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut moments = LsMoments::new(dim);
    for (phi, y) in samples {
        if phi.len() != dim {
            return Err(Error::ShapeMismatch(format!("feature of length {} != {dim}", phi.len())));
        }
        if !y.is_finite() || phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("regression sample"));
        }
        moments.add(phi, y);
    }
    ConstrainedLeastSquares::new(&moments.gram)?.solve(&moments.rhs, radius)
}

/// `sum (<phi, theta> - y)^2`.
pub fn ls_objective<'a, I>(samples: I, theta: &[f64]) -> f64
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    samples
        .into_iter()
        .map(|(phi, y)| {
            let r: f64 = phi.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - y;
            r * r
        })
        .sum()
}
