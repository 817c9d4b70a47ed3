//! Symmetric positive-definite algebra: Cholesky factorization, the cached
//! location/scatter pair, and Mahalanobis distances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Output of [`cholesky`].
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub lower: DMatrix<f64>,
    pub log_det: f64,
    pub inverse: DMatrix<f64>,
}

/// Factorizes a symmetric matrix as `L·Lᵀ`.
///
/// A pivot at or below `p·ε·max(diag)` is treated as degenerate. Pivots above
/// that threshold proceed, with a debug log when the condition estimate is large.
pub fn cholesky(s: &DMatrix<f64>) -> Result<Cholesky> {
    let p = s.nrows();
    if p == 0 || s.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: s.ncols(),
        });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::DomainError("matrix has non-finite entries".into()));
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    for j in 0..p {
        for k in 0..j {
            if (s[(j, k)] - s[(k, j)]).abs() > 1e-12 * scale {
                return Err(Error::DomainError("matrix is not symmetric".into()));
            }
        }
    }

    let max_diag = (0..p).map(|j| s[(j, j)]).fold(0.0_f64, f64::max);
    let threshold = p as f64 * f64::EPSILON * max_diag;
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..p {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }

    let diag = (0..p).map(|j| l[(j, j)]);
    let log_det = 2.0 * diag.clone().map(f64::ln).sum::<f64>();
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let cond = (hi / lo).powi(2);
    if cond > 1e10 {
        log::debug!("ill-conditioned scatter matrix, condition estimate {cond:.3e}");
    }

    // L⁻¹ by forward substitution, then Σ⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = DMatrix::<f64>::zeros(p, p);
    for c in 0..p {
        linv[(c, c)] = 1.0 / l[(c, c)];
        for i in (c + 1)..p {
            let mut v = 0.0;
            for k in c..i {
                v -= l[(i, k)] * linv[(k, c)];
            }
            linv[(i, c)] = v / l[(i, i)];
        }
    }
    let mut inverse = linv.transpose() * &linv;
    symmetrize(&mut inverse);

    Ok(Cholesky {
        lower: l,
        log_det,
        inverse,
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for k in 0..j {
            let v = 0.5 * (m[(j, k)] + m[(k, j)]);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
}

/// Location vector and scatter matrix with cached factorization.
#[derive(Debug, Clone)]
pub struct LocationScatter {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
    precision: DMatrix<f64>,
}

impl LocationScatter {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                found: sigma.nrows(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("location has non-finite entries".into()));
        }
        let Cholesky {
            lower,
            log_det,
            inverse,
        } = cholesky(&sigma)?;
        Ok(Self {
            mu,
            sigma,
            chol: lower,
            log_det,
            precision: inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Squared distance without a dimension check; callers guarantee `x.len() == p`.
    #[inline]
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let p = self.dim();
        let mut y = [0.0_f64; 16];
        let mut heap;
        let y: &mut [f64] = if p <= 16 {
            &mut y[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        let mut acc = 0.0;
        for i in 0..p {
            let mut v = x[i] - self.mu[i];
            for k in 0..i {
                v -= self.chol[(i, k)] * y[k];
            }
            let yi = v / self.chol[(i, i)];
            y[i] = yi;
            acc += yi * yi;
        }
        acc
    }

    /// Mahalanobis distance of `x` from this location under this scatter.
    pub fn mahalanobis(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.mahalanobis_sq(x).sqrt())
    }
}

/// Free-function form of [`LocationScatter::mahalanobis`].
pub fn mahalanobis(x: &[f64], ls: &LocationScatter) -> Result<f64> {
    ls.mahalanobis(x)
}
