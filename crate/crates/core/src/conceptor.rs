//! Conceptors: soft projections `C = R (R + α⁻² I)⁻¹` onto the state-space
//! ellipsoid visited by a pattern, where `R` is the state correlation
//! matrix and `α` the aperture.
//!
//! A conceptor keeps its eigendecomposition, so aperture rescaling and the
//! quota are computed from the spectrum alone.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::esn::StateSeries;
use crate::linalg::{self, Matrix};

pub const DEFAULT_APERTURE: f64 = 10.0;

/// Most negative eigenvalue tolerated when treating a matrix as PSD.
const PSD_TOL: f64 = 1e-8;
/// Largest entry of `VᵀV - I` accepted when loading serialized eigenvectors.
const LOAD_FIDELITY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConceptorRepr", into = "ConceptorRepr")]
pub struct Conceptor {
    source: String,
    aperture: f64,
    n_states: usize,
    dim: usize,
    /// Retained eigenvalues, descending. Directions outside the numerical
    /// range of the correlation matrix have eigenvalue zero and are dropped.
    eigenvalues: Vec<f64>,
    /// `dim × r`; column `j` is the eigenvector of `eigenvalues[j]`.
    eigenvectors: Matrix,
}

/// Wire form: the `dim × r` eigenvector matrix flattened row-major.
#[derive(Serialize, Deserialize)]
struct ConceptorRepr {
    source: String,
    aperture: f64,
    n_states: usize,
    dim: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<f64>,
}

impl From<Conceptor> for ConceptorRepr {
    fn from(c: Conceptor) -> Self {
        ConceptorRepr {
            source: c.source,
            aperture: c.aperture,
            n_states: c.n_states,
            dim: c.dim,
            eigenvalues: c.eigenvalues,
            eigenvectors: c.eigenvectors.into_vec(),
        }
    }
}

impl TryFrom<ConceptorRepr> for Conceptor {
    type Error = Error;

    fn try_from(r: ConceptorRepr) -> Result<Self> {
        let rank = r.eigenvalues.len();
        let vectors = Matrix::new(r.dim, rank, r.eigenvectors)?;
        let vtv = vectors.transpose().matmul(&vectors)?;
        let dev = vtv.max_abs_deviation_from_identity();
        ensure!(
            dev < LOAD_FIDELITY,
            Validation,
            "stored eigenvectors are not orthonormal (deviation {dev:e})"
        );
        Conceptor::from_parts(r.source, r.aperture, r.n_states, r.eigenvalues, vectors)
    }
}

/// `R = (1/L) Σ x(n) x(n)ᵀ` over the rows of `series`.
pub fn correlation(series: &StateSeries) -> Result<Matrix> {
    correlation_of(series.states())
}

pub fn correlation_of(states: &Matrix) -> Result<Matrix> {
    ensure!(
        states.rows() >= 1,
        Validation,
        "correlation of an empty state set"
    );
    let mut r = linalg::gram(states);
    r.scale(1.0 / states.rows() as f64);
    let n = r.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (r.get(i, j) + r.get(j, i));
            r.set(i, j, m);
            r.set(j, i, m);
        }
    }
    Ok(r)
}

/// Conceptor eigenvalue for a correlation eigenvalue `s`.
#[inline]
pub fn conceptor_eigenvalue(s: f64, aperture: f64) -> f64 {
    s / (s + aperture.powi(-2))
}

pub fn compute_conceptor(r: &Matrix, aperture: f64) -> Result<Conceptor> {
    compute_conceptor_from(r, aperture, "unnamed", 0)
}

/// Conceptor of a correlation matrix, tagged with its provenance.
pub fn compute_conceptor_from(
    r: &Matrix,
    aperture: f64,
    source: impl Into<String>,
    n_states: usize,
) -> Result<Conceptor> {
    ensure!(
        aperture > 0.0 && aperture.is_finite(),
        Validation,
        "aperture must be positive and finite, got {aperture}"
    );
    let eig = linalg::sym_eig(r)?;
    let n = r.rows();
    if let Some(&min) = eig.values.last() {
        ensure!(
            min >= -PSD_TOL,
            Validation,
            "correlation matrix is not positive semidefinite (eigenvalue {min:e})"
        );
    }
    let s_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = s_max * n as f64 * f64::EPSILON;
    let rank = eig.values.iter().take_while(|&&s| s > cutoff).count();
    let sigma: Vec<f64> = eig.values[..rank]
        .iter()
        .map(|&s| conceptor_eigenvalue(s, aperture))
        .collect();
    let vectors = Matrix::from_fn(n, rank, |i, j| eig.vectors.get(i, j));
    Ok(Conceptor {
        source: source.into(),
        aperture,
        n_states,
        dim: n,
        eigenvalues: sigma,
        eigenvectors: vectors,
    })
}

/// Conceptor of the states in `series`.
pub fn conceptor_of_series(
    series: &StateSeries,
    aperture: f64,
    source: impl Into<String>,
) -> Result<Conceptor> {
    let r = correlation(series)?;
    compute_conceptor_from(&r, aperture, source, series.len())
}

impl Conceptor {
    /// Builds a conceptor from an explicit (possibly thin) eigendecomposition.
    /// Eigenvalues must lie in `[0, 1]`; the closed upper end admits the
    /// identity for exercising replay dynamics.
    pub fn from_parts(
        source: impl Into<String>,
        aperture: f64,
        n_states: usize,
        eigenvalues: Vec<f64>,
        eigenvectors: Matrix,
    ) -> Result<Self> {
        ensure!(
            eigenvectors.cols() == eigenvalues.len() && eigenvectors.rows() >= eigenvalues.len(),
            Dimension,
            "{} eigenvalues but eigenvectors are {:?}",
            eigenvalues.len(),
            eigenvectors.shape()
        );
        ensure!(
            eigenvalues.iter().all(|s| (0.0..=1.0).contains(s)),
            Validation,
            "conceptor eigenvalues must lie in [0, 1]"
        );
        ensure!(
            aperture > 0.0,
            Validation,
            "aperture must be positive, got {aperture}"
        );
        Ok(Self {
            source: source.into(),
            aperture,
            n_states,
            dim: eigenvectors.rows(),
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            source: "zero".into(),
            aperture: 1.0,
            n_states: 0,
            dim: n,
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(n, 0),
        }
    }

    /// Identity; eigenvalue 1 corresponds to infinite aperture.
    pub fn identity(n: usize) -> Self {
        Self {
            source: "identity".into(),
            aperture: f64::INFINITY,
            n_states: 0,
            dim: n,
            eigenvalues: vec![1.0; n],
            eigenvectors: Matrix::identity(n),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of retained eigenpairs.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Retained eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Full spectrum of length `dim`, zero-padded.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut s = self.eigenvalues.clone();
        s.resize(self.dim, 0.0);
        s
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// Dense `C = V diag(σ) Vᵀ`.
    pub fn matrix(&self) -> Matrix {
        linalg::reconstruct(&self.eigenvectors, &self.eigenvalues)
    }

    /// `C x` through the eigenbasis.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let v = &self.eigenvectors;
        let mut coeff = vec![0.0; self.rank()];
        for (i, xi) in x.iter().enumerate() {
            for (c, vij) in coeff.iter_mut().zip(v.row(i)) {
                *c += vij * xi;
            }
        }
        for (c, s) in coeff.iter_mut().zip(&self.eigenvalues) {
            *c *= s;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = linalg::dot(v.row(i), &coeff);
        }
    }

    /// Mean eigenvalue, `trace(C) / N`.
    pub fn quota(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        self.eigenvalues.iter().sum::<f64>() / self.dim as f64
    }

    /// The conceptor of the same correlation at aperture `α·γ`.
    pub fn rescale_aperture(&self, gamma: f64) -> Result<Conceptor> {
        ensure!(
            gamma > 0.0 && gamma.is_finite(),
            Validation,
            "aperture factor must be positive and finite, got {gamma}"
        );
        ensure!(
            self.eigenvalues.iter().all(|&s| s < 1.0),
            Validation,
            "cannot rescale a conceptor with a unit eigenvalue"
        );
        let g2 = gamma.powi(-2);
        let sigma = self
            .eigenvalues
            .iter()
            .map(|&s| if s == 0.0 { 0.0 } else { s / (s + g2 * (1.0 - s)) })
            .collect();
        Ok(Conceptor {
            source: self.source.clone(),
            aperture: self.aperture * gamma,
            n_states: self.n_states,
            dim: self.dim,
            eigenvalues: sigma,
            eigenvectors: self.eigenvectors.clone(),
        })
    }
}

pub fn quota(c: &Conceptor) -> f64 {
    c.quota()
}

pub fn rescale_aperture(c: &Conceptor, gamma: f64) -> Result<Conceptor> {
    c.rescale_aperture(gamma)
}
