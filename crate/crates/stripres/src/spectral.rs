//! Branch-fixed square roots, transverse mode bases and their overlap matrix.
//!
//! The strip has width pi with a Dirichlet condition on the top boundary.
//! Two transverse families appear, depending on the lower boundary
//! condition of a slab:
//!
//! * `DD` (Dirichlet bottom): sin(n x2), transverse eigenvalue n^2;
//! * `ND` (Neumann bottom): cos((m - 1/2) x2), transverse eigenvalue (m - 1/2)^2.
//!
//! Both families are orthogonal on (0, pi) with squared norm pi/2, so all
//! projections below carry the weight 2/pi that makes each family
//! orthonormal.

use num_complex::Complex64 as C64;

use crate::error::{Result, SolverError};

/// Complex spectral parameter with the branch convention attached.
///
/// For resonance searches Re(lambda) lies in (1/4, 1) and Im(lambda) <= 0;
/// bound-state searches use real lambda in (1/4, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub lambda: C64,
}

impl SpectralPoint {
    pub fn new(lambda: C64) -> Self {
        Self { lambda }
    }

    pub fn real(lambda: f64) -> Self {
        Self {
            lambda: C64::new(lambda, 0.0),
        }
    }
}

/// The two transverse families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeFamily {
    /// sin(n x2), Dirichlet on both horizontal boundaries.
    DD,
    /// cos((m - 1/2) x2), Neumann bottom / Dirichlet top.
    ND,
}

/// A single transverse mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub family: ModeFamily,
    /// 1-based index within the family.
    pub index: usize,
}

impl ModeIndex {
    pub fn new(family: ModeFamily, index: usize) -> Self {
        assert!(index >= 1, "mode index must be >= 1");
        Self { family, index }
    }

    /// Transverse eigenvalue: n^2 for DD, (m - 1/2)^2 for ND.
    pub fn transverse_eigenvalue(self) -> f64 {
        match self.family {
            ModeFamily::DD => (self.index * self.index) as f64,
            ModeFamily::ND => {
                let m = self.index as f64 - 0.5;
                m * m
            }
        }
    }

    /// The transverse profile evaluated at x2.
    pub fn eval(self, x2: f64) -> f64 {
        match self.family {
            ModeFamily::DD => (self.index as f64 * x2).sin(),
            ModeFamily::ND => ((self.index as f64 - 0.5) * x2).cos(),
        }
    }
}

/// Truncated two-family mode bookkeeping plus the cached overlap matrix.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub truncation: usize,
    overlap: Vec<f64>,
}

impl ModeSystem {
    pub fn new(truncation: usize) -> Self {
        let mut overlap = vec![0.0; truncation * truncation];
        for n in 1..=truncation {
            for m in 1..=truncation {
                overlap[(n - 1) * truncation + (m - 1)] = overlap_entry(n, m);
            }
        }
        Self {
            truncation,
            overlap,
        }
    }

    /// C[n, m] = (2/pi) * Int_0^pi sin(n x2) cos((m - 1/2) x2) dx2.
    pub fn overlap(&self, n: usize, m: usize) -> f64 {
        self.overlap[(n - 1) * self.truncation + (m - 1)]
    }
}

/// Principal square root with the branch fixed by sqrt(1) = 1 and the cut
/// along the negative real axis.
///
/// Returns `BranchCutHit` when the argument has negative real part and
/// imaginary part within 1e-12 of zero; such arguments signal an invalid
/// spectral point for the parameter ranges this solver uses.
pub fn sqrt_branch(z: C64) -> Result<C64> {
    if z.re < 0.0 && z.im.abs() <= 1e-12 {
        return Err(SolverError::BranchCutHit(z));
    }
    Ok(z.sqrt())
}

/// Longitudinal exponent mu = sqrt(t - lambda) for a transverse eigenvalue t.
///
/// For the propagating ND mode (t = 1/4 with Re lambda > 1/4) callers use
/// the oscillatory factor exp(+/- i k x1) with k = sqrt_branch(lambda - 1/4)
/// instead; this function always reports sqrt_branch(t - lambda).
pub fn longitudinal_exponent(mode: ModeIndex, s: SpectralPoint) -> Result<C64> {
    sqrt_branch(C64::new(mode.transverse_eigenvalue(), 0.0) - s.lambda)
}

/// Closed-form overlap (2/pi) Int_0^pi sin(n x2) cos((m - 1/2) x2) dx2
/// = (2/pi) n / (n^2 - (m - 1/2)^2).
pub fn overlap_entry(n: usize, m: usize) -> f64 {
    let nf = n as f64;
    let mf = m as f64 - 0.5;
    (2.0 / std::f64::consts::PI) * nf / (nf * nf - mf * mf)
}
