//! Complex resonances of the finite-barrier strip: zeros of the five-slab
//! matching determinant with outgoing conditions on both open ends.

use num_complex::Complex64 as C64;

use crate::error::{Result, SolverError};
use crate::slab::{
    assemble, nullspace_amplitudes, scaled_det_at, Bc, EndCondition, FieldSolution,
    ScaledDeterminant, Slab, SlabStack,
};
use crate::spectral::SpectralPoint;

/// Two finite barriers of lengths l_plus - a and l_minus - a flanking the
/// central window of half-width a; the channel is open beyond both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierGeometry {
    pub a: f64,
    pub l_plus: f64,
    pub l_minus: f64,
}

impl BarrierGeometry {
    pub fn new(a: f64, l_plus: f64, l_minus: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(SolverError::InvalidInput(format!(
                "window half-width a = {a} violates a > 0"
            )));
        }
        if !(a < l_plus && a < l_minus) {
            return Err(SolverError::InvalidInput(format!(
                "barrier ends l+ = {l_plus}, l- = {l_minus} must exceed a = {a}"
            )));
        }
        Ok(Self { a, l_plus, l_minus })
    }

    /// The five-slab stack: open | barrier | window | barrier | open.
    pub fn stack(&self, truncation: usize) -> SlabStack {
        SlabStack::new(
            vec![
                Slab::semi_left(-self.l_minus, Bc::Neumann, EndCondition::Outgoing),
                Slab::finite(-self.l_minus, -self.a, Bc::Dirichlet),
                Slab::finite(-self.a, self.a, Bc::Neumann),
                Slab::finite(self.a, self.l_plus, Bc::Dirichlet),
                Slab::semi_right(self.l_plus, Bc::Neumann, EndCondition::Outgoing),
            ],
            truncation,
        )
    }

    pub fn swapped(&self) -> Self {
        Self {
            a: self.a,
            l_plus: self.l_minus,
            l_minus: self.l_plus,
        }
    }
}

/// A converged resonance.
#[derive(Debug, Clone)]
pub struct Resonance {
    pub j: usize,
    pub lambda: C64,
    /// Smallest singular value of M(lambda) relative to the largest.
    pub residual: f64,
    /// Outgoing amplitudes on the right and left open ends.
    pub c_plus: C64,
    pub c_minus: C64,
    pub iterations: usize,
    pub truncation: usize,
    pub seed: C64,
}

fn check_window(lambda: C64) -> Result<()> {
    if !(lambda.re > 0.25 && lambda.re < 1.0) || !(lambda.im > -0.25 && lambda.im < 0.05) {
        return Err(SolverError::InvalidInput(format!(
            "spectral point {lambda} left the resonance search window"
        )));
    }
    Ok(())
}

/// Scaled determinant of the five-slab system at a spectral point.
pub fn resonance_det(
    geom: &BarrierGeometry,
    s: SpectralPoint,
    truncation: usize,
) -> Result<ScaledDeterminant> {
    check_window(s.lambda)?;
    scaled_det_at(&geom.stack(truncation), s)
}

/// Muller iteration on the rescaled determinant d = phase * exp(log_abs - c)
/// with the offset c anchored at the seed.
fn muller<F: FnMut(C64) -> Result<C64>>(
    mut f: F,
    seed: C64,
    tol: f64,
    max_iter: usize,
) -> Result<(C64, usize)> {
    let h = 1e-5 * seed.norm().max(1e-3);
    let mut z0 = seed + C64::new(h, 0.0);
    let mut z1 = seed - C64::new(h, 0.0);
    let mut z2 = seed;
    let mut f0 = f(z0)?;
    let mut f1 = f(z1)?;
    let mut f2 = f(z2)?;
    for it in 1..=max_iter {
        let q = if z1 != z0 {
            (z2 - z1) / (z1 - z0)
        } else {
            C64::new(0.5, 0.0)
        };
        let a = q * f2 - q * (1.0 + q) * f1 + q * q * f0;
        let b = (2.0 * q + 1.0) * f2 - (1.0 + q) * (1.0 + q) * f1 + q * q * f0;
        let c = (1.0 + q) * f2;
        let disc = (b * b - 4.0 * a * c).sqrt();
        let d1 = b + disc;
        let d2 = b - disc;
        let den = if d1.norm() >= d2.norm() { d1 } else { d2 };
        let den = if den.norm() == 0.0 {
            C64::new(1e-30, 0.0)
        } else {
            den
        };
        let dz = -(z2 - z1) * 2.0 * c / den;
        let z3 = z2 + dz;
        z0 = z1;
        z1 = z2;
        z2 = z3;
        f0 = f1;
        f1 = f2;
        f2 = f(z3)?;
        if dz.norm() < tol {
            return Ok((z2, it));
        }
    }
    Err(SolverError::NoConvergence(max_iter))
}

/// Argument-principle winding count of the determinant phase around a
/// circle, sampled at `npts` points.
fn winding_count<F: FnMut(C64) -> Result<C64>>(
    mut phase_of: F,
    center: C64,
    radius: f64,
    npts: usize,
) -> Result<i64> {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut first = 0.0;
    for i in 0..=npts {
        let t = 2.0 * std::f64::consts::PI * (i % npts) as f64 / npts as f64;
        let z = center + radius * C64::new(t.cos(), t.sin());
        let arg = if i < npts {
            phase_of(z)?.arg()
        } else {
            first
        };
        if i == 0 {
            first = arg;
        }
        if let Some(p) = prev {
            let mut d = arg - p;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            total += d;
        }
        prev = Some(arg);
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

/// Locate the resonance near `seed` by Muller iteration, then verify it by
/// the singular-value residual and a 16-point winding count.
pub fn find_resonance(
    geom: &BarrierGeometry,
    seed: C64,
    truncation: usize,
    tol: f64,
) -> Result<Resonance> {
    if tol < 1e-12 {
        return Err(SolverError::InvalidInput(format!(
            "tolerance {tol} violates tol >= 1e-12"
        )));
    }
    check_window(seed)?;
    let stack = geom.stack(truncation);
    let anchor = scaled_det_at(&stack, SpectralPoint::new(seed))?.log_abs;
    let mut eval = |z: C64| -> Result<C64> {
        let d = scaled_det_at(&stack, SpectralPoint::new(z))?;
        Ok(d.phase * C64::new((d.log_abs - anchor).exp(), 0.0))
    };
    let (lambda, iterations) = muller(&mut eval, seed, tol, 100)?;

    let assembled = assemble(&stack, SpectralPoint::new(lambda))?;
    let field = nullspace_amplitudes(&assembled)?;
    if field.residual >= 1e-9 {
        return Err(SolverError::NotARoot(field.residual));
    }

    // uniqueness guard: one zero inside the verification circle
    let radius = (5.0 * (seed - lambda).norm()).max(100.0 * tol);
    let mut phase_of = |z: C64| -> Result<C64> {
        Ok(scaled_det_at(&stack, SpectralPoint::new(z))?.phase)
    };
    let w = winding_count(&mut phase_of, lambda, radius, 16)?;
    if w != 1 {
        return Err(SolverError::MultipleRoots(w));
    }

    let c_minus = field.mode_amplitude(0, 1).unwrap_or_default();
    let c_plus = field
        .mode_amplitude(stack.slabs.len() - 1, 1)
        .unwrap_or_default();
    Ok(Resonance {
        j: 0,
        lambda,
        residual: field.residual,
        c_plus,
        c_minus,
        iterations,
        truncation,
        seed,
    })
}

/// Reconstruct the resonance field and read off the outgoing amplitudes.
pub fn resonance_field(
    geom: &BarrierGeometry,
    res: &Resonance,
    truncation: usize,
) -> Result<(FieldSolution, C64, C64)> {
    let stack = geom.stack(truncation);
    let assembled = assemble(&stack, SpectralPoint::new(res.lambda))?;
    let field = nullspace_amplitudes(&assembled)?;
    let c_minus = field.mode_amplitude(0, 1).unwrap_or_default();
    let c_plus = field
        .mode_amplitude(stack.slabs.len() - 1, 1)
        .unwrap_or_default();
    Ok((field, c_plus, c_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::predict;
    use crate::bound::{eigenfunction, find_eigenvalues, WindowGeometry};
    use crate::junction::solve_junction;

    fn pipeline(a: f64, j: usize, l: f64, n: usize) -> (Resonance, f64) {
        let g = WindowGeometry::new(a).unwrap();
        let ests = find_eigenvalues(g, n, 1e-11).unwrap();
        let est = &ests[j - 1];
        let st = eigenfunction(g, est, n).unwrap();
        let jn = solve_junction(st.lambda_raw, n.max(16)).unwrap();
        let pred = predict(st.lambda_raw, st.psi_raw, jn.k_minus, l, l);
        let geom = BarrierGeometry::new(a, l, l).unwrap();
        let res = find_resonance(&geom, pred.lambda_hat, n, 1e-13).unwrap();
        (res, st.lambda_raw)
    }

    #[test]
    fn resonance_sits_below_the_real_axis() {
        let (res, lam) = pipeline(1.0, 1, 10.0, 24);
        assert!(res.lambda.im < 0.0, "Im = {}", res.lambda.im);
        assert!(res.lambda.re > 0.25 && res.lambda.re < 1.0);
        assert!(res.residual < 1e-9);
        assert!(res.iterations < 100);
        assert!((res.lambda.re - lam).abs() < 1e-3);
        assert!(res.c_plus.norm() > 0.0 && res.c_minus.norm() > 0.0);
    }

    #[test]
    fn swapping_barrier_lengths_leaves_the_resonance_fixed() {
        let g = WindowGeometry::new(1.0).unwrap();
        let est = &find_eigenvalues(g, 16, 1e-11).unwrap()[0];
        let st = eigenfunction(g, est, 16).unwrap();
        let jn = solve_junction(st.lambda_raw, 16).unwrap();
        let geom = BarrierGeometry::new(1.0, 12.0, 8.0).unwrap();
        let pred = predict(st.lambda_raw, st.psi_raw, jn.k_minus, 12.0, 8.0);
        let r1 = find_resonance(&geom, pred.lambda_hat, 16, 1e-13).unwrap();
        let r2 = find_resonance(&geom.swapped(), pred.lambda_hat, 16, 1e-13).unwrap();
        assert!(
            (r1.lambda - r2.lambda).norm() <= 1e-10,
            "swap moved the resonance by {:e}",
            (r1.lambda - r2.lambda).norm()
        );
    }

    #[test]
    fn resonance_approaches_the_bound_state_with_barrier_length() {
        let mut prev = f64::INFINITY;
        for l in [6.0, 8.0, 10.0, 12.0] {
            let (res, lam) = pipeline(1.0, 1, l, 16);
            let dist = (res.lambda - C64::new(lam, 0.0)).norm();
            assert!(dist < prev, "distance grew at l = {l}");
            prev = dist;
        }
    }

    #[test]
    fn symmetric_geometry_fields_have_parity() {
        // even ground state: equal outgoing amplitudes
        let (res, _) = pipeline(1.0, 1, 8.0, 16);
        assert!(
            (res.c_plus - res.c_minus).norm() <= 1e-8 * res.c_plus.norm(),
            "even split {:e}",
            (res.c_plus - res.c_minus).norm()
        );
        // odd second state of a wide window: opposite amplitudes
        let (res, _) = pipeline(4.0, 2, 8.0, 16);
        assert!(
            (res.c_plus + res.c_minus).norm() <= 1e-8 * res.c_plus.norm(),
            "odd split {:e}",
            (res.c_plus + res.c_minus).norm()
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BarrierGeometry::new(2.0, 1.5, 8.0).is_err());
        assert!(BarrierGeometry::new(-1.0, 2.0, 2.0).is_err());
        let geom = BarrierGeometry::new(1.0, 8.0, 8.0).unwrap();
        assert!(find_resonance(&geom, C64::new(0.85, -1e-6), 16, 1e-14).is_err());
        assert!(resonance_det(&geom, SpectralPoint::new(C64::new(1.5, 0.0)), 16).is_err());
    }
}
