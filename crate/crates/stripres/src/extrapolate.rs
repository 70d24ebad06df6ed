//! Truncation-ladder extrapolation.
//!
//! Interface matching converges algebraically in the per-slab truncation N
//! because of the r^(1/2) behavior at Dirichlet-Neumann corner points; the
//! observed error ladder is c1/N + c2/N^1.5 + c3/N^2 + ... . Solver-level
//! quantities are therefore computed on a small ladder of truncations and
//! fitted against that ladder, which buys three to four extra digits at
//! moderate N.

use num_complex::Complex64 as C64;

/// Truncation levels used for an eigenvalue-style solve at top level `n`:
/// roughly {n/2, 2n/3, 5n/6, n}, deduplicated and floored at 6.
pub fn ladder(n: usize) -> Vec<usize> {
    let mut lv: Vec<usize> = [
        (n as f64 / 2.0).round() as usize,
        (2.0 * n as f64 / 3.0).round() as usize,
        (5.0 * n as f64 / 6.0).round() as usize,
        n,
    ]
    .iter()
    .map(|&x| x.max(6))
    .collect();
    lv.sort_unstable();
    lv.dedup();
    lv
}

/// Denser upward ladder {n, 3n/2, 2n, 3n} used for corner-coefficient
/// extraction, where the half-line systems stay small.
pub fn ladder_up(n: usize) -> Vec<usize> {
    let mut lv = vec![
        n,
        (1.5 * n as f64).round() as usize,
        2 * n,
        3 * n,
    ];
    lv.sort_unstable();
    lv.dedup();
    lv
}

/// Exponent set matching the corner-limited error ladder, sized to leave a
/// one-degree-of-freedom margin on small ladders.
pub fn exponents_for(levels: usize) -> Vec<f64> {
    match levels {
        0 | 1 => vec![],
        2 => vec![1.0],
        3 => vec![1.0, 1.5],
        _ => vec![1.0, 1.5, 2.0],
    }
}

/// Least-squares fit of v(N) = v_inf + sum_k c_k N^(-e_k); returns v_inf.
pub fn richardson(levels: &[usize], values: &[C64], exps: &[f64]) -> C64 {
    assert_eq!(levels.len(), values.len());
    if values.is_empty() {
        return C64::new(f64::NAN, f64::NAN);
    }
    if values.len() == 1 || exps.is_empty() {
        return values[values.len() - 1];
    }
    let rows = levels.len();
    let cols = exps.len() + 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows, cols);
    for (i, &n) in levels.iter().enumerate() {
        a[(i, 0)] = 1.0;
        for (j, &e) in exps.iter().enumerate() {
            a[(i, j + 1)] = (n as f64).powf(-e);
        }
    }
    let bre = nalgebra::DVector::<f64>::from_iterator(rows, values.iter().map(|v| v.re));
    let bim = nalgebra::DVector::<f64>::from_iterator(rows, values.iter().map(|v| v.im));
    let ata = a.transpose() * &a;
    let chol = match ata.cholesky() {
        Some(c) => c,
        None => return values[values.len() - 1],
    };
    let xre = chol.solve(&(a.transpose() * bre));
    let xim = chol.solve(&(a.transpose() * bim));
    C64::new(xre[0], xim[0])
}

/// Real-valued convenience wrapper.
pub fn richardson_real(levels: &[usize], values: &[f64], exps: &[f64]) -> f64 {
    let cv: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    richardson(levels, &cv, exps).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_polynomial_ladders_exactly() {
        let levels = [16usize, 24, 32, 48];
        let f = |n: f64| 0.85 + 0.3 / n - 0.2 / n.powf(1.5) + 0.05 / (n * n);
        let vals: Vec<f64> = levels.iter().map(|&n| f(n as f64)).collect();
        let v = richardson_real(&levels, &vals, &[1.0, 1.5, 2.0]);
        assert!((v - 0.85).abs() < 1e-10, "{v}");
    }

    #[test]
    fn ladder_shapes() {
        assert_eq!(ladder(40), vec![20, 27, 33, 40]);
        assert_eq!(ladder_up(64), vec![64, 96, 128, 192]);
        assert_eq!(exponents_for(4), vec![1.0, 1.5, 2.0]);
    }
}
