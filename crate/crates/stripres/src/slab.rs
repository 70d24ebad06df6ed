//! Mode-matching assembly for ordered stacks of constant-boundary slabs.
//!
//! Each slab solves the Helmholtz equation exactly in its own transverse
//! basis; continuity of the field and of its x1-derivative is imposed at
//! every interface, projected onto truncated test families. All
//! longitudinal factors are anchored at slab ends so that no assembled
//! entry exceeds max(1, |mu|) in modulus no matter how long a slab is.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Result, SolverError};
use crate::spectral::{sqrt_branch, ModeFamily, ModeIndex, ModeSystem, SpectralPoint};

/// Lower boundary condition of a slab. The top boundary is always Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

impl Bc {
    pub fn family(self) -> ModeFamily {
        match self {
            Bc::Dirichlet => ModeFamily::DD,
            Bc::Neumann => ModeFamily::ND,
        }
    }
}

/// Behavior prescribed at infinity for a semi-infinite slab.
///
/// `Incoming` reverses the propagating factor of `Outgoing`; it exists for
/// conjugation checks. `Bounded` keeps evanescent modes decaying and gives
/// the propagating mode the outgoing factor (limiting absorption).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndCondition {
    DecayOnly,
    Outgoing,
    Incoming,
    Bounded,
}

/// Symmetry wall placed at the left end of the first slab: `Even` imposes
/// a Neumann plane, `Odd` a Dirichlet plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

/// One slab: an x1-interval with a fixed lower boundary condition.
#[derive(Debug, Clone, Copy)]
pub struct Slab {
    pub x_left: f64,
    pub x_right: f64,
    pub lower_bc: Bc,
    /// Required when the slab is semi-infinite.
    pub end_condition: Option<EndCondition>,
    /// Symmetry plane at `x_left`; only valid on a finite first slab.
    pub wall: Option<Parity>,
}

impl Slab {
    pub fn finite(x_left: f64, x_right: f64, lower_bc: Bc) -> Self {
        Self {
            x_left,
            x_right,
            lower_bc,
            end_condition: None,
            wall: None,
        }
    }

    pub fn walled(x_left: f64, x_right: f64, lower_bc: Bc, parity: Parity) -> Self {
        Self {
            x_left,
            x_right,
            lower_bc,
            end_condition: None,
            wall: Some(parity),
        }
    }

    pub fn semi_left(x_right: f64, lower_bc: Bc, end: EndCondition) -> Self {
        Self {
            x_left: f64::NEG_INFINITY,
            x_right,
            lower_bc,
            end_condition: Some(end),
            wall: None,
        }
    }

    pub fn semi_right(x_left: f64, lower_bc: Bc, end: EndCondition) -> Self {
        Self {
            x_left,
            x_right: f64::INFINITY,
            lower_bc,
            end_condition: Some(end),
            wall: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x_left.is_finite() && self.x_right.is_finite()
    }
}

/// Which test family receives the derivative-continuity rows.
///
/// `MixedFamily` tests value continuity against the Dirichlet (sin) family
/// and derivative continuity against the Neumann (cos) family; with this
/// pairing the discrete solution conserves the longitudinal flux across
/// interfaces exactly. `DirichletTests` projects both conditions onto the
/// sin family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionScheme {
    #[default]
    MixedFamily,
    DirichletTests,
}

/// Ordered slabs plus truncation and projection choices.
#[derive(Debug, Clone)]
pub struct SlabStack {
    pub slabs: Vec<Slab>,
    pub truncation: usize,
    pub projection: ProjectionScheme,
}

impl SlabStack {
    pub fn new(slabs: Vec<Slab>, truncation: usize) -> Self {
        Self {
            slabs,
            truncation,
            projection: ProjectionScheme::default(),
        }
    }

    pub fn with_projection(mut self, projection: ProjectionScheme) -> Self {
        self.projection = projection;
        self
    }

    /// Interface coordinates shared by adjacent slabs.
    pub fn interfaces(&self) -> Vec<f64> {
        self.slabs
            .windows(2)
            .map(|w| w[0].x_right)
            .collect()
    }

    pub fn matrix_dim(&self) -> usize {
        2 * self.truncation * (self.slabs.len() - 1)
    }

    fn validate(&self) -> Result<()> {
        if self.truncation < 4 {
            return Err(SolverError::InvalidInput(format!(
                "truncation N = {} violates N >= 4",
                self.truncation
            )));
        }
        if self.slabs.len() < 2 {
            return Err(SolverError::InvalidInput(
                "a stack needs at least two slabs".into(),
            ));
        }
        for (i, s) in self.slabs.iter().enumerate() {
            if s.x_left >= s.x_right {
                return Err(SolverError::InvalidInput(format!(
                    "slab {i} has x_left >= x_right"
                )));
            }
            if s.is_finite() && s.x_right - s.x_left < 1e-8 {
                return Err(SolverError::DegenerateStack(s.x_right - s.x_left));
            }
            let interior = i > 0 && i + 1 < self.slabs.len();
            if interior && !s.is_finite() {
                return Err(SolverError::InvalidInput(format!(
                    "interior slab {i} must be finite"
                )));
            }
            if !s.is_finite() && s.end_condition.is_none() {
                return Err(SolverError::InvalidInput(format!(
                    "semi-infinite slab {i} needs an end condition"
                )));
            }
            if s.wall.is_some() && (i != 0 || !s.x_left.is_finite()) {
                return Err(SolverError::InvalidInput(
                    "a symmetry wall is only valid at the finite left end of the first slab"
                        .into(),
                ));
            }
        }
        for (i, w) in self.slabs.windows(2).enumerate() {
            if (w[0].x_right - w[1].x_left).abs() > 1e-12 {
                return Err(SolverError::InvalidInput(format!(
                    "slabs {} and {} do not share an interface coordinate",
                    i,
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Longitudinal factor of one unknown amplitude, anchored so its modulus
/// never exceeds O(1) at the slab ends.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Longitudinal {
    /// exp(-mu (x - x0))
    DecayLeft { mu: C64, x0: f64 },
    /// exp(-mu (x0 - x))
    DecayRight { mu: C64, x0: f64 },
    /// cos(k (x - x0))
    OscCos { k: C64, x0: f64 },
    /// sin(k (x - x0)) / k
    OscSinc { k: C64, x0: f64 },
    /// exp(+i k (x - x0))
    WaveRight { k: C64, x0: f64 },
    /// exp(-i k (x - x0))
    WaveLeft { k: C64, x0: f64 },
    /// exp(-mu (x_left + len - x)) + sign * exp(-mu (x - x_left + len))
    WallPair {
        mu: C64,
        x_left: f64,
        len: f64,
        sign: f64,
    },
}

impl Longitudinal {
    pub(crate) fn value(self, x: f64) -> C64 {
        match self {
            Longitudinal::DecayLeft { mu, x0 } => (-mu * (x - x0)).exp(),
            Longitudinal::DecayRight { mu, x0 } => (-mu * (x0 - x)).exp(),
            Longitudinal::OscCos { k, x0 } => (k * (x - x0)).cos(),
            Longitudinal::OscSinc { k, x0 } => sinc_scaled(k, x - x0),
            Longitudinal::WaveRight { k, x0 } => (C64::i() * k * (x - x0)).exp(),
            Longitudinal::WaveLeft { k, x0 } => (-C64::i() * k * (x - x0)).exp(),
            Longitudinal::WallPair {
                mu,
                x_left,
                len,
                sign,
            } => {
                (-mu * (x_left + len - x)).exp() + sign * (-mu * (x - x_left + len)).exp()
            }
        }
    }

    pub(crate) fn deriv(self, x: f64) -> C64 {
        match self {
            Longitudinal::DecayLeft { mu, .. } => -mu * self.value(x),
            Longitudinal::DecayRight { mu, .. } => mu * self.value(x),
            Longitudinal::OscCos { k, x0 } => -k * (k * (x - x0)).sin(),
            Longitudinal::OscSinc { k, x0 } => (k * (x - x0)).cos(),
            Longitudinal::WaveRight { k, .. } => C64::i() * k * self.value(x),
            Longitudinal::WaveLeft { k, .. } => -C64::i() * k * self.value(x),
            Longitudinal::WallPair {
                mu,
                x_left,
                len,
                sign,
            } => {
                mu * (-mu * (x_left + len - x)).exp()
                    - sign * mu * (-mu * (x - x_left + len)).exp()
            }
        }
    }
}

/// sin(k t) / k with a series fallback near k = 0.
fn sinc_scaled(k: C64, t: f64) -> C64 {
    if k.norm() < 1e-8 {
        let kt2 = (k * t) * (k * t);
        C64::new(t, 0.0) * (C64::new(1.0, 0.0) - kt2 / 6.0)
    } else {
        (k * t).sin() / k
    }
}

/// One unknown amplitude: a transverse mode in a slab with its
/// longitudinal factor.
#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub slab: usize,
    pub mode: ModeIndex,
    pub(crate) profile: Longitudinal,
}

/// A prescribed inhomogeneous term in one slab (unit coefficient); its
/// interface traces move to the right-hand side of the matching system.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Driving {
    pub slab: usize,
    pub mode: ModeIndex,
    pub profile: Longitudinal,
}

/// Assembled matching system M(lambda) x = rhs.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub stack: SlabStack,
    pub lambda: C64,
    pub matrix: DMatrix<C64>,
    pub rhs: Option<DVector<C64>>,
    pub columns: Vec<Column>,
    pub slab_cols: Vec<std::ops::Range<usize>>,
    pub(crate) driving: Option<Driving>,
}

fn propagating(family: ModeFamily, index: usize, lambda: C64) -> bool {
    family == ModeFamily::ND && index == 1 && lambda.re > 0.25
}

fn slab_columns(stack: &SlabStack, idx: usize, lambda: C64) -> Result<Vec<Column>> {
    let slab = stack.slabs[idx];
    let fam = slab.lower_bc.family();
    let n = stack.truncation;
    let mut cols = Vec::new();
    for q in 1..=n {
        let mode = ModeIndex::new(fam, q);
        let t = mode.transverse_eigenvalue();
        if propagating(fam, q, lambda) {
            let k = sqrt_branch(lambda - C64::new(t, 0.0))?;
            if slab.is_finite() {
                match slab.wall {
                    None => {
                        cols.push(Column {
                            slab: idx,
                            mode,
                            profile: Longitudinal::OscCos { k, x0: slab.x_left },
                        });
                        cols.push(Column {
                            slab: idx,
                            mode,
                            profile: Longitudinal::OscSinc { k, x0: slab.x_left },
                        });
                    }
                    Some(Parity::Even) => cols.push(Column {
                        slab: idx,
                        mode,
                        profile: Longitudinal::OscCos { k, x0: slab.x_left },
                    }),
                    Some(Parity::Odd) => cols.push(Column {
                        slab: idx,
                        mode,
                        profile: Longitudinal::OscSinc { k, x0: slab.x_left },
                    }),
                }
            } else {
                let leftward = slab.x_left.is_infinite();
                let end = slab.end_condition.unwrap();
                let profile = match (end, leftward) {
                    (EndCondition::DecayOnly, _) => continue,
                    (EndCondition::Outgoing | EndCondition::Bounded, false) => {
                        Longitudinal::WaveRight { k, x0: slab.x_left }
                    }
                    (EndCondition::Outgoing | EndCondition::Bounded, true) => {
                        Longitudinal::WaveLeft { k, x0: slab.x_right }
                    }
                    (EndCondition::Incoming, false) => {
                        Longitudinal::WaveLeft { k, x0: slab.x_left }
                    }
                    (EndCondition::Incoming, true) => {
                        Longitudinal::WaveRight { k, x0: slab.x_right }
                    }
                };
                cols.push(Column {
                    slab: idx,
                    mode,
                    profile,
                });
            }
        } else {
            let mu = sqrt_branch(C64::new(t, 0.0) - lambda)?;
            if slab.is_finite() {
                match slab.wall {
                    None => {
                        cols.push(Column {
                            slab: idx,
                            mode,
                            profile: Longitudinal::DecayLeft { mu, x0: slab.x_left },
                        });
                        cols.push(Column {
                            slab: idx,
                            mode,
                            profile: Longitudinal::DecayRight { mu, x0: slab.x_right },
                        });
                    }
                    Some(parity) => cols.push(Column {
                        slab: idx,
                        mode,
                        profile: Longitudinal::WallPair {
                            mu,
                            x_left: slab.x_left,
                            len: slab.x_right - slab.x_left,
                            sign: if parity == Parity::Even { 1.0 } else { -1.0 },
                        },
                    }),
                }
            } else if slab.x_left.is_infinite() {
                cols.push(Column {
                    slab: idx,
                    mode,
                    profile: Longitudinal::DecayRight { mu, x0: slab.x_right },
                });
            } else {
                cols.push(Column {
                    slab: idx,
                    mode,
                    profile: Longitudinal::DecayLeft { mu, x0: slab.x_left },
                });
            }
        }
    }
    Ok(cols)
}

/// Build the interface-matching matrix M(lambda) for the stack, together
/// with the right-hand side induced by an optional prescribed term.
pub fn assemble(stack: &SlabStack, s: SpectralPoint) -> Result<Assembled> {
    assemble_driven(stack, s, None)
}

pub(crate) fn assemble_driven(
    stack: &SlabStack,
    s: SpectralPoint,
    driving: Option<Driving>,
) -> Result<Assembled> {
    stack.validate()?;
    let lambda = s.lambda;
    let n = stack.truncation;
    let modes = ModeSystem::new(n);

    let mut columns = Vec::new();
    let mut slab_cols = Vec::with_capacity(stack.slabs.len());
    for idx in 0..stack.slabs.len() {
        let start = columns.len();
        columns.extend(slab_columns(stack, idx, lambda)?);
        slab_cols.push(start..columns.len());
    }
    let dim = stack.matrix_dim();
    if columns.len() != dim {
        return Err(SolverError::InvalidInput(format!(
            "stack yields {} unknowns for {} matching rows; \
             end conditions drop propagating modes",
            columns.len(),
            dim
        )));
    }

    let mut matrix = DMatrix::<C64>::zeros(dim, dim);
    let mut rhs = driving.map(|_| DVector::<C64>::zeros(dim));

    // value rows always test against the sin family; derivative rows test
    // against the cos family under MixedFamily, sin under DirichletTests
    let value_test = |fam: ModeFamily, row: usize, q: usize| -> f64 {
        match fam {
            ModeFamily::DD => {
                if row == q {
                    1.0
                } else {
                    0.0
                }
            }
            ModeFamily::ND => modes.overlap(row, q),
        }
    };
    let deriv_test = |fam: ModeFamily, row: usize, q: usize| -> f64 {
        match stack.projection {
            ProjectionScheme::DirichletTests => value_test(fam, row, q),
            ProjectionScheme::MixedFamily => match fam {
                ModeFamily::DD => modes.overlap(q, row),
                ModeFamily::ND => {
                    if row == q {
                        1.0
                    } else {
                        0.0
                    }
                }
            },
        }
    };

    for i in 0..stack.slabs.len() - 1 {
        let xc = stack.slabs[i].x_right;
        let row_v = 2 * n * i;
        let row_d = row_v + n;
        for (side, sign) in [(i, -1.0), (i + 1, 1.0)] {
            let fam = stack.slabs[side].lower_bc.family();
            for ci in slab_cols[side].clone() {
                let col = &columns[ci];
                let v = col.profile.value(xc) * sign;
                let d = col.profile.deriv(xc) * sign;
                for row in 1..=n {
                    let tv = value_test(fam, row, col.mode.index);
                    if tv != 0.0 {
                        matrix[(row_v + row - 1, ci)] += v * tv;
                    }
                    let td = deriv_test(fam, row, col.mode.index);
                    if td != 0.0 {
                        matrix[(row_d + row - 1, ci)] += d * td;
                    }
                }
            }
            if let Some(drv) = driving {
                if drv.slab == side {
                    let r = rhs.as_mut().unwrap();
                    // prescribed term moved to the right-hand side
                    let v = drv.profile.value(xc) * (-sign);
                    let d = drv.profile.deriv(xc) * (-sign);
                    for row in 1..=n {
                        let tv = value_test(fam, row, drv.mode.index);
                        if tv != 0.0 {
                            r[row_v + row - 1] += v * tv;
                        }
                        let td = deriv_test(fam, row, drv.mode.index);
                        if td != 0.0 {
                            r[row_d + row - 1] += d * td;
                        }
                    }
                }
            }
        }
    }

    Ok(Assembled {
        stack: stack.clone(),
        lambda,
        matrix,
        rhs,
        columns,
        slab_cols,
        driving,
    })
}

/// Determinant of M(lambda) in overflow-safe form: det = phase * exp(log_abs).
#[derive(Debug, Clone, Copy)]
pub struct ScaledDeterminant {
    pub log_abs: f64,
    pub phase: C64,
    pub matrix_dim: usize,
}

impl ScaledDeterminant {
    /// Sign of a real determinant; the phase of a real matrix is +/-1.
    pub fn real_sign(&self) -> Result<f64> {
        if self.phase.im.abs() > 1e-8 {
            return Err(SolverError::InvalidInput(format!(
                "determinant phase {} is not real",
                self.phase
            )));
        }
        Ok(self.phase.re.signum())
    }
}

/// LU factorization with partial pivoting; log_abs accumulates log|u_ii|
/// and the phase collects u_ii / |u_ii| times the pivot sign.
pub fn scaled_det(assembled: &Assembled) -> Result<ScaledDeterminant> {
    let dim = assembled.matrix.nrows();
    let lu = assembled.matrix.clone().lu();
    let u = lu.u();
    let mut log_abs = 0.0;
    let mut phase: C64 = lu.p().determinant();
    for i in 0..dim {
        let d = u[(i, i)];
        let r = d.norm();
        if r < 1e-300 {
            return Err(SolverError::SingularToWorkingPrecision);
        }
        log_abs += r.ln();
        phase *= d / C64::new(r, 0.0);
    }
    Ok(ScaledDeterminant {
        log_abs,
        phase,
        matrix_dim: dim,
    })
}

/// Assemble and evaluate the scaled determinant in one call.
pub fn scaled_det_at(stack: &SlabStack, s: SpectralPoint) -> Result<ScaledDeterminant> {
    scaled_det(&assemble(stack, s)?)
}

/// A reconstructed field: per-column amplitudes over a stack.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub lambda: C64,
    pub stack: SlabStack,
    pub columns: Vec<Column>,
    pub slab_cols: Vec<std::ops::Range<usize>>,
    pub amplitudes: Vec<C64>,
    pub(crate) driving: Option<Driving>,
    /// smallest singular value over largest (zero for solved systems)
    pub residual: f64,
    /// second-smallest singular value over largest (root simplicity gauge)
    pub sv_gap: f64,
}

impl FieldSolution {
    fn slab_of(&self, x1: f64) -> usize {
        for (i, s) in self.stack.slabs.iter().enumerate() {
            if x1 < s.x_right {
                return i;
            }
        }
        self.stack.slabs.len() - 1
    }

    /// Evaluate the field at a point of the strip.
    pub fn eval(&self, x1: f64, x2: f64) -> C64 {
        let si = self.slab_of(x1);
        let mut total = C64::new(0.0, 0.0);
        for ci in self.slab_cols[si].clone() {
            let c = &self.columns[ci];
            total += self.amplitudes[ci] * c.profile.value(x1) * c.mode.eval(x2);
        }
        if let Some(d) = self.driving {
            if d.slab == si {
                total += d.profile.value(x1) * d.mode.eval(x2);
            }
        }
        total
    }

    /// Amplitude of a given mode in a single-amplitude slab (semi-infinite
    /// or wall-terminated).
    pub fn mode_amplitude(&self, slab: usize, index: usize) -> Option<C64> {
        let mut found = None;
        for ci in self.slab_cols[slab].clone() {
            if self.columns[ci].mode.index == index {
                if found.is_some() {
                    return None; // two-amplitude slab: ambiguous
                }
                found = Some(self.amplitudes[ci]);
            }
        }
        found
    }

    /// Rescale all amplitudes by a constant.
    pub fn scale(&mut self, factor: C64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }
}

/// Null vector of M(lambda) at a (numerical) root, normalized so the
/// largest-modulus amplitude equals one with zero phase.
pub fn nullspace_amplitudes(assembled: &Assembled) -> Result<FieldSolution> {
    let svd = assembled.matrix.clone().svd(false, true);
    let sv = &svd.singular_values;
    let mut imin = 0;
    let mut imax = 0;
    for i in 0..sv.len() {
        if sv[i] < sv[imin] {
            imin = i;
        }
        if sv[i] > sv[imax] {
            imax = i;
        }
    }
    let smax = sv[imax];
    let residual = sv[imin] / smax;
    if residual >= 1e-8 {
        return Err(SolverError::NotARoot(residual));
    }
    let mut second = f64::INFINITY;
    for i in 0..sv.len() {
        if i != imin {
            second = second.min(sv[i]);
        }
    }
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut v: Vec<C64> = (0..v_t.ncols()).map(|j| v_t[(imin, j)].conj()).collect();
    let mut big = 0usize;
    for (i, a) in v.iter().enumerate() {
        if a.norm() > v[big].norm() {
            big = i;
        }
    }
    let pivot = v[big];
    for a in &mut v {
        *a /= pivot;
    }
    Ok(FieldSolution {
        lambda: assembled.lambda,
        stack: assembled.stack.clone(),
        columns: assembled.columns.clone(),
        slab_cols: assembled.slab_cols.clone(),
        amplitudes: v,
        driving: None,
        residual,
        sv_gap: second / smax,
    })
}

/// Solve M x = rhs for a driven (inhomogeneous) stack.
pub(crate) fn solve_driven(assembled: &Assembled) -> Result<FieldSolution> {
    let rhs = assembled
        .rhs
        .as_ref()
        .ok_or_else(|| SolverError::InvalidInput("stack has no driving term".into()))?;
    let lu = assembled.matrix.clone().lu();
    let x = lu
        .solve(rhs)
        .ok_or(SolverError::SingularSystem(assembled.lambda.re))?;
    Ok(FieldSolution {
        lambda: assembled.lambda,
        stack: assembled.stack.clone(),
        columns: assembled.columns.clone(),
        slab_cols: assembled.slab_cols.clone(),
        amplitudes: x.iter().copied().collect(),
        driving: assembled.driving,
        residual: 0.0,
        sv_gap: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ModeFamily;

    fn junction_stack(n: usize) -> SlabStack {
        SlabStack::new(
            vec![
                Slab::semi_left(0.0, Bc::Dirichlet, EndCondition::DecayOnly),
                Slab::semi_right(0.0, Bc::Neumann, EndCondition::Outgoing),
            ],
            n,
        )
    }

    fn five_slab(a: f64, l: f64, n: usize) -> SlabStack {
        SlabStack::new(
            vec![
                Slab::semi_left(-l, Bc::Neumann, EndCondition::Outgoing),
                Slab::finite(-l, -a, Bc::Dirichlet),
                Slab::finite(-a, a, Bc::Neumann),
                Slab::finite(a, l, Bc::Dirichlet),
                Slab::semi_right(l, Bc::Neumann, EndCondition::Outgoing),
            ],
            n,
        )
    }

    fn window_stack(a: f64, n: usize) -> SlabStack {
        SlabStack::new(
            vec![
                Slab::semi_left(-a, Bc::Dirichlet, EndCondition::DecayOnly),
                Slab::finite(-a, a, Bc::Neumann),
                Slab::semi_right(a, Bc::Dirichlet, EndCondition::DecayOnly),
            ],
            n,
        )
    }

    #[test]
    fn dimension_bookkeeping() {
        let s = SpectralPoint::new(C64::new(0.7, -1e-3));
        let a = assemble(&junction_stack(4), s).unwrap();
        assert_eq!(a.matrix.nrows(), 8);
        assert_eq!(a.matrix.ncols(), 8);
        let a = assemble(&five_slab(1.0, 8.0, 4), s).unwrap();
        assert_eq!(a.matrix.nrows(), 32);
        assert_eq!(a.stack.matrix_dim(), 2 * 4 * 4);
    }

    #[test]
    fn entries_stay_bounded_on_long_barriers() {
        let n = 4;
        for len in [6.0, 50.0] {
            let stack = five_slab(1.0, 1.0 + len, n);
            let a = assemble(&stack, SpectralPoint::real(0.7)).unwrap();
            let mu_max = ((n * n) as f64 - 0.7).sqrt();
            let bound = mu_max.max(1.0) * (1.0 + 1e-12);
            for v in a.matrix.iter() {
                assert!(v.norm() <= bound, "entry {} exceeds {}", v.norm(), bound);
                assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn real_stack_has_sign_determinant() {
        let stack = window_stack(1.0, 8);
        for lam in [0.3, 0.5, 0.85, 0.99] {
            let d = scaled_det_at(&stack, SpectralPoint::real(lam)).unwrap();
            let s = d.real_sign().unwrap();
            assert!(s == 1.0 || s == -1.0);
            assert!(d.phase.im.abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_spectral_points_give_conjugate_determinants() {
        let stack = window_stack(1.0, 8);
        let lam = C64::new(0.6, -1e-3);
        let d1 = scaled_det_at(&stack, SpectralPoint::new(lam)).unwrap();
        let d2 = scaled_det_at(&stack, SpectralPoint::new(lam.conj())).unwrap();
        assert!((d1.log_abs - d2.log_abs).abs() < 1e-9 * d1.log_abs.abs().max(1.0));
        assert!((d1.phase.conj() - d2.phase).norm() < 1e-9);
    }

    #[test]
    fn scaled_determinant_is_analytic() {
        // Cauchy-Riemann finite-difference oracle on the three-slab stack
        let stack = window_stack(1.0, 8);
        let lam = C64::new(0.6, -1e-3);
        let c = scaled_det_at(&stack, SpectralPoint::new(lam)).unwrap().log_abs;
        let d = |z: C64| -> C64 {
            let sd = scaled_det_at(&stack, SpectralPoint::new(z)).unwrap();
            sd.phase * C64::new((sd.log_abs - c).exp(), 0.0)
        };
        let h = 1e-6;
        let dx = (d(lam + C64::new(h, 0.0)) - d(lam - C64::new(h, 0.0))) / (2.0 * h);
        let dy = (d(lam + C64::new(0.0, h)) - d(lam - C64::new(0.0, h))) / (2.0 * h * C64::i());
        assert!(
            (dx - dy).norm() <= 1e-6 * dx.norm(),
            "CR defect {:e}",
            (dx - dy).norm() / dx.norm()
        );
    }

    #[test]
    fn nullspace_demands_a_root() {
        let stack = window_stack(1.0, 8);
        // midway between eigenvalues: not a root
        let a = assemble(&stack, SpectralPoint::real(0.5)).unwrap();
        match nullspace_amplitudes(&a) {
            Err(SolverError::NotARoot(_)) => {}
            other => panic!("expected NotARoot, got {other:?}"),
        }
    }

    #[test]
    fn nullspace_normalization_is_scale_invariant() {
        // bisect the even ground state of the walled half stack first
        let n = 12;
        let stack = SlabStack::new(
            vec![
                Slab::walled(0.0, 1.0, Bc::Neumann, Parity::Even),
                Slab::semi_right(1.0, Bc::Dirichlet, EndCondition::DecayOnly),
            ],
            n,
        );
        let sign = |lam: f64| {
            scaled_det_at(&stack, SpectralPoint::real(lam))
                .unwrap()
                .real_sign()
                .unwrap()
        };
        let (mut lo, mut hi) = (0.80, 0.90);
        let slo = sign(lo);
        assert!(slo * sign(hi) < 0.0, "root not bracketed");
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slo * sign(mid) < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let mut a = assemble(&stack, SpectralPoint::real(root)).unwrap();
        let f1 = nullspace_amplitudes(&a).unwrap();
        assert!(f1.residual < 1e-8, "residual {:e}", f1.residual);
        assert!(f1.sv_gap > 1e-3, "gap {:e}", f1.sv_gap);
        a.matrix *= C64::new(10.0, 0.0);
        let f2 = nullspace_amplitudes(&a).unwrap();
        for (x, y) in f1.amplitudes.iter().zip(f2.amplitudes.iter()) {
            assert!((x - y).norm() < 1e-10);
        }
        // the largest amplitude is exactly one with zero phase
        let big = f1
            .amplitudes
            .iter()
            .cloned()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap();
        assert!((big - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn degenerate_and_misaligned_stacks_are_rejected() {
        let s = SpectralPoint::real(0.6);
        let stack = SlabStack::new(
            vec![
                Slab::semi_left(0.0, Bc::Dirichlet, EndCondition::DecayOnly),
                Slab::finite(0.0, 5e-9, Bc::Neumann),
                Slab::semi_right(5e-9, Bc::Dirichlet, EndCondition::DecayOnly),
            ],
            8,
        );
        assert!(matches!(
            assemble(&stack, s),
            Err(SolverError::DegenerateStack(_))
        ));
        let stack = SlabStack::new(
            vec![
                Slab::semi_left(0.0, Bc::Dirichlet, EndCondition::DecayOnly),
                Slab::semi_right(0.5, Bc::Neumann, EndCondition::Outgoing),
            ],
            8,
        );
        assert!(matches!(
            assemble(&stack, s),
            Err(SolverError::InvalidInput(_))
        ));
    }

    #[test]
    fn mode_family_matches_boundary_condition() {
        let s = SpectralPoint::real(0.6);
        let a = assemble(&junction_stack(4), s).unwrap();
        for ci in a.slab_cols[0].clone() {
            assert_eq!(a.columns[ci].mode.family, ModeFamily::DD);
        }
        for ci in a.slab_cols[1].clone() {
            assert_eq!(a.columns[ci].mode.family, ModeFamily::ND);
        }
    }
}
