//! Decompositions of initial data on closed scalar-flat slices with `k = 0`:
//! the split operator and its kernel, the `Gamma`-space decomposition,
//! Moncrief's splitting, and gauge-producing data on any slice.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::Tensor;
use crate::constraints::InitialDataPair;
use crate::error::{Error, Result};
use crate::geometry::{
    apply_slice_operator, apply_stacked, field_inner, field_norm, from_tensor, map_fields, to_tensor, Backend,
    SliceField, SliceGeometry, SliceMode, SliceOp,
};
use crate::invariant::{sqrt_and_inverse, stacked_gram, InvariantField, OperatorKind};
use crate::spectral::{Mode, ModeLattice, Rank, SpectralField};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Relative singular-value cut below which a direction counts as kernel.
pub const KERNEL_TOL: f64 = 1e-10;

/// Coefficients `(a, b)` of the split operator, with `0 < ab < 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitOperatorParams {
    a: f64,
    b: f64,
}

impl SplitOperatorParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let ab = a * b;
        if !(ab > 0.0 && ab < 2.0) {
            return Err(Error::InvalidParameter(format!("split operator needs 0 < ab < 2, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    /// `(-1/n, -2)`.
    pub fn position(n: usize) -> Self {
        Self { a: -1.0 / n as f64, b: -2.0 }
    }

    /// `(1/n, 2(n-1))`.
    pub fn momentum(n: usize) -> Self {
        Self { a: 1.0 / n as f64, b: 2.0 * (n as f64 - 1.0) }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::SplitP { a: self.a, b: self.b }
    }

    fn adjoint_kind(&self) -> OperatorKind {
        OperatorKind::SplitAdjoint { a: self.a, b: self.b }
    }
}

/// Which half of the initial data is decomposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    Position,
    Momentum,
}

impl SplitPart {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "position" => Ok(Self::Position),
            "momentum" => Ok(Self::Momentum),
            other => Err(Error::InvalidParameter(format!("part must be position or momentum, got `{other}`"))),
        }
    }

    pub fn params(self, n: usize) -> SplitOperatorParams {
        match self {
            Self::Position => SplitOperatorParams::position(n),
            Self::Momentum => SplitOperatorParams::momentum(n),
        }
    }
}

/// Rejects slices outside the scalar-flat, `k = 0` setting.
pub fn require_static_scalar_flat(slice: &SliceGeometry) -> Result<()> {
    if slice.is_scalar_flat_static() {
        Ok(())
    } else {
        Err(Error::UnsupportedSlice(format!(
            "{} is not a scalar-flat slice with vanishing second fundamental form",
            slice.id()
        )))
    }
}

fn stack(ranks: &[Rank], ts: &[Tensor<C64>]) -> Vec<C64> {
    ranks.iter().zip(ts).flat_map(|(r, t)| from_tensor(*r, t)).collect()
}

fn unstack(ranks: &[Rank], n: usize, x: &[C64]) -> Vec<Tensor<C64>> {
    let mut off = 0;
    ranks
        .iter()
        .map(|r| {
            let d = r.components(n);
            let t = to_tensor(*r, n, &x[off..off + d]);
            off += d;
            t
        })
        .collect()
}

/// Per-mode matrix of a stacked operator.
pub fn mode_matrix(s: &SliceMode, kind: OperatorKind) -> DMatrix<C64> {
    let n = s.n();
    let din: usize = kind.domain().iter().map(|r| r.components(n)).sum();
    let dout: usize = kind.codomain().iter().map(|r| r.components(n)).sum();
    let mut m = DMatrix::from_element(dout, din, ZERO);
    for col in 0..din {
        let mut x = vec![ZERO; din];
        x[col] = C64::new(1.0, 0.0);
        let y = apply_stacked(s, kind, &x).expect("stacked ranks match the kind");
        for (row, v) in y.iter().enumerate() {
            m[(row, col)] = *v;
        }
    }
    m
}

/// Gram matrix of the `L^2` pairing on stacked components of one mode.
pub fn mode_weights(slice: &SliceGeometry, ranks: &[Rank]) -> DMatrix<f64> {
    match slice.backend() {
        Backend::Invariant => stacked_gram(slice.frame().expect("invariant slice"), ranks),
        Backend::Torus { n } => {
            let w: Vec<f64> = ranks.iter().flat_map(|r| r.weights(n)).collect();
            DMatrix::from_diagonal(&DVector::from_vec(w))
        }
    }
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Weighted minimal-norm least-squares solution of `A x = r`.
pub fn weighted_solve(a: &DMatrix<C64>, r: &[C64], win: &DMatrix<f64>, wout: &DMatrix<f64>) -> Vec<C64> {
    let (_, sin_inv) = sqrt_and_inverse(win);
    let (sout, _) = sqrt_and_inverse(wout);
    let sin_inv = complexify(&sin_inv);
    let sout = complexify(&sout);
    let b = &sout * a * &sin_inv;
    let svd = b.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    if smax == 0.0 {
        return vec![ZERO; a.ncols()];
    }
    let rhs = &sout * DVector::from_column_slice(r);
    let y = svd.solve(&rhs, KERNEL_TOL * smax).expect("both factors computed");
    (sin_inv * y).iter().copied().collect()
}

/// Weighted nullspace of a complex matrix, orthonormal in `W_in`; the cut is relative to `max(1, s_max)`.
pub fn weighted_kernel(a: &DMatrix<C64>, win: &DMatrix<f64>, wout: &DMatrix<f64>) -> Vec<Vec<C64>> {
    let (_, sin_inv) = sqrt_and_inverse(win);
    let (sout, _) = sqrt_and_inverse(wout);
    let sin_inv = complexify(&sin_inv);
    let b = complexify(&sout) * a * &sin_inv;
    let n = b.ncols();
    let rows = b.nrows().max(n);
    let mut padded = DMatrix::from_element(rows, n, ZERO);
    padded.view_mut((0, 0), (b.nrows(), n)).copy_from(&b);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().fold(1.0f64, |m, s| m.max(*s));
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= KERNEL_TOL * smax)
        .map(|(i, _)| (&sin_inv * vt.row(i).adjoint()).iter().copied().collect())
        .collect()
}

fn is_constant_mode(s: &SliceMode) -> bool {
    s.calc.symbol.iter().all(|c| *c == ZERO)
}

/// `P(phi, omega) = (Delta phi + a g(Ric, L omega), L*L omega + b d phi)`.
pub fn split_operator_apply(
    params: SplitOperatorParams,
    phi: &SliceField,
    omega: &SliceField,
    slice: &SliceGeometry,
) -> Result<(SliceField, SliceField)> {
    require_static_scalar_flat(slice)?;
    apply_pair(slice, params.kind(), phi, omega)
}

/// `P*(psi, eta) = (Delta psi + b delta eta, L*L eta + a L*(psi Ric))`.
pub fn split_adjoint_apply(
    params: SplitOperatorParams,
    psi: &SliceField,
    eta: &SliceField,
    slice: &SliceGeometry,
) -> Result<(SliceField, SliceField)> {
    require_static_scalar_flat(slice)?;
    apply_pair(slice, params.adjoint_kind(), psi, eta)
}

fn apply_pair(slice: &SliceGeometry, kind: OperatorKind, x: &SliceField, y: &SliceField) -> Result<(SliceField, SliceField)> {
    let dom = kind.domain();
    let cod = kind.codomain();
    if x.rank() != dom[0] || y.rank() != dom[1] {
        return Err(Error::Mismatch(format!("{kind:?} acts on {dom:?}")));
    }
    let out = map_fields(slice, &[x, y], &cod, |s, t| {
        let v = apply_stacked(s, kind, &stack(&dom, t)).expect("ranks checked");
        unstack(&cod, s.n(), &v)
    })?;
    let mut it = out.into_iter();
    Ok((it.next().expect("two outputs"), it.next().expect("two outputs")))
}

/// `int_Sigma f` of a scalar field.
pub fn integral(slice: &SliceGeometry, f: &SliceField) -> f64 {
    match f {
        SliceField::Torus(t) => t.coeff(Mode::ZERO, 0).re * t.lattice().volume(),
        SliceField::Invariant(v) => v.components[0] * slice.frame().map_or(0.0, |fr| fr.volume()),
    }
}

/// Residuals of the `Gamma`-space equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaResidual {
    /// `|| Delta tr h - g(Ric, h) ||`.
    pub position_trace: f64,
    /// `|| div h ||`.
    pub position_divergence: f64,
    /// `|| Delta tr m + g(Ric, m) ||`.
    pub momentum_trace: f64,
    /// `|| div(m - tr m g) ||`.
    pub momentum_divergence: f64,
}

impl GammaResidual {
    pub fn max(&self) -> f64 {
        self.position_trace.max(self.position_divergence).max(self.momentum_trace).max(self.momentum_divergence)
    }
}

fn gamma_equations(slice: &SliceGeometry, f: &SliceField, part: SplitPart) -> Result<(f64, f64)> {
    let out = map_fields(slice, &[f], &[Rank::Scalar, Rank::OneForm], |s, t| {
        let h = &t[0];
        let tr = s.trace(h);
        let ric = s.ricci_inner(h);
        let n = s.n();
        match part {
            SplitPart::Position => {
                vec![Tensor::scalar(s.laplacian_scalar(tr) - ric, n), s.div(h)]
            }
            SplitPart::Momentum => vec![
                Tensor::scalar(s.laplacian_scalar(tr) + ric, n),
                s.div(&h.sub(&s.metric_times(tr))),
            ],
        }
    })?;
    Ok((field_norm(slice, &out[0], 0.0)?, field_norm(slice, &out[1], 0.0)?))
}

/// The four `Gamma`-space residual norms of a pair.
pub fn gamma_residual(pair: &InitialDataPair) -> Result<GammaResidual> {
    require_static_scalar_flat(&pair.slice)?;
    let (position_trace, position_divergence) = gamma_equations(&pair.slice, &pair.h, SplitPart::Position)?;
    let (momentum_trace, momentum_divergence) = gamma_equations(&pair.slice, &pair.m, SplitPart::Momentum)?;
    Ok(GammaResidual { position_trace, position_divergence, momentum_trace, momentum_divergence })
}

/// Checks reported with a decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// `|| source - (gamma + L omega + C Ric + phi g) || / || source ||`.
    pub reconstruction: f64,
    /// Trace equation residual of the gamma part.
    pub gamma_trace: f64,
    /// Divergence equation residual of the gamma part.
    pub gamma_divergence: f64,
    /// `| phi[1] |`.
    pub phi_mean: f64,
}

/// `source = gamma_part + L omega + C Ric + phi g`.
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub part: SplitPart,
    pub gamma_part: SliceField,
    pub omega: SliceField,
    pub c: f64,
    pub phi: SliceField,
    pub report: DecompositionReport,
}

fn ricci_field(slice: &SliceGeometry, like: &SliceField) -> Result<SliceField> {
    let lattice = like.as_torus().map(|f| f.lattice());
    slice.constant_field(lattice, Rank::Sym2, slice.ricci())
}

/// Splits a symmetric two-tensor into its `Gamma` part, `L omega`, `C Ric` and `phi g`.
pub fn split_solve(source: &SliceField, part: SplitPart, slice: &SliceGeometry) -> Result<DecompositionResult> {
    require_static_scalar_flat(slice)?;
    slice.check_field(source)?;
    if source.rank() != Rank::Sym2 {
        return Err(Error::Mismatch("the source must be a symmetric two-tensor".into()));
    }
    let n = slice.dim();
    let params = part.params(n);
    let inv_n = 1.0 / n as f64;

    let ric_inner = map_fields(slice, &[source], &[Rank::Scalar], |s, t| vec![Tensor::scalar(s.ricci_inner(&t[0]), n)])?;
    let ric_sq = slice.background().inner2(slice.ricci(), slice.ricci()).re;
    let vol_ric_sq = ric_sq * volume(slice, source);
    let c = if vol_ric_sq > 1e-14 { integral(slice, &ric_inner[0]) / vol_ric_sq } else { 0.0 };

    let dom = [Rank::Scalar, Rank::OneForm];
    let win = mode_weights(slice, &dom);
    let wout = win.clone();
    let kind = params.kind();
    let solved = map_fields(slice, &[source], &dom, |s, t| {
        let alpha = &t[0];
        let tr = s.trace(alpha);
        let ra = s.ricci_inner(alpha);
        let constant = is_constant_mode(s);
        let ric_term = if constant { C64::new(c * ric_sq, 0.0) } else { ZERO };
        let (r1, r2) = match part {
            SplitPart::Position => (
                (-ra + s.laplacian_scalar(tr) + ric_term) * inv_n,
                s.div(alpha).scale(C64::new(-2.0, 0.0)),
            ),
            SplitPart::Momentum => (
                (ra + s.laplacian_scalar(tr) - ric_term) * inv_n,
                s.div(&alpha.sub(&s.metric_times(tr))).scale(C64::new(-2.0, 0.0)),
            ),
        };
        let rhs = stack(&dom, &[Tensor::scalar(r1, n), r2]);
        let x = weighted_solve(&mode_matrix(s, kind), &rhs, &win, &wout);
        unstack(&dom, n, &x)
    })?;
    let phi = solved[0].clone();
    let omega = solved[1].clone();

    let ric = ricci_field(slice, source)?;
    let lw = apply_slice_operator(slice, SliceOp::ConformalKilling, &omega)?;
    let phig = map_fields(slice, &[&phi], &[Rank::Sym2], |s, t| vec![s.metric_times(t[0].data[0])])?.remove(0);
    let gamma_part = source.sub(&lw)?.sub(&ric.scale(c))?.sub(&phig)?;

    let rebuilt = gamma_part.add(&lw)?.add(&ric.scale(c))?.add(&phig)?;
    let size = field_norm(slice, source, 0.0)?;
    let err = field_norm(slice, &source.sub(&rebuilt)?, 0.0)?;
    let (gamma_trace, gamma_divergence) = gamma_equations(slice, &gamma_part, part)?;
    let report = DecompositionReport {
        reconstruction: if size > 0.0 { err / size } else { err },
        gamma_trace,
        gamma_divergence,
        phi_mean: integral(slice, &phi).abs(),
    };
    Ok(DecompositionResult { part, gamma_part, omega, c, phi, report })
}

fn volume(slice: &SliceGeometry, like: &SliceField) -> f64 {
    match like {
        SliceField::Torus(f) => f.lattice().volume(),
        SliceField::Invariant(_) => slice.frame().map_or(0.0, |f| f.volume()),
    }
}

/// Checks reported with a Moncrief splitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MoncriefReport {
    /// `|| pair - P(beta, N) - gamma ||`.
    pub reconstruction: f64,
    /// `|| P*(gamma) ||`.
    pub adjoint_residual: f64,
    /// `<P(beta, N), gamma>`.
    pub orthogonality: f64,
}

/// `pair = P(beta, N) + gamma` with `gamma` in the kernel of `P*`.
#[derive(Clone, Debug)]
pub struct MoncriefSplit {
    pub lapse: SliceField,
    pub shift: SliceField,
    pub gauge: InitialDataPair,
    pub gamma: InitialDataPair,
    pub report: MoncriefReport,
}

fn pair_inner(a: &InitialDataPair, b: &InitialDataPair) -> Result<f64> {
    Ok(field_inner(&a.slice, &a.h, &b.h)? + field_inner(&a.slice, &a.m, &b.m)?)
}

/// `L^2`-orthogonal projection of a pair onto the image of `P` and the kernel of `P*`.
pub fn moncrief_project(pair: &InitialDataPair) -> Result<MoncriefSplit> {
    let slice = &pair.slice;
    require_static_scalar_flat(slice)?;
    let kind = OperatorKind::MoncriefP;
    let dom = kind.domain();
    let cod = kind.codomain();
    let win = mode_weights(slice, &dom);
    let wout = mode_weights(slice, &cod);
    let n = slice.dim();
    let solved = map_fields(slice, &[&pair.h, &pair.m], &dom, |s, t| {
        let x = weighted_solve(&mode_matrix(s, kind), &stack(&cod, t), &win, &wout);
        unstack(&dom, n, &x)
    })?;
    let shift = solved[0].clone();
    let lapse = solved[1].clone();
    let (gh, gm) = apply_pair(slice, kind, &shift, &lapse)?;
    let gauge = InitialDataPair::new(slice.clone(), gh, gm, pair.sobolev)?;
    let gamma = pair.combine(1.0, &gauge, -1.0)?;
    let (a1, a2) = apply_pair(slice, OperatorKind::MoncriefAdjoint, &gamma.h, &gamma.m)?;
    let adjoint_residual = field_norm(slice, &a1, 0.0)?.hypot(field_norm(slice, &a2, 0.0)?);
    let rest = pair.combine(1.0, &gauge, -1.0)?.combine(1.0, &gamma, -1.0)?;
    let reconstruction = field_norm(slice, &rest.h, 0.0)?.hypot(field_norm(slice, &rest.m, 0.0)?);
    let orthogonality = pair_inner(&gauge, &gamma)?.abs();
    Ok(MoncriefSplit {
        lapse,
        shift,
        gauge,
        gamma,
        report: MoncriefReport { reconstruction, adjoint_residual, orthogonality },
    })
}

/// `(L_beta k)_ab` with the background `k` constant in the slice coordinates or frame.
fn lie_of_background(s: &SliceMode, beta: &Tensor<C64>, k: &Tensor<C64>) -> Tensor<C64> {
    let n = s.n();
    let bg = s.geom.background();
    let x = bg.raise(beta);
    let nk = s.geom.mode_calc(None).calc.covariant(k);
    let nb = s.calc.covariant(beta);
    let mut out = Tensor::zeros(n, 2);
    for a in 0..n {
        for b in 0..n {
            let mut acc = ZERO;
            for c in 0..n {
                acc += x.data[c] * nk.at3(c, a, b);
                for e in 0..n {
                    let gi = bg.inverse.at2(c, e);
                    acc += k.at2(c, b) * gi * nb.at2(a, e) + k.at2(a, c) * gi * nb.at2(b, e);
                }
            }
            out.data[a * n + b] = acc;
        }
    }
    out
}

/// Gauge-producing data `(L_beta g + 2 k N, L_beta k + Hess N + (2 k o k - Ric - tr k k) N)`.
pub fn gauge_producing_data(lapse: &SliceField, shift: &SliceField, slice: &SliceGeometry) -> Result<InitialDataPair> {
    if lapse.rank() != Rank::Scalar || shift.rank() != Rank::OneForm {
        return Err(Error::Mismatch("gauge data need a scalar lapse and a one-form shift".into()));
    }
    let k = slice.second_fundamental_form().clone();
    let bg = slice.background();
    let trk = bg.trace(&k);
    let q = bg
        .compose(&k, &k)
        .scale(C64::new(2.0, 0.0))
        .sub(slice.ricci())
        .sub(&k.scale(trk));
    let out = map_fields(slice, &[lapse, shift], &[Rank::Sym2, Rank::Sym2], |s, t| {
        let nl = t[0].data[0];
        let beta = &t[1];
        let h = s.lie(beta).add(&k.scale(nl * 2.0));
        let m = lie_of_background(s, beta, &k).add(&s.hessian(nl)).add(&q.scale(nl));
        vec![h, m]
    })?;
    let mut it = out.into_iter();
    InitialDataPair::new(slice.clone(), it.next().expect("two"), it.next().expect("two"), 0.0)
}

/// Basis of the common kernel of the split operator and its adjoint.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    /// `(phi, omega)` basis elements of `ker P`.
    pub elements: Vec<(SliceField, SliceField)>,
    pub dim: usize,
    /// Dimension of `ker P*`, found independently.
    pub adjoint_dim: usize,
}

fn kernel_scan(
    slice: &SliceGeometry,
    kind: OperatorKind,
    lattice: Option<ModeLattice>,
) -> Result<Vec<(Option<Mode>, Vec<C64>)>> {
    let ranks = kind.domain();
    let win = mode_weights(slice, &ranks);
    let wout = mode_weights(slice, &kind.codomain());
    match slice.backend() {
        Backend::Invariant => {
            let s = slice.mode_calc(None);
            Ok(weighted_kernel(&mode_matrix(&s, kind), &win, &wout).into_iter().map(|v| (None, v)).collect())
        }
        Backend::Torus { .. } => {
            let lattice = lattice.ok_or_else(|| Error::InvalidParameter("torus kernels need a lattice".into()))?;
            let mut out = Vec::new();
            for m in lattice.modes() {
                let s = slice.mode_calc(Some(m));
                for v in weighted_kernel(&mode_matrix(&s, kind), &win, &wout) {
                    out.push((Some(m), v));
                }
            }
            Ok(out)
        }
    }
}

/// Kernel of the split operator: constants and Killing one-forms.
pub fn kernel_basis(
    params: SplitOperatorParams,
    slice: &SliceGeometry,
    lattice: Option<ModeLattice>,
) -> Result<KernelBasis> {
    require_static_scalar_flat(slice)?;
    let ker = kernel_scan(slice, params.kind(), lattice)?;
    let adjoint_dim = kernel_scan(slice, params.adjoint_kind(), lattice)?.len();
    let mut elements = Vec::with_capacity(ker.len());
    for (mode, v) in &ker {
        // A kernel mode k pairs with -k; the real field keeps the real part of the phase-normalised vector.
        let pivot = v.iter().fold(ZERO, |p, x| if x.norm() > p.norm() { *x } else { p });
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { C64::new(1.0, 0.0) };
        let v: Vec<C64> = v.iter().map(|x| x * phase).collect();
        let (phi_c, omega_c) = v.split_at(1);
        let build = |rank: Rank, c: &[C64]| -> Result<SliceField> {
            match (mode, lattice) {
                (Some(m), Some(lat)) => {
                    let mut map = BTreeMap::new();
                    if m.is_zero() {
                        map.insert(*m, c.iter().map(|x| C64::new(x.re, 0.0)).collect());
                    } else {
                        map.insert(*m, c.to_vec());
                        map.insert(m.neg(), c.iter().map(|x| x.conj()).collect());
                    }
                    Ok(SliceField::Torus(SpectralField::from_entries(lat, rank, map)?))
                }
                _ => Ok(SliceField::Invariant(InvariantField::from_complex(rank, c))),
            }
        };
        elements.push((build(Rank::Scalar, phi_c)?, build(Rank::OneForm, omega_c)?));
    }
    Ok(KernelBasis { dim: elements.len(), elements, adjoint_dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::dphi;
    use crate::geometry::KASNER_DEFAULT;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn torus() -> (SliceGeometry, ModeLattice) {
        (SliceGeometry::flat_torus(3).unwrap(), ModeLattice::new(3, 8).unwrap())
    }

    fn rand_inv(rank: Rank, rng: &mut ChaCha8Rng) -> SliceField {
        let c = (0..rank.components(3)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SliceField::Invariant(InvariantField::new(rank, c).unwrap())
    }

    fn rand_torus(lat: ModeLattice, rank: Rank, rng: &mut ChaCha8Rng) -> SliceField {
        SliceField::Torus(SpectralField::random(lat, rank, 3, 1.0, 0.0, rng))
    }

    #[test]
    fn params_window() {
        assert!(SplitOperatorParams::new(1.0, 2.0).is_err());
        assert!(SplitOperatorParams::new(-1.0, 1.0).is_err());
        assert!(SplitOperatorParams::new(0.5, 1.0).is_ok());
    }

    #[test]
    fn kasner_is_rejected() {
        let slice = SliceGeometry::kasner(KASNER_DEFAULT, 1.0).unwrap();
        let lat = ModeLattice::new(3, 2).unwrap();
        let f = SliceField::Torus(SpectralField::empty(lat, Rank::Sym2));
        assert!(matches!(split_solve(&f, SplitPart::Position, &slice), Err(Error::UnsupportedSlice(_))));
    }

    #[test]
    fn torus_decomposition_reconstructs_and_is_gamma() {
        let (slice, lat) = torus();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for part in [SplitPart::Position, SplitPart::Momentum] {
            let src = rand_torus(lat, Rank::Sym2, &mut rng);
            let r = split_solve(&src, part, &slice).unwrap();
            assert!(r.report.reconstruction < 1e-12);
            assert!(r.report.gamma_trace < 1e-10 && r.report.gamma_divergence < 1e-10, "{:?}", r.report);
            assert_eq!(r.c, 0.0);
        }
    }

    #[test]
    fn metric_multiple_is_its_own_gamma_part() {
        let (slice, lat) = torus();
        let mut map = BTreeMap::new();
        map.insert(Mode::ZERO, vec![C64::new(0.3, 0.0), ZERO, ZERO, C64::new(0.3, 0.0), ZERO, C64::new(0.3, 0.0)]);
        let src = SliceField::Torus(SpectralField::from_entries(lat, Rank::Sym2, map).unwrap());
        let r = split_solve(&src, SplitPart::Position, &slice).unwrap();
        assert!(r.gamma_part.sub(&src).unwrap().max_abs() < 1e-14);
        assert!(r.omega.max_abs() < 1e-14 && r.phi.max_abs() < 1e-14);
    }

    #[test]
    fn berger_ricci_has_unit_constant() {
        let slice = SliceGeometry::berger_scalar_flat();
        let ric = ricci_field(&slice, &SliceField::Invariant(InvariantField::zeros(Rank::Sym2))).unwrap();
        for part in [SplitPart::Position, SplitPart::Momentum] {
            let r = split_solve(&ric, part, &slice).unwrap();
            assert!((r.c - 1.0).abs() < 1e-10);
            assert!(r.gamma_part.max_abs() < 1e-10 && r.phi.max_abs() < 1e-10);
        }
    }

    #[test]
    fn berger_decomposition_is_idempotent() {
        let slice = SliceGeometry::berger_scalar_flat();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for part in [SplitPart::Position, SplitPart::Momentum] {
            let src = rand_inv(Rank::Sym2, &mut rng);
            let r = split_solve(&src, part, &slice).unwrap();
            assert!(r.report.reconstruction < 1e-12);
            assert!(r.report.gamma_trace < 1e-10 && r.report.gamma_divergence < 1e-10, "{:?}", r.report);
            let again = split_solve(&r.gamma_part, part, &slice).unwrap();
            assert!(again.gamma_part.sub(&r.gamma_part).unwrap().max_abs() < 1e-10);
            assert!(again.omega.max_abs() < 1e-10 && again.c.abs() < 1e-10 && again.phi.max_abs() < 1e-10);
        }
    }

    #[test]
    fn kernels_have_expected_dimensions() {
        let (slice, _) = torus();
        let lat = ModeLattice::new(3, 3).unwrap();
        for params in [SplitOperatorParams::position(3), SplitOperatorParams::momentum(3)] {
            let k = kernel_basis(params, &slice, Some(lat)).unwrap();
            assert_eq!((k.dim, k.adjoint_dim), (4, 4));
            let b = kernel_basis(params, &SliceGeometry::berger_scalar_flat(), None).unwrap();
            assert_eq!((b.dim, b.adjoint_dim), (2, 2));
            for (phi, omega) in &b.elements {
                let (x, y) = split_operator_apply(params, phi, omega, &SliceGeometry::berger_scalar_flat()).unwrap();
                assert!(x.max_abs() < 1e-12 && y.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moncrief_projection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (slice, lat) = torus();
        let pair = InitialDataPair::new(
            slice.clone(),
            rand_torus(lat, Rank::Sym2, &mut rng),
            rand_torus(lat, Rank::Sym2, &mut rng),
            0.0,
        )
        .unwrap();
        let r = moncrief_project(&pair).unwrap();
        assert!(r.report.adjoint_residual < 1e-10 && r.report.orthogonality < 1e-10, "{:?}", r.report);
        let gp = gauge_producing_data(&rand_torus(lat, Rank::Scalar, &mut rng), &rand_torus(lat, Rank::OneForm, &mut rng), &slice)
            .unwrap();
        let r = moncrief_project(&gp).unwrap();
        assert!(r.gamma.max_abs() < 1e-10);
    }

    #[test]
    fn gauge_data_solve_linearised_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let lat = ModeLattice::new(3, 8).unwrap();
        for slice in [
            SliceGeometry::flat_torus(3).unwrap(),
            SliceGeometry::kasner(KASNER_DEFAULT, 1.0).unwrap(),
            SliceGeometry::kasner(KASNER_DEFAULT, 1.6).unwrap(),
        ] {
            let gp = gauge_producing_data(&rand_torus(lat, Rank::Scalar, &mut rng), &rand_torus(lat, Rank::OneForm, &mut rng), &slice)
                .unwrap();
            let r = dphi(&gp).unwrap();
            assert!(r.l2_max() < 1e-10, "{}: {}", slice.id(), r.l2_max());
        }
        let slice = SliceGeometry::berger_scalar_flat();
        let gp = gauge_producing_data(&rand_inv(Rank::Scalar, &mut rng), &rand_inv(Rank::OneForm, &mut rng), &slice).unwrap();
        assert!(dphi(&gp).unwrap().l2_max() < 1e-10);
    }
}
