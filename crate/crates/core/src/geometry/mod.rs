//! Cauchy slices, spacetime backgrounds and the differential operators on them.
//!
//! Slice operators act exactly: per Fourier mode on torus slices, and as
//! constant-coefficient algebra on the invariant sector of the Berger sphere.
//!
//! Sign conventions:
//! - `Delta = delta d + d delta` (nonnegative), `delta w = -div w`.
//! - `nabla* nabla = -tr nabla^2` (nonnegative on slices).
//! - `k(X, Y) = g(nabla_X nu, Y)` with `nu` the future unit normal.
//! - `L w = L_{w#} g - (2/n) (div w) g`, `L* h = -2 div h + (2/n) d tr h`.

pub mod oracle;
pub mod spacetime;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{Background, ModeCalc, Tensor};
use crate::error::{Error, Result};
use crate::invariant::{HomogeneousFrame, InvariantField, OperatorKind};
use crate::spectral::{Mode, ModeLattice, Rank, SpectralField};

pub use spacetime::{
    assemble_mode_operator, nu_jet_conversion, CauchyJet, JetDirection, ModeOperator, SpacetimeBackground,
    SpacetimeKind, SpacetimeOp,
};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Background slice variants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SliceKind {
    FlatTorus { n: usize },
    KasnerSlice { p: [f64; 3], t0: f64 },
    BergerInvariant { frame: HomogeneousFrame },
}

/// Where fields on a slice live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Torus { n: usize },
    Invariant,
}

/// Checks `sum p = sum p^2 = 1` to `1e-12`.
pub fn validate_kasner(p: [f64; 3]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let sum_sq: f64 = p.iter().map(|x| x * x).sum();
    if (sum - 1.0).abs() > 1e-12 || (sum_sq - 1.0).abs() > 1e-12 {
        return Err(Error::KasnerExponents { sum, sum_sq });
    }
    Ok(())
}

/// Default Kasner exponents.
pub const KASNER_DEFAULT: [f64; 3] = [2.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];

/// A background Cauchy slice with its first and second fundamental forms.
#[derive(Clone, Debug)]
pub struct SliceGeometry {
    kind: SliceKind,
    n: usize,
    background: Background<C64>,
    second_ff: Tensor<C64>,
    ricci: Tensor<C64>,
    scal: f64,
}

fn diag_tensor(values: &[f64]) -> Tensor<C64> {
    let n = values.len();
    let mut t = Tensor::zeros(n, 2);
    for (i, v) in values.iter().enumerate() {
        t.data[i * n + i] = C64::new(*v, 0.0);
    }
    t
}

impl SliceGeometry {
    pub fn new(kind: SliceKind) -> Result<Self> {
        match &kind {
            SliceKind::FlatTorus { n } => {
                if !(2..=3).contains(n) {
                    return Err(Error::InvalidParameter(format!("torus dimension must be 2 or 3, got {n}")));
                }
                let eye = diag_tensor(&vec![1.0; *n]);
                let background = Background::coordinate(eye.clone(), eye, None);
                Ok(Self {
                    n: *n,
                    background,
                    second_ff: Tensor::zeros(*n, 2),
                    ricci: Tensor::zeros(*n, 2),
                    scal: 0.0,
                    kind,
                })
            }
            SliceKind::KasnerSlice { p, t0 } => {
                validate_kasner(*p)?;
                if !(*t0 > 0.0) {
                    return Err(Error::TimeOutOfRange { t: *t0, range: "(0, inf)".into() });
                }
                let g: Vec<f64> = p.iter().map(|pi| t0.powf(2.0 * pi)).collect();
                let gi: Vec<f64> = g.iter().map(|v| 1.0 / v).collect();
                let k: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi * gi / t0).collect();
                let background = Background::coordinate(diag_tensor(&g), diag_tensor(&gi), None);
                Ok(Self {
                    n: 3,
                    background,
                    second_ff: diag_tensor(&k),
                    ricci: Tensor::zeros(3, 2),
                    scal: 0.0,
                    kind,
                })
            }
            SliceKind::BergerInvariant { frame } => {
                let background = frame.background()?;
                let ric = background.ricci();
                let ricci = ric.add(&ric.transpose()).scale(C64::new(0.5, 0.0));
                let scal = background.trace(&ricci).re;
                Ok(Self { n: 3, background, second_ff: Tensor::zeros(3, 2), ricci, scal, kind })
            }
        }
    }

    pub fn flat_torus(n: usize) -> Result<Self> {
        Self::new(SliceKind::FlatTorus { n })
    }

    pub fn kasner(p: [f64; 3], t0: f64) -> Result<Self> {
        Self::new(SliceKind::KasnerSlice { p, t0 })
    }

    pub fn berger(frame: HomogeneousFrame) -> Result<Self> {
        Self::new(SliceKind::BergerInvariant { frame })
    }

    /// The scalar-flat Berger slice.
    pub fn berger_scalar_flat() -> Self {
        Self::berger(HomogeneousFrame::scalar_flat_berger()).expect("valid frame")
    }

    pub fn kind(&self) -> &SliceKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn backend(&self) -> Backend {
        match self.kind {
            SliceKind::BergerInvariant { .. } => Backend::Invariant,
            _ => Backend::Torus { n: self.n },
        }
    }

    pub fn frame(&self) -> Option<&HomogeneousFrame> {
        match &self.kind {
            SliceKind::BergerInvariant { frame } => Some(frame),
            _ => None,
        }
    }

    pub fn background(&self) -> &Background<C64> {
        &self.background
    }

    pub fn metric(&self) -> &Tensor<C64> {
        &self.background.metric
    }

    pub fn second_fundamental_form(&self) -> &Tensor<C64> {
        &self.second_ff
    }

    pub fn ricci(&self) -> &Tensor<C64> {
        &self.ricci
    }

    pub fn scal(&self) -> f64 {
        self.scal
    }

    pub fn is_scalar_flat_static(&self) -> bool {
        self.scal.abs() <= 1e-10 && self.second_ff.data.iter().all(|v| v.norm() == 0.0)
    }

    pub fn ricci_vanishes(&self) -> bool {
        self.ricci.data.iter().all(|v| v.norm() <= 1e-14)
    }

    /// Name used in reports and snapshot metadata.
    pub fn id(&self) -> String {
        match &self.kind {
            SliceKind::FlatTorus { n } => format!("flat-torus-{n}"),
            SliceKind::KasnerSlice { p, t0 } => format!("kasner({},{},{})@{}", p[0], p[1], p[2], t0),
            SliceKind::BergerInvariant { frame } => format!("berger({})", frame.metric[0][0]),
        }
    }

    /// Per-mode calculus; `None` is the zero mode (and the only mode of the invariant sector).
    pub fn mode_calc(&self, mode: Option<Mode>) -> SliceMode<'_> {
        let mut sym = [ZERO; 4];
        if let (Some(m), Backend::Torus { n }) = (mode, self.backend()) {
            for (a, s) in sym.iter_mut().enumerate().take(n) {
                *s = C64::new(0.0, m.0[a] as f64);
            }
        }
        SliceMode { calc: self.background.mode(&sym[..self.n]), geom: self }
    }

    /// Nonlinear constraint residual of the background data `(g, k)`.
    pub fn constraint_residual(&self) -> (f64, Vec<f64>) {
        let s = self.mode_calc(None);
        let k = &self.second_ff;
        let trk = self.background.trace(k);
        let phi1 = C64::new(self.scal, 0.0) - self.background.inner2(k, k) + trk * trk;
        let phi2 = s.div(k).sub(&s.grad(trk));
        (phi1.re, phi2.data.iter().map(|v| v.re).collect())
    }

    pub fn check_field(&self, field: &SliceField) -> Result<()> {
        match (self.backend(), field) {
            (Backend::Torus { n }, SliceField::Torus(f)) if f.lattice().dim() == n => Ok(()),
            (Backend::Invariant, SliceField::Invariant(_)) => Ok(()),
            _ => Err(Error::Backend(format!("field does not live on slice {}", self.id()))),
        }
    }

    /// Constant background tensor as a slice field (zero mode only on torus slices).
    pub fn constant_field(&self, lattice: Option<ModeLattice>, rank: Rank, t: &Tensor<C64>) -> Result<SliceField> {
        let comps = from_tensor(rank, t);
        match self.backend() {
            Backend::Invariant => Ok(SliceField::Invariant(InvariantField::from_complex(rank, &comps))),
            Backend::Torus { .. } => {
                let lattice = lattice.ok_or_else(|| Error::InvalidParameter("torus field needs a lattice".into()))?;
                let mut map = std::collections::BTreeMap::new();
                map.insert(Mode::ZERO, comps);
                Ok(SliceField::Torus(SpectralField::from_entries(lattice, rank, map)?))
            }
        }
    }
}

/// Tensor from stored components.
pub fn to_tensor(rank: Rank, n: usize, c: &[C64]) -> Tensor<C64> {
    match rank {
        Rank::Scalar => Tensor::scalar(c[0], n),
        Rank::OneForm => Tensor::from_vec(n, 1, c.to_vec()),
        Rank::Sym2 => Tensor::from_sym(n, c),
    }
}

/// Stored components of a tensor (symmetric part for two-tensors).
pub fn from_tensor(rank: Rank, t: &Tensor<C64>) -> Vec<C64> {
    match rank {
        Rank::Scalar => vec![t.data[0]],
        Rank::OneForm => t.data.clone(),
        Rank::Sym2 => {
            let n = t.dim;
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for a in 0..n {
                for b in a..n {
                    out.push((t.data[a * n + b] + t.data[b * n + a]) * 0.5);
                }
            }
            out
        }
    }
}

fn tensor_rank(rank: Rank) -> usize {
    match rank {
        Rank::Scalar => 0,
        Rank::OneForm => 1,
        Rank::Sym2 => 2,
    }
}

/// A field on a slice: spectral on torus slices, invariant on the Berger sphere.
#[derive(Clone, Debug, PartialEq)]
pub enum SliceField {
    Torus(SpectralField),
    Invariant(InvariantField),
}

impl SliceField {
    pub fn rank(&self) -> Rank {
        match self {
            SliceField::Torus(f) => f.rank(),
            SliceField::Invariant(f) => f.rank,
        }
    }

    pub fn as_torus(&self) -> Option<&SpectralField> {
        match self {
            SliceField::Torus(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_invariant(&self) -> Option<&InvariantField> {
        match self {
            SliceField::Invariant(f) => Some(f),
            _ => None,
        }
    }

    pub fn combine(&self, a: f64, other: &SliceField, b: f64) -> Result<SliceField> {
        match (self, other) {
            (SliceField::Torus(x), SliceField::Torus(y)) => Ok(SliceField::Torus(x.combine(a, y, b)?)),
            (SliceField::Invariant(x), SliceField::Invariant(y)) => Ok(SliceField::Invariant(x.combine(a, y, b)?)),
            _ => Err(Error::Backend("cannot combine torus and invariant fields".into())),
        }
    }

    pub fn add(&self, other: &SliceField) -> Result<SliceField> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SliceField) -> Result<SliceField> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> SliceField {
        match self {
            SliceField::Torus(f) => SliceField::Torus(f.scale(s)),
            SliceField::Invariant(f) => SliceField::Invariant(f.scale(s)),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            SliceField::Torus(f) => f.max_abs(),
            SliceField::Invariant(f) => f.max_abs(),
        }
    }

    /// Zero field of the given rank on the same backend and lattice.
    pub fn zeros_like(&self, rank: Rank) -> SliceField {
        match self {
            SliceField::Torus(f) => SliceField::Torus(SpectralField::empty(f.lattice(), rank)),
            SliceField::Invariant(_) => SliceField::Invariant(InvariantField::zeros(rank)),
        }
    }
}

/// Per-mode view of a slice with the operator kernels.
#[derive(Clone, Copy, Debug)]
pub struct SliceMode<'a> {
    pub calc: ModeCalc<'a, C64>,
    pub geom: &'a SliceGeometry,
}

impl<'a> SliceMode<'a> {
    pub fn n(&self) -> usize {
        self.geom.n
    }

    fn bg(&self) -> &'a Background<C64> {
        self.calc.bg
    }

    pub fn div(&self, t: &Tensor<C64>) -> Tensor<C64> {
        self.calc.divergence(t)
    }

    pub fn trace(&self, t: &Tensor<C64>) -> C64 {
        self.bg().trace(t)
    }

    pub fn grad(&self, f: C64) -> Tensor<C64> {
        self.calc.gradient(f)
    }

    pub fn hessian(&self, f: C64) -> Tensor<C64> {
        self.calc.hessian(f)
    }

    pub fn metric_times(&self, s: C64) -> Tensor<C64> {
        self.bg().metric.scale(s)
    }

    /// `h - (1/2) tr h g`.
    pub fn trace_reverse(&self, h: &Tensor<C64>) -> Tensor<C64> {
        h.sub(&self.metric_times(self.trace(h) * 0.5))
    }

    /// `delta d f`.
    pub fn laplacian_scalar(&self, f: C64) -> C64 {
        -self.div(&self.grad(f)).data[0]
    }

    pub fn laplacian_one(&self, w: &Tensor<C64>) -> Tensor<C64> {
        self.calc.hodge_laplacian_one(w)
    }

    pub fn lie(&self, w: &Tensor<C64>) -> Tensor<C64> {
        self.calc.lie_metric(w)
    }

    pub fn ck(&self, w: &Tensor<C64>) -> Tensor<C64> {
        let n = self.n() as f64;
        let d = self.div(w).data[0];
        self.lie(w).sub(&self.metric_times(d * (2.0 / n)))
    }

    pub fn ck_adjoint(&self, h: &Tensor<C64>) -> Tensor<C64> {
        let n = self.n() as f64;
        self.div(h).scale(C64::new(-2.0, 0.0)).add(&self.grad(self.trace(h)).scale(C64::new(2.0 / n, 0.0)))
    }

    /// `Ric(w#, .)`.
    pub fn ricci_of(&self, w: &Tensor<C64>) -> Tensor<C64> {
        let n = self.n();
        let x = self.bg().raise(w);
        let mut out = Tensor::zeros(n, 1);
        for a in 0..n {
            let mut acc = ZERO;
            for b in 0..n {
                acc += self.geom.ricci.at2(a, b) * x.data[b];
            }
            out.data[a] = acc;
        }
        out
    }

    /// `2 Delta w - 4 Ric(w#) + (2 - 4/n) d delta w`.
    pub fn ckl_normal(&self, w: &Tensor<C64>) -> Tensor<C64> {
        let n = self.n() as f64;
        let delta = self.calc.codifferential_one(w);
        self.laplacian_one(w)
            .scale(C64::new(2.0, 0.0))
            .sub(&self.ricci_of(w).scale(C64::new(4.0, 0.0)))
            .add(&self.grad(delta).scale(C64::new(2.0 - 4.0 / n, 0.0)))
    }

    pub fn ricci_inner(&self, h: &Tensor<C64>) -> C64 {
        self.bg().inner2(&self.geom.ricci, h)
    }

    pub fn apply(&self, op: SliceOp, rank: Rank, t: &Tensor<C64>) -> Result<(Rank, Tensor<C64>)> {
        let n = self.n();
        let mismatch = || Error::Mismatch(format!("{op:?} does not act on {rank:?} fields"));
        Ok(match (op, rank) {
            (SliceOp::Divergence, Rank::OneForm) => (Rank::Scalar, self.div(t)),
            (SliceOp::Divergence, Rank::Sym2) => (Rank::OneForm, self.div(t)),
            (SliceOp::Trace, Rank::Sym2) => (Rank::Scalar, Tensor::scalar(self.trace(t), n)),
            (SliceOp::TraceReverse, Rank::Sym2) => (Rank::Sym2, self.trace_reverse(t)),
            (SliceOp::Gradient, Rank::Scalar) => (Rank::OneForm, self.grad(t.data[0])),
            (SliceOp::Hessian, Rank::Scalar) => (Rank::Sym2, self.hessian(t.data[0])),
            (SliceOp::Laplacian, Rank::Scalar) => (Rank::Scalar, Tensor::scalar(self.laplacian_scalar(t.data[0]), n)),
            (SliceOp::Laplacian, Rank::OneForm) => (Rank::OneForm, self.laplacian_one(t)),
            (SliceOp::ConnectionLaplacian, r) => (r, self.calc.connection_laplacian(t)),
            (SliceOp::LieMetric, Rank::OneForm) => (Rank::Sym2, self.lie(t)),
            (SliceOp::ConformalKilling, Rank::OneForm) => (Rank::Sym2, self.ck(t)),
            (SliceOp::ConformalKillingAdjoint, Rank::Sym2) => (Rank::OneForm, self.ck_adjoint(t)),
            (SliceOp::CklNormal, Rank::OneForm) => (Rank::OneForm, self.ckl_normal(t)),
            _ => return Err(mismatch()),
        })
    }
}

/// Slice operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceOp {
    Divergence,
    Trace,
    TraceReverse,
    Gradient,
    Hessian,
    Laplacian,
    ConnectionLaplacian,
    LieMetric,
    ConformalKilling,
    ConformalKillingAdjoint,
    CklNormal,
}

/// Applies a slice operator to a field living on `geom`.
pub fn apply_slice_operator(geom: &SliceGeometry, op: SliceOp, field: &SliceField) -> Result<SliceField> {
    geom.check_field(field)?;
    let n = geom.n;
    let rank = field.rank();
    match field {
        SliceField::Invariant(f) => {
            let s = geom.mode_calc(None);
            let (out_rank, t) = s.apply(op, rank, &to_tensor(rank, n, &f.to_complex()))?;
            Ok(SliceField::Invariant(InvariantField::from_complex(out_rank, &from_tensor(out_rank, &t))))
        }
        SliceField::Torus(f) => {
            // Resolve the output rank (and rank errors) once.
            let probe = geom.mode_calc(None);
            let (out_rank, _) = probe.apply(op, rank, &Tensor::zeros(n, tensor_rank(rank)))?;
            Ok(SliceField::Torus(map_torus(geom, f, out_rank, |s, t| {
                s.apply(op, rank, t).expect("rank checked").1
            })))
        }
    }
}

/// Per-mode tensor map over a spectral field.
pub fn map_torus(
    geom: &SliceGeometry,
    f: &SpectralField,
    out_rank: Rank,
    mut op: impl FnMut(&SliceMode, &Tensor<C64>) -> Tensor<C64>,
) -> SpectralField {
    let n = geom.n;
    let rank = f.rank();
    f.map_modes(out_rank, |m, c| {
        let s = geom.mode_calc(Some(m));
        from_tensor(out_rank, &op(&s, &to_tensor(rank, n, c)))
    })
}

/// `L^2` pairing: flat components on torus slices, the invariant inner product on the Berger sphere.
pub fn field_inner(geom: &SliceGeometry, a: &SliceField, b: &SliceField) -> Result<f64> {
    match (a, b) {
        (SliceField::Torus(x), SliceField::Torus(y)) => crate::spectral::l2_inner(x, y),
        (SliceField::Invariant(x), SliceField::Invariant(y)) => {
            let frame = geom.frame().ok_or_else(|| Error::Backend("invariant field on a torus slice".into()))?;
            crate::invariant::inner(frame, x, y)
        }
        _ => Err(Error::Backend("cannot pair torus and invariant fields".into())),
    }
}

/// `H^s` norm on torus slices; the invariant `L^2` norm (all orders agree) on the Berger sphere.
pub fn field_norm(geom: &SliceGeometry, f: &SliceField, s: f64) -> Result<f64> {
    match f {
        SliceField::Torus(x) => Ok(crate::spectral::sobolev_norm_sq(x, s, None).sqrt()),
        SliceField::Invariant(_) => Ok(field_inner(geom, f, f)?.max(0.0).sqrt()),
    }
}

/// Per-mode map over several fields on one slice, producing several fields.
///
/// Torus inputs are aligned on the union of their mode sets; missing modes are zero.
pub fn map_fields(
    geom: &SliceGeometry,
    inputs: &[&SliceField],
    out_ranks: &[Rank],
    mut op: impl FnMut(&SliceMode, &[Tensor<C64>]) -> Vec<Tensor<C64>>,
) -> Result<Vec<SliceField>> {
    for f in inputs {
        geom.check_field(f)?;
    }
    let n = geom.n;
    match geom.backend() {
        Backend::Invariant => {
            let s = geom.mode_calc(None);
            let ts: Vec<Tensor<C64>> = inputs
                .iter()
                .map(|f| {
                    let f = f.as_invariant().expect("checked");
                    to_tensor(f.rank, n, &f.to_complex())
                })
                .collect();
            let out = op(&s, &ts);
            Ok(out
                .iter()
                .zip(out_ranks)
                .map(|(t, r)| SliceField::Invariant(InvariantField::from_complex(*r, &from_tensor(*r, t))))
                .collect())
        }
        Backend::Torus { .. } => {
            let fields: Vec<&SpectralField> = inputs.iter().map(|f| f.as_torus().expect("checked")).collect();
            let lattice = fields
                .first()
                .map(|f| f.lattice())
                .ok_or_else(|| Error::InvalidParameter("no input fields".into()))?;
            if fields.iter().any(|f| f.lattice() != lattice) {
                return Err(Error::Mismatch("input fields use different lattices".into()));
            }
            let mut modes: Vec<Mode> = fields.iter().flat_map(|f| f.modes().iter().copied()).collect();
            modes.sort();
            modes.dedup();
            let mut coeffs: Vec<Vec<C64>> = vec![Vec::new(); out_ranks.len()];
            for &m in &modes {
                let s = geom.mode_calc(Some(m));
                let ts: Vec<Tensor<C64>> = fields
                    .iter()
                    .map(|f| match f.mode_coeffs(m) {
                        Some(c) => to_tensor(f.rank(), n, c),
                        None => to_tensor(f.rank(), n, &vec![ZERO; f.components()]),
                    })
                    .collect();
                let out = op(&s, &ts);
                for ((dst, t), r) in coeffs.iter_mut().zip(&out).zip(out_ranks) {
                    dst.extend(from_tensor(*r, t));
                }
            }
            out_ranks
                .iter()
                .zip(coeffs)
                .map(|(r, c)| Ok(SliceField::Torus(SpectralField::from_mode_list(lattice, *r, modes.clone(), c)?)))
                .collect()
        }
    }
}

fn split_stacked<'v>(ranks: &[Rank], n: usize, x: &'v [C64]) -> Vec<&'v [C64]> {
    let mut out = Vec::with_capacity(ranks.len());
    let mut off = 0;
    for r in ranks {
        let d = r.components(n);
        out.push(&x[off..off + d]);
        off += d;
    }
    out
}

/// Applies a (possibly multi-field) operator to stacked per-mode components.
pub fn apply_stacked(s: &SliceMode, kind: OperatorKind, x: &[C64]) -> Result<Vec<C64>> {
    let n = s.n();
    let parts = split_stacked(&kind.domain(), n, x);
    let sym = |c: &[C64]| Tensor::from_sym(n, c);
    let one = |c: &[C64]| Tensor::from_vec(n, 1, c.to_vec());
    let out: Vec<Vec<C64>> = match kind {
        OperatorKind::Divergence => vec![s.div(&sym(parts[0])).data],
        OperatorKind::Trace => vec![vec![s.trace(&sym(parts[0]))]],
        OperatorKind::LieMetric => vec![from_tensor(Rank::Sym2, &s.lie(&one(parts[0])))],
        OperatorKind::ConformalKilling => vec![from_tensor(Rank::Sym2, &s.ck(&one(parts[0])))],
        OperatorKind::ConformalKillingAdjoint => vec![s.ck_adjoint(&sym(parts[0])).data],
        OperatorKind::CklNormal => vec![s.ckl_normal(&one(parts[0])).data],
        OperatorKind::Laplacian => vec![s.laplacian_one(&one(parts[0])).data],
        OperatorKind::MoncriefP => {
            let beta = one(parts[0]);
            let nn = parts[1][0];
            let h = s.lie(&beta);
            let m = s.hessian(nn).sub(&s.geom.ricci.scale(nn));
            vec![from_tensor(Rank::Sym2, &h), from_tensor(Rank::Sym2, &m)]
        }
        OperatorKind::MoncriefAdjoint => {
            let h = sym(parts[0]);
            let m = sym(parts[1]);
            let a = s.div(&h).scale(C64::new(-2.0, 0.0));
            let b = s.div(&s.div(&m)).data[0] - s.ricci_inner(&m);
            vec![a.data, vec![b]]
        }
        OperatorKind::SplitP { a, b } => {
            let phi = parts[0][0];
            let w = one(parts[1]);
            let lw = s.ck(&w);
            let first = s.laplacian_scalar(phi) + s.ricci_inner(&lw) * a;
            let second = s.ckl_normal(&w).add(&s.grad(phi).scale(C64::new(b, 0.0)));
            vec![vec![first], second.data]
        }
        OperatorKind::SplitAdjoint { a, b } => {
            let psi = parts[0][0];
            let eta = one(parts[1]);
            let delta = s.calc.codifferential_one(&eta);
            let first = s.laplacian_scalar(psi) + delta * b;
            let second = s
                .ckl_normal(&eta)
                .add(&s.ck_adjoint(&s.geom.ricci.scale(psi)).scale(C64::new(a, 0.0)));
            vec![vec![first], second.data]
        }
    };
    Ok(out.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{l2_inner, ModeLattice};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn background_slices_satisfy_constraints() {
        let (p1, p2) = SliceGeometry::flat_torus(3).unwrap().constraint_residual();
        assert_eq!(p1, 0.0);
        assert!(p2.iter().all(|v| *v == 0.0));
        let kas = SliceGeometry::kasner(KASNER_DEFAULT, 1.0).unwrap();
        let (p1, p2) = kas.constraint_residual();
        assert!(p1.abs() <= 1e-12 && p2.iter().all(|v| v.abs() <= 1e-12));
        let k = kas.second_fundamental_form();
        assert!((k.at2(0, 0).re - 2.0 / 3.0).abs() < 1e-15 && (k.at2(2, 2).re + 1.0 / 3.0).abs() < 1e-15);
        assert!((kas.background().trace(k).re - 1.0).abs() < 1e-15);
        let (p1, _) = SliceGeometry::kasner(KASNER_DEFAULT, 1.7).unwrap().constraint_residual();
        assert!(p1.abs() <= 1e-12);
        assert!(SliceGeometry::berger_scalar_flat().scal().abs() <= 1e-12);
    }

    #[test]
    fn kasner_rejection_names_both_sums() {
        let err = SliceGeometry::kasner([0.5, 0.5, 0.5], 1.0).unwrap_err().to_string();
        assert!(err.contains("sum p = 1.5") && err.contains("sum p^2 = 0.75"), "{err}");
    }

    #[test]
    fn laplacian_of_cosine_and_parallel_forms() {
        let geom = SliceGeometry::flat_torus(3).unwrap();
        let lat = ModeLattice::new(3, 2).unwrap();
        let mut e = BTreeMap::new();
        e.insert(Mode::new(&[1, 0, 0]), vec![c(0.5)]);
        e.insert(Mode::new(&[-1, 0, 0]), vec![c(0.5)]);
        let cosx = SliceField::Torus(SpectralField::from_entries(lat, Rank::Scalar, e).unwrap());
        let lap = apply_slice_operator(&geom, SliceOp::Laplacian, &cosx).unwrap();
        assert_eq!(lap, cosx);
        let mut e = BTreeMap::new();
        e.insert(Mode::ZERO, vec![c(1.0), c(0.0), c(0.0)]);
        let dx = SliceField::Torus(SpectralField::from_entries(lat, Rank::OneForm, e).unwrap());
        let l = apply_slice_operator(&geom, SliceOp::ConformalKilling, &dx).unwrap();
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn ckl_normal_matches_composition_and_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3] {
            let geom = SliceGeometry::flat_torus(n).unwrap();
            let lat = ModeLattice::new(n, 3).unwrap();
            let w = SliceField::Torus(SpectralField::random(lat, Rank::OneForm, 3, 1.0, 0.0, &mut rng));
            let lw = apply_slice_operator(&geom, SliceOp::ConformalKilling, &w).unwrap();
            let composed = apply_slice_operator(&geom, SliceOp::ConformalKillingAdjoint, &lw).unwrap();
            let closed = apply_slice_operator(&geom, SliceOp::CklNormal, &w).unwrap();
            assert!(composed.sub(&closed).unwrap().max_abs() <= 1e-12);
            let wf = w.as_torus().unwrap();
            for (m, v) in wf.iter() {
                let k = m.wavevector(n);
                let kk: f64 = k.iter().map(|x| x * x).sum();
                let kv: C64 = k.iter().zip(v).map(|(a, b)| b * *a).sum();
                let out = closed.as_torus().unwrap().mode_coeffs(m).unwrap();
                for i in 0..n {
                    let expect = v[i] * (2.0 * kk) + kv * k[i] * (2.0 - 4.0 / n as f64);
                    assert!((out[i] - expect).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn adjoint_pairs_under_l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let geom = SliceGeometry::flat_torus(3).unwrap();
        let lat = ModeLattice::new(3, 3).unwrap();
        let w = SpectralField::random(lat, Rank::OneForm, 3, 1.0, 0.0, &mut rng);
        let h = SpectralField::random(lat, Rank::Sym2, 3, 1.0, 0.0, &mut rng);
        let lw = apply_slice_operator(&geom, SliceOp::ConformalKilling, &SliceField::Torus(w.clone())).unwrap();
        let lsh = apply_slice_operator(&geom, SliceOp::ConformalKillingAdjoint, &SliceField::Torus(h.clone())).unwrap();
        let lhs = l2_inner(lw.as_torus().unwrap(), &h).unwrap();
        let rhs = l2_inner(&w, lsh.as_torus().unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        let tr = apply_slice_operator(&geom, SliceOp::Trace, &lw).unwrap();
        assert!(tr.max_abs() <= 1e-13);
    }

    #[test]
    fn backend_mismatch_is_rejected() {
        let geom = SliceGeometry::berger_scalar_flat();
        let lat = ModeLattice::new(3, 1).unwrap();
        let f = SliceField::Torus(SpectralField::zeros(lat, Rank::OneForm));
        assert!(matches!(apply_slice_operator(&geom, SliceOp::Divergence, &f), Err(Error::Backend(_))));
        let torus = SliceGeometry::flat_torus(3).unwrap();
        let s = SliceField::Torus(SpectralField::zeros(lat, Rank::Scalar));
        assert!(matches!(apply_slice_operator(&torus, SliceOp::Trace, &s), Err(Error::Mismatch(_))));
    }
}
