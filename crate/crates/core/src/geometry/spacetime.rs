//! Spacetime backgrounds `-dt^2 + g_t` and per-mode spacetime operators.
//!
//! Coordinates are `(t, x^1, .., x^n)` with `t` as axis 0. A perturbation mode
//! is `H(t) e^{i k.x}`; its components are Taylor jets in `t`, so each operator
//! becomes a time-dependent matrix acting on `(H, dH/dt, d^2H/dt^2)`.
//!
//! Symmetric spacetime two-tensors are stored in upper-triangle order of the
//! `(n+1) x (n+1)` index pairs, so the first `n+1` slots are `h_tt, h_t1, ..`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{Background, Jet, ModeCalc, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{validate_kasner, SliceGeometry};
use crate::spectral::{sym_index, Mode, ModeLattice, Rank, SpectralField};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Jet order used by evolution and diagnostics: value, first and second time derivative.
pub type J3 = Jet<3>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpacetimeKind {
    MinkowskiTorus { n: usize },
    Kasner { p: [f64; 3] },
}

/// Vacuum background with unit lapse and zero shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeBackground {
    pub kind: SpacetimeKind,
}

/// `d^m/dt^m t^a` for `m < N`.
fn power_jet<const N: usize>(t: f64, a: f64) -> Jet<N> {
    let mut d = Vec::with_capacity(N);
    let mut coef = 1.0;
    for m in 0..N {
        d.push(coef * t.powf(a - m as f64));
        coef *= a - m as f64;
    }
    Jet::real_derivatives(&d)
}

impl SpacetimeBackground {
    pub fn minkowski(n: usize) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidParameter(format!("torus dimension must be 2 or 3, got {n}")));
        }
        Ok(Self { kind: SpacetimeKind::MinkowskiTorus { n } })
    }

    pub fn kasner(p: [f64; 3]) -> Result<Self> {
        validate_kasner(p)?;
        Ok(Self { kind: SpacetimeKind::Kasner { p } })
    }

    /// Spatial dimension.
    pub fn n(&self) -> usize {
        match self.kind {
            SpacetimeKind::MinkowskiTorus { n } => n,
            SpacetimeKind::Kasner { .. } => 3,
        }
    }

    /// Spacetime dimension.
    pub fn dim(&self) -> usize {
        self.n() + 1
    }

    /// Number of stored components of a symmetric spacetime two-tensor.
    pub fn sym_len(&self) -> usize {
        let d = self.dim();
        d * (d + 1) / 2
    }

    pub fn id(&self) -> String {
        match &self.kind {
            SpacetimeKind::MinkowskiTorus { n } => format!("minkowski-torus-{n}"),
            SpacetimeKind::Kasner { p } => format!("kasner({},{},{})", p[0], p[1], p[2]),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, SpacetimeKind::MinkowskiTorus { .. })
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        match self.kind {
            SpacetimeKind::Kasner { .. } if !(t > 0.0) || !t.is_finite() => {
                Err(Error::TimeOutOfRange { t, range: "(0, inf) (Kasner singularity at t = 0)".into() })
            }
            _ if !t.is_finite() => Err(Error::TimeOutOfRange { t, range: "finite times".into() }),
            _ => Ok(()),
        }
    }

    /// Background connection at time `t` with components as jets in `t`.
    pub fn at<const N: usize>(&self, t: f64) -> Result<Background<Jet<N>>> {
        self.check_time(t)?;
        let d = self.dim();
        let mut metric = Tensor::zeros(d, 2);
        let mut inverse = Tensor::zeros(d, 2);
        let minus = Jet::<N>::constant(C64::new(-1.0, 0.0));
        metric.data[0] = minus;
        inverse.data[0] = minus;
        for i in 1..d {
            let (g, gi) = match self.kind {
                SpacetimeKind::MinkowskiTorus { .. } => {
                    (Jet::constant(C64::new(1.0, 0.0)), Jet::constant(C64::new(1.0, 0.0)))
                }
                SpacetimeKind::Kasner { p } => (power_jet(t, 2.0 * p[i - 1]), power_jet(t, -2.0 * p[i - 1])),
            };
            metric.data[i * d + i] = g;
            inverse.data[i * d + i] = gi;
        }
        Ok(Background::coordinate(metric, inverse, Some(0)))
    }

    /// Cached background and curvature at one instant.
    pub fn instant<const N: usize>(&self, t: f64) -> Result<Instant<N>> {
        let bg = self.at::<N>(t)?;
        let riemann = bg.riemann();
        Ok(Instant { t, bg, riemann })
    }

    /// The slice `{t} x T^n` with its induced data.
    pub fn slice(&self, t: f64) -> Result<SliceGeometry> {
        self.check_time(t)?;
        match self.kind {
            SpacetimeKind::MinkowskiTorus { n } => SliceGeometry::flat_torus(n),
            SpacetimeKind::Kasner { p } => SliceGeometry::kasner(p, t),
        }
    }

    /// Derivative symbol of a mode: zero on the time axis, `i k_j` on spatial axes.
    pub fn symbol(&self, mode: Mode) -> Vec<C64> {
        let mut s = vec![ZERO; self.dim()];
        for a in 0..self.n() {
            s[a + 1] = C64::new(0.0, mode.0[a] as f64);
        }
        s
    }
}

/// Background and Riemann tensor at one time.
#[derive(Clone, Debug)]
pub struct Instant<const N: usize> {
    pub t: f64,
    pub bg: Background<Jet<N>>,
    pub riemann: Tensor<Jet<N>>,
}

impl<const N: usize> Instant<N> {
    pub fn calc(&self, symbol: &[C64]) -> ModeCalc<'_, Jet<N>> {
        self.bg.mode(symbol)
    }

    /// `(R h)_xy = g^{cd} R^a_{ycx} h_ad`.
    pub fn rcirc(&self, h: &Tensor<Jet<N>>) -> Tensor<Jet<N>> {
        rcirc(&self.bg, &self.riemann, h)
    }

    pub fn apply(&self, op: SpacetimeOp, symbol: &[C64], input: &Tensor<Jet<N>>) -> Tensor<Jet<N>> {
        let calc = self.calc(symbol);
        match op {
            SpacetimeOp::Lichnerowicz => lichnerowicz(&calc, &self.riemann, input),
            SpacetimeOp::DivTraceReversed => div_trace_reversed(&calc, input),
            SpacetimeOp::DRic => d_ric(&calc, &self.riemann, input),
            SpacetimeOp::LieOfG => calc.lie_metric(input),
            SpacetimeOp::ConnectionWave => calc.connection_laplacian(input),
        }
    }
}

pub fn rcirc<T: Scalar>(bg: &Background<T>, riemann: &Tensor<T>, h: &Tensor<T>) -> Tensor<T> {
    let d = bg.dim;
    let mut out = Tensor::zeros(d, 2);
    for x in 0..d {
        for y in 0..d {
            let mut acc = T::zero();
            for c in 0..d {
                for dd in 0..d {
                    let gi = bg.inverse.at2(c, dd);
                    if gi.is_zero() {
                        continue;
                    }
                    for a in 0..d {
                        let r = riemann.at4(a, y, c, x);
                        if r.is_zero() {
                            continue;
                        }
                        acc += gi * r * h.at2(a, dd);
                    }
                }
            }
            out.data[x * d + y] = acc;
        }
    }
    out
}

/// `nabla* nabla h - 2 R h`.
pub fn lichnerowicz<T: Scalar>(calc: &ModeCalc<T>, riemann: &Tensor<T>, h: &Tensor<T>) -> Tensor<T> {
    let r = rcirc(calc.bg, riemann, h);
    calc.connection_laplacian(h).sub(&r.scale(C64::new(2.0, 0.0)))
}

/// `div (h - (1/2) tr h g)`.
pub fn div_trace_reversed<T: Scalar>(calc: &ModeCalc<T>, h: &Tensor<T>) -> Tensor<T> {
    let tr = calc.bg.trace(h);
    let hbar = h.sub(&calc.bg.metric.mul_scalar(tr.scale(C64::new(0.5, 0.0))));
    calc.divergence(&hbar)
}

/// `(1/2) (box_L h + L_{(div hbar)#} g)`.
pub fn d_ric<T: Scalar>(calc: &ModeCalc<T>, riemann: &Tensor<T>, h: &Tensor<T>) -> Tensor<T> {
    let w = div_trace_reversed(calc, h);
    lichnerowicz(calc, riemann, h)
        .add(&calc.lie_metric(&w))
        .scale(C64::new(0.5, 0.0))
}

/// Per-mode spacetime operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacetimeOp {
    /// `box_L` on symmetric two-tensors.
    Lichnerowicz,
    /// `h -> div hbar`.
    DivTraceReversed,
    /// Linearised Ricci tensor.
    DRic,
    /// `V_flat -> L_V g`.
    LieOfG,
    /// `nabla* nabla` on one-forms.
    ConnectionWave,
}

impl SpacetimeOp {
    pub fn input_rank(self) -> usize {
        match self {
            SpacetimeOp::LieOfG | SpacetimeOp::ConnectionWave => 1,
            _ => 2,
        }
    }

    pub fn output_rank(self) -> usize {
        match self {
            SpacetimeOp::DivTraceReversed | SpacetimeOp::ConnectionWave => 1,
            _ => 2,
        }
    }
}

/// Stored components of a spacetime tensor of rank 1 or 2.
pub fn stored_len(d: usize, rank: usize) -> usize {
    if rank == 2 {
        d * (d + 1) / 2
    } else {
        d
    }
}

pub fn tensor_from_stored<T: Scalar>(d: usize, rank: usize, c: &[T]) -> Tensor<T> {
    if rank == 2 {
        Tensor::from_sym(d, c)
    } else {
        Tensor::from_vec(d, 1, c.to_vec())
    }
}

pub fn stored_from_tensor<T: Scalar>(rank: usize, t: &Tensor<T>) -> Vec<T> {
    if rank == 2 {
        let d = t.dim;
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for a in 0..d {
            for b in a..d {
                out.push((t.data[a * d + b] + t.data[b * d + a]).scale(C64::new(0.5, 0.0)));
            }
        }
        out
    } else {
        t.data.clone()
    }
}

/// Symbol of a spacetime operator on one Fourier mode.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub kind: SpacetimeOp,
    pub background: SpacetimeBackground,
    pub mode: Mode,
}

pub fn assemble_mode_operator(background: &SpacetimeBackground, kind: SpacetimeOp, mode: Mode) -> ModeOperator {
    ModeOperator { kind, background: background.clone(), mode }
}

impl ModeOperator {
    pub fn input_len(&self) -> usize {
        stored_len(self.background.dim(), self.kind.input_rank())
    }

    pub fn output_len(&self) -> usize {
        stored_len(self.background.dim(), self.kind.output_rank())
    }

    /// Applies the operator to input jets; output jets are exact up to the
    /// order lost to differentiation (order 0 for second-order operators).
    pub fn apply<const N: usize>(&self, t: f64, input: &[Jet<N>]) -> Result<Vec<Jet<N>>> {
        let inst = self.background.instant::<N>(t)?;
        Ok(self.apply_at(&inst, input))
    }

    pub fn apply_at<const N: usize>(&self, inst: &Instant<N>, input: &[Jet<N>]) -> Vec<Jet<N>> {
        let d = self.background.dim();
        let x = tensor_from_stored(d, self.kind.input_rank(), input);
        let y = inst.apply(self.kind, &self.background.symbol(self.mode), &x);
        stored_from_tensor(self.kind.output_rank(), &y)
    }

    /// Matrix acting on `(H, dH/dt, d^2H/dt^2)` stacked, returning output values at `t`.
    pub fn matrix(&self, t: f64) -> Result<DMatrix<C64>> {
        let inst = self.background.instant::<3>(t)?;
        let nin = self.input_len();
        let nout = self.output_len();
        let mut m = DMatrix::from_element(nout, 3 * nin, ZERO);
        for order in 0..3 {
            for c in 0..nin {
                let mut x = vec![J3::zero(); nin];
                let mut d = [ZERO; 3];
                d[order] = C64::new(1.0, 0.0);
                x[c] = J3::from_derivatives(&d);
                let y = self.apply_at(&inst, &x);
                for (r, v) in y.iter().enumerate() {
                    m[(r, order * nin + c)] = v.value();
                }
            }
        }
        Ok(m)
    }
}

/// Data of a spacetime perturbation on a slice `t = t0`: `h` and `nabla_nu h`,
/// each split into normal-normal, normal-tangential and tangential blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyJet {
    pub background: SpacetimeBackground,
    pub t0: f64,
    pub h_nn: SpectralField,
    pub h_nx: SpectralField,
    pub h_xx: SpectralField,
    pub dh_nn: SpectralField,
    pub dh_nx: SpectralField,
    pub dh_xx: SpectralField,
}

/// Spacetime storage slot of a (normal/tangential) block entry.
pub fn block_slots(n: usize) -> (usize, Vec<usize>, Vec<usize>) {
    let d = n + 1;
    let nn = sym_index(d, 0, 0);
    let nx = (0..n).map(|i| sym_index(d, 0, i + 1)).collect();
    let xx = crate::spectral::sym_pairs(n)
        .into_iter()
        .map(|(i, j)| sym_index(d, i + 1, j + 1))
        .collect();
    (nn, nx, xx)
}

impl CauchyJet {
    pub fn zeros(background: &SpacetimeBackground, t0: f64, lattice: ModeLattice) -> Result<Self> {
        background.check_time(t0)?;
        if lattice.dim() != background.n() {
            return Err(Error::Mismatch("lattice dimension differs from background".into()));
        }
        let e = |r| SpectralField::empty(lattice, r);
        Ok(Self {
            background: background.clone(),
            t0,
            h_nn: e(Rank::Scalar),
            h_nx: e(Rank::OneForm),
            h_xx: e(Rank::Sym2),
            dh_nn: e(Rank::Scalar),
            dh_nx: e(Rank::OneForm),
            dh_xx: e(Rank::Sym2),
        })
    }

    pub fn lattice(&self) -> ModeLattice {
        self.h_xx.lattice()
    }

    fn blocks(&self) -> [&SpectralField; 6] {
        [&self.h_nn, &self.h_nx, &self.h_xx, &self.dh_nn, &self.dh_nx, &self.dh_xx]
    }

    /// Union of the modes carried by any block, sorted.
    pub fn modes(&self) -> Vec<Mode> {
        let mut all: Vec<Mode> = self.blocks().iter().flat_map(|b| b.modes().iter().copied()).collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks().iter().fold(0.0, |m, b| m.max(b.max_abs()))
    }

    /// `(h, nabla_nu h)` of one mode in spacetime storage order.
    pub fn mode_state(&self, mode: Mode) -> (Vec<C64>, Vec<C64>) {
        let n = self.background.n();
        let len = self.background.sym_len();
        let (nn, nx, xx) = block_slots(n);
        let fill = |s: &SpectralField, v: &SpectralField, w: &SpectralField| {
            let mut out = vec![ZERO; len];
            if let Some(c) = s.mode_coeffs(mode) {
                out[nn] = c[0];
            }
            if let Some(c) = v.mode_coeffs(mode) {
                for (i, &slot) in nx.iter().enumerate() {
                    out[slot] = c[i];
                }
            }
            if let Some(c) = w.mode_coeffs(mode) {
                for (i, &slot) in xx.iter().enumerate() {
                    out[slot] = c[i];
                }
            }
            out
        };
        (fill(&self.h_nn, &self.h_nx, &self.h_xx), fill(&self.dh_nn, &self.dh_nx, &self.dh_xx))
    }

    /// Rebuilds a jet from per-mode states.
    /// Hermitian random jet with every block drawn as [`SpectralField::random`].
    pub fn random<R: rand::Rng>(
        background: &SpacetimeBackground,
        t0: f64,
        lattice: ModeLattice,
        kmax: usize,
        amp: f64,
        decay: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut jet = Self::zeros(background, t0, lattice)?;
        let mut r = |rank| SpectralField::random(lattice, rank, kmax, amp, decay, rng);
        jet.h_nn = r(Rank::Scalar);
        jet.h_nx = r(Rank::OneForm);
        jet.h_xx = r(Rank::Sym2);
        jet.dh_nn = r(Rank::Scalar);
        jet.dh_nx = r(Rank::OneForm);
        jet.dh_xx = r(Rank::Sym2);
        Ok(jet)
    }

    pub fn from_mode_states(
        background: &SpacetimeBackground,
        t0: f64,
        lattice: ModeLattice,
        states: &[(Mode, Vec<C64>, Vec<C64>)],
    ) -> Result<Self> {
        let n = background.n();
        let (nn, nx, xx) = block_slots(n);
        let modes: Vec<Mode> = states.iter().map(|s| s.0).collect();
        let pick = |which: usize, slots: &[usize]| -> Vec<C64> {
            states
                .iter()
                .flat_map(|s| {
                    let v = if which == 0 { &s.1 } else { &s.2 };
                    slots.iter().map(move |&i| v[i])
                })
                .collect()
        };
        let mk = |r: Rank, which: usize, slots: &[usize]| {
            SpectralField::from_mode_list(lattice, r, modes.clone(), pick(which, slots))
        };
        let mut jet = Self {
            background: background.clone(),
            t0,
            h_nn: mk(Rank::Scalar, 0, &[nn])?,
            h_nx: mk(Rank::OneForm, 0, &nx)?,
            h_xx: mk(Rank::Sym2, 0, &xx)?,
            dh_nn: mk(Rank::Scalar, 1, &[nn])?,
            dh_nx: mk(Rank::OneForm, 1, &nx)?,
            dh_xx: mk(Rank::Sym2, 1, &xx)?,
        };
        for b in [
            &mut jet.h_nn,
            &mut jet.h_nx,
            &mut jet.h_xx,
            &mut jet.dh_nn,
            &mut jet.dh_nx,
            &mut jet.dh_xx,
        ] {
            b.enforce_hermitian();
        }
        Ok(jet)
    }
}

/// `k(X, Y) = g(nabla_X d/dt, Y)` of the slice through an instant, in slice indices.
pub fn instant_second_ff<const N: usize>(inst: &Instant<N>) -> Tensor<C64> {
    let d = inst.bg.dim;
    let n = d - 1;
    let mut k = Tensor::zeros(n, 2);
    for x in 0..n {
        for y in 0..n {
            let mut acc = ZERO;
            for c in 0..d {
                acc += inst.bg.gamma(c, x + 1, 0).value() * inst.bg.metric.at2(c, y + 1).value();
            }
            k.data[x * n + y] = acc;
        }
    }
    k
}

/// Induced `(h~, m~)` of one mode, in slice storage, from `h` and `dh/dt` in spacetime storage.
pub fn induced_mode<const N: usize>(
    inst: &Instant<N>,
    symbol: &[C64],
    h: &[C64],
    hdot: &[C64],
) -> (Vec<C64>, Vec<C64>) {
    let d = inst.bg.dim;
    let n = d - 1;
    let jets: Vec<Jet<N>> = h.iter().zip(hdot).map(|(a, b)| Jet::from_derivatives(&[*a, *b])).collect();
    let ht = Tensor::from_sym(d, &jets);
    let nh = inst.calc(symbol).covariant(&ht);
    let k = instant_second_ff(inst);
    let htt = h[0];
    let mut tilde_h = Vec::with_capacity(n * (n + 1) / 2);
    let mut tilde_m = Vec::with_capacity(n * (n + 1) / 2);
    for (x, y) in crate::spectral::sym_pairs(n) {
        tilde_h.push(ht.at2(x + 1, y + 1).value());
        let m = -0.5 * htt * k.at2(x, y) - 0.5 * nh.at3(x + 1, 0, y + 1).value() - 0.5 * nh.at3(y + 1, 0, x + 1).value()
            + 0.5 * nh.at3(0, x + 1, y + 1).value();
        tilde_m.push(m);
    }
    (tilde_h, tilde_m)
}

/// Direction of [`nu_jet_conversion`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetDirection {
    /// `nabla_nu h` blocks to `d/dt` of the components.
    NuToCoordinate,
    CoordinateToNu,
}

/// `d/dt h_ab - (nabla_t h)_ab = Gamma^c_{ta} h_cb + Gamma^c_{tb} h_ac`.
pub fn connection_correction(bg: &Background<J3>, h: &[C64]) -> Vec<C64> {
    let d = bg.dim;
    let ht = Tensor::from_sym(d, h);
    let mut out = Tensor::zeros(d, 2);
    for a in 0..d {
        for b in 0..d {
            let mut acc = ZERO;
            for c in 0..d {
                acc += bg.gamma(c, 0, a).value() * ht.at2(c, b) + bg.gamma(c, 0, b).value() * ht.at2(a, c);
            }
            out.data[a * d + b] = acc;
        }
    }
    out.to_sym()
}

/// Converts the derivative blocks of a jet between `nabla_nu` and `d/dt` form.
pub fn nu_jet_conversion(jet: &CauchyJet, direction: JetDirection) -> Result<CauchyJet> {
    let bg = jet.background.at::<3>(jet.t0)?;
    let states: Vec<(Mode, Vec<C64>, Vec<C64>)> = jet
        .modes()
        .into_iter()
        .map(|m| {
            let (h, dh) = jet.mode_state(m);
            let corr = connection_correction(&bg, &h);
            let out: Vec<C64> = match direction {
                JetDirection::NuToCoordinate => dh.iter().zip(&corr).map(|(a, b)| a + b).collect(),
                JetDirection::CoordinateToNu => dh.iter().zip(&corr).map(|(a, b)| a - b).collect(),
            };
            (m, h, out)
        })
        .collect();
    CauchyJet::from_mode_states(&jet.background, jet.t0, jet.lattice(), &states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::KASNER_DEFAULT;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn rand_jet<const N: usize>(rng: &mut ChaCha8Rng) -> Jet<N> {
        let d: Vec<C64> = (0..N).map(|_| rand_c(rng)).collect();
        Jet::from_derivatives(&d)
    }

    #[test]
    fn kasner_is_ricci_flat() {
        let bg = SpacetimeBackground::kasner(KASNER_DEFAULT).unwrap();
        for t in [0.5, 1.0, 1.7, 3.0] {
            let ric = bg.at::<3>(t).unwrap().ricci();
            assert!(ric.data.iter().all(|v| v.value().norm() <= 1e-12));
        }
    }

    #[test]
    fn minkowski_box_is_wave_operator() {
        let bg = SpacetimeBackground::minkowski(3).unwrap();
        let op = assemble_mode_operator(&bg, SpacetimeOp::Lichnerowicz, Mode::ZERO);
        let m = op.matrix(0.0).unwrap();
        for r in 0..10 {
            for c in 0..30 {
                let expect = if c == 20 + r { 1.0 } else { 0.0 };
                assert!((m[(r, c)] - C64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
        let k = Mode::new(&[1, -2, 0]);
        let m = assemble_mode_operator(&bg, SpacetimeOp::Lichnerowicz, k).matrix(0.3).unwrap();
        for r in 0..10 {
            assert!((m[(r, r)] - C64::new(5.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn flat_lie_derivative_matches_hand_formula() {
        let bg = SpacetimeBackground::minkowski(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = Mode::new(&[2, 1, -1]);
        let sym = bg.symbol(k);
        let op = assemble_mode_operator(&bg, SpacetimeOp::LieOfG, k);
        let v: Vec<J3> = (0..4).map(|_| rand_jet(&mut rng)).collect();
        let out = op.apply(0.0, &v).unwrap();
        let partial = |a: usize, x: &J3| if a == 0 { x.derivative(1) } else { sym[a] * x.value() };
        for a in 0..4 {
            for b in a..4 {
                let expect = partial(a, &v[b]) + partial(b, &v[a]);
                assert!((out[sym_index(4, a, b)].value() - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn gauge_solutions_are_in_the_kernel_of_dric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for bg in [SpacetimeBackground::minkowski(3).unwrap(), SpacetimeBackground::kasner(KASNER_DEFAULT).unwrap()] {
            let inst = bg.instant::<5>(1.3).unwrap();
            for _ in 0..5 {
                let k = Mode::new(&[rng.gen_range(-3..=3), rng.gen_range(-3..=3), rng.gen_range(-3..=3)]);
                let sym = bg.symbol(k);
                let w = Tensor::from_vec(4, 1, (0..4).map(|_| rand_jet::<5>(&mut rng)).collect());
                let h = inst.apply(SpacetimeOp::LieOfG, &sym, &w);
                let dric = inst.apply(SpacetimeOp::DRic, &sym, &h);
                let hn = h.data.iter().fold(0.0f64, |m, v| m.max(v.value().norm()));
                let rn = dric.data.iter().fold(0.0f64, |m, v| m.max(v.value().norm()));
                assert!(rn <= 1e-10 * hn, "{rn} vs {hn}");
            }
        }
    }

    #[test]
    fn killing_wave_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bg in [SpacetimeBackground::minkowski(3).unwrap(), SpacetimeBackground::kasner(KASNER_DEFAULT).unwrap()] {
            let inst = bg.instant::<4>(1.1).unwrap();
            let ric = inst.bg.ricci();
            for _ in 0..5 {
                let k = Mode::new(&[rng.gen_range(-2..=2), rng.gen_range(-2..=2), rng.gen_range(-2..=2)]);
                let sym = bg.symbol(k);
                let calc = inst.calc(&sym);
                let w = Tensor::from_vec(4, 1, (0..4).map(|_| rand_jet::<4>(&mut rng)).collect());
                let lie = calc.lie_metric(&w);
                let lhs = div_trace_reversed(&calc, &lie);
                let wave = calc.connection_laplacian(&w);
                let x = inst.bg.raise(&w);
                for a in 0..4 {
                    let mut ricv = Jet::<4>::zero();
                    for b in 0..4 {
                        ricv += ric.at2(a, b) * x.data[b];
                    }
                    let res = lhs.data[a] + wave.data[a] - ricv;
                    assert!(res.value().norm() <= 1e-10 * (1.0 + lhs.data[a].value().norm()));
                }
            }
        }
    }

    #[test]
    fn rcirc_of_metric_is_ricci() {
        let frame = crate::invariant::HomogeneousFrame::berger(2.0).unwrap();
        let bg = frame.background().unwrap();
        let riem = bg.riemann();
        let r = rcirc(&bg, &riem, &bg.metric);
        let ric = bg.ricci();
        for (a, b) in r.data.iter().zip(&ric.data) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn nu_conversion() {
        let lattice = ModeLattice::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mink = SpacetimeBackground::minkowski(3).unwrap();
        let mut jet = CauchyJet::zeros(&mink, 0.0, lattice).unwrap();
        jet.h_xx = SpectralField::random(lattice, Rank::Sym2, 2, 1.0, 0.0, &mut rng);
        jet.dh_nx = SpectralField::random(lattice, Rank::OneForm, 2, 1.0, 0.0, &mut rng);
        let conv = nu_jet_conversion(&jet, JetDirection::NuToCoordinate).unwrap();
        assert!(conv.dh_nx.sub(&jet.dh_nx).unwrap().max_abs() == 0.0);

        let kas = SpacetimeBackground::kasner(KASNER_DEFAULT).unwrap();
        let mut jet = CauchyJet::zeros(&kas, 1.0, lattice).unwrap();
        jet.h_nn = SpectralField::random(lattice, Rank::Scalar, 2, 1.0, 0.0, &mut rng);
        jet.h_nx = SpectralField::random(lattice, Rank::OneForm, 2, 1.0, 0.0, &mut rng);
        jet.h_xx = SpectralField::random(lattice, Rank::Sym2, 2, 1.0, 0.0, &mut rng);
        jet.dh_xx = SpectralField::random(lattice, Rank::Sym2, 2, 1.0, 0.0, &mut rng);
        let there = nu_jet_conversion(&jet, JetDirection::NuToCoordinate).unwrap();
        let back = nu_jet_conversion(&there, JetDirection::CoordinateToNu).unwrap();
        for (a, b) in [(&back.dh_xx, &jet.dh_xx), (&back.dh_nx, &jet.dh_nx), (&back.dh_nn, &jet.dh_nn)] {
            assert!(a.sub(b).unwrap().max_abs() <= 1e-13);
        }

        // h = g on the slice: d/dt g_ij = 2 k_ij while nabla g = 0.
        let mut e = std::collections::BTreeMap::new();
        e.insert(Mode::ZERO, vec![C64::new(1.0, 0.0), ZERO, ZERO, C64::new(1.0, 0.0), ZERO, C64::new(1.0, 0.0)]);
        let mut jet = CauchyJet::zeros(&kas, 1.0, lattice).unwrap();
        jet.h_xx = SpectralField::from_entries(lattice, Rank::Sym2, e).unwrap();
        let conv = nu_jet_conversion(&jet, JetDirection::NuToCoordinate).unwrap();
        let d = conv.dh_xx.mode_coeffs(Mode::ZERO).unwrap();
        for (slot, (i, j)) in crate::spectral::sym_pairs(3).into_iter().enumerate() {
            let expect = if i == j { 2.0 * KASNER_DEFAULT[i] } else { 0.0 };
            assert!((d[slot] - C64::new(expect, 0.0)).norm() < 1e-14);
        }
    }
}
