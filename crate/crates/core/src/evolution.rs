//! Cauchy problem for `box_L h = 0` mode by mode, with gauge and constraint
//! monitors, induced data and recovery of gauge vector fields.
//!
//! Per mode the equation is a linear second-order system `h'' = -M(t, k) (h, h')`.
//! On Minkowski tori it is solved in closed form; on Kasner it is integrated
//! with the classical fourth-order Runge-Kutta method.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{Scalar, Tensor};
use crate::constraints::{dphi, InitialDataPair};
use crate::error::{Error, Result};
use crate::geometry::spacetime::{
    connection_correction, induced_mode, stored_len, tensor_from_stored, Instant, J3,
};
use crate::geometry::{
    field_norm, map_fields, CauchyJet, SliceField, SpacetimeBackground, SpacetimeOp, SliceGeometry,
};
use crate::spectral::{pairwise_sum, sym_index, sym_pairs, Mode, ModeLattice, Rank, SpectralField};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Relative size below which a fitted symbol entry counts as zero.
const SYMBOL_ZERO: f64 = 1e-13;

/// Tolerance of the monomial time dependence check.
const SYMBOL_CHECK: f64 = 1e-10;

/// Cauchy jet of the gauge-choice construction: `h = h~` tangentially, `h(nu, .) = 0`,
/// `nabla_nu h` from `(h~, m~)`, so that the induced data are `(h~, m~)` and `div hbar = 0` on the slice.
pub fn build_cauchy_jet(pair: &InitialDataPair, background: &SpacetimeBackground, t0: f64) -> Result<CauchyJet> {
    let slice = background.slice(t0)?;
    if slice.kind() != pair.slice.kind() {
        return Err(Error::Mismatch(format!(
            "data live on {} but the background slice at t = {t0} is {}",
            pair.slice.id(),
            slice.id()
        )));
    }
    let h = pair.h.as_torus().ok_or_else(|| Error::Backend("spacetime evolution needs torus fields".into()))?;
    let k = slice.second_fundamental_form().clone();
    let bg = slice.background();
    let out = map_fields(&slice, &[&pair.h, &pair.m], &[Rank::Sym2, Rank::OneForm, Rank::Scalar], |s, t| {
        let (ht, mt) = (&t[0], &t[1]);
        let dxx = mt.scale(C64::new(2.0, 0.0)).sub(&bg.compose(ht, &k)).sub(&bg.compose(&k, ht));
        let dnx = s.div(&s.trace_reverse(ht));
        let dnn = Tensor::scalar(s.trace(mt) * -2.0, s.n());
        vec![dxx, dnx, dnn]
    })?;
    let mut it = out.into_iter().map(|f| match f {
        SliceField::Torus(mut x) => {
            x.enforce_hermitian();
            x
        }
        SliceField::Invariant(_) => unreachable!("torus inputs give torus outputs"),
    });
    let mut jet = CauchyJet::zeros(background, t0, h.lattice())?;
    jet.h_xx = h.clone();
    jet.dh_xx = it.next().expect("three outputs");
    jet.dh_nx = it.next().expect("three outputs");
    jet.dh_nn = it.next().expect("three outputs");
    Ok(jet)
}

/// Wavevector monomials `1, k_j, k_i k_j (i <= j)` in spatial dimension `n`.
fn monomials(n: usize) -> Vec<(Option<usize>, Option<usize>)> {
    let mut out = vec![(None, None)];
    out.extend((0..n).map(|j| (Some(j), None)));
    out.extend(sym_pairs(n).into_iter().map(|(i, j)| (Some(i), Some(j))));
    out
}

fn monomial_value(m: (Option<usize>, Option<usize>), k: &[f64]) -> f64 {
    m.0.map_or(1.0, |i| k[i]) * m.1.map_or(1.0, |j| k[j])
}

/// Dense matrix of an operator on `(value, d/dt)` inputs at one instant; second derivatives are zero.
fn evaluate_matrix(bg: &SpacetimeBackground, kind: SpacetimeOp, inst: &Instant<3>, mode: Mode) -> Vec<Vec<C64>> {
    let d = bg.dim();
    let nin = stored_len(d, kind.input_rank());
    let symbol = bg.symbol(mode);
    let mut cols = Vec::with_capacity(2 * nin);
    for order in 0..2 {
        for c in 0..nin {
            let mut x = vec![J3::zero(); nin];
            let mut dv = [ZERO; 2];
            dv[order] = C64::new(1.0, 0.0);
            x[c] = J3::from_derivatives(&dv);
            let y = inst.apply(kind, &symbol, &tensor_from_stored(d, kind.input_rank(), &x));
            let y = crate::geometry::spacetime::stored_from_tensor(kind.output_rank(), &y);
            cols.push(y.iter().map(|v| v.value()).collect());
        }
    }
    cols
}

/// Coefficient matrices (column lists) of each wavevector monomial at time `t`.
fn monomial_coefficients(bg: &SpacetimeBackground, kind: SpacetimeOp, t: f64) -> Result<Vec<Vec<Vec<C64>>>> {
    let n = bg.n();
    let inst = bg.instant::<3>(t)?;
    let eval = |v: &[i32]| evaluate_matrix(bg, kind, &inst, Mode::new(v));
    let lin = |a: &Vec<Vec<C64>>, sa: f64, b: &Vec<Vec<C64>>, sb: f64| -> Vec<Vec<C64>> {
        a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * sa + q * sb).collect()).collect()
    };
    let unit = |j: usize, s: i32| {
        let mut v = vec![0; n];
        v[j] = s;
        v
    };
    let m0 = eval(&vec![0; n]);
    let mut linear = Vec::new();
    let mut square = Vec::new();
    for j in 0..n {
        let p = eval(&unit(j, 1));
        let m = eval(&unit(j, -1));
        linear.push(lin(&p, 0.5, &m, -0.5));
        square.push(lin(&lin(&p, 0.5, &m, 0.5), 1.0, &m0, -1.0));
    }
    let mut out = vec![m0.clone()];
    out.extend(linear.iter().cloned());
    for (i, j) in sym_pairs(n) {
        if i == j {
            out.push(square[i].clone());
        } else {
            let mut v = vec![0; n];
            v[i] = 1;
            v[j] = 1;
            let mut c = lin(&eval(&v), 1.0, &m0, -1.0);
            for part in [&linear[i], &linear[j], &square[i], &square[j]] {
                c = lin(&c, 1.0, part, -1.0);
            }
            out.push(c);
        }
    }
    Ok(out)
}

fn max_entry(c: &[Vec<Vec<C64>>]) -> f64 {
    c.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.norm()))
}

/// Symbol of a spacetime operator acting on `(value, d/dt)` of one mode, as a quadratic
/// polynomial in the wavevector whose coefficients are monomials `c t^beta` in time.
///
/// The time dependence is fitted at `t = 1` and `t = e` and verified at `t = 2`; both
/// backgrounds admit a homothety that makes every entry a single power of `t`.
#[derive(Clone, Debug)]
pub struct OperatorSymbol {
    pub kind: SpacetimeOp,
    n: usize,
    nin: usize,
    nout: usize,
    exponents: Vec<f64>,
    /// `(monomial, row, column, coefficient at t = 1, exponent index)`, sorted by row, column, exponent.
    entries: Vec<(usize, usize, usize, C64, usize)>,
}

impl OperatorSymbol {
    pub fn fit(bg: &SpacetimeBackground, kind: SpacetimeOp) -> Result<Self> {
        let e = std::f64::consts::E;
        let c1 = monomial_coefficients(bg, kind, 1.0)?;
        let ce = monomial_coefficients(bg, kind, e)?;
        let c2 = monomial_coefficients(bg, kind, 2.0)?;
        let (s1, se, s2) = (max_entry(&c1), max_entry(&ce), max_entry(&c2));
        let d = bg.dim();
        let nin = stored_len(d, kind.input_rank());
        let nout = stored_len(d, kind.output_rank());
        let mut exponents: Vec<f64> = Vec::new();
        let mut entries = Vec::new();
        let fail = |what: &str| Error::Backend(format!("{kind:?} symbol on {} {what}", bg.id()));
        for (a, cols) in c1.iter().enumerate() {
            for (c, col) in cols.iter().enumerate() {
                for (r, &v1) in col.iter().enumerate() {
                    let ve = ce[a][c][r];
                    let v2 = c2[a][c][r];
                    let z1 = v1.norm() <= SYMBOL_ZERO * s1;
                    let ze = ve.norm() <= SYMBOL_ZERO * se;
                    if z1 && ze {
                        if v2.norm() > SYMBOL_CHECK * s2.max(1.0) {
                            return Err(fail("is not a power of t"));
                        }
                        continue;
                    }
                    if z1 != ze {
                        return Err(fail("is not a power of t"));
                    }
                    let ratio = ve / v1;
                    if ratio.im.abs() > SYMBOL_CHECK * ratio.norm() || ratio.re <= 0.0 {
                        return Err(fail("changes phase in time"));
                    }
                    let beta = ratio.re.ln();
                    if (v2 - v1 * 2f64.powf(beta)).norm() > SYMBOL_CHECK * s2.max(1.0) {
                        return Err(fail("is not a power of t"));
                    }
                    let idx = match exponents.iter().position(|b| (b - beta).abs() <= 1e-9) {
                        Some(i) => i,
                        None => {
                            exponents.push(beta);
                            exponents.len() - 1
                        }
                    };
                    entries.push((a, r, c, v1, idx));
                }
            }
        }
        entries.sort_by_key(|e| (e.1, e.2, e.4, e.0));
        Ok(Self { kind, n: bg.n(), nin, nout, exponents, entries })
    }

    pub fn input_len(&self) -> usize {
        self.nin
    }

    pub fn output_len(&self) -> usize {
        self.nout
    }

    /// `d^l/dt^l t^beta` for every exponent.
    pub fn powers(&self, t: f64, l: usize) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|&b| {
                let fall: f64 = (0..l).map(|i| b - i as f64).product();
                if fall == 0.0 {
                    0.0
                } else {
                    fall * t.powf(b - l as f64)
                }
            })
            .collect()
    }

    /// The symbol restricted to one mode.
    pub fn for_mode(&self, mode: Mode) -> ModeSymbol {
        let k: Vec<f64> = (0..self.n).map(|j| mode.0[j] as f64).collect();
        let mono = monomials(self.n);
        let mut entries: Vec<(usize, usize, C64, usize)> = Vec::new();
        for &(a, r, c, v, e) in &self.entries {
            let w = v * monomial_value(mono[a], &k);
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c && last.3 == e => last.2 += w,
                _ => entries.push((r, c, w, e)),
            }
        }
        entries.retain(|e| e.2 != ZERO);
        ModeSymbol { nout: self.nout, entries }
    }
}

/// [`OperatorSymbol`] of one mode.
#[derive(Clone, Debug)]
pub struct ModeSymbol {
    nout: usize,
    entries: Vec<(usize, usize, C64, usize)>,
}

impl ModeSymbol {
    /// `out += s M x` with `powers` from [`OperatorSymbol::powers`].
    pub fn apply_into(&self, powers: &[f64], x: &[C64], s: f64, out: &mut [C64]) {
        for &(r, c, v, e) in &self.entries {
            out[r] += v * (powers[e] * s) * x[c];
        }
    }

    pub fn apply(&self, powers: &[f64], x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.nout];
        self.apply_into(powers, x, 1.0, &mut out);
        out
    }
}

/// Time stepping of [`evolve`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dt", rename_all = "snake_case")]
pub enum Stepping {
    /// Closed form (Minkowski tori only).
    Exact,
    /// Fourth-order Runge-Kutta with the given step.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    pub t_end: f64,
    pub stepping: Stepping,
    /// Extra sample times between `t0` and `t_end`; both ends are always sampled.
    pub samples: Vec<f64>,
}

/// One mode of the solution at the sample times: `h` and `dh/dt` in spacetime storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTrajectory {
    pub mode: Mode,
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub rates: Vec<Vec<C64>>,
}

/// Per-mode solution of `box_L h = 0`.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub background: SpacetimeBackground,
    pub lattice: ModeLattice,
    pub t0: f64,
    pub stepping: Stepping,
    pub times: Vec<f64>,
    pub trajectories: Vec<ModeTrajectory>,
    symbol: OperatorSymbol,
}

/// A run of equal RK4 steps from `start`.
#[derive(Clone, Copy, Debug)]
struct Segment {
    start: f64,
    steps: usize,
    h: f64,
}

impl Segment {
    fn new(a: f64, b: f64, dt: f64) -> Self {
        let steps = (((b - a).abs() / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self { start: a, steps, h: (b - a) / steps as f64 }
    }

    fn stage_time(&self, i: usize) -> f64 {
        self.start + i as f64 * 0.5 * self.h
    }

    fn tables(&self, symbol: &OperatorSymbol) -> Vec<Vec<f64>> {
        (0..=2 * self.steps).map(|i| symbol.powers(self.stage_time(i), 0)).collect()
    }
}

/// Classical RK4 over a segment; `f(stage, y, dy)` evaluates at stage time index `stage` (half steps).
fn rk4(y: &mut [C64], seg: &Segment, mut f: impl FnMut(usize, &[C64], &mut [C64])) {
    let len = y.len();
    let mut k1 = vec![ZERO; len];
    let mut k2 = vec![ZERO; len];
    let mut k3 = vec![ZERO; len];
    let mut k4 = vec![ZERO; len];
    let mut tmp = vec![ZERO; len];
    let h = seg.h;
    for s in 0..seg.steps {
        f(2 * s, y, &mut k1);
        for i in 0..len {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        f(2 * s + 1, &tmp, &mut k2);
        for i in 0..len {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        f(2 * s + 1, &tmp, &mut k3);
        for i in 0..len {
            tmp[i] = y[i] + k3[i] * h;
        }
        f(2 * s + 2, &tmp, &mut k4);
        for i in 0..len {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }
}

/// `y = (h, h')`, `dy = (h', -M (h, h'))`.
fn wave_rhs(ms: &ModeSymbol, powers: &[f64], y: &[C64], dy: &mut [C64]) {
    let l = y.len() / 2;
    dy[..l].copy_from_slice(&y[l..]);
    dy[l..].iter_mut().for_each(|v| *v = ZERO);
    ms.apply_into(powers, y, -1.0, &mut dy[l..]);
}

/// Closed-form state of a flat mode `h'' = -w^2 h` after time `tau`.
fn flat_state(w: f64, tau: f64, h0: &[C64], r0: &[C64]) -> (Vec<C64>, Vec<C64>) {
    if w == 0.0 {
        let h = h0.iter().zip(r0).map(|(a, b)| a + b * tau).collect();
        return (h, r0.to_vec());
    }
    let (s, c) = (w * tau).sin_cos();
    let h = h0.iter().zip(r0).map(|(a, b)| a * c + b * (s / w)).collect();
    let r = h0.iter().zip(r0).map(|(a, b)| -a * (w * s) + b * c).collect();
    (h, r)
}

fn sorted_samples(t0: f64, opts: &EvolveOptions) -> Result<Vec<f64>> {
    let dir = if opts.t_end >= t0 { 1.0 } else { -1.0 };
    let mut times = vec![t0, opts.t_end];
    for &s in &opts.samples {
        if !s.is_finite() || (s - t0) * dir < 0.0 || (opts.t_end - s) * dir < 0.0 {
            return Err(Error::TimeOutOfRange { t: s, range: format!("[{t0}, {}]", opts.t_end) });
        }
        times.push(s);
    }
    times.sort_by(|a, b| ((a - t0) * dir).total_cmp(&((b - t0) * dir)));
    times.dedup();
    Ok(times)
}

/// Whether every block satisfies `c(-k) = conj c(k)` to roundoff.
fn jet_is_hermitian(jet: &CauchyJet) -> bool {
    let tol = 1e-13 * jet.max_abs().max(1.0);
    [&jet.h_nn, &jet.h_nx, &jet.h_xx, &jet.dh_nn, &jet.dh_nx, &jet.dh_xx]
        .iter()
        .all(|b| b.hermitian_deviation().0 <= tol)
}

/// Solves `box_L h = 0` from a Cauchy jet whose derivative blocks are `nabla_nu h`.
pub fn evolve(jet: &CauchyJet, opts: &EvolveOptions) -> Result<Evolution> {
    let bg = &jet.background;
    bg.check_time(jet.t0)?;
    bg.check_time(opts.t_end)?;
    match opts.stepping {
        Stepping::Exact if !bg.is_flat() => {
            return Err(Error::InvalidParameter(format!("closed-form evolution is not available on {}", bg.id())))
        }
        Stepping::Fixed(dt) if !(dt > 0.0) || !dt.is_finite() => {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")))
        }
        _ => {}
    }
    let times = sorted_samples(jet.t0, opts)?;
    let symbol = OperatorSymbol::fit(bg, SpacetimeOp::Lichnerowicz)?;
    let inst = bg.at::<3>(jet.t0)?;
    let len = bg.sym_len();

    let mut modes = jet.modes();
    modes.extend(jet.modes().into_iter().map(Mode::neg));
    modes.sort();
    modes.dedup();
    let hermitian = jet_is_hermitian(jet);

    let segments: Vec<Segment> = match opts.stepping {
        Stepping::Fixed(dt) => times.windows(2).map(|w| Segment::new(w[0], w[1], dt)).collect(),
        Stepping::Exact => Vec::new(),
    };
    let tables: Vec<Vec<Vec<f64>>> = segments.iter().map(|s| s.tables(&symbol)).collect();

    let run = |mode: Mode| -> ModeTrajectory {
        let (h0, dnu) = jet.mode_state(mode);
        let corr = connection_correction(&inst, &h0);
        let r0: Vec<C64> = dnu.iter().zip(&corr).map(|(a, b)| a + b).collect();
        let mut states = vec![h0.clone()];
        let mut rates = vec![r0.clone()];
        match opts.stepping {
            Stepping::Exact => {
                let w = mode.norm_sq().sqrt();
                for &t in &times[1..] {
                    let (h, r) = flat_state(w, t - jet.t0, &h0, &r0);
                    states.push(h);
                    rates.push(r);
                }
            }
            Stepping::Fixed(_) => {
                let ms = symbol.for_mode(mode);
                let mut y: Vec<C64> = h0.iter().chain(&r0).copied().collect();
                for (seg, tab) in segments.iter().zip(&tables) {
                    rk4(&mut y, seg, |i, y, dy| wave_rhs(&ms, &tab[i], y, dy));
                    states.push(y[..len].to_vec());
                    rates.push(y[len..].to_vec());
                }
            }
        }
        ModeTrajectory { mode, times: times.clone(), states, rates }
    };

    let conj = |v: &Vec<Vec<C64>>| -> Vec<Vec<C64>> { v.iter().map(|x| x.iter().map(|c| c.conj()).collect()).collect() };
    let mut trajectories: Vec<ModeTrajectory> = Vec::with_capacity(modes.len());
    for &mode in &modes {
        let partner = mode.neg();
        if hermitian && partner < mode {
            if let Ok(i) = modes.binary_search(&partner) {
                let p = &trajectories[i];
                let t = ModeTrajectory { mode, times: times.clone(), states: conj(&p.states), rates: conj(&p.rates) };
                trajectories.push(t);
                continue;
            }
        }
        trajectories.push(run(mode));
    }
    Ok(Evolution {
        background: bg.clone(),
        lattice: jet.lattice(),
        t0: jet.t0,
        stepping: opts.stepping,
        times,
        trajectories,
        symbol,
    })
}

impl Evolution {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("at least the initial time")
    }

    fn check_range(&self, tau: f64) -> Result<()> {
        let (a, b) = (self.t0.min(self.t_end()), self.t0.max(self.t_end()));
        if !(tau >= a && tau <= b) {
            return Err(Error::TimeOutOfRange { t: tau, range: format!("[{a}, {b}]") });
        }
        Ok(())
    }

    /// `(mode, h, dh/dt)` of every mode at `tau`: stored samples, the closed form, or re-integration
    /// from the preceding sample.
    pub fn state_at(&self, tau: f64) -> Result<Vec<(Mode, Vec<C64>, Vec<C64>)>> {
        self.check_range(tau)?;
        if let Some(i) = self.times.iter().position(|&t| t == tau) {
            return Ok(self.trajectories.iter().map(|m| (m.mode, m.states[i].clone(), m.rates[i].clone())).collect());
        }
        let dir = if self.t_end() >= self.t0 { 1.0 } else { -1.0 };
        let i = self.times.iter().rposition(|&t| (tau - t) * dir >= 0.0).expect("t0 precedes tau");
        let ts = self.times[i];
        let len = self.background.sym_len();
        Ok(match self.stepping {
            Stepping::Exact => self
                .trajectories
                .iter()
                .map(|m| {
                    let (h, r) = flat_state(m.mode.norm_sq().sqrt(), tau - ts, &m.states[i], &m.rates[i]);
                    (m.mode, h, r)
                })
                .collect(),
            Stepping::Fixed(dt) => {
                let seg = Segment::new(ts, tau, dt);
                let tab = seg.tables(&self.symbol);
                self.trajectories
                    .iter()
                    .map(|m| {
                        let ms = self.symbol.for_mode(m.mode);
                        let mut y: Vec<C64> = m.states[i].iter().chain(&m.rates[i]).copied().collect();
                        rk4(&mut y, &seg, |s, y, dy| wave_rhs(&ms, &tab[s], y, dy));
                        (m.mode, y[..len].to_vec(), y[len..].to_vec())
                    })
                    .collect()
            }
        })
    }

    /// Cauchy jet of the solution on the slice `t = tau`, derivative blocks as `nabla_nu h`.
    pub fn jet_at(&self, tau: f64) -> Result<CauchyJet> {
        let bg = self.background.at::<3>(tau)?;
        let states: Vec<(Mode, Vec<C64>, Vec<C64>)> = self
            .state_at(tau)?
            .into_iter()
            .map(|(m, h, r)| {
                let corr = connection_correction(&bg, &h);
                let dnu = r.iter().zip(&corr).map(|(a, b)| a - b).collect();
                (m, h, dnu)
            })
            .collect();
        CauchyJet::from_mode_states(&self.background, tau, self.lattice, &states)
    }

    /// Time derivatives `d^j h / dt^j`, `j = 0..=jmax`, of every mode at `tau`.
    pub fn time_derivatives(&self, tau: f64, jmax: usize) -> Result<Vec<(Mode, Vec<Vec<C64>>)>> {
        let states = self.state_at(tau)?;
        let pw: Vec<Vec<f64>> = (0..jmax.max(1)).map(|l| self.symbol.powers(tau, l)).collect();
        Ok(states
            .into_iter()
            .map(|(mode, h, r)| {
                let ms = self.symbol.for_mode(mode);
                let mut ders = vec![h, r];
                for m in 2..=jmax {
                    let mut next = vec![ZERO; ders[0].len()];
                    for l in 0..=m - 2 {
                        let binom = binomial(m - 2, l);
                        let y: Vec<C64> = ders[m - 2 - l].iter().chain(&ders[m - 1 - l]).copied().collect();
                        ms.apply_into(&pw[l], &y, -binom, &mut next);
                    }
                    ders.push(next);
                }
                ders.truncate(jmax + 1);
                (mode, ders)
            })
            .collect())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Flat component weights of a symmetric spacetime two-tensor in storage order.
fn spacetime_weights(d: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        for b in a..d {
            w.push(if a == b { 1.0 } else { 2.0 });
        }
    }
    w
}

fn weighted_sq(w: &[f64], v: &[C64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b.norm_sqr()).sum()
}

/// Induced `(h~, m~)` on the slice `t = tau`.
pub fn extract_induced_data(evolution: &Evolution, tau: f64) -> Result<InitialDataPair> {
    let bg = &evolution.background;
    let inst = bg.instant::<3>(tau)?;
    let states = evolution.state_at(tau)?;
    let mut modes = Vec::with_capacity(states.len());
    let mut th = Vec::new();
    let mut tm = Vec::new();
    for (mode, h, r) in &states {
        let (a, b) = induced_mode(&inst, &bg.symbol(*mode), h, r);
        modes.push(*mode);
        th.extend(a);
        tm.extend(b);
    }
    let lattice = evolution.lattice;
    let mk = |c: Vec<C64>| -> Result<SliceField> {
        let mut f = SpectralField::from_mode_list(lattice, Rank::Sym2, modes.clone(), c)?;
        f.enforce_hermitian();
        Ok(SliceField::Torus(f))
    };
    InitialDataPair::new(bg.slice(tau)?, mk(th)?, mk(tm)?, 0.0)
}

/// Monitors of a solution at its sample times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    /// `L^2` norm of `div hbar` over the slice, flat components.
    pub gauge: Vec<f64>,
    /// `L^2` norms of the two parts of the linearised constraints of the induced data.
    pub dphi1: Vec<f64>,
    pub dphi2: Vec<f64>,
    /// `energies[i][j] = || d^j h / dt^j ||_{H^{k-j}}` at `times[i]`, flat components.
    pub energies: Vec<Vec<f64>>,
    pub sobolev: f64,
}

/// Gauge residual, constraint residuals and energies at the given times (the samples by default).
pub fn diagnostics(evolution: &Evolution, times: Option<&[f64]>, sobolev: f64, jmax: usize) -> Result<DiagnosticsSeries> {
    let times: Vec<f64> = times.map(|t| t.to_vec()).unwrap_or_else(|| evolution.times.clone());
    let bg = &evolution.background;
    let n = bg.n();
    let d = bg.dim();
    let vol = (2.0 * std::f64::consts::PI).powi(n as i32);
    let div = OperatorSymbol::fit(bg, SpacetimeOp::DivTraceReversed)?;
    let w = spacetime_weights(d);
    let mut out = DiagnosticsSeries {
        times: times.clone(),
        gauge: Vec::new(),
        dphi1: Vec::new(),
        dphi2: Vec::new(),
        energies: Vec::new(),
        sobolev,
    };
    for &t in &times {
        let ders = evolution.time_derivatives(t, jmax.max(1))?;
        let pw = div.powers(t, 0);
        let mut gauge: Vec<f64> = ders
            .iter()
            .map(|(mode, dv)| {
                let y: Vec<C64> = dv[0].iter().chain(&dv[1]).copied().collect();
                div.for_mode(*mode).apply(&pw, &y).iter().map(|v| v.norm_sqr()).sum::<f64>()
            })
            .collect();
        out.gauge.push((vol * pairwise_sum(&mut gauge)).sqrt());
        let mut energies = Vec::with_capacity(jmax + 1);
        for j in 0..=jmax {
            let mut terms: Vec<f64> = ders
                .iter()
                .map(|(mode, dv)| (1.0 + mode.norm_sq()).powf(sobolev - j as f64) * weighted_sq(&w, &dv[j]))
                .collect();
            energies.push((vol * pairwise_sum(&mut terms)).sqrt());
        }
        out.energies.push(energies);
        let pair = extract_induced_data(evolution, t)?;
        let res = dphi(&pair)?;
        out.dphi1.push(field_norm(&pair.slice, &res.scalar, 0.0)?);
        out.dphi2.push(field_norm(&pair.slice, &res.one_form, 0.0)?);
    }
    Ok(out)
}

/// A recovered gauge vector field and the deviation of the solution from `L_V g`.
#[derive(Clone, Debug)]
pub struct GaugeRecovery {
    pub times: Vec<f64>,
    /// Per mode and sample time, `(V_flat, dV_flat/dt)` stacked.
    pub vectors: Vec<(Mode, Vec<Vec<C64>>)>,
    /// `|| h - L_V g ||` at each time, flat components.
    pub deviation: Vec<f64>,
    /// `|| h ||` at each time.
    pub h_norm: Vec<f64>,
}

impl GaugeRecovery {
    /// Deviations relative to `|| h ||` (zero where `h` vanishes).
    pub fn relative(&self) -> Vec<f64> {
        self.deviation.iter().zip(&self.h_norm).map(|(a, b)| if *b > 0.0 { a / b } else { *a }).collect()
    }
}

/// `(nabla_nu V)_flat = (1/2) h(nu, nu) nu_flat + h(nu, .)` in coordinate components.
fn initial_gauge_rate(d: usize, h: &[C64]) -> Vec<C64> {
    let mut v: Vec<C64> = (0..d).map(|a| h[sym_index(d, 0, a)]).collect();
    v[0] = h[0] * 0.5;
    v
}

/// Solves `nabla* nabla V = -div hbar`, `V = 0` and `nabla_nu V = (1/2) h(nu,nu) nu + h(nu, .)#`
/// on the initial slice, and compares `h` with `L_V g` at every sample time.
pub fn recover_gauge_vector(evolution: &Evolution) -> Result<GaugeRecovery> {
    let bg = &evolution.background;
    let d = bg.dim();
    let len = bg.sym_len();
    let div = OperatorSymbol::fit(bg, SpacetimeOp::DivTraceReversed)?;
    let wave = OperatorSymbol::fit(bg, SpacetimeOp::ConnectionWave)?;
    let lie = OperatorSymbol::fit(bg, SpacetimeOp::LieOfG)?;
    let times = evolution.times.clone();
    let t0 = evolution.t0;
    let mut vectors = Vec::with_capacity(evolution.trajectories.len());
    match evolution.stepping {
        Stepping::Exact => {
            let pw = div.powers(t0, 0);
            for tr in &evolution.trajectories {
                let w = tr.mode.norm_sq().sqrt();
                let ms = div.for_mode(tr.mode);
                let (h0, r0) = (&tr.states[0], &tr.rates[0]);
                let a = ms.apply(&pw, &h0.iter().chain(r0).copied().collect::<Vec<_>>());
                let acc: Vec<C64> = h0.iter().map(|v| -v * (w * w)).collect();
                let b = ms.apply(&pw, &r0.iter().chain(&acc).copied().collect::<Vec<_>>());
                let v1 = initial_gauge_rate(d, h0);
                let per_time = times
                    .iter()
                    .map(|&t| {
                        let tau = t - t0;
                        let mut v = Vec::with_capacity(2 * d);
                        let mut vd = Vec::with_capacity(d);
                        for c in 0..d {
                            let (x, xd) = if w == 0.0 {
                                (
                                    v1[c] * tau - a[c] * (tau * tau / 2.0) - b[c] * (tau.powi(3) / 6.0),
                                    v1[c] - a[c] * tau - b[c] * (tau * tau / 2.0),
                                )
                            } else {
                                let (s, co) = (w * tau).sin_cos();
                                (
                                    v1[c] * (s / w)
                                        - a[c] * (tau * s / (2.0 * w))
                                        - b[c] * ((s - w * tau * co) / (2.0 * w.powi(3))),
                                    v1[c] * co - a[c] * ((s + w * tau * co) / (2.0 * w)) - b[c] * (tau * s / (2.0 * w)),
                                )
                            };
                            v.push(x);
                            vd.push(xd);
                        }
                        v.extend(vd);
                        v
                    })
                    .collect();
                vectors.push((tr.mode, per_time));
            }
        }
        Stepping::Fixed(dt) => {
            let segments: Vec<Segment> = times.windows(2).map(|w| Segment::new(w[0], w[1], dt)).collect();
            let tabs: Vec<[Vec<Vec<f64>>; 3]> = segments
                .iter()
                .map(|s| [s.tables(&evolution.symbol), s.tables(&div), s.tables(&wave)])
                .collect();
            for tr in &evolution.trajectories {
                let mh = evolution.symbol.for_mode(tr.mode);
                let md = div.for_mode(tr.mode);
                let mw = wave.for_mode(tr.mode);
                let mut y: Vec<C64> = tr.states[0].iter().chain(&tr.rates[0]).copied().collect();
                y.extend(vec![ZERO; d]);
                y.extend(initial_gauge_rate(d, &tr.states[0]));
                let mut per_time = vec![y[2 * len..].to_vec()];
                for (seg, tab) in segments.iter().zip(&tabs) {
                    rk4(&mut y, seg, |i, y, dy| {
                        wave_rhs(&mh, &tab[0][i], &y[..2 * len], &mut dy[..2 * len]);
                        wave_rhs(&mw, &tab[2][i], &y[2 * len..], &mut dy[2 * len..]);
                        md.apply_into(&tab[1][i], &y[..2 * len], -1.0, &mut dy[2 * len + d..]);
                    });
                    per_time.push(y[2 * len..].to_vec());
                }
                vectors.push((tr.mode, per_time));
            }
        }
    }
    let wts = spacetime_weights(d);
    let mut deviation = Vec::with_capacity(times.len());
    let mut h_norm = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let pw = lie.powers(t, 0);
        let mut dev = Vec::with_capacity(vectors.len());
        let mut hn = Vec::with_capacity(vectors.len());
        for (tr, (_, vs)) in evolution.trajectories.iter().zip(&vectors) {
            let lv = lie.for_mode(tr.mode).apply(&pw, &vs[i]);
            let diff: Vec<C64> = tr.states[i].iter().zip(&lv).map(|(a, b)| a - b).collect();
            dev.push(weighted_sq(&wts, &diff));
            hn.push(weighted_sq(&wts, &tr.states[i]));
        }
        deviation.push(pairwise_sum(&mut dev).sqrt());
        h_norm.push(pairwise_sum(&mut hn).sqrt());
    }
    Ok(GaugeRecovery { times, vectors, deviation, h_norm })
}

/// Cauchy jet of the gauge solution `L_U g`, where `U` solves `nabla* nabla U = 0` with the
/// given per-mode `(U_flat, dU_flat/dt)` on the slice `t = t0`.
pub fn gauge_solution_jet(
    background: &SpacetimeBackground,
    t0: f64,
    lattice: ModeLattice,
    data: &[(Mode, Vec<C64>, Vec<C64>)],
) -> Result<CauchyJet> {
    let d = background.dim();
    let inst = background.instant::<3>(t0)?;
    let mut states = Vec::with_capacity(data.len());
    for (mode, u, ud) in data {
        if u.len() != d || ud.len() != d {
            return Err(Error::Mismatch(format!("gauge vector data must have {d} components")));
        }
        let symbol = background.symbol(*mode);
        let first: Vec<J3> = u.iter().zip(ud).map(|(a, b)| J3::from_derivatives(&[*a, *b])).collect();
        let w = inst.apply(SpacetimeOp::ConnectionWave, &symbol, &tensor_from_stored(d, 1, &first));
        let jets: Vec<J3> = (0..d).map(|c| J3::from_derivatives(&[u[c], ud[c], -w.data[c].value()])).collect();
        let h = inst.apply(SpacetimeOp::LieOfG, &symbol, &tensor_from_stored(d, 1, &jets));
        let stored = crate::geometry::spacetime::stored_from_tensor(2, &h);
        let hv: Vec<C64> = stored.iter().map(|v| v.value()).collect();
        let hd: Vec<C64> = stored.iter().map(|v| v.derivative(1)).collect();
        let corr = connection_correction(&inst.bg, &hv);
        states.push((*mode, hv, hd.iter().zip(&corr).map(|(a, b)| a - b).collect()));
    }
    CauchyJet::from_mode_states(background, t0, lattice, &states)
}

/// Lapse and shift of a spacetime one-form `U_flat = -N dt + beta` on a slice, per mode.
pub fn lapse_shift(
    slice: &SliceGeometry,
    lattice: ModeLattice,
    data: &[(Mode, Vec<C64>)],
) -> Result<(SliceField, SliceField)> {
    let n = slice.dim();
    let modes: Vec<Mode> = data.iter().map(|x| x.0).collect();
    let lapse: Vec<C64> = data.iter().map(|x| -x.1[0]).collect();
    let shift: Vec<C64> = data.iter().flat_map(|x| x.1[1..=n].to_vec()).collect();
    Ok((
        SliceField::Torus(SpectralField::from_mode_list(lattice, Rank::Scalar, modes.clone(), lapse)?),
        SliceField::Torus(SpectralField::from_mode_list(lattice, Rank::OneForm, modes, shift)?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::random_constrained_pair;
    use crate::decomposition::gauge_producing_data;
    use crate::geometry::KASNER_DEFAULT;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn mink() -> SpacetimeBackground {
        SpacetimeBackground::minkowski(3).unwrap()
    }

    fn kasner() -> SpacetimeBackground {
        SpacetimeBackground::kasner(KASNER_DEFAULT).unwrap()
    }

    fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn opts(t_end: f64, stepping: Stepping, samples: Vec<f64>) -> EvolveOptions {
        EvolveOptions { t_end, stepping, samples }
    }

    fn constrained(bg: &SpacetimeBackground, t0: f64, nmax: usize, seed: u64) -> InitialDataPair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lattice = ModeLattice::new(bg.n(), nmax).unwrap();
        random_constrained_pair(&bg.slice(t0).unwrap(), Some(lattice), nmax, 1.0, 1.0, &mut rng).unwrap()
    }

    fn standing_wave() -> InitialDataPair {
        let lattice = ModeLattice::new(3, 2).unwrap();
        let half = C64::new(0.5, 0.0);
        let mut e = BTreeMap::new();
        for m in [Mode::new(&[1, 0, 0]), Mode::new(&[-1, 0, 0])] {
            e.insert(m, vec![ZERO, ZERO, ZERO, half, ZERO, -half]);
        }
        let h = SpectralField::from_entries(lattice, Rank::Sym2, e).unwrap();
        let m = SpectralField::empty(lattice, Rank::Sym2);
        InitialDataPair::new(mink().slice(0.0).unwrap(), SliceField::Torus(h), SliceField::Torus(m), 0.0).unwrap()
    }

    /// Hermitian spacetime one-form data on the modes `|k_j| <= kmax`.
    fn gauge_data(d: usize, kmax: i32, vanish: bool, rng: &mut ChaCha8Rng) -> Vec<(Mode, Vec<C64>, Vec<C64>)> {
        let mut out = Vec::new();
        for a in -kmax..=kmax {
            for b in -kmax..=kmax {
                for c in -kmax..=kmax {
                    let m = Mode::new(&[a, b, c]);
                    if m.neg() < m {
                        continue;
                    }
                    let mut draw = |z: bool| -> Vec<C64> {
                        (0..d).map(|_| if z { ZERO } else if m.is_zero() { C64::new(rand_c(rng).re, 0.0) } else { rand_c(rng) }).collect()
                    };
                    let u = draw(vanish);
                    let ud = draw(false);
                    if !m.is_zero() {
                        let cj = |v: &Vec<C64>| v.iter().map(|x| x.conj()).collect();
                        out.push((m.neg(), cj(&u), cj(&ud)));
                    }
                    out.push((m, u, ud));
                }
            }
        }
        out
    }

    fn state_diff(a: &[(Mode, Vec<C64>, Vec<C64>)], b: &[(Mode, Vec<C64>, Vec<C64>)]) -> f64 {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.1.iter().zip(&y.1).chain(x.2.iter().zip(&y.2)).map(|(p, q)| (p - q).norm()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn symbols_match_direct_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for bg in [mink(), kasner()] {
            for kind in [
                SpacetimeOp::Lichnerowicz,
                SpacetimeOp::DivTraceReversed,
                SpacetimeOp::ConnectionWave,
                SpacetimeOp::LieOfG,
            ] {
                let sym = OperatorSymbol::fit(&bg, kind).unwrap();
                for _ in 0..3 {
                    let t = rng.gen_range(0.3..4.0);
                    let mode = Mode::new(&[rng.gen_range(-5..=5), rng.gen_range(-5..=5), rng.gen_range(-5..=5)]);
                    let direct = evaluate_matrix(&bg, kind, &bg.instant::<3>(t).unwrap(), mode);
                    let ms = sym.for_mode(mode);
                    let pw = sym.powers(t, 0);
                    let scale = max_entry(std::slice::from_ref(&direct)).max(1.0);
                    for (c, col) in direct.iter().enumerate() {
                        let mut e = vec![ZERO; 2 * sym.input_len()];
                        e[c] = C64::new(1.0, 0.0);
                        let got = ms.apply(&pw, &e);
                        for (r, v) in col.iter().enumerate() {
                            assert!((got[r] - v).norm() <= 1e-11 * scale, "{kind:?} {} {c} {r}", bg.id());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_jet_gives_zero_trajectory() {
        let jet = CauchyJet::zeros(&kasner(), 1.0, ModeLattice::new(3, 2).unwrap()).unwrap();
        let ev = evolve(&jet, &opts(1.5, Stepping::Fixed(0.1), vec![])).unwrap();
        assert!(ev.trajectories.iter().all(|t| t.states.iter().flatten().all(|v| *v == ZERO)));
        let rec = recover_gauge_vector(&ev).unwrap();
        assert!(rec.deviation.iter().all(|d| *d == 0.0));
        let pair = extract_induced_data(&ev, 1.2).unwrap();
        assert_eq!(pair.max_abs(), 0.0);
    }

    #[test]
    fn standing_wave_has_period_two_pi() {
        let pair = standing_wave();
        let jet = build_cauchy_jet(&pair, &mink(), 0.0).unwrap();
        let tp = 2.0 * std::f64::consts::PI;
        let ev = evolve(&jet, &opts(tp, Stepping::Exact, vec![1.0, 2.0])).unwrap();
        let a = ev.state_at(0.0).unwrap();
        let b = ev.state_at(tp).unwrap();
        assert!(state_diff(&a, &b) <= 1e-12);
        let diag = diagnostics(&ev, Some(&[0.0, 0.7, 1.9, 3.3, tp]), 0.0, 2).unwrap();
        // |h|^2 + |h'|^2 / |k|^2 per mode; with |k| = 1 the H^{-1} weight of h' is 1/2
        let conserved = |e: &Vec<f64>| e[0] * e[0] + 2.0 * e[1] * e[1];
        let first = conserved(&diag.energies[0]);
        assert!(first > 0.1);
        for e in &diag.energies {
            assert!((conserved(e) - first).abs() <= 1e-12 * first);
        }
    }

    #[test]
    fn cauchy_jet_satisfies_gauge_condition() {
        let pair = standing_wave();
        let zero = build_cauchy_jet(&pair.scale(0.0), &mink(), 0.0).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        for (bg, t0, tol) in [(mink(), 0.0, 1e-12), (kasner(), 1.3, 1e-10)] {
            let pair = constrained(&bg, t0, 3, 5);
            let jet = build_cauchy_jet(&pair, &bg, t0).unwrap();
            let ev = evolve(&jet, &opts(t0, Stepping::Fixed(0.1), vec![])).unwrap();
            let diag = diagnostics(&ev, None, 0.0, 1).unwrap();
            assert!(diag.gauge[0] <= tol, "{} {}", bg.id(), diag.gauge[0]);
            let back = extract_induced_data(&ev, t0).unwrap();
            assert!(back.h.sub(&pair.h).unwrap().max_abs() <= 1e-13);
            assert!(back.m.sub(&pair.m).unwrap().max_abs() <= 1e-13);
        }
        let pair = constrained(&kasner(), 1.3, 2, 5);
        assert!(matches!(build_cauchy_jet(&pair, &kasner(), 1.4), Err(Error::Mismatch(_))));
    }

    #[test]
    fn kasner_integrator_is_fourth_order() {
        let bg = kasner();
        let lattice = ModeLattice::new(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mode = Mode::new(&[2, -1, 3]);
        let len = bg.sym_len();
        let h: Vec<C64> = (0..len).map(|_| rand_c(&mut rng)).collect();
        let r: Vec<C64> = (0..len).map(|_| rand_c(&mut rng)).collect();
        let jet = CauchyJet::from_mode_states(&bg, 1.0, lattice, &[(mode, h, r)]).unwrap();
        let run = |dt: f64| evolve(&jet, &opts(2.0, Stepping::Fixed(dt), vec![])).unwrap().state_at(2.0).unwrap();
        let dt = 0.05;
        let reference = run(dt / 8.0);
        let e1 = state_diff(&run(dt), &reference);
        let e2 = state_diff(&run(dt / 2.0), &reference);
        assert!(e1 / e2 >= 14.0, "{e1} {e2}");
    }

    #[test]
    fn constraints_and_gauge_propagate() {
        let pair = constrained(&mink(), 0.0, 3, 21);
        let jet = build_cauchy_jet(&pair, &mink(), 0.0).unwrap();
        let ev = evolve(&jet, &opts(10.0, Stepping::Exact, vec![2.5, 5.0, 7.5])).unwrap();
        let diag = diagnostics(&ev, None, 1.0, 2).unwrap();
        for i in 0..diag.times.len() {
            assert!(diag.gauge[i] <= 1e-12 && diag.dphi1[i] <= 1e-12 && diag.dphi2[i] <= 1e-12, "{diag:?}");
        }

        let pair = constrained(&kasner(), 1.0, 2, 22);
        let jet = build_cauchy_jet(&pair, &kasner(), 1.0).unwrap();
        let ev = evolve(&jet, &opts(2.0, Stepping::Fixed(1e-3), vec![1.5])).unwrap();
        let diag = diagnostics(&ev, None, 1.0, 2).unwrap();
        for i in 0..diag.times.len() {
            assert!(diag.gauge[i] <= 1e-8 && diag.dphi1[i] <= 1e-8 && diag.dphi2[i] <= 1e-8, "{diag:?}");
        }
    }

    #[test]
    fn violated_constraints_break_the_gauge() {
        let lattice = ModeLattice::new(3, 2).unwrap();
        let mut e = BTreeMap::new();
        let one = C64::new(0.5, 0.0);
        // m~ = cos(x^1) dx^1 dx^2: its divergence has no gradient part
        e.insert(Mode::new(&[1, 0, 0]), vec![ZERO, one, ZERO, ZERO, ZERO, ZERO]);
        e.insert(Mode::new(&[-1, 0, 0]), vec![ZERO, one, ZERO, ZERO, ZERO, ZERO]);
        let m = SpectralField::from_entries(lattice, Rank::Sym2, e).unwrap();
        let h = SpectralField::empty(lattice, Rank::Sym2);
        let pair = InitialDataPair::new(mink().slice(0.0).unwrap(), SliceField::Torus(h), SliceField::Torus(m), 0.0).unwrap();
        assert!(dphi(&pair).unwrap().l2_max() > 0.1);
        let jet = build_cauchy_jet(&pair, &mink(), 0.0).unwrap();
        let ev = evolve(&jet, &opts(1.0, Stepping::Exact, vec![0.1, 0.5])).unwrap();
        let diag = diagnostics(&ev, None, 0.0, 0).unwrap();
        assert!(diag.gauge[0] <= 1e-14);
        assert!(diag.gauge[1] > 1e-2 && diag.gauge[2] > diag.gauge[1]);
    }

    #[test]
    fn pure_gauge_solutions_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let lattice = ModeLattice::new(3, 2).unwrap();
        let data = gauge_data(4, 1, true, &mut rng);
        let jet = gauge_solution_jet(&mink(), 0.0, lattice, &data).unwrap();
        let pair = extract_induced_data(&evolve(&jet, &opts(0.0, Stepping::Exact, vec![])).unwrap(), 0.0).unwrap();
        assert!(pair.max_abs() <= 1e-13);
        let ev = evolve(&jet, &opts(3.0, Stepping::Exact, vec![1.0, 2.0])).unwrap();
        let rec = recover_gauge_vector(&ev).unwrap();
        assert!(rec.h_norm[1] > 0.1);
        assert!(rec.relative().iter().all(|d| *d <= 1e-10), "{:?}", rec.relative());

        let jet = gauge_solution_jet(&kasner(), 1.0, lattice, &data).unwrap();
        let ev = evolve(&jet, &opts(1.5, Stepping::Fixed(2e-3), vec![1.25])).unwrap();
        let rec = recover_gauge_vector(&ev).unwrap();
        assert!(rec.relative().iter().all(|d| *d <= 1e-8), "{:?}", rec.relative());

        let jet = build_cauchy_jet(&standing_wave(), &mink(), 0.0).unwrap();
        let ev = evolve(&jet, &opts(3.0, Stepping::Exact, vec![1.0, 2.0])).unwrap();
        let rec = recover_gauge_vector(&ev).unwrap();
        assert!(rec.relative().iter().all(|d| *d >= 0.5), "{:?}", rec.relative());
    }

    #[test]
    fn gauge_solutions_induce_gauge_producing_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let lattice = ModeLattice::new(3, 2).unwrap();
        let data = gauge_data(4, 1, false, &mut rng);
        for (bg, t0) in [(mink(), 0.0), (kasner(), 1.2)] {
            let jet = gauge_solution_jet(&bg, t0, lattice, &data).unwrap();
            let ev = evolve(&jet, &opts(t0, Stepping::Fixed(0.1), vec![])).unwrap();
            let pair = extract_induced_data(&ev, t0).unwrap();
            let values: Vec<(Mode, Vec<C64>)> = data.iter().map(|(m, u, _)| (*m, u.clone())).collect();
            let (lapse, shift) = lapse_shift(&pair.slice, lattice, &values).unwrap();
            let gp = gauge_producing_data(&lapse, &shift, &pair.slice).unwrap();
            assert!(pair.h.sub(&gp.h).unwrap().max_abs() <= 1e-12, "{}", bg.id());
            assert!(pair.m.sub(&gp.m).unwrap().max_abs() <= 1e-12, "{}", bg.id());
        }
        // later slices on Minkowski: U evolves by the flat wave equation
        let jet = gauge_solution_jet(&mink(), 0.0, lattice, &data).unwrap();
        let ev = evolve(&jet, &opts(1.0, Stepping::Exact, vec![])).unwrap();
        let tau = 0.63;
        let pair = extract_induced_data(&ev, tau).unwrap();
        let values: Vec<(Mode, Vec<C64>)> = data
            .iter()
            .map(|(m, u, ud)| (*m, flat_state(m.norm_sq().sqrt(), tau, u, ud).0))
            .collect();
        let (lapse, shift) = lapse_shift(&pair.slice, lattice, &values).unwrap();
        let gp = gauge_producing_data(&lapse, &shift, &pair.slice).unwrap();
        assert!(pair.h.sub(&gp.h).unwrap().max_abs() <= 1e-12);
        assert!(pair.m.sub(&gp.m).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn evolution_is_time_reversible() {
        let pair = constrained(&mink(), 0.0, 3, 51);
        let jet = build_cauchy_jet(&pair, &mink(), 0.0).unwrap();
        let fwd = evolve(&jet, &opts(4.0, Stepping::Exact, vec![])).unwrap();
        let back = evolve(&fwd.jet_at(4.0).unwrap(), &opts(0.0, Stepping::Exact, vec![])).unwrap();
        assert!(state_diff(&back.state_at(0.0).unwrap(), &fwd.state_at(0.0).unwrap()) <= 1e-12);

        let pair = constrained(&kasner(), 1.0, 2, 52);
        let jet = build_cauchy_jet(&pair, &kasner(), 1.0).unwrap();
        let fwd = evolve(&jet, &opts(1.5, Stepping::Fixed(5e-3), vec![])).unwrap();
        let back = evolve(&fwd.jet_at(1.5).unwrap(), &opts(1.0, Stepping::Fixed(5e-3), vec![])).unwrap();
        assert!(state_diff(&back.state_at(1.0).unwrap(), &fwd.state_at(1.0).unwrap()) <= 1e-8);
    }

    #[test]
    fn dense_output_and_derivatives() {
        let pair = constrained(&kasner(), 1.0, 2, 61);
        let jet = build_cauchy_jet(&pair, &kasner(), 1.0).unwrap();
        let ev = evolve(&jet, &opts(2.0, Stepping::Fixed(1e-3), vec![1.5])).unwrap();
        let mid = ev.state_at(1.5).unwrap();
        let fine = evolve(&jet, &opts(1.5, Stepping::Fixed(1e-3), vec![])).unwrap();
        assert!(state_diff(&mid, &fine.state_at(1.5).unwrap()) <= 1e-12);
        let d = ev.time_derivatives(1.7, 3).unwrap();
        let delta = 1e-3;
        let lo = ev.time_derivatives(1.7 - delta, 2).unwrap();
        let hi = ev.time_derivatives(1.7 + delta, 2).unwrap();
        let mut worst: f64 = 0.0;
        let mut size: f64 = 0.0;
        for ((a, b), c) in d.iter().zip(&lo).zip(&hi) {
            for i in 0..a.1[3].len() {
                let fd = (c.1[2][i] - b.1[2][i]) / (2.0 * delta);
                worst = worst.max((fd - a.1[3][i]).norm());
                size = size.max(a.1[3][i].norm());
            }
        }
        assert!(worst <= 1e-5 * size.max(1.0), "{worst} {size}");
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let lattice = ModeLattice::new(3, 2).unwrap();
        let jet = CauchyJet::zeros(&kasner(), 1.0, lattice).unwrap();
        assert!(matches!(evolve(&jet, &opts(2.0, Stepping::Exact, vec![])), Err(Error::InvalidParameter(_))));
        assert!(matches!(evolve(&jet, &opts(2.0, Stepping::Fixed(0.0), vec![])), Err(Error::InvalidParameter(_))));
        assert!(matches!(evolve(&jet, &opts(2.0, Stepping::Fixed(-0.1), vec![])), Err(Error::InvalidParameter(_))));
        assert!(matches!(evolve(&jet, &opts(-0.5, Stepping::Fixed(0.1), vec![])), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(evolve(&jet, &opts(2.0, Stepping::Fixed(0.1), vec![2.5])), Err(Error::TimeOutOfRange { .. })));
        let ev = evolve(&jet, &opts(2.0, Stepping::Fixed(0.1), vec![])).unwrap();
        assert!(matches!(extract_induced_data(&ev, 2.5), Err(Error::TimeOutOfRange { .. })));
    }
}
