//! The constraint map, its linearisation, a finite-difference oracle for it,
//! and the identities tying the linearised Ricci tensor to the linearised constraints.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::geometry::oracle::{fd, Comp, FdGeometry};
use crate::geometry::spacetime::{
    connection_correction, induced_mode, stored_from_tensor, tensor_from_stored, Instant, SpacetimeOp, J3,
};
use crate::geometry::{
    field_norm, from_tensor, map_fields, to_tensor, Backend, CauchyJet, SliceField, SliceGeometry, SliceMode,
};
use crate::invariant::{HomogeneousFrame, InvariantField};
use crate::spectral::{evaluate, sym_pairs, Mode, Rank, SpectralField};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Linearised first and second fundamental forms on a slice.
#[derive(Clone, Debug)]
pub struct InitialDataPair {
    pub h: SliceField,
    pub m: SliceField,
    pub slice: SliceGeometry,
    /// Declared Sobolev order of `h` (`m` is one order lower).
    pub sobolev: f64,
}

impl InitialDataPair {
    pub fn new(slice: SliceGeometry, h: SliceField, m: SliceField, sobolev: f64) -> Result<Self> {
        if h.rank() != Rank::Sym2 || m.rank() != Rank::Sym2 {
            return Err(Error::Mismatch("initial data must be symmetric two-tensors".into()));
        }
        slice.check_field(&h)?;
        slice.check_field(&m)?;
        if let (SliceField::Torus(a), SliceField::Torus(b)) = (&h, &m) {
            if a.lattice() != b.lattice() {
                return Err(Error::Mismatch("h and m use different lattices".into()));
            }
        }
        Ok(Self { h, m, slice, sobolev })
    }

    /// `(0, 0)`; torus slices need the lattice of a reference field.
    pub fn zeros_like(slice: &SliceGeometry, like: &SliceField) -> Result<Self> {
        let z = like.zeros_like(Rank::Sym2);
        Self::new(slice.clone(), z.clone(), z, 0.0)
    }

    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        Self::new(
            self.slice.clone(),
            self.h.combine(a, &other.h, b)?,
            self.m.combine(a, &other.m, b)?,
            self.sobolev.min(other.sobolev),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { h: self.h.scale(s), m: self.m.scale(s), slice: self.slice.clone(), sobolev: self.sobolev }
    }

    pub fn max_abs(&self) -> f64 {
        self.h.max_abs().max(self.m.max_abs())
    }

    fn is_distributional(&self) -> bool {
        [&self.h, &self.m].iter().any(|f| f.as_torus().is_some_and(|t| t.is_distributional()))
    }
}

/// Norms of a constraint residual at one Sobolev order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualNorm {
    pub order: f64,
    pub scalar: f64,
    pub one_form: f64,
}

/// `(D Phi_1, D Phi_2)` with norms.
#[derive(Clone, Debug)]
pub struct ConstraintResidual {
    pub scalar: SliceField,
    pub one_form: SliceField,
    pub norms: Vec<ResidualNorm>,
}

impl ConstraintResidual {
    /// Largest `L^2` norm of the two parts.
    pub fn l2_max(&self) -> f64 {
        self.norms.iter().find(|r| r.order == 0.0).map(|r| r.scalar.max(r.one_form)).unwrap_or(0.0)
    }
}

/// Nonlinear constraints `(Phi_1, Phi_2)` of the slice's own data, as constant fields.
pub fn phi(slice: &SliceGeometry, like: Option<&SliceField>) -> Result<(SliceField, SliceField)> {
    let n = slice.dim();
    let (p1, p2) = slice.constraint_residual();
    let lattice = like.and_then(|f| f.as_torus()).map(|f| f.lattice());
    let s = slice.constant_field(lattice, Rank::Scalar, &Tensor::scalar(C64::new(p1, 0.0), n))?;
    let v = Tensor::from_vec(n, 1, p2.iter().map(|x| C64::new(*x, 0.0)).collect());
    let w = slice.constant_field(lattice, Rank::OneForm, &v)?;
    Ok((s, w))
}

/// `g^{ac} g^{bd} T_cd`.
fn raise_both(s: &SliceMode, t: &Tensor<C64>) -> Tensor<C64> {
    let bg = s.geom.background();
    let n = s.n();
    let mut out = Tensor::zeros(n, 2);
    for a in 0..n {
        for b in 0..n {
            let mut acc = ZERO;
            for c in 0..n {
                for d in 0..n {
                    acc += bg.inverse.at2(a, c) * bg.inverse.at2(b, d) * t.at2(c, d);
                }
            }
            out.data[a * n + b] = acc;
        }
    }
    out
}

/// `D Phi (h, m)` of one mode.
pub fn dphi_mode(s: &SliceMode, h: &Tensor<C64>, m: &Tensor<C64>) -> (C64, Tensor<C64>) {
    let geom = s.geom;
    let bg = geom.background();
    let n = s.n();
    let k = geom.second_fundamental_form();
    let ric = geom.ricci();
    let trh = s.trace(h);
    let trk = bg.trace(k);
    let trm = s.trace(m);
    let two = C64::new(2.0, 0.0);

    let m_rev = m.sub(&s.metric_times(trm));
    let w = s.div(h).sub(&s.grad(trh));
    let kk = bg.compose(k, k).sub(&k.scale(trk));
    let p1 = s.div(&w).data[0] - bg.inner2(ric, h) + two * bg.inner2(&kk, h) - two * bg.inner2(k, &m_rev);

    // Background components are constant, so the zero mode differentiates them.
    let nk = geom.mode_calc(None).calc.covariant(k);
    let nh = s.calc.covariant(h);
    let h_up = raise_both(s, h);
    let k_up = raise_both(s, k);
    let div_hbar = s.div(&s.trace_reverse(h));
    let dkh = s.grad(bg.inner2(k, h));
    let div_m = s.div(&m_rev);
    let mut p2 = Tensor::zeros(n, 1);
    for x in 0..n {
        let mut t1 = ZERO;
        let mut t2 = ZERO;
        let mut t3 = ZERO;
        for a in 0..n {
            for b in 0..n {
                t1 += h_up.at2(a, b) * nk.at3(a, b, x);
                t2 += k.at2(a, x) * bg.inverse.at2(a, b) * div_hbar.data[b];
                t3 += k_up.at2(a, b) * nh.at3(x, a, b);
            }
        }
        p2.data[x] = -t1 - t2 - 0.5 * t3 + dkh.data[x] + div_m.data[x];
    }
    (p1, p2)
}

/// Linearised constraints of a pair, with `L^2` norms.
pub fn dphi(pair: &InitialDataPair) -> Result<ConstraintResidual> {
    dphi_with_orders(pair, &[0.0])
}

/// Linearised constraints with norms at the requested Sobolev orders.
pub fn dphi_with_orders(pair: &InitialDataPair, orders: &[f64]) -> Result<ConstraintResidual> {
    let out = map_fields(&pair.slice, &[&pair.h, &pair.m], &[Rank::Scalar, Rank::OneForm], |s, t| {
        let (p1, p2) = dphi_mode(s, &t[0], &t[1]);
        vec![Tensor::scalar(p1, s.n()), p2]
    })?;
    let mut it = out.into_iter();
    let scalar = it.next().expect("two outputs");
    let one_form = it.next().expect("two outputs");
    let norms = orders
        .iter()
        .map(|&o| {
            Ok(ResidualNorm {
                order: o,
                scalar: field_norm(&pair.slice, &scalar, o)?,
                one_form: field_norm(&pair.slice, &one_form, o)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintResidual { scalar, one_form, norms })
}

/// Projects each mode of `(h, m)` onto the kernel of the linearised constraints,
/// moving it the least in the `L^2` metric.
pub fn project_to_constraints(pair: &InitialDataPair) -> Result<InitialDataPair> {
    use crate::decomposition::{mode_weights, weighted_solve};
    let slice = &pair.slice;
    let n = slice.dim();
    let win = mode_weights(slice, &[Rank::Sym2, Rank::Sym2]);
    let wout = mode_weights(slice, &[Rank::Scalar, Rank::OneForm]);
    let ns = Rank::Sym2.components(n);
    let out = map_fields(slice, &[&pair.h, &pair.m], &[Rank::Sym2, Rank::Sym2], |s, t| {
        let x: Vec<C64> = from_tensor(Rank::Sym2, &t[0]).into_iter().chain(from_tensor(Rank::Sym2, &t[1])).collect();
        let eval = |x: &[C64]| -> Vec<C64> {
            let (p1, p2) = dphi_mode(s, &sym_tensor(n, &x[..ns]), &sym_tensor(n, &x[ns..]));
            std::iter::once(p1).chain(p2.data).collect()
        };
        let mut a = DMatrix::from_element(n + 1, 2 * ns, ZERO);
        for c in 0..2 * ns {
            let mut e = vec![ZERO; 2 * ns];
            e[c] = C64::new(1.0, 0.0);
            for (r, v) in eval(&e).into_iter().enumerate() {
                a[(r, c)] = v;
            }
        }
        let ax: Vec<C64> = eval(&x);
        let dx = weighted_solve(&a, &ax, &win, &wout);
        let y: Vec<C64> = x.iter().zip(&dx).map(|(p, q)| p - q).collect();
        vec![sym_tensor(n, &y[..ns]), sym_tensor(n, &y[ns..])]
    })?;
    let mut it = out.into_iter().map(|f| match f {
        SliceField::Torus(mut x) => {
            x.enforce_hermitian();
            SliceField::Torus(x)
        }
        other => other,
    });
    InitialDataPair::new(slice.clone(), it.next().expect("two"), it.next().expect("two"), pair.sobolev)
}

/// Random smooth pair: coefficients up to `|k_j| <= kmax` with amplitude `amp (1 + |k|^2)^(-decay/2)`
/// on tori, uniform components in `[-amp, amp]` on the invariant sector.
pub fn random_pair<R: rand::Rng>(
    slice: &SliceGeometry,
    lattice: Option<crate::spectral::ModeLattice>,
    kmax: usize,
    amp: f64,
    decay: f64,
    rng: &mut R,
) -> Result<InitialDataPair> {
    match slice.backend() {
        Backend::Torus { .. } => {
            let lattice = lattice.ok_or_else(|| Error::InvalidParameter("torus data need a lattice".into()))?;
            let h = SpectralField::random(lattice, Rank::Sym2, kmax, amp, decay, rng);
            let m = SpectralField::random(lattice, Rank::Sym2, kmax, amp, decay, rng);
            InitialDataPair::new(slice.clone(), SliceField::Torus(h), SliceField::Torus(m), 0.0)
        }
        Backend::Invariant => {
            let ns = Rank::Sym2.components(slice.dim());
            let mut draw = || (0..ns).map(|_| amp * rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
            let (h, m) = (draw(), draw());
            invariant_pair(slice, &h, &m)
        }
    }
}

/// [`random_pair`] projected by [`project_to_constraints`].
pub fn random_constrained_pair<R: rand::Rng>(
    slice: &SliceGeometry,
    lattice: Option<crate::spectral::ModeLattice>,
    kmax: usize,
    amp: f64,
    decay: f64,
    rng: &mut R,
) -> Result<InitialDataPair> {
    project_to_constraints(&random_pair(slice, lattice, kmax, amp, decay, rng)?)
}

/// Central-difference step of the oracle linearisation.
pub const ORACLE_EPS: f64 = 1e-5;
/// Finite-difference step of the oracle's curvature stencils.
pub const ORACLE_STENCIL: f64 = 5e-3;

/// Oracle and exact values of `D Phi` at sample points.
#[derive(Clone, Debug, Serialize)]
pub struct OracleComparison {
    pub points: Vec<Vec<f64>>,
    /// `[D Phi_1, D Phi_2 ..]` per point, by central differences of `Phi`.
    pub oracle: Vec<Vec<f64>>,
    /// The same from [`dphi`].
    pub exact: Vec<Vec<f64>>,
    /// `max |oracle - exact| / max |exact|` (absolute when `exact` vanishes).
    pub max_relative_deviation: f64,
}

fn sym_matrix(n: usize, c: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (slot, (i, j)) in sym_pairs(n).into_iter().enumerate() {
        m[(i, j)] = c[slot];
        m[(j, i)] = c[slot];
    }
    m
}

fn real_matrix(t: &Tensor<C64>) -> DMatrix<f64> {
    DMatrix::from_fn(t.dim, t.dim, |i, j| t.at2(i, j).re)
}

/// Nonlinear `(Phi_1, Phi_2)` at `x` for pointwise metric and second fundamental form.
pub fn phi_pointwise(
    metric: &dyn Fn(&[f64]) -> DMatrix<f64>,
    k: &dyn Fn(&[f64]) -> DMatrix<f64>,
    x: &[f64],
    stencil: f64,
) -> (f64, Vec<f64>) {
    let d = x.len();
    let geo = FdGeometry { d, eps: stencil, metric };
    let gi = geo.inverse(x);
    let ric = geo.ricci(x);
    let kx = k(x);
    let mut scal = 0.0;
    let mut trk = 0.0;
    let mut kk = 0.0;
    for a in 0..d {
        for b in 0..d {
            scal += gi[(a, b)] * ric[a * d + b];
            trk += gi[(a, b)] * kx[(a, b)];
            for c in 0..d {
                for e in 0..d {
                    kk += gi[(a, c)] * gi[(b, e)] * kx[(a, b)] * kx[(c, e)];
                }
            }
        }
    }
    let kc = |y: &[f64]| Comp(k(y).transpose().iter().map(|v| C64::new(*v, 0.0)).collect());
    let nk = geo.nabla2tensor(&kc, x);
    let tr_at = |y: &[f64]| {
        let gi = geo.inverse(y);
        let ky = k(y);
        C64::new((0..d).flat_map(|a| (0..d).map(move |b| (a, b))).map(|(a, b)| gi[(a, b)] * ky[(a, b)]).sum(), 0.0)
    };
    let mut p2 = vec![0.0; d];
    for (b, out) in p2.iter_mut().enumerate() {
        let mut acc = 0.0;
        for a in 0..d {
            for c in 0..d {
                acc += gi[(a, c)] * nk.0[(a * d + c) * d + b].re;
            }
        }
        *out = acc - fd(&tr_at, x, b, stencil).re;
    }
    (scal - kk + trk * trk, p2)
}

fn sample_points(n: usize) -> Vec<Vec<f64>> {
    let side = 4usize;
    let total = side.pow(n as u32);
    (0..total)
        .map(|mut p| {
            (0..n)
                .map(|a| {
                    let i = p % side;
                    p /= side;
                    std::f64::consts::TAU * (i as f64 + 0.37 + 0.11 * a as f64) / side as f64
                })
                .collect()
        })
        .collect()
}

fn residual_row(p1: f64, p2: &[f64]) -> Vec<f64> {
    std::iter::once(p1).chain(p2.iter().copied()).collect()
}

/// Scalar curvature of a left-invariant metric from orthonormalised structure constants.
pub fn invariant_scal(frame_structure: &[f64], metric: &DMatrix<f64>) -> Result<f64> {
    let chol = metric.clone().cholesky().ok_or_else(|| Error::SingularMetric("metric is not positive definite".into()))?;
    let lt = chol.l().transpose();
    let a = lt.clone().try_inverse().ok_or_else(|| Error::SingularMetric("metric is not positive definite".into()))?;
    let c = |k: usize, i: usize, j: usize| frame_structure[(k * 3 + i) * 3 + j];
    // c_o[a][b][e] = <[f_a, f_b], f_e> for the orthonormal frame f_a = sum_i A_ia e_i
    let mut co = [[[0.0; 3]; 3]; 3];
    for (p, row) in co.iter_mut().enumerate() {
        for (q, col) in row.iter_mut().enumerate() {
            for (r, v) in col.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            acc += a[(i, p)] * a[(j, q)] * c(k, i, j) * lt[(r, k)];
                        }
                    }
                }
                *v = acc;
            }
        }
    }
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                s1 += co[i][j][k] * co[i][j][k];
                s2 += co[i][j][k] * co[k][j][i];
            }
        }
    }
    Ok(-0.25 * s1 - 0.5 * s2)
}

/// `(Phi_1, Phi_2)` of left-invariant data, with an independent Koszul connection.
pub fn invariant_phi(structure: &[f64], metric: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let gi = metric.clone().try_inverse().ok_or_else(|| Error::SingularMetric("metric is not positive definite".into()))?;
    let scal = invariant_scal(structure, metric)?;
    let c = |k: usize, i: usize, j: usize| structure[(k * 3 + i) * 3 + j];
    // bracket lowered: b[i][j][l] = g([e_i, e_j], e_l)
    let b = |i: usize, j: usize, l: usize| (0..3).map(|m| c(m, i, j) * metric[(m, l)]).sum::<f64>();
    // koszul[i][j][l] = g(nabla_{e_i} e_j, e_l)
    let koszul = |i: usize, j: usize, l: usize| 0.5 * (b(i, j, l) - b(j, l, i) + b(l, i, j));
    let conn = |i: usize, j: usize, m: usize| (0..3).map(|l| gi[(m, l)] * koszul(i, j, l)).sum::<f64>();
    let mut trk = 0.0;
    let mut kk = 0.0;
    for a in 0..3 {
        for bb in 0..3 {
            trk += gi[(a, bb)] * k[(a, bb)];
            for p in 0..3 {
                for q in 0..3 {
                    kk += gi[(a, p)] * gi[(bb, q)] * k[(a, bb)] * k[(p, q)];
                }
            }
        }
    }
    // (nabla_i k)(e_j, e_x) = -k(nabla_i e_j, e_x) - k(e_j, nabla_i e_x)
    let mut p2 = vec![0.0; 3];
    for (x, out) in p2.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut nk = 0.0;
                for m in 0..3 {
                    nk -= conn(i, j, m) * k[(m, x)] + conn(i, x, m) * k[(j, m)];
                }
                acc += gi[(i, j)] * nk;
            }
        }
        *out = acc;
    }
    Ok((scal - kk + trk * trk, p2))
}

fn torus_oracle(pair: &InitialDataPair) -> Result<OracleComparison> {
    let n = pair.slice.dim();
    let h = pair.h.as_torus().expect("torus pair");
    let m = pair.m.as_torus().expect("torus pair");
    let g0 = real_matrix(pair.slice.metric());
    let k0 = real_matrix(pair.slice.second_fundamental_form());
    let res = dphi(pair)?;
    let r1 = res.scalar.as_torus().expect("torus");
    let r2 = res.one_form.as_torus().expect("torus");
    let points = sample_points(n);
    let mut oracle = Vec::with_capacity(points.len());
    let mut exact = Vec::with_capacity(points.len());
    for x in &points {
        let eval = |sign: f64| {
            let metric = |y: &[f64]| &g0 + sym_matrix(n, &evaluate(h, y)) * (sign * ORACLE_EPS);
            let kf = |y: &[f64]| &k0 + sym_matrix(n, &evaluate(m, y)) * (sign * ORACLE_EPS);
            phi_pointwise(&metric, &kf, x, ORACLE_STENCIL)
        };
        let (a1, a2) = eval(1.0);
        let (b1, b2) = eval(-1.0);
        let scale = 1.0 / (2.0 * ORACLE_EPS);
        let d2: Vec<f64> = a2.iter().zip(&b2).map(|(u, v)| (u - v) * scale).collect();
        oracle.push(residual_row((a1 - b1) * scale, &d2));
        exact.push(residual_row(evaluate(r1, x)[0], &evaluate(r2, x)));
    }
    Ok(compare(points, oracle, exact))
}

fn invariant_oracle(pair: &InitialDataPair, frame: &HomogeneousFrame) -> Result<OracleComparison> {
    let h = pair.h.as_invariant().expect("invariant pair");
    let m = pair.m.as_invariant().expect("invariant pair");
    let g0 = frame.metric_matrix();
    let eval = |sign: f64| {
        let g = &g0 + sym_matrix(3, &h.components) * (sign * ORACLE_EPS);
        let k = sym_matrix(3, &m.components) * (sign * ORACLE_EPS);
        invariant_phi(&frame.structure, &g, &k)
    };
    let (a1, a2) = eval(1.0)?;
    let (b1, b2) = eval(-1.0)?;
    let scale = 1.0 / (2.0 * ORACLE_EPS);
    let d2: Vec<f64> = a2.iter().zip(&b2).map(|(u, v)| (u - v) * scale).collect();
    let res = dphi(pair)?;
    let r1 = res.scalar.as_invariant().expect("invariant");
    let r2 = res.one_form.as_invariant().expect("invariant");
    Ok(compare(
        vec![Vec::new()],
        vec![residual_row((a1 - b1) * scale, &d2)],
        vec![residual_row(r1.components[0], &r2.components)],
    ))
}

fn compare(points: Vec<Vec<f64>>, oracle: Vec<Vec<f64>>, exact: Vec<Vec<f64>>) -> OracleComparison {
    let mut dev: f64 = 0.0;
    let mut size: f64 = 0.0;
    for (o, e) in oracle.iter().zip(&exact) {
        for (a, b) in o.iter().zip(e) {
            dev = dev.max((a - b).abs());
            size = size.max(b.abs());
        }
    }
    let max_relative_deviation = if size > 0.0 { dev / size } else { dev };
    OracleComparison { points, oracle, exact, max_relative_deviation }
}

/// Linearised constraints by central differences of the nonlinear map, on sample points.
pub fn dphi_oracle(pair: &InitialDataPair) -> Result<OracleComparison> {
    if pair.is_distributional() {
        return Err(Error::Distributional("the oracle needs pointwise values".into()));
    }
    match pair.slice.backend() {
        Backend::Torus { .. } => torus_oracle(pair),
        Backend::Invariant => {
            let frame = pair.slice.frame().expect("invariant slice has a frame").clone();
            invariant_oracle(pair, &frame)
        }
    }
}

/// How second time derivatives of a jet are supplied.
#[derive(Clone, Debug)]
pub enum Closure {
    /// From `box_L h = 0`.
    Lichnerowicz,
    /// Explicit `d^2 h / dt^2` per mode, spacetime storage.
    Explicit(Vec<(Mode, Vec<C64>)>),
}

/// Residuals of the normal-normal and normal-tangential identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `|| tr DRic + 2 DRic(nu, nu) - D Phi_1 ||`.
    pub normal_normal: f64,
    /// `|| DRic(nu, .) - D Phi_2 ||`.
    pub normal_tangential: f64,
    /// `L^2` norms of the two left-hand sides.
    pub lhs_normal_normal: f64,
    pub lhs_normal_tangential: f64,
    /// `L^2` norms of the two right-hand sides.
    pub rhs_normal_normal: f64,
    pub rhs_normal_tangential: f64,
}

impl IdentityResiduals {
    /// Largest residual relative to `max(1, size of either side)`.
    pub fn relative(&self) -> f64 {
        let scale = [
            1.0,
            self.lhs_normal_normal,
            self.lhs_normal_tangential,
            self.rhs_normal_normal,
            self.rhs_normal_tangential,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        self.normal_normal.max(self.normal_tangential) / scale
    }
}

/// `d^2 h / dt^2` of one mode from `box_L h = 0`.
pub fn box_closure(inst: &Instant<3>, symbol: &[C64], h: &[C64], hdot: &[C64]) -> Vec<C64> {
    let d = inst.bg.dim;
    let jets: Vec<J3> = h.iter().zip(hdot).map(|(a, b)| J3::from_derivatives(&[*a, *b])).collect();
    let out = inst.apply(SpacetimeOp::Lichnerowicz, symbol, &tensor_from_stored(d, 2, &jets));
    stored_from_tensor(2, &out).iter().map(|v| -v.value()).collect()
}

/// Induced data and the two identity left-hand sides of one mode.
pub(crate) struct ModeIdentity {
    pub tilde_h: Vec<C64>,
    pub tilde_m: Vec<C64>,
    pub lhs_nn: C64,
    pub lhs_nx: Vec<C64>,
}

pub(crate) fn mode_identity(
    inst: &Instant<3>,
    symbol: &[C64],
    h: &[C64],
    hdot: &[C64],
    hddot: &[C64],
) -> ModeIdentity {
    let d = inst.bg.dim;
    let jets: Vec<J3> = (0..h.len()).map(|c| J3::from_derivatives(&[h[c], hdot[c], hddot[c]])).collect();
    let ric = inst.apply(SpacetimeOp::DRic, symbol, &tensor_from_stored(d, 2, &jets));
    let tr = inst.bg.trace(&ric).value();
    let lhs_nn = tr + 2.0 * ric.at2(0, 0).value();
    let lhs_nx = (1..d).map(|i| ric.at2(0, i).value()).collect();
    let (tilde_h, tilde_m) = induced_mode(inst, symbol, h, hdot);
    ModeIdentity { tilde_h, tilde_m, lhs_nn, lhs_nx }
}

/// Evaluates both sides of `tr DRic + 2 DRic(nu, nu) = D Phi_1` and `DRic(nu, .) = D Phi_2`
/// on a Cauchy jet, the left through the spacetime operators, the right through [`dphi`]
/// of the induced data.
pub fn normal_identities(jet: &CauchyJet, closure: &Closure) -> Result<IdentityResiduals> {
    let bg = &jet.background;
    let inst = bg.instant::<3>(jet.t0)?;
    let slice = bg.slice(jet.t0)?;
    let lattice = jet.lattice();
    let n = bg.n();
    let modes = jet.modes();
    let mut nn = Vec::with_capacity(modes.len());
    let mut nx = Vec::with_capacity(modes.len() * n);
    let mut th = Vec::new();
    let mut tm = Vec::new();
    for &mode in &modes {
        let (h, dnu) = jet.mode_state(mode);
        let corr = connection_correction(&inst.bg, &h);
        let hdot: Vec<C64> = dnu.iter().zip(&corr).map(|(a, b)| a + b).collect();
        let symbol = bg.symbol(mode);
        let hddot = match closure {
            Closure::Lichnerowicz => box_closure(&inst, &symbol, &h, &hdot),
            Closure::Explicit(list) => list
                .iter()
                .find(|(m, _)| *m == mode)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::InvalidParameter(format!("no second time derivative for mode {:?}", mode.0)))?,
        };
        if hddot.len() != h.len() {
            return Err(Error::Mismatch("second time derivative has the wrong length".into()));
        }
        let id = mode_identity(&inst, &symbol, &h, &hdot, &hddot);
        nn.push(id.lhs_nn);
        nx.extend(id.lhs_nx);
        th.extend(id.tilde_h);
        tm.extend(id.tilde_m);
    }
    let mk = |rank, c| -> Result<SliceField> {
        Ok(SliceField::Torus(SpectralField::from_mode_list(lattice, rank, modes.clone(), c)?))
    };
    let lhs1 = mk(Rank::Scalar, nn)?;
    let lhs2 = mk(Rank::OneForm, nx)?;
    let pair = InitialDataPair::new(slice.clone(), mk(Rank::Sym2, th)?, mk(Rank::Sym2, tm)?, 0.0)?;
    let rhs = dphi(&pair)?;
    let norm = |f: &SliceField| field_norm(&slice, f, 0.0);
    Ok(IdentityResiduals {
        normal_normal: norm(&lhs1.sub(&rhs.scalar)?)?,
        normal_tangential: norm(&lhs2.sub(&rhs.one_form)?)?,
        lhs_normal_normal: norm(&lhs1)?,
        lhs_normal_tangential: norm(&lhs2)?,
        rhs_normal_normal: norm(&rhs.scalar)?,
        rhs_normal_tangential: norm(&rhs.one_form)?,
    })
}

/// Invariant pair from frame components.
pub fn invariant_pair(slice: &SliceGeometry, h: &[f64], m: &[f64]) -> Result<InitialDataPair> {
    InitialDataPair::new(
        slice.clone(),
        SliceField::Invariant(InvariantField::new(Rank::Sym2, h.to_vec())?),
        SliceField::Invariant(InvariantField::new(Rank::Sym2, m.to_vec())?),
        0.0,
    )
}

/// Tensor of a sym2 slice field component list.
pub fn sym_tensor(n: usize, c: &[C64]) -> Tensor<C64> {
    to_tensor(Rank::Sym2, n, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{SpacetimeBackground, KASNER_DEFAULT};
    use crate::spectral::ModeLattice;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pair(slice: &SliceGeometry, rng: &mut ChaCha8Rng) -> InitialDataPair {
        let lattice = ModeLattice::new(slice.dim(), 8).unwrap();
        super::random_pair(slice, Some(lattice), 2, 1.0, 0.5, rng).unwrap()
    }

    #[test]
    fn background_constraints_vanish() {
        for slice in [
            SliceGeometry::flat_torus(3).unwrap(),
            SliceGeometry::kasner(KASNER_DEFAULT, 1.0).unwrap(),
            SliceGeometry::kasner(KASNER_DEFAULT, 1.7).unwrap(),
            SliceGeometry::berger_scalar_flat(),
        ] {
            let (p1, p2) = slice.constraint_residual();
            assert!(p1.abs() <= 1e-12 && p2.iter().all(|v| v.abs() <= 1e-12), "{}", slice.id());
        }
    }

    #[test]
    fn besse_scalar_curvature_matches_berger_formula() {
        for lambda in [0.5, 1.0, 2.5, 4.0] {
            let f = HomogeneousFrame::berger(lambda).unwrap();
            let s = invariant_scal(&f.structure, &f.metric_matrix()).unwrap();
            assert!((s - (8.0 - 2.0 * lambda)).abs() < 1e-12, "{lambda}: {s}");
        }
    }

    #[test]
    fn metric_multiple_on_scalar_flat_slice() {
        let slice = SliceGeometry::berger_scalar_flat();
        let g = InvariantField::metric(slice.frame().unwrap());
        let pair = invariant_pair(&slice, &g.scale(0.7).components, &[0.0; 6]).unwrap();
        let r = dphi(&pair).unwrap();
        assert!(r.scalar.max_abs() < 1e-12 && r.one_form.max_abs() < 1e-12);
    }

    #[test]
    fn oracle_agrees_on_each_slice_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for slice in [
            SliceGeometry::flat_torus(3).unwrap(),
            SliceGeometry::kasner(KASNER_DEFAULT, 1.0).unwrap(),
            SliceGeometry::berger_scalar_flat(),
        ] {
            let pair = random_pair(&slice, &mut rng);
            let c = dphi_oracle(&pair).unwrap();
            assert!(c.max_relative_deviation < 1e-6, "{}: {}", slice.id(), c.max_relative_deviation);
        }
    }

    #[test]
    fn oracle_rejects_distributional_data() {
        let slice = SliceGeometry::flat_torus(3).unwrap();
        let lattice = ModeLattice::new(3, 4).unwrap();
        let h = crate::spectral::distributional_coefficients(lattice, 1, 2, Rank::Sym2, &[1]).unwrap();
        let pair = InitialDataPair::new(
            slice.clone(),
            SliceField::Torus(h.clone()),
            SliceField::Torus(SpectralField::empty(lattice, Rank::Sym2)),
            -4.0,
        )
        .unwrap();
        assert!(matches!(dphi_oracle(&pair), Err(Error::Distributional(_))));
        assert!(dphi(&pair).is_ok());
    }

    fn random_jet(bg: &SpacetimeBackground, t0: f64, rng: &mut ChaCha8Rng) -> CauchyJet {
        let lattice = ModeLattice::new(bg.n(), 8).unwrap();
        CauchyJet::random(bg, t0, lattice, 2, 1.0, 0.5, rng).unwrap()
    }

    #[test]
    fn identities_hold_for_random_closed_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (bg, t0) in [
            (SpacetimeBackground::minkowski(3).unwrap(), 0.0),
            (SpacetimeBackground::kasner(KASNER_DEFAULT).unwrap(), 1.3),
        ] {
            let jet = random_jet(&bg, t0, &mut rng);
            let r = normal_identities(&jet, &Closure::Lichnerowicz).unwrap();
            assert!(r.relative() < 1e-10, "{}: {r:?}", bg.id());
            assert!(r.lhs_normal_normal > 1e-3);
        }
    }

    #[test]
    fn explicit_closure_needs_every_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bg = SpacetimeBackground::minkowski(3).unwrap();
        let jet = random_jet(&bg, 0.0, &mut rng);
        assert!(normal_identities(&jet, &Closure::Explicit(vec![])).is_err());
    }
}
