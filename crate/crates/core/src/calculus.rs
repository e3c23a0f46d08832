//! Tensor calculus on spatially homogeneous backgrounds, one Fourier mode at a time.
//!
//! Every background here has metric components that are constant along the
//! spatial frame: flat tori and Kasner slices in coordinates, the Berger sphere
//! in a left-invariant frame. A perturbation mode `T e^{i k.x}` then has
//! spatial frame derivatives `e_j(T) = i k_j T` (zero for invariant sections),
//! and all covariant operators reduce to finite algebra on component arrays.
//!
//! Spacetime operators additionally differentiate in time. Components are then
//! truncated Taylor jets in `t` ([`Jet`]); the time derivative shifts the jet.
//!
//! Conventions:
//! - `Gamma[k][i][j]`: `nabla_{e_i} e_j = Gamma^k_{ij} e_k`.
//! - `(nabla T)_{i a b ..}`: derivative index first.
//! - `Riem[a][b][c][d] = R^a_{bcd}` with `R(e_c, e_d) e_b = R^a_{bcd} e_a` and
//!   `R(X,Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]`.
//! - `Ric_{bd} = R^a_{bad}`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

pub type C64 = Complex64;

/// Coefficient ring for the tensor engine.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn zero() -> Self;
    fn constant(c: C64) -> Self;
    fn scale(self, c: C64) -> Self;
    /// Derivative in time; constants for time-independent rings.
    fn time_derivative(self) -> Self;
    fn is_zero(&self) -> bool;
    fn value(&self) -> C64;
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn constant(c: C64) -> Self {
        c
    }
    fn scale(self, c: C64) -> Self {
        self * c
    }
    fn time_derivative(self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn value(&self) -> C64 {
        *self
    }
}

/// Truncated Taylor expansion `sum_m c_m (t - t*)^m`, `m < N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize>(pub [C64; N]);

impl<const N: usize> Jet<N> {
    /// Jet from derivative values `f(t*), f'(t*), f''(t*), ..`.
    pub fn from_derivatives(d: &[C64]) -> Self {
        let mut c = [C64::new(0.0, 0.0); N];
        let mut fact = 1.0;
        for (m, v) in d.iter().enumerate().take(N) {
            if m > 0 {
                fact *= m as f64;
            }
            c[m] = v / fact;
        }
        Jet(c)
    }

    /// Derivative values `f^{(m)}(t*)`.
    pub fn derivative(&self, m: usize) -> C64 {
        let fact: f64 = (1..=m).map(|i| i as f64).product();
        self.0[m] * fact
    }

    pub fn real_derivatives(d: &[f64]) -> Self {
        let c: Vec<C64> = d.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self::from_derivatives(&c)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] += o.0[i];
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for i in 0..N {
            self.0[i] -= o.0[i];
        }
        self
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for c in self.0.iter_mut() {
            *c = -*c;
        }
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = [C64::new(0.0, 0.0); N];
        for i in 0..N {
            if self.0[i].re == 0.0 && self.0[i].im == 0.0 {
                continue;
            }
            for j in 0..N - i {
                out[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(out)
    }
}

impl<const N: usize> AddAssign for Jet<N> {
    fn add_assign(&mut self, o: Self) {
        for i in 0..N {
            self.0[i] += o.0[i];
        }
    }
}

impl<const N: usize> SubAssign for Jet<N> {
    fn sub_assign(&mut self, o: Self) {
        for i in 0..N {
            self.0[i] -= o.0[i];
        }
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn zero() -> Self {
        Jet([C64::new(0.0, 0.0); N])
    }
    fn constant(c: C64) -> Self {
        let mut j = Self::zero();
        j.0[0] = c;
        j
    }
    fn scale(mut self, c: C64) -> Self {
        for v in self.0.iter_mut() {
            *v *= c;
        }
        self
    }
    fn time_derivative(self) -> Self {
        let mut out = Self::zero();
        for m in 0..N - 1 {
            out.0[m] = self.0[m + 1] * (m + 1) as f64;
        }
        out
    }
    fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
    fn value(&self) -> C64 {
        self.0[0]
    }
}

/// Dense tensor with all indices running over `0..dim`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub dim: usize,
    pub rank: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Self { dim, rank, data: vec![T::zero(); dim.pow(rank as u32)] }
    }

    pub fn scalar(v: T, dim: usize) -> Self {
        Self { dim, rank: 0, data: vec![v] }
    }

    pub fn from_vec(dim: usize, rank: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), dim.pow(rank as u32));
        Self { dim, rank, data }
    }

    #[inline]
    pub fn at2(&self, a: usize, b: usize) -> T {
        self.data[a * self.dim + b]
    }

    #[inline]
    pub fn at3(&self, a: usize, b: usize, c: usize) -> T {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn at4(&self, a: usize, b: usize, c: usize, d: usize) -> T {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }

    pub fn add(&self, o: &Self) -> Self {
        let data = self.data.iter().zip(&o.data).map(|(a, b)| *a + *b).collect();
        Self { dim: self.dim, rank: self.rank, data }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let data = self.data.iter().zip(&o.data).map(|(a, b)| *a - *b).collect();
        Self { dim: self.dim, rank: self.rank, data }
    }

    pub fn scale(&self, c: C64) -> Self {
        let data = self.data.iter().map(|a| a.scale(c)).collect();
        Self { dim: self.dim, rank: self.rank, data }
    }

    pub fn mul_scalar(&self, s: T) -> Self {
        let data = self.data.iter().map(|a| *a * s).collect();
        Self { dim: self.dim, rank: self.rank, data }
    }

    /// Swaps the two indices of a rank-2 tensor.
    pub fn transpose(&self) -> Self {
        assert_eq!(self.rank, 2);
        let d = self.dim;
        let mut out = Self::zeros(d, 2);
        for a in 0..d {
            for b in 0..d {
                out.data[a * d + b] = self.data[b * d + a];
            }
        }
        out
    }

    /// `T_ab + T_ba` for a rank-2 tensor.
    pub fn symmetrized_sum(&self) -> Self {
        self.add(&self.transpose())
    }

    /// Components of a rank-2 tensor in upper-triangle storage order.
    pub fn to_sym(&self) -> Vec<T> {
        assert_eq!(self.rank, 2);
        let d = self.dim;
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for a in 0..d {
            for b in a..d {
                out.push(self.data[a * d + b]);
            }
        }
        out
    }

    pub fn from_sym(dim: usize, sym: &[T]) -> Self {
        let mut out = Self::zeros(dim, 2);
        let mut p = 0;
        for a in 0..dim {
            for b in a..dim {
                out.data[a * dim + b] = sym[p];
                out.data[b * dim + a] = sym[p];
                p += 1;
            }
        }
        out
    }
}

/// Background data shared by all modes at one instant.
#[derive(Clone, Debug)]
pub struct Background<T> {
    pub dim: usize,
    /// Axis along which background and fields depend on time (spacetime backgrounds).
    pub time_axis: Option<usize>,
    pub metric: Tensor<T>,
    pub inverse: Tensor<T>,
    /// `Gamma^k_{ij}` stored at `[k][i][j]`.
    pub christoffel: Tensor<T>,
    /// Structure constants `c^k_{ij}` of a non-holonomic frame (`[e_i, e_j] = c^k_ij e_k`).
    pub structure: Option<Vec<f64>>,
    /// Nonzero entries of the inverse metric, cached for contractions.
    inverse_support: Vec<(usize, usize)>,
}

impl<T: Scalar> Background<T> {
    pub fn new(
        metric: Tensor<T>,
        inverse: Tensor<T>,
        christoffel: Tensor<T>,
        time_axis: Option<usize>,
        structure: Option<Vec<f64>>,
    ) -> Self {
        let dim = metric.dim;
        let mut inverse_support = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                if !inverse.at2(a, b).is_zero() {
                    inverse_support.push((a, b));
                }
            }
        }
        Self { dim, time_axis, metric, inverse, christoffel, structure, inverse_support }
    }

    /// Levi-Civita connection of a coordinate frame from metric jets: only time
    /// derivatives of the metric are nonzero.
    pub fn coordinate(metric: Tensor<T>, inverse: Tensor<T>, time_axis: Option<usize>) -> Self {
        let d = metric.dim;
        // dg[c][a][b] = partial_c g_ab
        let mut dg = Tensor::zeros(d, 3);
        if let Some(t) = time_axis {
            for a in 0..d {
                for b in 0..d {
                    dg.data[(t * d + a) * d + b] = metric.at2(a, b).time_derivative();
                }
            }
        }
        let mut gamma = Tensor::zeros(d, 3);
        let half = C64::new(0.5, 0.0);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = T::zero();
                    for l in 0..d {
                        let gi = inverse.at2(k, l);
                        if gi.is_zero() {
                            continue;
                        }
                        let s = dg.at3(i, l, j) + dg.at3(j, l, i) - dg.at3(l, i, j);
                        acc += gi * s;
                    }
                    gamma.data[(k * d + i) * d + j] = acc.scale(half);
                }
            }
        }
        Self::new(metric, inverse, gamma, time_axis, None)
    }

    /// Levi-Civita connection of a left-invariant frame via the Koszul formula
    /// (constant metric components, structure constants `c^k_ij`).
    pub fn left_invariant(metric: Tensor<T>, inverse: Tensor<T>, structure: Vec<f64>) -> Self {
        let d = metric.dim;
        let c = |k: usize, i: usize, j: usize| C64::new(structure[(k * d + i) * d + j], 0.0);
        // bracket_lower[i][j][k] = g([e_i, e_j], e_k)
        let bl = |i: usize, j: usize, k: usize| {
            let mut acc = T::zero();
            for l in 0..d {
                acc += metric.at2(l, k).scale(c(l, i, j));
            }
            acc
        };
        let mut gamma = Tensor::zeros(d, 3);
        let half = C64::new(0.5, 0.0);
        for i in 0..d {
            for j in 0..d {
                // lower[k] = g(nabla_i e_j, e_k)
                let lower: Vec<T> = (0..d)
                    .map(|k| (bl(i, j, k) - bl(j, k, i) + bl(k, i, j)).scale(half))
                    .collect();
                for m in 0..d {
                    let mut acc = T::zero();
                    for k in 0..d {
                        acc += inverse.at2(m, k) * lower[k];
                    }
                    gamma.data[(m * d + i) * d + j] = acc;
                }
            }
        }
        Self::new(metric, inverse, gamma, None, Some(structure))
    }

    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> T {
        self.christoffel.data[(k * self.dim + i) * self.dim + j]
    }

    fn background_derivative(&self, axis: usize, v: T) -> T {
        if Some(axis) == self.time_axis {
            v.time_derivative()
        } else {
            T::zero()
        }
    }

    /// `R^a_{bcd}`.
    pub fn riemann(&self) -> Tensor<T> {
        let d = self.dim;
        let mut r = Tensor::zeros(d, 4);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        let mut acc = self.background_derivative(c, self.gamma(a, dd, b))
                            - self.background_derivative(dd, self.gamma(a, c, b));
                        for e in 0..d {
                            acc += self.gamma(a, c, e) * self.gamma(e, dd, b)
                                - self.gamma(a, dd, e) * self.gamma(e, c, b);
                        }
                        if let Some(s) = &self.structure {
                            for e in 0..d {
                                let ce = s[(e * d + c) * d + dd];
                                if ce != 0.0 {
                                    acc -= self.gamma(a, e, b).scale(C64::new(ce, 0.0));
                                }
                            }
                        }
                        r.data[((a * d + b) * d + c) * d + dd] = acc;
                    }
                }
            }
        }
        r
    }

    pub fn ricci_from(riemann: &Tensor<T>) -> Tensor<T> {
        let d = riemann.dim;
        let mut ric = Tensor::zeros(d, 2);
        for b in 0..d {
            for dd in 0..d {
                let mut acc = T::zero();
                for a in 0..d {
                    acc += riemann.at4(a, b, a, dd);
                }
                ric.data[b * d + dd] = acc;
            }
        }
        ric
    }

    pub fn ricci(&self) -> Tensor<T> {
        Self::ricci_from(&self.riemann())
    }

    /// `g^{ab} T_ab`.
    pub fn trace(&self, t: &Tensor<T>) -> T {
        let d = self.dim;
        let mut acc = T::zero();
        for &(a, b) in &self.inverse_support {
            acc += self.inverse.at2(a, b) * t.data[a * d + b];
        }
        acc
    }

    /// `g^{ac} g^{bd} A_ab B_cd`.
    pub fn inner2(&self, a: &Tensor<T>, b: &Tensor<T>) -> T {
        let d = self.dim;
        let mut acc = T::zero();
        for &(i, k) in &self.inverse_support {
            for &(j, l) in &self.inverse_support {
                acc += self.inverse.at2(i, k) * self.inverse.at2(j, l) * a.data[i * d + j] * b.data[k * d + l];
            }
        }
        acc
    }

    /// `g^{ab} u_a v_b`.
    pub fn inner1(&self, u: &Tensor<T>, v: &Tensor<T>) -> T {
        let mut acc = T::zero();
        for &(a, b) in &self.inverse_support {
            acc += self.inverse.at2(a, b) * u.data[a] * v.data[b];
        }
        acc
    }

    /// Raises the first index of a rank-1 or the second index of `A_ab` on the left:
    /// `(A o B)_{ab} = A_{ac} g^{cd} B_{db}`.
    pub fn compose(&self, a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
        let d = self.dim;
        let mut out = Tensor::zeros(d, 2);
        for i in 0..d {
            for j in 0..d {
                let mut acc = T::zero();
                for &(c, e) in &self.inverse_support {
                    acc += a.data[i * d + c] * self.inverse.at2(c, e) * b.data[e * d + j];
                }
                out.data[i * d + j] = acc;
            }
        }
        out
    }

    /// `g^{ab} w_b`.
    pub fn raise(&self, w: &Tensor<T>) -> Tensor<T> {
        let d = self.dim;
        let mut out = Tensor::zeros(d, 1);
        for &(a, b) in &self.inverse_support {
            let v = out.data[a] + self.inverse.at2(a, b) * w.data[b];
            out.data[a] = v;
        }
        out
    }

    /// `g_{ab} V^b`.
    pub fn lower(&self, v: &Tensor<T>) -> Tensor<T> {
        let d = self.dim;
        let mut out = Tensor::zeros(d, 1);
        for a in 0..d {
            let mut acc = T::zero();
            for b in 0..d {
                acc += self.metric.at2(a, b) * v.data[b];
            }
            out.data[a] = acc;
        }
        out
    }

    /// `T(X, Y) -> T_{ab}` of the metric scaled by a scalar.
    pub fn metric_times(&self, s: T) -> Tensor<T> {
        self.metric.mul_scalar(s)
    }

    pub fn mode<'a>(&'a self, symbol: &[C64]) -> ModeCalc<'a, T> {
        let mut sym = [C64::new(0.0, 0.0); 4];
        sym[..symbol.len()].copy_from_slice(symbol);
        ModeCalc { bg: self, symbol: sym }
    }
}

/// Operators acting on a single perturbation mode over a [`Background`].
#[derive(Clone, Copy, Debug)]
pub struct ModeCalc<'a, T> {
    pub bg: &'a Background<T>,
    /// `e_j(f) = symbol[j] f` for spatial axes.
    pub symbol: [C64; 4],
}

impl<'a, T: Scalar> ModeCalc<'a, T> {
    pub fn dim(&self) -> usize {
        self.bg.dim
    }

    #[inline]
    pub fn partial(&self, axis: usize, v: T) -> T {
        if Some(axis) == self.bg.time_axis {
            v.time_derivative()
        } else {
            v.scale(self.symbol[axis])
        }
    }

    /// Covariant derivative; the new index comes first.
    pub fn covariant(&self, t: &Tensor<T>) -> Tensor<T> {
        let d = self.dim();
        let r = t.rank;
        let stride: Vec<usize> = (0..r).map(|s| d.pow((r - 1 - s) as u32)).collect();
        let block = d.pow(r as u32);
        let mut out = Tensor::zeros(d, r + 1);
        for i in 0..d {
            for idx in 0..block {
                let mut acc = self.partial(i, t.data[idx]);
                for (s, &st) in stride.iter().enumerate() {
                    let a = (idx / st) % d;
                    let base = idx - a * st;
                    for c in 0..d {
                        let g = self.bg.gamma(c, i, a);
                        if g.is_zero() {
                            continue;
                        }
                        acc -= g * t.data[base + c * st];
                    }
                    let _ = s;
                }
                out.data[i * block + idx] = acc;
            }
        }
        out
    }

    /// Divergence `g^{ij} (nabla_i T)_{j ..}` of a tensor of rank >= 1.
    pub fn divergence(&self, t: &Tensor<T>) -> Tensor<T> {
        let d = self.dim();
        let nt = self.covariant(t);
        let rest = d.pow((t.rank - 1) as u32);
        let mut out = Tensor::zeros(d, t.rank - 1);
        for &(i, j) in &self.bg.inverse_support {
            let gij = self.bg.inverse.at2(i, j);
            for r in 0..rest {
                let v = out.data[r] + gij * nt.data[(i * d + j) * rest + r];
                out.data[r] = v;
            }
        }
        out
    }

    /// `d f`.
    pub fn gradient(&self, f: T) -> Tensor<T> {
        self.covariant(&Tensor::scalar(f, self.dim()))
    }

    /// `nabla nabla f`.
    pub fn hessian(&self, f: T) -> Tensor<T> {
        self.covariant(&self.gradient(f))
    }

    /// Connection Laplacian `-g^{ij} nabla_i nabla_j T`.
    pub fn connection_laplacian(&self, t: &Tensor<T>) -> Tensor<T> {
        let d = self.dim();
        let nnt = self.covariant(&self.covariant(t));
        let rest = d.pow(t.rank as u32);
        let mut out = Tensor::zeros(d, t.rank);
        for &(i, j) in &self.bg.inverse_support {
            let gij = self.bg.inverse.at2(i, j);
            for r in 0..rest {
                let v = out.data[r] - gij * nnt.data[(i * d + j) * rest + r];
                out.data[r] = v;
            }
        }
        out
    }

    /// `(L_{w#} g)_ab = nabla_a w_b + nabla_b w_a`.
    pub fn lie_metric(&self, w: &Tensor<T>) -> Tensor<T> {
        self.covariant(w).symmetrized_sum()
    }

    /// Lie derivative of a symmetric two-tensor `s` along the vector dual to `w`:
    /// `X^c nabla_c s_ab + s_cb nabla_a X^c + s_ac nabla_b X^c`.
    pub fn lie_sym2(&self, w: &Tensor<T>, s: &Tensor<T>) -> Tensor<T> {
        let d = self.dim();
        let x = self.bg.raise(w);
        let ns = self.covariant(s);
        let nw = self.covariant(w); // nw[a][e] = nabla_a w_e
        // nx[a][c] = g^{ce} nabla_a w_e
        let mut nx = Tensor::zeros(d, 2);
        for a in 0..d {
            for &(c, e) in &self.bg.inverse_support {
                let v = nx.data[a * d + c] + self.bg.inverse.at2(c, e) * nw.at2(a, e);
                nx.data[a * d + c] = v;
            }
        }
        let mut out = Tensor::zeros(d, 2);
        for a in 0..d {
            for b in 0..d {
                let mut acc = T::zero();
                for c in 0..d {
                    acc += x.data[c] * ns.at3(c, a, b);
                    acc += s.at2(c, b) * nx.at2(a, c);
                    acc += s.at2(a, c) * nx.at2(b, c);
                }
                out.data[a * d + b] = acc;
            }
        }
        out
    }

    /// Exterior derivative of a one-form: `nabla_a w_b - nabla_b w_a`.
    pub fn exterior_one(&self, w: &Tensor<T>) -> Tensor<T> {
        let nw = self.covariant(w);
        nw.sub(&nw.transpose())
    }

    /// `delta w = -div w` for one-forms.
    pub fn codifferential_one(&self, w: &Tensor<T>) -> T {
        -self.divergence(w).data[0]
    }

    /// `(delta b)_c = -g^{ij} nabla_i b_{jc}` for two-forms.
    pub fn codifferential_two(&self, b: &Tensor<T>) -> Tensor<T> {
        let div = self.divergence(b);
        div.scale(C64::new(-1.0, 0.0))
    }

    /// Hodge Laplacian `d delta + delta d` on one-forms.
    pub fn hodge_laplacian_one(&self, w: &Tensor<T>) -> Tensor<T> {
        let dd = self.gradient(self.codifferential_one(w));
        let dd2 = self.codifferential_two(&self.exterior_one(w));
        dd.add(&dd2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn jet_arithmetic_matches_calculus() {
        // f = e^{t}, g = t^2 around t* = 1
        let e = std::f64::consts::E;
        let f = Jet::<4>::real_derivatives(&[e, e, e, e]);
        let g = Jet::<4>::real_derivatives(&[1.0, 2.0, 2.0, 0.0]);
        let p = f * g;
        // (t^2 e^t)' = (2t + t^2) e^t -> 3e; '' = (2 + 4t + t^2) e^t -> 7e; ''' = (6 + 6t + t^2) e^t -> 13e
        assert!((p.derivative(0) - c(e)).norm() < 1e-14);
        assert!((p.derivative(1) - c(3.0 * e)).norm() < 1e-13);
        assert!((p.derivative(2) - c(7.0 * e)).norm() < 1e-13);
        assert!((p.derivative(3) - c(13.0 * e)).norm() < 1e-12);
        let dp = p.time_derivative();
        assert!((dp.derivative(0) - c(3.0 * e)).norm() < 1e-13);
        assert!((dp.derivative(2) - c(13.0 * e)).norm() < 1e-12);
    }

    #[test]
    fn flat_covariant_derivative_is_multiplier() {
        let d = 3;
        let eye = Tensor::from_vec(d, 2, (0..9).map(|i| c(if i % 4 == 0 { 1.0 } else { 0.0 })).collect());
        let bg = Background::coordinate(eye.clone(), eye, None);
        let sym = [C64::new(0.0, 1.0), C64::new(0.0, -2.0), C64::new(0.0, 0.5)];
        let m = bg.mode(&sym);
        let w = Tensor::from_vec(d, 1, vec![c(1.0), c(2.0), c(3.0)]);
        let nw = m.covariant(&w);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(nw.at2(i, j), sym[i] * w.data[j]);
            }
        }
    }

    #[test]
    fn round_sphere_is_einstein() {
        let d = 3;
        let mut s = vec![0.0; 27];
        let eps = |i: usize, j: usize, k: usize| -> f64 {
            match (i, j, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    s[(k * d + i) * d + j] = 2.0 * eps(i, j, k);
                }
            }
        }
        let eye = Tensor::from_vec(d, 2, (0..9).map(|i| c(if i % 4 == 0 { 1.0 } else { 0.0 })).collect());
        let bg = Background::left_invariant(eye.clone(), eye, s);
        let ric = bg.ricci();
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 2.0 } else { 0.0 };
                assert!((ric.at2(a, b) - c(expect)).norm() < 1e-14);
            }
        }
    }
}
