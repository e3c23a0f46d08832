//! Left-invariant tensor calculus on the Berger spheres.
//!
//! The frame `e_1, e_2, e_3` of left-invariant vector fields on `SU(2)` has
//! brackets `[e_i, e_j] = c^k_ij e_k`, by default `c^k_ij = 2 eps_ijk`, for
//! which `G = I` is the round unit three-sphere. The Berger family is
//! `G = diag(lambda, 1, 1)`.
//!
//! Invariant scalars are constants and invariant tensors are fixed component
//! vectors in this frame, so every differential operator restricted to
//! invariant sections is a small real matrix. Inner products are the frame
//! contraction with `G^{-1}` on each index, times the total volume
//! `2 pi^2 sqrt(det G)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{Background, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{self, SliceGeometry, SliceOp};
use crate::spectral::{sym_pairs, Rank};

type C64 = Complex64;

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Left-invariant frame with structure constants and metric components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousFrame {
    /// `c^k_ij` stored at `(k * 3 + i) * 3 + j`.
    pub structure: Vec<f64>,
    /// `G_ij`, row-major.
    pub metric: [[f64; 3]; 3],
}

impl HomogeneousFrame {
    pub fn new(structure: Vec<f64>, metric: [[f64; 3]; 3]) -> Result<Self> {
        if structure.len() != 27 {
            return Err(Error::InvalidParameter("structure constants need 27 entries".into()));
        }
        let frame = Self { structure, metric };
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    if (frame.c(k, i, j) + frame.c(k, j, i)).abs() > 1e-14 {
                        return Err(Error::InvalidParameter(format!(
                            "structure constants not antisymmetric at c^{k}_({i}{j})"
                        )));
                    }
                }
            }
        }
        let jac = frame.jacobi_residual();
        if jac > 1e-12 {
            return Err(Error::InvalidParameter(format!("Jacobi identity violated by {jac:e}")));
        }
        for i in 0..3 {
            for j in 0..3 {
                if (metric[i][j] - metric[j][i]).abs() > 1e-14 {
                    return Err(Error::SingularMetric("metric is not symmetric".into()));
                }
            }
        }
        let g = frame.metric_matrix();
        if g.clone().cholesky().is_none() {
            return Err(Error::SingularMetric(format!("metric {metric:?} is not positive definite")));
        }
        Ok(frame)
    }

    /// Berger metric `diag(lambda, 1, 1)` on the standard `su(2)` frame.
    pub fn berger(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::SingularMetric(format!("Berger parameter must be positive, got {lambda}")));
        }
        Self::new(su2_structure(), [[lambda, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// The scalar-flat Berger metric.
    pub fn scalar_flat_berger() -> Self {
        Self::berger(scalar_flat_lambda()).expect("root is positive")
    }

    #[inline]
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.structure[(k * 3 + i) * 3 + j]
    }

    /// Largest entry of the Jacobi sum `[[e_i,e_j],e_l] + cyclic`.
    pub fn jacobi_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    for m in 0..3 {
                        let mut s = 0.0;
                        for k in 0..3 {
                            s += self.c(k, i, j) * self.c(m, k, l)
                                + self.c(k, j, l) * self.c(m, k, i)
                                + self.c(k, l, i) * self.c(m, k, j);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn metric_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |i, j| self.metric[i][j])
    }

    pub fn volume(&self) -> f64 {
        2.0 * std::f64::consts::PI.powi(2) * self.metric_matrix().determinant().sqrt()
    }

    /// Levi-Civita background in the invariant frame.
    pub fn background(&self) -> Result<Background<C64>> {
        let g = self.metric_matrix();
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric("metric is not invertible".into()))?;
        let metric = Tensor::from_vec(3, 2, g.transpose().iter().map(|&v| C64::new(v, 0.0)).collect());
        let inverse = Tensor::from_vec(3, 2, inv.transpose().iter().map(|&v| C64::new(v, 0.0)).collect());
        Ok(Background::left_invariant(metric, inverse, self.structure.clone()))
    }
}

/// `c^k_ij = 2 eps_ijk`.
pub fn su2_structure() -> Vec<f64> {
    let mut s = vec![0.0; 27];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                s[(k * 3 + i) * 3 + j] = 2.0 * levi_civita(i, j, k);
            }
        }
    }
    s
}

/// Left-invariant field given by its frame components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantField {
    pub rank: Rank,
    pub components: Vec<f64>,
}

impl InvariantField {
    pub fn new(rank: Rank, components: Vec<f64>) -> Result<Self> {
        if components.len() != rank.components(3) {
            return Err(Error::Mismatch(format!(
                "{rank:?} needs {} components, got {}",
                rank.components(3),
                components.len()
            )));
        }
        Ok(Self { rank, components })
    }

    pub fn zeros(rank: Rank) -> Self {
        Self { rank, components: vec![0.0; rank.components(3)] }
    }

    /// The metric itself as a symmetric two-tensor.
    pub fn metric(frame: &HomogeneousFrame) -> Self {
        let components = sym_pairs(3).into_iter().map(|(i, j)| frame.metric[i][j]).collect();
        Self { rank: Rank::Sym2, components }
    }

    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.rank != other.rank {
            return Err(Error::Mismatch(format!("{:?} vs {:?}", self.rank, other.rank)));
        }
        let components = self.components.iter().zip(&other.components).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { rank: self.rank, components })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rank: self.rank, components: self.components.iter().map(|x| s * x).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn to_complex(&self) -> Vec<C64> {
        self.components.iter().map(|&v| C64::new(v, 0.0)).collect()
    }

    pub fn from_complex(rank: Rank, c: &[C64]) -> Self {
        Self { rank, components: c.iter().map(|v| v.re).collect() }
    }
}

/// Gram matrix of the invariant inner product on one rank.
pub fn gram(frame: &HomogeneousFrame, rank: Rank) -> DMatrix<f64> {
    let vol = frame.volume();
    let inv = frame.metric_matrix().try_inverse().expect("validated metric");
    match rank {
        Rank::Scalar => DMatrix::from_element(1, 1, vol),
        Rank::OneForm => inv * vol,
        Rank::Sym2 => {
            let pairs = sym_pairs(3);
            let unit = |p: usize| {
                let mut m = DMatrix::zeros(3, 3);
                let (i, j) = pairs[p];
                m[(i, j)] = 1.0;
                m[(j, i)] = 1.0;
                m
            };
            DMatrix::from_fn(6, 6, |p, q| {
                let a = unit(p);
                let b = unit(q);
                (&inv * a * &inv * b).trace() * vol
            })
        }
    }
}

/// Block-diagonal Gram matrix of a stacked list of ranks.
pub fn stacked_gram(frame: &HomogeneousFrame, ranks: &[Rank]) -> DMatrix<f64> {
    let dim: usize = ranks.iter().map(|r| r.components(3)).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut off = 0;
    for &r in ranks {
        let g = gram(frame, r);
        let d = g.nrows();
        out.view_mut((off, off), (d, d)).copy_from(&g);
        off += d;
    }
    out
}

/// Invariant inner product.
pub fn inner(frame: &HomogeneousFrame, a: &InvariantField, b: &InvariantField) -> Result<f64> {
    if a.rank != b.rank {
        return Err(Error::Mismatch(format!("{:?} vs {:?}", a.rank, b.rank)));
    }
    let g = gram(frame, a.rank);
    let va = DVector::from_column_slice(&a.components);
    let vb = DVector::from_column_slice(&b.components);
    Ok(va.dot(&(g * vb)))
}

/// Curvature data of an invariant metric.
#[derive(Clone, Debug)]
pub struct InvariantGeometry {
    /// `Gamma^k_ij` at `(k * 3 + i) * 3 + j`.
    pub connection: Vec<f64>,
    pub ricci: [[f64; 3]; 3],
    pub scal: f64,
    pub volume: f64,
}

pub fn invariant_geometry(frame: &HomogeneousFrame) -> Result<InvariantGeometry> {
    let bg = frame.background()?;
    let ric = bg.ricci();
    let mut ricci = [[0.0; 3]; 3];
    for (i, row) in ricci.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (ric.at2(i, j).re + ric.at2(j, i).re);
        }
    }
    let scal = bg.trace(&ric).re;
    Ok(InvariantGeometry {
        connection: bg.christoffel.data.iter().map(|c| c.re).collect(),
        ricci,
        scal,
        volume: frame.volume(),
    })
}

/// Scalar curvature of the Berger metric `diag(lambda, 1, 1)`.
pub fn berger_scal(lambda: f64) -> f64 {
    let frame = HomogeneousFrame::berger(lambda).expect("positive parameter");
    invariant_geometry(&frame).expect("valid frame").scal
}

/// Zero of `lambda -> Scal(diag(lambda, 1, 1))`, found by bisection on the assembled curvature.
pub fn scalar_flat_lambda() -> f64 {
    let (mut lo, mut hi) = (1.0, 2.0);
    while berger_scal(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if berger_scal(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (slo, shi) = (berger_scal(lo), berger_scal(hi));
    if slo.abs() < shi.abs() {
        lo
    } else {
        hi
    }
}

/// Operators that have an invariant-sector matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    /// `h -> div h`.
    Divergence,
    /// `h -> tr h`.
    Trace,
    /// `w -> L_{w#} g`.
    LieMetric,
    /// `L`.
    ConformalKilling,
    /// `L*`.
    ConformalKillingAdjoint,
    /// `L*L` from its closed form.
    CklNormal,
    /// Hodge Laplacian on one-forms.
    Laplacian,
    /// `(beta, N) -> (L_beta g, Hess N - Ric N)`.
    MoncriefP,
    /// `(h, m) -> (-2 div h, div div m - g(Ric, m))`.
    MoncriefAdjoint,
    /// `(phi, omega) -> (Delta phi + a g(Ric, L omega), L*L omega + b d phi)`.
    SplitP { a: f64, b: f64 },
    /// `(psi, eta) -> (Delta psi + b delta eta, L*L eta + a L*(psi Ric))`.
    SplitAdjoint { a: f64, b: f64 },
}

impl OperatorKind {
    /// Parses a kind name; the split kinds take `a` and `b` separately.
    pub fn parse(name: &str, a: f64, b: f64) -> Result<Self> {
        Ok(match name {
            "div" | "divergence" => Self::Divergence,
            "trace" => Self::Trace,
            "lie_metric" => Self::LieMetric,
            "conformal_killing" => Self::ConformalKilling,
            "conformal_killing_adjoint" => Self::ConformalKillingAdjoint,
            "ckl_normal" => Self::CklNormal,
            "laplacian" => Self::Laplacian,
            "moncrief_p" => Self::MoncriefP,
            "moncrief_adjoint" => Self::MoncriefAdjoint,
            "split_p" => Self::SplitP { a, b },
            "split_adjoint" => Self::SplitAdjoint { a, b },
            other => return Err(Error::InvalidParameter(format!("unknown operator kind `{other}`"))),
        })
    }

    pub fn domain(&self) -> Vec<Rank> {
        match self {
            Self::Divergence | Self::Trace | Self::ConformalKillingAdjoint => vec![Rank::Sym2],
            Self::LieMetric | Self::ConformalKilling | Self::CklNormal | Self::Laplacian => vec![Rank::OneForm],
            Self::MoncriefP => vec![Rank::OneForm, Rank::Scalar],
            Self::MoncriefAdjoint => vec![Rank::Sym2, Rank::Sym2],
            Self::SplitP { .. } | Self::SplitAdjoint { .. } => vec![Rank::Scalar, Rank::OneForm],
        }
    }

    pub fn codomain(&self) -> Vec<Rank> {
        match self {
            Self::Divergence | Self::ConformalKillingAdjoint | Self::CklNormal | Self::Laplacian => {
                vec![Rank::OneForm]
            }
            Self::Trace => vec![Rank::Scalar],
            Self::LieMetric | Self::ConformalKilling => vec![Rank::Sym2],
            Self::MoncriefP => vec![Rank::Sym2, Rank::Sym2],
            Self::MoncriefAdjoint => vec![Rank::OneForm, Rank::Scalar],
            Self::SplitP { .. } | Self::SplitAdjoint { .. } => vec![Rank::Scalar, Rank::OneForm],
        }
    }
}

/// Dense matrix of an operator on stacked invariant component vectors.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub domain: Vec<Rank>,
    pub codomain: Vec<Rank>,
    pub matrix: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Adjoint with respect to the invariant inner products: `W_in^{-1} A^T W_out`.
    pub fn adjoint(&self, frame: &HomogeneousFrame) -> OperatorMatrix {
        let win = stacked_gram(frame, &self.domain);
        let wout = stacked_gram(frame, &self.codomain);
        let inv = win.try_inverse().expect("Gram matrices are positive definite");
        OperatorMatrix {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: inv * self.matrix.transpose() * wout,
        }
    }
}

pub fn operator_matrix(frame: &HomogeneousFrame, kind: OperatorKind) -> Result<OperatorMatrix> {
    let geom = SliceGeometry::berger(frame.clone())?;
    let domain = kind.domain();
    let codomain = kind.codomain();
    let din: usize = domain.iter().map(|r| r.components(3)).sum();
    let dout: usize = codomain.iter().map(|r| r.components(3)).sum();
    let slice = geom.mode_calc(None);
    let mut matrix = DMatrix::zeros(dout, din);
    for col in 0..din {
        let mut x = vec![C64::new(0.0, 0.0); din];
        x[col] = C64::new(1.0, 0.0);
        let y = geometry::apply_stacked(&slice, kind, &x)?;
        for (row, v) in y.iter().enumerate() {
            matrix[(row, col)] = v.re;
        }
    }
    Ok(OperatorMatrix { domain, codomain, matrix })
}

/// Weighted singular-value nullspace: vectors `v` with `A v = 0`, orthonormal in `W_in`.
pub fn weighted_nullspace(a: &DMatrix<f64>, win: &DMatrix<f64>, wout: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let (_, sin_inv) = sqrt_and_inverse(win);
    let (sout, _) = sqrt_and_inverse(wout);
    let b = &sout * a * &sin_inv;
    let n = b.ncols();
    // Pad to a square matrix so the SVD exposes the full right basis.
    let rows = b.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (b.nrows(), n)).copy_from(&b);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let cut = if smax > 0.0 { rel_tol * smax } else { rel_tol };
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= cut {
            let u = vt.row(i).transpose();
            out.push(&sin_inv * u);
        }
    }
    out
}

/// Symmetric square root of a positive definite matrix and its inverse.
pub fn sqrt_and_inverse(w: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = w.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let s = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.sqrt()));
    let si = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    (q * s * q.transpose(), q * si * q.transpose())
}

/// Orthonormal basis of invariant Killing one-forms.
pub fn killing_basis(frame: &HomogeneousFrame) -> Result<Vec<InvariantField>> {
    let lie = operator_matrix(frame, OperatorKind::LieMetric)?;
    let win = gram(frame, Rank::OneForm);
    let wout = gram(frame, Rank::Sym2);
    Ok(weighted_nullspace(&lie.matrix, &win, &wout, 1e-10)
        .into_iter()
        .map(|v| InvariantField { rank: Rank::OneForm, components: v.iter().copied().collect() })
        .collect())
}

/// Applies a slice operator to an invariant field.
pub fn apply(frame: &HomogeneousFrame, op: SliceOp, field: &InvariantField) -> Result<InvariantField> {
    let geom = SliceGeometry::berger(frame.clone())?;
    let out = geometry::apply_slice_operator(&geom, op, &geometry::SliceField::Invariant(field.clone()))?;
    match out {
        geometry::SliceField::Invariant(f) => Ok(f),
        geometry::SliceField::Torus(_) => unreachable!("invariant geometry yields invariant fields"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_sphere_is_einstein_with_positive_scalar_curvature() {
        let frame = HomogeneousFrame::berger(1.0).unwrap();
        let geo = invariant_geometry(&frame).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 } else { 0.0 };
                assert!((geo.ricci[i][j] - expect).abs() < 1e-14);
            }
        }
        assert!((geo.scal - 6.0).abs() < 1e-13);
    }

    #[test]
    fn scalar_flat_parameter_and_ricci() {
        let lambda = scalar_flat_lambda();
        assert!((lambda - 4.0).abs() < 1e-12);
        let geo = invariant_geometry(&HomogeneousFrame::berger(lambda).unwrap()).unwrap();
        assert!(geo.scal.abs() <= 1e-12);
        let norm: f64 = geo.ricci.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 0.1);
    }

    #[test]
    fn ricci_matches_milnor_for_random_diagonal_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let g: Vec<f64> = (0..3).map(|_| rng.gen_range(0.3..3.0)).collect();
            let frame = HomogeneousFrame::new(
                su2_structure(),
                [[g[0], 0.0, 0.0], [0.0, g[1], 0.0], [0.0, 0.0, g[2]]],
            )
            .unwrap();
            let geo = invariant_geometry(&frame).unwrap();
            let lam: Vec<f64> = (0..3)
                .map(|i| {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    2.0 * (g[i] / (g[j] * g[k])).sqrt()
                })
                .collect();
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                let mu = |a: usize, b: usize, c: usize| 0.5 * (lam[b] + lam[c] - lam[a]);
                let r = 2.0 * mu(j, k, i) * mu(k, i, j);
                assert!((geo.ricci[i][i] / g[i] - r).abs() < 1e-12, "{} vs {}", geo.ricci[i][i] / g[i], r);
                assert!(geo.ricci[i][j].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_and_rejections() {
        assert_eq!(HomogeneousFrame::berger(2.0).unwrap().jacobi_residual(), 0.0);
        assert!(HomogeneousFrame::berger(-1.0).is_err());
        let mut bad = su2_structure();
        bad[5] = 1.0;
        assert!(HomogeneousFrame::new(bad, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(OperatorKind::parse("nope", 0.0, 0.0).is_err());
    }

    #[test]
    fn trace_of_metric_and_trace_free_l() {
        let frame = HomogeneousFrame::scalar_flat_berger();
        let tr = operator_matrix(&frame, OperatorKind::Trace).unwrap();
        let g = InvariantField::metric(&frame);
        assert!((tr.apply(&g.components)[0] - 3.0).abs() < 1e-14);
        let l = operator_matrix(&frame, OperatorKind::ConformalKilling).unwrap();
        assert!((&tr.matrix * &l.matrix).amax() <= 1e-13);
    }

    #[test]
    fn killing_dimensions() {
        assert_eq!(killing_basis(&HomogeneousFrame::berger(1.0).unwrap()).unwrap().len(), 3);
        let frame = HomogeneousFrame::scalar_flat_berger();
        let basis = killing_basis(&frame).unwrap();
        assert_eq!(basis.len(), 1);
        let v = &basis[0].components;
        assert!(v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
        let lie = operator_matrix(&frame, OperatorKind::LieMetric).unwrap();
        assert!(lie.apply(v).iter().all(|x| x.abs() <= 1e-12));
        let e1 = InvariantField::new(Rank::OneForm, vec![frame.metric[0][0], 0.0, 0.0]).unwrap();
        let l = operator_matrix(&frame, OperatorKind::ConformalKilling).unwrap();
        assert!(l.apply(&e1.components).iter().all(|x| x.abs() <= 1e-13));
    }

    #[test]
    fn adjoint_pairs_are_transposes() {
        let frame = HomogeneousFrame::scalar_flat_berger();
        let pairs = [
            (OperatorKind::ConformalKilling, OperatorKind::ConformalKillingAdjoint),
            (OperatorKind::MoncriefP, OperatorKind::MoncriefAdjoint),
            (OperatorKind::SplitP { a: -1.0 / 3.0, b: -2.0 }, OperatorKind::SplitAdjoint { a: -1.0 / 3.0, b: -2.0 }),
            (OperatorKind::SplitP { a: 1.0 / 3.0, b: 4.0 }, OperatorKind::SplitAdjoint { a: 1.0 / 3.0, b: 4.0 }),
        ];
        for (op, adj) in pairs {
            let a = operator_matrix(&frame, op).unwrap().adjoint(&frame);
            let b = operator_matrix(&frame, adj).unwrap();
            assert!((&a.matrix - &b.matrix).amax() <= 1e-12, "{op:?}");
        }
        let l = operator_matrix(&frame, OperatorKind::ConformalKilling).unwrap();
        let lsl = operator_matrix(&frame, OperatorKind::ConformalKillingAdjoint).unwrap().matrix * &l.matrix;
        let closed = operator_matrix(&frame, OperatorKind::CklNormal).unwrap().matrix;
        assert!((lsl - closed).amax() <= 1e-12);
    }

    #[test]
    fn ricci_is_divergence_free_at_scalar_flat_parameter() {
        let frame = HomogeneousFrame::scalar_flat_berger();
        let geo = invariant_geometry(&frame).unwrap();
        let ric = InvariantField::new(Rank::Sym2, sym_pairs(3).into_iter().map(|(i, j)| geo.ricci[i][j]).collect()).unwrap();
        let div = apply(&frame, SliceOp::Divergence, &ric).unwrap();
        assert!(div.max_abs() <= 1e-12);
    }

    #[test]
    fn metric_is_parallel() {
        let frame = HomogeneousFrame::berger(2.5).unwrap();
        let bg = frame.background().unwrap();
        let calc = bg.mode(&[C64::new(0.0, 0.0); 3]);
        let ng = calc.covariant(&bg.metric);
        assert!(ng.data.iter().all(|v| v.norm() <= 1e-13));
    }
}
