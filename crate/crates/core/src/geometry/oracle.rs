//! Coordinate finite-difference tensor calculus, independent of the jet engine.
//!
//! Metric and field components are supplied as closures of the coordinates;
//! all derivatives are fourth-order central differences with step `eps`.
//! Used only to cross-check the exact per-mode operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

type C64 = Complex64;

/// Fourth-order central first derivative along one axis.
pub fn fd<T, F>(f: &F, x: &[f64], axis: usize, eps: f64) -> T
where
    F: Fn(&[f64]) -> T,
    T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[axis] += s * eps;
        f(&y)
    };
    (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) * (1.0 / (12.0 * eps))
}

/// Flat component array of size `d^r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Comp(pub Vec<C64>);

impl std::ops::Add for Comp {
    type Output = Comp;
    fn add(self, o: Comp) -> Comp {
        Comp(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl std::ops::Sub for Comp {
    type Output = Comp;
    fn sub(self, o: Comp) -> Comp {
        Comp(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl std::ops::Mul<f64> for Comp {
    type Output = Comp;
    fn mul(self, s: f64) -> Comp {
        Comp(self.0.iter().map(|a| a * s).collect())
    }
}

/// Finite-difference geometry of a metric given pointwise.
pub struct FdGeometry<'a> {
    pub d: usize,
    pub eps: f64,
    pub metric: &'a dyn Fn(&[f64]) -> DMatrix<f64>,
}

impl<'a> FdGeometry<'a> {
    pub fn inverse(&self, x: &[f64]) -> DMatrix<f64> {
        (self.metric)(x).try_inverse().expect("nondegenerate metric")
    }

    /// `Gamma^k_ij` at `(k d + i) d + j`.
    pub fn christoffel(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let gi = self.inverse(x);
        let dg: Vec<DMatrix<f64>> = (0..d)
            .map(|c| {
                let f = |y: &[f64]| Comp((self.metric)(y).iter().map(|v| C64::new(*v, 0.0)).collect());
                let v = fd(&f, x, c, self.eps);
                DMatrix::from_column_slice(d, d, &v.0.iter().map(|z| z.re).collect::<Vec<_>>())
            })
            .collect();
        let mut out = vec![0.0; d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for l in 0..d {
                        acc += gi[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                    }
                    out[(k * d + i) * d + j] = 0.5 * acc;
                }
            }
        }
        out
    }

    /// `R^a_bcd` at `((a d + b) d + c) d + d'` from differenced Christoffels.
    pub fn riemann(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let gam = self.christoffel(x);
        let dgam: Vec<Vec<f64>> = (0..d)
            .map(|c| {
                let f = |y: &[f64]| Comp(self.christoffel(y).iter().map(|v| C64::new(*v, 0.0)).collect());
                fd(&f, x, c, self.eps).0.iter().map(|z| z.re).collect()
            })
            .collect();
        let g = |k: usize, i: usize, j: usize| gam[(k * d + i) * d + j];
        let mut out = vec![0.0; d * d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut acc = dgam[c][(a * d + e) * d + b] - dgam[e][(a * d + c) * d + b];
                        for f in 0..d {
                            acc += g(a, c, f) * g(f, e, b) - g(a, e, f) * g(f, c, b);
                        }
                        out[((a * d + b) * d + c) * d + e] = acc;
                    }
                }
            }
        }
        out
    }

    pub fn ricci(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let r = self.riemann(x);
        let mut out = vec![0.0; d * d];
        for b in 0..d {
            for e in 0..d {
                out[b * d + e] = (0..d).map(|a| r[((a * d + b) * d + a) * d + e]).sum();
            }
        }
        out
    }

    /// `(nabla h)_{cab}` of a two-tensor field.
    pub fn nabla2tensor(&self, h: &dyn Fn(&[f64]) -> Comp, x: &[f64]) -> Comp {
        let d = self.d;
        let gam = self.christoffel(x);
        let hx = h(x);
        let mut out = vec![C64::new(0.0, 0.0); d * d * d];
        for c in 0..d {
            let dh = fd(&h, x, c, self.eps);
            for a in 0..d {
                for b in 0..d {
                    let mut acc = dh.0[a * d + b];
                    for e in 0..d {
                        acc -= hx.0[e * d + b] * gam[(e * d + c) * d + a] + hx.0[a * d + e] * gam[(e * d + c) * d + b];
                    }
                    out[(c * d + a) * d + b] = acc;
                }
            }
        }
        Comp(out)
    }

    /// `(nabla nabla h)_{e c a b}`.
    pub fn nabla_nabla2tensor(&self, h: &dyn Fn(&[f64]) -> Comp, x: &[f64]) -> Comp {
        let d = self.d;
        let gam = self.christoffel(x);
        let g = |k: usize, i: usize, j: usize| gam[(k * d + i) * d + j];
        let nh = |y: &[f64]| self.nabla2tensor(h, y);
        let nhx = nh(x);
        let at = |c: usize, a: usize, b: usize| nhx.0[(c * d + a) * d + b];
        let mut out = vec![C64::new(0.0, 0.0); d * d * d * d];
        for e in 0..d {
            let dn = fd(&nh, x, e, self.eps);
            for c in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        let mut acc = dn.0[(c * d + a) * d + b];
                        for f in 0..d {
                            acc -= at(f, a, b) * g(f, e, c) + at(c, f, b) * g(f, e, a) + at(c, a, f) * g(f, e, b);
                        }
                        out[((e * d + c) * d + a) * d + b] = acc;
                    }
                }
            }
        }
        Comp(out)
    }

    /// `nabla* nabla h - 2 R h` at `x`.
    pub fn lichnerowicz(&self, h: &dyn Fn(&[f64]) -> Comp, x: &[f64]) -> Comp {
        let d = self.d;
        let gi = self.inverse(x);
        let nnh = self.nabla_nabla2tensor(h, x);
        let r = self.riemann(x);
        let hx = h(x);
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for a in 0..d {
            for b in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for e in 0..d {
                    for c in 0..d {
                        acc -= nnh.0[((e * d + c) * d + a) * d + b] * gi[(e, c)];
                    }
                }
                // (R h)_ab = g^{ce} R^f_{bca} h_fe
                let mut rh = C64::new(0.0, 0.0);
                for c in 0..d {
                    for e in 0..d {
                        if gi[(c, e)] == 0.0 {
                            continue;
                        }
                        for f in 0..d {
                            rh += hx.0[f * d + e] * (gi[(c, e)] * r[((f * d + b) * d + c) * d + a]);
                        }
                    }
                }
                out[a * d + b] = acc - rh * 2.0;
            }
        }
        Comp(out)
    }

    /// `(L_V g)_ab = V^c d_c g_ab + g_cb d_a V^c + g_ac d_b V^c` for a vector field `V`.
    pub fn lie_of_metric(&self, v: &dyn Fn(&[f64]) -> Vec<C64>, x: &[f64]) -> Comp {
        let d = self.d;
        let g = (self.metric)(x);
        let vx = v(x);
        let dv: Vec<Comp> = (0..d).map(|c| fd(&|y: &[f64]| Comp(v(y)), x, c, self.eps)).collect();
        let dg: Vec<Comp> = (0..d)
            .map(|c| {
                fd(
                    &|y: &[f64]| Comp((self.metric)(y).iter().map(|z| C64::new(*z, 0.0)).collect()),
                    x,
                    c,
                    self.eps,
                )
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for a in 0..d {
            for b in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..d {
                    // metric matrices are symmetric, so column-major storage is harmless
                    acc += vx[c] * dg[c].0[a * d + b] + dv[a].0[c] * g[(c, b)] + dv[b].0[c] * g[(a, c)];
                }
                out[a * d + b] = acc;
            }
        }
        Comp(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_is_fourth_order() {
        let f = |x: &[f64]| C64::new(x[0].sin(), 0.0);
        let e1 = (fd(&f, &[0.3], 0, 1e-2) - C64::new(0.3f64.cos(), 0.0)).norm();
        let e2 = (fd(&f, &[0.3], 0, 5e-3) - C64::new(0.3f64.cos(), 0.0)).norm();
        assert!(e1 / e2 > 12.0);
    }

    #[test]
    fn round_sphere_ricci_in_stereographic_like_coordinates() {
        // S^2 in spherical coordinates: Ric = g.
        let metric = |x: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0].sin().powi(2)]);
        let geo = FdGeometry { d: 2, eps: 1e-3, metric: &metric };
        let x = [0.9, 0.2];
        let ric = geo.ricci(&x);
        assert!((ric[0] - 1.0).abs() < 1e-7);
        assert!((ric[3] - 0.9f64.sin().powi(2)).abs() < 1e-7);
    }
}
