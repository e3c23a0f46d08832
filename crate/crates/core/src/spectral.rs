//! Truncated Fourier fields on flat tori `T^n = R^n / (2 pi Z)^n`.
//!
//! A field is `f(x) = sum_k c(k) e^{i k.x}` over modes `k` with `|k_i| <= nmax`.
//! Coefficients are stored per mode and per tensor component. Symmetric
//! two-tensors use the upper-triangle component order `(0,0), (0,1), ..,
//! (0,n-1), (1,1), .., (n-1,n-1)`.
//!
//! Storage is sparse in the mode index: a field lists the modes it carries
//! (sorted lexicographically, closed under `k -> -k`) and every other lattice
//! mode is zero. `analyze` produces dense fields; distributional data along a
//! single axis stays cheap even at large truncations.
//!
//! All norms and inner products use the flat component contraction, where an
//! off-diagonal two-tensor slot counts twice, times the torus volume `(2 pi)^n`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Integer wave vector. Axes beyond the lattice dimension are always zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode(pub [i32; 3]);

impl Mode {
    pub const ZERO: Mode = Mode([0, 0, 0]);

    pub fn new(k: &[i32]) -> Mode {
        let mut m = [0; 3];
        m[..k.len()].copy_from_slice(k);
        Mode(m)
    }

    pub fn neg(self) -> Mode {
        Mode([-self.0[0], -self.0[1], -self.0[2]])
    }

    pub fn get(self, axis: usize) -> i32 {
        self.0[axis]
    }

    pub fn norm_sq(self) -> f64 {
        self.0.iter().map(|&k| (k as f64) * (k as f64)).sum()
    }

    pub fn max_abs(self) -> usize {
        self.0.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn is_zero(self) -> bool {
        self == Mode::ZERO
    }

    /// Real wave vector restricted to the first `n` axes.
    pub fn wavevector(self, n: usize) -> Vec<f64> {
        self.0[..n].iter().map(|&k| k as f64).collect()
    }
}

/// The set of retained modes: `k in Z^n` with `|k_i| <= nmax`.
///
/// Enumeration is lexicographic with axis 0 most significant, each axis
/// running from `-nmax` to `nmax`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLattice {
    n: usize,
    nmax: usize,
}

impl ModeLattice {
    pub fn new(n: usize, nmax: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "lattice dimension must be 1, 2 or 3, got {n}"
            )));
        }
        Ok(Self { n, nmax })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn side(&self) -> usize {
        2 * self.nmax + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, mode: Mode) -> bool {
        (0..3).all(|a| {
            if a < self.n {
                mode.0[a].unsigned_abs() as usize <= self.nmax
            } else {
                mode.0[a] == 0
            }
        })
    }

    pub fn index(&self, mode: Mode) -> Option<usize> {
        if !self.contains(mode) {
            return None;
        }
        let side = self.side() as i64;
        let mut idx = 0i64;
        for a in 0..self.n {
            idx = idx * side + (mode.0[a] as i64 + self.nmax as i64);
        }
        Some(idx as usize)
    }

    pub fn mode(&self, mut index: usize) -> Mode {
        let side = self.side();
        let mut k = [0i32; 3];
        for a in (0..self.n).rev() {
            k[a] = (index % side) as i32 - self.nmax as i32;
            index /= side;
        }
        Mode(k)
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }

    /// Torus volume `(2 pi)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.n as i32)
    }
}

/// Tensor rank of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rank {
    Scalar,
    OneForm,
    Sym2,
}

impl Rank {
    pub fn components(self, n: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::OneForm => n,
            Rank::Sym2 => n * (n + 1) / 2,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Rank::Scalar => 0,
            Rank::OneForm => 1,
            Rank::Sym2 => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Rank> {
        match code {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::OneForm),
            2 => Some(Rank::Sym2),
            _ => None,
        }
    }

    /// Flat contraction weight of each stored component (off-diagonal two-tensor slots count twice).
    pub fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Rank::Sym2 => sym_pairs(n)
                .into_iter()
                .map(|(i, j)| if i == j { 1.0 } else { 2.0 })
                .collect(),
            _ => vec![1.0; self.components(n)],
        }
    }
}

/// Upper-triangle index pairs in storage order.
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// Storage slot of the symmetric pair `(i, j)`.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Real order of a Sobolev norm, or the `H^infinity` marker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SobolevOrder {
    Finite(f64),
    Infinite,
}

impl From<f64> for SobolevOrder {
    fn from(s: f64) -> Self {
        if s.is_infinite() && s > 0.0 {
            SobolevOrder::Infinite
        } else {
            SobolevOrder::Finite(s)
        }
    }
}

/// Truncated Fourier representation of a real scalar, one-form or symmetric two-tensor field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    lattice: ModeLattice,
    rank: Rank,
    modes: Vec<Mode>,
    coeffs: Vec<C64>,
    growth: Option<f64>,
}

impl SpectralField {
    /// Dense zero field carrying every lattice mode.
    pub fn zeros(lattice: ModeLattice, rank: Rank) -> Self {
        let nc = rank.components(lattice.n);
        let modes: Vec<Mode> = lattice.modes().collect();
        let coeffs = vec![C64::new(0.0, 0.0); modes.len() * nc];
        Self { lattice, rank, modes, coeffs, growth: None }
    }

    /// Zero field carrying no modes.
    pub fn empty(lattice: ModeLattice, rank: Rank) -> Self {
        Self { lattice, rank, modes: Vec::new(), coeffs: Vec::new(), growth: None }
    }

    /// Dense field with coefficients produced by `f` for every lattice mode.
    pub fn from_fn(lattice: ModeLattice, rank: Rank, mut f: impl FnMut(Mode) -> Vec<C64>) -> Self {
        let nc = rank.components(lattice.n);
        let modes: Vec<Mode> = lattice.modes().collect();
        let mut coeffs = Vec::with_capacity(modes.len() * nc);
        for &m in &modes {
            let c = f(m);
            assert_eq!(c.len(), nc, "component count");
            coeffs.extend_from_slice(&c);
        }
        Self { lattice, rank, modes, coeffs, growth: None }
    }

    /// Sparse field from explicit per-mode coefficients. Missing partners `-k`
    /// are inserted as zero so the mode set stays symmetric.
    pub fn from_entries(
        lattice: ModeLattice,
        rank: Rank,
        entries: BTreeMap<Mode, Vec<C64>>,
    ) -> Result<Self> {
        let nc = rank.components(lattice.n);
        let mut all = entries;
        let keys: Vec<Mode> = all.keys().copied().collect();
        for m in keys {
            if !lattice.contains(m) {
                return Err(Error::Mismatch(format!("mode {:?} is outside lattice nmax={}", m.0, lattice.nmax)));
            }
            if all[&m].len() != nc {
                return Err(Error::Mismatch(format!(
                    "mode {:?} has {} components, rank needs {nc}",
                    m.0,
                    all[&m].len()
                )));
            }
            all.entry(m.neg()).or_insert_with(|| vec![C64::new(0.0, 0.0); nc]);
        }
        let mut modes = Vec::with_capacity(all.len());
        let mut coeffs = Vec::with_capacity(all.len() * nc);
        for (m, c) in all {
            modes.push(m);
            coeffs.extend(c);
        }
        Ok(Self { lattice, rank, modes, coeffs, growth: None })
    }

    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn components(&self) -> usize {
        self.rank.components(self.lattice.n)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Declared polynomial growth exponent of the coefficients, set for distributional data.
    pub fn growth(&self) -> Option<f64> {
        self.growth
    }

    pub fn with_growth(mut self, growth: Option<f64>) -> Self {
        self.growth = growth;
        self
    }

    pub fn is_distributional(&self) -> bool {
        self.growth.is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Mode, &[C64])> + '_ {
        let nc = self.components();
        self.modes.iter().copied().zip(self.coeffs.chunks(nc.max(1)))
    }

    fn position(&self, mode: Mode) -> Option<usize> {
        self.modes.binary_search(&mode).ok()
    }

    pub fn mode_coeffs(&self, mode: Mode) -> Option<&[C64]> {
        let nc = self.components();
        self.position(mode).map(|p| &self.coeffs[p * nc..(p + 1) * nc])
    }

    pub fn coeff(&self, mode: Mode, component: usize) -> C64 {
        self.mode_coeffs(mode)
            .map(|c| c[component])
            .unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    pub fn mode_coeffs_mut(&mut self, mode: Mode) -> Option<&mut [C64]> {
        let nc = self.components();
        self.position(mode).map(move |p| &mut self.coeffs[p * nc..(p + 1) * nc])
    }

    /// Applies a per-mode linear map, keeping the mode set. Output rank may differ.
    pub fn map_modes(&self, rank: Rank, mut f: impl FnMut(Mode, &[C64]) -> Vec<C64>) -> SpectralField {
        let nc_out = rank.components(self.lattice.n);
        let mut coeffs = Vec::with_capacity(self.modes.len() * nc_out);
        for (m, c) in self.iter() {
            let out = f(m, c);
            debug_assert_eq!(out.len(), nc_out);
            coeffs.extend(out);
        }
        SpectralField {
            lattice: self.lattice,
            rank,
            modes: self.modes.clone(),
            coeffs,
            growth: self.growth,
        }
    }

    /// Sparse field from per-mode outputs over an explicit mode list.
    pub fn from_mode_list(
        lattice: ModeLattice,
        rank: Rank,
        modes: Vec<Mode>,
        coeffs: Vec<C64>,
    ) -> Result<Self> {
        let nc = rank.components(lattice.n);
        if coeffs.len() != modes.len() * nc {
            return Err(Error::Mismatch("coefficient count does not match mode list".into()));
        }
        let mut map = BTreeMap::new();
        for (i, m) in modes.iter().enumerate() {
            map.insert(*m, coeffs[i * nc..(i + 1) * nc].to_vec());
        }
        Self::from_entries(lattice, rank, map)
    }

    fn check_compatible(&self, other: &SpectralField) -> Result<()> {
        if self.lattice != other.lattice || self.rank != other.rank {
            return Err(Error::Mismatch(format!(
                "({:?}, n={}, nmax={}) vs ({:?}, n={}, nmax={})",
                self.rank, self.lattice.n, self.lattice.nmax, other.rank, other.lattice.n, other.lattice.nmax
            )));
        }
        Ok(())
    }

    /// `a * self + b * other` over the union of mode sets.
    pub fn combine(&self, a: f64, other: &SpectralField, b: f64) -> Result<SpectralField> {
        self.check_compatible(other)?;
        let nc = self.components();
        let mut out = Self::empty(self.lattice, self.rank);
        out.growth = self.growth.or(other.growth);
        if self.modes == other.modes {
            out.modes = self.modes.clone();
            out.coeffs = self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x * a + y * b)
                .collect();
            return Ok(out);
        }
        let mut map: BTreeMap<Mode, Vec<C64>> = BTreeMap::new();
        for (m, c) in self.iter() {
            map.insert(m, c.iter().map(|x| x * a).collect());
        }
        for (m, c) in other.iter() {
            let e = map.entry(m).or_insert_with(|| vec![C64::new(0.0, 0.0); nc]);
            for (t, y) in e.iter_mut().zip(c) {
                *t += y * b;
            }
        }
        for (m, c) in map {
            out.modes.push(m);
            out.coeffs.extend(c);
        }
        Ok(out)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `c(-k) = conj c(k)` and the mode where it occurs.
    pub fn hermitian_deviation(&self) -> (f64, Mode) {
        let mut worst = (0.0, Mode::ZERO);
        for (m, c) in self.iter() {
            let partner = self.mode_coeffs(m.neg());
            for (i, x) in c.iter().enumerate() {
                let y = partner.map(|p| p[i]).unwrap_or_else(|| C64::new(0.0, 0.0));
                let d = (x - y.conj()).norm();
                if d > worst.0 {
                    worst = (d, m);
                }
            }
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let (dev, mode) = self.hermitian_deviation();
        let scale = self.max_abs().max(1.0);
        if dev > tol * scale {
            return Err(Error::NotHermitian { mode: mode.0[..self.lattice.n].to_vec(), deviation: dev });
        }
        Ok(())
    }

    /// Replaces `c(k)` by `(c(k) + conj c(-k)) / 2`, making the field exactly real.
    pub fn enforce_hermitian(&mut self) {
        let nc = self.components();
        let snapshot = self.clone();
        for (p, m) in self.modes.clone().into_iter().enumerate() {
            let partner = snapshot.mode_coeffs(m.neg());
            for i in 0..nc {
                let y = partner.map(|q| q[i]).unwrap_or_else(|| C64::new(0.0, 0.0));
                let x = snapshot.coeffs[p * nc + i];
                self.coeffs[p * nc + i] = (x + y.conj()) * 0.5;
            }
        }
    }

    /// Expands a sparse field to carry every lattice mode.
    pub fn densify(&self) -> SpectralField {
        let mut out = Self::zeros(self.lattice, self.rank);
        out.growth = self.growth;
        for (m, c) in self.iter() {
            if let Some(dst) = out.mode_coeffs_mut(m) {
                dst.copy_from_slice(c);
            }
        }
        out
    }

    /// Drops modes outside `|k_i| <= nmax` and re-labels the lattice.
    pub fn truncate(&self, nmax: usize) -> SpectralField {
        let lattice = ModeLattice { n: self.lattice.n, nmax };
        let nc = self.components();
        let mut out = Self::empty(lattice, self.rank);
        out.growth = self.growth;
        for (m, c) in self.iter() {
            if lattice.contains(m) {
                out.modes.push(m);
                out.coeffs.extend_from_slice(&c[..nc]);
            }
        }
        out
    }

    /// Random real band-limited field with modes `|k_i| <= kmax` and coefficients of size
    /// `amplitude * (1 + |k|^2)^{-decay/2}`.
    pub fn random<R: rand::Rng>(
        lattice: ModeLattice,
        rank: Rank,
        kmax: usize,
        amplitude: f64,
        decay: f64,
        rng: &mut R,
    ) -> SpectralField {
        let nc = rank.components(lattice.n);
        let mut map: BTreeMap<Mode, Vec<C64>> = BTreeMap::new();
        let kmax = kmax.min(lattice.nmax);
        let sub = ModeLattice { n: lattice.n, nmax: kmax };
        for m in sub.modes() {
            if map.contains_key(&m) {
                continue;
            }
            let w = amplitude * (1.0 + m.norm_sq()).powf(-decay / 2.0);
            let c: Vec<C64> = (0..nc)
                .map(|_| {
                    if m.is_zero() {
                        C64::new(w * rng.gen_range(-1.0..1.0), 0.0)
                    } else {
                        C64::new(w * rng.gen_range(-1.0..1.0), w * rng.gen_range(-1.0..1.0))
                    }
                })
                .collect();
            let conj: Vec<C64> = c.iter().map(|x| x.conj()).collect();
            map.insert(m.neg(), conj);
            map.insert(m, c);
        }
        Self::from_entries(lattice, rank, map).expect("modes are inside the lattice")
    }
}

/// Real samples of a field on the uniform grid `x_j = 2 pi m_j / size`.
///
/// Layout is component-major: `data[c * size^n + p]`, with the point index `p`
/// row-major over axes (axis 0 slowest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub size: usize,
    pub rank: Rank,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize, size: usize, rank: Rank) -> Self {
        let len = size.pow(n as u32) * rank.components(n);
        Self { n, size, rank, data: vec![0.0; len] }
    }

    pub fn points(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    /// Builds samples from a pointwise function returning all components at `x`.
    pub fn from_fn(n: usize, size: usize, rank: Rank, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut g = Self::zeros(n, size, rank);
        let np = g.points();
        for p in 0..np {
            let x = g.point(p);
            let v = f(&x);
            for (c, val) in v.into_iter().enumerate() {
                g.data[c * np + p] = val;
            }
        }
        g
    }

    pub fn point(&self, mut p: usize) -> Vec<f64> {
        let h = 2.0 * PI / self.size as f64;
        let mut x = vec![0.0; self.n];
        for a in (0..self.n).rev() {
            x[a] = (p % self.size) as f64 * h;
            p /= self.size;
        }
        x
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let np = self.points();
        &self.data[c * np..(c + 1) * np]
    }
}

fn fft_nd(data: &mut [C64], n: usize, size: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(size)
    } else {
        planner.plan_fft_forward(size)
    };
    let total = size.pow(n as u32);
    let mut line = vec![C64::new(0.0, 0.0); size];
    for axis in 0..n {
        let stride = size.pow((n - 1 - axis) as u32);
        for start in 0..total {
            // first element of each line along `axis`
            if !(start / stride).is_multiple_of(size) {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

fn grid_offset(mode: Mode, n: usize, size: usize) -> usize {
    let mut idx = 0usize;
    for a in 0..n {
        let k = mode.0[a].rem_euclid(size as i32) as usize;
        idx = idx * size + k;
    }
    idx
}

/// Forward transform of grid samples onto `lattice`.
pub fn analyze(samples: &GridField, lattice: ModeLattice) -> Result<SpectralField> {
    let needed = 2 * lattice.nmax + 1;
    if samples.size < needed {
        return Err(Error::GridTooSmall { size: samples.size, nmax: lattice.nmax, needed });
    }
    if samples.n != lattice.n {
        return Err(Error::Mismatch(format!(
            "grid dimension {} vs lattice dimension {}",
            samples.n, lattice.n
        )));
    }
    let n = lattice.n;
    let np = samples.points();
    let nc = samples.rank.components(n);
    let norm = 1.0 / np as f64;
    let mut spectra = Vec::with_capacity(nc);
    for c in 0..nc {
        let mut buf: Vec<C64> = samples.component(c).iter().map(|&v| C64::new(v, 0.0)).collect();
        fft_nd(&mut buf, n, samples.size, false);
        spectra.push(buf);
    }
    let mut field = SpectralField::from_fn(lattice, samples.rank, |m| {
        let off = grid_offset(m, n, samples.size);
        (0..nc).map(|c| spectra[c][off] * norm).collect()
    });
    field.enforce_hermitian();
    Ok(field)
}

/// Evaluates the truncated series on a grid of `size` points per axis.
pub fn synthesize(field: &SpectralField, size: usize) -> Result<GridField> {
    field.check_hermitian(1e-12)?;
    let n = field.lattice.n;
    let needed = 2 * field.lattice.nmax + 1;
    if size < needed {
        return Err(Error::GridTooSmall { size, nmax: field.lattice.nmax, needed });
    }
    let nc = field.components();
    let mut out = GridField::zeros(n, size, field.rank);
    let np = out.points();
    for c in 0..nc {
        let mut buf = vec![C64::new(0.0, 0.0); np];
        for (m, coeffs) in field.iter() {
            buf[grid_offset(m, n, size)] += coeffs[c];
        }
        fft_nd(&mut buf, n, size, true);
        for (dst, v) in out.data[c * np..(c + 1) * np].iter_mut().zip(&buf) {
            *dst = v.re;
        }
    }
    Ok(out)
}

/// Largest imaginary part produced by the inverse transform (diagnostic for the real-output property).
pub fn synthesis_imaginary_residual(field: &SpectralField, size: usize) -> f64 {
    let n = field.lattice.n;
    let np = size.pow(n as u32);
    let mut worst: f64 = 0.0;
    for c in 0..field.components() {
        let mut buf = vec![C64::new(0.0, 0.0); np];
        for (m, coeffs) in field.iter() {
            buf[grid_offset(m, n, size)] += coeffs[c];
        }
        fft_nd(&mut buf, n, size, true);
        worst = buf.iter().fold(worst, |w, v| w.max(v.im.abs()));
    }
    worst
}

/// Evaluates the series at a single point.
pub fn evaluate(field: &SpectralField, x: &[f64]) -> Vec<f64> {
    let n = field.lattice.n;
    let mut out = vec![0.0; field.components()];
    for (m, c) in field.iter() {
        let phase: f64 = (0..n).map(|a| m.0[a] as f64 * x[a]).sum();
        let e = C64::new(phase.cos(), phase.sin());
        for (o, v) in out.iter_mut().zip(c) {
            *o += (v * e).re;
        }
    }
    out
}

/// `(2 pi)^n sum_k sum_c w_c Re(conj(a) b)`.
pub fn l2_inner(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    a.check_compatible(b)?;
    let w = a.rank.weights(a.lattice.n);
    let mut acc = 0.0;
    for (m, ca) in a.iter() {
        if let Some(cb) = b.mode_coeffs(m) {
            for ((x, y), wc) in ca.iter().zip(cb).zip(&w) {
                acc += wc * (x.conj() * y).re;
            }
        }
    }
    Ok(acc * a.lattice.volume())
}

/// Trapezoidal quadrature of the flat contraction of two sampled fields.
pub fn grid_quadrature(a: &GridField, b: &GridField) -> Result<f64> {
    if a.n != b.n || a.size != b.size || a.rank != b.rank {
        return Err(Error::Mismatch("grid shapes differ".into()));
    }
    let w = a.rank.weights(a.n);
    let cell = (2.0 * PI / a.size as f64).powi(a.n as i32);
    let mut acc = 0.0;
    for (c, wc) in w.iter().enumerate() {
        let s: f64 = a.component(c).iter().zip(b.component(c)).map(|(x, y)| x * y).sum();
        acc += wc * s;
    }
    Ok(acc * cell)
}

/// `(2 pi)^n sum_{|k_i| <= T} (1 + |k|^2)^s sum_c w_c |c(k)|^2`, the squared `H^s` norm of the
/// partial sum at truncation `T` (the whole field when `truncation` is `None`).
pub fn sobolev_norm_sq(field: &SpectralField, s: f64, truncation: Option<usize>) -> f64 {
    let w = field.rank.weights(field.lattice.n);
    let mut terms: Vec<f64> = field
        .iter()
        .filter(|(m, _)| truncation.is_none_or(|t| m.max_abs() <= t))
        .map(|(m, c)| {
            let mult = (1.0 + m.norm_sq()).powf(s);
            mult * c.iter().zip(&w).map(|(x, wc)| wc * x.norm_sqr()).sum::<f64>()
        })
        .collect();
    pairwise_sum(&mut terms) * field.lattice.volume()
}

/// `H^s` norm of a field (see [`sobolev_norm_sq`]).
pub fn sobolev_norm(field: &SpectralField, s: SobolevOrder, truncation: Option<usize>) -> Result<f64> {
    match s {
        SobolevOrder::Finite(s) => Ok(sobolev_norm_sq(field, s, truncation).sqrt()),
        SobolevOrder::Infinite => Err(Error::InvalidParameter(
            "the H^infinity marker has no single norm; pick a finite order".into(),
        )),
    }
}

/// Squared partial-sum norms at each truncation, for convergence studies of distributional data.
pub fn sobolev_partial_sums(field: &SpectralField, s: f64, truncations: &[usize]) -> Vec<(usize, f64)> {
    truncations
        .iter()
        .map(|&t| (t, sobolev_norm_sq(field, s, Some(t))))
        .collect()
}

/// Pairwise summation, used wherever reductions must be reproducible.
pub fn pairwise_sum(values: &mut [f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len if len <= 8 => values.iter().sum(),
        len => {
            let (a, b) = values.split_at_mut(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Fourier data of `delta^{(order)}(x^axis)` placed on the given components.
///
/// Coefficients are `(i k)^order / (2 pi)` on modes `k e_axis`; the field is
/// flagged distributional with growth exponent `order`.
pub fn distributional_coefficients(
    lattice: ModeLattice,
    order: u32,
    axis: usize,
    rank: Rank,
    components: &[usize],
) -> Result<SpectralField> {
    if axis >= lattice.n {
        return Err(Error::InvalidParameter(format!(
            "axis {axis} out of range for dimension {}",
            lattice.n
        )));
    }
    let nc = rank.components(lattice.n);
    if let Some(&c) = components.iter().find(|&&c| c >= nc) {
        return Err(Error::InvalidParameter(format!("component {c} out of range for {rank:?}")));
    }
    let mut map = BTreeMap::new();
    let nmax = lattice.nmax as i32;
    for k in -nmax..=nmax {
        let mut mk = [0i32; 3];
        mk[axis] = k;
        let value = C64::new(0.0, k as f64).powu(order) / (2.0 * PI);
        let mut c = vec![C64::new(0.0, 0.0); nc];
        for &slot in components {
            c[slot] = value;
        }
        map.insert(Mode(mk), c);
    }
    Ok(SpectralField::from_entries(lattice, rank, map)?.with_growth(Some(order as f64)))
}
