//! Snapshots, run configuration, manifests, reports and diagnostics tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constraints::{random_constrained_pair, InitialDataPair};
use crate::error::{Error, Result, SnapshotFault};
use crate::evolution::{DiagnosticsSeries, EvolveOptions, Stepping};
use crate::geometry::{validate_kasner, SliceField, SliceGeometry, SliceKind, SpacetimeBackground};
use crate::invariant::InvariantField;
use crate::spectral::{Mode, ModeLattice, Rank, SpectralField};

type C64 = Complex64;

pub const MAGIC: &[u8; 4] = b"LWF1";
const HEADER_LEN: usize = 20;

fn fault(kind: SnapshotFault, detail: impl Into<String>) -> Error {
    Error::Snapshot { kind, detail: detail.into() }
}

/// Encodes one record; invariant fields are written as a single `n = 3`, `nmax = 0` mode.
pub fn encode_record(field: &SliceField) -> Vec<u8> {
    let (rank, n, nmax, comps, coeffs) = match field {
        SliceField::Torus(f) => {
            let lattice = f.lattice();
            let comps = f.components();
            let mut coeffs = Vec::with_capacity(lattice.len() * comps);
            for mode in lattice.modes() {
                match f.mode_coeffs(mode) {
                    Some(c) => coeffs.extend_from_slice(c),
                    None => coeffs.extend(std::iter::repeat_n(C64::new(0.0, 0.0), comps)),
                }
            }
            (f.rank(), lattice.dim(), lattice.nmax(), comps, coeffs)
        }
        SliceField::Invariant(f) => (f.rank, 3, 0, f.components.len(), f.to_complex()),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * coeffs.len());
    out.extend_from_slice(MAGIC);
    for v in [rank.code(), n as u32, nmax as u32, comps as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in coeffs {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

/// Decoded record before it is attached to a slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub rank: Rank,
    pub lattice: ModeLattice,
    pub coeffs: Vec<C64>,
}

impl Record {
    pub fn into_spectral(self) -> Result<SpectralField> {
        let comps = self.rank.components(self.lattice.dim());
        let lattice = self.lattice;
        let coeffs = self.coeffs;
        Ok(SpectralField::from_fn(lattice, self.rank, |m| {
            let i = lattice.index(m).expect("lattice mode");
            coeffs[i * comps..(i + 1) * comps].to_vec()
        }))
    }

    pub fn into_invariant(self) -> Result<InvariantField> {
        if self.lattice.nmax() != 0 {
            return Err(fault(SnapshotFault::Metadata, "invariant record must have nmax = 0"));
        }
        InvariantField::new(self.rank, self.coeffs.iter().map(|c| c.re).collect())
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("eight bytes"))
}

/// Decodes one record from the front of `bytes`, returning it and the bytes consumed.
pub fn decode_record(bytes: &[u8]) -> Result<(Record, usize)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(fault(SnapshotFault::BadMagic, "expected LWF1"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fault(SnapshotFault::Truncated, format!("header needs {HEADER_LEN} bytes, found {}", bytes.len())));
    }
    let code = read_u32(bytes, 4);
    let n = read_u32(bytes, 8) as usize;
    let nmax = read_u32(bytes, 12) as usize;
    let comps = read_u32(bytes, 16) as usize;
    let rank = Rank::from_code(code).ok_or_else(|| fault(SnapshotFault::Metadata, format!("unknown rank code {code}")))?;
    let lattice = ModeLattice::new(n, nmax).map_err(|e| fault(SnapshotFault::Metadata, e.to_string()))?;
    if comps != rank.components(n) {
        return Err(fault(
            SnapshotFault::CountMismatch,
            format!("rank {code} on n = {n} has {} components, header says {comps}", rank.components(n)),
        ));
    }
    let count = lattice.len() * comps;
    let end = HEADER_LEN + 16 * count;
    if bytes.len() < end {
        return Err(fault(SnapshotFault::Truncated, format!("expected {} coefficient bytes, found {}", 16 * count, bytes.len() - HEADER_LEN)));
    }
    let coeffs = (0..count)
        .map(|i| C64::new(read_f64(bytes, HEADER_LEN + 16 * i), read_f64(bytes, HEADER_LEN + 16 * i + 8)))
        .collect();
    Ok((Record { rank, lattice, coeffs }, end))
}

/// Whether a snapshot holds one field or an `(h, m)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Field,
    Pair,
}

/// JSON sidecar written next to every snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub kind: SnapshotKind,
    pub background: String,
    pub slice: SliceKind,
    pub sobolev: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, meta: &SnapshotMeta) -> Result<()> {
    let value = serde_json::to_value(meta)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&value)? + "\n")?;
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<SnapshotMeta> {
    let text = fs::read_to_string(sidecar_path(path))?;
    serde_json::from_str(&text).map_err(|e| fault(SnapshotFault::Metadata, e.to_string()))
}

fn attach(record: Record, slice: &SliceGeometry) -> Result<SliceField> {
    let field = match slice.kind() {
        SliceKind::BergerInvariant { .. } => SliceField::Invariant(record.into_invariant()?),
        _ => {
            if record.lattice.dim() != slice.dim() {
                return Err(fault(SnapshotFault::Metadata, "record dimension does not match the slice"));
            }
            SliceField::Torus(record.into_spectral()?)
        }
    };
    Ok(field)
}

/// Writes a single field with its sidecar.
pub fn write_field(path: &Path, field: &SliceField, meta: &SnapshotMeta) -> Result<()> {
    let mut meta = meta.clone();
    meta.kind = SnapshotKind::Field;
    if let SliceField::Torus(f) = field {
        meta.growth = f.growth();
    }
    fs::write(path, encode_record(field))?;
    write_sidecar(path, &meta)
}

pub fn read_field(path: &Path) -> Result<(SliceField, SnapshotMeta)> {
    let meta = read_sidecar(path)?;
    if meta.kind != SnapshotKind::Field {
        return Err(fault(SnapshotFault::Metadata, "sidecar describes a pair"));
    }
    let bytes = fs::read(path)?;
    let (record, used) = decode_record(&bytes)?;
    if used != bytes.len() {
        return Err(fault(SnapshotFault::CountMismatch, format!("{} trailing bytes", bytes.len() - used)));
    }
    let slice = SliceGeometry::new(meta.slice.clone())?;
    let mut field = attach(record, &slice)?;
    if let SliceField::Torus(f) = &mut field {
        *f = f.clone().with_growth(meta.growth);
    }
    Ok((field, meta))
}

/// Writes `h` then `m` as two consecutive records.
pub fn write_pair(path: &Path, pair: &InitialDataPair, params: BTreeMap<String, Value>, background: &str) -> Result<()> {
    let mut bytes = encode_record(&pair.h);
    bytes.extend(encode_record(&pair.m));
    fs::write(path, bytes)?;
    let meta = SnapshotMeta {
        kind: SnapshotKind::Pair,
        background: background.to_string(),
        slice: pair.slice.kind().clone(),
        sobolev: pair.sobolev,
        growth: None,
        params,
    };
    write_sidecar(path, &meta)
}

pub fn read_pair(path: &Path) -> Result<(InitialDataPair, SnapshotMeta)> {
    let meta = read_sidecar(path)?;
    if meta.kind != SnapshotKind::Pair {
        return Err(fault(SnapshotFault::Metadata, "sidecar describes a single field"));
    }
    let bytes = fs::read(path)?;
    let (h, used) = decode_record(&bytes)?;
    let (m, more) = decode_record(&bytes[used..])?;
    if used + more != bytes.len() {
        return Err(fault(SnapshotFault::CountMismatch, format!("{} trailing bytes", bytes.len() - used - more)));
    }
    if h.lattice != m.lattice {
        return Err(fault(SnapshotFault::CountMismatch, "h and m records use different lattices"));
    }
    let slice = SliceGeometry::new(meta.slice.clone())?;
    let h = attach(h, &slice)?;
    let m = attach(m, &slice)?;
    Ok((InitialDataPair::new(slice, h, m, meta.sobolev)?, meta))
}

fn default_n() -> usize {
    3
}

fn default_nmax() -> usize {
    8
}

fn default_one() -> f64 {
    1.0
}

fn default_decay() -> f64 {
    3.0
}

fn default_j() -> usize {
    2
}

fn default_out() -> String {
    "linwave-out".into()
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    /// `minkowski-torus` or `kasner`.
    pub kind: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default = "default_nmax")]
    pub nmax: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { nmax: default_nmax() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<String>,
    /// `random`, `standing-wave` or `zero`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(default = "default_one")]
    pub amplitude: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default = "default_one")]
    pub t1: f64,
    /// Absent means exact per-mode propagation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub samples: Vec<f64>,
    #[serde(default = "default_j")]
    pub j: usize,
    #[serde(default = "default_one")]
    pub sobolev: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { t0: None, t1: 1.0, dt: None, samples: Vec::new(), j: default_j(), sobolev: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: String,
    /// Times at which the induced pair is written.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out(), snapshots: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol")]
    pub gauge: f64,
    #[serde(default = "default_tol")]
    pub constraints: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gauge: default_tol(), constraints: default_tol() }
    }
}

/// Run configuration read from a TOML file of `section.key = value` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub background: BackgroundConfig,
    #[serde(default)]
    pub lattice: LatticeConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

pub const GENERATORS: [&str; 3] = ["random", "standing-wave", "zero"];

fn config_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks parameter domains; relative snapshot paths resolve against `base`.
    pub fn validate(&self, base: Option<&Path>) -> Result<()> {
        match self.background.kind.as_str() {
            "minkowski-torus" => {
                if !(2..=3).contains(&self.background.n) {
                    return Err(config_err("background.n", format!("must be 2 or 3, got {}", self.background.n)));
                }
                if self.background.p.is_some() {
                    return Err(config_err("background.p", "only valid for kasner"));
                }
            }
            "kasner" => {
                if self.background.n != 3 {
                    return Err(config_err("background.n", "kasner requires n = 3"));
                }
                let p = self.background.p.ok_or_else(|| config_err("background.p", "required for kasner"))?;
                validate_kasner(p).map_err(|e| config_err("background.p", e))?;
            }
            other => return Err(config_err("background.kind", format!("unknown background '{other}'"))),
        }
        if self.lattice.nmax == 0 {
            return Err(config_err("lattice.nmax", "must be positive"));
        }
        match (&self.data.snapshot, &self.data.generator) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(config_err("data", "give exactly one of data.snapshot and data.generator"));
            }
            (Some(path), None) => {
                let path = self.resolve(path, base);
                if !path.exists() {
                    return Err(config_err("data.snapshot", format!("{} does not exist", path.display())));
                }
                if !sidecar_path(&path).exists() {
                    return Err(config_err("data.snapshot", format!("missing sidecar {}", sidecar_path(&path).display())));
                }
            }
            (None, Some(g)) => {
                if !GENERATORS.contains(&g.as_str()) {
                    return Err(config_err("data.generator", format!("unknown generator '{g}', expected one of {GENERATORS:?}")));
                }
            }
        }
        if let Some(k) = self.data.kmax {
            if k == 0 || k > self.lattice.nmax {
                return Err(config_err("data.kmax", format!("must lie in 1..={}", self.lattice.nmax)));
            }
        }
        if !(self.data.amplitude.is_finite() && self.data.amplitude >= 0.0) {
            return Err(config_err("data.amplitude", "must be finite and non-negative"));
        }
        if !self.data.decay.is_finite() {
            return Err(config_err("data.decay", "must be finite"));
        }
        let t0 = self.t0();
        let t1 = self.evolve.t1;
        if !t0.is_finite() || !t1.is_finite() {
            return Err(config_err("evolve.t1", "times must be finite"));
        }
        if self.is_kasner() {
            if t0 <= 0.0 {
                return Err(config_err("evolve.t0", "kasner times must be positive"));
            }
            if t1 <= 0.0 {
                return Err(config_err("evolve.t1", "kasner times must be positive"));
            }
            if self.evolve.dt.is_none() {
                return Err(config_err("evolve.dt", "exact propagation is only available on minkowski-torus"));
            }
        }
        if let Some(dt) = self.evolve.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(config_err("evolve.dt", "must be positive"));
            }
        }
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        for (key, times) in [("evolve.samples", &self.evolve.samples), ("output.snapshots", &self.output.snapshots)] {
            if let Some(t) = times.iter().find(|t| !(lo..=hi).contains(*t)) {
                return Err(config_err(key, format!("time {t} outside [{lo}, {hi}]")));
            }
        }
        if !self.evolve.sobolev.is_finite() {
            return Err(config_err("evolve.sobolev", "must be finite"));
        }
        for (key, v) in [("tolerances.gauge", self.tolerances.gauge), ("tolerances.constraints", self.tolerances.constraints)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(key, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn is_kasner(&self) -> bool {
        self.background.kind == "kasner"
    }

    pub fn t0(&self) -> f64 {
        self.evolve.t0.unwrap_or(if self.is_kasner() { 1.0 } else { 0.0 })
    }

    pub fn resolve(&self, path: &str, base: Option<&Path>) -> PathBuf {
        let p = Path::new(path);
        match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn spacetime(&self) -> Result<SpacetimeBackground> {
        if self.is_kasner() {
            SpacetimeBackground::kasner(self.background.p.expect("validated"))
        } else {
            SpacetimeBackground::minkowski(self.background.n)
        }
    }

    pub fn lattice(&self) -> Result<ModeLattice> {
        ModeLattice::new(self.background.n, self.lattice.nmax)
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            t_end: self.evolve.t1,
            stepping: match self.evolve.dt {
                Some(dt) => Stepping::Fixed(dt),
                None => Stepping::Exact,
            },
            samples: self.evolve.samples.clone(),
        }
    }

    /// Builds the initial pair on the slice at `t0`.
    pub fn initial_data(&self, base: Option<&Path>) -> Result<InitialDataPair> {
        let bg = self.spacetime()?;
        let slice = bg.slice(self.t0())?;
        if let Some(path) = &self.data.snapshot {
            let (pair, _) = read_pair(&self.resolve(path, base))?;
            if pair.slice.kind() != slice.kind() {
                return Err(config_err("data.snapshot", "snapshot slice does not match the configured background and t0"));
            }
            return Ok(pair);
        }
        let lattice = self.lattice()?;
        let kmax = self.data.kmax.unwrap_or(self.lattice.nmax.min(4));
        generate_pair(self.data.generator.as_deref().expect("validated"), &slice, lattice, self.data.seed, kmax, self.data.amplitude, self.data.decay)
    }
}

/// Named initial-data generators on torus slices.
pub fn generate_pair(
    name: &str,
    slice: &SliceGeometry,
    lattice: ModeLattice,
    seed: u64,
    kmax: usize,
    amplitude: f64,
    decay: f64,
) -> Result<InitialDataPair> {
    match name {
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_constrained_pair(slice, Some(lattice), kmax, amplitude, decay, &mut rng)
        }
        "standing-wave" => standing_wave(slice, lattice, amplitude),
        "zero" => {
            let z = SliceField::Torus(SpectralField::empty(lattice, Rank::Sym2));
            InitialDataPair::new(slice.clone(), z.clone(), z, 1.0)
        }
        other => Err(Error::InvalidParameter(format!("unknown generator '{other}'"))),
    }
}

/// Transverse traceless `h = a cos(x^1) (dx^2 dx^2 - dx^3 dx^3)` with `m = 0`.
pub fn standing_wave(slice: &SliceGeometry, lattice: ModeLattice, amplitude: f64) -> Result<InitialDataPair> {
    if lattice.dim() != 3 || !matches!(slice.kind(), SliceKind::FlatTorus { .. }) {
        return Err(Error::UnsupportedSlice("the standing wave lives on the flat 3-torus".into()));
    }
    let z = C64::new(0.0, 0.0);
    let a = C64::new(0.5 * amplitude, 0.0);
    let mut e = BTreeMap::new();
    for m in [Mode::new(&[1, 0, 0]), Mode::new(&[-1, 0, 0])] {
        e.insert(m, vec![z, z, z, a, z, -a]);
    }
    let h = SpectralField::from_entries(lattice, Rank::Sym2, e)?;
    let m = SpectralField::empty(lattice, Rank::Sym2);
    InitialDataPair::new(slice.clone(), SliceField::Torus(h), SliceField::Torus(m), 1.0)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let cfg = RunConfig::from_toml(&text)?;
    cfg.validate(path.parent())?;
    Ok(cfg)
}

pub fn save_config(path: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(path, cfg.to_toml()?)?;
    Ok(())
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    /// Passes when `value >= tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value >= tolerance }
    }
}

/// JSON report of a check suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub background: String,
    pub results: Vec<CheckResult>,
    pub pass: bool,
}

impl Report {
    pub fn new(suite: impl Into<String>, background: impl Into<String>, results: Vec<CheckResult>) -> Self {
        let pass = results.iter().all(|r| r.pass);
        Self { suite: suite.into(), background: background.into(), results, pass }
    }
}

/// Record of a CLI run; enough to repeat it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub checks: BTreeMap<String, bool>,
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, config: Value) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            checks: BTreeMap::new(),
            timings: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }
}

/// Serialises with sorted object keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v: Value = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_sorted_json(value)?)?;
    Ok(())
}

/// Diagnostics table: `t, gauge_res, dphi1_res, dphi2_res, energy_j0..energy_jJ`.
pub fn diagnostics_csv(series: &DiagnosticsSeries) -> String {
    let jcount = series.energies.first().map_or(0, Vec::len);
    let mut out = String::from("t,gauge_res,dphi1_res,dphi2_res");
    for j in 0..jcount {
        out.push_str(&format!(",energy_j{j}"));
    }
    out.push('\n');
    for (i, t) in series.times.iter().enumerate() {
        let mut row = vec![*t, series.gauge[i], series.dphi1[i], series.dphi2[i]];
        row.extend(&series.energies[i]);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
