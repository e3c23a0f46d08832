use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use linwave::constraints::{dphi, dphi_oracle, normal_identities, random_pair, Closure};
use linwave::decomposition::{
    gauge_producing_data, kernel_basis, moncrief_project, split_solve, SplitOperatorParams, SplitPart,
};
use linwave::evolution::{build_cauchy_jet, diagnostics, evolve, extract_induced_data, EvolveOptions, Stepping};
use linwave::geometry::{
    field_norm, CauchyJet, SliceField, SliceGeometry, SliceKind, SpacetimeBackground, KASNER_DEFAULT,
};
use linwave::invariant::InvariantField;
use linwave::io::{
    diagnostics_csv, generate_pair, load_config, write_field, write_json, write_pair, CheckResult, Report,
    RunManifest, SnapshotKind, SnapshotMeta,
};
use linwave::spectral::{distributional_coefficients, sobolev_partial_sums, sym_index, ModeLattice, Rank, SpectralField};
use linwave::{Error, Result};

#[derive(Parser, Debug, Serialize)]
#[command(name = "linwave", version, about = "Linearised Einstein equation on homogeneous vacuum backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Check that the background slice solves the constraints.
    Background(SliceArgs),
    /// Split a random symmetric two-tensor into its gamma, L omega, C Ric and phi g parts.
    Decompose(DecomposeArgs),
    /// Moncrief splitting of a random pair.
    Moncrief(DataArgs),
    /// Gauge-producing data from a random lapse and shift.
    GaugeData(DataArgs),
    /// Run the Cauchy problem described by a config file.
    Evolve(EvolveArgs),
    /// Run a named check suite.
    Check(CheckArgs),
    /// Truncated Sobolev norms of distributional data.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BackgroundKind {
    MinkowskiTorus,
    Kasner,
    Berger,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SliceArgs {
    #[arg(long, value_enum, default_value = "minkowski-torus")]
    background: BackgroundKind,
    /// Spatial dimension of the torus.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Kasner exponents.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p: Option<Vec<f64>>,
    /// Time of the slice (0 on Minkowski, 1 on Kasner by default).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value = "linwave-out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DataArgs {
    #[command(flatten)]
    slice: SliceArgs,
    #[arg(long, default_value_t = 8)]
    nmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    kmax: usize,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 2.0)]
    decay: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DecomposeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `position` or `momentum`.
    #[arg(long, default_value = "position")]
    part: String,
}

#[derive(Args, Debug, Clone, Serialize)]
struct EvolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Suite {
    Identities,
    Oracle,
    Kernels,
    Decomposition,
    Moncrief,
    Propagation,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CheckArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[command(flatten)]
    data: DataArgs,
    /// Number of random samples.
    #[arg(long, default_value_t = 10)]
    samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Generator {
    DiracDerivative,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SpectrumArgs {
    #[arg(long, value_enum, default_value = "dirac-derivative")]
    generator: Generator,
    #[arg(long, default_value_t = 1)]
    order: u32,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    sobolev: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    truncations: Vec<usize>,
    #[arg(long, default_value = "linwave-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Where a subcommand's data live.
struct Setup {
    slice: SliceGeometry,
    spacetime: Option<SpacetimeBackground>,
    t: f64,
}

fn setup(args: &SliceArgs) -> Result<Setup> {
    match args.background {
        BackgroundKind::MinkowskiTorus => {
            if args.p.is_some() {
                return Err(Error::InvalidParameter("--p only applies to kasner".into()));
            }
            let bg = SpacetimeBackground::minkowski(args.n)?;
            let t = args.t.unwrap_or(0.0);
            Ok(Setup { slice: bg.slice(t)?, spacetime: Some(bg), t })
        }
        BackgroundKind::Kasner => {
            let p = match &args.p {
                None => KASNER_DEFAULT,
                Some(v) => v
                    .as_slice()
                    .try_into()
                    .map_err(|_| Error::InvalidParameter(format!("--p needs three exponents, got {}", v.len())))?,
            };
            let bg = SpacetimeBackground::kasner(p)?;
            let t = args.t.unwrap_or(1.0);
            Ok(Setup { slice: bg.slice(t)?, spacetime: Some(bg), t })
        }
        BackgroundKind::Berger => Ok(Setup { slice: SliceGeometry::berger_scalar_flat(), spacetime: None, t: 0.0 }),
    }
}

fn lattice_for(slice: &SliceGeometry, nmax: usize) -> Result<Option<ModeLattice>> {
    match slice.kind() {
        SliceKind::BergerInvariant { .. } => Ok(None),
        _ => Ok(Some(ModeLattice::new(slice.dim(), nmax)?)),
    }
}

fn spacetime(s: &Setup) -> Result<&SpacetimeBackground> {
    s.spacetime.as_ref().ok_or_else(|| Error::UnsupportedSlice(format!("{} has no evolving spacetime here", s.slice.id())))
}

fn random_field(slice: &SliceGeometry, lattice: Option<ModeLattice>, rank: Rank, d: &DataArgs, rng: &mut ChaCha8Rng) -> SliceField {
    use rand::Rng;
    match lattice {
        Some(l) => SliceField::Torus(SpectralField::random(l, rank, d.kmax, d.amplitude, d.decay, rng)),
        None => {
            let c = (0..rank.components(slice.dim())).map(|_| d.amplitude * rng.gen_range(-1.0..1.0)).collect();
            SliceField::Invariant(InvariantField::new(rank, c).expect("component count"))
        }
    }
}

fn snapshot_meta(slice: &SliceGeometry, sobolev: f64, params: &Value) -> SnapshotMeta {
    let params = match params {
        Value::Object(m) => m.clone().into_iter().collect(),
        _ => BTreeMap::new(),
    };
    SnapshotMeta { kind: SnapshotKind::Field, background: slice.id(), slice: slice.kind().clone(), sobolev, growth: None, params }
}

/// Writes the report and the manifest and prints the report.
fn finish(out: &Path, name: &str, report: &Report, mut manifest: RunManifest, start: Instant) -> Result<bool> {
    let file = format!("{name}.json");
    write_json(&out.join(&file), report)?;
    manifest.outputs.push(file);
    for r in &report.results {
        manifest.checks.insert(r.name.clone(), r.pass);
    }
    manifest.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    manifest.outputs.sort();
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("{}", serde_json::to_string_pretty(&serde_json::to_value(report)?)?);
    Ok(report.pass)
}

fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    let name = match &cli.command {
        Command::Background(_) => "background",
        Command::Decompose(_) => "decompose",
        Command::Moncrief(_) => "moncrief",
        Command::GaugeData(_) => "gauge-data",
        Command::Evolve(_) => "evolve",
        Command::Check(_) => "check",
        Command::Spectrum(_) => "spectrum",
    };
    let manifest = RunManifest::new(name, serde_json::to_value(&cli.command)?);
    match &cli.command {
        Command::Background(a) => background(a, manifest, start),
        Command::Decompose(a) => decompose(a, manifest, start),
        Command::Moncrief(a) => moncrief(a, manifest, start),
        Command::GaugeData(a) => gauge_data(a, manifest, start),
        Command::Evolve(a) => evolve_run(a, start),
        Command::Check(a) => check(a, manifest, start),
        Command::Spectrum(a) => spectrum(a, manifest, start),
    }
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn background(a: &SliceArgs, manifest: RunManifest, start: Instant) -> Result<bool> {
    let s = setup(a)?;
    prepare(&a.out)?;
    let (p1, p2) = s.slice.constraint_residual();
    let p2 = p2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut results = vec![CheckResult::at_most("phi_scalar", p1.abs(), 1e-12), CheckResult::at_most("phi_one_form", p2, 1e-12)];
    if matches!(s.slice.kind(), SliceKind::BergerInvariant { .. }) {
        let ric = s.slice.background().inner2(s.slice.ricci(), s.slice.ricci()).re.sqrt();
        results.push(CheckResult::at_most("scal", s.slice.scal().abs(), 1e-12));
        results.push(CheckResult::at_least("ricci_norm", ric, 0.1));
    }
    finish(&a.out, "background", &Report::new("background", s.slice.id(), results), manifest, start)
}

fn decompose(a: &DecomposeArgs, mut manifest: RunManifest, start: Instant) -> Result<bool> {
    let d = &a.data;
    let s = setup(&d.slice)?;
    let part = SplitPart::parse(&a.part)?;
    let lattice = lattice_for(&s.slice, d.nmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let source = random_field(&s.slice, lattice, Rank::Sym2, d, &mut rng);
    let res = split_solve(&source, part, &s.slice)?;
    let again = split_solve(&res.gamma_part, part, &s.slice)?;
    let scale = field_norm(&s.slice, &res.gamma_part, 0.0)?.max(1.0);
    let idem = field_norm(&s.slice, &again.gamma_part.sub(&res.gamma_part)?, 0.0)? / scale;
    prepare(&d.slice.out)?;
    let params = serde_json::to_value(a)?;
    for (file, field) in [("gamma.lwf", &res.gamma_part), ("omega.lwf", &res.omega), ("phi.lwf", &res.phi)] {
        write_field(&d.slice.out.join(file), field, &snapshot_meta(&s.slice, 0.0, &params))?;
        manifest.outputs.extend([file.to_string(), format!("{file}.json")]);
    }
    let mut details = serde_json::to_value(res.report)?;
    details["c"] = Value::from(res.c);
    write_json(&d.slice.out.join("decompose-details.json"), &details)?;
    manifest.outputs.push("decompose-details.json".into());
    let results = vec![
        CheckResult::at_most("reconstruction", res.report.reconstruction, 1e-10),
        CheckResult::at_most("gamma_trace", res.report.gamma_trace, 1e-10),
        CheckResult::at_most("gamma_divergence", res.report.gamma_divergence, 1e-10),
        CheckResult::at_most("idempotence", idem, 1e-10),
    ];
    finish(&d.slice.out, "decompose", &Report::new("decompose", s.slice.id(), results), manifest, start)
}

fn moncrief(d: &DataArgs, mut manifest: RunManifest, start: Instant) -> Result<bool> {
    let s = setup(&d.slice)?;
    let lattice = lattice_for(&s.slice, d.nmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let pair = random_pair(&s.slice, lattice, d.kmax, d.amplitude, d.decay, &mut rng)?;
    let split = moncrief_project(&pair)?;
    prepare(&d.slice.out)?;
    let params: BTreeMap<String, Value> = match serde_json::to_value(d)? {
        Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    for (file, p) in [("gauge.lwf", &split.gauge), ("gamma.lwf", &split.gamma)] {
        write_pair(&d.slice.out.join(file), p, params.clone(), &s.slice.id())?;
        manifest.outputs.extend([file.to_string(), format!("{file}.json")]);
    }
    let results = vec![
        CheckResult::at_most("reconstruction", split.report.reconstruction, 1e-10),
        CheckResult::at_most("adjoint_residual", split.report.adjoint_residual, 1e-10),
        CheckResult::at_most("orthogonality", split.report.orthogonality.abs(), 1e-10),
    ];
    finish(&d.slice.out, "moncrief", &Report::new("moncrief", s.slice.id(), results), manifest, start)
}

fn gauge_data(d: &DataArgs, mut manifest: RunManifest, start: Instant) -> Result<bool> {
    let s = setup(&d.slice)?;
    let lattice = lattice_for(&s.slice, d.nmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let lapse = random_field(&s.slice, lattice, Rank::Scalar, d, &mut rng);
    let shift = random_field(&s.slice, lattice, Rank::OneForm, d, &mut rng);
    let pair = gauge_producing_data(&lapse, &shift, &s.slice)?;
    let res = dphi(&pair)?;
    let scale = field_norm(&s.slice, &pair.h, 0.0)?.max(field_norm(&s.slice, &pair.m, 0.0)?).max(1.0);
    prepare(&d.slice.out)?;
    let params: BTreeMap<String, Value> = match serde_json::to_value(d)? {
        Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    write_pair(&d.slice.out.join("gauge-data.lwf"), &pair, params, &s.slice.id())?;
    manifest.outputs.extend(["gauge-data.lwf".to_string(), "gauge-data.lwf.json".to_string()]);
    let results = vec![CheckResult::at_most("dphi", res.l2_max() / scale, 1e-10)];
    finish(&d.slice.out, "gauge-data", &Report::new("gauge-data", s.slice.id(), results), manifest, start)
}

fn evolve_run(a: &EvolveArgs, start: Instant) -> Result<bool> {
    let cfg = load_config(&a.config)?;
    let base = a.config.parent();
    let out = a.out.clone().unwrap_or_else(|| cfg.resolve(&cfg.output.dir, base));
    let mut manifest = RunManifest::new("evolve", serde_json::to_value(&cfg)?);
    let bg = cfg.spacetime()?;
    let pair = cfg.initial_data(base)?;
    let jet = build_cauchy_jet(&pair, &bg, cfg.t0())?;
    let mut opts = cfg.evolve_options();
    opts.samples.extend(&cfg.output.snapshots);
    let t = Instant::now();
    let ev = evolve(&jet, &opts)?;
    manifest.timings.insert("evolve_seconds".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let series = diagnostics(&ev, None, cfg.evolve.sobolev, cfg.evolve.j)?;
    manifest.timings.insert("diagnostics_seconds".into(), t.elapsed().as_secs_f64());
    prepare(&out)?;
    std::fs::write(out.join("diagnostics.csv"), diagnostics_csv(&series))?;
    manifest.outputs.push("diagnostics.csv".into());
    for (i, &time) in cfg.output.snapshots.iter().enumerate() {
        let file = format!("snapshot_{i:03}.lwf");
        let mut params = BTreeMap::new();
        params.insert("t".to_string(), Value::from(time));
        params.insert("seed".to_string(), Value::from(cfg.data.seed));
        write_pair(&out.join(&file), &extract_induced_data(&ev, time)?, params, &bg.id())?;
        manifest.outputs.extend([file.clone(), format!("{file}.json")]);
    }
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
    let results = vec![
        CheckResult::at_most("gauge_res", max(&series.gauge), cfg.tolerances.gauge),
        CheckResult::at_most("dphi1_res", max(&series.dphi1), cfg.tolerances.constraints),
        CheckResult::at_most("dphi2_res", max(&series.dphi2), cfg.tolerances.constraints),
    ];
    finish(&out, "evolve", &Report::new("evolve", bg.id(), results), manifest, start)
}

fn check(a: &CheckArgs, manifest: RunManifest, start: Instant) -> Result<bool> {
    let d = &a.data;
    let s = setup(&d.slice)?;
    let lattice = lattice_for(&s.slice, d.nmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let mut results = Vec::new();
    let suite = match a.suite {
        Suite::Identities => {
            let bg = spacetime(&s)?;
            let lattice = lattice.expect("spacetime slices are tori");
            for i in 0..a.samples {
                let jet = CauchyJet::random(bg, s.t, lattice, d.kmax, d.amplitude, d.decay, &mut rng)?;
                let r = normal_identities(&jet, &Closure::Lichnerowicz)?;
                results.push(CheckResult::at_most(format!("jet_{i}"), r.relative(), 1e-10));
            }
            "identities"
        }
        Suite::Oracle => {
            for i in 0..a.samples {
                let pair = random_pair(&s.slice, lattice, d.kmax, d.amplitude, d.decay, &mut rng)?;
                let c = dphi_oracle(&pair)?;
                results.push(CheckResult::at_most(format!("pair_{i}"), c.max_relative_deviation, 1e-6));
            }
            "oracle"
        }
        Suite::Kernels => {
            let n = s.slice.dim();
            let expected = if lattice.is_some() { n + 1 } else { 2 };
            for (label, params) in [("position", SplitOperatorParams::position(n)), ("momentum", SplitOperatorParams::momentum(n))] {
                let k = kernel_basis(params, &s.slice, lattice)?;
                results.push(CheckResult::at_most(format!("{label}_dim"), k.dim.abs_diff(expected) as f64, 0.0));
                results.push(CheckResult::at_most(format!("{label}_adjoint_dim"), k.adjoint_dim.abs_diff(k.dim) as f64, 0.0));
            }
            "kernels"
        }
        Suite::Decomposition => {
            for i in 0..a.samples {
                let source = random_field(&s.slice, lattice, Rank::Sym2, d, &mut rng);
                for part in [SplitPart::Position, SplitPart::Momentum] {
                    let r = split_solve(&source, part, &s.slice)?;
                    let tag = format!("{part:?}_{i}").to_lowercase();
                    results.push(CheckResult::at_most(format!("{tag}_reconstruction"), r.report.reconstruction, 1e-10));
                    let gamma = r.report.gamma_trace.max(r.report.gamma_divergence);
                    results.push(CheckResult::at_most(format!("{tag}_gamma"), gamma, 1e-10));
                }
            }
            "decomposition"
        }
        Suite::Moncrief => {
            for i in 0..a.samples {
                let pair = random_pair(&s.slice, lattice, d.kmax, d.amplitude, d.decay, &mut rng)?;
                let r = moncrief_project(&pair)?.report;
                results.push(CheckResult::at_most(format!("pair_{i}_adjoint"), r.adjoint_residual, 1e-10));
                results.push(CheckResult::at_most(format!("pair_{i}_orthogonality"), r.orthogonality.abs(), 1e-10));
            }
            "moncrief"
        }
        Suite::Propagation => {
            let bg = spacetime(&s)?;
            let lattice = lattice.expect("spacetime slices are tori");
            let pair = generate_pair("random", &s.slice, lattice, d.seed, d.kmax, d.amplitude, d.decay)?;
            let jet = build_cauchy_jet(&pair, bg, s.t)?;
            let (opts, tol) = if bg.is_flat() {
                (EvolveOptions { t_end: s.t + 10.0, stepping: Stepping::Exact, samples: (1..10).map(|i| s.t + i as f64).collect() }, 1e-12)
            } else {
                (EvolveOptions { t_end: s.t + 1.0, stepping: Stepping::Fixed(1e-3), samples: (1..4).map(|i| s.t + 0.25 * i as f64).collect() }, 1e-8)
            };
            let series = diagnostics(&evolve(&jet, &opts)?, None, 0.0, 0)?;
            let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
            results.push(CheckResult::at_most("gauge_res", max(&series.gauge), tol));
            results.push(CheckResult::at_most("dphi1_res", max(&series.dphi1), tol));
            results.push(CheckResult::at_most("dphi2_res", max(&series.dphi2), tol));
            "propagation"
        }
    };
    prepare(&d.slice.out)?;
    let name = format!("check-{suite}");
    finish(&d.slice.out, &name, &Report::new(suite, s.slice.id(), results), manifest, start)
}

fn spectrum(a: &SpectrumArgs, mut manifest: RunManifest, start: Instant) -> Result<bool> {
    let mut truncations = a.truncations.clone();
    truncations.sort_unstable();
    truncations.dedup();
    if truncations.len() < 3 || truncations[0] == 0 {
        return Err(Error::InvalidParameter("--truncations needs at least three distinct positive values".into()));
    }
    let nmax = *truncations.last().expect("non-empty");
    let lattice = ModeLattice::new(3, nmax)?;
    let field = match a.generator {
        Generator::DiracDerivative => distributional_coefficients(lattice, a.order, 2, Rank::Sym2, &[sym_index(3, 0, 1)])?,
    };
    let mut csv = String::from("sobolev,truncation,norm_sq\n");
    let mut results = Vec::new();
    let threshold = -(a.order as f64) - 0.5;
    println!("{:>10} {:>10} {:>24} {:>24}", "sobolev", "nmax", "norm_sq", "increment");
    for &s in &a.sobolev {
        let sums = sobolev_partial_sums(&field, s, &truncations);
        let mut prev: Option<f64> = None;
        for (t, v) in &sums {
            csv.push_str(&format!("{s:.16e},{t},{v:.16e}\n"));
            let inc = prev.map_or(String::from("-"), |p| format!("{:.16e}", v - p));
            println!("{s:>10} {t:>10} {v:>24.16e} {inc:>24}");
            prev = Some(*v);
        }
        let k = sums.len();
        let (d1, d2) = (sums[k - 2].1 - sums[k - 3].1, sums[k - 1].1 - sums[k - 2].1);
        let (t1, t2) = (sums[k - 2].0 as f64, sums[k - 1].0 as f64);
        // increments scale like T^rate for geometric truncations
        let rate = (d2 / d1).ln() / (t2 / t1).ln();
        let check = if s < threshold {
            CheckResult::at_most(format!("H^{s} convergent"), rate, 0.0)
        } else {
            CheckResult::at_least(format!("H^{s} divergent"), rate, 0.0)
        };
        println!("{:>10} {}", "", if rate < 0.0 { "increments shrink: Cauchy" } else { "increments grow: unbounded" });
        results.push(check);
    }
    prepare(&a.out)?;
    std::fs::write(a.out.join("spectrum.csv"), csv)?;
    manifest.outputs.push("spectrum.csv".into());
    let report = Report::new("spectrum", format!("flat-torus-3 dirac-derivative order {}", a.order), results);
    let file = "spectrum.json";
    write_json(&a.out.join(file), &report)?;
    manifest.outputs.push(file.into());
    for r in &report.results {
        manifest.checks.insert(r.name.clone(), r.pass);
    }
    manifest.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());
    write_json(&a.out.join("manifest.json"), &manifest)?;
    Ok(report.pass)
}
