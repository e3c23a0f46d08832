use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use linwave::constraints::{dphi, project_to_constraints, random_pair, InitialDataPair};
use linwave::evolution::{build_cauchy_jet, evolve, EvolveOptions, Evolution, Stepping};
use linwave::geometry::{field_norm, SliceField, SliceGeometry, SpacetimeBackground, KASNER_DEFAULT};
use linwave::io::{decode_record, encode_record, RunConfig};
use linwave::spectral::{analyze, sobolev_norm_sq, synthesize, ModeLattice, Rank, SpectralField};

fn rank_of(i: u8) -> Rank {
    [Rank::Scalar, Rank::OneForm, Rank::Sym2][i as usize % 3]
}

fn pair(slice: &SliceGeometry, nmax: usize, seed: u64) -> InitialDataPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pair(slice, Some(ModeLattice::new(slice.dim(), nmax).unwrap()), nmax, 1.0, 2.0, &mut rng).unwrap()
}

fn states(ev: &Evolution, t: f64) -> Vec<Vec<C64>> {
    ev.state_at(t).unwrap().into_iter().flat_map(|(_, h, r)| [h, r]).collect()
}

fn max_diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn records_round_trip(seed in any::<u64>(), n in 2usize..=3, nmax in 0usize..=4, r in 0u8..3, decay in -1.0f64..3.0) {
        let lattice = ModeLattice::new(n, nmax).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = SpectralField::random(lattice, rank_of(r), nmax, 1.0, decay, &mut rng);
        let bytes = encode_record(&SliceField::Torus(field.clone()));
        let (record, used) = decode_record(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(record.into_spectral().unwrap(), field.densify());
    }

    #[test]
    fn grid_transforms_invert(seed in any::<u64>(), nmax in 1usize..=4, extra in 1usize..=4) {
        let lattice = ModeLattice::new(2, nmax).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = SpectralField::random(lattice, Rank::Sym2, nmax, 1.0, 0.0, &mut rng);
        let grid = synthesize(&field, 2 * nmax + extra).unwrap();
        let back = analyze(&grid, lattice).unwrap();
        prop_assert!(back.sub(&field).unwrap().max_abs() <= 1e-13);
    }

    #[test]
    fn sobolev_norms_increase_with_order(seed in any::<u64>(), s in -3.0f64..3.0, ds in 0.0f64..2.0) {
        let lattice = ModeLattice::new(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = SpectralField::random(lattice, Rank::Sym2, 3, 1.0, 1.0, &mut rng);
        prop_assert!(sobolev_norm_sq(&field, s, None) <= sobolev_norm_sq(&field, s + ds, None) * (1.0 + 1e-14));
        prop_assert!(sobolev_norm_sq(&field, s, Some(1)) <= sobolev_norm_sq(&field, s, None) * (1.0 + 1e-14));
    }

    #[test]
    fn projection_lands_on_the_constraint_set(seed in any::<u64>(), t0 in 0.5f64..3.0) {
        let slice = SliceGeometry::kasner(KASNER_DEFAULT, t0).unwrap();
        let p = project_to_constraints(&pair(&slice, 3, seed)).unwrap();
        let size = field_norm(&slice, &p.h, 0.0).unwrap().max(1.0);
        prop_assert!(dphi(&p).unwrap().l2_max() <= 1e-11 * size);
        let again = project_to_constraints(&p).unwrap();
        prop_assert!(again.combine(1.0, &p, -1.0).unwrap().max_abs() <= 1e-12 * size);
    }

    #[test]
    fn linearised_constraints_are_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let slice = SliceGeometry::kasner(KASNER_DEFAULT, 1.3).unwrap();
        let x = pair(&slice, 3, seed);
        let y = pair(&slice, 3, seed.wrapping_add(1));
        let lhs = dphi(&x.combine(a, &y, b).unwrap()).unwrap();
        let (dx, dy) = (dphi(&x).unwrap(), dphi(&y).unwrap());
        let rhs = dx.scalar.combine(a, &dy.scalar, b).unwrap();
        prop_assert!(lhs.scalar.sub(&rhs).unwrap().max_abs() <= 1e-10);
        let rhs = dx.one_form.combine(a, &dy.one_form, b).unwrap();
        prop_assert!(lhs.one_form.sub(&rhs).unwrap().max_abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn evolution_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0, kasner in any::<bool>()) {
        let (bg, t0, stepping) = if kasner {
            (SpacetimeBackground::kasner(KASNER_DEFAULT).unwrap(), 1.0, Stepping::Fixed(0.05))
        } else {
            (SpacetimeBackground::minkowski(3).unwrap(), 0.0, Stepping::Exact)
        };
        let slice = bg.slice(t0).unwrap();
        let x = pair(&slice, 2, seed);
        let y = pair(&slice, 2, seed.wrapping_add(7));
        let opts = EvolveOptions { t_end: t0 + 1.0, stepping, samples: vec![t0 + 0.5] };
        let run = |p: &InitialDataPair| evolve(&build_cauchy_jet(p, &bg, t0).unwrap(), &opts).unwrap();
        let (ex, ey, exy) = (run(&x), run(&y), run(&x.combine(a, &y, b).unwrap()));
        for t in [t0 + 0.5, t0 + 1.0] {
            let sx = states(&ex, t);
            let sy = states(&ey, t);
            let combined: Vec<Vec<C64>> = sx
                .iter()
                .zip(&sy)
                .map(|(u, v)| u.iter().zip(v).map(|(p, q)| p * a + q * b).collect())
                .collect();
            prop_assert!(max_diff(&states(&exy, t), &combined) <= 1e-11);
        }
    }

    #[test]
    fn minkowski_flow_composes(seed in any::<u64>(), t1 in 0.1f64..3.0, t2 in 0.1f64..3.0) {
        let bg = SpacetimeBackground::minkowski(3).unwrap();
        let x = pair(&bg.slice(0.0).unwrap(), 2, seed);
        let direct = evolve(&build_cauchy_jet(&x, &bg, 0.0).unwrap(), &EvolveOptions { t_end: t1 + t2, stepping: Stepping::Exact, samples: vec![] }).unwrap();
        let first = evolve(&build_cauchy_jet(&x, &bg, 0.0).unwrap(), &EvolveOptions { t_end: t1, stepping: Stepping::Exact, samples: vec![] }).unwrap();
        let second = evolve(&first.jet_at(t1).unwrap(), &EvolveOptions { t_end: t1 + t2, stepping: Stepping::Exact, samples: vec![] }).unwrap();
        prop_assert!(max_diff(&states(&direct, t1 + t2), &states(&second, t1 + t2)) <= 1e-11);
    }

    #[test]
    fn configs_round_trip(nmax in 1usize..16, seed in any::<u64>(), t1 in 0.1f64..10.0, dt in proptest::option::of(1e-4f64..0.1), j in 0usize..4) {
        let text = format!(
            "background.kind = \"minkowski-torus\"\nlattice.nmax = {nmax}\ndata.generator = \"random\"\ndata.seed = {}\nevolve.t1 = {t1:?}\nevolve.j = {j}\n{}",
            seed >> 1,
            dt.map_or(String::new(), |d| format!("evolve.dt = {d:?}\n"))
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        cfg.validate(None).unwrap();
        prop_assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}
