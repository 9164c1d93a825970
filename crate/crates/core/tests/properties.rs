use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wigner_core::correspondence::{from_marked_origin, k_statistic, sample_trajectory, to_marked_origin};
use wigner_core::dyck_stats::dyck_decompose;
use wigner_core::ensembles::{sample_deformed, sample_normalized_wigner, EnsembleConfig, LawKind, SymmetryClass};
use wigner_core::path_model::{edge, trajectory_of, ClosedPath};
use wigner_core::spectral::{eigenvalues, interlacing_check, trace_power, trace_power_direct};
use wigner_core::stats::{gaussian_cdf, ks_one_sample, ks_two_sample, KsMode};

fn law() -> impl Strategy<Value = LawKind> {
    prop::sample::select(LawKind::ALL.to_vec())
}

fn symmetry() -> impl Strategy<Value = SymmetryClass> {
    prop::sample::select(vec![SymmetryClass::ComplexHermitian, SymmetryClass::RealSymmetric])
}

/// Closed walk on `1..=n` from its first vertex.
fn closed_path(max_len: usize, n: u32) -> impl Strategy<Value = ClosedPath> {
    (1..=max_len).prop_flat_map(move |len| {
        prop::collection::vec(1..=n, len).prop_map(move |mut v| {
            v.push(v[0]);
            ClosedPath::new(v, n).unwrap()
        })
    })
}

fn has_odd_edge(p: &ClosedPath) -> bool {
    let mut counts = std::collections::BTreeMap::new();
    for j in 1..=p.len() {
        *counts.entry(p.edge_at(j)).or_insert(0u32) += 1;
    }
    counts.values().any(|c| c % 2 == 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rotation_round_trips(p in closed_path(12, 6)) {
        let last_down = !trajectory_of(&p).last_step_up();
        prop_assume!(last_down && has_odd_edge(&p));
        let r = to_marked_origin(&p).unwrap();
        prop_assert!(trajectory_of(&r.image).last_step_up());
        prop_assert_eq!(trajectory_of(&r.image).class(), trajectory_of(&p).class());
        prop_assert_eq!(from_marked_origin(&r).unwrap(), p);
    }

    #[test]
    fn dyck_decomposition_round_trips(m in 0u64..40, l in 0u64..30, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sample_trajectory(m, l, &mut rng);
        prop_assert_eq!(x.end_level(), l as i64);
        prop_assert!(x.levels().iter().all(|&y| y >= 0));
        let d = dyck_decompose(&x);
        prop_assert_eq!(d.reconstruct(), x.clone());
        prop_assert_eq!(d.class_t().iter().sum::<u64>() as usize, x.m());
        prop_assert!(k_statistic(&x, x.len() / 2 + 1) >= 1);
    }

    #[test]
    fn ks_invariant_under_monotone_maps(
        a in prop::collection::vec(-5.0f64..5.0, 1..60),
        b in prop::collection::vec(-5.0f64..5.0, 1..60),
        scale in 0.1f64..4.0,
        shift in -3.0f64..3.0,
    ) {
        let g = |x: f64| scale * x + shift + (x / 3.0).tanh();
        let ga: Vec<f64> = a.iter().map(|&x| g(x)).collect();
        let gb: Vec<f64> = b.iter().map(|&x| g(x)).collect();
        prop_assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, ks_two_sample(&ga, &gb).unwrap().statistic);
        let d = ks_one_sample(&a, |x| gaussian_cdf(x, 0.0, 1.0), KsMode::OneSample).unwrap().statistic;
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectra_interlace_and_match_traces(
        n in 1usize..14,
        theta in 0.0f64..4.0,
        sigma in 0.3f64..2.0,
        sym in symmetry(),
        law in law(),
        seed: u64,
        idx in 0u64..1000,
    ) {
        let cfg = EnsembleConfig::new(n, sigma, theta, sym, law, seed).unwrap();
        let m = sample_deformed(&cfg, idx);
        prop_assert!(m.is_hermitian());
        let s = eigenvalues(&m).unwrap();
        let base = eigenvalues(&sample_normalized_wigner(&cfg, idx)).unwrap();
        prop_assert!(interlacing_check(&s, &base).unwrap().holds);
        prop_assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        let scale = s.values.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for l in 1..=6 {
            let direct = trace_power_direct(&m, l);
            prop_assert!((trace_power(&s, l) - direct).abs() <= 1e-9 * scale.powi(l as i32) * n as f64);
        }
    }

    #[test]
    fn spectrum_is_permutation_invariant(n in 2usize..12, seed: u64, rot in 0usize..12) {
        let cfg = EnsembleConfig::new(n, 1.0, 1.5, SymmetryClass::ComplexHermitian, LawKind::Gaussian, seed).unwrap();
        let m = sample_deformed(&cfg, 0);
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let a = eigenvalues(&m).unwrap();
        let b = eigenvalues(&m.permuted(&perm)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn edge_is_unordered() {
    assert_eq!(edge(3, 1), edge(1, 3));
}
