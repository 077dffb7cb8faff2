//! Property checks on random instances. Instances come from a proptest-chosen seed
//! fed to the crate's own samplers, so every case is a valid input.

use chi2mech::adversary::{design_adversarial_mechanism, invert_binary_channel};
use chi2mech::cli::format::number;
use chi2mech::designer::{build_w, derive_px, design_mechanism};
use chi2mech::oracle::evaluate_kernel;
use chi2mech::probcore::{chi2_divergence, chi2_information, kl_divergence, mutual_information};
use chi2mech::provider::{build_w1_w2, design_provider_mechanism, ProviderScenario};
use chi2mech::sampling::{
    random_binary_channel, random_channel, random_distribution, random_instance, random_leakage,
};
use chi2mech::{Budget, ChannelMatrix, ProbVector};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Designs at a quarter of the post-hoc bound, which is always feasible.
fn designed(leakage: &ChannelMatrix, py: &ProbVector) -> (chi2mech::Mechanism, chi2mech::designer::DesignReport) {
    let (_, probe) = design_mechanism(leakage, py, 1e-6).unwrap();
    design_mechanism(leakage, py, probe.eps_bound_posthoc / 4.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kl_is_between_zero_and_chi2(seed: u64, k in 2usize..8) {
        let mut r = rng(seed);
        let p = random_distribution(&mut r, k);
        let q = random_distribution(&mut r, k);
        let kl = kl_divergence(&p, &q).unwrap();
        let chi2 = chi2_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!(kl <= chi2 * (1.0 + 1e-12), "kl {} > chi2 {}", kl, chi2);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn mutual_information_is_average_kl(seed: u64, k in 2usize..6) {
        let (leakage, py) = random_instance(&mut rng(seed), k);
        let (m, _) = designed(&leakage, &py);
        let mi = mutual_information(&m.output_joint().unwrap());
        let avg: f64 = m
            .output_conditionals()
            .iter()
            .zip(m.pu().as_slice())
            .map(|(c, &w)| w * kl_divergence(c, &py).unwrap())
            .sum();
        prop_assert!((mi - avg).abs() <= 1e-12, "{} vs {}", mi, avg);
    }

    #[test]
    fn chi2_information_ignores_labels(seed: u64, k in 2usize..6, n_u in 2usize..5) {
        let mut r = rng(seed);
        let prior = random_distribution(&mut r, k);
        let pu = random_distribution(&mut r, n_u);
        let posts: Vec<ProbVector> = (0..n_u).map(|_| random_distribution(&mut r, k)).collect();
        let a = chi2_information(&posts, &pu, &prior).unwrap();
        let mut rev_posts = posts.clone();
        rev_posts.reverse();
        let mut rev_pu = pu.as_slice().to_vec();
        rev_pu.reverse();
        let b = chi2_information(&rev_posts, &ProbVector::new(rev_pu).unwrap(), &prior).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn post_processing_cannot_increase_chi2_information(seed: u64, k in 2usize..5, n_u in 2usize..5, n_v in 2usize..5) {
        // X - U - U': draw P_{X|U}, P_U and P_{U'|U}, then push through.
        let mut r = rng(seed);
        let pu = random_distribution(&mut r, n_u);
        let posts: Vec<ProbVector> = (0..n_u).map(|_| random_distribution(&mut r, k)).collect();
        let prior = ProbVector::new(
            (0..k).map(|x| posts.iter().zip(pu.as_slice()).map(|(p, &w)| w * p[x]).sum()).collect(),
        ).unwrap();
        let ch = random_channel(&mut r, n_v, n_u);
        let pv = ch.apply(&pu).unwrap();
        let posts_v: Vec<ProbVector> = (0..n_v)
            .map(|v| {
                let joint: Vec<f64> = (0..k)
                    .map(|x| (0..n_u).map(|u| ch.matrix()[(v, u)] * pu[u] * posts[u][x]).sum())
                    .collect();
                ProbVector::new(joint.iter().map(|j| j / pv[v]).collect()).unwrap()
            })
            .collect();
        let before = chi2_information(&posts, &pu, &prior).unwrap();
        let after = chi2_information(&posts_v, &pv, &prior).unwrap();
        prop_assert!(after <= before + 1e-12, "{} > {}", after, before);
    }

    #[test]
    fn w_has_unit_singular_value_at_prior_root(seed: u64, k in 2usize..7) {
        let (leakage, py) = random_instance(&mut rng(seed), k);
        let w = build_w(&leakage, &py).unwrap();
        let px = derive_px(&leakage, &py).unwrap();
        let root = px.sqrt();
        prop_assert!((w.matrix() * &root - py.sqrt()).amax() <= 1e-9);
        prop_assert!((w.sigma_min() - 1.0).abs() <= 1e-7);
        prop_assert!(w.singular_values().iter().all(|&s| s >= 1.0 - 1e-9));
    }

    #[test]
    fn designs_saturate_the_budget(seed: u64, k in 2usize..6, half in any::<bool>()) {
        let (leakage, py) = random_instance(&mut rng(seed), k);
        let (_, probe) = design_mechanism(&leakage, &py, 1e-6).unwrap();
        let budget = if half { Budget::HalfEps2 } else { Budget::Eps2 };
        let eps = probe.eps_bound_posthoc / 4.0;
        let options = chi2mech::designer::DesignOptions { budget, ..Default::default() };
        let (m, r) = chi2mech::designer::design_mechanism_with(&leakage, &py, eps, &options).unwrap();
        for c in m.chi2_per_letter(&r.px).unwrap() {
            prop_assert!((c - budget.bound(eps)).abs() <= 1e-12);
        }
        prop_assert!(r.exact_utility_nats >= 0.0);
        prop_assert!(r.leakage_mi_nats <= 0.5 * budget.bound(eps) * 1.1);
    }

    #[test]
    fn relabelling_u_keeps_utility(seed: u64, k in 2usize..6) {
        let (leakage, py) = random_instance(&mut rng(seed), k);
        let (m, r) = designed(&leakage, &py);
        let kern = m.kernel().matrix();
        let swapped = DMatrix::from_fn(2, k, |u, y| kern[(1 - u, y)]);
        let swapped = ChannelMatrix::new(swapped).unwrap();
        let u = evaluate_kernel(&leakage, &py, &swapped, r.epsilon).unwrap().expect("still feasible");
        prop_assert!((u - r.exact_utility_nats).abs() <= 1e-12);
    }

    #[test]
    fn adversary_invariants(seed: u64, k in 2usize..5) {
        let mut r = rng(seed);
        let ch = invert_binary_channel(&random_binary_channel(&mut r)).unwrap();
        let inv = ch.inverse;
        prop_assert!(ch.gain() >= 1.0 - 1e-12);
        prop_assert!(4.0 * (inv.c - 0.5) * (0.5 - inv.a) >= -inv.a * inv.c - 1e-12);
        let (leakage, py) = random_instance(&mut r, k);
        let (_, probe) = design_mechanism(&leakage, &py, 1e-6).unwrap();
        let eps = probe.eps_bound_posthoc / (4.0 * (inv.a - inv.b).abs().max((inv.c - inv.d).abs()));
        let (_, rep) = design_adversarial_mechanism(&leakage, &py, &ch, eps, Budget::HalfEps2).unwrap();
        prop_assert!(rep.pu_prime.as_slice().iter().all(|p| (p - 0.5).abs() <= 1e-10));
        prop_assert!(rep.chi2_information_u_prime <= rep.chi2_information_u + 1e-15);
        prop_assert!(rep.approx_utility_nats >= rep.boundary_utility_nats * (1.0 - 1e-12));
        rep.validate().unwrap();
    }

    #[test]
    fn provider_spectral_inequality(seed: u64, k in 2usize..6) {
        let mut r = rng(seed);
        let s = ProviderScenario::new(
            random_leakage(&mut r, k),
            random_leakage(&mut r, k),
            random_distribution(&mut r, k),
        ).unwrap();
        let mats = build_w1_w2(&s).unwrap();
        let bound = mats.spectral_product().expect("square P_{Y|X}");
        prop_assert!(mats.product.sigma_max() >= bound * (1.0 - 1e-9), "{} < {}", mats.product.sigma_max(), bound);
        let (_, probe) = design_provider_mechanism(&s, 1e-6, Budget::Eps2).unwrap();
        let (_, rep) = design_provider_mechanism(&s, probe.eps_bound_posthoc / 4.0, Budget::Eps2).unwrap();
        prop_assert!(rep.chosen_direction.l().dot(&s.pz().sqrt()).abs() <= 1e-8);
        let sv = &rep.product_singular_values;
        let want = if sv[0] > 1.0 + 1e-7 { sv[0] } else { sv[1] };
        prop_assert!((rep.sigma_selected - want).abs() <= 1e-9 * sv[0], "{} vs {:?}", rep.sigma_selected, sv);
        rep.validate().unwrap();
    }

    #[test]
    fn csv_numbers_keep_twelve_digits(x in -1e6f64..1e6) {
        let s = number(x);
        prop_assert!(!s.contains('e'));
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs().max(1e-300), "{} -> {}", x, s);
    }
}
