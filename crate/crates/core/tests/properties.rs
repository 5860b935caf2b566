use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sphere_descent::datagen::haar_orthogonal;
use sphere_descent::landscape::separable_projection_constant;
use sphere_descent::objectives::{
    h_mu, sep_projected_grad, DictionaryLearning, Separable, SmoothingParam, SphereObjective,
};
use sphere_descent::optimizer::{recovery_error, section_map};
use sphere_descent::phase_retrieval::{
    norm_sq, pr_decompose, pr_reconstruct, pr_region, pr_step, step_identity_check, PRSignal, PrRegion, C64,
};
use sphere_descent::sphere::{
    exp_map, in_c_zeta, point_on_zeta_boundary, sample_uniform_sphere, tangent_project, zeta, UnitVector,
};

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn complex_gaussian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * scale)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exp_map_stays_on_sphere(seed: u64, n in 2usize..40, len in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = sample_uniform_sphere(n, &mut rng);
        let v = tangent_project(&q, &gaussian(n, &mut rng));
        prop_assert!(q.coords().dot(v.dir()).abs() <= 1e-12 * v.norm().max(1.0));
        let step = if v.norm() > 0.0 { v.scaled(len / v.norm()) } else { v };
        prop_assert!((exp_map(&step).coords().norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn margin_is_invariant_under_signed_permutations(seed: u64, n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = sample_uniform_sphere(n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let moved = DVector::from_fn(n, |i, _| {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * q.coords()[perm[i]]
        });
        let moved = UnitVector::normalize(moved).unwrap();
        let (a, _) = section_map(&q);
        let (b, _) = section_map(&moved);
        prop_assert!((zeta(&a) - zeta(&b)).abs() <= 1e-9 * zeta(&a).abs().max(1.0));
    }

    #[test]
    fn margin_membership_agrees_with_margin(seed: u64, n in 2usize..20, z0 in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, _) = section_map(&sample_uniform_sphere(n, &mut rng));
        let z = zeta(&w);
        if (z - z0).abs() > 1e-9 {
            prop_assert_eq!(in_c_zeta(&w, z0), z >= z0);
        }
    }

    #[test]
    fn recovery_error_identity(seed: u64, n in 2usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0 = haar_orthogonal(n, &mut rng);
        let q = sample_uniform_sphere(n, &mut rng);
        let (_, err) = recovery_error(&q, &a0);
        let best = a0.tr_mul(q.coords()).amax();
        prop_assert!((err * err - (2.0 - 2.0 * best)).abs() <= 1e-12);
    }

    #[test]
    fn smoothed_absolute_value_bounds(t in -10.0f64..10.0, mu in 1e-3f64..0.06) {
        let m = SmoothingParam::new(mu).unwrap();
        let h = h_mu(t, m);
        prop_assert!(h <= t.abs() + 1e-15);
        prop_assert!(h >= t.abs() - mu * std::f64::consts::LN_2 - 1e-15);
    }

    #[test]
    fn separable_gradient_is_bounded(seed: u64, n in 2usize..50, mu in 1e-3f64..0.06) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obj = Separable::new(n, SmoothingParam::new(mu).unwrap());
        let q = sample_uniform_sphere(n, &mut rng);
        prop_assert!(obj.riemannian_gradient(&q).norm() <= (n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn separable_projection_has_linear_lower_bound(seed: u64, n in 3usize..30, z in 0.01f64..5.0, mu in 1e-3f64..0.05) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = SmoothingParam::new(mu).unwrap();
        let w = point_on_zeta_boundary(&gaussian(n - 1, &mut rng), z).unwrap();
        let i = w.argmax_abs().unwrap();
        if w.inf_norm() >= mu * (1.0 / mu).ln() {
            let proj = sep_projected_grad(&w, i, m).unwrap();
            prop_assert!(proj >= separable_projection_constant(mu) * w.inf_norm() * z - 1e-10);
        }
    }

    #[test]
    fn dictionary_gradient_is_bounded_by_mean_column_norm(seed: u64, n in 2usize..10, p in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let bound = y.column_iter().map(|c| c.norm()).sum::<f64>() / p as f64;
        let obj = DictionaryLearning::new(y, SmoothingParam::new(0.05).unwrap()).unwrap();
        let q = sample_uniform_sphere(n, &mut rng);
        prop_assert!(obj.riemannian_gradient(&q).norm() <= bound + 1e-12);
    }

    #[test]
    fn phase_retrieval_decomposition_roundtrip(seed: u64, n in 1usize..10, scale in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = PRSignal::random(n, &mut rng).unwrap();
        let z = complex_gaussian(n, scale, &mut rng);
        let back = pr_reconstruct(&pr_decompose(&z, &x), &x);
        let diff: Vec<C64> = z.iter().zip(&back).map(|(a, b)| a - b).collect();
        prop_assert!(norm_sq(&diff).sqrt() <= 1e-12 * norm_sq(&z).sqrt().max(1.0));
    }

    #[test]
    fn phase_retrieval_step_identities(seed: u64, n in 2usize..10, scale in 0.05f64..1.0, frac in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = PRSignal::random(n, &mut rng).unwrap();
        let z = complex_gaussian(n, scale, &mut rng);
        let eta = frac * (1.0f64 / 35.0).sqrt() / (4.0 * x.norm_sq());
        let (_, check) = step_identity_check(&z, &x, eta).unwrap();
        prop_assert!(check.zeta_rel <= 1e-10 && check.w_rel <= 1e-10);
    }

    #[test]
    fn phase_retrieval_regions_are_absorbing(seed: u64, n in 1usize..9, c in 0.001f64..0.2499, frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = PRSignal::random(n, &mut rng).unwrap();
        let xx = x.norm_sq();
        let r = rng.random::<f64>() * (1.0 + c) * xx;
        let w_sq = rng.random::<f64>() * r.min(0.5 * xx);
        let mut d = pr_decompose(&complex_gaussian(n, 1.0, &mut rng), &x);
        let len = norm_sq(&d.w).sqrt();
        if len > 0.0 {
            d.w.iter_mut().for_each(|v| *v *= w_sq.sqrt() / len);
        }
        d.zeta = (r - w_sq).sqrt();
        let z = pr_reconstruct(&d, &x);
        let eta = frac * c.sqrt() / (4.0 * xx);
        if eta > 0.0 {
            let before = pr_region(&z, &x, c).unwrap();
            let after = pr_region(&pr_step(&z, &x, eta).unwrap().z, &x, c).unwrap();
            match before {
                PrRegion::S1 => prop_assert!(matches!(after, PrRegion::S1 | PrRegion::S2)),
                PrRegion::Outside => {}
                _ => prop_assert!(matches!(after, PrRegion::S2 | PrRegion::S3 | PrRegion::S4)),
            }
        }
    }
}
