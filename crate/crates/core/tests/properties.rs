use certrand::boolfn::{classify_scaled, fwht_i32, p_set, wht, BooleanFunction, HeavinessClass};
use certrand::entropy::{min_entropy, perturb_make_light, rejsamp, OutcomeDistribution, RejSampSeed};
use certrand::fouriersample::tv_distance;
use certrand::llqsv::{sample_u_d, weight_offset};
use certrand::protocol::{collision_verdict, toeplitz_extract, BitString, EntropyVerdict};
use certrand::rejection::exact_distribution;
use certrand::sqforrelation::{acceptance, phi, BooleanPair};
use certrand::StreamRng;
use proptest::prelude::*;

fn function(max_n: u32) -> impl Strategy<Value = BooleanFunction> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<u64>(), (1usize << n).div_ceil(64)).prop_map(move |mut words| {
            let len = 1usize << n;
            if len < 64 {
                words[0] &= (1u64 << len) - 1;
            }
            BooleanFunction::from_words(n, words).unwrap()
        })
    })
}

fn pair(max_n: u32) -> impl Strategy<Value = BooleanPair> {
    (1..=max_n, any::<u64>()).prop_map(|(n, seed)| BooleanPair::uniform(n, &mut StreamRng::new(seed, 0)).unwrap())
}

fn distribution(domain: usize) -> impl Strategy<Value = OutcomeDistribution> {
    proptest::collection::vec(0.0f64..1.0, domain).prop_filter_map("needs mass", |v| {
        let total: f64 = v.iter().sum();
        (total > 0.0).then(|| OutcomeDistribution::from_dense(v.iter().map(|p| p / total).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parseval_holds_exactly(f in function(10)) {
        let spec = wht(&f);
        prop_assert_eq!(spec.scaled_energy(), (f.len() * f.len()) as u64);
    }

    #[test]
    fn double_transform_is_n_times_identity(f in function(10)) {
        let mut data = wht(&f).scaled_coeffs().to_vec();
        fwht_i32(&mut data);
        let len = f.len() as i32;
        for (x, v) in data.iter().enumerate() {
            prop_assert_eq!(*v, len * f.value(x) as i32);
        }
    }

    #[test]
    fn inverse_recovers_function(f in function(9)) {
        prop_assert_eq!(wht(&f).inverse().unwrap(), f);
    }

    #[test]
    fn negation_preserves_probabilities(f in function(8)) {
        prop_assert_eq!(wht(&f).probs(), wht(&f.negated()).probs());
    }

    #[test]
    fn character_product_shifts_spectrum(f in function(8), s in any::<usize>()) {
        let s = s % f.len();
        let spec = wht(&f);
        let shifted = wht(&f.times_character(s).unwrap());
        for z in 0..f.len() {
            prop_assert_eq!(shifted.scaled(z), spec.scaled(z ^ s));
        }
    }

    #[test]
    fn p_set_size_matches_coefficient(f in function(8), z in any::<usize>()) {
        let z = z % f.len();
        let k = wht(&f).scaled(z);
        let set = p_set(&f, z, Some(1)).unwrap();
        prop_assert_eq!(set.len() as i64, (f.len() as i64 + k.abs() as i64) / 2);
        prop_assert!(set.len() >= f.len() / 2);
    }

    #[test]
    fn bfn1_round_trip(f in function(12)) {
        prop_assert_eq!(BooleanFunction::from_bytes(&f.to_bytes()).unwrap(), f);
    }

    #[test]
    fn heaviness_classes_are_nested(k in -4096i32..=4096) {
        let class = classify_scaled(k, 1 << 12);
        let sq = (k as i64) * (k as i64);
        let expected = if sq <= 4096 {
            HeavinessClass::Light
        } else if sq <= 4 * 4096 {
            HeavinessClass::SlightlyHeavy
        } else {
            HeavinessClass::VeryHeavy
        };
        prop_assert_eq!(class, expected);
    }

    #[test]
    fn phi_is_odd_in_g(p in pair(9)) {
        let flipped = BooleanPair::new(p.f.clone(), p.g.negated()).unwrap();
        prop_assert_eq!(phi(&p).unwrap() + phi(&flipped).unwrap(), 0.0);
        let a = acceptance(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn rejection_law_normalised(g in function(10)) {
        let total: f64 = exact_distribution(&g).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_is_exact(seed in any::<u64>()) {
        let mut rng = StreamRng::new(seed, 0);
        let n = 6;
        let f = certrand::boolfn::random_function(n, &mut rng).unwrap();
        let spec = wht(&f);
        let z = spec.argmax();
        let g = perturb_make_light(&f, z, &mut rng).unwrap();
        let k = spec.scaled(z);
        prop_assert_eq!(wht(&g).scaled(z), k - k.signum() * 8);
        prop_assert!(tv_distance(&spec, &wht(&g)).unwrap() <= 1.0);
    }

    #[test]
    fn toeplitz_is_linear(seed in any::<u64>(), m in 1usize..300, k in 1usize..64) {
        let k = k.min(m);
        let mut rng = StreamRng::new(seed, 0);
        let a = BitString::random(m, &mut rng);
        let b = BitString::random(m, &mut rng);
        let s = BitString::random(m + k - 1, &mut rng);
        let lhs = toeplitz_extract(&a.xor(&b).unwrap(), &s, k).unwrap();
        let rhs = toeplitz_extract(&a, &s, k).unwrap().xor(&toeplitz_extract(&b, &s, k).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn verdict_regions_never_overlap(v in 0u64..20_000, eps in 0.001f64..0.999) {
        let verdict = collision_verdict(v, 64 * 4096, 64, eps);
        let mu = 4096.0;
        let low = (1.0 + eps * eps).min(1.0 + eps / 4.0) * mu;
        let high = (1.0 + eps * eps).max(1.0 + eps / 4.0) * mu;
        match verdict {
            EntropyVerdict::UniformLike => prop_assert!((v as f64) < low),
            EntropyVerdict::QuantumLike => prop_assert!((v as f64) > high),
            EntropyVerdict::Inconclusive => prop_assert!((v as f64) >= low && (v as f64) <= high),
        }
    }

    #[test]
    fn u_d_weights_exact(seed in any::<u64>(), half in 1usize..64, d in 0usize..64) {
        let d = d.min(half);
        let s = sample_u_d(2 * half, d, &mut StreamRng::new(seed, 0)).unwrap();
        prop_assert!(s.weight() == half + d || s.weight() == half - d);
    }

    #[test]
    fn weight_offset_halves_coefficient(f in function(9), s in any::<usize>()) {
        let s = s % f.len();
        prop_assert_eq!(2 * weight_offset(&f, s).unwrap(), wht(&f).scaled(s) as i64);
    }

    #[test]
    fn min_entropy_relabel_invariant(d in distribution(12), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..12).collect();
        StreamRng::new(seed, 0).choose_distinct(&mut perm, 12);
        prop_assert_eq!(min_entropy(&d).unwrap(), min_entropy(&d.relabel(&perm)).unwrap());
    }

    #[test]
    fn rejsamp_deterministic_and_in_support(d in distribution(8), r in any::<u64>()) {
        let z = rejsamp(&d, RejSampSeed(r));
        prop_assert_eq!(z, rejsamp(&d, RejSampSeed(r)));
        prop_assert!(d.prob(z) > 0.0);
    }
}
