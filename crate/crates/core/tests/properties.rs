use proptest::prelude::*;
use quantscale::scale_space::{generate, verify_lyapunov_entropy};
use quantscale::{
    apply_path, entropy, inpaint, level_partition, mse, total_contrast, uniform_path, ward_path, Image,
    InpaintConfig, Mask, QuantisationPath, SparsificationPath,
};

fn image() -> impl Strategy<Value = Image> {
    (1usize..12, 1usize..12, prop::collection::vec(0u8..=255, 1..12)).prop_flat_map(|(w, h, palette)| {
        prop::collection::vec(prop::sample::select(palette), w * h)
            .prop_map(move |px| Image::new(w, h, px).unwrap())
    })
}

fn image_and_mask() -> impl Strategy<Value = (Image, Mask)> {
    image().prop_flat_map(|img| {
        let n = img.len();
        (Just(img), prop::collection::btree_set(0..n, 1..=n))
            .prop_map(move |(img, set)| (img, Mask::new(set.into_iter().collect(), n).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_is_bounded_by_log_of_levels(img in image()) {
        let p = level_partition(&img, None).unwrap();
        let h = entropy(&p);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (p.len() as f64).log2() + 1e-12);
    }

    #[test]
    fn partition_reassembles_the_image(img in image()) {
        let p = level_partition(&img, None).unwrap();
        let mut px = vec![None; img.len()];
        for (&v, set) in p.values().iter().zip(p.sets()) {
            for &i in set {
                prop_assert!(px[i].is_none());
                px[i] = Some(v);
            }
        }
        let px: Vec<u8> = px.into_iter().map(Option::unwrap).collect();
        prop_assert_eq!(px.as_slice(), img.pixels());
    }

    #[test]
    fn mse_zero_iff_equal(a in image(), seed in any::<u8>()) {
        prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let px: Vec<u8> = a.pixels().iter().map(|v| v.wrapping_add(seed)).collect();
        let b = Image::new(a.width(), a.height(), px).unwrap();
        prop_assert_eq!(mse(&a, &b).unwrap() == 0.0, a == b);
    }

    #[test]
    fn metrics_are_permutation_invariant(img in image()) {
        let mut px = img.pixels().to_vec();
        px.reverse();
        let flipped = Image::new(img.width(), img.height(), px).unwrap();
        prop_assert_eq!(entropy(&level_partition(&img, None).unwrap()), entropy(&level_partition(&flipped, None).unwrap()));
        prop_assert_eq!(total_contrast(&img, None).unwrap(), total_contrast(&flipped, None).unwrap());
    }

    #[test]
    fn ward_path_is_full_and_within_range(img in image()) {
        let p = level_partition(&img, None).unwrap();
        let path = ward_path(&p).unwrap();
        prop_assert_eq!(path.len(), p.len() - 1);
        let (lo, hi) = (p.values()[0], *p.values().last().unwrap());
        for step in path.steps() {
            prop_assert!(step.merged >= lo && step.merged <= hi);
            prop_assert!(step.merged == step.low || step.merged == step.high);
        }
        let last = apply_path(&img, None, &path, path.len()).unwrap();
        prop_assert_eq!(level_partition(&last, None).unwrap().len(), 1);
    }

    #[test]
    fn entropy_never_increases_along_ward(img in image()) {
        let path = ward_path(&level_partition(&img, None).unwrap()).unwrap();
        let seq = generate(&img, None, &path).unwrap();
        prop_assert!(verify_lyapunov_entropy(&seq, None).unwrap().passed());
    }

    #[test]
    fn quantisation_path_text_round_trips(img in image()) {
        let path = ward_path(&level_partition(&img, None).unwrap()).unwrap();
        prop_assert_eq!(QuantisationPath::from_text(&path.to_text()).unwrap(), path);
    }

    #[test]
    fn sparsification_path_text_round_trips(order in Just((0..40usize).collect::<Vec<_>>()).prop_shuffle()) {
        let path = SparsificationPath::new(order).unwrap();
        prop_assert_eq!(SparsificationPath::from_text(&path.to_text()).unwrap(), path);
    }

    #[test]
    fn uniform_path_is_image_independent_and_full(k in 1u32..=8) {
        let q = 1u32 << k;
        let path = uniform_path(q).unwrap();
        prop_assert_eq!(path.len() as u32, q - 1);
        prop_assert_eq!(path.initial_values().len() as u32, q);
    }

    #[test]
    fn inpainting_respects_known_data_and_bounds((img, mask) in image_and_mask()) {
        let u = inpaint(&img, &mask, &InpaintConfig::default()).unwrap();
        let known = img.values_at(Some(&mask));
        let lo = f64::from(*known.iter().min().unwrap());
        let hi = f64::from(*known.iter().max().unwrap());
        for &i in mask.indices() {
            prop_assert_eq!(u.values[i], f64::from(img.pixels()[i]));
        }
        for &v in &u.values {
            prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
        }
    }

    #[test]
    fn inpainting_is_linear((img, mask) in image_and_mask(), a in 0.0f64..1.0) {
        let cfg = InpaintConfig { tolerance: 1e-12, max_iterations: None };
        let u = inpaint(&img, &mask, &cfg).unwrap();
        // halve the data; the reconstruction of a scaled image scales too
        let half: Vec<u8> = img.pixels().iter().map(|v| v / 2 * 2).collect();
        let even = Image::new(img.width(), img.height(), half.clone()).unwrap();
        let low = Image::new(img.width(), img.height(), half.iter().map(|v| v / 2).collect()).unwrap();
        let ue = inpaint(&even, &mask, &cfg).unwrap();
        let ul = inpaint(&low, &mask, &cfg).unwrap();
        for (e, l) in ue.values.iter().zip(&ul.values) {
            prop_assert!((e - 2.0 * l).abs() < 1e-6);
        }
        // adding a constant shifts the solution by that constant
        let shift = (a * 10.0) as u8;
        let capped: Vec<u8> = img.pixels().iter().map(|&v| v.min(240)).collect();
        let base = Image::new(img.width(), img.height(), capped.clone()).unwrap();
        let moved = Image::new(img.width(), img.height(), capped.iter().map(|v| v + shift).collect()).unwrap();
        let ub = inpaint(&base, &mask, &cfg).unwrap();
        let um = inpaint(&moved, &mask, &cfg).unwrap();
        for (b, m) in ub.values.iter().zip(&um.values) {
            prop_assert!((m - b - f64::from(shift)).abs() < 1e-6);
        }
        prop_assert_eq!(u.values.len(), img.len());
    }

    #[test]
    fn inpainting_solution_is_unique((img, mask) in image_and_mask()) {
        // the converged solution does not depend on the starting guess
        let cfg = InpaintConfig { tolerance: 1e-12, max_iterations: None };
        let system = quantscale::InpaintSystem::new(img.width(), img.height(), &mask).unwrap();
        let data: Vec<f64> = img.pixels().iter().map(|&v| f64::from(v)).collect();
        let a = system.solve(&data, None, &cfg).unwrap();
        let guess = vec![255.0; img.len()];
        let b = system.solve(&data, Some(&guess), &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}
