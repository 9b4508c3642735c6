mod common;

use quantscale::{
    apply_path, inpaint, level_partition, sparsification_quant_path, ward_path, Image, InpaintConfig, Mask,
    SparsQuantOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_image, random_mask};

fn tight() -> InpaintConfig {
    InpaintConfig { tolerance: 1e-13, max_iterations: None }
}

/// Squared error of a fresh inpainting of `known` against `original`.
fn inpainted_sse(known: &Image, mask: &Mask, original: &Image) -> f64 {
    let u = inpaint(known, mask, &tight()).unwrap();
    u.values.iter().zip(original.pixels()).map(|(&a, &b)| (a - f64::from(b)).powi(2)).sum()
}

/// Every candidate merge of the current known data, inpainted from scratch.
fn candidates(current: &Image, mask: &Mask, original: &Image) -> Vec<(f64, u8, u8, u8)> {
    let known = current.values_at(Some(mask));
    let count = |v: u8| known.iter().filter(|&&x| x == v).count();
    let mut values = known.clone();
    values.sort_unstable();
    values.dedup();
    let mut out = Vec::new();
    for (i, &s) in values.iter().enumerate() {
        for &t in &values[i + 1..] {
            let r = if count(s) >= count(t) { s } else { t };
            let px: Vec<u8> = current
                .pixels()
                .iter()
                .enumerate()
                .map(|(k, &v)| if mask.contains(k) && (v == s || v == t) { r } else { v })
                .collect();
            let merged = Image::new(current.width(), current.height(), px).unwrap();
            out.push((inpainted_sse(&merged, mask, original), s, t, r));
        }
    }
    out
}

#[test]
fn superposition_matches_direct_inpainting() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let options = SparsQuantOptions { inpaint: tight(), candidate_limit: None };
    for case in 0..25 {
        let img = random_image(&mut rng, 8, 6);
        let density = rng.gen_range(0.2..0.9);
        let mask = random_mask(&mut rng, img.len(), density);
        let path = sparsification_quant_path(&img, &mask, &options).unwrap();
        for (m, step) in path.steps().iter().enumerate() {
            let current = apply_path(&img, Some(&mask), &path, m).unwrap();
            let all = candidates(&current, &mask, &img);
            let best = all.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
            let chosen = all
                .iter()
                .find(|c| (c.1, c.2, c.3) == (step.low, step.high, step.merged))
                .unwrap_or_else(|| panic!("case {case} step {m}: {step:?} is not a valid candidate"));
            let scale = best.abs().max(1.0);
            assert!(chosen.0 <= best + 1e-7 * scale, "case {case} step {m}: chose {} but best is {best}", chosen.0);
        }
    }
}

#[test]
fn five_pixel_example_picks_the_cheaper_representative() {
    let img = Image::new(5, 1, vec![0, 0, 50, 100, 100]).unwrap();
    let mask = Mask::new(vec![0, 1, 3, 4], 5).unwrap();
    let path = sparsification_quant_path(&img, &mask, &SparsQuantOptions::default()).unwrap();
    assert_eq!(path.initial_values(), &[0, 100]);
    assert_eq!(path.len(), 1);
    // equal counts: the representative rule fixes r = 0; check it against both choices
    let step = path.steps()[0];
    assert_eq!((step.low, step.high, step.merged), (0, 100, 0));
    let to = |r: u8| Image::new(5, 1, vec![r, r, 50, r, r]).unwrap();
    let (e0, e100) = (inpainted_sse(&to(0), &mask, &img), inpainted_sse(&to(100), &mask, &img));
    // both constants reproduce exactly, so the full-image errors coincide
    assert_eq!(e0, e100);
    assert_eq!(e0, 50.0 * 50.0 + 2.0 * 100.0 * 100.0);
}

#[test]
fn single_known_value_gives_empty_path() {
    let img = Image::new(4, 1, vec![7, 200, 7, 3]).unwrap();
    let mask = Mask::new(vec![0, 2], 4).unwrap();
    let path = sparsification_quant_path(&img, &mask, &SparsQuantOptions::default()).unwrap();
    assert!(path.is_empty());
    assert_eq!(path.initial_values(), &[7]);
}

#[test]
fn empty_mask_is_rejected() {
    let img = Image::new(2, 1, vec![1, 2]).unwrap();
    let mask = Mask::new(vec![], 2).unwrap();
    assert!(sparsification_quant_path(&img, &mask, &SparsQuantOptions::default()).is_err());
}

#[test]
fn unlimited_candidate_limit_matches_exact_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let img = random_image(&mut rng, 12, 10);
        let mask = random_mask(&mut rng, img.len(), 0.5);
        let exact = sparsification_quant_path(&img, &mask, &SparsQuantOptions::default()).unwrap();
        let limited = SparsQuantOptions { candidate_limit: Some(usize::MAX), ..Default::default() };
        assert_eq!(sparsification_quant_path(&img, &mask, &limited).unwrap(), exact);
    }
}

#[test]
fn candidate_limit_one_follows_ward_under_full_mask() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let img = random_image(&mut rng, 10, 12);
    let options = SparsQuantOptions { candidate_limit: Some(1), ..Default::default() };
    let limited = sparsification_quant_path(&img, &Mask::full(img.len()), &options).unwrap();
    assert_eq!(limited, ward_path(&level_partition(&img, None).unwrap()).unwrap());
}
