//! Deterministic test images.

use crate::image::Image;

/// Piecewise-smooth scene: a tilted background ramp, a shaded disc and a
/// dark graded rectangle, separated by sharp edges.
pub fn piecewise_smooth(width: usize, height: usize) -> Image {
    let (w, h) = (width as f64, height as f64);
    let pixels = (0..width * height)
        .map(|i| {
            let x = (i % width) as f64 / w;
            let y = (i / width) as f64 / h;
            let (dx, dy) = (x - 0.62, y - 0.35);
            let r = (dx * dx + dy * dy).sqrt();
            let v = if r < 0.22 {
                150.0 + 45.0 * (1.0 - r / 0.22)
            } else if (0.1..0.42).contains(&x) && (0.55..0.9).contains(&y) {
                20.0 + 30.0 * (y - 0.55) / 0.35
            } else {
                60.0 + 35.0 * x + 15.0 * y
            };
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Image::new(width, height, pixels).expect("valid extent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::level_partition;

    #[test]
    fn about_a_hundred_levels() {
        let img = piecewise_smooth(64, 64);
        let levels = level_partition(&img, None).unwrap().len();
        assert!((80..=120).contains(&levels), "{levels} levels");
    }
}
