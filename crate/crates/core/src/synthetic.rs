//! Seeded synthetic datasets used by the test suites and `gen-synthetic`.
//!
//! Image generators quantize pixels to 256 levels in `[0, 1]`, so a dataset
//! written to IDX and read back is bit-identical to the generated one.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Dataset2D, LabeledDataset};
use crate::seed;

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn digit_names(c: usize) -> Vec<String> {
    (0..c).map(|i| i.to_string()).collect()
}

/// `n` samples in `c` classes (one guaranteed per class, the rest uniform),
/// with class means drawn from `N(0, separation^2 I)` plus a common offset and
/// unit Gaussian noise around each mean.
pub fn random_labeled(d: usize, n: usize, c: usize, separation: f64, seed: u64) -> LabeledDataset {
    assert!(c >= 1 && n >= c, "need at least one sample per class");
    let mut rng = seed::rng(seed);
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
    let means = DMatrix::from_fn(d, c, |i, _| {
        offset[i] + separation * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let labels: Vec<usize> = (0..n)
        .map(|j| if j < c { j } else { rng.random_range(0..c) })
        .collect();
    let x = DMatrix::from_fn(d, n, |i, j| {
        means[(i, labels[j])] + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    LabeledDataset::new(x, labels).expect("generator covers every class")
}

/// Two Gaussian classes in `R^d` with means `+2 e_1` and `-2 e_1` and identity
/// covariance; `per_class` samples each, alternating labels.
pub fn gaussian_two_class(d: usize, per_class: usize, seed: u64) -> LabeledDataset {
    let mut rng = seed::rng(seed);
    let n = 2 * per_class;
    let labels: Vec<usize> = (0..n).map(|j| j % 2).collect();
    let x = DMatrix::from_fn(d, n, |i, j| {
        let mean = match (i, labels[j]) {
            (0, 0) => 2.0,
            (0, _) => -2.0,
            _ => 0.0,
        };
        mean + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    LabeledDataset::new(x, labels).expect("both classes present")
}

/// Three classes of `size x size` images: horizontal stripes, vertical
/// stripes, and a centered square, on a 0.2 background with `N(0, 0.15^2)`
/// pixel noise.
pub fn stripes_three_class(size: usize, per_class: usize, seed: u64) -> Dataset2D {
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, 0.15).expect("valid deviation");
    let lo = size / 4;
    let hi = size - size / 4;
    let pattern = |class: usize, i: usize, j: usize| -> f64 {
        let on = match class {
            0 => (i / 2) % 2 == 0,
            1 => (j / 2) % 2 == 0,
            _ => (lo..hi).contains(&i) && (lo..hi).contains(&j),
        };
        if on {
            0.8
        } else {
            0.2
        }
    };
    let mut samples = Vec::with_capacity(3 * per_class);
    let mut labels = Vec::with_capacity(3 * per_class);
    for k in 0..3 * per_class {
        let class = k % 3;
        samples.push(DMatrix::from_fn(size, size, |i, j| {
            quantize(pattern(class, i, j) + noise.sample(&mut rng))
        }));
        labels.push(class);
    }
    Dataset2D::with_class_names(samples, labels, digit_names(3)).expect("valid generator output")
}

/// Ten glyph classes on a `size x size` canvas. Each glyph is three straight
/// strokes (horizontal, vertical or diagonal) drawn from the seed; samples are
/// the glyph shifted by up to one pixel in each direction plus
/// `N(0, 0.1^2)` noise.
pub fn glyphs_ten_class(size: usize, per_class: usize, seed: u64) -> Dataset2D {
    assert!(size >= 8, "glyph canvas must be at least 8x8");
    let mut rng = seed::rng(seed);
    let glyphs: Vec<DMatrix<f64>> = (0..10)
        .map(|_| {
            let mut g = DMatrix::zeros(size, size);
            for _ in 0..3 {
                let len = rng.random_range(size / 2..size - 2);
                let (di, dj): (isize, isize) = match rng.random_range(0..4) {
                    0 => (0, 1),
                    1 => (1, 0),
                    2 => (1, 1),
                    _ => (1, -1),
                };
                let i0 = rng.random_range(1..size - 1) as isize;
                let j0 = rng.random_range(1..size - 1) as isize;
                for s in 0..len as isize {
                    let (i, j) = (i0 + di * s, j0 + dj * s);
                    if (1..size as isize - 1).contains(&i) && (1..size as isize - 1).contains(&j) {
                        g[(i as usize, j as usize)] = 1.0;
                    }
                }
            }
            g
        })
        .collect();

    let noise = Normal::new(0.0, 0.1).expect("valid deviation");
    let mut samples = Vec::with_capacity(10 * per_class);
    let mut labels = Vec::with_capacity(10 * per_class);
    for k in 0..10 * per_class {
        let class = k % 10;
        let si = rng.random_range(0..3usize) as isize - 1;
        let sj = rng.random_range(0..3usize) as isize - 1;
        let g = &glyphs[class];
        samples.push(DMatrix::from_fn(size, size, |i, j| {
            let (ii, jj) = (i as isize - si, j as isize - sj);
            let base = if (0..size as isize).contains(&ii) && (0..size as isize).contains(&jj) {
                g[(ii as usize, jj as usize)]
            } else {
                0.0
            };
            quantize(base + noise.sample(&mut rng))
        }));
        labels.push(class);
    }
    Dataset2D::with_class_names(samples, labels, digit_names(10)).expect("valid generator output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_labeled(4, 10, 3, 1.0, 1), random_labeled(4, 10, 3, 1.0, 1));
        assert_eq!(gaussian_two_class(5, 4, 2), gaussian_two_class(5, 4, 2));
        assert_eq!(stripes_three_class(8, 2, 3), stripes_three_class(8, 2, 3));
        assert_eq!(glyphs_ten_class(10, 2, 4), glyphs_ten_class(10, 2, 4));
        assert_ne!(glyphs_ten_class(10, 2, 4), glyphs_ten_class(10, 2, 5));
    }

    #[test]
    fn shapes_and_class_balance() {
        let g = gaussian_two_class(50, 100, 0);
        assert_eq!((g.dim(), g.len()), (50, 200));
        assert_eq!(g.class_counts(), &[100, 100]);
        let s = stripes_three_class(16, 40, 0);
        assert_eq!((s.d1(), s.d2(), s.len()), (16, 16, 120));
        let gl = glyphs_ten_class(12, 20, 0);
        assert_eq!(gl.class_counts(), &[20; 10]);
        assert!(gl.samples().iter().all(|m| m.iter().all(|&v| (0.0..=1.0).contains(&v))));
    }
}
