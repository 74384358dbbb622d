//! Quantile utilities shared by the band and fan constructions.

use nalgebra::DMatrix;

/// Linear interpolation of order statistics (the common "type 7"
/// estimator): at probability q the value is `s[⌊h⌋] + frac·(s[⌈h⌉] −
/// s[⌊h⌋])` with `h = (n−1)·q` on the sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "probability out of range");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Pointwise posterior band over a set of equally-shaped matrices
/// (draw × (rows × cols) → per-cell quantiles and mean).
#[derive(Clone, Debug)]
pub struct Band {
    pub lower: DMatrix<f64>,
    pub median: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    pub mean: DMatrix<f64>,
    /// The (lower, upper) probability levels, e.g. `(0.05, 0.95)`.
    pub levels: (f64, f64),
}

impl Band {
    pub fn from_samples(samples: &[DMatrix<f64>], levels: (f64, f64)) -> Self {
        assert!(!samples.is_empty(), "band over an empty sample");
        assert!(levels.0 <= levels.1, "band levels out of order");
        let rows = samples[0].nrows();
        let cols = samples[0].ncols();
        let mut lower = DMatrix::zeros(rows, cols);
        let mut median = DMatrix::zeros(rows, cols);
        let mut upper = DMatrix::zeros(rows, cols);
        let mut mean = DMatrix::zeros(rows, cols);
        let mut cell = Vec::with_capacity(samples.len());
        for i in 0..rows {
            for j in 0..cols {
                cell.clear();
                cell.extend(samples.iter().map(|s| s[(i, j)]));
                mean[(i, j)] = cell.iter().sum::<f64>() / cell.len() as f64;
                cell.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
                lower[(i, j)] = quantile_sorted(&cell, levels.0);
                median[(i, j)] = quantile_sorted(&cell, 0.5);
                upper[(i, j)] = quantile_sorted(&cell, levels.1);
            }
        }
        Band { lower, median, upper, mean, levels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interpolates_order_statistics() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_abs_diff_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_abs_diff_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_abs_diff_eq!(quantile_sorted(&s, 0.25), 1.75);
    }

    #[test]
    fn degenerate_sample_gives_zero_width_band() {
        let sample = DMatrix::from_element(3, 2, 7.0);
        let band = Band::from_samples(&vec![sample; 5], (0.05, 0.95));
        assert_eq!(band.lower, band.upper);
        assert_eq!(band.median, band.mean);
        assert_eq!(band.lower[(0, 0)], 7.0);
    }

    #[test]
    fn band_quantiles_are_ordered() {
        let samples: Vec<DMatrix<f64>> = (0..40)
            .map(|s| DMatrix::from_fn(4, 3, |i, j| ((s * 7 + i * 3 + j) % 13) as f64))
            .collect();
        let band = Band::from_samples(&samples, (0.05, 0.95));
        for i in 0..4 {
            for j in 0..3 {
                assert!(band.lower[(i, j)] <= band.median[(i, j)]);
                assert!(band.median[(i, j)] <= band.upper[(i, j)]);
            }
        }
    }
}
