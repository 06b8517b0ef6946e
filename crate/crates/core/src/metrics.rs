//! Prediction bands and band quality metrics.
//!
//! Bands are empirical central intervals of an ensemble, computed per
//! output point with the interpolating quantile rule so narrow ensembles
//! do not collapse onto order statistics. Coverage counts boundary hits as
//! covered; width comparisons skip points where both bands are degenerate,
//! which happens at constrained degrees of freedom.

use crate::error::{Error, Result};
use crate::scalar::{cast, to_f64, Scalar};
use crate::{Matrix, Vector};

/// Width below which a band is considered degenerate at a point.
pub const NO_WIDTH_TOL: f64 = 1e-14;

/// Central empirical band at a given coverage level.
#[derive(Debug, Clone)]
pub struct PredictionBand<T: Scalar> {
    pub lower: Vector<T>,
    pub upper: Vector<T>,
    pub level: T,
}

impl<T: Scalar> PredictionBand<T> {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.len() == 0
    }

    /// Pointwise band width.
    pub fn width(&self) -> Vector<T> {
        &self.upper - &self.lower
    }
}

/// Interpolating sample quantile on an ascending-sorted slice: the value
/// at fractional order-statistic position `(n - 1) p`.
pub fn quantile_type7<T: Scalar>(sorted: &[T], p: T) -> Result<T> {
    if sorted.is_empty() {
        return Err(Error::invalid("quantile of an empty sample"));
    }
    if p < T::zero() || p > T::one() {
        return Err(Error::invalid(format!(
            "quantile probability {} outside [0, 1]",
            to_f64(p)
        )));
    }
    let n = sorted.len();
    let h = cast::<T>((n - 1) as f64) * p;
    let lo = to_f64(h.floor()) as usize;
    if lo + 1 >= n {
        return Ok(sorted[n - 1]);
    }
    let frac = h - h.floor();
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Smallest ensemble size at which the tail quantiles of a central band at
/// this level are supported by data.
pub fn min_draws_for_level<T: Scalar>(level: T) -> Result<usize> {
    if level <= T::zero() || level >= T::one() {
        return Err(Error::invalid(format!(
            "band level {} outside (0, 1)",
            to_f64(level)
        )));
    }
    // Snap to the nearest integer first so representation noise in the
    // complement (1 - 0.9 is slightly below 0.1) cannot inflate the bound.
    let raw = 1.0 / (1.0 - to_f64(level));
    let nearest = raw.round();
    if (raw - nearest).abs() < 1e-9 * nearest {
        Ok(nearest as usize)
    } else {
        Ok(raw.ceil() as usize)
    }
}

/// Central empirical band of an ensemble, one interval per output point.
/// `samples` holds one draw per row and one output point per column.
pub fn empirical_band<T: Scalar>(samples: &Matrix<T>, level: T) -> Result<PredictionBand<T>> {
    let min = min_draws_for_level(level)?;
    let draws = samples.nrows();
    if draws < min {
        return Err(Error::TooFewDraws {
            got: draws,
            min,
            level: to_f64(level),
        });
    }
    let p_lo = (T::one() - level) / cast(2.0);
    let p_hi = (T::one() + level) / cast(2.0);
    let points = samples.ncols();
    let mut lower = Vector::zeros(points);
    let mut upper = Vector::zeros(points);
    let mut column: Vec<T> = vec![T::zero(); draws];
    for j in 0..points {
        for i in 0..draws {
            let v = samples[(i, j)];
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite ensemble value at draw {i}, point {j}"
                )));
            }
            column[i] = v;
        }
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite values order"));
        lower[j] = quantile_type7(&column, p_lo)?;
        upper[j] = quantile_type7(&column, p_hi)?;
    }
    Ok(PredictionBand {
        lower,
        upper,
        level,
    })
}

/// Fraction of truth points inside the band, boundaries included.
pub fn coverage<T: Scalar>(band: &PredictionBand<T>, truth: &Vector<T>) -> Result<f64> {
    if truth.len() != band.len() {
        return Err(Error::DimensionMismatch {
            context: "coverage truth",
            expected: band.len().to_string(),
            got: truth.len().to_string(),
        });
    }
    if band.is_empty() {
        return Err(Error::invalid("coverage of an empty band"));
    }
    let covered = (0..band.len())
        .filter(|&i| band.lower[i] <= truth[i] && truth[i] <= band.upper[i])
        .count();
    Ok(covered as f64 / band.len() as f64)
}

/// Mean pointwise band width.
pub fn average_width<T: Scalar>(band: &PredictionBand<T>) -> Result<T> {
    if band.is_empty() {
        return Err(Error::invalid("width of an empty band"));
    }
    Ok(band.width().sum() / cast(band.len() as f64))
}

/// Mean of the pointwise width ratios `numerator / denominator`, skipping
/// points where both bands are degenerate. A point where only the
/// denominator is degenerate yields an infinite ratio rather than being
/// hidden.
pub fn width_ratio<T: Scalar>(
    numerator: &PredictionBand<T>,
    denominator: &PredictionBand<T>,
) -> Result<T> {
    if numerator.len() != denominator.len() {
        return Err(Error::DimensionMismatch {
            context: "width_ratio",
            expected: numerator.len().to_string(),
            got: denominator.len().to_string(),
        });
    }
    let wn = numerator.width();
    let wd = denominator.width();
    let tiny = cast::<T>(NO_WIDTH_TOL);
    let mut sum = T::zero();
    let mut count = 0usize;
    for i in 0..wn.len() {
        if wn[i] < tiny && wd[i] < tiny {
            continue;
        }
        sum += wn[i] / wd[i];
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(
            "width ratio undefined: both bands are degenerate everywhere",
        ));
    }
    Ok(sum / cast(count as f64))
}

/// Ratio of the average widths, a scale-robust companion to the pointwise
/// [`width_ratio`].
pub fn width_ratio_of_averages<T: Scalar>(
    numerator: &PredictionBand<T>,
    denominator: &PredictionBand<T>,
) -> Result<T> {
    let num = average_width(numerator)?;
    let den = average_width(denominator)?;
    if den < cast(NO_WIDTH_TOL) {
        return Err(Error::invalid(
            "width ratio undefined: denominator band has zero average width",
        ));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quantiles_interpolate_the_integer_ladder() {
        // 1..=100 at the 2.5 and 97.5 percent points; frozen by hand from
        // the interpolation rule h = 99 p.
        let sorted: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let lo = quantile_type7(&sorted, 0.025).unwrap();
        let hi = quantile_type7(&sorted, 0.975).unwrap();
        assert!((lo - 3.475).abs() < 1e-12, "lower {lo}");
        assert!((hi - 97.525).abs() < 1e-12, "upper {hi}");
        assert_eq!(quantile_type7(&sorted, 0.0).unwrap(), 1.0);
        assert_eq!(quantile_type7(&sorted, 1.0).unwrap(), 100.0);
        let median = quantile_type7(&sorted, 0.5).unwrap();
        assert!((median - 50.5).abs() < 1e-12);
    }

    #[test]
    fn quantile_rejects_bad_inputs() {
        assert!(quantile_type7::<f64>(&[], 0.5).is_err());
        assert!(quantile_type7(&[1.0], -0.1).is_err());
        assert!(quantile_type7(&[1.0], 1.1).is_err());
        assert_eq!(quantile_type7(&[1.0], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_band_recovers_normal_quantiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let draws = 100_000;
        let samples: Matrix<f64> =
            Matrix::from_fn(draws, 1, |_, _| StandardNormal.sample(&mut rng));
        let band = empirical_band(&samples, 0.95).unwrap();
        // Two-sided 95 percent points of the standard normal.
        assert!(
            (band.lower[0] + 1.959964).abs() < 0.03,
            "lower {}",
            band.lower[0]
        );
        assert!(
            (band.upper[0] - 1.959964).abs() < 0.03,
            "upper {}",
            band.upper[0]
        );
    }

    #[test]
    fn band_needs_enough_draws_for_the_level() {
        assert_eq!(min_draws_for_level(0.95).unwrap(), 20);
        assert_eq!(min_draws_for_level(0.9).unwrap(), 10);
        let narrow = Matrix::from_fn(19, 2, |i, j| (i + j) as f64);
        match empirical_band(&narrow, 0.95) {
            Err(Error::TooFewDraws {
                got: 19, min: 20, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let enough = Matrix::from_fn(20, 2, |i, j| (i + j) as f64);
        assert!(empirical_band(&enough, 0.95).is_ok());
        assert!(empirical_band(&enough, 1.0).is_err());
        assert!(empirical_band(&enough, 0.0).is_err());
    }

    #[test]
    fn band_rejects_non_finite_samples() {
        let mut samples = Matrix::from_element(25, 2, 1.0f64);
        samples[(3, 1)] = f64::NAN;
        assert!(empirical_band(&samples, 0.9).is_err());
    }

    #[test]
    fn coverage_counts_boundaries_as_covered() {
        let band = PredictionBand {
            lower: Vector::from_row_slice(&[0.0, 0.0, 0.0, 0.0]),
            upper: Vector::from_row_slice(&[1.0, 1.0, 1.0, 1.0]),
            level: 0.9,
        };
        let truth = Vector::from_row_slice(&[0.0, 1.0, 0.5, 1.5]);
        let c = coverage(&band, &truth).unwrap();
        assert!((c - 0.75).abs() < 1e-15);
        let off = Vector::from_row_slice(&[2.0, -1.0, 3.0, -0.5]);
        assert_eq!(coverage(&band, &off).unwrap(), 0.0);
    }

    #[test]
    fn nested_levels_give_nested_bands() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let samples = Matrix::from_fn(200, 3, |_, _| StandardNormal.sample(&mut rng));
        let wide = empirical_band(&samples, 0.95).unwrap();
        let tight = empirical_band(&samples, 0.5).unwrap();
        for j in 0..3 {
            assert!(wide.lower[j] <= tight.lower[j]);
            assert!(tight.upper[j] <= wide.upper[j]);
        }
        assert!(average_width(&tight).unwrap() < average_width(&wide).unwrap());
    }

    #[test]
    fn width_ratios_skip_jointly_degenerate_points() {
        // Point 0 is degenerate in both bands (a pinned degree of
        // freedom); the ratio averages the remaining points only.
        let a: PredictionBand<f64> = PredictionBand {
            lower: Vector::from_row_slice(&[0.0, 0.0, 0.0]),
            upper: Vector::from_row_slice(&[0.0, 3.0, 6.0]),
            level: 0.9,
        };
        let b = PredictionBand {
            lower: Vector::from_row_slice(&[0.0, 0.0, 0.0]),
            upper: Vector::from_row_slice(&[0.0, 1.0, 2.0]),
            level: 0.9,
        };
        let r = width_ratio(&a, &b).unwrap();
        assert!((r - 3.0).abs() < 1e-12, "ratio {r}");
        let ra = width_ratio_of_averages(&a, &b).unwrap();
        assert!((ra - 3.0).abs() < 1e-12, "ratio of averages {ra}");

        let degenerate = PredictionBand {
            lower: Vector::from_row_slice(&[0.0, 0.0, 0.0]),
            upper: Vector::from_row_slice(&[0.0, 0.0, 0.0]),
            level: 0.9,
        };
        assert!(width_ratio(&degenerate, &degenerate).is_err());
        // Denominator-only degeneracy must surface, not be skipped.
        let r = width_ratio(&a, &degenerate).unwrap();
        assert!(r.is_infinite());
    }
}
