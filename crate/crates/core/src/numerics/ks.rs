//! Two-sample Kolmogorov-Smirnov statistic.

use crate::error::{Error, Result};

/// Sup-norm distance between the empirical CDFs of xs and ys.
///
/// Both samples are sorted and the merged order is swept; all values equal to
/// the current one are consumed on both sides before the gap is measured, so
/// ties are handled by the standard right-continuous ECDF convention.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::config("ks_two_sample: empty sample set"));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).expect("non-finite sample"));
    b.sort_by(|p, q| p.partial_cmp(q).expect("non-finite sample"));

    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        let gap = (i as f64 / na - j as f64 / nb).abs();
        if gap > d {
            d = gap;
        }
    }
    // Once one sample is exhausted the remaining gap can only shrink toward
    // |1 - F| at the tail; the maximum over the merged sweep already covers
    // the largest value because both ECDFs reach 1 at the global maximum.
    if i < a.len() {
        let gap = (i as f64 / na - 1.0).abs();
        if gap > d {
            d = gap;
        }
    }
    if j < b.len() {
        let gap = (1.0 - j as f64 / nb).abs();
        if gap > d {
            d = gap;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_zero() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        let ys = vec![2.0, 1.0, 4.0, 3.0];
        assert_eq!(ks_two_sample(&xs, &ys).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports_one() {
        let xs = vec![0.0, 0.5, 0.9];
        let ys = vec![2.0, 3.0];
        assert_eq!(ks_two_sample(&xs, &ys).unwrap(), 1.0);
    }

    #[test]
    fn hand_value() {
        // ECDFs differ by 0.5 on [2, 3)
        let xs = vec![1.0, 2.0];
        let ys = vec![1.0, 3.0];
        assert_eq!(ks_two_sample(&xs, &ys).unwrap(), 0.5);
    }

    #[test]
    fn known_value_ten_points() {
        let xs = vec![0.42, 0.24, 0.86, 0.85, 0.82, 0.82, 0.25, 0.78, 0.13, 0.27];
        let ys = vec![0.24, 0.27, 0.87, 0.29, 0.57, 0.44, 0.5, 0.0, 0.56, 0.03];
        assert!((ks_two_sample(&xs, &ys).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn symmetry_and_bounds() {
        let xs = vec![0.1, 0.4, 0.4, 0.7];
        let ys = vec![0.2, 0.4, 0.9];
        let d1 = ks_two_sample(&xs, &ys).unwrap();
        let d2 = ks_two_sample(&ys, &xs).unwrap();
        assert_eq!(d1, d2);
        assert!((0.0..=1.0).contains(&d1));
    }

    #[test]
    fn empty_rejected() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(ks_two_sample(&[1.0], &[]).is_err());
    }
}
