//! Small statistical utilities: moment aggregation and the 1-D
//! Wasserstein-1 distance between equal-size samples.

use crate::{Error, Result};

/// Sample mean and standard error (ddof = 1); stderr is 0 for fewer than two
/// observations.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Wasserstein-1 distance between two equal-size empirical distributions:
/// sort both samples and average the absolute quantile differences.
pub fn w1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "W1 needs equal non-empty samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("no NaN in samples"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("no NaN in samples"));
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stderr_basics() {
        let (m, se) = mean_stderr(&[1.0, 1.0, 1.0]);
        assert_eq!(m, 1.0);
        assert_eq!(se, 0.0);
        let (m, se) = mean_stderr(&[0.0, 2.0]);
        assert_eq!(m, 1.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn w1_translation() {
        // Shifting a sample by c moves W1 by exactly |c|.
        let a = [0.0, 1.0, 2.0, 5.0];
        let b: Vec<f64> = a.iter().map(|x| x + 0.75).collect();
        assert!((w1_distance(&a, &b).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(w1_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn w1_is_symmetric() {
        let a = [0.3, -1.0, 2.0];
        let b = [1.0, 0.0, -0.5];
        assert_eq!(w1_distance(&a, &b).unwrap(), w1_distance(&b, &a).unwrap());
    }
}
