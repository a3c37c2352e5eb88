//! Savitzky-Golay smoothing.
//!
//! Interior points use the usual centered least-squares convolution. The
//! first and last `window / 2` points are evaluated from the polynomial
//! fitted to the first (last) full window, so polynomials of degree up to
//! `polyorder` pass through unchanged everywhere.

use nalgebra::{DMatrix, DVector};

use super::FeatureError;

/// Weights that evaluate the least-squares polynomial of the window at
/// offset `at` (in samples, relative to the window centre).
fn weights_at(window: usize, polyorder: usize, at: f64) -> Vec<f64> {
    let half = (window / 2) as f64;
    let scale = half.max(1.0);
    let a = DMatrix::from_fn(window, polyorder + 1, |j, k| ((j as f64 - half) / scale).powi(k as i32));
    let ata = a.transpose() * &a;
    let t = at / scale;
    let rhs = DVector::from_fn(polyorder + 1, |k, _| t.powi(k as i32));
    let x = ata
        .cholesky()
        .expect("Vandermonde normal matrix is positive definite for window > polyorder")
        .solve(&rhs);
    (a * x).iter().copied().collect()
}

pub fn savgol_smooth(values: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>, FeatureError> {
    if window.is_multiple_of(2) || window <= polyorder {
        return Err(FeatureError::BadWindow { window, polyorder });
    }
    if values.len() < window {
        return Err(FeatureError::WindowTooLarge {
            window,
            len: values.len(),
        });
    }
    let n = values.len();
    let half = window / 2;
    let centre = weights_at(window, polyorder, 0.0);
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = centre
            .iter()
            .zip(&values[i - half..=i + half])
            .map(|(w, v)| w * v)
            .sum();
    }
    for i in 0..half {
        let offset = i as f64 - half as f64;
        let w = weights_at(window, polyorder, offset);
        out[i] = w.iter().zip(&values[..window]).map(|(w, v)| w * v).sum();
        let w_tail = weights_at(window, polyorder, -offset);
        out[n - 1 - i] = w_tail.iter().zip(&values[n - window..]).map(|(w, v)| w * v).sum();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn second_diff_energy(v: &[f64]) -> f64 {
        v.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).powi(2)).sum()
    }

    #[test]
    fn reproduces_cubics() {
        let n = 400;
        let cubic = |t: f64| 2.0 * t * t * t - t * t + 0.5 * t + 1.0;
        let v: Vec<f64> = (0..n).map(|i| cubic(i as f64 / (n - 1) as f64)).collect();
        let s = savgol_smooth(&v, 99, 3).unwrap();
        for (a, b) in v.iter().zip(&s) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_stays_constant() {
        let v = vec![3.25; 150];
        let s = savgol_smooth(&v, 99, 3).unwrap();
        assert!(s.iter().all(|x| (x - 3.25).abs() < 1e-12));
    }

    #[test]
    fn suppresses_high_frequency() {
        let n = 1536;
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                t * t * t - 0.5 * t + 0.1 * (2.0 * std::f64::consts::PI * 200.0 * t).sin()
            })
            .collect();
        let s = savgol_smooth(&v, 99, 3).unwrap();
        let (before, after) = (second_diff_energy(&v), second_diff_energy(&s));
        assert!(before > 10.0 * after, "{before} vs {after}");
    }

    #[test]
    fn window_errors() {
        assert!(matches!(
            savgol_smooth(&[0.0; 10], 4, 2),
            Err(FeatureError::BadWindow { .. })
        ));
        assert!(matches!(
            savgol_smooth(&[0.0; 10], 3, 3),
            Err(FeatureError::BadWindow { .. })
        ));
        assert!(matches!(
            savgol_smooth(&[0.0; 10], 99, 3),
            Err(FeatureError::WindowTooLarge { window: 99, len: 10 })
        ));
    }

    #[test]
    fn five_point_quadratic_coefficients() {
        // classic table: (-3, 12, 17, 12, -3) / 35
        let w = weights_at(5, 2, 0.0);
        let expect = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|x| x / 35.0);
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
