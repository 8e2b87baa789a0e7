//! Discrete Legendre-Fenchel transform on sampled grids.
//!
//! The conjugate of a sampled function only sees its lower convex envelope,
//! so the transform runs in linear time after a monotone-chain hull pass.
//! Slopes outside the achieved range of envelope slopes escape the sampled
//! domain; those queries return `f64::INFINITY` as a sentinel.

use crate::error::{Error, Result};

/// u*(y) = max_k (x_k y - f_k) for each y in `dual_grid`.
///
/// `values` may contain `f64::INFINITY` entries (excluded points). Queries
/// with y strictly outside the envelope's slope range return the infinity
/// sentinel; everything else is the exact maximum over the sampled points.
pub fn conjugate_grid(xs: &[f64], values: &[f64], dual_grid: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != values.len() {
        return Err(Error::Invalid(format!(
            "{} sample points but {} values",
            xs.len(),
            values.len()
        )));
    }
    if dual_grid.is_empty() {
        return Err(Error::Invalid("empty dual grid".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("sample grid must be strictly increasing".into()));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .map(|(&x, &v)| (x, v))
        .collect();
    if pts.is_empty() {
        return Err(Error::Invalid("no finite sample values".into()));
    }

    // lower convex hull of (x, f(x)) by monotone chain (x already sorted)
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &(x, f) in &pts {
        while hull.len() >= 2 {
            let (x1, f1) = hull[hull.len() - 2];
            let (x2, f2) = hull[hull.len() - 1];
            // drop the middle point when it lies on or above the chord
            if (f2 - f1) * (x - x1) >= (f - f1) * (x2 - x1) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, f));
    }

    if hull.len() == 1 {
        // single-point domain: the conjugate is the linear function x y - f
        let (x, f) = hull[0];
        return Ok(dual_grid.iter().map(|&y| x * y - f).collect());
    }

    let slopes: Vec<f64> = hull
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let s_min = slopes[0];
    let s_max = slopes[slopes.len() - 1];

    let out = dual_grid
        .iter()
        .map(|&y| {
            if y < s_min || y > s_max {
                f64::INFINITY
            } else {
                // the argmax vertex is where the slope passes y
                let k = slopes.partition_point(|&s| s < y);
                let (x, f) = hull[k];
                x * y - f
            }
        })
        .collect();
    Ok(out)
}

/// Conjugate of a separable planar function f(x0, x1) = f0(x0) + f1(x1):
/// u*(y0, y1) = f0*(y0) + f1*(y1). Returns the two axis conjugates.
pub fn conjugate_grid_separable(
    axis0: (&[f64], &[f64], &[f64]),
    axis1: (&[f64], &[f64], &[f64]),
) -> Result<(Vec<f64>, Vec<f64>)> {
    let c0 = conjugate_grid(axis0.0, axis0.1, axis0.2)?;
    let c1 = conjugate_grid(axis1.0, axis1.1, axis1.2)?;
    Ok((c0, c1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn half_square_is_self_conjugate() {
        let xs = grid(-3.5, 3.5, 7001);
        let f: Vec<f64> = xs.iter().map(|&x| 0.5 * x * x).collect();
        let ys = grid(-3.0, 3.0, 601);
        let c = conjugate_grid(&xs, &f, &ys).unwrap();
        for (y, v) in ys.iter().zip(&c) {
            assert!(
                (v - 0.5 * y * y).abs() < 1e-6,
                "conj({y}) = {v}, expected {}",
                0.5 * y * y
            );
        }
    }

    #[test]
    fn conjugate_of_absolute_value_is_indicator() {
        let xs = grid(-20.0, 20.0, 4001);
        let f: Vec<f64> = xs.iter().map(|&x| x.abs()).collect();
        let ys = vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
        let c = conjugate_grid(&xs, &f, &ys).unwrap();
        assert!(c[0].is_infinite());
        assert!(c[6].is_infinite());
        for v in &c[1..6] {
            assert!(v.abs() < 1e-12, "expected 0 on [-1, 1], got {v}");
        }
    }

    #[test]
    fn matches_brute_force_on_random_piecewise_linear() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(5..60);
            let xs = grid(-4.0, 4.0, n);
            // convex piecewise linear: integrate a nondecreasing slope
            let mut f = vec![rng.gen_range(-1.0..1.0); n];
            let mut slope = rng.gen_range(-3.0..-1.0);
            for i in 1..n {
                slope += rng.gen_range(0.0..1.0);
                f[i] = f[i - 1] + slope * (xs[i] - xs[i - 1]);
            }
            let ys = grid(-2.0, 2.0, 41);
            let c = conjugate_grid(&xs, &f, &ys).unwrap();
            for (y, v) in ys.iter().zip(&c) {
                let brute = xs
                    .iter()
                    .zip(&f)
                    .map(|(&x, &fx)| x * y - fx)
                    .fold(f64::NEG_INFINITY, f64::max);
                if v.is_finite() {
                    assert!((v - brute).abs() < 1e-9, "y={y}: {v} vs brute {brute}");
                }
            }
        }
    }

    #[test]
    fn involution_recovers_convex_input() {
        let xs = grid(-3.0, 3.0, 1201);
        let f: Vec<f64> = xs.iter().map(|&x| 0.5 * x * x + 0.3 * x).collect();
        let ys = grid(-6.0, 6.0, 2401);
        let c = conjugate_grid(&xs, &f, &ys).unwrap();
        let back = conjugate_grid(&ys, &c, &xs).unwrap();
        for ((x, orig), rec) in xs.iter().zip(&f).zip(&back).skip(20).take(1161) {
            assert!(
                (orig - rec).abs() < 1e-6,
                "x={x}: original {orig}, double conjugate {rec}"
            );
        }
    }

    #[test]
    fn empty_dual_grid_errors() {
        assert!(conjugate_grid(&[0.0, 1.0], &[0.0, 1.0], &[]).is_err());
    }

    #[test]
    fn infinite_samples_are_excluded() {
        let xs = vec![-1.0, 0.0, 1.0];
        let f = vec![f64::INFINITY, 0.0, f64::INFINITY];
        let c = conjugate_grid(&xs, &f, &[-3.0, 0.0, 3.0]).unwrap();
        // single finite point at the origin: conjugate is identically -f(0) = 0
        assert_eq!(c, vec![0.0, 0.0, 0.0]);
    }
}
