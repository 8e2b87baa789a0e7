//! Small shared numeric kernels: vector ops, weighted medians, symmetric
//! eigendecomposition, quadrature nodes and certified 1-D global minimization.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// log(sum exp(x_i)) without overflow; -inf for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Weighted median with the deterministic tie rule: the lowest value whose
/// cumulative weight reaches one half of the total.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    debug_assert!(!values.is_empty());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let total: f64 = weights.iter().sum();
    let mut cum = 0.0;
    for &i in &idx {
        cum += weights[i];
        if cum >= 0.5 * total {
            return values[i];
        }
    }
    values[idx[idx.len() - 1]]
}

/// Eigendecomposition of a small symmetric matrix (row-major, d x d) by
/// cyclic Jacobi sweeps. Returns (eigenvalues, eigenvectors as rows),
/// eigenvalues ascending.
pub fn symmetric_eigen(mat: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(mat.len(), d * d);
    let mut a = mat.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if off <= 1e-30 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vpk = v[p * d + k];
                    let vqk = v[q * d + k];
                    v[p * d + k] = c * vpk - s * vqk;
                    v[q * d + k] = s * vpk + c * vqk;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|i| (a[i * d + i], v[i * d..(i + 1) * d].to_vec()))
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let vals = pairs.iter().map(|p| p.0).collect();
    let vecs = pairs.into_iter().map(|p| p.1).collect();
    (vals, vecs)
}

/// 12-point Gauss-Legendre nodes/weights on [-1, 1].
pub const GAUSS12_NODES: [f64; 12] = [
    -0.981_560_634_246_719_3,
    -0.904_117_256_370_474_9,
    -0.769_902_674_194_304_7,
    -0.587_317_954_286_617_4,
    -0.367_831_498_998_180_2,
    -0.125_233_408_511_468_9,
    0.125_233_408_511_468_9,
    0.367_831_498_998_180_2,
    0.587_317_954_286_617_4,
    0.769_902_674_194_304_7,
    0.904_117_256_370_474_9,
    0.981_560_634_246_719_3,
];

pub const GAUSS12_WEIGHTS: [f64; 12] = [
    0.047_175_336_386_511_83,
    0.106_939_325_995_318_4,
    0.160_078_328_543_346_2,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_8,
    0.249_147_045_813_402_8,
    0.249_147_045_813_402_8,
    0.233_492_536_538_354_8,
    0.203_167_426_723_065_9,
    0.160_078_328_543_346_2,
    0.106_939_325_995_318_4,
    0.047_175_336_386_511_83,
];

/// Adaptive Simpson integration of `f` over [a, b] to the given absolute
/// tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || b - a < 1e-14 {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::Quadrature(format!(
                "adaptive Simpson recursion limit on [{a}, {b}]"
            )));
        }
        let l = recurse(f, a, fa, m, fm, left, flm, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, fm, b, fb, right, frm, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, fm, tol, 60)
}

/// Certified global minimum of a Lipschitz function on [lo, hi].
///
/// Interval branch-and-bound: each interval is bounded below by
/// f(center) - L * halfwidth; intervals are split until the best evaluated
/// value is within `tol` of the global lower bound. Returns
/// (argmin, min, certified lower bound).
pub fn lipschitz_global_min(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    lipschitz: f64,
    tol: f64,
    initial_cells: usize,
) -> (f64, f64, f64) {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(Clone, Copy, PartialEq)]
    struct Key(f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }

    let n = initial_cells.max(2);
    let width = (hi - lo) / n as f64;
    // min-heap keyed on the cell lower bound f(center) - L * halfwidth
    let mut heap: BinaryHeap<Reverse<(Key, Key, Key)>> = BinaryHeap::new();
    let mut best = (f64::NAN, f64::INFINITY);
    for k in 0..n {
        let center = lo + (k as f64 + 0.5) * width;
        let fc = f(center);
        if fc < best.1 {
            best = (center, fc);
        }
        let half = 0.5 * width;
        heap.push(Reverse((Key(fc - lipschitz * half), Key(center), Key(half))));
    }
    for _ in 0..400_000 {
        let Reverse((Key(low), Key(center), Key(half))) = *heap.peek().unwrap();
        if best.1 - low <= tol || half < 1e-15 {
            return (best.0, best.1, low);
        }
        heap.pop();
        let h = 0.5 * half;
        for cand_center in [center - h, center + h] {
            let fc = f(cand_center);
            if fc < best.1 {
                best = (cand_center, fc);
            }
            heap.push(Reverse((Key(fc - lipschitz * h), Key(cand_center), Key(h))));
        }
    }
    let low = heap
        .peek()
        .map(|Reverse((Key(l), _, _))| *l)
        .unwrap_or(f64::NEG_INFINITY);
    (best.0, best.1, low)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_median_tie_rule_takes_lowest() {
        // cumulative weight reaches exactly 1/2 at the first value
        assert_eq!(weighted_median(&[-1.0, 1.0], &[0.5, 0.5]), -1.0);
        assert_eq!(weighted_median(&[3.0], &[1.0]), 3.0);
        assert_eq!(
            weighted_median(&[0.0, 4.0], &[0.25, 0.75]),
            4.0,
            "cum 0.25 < 0.5 at first atom"
        );
    }

    #[test]
    fn jacobi_eigen_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1, 3
        let (vals, vecs) = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // eigenvector for 1 is (1,-1)/sqrt2 up to sign
        assert!((vecs[0][0] + vecs[0][1]).abs() < 1e-10);
    }

    #[test]
    fn gauss12_weights_sum_to_two() {
        let s: f64 = GAUSS12_WEIGHTS.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_integrates_exponential() {
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 30.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn certified_min_of_cosine() {
        let (x, fx, low) = lipschitz_global_min(&|t: f64| t.cos(), 0.0, 6.0, 1.0, 1e-9, 64);
        assert!((x - std::f64::consts::PI).abs() < 1e-4);
        assert!((fx + 1.0).abs() < 1e-8);
        assert!(fx - low <= 1e-9 + 1e-12);
    }

    #[test]
    fn logsumexp_handles_large_inputs() {
        let v = logsumexp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2.0f64.ln())).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }
}
