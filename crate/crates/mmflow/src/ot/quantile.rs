//! One-dimensional semi-discrete transport by quantile matching: the
//! comonotone coupling between a grid density and a discrete target is read
//! off the cumulative distribution functions, and the dual potential u is the
//! integral of the resulting monotone piecewise-constant map.

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GridDensity};

/// Result of the semi-discrete correlation solve in d = 1.
#[derive(Debug, Clone)]
pub struct GridCorrelation {
    /// sup int x T(x) rho(x) dx over couplings (attained by the monotone map).
    pub value: f64,
    /// Dual potential u at the grid nodes (cells + 1 values), gauged so that
    /// u = 0 at the leftmost node.
    pub potential_nodes: Vec<f64>,
    /// The monotone map as (start, end, target value) segments covering the
    /// grid's bounding interval.
    pub segments: Vec<(f64, f64, f64)>,
}

impl GridCorrelation {
    /// u evaluated at the cell centers (exact integral of the map).
    pub fn potential_at_cell_centers(&self, rho: &GridDensity) -> Vec<f64> {
        let h = rho.spacing()[0];
        let x0 = rho.origin()[0];
        (0..rho.num_cells())
            .map(|c| {
                let center = x0 + (c as f64 + 0.5) * h;
                self.integrate_map(x0, center)
            })
            .collect()
    }

    /// int_{a}^{b} T(s) ds along the stored segments.
    fn integrate_map(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for &(s0, s1, y) in &self.segments {
            let lo = s0.max(a);
            let hi = s1.min(b);
            if hi > lo {
                acc += y * (hi - lo);
            }
        }
        acc
    }
}

/// Comonotone coupling of a 1-D grid density with a 1-D discrete measure:
/// the quantile axis of rho is partitioned by mu's cumulative weights.
pub fn max_correlation_grid(
    rho: &GridDensity,
    mu: &DiscreteMeasure,
) -> Result<GridCorrelation> {
    if rho.dim() != 1 || mu.dim() != 1 {
        return Err(Error::UnsupportedDimension(rho.dim().max(mu.dim())));
    }
    let h = rho.spacing()[0];
    let x0 = rho.origin()[0];
    let n = rho.num_cells();
    let grid_end = x0 + h * n as f64;

    // sorted targets with cumulative weights
    let mut order: Vec<usize> = (0..mu.len()).collect();
    order.sort_by(|&p, &q| mu.atoms()[p][0].partial_cmp(&mu.atoms()[q][0]).unwrap());
    let targets: Vec<f64> = order.iter().map(|&j| mu.atoms()[j][0]).collect();
    let cum_targets: Vec<f64> = {
        let mut acc = 0.0;
        order
            .iter()
            .map(|&j| {
                acc += mu.weights()[j];
                acc
            })
            .collect()
    };

    // walk cells, cutting a new segment whenever the running rho-mass crosses
    // the next cumulative target weight
    let mut segments = Vec::with_capacity(n.min(1024) + targets.len());
    let mut seg_start = x0;
    let mut cum = 0.0;
    let mut j = 0usize;
    for c in 0..n {
        let v = rho.values()[c];
        let mut cell_pos = x0 + c as f64 * h;
        let cell_end = cell_pos + h;
        let mut left = v * h;
        while j + 1 < targets.len() {
            let need = (cum_targets[j] - cum).max(0.0);
            if need > left {
                break;
            }
            let x_cross = if v > 0.0 {
                (cell_pos + need / v).min(cell_end)
            } else {
                cell_pos
            };
            if x_cross > seg_start {
                segments.push((seg_start, x_cross, targets[j]));
            }
            seg_start = x_cross;
            cum = cum_targets[j];
            left -= need;
            cell_pos = x_cross;
            j += 1;
        }
        cum += left;
    }
    if grid_end > seg_start {
        segments.push((seg_start, grid_end, targets[targets.len() - 1]));
    }

    // value = sum over segments of y * int x rho(x) dx
    let mut value = 0.0;
    for &(a, b, y) in &segments {
        let c_lo = (((a - x0) / h).floor() as isize).clamp(0, n as isize - 1) as usize;
        let c_hi = ((((b - x0) / h).ceil() as isize) - 1).clamp(0, n as isize - 1) as usize;
        for c in c_lo..=c_hi {
            let ca = x0 + c as f64 * h;
            let cb = ca + h;
            let lo = ca.max(a);
            let hi = cb.min(b);
            if hi > lo {
                value += y * rho.values()[c] * 0.5 * (hi * hi - lo * lo);
            }
        }
    }

    // potential: u(node) = int_{x0}^{node} T(s) ds
    let mut potential_nodes = Vec::with_capacity(n + 1);
    potential_nodes.push(0.0);
    let mut acc = 0.0;
    let mut seg_idx = 0usize;
    for k in 0..n {
        let a = x0 + k as f64 * h;
        let b = a + h;
        // advance through segments overlapping [a, b]
        let mut pos = a;
        while pos < b - 1e-300 {
            while seg_idx + 1 < segments.len() && segments[seg_idx].1 <= pos {
                seg_idx += 1;
            }
            let (_, s1, y) = segments[seg_idx];
            let hi = s1.min(b);
            if hi <= pos {
                acc += y * (b - pos);
                break;
            }
            acc += y * (hi - pos);
            pos = hi;
            if seg_idx + 1 == segments.len() {
                if pos < b {
                    acc += y * (b - pos);
                }
                break;
            }
        }
        potential_nodes.push(acc);
    }

    Ok(GridCorrelation {
        value,
        potential_nodes,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_grid(half_width: f64, cells: usize) -> GridDensity {
        let h = 2.0 * half_width / cells as f64;
        let samples: Vec<f64> = (0..cells)
            .map(|i| {
                let x = -half_width + (i as f64 + 0.5) * h;
                0.5 * (-x.abs()).exp()
            })
            .collect();
        GridDensity::from_1d_samples(-half_width, h, &samples).unwrap()
    }

    #[test]
    fn laplace_against_two_atoms() {
        // T = sign(x), value = int |x| e^{-|x|}/2 dx = 1
        let rho = laplace_grid(16.0, 8192);
        let mu = DiscreteMeasure::from_1d(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        let r = max_correlation_grid(&rho, &mu).unwrap();
        assert!((r.value - 1.0).abs() < 1e-4, "value {}", r.value);
        // the split sits at the density median, x = 0
        let cross = r.segments[0].1;
        assert!(cross.abs() < 1e-2, "crossing at {cross}");
    }

    #[test]
    fn point_target_gives_zero_value_for_centered_source() {
        let rho = laplace_grid(12.0, 2048);
        let mu = DiscreteMeasure::from_1d(&[0.0], &[1.0]).unwrap();
        let r = max_correlation_grid(&rho, &mu).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert_eq!(r.segments.len(), 1);
    }

    #[test]
    fn uniform_source_mean_absolute_value() {
        // uniform [-1, 1] against half masses at -+1: value = E|U| = 1/2
        let n = 4096;
        let rho = GridDensity::from_1d_samples(-1.0, 2.0 / n as f64, &vec![0.5; n]).unwrap();
        let mu = DiscreteMeasure::from_1d(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        let r = max_correlation_grid(&rho, &mu).unwrap();
        assert!((r.value - 0.5).abs() < 1e-6, "value {}", r.value);
    }

    #[test]
    fn potential_is_convex_piecewise_linear() {
        let rho = laplace_grid(10.0, 1000);
        let mu = DiscreteMeasure::from_1d(&[-2.0, 0.5, 1.0], &[0.3, 0.4, 0.3]).unwrap();
        let r = max_correlation_grid(&rho, &mu).unwrap();
        assert_eq!(r.potential_nodes.len(), 1001);
        assert_eq!(r.potential_nodes[0], 0.0);
        // node increments are the map integrals: nondecreasing slopes
        let h = rho.spacing()[0];
        let mut prev_slope = f64::NEG_INFINITY;
        for w in r.potential_nodes.windows(2) {
            let slope = (w[1] - w[0]) / h;
            assert!(slope >= prev_slope - 1e-9);
            prev_slope = slope;
        }
    }

    #[test]
    fn dual_value_matches_primal_value() {
        // int u drho + sum_j w_j u*(y_j) = value for the optimal pair; with
        // u from the map integral, u*(y_j) = max_x (x y_j - u(x)) over nodes.
        let rho = laplace_grid(14.0, 4000);
        let mu = DiscreteMeasure::from_1d(&[-1.5, 0.25, 2.0], &[0.25, 0.5, 0.25]).unwrap();
        let r = max_correlation_grid(&rho, &mu).unwrap();
        let h = rho.spacing()[0];
        let x0 = rho.origin()[0];
        let u_centers = r.potential_at_cell_centers(&rho);
        let int_u: f64 = u_centers
            .iter()
            .zip(rho.values())
            .map(|(u, v)| u * v * h)
            .sum();
        let mut dual = int_u;
        for (a, &w) in mu.atoms().iter().zip(mu.weights()) {
            let y = a[0];
            let conj = (0..=rho.num_cells())
                .map(|k| {
                    let x = x0 + k as f64 * h;
                    x * y - r.potential_nodes[k]
                })
                .fold(f64::NEG_INFINITY, f64::max);
            dual += w * conj;
        }
        assert!(
            (dual - r.value).abs() < 1e-3,
            "dual {} vs primal {}",
            dual,
            r.value
        );
    }
}
