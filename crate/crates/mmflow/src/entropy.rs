//! The entropy functional E(rho) = int rho ln rho, its first-moment lower
//! bound, and the three-part split E = E1 + E2 + E3 built from the reference
//! exponent h(x) = -sqrt(|x|).
//!
//! E1 collects the pointwise-nonnegative part rho ln rho + e^{h-1} - rho h,
//! E2 = int rho h, and E3 = -C_d with C_d = int e^{-sqrt(|x|)-1} dx. The
//! bound E >= -C_d - sqrt(M1(rho)) follows from dropping E1 and applying
//! Cauchy-Schwarz to E2.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::GridDensity;
use crate::numerics::{adaptive_simpson, norm};

/// Three-part entropy split. `total` is e1 + e2 + e3; it differs from the
/// plain entropy by the mass of e^{h-1} outside the grid's bounding box.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyBreakdown {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
}

/// Entropy of a piecewise-constant density: sum of rho ln rho times cell
/// volume, with 0 ln 0 = 0.
pub fn entropy(rho: &GridDensity) -> f64 {
    let vol = rho.cell_volume();
    rho.values()
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() * vol } else { 0.0 })
        .sum()
}

/// The constant C_d = int_{R^d} e^{-sqrt(|x|)-1} dx, by adaptive radial
/// quadrature (relative accuracy 1e-8). Supported for d in {1, 2}.
///
/// Closed forms used as test oracles: C_1 = 4/e, C_2 = 24 pi / e.
pub fn entropy_lower_bound_constant(d: usize) -> Result<f64> {
    let surface = match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    // Substitute s = sqrt(r): int_0^inf r^{d-1} e^{-sqrt r} dr
    //                       = int_0^inf 2 s^{2d-1} e^{-s} ds.
    // The integrand decays like e^{-s}; cut where the analytic tail bound
    // drops below the requested relative accuracy.
    let a = 2.0 * d as f64 - 1.0;
    let integrand = move |s: f64| 2.0 * s.powf(a) * (-s).exp();
    let mut cut: f64 = 60.0;
    loop {
        // tail bound: int_S^inf s^a e^{-s} ds <= S^a e^{-S} / (1 - a/S)
        let tail = 2.0 * cut.powf(a) * (-cut).exp() / (1.0 - a / cut);
        if tail < 1e-12 {
            break;
        }
        cut += 20.0;
    }
    let radial = adaptive_simpson(&integrand, 0.0, cut, 1e-12)?;
    Ok(surface * (-1.0f64).exp() * radial)
}

/// Split the entropy of `rho` into E1 + E2 + E3 over the grid's bounding box.
///
/// Per-cell E1 integrands are mathematically nonnegative; values within
/// -1e-14 of zero are clamped to zero as roundoff.
pub fn entropy_decomposition(rho: &GridDensity) -> Result<EntropyBreakdown> {
    let c_d = entropy_lower_bound_constant(rho.dim())?;
    let vol = rho.cell_volume();
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for (i, &v) in rho.values().iter().enumerate() {
        let h = -norm(&rho.cell_center(i)).sqrt();
        let plogp = if v > 0.0 { v * v.ln() } else { 0.0 };
        let mut cell = plogp + (h - 1.0).exp() - v * h;
        if cell < 0.0 && cell >= -1e-14 {
            cell = 0.0;
        }
        e1 += cell * vol;
        e2 += v * h * vol;
    }
    let e3 = -c_d;
    Ok(EntropyBreakdown {
        e1,
        e2,
        e3,
        total: e1 + e2 + e3,
    })
}

/// E1 per-cell integrand values (used by the invariant suite to check
/// pointwise nonnegativity).
pub fn e1_cell_integrands(rho: &GridDensity) -> Vec<f64> {
    rho.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let h = -norm(&rho.cell_center(i)).sqrt();
            let plogp = if v > 0.0 { v * v.ln() } else { 0.0 };
            let mut cell = plogp + (h - 1.0).exp() - v * h;
            if cell < 0.0 && cell >= -1e-14 {
                cell = 0.0;
            }
            cell
        })
        .collect()
}

/// Mass of e^{h(x)-1} outside the grid's bounding box, evaluated by
/// quadrature. Used to reconcile `EntropyBreakdown::total` with `entropy`.
pub fn box_tail_mass(rho: &GridDensity) -> Result<f64> {
    let c_d = entropy_lower_bound_constant(rho.dim())?;
    let inside = match rho.dim() {
        1 => {
            let a = rho.origin()[0];
            let b = a + rho.spacing()[0] * rho.shape()[0] as f64;
            adaptive_simpson(&|x: f64| (-x.abs().sqrt() - 1.0).exp(), a, b, 1e-12)?
        }
        2 => {
            let a0 = rho.origin()[0];
            let b0 = a0 + rho.spacing()[0] * rho.shape()[0] as f64;
            let a1 = rho.origin()[1];
            let b1 = a1 + rho.spacing()[1] * rho.shape()[1] as f64;
            let inner = move |x0: f64| {
                adaptive_simpson(
                    &|x1: f64| (-(x0 * x0 + x1 * x1).sqrt().sqrt() - 1.0).exp(),
                    a1,
                    b1,
                    1e-12,
                )
                .unwrap_or(0.0)
            };
            adaptive_simpson(&inner, a0, b0, 1e-10)?
        }
        d => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(c_d - inside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GridDensity;

    #[test]
    fn uniform_on_unit_interval_has_zero_entropy() {
        let g = GridDensity::from_1d_samples(0.0, 1.0 / 64.0, &vec![1.0; 64]).unwrap();
        assert!(entropy(&g).abs() < 1e-12);
    }

    #[test]
    fn uniform_slab_entropy_is_minus_log_length() {
        // uniform on [-5, 5]: entropy = -ln 10
        let g = GridDensity::from_1d_samples(-5.0, 10.0 / 512.0, &vec![0.1; 512]).unwrap();
        assert!((entropy(&g) + 10.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_entropy_matches_analytic() {
        // N(0,1) entropy is -(1/2) ln(2 pi e), discretized on [-8, 8]
        let n = 4096;
        let h = 16.0 / n as f64;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let x = -8.0 + (i as f64 + 0.5) * h;
                (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            })
            .collect();
        let g = GridDensity::from_1d_samples(-8.0, h, &samples).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!(
            (entropy(&g) - expected).abs() < 1e-3,
            "entropy {} vs {}",
            entropy(&g),
            expected
        );
    }

    #[test]
    fn lower_bound_constant_closed_forms() {
        // oracle: C_1 = 2 e^{-1} int_0^inf e^{-sqrt r} dr = 4/e
        let c1 = entropy_lower_bound_constant(1).unwrap();
        assert!((c1 - 4.0 / std::f64::consts::E).abs() < 1e-8 * c1);
        // oracle: C_2 = 2 pi e^{-1} int_0^inf r e^{-sqrt r} dr
        //             = 2 pi e^{-1} * 2 * Gamma(4) = 24 pi / e
        let c2 = entropy_lower_bound_constant(2).unwrap();
        let expected = 24.0 * std::f64::consts::PI / std::f64::consts::E;
        assert!((c2 - expected).abs() < 1e-8 * c2, "C_2 = {c2}");
        assert!(entropy_lower_bound_constant(3).is_err());
    }

    #[test]
    fn decomposition_reproduces_entropy_after_tail_correction() {
        // fine grid: the cusp of h(x) = -sqrt(|x|) at 0 limits the midpoint
        // rule to O(spacing^{3/2})
        let n = 1 << 18;
        let h = 16.0 / n as f64;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let x = -8.0 + (i as f64 + 0.5) * h;
                0.6 * (-0.5 * (x - 1.0) * (x - 1.0)).exp() + 0.4 * (-2.0 * (x + 2.0) * (x + 2.0)).exp()
            })
            .collect();
        let g = GridDensity::from_1d_samples(-8.0, h, &samples).unwrap();
        let b = entropy_decomposition(&g).unwrap();
        assert!(b.e1 >= 0.0);
        assert!((b.total - (b.e1 + b.e2 + b.e3)).abs() < 1e-12);
        let tail = box_tail_mass(&g).unwrap();
        let err = (b.total - entropy(&g) + tail).abs();
        assert!(err < 1e-6, "reconciliation error {err}");
    }

    #[test]
    fn decomposition_uniform_unit_interval() {
        let n = 1 << 16;
        let g = GridDensity::from_1d_samples(0.0, 1.0 / n as f64, &vec![1.0; n]).unwrap();
        let b = entropy_decomposition(&g).unwrap();
        let tail = box_tail_mass(&g).unwrap();
        assert!((b.total - 0.0 + tail).abs() < 1e-5);
    }

    #[test]
    fn entropy_lower_bound_on_gaussian() {
        let n = 1024;
        let h = 20.0 / n as f64;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let x = -10.0 + (i as f64 + 0.5) * h;
                (-0.5 * x * x).exp()
            })
            .collect();
        let g = GridDensity::from_1d_samples(-10.0, h, &samples).unwrap();
        let c1 = entropy_lower_bound_constant(1).unwrap();
        assert!(entropy(&g) >= -c1 - g.first_moment().sqrt() - 1e-9);
    }
}
