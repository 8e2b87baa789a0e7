//! Direct grid treatment of the density-side problem
//!
//!     min E(rho) + T(rho, mu)
//!
//! in one dimension: the optimality condition rho = e^{-u} / Z (u a dual
//! potential of T(rho, mu)) is iterated as a damped fixed point. Also houses
//! the divergence demonstration for hyperplane-supported targets and the
//! displacement-convexity suite.

use serde::Serialize;

use crate::entropy::entropy;
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GridDensity};
use crate::numerics::norm;
use crate::ot::{geodesic_grid_1d, max_correlation_grid};

/// E(rho) + T(rho, mu) for a 1-D grid density.
pub fn objective(rho: &GridDensity, mu: &DiscreteMeasure) -> Result<f64> {
    if rho.dim() != 1 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    Ok(entropy(rho) + max_correlation_grid(rho, mu)?.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimalReport {
    #[serde(skip)]
    pub final_density: GridDensity,
    pub objective_trace: Vec<f64>,
    /// sup-norm of rho - e^{-u} / Z at the final iterate.
    pub fixed_point_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Grid actually used (it expands once if the boundary carries mass).
    pub half_width: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub half_width: f64,
    pub cells: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            cells: 2048,
            damping: 0.5,
            tol: 1e-6,
            max_iter: 2000,
        }
    }
}

/// Damped fixed-point iteration on rho_{k+1} = (1 - theta) rho_k +
/// theta e^{-u_k} / Z_k, where u_k is the dual potential of T(rho_k, mu).
pub fn solve_fixed_point(
    mu: &DiscreteMeasure,
    options: &FixedPointOptions,
) -> Result<PrimalReport> {
    if mu.dim() != 1 {
        return Err(Error::UnsupportedDimension(mu.dim()));
    }
    if norm(&mu.barycenter()) > 1e-9 {
        return Err(Error::Invalid(
            "mu has nonzero barycenter; center mu first".into(),
        ));
    }
    if mu.hyperplane_check().degenerate {
        return Err(Error::Invalid(
            "mu is a single atom in d=1; the objective is unbounded below".into(),
        ));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::Invalid(format!(
            "damping {} outside (0, 1]",
            options.damping
        )));
    }

    let mut half_width = options.half_width;
    for attempt in 0..2 {
        let report = fixed_point_on_grid(mu, half_width, options)?;
        let boundary = report.final_density.values()[0]
            .max(*report.final_density.values().last().unwrap());
        if boundary < 1e-12 || attempt == 1 {
            return Ok(report);
        }
        half_width *= 2.0;
    }
    unreachable!()
}

fn fixed_point_on_grid(
    mu: &DiscreteMeasure,
    half_width: f64,
    options: &FixedPointOptions,
) -> Result<PrimalReport> {
    let n = options.cells;
    let h = 2.0 * half_width / n as f64;
    let mut rho = GridDensity::from_1d_samples(-half_width, h, &vec![1.0; n])?;
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let theta = options.damping;

    while iterations < options.max_iter {
        iterations += 1;
        let corr = max_correlation_grid(&rho, mu)?;
        trace.push(entropy(&rho) + corr.value);
        let u = corr.potential_at_cell_centers(&rho);
        // e^{-u} / Z on the grid, with the min shifted out before exp
        let u_min = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = u.iter().map(|v| (-(v - u_min)).exp()).collect();
        let z: f64 = weights.iter().sum::<f64>() * h;
        let target: Vec<f64> = weights.iter().map(|w| w / z).collect();
        residual = rho
            .values()
            .iter()
            .zip(&target)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if residual <= options.tol {
            converged = true;
            break;
        }
        let next: Vec<f64> = rho
            .values()
            .iter()
            .zip(&target)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        rho = GridDensity::new(vec![-half_width], vec![h], vec![n], next)?;
    }
    trace.push(objective(&rho, mu)?);

    Ok(PrimalReport {
        final_density: rho,
        objective_trace: trace,
        fixed_point_residual: residual,
        iterations,
        converged,
        half_width,
        cells: n,
    })
}

/// One row of the hyperplane divergence table.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceRow {
    pub n: f64,
    pub entropy_term: f64,
    pub correlation_bound: f64,
    pub objective_upper_bound: f64,
}

/// For mu supported on {last coordinate = 0}, the uniform slabs
/// R_n = [-1, 1]^{d-1} x [-n, n] give E(rho_n) = -ln(2^d n) while
/// T(rho_n, mu) <= sqrt(d) M1(mu): the objective is unbounded below, so no
/// minimizer exists.
pub fn hyperplane_divergence_demo(
    mu: &DiscreteMeasure,
    ns: &[f64],
) -> Result<Vec<DivergenceRow>> {
    let d = mu.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let last_bad = mu
        .atoms()
        .iter()
        .map(|a| a[d - 1].abs())
        .fold(0.0f64, f64::max);
    if last_bad > 1e-10 {
        return Err(Error::Invalid(format!(
            "mu is not supported on the hyperplane {{x_{d} = 0}} (max |last coord| = {last_bad:e})"
        )));
    }
    let bound = (d as f64).sqrt() * mu.first_moment();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        if !(n > 0.0) {
            return Err(Error::Invalid(format!("slab half-length {n} must be > 0")));
        }
        let slab = match d {
            1 => {
                let cells = 256;
                let h = 2.0 * n / cells as f64;
                GridDensity::from_1d_samples(-n, h, &vec![1.0; cells])?
            }
            2 => {
                let (c0, c1) = (16usize, 128usize);
                GridDensity::new(
                    vec![-1.0, -n],
                    vec![2.0 / c0 as f64, 2.0 * n / c1 as f64],
                    vec![c0, c1],
                    vec![1.0 / (4.0 * n); c0 * c1],
                )?
            }
            _ => unreachable!(),
        };
        let e = entropy(&slab);
        rows.push(DivergenceRow {
            n,
            entropy_term: e,
            correlation_bound: bound,
            objective_upper_bound: e + bound,
        });
    }
    Ok(rows)
}

/// Displacement-convexity evidence along random 1-D geodesics.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub pairs: usize,
    pub entropy_violations: usize,
    pub correlation_violations: usize,
    /// Worst midpoint defect f(mid) - (f(a) + f(b))/2 observed (negative
    /// values mean strict convexity).
    pub max_entropy_defect: f64,
    pub max_correlation_defect: f64,
    pub strict_cases: usize,
    pub strict_violations: usize,
}

/// For random density pairs, evaluate E and T(., mu) along the geodesic at
/// t in {0, 1/4, 1/2, 3/4, 1} and check midpoint convexity within 1e-7,
/// plus strict entropy convexity whenever the map is not a pure shift
/// (displacement range > 1e-3).
pub fn displacement_convexity_suite(
    samples: usize,
    mu: &DiscreteMeasure,
    seed: u64,
) -> Result<ConvexityReport> {
    use rand::{Rng, SeedableRng};
    if mu.dim() != 1 {
        return Err(Error::UnsupportedDimension(mu.dim()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = ConvexityReport {
        pairs: samples,
        entropy_violations: 0,
        correlation_violations: 0,
        max_entropy_defect: f64::NEG_INFINITY,
        max_correlation_defect: f64::NEG_INFINITY,
        strict_cases: 0,
        strict_violations: 0,
    };
    for _ in 0..samples {
        let rho0 = random_mixture_density(&mut rng, 8.0, 1024);
        let rho1 = random_mixture_density(&mut rng, 8.0, 1024);
        let geo = geodesic_grid_1d(&rho0, &rho1)?;
        let ts = [0.0, 0.25, 0.5, 0.75, 1.0];
        let e: Vec<f64> = ts.iter().map(|&t| geo.entropy_at(t)).collect();
        let c: Result<Vec<f64>> = ts
            .iter()
            .map(|&t| geo.density_at(t).correlation_with(mu))
            .collect();
        let c = c?;
        for k in 1..4 {
            let de = e[k] - 0.5 * (e[k - 1] + e[k + 1]);
            let dc = c[k] - 0.5 * (c[k - 1] + c[k + 1]);
            report.max_entropy_defect = report.max_entropy_defect.max(de);
            report.max_correlation_defect = report.max_correlation_defect.max(dc);
            if de > 1e-7 {
                report.entropy_violations += 1;
            }
            if dc > 1e-7 {
                report.correlation_violations += 1;
            }
        }
        if geo.displacement_range() > 1e-3 {
            report.strict_cases += 1;
            if e[2] >= 0.5 * (e[0] + e[4]) - 1e-9 {
                report.strict_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Random two-component Gaussian mixture histogram (shared by the
/// verification suites).
pub fn random_mixture_density(
    rng: &mut rand_chacha::ChaCha8Rng,
    half_width: f64,
    cells: usize,
) -> GridDensity {
    use rand::Rng;
    let h = 2.0 * half_width / cells as f64;
    let m1: f64 = rng.gen_range(-2.0..2.0);
    let s1: f64 = rng.gen_range(0.4..1.6);
    let m2: f64 = rng.gen_range(-2.0..2.0);
    let s2: f64 = rng.gen_range(0.4..1.6);
    let w1: f64 = rng.gen_range(0.2..0.8);
    let samples: Vec<f64> = (0..cells)
        .map(|i| {
            let x = -half_width + (i as f64 + 0.5) * h;
            w1 * (-0.5 * ((x - m1) / s1).powi(2)).exp() / s1
                + (1.0 - w1) * (-0.5 * ((x - m2) / s2).powi(2)).exp() / s2
        })
        .collect();
    GridDensity::from_1d_samples(-half_width, h, &samples).expect("mixture has positive mass")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::from_1d(&[-1.0, 1.0], &[0.5, 0.5]).unwrap()
    }

    fn laplace_grid(half: f64, cells: usize) -> GridDensity {
        let h = 2.0 * half / cells as f64;
        let samples: Vec<f64> = (0..cells)
            .map(|i| {
                let x = -half + (i as f64 + 0.5) * h;
                0.5 * (-x.abs()).exp()
            })
            .collect();
        GridDensity::from_1d_samples(-half, h, &samples).unwrap()
    }

    #[test]
    fn objective_at_the_known_optimum() {
        // E = -ln2 - 1, T = 1, total -ln2
        let rho = laplace_grid(16.0, 8192);
        let val = objective(&rho, &two_atoms()).unwrap();
        assert!((val + 2.0f64.ln()).abs() < 1e-4, "objective {val}");
    }

    #[test]
    fn objective_of_centered_uniform_against_point_mass() {
        let n = 1024;
        let rho = GridDensity::from_1d_samples(-0.5, 1.0 / n as f64, &vec![1.0; n]).unwrap();
        let mu = DiscreteMeasure::from_1d(&[0.0], &[1.0]).unwrap();
        let val = objective(&rho, &mu).unwrap();
        assert!(val.abs() < 1e-12, "uniform entropy 0 plus zero correlation");
    }

    #[test]
    fn fixed_point_recovers_laplace_density() {
        let report = solve_fixed_point(&two_atoms(), &FixedPointOptions::default()).unwrap();
        assert!(report.converged, "residual {}", report.fixed_point_residual);
        let rho = &report.final_density;
        let h = rho.spacing()[0];
        let mut sup_err = 0.0f64;
        for (i, v) in rho.values().iter().enumerate() {
            let x = rho.origin()[0] + (i as f64 + 0.5) * h;
            sup_err = sup_err.max((v - 0.5 * (-x.abs()).exp()).abs());
        }
        assert!(sup_err <= 1e-3, "sup error {sup_err}");
        // descent from the uniform start is observed at convergence
        let first = report.objective_trace[0];
        let last = *report.objective_trace.last().unwrap();
        assert!(last <= first, "objective rose from {first} to {last}");
        assert!((last + 2.0f64.ln()).abs() < 1e-3, "final objective {last}");
    }

    #[test]
    fn uncentered_target_is_rejected() {
        let mu = DiscreteMeasure::from_1d(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(solve_fixed_point(&mu, &FixedPointOptions::default()).is_err());
    }

    #[test]
    fn divergence_demo_matches_the_slab_formula() {
        let mu = DiscreteMeasure::from_1d(&[0.0], &[1.0]).unwrap();
        let rows = hyperplane_divergence_demo(&mu, &[1.0, 5.0, 50.0, 500.0]).unwrap();
        // E(rho_n) = -ln(2n)
        let expected = [
            -(2.0f64).ln(),
            -(10.0f64).ln(),
            -(100.0f64).ln(),
            -(1000.0f64).ln(),
        ];
        for (row, exp) in rows.iter().zip(expected) {
            assert!(
                (row.entropy_term - exp).abs() < 1e-12,
                "n = {}: entropy {} vs {}",
                row.n,
                row.entropy_term,
                exp
            );
            assert_eq!(row.correlation_bound, 0.0);
        }
        for w in rows.windows(2) {
            assert!(w[1].objective_upper_bound < w[0].objective_upper_bound);
        }
    }

    #[test]
    fn divergence_demo_2d_slab_entropy() {
        // mu on the line {x2 = 0}: E(rho_n) = -ln(4 n)
        let mu = DiscreteMeasure::new(
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let rows = hyperplane_divergence_demo(&mu, &[5.0]).unwrap();
        assert!((rows[0].entropy_term + 20.0f64.ln()).abs() < 1e-12);
        assert!((rows[0].correlation_bound - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn divergence_demo_rejects_full_dimensional_mu() {
        let mu = two_atoms(); // d = 1, atoms off the hyperplane {x = 0}
        assert!(hyperplane_divergence_demo(&mu, &[5.0]).is_err());
    }

    #[test]
    fn translation_geodesic_has_affine_entropy() {
        // shifted copies: E is constant along the path
        let a = laplace_grid(10.0, 512);
        let shift = 40.0 * a.spacing()[0];
        let b = GridDensity::new(
            vec![a.origin()[0] + shift],
            a.spacing().to_vec(),
            a.shape().to_vec(),
            a.values().to_vec(),
        )
        .unwrap();
        let geo = geodesic_grid_1d(&a, &b).unwrap();
        let e0 = geo.entropy_at(0.0);
        for t in [0.25, 0.5, 0.75, 1.0] {
            assert!((geo.entropy_at(t) - e0).abs() < 1e-9);
        }
        assert!(geo.displacement_range() < 1e-9);
    }

    #[test]
    fn convexity_suite_runs_clean() {
        let report = displacement_convexity_suite(30, &two_atoms(), 123).unwrap();
        assert_eq!(report.entropy_violations, 0, "{report:?}");
        assert_eq!(report.correlation_violations, 0, "{report:?}");
        assert_eq!(report.strict_violations, 0, "{report:?}");
        assert!(report.strict_cases > 0);
    }
}
