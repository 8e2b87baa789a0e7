//! The variational solver: minimize
//!
//!     J(v) = sum_i mu_i v_i - ln Z(v),   Z(v) = int e^{-u_v},
//!
//! over the offsets v of the max-affine ansatz u_v(x) = max_i (x . y_i - v_i)
//! anchored at mu's atoms. At the minimum the pushforward of e^{-u}/Z under
//! grad u has exactly mass mu_i on atom y_i, which is the defining equation
//! of the moment measure.
//!
//! J has two flat directions: adding a constant to all offsets (exact) and,
//! for centered mu, the translation mode v_i -> v_i + y_i . w. Both gauges
//! are fixed after every accepted step so convergence metrics see none of
//! the drift.

use serde::Serialize;

use crate::convex::{IntegralReport, MaxAffineConvex};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::numerics::{dot, norm};

/// Solver output.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Final offsets, gauge-fixed so that int e^{-u} = 1 and the density
    /// barycenter is 0.
    pub offsets: Vec<f64>,
    /// ln Z at the optimizer before the unit-mass normalization.
    pub log_z: f64,
    pub gradient_norm: f64,
    /// (iteration, J) after every accepted step; strictly decreasing.
    pub objective_trace: Vec<(usize, f64)>,
    pub iterations: usize,
    /// max_i |mu_i - m_i / Z| at the final iterate.
    pub residual: f64,
    pub converged: bool,
    /// Human-readable description of the normalizations applied.
    pub gauge: String,
}

/// Solver knobs; `tol` bounds the pushforward residual max_i |mu_i - m_i/Z|.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Optional deterministic perturbation of the initial offsets,
    /// uniform in [-amplitude, amplitude] per coordinate.
    pub init_jitter: Option<(u64, f64)>,
    pub threads: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            init_jitter: None,
            threads: 1,
        }
    }
}

const ARMIJO_C: f64 = 1e-4;

struct Objective<'a> {
    mu: &'a DiscreteMeasure,
    threads: usize,
}

struct Evaluation {
    value: f64,
    report: IntegralReport,
    u: MaxAffineConvex,
}

impl<'a> Objective<'a> {
    fn eval(&self, v: &[f64]) -> Result<Evaluation> {
        let u = MaxAffineConvex::new(self.mu.atoms().to_vec(), v.to_vec())?.prune();
        let report = u.integrate_exp_neg_threaded(self.threads)?;
        let linear: f64 = self
            .mu
            .weights()
            .iter()
            .zip(v)
            .map(|(w, vi)| w * vi)
            .sum();
        Ok(Evaluation {
            value: linear - report.log_z,
            report,
            u,
        })
    }

    fn gradient(&self, eval: &Evaluation) -> Vec<f64> {
        let fractions = eval.report.cell_mass_fractions(self.mu.len());
        self.mu
            .weights()
            .iter()
            .zip(&fractions)
            .map(|(w, f)| w - f)
            .collect()
    }

    fn residual(&self, eval: &Evaluation) -> f64 {
        self.gradient(eval)
            .iter()
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

/// J(v) for the given offsets.
pub fn objective(mu: &DiscreteMeasure, offsets: &[f64]) -> Result<f64> {
    check_lengths(mu, offsets)?;
    Ok(Objective { mu, threads: 1 }.eval(offsets)?.value)
}

/// grad J: g_i = mu_i - m_i(v) / Z(v). Inactive pieces have m_i = 0.
pub fn gradient(mu: &DiscreteMeasure, offsets: &[f64]) -> Result<Vec<f64>> {
    check_lengths(mu, offsets)?;
    let obj = Objective { mu, threads: 1 };
    let eval = obj.eval(offsets)?;
    Ok(obj.gradient(&eval))
}

fn check_lengths(mu: &DiscreteMeasure, offsets: &[f64]) -> Result<()> {
    if offsets.len() != mu.len() {
        return Err(Error::Invalid(format!(
            "{} offsets for {} atoms",
            offsets.len(),
            mu.len()
        )));
    }
    Ok(())
}

/// Offsets of the cell-mass-balanced potential for `mu`: gradient descent on
/// J with Armijo backtracking.
pub fn solve(mu: &DiscreteMeasure, options: &SolveOptions) -> Result<SolveReport> {
    let b = mu.barycenter();
    if norm(&b) > 1e-9 {
        return Err(Error::Invalid(format!(
            "mu has barycenter norm {:.3e}; center mu first",
            norm(&b)
        )));
    }
    let hp = mu.hyperplane_check();
    if hp.degenerate {
        return Err(Error::Invalid(
            "mu is supported on a hyperplane; no moment-measure potential exists".into(),
        ));
    }

    // initial offsets: tangents to |x|^2/2 (the Gaussian guess)
    let mut v: Vec<f64> = mu.atoms().iter().map(|y| 0.5 * dot(y, y)).collect();
    if let Some((seed, amplitude)) = options.init_jitter {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for vi in &mut v {
            *vi += rng.gen_range(-amplitude..amplitude);
        }
    }
    constant_gauge(mu, &mut v);

    let obj = Objective {
        mu,
        threads: options.threads.max(1),
    };
    let mut eval = obj.eval(&v)?;
    if !eval.u.recession_check().interior {
        return Err(Error::Recession(
            "0 is not interior to the hull of mu's atoms".into(),
        ));
    }

    let mut trace = vec![(0usize, eval.value)];
    let mut step = 1.0f64;
    let mut iterations = 0usize;
    let mut converged = obj.residual(&eval) <= options.tol;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (v, g) of the last iterate
    let mut tiny_decreases = 0usize;

    while !converged && iterations < options.max_iter {
        iterations += 1;
        let g = obj.gradient(&eval);
        let g_norm_sq = dot(&g, &g);
        if g_norm_sq == 0.0 {
            converged = true;
            break;
        }
        // Barzilai-Borwein trial step when history exists, otherwise grow the
        // last accepted step; Armijo halving keeps descent monotone.
        let mut s = step;
        if let Some((pv, pg)) = &prev {
            let dv: Vec<f64> = v.iter().zip(pv).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let denom = dot(&dv, &dg);
            if denom > 1e-300 {
                s = (dot(&dv, &dv) / denom).clamp(1e-12, 1e8);
            }
        }
        prev = Some((v.clone(), g.clone()));
        let mut accepted = false;
        let before = eval.value;
        for _ in 0..60 {
            let mut cand: Vec<f64> = v.iter().zip(&g).map(|(vi, gi)| vi - s * gi).collect();
            constant_gauge(mu, &mut cand);
            let cand_eval = obj.eval(&cand)?;
            if cand_eval.value <= eval.value - ARMIJO_C * s * g_norm_sq {
                v = cand;
                eval = cand_eval;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break; // descent is no longer measurable against f64 noise in J
        }
        step = (s * 2.0).clamp(1e-12, 1e6);
        trace.push((iterations, eval.value));
        converged = obj.residual(&eval) <= options.tol;
        // hand off once decreases can no longer be distinguished from noise
        if before - eval.value < 1e-13 * (1.0 + eval.value.abs()) {
            tiny_decreases += 1;
            if tiny_decreases >= 8 {
                break;
            }
        } else {
            tiny_decreases = 0;
        }
    }

    // Polish phase: once the Armijo decrease c s |g|^2 sinks below the
    // floating-point noise of J, the line search stalls even though the
    // gradient itself is still accurate to ~1e-15. Gradient iteration with a
    // step kept monotone in |g|_2 (guaranteed to contract for s < 2/L)
    // finishes the job without consulting J.
    if !converged {
        // start from a plain safe scale: the Armijo step may have collapsed
        // chasing noise, leaving updates below representable resolution
        let mut s = 0.5f64;
        let mut g = obj.gradient(&eval);
        let mut res2 = dot(&g, &g).sqrt();
        while !converged && iterations < options.max_iter {
            iterations += 1;
            let mut cand: Vec<f64> = v.iter().zip(&g).map(|(vi, gi)| vi - s * gi).collect();
            constant_gauge(mu, &mut cand);
            let cand_eval = obj.eval(&cand)?;
            let cand_g = obj.gradient(&cand_eval);
            let cand_res2 = dot(&cand_g, &cand_g).sqrt();
            if cand_res2 < res2 {
                v = cand;
                eval = cand_eval;
                g = cand_g;
                res2 = cand_res2;
                s = (s * 1.5).min(1e4);
                if eval.value < trace.last().expect("trace nonempty").1 {
                    trace.push((iterations, eval.value));
                }
            } else {
                s *= 0.5;
                if s < 1e-14 {
                    break;
                }
            }
            converged = obj.residual(&eval) <= options.tol;
        }
    }

    // translation gauge: shift so the density barycenter is 0
    let mut gauge_shift = vec![0.0; mu.dim()];
    for _ in 0..4 {
        let bary = eval.report.barycenter(mu.dim());
        if norm(&bary) <= 1e-10 {
            break;
        }
        for (i, y) in mu.atoms().iter().enumerate() {
            v[i] -= dot(y, &bary);
        }
        for (gs, bi) in gauge_shift.iter_mut().zip(&bary) {
            *gs -= bi;
        }
        eval = obj.eval(&v)?;
    }
    let log_z = eval.report.log_z;
    let residual = obj.residual(&eval);
    let gradient_norm = dot(&obj.gradient(&eval), &obj.gradient(&eval)).sqrt();

    // unit-mass normalization: u_final = u + ln Z, offsets shift by -ln Z
    let offsets: Vec<f64> = v.iter().map(|vi| vi - log_z).collect();

    Ok(SolveReport {
        offsets,
        log_z,
        gradient_norm,
        objective_trace: trace,
        iterations,
        residual,
        converged,
        gauge: format!(
            "constant mode zeroed against mu each step; translation {:?}; offsets shifted by -log Z = {:.6e} for unit mass",
            gauge_shift, -log_z
        ),
    })
}

/// Zero the mu-weighted constant mode: v -> v - (sum_i mu_i v_i) 1.
fn constant_gauge(mu: &DiscreteMeasure, v: &mut [f64]) {
    let c: f64 = mu.weights().iter().zip(v.iter()).map(|(w, vi)| w * vi).sum();
    for vi in v.iter_mut() {
        *vi -= c;
    }
}

/// The potential described by a solve report.
pub fn report_potential(mu: &DiscreteMeasure, report: &SolveReport) -> Result<MaxAffineConvex> {
    Ok(MaxAffineConvex::new(mu.atoms().to_vec(), report.offsets.clone())?.prune())
}

/// Moment measure of a max-affine u: atoms at the active sites, weights
/// m_i / Z. Returns the measure and the zero-mass (inactive) piece indices.
pub fn moment_measure(u: &MaxAffineConvex) -> Result<(DiscreteMeasure, Vec<usize>)> {
    let pruned = u.prune();
    let report = pruned.integrate_exp_neg()?;
    let fractions = report.cell_mass_fractions(pruned.num_pieces());
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut inactive = Vec::new();
    for (i, f) in fractions.iter().enumerate() {
        if *f > 0.0 {
            atoms.push(pruned.sites()[i].clone());
            weights.push(*f);
        } else {
            inactive.push(i);
        }
    }
    Ok((DiscreteMeasure::new(atoms, weights)?, inactive))
}

/// Both sides of the dimension identity d Z = int x . grad u e^{-u} dx,
/// which holds with equality for max-affine potentials.
#[derive(Debug, Clone, Serialize)]
pub struct MomentIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub z: f64,
}

pub fn verify_moment_identity(u: &MaxAffineConvex) -> Result<MomentIdentity> {
    let pruned = u.prune();
    let report = pruned.integrate_exp_neg()?;
    let d = pruned.dim() as f64;
    // rhs / Z = sum_i y_i . mean_i m_i / Z
    let mut rhs_over_z = 0.0;
    for cell in report.cell_details() {
        let w = (cell.log_mass - report.log_z).exp();
        rhs_over_z += w * dot(&pruned.sites()[cell.piece], &cell.mean);
    }
    let z = report.z;
    Ok(MomentIdentity {
        lhs: d * z,
        rhs: rhs_over_z * z,
        gap: (d - rhs_over_z) * z,
        z,
    })
}

/// | E(rho*) + T(rho*, mu) - J(v*) | with rho* = e^{-u_final} sampled on a
/// grid: the density-side objective evaluated at the recovered density must
/// match the offset-side optimum (d = 1).
pub fn duality_gap(
    mu: &DiscreteMeasure,
    report: &SolveReport,
    half_width: f64,
    cells: usize,
) -> Result<f64> {
    if mu.dim() != 1 {
        return Err(Error::UnsupportedDimension(mu.dim()));
    }
    let u = report_potential(mu, report)?;
    let rho = density_on_grid(&u, -half_width, 2.0 * half_width / cells as f64, cells)?;
    let j_star = objective(mu, &report.offsets)?;
    let entropy = crate::entropy::entropy(&rho);
    let corr = crate::ot::max_correlation_grid(&rho, mu)?.value;
    Ok((entropy + corr - j_star).abs())
}

/// e^{-u} sampled at cell centers and renormalized to unit mass.
pub fn density_on_grid(
    u: &MaxAffineConvex,
    origin: f64,
    spacing: f64,
    cells: usize,
) -> Result<crate::measures::GridDensity> {
    if u.dim() != 1 {
        return Err(Error::UnsupportedDimension(u.dim()));
    }
    let samples: Vec<f64> = (0..cells)
        .map(|c| {
            let x = origin + (c as f64 + 0.5) * spacing;
            (-u.evaluate(&[x]).0).exp()
        })
        .collect();
    crate::measures::GridDensity::from_1d_samples(origin, spacing, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::from_1d(&[-1.0, 1.0], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn objective_of_symmetric_pair() {
        let ln2 = 2.0f64.ln();
        let j = objective(&two_atoms(), &[-ln2, -ln2]).unwrap();
        assert!((j + ln2).abs() < 1e-12, "J = {j}");
    }

    #[test]
    fn objective_constant_gauge_is_exact() {
        let mu = DiscreteMeasure::from_1d(&[-2.0, 0.5, 1.5], &[0.25, 0.5, 0.25])
            .unwrap()
            .center();
        let v = vec![0.3, -0.2, 0.9];
        let j0 = objective(&mu, &v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + 5.0).collect();
        let j1 = objective(&mu, &shifted).unwrap();
        assert!((j0 - j1).abs() < 1e-10);
    }

    #[test]
    fn objective_translation_gauge_for_centered_mu() {
        let mu = DiscreteMeasure::from_1d(&[-2.0, 0.5, 1.5], &[0.25, 0.5, 0.25])
            .unwrap()
            .center();
        let v = vec![0.3, -0.2, 0.9];
        let j0 = objective(&mu, &v).unwrap();
        let w = 0.7;
        let shifted: Vec<f64> = v
            .iter()
            .zip(mu.atoms())
            .map(|(x, y)| x + y[0] * w)
            .collect();
        let j1 = objective(&mu, &shifted).unwrap();
        assert!((j0 - j1).abs() < 1e-9, "J changed by {}", j1 - j0);
    }

    #[test]
    fn gradient_vanishes_at_the_two_atom_optimum() {
        let ln2 = 2.0f64.ln();
        let g = gradient(&two_atoms(), &[-ln2, -ln2]).unwrap();
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
    }

    #[test]
    fn gradient_components_sum_to_zero() {
        let mu = DiscreteMeasure::from_1d(&[-1.5, 0.0, 2.0], &[0.4, 0.35, 0.25])
            .unwrap()
            .center();
        let g = gradient(&mu, &[0.4, -0.1, 1.3]).unwrap();
        let s: f64 = g.iter().sum();
        assert!(s.abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mu = DiscreteMeasure::from_1d(&[-1.5, -0.2, 0.8, 1.7], &[0.3, 0.2, 0.3, 0.2])
            .unwrap()
            .center();
        let v = vec![1.1, 0.05, 0.4, 1.4];
        let g = gradient(&mu, &v).unwrap();
        let h = 1e-5;
        for k in 0..v.len() {
            let mut vp = v.clone();
            vp[k] += h;
            let mut vm = v.clone();
            vm[k] -= h;
            let fd = (objective(&mu, &vp).unwrap() - objective(&mu, &vm).unwrap()) / (2.0 * h);
            assert!(
                (g[k] - fd).abs() < 1e-5,
                "component {k}: analytic {} vs fd {}",
                g[k],
                fd
            );
        }
    }

    #[test]
    fn two_atom_solve_recovers_laplace_potential() {
        let ln2 = 2.0f64.ln();
        let report = solve(&two_atoms(), &SolveOptions::default()).unwrap();
        assert!(report.converged);
        assert!(report.residual <= 1e-8);
        assert!((report.offsets[0] + ln2).abs() < 1e-6, "{:?}", report.offsets);
        assert!((report.offsets[1] + ln2).abs() < 1e-6);
        let u = report_potential(&two_atoms(), &report).unwrap();
        let z = u.integrate_exp_neg().unwrap().z;
        assert!((z - 1.0).abs() < 1e-8);
    }

    #[test]
    fn uncentered_mu_is_rejected_with_guidance() {
        let mu = DiscreteMeasure::from_1d(&[1.0, 2.0], &[0.5, 0.5]).unwrap();
        let err = solve(&mu, &SolveOptions::default()).unwrap_err();
        assert!(err.to_string().contains("center mu first"), "{err}");
    }

    #[test]
    fn hyperplane_supported_mu_is_rejected() {
        let mu = DiscreteMeasure::new(
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(solve(&mu, &SolveOptions::default()).is_err());
    }

    #[test]
    fn four_corner_solve_in_2d() {
        // closed form: u = |x1| + |x2| + 2 ln 2
        let mu = DiscreteMeasure::new(
            vec![
                vec![1.0, 1.0],
                vec![1.0, -1.0],
                vec![-1.0, 1.0],
                vec![-1.0, -1.0],
            ],
            vec![0.25; 4],
        )
        .unwrap();
        let options = SolveOptions {
            tol: 1e-6,
            max_iter: 400,
            ..Default::default()
        };
        let report = solve(&mu, &options).unwrap();
        assert!(report.converged, "residual {}", report.residual);
        let expected = -2.0 * 2.0f64.ln();
        for v in &report.offsets {
            assert!((v - expected).abs() < 1e-4, "offsets {:?}", report.offsets);
        }
    }

    #[test]
    fn moment_measure_of_laplace_potential() {
        let u = crate::convex::MaxAffineConvex::from_1d(
            &[-1.0, 1.0],
            &[-2.0f64.ln(), -2.0f64.ln()],
        )
        .unwrap();
        let (m, inactive) = moment_measure(&u).unwrap();
        assert!(inactive.is_empty());
        assert_eq!(m.len(), 2);
        assert!((m.weights()[0] - 0.5).abs() < 1e-12);
        assert!(crate::numerics::norm(&m.barycenter()) < 1e-6);
    }

    #[test]
    fn moment_identity_closed_forms() {
        let ln2 = 2.0f64.ln();
        let u = crate::convex::MaxAffineConvex::from_1d(&[-1.0, 1.0], &[-ln2, -ln2]).unwrap();
        let id = verify_moment_identity(&u).unwrap();
        assert!((id.lhs - 1.0).abs() < 1e-12);
        assert!((id.rhs - 1.0).abs() < 1e-12);
        assert!(id.gap.abs() <= 1e-6 * id.z);

        // u = max(2x, -x) normalized to unit mass: equality within 1e-8
        let z0 = 1.5f64;
        let u2 = crate::convex::MaxAffineConvex::from_1d(
            &[2.0, -1.0],
            &[-z0.ln(), -z0.ln()],
        )
        .unwrap();
        let id2 = verify_moment_identity(&u2).unwrap();
        assert!(id2.gap.abs() <= 1e-8 * id2.z.max(1.0), "gap {}", id2.gap);
    }

    #[test]
    fn objective_trace_is_strictly_decreasing() {
        let mu = DiscreteMeasure::from_1d(&[-2.0, -0.5, 0.5, 2.0], &[0.2, 0.3, 0.3, 0.2])
            .unwrap()
            .center();
        let report = solve(&mu, &SolveOptions::default()).unwrap();
        assert!(report.converged);
        for w in report.objective_trace.windows(2) {
            assert!(w[1].1 < w[0].1, "trace not strictly decreasing: {w:?}");
        }
    }

    #[test]
    fn duality_gap_two_atoms() {
        let report = solve(&two_atoms(), &SolveOptions::default()).unwrap();
        let gap = duality_gap(&two_atoms(), &report, 18.0, 8192).unwrap();
        assert!(gap < 1e-4, "duality gap {gap}");
    }
}
