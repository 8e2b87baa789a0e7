//! Exact maximal-correlation transport T(rho, mu) = sup int x.y dgamma over
//! couplings, the quadratic Wasserstein distance, Kantorovich duals with
//! complementary slackness, cyclical monotonicity checks, the halfspace
//! witness plan behind the lower bound T >= c(mu) M1(rho), and Wasserstein
//! geodesics.

mod geodesic;
mod quantile;
mod simplex;

pub use geodesic::{
    entropy_geodesic_derivative, geodesic, geodesic_grid_1d, w2_grid_1d, GeodesicPath,
    Grid1dGeodesic, PiecewiseDensity,
};
pub use quantile::{max_correlation_grid, GridCorrelation};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::numerics::{dot, norm};

/// Sparse coupling between two discrete measures.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan {
    pub source_count: usize,
    pub target_count: usize,
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

impl TransportPlan {
    pub fn new(source_count: usize, target_count: usize, entries: Vec<PlanEntry>) -> Self {
        Self {
            source_count,
            target_count,
            entries,
        }
    }

    /// Row sums = source weights, column sums = target weights, total mass 1,
    /// all within 1e-9.
    pub fn validate(&self, source_weights: &[f64], target_weights: &[f64]) -> Result<()> {
        let mut rows = vec![0.0; self.source_count];
        let mut cols = vec![0.0; self.target_count];
        for e in &self.entries {
            if e.mass <= 0.0 {
                return Err(Error::Invalid(format!(
                    "plan entry ({}, {}) has nonpositive mass",
                    e.i, e.j
                )));
            }
            rows[e.i] += e.mass;
            cols[e.j] += e.mass;
        }
        for (k, (r, w)) in rows.iter().zip(source_weights).enumerate() {
            if (r - w).abs() > 1e-9 {
                return Err(Error::Invalid(format!("row {k} sums to {r}, expected {w}")));
            }
        }
        for (k, (c, w)) in cols.iter().zip(target_weights).enumerate() {
            if (c - w).abs() > 1e-9 {
                return Err(Error::Invalid(format!(
                    "column {k} sums to {c}, expected {w}"
                )));
            }
        }
        let total: f64 = self.entries.iter().map(|e| e.mass).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("total plan mass {total} != 1")));
        }
        Ok(())
    }

    /// sum of mass * (x_i . y_j) over entries.
    pub fn correlation_value(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|e| e.mass * dot(&xs[e.i], &ys[e.j]))
            .sum()
    }
}

/// Kantorovich dual pair for the correlation-maximization problem:
/// u_i + u*_j >= x_i . y_j everywhere, with equality on the plan support.
#[derive(Debug, Clone, Serialize)]
pub struct DualPair {
    #[serde(rename = "uOnSource")]
    pub u_on_source: Vec<f64>,
    #[serde(rename = "uStarOnTarget")]
    pub u_star_on_target: Vec<f64>,
}

impl DualPair {
    /// (worst feasibility violation, worst slackness violation on entries).
    pub fn check(&self, xs: &[Vec<f64>], ys: &[Vec<f64>], plan: &TransportPlan) -> (f64, f64) {
        let mut feas: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                feas = feas.max(dot(x, y) - self.u_on_source[i] - self.u_star_on_target[j]);
            }
        }
        let mut slack: f64 = 0.0;
        for e in &plan.entries {
            slack = slack.max(
                (self.u_on_source[e.i] + self.u_star_on_target[e.j]
                    - dot(&xs[e.i], &ys[e.j]))
                .abs(),
            );
        }
        (feas, slack)
    }

    pub fn objective(&self, source_weights: &[f64], target_weights: &[f64]) -> f64 {
        let a: f64 = self
            .u_on_source
            .iter()
            .zip(source_weights)
            .map(|(u, w)| u * w)
            .sum();
        let b: f64 = self
            .u_star_on_target
            .iter()
            .zip(target_weights)
            .map(|(u, w)| u * w)
            .sum();
        a + b
    }
}

/// Output of the exact maximal-correlation solve.
#[derive(Debug, Clone)]
pub struct MaxCorrelation {
    pub value: f64,
    pub plan: TransportPlan,
    pub duals: DualPair,
}

/// Deterministic dual gauge: shift the additive constant so that
/// min_j (u*_j - |y_j|^2 / 2) = 0.
fn normalize_duals(u: &mut [f64], u_star: &mut [f64], ys: &[Vec<f64>]) {
    let c = u_star
        .iter()
        .zip(ys)
        .map(|(v, y)| v - 0.5 * dot(y, y))
        .fold(f64::INFINITY, f64::min);
    for v in u_star.iter_mut() {
        *v -= c;
    }
    for v in u.iter_mut() {
        *v += c;
    }
}

/// Comonotone (sorted) coupling of two 1-D discrete measures.
fn comonotone_entries(
    xs: &[f64],
    a: &[f64],
    ys: &[f64],
    b: &[f64],
) -> (Vec<usize>, Vec<usize>, Vec<PlanEntry>) {
    let mut src: Vec<usize> = (0..xs.len()).collect();
    src.sort_by(|&p, &q| xs[p].partial_cmp(&xs[q]).unwrap());
    let mut tgt: Vec<usize> = (0..ys.len()).collect();
    tgt.sort_by(|&p, &q| ys[p].partial_cmp(&ys[q]).unwrap());
    let mut entries = Vec::with_capacity(xs.len() + ys.len());
    let mut ra = a[src[0]];
    let mut rb = b[tgt[0]];
    let (mut p, mut q) = (0usize, 0usize);
    loop {
        let m = ra.min(rb);
        if m > 0.0 {
            entries.push(PlanEntry {
                i: src[p],
                j: tgt[q],
                mass: m,
            });
        }
        ra -= m;
        rb -= m;
        let step_src = ra <= 1e-15 && p + 1 < src.len();
        let step_tgt = rb <= 1e-15 && q + 1 < tgt.len();
        if !step_src && !step_tgt {
            break;
        }
        if step_src {
            p += 1;
            ra = a[src[p]];
        }
        if step_tgt {
            q += 1;
            rb = b[tgt[q]];
        }
    }
    (src, tgt, entries)
}

/// Duals for the 1-D comonotone plan: u is the integral of the monotone map
/// (slope = largest target matched to each source atom), u* its conjugate on
/// the target atoms.
fn duals_1d(
    xs: &[f64],
    ys: &[f64],
    src: &[usize],
    tgt: &[usize],
    entries: &[PlanEntry],
) -> (Vec<f64>, Vec<f64>) {
    let m = xs.len();
    // largest matched target per source atom, in source-sorted order
    let mut y_last = vec![f64::NEG_INFINITY; m];
    for e in entries {
        y_last[e.i] = y_last[e.i].max(ys[e.j]);
    }
    let mut u = vec![0.0; m];
    for w in src.windows(2) {
        let (k, k1) = (w[0], w[1]);
        u[k1] = u[k] + (xs[k1] - xs[k]) * y_last[k];
    }
    let mut u_star = vec![f64::NEG_INFINITY; ys.len()];
    for &j in tgt {
        for &i in src {
            u_star[j] = u_star[j].max(xs[i] * ys[j] - u[i]);
        }
    }
    (u, u_star)
}

/// T(rho, mu) = sup over couplings of int x . y, solved exactly: sorted
/// (comonotone) coupling in d = 1, transportation simplex otherwise.
/// Returns the optimal value, an optimal plan and a feasible dual pair with
/// complementary slackness on the plan support.
pub fn max_correlation(rho: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<MaxCorrelation> {
    if rho.dim() != mu.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), mu.dim()));
    }
    let xs = rho.atoms();
    let ys = mu.atoms();
    let (plan, mut u, mut u_star) = if rho.dim() == 1 {
        let x1: Vec<f64> = xs.iter().map(|a| a[0]).collect();
        let y1: Vec<f64> = ys.iter().map(|a| a[0]).collect();
        let (src, tgt, entries) = comonotone_entries(&x1, rho.weights(), &y1, mu.weights());
        let (u, u_star) = duals_1d(&x1, &y1, &src, &tgt, &entries);
        (
            TransportPlan::new(xs.len(), ys.len(), entries),
            u,
            u_star,
        )
    } else {
        let cost = |i: usize, j: usize| -dot(&xs[i], &ys[j]);
        let sol = simplex::solve_transportation(rho.weights(), mu.weights(), &cost)?;
        let entries = sol
            .entries
            .iter()
            .map(|&(i, j, mass)| PlanEntry { i, j, mass })
            .collect();
        let u = sol.potentials_source.iter().map(|p| -p).collect();
        let u_star = sol.potentials_target.iter().map(|p| -p).collect();
        (TransportPlan::new(xs.len(), ys.len(), entries), u, u_star)
    };
    normalize_duals(&mut u, &mut u_star, ys);
    let value = plan.correlation_value(xs, ys);
    Ok(MaxCorrelation {
        value,
        plan,
        duals: DualPair {
            u_on_source: u,
            u_star_on_target: u_star,
        },
    })
}

/// Quadratic Wasserstein distance between discrete measures, from the same
/// exact machinery with cost |x - y|^2.
pub fn w2_distance(rho: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<f64> {
    if rho.dim() != mu.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), mu.dim()));
    }
    let xs = rho.atoms();
    let ys = mu.atoms();
    let sq = |i: usize, j: usize| {
        let d = crate::numerics::sub(&xs[i], &ys[j]);
        dot(&d, &d)
    };
    let value = if rho.dim() == 1 {
        let x1: Vec<f64> = xs.iter().map(|a| a[0]).collect();
        let y1: Vec<f64> = ys.iter().map(|a| a[0]).collect();
        let (_, _, entries) = comonotone_entries(&x1, rho.weights(), &y1, mu.weights());
        entries
            .iter()
            .map(|e| e.mass * (x1[e.i] - y1[e.j]).powi(2))
            .sum()
    } else {
        simplex::solve_transportation(rho.weights(), mu.weights(), &sq)?.cost
    };
    Ok(value.max(0.0).sqrt())
}

/// Two-cycle exchange test for the support of a correlation-maximizing plan:
/// x.y + x'.y' >= x.y' + x'.y within 1e-9 for every pair of entries.
pub fn check_cyclical_monotonicity(
    plan: &TransportPlan,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> bool {
    let e = &plan.entries;
    for p in 0..e.len() {
        for q in (p + 1)..e.len() {
            let (x, y) = (&xs[e[p].i], &ys[e[p].j]);
            let (x2, y2) = (&xs[e[q].i], &ys[e[q].j]);
            if dot(x, y) + dot(x2, y2) < dot(x, y2) + dot(x2, y) - 1e-9 {
                return false;
            }
        }
    }
    true
}

/// Feasible plan built from the halfspace construction behind the lower
/// bound T(rho, mu) >= c(mu) M1(rho).
#[derive(Debug, Clone)]
pub struct WitnessPlan {
    pub plan: TransportPlan,
    pub value: f64,
    pub direction: Vec<f64>,
}

/// Split a centered rho at the hyperplane through 0 maximizing the one-sided
/// mass integral, split mu at the matching quantile along the same direction,
/// and couple the two halves by tensor products.
pub fn witness_halfspace_plan(
    rho: &DiscreteMeasure,
    mu: &DiscreteMeasure,
) -> Result<WitnessPlan> {
    if rho.dim() != mu.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), mu.dim()));
    }
    if norm(&rho.barycenter()) > 1e-9 {
        return Err(Error::Invalid(
            "witness plan requires a centered source measure".into(),
        ));
    }
    let d = rho.dim();
    let mut e = best_split_direction(rho)?;

    // rho must give no mass to the splitting hyperplane; rotate slightly if
    // needed (deterministic perturbations of size <= 1e-9 per attempt).
    let scale = rho
        .atoms()
        .iter()
        .map(|a| norm(a))
        .fold(0.0f64, f64::max)
        .max(1.0);
    'perturb: for attempt in 0..64 {
        let on_plane = rho
            .atoms()
            .iter()
            .any(|a| dot(a, &e).abs() <= 1e-12 * scale);
        if !on_plane {
            break 'perturb;
        }
        let k = attempt % d;
        e[k] += 1e-9 * (attempt as f64 + 1.0) / 64.0;
        let n = norm(&e);
        for x in &mut e {
            *x /= n;
        }
    }

    let mut m_plus = 0.0;
    let mut v_plus = vec![0.0; d];
    for (a, &w) in rho.atoms().iter().zip(rho.weights()) {
        if dot(a, &e) > 0.0 {
            m_plus += w;
            for (vp, x) in v_plus.iter_mut().zip(a) {
                *vp += w * x;
            }
        }
    }
    let m_minus = 1.0 - m_plus;
    if m_plus <= 0.0 || m_minus <= 0.0 {
        return Err(Error::Invalid(
            "degenerate split: all source mass on one side of the hyperplane".into(),
        ));
    }

    // split mu at the m_minus quantile of its projections along e
    let projs: Vec<f64> = mu.atoms().iter().map(|a| dot(a, &e)).collect();
    let mut order: Vec<usize> = (0..projs.len()).collect();
    order.sort_by(|&p, &q| projs[p].partial_cmp(&projs[q]).unwrap());
    let mut mu_minus = vec![0.0; projs.len()];
    let mut mu_plus = vec![0.0; projs.len()];
    let mut remaining_minus = m_minus;
    for &j in &order {
        let w = mu.weights()[j];
        let to_minus = w.min(remaining_minus).max(0.0);
        mu_minus[j] = to_minus;
        mu_plus[j] = w - to_minus;
        remaining_minus -= to_minus;
    }

    // tensor couplings on each side
    let mut entries = Vec::new();
    for (i, (a, &w)) in rho.atoms().iter().zip(rho.weights()).enumerate() {
        let plus_side = dot(a, &e) > 0.0;
        let (side_mass, side_mu) = if plus_side {
            (m_plus, &mu_plus)
        } else {
            (m_minus, &mu_minus)
        };
        for (j, &mw) in side_mu.iter().enumerate() {
            let mass = w * mw / side_mass;
            if mass > 0.0 {
                entries.push(PlanEntry { i, j, mass });
            }
        }
    }
    let plan = TransportPlan::new(rho.len(), mu.len(), entries);
    plan.validate(rho.weights(), mu.weights())?;
    let value = plan.correlation_value(rho.atoms(), mu.atoms());
    Ok(WitnessPlan {
        plan,
        value,
        direction: e,
    })
}

/// Direction maximizing e -> int (x . e)_+ drho. Exact sign comparison in
/// d = 1; certified angular search plus a fixed-point polish (e proportional
/// to the one-sided barycenter) in d = 2; seeded multi-start for d >= 3.
fn best_split_direction(rho: &DiscreteMeasure) -> Result<Vec<f64>> {
    let d = rho.dim();
    let one_sided = |e: &[f64]| -> f64 {
        rho.atoms()
            .iter()
            .zip(rho.weights())
            .map(|(a, &w)| w * dot(a, e).max(0.0))
            .sum()
    };
    let polish = |mut e: Vec<f64>| -> Vec<f64> {
        for _ in 0..64 {
            let mut v = vec![0.0; d];
            for (a, &w) in rho.atoms().iter().zip(rho.weights()) {
                if dot(a, &e) > 0.0 {
                    for (vi, x) in v.iter_mut().zip(a) {
                        *vi += w * x;
                    }
                }
            }
            let n = norm(&v);
            if n < 1e-300 {
                break;
            }
            let next: Vec<f64> = v.iter().map(|x| x / n).collect();
            if crate::numerics::norm(&crate::numerics::sub(&next, &e)) < 1e-15 {
                break;
            }
            e = next;
        }
        e
    };
    match d {
        1 => {
            let plus = one_sided(&[1.0]);
            let minus = one_sided(&[-1.0]);
            Ok(if plus >= minus { vec![1.0] } else { vec![-1.0] })
        }
        2 => {
            let lipschitz = rho.first_moment().max(1e-300);
            let f = |theta: f64| -one_sided(&[theta.cos(), theta.sin()]);
            let (theta, _, _) = crate::numerics::lipschitz_global_min(
                &f,
                0.0,
                2.0 * std::f64::consts::PI,
                lipschitz,
                1e-9 * lipschitz,
                720,
            );
            Ok(polish(vec![theta.cos(), theta.sin()]))
        }
        _ => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x57495448);
            let mut best = vec![0.0; d];
            let mut best_val = f64::NEG_INFINITY;
            for _ in 0..256 {
                let mut e: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let n = norm(&e);
                if n < 1e-9 {
                    continue;
                }
                for x in &mut e {
                    *x /= n;
                }
                let e = polish(e);
                let v = one_sided(&e);
                if v > best_val {
                    best_val = v;
                    best = e;
                }
            }
            Ok(best)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;

    fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::from_1d(&[-1.0, 1.0], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn correlation_with_point_mass_is_zero() {
        // all products x . 0 vanish
        let rho = DiscreteMeasure::from_1d(&[-2.0, 0.5, 1.5], &[0.25, 0.5, 0.25]).unwrap();
        let mu = DiscreteMeasure::from_1d(&[0.0], &[1.0]).unwrap();
        let r = max_correlation(&rho, &mu).unwrap();
        assert!(r.value.abs() < 1e-15);
    }

    #[test]
    fn two_atom_self_correlation_is_comonotone() {
        // brute force over the two extreme couplings: identity gives 1,
        // the swap gives -1
        let m = two_atoms();
        let r = max_correlation(&m, &m).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        r.plan.validate(m.weights(), m.weights()).unwrap();
        let (feas, slack) = r.duals.check(m.atoms(), m.atoms(), &r.plan);
        assert!(feas <= 1e-9, "feasibility violation {feas}");
        assert!(slack <= 1e-9, "slackness violation {slack}");
        let gap = (r.duals.objective(m.weights(), m.weights()) - r.value).abs();
        assert!(gap <= 1e-8, "duality gap {gap}");
    }

    #[test]
    fn centered_measures_have_nonnegative_correlation() {
        // the product coupling gives value 0, so the sup is >= 0
        let rho = DiscreteMeasure::from_1d(&[-3.0, 1.0], &[0.25, 0.75]).unwrap();
        let mu = DiscreteMeasure::new(
            vec![vec![-1.0], vec![0.25], vec![1.5]],
            vec![0.4, 0.3, 0.3],
        )
        .unwrap()
        .center();
        let r = max_correlation(&rho, &mu).unwrap();
        assert!(r.value >= -1e-12);
    }

    #[test]
    fn w2_of_identical_measures_is_zero() {
        let m = two_atoms();
        assert!(w2_distance(&m, &m).unwrap() < 1e-12);
    }

    #[test]
    fn w2_between_point_masses_is_their_distance() {
        let a = DiscreteMeasure::new(vec![vec![0.0, 1.0]], vec![1.0]).unwrap();
        let b = DiscreteMeasure::new(vec![vec![3.0, 5.0]], vec![1.0]).unwrap();
        assert!((w2_distance(&a, &b).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn moments_identity_links_t_and_w2() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let d = rng.gen_range(1..3usize);
            let n1 = rng.gen_range(2..8);
            let n2 = rng.gen_range(2..8);
            let gen = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
                let atoms: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                    .collect();
                let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
                let t: f64 = w.iter().sum();
                for x in &mut w {
                    *x /= t;
                }
                DiscreteMeasure::new(atoms, w).unwrap()
            };
            let rho = gen(&mut rng, n1);
            let mu = gen(&mut rng, n2);
            let t = max_correlation(&rho, &mu).unwrap().value;
            let w2 = w2_distance(&rho, &mu).unwrap();
            let identity =
                0.5 * rho.second_moment() + 0.5 * mu.second_moment() - 0.5 * w2 * w2;
            assert!(
                (t - identity).abs() < 1e-8,
                "T = {t}, moments identity gives {identity}"
            );
        }
    }

    #[test]
    fn optimal_plans_are_cyclically_monotone() {
        let rho = DiscreteMeasure::new(
            vec![vec![-1.0, 0.5], vec![0.5, -1.5], vec![1.0, 1.0]],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        let mu = DiscreteMeasure::new(
            vec![vec![0.0, 1.0], vec![-1.0, -1.0], vec![2.0, 0.0]],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        let r = max_correlation(&rho, &mu).unwrap();
        assert!(check_cyclical_monotonicity(&r.plan, rho.atoms(), mu.atoms()));
    }

    #[test]
    fn anti_monotone_coupling_fails_the_check() {
        let m = two_atoms();
        let plan = TransportPlan::new(
            2,
            2,
            vec![
                PlanEntry { i: 0, j: 1, mass: 0.5 },
                PlanEntry { i: 1, j: 0, mass: 0.5 },
            ],
        );
        assert!(!check_cyclical_monotonicity(&plan, m.atoms(), m.atoms()));
    }

    #[test]
    fn single_entry_plan_is_trivially_monotone() {
        let a = DiscreteMeasure::from_1d(&[2.0], &[1.0]).unwrap();
        let b = DiscreteMeasure::from_1d(&[-4.0], &[1.0]).unwrap();
        let plan = TransportPlan::new(1, 1, vec![PlanEntry { i: 0, j: 0, mass: 1.0 }]);
        assert!(check_cyclical_monotonicity(&plan, a.atoms(), b.atoms()));
    }

    #[test]
    fn witness_plan_is_exact_for_symmetric_pair() {
        let m = two_atoms();
        let w = witness_halfspace_plan(&m, &m).unwrap();
        assert!((w.value - 1.0).abs() < 1e-12);
        w.plan.validate(m.weights(), m.weights()).unwrap();
    }

    #[test]
    fn witness_value_is_feasible_and_above_cmu_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let d = rng.gen_range(1..3usize);
            let n = rng.gen_range(2..7);
            let atoms: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let t: f64 = w.iter().sum();
            for x in &mut w {
                *x /= t;
            }
            let rho = DiscreteMeasure::new(atoms.clone(), w.clone()).unwrap().center();
            let atoms2: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let mu = DiscreteMeasure::new(atoms2, w).unwrap();
            let witness = match witness_halfspace_plan(&rho, &mu) {
                Ok(w) => w,
                Err(_) => continue,
            };
            let t_opt = max_correlation(&rho, &mu).unwrap().value;
            assert!(
                witness.value <= t_opt + 1e-9,
                "witness {} exceeds optimum {}",
                witness.value,
                t_opt
            );
            let bound = mu.c_mu() * rho.first_moment();
            assert!(
                witness.value >= bound - 1e-6,
                "witness {} below bound {}",
                witness.value,
                bound
            );
        }
    }

    #[test]
    fn translation_invariance_for_centered_target() {
        let rho = DiscreteMeasure::from_1d(&[-1.0, 0.3, 2.0], &[0.3, 0.4, 0.3]).unwrap();
        let mu = two_atoms();
        let base = max_correlation(&rho, &mu).unwrap().value;
        let shifted = max_correlation(&rho.translate(&[7.5]), &mu).unwrap().value;
        assert!((base - shifted).abs() <= 1e-9);
    }
}
