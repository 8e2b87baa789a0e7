//! Seeded invariant suites for every module, shared by `mmflow verify` and
//! the acceptance tests. Each check returns a pass/fail outcome with a
//! one-line numeric summary instead of panicking, so the CLI can print the
//! whole table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex::{integrate_exp_neg_monte_carlo, CellDecomposition, MaxAffineConvex};
use crate::entropy::{e1_cell_integrands, entropy, entropy_lower_bound_constant};
use crate::measures::{DiscreteMeasure, GridDensity};
use crate::numerics::{dot, norm};
use crate::ot;
use crate::primal;
use crate::solver;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(module: &'static str, name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        module,
        name,
        passed,
        detail,
    }
}

pub const MODULES: [&str; 6] = ["measures", "entropy", "ot", "convex", "solver", "primal"];

/// Run one module's invariant suite.
pub fn run_module(module: &str, seed: u64) -> crate::Result<Vec<CheckOutcome>> {
    match module {
        "measures" => Ok(measures_suite(seed)),
        "entropy" => Ok(entropy_suite(seed)),
        "ot" => Ok(ot_suite(seed)),
        "convex" => Ok(convex_suite(seed)),
        "solver" => Ok(solver_suite(seed)),
        "primal" => Ok(primal_suite(seed)),
        other => Err(crate::Error::Invalid(format!(
            "unknown module {other}; expected one of {MODULES:?}"
        ))),
    }
}

/// Run every module's suite.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    MODULES
        .iter()
        .flat_map(|m| run_module(m, seed).expect("known module"))
        .collect()
}

// ---------------------------------------------------------------------------
// random instance generators
// ---------------------------------------------------------------------------

pub fn random_discrete(rng: &mut ChaCha8Rng, dim: usize, max_atoms: usize) -> DiscreteMeasure {
    let n = rng.gen_range(2..=max_atoms.max(2));
    loop {
        let atoms: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.5..2.5)).collect())
            .collect();
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        if let Ok(m) = DiscreteMeasure::new(atoms, w) {
            if m.len() >= 2 {
                return m;
            }
        }
    }
}

/// Random centered, full-dimensional discrete measure.
pub fn random_full_dimensional(
    rng: &mut ChaCha8Rng,
    dim: usize,
    max_atoms: usize,
) -> DiscreteMeasure {
    loop {
        let m = random_discrete(rng, dim, max_atoms).center();
        if !m.hyperplane_check().degenerate && m.len() > dim {
            return m;
        }
    }
}

/// Random pruned max-affine function with an integrable e^{-u}.
pub fn random_integrable_potential(rng: &mut ChaCha8Rng, dim: usize) -> MaxAffineConvex {
    loop {
        let n = rng.gen_range(dim + 2..dim + 8);
        let mut sites: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        // center the sites so 0 tends to be interior to their hull
        let mean: Vec<f64> = (0..dim)
            .map(|k| sites.iter().map(|s| s[k]).sum::<f64>() / n as f64)
            .collect();
        for s in &mut sites {
            for (x, m) in s.iter_mut().zip(&mean) {
                *x -= m;
            }
        }
        let offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Ok(u) = MaxAffineConvex::new(sites, offsets) else {
            continue;
        };
        let u = u.prune();
        if u.recession_check().interior {
            return u;
        }
    }
}

// ---------------------------------------------------------------------------
// measures
// ---------------------------------------------------------------------------

fn measures_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // centering is exactly idempotent
    let mut worst = 0.0f64;
    let mut pass = true;
    for _ in 0..50 {
        let d = rng.gen_range(1..3usize);
        let m = random_discrete(&mut rng, d, 10);
        let c = m.center();
        if c.center() != c {
            pass = false;
        }
        worst = worst.max(norm(&c.barycenter()));
    }
    out.push(outcome(
        "measures",
        "center is idempotent, barycenter(center) = 0",
        pass && worst <= 1e-12,
        format!("worst |barycenter| = {worst:.2e}"),
    ));

    // truncation preserves mass and barycenter
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.gen_range(1..3usize);
        let m = random_discrete(&mut rng, d, 12);
        let radius = rng.gen_range(0.3..3.0);
        let t = m.truncate_with_atom(radius);
        let mass: f64 = t.weights().iter().sum();
        worst = worst.max((mass - 1.0).abs());
        worst = worst.max(norm(&crate::numerics::sub(&t.barycenter(), &m.barycenter())));
    }
    out.push(outcome(
        "measures",
        "truncation preserves mass and barycenter (1e-12)",
        worst <= 1e-12,
        format!("worst drift = {worst:.2e}"),
    ));

    // Jensen step: convex integrals only decrease under tail collapse
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let d = rng.gen_range(1..3usize);
        let m = random_discrete(&mut rng, d, 12);
        let radius = rng.gen_range(0.3..3.0);
        let t = m.truncate_with_atom(radius);
        let n_pieces = rng.gen_range(2..6);
        let sites: Vec<Vec<f64>> = (0..n_pieces)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let offsets: Vec<f64> = (0..n_pieces).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Ok(u) = MaxAffineConvex::new(sites, offsets) else {
            continue;
        };
        let int = |meas: &DiscreteMeasure| -> f64 {
            meas.atoms()
                .iter()
                .zip(meas.weights())
                .map(|(a, &w)| w * u.evaluate(a).0)
                .sum()
        };
        worst = worst.max(int(&t) - int(&m));
    }
    out.push(outcome(
        "measures",
        "int u* d(truncated mu) <= int u* dmu + 1e-10",
        worst <= 1e-10,
        format!("worst increase = {worst:.2e}"),
    ));

    // c_mu: rotation invariance and dilation scaling in d = 2
    let mut worst_rot = 0.0f64;
    let mut worst_scale = 0.0f64;
    for _ in 0..10 {
        let m = random_discrete(&mut rng, 2, 8);
        let c = m.c_mu();
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (cs, sn) = (angle.cos(), angle.sin());
        let rotated = DiscreteMeasure::new(
            m.atoms()
                .iter()
                .map(|a| vec![cs * a[0] - sn * a[1], sn * a[0] + cs * a[1]])
                .collect(),
            m.weights().to_vec(),
        )
        .unwrap();
        worst_rot = worst_rot.max((rotated.c_mu() - c).abs());
        let s: f64 = rng.gen_range(0.5..3.0);
        let dilated = DiscreteMeasure::new(
            m.atoms()
                .iter()
                .map(|a| a.iter().map(|x| s * x).collect())
                .collect(),
            m.weights().to_vec(),
        )
        .unwrap();
        worst_scale = worst_scale.max((dilated.c_mu() - s * c).abs() / s.max(1.0));
    }
    out.push(outcome(
        "measures",
        "c_mu rotation invariance and linear dilation (1e-6)",
        worst_rot <= 1e-6 && worst_scale <= 1e-6,
        format!("rotation drift {worst_rot:.2e}, dilation drift {worst_scale:.2e}"),
    ));

    // degenerate support forces c_mu to zero
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = rng.gen_range(2..6);
        let dir: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (cs, sn) = (dir.cos(), dir.sin());
        let offset: f64 = rng.gen_range(-1.0..1.0);
        let atoms: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let t: f64 = rng.gen_range(-2.0..2.0);
                vec![t * cs - offset * sn, t * sn + offset * cs]
            })
            .collect();
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        let Ok(m) = DiscreteMeasure::new(atoms, w) else {
            continue;
        };
        if m.hyperplane_check().degenerate {
            worst = worst.max(m.c_mu());
        }
    }
    out.push(outcome(
        "measures",
        "hyperplane support implies c_mu <= 1e-6",
        worst <= 1e-6,
        format!("worst c_mu on degenerate input = {worst:.2e}"),
    ));

    out
}

// ---------------------------------------------------------------------------
// entropy
// ---------------------------------------------------------------------------

fn entropy_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE17);
    let mut out = Vec::new();
    let c1 = entropy_lower_bound_constant(1).expect("d=1 constant");

    let mut worst = f64::NEG_INFINITY;
    let mut e1_bad = 0usize;
    for _ in 0..200 {
        let rho = primal::random_mixture_density(&mut rng, 8.0, 512);
        let slack = -c1 - rho.first_moment().sqrt() - entropy(&rho);
        worst = worst.max(slack);
        if e1_cell_integrands(&rho).iter().any(|&v| v < 0.0) {
            e1_bad += 1;
        }
    }
    out.push(outcome(
        "entropy",
        "E >= -C_1 - sqrt(M1) on 200 random densities",
        worst <= 1e-9,
        format!("worst bound violation = {worst:.2e}"),
    ));
    out.push(outcome(
        "entropy",
        "E1 integrand nonnegative cellwise",
        e1_bad == 0,
        format!("{e1_bad} densities with a negative cell"),
    ));

    // translation invariance is exact; dilation shifts by -ln s
    let mut worst_shift = 0.0f64;
    let mut worst_scale = 0.0f64;
    for _ in 0..50 {
        let rho = primal::random_mixture_density(&mut rng, 8.0, 512);
        let e = entropy(&rho);
        // identical samples through the same constructor, different origin
        let base = GridDensity::from_1d_samples(rho.origin()[0], rho.spacing()[0], rho.values())
            .unwrap();
        let shifted = GridDensity::from_1d_samples(
            rho.origin()[0] + rng.gen_range(-5.0..5.0),
            rho.spacing()[0],
            rho.values(),
        )
        .unwrap();
        if entropy(&shifted) != entropy(&base) {
            worst_shift = worst_shift.max((entropy(&shifted) - entropy(&base)).abs().max(1.0));
        }
        let s: f64 = rng.gen_range(0.5..3.0);
        let dilated = GridDensity::new(
            vec![rho.origin()[0] * s],
            vec![rho.spacing()[0] * s],
            rho.shape().to_vec(),
            rho.values().iter().map(|v| v / s).collect(),
        )
        .unwrap();
        worst_scale = worst_scale.max((entropy(&dilated) - (e - s.ln())).abs());
    }
    out.push(outcome(
        "entropy",
        "translation exact; dilation shifts E by -ln s (1e-6)",
        worst_shift == 0.0 && worst_scale <= 1e-6,
        format!("shift drift {worst_shift:.2e}, scale drift {worst_scale:.2e}"),
    ));

    out
}

// ---------------------------------------------------------------------------
// ot
// ---------------------------------------------------------------------------

fn ot_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x07);
    let mut out = Vec::new();

    // translation invariance of T for centered mu
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = rng.gen_range(1..3usize);
        let rho = random_discrete(&mut rng, d, 8);
        let mu = random_discrete(&mut rng, d, 8).center();
        let base = ot::max_correlation(&rho, &mu).unwrap().value;
        let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let moved = ot::max_correlation(&rho.translate(&shift), &mu).unwrap().value;
        worst = worst.max((base - moved).abs());
    }
    out.push(outcome(
        "ot",
        "T translation invariance for centered mu (1e-9)",
        worst <= 1e-9,
        format!("worst drift = {worst:.2e}"),
    ));

    // duality gap, complementary slackness, cyclical monotonicity, support
    // bound on random instances
    let mut worst_gap = 0.0f64;
    let mut worst_feas = 0.0f64;
    let mut worst_slack = 0.0f64;
    let mut monotone_failures = 0usize;
    let mut worst_support = f64::NEG_INFINITY;
    for _ in 0..60 {
        let d = rng.gen_range(1..3usize);
        // both marginals centered: the support bound integrates the 2-cycle
        // inequality against both barycenters
        let rho = random_discrete(&mut rng, d, 10).center();
        let mu = random_discrete(&mut rng, d, 10).center();
        let r = ot::max_correlation(&rho, &mu).unwrap();
        r.plan.validate(rho.weights(), mu.weights()).unwrap();
        let gap = (r.duals.objective(rho.weights(), mu.weights()) - r.value).abs();
        worst_gap = worst_gap.max(gap);
        let (feas, slack) = r.duals.check(rho.atoms(), mu.atoms(), &r.plan);
        worst_feas = worst_feas.max(feas);
        worst_slack = worst_slack.max(slack);
        if !ot::check_cyclical_monotonicity(&r.plan, rho.atoms(), mu.atoms()) {
            monotone_failures += 1;
        }
        for e in &r.plan.entries {
            let prod = dot(&rho.atoms()[e.i], &mu.atoms()[e.j]);
            worst_support = worst_support.max(-(prod + r.value));
        }
    }
    out.push(outcome(
        "ot",
        "LP duality gap <= 1e-8, duals feasible and slack on support",
        worst_gap <= 1e-8 && worst_feas <= 1e-9 && worst_slack <= 1e-9,
        format!("gap {worst_gap:.2e}, feasibility {worst_feas:.2e}, slackness {worst_slack:.2e}"),
    ));
    out.push(outcome(
        "ot",
        "optimal plans cyclically monotone; entries obey x.y >= -T - 1e-9",
        monotone_failures == 0 && worst_support <= 1e-9,
        format!("{monotone_failures} monotonicity failures, worst support excess {worst_support:.2e}"),
    ));

    // lower bound T >= c(mu) M1(rho) via the witness plan
    let mut worst = f64::NEG_INFINITY;
    let mut worst_witness = f64::NEG_INFINITY;
    for k in 0..100 {
        let d = 1 + (k % 2);
        let rho = random_full_dimensional(&mut rng, d, 10);
        let mu = random_full_dimensional(&mut rng, d, 10);
        let t = ot::max_correlation(&rho, &mu).unwrap().value;
        let bound = mu.c_mu() * rho.first_moment();
        worst = worst.max(bound - t);
        if let Ok(w) = ot::witness_halfspace_plan(&rho, &mu) {
            worst_witness = worst_witness.max(bound - w.value);
            worst = worst.max(w.value - t - 1e-9);
        }
    }
    out.push(outcome(
        "ot",
        "T >= c(mu) M1(rho) - 1e-6 on 100 centered full-dim pairs",
        worst <= 1e-6 && worst_witness <= 1e-6,
        format!("worst deficit {worst:.2e} (witness {worst_witness:.2e})"),
    ));

    // truncation approximation is monotone and converges
    let mut worst_exceed = f64::NEG_INFINITY;
    let mut worst_monotone = f64::NEG_INFINITY;
    let mut worst_limit = 0.0f64;
    for _ in 0..30 {
        let d = rng.gen_range(1..3usize);
        let rho = random_discrete(&mut rng, d, 8);
        let mu = random_discrete(&mut rng, d, 8).center();
        let t_full = ot::max_correlation(&rho, &mu).unwrap().value;
        let max_radius = mu.atoms().iter().map(|a| norm(a)).fold(0.0f64, f64::max);
        let mut prev = f64::NEG_INFINITY;
        for step in 1..=5 {
            let radius = max_radius * step as f64 / 4.0;
            let mu_n = mu.truncate_with_atom(radius);
            let t_n = ot::max_correlation(&rho, &mu_n).unwrap().value;
            worst_exceed = worst_exceed.max(t_n - t_full - 1e-9);
            worst_monotone = worst_monotone.max(prev - t_n - 1e-9);
            prev = t_n;
            if step == 5 {
                worst_limit = worst_limit.max((t_n - t_full).abs());
            }
        }
    }
    out.push(outcome(
        "ot",
        "T(rho, truncated mu) <= T, nondecreasing, converging",
        worst_exceed <= 0.0 && worst_monotone <= 0.0 && worst_limit <= 1e-9,
        format!(
            "excess {worst_exceed:.2e}, monotonicity {worst_monotone:.2e}, limit gap {worst_limit:.2e}"
        ),
    ));

    // displacement convexity of T along grid geodesics + derivative bound
    let mu = random_full_dimensional(&mut rng, 1, 6);
    let conv = primal::displacement_convexity_suite(30, &mu, seed ^ 0xD15).unwrap();
    out.push(outcome(
        "ot",
        "t -> T(rho_t, mu) midpoint-convex along 30 geodesics (1e-7)",
        conv.correlation_violations == 0,
        format!("max defect {:.2e}", conv.max_correlation_defect),
    ));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let rho0 = primal::random_mixture_density(&mut rng, 8.0, 1024);
        let rho1 = primal::random_mixture_density(&mut rng, 8.0, 1024);
        let mu = random_full_dimensional(&mut rng, 1, 6);
        let geo = ot::geodesic_grid_1d(&rho0, &rho1).unwrap();
        let h = 1e-4;
        let t0 = geo.density_at(0.0).correlation_with(&mu).unwrap();
        let th = geo.density_at(h).correlation_with(&mu).unwrap();
        let bound = geo.correlation_derivative_bound(&mu).unwrap();
        worst = worst.max(bound - (th - t0) / h);
    }
    out.push(outcome(
        "ot",
        "one-sided dT/dt at 0 >= int (T - id).y dgamma - 1e-3",
        worst <= 1e-3,
        format!("worst deficit = {worst:.2e}"),
    ));

    out
}

// ---------------------------------------------------------------------------
// convex
// ---------------------------------------------------------------------------

fn convex_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0);
    let mut out = Vec::new();

    // double conjugation is the identity on convex grid functions
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 8001;
        let xs: Vec<f64> = (0..n).map(|i| -4.0 + 8.0 * i as f64 / (n - 1) as f64).collect();
        let a: f64 = rng.gen_range(0.3..2.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let f: Vec<f64> = xs.iter().map(|&x| 0.5 * a * x * x + b * x).collect();
        let ys: Vec<f64> = (0..16001)
            .map(|i| -12.0 + 24.0 * i as f64 / 16000.0)
            .collect();
        let conj = crate::convex::conjugate_grid(&xs, &f, &ys).unwrap();
        let back = crate::convex::conjugate_grid(&ys, &conj, &xs).unwrap();
        for (k, (orig, rec)) in f.iter().zip(&back).enumerate() {
            if k < 10 || k + 10 >= n {
                continue; // endpoints fall outside the achieved slope range
            }
            if rec.is_finite() {
                worst = worst.max((orig - rec).abs());
            }
        }
    }
    out.push(outcome(
        "convex",
        "conjugation is an involution on convex inputs (1e-6)",
        worst <= 1e-6,
        format!("worst reconstruction error = {worst:.2e}"),
    ));

    // evaluate's argmax matches the cell containing x
    let mut mismatches = 0usize;
    for _ in 0..20 {
        let d = rng.gen_range(1..3usize);
        let u = random_integrable_potential(&mut rng, d);
        let cells = u.cells().unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (_, arg) = u.evaluate(&x);
            match &cells {
                CellDecomposition::OneD { pieces, breakpoints } => {
                    let k = breakpoints.iter().filter(|&&b| b < x[0]).count();
                    if pieces[k] != arg {
                        mismatches += 1;
                    }
                }
                CellDecomposition::TwoD { cells } => {
                    let cell = cells.iter().find(|c| c.piece == arg).unwrap();
                    let inside = cell
                        .halfplanes
                        .iter()
                        .all(|(n, rhs)| n[0] * x[0] + n[1] * x[1] >= rhs - 1e-9);
                    if !inside {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    out.push(outcome(
        "convex",
        "argmax piece is the cell containing x (1000 samples)",
        mismatches == 0,
        format!("{mismatches} mismatches"),
    ));

    // gauge shift and translation behavior of the integrals
    let mut worst_gauge = 0.0f64;
    let mut worst_translation = 0.0f64;
    for _ in 0..25 {
        let d = rng.gen_range(1..3usize);
        let u = random_integrable_potential(&mut rng, d);
        let r0 = u.integrate_exp_neg().unwrap();
        let c: f64 = rng.gen_range(-2.0..2.0);
        let shifted = u
            .with_offsets(u.offsets().iter().map(|v| v + c).collect())
            .unwrap()
            .prune();
        let r1 = shifted.integrate_exp_neg().unwrap();
        worst_gauge = worst_gauge.max((r1.log_z - (r0.log_z + c)).abs());
        let f0 = r0.cell_mass_fractions(u.num_pieces());
        let f1 = r1.cell_mass_fractions(u.num_pieces());
        for (a, b) in f0.iter().zip(&f1) {
            worst_gauge = worst_gauge.max((a - b).abs());
        }
        let b0 = r0.barycenter(d);
        let b1 = r1.barycenter(d);
        worst_gauge = worst_gauge.max(norm(&crate::numerics::sub(&b0, &b1)));

        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let translated = u
            .with_offsets(
                u.offsets()
                    .iter()
                    .zip(u.sites())
                    .map(|(v, y)| v + dot(y, &w))
                    .collect(),
            )
            .unwrap()
            .prune();
        let rt = translated.integrate_exp_neg().unwrap();
        worst_translation = worst_translation.max((rt.log_z - r0.log_z).abs());
        let bt = rt.barycenter(d);
        let expected: Vec<f64> = b0.iter().zip(&w).map(|(b, wi)| b + wi).collect();
        worst_translation = worst_translation.max(norm(&crate::numerics::sub(&bt, &expected)));
    }
    out.push(outcome(
        "convex",
        "offset gauge scales Z by e^c; translation moves the barycenter",
        worst_gauge <= 1e-10 && worst_translation <= 1e-8,
        format!("gauge drift {worst_gauge:.2e}, translation drift {worst_translation:.2e}"),
    ));

    // cell masses sum to Z within the certified error
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.gen_range(1..3usize);
        let u = random_integrable_potential(&mut rng, d);
        let r = u.integrate_exp_neg().unwrap();
        let fractions = r.cell_mass_fractions(u.num_pieces());
        let total: f64 = fractions.iter().sum();
        let err = (total - 1.0).abs();
        worst = worst.max(err - r.certified_rel_error.max(1e-12));
    }
    out.push(outcome(
        "convex",
        "sum of cell masses = Z within the certified error (100 runs)",
        worst <= 0.0,
        format!("worst excess over certificate = {worst:.2e}"),
    ));

    // Monte Carlo cross-check in d = 2
    let mut pass = true;
    let mut detail = String::new();
    for k in 0..3 {
        let u = random_integrable_potential(&mut rng, 2);
        let r = u.integrate_exp_neg().unwrap();
        let mc = integrate_exp_neg_monte_carlo(&u, 1_000_000, seed ^ (k as u64)).unwrap();
        let dev = (mc.z - r.z).abs();
        if dev > 3.0 * mc.stderr {
            pass = false;
        }
        detail = format!("last run: |Z_mc - Z| = {dev:.3e}, 3 se = {:.3e}", 3.0 * mc.stderr);
    }
    out.push(outcome(
        "convex",
        "quadrature Z within 3 MC standard errors (1e6 samples)",
        pass,
        detail,
    ));

    out
}

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

fn solver_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50);
    let mut out = Vec::new();

    // gauge invariances of J
    let mut worst_const = 0.0f64;
    let mut worst_translation = 0.0f64;
    for _ in 0..20 {
        let d = rng.gen_range(1..3usize);
        let mu = random_full_dimensional(&mut rng, d, 8);
        let v: Vec<f64> = mu.atoms().iter().map(|y| 0.5 * dot(y, y) + rng.gen_range(-0.5..0.5)).collect();
        let j0 = solver::objective(&mu, &v).unwrap();
        let c: f64 = rng.gen_range(-3.0..3.0);
        let vc: Vec<f64> = v.iter().map(|x| x + c).collect();
        worst_const = worst_const.max((solver::objective(&mu, &vc).unwrap() - j0).abs());
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vt: Vec<f64> = v
            .iter()
            .zip(mu.atoms())
            .map(|(x, y)| x + dot(y, &w))
            .collect();
        worst_translation =
            worst_translation.max((solver::objective(&mu, &vt).unwrap() - j0).abs());
    }
    out.push(outcome(
        "solver",
        "J constant gauge exact (1e-10); translation gauge <= 1e-9",
        worst_const <= 1e-10 && worst_translation <= 1e-9,
        format!("constant {worst_const:.2e}, translation {worst_translation:.2e}"),
    ));

    // uniqueness up to translation: independent initializations agree after
    // the gauges
    let mut worst = 0.0f64;
    let mut worst_fit = 0.0f64;
    for k in 0..10 {
        let mu = random_full_dimensional(&mut rng, 1, 7);
        let base = solver::SolveOptions {
            tol: 1e-9,
            max_iter: 60_000,
            ..Default::default()
        };
        let r1 = solver::solve(&mu, &base).unwrap();
        let jitter = solver::SolveOptions {
            init_jitter: Some((seed ^ (k as u64) ^ 0xF00, 1.0)),
            ..base
        };
        let r2 = solver::solve(&mu, &jitter).unwrap();
        if !(r1.converged && r2.converged) {
            worst = f64::INFINITY;
            continue;
        }
        // best-fit translation w for the difference, basis {1, y}
        let diff: Vec<f64> = r1
            .offsets
            .iter()
            .zip(&r2.offsets)
            .map(|(a, b)| a - b)
            .collect();
        let ys: Vec<f64> = mu.atoms().iter().map(|y| y[0]).collect();
        let n = ys.len() as f64;
        let sy: f64 = ys.iter().sum();
        let syy: f64 = ys.iter().map(|y| y * y).sum();
        let sd: f64 = diff.iter().sum();
        let syd: f64 = ys.iter().zip(&diff).map(|(y, d)| y * d).sum();
        let det = n * syy - sy * sy;
        let w = (n * syd - sy * sd) / det;
        let c = (sd - w * sy) / n;
        for (y, dv) in ys.iter().zip(&diff) {
            worst_fit = worst_fit.max((dv - c - w * y).abs());
        }
        for dv in &diff {
            worst = worst.max(dv.abs());
        }
    }
    out.push(outcome(
        "solver",
        "uniqueness up to translation across 10 random targets (1e-6)",
        worst <= 1e-6 && worst_fit <= 1e-6,
        format!("post-gauge offset gap {worst:.2e}, affine-fit residual {worst_fit:.2e}"),
    ));

    // converged solve reproduces mu as its moment measure; trace descends
    let mut worst_residual = 0.0f64;
    let mut trace_failures = 0usize;
    for _ in 0..5 {
        let mu = random_full_dimensional(&mut rng, 1, 6);
        let r = solver::solve(&mu, &solver::SolveOptions::default()).unwrap();
        if !r.converged {
            worst_residual = f64::INFINITY;
            continue;
        }
        let u = solver::report_potential(&mu, &r).unwrap();
        let (mm, _) = solver::moment_measure(&u).unwrap();
        for (a, &wgt) in mu.atoms().iter().zip(mu.weights()) {
            let k = mm
                .atoms()
                .iter()
                .position(|b| norm(&crate::numerics::sub(b, a)) < 1e-12);
            match k {
                Some(k) => worst_residual = worst_residual.max((mm.weights()[k] - wgt).abs()),
                None => worst_residual = f64::INFINITY,
            }
        }
        if r.objective_trace.windows(2).any(|w| w[1].1 >= w[0].1) {
            trace_failures += 1;
        }
    }
    out.push(outcome(
        "solver",
        "moment measure of the solution equals mu within tol; descent monotone",
        worst_residual <= 1e-7 && trace_failures == 0,
        format!("worst atom residual {worst_residual:.2e}, {trace_failures} non-monotone traces"),
    ));

    // dilation consistency: M2 of the recovered density scales as 1/s^2
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let mu = random_full_dimensional(&mut rng, 1, 5);
        let s: f64 = rng.gen_range(1.2..2.5);
        let mu_s = DiscreteMeasure::new(
            mu.atoms()
                .iter()
                .map(|a| a.iter().map(|x| s * x).collect())
                .collect(),
            mu.weights().to_vec(),
        )
        .unwrap();
        let opts = solver::SolveOptions {
            tol: 1e-9,
            max_iter: 60_000,
            ..Default::default()
        };
        let r1 = solver::solve(&mu, &opts).unwrap();
        let r2 = solver::solve(&mu_s, &opts).unwrap();
        let m2 = |mu: &DiscreteMeasure, rep: &solver::SolveReport| -> f64 {
            let u = solver::report_potential(mu, rep).unwrap();
            let rho = solver::density_on_grid(&u, -40.0, 80.0 / 65536.0, 65536).unwrap();
            rho.second_moment()
        };
        let ratio = m2(&mu_s, &r2) * s * s / m2(&mu, &r1);
        worst = worst.max((ratio - 1.0).abs());
    }
    out.push(outcome(
        "solver",
        "dilating mu by s contracts M2 of e^{-u} by s^2 (1e-4)",
        worst <= 1e-4,
        format!("worst ratio error = {worst:.2e}"),
    ));

    out
}

// ---------------------------------------------------------------------------
// primal
// ---------------------------------------------------------------------------

fn primal_suite(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9A);
    let mut out = Vec::new();

    // the fixed point satisfies rho = e^{-u}/Z and matches the offset-side
    // optimum
    let mut worst_residual = 0.0f64;
    let mut worst_match = 0.0f64;
    for _ in 0..3 {
        let mu = random_full_dimensional(&mut rng, 1, 5);
        let fp = primal::solve_fixed_point(
            &mu,
            &primal::FixedPointOptions {
                cells: 4096,
                half_width: 12.0,
                ..Default::default()
            },
        )
        .unwrap();
        if !fp.converged {
            worst_residual = f64::INFINITY;
            continue;
        }
        worst_residual = worst_residual.max(fp.fixed_point_residual);
        let dual = solver::solve(&mu, &solver::SolveOptions::default()).unwrap();
        let j_star = solver::objective(&mu, &dual.offsets).unwrap();
        let p_star = primal::objective(&fp.final_density, &mu).unwrap();
        worst_match = worst_match.max((p_star - j_star).abs());
    }
    out.push(outcome(
        "primal",
        "fixed point reached; primal objective matches J* (1e-3)",
        worst_residual <= 1e-6 && worst_match <= 1e-3,
        format!("residual {worst_residual:.2e}, primal-dual gap {worst_match:.2e}"),
    ));

    // divergence demo: exact rate -ln(2n)
    let mu0 = DiscreteMeasure::from_1d(&[0.0], &[1.0]).unwrap();
    let rows = primal::hyperplane_divergence_demo(&mu0, &[1.0, 5.0, 50.0, 500.0]).unwrap();
    let mut worst = 0.0f64;
    let mut decreasing = true;
    for row in &rows {
        worst = worst.max((row.entropy_term + (2.0 * row.n).ln()).abs());
    }
    for w in rows.windows(2) {
        if w[1].objective_upper_bound >= w[0].objective_upper_bound {
            decreasing = false;
        }
    }
    out.push(outcome(
        "primal",
        "slab entropy is -ln(2n) exactly; upper bound strictly decreasing",
        worst <= 1e-12 && decreasing,
        format!("worst formula error = {worst:.2e}"),
    ));

    // displacement convexity of E and T along random geodesics
    let mu = random_full_dimensional(&mut rng, 1, 6);
    let conv = primal::displacement_convexity_suite(100, &mu, seed ^ 0xDC).unwrap();
    out.push(outcome(
        "primal",
        "E and T(., mu) midpoint-convex along 100 geodesics (1e-7)",
        conv.entropy_violations == 0
            && conv.correlation_violations == 0
            && conv.strict_violations == 0,
        format!(
            "defects: E {:.2e}, T {:.2e}; strict cases {} ({} violations)",
            conv.max_entropy_defect,
            conv.max_correlation_defect,
            conv.strict_cases,
            conv.strict_violations
        ),
    ));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures_suite_passes() {
        for o in measures_suite(7) {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn entropy_suite_passes() {
        for o in entropy_suite(7) {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn ot_suite_passes() {
        for o in ot_suite(7) {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn convex_suite_passes() {
        for o in convex_suite(7) {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn solver_suite_passes() {
        for o in solver_suite(7) {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn primal_suite_passes() {
        for o in primal_suite(7) {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn unknown_module_is_rejected() {
        assert!(run_module("nope", 0).is_err());
    }
}
