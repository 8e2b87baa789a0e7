//! Exact solver for the balanced transportation problem
//!
//!     min sum_{ij} c_ij gamma_ij,  gamma >= 0, row sums = supplies,
//!                                  column sums = demands,
//!
//! by the classical tree-basis (network-simplex style) method: northwest
//! corner start, node potentials from the spanning tree, most-negative
//! reduced cost pivoting with lexicographic tie-breaks, and a Bland-rule
//! fallback after a run of degenerate pivots so the method always terminates.

use crate::error::{Error, Result};

pub struct TransportSolution {
    /// Basic entries with strictly positive flow.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Node potentials with pi_i + lambda_j = c_ij on every basic arc and
    /// c_ij - pi_i - lambda_j >= -eps everywhere at optimality.
    pub potentials_source: Vec<f64>,
    pub potentials_target: Vec<f64>,
}

struct Basis {
    m: usize,
    n: usize,
    /// arcs[k] = (i, j, flow); the m + n - 1 basic arcs form a spanning tree
    arcs: Vec<(usize, usize, f64)>,
    /// adjacency: node -> arc ids (sources are 0..m, sinks m..m+n)
    adj: Vec<Vec<usize>>,
}

impl Basis {
    fn northwest(supplies: &[f64], demands: &[f64]) -> Self {
        let m = supplies.len();
        let n = demands.len();
        let mut rs = supplies.to_vec();
        let mut rd = demands.to_vec();
        let mut arcs = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let q = rs[i].min(rd[j]).max(0.0);
            arcs.push((i, j, q));
            rs[i] -= q;
            rd[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i < m - 1 && (rs[i] <= rd[j] || j == n - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut adj = vec![Vec::new(); m + n];
        for (k, &(i, j, _)) in arcs.iter().enumerate() {
            adj[i].push(k);
            adj[m + j].push(k);
        }
        Basis { m, n, arcs, adj }
    }

    fn other_end(&self, arc: usize, node: usize) -> usize {
        let (i, j, _) = self.arcs[arc];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    /// Potentials from the spanning tree, rooted at source 0 with pi_0 = 0.
    fn potentials(&self, cost: &dyn Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
        let total = self.m + self.n;
        let mut pot = vec![f64::NAN; total];
        pot[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for &a in &self.adj[node] {
                let nb = self.other_end(a, node);
                if pot[nb].is_nan() {
                    let (i, j, _) = self.arcs[a];
                    pot[nb] = cost(i, j) - pot[node];
                    stack.push(nb);
                }
            }
        }
        let pi = pot[..self.m].to_vec();
        let lam = pot[self.m..].to_vec();
        (pi, lam)
    }

    /// Tree path between two nodes as a list of arc ids.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent_arc = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        seen[from] = true;
        let mut stack = vec![from];
        while let Some(node) = stack.pop() {
            if node == to {
                break;
            }
            for &a in &self.adj[node] {
                let nb = self.other_end(a, node);
                if !seen[nb] {
                    seen[nb] = true;
                    parent_arc[nb] = a;
                    stack.push(nb);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = to;
        while node != from {
            let a = parent_arc[node];
            debug_assert_ne!(a, usize::MAX, "tree is disconnected");
            path.push(a);
            node = self.other_end(a, node);
        }
        path
    }

    fn replace(&mut self, leaving: usize, entering: (usize, usize, f64)) {
        let (oi, oj, _) = self.arcs[leaving];
        self.adj[oi].retain(|&a| a != leaving);
        self.adj[self.m + oj].retain(|&a| a != leaving);
        self.arcs[leaving] = entering;
        self.adj[entering.0].push(leaving);
        self.adj[self.m + entering.1].push(leaving);
    }
}

/// Solve the balanced transportation problem exactly. `supplies` and
/// `demands` must be positive with equal sums.
pub fn solve_transportation(
    supplies: &[f64],
    demands: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
) -> Result<TransportSolution> {
    let m = supplies.len();
    let n = demands.len();
    const LIMIT: usize = 4_000_000;
    if m * n > LIMIT {
        return Err(Error::InstanceTooLarge {
            rows: m,
            cols: n,
            limit: LIMIT,
        });
    }
    if m == 0 || n == 0 {
        return Err(Error::Invalid("empty transportation instance".into()));
    }

    let mut scale: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            scale = scale.max(cost(i, j).abs());
        }
    }
    let eps = 1e-11 * (1.0 + scale);

    let mut basis = Basis::northwest(supplies, demands);
    let max_pivots = 200 * (m + n) * (m + n) + 10_000;
    let mut degenerate_run = 0usize;
    let mut bland = false;

    for _pivot in 0..max_pivots {
        let (pi, lam) = basis.potentials(cost);

        // entering arc
        let mut enter: Option<(usize, usize)> = None;
        if bland {
            'outer: for i in 0..m {
                for j in 0..n {
                    if cost(i, j) - pi[i] - lam[j] < -eps {
                        enter = Some((i, j));
                        break 'outer;
                    }
                }
            }
        } else {
            let mut best = -eps;
            for i in 0..m {
                for j in 0..n {
                    let rc = cost(i, j) - pi[i] - lam[j];
                    if rc < best {
                        best = rc;
                        enter = Some((i, j));
                    }
                }
            }
        }
        let (ei, ej) = match enter {
            Some(e) => e,
            None => {
                // optimal: collect positive flows
                let mut entries: Vec<(usize, usize, f64)> = basis
                    .arcs
                    .iter()
                    .filter(|&&(_, _, f)| f > 1e-15)
                    .map(|&(i, j, f)| (i, j, f))
                    .collect();
                entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
                let cost_total = entries.iter().map(|&(i, j, f)| f * cost(i, j)).sum();
                return Ok(TransportSolution {
                    entries,
                    cost: cost_total,
                    potentials_source: pi,
                    potentials_target: lam,
                });
            }
        };

        // cycle: entering arc + tree path from sink ej back to source ei.
        // Arcs along the path alternate -theta, +theta starting at the sink.
        let path = basis.path(basis.m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        let mut leave_key = (usize::MAX, usize::MAX);
        for (pos, &a) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (i, j, f) = basis.arcs[a];
                if f < theta - 1e-15 || (f < theta + 1e-15 && (i, j) < leave_key) {
                    theta = f;
                    leaving = a;
                    leave_key = (i, j);
                }
            }
        }
        debug_assert_ne!(leaving, usize::MAX);
        theta = theta.max(0.0);
        for (pos, &a) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.arcs[a].2 = (basis.arcs[a].2 - theta).max(0.0);
            } else {
                basis.arcs[a].2 += theta;
            }
        }
        basis.replace(leaving, (ei, ej, theta));

        if theta <= 1e-15 {
            degenerate_run += 1;
            if degenerate_run > 4 * (m + n) {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }
    Err(Error::Solver(
        "transportation simplex exceeded its pivot budget".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_marginals(sol: &TransportSolution, supplies: &[f64], demands: &[f64]) {
        let mut rows = vec![0.0; supplies.len()];
        let mut cols = vec![0.0; demands.len()];
        for &(i, j, f) in &sol.entries {
            assert!(f > 0.0);
            rows[i] += f;
            cols[j] += f;
        }
        for (r, s) in rows.iter().zip(supplies) {
            assert!((r - s).abs() < 1e-12);
        }
        for (c, d) in cols.iter().zip(demands) {
            assert!((c - d).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_assignment() {
        // cheap diagonal: optimal plan is the identity coupling
        let cost = |i: usize, j: usize| if i == j { 0.0 } else { 1.0 };
        let sol = solve_transportation(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!(sol.cost.abs() < 1e-15);
        check_marginals(&sol, &[0.5, 0.5], &[0.5, 0.5]);
    }

    #[test]
    fn duality_certificate_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..30 {
            let m = rng.gen_range(2..12);
            let n = rng.gen_range(2..12);
            let mut s: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let st: f64 = s.iter().sum();
            let dt: f64 = d.iter().sum();
            for x in &mut s {
                *x /= st;
            }
            for x in &mut d {
                *x /= dt;
            }
            let costs: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let cost = |i: usize, j: usize| costs[i * n + j];
            let sol = solve_transportation(&s, &d, &cost).unwrap();
            check_marginals(&sol, &s, &d);
            // strong duality: primal cost equals the dual objective
            let dual: f64 = s
                .iter()
                .zip(&sol.potentials_source)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + d.iter()
                    .zip(&sol.potentials_target)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            assert!(
                (sol.cost - dual).abs() < 1e-9,
                "trial {trial}: duality gap {}",
                sol.cost - dual
            );
            // dual feasibility
            for i in 0..m {
                for j in 0..n {
                    assert!(
                        cost(i, j) - sol.potentials_source[i] - sol.potentials_target[j]
                            >= -1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_equal_masses() {
        // many ties: every supply equals every demand
        let s = vec![0.25; 4];
        let cost = |i: usize, j: usize| ((i * 7 + j * 3) % 5) as f64;
        let sol = solve_transportation(&s, &s, &cost).unwrap();
        check_marginals(&sol, &s, &s);
    }
}
