//! Wasserstein geodesics rho_t = ((1-t) id + t T)_# rho_0.
//!
//! Discrete endpoints interpolate atoms along an optimal plan. For 1-D grid
//! densities the quantile functions interpolate linearly, so the whole path
//! is carried exactly as a piecewise-constant density built on the merged
//! quantile partition; materializing a `GridDensity` re-grids at rho_0's
//! resolution.

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, GridDensity, Measure};

/// Piecewise-constant density on disjoint intervals (positive pieces only).
#[derive(Debug, Clone)]
pub struct PiecewiseDensity {
    /// (start, end, density), ordered, density > 0.
    pub pieces: Vec<(f64, f64, f64)>,
}

impl PiecewiseDensity {
    pub fn from_grid(g: &GridDensity) -> Result<Self> {
        if g.dim() != 1 {
            return Err(Error::UnsupportedDimension(g.dim()));
        }
        let h = g.spacing()[0];
        let x0 = g.origin()[0];
        let mut pieces = Vec::new();
        for (c, &v) in g.values().iter().enumerate() {
            if v > 0.0 {
                let a = x0 + c as f64 * h;
                // merge contiguous equal-density cells
                if let Some(last) = pieces.last_mut() {
                    let (_, ref mut end, dens): &mut (f64, f64, f64) = last;
                    if (*end - a).abs() < 1e-12 * h && *dens == v {
                        *end = a + h;
                        continue;
                    }
                }
                pieces.push((a, a + h, v));
            }
        }
        if pieces.is_empty() {
            return Err(Error::Invalid("density with empty support".into()));
        }
        Ok(Self { pieces })
    }

    pub fn mass(&self) -> f64 {
        self.pieces.iter().map(|&(a, b, v)| v * (b - a)).sum()
    }

    pub fn entropy(&self) -> f64 {
        self.pieces
            .iter()
            .map(|&(a, b, v)| v * (b - a) * v.ln())
            .sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.pieces
            .iter()
            .map(|&(a, b, v)| {
                // int |x| v dx over [a, b]
                if a >= 0.0 {
                    v * 0.5 * (b * b - a * a)
                } else if b <= 0.0 {
                    v * 0.5 * (a * a - b * b)
                } else {
                    v * 0.5 * (a * a + b * b)
                }
            })
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.pieces
            .iter()
            .map(|&(a, b, v)| v * (b * b * b - a * a * a) / 3.0)
            .sum()
    }

    /// Exact quantile-matched correlation sup int x y dgamma against a
    /// discrete 1-D target.
    pub fn correlation_with(&self, mu: &DiscreteMeasure) -> Result<f64> {
        if mu.dim() != 1 {
            return Err(Error::UnsupportedDimension(mu.dim()));
        }
        let mut order: Vec<usize> = (0..mu.len()).collect();
        order.sort_by(|&p, &q| mu.atoms()[p][0].partial_cmp(&mu.atoms()[q][0]).unwrap());
        let mut value = 0.0;
        let mut cum = 0.0;
        let mut target_cum = 0.0;
        let mut k = 0usize; // target index in sorted order
        target_cum += mu.weights()[order[0]];
        for &(a, b, v) in &self.pieces {
            let mut pos = a;
            let mut left = v * (b - a);
            while k + 1 < order.len() && target_cum - cum <= left {
                let need = (target_cum - cum).max(0.0);
                let x_cross = pos + need / v;
                value += mu.atoms()[order[k]][0] * v * 0.5 * (x_cross * x_cross - pos * pos);
                cum = target_cum;
                left -= need;
                pos = x_cross;
                k += 1;
                target_cum += mu.weights()[order[k]];
            }
            value += mu.atoms()[order[k]][0] * v * 0.5 * (b * b - pos * pos);
            cum += left;
        }
        Ok(value)
    }

    /// Re-grid with exact cell masses onto the lattice `origin + k h`.
    pub fn to_grid(&self, origin: f64, h: f64) -> Result<GridDensity> {
        let xmin = self.pieces[0].0;
        let xmax = self.pieces[self.pieces.len() - 1].1;
        let start_idx = ((xmin - origin) / h).floor();
        let grid_origin = origin + start_idx * h;
        let cells = (((xmax - grid_origin) / h).ceil() as usize).max(1);
        let mut masses = vec![0.0; cells];
        for &(a, b, v) in &self.pieces {
            let c_lo = (((a - grid_origin) / h).floor() as isize).clamp(0, cells as isize - 1);
            let c_hi = ((((b - grid_origin) / h).ceil() as isize) - 1).clamp(0, cells as isize - 1);
            for c in c_lo..=c_hi {
                let ca = grid_origin + c as f64 * h;
                let cb = ca + h;
                let lo = ca.max(a);
                let hi = cb.min(b);
                if hi > lo {
                    masses[c as usize] += v * (hi - lo);
                }
            }
        }
        let values: Vec<f64> = masses.iter().map(|m| m / h).collect();
        GridDensity::new(vec![grid_origin], vec![h], vec![cells], values)
    }
}

/// One merged quantile interval: on q in [q0, q1], both endpoint quantile
/// functions are affine, Q_i(q) = x_i + s_i (q - q0).
#[derive(Debug, Clone, Copy)]
struct QInterval {
    q0: f64,
    q1: f64,
    x0: f64,
    s0: f64,
    x1: f64,
    s1: f64,
}

/// Exact 1-D geodesic between two grid densities.
#[derive(Debug, Clone)]
pub struct Grid1dGeodesic {
    intervals: Vec<QInterval>,
    lattice_origin: f64,
    lattice_spacing: f64,
}

fn cumulative_pieces(p: &PiecewiseDensity) -> Vec<(f64, f64, f64, f64)> {
    // (cum_start, cum_end, x_start, density)
    let mut out = Vec::with_capacity(p.pieces.len());
    let mut cum = 0.0;
    for &(a, b, v) in &p.pieces {
        let m = v * (b - a);
        out.push((cum, cum + m, a, v));
        cum += m;
    }
    out
}

/// Build the exact geodesic between two 1-D grid densities.
pub fn geodesic_grid_1d(rho0: &GridDensity, rho1: &GridDensity) -> Result<Grid1dGeodesic> {
    if rho0.dim() != 1 || rho1.dim() != 1 {
        return Err(Error::DimensionMismatch(rho0.dim(), rho1.dim()));
    }
    let p0 = PiecewiseDensity::from_grid(rho0)?;
    let p1 = PiecewiseDensity::from_grid(rho1)?;
    let c0 = cumulative_pieces(&p0);
    let c1 = cumulative_pieces(&p1);
    // merged quantile breakpoints
    let mut qs: Vec<f64> = c0
        .iter()
        .flat_map(|&(a, b, _, _)| [a, b])
        .chain(c1.iter().flat_map(|&(a, b, _, _)| [a, b]))
        .collect();
    qs.push(0.0);
    qs.push(1.0);
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    qs.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    // Owning cells are located by the interval midpoint: interval starts sit
    // within rounding of cell boundaries, and resolving them against the
    // wrong neighbor would pick up the wrong slope.
    let locate = |cells: &[(f64, f64, f64, f64)], qa: f64, qmid: f64, hint: &mut usize| -> (f64, f64) {
        while *hint + 1 < cells.len() && cells[*hint].1 <= qmid {
            *hint += 1;
        }
        let (cs, _, xs, dens) = cells[*hint];
        (xs + (qa - cs).max(0.0) / dens, 1.0 / dens)
    };

    let mut intervals = Vec::with_capacity(qs.len());
    let (mut h0, mut h1) = (0usize, 0usize);
    for w in qs.windows(2) {
        let (qa, qb) = (w[0], w[1]);
        if qb - qa <= 1e-15 || qa >= 1.0 || qb <= 0.0 {
            continue;
        }
        let qmid = 0.5 * (qa + qb);
        let (x0, s0) = locate(&c0, qa, qmid, &mut h0);
        let (x1, s1) = locate(&c1, qa, qmid, &mut h1);
        intervals.push(QInterval {
            q0: qa,
            q1: qb,
            x0,
            s0,
            x1,
            s1,
        });
    }
    Ok(Grid1dGeodesic {
        intervals,
        lattice_origin: rho0.origin()[0],
        lattice_spacing: rho0.spacing()[0],
    })
}

impl Grid1dGeodesic {
    /// Exact piecewise-constant density of the interpolant at time t.
    pub fn density_at(&self, t: f64) -> PiecewiseDensity {
        let pieces = self
            .intervals
            .iter()
            .map(|iv| {
                let xa = (1.0 - t) * iv.x0 + t * iv.x1;
                let slope = (1.0 - t) * iv.s0 + t * iv.s1;
                let len_q = iv.q1 - iv.q0;
                (xa, xa + slope * len_q, 1.0 / slope)
            })
            .collect();
        PiecewiseDensity { pieces }
    }

    /// Interpolant re-gridded at rho_0's resolution.
    pub fn at(&self, t: f64) -> Result<GridDensity> {
        self.density_at(t)
            .to_grid(self.lattice_origin, self.lattice_spacing)
    }

    /// int (Q_1 - Q_0)^2 dq = W_2^2(rho_0, rho_1); path speed is its root.
    pub fn w2_squared(&self) -> f64 {
        self.intervals
            .iter()
            .map(|iv| {
                let len = iv.q1 - iv.q0;
                let ga = iv.x1 - iv.x0;
                let gb = (iv.x1 + iv.s1 * len) - (iv.x0 + iv.s0 * len);
                len * (ga * ga + ga * gb + gb * gb) / 3.0
            })
            .sum()
    }

    /// Exact entropy of the interpolant (convex in t).
    pub fn entropy_at(&self, t: f64) -> f64 {
        self.intervals
            .iter()
            .map(|iv| {
                let slope = (1.0 - t) * iv.s0 + t * iv.s1;
                -(iv.q1 - iv.q0) * slope.ln()
            })
            .sum()
    }

    /// int (T(x) - x) . y dgamma where T drives this geodesic and gamma is
    /// the quantile-matched optimal plan from the base density to mu: the
    /// lower bound on the right derivative of t -> T(rho_t, mu) at t = 0.
    pub fn correlation_derivative_bound(&self, mu: &DiscreteMeasure) -> Result<f64> {
        if mu.dim() != 1 {
            return Err(Error::UnsupportedDimension(mu.dim()));
        }
        let mut order: Vec<usize> = (0..mu.len()).collect();
        order.sort_by(|&p, &q| mu.atoms()[p][0].partial_cmp(&mu.atoms()[q][0]).unwrap());
        let mut acc = 0.0;
        let mut k = 0usize;
        let mut target_cum = mu.weights()[order[0]];
        for iv in &self.intervals {
            let mut qa = iv.q0;
            // displacement Q1 - Q0 is affine on the interval
            let disp_at = |q: f64| (iv.x1 - iv.x0) + (iv.s1 - iv.s0) * (q - iv.q0);
            while k + 1 < order.len() && target_cum < iv.q1 {
                if target_cum > qa {
                    acc += mu.atoms()[order[k]][0]
                        * (target_cum - qa)
                        * 0.5
                        * (disp_at(qa) + disp_at(target_cum));
                    qa = target_cum;
                }
                k += 1;
                target_cum += mu.weights()[order[k]];
            }
            if iv.q1 > qa {
                acc += mu.atoms()[order[k]][0] * (iv.q1 - qa) * 0.5 * (disp_at(qa) + disp_at(iv.q1));
            }
        }
        Ok(acc)
    }

    /// Range of the displacement T - id over the support (0 for pure shifts).
    pub fn displacement_range(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for iv in &self.intervals {
            let len = iv.q1 - iv.q0;
            let da = iv.x1 - iv.x0;
            let db = (iv.x1 + iv.s1 * len) - (iv.x0 + iv.s0 * len);
            lo = lo.min(da.min(db));
            hi = hi.max(da.max(db));
        }
        hi - lo
    }
}

/// Exact W2 between two 1-D grid densities via their quantile functions.
pub fn w2_grid_1d(a: &GridDensity, b: &GridDensity) -> Result<f64> {
    Ok(geodesic_grid_1d(a, b)?.w2_squared().max(0.0).sqrt())
}

/// Geodesic between two measures of matching kind.
pub enum GeodesicPath {
    Discrete {
        rho0: DiscreteMeasure,
        rho1: DiscreteMeasure,
        plan: super::TransportPlan,
    },
    Grid(Box<Grid1dGeodesic>),
}

/// Constant-speed geodesic from rho0 to rho1: plan-based interpolation for
/// discrete endpoints, quantile interpolation for 1-D grids.
pub fn geodesic(rho0: &Measure, rho1: &Measure) -> Result<GeodesicPath> {
    match (rho0, rho1) {
        (Measure::Discrete(a), Measure::Discrete(b)) => {
            if a.dim() != b.dim() {
                return Err(Error::DimensionMismatch(a.dim(), b.dim()));
            }
            let plan = super::max_correlation(a, b)?.plan;
            Ok(GeodesicPath::Discrete {
                rho0: a.clone(),
                rho1: b.clone(),
                plan,
            })
        }
        (Measure::Grid(a), Measure::Grid(b)) => {
            Ok(GeodesicPath::Grid(Box::new(geodesic_grid_1d(a, b)?)))
        }
        _ => Err(Error::Invalid(
            "geodesic endpoints must both be discrete or both be 1-D grids".into(),
        )),
    }
}

impl GeodesicPath {
    pub fn at(&self, t: f64) -> Result<Measure> {
        match self {
            GeodesicPath::Discrete { rho0, rho1, plan } => {
                if t == 0.0 {
                    return Ok(Measure::Discrete(rho0.clone()));
                }
                if t == 1.0 {
                    return Ok(Measure::Discrete(rho1.clone()));
                }
                let mut atoms = Vec::with_capacity(plan.entries.len());
                let mut weights = Vec::with_capacity(plan.entries.len());
                for e in &plan.entries {
                    let a = &rho0.atoms()[e.i];
                    let b = &rho1.atoms()[e.j];
                    atoms.push(
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (1.0 - t) * x + t * y)
                            .collect(),
                    );
                    weights.push(e.mass);
                }
                Ok(Measure::Discrete(DiscreteMeasure::new(atoms, weights)?))
            }
            GeodesicPath::Grid(g) => {
                if t == 0.0 {
                    return Ok(Measure::Grid(g.at(0.0)?));
                }
                Ok(Measure::Grid(g.at(t)?))
            }
        }
    }
}

/// Derivative of the entropy along the geodesic driven by a monotone map T
/// sampled at the grid's cell centers: -int div(T - id) drho, with centered
/// finite differences for T'.
pub fn entropy_geodesic_derivative(rho: &GridDensity, map_at_centers: &[f64]) -> Result<f64> {
    if rho.dim() != 1 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    let n = rho.num_cells();
    if map_at_centers.len() != n {
        return Err(Error::Invalid(format!(
            "map sampled on {} points but the grid has {} cells",
            map_at_centers.len(),
            n
        )));
    }
    let scale = map_at_centers
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1.0);
    if map_at_centers.windows(2).any(|w| w[1] < w[0] - 1e-9 * scale) {
        return Err(Error::Invalid("transport map is not monotone".into()));
    }
    let h = rho.spacing()[0];
    let mut acc = 0.0;
    for i in 0..n {
        let d = if i == 0 {
            (map_at_centers[1] - map_at_centers[0]) / h
        } else if i == n - 1 {
            (map_at_centers[n - 1] - map_at_centers[n - 2]) / h
        } else {
            (map_at_centers[i + 1] - map_at_centers[i - 1]) / (2.0 * h)
        };
        acc += (d - 1.0) * rho.values()[i] * h;
    }
    Ok(-acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{DiscreteMeasure, GridDensity};

    fn gaussian_grid(mean: f64, sd: f64, half: f64, cells: usize) -> GridDensity {
        let h = 2.0 * half / cells as f64;
        let samples: Vec<f64> = (0..cells)
            .map(|i| {
                let x = -half + (i as f64 + 0.5) * h;
                (-0.5 * ((x - mean) / sd).powi(2)).exp()
            })
            .collect();
        GridDensity::from_1d_samples(-half, h, &samples).unwrap()
    }

    #[test]
    fn translation_geodesic_of_point_masses() {
        let a = Measure::Discrete(DiscreteMeasure::from_1d(&[0.0], &[1.0]).unwrap());
        let b = Measure::Discrete(DiscreteMeasure::from_1d(&[2.0], &[1.0]).unwrap());
        let path = geodesic(&a, &b).unwrap();
        for t in [0.0, 0.25, 0.5, 1.0] {
            match path.at(t).unwrap() {
                Measure::Discrete(m) => {
                    assert_eq!(m.len(), 1);
                    assert!((m.atoms()[0][0] - 2.0 * t).abs() < 1e-15);
                }
                _ => panic!(),
            }
        }
    }

    #[test]
    fn grid_endpoints_are_recovered() {
        let a = gaussian_grid(-1.0, 0.8, 8.0, 512);
        let b = gaussian_grid(1.5, 1.3, 8.0, 512);
        let g = geodesic_grid_1d(&a, &b).unwrap();
        let a_back = g.at(0.0).unwrap();
        // masses agree cell by cell on the common support
        let mass = |g: &GridDensity| -> f64 {
            g.values().iter().sum::<f64>() * g.cell_volume()
        };
        assert!((mass(&a_back) - 1.0).abs() < 1e-9);
        // cell values agree wherever the lattices overlap
        let mut max_diff = 0.0f64;
        for (i, v) in a.values().iter().enumerate() {
            let x = a.origin()[0] + (i as f64 + 0.5) * a.spacing()[0];
            let j = ((x - a_back.origin()[0]) / a_back.spacing()[0]).floor();
            if j >= 0.0 && (j as usize) < a_back.num_cells() {
                max_diff = max_diff.max((v - a_back.values()[j as usize]).abs());
            }
        }
        assert!(max_diff < 1e-9, "cell densities differ by {max_diff}");
        let d0 = w2_grid_1d(&a, &a_back).unwrap();
        assert!(d0 < 1e-6, "re-grid at t=0 moved mass by {d0}");
        let b_exact = g.density_at(1.0);
        let pb = PiecewiseDensity::from_grid(&b).unwrap();
        assert!((b_exact.mass() - pb.mass()).abs() < 1e-12);
        assert!((b_exact.entropy() - pb.entropy()).abs() < 1e-9);
    }

    #[test]
    fn constant_speed_property() {
        let a = gaussian_grid(-1.0, 0.7, 8.0, 400);
        let b = gaussian_grid(2.0, 1.4, 8.0, 400);
        let g = geodesic_grid_1d(&a, &b).unwrap();
        let total = g.w2_squared().sqrt();
        // quantile-integral route on fine re-grids of the exact interpolants
        for (s, t) in [(0.0, 1.0), (0.25, 0.75), (0.1, 0.9), (0.5, 1.0)] {
            let gs = g.density_at(s).to_grid(-8.0, 5e-4).unwrap();
            let gt = g.density_at(t).to_grid(-8.0, 5e-4).unwrap();
            let d = w2_grid_1d(&gs, &gt).unwrap();
            assert!(
                (d - (t - s) * total).abs() < 1e-4,
                "W2(path({s}), path({t})) = {d}, expected {}",
                (t - s) * total
            );
        }
    }

    #[test]
    fn entropy_is_convex_along_the_path() {
        let a = gaussian_grid(-2.0, 0.6, 9.0, 700);
        let b = gaussian_grid(1.0, 1.8, 9.0, 700);
        let g = geodesic_grid_1d(&a, &b).unwrap();
        let e: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&t| g.entropy_at(t))
            .collect();
        for k in 1..4 {
            assert!(
                e[k] <= 0.5 * (e[k - 1] + e[k + 1]) + 1e-12,
                "midpoint convexity fails at node {k}"
            );
        }
    }

    #[test]
    fn identity_map_has_zero_entropy_derivative() {
        let rho = gaussian_grid(0.0, 1.0, 6.0, 256);
        let centers: Vec<f64> = (0..256)
            .map(|i| rho.origin()[0] + (i as f64 + 0.5) * rho.spacing()[0])
            .collect();
        let d = entropy_geodesic_derivative(&rho, &centers).unwrap();
        assert!(d.abs() < 1e-12);
        // adding a constant changes nothing (divergence of a constant field)
        let shifted: Vec<f64> = centers.iter().map(|x| x + 3.0).collect();
        let d2 = entropy_geodesic_derivative(&rho, &shifted).unwrap();
        assert!(d2.abs() < 1e-12);
    }

    #[test]
    fn non_monotone_map_is_rejected() {
        let rho = gaussian_grid(0.0, 1.0, 6.0, 64);
        let mut centers: Vec<f64> = (0..64)
            .map(|i| rho.origin()[0] + (i as f64 + 0.5) * rho.spacing()[0])
            .collect();
        centers[30] = centers[33];
        centers[33] = centers[30] - 1.0;
        assert!(entropy_geodesic_derivative(&rho, &centers).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // smooth monotone map on a Gaussian: compare against the entropy of
        // the rebinned pushforward measure at h = 1e-4
        let n = 2000;
        let rho = gaussian_grid(0.0, 1.0, 8.0, n);
        let h_grid = rho.spacing()[0];
        let x0 = rho.origin()[0];
        let map: Vec<f64> = (0..n)
            .map(|i| {
                let x = x0 + (i as f64 + 0.5) * h_grid;
                x + 0.4 * x.tanh() + 0.1 * x
            })
            .collect();
        let analytic = entropy_geodesic_derivative(&rho, &map).unwrap();
        // independent route: transport each cell's mass onto the interval
        // between the images of its edges, then sum m ln(m / length)
        let edges: Vec<f64> = (0..=n)
            .map(|i| {
                if i == 0 {
                    1.5 * map[0] - 0.5 * map[1]
                } else if i == n {
                    1.5 * map[n - 1] - 0.5 * map[n - 2]
                } else {
                    0.5 * (map[i - 1] + map[i])
                }
            })
            .collect();
        let entropy_at = |t: f64| -> f64 {
            let mut e = 0.0;
            for i in 0..n {
                let v = rho.values()[i];
                if v == 0.0 {
                    continue;
                }
                let a = x0 + i as f64 * h_grid;
                let len = (1.0 - t) * h_grid + t * (edges[i + 1] - edges[i]);
                let _ = a;
                let m = v * h_grid;
                e += m * (m / len).ln();
            }
            e
        };
        let h = 1e-4;
        let fd = (entropy_at(h) - entropy_at(0.0)) / h;
        let rel = (analytic - fd).abs() / analytic.abs().max(1e-12);
        assert!(rel < 1e-3, "analytic {analytic} vs fd {fd}");
    }
}
