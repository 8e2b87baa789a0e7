//! Max-affine convex functions u(x) = max_i (x . y_i - v_i): the solver's
//! representation of the potential. Pieces are anchored at the target
//! measure's atoms so that v_i is the conjugate value u*(y_i) whenever piece i
//! contributes to the upper envelope; pieces that do not contribute are kept
//! with an inactive mask instead of being deleted.

mod conjugate;
mod integrate;
pub mod polygon;

pub use conjugate::{conjugate_grid, conjugate_grid_separable};
pub use integrate::{integrate_exp_neg_monte_carlo, IntegralReport, MonteCarloReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm};
use polygon::{
    box_polygon, centroid, clip_halfplane, convex_hull, origin_hull_margin, Point2,
};

/// u(x) = max over active pieces i of (x . y_i - v_i).
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffineConvex {
    dim: usize,
    sites: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    active: Vec<bool>,
}

/// Whether 0 is interior to the convex hull of the active sites, and its
/// distance to the hull boundary. Interiority is what makes e^{-u}
/// integrable.
#[derive(Debug, Clone, Serialize)]
pub struct RecessionReport {
    pub interior: bool,
    pub margin: f64,
}

/// Cell of a planar decomposition: the region where one piece attains the
/// envelope. `vertices` is the cell clipped to a large reference box.
#[derive(Debug, Clone)]
pub struct PolygonCell {
    pub piece: usize,
    /// (normal, rhs) pairs: the cell is the set { x : normal . x >= rhs }.
    pub halfplanes: Vec<([f64; 2], f64)>,
    pub vertices: Vec<Point2>,
    pub bounded: bool,
}

/// Cell decomposition of R^d induced by a pruned max-affine function.
#[derive(Debug, Clone)]
pub enum CellDecomposition {
    /// Active pieces sorted by slope; `breakpoints[k]` separates piece
    /// `pieces[k]` from `pieces[k+1]`. The first and last cells are
    /// unbounded.
    OneD {
        pieces: Vec<usize>,
        breakpoints: Vec<f64>,
    },
    TwoD { cells: Vec<PolygonCell> },
}

impl MaxAffineConvex {
    pub fn new(sites: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Invalid("need at least one affine piece".into()));
        }
        if sites.len() != offsets.len() {
            return Err(Error::Invalid(format!(
                "{} sites but {} offsets",
                sites.len(),
                offsets.len()
            )));
        }
        let dim = sites[0].len();
        if dim == 0 {
            return Err(Error::Invalid("sites must have positive dimension".into()));
        }
        for s in &sites {
            if s.len() != dim {
                return Err(Error::DimensionMismatch(dim, s.len()));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("non-finite site".into()));
            }
        }
        if offsets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite offset".into()));
        }
        for i in 0..sites.len() {
            for j in (i + 1)..sites.len() {
                if sites[i] == sites[j] {
                    return Err(Error::Invalid(format!("duplicate sites {i} and {j}")));
                }
            }
        }
        let n = sites.len();
        Ok(Self {
            dim,
            sites,
            offsets,
            active: vec![true; n],
        })
    }

    pub fn from_1d(slopes: &[f64], offsets: &[f64]) -> Result<Self> {
        Self::new(
            slopes.iter().map(|&y| vec![y]).collect(),
            offsets.to_vec(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.sites
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn num_pieces(&self) -> usize {
        self.sites.len()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.sites.len()).filter(|&i| self.active[i]).collect()
    }

    /// Replace all offsets, resetting the active mask (callers re-prune).
    pub fn with_offsets(&self, offsets: Vec<f64>) -> Result<Self> {
        Self::new(self.sites.clone(), offsets)
    }

    /// Evaluate u at x; ties resolve to the lowest piece index.
    pub fn evaluate(&self, x: &[f64]) -> (f64, usize) {
        debug_assert_eq!(x.len(), self.dim);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, (s, &v)) in self.sites.iter().zip(&self.offsets).enumerate() {
            if !self.active[i] {
                continue;
            }
            let val = dot(x, s) - v;
            if val > best {
                best = val;
                arg = i;
            }
        }
        (best, arg)
    }

    /// Recompute the active mask: a piece is active iff it attains the
    /// envelope on a set of positive volume.
    pub fn prune(&self) -> Self {
        let mut out = self.clone();
        match self.dim {
            1 => out.active = self.prune_1d(),
            2 => out.active = self.prune_2d(),
            _ => {
                // In higher dimensions keep every piece; integration handles
                // zero-mass pieces through the argmax sampling path.
                out.active = vec![true; self.sites.len()];
            }
        }
        out
    }

    fn prune_1d(&self) -> Vec<bool> {
        let n = self.sites.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.sites[a][0].partial_cmp(&self.sites[b][0]).unwrap());
        // Upper envelope of lines y_i x - v_i with strictly increasing slopes:
        // the middle of three consecutive kept lines is dropped when it never
        // rises strictly above the other two.
        let slope = |i: usize| self.sites[i][0];
        let bad = |a: usize, b: usize, c: usize| {
            let (ya, yb, yc) = (slope(a), slope(b), slope(c));
            let (va, vb, vc) = (self.offsets[a], self.offsets[b], self.offsets[c]);
            (yb - ya) * (vc - va) <= (vb - va) * (yc - ya)
        };
        let mut hull: Vec<usize> = Vec::with_capacity(n);
        for &i in &order {
            while hull.len() >= 2 && bad(hull[hull.len() - 2], hull[hull.len() - 1], i) {
                hull.pop();
            }
            hull.push(i);
        }
        let mut active = vec![false; n];
        for &i in &hull {
            active[i] = true;
        }
        active
    }

    fn prune_2d(&self) -> Vec<bool> {
        let n = self.sites.len();
        let b = self.reference_box();
        let mut active = vec![false; n];
        for i in 0..n {
            let poly = self.cell_polygon(i, (0..n).filter(|&j| j != i), b);
            if poly.len() < 3 {
                continue;
            }
            // interiority test at the centroid, scale-aware
            let c = centroid(&poly);
            let mut margin = f64::INFINITY;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let nx = self.sites[i][0] - self.sites[j][0];
                let ny = self.sites[i][1] - self.sites[j][1];
                let len = (nx * nx + ny * ny).sqrt();
                let rhs = self.offsets[i] - self.offsets[j];
                margin = margin.min((nx * c[0] + ny * c[1] - rhs) / len);
            }
            if margin > 1e-9 * (1.0 + norm(&c)) {
                active[i] = true;
            }
        }
        active
    }

    /// Half-width for clipping unbounded planar cells: large enough to cover
    /// every pairwise bisector line by a wide margin.
    fn reference_box(&self) -> f64 {
        let mut extent: f64 = 1.0;
        let n = self.sites.len();
        for i in 0..n {
            extent = extent.max(norm(&self.sites[i]));
            for j in (i + 1)..n {
                let d = crate::numerics::sub(&self.sites[i], &self.sites[j]);
                let len = norm(&d);
                if len > 1e-12 {
                    extent = extent.max((self.offsets[i] - self.offsets[j]).abs() / len);
                }
            }
        }
        (extent * 16.0).clamp(1e3, 1e9)
    }

    fn cell_polygon(
        &self,
        i: usize,
        others: impl Iterator<Item = usize>,
        half_width: f64,
    ) -> Vec<Point2> {
        let mut poly = box_polygon(half_width);
        for j in others {
            let nx = self.sites[i][0] - self.sites[j][0];
            let ny = self.sites[i][1] - self.sites[j][1];
            let rhs = self.offsets[i] - self.offsets[j];
            poly = clip_halfplane(&poly, [nx, ny], rhs);
            if poly.len() < 3 {
                return poly;
            }
        }
        poly
    }

    /// Cell decomposition of a pruned function. Errors when an inactive piece
    /// is still flagged active (its cell would be empty).
    pub fn cells(&self) -> Result<CellDecomposition> {
        match self.dim {
            1 => {
                let mut act = self.active_indices();
                if act.is_empty() {
                    return Err(Error::Invalid("no active pieces".into()));
                }
                act.sort_by(|&a, &b| self.sites[a][0].partial_cmp(&self.sites[b][0]).unwrap());
                let mut breakpoints = Vec::with_capacity(act.len().saturating_sub(1));
                for w in act.windows(2) {
                    let (i, j) = (w[0], w[1]);
                    let dy = self.sites[j][0] - self.sites[i][0];
                    let b = (self.offsets[j] - self.offsets[i]) / dy;
                    breakpoints.push(b);
                }
                if breakpoints.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::Invalid(
                        "cells of an unpruned function are not ordered; call prune() first".into(),
                    ));
                }
                Ok(CellDecomposition::OneD {
                    pieces: act,
                    breakpoints,
                })
            }
            2 => {
                let act = self.active_indices();
                if act.is_empty() {
                    return Err(Error::Invalid("no active pieces".into()));
                }
                let b = self.reference_box();
                let mut cells = Vec::with_capacity(act.len());
                for &i in &act {
                    let halfplanes: Vec<([f64; 2], f64)> = act
                        .iter()
                        .filter(|&&j| j != i)
                        .map(|&j| {
                            (
                                [
                                    self.sites[i][0] - self.sites[j][0],
                                    self.sites[i][1] - self.sites[j][1],
                                ],
                                self.offsets[i] - self.offsets[j],
                            )
                        })
                        .collect();
                    let poly =
                        self.cell_polygon(i, act.iter().cloned().filter(|&j| j != i), b);
                    if poly.len() < 3 {
                        return Err(Error::Invalid(format!(
                            "active piece {i} has an empty cell; prune() the function first"
                        )));
                    }
                    let eps = 1e-7 * b;
                    let bounded = poly
                        .iter()
                        .all(|p| p[0].abs() < b - eps && p[1].abs() < b - eps);
                    cells.push(PolygonCell {
                        piece: i,
                        halfplanes,
                        vertices: poly,
                        bounded,
                    });
                }
                Ok(CellDecomposition::TwoD { cells })
            }
            d => Err(Error::UnsupportedDimension(d)),
        }
    }

    /// Is 0 interior to the hull of the active sites (so that e^{-u} has a
    /// finite integral), and by what margin.
    ///
    /// Exact for d <= 2. For d >= 3 the margin is a non-certified estimate
    /// from seeded multi-start minimization of e -> max_i e . y_i.
    pub fn recession_check(&self) -> RecessionReport {
        let act = self.active_indices();
        match self.dim {
            1 => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &i in &act {
                    lo = lo.min(self.sites[i][0]);
                    hi = hi.max(self.sites[i][0]);
                }
                let interior = lo < 0.0 && hi > 0.0;
                RecessionReport {
                    interior,
                    margin: if interior { (-lo).min(hi) } else { 0.0 },
                }
            }
            2 => {
                let pts: Vec<Point2> = act
                    .iter()
                    .map(|&i| [self.sites[i][0], self.sites[i][1]])
                    .collect();
                let hull = convex_hull(&pts);
                let margin = origin_hull_margin(&hull);
                RecessionReport {
                    interior: margin > 0.0,
                    margin,
                }
            }
            d => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x52454345);
                let f = |e: &[f64]| -> f64 {
                    act.iter()
                        .map(|&i| dot(e, &self.sites[i]))
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let mut best = f64::INFINITY;
                for _ in 0..128 {
                    let mut e: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                    let n = norm(&e);
                    if n < 1e-9 {
                        continue;
                    }
                    for x in &mut e {
                        *x /= n;
                    }
                    let mut step = 0.3;
                    let mut cur = f(&e);
                    while step > 1e-9 {
                        let mut improved = false;
                        for k in 0..d {
                            for sgn in [1.0, -1.0] {
                                let mut cand = e.clone();
                                cand[k] += sgn * step;
                                let nn = norm(&cand);
                                for x in &mut cand {
                                    *x /= nn;
                                }
                                let v = f(&cand);
                                if v < cur {
                                    e = cand;
                                    cur = v;
                                    improved = true;
                                }
                            }
                        }
                        if !improved {
                            step *= 0.5;
                        }
                    }
                    best = best.min(cur);
                }
                RecessionReport {
                    interior: best > 1e-12,
                    margin: best.max(0.0),
                }
            }
        }
    }

    /// Z = int e^{-u} with a certified relative error (d = 1 closed form,
    /// d = 2 clipped-cell quadrature).
    pub fn integrate_exp_neg(&self) -> Result<IntegralReport> {
        integrate::integrate_exp_neg(self, 1)
    }

    /// Same as `integrate_exp_neg` with cell integrals evaluated on `threads`
    /// worker threads (per-cell results are reduced in index order, so the
    /// output does not depend on the thread count).
    pub fn integrate_exp_neg_threaded(&self, threads: usize) -> Result<IntegralReport> {
        integrate::integrate_exp_neg(self, threads.max(1))
    }

    /// Mass of e^{-u} on each piece's cell (zero for inactive pieces).
    pub fn cell_masses(&self) -> Result<Vec<f64>> {
        let report = self.integrate_exp_neg()?;
        Ok(report.cell_masses(self.num_pieces()))
    }

    /// Barycenter of the probability density e^{-u} / Z.
    pub fn barycenter_exp_neg(&self) -> Result<Vec<f64>> {
        let report = self.integrate_exp_neg()?;
        Ok(report.barycenter(self.dim))
    }
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvexWire {
    sites: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    #[serde(default)]
    active: Option<Vec<bool>>,
}

pub fn load_convex(bytes: &[u8]) -> Result<MaxAffineConvex> {
    let wire: ConvexWire =
        serde_json::from_slice(bytes).map_err(|e| Error::Malformed(e.to_string()))?;
    let mut u = MaxAffineConvex::new(wire.sites, wire.offsets)?;
    if let Some(active) = wire.active {
        if active.len() != u.num_pieces() {
            return Err(Error::Invalid("active mask length mismatch".into()));
        }
        u.active = active;
    }
    Ok(u)
}

pub fn convex_to_json(u: &MaxAffineConvex) -> String {
    let wire = ConvexWire {
        sites: u.sites.clone(),
        offsets: u.offsets.clone(),
        active: Some(u.active.clone()),
    };
    serde_json::to_string(&wire).expect("convex function serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_ln2() -> MaxAffineConvex {
        let ln2 = 2.0f64.ln();
        MaxAffineConvex::from_1d(&[-1.0, 1.0], &[-ln2, -ln2]).unwrap()
    }

    #[test]
    fn evaluate_absolute_value_plus_log2() {
        let u = abs_ln2();
        let ln2 = 2.0f64.ln();
        let (v0, a0) = u.evaluate(&[0.0]);
        assert!((v0 - ln2).abs() < 1e-15);
        assert_eq!(a0, 0, "tie at 0 goes to the lowest index");
        let (v3, a3) = u.evaluate(&[3.0]);
        assert!((v3 - (3.0 + ln2)).abs() < 1e-15);
        assert_eq!(a3, 1);
    }

    #[test]
    fn single_zero_piece_is_identically_zero() {
        let u = MaxAffineConvex::from_1d(&[0.0], &[0.0]).unwrap();
        assert_eq!(u.evaluate(&[5.0]), (0.0, 0));
        assert_eq!(u.evaluate(&[-7.5]), (0.0, 0));
    }

    #[test]
    fn prune_keeps_low_middle_piece() {
        let ln2 = 2.0f64.ln();
        let u = MaxAffineConvex::from_1d(&[-1.0, 0.0, 1.0], &[-ln2, -10.0, -ln2])
            .unwrap()
            .prune();
        assert_eq!(u.active(), &[true, true, true]);
    }

    #[test]
    fn prune_drops_dominated_middle_piece() {
        let ln2 = 2.0f64.ln();
        let u = MaxAffineConvex::from_1d(&[-1.0, 0.0, 1.0], &[-ln2, 10.0, -ln2])
            .unwrap()
            .prune();
        assert_eq!(u.active(), &[true, false, true]);
    }

    #[test]
    fn prune_single_piece_unchanged() {
        let u = MaxAffineConvex::from_1d(&[2.0], &[1.0]).unwrap().prune();
        assert_eq!(u.active(), &[true]);
    }

    #[test]
    fn cells_of_absolute_value() {
        let u = abs_ln2().prune();
        match u.cells().unwrap() {
            CellDecomposition::OneD { pieces, breakpoints } => {
                assert_eq!(pieces, vec![0, 1]);
                assert_eq!(breakpoints.len(), 1);
                assert!(breakpoints[0].abs() < 1e-15);
            }
            _ => panic!("expected 1-D cells"),
        }
    }

    #[test]
    fn cells_single_piece_whole_line() {
        let u = MaxAffineConvex::from_1d(&[1.0], &[0.0]).unwrap().prune();
        match u.cells().unwrap() {
            CellDecomposition::OneD { pieces, breakpoints } => {
                assert_eq!(pieces.len(), 1);
                assert!(breakpoints.is_empty());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn quadrant_cells_in_2d() {
        // sites at the four axis directions, zero offsets: cells are the four
        // diagonal quadrants meeting at the origin, all unbounded.
        let u = MaxAffineConvex::new(
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
            vec![0.0; 4],
        )
        .unwrap()
        .prune();
        assert_eq!(u.active(), &[true; 4]);
        match u.cells().unwrap() {
            CellDecomposition::TwoD { cells } => {
                assert_eq!(cells.len(), 4);
                for c in &cells {
                    assert!(!c.bounded);
                    assert_eq!(c.halfplanes.len(), 3);
                }
            }
            _ => panic!("expected 2-D cells"),
        }
    }

    #[test]
    fn recession_in_1d() {
        let u = abs_ln2();
        let r = u.recession_check();
        assert!(r.interior);
        assert!((r.margin - 1.0).abs() < 1e-15);
        let bad = MaxAffineConvex::from_1d(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!(!bad.recession_check().interior);
    }

    #[test]
    fn recession_in_2d_corners() {
        let u = MaxAffineConvex::new(
            vec![
                vec![1.0, 1.0],
                vec![1.0, -1.0],
                vec![-1.0, 1.0],
                vec![-1.0, -1.0],
            ],
            vec![0.0; 4],
        )
        .unwrap();
        let r = u.recession_check();
        assert!(r.interior);
        assert!((r.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_argmax_matches_cells_1d() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..8);
            let mut slopes: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            slopes.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let offsets: Vec<f64> = slopes.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = MaxAffineConvex::from_1d(&slopes, &offsets).unwrap().prune();
            let cells = match u.cells().unwrap() {
                CellDecomposition::OneD { pieces, breakpoints } => (pieces, breakpoints),
                _ => unreachable!(),
            };
            for _ in 0..50 {
                let x = rng.gen_range(-10.0..10.0);
                let (_, arg) = u.evaluate(&[x]);
                // locate the cell containing x
                let k = cells.1.iter().filter(|&&b| b < x).count();
                assert_eq!(arg, cells.0[k], "x={x}");
            }
        }
    }

    #[test]
    fn wire_round_trip() {
        let u = abs_ln2().prune();
        let s = convex_to_json(&u);
        let back = load_convex(s.as_bytes()).unwrap();
        assert_eq!(u, back);
    }

    #[test]
    fn duplicate_sites_rejected() {
        assert!(MaxAffineConvex::from_1d(&[1.0, 1.0], &[0.0, 0.5]).is_err());
    }
}
