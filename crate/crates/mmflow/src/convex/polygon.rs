//! Convex polygon helpers for planar cell decompositions: halfplane clipping,
//! areas, centroids and convex hulls.

pub type Point2 = [f64; 2];

/// Counterclockwise axis-aligned square [-b, b]^2.
pub fn box_polygon(b: f64) -> Vec<Point2> {
    vec![[-b, -b], [b, -b], [b, b], [-b, b]]
}

/// Clip a convex polygon against the halfplane { x : n . x >= rhs }
/// (Sutherland-Hodgman step). Returns an empty polygon when nothing remains.
pub fn clip_halfplane(poly: &[Point2], n: [f64; 2], rhs: f64) -> Vec<Point2> {
    if poly.is_empty() {
        return Vec::new();
    }
    let side = |p: &Point2| n[0] * p[0] + n[1] * p[1] - rhs;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let nxt = poly[(i + 1) % poly.len()];
        let sc = side(&cur);
        let sn = side(&nxt);
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc > 0.0 && sn < 0.0) || (sc < 0.0 && sn > 0.0) {
            let t = sc / (sc - sn);
            out.push([cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])]);
        }
    }
    out
}

pub fn area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

pub fn centroid(poly: &[Point2]) -> Point2 {
    let a = area(poly);
    if a.abs() < 1e-300 {
        // degenerate: fall back to vertex average
        let n = poly.len().max(1) as f64;
        let mut c = [0.0, 0.0];
        for p in poly {
            c[0] += p[0] / n;
            c[1] += p[1] / n;
        }
        return c;
    }
    let mut c = [0.0, 0.0];
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let w = p[0] * q[1] - q[0] * p[1];
        c[0] += (p[0] + q[0]) * w;
        c[1] += (p[1] + q[1]) * w;
    }
    [c[0] / (6.0 * a), c[1] / (6.0 * a)]
}

/// Convex hull (Andrew monotone chain), counterclockwise, no duplicate
/// endpoints. Collinear interior points are dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point2, a: &Point2, b: &Point2| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed margin of the origin inside a counterclockwise convex hull:
/// the minimum distance to an edge line, positive iff strictly interior.
/// Returns 0 for degenerate hulls.
pub fn origin_hull_margin(hull: &[Point2]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let mut margin = f64::INFINITY;
    for i in 0..hull.len() {
        let p = hull[i];
        let q = hull[(i + 1) % hull.len()];
        let ex = q[0] - p[0];
        let ey = q[1] - p[1];
        let len = (ex * ex + ey * ey).sqrt();
        if len < 1e-300 {
            continue;
        }
        // distance of origin to the edge line, positive on the interior side
        let d = (ex * (-p[1]) - ey * (-p[0])) / len;
        margin = margin.min(d);
    }
    margin.max(0.0).min(f64::MAX)
}

/// Fan triangulation of a convex polygon.
pub fn triangulate(poly: &[Point2]) -> Vec<[Point2; 3]> {
    let mut tris = Vec::new();
    for i in 1..poly.len().saturating_sub(1) {
        tris.push([poly[0], poly[i], poly[i + 1]]);
    }
    tris
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_square_by_diagonal() {
        let sq = box_polygon(1.0);
        let half = clip_halfplane(&sq, [1.0, 0.0], 0.0); // keep x >= 0
        assert!((area(&half) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clip_to_empty() {
        let sq = box_polygon(1.0);
        let gone = clip_halfplane(&sq, [1.0, 0.0], 5.0);
        assert!(gone.is_empty() || area(&gone) < 1e-12);
    }

    #[test]
    fn hull_and_margin_of_diamond() {
        let pts = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.1, 0.1]];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        let m = origin_hull_margin(&hull);
        assert!((m - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn margin_zero_outside() {
        let hull = convex_hull(&[[1.0, 1.0], [2.0, 1.0], [1.5, 3.0]]);
        assert_eq!(origin_hull_margin(&hull), 0.0);
    }

    #[test]
    fn centroid_of_square() {
        let sq = box_polygon(2.0);
        let c = centroid(&sq);
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn triangulation_covers_area() {
        let sq = box_polygon(1.5);
        let total: f64 = triangulate(&sq)
            .iter()
            .map(|t| area(&t.to_vec()))
            .sum();
        assert!((total - area(&sq)).abs() < 1e-12);
    }
}
