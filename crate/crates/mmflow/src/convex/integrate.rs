//! Integration of e^{-u} for max-affine u.
//!
//! d = 1 uses per-cell closed forms (exponentials of affine functions over
//! intervals, with series fallbacks near the zero-slope limit). d = 2 clips
//! each cell to a tail-certified box, slices it into strips of bounded
//! exponent range, and applies order-12 tensor Gauss quadrature per triangle
//! with one adaptive bisection level. Everything is carried in log space so
//! arbitrary offset gauges cannot overflow.

use crate::error::{Error, Result};
use crate::numerics::logsumexp;

use super::polygon::{box_polygon, centroid, clip_halfplane, triangulate, Point2};
use super::{CellDecomposition, MaxAffineConvex};

/// Mass and mean position of e^{-u} restricted to one cell.
#[derive(Debug, Clone)]
pub struct CellIntegral {
    pub piece: usize,
    pub log_mass: f64,
    pub mean: Vec<f64>,
}

/// Result of integrating e^{-u}: Z, its log, a certified relative error and
/// the per-cell breakdown.
#[derive(Debug, Clone)]
pub struct IntegralReport {
    pub log_z: f64,
    pub z: f64,
    pub certified_rel_error: f64,
    cells: Vec<CellIntegral>,
}

impl IntegralReport {
    pub fn cell_details(&self) -> &[CellIntegral] {
        &self.cells
    }

    /// Absolute cell masses indexed by piece (inactive pieces get 0).
    pub fn cell_masses(&self, num_pieces: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_pieces];
        for c in &self.cells {
            out[c.piece] = c.log_mass.exp();
        }
        out
    }

    /// Cell masses divided by Z, indexed by piece. Stable for any gauge.
    pub fn cell_mass_fractions(&self, num_pieces: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_pieces];
        for c in &self.cells {
            out[c.piece] = (c.log_mass - self.log_z).exp();
        }
        out
    }

    /// Barycenter of e^{-u} / Z.
    pub fn barycenter(&self, dim: usize) -> Vec<f64> {
        let mut b = vec![0.0; dim];
        for c in &self.cells {
            let w = (c.log_mass - self.log_z).exp();
            for (bi, mi) in b.iter_mut().zip(&c.mean) {
                *bi += w * mi;
            }
        }
        b
    }
}

pub(super) fn integrate_exp_neg(u: &MaxAffineConvex, threads: usize) -> Result<IntegralReport> {
    let rec = u.recession_check();
    if !rec.interior {
        return Err(Error::Recession(format!(
            "0 is not interior to the hull of active sites (margin {})",
            rec.margin
        )));
    }
    match u.dim() {
        1 => integrate_1d(u),
        2 => integrate_2d(u, rec.margin, threads),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

// ---------------------------------------------------------------------------
// d = 1: closed forms
// ---------------------------------------------------------------------------

/// (1 - e^{-z}) / z for z >= 0, continuous at 0.
fn g0(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// Normalized mean position of the density e^{-z t} on t in [0, 1]:
/// (1 - (1+z) e^{-z}) / (z (1 - e^{-z})), continuous at 0 with value 1/2.
fn g1(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        // series ratio: both expansions start at z^2
        (0.5 - z / 3.0 + z * z / 8.0) / (1.0 - z / 2.0 + z * z / 6.0)
    } else {
        let em = (-z).exp();
        (1.0 - (1.0 + z) * em) / (z * (1.0 - em))
    }
}

/// log integral and mean of e^{v - y x} over [a, b] (finite interval).
fn finite_cell(y: f64, v: f64, a: f64, b: f64) -> (f64, f64) {
    let len = b - a;
    debug_assert!(len >= 0.0);
    if len == 0.0 {
        return (f64::NEG_INFINITY, a);
    }
    if y >= 0.0 {
        // -u is largest at the left end
        let c = v - y * a;
        let z = y * len;
        (c + (len * g0(z)).ln(), a + len * g1(z))
    } else {
        let c = v - y * b;
        let z = -y * len;
        (c + (len * g0(z)).ln(), b - len * g1(z))
    }
}

fn integrate_1d(u: &MaxAffineConvex) -> Result<IntegralReport> {
    let (pieces, breakpoints) = match u.cells()? {
        CellDecomposition::OneD { pieces, breakpoints } => (pieces, breakpoints),
        _ => unreachable!(),
    };
    let last = pieces.len() - 1;
    let mut cells = Vec::with_capacity(pieces.len());
    for (k, &i) in pieces.iter().enumerate() {
        let y = u.sites()[i][0];
        let v = u.offsets()[i];
        let (log_mass, mean) = if k == 0 && k == last {
            return Err(Error::Recession(
                "a single affine piece never has a finite integral".into(),
            ));
        } else if k == 0 {
            // (-inf, b], slope must be negative
            let b = breakpoints[0];
            (v - y * b - (-y).ln(), b + 1.0 / y)
        } else if k == last {
            let a = breakpoints[k - 1];
            (v - y * a - y.ln(), a + 1.0 / y)
        } else {
            finite_cell(y, v, breakpoints[k - 1], breakpoints[k])
        };
        cells.push(CellIntegral {
            piece: i,
            log_mass,
            mean: vec![mean],
        });
    }
    let log_z = logsumexp(&cells.iter().map(|c| c.log_mass).collect::<Vec<_>>());
    Ok(IntegralReport {
        log_z,
        z: log_z.exp(),
        certified_rel_error: 1e-14,
        cells,
    })
}

// ---------------------------------------------------------------------------
// d = 2: strip-sliced Gauss quadrature over clipped cells
// ---------------------------------------------------------------------------

/// Exponent range per strip, in units of the (dimensionless) exponent.
const STRIP_STEP: f64 = 2.5;
/// Exponent depth below the box minimum of u beyond which mass is discarded
/// (relative contribution <= e^{-CROP_DEPTH} * area).
const CROP_DEPTH: f64 = 40.0;

struct TriQuad {
    mass: f64,
    mx: f64,
    my: f64,
    err: f64,
}

/// Order-12 tensor Gauss quadrature of w(x) = exp(g(x)) and x w(x) over a
/// triangle via the Duffy map, where g is affine.
fn gauss_triangle(tri: &[Point2; 3], g: &dyn Fn(f64, f64) -> f64) -> (f64, f64, f64) {
    use crate::numerics::{GAUSS12_NODES, GAUSS12_WEIGHTS};
    let [p0, p1, p2] = tri;
    let two_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let mut mass = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for (si, &ns) in GAUSS12_NODES.iter().enumerate() {
        let s = 0.5 * (ns + 1.0);
        let ws = 0.5 * GAUSS12_WEIGHTS[si];
        for (ti, &nt) in GAUSS12_NODES.iter().enumerate() {
            let t = 0.5 * (nt + 1.0);
            let wt = 0.5 * GAUSS12_WEIGHTS[ti];
            // Duffy: collapse the square onto the triangle
            let x = p0[0] * (1.0 - s) + p1[0] * s * (1.0 - t) + p2[0] * s * t;
            let y = p0[1] * (1.0 - s) + p1[1] * s * (1.0 - t) + p2[1] * s * t;
            let jac = two_area.abs() * s;
            let w = ws * wt * jac * g(x, y).exp();
            mass += w;
            mx += w * x;
            my += w * y;
        }
    }
    (mass, mx, my)
}

fn quad_triangle_adaptive(tri: &[Point2; 3], g: &dyn Fn(f64, f64) -> f64) -> TriQuad {
    let (c_mass, _, _) = gauss_triangle(tri, g);
    // one bisection level: split at edge midpoints into four triangles
    let [a, b, c] = tri;
    let mab = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let mbc = [(b[0] + c[0]) / 2.0, (b[1] + c[1]) / 2.0];
    let mca = [(c[0] + a[0]) / 2.0, (c[1] + a[1]) / 2.0];
    let subs = [
        [*a, mab, mca],
        [mab, *b, mbc],
        [mca, mbc, *c],
        [mab, mbc, mca],
    ];
    let mut f_mass = 0.0;
    let mut f_mx = 0.0;
    let mut f_my = 0.0;
    for s in &subs {
        let (m, x, y) = gauss_triangle(s, g);
        f_mass += m;
        f_mx += x;
        f_my += y;
    }
    TriQuad {
        mass: f_mass,
        mx: f_mx,
        my: f_my,
        err: (f_mass - c_mass).abs(),
    }
}

/// Integrate exp(g) over a convex polygon, g affine with range bounded by
/// pre-slicing into strips of exponent width STRIP_STEP.
fn integrate_polygon(poly: &[Point2], grad: [f64; 2], offset: f64) -> TriQuad {
    let g = move |x: f64, y: f64| grad[0] * x + grad[1] * y + offset;
    let mut gmin = f64::INFINITY;
    let mut gmax = f64::NEG_INFINITY;
    for p in poly {
        let v = g(p[0], p[1]);
        gmin = gmin.min(v);
        gmax = gmax.max(v);
    }
    let mut out = TriQuad {
        mass: 0.0,
        mx: 0.0,
        my: 0.0,
        err: 0.0,
    };
    if !gmin.is_finite() || poly.len() < 3 {
        return out;
    }
    let grad_norm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
    let strips: usize = (((gmax - gmin) / STRIP_STEP).ceil() as usize).max(1);
    for k in 0..strips {
        let lo = gmin + (gmax - gmin) * k as f64 / strips as f64;
        let hi = gmin + (gmax - gmin) * (k + 1) as f64 / strips as f64;
        let mut strip = poly.to_vec();
        if grad_norm > 1e-300 {
            // keep lo <= g <= hi
            strip = clip_halfplane(&strip, grad, lo - offset);
            strip = clip_halfplane(&strip, [-grad[0], -grad[1]], offset - hi);
        }
        if strip.len() < 3 {
            continue;
        }
        for tri in triangulate(&strip) {
            let q = quad_triangle_adaptive(&tri, &g);
            out.mass += q.mass;
            out.mx += q.mx;
            out.my += q.my;
            out.err += q.err;
        }
        if grad_norm <= 1e-300 {
            break; // constant exponent: a single pass covers the polygon
        }
    }
    out
}

fn integrate_2d(u: &MaxAffineConvex, alpha: f64, threads: usize) -> Result<IntegralReport> {
    let act = u.active_indices();
    let beta = act
        .iter()
        .map(|&i| u.offsets()[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let site_scale = act
        .iter()
        .map(|&i| crate::numerics::norm(&u.sites()[i]))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    // Rough lower bound on log Z: u(x) <= u(0) + site_scale |x| near 0.
    let u0 = u.evaluate(&[0.0, 0.0]).0;
    let log_z_floor = -u0 + std::f64::consts::PI.ln() - 2.0 * site_scale.max(1.0).ln() - 1.0;
    let mut radius = ((beta - log_z_floor + 60.0) / alpha).max(10.0 / site_scale);
    for _attempt in 0..8 {
        let (cells, abs_err, m_star) = integrate_2d_with_radius(u, &act, radius, threads)?;
        let logs: Vec<f64> = cells.iter().map(|c| c.log_mass).collect();
        let log_z = logsumexp(&logs);
        if log_z.is_finite() {
            // analytic tail of e^{beta - alpha |x|} outside the ball of this radius
            let log_tail = (2.0 * std::f64::consts::PI).ln() + beta - alpha * radius
                + (radius / alpha + 1.0 / (alpha * alpha)).ln();
            if log_tail <= (1e-10f64).ln() + log_z {
                let z_hat: f64 = (log_z + m_star).exp();
                let crop_err = 4.0 * radius * radius * (-CROP_DEPTH).exp();
                let tail_hat = (log_tail + m_star).exp();
                let rel = (abs_err + crop_err + tail_hat) / z_hat;
                if rel > 1e-6 {
                    return Err(Error::Quadrature(format!(
                        "certified relative error {rel:.3e} exceeds 1e-6"
                    )));
                }
                return Ok(IntegralReport {
                    log_z,
                    z: log_z.exp(),
                    certified_rel_error: rel.max(1e-15),
                    cells,
                });
            }
        }
        radius *= 1.6;
    }
    Err(Error::Quadrature(
        "tail bound not satisfied after box expansion".into(),
    ))
}

/// Integrate each active cell clipped to the box [-radius, radius]^2.
/// Returns per-cell integrals of e^{-(u - m*)} (log_mass already shifted back
/// by m*), the absolute quadrature error in the shifted scale, and m*.
fn integrate_2d_with_radius(
    u: &MaxAffineConvex,
    act: &[usize],
    radius: f64,
    threads: usize,
) -> Result<(Vec<CellIntegral>, f64, f64)> {
    // pass 1: cell polygons clipped to the box, and the box minimum of u
    let mut polys: Vec<(usize, Vec<Point2>)> = Vec::with_capacity(act.len());
    let mut m_star = f64::INFINITY;
    for &i in act {
        let mut poly = box_polygon(radius);
        for &j in act {
            if j == i {
                continue;
            }
            let n = [
                u.sites()[i][0] - u.sites()[j][0],
                u.sites()[i][1] - u.sites()[j][1],
            ];
            poly = clip_halfplane(&poly, n, u.offsets()[i] - u.offsets()[j]);
            if poly.len() < 3 {
                break;
            }
        }
        if poly.len() >= 3 {
            for p in &poly {
                let val = u.sites()[i][0] * p[0] + u.sites()[i][1] * p[1] - u.offsets()[i];
                m_star = m_star.min(val);
            }
        }
        polys.push((i, poly));
    }
    if !m_star.is_finite() {
        // nothing intersects the box; caller will enlarge it
        return Ok((Vec::new(), 0.0, 0.0));
    }

    let work = |(piece, poly): &(usize, Vec<Point2>)| -> (CellIntegral, f64) {
        let i = *piece;
        let y = [u.sites()[i][0], u.sites()[i][1]];
        let v = u.offsets()[i];
        // crop where u - m* > CROP_DEPTH: keep -y . x >= -(v + m* + CROP_DEPTH)
        let cropped = clip_halfplane(poly, [-y[0], -y[1]], -(v + m_star + CROP_DEPTH));
        if cropped.len() < 3 {
            return (
                CellIntegral {
                    piece: i,
                    log_mass: f64::NEG_INFINITY,
                    mean: vec![0.0, 0.0],
                },
                0.0,
            );
        }
        // integrand exp(m* + v - y . x) on the cell
        let q = integrate_polygon(&cropped, [-y[0], -y[1]], m_star + v);
        if q.mass <= 0.0 {
            let c = centroid(&cropped);
            return (
                CellIntegral {
                    piece: i,
                    log_mass: f64::NEG_INFINITY,
                    mean: vec![c[0], c[1]],
                },
                q.err,
            );
        }
        (
            CellIntegral {
                piece: i,
                log_mass: q.mass.ln() - m_star,
                mean: vec![q.mx / q.mass, q.my / q.mass],
            },
            q.err,
        )
    };

    let results: Vec<(CellIntegral, f64)> = if threads <= 1 || polys.len() <= 1 {
        polys.iter().map(work).collect()
    } else {
        // deterministic: chunk by index, then reassemble in index order
        let chunk = polys.len().div_ceil(threads);
        let mut slots: Vec<Option<(CellIntegral, f64)>> = vec![None; polys.len()];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (ci, part) in polys.chunks(chunk).enumerate() {
                let workref = &work;
                handles.push((
                    ci * chunk,
                    scope.spawn(move || part.iter().map(workref).collect::<Vec<_>>()),
                ));
            }
            for (base, h) in handles {
                for (off, r) in h.join().expect("integration worker panicked").into_iter().enumerate()
                {
                    slots[base + off] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.unwrap()).collect()
    };

    let mut cells = Vec::with_capacity(results.len());
    let mut abs_err = 0.0;
    for (c, e) in results {
        abs_err += e;
        if c.log_mass.is_finite() {
            cells.push(c);
        } else {
            cells.push(c); // keep zero-mass cells so fractions report 0
        }
    }
    Ok((cells, abs_err, m_star))
}

// ---------------------------------------------------------------------------
// Monte Carlo cross-check (also the only route for d >= 3)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub z: f64,
    pub stderr: f64,
    /// Cell masses by argmax binning, in Z units.
    pub cell_masses: Vec<f64>,
    pub samples: usize,
}

/// Importance-sampled Z = int e^{-u} with a radially exponential proposal
/// calibrated by the recession margin. Unbiased for any dimension; this is
/// the non-certified route used for d >= 3 and as a d = 2 cross-check.
pub fn integrate_exp_neg_monte_carlo(
    u: &MaxAffineConvex,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    use rand::{Rng, SeedableRng};
    let rec = u.recession_check();
    if !rec.interior {
        return Err(Error::Recession(format!(
            "0 is not interior to the hull of active sites (margin {})",
            rec.margin
        )));
    }
    let d = u.dim();
    let alpha = 0.9 * rec.margin;
    // q(x) = alpha^d e^{-alpha |x|} / (Gamma(d) omega_d),
    // omega_d = 2 pi^{d/2} / Gamma(d/2)
    let gamma_d: f64 = (1..d).map(|k| k as f64).product::<f64>().max(1.0);
    let gamma_half = |k: usize| -> f64 {
        // Gamma(k/2) for integer k >= 1
        let mut x = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
        let mut arg = if k % 2 == 0 { 1.0 } else { 0.5 };
        while arg < k as f64 / 2.0 - 1e-9 {
            x *= arg;
            arg += 1.0;
        }
        x
    };
    let omega_d = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d);
    let log_q_const = d as f64 * alpha.ln() - gamma_d.ln() - omega_d.ln();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut masses = vec![0.0; u.num_pieces()];
    let mut x = vec![0.0; d];
    for _ in 0..samples {
        // radius ~ Gamma(d, rate alpha) as a sum of exponentials
        let mut r = 0.0;
        for _ in 0..d {
            let e: f64 = rng.gen::<f64>();
            r -= e.max(1e-300).ln() / alpha;
        }
        // direction: Box-Muller normals, normalized
        loop {
            let mut n2 = 0.0;
            for xi in x.iter_mut() {
                let u1: f64 = rng.gen::<f64>().max(1e-300);
                let u2: f64 = rng.gen::<f64>();
                *xi = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                n2 += *xi * *xi;
            }
            if n2 > 1e-12 {
                let n = n2.sqrt();
                for xi in x.iter_mut() {
                    *xi = *xi / n * r;
                }
                break;
            }
        }
        let (uval, arg) = u.evaluate(&x);
        let log_w = -uval - (log_q_const - alpha * r);
        let w = log_w.exp();
        sum += w;
        sum_sq += w * w;
        masses[arg] += w;
    }
    let n = samples as f64;
    let z = sum / n;
    let var = (sum_sq / n - z * z).max(0.0) / n;
    for m in &mut masses {
        *m /= n;
    }
    Ok(MonteCarloReport {
        z,
        stderr: var.sqrt(),
        cell_masses: masses,
        samples,
    })
}
