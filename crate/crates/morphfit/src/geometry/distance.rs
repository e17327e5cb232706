//! Signed-distance construction from a background field of 𝒢.
//!
//! The zero set of 𝒢 is extracted as a point cloud by bisection along the
//! nodal lattice lines of every leaf cell, then σ(x) = sign(𝒢(x)) · distance
//! to the nearest cloud point, interpolated back onto the same cell tree.
//! Because sign-change cells sit at maximum refinement depth, the zero set
//! of the result stays within one finest cell of the zero set of 𝒢.

use crate::error::{Error, Result};
use crate::geometry::BackgroundField;

/// A zero-set sample: position and unit normal (∇𝒢 direction) there.
type CloudPoint = ([f64; 3], [f64; 3]);

/// Exact nearest-neighbor search over a fixed point cloud: median-split
/// kd-tree, axes cycled by depth, points reordered in place.
struct KdTree {
    pts: Vec<CloudPoint>,
    dim: usize,
}

impl KdTree {
    fn build(dim: usize, mut pts: Vec<CloudPoint>) -> Self {
        fn split(pts: &mut [CloudPoint], axis: usize, dim: usize) {
            if pts.len() <= 8 {
                return;
            }
            let mid = pts.len() / 2;
            pts.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]));
            let next = (axis + 1) % dim;
            let (lo, rest) = pts.split_at_mut(mid);
            split(lo, next, dim);
            split(&mut rest[1..], next, dim);
        }
        split(&mut pts, 0, dim);
        KdTree { pts, dim }
    }

    fn nearest(&self, x: [f64; 3]) -> (f64, CloudPoint) {
        fn dist_sq(a: [f64; 3], b: [f64; 3], dim: usize) -> f64 {
            (0..dim).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
        }
        fn descend(
            pts: &[CloudPoint],
            axis: usize,
            dim: usize,
            x: [f64; 3],
            best: &mut (f64, CloudPoint),
        ) {
            if pts.len() <= 8 {
                for p in pts {
                    let d = dist_sq(p.0, x, dim);
                    if d < best.0 {
                        *best = (d, *p);
                    }
                }
                return;
            }
            let mid = pts.len() / 2;
            let d = dist_sq(pts[mid].0, x, dim);
            if d < best.0 {
                *best = (d, pts[mid]);
            }
            let delta = x[axis] - pts[mid].0[axis];
            let next = (axis + 1) % dim;
            let (near, far) = if delta < 0.0 {
                (&pts[..mid], &pts[mid + 1..])
            } else {
                (&pts[mid + 1..], &pts[..mid])
            };
            descend(near, next, dim, x, best);
            if delta * delta < best.0 {
                descend(far, next, dim, x, best);
            }
        }
        let mut best = (f64::INFINITY, ([0.0; 3], [0.0; 3]));
        descend(&self.pts, 0, self.dim, x, &mut best);
        (best.0.sqrt(), best.1)
    }
}

/// Bisects 𝒢 between two parameters of a lattice line with opposite signs.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if (fa <= 0.0) == (fm <= 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Dense point cloud on the zero set of the stored field, with the local
/// field gradient direction as an approximate interface normal.
fn zero_points(bg: &BackgroundField) -> Vec<CloudPoint> {
    let dim = bg.dim();
    let n1 = bg.order() + 1;
    let nsamp = 3 * n1;
    let mut cloud = Vec::new();
    for id in bg.leaves() {
        let (lo, hi) = bg.cell_box(id);
        let stations = bg.cell_node_positions(id);
        for axis in 0..dim {
            // One lattice line per nodal station of the other axes: vary
            // `axis`, keep the station's remaining coordinates.
            let mut seen = Vec::new();
            for st in &stations {
                let mut key = *st;
                key[axis] = lo[axis];
                if seen.iter().any(|s: &[f64; 3]| {
                    (0..dim).all(|a| (s[a] - key[a]).abs() < 1e-14)
                }) {
                    continue;
                }
                seen.push(key);
                let line = |t: f64| {
                    let mut p = key;
                    p[axis] = lo[axis] + (hi[axis] - lo[axis]) * t;
                    p
                };
                let g = |t: f64| bg.eval_value(line(t)).unwrap_or(f64::NAN);
                let mut prev = g(0.0);
                for s in 1..=nsamp {
                    let t = s as f64 / nsamp as f64;
                    let cur = g(t);
                    if prev.is_finite() && cur.is_finite() && (prev <= 0.0) != (cur <= 0.0) {
                        let root = bisect(&g, (s - 1) as f64 / nsamp as f64, t);
                        let p = line(root);
                        let mut n = [0.0; 3];
                        if let Ok(ev) = bg.eval(p) {
                            let norm =
                                (0..dim).map(|a| ev.grad[a] * ev.grad[a]).sum::<f64>().sqrt();
                            if norm > 1e-12 {
                                for a in 0..dim {
                                    n[a] = ev.grad[a] / norm;
                                }
                            }
                        }
                        cloud.push((p, n));
                    }
                    prev = cur;
                }
            }
        }
    }
    cloud
}

/// Replaces the field 𝒢 by the signed distance to its zero set, projected
/// onto the same cell tree with polynomial order `order`.
pub fn distance_field(bg: &BackgroundField, order: usize) -> Result<BackgroundField> {
    let points = zero_points(bg);
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "level set has no zero crossing inside the background domain".into(),
        ));
    }
    let cloud = KdTree::build(bg.dim(), points);
    let dim = bg.dim();
    let near = 3.0 * bg.finest_cell_diameter();
    Ok(bg.resampled(order, |p| {
        let (d_raw, (cp, n)) = cloud.nearest(p);
        // Cloud discreteness leaves O(spacing) scallops in the raw point
        // distance; close to the surface, the distance to the tangent
        // plane of the nearest sample is second-order accurate instead.
        let nn: f64 = (0..dim).map(|a| n[a] * n[a]).sum();
        let d = if d_raw <= near && nn > 0.25 {
            (0..dim).map(|a| (p[a] - cp[a]) * n[a]).sum::<f64>().abs()
        } else {
            d_raw
        };
        if bg.eval_value(p).unwrap_or(1.0) <= 0.0 {
            -d
        } else {
            d
        }
    }))
}
