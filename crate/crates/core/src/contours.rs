//! Planar quantile contours.
//!
//! Halfspace contours intersect the upper halfspaces of a directional sweep.
//! Radial contours take, in each angular bin around the componentwise median
//! of a point cloud, the empirical τ-quantile of the distance to the center.

use std::f64::consts::TAU as TWO_PI;

use serde::{Deserialize, Serialize};

use crate::{DirectionalFit, Error, ModelTag, Result};

/// Normals closer than this (radians) are treated as parallel.
const PARALLEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    Halfspace,
    Radial,
}

/// Closed counterclockwise polygon; the first vertex is not repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub kind: ContourKind,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    pub vertices: Vec<[f64; 2]>,
}

impl Contour {
    /// Signed area (positive for counterclockwise vertices).
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Strict convexity with counterclockwise orientation.
    pub fn is_strictly_convex(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        n >= 3 && (0..n).all(|i| cross(v[i], v[(i + 1) % n], v[(i + 2) % n]) > 0.0)
    }

    /// Point-in-polygon; points on the boundary count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        point_in_polygon(&self.vertices, p)
    }

    pub fn translated(&self, by: [f64; 2]) -> Self {
        let mut c = self.clone();
        c.vertices.iter_mut().for_each(|v| {
            v[0] += by[0];
            v[1] += by[1];
        });
        if let Some(center) = c.center.as_mut() {
            center[0] += by[0];
            center[1] += by[1];
        }
        c
    }
}

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn point_in_polygon(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = v.len();
    let scale = v
        .iter()
        .fold(1.0_f64, |m, q| m.max(q[0].abs()).max(q[1].abs()));
    let eps = 1e-12 * scale;
    let mut inside = false;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        // boundary
        if cross(a, b, p).abs() <= eps * len.max(1.0)
            && p[0] >= a[0].min(b[0]) - eps
            && p[0] <= a[0].max(b[0]) + eps
            && p[1] >= a[1].min(b[1]) - eps
            && p[1] <= a[1].max(b[1]) + eps
        {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let xc = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < xc {
                inside = !inside;
            }
        }
    }
    inside
}

/// Halfspace `normal·y ≥ offset` with a unit normal.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    normal: [f64; 2],
    offset: f64,
    angle: f64,
}

/// Intersects `∩ {y : u'y − b_y·Γ_u'y ≥ a + b_x'π(x0)}` over the fits.
pub fn halfspace_intersection(fits: &[DirectionalFit], x0: f64) -> Result<Contour> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidInput("no directional fits".into()))?;
    let tau = first.tau;
    if fits.iter().any(|f| f.tau != tau) {
        return Err(Error::InvalidInput(
            "directional fits have mixed tau".into(),
        ));
    }
    if !(tau > 0.0 && tau < 0.5) {
        return Err(Error::InvalidInput(format!(
            "halfspace contours need tau in (0, 0.5), got {tau}"
        )));
    }
    let mut planes = Vec::with_capacity(fits.len());
    for f in fits {
        let n = f.normal();
        let norm = n[0].hypot(n[1]);
        planes.push(HalfPlane {
            normal: [n[0] / norm, n[1] / norm],
            offset: f.offset_at(x0)? / norm,
            angle: n[1].atan2(n[0]).rem_euclid(TWO_PI),
        });
    }
    let vertices = intersect_halfplanes(planes)?;
    let conditional = fits.iter().any(|f| f.model_tag() != ModelTag::Intercept);
    Ok(Contour {
        kind: ContourKind::Halfspace,
        tau,
        at_x: conditional.then_some(x0),
        center: None,
        vertices,
    })
}

fn intersect_halfplanes(mut planes: Vec<HalfPlane>) -> Result<Vec<[f64; 2]>> {
    planes.sort_by(|a, b| a.angle.total_cmp(&b.angle));

    // Among near-parallel planes only the most restrictive one matters.
    let mut kept: Vec<HalfPlane> = Vec::with_capacity(planes.len());
    for hp in planes {
        match kept.last_mut() {
            Some(last) if hp.angle - last.angle <= PARALLEL_TOL => {
                if hp.offset > last.offset {
                    *last = hp;
                }
            }
            _ => kept.push(hp),
        }
    }
    if kept.len() > 1 {
        let (f, l) = (kept[0], kept[kept.len() - 1]);
        if f.angle + TWO_PI - l.angle <= PARALLEL_TOL {
            if l.offset > f.offset {
                kept[0] = l;
            }
            kept.pop();
        }
    }
    if kept.len() < 3 {
        return Err(Error::UnboundedRegion);
    }
    // Bounded only if the normals leave no angular gap of π or more.
    let max_gap = kept
        .windows(2)
        .map(|w| w[1].angle - w[0].angle)
        .chain(std::iter::once(
            kept[0].angle + TWO_PI - kept[kept.len() - 1].angle,
        ))
        .fold(0.0_f64, f64::max);
    if max_gap >= std::f64::consts::PI {
        return Err(Error::UnboundedRegion);
    }

    let reach = kept.iter().fold(1.0_f64, |m, h| m.max(h.offset.abs()));
    let big = 1e6 * reach;
    let mut poly = vec![[-big, -big], [big, -big], [big, big], [-big, big]];
    let eps = 1e-12 * reach;
    for hp in &kept {
        poly = clip(&poly, hp, eps);
        if poly.len() < 3 {
            return Err(Error::EmptyIntersection);
        }
    }
    if poly
        .iter()
        .any(|v| v[0].abs() >= 0.5 * big || v[1].abs() >= 0.5 * big)
    {
        return Err(Error::UnboundedRegion);
    }

    let poly = simplify(poly, reach);
    if poly.len() < 3 || signed_area(&poly) <= 1e-14 * reach * reach {
        return Err(Error::EmptyIntersection);
    }
    Ok(poly)
}

/// Sutherland–Hodgman step against one halfplane.
fn clip(poly: &[[f64; 2]], hp: &HalfPlane, eps: f64) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| hp.normal[0] * p[0] + hp.normal[1] * p[1] - hp.offset;
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let (sc, sn) = (side(cur), side(next));
        if sc >= -eps {
            out.push(cur);
        }
        if (sc >= -eps) != (sn >= -eps) {
            let t = sc / (sc - sn);
            out.push([
                cur[0] + t * (next[0] - cur[0]),
                cur[1] + t * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

/// Drops duplicate and collinear vertices.
fn simplify(mut poly: Vec<[f64; 2]>, scale: f64) -> Vec<[f64; 2]> {
    let tol = 1e-12 * scale;
    loop {
        let n = poly.len();
        if n < 3 {
            return poly;
        }
        let mut removed = false;
        for i in 0..n {
            let prev = poly[(i + n - 1) % n];
            let cur = poly[i];
            let next = poly[(i + 1) % n];
            let dup = (cur[0] - next[0]).hypot(cur[1] - next[1]) <= tol;
            let span = (next[0] - prev[0]).hypot(next[1] - prev[1]).max(tol);
            if dup || cross(prev, cur, next) <= tol * span {
                poly.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            return poly;
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn componentwise_median(cloud: &[[f64; 2]]) -> Result<[f64; 2]> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("empty point cloud".into()));
    }
    let mut a: Vec<f64> = cloud.iter().map(|p| p[0]).collect();
    let mut b: Vec<f64> = cloud.iter().map(|p| p[1]).collect();
    Ok([median(&mut a), median(&mut b)])
}

/// Coverage-τ contour from angular bins of width `2π/n_angles` about the
/// componentwise median. Vertices sit at the bin mid-angles.
pub fn radial_contour(
    cloud: &[[f64; 2]],
    tau: f64,
    n_angles: usize,
    at_x: Option<f64>,
) -> Result<Contour> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("tau = {tau} is not in (0, 1)")));
    }
    if n_angles < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 angle bins, got {n_angles}"
        )));
    }
    if n_angles < 8 {
        log::warn!("{n_angles} angle bins give a coarse radial contour");
    }
    let center = componentwise_median(cloud)?;
    if cloud.len() < 50 * n_angles {
        log::warn!(
            "radial contour from {} points over {} bins is noisy",
            cloud.len(),
            n_angles
        );
    }
    let width = TWO_PI / n_angles as f64;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_angles];
    for p in cloud {
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        let angle = dy.atan2(dx).rem_euclid(TWO_PI);
        let b = ((angle / width) as usize).min(n_angles - 1);
        bins[b].push(dx.hypot(dy));
    }
    let mut vertices = Vec::with_capacity(n_angles);
    for (b, dists) in bins.iter_mut().enumerate() {
        if dists.is_empty() {
            return Err(Error::EmptyAngleBin { bin: b });
        }
        // inverse empirical CDF: smallest radius covering a fraction τ
        let m = dists.len();
        let k = ((tau * m as f64).ceil() as usize).clamp(1, m) - 1;
        let (_, r, _) = dists.select_nth_unstable_by(k, f64::total_cmp);
        let angle = (b as f64 + 0.5) * width;
        vertices.push([center[0] + *r * angle.cos(), center[1] + *r * angle.sin()]);
    }
    Ok(Contour {
        kind: ContourKind::Radial,
        tau,
        at_x,
        center: Some(center),
        vertices,
    })
}

/// Fraction of `points` inside or on the contour.
pub fn coverage(contour: &Contour, points: &[[f64; 2]]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let inside = points.iter().filter(|&&p| contour.contains(p)).count();
    inside as f64 / points.len() as f64
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn directed_distance(from: &[[f64; 2]], to: &[[f64; 2]]) -> f64 {
    const SAMPLES: usize = 8;
    let n = from.len();
    let mut worst = 0.0_f64;
    for i in 0..n {
        let (a, b) = (from[i], from[(i + 1) % n]);
        for s in 0..SAMPLES {
            let t = s as f64 / SAMPLES as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let m = to.len();
            let d = (0..m)
                .map(|j| point_segment_distance(p, to[j], to[(j + 1) % m]))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Hausdorff distance between two polygon boundaries (edges sampled).
pub fn hausdorff_distance(a: &Contour, b: &Contour) -> f64 {
    directed_distance(&a.vertices, &b.vertices).max(directed_distance(&b.vertices, &a.vertices))
}
