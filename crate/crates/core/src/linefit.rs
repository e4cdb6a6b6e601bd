//! Implicit lines from selected feature progressions, explicit line segments from image edges,
//! and the pooled line set handed to the estimator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Feature;
use crate::geometry::{fit_line_lsq, HomLine, LineSource, OrientedLine, Point2};
use crate::raster::GrayImage;
use crate::scalar::Scalar;
use crate::selection::OrderedSubset;

/// Oriented line through a selected subset, pointing from its larger-scale end towards its
/// smaller-scale end.
pub fn fit_oriented_line<T: Scalar>(subset: &OrderedSubset<T>, features: &[Feature<T>]) -> Result<OrientedLine<T>> {
    if subset.len() < 3 {
        return Err(Error::InvalidInput("implicit line needs at least 3 features".into()));
    }
    let points: Vec<Point2<T>> = subset.feature_ids.iter().map(|&i| features[i].position()).collect();
    let fit = fit_line_lsq(&points, None)?;
    let tangent = fit.line.tangent();
    let params: Vec<T> = points.iter().map(|p| (*p - fit.centroid).dot(tangent)).collect();
    let sizes: Vec<T> = subset.feature_ids.iter().map(|&i| features[i].keypoint.size).collect();

    let pick =
        |better: fn(T, T) -> bool| {
            (0..params.len())
                .reduce(|a, b| {
                    if better(params[b], params[a]) || (params[b] == params[a] && sizes[b] > sizes[a]) {
                        b
                    } else {
                        a
                    }
                })
                .unwrap()
        };
    let lo = pick(|x, y| x < y);
    let hi = pick(|x, y| x > y);

    // +1 when sizes shrink towards +tangent, -1 when they grow, 0 when undecided
    let mut sign = if sizes[lo] > sizes[hi] {
        1
    } else if sizes[lo] < sizes[hi] {
        -1
    } else {
        0
    };
    if sign == 0 {
        let n = T::from_usize_lossy(params.len());
        let mt = params.iter().copied().sum::<T>() / n;
        let ms = sizes.iter().copied().sum::<T>() / n;
        let cov: T = params.iter().zip(&sizes).map(|(t, s)| (*t - mt) * (*s - ms)).sum();
        let var_t: T = params.iter().map(|t| (*t - mt) * (*t - mt)).sum();
        let var_s: T = sizes.iter().map(|s| (*s - ms) * (*s - ms)).sum();
        let tol = T::epsilon() * T::lit(64.0) * (var_t * var_s).sqrt();
        if cov < -tol {
            sign = 1;
        } else if cov > tol {
            sign = -1;
        }
    }
    let direction = match sign {
        1 => Some(tangent),
        -1 => Some(-tangent),
        _ => None,
    };
    Ok(OrientedLine {
        line: fit.line,
        anchor: fit.centroid,
        direction,
        source: LineSource::Implicit,
        weight: T::zero(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment<T> {
    pub p0: Point2<T>,
    pub p1: Point2<T>,
}

impl<T: Scalar> LineSegment<T> {
    pub fn new(p0: Point2<T>, p1: Point2<T>) -> Self {
        LineSegment { p0, p1 }
    }

    pub fn length(&self) -> T {
        (self.p1 - self.p0).norm()
    }

    pub fn midpoint(&self) -> Point2<T> {
        (self.p0 + self.p1) * T::lit(0.5)
    }

    /// Undirected explicit line anchored at the midpoint.
    pub fn to_line(&self) -> Result<OrientedLine<T>> {
        let line = HomLine::through(self.p0, self.p1)?;
        Ok(OrientedLine::undirected(line, self.midpoint(), LineSource::Explicit))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    /// Segments shorter than this (pixels) are dropped.
    pub min_length: f64,
    /// Gradient magnitude threshold for intensities in `[0, 1]`.
    pub gradient_threshold: f64,
    /// Maximum deviation (degrees) of a pixel's gradient direction from its region's.
    pub angle_tolerance_deg: f64,
    /// Pre-smoothing σ in pixels.
    pub blur_sigma: f64,
    /// Minimum ratio of region pixels to the area of its bounding rectangle of width 2 px.
    pub min_density: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            min_length: 20.0,
            gradient_threshold: 0.05,
            angle_tolerance_deg: 22.5,
            blur_sigma: 0.8,
            min_density: 0.4,
        }
    }
}

/// Line-support regions: pixels with strong gradients of similar direction are grown from the
/// strongest seeds, and each region is summarized by its principal axis.
pub fn detect_segments<T: Scalar>(image: &GrayImage, params: &SegmentParams) -> Vec<LineSegment<T>> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 || image.variance() == 0.0 {
        return Vec::new();
    }
    let img = image.gaussian_blur(params.blur_sigma as f32);
    let mut mag = vec![0f32; w * h];
    let mut ang = vec![0f32; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            // Sobel
            let g = |dx: isize, dy: isize| img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
            let gx = (g(1, -1) + 2.0 * g(1, 0) + g(1, 1) - g(-1, -1) - 2.0 * g(-1, 0) - g(-1, 1)) / 8.0;
            let gy = (g(-1, 1) + 2.0 * g(0, 1) + g(1, 1) - g(-1, -1) - 2.0 * g(0, -1) - g(1, -1)) / 8.0;
            mag[y * w + x] = gx.hypot(gy);
            ang[y * w + x] = gy.atan2(gx);
        }
    }
    let thr = params.gradient_threshold as f32;
    let mut seeds: Vec<usize> = (0..w * h).filter(|&i| mag[i] > thr).collect();
    seeds.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let tol = (params.angle_tolerance_deg as f32).to_radians();
    let mut used = vec![false; w * h];
    let mut out = Vec::new();
    let mut region = Vec::new();
    let mut stack = Vec::new();

    for &seed in &seeds {
        if used[seed] {
            continue;
        }
        region.clear();
        stack.clear();
        used[seed] = true;
        stack.push(seed);
        let (mut sx, mut sy) = (ang[seed].cos(), ang[seed].sin());
        let mut region_angle = ang[seed];
        while let Some(i) = stack.pop() {
            region.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 1 || ny < 1 || nx >= w as isize - 1 || ny >= h as isize - 1 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if used[j] || mag[j] <= thr {
                        continue;
                    }
                    let mut d = (ang[j] - region_angle).abs() % std::f32::consts::TAU;
                    if d > std::f32::consts::PI {
                        d = std::f32::consts::TAU - d;
                    }
                    if d > tol {
                        continue;
                    }
                    used[j] = true;
                    stack.push(j);
                    sx += ang[j].cos();
                    sy += ang[j].sin();
                    region_angle = sy.atan2(sx);
                }
            }
        }
        if region.len() < 3 {
            continue;
        }
        if let Some(seg) = region_segment(&region, &mag, w, params) {
            out.push(seg);
        }
    }
    out
}

fn region_segment<T: Scalar>(
    region: &[usize],
    mag: &[f32],
    w: usize,
    params: &SegmentParams,
) -> Option<LineSegment<T>> {
    let points: Vec<Point2<f64>> = region.iter().map(|&i| Point2::new((i % w) as f64, (i / w) as f64)).collect();
    let weights: Vec<f64> = region.iter().map(|&i| mag[i] as f64).collect();
    let fit = fit_line_lsq(&points, Some(&weights)).ok()?;
    let t = fit.line.tangent();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &points {
        let s = (*p - fit.centroid).dot(t);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let length = hi - lo;
    if length < params.min_length {
        return None;
    }
    let width = points.iter().map(|p| fit.line.signed_distance(*p).abs()).fold(0.0, f64::max).max(1.0) * 2.0;
    if (region.len() as f64) < params.min_density * length * width {
        return None;
    }
    let p0 = fit.centroid + t * lo;
    let p1 = fit.centroid + t * hi;
    Some(LineSegment::new(p0.cast(), p1.cast()))
}

/// Reads segments from a headerless CSV with rows `x0,y0,x1,y1`.
pub fn load_segments<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<LineSegment<T>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let vals: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if vals.len() != 4 {
            return Err(Error::parse(path, line_no, format!("expected 4 values, found {}", vals.len())));
        }
        let mut v = [T::zero(); 4];
        for (k, s) in vals.iter().enumerate() {
            v[k] = s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(T::lit)
                .ok_or_else(|| Error::parse(path, line_no, format!("invalid number {s:?}")))?;
        }
        out.push(LineSegment::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3])));
    }
    Ok(out)
}

pub fn save_segments<T: Scalar>(segments: &[LineSegment<T>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for seg in segments {
        s.push_str(&format!("{},{},{},{}\n", seg.p0.x, seg.p0.y, seg.p1.x, seg.p1.y));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// The joint set of implicit and explicit lines.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePool<T> {
    pub lines: Vec<OrientedLine<T>>,
    pub n_implicit: usize,
    pub n_explicit: usize,
}

impl<T: Scalar> LinePool<T> {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Concatenates implicit lines and explicit segments (as undirected lines). Weights start at zero.
pub fn build_pool<T: Scalar>(implicit: Vec<OrientedLine<T>>, segments: &[LineSegment<T>]) -> Result<LinePool<T>> {
    let n_implicit = implicit.len();
    let mut lines = implicit;
    for seg in segments {
        lines.push(seg.to_line()?);
    }
    lines.iter_mut().for_each(|l| l.weight = T::zero());
    if lines.len() < 2 {
        return Err(Error::InsufficientLines);
    }
    let n_explicit = lines.len() - n_implicit;
    Ok(LinePool { lines, n_implicit, n_explicit })
}
