//! Scale-space keypoints with 128-dimensional gradient-histogram descriptors.
//!
//! The detector builds a difference-of-Gaussian pyramid, keeps local extrema across
//! space and scale, refines them with a quadratic fit, rejects low-contrast and edge-like
//! responses, assigns dominant gradient orientations and samples a 4x4 grid of 8-bin
//! orientation histograms around each keypoint.

use std::f32::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve3;
use crate::raster::GrayImage;
use crate::scalar::Scalar;

pub const DESCRIPTOR_LEN: usize = 128;
const DESCR_WIDTH: usize = 4;
const DESCR_BINS: usize = 8;
const DESCR_SCALE: f32 = 3.0;
const DESCR_CLAMP: f32 = 0.2;
const ORI_BINS: usize = 36;
const ORI_SIGMA: f32 = 1.5;
const ORI_PEAK_RATIO: f32 = 0.8;
const EXTREMUM_BORDER: usize = 5;
const MAX_REFINE_STEPS: usize = 5;
pub const MIN_IMAGE_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint<T> {
    pub x: T,
    pub y: T,
    /// Characteristic scale σ in image pixels.
    pub size: T,
    /// Dominant gradient orientation in `[0, 2π)`.
    pub angle: T,
    /// Magnitude of the interpolated difference-of-Gaussian extremum.
    pub response: T,
    pub octave: i32,
}

/// 128 nonnegative values, unit L2 norm (or all zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor<T>(Vec<T>);

impl<T: Scalar> Descriptor<T> {
    /// Validates length and sign; normalizes to unit length unless the vector is zero.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() != DESCRIPTOR_LEN {
            return Err(Error::InvalidInput(format!(
                "descriptor has {} values, expected {DESCRIPTOR_LEN}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidInput("descriptor values must be finite and nonnegative".into()));
        }
        let mut d = Descriptor(values);
        let n = d.norm();
        if n > T::zero() && (n - T::one()).abs() > T::lit(1e-6) {
            d.0.iter_mut().for_each(|v| *v = *v / n);
        }
        Ok(d)
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn norm(&self) -> T {
        self.0.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == T::zero())
    }

    pub fn cast<U: Scalar>(&self) -> Descriptor<U> {
        Descriptor(self.0.iter().map(|v| U::lit(v.to_f64_lossy())).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature<T> {
    pub id: usize,
    pub keypoint: Keypoint<T>,
    pub descriptor: Descriptor<T>,
}

impl<T: Scalar> Feature<T> {
    pub fn position(&self) -> crate::geometry::Point2<T> {
        crate::geometry::Point2::new(self.keypoint.x, self.keypoint.y)
    }
}

/// Euclidean distance between two descriptors.
pub fn descriptor_distance<T: Scalar>(d1: &Descriptor<T>, d2: &Descriptor<T>) -> T {
    d1.0.iter().zip(&d2.0).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureParams {
    pub octaves: usize,
    pub scales_per_octave: usize,
    /// Blur of the first pyramid level.
    pub sigma: f64,
    /// Minimum |DoG| response for intensities in `[0, 1]`.
    pub contrast_threshold: f64,
    /// Maximum principal curvature ratio.
    pub edge_threshold: f64,
    /// Blur already present in the input image.
    pub assumed_blur: f64,
    /// Start the pyramid from a doubled image so blobs below `sigma` are found (octave -1).
    pub upsample: bool,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            octaves: 4,
            scales_per_octave: 3,
            sigma: 1.6,
            contrast_threshold: 0.03,
            edge_threshold: 10.0,
            assumed_blur: 0.5,
            upsample: true,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves == 0 || self.scales_per_octave == 0 {
            return Err(Error::Config("octaves and scales_per_octave must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.contrast_threshold >= 0.0 && self.edge_threshold > 1.0) {
            return Err(Error::Config("sigma must be > 0, contrast_threshold >= 0, edge_threshold > 1".into()));
        }
        if !(self.assumed_blur >= 0.0 && self.assumed_blur < self.sigma) {
            return Err(Error::Config("assumed_blur must lie in [0, sigma)".into()));
        }
        Ok(())
    }
}

struct Octave {
    gaussians: Vec<GrayImage>,
    dogs: Vec<GrayImage>,
}

struct Extremum {
    x: f32,
    y: f32,
    layer: usize,
    /// Scale in octave pixels.
    sigma: f32,
    response: f32,
}

/// Detects keypoints and computes their descriptors.
///
/// Output is sorted by octave, then by decreasing response, and ids are assigned in that order.
pub fn extract_features<T: Scalar>(image: &GrayImage, params: &FeatureParams) -> Result<Vec<Feature<T>>> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall { width: w, height: h, min: MIN_IMAGE_SIDE });
    }
    if image.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("image contains non-finite pixels".into()));
    }
    if image.variance() == 0.0 {
        return Ok(Vec::new());
    }

    let doubled;
    let (image, first_octave, assumed_blur) = if params.upsample {
        doubled = image.upsample();
        (&doubled, -1i32, 2.0 * params.assumed_blur as f32)
    } else {
        (image, 0, params.assumed_blur as f32)
    };
    let (w, h) = (image.width(), image.height());
    let s = params.scales_per_octave;
    let max_octaves = ((w.min(h) as f64 / 8.0).log2().floor() as usize).max(1);
    let n_octaves = (params.octaves + usize::from(params.upsample)).min(max_octaves);
    let sigma0 = params.sigma as f32;
    let k = 2f32.powf(1.0 / s as f32);
    let layer_sigma = |i: usize| sigma0 * k.powi(i as i32);
    let increments: Vec<f32> =
        (1..s + 3).map(|i| (layer_sigma(i).powi(2) - layer_sigma(i - 1).powi(2)).sqrt()).collect();

    let base_blur = (sigma0 * sigma0 - assumed_blur.min(0.99 * sigma0).powi(2)).sqrt();
    let mut base = image.gaussian_blur(base_blur);
    let mut raw: Vec<(usize, Keypoint<f32>, Vec<f32>)> = Vec::new();
    for o in 0..n_octaves {
        let mut gaussians = Vec::with_capacity(s + 3);
        gaussians.push(base.clone());
        for inc in &increments {
            let next = gaussians.last().unwrap().gaussian_blur(*inc);
            gaussians.push(next);
        }
        let dogs = gaussians.windows(2).map(|p| p[1].difference(&p[0])).collect();
        let octave = Octave { gaussians, dogs };
        for ext in find_extrema(&octave, params, sigma0) {
            // drop keypoints whose descriptor window leaves the image
            let gauss = &octave.gaussians[ext.layer];
            let half = 0.5 * DESCR_WIDTH as f32 * DESCR_SCALE * ext.sigma;
            let (ow, oh) = (gauss.width() as f32, gauss.height() as f32);
            if ext.x < half || ext.y < half || ext.x > ow - 1.0 - half || ext.y > oh - 1.0 - half {
                continue;
            }
            let scale = 2f32.powi(o as i32 + first_octave);
            for angle in dominant_orientations(gauss, &ext) {
                let desc = compute_descriptor(gauss, &ext, angle);
                if desc.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let kp = Keypoint {
                    x: ext.x * scale,
                    y: ext.y * scale,
                    size: ext.sigma * scale,
                    angle,
                    response: ext.response,
                    octave: o as i32 + first_octave,
                };
                raw.push((o, kp, desc));
            }
        }
        base = octave.gaussians[s].downsample();
        if base.width() < 2 * EXTREMUM_BORDER + 3 || base.height() < 2 * EXTREMUM_BORDER + 3 {
            break;
        }
    }

    raw.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.1.response.total_cmp(&a.1.response))
            .then(a.1.y.total_cmp(&b.1.y))
            .then(a.1.x.total_cmp(&b.1.x))
            .then(a.1.angle.total_cmp(&b.1.angle))
    });
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(id, (_, kp, desc))| Feature {
            id,
            keypoint: Keypoint {
                x: T::lit(kp.x as f64),
                y: T::lit(kp.y as f64),
                size: T::lit(kp.size as f64),
                angle: T::lit(kp.angle as f64),
                response: T::lit(kp.response as f64),
                octave: kp.octave,
            },
            descriptor: Descriptor(desc.into_iter().map(|v| T::lit(v as f64)).collect()),
        })
        .collect())
}

fn find_extrema(octave: &Octave, params: &FeatureParams, sigma0: f32) -> Vec<Extremum> {
    let s = params.scales_per_octave;
    let dogs = &octave.dogs;
    let (w, h) = (dogs[0].width(), dogs[0].height());
    if w <= 2 * EXTREMUM_BORDER || h <= 2 * EXTREMUM_BORDER {
        return Vec::new();
    }
    let prelim = 0.5 * params.contrast_threshold as f32 / s as f32;
    let mut out = Vec::new();
    for layer in 1..=s {
        let (below, cur, above) = (&dogs[layer - 1], &dogs[layer], &dogs[layer + 1]);
        for y in EXTREMUM_BORDER..h - EXTREMUM_BORDER {
            for x in EXTREMUM_BORDER..w - EXTREMUM_BORDER {
                let v = cur.get(x, y);
                if v.abs() <= prelim {
                    continue;
                }
                if !is_extremum(v, x, y, below, cur, above) {
                    continue;
                }
                if let Some(e) = refine(octave, params, sigma0, x, y, layer) {
                    out.push(e);
                }
            }
        }
    }
    out
}

fn is_extremum(v: f32, x: usize, y: usize, below: &GrayImage, cur: &GrayImage, above: &GrayImage) -> bool {
    let maximum = v > 0.0;
    for img in [below, cur, above] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if std::ptr::eq(img, cur) && xx == x && yy == y {
                    continue;
                }
                let n = img.get(xx, yy);
                if (maximum && n > v) || (!maximum && n < v) {
                    return false;
                }
            }
        }
    }
    true
}

fn refine(octave: &Octave, params: &FeatureParams, sigma0: f32, x: usize, y: usize, layer: usize) -> Option<Extremum> {
    let s = params.scales_per_octave;
    let dogs = &octave.dogs;
    let (w, h) = (dogs[0].width() as isize, dogs[0].height() as isize);
    let border = EXTREMUM_BORDER as isize;
    let (mut xi, mut yi, mut li) = (x as isize, y as isize, layer as isize);
    let mut offset = [0f32; 3];
    let mut grad = [0f32; 3];
    let mut converged = false;
    let mut hessian = [[0f32; 3]; 3];
    for _ in 0..MAX_REFINE_STEPS {
        let d = |dl: isize, dx: isize, dy: isize| dogs[(li + dl) as usize].get((xi + dx) as usize, (yi + dy) as usize);
        let v = d(0, 0, 0);
        grad = [0.5 * (d(0, 1, 0) - d(0, -1, 0)), 0.5 * (d(0, 0, 1) - d(0, 0, -1)), 0.5 * (d(1, 0, 0) - d(-1, 0, 0))];
        let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
        let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
        let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
        let dxy = 0.25 * (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1));
        let dxs = 0.25 * (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0));
        let dys = 0.25 * (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1));
        hessian = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let sol = solve3(&hessian, &grad)?;
        offset = [-sol[0], -sol[1], -sol[2]];
        if offset.iter().all(|o| o.abs() < 0.5) {
            converged = true;
            break;
        }
        if offset.iter().any(|o| o.abs() > 1e4) {
            return None;
        }
        xi += offset[0].round() as isize;
        yi += offset[1].round() as isize;
        li += offset[2].round() as isize;
        if li < 1 || li > s as isize || xi < border || xi >= w - border || yi < border || yi >= h - border {
            return None;
        }
    }
    if !converged {
        return None;
    }
    let v = dogs[li as usize].get(xi as usize, yi as usize);
    let contrast = v + 0.5 * (grad[0] * offset[0] + grad[1] * offset[1] + grad[2] * offset[2]);
    if contrast.abs() * (s as f32) < params.contrast_threshold as f32 {
        return None;
    }
    let (dxx, dyy, dxy) = (hessian[0][0], hessian[1][1], hessian[0][1]);
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    let r = params.edge_threshold as f32;
    if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
        return None;
    }
    let layer_pos = li as f32 + offset[2];
    Some(Extremum {
        x: xi as f32 + offset[0],
        y: yi as f32 + offset[1],
        layer: li as usize,
        sigma: sigma0 * 2f32.powf(layer_pos / s as f32),
        response: contrast.abs(),
    })
}

#[inline]
fn gradient(img: &GrayImage, x: usize, y: usize) -> (f32, f32) {
    (img.get(x + 1, y) - img.get(x - 1, y), img.get(x, y + 1) - img.get(x, y - 1))
}

fn dominant_orientations(img: &GrayImage, ext: &Extremum) -> Vec<f32> {
    let sigma_w = ORI_SIGMA * ext.sigma;
    let radius = (3.0 * sigma_w).round() as isize;
    let (cx, cy) = (ext.x.round() as isize, ext.y.round() as isize);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut hist = [0f32; ORI_BINS];
    for dy in -radius..=radius {
        let y = cy + dy;
        if y <= 0 || y >= h - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let x = cx + dx;
            if x <= 0 || x >= w - 1 {
                continue;
            }
            let (gx, gy) = gradient(img, x as usize, y as usize);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let weight = (-((dx * dx + dy * dy) as f32) / (2.0 * sigma_w * sigma_w)).exp();
            let ori = gy.atan2(gx).rem_euclid(TAU);
            let bin = ((ori / TAU * ORI_BINS as f32).round() as usize) % ORI_BINS;
            hist[bin] += weight * mag;
        }
    }
    let n = ORI_BINS;
    let smooth: Vec<f32> = (0..n)
        .map(|i| {
            let at = |o: isize| hist[(i as isize + o).rem_euclid(n as isize) as usize];
            (at(-2) + at(2)) / 16.0 + (at(-1) + at(1)) * 4.0 / 16.0 + at(0) * 6.0 / 16.0
        })
        .collect();
    let max = smooth.iter().copied().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut angles = Vec::new();
    for i in 0..n {
        let l = smooth[(i + n - 1) % n];
        let r = smooth[(i + 1) % n];
        let c = smooth[i];
        if c > l && c > r && c >= ORI_PEAK_RATIO * max {
            let shift = 0.5 * (l - r) / (l - 2.0 * c + r);
            let bin = (i as f32 + shift).rem_euclid(n as f32);
            angles.push((bin / n as f32 * TAU).rem_euclid(TAU));
        }
    }
    angles
}

fn compute_descriptor(img: &GrayImage, ext: &Extremum, angle: f32) -> Vec<f32> {
    let d = DESCR_WIDTH;
    let nb = DESCR_BINS;
    let hist_width = DESCR_SCALE * ext.sigma;
    let radius = ((hist_width * std::f32::consts::SQRT_2 * (d as f32 + 1.0) * 0.5).round() as isize)
        .min(((img.width().pow(2) + img.height().pow(2)) as f32).sqrt() as isize);
    let (cos_t, sin_t) = (angle.cos() / hist_width, angle.sin() / hist_width);
    let (cx, cy) = (ext.x.round() as isize, ext.y.round() as isize);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let exp_scale = -1.0 / (d as f32 * d as f32 * 0.5);
    let mut hist = vec![0f32; (d + 2) * (d + 2) * (nb + 2)];
    let idx = |r: usize, c: usize, o: usize| (r * (d + 2) + c) * (nb + 2) + o;

    for i in -radius..=radius {
        for j in -radius..=radius {
            // rotate the offset into the keypoint frame, in units of histogram cells
            let c_rot = j as f32 * cos_t + i as f32 * sin_t;
            let r_rot = -(j as f32) * sin_t + i as f32 * cos_t;
            let rbin = r_rot + d as f32 / 2.0 - 0.5;
            let cbin = c_rot + d as f32 / 2.0 - 0.5;
            if !(rbin > -1.0 && rbin < d as f32 && cbin > -1.0 && cbin < d as f32) {
                continue;
            }
            let (x, y) = (cx + j, cy + i);
            if x <= 0 || y <= 0 || x >= w - 1 || y >= h - 1 {
                continue;
            }
            let (gx, gy) = gradient(img, x as usize, y as usize);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let ori = (gy.atan2(gx) - angle).rem_euclid(TAU);
            let obin = ori * nb as f32 / TAU;
            let weight = ((c_rot * c_rot + r_rot * r_rot) * exp_scale).exp() * mag;

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0) = (r0 as isize + 1, c0 as isize + 1);
            let o0 = (o0 as usize) % nb;
            for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
                for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                    for (dob, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let k = idx((r0 + dr) as usize, (c0 + dc) as usize, o0 + dob);
                        hist[k] += weight * wr * wc * wo;
                    }
                }
            }
        }
    }

    let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
    for r in 0..d {
        for c in 0..d {
            // fold the wrap-around orientation bin
            let base = idx(r + 1, c + 1, 0);
            let mut cell = [0f32; DESCR_BINS];
            for (o, v) in cell.iter_mut().enumerate() {
                *v = hist[base + o];
            }
            cell[0] += hist[base + nb];
            out.extend_from_slice(&cell);
        }
    }
    normalize(&mut out);
    out.iter_mut().for_each(|v| *v = v.min(DESCR_CLAMP));
    normalize(&mut out);
    out
}

fn normalize(v: &mut [f32]) {
    let n = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x as f64 / n) as f32);
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["x", "y", "size", "angle", "response", "octave"].iter().map(|s| s.to_string()).collect();
    h.extend((0..DESCRIPTOR_LEN).map(|i| format!("d{i}")));
    h
}

/// Writes features as CSV: `x,y,size,angle,response,octave,d0..d127`.
pub fn save_features<T: Scalar>(features: &[Feature<T>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header()).map_err(|e| csv_error(path, e))?;
    for f in features {
        let k = &f.keypoint;
        let mut row = vec![
            k.x.to_string(),
            k.y.to_string(),
            k.size.to_string(),
            k.angle.to_string(),
            k.response.to_string(),
            k.octave.to_string(),
        ];
        row.extend(f.descriptor.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a feature CSV written by [`save_features`] (or any tool using the same columns).
/// Ids are assigned by row order.
pub fn load_features<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Feature<T>>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let hdr = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if hdr.is_empty() || hdr.len() == 1 && hdr.get(0) == Some("") {
        return Err(Error::parse(path, 1, "missing header"));
    }
    if hdr.iter().collect::<Vec<_>>() != header() {
        return Err(Error::parse(path, 1, "unexpected header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 6 + DESCRIPTOR_LEN {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} columns, found {}", 6 + DESCRIPTOR_LEN, rec.len()),
            ));
        }
        let num = |i: usize| -> Result<T> {
            let s = &rec[i];
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| Error::parse(path, line, format!("invalid number {s:?} in column {}", i + 1)))
        };
        let octave: i32 =
            rec[5].parse().map_err(|_| Error::parse(path, line, format!("invalid octave {:?}", &rec[5])))?;
        let keypoint = Keypoint { x: num(0)?, y: num(1)?, size: num(2)?, angle: num(3)?, response: num(4)?, octave };
        if !(keypoint.size > T::zero()) {
            return Err(Error::parse(path, line, "size must be positive"));
        }
        let values = (6..6 + DESCRIPTOR_LEN).map(num).collect::<Result<Vec<T>>>()?;
        let descriptor = Descriptor::new(values).map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(Feature { id: out.len(), keypoint, descriptor });
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}
