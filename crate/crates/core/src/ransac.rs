//! Weighted RANSAC over a pool of oriented lines with multiplicative inlier/outlier reweighting,
//! independent restarts and eigen-decomposition refinement of the winning consensus set.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{acute_angle, axis_angle, intersect, OrientedLine, Point2, VpEstimate};
use crate::linalg::{symmetric_eigen3, Mat3};
use crate::linefit::LinePool;
use crate::scalar::Scalar;

/// Pairs closer than this angle (degrees) are resampled.
pub const MIN_PAIR_ANGLE_DEG: f64 = 0.5;
pub const MAX_PAIR_RESAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    /// Fixed inlier distance in pixels.
    Fixed(f64),
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacConfig {
    /// Inlier weight multiplier.
    pub alpha: f64,
    /// Outlier weight multiplier.
    pub beta: f64,
    pub iters_per_run: usize,
    pub restarts: usize,
    pub threshold: Threshold,
    /// Scale applied to the median absolute deviation by the adaptive threshold.
    pub mad_k: f64,
    /// Minimum fraction of directed distance-inliers that must point at a hypothesis.
    pub dir_consistency: f64,
    /// Restart `r` uses the stream seeded with `seed + r`.
    pub seed: u64,
    /// Image width and height. Without it the bounding box of the line anchors stands in.
    #[serde(skip)]
    pub image_size: Option<(f64, f64)>,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            alpha: 1.2,
            beta: 0.8,
            iters_per_run: 500,
            restarts: 5,
            threshold: Threshold::Adaptive,
            mad_k: 2.5,
            dir_consistency: 0.7,
            seed: 0,
            image_size: None,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config("ransac requires alpha > 1 > beta > 0".into()));
        }
        if self.iters_per_run == 0 || self.restarts == 0 {
            return Err(Error::Config("ransac iters_per_run and restarts must be at least 1".into()));
        }
        if let Threshold::Fixed(t) = self.threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config("ransac threshold must be a nonnegative number".into()));
            }
        }
        if !(self.mad_k > 0.0) {
            return Err(Error::Config("ransac mad_k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.dir_consistency) {
            return Err(Error::Config("ransac dir_consistency must lie in [0, 1]".into()));
        }
        if let Some((w, h)) = self.image_size {
            if !(w > 0.0 && h > 0.0) {
                return Err(Error::Config("image size must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Image frame used for clamping thresholds, scoring ideal points and conditioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame<T> {
    pub center: Point2<T>,
    pub diagonal: T,
    /// Nominal focal length `(width + height) / 4`, converting pixel tolerances to angles.
    pub focal: T,
}

impl<T: Scalar> Frame<T> {
    pub fn from_size(width: T, height: T) -> Self {
        Frame {
            center: Point2::new(width / T::lit(2.0), height / T::lit(2.0)),
            diagonal: width.hypot(height),
            focal: (width + height) / T::lit(4.0),
        }
    }

    /// Bounding box of the anchors, at least one pixel on each side.
    pub fn from_lines(lines: &[OrientedLine<T>]) -> Self {
        let (mut x0, mut y0) = (T::infinity(), T::infinity());
        let (mut x1, mut y1) = (T::neg_infinity(), T::neg_infinity());
        for l in lines {
            x0 = x0.min(l.anchor.x);
            y0 = y0.min(l.anchor.y);
            x1 = x1.max(l.anchor.x);
            y1 = y1.max(l.anchor.y);
        }
        if lines.is_empty() {
            return Frame::from_size(T::one(), T::one());
        }
        let w = (x1 - x0).max(T::one());
        let h = (y1 - y0).max(T::one());
        let mut f = Frame::from_size(w, h);
        f.center = Point2::new((x0 + x1) / T::lit(2.0), (y0 + y1) / T::lit(2.0));
        f
    }
}

/// `w_i = Σ_{j≠i} exp(-θ_ij)` with `θ_ij` the acute angle between lines `i` and `j`.
pub fn init_weights<T: Scalar>(lines: &[OrientedLine<T>]) -> Vec<T> {
    let n = lines.len();
    let mut w = vec![T::zero(); n];
    for i in 0..n {
        for j in i + 1..n {
            let e = (-acute_angle(&lines[i], &lines[j])).exp();
            w[i] = w[i] + e;
            w[j] = w[j] + e;
        }
    }
    w
}

/// Draws `i` with probability proportional to its weight, then `j ≠ i` from the renormalized
/// remainder. Nearly parallel pairs are redrawn a bounded number of times.
pub fn sample_pair<T: Scalar, R: Rng + ?Sized>(
    lines: &[OrientedLine<T>],
    weights: &[T],
    rng: &mut R,
) -> Result<(usize, usize)> {
    if lines.len() != weights.len() {
        return Err(Error::InvalidInput("weights and lines differ in length".into()));
    }
    let w: Vec<f64> = weights.iter().map(|v| v.to_f64_lossy().max(0.0)).collect();
    let first = WeightedIndex::new(&w).map_err(|_| Error::WeightCollapse)?;
    let min_angle = T::lit(MIN_PAIR_ANGLE_DEG.to_radians());
    let mut best: Option<(usize, usize, T)> = None;
    let mut rest = w.clone();
    for _ in 0..MAX_PAIR_RESAMPLES {
        let i = first.sample(rng);
        let saved = rest[i];
        rest[i] = 0.0;
        let second = WeightedIndex::new(&rest);
        rest[i] = saved;
        let j = second.map_err(|_| Error::WeightCollapse)?.sample(rng);
        let angle = acute_angle(&lines[i], &lines[j]);
        if angle >= min_angle {
            return Ok((i, j));
        }
        if best.is_none_or(|b| angle > b.2) {
            best = Some((i, j, angle));
        }
    }
    let (i, j, _) = best.expect("at least one draw");
    Ok((i, j))
}

/// Residual of a line with respect to a hypothesis: perpendicular distance for finite points,
/// `focal · angle` to the direction of an ideal point.
pub fn residual<T: Scalar>(vp: &VpEstimate<T>, line: &OrientedLine<T>, focal: T) -> T {
    match vp.to_point() {
        Some(p) => line.line.signed_distance(p).abs(),
        None => {
            let d = vp.ideal_direction().unwrap_or(Point2::new(T::one(), T::zero()));
            focal * axis_angle(line.axis(), d)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Consensus<T> {
    pub inliers: Vec<usize>,
    /// Sum of inlier weights.
    pub votes: T,
    /// Mean residual of the inliers.
    pub residual: T,
}

impl<T: Scalar> Consensus<T> {
    fn empty() -> Self {
        Consensus { inliers: Vec::new(), votes: T::zero(), residual: T::zero() }
    }
}

/// Inliers of `vp` among `lines`, voting with each line's `weight`.
///
/// A line is an inlier when its residual is within `threshold` and, if directed, the hypothesis
/// lies ahead of it. The hypothesis is rejected outright when fewer than `dir_consistency` of
/// the directed lines within `threshold` point at it.
pub fn score_hypothesis<T: Scalar>(
    vp: &VpEstimate<T>,
    lines: &[OrientedLine<T>],
    threshold: T,
    dir_consistency: T,
    focal: T,
) -> Consensus<T> {
    let point = vp.to_point();
    let mut ideal_dir = vp.ideal_direction().unwrap_or(Point2::new(T::one(), T::zero()));
    if point.is_none() {
        // an ideal point has no side; orient it with the majority of directed lines
        let s: T = lines.iter().filter_map(|l| l.direction).map(|d| d.dot(ideal_dir).signum()).sum();
        if s < T::zero() {
            ideal_dir = -ideal_dir;
        }
    }
    let ahead = |l: &OrientedLine<T>| match (l.direction, point) {
        (None, _) => true,
        (Some(_), Some(p)) => l.points_towards(p),
        (Some(d), None) => d.dot(ideal_dir) > T::zero(),
    };
    let mut out = Consensus::empty();
    let (mut directed, mut toward) = (0usize, 0usize);
    let mut total_residual = T::zero();
    for (i, l) in lines.iter().enumerate() {
        let r = residual(vp, l, focal);
        if !(r <= threshold) {
            continue;
        }
        let ok = ahead(l);
        if l.direction.is_some() {
            directed += 1;
            toward += ok as usize;
        }
        if ok {
            out.inliers.push(i);
            out.votes = out.votes + l.weight;
            total_residual = total_residual + r;
        }
    }
    if directed > 0 && T::from_usize_lossy(toward) < dir_consistency * T::from_usize_lossy(directed) {
        return Consensus::empty();
    }
    if !out.inliers.is_empty() {
        out.residual = total_residual / T::from_usize_lossy(out.inliers.len());
    }
    out
}

/// Multiplies inlier weights by `alpha` and all others by `beta`, then rescales so the weights
/// sum to their count.
pub fn update_weights<T: Scalar>(weights: &mut [T], inliers: &[usize], alpha: T, beta: T) {
    let mut is_inlier = vec![false; weights.len()];
    for &i in inliers {
        is_inlier[i] = true;
    }
    for (w, inl) in weights.iter_mut().zip(&is_inlier) {
        *w = *w * if *inl { alpha } else { beta };
    }
    let total: T = weights.iter().copied().sum();
    if total > T::zero() && total.is_finite() {
        let k = T::from_usize_lossy(weights.len()) / total;
        weights.iter_mut().for_each(|w| *w = *w * k);
    }
}

pub fn median<T: Scalar>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n == 0 {
        T::zero()
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

/// `k · MAD` of the residuals of all lines to `vp`, clamped to `[1, 0.02 · diagonal]` pixels.
pub fn adaptive_threshold<T: Scalar>(vp: &VpEstimate<T>, lines: &[OrientedLine<T>], k: T, frame: &Frame<T>) -> T {
    let mut d: Vec<T> = lines.iter().map(|l| residual(vp, l, frame.focal)).collect();
    threshold_from_residuals(&mut d, k, frame.diagonal)
}

pub fn threshold_from_residuals<T: Scalar>(residuals: &mut [T], k: T, diagonal: T) -> T {
    let m = median(residuals);
    let mut dev: Vec<T> = residuals.iter().map(|r| (*r - m).abs()).collect();
    let mad = median(&mut dev);
    (k * mad).min(T::lit(0.02) * diagonal).max(T::one())
}

/// Smallest eigenvector of `Σ w_i l_i l_iᵀ`, the unit homogeneous point minimizing the weighted
/// algebraic residual. The sign is chosen so that `w ≥ 0`.
pub fn refine_vp_eigen<T: Scalar>(lines: &[OrientedLine<T>], weights: &[T]) -> Result<VpEstimate<T>> {
    if lines.len() < 2 || lines.len() != weights.len() {
        return Err(Error::DegenerateRefinement);
    }
    let mut m: Mat3<T> = [[T::zero(); 3]; 3];
    for (l, w) in lines.iter().zip(weights) {
        let c = l.line.coeffs();
        for r in 0..3 {
            for s in 0..3 {
                m[r][s] = m[r][s] + *w * c[r] * c[s];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen3(&m);
    if !(vals[1] - vals[0] > T::epsilon() * T::lit(64.0) * vals[2].abs()) {
        return Err(Error::DegenerateRefinement);
    }
    let mut v = vecs[0];
    if v[2] < T::zero() || (v[2] == T::zero() && (v[0] < T::zero() || (v[0] == T::zero() && v[1] < T::zero()))) {
        v = v.map(|c| -c);
    }
    VpEstimate::from_homogeneous(v).map_err(|_| Error::DegenerateRefinement)
}

/// `Σ w_i (l_iᵀ p)²` for the unit-normalized homogeneous `p`.
pub fn algebraic_residual<T: Scalar>(vp: &VpEstimate<T>, lines: &[OrientedLine<T>], weights: &[T]) -> T {
    let h = vp.homogeneous();
    let n = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    lines
        .iter()
        .zip(weights)
        .map(|(l, w)| {
            let c = l.line.coeffs();
            let r = (c[0] * h[0] + c[1] * h[1] + c[2] * h[2]) / n;
            *w * r * r
        })
        .sum()
}

/// Eigen refinement in coordinates centred on the frame and scaled by its diagonal, mapped back.
fn refine_conditioned<T: Scalar>(lines: &[OrientedLine<T>], weights: &[T], frame: &Frame<T>) -> Result<VpEstimate<T>> {
    let scale = frame.diagonal.max(T::one());
    let cond: Vec<OrientedLine<T>> =
        lines.iter().map(|l| OrientedLine { line: l.line.conditioned(frame.center, scale), ..*l }).collect();
    let v = refine_vp_eigen(&cond, weights)?;
    VpEstimate::from_homogeneous([v.x * scale + frame.center.x * v.w, v.y * scale + frame.center.y * v.w, v.w])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartLog<T> {
    pub restart: usize,
    /// Non-degenerate hypotheses evaluated.
    pub hypotheses: usize,
    pub vp: Option<VpEstimate<T>>,
    pub votes: T,
    pub inliers: usize,
    pub threshold: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VpResult<T> {
    pub vp: VpEstimate<T>,
    pub inliers: Vec<usize>,
    /// Sum of the inliers' initial weights.
    pub score: T,
    /// Inlier threshold of the winning restart.
    pub threshold: T,
    pub run_index: usize,
    pub diagnostics: Vec<RestartLog<T>>,
}

#[derive(Debug, Clone)]
struct Candidate<T> {
    vp: VpEstimate<T>,
    consensus: Consensus<T>,
    threshold: T,
}

fn beats<T: Scalar>(a: &Consensus<T>, b: &Consensus<T>) -> bool {
    if a.votes != b.votes {
        return a.votes > b.votes;
    }
    if a.inliers.len() != b.inliers.len() {
        return a.inliers.len() > b.inliers.len();
    }
    a.residual < b.residual
}

/// Runs all restarts and returns the refined winner.
pub fn run<T: Scalar>(pool: &LinePool<T>, config: &RansacConfig) -> Result<VpResult<T>> {
    config.validate()?;
    if pool.len() < 2 {
        return Err(Error::InsufficientLines);
    }
    let frame = match config.image_size {
        Some((w, h)) => Frame::from_size(T::lit(w), T::lit(h)),
        None => Frame::from_lines(&pool.lines),
    };
    let init = init_weights(&pool.lines);
    let mut lines = pool.lines.clone();
    for (l, w) in lines.iter_mut().zip(&init) {
        l.weight = *w;
    }

    let mut winner: Option<(usize, Candidate<T>)> = None;
    let mut diagnostics = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
        let (best, hypotheses) = run_restart(&lines, &init, config, &frame, &mut rng)?;
        let best = best.map(|c| finalize(c, &lines, &init, config, &frame));
        diagnostics.push(RestartLog {
            restart: r,
            hypotheses,
            vp: best.as_ref().map(|c| c.vp),
            votes: best.as_ref().map_or(T::zero(), |c| c.consensus.votes),
            inliers: best.as_ref().map_or(0, |c| c.consensus.inliers.len()),
            threshold: best.as_ref().map_or(T::zero(), |c| c.threshold),
        });
        if let Some(c) = best {
            if winner.as_ref().is_none_or(|(_, w)| beats(&c.consensus, &w.consensus)) {
                winner = Some((r, c));
            }
        }
    }
    let (run_index, c) = winner.ok_or(Error::NoVanishingPoint)?;
    Ok(VpResult {
        vp: c.vp,
        inliers: c.consensus.inliers,
        score: c.consensus.votes,
        threshold: c.threshold,
        run_index,
        diagnostics,
    })
}

fn run_restart<T: Scalar>(
    lines: &[OrientedLine<T>],
    init: &[T],
    config: &RansacConfig,
    frame: &Frame<T>,
    rng: &mut ChaCha8Rng,
) -> Result<(Option<Candidate<T>>, usize)> {
    let alpha = T::lit(config.alpha);
    let beta = T::lit(config.beta);
    let k = T::lit(config.mad_k);
    let dc = T::lit(config.dir_consistency);
    let mut weights = init.to_vec();
    let mut best: Option<Candidate<T>> = None;
    let mut hypotheses = 0;
    for _ in 0..config.iters_per_run {
        let (i, j) = sample_pair(lines, &weights, rng)?;
        let Ok(vp) = intersect(&lines[i].line, &lines[j].line) else {
            continue;
        };
        hypotheses += 1;
        let threshold = match config.threshold {
            Threshold::Fixed(t) => T::lit(t),
            Threshold::Adaptive => {
                let reference = best.as_ref().map_or(vp, |b| b.vp);
                adaptive_threshold(&reference, lines, k, frame)
            }
        };
        let consensus = score_hypothesis(&vp, lines, threshold, dc, frame.focal);
        update_weights(&mut weights, &consensus.inliers, alpha, beta);
        if consensus.inliers.len() < 2 {
            continue;
        }
        if let Some(b) = best.as_mut() {
            if b.threshold != threshold {
                b.consensus = score_hypothesis(&b.vp, lines, threshold, dc, frame.focal);
                b.threshold = threshold;
            }
        }
        if best.as_ref().is_none_or(|b| beats(&consensus, &b.consensus)) {
            let mut c = Candidate { vp, consensus, threshold };
            if let Threshold::Adaptive = config.threshold {
                let t = adaptive_threshold(&vp, lines, k, frame);
                if t != threshold {
                    c.consensus = score_hypothesis(&vp, lines, t, dc, frame.focal);
                    c.threshold = t;
                }
            }
            best = Some(c);
        }
    }
    Ok((best.filter(|b| b.consensus.inliers.len() >= 2), hypotheses))
}

/// Alternates eigen refinement on the consensus set and re-scoring until the set is stable, so
/// that the reported inliers are exactly those within the threshold of the reported point.
fn finalize<T: Scalar>(
    mut c: Candidate<T>,
    lines: &[OrientedLine<T>],
    init: &[T],
    config: &RansacConfig,
    frame: &Frame<T>,
) -> Candidate<T> {
    let dc = T::lit(config.dir_consistency);
    for _ in 0..10 {
        let sub: Vec<OrientedLine<T>> = c.consensus.inliers.iter().map(|&i| lines[i]).collect();
        let w: Vec<T> = c.consensus.inliers.iter().map(|&i| init[i]).collect();
        let Ok(vp) = refine_conditioned(&sub, &w, frame) else {
            break;
        };
        let consensus = score_hypothesis(&vp, lines, c.threshold, dc, frame.focal);
        if consensus.inliers.len() < 2 {
            break;
        }
        let stable = consensus.inliers == c.consensus.inliers;
        c.vp = vp;
        c.consensus = consensus;
        if stable {
            break;
        }
    }
    c
}
