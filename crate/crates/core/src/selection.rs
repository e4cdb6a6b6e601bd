//! Forward selection of features inside a visual word.
//!
//! Candidate subsets are scored by how well their keypoints line up (linearity), how uniformly
//! their orientations change along the progression (angle) and how consistently their sizes shrink
//! (scale). The composite `S_C = S_L · exp(S_A + S_S) / N²` is minimized by a bottom-up greedy search.

use serde::{Deserialize, Serialize};

use crate::clustering::FeatureGroup;
use crate::error::{Error, Result};
use crate::features::Feature;
use crate::geometry::{fit_line_lsq, point_line_distance, Point2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBundle<T> {
    /// Mean perpendicular distance to the fitted line, in pixels.
    pub linearity: T,
    /// Mean change of orientation change over consecutive triplets, in radians.
    pub angle: T,
    /// Mean change of size ratio over consecutive triplets.
    pub scale: T,
    pub composite: T,
    pub n: usize,
}

/// Features forming a progression along a line, in order of projection onto the fitted line.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSubset<T> {
    /// Indices into the feature list the subset was selected from.
    pub feature_ids: Vec<usize>,
    pub scores: ScoreBundle<T>,
}

impl<T> OrderedSubset<T> {
    pub fn len(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature_ids.is_empty()
    }
}

/// Mean perpendicular distance of the points to their total-least-squares line.
pub fn linearity_score<T: Scalar>(points: &[Point2<T>]) -> Result<T> {
    if points.len() < 3 {
        return Err(Error::InvalidInput("linearity score needs at least 3 keypoints".into()));
    }
    let fit = fit_line_lsq(points, None).map_err(|_| Error::DegenerateSubset)?;
    let total: T = points.iter().map(|p| point_line_distance(*p, &fit.line)).sum();
    Ok(total / T::from_usize_lossy(points.len()))
}

/// Circular distance between two angles, in `[0, π]`.
pub fn circular_difference<T: Scalar>(a: T, b: T) -> T {
    let tau = T::TAU();
    let d = (a - b).abs() % tau;
    if d > T::PI() {
        tau - d
    } else {
        d
    }
}

/// Mean of `||A − B| − |B − C||` over consecutive triplets of an ordered progression.
pub fn angle_score<T: Scalar>(angles: &[T]) -> Result<T> {
    if angles.len() < 3 {
        return Err(Error::InvalidInput("angle score needs at least 3 keypoints".into()));
    }
    let total: T =
        angles.windows(3).map(|w| (circular_difference(w[0], w[1]) - circular_difference(w[1], w[2])).abs()).sum();
    Ok(total / T::from_usize_lossy(angles.len() - 2))
}

/// Mean of `|A.size / B.size − B.size / C.size|` over consecutive triplets.
pub fn scale_score<T: Scalar>(sizes: &[T]) -> Result<T> {
    if sizes.len() < 3 {
        return Err(Error::InvalidInput("scale score needs at least 3 keypoints".into()));
    }
    if sizes.iter().any(|s| !(*s > T::zero())) {
        return Err(Error::InvalidInput("keypoint sizes must be positive".into()));
    }
    let total: T = sizes.windows(3).map(|w| (w[0] / w[1] - w[1] / w[2]).abs()).sum();
    Ok(total / T::from_usize_lossy(sizes.len() - 2))
}

#[inline]
pub fn composite_score<T: Scalar>(linearity: T, angle: T, scale: T, n: usize) -> T {
    let n = T::from_usize_lossy(n);
    linearity * (angle + scale).exp() / (n * n)
}

/// Orders the given features along their fitted line and scores them.
pub fn score_features<T: Scalar>(features: &[Feature<T>], ids: &[usize]) -> Result<(Vec<usize>, ScoreBundle<T>)> {
    if ids.len() < 3 {
        return Err(Error::InvalidInput("subset needs at least 3 keypoints".into()));
    }
    let points: Vec<Point2<T>> = ids.iter().map(|&i| features[i].position()).collect();
    let fit = fit_line_lsq(&points, None).map_err(|_| Error::DegenerateSubset)?;
    let tangent = fit.line.tangent();
    let mut order: Vec<(T, usize)> =
        ids.iter().zip(&points).map(|(&i, p)| ((*p - fit.centroid).dot(tangent), i)).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    // Canonical direction: sizes shrink along the progression. The scale term is not
    // reversal-symmetric, so the order must not depend on the sign of the fitted tangent.
    let n_t = T::from_usize_lossy(order.len());
    let mean_t = order.iter().map(|o| o.0).sum::<T>() / n_t;
    let mean_s = order.iter().map(|o| features[o.1].keypoint.size).sum::<T>() / n_t;
    let cov: T = order.iter().map(|o| (o.0 - mean_t) * (features[o.1].keypoint.size - mean_s)).sum();
    if cov > T::zero() {
        order.reverse();
    }
    let ordered: Vec<usize> = order.into_iter().map(|(_, i)| i).collect();

    let n = ids.len();
    let linearity = points.iter().map(|p| point_line_distance(*p, &fit.line)).sum::<T>() / T::from_usize_lossy(n);
    let angles: Vec<T> = ordered.iter().map(|&i| features[i].keypoint.angle).collect();
    let sizes: Vec<T> = ordered.iter().map(|&i| features[i].keypoint.size).collect();
    let angle = angle_score(&angles)?;
    let scale = scale_score(&sizes)?;
    Ok((ordered, ScoreBundle { linearity, angle, scale, composite: composite_score(linearity, angle, scale, n), n }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    /// Largest composite score an output subset may have.
    pub accept_threshold: f64,
    /// A growth step is kept only while the new score is at most this factor times the previous one.
    pub growth_factor: f64,
    /// Groups up to this size seed from all triples; larger groups seed from nearest-neighbour pairs.
    pub max_exhaustive: usize,
    /// Scores below this are treated as equal to it when applying `growth_factor`.
    pub score_floor: f64,
    /// Features closer than this (pixels) to a subset member are never added to it.
    pub min_separation: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            accept_threshold: 0.5,
            growth_factor: 1.5,
            max_exhaustive: 12,
            score_floor: 1e-3,
            min_separation: 1.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.accept_threshold >= 0.0 && self.growth_factor >= 1.0 && self.score_floor >= 0.0) {
            return Err(Error::Config(
                "accept_threshold >= 0, growth_factor >= 1 and score_floor >= 0 required".into(),
            ));
        }
        if self.max_exhaustive < 3 || !(self.min_separation >= 0.0) {
            return Err(Error::Config("max_exhaustive >= 3 and min_separation >= 0 required".into()));
        }
        Ok(())
    }
}

/// Greedy bottom-up selection of disjoint, low-scoring progressions inside one group.
///
/// Seeds with the best triple, repeatedly adds the feature giving the lowest composite score while
/// the score stays within `growth_factor` of the previous one, removes the accepted subset from the
/// pool and starts over. Stops when no seed scores at or below `accept_threshold`.
pub fn forward_select<T: Scalar>(
    features: &[Feature<T>],
    group: &FeatureGroup<T>,
    config: &SelectionConfig,
) -> Vec<OrderedSubset<T>> {
    let accept = T::lit(config.accept_threshold);
    let growth = T::lit(config.growth_factor);
    let floor = T::lit(config.score_floor);
    let min_sep = T::lit(config.min_separation);
    let mut pool: Vec<usize> = group.members.clone();
    pool.sort_unstable();
    pool.dedup();
    let mut out = Vec::new();

    while pool.len() >= 3 {
        let Some((mut members, mut ordered, mut scores)) = best_seed(features, &pool, config.max_exhaustive, min_sep)
        else {
            break;
        };
        if scores.composite > accept {
            break;
        }
        loop {
            let mut best: Option<(Vec<usize>, ScoreBundle<T>, usize)> = None;
            for &c in &pool {
                if members.contains(&c) || too_close(features, &members, c, min_sep) {
                    continue;
                }
                let mut ids = members.clone();
                ids.push(c);
                let Ok((ord, s)) = score_features(features, &ids) else {
                    continue;
                };
                if best.as_ref().is_none_or(|b| s.composite < b.1.composite) {
                    best = Some((ord, s, c));
                }
            }
            match best {
                Some((ord, s, c)) if s.composite <= growth * scores.composite.max(floor) && s.composite <= accept => {
                    members.push(c);
                    ordered = ord;
                    scores = s;
                }
                _ => break,
            }
        }
        pool.retain(|i| !members.contains(i));
        out.push(OrderedSubset { feature_ids: ordered, scores });
    }
    out
}

fn too_close<T: Scalar>(features: &[Feature<T>], members: &[usize], c: usize, min_sep: T) -> bool {
    let p = features[c].position();
    members.iter().any(|&m| (features[m].position() - p).norm() < min_sep)
}

type Seed<T> = (Vec<usize>, Vec<usize>, ScoreBundle<T>);

fn best_seed<T: Scalar>(features: &[Feature<T>], pool: &[usize], max_exhaustive: usize, min_sep: T) -> Option<Seed<T>> {
    let mut triples: Vec<[usize; 3]> = Vec::new();
    if pool.len() <= max_exhaustive {
        for a in 0..pool.len() {
            for b in a + 1..pool.len() {
                for c in b + 1..pool.len() {
                    triples.push([pool[a], pool[b], pool[c]]);
                }
            }
        }
    } else {
        // seed pairs: each feature with its spatial nearest neighbour
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for &i in pool {
            let pi = features[i].position();
            let nn = pool.iter().filter(|&&j| j != i && (features[j].position() - pi).norm() >= min_sep).min_by(
                |&&j, &&k| {
                    let dj = (features[j].position() - pi).norm();
                    let dk = (features[k].position() - pi).norm();
                    dj.partial_cmp(&dk).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&k))
                },
            );
            if let Some(&j) = nn {
                pairs.push((i.min(j), i.max(j)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        for (i, j) in pairs {
            for &k in pool {
                if k != i && k != j {
                    let mut t = [i, j, k];
                    t.sort_unstable();
                    triples.push(t);
                }
            }
        }
        triples.sort_unstable();
        triples.dedup();
    }
    let mut best: Option<Seed<T>> = None;
    for t in triples {
        if too_close(features, &t[..1], t[1], min_sep) || too_close(features, &t[..2], t[2], min_sep) {
            continue;
        }
        let Ok((ord, s)) = score_features(features, &t) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| s.composite < b.2.composite) {
            best = Some((t.to_vec(), ord, s));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Descriptor, Keypoint, DESCRIPTOR_LEN};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn feat(id: usize, x: f64, y: f64, size: f64, angle: f64) -> Feature<f64> {
        Feature {
            id,
            keypoint: Keypoint { x, y, size, angle, response: 1.0, octave: 0 },
            descriptor: Descriptor::new(vec![1.0; DESCRIPTOR_LEN]).unwrap(),
        }
    }

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn linearity_examples() {
        assert!(linearity_score(&[p(0.0, 0.0), p(1.0, 2.0), p(2.0, 4.0), p(3.0, 6.0)]).unwrap() < 1e-12);
        assert!(linearity_score(&[p(1.0, 1.0), p(1.0, 1.0), p(1.0, 1.0)]).is_err());
        assert!(linearity_score(&[p(1.0, 1.0), p(2.0, 1.0)]).is_err());

        // (0,0),(1,1),(2,0): covariance [[2/3,0],[0,2/9]] per point, so the TLS line is y = 1/3
        let s = linearity_score(&[p(0.0, 0.0), p(1.0, 1.0), p(2.0, 0.0)]).unwrap();
        let oracle = (1.0 / 3.0 + 2.0 / 3.0 + 1.0 / 3.0) / 3.0;
        assert!((s - oracle).abs() < 1e-12, "{s} vs {oracle}");
    }

    #[test]
    fn linearity_single_offset_point() {
        // 10 points, one lifted by h: TLS line shifts by h/N towards it, so the mean distance is
        // ((N-1)·h/N + h(N-1)/N) / N = 2h(N-1)/N², about h/N·2 for large N; compare with brute force
        let n = 10;
        let h = 5.0;
        let mut pts: Vec<_> = (0..n).map(|i| p(10.0 * i as f64, 0.0)).collect();
        pts[4].y = h;
        let s = linearity_score(&pts).unwrap();
        // brute force: minimize mean squared distance over a fine grid of angles and offsets
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for ai in -200..=200 {
            let theta = ai as f64 * 1e-4;
            let (sn, cs) = theta.sin_cos();
            let (nx, ny) = (-sn, cs);
            let c = -pts.iter().map(|q| nx * q.x + ny * q.y).sum::<f64>() / n as f64;
            let sq: f64 = pts.iter().map(|q| (nx * q.x + ny * q.y + c).powi(2)).sum();
            if sq < best.0 {
                best = (sq, theta, c);
            }
        }
        let (sn, cs) = best.1.sin_cos();
        let oracle = pts.iter().map(|q| (-sn * q.x + cs * q.y + best.2).abs()).sum::<f64>() / n as f64;
        assert!((s - oracle).abs() < 0.01 * oracle, "{s} vs {oracle}");
        let approx = h / n as f64 * 2.0 * (n as f64 - 1.0) / n as f64;
        assert!((s - approx).abs() < 0.1 * approx);
    }

    #[test]
    fn angle_examples() {
        assert_eq!(angle_score(&[0.3, 0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert!(angle_score(&[0.0, 0.1, 0.2, 0.3]).unwrap() < 1e-15);
        assert!((angle_score(&[0.0f64, 0.1, 0.3]).unwrap() - 0.1).abs() < 1e-15);
        assert!(angle_score(&[0.0, 0.1]).is_err());
        // wrap-around: 6.2 and 0.0 are 0.083 apart on the circle
        let tau = std::f64::consts::TAU;
        assert!((angle_score(&[tau - 0.1, 0.0, 0.1]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scale_examples() {
        assert!(scale_score(&[8.0, 4.0, 2.0, 1.0]).unwrap() < 1e-15);
        assert_eq!(scale_score(&[4.0, 2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(scale_score(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert!(scale_score(&[3.0, 0.0, 3.0]).is_err());
    }

    #[test]
    fn composite_examples() {
        assert_eq!(composite_score(0.0, 2.0, 3.0, 5), 0.0);
        assert!((composite_score(1.0f64, 0.0, 0.0, 3) - 1.0 / 9.0).abs() < 1e-15);
        let base = composite_score(1.0, 0.2, 0.3, 4);
        assert!(composite_score(1.1, 0.2, 0.3, 4) > base);
        assert!(composite_score(1.0, 0.25, 0.3, 4) > base);
        assert!(composite_score(1.0, 0.2, 0.35, 4) > base);
        assert!(composite_score(1.0, 0.2, 0.3, 5) < base);
    }

    fn collinear_five() -> Vec<Feature<f64>> {
        (0..5)
            .map(|i| feat(i, 10.0 + 20.0 * i as f64, 5.0 + 10.0 * i as f64, 16.0 / 2f64.powi(i as i32), 0.1 * i as f64))
            .collect()
    }

    #[test]
    fn selects_collinear_progression() {
        let fs = collinear_five();
        let g = FeatureGroup { members: (0..5).collect(), cohesion: 0.0 };
        let out = forward_select(&fs, &g, &SelectionConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].feature_ids, vec![0, 1, 2, 3, 4]);
        assert!(out[0].scores.composite < 1e-12);
    }

    #[test]
    fn noncollinear_triple_is_rejected() {
        let fs = vec![feat(0, 0.0, 0.0, 4.0, 0.0), feat(1, 40.0, 30.0, 2.0, 0.0), feat(2, 80.0, -20.0, 1.0, 0.0)];
        let g = FeatureGroup { members: vec![0, 1, 2], cohesion: 0.0 };
        assert!(forward_select(&fs, &g, &SelectionConfig::default()).is_empty());
    }

    #[test]
    fn reversal_symmetry_of_scores() {
        let angles = [0.1, 0.5, 0.2, 1.4, 0.9];
        let ra: Vec<f64> = angles.iter().rev().copied().collect();
        assert!((angle_score(&angles).unwrap() - angle_score(&ra).unwrap()).abs() < 1e-15);

        // the size-ratio term itself is direction dependent ...
        assert_ne!(scale_score(&[4.0, 2.0, 2.0]).unwrap(), scale_score(&[2.0, 2.0, 4.0]).unwrap());
        // ... so subsets are put into a canonical order before scoring
        let fs: Vec<_> = [(0.0, 5.0), (10.0, 3.0), (20.0, 4.0), (30.0, 1.0), (40.0, 2.0)]
            .iter()
            .enumerate()
            .map(|(i, (x, s))| feat(i, *x, 0.5 * x + (i % 2) as f64, *s, angles[i]))
            .collect();
        let (o1, s1) = score_features(&fs, &[0, 1, 2, 3, 4]).unwrap();
        let (o2, s2) = score_features(&fs, &[4, 3, 2, 1, 0]).unwrap();
        assert_eq!(o1, o2);
        assert_eq!(o1, vec![0, 1, 2, 3, 4]);
        assert!((s1.linearity - s2.linearity).abs() < 1e-12);
        assert_eq!(s1.angle, s2.angle);
        assert_eq!(s1.scale, s2.scale);
    }

    /// Lowest composite score over every subset of size at least 3.
    fn exhaustive_best(fs: &[Feature<f64>], ids: &[usize]) -> (f64, Vec<usize>) {
        let n = ids.len();
        let mut best = (f64::INFINITY, Vec::new());
        for mask in 0u32..(1 << n) {
            if mask.count_ones() < 3 {
                continue;
            }
            let sub: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| ids[b]).collect();
            if let Ok((_, sc)) = score_features(fs, &sub) {
                if sc.composite < best.0 {
                    best = (sc.composite, sub);
                }
            }
        }
        best
    }

    fn group(n: usize) -> FeatureGroup<f64> {
        FeatureGroup { members: (0..n).collect(), cohesion: 0.0 }
    }

    #[test]
    fn collinear_five_survive_off_line_distractors() {
        let mut fs = collinear_five();
        fs.push(feat(5, 40.0, 90.0, 3.0, 1.1));
        fs.push(feat(6, 95.0, -40.0, 7.0, 2.5));
        fs.push(feat(7, 0.0, 70.0, 1.5, 0.4));
        let out = forward_select(&fs, &group(8), &SelectionConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].feature_ids, vec![0, 1, 2, 3, 4]);
        let (best, _) = exhaustive_best(&fs, &(0..8).collect::<Vec<_>>());
        assert!(best < 1e-12 && out[0].scores.composite <= best + 1e-12);
    }

    #[test]
    fn greedy_is_close_to_exhaustive() {
        let cfg = SelectionConfig { accept_threshold: f64::INFINITY, ..SelectionConfig::default() };
        let mut good = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(4..=8);
            let k = rng.random_range(3..=n);
            let fs: Vec<_> = (0..n)
                .map(|i| {
                    if i < k {
                        let t = i as f64;
                        feat(
                            i,
                            20.0 * t + rng.random_range(-1.5..1.5),
                            8.0 * t + rng.random_range(-1.5..1.5),
                            12.0 * 0.8f64.powi(i as i32) * rng.random_range(0.95..1.05),
                            0.2 * t + rng.random_range(-0.05..0.05),
                        )
                    } else {
                        let x = rng.random_range(0.0..160.0);
                        feat(
                            i,
                            x,
                            rng.random_range(-60.0..120.0),
                            rng.random_range(1.0..12.0),
                            rng.random_range(0.0..6.0),
                        )
                    }
                })
                .collect();
            let out = forward_select(&fs, &group(n), &cfg);
            let greedy = out.iter().map(|o| o.scores.composite).fold(f64::INFINITY, f64::min);
            let (best, _) = exhaustive_best(&fs, &(0..n).collect::<Vec<_>>());
            if greedy <= 2.0 * best + 1e-12 {
                good += 1;
            }
        }
        assert!(good >= 90, "greedy within 2x in {good}/100 trials");
    }

    #[test]
    fn linearity_grows_with_position_noise() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mean_at = |sigma: f64| {
            (0..50u64)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let pts: Vec<_> = (0..8)
                        .map(|i| {
                            p(
                                15.0 * i as f64 + sigma * normal.sample(&mut rng),
                                -4.0 * i as f64 + sigma * normal.sample(&mut rng),
                            )
                        })
                        .collect();
                    linearity_score(&pts).unwrap()
                })
                .sum::<f64>()
                / 50.0
        };
        let (a, b, c) = (mean_at(0.5), mean_at(1.0), mean_at(2.0));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn composite_is_monotone() {
        let base = composite_score(1.0, 0.2, 0.3, 4);
        assert_eq!(composite_score(0.0, 5.0, 5.0, 3), 0.0);
        assert!(composite_score(1.1, 0.2, 0.3, 4) > base);
        assert!(composite_score(1.0, 0.3, 0.3, 4) > base);
        assert!(composite_score(1.0, 0.2, 0.4, 4) > base);
        assert!(composite_score(1.0, 0.2, 0.3, 5) < base);
    }

    proptest! {
        #[test]
        fn linearity_is_rigid_invariant_and_scales_linearly(
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..10),
            theta in 0.0f64..std::f64::consts::TAU,
            tx in -50.0f64..50.0,
            ty in -50.0f64..50.0,
            k in 0.2f64..5.0,
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| p(x, y)).collect();
            prop_assume!(linearity_score(&pts).is_ok());
            let s = linearity_score(&pts).unwrap();
            let (sn, cs) = theta.sin_cos();
            let moved: Vec<_> = pts.iter().map(|q| p(cs * q.x - sn * q.y + tx, sn * q.x + cs * q.y + ty)).collect();
            let scaled: Vec<_> = pts.iter().map(|q| p(k * q.x, k * q.y)).collect();
            prop_assert!((linearity_score(&moved).unwrap() - s).abs() <= 1e-9 * (1.0 + s));
            prop_assert!((linearity_score(&scaled).unwrap() - k * s).abs() <= 1e-9 * (1.0 + k * s));
        }

        #[test]
        fn selected_subsets_are_disjoint_and_accepted(
            raw in proptest::collection::vec((0.0f64..200.0, 0.0f64..200.0, 1.0f64..10.0, 0.0f64..6.0), 3..12),
        ) {
            let fs: Vec<_> = raw.iter().enumerate().map(|(i, (x, y, s, a))| feat(i, *x, *y, *s, *a)).collect();
            let cfg = SelectionConfig { accept_threshold: 5.0, ..SelectionConfig::default() };
            let out = forward_select(&fs, &group(fs.len()), &cfg);
            let mut used = vec![false; fs.len()];
            for o in &out {
                prop_assert!(o.len() >= 3 && o.scores.composite <= cfg.accept_threshold);
                for &id in &o.feature_ids {
                    prop_assert!(!used[id]);
                    used[id] = true;
                }
            }
        }
    }
}
