//! Single-linkage agglomerative clustering of feature descriptors into visual words.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{descriptor_distance, Feature};
use crate::scalar::Scalar;

/// Dense symmetric distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    /// Builds a matrix from a full row-major buffer, checking symmetry and the diagonal.
    pub fn from_full(n: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!("{} entries for n = {n}", entries.len())));
        }
        for i in 0..n {
            if entries[i * n + i] != T::zero() {
                return Err(Error::InvalidInput("nonzero diagonal".into()));
            }
            for j in 0..i {
                let v = entries[i * n + j];
                if v != entries[j * n + i] || v < T::zero() || !v.is_finite() {
                    return Err(Error::InvalidInput("matrix must be symmetric, finite and nonnegative".into()));
                }
            }
        }
        Ok(DistanceMatrix { n, entries })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..i {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        DistanceMatrix { n, entries }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }
}

/// Pairwise Euclidean descriptor distances.
pub fn build_distance_matrix<T: Scalar>(features: &[Feature<T>]) -> Result<DistanceMatrix<T>> {
    if features.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 features for clustering, got {}", features.len())));
    }
    Ok(DistanceMatrix::from_fn(features.len(), |i, j| {
        descriptor_distance(&features[i].descriptor, &features[j].descriptor)
    }))
}

/// One agglomeration step. Leaves are clusters `0..n`; the `k`-th merge creates cluster `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge<T> {
    pub a: usize,
    pub b: usize,
    pub distance: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram<T> {
    merges: Vec<Merge<T>>,
    leaves: usize,
}

impl<T: Scalar> Dendrogram<T> {
    pub fn merges(&self) -> &[Merge<T>] {
        &self.merges
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Leaf ids under cluster `id`, ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(c) = stack.pop() {
            if c < self.leaves {
                out.push(c);
            } else {
                let m = &self.merges[c - self.leaves];
                stack.push(m.a);
                stack.push(m.b);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Single-linkage clustering.
///
/// Each step merges the two groups with the smallest inter-group distance (the minimum over member
/// pairs) and updates `d(C, P) = min(d(A, P), d(B, P))`. Ties go to the lexicographically smallest
/// pair of group minimum ids. Runs in O(n²) time using per-group nearest-neighbour caches.
pub fn single_linkage<T: Scalar>(dm: &DistanceMatrix<T>) -> Dendrogram<T> {
    let n = dm.len();
    if n < 2 {
        return Dendrogram { merges: Vec::new(), leaves: n };
    }
    // Groups are indexed by their minimum member id; `dist` holds current inter-group distances.
    let mut dist: Vec<T> = dm.entries.clone();
    let mut alive = vec![true; n];
    let mut label: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut nn: Vec<(T, usize)> = vec![(T::infinity(), usize::MAX); n];

    let nearest = |dist: &[T], alive: &[bool], g: usize| -> (T, usize) {
        let mut best = (T::infinity(), usize::MAX);
        for h in 0..n {
            if h != g && alive[h] {
                let d = dist[g * n + h];
                if d < best.0 || (d == best.0 && h < best.1) {
                    best = (d, h);
                }
            }
        }
        best
    };
    for g in 0..n {
        nn[g] = nearest(&dist, &alive, g);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let mut pick: Option<(T, usize, usize)> = None;
        for g in 0..n {
            if !alive[g] {
                continue;
            }
            let (d, h) = nn[g];
            let key = (d, g.min(h), g.max(h));
            let better = match pick {
                None => true,
                Some(p) => key.0 < p.0 || (key.0 == p.0 && (key.1, key.2) < (p.1, p.2)),
            };
            if better {
                pick = Some(key);
            }
        }
        let (d, a, b) = pick.expect("at least two groups alive");
        merges.push(Merge {
            a: label[a].min(label[b]),
            b: label[a].max(label[b]),
            distance: d,
            size: size[a] + size[b],
        });
        // C keeps index a (the smaller minimum id)
        alive[b] = false;
        size[a] += size[b];
        label[a] = n + merges.len() - 1;
        for p in 0..n {
            if alive[p] && p != a {
                let v = dist[a * n + p].min(dist[b * n + p]);
                dist[a * n + p] = v;
                dist[p * n + a] = v;
            }
        }
        for p in 0..n {
            if !alive[p] || p == a {
                continue;
            }
            let (pd, ph) = nn[p];
            if ph == a || ph == b {
                // distance to C equals the old nearest distance; C's id a is ≤ the old partner
                nn[p] = (dist[p * n + a], a);
                debug_assert!(nn[p].0 == pd);
            } else {
                let v = dist[p * n + a];
                if v < pd || (v == pd && a < ph) {
                    nn[p] = (v, a);
                }
            }
        }
        nn[a] = nearest(&dist, &alive, a);
    }
    Dendrogram { merges, leaves: n }
}

/// Where to cut the tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum CutThreshold {
    /// Absolute merge-distance threshold.
    Distance(f64),
    /// Percentile in `[0, 100]` of all merge distances (linear interpolation).
    Percentile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutPolicy {
    pub threshold: CutThreshold,
    pub min_size: usize,
    /// Clusters above this size are split along their own subtree.
    pub max_size: usize,
}

impl Default for CutPolicy {
    fn default() -> Self {
        CutPolicy { threshold: CutThreshold::Percentile(50.0), min_size: 3, max_size: 40 }
    }
}

impl CutPolicy {
    pub fn validate(&self) -> Result<()> {
        match self.threshold {
            CutThreshold::Percentile(q) if !(0.0..=100.0).contains(&q) => {
                return Err(Error::Config("cut percentile must lie in [0, 100]".into()))
            }
            CutThreshold::Distance(d) if !(d >= 0.0) => {
                return Err(Error::Config("cut distance must be nonnegative".into()))
            }
            _ => {}
        }
        if self.min_size == 0 || self.max_size < self.min_size {
            return Err(Error::Config("need 1 <= min_size <= max_size".into()));
        }
        Ok(())
    }
}

/// A visual word: leaves that were merged below the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup<T> {
    /// Leaf indices (positions in the clustered feature list), ascending.
    pub members: Vec<usize>,
    /// Merge distance at which the group formed; zero for singletons.
    pub cohesion: T,
}

/// Linearly interpolated percentile of `values` (need not be sorted).
pub fn percentile<T: Scalar>(values: &[T], q: f64) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = (q.clamp(0.0, 100.0) / 100.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

/// Cuts the dendrogram into groups. Groups below `min_size` are dropped from the result.
pub fn cut_dendrogram<T: Scalar>(d: &Dendrogram<T>, policy: &CutPolicy) -> Vec<FeatureGroup<T>> {
    let n = d.leaf_count();
    let tau = match policy.threshold {
        CutThreshold::Distance(t) => T::lit(t),
        CutThreshold::Percentile(q) => {
            let dists: Vec<T> = d.merges.iter().map(|m| m.distance).collect();
            percentile(&dists, q).unwrap_or(T::zero())
        }
    };
    // Roots of the forest formed by merges at or below tau. Single-linkage merge distances are
    // nondecreasing, so this is a prefix of the merge list.
    let mut parent_of = vec![usize::MAX; n + d.merges.len()];
    let mut kept = 0;
    for (k, m) in d.merges.iter().enumerate() {
        if m.distance > tau {
            break;
        }
        parent_of[m.a] = n + k;
        parent_of[m.b] = n + k;
        kept = k + 1;
    }
    let mut roots: Vec<usize> = (0..n + kept).filter(|&c| parent_of[c] == usize::MAX).collect();

    let mut out = Vec::new();
    while let Some(root) = roots.pop() {
        let size = if root < n { 1 } else { d.merges[root - n].size };
        if size > policy.max_size && root >= n {
            let m = &d.merges[root - n];
            roots.push(m.a);
            roots.push(m.b);
            continue;
        }
        if size < policy.min_size {
            continue;
        }
        let cohesion = if root < n { T::zero() } else { d.merges[root - n].distance };
        out.push(FeatureGroup { members: d.members(root), cohesion });
    }
    out.sort_by_key(|g| g.members[0]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Descriptor, Keypoint, DESCRIPTOR_LEN};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_matrix(xs: &[f64]) -> DistanceMatrix<f64> {
        DistanceMatrix::from_fn(xs.len(), |i, j| (xs[i] - xs[j]).abs())
    }

    fn feature(id: usize, desc: Vec<f64>) -> Feature<f64> {
        Feature {
            id,
            keypoint: Keypoint { x: 0.0, y: 0.0, size: 1.0, angle: 0.0, response: 1.0, octave: 0 },
            descriptor: Descriptor::new(desc).unwrap(),
        }
    }

    #[test]
    fn distance_matrix_examples() {
        let mut v = vec![0.0; DESCRIPTOR_LEN];
        v[0] = 1.0;
        let dm = build_distance_matrix(&[feature(0, v.clone()), feature(1, v)]).unwrap();
        assert_eq!(dm.get(0, 1), 0.0);
        assert!(build_distance_matrix::<f64>(&[]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fs: Vec<_> =
            (0..3).map(|i| feature(i, (0..DESCRIPTOR_LEN).map(|_| rng.random::<f64>()).collect())).collect();
        let dm = build_distance_matrix(&fs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let a = fs[i].descriptor.values();
                let b = fs[j].descriptor.values();
                let oracle = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                assert!((dm.get(i, j) - oracle).abs() < 1e-14);
                assert_eq!(dm.get(i, j), dm.get(j, i));
            }
        }
    }

    #[test]
    fn forced_merge_order() {
        let d = single_linkage(&line_matrix(&[0.0, 1.0, 10.0]));
        let m = d.merges();
        assert_eq!((m[0].a, m[0].b, m[0].distance), (0, 1, 1.0));
        assert_eq!((m[1].a, m[1].b, m[1].distance), (2, 3, 9.0));
        assert_eq!(d.members(4), vec![0, 1, 2]);
    }

    #[test]
    fn equal_points_merge_at_zero() {
        let d = single_linkage(&line_matrix(&[2.0; 6]));
        assert_eq!(d.merges().len(), 5);
        assert!(d.merges().iter().all(|m| m.distance == 0.0));
    }

    #[test]
    fn cut_examples() {
        let d = single_linkage(&line_matrix(&[0.0, 1.0, 2.0, 50.0, 51.0, 52.0, 53.0, 200.0]));
        let all = cut_dendrogram(&d, &CutPolicy { threshold: CutThreshold::Distance(1e9), min_size: 1, max_size: 100 });
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].members.len(), 8);

        let none = cut_dendrogram(&d, &CutPolicy { threshold: CutThreshold::Distance(0.0), min_size: 3, max_size: 40 });
        assert!(none.is_empty());

        let two = cut_dendrogram(&d, &CutPolicy { threshold: CutThreshold::Distance(1.5), min_size: 3, max_size: 40 });
        assert_eq!(two.iter().map(|g| g.members.clone()).collect::<Vec<_>>(), vec![vec![0, 1, 2], vec![3, 4, 5, 6]]);
        assert_eq!(two[0].cohesion, 1.0);
    }

    #[test]
    fn oversized_groups_are_split() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).chain((0..10).map(|i| 1000.0 + 2.0 * i as f64)).collect();
        let d = single_linkage(&line_matrix(&xs));
        let groups =
            cut_dendrogram(&d, &CutPolicy { threshold: CutThreshold::Distance(1e9), min_size: 3, max_size: 12 });
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.members.len() == 10));
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 50.0), Some(2.0));
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0), Some(2.5));
        assert_eq!(percentile::<f64>(&[], 50.0), None);
    }

    /// Re-scans every pair of current groups each step.
    fn brute_force(dm: &DistanceMatrix<f64>) -> Vec<(usize, usize, f64, usize)> {
        let n = dm.len();
        let mut groups: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
        let mut out = Vec::new();
        while groups.len() > 1 {
            let mut best = (f64::INFINITY, (usize::MAX, usize::MAX), 0, 0);
            for i in 0..groups.len() {
                for j in i + 1..groups.len() {
                    let d = groups[i]
                        .1
                        .iter()
                        .flat_map(|&p| groups[j].1.iter().map(move |&q| (p, q)))
                        .map(|(p, q)| dm.get(p, q))
                        .fold(f64::INFINITY, f64::min);
                    let key = (groups[i].1[0].min(groups[j].1[0]), groups[i].1[0].max(groups[j].1[0]));
                    if d < best.0 || (d == best.0 && key < best.1) {
                        best = (d, key, i, j);
                    }
                }
            }
            let (d, _, i, j) = best;
            let b = groups.remove(j);
            let a = groups.remove(i);
            let mut members = [a.1, b.1].concat();
            members.sort_unstable();
            out.push((a.0.min(b.0), a.0.max(b.0), d, members.len()));
            groups.push((n + out.len() - 1, members));
            groups.sort_by_key(|g| g.1[0]);
        }
        out
    }

    fn merges(d: &Dendrogram<f64>) -> Vec<(usize, usize, f64, usize)> {
        d.merges().iter().map(|m| (m.a, m.b, m.distance, m.size)).collect()
    }

    #[test]
    fn random_descriptors_match_brute_force() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed as usize % 7);
            let fs: Vec<_> =
                (0..n).map(|i| feature(i, (0..DESCRIPTOR_LEN).map(|_| rng.random::<f64>()).collect())).collect();
            let dm = build_distance_matrix(&fs).unwrap();
            assert_eq!(merges(&single_linkage(&dm)), brute_force(&dm), "seed {seed}");
        }
    }

    #[test]
    fn separated_clusters_give_three_groups_of_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut fs = Vec::new();
        for c in 0..3 {
            for _ in 0..5 {
                let mut v = vec![0.01; DESCRIPTOR_LEN];
                v[c * 10] = 1.0;
                for x in v.iter_mut().take(40).skip(30) {
                    *x += rng.random_range(0.0..0.02);
                }
                fs.push(feature(fs.len(), v));
            }
        }
        let d = single_linkage(&build_distance_matrix(&fs).unwrap());
        let groups =
            cut_dendrogram(&d, &CutPolicy { threshold: CutThreshold::Distance(0.5), min_size: 3, max_size: 40 });
        let got: Vec<Vec<usize>> = groups.into_iter().map(|g| g.members).collect();
        assert_eq!(got, vec![(0..5).collect::<Vec<_>>(), (5..10).collect(), (10..15).collect()]);
    }

    fn matrix_strategy() -> impl Strategy<Value = DistanceMatrix<f64>> {
        (2usize..14).prop_flat_map(|n| {
            proptest::collection::vec(0.0f64..10.0, n * (n - 1) / 2).prop_map(move |upper| {
                let mut full = vec![0.0; n * n];
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        full[i * n + j] = upper[k];
                        full[j * n + i] = upper[k];
                        k += 1;
                    }
                }
                DistanceMatrix::from_full(n, full).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn merge_distances_are_nondecreasing(dm in matrix_strategy()) {
            let d = single_linkage(&dm);
            prop_assert_eq!(d.merges().len(), dm.len() - 1);
            prop_assert!(d.merges().windows(2).all(|w| w[0].distance <= w[1].distance));
        }

        #[test]
        fn cut_is_a_partition(dm in matrix_strategy(), q in 0.0f64..100.0, min_size in 1usize..4) {
            let d = single_linkage(&dm);
            let policy = CutPolicy { threshold: CutThreshold::Percentile(q), min_size, max_size: 6.max(min_size) };
            let groups = cut_dendrogram(&d, &policy);
            let mut seen = vec![false; dm.len()];
            for g in &groups {
                prop_assert!(g.members.len() >= min_size && g.members.len() <= policy.max_size);
                for &m in &g.members {
                    prop_assert!(!seen[m]);
                    seen[m] = true;
                }
            }
            if min_size == 1 {
                prop_assert!(seen.iter().all(|s| *s));
            }
        }
    }
}
