//! Trajectory metrics and dominance-driven micro-segmentation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{norm, sqrt};
use crate::personality::{DominanceRanking, Trait, TraitScores, N_TRAITS};
use crate::rng;

/// Difference vectors shorter than this are treated as standing still.
pub const MIN_SEGMENT_NORM: f64 = 1e-12;
pub const MAX_TREE_DEPTH: usize = 4;

/// A customer's hidden-state path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub customer_id: String,
    /// `T` points, each of length `h`.
    pub points: Vec<Vec<f64>>,
    pub personality: TraitScores,
    pub dominance: Option<DominanceRanking>,
}

impl Trajectory {
    /// Splits a row-major `T x h` state array into points.
    pub fn from_states(
        customer_id: String,
        states: &[f64],
        h: usize,
        personality: TraitScores,
        dominance: Option<DominanceRanking>,
    ) -> Result<Self> {
        if h == 0 || states.len() % h != 0 || states.len() < 2 * h {
            return Err(Error::Input(format!(
                "{} state values do not form at least two {h}-dimensional points",
                states.len()
            )));
        }
        Ok(Trajectory {
            customer_id,
            points: states.chunks(h).map(<[f64]>::to_vec).collect(),
            personality,
            dominance,
        })
    }

    pub fn flattened(&self) -> Vec<f64> {
        self.points.concat()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningAngle {
    /// Mean angle in radians, within `[0, pi]`.
    pub mean: f64,
    /// Fewer than two usable segments; `mean` is then 0.
    pub degenerate: bool,
}

/// Mean angle between consecutive non-zero difference vectors of `points`.
pub fn mean_turning_angle(points: &[Vec<f64>]) -> Result<TurningAngle> {
    if points.len() < 3 {
        return Err(Error::Metric(format!(
            "turning angle needs at least 3 points, got {}",
            points.len()
        )));
    }
    let segments: Vec<Vec<f64>> = points
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect::<Vec<f64>>())
        .filter(|v| norm(v) >= MIN_SEGMENT_NORM)
        .collect();
    if segments.len() < 2 {
        return Ok(TurningAngle {
            mean: 0.0,
            degenerate: true,
        });
    }
    let total: f64 = segments
        .windows(2)
        .map(|w| angle_between(&w[0], &w[1]))
        .sum();
    let mean = total / (segments.len() - 1) as f64;
    Ok(TurningAngle {
        mean: mean.clamp(0.0, PI),
        degenerate: false,
    })
}

/// Angle between two non-zero vectors as `2 atan2(|a' - b'|, |a' + b'|)` on
/// the unit vectors, which stays accurate near 0 and pi where `acos` is not.
fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    let (mut minus, mut plus) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        minus += (u - v) * (u - v);
        plus += (u + v) * (u + v);
    }
    2.0 * libm::atan2(sqrt(minus), sqrt(plus))
}

/// Axis pairs used for the two-dimensional views of a 3-d state space.
pub const AXIS_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// The three coordinate-dropping projections of a 3-d trajectory.
pub fn project_pairs(points: &[Vec<f64>]) -> Result<[Vec<[f64; 2]>; 3]> {
    if let Some(p) = points.iter().find(|p| p.len() != 3) {
        return Err(Error::Projection(format!(
            "pairwise projections need 3-dimensional states, got {}",
            p.len()
        )));
    }
    Ok(AXIS_PAIRS.map(|(a, b)| points.iter().map(|p| [p[a], p[b]]).collect()))
}

/// A node of the dominance hierarchy. The root has no trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentNode {
    #[serde(rename = "trait")]
    pub trait_key: Option<Trait>,
    pub members: Vec<String>,
    pub children: Vec<SegmentNode>,
}

impl SegmentNode {
    /// Leaves in depth-first, trait order.
    pub fn leaves(&self) -> Vec<&SegmentNode> {
        if self.children.is_empty() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }

    pub fn child(&self, t: Trait) -> Option<&SegmentNode> {
        self.children.iter().find(|c| c.trait_key == Some(t))
    }
}

/// Groups customers by their dominance prefix: level `k` splits on the
/// `k`-th ranked trait. Children appear in canonical trait order and empty
/// groups are left out.
pub fn build_segment_tree(trajectories: &[Trajectory], depth: usize) -> Result<SegmentNode> {
    if !(1..=MAX_TREE_DEPTH).contains(&depth) {
        return Err(Error::Input(format!(
            "segment depth must be between 1 and {MAX_TREE_DEPTH}, got {depth}"
        )));
    }
    let mut rankings = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        match &t.dominance {
            Some(d) => rankings.push(*d),
            None => {
                return Err(Error::Input(format!(
                    "customer {} has no dominance ranking",
                    t.customer_id
                )))
            }
        }
    }
    let all: Vec<usize> = (0..trajectories.len()).collect();
    Ok(grow(trajectories, &rankings, &all, None, 0, depth))
}

fn grow(
    trajectories: &[Trajectory],
    rankings: &[DominanceRanking],
    members: &[usize],
    key: Option<Trait>,
    level: usize,
    depth: usize,
) -> SegmentNode {
    let children = if level < depth {
        let mut groups: [Vec<usize>; N_TRAITS] = Default::default();
        for &i in members {
            groups[rankings[i].at(level).index()].push(i);
        }
        groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(t, g)| grow(trajectories, rankings, g, Trait::from_index(t), level + 1, depth))
            .collect()
    } else {
        Vec::new()
    };
    SegmentNode {
        trait_key: key,
        members: members.iter().map(|&i| trajectories[i].customer_id.clone()).collect(),
        children,
    }
}

/// Condensed matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        if let Some(p) = points.iter().find(|p| p.len() != points[0].len()) {
            return Err(Error::Dimension(format!(
                "points of length {} and {} cannot be compared",
                points[0].len(),
                p.len()
            )));
        }
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                values.push(crate::math::distance(&points[i], &points[j]));
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // Row a starts after a full rows of decreasing length.
        self.values[a * (2 * self.n - a - 1) / 2 + (b - a - 1)]
    }

    /// Restriction to the given points, in the given order.
    pub fn subset(&self, indices: &[usize]) -> DistanceMatrix {
        let n = indices.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (k, &i) in indices.iter().enumerate() {
            for &j in &indices[k + 1..] {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix { n, values }
    }
}

/// Mean silhouette of `labels` over precomputed distances. Members of
/// singleton clusters contribute 0.
pub fn silhouette(distances: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    let n = distances.len();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} points but {} labels", labels.len())));
    }
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_labels];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Separation("silhouette needs at least two distinct labels".into()));
    }
    let mut sums = vec![0.0; n_labels];
    let mut total = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            sums[labels[j]] += distances.get(i, j);
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_labels)
            .filter(|&l| l != own && sizes[l] > 0)
            .map(|l| sums[l] / sizes[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Mean silhouette of labelled trajectories under Euclidean distance of their
/// flattened points.
pub fn separation_score(trajectories: &[Trajectory], labels: &[usize]) -> Result<f64> {
    let flat: Vec<Vec<f64>> = trajectories.iter().map(Trajectory::flattened).collect();
    silhouette(&DistanceMatrix::new(&flat)?, labels)
}

/// Silhouettes of `permutations` seeded shuffles of `labels`.
pub fn permutation_baseline(
    distances: &DistanceMatrix,
    labels: &[usize],
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..permutations)
        .map(|k| silhouette(distances, &shuffled_labels(labels, seed, k)))
        .collect()
}

/// The `k`-th seeded shuffle of `labels`, usable for parallel baselines.
pub fn shuffled_labels(labels: &[usize], seed: u64, k: usize) -> Vec<usize> {
    let mut shuffled = labels.to_vec();
    shuffled.shuffle(&mut rng::from_seed(rng::derive(seed, 0x5045_524d, k as u64)));
    shuffled
}

/// Fraction of customers whose nearest-label-centroid assignment is the same
/// for every prefix length `t_from..=T`.
///
/// `sequences[c]` is a row-major `T x d` array; prefixes of length `t` use its
/// first `t * d` values. Centroids are the per-label means of those prefixes.
pub fn prefix_stability(sequences: &[Vec<f64>], d: usize, labels: &[usize], t_from: usize) -> Result<f64> {
    let n = sequences.len();
    if n == 0 || labels.len() != n {
        return Err(Error::Dimension(format!("{n} sequences but {} labels", labels.len())));
    }
    let len = sequences[0].len();
    if d == 0 || len % d != 0 || sequences.iter().any(|s| s.len() != len) {
        return Err(Error::Dimension("sequences must share a whole number of steps".into()));
    }
    let steps = len / d;
    if t_from == 0 || t_from > steps {
        return Err(Error::Input(format!("prefix start {t_from} outside 1..={steps}")));
    }
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_labels];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut first = vec![usize::MAX; n];
    let mut stable = vec![true; n];
    for t in t_from..=steps {
        let width = t * d;
        let mut centroids = vec![vec![0.0; width]; n_labels];
        for (s, &l) in sequences.iter().zip(labels) {
            for (c, v) in centroids[l].iter_mut().zip(&s[..width]) {
                *c += v;
            }
        }
        for (c, &size) in centroids.iter_mut().zip(&sizes) {
            if size > 0 {
                c.iter_mut().for_each(|v| *v /= size as f64);
            }
        }
        for (i, s) in sequences.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (l, c) in centroids.iter().enumerate() {
                if sizes[l] == 0 {
                    continue;
                }
                let dist = crate::math::distance(&s[..width], c);
                if dist < best.0 {
                    best = (dist, l);
                }
            }
            if first[i] == usize::MAX {
                first[i] = best.1;
            } else if first[i] != best.1 {
                stable[i] = false;
            }
        }
    }
    Ok(stable.iter().filter(|&&s| s).count() as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::personality::dominance_ranking;

    fn pts(list: &[&[f64]]) -> Vec<Vec<f64>> {
        list.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn straight_line_has_no_turns() {
        let r = mean_turning_angle(&pts(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]])).unwrap();
        assert!(r.mean.abs() < 1e-12 && !r.degenerate);
    }

    #[test]
    fn zigzag_turns_right_angles() {
        let r = mean_turning_angle(&pts(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[2.0, 1.0]])).unwrap();
        assert!((r.mean - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_paths_are_degenerate() {
        let r = mean_turning_angle(&pts(&[&[1.0], &[1.0], &[1.0], &[2.0]])).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.mean, 0.0);
        assert!(matches!(mean_turning_angle(&pts(&[&[0.0], &[1.0]])), Err(Error::Metric(_))));
    }

    #[test]
    fn projections_select_coordinates() {
        let p = project_pairs(&pts(&[&[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(p, [vec![[1.0, 2.0]], vec![[1.0, 3.0]], vec![[2.0, 3.0]]]);
        assert!(matches!(project_pairs(&pts(&[&[1.0, 2.0]])), Err(Error::Projection(_))));
    }

    fn traj(id: &str, scores: TraitScores) -> Trajectory {
        Trajectory {
            customer_id: id.into(),
            points: vec![vec![0.0; 3]; 3],
            personality: scores,
            dominance: Some(dominance_ranking(&scores)),
        }
    }

    #[test]
    fn tree_groups_by_prefix() {
        let ts = [
            traj("a", [3.0, 0.0, 2.0, 0.0, 0.0]),
            traj("b", [3.0, 2.0, 0.0, 0.0, 0.0]),
            traj("c", [0.0, 0.0, 3.0, 2.0, 0.0]),
        ];
        let root = build_segment_tree(&ts, 2).unwrap();
        assert_eq!(root.children.len(), 2);
        let o = root.child(Trait::Openness).unwrap();
        assert_eq!(o.members, vec!["a", "b"]);
        assert_eq!(o.child(Trait::Extraversion).unwrap().members, vec!["a"]);
        assert_eq!(o.child(Trait::Conscientiousness).unwrap().members, vec!["b"]);
        let e = root.child(Trait::Extraversion).unwrap();
        assert_eq!(e.child(Trait::Agreeableness).unwrap().members, vec!["c"]);
        assert_eq!(root.leaves().len(), 3);
    }

    #[test]
    fn tree_rejects_bad_input() {
        let mut t = traj("a", [1.0; 5]);
        assert!(build_segment_tree(&[t.clone()], 0).is_err());
        assert!(build_segment_tree(&[t.clone()], 5).is_err());
        t.dominance = None;
        assert!(matches!(build_segment_tree(&[t], 1), Err(Error::Input(_))));
    }

    #[test]
    fn condensed_indexing() {
        let points = pts(&[&[0.0], &[1.0], &[3.0], &[7.0]]);
        let dm = DistanceMatrix::new(&points).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(dm.get(i, j), (points[i][0] - points[j][0]).abs());
            }
        }
        let sub = dm.subset(&[3, 1]);
        assert_eq!(sub.get(0, 1), 6.0);
    }

    #[test]
    fn hand_computed_silhouette() {
        // Points on a line: 0, 1 (label 0) and 4, 6 (label 1).
        // s0 = (5 - 1) / 5, s1 = (4 - 1) / 4, s2 = (3.5 - 2) / 3.5, s3 = (5.5 - 2) / 5.5
        let dm = DistanceMatrix::new(&pts(&[&[0.0], &[1.0], &[4.0], &[6.0]])).unwrap();
        let expected = (4.0 / 5.0 + 3.0 / 4.0 + 1.5 / 3.5 + 3.5 / 5.5) / 4.0;
        assert!((silhouette(&dm, &[0, 0, 1, 1]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn silhouette_edge_cases() {
        let dm = DistanceMatrix::new(&pts(&[&[0.0], &[0.0], &[9.0], &[9.0]])).unwrap();
        assert!(silhouette(&dm, &[0, 0, 1, 1]).unwrap() > 0.99);
        assert!(matches!(silhouette(&dm, &[2, 2, 2, 2]), Err(Error::Separation(_))));
        // A singleton contributes 0: s = (0 + 1 + 1 + 0) / 4 with one point alone.
        let dm = DistanceMatrix::new(&pts(&[&[0.0], &[0.0], &[0.0], &[9.0]])).unwrap();
        let s = silhouette(&dm, &[0, 0, 0, 1]).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
    }

    #[test]
    fn prefix_stability_of_constant_paths() {
        let seqs = vec![vec![0.0; 6], vec![0.1; 6], vec![5.0; 6], vec![5.1; 6]];
        assert_eq!(prefix_stability(&seqs, 1, &[0, 0, 1, 1], 3).unwrap(), 1.0);
        // The last customer starts next to group 1 and falls back to 0: at
        // t = 3 its prefix (5, 0, 0) is 5 from group 0 but sqrt(32) from the
        // group-1 centroid (5, 4, 4).
        let mut seqs = vec![vec![0.0; 6]; 4];
        seqs.extend(vec![vec![5.0; 6]; 4]);
        seqs.push(vec![5.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let labels = [0, 0, 0, 0, 1, 1, 1, 1, 1];
        let f = prefix_stability(&seqs, 1, &labels, 1).unwrap();
        assert!((f - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(prefix_stability(&seqs, 1, &labels, 3).unwrap(), 1.0);
        assert!(prefix_stability(&seqs, 1, &labels, 7).is_err());
    }
}
