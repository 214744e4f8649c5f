use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

/// A search hit: source index plus Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.array()
    }
}

impl From<&Point3> for [f64; 3] {
    fn from(p: &Point3) -> Self {
        p.array()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// kd-tree over the finite points of a cloud.
///
/// Splits on the dimension of largest spread at the median. Results are
/// ordered by `(distance, source index)`, so equal distances resolve to the
/// lower source index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    coords: Vec<[f64; 3]>,
    sources: Vec<usize>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl SpatialIndex {
    /// Indexes every finite point of `cloud`; source indices are cloud positions.
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.points.iter().enumerate().filter(|(_, p)| p.is_finite()).map(|(i, p)| (i, p.array())))
    }

    /// Indexes arbitrary `(source index, coordinates)` pairs.
    pub fn from_points(points: impl IntoIterator<Item = (usize, [f64; 3])>) -> Result<Self> {
        let (sources, coords): (Vec<usize>, Vec<[f64; 3]>) =
            points.into_iter().filter(|(_, c)| c.iter().all(|v| v.is_finite())).unzip();
        if coords.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = SpatialIndex { perm: (0..coords.len()).collect(), coords, sources, nodes: Vec::new() };
        index.build_node(0, index.coords.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.perm[start..end] {
            for d in 0..3 {
                lo[d] = lo[d].min(self.coords[i][d]);
                hi[d] = hi[d].max(self.coords[i][d]);
            }
        }
        let dim = (0..3).fold(0, |best, d| if hi[d] - lo[d] > hi[best] - lo[best] { d } else { best });
        if hi[dim] - lo[dim] <= 0.0 {
            return id;
        }
        let mid = (start + end) / 2;
        let coords = &self.coords;
        self.perm[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| coords[a][dim].total_cmp(&coords[b][dim]).then(a.cmp(&b)));
        let value = self.coords[self.perm[mid]][dim];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// The `min(k, N)` nearest points, nearest first.
    pub fn knn_search(&self, query: impl Into<[f64; 3]>, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let q = query.into();
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, &q, k, &mut heap);
        Ok(self.finish(heap.into_sorted_vec()))
    }

    fn knn_node(&self, node: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    let c = Candidate { d2: dist2(q, &self.coords[i]), index: self.sources[i] };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    /// All points within `radius` (inclusive), nearest first.
    ///
    /// A zero radius is accepted and returns the points coinciding with the query.
    pub fn radius_search(&self, query: impl Into<[f64; 3]>, radius: f64) -> Result<Vec<Neighbor>> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("search radius must be non-negative, got {radius}")));
        }
        let q = query.into();
        let mut out = Vec::new();
        self.radius_node(0, &q, radius * radius, &mut out);
        out.sort_unstable();
        Ok(self.finish(out))
    }

    fn radius_node(&self, node: usize, q: &[f64; 3], r2: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    let d2 = dist2(q, &self.coords[i]);
                    if d2 <= r2 {
                        out.push(Candidate { d2, index: self.sources[i] });
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_node(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_node(right, q, r2, out);
                }
            }
        }
    }

    fn finish(&self, sorted: Vec<Candidate>) -> Vec<Neighbor> {
        sorted.into_iter().map(|c| Neighbor { index: c.index, distance: c.d2.sqrt() }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive scan with the same ordering rule.
    fn brute_knn(points: &[[f64; 3]], q: &[f64; 3], k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (dist2(q, p), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn index_of(points: &[[f64; 3]]) -> SpatialIndex {
        SpatialIndex::from_points(points.iter().copied().enumerate()).unwrap()
    }

    #[test]
    fn single_point_is_always_nearest() {
        let idx = index_of(&[[1.0, 2.0, 3.0]]);
        for q in [[0.0, 0.0, 0.0], [1e6, -1e6, 5.0]] {
            let hits = idx.knn_search(q, 1).unwrap();
            assert_eq!(hits.len(), 1);
            assert_eq!(hits[0].index, 0);
        }
    }

    #[test]
    fn hand_computed_nearest() {
        let idx = index_of(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let hit = idx.knn_search([0.1, 0.0, 0.0], 1).unwrap()[0];
        assert_eq!(hit.index, 0);
        assert!((hit.distance - 0.1).abs() < 1e-15);
    }

    #[test]
    fn k_saturates_at_n() {
        let idx = index_of(&[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert_eq!(idx.knn_search([0.0; 3], 10).unwrap().len(), 3);
        assert!(idx.knn_search([0.0; 3], 0).is_err());
    }

    #[test]
    fn ties_prefer_lower_source_index() {
        // four points on a circle around the query
        let pts = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        let idx = index_of(&pts);
        let hits = idx.knn_search([0.0; 3], 2).unwrap();
        assert_eq!(hits.iter().map(|h| h.index).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn empty_index_is_an_error() {
        assert!(matches!(SpatialIndex::build(&PointCloud::default()), Err(Error::EmptyCloud)));
    }

    #[test]
    fn zero_radius_returns_coincident_points() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [2.0, 0.0, 0.0]];
        let idx = index_of(&pts);
        let hits = idx.radius_search([1.0, 1.0, 1.0], 0.0).unwrap();
        assert_eq!(hits.iter().map(|h| h.index).collect::<Vec<_>>(), vec![1, 2]);
        assert!(idx.radius_search([0.0; 3], -1.0).is_err());
    }

    #[test]
    fn unit_grid_half_radius_finds_own_cell() {
        let mut pts = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..5 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let idx = index_of(&pts);
        for (i, p) in pts.iter().enumerate() {
            let hits = idx.radius_search(*p, 0.5).unwrap();
            assert_eq!(hits.len(), 1);
            assert_eq!(hits[0].index, i);
        }
        assert_eq!(idx.radius_search([2.0; 3], 100.0).unwrap().len(), pts.len());
        assert!(idx.radius_search([50.0; 3], 1.0).unwrap().is_empty());
    }

    #[test]
    fn hundred_random_points_match_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<[f64; 3]> = (0..100).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let idx = index_of(&pts);
        for _ in 0..50 {
            let q = [rng.random(), rng.random(), rng.random()];
            let got: Vec<usize> = idx.knn_search(q, 5).unwrap().iter().map(|h| h.index).collect();
            let want: Vec<usize> = brute_knn(&pts, &q, 5).iter().map(|h| h.0).collect();
            assert_eq!(got, want);
        }
    }

    fn arb_case() -> impl Strategy<Value = (Vec<[f64; 3]>, [f64; 3], usize)> {
        // integer lattice coordinates force plenty of exact distance ties
        let coord = prop_oneof![(-5i32..5).prop_map(f64::from), -5.0f64..5.0];
        let point = [coord.clone(), coord.clone(), coord.clone()];
        (prop::collection::vec(point, 1..500), [coord.clone(), coord.clone(), coord], 1usize..40)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn knn_matches_exhaustive_scan((pts, q, k) in arb_case()) {
            let idx = index_of(&pts);
            let got: Vec<(usize, f64)> = idx.knn_search(q, k).unwrap().iter().map(|h| (h.index, h.distance)).collect();
            prop_assert_eq!(got, brute_knn(&pts, &q, k));
        }
    }

    proptest! {
        #[test]
        fn radius_matches_exhaustive_scan((pts, q, _) in arb_case(), r in 0.0f64..4.0) {
            let idx = index_of(&pts);
            let got: Vec<usize> = idx.radius_search(q, r).unwrap().iter().map(|h| h.index).collect();
            let want: Vec<usize> = brute_knn(&pts, &q, pts.len())
                .into_iter()
                .map(|(i, _)| i)
                .filter(|&i| dist2(&q, &pts[i]) <= r * r)
                .collect();
            prop_assert_eq!(got, want);
        }
    }
}
