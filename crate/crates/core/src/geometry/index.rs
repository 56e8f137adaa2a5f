//! Exact fixed-radius and k-nearest-neighbor queries over a point snapshot.
//!
//! Results are ordered by squared Euclidean distance with ties broken by
//! ascending point index, so every query is reproducible bit for bit and
//! agrees with a brute-force scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Vec3;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static k-d tree built once per cloud snapshot.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
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
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl NeighborIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        if hi[axis] - lo[axis] <= 0.0 {
            // All points coincide; splitting cannot separate them.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Indices of all points with `|p - q| <= r`, nearest first.
    pub fn radius_search(&self, q: &Vec3, r: f64) -> Vec<usize> {
        let mut hits = Vec::new();
        self.radius_candidates(q, r, &mut hits);
        hits.sort_unstable();
        hits.into_iter().map(|c| c.index).collect()
    }

    /// Like [`radius_search`](Self::radius_search) but unordered and writing
    /// into a caller buffer, for hot loops that only need the set.
    pub fn radius_search_into(&self, q: &Vec3, r: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.nodes.is_empty() || !(r >= 0.0) {
            return;
        }
        let r2 = r * r;
        self.visit_radius(0, q, r2, &mut |c| out.push(c.index));
    }

    fn radius_candidates(&self, q: &Vec3, r: f64, hits: &mut Vec<Candidate>) {
        if self.nodes.is_empty() || !(r >= 0.0) {
            return;
        }
        let r2 = r * r;
        self.visit_radius(0, q, r2, &mut |c| hits.push(c));
    }

    fn visit_radius(&self, node: usize, q: &Vec3, r2: f64, emit: &mut impl FnMut(Candidate)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist2 = (self.points[i] - q).norm_squared();
                    if dist2 <= r2 {
                        emit(Candidate { dist2, index: i });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                // Points equal to the split value may sit on either side.
                if diff <= 0.0 || diff * diff <= r2 {
                    self.visit_radius(left, q, r2, emit);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.visit_radius(right, q, r2, emit);
                }
            }
        }
    }

    /// The `k` nearest points to `q`, nearest first.
    pub fn knn(&self, q: &Vec3, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.points.len() {
            return Err(Error::KOutOfRange {
                k,
                len: self.points.len(),
            });
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.visit_knn(0, q, k, &mut heap);
        let mut best = heap.into_vec();
        best.sort_unstable();
        Ok(best.into_iter().map(|c| c.index).collect())
    }

    fn visit_knn(&self, node: usize, q: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: (self.points[i] - q).norm_squared(),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.visit_knn(near, q, k, heap);
                let worst = heap.peek().map(|c| c.dist2);
                // Keep equal-distance subtrees: they may hold a lower index.
                if heap.len() < k || worst.is_some_and(|w| diff * diff <= w) {
                    self.visit_knn(far, q, k, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_radius(points: &[Vec3], q: &Vec3, r: f64) -> Vec<usize> {
        let mut v: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .filter(|(d, _)| *d <= r * r)
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v.into_iter().map(|(_, i)| i).collect()
    }

    fn brute_knn(points: &[Vec3], q: &Vec3, k: usize) -> Vec<usize> {
        let mut v: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v.into_iter().take(k).map(|(_, i)| i).collect()
    }

    fn random_points(seed: u64, n: usize) -> Vec<Vec3> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn tiny_radius_finds_nothing_or_self() {
        let pts = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let idx = NeighborIndex::new(&pts);
        assert!(idx.radius_search(&Vec3::new(0.5, 0.5, 0.5), 0.1).is_empty());
        assert_eq!(idx.radius_search(&Vec3::new(1.0, 0.0, 0.0), 1e-6), vec![1]);
    }

    #[test]
    fn uniform_cloud_matches_brute_force() {
        let pts = random_points(7, 200);
        let idx = NeighborIndex::new(&pts);
        for q in random_points(8, 50) {
            assert_eq!(idx.radius_search(&q, 0.1), brute_radius(&pts, &q, 0.1));
        }
    }

    #[test]
    fn knn_edges() {
        let pts = random_points(3, 40);
        let idx = NeighborIndex::new(&pts);
        assert_eq!(idx.knn(&pts[5], 1).unwrap(), vec![5]);
        let mut all = idx.knn(&Vec3::zeros(), 40).unwrap();
        all.sort();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert!(idx.knn(&Vec3::zeros(), 0).is_err());
        assert!(idx.knn(&Vec3::zeros(), 41).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        // Four points on a circle around the query, plus duplicates.
        let pts = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ];
        let idx = NeighborIndex::new(&pts);
        assert_eq!(idx.radius_search(&Vec3::zeros(), 1.0), vec![0, 1, 2, 3, 4]);
        assert_eq!(idx.knn(&Vec3::zeros(), 2).unwrap(), vec![0, 1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn agrees_with_brute_force(
            seed in any::<u64>(),
            n in 1usize..1000,
            r in 0.001f64..0.5,
            k in 1usize..50,
        ) {
            let pts = random_points(seed, n);
            // Quantize some coordinates to force exact ties.
            let pts: Vec<Vec3> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| if i % 3 == 0 { (p * 8.0).map(f64::round) / 8.0 } else { *p })
                .collect();
            let idx = NeighborIndex::new(&pts);
            let k = k.min(n);
            for q in random_points(seed ^ 0x5555, 5) {
                prop_assert_eq!(idx.radius_search(&q, r), brute_radius(&pts, &q, r));
                prop_assert_eq!(idx.knn(&q, k).unwrap(), brute_knn(&pts, &q, k));
            }
        }
    }
}
