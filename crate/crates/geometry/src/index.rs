//! Static kd-tree over a cloud snapshot.
//!
//! Results are ordered by `(distance, id)`, so they match a brute-force scan
//! exactly, ties included.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::{distance_squared, GeometryError, Point3, PointCloud, Result};

const LEAF_SIZE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

#[derive(Debug)]
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

/// Immutable spatial index; cheap to clone and safe to share across threads.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    inner: Arc<Tree>,
}

#[derive(Debug)]
struct Tree {
    points: Vec<Point3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

pub fn build_index(cloud: &PointCloud) -> Result<SpatialIndex> {
    SpatialIndex::new(cloud.points.clone())
}

impl SpatialIndex {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build(&points, &mut order, 0, points.len(), &mut nodes);
        Ok(Self {
            inner: Arc::new(Tree {
                points,
                order,
                nodes,
            }),
        })
    }

    pub fn len(&self) -> usize {
        self.inner.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.inner.points
    }

    pub fn point(&self, id: usize) -> Point3 {
        self.inner.points[id]
    }

    /// The `min(k, n)` closest points, ascending by distance then id.
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(GeometryError::InvalidParameter("k must be at least 1".into()));
        }
        let k = k.min(self.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.inner.knn_node(0, query, k, &mut heap);
        let mut found: Vec<Candidate> = heap.into_vec();
        found.sort();
        Ok(found
            .into_iter()
            .map(|c| Neighbor {
                id: c.id as usize,
                distance: c.dist2.sqrt(),
            })
            .collect())
    }

    pub fn nearest(&self, query: &Point3) -> Neighbor {
        self.knn(query, 1).expect("k = 1")[0]
    }

    /// All points with distance ≤ `radius`, ascending by distance then id.
    pub fn radius(&self, query: &Point3, radius: f64) -> Vec<Neighbor> {
        let r2 = radius * radius;
        let mut found = Vec::new();
        self.inner.radius_node(0, query, r2, &mut found);
        found.sort();
        found
            .into_iter()
            .map(|c| Neighbor {
                id: c.id as usize,
                distance: c.dist2.sqrt(),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    dist2: f64,
    id: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn coord(p: &Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

fn build(points: &[Point3], order: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let slot = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return slot;
    }
    // Split on the axis of largest spread.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in &order[start..end] {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(coord(p, a));
            hi[a] = hi[a].max(coord(p, a));
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[axis] - lo[axis] == 0.0 {
        // All points coincide.
        nodes.push(Node::Leaf { start, end });
        return slot;
    }
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        coord(&points[a as usize], axis).total_cmp(&coord(&points[b as usize], axis))
    });
    let value = coord(&points[order[mid] as usize], axis);
    nodes.push(Node::Leaf { start, end }); // placeholder
    let left = build(points, order, start, mid, nodes);
    let right = build(points, order, mid, end, nodes);
    nodes[slot] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    slot
}

impl Tree {
    fn knn_node(&self, node: usize, q: &Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[start..end] {
                    let cand = Candidate {
                        dist2: distance_squared(q, &self.points[id as usize]),
                        id,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                // Left holds coord ≤ value, right holds coord ≥ value.
                let diff = coord(q, axis) - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist2);
                if heap.len() < k || diff * diff <= worst {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    fn radius_node(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[start..end] {
                    let dist2 = distance_squared(q, &self.points[id as usize]);
                    if dist2 <= r2 {
                        out.push(Candidate { dist2, id });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = coord(q, axis) - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_node(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_node(right, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let idx = SpatialIndex::new(vec![Point3::new(1.0, 2.0, 3.0)]).unwrap();
        let hits = idx.knn(&Point3::new(-4.0, 0.0, 9.0), 1).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].id, 0);
        assert_eq!(idx.knn(&Point3::origin(), 5).unwrap().len(), 1);
    }

    #[test]
    fn empty_and_zero_k() {
        assert!(matches!(
            build_index(&PointCloud::default()),
            Err(GeometryError::EmptyCloud)
        ));
        let idx = SpatialIndex::new(vec![Point3::origin()]).unwrap();
        assert!(idx.knn(&Point3::origin(), 0).is_err());
    }

    #[test]
    fn coincident_query_and_tie_break() {
        let idx = SpatialIndex::new(vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
        ])
        .unwrap();
        let hits = idx.knn(&Point3::origin(), 3).unwrap();
        assert_eq!(hits[0].distance, 0.0);
        assert_eq!(hits[1].id, 0);
        assert_eq!(hits[2].id, 1);
    }

    #[test]
    fn snapshot_is_independent_of_cloud() {
        let mut cloud = PointCloud::new(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)]);
        let idx = build_index(&cloud).unwrap();
        cloud.points[0] = Point3::new(100.0, 0.0, 0.0);
        assert_eq!(idx.point(0), Point3::origin());
    }

    #[test]
    fn duplicate_points_are_all_returned() {
        let idx = SpatialIndex::new(vec![Point3::origin(); 40]).unwrap();
        let hits = idx.knn(&Point3::origin(), 40).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.id).collect();
        assert_eq!(ids, (0..40).collect::<Vec<_>>());
        assert_eq!(idx.radius(&Point3::origin(), 0.0).len(), 40);
    }
}
