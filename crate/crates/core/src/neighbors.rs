//! Nearest-neighbor and range-count queries over realization matrices.
//!
//! Queries are always issued for a point of the indexed set itself. The point
//! is never its own neighbor, and neither is any point within the Theiler
//! window (`|i - j| <= theiler`). Ties in distance go to the smaller index, so
//! results are a pure function of the data.
//!
//! [`NeighborIndex`] is a k-d tree with leaf buckets and per-node bounding
//! boxes. [`linear_scan`] holds the brute-force versions of the same queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;
const NO_CHILD: u32 = u32::MAX;
/// Relative slack on Euclidean pruning bounds, which are accumulated
/// incrementally and can overshoot the true lower bound by a few ulps.
const EUCLIDEAN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    MaxNorm,
    Euclidean,
}

impl Metric {
    /// Distance in the metric's comparison scale: max |Δ| or Σ Δ².
    #[inline]
    pub(crate) fn reduced(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::MaxNorm => a
                .iter()
                .zip(b)
                .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())),
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        }
    }

    #[inline]
    pub(crate) fn reduced_to_distance(self, r: f64) -> f64 {
        match self {
            Metric::MaxNorm => r,
            Metric::Euclidean => r.sqrt(),
        }
    }

    #[inline]
    pub(crate) fn distance_to_reduced(self, d: f64) -> f64 {
        match self {
            Metric::MaxNorm => d,
            Metric::Euclidean => d * d,
        }
    }

    /// Distance between two points.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        self.reduced_to_distance(self.reduced(a, b))
    }
}

/// The `k` nearest admissible points, nearest first, and the k-th distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    pub indices: Vec<usize>,
    pub distance: f64,
}

#[derive(Debug, Clone)]
struct Node {
    start: u32,
    end: u32,
    split_dim: u32,
    split: f64,
    left: u32,
    right: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == NO_CHILD
    }
}

/// Immutable k-d tree over `n` points of dimension `dim`.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    n: usize,
    dim: usize,
    metric: Metric,
    theiler: usize,
    /// Points in tree order, row-major.
    data: Vec<f64>,
    /// Original index of the point stored at each tree position.
    ids: Vec<u32>,
    /// Tree position of each original index.
    pos: Vec<u32>,
    nodes: Vec<Node>,
    /// Per node: `dim` minima followed by `dim` maxima.
    bounds: Vec<f64>,
}

impl NeighborIndex {
    /// Indexes the rows formed by `columns` (each column one coordinate).
    pub fn new(columns: &[&[f64]], metric: Metric, theiler: usize) -> Result<Self> {
        let dim = columns.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("neighbor index needs at least one column".into()));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} rows in every column"),
                actual: format!("{:?}", columns.iter().map(|c| c.len()).collect::<Vec<_>>()),
            });
        }
        if n >= NO_CHILD as usize {
            return Err(Error::InvalidParameter(format!("too many points: {n}")));
        }
        if columns.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter("points must be finite".into()));
        }

        let mut rows = vec![0.0; n * dim];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                rows[i * dim + j] = v;
            }
        }

        let mut builder = Builder {
            rows: &rows,
            dim,
            ids: (0..n as u32).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        if n > 0 {
            builder.build(0, n);
        }
        let Builder {
            ids, nodes, bounds, ..
        } = builder;

        let mut data = Vec::with_capacity(n * dim);
        let mut pos = vec![0u32; n];
        for (p, &id) in ids.iter().enumerate() {
            let id = id as usize;
            data.extend_from_slice(&rows[id * dim..(id + 1) * dim]);
            pos[id] = p as u32;
        }

        Ok(Self {
            n,
            dim,
            metric,
            theiler,
            data,
            ids,
            pos,
            nodes,
            bounds,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn theiler(&self) -> usize {
        self.theiler
    }

    /// Coordinates of original point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let p = self.pos[i] as usize;
        &self.data[p * self.dim..(p + 1) * self.dim]
    }

    /// Number of points that may be returned for a query at `i`.
    pub fn admissible_count(&self, i: usize) -> usize {
        admissible_count(self.n, self.theiler, i)
    }

    #[inline]
    fn excluded(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.theiler
    }

    /// The `k` nearest admissible neighbors of point `i`.
    pub fn knn(&self, i: usize, k: usize) -> Result<Neighbors> {
        let mut best = Vec::with_capacity(k + 1);
        self.knn_into(i, k, &mut best)?;
        let distance = self.metric.reduced_to_distance(best[k - 1].0);
        Ok(Neighbors {
            indices: best.iter().map(|&(_, id)| id as usize).collect(),
            distance,
        })
    }

    /// Only the distance to the k-th nearest admissible neighbor.
    pub fn knn_distance(&self, i: usize, k: usize) -> Result<f64> {
        let mut best = Vec::with_capacity(k + 1);
        self.knn_into(i, k, &mut best)?;
        Ok(self.metric.reduced_to_distance(best[k - 1].0))
    }

    /// Fills `best` with `(reduced distance, index)` of the `k` nearest
    /// admissible points, ascending.
    pub(crate) fn knn_into(&self, i: usize, k: usize, best: &mut Vec<(f64, u32)>) -> Result<()> {
        assert!(i < self.n, "query index {i} out of range");
        let available = self.admissible_count(i);
        if k == 0 || available < k {
            return Err(Error::NotEnoughNeighbors {
                point: i,
                needed: k,
                available,
            });
        }
        best.clear();
        let mut search = KnnSearch {
            index: self,
            query: self.point(i),
            query_id: i,
            k,
            best,
            offsets: vec![0.0; self.dim],
        };
        search.visit(0, 0.0);
        debug_assert_eq!(best.len(), k);
        Ok(())
    }

    /// Admissible points strictly closer than `radius` to point `i`.
    pub fn range_count(&self, i: usize, radius: f64) -> usize {
        assert!(i < self.n, "query index {i} out of range");
        if radius.is_nan() || radius <= 0.0 {
            return 0;
        }
        if radius == f64::INFINITY {
            return self.admissible_count(i);
        }
        let limit = self.metric.distance_to_reduced(radius);
        let mut search = RangeSearch {
            index: self,
            query: self.point(i),
            query_id: i,
            radius,
            limit,
            count: 0,
            offsets: vec![0.0; self.dim],
        };
        search.visit(0, 0.0);
        search.count
    }

    fn node_bounds(&self, node: usize) -> (&[f64], &[f64]) {
        let b = &self.bounds[node * 2 * self.dim..(node + 1) * 2 * self.dim];
        b.split_at(self.dim)
    }

    /// Excluded original indices whose tree position lies in `[start, end)`.
    fn excluded_inside(&self, i: usize, start: usize, end: usize) -> usize {
        let lo = i.saturating_sub(self.theiler);
        let hi = (i + self.theiler).min(self.n - 1);
        (lo..=hi)
            .filter(|&j| {
                let p = self.pos[j] as usize;
                p >= start && p < end
            })
            .count()
    }
}

pub(crate) fn admissible_count(n: usize, theiler: usize, i: usize) -> usize {
    let below = i.min(theiler);
    let above = (n - 1 - i).min(theiler);
    n - 1 - below - above
}

struct Builder<'a> {
    rows: &'a [f64],
    dim: usize,
    ids: Vec<u32>,
    nodes: Vec<Node>,
    bounds: Vec<f64>,
}

impl Builder<'_> {
    fn build(&mut self, start: usize, end: usize) -> u32 {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &id in &self.ids[start..end] {
            let row = &self.rows[id as usize * dim..(id as usize + 1) * dim];
            for j in 0..dim {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        let node_id = self.nodes.len();
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            split_dim: 0,
            split: 0.0,
            left: NO_CHILD,
            right: NO_CHILD,
        });

        let (split_dim, spread) = (0..dim)
            .map(|j| (j, hi[j] - lo[j]))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if end - start <= LEAF_SIZE || spread <= 0.0 {
            return node_id as u32;
        }

        let mid = start + (end - start) / 2;
        let rows = self.rows;
        self.ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            rows[a as usize * dim + split_dim].total_cmp(&rows[b as usize * dim + split_dim])
        });
        let split = rows[self.ids[mid] as usize * dim + split_dim];

        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let node = &mut self.nodes[node_id];
        node.split_dim = split_dim as u32;
        node.split = split;
        node.left = left;
        node.right = right;
        node_id as u32
    }
}

struct KnnSearch<'a, 'b> {
    index: &'a NeighborIndex,
    query: &'a [f64],
    query_id: usize,
    k: usize,
    best: &'b mut Vec<(f64, u32)>,
    offsets: Vec<f64>,
}

impl KnnSearch<'_, '_> {
    #[inline]
    fn worst(&self) -> f64 {
        if self.best.len() < self.k {
            f64::INFINITY
        } else {
            self.best[self.k - 1].0
        }
    }

    #[inline]
    fn offer(&mut self, d: f64, id: u32) {
        let k = self.k;
        if self.best.len() == k {
            let (wd, wid) = self.best[k - 1];
            if d > wd || (d == wd && id > wid) {
                return;
            }
            self.best.pop();
        }
        let at = self
            .best
            .partition_point(|&(bd, bid)| bd < d || (bd == d && bid < id));
        self.best.insert(at, (d, id));
    }

    fn visit(&mut self, node_id: u32, rd: f64) {
        let index = self.index;
        let node = &index.nodes[node_id as usize];
        if node.is_leaf() {
            let dim = index.dim;
            for p in node.start as usize..node.end as usize {
                let id = index.ids[p];
                if index.excluded(self.query_id, id as usize) {
                    continue;
                }
                let d = index
                    .metric
                    .reduced(self.query, &index.data[p * dim..(p + 1) * dim]);
                self.offer(d, id);
            }
            return;
        }
        let sd = node.split_dim as usize;
        let diff = self.query[sd] - node.split;
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.visit(near, rd);
        match index.metric {
            Metric::MaxNorm => {
                let rd_far = rd.max(diff.abs());
                if rd_far <= self.worst() {
                    self.visit(far, rd_far);
                }
            }
            Metric::Euclidean => {
                let old = self.offsets[sd];
                let new = diff * diff;
                let rd_far = rd - old + new;
                if rd_far * (1.0 - EUCLIDEAN_SLACK) <= self.worst() {
                    self.offsets[sd] = new;
                    self.visit(far, rd_far);
                    self.offsets[sd] = old;
                }
            }
        }
    }
}

struct RangeSearch<'a> {
    index: &'a NeighborIndex,
    query: &'a [f64],
    query_id: usize,
    radius: f64,
    /// `radius` in the reduced scale; used for pruning only.
    limit: f64,
    count: usize,
    offsets: Vec<f64>,
}

impl RangeSearch<'_> {
    /// Largest reduced distance from the query to any point in the node's box.
    fn farthest(&self, node_id: usize) -> f64 {
        let (lo, hi) = self.index.node_bounds(node_id);
        let q = self.query;
        match self.index.metric {
            Metric::MaxNorm => (0..q.len()).fold(0.0f64, |acc, j| {
                acc.max((q[j] - lo[j]).abs()).max((hi[j] - q[j]).abs())
            }),
            Metric::Euclidean => (0..q.len())
                .map(|j| {
                    let a = (q[j] - lo[j]).abs().max((hi[j] - q[j]).abs());
                    a * a
                })
                .sum(),
        }
    }

    fn visit(&mut self, node_id: u32, rd: f64) {
        let index = self.index;
        let node = &index.nodes[node_id as usize];
        let (start, end) = (node.start as usize, node.end as usize);

        // Whole box inside the ball: count without touching points. The
        // Euclidean check keeps a margin so rounding cannot admit a point
        // that a direct comparison would reject.
        let far = self.farthest(node_id as usize);
        let inside = match index.metric {
            Metric::MaxNorm => far < self.limit,
            Metric::Euclidean => far * (1.0 + EUCLIDEAN_SLACK) < self.limit,
        };
        if inside {
            self.count += (end - start) - index.excluded_inside(self.query_id, start, end);
            return;
        }

        if node.is_leaf() {
            let dim = index.dim;
            for p in start..end {
                let id = index.ids[p] as usize;
                if index.excluded(self.query_id, id) {
                    continue;
                }
                // Compared as a true distance so that the k-th neighbor
                // distance reported by `knn` is never strictly inside.
                let d = index
                    .metric
                    .distance(self.query, &index.data[p * dim..(p + 1) * dim]);
                if d < self.radius {
                    self.count += 1;
                }
            }
            return;
        }
        let sd = node.split_dim as usize;
        let diff = self.query[sd] - node.split;
        let (near, far_child) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.visit(near, rd);
        match index.metric {
            Metric::MaxNorm => {
                let rd_far = rd.max(diff.abs());
                if rd_far < self.limit {
                    self.visit(far_child, rd_far);
                }
            }
            Metric::Euclidean => {
                let old = self.offsets[sd];
                let new = diff * diff;
                let rd_far = rd - old + new;
                if rd_far * (1.0 - EUCLIDEAN_SLACK) < self.limit {
                    self.offsets[sd] = new;
                    self.visit(far_child, rd_far);
                    self.offsets[sd] = old;
                }
            }
        }
    }
}

/// Brute-force O(N) per query versions of the index queries.
pub mod linear_scan {
    use super::{admissible_count, Metric, Neighbors};
    use crate::error::{Error, Result};

    fn row(columns: &[&[f64]], i: usize) -> Vec<f64> {
        columns.iter().map(|c| c[i]).collect()
    }

    pub fn knn(
        columns: &[&[f64]],
        metric: Metric,
        theiler: usize,
        i: usize,
        k: usize,
    ) -> Result<Neighbors> {
        let n = columns[0].len();
        let available = admissible_count(n, theiler, i);
        if k == 0 || available < k {
            return Err(Error::NotEnoughNeighbors {
                point: i,
                needed: k,
                available,
            });
        }
        let q = row(columns, i);
        let mut all: Vec<(f64, usize)> = (0..n)
            .filter(|&j| i.abs_diff(j) > theiler)
            .map(|j| (metric.reduced(&q, &row(columns, j)), j))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        Ok(Neighbors {
            distance: metric.reduced_to_distance(all[k - 1].0),
            indices: all.into_iter().map(|(_, j)| j).collect(),
        })
    }

    pub fn range_count(columns: &[&[f64]], metric: Metric, theiler: usize, i: usize, radius: f64) -> usize {
        let n = columns[0].len();
        if radius.is_nan() || radius <= 0.0 {
            return 0;
        }
        let q = row(columns, i);
        (0..n)
            .filter(|&j| i.abs_diff(j) > theiler)
            .filter(|&j| metric.distance(&q, &row(columns, j)) < radius)
            .count()
    }
}

/// Adds i.i.d. uniform noise in `[-amplitude, amplitude]` to every coordinate.
pub fn jitter(columns: &[Vec<f64>], amplitude: f64, seed: u64) -> Vec<Vec<f64>> {
    assert!(amplitude >= 0.0, "jitter amplitude must be non-negative");
    if amplitude == 0.0 {
        return columns.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    columns
        .iter()
        .map(|col| {
            col.iter()
                .map(|&v| v + rng.random_range(-amplitude..=amplitude))
                .collect()
        })
        .collect()
}
