//! A small kd-tree over row indices of a flat coordinate buffer.
//!
//! The tree exists to make nearest-generator queries O(log m) on average
//! while returning *exactly* what a linear scan would: squared distances are
//! accumulated coordinate-by-coordinate in the same order, and ties are
//! broken toward the lowest row id. Subtrees at distance equal to the
//! current best are therefore still visited.

#[derive(Clone)]
pub(crate) struct KdTree {
    nodes: Vec<Node>,
    root: i32,
    dim: usize,
}

#[derive(Clone)]
struct Node {
    point: u32,
    split_dim: u16,
    left: i32,
    right: i32,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

impl KdTree {
    pub fn build(coords: &[f64], m: usize, dim: usize) -> KdTree {
        let mut idx: Vec<u32> = (0..m as u32).collect();
        let mut tree = KdTree {
            nodes: Vec::with_capacity(m),
            root: -1,
            dim,
        };
        let root = tree.build_rec(coords, &mut idx);
        tree.root = root;
        tree
    }

    fn build_rec(&mut self, coords: &[f64], idx: &mut [u32]) -> i32 {
        if idx.is_empty() {
            return -1;
        }
        let dim = self.dim;
        // Split on the coordinate with the widest extent in this subset.
        let mut split_dim = 0usize;
        if idx.len() > 1 {
            let mut best_spread = -1.0;
            for d in 0..dim {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &i in idx.iter() {
                    let v = coords[i as usize * dim + d];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi - lo > best_spread {
                    best_spread = hi - lo;
                    split_dim = d;
                }
            }
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            let va = coords[a as usize * dim + split_dim];
            let vb = coords[b as usize * dim + split_dim];
            va.partial_cmp(&vb).unwrap().then(a.cmp(&b))
        });
        let point = idx[mid];
        let node_id = self.nodes.len() as i32;
        self.nodes.push(Node {
            point,
            split_dim: split_dim as u16,
            left: -1,
            right: -1,
        });
        let (lo, rest) = idx.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec(coords, lo);
        let right = self.build_rec(coords, hi);
        self.nodes[node_id as usize].left = left;
        self.nodes[node_id as usize].right = right;
        node_id
    }

    /// Index and squared distance of the nearest row; ties go to the lowest
    /// row id, matching a first-wins linear scan.
    pub fn nearest(&self, coords: &[f64], query: &[f64]) -> (usize, f64) {
        debug_assert_eq!(query.len(), self.dim);
        let mut best = (u32::MAX, f64::INFINITY);
        self.nearest_rec(coords, query, self.root, &mut best);
        (best.0 as usize, best.1)
    }

    fn nearest_rec(&self, coords: &[f64], query: &[f64], node: i32, best: &mut (u32, f64)) {
        if node < 0 {
            return;
        }
        let nd = &self.nodes[node as usize];
        let p = nd.point as usize;
        let d2 = sq_dist(query, &coords[p * self.dim..(p + 1) * self.dim]);
        if d2 < best.1 || (d2 == best.1 && (nd.point) < best.0) {
            *best = (nd.point, d2);
        }
        let sd = nd.split_dim as usize;
        let diff = query[sd] - coords[p * self.dim + sd];
        let (near, far) = if diff < 0.0 {
            (nd.left, nd.right)
        } else {
            (nd.right, nd.left)
        };
        self.nearest_rec(coords, query, near, best);
        // <= so an equal-distance, lower-id point across the plane is found.
        if diff * diff <= best.1 {
            self.nearest_rec(coords, query, far, best);
        }
    }

    /// The k nearest rows by squared distance, ascending. Ties at the k-th
    /// place are resolved arbitrarily; callers only rely on the distances.
    pub fn k_nearest(&self, coords: &[f64], query: &[f64], k: usize) -> Vec<(usize, f64)> {
        debug_assert_eq!(query.len(), self.dim);
        let mut heap: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        self.k_nearest_rec(coords, query, self.root, k, &mut heap);
        heap.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        heap.into_iter().map(|(d2, i)| (i as usize, d2)).collect()
    }

    fn k_nearest_rec(
        &self,
        coords: &[f64],
        query: &[f64],
        node: i32,
        k: usize,
        heap: &mut Vec<(f64, u32)>,
    ) {
        if node < 0 {
            return;
        }
        let nd = &self.nodes[node as usize];
        let p = nd.point as usize;
        let d2 = sq_dist(query, &coords[p * self.dim..(p + 1) * self.dim]);
        if heap.len() < k {
            heap.push((d2, nd.point));
            if heap.len() == k {
                heap.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            }
        } else if d2 < heap[0].0 {
            heap[0] = (d2, nd.point);
            let mut i = 0;
            // Restore "max first" by a single pass; k is tiny here.
            for j in 1..heap.len() {
                if heap[j].0 > heap[i].0 {
                    i = j;
                }
            }
            heap.swap(0, i);
        }
        let sd = nd.split_dim as usize;
        let diff = query[sd] - coords[p * self.dim + sd];
        let (near, far) = if diff < 0.0 {
            (nd.left, nd.right)
        } else {
            (nd.right, nd.left)
        };
        self.k_nearest_rec(coords, query, near, k, heap);
        if heap.len() < k || diff * diff <= heap[0].0 {
            self.k_nearest_rec(coords, query, far, k, heap);
        }
    }
}
