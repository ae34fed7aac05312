//! CART regression trees.
//!
//! Splits maximize variance reduction. Exact splits scan presorted feature
//! orders and place thresholds at midpoints between consecutive distinct
//! values; random splits (extra-trees) draw one threshold per candidate
//! feature uniformly within the node's value range. Samples with
//! `x[feature] <= threshold` go left.
//!
//! Among equal-score splits the lowest feature index wins, then the lowest
//! threshold, independent of the order in which candidates were visited.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub(crate) const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    /// Split feature, or [`LEAF`].
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Mean target of the training samples reaching this node.
    pub value: f64,
}

impl Node {
    fn leaf(value: f64) -> Self {
        Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, value }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.is_leaf() {
                return node.value;
            }
            i = if row[node.feature as usize] <= node.threshold { node.left } else { node.right } as usize;
        }
    }

    /// Adds `scale * prediction` for each row of a row-major block to `acc`.
    pub fn accumulate(&self, data: &[f64], width: usize, scale: f64, acc: &mut [f64]) {
        for (row, a) in data.chunks_exact(width).zip(acc.iter_mut()) {
            *a += scale * self.predict_row(row);
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features used by at least one split, ascending.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.nodes.iter().filter(|n| !n.is_leaf()).map(|n| n.feature as usize).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Splitter {
    Best,
    Random,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Non-constant candidate features examined per split.
    pub max_features: usize,
    pub splitter: Splitter,
}

/// Column-major copy of the training matrix plus per-feature row orders.
pub(crate) struct Columns {
    pub cols: Vec<Vec<f64>>,
    pub sorted: Vec<Vec<u32>>,
}

impl Columns {
    pub fn new(data: &[f64], n_cols: usize, with_orders: bool) -> Self {
        let n_rows = if n_cols == 0 { 0 } else { data.len() / n_cols };
        let cols: Vec<Vec<f64>> = (0..n_cols).map(|c| (0..n_rows).map(|r| data[r * n_cols + c]).collect()).collect();
        let sorted = if with_orders {
            cols.iter()
                .map(|col| {
                    let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                    idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                    idx
                })
                .collect()
        } else {
            Vec::new()
        };
        Columns { cols, sorted }
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
    n_left: usize,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.score > o.score
                    || (self.score == o.score
                        && (self.feature < o.feature || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

/// Grows one tree. `counts[r]` is the multiplicity of training row `r`
/// (bootstrap); `None` uses every row once.
pub(crate) fn grow_tree(
    data: &Columns,
    y: &[f64],
    counts: Option<&[u32]>,
    cfg: &GrowConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n_rows = data.n_rows();
    let n_features = data.n_cols();
    // Training rows expanded by multiplicity; positions index into it.
    let mut sample_rows: Vec<u32> = Vec::with_capacity(n_rows);
    let mut first_pos = vec![0u32; n_rows];
    for r in 0..n_rows {
        first_pos[r] = sample_rows.len() as u32;
        let c = counts.map_or(1, |c| c[r]);
        for _ in 0..c {
            sample_rows.push(r as u32);
        }
    }
    let n_samples = sample_rows.len();
    let ys: Vec<f64> = sample_rows.iter().map(|&r| y[r as usize]).collect();

    // Best: one position order per feature, sorted by value. Random: a single list.
    let mut orders: Vec<Vec<u32>> = match cfg.splitter {
        Splitter::Best => data
            .sorted
            .iter()
            .map(|rows| {
                let mut o = Vec::with_capacity(n_samples);
                for &r in rows {
                    let c = counts.map_or(1, |c| c[r as usize]);
                    let start = first_pos[r as usize];
                    o.extend(start..start + c);
                }
                o
            })
            .collect(),
        Splitter::Random => vec![(0..n_samples as u32).collect()],
    };
    let value_at = |f: usize, p: u32| data.cols[f][sample_rows[p as usize] as usize];

    let mut nodes: Vec<Node> = Vec::new();
    let mut goes_left = vec![false; n_samples];
    let mut buf: Vec<u32> = Vec::with_capacity(n_samples);
    let mut feature_order: Vec<usize> = (0..n_features).collect();
    let max_features = cfg.max_features.clamp(1, n_features.max(1));
    let min_leaf = cfg.min_samples_leaf.max(1);

    // (node id, lo, hi, depth)
    let mut stack = vec![(0usize, 0usize, n_samples, 0usize)];
    nodes.push(Node::leaf(0.0));
    while let Some((id, lo, hi, depth)) = stack.pop() {
        let members = &orders[0][lo..hi];
        let n = hi - lo;
        let mut sum = 0.0;
        let mut lo_y = f64::INFINITY;
        let mut hi_y = f64::NEG_INFINITY;
        for &p in members {
            let v = ys[p as usize];
            sum += v;
            lo_y = lo_y.min(v);
            hi_y = hi_y.max(v);
        }
        let mean = if n > 0 { sum / n as f64 } else { 0.0 };
        nodes[id] = Node::leaf(mean);
        let depth_capped = cfg.max_depth.is_some_and(|d| depth >= d);
        if n < cfg.min_samples_split.max(2) || n < 2 * min_leaf || lo_y == hi_y || depth_capped {
            continue;
        }

        if max_features < n_features {
            feature_order.sort_unstable();
            feature_order.shuffle(rng);
        }
        let mut best: Option<Candidate> = None;
        let mut visited = 0usize;
        for &f in &feature_order {
            if visited == max_features {
                break;
            }
            let found = match cfg.splitter {
                Splitter::Best => {
                    let ord = &orders[f][lo..hi];
                    if value_at(f, ord[0]) == value_at(f, ord[n - 1]) {
                        continue;
                    }
                    best_split(ord, f, sum, &ys, &value_at, min_leaf)
                }
                Splitter::Random => {
                    let mut vmin = f64::INFINITY;
                    let mut vmax = f64::NEG_INFINITY;
                    for &p in &orders[0][lo..hi] {
                        let v = value_at(f, p);
                        vmin = vmin.min(v);
                        vmax = vmax.max(v);
                    }
                    if vmin == vmax {
                        continue;
                    }
                    let u: f64 = rng.random();
                    let mut thr = vmin + u * (vmax - vmin);
                    if thr >= vmax {
                        thr = vmin;
                    }
                    random_split(&orders[0][lo..hi], f, thr, sum, &ys, &value_at, min_leaf)
                }
            };
            visited += 1;
            if let Some(c) = found {
                if c.beats(&best) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else { continue };

        // Partition every order array for this node range.
        match cfg.splitter {
            Splitter::Best => {
                for &p in &orders[split.feature][lo..hi] {
                    goes_left[p as usize] = false;
                }
                for &p in &orders[split.feature][lo..lo + split.n_left] {
                    goes_left[p as usize] = true;
                }
            }
            Splitter::Random => {
                for &p in &orders[0][lo..hi] {
                    goes_left[p as usize] = value_at(split.feature, p) <= split.threshold;
                }
            }
        }
        for order in orders.iter_mut() {
            let range = &mut order[lo..hi];
            buf.clear();
            buf.extend(range.iter().copied().filter(|&p| goes_left[p as usize]));
            buf.extend(range.iter().copied().filter(|&p| !goes_left[p as usize]));
            range.copy_from_slice(&buf);
        }

        let left = nodes.len();
        nodes.push(Node::leaf(0.0));
        let right = nodes.len();
        nodes.push(Node::leaf(0.0));
        nodes[id] = Node {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left as u32,
            right: right as u32,
            value: mean,
        };
        let mid = lo + split.n_left;
        stack.push((right, mid, hi, depth + 1));
        stack.push((left, lo, mid, depth + 1));
    }
    Tree { nodes }
}

fn best_split(
    ord: &[u32],
    feature: usize,
    total: f64,
    ys: &[f64],
    value_at: &impl Fn(usize, u32) -> f64,
    min_leaf: usize,
) -> Option<Candidate> {
    let n = ord.len();
    let mut best: Option<Candidate> = None;
    let mut left_sum = 0.0;
    for i in 0..n - 1 {
        let p = ord[i];
        left_sum += ys[p as usize];
        let n_left = i + 1;
        if n_left < min_leaf {
            continue;
        }
        if n - n_left < min_leaf {
            break;
        }
        let a = value_at(feature, p);
        let b = value_at(feature, ord[i + 1]);
        if a == b {
            continue;
        }
        let right_sum = total - left_sum;
        let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
        let mut threshold = a + (b - a) / 2.0;
        if threshold >= b {
            threshold = a;
        }
        let c = Candidate { score, feature, threshold, n_left };
        if c.beats(&best) {
            best = Some(c);
        }
    }
    best
}

fn random_split(
    members: &[u32],
    feature: usize,
    threshold: f64,
    total: f64,
    ys: &[f64],
    value_at: &impl Fn(usize, u32) -> f64,
    min_leaf: usize,
) -> Option<Candidate> {
    let n = members.len();
    let mut left_sum = 0.0;
    let mut n_left = 0usize;
    for &p in members {
        if value_at(feature, p) <= threshold {
            left_sum += ys[p as usize];
            n_left += 1;
        }
    }
    if n_left < min_leaf || n - n_left < min_leaf {
        return None;
    }
    let right_sum = total - left_sum;
    let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
    Some(Candidate { score, feature, threshold, n_left })
}
