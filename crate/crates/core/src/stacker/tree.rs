use serde::{Deserialize, Serialize};

use super::binning::BinMapper;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// `x[feature] <= threshold` goes left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Index of the leaf reached when `goes_left(feature, threshold)`
    /// decides each split.
    pub(crate) fn leaf_index_by(&self, mut goes_left: impl FnMut(usize, f64) -> bool) -> usize {
        let mut idx = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[idx]
        {
            idx = if goes_left(*feature, *threshold) {
                *left
            } else {
                *right
            };
        }
        idx
    }

    pub(crate) fn leaf(&self, idx: usize) -> f64 {
        match self.nodes[idx] {
            Node::Leaf { value } => value,
            Node::Split { .. } => panic!("node {idx} is not a leaf"),
        }
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for node in &mut self.nodes {
            if let Node::Leaf { value } = node {
                *value *= factor;
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub max_leaves: usize,
    pub lambda: f64,
    pub min_gain: f64,
    pub min_child_hessian: f64,
}

/// Feature matrix bucketed once per fit, column-major.
pub(crate) struct BinnedMatrix {
    pub mappers: Vec<BinMapper>,
    pub columns: Vec<Vec<u16>>,
}

impl BinnedMatrix {
    pub fn new(rows: &[Vec<f64>], n_features: usize, max_bins: usize) -> Self {
        let mut mappers = Vec::with_capacity(n_features);
        let mut columns = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            let mapper = BinMapper::fit(&values, max_bins);
            columns.push(values.iter().map(|&v| mapper.bin(v)).collect());
            mappers.push(mapper);
        }
        BinnedMatrix { mappers, columns }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    bin: u16,
}

#[derive(Debug, Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
    n: usize,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Best split of `rows`: features scanned in index order and bins in
/// ascending order, replacing only on strictly larger gain.
fn best_split(
    data: &BinnedMatrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    p: &GrowParams,
) -> Option<SplitCandidate> {
    let (g_total, h_total) = rows
        .iter()
        .fold((0.0, 0.0), |(g, h), &r| (g + grad[r], h + hess[r]));
    let parent = score(g_total, h_total, p.lambda);
    let mut best: Option<SplitCandidate> = None;
    for (f, mapper) in data.mappers.iter().enumerate() {
        let n_bins = mapper.n_bins();
        if n_bins < 2 {
            continue;
        }
        let mut hist = vec![Bucket::default(); n_bins];
        let col = &data.columns[f];
        for &r in rows {
            let b = &mut hist[usize::from(col[r])];
            b.g += grad[r];
            b.h += hess[r];
            b.n += 1;
        }
        let mut left = Bucket::default();
        for (bin, bucket) in hist.iter().enumerate().take(n_bins - 1) {
            left.g += bucket.g;
            left.h += bucket.h;
            left.n += bucket.n;
            let right_n = rows.len() - left.n;
            if left.n == 0 || right_n == 0 {
                continue;
            }
            let (gr, hr) = (g_total - left.g, h_total - left.h);
            if left.h < p.min_child_hessian || hr < p.min_child_hessian {
                continue;
            }
            let gain = score(left.g, left.h, p.lambda) + score(gr, hr, p.lambda) - parent;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    gain,
                    feature: f,
                    bin: bin as u16,
                });
            }
        }
    }
    best
}

fn leaf_value(rows: &[usize], grad: &[f64], hess: &[f64], lambda: f64) -> f64 {
    let (g, h) = rows
        .iter()
        .fold((0.0, 0.0), |(g, h), &r| (g + grad[r], h + hess[r]));
    -g / (h + lambda)
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    split: Option<SplitCandidate>,
}

/// Grow one tree leaf-wise: always split the open leaf with the largest
/// gain (earliest leaf on ties) until `max_leaves` or no leaf has a split
/// with gain at least `min_gain`. Returns `None` when the root itself
/// cannot be split.
pub(crate) fn grow_tree(
    data: &BinnedMatrix,
    rows: Vec<usize>,
    grad: &[f64],
    hess: &[f64],
    p: &GrowParams,
) -> Option<RegressionTree> {
    let usable = |s: Option<SplitCandidate>, depth: usize| {
        s.filter(|s| depth < p.max_depth && s.gain >= p.min_gain)
    };
    let root_split = usable(best_split(data, &rows, grad, hess, p), 0)?;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open = vec![OpenLeaf {
        node: 0,
        rows,
        depth: 0,
        split: Some(root_split),
    }];
    let mut n_leaves = 1;

    while n_leaves < p.max_leaves {
        let mut pick: Option<(usize, f64)> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(s) = leaf.split {
                if pick.is_none_or(|(_, g)| s.gain > g) {
                    pick = Some((i, s.gain));
                }
            }
        }
        let Some((i, _)) = pick else { break };
        let leaf = open.remove(i);
        let split = leaf.split.expect("picked leaf has a split");
        let col = &data.columns[split.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            leaf.rows.iter().partition(|&&r| col[r] <= split.bin);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: data.mappers[split.feature].bounds[usize::from(split.bin)],
            left,
            right: left + 1,
        };
        n_leaves += 1;
        let depth = leaf.depth + 1;
        // Children keep creation order so ties resolve left first.
        let children = [(left, left_rows), (left + 1, right_rows)].map(|(node, rows)| {
            let split = usable(best_split(data, &rows, grad, hess, p), depth);
            OpenLeaf {
                node,
                rows,
                depth,
                split,
            }
        });
        let insert_at = i.min(open.len());
        open.splice(insert_at..insert_at, children);
    }

    for leaf in &open {
        nodes[leaf.node] = Node::Leaf {
            value: leaf_value(&leaf.rows, grad, hess, p.lambda),
        };
    }
    Some(RegressionTree { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GrowParams {
        GrowParams {
            max_depth: 4,
            max_leaves: 15,
            lambda: 1.0,
            min_gain: 1e-7,
            min_child_hessian: 1e-3,
        }
    }

    #[test]
    fn single_split_on_separable_feature() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let t: Vec<f64> = (0..10).map(|i| if i >= 5 { 1.0 } else { 0.0 }).collect();
        let grad: Vec<f64> = t.iter().map(|t| 0.5 - t).collect();
        let hess = vec![0.25; 10];
        let data = BinnedMatrix::new(&rows, 1, 255);
        let tree = grow_tree(&data, (0..10).collect(), &grad, &hess, &params()).unwrap();
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert!((threshold - 0.45).abs() < 1e-12);
            }
            leaf => panic!("root should split, got {leaf:?}"),
        }
        assert!(tree.predict(&[0.9]) > 0.0);
        assert!(tree.predict(&[0.1]) < 0.0);
        assert!(tree.depth() <= 4);
    }

    #[test]
    fn constant_feature_gives_no_tree() {
        let rows = vec![vec![1.0]; 6];
        let grad = vec![0.5, -0.5, 0.5, -0.5, 0.5, -0.5];
        let hess = vec![0.25; 6];
        let data = BinnedMatrix::new(&rows, 1, 255);
        assert!(grow_tree(&data, (0..6).collect(), &grad, &hess, &params()).is_none());
    }

    #[test]
    fn equal_gain_prefers_lowest_feature() {
        // two identical features: the split must use feature 0
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let grad: Vec<f64> = (0..8).map(|i| if i < 4 { 0.5 } else { -0.5 }).collect();
        let hess = vec![0.25; 8];
        let data = BinnedMatrix::new(&rows, 2, 255);
        let tree = grow_tree(&data, (0..8).collect(), &grad, &hess, &params()).unwrap();
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn leaf_cap_and_depth_cap() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let grad: Vec<f64> = (0..64)
            .map(|i| if (i / 2) % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        let hess = vec![0.25; 64];
        let data = BinnedMatrix::new(&rows, 1, 255);
        let p = GrowParams {
            max_leaves: 5,
            ..params()
        };
        let tree = grow_tree(&data, (0..64).collect(), &grad, &hess, &p).unwrap();
        assert!(tree.n_leaves() <= 5);
        let p = GrowParams {
            max_depth: 2,
            max_leaves: 100,
            ..params()
        };
        let tree = grow_tree(&data, (0..64).collect(), &grad, &hess, &p).unwrap();
        assert!(tree.depth() <= 2);
    }
}
