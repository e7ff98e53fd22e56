use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        positive_fraction: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Rows with `x[feature] <= threshold`.
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// CART with Gini impurity. Thresholds are midpoints between consecutive
/// distinct values; ties go to the lowest feature, then the lowest threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub root: Node,
    pub width: usize,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Best {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

fn best_split(x: &Matrix, y: &[bool], rows: &[usize]) -> Option<Best> {
    let n = rows.len();
    let total_pos = rows.iter().filter(|&&i| y[i]).count();
    let parent = gini(total_pos, n);
    let mut best: Option<Best> = None;
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
    for feature in 0..x.cols() {
        sorted.clear();
        sorted.extend(rows.iter().map(|&i| (x[(i, feature)], y[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for k in 0..n - 1 {
            if sorted[k].1 {
                left_pos += 1;
            }
            if sorted[k].0 == sorted[k + 1].0 {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / n as f64;
            if impurity < best.as_ref().map_or(parent, |b| b.impurity) - 1e-12 {
                best = Some(Best {
                    impurity,
                    feature,
                    threshold: 0.5 * (sorted[k].0 + sorted[k + 1].0),
                });
            }
        }
    }
    best
}

fn grow(x: &Matrix, y: &[bool], rows: Vec<usize>, depth: usize, max_depth: usize, min_split: usize) -> Node {
    let pos = rows.iter().filter(|&&i| y[i]).count();
    let leaf = Node::Leaf {
        positive_fraction: pos as f64 / rows.len() as f64,
        samples: rows.len(),
    };
    if depth >= max_depth || rows.len() < min_split || pos == 0 || pos == rows.len() {
        return leaf;
    }
    match best_split(x, y, &rows) {
        None => leaf,
        Some(b) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[(i, b.feature)] <= b.threshold);
            Node::Split {
                feature: b.feature,
                threshold: b.threshold,
                left: Box::new(grow(x, y, l, depth + 1, max_depth, min_split)),
                right: Box::new(grow(x, y, r, depth + 1, max_depth, min_split)),
            }
        }
    }
}

impl DecisionTree {
    pub(super) fn fit(x: &Matrix, y: &[bool], max_depth: usize, min_split: usize) -> Self {
        DecisionTree {
            root: grow(x, y, (0..x.rows()).collect(), 0, max_depth, min_split),
            width: x.cols(),
        }
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { positive_fraction, .. } => return *positive_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }
}
