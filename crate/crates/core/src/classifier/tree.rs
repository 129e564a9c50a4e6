use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    /// Numeric: go left when `value <= threshold`.
    LessEq(f64),
    /// Categorical: go left when `value == code`.
    Equals(f64),
}

impl SplitTest {
    #[inline]
    fn goes_left(self, value: f64) -> bool {
        match self {
            SplitTest::LessEq(t) => value <= t,
            SplitTest::Equals(c) => value == c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        test: SplitTest,
        left: usize,
        right: usize,
    },
}

/// Least-squares regression tree. Leaf outputs come from a caller-supplied
/// function so the booster can install Newton-step values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    test: SplitTest,
    gain: f64,
}

const MIN_GAIN: f64 = 1e-12;

impl RegressionTree {
    pub fn fit<F>(
        rows: &[Vec<f64>],
        kinds: &[FeatureKind],
        targets: &[f64],
        sample: &[usize],
        max_depth: usize,
        leaf_value: &F,
    ) -> Self
    where
        F: Fn(&[usize]) -> f64,
    {
        let mut tree = RegressionTree { nodes: Vec::new() };
        tree.grow(rows, kinds, targets, sample.to_vec(), max_depth, leaf_value);
        tree
    }

    fn grow<F>(
        &mut self,
        rows: &[Vec<f64>],
        kinds: &[FeatureKind],
        targets: &[f64],
        sample: Vec<usize>,
        depth_left: usize,
        leaf_value: &F,
    ) -> usize
    where
        F: Fn(&[usize]) -> f64,
    {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let split = if depth_left == 0 || sample.len() < 2 {
            None
        } else {
            best_split(rows, kinds, targets, &sample)
        };
        match split {
            None => {
                self.nodes[slot] = Node::Leaf {
                    value: leaf_value(&sample),
                };
            }
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = sample
                    .into_iter()
                    .partition(|&i| s.test.goes_left(rows[i][s.feature]));
                let left = self.grow(rows, kinds, targets, l, depth_left - 1, leaf_value);
                let right = self.grow(rows, kinds, targets, r, depth_left - 1, leaf_value);
                self.nodes[slot] = Node::Split {
                    feature: s.feature,
                    test: s.test,
                    left,
                    right,
                };
            }
        }
        slot
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    test,
                    left,
                    right,
                } => {
                    at = if test.goes_left(row[*feature]) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Best split by squared-error reduction; first feature / first threshold
/// wins ties.
fn best_split(
    rows: &[Vec<f64>],
    kinds: &[FeatureKind],
    targets: &[f64],
    sample: &[usize],
) -> Option<Split> {
    let n = sample.len() as f64;
    let total: f64 = sample.iter().map(|&i| targets[i]).sum();
    let parent = total * total / n;
    let mut best: Option<Split> = None;
    let mut consider = |feature: usize, test: SplitTest, sl: f64, nl: f64| {
        let nr = n - nl;
        if nl < 1.0 || nr < 1.0 {
            return;
        }
        let sr = total - sl;
        let gain = sl * sl / nl + sr * sr / nr - parent;
        if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Split {
                feature,
                test,
                gain,
            });
        }
    };

    for (feature, kind) in kinds.iter().enumerate() {
        match kind {
            FeatureKind::Numeric => {
                let mut order: Vec<usize> = sample.to_vec();
                order.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]));
                let mut sl = 0.0;
                for w in 0..order.len() - 1 {
                    sl += targets[order[w]];
                    let lo = rows[order[w]][feature];
                    let hi = rows[order[w + 1]][feature];
                    if lo < hi {
                        let mut threshold = lo + (hi - lo) / 2.0;
                        if threshold >= hi {
                            threshold = lo;
                        }
                        consider(feature, SplitTest::LessEq(threshold), sl, (w + 1) as f64);
                    }
                }
            }
            FeatureKind::Categorical => {
                let mut groups: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
                for &i in sample {
                    let e = groups.entry(rows[i][feature].to_bits()).or_default();
                    e.0 += targets[i];
                    e.1 += 1.0;
                }
                if groups.len() < 2 {
                    continue;
                }
                let mut codes: Vec<(f64, f64, f64)> = groups
                    .into_iter()
                    .map(|(bits, (s, c))| (f64::from_bits(bits), s, c))
                    .collect();
                codes.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (code, s, c) in codes {
                    consider(feature, SplitTest::Equals(code), s, c);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_of(targets: &[f64]) -> impl Fn(&[usize]) -> f64 + '_ {
        move |s: &[usize]| s.iter().map(|&i| targets[i]).sum::<f64>() / s.len() as f64
    }

    #[test]
    fn step_function_is_recovered() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..10).map(|i| if i < 4 { -1.0 } else { 2.0 }).collect();
        let sample: Vec<usize> = (0..10).collect();
        let tree = RegressionTree::fit(
            &rows,
            &[FeatureKind::Numeric],
            &targets,
            &sample,
            3,
            &mean_of(&targets),
        );
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.predict(&[3.0]), -1.0);
        assert_eq!(tree.predict(&[3.6]), 2.0);
    }

    #[test]
    fn categorical_equality_split() {
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 1.0, 0.0, 2.0]
            .iter()
            .map(|&c| vec![c])
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] == 1.0 { 5.0 } else { 0.0 })
            .collect();
        let sample: Vec<usize> = (0..6).collect();
        let tree = RegressionTree::fit(
            &rows,
            &[FeatureKind::Categorical],
            &targets,
            &sample,
            1,
            &mean_of(&targets),
        );
        assert_eq!(tree.predict(&[1.0]), 5.0);
        assert_eq!(tree.predict(&[2.0]), 0.0);
    }

    #[test]
    fn depth_zero_is_a_single_leaf() {
        let rows = vec![vec![0.0], vec![1.0]];
        let targets = vec![1.0, 3.0];
        let tree = RegressionTree::fit(
            &rows,
            &[FeatureKind::Numeric],
            &targets,
            &[0, 1],
            0,
            &mean_of(&targets),
        );
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.predict(&[7.0]), 2.0);
    }
}
