//! Regression forest: bootstrap-sampled CART trees split on variance reduction.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{indexed, Rng};

pub const FOREST_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means ceil(d / 3).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            min_samples_leaf: 2,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn features_per_split(&self, d: usize) -> usize {
        self.max_features.unwrap_or_else(|| d.div_ceil(3)).clamp(1, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat node array; the root is node 0. Samples with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
    /// Impurity-decrease importances; sum to 1, or all zero for a constant target.
    pub importances: Vec<f64>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
    gain: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Number of samples going left once sorted by `feature`.
    n_left: usize,
    gain: f64,
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    (sum_sq - sum * sum / n as f64).max(0.0)
}

impl Builder<'_> {
    fn build(&mut self, samples: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let n = samples.len();
        let (sum, sum_sq) = samples.iter().fold((0.0, 0.0), |(s, q), &i| (s + self.y[i], q + self.y[i] * self.y[i]));
        let mean = sum / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });

        let constant = samples.iter().all(|&i| self.y[i] == self.y[samples[0]]);
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf || constant {
            return id;
        }
        let Some(best) = self.best_split(samples, sum, sum_sq, rng) else {
            return id;
        };
        samples.sort_by(|&a, &b| self.x[a][best.feature].total_cmp(&self.x[b][best.feature]));
        self.gain[best.feature] += best.gain;
        let (l, r) = samples.split_at_mut(best.n_left);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, samples: &[usize], sum: f64, sum_sq: f64, rng: &mut Rng) -> Option<BestSplit> {
        let n = samples.len();
        let d = self.x[0].len();
        let parent = sse(sum, sum_sq, n);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        let mut order = samples.to_vec();
        // draw features in random order; past `mtry`, keep drawing only while
        // no valid split has been found
        for (visited, feature) in index::sample(rng, d, d).into_iter().enumerate() {
            if visited >= self.mtry && best.is_some() {
                break;
            }
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 1..n {
                let prev = order[k - 1];
                ls += self.y[prev];
                lq += self.y[prev] * self.y[prev];
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (xa, xb) = (self.x[prev][feature], self.x[order[k]][feature]);
                if xa >= xb {
                    continue;
                }
                let children = sse(ls, lq, k) + sse(sum - ls, sum_sq - lq, n - k);
                let gain = parent - children;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = 0.5 * (xa + xb);
                    best = Some(BestSplit {
                        feature,
                        threshold: if mid < xb { mid } else { xa },
                        n_left: k,
                        gain,
                    });
                }
            }
        }
        best
    }
}

fn fit_tree(x: &[Vec<f64>], y: &[f64], params: &ForestParams, rng: &mut Rng) -> (RegressionTree, Vec<f64>) {
    let n = y.len();
    let d = x[0].len();
    let mut samples: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut b = Builder {
        x,
        y,
        params,
        mtry: params.features_per_split(d),
        nodes: Vec::new(),
        gain: vec![0.0; d],
    };
    b.build(&mut samples, 0, rng);
    (RegressionTree { nodes: b.nodes }, b.gain)
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|g| *g /= total);
    } else {
        v.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Fits a forest. Rows are put into a canonical order before any sampling, so
/// the result does not depend on the order rows were supplied in. Trees are
/// grown in parallel, each from its own seeded substream.
pub fn rf_fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<RandomForest> {
    if x.len() != y.len() {
        return Err(Error::Schema(format!("{} feature rows for {} targets", x.len(), y.len())));
    }
    if y.is_empty() || y.len() < 2 * params.min_samples_leaf.max(1) {
        return Err(Error::InsufficientData(format!(
            "{} rows, need at least {}",
            y.len(),
            2 * params.min_samples_leaf.max(1)
        )));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Schema("feature rows must share a non-zero width".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Schema("features and targets must be finite".into()));
    }

    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].total_cmp(&y[b]))
    });
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let fitted: Vec<(RegressionTree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = indexed(params.seed, "forest", t as u64);
            fit_tree(&xs, &ys, params, &mut rng)
        })
        .collect();

    let mut importances = vec![0.0; d];
    let mut trees = Vec::with_capacity(fitted.len());
    for (tree, mut gain) in fitted {
        normalize(&mut gain);
        importances.iter_mut().zip(&gain).for_each(|(a, g)| *a += g);
        trees.push(tree);
    }
    normalize(&mut importances);
    Ok(RandomForest {
        params: params.clone(),
        n_features: d,
        trees,
        importances,
    })
}

impl RandomForest {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Schema(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn to_checkpoint(&self) -> ForestCheckpoint {
        ForestCheckpoint {
            version: FOREST_CHECKPOINT_VERSION,
            forest: self.clone(),
        }
    }
}

pub fn rf_predict(model: &RandomForest, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Versioned on-disk form of a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestCheckpoint {
    pub version: u32,
    pub forest: RandomForest,
}

impl ForestCheckpoint {
    pub fn from_json(text: &str) -> Result<RandomForest> {
        let ck: ForestCheckpoint = serde_json::from_str(text)?;
        if ck.version != FOREST_CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported forest checkpoint version {}", ck.version)));
        }
        Ok(ck.forest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * 7 % 11) as f64]).collect();
        let y = vec![4.57; 30];
        let f = rf_fit(&x, &y, &ForestParams { n_trees: 10, ..Default::default() }).unwrap();
        assert_eq!(f.importances, vec![0.0, 0.0]);
        for row in &x {
            assert!((f.predict(row).unwrap() - 4.57).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_one_step_function_uses_side_means() {
        // hand-built: x = 1,2 → y = 0,1 ; x = 3,4 → y = 10,11
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let y = vec![0.0, 1.0, 10.0, 11.0];
        let p = ForestParams {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            max_features: Some(1),
            bootstrap: false,
            seed: 0,
        };
        let f = rf_fit(&x, &y, &p).unwrap();
        assert_eq!(f.trees[0].depth(), 1);
        assert_eq!(f.predict(&[1.5]).unwrap(), 0.5);
        assert_eq!(f.predict(&[3.5]).unwrap(), 10.5);
        assert_eq!(f.trees[0].nodes[0], Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2 });
        assert_eq!(f.importances, vec![1.0]);
    }

    #[test]
    fn single_tree_forest_is_that_tree() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.3).sin()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0).collect();
        let f = rf_fit(&x, &y, &ForestParams { n_trees: 1, ..Default::default() }).unwrap();
        for r in &x {
            assert_eq!(f.predict(r).unwrap(), f.trees[0].predict(r));
        }
        let mut doubled = f.clone();
        doubled.trees.push(f.trees[0].clone());
        for r in &x {
            assert_eq!(doubled.predict(r).unwrap(), f.predict(r).unwrap());
        }
    }

    #[test]
    fn relevant_feature_dominates_importance() {
        let mut rng = crate::rng::substream(5, "rf-test");
        let x: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.random_range(0.0..10.0), rng.random::<f64>()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let f = rf_fit(&x, &y, &ForestParams { n_trees: 50, seed: 3, ..Default::default() }).unwrap();
        assert!(f.importances[0] > 0.9, "{:?}", f.importances);
        assert!((f.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_linear_target_is_recovered_on_training_points() {
        let x: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 10.0, ((i * 13) % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let f = rf_fit(&x, &y, &ForestParams { n_trees: 10, seed: 1, ..Default::default() }).unwrap();
        // y spans [1, 60.7]; allow 5% of the range
        for (r, t) in x.iter().zip(&y) {
            let p = f.predict(r).unwrap();
            assert!((p - t).abs() <= 3.0, "{p} vs {t}");
        }
    }

    #[test]
    fn row_permutation_invariance() {
        let mut rng = crate::rng::substream(8, "rf-perm");
        let x: Vec<Vec<f64>> = (0..120).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[2]).collect();
        let p = ForestParams { n_trees: 8, seed: 42, ..Default::default() };
        let a = rf_fit(&x, &y, &p).unwrap();
        let mut perm: Vec<usize> = (0..120).collect();
        perm.reverse();
        perm.swap(3, 77);
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let b = rf_fit(&xp, &yp, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_fit_is_reproducible() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i % 9) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sqrt() + r[1]).collect();
        let p = ForestParams { n_trees: 16, seed: 9, ..Default::default() };
        let a = serde_json::to_string(&rf_fit(&x, &y, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&rf_fit(&x, &y, &p).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let p = ForestParams::default();
        assert!(matches!(rf_fit(&[], &[], &p), Err(Error::InsufficientData(_))));
        assert!(matches!(rf_fit(&[vec![1.0]], &[1.0, 2.0], &p), Err(Error::Schema(_))));
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let f = rf_fit(&x, &vec![1.0; 10], &ForestParams { n_trees: 2, ..p }).unwrap();
        assert!(matches!(f.predict(&[1.0, 2.0]), Err(Error::Schema(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i * i) as f64).collect();
        let f = rf_fit(&x, &y, &ForestParams { n_trees: 3, ..Default::default() }).unwrap();
        let text = serde_json::to_string(&f.to_checkpoint()).unwrap();
        assert_eq!(ForestCheckpoint::from_json(&text).unwrap(), f);
        let bad = text.replacen("\"version\":1", "\"version\":9", 1);
        assert!(ForestCheckpoint::from_json(&bad).is_err());
    }
}
