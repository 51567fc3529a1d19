//! Black-box predictor abstraction: built-in linear and tree-ensemble models
//! loaded from a portable JSON schema, plus an external-process bridge.

mod external;

pub use external::{ExternalConfig, ExternalPredictor};

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output semantics of a predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Regression,
    Probability,
}

/// Link applied to the raw aggregated score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
    Logistic,
}

impl Link {
    fn apply(self, z: f64) -> f64 {
        match self {
            Link::Identity => z,
            Link::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

/// Deterministic scalar-output prediction over batches of feature vectors.
///
/// Implementations must be safe to call concurrently and must return one
/// output per input row, in order.
pub trait Predictor: Send + Sync {
    fn feature_count(&self) -> usize;

    /// Expected feature names in order, when the model declares them.
    fn feature_names(&self) -> Option<&[String]> {
        None
    }

    fn output_kind(&self) -> OutputKind {
        OutputKind::Regression
    }

    fn predict(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>>;
}

fn check_batch(expected: usize, batch: &[Vec<f64>]) -> Result<()> {
    for row in batch {
        if row.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: row.len(),
            });
        }
    }
    Ok(())
}

/// Linear model: dot(weights, x) + intercept, optionally through a logistic link.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub link: Link,
    feature_names: Option<Vec<String>>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64, link: Link) -> Self {
        Self {
            weights,
            intercept,
            link,
            feature_names: None,
        }
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.weights.len() {
            return Err(Error::ModelSchema {
                detail: format!(
                    "{} feature names for {} weights",
                    names.len(),
                    self.weights.len()
                ),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }
}

impl Predictor for LinearModel {
    fn feature_count(&self) -> usize {
        self.weights.len()
    }

    fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    fn output_kind(&self) -> OutputKind {
        match self.link {
            Link::Identity => OutputKind::Regression,
            Link::Logistic => OutputKind::Probability,
        }
    }

    fn predict(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_batch(self.weights.len(), batch)?;
        Ok(batch
            .iter()
            .map(|row| {
                let z = self.intercept
                    + row
                        .iter()
                        .zip(&self.weights)
                        .map(|(x, w)| w * x)
                        .sum::<f64>();
                self.link.apply(z)
            })
            .collect())
    }
}

/// One node of a decision tree in array form. `feature == -1` marks a leaf.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: i64,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default = "minus_one")]
    pub left: i64,
    #[serde(default = "minus_one")]
    pub right: i64,
    #[serde(default)]
    pub value: f64,
}

fn minus_one() -> i64 {
    -1
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        Self {
            feature: -1,
            threshold: 0.0,
            left: -1,
            right: -1,
            value,
        }
    }

    pub fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Self {
        Self {
            feature: feature as i64,
            threshold,
            left: left as i64,
            right: right as i64,
            value: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Check bounds, topological ordering (children after parents) and leaf shape.
    fn validate(&self, tree_idx: usize, n_features: Option<usize>) -> Result<usize> {
        if self.nodes.is_empty() {
            return Err(Error::TreeStructure {
                detail: format!("tree {tree_idx} has no nodes"),
            });
        }
        let mut max_feature = 0usize;
        for (i, node) in self.nodes.iter().enumerate() {
            if node.feature < 0 {
                if node.left != -1 || node.right != -1 {
                    return Err(Error::TreeStructure {
                        detail: format!("tree {tree_idx} node {i}: leaf has children"),
                    });
                }
                continue;
            }
            let f = node.feature as usize;
            if let Some(n) = n_features {
                if f >= n {
                    return Err(Error::TreeStructure {
                        detail: format!(
                            "tree {tree_idx} node {i}: feature {f} out of range (n={n})"
                        ),
                    });
                }
            }
            max_feature = max_feature.max(f);
            for (side, child) in [("left", node.left), ("right", node.right)] {
                if child < 0 || child as usize >= self.nodes.len() {
                    return Err(Error::TreeStructure {
                        detail: format!(
                            "tree {tree_idx} node {i}: {side} child {child} out of bounds"
                        ),
                    });
                }
                if child as usize <= i {
                    return Err(Error::TreeStructure {
                        detail: format!(
                            "tree {tree_idx} node {i}: {side} child {child} does not follow its parent"
                        ),
                    });
                }
            }
        }
        Ok(max_feature + 1)
    }

    fn eval(&self, row: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.feature < 0 {
                return node.value;
            }
            idx = if row[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

/// Sum-aggregated tree ensemble with an optional logistic link. Splits route
/// left when `x[feature] <= threshold`.
#[derive(Debug, Clone)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub link: Link,
    n_features: usize,
    feature_names: Option<Vec<String>>,
}

impl TreeEnsemble {
    pub fn new(trees: Vec<Tree>, base_score: f64, link: Link, n_features: usize) -> Result<Self> {
        let mut needed = 0usize;
        for (i, tree) in trees.iter().enumerate() {
            needed = needed.max(tree.validate(i, Some(n_features))?);
        }
        if needed > n_features {
            return Err(Error::ModelSchema {
                detail: format!("trees reference {needed} features, declared {n_features}"),
            });
        }
        Ok(Self {
            trees,
            base_score,
            link,
            n_features,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::ModelSchema {
                detail: format!(
                    "{} feature names for {} features",
                    names.len(),
                    self.n_features
                ),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }
}

impl Predictor for TreeEnsemble {
    fn feature_count(&self) -> usize {
        self.n_features
    }

    fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    fn output_kind(&self) -> OutputKind {
        match self.link {
            Link::Identity => OutputKind::Regression,
            Link::Logistic => OutputKind::Probability,
        }
    }

    fn predict(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_batch(self.n_features, batch)?;
        Ok(batch
            .iter()
            .map(|row| {
                let z = self.base_score + self.trees.iter().map(|t| t.eval(row)).sum::<f64>();
                self.link.apply(z)
            })
            .collect())
    }
}

fn default_schema_version() -> u32 {
    1
}

/// On-disk model document, `"schema_version": 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear {
        #[serde(default = "default_schema_version")]
        schema_version: u32,
        weights: Vec<f64>,
        #[serde(default)]
        intercept: f64,
        #[serde(default)]
        link: Link,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature_names: Option<Vec<String>>,
    },
    TreeEnsemble {
        #[serde(default = "default_schema_version")]
        schema_version: u32,
        #[serde(default)]
        base_score: f64,
        #[serde(default)]
        link: Link,
        trees: Vec<Tree>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_features: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature_names: Option<Vec<String>>,
    },
}

impl ModelSpec {
    pub fn into_predictor(self) -> Result<Arc<dyn Predictor>> {
        match self {
            ModelSpec::Linear {
                schema_version,
                weights,
                intercept,
                link,
                feature_names,
            } => {
                check_version(schema_version)?;
                if weights.is_empty() {
                    return Err(Error::ModelSchema {
                        detail: "linear model needs at least one weight".into(),
                    });
                }
                let mut m = LinearModel::new(weights, intercept, link);
                if let Some(names) = feature_names {
                    m = m.with_feature_names(names)?;
                }
                Ok(Arc::new(m))
            }
            ModelSpec::TreeEnsemble {
                schema_version,
                base_score,
                link,
                trees,
                n_features,
                feature_names,
            } => {
                check_version(schema_version)?;
                let n = match (&feature_names, n_features) {
                    (Some(names), _) => names.len(),
                    (None, Some(n)) => n,
                    (None, None) => {
                        // Infer from the largest referenced feature index.
                        let mut needed = 0usize;
                        for (i, t) in trees.iter().enumerate() {
                            needed = needed.max(t.validate(i, None)?);
                        }
                        needed.max(1)
                    }
                };
                let mut m = TreeEnsemble::new(trees, base_score, link, n)?;
                if let Some(names) = feature_names {
                    m = m.with_feature_names(names)?;
                }
                Ok(Arc::new(m))
            }
        }
    }

    /// Replace a logistic link with identity so attributions explain the raw score.
    pub fn strip_link(mut self) -> Self {
        match &mut self {
            ModelSpec::Linear { link, .. } | ModelSpec::TreeEnsemble { link, .. } => {
                *link = Link::Identity;
            }
        }
        self
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != 1 {
        return Err(Error::ModelSchema {
            detail: format!("unsupported schema_version {v}"),
        });
    }
    Ok(())
}

/// Load a predictor from its JSON document.
pub fn load_model(path: impl AsRef<Path>) -> Result<Arc<dyn Predictor>> {
    load_model_spec(path)?.into_predictor()
}

/// Parse the model document without building the predictor.
pub fn load_model_spec(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_spec(&text)
}

pub fn parse_model_spec(text: &str) -> Result<ModelSpec> {
    // Surface unknown "type" values as an unsupported-model error rather than
    // a generic parse failure.
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::ModelSchema {
        detail: e.to_string(),
    })?;
    if let Some(kind) = value.get("type").and_then(|t| t.as_str()) {
        if kind != "linear" && kind != "tree_ensemble" {
            return Err(Error::UnsupportedModel { kind: kind.into() });
        }
    }
    serde_json::from_value(value).map_err(|e| Error::ModelSchema {
        detail: e.to_string(),
    })
}
