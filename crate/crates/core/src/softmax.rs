//! Softmax and multimodal-softmax observation likelihoods.
//!
//! Each class `c` has a linear logit `w_cᵀs + b_c`. Observation labels group
//! one or more classes; a label's probability is the sum of its classes'
//! softmax probabilities. Grouping several classes under one label gives
//! non-convex label regions such as "not detected to the left or right".

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClass {
    pub w: Vec<f64>,
    pub b: f64,
}

impl SoftmaxClass {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        Self { w, b }
    }

    pub fn logit(&self, state: &[f64]) -> f64 {
        self.w.iter().zip(state).map(|(w, s)| w * s).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SoftmaxRecord", into = "SoftmaxRecord")]
pub struct SoftmaxModel {
    dimension: usize,
    classes: Vec<SoftmaxClass>,
    labels: BTreeMap<String, Vec<usize>>,
}

/// Class layouts that [`build_relative_model`] can synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeLayout {
    /// Near / East / West / North / South over a 2-D relative position.
    Proximity5,
    /// Detect plus two "No Detect" classes over a 1-D relative position.
    DetectNoDetect3,
}

pub const DETECT: &str = "Detect";
pub const NO_DETECT: &str = "No Detect";

/// Sharpness of the synthesized half-plane classes at unit scale.
const HALF_PLANE_GAIN: f64 = 3.0;

impl SoftmaxModel {
    /// Validates that every class has `dimension` weights and that labels
    /// partition the class indices.
    pub fn new(
        dimension: usize,
        classes: Vec<SoftmaxClass>,
        labels: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        if dimension == 0 || classes.is_empty() {
            return Err(Error::InvalidModel("softmax needs a dimension and at least one class".into()));
        }
        for c in &classes {
            check_dim(dimension, c.w.len())?;
            if !c.b.is_finite() || c.w.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel("non-finite softmax parameter".into()));
            }
        }
        let mut seen = vec![false; classes.len()];
        for (name, idx) in &labels {
            if idx.is_empty() {
                return Err(Error::InvalidModel(format!("label `{name}` has no classes")));
            }
            for &i in idx {
                if i >= classes.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidModel(format!(
                        "label `{name}`: class {i} is out of range or already assigned"
                    )));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidModel("every class must belong to a label".into()));
        }
        Ok(Self { dimension, classes, labels })
    }

    /// One label per class, named by `names`.
    pub fn with_class_names(dimension: usize, classes: Vec<SoftmaxClass>, names: &[&str]) -> Result<Self> {
        if names.len() != classes.len() {
            return Err(Error::InvalidModel("one name per class required".into()));
        }
        let labels = names.iter().enumerate().map(|(i, n)| (n.to_string(), vec![i])).collect();
        Self::new(dimension, classes, labels)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn classes(&self) -> &[SoftmaxClass] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.labels
    }

    /// Label names in their canonical (sorted) order.
    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn label_classes(&self, label: &str) -> Result<&[usize]> {
        self.labels
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Same classes grouped under different labels.
    pub fn with_labels(&self, labels: BTreeMap<String, Vec<usize>>) -> Result<Self> {
        Self::new(self.dimension, self.classes.clone(), labels)
    }

    /// Softmax probability of every class, computed with max subtraction.
    pub fn class_probs(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension, state.len())?;
        let logits: Vec<f64> = self.classes.iter().map(|c| c.logit(state)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    /// `Σ_{c∈label} exp(w_cᵀs+b_c) / Σ_{c'} exp(w_{c'}ᵀs+b_{c'})`.
    pub fn label_prob(&self, state: &[f64], label: &str) -> Result<f64> {
        let classes = self.label_classes(label)?;
        let probs = self.class_probs(state)?;
        Ok(classes.iter().map(|&c| probs[c]).sum())
    }

    /// `(label, probability)` for all labels in canonical order.
    pub fn label_probs(&self, state: &[f64]) -> Result<Vec<(&str, f64)>> {
        let probs = self.class_probs(state)?;
        Ok(self
            .labels
            .iter()
            .map(|(name, idx)| (name.as_str(), idx.iter().map(|&c| probs[c]).sum()))
            .collect())
    }

    /// Embeds the model in `new_dim` dimensions: old axis `i` becomes new
    /// axis `axis_map[i]`, unmapped axes get zero weight.
    pub fn pad_dimensions(&self, new_dim: usize, axis_map: &[usize]) -> Result<Self> {
        if new_dim < self.dimension {
            return Err(Error::InvalidArgument(format!(
                "cannot pad a {}-D model down to {new_dim} dimensions",
                self.dimension
            )));
        }
        check_dim(self.dimension, axis_map.len())?;
        let mut used = vec![false; new_dim];
        for &a in axis_map {
            if a >= new_dim || std::mem::replace(&mut used[a], true) {
                return Err(Error::InvalidArgument("axis map must be injective and in range".into()));
            }
        }
        let classes = self
            .classes
            .iter()
            .map(|c| {
                let mut w = vec![0.0; new_dim];
                for (old, &new) in axis_map.iter().enumerate() {
                    w[new] = c.w[old];
                }
                SoftmaxClass { w, b: c.b }
            })
            .collect();
        Self::new(new_dim, classes, self.labels.clone())
    }

    /// Model over `x` whose logits equal this model's logits at `A x + d`,
    /// i.e. `w' = Aᵀw`, `b' = b + wᵀd`. `a` is `dimension × new_dim`,
    /// row-major.
    pub fn compose_affine(&self, new_dim: usize, a: &[f64], offset: &[f64]) -> Result<Self> {
        check_dim(self.dimension * new_dim, a.len())?;
        check_dim(self.dimension, offset.len())?;
        let classes = self
            .classes
            .iter()
            .map(|c| {
                let w = (0..new_dim)
                    .map(|j| (0..self.dimension).map(|i| c.w[i] * a[i * new_dim + j]).sum())
                    .collect();
                let b = c.b + c.w.iter().zip(offset).map(|(w, d)| w * d).sum::<f64>();
                SoftmaxClass { w, b }
            })
            .collect();
        Self::new(new_dim, classes, self.labels.clone())
    }
}

/// Synthesizes a softmax model over a relative position from its class
/// topology. Cardinal classes get weights `(gain/scale)·n̂` with zero bias;
/// the central class has zero weight and a bias that puts its 50% contour at
/// distance `scale` along each axis.
pub fn build_relative_model(layout: RelativeLayout, scale: f64) -> Result<SoftmaxModel> {
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    let k = HALF_PLANE_GAIN / scale;
    // Each cardinal class contributes exp(±gain) or exp(0) at (scale, 0).
    let g = HALF_PLANE_GAIN;
    match layout {
        RelativeLayout::Proximity5 => {
            let near_bias = (g.exp() + (-g).exp() + 2.0).ln();
            let classes = vec![
                SoftmaxClass::new(vec![0.0, 0.0], near_bias),
                SoftmaxClass::new(vec![k, 0.0], 0.0),
                SoftmaxClass::new(vec![-k, 0.0], 0.0),
                SoftmaxClass::new(vec![0.0, k], 0.0),
                SoftmaxClass::new(vec![0.0, -k], 0.0),
            ];
            SoftmaxModel::with_class_names(2, classes, &["Near", "East", "West", "North", "South"])
        }
        RelativeLayout::DetectNoDetect3 => {
            let detect_bias = (g.exp() + (-g).exp()).ln();
            let classes = vec![
                SoftmaxClass::new(vec![0.0], detect_bias),
                SoftmaxClass::new(vec![-k], 0.0),
                SoftmaxClass::new(vec![k], 0.0),
            ];
            let labels = BTreeMap::from([(DETECT.to_string(), vec![0]), (NO_DETECT.to_string(), vec![1, 2])]);
            SoftmaxModel::new(1, classes, labels)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SoftmaxRecord {
    dimension: usize,
    classes: Vec<SoftmaxClass>,
    labels: BTreeMap<String, Vec<usize>>,
}

impl TryFrom<SoftmaxRecord> for SoftmaxModel {
    type Error = Error;

    fn try_from(r: SoftmaxRecord) -> Result<Self> {
        SoftmaxModel::new(r.dimension, r.classes, r.labels)
    }
}

impl From<SoftmaxModel> for SoftmaxRecord {
    fn from(m: SoftmaxModel) -> Self {
        SoftmaxRecord { dimension: m.dimension, classes: m.classes, labels: m.labels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax_label(m: &SoftmaxModel, s: &[f64]) -> String {
        m.label_probs(s)
            .unwrap()
            .into_iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0
            .to_string()
    }

    #[test]
    fn uniform_model_is_uniform() {
        let classes = vec![SoftmaxClass::new(vec![0.0, 0.0], 0.0); 3];
        let m = SoftmaxModel::with_class_names(2, classes, &["a", "b", "c"]).unwrap();
        for l in ["a", "b", "c"] {
            assert!((m.label_prob(&[3.0, -7.0], l).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_binary_model_at_origin() {
        let classes = vec![SoftmaxClass::new(vec![1.0], 0.0), SoftmaxClass::new(vec![-1.0], 0.0)];
        let m = SoftmaxModel::with_class_names(1, classes, &["up", "down"]).unwrap();
        assert_eq!(m.label_prob(&[0.0], "up").unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        let m = build_relative_model(RelativeLayout::Proximity5, 1.0).unwrap();
        assert_eq!(m.label_prob(&[0.0, 0.0], "Up"), Err(Error::UnknownLabel("Up".into())));
        assert!(matches!(m.label_prob(&[0.0], "Near"), Err(Error::DimensionMismatch { .. })));
        assert!(m.pad_dimensions(1, &[0, 1]).is_err());
        assert!(m.pad_dimensions(4, &[1, 1]).is_err());
        let classes = vec![SoftmaxClass::new(vec![0.0], 0.0); 2];
        let overlapping = BTreeMap::from([("a".to_string(), vec![0, 1]), ("b".to_string(), vec![1])]);
        assert!(SoftmaxModel::new(1, classes.clone(), overlapping).is_err());
        let missing = BTreeMap::from([("a".to_string(), vec![0])]);
        assert!(SoftmaxModel::new(1, classes, missing).is_err());
    }

    #[test]
    fn proximity_layout() {
        for scale in [0.5, 1.0, 3.0] {
            let m = build_relative_model(RelativeLayout::Proximity5, scale).unwrap();
            assert_eq!(argmax_label(&m, &[0.0, 0.0]), "Near");
            assert_eq!(argmax_label(&m, &[10.0 * scale, 0.0]), "East");
            assert_eq!(argmax_label(&m, &[-10.0 * scale, 0.0]), "West");
            assert_eq!(argmax_label(&m, &[0.0, 10.0 * scale]), "North");
            assert_eq!(argmax_label(&m, &[0.0, -10.0 * scale]), "South");
            assert!((m.label_prob(&[scale, 0.0], "Near").unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn detect_layout() {
        let m = build_relative_model(RelativeLayout::DetectNoDetect3, 0.5).unwrap();
        assert_eq!(m.label_names().collect::<Vec<_>>(), vec![DETECT, NO_DETECT]);
        assert_eq!(m.label_classes(NO_DETECT).unwrap().len(), 2);
        assert!((m.label_prob(&[0.5], DETECT).unwrap() - 0.5).abs() < 1e-12);
        assert!((m.label_prob(&[-0.5], DETECT).unwrap() - 0.5).abs() < 1e-12);
        assert!(m.label_prob(&[0.0], DETECT).unwrap() > 0.9);
        assert!(m.label_prob(&[2.0], NO_DETECT).unwrap() > 0.99);
    }

    #[test]
    fn padding_to_same_dimension_is_identity() {
        let m = build_relative_model(RelativeLayout::Proximity5, 1.0).unwrap();
        assert_eq!(m.pad_dimensions(2, &[0, 1]).unwrap(), m);
    }

    #[test]
    fn affine_composition_matches_direct_evaluation() {
        let m = build_relative_model(RelativeLayout::DetectNoDetect3, 0.5).unwrap();
        // relative position rob − cop from state [cop, rob]
        let c = m.compose_affine(2, &[-1.0, 1.0], &[0.0]).unwrap();
        for (cop, rob) in [(1.0, 1.2), (0.3, 4.0), (4.0, 0.2)] {
            let direct = m.label_prob(&[rob - cop], NO_DETECT).unwrap();
            assert!((c.label_prob(&[cop, rob], NO_DETECT).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn json_schema() {
        let m = build_relative_model(RelativeLayout::DetectNoDetect3, 1.0).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with("{\"dimension\":1,\"classes\":[{\"w\":[0.0],\"b\":"));
        assert!(text.contains("\"labels\":{\"Detect\":[0],\"No Detect\":[1,2]}"));
        assert_eq!(serde_json::from_str::<SoftmaxModel>(&text).unwrap(), m);
    }
}
