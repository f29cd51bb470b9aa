//! Gaussian-sum Bayes filter for [`CpomdpModel`] beliefs.

use serde::{Deserialize, Serialize};

use crate::condense::{cluster_condense, CondenseConfig};
use crate::error::{check_dim, Error, Result};
use crate::gm::{gaussian_product, normalize, GaussianComponent, GaussianMixture, MixtureKind};
use crate::pbvi::{CpomdpModel, ObservationModel};
use crate::vb::{vb_mixture_product, VbOptions};

/// Posterior mass below this is treated as a contradictory observation.
pub const MIN_POSTERIOR_MASS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub condense: CondenseConfig,
    pub vb: VbOptions,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { condense: CondenseConfig::with_target(20), vb: VbOptions::default() }
    }
}

/// Time update: `μ ← Fμ + Δ(a)`, `Σ ← FΣFᵀ + Σᵃ`, weights untouched.
pub fn predict(belief: &GaussianMixture, model: &CpomdpModel, action: usize) -> Result<GaussianMixture> {
    check_dim(model.dimension(), belief.dimension())?;
    let act = model.actions().get(action).ok_or_else(|| Error::UnknownAction(action.to_string()))?;
    let f = model.transition();
    let components = belief
        .components()
        .iter()
        .map(|c| GaussianComponent::from_parts(c.weight(), f * c.mean() + &act.delta, f * c.cov() * f.transpose() + &act.noise))
        .collect::<Result<Vec<_>>>()?;
    Ok(GaussianMixture::from_parts_unchecked(belief.dimension(), belief.kind(), components))
}

/// Unnormalized `belief × p(label | ·)` before condensation.
pub fn update_raw(belief: &GaussianMixture, model: &CpomdpModel, label: &str, config: &FilterConfig) -> Result<GaussianMixture> {
    check_dim(model.dimension(), belief.dimension())?;
    match model.observation() {
        ObservationModel::Softmax(sm) => vb_mixture_product(belief, sm, label, config.vb),
        ObservationModel::GmLikelihood(map) => {
            let lik = map.get(label).ok_or_else(|| Error::UnknownLabel(label.into()))?;
            let mut out = Vec::with_capacity(belief.len() * lik.len());
            for a in belief.components() {
                for q in lik.components() {
                    out.push(gaussian_product(a, q)?);
                }
            }
            Ok(GaussianMixture::from_parts_unchecked(belief.dimension(), MixtureKind::RewardOrAlpha, out))
        }
    }
}

/// Measurement update: product with the label likelihood, normalization,
/// then condensation to the configured budget.
///
/// Returns [`Error::ZeroPosteriorMass`] when the observation is (numerically)
/// impossible under the belief, so callers can fall back to the prediction.
pub fn update(belief: &GaussianMixture, model: &CpomdpModel, label: &str, config: &FilterConfig) -> Result<GaussianMixture> {
    let raw = update_raw(belief, model, label, config)?;
    let kept: Vec<GaussianComponent> = raw.into_components().into_iter().filter(|c| c.weight() > 0.0).collect();
    let mass: f64 = kept.iter().map(GaussianComponent::weight).sum();
    if !(mass >= MIN_POSTERIOR_MASS) {
        return Err(Error::ZeroPosteriorMass(mass));
    }
    let posterior = normalize(&GaussianMixture::from_parts_unchecked(belief.dimension(), MixtureKind::Likelihood, kept))?;
    if posterior.len() <= config.condense.target_size {
        Ok(posterior)
    } else {
        cluster_condense(&posterior, &config.condense)
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::pbvi::Action;
    use crate::softmax::{build_relative_model, RelativeLayout, SoftmaxClass, SoftmaxModel, NO_DETECT};

    fn model(sm: SoftmaxModel, f: DMatrix<f64>, delta: &[f64]) -> CpomdpModel {
        let n = sm.dimension();
        let reward = GaussianMixture::new(n, MixtureKind::RewardOrAlpha, vec![GaussianComponent::isotropic(1.0, &vec![0.0; n], 1.0).unwrap()]).unwrap();
        CpomdpModel::new(n, vec![Action::isotropic("go", delta, 0.1).unwrap()], vec![reward], f, ObservationModel::Softmax(sm), 0.9).unwrap()
    }

    #[test]
    fn predict_ncv_mean() {
        let f = DMatrix::from_row_slice(4, 4, &[1., 0., 1., 0., 0., 1., 0., 1., 0., 0., 1., 0., 0., 0., 0., 1.]);
        let sm = build_relative_model(RelativeLayout::Proximity5, 1.0).unwrap().pad_dimensions(4, &[0, 1]).unwrap();
        let m = model(sm, f, &[0.0; 4]);
        let b = GaussianMixture::belief_from(4, vec![GaussianComponent::isotropic(1.0, &[0., 0., 1., 0.], 1.0).unwrap()]).unwrap();
        let p = predict(&b, &m, 0).unwrap();
        assert_eq!(p.components()[0].mean().as_slice(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.total_weight(), 1.0);
    }

    #[test]
    fn uniform_softmax_leaves_belief() {
        let sm = SoftmaxModel::with_class_names(1, vec![SoftmaxClass::new(vec![0.0], 0.0); 2], &["a", "b"]).unwrap();
        let m = model(sm, DMatrix::identity(1, 1), &[0.0]);
        let b = GaussianMixture::belief_from(
            1,
            vec![GaussianComponent::scalar(0.3, -1.0, 1.0).unwrap(), GaussianComponent::scalar(0.7, 2.0, 0.5).unwrap()],
        )
        .unwrap();
        let post = update(&b, &m, "a", &FilterConfig::default()).unwrap();
        for (p, q) in post.components().iter().zip(b.components()) {
            assert!((p.weight() - q.weight()).abs() < 1e-9);
            assert!((p.mean() - q.mean()).norm() < 1e-9);
        }
    }

    #[test]
    fn no_detect_splits_and_far_detect_is_flagged() {
        let sm = build_relative_model(RelativeLayout::DetectNoDetect3, 0.5).unwrap();
        let m = model(sm, DMatrix::identity(1, 1), &[0.0]);
        let b = GaussianMixture::belief_from(1, vec![GaussianComponent::scalar(1.0, 0.0, 1.0).unwrap()]).unwrap();
        let post = update(&b, &m, NO_DETECT, &FilterConfig::default()).unwrap();
        assert_eq!(post.len(), 2);
        assert!(post.components()[0].mean()[0] * post.components()[1].mean()[0] < 0.0);
        assert_eq!(post.kind(), MixtureKind::Belief);
    }
}
