use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::models::{shape_plan, NetConfig};
use crate::tensor::AdamConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the supervise-net reconstruction loss.
    pub lambda_s: f64,
    /// Weight of the feature-tap reconstruction loss.
    pub lambda_r: f64,
    /// Per-tap weights; all ones when omitted.
    pub lambda_j: Option<Vec<f64>>,
    /// Weight of the direct `|G(x) − y|` term.
    pub lambda_pixel: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub use_supervise: bool,
    pub use_adversarial: bool,
    pub d_steps_per_g: usize,
    /// Minimize `log(1 − D(x, G(x)))` instead of `−log D(x, G(x))`.
    pub saturating_g_loss: bool,
    /// Random horizontal pair flips.
    pub augment: bool,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_s: 100.0,
            lambda_r: 100.0,
            lambda_j: None,
            lambda_pixel: 100.0,
            lr: 0.002,
            beta1: 0.5,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: 16,
            epochs: 20,
            seed: 0,
            use_supervise: true,
            use_adversarial: true,
            d_steps_per_g: 1,
            saturating_g_loss: false,
            augment: true,
            net: NetConfig::default(),
        }
    }
}

/// Coefficients of each generator-loss part after applying the ablation flags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GLossWeights {
    pub adv: f64,
    pub sup: f64,
    pub rec: f64,
    pub pixel: f64,
}

/// Unweighted generator-loss parts; absent parts are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub adv_g: f64,
    pub sup: f64,
    pub rec: f64,
    pub pixel: f64,
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: TrainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    /// Per-tap weights resolved against the number of taps.
    pub fn tap_weights(&self) -> Result<Vec<f64>, ConfigError> {
        let k = shape_plan(&self.net)?.num_taps();
        match &self.lambda_j {
            None => Ok(vec![1.0; k]),
            Some(w) if w.len() == k => Ok(w.clone()),
            Some(w) => Err(ConfigError::invalid(
                "lambda_j",
                format!("{} weights given for {k} feature taps", w.len()),
            )),
        }
    }

    pub fn g_loss_weights(&self) -> GLossWeights {
        let sup_on = if self.use_supervise { 1.0 } else { 0.0 };
        GLossWeights {
            adv: if self.use_adversarial { 1.0 } else { 0.0 },
            sup: self.lambda_s * sup_on,
            rec: self.lambda_r * sup_on,
            pixel: self.lambda_pixel,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.net.validate()?;
        let nonneg = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be finite and >= 0, got {v}")))
            }
        };
        nonneg("lambda_s", self.lambda_s)?;
        nonneg("lambda_r", self.lambda_r)?;
        nonneg("lambda_pixel", self.lambda_pixel)?;
        for (j, w) in self.tap_weights()?.iter().enumerate() {
            nonneg(&format!("lambda_j[{j}]"), *w)?;
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ConfigError::invalid("lr", "must be positive"));
        }
        for (field, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(ConfigError::invalid(field, format!("must lie in [0, 1), got {b}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(ConfigError::invalid("adam_eps", "must be positive"));
        }
        if self.batch == 0 {
            return Err(ConfigError::invalid("batch", "must be at least 1"));
        }
        if self.d_steps_per_g == 0 {
            return Err(ConfigError::invalid("d_steps_per_g", "must be at least 1"));
        }
        if !self.use_supervise && !self.use_adversarial && self.lambda_pixel == 0.0 {
            return Err(ConfigError::invalid(
                "lambda_pixel",
                "must be positive when both use_supervise and use_adversarial are off",
            ));
        }
        Ok(())
    }
}

/// Weighted sum of the generator-loss parts.
pub fn total_g_loss(cfg: &TrainConfig, parts: &LossParts) -> f64 {
    let w = cfg.g_loss_weights();
    w.adv * parts.adv_g + w.sup * parts.sup + w.rec * parts.rec + w.pixel * parts.pixel
}
