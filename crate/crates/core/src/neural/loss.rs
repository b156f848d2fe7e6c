//! Quadratic objectives `(1/2N) Σ_i ‖pred_i − target_i‖²_F` and their
//! weighted sum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use super::tensor::{check_same, Tensor};

/// Weights of the estimation, blind and non-blind terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::equal(1.0)
    }
}

impl LossWeights {
    pub fn equal(w: f64) -> Self {
        Self {
            alpha: w,
            beta: w,
            gamma: w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// `(1/2N) Σ ‖pred − target‖²`, accumulated in `f64`.
pub fn quadratic_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_same(pred, target, "loss")?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p as f64 - t as f64).powi(2))
        .sum();
    Ok(sum / (2.0 * pred.n() as f64))
}

/// Gradient of [`quadratic_loss`] with respect to `pred`, scaled by `weight`.
pub fn quadratic_loss_grad(pred: &Tensor, target: &Tensor, weight: f64) -> Result<Tensor> {
    check_same(pred, target, "loss gradient")?;
    let scale = (weight / pred.n() as f64) as f32;
    let mut g = pred.sub(target)?;
    g.data_mut().iter_mut().for_each(|v| *v *= scale);
    Ok(g)
}

/// Noise-map estimation loss.
pub fn loss_estimation(e_hat: &Tensor, e_true: &Tensor) -> Result<f64> {
    quadratic_loss(e_hat, e_true)
}

/// Residual loss with the estimator's own map as conditioning.
pub fn loss_blind(v_hat: &Tensor, v_true: &Tensor) -> Result<f64> {
    quadratic_loss(v_hat, v_true)
}

/// Residual loss with the ground-truth map as conditioning.
pub fn loss_nonblind(v_hat: &Tensor, v_true: &Tensor) -> Result<f64> {
    quadratic_loss(v_hat, v_true)
}

pub fn loss_total(le: f64, lb: f64, lnb: f64, w: LossWeights) -> f64 {
    w.alpha * le + w.beta * lb + w.gamma * lnb
}
