//! Convex losses on transformed samples and their (sub)gradients in θ.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::features::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// `½(y − θᵀz)²` with gradient `−(y − θᵀz)·z`.
pub fn squared_loss(z: &[f64], y: f64, theta: &[f64]) -> Result<LossEval> {
    check_dim("squared loss", theta.len(), z.len())?;
    let err = y - dot(theta, z);
    Ok(LossEval {
        value: 0.5 * err * err,
        grad: z.iter().map(|zi| -err * zi).collect(),
    })
}

/// `(λ/2)‖θ‖² + max(0, 1 − y·θᵀz)`.
///
/// The hinge term contributes to the subgradient only when its argument is
/// strictly positive, so the kink returns `λθ`.
pub fn hinge_reg_loss(z: &[f64], y: f64, theta: &[f64], lambda: f64) -> Result<LossEval> {
    check_dim("hinge loss", theta.len(), z.len())?;
    check_label(y)?;
    check_lambda(lambda)?;
    let slack = 1.0 - y * dot(theta, z);
    let value = 0.5 * lambda * dot(theta, theta) + slack.max(0.0);
    let active = slack > 0.0;
    let grad = theta
        .iter()
        .zip(z)
        .map(|(t, zi)| if active { lambda * t - y * zi } else { lambda * t })
        .collect();
    Ok(LossEval { value, grad })
}

pub(crate) fn check_label(y: f64) -> Result<()> {
    if y != 1.0 && y != -1.0 {
        return Err(Error::param(format!("hinge loss needs a label in {{-1, +1}}, got {y}")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("regularizer must be positive, got {lambda}")));
    }
    Ok(())
}

/// Loss selector used by the learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Squared,
    Hinge { lambda: f64 },
}

impl Loss {
    pub fn hinge(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Loss::Hinge { lambda })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Hinge { .. } => "hinge",
        }
    }

    pub fn eval(&self, z: &[f64], y: f64, theta: &[f64]) -> Result<LossEval> {
        match *self {
            Loss::Squared => squared_loss(z, y, theta),
            Loss::Hinge { lambda } => hinge_reg_loss(z, y, theta, lambda),
        }
    }

    /// Loss value alone, without allocating a gradient.
    pub fn value(&self, z: &[f64], y: f64, theta: &[f64]) -> Result<f64> {
        check_dim("loss", theta.len(), z.len())?;
        let pred = dot(theta, z);
        Ok(match *self {
            Loss::Squared => 0.5 * (y - pred) * (y - pred),
            Loss::Hinge { lambda } => {
                check_label(y)?;
                0.5 * lambda * dot(theta, theta) + (1.0 - y * pred).max(0.0)
            }
        })
    }

    /// In-place subgradient step `θ ← θ − μ·∇L(θ)`; returns the loss at the
    /// old `θ` and the prediction `θᵀz`.
    ///
    /// `shrink` replaces the hinge factor `1 − μλ` when the caller knows it
    /// exactly (the Pegasos schedule gives `1 − 1/n`).
    pub(crate) fn step_in_place(&self, z: &[f64], y: f64, theta: &mut [f64], mu: f64, shrink: Option<f64>) -> (f64, f64) {
        let pred = dot(theta, z);
        match *self {
            Loss::Squared => {
                let err = y - pred;
                for (t, zi) in theta.iter_mut().zip(z) {
                    *t += mu * err * zi;
                }
                (0.5 * err * err, pred)
            }
            Loss::Hinge { lambda } => {
                let slack = 1.0 - y * pred;
                let value = 0.5 * lambda * dot(theta, theta) + slack.max(0.0);
                let shrink = shrink.unwrap_or(1.0 - mu * lambda);
                if slack > 0.0 {
                    let push = mu * y;
                    for (t, zi) in theta.iter_mut().zip(z) {
                        *t = shrink * *t + push * zi;
                    }
                } else {
                    for t in theta.iter_mut() {
                        *t *= shrink;
                    }
                }
                (value, pred)
            }
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses the loss name; the hinge regularizer is supplied separately, so
/// `"hinge"` parses with `λ = 1` and callers overwrite it.
impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "squared" => Ok(Loss::Squared),
            "hinge" => Ok(Loss::Hinge { lambda: 1.0 }),
            other => Err(Error::param(format!("unknown loss '{other}' (expected squared | hinge)"))),
        }
    }
}
