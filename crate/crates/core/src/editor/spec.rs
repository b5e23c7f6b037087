use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of one attribute edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditSpec {
    pub edit: EditKind,
    /// Re-noising depth.
    pub t0: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EditKind {
    Background { background: BackgroundMode },
    Size { size: SizeTarget },
    /// `pre_size` resizes the object before it is moved or rotated.
    Position {
        position: PositionTarget,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pre_size: Option<SizeTarget>,
    },
    Direction {
        angle: AngleTarget,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pre_size: Option<SizeTarget>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BackgroundMode {
    /// Re-noise and denoise with no guidance.
    Invert,
    /// Spectral-complexity guidance; `lambda > 0` adds texture.
    Guided { lambda: f64 },
    /// Cross-entropy guidance against the true label.
    Adversarial { lambda: f64 },
    /// A background drawn from the pool.
    Random,
    Template { pattern: Pattern, period: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Checker,
    StripeVertical,
    StripeHorizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SizeTarget {
    Scale { scale: f64 },
    /// Object pixel rate after the edit.
    Rate { rate: f64 },
    /// As large as fits with a one-pixel margin.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PositionTarget {
    /// New top-left corner `(w', h')` of the object rectangle.
    Offset { x: usize, y: usize },
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AngleTarget {
    Degrees { degrees: f64 },
    /// Uniform in `[0, 360)`.
    Random,
}

impl SizeTarget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SizeTarget::Scale { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::InvalidScale(scale))
            }
            SizeTarget::Rate { rate } if !(rate > 0.0 && rate <= 1.0) => Err(
                Error::InvalidArgument(format!("pixel rate {rate} outside (0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

impl EditSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t0 == 0 {
            return Err(Error::InvalidArgument("t0 must be >= 1".into()));
        }
        match &self.edit {
            EditKind::Background { background } => match *background {
                BackgroundMode::Guided { lambda } | BackgroundMode::Adversarial { lambda }
                    if !lambda.is_finite() =>
                {
                    Err(Error::InvalidArgument(format!("lambda {lambda} is not finite")))
                }
                BackgroundMode::Template { period: 0, .. } => {
                    Err(Error::InvalidArgument("template period must be >= 1".into()))
                }
                _ => Ok(()),
            },
            EditKind::Size { size } => size.validate(),
            EditKind::Position { pre_size, .. } => pre_size.map_or(Ok(()), |s| s.validate()),
            EditKind::Direction { angle, pre_size } => {
                if let AngleTarget::Degrees { degrees } = angle {
                    if !degrees.is_finite() {
                        return Err(Error::InvalidArgument("angle is not finite".into()));
                    }
                }
                pre_size.map_or(Ok(()), |s| s.validate())
            }
        }
    }

    pub fn is_object_edit(&self) -> bool {
        !matches!(self.edit, EditKind::Background { .. })
    }
}
