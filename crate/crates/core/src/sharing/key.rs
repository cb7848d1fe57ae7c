use std::fmt;
use std::str::FromStr;

use super::scheme::SharingConfig;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Separable,
    Pointwise,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Separable => "separable",
            Component::Pointwise => "pointwise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Encoder,
    /// Input normalization plus the `N -> B` projection.
    Bottleneck,
    Block {
        component: Component,
        /// `None` once canonicalized away by stack sharing.
        stack: Option<usize>,
        /// `None` once canonicalized away by dilation sharing.
        dilation: Option<usize>,
    },
    /// Output activation plus the projection to `C * N` mask channels.
    MaskHead,
    Decoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TensorRole {
    Weight,
    Bias,
    NormGain,
    NormBias,
    Slope,
    InputWeight,
    InputBias,
    DepthwiseWeight,
    DepthwiseBias,
    ResidualWeight,
    ResidualBias,
    SkipWeight,
    SkipBias,
}

impl TensorRole {
    const NAMES: [(TensorRole, &'static str); 13] = [
        (TensorRole::Weight, "weight"),
        (TensorRole::Bias, "bias"),
        (TensorRole::NormGain, "norm_gain"),
        (TensorRole::NormBias, "norm_bias"),
        (TensorRole::Slope, "slope"),
        (TensorRole::InputWeight, "input_weight"),
        (TensorRole::InputBias, "input_bias"),
        (TensorRole::DepthwiseWeight, "depthwise_weight"),
        (TensorRole::DepthwiseBias, "depthwise_bias"),
        (TensorRole::ResidualWeight, "residual_weight"),
        (TensorRole::ResidualBias, "residual_bias"),
        (TensorRole::SkipWeight, "skip_weight"),
        (TensorRole::SkipBias, "skip_bias"),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(r, _)| *r == self).map(|(_, n)| *n).expect("every role named")
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::NAMES.iter().find(|(_, n)| *n == name).map(|(r, _)| *r)
    }
}

/// Identity of one parameter tensor. Rendered as e.g. `encoder.weight` or
/// `block.r2.x*.separable.depthwise_weight`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamKey {
    pub site: Site,
    pub role: TensorRole,
}

impl ParamKey {
    pub fn new(site: Site, role: TensorRole) -> Self {
        Self { site, role }
    }

    pub fn block(component: Component, stack: usize, dilation: usize, role: TensorRole) -> Self {
        Self {
            site: Site::Block {
                component,
                stack: Some(stack),
                dilation: Some(dilation),
            },
            role,
        }
    }

    pub fn component(&self) -> Option<Component> {
        match self.site {
            Site::Block { component, .. } => Some(component),
            _ => None,
        }
    }

    /// Maps a site key to the key of the tensor it reads under `config`.
    pub fn canonicalize(&self, config: &SharingConfig) -> ParamKey {
        match self.site {
            Site::Block {
                component,
                stack,
                dilation,
            } => {
                let scheme = match component {
                    Component::Separable => config.separable,
                    Component::Pointwise => config.pointwise,
                };
                ParamKey {
                    site: Site::Block {
                        component,
                        stack: if scheme.erases_stack() { None } else { stack },
                        dilation: if scheme.erases_dilation() { None } else { dilation },
                    },
                    role: self.role,
                }
            }
            _ => *self,
        }
    }

    /// First concrete site covered by this key (wildcards replaced by 0).
    pub fn representative(&self) -> ParamKey {
        match self.site {
            Site::Block {
                component,
                stack,
                dilation,
            } => ParamKey::block(component, stack.unwrap_or(0), dilation.unwrap_or(0), self.role),
            _ => *self,
        }
    }
}

fn index_part(prefix: char, index: Option<usize>) -> String {
    match index {
        Some(i) => format!("{prefix}{i}"),
        None => format!("{prefix}*"),
    }
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = self.role.name();
        match self.site {
            Site::Encoder => write!(f, "encoder.{role}"),
            Site::Bottleneck => write!(f, "bottleneck.{role}"),
            Site::MaskHead => write!(f, "mask_head.{role}"),
            Site::Decoder => write!(f, "decoder.{role}"),
            Site::Block {
                component,
                stack,
                dilation,
            } => write!(
                f,
                "block.{}.{}.{}.{role}",
                index_part('r', stack),
                index_part('x', dilation),
                component.name()
            ),
        }
    }
}

fn parse_index(part: &str, prefix: char) -> Option<Option<usize>> {
    let rest = part.strip_prefix(prefix)?;
    if rest == "*" {
        Some(None)
    } else {
        rest.parse().ok().map(Some)
    }
}

impl FromStr for ParamKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::Checkpoint(format!("malformed parameter key `{s}`"));
        let parts: Vec<&str> = s.split('.').collect();
        let role = TensorRole::from_name(parts.last().ok_or_else(bad)?).ok_or_else(bad)?;
        let site = match parts.as_slice() {
            ["encoder", _] => Site::Encoder,
            ["bottleneck", _] => Site::Bottleneck,
            ["mask_head", _] => Site::MaskHead,
            ["decoder", _] => Site::Decoder,
            ["block", r, x, c, _] => Site::Block {
                component: match *c {
                    "separable" => Component::Separable,
                    "pointwise" => Component::Pointwise,
                    _ => return Err(bad()),
                },
                stack: parse_index(r, 'r').ok_or_else(bad)?,
                dilation: parse_index(x, 'x').ok_or_else(bad)?,
            },
            _ => return Err(bad()),
        };
        Ok(ParamKey { site, role })
    }
}
