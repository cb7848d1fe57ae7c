use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// How one block component ties its parameters across the `stacks x blocks` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SharingScheme {
    /// Every site owns its parameters.
    NoShare,
    /// Sites with the same dilation index share across stacks.
    Stack,
    /// All dilation sites inside one stack share.
    Dilation,
    /// One tensor set for the whole grid.
    All,
}

impl SharingScheme {
    pub const ALL: [SharingScheme; 4] = [
        SharingScheme::NoShare,
        SharingScheme::Stack,
        SharingScheme::Dilation,
        SharingScheme::All,
    ];

    pub fn letter(self) -> char {
        match self {
            SharingScheme::NoShare => 'n',
            SharingScheme::Stack => 's',
            SharingScheme::Dilation => 'd',
            SharingScheme::All => 'a',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'n' => Some(SharingScheme::NoShare),
            's' => Some(SharingScheme::Stack),
            'd' => Some(SharingScheme::Dilation),
            'a' => Some(SharingScheme::All),
            _ => None,
        }
    }

    pub fn erases_stack(self) -> bool {
        matches!(self, SharingScheme::Stack | SharingScheme::All)
    }

    pub fn erases_dilation(self) -> bool {
        matches!(self, SharingScheme::Dilation | SharingScheme::All)
    }
}

/// Distinct parameter sets one component needs on a `blocks x stacks` grid.
pub fn unique_site_count(blocks: usize, stacks: usize, scheme: SharingScheme) -> usize {
    match scheme {
        SharingScheme::NoShare => blocks * stacks,
        SharingScheme::Stack => blocks,
        SharingScheme::Dilation => stacks,
        SharingScheme::All => 1,
    }
}

/// Per-component schemes; written as two letters, separable first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SharingConfig {
    pub separable: SharingScheme,
    pub pointwise: SharingScheme,
}

impl SharingConfig {
    pub const UNSHARED: SharingConfig = SharingConfig {
        separable: SharingScheme::NoShare,
        pointwise: SharingScheme::NoShare,
    };

    pub fn new(separable: SharingScheme, pointwise: SharingScheme) -> Self {
        Self { separable, pointwise }
    }

    pub fn is_unshared(&self) -> bool {
        *self == Self::UNSHARED
    }
}

impl Default for SharingConfig {
    fn default() -> Self {
        Self::UNSHARED
    }
}

impl fmt::Display for SharingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.separable.letter(), self.pointwise.letter())
    }
}

impl FromStr for SharingConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters: Vec<char> = s.chars().collect();
        match letters.as_slice() {
            [a, b] => match (SharingScheme::from_letter(*a), SharingScheme::from_letter(*b)) {
                (Some(separable), Some(pointwise)) => Ok(Self { separable, pointwise }),
                _ => Err(Error::UnknownScheme(s.to_string())),
            },
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

/// All 16 configurations, separable scheme major, in `n, s, d, a` order.
pub fn enumerate_ablation_grid() -> Vec<SharingConfig> {
    SharingScheme::ALL
        .iter()
        .flat_map(|&separable| {
            SharingScheme::ALL
                .iter()
                .map(move |&pointwise| SharingConfig { separable, pointwise })
        })
        .collect()
}
