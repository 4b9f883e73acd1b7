use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::phase;

/// Default classification tolerance (rad).
pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// Tunneling phase of direct coupling: the bare `−i` of the off-diagonal term.
pub const DIRECT_ZETA: f64 = 1.5 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cavity {
    One,
    Two,
}

impl Cavity {
    pub fn index(self) -> usize {
        match self {
            Cavity::One => 0,
            Cavity::Two => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Cavity::One),
            1 => Some(Cavity::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Constructive,
    Destructive,
    Intermediate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Constructive => "constructive",
            Verdict::Destructive => "destructive",
            Verdict::Intermediate => "intermediate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceVerdict {
    pub cavity: Cavity,
    pub verdict: Verdict,
    /// Distance (rad) to the nearest exact condition, in `[0, π/2]`.
    pub residual: f64,
}

/// Interference seen by `cavity` when the field tunneling in from the other
/// cavity meets the field already there.
///
/// Cavity 1 compares `Δφ + ζ`, cavity 2 compares `Δφ − ζ`, against `2mπ`
/// (constructive) and `(2m+1)π` (destructive). Direct coupling is `ζ = 3π/2`.
pub fn classify_interference(
    delta_phi: f64,
    zeta: f64,
    cavity: Cavity,
    tolerance: f64,
) -> InterferenceVerdict {
    let total = match cavity {
        Cavity::One => delta_phi + zeta,
        Cavity::Two => delta_phi - zeta,
    };
    let to_constructive = phase::distance(total, 0.0);
    let to_destructive = phase::distance(total, PI);
    let residual = to_constructive.min(to_destructive);
    let verdict = if residual > tolerance {
        Verdict::Intermediate
    } else if to_constructive <= to_destructive {
        Verdict::Constructive
    } else {
        Verdict::Destructive
    };
    InterferenceVerdict {
        cavity,
        verdict,
        residual,
    }
}
