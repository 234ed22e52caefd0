use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel adjacency: faces (6), faces and edges (18), or the full cube (26).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::param(format!("connectivity must be 6, 18 or 26, got {n}"))),
        }
    }

    pub fn count(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.count()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;
    fn try_from(n: u8) -> Result<Self> {
        Connectivity::from_count(n)
    }
}

pub(crate) const CROSS6: [[i32; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

pub(crate) const CUBE26: [[i32; 3]; 26] = {
    let mut out = [[0i32; 3]; 26];
    let mut k = 0;
    let mut z = -1;
    while z <= 1 {
        let mut y = -1;
        while y <= 1 {
            let mut x = -1;
            while x <= 1 {
                if !(x == 0 && y == 0 && z == 0) {
                    out[k] = [x, y, z];
                    k += 1;
                }
                x += 1;
            }
            y += 1;
        }
        z += 1;
    }
    out
};

/// Neighbor offsets for `c`, ordered z-major then y then x.
pub(crate) fn offsets(c: Connectivity) -> Vec<[i32; 3]> {
    let limit = match c {
        Connectivity::Six => 1,
        Connectivity::Eighteen => 2,
        Connectivity::TwentySix => 3,
    };
    CUBE26
        .iter()
        .copied()
        .filter(|o| o.iter().map(|v| v.abs()).sum::<i32>() <= limit)
        .collect()
}
