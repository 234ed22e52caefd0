//! Binary erosion/dilation, surface extraction and exact distance transforms.

mod edt;

pub use edt::{boundary_distance, edt, edt_squared, max_distance, DistanceUnit, DistanceVolume};

use serde::{Deserialize, Serialize};

use crate::volume::{BinaryMask, CROSS6, CUBE26};

/// Radius-1 structuring elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructuringElement {
    #[default]
    Cross6,
    Cube26,
}

impl StructuringElement {
    pub(crate) fn offsets(self) -> &'static [[i32; 3]] {
        match self {
            StructuringElement::Cross6 => &CROSS6,
            StructuringElement::Cube26 => &CUBE26,
        }
    }
}

/// Voxels outside the grid are read as `border` (0 for the plain operators).
fn apply(m: &BinaryMask, se: StructuringElement, border: bool, all: bool) -> BinaryMask {
    let v = m.volume();
    let bits = (0..v.len())
        .map(|i| {
            let p = v.coords(i);
            let centre = m.is_set(i);
            let mut hits = se.offsets().iter().map(|&off| match v.offset(p, off) {
                Some(q) => m.contains(q),
                None => border,
            });
            if all {
                centre && hits.all(|b| b)
            } else {
                centre || hits.any(|b| b)
            }
        })
        .collect();
    BinaryMask::from_bools(m.dims(), m.spacing(), bits)
}

/// A voxel survives iff it and all of its `se` neighbors are foreground;
/// neighbors outside the grid count as background.
pub fn erode(m: &BinaryMask, se: StructuringElement) -> BinaryMask {
    apply(m, se, false, true)
}

/// A voxel is set iff it or any of its `se` neighbors is foreground.
pub fn dilate(m: &BinaryMask, se: StructuringElement) -> BinaryMask {
    apply(m, se, false, false)
}

/// Erosion with an explicit value for voxels beyond the grid.
pub fn erode_with_border(m: &BinaryMask, se: StructuringElement, border: bool) -> BinaryMask {
    apply(m, se, border, true)
}

/// Dilation with an explicit value for voxels beyond the grid.
///
/// `dilate_with_border(m, se, true)` is the exact dual of [`erode`]:
/// `erode(m) == !dilate_with_border(!m, se, true)`.
pub fn dilate_with_border(m: &BinaryMask, se: StructuringElement, border: bool) -> BinaryMask {
    apply(m, se, border, false)
}

/// The outermost surface: foreground voxels with at least one background
/// face neighbor, the grid border counting as background.
pub fn boundary(m: &BinaryMask) -> BinaryMask {
    m.and_not(&erode(m, StructuringElement::Cross6))
        .expect("erosion preserves dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::UNIT_SPACING;

    fn cube(n: usize) -> BinaryMask {
        BinaryMask::from_fn([n, n, n], UNIT_SPACING, |_| true).unwrap()
    }

    fn single(n: usize, p: [usize; 3]) -> BinaryMask {
        BinaryMask::from_fn([n, n, n], UNIT_SPACING, |q| q == p).unwrap()
    }

    #[test]
    fn eroding_a_3_cube_leaves_the_centre() {
        let e = erode(&cube(3), StructuringElement::Cross6);
        assert_eq!(e.count(), 1);
        assert!(e.contains([1, 1, 1]));
        assert_eq!(erode(&cube(3), StructuringElement::Cube26).count(), 1);
    }

    #[test]
    fn single_voxel_erodes_away() {
        assert_eq!(erode(&single(3, [1, 1, 1]), StructuringElement::Cross6).count(), 0);
    }

    #[test]
    fn single_voxel_dilates_to_cross_or_cube() {
        let m = single(5, [2, 2, 2]);
        let d = dilate(&m, StructuringElement::Cross6);
        assert_eq!(d.count(), 7);
        assert!(d.contains([2, 2, 3]) && !d.contains([3, 3, 2]));
        assert_eq!(dilate(&m, StructuringElement::Cube26).count(), 27);
    }

    #[test]
    fn dilating_nothing_gives_nothing() {
        let m = BinaryMask::empty([4, 4, 4], UNIT_SPACING).unwrap();
        assert_eq!(dilate(&m, StructuringElement::Cube26).count(), 0);
    }

    #[test]
    fn boundary_of_cube_and_voxel() {
        let b = boundary(&cube(3));
        assert_eq!(b.count(), 26);
        assert!(!b.contains([1, 1, 1]));
        let s = single(3, [0, 2, 1]);
        assert_eq!(boundary(&s), s);
    }

    #[test]
    fn grid_border_counts_as_background() {
        // every voxel of a full 4^3 grid touches the border except the 2^3 core
        let b = boundary(&cube(4));
        assert_eq!(b.count(), 64 - 8);
    }

    #[test]
    fn border_value_changes_erosion_at_edges() {
        let e = erode_with_border(&cube(3), StructuringElement::Cross6, true);
        assert_eq!(e.count(), 27);
    }
}
