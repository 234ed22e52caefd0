//! Discrete centerlines: thinning, branch graphs, generation-based regions.

mod graph;
mod prune;
mod regions;
mod thin;

pub use graph::{
    build_graph, build_graph_with, Branch, BranchJson, GraphJson, Node, NodeKind, RootPlacement, SkeletonGraph,
};
pub use prune::{prune_spurs, skeletonize};
pub use regions::{nearest_branch_labels, small_airway_mask, BranchLabelVolume, DEFAULT_DROP_GENERATIONS};
pub use thin::thin;

pub(crate) use graph::assign_generations;

use crate::error::{Error, Result};
use crate::morphology::{edt, DistanceVolume};
use crate::volume::BinaryMask;

/// A curve skeleton, one voxel wide wherever the topology allows.
#[derive(Clone, Debug, PartialEq)]
pub struct Centerline(BinaryMask);

impl Centerline {
    /// Wrap a mask that already is a skeleton (for instance a known axis).
    pub fn from_mask_unchecked(m: BinaryMask) -> Self {
        Centerline(m)
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.0
    }

    pub fn into_mask(self) -> BinaryMask {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.any()
    }
}

/// Distance from each foreground voxel of `m` to the nearest voxel of its
/// thinned centerline, in voxels.
pub fn centerline_distance(m: &BinaryMask) -> Result<DistanceVolume> {
    if !m.any() {
        return Err(Error::empty("centerline distance of an empty mask"));
    }
    let c = thin(m);
    edt(c.mask(), m, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::UNIT_SPACING;

    #[test]
    fn single_voxel_is_its_own_centerline() {
        let m = BinaryMask::from_fn([3, 3, 3], UNIT_SPACING, |p| p == [1, 2, 0]).unwrap();
        let d = centerline_distance(&m).unwrap();
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn centerline_voxels_are_at_zero() {
        let m = BinaryMask::from_fn([9, 9, 12], UNIT_SPACING, |[x, y, z]| {
            let (dx, dy) = (x as f64 - 4.0, y as f64 - 4.0);
            dx * dx + dy * dy <= 9.0 && (1..11).contains(&z)
        })
        .unwrap();
        let c = thin(&m);
        let d = centerline_distance(&m).unwrap();
        for i in c.mask().indices() {
            assert_eq!(d.data()[i], 0.0);
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = BinaryMask::empty([2, 2, 2], UNIT_SPACING).unwrap();
        assert!(centerline_distance(&m).is_err());
    }
}
