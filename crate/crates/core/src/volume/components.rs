//! Connected-component labeling with a two-pass union-find scan.

use super::{offsets, BinaryMask, Connectivity, Volume3};
use crate::error::{Error, Result};

/// Component labels: 0 is background, foreground components are `1..=count`.
///
/// Labels are numbered in order of each component's first voxel in the
/// linear (x-fastest) scan.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    pub labels: Volume3<u32>,
    pub count: usize,
}

impl LabelVolume {
    /// Voxel count per label; entry 0 is the background count.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.count + 1];
        for &l in self.labels.data() {
            sizes[l as usize] += 1;
        }
        sizes
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask::from_bools(
            self.labels.dims(),
            self.labels.spacing(),
            self.labels.data().iter().map(|&l| l == label && label != 0).collect(),
        )
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        DisjointSet { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        // the smaller provisional label wins, preserving scan order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

pub fn connected_components(m: &BinaryMask, connectivity: Connectivity) -> LabelVolume {
    let v = m.volume();
    let [nx, ny, nz] = v.dims();
    // neighbors already visited by the raster scan
    let backward: Vec<[i32; 3]> = offsets(connectivity)
        .into_iter()
        .filter(|o| (o[2], o[1], o[0]) < (0, 0, 0))
        .collect();

    let mut provisional = vec![0u32; v.len()];
    let mut sets = DisjointSet::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if !m.is_set(i) {
                    continue;
                }
                let mut label = 0u32;
                for off in &backward {
                    if let Some(q) = v.offset([x, y, z], *off) {
                        let l = provisional[v.index(q)];
                        if l != 0 {
                            label = if label == 0 { sets.find(l) } else { sets.union(label, l) };
                        }
                    }
                }
                provisional[i] = if label == 0 { sets.make() } else { label };
            }
        }
    }

    let mut remap = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    let labels = provisional
        .iter()
        .map(|&l| {
            if l == 0 {
                return 0;
            }
            let root = sets.find(l) as usize;
            if remap[root] == 0 {
                count += 1;
                remap[root] = count;
            }
            remap[root]
        })
        .collect();

    LabelVolume {
        labels: Volume3::from_vec(v.dims(), v.spacing(), labels).expect("same geometry"),
        count: count as usize,
    }
}

/// The component with the most voxels; ties go to the component whose first
/// voxel comes earliest in the linear scan.
pub fn largest_component(m: &BinaryMask, connectivity: Connectivity) -> Result<BinaryMask> {
    let labels = connected_components(m, connectivity);
    if labels.count == 0 {
        return Err(Error::empty("largest_component needs a mask with foreground voxels"));
    }
    let sizes = labels.sizes();
    let mut best = 1;
    for l in 2..=labels.count {
        if sizes[l] > sizes[best] {
            best = l;
        }
    }
    Ok(labels.mask_of(best as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::UNIT_SPACING;

    fn mask(dims: [usize; 3], on: &[[usize; 3]]) -> BinaryMask {
        BinaryMask::from_fn(dims, UNIT_SPACING, |p| on.contains(&p)).unwrap()
    }

    #[test]
    fn two_isolated_voxels() {
        let m = mask([4, 4, 4], &[[0, 0, 0], [2, 2, 2]]);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).count, 2);
    }

    #[test]
    fn solid_cube_is_one_component() {
        let m = BinaryMask::from_fn([5, 5, 5], UNIT_SPACING, |_| true).unwrap();
        for c in [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix] {
            assert_eq!(connected_components(&m, c).count, 1);
        }
    }

    #[test]
    fn connectivity_matters() {
        // edge-adjacent pair and corner-adjacent pair
        let edge = mask([3, 3, 3], &[[0, 0, 0], [1, 1, 0]]);
        assert_eq!(connected_components(&edge, Connectivity::Six).count, 2);
        assert_eq!(connected_components(&edge, Connectivity::Eighteen).count, 1);
        let corner = mask([3, 3, 3], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(connected_components(&corner, Connectivity::Eighteen).count, 2);
        assert_eq!(connected_components(&corner, Connectivity::TwentySix).count, 1);
    }

    #[test]
    fn merged_labels_follow_scan_order() {
        // a "U" whose arms are joined only on a later row
        let m = mask([3, 2, 1], &[[0, 0, 0], [2, 0, 0], [0, 1, 0], [1, 1, 0], [2, 1, 0]]);
        let l = connected_components(&m, Connectivity::Six);
        assert_eq!(l.count, 1);
        assert!(l.labels.data().iter().all(|&x| x == 0 || x == 1));
    }

    #[test]
    fn largest_picks_bigger_component() {
        let mut on: Vec<[usize; 3]> = (0..5).map(|x| [x, 0, 0]).collect();
        on.extend((0..9).map(|x| [x, 4, 4]));
        let m = mask([10, 6, 6], &on);
        let big = largest_component(&m, Connectivity::TwentySix).unwrap();
        assert_eq!(big.count(), 9);
        assert!(big.contains([0, 4, 4]));
    }

    #[test]
    fn largest_tie_goes_to_earliest_voxel() {
        let mut on: Vec<[usize; 3]> = (0..7).map(|x| [x, 3, 3]).collect();
        on.extend((0..7).map(|x| [x, 0, 5]));
        let m = mask([8, 6, 6], &on);
        let big = largest_component(&m, Connectivity::TwentySix).unwrap();
        // [0,3,3] has linear index 0 + 8*(3 + 6*3) = 168 < 0 + 8*(0 + 6*5) = 240
        assert!(big.contains([0, 3, 3]));
        assert!(!big.contains([0, 0, 5]));
    }

    #[test]
    fn largest_of_single_component_is_identity() {
        let m = mask([4, 4, 4], &[[1, 1, 1], [1, 2, 1], [2, 2, 2]]);
        assert_eq!(largest_component(&m, Connectivity::TwentySix).unwrap(), m);
    }

    #[test]
    fn largest_of_empty_is_an_error() {
        let m = BinaryMask::empty([3, 3, 3], UNIT_SPACING).unwrap();
        assert!(matches!(
            largest_component(&m, Connectivity::TwentySix),
            Err(Error::EmptyInput(_))
        ));
        assert_eq!(connected_components(&m, Connectivity::Six).count, 0);
    }
}
