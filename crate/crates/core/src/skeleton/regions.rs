//! Attribution of mask voxels to skeleton branches and the small-airway
//! restriction built on it.

use std::collections::HashMap;

use super::SkeletonGraph;
use crate::error::{ensure_same_dims, Error, Result};
use crate::morphology::edt_squared;
use crate::volume::{BinaryMask, Volume3};

/// Per-voxel branch id (0 = not assigned).
pub type BranchLabelVolume = Volume3<u32>;

/// Generations 0 (trachea) and 1 (main bronchi) are excluded by default.
pub const DEFAULT_DROP_GENERATIONS: usize = 2;

fn isqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// All integer offsets with squared length exactly `n`.
fn shell(n: i64) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    let limit = isqrt(n);
    for a in 0..=limit {
        let rest = n - a * a;
        for b in 0..=isqrt(rest) {
            let c2 = rest - b * b;
            let c = isqrt(c2);
            if c * c != c2 {
                continue;
            }
            for sa in if a == 0 { &[1][..] } else { &[1, -1][..] } {
                for sb in if b == 0 { &[1][..] } else { &[1, -1][..] } {
                    for sc in if c == 0 { &[1][..] } else { &[1, -1][..] } {
                        out.push([(sa * a) as i32, (sb * b) as i32, (sc * c) as i32]);
                    }
                }
            }
        }
    }
    out
}

/// Assign every `domain` voxel the id of the branch owning its nearest
/// skeleton voxel (exact Euclidean distance, ties to the smaller id).
pub fn nearest_branch_labels(graph: &SkeletonGraph, domain: &BinaryMask) -> Result<BranchLabelVolume> {
    ensure_same_dims("domain", graph.dims, domain.dims())?;
    if graph.branches.is_empty() {
        return Err(Error::empty("skeleton graph has no branches"));
    }
    let dims = domain.dims();
    let geometry = domain.volume();
    let mut skel_label = vec![0u32; domain.len()];
    for (p, id) in graph.labelled_voxels() {
        let i = geometry.index(p);
        let id = id as u32;
        if skel_label[i] == 0 || id < skel_label[i] {
            skel_label[i] = id;
        }
    }
    let reference = BinaryMask::from_bools(dims, domain.spacing(), skel_label.iter().map(|&l| l != 0).collect());
    let sq = edt_squared(&reference, domain)?;

    let mut shells: HashMap<i64, Vec<[i32; 3]>> = HashMap::new();
    let mut labels = vec![0u32; domain.len()];
    for i in domain.indices() {
        let d2 = sq.data()[i];
        if d2 == 0 {
            labels[i] = skel_label[i];
            continue;
        }
        let p = geometry.coords(i);
        let offsets = shells.entry(d2).or_insert_with(|| shell(d2));
        labels[i] = offsets
            .iter()
            .filter_map(|&o| geometry.offset(p, o))
            .map(|q| skel_label[geometry.index(q)])
            .filter(|&l| l != 0)
            .min()
            .expect("exact distance guarantees a skeleton voxel on the shell");
    }
    domain.volume().with_data(labels)
}

/// Voxels of `m` attributed to branches of generation `>= drop_generations`.
/// With `drop_generations == 0` this is `m` itself.
pub fn small_airway_mask(m: &BinaryMask, graph: &SkeletonGraph, drop_generations: usize) -> Result<BinaryMask> {
    if graph.branches.is_empty() {
        return Err(Error::empty("skeleton graph has no branches"));
    }
    if drop_generations == 0 {
        return Ok(m.clone());
    }
    if !m.any() {
        return Ok(m.clone());
    }
    let labels = nearest_branch_labels(graph, m)?;
    let keep = labels
        .data()
        .iter()
        .map(|&l| l != 0 && graph.branches[l as usize - 1].generation >= drop_generations)
        .collect();
    Ok(BinaryMask::from_bools(m.dims(), m.spacing(), keep))
}
