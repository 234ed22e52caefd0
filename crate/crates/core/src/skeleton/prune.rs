//! Removal of surface spurs from thinned skeletons.

use super::{build_graph, thin, Centerline, NodeKind};
use crate::error::{ensure_same_dims, Error, Result};
use crate::morphology::edt_squared;
use crate::volume::{BinaryMask, UNIT_SPACING};

/// Remove terminal branches that stay inside the inscribed ball of the
/// junction they hang from: a branch from a junction to an endpoint is a
/// spur when its length (in voxels) is at most the junction's distance to
/// the background plus one. Such branches come from single-voxel bumps on
/// the surface of `m` rather than from real tubes.
///
/// Only pendant paths are removed, so the 26-connected topology of the
/// skeleton is unchanged.
pub fn prune_spurs(c: &Centerline, m: &BinaryMask) -> Result<Centerline> {
    ensure_same_dims("mask", c.mask().dims(), m.dims())?;
    if c.is_empty() {
        return Ok(c.clone());
    }
    let depth2 = edt_squared(&m.complement(), m)?;
    let v = m.volume();
    let mut current = c.clone();
    loop {
        let g = build_graph(&current, UNIT_SPACING)?;
        // shortest qualifying spur per junction
        let mut best: Vec<Option<(f64, usize)>> = vec![None; g.nodes.len()];
        for (k, b) in g.branches.iter().enumerate() {
            let (sk, ek) = (g.nodes[b.start_node].kind, g.nodes[b.end_node].kind);
            let junction = match (sk, ek) {
                (NodeKind::Junction, NodeKind::Endpoint) => b.start_node,
                (NodeKind::Endpoint, NodeKind::Junction) => b.end_node,
                _ => continue,
            };
            let depth = g.nodes[junction]
                .voxels
                .iter()
                .map(|&p| (*depth2.get(p) as f64).sqrt())
                .fold(0.0, f64::max);
            if b.length_voxels <= depth + 1.0 && best[junction].is_none_or(|(l, _)| b.length_voxels < l) {
                best[junction] = Some((b.length_voxels, k));
            }
        }
        let mut bits: Vec<bool> = current.mask().volume().data().iter().map(|&x| x != 0).collect();
        let mut changed = false;
        for (_, k) in best.into_iter().flatten() {
            let b = &g.branches[k];
            let tip = if g.nodes[b.start_node].kind == NodeKind::Endpoint {
                b.start_node
            } else {
                b.end_node
            };
            for &p in b.voxels.iter().chain(&g.nodes[tip].voxels) {
                bits[v.index(p)] = false;
            }
            changed = true;
        }
        if !changed {
            return Ok(current);
        }
        current = Centerline::from_mask_unchecked(BinaryMask::from_bools(m.dims(), m.spacing(), bits));
    }
}

/// Thin `m` and prune surface spurs: the centerline used as the reference
/// for topology metrics.
pub fn skeletonize(m: &BinaryMask) -> Result<Centerline> {
    if !m.any() {
        return Err(Error::empty("cannot skeletonize an empty mask"));
    }
    prune_spurs(&thin(m), m)
}
