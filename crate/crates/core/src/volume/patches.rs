//! Sliding-window patch layout for full-field inference.

use serde::Serialize;

use super::{BinaryMask, Dims};
use crate::error::{Error, Result};

/// Half-open voxel interval `[start, end)` along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AxisRange {
    pub start: usize,
    pub end: usize,
}

impl AxisRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatchGrid {
    pub patch_size: [usize; 3],
    pub overlap_fraction: f64,
    /// Window starts, x varying fastest.
    pub origins: Vec<[usize; 3]>,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

fn stride(patch: usize, overlap: f64) -> usize {
    // round half up
    ((patch as f64 * (1.0 - overlap) + 0.5).floor() as usize).max(1)
}

fn axis_starts(n: usize, patch: usize, overlap: f64) -> Vec<usize> {
    let step = stride(patch, overlap);
    let last = n - patch;
    let mut starts: Vec<usize> = (0..last).step_by(step).collect();
    starts.push(last);
    starts.dedup();
    starts
}

fn validate(dims: Dims, patch: [usize; 3], overlap: f64) -> Result<()> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::param(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    for a in 0..3 {
        if patch[a] == 0 {
            return Err(Error::param("patch size must be positive"));
        }
        if patch[a] > dims[a] {
            return Err(Error::param(format!(
                "patch size {} exceeds volume extent {} along axis {a}",
                patch[a], dims[a]
            )));
        }
    }
    Ok(())
}

fn product(per_axis: [Vec<usize>; 3]) -> Vec<[usize; 3]> {
    let mut origins = Vec::with_capacity(per_axis.iter().map(Vec::len).product());
    for &z in &per_axis[2] {
        for &y in &per_axis[1] {
            for &x in &per_axis[0] {
                origins.push([x, y, z]);
            }
        }
    }
    origins
}

/// Windows of size `patch` tiling a volume of `dims` with the given overlap.
///
/// Per axis the starts are `0, s, 2s, ...` with `s = round(p * (1 - overlap))`,
/// and the final window is clamped to end exactly at the volume edge.
pub fn sliding_windows(dims: Dims, patch: [usize; 3], overlap: f64) -> Result<PatchGrid> {
    validate(dims, patch, overlap)?;
    let per_axis = [0, 1, 2].map(|a| axis_starts(dims[a], patch[a], overlap));
    Ok(PatchGrid {
        patch_size: patch,
        overlap_fraction: overlap,
        origins: product(per_axis),
    })
}

impl PatchGrid {
    /// Windows restricted to `region`. A region shorter than the patch along
    /// some axis is widened to the patch size, staying inside the volume.
    pub fn within(dims: Dims, region: [AxisRange; 3], patch: [usize; 3], overlap: f64) -> Result<Self> {
        validate(dims, patch, overlap)?;
        let mut per_axis: [Vec<usize>; 3] = Default::default();
        for a in 0..3 {
            let r = region[a];
            if r.is_empty() || r.end > dims[a] {
                return Err(Error::param(format!("invalid region {r:?} on axis {a}")));
            }
            let (lo, len) = if r.len() >= patch[a] {
                (r.start, r.len())
            } else {
                let centre = (r.start + r.end) / 2;
                let lo = centre.saturating_sub(patch[a] / 2).min(dims[a] - patch[a]);
                (lo, patch[a])
            };
            per_axis[a] = axis_starts(len, patch[a], overlap)
                .into_iter()
                .map(|s| s + lo)
                .collect();
        }
        Ok(PatchGrid {
            patch_size: patch,
            overlap_fraction: overlap,
            origins: product(per_axis),
        })
    }
}

/// Bounding box of a user-supplied lung mask, extended by `extend_superior`
/// voxels towards +z so the trachea above the lungs is included.
pub fn lung_window_bounds(lung: &BinaryMask, extend_superior: usize) -> Result<[AxisRange; 3]> {
    let dims = lung.dims();
    let mut lo = dims;
    let mut hi = [0usize; 3];
    let mut any = false;
    for i in lung.indices() {
        let p = lung.volume().coords(i);
        any = true;
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a] + 1);
        }
    }
    if !any {
        return Err(Error::empty("lung mask has no foreground voxels"));
    }
    hi[2] = (hi[2] + extend_superior).min(dims[2]);
    Ok([0, 1, 2].map(|a| AxisRange {
        start: lo[a],
        end: hi[a],
    }))
}
