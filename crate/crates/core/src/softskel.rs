//! Soft morphology on `[0, 1]` volumes, the iterative soft skeleton and the
//! breakage map built from it.
//!
//! Pooling uses the face-connected cross (self plus 6 neighbors) and reads
//! voxels outside the grid as 0, so on binary input one step is identical
//! to discrete cross erosion/dilation.

use crate::error::{ensure_same_dims, Error, Result};
use crate::volume::{BinaryMask, ProbabilityVolume, Volume3, CROSS6};

/// A continuous map with values in `[0, 1]`.
pub type SoftVolume = ProbabilityVolume;

pub const DEFAULT_SKELETON_ITERATIONS: usize = 10;

fn pool(x: &Volume3<f64>, pick: fn(f64, f64) -> f64) -> Volume3<f64> {
    let data = x.data();
    let out = (0..x.len())
        .map(|i| {
            let p = x.coords(i);
            CROSS6.iter().fold(data[i], |acc, &off| {
                let v = x.offset(p, off).map_or(0.0, |q| data[x.index(q)]);
                pick(acc, v)
            })
        })
        .collect();
    x.with_data(out).expect("same geometry")
}

fn erode_raw(x: &Volume3<f64>) -> Volume3<f64> {
    pool(x, f64::min)
}

fn dilate_raw(x: &Volume3<f64>) -> Volume3<f64> {
    pool(x, f64::max)
}

/// Per-voxel minimum over the cross neighborhood.
pub fn soft_erode(x: &SoftVolume) -> SoftVolume {
    ProbabilityVolume::new_unchecked(erode_raw(x.volume()))
}

/// Per-voxel maximum over the cross neighborhood.
pub fn soft_dilate(x: &SoftVolume) -> SoftVolume {
    ProbabilityVolume::new_unchecked(dilate_raw(x.volume()))
}

/// `relu(x - open(x))`, the part of `x` removed by one soft opening.
fn opening_residue(x: &Volume3<f64>) -> Vec<f64> {
    let opened = dilate_raw(&erode_raw(x));
    x.data()
        .iter()
        .zip(opened.data())
        .map(|(&a, &b)| (a - b).max(0.0))
        .collect()
}

/// Soft skeleton after `iterations` erosion rounds.
///
/// Starting from `skel = relu(x - open(x))`, each round erodes `x` once and
/// folds the new opening residue `delta` in as
/// `skel += relu(delta - skel * delta)`.
pub fn soft_skel(x: &SoftVolume, iterations: usize) -> Result<SoftVolume> {
    if iterations < 1 {
        return Err(Error::param("soft skeleton needs at least one iteration"));
    }
    let mut current = x.volume().clone();
    let mut skel = opening_residue(&current);
    for _ in 0..iterations {
        current = erode_raw(&current);
        let delta = opening_residue(&current);
        for (s, d) in skel.iter_mut().zip(delta) {
            *s += (d - *s * d).max(0.0);
        }
    }
    // skel + d(1 - skel) stays in [0, 1] up to rounding
    for s in &mut skel {
        *s = s.clamp(0.0, 1.0);
    }
    Ok(ProbabilityVolume::new_unchecked(x.volume().with_data(skel)?))
}

/// Ground-truth skeleton strength missing from the prediction:
/// `max(0, soft_skel(g) - soft_skel(p))`.
pub fn breakage_map(g: &BinaryMask, p: &ProbabilityVolume, iterations: usize) -> Result<SoftVolume> {
    ensure_same_dims("prediction", g.dims(), p.dims())?;
    let sg = soft_skel(&ProbabilityVolume::from_mask(g), iterations)?;
    let sp = soft_skel(p, iterations)?;
    let data = sg.data().iter().zip(sp.data()).map(|(a, b)| (a - b).max(0.0)).collect();
    Ok(ProbabilityVolume::new_unchecked(g.volume().with_data(data)?))
}
