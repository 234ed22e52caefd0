//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use belkit::{BinaryMask, Dims, ProbabilityVolume, Volume3, UNIT_SPACING};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mask(dims: Dims, density: f64, seed: u64) -> BinaryMask {
    let mut r = rng(seed);
    BinaryMask::from_fn(dims, UNIT_SPACING, |_| r.gen_bool(density)).unwrap()
}

/// Union of a few random axis-aligned boxes: blobby masks with interiors.
pub fn random_blobs(dims: Dims, boxes: usize, seed: u64) -> BinaryMask {
    let mut r = rng(seed);
    let rects: Vec<([usize; 3], [usize; 3])> = (0..boxes)
        .map(|_| {
            let lo = [0, 1, 2].map(|a| r.gen_range(0..dims[a]));
            let hi = [0, 1, 2].map(|a| (lo[a] + r.gen_range(1..=dims[a].div_ceil(2))).min(dims[a]));
            (lo, hi)
        })
        .collect();
    BinaryMask::from_fn(dims, UNIT_SPACING, |p| {
        rects
            .iter()
            .any(|(lo, hi)| (0..3).all(|a| p[a] >= lo[a] && p[a] < hi[a]))
    })
    .unwrap()
}

pub fn random_probability(dims: Dims, lo: f64, hi: f64, seed: u64) -> ProbabilityVolume {
    let mut r = rng(seed);
    let v = Volume3::from_fn(dims, UNIT_SPACING, |_| r.gen_range(lo..=hi)).unwrap();
    ProbabilityVolume::new(v).unwrap()
}

pub fn cells(dims: Dims) -> impl Iterator<Item = [usize; 3]> {
    (0..dims[2]).flat_map(move |z| (0..dims[1]).flat_map(move |y| (0..dims[0]).map(move |x| [x, y, z])))
}

/// Neighbor offsets whose squared length is at most `max_sq`
/// (1: faces, 2: faces and edges, 3: full cube).
pub fn offsets(max_sq: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let s = dx * dx + dy * dy + dz * dz;
                if s > 0 && s <= max_sq {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

pub fn shifted(dims: Dims, p: [usize; 3], d: [i64; 3]) -> Option<[usize; 3]> {
    let mut q = [0usize; 3];
    for a in 0..3 {
        let c = p[a] as i64 + d[a];
        if c < 0 || c >= dims[a] as i64 {
            return None;
        }
        q[a] = c as usize;
    }
    Some(q)
}

/// Component id per voxel (0 for background) by breadth-first flood fill.
pub fn flood_components(m: &BinaryMask, max_sq: i64) -> (Vec<usize>, usize) {
    let dims = m.dims();
    let v = m.volume();
    let offs = offsets(max_sq);
    let mut label = vec![0usize; m.len()];
    let mut count = 0;
    for p in cells(dims) {
        if !m.contains(p) || label[v.index(p)] != 0 {
            continue;
        }
        count += 1;
        label[v.index(p)] = count;
        let mut queue = VecDeque::from([p]);
        while let Some(c) = queue.pop_front() {
            for &d in &offs {
                if let Some(q) = shifted(dims, c, d) {
                    if m.contains(q) && label[v.index(q)] == 0 {
                        label[v.index(q)] = count;
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    (label, count)
}

pub fn component_count(m: &BinaryMask) -> usize {
    flood_components(m, 3).1
}

/// Squared distance from each domain voxel to the nearest reference voxel by
/// exhaustive search; 0 outside the domain.
pub fn brute_edt_squared(reference: &BinaryMask, domain: &BinaryMask) -> Vec<i64> {
    let dims = reference.dims();
    let refs: Vec<[usize; 3]> = cells(dims).filter(|&p| reference.contains(p)).collect();
    cells(dims)
        .map(|p| {
            if !domain.contains(p) {
                return 0;
            }
            refs.iter()
                .map(|q| (0..3).map(|a| (p[a] as i64 - q[a] as i64).pow(2)).sum::<i64>())
                .min()
                .unwrap()
        })
        .collect()
}

/// Erosion (`all = true`) or dilation by scanning the offsets directly;
/// out-of-grid voxels read as `border`.
pub fn scan_morphology(m: &BinaryMask, max_sq: i64, border: bool, all: bool) -> Vec<bool> {
    let dims = m.dims();
    let offs = offsets(max_sq);
    cells(dims)
        .map(|p| {
            let vals: Vec<bool> = offs
                .iter()
                .map(|&d| shifted(dims, p, d).map_or(border, |q| m.contains(q)))
                .collect();
            if all {
                m.contains(p) && vals.iter().all(|&b| b)
            } else {
                m.contains(p) || vals.iter().any(|&b| b)
            }
        })
        .collect()
}

pub fn bits(m: &BinaryMask) -> Vec<bool> {
    (0..m.len()).map(|i| m.is_set(i)).collect()
}

/// Solid cylinder of `radius` along z through the centre of the xy plane,
/// spanning `z0..z1`.
pub fn z_tube(dims: Dims, radius: f64, z0: usize, z1: usize) -> BinaryMask {
    let cx = (dims[0] as f64 - 1.0) / 2.0;
    let cy = (dims[1] as f64 - 1.0) / 2.0;
    BinaryMask::from_fn(dims, UNIT_SPACING, |[x, y, z]| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        z >= z0 && z < z1 && dx * dx + dy * dy <= radius * radius
    })
    .unwrap()
}
