//! Topology-preserving 3D thinning.
//!
//! Six directional sub-iterations (up, down, north, south, east, west) peel
//! border voxels that are simple points for the (26, 6) connectivity pair.
//! Voxels with a single 26-neighbor are curve ends and are never removed.
//! Candidates found in a sub-iteration are re-tested one by one, in linear
//! index order, just before deletion.

use std::sync::OnceLock;

use super::Centerline;
use crate::volume::BinaryMask;

const CENTRE: usize = 13;

#[inline]
fn bit(dx: i32, dy: i32, dz: i32) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

fn pos(k: usize) -> [i32; 3] {
    [(k % 3) as i32 - 1, ((k / 3) % 3) as i32 - 1, (k / 9) as i32 - 1]
}

struct Tables {
    adj26: [u32; 27],
    adj6: [u32; 27],
    n18: u32,
    faces: u32,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut adj26 = [0u32; 27];
        let mut adj6 = [0u32; 27];
        let mut n18 = 0u32;
        let mut faces = 0u32;
        for a in 0..27 {
            let pa = pos(a);
            let l1: i32 = pa.iter().map(|v| v.abs()).sum();
            if a != CENTRE && l1 <= 2 {
                n18 |= 1 << a;
            }
            if l1 == 1 {
                faces |= 1 << a;
            }
            for b in 0..27 {
                if a == b {
                    continue;
                }
                let pb = pos(b);
                let d: Vec<i32> = (0..3).map(|i| (pa[i] - pb[i]).abs()).collect();
                if d.iter().all(|&v| v <= 1) {
                    adj26[a] |= 1 << b;
                    if d.iter().sum::<i32>() == 1 {
                        adj6[a] |= 1 << b;
                    }
                }
            }
        }
        Tables {
            adj26,
            adj6,
            n18,
            faces,
        }
    })
}

/// Number of components of `set` under `adj` that intersect `seeds`.
fn count_components(set: u32, adj: &[u32; 27], seeds: u32) -> u32 {
    let mut remaining = set;
    let mut count = 0;
    while remaining != 0 {
        let start = remaining.trailing_zeros() as usize;
        let mut comp = 1u32 << start;
        let mut frontier = comp;
        while frontier != 0 {
            let mut next = 0u32;
            let mut f = frontier;
            while f != 0 {
                let b = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[b] & set;
            }
            frontier = next & !comp;
            comp |= next;
        }
        remaining &= !comp;
        if comp & seeds != 0 {
            count += 1;
        }
    }
    count
}

/// Simple-point test on a 3x3x3 neighborhood bitmask (centre bit ignored).
pub(crate) fn is_simple(nb: u32) -> bool {
    let t = tables();
    let object = nb & !(1 << CENTRE) & ((1 << 27) - 1);
    if count_components(object, &t.adj26, u32::MAX) != 1 {
        return false;
    }
    let background = !nb & t.n18;
    count_components(background, &t.adj6, t.faces) == 1
}

struct Padded {
    dims: [usize; 3],
    data: Vec<u8>,
    offsets: [isize; 27],
}

impl Padded {
    fn new(m: &BinaryMask) -> Self {
        let [nx, ny, nz] = m.dims();
        let dims = [nx + 2, ny + 2, nz + 2];
        let mut data = vec![0u8; dims[0] * dims[1] * dims[2]];
        for i in m.indices() {
            let [x, y, z] = m.volume().coords(i);
            data[(x + 1) + dims[0] * ((y + 1) + dims[1] * (z + 1))] = 1;
        }
        let mut offsets = [0isize; 27];
        for (k, o) in offsets.iter_mut().enumerate() {
            let [dx, dy, dz] = pos(k);
            *o = dx as isize + dims[0] as isize * (dy as isize + dims[1] as isize * dz as isize);
        }
        Padded { dims, data, offsets }
    }

    #[inline]
    fn neighborhood(&self, i: usize) -> u32 {
        let mut nb = 0u32;
        for (k, &o) in self.offsets.iter().enumerate() {
            if self.data[(i as isize + o) as usize] != 0 {
                nb |= 1 << k;
            }
        }
        nb
    }

    fn unpad(&self, like: &BinaryMask) -> BinaryMask {
        let [nx, ny, nz] = like.dims();
        let mut bits = Vec::with_capacity(nx * ny * nz);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    bits.push(self.data[(x + 1) + self.dims[0] * ((y + 1) + self.dims[1] * (z + 1))] != 0);
                }
            }
        }
        BinaryMask::from_bools(like.dims(), like.spacing(), bits)
    }
}

fn removable(nb: u32) -> bool {
    let neighbors = (nb & !(1 << CENTRE)).count_ones();
    neighbors != 1 && is_simple(nb)
}

/// Reduce `m` to a curve skeleton with the same 26-connected topology.
pub fn thin(m: &BinaryMask) -> Centerline {
    let mut grid = Padded::new(m);
    let mut alive: Vec<usize> = (0..grid.data.len()).filter(|&i| grid.data[i] != 0).collect();
    let directions = [
        bit(0, 0, 1),
        bit(0, 0, -1),
        bit(0, 1, 0),
        bit(0, -1, 0),
        bit(1, 0, 0),
        bit(-1, 0, 0),
    ];
    let mut candidates = Vec::new();
    loop {
        let mut removed = 0usize;
        for &dir in &directions {
            candidates.clear();
            let dir_offset = grid.offsets[dir];
            for &i in &alive {
                if grid.data[i] == 0 || grid.data[(i as isize + dir_offset) as usize] != 0 {
                    continue;
                }
                if removable(grid.neighborhood(i)) {
                    candidates.push(i);
                }
            }
            for &i in &candidates {
                if removable(grid.neighborhood(i)) {
                    grid.data[i] = 0;
                    removed += 1;
                }
            }
        }
        if removed == 0 {
            break;
        }
        alive.retain(|&i| grid.data[i] != 0);
    }
    Centerline::from_mask_unchecked(grid.unpad(m))
}
