//! Exact Euclidean distance transform.
//!
//! Squared distances are computed with three separable lower-envelope passes
//! (one per axis). In voxel units every intermediate is an integer and the
//! parabola intersections use floor division, so the result is exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boundary;
use crate::error::{ensure_same_dims, Error, Result};
use crate::volume::{BinaryMask, Dims, Volume3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceUnit {
    Voxels,
    Millimeters,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceVolume {
    pub values: Volume3<f64>,
    pub unit: DistanceUnit,
}

impl DistanceVolume {
    pub fn data(&self) -> &[f64] {
        self.values.data()
    }

    pub fn dims(&self) -> Dims {
        self.values.dims()
    }
}

const INF_I: i64 = 1 << 52;
const INF_F: f64 = 1e300;

trait Envelope: Copy + PartialOrd + Send + Sync {
    fn cost(self, w2: Self, x: usize, i: usize) -> Self;
    /// First abscissa at which the parabola rooted at `u` is no worse than
    /// the one rooted at `i` (`i < u`).
    fn separation(gi: Self, gu: Self, w2: Self, i: usize, u: usize) -> i64;
}

impl Envelope for i64 {
    #[inline]
    fn cost(self, w2: i64, x: usize, i: usize) -> i64 {
        let d = x as i64 - i as i64;
        w2 * d * d + self
    }

    #[inline]
    fn separation(gi: i64, gu: i64, w2: i64, i: usize, u: usize) -> i64 {
        let (i, u) = (i as i64, u as i64);
        let num = w2 * (u * u - i * i) + gu - gi;
        1 + num.div_euclid(2 * w2 * (u - i))
    }
}

impl Envelope for f64 {
    #[inline]
    fn cost(self, w2: f64, x: usize, i: usize) -> f64 {
        let d = x as f64 - i as f64;
        w2 * d * d + self
    }

    #[inline]
    fn separation(gi: f64, gu: f64, w2: f64, i: usize, u: usize) -> i64 {
        let (i, u) = (i as f64, u as f64);
        let s = ((w2 * (u * u - i * i) + gu - gi) / (2.0 * w2 * (u - i))).floor();
        1 + s.clamp(-1e15, 1e15) as i64
    }
}

/// `out[x] = min_i w2 * (x - i)^2 + g[i]` over one grid line.
fn lower_envelope<T: Envelope>(g: &[T], w2: T, out: &mut [T], roots: &mut Vec<usize>, starts: &mut Vec<i64>) {
    let m = g.len();
    roots.clear();
    starts.clear();
    roots.push(0);
    starts.push(0);
    for u in 1..m {
        while let (Some(&s), Some(&t)) = (roots.last(), starts.last()) {
            let t = t as usize;
            if g[s].cost(w2, t, s) > g[u].cost(w2, t, u) {
                roots.pop();
                starts.pop();
            } else {
                break;
            }
        }
        match roots.last() {
            None => {
                roots.push(u);
                starts.push(0);
            }
            Some(&s) => {
                let w = T::separation(g[s], g[u], w2, s, u).max(*starts.last().unwrap() + 1);
                if w < m as i64 {
                    roots.push(u);
                    starts.push(w);
                }
            }
        }
    }
    let mut q = roots.len() - 1;
    for x in (0..m).rev() {
        while q > 0 && (x as i64) < starts[q] {
            q -= 1;
        }
        out[x] = g[roots[q]].cost(w2, x, roots[q]);
    }
}

fn separable<T: Envelope>(dims: Dims, data: &mut [T], weights: [T; 3]) {
    let [nx, ny, nz] = dims;
    let nxy = nx * ny;

    data.par_chunks_mut(nx).for_each_init(
        || (Vec::new(), Vec::new(), Vec::new()),
        |(line, roots, starts), row| {
            line.clear();
            line.extend_from_slice(row);
            lower_envelope(line, weights[0], row, roots, starts);
        },
    );

    if ny > 1 {
        data.par_chunks_mut(nxy).for_each_init(
            || (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
            |(line, out, roots, starts), slab| {
                for x in 0..nx {
                    line.clear();
                    line.extend((0..ny).map(|y| slab[x + nx * y]));
                    out.clear();
                    out.extend_from_slice(line);
                    lower_envelope(line, weights[1], out, roots, starts);
                    for y in 0..ny {
                        slab[x + nx * y] = out[y];
                    }
                }
            },
        );
    }

    if nz > 1 {
        let src: &[T] = data;
        let columns: Vec<Vec<T>> = (0..nxy)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new(), Vec::new()),
                |(line, roots, starts), j| {
                    line.clear();
                    line.extend((0..nz).map(|z| src[j + nxy * z]));
                    let mut out = line.clone();
                    lower_envelope(line, weights[2], &mut out, roots, starts);
                    out
                },
            )
            .collect();
        for (j, col) in columns.into_iter().enumerate() {
            for (z, v) in col.into_iter().enumerate() {
                data[j + nxy * z] = v;
            }
        }
    }
}

fn check_inputs(reference: &BinaryMask, domain: &BinaryMask) -> Result<()> {
    ensure_same_dims("edt domain", reference.dims(), domain.dims())?;
    if !reference.any() {
        return Err(Error::empty("distance transform reference set has no voxels"));
    }
    Ok(())
}

/// Exact squared voxel distance from each `domain` voxel to the nearest
/// `reference` voxel; 0 outside the domain.
pub fn edt_squared(reference: &BinaryMask, domain: &BinaryMask) -> Result<Volume3<i64>> {
    check_inputs(reference, domain)?;
    let mut data: Vec<i64> = (0..reference.len())
        .map(|i| if reference.is_set(i) { 0 } else { INF_I })
        .collect();
    separable(reference.dims(), &mut data, [1, 1, 1]);
    for (i, d) in data.iter_mut().enumerate() {
        if !domain.is_set(i) {
            *d = 0;
        }
    }
    reference.volume().with_data(data)
}

/// Euclidean distance from each `domain` voxel to the nearest `reference`
/// voxel, in voxels or (when `spacing_aware`) in millimetres.
pub fn edt(reference: &BinaryMask, domain: &BinaryMask, spacing_aware: bool) -> Result<DistanceVolume> {
    if !spacing_aware {
        let sq = edt_squared(reference, domain)?;
        return Ok(DistanceVolume {
            values: sq.map(|&d| (d as f64).sqrt()),
            unit: DistanceUnit::Voxels,
        });
    }
    check_inputs(reference, domain)?;
    let s = reference.spacing();
    let mut data: Vec<f64> = (0..reference.len())
        .map(|i| if reference.is_set(i) { 0.0 } else { INF_F })
        .collect();
    separable(reference.dims(), &mut data, [s[0] * s[0], s[1] * s[1], s[2] * s[2]]);
    let values = data
        .iter()
        .enumerate()
        .map(|(i, &d)| if domain.is_set(i) { d.sqrt() } else { 0.0 })
        .collect();
    Ok(DistanceVolume {
        values: reference.volume().with_data(values)?,
        unit: DistanceUnit::Millimeters,
    })
}

/// Distance from every foreground voxel of `m` to the surface of `m`
/// (surface voxels themselves get 0).
pub fn boundary_distance(m: &BinaryMask, spacing_aware: bool) -> Result<DistanceVolume> {
    edt(&boundary(m), m, spacing_aware)
}

/// Largest distance value over the foreground of `over`.
pub fn max_distance(d: &DistanceVolume, over: &BinaryMask) -> Result<f64> {
    ensure_same_dims("max_distance mask", d.dims(), over.dims())?;
    over.indices()
        .map(|i| d.data()[i])
        .reduce(f64::max)
        .ok_or_else(|| Error::empty("max_distance over an empty mask"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::UNIT_SPACING;

    fn brute_line(g: &[i64], w2: i64) -> Vec<i64> {
        (0..g.len())
            .map(|x| (0..g.len()).map(|i| g[i].cost(w2, x, i)).min().unwrap())
            .collect()
    }

    #[test]
    fn envelope_matches_brute_force_on_lines() {
        let lines: Vec<Vec<i64>> = vec![
            vec![INF_I, 0, INF_I, INF_I, 5, 2, INF_I],
            vec![9, 4, 1, 0, 1, 4, 9],
            vec![0],
            vec![INF_I, INF_I, 3],
            vec![7, 7, 7, 7],
            vec![0, 100, 0, 100, 3, 1, 50, 2, 0],
        ];
        let (mut roots, mut starts) = (Vec::new(), Vec::new());
        for g in lines {
            for w2 in [1, 3] {
                let mut out = vec![0; g.len()];
                lower_envelope(&g, w2, &mut out, &mut roots, &mut starts);
                assert_eq!(out, brute_line(&g, w2), "line {g:?} w2 {w2}");
            }
        }
    }

    #[test]
    fn cube_centre_is_one_from_its_surface() {
        let m = BinaryMask::from_fn([3, 3, 3], UNIT_SPACING, |_| true).unwrap();
        let d = boundary_distance(&m, false).unwrap();
        assert_eq!(*d.values.get([1, 1, 1]), 1.0);
        assert_eq!(*d.values.get([0, 1, 1]), 0.0);
        assert_eq!(max_distance(&d, &m).unwrap(), 1.0);
    }

    #[test]
    fn single_voxel_has_zero_max_distance() {
        let m = BinaryMask::from_fn([3, 3, 3], UNIT_SPACING, |p| p == [1, 1, 1]).unwrap();
        let d = boundary_distance(&m, false).unwrap();
        assert_eq!(max_distance(&d, &m).unwrap(), 0.0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let empty = BinaryMask::empty([3, 3, 3], UNIT_SPACING).unwrap();
        assert!(matches!(edt(&empty, &empty, false), Err(Error::EmptyInput(_))));
        let d = DistanceVolume {
            values: Volume3::filled([3, 3, 3], UNIT_SPACING, 0.0).unwrap(),
            unit: DistanceUnit::Voxels,
        };
        assert!(max_distance(&d, &empty).is_err());
    }

    #[test]
    fn spacing_aware_scales_axes() {
        let reference = BinaryMask::from_fn([5, 5, 5], [0.5, 1.0, 2.0], |p| p == [0, 0, 0]).unwrap();
        let all = BinaryMask::from_fn([5, 5, 5], [0.5, 1.0, 2.0], |_| true).unwrap();
        let d = edt(&reference, &all, true).unwrap();
        assert_eq!(d.unit, DistanceUnit::Millimeters);
        assert!((d.values.get([4, 0, 0]) - 2.0).abs() < 1e-12);
        assert!((d.values.get([0, 3, 0]) - 3.0).abs() < 1e-12);
        assert!((d.values.get([0, 0, 2]) - 4.0).abs() < 1e-12);
        let expect = (1.0f64 + 4.0 + 16.0).sqrt();
        assert!((d.values.get([2, 2, 2]) - expect).abs() < 1e-12);
    }

    #[test]
    fn outside_domain_is_zero() {
        let reference = BinaryMask::from_fn([6, 1, 1], UNIT_SPACING, |p| p[0] == 0).unwrap();
        let domain = BinaryMask::from_fn([6, 1, 1], UNIT_SPACING, |p| p[0] < 3).unwrap();
        let sq = edt_squared(&reference, &domain).unwrap();
        assert_eq!(sq.data(), &[0, 1, 4, 0, 0, 0]);
    }
}
