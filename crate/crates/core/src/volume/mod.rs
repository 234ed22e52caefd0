//! Dense 3D grids and the mask / probability views used throughout the crate.
//!
//! All volumes are stored x-fastest: the linear index of voxel `(x, y, z)` is
//! `x + nx * (y + ny * z)`.

mod components;
mod neighborhood;
mod patches;

pub use components::{connected_components, largest_component, LabelVolume};
pub use neighborhood::Connectivity;
pub use patches::{lung_window_bounds, sliding_windows, AxisRange, PatchGrid};

pub(crate) use neighborhood::{offsets, CROSS6, CUBE26};

use crate::error::{ensure_same_dims, Error, Result};

/// Voxel counts `[nx, ny, nz]`.
pub type Dims = [usize; 3];
/// Millimetres per voxel `[sx, sy, sz]`.
pub type Spacing = [f64; 3];

pub const UNIT_SPACING: Spacing = [1.0, 1.0, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct Volume3<T> {
    dims: Dims,
    spacing: Spacing,
    data: Vec<T>,
}

fn check_geometry(dims: Dims, spacing: Spacing) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::param(format!("dims must be positive, got {dims:?}")));
    }
    if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::param(format!(
            "spacing must be finite and positive, got {spacing:?}"
        )));
    }
    Ok(())
}

impl<T> Volume3<T> {
    pub fn from_vec(dims: Dims, spacing: Spacing, data: Vec<T>) -> Result<Self> {
        check_geometry(dims, spacing)?;
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::param(format!(
                "data length {} does not match dims {dims:?} ({expected} voxels)",
                data.len()
            )));
        }
        Ok(Volume3 { dims, spacing, data })
    }

    pub fn from_fn(dims: Dims, spacing: Spacing, mut f: impl FnMut([usize; 3]) -> T) -> Result<Self> {
        check_geometry(dims, spacing)?;
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f([x, y, z]));
                }
            }
        }
        Ok(Volume3 { dims, spacing, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let nxy = nx * self.dims[1];
        [i % nx, (i / nx) % self.dims[1], i / nxy]
    }

    /// Neighbor of `p` displaced by `off`, or `None` when it falls outside.
    #[inline]
    pub fn offset(&self, p: [usize; 3], off: [i32; 3]) -> Option<[usize; 3]> {
        let mut q = [0usize; 3];
        for a in 0..3 {
            let c = p[a] as i64 + off[a] as i64;
            if c < 0 || c >= self.dims[a] as i64 {
                return None;
            }
            q[a] = c as usize;
        }
        Some(q)
    }

    pub fn get(&self, p: [usize; 3]) -> &T {
        &self.data[self.index(p)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Volume3<U> {
        Volume3 {
            dims: self.dims,
            spacing: self.spacing,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// A volume with the same geometry holding `data`.
    pub fn with_data<U>(&self, data: Vec<U>) -> Result<Volume3<U>> {
        Volume3::from_vec(self.dims, self.spacing, data)
    }

    pub fn with_spacing(mut self, spacing: Spacing) -> Result<Self> {
        check_geometry(self.dims, spacing)?;
        self.spacing = spacing;
        Ok(self)
    }
}

impl<T: Clone> Volume3<T> {
    pub fn filled(dims: Dims, spacing: Spacing, value: T) -> Result<Self> {
        check_geometry(dims, spacing)?;
        Ok(Volume3 {
            dims,
            spacing,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        })
    }
}

/// A volume whose voxels are exactly 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask(Volume3<u8>);

impl BinaryMask {
    pub fn new(v: Volume3<u8>) -> Result<Self> {
        if let Some(i) = v.data.iter().position(|&b| b > 1) {
            return Err(Error::param(format!(
                "mask value {} at voxel {:?} is not 0 or 1",
                v.data[i],
                v.coords(i)
            )));
        }
        Ok(BinaryMask(v))
    }

    pub fn empty(dims: Dims, spacing: Spacing) -> Result<Self> {
        Ok(BinaryMask(Volume3::filled(dims, spacing, 0)?))
    }

    pub fn from_fn(dims: Dims, spacing: Spacing, mut f: impl FnMut([usize; 3]) -> bool) -> Result<Self> {
        Ok(BinaryMask(Volume3::from_fn(dims, spacing, |p| f(p) as u8)?))
    }

    /// Foreground voxels are the non-zero entries of `v`.
    pub fn from_nonzero<T: Default + PartialEq>(v: &Volume3<T>) -> Self {
        let zero = T::default();
        BinaryMask(v.map(|x| (*x != zero) as u8))
    }

    pub(crate) fn from_bools(dims: Dims, spacing: Spacing, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), dims[0] * dims[1] * dims[2]);
        BinaryMask(Volume3 {
            dims,
            spacing,
            data: bits.into_iter().map(u8::from).collect(),
        })
    }

    pub fn volume(&self) -> &Volume3<u8> {
        &self.0
    }

    pub fn into_volume(self) -> Volume3<u8> {
        self.0
    }

    pub fn dims(&self) -> Dims {
        self.0.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.0.spacing
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn is_set(&self, i: usize) -> bool {
        self.0.data[i] != 0
    }

    #[inline]
    pub fn contains(&self, p: [usize; 3]) -> bool {
        self.is_set(self.0.index(p))
    }

    pub fn count(&self) -> usize {
        self.0.data.iter().filter(|&&b| b != 0).count()
    }

    pub fn any(&self) -> bool {
        self.0.data.iter().any(|&b| b != 0)
    }

    /// Linear indices of foreground voxels, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.data.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i)
    }

    pub fn complement(&self) -> Self {
        BinaryMask(self.0.map(|&b| 1 - b))
    }

    fn zip(&self, other: &BinaryMask, what: &'static str, f: impl Fn(u8, u8) -> u8) -> Result<Self> {
        ensure_same_dims(what, self.dims(), other.dims())?;
        let data = self.0.data.iter().zip(&other.0.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask(Volume3 {
            dims: self.0.dims,
            spacing: self.0.spacing,
            data,
        }))
    }

    pub fn and(&self, other: &BinaryMask) -> Result<Self> {
        self.zip(other, "mask operand", |a, b| a & b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<Self> {
        self.zip(other, "mask operand", |a, b| a | b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> Result<Self> {
        self.zip(other, "mask operand", |a, b| a & (1 - b))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.0.data.iter().zip(&other.0.data).all(|(&a, &b)| a <= b)
    }

    pub fn to_f64(&self) -> Volume3<f64> {
        self.0.map(|&b| b as f64)
    }
}

/// A float volume whose values lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVolume(Volume3<f64>);

impl ProbabilityVolume {
    pub fn new(v: Volume3<f64>) -> Result<Self> {
        if let Some(i) = v.data.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::param(format!(
                "value {} at voxel {:?} lies outside [0, 1]",
                v.data[i],
                v.coords(i)
            )));
        }
        Ok(ProbabilityVolume(v))
    }

    pub(crate) fn new_unchecked(v: Volume3<f64>) -> Self {
        debug_assert!(v.data.iter().all(|x| (0.0..=1.0).contains(x)));
        ProbabilityVolume(v)
    }

    pub fn zeros(dims: Dims, spacing: Spacing) -> Result<Self> {
        Ok(ProbabilityVolume(Volume3::filled(dims, spacing, 0.0)?))
    }

    pub fn from_mask(m: &BinaryMask) -> Self {
        ProbabilityVolume(m.to_f64())
    }

    pub fn volume(&self) -> &Volume3<f64> {
        &self.0
    }

    pub fn into_volume(self) -> Volume3<f64> {
        self.0
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn dims(&self) -> Dims {
        self.0.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.0.spacing
    }

    /// Voxels with value `>= level`.
    pub fn threshold(&self, level: f64) -> BinaryMask {
        BinaryMask(self.0.map(|&x| (x >= level) as u8))
    }
}

/// Clip CT intensities to `[lo, hi]` HU and rescale linearly onto `[0, 1]`.
pub fn normalize_hu(v: &Volume3<i16>, lo: f64, hi: f64) -> Result<ProbabilityVolume> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::param(format!("HU window requires lo < hi, got [{lo}, {hi}]")));
    }
    let span = hi - lo;
    Ok(ProbabilityVolume(v.map(|&h| ((h as f64 - lo) / span).clamp(0.0, 1.0))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hu(values: &[i16]) -> Volume3<i16> {
        Volume3::from_vec([values.len(), 1, 1], UNIT_SPACING, values.to_vec()).unwrap()
    }

    #[test]
    fn normalize_hu_window() {
        let out = normalize_hu(&hu(&[-1000, 600, -200, -3000, 3000]), -1000.0, 600.0).unwrap();
        assert_eq!(out.data(), &[0.0, 1.0, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn normalize_hu_rejects_inverted_window() {
        assert!(matches!(
            normalize_hu(&hu(&[0]), 600.0, -1000.0),
            Err(Error::Parameter(_))
        ));
        assert!(normalize_hu(&hu(&[0]), 5.0, 5.0).is_err());
    }

    #[test]
    fn normalize_hu_is_monotone() {
        let values: Vec<i16> = (-1200..=800).step_by(7).collect();
        let out = normalize_hu(&hu(&values), -1000.0, 600.0).unwrap();
        assert!(out.data().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn volume_geometry_is_validated() {
        assert!(Volume3::from_vec([2, 2, 2], UNIT_SPACING, vec![0u8; 7]).is_err());
        assert!(Volume3::from_vec([0, 2, 2], UNIT_SPACING, Vec::<u8>::new()).is_err());
        assert!(Volume3::from_vec([1, 1, 1], [1.0, 0.0, 1.0], vec![0u8]).is_err());
        assert!(Volume3::from_vec([1, 1, 1], [1.0, f64::NAN, 1.0], vec![0u8]).is_err());
    }

    #[test]
    fn index_and_coords_agree() {
        let v = Volume3::filled([3, 4, 5], UNIT_SPACING, 0u8).unwrap();
        for i in 0..v.len() {
            assert_eq!(v.index(v.coords(i)), i);
        }
        assert_eq!(v.index([1, 0, 0]), 1);
        assert_eq!(v.index([0, 1, 0]), 3);
        assert_eq!(v.index([0, 0, 1]), 12);
    }

    #[test]
    fn mask_rejects_non_binary() {
        let v = Volume3::from_vec([2, 1, 1], UNIT_SPACING, vec![0u8, 2]).unwrap();
        assert!(BinaryMask::new(v).is_err());
    }

    #[test]
    fn probability_rejects_out_of_range() {
        let v = Volume3::from_vec([2, 1, 1], UNIT_SPACING, vec![0.5, 1.5]).unwrap();
        assert!(ProbabilityVolume::new(v).is_err());
        let v = Volume3::from_vec([1, 1, 1], UNIT_SPACING, vec![f64::NAN]).unwrap();
        assert!(ProbabilityVolume::new(v).is_err());
    }
}
