//! Minimal single-file NIfTI-1 reader and writer (`.nii` and `.nii.gz`).
//!
//! Only 3D volumes with datatypes uint8, int16 and float32 are written;
//! float64 is also accepted on read. The 348-byte header is kept verbatim so
//! orientation fields survive a read/modify/write cycle untouched.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::error::Result;
use crate::volume::{BinaryMask, Dims, ProbabilityVolume, Spacing, Volume3};

pub const HEADER_SIZE: usize = 348;
/// Header plus the four-byte extension flag.
pub const VOX_OFFSET: usize = 352;
const MAGIC: [u8; 4] = *b"n+1\0";

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("bad NIfTI magic {found:?}, expected \"n+1\\0\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported NIfTI datatype code {code}")]
    UnsupportedDatatype { code: i16 },

    #[error("truncated NIfTI {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid NIfTI header field {field}: {value}")]
    BadHeader { field: &'static str, value: String },

    #[error("value {value} cannot be stored as {datatype:?}")]
    ValueOutOfRange { datatype: Datatype, value: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Datatype {
    U8,
    I16,
    F32,
    F64,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::U8 => 2,
            Datatype::I16 => 4,
            Datatype::F32 => 16,
            Datatype::F64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Result<Self, NiftiError> {
        match code {
            2 => Ok(Datatype::U8),
            4 => Ok(Datatype::I16),
            16 => Ok(Datatype::F32),
            64 => Ok(Datatype::F64),
            _ => Err(NiftiError::UnsupportedDatatype { code }),
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Datatype::U8 => 1,
            Datatype::I16 => 2,
            Datatype::F32 => 4,
            Datatype::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NiftiHeader {
    pub dims: Dims,
    pub datatype: Datatype,
    pub pixdim: Spacing,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub vox_offset: usize,
    pub little_endian: bool,
    raw: Vec<u8>,
}

impl NiftiHeader {
    /// A fresh little-endian header with identity scaling and no orientation.
    pub fn new(dims: Dims, spacing: Spacing, datatype: Datatype) -> Self {
        let mut raw = vec![0u8; HEADER_SIZE];
        raw[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
        raw[38] = b'r';
        raw[344..348].copy_from_slice(&MAGIC);
        NiftiHeader {
            dims,
            datatype,
            pixdim: spacing,
            scl_slope: 1.0,
            scl_inter: 0.0,
            vox_offset: VOX_OFFSET,
            little_endian: true,
            raw,
        }
    }

    /// The original 348 header bytes as read (or as last encoded).
    pub fn raw(&self) -> &[u8] {
        &self.raw
    }

    /// Same orientation and metadata, new geometry and datatype.
    pub fn derive(&self, dims: Dims, spacing: Spacing, datatype: Datatype) -> Self {
        let mut h = self.clone();
        h.dims = dims;
        h.pixdim = spacing;
        h.datatype = datatype;
        h.scl_slope = 1.0;
        h.scl_inter = 0.0;
        h.vox_offset = VOX_OFFSET;
        h
    }

    fn scaling(&self) -> Option<(f64, f64)> {
        let slope = self.scl_slope as f64;
        let inter = self.scl_inter as f64;
        if slope == 0.0 || !slope.is_finite() || !inter.is_finite() || (slope == 1.0 && inter == 0.0) {
            None
        } else {
            Some((slope, inter))
        }
    }

    fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Encode as little-endian, keeping every field not managed here.
    fn encode(&self) -> Vec<u8> {
        let mut raw = self.raw.clone();
        if !self.little_endian {
            swap_header_fields(&mut raw);
        }
        let mut put = |off: usize, bytes: &[u8]| raw[off..off + bytes.len()].copy_from_slice(bytes);
        put(0, &(HEADER_SIZE as i32).to_le_bytes());
        let dim = [
            3i16,
            self.dims[0] as i16,
            self.dims[1] as i16,
            self.dims[2] as i16,
            1,
            1,
            1,
            1,
        ];
        for (k, d) in dim.iter().enumerate() {
            put(40 + 2 * k, &d.to_le_bytes());
        }
        put(70, &self.datatype.code().to_le_bytes());
        put(72, &((self.datatype.bytes() * 8) as i16).to_le_bytes());
        for a in 0..3 {
            put(80 + 4 * a, &(self.pixdim[a] as f32).to_le_bytes());
        }
        put(108, &(VOX_OFFSET as f32).to_le_bytes());
        put(112, &self.scl_slope.to_le_bytes());
        put(116, &self.scl_inter.to_le_bytes());
        put(344, &MAGIC);
        raw
    }
}

/// Byte-swap the numeric fields of a big-endian header in place.
fn swap_header_fields(raw: &mut [u8]) {
    let swap = |raw: &mut [u8], off: usize, width: usize| raw[off..off + width].reverse();
    swap(raw, 0, 4);
    swap(raw, 32, 4);
    swap(raw, 36, 2);
    for k in 0..8 {
        swap(raw, 40 + 2 * k, 2);
    }
    for off in [56, 60, 64] {
        swap(raw, off, 4);
    }
    for off in [68, 70, 72, 74] {
        swap(raw, off, 2);
    }
    for k in 0..8 {
        swap(raw, 76 + 4 * k, 4);
    }
    for off in [108, 112, 116] {
        swap(raw, off, 4);
    }
    swap(raw, 120, 2);
    for off in [124, 128, 132, 136, 140, 144] {
        swap(raw, off, 4);
    }
    swap(raw, 252, 2);
    swap(raw, 254, 2);
    for k in 0..18 {
        swap(raw, 256 + 4 * k, 4);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NiftiData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl NiftiData {
    pub fn datatype(&self) -> Datatype {
        match self {
            NiftiData::U8(_) => Datatype::U8,
            NiftiData::I16(_) => Datatype::I16,
            NiftiData::F32(_) => Datatype::F32,
            NiftiData::F64(_) => Datatype::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            NiftiData::U8(v) => v.len(),
            NiftiData::I16(v) => v.len(),
            NiftiData::F32(v) => v.len(),
            NiftiData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn raw_f64(&self) -> Vec<f64> {
        match self {
            NiftiData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            NiftiData::I16(v) => v.iter().map(|&x| x as f64).collect(),
            NiftiData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            NiftiData::F64(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NiftiImage {
    pub header: NiftiHeader,
    pub data: NiftiData,
}

impl NiftiImage {
    pub fn dims(&self) -> Dims {
        self.header.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.header.pixdim
    }

    /// Voxel values with `scl_slope`/`scl_inter` applied when non-trivial.
    pub fn to_f64(&self) -> Result<Volume3<f64>> {
        let mut values = self.data.raw_f64();
        if let Some((slope, inter)) = self.header.scaling() {
            values.iter_mut().for_each(|v| *v = *v * slope + inter);
        }
        Volume3::from_vec(self.dims(), self.spacing(), values)
    }

    /// Foreground is every voxel with a non-zero (scaled) value.
    pub fn to_mask(&self) -> Result<BinaryMask> {
        Ok(BinaryMask::from_nonzero(&self.to_f64()?))
    }

    pub fn to_probability(&self) -> Result<ProbabilityVolume> {
        ProbabilityVolume::new(self.to_f64()?)
    }

    /// Raw int16 payload (CT intensities); other datatypes are rounded.
    pub fn to_i16(&self) -> Result<Volume3<i16>> {
        let v = self.to_f64()?;
        Ok(v.map(|&x| x.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16))
    }

    pub fn from_mask(m: &BinaryMask, template: Option<&NiftiHeader>) -> Self {
        let header = header_for(template, m.dims(), m.spacing(), Datatype::U8);
        NiftiImage {
            header,
            data: NiftiData::U8(m.volume().data().to_vec()),
        }
    }

    /// A uint8 image holding label values; anything other than 0 or 1 is
    /// rejected.
    pub fn from_u8_mask(v: &Volume3<u8>, template: Option<&NiftiHeader>) -> Result<Self> {
        if let Some(&bad) = v.data().iter().find(|&&x| x > 1) {
            return Err(NiftiError::ValueOutOfRange {
                datatype: Datatype::U8,
                value: format!("{bad} in a binary mask"),
            }
            .into());
        }
        let header = header_for(template, v.dims(), v.spacing(), Datatype::U8);
        Ok(NiftiImage {
            header,
            data: NiftiData::U8(v.data().to_vec()),
        })
    }

    /// Real-valued volumes are stored as float32.
    pub fn from_f64(v: &Volume3<f64>, template: Option<&NiftiHeader>) -> Self {
        let header = header_for(template, v.dims(), v.spacing(), Datatype::F32);
        NiftiImage {
            header,
            data: NiftiData::F32(v.data().iter().map(|&x| x as f32).collect()),
        }
    }

    pub fn from_i16(v: &Volume3<i16>, template: Option<&NiftiHeader>) -> Self {
        let header = header_for(template, v.dims(), v.spacing(), Datatype::I16);
        NiftiImage {
            header,
            data: NiftiData::I16(v.data().to_vec()),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        if self.data.len() != h.voxel_count() {
            return Err(NiftiError::BadHeader {
                field: "dim",
                value: format!("{:?} does not match {} payload values", h.dims, self.data.len()),
            }
            .into());
        }
        if h.dims.iter().any(|&n| n == 0 || n > i16::MAX as usize) {
            return Err(NiftiError::BadHeader {
                field: "dim",
                value: format!("{:?} cannot be stored in NIfTI-1", h.dims),
            }
            .into());
        }
        let mut header = h.clone();
        header.datatype = self.data.datatype();
        let mut out = header.encode();
        out.extend_from_slice(&[0u8; VOX_OFFSET - HEADER_SIZE]);
        match &self.data {
            NiftiData::U8(v) => out.extend_from_slice(v),
            NiftiData::I16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            NiftiData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            NiftiData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = parse_header(bytes)?;
        let n = header.voxel_count();
        let width = header.datatype.bytes();
        let start = header.vox_offset;
        let expected = start + n * width;
        if bytes.len() < expected {
            return Err(NiftiError::Truncated {
                what: "payload",
                expected,
                found: bytes.len(),
            }
            .into());
        }
        let payload = &bytes[start..expected];
        let le = header.little_endian;
        macro_rules! decode {
            ($t:ty, $w:expr) => {
                payload
                    .chunks_exact($w)
                    .map(|c| {
                        let a: [u8; $w] = c.try_into().unwrap();
                        if le {
                            <$t>::from_le_bytes(a)
                        } else {
                            <$t>::from_be_bytes(a)
                        }
                    })
                    .collect()
            };
        }
        let data = match header.datatype {
            Datatype::U8 => NiftiData::U8(payload.to_vec()),
            Datatype::I16 => NiftiData::I16(decode!(i16, 2)),
            Datatype::F32 => NiftiData::F32(decode!(f32, 4)),
            Datatype::F64 => NiftiData::F64(decode!(f64, 8)),
        };
        Ok(NiftiImage { header, data })
    }
}

fn header_for(template: Option<&NiftiHeader>, dims: Dims, spacing: Spacing, datatype: Datatype) -> NiftiHeader {
    match template {
        Some(t) => t.derive(dims, spacing, datatype),
        None => NiftiHeader::new(dims, spacing, datatype),
    }
}

fn parse_header(bytes: &[u8]) -> Result<NiftiHeader, NiftiError> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::Truncated {
            what: "header",
            expected: HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let size_le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let size_be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let little_endian = if size_le == HEADER_SIZE as i32 {
        true
    } else if size_be == HEADER_SIZE as i32 {
        false
    } else {
        return Err(NiftiError::BadHeader {
            field: "sizeof_hdr",
            value: size_le.to_string(),
        });
    };
    let magic: [u8; 4] = bytes[344..348].try_into().unwrap();
    if magic != MAGIC {
        return Err(NiftiError::BadMagic { found: magic });
    }
    let i16_at = |off: usize| {
        let a: [u8; 2] = bytes[off..off + 2].try_into().unwrap();
        if little_endian {
            i16::from_le_bytes(a)
        } else {
            i16::from_be_bytes(a)
        }
    };
    let f32_at = |off: usize| {
        let a: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
        if little_endian {
            f32::from_le_bytes(a)
        } else {
            f32::from_be_bytes(a)
        }
    };

    let ndim = i16_at(40);
    if !(1..=7).contains(&ndim) {
        return Err(NiftiError::BadHeader {
            field: "dim[0]",
            value: ndim.to_string(),
        });
    }
    let mut dims = [1usize; 3];
    for k in 1..=ndim as usize {
        let d = i16_at(40 + 2 * k);
        if d < 1 {
            return Err(NiftiError::BadHeader {
                field: "dim",
                value: format!("dim[{k}] = {d}"),
            });
        }
        if k <= 3 {
            dims[k - 1] = d as usize;
        } else if d != 1 {
            return Err(NiftiError::BadHeader {
                field: "dim",
                value: format!("dim[{k}] = {d}; only 3D volumes are supported"),
            });
        }
    }
    let datatype = Datatype::from_code(i16_at(70))?;
    let pixdim: [f64; 3] = std::array::from_fn(|a| {
        let s = f32_at(80 + 4 * a).abs() as f64;
        // missing spacing falls back to 1 mm
        if s.is_finite() && s > 0.0 {
            s
        } else {
            1.0
        }
    });
    let vox_offset = f32_at(108);
    if vox_offset.is_nan() || vox_offset < VOX_OFFSET as f32 || vox_offset.fract() != 0.0 {
        return Err(NiftiError::BadHeader {
            field: "vox_offset",
            value: vox_offset.to_string(),
        });
    }
    Ok(NiftiHeader {
        dims,
        datatype,
        pixdim,
        scl_slope: f32_at(112),
        scl_inter: f32_at(116),
        vox_offset: vox_offset as usize,
        little_endian,
        raw: bytes[..HEADER_SIZE].to_vec(),
    })
}

fn is_gzip_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

/// Read a `.nii` or `.nii.gz` file. Compression is detected from the gzip
/// signature, not the file name.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiImage> {
    let mut raw = Vec::new();
    BufReader::new(File::open(path.as_ref())?).read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut inflated = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut inflated)?;
        raw = inflated;
    }
    NiftiImage::from_bytes(&raw)
}

/// Write a single-file NIfTI-1 image; gzip-compressed when the path ends in
/// `.gz`.
pub fn write_nifti(path: impl AsRef<Path>, image: &NiftiImage) -> Result<()> {
    let path = path.as_ref();
    let bytes = image.to_bytes()?;
    let file = BufWriter::new(File::create(path)?);
    if is_gzip_path(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(&bytes)?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(&bytes)?;
        file.flush()?;
    }
    Ok(())
}

pub fn write_mask(path: impl AsRef<Path>, m: &BinaryMask, template: Option<&NiftiHeader>) -> Result<()> {
    write_nifti(path, &NiftiImage::from_mask(m, template))
}

pub fn write_f32(path: impl AsRef<Path>, v: &Volume3<f64>, template: Option<&NiftiHeader>) -> Result<()> {
    write_nifti(path, &NiftiImage::from_f64(v, template))
}
