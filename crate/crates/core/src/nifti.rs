//! NIfTI-1 reading and writing, restricted to single-file `n+1` volumes with
//! int16 or float32 samples.
//!
//! Only the header fields the analysis needs are interpreted. Spatial
//! transforms (qform/sform) are ignored: voxels are assumed stored right to
//! left along x, anterior to posterior along y and superior to inferior
//! along z. See [`AnatomicalLabel`].

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use serde::Serialize;
use thiserror::Error;

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DEFAULT_VOX_OFFSET: f32 = 352.0;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const MAGIC: usize = 344;
}

const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("header needs {HEADER_SIZE} bytes, got {0}")]
    ShortHeader(usize),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("sizeof_hdr is {0}, expected 348")]
    BadHeaderSize(i32),
    #[error("dim[0] = {0} is not in 1..=7 under either byte order")]
    BadRank(i16),
    #[error("unsupported datatype code {0} (only 4 = int16 and 16 = float32)")]
    UnsupportedDatatype(i16),
    #[error("bitpix {bitpix} does not match datatype code {datatype}")]
    BitpixMismatch { datatype: i16, bitpix: i16 },
    #[error("vox_offset {0} is before the end of the header")]
    BadVoxOffset(f32),
    #[error("dimension {axis} has non-positive extent {extent}")]
    BadDimension { axis: usize, extent: i16 },
    #[error("volumes must have rank 3 or 4, found {0}")]
    UnsupportedRank(i16),
    #[error("header/image pairs (ni1) are not supported; use a single .nii file")]
    PairedFile,
    #[error("data truncated: expected {expected} bytes after offset, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("non-finite sample at voxel ({i},{j},{k}) frame {t}")]
    NonFiniteSample {
        i: usize,
        j: usize,
        k: usize,
        t: usize,
    },
    #[error("map dimensions {map:?} do not match template {template:?}")]
    DimMismatch {
        map: (usize, usize, usize),
        template: (usize, usize, usize),
    },
    #[error("voxel index ({i},{j},{k}) outside grid {dims:?}")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        dims: (usize, usize, usize),
    },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NiftiError + '_ {
    move |source| NiftiError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Int16,
    Float32,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Self::Int16 => 4,
            Self::Float32 => 16,
        }
    }

    pub fn bitpix(self) -> i16 {
        match self {
            Self::Int16 => 16,
            Self::Float32 => 32,
        }
    }

    fn from_code(code: i16) -> Option<Self> {
        match code {
            4 => Some(Self::Int16),
            16 => Some(Self::Float32),
            _ => None,
        }
    }

    fn bytes(self) -> usize {
        self.bitpix() as usize / 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Magic {
    /// `n+1`: header and data in one file.
    Single,
    /// `ni1`: separate `.hdr`/`.img` pair.
    Pair,
}

/// The interpreted subset of a NIfTI-1 header, normalised to native values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: Datatype,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub magic: Magic,
    pub endianness: Endianness,
}

impl NiftiHeader {
    /// A little-endian single-file header for a grid of the given extents.
    ///
    /// Trailing extents equal to 1 are still recorded; `dims.len()` sets `dim[0]`.
    pub fn for_grid(dims: &[usize], datatype: Datatype) -> Self {
        assert!((1..=7).contains(&dims.len()), "rank must be 1..=7");
        let mut dim = [1i16; 8];
        dim[0] = dims.len() as i16;
        for (slot, &d) in dim[1..].iter_mut().zip(dims) {
            *slot = i16::try_from(d).expect("extent fits in i16");
        }
        let mut pixdim = [0.0f32; 8];
        pixdim[1..=dims.len()].fill(1.0);
        pixdim[0] = 1.0;
        Self {
            dim,
            datatype,
            bitpix: datatype.bitpix(),
            pixdim,
            vox_offset: DEFAULT_VOX_OFFSET,
            scl_slope: 0.0,
            scl_inter: 0.0,
            magic: Magic::Single,
            endianness: Endianness::Little,
        }
    }

    pub fn rank(&self) -> usize {
        self.dim[0] as usize
    }

    pub fn spatial_dims(&self) -> (usize, usize, usize) {
        let d = |a: usize| self.dim[a].max(1) as usize;
        (d(1), d(2), d(3))
    }

    /// Encode into 348 header bytes in `self.endianness`.
    pub fn to_bytes(&self) -> [u8; HEADER_SIZE] {
        match self.endianness {
            Endianness::Little => self.encode::<LittleEndian>(),
            Endianness::Big => self.encode::<BigEndian>(),
        }
    }

    fn encode<B: ByteOrder>(&self) -> [u8; HEADER_SIZE] {
        use offsets::*;
        let mut buf = [0u8; HEADER_SIZE];
        B::write_i32(&mut buf[SIZEOF_HDR..], HEADER_SIZE as i32);
        for (n, &d) in self.dim.iter().enumerate() {
            B::write_i16(&mut buf[DIM + 2 * n..], d);
        }
        B::write_i16(&mut buf[DATATYPE..], self.datatype.code());
        B::write_i16(&mut buf[BITPIX..], self.bitpix);
        for (n, &p) in self.pixdim.iter().enumerate() {
            B::write_f32(&mut buf[PIXDIM + 4 * n..], p);
        }
        B::write_f32(&mut buf[VOX_OFFSET..], self.vox_offset);
        B::write_f32(&mut buf[SCL_SLOPE..], self.scl_slope);
        B::write_f32(&mut buf[SCL_INTER..], self.scl_inter);
        let magic = match self.magic {
            Magic::Single => MAGIC_SINGLE,
            Magic::Pair => MAGIC_PAIR,
        };
        buf[MAGIC..MAGIC + 4].copy_from_slice(magic);
        buf
    }
}

/// Parse the first 348 bytes of a NIfTI-1 file.
///
/// Byte order is inferred from `dim[0]`, which must fall in 1..=7 in the
/// file's own order.
pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader, NiftiError> {
    use offsets::*;
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::ShortHeader(bytes.len()));
    }
    let mut magic_bytes = [0u8; 4];
    magic_bytes.copy_from_slice(&bytes[MAGIC..MAGIC + 4]);
    let magic = match &magic_bytes {
        m if m == MAGIC_SINGLE => Magic::Single,
        m if m == MAGIC_PAIR => Magic::Pair,
        _ => return Err(NiftiError::BadMagic(magic_bytes)),
    };

    let rank_le = LittleEndian::read_i16(&bytes[DIM..]);
    let rank_be = BigEndian::read_i16(&bytes[DIM..]);
    let endianness = if (1..=7).contains(&rank_le) {
        Endianness::Little
    } else if (1..=7).contains(&rank_be) {
        Endianness::Big
    } else {
        return Err(NiftiError::BadRank(rank_le));
    };
    match endianness {
        Endianness::Little => decode::<LittleEndian>(bytes, magic, endianness),
        Endianness::Big => decode::<BigEndian>(bytes, magic, endianness),
    }
}

fn decode<B: ByteOrder>(
    bytes: &[u8],
    magic: Magic,
    endianness: Endianness,
) -> Result<NiftiHeader, NiftiError> {
    use offsets::*;
    let sizeof_hdr = B::read_i32(&bytes[SIZEOF_HDR..]);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(NiftiError::BadHeaderSize(sizeof_hdr));
    }
    let mut dim = [0i16; 8];
    for (n, d) in dim.iter_mut().enumerate() {
        *d = B::read_i16(&bytes[DIM + 2 * n..]);
    }
    let code = B::read_i16(&bytes[DATATYPE..]);
    let datatype = Datatype::from_code(code).ok_or(NiftiError::UnsupportedDatatype(code))?;
    let bitpix = B::read_i16(&bytes[BITPIX..]);
    if bitpix != datatype.bitpix() {
        return Err(NiftiError::BitpixMismatch {
            datatype: code,
            bitpix,
        });
    }
    let mut pixdim = [0f32; 8];
    for (n, p) in pixdim.iter_mut().enumerate() {
        *p = B::read_f32(&bytes[PIXDIM + 4 * n..]);
    }
    let vox_offset = B::read_f32(&bytes[VOX_OFFSET..]);
    if magic == Magic::Single && !(vox_offset >= HEADER_SIZE as f32) {
        return Err(NiftiError::BadVoxOffset(vox_offset));
    }
    Ok(NiftiHeader {
        dim,
        datatype,
        bitpix,
        pixdim,
        vox_offset,
        scl_slope: B::read_f32(&bytes[SCL_SLOPE..]),
        scl_inter: B::read_f32(&bytes[SCL_INTER..]),
        magic,
        endianness,
    })
}

/// Storage direction of each voxel axis, fixed for every volume this crate reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnatomicalLabel {
    pub x_sense: &'static str,
    pub y_sense: &'static str,
    pub z_sense: &'static str,
}

pub const CONVENTION: AnatomicalLabel = AnatomicalLabel {
    x_sense: "right->left",
    y_sense: "anterior->posterior",
    z_sense: "superior->inferior",
};

impl fmt::Display for AnatomicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x: {}, y: {}, z: {}",
            self.x_sense, self.y_sense, self.z_sense
        )
    }
}

/// A 4D grid of samples, x fastest, then y, z and t.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid4D {
    dims: (usize, usize, usize, usize),
    samples: Vec<f64>,
}

impl VolumeGrid4D {
    /// Wrap samples already in storage order. Panics if the count or
    /// finiteness invariants fail; use [`read_volume`] for untrusted data.
    pub fn new(dims: (usize, usize, usize, usize), samples: Vec<f64>) -> Self {
        let (nx, ny, nz, nt) = dims;
        assert!(nx > 0 && ny > 0 && nz > 0 && nt > 0, "extents must be positive");
        assert_eq!(samples.len(), nx * ny * nz * nt, "sample count");
        assert!(samples.iter().all(|v| v.is_finite()), "samples must be finite");
        Self { dims, samples }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.dims
    }

    pub fn spatial_dims(&self) -> (usize, usize, usize) {
        (self.dims.0, self.dims.1, self.dims.2)
    }

    pub fn frames(&self) -> usize {
        self.dims.3
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn orientation(&self) -> AnatomicalLabel {
        CONVENTION
    }

    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    pub fn voxel_coords(&self, v: usize) -> (usize, usize, usize) {
        let (nx, ny, _, _) = self.dims;
        (v % nx, (v / nx) % ny, v / (nx * ny))
    }

    pub fn get(&self, i: usize, j: usize, k: usize, t: usize) -> f64 {
        self.samples[self.linear_index(i, j, k) + self.voxel_count() * t]
    }

    /// Time series of one voxel, taken at stride `nx*ny*nz`.
    pub fn series(&self, i: usize, j: usize, k: usize) -> Vec<f64> {
        let v = self.linear_index(i, j, k);
        self.samples
            .iter()
            .skip(v)
            .step_by(self.voxel_count())
            .copied()
            .collect()
    }
}

/// Decode a whole single-file volume held in memory.
pub fn decode_volume(bytes: &[u8]) -> Result<VolumeGrid4D, NiftiError> {
    let header = parse_header(bytes)?;
    if header.magic == Magic::Pair {
        return Err(NiftiError::PairedFile);
    }
    let rank = header.dim[0];
    if rank != 3 && rank != 4 {
        return Err(NiftiError::UnsupportedRank(rank));
    }
    for axis in 1..=rank as usize {
        if header.dim[axis] <= 0 {
            return Err(NiftiError::BadDimension {
                axis,
                extent: header.dim[axis],
            });
        }
    }
    let (nx, ny, nz) = header.spatial_dims();
    let nt = if rank == 4 { header.dim[4] as usize } else { 1 };
    let count = nx * ny * nz * nt;

    let offset = header.vox_offset as usize;
    let expected = count * header.datatype.bytes();
    let found = bytes.len().saturating_sub(offset);
    if found < expected {
        return Err(NiftiError::TruncatedData { expected, found });
    }
    let data = &bytes[offset..offset + expected];

    let mut samples = vec![0f64; count];
    match (header.datatype, header.endianness) {
        (Datatype::Int16, Endianness::Little) => read_i16::<LittleEndian>(data, &mut samples),
        (Datatype::Int16, Endianness::Big) => read_i16::<BigEndian>(data, &mut samples),
        (Datatype::Float32, Endianness::Little) => read_f32::<LittleEndian>(data, &mut samples),
        (Datatype::Float32, Endianness::Big) => read_f32::<BigEndian>(data, &mut samples),
    }
    if header.scl_slope != 0.0 {
        let slope = f64::from(header.scl_slope);
        let inter = f64::from(header.scl_inter);
        for s in &mut samples {
            *s = slope * *s + inter;
        }
    }
    if let Some(n) = samples.iter().position(|v| !v.is_finite()) {
        let voxels = nx * ny * nz;
        let v = n % voxels;
        return Err(NiftiError::NonFiniteSample {
            i: v % nx,
            j: (v / nx) % ny,
            k: v / (nx * ny),
            t: n / voxels,
        });
    }
    Ok(VolumeGrid4D {
        dims: (nx, ny, nz, nt),
        samples,
    })
}

fn read_i16<B: ByteOrder>(data: &[u8], out: &mut [f64]) {
    for (s, chunk) in out.iter_mut().zip(data.chunks_exact(2)) {
        *s = f64::from(B::read_i16(chunk));
    }
}

fn read_f32<B: ByteOrder>(data: &[u8], out: &mut [f64]) {
    for (s, chunk) in out.iter_mut().zip(data.chunks_exact(4)) {
        *s = f64::from(B::read_f32(chunk));
    }
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<VolumeGrid4D, NiftiError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_volume(&bytes)
}

fn encode_f32(header: &NiftiHeader, samples: impl Iterator<Item = f64>) -> Vec<u8> {
    let offset = header.vox_offset as usize;
    let mut out = Vec::with_capacity(offset);
    out.extend_from_slice(&header.to_bytes());
    out.resize(offset, 0);
    let mut word = [0u8; 4];
    for s in samples {
        match header.endianness {
            Endianness::Little => LittleEndian::write_f32(&mut word, s as f32),
            Endianness::Big => BigEndian::write_f32(&mut word, s as f32),
        }
        out.extend_from_slice(&word);
    }
    out
}

/// Encode a volume as a float32 single-file NIfTI in the given byte order.
pub fn encode_volume(volume: &VolumeGrid4D, endianness: Endianness) -> Vec<u8> {
    let (nx, ny, nz, nt) = volume.dims();
    let mut header = NiftiHeader::for_grid(&[nx, ny, nz, nt], Datatype::Float32);
    header.endianness = endianness;
    encode_f32(&header, volume.samples().iter().copied())
}

pub fn write_volume(volume: &VolumeGrid4D, path: impl AsRef<Path>) -> Result<(), NiftiError> {
    let path = path.as_ref();
    write_bytes(path, &encode_volume(volume, Endianness::Little))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), NiftiError> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))?;
    file.flush().map_err(io_err(path))
}

/// A 3D map ready for serialisation: values plus definedness per voxel.
pub trait VoxelMap {
    fn dims(&self) -> (usize, usize, usize);
    fn values(&self) -> &[f64];
    fn defined(&self) -> &[bool];
}

/// Path of the undefined-voxel sidecar written next to a map file.
pub fn sidecar_path(map_path: &Path) -> PathBuf {
    map_path.with_extension("undefined.txt")
}

/// Write a float32 3D map using the template's voxel sizes, plus the
/// undefined-voxel sidecar (one zero-based `i j k` per line).
///
/// Undefined voxels are stored as 0.
pub fn write_map(
    map: &impl VoxelMap,
    template: &NiftiHeader,
    path: impl AsRef<Path>,
) -> Result<PathBuf, NiftiError> {
    let path = path.as_ref();
    let dims = map.dims();
    if dims != template.spatial_dims() {
        return Err(NiftiError::DimMismatch {
            map: dims,
            template: template.spatial_dims(),
        });
    }
    let mut header = NiftiHeader::for_grid(&[dims.0, dims.1, dims.2], Datatype::Float32);
    header.pixdim[1..4].copy_from_slice(&template.pixdim[1..4]);
    let samples = map
        .values()
        .iter()
        .zip(map.defined())
        .map(|(&v, &d)| if d { v } else { 0.0 });
    write_bytes(path, &encode_f32(&header, samples))?;

    let sidecar = sidecar_path(path);
    let mut text = String::new();
    for (v, _) in map.defined().iter().enumerate().filter(|(_, &d)| !d) {
        let i = v % dims.0;
        let j = (v / dims.0) % dims.1;
        let k = v / (dims.0 * dims.1);
        text.push_str(&format!("{i} {j} {k}\n"));
    }
    write_bytes(&sidecar, text.as_bytes())?;
    Ok(sidecar)
}

/// Parse an undefined-voxel sidecar back into zero-based triples.
pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Vec<(usize, usize, usize)>, NiftiError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: &str| NiftiError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("malformed sidecar line {line:?}"),
        ),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let parts: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad(line))?;
            match parts[..] {
                [i, j, k] => Ok((i, j, k)),
                _ => Err(bad(line)),
            }
        })
        .collect()
}

/// Describe where a voxel sits relative to the edges of the grid.
///
/// Corners get exact words ("rightmost, most anterior, most superior");
/// interior positions report their offset from the right/anterior/superior edge.
pub fn voxel_to_anatomical(
    (i, j, k): (usize, usize, usize),
    dims: (usize, usize, usize),
) -> Result<String, NiftiError> {
    let (nx, ny, nz) = dims;
    if i >= nx || j >= ny || k >= nz {
        return Err(NiftiError::IndexOutOfRange { i, j, k, dims });
    }
    let axis = |idx: usize, n: usize, first: &str, last: &str, from: &str| {
        if idx == 0 {
            first.to_string()
        } else if idx == n - 1 {
            last.to_string()
        } else {
            format!("{idx} of {} steps from {from}", n - 1)
        }
    };
    Ok(format!(
        "{}, {}, {}",
        axis(i, nx, "rightmost", "leftmost", "right"),
        axis(j, ny, "most anterior", "most posterior", "anterior"),
        axis(k, nz, "most superior", "most inferior", "superior"),
    ))
}
