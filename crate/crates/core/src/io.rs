//! On-disk containers.
//!
//! A field is stored as two files sharing a stem: `<stem>.f32` holds the raw
//! row-major little-endian `f32` values, `<stem>.json` describes them:
//!
//! ```json
//! {"shape": [32, 32], "dtype": "float32", "role": "image", "geometry": null}
//! ```
//!
//! Sinograms carry their [`TiltGeometry`](crate::tomo::TiltGeometry) so they
//! can be reconstructed without extra configuration. PNG export is for
//! viewing only: values are min-max scaled to 8 bits (a constant field maps to
//! mid-gray).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::tomo::TiltGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Image,
    Sinogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub shape: [usize; 2],
    pub dtype: String,
    pub role: Role,
    pub geometry: Option<TiltGeometry>,
}

pub const DTYPE: &str = "float32";

pub fn data_path(stem: &Path) -> PathBuf {
    stem.with_extension("f32")
}

pub fn header_path(stem: &Path) -> PathBuf {
    stem.with_extension("json")
}

/// Writes `bytes` to `path` via a sibling temp file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Format(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn encode_f32(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

fn write_field(stem: &Path, header: &Header, values: &[f64]) -> Result<()> {
    let json = serde_json::to_vec_pretty(header).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&data_path(stem), &encode_f32(values))?;
    write_atomic(&header_path(stem), &json)
}

fn read_field(stem: &Path) -> Result<(Header, Vec<f64>)> {
    let hpath = header_path(stem);
    let header: Header = serde_json::from_slice(&fs::read(&hpath)?)
        .map_err(|e| Error::Format(format!("{}: {e}", hpath.display())))?;
    if header.dtype != DTYPE {
        return Err(Error::Format(format!("{}: unsupported dtype {:?}", hpath.display(), header.dtype)));
    }
    let bytes = fs::read(data_path(stem))?;
    let [a, b] = header.shape;
    if bytes.len() != 4 * a * b {
        return Err(Error::Format(format!(
            "{}: expected {} bytes for shape {a}x{b}, found {}",
            data_path(stem).display(),
            4 * a * b,
            bytes.len()
        )));
    }
    let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    Ok((header, values))
}

pub fn write_image(stem: &Path, img: &Image) -> Result<()> {
    let header = Header { shape: [img.height(), img.width()], dtype: DTYPE.into(), role: Role::Image, geometry: None };
    write_field(stem, &header, img.as_slice())
}

pub fn read_image(stem: &Path) -> Result<Image> {
    let (header, values) = read_field(stem)?;
    if header.role != Role::Image {
        return Err(Error::Format(format!("{} holds a {:?}, not an image", stem.display(), header.role)));
    }
    Image::from_vec(header.shape[0], header.shape[1], values)
}

pub fn write_sinogram(stem: &Path, sino: &Sinogram, geometry: &TiltGeometry) -> Result<()> {
    if (geometry.num_angles, geometry.detector_bins) != sino.shape() {
        return Err(Error::dim("sinogram shape does not match its geometry"));
    }
    let header = Header {
        shape: [sino.num_angles(), sino.bins()],
        dtype: DTYPE.into(),
        role: Role::Sinogram,
        geometry: Some(geometry.clone()),
    };
    write_field(stem, &header, sino.as_slice())
}

pub fn read_sinogram(stem: &Path) -> Result<(Sinogram, TiltGeometry)> {
    let (header, values) = read_field(stem)?;
    if header.role != Role::Sinogram {
        return Err(Error::Format(format!("{} holds a {:?}, not a sinogram", stem.display(), header.role)));
    }
    let geometry = header
        .geometry
        .ok_or_else(|| Error::Format(format!("{}: sinogram header lacks geometry", stem.display())))?;
    geometry.validate()?;
    let sino = Sinogram::from_vec(header.shape[0], header.shape[1], values)?;
    sino.ensure_shape(geometry.num_angles, geometry.detector_bins)?;
    Ok((sino, geometry))
}

/// Min-max scaled 8-bit grayscale PNG.
pub fn write_png(path: &Path, values: &[f64], height: usize, width: usize) -> Result<()> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let pixels: Vec<u8> = values
        .iter()
        .map(|&v| if hi > lo { ((v - lo) / (hi - lo) * 255.0).round() as u8 } else { 128 })
        .collect();
    let buf = image::GrayImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| Error::dim("PNG buffer does not match shape"))?;
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("encoding PNG: {e}")))?;
    write_atomic(path, &bytes)
}
