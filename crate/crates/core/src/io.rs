//! File formats: binary PGM bands, plain-text band manifests, and raw `f32`
//! dumps for inspecting intermediate planes.
//!
//! Manifest syntax, one entry per line:
//!
//! ```text
//! # optional comment
//! band=ms_b0.pgm
//! band=ms_b1.pgm
//! ```
//!
//! Band paths are resolved relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{MultiBandImage, RasterBand};

/// Integer depth used when a band is written to PGM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    Eight,
    #[default]
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

struct PgmHeader {
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<PgmHeader> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::io(path, "not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments between tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::io(path, "truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::io(path, "malformed PGM header: expected a number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::io(path, "malformed PGM header: number out of range"))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::io(path, "malformed PGM header: missing separator"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::io(path, "PGM has zero width or height"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::io(path, format!("unsupported PGM maxval {maxval}")));
    }
    Ok(PgmHeader {
        width: width as usize,
        height: height as usize,
        maxval,
        data_offset: pos + 1,
    })
}

/// Decodes a binary PGM held in memory. `path` is only used in error messages.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<RasterBand> {
    let hdr = parse_header(bytes, path)?;
    let n = hdr.width * hdr.height;
    let data = &bytes[hdr.data_offset..];
    let samples: Vec<f64> = if hdr.maxval < 256 {
        if data.len() < n {
            return Err(Error::io(path, "PGM raster is shorter than its header claims"));
        }
        data[..n].iter().map(|&v| f64::from(v)).collect()
    } else {
        if data.len() < 2 * n {
            return Err(Error::io(path, "PGM raster is shorter than its header claims"));
        }
        data[..2 * n]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    };
    RasterBand::new(hdr.width, hdr.height, samples).map_err(|e| Error::io(path, e))
}

/// Encodes a band as binary PGM, rounding and clipping to `[0, maxval]`.
pub fn encode_pgm(band: &RasterBand, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.maxval();
    let mut out = format!("P5\n{} {}\n{}\n", band.width(), band.height(), maxval).into_bytes();
    let quantize = |v: f64| v.round().clamp(0.0, f64::from(maxval)) as u16;
    match depth {
        BitDepth::Eight => out.extend(band.samples().iter().map(|&v| quantize(v) as u8)),
        BitDepth::Sixteen => {
            for &v in band.samples() {
                out.extend_from_slice(&quantize(v).to_be_bytes());
            }
        }
    }
    out
}

pub fn load_band(path: impl AsRef<Path>) -> Result<RasterBand> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn save_band(band: &RasterBand, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(band, depth)).map_err(|e| Error::io(path, e))
}

/// Lists the band files named by a manifest, resolved against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) if key.trim() == "band" && !value.trim().is_empty() => {
                entries.push(base.join(value.trim()));
            }
            _ => {
                return Err(Error::io(
                    path,
                    format!("line {}: expected `band=<path>`, got `{line}`", lineno + 1),
                ))
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::io(path, "manifest lists no bands"));
    }
    Ok(entries)
}

pub fn load_multiband(manifest: impl AsRef<Path>) -> Result<MultiBandImage> {
    let manifest = manifest.as_ref();
    let mut bands: Vec<RasterBand> = Vec::new();
    for file in read_manifest(manifest)? {
        let band = load_band(&file)?;
        if let Some(first) = bands.first() {
            if first.dims() != band.dims() {
                return Err(Error::io(
                    &file,
                    format!(
                        "band is {}x{} but the first band in {} is {}x{}",
                        band.width(),
                        band.height(),
                        manifest.display(),
                        first.width(),
                        first.height()
                    ),
                ));
            }
        }
        bands.push(band);
    }
    MultiBandImage::new(bands).map_err(|e| Error::io(manifest, e))
}

/// Writes each band as `<stem>_b<index>.pgm` next to the manifest, then the
/// manifest itself.
pub fn save_multiband(
    image: &MultiBandImage,
    manifest: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<()> {
    let manifest = manifest.as_ref();
    let dir = manifest.parent().unwrap_or(Path::new(""));
    let stem = manifest
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::io(manifest, "manifest path has no file name"))?;
    let mut text = format!("# {} bands, {}x{}\n", image.band_count(), image.width(), image.height());
    for (i, band) in image.bands().iter().enumerate() {
        let name = format!("{stem}_b{i}.pgm");
        save_band(band, dir.join(&name), depth)?;
        text.push_str(&format!("band={name}\n"));
    }
    fs::write(manifest, text).map_err(|e| Error::io(manifest, e))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// Dumps a band as little-endian `f32` with a `<path>.hdr` text sidecar.
pub fn export_f32_raw(band: &RasterBand, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(band.len() * 4);
    for &v in band.samples() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let hdr = sidecar_path(path);
    let text = format!("width={} height={} dtype=f32\n", band.width(), band.height());
    fs::write(&hdr, text).map_err(|e| Error::io(&hdr, e))
}

pub fn import_f32_raw(path: impl AsRef<Path>) -> Result<RasterBand> {
    let path = path.as_ref();
    let hdr = sidecar_path(path);
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let (mut width, mut height, mut dtype) = (None, None, None);
    for token in text.split_whitespace() {
        match token.split_once('=') {
            Some(("width", v)) => width = v.parse::<usize>().ok(),
            Some(("height", v)) => height = v.parse::<usize>().ok(),
            Some(("dtype", v)) => dtype = Some(v.to_owned()),
            _ => return Err(Error::io(&hdr, format!("unexpected token `{token}`"))),
        }
    }
    let (Some(width), Some(height)) = (width, height) else {
        return Err(Error::io(&hdr, "header must define width and height"));
    };
    if dtype.as_deref() != Some("f32") {
        return Err(Error::io(&hdr, "only dtype=f32 is supported"));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != width * height * 4 {
        return Err(Error::io(
            path,
            format!("expected {} bytes, found {}", width * height * 4, bytes.len()),
        ));
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    RasterBand::new(width, height, samples).map_err(|e| Error::io(path, e))
}
