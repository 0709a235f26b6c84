//! Grayscale image ingestion (PGM P2/P5), dataset manifests and
//! stratified train/test splitting.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Smallest edge length an image may have to enter a dataset: a 3×3 grid
/// of blocks, each at least 2×2.
pub const MIN_DATASET_EDGE: usize = 6;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid PGM data: {0}")]
    Format(String),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("inconsistent dataset: {0}")]
    Dataset(String),
    #[error("cannot split dataset: {0}")]
    Split(String),
}

/// Rectangular grid of 8-bit intensities stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::Invalid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(ImagingError::Invalid(format!(
                "{} pixels do not fill a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImagingError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    /// Borrowed view of a rectangular sub-region.
    pub fn region(&self, rect: Rect) -> Region<'_> {
        assert!(
            rect.x + rect.width <= self.width && rect.y + rect.height <= self.height,
            "region {rect:?} exceeds {}x{} image",
            self.width,
            self.height
        );
        Region { image: self, rect }
    }

    pub fn full_region(&self) -> Region<'_> {
        self.region(Rect {
            x: 0,
            y: 0,
            width: self.width,
            height: self.height,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Read-only window onto part of a [`GrayImage`]. Coordinates are local.
#[derive(Debug, Clone, Copy)]
pub struct Region<'a> {
    image: &'a GrayImage,
    rect: Rect,
}

impl Region<'_> {
    pub fn width(&self) -> usize {
        self.rect.width
    }

    pub fn height(&self) -> usize {
        self.rect.height
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.rect.width && y < self.rect.height);
        self.image.get(self.rect.x + x, self.rect.y + y)
    }

    pub fn values(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.rect.height).flat_map(move |y| (0..self.rect.width).map(move |x| self.get(x, y)))
    }
}

/// Decodes a P2 (ASCII) or P5 (binary) PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, ImagingError> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor
        .token()
        .ok_or_else(|| ImagingError::Format("empty file".into()))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(ImagingError::Format(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval != 255 {
        return Err(ImagingError::Format(format!(
            "maxval must be 255, got {maxval}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(ImagingError::Format(format!(
            "zero dimension {width}x{height}"
        )));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| ImagingError::Format("dimensions overflow".into()))?;

    let pixels = if binary {
        // exactly one whitespace byte separates maxval from the raster
        match cursor.bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err(ImagingError::Format("missing raster separator".into())),
        }
        let raster = &cursor.bytes[cursor.pos..];
        if raster.len() < count {
            return Err(ImagingError::Format(format!(
                "truncated raster: expected {count} bytes, found {}",
                raster.len()
            )));
        }
        raster[..count].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            let v = cursor.number("pixel").map_err(|e| match e {
                ImagingError::Format(msg) if msg.contains("unexpected end") => {
                    ImagingError::Format(format!("truncated raster: expected {count} samples"))
                }
                e => e,
            })?;
            if v > 255 {
                return Err(ImagingError::Format(format!("sample {v} exceeds maxval")));
            }
            pixels.push(v as u8);
        }
        pixels
    };
    GrayImage::new(width, height, pixels)
}

/// Encodes as binary P5 with a minimal header.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImagingError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pgm(&bytes).map_err(|e| match e {
        ImagingError::Format(msg) => ImagingError::Format(format!("{}: {msg}", path.display())),
        e => e,
    })
}

pub fn save_image(path: impl AsRef<Path>, image: &GrayImage) -> Result<(), ImagingError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image)).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, ImagingError> {
        let tok = self
            .token()
            .ok_or_else(|| ImagingError::Format(format!("unexpected end of data reading {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                ImagingError::Format(format!(
                    "bad {what} {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class: usize,
}

/// Labeled list of image paths. Paths are relative to a dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    class_count: usize,
}

impl DatasetManifest {
    /// Accepts any entries whose class ids fall below `class_count`; classes
    /// may be empty (a split can legitimately produce an empty test side).
    pub fn new(entries: Vec<ManifestEntry>, class_count: usize) -> Result<Self, ImagingError> {
        if class_count == 0 {
            return Err(ImagingError::Dataset("class count must be positive".into()));
        }
        if let Some(bad) = entries.iter().find(|e| e.class >= class_count) {
            return Err(ImagingError::Dataset(format!(
                "class id {} of {} outside [0, {class_count})",
                bad.class,
                bad.path.display()
            )));
        }
        Ok(Self {
            entries,
            class_count,
        })
    }

    /// Parses `<relative-path> <class-id>` lines; `#` starts a comment.
    /// A `# classes: N` line fixes the class count and allows empty classes;
    /// otherwise the count is one more than the largest id and every class
    /// must be represented.
    pub fn parse(text: &str) -> Result<Self, ImagingError> {
        let mut entries = Vec::new();
        let mut declared = None;
        for (idx, raw) in text.lines().enumerate() {
            if let Some(n) = raw.trim().strip_prefix("# classes:") {
                declared = Some(n.trim().parse().map_err(|_| ImagingError::Manifest {
                    line: idx + 1,
                    msg: format!("bad class count {:?}", n.trim()),
                })?);
                continue;
            }
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (path, class) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| ImagingError::Manifest {
                    line: idx + 1,
                    msg: format!("expected `<path> <class-id>`, got {line:?}"),
                })?;
            let class = class.parse().map_err(|_| ImagingError::Manifest {
                line: idx + 1,
                msg: format!("bad class id {class:?}"),
            })?;
            entries.push(ManifestEntry {
                path: PathBuf::from(path.trim()),
                class,
            });
        }
        if let Some(n) = declared {
            return Self::new(entries, n);
        }
        let class_count = entries.iter().map(|e| e.class + 1).max().unwrap_or(0);
        let manifest = Self::new(entries, class_count.max(1))?;
        manifest.ensure_every_class()?;
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImagingError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ImagingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut out = format!("# classes: {}\n", self.class_count);
        for e in &self.entries {
            out.push_str(&format!("{} {}\n", e.path.display(), e.class));
        }
        out
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for e in &self.entries {
            sizes[e.class] += 1;
        }
        sizes
    }

    pub fn ensure_every_class(&self) -> Result<(), ImagingError> {
        match self.class_sizes().iter().position(|&n| n == 0) {
            Some(c) => Err(ImagingError::Dataset(format!("class {c} has no images"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Per-class stratified split. Each class is shuffled by its own ChaCha
/// stream (seed, class id), takes `ceil(fraction * n)` training images, and
/// both halves keep the manifest's original order.
pub fn split_dataset(
    manifest: &DatasetManifest,
    spec: SplitSpec,
) -> Result<(DatasetManifest, DatasetManifest), ImagingError> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(ImagingError::Split(format!(
            "train fraction {f} outside (0, 1]"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        by_class.entry(e.class).or_default().push(i);
    }
    let mut in_train = vec![false; manifest.len()];
    for class in 0..manifest.class_count {
        let mut members = by_class.remove(&class).unwrap_or_default();
        // guard against 0.7 * 10 = 7.000000000000001
        let take = ((f * members.len() as f64) - 1e-9).ceil().max(0.0) as usize;
        if take == 0 {
            return Err(ImagingError::Split(format!(
                "class {class} would receive no training images"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        for &i in members.iter().take(take) {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = manifest
        .entries
        .iter()
        .zip(&in_train)
        .partition(|(_, &t)| t);
    let strip = |v: Vec<(&ManifestEntry, &bool)>| v.into_iter().map(|(e, _)| e.clone()).collect();
    Ok((
        DatasetManifest::new(strip(train), manifest.class_count)?,
        DatasetManifest::new(strip(test), manifest.class_count)?,
    ))
}

/// A manifest together with its decoded images, all of one size.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub images: Vec<GrayImage>,
}

impl Dataset {
    /// Loads every image of `manifest` relative to `root`. Dimensions must
    /// agree across the set and be at least [`MIN_DATASET_EDGE`].
    pub fn load(root: impl AsRef<Path>, manifest: DatasetManifest) -> Result<Self, ImagingError> {
        let root = root.as_ref();
        let images = manifest
            .entries
            .par_iter()
            .map(|e| load_image(root.join(&e.path)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(manifest, images)
    }

    pub fn from_parts(
        manifest: DatasetManifest,
        images: Vec<GrayImage>,
    ) -> Result<Self, ImagingError> {
        if images.len() != manifest.len() {
            return Err(ImagingError::Dataset(format!(
                "{} images for {} manifest entries",
                images.len(),
                manifest.len()
            )));
        }
        if let Some(first) = images.first() {
            let dims = first.dims();
            if dims.0 < MIN_DATASET_EDGE || dims.1 < MIN_DATASET_EDGE {
                return Err(ImagingError::Dataset(format!(
                    "images of {}x{} are too small, need at least {MIN_DATASET_EDGE}x{MIN_DATASET_EDGE}",
                    dims.0, dims.1
                )));
            }
            for (img, e) in images.iter().zip(&manifest.entries) {
                if img.dims() != dims {
                    return Err(ImagingError::Dataset(format!(
                        "{} is {}x{}, expected {}x{}",
                        e.path.display(),
                        img.width,
                        img.height,
                        dims.0,
                        dims.1
                    )));
                }
            }
        }
        Ok(Self { manifest, images })
    }

    pub fn image_dims(&self) -> Option<(usize, usize)> {
        self.images.first().map(GrayImage::dims)
    }

    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.manifest.entries.iter().map(|e| e.class)
    }
}
