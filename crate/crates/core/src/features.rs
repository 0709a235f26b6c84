//! 3×3 block decomposition and per-block texture descriptors: intensity
//! moments plus four statistics of a symmetric gray-level co-occurrence
//! matrix (GLCM).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{GrayImage, Rect, Region, MIN_DATASET_EDGE};

pub const GRID_SIDE: usize = 3;
pub const BLOCK_COUNT: usize = GRID_SIDE * GRID_SIDE;
pub const DESCRIPTOR_LEN: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("image {width}x{height} is too small for a 3x3 grid of 2x2 blocks")]
    TooSmall { width: usize, height: usize },
    #[error("offset ({dx}, {dy}) does not fit a {width}x{height} block")]
    Offset {
        dx: i32,
        dy: i32,
        width: usize,
        height: usize,
    },
    #[error("need at least 2 gray levels, got {0}")]
    Levels(usize),
}

/// The nine blocks of an image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    pub blocks: [Rect; BLOCK_COUNT],
}

/// Cuts at `b` and `2b` along each axis with `b = floor(len / 3)`; the last
/// block absorbs the remainder.
pub fn grid_blocks(x: &GrayImage) -> Result<BlockGrid, FeatureError> {
    let (w, h) = x.dims();
    if w < MIN_DATASET_EDGE || h < MIN_DATASET_EDGE {
        return Err(FeatureError::TooSmall {
            width: w,
            height: h,
        });
    }
    let spans = |len: usize| {
        let b = len / GRID_SIDE;
        [(0, b), (b, b), (2 * b, len - 2 * b)]
    };
    let cols = spans(w);
    let rows = spans(h);
    let blocks = std::array::from_fn(|i| {
        let (y, height) = rows[i / GRID_SIDE];
        let (x, width) = cols[i % GRID_SIDE];
        Rect {
            x,
            y,
            width,
            height,
        }
    });
    Ok(BlockGrid { blocks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlcmConfig {
    pub levels: usize,
    pub offset: (i32, i32),
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            offset: (1, 0),
        }
    }
}

/// Normalized symmetric co-occurrence matrix, `levels × levels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    p: Vec<f64>,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let g = self.levels;
        self.p.iter().enumerate().map(move |(idx, &v)| (idx / g, idx % g, v))
    }

    pub fn energy(&self) -> f64 {
        self.p.iter().map(|v| v * v).sum()
    }

    /// Natural-log entropy with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        self.p
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|v| -v * v.ln())
            .sum::<f64>()
            + 0.0
    }

    pub fn contrast(&self) -> f64 {
        self.cells()
            .map(|(i, j, v)| {
                let d = i as f64 - j as f64;
                d * d * v
            })
            .sum()
    }

    pub fn homogeneity(&self) -> f64 {
        self.cells()
            .map(|(i, j, v)| {
                let d = i as f64 - j as f64;
                v / (1.0 + d * d)
            })
            .sum()
    }
}

#[inline]
fn bin(v: u8, levels: usize) -> usize {
    usize::from(v) * levels / 256
}

/// Counts every in-block pair `(p, p + offset)` in both orders and
/// normalizes by the total.
pub fn glcm(block: &Region<'_>, levels: usize, offset: (i32, i32)) -> Result<Glcm, FeatureError> {
    if levels < 2 {
        return Err(FeatureError::Levels(levels));
    }
    let (dx, dy) = offset;
    let (w, h) = (block.width(), block.height());
    if dx.unsigned_abs() as usize >= w || dy.unsigned_abs() as usize >= h {
        return Err(FeatureError::Offset {
            dx,
            dy,
            width: w,
            height: h,
        });
    }
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    let x_range = (-dx.min(0)) as usize..w - dx.max(0) as usize;
    let y_range = (-dy.min(0)) as usize..h - dy.max(0) as usize;
    for y in y_range {
        for x in x_range.clone() {
            let a = bin(block.get(x, y), levels);
            let nx = (x as i64 + i64::from(dx)) as usize;
            let ny = (y as i64 + i64::from(dy)) as usize;
            let b = bin(block.get(nx, ny), levels);
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            total += 2;
        }
    }
    let total = total as f64;
    Ok(Glcm {
        levels,
        p: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}

/// Raw physical descriptor of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockFeatureVector {
    pub mean: f64,
    pub std: f64,
    pub energy: f64,
    pub entropy: f64,
    pub contrast: f64,
    pub homogeneity: f64,
}

impl BlockFeatureVector {
    pub const NAMES: [&'static str; DESCRIPTOR_LEN] =
        ["mean", "std", "energy", "entropy", "contrast", "homogeneity"];

    pub fn to_array(&self) -> [f64; DESCRIPTOR_LEN] {
        [
            self.mean,
            self.std,
            self.energy,
            self.entropy,
            self.contrast,
            self.homogeneity,
        ]
    }

    pub fn from_array(a: [f64; DESCRIPTOR_LEN]) -> Self {
        Self {
            mean: a[0],
            std: a[1],
            energy: a[2],
            entropy: a[3],
            contrast: a[4],
            homogeneity: a[5],
        }
    }
}

/// Mean and population standard deviation of the raw intensities, then the
/// GLCM statistics.
pub fn block_descriptor(
    block: &Region<'_>,
    cfg: &GlcmConfig,
) -> Result<BlockFeatureVector, FeatureError> {
    let m = glcm(block, cfg.levels, cfg.offset)?;
    let n = (block.width() * block.height()) as f64;
    let mean = block.values().map(f64::from).sum::<f64>() / n;
    let var = block
        .values()
        .map(|v| {
            let d = f64::from(v) - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(BlockFeatureVector {
        mean,
        std: var.sqrt(),
        energy: m.energy(),
        entropy: m.entropy(),
        contrast: m.contrast(),
        homogeneity: m.homogeneity(),
    })
}

pub fn describe_image(
    x: &GrayImage,
    cfg: &GlcmConfig,
) -> Result<Vec<BlockFeatureVector>, FeatureError> {
    grid_blocks(x)?
        .blocks
        .iter()
        .map(|&r| block_descriptor(&x.region(r), cfg))
        .collect()
}

/// Header of the feature dump.
pub const CSV_HEADER: &str = "image,block,mean,std,energy,entropy,contrast,homogeneity";

/// One CSV row per block. Floats use the shortest round-trip representation.
pub fn csv_rows(image: &str, descriptors: &[BlockFeatureVector]) -> String {
    let mut out = String::new();
    for (b, d) in descriptors.iter().enumerate() {
        out.push_str(&format!("{image},{b}"));
        for v in d.to_array() {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    out
}

/// Parses a feature dump back into `(image, [descriptor; 9])` groups in file
/// order.
pub fn parse_csv(text: &str) -> Result<Vec<(String, Vec<BlockFeatureVector>)>, String> {
    let mut out: Vec<(String, Vec<BlockFeatureVector>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line == CSV_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.rsplitn(DESCRIPTOR_LEN + 2, ',').collect();
        if fields.len() != DESCRIPTOR_LEN + 2 {
            return Err(format!("line {}: expected 8 columns", idx + 1));
        }
        let image = fields[DESCRIPTOR_LEN + 1].to_string();
        let block: usize = fields[DESCRIPTOR_LEN]
            .parse()
            .map_err(|_| format!("line {}: bad block index", idx + 1))?;
        let mut vals = [0.0; DESCRIPTOR_LEN];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = fields[DESCRIPTOR_LEN - 1 - k]
                .parse()
                .map_err(|_| format!("line {}: bad number", idx + 1))?;
        }
        let d = BlockFeatureVector::from_array(vals);
        match out.last_mut() {
            Some((name, ds)) if *name == image && ds.len() < BLOCK_COUNT => {
                if block != ds.len() {
                    return Err(format!("line {}: block {block} out of order", idx + 1));
                }
                ds.push(d);
            }
            _ => {
                if block != 0 {
                    return Err(format!("line {}: image starts at block {block}", idx + 1));
                }
                out.push((image, vec![d]));
            }
        }
    }
    if let Some((name, _)) = out.iter().find(|(_, ds)| ds.len() != BLOCK_COUNT) {
        return Err(format!("image {name} has an incomplete block set"));
    }
    Ok(out)
}
