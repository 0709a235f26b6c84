//! First-order tangent approximations of small image transformations.
//!
//! A transformation `t(x, a)` (translation, rotation, scaling) is linearized
//! around `a = 0` by a forward finite difference, giving one tangent image
//! per transform. The span of those tangents approximates the manifold of
//! transformed copies of `x`; the single-sided tangent distance measures how
//! far another image lies from that affine subspace, and augmentation walks a
//! short way along it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::imaging::GrayImage;

pub const MAX_TRANSLATION_STEP: f64 = 2.0;
pub const MAX_ROTATION_STEP: f64 = 0.1;
pub const MAX_SCALE_STEP: f64 = 0.1;
/// Augmentation coefficients are limited to this many steps per transform.
pub const LOCALITY_STEPS: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum TangentError {
    #[error("invalid transform set: {0}")]
    Transforms(String),
    #[error("step out of bounds: {0}")]
    Step(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid coefficients: {0}")]
    Alpha(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    TranslateX,
    TranslateY,
    Rotate,
    Scale,
}

impl TransformKind {
    pub const ALL: [TransformKind; 4] = [
        TransformKind::TranslateX,
        TransformKind::TranslateY,
        TransformKind::Rotate,
        TransformKind::Scale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::TranslateX => "translate-x",
            TransformKind::TranslateY => "translate-y",
            TransformKind::Rotate => "rotate",
            TransformKind::Scale => "scale",
        }
    }

    fn max_step(self) -> f64 {
        match self {
            TransformKind::TranslateX | TransformKind::TranslateY => MAX_TRANSLATION_STEP,
            TransformKind::Rotate => MAX_ROTATION_STEP,
            TransformKind::Scale => MAX_SCALE_STEP,
        }
    }

    pub fn default_step(self) -> f64 {
        match self {
            TransformKind::TranslateX | TransformKind::TranslateY => 1.0,
            TransformKind::Rotate | TransformKind::Scale => 0.02,
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = TangentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| TangentError::Transforms(format!("unknown transform {s:?}")))
    }
}

/// Ordered, duplicate-free list of transforms with their finite-difference
/// steps (pixels for translations, radians for rotation, relative factor
/// for scale).
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSet {
    items: Vec<(TransformKind, f64)>,
}

impl TransformSet {
    pub fn new(items: Vec<(TransformKind, f64)>) -> Result<Self, TangentError> {
        if items.is_empty() {
            return Err(TangentError::Transforms("no transforms given".into()));
        }
        for (i, (kind, step)) in items.iter().enumerate() {
            if items[..i].iter().any(|(k, _)| k == kind) {
                return Err(TangentError::Transforms(format!("duplicate transform {kind}")));
            }
            if !(step.is_finite() && *step > 0.0) {
                return Err(TangentError::Step(format!("{kind} step {step} must be positive")));
            }
        }
        Ok(Self { items })
    }

    /// Parses parallel comma-separated lists, e.g. `translate-x,rotate` and
    /// `1,0.02`.
    pub fn parse(kinds: &str, steps: &str) -> Result<Self, TangentError> {
        let kinds = kinds
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<TransformKind>, _>>()?;
        let steps = steps
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| TangentError::Step(format!("bad step {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if kinds.len() != steps.len() {
            return Err(TangentError::Transforms(format!(
                "{} transforms but {} steps",
                kinds.len(),
                steps.len()
            )));
        }
        Self::new(kinds.into_iter().zip(steps).collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(TransformKind, f64)] {
        &self.items
    }

    pub fn steps(&self) -> Vec<f64> {
        self.items.iter().map(|&(_, s)| s).collect()
    }

    pub fn kinds_string(&self) -> String {
        join(self.items.iter().map(|(k, _)| k.name().to_string()))
    }

    pub fn steps_string(&self) -> String {
        join(self.items.iter().map(|(_, s)| format!("{s}")))
    }
}

impl Default for TransformSet {
    fn default() -> Self {
        Self {
            items: TransformKind::ALL
                .into_iter()
                .map(|k| (k, k.default_step()))
                .collect(),
        }
    }
}

fn join(it: impl Iterator<Item = String>) -> String {
    it.collect::<Vec<_>>().join(",")
}

/// Tangent images of one source image, one per transform parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBasis {
    width: usize,
    height: usize,
    vectors: Vec<Vec<f64>>,
    /// Finite-difference step of each vector, when the basis came from a
    /// [`TransformSet`]; bounds augmentation coefficients.
    steps: Option<Vec<f64>>,
}

impl TangentBasis {
    /// Wraps explicit tangent vectors. Such a basis carries no step sizes,
    /// so augmentation with it skips the locality bound.
    pub fn from_vectors(
        width: usize,
        height: usize,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Self, TangentError> {
        for (l, v) in vectors.iter().enumerate() {
            if v.len() != width * height {
                return Err(TangentError::DimMismatch(format!(
                    "tangent {l} has {} entries, expected {}",
                    v.len(),
                    width * height
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(TangentError::Alpha(format!("tangent {l} is not finite")));
            }
        }
        Ok(Self {
            width,
            height,
            vectors,
            steps: None,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn steps(&self) -> Option<&[f64]> {
        self.steps.as_deref()
    }
}

/// Samples `x` after applying one transform with parameter `amount`.
/// Output pixel `p` reads the source at `c + A(p - c)` (`c` the image
/// centre) with bilinear interpolation; coordinates are clamped to the edge.
pub fn transform_image(x: &GrayImage, kind: TransformKind, amount: f64) -> Vec<f64> {
    let (w, h) = x.dims();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = amount.sin_cos();
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let (px, py) = (i as f64, j as f64);
            let (sx, sy) = match kind {
                TransformKind::TranslateX => (px + amount, py),
                TransformKind::TranslateY => (px, py + amount),
                TransformKind::Rotate => {
                    let (dx, dy) = (px - cx, py - cy);
                    (cx + cos * dx - sin * dy, cy + sin * dx + cos * dy)
                }
                TransformKind::Scale => {
                    let f = 1.0 + amount;
                    (cx + f * (px - cx), cy + f * (py - cy))
                }
            };
            out.push(bilinear(x, sx, sy));
        }
    }
    out
}

fn bilinear(x: &GrayImage, sx: f64, sy: f64) -> f64 {
    let (w, h) = x.dims();
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let v = |x_: usize, y_: usize| f64::from(x.get(x_, y_));
    let top = if fx == 0.0 {
        v(x0, y0)
    } else {
        v(x0, y0) * (1.0 - fx) + v(x1, y0) * fx
    };
    if fy == 0.0 {
        return top;
    }
    let bottom = if fx == 0.0 {
        v(x0, y1)
    } else {
        v(x0, y1) * (1.0 - fx) + v(x1, y1) * fx
    };
    top * (1.0 - fy) + bottom * fy
}

/// Forward-difference tangents `(t(x, step) - x) / step` for each transform.
pub fn tangent_basis(x: &GrayImage, transforms: &TransformSet) -> Result<TangentBasis, TangentError> {
    for &(kind, step) in transforms.items() {
        if step.abs() > kind.max_step() {
            return Err(TangentError::Step(format!(
                "{kind} step {step} exceeds {}",
                kind.max_step()
            )));
        }
    }
    let source = x.to_f64();
    let vectors = transforms
        .items()
        .iter()
        .map(|&(kind, step)| {
            transform_image(x, kind, step)
                .into_iter()
                .zip(&source)
                .map(|(t, s)| (t - s) / step)
                .collect()
        })
        .collect();
    Ok(TangentBasis {
        width: x.width(),
        height: x.height(),
        vectors,
        steps: Some(transforms.steps()),
    })
}

/// Optimal coefficients and residual of a single-sided tangent fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFit {
    pub distance: f64,
    pub alpha: Vec<f64>,
}

/// `min_a ||x + sum_l a_l T_l - mu||`; see [`tangent_fit`].
pub fn tangent_distance_ss(
    x: &GrayImage,
    mu: &GrayImage,
    basis: &TangentBasis,
) -> Result<f64, TangentError> {
    tangent_fit(x, mu, basis).map(|f| f.distance)
}

/// Solves the normal equations `T'T a = T'(mu - x)` by Cholesky. A Gram
/// matrix that is numerically singular is regularized with
/// `1e-8 * trace / L` on the diagonal before solving.
pub fn tangent_fit(
    x: &GrayImage,
    mu: &GrayImage,
    basis: &TangentBasis,
) -> Result<TangentFit, TangentError> {
    if x.dims() != mu.dims() || x.dims() != basis.dims() {
        return Err(TangentError::DimMismatch(format!(
            "x {:?}, mu {:?}, basis {:?}",
            x.dims(),
            mu.dims(),
            basis.dims()
        )));
    }
    let xs = x.to_f64();
    let diff: Vec<f64> = mu.to_f64().iter().zip(&xs).map(|(m, v)| m - v).collect();
    let plain = norm(&diff);
    let l = basis.len();
    if l == 0 {
        return Ok(TangentFit {
            distance: plain,
            alpha: Vec::new(),
        });
    }

    let t = &basis.vectors;
    let mut gram = vec![0.0; l * l];
    let mut rhs = vec![0.0; l];
    for a in 0..l {
        rhs[a] = dot(&t[a], &diff);
        for b in a..l {
            let g = dot(&t[a], &t[b]);
            gram[a * l + b] = g;
            gram[b * l + a] = g;
        }
    }
    let trace: f64 = (0..l).map(|a| gram[a * l + a]).sum();
    let alpha = if trace <= 0.0 {
        vec![0.0; l]
    } else {
        let tiny = 1e-12 * trace / l as f64;
        match cholesky_solve(&gram, &rhs, l, tiny) {
            Some(a) => a,
            None => {
                let ridge = 1e-8 * trace / l as f64;
                let mut reg = gram.clone();
                for a in 0..l {
                    reg[a * l + a] += ridge;
                }
                cholesky_solve(&reg, &rhs, l, 0.0).unwrap_or_else(|| vec![0.0; l])
            }
        }
    };

    let mut residual: Vec<f64> = diff.iter().map(|d| -d).collect();
    for (a, v) in alpha.iter().zip(t) {
        for (r, tv) in residual.iter_mut().zip(v) {
            *r += a * tv;
        }
    }
    let distance = norm(&residual);
    // a = 0 is always feasible
    if distance > plain || !distance.is_finite() {
        return Ok(TangentFit {
            distance: plain,
            alpha: vec![0.0; l],
        });
    }
    Ok(TangentFit { distance, alpha })
}

/// Cholesky factorization and two triangular solves. Returns `None` when a
/// pivot falls at or below `min_pivot`.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize, min_pivot: f64) -> Option<Vec<f64>> {
    let mut lower = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| lower[i * n + k] * lower[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if d <= min_pivot || !d.is_finite() {
                    return None;
                }
                lower[i * n + i] = d.sqrt();
            } else {
                lower[i * n + j] = (a[i * n + j] - s) / lower[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| lower[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / lower[i * n + i];
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| lower[k * n + i] * z[k]).sum();
        z[i] = (y[i] - s) / lower[i * n + i];
    }
    Some(z)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Synthesizes `clamp(round(x + sum_l a_l T_l), 0, 255)` for every
/// coefficient vector.
pub fn tangent_augment(
    x: &GrayImage,
    basis: &TangentBasis,
    alphas: &[Vec<f64>],
) -> Result<Vec<GrayImage>, TangentError> {
    if x.dims() != basis.dims() {
        return Err(TangentError::DimMismatch(format!(
            "image {:?} vs basis {:?}",
            x.dims(),
            basis.dims()
        )));
    }
    let source = x.to_f64();
    alphas
        .iter()
        .map(|alpha| {
            if alpha.len() != basis.len() {
                return Err(TangentError::Alpha(format!(
                    "{} coefficients for {} tangents",
                    alpha.len(),
                    basis.len()
                )));
            }
            if let Some(steps) = basis.steps() {
                for (l, (a, s)) in alpha.iter().zip(steps).enumerate() {
                    if !a.is_finite() || a.abs() > LOCALITY_STEPS * s {
                        return Err(TangentError::Alpha(format!(
                            "coefficient {a} of tangent {l} exceeds {LOCALITY_STEPS} steps of {s}"
                        )));
                    }
                }
            }
            let mut acc = source.clone();
            for (a, v) in alpha.iter().zip(basis.vectors()) {
                for (p, tv) in acc.iter_mut().zip(v) {
                    *p += a * tv;
                }
            }
            let pixels = acc.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            Ok(GrayImage::new(x.width(), x.height(), pixels).expect("dims preserved"))
        })
        .collect()
}

/// Coefficient vectors for augmentation: for every transform `l` and grid
/// magnitude `m` (in units of that transform's step), `+m*step_l` and
/// `-m*step_l` along axis `l`.
pub fn augmentation_alphas(
    transforms: &TransformSet,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>, TangentError> {
    let l = transforms.len();
    let mut out = Vec::with_capacity(2 * l * grid.len());
    for &m in grid {
        if !(m.is_finite() && m > 0.0 && m <= LOCALITY_STEPS) {
            return Err(TangentError::Alpha(format!(
                "grid magnitude {m} outside (0, {LOCALITY_STEPS}]"
            )));
        }
    }
    for (axis, &(_, step)) in transforms.items().iter().enumerate() {
        for &m in grid {
            for sign in [1.0, -1.0] {
                let mut alpha = vec![0.0; l];
                alpha[axis] = sign * m * step;
                out.push(alpha);
            }
        }
    }
    Ok(out)
}

/// Tangent variants of `x` on the given magnitude grid (original excluded).
pub fn augment_image(
    x: &GrayImage,
    transforms: &TransformSet,
    grid: &[f64],
) -> Result<Vec<GrayImage>, TangentError> {
    let basis = tangent_basis(x, transforms)?;
    tangent_augment(x, &basis, &augmentation_alphas(transforms, grid)?)
}
