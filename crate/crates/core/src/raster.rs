//! Pixel oracle for the lemniscate: rasterize `{log|P| < 0}`, label
//! 4-connected components, export PPM images.

use crate::components::annulus_inner_radius;
use crate::par::{map_indexed, Execution};
use crate::polyeval::{sum_log_abs, RootedPolynomial};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MIN_RESOLUTION: usize = 64;
pub const DEFAULT_BOUND: f64 = 1.25;
pub const DEFAULT_RESOLUTION: usize = 1024;
/// Largest accepted side length unless configured otherwise.
pub const DEFAULT_MAX_SIDE: usize = 8192;

pub const GREEN: [u8; 3] = [0, 200, 0];
pub const RED: [u8; 3] = [220, 40, 40];
pub const YELLOW: [u8; 3] = [240, 220, 60];
pub const WHITE: [u8; 3] = [255, 255, 255];
pub const LIGHT_GREEN: [u8; 3] = [150, 230, 150];

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("resolution must be at least {MIN_RESOLUTION}, got {0}")]
    ResolutionTooSmall(usize),
    #[error("bound must exceed 1, got {0}")]
    BadBound(f64),
    #[error("resolution {resolution} exceeds the cap of {cap} pixels per side")]
    MemoryCap { resolution: usize, cap: usize },
    #[error("mask has {got} pixels, expected {expected}")]
    MaskSize { got: usize, expected: usize },
    #[error("grid is not labeled")]
    Unlabeled,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct RasterOptions {
    pub max_side: usize,
    pub execution: Execution,
}

impl Default for RasterOptions {
    fn default() -> Self {
        Self {
            max_side: DEFAULT_MAX_SIDE,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RasterGrid {
    resolution: usize,
    bound: f64,
    words_per_row: usize,
    mask: Vec<u64>,
    labels: Vec<u32>,
    label_count: usize,
}

impl RasterGrid {
    /// Grid from an explicit row-major mask, top row first.
    pub fn from_mask(resolution: usize, bound: f64, mask: &[bool]) -> Result<Self, RasterError> {
        check_shape(resolution, bound, usize::MAX)?;
        if mask.len() != resolution * resolution {
            return Err(RasterError::MaskSize {
                got: mask.len(),
                expected: resolution * resolution,
            });
        }
        let words_per_row = resolution.div_ceil(64);
        let mut bits = vec![0u64; words_per_row * resolution];
        for (idx, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            let (i, j) = (idx / resolution, idx % resolution);
            bits[i * words_per_row + j / 64] |= 1 << (j % 64);
        }
        Ok(Self {
            resolution,
            bound,
            words_per_row,
            mask: bits,
            labels: Vec::new(),
            label_count: 0,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.bound / self.resolution as f64
    }

    /// Centre of pixel `(row, col)`.
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        let h = self.pixel_size();
        (
            -self.bound + (col as f64 + 0.5) * h,
            self.bound - (row as f64 + 0.5) * h,
        )
    }

    /// Pixel containing `(x, y)`, if inside the bounds.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let h = self.pixel_size();
        let col = ((x + self.bound) / h).floor();
        let row = ((self.bound - y) / h).floor();
        let res = self.resolution as f64;
        (col >= 0.0 && row >= 0.0 && col < res && row < res).then_some((row as usize, col as usize))
    }

    pub fn inside(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.words_per_row + col / 64] >> (col % 64) & 1 == 1
    }

    pub fn inside_count(&self) -> usize {
        self.mask.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Inside pixel area, an estimate of the lemniscate's area.
    pub fn inside_area(&self) -> f64 {
        self.inside_count() as f64 * self.pixel_size().powi(2)
    }

    pub fn is_labeled(&self) -> bool {
        !self.labels.is_empty() || self.inside_count() == 0
    }

    /// Component label of a pixel, 0 outside. Empty before labeling.
    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels.get(row * self.resolution + col).copied().unwrap_or(0)
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    fn row_words(&self, row: usize) -> &[u64] {
        &self.mask[row * self.words_per_row..(row + 1) * self.words_per_row]
    }
}

fn check_shape(resolution: usize, bound: f64, cap: usize) -> Result<(), RasterError> {
    if resolution < MIN_RESOLUTION {
        return Err(RasterError::ResolutionTooSmall(resolution));
    }
    if !(bound > 1.0 && bound.is_finite()) {
        return Err(RasterError::BadBound(bound));
    }
    if resolution > cap {
        return Err(RasterError::MemoryCap { resolution, cap });
    }
    Ok(())
}

pub fn rasterize(poly: &RootedPolynomial, resolution: usize, bound: f64) -> Result<RasterGrid, RasterError> {
    rasterize_with(poly, resolution, bound, RasterOptions::default())
}

pub fn rasterize_with(
    poly: &RootedPolynomial,
    resolution: usize,
    bound: f64,
    opts: RasterOptions,
) -> Result<RasterGrid, RasterError> {
    check_shape(resolution, bound, opts.max_side)?;
    let words_per_row = resolution.div_ceil(64);
    let h = 2.0 * bound / resolution as f64;
    let xs: Vec<f64> = (0..resolution).map(|j| -bound + (j as f64 + 0.5) * h).collect();
    let rows = map_indexed(resolution as u64, opts.execution, |i| {
        let y = bound - (i as f64 + 0.5) * h;
        row_mask(poly, &xs, y, words_per_row)
    });
    Ok(RasterGrid {
        resolution,
        bound,
        words_per_row,
        mask: rows.concat(),
        labels: Vec::new(),
        label_count: 0,
    })
}

/// One row of the mask. Roots are taken 16 at a time; the product of
/// squared distances is formed per pixel and only logged when more than one
/// block is needed or it leaves the normal range.
fn row_mask(poly: &RootedPolynomial, xs: &[f64], y: f64, words: usize) -> Vec<u64> {
    let roots = poly.roots();
    let mut log_acc = vec![0.0f64; xs.len()];
    let mut prod = vec![1.0f64; xs.len()];
    let single = roots.len() <= 16;
    for chunk in roots.chunks(16) {
        prod.iter_mut().for_each(|p| *p = 1.0);
        for x in chunk {
            let dy = y - x.im;
            let dy2 = dy * dy;
            for (p, &px) in prod.iter_mut().zip(xs) {
                let dx = px - x.re;
                *p *= dx * dx + dy2;
            }
        }
        for (j, (acc, &p)) in log_acc.iter_mut().zip(&prod).enumerate() {
            if p > 1e-290 && p < 1e290 {
                if single {
                    *acc = p - 1.0;
                } else {
                    *acc += 0.5 * p.ln();
                }
            } else {
                let z = num_complex::Complex64::new(xs[j], y);
                *acc += sum_log_abs(chunk, z, &[]);
            }
        }
    }
    let mut out = vec![0u64; words];
    for (j, &v) in log_acc.iter().enumerate() {
        if v < 0.0 {
            out[j / 64] |= 1 << (j % 64);
        }
    }
    out
}

/// Maximal horizontal runs `[start, end)` of set bits in one row.
fn runs(words: &[u64], width: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (w, &word) in words.iter().enumerate() {
        let base = w * 64;
        if start.is_none() && word == 0 {
            continue;
        }
        if start.is_some() && word == u64::MAX {
            continue;
        }
        for b in 0..64 {
            let col = base + b;
            if col >= width {
                break;
            }
            let on = word >> b & 1 == 1;
            match (on, start) {
                (true, None) => start = Some(col),
                (false, Some(s)) => {
                    out.push((s, col));
                    start = None;
                }
                _ => {}
            }
        }
    }
    if let Some(s) = start {
        out.push((s, width));
    }
    out
}

fn find(parent: &mut [u32], mut a: u32) -> u32 {
    while parent[a as usize] != a {
        let up = parent[parent[a as usize] as usize];
        parent[a as usize] = up;
        a = up;
    }
    a
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Per-component pixel statistics from a labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    pub pixels: Vec<usize>,
    /// Larger side of each component's bounding box, in pixels.
    pub extent: Vec<usize>,
}

impl ComponentStats {
    /// Components whose bounding box is smaller than `pixels` on both sides.
    pub fn smaller_than(&self, pixels: usize) -> usize {
        self.extent.iter().filter(|&&e| e < pixels).count()
    }
}

/// Labels 4-connected components (labels `1..=count`, in order of first
/// appearance in row-major order) and returns how many there are.
pub fn flood_count(grid: &mut RasterGrid) -> usize {
    label_components(grid).pixels.len()
}

pub fn label_components(grid: &mut RasterGrid) -> ComponentStats {
    let res = grid.resolution;
    let mut all_runs: Vec<(usize, usize, usize)> = Vec::new();
    let mut row_start = Vec::with_capacity(res + 1);
    for i in 0..res {
        row_start.push(all_runs.len());
        all_runs.extend(runs(grid.row_words(i), res).into_iter().map(|(s, e)| (i, s, e)));
    }
    row_start.push(all_runs.len());

    let mut parent: Vec<u32> = (0..all_runs.len() as u32).collect();
    for i in 1..res {
        let (prev, cur) = (row_start[i - 1]..row_start[i], row_start[i]..row_start[i + 1]);
        let (mut a, mut b) = (prev.start, cur.start);
        while a < prev.end && b < cur.end {
            let (_, sa, ea) = all_runs[a];
            let (_, sb, eb) = all_runs[b];
            if sa < eb && sb < ea {
                union(&mut parent, a as u32, b as u32);
            }
            if ea < eb {
                a += 1;
            } else {
                b += 1;
            }
        }
    }

    let mut label_of_root = vec![0u32; all_runs.len()];
    let mut stats = ComponentStats {
        pixels: Vec::new(),
        extent: Vec::new(),
    };
    let mut boxes: Vec<(usize, usize, usize, usize)> = Vec::new();
    grid.labels = vec![0u32; res * res];
    for k in 0..all_runs.len() {
        let root = find(&mut parent, k as u32) as usize;
        if label_of_root[root] == 0 {
            stats.pixels.push(0);
            boxes.push((usize::MAX, 0, usize::MAX, 0));
            label_of_root[root] = stats.pixels.len() as u32;
        }
        let label = label_of_root[root];
        let (row, s, e) = all_runs[k];
        let idx = label as usize - 1;
        stats.pixels[idx] += e - s;
        let bx = &mut boxes[idx];
        *bx = (bx.0.min(row), bx.1.max(row), bx.2.min(s), bx.3.max(e - 1));
        grid.labels[row * res + s..row * res + e].fill(label);
    }
    stats.extent = boxes
        .iter()
        .map(|&(r0, r1, c0, c1)| (r1 - r0 + 1).max(c1 - c0 + 1))
        .collect();
    grid.label_count = stats.pixels.len();
    stats
}

/// Pixel counts per image colour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PixelClasses {
    pub green: usize,
    pub red: usize,
    pub yellow: usize,
    pub white: usize,
    pub light_green: usize,
    /// Pixels inside the inradius disc that are not in the lemniscate.
    pub uncovered_inradius: usize,
}

fn classify(grid: &RasterGrid, row: usize, col: usize, inner: f64) -> [u8; 3] {
    let (x, y) = grid.center(row, col);
    let r2 = x * x + y * y;
    let inside = grid.inside(row, col);
    if r2 >= 1.0 {
        if inside {
            LIGHT_GREEN
        } else {
            WHITE
        }
    } else if !inside {
        RED
    } else if r2 <= inner * inner {
        YELLOW
    } else {
        GREEN
    }
}

pub fn pixel_classes(grid: &RasterGrid, degree: usize, kappa: f64) -> PixelClasses {
    let inner = annulus_inner_radius(degree, kappa);
    let mut out = PixelClasses::default();
    for row in 0..grid.resolution {
        for col in 0..grid.resolution {
            match classify(grid, row, col, inner) {
                GREEN => out.green += 1,
                RED => {
                    out.red += 1;
                    let (x, y) = grid.center(row, col);
                    if x * x + y * y <= inner * inner {
                        out.uncovered_inradius += 1;
                    }
                }
                YELLOW => out.yellow += 1,
                WHITE => out.white += 1,
                _ => out.light_green += 1,
            }
        }
    }
    out
}

/// PPM bytes: `P6` header then row-major RGB, top row first.
pub fn ppm_bytes(grid: &RasterGrid, poly: &RootedPolynomial, kappa: f64) -> Result<Vec<u8>, RasterError> {
    if !grid.is_labeled() {
        return Err(RasterError::Unlabeled);
    }
    let res = grid.resolution;
    let inner = annulus_inner_radius(poly.degree(), kappa);
    let header = format!("P6\n{res} {res}\n255\n");
    let mut out = Vec::with_capacity(header.len() + 3 * res * res);
    out.extend_from_slice(header.as_bytes());
    for row in 0..res {
        for col in 0..res {
            out.extend_from_slice(&classify(grid, row, col, inner));
        }
    }
    Ok(out)
}

pub fn write_ppm(
    grid: &RasterGrid,
    poly: &RootedPolynomial,
    kappa: f64,
    path: &Path,
) -> Result<(), RasterError> {
    let bytes = ppm_bytes(grid, poly, kappa)?;
    let io = |source| RasterError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&bytes).map_err(io)?;
    w.flush().map_err(io)
}
