//! Rectangular windows and row-major scalar grids with the binary,
//! CSV and PGM export formats shared by the potential and measure code.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rect { re_min, re_max, im_min, im_max }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn contains(&self, p: Complex64) -> bool {
        p.re >= self.re_min && p.re <= self.re_max && p.im >= self.im_min && p.im <= self.im_max
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }
}

/// Row-major grid of `f64` sampled at the nodes of a window. Node `(i, j)`
/// sits at `re_min + i*hx`, `im_min + j*hy` with `i` the column index.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub window: Rect,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(window: Rect, width: usize, height: usize) -> Self {
        Grid { window, width, height, data: vec![0.0; width * height] }
    }

    pub fn hx(&self) -> f64 {
        self.window.width() / (self.width - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.window.height() / (self.height - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.window.re_min + i as f64 * self.hx(),
            self.window.im_min + j as f64 * self.hy(),
        )
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.width + i] = v;
    }

    /// Nearest node indices for a point inside the window.
    pub fn nearest(&self, p: Complex64) -> (usize, usize) {
        let i = ((p.re - self.window.re_min) / self.hx()).round();
        let j = ((p.im - self.window.im_min) / self.hy()).round();
        (
            (i.max(0.0) as usize).min(self.width - 1),
            (j.max(0.0) as usize).min(self.height - 1),
        )
    }

    /// Binary dump: 32-byte little-endian header
    /// `magic[4] | width u32 | height u32 | window 4 x f32 | pad[4]`,
    /// followed by row-major f64 values.
    pub fn write_binary(&self, path: &Path, magic: &[u8; 4]) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + 8 * self.data.len());
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in [
            self.window.re_min,
            self.window.re_max,
            self.window.im_min,
            self.window.im_max,
        ] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf.extend_from_slice(&[0u8; 4]);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// CSV export: header row then `re,im,value` per node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("re,im,value\n");
        for j in 0..self.height {
            for i in 0..self.width {
                let p = self.node(i, j);
                out.push_str(&format!("{},{},{}\n", p.re, p.im, self.get(i, j)));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// 16-bit P5 PGM with either affine or log mapping of values to gray.
    /// Returns the mapping parameters for the sidecar.
    pub fn write_pgm(&self, path: &Path, log_scale: bool) -> Result<PgmMapping> {
        let transformed: Vec<f64> = self
            .data
            .iter()
            .map(|&v| {
                let v = if v.is_finite() { v } else { 0.0 };
                if log_scale {
                    (v.max(0.0) + 1e-300).ln()
                } else {
                    v
                }
            })
            .collect();
        let lo = transformed.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = transformed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut buf = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        // Image rows top-down: highest im first.
        for j in (0..self.height).rev() {
            for i in 0..self.width {
                let t = (transformed[j * self.width + i] - lo) / span;
                let g = (t.clamp(0.0, 1.0) * 65535.0).round() as u16;
                buf.extend_from_slice(&g.to_be_bytes());
            }
        }
        std::fs::write(path, buf)?;
        Ok(PgmMapping { log_scale, value_min: lo, value_max: hi })
    }
}

/// Gray-mapping parameters recorded in the PGM sidecar JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PgmMapping {
    pub log_scale: bool,
    pub value_min: f64,
    pub value_max: f64,
}
