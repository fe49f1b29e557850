//! Dense row-major 2-D containers shared by every module.

use crate::error::{Error, Result};

/// Row-major 2-D array. Row 0 is the top of the image.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Integer label raster: 0 is background/road, k > 0 an instance or class id.
pub type LabelMap = Grid<u32>;

/// 8-bit RGB raster.
pub type RgbImage = Grid<[u8; 3]>;

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "raster of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.cols + col]
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Checks that `other` has the same shape, naming it in the error.
    pub fn ensure_same_dims<U>(&self, other: &Grid<U>, what: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimMismatch {
                what,
                rows: self.rows,
                cols: self.cols,
                got_rows: other.rows,
                got_cols: other.cols,
            });
        }
        Ok(())
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }
}

impl Grid<u32> {
    pub fn to_binary(&self) -> Grid<bool> {
        self.map(|&v| v != 0)
    }
}

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Detector output: per-pixel obstacle likelihood plus the region to score.
#[derive(Clone, Debug)]
pub struct ScoreMap {
    pub values: Grid<f32>,
    pub eval_mask: Grid<bool>,
}

impl ScoreMap {
    /// Score map evaluated everywhere.
    pub fn new(values: Grid<f32>) -> Result<Self> {
        let (rows, cols) = values.dims();
        Self::with_mask(values, Grid::filled(rows, cols, true))
    }

    pub fn with_mask(values: Grid<f32>, eval_mask: Grid<bool>) -> Result<Self> {
        values.ensure_same_dims(&eval_mask, "eval mask")?;
        if let Some(i) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { values, eval_mask })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }
}
