//! Dense two-dimensional grids indexed by (subcarrier, symbol).
//!
//! Storage is column-major: the subcarrier index varies fastest, so the
//! flat buffer is exactly `vec(H)` with column stacking.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type ComplexGrid = Grid<Complex64>;
pub type RealGrid = Grid<f64>;

impl<T: Copy + Default> Grid<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for m in 0..cols {
            for n in 0..rows {
                data.push(f(n, m));
            }
        }
        Self { rows, cols, data }
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T> Grid<T> {
    /// Wraps a column-major buffer. Panics if the length is not `rows * cols`.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length must be rows * cols");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn linear_index(&self, n: usize, m: usize) -> usize {
        debug_assert!(n < self.rows && m < self.cols);
        n + self.rows * m
    }

    /// Inverse of [`Grid::linear_index`].
    #[inline]
    pub fn cell(&self, idx: usize) -> (usize, usize) {
        (idx % self.rows, idx / self.rows)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn column(&self, m: usize) -> &[T] {
        &self.data[m * self.rows..(m + 1) * self.rows]
    }

    pub fn column_mut(&mut self, m: usize) -> &mut [T] {
        &mut self.data[m * self.rows..(m + 1) * self.rows]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (n, m): (usize, usize)) -> &T {
        &self.data[self.linear_index(n, m)]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (n, m): (usize, usize)) -> &mut T {
        let idx = self.linear_index(n, m);
        &mut self.data[idx]
    }
}

impl ComplexGrid {
    /// Sum of squared magnitudes of all entries.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
