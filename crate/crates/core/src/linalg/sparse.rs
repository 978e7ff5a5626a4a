use std::io::{self, Write};

/// Coordinate-format accumulator. Duplicate entries are summed on
/// [`TripletBuilder::finalize`].
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn with_capacity(rows: usize, cols: usize, capacity: usize) -> Self {
        Self { rows, cols, entries: Vec::with_capacity(capacity) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols, "({row}, {col}) out of {}x{}", self.rows, self.cols);
        self.entries.push((row, col, value));
    }

    pub fn finalize(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut iter = self.entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..self.rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { rows: self.rows, cols: self.cols, row_ptr, col_idx, values }
    }
}

/// Compressed sparse row matrix. Column indices are sorted and unique within
/// each row and no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TripletBuilder::new(rows, cols).finalize()
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut t = TripletBuilder::with_capacity(diag.len(), diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            t.push(i, i, d);
        }
        t.finalize()
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let mut t = TripletBuilder::new(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                t.push(i, j, data[i * cols + j]);
            }
        }
        t.finalize()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries `(col, value)` of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "mul_vec: dimension mismatch");
        assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// `selfᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "mul_transpose_vec: dimension mismatch");
        let mut y = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = TripletBuilder::with_capacity(self.cols, self.rows, self.nnz());
        for (r, c, v) in self.triplets() {
            t.push(c, r, v);
        }
        t.finalize()
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, other.rows, "matmul: dimension mismatch");
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; other.cols];
        let mut marker = vec![usize::MAX; other.cols];
        let mut touched = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    col_idx.push(c);
                    values.push(acc[c]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        SparseMatrix { rows: self.rows, cols: other.cols, row_ptr, col_idx, values }
    }

    /// `diag(left) · self · diag(right)`; either side may be omitted.
    pub fn scale(&self, left: Option<&[f64]>, right: Option<&[f64]>) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            let lr = left.map_or(1.0, |l| l[r]);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let rc = right.map_or(1.0, |rv| rv[self.col_idx[k]]);
                out.values[k] *= lr * rc;
            }
        }
        out.drop_zeros();
        out
    }

    /// `a · self + b · other`
    pub fn add_scaled(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add_scaled: shape mismatch");
        let mut t = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz() + other.nnz());
        for (r, c, v) in self.triplets() {
            t.push(r, c, a * v);
        }
        for (r, c, v) in other.triplets() {
            t.push(r, c, b * v);
        }
        t.finalize()
    }

    /// Linear combination `Σ wᵢ Aᵢ` of equally shaped matrices.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> SparseMatrix {
        let (rows, cols) = (terms[0].1.rows, terms[0].1.cols);
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut t = TripletBuilder::with_capacity(rows, cols, cap);
        for (w, m) in terms {
            assert_eq!((m.rows, m.cols), (rows, cols), "linear_combination: shape mismatch");
            for (r, c, v) in m.triplets() {
                t.push(r, c, w * v);
            }
        }
        t.finalize()
    }

    /// Block diagonal `diag(self, self)`.
    pub fn block_diag2(&self) -> SparseMatrix {
        let mut t = TripletBuilder::with_capacity(2 * self.rows, 2 * self.cols, 2 * self.nnz());
        for (r, c, v) in self.triplets() {
            t.push(r, c, v);
            t.push(r + self.rows, c + self.cols, v);
        }
        t.finalize()
    }

    /// Replaces the rows and columns of `fixed` dofs by the identity.
    pub fn constrain_symmetric(&self, fixed: &[bool]) -> SparseMatrix {
        assert_eq!(self.rows, self.cols);
        assert_eq!(fixed.len(), self.rows);
        let mut t = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz());
        for (r, c, v) in self.triplets() {
            if !fixed[r] && !fixed[c] {
                t.push(r, c, v);
            }
        }
        for (i, &f) in fixed.iter().enumerate() {
            if f {
                t.push(i, i, 1.0);
            }
        }
        t.finalize()
    }

    /// Zeroes the rows flagged in `fixed`.
    pub fn zero_rows(&self, fixed: &[bool]) -> SparseMatrix {
        assert_eq!(fixed.len(), self.rows);
        let mut t = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz());
        for (r, c, v) in self.triplets() {
            if !fixed[r] {
                t.push(r, c, v);
            }
        }
        t.finalize()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.triplets().all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol * (1.0 + v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.add_scaled(1.0, other, -1.0).values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Matrix-market coordinate export (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut t = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz());
        for (r, c, v) in self.triplets() {
            t.push(r, c, v);
        }
        *self = t.finalize();
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
