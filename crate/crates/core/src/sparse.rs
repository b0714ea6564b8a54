//! Triplet-to-CSC assembly shared by the LP/QP backends.

use clarabel::algebra::CscMatrix;

/// Accumulates (row, col, value) triplets and converts them to the
/// compressed sparse column form Clarabel consumes. Duplicate entries are
/// summed; explicit zeros are dropped at insertion.
#[derive(Debug, Default, Clone)]
pub(crate) struct TripletMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn to_csc(&self) -> CscMatrix<f64> {
        let mut sorted = self.entries.clone();
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));

        let mut counts = vec![0usize; self.cols];
        let mut rowval: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((c, r)) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                counts[c] += 1;
                last = Some((c, r));
            }
        }
        let mut colptr = vec![0usize; self.cols + 1];
        for c in 0..self.cols {
            colptr[c + 1] = colptr[c] + counts[c];
        }
        CscMatrix::new(self.rows, self.cols, colptr, rowval, nzval)
    }
}
