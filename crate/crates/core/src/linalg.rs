//! Dense linear algebra over the prime field, used for residue
//! decompositions and horizontal-section systems.

use crate::padics::PrimeField;

/// Row-major dense matrix over F_p.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl FpMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        FpMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, other: &FpMatrix, field: &PrimeField) -> FpMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = FpMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = field.add(out.get(i, j), field.mul(a, other.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[u64], field: &PrimeField) -> Vec<u64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = 0;
                for j in 0..self.cols {
                    acc = field.add(acc, field.mul(self.get(i, j), v[j]));
                }
                acc
            })
            .collect()
    }

    /// In-place reduced row echelon form; returns the pivot columns.
    pub fn rref(&mut self, field: &PrimeField) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(pr) = (row..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            for j in 0..self.cols {
                let tmp = self.get(row, j);
                self.set(row, j, self.get(pr, j));
                self.set(pr, j, tmp);
            }
            let inv = field.inv(self.get(row, col));
            for j in 0..self.cols {
                self.set(row, j, field.mul(inv, self.get(row, j)));
            }
            for r in 0..self.rows {
                if r != row && self.get(r, col) != 0 {
                    let f = self.get(r, col);
                    for j in 0..self.cols {
                        let v = field.sub(self.get(r, j), field.mul(f, self.get(row, j)));
                        self.set(r, j, v);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    /// Basis of the right nullspace, one vector per free column.
    pub fn kernel(&self, field: &PrimeField) -> Vec<Vec<u64>> {
        let mut m = self.clone();
        let pivots = m.rref(field);
        let mut basis = Vec::new();
        let mut pivot_of_col = vec![None; self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            pivot_of_col[c] = Some(r);
        }
        for free in 0..self.cols {
            if pivot_of_col[free].is_some() {
                continue;
            }
            let mut v = vec![0u64; self.cols];
            v[free] = 1;
            for (c, pr) in pivot_of_col.iter().enumerate() {
                if let Some(r) = pr {
                    v[c] = field.neg(m.get(*r, free));
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Inverse of a square matrix, or `None` if singular.
    pub fn inverse(&self, field: &PrimeField) -> Option<FpMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = FpMatrix::zero(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, n + i, 1);
        }
        let pivots = aug.rref(field);
        if pivots.len() != n || pivots.iter().enumerate().any(|(i, &c)| c != i) {
            return None;
        }
        let mut inv = FpMatrix::zero(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug.get(i, n + j));
            }
        }
        Some(inv)
    }

    pub fn rank(&self, field: &PrimeField) -> usize {
        self.clone().rref(field).len()
    }
}
