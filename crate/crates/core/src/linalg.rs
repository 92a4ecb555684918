//! Sparse storage for assembled operators and a banded Cholesky solver.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Square CSR matrix with a fixed, sorted sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix whose pattern couples interior dofs sharing an element.
    pub fn dof_pattern(mesh: &Mesh) -> Self {
        let n = mesh.num_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in mesh.elements() {
            for &a in el.vertices {
                let Some(i) = mesh.dof_of(a) else { continue };
                for &b in el.vertices {
                    if let Some(j) = mesh.dof_of(b) {
                        rows[i].push(j);
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        let k = row
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.vals[self.row_ptr[i] + k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.row(i).map(|(j, a)| a * x[j]).sum())
    }

    /// `x^T A y`.
    pub fn quad_form(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(y))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                m[(i, j)] = a;
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, a)| (a - self.get(j, i)).abs() <= tol))
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Writes one `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                writeln!(w, "{i} {j} {a:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Cholesky factor of a symmetric positive definite band matrix, stored as
/// the lower band `L[i][i - k]` for `k <= bw`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i holds L[i, i-bw ..= i] (leading entries unused when i < bw)
    band: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    band[i * w + (bw - (i - j))] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = band[i * w + (bw - (i - j))];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= band[i * w + (bw - (i - k))] * band[j * w + (bw - (j - k))];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Factorization(format!(
                            "matrix not positive definite at pivot {i}"
                        )));
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (bw - (i - j))] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let l = |i: usize, j: usize| self.band[i * w + (bw - (i - j))];
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l(i, k) * y[k];
            }
            y[i] = s / l(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= l(k, i) * y[k];
            }
            y[i] = s / l(i, i);
        }
        y
    }
}

/// Stiffness matrix of the Dirichlet Laplacian on interior dofs.
pub fn laplace_stiffness(mesh: &Mesh) -> CsrMatrix {
    let mut k = CsrMatrix::dof_pattern(mesh);
    for el in mesh.elements() {
        for (a, &va) in el.vertices.iter().enumerate() {
            let Some(i) = mesh.dof_of(va) else { continue };
            for (b, &vb) in el.vertices.iter().enumerate() {
                let Some(j) = mesh.dof_of(vb) else { continue };
                let dot: f64 = el
                    .shape_grad(a)
                    .iter()
                    .zip(el.shape_grad(b))
                    .map(|(x, y)| x * y)
                    .sum();
                k.add(i, j, el.volume * dot);
            }
        }
    }
    k
}

/// The `H^1_0` inner product on interior dofs, with its factorization.
#[derive(Debug, Clone)]
pub struct LaplaceMetric {
    stiffness: CsrMatrix,
    chol: BandCholesky,
}

impl LaplaceMetric {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let stiffness = laplace_stiffness(mesh);
        let chol = BandCholesky::factor(&stiffness)?;
        Ok(Self { stiffness, chol })
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Riesz representative `G^{-1} r` of a covector.
    pub fn riesz(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(r)
    }

    /// `sqrt(r^T G^{-1} r)`.
    pub fn dual_norm(&self, r: &DVector<f64>) -> f64 {
        r.dot(&self.riesz(r)).max(0.0).sqrt()
    }

    /// `sqrt(x^T G x)`.
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.stiffness.quad_form(x, x).max(0.0).sqrt()
    }
}
