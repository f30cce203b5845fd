//! Sparse LDLᵀ factorization without pivoting for quasi-definite systems.
//!
//! The matrix is supplied as the upper triangle in compressed-column form,
//! with every diagonal entry present. Symbolic analysis (elimination tree and
//! column counts) is computed once; numeric factorizations reuse it.
//!
//! Each node carries an expected pivot sign. Pivots whose magnitude in that
//! sign falls under a threshold are replaced by a small regularization value
//! so that the factorization always completes; the caller recovers accuracy
//! with iterative refinement against the unperturbed matrix.

use alloc::vec;
use alloc::vec::Vec;

const NONE: usize = usize::MAX;

/// Upper-triangular CSC matrix.
#[derive(Clone, Debug)]
pub struct UpperCsc {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl UpperCsc {
    /// y = A x using the symmetric matrix represented by its upper triangle.
    pub fn sym_mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowidx[p];
                let a = self.values[p];
                y[i] += a * x[j];
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Symbolic {
    n: usize,
    etree: Vec<usize>,
    lp: Vec<usize>,
}

impl Symbolic {
    pub fn analyze(a: &UpperCsc) -> Self {
        let n = a.n;
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in a.colptr[j]..a.colptr[j + 1] {
                let mut i = a.rowidx[p];
                debug_assert!(i <= j, "matrix must be upper triangular");
                if i == j {
                    continue;
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        Self { n, etree, lp }
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }
}

/// Outcome counters of a numeric factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    /// Pivots that had to be replaced by the dynamic regularization.
    pub regularized: usize,
}

#[derive(Clone, Debug)]
pub struct Factor {
    n: usize,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    // scratch
    y_vals: Vec<f64>,
    y_marker: Vec<bool>,
    y_idx: Vec<usize>,
    elim: Vec<usize>,
    next_space: Vec<usize>,
}

impl Factor {
    pub fn new(sym: &Symbolic) -> Self {
        let n = sym.n;
        let nnz = sym.factor_nnz();
        Self {
            n,
            lp: sym.lp.clone(),
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            y_vals: vec![0.0; n],
            y_marker: vec![false; n],
            y_idx: vec![0; n],
            elim: vec![0; n],
            next_space: vec![0; n],
        }
    }

    /// Numeric factorization. `signs[k]` is +1 or -1, the pivot sign expected
    /// for a quasi-definite matrix. Pivots with `signs[k] * d < threshold` are
    /// counted by their true sign for the inertia and, if smaller in
    /// magnitude than `threshold`, replaced by `signs[k] * delta`.
    pub fn factor(&mut self, a: &UpperCsc, sym: &Symbolic, signs: &[f64], threshold: f64, delta: f64) -> Inertia {
        let n = self.n;
        let mut inertia = Inertia::default();
        self.next_space.copy_from_slice(&self.lp[..n]);
        self.y_marker.iter_mut().for_each(|m| *m = false);
        self.y_vals.iter_mut().for_each(|v| *v = 0.0);

        for k in 0..n {
            let mut nnz_y = 0usize;
            self.d[k] = 0.0;
            for p in a.colptr[k]..a.colptr[k + 1] {
                let bidx = a.rowidx[p];
                if bidx == k {
                    self.d[k] += a.values[p];
                    continue;
                }
                self.y_vals[bidx] += a.values[p];
                if !self.y_marker[bidx] {
                    self.y_marker[bidx] = true;
                    self.elim[0] = bidx;
                    let mut nnz_e = 1usize;
                    let mut next = sym.etree[bidx];
                    while next != NONE && next < k {
                        if self.y_marker[next] {
                            break;
                        }
                        self.y_marker[next] = true;
                        self.elim[nnz_e] = next;
                        nnz_e += 1;
                        next = sym.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        self.y_idx[nnz_y] = self.elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = self.y_idx[i];
                let end = self.next_space[c];
                let yc = self.y_vals[c];
                for p in self.lp[c]..end {
                    self.y_vals[self.li[p]] -= self.lx[p] * yc;
                }
                self.li[end] = k;
                let l = yc * self.dinv[c];
                self.lx[end] = l;
                self.d[k] -= yc * l;
                self.next_space[c] += 1;
                self.y_vals[c] = 0.0;
                self.y_marker[c] = false;
            }
            let dk = self.d[k];
            if dk > 0.0 {
                inertia.positive += 1;
            } else if dk < 0.0 {
                inertia.negative += 1;
            }
            if !(signs[k] * dk >= threshold) && (dk.abs() < threshold || !dk.is_finite()) {
                self.d[k] = signs[k] * delta;
                inertia.regularized += 1;
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        inertia
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for p in self.lp[i]..self.lp[i + 1] {
                    x[self.li[p]] -= self.lx[p] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.lp[i]..self.lp[i + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[i] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_upper(a: &[Vec<f64>]) -> UpperCsc {
        let n = a.len();
        let mut colptr = vec![0];
        let mut rowidx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                if a[i][j] != 0.0 || i == j {
                    rowidx.push(i);
                    values.push(a[i][j]);
                }
            }
            colptr.push(rowidx.len());
        }
        UpperCsc {
            n,
            colptr,
            rowidx,
            values,
        }
    }

    #[test]
    fn solves_quasi_definite_system() {
        // [H  Jᵀ; J -δ] with H = diag(4, 3, 2), J = [[1, 1, 0], [0, 1, 1]]
        let a = vec![
            vec![4.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 3.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 2.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0, -1e-8, 0.0],
            vec![0.0, 1.0, 1.0, 0.0, -1e-8],
        ];
        let m = dense_to_upper(&a);
        let sym = Symbolic::analyze(&m);
        let mut f = Factor::new(&sym);
        let signs = [1.0, 1.0, 1.0, -1.0, -1.0];
        let inertia = f.factor(&m, &sym, &signs, 1e-14, 1e-9);
        assert_eq!(inertia.positive, 3);
        assert_eq!(inertia.negative, 2);
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut x = b;
        f.solve(&mut x);
        let mut r = [0.0; 5];
        m.sym_mul(&x, &mut r);
        for i in 0..5 {
            assert!((r[i] - b[i]).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn reports_indefinite_primal_block() {
        let a = vec![vec![-1.0, 2.0], vec![2.0, 1.0]];
        let m = dense_to_upper(&a);
        let sym = Symbolic::analyze(&m);
        let mut f = Factor::new(&sym);
        let inertia = f.factor(&m, &sym, &[1.0, 1.0], 1e-14, 1e-9);
        assert_eq!(inertia.negative, 1);
        assert_eq!(inertia.positive, 1);
    }
}
