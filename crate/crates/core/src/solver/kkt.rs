//! Assembly, ordering and solution of the reduced primal-dual system
//!
//! ```text
//!   [ W + Σ + δ_w I    Jᵀ ] [dx]   [r_x]
//!   [ J               -D  ] [dλ] = [r_c]
//! ```

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use super::ldl::{Factor, Inertia, Symbolic, UpperCsc};

const PIVOT_THRESHOLD: f64 = 1e-13;
const PIVOT_DELTA: f64 = 2e-7;

pub(crate) struct Kkt {
    n: usize,
    m: usize,
    /// `perm[node] = position` in the factorized ordering.
    perm: Vec<usize>,
    mat: UpperCsc,
    reg: UpperCsc,
    hess_pos: Vec<usize>,
    jac_pos: Vec<usize>,
    diag_pos: Vec<usize>,
    signs: Vec<f64>,
    sym: Symbolic,
    factor: Factor,
    work: Vec<f64>,
    resid: Vec<f64>,
}

impl Kkt {
    pub fn new(
        n: usize,
        m: usize,
        hess: &[(usize, usize)],
        jac: &[(usize, usize)],
        groups: Option<(Vec<u64>, Vec<u64>)>,
    ) -> Self {
        let dim = n + m;
        // Upper-triangular entries in node numbering: (min, max).
        let mut entries: Vec<(usize, usize)> = Vec::with_capacity(dim + hess.len() + jac.len());
        for i in 0..dim {
            entries.push((i, i));
        }
        for &(r, c) in hess {
            entries.push((c.min(r), c.max(r)));
        }
        for &(r, c) in jac {
            entries.push((c, n + r));
        }

        let perm = match groups {
            Some((vg, rg)) => group_ordering(n, m, &vg, &rg),
            None => rcm_ordering(dim, &entries),
        };

        // Map to permuted upper triangle, merging duplicates.
        let mut map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let permuted: Vec<(usize, usize)> = entries
            .iter()
            .map(|&(i, j)| {
                let (pi, pj) = (perm[i], perm[j]);
                (pi.min(pj), pi.max(pj))
            })
            .collect();
        for &(i, j) in &permuted {
            let len = map.len();
            map.entry((j, i)).or_insert(len);
        }
        // Column-major order: key (col, row).
        let mut colptr = vec![0usize; dim + 1];
        let mut rowidx = Vec::with_capacity(map.len());
        let mut slot = vec![0usize; map.len()];
        for (k, (&(col, row), &id)) in map.iter().enumerate() {
            colptr[col + 1] += 1;
            rowidx.push(row);
            slot[id] = k;
        }
        for j in 0..dim {
            colptr[j + 1] += colptr[j];
        }
        let lookup = |i: usize, j: usize| -> usize { slot[map[&(j, i)]] };
        let mut pos_iter = permuted.iter().map(|&(i, j)| lookup(i, j));
        let diag_pos: Vec<usize> = (&mut pos_iter).take(dim).collect();
        let hess_pos: Vec<usize> = (&mut pos_iter).take(hess.len()).collect();
        let jac_pos: Vec<usize> = pos_iter.collect();

        let nnz = rowidx.len();
        let mat = UpperCsc {
            n: dim,
            colptr,
            rowidx,
            values: vec![0.0; nnz],
        };
        let mut signs = vec![0.0; dim];
        for node in 0..dim {
            signs[perm[node]] = if node < n { 1.0 } else { -1.0 };
        }
        let sym = Symbolic::analyze(&mat);
        let factor = Factor::new(&sym);
        Self {
            n,
            m,
            perm,
            reg: mat.clone(),
            mat,
            hess_pos,
            jac_pos,
            diag_pos,
            signs,
            sym,
            factor,
            work: vec![0.0; dim],
            resid: vec![0.0; dim],
        }
    }

    pub fn factor_nnz(&self) -> usize {
        self.sym.factor_nnz()
    }

    /// Loads Hessian, Jacobian and diagonal terms (`var_diag` is added to the
    /// primal diagonal, `row_diag` is subtracted on the dual diagonal).
    pub fn assemble(&mut self, hess: &[f64], jac: &[f64], var_diag: &[f64], row_diag: &[f64]) {
        let vals = &mut self.mat.values;
        vals.iter_mut().for_each(|v| *v = 0.0);
        for (k, &h) in hess.iter().enumerate() {
            vals[self.hess_pos[k]] += h;
        }
        for (k, &a) in jac.iter().enumerate() {
            vals[self.jac_pos[k]] += a;
        }
        for i in 0..self.n {
            vals[self.diag_pos[i]] += var_diag[i];
        }
        for r in 0..self.m {
            vals[self.diag_pos[self.n + r]] -= row_diag[r];
        }
    }

    /// Factorizes the assembled matrix with an extra `delta_w` on the primal
    /// diagonal and `delta_c` on the dual diagonal.
    pub fn factorize(&mut self, delta_w: f64, delta_c: f64) -> Inertia {
        self.reg.values.copy_from_slice(&self.mat.values);
        for i in 0..self.n {
            self.reg.values[self.diag_pos[i]] += delta_w;
        }
        for r in 0..self.m {
            self.reg.values[self.diag_pos[self.n + r]] -= delta_c;
        }
        self.factor
            .factor(&self.reg, &self.sym, &self.signs, PIVOT_THRESHOLD, PIVOT_DELTA)
    }

    pub fn inertia_ok(&self, inertia: &Inertia) -> bool {
        inertia.positive == self.n && inertia.negative == self.m && inertia.regularized == 0
    }

    /// Solves with the last factorization; `rhs` is in node order and is
    /// overwritten with the solution. Refines against the matrix including
    /// `delta_w`/`delta_c` but excluding pivot regularization.
    pub fn solve(&mut self, rhs: &mut [f64], delta_w: f64, delta_c: f64) -> f64 {
        let dim = self.n + self.m;
        let mut b = vec![0.0; dim];
        for node in 0..dim {
            b[self.perm[node]] = rhs[node];
        }
        let bnorm = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut x = b.clone();
        self.factor.solve(&mut x);
        let mut rnorm = self.residual(&x, &b, delta_w, delta_c);
        for _ in 0..10 {
            if rnorm <= 1e-13 * (1.0 + bnorm) {
                break;
            }
            self.work.copy_from_slice(&self.resid);
            self.factor.solve(&mut self.work);
            let trial: Vec<f64> = x.iter().zip(self.work.iter()).map(|(a, d)| a + d).collect();
            let tnorm = self.residual(&trial, &b, delta_w, delta_c);
            if tnorm >= rnorm {
                // restore residual of the accepted iterate
                self.residual(&x, &b, delta_w, delta_c);
                break;
            }
            x = trial;
            rnorm = tnorm;
        }
        for node in 0..dim {
            rhs[node] = x[self.perm[node]];
        }
        rnorm / (1.0 + bnorm)
    }

    fn residual(&mut self, x: &[f64], b: &[f64], delta_w: f64, delta_c: f64) -> f64 {
        let dim = self.n + self.m;
        self.mat.sym_mul(x, &mut self.resid);
        let mut norm = 0.0f64;
        for p in 0..dim {
            let node_is_var = self.signs[p] > 0.0;
            let shift = if node_is_var { delta_w } else { -delta_c };
            let r = b[p] - self.resid[p] - shift * x[p];
            self.resid[p] = r;
            norm = norm.max(r.abs());
        }
        norm
    }
}

fn group_ordering(n: usize, m: usize, vg: &[u64], rg: &[u64]) -> Vec<usize> {
    let mut nodes: Vec<(u64, u8, usize)> = Vec::with_capacity(n + m);
    for (i, &g) in vg.iter().enumerate() {
        nodes.push((g, 0, i));
    }
    for (r, &g) in rg.iter().enumerate() {
        nodes.push((g, 1, n + r));
    }
    nodes.sort_unstable();
    let mut perm = vec![0usize; n + m];
    for (pos, &(_, _, node)) in nodes.iter().enumerate() {
        perm[node] = pos;
    }
    perm
}

/// Reverse Cuthill–McKee ordering of the symmetric pattern.
fn rcm_ordering(dim: usize, entries: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for &(i, j) in entries {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut visited = vec![false; dim];
    let mut order = Vec::with_capacity(dim);
    let mut by_degree: Vec<usize> = (0..dim).collect();
    by_degree.sort_by_key(|&i| adj[i].len());
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| adj[w].len());
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    let mut perm = vec![0usize; dim];
    for (pos, &node) in order.iter().enumerate() {
        perm[node] = pos;
    }
    perm
}
