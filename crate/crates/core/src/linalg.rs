//! Dense linear-algebra helpers on top of nalgebra.
//!
//! The centerpiece is [`RealSchur`], a real Schur decomposition whose
//! diagonal blocks can be reordered so that a chosen set of eigenvalues
//! occupies the leading block. The leading Schur vectors then span the
//! corresponding invariant subspace.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// A diagonal block of a quasi-triangular Schur factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurBlock {
    pub start: usize,
    pub size: usize,
}

/// Real Schur decomposition `A = Q T Qᵀ` with reorderable diagonal blocks.
#[derive(Debug, Clone)]
pub struct RealSchur {
    q: Matrix,
    t: Matrix,
    blocks: Vec<SchurBlock>,
}

impl RealSchur {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "Schur decomposition needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenFailure("matrix has non-finite entries".into()));
        }
        let n = a.nrows();
        if n == 0 {
            return Ok(Self { q: Matrix::zeros(0, 0), t: Matrix::zeros(0, 0), blocks: vec![] });
        }
        let max_iter = 300 * n;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5c4u64);
        for attempt in 0..5 {
            let (z, m) = if attempt == 0 {
                (Matrix::identity(n, n), a.clone())
            } else {
                // A stalled QR sweep is usually broken by a random orthogonal similarity.
                let z = random_orthogonal(n, &mut rng);
                let m = z.transpose() * a * &z;
                (z, m)
            };
            if let Some(schur) = nalgebra::Schur::try_new(m, f64::EPSILON, max_iter) {
                let (q, t) = schur.unpack();
                let mut out = Self { q: z * q, t, blocks: vec![] };
                out.standardize();
                return Ok(out);
            }
        }
        Err(Error::EigenFailure(format!("real Schur iteration did not converge (n = {n})")))
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn t(&self) -> &Matrix {
        &self.t
    }

    pub fn blocks(&self) -> &[SchurBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Eigenvalues of one block (one value for 1x1, two for 2x2).
    pub fn block_eigenvalues(&self, b: SchurBlock) -> Vec<Complex64> {
        let k = b.start;
        if b.size == 1 {
            vec![Complex64::new(self.t[(k, k)], 0.0)]
        } else {
            let (l1, l2) = eig2x2(
                self.t[(k, k)],
                self.t[(k, k + 1)],
                self.t[(k + 1, k)],
                self.t[(k + 1, k + 1)],
            );
            vec![l1, l2]
        }
    }

    /// All eigenvalues in block order.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks.iter().flat_map(|&b| self.block_eigenvalues(b)).collect()
    }

    /// Move every block for which `select` holds to the leading position,
    /// preserving relative order. Returns the dimension of the leading
    /// invariant subspace.
    pub fn reorder_by<F>(&mut self, select: F) -> Result<usize>
    where
        F: Fn(Complex64) -> bool,
    {
        let mask: Vec<bool> = self
            .blocks
            .iter()
            .map(|&b| select(self.block_eigenvalues(b)[0]))
            .collect();
        self.reorder(&mask)
    }

    /// Reorder with an explicit per-block selection mask.
    pub fn reorder(&mut self, mask: &[bool]) -> Result<usize> {
        if mask.len() != self.blocks.len() {
            return Err(Error::Dimension("selection mask length differs from block count".into()));
        }
        let mut sel = mask.to_vec();
        let mut target = 0;
        for idx in 0..sel.len() {
            if !sel[idx] {
                continue;
            }
            let mut pos = idx;
            while pos > target {
                self.swap_adjacent(pos - 1)?;
                sel.swap(pos - 1, pos);
                pos -= 1;
            }
            target += 1;
        }
        Ok(self.blocks[..target].iter().map(|b| b.size).sum())
    }

    /// Orthonormal basis of the invariant subspace spanned by the first `k` Schur vectors.
    pub fn leading_basis(&self, k: usize) -> Matrix {
        self.q.columns(0, k).into_owned()
    }

    fn standardize(&mut self) {
        let n = self.t.nrows();
        for j in 0..n {
            for i in (j + 2)..n {
                self.t[(i, j)] = 0.0;
            }
        }
        self.blocks.clear();
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)] != 0.0 {
                let (a, b, c, d) =
                    (self.t[(i, i)], self.t[(i, i + 1)], self.t[(i + 1, i)], self.t[(i + 1, i + 1)]);
                let half = 0.5 * (a - d);
                let disc = half * half + b * c;
                if disc >= 0.0 {
                    self.split_real_block(i);
                    self.blocks.push(SchurBlock { start: i, size: 1 });
                    i += 1;
                    continue;
                }
                self.blocks.push(SchurBlock { start: i, size: 2 });
                i += 2;
            } else {
                if i + 1 < n {
                    self.t[(i + 1, i)] = 0.0;
                }
                self.blocks.push(SchurBlock { start: i, size: 1 });
                i += 1;
            }
        }
    }

    /// Triangularize a 2x2 block whose eigenvalues are real.
    fn split_real_block(&mut self, k: usize) {
        let (a, b, c, d) =
            (self.t[(k, k)], self.t[(k, k + 1)], self.t[(k + 1, k)], self.t[(k + 1, k + 1)]);
        let half = 0.5 * (a - d);
        let disc = (half * half + b * c).max(0.0);
        let mid = 0.5 * (a + d);
        let lam = if half >= 0.0 { mid + disc.sqrt() } else { mid - disc.sqrt() };
        let v1 = (b, lam - a);
        let v2 = (lam - d, c);
        let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
        let nrm = x.hypot(y);
        if nrm == 0.0 {
            self.t[(k + 1, k)] = 0.0;
            return;
        }
        let (cs, sn) = (x / nrm, y / nrm);
        let g = Matrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
        self.apply_local(k, &g);
        self.t[(k + 1, k)] = 0.0;
    }

    /// T ← Gᵀ T G and Q ← Q G on rows/columns k..k+s.
    fn apply_local(&mut self, k: usize, g: &Matrix) {
        let s = g.nrows();
        let n = self.t.nrows();
        let rows = g.transpose() * self.t.view((k, 0), (s, n));
        self.t.view_mut((k, 0), (s, n)).copy_from(&rows);
        let cols = self.t.view((0, k), (n, s)) * g;
        self.t.view_mut((0, k), (n, s)).copy_from(&cols);
        let qcols = self.q.view((0, k), (n, s)) * g;
        self.q.view_mut((0, k), (n, s)).copy_from(&qcols);
    }

    /// Swap blocks `i` and `i + 1`.
    fn swap_adjacent(&mut self, i: usize) -> Result<()> {
        let b1 = self.blocks[i];
        let b2 = self.blocks[i + 1];
        let (k, p, q) = (b1.start, b1.size, b2.size);
        let s = p + q;
        let a11 = self.t.view((k, k), (p, p)).into_owned();
        let a12 = self.t.view((k, k + p), (p, q)).into_owned();
        let a22 = self.t.view((k + p, k + p), (q, q)).into_owned();

        // A11 X − X A22 = −A12, vectorized column-major.
        let kron = Matrix::identity(q, q).kronecker(&a11)
            - a22.transpose().kronecker(&Matrix::identity(p, p));
        let rhs = -DVector::from_column_slice(a12.as_slice());
        let lu = kron.full_piv_lu();
        let x = lu.solve(&rhs).ok_or_else(|| {
            Error::EigenFailure("cannot swap Schur blocks with equal eigenvalues".into())
        })?;
        let x = Matrix::from_column_slice(p, q, x.as_slice());

        let mut m = Matrix::zeros(s, s);
        m.view_mut((0, 0), (p, q)).copy_from(&x);
        m.view_mut((p, 0), (q, q)).fill_with_identity();
        m.view_mut((0, q), (p, p)).fill_with_identity();
        let g = QR::new(m).q();

        let scale = self.t.norm().max(f64::MIN_POSITIVE);
        self.apply_local(k, &g);
        let spill = self.t.view((k + q, k), (p, q)).norm();
        if spill > 1e3 * f64::EPSILON * scale * (1.0 + x.norm()) {
            return Err(Error::EigenFailure(format!(
                "Schur block swap is ill-conditioned (residual {spill:e})"
            )));
        }
        self.t.view_mut((k + q, k), (p, q)).fill(0.0);
        self.blocks[i] = SchurBlock { start: k, size: q };
        self.blocks[i + 1] = SchurBlock { start: k + q, size: p };
        Ok(())
    }
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    QR::new(g).q()
}

/// Eigenvalues of `[[a, b], [c, d]]`, positive imaginary part first.
pub fn eig2x2(a: f64, b: f64, c: f64, d: f64) -> (Complex64, Complex64) {
    let half = 0.5 * (a - d);
    let mid = 0.5 * (a + d);
    let disc = half * half + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (Complex64::new(mid + r, 0.0), Complex64::new(mid - r, 0.0))
    } else {
        let r = (-disc).sqrt();
        (Complex64::new(mid, r), Complex64::new(mid, -r))
    }
}

pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>> {
    Ok(RealSchur::new(a)?.eigenvalues())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &Matrix) -> Vector {
    let s = symmetrize(a);
    let mut v: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    Vector::from_vec(v)
}

pub fn min_sym_eig(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    sym_eigenvalues(a)[0]
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SVD::new(a.clone(), false, false).singular_values.max()
}

/// `b ⪯ a` in the Loewner order, up to `tol`.
pub fn loewner_geq(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    min_sym_eig(&(a - b)) >= -tol
}

fn sorted_svd(a: &Matrix) -> (Vec<f64>, Matrix) {
    let (m, n) = a.shape();
    // Pad wide matrices so the thin SVD returns a full right basis.
    let padded = if m < n {
        let mut p = Matrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let v = Matrix::from_fn(n, idx.len(), |r, c| vt[(idx[c], r)]);
    (sv, v)
}

/// Orthonormal basis of `ker a`, using singular values `≤ rel_tol · σ_max`.
pub fn null_space(a: &Matrix, rel_tol: f64) -> Matrix {
    let n = a.ncols();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let (sv, v) = sorted_svd(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Matrix::identity(n, n);
    }
    let rank = sv.iter().filter(|&&s| s > rel_tol * smax).count();
    v.columns(rank, n - rank).into_owned()
}

/// Orthonormal basis of `ker a` using an absolute singular-value threshold.
pub fn null_space_abs(a: &Matrix, abs_tol: f64) -> Matrix {
    let n = a.ncols();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return Matrix::identity(n, n);
    }
    let (sv, v) = sorted_svd(a);
    let rank = sv.iter().filter(|&&s| s > abs_tol).count();
    v.columns(rank, n - rank).into_owned()
}

/// Numerical rank with singular-value threshold `rel_tol · σ_max`.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = SVD::new(a.clone(), false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal basis of the column space of `a`.
pub fn range_basis(a: &Matrix, rel_tol: f64) -> Matrix {
    if a.ncols() == 0 {
        return Matrix::zeros(a.nrows(), 0);
    }
    let svd = SVD::new(a.clone(), true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_tol * smax)
        .collect();
    Matrix::from_fn(a.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis of `span(v1) ∩ span(v2)` for orthonormal inputs.
pub fn intersect_subspaces(v1: &Matrix, v2: &Matrix, tol: f64) -> Matrix {
    let n = v1.nrows();
    if v1.ncols() == 0 || v2.ncols() == 0 {
        return Matrix::zeros(n, 0);
    }
    let p1 = Matrix::identity(n, n) - v1 * v1.transpose();
    let p2 = Matrix::identity(n, n) - v2 * v2.transpose();
    let mut stacked = Matrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&p1);
    stacked.view_mut((n, 0), (n, n)).copy_from(&p2);
    let (sv, v) = sorted_svd(&stacked);
    let dim = sv.iter().filter(|&&s| s <= tol).count();
    v.columns(n - dim, dim).into_owned()
}

/// Real counterpart of [`complex_smallest_singular`].
pub fn smallest_singular(a: &Matrix, j: usize) -> (Matrix, f64, f64) {
    let n = a.ncols();
    let (sv, v) = sorted_svd(a);
    // `sorted_svd` is descending and pads wide inputs, so it always has n values.
    let basis = Matrix::from_fn(n, j, |r, c| v[(r, n - 1 - c)]);
    let sj = if j == 0 { 0.0 } else { sv[n - j] };
    let next = if j < n { sv[n - 1 - j] } else { f64::INFINITY };
    (basis, sj, next)
}

/// The `j` right singular vectors of `a` with smallest singular values,
/// together with the `j`-th smallest singular value and the next one up
/// (`+∞` when there is none).
pub fn complex_smallest_singular(
    a: &DMatrix<Complex64>,
    j: usize,
) -> (DMatrix<Complex64>, f64, f64) {
    let n = a.ncols();
    let svd = SVD::new(a.clone(), false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let basis = DMatrix::from_fn(n, j, |r, c| vt[(idx[c], r)].conj());
    let sj = if j == 0 { 0.0 } else { svd.singular_values[idx[j - 1]] };
    let next = if j < idx.len() { svd.singular_values[idx[j]] } else { f64::INFINITY };
    (basis, sj, next)
}

/// A group of numerically coincident eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub center: Complex64,
    pub multiplicity: usize,
}

/// Group eigenvalues whose pairwise distance chains stay within `radius`.
pub fn cluster_eigenvalues(eigs: &[Complex64], radius: f64) -> Vec<EigenCluster> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut c = i;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let sum: Complex64 = members.iter().map(|&i| eigs[i]).sum();
            EigenCluster { center: sum / members.len() as f64, multiplicity: members.len() }
        })
        .collect()
}

/// Solve the Sylvester equation `A X + X B = C` by Kronecker vectorization.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (m, n) = (a.nrows(), b.nrows());
    let k = Matrix::identity(n, n).kronecker(a) + b.transpose().kronecker(&Matrix::identity(m, m));
    let rhs = DVector::from_column_slice(c.as_slice());
    let x = k
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Sylvester operator".into()))?;
    Ok(Matrix::from_column_slice(m, n, x.as_slice()))
}

pub fn to_complex(a: &Matrix) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}
