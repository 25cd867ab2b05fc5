//! Direct transcription of the infinite-horizon problem into a long but
//! finite sparse quadratic program. Used as an independent check on the
//! Riccati-based gains: nothing here touches an algebraic Riccati equation.
//!
//! The input is held constant on each step and the dynamics and cost are
//! discretized exactly. The first-order conditions of the resulting QP are a
//! banded linear system.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy)]
pub struct TranscriptionOptions {
    /// Coarse step; a second solve at half this step feeds Richardson extrapolation.
    pub step: f64,
    pub initial_horizon: f64,
    pub max_horizon: f64,
    /// Stop doubling the horizon once the gains move less than this.
    pub tolerance: f64,
}

impl Default for TranscriptionOptions {
    fn default() -> Self {
        Self { step: 4e-3, initial_horizon: 5.0, max_horizon: 160.0, tolerance: 1e-6 }
    }
}

/// First-input map `u(0) = −Kx0 + b` recovered from the transcription.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptionResult {
    #[serde(with = "crate::json::matrix")]
    pub k: Matrix,
    #[serde(with = "crate::json::vector")]
    pub b: Vector,
    pub horizon: f64,
    pub step: f64,
    pub converged: bool,
    /// Max change in `(K, b)` across the last horizon doubling.
    pub last_change: f64,
}

/// Exact zero-order-hold discretization of `ẋ = Ax + u + d` and the running
/// cost `xᵀQx + 2xᵀNu + uᵀRu + 2cᵀx` over one step.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub f: Matrix,
    pub g: Matrix,
    pub offset: Vector,
    /// Cost on `[x; u; 1]`.
    pub w: Matrix,
}

pub fn discretize(a: &Matrix, d: &Vector, q: &Matrix, n_cross: &Matrix, r: &Matrix, c: &Vector, h: f64) -> Discretized {
    let n = a.nrows();
    let z = 2 * n + 1;
    let mut m = Matrix::zeros(z, z);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).fill_diagonal(1.0);
    m.view_mut((0, 2 * n), (n, 1)).copy_from(d);
    let mut w = Matrix::zeros(z, z);
    w.view_mut((0, 0), (n, n)).copy_from(q);
    w.view_mut((0, n), (n, n)).copy_from(n_cross);
    w.view_mut((n, 0), (n, n)).copy_from(&n_cross.transpose());
    w.view_mut((n, n), (n, n)).copy_from(r);
    w.view_mut((0, 2 * n), (n, 1)).copy_from(c);
    w.view_mut((2 * n, 0), (1, n)).copy_from(&c.transpose());

    let mut big = Matrix::zeros(2 * z, 2 * z);
    big.view_mut((0, 0), (z, z)).copy_from(&(-m.transpose() * h));
    big.view_mut((0, z), (z, z)).copy_from(&(&w * h));
    big.view_mut((z, z), (z, z)).copy_from(&(&m * h));
    let e = big.exp();
    let phi = e.view((z, z), (z, z)).into_owned();
    let wd = phi.transpose() * e.view((0, z), (z, z));
    let wd = (&wd + wd.transpose()) * 0.5;
    Discretized {
        f: phi.view((0, 0), (n, n)).into_owned(),
        g: phi.view((0, n), (n, n)).into_owned(),
        offset: phi.view((0, 2 * n), (n, 1)).column(0).into_owned(),
        w: wd,
    }
}

/// LU factorization with partial pivoting of a banded matrix.
///
/// Row `i` is stored over columns `i − kl ..= i + kl + ku`; the extra `kl`
/// columns absorb fill-in from row swaps. Multipliers stay where they were
/// produced, so the row swaps and eliminations are replayed in order on solve.
pub struct BandedLu {
    dim: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Assembles from triplets; duplicate entries are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut kl = 0;
        let mut ku = 0;
        for &(i, j, _) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::Dimension(format!("entry ({i}, {j}) outside a {dim}x{dim} system")));
            }
            kl = kl.max(i.saturating_sub(j));
            ku = ku.max(j.saturating_sub(i));
        }
        let width = 2 * kl + ku + 1;
        let mut lu = Self { dim, kl, ku, width, ab: vec![0.0; dim * width], pivots: vec![0; dim] };
        for &(i, j, v) in triplets {
            *lu.at(i, j) += v;
        }
        lu.factor()?;
        Ok(lu)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.ab[k]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.dim;
        let scale = self.ab.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        for j in 0..n {
            let last_row = (j + self.kl).min(n - 1);
            let last_col = (j + self.kl + self.ku).min(n - 1);
            let mut p = j;
            for r in j + 1..=last_row {
                if self.get(r, j).abs() > self.get(p, j).abs() {
                    p = r;
                }
            }
            self.pivots[j] = p;
            if self.get(p, j).abs() <= 1e-14 * scale {
                return Err(Error::Singular(format!("banded system, column {j}")));
            }
            if p != j {
                for c in j..=last_col {
                    let (a, b) = (self.idx(j, c), self.idx(p, c));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.get(j, j);
            for r in j + 1..=last_row {
                let l = self.get(r, j) / pivot;
                if l == 0.0 {
                    continue;
                }
                *self.at(r, j) = l;
                for c in j + 1..=last_col {
                    let u = self.get(j, c);
                    if u != 0.0 {
                        *self.at(r, c) -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves in place; `rhs` is `dim × k`.
    pub fn solve_mut(&self, rhs: &mut Matrix) {
        let n = self.dim;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                rhs.swap_rows(j, p);
            }
            for r in j + 1..=(j + self.kl).min(n - 1) {
                let l = self.get(r, j);
                if l != 0.0 {
                    for k in 0..rhs.ncols() {
                        rhs[(r, k)] -= l * rhs[(j, k)];
                    }
                }
            }
        }
        for j in (0..n).rev() {
            let last_col = (j + self.kl + self.ku).min(n - 1);
            for k in 0..rhs.ncols() {
                let mut acc = rhs[(j, k)];
                for c in j + 1..=last_col {
                    acc -= self.get(j, c) * rhs[(c, k)];
                }
                rhs[(j, k)] = acc / self.get(j, j);
            }
        }
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

/// Problem data in the original input coordinates, `ẋ = Ax + u + d`.
#[derive(Debug, Clone)]
pub struct TranscriptionProblem {
    pub a: Matrix,
    pub d: Vector,
    pub q: Matrix,
    pub n_cross: Matrix,
    pub r: Matrix,
    pub c: Vector,
}

/// First input `u_0` for `x0 = 0` and each unit vector, over `stages` steps of size `h`.
///
/// Unknowns are grouped per step as `(u_k, λ_{k+1}, x_{k+1})`; the terminal
/// state is free so `λ_N = 0`.
pub fn first_inputs(prob: &TranscriptionProblem, h: f64, stages: usize) -> Result<Matrix> {
    let n = prob.a.nrows();
    let disc = discretize(&prob.a, &prob.d, &prob.q, &prob.n_cross, &prob.r, &prob.c, h);
    let wxx = disc.w.view((0, 0), (n, n)).into_owned();
    let wxu = disc.w.view((0, n), (n, n)).into_owned();
    let wuu = disc.w.view((n, n), (n, n)).into_owned();
    let wx = disc.w.view((0, 2 * n), (n, 1)).column(0).into_owned();
    let wu = disc.w.view((n, 2 * n), (n, 1)).column(0).into_owned();
    let block = 3 * n;
    let dim = block * stages;
    let (u_of, l_of, x_of) = (|k: usize| block * k, |k: usize| block * k + n, |k: usize| block * k + 2 * n);

    let mut trip = Vec::with_capacity(stages * 8 * n * n);
    let push = |trip: &mut Vec<(usize, usize, f64)>, r0: usize, c0: usize, m: &Matrix| {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((r0 + i, c0 + j, m[(i, j)]));
                }
            }
        }
    };
    let eye = Matrix::identity(n, n);
    let mut rhs = Matrix::zeros(dim, n + 1);
    for k in 0..stages {
        // ∂/∂u_k
        let r_u = u_of(k);
        push(&mut trip, r_u, u_of(k), &wuu);
        push(&mut trip, r_u, l_of(k), &disc.g.transpose());
        if k > 0 {
            push(&mut trip, r_u, x_of(k - 1), &wxu.transpose());
        }
        // x_{k+1} = F x_k + G u_k + g
        let r_c = l_of(k);
        push(&mut trip, r_c, u_of(k), &disc.g);
        push(&mut trip, r_c, x_of(k), &(-&eye));
        if k > 0 {
            push(&mut trip, r_c, x_of(k - 1), &disc.f);
        }
        // ∂/∂x_{k+1}
        let r_x = x_of(k);
        push(&mut trip, r_x, l_of(k), &(-&eye));
        if k + 1 < stages {
            push(&mut trip, r_x, x_of(k), &wxx);
            push(&mut trip, r_x, u_of(k + 1), &wxu);
            push(&mut trip, r_x, l_of(k + 1), &disc.f.transpose());
        }
        for col in 0..=n {
            for i in 0..n {
                rhs[(r_u + i, col)] = -wu[i];
                rhs[(r_c + i, col)] = -disc.offset[i];
                rhs[(r_x + i, col)] = if k + 1 < stages { -wx[i] } else { 0.0 };
            }
        }
    }
    // x0 enters only the first step's rows.
    for col in 1..=n {
        for i in 0..n {
            rhs[(u_of(0) + i, col)] -= wxu[(col - 1, i)];
            rhs[(l_of(0) + i, col)] -= disc.f[(i, col - 1)];
        }
    }
    let lu = BandedLu::from_triplets(dim, &trip)?;
    lu.solve_mut(&mut rhs);
    Ok(rhs.view((0, 0), (n, n + 1)).into_owned())
}

fn gains_from(first: &Matrix) -> (Matrix, Vector) {
    let n = first.nrows();
    let b = first.column(0).into_owned();
    let k = Matrix::from_fn(n, n, |i, j| first[(i, 0)] - first[(i, j + 1)]);
    (k, b)
}

/// Richardson-extrapolated `(K, b)` at a fixed horizon.
pub fn gains_at_horizon(prob: &TranscriptionProblem, h: f64, horizon: f64) -> Result<(Matrix, Vector)> {
    let stages = (horizon / h).round().max(1.0) as usize;
    let (k1, b1) = gains_from(&first_inputs(prob, h, stages)?);
    let (k2, b2) = gains_from(&first_inputs(prob, h / 2.0, 2 * stages)?);
    Ok((&k2 * 2.0 - k1, &b2 * 2.0 - b1))
}

/// Doubles the horizon until the extrapolated gains settle.
pub fn transcribe(prob: &TranscriptionProblem, opts: &TranscriptionOptions) -> Result<TranscriptionResult> {
    if !(opts.step > 0.0 && opts.initial_horizon > opts.step && opts.max_horizon >= opts.initial_horizon) {
        return Err(Error::InvalidSimulation("transcription step and horizons must be positive and ordered".into()));
    }
    let mut horizon = opts.initial_horizon;
    let (mut k, mut b) = gains_at_horizon(prob, opts.step, horizon)?;
    let mut change = f64::INFINITY;
    while horizon * 2.0 <= opts.max_horizon {
        horizon *= 2.0;
        let (k2, b2) = gains_at_horizon(prob, opts.step, horizon)?;
        change = (&k2 - &k).amax().max((&b2 - &b).amax());
        k = k2;
        b = b2;
        if change < opts.tolerance {
            break;
        }
    }
    Ok(TranscriptionResult { k, b, horizon, step: opts.step, converged: change < opts.tolerance, last_change: change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn banded_lu_matches_dense() {
        let n = 9;
        let mut trip = Vec::new();
        let mut dense = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 2).min(n) {
                // Small diagonal forces pivoting.
                let v = if i == j { 1e-3 * (i as f64 + 1.0) } else { 1.0 + (i * 7 + j * 3) as f64 % 5.0 };
                trip.push((i, j, v));
                dense[(i, j)] = v;
            }
        }
        let lu = BandedLu::from_triplets(n, &trip).unwrap();
        assert_eq!(lu.bandwidths(), (2, 1));
        let rhs = Matrix::from_fn(n, 2, |i, k| (i + k) as f64 - 3.0);
        let mut x = rhs.clone();
        lu.solve_mut(&mut x);
        assert!((&dense * &x - &rhs).amax() < 1e-10);
    }

    #[test]
    fn scalar_discretization() {
        let m = |v: f64| Matrix::from_element(1, 1, v);
        let (a, h) = (-0.7, 0.3);
        let disc = discretize(&m(a), &Vector::from_element(1, 0.4), &m(2.0), &m(0.0), &m(1.0), &Vector::zeros(1), h);
        assert_relative_eq!(disc.f[(0, 0)], (a * h).exp(), epsilon = 1e-13);
        assert_relative_eq!(disc.g[(0, 0)], ((a * h).exp() - 1.0) / a, epsilon = 1e-13);
        assert_relative_eq!(disc.offset[0], 0.4 * ((a * h).exp() - 1.0) / a, epsilon = 1e-13);
        // ∫ 2 e^{2as} ds
        assert_relative_eq!(disc.w[(0, 0)], ((2.0 * a * h).exp() - 1.0) / a, epsilon = 1e-12);
    }

    #[test]
    fn scalar_gain_matches_closed_form() {
        // ẋ = −x + u, ∫ x² + u²: P = −1 + √2, K = P.
        let m = |v: f64| Matrix::from_element(1, 1, v);
        let prob = TranscriptionProblem {
            a: m(-1.0),
            d: Vector::zeros(1),
            q: m(1.0),
            n_cross: m(0.0),
            r: m(1.0),
            c: Vector::zeros(1),
        };
        let res = transcribe(&prob, &TranscriptionOptions { step: 1e-2, ..Default::default() }).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.k[(0, 0)], 2f64.sqrt() - 1.0, epsilon = 1e-5);
        assert!(res.b[0].abs() < 1e-12);
    }
}
