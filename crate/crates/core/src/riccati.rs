//! The algebraic Riccati equation `ÃᵀP + PÃ − PR⁻¹P + Q̃ = 0`.
//!
//! Two independent routes are provided. The dichotomy route reads the stable
//! (or antistable) invariant subspace of the Hamiltonian off an ordered real
//! Schur form. The enumeration route walks every admissible choice of half the
//! Hamiltonian spectrum, builds the matching invariant subspace from kernels of
//! `(H − μI)^j`, and keeps the graph subspaces with symmetric `P`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::VectorizedSystem;
use crate::error::{Error, Result};
use crate::linalg::{
    cluster_eigenvalues, complex_smallest_singular, eigenvalues, loewner_geq, min_sym_eig, norm2,
    smallest_singular, symmetrize, to_complex, Matrix, RealSchur, Vector,
};
use crate::performance::StageCostMatrices;

pub const DEFAULT_ENUMERATION_CAP: usize = 8;
/// Largest accepted condition number of the top block of a graph subspace.
pub const GRAPH_COND_LIMIT: f64 = 1e10;
/// Frobenius distance under which two solutions are the same.
pub const DEDUP_TOL: f64 = 1e-7;
pub const LOEWNER_TOL: f64 = 1e-8;
/// Eigenvalues of `H` closer than this (relative to `‖H‖`) are one cluster.
/// Wide enough to hold the `√ε` splitting of a computed 2x2 Jordan block.
pub const CLUSTER_RADIUS: f64 = 1e-6;
/// Relative tolerance for matching `μ` with `−μ̄` in the Hamiltonian spectrum.
pub const PAIRING_TOL: f64 = 1e-8;

/// The completed-square problem: dynamics `ẋ = Ãx + d + v`, stage cost
/// `xᵀQ̃x + vᵀRv + 2cᵀx`.
#[derive(Debug, Clone, Serialize)]
pub struct TransformedProblem {
    #[serde(with = "crate::json::matrix")]
    pub a_tilde: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub q_tilde: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub r: Matrix,
    #[serde(skip)]
    pub r_inv: Matrix,
    #[serde(with = "crate::json::vector")]
    pub d: Vector,
    #[serde(with = "crate::json::vector")]
    pub c: Vector,
}

impl TransformedProblem {
    pub fn new(a_tilde: Matrix, q_tilde: Matrix, r: Matrix, d: Vector, c: Vector) -> Result<Self> {
        let nm = a_tilde.nrows();
        if !a_tilde.is_square() || q_tilde.shape() != (nm, nm) || r.shape() != (nm, nm) {
            return Err(Error::Dimension(format!("Ã, Q̃ and R must all be {nm}x{nm}")));
        }
        if d.len() != nm || c.len() != nm {
            return Err(Error::Dimension(format!("d and c must have length {nm}")));
        }
        let all = a_tilde.iter().chain(q_tilde.iter()).chain(r.iter()).chain(d.iter()).chain(c.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeights("problem data must be finite".into()));
        }
        let r = symmetrize(&r);
        let r_inv = nalgebra::Cholesky::new(r.clone())
            .ok_or_else(|| Error::InvalidWeights("R is not positive definite".into()))?
            .inverse();
        Ok(Self { a_tilde, q_tilde: symmetrize(&q_tilde), r, r_inv, d, c })
    }

    pub fn from_stage_cost(mats: &StageCostMatrices, sys: &VectorizedSystem) -> Self {
        Self {
            a_tilde: mats.a_tilde.clone(),
            q_tilde: mats.q_tilde.clone(),
            r: mats.r.clone(),
            r_inv: mats.r_inv.clone(),
            d: sys.d.clone(),
            c: mats.c.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.a_tilde.nrows()
    }

    /// `Ã − R⁻¹P`.
    pub fn closed_loop(&self, p: &Matrix) -> Matrix {
        &self.a_tilde - &self.r_inv * p
    }

    /// True when `d = c = 0`.
    pub fn is_homogeneous(&self) -> bool {
        self.d.iter().chain(self.c.iter()).all(|&v| v == 0.0)
    }
}

/// `H = [[Ã, −R⁻¹], [−Q̃, −Ãᵀ]]`.
pub fn build_hamiltonian(tp: &TransformedProblem) -> Matrix {
    let nm = tp.dim();
    let mut h = Matrix::zeros(2 * nm, 2 * nm);
    h.view_mut((0, 0), (nm, nm)).copy_from(&tp.a_tilde);
    h.view_mut((0, nm), (nm, nm)).copy_from(&(-&tp.r_inv));
    h.view_mut((nm, 0), (nm, nm)).copy_from(&(-&tp.q_tilde));
    h.view_mut((nm, nm), (nm, nm)).copy_from(&(-tp.a_tilde.transpose()));
    h
}

/// `‖ÃᵀP + PÃ − PR⁻¹P + Q̃‖_F`.
pub fn riccati_residual(tp: &TransformedProblem, p: &Matrix) -> f64 {
    (tp.a_tilde.transpose() * p + p * &tp.a_tilde - p * &tp.r_inv * p + &tp.q_tilde).norm()
}

/// Acceptance bound for a listed solution.
pub fn residual_bound(p: &Matrix) -> f64 {
    1e-8 * (1.0 + p.norm_squared())
}

fn hamiltonian_scale(h: &Matrix) -> f64 {
    let s = norm2(h);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// `P = Y X⁻¹` for a basis `[X; Y]`; rejects ill-conditioned `X`.
fn graph_solution(basis: &Matrix) -> Result<Matrix> {
    let nm = basis.ncols();
    let x = basis.rows(0, nm).into_owned();
    let y = basis.rows(nm, nm).into_owned();
    let sv = x.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let cond = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    if !(cond <= GRAPH_COND_LIMIT) {
        return Err(Error::NotGraphSubspace(cond));
    }
    let pt = x
        .transpose()
        .lu()
        .solve(&y.transpose())
        .ok_or_else(|| Error::NotGraphSubspace(f64::INFINITY))?;
    Ok(pt.transpose())
}

fn dichotomy_solution(tp: &TransformedProblem, stable: bool) -> Result<Matrix> {
    let nm = tp.dim();
    if nm == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let h = build_hamiltonian(tp);
    let scale = hamiltonian_scale(&h);
    let mut schur = RealSchur::new(&h)?;
    let axis_tol = PAIRING_TOL * scale;
    if schur.eigenvalues().iter().any(|l| l.re.abs() <= axis_tol) {
        return Err(Error::NoDichotomy);
    }
    let k = schur.reorder_by(|l| if stable { l.re < 0.0 } else { l.re > 0.0 })?;
    if k != nm {
        return Err(Error::NoDichotomy);
    }
    let p = graph_solution(&schur.leading_basis(nm))?;
    let asym = (&p - p.transpose()).norm();
    if asym > 1e-9 * (1.0 + p.norm()) {
        return Err(Error::RiccatiCheck(format!("solution is not symmetric (‖P − Pᵀ‖ = {asym:e})")));
    }
    let p = symmetrize(&p);
    let res = riccati_residual(tp, &p);
    if res > residual_bound(&p) {
        return Err(Error::RiccatiCheck(format!("residual {res:e} exceeds bound")));
    }
    Ok(p)
}

/// Maximal solution `P₊`, with `Ã − R⁻¹P₊` Hurwitz.
pub fn stabilizing_solution(tp: &TransformedProblem) -> Result<Matrix> {
    dichotomy_solution(tp, true)
}

/// Minimal solution `P₋`, with `Ã − R⁻¹P₋` antistable.
pub fn antistabilizing_solution(tp: &TransformedProblem) -> Result<Matrix> {
    dichotomy_solution(tp, false)
}

/// Per-solution diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionTags {
    /// Spectrum of `Ã − R⁻¹P`.
    #[serde(with = "crate::json::spectrum")]
    pub closed_loop_spectrum: Vec<Complex64>,
    /// Every closed-loop eigenvalue has `Re < tol`.
    pub stabilizing: bool,
    /// Every closed-loop eigenvalue has `Re < −tol`.
    pub strictly_stabilizing: bool,
    /// Every closed-loop eigenvalue has `Re > −tol`.
    pub antistabilizing: bool,
    /// Every closed-loop eigenvalue has `Re > tol`.
    pub strictly_antistabilizing: bool,
    pub psd: bool,
    pub min_eig: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiccatiSolution {
    #[serde(with = "crate::json::matrix")]
    pub p: Matrix,
    pub tags: SolutionTags,
}

/// Tag a symmetric solution; `spectral_tol` is absolute.
pub fn tag_solution(tp: &TransformedProblem, p: &Matrix, spectral_tol: f64) -> Result<SolutionTags> {
    let spectrum = eigenvalues(&tp.closed_loop(p))?;
    let max_re = spectrum.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let min_re = spectrum.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
    let min_eig = if p.is_empty() { 0.0 } else { min_sym_eig(p) };
    Ok(SolutionTags {
        closed_loop_spectrum: spectrum,
        stabilizing: max_re < spectral_tol,
        strictly_stabilizing: max_re < -spectral_tol,
        antistabilizing: min_re > -spectral_tol,
        strictly_antistabilizing: min_re > spectral_tol,
        psd: min_eig >= -psd_tol(p),
        min_eig,
        residual: riccati_residual(tp, p),
    })
}

fn psd_tol(p: &Matrix) -> f64 {
    1e-8 * (1.0 + p.norm())
}

fn loewner_tol(a: &Matrix, b: &Matrix) -> f64 {
    LOEWNER_TOL * a.norm().max(b.norm()).max(1.0)
}

/// Pairwise Loewner relation between two solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoewnerRelation {
    Equal,
    Less,
    Greater,
    Incomparable,
}

pub fn loewner_relation(a: &Matrix, b: &Matrix) -> LoewnerRelation {
    let tol = loewner_tol(a, b);
    match (loewner_geq(a, b, tol), loewner_geq(b, a, tol)) {
        (true, true) => LoewnerRelation::Equal,
        (true, false) => LoewnerRelation::Greater,
        (false, true) => LoewnerRelation::Less,
        (false, false) => LoewnerRelation::Incomparable,
    }
}

/// Agreement between an enumerated extremal solution and its dichotomy counterpart.
#[derive(Debug, Clone, Serialize)]
pub struct CrossCheck {
    pub which: String,
    /// Frobenius distance, absent when one side is missing.
    pub deviation: Option<f64>,
    pub agree: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiccatiSolutionSet {
    pub solutions: Vec<RiccatiSolution>,
    #[serde(with = "crate::json::opt_matrix")]
    pub p_minus: Option<Matrix>,
    #[serde(with = "crate::json::opt_matrix")]
    pub p_plus: Option<Matrix>,
    #[serde(with = "crate::json::opt_matrix")]
    pub p_circ: Option<Matrix>,
    pub exhaustive: bool,
    /// `relations[i][j]` compares solution `i` with solution `j`.
    pub loewner_relations: Vec<Vec<LoewnerRelation>>,
    #[serde(with = "crate::json::spectrum")]
    pub hamiltonian_spectrum: Vec<Complex64>,
    pub cross_checks: Vec<CrossCheck>,
    pub notes: Vec<String>,
}

impl RiccatiSolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.solutions.iter().map(|s| &s.p)
    }
}

/// One Hamiltonian orbit of clustered eigenvalues.
#[derive(Debug, Clone)]
enum Orbit {
    /// `plus` has `Re > 0`, `minus ≈ −plus̄`; both taken with `Im ≥ 0`.
    Pair { plus: Complex64, minus: Complex64, mult: usize },
    /// On the imaginary axis, `Im ≥ 0`; exactly half must be selected.
    Axis { center: Complex64, mult: usize },
}

/// Real basis of `ker (H − μI)^j`, plus an ambiguity flag raised when the
/// kernel is wider than `j` (so infinitely many `j`-dimensional choices exist).
/// `None` when the kernel is too small, which means the clustering is off.
fn cluster_kernel(h: &Matrix, scale: f64, mu: Complex64, j: usize) -> Option<(Matrix, bool)> {
    let n = h.nrows();
    if j == 0 {
        return Some((Matrix::zeros(n, 0), false));
    }
    let thresh = CLUSTER_RADIUS * scale.powi(j as i32);
    if mu.im == 0.0 {
        let shifted = h - Matrix::identity(n, n) * mu.re;
        let mut m = shifted.clone();
        for _ in 1..j {
            m = &m * &shifted;
        }
        let (basis, sj, next) = smallest_singular(&m, j);
        if sj > thresh {
            return None;
        }
        Some((basis, next <= thresh))
    } else {
        let hc = to_complex(h);
        let shifted = &hc - DMatrix::<Complex64>::identity(n, n) * mu;
        let mut m = shifted.clone();
        for _ in 1..j {
            m = &m * &shifted;
        }
        let (basis, sj, next) = complex_smallest_singular(&m, j);
        if sj > thresh {
            return None;
        }
        let mut real = Matrix::zeros(n, 2 * j);
        for c in 0..j {
            for r in 0..n {
                real[(r, 2 * c)] = basis[(r, c)].re;
                real[(r, 2 * c + 1)] = basis[(r, c)].im;
            }
        }
        Some((real, next <= thresh))
    }
}

fn hstack(parts: &[&Matrix], rows: usize) -> Matrix {
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.view_mut((0, at), (rows, p.ncols())).copy_from(*p);
        at += p.ncols();
    }
    out
}

/// Groups the Hamiltonian spectrum into orbits. Returns `None` with a reason
/// when the spectrum does not pair up within tolerance.
fn hamiltonian_orbits(eigs: &[Complex64], scale: f64) -> std::result::Result<Vec<Orbit>, String> {
    let radius = CLUSTER_RADIUS * scale;
    let clusters = cluster_eigenvalues(eigs, radius);
    let mut axis = Vec::new();
    let mut right = Vec::new();
    let mut left = Vec::new();
    for c in clusters {
        let mut z = c.center;
        if z.im.abs() <= radius {
            z.im = 0.0;
        }
        if z.im < 0.0 {
            continue;
        }
        if z.re.abs() <= radius {
            z.re = 0.0;
            axis.push(Orbit::Axis { center: z, mult: c.multiplicity });
        } else if z.re > 0.0 {
            right.push((z, c.multiplicity));
        } else {
            left.push((z, c.multiplicity, false));
        }
    }
    let pair_tol = PAIRING_TOL * scale;
    let mut orbits = Vec::new();
    for (plus, mult) in right {
        let target = -plus.conj();
        let partner = left
            .iter_mut()
            .filter(|(z, _, used)| !used && (*z - target).norm() <= pair_tol.max(radius))
            .min_by(|a, b| (a.0 - target).norm().total_cmp(&(b.0 - target).norm()));
        match partner {
            Some((minus, m2, used)) if *m2 == mult => {
                *used = true;
                orbits.push(Orbit::Pair { plus, minus: *minus, mult });
            }
            Some((_, m2, _)) => {
                return Err(format!("eigenvalue {plus} has multiplicity {mult} but its mirror has {m2}"));
            }
            None => return Err(format!("eigenvalue {plus} has no mirror image −λ̄")),
        }
    }
    if let Some((z, _, _)) = left.iter().find(|(_, _, used)| !used) {
        return Err(format!("eigenvalue {z} has no mirror image −λ̄"));
    }
    orbits.extend(axis);
    Ok(orbits)
}

/// Every symmetric solution reachable by a choice of half the Hamiltonian
/// spectrum, with extremal and smallest-PSD identification.
pub fn enumerate_solutions(tp: &TransformedProblem, cap: usize) -> Result<RiccatiSolutionSet> {
    let nm = tp.dim();
    if nm > cap {
        return Err(Error::EnumerationCap { dim: nm, cap });
    }
    let h = build_hamiltonian(tp);
    let scale = hamiltonian_scale(&h);
    let eigs = RealSchur::new(&h)?.eigenvalues();
    let mut notes = Vec::new();
    let mut exhaustive = true;
    let mut found: Vec<Matrix> = Vec::new();

    match hamiltonian_orbits(&eigs, scale) {
        Err(reason) => {
            exhaustive = false;
            notes.push(format!("enumeration skipped: {reason}"));
        }
        Ok(orbits) => {
            let (candidates, complete, orbit_notes) = orbit_candidates(&h, scale, &orbits, nm);
            exhaustive &= complete;
            notes.extend(orbit_notes);
            let results: Vec<std::result::Result<Matrix, String>> =
                candidates.par_iter().map(|basis| candidate_solution(tp, basis)).collect();
            let mut rejected = std::collections::BTreeMap::<String, usize>::new();
            for r in results {
                match r {
                    Ok(p) => {
                        let dup = found
                            .iter()
                            .any(|q| (q - &p).norm() <= DEDUP_TOL * q.norm().max(p.norm()).max(1.0));
                        if !dup {
                            found.push(p);
                        }
                    }
                    Err(kind) => *rejected.entry(kind).or_default() += 1,
                }
            }
            for (kind, count) in rejected {
                notes.push(format!("{count} selection(s) rejected: {kind}"));
            }
        }
    }

    found.sort_by(|a, b| a.trace().total_cmp(&b.trace()).then(a.norm().total_cmp(&b.norm())));
    finish_set(tp, scale, eigs, found, exhaustive, notes)
}

/// Bases of all candidate invariant subspaces, whether the list is complete,
/// and notes on anything that made it incomplete.
fn orbit_candidates(h: &Matrix, scale: f64, orbits: &[Orbit], nm: usize) -> (Vec<Matrix>, bool, Vec<String>) {
    let n2 = h.nrows();
    let mut notes = Vec::new();
    let mut complete = true;
    let mut fixed: Vec<Matrix> = Vec::new();
    // Per pair orbit, the admissible `(plus j, minus k−j)` blocks.
    let mut choices: Vec<Vec<Matrix>> = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Axis { center, mult } => {
                let width = if center.im == 0.0 { 1 } else { 2 };
                let needed = mult * width / 2;
                if (mult * width) % 2 != 0 || (center.im != 0.0 && mult % 2 != 0) {
                    notes.push(format!(
                        "imaginary-axis eigenvalue {center} has odd multiplicity {mult}; no real Lagrangian choice"
                    ));
                    return (Vec::new(), complete, notes);
                }
                let j = needed / width;
                match cluster_kernel(h, scale, center, j) {
                    Some((basis, ambiguous)) => {
                        if ambiguous {
                            complete = false;
                            notes.push(format!(
                                "eigenvalue {center}: kernel of order {j} is wider than needed; one choice kept"
                            ));
                        }
                        fixed.push(basis);
                    }
                    None => {
                        notes.push(format!("eigenvalue {center}: generalized kernel smaller than multiplicity"));
                        return (Vec::new(), false, notes);
                    }
                }
            }
            Orbit::Pair { plus, minus, mult } => {
                let mut blocks = Vec::new();
                for j in 0..=mult {
                    let a = cluster_kernel(h, scale, plus, j);
                    let b = cluster_kernel(h, scale, minus, mult - j);
                    match (a, b) {
                        (Some((ba, amb_a)), Some((bb, amb_b))) => {
                            if amb_a || amb_b {
                                complete = false;
                                notes.push(format!(
                                    "eigenvalue pair {plus}/{minus}: selection {j} of {mult} is not unique; one choice kept"
                                ));
                            }
                            blocks.push(hstack(&[&ba, &bb], n2));
                        }
                        _ => {
                            complete = false;
                            notes.push(format!(
                                "eigenvalue pair {plus}/{minus}: generalized kernel smaller than multiplicity"
                            ));
                        }
                    }
                }
                choices.push(blocks);
            }
        }
    }
    let fixed_block = hstack(&fixed.iter().collect::<Vec<_>>(), n2);
    let mut candidates = vec![fixed_block];
    for blocks in &choices {
        let mut next = Vec::with_capacity(candidates.len() * blocks.len());
        for base in &candidates {
            for b in blocks {
                next.push(hstack(&[base, b], n2));
            }
        }
        candidates = next;
    }
    candidates.retain(|c| c.ncols() == nm);
    (candidates, complete, notes)
}

fn candidate_solution(tp: &TransformedProblem, basis: &Matrix) -> std::result::Result<Matrix, String> {
    let qr = basis.clone().qr();
    let rdiag = qr.r().diagonal().map(f64::abs);
    if rdiag.len() > 0 && rdiag.min() <= 1e-10 * rdiag.max() {
        return Err("rank-deficient subspace".into());
    }
    let p = graph_solution(&qr.q()).map_err(|_| "not a graph subspace".to_string())?;
    if (&p - p.transpose()).norm() > 1e-8 * (1.0 + p.norm()) {
        return Err("non-symmetric (non-Lagrangian) subspace".into());
    }
    let p = symmetrize(&p);
    if riccati_residual(tp, &p) > residual_bound(&p) {
        return Err("residual above bound".into());
    }
    Ok(p)
}

fn extremal_index(sols: &[Matrix], maximal: bool) -> Option<usize> {
    (0..sols.len()).find(|&i| {
        sols.iter().all(|q| {
            let tol = loewner_tol(&sols[i], q);
            if maximal {
                loewner_geq(&sols[i], q, tol)
            } else {
                loewner_geq(q, &sols[i], tol)
            }
        })
    })
}

fn finish_set(
    tp: &TransformedProblem,
    scale: f64,
    eigs: Vec<Complex64>,
    found: Vec<Matrix>,
    exhaustive: bool,
    mut notes: Vec<String>,
) -> Result<RiccatiSolutionSet> {
    let spectral_tol = PAIRING_TOL * scale;
    let mut solutions = Vec::with_capacity(found.len());
    for p in &found {
        solutions.push(RiccatiSolution { p: p.clone(), tags: tag_solution(tp, p, spectral_tol)? });
    }
    let mut p_plus = extremal_index(&found, true).map(|i| found[i].clone());
    let mut p_minus = extremal_index(&found, false).map(|i| found[i].clone());
    if !found.is_empty() && p_plus.is_none() {
        notes.push("no Loewner-maximal solution among those found".into());
    }
    if !found.is_empty() && p_minus.is_none() {
        notes.push("no Loewner-minimal solution among those found".into());
    }

    let mut cross_checks = Vec::new();
    for (which, stable) in [("P_plus", true), ("P_minus", false)] {
        let dich = dichotomy_solution(tp, stable);
        let slot = if stable { &mut p_plus } else { &mut p_minus };
        let check = match (&dich, slot.as_ref()) {
            (Ok(pd), Some(pe)) => {
                let dev = (pd - pe).norm();
                let agree = dev <= 1e-8 * (1.0 + pe.norm());
                CrossCheck {
                    which: which.into(),
                    deviation: Some(dev),
                    agree,
                    detail: if agree { "agree".into() } else { "dichotomy and enumeration disagree".into() },
                }
            }
            (Ok(_), None) => CrossCheck {
                which: which.into(),
                deviation: None,
                agree: false,
                detail: "dichotomy solution not recovered by enumeration".into(),
            },
            (Err(e), Some(_)) => CrossCheck {
                which: which.into(),
                deviation: None,
                agree: true,
                detail: format!("dichotomy unavailable ({e}); enumeration result kept"),
            },
            (Err(e), None) => CrossCheck {
                which: which.into(),
                deviation: None,
                agree: true,
                detail: format!("absent on both routes ({e})"),
            },
        };
        // An incomplete enumeration can miss an extremal; the dichotomy one is exact.
        if let Ok(pd) = dich {
            if !exhaustive || slot.is_none() {
                *slot = Some(pd);
            }
        }
        cross_checks.push(check);
    }

    let loewner_relations = found
        .iter()
        .map(|a| found.iter().map(|b| loewner_relation(a, b)).collect())
        .collect();
    let mut set = RiccatiSolutionSet {
        solutions,
        p_minus,
        p_plus,
        p_circ: None,
        exhaustive,
        loewner_relations,
        hamiltonian_spectrum: eigs,
        cross_checks,
        notes,
    };
    if set.exhaustive {
        match smallest_psd_solution(&set) {
            Ok(p) => set.p_circ = p,
            Err(e) => set.notes.push(format!("smallest PSD solution: {e}")),
        }
    }
    Ok(set)
}

/// The Loewner-minimal PSD solution, `None` when no listed solution is PSD.
pub fn smallest_psd_solution(set: &RiccatiSolutionSet) -> Result<Option<Matrix>> {
    if !set.exhaustive {
        return Err(Error::NotExhaustive);
    }
    let psd: Vec<Matrix> = set.solutions.iter().filter(|s| s.tags.psd).map(|s| s.p.clone()).collect();
    if psd.is_empty() {
        return Ok(None);
    }
    match extremal_index(&psd, false) {
        Some(i) => Ok(Some(psd[i].clone())),
        None => Err(Error::IncomparablePsd),
    }
}

/// Solution set by enumeration when `nm ≤ cap`, otherwise the two
/// dichotomy solutions alone.
pub fn solve_all(tp: &TransformedProblem, cap: usize) -> Result<RiccatiSolutionSet> {
    if tp.dim() <= cap {
        return enumerate_solutions(tp, cap);
    }
    let h = build_hamiltonian(tp);
    let scale = hamiltonian_scale(&h);
    let eigs = RealSchur::new(&h)?.eigenvalues();
    let mut found = Vec::new();
    let mut notes = vec![format!("dimension {} above enumeration cap {cap}; dichotomy only", tp.dim())];
    for stable in [false, true] {
        match dichotomy_solution(tp, stable) {
            Ok(p) => found.push(p),
            Err(e) => notes.push(format!(
                "{} solution: {e}",
                if stable { "stabilizing" } else { "antistabilizing" }
            )),
        }
    }
    if found.len() == 2 && (&found[0] - &found[1]).norm() <= DEDUP_TOL {
        found.pop();
    }
    finish_set(tp, scale, eigs, found, false, notes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(a: f64, q: f64, r: f64) -> TransformedProblem {
        let m = |v: f64| Matrix::from_element(1, 1, v);
        TransformedProblem::new(m(a), m(q), m(r), Vector::zeros(1), Vector::zeros(1)).unwrap()
    }

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(v))
    }

    fn two(a: Matrix, q: Matrix) -> TransformedProblem {
        TransformedProblem::new(a, q, Matrix::identity(2, 2), Vector::zeros(2), Vector::zeros(2)).unwrap()
    }

    #[test]
    fn hamiltonian_layout() {
        let h = build_hamiltonian(&scalar(0.0, 1.0, 1.0));
        assert_eq!(h, Matrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let mut e: Vec<f64> = eigenvalues(&h).unwrap().iter().map(|z| z.re).collect();
        e.sort_by(f64::total_cmp);
        assert_relative_eq!(e[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn scalar_roots() {
        let tp = scalar(-1.0, 1.0, 1.0);
        let p = stabilizing_solution(&tp).unwrap();
        assert_relative_eq!(p[(0, 0)], -1.0 + 2f64.sqrt(), epsilon = 1e-13);
        let pm = antistabilizing_solution(&tp).unwrap();
        assert_relative_eq!(pm[(0, 0)], -1.0 - 2f64.sqrt(), epsilon = 1e-13);
        let set = enumerate_solutions(&tp, 8).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.exhaustive);
        assert_relative_eq!(set.p_circ.unwrap()[(0, 0)], -1.0 + 2f64.sqrt(), epsilon = 1e-13);

        let tp = scalar(0.0, 1.0, 1.0);
        assert_relative_eq!(antistabilizing_solution(&tp).unwrap()[(0, 0)], -1.0, epsilon = 1e-13);
        assert_relative_eq!(stabilizing_solution(&tp).unwrap()[(0, 0)], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn residual_of_zero_is_q_norm() {
        let tp = two(Matrix::identity(2, 2), diag(&[3.0, 4.0]));
        assert_relative_eq!(riccati_residual(&tp, &Matrix::zeros(2, 2)), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn block_triangular_spectrum() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, -2.0]);
        let h = build_hamiltonian(&two(a, Matrix::zeros(2, 2)));
        let mut re: Vec<f64> = eigenvalues(&h).unwrap().iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (x, y) in re.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn jordan_zero_eigenvalue_enumerates_two_solutions() {
        let tp = two(Matrix::identity(2, 2), diag(&[-1.0, 1.0]));
        assert!(matches!(stabilizing_solution(&tp), Err(Error::NoDichotomy)));
        let set = enumerate_solutions(&tp, 8).unwrap();
        assert!(set.exhaustive, "{:?}", set.notes);
        assert_eq!(set.len(), 2);
        let s2 = 2f64.sqrt();
        assert!((set.p_minus.as_ref().unwrap() - diag(&[1.0, 1.0 - s2])).amax() < 1e-10);
        assert!((set.p_plus.as_ref().unwrap() - diag(&[1.0, 1.0 + s2])).amax() < 1e-10);
        assert!((set.p_circ.unwrap() - diag(&[1.0, 1.0 + s2])).amax() < 1e-10);
    }

    #[test]
    fn cap_is_enforced() {
        let n = 3;
        let tp = TransformedProblem::new(
            -Matrix::identity(n, n),
            Matrix::identity(n, n),
            Matrix::identity(n, n),
            Vector::zeros(n),
            Vector::zeros(n),
        )
        .unwrap();
        assert!(matches!(enumerate_solutions(&tp, 2), Err(Error::EnumerationCap { dim: 3, cap: 2 })));
        let set = solve_all(&tp, 2).unwrap();
        assert!(!set.exhaustive);
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn complex_pairs_are_selected_jointly() {
        // Rotation drift gives a complex quadruple in H.
        let a = Matrix::from_row_slice(2, 2, &[0.3, 2.0, -2.0, 0.3]);
        let tp = two(a, Matrix::identity(2, 2));
        let set = enumerate_solutions(&tp, 8).unwrap();
        assert!(set.exhaustive, "{:?}", set.notes);
        assert_eq!(set.len(), 2);
        let pp = stabilizing_solution(&tp).unwrap();
        assert!((set.p_plus.unwrap() - pp).norm() < 1e-10);
        for s in &set.solutions {
            assert!(s.tags.residual <= residual_bound(&s.p));
        }
    }
}
