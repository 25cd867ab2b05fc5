//! Stage-cost assembly, cost evaluation and well-posedness classification.
//!
//! The platform cost `ℓ(x, u) = xᵀQx + 2xᵀNu + uᵀRu + 2cᵀx` is turned into a
//! cross-term-free problem by the change of input `v = u + R⁻¹Nx`, which gives
//! the drift `Ã = A_c − R⁻¹N` and state weight `Q̃ = Q − NR⁻¹N`. The sign of
//! `Q̃` decides which infinite-horizon theory applies.

use nalgebra::Cholesky;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::VectorizedSystem;
use crate::error::{Error, Result};
use crate::graph::LaplacianPair;
use crate::linalg::{
    cluster_eigenvalues, complex_smallest_singular, eigenvalues, min_sym_eig, norm2, symmetrize,
    to_complex, Matrix, Vector,
};

/// Default relative tolerance for the eigenvalue-based classification.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// Diagonal design weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceWeights {
    #[serde(with = "crate::json::vector")]
    pub w_d: Vector,
    #[serde(with = "crate::json::vector")]
    pub w_p: Vector,
    #[serde(with = "crate::json::vector")]
    pub w_en: Vector,
    #[serde(with = "crate::json::vector")]
    pub w_ex: Vector,
    pub alpha_f: f64,
}

impl PerformanceWeights {
    pub fn new(w_d: Vector, w_p: Vector, w_en: Vector, w_ex: Vector, alpha_f: f64) -> Result<Self> {
        let weights = Self { w_d, w_p, w_en, w_ex, alpha_f };
        weights.validate()?;
        Ok(weights)
    }

    /// Every weight vector set to the same scalar.
    pub fn uniform(nm: usize, w_d: f64, w_p: f64, w_en: f64, w_ex: f64, alpha_f: f64) -> Result<Self> {
        Self::new(
            Vector::from_element(nm, w_d),
            Vector::from_element(nm, w_p),
            Vector::from_element(nm, w_en),
            Vector::from_element(nm, w_ex),
            alpha_f,
        )
    }

    pub fn dim(&self) -> usize {
        self.w_d.len()
    }

    pub fn validate(&self) -> Result<()> {
        let nm = self.w_d.len();
        if nm == 0 || self.w_p.len() != nm || self.w_en.len() != nm || self.w_ex.len() != nm {
            return Err(Error::InvalidWeights("weight vectors must share a positive length".into()));
        }
        let all = self.w_d.iter().chain(self.w_p.iter()).chain(self.w_en.iter()).chain(self.w_ex.iter());
        if all.clone().any(|v| !v.is_finite()) || !self.alpha_f.is_finite() {
            return Err(Error::InvalidWeights("weights must be finite".into()));
        }
        for (name, w) in [("w_D", &self.w_d), ("w_P", &self.w_p), ("w_EN", &self.w_en)] {
            if w.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidWeights(format!("{name} must be entrywise nonnegative")));
            }
        }
        if self.w_ex.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidWeights("w_EX must be entrywise positive".into()));
        }
        if self.alpha_f < 0.0 {
            return Err(Error::InvalidWeights("alpha_F must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Quadratic stage-cost data and its completed-square transform.
#[derive(Debug, Clone, Serialize)]
pub struct StageCostMatrices {
    #[serde(with = "crate::json::matrix")]
    pub q: Matrix,
    /// Cross-weight `N`.
    #[serde(with = "crate::json::matrix")]
    pub n_cross: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub r: Matrix,
    #[serde(with = "crate::json::vector")]
    pub c: Vector,
    #[serde(with = "crate::json::matrix")]
    pub r_inv: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub a_tilde: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub q_tilde: Matrix,
    /// `x_eqᵀ W_D x_eq`, the constant left out of `ℓ`.
    pub dropped_constant: f64,
    #[serde(with = "crate::json::vector")]
    pub x_eq: Vector,
    /// Present when the matrices were assembled from design weights.
    pub weights: Option<PerformanceWeights>,
    /// Exposure regularizer `L_u = I_m ⊗ (L_b + L_bᵀ)/2`, if assembled from a graph.
    #[serde(with = "crate::json::opt_matrix")]
    pub l_u: Option<Matrix>,
}

impl StageCostMatrices {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Builds the transform from explicit `(A_c, Q, N, R, c)`.
    pub fn from_matrices(a_c: &Matrix, q: Matrix, n_cross: Matrix, r: Matrix, c: Vector) -> Result<Self> {
        let nm = q.nrows();
        for (name, mat) in [("A_c", a_c), ("Q", &q), ("N", &n_cross), ("R", &r)] {
            if mat.shape() != (nm, nm) {
                return Err(Error::Dimension(format!("{name} must be {nm}x{nm}")));
            }
        }
        if c.len() != nm {
            return Err(Error::Dimension(format!("c must have length {nm}")));
        }
        let r = symmetrize(&r);
        let chol = Cholesky::new(r.clone())
            .ok_or_else(|| Error::InvalidWeights("R is not positive definite".into()))?;
        let r_inv = chol.inverse();
        let a_tilde = a_c - &r_inv * &n_cross;
        let q_tilde = symmetrize(&(&q - &n_cross * &r_inv * &n_cross));
        Ok(Self {
            q,
            n_cross,
            r,
            c,
            r_inv,
            a_tilde,
            q_tilde,
            dropped_constant: 0.0,
            x_eq: Vector::zeros(nm),
            weights: None,
            l_u: None,
        })
    }
}

/// Builds `(Q, N, R, c)` from design weights and the transformed pair `(Ã, Q̃)`.
pub fn assemble_stage_cost(
    weights: &PerformanceWeights,
    laplacians: &LaplacianPair,
    sys: &VectorizedSystem,
) -> Result<StageCostMatrices> {
    weights.validate()?;
    let nm = sys.dim();
    if weights.dim() != nm || laplacians.n() != sys.n {
        return Err(Error::Dimension(format!(
            "weights have length {}, system has dimension {nm}",
            weights.dim()
        )));
    }
    let w_d = Matrix::from_diagonal(&weights.w_d);
    let q = Matrix::from_diagonal(&(&weights.w_d + &weights.w_p));
    let n_cross = Matrix::from_diagonal(&(&weights.w_en * -0.5));
    let l_u = Matrix::identity(sys.m, sys.m).kronecker(&laplacians.symmetric_balanced());
    let r = Matrix::from_diagonal(&weights.w_ex) + &l_u * weights.alpha_f;
    let c = -(&w_d * &sys.x_eq);
    let mut mats = StageCostMatrices::from_matrices(&sys.a_c, q, n_cross, r, c)?;
    mats.dropped_constant = sys.x_eq.dot(&(&w_d * &sys.x_eq));
    mats.x_eq = sys.x_eq.clone();
    mats.weights = Some(weights.clone());
    mats.l_u = Some(l_u);
    Ok(mats)
}

/// The five contributions to the stage cost at one `(x, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageCostBreakdown {
    /// `ℓ(x, u)`, without the dropped constant.
    pub total: f64,
    /// `−J_EN = −xᵀW_EN u`.
    pub engagement: f64,
    /// `J_P = xᵀW_P x`.
    pub polarization: f64,
    /// `J_D = (x − x_eq)ᵀW_D(x − x_eq)`, constant included.
    pub deviation: f64,
    /// `J_EX = uᵀW_EX u`.
    pub effort: f64,
    /// `J_F = α_F uᵀL_u u`.
    pub filtering: f64,
    pub constant: f64,
}

impl StageCostBreakdown {
    pub fn terms_sum(&self) -> f64 {
        self.engagement + self.polarization + self.deviation + self.effort + self.filtering
    }
}

/// `ℓ(x, u) = xᵀQx + 2xᵀNu + uᵀRu + 2cᵀx`.
pub fn stage_cost(mats: &StageCostMatrices, x: &Vector, u: &Vector) -> f64 {
    x.dot(&(&mats.q * x)) + 2.0 * x.dot(&(&mats.n_cross * u)) + u.dot(&(&mats.r * u)) + 2.0 * mats.c.dot(x)
}

pub fn evaluate_stage_cost(mats: &StageCostMatrices, x: &Vector, u: &Vector) -> Result<StageCostBreakdown> {
    let nm = mats.dim();
    if x.len() != nm || u.len() != nm {
        return Err(Error::Dimension(format!("x and u must have length {nm}")));
    }
    let total = stage_cost(mats, x, u);
    let b = match &mats.weights {
        Some(w) => {
            let dev = x - &mats.x_eq;
            let filtering = match &mats.l_u {
                Some(l_u) => w.alpha_f * u.dot(&(l_u * u)),
                None => 0.0,
            };
            StageCostBreakdown {
                total,
                engagement: -x.component_mul(&w.w_en).dot(u),
                polarization: x.component_mul(&w.w_p).dot(x),
                deviation: dev.component_mul(&w.w_d).dot(&dev),
                effort: u.component_mul(&w.w_ex).dot(u),
                filtering,
                constant: mats.dropped_constant,
            }
        }
        // Raw matrices: attribute Q to polarization and R to effort.
        None => StageCostBreakdown {
            total,
            engagement: 2.0 * x.dot(&(&mats.n_cross * u)),
            polarization: x.dot(&(&mats.q * x)),
            deviation: 2.0 * mats.c.dot(x) + mats.dropped_constant,
            effort: u.dot(&(&mats.r * u)),
            filtering: 0.0,
            constant: mats.dropped_constant,
        },
    };
    Ok(b)
}

/// `λ_min(W_D) + λ_min(W_P) − λ_max(W_EN)² / (4 λ_min(W_EX))`.
pub fn lemma1_margin(weights: &PerformanceWeights) -> f64 {
    weights.w_d.min() + weights.w_p.min() - weights.w_en.max().powi(2) / (4.0 * weights.w_ex.min())
}

/// Per-index diagonal test, exact when `α_F = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Corollary1Report {
    Inapplicable { reason: String },
    Checked { margins: Vec<f64>, all_pass: bool, all_pass_nonstrict: bool, failing: Vec<usize> },
}

impl Corollary1Report {
    pub fn all_pass(&self) -> Option<bool> {
        match self {
            Self::Checked { all_pass, .. } => Some(*all_pass),
            Self::Inapplicable { .. } => None,
        }
    }
}

fn nonstrict_slack(scale: f64) -> f64 {
    1e-12 * scale.max(1.0)
}

pub fn corollary1_check(weights: &PerformanceWeights) -> Corollary1Report {
    if weights.alpha_f != 0.0 {
        return Corollary1Report::Inapplicable { reason: "requires alpha_F = 0".into() };
    }
    let margins: Vec<f64> = (0..weights.dim())
        .map(|i| weights.w_d[i] + weights.w_p[i] - weights.w_en[i].powi(2) / (4.0 * weights.w_ex[i]))
        .collect();
    let failing: Vec<usize> = margins.iter().enumerate().filter(|(_, &m)| m <= 0.0).map(|(i, _)| i).collect();
    let slack = nonstrict_slack(weights.w_d.amax() + weights.w_p.amax());
    Corollary1Report::Checked {
        all_pass: failing.is_empty(),
        all_pass_nonstrict: margins.iter().all(|&m| m >= -slack),
        failing,
        margins,
    }
}

/// One jointly diagonalized mode of `(Q, R, W_EN)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeCheck {
    pub q: f64,
    pub r: f64,
    pub w_en: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Corollary2Report {
    Inapplicable { reason: String, commutator_norm: f64 },
    Checked { modes: Vec<ModeCheck>, all_pass: bool, all_pass_nonstrict: bool },
}

impl Corollary2Report {
    pub fn all_pass(&self) -> Option<bool> {
        match self {
            Self::Checked { all_pass, .. } => Some(*all_pass),
            Self::Inapplicable { .. } => None,
        }
    }
}

/// Per-mode test `q_i > w_EN,i² / (4 r_i)` in a common orthogonal eigenbasis.
pub fn corollary2_check(q: &Matrix, r: &Matrix, w_en: &Matrix) -> Corollary2Report {
    let scale = norm2(q).max(norm2(r)).max(norm2(w_en)).max(f64::MIN_POSITIVE);
    let comm = |a: &Matrix, b: &Matrix| (a * b - b * a).norm();
    let commutator_norm = comm(q, r).max(comm(q, w_en)).max(comm(r, w_en));
    if commutator_norm > 1e-9 * scale * scale {
        return Corollary2Report::Inapplicable {
            reason: "Q, R and W_EN do not pairwise commute".into(),
            commutator_norm,
        };
    }
    // Eigenvectors of a generic combination diagonalize a commuting triple.
    let mix = symmetrize(&(q + r * std::f64::consts::SQRT_2 + w_en * std::f64::consts::PI));
    let basis = nalgebra::SymmetricEigen::new(mix).eigenvectors;
    let project = |m: &Matrix| basis.transpose() * m * &basis;
    let (dq, dr, dw) = (project(q), project(r), project(w_en));
    let off = |d: &Matrix| {
        let mut d = d.clone();
        d.fill_diagonal(0.0);
        d.norm()
    };
    let residual = off(&dq).max(off(&dr)).max(off(&dw));
    if residual > 1e-8 * scale {
        return Corollary2Report::Inapplicable {
            reason: "joint diagonalization residual too large".into(),
            commutator_norm,
        };
    }
    let modes: Vec<ModeCheck> = (0..q.nrows())
        .map(|i| {
            let (qi, ri, wi) = (dq[(i, i)], dr[(i, i)], dw[(i, i)]);
            ModeCheck { q: qi, r: ri, w_en: wi, margin: qi - wi * wi / (4.0 * ri) }
        })
        .collect();
    let slack = nonstrict_slack(scale);
    Corollary2Report::Checked {
        all_pass: modes.iter().all(|m| m.margin > 0.0),
        all_pass_nonstrict: modes.iter().all(|m| m.margin >= -slack),
        modes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    StrictlyConvex,
    SemidefiniteDetectable,
    SemidefiniteUndetectable,
    Indefinite,
}

impl Regime {
    /// Regimes in which the free-endpoint optimum is automatically stabilizing.
    pub fn is_benign(self) -> bool {
        matches!(self, Regime::StrictlyConvex | Regime::SemidefiniteDetectable)
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::StrictlyConvex => "StrictlyConvex",
            Regime::SemidefiniteDetectable => "SemidefiniteDetectable",
            Regime::SemidefiniteUndetectable => "SemidefiniteUndetectable",
            Regime::Indefinite => "Indefinite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellPosednessVerdict {
    pub regime: Regime,
    /// `None` when the matrices did not come from design weights.
    pub lemma1_margin: Option<f64>,
    pub min_eig_q_tilde: f64,
    pub min_eig_r: f64,
    /// Absolute eigenvalue tolerance used for the split.
    pub tolerance: f64,
    pub detectable: Option<bool>,
    /// Set when `min eig Q̃` fell within tolerance of zero.
    pub boundary: bool,
    pub certificates: Vec<String>,
}

pub fn classify_weights(mats: &StageCostMatrices) -> Result<WellPosednessVerdict> {
    classify_weights_with(mats, DEFAULT_CLASSIFY_TOL)
}

/// Classification with an explicit relative tolerance.
pub fn classify_weights_with(mats: &StageCostMatrices, rel_tol: f64) -> Result<WellPosednessVerdict> {
    let q_tilde = &mats.q_tilde;
    if q_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("Q̃ has non-finite entries".into()));
    }
    let correction = &mats.n_cross * &mats.r_inv * &mats.n_cross;
    // Q̃ is a difference; its rounding error scales with both operands.
    let scale = norm2(q_tilde).max(norm2(&mats.q)).max(norm2(&correction));
    let tol = rel_tol * scale;
    let min_eig = min_sym_eig(q_tilde);
    let min_eig_r = min_sym_eig(&mats.r);

    let mut certificates = Vec::new();
    let lemma1 = mats.weights.as_ref().map(lemma1_margin);
    if let Some(m) = lemma1 {
        if m > 0.0 {
            certificates.push("lemma1".to_string());
        }
        if m >= 0.0 {
            certificates.push("lemma1_nonstrict".to_string());
        }
    }
    if let Some(w) = &mats.weights {
        if let Corollary1Report::Checked { all_pass, all_pass_nonstrict, .. } = corollary1_check(w) {
            if all_pass {
                certificates.push("corollary1".into());
            }
            if all_pass_nonstrict {
                certificates.push("corollary1_nonstrict".into());
            }
        }
    }
    let w_en = &mats.n_cross * -2.0;
    if let Corollary2Report::Checked { all_pass, all_pass_nonstrict, .. } =
        corollary2_check(&mats.q, &mats.r, &w_en)
    {
        if all_pass {
            certificates.push("corollary2".into());
        }
        if all_pass_nonstrict {
            certificates.push("corollary2_nonstrict".into());
        }
    }

    let (regime, detectable, boundary) = if min_eig > tol {
        (Regime::StrictlyConvex, None, false)
    } else if min_eig >= -tol {
        let det = detectability_check(q_tilde, &mats.a_tilde)?;
        let regime = if det { Regime::SemidefiniteDetectable } else { Regime::SemidefiniteUndetectable };
        (regime, Some(det), true)
    } else {
        (Regime::Indefinite, None, false)
    };
    Ok(WellPosednessVerdict {
        regime,
        lemma1_margin: lemma1,
        min_eig_q_tilde: min_eig,
        min_eig_r,
        tolerance: tol,
        detectable,
        boundary,
        certificates,
    })
}

/// PBH test: every mode of `Ã` with `Re λ ≥ 0` must be seen by `Q̃`,
/// i.e. `[λI − Ã; Q̃]` has full column rank.
pub fn detectability_check(q_tilde: &Matrix, a_tilde: &Matrix) -> Result<bool> {
    let nm = a_tilde.nrows();
    if q_tilde.shape() != (nm, nm) || !a_tilde.is_square() {
        return Err(Error::Dimension("Q̃ and Ã must be square of equal size".into()));
    }
    if nm == 0 {
        return Ok(true);
    }
    let scale = norm2(a_tilde).max(norm2(q_tilde)).max(1.0);
    let eig_tol = 1e-9 * scale;
    let rank_tol = 1e-8 * scale;
    let eigs = eigenvalues(a_tilde)?;
    let clusters = cluster_eigenvalues(&eigs, 1e-8 * scale);
    let qc = to_complex(q_tilde);
    let ac = to_complex(a_tilde);
    for cluster in clusters.iter().filter(|c| c.center.re >= -eig_tol) {
        let lam = cluster.center;
        let mut stacked = nalgebra::DMatrix::<Complex64>::zeros(2 * nm, nm);
        let shifted = nalgebra::DMatrix::<Complex64>::identity(nm, nm) * lam - &ac;
        stacked.view_mut((0, 0), (nm, nm)).copy_from(&shifted);
        stacked.view_mut((nm, 0), (nm, nm)).copy_from(&qc);
        let (_, smin, _) = complex_smallest_singular(&stacked, 1);
        if smin <= rank_tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{assemble_system, OpinionModel};
    use crate::graph::DirectedGraph;
    use approx::assert_relative_eq;

    fn two_agent_system() -> (LaplacianPair, VectorizedSystem) {
        let pair = DirectedGraph::parse("n 2\n1 2 1\n2 1 1").unwrap().balance().unwrap();
        let model = OpinionModel::new(
            pair.clone(),
            Matrix::identity(1, 1),
            Vector::from_element(2, 1.0),
            Matrix::from_row_slice(2, 1, &[1.0, -0.5]),
        )
        .unwrap();
        let sys = assemble_system(&model).unwrap();
        (pair, sys)
    }

    #[test]
    fn homogeneous_unit_weights() {
        let (pair, sys) = two_agent_system();
        let w = PerformanceWeights::uniform(2, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let mats = assemble_stage_cost(&w, &pair, &sys).unwrap();
        assert_eq!(mats.q, Matrix::identity(2, 2) * 2.0);
        assert_eq!(mats.n_cross, Matrix::identity(2, 2) * -0.5);
        assert_eq!(mats.r, Matrix::identity(2, 2));
        assert!((&mats.q_tilde - Matrix::identity(2, 2) * 1.75).amax() < 1e-15);
        assert!((&mats.a_tilde - (&sys.a_c + Matrix::identity(2, 2) * 0.5)).amax() < 1e-15);
        assert!((&mats.c + &sys.x_eq).amax() < 1e-15);
        assert_relative_eq!(mats.dropped_constant, sys.x_eq.norm_squared(), epsilon = 1e-14);
        let v = classify_weights(&mats).unwrap();
        assert_eq!(v.regime, Regime::StrictlyConvex);
        assert!(v.certificates.contains(&"lemma1".to_string()));
        assert!(v.certificates.contains(&"corollary1".to_string()));
        assert_relative_eq!(v.min_eig_q_tilde, 1.75, epsilon = 1e-14);
    }

    #[test]
    fn no_engagement_leaves_problem_untouched() {
        let (pair, sys) = two_agent_system();
        let w = PerformanceWeights::uniform(2, 1.0, 0.5, 0.0, 2.0, 0.3).unwrap();
        let mats = assemble_stage_cost(&w, &pair, &sys).unwrap();
        assert_eq!(mats.n_cross, Matrix::zeros(2, 2));
        assert_eq!(mats.a_tilde, sys.a_c);
        assert_eq!(mats.q_tilde, mats.q);
        // R = 2I + 0.3 · sym(L_b).
        let expected_r = Matrix::identity(2, 2) * 2.0 + pair.symmetric_balanced() * 0.3;
        assert!((&mats.r - expected_r).amax() < 1e-15);
    }

    #[test]
    fn indefinite_two_topic_matrices() {
        let a_c = Matrix::identity(2, 2) * -2.0;
        let mats = StageCostMatrices::from_matrices(
            &a_c,
            Matrix::from_diagonal(&Vector::from_vec(vec![8.0, 10.0])),
            Matrix::identity(2, 2) * -3.0,
            Matrix::identity(2, 2),
            Vector::zeros(2),
        )
        .unwrap();
        assert_eq!(mats.a_tilde, Matrix::identity(2, 2));
        assert_eq!(mats.q_tilde, Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0])));
        assert_eq!(classify_weights(&mats).unwrap().regime, Regime::Indefinite);
    }

    #[test]
    fn semidefinite_undetectable_matrices() {
        let (eta, xi) = (3.0, 0.5);
        let a_c = Matrix::from_row_slice(2, 2, &[-2.0, xi, xi, -2.0]);
        let mats = StageCostMatrices::from_matrices(
            &a_c,
            Matrix::identity(2, 2) * (eta * eta),
            Matrix::identity(2, 2) * -eta,
            Matrix::identity(2, 2),
            Vector::zeros(2),
        )
        .unwrap();
        let v = classify_weights(&mats).unwrap();
        assert_eq!(v.regime, Regime::SemidefiniteUndetectable);
        assert_eq!(v.detectable, Some(false));
        assert!(v.boundary);
    }

    #[test]
    fn stage_cost_terms() {
        let (pair, sys) = two_agent_system();
        let w = PerformanceWeights::new(
            Vector::from_vec(vec![0.5, 1.5]),
            Vector::from_vec(vec![0.25, 0.0]),
            Vector::from_vec(vec![1.0, 0.2]),
            Vector::from_vec(vec![2.0, 1.0]),
            0.4,
        )
        .unwrap();
        let mats = assemble_stage_cost(&w, &pair, &sys).unwrap();

        let zero = evaluate_stage_cost(&mats, &Vector::zeros(2), &Vector::zeros(2)).unwrap();
        assert_eq!(zero.total, 0.0);
        assert_eq!(zero.engagement + zero.polarization + zero.effort + zero.filtering, 0.0);
        assert_relative_eq!(zero.deviation, mats.dropped_constant, epsilon = 1e-14);

        for i in 0..2 {
            let e = Vector::from_fn(2, |k, _| if k == i { 1.0 } else { 0.0 });
            let b = evaluate_stage_cost(&mats, &e, &Vector::zeros(2)).unwrap();
            assert_relative_eq!(b.total, w.w_d[i] + w.w_p[i] + 2.0 * mats.c[i], epsilon = 1e-14);
        }

        let x = Vector::from_vec(vec![0.3, -1.2]);
        let u = Vector::from_vec(vec![-0.7, 0.4]);
        let b = evaluate_stage_cost(&mats, &x, &u).unwrap();
        assert_relative_eq!(b.terms_sum(), b.total + b.constant, epsilon = 1e-13);
    }

    #[test]
    fn engagement_can_make_the_cost_negative() {
        let (pair, sys) = two_agent_system();
        let w_ex = Vector::from_vec(vec![0.5, 2.0]);
        let w = PerformanceWeights::new(Vector::zeros(2), Vector::zeros(2), &w_ex * 2.0, w_ex.clone(), 0.0)
            .unwrap();
        let mats = assemble_stage_cost(&w, &pair, &sys).unwrap();
        let x = Vector::from_vec(vec![1.0, -0.5]);
        let b = evaluate_stage_cost(&mats, &x, &x).unwrap();
        assert_relative_eq!(b.total, -x.component_mul(&w_ex).dot(&x), epsilon = 1e-14);
        assert!(b.total < 0.0);
    }

    #[test]
    fn lemma1_arithmetic() {
        let ones = PerformanceWeights::uniform(3, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(lemma1_margin(&ones), 1.75);
        let bad = PerformanceWeights::uniform(3, 0.0, 0.0, 2.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(lemma1_margin(&bad), -1.0);
        // 0.5 + 0.5 = 2² / (4·1): margin exactly zero, strict certificate must not fire.
        let edge = PerformanceWeights::uniform(2, 0.5, 0.5, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(lemma1_margin(&edge), 0.0);
        let a_c = Matrix::identity(2, 2) * -3.0;
        let mut mats = StageCostMatrices::from_matrices(
            &a_c,
            Matrix::identity(2, 2),
            Matrix::identity(2, 2) * -1.0,
            Matrix::identity(2, 2),
            Vector::zeros(2),
        )
        .unwrap();
        mats.weights = Some(edge);
        let v = classify_weights(&mats).unwrap();
        assert!(!v.certificates.contains(&"lemma1".to_string()));
        assert!(v.certificates.contains(&"lemma1_nonstrict".to_string()));
        assert!(v.min_eig_q_tilde.abs() <= v.tolerance);
    }

    #[test]
    fn corollary1_cases() {
        let ones = PerformanceWeights::uniform(3, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(corollary1_check(&ones).all_pass(), Some(true));
        let mut one_bad = ones.clone();
        one_bad.w_d[1] = 0.0;
        one_bad.w_p[1] = 0.0;
        match corollary1_check(&one_bad) {
            Corollary1Report::Checked { all_pass, failing, .. } => {
                assert!(!all_pass);
                assert_eq!(failing, vec![1]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let filtered = PerformanceWeights::uniform(3, 1.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        assert!(matches!(corollary1_check(&filtered), Corollary1Report::Inapplicable { .. }));
    }

    #[test]
    fn corollary2_diagonal_matches_corollary1() {
        let w = PerformanceWeights::new(
            Vector::from_vec(vec![1.0, 0.1, 2.0]),
            Vector::from_vec(vec![0.0, 0.0, 0.5]),
            Vector::from_vec(vec![1.0, 1.0, 3.0]),
            Vector::from_vec(vec![1.0, 2.0, 0.5]),
            0.0,
        )
        .unwrap();
        let q = Matrix::from_diagonal(&(&w.w_d + &w.w_p));
        let r = Matrix::from_diagonal(&w.w_ex);
        let wen = Matrix::from_diagonal(&w.w_en);
        assert_eq!(corollary2_check(&q, &r, &wen).all_pass(), corollary1_check(&w).all_pass());
    }

    #[test]
    fn corollary2_kronecker_structure_commutes() {
        let pair = DirectedGraph::parse("n 3\n1 2 1\n2 3 2\n3 1 1\n2 1 0.5").unwrap().balance().unwrap();
        let l_sym = pair.symmetric_balanced();
        let n = 3;
        let q_t = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0]));
        let w_t = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let r_t = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.5]));
        let q = q_t.kronecker(&Matrix::identity(n, n));
        let wen = w_t.kronecker(&Matrix::identity(n, n));
        let r = r_t.kronecker(&Matrix::identity(n, n)) + Matrix::identity(2, 2).kronecker(&l_sym) * 0.7;
        assert!(corollary2_check(&q, &r, &wen).all_pass().is_some());
    }

    #[test]
    fn corollary2_rejects_noncommuting_triple() {
        let pair = DirectedGraph::parse("n 2\n1 2 1\n2 1 1").unwrap().balance().unwrap();
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let r = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 3.0])) + pair.symmetric_balanced() * 0.5;
        let wen = Matrix::identity(2, 2);
        assert!(matches!(corollary2_check(&q, &r, &wen), Corollary2Report::Inapplicable { .. }));
    }

    #[test]
    fn detectability_cases() {
        let hurwitz = Matrix::from_row_slice(2, 2, &[-1.0, 5.0, 0.0, -2.0]);
        assert!(detectability_check(&Matrix::zeros(2, 2), &hurwitz).unwrap());
        let unstable = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(!detectability_check(&Matrix::zeros(2, 2), &unstable).unwrap());
        assert!(detectability_check(&Matrix::identity(2, 2), &unstable).unwrap());
        // Unstable mode e₁ seen by Q̃ = diag(1, 0); stable mode e₂ unseen is fine.
        let split = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]));
        assert!(detectability_check(&q, &split).unwrap());
        let q_wrong = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 1.0]));
        assert!(!detectability_check(&q_wrong, &split).unwrap());
    }

    #[test]
    fn weights_validation() {
        let ok = Vector::from_element(2, 1.0);
        assert!(PerformanceWeights::new(ok.clone(), ok.clone(), ok.clone(), Vector::zeros(2), 0.0).is_err());
        assert!(PerformanceWeights::new(-&ok, ok.clone(), ok.clone(), ok.clone(), 0.0).is_err());
        assert!(PerformanceWeights::new(ok.clone(), ok.clone(), ok.clone(), ok.clone(), -1.0).is_err());
        assert!(PerformanceWeights::new(ok.clone(), ok.clone(), Vector::zeros(3), ok.clone(), 0.0).is_err());
    }
}
