//! Optimal recommendation controllers for each well-posedness regime.
//!
//! Inputs are expressed in two coordinates. The original input `u` enters
//! `ẋ = A_c x + d + u`; the completed-square input `v = u + R⁻¹N x` enters
//! `ẋ = Ãx + d + v`. A controller stores both gains, `u = −Kx + b` and
//! `v = −K_v x + b`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{integrate_affine, VectorizedSystem};
use crate::error::{Error, Result};
use crate::linalg::{
    cluster_eigenvalues, eigenvalues, intersect_subspaces, norm2, null_space_abs, range_basis,
    spectral_abscissa, Matrix, RealSchur, Vector,
};
use crate::performance::{Regime, StageCostMatrices, WellPosednessVerdict};
use crate::riccati::{
    smallest_psd_solution, solve_all, stabilizing_solution, RiccatiSolutionSet, TransformedProblem,
    DEFAULT_ENUMERATION_CAP,
};

/// Real parts at or above `−SPECTRAL_BOUNDARY · max(1, ‖A‖)` count as unstable.
pub const SPECTRAL_BOUNDARY: f64 = 1e-9;
/// Relative singular-value threshold for the kernels in the uniqueness test.
pub const KERNEL_TOL: f64 = 1e-9;

pub const NOTE_NOT_ATTAINED: &str = "infimum is not attained";
pub const NOTE_NO_ANTISTABILIZING: &str = "antistabilizing solution absent";

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    pub enumeration_cap: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { enumeration_cap: DEFAULT_ENUMERATION_CAP }
    }
}

/// Outcome of `ker(P₊ − P₋) ⊆ ker P₋`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTest {
    #[serde(with = "crate::json::matrix")]
    pub ker_difference: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub ker_p_minus: Matrix,
    pub inclusion_holds: bool,
    /// Orthonormal basis of the part of `ker(P₊ − P₋)` outside `ker P₋`.
    #[serde(with = "crate::json::matrix")]
    pub offending_directions: Matrix,
    pub tolerance: f64,
}

impl KernelTest {
    /// False when `x0` has a component along an offending direction.
    pub fn attained_from(&self, x0: &Vector) -> bool {
        if self.offending_directions.ncols() == 0 {
            return true;
        }
        let comp = self.offending_directions.transpose() * x0;
        comp.norm() <= 1e-9 * x0.norm().max(1.0)
    }
}

pub fn kernel_inclusion(p_minus: &Matrix, p_plus: &Matrix) -> KernelTest {
    let n = p_minus.nrows();
    let scale = norm2(p_minus).max(norm2(p_plus)).max(1.0);
    let tol = KERNEL_TOL * scale;
    let ker_difference = null_space_abs(&(p_plus - p_minus), tol);
    let ker_p_minus = null_space_abs(p_minus, tol);
    let outside = (Matrix::identity(n, n) - &ker_p_minus * ker_p_minus.transpose()) * &ker_difference;
    let offending_directions = if outside.ncols() == 0 || outside.amax() <= 1e-8 {
        Matrix::zeros(n, 0)
    } else {
        range_basis(&outside, 1e-8)
    };
    KernelTest {
        inclusion_holds: offending_directions.ncols() == 0,
        ker_difference,
        ker_p_minus,
        offending_directions,
        tolerance: tol,
    }
}

fn invariance_defect(a: &Matrix, v: &Matrix) -> f64 {
    if v.ncols() == 0 {
        return 0.0;
    }
    let n = a.nrows();
    ((Matrix::identity(n, n) - v * v.transpose()) * a * v).amax()
}

/// `(ker P₋ | A₋)`, the largest `A₋`-invariant subspace inside `ker P₋`.
pub fn unobservable_subspace(p_minus: &Matrix, a_minus: &Matrix) -> Result<Matrix> {
    let n = p_minus.nrows();
    if a_minus.shape() != (n, n) || !p_minus.is_square() {
        return Err(Error::Dimension("P₋ and A₋ must be square of equal size".into()));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let alpha = norm2(a_minus).max(1.0);
    let a_scaled = a_minus / alpha;
    let mut stacked = Matrix::zeros(n * n, n);
    let mut block = p_minus.clone();
    for k in 0..n {
        stacked.view_mut((k * n, 0), (n, n)).copy_from(&block);
        block = &block * &a_scaled;
    }
    let v = null_space_abs(&stacked, KERNEL_TOL * norm2(p_minus).max(1.0));
    let defect = invariance_defect(a_minus, &v);
    if defect > 1e-8 * alpha {
        return Err(Error::RiccatiCheck(format!("unobservable subspace not invariant (defect {defect:e})")));
    }
    Ok(v)
}

/// `𝒳⁺(A)`: span of generalized eigenvectors with `Re λ ≥ 0` (tested as
/// `Re λ ≥ −1e−9·max(1, ‖A‖)`). The flag reports eigenvalues on that boundary.
pub fn unstable_subspace(a: &Matrix) -> Result<(Matrix, bool)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Matrix::zeros(0, 0), false));
    }
    let scale = norm2(a).max(1.0);
    let tol = SPECTRAL_BOUNDARY * scale;
    let mut schur = RealSchur::new(a)?;
    let boundary = schur.eigenvalues().iter().any(|l| l.re.abs() <= tol);
    let k = schur.reorder_by(|l| l.re >= -tol)?;
    let v = schur.leading_basis(k);
    let defect = invariance_defect(a, &v);
    if defect > 1e-8 * scale {
        return Err(Error::RiccatiCheck(format!("unstable subspace not invariant (defect {defect:e})")));
    }
    Ok((v, boundary))
}

/// Data behind the mixed solution `P_𝒩 = P₋Π + P₊(I − Π)`.
#[derive(Debug, Clone, Serialize)]
pub struct SupportedCurvature {
    #[serde(with = "crate::json::matrix")]
    pub p_n: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub projector: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub n_basis: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub complement_basis: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub unobservable: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub unstable: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub a_minus: Matrix,
    pub boundary: bool,
}

pub fn supported_curvature(
    tp: &TransformedProblem,
    p_minus: &Matrix,
    p_plus: &Matrix,
) -> Result<SupportedCurvature> {
    let n = tp.dim();
    let a_minus = tp.closed_loop(p_minus);
    let unobservable = unobservable_subspace(p_minus, &a_minus)?;
    let (unstable, boundary) = unstable_subspace(&a_minus)?;
    let n_raw = intersect_subspaces(&unobservable, &unstable, 1e-8);
    let k = n_raw.ncols();

    let scale = norm2(&a_minus).max(1.0);
    let radius = 1e-6 * scale;
    let eigs = eigenvalues(&a_minus)?;
    let groups: Vec<Complex64> = cluster_eigenvalues(&eigs, radius)
        .into_iter()
        .map(|c| c.center)
        .filter(|z| z.im >= -radius)
        .collect();
    let in_group = |g: Complex64, l: Complex64| (l - g).norm() <= radius || (l - g.conj()).norm() <= radius;

    // Decide which generalized eigenspaces make up 𝒩.
    let mut inside = Vec::new();
    for &g in &groups {
        let mut schur = RealSchur::new(&a_minus)?;
        let dim = schur.reorder_by(|l| in_group(g, l))?;
        let space = schur.leading_basis(dim);
        let shared = intersect_subspaces(&n_raw, &space, 1e-6).ncols();
        if shared == dim {
            inside.push(g);
        } else if shared != 0 {
            return Err(Error::NoInvariantComplement(format!(
                "𝒩 meets the generalized eigenspace of {g} in dimension {shared} of {dim}"
            )));
        }
    }
    let select = |l: Complex64| inside.iter().any(|&g| in_group(g, l));
    let mut schur = RealSchur::new(&a_minus)?;
    let kn = schur.reorder_by(select)?;
    if kn != k {
        return Err(Error::NoInvariantComplement(format!(
            "𝒩 has dimension {k} but its generalized eigenspaces span {kn}"
        )));
    }
    let n_basis = schur.leading_basis(kn);
    let mut schur_c = RealSchur::new(&a_minus)?;
    let kc = schur_c.reorder_by(|l| !select(l))?;
    let complement_basis = schur_c.leading_basis(kc);

    let projector = if kn == 0 {
        Matrix::zeros(n, n)
    } else if kc == 0 {
        Matrix::identity(n, n)
    } else {
        let mut t = Matrix::zeros(n, n);
        t.view_mut((0, 0), (n, kn)).copy_from(&n_basis);
        t.view_mut((0, kn), (n, kc)).copy_from(&complement_basis);
        let t_inv = t
            .try_inverse()
            .ok_or_else(|| Error::NoInvariantComplement("𝒩 and its complement are not independent".into()))?;
        &n_basis * t_inv.rows(0, kn)
    };

    let pn = projector.norm().max(1.0);
    let idem = (&projector * &projector - &projector).amax();
    let inv = (&a_minus * &projector - &projector * &a_minus * &projector).amax();
    let range = (&projector * &n_basis - &n_basis).amax();
    if idem > 1e-8 * pn * pn || inv > 1e-8 * pn * pn * scale || range > 1e-8 * pn {
        return Err(Error::NoInvariantComplement(format!(
            "projector checks failed (idempotence {idem:e}, invariance {inv:e}, range {range:e})"
        )));
    }
    let p_n = p_minus * &projector + p_plus * (Matrix::identity(n, n) - &projector);
    Ok(SupportedCurvature {
        p_n,
        projector,
        n_basis,
        complement_basis,
        unobservable,
        unstable,
        a_minus,
        boundary,
    })
}

/// Linear value coefficient and the resulting affine data of the closed loop.
#[derive(Debug, Clone, Serialize)]
pub struct Feedforward {
    /// `s` in `V(x) = xᵀPx + 2sᵀx`.
    #[serde(with = "crate::json::vector")]
    pub s: Vector,
    /// Input offset `b = −R⁻¹s` (identical in `u` and `v` coordinates).
    #[serde(with = "crate::json::vector")]
    pub b: Vector,
    /// Closed-loop equilibrium.
    #[serde(with = "crate::json::vector")]
    pub equilibrium: Vector,
    /// Stage cost along the equilibrium, `2sᵀd − sᵀR⁻¹s`.
    pub average_cost: f64,
}

/// Solves `(Ã − R⁻¹P)ᵀ s = −(Pd + c)`.
pub fn affine_feedforward(tp: &TransformedProblem, p: &Matrix) -> Result<Feedforward> {
    let a_cl = tp.closed_loop(p);
    let lu = a_cl.clone().full_piv_lu();
    let rhs = -(p * &tp.d + &tp.c);
    let s = a_cl
        .transpose()
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("closed loop Ã − R⁻¹P".into()))?;
    let b = -(&tp.r_inv * &s);
    let equilibrium = lu
        .solve(&(-(&tp.d + &b)))
        .ok_or_else(|| Error::Singular("closed loop Ã − R⁻¹P".into()))?;
    let average_cost = 2.0 * s.dot(&tp.d) - s.dot(&(&tp.r_inv * &s));
    Ok(Feedforward { s, b, equilibrium, average_cost })
}

#[derive(Debug, Clone, Serialize)]
pub struct Controller {
    pub regime: Regime,
    pub exists: bool,
    pub unique: bool,
    /// `u = −Kx + b`.
    #[serde(with = "crate::json::opt_matrix")]
    pub k: Option<Matrix>,
    /// `v = −K_v x + b`, i.e. `R⁻¹P_used`.
    #[serde(with = "crate::json::opt_matrix")]
    pub k_v: Option<Matrix>,
    #[serde(with = "crate::json::opt_vector")]
    pub b: Option<Vector>,
    #[serde(with = "crate::json::opt_matrix")]
    pub p_used: Option<Matrix>,
    #[serde(with = "crate::json::opt_matrix")]
    pub closed_loop: Option<Matrix>,
    #[serde(with = "crate::json::spectrum")]
    pub spectrum: Vec<Complex64>,
    pub hurwitz: Option<bool>,
    pub feedforward: Option<Feedforward>,
    pub kernel_test: Option<KernelTest>,
    pub curvature: Option<SupportedCurvature>,
    /// `‖(A_c − K) − (Ã − R⁻¹P_used)‖_max`.
    pub closed_loop_consistency: Option<f64>,
    pub notes: Vec<String>,
}

impl Controller {
    fn absent(regime: Regime, exists: bool, notes: Vec<String>) -> Self {
        Self {
            regime,
            exists,
            unique: false,
            k: None,
            k_v: None,
            b: None,
            p_used: None,
            closed_loop: None,
            spectrum: Vec::new(),
            hurwitz: None,
            feedforward: None,
            kernel_test: None,
            curvature: None,
            closed_loop_consistency: None,
            notes,
        }
    }

    /// Builds the gains from a Riccati-type matrix `P` and an optional feedforward.
    pub fn from_solution(
        regime: Regime,
        tp: &TransformedProblem,
        n_cross: &Matrix,
        p: Matrix,
        feedforward: Option<Feedforward>,
        notes: Vec<String>,
    ) -> Result<Self> {
        let n = tp.dim();
        let k_v = &tp.r_inv * &p;
        let k = &tp.r_inv * (&p + n_cross);
        let a_c = &tp.a_tilde + &tp.r_inv * n_cross;
        let closed_u = &a_c - &k;
        let closed_v = tp.closed_loop(&p);
        let consistency = (&closed_u - &closed_v).amax();
        let spectrum = eigenvalues(&closed_v)?;
        let abscissa = spectrum.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let b = feedforward.as_ref().map_or_else(|| Vector::zeros(n), |f| f.b.clone());
        let mut notes = notes;
        if consistency > 1e-9 * (1.0 + closed_v.amax()) {
            notes.push(format!("closed-loop reconstruction mismatch {consistency:e}"));
        }
        Ok(Self {
            regime,
            exists: true,
            unique: true,
            k: Some(k),
            k_v: Some(k_v),
            b: Some(b),
            p_used: Some(p),
            closed_loop: Some(closed_v),
            spectrum,
            hurwitz: Some(abscissa < 0.0),
            feedforward,
            kernel_test: None,
            curvature: None,
            closed_loop_consistency: Some(consistency),
            notes,
        })
    }

    /// `u(x) = −Kx + b`, if a gain exists.
    pub fn input(&self, x: &Vector) -> Option<Vector> {
        Some(-(self.k.as_ref()? * x) + self.b.as_ref()?)
    }

    /// Predicted `∫(ℓ − ℓ̄)dt` from `x0`: `V(x0) − V(x*)` with `V(x) = xᵀPx + 2sᵀx`.
    pub fn predicted_cost(&self, x0: &Vector) -> Option<f64> {
        let p = self.p_used.as_ref()?;
        let v = |x: &Vector| {
            let lin = self.feedforward.as_ref().map_or(0.0, |f| 2.0 * f.s.dot(x));
            x.dot(&(p * x)) + lin
        };
        let tail = self.feedforward.as_ref().map_or(0.0, |f| v(&f.equilibrium));
        Some(v(x0) - tail)
    }

    pub fn average_cost(&self) -> f64 {
        self.feedforward.as_ref().map_or(0.0, |f| f.average_cost)
    }
}

/// Free-endpoint optimum when `Q̃` is sign-indefinite.
pub fn free_endpoint_indefinite(
    tp: &TransformedProblem,
    set: &RiccatiSolutionSet,
    n_cross: &Matrix,
) -> Result<Controller> {
    let regime = Regime::Indefinite;
    let Some(p_minus) = set.p_minus.as_ref() else {
        return Ok(Controller::absent(regime, false, vec![NOTE_NO_ANTISTABILIZING.into()]));
    };
    let p_plus = set
        .p_plus
        .as_ref()
        .ok_or_else(|| Error::RiccatiCheck("P₋ found without a maximal solution P₊".into()))?;
    let test = kernel_inclusion(p_minus, p_plus);
    if !test.inclusion_holds {
        let mut c = Controller::absent(
            regime,
            true,
            vec![
                format!("{NOTE_NOT_ATTAINED} for initial states with a component along ker(P₊ − P₋) outside ker P₋"),
                format!("offending directions: {}", test.offending_directions.ncols()),
            ],
        );
        c.kernel_test = Some(test);
        return Ok(c);
    }
    let curvature = supported_curvature(tp, p_minus, p_plus)?;
    let mut notes = Vec::new();
    if curvature.boundary {
        notes.push("A₋ has an eigenvalue on the imaginary axis (kept in 𝒳⁺)".into());
    }
    let mut c = Controller::from_solution(regime, tp, n_cross, curvature.p_n.clone(), None, notes)?;
    if c.hurwitz == Some(false) {
        c.notes.push("closed loop has at least one eigenvalue with positive real part".into());
    }
    c.kernel_test = Some(test);
    c.curvature = Some(curvature);
    Ok(c)
}

/// Regime dispatch.
pub fn synthesize(
    sys: &VectorizedSystem,
    mats: &StageCostMatrices,
    verdict: &WellPosednessVerdict,
) -> Result<Controller> {
    synthesize_with(sys, mats, verdict, SynthesisOptions::default())
}

pub fn synthesize_with(
    sys: &VectorizedSystem,
    mats: &StageCostMatrices,
    verdict: &WellPosednessVerdict,
    opts: SynthesisOptions,
) -> Result<Controller> {
    let tp = TransformedProblem::from_stage_cost(mats, sys);
    synthesize_problem(&tp, &mats.n_cross, verdict.regime, opts)
}

/// Dispatch on an explicit transformed problem.
pub fn synthesize_problem(
    tp: &TransformedProblem,
    n_cross: &Matrix,
    regime: Regime,
    opts: SynthesisOptions,
) -> Result<Controller> {
    if !regime.is_benign() && !tp.is_homogeneous() {
        return Err(Error::Unsupported(format!(
            "regime {regime}: affine terms d and c must vanish when the cost is not bounded below"
        )));
    }
    match regime {
        Regime::StrictlyConvex => {
            let p = stabilizing_solution(tp)?;
            let ff = affine_feedforward(tp, &p)?;
            Controller::from_solution(regime, tp, n_cross, p, Some(ff), Vec::new())
        }
        Regime::SemidefiniteDetectable => {
            let p = stabilizing_solution(tp)?;
            let ff = affine_feedforward(tp, &p)?;
            let notes = vec!["semidefinite but detectable: stabilizing solution used".into()];
            Controller::from_solution(regime, tp, n_cross, p, Some(ff), notes)
        }
        Regime::SemidefiniteUndetectable => {
            let set = solve_all(tp, opts.enumeration_cap)?;
            let p = smallest_psd_solution(&set)?
                .ok_or_else(|| Error::RiccatiCheck("no positive semidefinite solution found".into()))?;
            let mut notes = vec!["semidefinite, not detectable: smallest PSD solution used".to_string()];
            if p.amax() <= 1e-10 * (1.0 + set.p_plus.as_ref().map_or(0.0, |q| q.amax())) {
                notes.push("zero optimal input".into());
            }
            let mut c = Controller::from_solution(regime, tp, n_cross, p, None, notes)?;
            if c.hurwitz == Some(false) {
                c.notes.push("closed loop unstable: undetectable modes are left unregulated, states diverge".into());
            }
            Ok(c)
        }
        Regime::Indefinite => {
            let set = solve_all(tp, opts.enumeration_cap)?;
            free_endpoint_indefinite(tp, &set, n_cross)
        }
    }
}

/// Result of the Monte-Carlo optimality probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub optimal_cost: f64,
    pub min_perturbed_cost: f64,
    pub trials: usize,
    pub epsilon: f64,
    pub passed: bool,
}

fn closed_loop_cost(tp: &TransformedProblem, k_v: &Matrix, x0: &Vector) -> Result<f64> {
    let a_cl = &tp.a_tilde - k_v;
    let abscissa = spectral_abscissa(&a_cl)?;
    let decay = (-abscissa).max(1e-3);
    let horizon = (40.0 / decay).min(2000.0);
    let dt = (0.05 / norm2(&a_cl).max(1.0)).min(1e-2).min(horizon);
    let zero = Vector::zeros(tp.dim());
    let policy = |_: f64, x: &Vector| -(k_v * x);
    let cost = |x: &Vector, v: &Vector| x.dot(&(&tp.q_tilde * x)) + v.dot(&(&tp.r * v));
    let traj = integrate_affine(&tp.a_tilde, &zero, &policy, x0, horizon, dt, &cost)?;
    if traj.diverged() {
        return Err(Error::NonFinite { time: traj.diverged_at.unwrap_or(horizon) });
    }
    Ok(traj.total_cost())
}

/// Compares the cost of `controller`'s gain with randomly perturbed gains on
/// the homogeneous part of the problem (`d = c = 0`).
pub fn optimality_probe(
    controller: &Controller,
    tp: &TransformedProblem,
    x0: &Vector,
    trials: usize,
) -> Result<ProbeReport> {
    let k_v = controller
        .k_v
        .as_ref()
        .ok_or_else(|| Error::Unsupported("controller has no gain to probe".into()))?;
    let n = tp.dim();
    let base = closed_loop_cost(tp, k_v, x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b7e_c0de);
    let mut epsilon = 1e-2;
    for _ in 0..8 {
        let mut perturbations = Vec::with_capacity(trials);
        let mut attempts = 0;
        while perturbations.len() < trials && attempts < 20 * trials.max(1) {
            attempts += 1;
            let mut delta = Matrix::from_fn(n, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let norm = delta.norm();
            if norm == 0.0 {
                continue;
            }
            delta /= norm;
            let perturbed = k_v + delta * epsilon;
            if spectral_abscissa(&(&tp.a_tilde - &perturbed))? < 0.0 {
                perturbations.push(perturbed);
            }
        }
        if perturbations.is_empty() {
            epsilon *= 0.5;
            continue;
        }
        let costs: Vec<f64> =
            perturbations.par_iter().map(|k| closed_loop_cost(tp, k, x0)).collect::<Result<_>>()?;
        let min_perturbed = costs.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(ProbeReport {
            optimal_cost: base,
            min_perturbed_cost: min_perturbed,
            trials: costs.len(),
            epsilon,
            passed: base <= min_perturbed + 1e-8,
        });
    }
    Err(Error::Unsupported("no Hurwitz-preserving perturbation found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{assemble_system, OpinionModel};
    use crate::graph::DirectedGraph;
    use crate::performance::{assemble_stage_cost, classify_weights, PerformanceWeights};
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(v))
    }

    fn homogeneous(a: Matrix, q: Matrix) -> TransformedProblem {
        let n = a.nrows();
        TransformedProblem::new(a, q, Matrix::identity(n, n), Vector::zeros(n), Vector::zeros(n)).unwrap()
    }

    #[test]
    fn scalar_feedforward_closed_form() {
        let m = |v: f64| Matrix::from_element(1, 1, v);
        let tp = TransformedProblem::new(m(-1.0), m(1.0), m(1.0), Vector::from_element(1, 1.0), Vector::zeros(1))
            .unwrap();
        let p = stabilizing_solution(&tp).unwrap()[(0, 0)];
        let ff = affine_feedforward(&tp, &m(p)).unwrap();
        assert_relative_eq!(ff.s[0], -p / (-1.0 - p), epsilon = 1e-12);
        let zero = affine_feedforward(&homogeneous(m(-1.0), m(1.0)), &m(p)).unwrap();
        assert_eq!(zero.s[0], 0.0);
        assert_eq!(zero.b[0], 0.0);
    }

    #[test]
    fn subspaces_trivial_cases() {
        let a = diag(&[1.0, -1.0]);
        let (v, boundary) = unstable_subspace(&a).unwrap();
        assert_eq!(v.ncols(), 1);
        assert!(v[(0, 0)].abs() > 1.0 - 1e-12);
        assert!(!boundary);
        assert_eq!(unstable_subspace(&diag(&[-1.0, -2.0])).unwrap().0.ncols(), 0);
        assert_eq!(unobservable_subspace(&Matrix::identity(2, 2), &a).unwrap().ncols(), 0);
        assert_eq!(unobservable_subspace(&Matrix::zeros(2, 2), &a).unwrap().ncols(), 2);
    }

    #[test]
    fn scalar_indefinite_uses_p_plus() {
        let m = |v: f64| Matrix::from_element(1, 1, v);
        let tp = homogeneous(m(1.0), m(-0.5));
        let set = solve_all(&tp, 8).unwrap();
        let h = 0.5f64.sqrt();
        assert_relative_eq!(set.p_minus.as_ref().unwrap()[(0, 0)], 1.0 - h, epsilon = 1e-12);
        assert_relative_eq!(set.p_plus.as_ref().unwrap()[(0, 0)], 1.0 + h, epsilon = 1e-12);
        let c = free_endpoint_indefinite(&tp, &set, &m(0.0)).unwrap();
        assert!(c.exists && c.unique);
        let curv = c.curvature.as_ref().unwrap();
        assert_eq!(curv.n_basis.ncols(), 0);
        assert_eq!(curv.projector, m(0.0));
        assert_relative_eq!(c.p_used.as_ref().unwrap()[(0, 0)], 1.0 + h, epsilon = 1e-12);
        assert_eq!(c.hurwitz, Some(true));
    }

    #[test]
    fn strictly_convex_pipeline_two_agents() {
        let pair = DirectedGraph::parse("n 2\n1 2 1\n2 1 1").unwrap().balance().unwrap();
        let model = OpinionModel::new(
            pair.clone(),
            Matrix::identity(1, 1),
            Vector::from_element(2, 1.0),
            Matrix::from_row_slice(2, 1, &[1.0, -0.5]),
        )
        .unwrap();
        let sys = assemble_system(&model).unwrap();
        let w = PerformanceWeights::uniform(2, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let mats = assemble_stage_cost(&w, &pair, &sys).unwrap();
        let verdict = classify_weights(&mats).unwrap();
        let c = synthesize(&sys, &mats, &verdict).unwrap();
        assert_eq!(c.regime, Regime::StrictlyConvex);
        assert!(c.exists && c.unique);
        assert_eq!(c.hurwitz, Some(true));
        let p = c.p_used.as_ref().unwrap();
        let k = c.k.as_ref().unwrap();
        assert!((k - (&mats.r_inv * (p + &mats.n_cross))).amax() < 1e-14);
        assert!(c.closed_loop_consistency.unwrap() < 1e-12);
        let tp = TransformedProblem::from_stage_cost(&mats, &sys);
        let probe = optimality_probe(&c, &tp, &Vector::from_vec(vec![1.0, -1.0]), 50).unwrap();
        assert!(probe.passed, "{probe:?}");
        let mut wrong = c.clone();
        wrong.k_v = Some(c.k_v.as_ref().unwrap() + Matrix::identity(2, 2) * 0.1);
        let probe = optimality_probe(&wrong, &tp, &Vector::from_vec(vec![1.0, -1.0]), 50).unwrap();
        assert!(!probe.passed);
    }

    #[test]
    fn affine_terms_refused_when_unbounded() {
        let m = |v: f64| Matrix::from_element(1, 1, v);
        let tp = TransformedProblem::new(m(1.0), m(-0.5), m(1.0), Vector::from_element(1, 1.0), Vector::zeros(1))
            .unwrap();
        let r = synthesize_problem(&tp, &m(0.0), Regime::Indefinite, SynthesisOptions::default());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
