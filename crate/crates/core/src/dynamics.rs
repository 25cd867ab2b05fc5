//! Networked multi-topic opinion dynamics and their vectorized form.
//!
//! State ordering: component `(k − 1)·n + i` (1-based) holds agent `i` on topic `k`,
//! i.e. the column-major vectorization of the `n × m` opinion matrix.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::LaplacianPair;
use crate::linalg::{cluster_eigenvalues, eigenvalues, norm2, rank, spectral_abscissa, Matrix, Vector};

/// `‖x‖∞` beyond which a trajectory is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// Default integration step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Per-condition outcome of the inter-topic matrix check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterTopicReport {
    pub diagonal_nonnegative: bool,
    pub entries_bounded: bool,
    pub zero_semisimple: bool,
    pub nonzero_stable: bool,
    /// Algebraic multiplicity of the zero eigenvalue of `C − I`.
    pub algebraic_multiplicity: usize,
    /// Dimension of `ker(C − I)`.
    pub geometric_multiplicity: usize,
}

impl InterTopicReport {
    pub fn passed(&self) -> bool {
        self.diagonal_nonnegative && self.entries_bounded && self.zero_semisimple && self.nonzero_stable
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.diagonal_nonnegative {
            out.push("negative diagonal entry in C");
        }
        if !self.entries_bounded {
            out.push("entry of C exceeds 1 in magnitude");
        }
        if !self.zero_semisimple {
            out.push("zero is not a semisimple eigenvalue of C - I with multiplicity >= 1");
        }
        if !self.nonzero_stable {
            out.push("nonzero eigenvalue of C - I with nonnegative real part");
        }
        out
    }
}

/// Checks the structural assumptions on the inter-topic coupling matrix.
pub fn validate_inter_topic(c: &Matrix) -> Result<InterTopicReport> {
    if !c.is_square() || c.nrows() == 0 {
        return Err(Error::Dimension("inter-topic matrix must be square and nonempty".into()));
    }
    let m = c.nrows();
    let diagonal_nonnegative = (0..m).all(|i| c[(i, i)] >= 0.0);
    let entries_bounded = c.iter().all(|v| v.abs() <= 1.0);
    let a = c - Matrix::identity(m, m);
    let eigs = eigenvalues(&a)?;
    let radius = 1e-8 * norm2(&a).max(1.0);
    let algebraic_multiplicity = eigs.iter().filter(|l| l.norm() <= radius).count();
    let geometric_multiplicity = m - rank(&a, 1e-10);
    let zero_semisimple = algebraic_multiplicity >= 1 && algebraic_multiplicity == geometric_multiplicity;
    let nonzero_stable = eigs.iter().filter(|l| l.norm() > radius).all(|l| l.re < 0.0);
    Ok(InterTopicReport {
        diagonal_nonnegative,
        entries_bounded,
        zero_semisimple,
        nonzero_stable,
        algebraic_multiplicity,
        geometric_multiplicity,
    })
}

/// Physical parameters of the opinion model.
#[derive(Debug, Clone)]
pub struct OpinionModel {
    pub laplacians: LaplacianPair,
    /// Inter-topic coupling `C` (m × m).
    pub coupling: Matrix,
    /// Diagonal of the anchoring matrix `A_a` (length n).
    pub anchoring: Vector,
    /// Anchor opinions `X∘` (n × m).
    pub anchors: Matrix,
    inter_topic: InterTopicReport,
}

impl OpinionModel {
    /// Builds a model, rejecting an inter-topic matrix that fails the assumptions.
    pub fn new(laplacians: LaplacianPair, coupling: Matrix, anchoring: Vector, anchors: Matrix) -> Result<Self> {
        let model = Self::new_relaxed(laplacians, coupling, anchoring, anchors)?;
        if !model.inter_topic.passed() {
            return Err(Error::InvalidModel(model.inter_topic.failures().join("; ")));
        }
        Ok(model)
    }

    /// Like [`OpinionModel::new`] but keeps a coupling matrix that fails the
    /// inter-topic assumptions; the report stays available for diagnostics.
    pub fn new_relaxed(
        laplacians: LaplacianPair,
        coupling: Matrix,
        anchoring: Vector,
        anchors: Matrix,
    ) -> Result<Self> {
        let n = laplacians.n();
        let m = coupling.nrows();
        if !coupling.is_square() || m == 0 {
            return Err(Error::Dimension("C must be square and nonempty".into()));
        }
        if anchoring.len() != n {
            return Err(Error::Dimension(format!("A_a has {} entries, expected {n}", anchoring.len())));
        }
        if anchors.shape() != (n, m) {
            return Err(Error::Dimension(format!(
                "X_anchor is {}x{}, expected {n}x{m}",
                anchors.nrows(),
                anchors.ncols()
            )));
        }
        let finite = coupling.iter().chain(anchoring.iter()).chain(anchors.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite model parameter".into()));
        }
        if let Some(bad) = anchoring.iter().find(|&&a| a <= 0.0) {
            return Err(Error::InvalidModel(format!("anchoring gains must be positive, found {bad}")));
        }
        let inter_topic = validate_inter_topic(&coupling)?;
        Ok(Self { laplacians, coupling, anchoring, anchors, inter_topic })
    }

    pub fn n(&self) -> usize {
        self.laplacians.n()
    }

    pub fn m(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn inter_topic_report(&self) -> &InterTopicReport {
        &self.inter_topic
    }

    pub fn min_anchoring(&self) -> f64 {
        self.anchoring.min()
    }
}

/// Drift matrices `(A_c, A_uc)` for coupling `C`, Laplacian `L` and anchoring diagonal.
pub fn drift_matrices(coupling: &Matrix, laplacian: &Matrix, anchoring: &Vector) -> (Matrix, Matrix) {
    let n = laplacian.nrows();
    let m = coupling.nrows();
    let per_agent = laplacian + Matrix::from_diagonal(anchoring) + Matrix::identity(n, n);
    let a_uc = coupling.kronecker(&Matrix::identity(n, n)) - Matrix::identity(m, m).kronecker(&per_agent);
    let a_c = &a_uc - Matrix::identity(n * m, n * m);
    (a_c, a_uc)
}

/// Vectorized dynamics `ẋ = A_c x + d + u`.
#[derive(Debug, Clone, Serialize)]
pub struct VectorizedSystem {
    #[serde(with = "crate::json::matrix")]
    pub a_c: Matrix,
    #[serde(with = "crate::json::matrix")]
    pub a_uc: Matrix,
    #[serde(with = "crate::json::vector")]
    pub d: Vector,
    #[serde(with = "crate::json::vector")]
    pub x_eq: Vector,
    pub n: usize,
    pub m: usize,
}

impl VectorizedSystem {
    pub fn dim(&self) -> usize {
        self.n * self.m
    }

    /// Builds the system from raw parts, solving for the uncontrolled equilibrium.
    pub fn from_parts(a_c: Matrix, d: Vector, n: usize, m: usize) -> Result<Self> {
        let nm = n * m;
        if a_c.shape() != (nm, nm) || d.len() != nm {
            return Err(Error::Dimension(format!("drift must be {nm}x{nm} with a length-{nm} offset")));
        }
        let a_uc = &a_c + Matrix::identity(nm, nm);
        let mut sys = Self { a_c, a_uc, d, x_eq: Vector::zeros(nm), n, m };
        sys.x_eq = uncontrolled_equilibrium(&sys)?;
        Ok(sys)
    }
}

pub fn assemble_system(model: &OpinionModel) -> Result<VectorizedSystem> {
    let (n, m) = (model.n(), model.m());
    let (a_c, a_uc) = drift_matrices(&model.coupling, &model.laplacians.l, &model.anchoring);
    let anchor_vec = Vector::from_column_slice(model.anchors.as_slice());
    let d = Matrix::identity(m, m).kronecker(&Matrix::from_diagonal(&model.anchoring)) * anchor_vec;
    let mut sys = VectorizedSystem { a_c, a_uc, d, x_eq: Vector::zeros(n * m), n, m };
    sys.x_eq = uncontrolled_equilibrium(&sys).map_err(|e| match e {
        Error::Singular(msg) => Error::InvalidModel(format!("model defect: {msg}")),
        other => other,
    })?;
    Ok(sys)
}

/// Solves `A_uc x_eq + d = 0`, checking the residual.
pub fn uncontrolled_equilibrium(sys: &VectorizedSystem) -> Result<Vector> {
    let lu = sys.a_uc.clone().full_piv_lu();
    let x = lu
        .solve(&(-&sys.d))
        .ok_or_else(|| Error::Singular("uncontrolled drift A_uc".into()))?;
    let residual = (&sys.a_uc * &x + &sys.d).amax();
    let scale = 1.0 + sys.a_uc.amax() * x.amax() + sys.d.amax();
    if !x.iter().all(|v| v.is_finite()) || residual > 1e-9 * scale {
        return Err(Error::Singular(format!("A_uc is ill-conditioned (residual {residual:e})")));
    }
    Ok(x)
}

/// `−(1 + a_min) − max Re σ(A_c)`; nonnegative when the drift meets the Gershgorin bound.
pub fn spectral_abscissa_certificate(sys: &VectorizedSystem, a_min: f64) -> Result<f64> {
    Ok(-(1.0 + a_min) - spectral_abscissa(&sys.a_c)?)
}

/// A feedback law `u = π(t, x)`.
pub trait Policy {
    fn input(&self, t: f64, x: &Vector) -> Vector;
}

impl<F> Policy for F
where
    F: Fn(f64, &Vector) -> Vector,
{
    fn input(&self, t: f64, x: &Vector) -> Vector {
        self(t, x)
    }
}

/// Sampled closed-loop path.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    /// Integral of the stage cost from 0 to each sample time.
    pub running_cost: Vec<f64>,
    /// Time at which `‖x‖∞` exceeded [`DIVERGENCE_THRESHOLD`], if it did.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    pub fn total_cost(&self) -> f64 {
        self.running_cost.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Columns `t, x_1..x_nm, u_1..u_nm, running_cost`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let nm = self.states.first().map_or(0, |x| x.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=nm).map(|i| format!("x_{i}")));
        header.extend((1..=nm).map(|i| format!("u_{i}")));
        header.push("running_cost".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.states[k].iter().map(|v| v.to_string()));
            row.extend(self.inputs[k].iter().map(|v| v.to_string()));
            row.push(self.running_cost[k].to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates `ẋ = A_c x + d + π(t, x)` with fixed-step RK4.
pub fn simulate<P: Policy + ?Sized>(
    sys: &VectorizedSystem,
    policy: &P,
    x0: &Vector,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_affine(&sys.a_c, &sys.d, policy, x0, horizon, dt, &|_: &Vector, _: &Vector| 0.0)
}

/// Same as [`simulate`] while accumulating `∫ cost(x, u) dt`.
pub fn simulate_with_cost<P, C>(
    sys: &VectorizedSystem,
    policy: &P,
    x0: &Vector,
    horizon: f64,
    dt: f64,
    cost: &C,
) -> Result<Trajectory>
where
    P: Policy + ?Sized,
    C: Fn(&Vector, &Vector) -> f64 + ?Sized,
{
    integrate_affine(&sys.a_c, &sys.d, policy, x0, horizon, dt, cost)
}

/// Fixed-step RK4 for `ẋ = A x + offset + π(t, x)`, with the running cost
/// integrated as an extra state.
pub fn integrate_affine<P, C>(
    drift: &Matrix,
    offset: &Vector,
    policy: &P,
    x0: &Vector,
    horizon: f64,
    dt: f64,
    cost: &C,
) -> Result<Trajectory>
where
    P: Policy + ?Sized,
    C: Fn(&Vector, &Vector) -> f64 + ?Sized,
{
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidSimulation(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt <= horizon) {
        return Err(Error::InvalidSimulation(format!("step must satisfy 0 < dt <= T, got {dt}")));
    }
    let nm = drift.nrows();
    if x0.len() != nm || offset.len() != nm || drift.ncols() != nm {
        return Err(Error::Dimension(format!("initial state has {} entries, expected {nm}", x0.len())));
    }

    let rhs = |t: f64, x: &Vector| -> (Vector, Vector, f64) {
        let u = policy.input(t, x);
        let l = cost(x, &u);
        let mut dx = drift * x;
        dx += offset;
        dx += &u;
        (dx, u, l)
    };

    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        running_cost: Vec::with_capacity(steps + 1),
        diverged_at: None,
    };
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut j = 0.0;
    let (mut k1, mut u_now, mut l1) = rhs(t, &x);
    for step in 0..steps {
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.inputs.push(u_now.clone());
        traj.running_cost.push(j);

        let h = if step + 1 == steps { horizon - t } else { dt };
        let (k2, _, l2) = rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let (k3, _, l3) = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let (k4, _, l4) = rhs(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        j += (l1 + 2.0 * l2 + 2.0 * l3 + l4) * (h / 6.0);
        t = if step + 1 == steps { horizon } else { (step + 1) as f64 * dt };

        if !x.iter().all(|v| v.is_finite()) || !j.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        (k1, u_now, l1) = rhs(t, &x);
        if x.amax() > DIVERGENCE_THRESHOLD {
            traj.diverged_at = Some(t);
            break;
        }
    }
    traj.times.push(t);
    traj.states.push(x);
    traj.inputs.push(u_now);
    traj.running_cost.push(j);
    Ok(traj)
}

/// Distinct eigenvalue clusters of the drift, handy for reports.
pub fn drift_spectrum(sys: &VectorizedSystem) -> Result<Vec<num_complex::Complex64>> {
    let eigs = eigenvalues(&sys.a_c)?;
    Ok(cluster_eigenvalues(&eigs, 0.0).into_iter().map(|c| c.center).collect())
}
