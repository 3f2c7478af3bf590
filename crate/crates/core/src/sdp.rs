//! Dense numerical backbone: complex Hermitian eigendecomposition (cyclic
//! Jacobi with a fixed sweep order), PSD projection, and the feasibility
//! bisection solver for the Schur-multiplier completely bounded norm
//!
//!     min { t : [[X, A], [A*, Y]] PSD, diag(X) <= t, diag(Y) <= t }.
//!
//! The minimum equals the cb norm of the Schur multiplier `B -> A o B`; the
//! minimizing completion factors as a Gram matrix whose columns realize
//! `A_{ij} = <xi_j, eta_i>` with `max ||xi_j|| max ||eta_i|| = t`.
//!
//! Everything here is deterministic: no randomness, no parallel reductions,
//! fixed iteration order.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::linalg::{CMatrix, C64, C_ZERO};
use crate::tol::SDP_CERTIFICATE_TOL;

/// Desk-scale cap for the dense eigensolver.
pub const MAX_EIGEN_ORDER: usize = 512;

/// Desk-scale cap for the SDP solver.
pub const MAX_SDP_ORDER: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 60;
const JACOBI_REL_OFF_TOL: f64 = 1e-14;

/// A square matrix stored exactly Hermitian: the constructor mirrors the
/// upper triangle, so `entries[i][j] == conj(entries[j][i])` bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Accepts a matrix that is already Hermitian up to round-off.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(CoreError::DimensionMismatch(
                "hermitian matrix must be square".into(),
            ));
        }
        if !m.is_finite() {
            return Err(CoreError::NonFiniteInput("matrix entry".into()));
        }
        let scale = m.max_abs_entry().max(1.0);
        if m.hermitian_defect() > 1e-10 * scale {
            return Err(CoreError::InvalidConstruction(
                "matrix is not Hermitian".into(),
            ));
        }
        Ok(Self(mirror_upper(&m)))
    }

    /// Projects onto the Hermitian matrices first, then mirrors.
    pub fn symmetrize(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(CoreError::DimensionMismatch(
                "hermitian matrix must be square".into(),
            ));
        }
        let h = m.hermitian_part()?;
        Ok(Self(mirror_upper(&h)))
    }

    pub fn order(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Copies the upper triangle onto the lower one (conjugated) and makes the
/// diagonal exactly real.
fn mirror_upper(m: &CMatrix) -> CMatrix {
    let n = m.rows();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        out.set(i, i, Complex64::new(m.get(i, i).re, 0.0));
        for j in (i + 1)..n {
            let z = m.get(i, j);
            out.set(i, j, z);
            out.set(j, i, z.conj());
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order and the unitary matrix whose
/// columns are the matching eigenvectors.
pub fn hermitian_eigen(m: &HermitianMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.order();
    if n > MAX_EIGEN_ORDER {
        return Err(CoreError::DimensionMismatch(format!(
            "eigensolver order {} exceeds cap {}",
            n, MAX_EIGEN_ORDER
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let mut a = m.matrix().clone();
    let mut v = CMatrix::identity(n);
    let norm = a.frobenius_norm();
    if norm > 0.0 {
        let off_tol = JACOBI_REL_OFF_TOL * norm;
        let skip_tol = off_tol / (10.0 * n as f64);
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_norm(&a) <= off_tol {
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.norm() <= skip_tol {
                        continue;
                    }
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    // Exact diagonalization of the 2x2 principal block,
                    // taking the eigenvalue nearer a_pp so the rotation
                    // angle stays at most pi/4. With h = (a_pp - a_qq)/2
                    // and r the half-gap, that eigenvalue is a_pp + d with
                    // d = sign(h) |a_pq|^2 / (r + |h|), a cancellation-free
                    // form of sign(h)(r - |h|).
                    let h = 0.5 * (app - aqq);
                    let r = (h * h + apq.norm_sqr()).sqrt();
                    let d = if h >= 0.0 {
                        apq.norm_sqr() / (r + h)
                    } else {
                        -(apq.norm_sqr() / (r - h))
                    };
                    let s2 = apq.norm_sqr() + d * d;
                    if s2 == 0.0 {
                        continue;
                    }
                    let s = s2.sqrt();
                    // Orthonormal eigenvector pair of the 2x2 block:
                    // (apq, d)/s for a_pp + d, (-d, conj(apq))/s for the other.
                    let r11 = apq / s;
                    let r21 = Complex64::new(d / s, 0.0);
                    let r12 = Complex64::new(-d / s, 0.0);
                    let r22 = apq.conj() / s;
                    apply_rotation(&mut a, &mut v, p, q, r11, r21, r12, r22);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, v.get(row, old_col));
        }
    }
    Ok((eigenvalues, vectors))
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += a.get(i, j).norm_sqr();
        }
    }
    (2.0 * acc).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn apply_rotation(
    a: &mut CMatrix,
    v: &mut CMatrix,
    p: usize,
    q: usize,
    r11: C64,
    r21: C64,
    r12: C64,
    r22: C64,
) {
    let n = a.rows();
    // Columns: A <- A R on columns p, q.
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, akp * r11 + akq * r21);
        a.set(k, q, akp * r12 + akq * r22);
    }
    // Rows: A <- R* A on rows p, q.
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, r11.conj() * apk + r21.conj() * aqk);
        a.set(q, k, r12.conj() * apk + r22.conj() * aqk);
    }
    // The rotation annihilates the (p,q) entry exactly.
    a.set(p, q, C_ZERO);
    a.set(q, p, C_ZERO);
    a.set(p, p, Complex64::new(a.get(p, p).re, 0.0));
    a.set(q, q, Complex64::new(a.get(q, q).re, 0.0));
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, vkp * r11 + vkq * r21);
        v.set(k, q, vkp * r12 + vkq * r22);
    }
}

/// Nearest PSD matrix in Frobenius norm: eigenvalue clipping at zero.
pub fn psd_project(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let projected = psd_project_raw(m.matrix())?;
    HermitianMatrix::symmetrize(&projected)
}

/// Internal projection for matrices already Hermitian by construction.
fn psd_project_raw(m: &CMatrix) -> Result<CMatrix> {
    let h = HermitianMatrix::symmetrize(m)?;
    let (eigenvalues, v) = hermitian_eigen(&h)?;
    let n = h.order();
    if eigenvalues.first().map(|&l| l >= 0.0).unwrap_or(true) {
        return Ok(h.into_matrix());
    }
    // V diag(clip) V*, built column by column in a fixed order.
    let mut scaled = v.clone();
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        let c = Complex64::new(lambda.max(0.0), 0.0);
        for i in 0..n {
            scaled.set(i, j, scaled.get(i, j) * c);
        }
    }
    let out = scaled.mul(&v.adjoint())?;
    Ok(mirror_upper(&out))
}

/// Largest singular value: `sqrt(lambda_max(A* A))`, via the smaller Gram
/// side.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    let gram = if a.rows() >= a.cols() {
        a.adjoint().mul(a)?
    } else {
        a.mul(&a.adjoint())?
    };
    let h = HermitianMatrix::symmetrize(&gram)?;
    let (eigenvalues, _) = hermitian_eigen(&h)?;
    let top = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    Ok(top.sqrt())
}

/// Smallest eigenvalue of the Hermitian part of a square matrix.
pub fn min_eigenvalue(a: &CMatrix) -> Result<f64> {
    let h = HermitianMatrix::symmetrize(a)?;
    let (eigenvalues, _) = hermitian_eigen(&h)?;
    Ok(eigenvalues.first().copied().unwrap_or(0.0))
}

/// Knobs of the feasibility bisection. Defaults match the library-wide
/// tolerances and desk-scale instance sizes.
#[derive(Clone, Debug)]
pub struct SdpOptions {
    /// Width of the final bisection bracket; also the largest diagonal
    /// shift accepted when certifying a query as feasible.
    pub tol: f64,
    /// Cap on projection-splitting iterations per feasibility query.
    pub max_iterations: usize,
    /// Iterations between certificate (minimum eigenvalue) evaluations.
    pub check_every: usize,
    /// Iterations per stagnation-measurement window.
    pub stagnation_window: usize,
    /// Minimal relative improvement of the certificate shift per window;
    /// slower progress far from the acceptance level counts as infeasible.
    pub stagnation_improvement: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iterations: 50_000,
            check_every: 5,
            stagnation_window: 250,
            stagnation_improvement: 1e-3,
        }
    }
}

/// Outcome of the cb-norm SDP. `converged` implies the returned completion
/// certifies `t`: the assembled block matrix has minimum eigenvalue at least
/// `-1e-8` and its diagonal respects the cap exactly.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub t: f64,
    pub x: HermitianMatrix,
    pub y: HermitianMatrix,
    /// Full `2n x 2n` completion with the data block inserted exactly.
    pub completion: CMatrix,
    /// Minimum eigenvalue of the completion.
    pub certificate: f64,
    /// Total projection iterations over all feasibility queries.
    pub iterations: usize,
    pub converged: bool,
}

struct FeasibilityOutcome {
    /// The certificate shift fell below the acceptance level.
    accepted: bool,
    /// A point of the pinned constraint set (diagonal capped at `t`, data
    /// block exact).
    point: CMatrix,
    /// `max(0, -lambda_min(point))`: adding `eps I` makes the point PSD and
    /// certifies feasibility at `t + eps`.
    eps: f64,
    /// Governing sequence, reusable as a warm start at a nearby level.
    governing: CMatrix,
    iterations: usize,
}

fn assemble(x_diag: f64, a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m.set(i, i, Complex64::new(x_diag, 0.0));
        m.set(n + i, n + i, Complex64::new(x_diag, 0.0));
    }
    m.insert_block(0, n, a);
    m.insert_block(n, 0, &a.adjoint());
    m
}

/// Projection onto the constraint set: off-diagonal blocks pinned to `A`
/// and `A*`, diagonal entries capped at `t`. Everything else is free.
fn project_constraints(m: &CMatrix, a: &CMatrix, t: f64) -> CMatrix {
    let n = a.rows();
    let mut out = m.clone();
    out.insert_block(0, n, a);
    out.insert_block(n, 0, &a.adjoint());
    for i in 0..2 * n {
        let d = out.get(i, i).re.min(t);
        out.set(i, i, Complex64::new(d, 0.0));
    }
    out
}

/// Douglas-Rachford splitting between the PSD cone and the pinned
/// constraint set at level `t`: with `s` the governing sequence,
///
///   y = P_pinned(s),  z = P_psd(2y - s),  s <- s + z - y.
///
/// The shadow iterate `y` always lies in the pinned set (data block exact,
/// diagonal capped at `t`) and carries an exact feasibility certificate for
/// `t + eps(y)` with `eps(y) = max(0, -lambda_min(y))`; the query is
/// accepted once that shift drops to `eps_accept`. When the sets do not
/// intersect, `eps` stalls at a positive floor, which the windowed
/// stagnation test turns into an infeasibility verdict.
fn projection_feasibility(
    a: &CMatrix,
    t: f64,
    start: Option<&CMatrix>,
    eps_accept: f64,
    opts: &SdpOptions,
) -> Result<FeasibilityOutcome> {
    let two = Complex64::new(2.0, 0.0);
    let mut s = match start {
        Some(prev) => prev.clone(),
        None => assemble(t, a),
    };
    let mut best_point = project_constraints(&s, a, t);
    let mut best_eps = shift_of(&best_point)?;
    if best_eps <= eps_accept {
        return Ok(FeasibilityOutcome {
            accepted: true,
            point: best_point,
            eps: best_eps,
            governing: s,
            iterations: 0,
        });
    }
    let mut window_best = f64::INFINITY;
    let mut prev_window_best = f64::INFINITY;
    for iter in 1..=opts.max_iterations {
        let y = project_constraints(&s, a, t);
        let reflected = y.scale(two).sub(&s)?;
        let z = psd_project_raw(&reflected)?;
        let step = z.sub(&y)?;
        let residual = step.frobenius_norm();
        s = s.add(&step)?;
        // The certificate needs an extra eigendecomposition; probe it
        // periodically, and always once the raw step is small.
        if iter % opts.check_every == 0 || residual <= 10.0 * eps_accept {
            let eps = shift_of(&y)?;
            if eps < best_eps {
                best_eps = eps;
                best_point = y.clone();
            }
            if best_eps <= eps_accept {
                return Ok(FeasibilityOutcome {
                    accepted: true,
                    point: best_point,
                    eps: best_eps,
                    governing: s,
                    iterations: iter,
                });
            }
            window_best = window_best.min(eps);
        }
        if iter % opts.stagnation_window == 0 {
            let far = best_eps > 10.0 * eps_accept;
            let improvement = (prev_window_best - window_best) / prev_window_best.max(1e-300);
            if far
                && iter >= 3 * opts.stagnation_window
                && prev_window_best.is_finite()
                && improvement < opts.stagnation_improvement
                && window_best.is_finite()
            {
                return Ok(FeasibilityOutcome {
                    accepted: false,
                    point: best_point,
                    eps: best_eps,
                    governing: s,
                    iterations: iter,
                });
            }
            prev_window_best = window_best;
            window_best = f64::INFINITY;
        }
    }
    Ok(FeasibilityOutcome {
        accepted: false,
        point: best_point,
        eps: best_eps,
        governing: s,
        iterations: opts.max_iterations,
    })
}

/// `max(0, -lambda_min(z))`.
fn shift_of(z: &CMatrix) -> Result<f64> {
    Ok((-min_eigenvalue(z)?).max(0.0))
}

/// `z + eps I`.
fn shift_completion(z: &CMatrix, eps: f64) -> CMatrix {
    let mut out = z.clone();
    for i in 0..z.rows() {
        let d = out.get(i, i);
        out.set(i, i, Complex64::new(d.re + eps, d.im));
    }
    out
}

/// The cb norm of the Schur multiplier of `A`, with default options.
pub fn schur_cb_norm_sdp(a: &CMatrix, tol: f64) -> Result<SdpSolution> {
    let opts = SdpOptions {
        tol,
        ..SdpOptions::default()
    };
    schur_cb_norm_sdp_with(a, &opts)
}

/// Bisection on `t` between `max |A_ij|` (always a lower bound: Schur
/// multiplication hits matrix units) and the Frobenius norm (always
/// feasible with `X = Y = ||A||_F I`). Feasibility at each `t` is decided
/// by Douglas-Rachford projection splitting between the PSD cone and the
/// pinned block/diagonal-cap set; a query is accepted once the diagonal
/// shift `eps = -lambda_min` of its constraint-set iterate falls below the
/// bisection tolerance, and the reported value `t + eps` is certified by
/// the shifted completion itself.
pub fn schur_cb_norm_sdp_with(a: &CMatrix, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = a.rows();
    if n == 0 || a.cols() == 0 {
        return Err(CoreError::DimensionMismatch("empty matrix".into()));
    }
    if !a.is_square() {
        return Err(CoreError::DimensionMismatch(format!(
            "schur norm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if n > MAX_SDP_ORDER {
        return Err(CoreError::DimensionMismatch(format!(
            "sdp order {} exceeds cap {}",
            n, MAX_SDP_ORDER
        )));
    }
    if !a.is_finite() {
        return Err(CoreError::NonFiniteInput("matrix entry".into()));
    }
    if opts.tol < 1e-8 {
        return Err(CoreError::InvalidConstruction(
            "bisection tolerance below 1e-8".into(),
        ));
    }

    let mut lo = a.max_abs_entry();
    let mut hi = a.frobenius_norm();
    let mut total_iters = 0usize;

    if lo == 0.0 {
        let completion = CMatrix::zeros(2 * n, 2 * n);
        return Ok(SdpSolution {
            t: 0.0,
            x: HermitianMatrix::symmetrize(&CMatrix::zeros(n, n))?,
            y: HermitianMatrix::symmetrize(&CMatrix::zeros(n, n))?,
            completion,
            certificate: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let eps_accept = opts.tol;

    // The lower bracket endpoint is optimal whenever it is feasible, so
    // probe it first; the certified value is then within tol of optimal
    // after a single query.
    let probe = projection_feasibility(a, lo, None, eps_accept, opts)?;
    total_iters += probe.iterations;
    let (t_level, outcome) = if probe.accepted {
        (lo, probe)
    } else {
        let top = projection_feasibility(a, hi, None, eps_accept, opts)?;
        total_iters += top.iterations;
        if !top.accepted {
            return Err(CoreError::NonConvergence {
                iterations: total_iters,
                residual: top.eps,
            });
        }
        let mut best = top;
        let mut t_level = hi;
        while hi - lo > opts.tol {
            let mid = 0.5 * (lo + hi);
            let q = projection_feasibility(a, mid, Some(&best.governing), eps_accept, opts)?;
            total_iters += q.iterations;
            if q.accepted {
                hi = mid;
                t_level = mid;
                best = q;
            } else {
                lo = mid;
            }
        }
        (t_level, best)
    };

    let accepted = outcome.accepted;
    let eps = outcome.eps;
    let t = t_level + eps;
    let completion = shift_completion(&outcome.point, eps);
    let certificate = min_eigenvalue(&completion)?;
    let x = HermitianMatrix::symmetrize(&completion.block(0, 0, n, n))?;
    let y = HermitianMatrix::symmetrize(&completion.block(n, n, n, n))?;
    Ok(SdpSolution {
        t,
        x,
        y,
        completion,
        certificate,
        iterations: total_iters,
        converged: accepted && certificate >= -SDP_CERTIFICATE_TOL,
    })
}

/// Gram factorization of the PSD-projected completion: `xi_j` is column
/// `n + j` of the factor, `eta_i` column `i`, so `<xi_j, eta_i> = A_ij`
/// up to the certificate slack and
/// `max_j ||xi_j|| * max_i ||eta_i|| <= t` up to the same slack.
pub fn extract_factorization(
    sol: &SdpSolution,
    a: &CMatrix,
) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    if !sol.converged {
        return Err(CoreError::NonConvergence {
            iterations: sol.iterations,
            residual: sol.certificate.abs(),
        });
    }
    let n = a.rows();
    if sol.completion.rows() != 2 * n {
        return Err(CoreError::DimensionMismatch(
            "completion does not match the data matrix".into(),
        ));
    }
    let psd = psd_project_raw(&sol.completion)?;
    let h = HermitianMatrix::symmetrize(&psd)?;
    let (eigenvalues, v) = hermitian_eigen(&h)?;
    let m = 2 * n;
    // factor = diag(sqrt(lambda)) V*, so factor* factor = completion.
    let mut factor = CMatrix::zeros(m, m);
    for k in 0..m {
        let root = eigenvalues[k].max(0.0).sqrt();
        for j in 0..m {
            factor.set(k, j, v.get(j, k).conj() * root);
        }
    }
    let eta: Vec<Vec<C64>> = (0..n).map(|i| factor.column(i)).collect();
    let xi: Vec<Vec<C64>> = (0..n).map(|j| factor.column(n + j)).collect();
    Ok((xi, eta))
}
