//! Band-restricted dissipativity certificates for LTI plants.
//!
//! For a Hurwitz plant `(A, B, C, D)`, a supply matrix `Theta` and a band
//! edge `wbar`, the certified property is the dissipation inequality
//!
//! ```text
//! d/dt (x' P x)  <=  s (xdot' Q xdot - wbar^2 x' Q x)  +  xi' Theta xi
//! ```
//!
//! for all states and inputs, where `xi = [u, y]'`, `Q` is positive
//! definite, `s = +1` on low bands `[0, wbar]` and `s = -1` on high bands
//! `[wbar, inf)`. Expanding along `xdot = Ax + Bu` turns it into one
//! linear matrix inequality `F(P, Q) <= 0` in the symmetric unknowns
//! `(P, Q)`:
//!
//! ```text
//! F(P,Q) = [ A'P + PA - s(A'QA - wbar^2 Q)    PB - s A'QB ]
//!          [ B'P - s B'QA                     -s B'QB     ]  -  E' Theta E,
//! E = [ 0_{1 x n}  1 ]
//!     [ C          D ]     (E maps [x; u] to xi = [u; y]).
//! ```
//!
//! Feasibility of `F(P,Q) < 0`, `Q > 0` implies the frequency-domain
//! inequality `[1, G(jw)]* Theta [1, G(jw)] >= 0` on the band, and the
//! time-domain reading: trajectories whose spectra respect the band
//! premise `int xdot' Q xdot <= wbar^2 int x' Q x` (reversed on high
//! bands) satisfy `int xi' Theta xi >= 0`.
//!
//! Feasibility is decided by relaxed alternating projections on the
//! lifted variable set `(P, Q, Z)` with the affine constraint
//! `Z = F(P, Q)` and the cone constraint `{Z <= -sigma I, Q >= sigma I}`:
//! project onto the cone by eigenvalue clipping, onto the affine set by a
//! precomputed least-squares solve, over-relax the step, and shrink the
//! margin `sigma` when progress stalls. A returned certificate is
//! *always* re-verified by an
//! independent eigenvalue computation, so the solver can be conservative
//! (UNKNOWN) but never unsound. The frequency-domain check `fdi_check`
//! is a separate code path (adaptive band sweep) used to cross-validate.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lti::{
    band_extremum, band_inf_real, band_sup_gain, is_hurwitz, BandObjective, FreqBand, LtiError,
    StateSpace,
};
use crate::mat::{DMat, MatError, SymMat2, SymMatN};
use crate::supply::{SupplyError, Trajectory, DECAY_REL_TOL};

/// Iteration cap for the alternating-projection solver.
pub const MAX_AP_ITERATIONS: usize = 200_000;
/// Over-relaxation factor for the projection iteration. The composed
/// projection operator is 2/3-averaged, so any factor below 3/2 keeps
/// the convergence guarantee while roughly doubling the linear rate on
/// thin feasible sets.
pub const AP_RELAXATION: f64 = 1.4;
/// Initial cone margin sigma; halved whenever progress stalls.
pub const INITIAL_SIGMA: f64 = 1e-6;
/// Largest state dimension the feasibility solver accepts.
pub const MAX_SOLVE_DIM: usize = 8;
/// Default relative tolerance for the time-domain premise/conclusion.
pub const TD_DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum KypError {
    /// The plant's A matrix is not Hurwitz.
    NotHurwitz,
    /// Band-restricted certificates need a LOW or HIGH band, not FULL.
    UnsupportedBand,
    /// Certificate data does not match the problem dimensions.
    DimensionMismatch { expected: usize, found: usize },
    /// Imported certificate was produced for a different problem.
    HashMismatch,
    /// Malformed certificate payload.
    BadCertificate { reason: String },
    /// Frequency sweep failed (pole on the imaginary axis).
    Lti(LtiError),
    /// Trajectory-level precondition failed.
    Supply(SupplyError),
    /// Eigenvalue iteration failed to converge.
    Mat(MatError),
}

impl fmt::Display for KypError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KypError::NotHurwitz => write!(f, "state matrix A is not Hurwitz"),
            KypError::UnsupportedBand => {
                write!(f, "certificates are band-restricted: use a LOW or HIGH band")
            }
            KypError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected n = {expected}, found {found}")
            }
            KypError::HashMismatch => {
                write!(f, "certificate was issued for a different problem")
            }
            KypError::BadCertificate { reason } => write!(f, "bad certificate: {reason}"),
            KypError::Lti(e) => write!(f, "{e}"),
            KypError::Supply(e) => write!(f, "{e}"),
            KypError::Mat(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for KypError {}

impl From<LtiError> for KypError {
    fn from(e: LtiError) -> Self {
        KypError::Lti(e)
    }
}

impl From<SupplyError> for KypError {
    fn from(e: SupplyError) -> Self {
        KypError::Supply(e)
    }
}

impl From<MatError> for KypError {
    fn from(e: MatError) -> Self {
        KypError::Mat(e)
    }
}

/// A band-restricted dissipativity question: plant, supply matrix, band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KypProblem {
    sys: StateSpace,
    theta: SymMat2,
    band: FreqBand,
    #[serde(skip)]
    controllable: bool,
}

impl KypProblem {
    /// Validates that the plant is Hurwitz and the band is one-sided.
    /// Also records whether `(A, B)` is controllable (Kalman rank test,
    /// tolerance `1e-9` relative): without controllability the
    /// LMI-feasible => frequency-domain direction still holds, but the
    /// converse completeness claim is downgraded in reports.
    pub fn new(sys: StateSpace, theta: SymMat2, band: FreqBand) -> Result<Self, KypError> {
        if matches!(band, FreqBand::Full) {
            return Err(KypError::UnsupportedBand);
        }
        if !is_hurwitz(&sys) {
            return Err(KypError::NotHurwitz);
        }
        let controllable = is_controllable(&sys);
        Ok(KypProblem { sys, theta, band, controllable })
    }

    pub fn sys(&self) -> &StateSpace {
        &self.sys
    }

    pub fn theta(&self) -> &SymMat2 {
        &self.theta
    }

    pub fn band(&self) -> &FreqBand {
        &self.band
    }

    pub fn controllable(&self) -> bool {
        self.controllable
    }

    /// SHA-256 over the canonical JSON form; ties certificates to the
    /// exact problem they were issued for.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("problem serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn band_sign(&self) -> f64 {
        match self.band {
            FreqBand::Low { .. } => 1.0,
            FreqBand::High { .. } => -1.0,
            FreqBand::Full => unreachable!("rejected at construction"),
        }
    }

    fn omega_bar(&self) -> f64 {
        self.band.omega_bar().expect("band is one-sided")
    }
}

/// Kalman controllability rank test with relative tolerance 1e-9.
fn is_controllable(sys: &StateSpace) -> bool {
    let n = sys.n();
    if n == 0 {
        return true;
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v = sys.b.clone();
    cols.push(v.clone());
    for _ in 1..n {
        v = sys.a.matvec(&v);
        cols.push(v.clone());
    }
    // Gram matrix of the controllability columns; full rank iff the
    // smallest singular value exceeds 1e-9 times the largest.
    let mut gram = SymMatN::zeros(n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            gram.set_sym(i, j, dot);
        }
    }
    // A non-converged eigensolve cannot prove controllability; report the
    // conservative answer.
    let Ok(vals) = gram.eign() else { return false };
    let hi = vals.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let lo = vals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    hi > 0.0 && lo > 1e-9 * hi
}

/// The affine LMI map `(P, Q) -> F(P, Q)` for one problem, with the data
/// needed to assemble it for arbitrary symmetric arguments.
#[derive(Debug, Clone)]
pub struct KypLmi {
    n: usize,
    s: f64,
    omega_bar: f64,
    a: DMat,
    b: Vec<f64>,
    /// Constant term `-E' Theta E`; the only place C and D enter.
    const_term: SymMatN,
}

/// Build the LMI map for a problem.
pub fn build_kyp_lmi(prob: &KypProblem) -> KypLmi {
    let sys = prob.sys();
    let n = sys.n();
    let theta = prob.theta();
    // E = [[0_{1,n}, 1], [C, D]]; const term is -E' Theta E.
    let mut e1 = vec![0.0; n + 1];
    e1[n] = 1.0;
    let mut e2 = sys.c.clone();
    e2.push(sys.d);
    let mut const_rm = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..=n {
        for j in 0..=n {
            let v = theta.a11 * e1[i] * e1[j]
                + theta.a12 * (e1[i] * e2[j] + e2[i] * e1[j])
                + theta.a22 * e2[i] * e2[j];
            const_rm[i * (n + 1) + j] = -v;
        }
    }
    KypLmi {
        n,
        s: prob.band_sign(),
        omega_bar: prob.omega_bar(),
        a: sys.a.clone(),
        b: sys.b.clone(),
        const_term: SymMatN::from_row_major(n + 1, &const_rm),
    }
}

impl KypLmi {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension-checked assembly, for certificate data from outside.
    pub fn try_assemble(&self, p: &SymMatN, q: &SymMatN) -> Result<SymMatN, KypError> {
        if p.n() != self.n {
            return Err(KypError::DimensionMismatch { expected: self.n, found: p.n() });
        }
        if q.n() != self.n {
            return Err(KypError::DimensionMismatch { expected: self.n, found: q.n() });
        }
        Ok(self.assemble(p, q))
    }

    /// `F(P, Q)`: the `(n+1) x (n+1)` symmetric LMI value.
    pub fn assemble(&self, p: &SymMatN, q: &SymMatN) -> SymMatN {
        let n = self.n;
        debug_assert_eq!(p.n(), n);
        debug_assert_eq!(q.n(), n);
        let pd = DMat::from_row_major(n, n, p.row_major().to_vec());
        let qd = DMat::from_row_major(n, n, q.row_major().to_vec());
        let at = self.a.transpose();
        // Top-left block: A'P + PA - s (A'QA - wbar^2 Q).
        let atp = at.matmul(&pd);
        let pa = pd.matmul(&self.a);
        let aqa = at.matmul(&qd).matmul(&self.a);
        let w2 = self.omega_bar * self.omega_bar;
        let mut tl = atp.add_scaled(1.0, &pa);
        tl = tl.add_scaled(-self.s, &aqa);
        tl = tl.add_scaled(self.s * w2, &qd);
        // Cross block: PB - s A'QB.
        let pb = pd.matvec(&self.b);
        let qb = qd.matvec(&self.b);
        let aqb = at.matvec(&qb);
        // Corner: -s B'QB.
        let bqb: f64 = self.b.iter().zip(&qb).map(|(x, y)| x * y).sum();
        let mut rm = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                rm[i * (n + 1) + j] = tl.get(i, j);
            }
            let cross = pb[i] - self.s * aqb[i];
            rm[i * (n + 1) + n] = cross;
            rm[n * (n + 1) + i] = cross;
        }
        rm[n * (n + 1) + n] = -self.s * bqb;
        let f = SymMatN::from_row_major(n + 1, &rm);
        f.add_scaled(1.0, &self.const_term)
    }
}

/// Scaled vectorization of a symmetric matrix (diagonal entries as-is,
/// off-diagonal times sqrt(2)), so Euclidean inner products of svec
/// vectors equal Frobenius inner products of the matrices.
fn svec(m: &SymMatN) -> Vec<f64> {
    let n = m.n();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let x = m.get(i, j);
            v.push(if i == j { x } else { std::f64::consts::SQRT_2 * x });
        }
    }
    v
}

fn unsvec(n: usize, v: &[f64]) -> SymMatN {
    assert_eq!(v.len(), n * (n + 1) / 2);
    let mut m = SymMatN::zeros(n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let x = if i == j { v[k] } else { v[k] / std::f64::consts::SQRT_2 };
            m.set_sym(i, j, x);
            k += 1;
        }
    }
    m
}

/// Dense Cholesky of a symmetric positive definite matrix (row-major
/// lower factor). Returns None if a pivot degenerates.
fn cholesky(a: &DMat) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve `L L' x = b` given the lower Cholesky factor.
fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[i * n + k] * y[k];
        }
        y[i] = acc / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for k in (i + 1)..n {
            acc -= l[k * n + i] * x[k];
        }
        x[i] = acc / l[i * n + i];
    }
    x
}

/// A feasibility certificate: storage matrix `P` (sign-indefinite
/// allowed), band multiplier `Q >= margin I`, and the certified margin
/// (`F(P,Q) <= -margin I`). Both inequalities re-verify by independent
/// eigenvalue computation in [`KypCertificate::verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct KypCertificate {
    pub p: SymMatN,
    pub q: SymMatN,
    pub margin: f64,
}

/// Serialized certificate payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CertificateExport {
    n: usize,
    p_row_major: Vec<f64>,
    q_row_major: Vec<f64>,
    margin: f64,
    problem_hash: String,
}

impl KypCertificate {
    /// Independent re-verification: `lambda_min(Q) >= margin` and
    /// `lambda_max(F(P,Q)) <= -margin` by the Jacobi eigensolver.
    pub fn verify(&self, prob: &KypProblem) -> Result<bool, KypError> {
        let lmi = build_kyp_lmi(prob);
        if self.margin <= 0.0 {
            return Ok(false);
        }
        if lmi.n() == 0 {
            // Pure gain: F is the scalar -[1, D] Theta [1, D]'.
            let f = lmi.try_assemble(&self.p, &self.q)?;
            return Ok(f.get(0, 0) <= -self.margin);
        }
        let f = lmi.try_assemble(&self.p, &self.q)?;
        Ok(self.q.lambda_min()? >= self.margin && f.lambda_max()? <= -self.margin)
    }

    pub fn to_json(&self, prob: &KypProblem) -> String {
        let export = CertificateExport {
            n: self.p.n(),
            p_row_major: self.p.row_major().to_vec(),
            q_row_major: self.q.row_major().to_vec(),
            margin: self.margin,
            problem_hash: prob.digest(),
        };
        serde_json::to_string_pretty(&export).expect("certificate serializes")
    }

    /// Parse a certificate and bind it to `prob` (hash and dimensions
    /// must match). The caller still runs [`KypCertificate::verify`].
    pub fn from_json(text: &str, prob: &KypProblem) -> Result<Self, KypError> {
        let export: CertificateExport =
            serde_json::from_str(text).map_err(|e| KypError::BadCertificate {
                reason: e.to_string(),
            })?;
        if export.problem_hash != prob.digest() {
            return Err(KypError::HashMismatch);
        }
        let n = export.n;
        if n != prob.sys().n() {
            return Err(KypError::DimensionMismatch { expected: prob.sys().n(), found: n });
        }
        if export.p_row_major.len() != n * n || export.q_row_major.len() != n * n {
            return Err(KypError::BadCertificate {
                reason: "row-major arrays have wrong length".into(),
            });
        }
        if !export.margin.is_finite() {
            return Err(KypError::BadCertificate { reason: "non-finite margin".into() });
        }
        Ok(KypCertificate {
            p: SymMatN::from_row_major(n, &export.p_row_major),
            q: SymMatN::from_row_major(n, &export.q_row_major),
            margin: export.margin,
        })
    }
}

/// Outcome of the feasibility search.
#[derive(Debug, Clone, PartialEq)]
pub enum KypOutcome {
    Feasible(KypCertificate),
    /// No certificate found; `residual` is the final distance between the
    /// affine iterate and the cone (zero distance would mean feasible at
    /// the final sigma).
    Unknown { residual: f64, iterations: usize },
}

impl KypOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, KypOutcome::Feasible(_))
    }
}

/// Decide feasibility of the dissipation LMI by relaxed alternating
/// projections.
///
/// Never returns a false positive: candidate certificates are accepted
/// only after the independent eigenvalue re-verification at margin
/// `sigma / 2`. Infeasible or borderline problems come back `Unknown`.
pub fn solve_kyp(prob: &KypProblem) -> KypOutcome {
    let n = prob.sys().n();
    assert!(n <= MAX_SOLVE_DIM, "feasibility solver accepts n <= {MAX_SOLVE_DIM}");
    if n == 0 {
        // F reduces to the scalar -[1, D] Theta [1, D]'.
        let quad = prob.theta().quad_form(1.0, prob.sys().d);
        return if quad > 0.0 {
            KypOutcome::Feasible(KypCertificate {
                p: SymMatN::zeros(0),
                q: SymMatN::zeros(0),
                margin: quad / 2.0,
            })
        } else {
            KypOutcome::Unknown { residual: (-quad).max(0.0), iterations: 0 }
        };
    }

    let lmi = build_kyp_lmi(prob);
    let m = n * (n + 1) / 2; // svec length of P and of Q
    let m2 = (n + 1) * (n + 2) / 2; // svec length of F

    // Affine map svec(F) = M [svec P; svec Q] + f0, built column by column.
    let f0 = svec(&lmi.assemble(&SymMatN::zeros(n), &SymMatN::zeros(n)));
    let mut mcols: Vec<Vec<f64>> = Vec::with_capacity(2 * m);
    for var in 0..2 {
        for k in 0..m {
            let mut basis = vec![0.0; m];
            basis[k] = 1.0;
            let unit = unsvec(n, &basis);
            let (p, q) = if var == 0 {
                (unit, SymMatN::zeros(n))
            } else {
                (SymMatN::zeros(n), unit)
            };
            let col = svec(&lmi.assemble(&p, &q));
            mcols.push(col.iter().zip(&f0).map(|(a, b)| a - b).collect());
        }
    }
    let mut mmat = DMat::zeros(m2, 2 * m);
    for (j, col) in mcols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            mmat.set(i, j, v);
        }
    }
    // Normal matrix I + M'M for the affine projection, factored once.
    let mt = mmat.transpose();
    let mut normal = mt.matmul(&mmat);
    for i in 0..2 * m {
        normal.set(i, i, normal.get(i, i) + 1.0);
    }
    let lfac = cholesky(&normal).expect("I + M'M is positive definite");

    let apply_m = |v: &[f64]| -> Vec<f64> {
        let mut out = f0.clone();
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                for i in 0..m2 {
                    out[i] += mmat.get(i, j) * vj;
                }
            }
        }
        out
    };

    // Free iterate (v, z), started from P = 0, Q = I on the affine set.
    // Each sweep applies the cone projection, then the affine projection,
    // then moves the iterate by AP_RELAXATION times the computed step.
    let mut v = vec![0.0; 2 * m];
    {
        let qi = svec(&SymMatN::identity(n));
        v[m..2 * m].copy_from_slice(&qi);
    }
    let mut z = apply_m(&v);

    let mut sigma = INITIAL_SIGMA;
    let mut residual = f64::INFINITY;
    let mut window_best = f64::INFINITY;
    let mut prev_window_best = f64::INFINITY;
    let mut stalls_at_floor = 0usize;
    const WINDOW: usize = 500;
    const SIGMA_FLOOR: f64 = 1e-13;

    for iter in 0..MAX_AP_ITERATIONS {
        // Cone projection of (Q, Z); P is unconstrained. The Jacobi
        // sweep converging is part of the method; if it ever fails we
        // stop with the conservative outcome.
        let q = unsvec(n, &v[m..2 * m]);
        let zq = unsvec(n + 1, &z);
        let (Ok(qc), Ok(zc)) = (
            q.eigen_clip(|l| l.max(sigma)),
            zq.eigen_clip(|l| l.min(-sigma)),
        ) else {
            return KypOutcome::Unknown { residual, iterations: iter };
        };
        let qc_v = svec(&qc);
        let zc_v = svec(&zc);
        let mut dist2 = 0.0;
        for (a, b) in qc_v.iter().zip(&v[m..2 * m]) {
            dist2 += (a - b) * (a - b);
        }
        for (a, b) in zc_v.iter().zip(&z) {
            dist2 += (a - b) * (a - b);
        }
        residual = dist2.sqrt();
        window_best = window_best.min(residual);

        // Affine projection of the cone point: minimize
        // ||v - vc||^2 + ||Mv + f0 - zc||^2.
        let mut rhs = vec![0.0; 2 * m];
        rhs[..m].copy_from_slice(&v[..m]); // P part of the cone point
        rhs[m..2 * m].copy_from_slice(&qc_v);
        let diff: Vec<f64> = zc_v.iter().zip(&f0).map(|(a, b)| a - b).collect();
        let mtd = mt.matvec(&diff);
        for i in 0..2 * m {
            rhs[i] += mtd[i];
        }
        let vstar = chol_solve(&lfac, 2 * m, &rhs);
        let zstar = apply_m(&vstar);

        // Candidate acceptance: independent eigenvalue verification of
        // the affine-projected candidate (sound for any P, Q pair).
        if iter % 10 == 9 || residual < 1e-14 {
            let p_mat = unsvec(n, &vstar[..m]);
            let q_mat = unsvec(n, &vstar[m..2 * m]);
            let f = lmi.assemble(&p_mat, &q_mat);
            if let (Ok(qmin), Ok(fmax)) = (q_mat.lambda_min(), f.lambda_max()) {
                if qmin >= sigma / 2.0 && fmax <= -sigma / 2.0 {
                    return KypOutcome::Feasible(KypCertificate {
                        p: p_mat,
                        q: q_mat,
                        margin: sigma / 2.0,
                    });
                }
            }
        }

        // Relaxed step toward the affine projection.
        for i in 0..2 * m {
            v[i] += AP_RELAXATION * (vstar[i] - v[i]);
        }
        for i in 0..m2 {
            z[i] += AP_RELAXATION * (zstar[i] - z[i]);
        }

        // Stall handling: if the cone distance stopped improving over a
        // window, shrink the margin; once the margin has bottomed out and
        // the distance is still flat, the problem is (numerically)
        // infeasible and further iterations are wasted.
        if (iter + 1) % WINDOW == 0 {
            let improved = window_best < prev_window_best * (1.0 - 1e-3);
            if !improved {
                if sigma > SIGMA_FLOOR {
                    sigma *= 0.5;
                    stalls_at_floor = 0;
                } else {
                    stalls_at_floor += 1;
                    if stalls_at_floor >= 2 {
                        return KypOutcome::Unknown { residual, iterations: iter + 1 };
                    }
                }
            }
            prev_window_best = window_best;
            window_best = f64::INFINITY;
        }
    }
    KypOutcome::Unknown { residual, iterations: MAX_AP_ITERATIONS }
}

/// Frequency-domain inequality report: the minimum of
/// `[1, G]* Theta [1, G]` over the band, where it is attained, and
/// whether it is nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdiReport {
    pub holds: bool,
    pub worst_omega: f64,
    pub margin: f64,
}

/// Pointwise frequency-domain check of the supply inequality on the band
/// (adaptive grid + refinement + analytic tail bound from the lti layer).
pub fn fdi_check(prob: &KypProblem) -> Result<FdiReport, KypError> {
    let ext = band_extremum(prob.sys(), prob.band(), BandObjective::InfQuad(*prob.theta()))?;
    Ok(FdiReport {
        holds: ext.value >= 0.0,
        worst_omega: ext.omega,
        margin: ext.value,
    })
}

/// Time-domain check report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdReport {
    pub premise_holds: bool,
    pub conclusion_holds: bool,
    /// `int xdot' Q xdot dt`.
    pub premise_lhs: f64,
    /// `wbar^2 int x' Q x dt`.
    pub premise_rhs: f64,
    /// `int xi' Theta xi dt`.
    pub conclusion_integral: f64,
}

/// Evaluate the band premise and the supply conclusion on a simulated
/// trajectory: premise `int xdot' Q xdot <= wbar^2 int x' Q x` on low
/// bands (reversed on high bands), conclusion `int xi' Theta xi >= 0`.
/// `tol` is relative ([`TD_DEFAULT_TOL`] for routine checks).
pub fn td_check(
    traj: &Trajectory,
    theta: &SymMat2,
    q: &SymMatN,
    band: &FreqBand,
    tol: f64,
) -> Result<TdReport, KypError> {
    assert!(tol >= 0.0 && tol.is_finite());
    let omega_bar = match band {
        FreqBand::Low { omega_bar } | FreqBand::High { omega_bar } => *omega_bar,
        FreqBand::Full => return Err(KypError::UnsupportedBand),
    };
    let n = traj.state_dim;
    if q.n() != n {
        return Err(KypError::DimensionMismatch { expected: n, found: q.n() });
    }
    let ratio = traj.terminal_decay_ratio();
    if ratio > DECAY_REL_TOL {
        return Err(SupplyError::TruncationUnsound { terminal_ratio: ratio }.into());
    }
    let quad_state = |flat: &[f64], i: usize| -> f64 {
        q.quad_form(&flat[i * n..(i + 1) * n])
    };
    let (mut int_xdot, mut int_x, mut int_xi) = (0.0, 0.0, 0.0);
    for i in 1..traj.len() {
        let dt = traj.t[i] - traj.t[i - 1];
        int_xdot += 0.5 * dt * (quad_state(&traj.xdot, i - 1) + quad_state(&traj.xdot, i));
        int_x += 0.5 * dt * (quad_state(&traj.x, i - 1) + quad_state(&traj.x, i));
        int_xi += 0.5
            * dt
            * (theta.quad_form(traj.u[i - 1], traj.y[i - 1])
                + theta.quad_form(traj.u[i], traj.y[i]));
    }
    let premise_lhs = int_xdot;
    let premise_rhs = omega_bar * omega_bar * int_x;
    let pscale = premise_lhs.abs().max(premise_rhs.abs()).max(1.0);
    let premise_holds = match band {
        FreqBand::Low { .. } => premise_lhs <= premise_rhs + tol * pscale,
        FreqBand::High { .. } => premise_lhs >= premise_rhs - tol * pscale,
        FreqBand::Full => unreachable!(),
    };
    let cscale = 1.0 + traj.input_energy();
    let conclusion_holds = int_xi >= -tol * cscale;
    Ok(TdReport {
        premise_holds,
        conclusion_holds,
        premise_lhs,
        premise_rhs,
        conclusion_integral: int_xi,
    })
}

/// Deterministic random problem for the solver/oracle agreement battery:
/// stable plant with `n <= 3`, supply matrix with `theta22 < 0`, random
/// one-sided band. Most draws are built feasible with a healthy margin
/// (so the solver should certify them); roughly one in ten is built
/// infeasible (the solver must then *not* certify).
pub fn random_problem(seed: u64) -> KypProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 + (rng.gen_range(0..3u32) as usize);
    // Gershgorin-shifted A is Hurwitz with margin.
    let mut a = DMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    let max_row: f64 = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    for i in 0..n {
        a.set(i, i, a.get(i, i) - max_row - rng.gen_range(0.1..1.0));
    }
    let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Keep the plant from being numerically silent.
    if b.iter().map(|v| v.abs()).fold(0.0f64, f64::max) < 0.3 {
        b[0] += 0.5;
    }
    if c.iter().map(|v| v.abs()).fold(0.0f64, f64::max) < 0.3 {
        c[0] += 0.5;
    }
    let d = rng.gen_range(-0.5..0.5);
    let sys = StateSpace::new(a, b, c, d);

    let omega_bar = rng.gen_range(0.3..3.0);
    let band = if rng.gen_bool(0.5) {
        FreqBand::low(omega_bar)
    } else {
        FreqBand::high(omega_bar)
    };

    let sup = band_sup_gain(&sys, &band).expect("stable plant sweeps cleanly");
    let flavor: f64 = rng.gen();
    let theta = if flavor < 0.55 {
        // Gain bound with a comfortable margin, small off-diagonal twist.
        let gamma = sup * rng.gen_range(1.15..1.6) + 0.1;
        let t = rng.gen_range(-0.1..0.1) * (sup + 0.1);
        SymMat2::new(gamma * gamma, t, -1.0)
    } else if flavor < 0.75 {
        // Shifted-passivity flavor, feasible by construction.
        let r = band_inf_real(&sys, &band).expect("stable plant sweeps cleanly");
        let eps = -r + 0.05 * (1.0 + r.abs());
        let kappa = (eps + r) / (1.0 + sup * sup);
        SymMat2::new(2.0 * eps, 1.0, -kappa)
    } else if flavor < 0.9 {
        // Feasible but with a thinner margin: stresses the solver.
        let gamma = sup * 1.05 + 0.05;
        SymMat2::new(gamma * gamma, 0.0, -1.0)
    } else {
        // Deliberately infeasible (gain bound below the actual sup),
        // unless the plant is so quiet that any bound holds.
        if sup > 0.05 {
            let gamma = sup * rng.gen_range(0.3..0.8);
            SymMat2::new(gamma * gamma, 0.0, -1.0)
        } else {
            SymMat2::new(1.0, 0.0, -1.0)
        }
    };
    KypProblem::new(sys, theta, band).expect("generator produces valid problems")
}
