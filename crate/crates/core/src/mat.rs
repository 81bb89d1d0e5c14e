//! Small dense matrix kernels used by the certificate machinery.
//!
//! Everything here is sized for "desk scale" problems (n <= 16): supply-rate
//! matrices are symmetric 2x2, KYP feasibility certificates are symmetric
//! n x n with n the state dimension, and the homotopy bounds need spectral
//! norms of general (non-symmetric) 2x2 blocks. The eigenvalue routines are
//! deliberately simple and self-contained so that certificates produced by
//! the iterative solver can be re-verified through an independent code path:
//!
//! * `SymMat2::eig2` uses the closed form with the cancellation-safe
//!   discriminant `hypot((a11 - a22)/2, a12)`.
//! * `SymMatN::eign` runs cyclic Jacobi sweeps; for 2x2 input it agrees with
//!   `eig2` to tight tolerance, which is exercised by property tests.
//! * `spectral_norm` forms the smaller Gram matrix and takes the square root
//!   of its largest eigenvalue.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Errors from the iterative eigenvalue routine.
#[derive(Debug, Clone, PartialEq)]
pub enum MatError {
    /// Jacobi sweeps did not drive the off-diagonal mass below the
    /// convergence threshold. Only pathological inputs (NaN/Inf smuggled in
    /// through arithmetic) can trigger this.
    NonConvergence { sweeps: usize },
}

impl fmt::Display for MatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatError::NonConvergence { sweeps } => {
                write!(f, "Jacobi iteration did not converge after {sweeps} sweeps")
            }
        }
    }
}

impl std::error::Error for MatError {}

/// Maximum number of cyclic Jacobi sweeps before giving up.
const MAX_JACOBI_SWEEPS: usize = 100;

/// Off-diagonal magnitudes below `JACOBI_TOL * frobenius_norm` count as
/// converged.
const JACOBI_TOL: f64 = 1e-12;

/// Symmetric 2x2 matrix, stored as the three distinct entries.
///
/// Symmetry is structural: there is no way to construct a non-symmetric
/// value, so supply-rate algebra never has to re-check it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    /// Builds a symmetric 2x2 matrix. All entries must be finite.
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        assert!(
            a11.is_finite() && a12.is_finite() && a22.is_finite(),
            "SymMat2 entries must be finite: [[{a11}, {a12}], [{a12}, {a22}]]"
        );
        SymMat2 { a11, a12, a22 }
    }

    pub fn diag(a11: f64, a22: f64) -> Self {
        SymMat2::new(a11, 0.0, a22)
    }

    pub fn zero() -> Self {
        SymMat2::new(0.0, 0.0, 0.0)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// `self + c * other`, entrywise.
    pub fn add_scaled(&self, c: f64, other: &SymMat2) -> SymMat2 {
        SymMat2::new(
            self.a11 + c * other.a11,
            self.a12 + c * other.a12,
            self.a22 + c * other.a22,
        )
    }

    pub fn scale(&self, c: f64) -> SymMat2 {
        SymMat2::new(c * self.a11, c * self.a12, c * self.a22)
    }

    /// Quadratic form `[u y] * self * [u y]^T`.
    pub fn quad_form(&self, u: f64, y: f64) -> f64 {
        self.a11 * u * u + 2.0 * self.a12 * u * y + self.a22 * y * y
    }

    /// Both eigenvalues, ascending.
    ///
    /// Uses the cancellation-safe discriminant `hypot((a11 - a22)/2, a12)`
    /// instead of `sqrt(trace^2/4 - det)`, which loses digits when the
    /// eigenvalues are close.
    pub fn eig2(&self) -> (f64, f64) {
        let mid = 0.5 * (self.a11 + self.a22);
        let disc = f64::hypot(0.5 * (self.a11 - self.a22), self.a12);
        (mid - disc, mid + disc)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eig2().1
    }

    pub fn lambda_min(&self) -> f64 {
        self.eig2().0
    }

    /// Strict negative-definiteness with an explicit margin:
    /// `lambda_max(self) < -margin`.
    ///
    /// With `margin = 0` this is exact strict definiteness, so a negative
    /// semidefinite matrix with a zero eigenvalue is rejected.
    pub fn is_negdef(&self, margin: f64) -> bool {
        assert!(margin >= 0.0, "negative-definiteness margin must be >= 0");
        self.lambda_max() < -margin
    }

    /// Congruence by the loop interconnection matrix `M = [[0, -1], [1, 0]]`:
    /// returns `M^T * self * M = [[a22, -a12], [-a12, a11]]`.
    ///
    /// `M` is orthogonal, so eigenvalues are preserved and the map is an
    /// involution.
    pub fn m_congruence(&self) -> SymMat2 {
        SymMat2::new(self.a22, -self.a12, self.a11)
    }

    /// Full 2x2 row-major layout (for exports and general-matrix algebra).
    pub fn to_rows(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a12, self.a22]]
    }
}

impl Serialize for SymMat2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMat2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 2]; 2]>::deserialize(deserializer)?;
        let scale = rows.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        if (rows[0][1] - rows[1][0]).abs() > 1e-9 * scale {
            return Err(D::Error::custom(format!(
                "matrix is not symmetric: a12 = {}, a21 = {}",
                rows[0][1], rows[1][0]
            )));
        }
        let a12 = 0.5 * (rows[0][1] + rows[1][0]);
        Ok(SymMat2::new(rows[0][0], a12, rows[1][1]))
    }
}

/// Symmetric n x n matrix (n <= 16), dense row-major storage.
///
/// The constructor symmetrizes its input (`(a + a^T)/2`), so downstream code
/// can treat the invariant as structural.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatN {
    n: usize,
    data: Vec<f64>,
}

impl SymMatN {
    /// Builds from a row-major slice of length `n * n`, symmetrizing.
    pub fn from_row_major(n: usize, raw: &[f64]) -> Self {
        assert!(n <= 16, "SymMatN is sized for n <= 16, got n = {n}");
        assert_eq!(raw.len(), n * n, "row-major data must have n^2 entries");
        assert!(
            raw.iter().all(|v| v.is_finite()),
            "SymMatN entries must be finite"
        );
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
            }
        }
        SymMatN { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n <= 16);
        SymMatN { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMatN::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entry (i, j) and its mirror (j, i).
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn add_scaled(&self, c: f64, other: &SymMatN) -> SymMatN {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + c * b)
            .collect();
        SymMatN { n: self.n, data }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += x[i] * self.get(i, j) * x[j];
            }
        }
        acc
    }

    /// All eigenvalues, ascending, via cyclic Jacobi.
    pub fn eign(&self) -> Result<Vec<f64>, MatError> {
        let (vals, _) = self.eign_full()?;
        Ok(vals)
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors,
    /// returned as columns of a row-major n x n matrix.
    pub fn eign_full(&self) -> Result<(Vec<f64>, Vec<f64>), MatError> {
        let n = self.n;
        if n == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let mut a = self.data.clone();
        // Eigenvector accumulator, starts as identity.
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let scale = self.frobenius();
        let tol = JACOBI_TOL * scale;

        let off = |a: &[f64]| -> f64 {
            let mut worst: f64 = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    worst = worst.max(a[p * n + q].abs());
                }
            }
            worst
        };

        let mut sweeps = 0;
        while off(&a) > tol {
            if sweeps >= MAX_JACOBI_SWEEPS {
                return Err(MatError::NonConvergence { sweeps });
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= tol {
                        continue;
                    }
                    // Classical Jacobi rotation choosing the smaller angle.
                    let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + f64::hypot(1.0, tau))
                    } else {
                        -1.0 / (-tau + f64::hypot(1.0, tau))
                    };
                    let c = 1.0 / f64::hypot(1.0, t);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }

        // Sort ascending, permuting eigenvector columns alongside.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
        let vals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
        let mut vecs = vec![0.0; n * n];
        for (new_col, &old_col) in order.iter().enumerate() {
            for k in 0..n {
                vecs[k * n + new_col] = v[k * n + old_col];
            }
        }
        Ok((vals, vecs))
    }

    pub fn lambda_max(&self) -> Result<f64, MatError> {
        Ok(*self
            .eign()?
            .last()
            .expect("lambda_max of an empty matrix is undefined"))
    }

    pub fn lambda_min(&self) -> Result<f64, MatError> {
        Ok(self.eign()?[0])
    }

    /// Rebuilds `V * diag(clipped eigenvalues) * V^T` after clipping each
    /// eigenvalue through `clip`. This is the projection step used by the
    /// feasibility solver's cone projections.
    pub fn eigen_clip(&self, clip: impl Fn(f64) -> f64) -> Result<SymMatN, MatError> {
        let n = self.n;
        let (vals, vecs) = self.eign_full()?;
        let mut out = vec![0.0; n * n];
        for (k, lam) in vals.iter().enumerate() {
            let lam = clip(*lam);
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += lam * vecs[i * n + k] * vecs[j * n + k];
                }
            }
        }
        // Force exact symmetry against rounding drift.
        Ok(SymMatN::from_row_major(n, &out))
    }
}

/// General dense matrix, row-major. Only the handful of operations the
/// toolkit needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        assert!(data.iter().all(|v| v.is_finite()), "DMat entries must be finite");
        DMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DMat {
        let mut out = DMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &DMat) -> DMat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add_scaled(&self, c: f64, other: &DMat) -> DMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + c * b)
            .collect();
        DMat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, c: f64) -> DMat {
        DMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }
}

/// Largest singular value of a general matrix (rows, cols <= 16).
///
/// Forms the smaller of the two Gram matrices and takes `sqrt(max(eig, 0))`;
/// clamping guards against a tiny negative eigenvalue from rounding.
pub fn spectral_norm(m: &DMat) -> f64 {
    if m.rows == 0 || m.cols == 0 {
        return 0.0;
    }
    assert!(m.rows <= 16 && m.cols <= 16, "spectral_norm is sized for <= 16");
    let gram = if m.rows >= m.cols {
        m.transpose().matmul(m)
    } else {
        m.matmul(&m.transpose())
    };
    let n = gram.rows;
    let sym = SymMatN::from_row_major(n, gram.row_major());
    let lam = sym
        .lambda_max()
        .expect("Jacobi cannot fail on a finite Gram matrix of this size");
    lam.max(0.0).sqrt()
}

/// Spectral norm of a 2x2 block given as rows (used by the homotopy bound,
/// where the blocks are generally non-symmetric).
pub fn spectral_norm_2x2(rows: [[f64; 2]; 2]) -> f64 {
    spectral_norm(&DMat::from_row_major(
        2,
        2,
        vec![rows[0][0], rows[0][1], rows[1][0], rows[1][1]],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Roots of lambda^2 + 0.7 lambda - 0.3025 = 0, the characteristic
    // polynomial of [[-1, -0.05], [-0.05, 0.3]] (quadratic formula, frozen).
    const EIG_LO: f64 = -1.0019202405202649;
    const EIG_HI: f64 = 0.3019202405202649;

    #[test]
    fn eig2_diagonal_is_exact() {
        let (lo, hi) = SymMat2::diag(2.0, -1.0).eig2();
        assert_eq!((lo, hi), (-1.0, 2.0));
    }

    #[test]
    fn eig2_pure_offdiagonal() {
        let (lo, hi) = SymMat2::new(0.0, 1.0, 0.0).eig2();
        assert_eq!((lo, hi), (-1.0, 1.0));
    }

    #[test]
    fn eig2_matches_characteristic_roots() {
        let (lo, hi) = SymMat2::new(-1.0, -0.05, 0.3).eig2();
        assert!((lo - EIG_LO).abs() < 1e-5, "lo = {lo}");
        assert!((hi - EIG_HI).abs() < 1e-5, "hi = {hi}");
    }

    #[test]
    fn negdef_rejects_semidefinite() {
        assert!(SymMat2::diag(-1.0, -1.0).is_negdef(0.0));
        assert!(!SymMat2::diag(-1.0, 0.0).is_negdef(0.0));
        assert!(!SymMat2::new(-1.0, -0.05, 0.3).is_negdef(0.0));
    }

    #[test]
    fn negdef_margin_is_strict() {
        let s = SymMat2::diag(-1.0, -0.5);
        assert!(s.is_negdef(0.49));
        assert!(!s.is_negdef(0.5));
        assert!(!s.is_negdef(0.6));
    }

    #[test]
    fn m_congruence_swaps_and_negates() {
        let g = SymMat2::diag(0.49, -1.0).m_congruence();
        assert_eq!(g, SymMat2::diag(-1.0, 0.49));

        let s = SymMat2::new(0.3, 0.05, -1.0).m_congruence();
        assert_eq!(s, SymMat2::new(-1.0, -0.05, 0.3));

        let p = SymMat2::new(0.0, 1.0, 0.0).m_congruence();
        assert_eq!(p, SymMat2::new(0.0, -1.0, 0.0));
    }

    #[test]
    fn jacobi_diagonal_fixed_point() {
        let m = SymMatN::from_row_major(3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let vals = m.eign().unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn jacobi_all_ones() {
        // Rank-one: eigenvalues {0, 0, n}.
        let m = SymMatN::from_row_major(3, &[1.0; 9]);
        let vals = m.eign().unwrap();
        assert!(vals[0].abs() < 1e-10);
        assert!(vals[1].abs() < 1e-10);
        assert!((vals[2] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn jacobi_eigenvectors_reconstruct() {
        let m = SymMatN::from_row_major(
            4,
            &[
                2.0, -0.3, 0.1, 0.0, //
                -0.3, 1.0, 0.4, -0.2, //
                0.1, 0.4, -1.0, 0.6, //
                0.0, -0.2, 0.6, 0.5,
            ],
        );
        let (vals, vecs) = m.eign_full().unwrap();
        let n = 4;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += vals[k] * vecs[i * n + k] * vecs[j * n + k];
                }
                assert!(
                    (acc - m.get(i, j)).abs() < 1e-10,
                    "V diag(w) V^T mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn eigen_clip_projects_onto_cone() {
        let m = SymMatN::from_row_major(2, &[1.0, 2.0, 2.0, -1.0]);
        let clipped = m.eigen_clip(|lam| lam.min(-0.5)).unwrap();
        let vals = clipped.eign().unwrap();
        assert!(vals.iter().all(|&l| l <= -0.5 + 1e-12), "vals = {vals:?}");
    }

    #[test]
    fn spectral_norm_known_values() {
        assert_eq!(spectral_norm(&DMat::identity(3)), 1.0);
        let d = DMat::from_row_major(2, 2, vec![3.0, 0.0, 0.0, -4.0]);
        assert!((spectral_norm(&d) - 4.0).abs() < 1e-12);
        // Rotations have unit norm.
        let r = DMat::from_row_major(2, 2, vec![0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_norm(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_rectangular() {
        // [[1, 0, 0], [0, 2, 0]] has singular values {1, 2}.
        let m = DMat::from_row_major(2, 3, vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        assert!((spectral_norm(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmat2_serde_roundtrip_and_symmetry_check() {
        let s = SymMat2::new(0.3, 0.025, -1.0);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[[0.3,0.025],[0.025,-1.0]]");
        let back: SymMat2 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);

        let bad: Result<SymMat2, _> = serde_json::from_str("[[1.0,0.5],[0.2,1.0]]");
        assert!(bad.is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn finite() -> impl Strategy<Value = f64> {
            -1e3..1e3f64
        }

        proptest! {
            // Eigenvalues satisfy the trace and determinant identities.
            #[test]
            fn eig2_trace_det(a in finite(), b in finite(), c in finite()) {
                let s = SymMat2::new(a, b, c);
                let (lo, hi) = s.eig2();
                let scale = 1.0 + a.abs().max(b.abs()).max(c.abs());
                prop_assert!(((lo + hi) - s.trace()).abs() <= 1e-12 * scale);
                prop_assert!((lo * hi - s.det()).abs() <= 1e-9 * scale * scale);
                prop_assert!(lo <= hi);
            }

            // M-congruence is an involution and preserves eigenvalues.
            #[test]
            fn m_congruence_involution(a in finite(), b in finite(), c in finite()) {
                let s = SymMat2::new(a, b, c);
                prop_assert_eq!(s.m_congruence().m_congruence(), s);
                let (lo, hi) = s.eig2();
                let (glo, ghi) = s.m_congruence().eig2();
                prop_assert!((lo - glo).abs() <= 1e-12 * (1.0 + lo.abs()));
                prop_assert!((hi - ghi).abs() <= 1e-12 * (1.0 + hi.abs()));
            }

            // Strict 2x2 criterion: negdef <=> trace < 0 and det > 0.
            #[test]
            fn negdef_iff_trace_det(a in finite(), b in finite(), c in finite()) {
                let s = SymMat2::new(a, b, c);
                let by_eig = s.is_negdef(0.0);
                let by_minors = s.trace() < 0.0 && s.det() > 0.0;
                // Near-singular cases can legitimately disagree inside
                // rounding noise; skip the razor-thin shell.
                let scale = (1.0 + a.abs().max(b.abs()).max(c.abs())).powi(2);
                prop_assume!(s.det().abs() > 1e-9 * scale);
                prop_assert_eq!(by_eig, by_minors);
            }

            // Jacobi on 2x2 agrees with the closed form.
            #[test]
            fn jacobi_matches_eig2(a in finite(), b in finite(), c in finite()) {
                let s2 = SymMat2::new(a, b, c);
                let sn = SymMatN::from_row_major(2, &[a, b, b, c]);
                let (lo, hi) = s2.eig2();
                let vals = sn.eign().unwrap();
                let scale = 1.0 + a.abs().max(b.abs()).max(c.abs());
                prop_assert!((vals[0] - lo).abs() <= 1e-10 * scale);
                prop_assert!((vals[1] - hi).abs() <= 1e-10 * scale);
            }

            // Spectral norm of a symmetric matrix is max |eigenvalue|.
            #[test]
            fn spectral_norm_symmetric(a in finite(), b in finite(), c in finite()) {
                let s = SymMat2::new(a, b, c);
                let (lo, hi) = s.eig2();
                let expect = lo.abs().max(hi.abs());
                let got = spectral_norm_2x2(s.to_rows());
                prop_assert!((got - expect).abs() <= 1e-7 * (1.0 + expect));
            }
        }
    }
}
