//! Supply-rate specifications and integral quadratic forms on trajectories.
//!
//! A mixed supply specification carries two symmetric 2x2 matrices: `theta`
//! for the gain-type branch and `pi` for the band-limited gain constraint
//! that accompanies the passivity-type branch, plus a passivity shift
//! `epsilon`. The shifted passivity form is always
//! `psi(eps) = [[2 eps, 1], [1, 0]]`, derived on demand and never stored.
//!
//! For an input-output pair `xi = [u, y]^T`, a trajectory satisfies the
//! gain branch when `int xi^T Theta xi dt >= 0` and the passivity branch
//! when both `int xi^T Psi_eps xi dt >= 0` and `int xi^T Pi xi dt >= 0`.
//! Classification evaluates all three integrals by composite trapezoidal
//! quadrature and reports which branches hold up to a scale-aware
//! tolerance. The infinite-horizon statement is approximated on a finite
//! horizon only when the terminal state has decayed to a negligible
//! fraction of its peak; otherwise classification refuses to answer.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mat::SymMat2;

/// Terminal state norm must fall below this fraction of the peak state
/// norm before a finite trajectory is accepted as an infinite-horizon
/// surrogate.
pub const DECAY_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum SupplyError {
    /// A time step on the sample grid was zero or negative.
    DegenerateGrid { index: usize },
    /// The trajectory has not decayed enough for finite-horizon integrals
    /// to stand in for the infinite-horizon ones.
    TruncationUnsound { terminal_ratio: f64 },
    /// CSV import failed.
    Csv { line: usize, reason: String },
}

impl fmt::Display for SupplyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupplyError::DegenerateGrid { index } => {
                write!(f, "nonincreasing time grid at sample {index}")
            }
            SupplyError::TruncationUnsound { terminal_ratio } => write!(
                f,
                "terminal state is {terminal_ratio:.3e} of peak; horizon too short for \
                 infinite-horizon classification"
            ),
            SupplyError::Csv { line, reason } => write!(f, "CSV line {line}: {reason}"),
        }
    }
}

impl std::error::Error for SupplyError {}

/// Mixed supply specification: gain-branch matrix `theta`, passivity-branch
/// companion matrix `pi`, and passivity shift `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplySpec {
    pub theta: SymMat2,
    pub pi: SymMat2,
    pub epsilon: f64,
}

impl SupplySpec {
    pub fn new(theta: SymMat2, pi: SymMat2, epsilon: f64) -> Self {
        assert!(epsilon.is_finite());
        SupplySpec { theta, pi, epsilon }
    }

    /// The shifted passivity form for this specification's `epsilon`.
    pub fn psi(&self) -> SymMat2 {
        psi(self.epsilon)
    }
}

/// Shifted passivity supply matrix `[[2 eps, 1], [1, 0]]`.
pub fn psi(epsilon: f64) -> SymMat2 {
    SymMat2::new(2.0 * epsilon, 1.0, 0.0)
}

/// Sign pattern that makes a mixed specification yield finite closed-loop
/// gain: `theta11 >= 0`, `theta22 < 0`, `pi11 >= 0`, `pi22 < 0`, all
/// compared exactly against zero.
pub fn is_finite_gain_mixed(spec: &SupplySpec) -> bool {
    spec.theta.a11 >= 0.0
        && spec.theta.a22 < 0.0
        && spec.pi.a11 >= 0.0
        && spec.pi.a22 < 0.0
}

/// Sampled trajectory of a SISO system: times, input, output, and the
/// state and state-derivative samples stored flat with stride `state_dim`.
///
/// Producer contract: `xdot[i] = f(x[i], u[i])` at every sample, so that
/// storage-function derivatives can be formed without re-differencing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub state_dim: usize,
}

impl Trajectory {
    /// Panics if the invariants are violated; external data should be
    /// validated (e.g. by [`Trajectory::from_csv`]) before construction.
    pub fn new(
        t: Vec<f64>,
        u: Vec<f64>,
        y: Vec<f64>,
        x: Vec<f64>,
        xdot: Vec<f64>,
        state_dim: usize,
    ) -> Self {
        let len = t.len();
        assert!(len >= 2, "trajectory needs at least 2 samples");
        assert_eq!(u.len(), len);
        assert_eq!(y.len(), len);
        assert_eq!(x.len(), len * state_dim);
        assert_eq!(xdot.len(), len * state_dim);
        assert_eq!(t[0], 0.0, "time grid must start at 0");
        for i in 1..len {
            assert!(t[i] > t[i - 1], "time grid must be strictly increasing");
        }
        assert!(
            t.iter()
                .chain(&u)
                .chain(&y)
                .chain(&x)
                .chain(&xdot)
                .all(|v| v.is_finite()),
            "trajectory samples must be finite"
        );
        Trajectory { t, u, y, x, xdot, state_dim }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: len >= 2
    }

    /// Euclidean norm of the state at sample `i`.
    pub fn state_norm(&self, i: usize) -> f64 {
        let s = &self.x[i * self.state_dim..(i + 1) * self.state_dim];
        s.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||x(T)|| / max_t ||x(t)||`; zero for stateless or identically zero
    /// trajectories.
    pub fn terminal_decay_ratio(&self) -> f64 {
        if self.state_dim == 0 {
            return 0.0;
        }
        let peak = (0..self.len())
            .map(|i| self.state_norm(i))
            .fold(0.0f64, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        self.state_norm(self.len() - 1) / peak
    }

    /// `int u^2 dt` by the trapezoidal rule (used for scale-aware
    /// tolerances).
    pub fn input_energy(&self) -> f64 {
        trapezoid(&self.t, |i| self.u[i] * self.u[i])
    }

    /// CSV export with header `t,u,y,x0..x{n-1},xdot0..xdot{n-1}`.
    pub fn to_csv(&self) -> String {
        let n = self.state_dim;
        let mut out = String::from("t,u,y");
        for j in 0..n {
            out.push_str(&format!(",x{j}"));
        }
        for j in 0..n {
            out.push_str(&format!(",xdot{j}"));
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{}", self.t[i], self.u[i], self.y[i]));
            for j in 0..n {
                out.push_str(&format!(",{}", self.x[i * n + j]));
            }
            for j in 0..n {
                out.push_str(&format!(",{}", self.xdot[i * n + j]));
            }
            out.push('\n');
        }
        out
    }

    /// CSV import; the inverse of [`Trajectory::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, SupplyError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(SupplyError::Csv {
            line: 1,
            reason: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "t" || cols[1] != "u" || cols[2] != "y" {
            return Err(SupplyError::Csv {
                line: 1,
                reason: "header must start with t,u,y".into(),
            });
        }
        let extra = cols.len() - 3;
        if extra % 2 != 0 {
            return Err(SupplyError::Csv {
                line: 1,
                reason: "expected matching x and xdot columns".into(),
            });
        }
        let n = extra / 2;
        for j in 0..n {
            if cols[3 + j] != format!("x{j}") || cols[3 + n + j] != format!("xdot{j}") {
                return Err(SupplyError::Csv {
                    line: 1,
                    reason: format!("expected columns x0..x{} then xdot0..xdot{}", n - 1, n - 1),
                });
            }
        }
        let (mut t, mut u, mut y) = (Vec::new(), Vec::new(), Vec::new());
        let (mut x, mut xdot) = (Vec::new(), Vec::new());
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(SupplyError::Csv {
                    line: lineno,
                    reason: format!("expected {} fields, found {}", cols.len(), fields.len()),
                });
            }
            let mut parsed = Vec::with_capacity(fields.len());
            for f in &fields {
                let v: f64 = f.parse().map_err(|_| SupplyError::Csv {
                    line: lineno,
                    reason: format!("cannot parse '{f}' as a number"),
                })?;
                if !v.is_finite() {
                    return Err(SupplyError::Csv {
                        line: lineno,
                        reason: "non-finite sample".into(),
                    });
                }
                parsed.push(v);
            }
            t.push(parsed[0]);
            u.push(parsed[1]);
            y.push(parsed[2]);
            x.extend_from_slice(&parsed[3..3 + n]);
            xdot.extend_from_slice(&parsed[3 + n..]);
        }
        if t.len() < 2 {
            return Err(SupplyError::Csv {
                line: 1,
                reason: "need at least 2 samples".into(),
            });
        }
        if t[0] != 0.0 {
            return Err(SupplyError::Csv {
                line: 2,
                reason: "time grid must start at 0".into(),
            });
        }
        for i in 1..t.len() {
            if t[i] <= t[i - 1] {
                return Err(SupplyError::Csv {
                    line: i + 2,
                    reason: "time grid must be strictly increasing".into(),
                });
            }
        }
        Ok(Trajectory::new(t, u, y, x, xdot, n))
    }
}

/// Composite trapezoidal rule over the sample grid for a pointwise value.
fn trapezoid(t: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut prev = f(0);
    for i in 1..t.len() {
        let cur = f(i);
        acc += 0.5 * (t[i] - t[i - 1]) * (prev + cur);
        prev = cur;
    }
    acc
}

/// `int xi^T S xi dt` with `xi = [u, y]^T`, by the composite trapezoidal
/// rule on the trajectory's own grid.
pub fn quad_integral(traj: &Trajectory, s: &SymMat2) -> Result<f64, SupplyError> {
    for i in 1..traj.len() {
        if traj.t[i] - traj.t[i - 1] <= 0.0 {
            return Err(SupplyError::DegenerateGrid { index: i });
        }
    }
    Ok(trapezoid(&traj.t, |i| s.quad_form(traj.u[i], traj.y[i])))
}

/// Which dissipation branches a trajectory satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Only the gain branch holds.
    Theta,
    /// Only the passivity pair (shifted passivity + band gain) holds.
    PiPsi,
    /// All three integrals are nonnegative.
    Both,
    /// No branch holds: a counterexample to mixedness with this spec.
    Neither,
}

/// Classification outcome with the raw integral values, so callers can see
/// the margins behind the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub theta_integral: f64,
    pub psi_integral: f64,
    pub pi_integral: f64,
    pub tol: f64,
}

/// Scale-aware default classification tolerance `1e-6 (1 + ||u||^2)`.
pub fn default_classification_tol(traj: &Trajectory) -> f64 {
    1e-6 * (1.0 + traj.input_energy())
}

/// Decide which branches of the mixed property the trajectory satisfies.
///
/// The infinite-horizon integrals are replaced by finite-horizon ones only
/// when the terminal state has decayed below [`DECAY_REL_TOL`] of its
/// peak; otherwise `TruncationUnsound` is returned. Integrals within
/// `-tol` count as satisfied (soft inequality), so the identically zero
/// trajectory classifies as `Both`.
pub fn classify_trajectory(
    traj: &Trajectory,
    spec: &SupplySpec,
    tol: f64,
) -> Result<Classification, SupplyError> {
    assert!(tol >= 0.0 && tol.is_finite());
    let ratio = traj.terminal_decay_ratio();
    if ratio > DECAY_REL_TOL {
        return Err(SupplyError::TruncationUnsound { terminal_ratio: ratio });
    }
    let theta_integral = quad_integral(traj, &spec.theta)?;
    let psi_integral = quad_integral(traj, &spec.psi())?;
    let pi_integral = quad_integral(traj, &spec.pi)?;
    let theta_ok = theta_integral >= -tol;
    let pipsi_ok = psi_integral >= -tol && pi_integral >= -tol;
    let verdict = match (theta_ok, pipsi_ok) {
        (true, true) => Verdict::Both,
        (true, false) => Verdict::Theta,
        (false, true) => Verdict::PiPsi,
        (false, false) => Verdict::Neither,
    };
    Ok(Classification { verdict, theta_integral, psi_integral, pi_integral, tol })
}
