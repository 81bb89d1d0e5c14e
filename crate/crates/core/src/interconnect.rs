//! Feedback-loop stability from a pair of mixed supply specifications.
//!
//! Two subsystems in negative feedback (`u1 = w1 - y2`, `u2 = y1 + w2`)
//! are certified stable when subsystem 1 is finite-gain mixed with shift
//! `epsilon1 <= 0`, subsystem 2 is mixed with `epsilon2 < 0`, and three
//! scalar matrix pencils are simultaneously negative definite for some
//! nonnegative multipliers `p1, p2, p3`:
//!
//! ```text
//! M' Theta1 M + p1 Pi2    < 0
//! M' Pi1    M + p2 Theta2 < 0
//! M' Theta1 M + p3 Theta2 < 0,   M = [[0, -1], [1, 0]].
//! ```
//!
//! Each pencil `A + p B` is negative definite exactly when its trace is
//! negative (linear in `p`) and its determinant positive (quadratic in
//! `p`), so the feasible multiplier set is computed in closed form; by
//! convexity of the negative-definite cone it is always a single
//! interval.
//!
//! An explicit closed-loop gain bound comes from a homotopy argument: a
//! gain `tau in [0, 1]` is placed after `y2`, and for each `tau` the
//! available supply inequalities are combined into
//! `0 <= <[y; w], [[Y, R], [R', S]] [y; w]>` with `Y(tau) < 0`. With
//! `eps = min_tau lambda_min(-Y)`, `r = max_tau ||R||`, and
//! `s = max_tau ||S||`, the per-branch bound is `gamma / eps` where
//! `gamma^2 = r^2 + 2 eps s`. A trajectory pair only guarantees one of
//! the two dissipation inequalities per subsystem, so all four
//! combinations (which-inequality x which-subsystem) are bounded and the
//! maximum is reported. The `Y/R/S` constants are evaluated on the `tau`
//! grid only; no claim is made between grid points.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mat::{spectral_norm_2x2, SymMat2};
use crate::supply::{is_finite_gain_mixed, psi, SupplySpec};

/// Points per decade sweep in the multiplier searches.
pub const MULTIPLIER_GRID_POINTS: usize = 30;
/// Smallest admissible homotopy grid (enforced, not defaulted).
pub const MIN_TAU_STEPS: usize = 11;
/// Cap on the halving safeguard for the `tau = 0` multiplier seeds.
const MAX_SEED_HALVINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Both subsystems use their gain-form inequality.
    ThetaTheta,
    /// Subsystem 1 gain-form, subsystem 2 passivity-form pair.
    ThetaOmega,
    /// Subsystem 1 passivity-form pair, subsystem 2 gain-form.
    OmegaTheta,
    /// Both subsystems use their passivity-form pair.
    OmegaOmega,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Branch::ThetaTheta => "theta-theta",
            Branch::ThetaOmega => "theta-omega",
            Branch::OmegaTheta => "omega-theta",
            Branch::OmegaOmega => "omega-omega",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InterconnectError {
    /// The stability hypotheses (shift signs, mixedness, pencil
    /// feasibility, valid witnesses) do not hold; no bound exists.
    HypothesesNotSatisfied,
    /// The bound construction failed at a homotopy grid point. Reported
    /// as-is; the bound is never extrapolated across a failed point.
    BranchInfeasible { tau: f64, branch: Branch },
}

impl fmt::Display for InterconnectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterconnectError::HypothesesNotSatisfied => {
                write!(f, "interconnection stability hypotheses are not satisfied")
            }
            InterconnectError::BranchInfeasible { tau, branch } => write!(
                f,
                "gain-bound construction infeasible at tau = {tau} on the {branch} branch"
            ),
        }
    }
}

impl std::error::Error for InterconnectError {}

/// Nonnegative multipliers `p` for which `A + p B` is negative definite.
///
/// The set is an open interval `(lo, hi)`; `hi` may be unbounded
/// (`f64::INFINITY`, serialized as `null`). When the constraint `p >= 0`
/// is what cuts the interval on the left, `lo = 0` itself is feasible
/// and `lo_attained` is set. Endpoints (other than an attained zero) are
/// boundary points where the pencil is singular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PencilInterval {
    pub lo: f64,
    #[serde(with = "unbounded_endpoint")]
    pub hi: f64,
    pub empty: bool,
    pub lo_attained: bool,
}

mod unbounded_endpoint {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl PencilInterval {
    fn empty_interval() -> Self {
        PencilInterval { lo: 0.0, hi: 0.0, empty: true, lo_attained: false }
    }

    /// Strict interior membership (an attained `lo = 0` counts).
    pub fn contains(&self, p: f64) -> bool {
        if self.empty {
            return false;
        }
        (p > self.lo || (self.lo_attained && p == self.lo)) && p < self.hi
    }

    /// Deterministic interior point: the midpoint, or `lo + max(1, lo)`
    /// when the interval is unbounded above.
    pub fn witness(&self) -> Option<f64> {
        if self.empty {
            None
        } else if self.hi.is_finite() {
            Some(0.5 * (self.lo + self.hi))
        } else {
            Some(self.lo + self.lo.max(1.0))
        }
    }
}

/// Real roots of `c2 p^2 + c1 p + c0 = 0` in ascending order, computed
/// with the cancellation-free quadratic formula. Caller guarantees
/// `c2 != 0` and a nonnegative discriminant.
fn quadratic_roots(c2: f64, c1: f64, c0: f64, disc: f64) -> (f64, f64) {
    if disc == 0.0 {
        let r = -c1 / (2.0 * c2);
        return (r, r);
    }
    let q = if c1 >= 0.0 {
        -0.5 * (c1 + disc.sqrt())
    } else {
        -0.5 * (c1 - disc.sqrt())
    };
    let (ra, rb) = if q != 0.0 { (q / c2, c0 / q) } else { (0.0, 0.0) };
    (ra.min(rb), ra.max(rb))
}

/// The set `{p >= 0 : A + p B < 0}`, solved in closed form.
///
/// Negative definiteness of a symmetric 2x2 pencil is `trace < 0` (linear
/// in `p`) and `det > 0` (quadratic in `p`, with `c2 = det B`,
/// `c1 = a11 b22 + a22 b11 - 2 a12 b12`, `c0 = det A`); the intersection
/// is a single interval because the negative-definite cone is convex and
/// the pencil is affine in `p`.
pub fn pencil_negdef_interval(a: SymMat2, b: SymMat2) -> PencilInterval {
    // Trace condition as an open interval of the real line.
    let (ta, tb) = (a.trace(), b.trace());
    let trace_set = if tb == 0.0 {
        if ta < 0.0 {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let cut = -ta / tb;
        Some(if tb > 0.0 {
            (f64::NEG_INFINITY, cut)
        } else {
            (cut, f64::INFINITY)
        })
    };
    let Some(trace_set) = trace_set else {
        return PencilInterval::empty_interval();
    };

    // Determinant condition as up to two open intervals.
    let c2 = b.det();
    let c1 = a.a11 * b.a22 + a.a22 * b.a11 - 2.0 * a.a12 * b.a12;
    let c0 = a.det();
    let mut det_sets: Vec<(f64, f64)> = Vec::with_capacity(2);
    if c2 == 0.0 {
        if c1 == 0.0 {
            if c0 > 0.0 {
                det_sets.push((f64::NEG_INFINITY, f64::INFINITY));
            }
        } else if c1 > 0.0 {
            det_sets.push((-c0 / c1, f64::INFINITY));
        } else {
            det_sets.push((f64::NEG_INFINITY, -c0 / c1));
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if c2 > 0.0 {
            if disc <= 0.0 {
                // Positive leading coefficient with no sign change: the
                // determinant is positive everywhere except possibly a
                // double root, which strictness excludes anyway.
                let (r1, r2) = if disc == 0.0 {
                    quadratic_roots(c2, c1, c0, 0.0)
                } else {
                    (f64::INFINITY, f64::NEG_INFINITY)
                };
                if disc == 0.0 {
                    det_sets.push((f64::NEG_INFINITY, r1));
                    det_sets.push((r2, f64::INFINITY));
                } else {
                    det_sets.push((f64::NEG_INFINITY, f64::INFINITY));
                }
            } else {
                let (r1, r2) = quadratic_roots(c2, c1, c0, disc);
                det_sets.push((f64::NEG_INFINITY, r1));
                det_sets.push((r2, f64::INFINITY));
            }
        } else if disc > 0.0 {
            let (r1, r2) = quadratic_roots(c2, c1, c0, disc);
            det_sets.push((r1, r2));
        }
    }

    // Intersect, clip to p >= 0, and keep the candidate whose interior
    // witness is actually negative definite (by convexity at most one
    // candidate survives).
    let mut result = PencilInterval::empty_interval();
    for (dlo, dhi) in det_sets {
        let lo_raw = trace_set.0.max(dlo);
        let hi = trace_set.1.min(dhi);
        if hi <= 0.0 || lo_raw >= hi {
            continue;
        }
        let (lo, lo_attained) = if lo_raw < 0.0 { (0.0, true) } else { (lo_raw, false) };
        let candidate = PencilInterval { lo, hi, empty: false, lo_attained };
        let w = candidate.witness().expect("nonempty candidate has a witness");
        if a.add_scaled(w, &b).is_negdef(0.0) {
            debug_assert!(result.empty, "negative-definite pencil set must be one interval");
            result = candidate;
        }
    }
    result
}

/// Outcome of the three hypothesis checks on the supply pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisChecks {
    pub epsilon1_nonpositive: bool,
    pub epsilon2_negative: bool,
    pub spec1_finite_gain_mixed: bool,
}

impl HypothesisChecks {
    pub fn all(&self) -> bool {
        self.epsilon1_nonpositive && self.epsilon2_negative && self.spec1_finite_gain_mixed
    }

    /// Names of the failed checks, for diagnostics.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.epsilon1_nonpositive {
            out.push("epsilon1 <= 0");
        }
        if !self.epsilon2_negative {
            out.push("epsilon2 < 0");
        }
        if !self.spec1_finite_gain_mixed {
            out.push("subsystem 1 finite-gain sign pattern");
        }
        out
    }
}

/// Stability verdict for the feedback pair: hypothesis checks, the three
/// multiplier intervals, midpoint witnesses, and the stable flag.
/// `gain_bound` is left `None` here and filled in by callers that also
/// run [`homotopy_gain_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterconnectionVerdict {
    pub hypotheses_ok: bool,
    pub checks: HypothesisChecks,
    /// Feasible multipliers for the three pencil conditions, in the
    /// order listed in the module documentation.
    pub intervals: [PencilInterval; 3],
    /// `(p1, p2, p3)` at the interval witnesses; `None` if any interval
    /// is empty.
    pub witnesses: Option<[f64; 3]>,
    pub stable: bool,
    pub gain_bound: Option<f64>,
}

/// Decide loop stability for the supply pair.
///
/// Well-posedness of the interconnection is the caller's responsibility
/// and is not (and cannot be) checked from the supply matrices alone.
pub fn check_theorem2(spec1: &SupplySpec, spec2: &SupplySpec) -> InterconnectionVerdict {
    let checks = HypothesisChecks {
        epsilon1_nonpositive: spec1.epsilon <= 0.0,
        epsilon2_negative: spec2.epsilon < 0.0,
        spec1_finite_gain_mixed: is_finite_gain_mixed(spec1),
    };
    let hypotheses_ok = checks.all();
    let intervals = [
        pencil_negdef_interval(spec1.theta.m_congruence(), spec2.pi),
        pencil_negdef_interval(spec1.pi.m_congruence(), spec2.theta),
        pencil_negdef_interval(spec1.theta.m_congruence(), spec2.theta),
    ];
    let witnesses = match (intervals[0].witness(), intervals[1].witness(), intervals[2].witness())
    {
        (Some(p1), Some(p2), Some(p3)) => Some([p1, p2, p3]),
        _ => None,
    };
    let stable = hypotheses_ok && witnesses.is_some();
    InterconnectionVerdict { hypotheses_ok, checks, intervals, witnesses, stable, gain_bound: None }
}

/// Largest `alpha` for which the piecewise-linear subsystem's supply pair
/// `Theta1 = [[alpha, delta/2], [delta/2, -1]]`, `Pi1 = diag(1, -1)`,
/// `epsilon1 = 0` passes [`check_theorem2`] against `spec2`, found by
/// bisection over `[0, 1]` to 1e-6.
pub fn alpha_threshold(delta: f64, spec2: &SupplySpec) -> f64 {
    assert!((0.0..1.0).contains(&delta), "delta must lie in [0, 1)");
    let feasible = |alpha: f64| {
        let spec1 = SupplySpec::new(
            SymMat2::new(alpha, delta / 2.0, -1.0),
            SymMat2::diag(1.0, -1.0),
            0.0,
        );
        check_theorem2(&spec1, spec2).stable
    };
    if !feasible(0.0) {
        return 0.0;
    }
    if feasible(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-branch constants of the homotopy bound. `margin`, `cross_norm`,
/// and `input_norm` are the extremal `Y/R/S` statistics over the grid;
/// `bound = sqrt(cross_norm^2 + 2 margin input_norm) / margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: Branch,
    pub margin: f64,
    pub cross_norm: f64,
    pub input_norm: f64,
    pub bound: f64,
    /// Multipliers chosen at each grid point. Meaning per branch:
    /// `[p3(tau), 0]`, `[p1(tau), 0]`, `[p2(tau), 0]`, or
    /// `[alpha2(tau), beta2(tau)]`.
    pub multipliers: Vec<[f64; 2]>,
    /// Passivity-passivity branch only: the constant `[alpha1, beta1]`
    /// multipliers of subsystem 1, fixed at their endpoint values.
    pub w1_multipliers: Option<[f64; 2]>,
    /// Passivity-passivity branch only: the ratio `alpha1 / alpha2` used
    /// by the endpoint construction.
    pub alpha_ratio: Option<f64>,
}

/// Homotopy gain-bound report: the grid, all four branch reports, and
/// the certified closed-loop bound (the maximum across branches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyGainBound {
    pub tau_grid: Vec<f64>,
    pub branches: Vec<BranchReport>,
    pub gamma_cl: f64,
}

/// Loop matrix `M_tau' W M_tau` for `M_tau = [[0, -tau], [1, 0]]`.
fn tau_congruence(w: &SymMat2, tau: f64) -> SymMat2 {
    SymMat2::new(w.a22, -tau * w.a12, tau * tau * w.a11)
}

/// `Y(tau)`: the `[y, y]` block of the combined supply inequality.
fn y_block(w1: &SymMat2, w2: &SymMat2, tau: f64) -> SymMat2 {
    tau_congruence(w1, tau).add_scaled(1.0, w2)
}

/// `R(tau)`: the `[y, w]` block (generally non-symmetric).
fn cross_block(w1: &SymMat2, w2: &SymMat2, tau: f64) -> [[f64; 2]; 2] {
    [[w1.a12, -tau * w1.a11], [w2.a11, w2.a12]]
}

/// `S`: the `[w, w]` block, `diag(w1_11, w2_11)` independent of `tau`.
fn input_block(w1: &SymMat2, w2: &SymMat2) -> [[f64; 2]; 2] {
    [[w1.a11, 0.0], [0.0, w2.a11]]
}

/// Ascending multiplier grid: `MULTIPLIER_GRID_POINTS` log-spaced values
/// over `[1e-3, 1e3]`.
fn multiplier_grid() -> Vec<f64> {
    let n = MULTIPLIER_GRID_POINTS;
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Seed multiplier for `tau = 0`: start from the witness-derived guess
/// and halve until the `tau = 0` block is strictly negative definite.
fn tau0_seed(
    w1: &SymMat2,
    b: &SymMat2,
    p_witness: f64,
    branch: Branch,
) -> Result<f64, InterconnectError> {
    let mut seed = if b.a11 > 0.0 {
        p_witness.min(-w1.a22 / (2.0 * b.a11)) / 2.0
    } else {
        p_witness / 2.0
    };
    for _ in 0..MAX_SEED_HALVINGS {
        if y_block(w1, &b.scale(seed), 0.0).is_negdef(0.0) {
            return Ok(seed);
        }
        seed *= 0.5;
    }
    Err(InterconnectError::BranchInfeasible { tau: 0.0, branch })
}

/// Accumulates the extremal branch statistics over the grid.
struct BranchAccum {
    branch: Branch,
    margin: f64,
    cross: f64,
    input: f64,
    multipliers: Vec<[f64; 2]>,
    w1_multipliers: Option<[f64; 2]>,
    alpha_ratio: Option<f64>,
}

impl BranchAccum {
    fn new(branch: Branch, capacity: usize) -> Self {
        BranchAccum {
            branch,
            margin: f64::INFINITY,
            cross: 0.0,
            input: 0.0,
            multipliers: Vec::with_capacity(capacity),
            w1_multipliers: None,
            alpha_ratio: None,
        }
    }

    /// Fold one grid point in; fails if the combined `Y` block is not
    /// strictly negative definite.
    fn push(
        &mut self,
        w1: &SymMat2,
        w2: &SymMat2,
        tau: f64,
        mult: [f64; 2],
    ) -> Result<(), InterconnectError> {
        let y = y_block(w1, w2, tau);
        let margin = -y.lambda_max();
        if margin <= 0.0 {
            return Err(InterconnectError::BranchInfeasible { tau, branch: self.branch });
        }
        self.margin = self.margin.min(margin);
        self.cross = self.cross.max(spectral_norm_2x2(cross_block(w1, w2, tau)));
        self.input = self.input.max(spectral_norm_2x2(input_block(w1, w2)));
        self.multipliers.push(mult);
        Ok(())
    }

    fn finish(self) -> BranchReport {
        let gamma2 = self.cross * self.cross + 2.0 * self.margin * self.input;
        BranchReport {
            branch: self.branch,
            margin: self.margin,
            cross_norm: self.cross,
            input_norm: self.input,
            bound: gamma2.sqrt() / self.margin,
            multipliers: self.multipliers,
            w1_multipliers: self.w1_multipliers,
            alpha_ratio: self.alpha_ratio,
        }
    }
}

/// Branches where subsystem 1 contributes a fixed supply `w1` and
/// subsystem 2 contributes `p(tau) * b`. The straight-line path
/// `(1 - tau) seed + tau p_witness` from the halved seed to the pencil
/// witness is guaranteed to keep the block definite (convexity plus the
/// `tau^2 <= tau` domination). With `sweep` set, every grid value
/// competes with the line value and the candidate with the largest
/// definiteness margin wins: a first-feasible choice can land
/// arbitrarily close to the boundary and ruin the branch bound, whose
/// denominator is the worst margin over the grid.
fn scaled_branch(
    branch: Branch,
    w1: &SymMat2,
    b: &SymMat2,
    p_witness: f64,
    tau_grid: &[f64],
    grid: &[f64],
    sweep: bool,
) -> Result<BranchReport, InterconnectError> {
    let seed = tau0_seed(w1, b, p_witness, branch)?;
    let mut acc = BranchAccum::new(branch, tau_grid.len());
    for &tau in tau_grid {
        let line = (1.0 - tau) * seed + tau * p_witness;
        let mut chosen = line;
        if sweep {
            let mut best = -y_block(w1, &b.scale(line), tau).lambda_max();
            for &p in grid {
                let margin = -y_block(w1, &b.scale(p), tau).lambda_max();
                if margin > best {
                    best = margin;
                    chosen = p;
                }
            }
        }
        acc.push(w1, &b.scale(chosen), tau, [chosen, 0.0])?;
    }
    Ok(acc.finish())
}

/// Explicit closed-loop gain bound via the four-branch homotopy
/// construction. `witnesses` are the `(p1, p2, p3)` pencil multipliers
/// (typically [`InterconnectionVerdict::witnesses`]).
pub fn homotopy_gain_bound(
    spec1: &SupplySpec,
    spec2: &SupplySpec,
    witnesses: [f64; 3],
    tau_steps: usize,
) -> Result<HomotopyGainBound, InterconnectError> {
    assert!(tau_steps >= MIN_TAU_STEPS, "need at least {MIN_TAU_STEPS} homotopy steps");
    let verdict = check_theorem2(spec1, spec2);
    if !verdict.stable {
        return Err(InterconnectError::HypothesesNotSatisfied);
    }
    // The witnesses must actually certify their pencils; garbage in the
    // hypotheses' clothing is rejected rather than propagated.
    let [p1, p2, p3] = witnesses;
    let pencil_ok = [
        (spec1.theta.m_congruence(), spec2.pi, p1),
        (spec1.pi.m_congruence(), spec2.theta, p2),
        (spec1.theta.m_congruence(), spec2.theta, p3),
    ]
    .iter()
    .all(|(a, b, p)| *p >= 0.0 && a.add_scaled(*p, b).is_negdef(0.0));
    if !pencil_ok {
        return Err(InterconnectError::HypothesesNotSatisfied);
    }

    let tau_grid: Vec<f64> =
        (0..tau_steps).map(|i| i as f64 / (tau_steps - 1) as f64).collect();
    let grid = multiplier_grid();

    let theta_theta = scaled_branch(
        Branch::ThetaTheta,
        &spec1.theta,
        &spec2.theta,
        p3,
        &tau_grid,
        &grid,
        false,
    )?;
    let theta_omega =
        scaled_branch(Branch::ThetaOmega, &spec1.theta, &spec2.pi, p1, &tau_grid, &grid, true)?;
    let omega_theta =
        scaled_branch(Branch::OmegaTheta, &spec1.pi, &spec2.theta, p2, &tau_grid, &grid, true)?;

    // Passivity-passivity branch. Subsystem 1 contributes
    // `alpha1 Pi1 + beta1 Psi_0` (its shift being <= 0 implies the
    // unshifted passivity inequality), subsystem 2 contributes
    // `alpha2 Pi2 + beta2 Psi_eps2`. Endpoint construction: `k` is the
    // largest grid value with `k Pi1_11 + Pi2_22 < 0`; the loop-closed
    // block at the far endpoint is made definite by the first
    // lexicographic pair under the ties `alpha1 = k alpha2`,
    // `beta1 = beta2`. Subsystem 1's multipliers then stay fixed at
    // those endpoint values for every tau (only then does the
    // convex-combination argument go through), while subsystem 2's pair
    // is re-searched per grid point with the straight line from the
    // halved seed as the guaranteed fallback.
    let k = grid
        .iter()
        .rev()
        .copied()
        .find(|k| k * spec1.pi.a11 + spec2.pi.a22 < 0.0)
        .ok_or(InterconnectError::BranchInfeasible { tau: 1.0, branch: Branch::OmegaOmega })?;
    let psi0 = psi(0.0);
    let psi2 = psi(spec2.epsilon);
    let mut endpoint = None;
    'endpoint: for &alpha2 in &grid {
        for &beta in &grid {
            let w1 = spec1.pi.scale(k * alpha2).add_scaled(beta, &psi0);
            let w2 = spec2.pi.scale(alpha2).add_scaled(beta, &psi2);
            if y_block(&w1, &w2, 1.0).is_negdef(0.0) {
                endpoint = Some((alpha2, beta));
                break 'endpoint;
            }
        }
    }
    let Some((alpha2_end, beta_end)) = endpoint else {
        return Err(InterconnectError::BranchInfeasible { tau: 1.0, branch: Branch::OmegaOmega });
    };
    let w1_fixed = spec1.pi.scale(k * alpha2_end).add_scaled(beta_end, &psi0);
    // tau = 0 seed for subsystem 2: equal small multipliers, halved until
    // the block is definite (possible because `w1_fixed` has a strictly
    // negative output entry).
    let mut seed = 0.5 * alpha2_end.min(beta_end);
    let mut seed_ok = false;
    for _ in 0..MAX_SEED_HALVINGS {
        let w2 = spec2.pi.scale(seed).add_scaled(seed, &psi2);
        if y_block(&w1_fixed, &w2, 0.0).is_negdef(0.0) {
            seed_ok = true;
            break;
        }
        seed *= 0.5;
    }
    if !seed_ok {
        return Err(InterconnectError::BranchInfeasible { tau: 0.0, branch: Branch::OmegaOmega });
    }
    let mut omega_omega = BranchAccum::new(Branch::OmegaOmega, tau_grid.len());
    omega_omega.alpha_ratio = Some(k);
    omega_omega.w1_multipliers = Some([k * alpha2_end, beta_end]);
    for &tau in &tau_grid {
        let mut found = None;
        'search: for &alpha2 in &grid {
            for &beta2 in &grid {
                let w2 = spec2.pi.scale(alpha2).add_scaled(beta2, &psi2);
                if y_block(&w1_fixed, &w2, tau).is_negdef(0.0) {
                    found = Some((alpha2, beta2));
                    break 'search;
                }
            }
        }
        let (alpha2, beta2) = found.unwrap_or((
            (1.0 - tau) * seed + tau * alpha2_end,
            (1.0 - tau) * seed + tau * beta_end,
        ));
        let w2 = spec2.pi.scale(alpha2).add_scaled(beta2, &psi2);
        omega_omega.push(&w1_fixed, &w2, tau, [alpha2, beta2])?;
    }
    let omega_omega = omega_omega.finish();

    let branches = vec![theta_theta, theta_omega, omega_theta, omega_omega];
    let gamma_cl = branches.iter().map(|b| b.bound).fold(0.0, f64::max);
    Ok(HomotopyGainBound { tau_grid, branches, gamma_cl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Supply pair of the saturating-slope subsystem:
    /// `Theta = [[alpha, delta/2], [delta/2, -1]]`, `Pi = diag(1, -1)`.
    fn pwl_supply(alpha: f64, delta: f64) -> SupplySpec {
        SupplySpec::new(
            SymMat2::new(alpha, delta / 2.0, -1.0),
            SymMat2::diag(1.0, -1.0),
            0.0,
        )
    }

    /// Supply extracted for the demo plant: `mu = 0.7`, `gamma = 1.51`,
    /// small negative shift.
    fn lti_supply() -> SupplySpec {
        SupplySpec::new(
            SymMat2::diag(0.49, -1.0),
            SymMat2::diag(2.2801, -1.0),
            -0.001,
        )
    }

    // Roots of 2.2801 p^2 - 1.68403 p + 0.300625 = 0 (the determinant
    // condition of the first pencil at alpha = 0.3, delta = 0.05),
    // quadratic formula, frozen.
    const PENCIL_A_LO: f64 = 0.3020071061364871;
    const PENCIL_A_HI: f64 = 0.4365701492470487;
    // 1 / 2.2801, the gain-condition cap on the multiplier.
    const INV_GAMMA2_SQ: f64 = 0.4385772553835358;

    #[test]
    fn pencil_interval_demo_pair() {
        let s1 = pwl_supply(0.3, 0.05);
        let s2 = lti_supply();
        let iv = pencil_negdef_interval(s1.theta.m_congruence(), s2.pi);
        assert!(!iv.empty && !iv.lo_attained);
        assert!((iv.lo - PENCIL_A_LO).abs() < 1e-12, "lo = {}", iv.lo);
        assert!((iv.hi - PENCIL_A_HI).abs() < 1e-12, "hi = {}", iv.hi);
        // Endpoints are boundary points: the pencil is singular there.
        for p in [iv.lo, iv.hi] {
            let edge = s1.theta.m_congruence().add_scaled(p, &s2.pi);
            assert!(edge.lambda_max().abs() < 1e-9);
        }
    }

    #[test]
    fn pencil_interval_diagonal_case() {
        let iv =
            pencil_negdef_interval(pwl_supply(0.3, 0.0).theta.m_congruence(), lti_supply().pi);
        assert!((iv.lo - 0.3).abs() < 1e-12);
        assert!((iv.hi - INV_GAMMA2_SQ).abs() < 1e-12);

        let empty =
            pencil_negdef_interval(pwl_supply(0.5, 0.0).theta.m_congruence(), lti_supply().pi);
        assert!(empty.empty);
    }

    #[test]
    fn pencil_interval_constant_and_unbounded() {
        let iv = pencil_negdef_interval(SymMat2::diag(-1.0, -1.0), SymMat2::zero());
        assert!(!iv.empty);
        assert_eq!(iv.lo, 0.0);
        assert!(iv.lo_attained);
        assert_eq!(iv.hi, f64::INFINITY);
        assert!(iv.contains(0.0) && iv.contains(1e9));
        assert_eq!(iv.witness(), Some(1.0));
    }

    #[test]
    fn interval_serde_roundtrip_with_unbounded_end() {
        let iv = pencil_negdef_interval(SymMat2::diag(-1.0, -1.0), SymMat2::zero());
        let json = serde_json::to_string(&iv).unwrap();
        assert!(json.contains("\"hi\":null"), "unbounded end serializes as null: {json}");
        let back: PencilInterval = serde_json::from_str(&json).unwrap();
        assert_eq!(back, iv);
    }

    #[test]
    fn verdict_demo_pair_is_stable() {
        let v = check_theorem2(&pwl_supply(0.3, 0.05), &lti_supply());
        assert!(v.hypotheses_ok && v.stable);
        let w = v.witnesses.unwrap();
        for (iv, p) in v.intervals.iter().zip(w) {
            assert!(iv.contains(p), "witness {p} outside its interval");
        }
    }

    #[test]
    fn verdict_fails_past_slope_threshold() {
        let v = check_theorem2(&pwl_supply(0.5, 0.05), &lti_supply());
        assert!(v.hypotheses_ok);
        assert!(!v.stable);
        assert!(v.intervals[0].empty, "the gain/passivity pencil is the binding one");
        assert!(v.witnesses.is_none());
    }

    #[test]
    fn verdict_gates_on_shift_signs() {
        let mut s2 = lti_supply();
        s2.epsilon = 0.0;
        let v = check_theorem2(&pwl_supply(0.3, 0.05), &s2);
        assert!(!v.checks.epsilon2_negative);
        assert!(!v.stable, "nonnegative epsilon2 must veto stability");
        assert_eq!(v.checks.failures(), vec!["epsilon2 < 0"]);
    }

    #[test]
    fn threshold_matches_closed_form() {
        let t0 = alpha_threshold(0.0, &lti_supply());
        assert!((t0 - INV_GAMMA2_SQ).abs() < 1e-4, "t0 = {t0}");
        let t05 = alpha_threshold(0.05, &lti_supply());
        let t10 = alpha_threshold(0.1, &lti_supply());
        assert!(t05 < t0 && t10 < t05, "threshold must shrink as delta grows");
    }

    #[test]
    fn threshold_with_unit_gain_partner() {
        let s2 = SupplySpec::new(
            SymMat2::diag(0.49, -1.0),
            SymMat2::diag(1.0, -1.0),
            -0.001,
        );
        let t = alpha_threshold(0.0, &s2);
        assert!(t > 0.9999 && t < 1.0, "t = {t}");
    }

    #[test]
    fn homotopy_bound_demo_pair() {
        let s1 = pwl_supply(0.3, 0.05);
        let s2 = lti_supply();
        let v = check_theorem2(&s1, &s2);
        let hb = homotopy_gain_bound(&s1, &s2, v.witnesses.unwrap(), 101).unwrap();
        assert_eq!(hb.tau_grid.len(), 101);
        assert_eq!(hb.branches.len(), 4);
        assert!(hb.gamma_cl.is_finite() && hb.gamma_cl > 0.0);
        for b in &hb.branches {
            assert!(b.margin > 0.0, "{} margin must be positive", b.branch);
            assert!(b.bound > 0.0 && b.bound.is_finite());
            assert_eq!(b.multipliers.len(), 101);
        }
        assert_eq!(
            hb.gamma_cl,
            hb.branches.iter().map(|b| b.bound).fold(0.0, f64::max)
        );
    }

    #[test]
    fn homotopy_branch_reassembly_meets_half_margin() {
        let s1 = pwl_supply(0.3, 0.05);
        let s2 = lti_supply();
        let v = check_theorem2(&s1, &s2);
        let hb = homotopy_gain_bound(&s1, &s2, v.witnesses.unwrap(), 101).unwrap();
        for b in &hb.branches {
            for (&tau, m) in hb.tau_grid.iter().zip(&b.multipliers) {
                let (w1, w2) = match b.branch {
                    Branch::ThetaTheta => (s1.theta, s2.theta.scale(m[0])),
                    Branch::ThetaOmega => (s1.theta, s2.pi.scale(m[0])),
                    Branch::OmegaTheta => (s1.pi, s2.theta.scale(m[0])),
                    Branch::OmegaOmega => {
                        let [a1, b1] = b.w1_multipliers.unwrap();
                        (
                            s1.pi.scale(a1).add_scaled(b1, &psi(0.0)),
                            s2.pi.scale(m[0]).add_scaled(m[1], &psi(s2.epsilon)),
                        )
                    }
                };
                assert!(
                    y_block(&w1, &w2, tau).is_negdef(b.margin / 2.0),
                    "{} fails re-verification at tau = {tau}",
                    b.branch
                );
            }
        }
    }

    #[test]
    fn homotopy_gain_branch_seed_keeps_tau0_definite() {
        let s1 = pwl_supply(0.3, 0.05);
        let s2 = lti_supply();
        let v = check_theorem2(&s1, &s2);
        let hb = homotopy_gain_bound(&s1, &s2, v.witnesses.unwrap(), 101).unwrap();
        let tt = &hb.branches[0];
        assert_eq!(tt.branch, Branch::ThetaTheta);
        let p_tau0 = tt.multipliers[0][0];
        assert!(y_block(&s1.theta, &s2.theta.scale(p_tau0), 0.0).is_negdef(0.0));
    }

    #[test]
    fn homotopy_passivity_branch_multiplier_trace() {
        let s1 = pwl_supply(0.3, 0.05);
        let s2 = lti_supply();
        let v = check_theorem2(&s1, &s2);
        let hb = homotopy_gain_bound(&s1, &s2, v.witnesses.unwrap(), 101).unwrap();
        let oo = &hb.branches[3];
        assert_eq!(oo.branch, Branch::OmegaOmega);
        // Largest log-grid ratio below 1 / Pi1_11 = 1: the 15th ascending
        // point of the 30-point grid over [1e-3, 1e3].
        let expected_k = 10f64.powf(-3.0 + 6.0 * 14.0 / 29.0);
        let k = oo.alpha_ratio.unwrap();
        assert!((k - expected_k).abs() < 1e-12, "k = {k}");
        // Subsystem 1's multipliers are frozen at the endpoint values.
        let [a1, b1] = oo.w1_multipliers.unwrap();
        assert!((a1 - k * 1e-3).abs() < 1e-12, "alpha1 = {a1}");
        assert!((b1 - expected_k).abs() < 1e-12, "beta1 = {b1}");
        // At tau = 1 the first lexicographic feasible pair is the smallest
        // alpha2 with beta just above the off-diagonal cancellation point
        // (numerically the same grid value as k here).
        let last = oo.multipliers.last().unwrap();
        assert!((last[0] - 1e-3).abs() < 1e-12, "alpha2 = {}", last[0]);
        assert!((last[1] - expected_k).abs() < 1e-12, "beta = {}", last[1]);
        // The branch margin sits at the scale of the chosen multipliers.
        assert!(oo.margin > 1e-6 && oo.margin < 1e-3, "margin = {}", oo.margin);
    }

    #[test]
    fn homotopy_rejects_bad_hypotheses_and_witnesses() {
        let s1 = pwl_supply(0.3, 0.05);
        let mut s2 = lti_supply();
        s2.epsilon = 0.0;
        assert_eq!(
            homotopy_gain_bound(&s1, &s2, [0.37, 1.4, 1.2], 101),
            Err(InterconnectError::HypothesesNotSatisfied)
        );
        // Stable pair, but witnesses outside the intervals.
        let s2 = lti_supply();
        assert_eq!(
            homotopy_gain_bound(&s1, &s2, [10.0, 10.0, 10.0], 101),
            Err(InterconnectError::HypothesesNotSatisfied)
        );
    }

    #[test]
    fn bound_report_serde_roundtrip() {
        let s1 = pwl_supply(0.3, 0.05);
        let s2 = lti_supply();
        let v = check_theorem2(&s1, &s2);
        let hb = homotopy_gain_bound(&s1, &s2, v.witnesses.unwrap(), 11).unwrap();
        let json = serde_json::to_string(&hb).unwrap();
        let back: HomotopyGainBound = serde_json::from_str(&json).unwrap();
        assert_eq!(back, hb);
    }

    prop_compose! {
        fn arb_sym2()(a11 in -3.0..3.0_f64, a12 in -3.0..3.0_f64, a22 in -3.0..3.0_f64) -> SymMat2 {
            SymMat2::new(a11, a12, a22)
        }
    }

    proptest! {
        // Closed-form intervals agree with pointwise definiteness tests
        // away from the endpoints.
        #[test]
        fn pencil_interval_matches_pointwise(a in arb_sym2(), b in arb_sym2()) {
            let iv = pencil_negdef_interval(a, b);
            for i in 0..400 {
                // Log-spaced probe covering well past typical endpoints.
                let p = 1e-4 * 10f64.powf(8.0 * i as f64 / 399.0);
                let boundary_zone = 1e-9 * (1.0 + p.abs());
                if !iv.empty
                    && ((p - iv.lo).abs() < boundary_zone
                        || (iv.hi.is_finite() && (p - iv.hi).abs() < boundary_zone))
                {
                    continue;
                }
                let direct = a.add_scaled(p, &b).is_negdef(0.0);
                prop_assert_eq!(
                    direct,
                    iv.contains(p),
                    "disagreement at p = {} for interval {:?}",
                    p,
                    iv
                );
            }
            // p = 0 membership must match the attained flag.
            if !iv.empty {
                prop_assert_eq!(a.is_negdef(0.0), iv.contains(0.0));
            }
        }
    }
}
