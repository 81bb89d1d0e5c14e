//! Linear time-invariant SISO plants and frequency-band calculations.
//!
//! A plant is the usual state-space quadruple (A, B, C, D) with transfer
//! function `G(s) = C (sI - A)^{-1} B + D`. The band calculations bound
//! `sup |G(jw)|` and `inf Re G(jw)` over low bands `[0, wbar]`, high bands
//! `[wbar, inf)` and the full axis. Unbounded bands are handled by gridding
//! a finite interior `[lo, w_hi]` and bounding the tail analytically: for
//! `w > ||A||_2` the resolvent satisfies `||(jwI - A)^{-1}||_2 <= 1/(w - ||A||_2)`,
//! so every tail value of `G` lies in a disc of radius
//! `||C|| ||B|| / (w_hi - ||A||_2)` around `D`. The interior search is a
//! 2048-point logarithmic grid followed by golden-section refinement of the
//! best local extrema; `w_hi` is doubled until the tail cannot beat the
//! interior extremum.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::mat::{spectral_norm, DMat, SymMat2};

/// Real parts must be below `-HURWITZ_MARGIN` for a matrix to count as
/// Hurwitz; this keeps marginally stable systems out of certification.
pub const HURWITZ_MARGIN: f64 = 1e-9;

const GRID_POINTS: usize = 2048;
const REFINE_CANDIDATES: usize = 8;
const REFINE_REL_TOL: f64 = 1e-9;
const MAX_TAIL_DOUBLINGS: usize = 48;
const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum LtiError {
    /// `jwI - A` was numerically singular at this frequency (a pole on or
    /// extremely close to the imaginary axis).
    SingularResolvent { omega: f64 },
    /// A certification operation needed a Hurwitz `A` and did not get one.
    NotHurwitz,
}

impl fmt::Display for LtiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LtiError::SingularResolvent { omega } => {
                write!(f, "resolvent (jwI - A) is singular at w = {omega}")
            }
            LtiError::NotHurwitz => write!(f, "state matrix A is not Hurwitz"),
        }
    }
}

impl std::error::Error for LtiError {}

/// State-space SISO plant. `n = 0` is allowed and models a pure gain `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub a: DMat,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn new(a: DMat, b: Vec<f64>, c: Vec<f64>, d: f64) -> Self {
        assert_eq!(a.rows(), a.cols(), "A must be square");
        assert_eq!(b.len(), a.rows(), "B must have n entries");
        assert_eq!(c.len(), a.rows(), "C must have n entries");
        assert!(d.is_finite());
        StateSpace { a, b, c, d }
    }

    /// Pure gain `G(s) = d` with empty state.
    pub fn pure_gain(d: f64) -> Self {
        StateSpace::new(DMat::zeros(0, 0), Vec::new(), Vec::new(), d)
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }
}

/// Frequency band for band-restricted properties. `omega_bar` must be
/// positive for the bounded variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreqBand {
    Low { omega_bar: f64 },
    High { omega_bar: f64 },
    Full,
}

impl FreqBand {
    pub fn low(omega_bar: f64) -> Self {
        assert!(omega_bar > 0.0 && omega_bar.is_finite());
        FreqBand::Low { omega_bar }
    }

    pub fn high(omega_bar: f64) -> Self {
        assert!(omega_bar > 0.0 && omega_bar.is_finite());
        FreqBand::High { omega_bar }
    }

    pub fn omega_bar(&self) -> Option<f64> {
        match self {
            FreqBand::Low { omega_bar } | FreqBand::High { omega_bar } => Some(*omega_bar),
            FreqBand::Full => None,
        }
    }
}

/// Monic characteristic polynomial coefficients `[1, c1, ..., cn]` of a
/// square matrix, by the Faddeev-LeVerrier recurrence.
fn char_poly(a: &DMat) -> Vec<f64> {
    let n = a.rows();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut m = DMat::zeros(n, n);
    for k in 1..=n {
        // M_k = A (M_{k-1} + c_{k-1} I)
        let shifted = m.add_scaled(coeffs[k - 1], &DMat::identity(n));
        m = a.matmul(&shifted);
        coeffs.push(-m.trace() / k as f64);
    }
    coeffs
}

/// All roots of a monic real polynomial by Durand-Kerner iteration.
/// Intended for low degrees (<= 4) where it converges quickly and reliably.
fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(coeffs[0], 0.0);
        for c in &coeffs[1..] {
            acc = acc * z + Complex64::new(*c, 0.0);
        }
        acc
    };
    // Standard non-real starting points spread around a circle sized by the
    // coefficient magnitudes.
    let radius = 1.0
        + coeffs[1..]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| seed.powu(k as u32 + 1) / seed.norm().powi(k as i32 + 1) * radius)
        .collect();
    for _ in 0..500 {
        let mut worst: f64 = 0.0;
        let prev = z.clone();
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= prev[i] - prev[j];
                }
            }
            if denom.norm() == 0.0 {
                // Collided iterates; nudge and continue.
                z[i] += Complex64::new(1e-6, 1e-6);
                worst = f64::INFINITY;
                continue;
            }
            let step = eval(prev[i]) / denom;
            z[i] = prev[i] - step;
            worst = worst.max(step.norm());
        }
        if worst < 1e-13 * radius {
            break;
        }
    }
    z
}

/// Routh-Hurwitz sign test: true iff all roots of the monic polynomial have
/// strictly negative real part. Degenerate tables (zero pivots) report
/// false, which is the conservative answer for a strict test.
fn routh_strictly_hurwitz(coeffs: &[f64]) -> bool {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return true;
    }
    // All coefficients of a Hurwitz polynomial are positive (necessary).
    if coeffs.iter().any(|&c| c <= 0.0) {
        return false;
    }
    let mut row0: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
    let mut row1: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
    row1.resize(row0.len(), 0.0);
    for _ in 0..deg.saturating_sub(1) {
        let pivot = row1[0];
        if pivot.abs() < 1e-300 {
            return false;
        }
        let mut next = Vec::with_capacity(row0.len());
        for i in 0..row0.len() - 1 {
            next.push((pivot * row0[i + 1] - row0[0] * row1[i + 1]) / pivot);
        }
        next.push(0.0);
        if next[0] <= 0.0 {
            return false;
        }
        row0 = std::mem::take(&mut row1);
        row1 = next;
    }
    true
}

/// True iff every eigenvalue of `A` has real part `< -1e-9`.
///
/// For n <= 4 the eigenvalues come from the characteristic polynomial's
/// roots; for larger n a Routh-Hurwitz sign table on the margin-shifted
/// matrix `A + 1e-9 I` decides without computing eigenvalues.
pub fn is_hurwitz(sys: &StateSpace) -> bool {
    let n = sys.n();
    if n == 0 {
        return true;
    }
    if n <= 4 {
        let roots = poly_roots(&char_poly(&sys.a));
        roots.iter().all(|r| r.re < -HURWITZ_MARGIN)
    } else {
        let shifted = sys.a.add_scaled(HURWITZ_MARGIN, &DMat::identity(n));
        routh_strictly_hurwitz(&char_poly(&shifted))
    }
}

/// `G(jw)` by complex Gaussian elimination with partial pivoting on
/// `(jwI - A) x = B`, then `G = C x + D`.
pub fn freq_response(sys: &StateSpace, omega: f64) -> Result<Complex64, LtiError> {
    assert!(omega.is_finite(), "frequency must be finite");
    let n = sys.n();
    if n == 0 {
        return Ok(Complex64::new(sys.d, 0.0));
    }
    // Augmented system [jwI - A | B].
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    let mut rhs: Vec<Complex64> = sys.b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = Complex64::new(-sys.a.get(i, j), if i == j { omega } else { 0.0 });
        }
    }
    let scale = 1.0 + omega.abs() + sys.a.frobenius();
    for col in 0..n {
        // Partial pivot: largest magnitude in this column.
        let mut pivot_row = col;
        let mut pivot_mag = m[col * n + col].norm();
        for row in (col + 1)..n {
            let mag = m[row * n + col].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag < PIVOT_TOL * scale {
            return Err(LtiError::SingularResolvent { omega });
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[col * n + col];
        for row in (col + 1)..n {
            let factor = m[row * n + col] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let sub = factor * m[col * n + j];
                m[row * n + j] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[row] -= sub;
        }
    }
    // Back substitution.
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in (row + 1)..n {
            acc -= m[row * n + j] * x[j];
        }
        x[row] = acc / m[row * n + row];
    }
    let mut g = Complex64::new(sys.d, 0.0);
    for i in 0..n {
        g += sys.c[i] * x[i];
    }
    Ok(g)
}

/// Scalar objective evaluated on `G(jw)` over a band. All searches are run
/// as maximizations of `score`; minimizing objectives negate.
#[derive(Debug, Clone, Copy)]
pub(crate) enum BandObjective {
    /// Maximize `|G|`.
    SupGain,
    /// Minimize `Re G`.
    InfReal,
    /// Minimize the frequency-domain supply value
    /// `[1, G]^* Theta [1, G] = t11 + 2 t12 Re G + t22 |G|^2`.
    InfQuad(SymMat2),
}

impl BandObjective {
    fn value(&self, g: Complex64) -> f64 {
        match self {
            BandObjective::SupGain => g.norm(),
            BandObjective::InfReal => g.re,
            BandObjective::InfQuad(t) => {
                t.a11 + 2.0 * t.a12 * g.re + t.a22 * g.norm_sqr()
            }
        }
    }

    fn score_sign(&self) -> f64 {
        match self {
            BandObjective::SupGain => 1.0,
            BandObjective::InfReal | BandObjective::InfQuad(_) => -1.0,
        }
    }

    /// Best possible objective score over the tail disc `|g - d| <= rho`
    /// (an upper bound for maximizations of the underlying value, a lower
    /// bound for minimizations, both expressed in score space).
    fn tail_score(&self, d: f64, rho: f64) -> f64 {
        match self {
            BandObjective::SupGain => d.abs() + rho,
            BandObjective::InfReal => -(d - rho),
            BandObjective::InfQuad(t) => {
                let lo_mag = (d.abs() - rho).max(0.0);
                let hi_mag = d.abs() + rho;
                let quad_lo = t.a11 + 2.0 * t.a12 * d - 2.0 * t.a12.abs() * rho
                    + if t.a22 >= 0.0 {
                        t.a22 * lo_mag * lo_mag
                    } else {
                        t.a22 * hi_mag * hi_mag
                    };
                -quad_lo
            }
        }
    }
}

pub(crate) struct BandExtremum {
    pub value: f64,
    pub omega: f64,
}

/// Logarithmic grid of `count` points on `[lo, hi]`, `lo > 0`.
fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Golden-section search maximizing `f` on `[a, b]` down to a relative
/// bracket width of `REFINE_REL_TOL`.
fn golden_max(mut a: f64, mut b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let tol = REFINE_REL_TOL * b.abs().max(1e-12);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid + golden-section search maximizing `score(w)` over the finite
/// interval spanned by `omegas` (which must be sorted ascending).
fn search_finite(
    omegas: &[f64],
    score: &mut impl FnMut(f64) -> Result<f64, LtiError>,
) -> Result<BandExtremum, LtiError> {
    let mut vals = Vec::with_capacity(omegas.len());
    for &w in omegas {
        vals.push(score(w)?);
    }
    // Candidate brackets: local maxima of the sampled score (including the
    // endpoints), best first.
    let mut candidates: Vec<usize> = (0..omegas.len())
        .filter(|&i| {
            let left_ok = i == 0 || vals[i] >= vals[i - 1];
            let right_ok = i + 1 == omegas.len() || vals[i] >= vals[i + 1];
            left_ok && right_ok
        })
        .collect();
    candidates.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    candidates.truncate(REFINE_CANDIDATES);

    let mut best_val = f64::NEG_INFINITY;
    let mut best_w = omegas[0];
    for (i, &v) in vals.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best_w = omegas[i];
        }
    }
    let mut err: Option<LtiError> = None;
    for &i in &candidates {
        let a = omegas[i.saturating_sub(1)];
        let b = omegas[(i + 1).min(omegas.len() - 1)];
        if b <= a {
            continue;
        }
        let mut f = |w: f64| match score(w) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        };
        let (w, v) = golden_max(a, b, &mut f);
        if v > best_val {
            best_val = v;
            best_w = w;
        }
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(BandExtremum { value: best_val, omega: best_w })
}

/// Extremize `objective` over the band. Returns the extremal value in the
/// objective's natural orientation (max for gain, min for the others).
pub(crate) fn band_extremum(
    sys: &StateSpace,
    band: &FreqBand,
    objective: BandObjective,
) -> Result<BandExtremum, LtiError> {
    let sign = objective.score_sign();
    if sys.n() == 0 {
        let g = Complex64::new(sys.d, 0.0);
        return Ok(BandExtremum {
            value: objective.value(g),
            omega: band.omega_bar().map(|w| if matches!(band, FreqBand::High { .. }) { w } else { 0.0 }).unwrap_or(0.0),
        });
    }
    let mut score = |w: f64| -> Result<f64, LtiError> {
        Ok(sign * objective.value(freq_response(sys, w)?))
    };

    match band {
        FreqBand::Low { omega_bar } => {
            let mut omegas = vec![0.0];
            omegas.extend(log_grid(omega_bar * 1e-8, *omega_bar, GRID_POINTS - 1));
            let ext = search_finite(&omegas, &mut score)?;
            Ok(BandExtremum { value: sign * ext.value, omega: ext.omega })
        }
        FreqBand::High { .. } | FreqBand::Full => {
            let a_norm2 = spectral_norm(&sys.a);
            let cb: f64 = sys.c.iter().map(|v| v * v).sum::<f64>().sqrt()
                * sys.b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let lo = band.omega_bar().unwrap_or(0.0);
            let mut hi = (10.0 * sys.a.frobenius()).max(10.0 * lo).max(1.0);
            let mut ext;
            let mut doublings = 0;
            loop {
                let omegas = match band {
                    FreqBand::High { omega_bar } => log_grid(*omega_bar, hi, GRID_POINTS),
                    FreqBand::Full => {
                        let mut v = vec![0.0];
                        v.extend(log_grid(hi * 1e-8, hi, GRID_POINTS - 1));
                        v
                    }
                    FreqBand::Low { .. } => unreachable!(),
                };
                ext = search_finite(&omegas, &mut score)?;
                let rho = cb / (hi - a_norm2);
                let tail = objective.tail_score(sys.d, rho);
                if tail <= ext.value {
                    break;
                }
                if doublings >= MAX_TAIL_DOUBLINGS {
                    // The tail bound has converged to |D| (or D) to within
                    // rounding; report it as the extremum, approached at
                    // the far end of the searched range.
                    if tail > ext.value {
                        ext = BandExtremum { value: tail, omega: hi };
                    }
                    break;
                }
                hi *= 2.0;
                doublings += 1;
            }
            Ok(BandExtremum { value: sign * ext.value, omega: ext.omega })
        }
    }
}

/// `sup |G(jw)|` over the band, with the attaining frequency.
pub fn band_sup_gain(sys: &StateSpace, band: &FreqBand) -> Result<f64, LtiError> {
    Ok(band_extremum(sys, band, BandObjective::SupGain)?.value)
}

/// `inf Re G(jw)` over the band.
pub fn band_inf_real(sys: &StateSpace, band: &FreqBand) -> Result<f64, LtiError> {
    Ok(band_extremum(sys, band, BandObjective::InfReal)?.value)
}
