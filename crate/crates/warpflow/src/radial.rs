//! Radius ODE `R'(t) = −B(R(t))` with event detection, plus the accumulated
//! time change `t̃(t) = ∫₀ᵗ (w(r0)/w(R))² dt` and its inverse.
//!
//! The time change is carried as a second state component inside the
//! Dormand–Prince 5(4) integrator, so it has the same order of accuracy as the
//! radius itself. Interpolation between accepted steps is cubic Hermite with
//! the exact right-hand-side slopes stored per sample.

use crate::space::{DensitySpec, SpaceError, WarpedSpace};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RadialError {
    #[error("step size underflow at t={t}, R={r}, ttilde={ttilde} (last valid state)")]
    StepSizeUnderflow { t: f64, r: f64, ttilde: f64 },
    #[error("time {t} outside sampled range [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },
    #[error("transformed time {ttilde} beyond accumulated range [0, {ttilde_end}]; limit is {limit}")]
    TtildeOutOfRange {
        ttilde: f64,
        ttilde_end: f64,
        limit: String,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Integration options. `None` fields resolve against `r0` and the budget.
#[derive(Debug, Clone)]
pub struct RadialOptions {
    /// Per-step relative error bound for the embedded pair.
    pub rtol: f64,
    /// Radius at which the pole counts as hit; default `1e-8 · r0`.
    pub pole_eps: Option<f64>,
    /// Proximity radius for equilibrium convergence; default `1e-6 · r0`.
    /// Set to `Some(0.0)` to disable root-convergence detection.
    pub root_eps: Option<f64>,
    /// Escape radius; default `1e6 · r0`.
    pub r_max: Option<f64>,
    /// Step-size cap; default `t_budget / 2000` so the Hermite interpolant
    /// between samples stays well below the oracle tolerances.
    pub max_step: Option<f64>,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            pole_eps: None,
            root_eps: None,
            r_max: None,
            max_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RadialSample {
    pub t: f64,
    pub r: f64,
    pub ttilde: f64,
    pub dr_dt: f64,
    pub dttilde_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalEvent {
    PoleHit { t_hit: f64 },
    RootConvergence { r_star: f64 },
    Escape { r_reached: f64 },
    Budget { t_end: f64 },
}

/// Limit of the accumulated time change, estimated from the sampled tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TtildeLimit {
    Finite(f64),
    Unbounded,
    Ambiguous,
}

impl std::fmt::Display for TtildeLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TtildeLimit::Finite(v) => write!(f, "finite ({v})"),
            TtildeLimit::Unbounded => write!(f, "unbounded"),
            TtildeLimit::Ambiguous => write!(f, "ambiguous"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialTrajectory {
    pub samples: Vec<RadialSample>,
    pub terminal: TerminalEvent,
    pub r0: f64,
    pub ttilde_limit: TtildeLimit,
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error coefficients (5th minus 4th order weights).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [f64; 2]; // [R, ttilde]

struct Rhs<'a> {
    space: &'a WarpedSpace,
    density: &'a DensitySpec,
    w0: f64,
}

impl Rhs<'_> {
    fn eval(&self, r: f64) -> Option<State> {
        if r <= self.space.domain_floor() || !r.is_finite() {
            return None;
        }
        let w = self.space.w(r);
        let b = self.space.w_prime(r) / w + self.density.phi_prime(r);
        let ratio = self.w0 / w;
        let out = [-b, ratio * ratio];
        if out.iter().all(|v| v.is_finite()) {
            Some(out)
        } else {
            None
        }
    }

    fn b_at(&self, r: f64) -> Option<f64> {
        self.eval(r).map(|f| -f[0])
    }

    /// One 5th-order step of size `h` from `y`; no error control.
    fn step5(&self, y: &State, h: f64) -> Option<State> {
        let add = |y: &State, terms: &[(f64, &State)]| -> State {
            let mut out = *y;
            for (c, k) in terms {
                out[0] += h * c * k[0];
                out[1] += h * c * k[1];
            }
            out
        };
        let k1 = self.eval(y[0])?;
        let k2 = self.eval(add(y, &[(A21, &k1)])[0])?;
        let k3 = self.eval(add(y, &[(A31, &k1), (A32, &k2)])[0])?;
        let k4 = self.eval(add(y, &[(A41, &k1), (A42, &k2), (A43, &k3)])[0])?;
        let k5 = self.eval(add(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)])[0])?;
        let k6 = self.eval(
            add(
                y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            )[0],
        )?;
        Some(add(
            y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        ))
    }

    /// Full embedded step: returns (y_new, error_estimate) on success.
    fn step_with_error(&self, y: &State, h: f64) -> Option<(State, State)> {
        let mk = |terms: &[(f64, State)]| -> State {
            let mut out = *y;
            for (c, k) in terms {
                out[0] += h * c * k[0];
                out[1] += h * c * k[1];
            }
            out
        };
        let k1 = self.eval(y[0])?;
        let k2 = self.eval(mk(&[(A21, k1)])[0])?;
        let k3 = self.eval(mk(&[(A31, k1), (A32, k2)])[0])?;
        let k4 = self.eval(mk(&[(A41, k1), (A42, k2), (A43, k3)])[0])?;
        let k5 = self.eval(mk(&[(A51, k1), (A52, k2), (A53, k3), (A54, k4)])[0])?;
        let k6 = self.eval(
            mk(&[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)])[0],
        )?;
        let y_new = mk(&[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
        let k7 = self.eval(y_new[0])?;
        let mut err = [0.0, 0.0];
        for (c, k) in [
            (E1, k1),
            (E3, k3),
            (E4, k4),
            (E5, k5),
            (E6, k6),
            (E7, k7),
        ] {
            err[0] += c * k[0];
            err[1] += c * k[1];
        }
        err[0] *= h;
        err[1] *= h;
        Some((y_new, err))
    }
}

/// Integrate the radial system from `r0` up to `t_budget`, stopping at the
/// first of: pole hit, convergence to a B-root, escape past `r_max`, or the
/// budget itself.
pub fn integrate_radial(
    space: &WarpedSpace,
    density: &DensitySpec,
    r0: f64,
    t_budget: f64,
    opts: &RadialOptions,
) -> Result<RadialTrajectory, RadialError> {
    let floor = space.domain_floor();
    if r0 <= floor {
        return Err(RadialError::Invalid(format!(
            "r0 = {r0} must exceed the domain floor {floor}"
        )));
    }
    if !(t_budget > 0.0) {
        return Err(RadialError::Invalid("t_budget must be positive".into()));
    }
    let pole_eps = opts.pole_eps.unwrap_or(1e-8 * r0).max(floor);
    let root_eps = opts.root_eps.unwrap_or(1e-6 * r0);
    let r_max = opts.r_max.unwrap_or(1e6 * r0);
    let max_step = opts.max_step.unwrap_or(t_budget / 2000.0);
    let rtol = opts.rtol;
    let rhs = Rhs {
        space,
        density,
        w0: space.w(r0),
    };

    let mut samples = Vec::new();
    let f0 = rhs
        .eval(r0)
        .ok_or_else(|| RadialError::Invalid(format!("B is not evaluable at r0 = {r0}")))?;
    samples.push(RadialSample {
        t: 0.0,
        r: r0,
        ttilde: 0.0,
        dr_dt: f0[0],
        dttilde_dt: f0[1],
    });

    let mut t = 0.0;
    let mut y: State = [r0, 0.0];
    let mut h = max_step * 1e-3;
    let mut b_prev_abs = rhs.b_at(r0).unwrap().abs();
    let mut shrink_streak: usize = 0;
    let mut terminal: Option<TerminalEvent> = None;
    // Inside this radius a stalled step size is treated as pole capture.
    let pole_capture = 1e-3 * r0;
    let mut iterations: usize = 0;

    while terminal.is_none() {
        iterations += 1;
        if iterations > 20_000_000 {
            return Err(RadialError::Invalid(
                "radial integration exceeded the iteration cap".into(),
            ));
        }
        let remaining = t_budget - t;
        if remaining <= t_budget * 1e-15 {
            terminal = Some(TerminalEvent::Budget { t_end: t });
            break;
        }
        let h_try = h.min(remaining).min(max_step);
        if h_try < 1e-14 * t.abs().max(1.0) {
            // The plunge toward the pole outruns what t-marching can resolve;
            // finish the descent with a quadrature in R instead.
            if y[0] < pole_capture && y[0] > pole_eps {
                if let Some((dt_tail, dtt_tail)) = pole_tail(&rhs, pole_eps, y[0]) {
                    let t_hit = t + dt_tail;
                    let f = rhs.eval(pole_eps).unwrap_or(f0);
                    samples.push(RadialSample {
                        t: t_hit,
                        r: pole_eps,
                        ttilde: y[1] + dtt_tail,
                        dr_dt: f[0],
                        dttilde_dt: f[1],
                    });
                    terminal = Some(TerminalEvent::PoleHit { t_hit });
                    break;
                }
            }
            return Err(RadialError::StepSizeUnderflow {
                t,
                r: y[0],
                ttilde: y[1],
            });
        }
        let Some((y_new, err)) = rhs.step_with_error(&y, h_try) else {
            h = h_try * 0.5;
            continue;
        };
        let scale = |i: usize| 1e-14 * r0.max(1.0) + rtol * y[i].abs().max(y_new[i].abs());
        let e0 = err[0] / scale(0);
        let e1 = err[1] / scale(1);
        let err_norm = (0.5 * (e0 * e0 + e1 * e1)).sqrt();
        if err_norm > 1.0 {
            h = h_try * (0.9 * err_norm.powf(-0.2)).max(0.2);
            continue;
        }
        // Accepted.
        let t_new = t + h_try;
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h_try * factor).min(max_step);

        if y_new[0] <= pole_eps {
            // Refine the crossing time by bisection on the step size.
            let (mut lo, mut hi) = (0.0, h_try);
            let mut state_hi = y_new;
            for _ in 0..120 {
                if hi - lo <= rtol * t_new.abs().max(1e-6) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                match rhs.step5(&y, mid) {
                    Some(s) if s[0] <= pole_eps => {
                        hi = mid;
                        state_hi = s;
                    }
                    Some(_) => lo = mid,
                    None => hi = mid,
                }
            }
            let t_hit = t + hi;
            let f = rhs.eval(state_hi[0].max(pole_eps)).unwrap_or(f0);
            samples.push(RadialSample {
                t: t_hit,
                r: state_hi[0],
                ttilde: state_hi[1],
                dr_dt: f[0],
                dttilde_dt: f[1],
            });
            terminal = Some(TerminalEvent::PoleHit { t_hit });
            break;
        }

        t = t_new;
        y = y_new;
        let f = rhs.eval(y[0]).unwrap();
        samples.push(RadialSample {
            t,
            r: y[0],
            ttilde: y[1],
            dr_dt: f[0],
            dttilde_dt: f[1],
        });

        if y[0] >= r_max {
            terminal = Some(TerminalEvent::Escape { r_reached: y[0] });
            break;
        }

        // Root convergence: |B| non-increasing for 10 consecutive accepted
        // steps and a sign-change root bracketed within root_eps.
        let b_abs = rhs.b_at(y[0]).map(f64::abs).unwrap_or(f64::INFINITY);
        if b_abs <= b_prev_abs * (1.0 + 1e-12) + f64::MIN_POSITIVE {
            shrink_streak += 1;
        } else {
            shrink_streak = 0;
        }
        b_prev_abs = b_abs;
        if root_eps > 0.0 && shrink_streak >= 10 {
            if let Some(r_star) = bracketed_root(&rhs, y[0] - root_eps, y[0] + root_eps, floor) {
                if (y[0] - r_star).abs() <= root_eps {
                    terminal = Some(TerminalEvent::RootConvergence { r_star });
                    break;
                }
            }
        }
    }

    let terminal = terminal.unwrap();
    let ttilde_limit = match &terminal {
        TerminalEvent::PoleHit { .. } => {
            pole_ttilde_limit(&rhs, pole_eps, samples.last().unwrap().ttilde)
        }
        _ => estimate_ttilde_limit(&samples, &terminal),
    };
    Ok(RadialTrajectory {
        samples,
        terminal,
        r0,
        ttilde_limit,
    })
}

/// (Δt, Δt̃) spent descending from `r_hi` to `r_lo` along `R' = −B(R)`:
/// `Δt = ∫ dr/B`, `Δt̃ = ∫ (w(r0)/w(r))² dr/B`, Simpson in log r.
/// `None` if B is not positive throughout.
fn pole_tail(rhs: &Rhs, r_lo: f64, r_hi: f64) -> Option<(f64, f64)> {
    let n = 256;
    let la = r_lo.ln();
    let h = (r_hi.ln() - la) / n as f64;
    let mut acc = (0.0, 0.0);
    let mut add = |u: f64, wgt: f64| -> bool {
        let r = (la + u).exp();
        match rhs.b_at(r) {
            Some(b) if b > 0.0 => {
                let w = rhs.space.w(r);
                let ratio = rhs.w0 / w;
                acc.0 += wgt * r / b;
                acc.1 += wgt * r * ratio * ratio / b;
                true
            }
            _ => false,
        }
    };
    if !add(0.0, 1.0) || !add(n as f64 * h, 1.0) {
        return None;
    }
    for i in 1..n {
        if !add(i as f64 * h, if i % 2 == 1 { 4.0 } else { 2.0 }) {
            return None;
        }
    }
    Some((acc.0 * h / 3.0, acc.1 * h / 3.0))
}

/// Convergence test for the improper t̃ integral below the pole cutoff:
/// compare Δt̃ over the R-windows `[eps/2, eps]` and `[eps/4, eps/2]`.
/// Near-constant increments mean the logarithmic divergence the paper proves
/// for C¹-extendable densities; geometric decay extrapolates to a finite sum.
fn pole_ttilde_limit(rhs: &Rhs, pole_eps: f64, ttilde_end: f64) -> TtildeLimit {
    let floor = rhs.space.domain_floor();
    if pole_eps / 4.0 <= floor {
        return TtildeLimit::Ambiguous;
    }
    let w1 = pole_tail(rhs, pole_eps / 2.0, pole_eps).map(|(_, tt)| tt);
    let w2 = pole_tail(rhs, pole_eps / 4.0, pole_eps / 2.0).map(|(_, tt)| tt);
    match (w1, w2) {
        (Some(w1), Some(w2)) if w1 > 0.0 => {
            let q = w2 / w1;
            if q >= TAIL_GROWING_RATIO {
                TtildeLimit::Unbounded
            } else if q <= TAIL_CONVERGING_RATIO {
                TtildeLimit::Finite(ttilde_end + w1 + w2 / (1.0 - q))
            } else {
                TtildeLimit::Ambiguous
            }
        }
        _ => TtildeLimit::Ambiguous,
    }
}

fn bracketed_root(rhs: &Rhs, lo: f64, hi: f64, floor: f64) -> Option<f64> {
    let lo = lo.max(floor + 1e-300 + floor.abs() * 1e-15);
    if lo >= hi {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    let mut fa = rhs.b_at(a)?;
    let fb = rhs.b_at(b)?;
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        let fm = rhs.b_at(mid)?;
        if fm == 0.0 || (b - a) < 1e-15 * mid.abs().max(1e-30) {
            return Some(mid);
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Some(0.5 * (a + b))
}

const TAIL_CONVERGING_RATIO: f64 = 0.6;
const TAIL_GROWING_RATIO: f64 = 0.9;

/// Tail heuristic for the t̃ limit: compare the t̃ gained over the last two
/// dyadic windows (in t for escape/budget/root runs, in R for pole runs).
/// A ratio ≤ 0.6 extrapolates geometrically to a finite limit; ≥ 0.9 is
/// treated as unbounded growth; in between the verdict is ambiguous.
fn estimate_ttilde_limit(samples: &[RadialSample], terminal: &TerminalEvent) -> TtildeLimit {
    if samples.len() < 8 {
        return TtildeLimit::Ambiguous;
    }
    let last = samples.last().unwrap();
    let (a, b) = match terminal {
        TerminalEvent::PoleHit { .. } => {
            let r_end = last.r;
            let tt_at_r = |target: f64| -> Option<f64> {
                // R is strictly decreasing on a pole-bound run.
                let idx = samples.partition_point(|s| s.r > target);
                if idx == 0 || idx >= samples.len() {
                    return None;
                }
                let (s0, s1) = (&samples[idx - 1], &samples[idx]);
                let frac = (s0.r - target) / (s0.r - s1.r);
                Some(s0.ttilde + frac * (s1.ttilde - s0.ttilde))
            };
            match (tt_at_r(2.0 * r_end), tt_at_r(4.0 * r_end)) {
                (Some(tt2), Some(tt4)) => (last.ttilde - tt2, tt2 - tt4),
                _ => return TtildeLimit::Ambiguous,
            }
        }
        _ => {
            let t_end = last.t;
            let tt_at = |t: f64| interpolate(samples, t, Field::Ttilde);
            let half = tt_at(0.5 * t_end);
            let quarter = tt_at(0.25 * t_end);
            (last.ttilde - half, half - quarter)
        }
    };
    if !(b > 0.0) {
        return TtildeLimit::Ambiguous;
    }
    let q = a / b;
    if q <= TAIL_CONVERGING_RATIO {
        TtildeLimit::Finite(last.ttilde + a * q / (1.0 - q))
    } else if q >= TAIL_GROWING_RATIO {
        TtildeLimit::Unbounded
    } else {
        TtildeLimit::Ambiguous
    }
}

#[derive(Clone, Copy)]
enum Field {
    R,
    Ttilde,
}

fn hermite(s0: &RadialSample, s1: &RadialSample, t: f64, field: Field) -> f64 {
    let h = s1.t - s0.t;
    if h <= 0.0 {
        return match field {
            Field::R => s1.r,
            Field::Ttilde => s1.ttilde,
        };
    }
    let (y0, y1, d0, d1) = match field {
        Field::R => (s0.r, s1.r, s0.dr_dt, s1.dr_dt),
        Field::Ttilde => (s0.ttilde, s1.ttilde, s0.dttilde_dt, s1.dttilde_dt),
    };
    let s = (t - s0.t) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1;
    // Both series are monotone between samples; keep the interpolant inside.
    v.clamp(y0.min(y1), y0.max(y1))
}

fn hermite_deriv(s0: &RadialSample, s1: &RadialSample, t: f64, field: Field) -> f64 {
    let h = s1.t - s0.t;
    if h <= 0.0 {
        return 0.0;
    }
    let (y0, y1, d0, d1) = match field {
        Field::R => (s0.r, s1.r, s0.dr_dt, s1.dr_dt),
        Field::Ttilde => (s0.ttilde, s1.ttilde, s0.dttilde_dt, s1.dttilde_dt),
    };
    let s = (t - s0.t) / h;
    let s2 = s * s;
    ((6.0 * s2 - 6.0 * s) * (y0 - y1) / h)
        + (3.0 * s2 - 4.0 * s + 1.0) * d0
        + (3.0 * s2 - 2.0 * s) * d1
}

fn interpolate(samples: &[RadialSample], t: f64, field: Field) -> f64 {
    let idx = samples
        .partition_point(|s| s.t <= t)
        .clamp(1, samples.len() - 1)
        - 1;
    hermite(&samples[idx], &samples[idx + 1], t, field)
}

impl RadialTrajectory {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn ttilde_end(&self) -> f64 {
        self.samples.last().map(|s| s.ttilde).unwrap_or(0.0)
    }

    pub fn r_end(&self) -> f64 {
        self.samples.last().map(|s| s.r).unwrap_or(self.r0)
    }

    fn check_t(&self, t: f64) -> Result<(), RadialError> {
        let t_end = self.t_end();
        if t < 0.0 || t > t_end * (1.0 + 1e-12) + f64::MIN_POSITIVE {
            return Err(RadialError::TimeOutOfRange { t, t_end });
        }
        Ok(())
    }

    /// `t̃(t)` by monotone cubic interpolation of the accumulated integral.
    pub fn time_change_of(&self, t: f64) -> Result<f64, RadialError> {
        self.check_t(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(interpolate(&self.samples, t.min(self.t_end()), Field::Ttilde))
    }

    /// `R(t)` by the same interpolation machinery.
    pub fn radius_at(&self, t: f64) -> Result<f64, RadialError> {
        self.check_t(t)?;
        Ok(interpolate(&self.samples, t.min(self.t_end()), Field::R))
    }

    /// Inverse of the time change: the `t` with `t̃(t) = ttilde`, solved on the
    /// forward interpolant so the round trip is exact to solver tolerance.
    pub fn invert_time_change(&self, ttilde: f64) -> Result<f64, RadialError> {
        let ttilde_end = self.ttilde_end();
        if ttilde < 0.0 || ttilde > ttilde_end * (1.0 + 1e-12) + f64::MIN_POSITIVE {
            return Err(RadialError::TtildeOutOfRange {
                ttilde,
                ttilde_end,
                limit: self.ttilde_limit.to_string(),
            });
        }
        if ttilde == 0.0 {
            return Ok(0.0);
        }
        let ttilde = ttilde.min(ttilde_end);
        let idx = self
            .samples
            .partition_point(|s| s.ttilde <= ttilde)
            .clamp(1, self.samples.len() - 1)
            - 1;
        let (s0, s1) = (&self.samples[idx], &self.samples[idx + 1]);
        let (mut lo, mut hi) = (s0.t, s1.t);
        let mut t = 0.5 * (lo + hi);
        let tol = 1e-13 * ttilde.abs().max(1.0);
        for _ in 0..100 {
            let f = hermite(s0, s1, t, Field::Ttilde) - ttilde;
            if f.abs() <= tol {
                return Ok(t);
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = hermite_deriv(s0, s1, t, Field::Ttilde);
            let newton = if d > 0.0 { t - f / d } else { f64::NAN };
            t = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-16 * hi.abs().max(1e-300) {
                break;
            }
        }
        Ok(t)
    }
}
