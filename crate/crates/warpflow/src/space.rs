//! Rotationally symmetric ambient space with split density.
//!
//! The ambient manifold is `[0, ∞) × S²` with metric `dr² + w(r)² g_{S²}` and a
//! density that splits as a radial part `φ(r)` plus an angular part `ψ` on the
//! unit sphere. Everything the radial dynamics needs funnels through the scalar
//! `B(r) = w'(r)/w(r) + φ'(r)`; a geodesic sphere with `B(r) = 0` is an
//! equilibrium (a B-minimal sphere).

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("radius {r} is at or below the domain floor {floor}")]
    BelowDomainFloor { r: f64, floor: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Natural cubic spline through strictly increasing knots.
///
/// Backs the tabulated warp and density presets; the derivative comes from the
/// interpolant, never from divided differences of the raw table.
#[derive(Debug, Clone)]
pub struct CubicTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots (natural boundary conditions).
    y2: Vec<f64>,
}

impl CubicTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, SpaceError> {
        if xs.len() != ys.len() || xs.len() < 4 {
            return Err(SpaceError::Config(
                "tabulated function needs at least 4 knots".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SpaceError::Config(
                "table knots must be strictly increasing".into(),
            ));
        }
        let n = xs.len();
        // Tridiagonal solve for the natural spline second derivatives.
        let mut y2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * y2[i - 1] + 2.0;
            y2[i] = (sig - 1.0) / p;
            let d = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
                - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * d / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        for i in (0..n - 1).rev() {
            y2[i] = y2[i] * y2[i + 1] + u[i];
        }
        Ok(Self { xs, ys, y2 })
    }

    pub fn first_knot(&self) -> f64 {
        self.xs[0]
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.clamp(1, self.xs.len() - 1) - 1,
        }
    }

    /// Evaluate; beyond the last knot the last segment extends linearly.
    pub fn eval(&self, x: f64) -> f64 {
        let last = *self.xs.last().unwrap();
        if x > last {
            return self.ys[self.ys.len() - 1] + self.deriv(last) * (x - last);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.y2[i] + (b * b * b - b) * self.y2[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let last = *self.xs.last().unwrap();
        if x > last {
            return self.deriv(last);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((3.0 * b * b - 1.0) * self.y2[i + 1] - (3.0 * a * a - 1.0) * self.y2[i]) * h / 6.0
    }
}

/// Declared growth of the warping function at infinity, used by the
/// declared-asymptotics conformal-type test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailGrowth {
    /// `w(r) ~ r^p`.
    Power(f64),
    /// `w(r) ~ sinh r`.
    Sinh,
}

/// Warping function of the rotationally symmetric space.
///
/// All presets satisfy `w(0) = 0`, `w'(0) = 1` and `w > 0` on `(0, ∞)`. The
/// power preset is `r^p` for `r ≥ glue_radius`, blended smoothly into `r`
/// near the pole so the smoothness conditions at `r = 0` hold.
#[derive(Debug, Clone)]
pub enum WarpedSpace {
    Euclidean,
    Hyperbolic,
    Power { exponent: f64, glue_radius: f64 },
    Tabulated(CubicTable),
}

/// C^∞ monotone step: 0 for x ≤ 0, 1 for x ≥ 1, all derivatives vanish at both ends.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

fn smooth_step_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        let ap = a / (x * x);
        let bp = b / ((1.0 - x) * (1.0 - x));
        (ap * b + a * bp) / ((a + b) * (a + b))
    }
}

impl WarpedSpace {
    pub fn power(exponent: f64, glue_radius: f64) -> Result<Self, SpaceError> {
        if exponent <= 0.0 || glue_radius <= 0.0 {
            return Err(SpaceError::Config(
                "power warp needs exponent > 0 and glue_radius > 0".into(),
            ));
        }
        Ok(Self::Power {
            exponent,
            glue_radius,
        })
    }

    pub fn w(&self, r: f64) -> f64 {
        match self {
            Self::Euclidean => r,
            Self::Hyperbolic => r.sinh(),
            Self::Power {
                exponent,
                glue_radius,
            } => {
                let s = smooth_step(r / glue_radius);
                (1.0 - s) * r + s * r.powf(*exponent)
            }
            Self::Tabulated(t) => t.eval(r),
        }
    }

    pub fn w_prime(&self, r: f64) -> f64 {
        match self {
            Self::Euclidean => 1.0,
            Self::Hyperbolic => r.cosh(),
            Self::Power {
                exponent,
                glue_radius,
            } => {
                let p = *exponent;
                let s = smooth_step(r / glue_radius);
                let sp = smooth_step_prime(r / glue_radius) / glue_radius;
                (1.0 - s) + sp * (r.powf(p) - r) + s * p * r.powf(p - 1.0)
            }
            Self::Tabulated(t) => t.deriv(r),
        }
    }

    /// Smallest radius at which `w` is evaluable; 0 for presets, the first
    /// table knot for tabulated warps.
    pub fn domain_floor(&self) -> f64 {
        match self {
            Self::Tabulated(t) => t.first_knot(),
            _ => 0.0,
        }
    }

    pub fn declared_tail(&self) -> Option<TailGrowth> {
        match self {
            Self::Euclidean => Some(TailGrowth::Power(1.0)),
            Self::Hyperbolic => Some(TailGrowth::Sinh),
            Self::Power { exponent, .. } => Some(TailGrowth::Power(*exponent)),
            Self::Tabulated(_) => None,
        }
    }

    fn check_radius(&self, r: f64) -> Result<(), SpaceError> {
        let floor = self.domain_floor();
        if r <= floor || !r.is_finite() {
            Err(SpaceError::BelowDomainFloor { r, floor })
        } else {
            Ok(())
        }
    }
}

/// Radial density factor `φ(r)`.
///
/// The log-power family `φ = a·ln r + b·r²/2 + c/r` covers the reference
/// densities `−ln r + r²/2`, `−2 ln r` and `−(1/2)ln r − r²/2` exactly.
#[derive(Debug, Clone)]
pub enum RadialDensity {
    Uniform,
    Gaussian { mu: f64 },
    LogPower { a: f64, b: f64, c: f64 },
    Tabulated(CubicTable),
}

impl RadialDensity {
    pub fn phi(&self, r: f64) -> f64 {
        match self {
            Self::Uniform => 0.0,
            Self::Gaussian { mu } => -0.5 * mu * mu * r * r,
            Self::LogPower { a, b, c } => a * r.ln() + 0.5 * b * r * r + c / r,
            Self::Tabulated(t) => t.eval(r),
        }
    }

    pub fn phi_prime(&self, r: f64) -> f64 {
        match self {
            Self::Uniform => 0.0,
            Self::Gaussian { mu } => -mu * mu * r,
            Self::LogPower { a, b, c } => a / r + b * r - c / (r * r),
            Self::Tabulated(t) => t.deriv(r),
        }
    }

    /// Whether `φ` admits a C¹ extension to `[0, ∞)`. Governs the pole-collapse
    /// classification: with an extension the pole is only reached in finite time.
    pub fn extends_c1_to_zero(&self) -> bool {
        match self {
            Self::Uniform | Self::Gaussian { .. } => true,
            Self::LogPower { a, c, .. } => *a == 0.0 && *c == 0.0,
            Self::Tabulated(_) => false,
        }
    }
}

/// Angular density `ψ` on the unit sphere together with its intrinsic gradient.
#[derive(Debug, Clone)]
pub enum AngularDensity {
    Zero,
    /// `ψ(p) = a · p_z²`; ψ-minimal equator, maxima at the poles for a > 0.
    ZSquared { amplitude: f64 },
    /// Values on a latitude–longitude grid, bilinear interpolation.
    LatLonGrid(LatLonGrid),
}

impl AngularDensity {
    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
            || matches!(self, Self::ZSquared { amplitude } if *amplitude == 0.0)
    }

    pub fn psi(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::ZSquared { amplitude } => amplitude * p.z * p.z,
            Self::LatLonGrid(g) => g.eval(p),
        }
    }

    /// Intrinsic gradient on the unit sphere: tangent to the sphere at `p`.
    pub fn psi_grad(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Self::Zero => Vector3::zeros(),
            Self::ZSquared { amplitude } => {
                let ambient = Vector3::new(0.0, 0.0, 2.0 * amplitude * p.z);
                ambient - ambient.dot(p) * p
            }
            Self::LatLonGrid(g) => g.grad(p),
        }
    }
}

/// Bilinear table on a `(θ, φ)` grid over `[0, π] × [0, 2π]`.
#[derive(Debug, Clone)]
pub struct LatLonGrid {
    /// Row-major values, `n_theta` rows by `n_phi` columns; the azimuth wraps.
    values: Vec<f64>,
    n_theta: usize,
    n_phi: usize,
}

impl LatLonGrid {
    pub fn new(values: Vec<f64>, n_theta: usize, n_phi: usize) -> Result<Self, SpaceError> {
        if n_theta < 2 || n_phi < 2 || values.len() != n_theta * n_phi {
            return Err(SpaceError::Config(
                "lat-lon grid needs n_theta, n_phi >= 2 and matching value count".into(),
            ));
        }
        Ok(Self {
            values,
            n_theta,
            n_phi,
        })
    }

    fn cell(&self, p: &Vector3<f64>) -> (usize, usize, f64, f64) {
        let theta = p.z.clamp(-1.0, 1.0).acos();
        let phi = p.y.atan2(p.x).rem_euclid(std::f64::consts::TAU);
        let ft = theta / std::f64::consts::PI * (self.n_theta - 1) as f64;
        let fp = phi / std::f64::consts::TAU * self.n_phi as f64;
        let it = (ft.floor() as usize).min(self.n_theta - 2);
        let ip = (fp.floor() as usize).min(self.n_phi - 1);
        (it, ip, ft - it as f64, fp - ip as f64)
    }

    fn at(&self, it: usize, ip: usize) -> f64 {
        self.values[it * self.n_phi + ip % self.n_phi]
    }

    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        let (it, ip, u, v) = self.cell(p);
        let (a, b) = (self.at(it, ip), self.at(it, ip + 1));
        let (c, d) = (self.at(it + 1, ip), self.at(it + 1, ip + 1));
        (1.0 - u) * ((1.0 - v) * a + v * b) + u * ((1.0 - v) * c + v * d)
    }

    pub fn grad(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let (it, ip, u, v) = self.cell(p);
        let (a, b) = (self.at(it, ip), self.at(it, ip + 1));
        let (c, d) = (self.at(it + 1, ip), self.at(it + 1, ip + 1));
        let dtheta = ((1.0 - v) * (c - a) + v * (d - b)) * (self.n_theta - 1) as f64
            / std::f64::consts::PI;
        let dphi = ((1.0 - u) * (b - a) + u * (d - c)) * self.n_phi as f64 / std::f64::consts::TAU;

        let theta = p.z.clamp(-1.0, 1.0).acos();
        let sin_theta = theta.sin().max(1e-6);
        let e_phi = Vector3::new(-p.y, p.x, 0.0);
        let e_phi = if e_phi.norm() > 1e-12 {
            e_phi.normalize()
        } else {
            Vector3::zeros()
        };
        let e_theta = e_phi.cross(p);
        e_theta * dtheta + e_phi * (dphi / sin_theta)
    }
}

/// Full split density `ξ = φ∘π + ψ∘σ`.
#[derive(Debug, Clone)]
pub struct DensitySpec {
    pub radial: RadialDensity,
    pub angular: AngularDensity,
}

impl DensitySpec {
    pub fn new(radial: RadialDensity, angular: AngularDensity) -> Self {
        Self { radial, angular }
    }

    pub fn gaussian(mu: f64) -> Self {
        Self::new(RadialDensity::Gaussian { mu }, AngularDensity::Zero)
    }

    pub fn uniform() -> Self {
        Self::new(RadialDensity::Uniform, AngularDensity::Zero)
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.radial.phi(r)
    }

    pub fn phi_prime(&self, r: f64) -> f64 {
        self.radial.phi_prime(r)
    }

    pub fn phi_extends_c1_to_zero(&self) -> bool {
        self.radial.extends_c1_to_zero()
    }

    pub fn psi(&self, p: &Vector3<f64>) -> f64 {
        self.angular.psi(p)
    }

    pub fn psi_grad(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.angular.psi_grad(p)
    }
}

/// `B(r) = w'(r)/w(r) + φ'(r)`, the geodesic curvature with density of the
/// circle of radius `r` in the auxiliary plane `(ℝ², g_w, φ)`.
pub fn eval_b(space: &WarpedSpace, density: &DensitySpec, r: f64) -> Result<f64, SpaceError> {
    space.check_radius(r)?;
    Ok(space.w_prime(r) / space.w(r) + density.phi_prime(r))
}

/// Area of the geodesic sphere `S_r`: `4π w(r)²`.
pub fn sphere_area(space: &WarpedSpace, r: f64) -> Result<f64, SpaceError> {
    space.check_radius(r)?;
    let w = space.w(r);
    Ok(4.0 * std::f64::consts::PI * w * w)
}

/// Weighted length of the circle `C_r` in the auxiliary plane: `2π w(r) e^{φ(r)}`.
///
/// Its logarithmic derivative in `r` is exactly `B(r)`.
pub fn weighted_circle_length(
    space: &WarpedSpace,
    density: &DensitySpec,
    r: f64,
) -> Result<f64, SpaceError> {
    space.check_radius(r)?;
    Ok(2.0 * std::f64::consts::PI * space.w(r) * density.phi(r).exp())
}

const ROOT_SCAN_SAMPLES: usize = 1024;

/// Radii of B-minimal spheres in `[r_lo, r_hi]`: scan on a 1024-point grid,
/// then bisect each sign change until `|B| ≤ tol`. Sign-preserving (double)
/// roots are not detected.
pub fn find_b_roots(
    space: &WarpedSpace,
    density: &DensitySpec,
    r_lo: f64,
    r_hi: f64,
    tol: f64,
) -> Result<Vec<f64>, SpaceError> {
    space.check_radius(r_lo)?;
    space.check_radius(r_hi)?;
    if r_lo >= r_hi {
        return Err(SpaceError::Config(format!(
            "empty scan interval [{r_lo}, {r_hi}]"
        )));
    }
    let b_at = |r: f64| space.w_prime(r) / space.w(r) + density.phi_prime(r);
    let h = (r_hi - r_lo) / (ROOT_SCAN_SAMPLES - 1) as f64;
    let mut roots = Vec::new();
    let mut x_prev = r_lo;
    let mut b_prev = b_at(x_prev);
    for i in 1..ROOT_SCAN_SAMPLES {
        let x = r_lo + i as f64 * h;
        let b = b_at(x);
        if b_prev == 0.0 {
            roots.push(x_prev);
        } else if b_prev * b < 0.0 {
            let (mut lo, mut hi) = (x_prev, x);
            let (mut blo, mut root) = (b_prev, None);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let bm = b_at(mid);
                if bm.abs() <= tol {
                    root = Some(mid);
                    break;
                }
                if blo * bm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    blo = bm;
                }
            }
            if let Some(r) = root {
                roots.push(r);
            }
        }
        x_prev = x;
        b_prev = b;
    }
    if b_prev == 0.0 {
        roots.push(x_prev);
    }
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalType {
    Parabolic,
    Hyperbolic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalMode {
    DeclaredAsymptotics,
    NumericTail,
}

const TAIL_WINDOWS_CHECKED: usize = 5;
const TAIL_RATIO_SLACK: f64 = 1e-6;

/// Parabolic/hyperbolic test for `(M³_w, g_w)`: does `∫^∞ dr/Area(S_r)` diverge?
///
/// Declared mode decides from the preset tail (`w ~ r^p` divergent iff
/// `p ≤ 1/2`, `w ~ sinh` convergent). Numeric mode integrates dyadic windows
/// `[2^k, 2^{k+1}]` up to `2^30`: if the last five window integrals each shrink
/// by a factor ≤ 1/2 the integral converges (Hyperbolic); if they are
/// non-decreasing it diverges (Parabolic); anything else is Inconclusive.
pub fn classify_conformal_type(
    space: &WarpedSpace,
    r_start: f64,
    mode: ConformalMode,
) -> Result<ConformalType, SpaceError> {
    space.check_radius(r_start)?;
    match mode {
        ConformalMode::DeclaredAsymptotics => match space.declared_tail() {
            Some(TailGrowth::Power(p)) => Ok(if p <= 0.5 {
                ConformalType::Parabolic
            } else {
                ConformalType::Hyperbolic
            }),
            Some(TailGrowth::Sinh) => Ok(ConformalType::Hyperbolic),
            None => Err(SpaceError::Config(
                "tabulated warp has no declared tail; use the numeric-tail mode".into(),
            )),
        },
        ConformalMode::NumericTail => {
            let k0 = r_start.log2().ceil() as i32;
            let mut windows = Vec::new();
            for k in k0..30 {
                windows.push(tail_window_integral(space, 2f64.powi(k), 2f64.powi(k + 1)));
            }
            if windows.len() < TAIL_WINDOWS_CHECKED + 1 {
                return Ok(ConformalType::Inconclusive);
            }
            let tail = &windows[windows.len() - (TAIL_WINDOWS_CHECKED + 1)..];
            let shrinking = tail
                .windows(2)
                .all(|w| w[1] <= 0.5 * w[0] * (1.0 + TAIL_RATIO_SLACK) + f64::MIN_POSITIVE);
            if shrinking {
                return Ok(ConformalType::Hyperbolic);
            }
            let non_decreasing = tail
                .windows(2)
                .all(|w| w[1] >= w[0] * (1.0 - TAIL_RATIO_SLACK));
            if non_decreasing {
                return Ok(ConformalType::Parabolic);
            }
            Ok(ConformalType::Inconclusive)
        }
    }
}

/// `∫_a^b dr / (4π w(r)²)` by composite Simpson in log space.
fn tail_window_integral(space: &WarpedSpace, a: f64, b: f64) -> f64 {
    let n = 128; // intervals, even
    let lna = a.ln();
    let h = (b.ln() - lna) / n as f64;
    let f = |u: f64| {
        let r = (lna + u).exp();
        let w = space.w(r);
        let area = 4.0 * std::f64::consts::PI * w * w;
        if area.is_finite() && area > 0.0 {
            r / area
        } else {
            0.0
        }
    };
    let mut sum = f(0.0) + f(n as f64 * h);
    for i in 1..n {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}
