//! Discrete curve shortening flow with density ψ on a fixed sphere.
//!
//! Curves are closed polygons of unit vectors; all metric quantities carry the
//! physical sphere radius ρ as an explicit scale, so the kernel works on the
//! unit sphere regardless of how large or small the ambient sphere is. The
//! flow velocity is the discrete geodesic curvature vector with density,
//! advanced by explicit Euler under a CFL bound on the squared minimum node
//! spacing.

use crate::space::DensitySpec;
use nalgebra::Vector3;
use std::collections::VecDeque;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve needs at least 16 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node {index} is off the unit sphere (|p| − 1 = {deviation})")]
    NotUnit { index: usize, deviation: f64 },
    #[error("degenerate node spacing at index {index}: geodesic gap {gap}")]
    DegenerateSpacing { index: usize, gap: f64 },
    #[error("time step {dt} violates the CFL bound; admissible is {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("curve is not embedded")]
    NotEmbedded,
    #[error("invalid curve parameter: {0}")]
    Invalid(String),
    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),
    #[error("snapshot I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which side of the traversal the distinguished region Ω lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

const MIN_NODES: usize = 16;
const MIN_GAP: f64 = 1e-10;
const UNIT_TOL: f64 = 1e-12;
/// Default explicit-Euler stability constant for `dt ≤ cfl · (Δs_min)²`.
pub const DEFAULT_CFL: f64 = 0.25;

/// Closed polygon of unit-sphere points carrying the physical sphere radius.
///
/// Traversal orientation is the node order; `omega_side` records on which side
/// of that traversal the distinguished enclosed region Ω sits. At construction
/// Ω is the side with area fraction ≤ 1/2.
#[derive(Debug, Clone)]
pub struct SphericalCurve {
    nodes: Vec<Vector3<f64>>,
    sphere_radius: f64,
    omega_side: Side,
}

impl SphericalCurve {
    pub fn new(nodes: Vec<Vector3<f64>>, sphere_radius: f64) -> Result<Self, CurveError> {
        if nodes.len() < MIN_NODES {
            return Err(CurveError::TooFewNodes(nodes.len()));
        }
        if !(sphere_radius > 0.0) {
            return Err(CurveError::Invalid(format!(
                "sphere radius must be positive, got {sphere_radius}"
            )));
        }
        for (i, p) in nodes.iter().enumerate() {
            let dev = (p.norm() - 1.0).abs();
            if dev > UNIT_TOL {
                return Err(CurveError::NotUnit {
                    index: i,
                    deviation: dev,
                });
            }
        }
        let mut curve = Self {
            nodes,
            sphere_radius,
            omega_side: Side::Left,
        };
        curve.check_gaps()?;
        if curve.left_area_unit() > 2.0 * std::f64::consts::PI {
            curve.omega_side = Side::Right;
        }
        Ok(curve)
    }

    fn with_side(nodes: Vec<Vector3<f64>>, sphere_radius: f64, omega_side: Side) -> Self {
        Self {
            nodes,
            sphere_radius,
            omega_side,
        }
    }

    fn check_gaps(&self) -> Result<(), CurveError> {
        for (i, g) in self.gaps().iter().enumerate() {
            if *g < MIN_GAP {
                return Err(CurveError::DegenerateSpacing { index: i, gap: *g });
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sphere_radius(&self) -> f64 {
        self.sphere_radius
    }

    pub fn omega_side(&self) -> Side {
        self.omega_side
    }

    /// Same node set viewed on a sphere of a different radius.
    pub fn rescaled(&self, sphere_radius: f64) -> Self {
        Self::with_side(self.nodes.clone(), sphere_radius, self.omega_side)
    }

    /// Geodesic gaps on the unit sphere between consecutive nodes (wrapping).
    pub fn gaps(&self) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| unit_angle(&self.nodes[i], &self.nodes[(i + 1) % n]))
            .collect()
    }

    /// Plain length, scaled by the sphere radius.
    pub fn length(&self) -> f64 {
        self.gaps().iter().sum::<f64>() * self.sphere_radius
    }

    /// Area of the region left of the traversal on the unit sphere, by the
    /// spherical excess `2π − Σ exterior angles`.
    fn left_area_unit(&self) -> f64 {
        let n = self.nodes.len();
        let mut turning = 0.0;
        for i in 0..n {
            let prev = &self.nodes[(i + n - 1) % n];
            let here = &self.nodes[i];
            let next = &self.nodes[(i + 1) % n];
            let d_in = tangent_toward(here, prev).map(|v| -v);
            let d_out = tangent_toward(here, next);
            if let (Some(din), Some(dout)) = (d_in, d_out) {
                turning += here.dot(&din.cross(&dout)).atan2(din.dot(&dout));
            }
        }
        2.0 * std::f64::consts::PI - turning
    }

    /// Area of the distinguished region Ω on the unit sphere.
    fn omega_area_unit(&self) -> f64 {
        let left = self.left_area_unit();
        match self.omega_side {
            Side::Left => left,
            Side::Right => 4.0 * std::f64::consts::PI - left,
        }
    }

    /// Area of Ω scaled to the physical sphere. The curve must be embedded;
    /// this accessor does not re-verify that (see [`enclosed_area`]).
    pub fn omega_area(&self) -> f64 {
        self.omega_area_unit() * self.sphere_radius * self.sphere_radius
    }

    /// Length-weighted node centroid direction, projected to the sphere.
    pub fn centroid_direction(&self) -> Vector3<f64> {
        let g = self.gaps();
        let n = self.nodes.len();
        let mut c = Vector3::zeros();
        for i in 0..n {
            c += self.nodes[i] * (g[(i + n - 1) % n] + g[i]);
        }
        if c.norm() > 1e-9 {
            c.normalize()
        } else {
            self.nodes[0]
        }
    }
}

fn unit_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Unit tangent at `p` pointing along the great circle toward `q`.
fn tangent_toward(p: &Vector3<f64>, q: &Vector3<f64>) -> Option<Vector3<f64>> {
    let t = q - p.dot(q) * p;
    let n = t.norm();
    if n > 1e-300 {
        Some(t / n)
    } else {
        None
    }
}

fn slerp(a: &Vector3<f64>, b: &Vector3<f64>, t: f64) -> Vector3<f64> {
    let ang = unit_angle(a, b);
    if ang < 1e-12 {
        return *a;
    }
    let s = ang.sin();
    (a * ((1.0 - t) * ang).sin() + b * (t * ang).sin()) / s
}

/// Latitude circle at polar angle `theta0`; the distinguished region is the
/// polar cap around +z.
pub fn make_latitude_circle(theta0: f64, n: usize, rho: f64) -> Result<SphericalCurve, CurveError> {
    if !(theta0 > 0.0 && theta0 <= std::f64::consts::FRAC_PI_2) {
        return Err(CurveError::Invalid(format!(
            "theta0 must lie in (0, π/2], got {theta0}"
        )));
    }
    let (st, ct) = (theta0.sin(), theta0.cos());
    let nodes = (0..n)
        .map(|i| {
            let alpha = std::f64::consts::TAU * i as f64 / n as f64;
            Vector3::new(st * alpha.cos(), st * alpha.sin(), ct)
        })
        .collect();
    SphericalCurve::new(nodes, rho)
}

/// Latitude circle perturbed by a low-order trigonometric polynomial in the
/// azimuth: `θ(α) = θ0 + Σ aₖ cos kα + bₖ sin kα`. Fails if the resulting
/// curve is not embedded.
pub fn make_fourier_curve(
    theta0: f64,
    cos_coeffs: &[f64],
    sin_coeffs: &[f64],
    n: usize,
    rho: f64,
) -> Result<SphericalCurve, CurveError> {
    let nodes = (0..n)
        .map(|i| {
            let alpha = std::f64::consts::TAU * i as f64 / n as f64;
            let mut theta = theta0;
            for (k, a) in cos_coeffs.iter().enumerate() {
                theta += a * ((k + 1) as f64 * alpha).cos();
            }
            for (k, b) in sin_coeffs.iter().enumerate() {
                theta += b * ((k + 1) as f64 * alpha).sin();
            }
            Vector3::new(
                theta.sin() * alpha.cos(),
                theta.sin() * alpha.sin(),
                theta.cos(),
            )
        })
        .collect();
    let curve = SphericalCurve::new(nodes, rho)?;
    if !check_embedded(&curve) {
        return Err(CurveError::NotEmbedded);
    }
    Ok(curve)
}

/// Discrete geodesic curvature vector with density, as the velocity of the
/// unit-sphere node representatives: both the curvature term and the density
/// term scale with 1/ρ² so that the flow in `t̃` is the ψMCF on the radius-ρ
/// sphere.
///
/// Every returned vector is tangent to the sphere at its node.
pub fn curvature_density_vector(
    curve: &SphericalCurve,
    density: &DensitySpec,
) -> Result<Vec<Vector3<f64>>, CurveError> {
    curvature_with_gaps(curve, density, &curve.gaps())
}

fn curvature_with_gaps(
    curve: &SphericalCurve,
    density: &DensitySpec,
    gaps: &[f64],
) -> Result<Vec<Vector3<f64>>, CurveError> {
    let n = curve.nodes.len();
    for (i, g) in gaps.iter().enumerate() {
        if *g < MIN_GAP {
            return Err(CurveError::DegenerateSpacing { index: i, gap: *g });
        }
    }
    let rho2 = curve.sphere_radius * curve.sphere_radius;
    let psi_active = !curve_psi_is_zero(density);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = &curve.nodes[(i + n - 1) % n];
        let here = &curve.nodes[i];
        let next = &curve.nodes[(i + 1) % n];
        let gm = gaps[(i + n - 1) % n];
        let gp = gaps[i];
        let d = ((next - here) / gp - (here - prev) / gm) * (2.0 / (gm + gp));
        let k_unit = d - d.dot(here) * here;
        let mut v = k_unit / rho2;
        if psi_active {
            if let Some(nu) = curve_normal(curve, i, prev, here, next) {
                let grad = density.psi_grad(here);
                v -= (grad.dot(&nu) / rho2) * nu;
            }
        }
        out.push(v);
    }
    Ok(out)
}

fn curve_psi_is_zero(density: &DensitySpec) -> bool {
    density.angular.is_zero()
}

/// Unit normal to the curve within the sphere tangent plane at node `i`,
/// oriented toward the distinguished region Ω.
fn curve_normal(
    curve: &SphericalCurve,
    _i: usize,
    prev: &Vector3<f64>,
    here: &Vector3<f64>,
    next: &Vector3<f64>,
) -> Option<Vector3<f64>> {
    let chord = next - prev;
    let tau = chord - chord.dot(here) * here;
    let norm = tau.norm();
    if norm < 1e-300 {
        return None;
    }
    let tau = tau / norm;
    let nu = here.cross(&tau);
    Some(match curve.omega_side {
        Side::Left => nu,
        Side::Right => -nu,
    })
}

/// Signed geodesic curvature with density per node, positive toward Ω.
/// Physical units (1/length on the radius-ρ sphere).
pub fn signed_k_psi(
    curve: &SphericalCurve,
    density: &DensitySpec,
) -> Result<Vec<f64>, CurveError> {
    let velocities = curvature_density_vector(curve, density)?;
    let n = curve.nodes.len();
    let rho = curve.sphere_radius;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = &curve.nodes[(i + n - 1) % n];
        let here = &curve.nodes[i];
        let next = &curve.nodes[(i + 1) % n];
        let k = match curve_normal(curve, i, prev, here, next) {
            Some(nu) => velocities[i].dot(&nu) * rho,
            None => velocities[i].norm() * rho,
        };
        out.push(k);
    }
    Ok(out)
}

/// One explicit Euler step of size `dt_tilde` under the default CFL bound.
pub fn flow_step(
    curve: &SphericalCurve,
    density: &DensitySpec,
    dt_tilde: f64,
) -> Result<SphericalCurve, CurveError> {
    flow_step_with_cfl(curve, density, dt_tilde, DEFAULT_CFL)
}

/// Euler step checked against `dt ≤ cfl · (min gap · ρ)²`.
pub fn flow_step_with_cfl(
    curve: &SphericalCurve,
    density: &DensitySpec,
    dt_tilde: f64,
    cfl: f64,
) -> Result<SphericalCurve, CurveError> {
    let gaps = curve.gaps();
    let g_min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let scaled = g_min * curve.sphere_radius;
    let bound = cfl * scaled * scaled;
    if dt_tilde > bound * (1.0 + 1e-12) {
        return Err(CurveError::CflViolation {
            dt: dt_tilde,
            bound,
        });
    }
    let velocities = curvature_with_gaps(curve, density, &gaps)?;
    Ok(advance_nodes(curve, &velocities, dt_tilde))
}

fn advance_nodes(curve: &SphericalCurve, velocities: &[Vector3<f64>], dt: f64) -> SphericalCurve {
    let nodes = curve
        .nodes
        .iter()
        .zip(velocities)
        .map(|(p, v)| (p + dt * v).normalize())
        .collect();
    SphericalCurve::with_side(nodes, curve.sphere_radius, curve.omega_side)
}

/// Resample the polygon at N equal arclength intervals by geodesic
/// interpolation along its own segments; node 0 stays anchored at s = 0.
///
/// Placement at equal arclength along the old polygon leaves the new geodesic
/// gaps unequal by the corner-cut defect, so the pass is iterated until the
/// gaps agree; an already-uniform curve is a fixed point.
pub fn reparametrize_arclength(curve: &SphericalCurve) -> SphericalCurve {
    let mut current = resample_once(curve);
    for _ in 0..4 {
        let gaps = current.gaps();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let spread = gaps
            .iter()
            .map(|g| (g - mean).abs())
            .fold(0.0f64, f64::max);
        if spread <= 1e-9 * mean {
            break;
        }
        current = resample_once(&current);
    }
    current
}

fn resample_once(curve: &SphericalCurve) -> SphericalCurve {
    let n = curve.nodes.len();
    let gaps = curve.gaps();
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    for g in &gaps {
        cumulative.push(cumulative.last().unwrap() + g);
    }
    let total = cumulative[n];
    let mut nodes = Vec::with_capacity(n);
    let mut seg = 0usize;
    for i in 0..n {
        let target = total * i as f64 / n as f64;
        while seg + 1 < n && cumulative[seg + 1] < target {
            seg += 1;
        }
        let g = gaps[seg];
        let frac = if g > 0.0 {
            ((target - cumulative[seg]) / g).clamp(0.0, 1.0)
        } else {
            0.0
        };
        nodes.push(slerp(&curve.nodes[seg], &curve.nodes[(seg + 1) % n], frac));
    }
    SphericalCurve::with_side(nodes, curve.sphere_radius, curve.omega_side)
}

/// Area of the distinguished region Ω, scaled to the physical sphere.
/// Verifies embeddedness first; use [`SphericalCurve::omega_area`] inside
/// loops where embeddedness is checked separately.
pub fn enclosed_area(curve: &SphericalCurve) -> Result<f64, CurveError> {
    if !check_embedded(curve) {
        return Err(CurveError::NotEmbedded);
    }
    Ok(curve.omega_area())
}

/// Weighted length `Σ e^{ψ(midpoint)} · gap · ρ`.
pub fn weighted_length(curve: &SphericalCurve, density: &DensitySpec) -> f64 {
    weighted_length_with_gaps(curve, density, &curve.gaps())
}

fn weighted_length_with_gaps(curve: &SphericalCurve, density: &DensitySpec, gaps: &[f64]) -> f64 {
    if curve_psi_is_zero(density) {
        return gaps.iter().sum::<f64>() * curve.sphere_radius;
    }
    let n = curve.nodes.len();
    let mut total = 0.0;
    for i in 0..n {
        let mid = curve.nodes[i] + curve.nodes[(i + 1) % n];
        let mid = if mid.norm() > 1e-9 {
            mid.normalize()
        } else {
            curve.nodes[i]
        };
        total += density.psi(&mid).exp() * gaps[i];
    }
    total * curve.sphere_radius
}

/// True iff no two non-adjacent great-circle segments intersect.
pub fn check_embedded(curve: &SphericalCurve) -> bool {
    let n = curve.nodes.len();
    let poles: Vec<Vector3<f64>> = (0..n)
        .map(|i| curve.nodes[i].cross(&curve.nodes[(i + 1) % n]))
        .collect();
    for i in 0..n {
        let (a, b) = (&curve.nodes[i], &curve.nodes[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // wrap-adjacent
            }
            let (c, d) = (&curve.nodes[j], &curve.nodes[(j + 1) % n]);
            let s1 = poles[i].dot(c);
            let s2 = poles[i].dot(d);
            let s3 = poles[j].dot(a);
            let s4 = poles[j].dot(b);
            if s1 * s2 < 0.0 && s3 * s4 < 0.0 && (a + b).dot(&(c + d)) > 0.0 {
                return false;
            }
        }
    }
    true
}

/// Per-step observables of one curve.
#[derive(Debug, Clone)]
pub struct CurveDiagnostics {
    pub length: f64,
    pub weighted_length: f64,
    pub max_abs_k: f64,
    pub max_abs_k_psi: f64,
    pub enclosed_area: f64,
    pub area_fraction: f64,
    pub isoperimetric_ratio: f64,
    pub centroid: Vector3<f64>,
}

/// Compute all diagnostics; the curve is assumed embedded.
pub fn diagnostics(
    curve: &SphericalCurve,
    density: &DensitySpec,
) -> Result<CurveDiagnostics, CurveError> {
    let gaps = curve.gaps();
    let velocities = curvature_with_gaps(curve, density, &gaps)?;
    Ok(diagnostics_from_parts(curve, density, &gaps, &velocities))
}

fn diagnostics_from_parts(
    curve: &SphericalCurve,
    density: &DensitySpec,
    gaps: &[f64],
    velocities: &[Vector3<f64>],
) -> CurveDiagnostics {
    let rho = curve.sphere_radius;
    let n = curve.nodes.len();
    let mut max_k = 0.0f64;
    let mut max_k_psi = 0.0f64;
    let rho2 = rho * rho;
    for i in 0..n {
        let here = &curve.nodes[i];
        let prev = &curve.nodes[(i + n - 1) % n];
        let next = &curve.nodes[(i + 1) % n];
        let gm = gaps[(i + n - 1) % n];
        let gp = gaps[i];
        let d = ((next - here) / gp - (here - prev) / gm) * (2.0 / (gm + gp));
        let k_unit = d - d.dot(here) * here;
        max_k = max_k.max(k_unit.norm() / rho);
        max_k_psi = max_k_psi.max(velocities[i].norm() * rho2 / rho);
    }
    let length = gaps.iter().sum::<f64>() * rho;
    let area = curve.omega_area();
    let area_fraction = area / (4.0 * std::f64::consts::PI * rho2);
    let denom = area * (4.0 * std::f64::consts::PI - area / rho2);
    let isoperimetric_ratio = if denom > 0.0 {
        length * length / denom
    } else {
        f64::INFINITY
    };
    let mut centroid = Vector3::zeros();
    for i in 0..n {
        centroid += curve.nodes[i] * (gaps[(i + n - 1) % n] + gaps[i]);
    }
    let centroid = if centroid.norm() > 1e-9 {
        centroid.normalize()
    } else {
        curve.nodes[0]
    };
    CurveDiagnostics {
        length,
        weighted_length: weighted_length_with_gaps(curve, density, gaps),
        max_abs_k: max_k,
        max_abs_k_psi: max_k_psi,
        enclosed_area: area,
        area_fraction,
        isoperimetric_ratio,
        centroid,
    }
}

/// Outcome of scanning a recent diagnostics window.
#[derive(Debug, Clone, PartialEq)]
pub enum Detection {
    None,
    RoundPointCollapse { location: Vector3<f64> },
    PsiMinimalConvergence,
    CurvatureBlowup,
}

#[derive(Debug, Clone)]
pub struct SingularityOpts {
    /// Required history depth before any verdict.
    pub window: usize,
    /// Collapse length threshold; default `1e-3 · ρ`.
    pub len_eps: f64,
    /// ψ-minimality threshold on max |k_ψ|; default `1e-5 / ρ`.
    pub kpsi_eps: f64,
    /// Numerical-distress threshold on max|k| · length.
    pub blowup_ratio: f64,
}

impl SingularityOpts {
    pub fn for_radius(rho: f64) -> Self {
        Self {
            window: 50,
            len_eps: 1e-3 * rho,
            kpsi_eps: 1e-5 / rho,
            blowup_ratio: 1e3,
        }
    }
}

/// Classify the recent flow history. Returns `Detection::None` until the
/// history is at least `opts.window` entries deep.
pub fn detect_singularity(history: &[CurveDiagnostics], opts: &SingularityOpts) -> Detection {
    if history.len() < opts.window {
        return Detection::None;
    }
    let window = &history[history.len() - opts.window..];
    let last = window.last().unwrap();
    if last.length < opts.len_eps
        && last.isoperimetric_ratio >= 0.95
        && last.isoperimetric_ratio <= 1.05
    {
        return Detection::RoundPointCollapse {
            location: last.centroid,
        };
    }
    if window
        .iter()
        .all(|d| d.max_abs_k_psi < opts.kpsi_eps && d.length > 10.0 * opts.len_eps)
    {
        return Detection::PsiMinimalConvergence;
    }
    if last.max_abs_k * last.length > opts.blowup_ratio {
        return Detection::CurvatureBlowup;
    }
    Detection::None
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub cfl: f64,
    /// Arclength reparametrization cadence in steps; 0 disables.
    pub reparam_every: usize,
    /// Snapshot spacing in t̃; 0 picks target/40 (or 1.0 for open-ended runs).
    pub snapshot_every: f64,
    pub max_steps: usize,
    /// Store every k-th diagnostics record (the detection window always sees
    /// every step).
    pub diag_every: usize,
    /// Embeddedness verification cadence in steps; 0 disables.
    pub embed_check_every: usize,
    pub singularity: SingularityOpts,
}

impl FlowOptions {
    pub fn for_radius(rho: f64) -> Self {
        Self {
            cfl: DEFAULT_CFL,
            reparam_every: 25,
            snapshot_every: 0.0,
            max_steps: 2_000_000,
            diag_every: 1,
            embed_check_every: 0,
            singularity: SingularityOpts::for_radius(rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SphereHalt {
    ReachedTarget,
    Singular { detection: Detection, ttilde: f64 },
    StepBudget,
}

/// Record of one sphere-flow run.
#[derive(Debug, Clone)]
pub struct SphereFlowRecord {
    pub snapshots: Vec<(f64, SphericalCurve)>,
    pub diagnostics: Vec<(f64, CurveDiagnostics)>,
    pub halt: SphereHalt,
    pub steps: usize,
    pub ttilde_end: f64,
    /// t̃ values at which the Ω side crossed fraction 1/2 and was re-chosen.
    pub side_flips: Vec<f64>,
    /// Step indices at which the periodic embeddedness check failed.
    pub embed_violations: Vec<usize>,
}

impl SphereFlowRecord {
    pub fn final_curve(&self) -> &SphericalCurve {
        &self.snapshots.last().unwrap().1
    }

    /// Index of the stored snapshot closest in t̃.
    pub fn nearest_snapshot(&self, ttilde: f64) -> usize {
        let mut best = 0;
        let mut best_gap = f64::INFINITY;
        for (i, (tt, _)) in self.snapshots.iter().enumerate() {
            let gap = (tt - ttilde).abs();
            if gap < best_gap {
                best_gap = gap;
                best = i;
            }
        }
        best
    }
}

/// Advance the ψMCF on the fixed sphere until `ttilde_target` (may be
/// `f64::INFINITY`), a detected singularity/convergence, or the step budget.
pub fn run_sphere_flow(
    initial: &SphericalCurve,
    density: &DensitySpec,
    ttilde_target: f64,
    opts: &FlowOptions,
) -> Result<SphereFlowRecord, CurveError> {
    if ttilde_target < 0.0 {
        return Err(CurveError::Invalid("negative t̃ target".into()));
    }
    let snap_dt = if opts.snapshot_every > 0.0 {
        opts.snapshot_every
    } else if ttilde_target.is_finite() && ttilde_target > 0.0 {
        ttilde_target / 40.0
    } else {
        1.0
    };

    let mut curve = initial.clone();
    let mut tt = 0.0;
    let mut steps = 0usize;
    let mut window: VecDeque<CurveDiagnostics> = VecDeque::with_capacity(opts.singularity.window);
    let mut record = SphereFlowRecord {
        snapshots: vec![(0.0, curve.clone())],
        diagnostics: Vec::new(),
        halt: SphereHalt::ReachedTarget,
        steps: 0,
        ttilde_end: 0.0,
        side_flips: Vec::new(),
        embed_violations: Vec::new(),
    };
    // Gaps and velocities describe the current curve; they feed both the next
    // Euler step and the diagnostics, so compute them once per state.
    let mut gaps = curve.gaps();
    let mut velocities = curvature_with_gaps(&curve, density, &gaps)?;
    let d0 = diagnostics_from_parts(&curve, density, &gaps, &velocities);
    record.diagnostics.push((0.0, d0.clone()));
    window.push_back(d0);
    let mut next_snapshot = snap_dt;

    let halt = loop {
        if tt >= ttilde_target * (1.0 - 1e-15) {
            break SphereHalt::ReachedTarget;
        }
        if steps >= opts.max_steps {
            break SphereHalt::StepBudget;
        }
        let g_min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let scaled = g_min * curve.sphere_radius;
        let mut dt = opts.cfl * scaled * scaled;
        if ttilde_target.is_finite() {
            dt = dt.min(ttilde_target - tt);
        }
        if !(dt > 0.0) {
            break SphereHalt::Singular {
                detection: Detection::CurvatureBlowup,
                ttilde: tt,
            };
        }
        curve = advance_nodes(&curve, &velocities, dt);
        steps += 1;
        tt += dt;
        if opts.reparam_every > 0 && steps % opts.reparam_every == 0 {
            curve = reparametrize_arclength(&curve);
        }
        gaps = curve.gaps();
        velocities = curvature_with_gaps(&curve, density, &gaps)?;

        let diag = diagnostics_from_parts(&curve, density, &gaps, &velocities);
        // Re-choose Ω if the tracked side crossed half the sphere.
        if diag.area_fraction > 0.5 + 1e-9 {
            curve.omega_side = match curve.omega_side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            };
            record.side_flips.push(tt);
        }
        if window.len() == opts.singularity.window {
            window.pop_front();
        }
        window.push_back(diag.clone());
        if opts.diag_every > 0 && steps % opts.diag_every == 0 {
            record.diagnostics.push((tt, diag));
        }
        if opts.embed_check_every > 0
            && steps % opts.embed_check_every == 0
            && !check_embedded(&curve)
        {
            record.embed_violations.push(steps);
        }
        if tt >= next_snapshot {
            record.snapshots.push((tt, curve.clone()));
            next_snapshot += snap_dt;
        }

        window.make_contiguous();
        let detection = detect_singularity(window.as_slices().0, &opts.singularity);
        if detection != Detection::None {
            break SphereHalt::Singular {
                detection,
                ttilde: tt,
            };
        }
    };

    if record.snapshots.last().map(|(t, _)| *t) != Some(tt) {
        record.snapshots.push((tt, curve.clone()));
    }
    if record.diagnostics.last().map(|(t, _)| *t) != Some(tt) {
        record
            .diagnostics
            .push((tt, diagnostics_from_parts(&curve, density, &gaps, &velocities)));
    }
    record.halt = halt;
    record.steps = steps;
    record.ttilde_end = tt;
    Ok(record)
}

/// Write a curve snapshot: first line `N rho`, then one `x y z` line per node,
/// 17 significant digits.
pub fn write_snapshot<W: Write>(out: &mut W, curve: &SphericalCurve) -> Result<(), CurveError> {
    writeln!(out, "{} {:.16e}", curve.len(), curve.sphere_radius())?;
    for p in curve.nodes() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(input: &mut R) -> Result<SphericalCurve, CurveError> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CurveError::SnapshotFormat("missing node count".into()))?;
    let rho: f64 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CurveError::SnapshotFormat("missing sphere radius".into()))?;
    let mut nodes = Vec::with_capacity(n);
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        input.read_line(&mut line)?;
        let mut xyz = line.split_whitespace().map(|s| s.parse::<f64>());
        let mut next = || -> Result<f64, CurveError> {
            xyz.next()
                .and_then(Result::ok)
                .ok_or_else(|| CurveError::SnapshotFormat(format!("bad node line {i}")))
        };
        nodes.push(Vector3::new(next()?, next()?, next()?));
    }
    SphericalCurve::new(nodes, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{AngularDensity, RadialDensity};
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    fn zero_density() -> DensitySpec {
        DensitySpec::uniform()
    }

    fn z_squared(amplitude: f64) -> DensitySpec {
        DensitySpec::new(
            RadialDensity::Uniform,
            AngularDensity::ZSquared { amplitude },
        )
    }

    #[test]
    fn latitude_circle_examples() {
        let great = make_latitude_circle(FRAC_PI_2, 512, 1.5).unwrap();
        assert_relative_eq!(
            enclosed_area(&great).unwrap(),
            2.0 * PI * 1.5 * 1.5,
            max_relative = 1e-10
        );
        for p in great.nodes() {
            assert!((p.norm() - 1.0).abs() < 1e-14);
        }

        let cap = make_latitude_circle(FRAC_PI_3, 512, 1.0).unwrap();
        assert_relative_eq!(enclosed_area(&cap).unwrap(), PI, epsilon = 2e-3);
        assert_eq!(cap.omega_side(), Side::Left);

        let tiny = make_latitude_circle(0.05, 512, 1.0).unwrap();
        let expected = 2.0 * PI * (1.0 - 0.05f64.cos());
        assert_relative_eq!(enclosed_area(&tiny).unwrap(), expected, max_relative = 0.05);
        assert_relative_eq!(enclosed_area(&tiny).unwrap(), PI * 0.05 * 0.05, max_relative = 0.05);
    }

    #[test]
    fn fourier_curve_examples() {
        let flat = make_fourier_curve(FRAC_PI_3, &[], &[], 128, 1.0).unwrap();
        let circle = make_latitude_circle(FRAC_PI_3, 128, 1.0).unwrap();
        for (a, b) in flat.nodes().iter().zip(circle.nodes()) {
            assert!((a - b).norm() < 1e-15);
        }

        let wavy = make_fourier_curve(FRAC_PI_3, &[0.0, 0.05], &[], 256, 1.0).unwrap();
        assert!(check_embedded(&wavy));

        let err = make_fourier_curve(FRAC_PI_3, &[0.0, 2.0], &[], 256, 1.0);
        assert!(matches!(err, Err(CurveError::NotEmbedded)));
    }

    #[test]
    fn curvature_of_great_circle_vanishes() {
        let curve = make_latitude_circle(FRAC_PI_2, 512, 1.0).unwrap();
        let v = curvature_density_vector(&curve, &zero_density()).unwrap();
        let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(max < 1e-10, "great circle velocity {max}");
    }

    #[test]
    fn curvature_of_latitude_circle_is_cot_theta() {
        let curve = make_latitude_circle(FRAC_PI_3, 512, 1.0).unwrap();
        let v = curvature_density_vector(&curve, &zero_density()).unwrap();
        let expected = 1.0 / FRAC_PI_3.tan();
        for x in &v {
            assert_relative_eq!(x.norm(), expected, epsilon = 1e-3);
        }
    }

    #[test]
    fn curvature_scales_inverse_square_with_radius() {
        let unit = make_latitude_circle(FRAC_PI_3, 256, 1.0).unwrap();
        let big = make_latitude_circle(FRAC_PI_3, 256, 3.0).unwrap();
        let v1 = curvature_density_vector(&unit, &zero_density()).unwrap();
        let v3 = curvature_density_vector(&big, &zero_density()).unwrap();
        assert_relative_eq!(v1[0].norm() / v3[0].norm(), 9.0, max_relative = 1e-10);
    }

    #[test]
    fn equator_with_z_squared_density_is_stationary() {
        let curve = make_latitude_circle(FRAC_PI_2, 512, 1.0).unwrap();
        let v = curvature_density_vector(&curve, &z_squared(1.0)).unwrap();
        let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(max < 1e-10, "equator velocity {max}");
    }

    #[test]
    fn velocity_is_tangent_to_sphere() {
        let curve = make_fourier_curve(FRAC_PI_3, &[0.03, 0.05], &[0.02], 256, 2.0).unwrap();
        let v = curvature_density_vector(&curve, &z_squared(0.7)).unwrap();
        for (p, x) in curve.nodes().iter().zip(&v) {
            assert!(x.dot(p).abs() <= 1e-10 * x.norm().max(1.0));
        }
    }

    #[test]
    fn flow_step_examples() {
        let density = zero_density();
        let great = make_latitude_circle(FRAC_PI_2, 256, 1.0).unwrap();
        let stepped = flow_step(&great, &density, 1e-6).unwrap();
        for (a, b) in great.nodes().iter().zip(stepped.nodes()) {
            assert!((a - b).norm() < 1e-14);
        }

        // One Euler step of a latitude circle shrinks the polar angle by
        // cot(θ0)·dt̃ at every node.
        let dt = 1e-5;
        let lat = make_latitude_circle(FRAC_PI_3, 512, 1.0).unwrap();
        let stepped = flow_step(&lat, &density, dt).unwrap();
        let expected = dt / FRAC_PI_3.tan();
        for p in stepped.nodes() {
            let theta = p.z.acos();
            assert_relative_eq!(FRAC_PI_3 - theta, expected, max_relative = 1e-2);
        }

        let equator = make_latitude_circle(FRAC_PI_2, 256, 1.0).unwrap();
        let held = flow_step(&equator, &z_squared(1.0), 1e-6).unwrap();
        for (a, b) in equator.nodes().iter().zip(held.nodes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn flow_step_rejects_cfl_violation() {
        let curve = make_latitude_circle(FRAC_PI_3, 64, 1.0).unwrap();
        let err = flow_step(&curve, &zero_density(), 1.0);
        assert!(matches!(err, Err(CurveError::CflViolation { .. })));
    }

    #[test]
    fn reparametrize_fixed_point_and_uniformity() {
        let uniform = make_latitude_circle(FRAC_PI_3, 128, 1.0).unwrap();
        let again = reparametrize_arclength(&uniform);
        for (a, b) in uniform.nodes().iter().zip(again.nodes()) {
            assert!((a - b).norm() < 1e-12);
        }

        // Cluster nodes by a lopsided azimuth map, then resample.
        let n = 128;
        let nodes: Vec<_> = (0..n)
            .map(|i| {
                let u = i as f64 / n as f64;
                let alpha = std::f64::consts::TAU * u * u;
                let st = FRAC_PI_3.sin();
                Vector3::new(st * alpha.cos(), st * alpha.sin(), FRAC_PI_3.cos())
            })
            .collect();
        let clustered = SphericalCurve::new(nodes, 1.0).unwrap();
        let resampled = reparametrize_arclength(&clustered);
        let gaps = resampled.gaps();
        let mean = gaps.iter().sum::<f64>() / n as f64;
        for g in &gaps {
            assert_relative_eq!(*g, mean, max_relative = 1e-8);
        }
    }

    #[test]
    fn reparametrize_preserves_length() {
        let curve = make_fourier_curve(FRAC_PI_3, &[0.0, 0.05], &[], 2048, 1.0).unwrap();
        let before = curve.length();
        let after = reparametrize_arclength(&curve).length();
        assert!(
            (after - before).abs() <= 1e-6 * before,
            "length drift {}",
            (after - before) / before
        );
        assert!(after <= before * (1.0 + 1e-14), "resampling must not lengthen");
    }

    #[test]
    fn weighted_length_examples() {
        let great = make_latitude_circle(FRAC_PI_2, 512, 1.0).unwrap();
        assert_relative_eq!(
            weighted_length(&great, &zero_density()),
            2.0 * PI,
            max_relative = 1e-4
        );
        let c = 0.7;
        let shifted = DensitySpec::new(
            RadialDensity::Uniform,
            AngularDensity::LatLonGrid(
                crate::space::LatLonGrid::new(vec![c; 4 * 8], 4, 8).unwrap(),
            ),
        );
        assert_relative_eq!(
            weighted_length(&great, &shifted),
            2.0 * PI * c.exp(),
            max_relative = 1e-4
        );
        assert_relative_eq!(
            weighted_length(&great, &z_squared(1.0)),
            2.0 * PI,
            max_relative = 1e-4
        );
    }

    #[test]
    fn embeddedness_oracle() {
        let lat = make_latitude_circle(FRAC_PI_3, 128, 1.0).unwrap();
        assert!(check_embedded(&lat));

        // Build the figure-eight-like projection directly (the constructor
        // would reject it).
        let n = 256;
        let nodes: Vec<_> = (0..n)
            .map(|i| {
                let alpha = std::f64::consts::TAU * i as f64 / n as f64;
                let theta = FRAC_PI_3 + 2.0 * (2.0 * alpha).cos();
                Vector3::new(
                    theta.sin() * alpha.cos(),
                    theta.sin() * alpha.sin(),
                    theta.cos(),
                )
            })
            .collect();
        let eight = SphericalCurve::new(nodes, 1.0).unwrap();
        assert!(!check_embedded(&eight));
        assert!(matches!(enclosed_area(&eight), Err(CurveError::NotEmbedded)));

        let perturbed = make_fourier_curve(FRAC_PI_3, &[0.02], &[0.03], 128, 1.0).unwrap();
        assert!(check_embedded(&perturbed));
    }

    #[test]
    fn singularity_detection_cases() {
        let opts = SingularityOpts::for_radius(1.0);
        let base = CurveDiagnostics {
            length: 2.0 * PI,
            weighted_length: 2.0 * PI,
            max_abs_k: 0.0,
            max_abs_k_psi: 0.0,
            enclosed_area: 2.0 * PI,
            area_fraction: 0.5,
            isoperimetric_ratio: 1.0,
            centroid: Vector3::z(),
        };

        // Fresh history: too few entries for any verdict.
        let fresh = vec![base.clone(); 5];
        assert_eq!(detect_singularity(&fresh, &opts), Detection::None);

        // Shrinking circle ending below the length threshold at ratio ≈ 1.
        let mut shrinking = Vec::new();
        for i in 0..60 {
            let mut d = base.clone();
            d.length = 2.0 * PI * (1.0 - i as f64 / 59.0) + 1e-4;
            d.max_abs_k_psi = 1.0 / d.length;
            d.isoperimetric_ratio = 1.001;
            shrinking.push(d);
        }
        assert!(matches!(
            detect_singularity(&shrinking, &opts),
            Detection::RoundPointCollapse { .. }
        ));

        // Stationary ψ-minimal history.
        let mut minimal = base.clone();
        minimal.max_abs_k_psi = 1e-9;
        let history = vec![minimal; 50];
        assert_eq!(
            detect_singularity(&history, &opts),
            Detection::PsiMinimalConvergence
        );

        // Curvature blowup without collapse.
        let mut spiky = base.clone();
        spiky.max_abs_k = 1e4;
        spiky.max_abs_k_psi = 1e4;
        let history = vec![spiky; 50];
        assert_eq!(detect_singularity(&history, &opts), Detection::CurvatureBlowup);
    }

    #[test]
    fn flow_run_obeys_area_law_and_length_monotonicity() {
        // ψ ≡ 0 on the unit sphere: dA/dt̃ = −2π + A.
        let initial = make_latitude_circle(FRAC_PI_3, 512, 1.0).unwrap();
        let density = zero_density();
        let mut opts = FlowOptions::for_radius(1.0);
        opts.max_steps = 2000;
        let record = run_sphere_flow(&initial, &density, f64::INFINITY, &opts).unwrap();
        assert_eq!(record.halt, SphereHalt::StepBudget);

        let diags = &record.diagnostics;
        assert!(diags.len() > 1500);
        for w in diags.windows(2) {
            let (_, d0) = &w[0];
            let (_, d1) = &w[1];
            assert!(
                d1.weighted_length <= d0.weighted_length + 1e-10 * d0.weighted_length,
                "weighted length increased"
            );
            assert!(d1.area_fraction > 0.0 && d1.area_fraction <= 0.5 + 1e-9);
        }
        // Mean defect of the discrete area law over 100-step windows.
        let defects: Vec<f64> = diags
            .windows(2)
            .map(|w| {
                let (t0, d0) = &w[0];
                let (t1, d1) = &w[1];
                (d1.enclosed_area - d0.enclosed_area) / (t1 - t0)
                    - (-2.0 * PI + d0.enclosed_area)
            })
            .collect();
        for chunk in defects.chunks(100) {
            if chunk.len() < 100 {
                continue;
            }
            let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
            assert!(
                mean.abs() <= 0.01 * 2.0 * PI,
                "area law defect {mean} too large"
            );
        }
    }

    #[test]
    fn flow_run_collapses_cap_near_exact_time() {
        // Coarse version of the Gauss-Bonnet collapse: θ0 = π/3 on the unit
        // sphere collapses at t̃ = ln 2.
        let initial = make_latitude_circle(FRAC_PI_3, 128, 1.0).unwrap();
        let mut opts = FlowOptions::for_radius(1.0);
        opts.embed_check_every = 100;
        let record = run_sphere_flow(&initial, &zero_density(), f64::INFINITY, &opts).unwrap();
        match &record.halt {
            SphereHalt::Singular {
                detection: Detection::RoundPointCollapse { location },
                ttilde,
            } => {
                assert_relative_eq!(*ttilde, 2f64.ln(), max_relative = 0.05);
                assert_relative_eq!(location.z, 1.0, epsilon = 1e-3);
            }
            other => panic!("expected round-point collapse, got {other:?}"),
        }
        assert!(record.embed_violations.is_empty());
    }

    #[test]
    fn rotational_equivariance_about_z() {
        let density = z_squared(0.9);
        let initial = make_fourier_curve(FRAC_PI_3, &[0.04], &[0.02], 128, 1.0).unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.7);
        let rotated_nodes: Vec<_> = initial.nodes().iter().map(|p| rot * p).collect();
        let rotated = SphericalCurve::new(rotated_nodes, 1.0).unwrap();

        let dt = 1e-6;
        let step_then_rotate: Vec<_> = flow_step(&initial, &density, dt)
            .unwrap()
            .nodes()
            .iter()
            .map(|p| rot * p)
            .collect();
        let rotate_then_step = flow_step(&rotated, &density, dt).unwrap();
        for (a, b) in step_then_rotate.iter().zip(rotate_then_step.nodes()) {
            assert!((a - b).norm() < 1e-12, "equivariance broken by {}", (a - b).norm());
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let curve = make_fourier_curve(FRAC_PI_3, &[0.03], &[0.05], 64, 2.5).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &curve).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("64 "));
        let read = read_snapshot(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(read.len(), curve.len());
        assert_relative_eq!(read.sphere_radius(), 2.5, max_relative = 1e-15);
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let i = rng.gen_range(0..curve.len());
            assert!((read.nodes()[i] - curve.nodes()[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn curve_invariants_are_enforced() {
        assert!(matches!(
            make_latitude_circle(FRAC_PI_3, 8, 1.0),
            Err(CurveError::TooFewNodes(8))
        ));
        let mut nodes: Vec<Vector3<f64>> = (0..32)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 32.0;
                Vector3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        nodes[3] *= 1.5;
        assert!(matches!(
            SphericalCurve::new(nodes.clone(), 1.0),
            Err(CurveError::NotUnit { index: 3, .. })
        ));
        nodes[3] = nodes[3].normalize();
        nodes[5] = nodes[4];
        assert!(matches!(
            SphericalCurve::new(nodes, 1.0),
            Err(CurveError::DegenerateSpacing { .. })
        ));
    }
}
