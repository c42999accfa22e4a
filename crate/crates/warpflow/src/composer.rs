//! Assembly of the ambient flow from the radial trajectory and the sphere
//! flow via the time change, and classification of the flow's fate.
//!
//! The ambient solution through a spherical initial curve is the fixed-sphere
//! flow evaluated at `t̃(t)`, carried to radius `R(t)` by the radial geodesic;
//! in product coordinates that transport only changes the radial coordinate.
//! Classification reads the two terminal events side by side.

use crate::radial::{
    integrate_radial, RadialError, RadialOptions, RadialTrajectory, TerminalEvent, TtildeLimit,
};
use crate::space::{
    classify_conformal_type, ConformalMode, ConformalType, DensitySpec, SpaceError, WarpedSpace,
};
use crate::sphere_flow::{
    check_embedded, run_sphere_flow, CurveError, Detection, FlowOptions, SingularityOpts,
    SphereFlowRecord, SphereHalt, SphericalCurve, DEFAULT_CFL,
};
use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
}

/// Radial transport in product coordinates: the angular factor is untouched.
pub fn compose_point(sphere_point: &Vector3<f64>, radius: f64) -> (f64, Vector3<f64>) {
    debug_assert!(radius >= 0.0);
    (radius, *sphere_point)
}

/// Radius-independent sphere-flow tuning; resolved against ρ = w(r0) per run.
#[derive(Debug, Clone)]
pub struct FlowTuning {
    pub cfl: f64,
    pub reparam_every: usize,
    pub snapshot_every: f64,
    pub max_steps: usize,
    pub diag_every: usize,
    pub embed_check_every: usize,
    pub window: usize,
    pub len_eps_factor: f64,
    pub kpsi_eps_factor: f64,
    pub blowup_ratio: f64,
}

impl Default for FlowTuning {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            reparam_every: 25,
            snapshot_every: 0.0,
            max_steps: 2_000_000,
            diag_every: 1,
            embed_check_every: 0,
            window: 50,
            len_eps_factor: 1e-3,
            kpsi_eps_factor: 1e-5,
            blowup_ratio: 1e3,
        }
    }
}

impl FlowTuning {
    pub fn resolve(&self, rho: f64) -> FlowOptions {
        FlowOptions {
            cfl: self.cfl,
            reparam_every: self.reparam_every,
            snapshot_every: self.snapshot_every,
            max_steps: self.max_steps,
            diag_every: self.diag_every,
            embed_check_every: self.embed_check_every,
            singularity: SingularityOpts {
                window: self.window,
                len_eps: self.len_eps_factor * rho,
                kpsi_eps: self.kpsi_eps_factor / rho,
                blowup_ratio: self.blowup_ratio,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub t_budget: f64,
    pub radial: RadialOptions,
    pub flow: FlowTuning,
    /// Relative band for "collapse at exactly T̃" in the hyperbolic escape case.
    pub time_match_tol: f64,
}

impl SimOptions {
    pub fn new(t_budget: f64) -> Self {
        Self {
            t_budget,
            radial: RadialOptions::default(),
            flow: FlowTuning::default(),
            time_match_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ComposedSample {
    pub t: f64,
    pub r: f64,
    pub ttilde: f64,
    /// Index into the sphere-flow snapshot list, nearest in t̃.
    pub snapshot: usize,
}

/// Full record of one ambient flow run.
#[derive(Debug, Clone)]
pub struct AmbientFlowRun {
    pub radial: RadialTrajectory,
    pub sphere: SphereFlowRecord,
    pub composed: Vec<ComposedSample>,
    pub r0: f64,
    /// Canonical serialization of the configuration that produced this run.
    pub fingerprint: String,
}

/// Run the radial integration, drive the sphere flow up to the accumulated t̃
/// demand (without bound after radial equilibrium), and pair the samples.
pub fn simulate(
    space: &WarpedSpace,
    density: &DensitySpec,
    r0: f64,
    initial: &SphericalCurve,
    opts: &SimOptions,
) -> Result<AmbientFlowRun, SimError> {
    if r0 <= space.domain_floor() {
        return Err(SimError::Config(format!(
            "r0 = {r0} is at or below the domain floor"
        )));
    }
    if !(opts.t_budget > 0.0) {
        return Err(SimError::Config("t_budget must be positive".into()));
    }
    let rho = space.w(r0);
    if (initial.sphere_radius() - rho).abs() > 1e-9 * rho {
        return Err(SimError::Config(format!(
            "initial curve has sphere radius {} but w(r0) = {rho}",
            initial.sphere_radius()
        )));
    }
    if !check_embedded(initial) {
        return Err(SimError::Curve(CurveError::NotEmbedded));
    }

    let radial = integrate_radial(space, density, r0, opts.t_budget, &opts.radial)?;
    // After convergence to a B-minimal sphere the ambient flow continues at
    // fixed radius; let the sphere flow run until its own verdict.
    let target = match radial.terminal {
        TerminalEvent::RootConvergence { .. } => f64::INFINITY,
        _ => radial.ttilde_end(),
    };
    let sphere = run_sphere_flow(initial, density, target, &opts.flow.resolve(rho))?;

    // A sphere-flow collapse inside the covered range ends the ambient flow;
    // composed samples past it do not exist.
    let tt_cut = match &sphere.halt {
        SphereHalt::Singular {
            detection: Detection::RoundPointCollapse { .. },
            ttilde,
        } => *ttilde,
        _ => f64::INFINITY,
    };
    let composed = radial
        .samples
        .iter()
        .filter(|s| s.ttilde <= tt_cut)
        .map(|s| ComposedSample {
            t: s.t,
            r: s.r,
            ttilde: s.ttilde,
            snapshot: sphere.nearest_snapshot(s.ttilde.min(sphere.ttilde_end)),
        })
        .collect();

    Ok(AmbientFlowRun {
        radial,
        sphere,
        composed,
        r0,
        fingerprint: String::new(),
    })
}

/// Tags of the classified outcomes; string forms are stable identifiers used
/// in reports and the phase matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeTag {
    CollapseSphericalRoundPoint,
    CollapsePole,
    ConvergePsiMinimal,
    EscapeParabolicPsiMinimalAtInfinity,
    EscapeHyperbolicCurveAtInfinity,
    EscapeHyperbolicPointAtInfinity,
    Undetermined,
}

impl std::fmt::Display for OutcomeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::CollapseSphericalRoundPoint => "CollapseSphericalRoundPoint",
            Self::CollapsePole => "CollapsePole",
            Self::ConvergePsiMinimal => "ConvergePsiMinimal",
            Self::EscapeParabolicPsiMinimalAtInfinity => "EscapeParabolicPsiMinimalAtInfinity",
            Self::EscapeHyperbolicCurveAtInfinity => "EscapeHyperbolicCurveAtInfinity",
            Self::EscapeHyperbolicPointAtInfinity => "EscapeHyperbolicPointAtInfinity",
            Self::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

/// Limit of the pole blow-up, which the decomposition identifies with the
/// sphere flow itself.
#[derive(Debug, Clone, PartialEq)]
pub enum BlowupLimit {
    /// t̃ diverges: the rescaled flow subconverges to a ψ-minimal curve.
    PsiMinimal,
    /// The sphere flow collapses at its own maximal time.
    RoundPoint { location: Vector3<f64> },
    /// t̃ converges with the sphere flow still regular: the limit is the
    /// curve at the t̃ limit.
    CurveAtLimit,
}

#[derive(Debug, Clone)]
pub enum OutcomeKind {
    CollapseSphericalRoundPoint {
        t_end: f64,
        radius: f64,
        location: Vector3<f64>,
    },
    CollapsePole {
        t_end: f64,
        blowup_limit: BlowupLimit,
    },
    ConvergePsiMinimal {
        r_infinity: f64,
        limit: SphericalCurve,
    },
    EscapeParabolicPsiMinimalAtInfinity {
        limit: SphericalCurve,
    },
    EscapeHyperbolicCurveAtInfinity {
        curve: SphericalCurve,
    },
    EscapeHyperbolicPointAtInfinity {
        point: Vector3<f64>,
    },
    Undetermined {
        reason: String,
    },
}

/// Diagnostics trail attached to every classified outcome.
#[derive(Debug, Clone)]
pub struct Evidence {
    pub t_end: f64,
    pub ttilde_end: f64,
    pub r_end: f64,
    pub length_end: f64,
    pub area_fraction_end: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub kind: OutcomeKind,
    pub evidence: Evidence,
}

impl FlowOutcome {
    pub fn tag(&self) -> OutcomeTag {
        match &self.kind {
            OutcomeKind::CollapseSphericalRoundPoint { .. } => {
                OutcomeTag::CollapseSphericalRoundPoint
            }
            OutcomeKind::CollapsePole { .. } => OutcomeTag::CollapsePole,
            OutcomeKind::ConvergePsiMinimal { .. } => OutcomeTag::ConvergePsiMinimal,
            OutcomeKind::EscapeParabolicPsiMinimalAtInfinity { .. } => {
                OutcomeTag::EscapeParabolicPsiMinimalAtInfinity
            }
            OutcomeKind::EscapeHyperbolicCurveAtInfinity { .. } => {
                OutcomeTag::EscapeHyperbolicCurveAtInfinity
            }
            OutcomeKind::EscapeHyperbolicPointAtInfinity { .. } => {
                OutcomeTag::EscapeHyperbolicPointAtInfinity
            }
            OutcomeKind::Undetermined { .. } => OutcomeTag::Undetermined,
        }
    }
}

fn gather_evidence(run: &AmbientFlowRun, notes: Vec<String>) -> Evidence {
    let last_diag = run.sphere.diagnostics.last().map(|(_, d)| d);
    Evidence {
        t_end: run.radial.t_end(),
        ttilde_end: run.sphere.ttilde_end,
        r_end: run.radial.r_end(),
        length_end: last_diag.map(|d| d.length).unwrap_or(f64::NAN),
        area_fraction_end: last_diag.map(|d| d.area_fraction).unwrap_or(f64::NAN),
        notes,
    }
}

/// Ambient time at a t̃ possibly past the radial samples; beyond the sampled
/// range the radius is pinned at its terminal value, so t̃ grows linearly.
fn invert_extended(run: &AmbientFlowRun, space: &WarpedSpace, ttilde: f64) -> f64 {
    let tt_end = run.radial.ttilde_end();
    if ttilde <= tt_end {
        run.radial
            .invert_time_change(ttilde)
            .unwrap_or_else(|_| run.radial.t_end())
    } else {
        let ratio = space.w(run.radial.r_end()) / space.w(run.r0);
        run.radial.t_end() + (ttilde - tt_end) * ratio * ratio
    }
}

/// Classify a terminated run per the decision table combining the radial
/// terminal event, the sphere flow's verdict, and the conformal type.
pub fn classify_outcome(
    run: &AmbientFlowRun,
    space: &WarpedSpace,
    density: &DensitySpec,
    opts: &SimOptions,
) -> FlowOutcome {
    let mut notes = Vec::new();
    let undetermined = |reason: &str, notes: Vec<String>, run: &AmbientFlowRun| FlowOutcome {
        kind: OutcomeKind::Undetermined {
            reason: reason.to_string(),
        },
        evidence: gather_evidence(run, notes),
    };

    if let TerminalEvent::Budget { .. } = run.radial.terminal {
        return undetermined("radial time budget exhausted", notes, run);
    }
    if matches!(run.sphere.halt, SphereHalt::StepBudget) {
        return undetermined("sphere flow step budget exhausted", notes, run);
    }

    let tt_end = run.radial.ttilde_end();
    let tol = opts.time_match_tol;

    // Sphere-flow collapse strictly inside the covered t̃ range ends the
    // ambient flow at finite time on a sphere of positive radius.
    if let SphereHalt::Singular {
        detection: Detection::RoundPointCollapse { location },
        ttilde,
    } = &run.sphere.halt
    {
        if *ttilde < tt_end * (1.0 - tol) || matches!(run.radial.terminal, TerminalEvent::RootConvergence { .. })
        {
            let t_end = invert_extended(run, space, *ttilde);
            let radius = if *ttilde <= tt_end {
                run.radial.radius_at(t_end).unwrap_or(run.radial.r_end())
            } else {
                run.radial.r_end()
            };
            notes.push(format!(
                "sphere flow collapsed at t̃ = {ttilde} inside the covered range [0, {tt_end}]"
            ));
            return FlowOutcome {
                kind: OutcomeKind::CollapseSphericalRoundPoint {
                    t_end,
                    radius,
                    location: *location,
                },
                evidence: gather_evidence(run, notes),
            };
        }
    }
    if let SphereHalt::Singular {
        detection: Detection::CurvatureBlowup,
        ttilde,
    } = &run.sphere.halt
    {
        return undetermined(
            &format!("sphere flow hit numerical curvature blowup at t̃ = {ttilde}"),
            notes,
            run,
        );
    }

    match &run.radial.terminal {
        TerminalEvent::PoleHit { t_hit } => {
            if let SphereHalt::Singular {
                detection: Detection::RoundPointCollapse { .. },
                ttilde,
            } = &run.sphere.halt
            {
                return undetermined(
                    &format!(
                        "sphere collapse at t̃ = {ttilde} indistinguishable from the pole hit"
                    ),
                    notes,
                    run,
                );
            }
            let blowup_limit = pole_blowup_limit(run, density, tol, &mut notes);
            FlowOutcome {
                kind: OutcomeKind::CollapsePole {
                    t_end: *t_hit,
                    blowup_limit,
                },
                evidence: gather_evidence(run, notes),
            }
        }
        TerminalEvent::RootConvergence { r_star } => match &run.sphere.halt {
            SphereHalt::Singular {
                detection: Detection::PsiMinimalConvergence,
                ..
            } => FlowOutcome {
                kind: OutcomeKind::ConvergePsiMinimal {
                    r_infinity: *r_star,
                    limit: run.sphere.final_curve().clone(),
                },
                evidence: gather_evidence(run, notes),
            },
            other => undetermined(
                &format!("radial equilibrium at {r_star} but sphere flow halted as {other:?}"),
                notes,
                run,
            ),
        },
        TerminalEvent::Escape { r_reached } => {
            let b_ok = run.samples_have_negative_b(space, density);
            notes.push(if b_ok {
                format!("B < 0 verified on the sampled range [r0, {r_reached}]")
            } else {
                "warning: B changed sign on the escape range".to_string()
            });
            let conformal = escape_conformal_type(space, run.r0, &mut notes);
            match conformal {
                ConformalType::Parabolic => {
                    let growing = matches!(run.radial.ttilde_limit, TtildeLimit::Unbounded);
                    let converged = matches!(
                        run.sphere.halt,
                        SphereHalt::Singular {
                            detection: Detection::PsiMinimalConvergence,
                            ..
                        }
                    );
                    if growing && converged {
                        notes.push(
                            "liminf B finite checked numerically on the sampled range only"
                                .to_string(),
                        );
                        FlowOutcome {
                            kind: OutcomeKind::EscapeParabolicPsiMinimalAtInfinity {
                                limit: run.sphere.final_curve().clone(),
                            },
                            evidence: gather_evidence(run, notes),
                        }
                    } else if !growing {
                        undetermined(
                            "parabolic escape but the t̃ tail is not growing",
                            notes,
                            run,
                        )
                    } else {
                        undetermined(
                            "parabolic escape but the sphere flow has not reached a ψ-minimal state",
                            notes,
                            run,
                        )
                    }
                }
                ConformalType::Hyperbolic => {
                    let TtildeLimit::Finite(ttilde_lim) = run.radial.ttilde_limit else {
                        return undetermined(
                            "hyperbolic escape but the t̃ tail did not converge",
                            notes,
                            run,
                        );
                    };
                    notes.push(format!(
                        "limsup B ≠ 0 checked numerically on the sampled range only; T̃ ≈ {ttilde_lim}"
                    ));
                    match &run.sphere.halt {
                        SphereHalt::ReachedTarget
                        | SphereHalt::Singular {
                            detection: Detection::PsiMinimalConvergence,
                            ..
                        } => FlowOutcome {
                            kind: OutcomeKind::EscapeHyperbolicCurveAtInfinity {
                                curve: run.sphere.final_curve().clone(),
                            },
                            evidence: gather_evidence(run, notes),
                        },
                        SphereHalt::Singular {
                            detection: Detection::RoundPointCollapse { location },
                            ttilde,
                        } if (ttilde - ttilde_lim).abs() <= tol * ttilde_lim => FlowOutcome {
                            kind: OutcomeKind::EscapeHyperbolicPointAtInfinity {
                                point: *location,
                            },
                            evidence: gather_evidence(run, notes),
                        },
                        other => undetermined(
                            &format!("hyperbolic escape with unresolved sphere state {other:?}"),
                            notes,
                            run,
                        ),
                    }
                }
                ConformalType::Inconclusive => {
                    undetermined("conformal type inconclusive", notes, run)
                }
            }
        }
        TerminalEvent::Budget { .. } => unreachable!("handled above"),
    }
}

fn escape_conformal_type(
    space: &WarpedSpace,
    r0: f64,
    notes: &mut Vec<String>,
) -> ConformalType {
    let mode = if space.declared_tail().is_some() {
        ConformalMode::DeclaredAsymptotics
    } else {
        ConformalMode::NumericTail
    };
    match classify_conformal_type(space, r0, mode) {
        Ok(c) => {
            notes.push(format!("conformal type {c:?} via {mode:?}"));
            c
        }
        Err(e) => {
            notes.push(format!("conformal classification failed: {e}"));
            ConformalType::Inconclusive
        }
    }
}

fn pole_blowup_limit(
    run: &AmbientFlowRun,
    density: &DensitySpec,
    tol: f64,
    notes: &mut Vec<String>,
) -> BlowupLimit {
    let diverges = density.phi_extends_c1_to_zero()
        || matches!(run.radial.ttilde_limit, TtildeLimit::Unbounded);
    if diverges {
        if matches!(
            run.sphere.halt,
            SphereHalt::Singular {
                detection: Detection::PsiMinimalConvergence,
                ..
            }
        ) {
            notes.push("blow-up ψ-minimal limit confirmed by the sphere flow".to_string());
        } else {
            notes.push(
                "blow-up ψ-minimal limit predicted from the divergent t̃; the sphere flow \
                 stayed regular on the covered range"
                    .to_string(),
            );
        }
        return BlowupLimit::PsiMinimal;
    }
    match (&run.radial.ttilde_limit, &run.sphere.halt) {
        (
            TtildeLimit::Finite(lim),
            SphereHalt::Singular {
                detection: Detection::RoundPointCollapse { location },
                ttilde,
            },
        ) if (ttilde - lim).abs() <= tol * lim.abs().max(1e-300) => BlowupLimit::RoundPoint {
            location: *location,
        },
        _ => {
            notes.push("t̃ converges; the blow-up limit is the curve at the t̃ limit".to_string());
            BlowupLimit::CurveAtLimit
        }
    }
}

impl AmbientFlowRun {
    fn samples_have_negative_b(&self, space: &WarpedSpace, density: &DensitySpec) -> bool {
        self.radial.samples.iter().all(|s| {
            crate::space::eval_b(space, density, s.r)
                .map(|b| b < 0.0)
                .unwrap_or(false)
        })
    }
}

/// The blow-up at the pole re-indexed by t̃ — which the decomposition proves
/// is the sphere flow itself — together with its own limiting fate.
#[derive(Debug, Clone)]
pub struct BlowupFlow {
    pub snapshots: Vec<(f64, SphericalCurve)>,
    pub limit: BlowupLimit,
}

pub fn blowup_rescale(
    run: &AmbientFlowRun,
    density: &DensitySpec,
    opts: &SimOptions,
) -> Result<BlowupFlow, SimError> {
    if !matches!(run.radial.terminal, TerminalEvent::PoleHit { .. }) {
        return Err(SimError::Usage(format!(
            "blow-up rescaling requires a pole-hit run; terminal was {:?}",
            run.radial.terminal
        )));
    }
    let mut notes = Vec::new();
    let limit = pole_blowup_limit(run, density, opts.time_match_tol, &mut notes);
    Ok(BlowupFlow {
        snapshots: run.sphere.snapshots.clone(),
        limit,
    })
}
