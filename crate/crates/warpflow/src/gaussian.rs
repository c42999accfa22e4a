//! Closed-form solutions for Euclidean space with Gaussian radial density
//! `φ(r) = −½μ²r²` and ψ ≡ 0: the radius, the time change and its inverse,
//! the enclosed-area law, and the full outcome decision table. These are the
//! primary validation oracle for the simulator.

use crate::composer::OutcomeTag;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("t = {t} is past the pole-hit time {t_pole}")]
    PastSingularity { t: f64, t_pole: f64 },
    #[error("ttilde = {ttilde} is outside the valid range; the limit is {limit}")]
    TtildeOutOfRange { ttilde: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy)]
pub struct GaussianConfig {
    pub mu: f64,
    pub r0: f64,
    pub area_fraction0: f64,
}

impl GaussianConfig {
    pub fn new(mu: f64, r0: f64, area_fraction0: f64) -> Result<Self, GaussianError> {
        if !(mu > 0.0) || !(r0 > 0.0) {
            return Err(GaussianError::Invalid("mu and r0 must be positive".into()));
        }
        if !(area_fraction0 > 0.0 && area_fraction0 <= 0.5) {
            return Err(GaussianError::Invalid(
                "area_fraction0 must lie in (0, 1/2]".into(),
            ));
        }
        Ok(Self {
            mu,
            r0,
            area_fraction0,
        })
    }

    fn mr2(&self) -> f64 {
        self.mu * self.mu * self.r0 * self.r0
    }

    /// Pole-hit time, defined when μr0 < 1.
    pub fn pole_time(&self) -> Option<f64> {
        if self.mr2() < 1.0 {
            Some((1.0 / (1.0 - self.mr2())).ln() / (2.0 * self.mu * self.mu))
        } else {
            None
        }
    }

    /// Limit of t̃ as t → ∞, finite exactly when μr0 > 1.
    pub fn ttilde_limit(&self) -> Option<f64> {
        let m = self.mr2();
        if m > 1.0 {
            Some(0.5 * self.r0 * self.r0 * (m / (m - 1.0)).ln())
        } else {
            None
        }
    }
}

/// `R(t) = (1/μ)·√(1 + (μ²r0² − 1)e^{2μ²t})`.
pub fn r_exact(cfg: &GaussianConfig, t: f64) -> Result<f64, GaussianError> {
    let radicand = 1.0 + (cfg.mr2() - 1.0) * (2.0 * cfg.mu * cfg.mu * t).exp();
    if radicand < 0.0 {
        return Err(GaussianError::PastSingularity {
            t,
            t_pole: cfg.pole_time().unwrap(),
        });
    }
    Ok(radicand.sqrt() / cfg.mu)
}

/// `t̃(t) = (r0²/2)·ln(μ²r0²e^{2μ²t} / (1 + (μ²r0² − 1)e^{2μ²t}))`.
pub fn ttilde_exact(cfg: &GaussianConfig, t: f64) -> Result<f64, GaussianError> {
    let e = (2.0 * cfg.mu * cfg.mu * t).exp();
    let denom = 1.0 + (cfg.mr2() - 1.0) * e;
    if denom <= 0.0 {
        return Err(GaussianError::PastSingularity {
            t,
            t_pole: cfg.pole_time().unwrap(),
        });
    }
    Ok(0.5 * cfg.r0 * cfg.r0 * (cfg.mr2() * e / denom).ln())
}

/// Inverse of the time change:
/// `t(t̃) = (1/2μ²)·ln(e^{2t̃/r0²} / (μ²r0² − (μ²r0² − 1)e^{2t̃/r0²}))`.
pub fn t_exact(cfg: &GaussianConfig, ttilde: f64) -> Result<f64, GaussianError> {
    if ttilde < 0.0 {
        return Err(GaussianError::TtildeOutOfRange {
            ttilde,
            limit: cfg.ttilde_limit().unwrap_or(f64::INFINITY),
        });
    }
    let e = (2.0 * ttilde / (cfg.r0 * cfg.r0)).exp();
    let denom = cfg.mr2() - (cfg.mr2() - 1.0) * e;
    if denom <= 0.0 {
        return Err(GaussianError::TtildeOutOfRange {
            ttilde,
            limit: cfg.ttilde_limit().unwrap_or(f64::INFINITY),
        });
    }
    Ok((e / denom).ln() / (2.0 * cfg.mu * cfg.mu))
}

/// Enclosed area on the fixed sphere:
/// `A(t̃) = 2πr0² − (2πr0² − A0)·e^{t̃/r0²}`.
pub fn area_exact(cfg: &GaussianConfig, ttilde: f64) -> Result<f64, GaussianError> {
    let tmax = ttilde_max_exact(cfg);
    if ttilde > tmax {
        return Err(GaussianError::TtildeOutOfRange {
            ttilde,
            limit: tmax,
        });
    }
    let half = 2.0 * std::f64::consts::PI * cfg.r0 * cfg.r0;
    let a0 = cfg.area_fraction0 * 2.0 * half;
    Ok(half - (half - a0) * (ttilde / (cfg.r0 * cfg.r0)).exp())
}

/// Maximal time of the sphere flow: `T̃ = r0²·ln(2πr0²/(2πr0² − A0))`,
/// infinite exactly at the half-area equilibrium.
pub fn ttilde_max_exact(cfg: &GaussianConfig) -> f64 {
    if cfg.area_fraction0 == 0.5 {
        return f64::INFINITY;
    }
    let half = 2.0 * std::f64::consts::PI * cfg.r0 * cfg.r0;
    let a0 = cfg.area_fraction0 * 2.0 * half;
    cfg.r0 * cfg.r0 * (half / (half - a0)).ln()
}

/// Area-fraction threshold separating escape-to-a-curve from collapse when
/// μr0 > 1: `½(1 − √((μ²r0² − 1)/(μ²r0²)))`. For μr0 ≤ 1 the behavioural
/// boundary sits at the half-area equilibrium, fraction 1/2.
pub fn threshold_fraction(cfg: &GaussianConfig) -> f64 {
    let m = cfg.mr2();
    if m > 1.0 {
        0.5 * (1.0 - ((m - 1.0) / m).sqrt())
    } else {
        0.5
    }
}

/// Decision table of the Gaussian classification (ψ ≡ 0). Equality branches
/// are honoured exactly; the simulator can only approach them.
pub fn classify_gaussian_case(cfg: &GaussianConfig) -> OutcomeTag {
    let m = cfg.mr2();
    let f = cfg.area_fraction0;
    if m > 1.0 {
        let thr = threshold_fraction(cfg);
        if f > thr {
            OutcomeTag::EscapeHyperbolicCurveAtInfinity
        } else if f == thr {
            OutcomeTag::EscapeHyperbolicPointAtInfinity
        } else {
            OutcomeTag::CollapseSphericalRoundPoint
        }
    } else if m == 1.0 {
        if f == 0.5 {
            OutcomeTag::ConvergePsiMinimal
        } else {
            OutcomeTag::CollapseSphericalRoundPoint
        }
    } else if f == 0.5 {
        OutcomeTag::CollapsePole
    } else {
        OutcomeTag::CollapseSphericalRoundPoint
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn cfg(mu: f64, r0: f64, f: f64) -> GaussianConfig {
        GaussianConfig::new(mu, r0, f).unwrap()
    }

    #[test]
    fn r_exact_examples() {
        let unit = cfg(1.0, 1.0, 0.5);
        for t in [0.0, 0.4, 3.0] {
            assert_relative_eq!(r_exact(&unit, t).unwrap(), 1.0, max_relative = 1e-14);
        }
        let big = cfg(1.0, 2.0, 0.5);
        assert_relative_eq!(r_exact(&big, 0.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(
            r_exact(&big, 0.1).unwrap(),
            (1.0 + 3.0 * 0.2f64.exp()).sqrt(),
            max_relative = 1e-14
        );
        let small = cfg(1.0, 0.5, 0.5);
        let err = r_exact(&small, 10.0).unwrap_err();
        match err {
            GaussianError::PastSingularity { t_pole, .. } => {
                assert_relative_eq!(t_pole, 0.5 * (4f64 / 3.0).ln(), max_relative = 1e-14);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn time_change_examples_and_limit() {
        let unit = cfg(1.0, 1.0, 0.5);
        assert_eq!(ttilde_exact(&unit, 0.0).unwrap(), 0.0);
        for t in [0.3, 1.7] {
            assert_relative_eq!(ttilde_exact(&unit, t).unwrap(), t, max_relative = 1e-12);
        }
        let big = cfg(1.0, 2.0, 0.5);
        let limit = big.ttilde_limit().unwrap();
        assert_relative_eq!(limit, 2.0 * (4f64 / 3.0).ln(), max_relative = 1e-14);
        // At t = 30 the time change has saturated at its limit to f64 precision.
        assert_relative_eq!(ttilde_exact(&big, 30.0).unwrap(), limit, max_relative = 1e-12);
        assert!(ttilde_exact(&big, 2.0).unwrap() < limit);
        assert!(t_exact(&big, limit * 1.01).is_err());
    }

    #[test]
    fn time_change_inverse_round_trip() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..50 {
            let c = cfg(
                rng.gen_range(0.4..2.0),
                rng.gen_range(0.3..3.0),
                rng.gen_range(0.05..0.5),
            );
            // Stay away from the t̃ limit/pole, where the closed forms are
            // ill-conditioned in f64 regardless of the algebra.
            let t_cap = c.pole_time().map(|tp| 0.9 * tp).unwrap_or(0.5);
            let t: f64 = rng.gen_range(0.0..t_cap);
            let tt = ttilde_exact(&c, t).unwrap();
            assert_relative_eq!(t_exact(&c, tt).unwrap(), t, max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn area_examples() {
        let balanced = cfg(1.0, 1.0, 0.5);
        assert_eq!(ttilde_max_exact(&balanced), f64::INFINITY);
        assert_relative_eq!(
            area_exact(&balanced, 5.0).unwrap(),
            2.0 * PI,
            max_relative = 1e-14
        );

        let quarter = cfg(1.0, 1.0, 0.25);
        assert_relative_eq!(ttilde_max_exact(&quarter), 2f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(
            area_exact(&quarter, ttilde_max_exact(&quarter)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            area_exact(&quarter, 0.3).unwrap(),
            2.0 * PI - PI * 0.3f64.exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn threshold_and_classification_table() {
        let escape = cfg(1.0, 2.0, 0.2);
        assert_relative_eq!(
            threshold_fraction(&escape),
            0.5 * (1.0 - 3f64.sqrt() / 2.0),
            max_relative = 1e-14
        );
        assert_eq!(
            classify_gaussian_case(&escape),
            OutcomeTag::EscapeHyperbolicCurveAtInfinity
        );
        assert_eq!(
            classify_gaussian_case(&cfg(1.0, 2.0, 0.03)),
            OutcomeTag::CollapseSphericalRoundPoint
        );
        let thr = threshold_fraction(&escape);
        assert_eq!(
            classify_gaussian_case(&cfg(1.0, 2.0, thr)),
            OutcomeTag::EscapeHyperbolicPointAtInfinity
        );

        assert_eq!(
            classify_gaussian_case(&cfg(1.0, 1.0, 0.5)),
            OutcomeTag::ConvergePsiMinimal
        );
        assert_eq!(
            classify_gaussian_case(&cfg(1.0, 1.0, 0.2)),
            OutcomeTag::CollapseSphericalRoundPoint
        );
        assert_eq!(
            classify_gaussian_case(&cfg(1.0, 0.5, 0.5)),
            OutcomeTag::CollapsePole
        );
        assert_eq!(
            classify_gaussian_case(&cfg(1.0, 0.5, 0.3)),
            OutcomeTag::CollapseSphericalRoundPoint
        );
    }

    #[test]
    fn tag_flips_exactly_at_threshold() {
        let base = cfg(1.0, 2.0, 0.2);
        let thr = threshold_fraction(&base);
        let below = classify_gaussian_case(&cfg(1.0, 2.0, thr * (1.0 - 1e-6)));
        let above = classify_gaussian_case(&cfg(1.0, 2.0, thr * (1.0 + 1e-6)));
        assert_eq!(below, OutcomeTag::CollapseSphericalRoundPoint);
        assert_eq!(above, OutcomeTag::EscapeHyperbolicCurveAtInfinity);
    }

    #[test]
    fn closed_forms_satisfy_their_odes() {
        let mut rng = StdRng::seed_from_u64(17);
        let h = 1e-6;
        for _ in 0..50 {
            let c = cfg(
                rng.gen_range(0.5..1.5),
                rng.gen_range(0.4..2.5),
                rng.gen_range(0.1..0.5),
            );
            let t_cap = c.pole_time().map(|tp| 0.8 * tp).unwrap_or(1.5);
            let t: f64 = rng.gen_range(2.0 * h..t_cap.max(3.0 * h));

            // R' = −B(R) = −1/R + μ²R.
            let rp = (r_exact(&c, t + h).unwrap() - r_exact(&c, t - h).unwrap()) / (2.0 * h);
            let r = r_exact(&c, t).unwrap();
            assert_relative_eq!(rp, c.mu * c.mu * r - 1.0 / r, max_relative = 1e-8, epsilon = 1e-8);

            // t̃'(t) = (r0/R)².
            let tp = (ttilde_exact(&c, t + h).unwrap() - ttilde_exact(&c, t - h).unwrap())
                / (2.0 * h);
            assert_relative_eq!(tp, (c.r0 / r) * (c.r0 / r), max_relative = 1e-8);

            // A' = −2π + A/r0².
            let tt_cap = 0.8 * ttilde_max_exact(&c).min(2.0);
            if tt_cap > 2.0 * h {
                let tt: f64 = rng.gen_range(h..tt_cap);
                let ap = (area_exact(&c, tt + h).unwrap() - area_exact(&c, tt - h).unwrap())
                    / (2.0 * h);
                let a = area_exact(&c, tt).unwrap();
                assert_relative_eq!(
                    ap,
                    -2.0 * std::f64::consts::PI + a / (c.r0 * c.r0),
                    max_relative = 1e-8,
                    epsilon = 1e-8
                );
            }
        }
    }
}
