//! Smooth spring-damper normal law and velocity-dependent stick-slip friction.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalForceParams {
    /// Stiffness, N/m.
    pub k: f64,
    /// Damping, N·s/m.
    pub b: f64,
    /// Transition width, m.
    pub w: f64,
}

impl Default for NormalForceParams {
    fn default() -> Self {
        Self { k: 1e4, b: 1e3, w: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionParams {
    pub mu_s: f64,
    pub mu_d: f64,
    /// Sliding speed at which the effective coefficient peaks, m/s.
    pub v_crit: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self {
            mu_s: 0.7,
            mu_d: 0.5,
            v_crit: 1e-3,
        }
    }
}

/// Cubic smoothstep on `[0, 1]`, clamped outside.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * (3.0 - 2.0 * x)
    }
}

/// Transition factor s(d, w).
pub fn transition(depth: f64, width: f64) -> f64 {
    smoothstep(depth / width)
}

/// Normal force magnitude for penetration `depth` and penetration rate
/// `depth_rate` (positive when approaching). Never adhesive.
pub fn normal_force(depth: f64, depth_rate: f64, p: &NormalForceParams) -> f64 {
    if depth <= 0.0 {
        return 0.0;
    }
    (transition(depth, p.w) * (p.k * depth + p.b * depth_rate)).max(0.0)
}

/// Effective friction coefficient at sliding speed `v`.
///
/// Rises from 0 to `mu_s` at `v_crit` along a smoothstep, then relaxes
/// toward `mu_d` as `x·exp(1 − x)` with `x = v / v_crit`, which has zero slope
/// at the peak so value and slope are continuous everywhere.
pub fn effective_friction_coefficient(v: f64, p: &FrictionParams) -> Result<f64> {
    if v < 0.0 || v.is_nan() {
        return Err(Error::NegativeSpeed(v));
    }
    Ok(mu_unchecked(v, p))
}

pub(crate) fn mu_unchecked(v: f64, p: &FrictionParams) -> f64 {
    let x = v / p.v_crit;
    if x <= 1.0 {
        p.mu_s * smoothstep(x)
    } else {
        p.mu_d + (p.mu_s - p.mu_d) * x * (1.0 - x).exp()
    }
}

/// Friction force in the contact plane opposing the tangential slip `v_t`.
pub fn friction_force(f_n: f64, v_t: &Vector2<f64>, p: &FrictionParams) -> Vector2<f64> {
    let speed = v_t.norm();
    if speed <= 0.0 || f_n <= 0.0 {
        return Vector2::zeros();
    }
    -mu_unchecked(speed, p) * f_n / speed * v_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn normal_force_examples() {
        let p = NormalForceParams::default();
        assert_eq!(normal_force(0.0, 5.0, &p), 0.0);
        assert_eq!(normal_force(0.0, -5.0, &p), 0.0);
        assert_relative_eq!(normal_force(1e-3, 0.0, &p), 10.0, epsilon = 1e-12);
        assert_relative_eq!(normal_force(5e-4, 0.0, &p), 2.5, epsilon = 1e-12);
        assert_eq!(normal_force(1e-3, -20.0, &p), 0.0);
    }

    #[test]
    fn friction_coefficient_examples() {
        let p = FrictionParams::default();
        assert_eq!(effective_friction_coefficient(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(effective_friction_coefficient(1e-3, &p).unwrap(), 0.7, epsilon = 1e-15);
        let far = effective_friction_coefficient(100.0 * 1e-3, &p).unwrap();
        assert!((far - 0.5).abs() < 1e-9, "{far}");
        assert!(matches!(effective_friction_coefficient(-1.0, &p), Err(Error::NegativeSpeed(_))));
    }

    #[test]
    fn friction_force_examples() {
        let p = FrictionParams::default();
        assert_eq!(friction_force(10.0, &Vector2::zeros(), &p), Vector2::zeros());
        let f = friction_force(10.0, &Vector2::new(1e-3, 0.0), &p);
        assert_relative_eq!(f, Vector2::new(-7.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn friction_peak_is_global_maximum() {
        let p = FrictionParams::default();
        let peak = mu_unchecked(p.v_crit, &p);
        for i in 0..10_000 {
            let v = i as f64 * 1e-6;
            assert!(mu_unchecked(v, &p) <= peak + 1e-15);
        }
    }

    // Slopes on either side of each breakpoint agree, so no kink.
    #[test]
    fn laws_have_continuous_slope_at_breakpoints() {
        let np = NormalForceParams::default();
        let fp = FrictionParams::default();
        let slope = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| {
            let left = (f(x) - f(x - h)) / h;
            let right = (f(x + h) - f(x)) / h;
            (left, right)
        };
        let fn_d = |d: f64| normal_force(d, 0.0, &np);
        let (l, r) = slope(&fn_d, 0.0, 1e-9);
        assert!((l - r).abs() < 1e-3, "d=0: {l} vs {r}");
        // at d = w the smoothstep saturates; the k·d term stays smooth
        let (l, r) = slope(&fn_d, np.w, 1e-9);
        assert!((l - r).abs() / l.abs() < 1e-3, "d=w: {l} vs {r}");
        let mu = |v: f64| mu_unchecked(v.max(0.0), &fp);
        for v in [0.0, fp.v_crit] {
            // step well below v_crit so the O(h) truncation term stays small
            let (l, r) = slope(&mu, v, 1e-11);
            assert!((l - r).abs() < 1e-3 * (1.0 + l.abs()), "v={v}: {l} vs {r}");
        }
    }

    proptest! {
        #[test]
        fn friction_dissipates_and_respects_cone(
            f_n in 0.0f64..50.0,
            vx in -1.0f64..1.0,
            vy in -1.0f64..1.0,
        ) {
            let p = FrictionParams::default();
            let v = Vector2::new(vx, vy);
            let f = friction_force(f_n, &v, &p);
            prop_assert!(f.dot(&v) <= 0.0);
            prop_assert!(f.norm() <= p.mu_s * f_n + 1e-9);
        }

        #[test]
        fn normal_force_is_never_adhesive(d in -0.01f64..0.01, rate in -50.0f64..50.0) {
            prop_assert!(normal_force(d, rate, &NormalForceParams::default()) >= 0.0);
        }

        #[test]
        fn normal_force_is_continuous_on_dense_grid(d in 0.0f64..3e-3) {
            let p = NormalForceParams::default();
            let h = 1e-10;
            let jump = (normal_force(d + h, 0.0, &p) - normal_force(d, 0.0, &p)).abs();
            // Lipschitz bound: k·(1 + 1.5·d/w) per unit depth
            prop_assert!(jump <= h * p.k * (1.0 + 1.5 * (d + h) / p.w) + 1e-12);
        }

        #[test]
        fn friction_coefficient_is_continuous_on_dense_grid(v in 0.0f64..0.01) {
            let p = FrictionParams::default();
            let h = 1e-10;
            let jump = (mu_unchecked(v + h, &p) - mu_unchecked(v, &p)).abs();
            prop_assert!(jump <= h * 1.5 * p.mu_s / p.v_crit + 1e-12);
        }
    }
}
