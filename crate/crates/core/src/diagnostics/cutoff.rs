use serde::{Deserialize, Serialize};

/// Radial cutoff `ψ(|y|)` used to localize integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CutoffProfile {
    /// `ψ ≡ 1`.
    Unit,
    /// `ψ = 1` on `B_{3ρ/4}`, `ψ = 0` outside `B_ρ`, quintic smoothstep between.
    Bump { radius: f64 },
}

fn smoothstep(t: f64) -> (f64, f64, f64) {
    let t = t.clamp(0.0, 1.0);
    let t2 = t * t;
    (
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    )
}

impl CutoffProfile {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            CutoffProfile::Unit => (1.0, 0.0, 0.0),
            CutoffProfile::Bump { radius } => {
                let w = 0.25 * radius;
                let t = (r - 0.75 * radius) / w;
                if t <= 0.0 {
                    return (1.0, 0.0, 0.0);
                }
                if t >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let (s, ds, dds) = smoothstep(t);
                (1.0 - s, -ds / w, -dds / (w * w))
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        self.eval(r).2
    }

    /// Radius beyond which `ψ = 0`.
    pub fn support(&self) -> f64 {
        match *self {
            CutoffProfile::Unit => f64::INFINITY,
            CutoffProfile::Bump { radius } => radius,
        }
    }

    pub fn id(&self) -> String {
        match *self {
            CutoffProfile::Unit => "unit".into(),
            CutoffProfile::Bump { radius } => format!("bump:{radius}"),
        }
    }
}

/// Cutoff together with the constants of the correction `C e^{-c/s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffSpec {
    pub profile: CutoffProfile,
    pub c_mono: f64,
    pub c_decay: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec {
            profile: CutoffProfile::Bump { radius: 1.0 },
            c_mono: 100.0,
            c_decay: 0.01,
        }
    }
}

impl CutoffSpec {
    /// `ψ ≡ 1` with no correction term.
    pub fn bare() -> Self {
        CutoffSpec {
            profile: CutoffProfile::Unit,
            c_mono: 0.0,
            c_decay: 0.01,
        }
    }

    pub fn correction(&self, s: f64) -> f64 {
        self.c_mono * (-self.c_decay / s).exp()
    }

    pub fn id(&self) -> String {
        format!("{}|C={}|c={}", self.profile.id(), self.c_mono, self.c_decay)
    }
}
