use crate::error::{Error, Result};
use crate::Vec3;

/// Magnetic field `B(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldProfile {
    Constant(Vec3),
    /// `B(t) = b (sinθ cos ωt, sinθ sin ωt, cosθ)`.
    RotatingCone {
        magnitude: f64,
        cone_angle: f64,
        angular_frequency: f64,
    },
    /// `B(t) = B₀ + t·B₁`.
    LinearSweep { b0: Vec3, b1: Vec3 },
    /// Piecewise-linear through time-stamped samples.
    Samples(Vec<(f64, Vec3)>),
}

impl FieldProfile {
    pub fn rotating_cone(magnitude: f64, cone_angle: f64, angular_frequency: f64) -> Result<Self> {
        let f = FieldProfile::RotatingCone {
            magnitude,
            cone_angle,
            angular_frequency,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn samples(samples: Vec<(f64, Vec3)>) -> Result<Self> {
        let f = FieldProfile::Samples(samples);
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FieldProfile::Constant(b) => finite3(b),
            FieldProfile::RotatingCone {
                magnitude,
                cone_angle,
                angular_frequency,
            } => {
                if !(magnitude.is_finite() && *magnitude > 0.0) {
                    return Err(Error::domain("rotating-cone magnitude must be positive"));
                }
                if !(0.0..=std::f64::consts::PI).contains(cone_angle) {
                    return Err(Error::domain("rotating-cone angle must lie in [0, π]"));
                }
                if !angular_frequency.is_finite() {
                    return Err(Error::domain("rotating-cone frequency must be finite"));
                }
                Ok(())
            }
            FieldProfile::LinearSweep { b0, b1 } => {
                finite3(b0)?;
                finite3(b1)
            }
            FieldProfile::Samples(s) => {
                if s.len() < 2 {
                    return Err(Error::domain("a sampled field needs at least two samples"));
                }
                if s.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::domain("field sample times must be strictly increasing"));
                }
                for (t, b) in s {
                    if !t.is_finite() {
                        return Err(Error::domain("non-finite sample time"));
                    }
                    finite3(b)?;
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec3> {
        match self {
            FieldProfile::Constant(b) => Ok(*b),
            FieldProfile::RotatingCone {
                magnitude,
                cone_angle,
                angular_frequency,
            } => {
                let (st, ct) = cone_angle.sin_cos();
                let (sw, cw) = (angular_frequency * t).sin_cos();
                Ok(Vec3::new(st * cw, st * sw, ct) * *magnitude)
            }
            FieldProfile::LinearSweep { b0, b1 } => Ok(b0 + b1 * t),
            FieldProfile::Samples(s) => {
                let (t0, t1) = (s[0].0, s[s.len() - 1].0);
                if t < t0 || t > t1 {
                    return Err(Error::domain(format!(
                        "t = {t} outside sampled field range [{t0}, {t1}]"
                    )));
                }
                let k = s.partition_point(|(ts, _)| *ts <= t).saturating_sub(1).min(s.len() - 2);
                let (ta, ba) = s[k];
                let (tb, bb) = s[k + 1];
                let w = (t - ta) / (tb - ta);
                Ok(ba * (1.0 - w) + bb * w)
            }
        }
    }

    /// Interval on which the profile can be evaluated.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            FieldProfile::Samples(s) => (s[0].0, s[s.len() - 1].0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Period of a rotating cone with nonzero frequency.
    pub fn period(&self) -> Option<f64> {
        match self {
            FieldProfile::RotatingCone {
                angular_frequency, ..
            } if *angular_frequency != 0.0 => Some(2.0 * std::f64::consts::PI / angular_frequency.abs()),
            _ => None,
        }
    }

    /// Default `R(0)`: unit vector along `B(0)`, or `e₃` when `B(0) = 0`.
    pub fn default_r0(&self, t0: f64) -> Result<Vec3> {
        let b = self.eval(t0)?;
        let n = b.norm();
        Ok(if n > 0.0 { b / n } else { Vec3::new(0.0, 0.0, 1.0) })
    }

    /// Unit `R(t₀)` whose transport closes after one period (co-rotating
    /// solution). Available for constant fields and rotating cones.
    ///
    /// For the cone, `R(t) = Rot_z(ωt)·r` solves `Ṙ = B×R` iff
    /// `(B(0) − ω e₃) × r = 0`.
    pub fn cyclic_r0(&self, t0: f64) -> Option<Vec3> {
        match self {
            FieldProfile::Constant(b) => {
                let n = b.norm();
                (n > 0.0).then(|| b / n)
            }
            FieldProfile::RotatingCone {
                angular_frequency, ..
            } => {
                let b = self.eval(t0).ok()?;
                let axis = b - Vec3::new(0.0, 0.0, *angular_frequency);
                let n = axis.norm();
                (n > 1e-14).then(|| axis / n)
            }
            _ => None,
        }
    }
}

fn finite3(v: &Vec3) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain("field vector has non-finite components"))
    }
}
