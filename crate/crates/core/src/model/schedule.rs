use crate::error::{Error, Result};

/// Real coupling schedule `λ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `Σ_k c_k t^k`.
    Polynomial(Vec<f64>),
    /// `offset + amplitude·sin(ωt + phase)`.
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
        phase: f64,
        offset: f64,
    },
    /// Piecewise-linear through `(t, λ)` samples.
    Sampled(Vec<(f64, f64)>),
}

impl Schedule {
    pub fn is_constant(&self) -> bool {
        match self {
            Schedule::Constant(_) => true,
            Schedule::Polynomial(c) => c.iter().skip(1).all(|&x| x == 0.0),
            Schedule::Sinusoid {
                amplitude,
                angular_frequency,
                ..
            } => *amplitude == 0.0 || *angular_frequency == 0.0,
            Schedule::Sampled(s) => s.windows(2).all(|w| w[0].1 == w[1].1),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Schedule::Constant(c) => Ok(*c),
            Schedule::Polynomial(c) => Ok(c.iter().rev().fold(0.0, |acc, &x| acc * t + x)),
            Schedule::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
                offset,
            } => Ok(offset + amplitude * (angular_frequency * t + phase).sin()),
            Schedule::Sampled(s) => {
                if s.len() < 2 {
                    return Err(Error::domain("a sampled schedule needs at least two samples"));
                }
                let (t0, t1) = (s[0].0, s[s.len() - 1].0);
                if t < t0 || t > t1 {
                    return Err(Error::domain(format!(
                        "t = {t} outside sampled schedule range [{t0}, {t1}]"
                    )));
                }
                let k = s.partition_point(|(ts, _)| *ts <= t).saturating_sub(1).min(s.len() - 2);
                let (ta, va) = s[k];
                let (tb, vb) = s[k + 1];
                let w = (t - ta) / (tb - ta);
                Ok(va * (1.0 - w) + vb * w)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_horner() {
        let p = Schedule::Polynomial(vec![1.0, -2.0, 0.5]);
        assert_eq!(p.eval(2.0).unwrap(), 1.0 - 4.0 + 2.0);
        assert!(!p.is_constant());
        assert!(Schedule::Polynomial(vec![3.0]).is_constant());
    }

    #[test]
    fn sampled_schedule() {
        let s = Schedule::Sampled(vec![(0.0, 0.0), (1.0, 2.0)]);
        assert_eq!(s.eval(0.25).unwrap(), 0.5);
        assert!(s.eval(1.5).is_err());
    }

    #[test]
    fn sinusoid() {
        let s = Schedule::Sinusoid {
            amplitude: 2.0,
            angular_frequency: 1.0,
            phase: 0.0,
            offset: 1.0,
        };
        assert!((s.eval(std::f64::consts::FRAC_PI_2).unwrap() - 3.0).abs() < 1e-15);
    }
}
