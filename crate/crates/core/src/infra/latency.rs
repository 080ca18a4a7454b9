//! Latency distributions for links, gateways and feed jitter.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Pareto};
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Random component added on top of a model's constant base. All parameters
/// are in nanoseconds except the dimensionless shape parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Jitter {
    Constant,
    /// Integer-uniform on `[0, jitter_ns]`.
    UniformJitter { jitter_ns: u64 },
    Normal { mean_ns: f64, std_ns: f64 },
    /// `exp(N(mu, sigma))` nanoseconds.
    Lognormal { mu: f64, sigma: f64 },
    Pareto { scale_ns: f64, shape: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    #[serde(flatten)]
    pub jitter: Jitter,
    #[serde(default)]
    pub base_ns: u64,
    /// Constant extra delay for specific endpoints, keyed by endpoint name.
    #[serde(default)]
    pub port_offsets: BTreeMap<String, u64>,
}

impl LatencyModel {
    pub fn constant(base_ns: u64) -> Self {
        LatencyModel {
            jitter: Jitter::Constant,
            base_ns,
            port_offsets: BTreeMap::new(),
        }
    }

    pub fn uniform(base_ns: u64, jitter_ns: u64) -> Self {
        LatencyModel {
            jitter: Jitter::UniformJitter { jitter_ns },
            base_ns,
            port_offsets: BTreeMap::new(),
        }
    }

    pub fn with_port_offset(mut self, port: impl Into<String>, offset_ns: u64) -> Self {
        self.port_offsets.insert(port.into(), offset_ns);
        self
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.jitter, Jitter::Constant)
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match self.jitter {
            Jitter::Constant | Jitter::UniformJitter { .. } => Ok(()),
            Jitter::Normal { mean_ns, std_ns } => {
                finite("mean_ns", mean_ns)?;
                finite("std_ns", std_ns)?;
                if std_ns < 0.0 {
                    return Err("std_ns must be >= 0".into());
                }
                Ok(())
            }
            Jitter::Lognormal { mu, sigma } => {
                finite("mu", mu)?;
                finite("sigma", sigma)?;
                if sigma < 0.0 {
                    return Err("sigma must be >= 0".into());
                }
                Ok(())
            }
            Jitter::Pareto { scale_ns, shape } => {
                finite("scale_ns", scale_ns)?;
                finite("shape", shape)?;
                if scale_ns <= 0.0 || shape <= 0.0 {
                    return Err("scale_ns and shape must be > 0".into());
                }
                Ok(())
            }
        }
    }

    pub fn port_offset(&self, port: Option<&str>) -> u64 {
        port.and_then(|p| self.port_offsets.get(p)).copied().unwrap_or(0)
    }

    /// Draw one delay. Never negative: continuous draws are rounded to the
    /// nearest nanosecond and truncated at zero before the port offset is added.
    /// Constant models consume no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, port: Option<&str>, rng: &mut R) -> SimTime {
        let body = match self.jitter {
            Jitter::Constant => self.base_ns,
            Jitter::UniformJitter { jitter_ns } => self.base_ns + rng.random_range(0..=jitter_ns),
            Jitter::Normal { mean_ns, std_ns } => {
                let noise = Normal::new(mean_ns, std_ns).expect("validated").sample(rng);
                round_non_negative(self.base_ns as f64 + noise)
            }
            Jitter::Lognormal { mu, sigma } => {
                let noise = LogNormal::new(mu, sigma).expect("validated").sample(rng);
                round_non_negative(self.base_ns as f64 + noise)
            }
            Jitter::Pareto { scale_ns, shape } => {
                let noise = Pareto::new(scale_ns, shape).expect("validated").sample(rng);
                round_non_negative(self.base_ns as f64 + noise)
            }
        };
        SimTime::from_nanos(body + self.port_offset(port))
    }

    /// Smallest delay the model can produce on `port`.
    pub fn min_delay(&self, port: Option<&str>) -> SimTime {
        let body = match self.jitter {
            Jitter::Constant | Jitter::UniformJitter { .. } | Jitter::Lognormal { .. } => self.base_ns,
            Jitter::Normal { .. } => 0,
            Jitter::Pareto { scale_ns, .. } => round_non_negative(self.base_ns as f64 + scale_ns),
        };
        SimTime::from_nanos(body + self.port_offset(port))
    }
}

fn round_non_negative(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn constant_without_offsets_is_fixed() {
        let m = LatencyModel::constant(10_000);
        let mut rng = RngStream::new(1, "t");
        for _ in 0..100 {
            assert_eq!(m.sample(None, &mut rng), SimTime::from_micros(10));
        }
    }

    #[test]
    fn port_offset_is_additive() {
        let m = LatencyModel::constant(100).with_port_offset("A", 1_000_000);
        let mut rng = RngStream::new(1, "t");
        assert_eq!(m.sample(Some("A"), &mut rng).as_nanos(), 1_000_100);
        assert_eq!(m.sample(Some("B"), &mut rng).as_nanos(), 100);
        assert_eq!(m.min_delay(Some("A")).as_nanos(), 1_000_100);
    }

    #[test]
    fn uniform_stays_in_range() {
        let m = LatencyModel::uniform(500, 2_000);
        let mut rng = RngStream::new(3, "t");
        for _ in 0..10_000 {
            let d = m.sample(None, &mut rng).as_nanos();
            assert!((500..=2_500).contains(&d));
        }
    }

    #[test]
    fn normal_truncates_at_zero() {
        let m = LatencyModel {
            jitter: Jitter::Normal {
                mean_ns: -1_000.0,
                std_ns: 10.0,
            },
            base_ns: 0,
            port_offsets: BTreeMap::new(),
        };
        let mut rng = RngStream::new(3, "t");
        assert!((0..1000).all(|_| m.sample(None, &mut rng) == SimTime::ZERO));
    }

    #[test]
    fn heavy_tails_respect_floor() {
        let models = [
            LatencyModel {
                jitter: Jitter::Lognormal { mu: 6.0, sigma: 1.5 },
                base_ns: 1_000,
                port_offsets: BTreeMap::new(),
            },
            LatencyModel {
                jitter: Jitter::Pareto {
                    scale_ns: 200.0,
                    shape: 1.5,
                },
                base_ns: 1_000,
                port_offsets: BTreeMap::new(),
            },
        ];
        let mut rng = RngStream::new(9, "t");
        for m in &models {
            m.validate().unwrap();
            let floor = m.min_delay(None);
            assert!((0..5_000).all(|_| m.sample(None, &mut rng) >= floor));
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad = LatencyModel {
            jitter: Jitter::Pareto {
                scale_ns: 0.0,
                shape: 1.0,
            },
            base_ns: 0,
            port_offsets: BTreeMap::new(),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let m: LatencyModel =
            serde_json::from_str(r#"{"kind":"uniform-jitter","base_ns":10000,"jitter_ns":2000}"#).unwrap();
        assert_eq!(m, LatencyModel::uniform(10_000, 2_000));
        let back = serde_json::to_value(&m).unwrap();
        assert_eq!(back["kind"], "uniform-jitter");
        assert_eq!(back["port_offsets"], serde_json::json!({}));
    }
}
