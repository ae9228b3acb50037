use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::kv::{KvError, KvMap};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Kv(#[from] KvError),
}

/// Link between controller and device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub one_way_latency_mean_ns: f64,
    pub latency_jitter_sigma_ns: f64,
    /// Probability that one send/response attempt is lost.
    pub loss_probability: f64,
    pub retransmit_timeout_ns: u64,
    /// Attempts beyond the first before giving up on a job.
    pub max_retransmits: u32,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ChannelConfig {
    /// Zero latency, no loss.
    pub fn ideal() -> Self {
        Self {
            one_way_latency_mean_ns: 0.0,
            latency_jitter_sigma_ns: 0.0,
            loss_probability: 0.0,
            retransmit_timeout_ns: 1_000_000_000,
            max_retransmits: 32,
        }
    }

    /// Wired LAN: 200 us one way, 20 us jitter.
    pub fn lan() -> Self {
        Self { one_way_latency_mean_ns: 200_000.0, latency_jitter_sigma_ns: 20_000.0, ..Self::ideal() }
    }

    /// Congested 2.4 GHz link with 15% loss.
    pub fn wifi() -> Self {
        Self {
            one_way_latency_mean_ns: 2_000_000.0,
            latency_jitter_sigma_ns: 800_000.0,
            loss_probability: 0.15,
            retransmit_timeout_ns: 50_000_000,
            max_retransmits: 32,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.one_way_latency_mean_ns.is_finite() && self.one_way_latency_mean_ns >= 0.0) {
            return Err(ChannelError::Invalid("latency mean must be finite and non-negative"));
        }
        if !(self.latency_jitter_sigma_ns.is_finite() && self.latency_jitter_sigma_ns >= 0.0) {
            return Err(ChannelError::Invalid("latency jitter must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(ChannelError::Invalid("loss probability must lie in [0, 1)"));
        }
        if self.retransmit_timeout_ns == 0 {
            return Err(ChannelError::Invalid("retransmit timeout must be positive"));
        }
        Ok(())
    }

    /// Reads `channel.*` keys from a config map, leaving others untouched.
    pub fn take_from(kv: &mut KvMap, base: Self) -> Result<Self, ChannelError> {
        let c = Self {
            one_way_latency_mean_ns: kv.take_or("channel.latency_mean_ns", base.one_way_latency_mean_ns)?,
            latency_jitter_sigma_ns: kv.take_or("channel.latency_sigma_ns", base.latency_jitter_sigma_ns)?,
            loss_probability: kv.take_or("channel.loss", base.loss_probability)?,
            retransmit_timeout_ns: kv.take_or("channel.timeout_ns", base.retransmit_timeout_ns)?,
            max_retransmits: kv.take_or("channel.max_retransmits", base.max_retransmits)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_to(&self, kv: &mut KvMap) {
        kv.insert("channel.latency_mean_ns", self.one_way_latency_mean_ns);
        kv.insert("channel.latency_sigma_ns", self.latency_jitter_sigma_ns);
        kv.insert("channel.loss", self.loss_probability);
        kv.insert("channel.timeout_ns", self.retransmit_timeout_ns);
        kv.insert("channel.max_retransmits", self.max_retransmits);
    }

    /// Expected attempts per delivered job.
    pub fn expected_attempts(&self) -> f64 {
        1.0 / (1.0 - self.loss_probability)
    }
}

/// Which leg of an attempt was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Delivered,
    /// The job never reached the device.
    LostUplink,
    /// The device did the work but the response was dropped.
    LostDownlink,
}

/// Seeded sampler for one channel.
#[derive(Debug, Clone)]
pub struct Link {
    cfg: ChannelConfig,
    latency: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl Link {
    pub fn new(cfg: ChannelConfig, rng: ChaCha8Rng) -> Self {
        let latency = (cfg.latency_jitter_sigma_ns > 0.0)
            .then(|| Normal::new(cfg.one_way_latency_mean_ns, cfg.latency_jitter_sigma_ns).expect("validated sigma"));
        Self { cfg, latency, rng }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// One-way delay, `max(0, N(mean, sigma))` rounded to ns.
    pub fn delay(&mut self) -> u64 {
        let d = match &self.latency {
            Some(n) => n.sample(&mut self.rng),
            None => self.cfg.one_way_latency_mean_ns,
        };
        d.max(0.0).round() as u64
    }

    /// One Bernoulli draw per attempt; a lost attempt loses either leg with
    /// equal probability.
    pub fn fate(&mut self) -> Fate {
        if self.cfg.loss_probability > 0.0 && self.rng.random_bool(self.cfg.loss_probability) {
            if self.rng.random_bool(0.5) {
                Fate::LostUplink
            } else {
                Fate::LostDownlink
            }
        } else {
            Fate::Delivered
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn validation() {
        assert!(ChannelConfig::wifi().validate().is_ok());
        let mut c = ChannelConfig::ideal();
        c.loss_probability = 1.0;
        assert!(c.validate().is_err());
        let mut c = ChannelConfig::ideal();
        c.retransmit_timeout_ns = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn delays_are_clamped_at_zero() {
        let cfg =
            ChannelConfig { one_way_latency_mean_ns: 10.0, latency_jitter_sigma_ns: 1000.0, ..ChannelConfig::ideal() };
        let mut link = Link::new(cfg, stream(1, 1));
        let d: Vec<u64> = (0..1000).map(|_| link.delay()).collect();
        assert!(d.contains(&0));
        assert!(d.iter().any(|&x| x > 500));
    }

    #[test]
    fn loss_rate() {
        let mut link = Link::new(ChannelConfig::wifi(), stream(2, 1));
        let lost = (0..100_000).filter(|_| link.fate() != Fate::Delivered).count() as f64 / 1e5;
        assert!((lost - 0.15).abs() < 0.005, "{lost}");
    }

    #[test]
    fn kv_round_trip() {
        let mut kv = KvMap::default();
        ChannelConfig::wifi().write_to(&mut kv);
        assert_eq!(ChannelConfig::take_from(&mut kv, ChannelConfig::ideal()).unwrap(), ChannelConfig::wifi());
        kv.finish().unwrap();
    }
}
