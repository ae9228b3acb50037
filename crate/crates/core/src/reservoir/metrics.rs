//! Scoring and order parameters.

use std::fmt;
use std::str::FromStr;

use super::ReservoirError;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Root-mean-square error divided by the population standard deviation of
/// the targets.
pub fn nrmse(predictions: &[f64], targets: &[f64]) -> Result<f64, ReservoirError> {
    if predictions.len() != targets.len() {
        return Err(ReservoirError::Invalid("predictions and targets differ in length"));
    }
    if targets.len() < 2 {
        return Err(ReservoirError::Invalid("nrmse needs at least two targets"));
    }
    let m = mean(targets);
    let var = targets.iter().map(|t| (t - m).powi(2)).sum::<f64>() / targets.len() as f64;
    if !(var > 0.0) {
        return Err(ReservoirError::Invalid("targets are constant"));
    }
    let mse = predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / targets.len() as f64;
    Ok((mse / var).sqrt())
}

/// Sample standard deviation over mean.
pub fn coefficient_of_variation(timings: &[f64]) -> Result<f64, ReservoirError> {
    if timings.len() < 2 {
        return Err(ReservoirError::Invalid("cv needs at least two samples"));
    }
    let m = mean(timings);
    if !(m > 0.0) {
        return Err(ReservoirError::Invalid("cv needs a positive mean"));
    }
    let var = timings.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (timings.len() - 1) as f64;
    Ok(var.sqrt() / m)
}

/// Shannon entropy of a `bins`-bin histogram over `[min, max]`, in units of
/// `log2(bins)`. All-equal windows score 0.
pub fn window_entropy(timings: &[f64], bins: usize) -> Result<f64, ReservoirError> {
    if bins < 2 {
        return Err(ReservoirError::Invalid("entropy needs at least two bins"));
    }
    if timings.is_empty() {
        return Err(ReservoirError::Invalid("entropy needs at least one sample"));
    }
    if timings.iter().any(|t| !t.is_finite()) {
        return Err(ReservoirError::Invalid("timings must be finite"));
    }
    let lo = timings.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = timings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &t in timings {
        let b = (((t - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = timings.len() as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    Ok((h / (bins as f64).log2()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Sync,
    Unclassified,
    Optimal,
    Overclock,
    Poisson,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Sync => "SYNC",
            Regime::Unclassified => "UNCLASSIFIED",
            Regime::Optimal => "OPTIMAL",
            Regime::Overclock => "OVERCLOCK",
            Regime::Poisson => "POISSON",
        })
    }
}

impl FromStr for Regime {
    type Err = ReservoirError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SYNC" => Ok(Regime::Sync),
            "UNCLASSIFIED" => Ok(Regime::Unclassified),
            "OPTIMAL" => Ok(Regime::Optimal),
            "OVERCLOCK" => Ok(Regime::Overclock),
            "POISSON" => Ok(Regime::Poisson),
            _ => Err(ReservoirError::Invalid("unknown regime label")),
        }
    }
}

/// CV bands: `[0, 0.2)` sync, `[0.4, 0.65)` optimal, `[0.65, 0.9)`
/// overclock, `>= 0.9` Poisson; the `[0.2, 0.4)` gap is unclassified.
pub fn classify_regime(cv: f64) -> Regime {
    match cv {
        c if c < 0.2 => Regime::Sync,
        c if c < 0.4 => Regime::Unclassified,
        c if c < 0.65 => Regime::Optimal,
        c if c < 0.9 => Regime::Overclock,
        c if c >= 0.9 => Regime::Poisson,
        _ => Regime::Unclassified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn nrmse_anchors() {
        let t = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(nrmse(&t, &t).unwrap(), 0.0);
        let m = [3.5; 4];
        assert!((nrmse(&m, &t).unwrap() - 1.0).abs() < 1e-15);
        let std = (t.iter().map(|x| (x - 3.5f64).powi(2)).sum::<f64>() / 4.0).sqrt();
        let shifted: Vec<f64> = t.iter().map(|x| x - 0.75).collect();
        assert!((nrmse(&shifted, &t).unwrap() - 0.75 / std).abs() < 1e-12);
        assert!(nrmse(&[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(nrmse(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn cv_values() {
        assert_eq!(coefficient_of_variation(&[5.0; 10]).unwrap(), 0.0);
        assert!((coefficient_of_variation(&[1.0, 3.0]).unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(coefficient_of_variation(&[-1.0, 1.0]).is_err());
        let rng = CounterRng::new(77);
        let xs: Vec<f64> = (0..10_000).map(|i| rng.exponential(i)).collect();
        // The sample CV of n exponentials has standard error about 1/sqrt(n).
        assert!((coefficient_of_variation(&xs).unwrap() - 1.0).abs() < 0.03);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(window_entropy(&[3.0; 9], 8).unwrap(), 0.0);
        let uniform: Vec<f64> = (0..8).map(|i| i as f64 + 0.5).collect();
        assert!((window_entropy(&uniform, 8).unwrap() - 1.0).abs() < 1e-12);
        let mut half = vec![0.5; 7];
        half.extend((1..8).map(|i| i as f64 + 0.5));
        let expected = (0.5 + 0.5 * 14f64.log2()) / 3.0;
        assert!((window_entropy(&half, 8).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.801_225_8).abs() < 1e-6);
        assert!(window_entropy(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn published_regime_rows() {
        assert_eq!(classify_regime(0.092), Regime::Sync);
        assert_eq!(classify_regime(0.586), Regime::Optimal);
        assert_eq!(classify_regime(0.71), Regime::Overclock);
        assert_eq!(classify_regime(0.98), Regime::Poisson);
        assert_eq!(classify_regime(0.3), Regime::Unclassified);
        for r in [Regime::Sync, Regime::Unclassified, Regime::Optimal, Regime::Overclock, Regime::Poisson] {
            assert_eq!(r.to_string().parse::<Regime>().unwrap(), r);
        }
    }
}
