//! Small tanh network, 3 -> 16 -> 8 -> 4 -> 2 with a softmax output.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use super::TpfError;
use crate::rng::{purpose, stream};
use crate::sha_twin::{FeatureScaler, Features, FEATURE_COUNT};

pub const LAYER_SIZES: [usize; 5] = [FEATURE_COUNT, 16, 8, 4, 2];
/// Weights plus biases implied by [`LAYER_SIZES`].
pub const PARAMETER_COUNT: usize = 246;
const FORMAT_HEADER: &str = "silicon-classifier 1";

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major, `outputs x inputs`.
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, w: vec![0.0; inputs * outputs], b: vec![0.0; outputs] }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { epochs: 60, batch_size: 64, learning_rate: 0.01, seed: 0 }
    }
}

/// A training example: raw features and whether the job met its target.
pub type Example = (Features, bool);

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    layers: Vec<Layer>,
    scaler: FeatureScaler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub classifier: Classifier,
    /// Mean cross-entropy before the first update.
    pub initial_loss: f64,
    pub final_loss: f64,
}

fn softmax2(z: &[f64]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let (a, b) = ((z[0] - m).exp(), (z[1] - m).exp());
    [a / (a + b), b / (a + b)]
}

impl Classifier {
    /// All weights zero; every input scores `(0.5, 0.5)`.
    pub fn zeros() -> Self {
        let layers = LAYER_SIZES.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self { layers, scaler: FeatureScaler::default() }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(seed: u64, scaler: FeatureScaler) -> Self {
        let mut rng = stream(seed, purpose::INIT);
        let mut c = Self::zeros();
        for l in &mut c.layers {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut l.w {
                *w = rng.random_range(-limit..limit);
            }
        }
        c.scaler = scaler;
        c
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flattened parameters, layer by layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), TpfError> {
        if p.len() != self.parameter_count() {
            return Err(TpfError::Arity { expected: self.parameter_count(), got: p.len() });
        }
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Forward pass on standardized input; returns activations per layer
    /// (input first, softmax output last).
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut z = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.apply(acts.last().expect("non-empty"), &mut z);
            if i + 1 == self.layers.len() {
                acts.push(softmax2(&z).to_vec());
            } else {
                acts.push(z.iter().map(|v| v.tanh()).collect());
            }
        }
        acts
    }

    /// Scores for already standardized features.
    pub fn scores_standardized(&self, x: &Features) -> (f64, f64) {
        let out = self.forward(x);
        let p = out.last().expect("output layer");
        (p[0], p[1])
    }

    /// `(P(share), P(no share))` for raw features.
    pub fn score(&self, raw: &Features) -> (f64, f64) {
        self.scores_standardized(&self.scaler.apply(raw))
    }

    /// Accumulates the cross-entropy gradient of one example into `grad`
    /// and returns its loss.
    fn backprop(&self, x: &Features, success: bool, grad: &mut [f64]) -> f64 {
        let acts = self.forward(x);
        let target = if success { 0 } else { 1 };
        let out = acts.last().expect("output");
        let loss = -out[target].max(1e-300).ln();
        // Softmax with cross-entropy: dL/dz = p - onehot.
        let mut delta: Vec<f64> = out.clone();
        delta[target] -= 1.0;
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.w.len() + l.b.len();
        }
        for (li, l) in self.layers.iter().enumerate().rev() {
            let input = &acts[li];
            let base = offsets[li];
            for o in 0..l.outputs {
                for i in 0..l.inputs {
                    grad[base + o * l.inputs + i] += delta[o] * input[i];
                }
                grad[base + l.w.len() + o] += delta[o];
            }
            if li > 0 {
                let mut prev = vec![0.0; l.inputs];
                for (i, p) in prev.iter_mut().enumerate() {
                    let s: f64 = (0..l.outputs).map(|o| l.w[o * l.inputs + i] * delta[o]).sum();
                    // Hidden activations are tanh outputs.
                    *p = s * (1.0 - input[i] * input[i]);
                }
                delta = prev;
            }
        }
        loss
    }

    /// Mean cross-entropy and its gradient over standardized examples.
    pub fn loss_and_gradient(&self, data: &[Example]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.parameter_count()];
        let mut loss = 0.0;
        for (x, y) in data {
            loss += self.backprop(x, *y, &mut grad);
        }
        let n = data.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn loss(&self, data: &[Example]) -> f64 {
        let n = data.len().max(1) as f64;
        data.iter()
            .map(|(x, y)| {
                let (s, f) = self.scores_standardized(x);
                -(if *y { s } else { f }).max(1e-300).ln()
            })
            .sum::<f64>()
            / n
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(FORMAT_HEADER);
        out.push('\n');
        let sizes: Vec<String> = LAYER_SIZES.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "layers {}", sizes.join(" "));
        let row = |xs: &[f64]| xs.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "mean {}", row(&self.scaler.mean));
        let _ = writeln!(out, "scale {}", row(&self.scaler.scale));
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(out, "w{i} {}", row(&l.w));
            let _ = writeln!(out, "b{i} {}", row(&l.b));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TpfError> {
        let bad = |line: usize, why: &str| TpfError::Format { line, reason: why.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |key: &str| -> Result<(usize, Vec<String>), TpfError> {
            let (no, l) = lines.next().ok_or_else(|| bad(0, &format!("missing {key} line")))?;
            let mut parts = l.split(' ');
            if parts.next() != Some(key) {
                return Err(bad(no, &format!("expected {key}")));
            }
            Ok((no, parts.map(str::to_string).collect()))
        };
        let floats = |no: usize, v: &[String], n: usize| -> Result<Vec<f64>, TpfError> {
            if v.len() != n {
                return Err(bad(no, &format!("expected {n} values, found {}", v.len())));
            }
            v.iter()
                .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(no, "bad number")))
                .collect()
        };
        let (no, version) = next("silicon-classifier")?;
        if version != ["1"] {
            return Err(bad(no, "unsupported format version"));
        }
        let (no, sizes) = next("layers")?;
        let want: Vec<String> = LAYER_SIZES.iter().map(|s| s.to_string()).collect();
        if sizes != want {
            return Err(bad(no, "unsupported layer sizes"));
        }
        let mut c = Self::zeros();
        let (no, m) = next("mean")?;
        let mean = floats(no, &m, FEATURE_COUNT)?;
        let (no, s) = next("scale")?;
        let scale = floats(no, &s, FEATURE_COUNT)?;
        if scale.iter().any(|s| *s <= 0.0) {
            return Err(bad(no, "scales must be positive"));
        }
        c.scaler.mean.copy_from_slice(&mean);
        c.scaler.scale.copy_from_slice(&scale);
        for i in 0..c.layers.len() {
            let (no, w) = next(&format!("w{i}"))?;
            let len = c.layers[i].w.len();
            c.layers[i].w = floats(no, &w, len)?;
            let (no, b) = next(&format!("b{i}"))?;
            let len = c.layers[i].b.len();
            c.layers[i].b = floats(no, &b, len)?;
        }
        Ok(c)
    }
}

/// Class scores for a raw feature slice of length 3.
pub fn classify(c: &Classifier, features: &[f64]) -> Result<(f64, f64), TpfError> {
    let x: Features =
        features.try_into().map_err(|_| TpfError::Arity { expected: FEATURE_COUNT, got: features.len() })?;
    Ok(c.score(&x))
}

/// Fits the scaler on `data`, then minimizes mean cross-entropy with Adam
/// over shuffled minibatches.
pub fn train_classifier(data: &[Example], hp: &TrainParams) -> Result<TrainOutcome, TpfError> {
    if !(data.iter().any(|d| d.1) && data.iter().any(|d| !d.1)) {
        return Err(TpfError::SingleClass);
    }
    if hp.epochs == 0 || hp.batch_size == 0 || !(hp.learning_rate > 0.0) {
        return Err(TpfError::Config("epochs, batch size and learning rate must be positive"));
    }
    let rows: Vec<Features> = data.iter().map(|d| d.0).collect();
    let scaler = FeatureScaler::fit(&rows);
    let std_data: Vec<Example> = data.iter().map(|(x, y)| (scaler.apply(x), *y)).collect();
    let mut c = Classifier::random(hp.seed, scaler);
    let initial_loss = c.loss(&std_data);

    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut params = c.params();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..std_data.len()).collect();
    let mut rng = stream(hp.seed, purpose::TRAINING);
    let mut batch = Vec::with_capacity(hp.batch_size);
    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| std_data[i]));
            let (_, g) = c.loss_and_gradient(&batch);
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for i in 0..params.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                params[i] -= hp.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            c.set_params(&params)?;
        }
    }
    let final_loss = c.loss(&std_data);
    Ok(TrainOutcome { classifier: c, initial_loss, final_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn clusters(seed: u64, n: usize) -> Vec<Example> {
        let mut rng = stream(seed, 99);
        let noise = Normal::new(0.0, 0.3).unwrap();
        (0..n)
            .map(|i| {
                let y = i % 3 == 0;
                let c = if y { 2.0 } else { -1.0 };
                ([c + noise.sample(&mut rng), 10.0 - c + noise.sample(&mut rng), 1.2], y)
            })
            .collect()
    }

    #[test]
    fn architecture() {
        let c = Classifier::zeros();
        assert_eq!(c.parameter_count(), PARAMETER_COUNT);
        assert_eq!(classify(&c, &[1.0, 2.0, 3.0]).unwrap(), (0.5, 0.5));
        assert!(classify(&c, &[1.0, 2.0]).is_err());
        let r = Classifier::random(4, FeatureScaler::default());
        let (a, b) = classify(&r, &[0.3, -2.0, 7.0]).unwrap();
        assert!((a + b - 1.0).abs() < 1e-9 && (0.0..=1.0).contains(&a));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data: Vec<Example> = clusters(1, 40);
        let mut rng = stream(2, 0);
        for probe in 0..10 {
            let c = Classifier::random(100 + probe, FeatureScaler::default());
            let (_, g) = c.loss_and_gradient(&data);
            let p = c.params();
            let i = rng.random_range(0..p.len());
            let h = 1e-5;
            let mut q = c.clone();
            let mut pp = p.clone();
            pp[i] += h;
            q.set_params(&pp).unwrap();
            let up = q.loss(&data);
            pp[i] -= 2.0 * h;
            q.set_params(&pp).unwrap();
            let down = q.loss(&data);
            let fd = (up - down) / (2.0 * h);
            let denom = g[i].abs().max(fd.abs()).max(1e-6);
            assert!((g[i] - fd).abs() / denom < 1e-4, "param {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn separable_clusters_are_learned() {
        let train = clusters(3, 600);
        let test = clusters(4, 300);
        let hp = TrainParams { epochs: 30, seed: 5, ..TrainParams::default() };
        let out = train_classifier(&train, &hp).unwrap();
        assert!(out.final_loss < out.initial_loss);
        let correct = test.iter().filter(|(x, y)| (out.classifier.score(x).0 > 0.5) == *y).count();
        assert!(correct as f64 / test.len() as f64 >= 0.99);
        let pos = test.iter().find(|d| d.1).unwrap();
        assert!(out.classifier.score(&pos.0).0 > 0.9);
        assert_eq!(train_classifier(&train, &hp).unwrap(), out);
    }

    #[test]
    fn shuffled_labels_stay_near_baseline() {
        let mut train = clusters(6, 900);
        let mut rng = stream(7, 0);
        let mut labels: Vec<bool> = train.iter().map(|d| d.1).collect();
        labels.shuffle(&mut rng);
        train.iter_mut().zip(labels).for_each(|(d, y)| d.1 = y);
        let mut test = clusters(8, 900);
        let mut labels: Vec<bool> = test.iter().map(|d| d.1).collect();
        labels.shuffle(&mut rng);
        test.iter_mut().zip(labels).for_each(|(d, y)| d.1 = y);
        let hp = TrainParams { epochs: 20, seed: 9, ..TrainParams::default() };
        let c = train_classifier(&train, &hp).unwrap().classifier;
        let n = test.len() as f64;
        let acc = test.iter().filter(|(x, y)| (c.score(x).0 > 0.5) == *y).count() as f64 / n;
        let base = 2.0 / 3.0;
        let sigma = (base * (1.0 - base) / n).sqrt();
        assert!((acc - base).abs() <= 3.0 * sigma, "{acc}");
    }

    #[test]
    fn text_round_trip_and_errors() {
        let c = train_classifier(&clusters(10, 90), &TrainParams { epochs: 2, ..TrainParams::default() })
            .unwrap()
            .classifier;
        let text = c.to_text();
        assert!(text.starts_with("silicon-classifier 1\nlayers 3 16 8 4 2\n"));
        assert_eq!(Classifier::from_text(&text).unwrap(), c);
        assert!(Classifier::from_text(&text.replace("layers 3 16", "layers 3 17")).is_err());
        assert!(Classifier::from_text("silicon-classifier 2\n").is_err());
        let truncated: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(Classifier::from_text(&truncated).is_err());
        let single: Vec<Example> = clusters(1, 10).into_iter().map(|(x, _)| (x, true)).collect();
        assert_eq!(train_classifier(&single, &TrainParams::default()).unwrap_err(), TpfError::SingleClass);
    }
}
