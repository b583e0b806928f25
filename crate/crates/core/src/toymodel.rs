//! Desk-scale stand-ins for the source and target models, plus a synthetic
//! direction-set generator with controllable in-band and out-of-band noise.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, and the forward pass only uses `+ - * /` and `sqrt`, so
//! outputs are bit-identical across platforms at binary64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latrep::{covariance_trace, DirectionSet};
use crate::spectral::{lowpass_filter, lowpass_mask};
use crate::steering::{InjectionPositions, LayerHook};
use crate::tensor_store::{ActivationMatrix, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyNetConfig {
    pub n_layers: usize,
    pub d_hidden: usize,
    pub vocab: usize,
    pub seed: u64,
}

impl ToyNetConfig {
    /// Source fixture (plays the text model).
    pub const SOURCE: ToyNetConfig = ToyNetConfig {
        n_layers: 4,
        d_hidden: 64,
        vocab: 32,
        seed: 0x5eed_0001,
    };

    /// Target fixture; its width differs from the source on purpose.
    pub const TARGET: ToyNetConfig = ToyNetConfig {
        n_layers: 4,
        d_hidden: 48,
        vocab: 32,
        seed: 0x5eed_0002,
    };

    pub fn tag(&self) -> String {
        format!("toy-l{}-d{}-s{}", self.n_layers, self.d_hidden, self.seed)
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    // 53 random mantissa bits in [0, 1), mapped to [-1, 1)
    rng.gen::<f64>() * 2.0 - 1.0
}

/// Residual network with causal prefix-mean mixing and a softsign update.
///
/// Layer `l` maps each position's state `h_t` to
/// `h_t + softsign(g * W_l (h_t + mean(h_0..=h_t)) / 2)` with
/// `g = sqrt(d)` and `W_l` normalized to unit Frobenius norm, so its
/// spectral norm is at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetParams {
    pub config: ToyNetConfig,
    /// `vocab x d` token embeddings, row-major.
    pub embeddings: Vec<f64>,
    /// One `d x d` row-major mixing matrix per layer.
    pub layers: Vec<Vec<f64>>,
}

impl ToyNetParams {
    pub fn generate(config: ToyNetConfig) -> Result<Self> {
        if config.n_layers == 0 || config.d_hidden == 0 || config.vocab == 0 {
            return Err(Error::InvalidConfig(
                "toy net needs n_layers, d_hidden and vocab >= 1".into(),
            ));
        }
        let d = config.d_hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let embeddings = (0..config.vocab * d).map(|_| uniform(&mut rng)).collect();
        let layers = (0..config.n_layers)
            .map(|_| {
                let mut w: Vec<f64> = (0..d * d).map(|_| uniform(&mut rng)).collect();
                let fro = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                w.iter_mut().for_each(|x| *x /= fro);
                w
            })
            .collect();
        Ok(ToyNetParams {
            config,
            embeddings,
            layers,
        })
    }

    pub fn d(&self) -> usize {
        self.config.d_hidden
    }

    fn embedding(&self, token: usize) -> &[f64] {
        let d = self.d();
        &self.embeddings[token * d..(token + 1) * d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyOutput {
    pub logits: Vec<f64>,
    /// Final-position state after each layer (post-hook where one applied).
    pub layer_states: Vec<Vec<f64>>,
}

fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

pub fn toy_forward(
    params: &ToyNetParams,
    tokens: &[usize],
    hook: Option<&dyn LayerHook<f64>>,
) -> Result<ToyOutput> {
    if tokens.is_empty() {
        return Err(Error::Empty("token sequence"));
    }
    let vocab = params.config.vocab;
    if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab) {
        return Err(Error::TokenOutOfRange { token: bad, vocab });
    }
    let d = params.d();
    let gain = (d as f64).sqrt();
    let last = tokens.len() - 1;
    let mut states: Vec<Vec<f64>> = tokens.iter().map(|&t| params.embedding(t).to_vec()).collect();
    let mut layer_states = Vec::with_capacity(params.layers.len());

    for (l, w) in params.layers.iter().enumerate() {
        let mut prefix = vec![0.0; d];
        let mut next = Vec::with_capacity(states.len());
        for (t, h) in states.iter().enumerate() {
            for (p, &x) in prefix.iter_mut().zip(h) {
                *p += x;
            }
            let inv = 1.0 / (t + 1) as f64;
            let mixed: Vec<f64> = h
                .iter()
                .zip(&prefix)
                .map(|(&x, &p)| 0.5 * (x + p * inv))
                .collect();
            let out: Vec<f64> = (0..d)
                .map(|i| {
                    let z: f64 = w[i * d..(i + 1) * d]
                        .iter()
                        .zip(&mixed)
                        .map(|(a, b)| a * b)
                        .sum();
                    h[i] + softsign(gain * z)
                })
                .collect();
            next.push(out);
        }
        states = next;

        if let Some(hook) = hook {
            if hook.targets(l) {
                let range = match hook.positions() {
                    InjectionPositions::Last => last..last + 1,
                    InjectionPositions::All => 0..states.len(),
                };
                for t in range {
                    states[t] = hook.apply(l, &states[t])?;
                }
            }
        }
        layer_states.push(states[last].clone());
    }

    let h = &states[last];
    let scale = 1.0 / gain;
    let logits = (0..vocab)
        .map(|v| {
            params
                .embedding(v)
                .iter()
                .zip(h)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * scale
        })
        .collect();
    Ok(ToyOutput {
        logits,
        layer_states,
    })
}

/// Token ids standing in for the two instruction suffixes.
pub const POSITIVE_SUFFIX: [usize; 4] = [1, 2, 3, 4];
pub const NEGATIVE_SUFFIX: [usize; 3] = [5, 6, 7];

/// Paired prompts: a random question followed by either suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastivePrompts {
    pub positive: Vec<Vec<usize>>,
    pub negative: Vec<Vec<usize>>,
}

pub fn contrastive_prompts(
    n: usize,
    question_len: usize,
    vocab: usize,
    seed: u64,
) -> Result<ContrastivePrompts> {
    if vocab < 8 {
        return Err(Error::InvalidConfig(
            "contrastive prompts need a vocabulary of at least 8 tokens".into(),
        ));
    }
    if n == 0 || question_len == 0 {
        return Err(Error::Empty("prompt count and question length must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positive = Vec::with_capacity(n);
    let mut negative = Vec::with_capacity(n);
    for _ in 0..n {
        let q: Vec<usize> = (0..question_len).map(|_| rng.gen_range(8..vocab as u32) as usize).collect();
        positive.push([q.as_slice(), &POSITIVE_SUFFIX].concat());
        negative.push([q.as_slice(), &NEGATIVE_SUFFIX].concat());
    }
    Ok(ContrastivePrompts { positive, negative })
}

/// Final-position states at `layer` for each sequence, one row per sequence.
pub fn collect_final_states(
    params: &ToyNetParams,
    sequences: &[Vec<usize>],
    layer: usize,
    role: Role,
) -> Result<ActivationMatrix<f64>> {
    if layer >= params.config.n_layers {
        return Err(Error::OutOfRange {
            what: "layer",
            value: layer,
            min: 0,
            max: params.config.n_layers - 1,
        });
    }
    let rows = sequences
        .iter()
        .map(|s| toy_forward(params, s, None).map(|o| o.layer_states[layer].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ActivationMatrix::from_rows(&rows)?
        .with_role(role)
        .with_layer(layer as u32)
        .with_source(params.config.tag()))
}

/// Where the per-sample noise of a synthetic direction set lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSupport {
    /// Strictly outside the signal passband.
    #[default]
    OutOfBand,
    /// Spread over every bin.
    Broadband,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    /// Cutoff defining the shared signal's passband.
    pub k_signal: usize,
    pub signal_norm: f64,
    /// Expected per-sample energy of the main noise term.
    pub noise_energy: f64,
    /// Expected per-sample energy of extra noise inside the passband.
    #[serde(default)]
    pub residual_energy: f64,
    #[serde(default)]
    pub noise_support: NoiseSupport,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Empty("synthetic spec needs n >= 1"));
        }
        if self.d < 2 || self.k_signal == 0 || self.k_signal >= self.d {
            return Err(Error::OutOfRange {
                what: "k_signal",
                value: self.k_signal,
                min: 1,
                max: self.d.saturating_sub(1),
            });
        }
        for (name, v) in [
            ("signal_norm", self.signal_norm),
            ("noise_energy", self.noise_energy),
            ("residual_energy", self.residual_energy),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn scaled(mut v: Vec<f64>, factor: f64) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x *= factor);
    v
}

/// Rows `s + noise_i`, where `s` lives on the `k_signal` passband with norm
/// `signal_norm`.
///
/// Noise is built from i.i.d. uniform(-1, 1) draws (variance 1/3) projected
/// onto the relevant bins and scaled so its expected energy matches the
/// spec: a projection onto `q` of `d` bins keeps `q/3` expected energy.
pub fn synth_directions(spec: &SynthSpec) -> Result<DirectionSet<f64>> {
    spec.validate()?;
    let d = spec.d;
    let k = spec.k_signal;
    let pass_bins = lowpass_mask(d, k)?.iter().filter(|&&m| m).count();
    let stop_bins = d - pass_bins;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| uniform(rng)).collect() };

    let raw = lowpass_filter(&draw(&mut rng), k)?;
    let raw_norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let signal = if spec.signal_norm == 0.0 || raw_norm == 0.0 {
        vec![0.0; d]
    } else {
        scaled(raw, spec.signal_norm / raw_norm)
    };

    let noise_scale = match spec.noise_support {
        NoiseSupport::OutOfBand => (spec.noise_energy / (stop_bins as f64 / 3.0)).sqrt(),
        NoiseSupport::Broadband => (spec.noise_energy / (d as f64 / 3.0)).sqrt(),
    };
    let residual_scale = (spec.residual_energy / (pass_bins as f64 / 3.0)).sqrt();

    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut row = signal.clone();
        if spec.noise_energy > 0.0 {
            let r = draw(&mut rng);
            let noise = match spec.noise_support {
                NoiseSupport::OutOfBand => {
                    let low = lowpass_filter(&r, k)?;
                    r.iter().zip(&low).map(|(a, b)| a - b).collect()
                }
                NoiseSupport::Broadband => r,
            };
            for (x, e) in row.iter_mut().zip(noise) {
                *x += noise_scale * e;
            }
        }
        if spec.residual_energy > 0.0 {
            let low = lowpass_filter(&draw(&mut rng), k)?;
            for (x, e) in row.iter_mut().zip(low) {
                *x += residual_scale * e;
            }
        }
        rows.push(row);
    }
    let mut m = ActivationMatrix::from_rows(&rows)?;
    m.source_tag = format!("synth-d{}-k{}-s{}", d, k, spec.seed);
    DirectionSet::from_matrix(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub trace_raw_clean: f64,
    pub trace_raw_noisy: f64,
    pub trace_filtered_clean: f64,
    pub trace_filtered_noisy: f64,
}

/// Dispersion of two synthetic direction sets before and after per-row
/// low-pass filtering at cutoff `k`.
pub fn drift_experiment(clean: &SynthSpec, noisy: &SynthSpec, k: usize) -> Result<DriftReport> {
    if clean.d != noisy.d {
        return Err(Error::DimensionMismatch {
            expected: clean.d,
            found: noisy.d,
        });
    }
    let min_k = clean.k_signal.max(noisy.k_signal);
    if k < min_k || k > clean.d {
        return Err(Error::OutOfRange {
            what: "cutoff k",
            value: k,
            min: min_k,
            max: clean.d,
        });
    }
    let clean_set = synth_directions(clean)?;
    let noisy_set = synth_directions(noisy)?;
    let filtered_clean = clean_set.map_rows(|r| lowpass_filter(r, k))?;
    let filtered_noisy = noisy_set.map_rows(|r| lowpass_filter(r, k))?;
    Ok(DriftReport {
        trace_raw_clean: covariance_trace(&clean_set),
        trace_raw_noisy: covariance_trace(&noisy_set),
        trace_filtered_clean: covariance_trace(&filtered_clean),
        trace_filtered_noisy: covariance_trace(&filtered_noisy),
    })
}
