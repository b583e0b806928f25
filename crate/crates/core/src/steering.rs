//! Building a low-pass steering vector from source-model directions and
//! injecting it into target hidden states.
//!
//! The path is: mean direction `v` -> low-pass mask -> frequency-domain
//! resample to the target width -> rescale back to `||v||`. Injection adds
//! `alpha * v_hat` to a hidden state and renormalizes to the state's
//! original norm.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result, StageExt};
use crate::latrep::{direction_set, mean_pattern, DirectionSet};
use crate::scalar::{l2_norm, Scalar};
use crate::spectral::{resample, Passband};
use crate::tensor_store::{read_tensor, write_atomic, ActivationMatrix, Precision, Role};

/// Which sequence positions receive the injection at the target layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionPositions {
    #[default]
    Last,
    All,
}

/// Whether the filter runs on the mean pattern or on every direction row
/// before averaging. The two agree up to rounding since both steps are
/// linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    Aggregate,
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringConfig {
    pub k: usize,
    pub d_source: usize,
    pub d_target: usize,
    pub layer_source: u32,
    pub layer_target: u32,
    pub alpha: f64,
    #[serde(default)]
    pub bypass_filter: bool,
    #[serde(default)]
    pub positions: InjectionPositions,
    #[serde(default)]
    pub filter_mode: FilterMode,
}

impl SteeringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_source == 0 || self.d_target == 0 {
            return Err(Error::InvalidConfig(
                "d_source and d_target must be at least 1".into(),
            ));
        }
        let max_k = self.d_source.min(self.d_target);
        if self.k == 0 || self.k > max_k {
            return Err(Error::OutOfRange {
                what: "cutoff k",
                value: self.k,
                min: 1,
                max: max_k,
            });
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be a finite value >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn passband(&self) -> Passband {
        if self.bypass_filter {
            Passband::Bypass
        } else {
            Passband::Cutoff(self.k)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt_set: Option<String>,
    pub source_tag: String,
}

/// The filtered, resampled, norm-restored pattern ready for injection.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T> {
    pub values: Vec<T>,
    /// `||v||` of the unfiltered mean pattern.
    pub original_norm: T,
    pub config: SteeringConfig,
    pub provenance: Provenance,
}

impl<T: Scalar> SteeringVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rank-1 tensor carrying the config and original norm in metadata.
    pub fn to_matrix(&self) -> Result<ActivationMatrix<T>> {
        let mut m = ActivationMatrix::from_vector(self.values.clone())?
            .with_role(Role::Pattern)
            .with_layer(self.config.layer_source)
            .with_source(self.provenance.source_tag.clone());
        m.prompt_set = self.provenance.prompt_set.clone();
        let cfg = serde_json::to_value(&self.config)
            .map_err(|e| Error::MalformedMeta(e.to_string()))?;
        m.extra.insert("steering".into(), cfg);
        m.extra
            .insert("original_norm".into(), Value::from(self.original_norm.as_f64()));
        Ok(m)
    }

    pub fn from_matrix(m: &ActivationMatrix<T>) -> Result<Self> {
        if m.n() != 1 {
            return Err(Error::ShapeMismatch {
                expected: "a single vector".into(),
                found: format!("{}x{}", m.n(), m.d()),
            });
        }
        let config: SteeringConfig = m
            .extra
            .get("steering")
            .ok_or_else(|| Error::MalformedMeta("missing \"steering\" config".into()))
            .and_then(|v| {
                serde_json::from_value(v.clone()).map_err(|e| Error::MalformedMeta(e.to_string()))
            })?;
        let original_norm = m
            .extra
            .get("original_norm")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::MalformedMeta("missing \"original_norm\"".into()))?;
        if m.d() != config.d_target {
            return Err(Error::DimensionMismatch {
                expected: config.d_target,
                found: m.d(),
            });
        }
        Ok(SteeringVector {
            values: m.data().to_vec(),
            original_norm: T::lit(original_norm),
            config,
            provenance: Provenance {
                prompt_set: m.prompt_set.clone(),
                source_tag: m.source_tag.clone(),
            },
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_matrix()?.to_bytes(Precision::F64)?;
        write_atomic(path.as_ref(), &bytes)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_matrix(&read_tensor(path)?)
    }
}

fn degenerate_floor<T: Scalar>() -> T {
    T::epsilon() * T::lit(1e3)
}

/// Mean pattern -> passband -> resample to `d_target` -> rescale to `||v||`.
pub fn extract_pattern<T: Scalar>(
    dirs: &DirectionSet<T>,
    cfg: &SteeringConfig,
) -> Result<SteeringVector<T>> {
    cfg.validate()?;
    if dirs.d() != cfg.d_source {
        return Err(Error::DimensionMismatch {
            expected: cfg.d_source,
            found: dirs.d(),
        });
    }
    let pattern = mean_pattern(dirs);
    let band = cfg.passband();
    let filtered = match cfg.filter_mode {
        FilterMode::Aggregate => resample(&pattern.values, cfg.d_target, band)?,
        FilterMode::PerSample => {
            let mut acc = vec![T::zero(); cfg.d_target];
            for row in dirs.rows() {
                for (a, x) in acc.iter_mut().zip(resample(row, cfg.d_target, band)?) {
                    *a += x;
                }
            }
            let inv_n = T::one() / T::from_usize_lossy(dirs.n());
            acc.iter_mut().for_each(|a| *a *= inv_n);
            acc
        }
    };
    let original_norm = pattern.norm();
    let filtered_norm = l2_norm(&filtered);
    if filtered_norm == T::zero() || filtered_norm <= degenerate_floor::<T>() * original_norm {
        return Err(Error::DegeneratePattern);
    }
    let scale = original_norm / filtered_norm;
    Ok(SteeringVector {
        values: filtered.into_iter().map(|x| x * scale).collect(),
        original_norm,
        config: cfg.clone(),
        provenance: Provenance {
            prompt_set: dirs.matrix().prompt_set.clone(),
            source_tag: pattern.source_tag,
        },
    })
}

/// `h + alpha * v`, rescaled to `||h||`.
///
/// `alpha == 0` returns `h` unchanged without touching the arithmetic.
pub fn inject_values<T: Scalar>(h: &[T], v: &[T], alpha: T) -> Result<Vec<T>> {
    if h.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: h.len(),
        });
    }
    if !alpha.is_finite() || alpha < T::zero() {
        return Err(Error::InvalidConfig(format!(
            "alpha must be a finite value >= 0, got {alpha}"
        )));
    }
    let h_norm = l2_norm(h);
    if h_norm == T::zero() {
        return Err(Error::ZeroNorm);
    }
    if alpha == T::zero() {
        return Ok(h.to_vec());
    }
    let updated: Vec<T> = h.iter().zip(v).map(|(&x, &y)| x + alpha * y).collect();
    let updated_norm = l2_norm(&updated);
    if updated_norm == T::zero() {
        return Err(Error::Cancellation);
    }
    let scale = h_norm / updated_norm;
    Ok(updated.into_iter().map(|x| x * scale).collect())
}

pub fn inject<T: Scalar>(h: &[T], sv: &SteeringVector<T>, alpha: T) -> Result<Vec<T>> {
    inject_values(h, &sv.values, alpha)
}

/// Callback invoked on hidden states between layers of a forward pass.
pub trait LayerHook<T> {
    /// Returns the (possibly modified) state for `layer`.
    fn apply(&self, layer: usize, hidden: &[T]) -> Result<Vec<T>>;

    /// Cheap pre-check so callers can skip copying untouched states.
    fn targets(&self, layer: usize) -> bool;

    fn positions(&self) -> InjectionPositions {
        InjectionPositions::Last
    }
}

/// Injects a steering vector at one layer, passes every other layer through.
#[derive(Debug, Clone)]
pub struct SteeringHook<T> {
    vector: Arc<SteeringVector<T>>,
    layer: usize,
    alpha: T,
    positions: InjectionPositions,
}

impl<T: Scalar> SteeringHook<T> {
    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn vector(&self) -> &SteeringVector<T> {
        &self.vector
    }
}

impl<T: Scalar> LayerHook<T> for SteeringHook<T> {
    fn apply(&self, layer: usize, hidden: &[T]) -> Result<Vec<T>> {
        if hidden.len() != self.vector.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vector.len(),
                found: hidden.len(),
            });
        }
        if layer == self.layer {
            inject(hidden, &self.vector, self.alpha)
        } else {
            Ok(hidden.to_vec())
        }
    }

    fn targets(&self, layer: usize) -> bool {
        layer == self.layer
    }

    fn positions(&self) -> InjectionPositions {
        self.positions
    }
}

/// Hook at `cfg.layer_target` with strength `cfg.alpha`.
pub fn make_hook<T: Scalar>(
    sv: impl Into<Arc<SteeringVector<T>>>,
    cfg: &SteeringConfig,
) -> Result<SteeringHook<T>> {
    cfg.validate()?;
    let vector = sv.into();
    if vector.len() != cfg.d_target {
        return Err(Error::DimensionMismatch {
            expected: cfg.d_target,
            found: vector.len(),
        });
    }
    Ok(SteeringHook {
        vector,
        layer: cfg.layer_target as usize,
        alpha: T::lit(cfg.alpha),
        positions: cfg.positions,
    })
}

/// Reads the contrastive pair, forms directions, extracts the steering
/// vector and writes it as a rank-1 tensor. Errors carry the failing stage.
pub fn run_pipeline(
    pos_path: impl AsRef<Path>,
    neg_path: impl AsRef<Path>,
    cfg: &SteeringConfig,
    out_path: impl AsRef<Path>,
) -> Result<SteeringVector<f64>> {
    let pos: ActivationMatrix<f64> = read_tensor(pos_path).stage("read_positive")?;
    let neg: ActivationMatrix<f64> = read_tensor(neg_path).stage("read_negative")?;
    let sv = extract_from_pair(&pos, &neg, cfg)?;
    sv.write(out_path).stage("write_output")?;
    Ok(sv)
}

/// The in-memory middle of [`run_pipeline`]: direction set, then pattern.
pub fn extract_from_pair<T: Scalar>(
    pos: &ActivationMatrix<T>,
    neg: &ActivationMatrix<T>,
    cfg: &SteeringConfig,
) -> Result<SteeringVector<T>> {
    let dirs = direction_set(pos, neg).stage("direction_set")?;
    extract_pattern(&dirs, cfg).stage("extract_pattern")
}
