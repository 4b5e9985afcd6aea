//! Training and inference cost accounting plus a roofline throughput model.
//!
//! Decode FLOPs per token follow the non-embedding count
//! `2·N + 2·n_layers·T·d_q`: every weight is used once per token (multiply and
//! add), and the `q·Kᵀ` score against `T` cached positions adds `2·T·d_q` per
//! layer. Softmax and the value mix are not counted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{count_params, ArchError, ArchitectureConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("invalid hardware profile {name:?}: {reason}")]
    InvalidHardware { name: String, reason: String },
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("exceeds memory capacity: need {required_bytes} bytes, have {capacity_bytes:.0}; maximal feasible batch is {max_batch}")]
    ExceedsMemory {
        required_bytes: u64,
        capacity_bytes: f64,
        max_batch: u64,
    },
    #[error("weights alone ({weight_bytes} bytes) exceed memory capacity ({capacity_bytes:.0} bytes)")]
    WeightsExceedCapacity {
        weight_bytes: u64,
        capacity_bytes: f64,
    },
}

fn default_bytes() -> u64 {
    2
}

/// Device peaks used by the roofline estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    pub name: String,
    /// FLOP/s.
    pub peak_flops: f64,
    /// Bytes/s.
    pub mem_bandwidth: f64,
    /// Bytes.
    pub mem_capacity: f64,
    #[serde(default = "default_bytes")]
    pub bytes_per_weight: u64,
    #[serde(default = "default_bytes")]
    pub bytes_per_kv: u64,
}

impl HardwareProfile {
    /// A100 40GB surrogate: 312 TFLOP/s dense bf16, 1.555 TB/s HBM.
    pub fn a100_40g() -> Self {
        Self {
            name: "a100-40g".to_string(),
            peak_flops: 312e12,
            mem_bandwidth: 1.555e12,
            mem_capacity: 40e9,
            bytes_per_weight: 2,
            bytes_per_kv: 2,
        }
    }

    /// Bundled profiles by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "a100-40g" => Some(Self::a100_40g()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let bad = |reason: &str| CostError::InvalidHardware {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        // peak_flops may be +inf (pure memory-bound limit), never NaN or <= 0.
        if !(self.peak_flops > 0.0) {
            return Err(bad("peak_flops must be positive"));
        }
        if !(self.mem_bandwidth > 0.0) {
            return Err(bad("mem_bandwidth must be positive"));
        }
        if !(self.mem_capacity > 0.0) {
            return Err(bad("mem_capacity must be positive"));
        }
        if self.bytes_per_weight == 0 || self.bytes_per_kv == 0 {
            return Err(bad("bytes_per_weight and bytes_per_kv must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub batch: u64,
    pub t_in: u64,
    pub t_out: u64,
}

impl Workload {
    pub fn new(batch: u64, t_in: u64, t_out: u64) -> Self {
        Self { batch, t_in, t_out }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.batch == 0 {
            return Err(CostError::InvalidWorkload("batch must be >= 1".into()));
        }
        if self.t_out == 0 {
            return Err(CostError::InvalidWorkload("t_out must be >= 1".into()));
        }
        Ok(())
    }

    pub fn max_context(&self) -> u64 {
        self.t_in + self.t_out
    }
}

impl Default for Workload {
    /// 4096 input tokens, 1024 output tokens, batch 1.
    fn default() -> Self {
        Self::new(1, 4096, 1024)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub prefill_seconds: f64,
    pub decode_seconds: f64,
    pub tokens_per_second: f64,
    /// Context length `t_in + t_out` at which the two fields below are taken.
    pub max_context: u64,
    pub decode_flops_per_token_at_max_context: u64,
    pub kv_bytes_per_sequence_at_max_context: u64,
    /// Fraction of decode steps where compute time is at least memory time.
    pub compute_bound_fraction: f64,
}

/// `6·N·D`.
pub fn training_flops(n_nonembed: u64, d_tokens: u64) -> f64 {
    6.0 * n_nonembed as f64 * d_tokens as f64
}

pub fn decode_flops_per_token(config: &ArchitectureConfig, t_context: u64) -> Result<u64, CostError> {
    let p = count_params(config)?;
    Ok(2 * p.n_nonembed + 2 * config.n_layers * t_context * config.d_q())
}

/// Keys and values for `batch` sequences of `t_context` cached tokens.
pub fn kv_cache_bytes(
    config: &ArchitectureConfig,
    t_context: u64,
    batch: u64,
    bytes_per_kv: u64,
) -> Result<u64, CostError> {
    count_params(config)?;
    Ok(batch * 2 * config.n_layers * t_context * config.d_kv() * bytes_per_kv)
}

fn weight_bytes(n_nonembed: u64, hardware: &HardwareProfile) -> u64 {
    n_nonembed * hardware.bytes_per_weight
}

pub fn max_feasible_batch(
    config: &ArchitectureConfig,
    hardware: &HardwareProfile,
    t_max: u64,
) -> Result<u64, CostError> {
    hardware.validate()?;
    let p = count_params(config)?;
    let weights = weight_bytes(p.n_nonembed, hardware);
    if weights as f64 > hardware.mem_capacity {
        return Err(CostError::WeightsExceedCapacity {
            weight_bytes: weights,
            capacity_bytes: hardware.mem_capacity,
        });
    }
    if t_max == 0 {
        return Err(CostError::InvalidWorkload("t_max must be >= 1".into()));
    }
    let per_sequence = kv_cache_bytes(config, t_max, 1, hardware.bytes_per_kv)?;
    let free = hardware.mem_capacity - weights as f64;
    Ok((free / per_sequence as f64).floor() as u64)
}

/// Roofline estimate: compute-bound prefill, then one decode step per output
/// token costing `max(FLOP time, byte time)`, where byte time streams every
/// weight plus the whole KV cache.
pub fn estimate_throughput(
    config: &ArchitectureConfig,
    hardware: &HardwareProfile,
    workload: &Workload,
) -> Result<CostReport, CostError> {
    hardware.validate()?;
    workload.validate()?;
    let p = count_params(config)?;
    let n = p.n_nonembed;
    let t_max = workload.max_context();
    let weights = weight_bytes(n, hardware);
    let kv_max = kv_cache_bytes(config, t_max, workload.batch, hardware.bytes_per_kv)?;
    let required = weights + kv_max;
    if required as f64 > hardware.mem_capacity {
        let max_batch = max_feasible_batch(config, hardware, t_max).unwrap_or(0);
        return Err(CostError::ExceedsMemory {
            required_bytes: required,
            capacity_bytes: hardware.mem_capacity,
            max_batch,
        });
    }

    let batch = workload.batch as f64;
    let t_in = workload.t_in as f64;
    let d_q = config.d_q() as f64;
    let layers = config.n_layers as f64;
    let prefill_flops = batch * (2.0 * n as f64 * t_in + layers * t_in * t_in * d_q);
    let prefill_seconds = prefill_flops / hardware.peak_flops;

    let mut decode_seconds = 0.0;
    let mut compute_bound_steps = 0u64;
    for step in 0..workload.t_out {
        let t = workload.t_in + step;
        let flops = batch * decode_flops_per_token(config, t)? as f64;
        let flop_time = flops / hardware.peak_flops;
        let bytes = weights + kv_cache_bytes(config, t, workload.batch, hardware.bytes_per_kv)?;
        let byte_time = bytes as f64 / hardware.mem_bandwidth;
        if flop_time >= byte_time {
            compute_bound_steps += 1;
        }
        decode_seconds += flop_time.max(byte_time);
    }

    let generated = (workload.batch * workload.t_out) as f64;
    Ok(CostReport {
        prefill_seconds,
        decode_seconds,
        tokens_per_second: generated / (prefill_seconds + decode_seconds),
        max_context: t_max,
        decode_flops_per_token_at_max_context: decode_flops_per_token(config, t_max)?,
        kv_bytes_per_sequence_at_max_context: kv_cache_bytes(config, t_max, 1, hardware.bytes_per_kv)?,
        compute_bound_fraction: compute_bound_steps as f64 / workload.t_out as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panda_1b() -> ArchitectureConfig {
        ArchitectureConfig::new("Panda-1B", 16, 2560, 72, 64, 4, 4096)
    }

    #[test]
    fn training_flops_examples() {
        assert_eq!(training_flops(1_000_000_000, 100_000_000_000), 6e20);
        assert_eq!(training_flops(1, 1), 6.0);
        let n = 80_216_064u64;
        let f = training_flops(n, 100 * n);
        assert!((f - 6.0 * 100.0 * (n as f64).powi(2)).abs() <= 1e-6 * f);
        assert!((f - 3.861e18).abs() / 3.861e18 < 1e-3);
    }

    #[test]
    fn decode_flops_examples() {
        let c = panda_1b();
        assert_eq!(decode_flops_per_token(&c, 4096).unwrap(), 2_554_331_136);
        assert_eq!(decode_flops_per_token(&c, 0).unwrap(), 2 * 975_175_680);
        let mask = |t| decode_flops_per_token(&c, t).unwrap() - 2 * 975_175_680;
        assert_eq!(mask(8192), 2 * mask(4096));
    }

    #[test]
    fn kv_examples() {
        let c = panda_1b();
        assert_eq!(kv_cache_bytes(&c, 5120, 1, 2).unwrap(), 377_487_360);
        assert_eq!(kv_cache_bytes(&c, 0, 1, 2).unwrap(), 0);
        assert_eq!(
            kv_cache_bytes(&c, 5120, 2, 2).unwrap(),
            2 * kv_cache_bytes(&c, 5120, 1, 2).unwrap()
        );
    }

    #[test]
    fn batch_capacity() {
        let c = panda_1b();
        let weights = 2 * 975_175_680u64;
        let mut hw = HardwareProfile::a100_40g();
        assert_eq!(max_feasible_batch(&c, &hw, 5120).unwrap(), 100);

        hw.mem_capacity = weights as f64;
        assert_eq!(max_feasible_batch(&c, &hw, 5120).unwrap(), 0);
        hw.mem_capacity = (weights + 377_487_360) as f64;
        assert_eq!(max_feasible_batch(&c, &hw, 5120).unwrap(), 1);
        hw.mem_capacity = weights as f64 - 1.0;
        assert!(matches!(
            max_feasible_batch(&c, &hw, 5120),
            Err(CostError::WeightsExceedCapacity { .. })
        ));
    }

    #[test]
    fn memory_overflow_reports_max_batch() {
        let err = estimate_throughput(&panda_1b(), &HardwareProfile::a100_40g(), &Workload::new(101, 4096, 1024))
            .unwrap_err();
        match err {
            CostError::ExceedsMemory { max_batch, .. } => assert_eq!(max_batch, 100),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_message_mentions_batch(&panda_1b()));
    }

    fn err_message_mentions_batch(c: &ArchitectureConfig) -> bool {
        let e = estimate_throughput(c, &HardwareProfile::a100_40g(), &Workload::new(500, 4096, 1024)).unwrap_err();
        e.to_string().contains("maximal feasible batch is 100")
    }

    #[test]
    fn infinite_compute_is_pure_memory_bound() {
        let c = panda_1b();
        let mut hw = HardwareProfile::a100_40g();
        hw.peak_flops = f64::INFINITY;
        let w = Workload::new(4, 128, 16);
        let rep = estimate_throughput(&c, &hw, &w).unwrap();
        assert_eq!(rep.prefill_seconds, 0.0);
        let mut bytes = 0.0;
        for t in 128..144 {
            bytes += (2 * 975_175_680 + kv_cache_bytes(&c, t, 4, 2).unwrap()) as f64 / hw.mem_bandwidth;
        }
        assert!((rep.decode_seconds - bytes).abs() <= 1e-12 * bytes);
        assert_eq!(rep.compute_bound_fraction, 0.0);
    }

    #[test]
    fn conservation() {
        let w = Workload::new(8, 4096, 1024);
        let rep = estimate_throughput(&panda_1b(), &HardwareProfile::a100_40g(), &w).unwrap();
        let produced = rep.tokens_per_second * (rep.prefill_seconds + rep.decode_seconds);
        assert!((produced - 8.0 * 1024.0).abs() < 1e-9);
        assert_eq!(rep.max_context, 5120);
        assert_eq!(rep.kv_bytes_per_sequence_at_max_context, 377_487_360);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut hw = HardwareProfile::a100_40g();
        hw.mem_bandwidth = 0.0;
        assert!(estimate_throughput(&panda_1b(), &hw, &Workload::default()).is_err());
        assert!(estimate_throughput(&panda_1b(), &HardwareProfile::a100_40g(), &Workload::new(0, 1, 1)).is_err());
        assert!(estimate_throughput(&panda_1b(), &HardwareProfile::a100_40g(), &Workload::new(1, 1, 0)).is_err());
    }
}
