//! Bundled architecture tables: the 80M-1B ablation variants (all GQA=4,
//! d_head=64) and the named large-scale shapes.
//!
//! Only shapes and the printed `d_model/sqrt(N)` and ratio columns are
//! bundled. No losses are shipped.

use serde::Serialize;
use thiserror::Error;

use crate::arch::{derived_metrics, ArchitectureConfig};

/// Tolerance on the printed `d_model/sqrt(N)` column (values print rounded).
pub const PRINTED_X_TOLERANCE: f64 = 0.002;
/// Tolerance on the printed ratio column.
pub const PRINTED_R_TOLERANCE: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("corpus entry {id} disagrees with its printed metrics: {detail}")]
pub struct CorpusMismatch {
    pub id: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusEntry {
    pub size_label: &'static str,
    pub variant: &'static str,
    pub n_layers: u64,
    pub d_model: u64,
    pub n_head: u64,
    pub f_size: u64,
    pub printed_x: f64,
    pub printed_r: f64,
}

impl CorpusEntry {
    pub const GQA: u64 = 4;
    pub const D_HEAD: u64 = 64;

    pub fn id(&self) -> String {
        format!("{}/{}", self.size_label, self.variant)
    }

    pub fn config(&self) -> ArchitectureConfig {
        ArchitectureConfig::new(
            self.id(),
            self.n_layers,
            self.d_model,
            self.n_head,
            Self::D_HEAD,
            Self::GQA,
            self.f_size,
        )
    }

    pub fn check(&self) -> Result<(), CorpusMismatch> {
        check_printed(&self.id(), &self.config(), Some(self.printed_x), Some(self.printed_r))
    }
}

fn check_printed(
    id: &str,
    config: &ArchitectureConfig,
    printed_x: Option<f64>,
    printed_r: Option<f64>,
) -> Result<(), CorpusMismatch> {
    let m = derived_metrics(config).map_err(|e| CorpusMismatch {
        id: id.to_string(),
        detail: e.to_string(),
    })?;
    if let Some(px) = printed_x {
        if (m.x - px).abs() > PRINTED_X_TOLERANCE {
            return Err(CorpusMismatch {
                id: id.to_string(),
                detail: format!("x={:.4} vs printed {px}", m.x),
            });
        }
    }
    if let Some(pr) = printed_r {
        if (m.r - pr).abs() > PRINTED_R_TOLERANCE {
            return Err(CorpusMismatch {
                id: id.to_string(),
                detail: format!("r={:.4} vs printed {pr}", m.r),
            });
        }
    }
    Ok(())
}

macro_rules! rows {
    ($( $size:literal $var:literal $l:literal $d:literal $h:literal $f:literal $x:literal $r:literal ;)*) => {
        &[$( CorpusEntry {
            size_label: $size, variant: $var, n_layers: $l, d_model: $d,
            n_head: $h, f_size: $f, printed_x: $x, printed_r: $r,
        }, )*]
    };
}

static ENTRIES: &[CorpusEntry] = rows! {
    "80M" "v1" 12 768 16 2048 0.086 2.40;
    "80M" "v2" 12 768 4 2688 0.086 12.6;
    "80M" "v3" 12 768 8 2560 0.085 6.00;
    "80M" "v4" 12 768 24 1536 0.087 1.20;
    "80M" "v5" 12 768 32 1152 0.086 0.68;
    "80M" "v6" 12 768 40 768 0.086 0.36;
    "80M" "v7" 12 768 48 256 0.087 0.10;
    "80M" "v8" 12 384 32 4096 0.043 2.40;
    "80M" "v9" 12 384 8 5376 0.043 12.6;
    "80M" "v10" 12 384 16 5120 0.042 6.00;
    "80M" "v11" 12 384 48 3072 0.044 1.20;
    "80M" "v12" 12 384 64 2304 0.043 0.68;
    "80M" "v13" 12 384 80 1536 0.043 0.36;
    "80M" "v14" 12 384 96 512 0.044 0.10;
    "80M" "v15" 12 1536 8 1024 0.171 2.40;
    "80M" "v16" 12 1536 4 1280 0.169 6.00;
    "80M" "v17" 12 1536 12 768 0.174 1.20;
    "80M" "v18" 12 1536 16 640 0.169 0.75;
    "80M" "v19" 12 1536 20 384 0.171 0.36;
    "80M" "v20" 12 1536 24 128 0.174 0.10;
    "80M" "v21" 12 512 24 3072 0.057 2.40;
    "80M" "v22" 12 512 12 3840 0.056 6.00;
    "80M" "v23" 12 512 16 3584 0.057 4.20;
    "80M" "v24" 12 512 36 2304 0.058 1.20;
    "80M" "v25" 12 512 48 1792 0.057 0.70;
    "80M" "v26" 12 512 60 1152 0.057 0.36;
    "80M" "v27" 12 512 72 384 0.058 0.10;
    "80M" "v28" 12 1024 12 1536 0.114 2.40;
    "80M" "v29" 12 1024 8 1792 0.113 4.20;
    "80M" "v30" 12 1024 16 1280 0.115 1.50;
    "80M" "v31" 12 1024 24 896 0.114 0.70;
    "80M" "v32" 12 1024 36 256 0.114 0.13;
    "80M" "v33" 12 2048 4 896 0.226 4.20;
    "80M" "v34" 12 2048 8 640 0.231 1.50;
    "80M" "v35" 12 2048 16 256 0.226 0.30;
    "80M" "v48" 12 768 20 1792 0.086 1.68;
    "80M" "v49" 12 768 28 1408 0.086 0.94;
    "80M" "v50" 12 384 40 3584 0.043 1.68;
    "80M" "v51" 12 384 52 3072 0.043 1.11;
    "80M" "v52" 12 384 56 2816 0.043 0.94;
    "80M" "v53" 12 384 60 2560 0.043 0.80;
    "80M" "v54" 12 512 32 2560 0.058 1.50;
    "80M" "v55" 12 512 40 2176 0.057 1.02;
    "80M" "v56" 12 512 44 1920 0.058 0.82;
    "80M" "v57" 12 1024 20 1152 0.113 1.08;
    "145M" "v1" 12 1024 16 3072 0.085 3.60;
    "145M" "v2" 12 1024 8 3584 0.084 8.40;
    "145M" "v3" 12 1024 24 2560 0.086 2.00;
    "145M" "v4" 12 1024 32 2304 0.084 1.35;
    "145M" "v5" 12 1024 40 1792 0.085 0.84;
    "145M" "v6" 12 1024 48 1280 0.086 0.50;
    "145M" "v7" 12 1024 64 512 0.085 0.15;
    "145M" "v8" 12 512 32 6144 0.043 3.60;
    "145M" "v9" 12 512 16 7168 0.042 8.40;
    "145M" "v10" 12 512 48 5120 0.043 2.00;
    "145M" "v11" 12 512 64 4608 0.042 1.35;
    "145M" "v12" 12 512 80 3584 0.043 0.84;
    "145M" "v13" 12 512 96 2560 0.043 0.50;
    "145M" "v14" 12 512 128 1024 0.043 0.15;
    "145M" "v15" 12 2048 8 1536 0.170 3.60;
    "145M" "v16" 12 2048 4 1792 0.168 8.40;
    "145M" "v17" 12 2048 12 1280 0.172 2.00;
    "145M" "v18" 12 2048 16 1152 0.168 1.35;
    "145M" "v19" 12 2048 20 896 0.170 0.84;
    "145M" "v20" 12 2048 24 640 0.172 0.50;
    "145M" "v21" 12 2048 32 256 0.170 0.15;
    "145M" "v22" 12 768 24 3840 0.065 3.00;
    "145M" "v23" 12 768 32 3584 0.063 2.10;
    "145M" "v24" 12 768 40 3072 0.064 1.44;
    "145M" "v25" 12 768 48 2560 0.065 1.00;
    "145M" "v26" 12 768 56 2304 0.063 0.77;
    "145M" "v27" 12 768 64 1792 0.064 0.53;
    "145M" "v28" 12 1536 12 1920 0.129 3.00;
    "145M" "v29" 12 1536 16 1792 0.127 2.10;
    "145M" "v30" 12 1536 20 1536 0.128 1.44;
    "145M" "v31" 12 1536 24 1280 0.129 1.00;
    "145M" "v32" 12 1536 28 1152 0.127 0.77;
    "145M" "v33" 12 1536 32 896 0.128 0.53;
    "145M" "v34" 12 4096 4 768 0.340 3.60;
    "145M" "v35" 12 4096 16 128 0.340 0.15;
    "145M" "v48" 12 1024 28 2368 0.086 1.59;
    "145M" "v49" 12 1024 36 2048 0.085 1.07;
    "145M" "v50" 12 512 52 5120 0.042 1.85;
    "145M" "v51" 12 512 60 4800 0.042 1.50;
    "145M" "v52" 12 512 68 4224 0.043 1.16;
    "145M" "v53" 12 512 72 3968 0.043 1.03;
    "145M" "v54" 12 768 44 2944 0.063 1.25;
    "145M" "v55" 12 768 52 2432 0.064 0.88;
    "297M" "v1" 12 1536 24 4096 0.089 3.20;
    "297M" "v2" 12 1536 8 4864 0.090 11.4;
    "297M" "v3" 12 1536 16 4608 0.088 5.40;
    "297M" "v4" 12 1536 32 3584 0.090 2.10;
    "297M" "v5" 12 1536 48 2816 0.089 1.10;
    "297M" "v6" 12 1536 64 2048 0.088 0.60;
    "297M" "v7" 12 1536 80 1024 0.090 0.24;
    "297M" "v8" 12 768 48 8192 0.045 3.20;
    "297M" "v9" 12 768 16 9728 0.045 11.4;
    "297M" "v10" 12 768 32 9216 0.044 5.40;
    "297M" "v11" 12 768 64 7168 0.045 2.10;
    "297M" "v12" 12 768 96 5632 0.045 1.10;
    "297M" "v13" 12 768 128 4096 0.044 0.60;
    "297M" "v14" 12 768 160 2048 0.045 0.24;
    "297M" "v15" 12 3072 12 2048 0.178 3.20;
    "297M" "v16" 12 3072 4 2432 0.180 11.4;
    "297M" "v17" 12 3072 8 2304 0.177 5.40;
    "297M" "v18" 12 3072 16 1792 0.180 2.10;
    "297M" "v19" 12 3072 24 1408 0.178 1.10;
    "297M" "v20" 12 3072 32 1024 0.177 0.60;
    "297M" "v21" 12 3072 40 512 0.180 0.24;
    "297M" "v22" 12 1024 36 6144 0.059 3.20;
    "297M" "v23" 12 1024 12 7296 0.060 11.4;
    "297M" "v24" 12 1024 24 6912 0.059 5.40;
    "297M" "v25" 12 1024 48 5376 0.060 2.10;
    "297M" "v26" 12 1024 72 4224 0.059 1.10;
    "297M" "v27" 12 1024 96 3072 0.059 0.60;
    "297M" "v28" 12 1024 120 1536 0.060 0.24;
    "297M" "v29" 12 2048 12 3456 0.118 5.40;
    "297M" "v30" 12 2048 24 2688 0.120 2.10;
    "297M" "v31" 12 2048 48 1536 0.118 0.60;
    "297M" "v32" 12 2048 60 768 0.120 0.24;
    "297M" "v45" 12 1536 40 3200 0.089 1.50;
    "297M" "v46" 12 1536 44 3072 0.089 1.31;
    "297M" "v47" 12 1536 52 2688 0.088 0.97;
    "297M" "v48" 12 1536 56 2432 0.089 0.81;
    "297M" "v49" 12 768 80 6400 0.045 1.50;
    "297M" "v50" 12 768 88 6016 0.045 1.28;
    "297M" "v51" 12 768 104 5376 0.044 0.97;
    "297M" "v52" 12 768 112 4736 0.045 0.79;
    "297M" "v53" 12 3072 20 1664 0.177 1.56;
    "297M" "v54" 12 3072 28 1152 0.180 0.77;
    "297M" "v55" 12 1024 56 4864 0.060 1.63;
    "297M" "v56" 12 1024 64 4608 0.060 1.35;
    "297M" "v57" 12 1024 80 3840 0.059 0.90;
    "297M" "v58" 12 1024 88 3328 0.060 0.71;
    "297M" "v59" 12 2048 32 2432 0.117 1.43;
    "297M" "v60" 12 2048 36 2048 0.120 1.07;
    "297M" "v61" 12 2048 40 1920 0.118 0.90;
    "297M" "v62" 12 2048 44 1792 0.117 0.76;
    "1B" "v1" 16 2048 32 8192 0.066 4.80;
    "1B" "v2" 16 2048 72 5760 0.067 1.50;
    "1B" "v3" 16 2816 92 2432 0.089 0.50;
    "1B" "v4" 16 2816 76 3072 0.091 0.76;
    "1B" "v5" 16 2816 68 3584 0.090 0.99;
    "1B" "v6" 16 2816 60 4096 0.090 1.28;
    "1B" "v7" 16 2816 56 4480 0.089 1.50;
    "1B" "v8" 16 2816 24 6144 0.089 4.80;
    "1B" "v9" 16 2816 48 4736 0.090 1.85;
    "1B" "v10" 16 2816 40 5120 0.090 2.40;
    "1B" "v11" 16 2816 36 5376 0.090 2.80;
    "1B" "v12" 16 2560 64 4480 0.082 1.31;
    "1B" "v13" 16 2560 72 4096 0.082 1.07;
    "1B" "v14" 16 2560 80 3648 0.082 0.86;
    "1B" "v15" 16 2560 56 4864 0.082 1.63;
    "1B" "v16" 16 2560 88 3200 0.082 0.68;
    "1B" "v17" 16 2560 48 5376 0.082 2.10;
};

/// The ablation variants, in table order.
pub fn corpus() -> &'static [CorpusEntry] {
    ENTRIES
}

/// Runs every entry's printed-metric cross-check; the first failure aborts.
pub fn verified_corpus() -> Result<&'static [CorpusEntry], CorpusMismatch> {
    for e in ENTRIES {
        e.check()?;
    }
    Ok(ENTRIES)
}

/// Finds an entry by `size_label` and `variant` (e.g. `"80M"`, `"v1"`).
pub fn lookup(size_label: &str, variant: &str) -> Option<&'static CorpusEntry> {
    ENTRIES
        .iter()
        .find(|e| e.size_label == size_label && e.variant == variant)
}

/// Resolves `"80M/v1"`-style references.
pub fn resolve(reference: &str) -> Option<&'static CorpusEntry> {
    let (size, variant) = reference.split_once('/')?;
    lookup(size, variant)
}

/// A named large-scale shape with its printed columns. A `None` printed
/// value is not checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceModel {
    pub config: ArchitectureConfig,
    pub printed_x: Option<f64>,
    pub printed_r: Option<f64>,
}

impl ReferenceModel {
    pub fn check(&self) -> Result<(), CorpusMismatch> {
        check_printed(&self.config.name, &self.config, self.printed_x, self.printed_r)
    }
}

#[allow(clippy::too_many_arguments)]
fn model(
    name: &str,
    n_layers: u64,
    d_model: u64,
    n_head: u64,
    d_head: u64,
    gqa: u64,
    f_size: u64,
    printed_x: Option<f64>,
    printed_r: Option<f64>,
) -> ReferenceModel {
    ReferenceModel {
        config: ArchitectureConfig::new(name, n_layers, d_model, n_head, d_head, gqa, f_size),
        printed_x,
        printed_r,
    }
}

/// Baseline, loss-optimal and throughput-optimized shapes at 1B and 3B.
///
/// Head counts are not printed for these rows; they follow from the ratio
/// column and the per-head width convention. The LLaMA-3.2-3B ratio cell is
/// printed as 4.80 but the shape gives 3.0 under the four-projection
/// convention that reproduces every other row, so it is left unchecked.
pub fn reference_models() -> Vec<ReferenceModel> {
    vec![
        model("LLaMA-3.2-1B", 16, 2048, 32, 64, 4, 8192, Some(0.066), Some(4.80)),
        model("Panda-1B", 16, 2560, 72, 64, 4, 4096, Some(0.082), Some(1.07)),
        model("Surefire-1B", 16, 2560, 36, 64, 9, 6144, Some(0.082), Some(3.6)),
        model("LLaMA-3.2-3B", 28, 3072, 24, 128, 3, 8192, Some(0.058), None),
        model("Panda-3B", 28, 4096, 36, 128, 3, 4096, Some(0.077), Some(1.0)),
        model("Surefire-3B", 28, 4096, 42, 128, 7, 4096, Some(0.077), Some(1.0)),
        model("Panda-3B-1Bfit", 28, 4096, 33, 128, 3, 4608, Some(0.076), Some(1.23)),
        model("Qwen2.5-1.5B", 28, 1536, 12, 128, 6, 8960, None, None),
        model("Qwen3-0.6B", 28, 1024, 16, 128, 2, 3072, None, None),
    ]
}

pub fn reference_model(name: &str) -> Option<ReferenceModel> {
    reference_models().into_iter().find(|m| m.config.name == name)
}
