//! Seeded synthetic losses for demos and tests. Every generated record is
//! tagged `synthetic`; none of these numbers are measurements.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::arch::derived_metrics;
use crate::corpus::CorpusEntry;
use crate::laws::{parse_size_label, ChinchillaParams, ConditionalLaw, RefLossSource};
use crate::runs::RunRecord;

pub const SYNTHETIC_TAG: &str = "synthetic";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub law: ConditionalLaw,
    pub reference: ChinchillaParams,
    /// Standard deviation of the additive Gaussian noise, in nats.
    pub sigma: f64,
    pub seed: u64,
    /// Training tokens per nominal parameter.
    pub tokens_per_param: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            law: ConditionalLaw::reference_multiplicative(),
            reference: ChinchillaParams::hoffmann(),
            sigma: 0.002,
            seed: 0,
            tokens_per_param: 100,
        }
    }
}

impl SyntheticSpec {
    pub fn reference_source(&self) -> RefLossSource {
        RefLossSource::Chinchilla(self.reference)
    }

    /// Noise-free loss of one shape at `d_tokens`.
    pub fn clean_loss(&self, rec: &RunRecord) -> f64 {
        let m = derived_metrics(&rec.arch).expect("corpus shapes are valid");
        let l_opt = self.reference.evaluate(rec.n_nonembed() as f64, rec.d_tokens as f64);
        self.law.evaluate(m.x, m.r, l_opt)
    }
}

/// One record per entry with `D = tokens_per_param * nominal N` and loss =
/// law + N(0, sigma^2). Returns the records and the noise-free losses.
pub fn generate_runs(entries: &[CorpusEntry], spec: &SyntheticSpec) -> (Vec<RunRecord>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sigma.max(0.0)).expect("finite sigma");
    let mut records = Vec::with_capacity(entries.len());
    let mut clean = Vec::with_capacity(entries.len());
    for e in entries {
        let arch = e.config();
        let nominal = parse_size_label(e.size_label).unwrap_or(arch.params().n_nonembed as f64);
        let mut rec = RunRecord {
            arch,
            size_label: Some(e.size_label.to_string()),
            variant: Some(e.variant.to_string()),
            d_tokens: (spec.tokens_per_param as f64 * nominal).round() as u64,
            loss: 0.0,
            tags: vec![SYNTHETIC_TAG.to_string()],
        };
        let y = spec.clean_loss(&rec);
        rec.loss = y + noise.sample(&mut rng);
        records.push(rec);
        clean.push(y);
    }
    (records, clean)
}

/// Corpus entries whose size label is in `sizes`, in table order.
pub fn corpus_subset(sizes: &[&str]) -> Vec<CorpusEntry> {
    crate::corpus::corpus()
        .iter()
        .filter(|e| sizes.contains(&e.size_label))
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_tagged() {
        let entries = corpus_subset(&["80M"]);
        let spec = SyntheticSpec::default();
        let (a, clean) = generate_runs(&entries, &spec);
        let (b, _) = generate_runs(&entries, &spec);
        assert_eq!(a, b);
        assert_eq!(a.len(), entries.len());
        assert!(a.iter().all(|r| r.tags == vec![SYNTHETIC_TAG.to_string()]));
        assert_eq!(a[0].d_tokens, 8_000_000_000);
        let max_dev = a.iter().zip(&clean).map(|(r, c)| (r.loss - c).abs()).fold(0.0, f64::max);
        assert!(max_dev < 10.0 * spec.sigma);
        let noiseless = SyntheticSpec { sigma: 0.0, ..spec };
        let (c, clean) = generate_runs(&entries, &noiseless);
        assert!(c.iter().zip(&clean).all(|(r, y)| r.loss == *y));
    }
}
