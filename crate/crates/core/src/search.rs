//! Inference-efficient architecture search: the closed-form loss optimum,
//! throughput maximisation under a loss ceiling, Pareto extraction and the
//! GQA local search with early stopping.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arch::{
    derived_metrics, enumerate_variants, feasible_gqa, solve_at_ratio, ArchError, ArchGridSpec,
    ArchitectureConfig, Snapping,
};
use crate::cost::{estimate_throughput, CostError, HardwareProfile, Workload};
use crate::fit::{fit_chinchilla, fit_conditional_law, FitError, FitOptions};
use crate::laws::{
    bucket_records, conditional_loss, optimal_xr, ref_loss, ConditionalLaw, LawError, LawForm,
    RefLossSource,
};
use crate::runs::RunRecord;

/// Default early-stopping tolerance of the GQA search, in nats.
pub const DEFAULT_GQA_EPSILON: f64 = 0.002;
pub const DEFAULT_BASELINE_GQA: u64 = 4;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("law has no separable optimum (joint form fixes only x*r = {xr})")]
    NoSeparableOptimum { xr: f64 },
    #[error("cannot realise optimum x*={x:.5}, r*={r:.4}: {source}")]
    Infeasible {
        x: f64,
        r: f64,
        #[source]
        source: ArchError,
    },
    #[error("loss budget {budget} is below the reference loss {l_opt}")]
    BudgetBelowReference { budget: f64, l_opt: f64 },
    #[error("no feasible candidate: minimum predicted loss {min_predicted_loss} exceeds budget {budget}")]
    NoFeasible { min_predicted_loss: f64, budget: f64 },
    #[error("empty candidate grid")]
    EmptyGrid,
    #[error("search problem n_target {problem} disagrees with grid n_target {grid}")]
    TargetMismatch { problem: u64, grid: u64 },
    #[error("gqa evaluator failed at gqa={gqa}: {message}")]
    Evaluator { gqa: u64, message: String },
    #[error("baseline gqa {gqa} does not divide the re-solved head count {n_head}")]
    BaselineInfeasible { gqa: u64, n_head: u64 },
    #[error("cannot derive a reference loss: {0}")]
    NoReference(String),
}

/// Realises the law's loss-optimal `(x*, r*)` at a parameter budget:
/// hidden size `snap(x*·sqrt(N))`, heads from the ratio, MLP width from the
/// remaining budget.
pub fn closed_form_architecture(
    law: &ConditionalLaw,
    n_target: u64,
    n_layers: u64,
    d_head: u64,
    gqa: u64,
    snapping: Snapping,
) -> Result<ArchitectureConfig, SearchError> {
    let opt = optimal_xr(law)?;
    let (x, r) = match opt.separable() {
        Some(v) => v,
        None => {
            let xr = match opt {
                crate::laws::ArchOptimum::Product { xr } => xr,
                _ => unreachable!(),
            };
            return Err(SearchError::NoSeparableOptimum { xr });
        }
    };
    let d_model = snapping.snap_d(x * (n_target as f64).sqrt());
    if d_model == 0 {
        return Err(SearchError::Infeasible {
            x,
            r,
            source: ArchError::InvalidGrid("hidden size snaps to zero".into()),
        });
    }
    solve_at_ratio(n_target, n_layers, d_model, d_head, gqa, r, snapping.f_multiple)
        .map_err(|source| SearchError::Infeasible { x, r, source })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchProblem {
    pub law: ConditionalLaw,
    pub reference: RefLossSource,
    pub n_target: u64,
    pub d_tokens: u64,
    /// Maximum allowable predicted loss `L_t`; may be `+inf`.
    pub loss_budget: f64,
    pub constraints: ArchGridSpec,
    pub hardware: HardwareProfile,
    pub workload: Workload,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateEvaluation {
    pub arch: ArchitectureConfig,
    pub x: f64,
    pub r: f64,
    pub n_nonembed: u64,
    pub predicted_loss: f64,
    /// Generated tokens per second; 0 when the workload does not fit memory.
    pub modeled_throughput: f64,
    pub fits_memory: bool,
    /// `predicted_loss <= loss_budget`.
    pub feasible: bool,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub candidates: Vec<CandidateEvaluation>,
    /// Index into `candidates`.
    pub best: usize,
}

impl SearchOutcome {
    pub fn best(&self) -> &CandidateEvaluation {
        &self.candidates[self.best]
    }
}

/// Predicted loss of one shape: the law at the shape's `(x, r)` calibrated by
/// the reference loss at the shape's own parameter count.
pub fn predict_loss(
    law: &ConditionalLaw,
    reference: &RefLossSource,
    arch: &ArchitectureConfig,
    d_tokens: u64,
) -> Result<f64, SearchError> {
    let m = derived_metrics(arch)?;
    let n = arch.params().n_nonembed as f64;
    let l_opt = ref_loss(reference, n, d_tokens as f64)?;
    Ok(conditional_loss(law, m.x, m.r, l_opt)?)
}

fn evaluate_candidate(
    problem: &SearchProblem,
    arch: ArchitectureConfig,
) -> Result<CandidateEvaluation, SearchError> {
    let m = derived_metrics(&arch)?;
    let predicted_loss = predict_loss(&problem.law, &problem.reference, &arch, problem.d_tokens)?;
    let (modeled_throughput, fits_memory) =
        match estimate_throughput(&arch, &problem.hardware, &problem.workload) {
            Ok(report) => (report.tokens_per_second, true),
            Err(CostError::ExceedsMemory { .. } | CostError::WeightsExceedCapacity { .. }) => (0.0, false),
            Err(e) => return Err(e.into()),
        };
    Ok(CandidateEvaluation {
        n_nonembed: arch.params().n_nonembed,
        x: m.x,
        r: m.r,
        arch,
        predicted_loss,
        modeled_throughput,
        fits_memory,
        feasible: predicted_loss <= problem.loss_budget,
        dominated: false,
    })
}

/// Ordering used to pick the best candidate: higher throughput, then lower
/// loss, then the lexicographically smaller shape.
fn better(a: &CandidateEvaluation, b: &CandidateEvaluation) -> bool {
    match a.modeled_throughput.total_cmp(&b.modeled_throughput) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.predicted_loss.total_cmp(&b.predicted_loss) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => a.arch.shape_key() < b.arch.shape_key(),
        },
    }
}

/// Maximises modeled throughput subject to `predicted_loss <= loss_budget`
/// over the enumerated grid. Candidates keep enumeration order; dominated
/// flags follow [`pareto_front`].
pub fn constrained_search(problem: &SearchProblem) -> Result<SearchOutcome, SearchError> {
    if problem.n_target != problem.constraints.n_target {
        return Err(SearchError::TargetMismatch {
            problem: problem.n_target,
            grid: problem.constraints.n_target,
        });
    }
    let l_opt = ref_loss(&problem.reference, problem.n_target as f64, problem.d_tokens as f64)?;
    if problem.loss_budget.is_nan() || problem.loss_budget < l_opt {
        return Err(SearchError::BudgetBelowReference {
            budget: problem.loss_budget,
            l_opt,
        });
    }
    let configs = enumerate_variants(&problem.constraints)?;
    if configs.is_empty() {
        return Err(SearchError::EmptyGrid);
    }
    let mut candidates = configs
        .into_par_iter()
        .map(|c| evaluate_candidate(problem, c))
        .collect::<Result<Vec<_>, _>>()?;
    pareto_front(&mut candidates);

    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.feasible && c.fits_memory && best.is_none_or(|b| better(c, &candidates[b])) {
            best = Some(i);
        }
    }
    match best {
        Some(best) => Ok(SearchOutcome { candidates, best }),
        None => Err(SearchError::NoFeasible {
            min_predicted_loss: candidates
                .iter()
                .map(|c| c.predicted_loss)
                .fold(f64::INFINITY, f64::min),
            budget: problem.loss_budget,
        }),
    }
}

/// Dominance flags for `(loss, throughput)` points: a point is dominated when
/// another has loss no higher and throughput no lower, one of them strictly.
/// Sort-and-sweep, `O(n log n)`.
pub fn dominated_flags(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[b].1.total_cmp(&points[a].1))
    });
    let mut flags = vec![false; points.len()];
    let mut best_lower = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let loss = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].0 == loss {
            j += 1;
        }
        // Sorted by throughput descending within the group.
        let group_max = points[order[i]].1;
        for &k in &order[i..j] {
            let t = points[k].1;
            flags[k] = best_lower >= t || group_max > t;
        }
        best_lower = best_lower.max(group_max);
        i = j;
    }
    flags
}

/// Sets `dominated` on every candidate and returns the indices of the
/// non-dominated ones, in input order.
pub fn pareto_front(candidates: &mut [CandidateEvaluation]) -> Vec<usize> {
    let points: Vec<(f64, f64)> = candidates
        .iter()
        .map(|c| (c.predicted_loss, c.modeled_throughput))
        .collect();
    let flags = dominated_flags(&points);
    let mut front = Vec::new();
    for (i, (c, d)) in candidates.iter_mut().zip(flags).enumerate() {
        c.dominated = d;
        if !d {
            front.push(i);
        }
    }
    front
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GqaEvaluation {
    pub gqa: u64,
    pub arch: ArchitectureConfig,
    pub evaluator_loss: f64,
    pub modeled_throughput: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GqaSearchOutcome {
    /// Visited candidates in ascending gqa order; the last may be the
    /// rejection that stopped the search.
    pub evaluations: Vec<GqaEvaluation>,
    pub chosen: ArchitectureConfig,
    pub chosen_gqa: u64,
    pub baseline_loss: f64,
}

pub struct GqaSearchSettings {
    pub baseline_gqa: u64,
    pub epsilon: f64,
    pub f_multiple: u64,
}

impl Default for GqaSearchSettings {
    fn default() -> Self {
        Self {
            baseline_gqa: DEFAULT_BASELINE_GQA,
            epsilon: DEFAULT_GQA_EPSILON,
            f_multiple: crate::arch::DEFAULT_F_MULTIPLE,
        }
    }
}

/// Walks gqa values upward from the baseline at fixed parameter budget,
/// hidden size and ratio, stopping at the first value whose evaluated loss
/// exceeds `baseline_loss + epsilon`; returns the fastest accepted shape.
///
/// Candidate gqa values are the divisors (at least the baseline) of the head
/// count obtained by re-solving `base` at the baseline gqa.
pub fn gqa_local_search<E>(
    base: &ArchitectureConfig,
    mut evaluator: E,
    settings: &GqaSearchSettings,
    hardware: &HardwareProfile,
    workload: &Workload,
) -> Result<GqaSearchOutcome, SearchError>
where
    E: FnMut(u64) -> Result<f64, String>,
{
    let m = derived_metrics(base)?;
    let n_target = base.params().n_nonembed;
    let rebuild = |gqa: u64| {
        solve_at_ratio(
            n_target,
            base.n_layers,
            base.d_model,
            base.d_head,
            gqa,
            m.r,
            settings.f_multiple,
        )
    };
    let baseline = rebuild(settings.baseline_gqa)?;
    let candidates: Vec<u64> = feasible_gqa(baseline.n_head)
        .into_iter()
        .filter(|&g| g >= settings.baseline_gqa)
        .collect();
    if candidates.first() != Some(&settings.baseline_gqa) {
        return Err(SearchError::BaselineInfeasible {
            gqa: settings.baseline_gqa,
            n_head: baseline.n_head,
        });
    }
    let throughput = |arch: &ArchitectureConfig| match estimate_throughput(arch, hardware, workload) {
        Ok(r) => Ok(r.tokens_per_second),
        Err(CostError::ExceedsMemory { .. } | CostError::WeightsExceedCapacity { .. }) => Ok(0.0),
        Err(e) => Err(SearchError::from(e)),
    };
    let mut call = |g: u64| evaluator(g).map_err(|message| SearchError::Evaluator { gqa: g, message });

    let baseline_loss = call(settings.baseline_gqa)?;
    let mut evaluations = vec![GqaEvaluation {
        gqa: settings.baseline_gqa,
        modeled_throughput: throughput(&baseline)?,
        arch: baseline,
        evaluator_loss: baseline_loss,
        accepted: true,
    }];
    for &g in &candidates[1..] {
        let Ok(arch) = rebuild(g) else { continue };
        let loss = call(g)?;
        let accepted = loss <= baseline_loss + settings.epsilon;
        evaluations.push(GqaEvaluation {
            gqa: g,
            modeled_throughput: throughput(&arch)?,
            arch,
            evaluator_loss: loss,
            accepted,
        });
        if !accepted {
            break;
        }
    }
    let mut chosen = 0;
    for (i, e) in evaluations.iter().enumerate() {
        if e.accepted && e.modeled_throughput > evaluations[chosen].modeled_throughput {
            chosen = i;
        }
    }
    Ok(GqaSearchOutcome {
        chosen: evaluations[chosen].arch.clone(),
        chosen_gqa: evaluations[chosen].gqa,
        baseline_loss,
        evaluations,
    })
}

/// How the loss ceiling of step 2 is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossBudget {
    Loss(f64),
    /// Use the law's predicted optimum, realised in closed form.
    Optimal,
}

/// Where the conditional law comes from.
pub enum LawInput<'a> {
    Law(ConditionalLaw),
    Records {
        records: &'a [RunRecord],
        form: LawForm,
        options: FitOptions,
    },
}

pub struct Algorithm1Inputs {
    /// `None` derives a Chinchilla reference from the records.
    pub reference: Option<RefLossSource>,
    pub n_target: u64,
    pub d_tokens: u64,
    pub loss_budget: LossBudget,
    pub grid: ArchGridSpec,
    pub hardware: HardwareProfile,
    pub workload: Workload,
    pub gqa: GqaSearchSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeStep {
    ClosedForm,
    Constrained { best: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm1Result {
    pub law: ConditionalLaw,
    pub reference: RefLossSource,
    pub architecture: ArchitectureConfig,
    pub gqa: u64,
    pub predicted_loss: f64,
    pub modeled_throughput: f64,
    pub step2: ShapeStep,
    pub candidates: Vec<CandidateEvaluation>,
    pub gqa_trace: Option<GqaSearchOutcome>,
}

/// Chinchilla reference fitted to the minimum loss of every
/// `(size bucket, D)` cell.
pub fn derive_reference(records: &[RunRecord]) -> Result<RefLossSource, SearchError> {
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    for bucket in bucket_records(records, crate::arch::DEFAULT_N_TOLERANCE) {
        let mut cells: Vec<(u64, f64)> = Vec::new();
        for &i in &bucket.members {
            let rec = &records[i];
            match cells.iter_mut().find(|(d, _)| *d == rec.d_tokens) {
                Some(cell) => cell.1 = cell.1.min(rec.loss),
                None => cells.push((rec.d_tokens, rec.loss)),
            }
        }
        points.extend(cells.into_iter().map(|(d, l)| (bucket.n_ref, d as f64, l)));
    }
    if points.len() < 5 {
        return Err(SearchError::NoReference(format!(
            "a Chinchilla fit needs at least 5 (size, tokens) cells, the records give {}",
            points.len()
        )));
    }
    let fit = fit_chinchilla(&points, &FitOptions::default())?;
    Ok(RefLossSource::Chinchilla(fit.params))
}

/// Runs the three search steps: ensure a reference and law, pick a shape
/// (closed form for the optimal budget, constrained search otherwise), then
/// optionally the GQA local search.
pub fn run_algorithm1<E>(
    law_input: LawInput<'_>,
    inputs: &Algorithm1Inputs,
    evaluator: Option<E>,
) -> Result<Algorithm1Result, SearchError>
where
    E: FnMut(u64) -> Result<f64, String>,
{
    let reference = match (&inputs.reference, &law_input) {
        (Some(r), _) => r.clone(),
        (None, LawInput::Records { records, .. }) => derive_reference(records)?,
        (None, LawInput::Law(_)) => {
            return Err(SearchError::NoReference(
                "a reference source or training records are required".into(),
            ))
        }
    };
    let law = match law_input {
        LawInput::Law(l) => l,
        LawInput::Records { records, form, options } => {
            fit_conditional_law(records, form, &reference, &options)?.law
        }
    };

    let (architecture, step2, candidates) = match inputs.loss_budget {
        LossBudget::Optimal => {
            let arch = closed_form_architecture(
                &law,
                inputs.n_target,
                inputs.grid.n_layers,
                inputs.grid.d_head,
                inputs.gqa.baseline_gqa,
                inputs.grid.snapping,
            )?;
            (arch, ShapeStep::ClosedForm, Vec::new())
        }
        LossBudget::Loss(budget) => {
            let problem = SearchProblem {
                law,
                reference: reference.clone(),
                n_target: inputs.n_target,
                d_tokens: inputs.d_tokens,
                loss_budget: budget,
                constraints: inputs.grid.clone(),
                hardware: inputs.hardware.clone(),
                workload: inputs.workload,
            };
            let outcome = constrained_search(&problem)?;
            let arch = outcome.best().arch.clone();
            (arch, ShapeStep::Constrained { best: outcome.best }, outcome.candidates)
        }
    };

    let gqa_trace = match evaluator {
        Some(eval) => Some(gqa_local_search(
            &architecture,
            eval,
            &inputs.gqa,
            &inputs.hardware,
            &inputs.workload,
        )?),
        None => None,
    };
    let architecture = gqa_trace.as_ref().map_or(architecture, |t| t.chosen.clone());
    let predicted_loss = predict_loss(&law, &reference, &architecture, inputs.d_tokens)?;
    let modeled_throughput = estimate_throughput(&architecture, &inputs.hardware, &inputs.workload)
        .map(|r| r.tokens_per_second)
        .unwrap_or(0.0);
    Ok(Algorithm1Result {
        law,
        reference,
        gqa: architecture.gqa,
        architecture,
        predicted_loss,
        modeled_throughput,
        step2,
        candidates,
        gqa_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::VariantAxis;
    use crate::laws::ChinchillaParams;

    #[test]
    fn closed_form_panda_1b() {
        let law = ConditionalLaw::reference_multiplicative();
        let c = closed_form_architecture(&law, 975_175_680, 16, 64, 4, Snapping::hardware_aligned()).unwrap();
        assert_eq!((c.d_model, c.n_head, c.f_size), (2560, 72, 4096));
        let r = derived_metrics(&c).unwrap().r;
        assert!((1.0..=1.1).contains(&r), "{r}");
    }

    #[test]
    fn closed_form_panda_3b_region() {
        let law = ConditionalLaw::reference_multiplicative_1b();
        let c = closed_form_architecture(&law, 2_880_000_000, 28, 128, 3, Snapping::hardware_aligned()).unwrap();
        assert_eq!(c.d_model, 4096);
        assert_eq!((c.n_head, c.f_size), (33, 4608));
        let r = derived_metrics(&c).unwrap().r;
        assert!((1.15..=1.30).contains(&r), "{r}");
    }

    #[test]
    fn closed_form_without_interior_optimum() {
        let law = ConditionalLaw::Multiplicative {
            a0: 2.7,
            a1: -0.1,
            a2: 0.0078,
            b0: 0.387,
            b1: 0.0063,
            b2: 0.0065,
        };
        let err = closed_form_architecture(&law, 975_175_680, 16, 64, 4, Snapping::default()).unwrap_err();
        assert!(err.to_string().contains("no interior optimum"), "{err}");
        let joint = ConditionalLaw::Joint { a0: 1.0, a1: 0.1, a2: 0.01 };
        assert!(matches!(
            closed_form_architecture(&joint, 975_175_680, 16, 64, 4, Snapping::default()),
            Err(SearchError::NoSeparableOptimum { .. })
        ));
    }

    #[test]
    fn pareto_small_cases() {
        assert_eq!(dominated_flags(&[(2.80, 100.0), (2.81, 90.0)]), vec![false, true]);
        assert_eq!(dominated_flags(&[(1.0, 1.0); 4]), vec![false; 4]);
        assert_eq!(dominated_flags(&[(1.0, 1.0), (1.0, 2.0)]), vec![true, false]);
        assert_eq!(dominated_flags(&[(1.0, 2.0), (2.0, 2.0)]), vec![false, true]);
        assert!(dominated_flags(&[]).is_empty());
    }

    fn problem(budget: f64) -> SearchProblem {
        SearchProblem {
            law: ConditionalLaw::reference_multiplicative(),
            reference: RefLossSource::Chinchilla(ChinchillaParams::hoffmann()),
            n_target: 975_175_680,
            d_tokens: 100_000_000_000,
            loss_budget: budget,
            constraints: ArchGridSpec {
                n_target: 975_175_680,
                n_tolerance: 0.1,
                n_layers: 16,
                d_head: 64,
                gqa_values: vec![4],
                d_model_values: vec![2048, 2560],
                axis: VariantAxis::Ratios(vec![1.0, 2.0, 4.0]),
                snapping: Snapping::default(),
            },
            hardware: HardwareProfile::a100_40g(),
            workload: Workload::default(),
        }
    }

    #[test]
    fn unconstrained_picks_max_throughput() {
        let out = constrained_search(&problem(f64::INFINITY)).unwrap();
        let max = out
            .candidates
            .iter()
            .map(|c| c.modeled_throughput)
            .fold(0.0, f64::max);
        assert_eq!(out.best().modeled_throughput, max);
        assert!(out.candidates.iter().all(|c| c.feasible));
    }

    #[test]
    fn impossible_budget() {
        let p = problem(f64::INFINITY);
        let out = constrained_search(&p).unwrap();
        let min = out.candidates.iter().map(|c| c.predicted_loss).fold(f64::INFINITY, f64::min);
        let l_opt = ref_loss(&p.reference, p.n_target as f64, p.d_tokens as f64).unwrap();
        if min - 1e-6 >= l_opt {
            match constrained_search(&problem(min - 1e-6)) {
                Err(SearchError::NoFeasible { min_predicted_loss, .. }) => assert_eq!(min_predicted_loss, min),
                other => panic!("{other:?}"),
            }
        }
        assert!(matches!(
            constrained_search(&problem(l_opt * 0.9)),
            Err(SearchError::BudgetBelowReference { .. })
        ));
    }

    fn surefire_base() -> ArchitectureConfig {
        ArchitectureConfig::new("base", 16, 2560, 36, 64, 4, 6144)
    }

    #[test]
    fn gqa_search_early_stop_and_choice() {
        let hw = HardwareProfile::a100_40g();
        let wl = Workload::default();
        let settings = GqaSearchSettings::default();
        let mut calls = Vec::new();
        let out = gqa_local_search(
            &surefire_base(),
            |g| {
                calls.push(g);
                Ok(if g <= 9 { 2.80 } else { 2.90 })
            },
            &settings,
            &hw,
            &wl,
        )
        .unwrap();
        assert_eq!(calls, vec![4, 6, 9, 12]);
        assert_eq!(out.chosen_gqa, 9);

        let out = gqa_local_search(&surefire_base(), |g| Ok(if g == 4 { 2.8 } else { 2.8 + 0.004 }), &settings, &hw, &wl)
            .unwrap();
        assert_eq!(out.chosen_gqa, 4);
        assert_eq!(out.evaluations.len(), 2);

        let out = gqa_local_search(&surefire_base(), |_| Ok(2.8), &settings, &hw, &wl).unwrap();
        let last = out.evaluations.last().unwrap();
        assert_eq!(out.chosen_gqa, last.gqa);
        assert!(out.evaluations.windows(2).all(|w| w[0].gqa < w[1].gqa));
        assert!(out
            .evaluations
            .iter()
            .all(|e| e.modeled_throughput <= last.modeled_throughput));
    }
}
