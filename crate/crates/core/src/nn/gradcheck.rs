//! Central finite-difference verification of [`CompactCnn::loss_and_grad`].

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::{CompactCnn, Tensor4};
use crate::math;
use crate::seed;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    /// Parameters to check in total, spread evenly over parameter groups.
    pub samples: usize,
    /// Pass threshold on the largest relative error.
    pub tolerance: f64,
    /// Denominator floor for the relative error, so parameters with
    /// (near-)zero gradient are judged on absolute error.
    pub floor: f64,
    /// Skip parameters whose `+eps` or `-eps` forward pass crosses a ReLU
    /// kink or flips a pooling argmax.
    pub skip_kinks: bool,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            tolerance: 1e-3,
            floor: 1e-8,
            skip_kinks: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub group: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub eps: f64,
    pub checked: usize,
    /// Candidates rejected because a perturbation crossed a kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradCheckEntry>,
    /// Largest relative error per parameter group.
    pub per_group: Vec<(String, f64)>,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = math::abs(analytic).max(math::abs(numeric)).max(floor);
    math::abs(analytic - numeric) / denom
}

/// Compares the analytic gradient against `(f(p + eps) - f(p - eps)) / 2eps`
/// on a random subset of parameters drawn from every layer.
pub fn gradient_check(
    model: &CompactCnn,
    batch: &Tensor4,
    labels: &[usize],
    eps: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_grad(batch, labels)?;
    let (_, base_pattern) = model.loss_with_pattern(batch, Some(labels))?;
    let groups = model.layout().groups();
    // Smallest groups first, so whatever a group cannot supply (too few
    // parameters, or too many kink crossings) is handed on to larger ones.
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by_key(|&g| groups[g].1.len());
    let mut group_max = alloc::vec![0.0f64; groups.len()];
    let mut rng = seed::rng(seed::mix(opts.seed, &[0x6772_6164]));
    let mut probe = model.clone();

    let mut report = GradCheckReport {
        eps,
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
        worst: None,
        per_group: Vec::new(),
        passed: false,
    };
    for (k, &g) in order.iter().enumerate() {
        let (name, range) = &groups[g];
        let left = opts.samples.saturating_sub(report.checked);
        let quota = left.div_ceil(groups.len() - k);
        let mut candidates: Vec<usize> = range.clone().collect();
        let mut taken = 0;
        while taken < quota && !candidates.is_empty() {
            let pick = rng.random_range(0..candidates.len());
            let index = candidates.swap_remove(pick);
            let original = probe.params()[index];

            probe.params_mut()[index] = original + eps;
            let (plus, plus_pattern) = probe.loss_with_pattern(batch, Some(labels))?;
            probe.params_mut()[index] = original - eps;
            let (minus, minus_pattern) = probe.loss_with_pattern(batch, Some(labels))?;
            probe.params_mut()[index] = original;

            if opts.skip_kinks && (plus_pattern != base_pattern || minus_pattern != base_pattern) {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = relative_error(analytic[index], numeric, opts.floor);
            group_max[g] = group_max[g].max(rel);
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some(GradCheckEntry {
                    group: name.clone(),
                    index,
                    analytic: analytic[index],
                    numeric,
                    rel_error: rel,
                });
            }
            taken += 1;
            report.checked += 1;
        }
    }
    report.per_group = groups.into_iter().map(|(name, _)| name).zip(group_max).collect();
    report.passed = report.checked > 0 && report.max_rel_error < opts.tolerance;
    Ok(report)
}
