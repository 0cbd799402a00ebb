//! Disparity and normal metrics plus the three scoring losses used for
//! training-style evaluation. All reductions use fixed-order compensated
//! summation so parallel callers and column rotations cannot perturb results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::disparity::{DisparityMap, DisparityUnit};
use crate::error::{Error, Result};
use crate::field::Mask;
use crate::normals::{angular_error, NormalMap};

/// Default decay factor for iterate-weighted losses.
pub const LOSS_GAMMA_DEFAULT: f64 = 0.9;

/// Angular accuracy thresholds, degrees.
pub const DELTA_THRESHOLDS_DEG: [f64; 5] = [5.0, 7.5, 11.5, 22.5, 30.0];

/// Named metric values over one evaluated pixel set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: BTreeMap<String, f64>,
    /// Number of pixels the metrics were computed over.
    pub count: usize,
    /// Echo of the evaluation configuration (units, masks applied).
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    /// Renders the metrics as one aligned header row plus one value row.
    pub fn to_table(&self) -> String {
        let mut header = String::new();
        let mut values = String::new();
        for (name, value) in &self.metrics {
            let cell = format!("{value:.4}");
            let width = name.len().max(cell.len());
            header.push_str(&format!("{name:>width$}  "));
            values.push_str(&format!("{cell:>width$}  "));
        }
        format!(
            "{}\n{}\n({} pixels)\n",
            header.trim_end(),
            values.trim_end(),
            self.count
        )
    }
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

fn excluded(exclude: Option<&Mask>, u: usize, v: usize) -> bool {
    exclude.map(|m| m.get(u, v)).unwrap_or(false)
}

fn check_exclude_lattice(exclude: Option<&Mask>, lattice: crate::sphere::ErpLattice) -> Result<()> {
    if let Some(m) = exclude {
        if m.lattice() != lattice {
            return Err(Error::Usage(
                "exclusion mask lattice does not match the maps".into(),
            ));
        }
    }
    Ok(())
}

/// Disparity accuracy in pixels: MAE, RMSE, BP-1, BP-2, and D1.
///
/// Radian inputs are converted to pixels first. Pixels count when both maps
/// are valid and `exclude` (true = drop, e.g. ground-truth occlusion) does
/// not cover them. BP-X is the percentage with |error| >= X; D1 the
/// percentage with |error| >= 3 and >= 5% of the ground truth.
pub fn disparity_metrics(
    pred: &DisparityMap,
    gt: &DisparityMap,
    exclude: Option<&Mask>,
) -> Result<EvalReport> {
    if pred.lattice() != gt.lattice() {
        return Err(Error::Usage("prediction and ground truth lattices differ".into()));
    }
    check_exclude_lattice(exclude, pred.lattice())?;
    let p = pred.convert_to(DisparityUnit::Pixels);
    let g = gt.convert_to(DisparityUnit::Pixels);
    let lattice = p.lattice();
    let mut count = 0usize;
    let mut abs = Kahan::default();
    let mut sq = Kahan::default();
    let (mut bp1, mut bp2, mut d1) = (0usize, 0usize, 0usize);
    for v in 0..lattice.height() {
        for u in 0..lattice.width() {
            if !p.mask().get(u, v) || !g.mask().get(u, v) || excluded(exclude, u, v) {
                continue;
            }
            let truth = g.values().get(u, v);
            let e = (p.values().get(u, v) - truth).abs();
            count += 1;
            abs.add(e);
            sq.add(e * e);
            bp1 += (e >= 1.0) as usize;
            bp2 += (e >= 2.0) as usize;
            d1 += (e >= 3.0 && e >= 0.05 * truth) as usize;
        }
    }
    if count == 0 {
        return Err(Error::EmptyEvaluation(
            "no overlapping valid pixels to evaluate".into(),
        ));
    }
    let n = count as f64;
    let pct = |k: usize| 100.0 * k as f64 / n;
    let metrics = BTreeMap::from([
        ("BP-1".to_string(), pct(bp1)),
        ("BP-2".to_string(), pct(bp2)),
        ("D1".to_string(), pct(d1)),
        ("MAE".to_string(), abs.value() / n),
        ("RMSE".to_string(), (sq.value() / n).sqrt()),
    ]);
    Ok(EvalReport {
        metrics,
        count,
        config: BTreeMap::from([
            ("unit".to_string(), "pixels".to_string()),
            (
                "exclusion_mask".to_string(),
                if exclude.is_some() { "applied" } else { "none" }.to_string(),
            ),
        ]),
    })
}

/// Normal accuracy: mean and RMSE angular error in degrees plus the
/// delta-threshold accuracy percentages (fraction strictly below each
/// threshold).
pub fn normal_metrics(
    pred: &NormalMap,
    gt: &NormalMap,
    exclude: Option<&Mask>,
) -> Result<EvalReport> {
    check_exclude_lattice(exclude, pred.vectors().lattice())?;
    let err = angular_error(pred, gt)?;
    let lattice = err.lattice();
    let mut count = 0usize;
    let mut sum = Kahan::default();
    let mut sq = Kahan::default();
    let mut below = [0usize; DELTA_THRESHOLDS_DEG.len()];
    for v in 0..lattice.height() {
        for u in 0..lattice.width() {
            let e = err.get(u, v);
            if !e.is_finite() || excluded(exclude, u, v) {
                continue;
            }
            let deg = e.to_degrees();
            count += 1;
            sum.add(deg);
            sq.add(deg * deg);
            for (slot, threshold) in below.iter_mut().zip(DELTA_THRESHOLDS_DEG) {
                *slot += ((deg) < threshold) as usize;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyEvaluation(
            "no overlapping valid normals to evaluate".into(),
        ));
    }
    let n = count as f64;
    let mut metrics = BTreeMap::from([
        ("mean_deg".to_string(), sum.value() / n),
        ("rmse_deg".to_string(), (sq.value() / n).sqrt()),
    ]);
    for (threshold, hits) in DELTA_THRESHOLDS_DEG.iter().zip(below) {
        metrics.insert(format!("delta_{threshold}"), 100.0 * hits as f64 / n);
    }
    Ok(EvalReport {
        metrics,
        count,
        config: BTreeMap::from([
            ("unit".to_string(), "degrees".to_string()),
            (
                "exclusion_mask".to_string(),
                if exclude.is_some() { "applied" } else { "none" }.to_string(),
            ),
        ]),
    })
}

/// Mean squared angular error between two normal maps, radians squared.
pub fn loss_normal(pred: &NormalMap, gt: &NormalMap, exclude: Option<&Mask>) -> Result<f64> {
    check_exclude_lattice(exclude, pred.vectors().lattice())?;
    let err = angular_error(pred, gt)?;
    let lattice = err.lattice();
    let mut count = 0usize;
    let mut sum = Kahan::default();
    for v in 0..lattice.height() {
        for u in 0..lattice.width() {
            let e = err.get(u, v);
            if !e.is_finite() || excluded(exclude, u, v) {
                continue;
            }
            count += 1;
            sum.add(e * e);
        }
    }
    if count == 0 {
        return Err(Error::EmptyEvaluation("no valid normals to score".into()));
    }
    Ok(sum.value() / count as f64)
}

/// Mean |pred - gt| in pixels over jointly valid, non-excluded pixels.
fn masked_l1(pred: &DisparityMap, gt: &DisparityMap, exclude: Option<&Mask>) -> Result<f64> {
    masked_error_mean(pred, gt, exclude, |e| e)
}

fn masked_error_mean(
    pred: &DisparityMap,
    gt: &DisparityMap,
    exclude: Option<&Mask>,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    if pred.lattice() != gt.lattice() {
        return Err(Error::Usage("prediction and ground truth lattices differ".into()));
    }
    check_exclude_lattice(exclude, pred.lattice())?;
    let p = pred.convert_to(DisparityUnit::Pixels);
    let g = gt.convert_to(DisparityUnit::Pixels);
    let lattice = p.lattice();
    let mut count = 0usize;
    let mut sum = Kahan::default();
    for v in 0..lattice.height() {
        for u in 0..lattice.width() {
            if !p.mask().get(u, v) || !g.mask().get(u, v) || excluded(exclude, u, v) {
                continue;
            }
            count += 1;
            sum.add(f((p.values().get(u, v) - g.values().get(u, v)).abs()));
        }
    }
    if count == 0 {
        return Err(Error::EmptyEvaluation("no valid pixels to score".into()));
    }
    Ok(sum.value() / count as f64)
}

fn smooth_l1(e: f64) -> f64 {
    // Transition at one pixel.
    if e <= 1.0 {
        0.5 * e * e
    } else {
        e - 0.5
    }
}

/// Disparity training-style loss: smooth-L1 on the initial prediction plus
/// geometrically decayed L1 terms over refinement iterates (weight
/// `gamma^(K-k)` for iterate k of K).
pub fn loss_disparity(
    initial: &DisparityMap,
    iterates: &[DisparityMap],
    gt: &DisparityMap,
    gamma: f64,
    exclude: Option<&Mask>,
) -> Result<f64> {
    if !(0.0 < gamma && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma {gamma} must lie in (0, 1]")));
    }
    let mut total = masked_error_mean(initial, gt, exclude, smooth_l1)?;
    let k_total = iterates.len();
    for (i, iterate) in iterates.iter().enumerate() {
        let weight = gamma.powi((k_total - 1 - i) as i32);
        total += weight * masked_l1(iterate, gt, exclude)?;
    }
    Ok(total)
}

/// Negative-log-likelihood style loss over refinement iterates:
/// `sum_k gamma^(K-k) * mean(|d_k - gt| / sigma_k + ln sigma_k)`.
pub fn loss_nll(
    iterates: &[DisparityMap],
    sigmas: &[crate::field::ScalarField],
    gt: &DisparityMap,
    gamma: f64,
    exclude: Option<&Mask>,
) -> Result<f64> {
    if !(0.0 < gamma && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma {gamma} must lie in (0, 1]")));
    }
    if iterates.len() != sigmas.len() {
        return Err(Error::Usage(format!(
            "{} iterates but {} sigma fields",
            iterates.len(),
            sigmas.len()
        )));
    }
    let g = gt.convert_to(DisparityUnit::Pixels);
    let lattice = g.lattice();
    check_exclude_lattice(exclude, lattice)?;
    let k_total = iterates.len();
    let mut total = 0.0;
    for (i, (iterate, sigma)) in iterates.iter().zip(sigmas).enumerate() {
        if iterate.lattice() != lattice || sigma.lattice() != lattice {
            return Err(Error::Usage("iterate lattices differ from ground truth".into()));
        }
        for v in 0..lattice.height() {
            for u in 0..lattice.width() {
                let s = sigma.get(u, v);
                if !(s > 0.0) {
                    return Err(Error::Domain(format!(
                        "sigma must be positive everywhere, got {s} at ({u}, {v})"
                    )));
                }
            }
        }
        let p = iterate.convert_to(DisparityUnit::Pixels);
        let mut count = 0usize;
        let mut sum = Kahan::default();
        for v in 0..lattice.height() {
            for u in 0..lattice.width() {
                if !p.mask().get(u, v) || !g.mask().get(u, v) || excluded(exclude, u, v) {
                    continue;
                }
                let s = sigma.get(u, v);
                let e = (p.values().get(u, v) - g.values().get(u, v)).abs();
                count += 1;
                sum.add(e / s + s.ln());
            }
        }
        if count == 0 {
            return Err(Error::EmptyEvaluation("no valid pixels to score".into()));
        }
        total += gamma.powi((k_total - 1 - i) as i32) * sum.value() / count as f64;
    }
    Ok(total)
}
