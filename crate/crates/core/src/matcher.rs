//! Classical stereo matching for vertically aligned ERP pairs: census cost
//! volume over polar-angle shifts, semi-global aggregation, subpixel
//! winner-take-all with a cost-margin uncertainty, and a left-right check.
//!
//! Correspondence convention: with the bottom view as reference, the match
//! for bottom pixel (u, v) at disparity d lies at top pixel (u, v + d) — the
//! top camera sees every surface point at a larger polar angle. Swapping the
//! reference negates the shift. Longitude always wraps circularly; polar
//! shifts never cross the poles.

use rayon::prelude::*;

use crate::disparity::{DisparityMap, DisparityUnit};
use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField, VectorField};
use crate::rig::ReferenceView;
use crate::sphere::ErpLattice;

/// Number of semi-global aggregation directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PathCount {
    Four,
    Eight,
}

/// Matcher settings; `default()` gives the artifact defaults, and fields
/// omitted from a serialized form fall back to them.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherParams {
    /// Largest candidate polar shift, pixels; candidates are 0..=max.
    pub max_disparity: usize,
    /// Census window (width, height), both odd, at most 64 comparison bits.
    pub census_window: (usize, usize),
    /// Penalty for a one-level disparity change along a path.
    pub p1: f32,
    /// Penalty for larger disparity jumps; at least `p1`.
    pub p2: f32,
    pub paths: PathCount,
    /// Winner-take-all ambiguity gate: invalid when best cost >= ratio *
    /// second-best cost (second best taken outside +-1 of the winner).
    pub uniqueness_ratio: f64,
    /// Largest allowed |reference - other| disagreement in the left-right
    /// check, pixels.
    pub lr_threshold: f64,
}

impl Default for MatcherParams {
    fn default() -> MatcherParams {
        MatcherParams {
            max_disparity: 64,
            census_window: (9, 7),
            p1: 10.0,
            p2: 120.0,
            paths: PathCount::Eight,
            uniqueness_ratio: 0.95,
            lr_threshold: 1.0,
        }
    }
}

impl MatcherParams {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.census_window;
        if w % 2 == 0 || h % 2 == 0 || w == 0 || h == 0 {
            return Err(Error::Config(format!(
                "census window {w}x{h} must have odd positive dimensions"
            )));
        }
        if w * h - 1 > 64 {
            return Err(Error::Config(format!(
                "census window {w}x{h} needs {} comparison bits; at most 64 fit",
                w * h - 1
            )));
        }
        if !(self.p1.is_finite() && self.p2.is_finite() && self.p1 >= 0.0 && self.p2 >= 0.0) {
            return Err(Error::Config(
                "path penalties must be finite and nonnegative".into(),
            ));
        }
        if self.p1 > self.p2 {
            return Err(Error::Config(format!(
                "p1 = {} must not exceed p2 = {}",
                self.p1, self.p2
            )));
        }
        if !(0.0 < self.uniqueness_ratio && self.uniqueness_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "uniqueness ratio {} must lie in (0, 1]",
                self.uniqueness_ratio
            )));
        }
        if self.lr_threshold.is_nan() || self.lr_threshold < 0.0 {
            return Err(Error::Config(
                "left-right threshold must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Checks the lattice-dependent invariant 1 <= max_disparity < height.
    pub fn validate_for(&self, lattice: ErpLattice) -> Result<()> {
        self.validate()?;
        if self.max_disparity == 0 || self.max_disparity >= lattice.height() {
            return Err(Error::Config(format!(
                "max disparity {} must lie in [1, {})",
                self.max_disparity,
                lattice.height()
            )));
        }
        Ok(())
    }

    fn directions(&self) -> &'static [(isize, isize)] {
        match self.paths {
            PathCount::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            PathCount::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (-1, 1),
                (1, -1),
                (-1, -1),
            ],
        }
    }
}

/// Rec. 601 luma of a linear RGB field.
pub fn to_luma(rgb: &VectorField) -> ScalarField {
    ScalarField::from_fn(rgb.lattice(), |u, v| {
        let c = rgb.get(u, v);
        0.299 * c.x + 0.587 * c.y + 0.114 * c.z
    })
}

/// Per-pixel census descriptors: one bit per window neighbor, set when the
/// neighbor is brighter than the center.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusField {
    lattice: ErpLattice,
    bits: Vec<u64>,
    comparisons: u32,
}

impl CensusField {
    pub fn lattice(&self) -> ErpLattice {
        self.lattice
    }

    pub fn get(&self, u: usize, v: usize) -> u64 {
        self.bits[v * self.lattice.width() + u]
    }

    /// Number of comparison bits per descriptor.
    pub fn comparisons(&self) -> u32 {
        self.comparisons
    }
}

/// Census transform with circular wrap in longitude and clamping at the
/// poles. Bits are ordered row-major over window offsets, most significant
/// first.
pub fn census_transform(gray: &ScalarField, window: (usize, usize)) -> Result<CensusField> {
    let params = MatcherParams {
        census_window: window,
        ..MatcherParams::default()
    };
    params.validate()?;
    let lattice = gray.lattice();
    let (w, h) = window;
    let (hw, hh) = (w as isize / 2, h as isize / 2);
    let width = lattice.width();
    let bits = (0..lattice.len())
        .into_par_iter()
        .map(|idx| {
            let (u, v) = ((idx % width) as isize, (idx / width) as isize);
            let center = gray.get(u as usize, v as usize);
            let mut code = 0u64;
            for dv in -hh..=hh {
                for du in -hw..=hw {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    code <<= 1;
                    if gray.get_wrapped(u + du, v + dv) > center {
                        code |= 1;
                    }
                }
            }
            code
        })
        .collect();
    Ok(CensusField {
        lattice,
        bits,
        comparisons: (w * h - 1) as u32,
    })
}

/// Dense matching costs over candidate shifts 0..=max_disparity; lower is
/// better.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    lattice: ErpLattice,
    max_disparity: usize,
    data: Vec<f32>,
}

impl CostVolume {
    fn zeros(lattice: ErpLattice, max_disparity: usize) -> CostVolume {
        CostVolume {
            lattice,
            max_disparity,
            data: vec![0.0; lattice.len() * (max_disparity + 1)],
        }
    }

    pub fn lattice(&self) -> ErpLattice {
        self.lattice
    }

    pub fn max_disparity(&self) -> usize {
        self.max_disparity
    }

    /// Number of candidate planes, max_disparity + 1.
    pub fn planes(&self) -> usize {
        self.max_disparity + 1
    }

    pub fn get(&self, u: usize, v: usize, d: usize) -> f32 {
        self.data[(v * self.lattice.width() + u) * self.planes() + d]
    }

    pub fn set(&mut self, u: usize, v: usize, d: usize, cost: f32) {
        let planes = self.planes();
        self.data[(v * self.lattice.width() + u) * planes + d] = cost;
    }

    fn slice(&self, u: usize, v: usize) -> &[f32] {
        let planes = self.planes();
        let start = (v * self.lattice.width() + u) * planes;
        &self.data[start..start + planes]
    }
}

/// Builds the census Hamming cost volume for the given reference view.
/// Candidate d pairs reference pixel (u, v) with the other view's pixel
/// (u, v + d) for the bottom reference and (u, v - d) for the top; rows
/// beyond the poles get a saturated cost of one more than the census bit
/// count.
pub fn build_cost_volume(
    bottom: &CensusField,
    top: &CensusField,
    params: &MatcherParams,
    reference: ReferenceView,
) -> Result<CostVolume> {
    if bottom.lattice() != top.lattice() {
        return Err(Error::Usage(format!(
            "census lattices differ: {}x{} vs {}x{}",
            bottom.lattice().width(),
            bottom.lattice().height(),
            top.lattice().width(),
            top.lattice().height()
        )));
    }
    if bottom.comparisons() != top.comparisons() {
        return Err(Error::Usage(
            "census windows differ between the two views".into(),
        ));
    }
    let lattice = bottom.lattice();
    params.validate_for(lattice)?;
    let (reference_field, other, sign) = match reference {
        ReferenceView::Bottom => (bottom, top, 1i64),
        ReferenceView::Top => (top, bottom, -1i64),
    };
    let saturated = (bottom.comparisons() + 1) as f32;
    let planes = params.max_disparity + 1;
    let width = lattice.width();
    let height = lattice.height();
    let mut vol = CostVolume::zeros(lattice, params.max_disparity);
    vol.data
        .par_chunks_mut(planes)
        .enumerate()
        .for_each(|(idx, costs)| {
            let (u, v) = (idx % width, idx / width);
            let code = reference_field.get(u, v);
            for (d, cost) in costs.iter_mut().enumerate() {
                let v2 = v as i64 + sign * d as i64;
                *cost = if (0..height as i64).contains(&v2) {
                    (code ^ other.get(u, v2 as usize)).count_ones() as f32
                } else {
                    saturated
                };
            }
        });
    Ok(vol)
}

/// Sweeps a wrapped horizontal recursion this many times; a fixed iteration
/// count keeps the circular paths exactly shift-equivariant in longitude.
const HORIZONTAL_SWEEPS: usize = 24;

/// One dynamic-programming step: best predecessor cost per disparity with
/// penalties P1 (one-level change) and P2 (jump), renormalized by the
/// predecessor minimum.
fn relax(prev: &[f32], cost: &[f32], out: &mut [f32], p1: f32, p2: f32) {
    let min_prev = prev.iter().copied().fold(f32::INFINITY, f32::min);
    let n = prev.len();
    for d in 0..n {
        let mut best = prev[d];
        if d > 0 {
            best = best.min(prev[d - 1] + p1);
        }
        if d + 1 < n {
            best = best.min(prev[d + 1] + p1);
        }
        best = best.min(min_prev + p2);
        out[d] = cost[d] + best - min_prev;
    }
}

fn add_assign(acc: &mut [f32], row: &[f32]) {
    for (a, b) in acc.iter_mut().zip(row) {
        *a += b;
    }
}

/// Accumulates one vertical or diagonal path (dy != 0): rows advance away
/// from one pole, each pixel relaxing from (u - dx, v - dy) with circular
/// wrap in u. Paths terminate at the poles.
fn accumulate_sloped(vol: &CostVolume, params: &MatcherParams, dx: isize, dy: isize, acc: &mut [f32]) {
    let lattice = vol.lattice();
    let (width, height) = (lattice.width(), lattice.height());
    let planes = vol.planes();
    let row_len = width * planes;
    let mut prev = vec![0.0f32; row_len];
    let mut cur = vec![0.0f32; row_len];
    let rows: Vec<usize> = if dy > 0 {
        (0..height).collect()
    } else {
        (0..height).rev().collect()
    };
    for (i, &v) in rows.iter().enumerate() {
        if i == 0 {
            cur.copy_from_slice(&vol.data[v * row_len..(v + 1) * row_len]);
        } else {
            cur.par_chunks_mut(planes).enumerate().for_each(|(u, out)| {
                let pu = lattice.wrap_u(u as isize - dx);
                relax(
                    &prev[pu * planes..(pu + 1) * planes],
                    vol.slice(u, v),
                    out,
                    params.p1,
                    params.p2,
                );
            });
        }
        add_assign(&mut acc[v * row_len..(v + 1) * row_len], &cur);
        std::mem::swap(&mut prev, &mut cur);
    }
}

/// Accumulates one horizontal path (dy == 0) with circular wrap: a fixed
/// number of Jacobi sweeps of the recursion, each reading the whole previous
/// sweep, so the result commutes exactly with column rotation.
fn accumulate_horizontal(vol: &CostVolume, params: &MatcherParams, dx: isize, acc: &mut [f32]) {
    let lattice = vol.lattice();
    let width = lattice.width();
    let planes = vol.planes();
    let row_len = width * planes;
    acc.par_chunks_mut(row_len).enumerate().for_each(|(v, acc_row)| {
        let cost_row = &vol.data[v * row_len..(v + 1) * row_len];
        let mut state = cost_row.to_vec();
        let mut next = vec![0.0f32; row_len];
        for _ in 0..HORIZONTAL_SWEEPS {
            for u in 0..width {
                let pu = lattice.wrap_u(u as isize - dx);
                relax(
                    &state[pu * planes..(pu + 1) * planes],
                    &cost_row[u * planes..(u + 1) * planes],
                    &mut next[u * planes..(u + 1) * planes],
                    params.p1,
                    params.p2,
                );
            }
            std::mem::swap(&mut state, &mut next);
        }
        add_assign(acc_row, &state);
    });
}

/// Semi-global aggregation: sums renormalized dynamic-programming path costs
/// over the configured direction set.
pub fn sgm_aggregate(vol: &CostVolume, params: &MatcherParams) -> Result<CostVolume> {
    params.validate_for(vol.lattice())?;
    let mut acc = CostVolume::zeros(vol.lattice(), vol.max_disparity());
    for &(dx, dy) in params.directions() {
        if dy == 0 {
            accumulate_horizontal(vol, params, dx, &mut acc.data);
        } else {
            accumulate_sloped(vol, params, dx, dy, &mut acc.data);
        }
    }
    Ok(acc)
}

/// Uncertainty floor, pixels: the sigma reached as the cost margin grows.
pub const SIGMA_MIN: f64 = 0.5;
/// Uncertainty scale: sigma = SIGMA_MIN + SIGMA_SCALE / (margin + SIGMA_EPS).
pub const SIGMA_SCALE: f64 = 8.0;
/// Stabilizer keeping the margin-to-sigma map finite at zero margin.
pub const SIGMA_EPS: f64 = 1.0;

/// Winner-take-all extraction with parabola subpixel refinement.
///
/// A pixel is invalid when the winner sits at the top of the search range or
/// when the best cost is at least `uniqueness_ratio` times the second-best
/// cost found outside +-1 of the winner (so flat slices are invalid). A
/// winner at d = 0 is valid but is not refined. Uncertainty is
/// `SIGMA_MIN + SIGMA_SCALE / (margin + SIGMA_EPS)` with margin = second
/// best minus best, so ambiguous pixels get large sigma.
pub fn extract_disparity(
    vol: &CostVolume,
    params: &MatcherParams,
) -> Result<(DisparityMap, ScalarField)> {
    params.validate_for(vol.lattice())?;
    let lattice = vol.lattice();
    let width = lattice.width();
    let planes = vol.planes();
    let results: Vec<(f64, bool, f64)> = vol
        .data
        .par_chunks(planes)
        .map(|costs| {
            let mut d_star = 0usize;
            for (d, &c) in costs.iter().enumerate() {
                if c < costs[d_star] {
                    d_star = d;
                }
            }
            let c1 = costs[d_star] as f64;
            let mut c2 = f64::INFINITY;
            for (d, &c) in costs.iter().enumerate() {
                if d + 1 < d_star || d > d_star + 1 {
                    c2 = c2.min(c as f64);
                }
            }
            let mut valid = d_star != vol.max_disparity();
            if c2.is_finite() && c1 >= params.uniqueness_ratio * c2 {
                valid = false;
            }
            let disparity = if d_star == 0 || d_star == vol.max_disparity() {
                d_star as f64
            } else {
                let (a, b, c) = (
                    costs[d_star - 1] as f64,
                    costs[d_star] as f64,
                    costs[d_star + 1] as f64,
                );
                let denom = a - 2.0 * b + c;
                // b is the minimum, so |a - c| <= denom and the vertex
                // offset stays within [-1/2, 1/2].
                let offset = if denom > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
                d_star as f64 + offset
            };
            let sigma = SIGMA_MIN + SIGMA_SCALE / ((c2 - c1).max(0.0) + SIGMA_EPS);
            (disparity, valid, sigma)
        })
        .collect();
    let mut values = ScalarField::new_filled(lattice, f64::NAN);
    let mut mask = Mask::new_filled(lattice, false);
    let mut sigma = ScalarField::new_filled(lattice, 0.0);
    for (idx, &(d, valid, s)) in results.iter().enumerate() {
        let (u, v) = (idx % width, idx / width);
        if valid {
            values.set(u, v, d);
        }
        mask.set(u, v, valid);
        sigma.set(u, v, s);
    }
    Ok((DisparityMap::new(values, DisparityUnit::Pixels, mask)?, sigma))
}

fn lr_consistency_for(
    reference: ReferenceView,
    disp_ref: &DisparityMap,
    disp_other: &DisparityMap,
    threshold: f64,
) -> Result<Mask> {
    if disp_ref.lattice() != disp_other.lattice() {
        return Err(Error::Usage(
            "left-right maps live on different lattices".into(),
        ));
    }
    let a = disp_ref.convert_to(DisparityUnit::Pixels);
    let b = disp_other.convert_to(DisparityUnit::Pixels);
    let lattice = a.lattice();
    let height = lattice.height() as i64;
    let sign = match reference {
        ReferenceView::Bottom => 1i64,
        ReferenceView::Top => -1i64,
    };
    Ok(Mask::from_fn(lattice, |u, v| {
        if !a.mask().get(u, v) {
            return false;
        }
        let d = a.values().get(u, v);
        let v2 = v as i64 + sign * d.round() as i64;
        if !(0..height).contains(&v2) {
            return false;
        }
        let v2 = v2 as usize;
        b.mask().get(u, v2) && (d - b.values().get(u, v2)).abs() <= threshold
    }))
}

/// Left-right consistency: a bottom-reference pixel stays valid when the
/// top-reference map agrees at the corresponding row within `threshold`
/// pixels.
pub fn lr_consistency(
    disp_bottom: &DisparityMap,
    disp_top: &DisparityMap,
    threshold: f64,
) -> Result<Mask> {
    lr_consistency_for(ReferenceView::Bottom, disp_bottom, disp_top, threshold)
}

/// Full matching output on the reference view.
#[derive(Debug, Clone)]
pub struct MatchResult {
    /// Subpixel disparity in pixels; the mask equals `validity`.
    pub disparity: DisparityMap,
    /// Per-pixel uncertainty, pixels.
    pub sigma: ScalarField,
    /// Pixels that survived extraction and the left-right check.
    pub validity: Mask,
}

/// Matches a rectified top-bottom pair with the bottom view as reference.
pub fn match_pair(
    bottom_rgb: &VectorField,
    top_rgb: &VectorField,
    params: &MatcherParams,
) -> Result<MatchResult> {
    match_pair_with_reference(bottom_rgb, top_rgb, params, ReferenceView::Bottom)
}

/// Matches a rectified top-bottom pair on the chosen reference view:
/// grayscale, census, cost volume, semi-global aggregation, subpixel
/// extraction, and a left-right check against the swapped-reference result.
pub fn match_pair_with_reference(
    bottom_rgb: &VectorField,
    top_rgb: &VectorField,
    params: &MatcherParams,
    reference: ReferenceView,
) -> Result<MatchResult> {
    if bottom_rgb.lattice() != top_rgb.lattice() {
        return Err(Error::Usage("view lattices differ".into()));
    }
    params.validate_for(bottom_rgb.lattice())?;
    let census_bottom = census_transform(&to_luma(bottom_rgb), params.census_window)?;
    let census_top = census_transform(&to_luma(top_rgb), params.census_window)?;
    let vol_ref = build_cost_volume(&census_bottom, &census_top, params, reference)?;
    let vol_other = build_cost_volume(&census_bottom, &census_top, params, reference.opposite())?;
    let (disp_ref, sigma) = extract_disparity(&sgm_aggregate(&vol_ref, params)?, params)?;
    let (disp_other, _) = extract_disparity(&sgm_aggregate(&vol_other, params)?, params)?;
    let validity = lr_consistency_for(reference, &disp_ref, &disp_other, params.lr_threshold)?;
    let disparity = DisparityMap::new(
        disp_ref.values().clone(),
        DisparityUnit::Pixels,
        validity.clone(),
    )?;
    Ok(MatchResult {
        disparity,
        sigma,
        validity,
    })
}
