//! Boundary-emphasized weight maps and the weighted root-Tversky loss family
//! (Dice, Tversky, centerline-weighted GUL, boundary-weighted BEL) with
//! analytic gradients.
//!
//! All reductions run sequentially in linear index order with `f64`
//! accumulators, so results are bit-stable between runs.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::morphology::{boundary, edt, DistanceVolume};
use crate::skeleton::thin;
use crate::softskel::{breakage_map, SoftVolume, DEFAULT_SKELETON_ITERATIONS};
use crate::volume::{connected_components, BinaryMask, Connectivity, ProbabilityVolume, Volume3};

/// Predictions are clamped to `[CLAMP, 1 - CLAMP]` before `p^(r-1)`.
pub const PROBABILITY_CLAMP: f64 = 1e-6;
/// Floor applied to ratio denominators.
pub const DENOMINATOR_FLOOR: f64 = 1e-7;

/// Source of the per-voxel distance `d_i` in the weight map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Distance to the mask surface.
    #[default]
    Boundary,
    /// Distance to the thinned centerline.
    Centerline,
    /// `d_i = 0`: every foreground weight is `1 + theta * B_i`.
    Uniform,
}

/// Region over which the normalizing maximum distance is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DmaxScope {
    /// One maximum over the whole foreground.
    #[default]
    Global,
    /// A separate maximum for every 26-connected component.
    PerComponent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub gamma: f64,
    pub mu: f64,
    pub theta: f64,
    pub mode: WeightMode,
    /// Clamp applied to predictions before the `p^(r-1)` gradient term.
    pub epsilon: f64,
    pub dmax_scope: DmaxScope,
    /// Measure distances in millimetres instead of voxels.
    pub spacing_aware: bool,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams::with_alpha(0.2, 0.6, 0.7, 0.05, WeightMode::Boundary)
    }
}

/// The `gamma` values explored for the boundary and centerline losses.
pub const GAMMA_GRID: [f64; 4] = [0.4, 0.6, 0.8, 1.0];
/// The `r` values explored for the boundary and centerline losses.
pub const R_GRID: [f64; 2] = [0.5, 0.7];

impl LossParams {
    /// `beta = 1 - alpha` and `mu = (1 - 2 alpha) / (1 - alpha)`.
    pub fn with_alpha(alpha: f64, gamma: f64, r: f64, theta: f64, mode: WeightMode) -> Self {
        LossParams {
            alpha,
            beta: 1.0 - alpha,
            r,
            gamma,
            mu: (1.0 - 2.0 * alpha) / (1.0 - alpha),
            theta,
            mode,
            epsilon: PROBABILITY_CLAMP,
            dmax_scope: DmaxScope::Global,
            spacing_aware: false,
        }
    }

    /// Boundary-weighted loss with breakage emphasis `theta = 0.05`.
    pub fn bel(gamma: f64, r: f64) -> Self {
        LossParams::with_alpha(0.2, gamma, r, 0.05, WeightMode::Boundary)
    }

    /// Centerline-weighted loss without breakage term.
    pub fn gul(gamma: f64, r: f64) -> Self {
        LossParams::with_alpha(0.2, gamma, r, 0.0, WeightMode::Centerline)
    }

    /// Named presets: `bel_0.6`, `bel_0.8`, `gul_0.6`, `gul_0.8` (all with
    /// `r = 0.7`), and `bel_<gamma>_r<r>` / `gul_<gamma>_r<r>` for any grid
    /// point, e.g. `bel_0.4_r0.5`.
    pub fn preset(name: &str) -> Result<Self> {
        let unknown = || Error::param(format!("unknown loss preset {name:?}"));
        let (family, rest) = name.split_once('_').ok_or_else(unknown)?;
        let (gamma, r) = match rest.split_once("_r") {
            Some((g, r)) => (g, r),
            None => (rest, "0.7"),
        };
        let gamma: f64 = gamma.parse().map_err(|_| unknown())?;
        let r: f64 = r.parse().map_err(|_| unknown())?;
        if !GAMMA_GRID.contains(&gamma) || !(R_GRID.contains(&r)) {
            return Err(unknown());
        }
        match family {
            "bel" => Ok(LossParams::bel(gamma, r)),
            "gul" => Ok(LossParams::gul(gamma, r)),
            _ => Err(unknown()),
        }
    }

    /// Every `(gamma, r)` combination of the hyper-parameter search.
    pub fn search_grid(mode: WeightMode) -> Vec<LossParams> {
        let theta = if mode == WeightMode::Boundary { 0.05 } else { 0.0 };
        GAMMA_GRID
            .iter()
            .flat_map(|&g| {
                R_GRID
                    .iter()
                    .map(move |&r| LossParams::with_alpha(0.2, g, r, theta, mode))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha,
            self.beta,
            self.r,
            self.gamma,
            self.mu,
            self.theta,
            self.epsilon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::param(format!("loss parameters must be finite: {self:?}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!(
                "alpha + beta must equal 1, got {} + {}",
                self.alpha, self.beta
            )));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::param(format!("r must lie in (0, 1], got {}", self.r)));
        }
        if self.gamma <= 0.0 {
            return Err(Error::param(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::param(format!("mu must lie in [0, 1), got {}", self.mu)));
        }
        if self.theta < 0.0 {
            return Err(Error::param(format!("theta must be non-negative, got {}", self.theta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::param(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-voxel loss weights; exactly 1 on background.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap(pub Volume3<f64>);

impl WeightMap {
    pub fn uniform(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Ok(WeightMap(Volume3::filled(dims, spacing, 1.0)?))
    }

    pub fn volume(&self) -> &Volume3<f64> {
        &self.0
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }
}

fn normalizers(g: &BinaryMask, d: &DistanceVolume, scope: DmaxScope) -> Vec<f64> {
    match scope {
        DmaxScope::Global => {
            let dmax = g.indices().map(|i| d.data()[i]).fold(0.0, f64::max);
            vec![dmax; g.len()]
        }
        DmaxScope::PerComponent => {
            let labels = connected_components(g, Connectivity::TwentySix);
            let mut per = vec![0.0f64; labels.count + 1];
            for i in g.indices() {
                let l = labels.labels.data()[i] as usize;
                per[l] = per[l].max(d.data()[i]);
            }
            labels.labels.data().iter().map(|&l| per[l as usize]).collect()
        }
    }
}

/// Weight map from an explicit distance volume.
///
/// Background voxels get 1. Foreground voxels get
/// `(1 - mu * (d / d_max)^gamma) * (1 + theta * B)`, where `d / d_max` is
/// taken as 0 when `d_max` is 0 and `B` is 0 when no breakage map is given.
pub fn weight_map_from_distance(
    g: &BinaryMask,
    d: Option<&DistanceVolume>,
    params: &LossParams,
    breakage: Option<&SoftVolume>,
) -> Result<WeightMap> {
    params.validate()?;
    if let Some(d) = d {
        ensure_same_dims("distance volume", g.dims(), d.dims())?;
    }
    if let Some(b) = breakage {
        ensure_same_dims("breakage map", g.dims(), b.dims())?;
    }
    let dmax = d.map(|d| normalizers(g, d, params.dmax_scope));
    let w = (0..g.len())
        .map(|i| {
            if !g.is_set(i) {
                return 1.0;
            }
            let decay = match (d, &dmax) {
                (Some(d), Some(dmax)) if dmax[i] > 0.0 => params.mu * (d.data()[i] / dmax[i]).powf(params.gamma),
                _ => 0.0,
            };
            let boost = breakage.map_or(0.0, |b| params.theta * b.data()[i]);
            (1.0 - decay) * (1.0 + boost)
        })
        .collect();
    Ok(WeightMap(g.volume().with_data(w)?))
}

/// Distance `d_i` used by `mode`, or `None` for the uniform mode.
pub fn mode_distance(g: &BinaryMask, mode: WeightMode, spacing_aware: bool) -> Result<Option<DistanceVolume>> {
    if !g.any() {
        return Ok(None);
    }
    Ok(match mode {
        WeightMode::Boundary => Some(edt(&boundary(g), g, spacing_aware)?),
        WeightMode::Centerline => Some(edt(thin(g).mask(), g, spacing_aware)?),
        WeightMode::Uniform => None,
    })
}

pub fn weight_map(g: &BinaryMask, params: &LossParams, breakage: Option<&SoftVolume>) -> Result<WeightMap> {
    params.validate()?;
    let d = mode_distance(g, params.mode, params.spacing_aware)?;
    weight_map_from_distance(g, d.as_ref(), params, breakage)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossOutput {
    pub loss: f64,
    /// Set when both prediction and ground truth are empty; `loss` is then 0.
    pub degenerate: bool,
}

struct Sums {
    numerator: f64,
    denominator: f64,
}

fn check_shapes(p: &ProbabilityVolume, g: &BinaryMask, w: Option<&WeightMap>) -> Result<()> {
    ensure_same_dims("ground truth", p.dims(), g.dims())?;
    if let Some(w) = w {
        ensure_same_dims("weight map", p.dims(), w.dims())?;
    }
    Ok(())
}

fn weighted_sums(p: &ProbabilityVolume, g: &BinaryMask, w: Option<&WeightMap>, alpha: f64, beta: f64, r: f64) -> Sums {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (i, &pi) in p.data().iter().enumerate() {
        let wi = w.map_or(1.0, |w| w.data()[i]);
        let gi = g.is_set(i) as u8 as f64;
        if gi != 0.0 {
            numerator += wi * if r == 1.0 { pi } else { pi.powf(r) };
        }
        denominator += wi * (alpha * pi + beta * gi);
    }
    Sums { numerator, denominator }
}

fn ratio_loss(s: &Sums) -> LossOutput {
    if s.denominator == 0.0 {
        return LossOutput {
            loss: 0.0,
            degenerate: true,
        };
    }
    LossOutput {
        loss: 1.0 - s.numerator / s.denominator.max(DENOMINATOR_FLOOR),
        degenerate: false,
    }
}

/// `1 - sum(w p^r g) / sum(w (alpha p + beta g))`.
pub fn bel_loss(p: &ProbabilityVolume, g: &BinaryMask, w: &WeightMap, params: &LossParams) -> Result<LossOutput> {
    params.validate()?;
    check_shapes(p, g, Some(w))?;
    Ok(ratio_loss(&weighted_sums(
        p,
        g,
        Some(w),
        params.alpha,
        params.beta,
        params.r,
    )))
}

/// Derivative of [`bel_loss`] with respect to each prediction voxel, holding
/// the weights fixed. Zero everywhere for degenerate inputs.
pub fn bel_grad(p: &ProbabilityVolume, g: &BinaryMask, w: &WeightMap, params: &LossParams) -> Result<Volume3<f64>> {
    params.validate()?;
    check_shapes(p, g, Some(w))?;
    let s = weighted_sums(p, g, Some(w), params.alpha, params.beta, params.r);
    if s.denominator == 0.0 {
        return p.volume().with_data(vec![0.0; p.data().len()]);
    }
    let d = s.denominator.max(DENOMINATOR_FLOOR);
    let n = s.numerator;
    let (lo, hi) = (params.epsilon, 1.0 - params.epsilon);
    let grad = p
        .data()
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            let wi = w.data()[i];
            let term = if g.is_set(i) {
                let pc = pi.clamp(lo, hi);
                wi * params.r * pc.powf(params.r - 1.0) * d
            } else {
                0.0
            };
            -(term - n * wi * params.alpha) / (d * d)
        })
        .collect();
    p.volume().with_data(grad)
}

/// `1 - 2 sum(p g) / (sum(p) + sum(g))`.
pub fn dice_loss(p: &ProbabilityVolume, g: &BinaryMask) -> Result<LossOutput> {
    check_shapes(p, g, None)?;
    let (inter, total) = dice_sums(p, g);
    if total == 0.0 {
        return Ok(LossOutput {
            loss: 0.0,
            degenerate: true,
        });
    }
    Ok(LossOutput {
        loss: 1.0 - 2.0 * inter / total.max(DENOMINATOR_FLOOR),
        degenerate: false,
    })
}

fn dice_sums(p: &ProbabilityVolume, g: &BinaryMask) -> (f64, f64) {
    let mut inter = 0.0;
    let mut total = 0.0;
    for (i, &pi) in p.data().iter().enumerate() {
        let gi = g.is_set(i) as u8 as f64;
        inter += pi * gi;
        total += pi + gi;
    }
    (inter, total)
}

pub fn dice_grad(p: &ProbabilityVolume, g: &BinaryMask) -> Result<Volume3<f64>> {
    check_shapes(p, g, None)?;
    let (inter, total) = dice_sums(p, g);
    if total == 0.0 {
        return p.volume().with_data(vec![0.0; p.data().len()]);
    }
    let s = total.max(DENOMINATOR_FLOOR);
    let grad = (0..p.data().len())
        .map(|i| {
            let gi = g.is_set(i) as u8 as f64;
            -(2.0 * gi * s - 2.0 * inter) / (s * s)
        })
        .collect();
    p.volume().with_data(grad)
}

/// Unweighted, linear (`r = 1`) member of the family.
pub fn tversky_loss(p: &ProbabilityVolume, g: &BinaryMask, alpha: f64, beta: f64) -> Result<LossOutput> {
    check_shapes(p, g, None)?;
    if !(alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::param(format!(
            "tversky weights must be non-negative, got {alpha}, {beta}"
        )));
    }
    Ok(ratio_loss(&weighted_sums(p, g, None, alpha, beta, 1.0)))
}

fn gul_params(params: &LossParams) -> LossParams {
    LossParams {
        mode: WeightMode::Centerline,
        ..params.clone()
    }
}

/// Centerline-distance weights without breakage term.
pub fn gul_loss(p: &ProbabilityVolume, g: &BinaryMask, params: &LossParams) -> Result<LossOutput> {
    let params = gul_params(params);
    let w = weight_map(g, &params, None)?;
    bel_loss(p, g, &w, &params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Dice,
    Tversky,
    Gul,
    Bel,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dice" => Ok(LossKind::Dice),
            "tversky" => Ok(LossKind::Tversky),
            "gul" => Ok(LossKind::Gul),
            "bel" => Ok(LossKind::Bel),
            _ => Err(Error::param(format!("unknown loss {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossEvaluation {
    pub output: LossOutput,
    pub gradient: Option<Volume3<f64>>,
}

/// One-call evaluation of any loss in the family, as used by the CLI.
///
/// For [`LossKind::Bel`] the breakage map is recomputed from `p` with
/// `breakage_iterations` soft-skeleton rounds (pass `None` to leave it out).
pub fn evaluate_loss(
    kind: LossKind,
    p: &ProbabilityVolume,
    g: &BinaryMask,
    params: &LossParams,
    breakage_iterations: Option<usize>,
    with_gradient: bool,
) -> Result<LossEvaluation> {
    let (output, gradient) = match kind {
        LossKind::Dice => (dice_loss(p, g)?, with_gradient.then(|| dice_grad(p, g)).transpose()?),
        LossKind::Tversky => {
            let linear = LossParams {
                r: 1.0,
                ..params.clone()
            };
            let w = WeightMap::uniform(g.dims(), g.spacing())?;
            let out = tversky_loss(p, g, params.alpha, params.beta)?;
            (out, with_gradient.then(|| bel_grad(p, g, &w, &linear)).transpose()?)
        }
        LossKind::Gul => {
            let params = gul_params(params);
            let w = weight_map(g, &params, None)?;
            (
                bel_loss(p, g, &w, &params)?,
                with_gradient.then(|| bel_grad(p, g, &w, &params)).transpose()?,
            )
        }
        LossKind::Bel => {
            let b = breakage_iterations.map(|k| breakage_map(g, p, k)).transpose()?;
            let w = weight_map(g, params, b.as_ref())?;
            (
                bel_loss(p, g, &w, params)?,
                with_gradient.then(|| bel_grad(p, g, &w, params)).transpose()?,
            )
        }
    };
    Ok(LossEvaluation { output, gradient })
}

/// Breakage iterations used when the caller does not specify any.
pub const DEFAULT_BREAKAGE_ITERATIONS: usize = DEFAULT_SKELETON_ITERATIONS;
