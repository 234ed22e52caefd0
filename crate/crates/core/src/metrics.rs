//! Airway segmentation metric panel: overlap (IoU, precision, leakage, AMR)
//! and topology (detected length and branch rates), with an optional
//! small-airway restriction.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::skeleton::{
    build_graph_with, nearest_branch_labels, skeletonize, Centerline, RootPlacement, SkeletonGraph,
    DEFAULT_DROP_GENERATIONS,
};
use crate::volume::{largest_component, BinaryMask, Connectivity};

const RATIO_FLOOR: f64 = 1e-12;

fn ratio(num: usize, den: usize) -> f64 {
    num as f64 / (den as f64).max(RATIO_FLOOR)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(p: &BinaryMask, g: &BinaryMask) -> Result<ConfusionCounts> {
    ensure_same_dims("ground truth", p.dims(), g.dims())?;
    let mut c = ConfusionCounts::default();
    for (&a, &b) in p.volume().data().iter().zip(g.volume().data()) {
        match (a != 0, b != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapMetrics {
    pub iou: f64,
    pub precision: f64,
    /// False positives over ground-truth volume.
    pub leakage: f64,
    /// False negatives over ground-truth volume.
    pub amr: f64,
}

pub fn overlap_metrics(c: &ConfusionCounts) -> OverlapMetrics {
    let gt = c.tp + c.fn_;
    OverlapMetrics {
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
        precision: ratio(c.tp, c.tp + c.fp),
        leakage: ratio(c.fp, gt),
        amr: ratio(c.fn_, gt),
    }
}

/// Fraction of centerline voxels covered by the prediction.
pub fn dlr(p: &BinaryMask, centerline: &Centerline) -> Result<f64> {
    ensure_same_dims("centerline", p.dims(), centerline.mask().dims())?;
    let c = centerline.mask();
    let total = c.count();
    if total == 0 {
        return Err(Error::empty("detected length rate needs a non-empty centerline"));
    }
    let hit = c.indices().filter(|&i| p.is_set(i)).count();
    Ok(ratio(hit, total))
}

/// Length-weighted variant of [`dlr`]: each branch contributes its millimetre
/// length times its covered fraction.
pub fn dlr_mm(p: &BinaryMask, graph: &SkeletonGraph) -> Result<f64> {
    ensure_same_dims("graph", p.dims(), graph.dims)?;
    let mut covered = 0.0;
    let mut total = 0.0;
    for b in &graph.branches {
        let voxels = b.coverage_voxels();
        let hit = voxels.iter().filter(|&&v| p.contains(v)).count();
        covered += b.length_mm * hit as f64 / voxels.len() as f64;
        total += b.length_mm;
    }
    if graph.branches.is_empty() {
        return Err(Error::empty("detected length rate needs a non-empty graph"));
    }
    if total == 0.0 {
        return Ok(
            if covered == 0.0
                && graph
                    .branches
                    .iter()
                    .all(|b| b.coverage_voxels().iter().all(|&v| p.contains(v)))
            {
                1.0
            } else {
                0.0
            },
        );
    }
    Ok(covered / total)
}

fn branch_detected(p: &BinaryMask, voxels: &[[usize; 3]], threshold: f64) -> bool {
    let hit = voxels.iter().filter(|&&v| p.contains(v)).count();
    hit as f64 >= threshold * voxels.len() as f64
}

/// Default share of a branch's centerline that must be covered for the
/// branch to count as detected.
pub const DEFAULT_BRANCH_THRESHOLD: f64 = 0.8;

/// Fraction of branches whose centerline coverage reaches `threshold`.
pub fn dbr(p: &BinaryMask, graph: &SkeletonGraph, threshold: f64) -> Result<f64> {
    ensure_same_dims("graph", p.dims(), graph.dims)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::param(format!(
            "branch threshold must lie in [0, 1], got {threshold}"
        )));
    }
    if graph.branches.is_empty() {
        return Err(Error::empty("detected branch rate needs a graph with branches"));
    }
    let detected = graph
        .branches
        .iter()
        .filter(|b| branch_detected(p, &b.coverage_voxels(), threshold))
        .count();
    Ok(ratio(detected, graph.branches.len()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthWeighting {
    #[default]
    Voxels,
    Millimeters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Keep only the largest connected component of the prediction.
    pub lcc: bool,
    /// Also compute the small-airway panel.
    pub small: bool,
    pub branch_threshold: f64,
    pub connectivity: Connectivity,
    pub drop_generations: usize,
    pub length_weighting: LengthWeighting,
    pub root: RootPlacement,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            lcc: true,
            small: false,
            branch_threshold: DEFAULT_BRANCH_THRESHOLD,
            connectivity: Connectivity::TwentySix,
            drop_generations: DEFAULT_DROP_GENERATIONS,
            length_weighting: LengthWeighting::Voxels,
            root: RootPlacement::MaxZ,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallAirwayMetrics {
    pub iou_s: f64,
    pub dlr_s: f64,
    pub dbr_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou: f64,
    pub dlr: f64,
    pub dbr: f64,
    pub precision: f64,
    pub leakage: f64,
    pub amr: f64,
    pub small: Option<SmallAirwayMetrics>,
    pub counts: ConfusionCounts,
    pub config: EvalOptions,
}

pub const CSV_HEADER: &str = "case,iou,dlr,dbr,precision,leakage,amr,iou_s,dlr_s,dbr_s";

impl MetricsReport {
    /// One CSV row matching [`CSV_HEADER`]; small-airway fields are left
    /// empty when that panel was not requested.
    pub fn csv_row(&self, case: &str) -> String {
        let small = match &self.small {
            Some(s) => format!("{},{},{}", s.iou_s, s.dlr_s, s.dbr_s),
            None => ",,".to_string(),
        };
        format!(
            "{case},{},{},{},{},{},{},{small}",
            self.iou, self.dlr, self.dbr, self.precision, self.leakage, self.amr
        )
    }
}

/// Ground-truth centerline and branch graph the topology metrics are
/// measured against.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub centerline: Centerline,
    pub graph: SkeletonGraph,
}

impl Reference {
    /// Skeletonize `g` (thinning plus spur pruning) and decompose the
    /// result into branches.
    pub fn from_mask(g: &BinaryMask, root: RootPlacement) -> Result<Self> {
        if !g.any() {
            return Err(Error::empty("ground truth mask is empty"));
        }
        let centerline = skeletonize(g)?;
        let graph = build_graph_with(&centerline, g.spacing(), root)?;
        Ok(Reference { centerline, graph })
    }

    /// The reference restricted to branches of generation `>= drop`.
    fn restricted(&self, drop: usize) -> Option<(Centerline, SkeletonGraph)> {
        let mut graph = self.graph.clone();
        graph.branches.retain(|b| b.generation >= drop);
        if graph.branches.is_empty() {
            return None;
        }
        let m = self.centerline.mask();
        let mut bits = vec![false; m.len()];
        for b in &graph.branches {
            for v in b.coverage_voxels() {
                bits[m.volume().index(v)] = true;
            }
        }
        let centerline = Centerline::from_mask_unchecked(BinaryMask::from_bools(m.dims(), m.spacing(), bits));
        Some((centerline, graph))
    }
}

fn length_rate(
    p: &BinaryMask,
    centerline: &Centerline,
    graph: &SkeletonGraph,
    weighting: LengthWeighting,
) -> Result<f64> {
    match weighting {
        LengthWeighting::Voxels => dlr(p, centerline),
        LengthWeighting::Millimeters => dlr_mm(p, graph),
    }
}

/// Full metric panel with the ground-truth skeleton derived from `g`.
pub fn evaluate(p: &BinaryMask, g: &BinaryMask, opts: &EvalOptions) -> Result<MetricsReport> {
    ensure_same_dims("prediction", g.dims(), p.dims())?;
    let reference = Reference::from_mask(g, opts.root)?;
    evaluate_against(p, g, &reference, opts)
}

/// Full metric panel against a precomputed reference skeleton.
pub fn evaluate_against(
    p: &BinaryMask,
    g: &BinaryMask,
    reference: &Reference,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    ensure_same_dims("prediction", g.dims(), p.dims())?;
    if !g.any() {
        return Err(Error::empty("ground truth mask is empty"));
    }
    if !(0.0..=1.0).contains(&opts.branch_threshold) {
        return Err(Error::param(format!(
            "branch threshold must lie in [0, 1], got {}",
            opts.branch_threshold
        )));
    }
    let p = if opts.lcc && p.any() {
        largest_component(p, opts.connectivity)?
    } else {
        p.clone()
    };
    let counts = confusion(&p, g)?;
    let overlap = overlap_metrics(&counts);
    let dlr_value = length_rate(&p, &reference.centerline, &reference.graph, opts.length_weighting)?;
    let dbr_value = dbr(&p, &reference.graph, opts.branch_threshold)?;

    let small = if opts.small {
        Some(small_panel(&p, g, reference, opts)?)
    } else {
        None
    };

    Ok(MetricsReport {
        iou: overlap.iou,
        dlr: dlr_value,
        dbr: dbr_value,
        precision: overlap.precision,
        leakage: overlap.leakage,
        amr: overlap.amr,
        small,
        counts,
        config: opts.clone(),
    })
}

fn small_panel(
    p: &BinaryMask,
    g: &BinaryMask,
    reference: &Reference,
    opts: &EvalOptions,
) -> Result<SmallAirwayMetrics> {
    let Some((centerline, graph)) = reference.restricted(opts.drop_generations) else {
        return Err(Error::Degenerate(format!(
            "ground truth has no branches of generation >= {}",
            opts.drop_generations
        )));
    };
    // attribute every voxel of p or g to its nearest ground-truth branch
    let union = p.or(g)?;
    let labels = nearest_branch_labels(&reference.graph, &union)?;
    let keep: Vec<bool> = labels
        .data()
        .iter()
        .map(|&l| l != 0 && reference.graph.branches[l as usize - 1].generation >= opts.drop_generations)
        .collect();
    let region = BinaryMask::from_bools(g.dims(), g.spacing(), keep);
    let ps = p.and(&region)?;
    let gs = g.and(&region)?;
    let counts = confusion(&ps, &gs)?;
    Ok(SmallAirwayMetrics {
        iou_s: overlap_metrics(&counts).iou,
        dlr_s: length_rate(p, &centerline, &graph, opts.length_weighting)?,
        dbr_s: dbr(p, &graph, opts.branch_threshold)?,
    })
}
