//! Synthetic binary airway trees with exactly known centerlines, plus the
//! degradations (breaks, leaks) used to check losses and metrics against
//! closed-form answers.
//!
//! The root tube enters below the top (+z) face and descends along -z. Every
//! branch splits into two children that deviate from the parent axis by the
//! branching angle, in a plane that turns by 90 degrees (plus a seeded
//! jitter) at each generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{assign_generations, Branch, Centerline, Node, NodeKind, RootPlacement, SkeletonGraph};
use crate::volume::{BinaryMask, Dims, UNIT_SPACING};

const MAX_DEPTH: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSpec {
    /// Number of bifurcation levels below the root; the tree has
    /// `2^(depth+1) - 1` branches.
    pub depth: usize,
    /// Root tube radius in voxels.
    pub root_radius: f64,
    /// Radius factor per generation, in (0, 1]. Radii never drop below 1.
    pub radius_decay: f64,
    /// Root axis length in voxels.
    pub root_length: f64,
    /// Length factor per generation, in (0, 1].
    pub length_decay: f64,
    /// Angle between each child axis and its parent axis, in degrees.
    pub branching_angle_deg: f64,
    /// Maximum random rotation of the branching plane, in degrees.
    pub azimuth_jitter_deg: f64,
    pub dims: Dims,
    pub seed: u64,
}

impl Default for TreeSpec {
    fn default() -> Self {
        TreeSpec {
            depth: 3,
            root_radius: 4.0,
            radius_decay: 0.75,
            root_length: 22.0,
            length_decay: 0.8,
            branching_angle_deg: 35.0,
            azimuth_jitter_deg: 10.0,
            dims: [80, 80, 80],
            seed: 7,
        }
    }
}

impl TreeSpec {
    pub fn branch_count(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    pub fn radius(&self, generation: usize) -> f64 {
        (self.root_radius * self.radius_decay.powi(generation as i32)).max(1.0)
    }

    pub fn length(&self, generation: usize) -> f64 {
        self.root_length * self.length_decay.powi(generation as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::param(msg));
        if self.depth > MAX_DEPTH {
            return fail(format!("depth must be at most {MAX_DEPTH}, got {}", self.depth));
        }
        if !(self.root_radius.is_finite() && self.root_radius >= 1.0) {
            return fail(format!("root_radius must be >= 1, got {}", self.root_radius));
        }
        if !(self.radius_decay > 0.0 && self.radius_decay <= 1.0) {
            return fail(format!("radius_decay must lie in (0, 1], got {}", self.radius_decay));
        }
        if !(self.length_decay > 0.0 && self.length_decay <= 1.0) {
            return fail(format!("length_decay must lie in (0, 1], got {}", self.length_decay));
        }
        if !(self.root_length.is_finite() && self.root_length >= 2.0) {
            return fail(format!("root_length must be >= 2, got {}", self.root_length));
        }
        if !(self.branching_angle_deg > 0.0 && self.branching_angle_deg < 90.0) {
            return fail(format!(
                "branching_angle_deg must lie in (0, 90), got {}",
                self.branching_angle_deg
            ));
        }
        if !(self.azimuth_jitter_deg >= 0.0 && self.azimuth_jitter_deg <= 45.0) {
            return fail(format!(
                "azimuth_jitter_deg must lie in [0, 45], got {}",
                self.azimuth_jitter_deg
            ));
        }
        if self.dims.contains(&0) {
            return fail(format!("dims must be positive, got {:?}", self.dims));
        }
        Ok(())
    }
}

type Vec3 = [f64; 3];

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / dot(a, a).sqrt())
}

/// Rotate `v` about the unit axis `k` by `angle` radians.
fn rotate(v: Vec3, k: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    add(add(scale(v, c), scale(cross(k, v), s)), scale(k, dot(k, v) * (1.0 - c)))
}

fn to_f(p: [usize; 3]) -> Vec3 {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

/// Smallest distance between the segments `p0-p1` and `q0-q1`.
fn segment_distance(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let (a, e, f) = (dot(d1, d1), dot(d2, d2), dot(d2, r));
    let (c, b) = (dot(d1, r), dot(d1, d2));
    let denom = a * e - b * b;
    let mut s = if denom > 1e-12 {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    let gap = sub(add(p0, scale(d1, s)), add(q0, scale(d2, t)));
    dot(gap, gap).sqrt()
}

/// Squared distance from `q` to the segment `a-b`.
fn point_segment_distance2(q: Vec3, a: Vec3, b: Vec3) -> f64 {
    let axis = sub(b, a);
    let len2 = dot(axis, axis);
    let aq = sub(q, a);
    let t = if len2 > 0.0 {
        (dot(aq, axis) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = sub(aq, scale(axis, t));
    dot(d, d)
}

/// Set every voxel within `r` of the segment `a-b`.
fn fill_capsule(bits: &mut [bool], dims: Dims, a: Vec3, b: Vec3, r: f64) {
    let axis = sub(b, a);
    let len2 = dot(axis, axis);
    let range = |k: usize| {
        let lo = (a[k].min(b[k]) - r).floor().max(0.0) as usize;
        let hi = ((a[k].max(b[k]) + r).ceil().max(0.0) as usize).min(dims[k] - 1);
        lo..=hi
    };
    for z in range(2) {
        for y in range(1) {
            for x in range(0) {
                let aq = sub([x as f64, y as f64, z as f64], a);
                let t = if len2 > 0.0 {
                    (dot(aq, axis) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = sub(aq, scale(axis, t));
                if dot(d, d) <= r * r {
                    bits[x + dims[0] * (y + dims[1] * z)] = true;
                }
            }
        }
    }
}

/// Voxels of the 26-connected digital segment from `a` to `b`, both ends
/// included.
pub fn digital_line(a: [usize; 3], b: [usize; 3]) -> Vec<[usize; 3]> {
    let delta: [i64; 3] = std::array::from_fn(|k| b[k] as i64 - a[k] as i64);
    let steps = delta.iter().map(|d| d.abs()).max().unwrap_or(0);
    if steps == 0 {
        return vec![a];
    }
    (0..=steps)
        .map(|t| {
            std::array::from_fn(|k| {
                // round-half-away-from-zero of a + delta * t / steps, in integers
                let num = delta[k] * t;
                let q = (2 * num.abs() + steps) / (2 * steps);
                (a[k] as i64 + num.signum() * q) as usize
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomBranch {
    pub id: usize,
    pub parent: Option<usize>,
    pub generation: usize,
    pub start: [usize; 3],
    pub end: [usize; 3],
    pub radius: f64,
    /// Ordered centerline voxels owned by this branch, excluding the shared
    /// node voxels at either end.
    pub centerline: Vec<[usize; 3]>,
}

impl PhantomBranch {
    pub fn axis_length(&self) -> f64 {
        let d = sub(to_f(self.end), to_f(self.start));
        dot(d, d).sqrt()
    }
}

/// A generated tree with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomTruth {
    pub spec: TreeSpec,
    pub mask: BinaryMask,
    /// Branches in breadth-first order; `branches[k].id == k + 1`.
    pub branches: Vec<PhantomBranch>,
    /// Node voxels: the root entry point, then the end point of branch `k`
    /// at index `k`.
    pub nodes: Vec<[usize; 3]>,
    centerline: BinaryMask,
}

/// A degraded mask together with what the degradation changed.
#[derive(Clone, Debug, PartialEq)]
pub struct Degradation {
    pub mask: BinaryMask,
    /// Voxels removed from the input mask.
    pub erased_voxels: usize,
    /// Voxels added to the input mask.
    pub added_voxels: usize,
    /// Ground-truth centerline voxels that were present before and are gone
    /// after.
    pub erased_centerline: Vec<[usize; 3]>,
}

pub fn generate(spec: &TreeSpec) -> Result<PhantomTruth> {
    spec.validate()?;
    let dims = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half_angle = spec.branching_angle_deg.to_radians();
    let jitter = spec.azimuth_jitter_deg.to_radians();

    let r0 = spec.radius(0);
    let top = dims[2] as f64 - 1.0 - r0.ceil();
    if top < 0.0 {
        return Err(Error::param(format!(
            "branch 1 (radius {r0}) does not fit below the top face of a volume with nz = {}",
            dims[2]
        )));
    }
    let root_start = [(dims[0] - 1) / 2, (dims[1] - 1) / 2, top as usize];

    // (start voxel, unit direction, branching-plane normal) for each branch
    struct Pending {
        parent: Option<usize>,
        generation: usize,
        start: [usize; 3],
        dir: Vec3,
        plane: Vec3,
    }
    let mut queue = std::collections::VecDeque::from([Pending {
        parent: None,
        generation: 0,
        start: root_start,
        dir: [0.0, 0.0, -1.0],
        plane: [0.0, 1.0, 0.0],
    }]);
    let mut branches: Vec<PhantomBranch> = Vec::new();
    let mut nodes = vec![root_start];
    while let Some(p) = queue.pop_front() {
        let id = branches.len() + 1;
        let radius = spec.radius(p.generation);
        let target = add(to_f(p.start), scale(p.dir, spec.length(p.generation)));
        let end: [i64; 3] = std::array::from_fn(|k| target[k].round() as i64);
        let fits = (0..3).all(|k| {
            let lo = end[k].min(p.start[k] as i64) as f64;
            let hi = end[k].max(p.start[k] as i64) as f64;
            lo - radius >= 0.0 && hi + radius <= dims[k] as f64 - 1.0
        });
        if !fits {
            return Err(Error::param(format!(
                "branch {id} (generation {}, radius {radius:.2}) from {:?} towards {end:?} leaves the volume {dims:?}",
                p.generation, p.start
            )));
        }
        let end = end.map(|v| v as usize);
        if end == p.start || nodes.contains(&end) {
            return Err(Error::param(format!(
                "branch {id} (generation {}) collapses to a point; increase root_length",
                p.generation
            )));
        }
        nodes.push(end);
        branches.push(PhantomBranch {
            id,
            parent: p.parent,
            generation: p.generation,
            start: p.start,
            end,
            radius,
            centerline: Vec::new(),
        });
        if p.generation < spec.depth {
            // the children's plane is spanned by the parent axis and `spread`
            let spin = std::f64::consts::FRAC_PI_2
                + if jitter > 0.0 {
                    rng.gen_range(-jitter..=jitter)
                } else {
                    0.0
                };
            let normal = normalize(rotate(p.plane, p.dir, spin));
            let spread = normalize(cross(normal, p.dir));
            // use the axis actually rasterized so children follow the snapped geometry
            let axis = normalize(sub(to_f(end), to_f(p.start)));
            for sign in [1.0, -1.0] {
                let dir = normalize(add(
                    scale(axis, half_angle.cos()),
                    scale(spread, sign * half_angle.sin()),
                ));
                queue.push_back(Pending {
                    parent: Some(id),
                    generation: p.generation + 1,
                    start: end,
                    dir,
                    plane: normal,
                });
            }
        }
    }

    // tubes that do not share a node must stay apart, or the mask would
    // contain loops the tree does not have
    for (i, a) in branches.iter().enumerate() {
        for b in &branches[i + 1..] {
            let ends = [a.start, a.end];
            if ends.contains(&b.start) || ends.contains(&b.end) {
                continue;
            }
            let d = segment_distance(to_f(a.start), to_f(a.end), to_f(b.start), to_f(b.end));
            if d <= a.radius + b.radius + 2.0 {
                return Err(Error::param(format!(
                    "branch {} collides with branch {} (axis distance {d:.2}); change seed, angle or lengths",
                    b.id, a.id
                )));
            }
        }
    }

    // tubes
    let geometry = BinaryMask::empty(dims, UNIT_SPACING)?;
    let v = geometry.volume();
    let mut bits = vec![false; v.len()];
    for b in &branches {
        fill_capsule(&mut bits, dims, to_f(b.start), to_f(b.end), b.radius);
    }
    // Solid web in each crotch out to where the two child tubes are at least
    // two voxels apart. Without it the rasterized contact between nearly
    // touching children can contain pinhole tunnels.
    for b in &branches {
        let kids: Vec<&PhantomBranch> = branches.iter().filter(|c| c.parent == Some(b.id)).collect();
        let [c1, c2] = kids[..] else { continue };
        let j = to_f(b.end);
        let d1 = normalize(sub(to_f(c1.end), j));
        let d2 = normalize(sub(to_f(c2.end), j));
        let r = c1.radius.min(c2.radius);
        let sin_half = (dot(sub(d1, d2), sub(d1, d2)).sqrt() / 2.0).max(1e-6);
        let reach = ((r + 1.0) / sin_half).min(0.5 * c1.axis_length().min(c2.axis_length()));
        let mut t = 0.0;
        while t <= reach {
            fill_capsule(&mut bits, dims, add(j, scale(d1, t)), add(j, scale(d2, t)), r);
            t += 0.5;
        }
    }
    let mask = BinaryMask::from_bools(dims, UNIT_SPACING, bits);

    // centerlines: digital segments, first claimant wins, node voxels shared
    let mut claimed = vec![false; v.len()];
    for &n in &nodes {
        claimed[v.index(n)] = true;
    }
    for b in branches.iter_mut() {
        let line = digital_line(b.start, b.end);
        for &q in &line[1..line.len() - 1] {
            let i = v.index(q);
            if !claimed[i] {
                claimed[i] = true;
                b.centerline.push(q);
            }
        }
        if b.centerline.is_empty() {
            return Err(Error::param(format!(
                "branch {} (generation {}) has no centerline voxels of its own; increase root_length",
                b.id, b.generation
            )));
        }
    }
    let centerline = BinaryMask::from_bools(dims, UNIT_SPACING, claimed);
    debug_assert!(centerline.is_subset_of(&mask));

    Ok(PhantomTruth {
        spec: spec.clone(),
        mask,
        branches,
        nodes,
        centerline,
    })
}

impl PhantomTruth {
    pub fn branch(&self, id: usize) -> Result<&PhantomBranch> {
        id.checked_sub(1)
            .and_then(|k| self.branches.get(k))
            .ok_or_else(|| Error::param(format!("no branch {id}; valid ids are 1..={}", self.branches.len())))
    }

    /// True centerline: all branch centerline voxels plus node voxels.
    pub fn centerline(&self) -> Centerline {
        Centerline::from_mask_unchecked(self.centerline.clone())
    }

    /// Total number of true centerline voxels.
    pub fn centerline_length(&self) -> usize {
        self.centerline.count()
    }

    /// The truth as a skeleton graph with the same ids, parents and
    /// generations as the generated tree.
    pub fn to_graph(&self) -> SkeletonGraph {
        let n_children = |id: usize| self.branches.iter().filter(|b| b.parent == Some(id)).count();
        let mut nodes = vec![Node {
            id: 0,
            kind: NodeKind::Endpoint,
            voxels: vec![self.nodes[0]],
        }];
        let mut branches = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let kind = if n_children(b.id) > 0 {
                NodeKind::Junction
            } else {
                NodeKind::Endpoint
            };
            nodes.push(Node {
                id: b.id,
                kind,
                voxels: vec![b.end],
            });
            let start_node = b.parent.unwrap_or(0);
            let len = b.axis_length();
            branches.push(Branch {
                id: b.id,
                parent: b.parent,
                generation: b.generation,
                start_node,
                end_node: b.id,
                start_voxel: b.start,
                end_voxel: b.end,
                voxels: b.centerline.clone(),
                length_voxels: len,
                length_mm: len,
            });
        }
        let mut check = branches.clone();
        let (root, component_roots) = assign_generations(&nodes, &mut check, RootPlacement::MaxZ);
        debug_assert_eq!(check, branches);
        SkeletonGraph {
            dims: self.spec.dims,
            spacing: UNIT_SPACING,
            nodes,
            branches,
            root,
            component_roots,
        }
    }

    /// Erase a slab of branch `id`'s tube around its midpoint from the truth
    /// mask. See [`PhantomTruth::break_branch_in`].
    pub fn break_branch(&self, id: usize, gap_voxels: f64) -> Result<Degradation> {
        self.break_branch_in(&self.mask, id, gap_voxels)
    }

    /// Erase from `mask` every voxel within the branch radius of the branch
    /// axis line whose position along the axis lies strictly within
    /// `gap_voxels / 2` of the midpoint, keeping voxels that are at least as
    /// close to another branch's axis segment. A gap of at least the axis
    /// length removes the whole branch interior; a gap of 0 changes nothing.
    pub fn break_branch_in(&self, mask: &BinaryMask, id: usize, gap_voxels: f64) -> Result<Degradation> {
        self.check_mask(mask)?;
        if !(gap_voxels >= 0.0 && gap_voxels.is_finite()) {
            return Err(Error::param(format!("gap must be finite and >= 0, got {gap_voxels}")));
        }
        let b = self.branch(id)?;
        let len = b.axis_length();
        let r2 = b.radius * b.radius;
        let half = gap_voxels / 2.0;
        let a = to_f(b.start);
        let axis = normalize(sub(to_f(b.end), a));
        let v = mask.volume();
        let mut bits: Vec<bool> = v.data().iter().map(|&x| x != 0).collect();
        let reach = half.min(len / 2.0 + b.radius) + b.radius;
        let mid = add(a, scale(axis, len / 2.0));
        let bb: [(usize, usize); 3] = std::array::from_fn(|k| {
            let lo = (mid[k] - reach).floor().max(0.0) as usize;
            let hi = ((mid[k] + reach).ceil().max(0.0) as usize).min(v.dims()[k] - 1);
            (lo, hi)
        });
        let mut erased = 0;
        for z in bb[2].0..=bb[2].1 {
            for y in bb[1].0..=bb[1].1 {
                for x in bb[0].0..=bb[0].1 {
                    let i = v.index([x, y, z]);
                    if !bits[i] {
                        continue;
                    }
                    let aq = sub([x as f64, y as f64, z as f64], a);
                    let s = dot(aq, axis);
                    let perp = sub(aq, scale(axis, s));
                    if (s - len / 2.0).abs() < half && dot(perp, perp) <= r2 && self.owns(id, [x, y, z]) {
                        bits[i] = false;
                        erased += 1;
                    }
                }
            }
        }
        let out = BinaryMask::from_bools(mask.dims(), mask.spacing(), bits);
        Ok(Degradation {
            erased_centerline: self.lost_centerline(mask, &out),
            mask: out,
            erased_voxels: erased,
            added_voxels: 0,
        })
    }

    /// Whether `p` lies strictly closer to branch `id`'s axis segment than to
    /// every other branch's.
    fn owns(&self, id: usize, p: [usize; 3]) -> bool {
        let q = to_f(p);
        let dist = |b: &PhantomBranch| point_segment_distance2(q, to_f(b.start), to_f(b.end));
        let own = dist(&self.branches[id - 1]);
        self.branches.iter().filter(|b| b.id != id).all(|b| own < dist(b))
    }

    /// Union a ball of voxels strictly closer than `radius` to `center` into
    /// the truth mask. A radius of 0 changes nothing.
    pub fn add_leak(&self, center: [usize; 3], radius: f64) -> Result<Degradation> {
        self.add_leak_to(&self.mask, center, radius)
    }

    pub fn add_leak_to(&self, mask: &BinaryMask, center: [usize; 3], radius: f64) -> Result<Degradation> {
        self.check_mask(mask)?;
        let dims = mask.dims();
        if (0..3).any(|k| center[k] >= dims[k]) {
            return Err(Error::param(format!("leak center {center:?} lies outside {dims:?}")));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::param(format!(
                "leak radius must be finite and >= 0, got {radius}"
            )));
        }
        let v = mask.volume();
        let mut bits: Vec<bool> = v.data().iter().map(|&x| x != 0).collect();
        let mut added = 0;
        let reach = radius.ceil() as usize;
        let lo: [usize; 3] = std::array::from_fn(|k| center[k].saturating_sub(reach));
        let hi: [usize; 3] = std::array::from_fn(|k| (center[k] + reach).min(dims[k] - 1));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let d = sub(to_f([x, y, z]), to_f(center));
                    let i = v.index([x, y, z]);
                    if dot(d, d) < radius * radius && !bits[i] {
                        bits[i] = true;
                        added += 1;
                    }
                }
            }
        }
        Ok(Degradation {
            mask: BinaryMask::from_bools(dims, mask.spacing(), bits),
            erased_voxels: 0,
            added_voxels: added,
            erased_centerline: Vec::new(),
        })
    }

    /// A voxel just outside the wall of branch `id` at its midpoint, so a
    /// leak of `leak_radius` centred there touches the tube.
    pub fn leak_site(&self, id: usize, leak_radius: f64) -> Result<[usize; 3]> {
        let b = self.branch(id)?;
        let a = to_f(b.start);
        let axis = normalize(sub(to_f(b.end), a));
        let helper = if axis[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let out = normalize(cross(axis, helper));
        let mid = add(a, scale(sub(to_f(b.end), a), 0.5));
        let p = add(mid, scale(out, b.radius + leak_radius * 0.5));
        let dims = self.spec.dims;
        let site: [i64; 3] = std::array::from_fn(|k| p[k].round() as i64);
        if (0..3).any(|k| site[k] < 0 || site[k] >= dims[k] as i64) {
            return Err(Error::param(format!(
                "leak site for branch {id} falls outside the volume"
            )));
        }
        Ok(site.map(|c| c as usize))
    }

    fn check_mask(&self, mask: &BinaryMask) -> Result<()> {
        crate::error::ensure_same_dims("degraded mask", self.spec.dims, mask.dims())
    }

    fn lost_centerline(&self, before: &BinaryMask, after: &BinaryMask) -> Vec<[usize; 3]> {
        let v = self.centerline.volume();
        self.centerline
            .indices()
            .filter(|&i| before.is_set(i) && !after.is_set(i))
            .map(|i| v.coords(i))
            .collect()
    }

    pub fn to_json(&self) -> PhantomJson {
        let graph = self.to_graph().to_json();
        PhantomJson {
            root: graph.root,
            root_voxel: graph.root_voxel,
            branches: graph.branches,
            centerline_length: self.centerline_length(),
            radii: self.branches.iter().map(|b| b.radius).collect(),
            spec: self.spec.clone(),
        }
    }
}

/// Phantom truth in the skeleton graph schema, extended with the centerline
/// length, per-branch radii and the generating spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomJson {
    pub root: usize,
    pub root_voxel: [usize; 3],
    pub branches: Vec<crate::skeleton::BranchJson>,
    pub centerline_length: usize,
    pub radii: Vec<f64>,
    pub spec: TreeSpec,
}
