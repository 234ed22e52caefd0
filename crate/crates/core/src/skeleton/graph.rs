//! Branch decomposition of a curve skeleton.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::Centerline;
use crate::error::{Error, Result};
use crate::volume::{Dims, Spacing, CUBE26};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    /// Curve end (one skeleton neighbor).
    Endpoint,
    /// Cluster of voxels with three or more skeleton neighbors.
    Junction,
    /// A skeleton component made of a single voxel.
    Isolated,
    /// Anchor voxel chosen to open a closed loop with no other nodes.
    Loop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub voxels: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Branch ids start at 1; 0 is reserved for "no branch" in label volumes.
    pub id: usize,
    pub parent: Option<usize>,
    pub generation: usize,
    pub start_node: usize,
    pub end_node: usize,
    /// Node voxel where the branch starts.
    pub start_voxel: [usize; 3],
    /// Node voxel where the branch ends.
    pub end_voxel: [usize; 3],
    /// Ordered interior voxels, excluding the two node voxels.
    pub voxels: Vec<[usize; 3]>,
    pub length_voxels: f64,
    pub length_mm: f64,
}

impl Branch {
    /// Full ordered path including the end node voxels.
    pub fn path(&self) -> Vec<[usize; 3]> {
        let mut p = Vec::with_capacity(self.voxels.len() + 2);
        p.push(self.start_voxel);
        p.extend_from_slice(&self.voxels);
        if self.end_voxel != self.start_voxel || !self.voxels.is_empty() {
            p.push(self.end_voxel);
        }
        p
    }

    /// Voxels used to judge whether the branch was detected: the interior,
    /// or the end voxels when the branch has no interior.
    pub fn coverage_voxels(&self) -> Vec<[usize; 3]> {
        if !self.voxels.is_empty() {
            return self.voxels.clone();
        }
        let mut v = vec![self.start_voxel];
        if self.end_voxel != self.start_voxel {
            v.push(self.end_voxel);
        }
        v
    }
}

/// Which end of the z axis the tree root (trachea) enters from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootPlacement {
    #[default]
    MaxZ,
    MinZ,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub dims: Dims,
    pub spacing: Spacing,
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
    /// Root node of the first (most superior) component.
    pub root: usize,
    /// Root node of every component, in traversal order.
    pub component_roots: Vec<usize>,
}

impl SkeletonGraph {
    pub fn branch(&self, id: usize) -> Option<&Branch> {
        id.checked_sub(1).and_then(|k| self.branches.get(k))
    }

    pub fn node_voxel_count(&self) -> usize {
        self.nodes.iter().map(|n| n.voxels.len()).sum()
    }

    pub fn max_generation(&self) -> usize {
        self.branches.iter().map(|b| b.generation).max().unwrap_or(0)
    }

    /// Every skeleton voxel paired with the branch id it is attributed to.
    /// Node voxels go to the smallest incident branch id.
    pub fn labelled_voxels(&self) -> Vec<([usize; 3], usize)> {
        let mut node_label = vec![usize::MAX; self.nodes.len()];
        for b in &self.branches {
            for n in [b.start_node, b.end_node] {
                node_label[n] = node_label[n].min(b.id);
            }
        }
        let mut out = Vec::new();
        for n in &self.nodes {
            if node_label[n.id] != usize::MAX {
                out.extend(n.voxels.iter().map(|&v| (v, node_label[n.id])));
            }
        }
        for b in &self.branches {
            out.extend(b.voxels.iter().map(|&v| (v, b.id)));
        }
        out
    }

    pub fn to_json(&self) -> GraphJson {
        let root_voxel = self.nodes[self.root].voxels[0];
        GraphJson {
            root: self.root,
            root_voxel,
            branches: self
                .branches
                .iter()
                .map(|b| BranchJson {
                    id: b.id,
                    parent: b.parent,
                    generation: b.generation,
                    voxels: b.path(),
                    length_mm: b.length_mm,
                })
                .collect(),
        }
    }
}

/// Serialized form: `{root, root_voxel, branches: [{id, parent, generation,
/// voxels, length_mm}]}`. `voxels` is the full ordered path of the branch,
/// end nodes included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub root: usize,
    pub root_voxel: [usize; 3],
    pub branches: Vec<BranchJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchJson {
    pub id: usize,
    pub parent: Option<usize>,
    pub generation: usize,
    pub voxels: Vec<[usize; 3]>,
    pub length_mm: f64,
}

pub(crate) fn path_length(path: &[[usize; 3]], spacing: Spacing) -> f64 {
    path.windows(2)
        .map(|w| {
            (0..3)
                .map(|a| {
                    let d = (w[1][a] as f64 - w[0][a] as f64) * spacing[a];
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

const NONE: u32 = u32::MAX;

struct Builder<'a> {
    c: &'a Centerline,
    node_of: Vec<u32>,
    visited: Vec<bool>,
    nodes: Vec<Node>,
    raw: Vec<(usize, usize, usize, usize, Vec<usize>)>,
}

impl<'a> Builder<'a> {
    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let v = self.c.mask().volume();
        let p = v.coords(i);
        CUBE26
            .iter()
            .filter_map(move |&o| v.offset(p, o))
            .map(move |q| v.index(q))
            .filter(move |&j| self.c.mask().is_set(j))
    }

    fn add_node(&mut self, kind: NodeKind, members: Vec<usize>) {
        let id = self.nodes.len();
        for &m in &members {
            self.node_of[m] = id as u32;
        }
        let v = self.c.mask().volume();
        self.nodes.push(Node {
            id,
            kind,
            voxels: members.iter().map(|&m| v.coords(m)).collect(),
        });
    }

    fn trace_from(&mut self, node: usize) {
        let members: Vec<usize> = {
            let v = self.c.mask().volume();
            self.nodes[node].voxels.iter().map(|&p| v.index(p)).collect()
        };
        for start in members {
            let firsts: Vec<usize> = self.neighbors(start).collect();
            for first in firsts {
                if self.node_of[first] != NONE || self.visited[first] {
                    continue;
                }
                let mut path = Vec::new();
                let (mut prev, mut cur) = (start, first);
                let end = loop {
                    self.visited[cur] = true;
                    path.push(cur);
                    let next = self
                        .neighbors(cur)
                        .find(|&j| j != prev && !(self.visited[j] && self.node_of[j] == NONE));
                    match next {
                        Some(j) if self.node_of[j] != NONE => break j,
                        Some(j) => {
                            prev = cur;
                            cur = j;
                        }
                        // dead end cannot happen on degree-2 voxels; close at the start
                        None => break start,
                    }
                };
                let end_node = self.node_of[end] as usize;
                self.raw.push((node, start, end_node, end, path));
            }
        }
    }
}

/// Decompose a centerline into nodes and branches and assign generations by
/// breadth-first traversal from the root endpoint.
pub fn build_graph(c: &Centerline, spacing: Spacing) -> Result<SkeletonGraph> {
    build_graph_with(c, spacing, RootPlacement::MaxZ)
}

pub fn build_graph_with(c: &Centerline, spacing: Spacing, placement: RootPlacement) -> Result<SkeletonGraph> {
    let mask = c.mask();
    if !mask.any() {
        return Err(Error::empty("cannot build a graph from an empty centerline"));
    }
    let v = mask.volume();
    let n = v.len();
    let mut b = Builder {
        c,
        node_of: vec![NONE; n],
        visited: vec![false; n],
        nodes: Vec::new(),
        raw: Vec::new(),
    };

    let voxels: Vec<usize> = mask.indices().collect();
    let degree: Vec<(usize, usize)> = voxels.iter().map(|&i| (i, b.neighbors(i).count())).collect();

    // endpoints and isolated voxels first, then junction clusters, all in scan order
    let mut is_junction = vec![false; n];
    for &(i, d) in &degree {
        if d >= 3 {
            is_junction[i] = true;
        }
    }
    for &(i, d) in &degree {
        match d {
            0 => b.add_node(NodeKind::Isolated, vec![i]),
            1 => b.add_node(NodeKind::Endpoint, vec![i]),
            _ => {}
        }
    }
    for &(i, _) in &degree {
        if !is_junction[i] || b.node_of[i] != NONE {
            continue;
        }
        let mut cluster = vec![i];
        let mut queue = VecDeque::from([i]);
        b.node_of[i] = 0;
        while let Some(j) = queue.pop_front() {
            let next: Vec<usize> = b
                .neighbors(j)
                .filter(|&k| is_junction[k] && b.node_of[k] == NONE)
                .collect();
            for k in next {
                b.node_of[k] = 0;
                cluster.push(k);
                queue.push_back(k);
            }
        }
        cluster.sort_unstable();
        b.add_node(NodeKind::Junction, cluster);
    }

    for node in 0..b.nodes.len() {
        b.trace_from(node);
    }
    // closed loops without any node
    for &(i, _) in &degree {
        if b.node_of[i] == NONE && !b.visited[i] {
            let mut cycle = vec![i];
            let mut queue = VecDeque::from([i]);
            let mut seen = BTreeSet::from([i]);
            while let Some(j) = queue.pop_front() {
                for k in b.neighbors(j).collect::<Vec<_>>() {
                    if seen.insert(k) {
                        cycle.push(k);
                        queue.push_back(k);
                    }
                }
            }
            let anchor = *cycle
                .iter()
                .max_by_key(|&&k| (superior_key(v.coords(k), placement), std::cmp::Reverse(k)))
                .unwrap();
            b.add_node(NodeKind::Loop, vec![anchor]);
            let id = b.nodes.len() - 1;
            b.trace_from(id);
        }
    }
    // node voxels touching voxels of a different node: branches without interior
    let mut direct = BTreeSet::new();
    let mut extra = Vec::new();
    for node in &b.nodes {
        for &p in &node.voxels {
            let i = v.index(p);
            for j in b.neighbors(i) {
                if b.node_of[j] == NONE {
                    continue;
                }
                let other = b.node_of[j] as usize;
                if other != node.id && direct.insert((node.id.min(other), node.id.max(other))) {
                    let (a, av, z, zv) = if node.id < other {
                        (node.id, i, other, j)
                    } else {
                        (other, j, node.id, i)
                    };
                    extra.push((a, av, z, zv, Vec::new()));
                }
            }
        }
    }
    b.raw.extend(extra);
    let isolated: Vec<(usize, usize)> = b
        .nodes
        .iter()
        .filter(|nd| nd.kind == NodeKind::Isolated)
        .map(|nd| (nd.id, v.index(nd.voxels[0])))
        .collect();
    for (id, i) in isolated {
        b.raw.push((id, i, id, i, Vec::new()));
    }

    let nodes = b.nodes;
    let mut branches: Vec<Branch> = b
        .raw
        .into_iter()
        .enumerate()
        .map(|(k, (sn, sv, en, ev, path))| {
            let start_voxel = v.coords(sv);
            let end_voxel = v.coords(ev);
            let interior: Vec<[usize; 3]> = path.iter().map(|&i| v.coords(i)).collect();
            let mut full = vec![start_voxel];
            full.extend_from_slice(&interior);
            full.push(end_voxel);
            Branch {
                id: k + 1,
                parent: None,
                generation: 0,
                start_node: sn,
                end_node: en,
                start_voxel,
                end_voxel,
                voxels: interior,
                length_voxels: path_length(&full, [1.0; 3]),
                length_mm: path_length(&full, spacing),
            }
        })
        .collect();

    let (root, component_roots) = assign_generations(&nodes, &mut branches, placement);
    Ok(SkeletonGraph {
        dims: v.dims(),
        spacing,
        nodes,
        branches,
        root,
        component_roots,
    })
}

/// Larger is more superior; ties resolved towards smaller (x, y).
fn superior_key(p: [usize; 3], placement: RootPlacement) -> (i64, std::cmp::Reverse<(usize, usize)>) {
    let z = match placement {
        RootPlacement::MaxZ => p[2] as i64,
        RootPlacement::MinZ => -(p[2] as i64),
    };
    (z, std::cmp::Reverse((p[0], p[1])))
}

fn node_key(node: &Node, placement: RootPlacement) -> (bool, (i64, std::cmp::Reverse<(usize, usize)>)) {
    let best = node
        .voxels
        .iter()
        .map(|&p| superior_key(p, placement))
        .max()
        .expect("nodes are non-empty");
    (node.kind == NodeKind::Endpoint || node.kind == NodeKind::Isolated, best)
}

/// Breadth-first generation labeling, one traversal per component.
pub(crate) fn assign_generations(
    nodes: &[Node],
    branches: &mut [Branch],
    placement: RootPlacement,
) -> (usize, Vec<usize>) {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (k, b) in branches.iter().enumerate() {
        incident[b.start_node].push(k);
        if b.end_node != b.start_node {
            incident[b.end_node].push(k);
        }
    }
    let mut done = vec![false; branches.len()];
    let mut node_seen = vec![false; nodes.len()];
    let mut roots = Vec::new();
    loop {
        // most superior endpoint among untouched components
        let candidate = nodes
            .iter()
            .filter(|n| !node_seen[n.id] && !incident[n.id].is_empty())
            .max_by(|a, b| {
                node_key(a, placement)
                    .cmp(&node_key(b, placement))
                    .then(b.id.cmp(&a.id))
            });
        let Some(root) = candidate else { break };
        roots.push(root.id);
        node_seen[root.id] = true;
        let mut queue = VecDeque::new();
        for &k in &incident[root.id] {
            if !done[k] {
                done[k] = true;
                branches[k].generation = 0;
                branches[k].parent = None;
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            let (g, id) = (branches[k].generation, branches[k].id);
            for n in [branches[k].start_node, branches[k].end_node] {
                node_seen[n] = true;
                for &c in &incident[n] {
                    if !done[c] {
                        done[c] = true;
                        branches[c].generation = g + 1;
                        branches[c].parent = Some(id);
                        queue.push_back(c);
                    }
                }
            }
        }
    }
    let root = roots.first().copied().unwrap_or(0);
    (root, roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{BinaryMask, UNIT_SPACING};

    fn centerline(dims: [usize; 3], on: &[[usize; 3]]) -> Centerline {
        Centerline::from_mask_unchecked(BinaryMask::from_fn(dims, UNIT_SPACING, |p| on.contains(&p)).unwrap())
    }

    fn check_partition(c: &Centerline, g: &SkeletonGraph) {
        let interior: usize = g.branches.iter().map(|b| b.voxels.len()).sum();
        assert_eq!(interior + g.node_voxel_count(), c.mask().count());
    }

    #[test]
    fn straight_path_is_one_branch() {
        let on: Vec<[usize; 3]> = (0..6).map(|z| [1, 1, z]).collect();
        let c = centerline([3, 3, 6], &on);
        let g = build_graph(&c, [1.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.branches.len(), 1);
        assert_eq!(g.branches[0].generation, 0);
        assert_eq!(g.branches[0].voxels.len(), 4);
        assert_eq!(g.nodes[g.root].voxels[0], [1, 1, 5]);
        assert!((g.branches[0].length_mm - 10.0).abs() < 1e-12);
        assert!((g.branches[0].length_voxels - 5.0).abs() < 1e-12);
        check_partition(&c, &g);
    }

    #[test]
    fn y_shape_has_three_branches() {
        let mut on: Vec<[usize; 3]> = (5..10).map(|z| [5, 2, z]).collect();
        for k in 1..5 {
            on.push([5 - k, 2, 5 - k]);
            on.push([5 + k, 2, 5 - k]);
        }
        let c = centerline([11, 5, 10], &on);
        let g = build_graph(&c, UNIT_SPACING).unwrap();
        assert_eq!(g.branches.len(), 3);
        let gens: Vec<usize> = g.branches.iter().map(|b| b.generation).collect();
        assert_eq!(gens.iter().filter(|&&x| x == 0).count(), 1);
        assert_eq!(gens.iter().filter(|&&x| x == 1).count(), 2);
        let trunk = g.branches.iter().find(|b| b.generation == 0).unwrap();
        assert!(trunk.start_node == g.root || trunk.end_node == g.root);
        for b in &g.branches {
            if b.generation == 1 {
                assert_eq!(b.parent, Some(trunk.id));
            }
        }
        check_partition(&c, &g);
    }

    #[test]
    fn ring_becomes_a_loop_branch() {
        let on = [[1, 0, 0], [2, 1, 0], [1, 2, 0], [0, 1, 0]];
        let c = centerline([3, 3, 1], &on);
        let g = build_graph(&c, UNIT_SPACING).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].kind, NodeKind::Loop);
        assert_eq!(g.branches.len(), 1);
        assert_eq!(g.branches[0].start_node, g.branches[0].end_node);
        check_partition(&c, &g);
    }

    #[test]
    fn isolated_voxel_and_two_components() {
        let on = [[0, 0, 0], [3, 3, 3], [3, 3, 4]];
        let c = centerline([5, 5, 5], &on);
        let g = build_graph(&c, UNIT_SPACING).unwrap();
        assert_eq!(g.component_roots.len(), 2);
        assert_eq!(g.nodes[g.root].voxels[0], [3, 3, 4]);
        assert_eq!(g.branches.len(), 2);
        assert!(g.branches.iter().all(|b| b.generation == 0));
        check_partition(&c, &g);
    }

    #[test]
    fn empty_centerline_is_an_error() {
        let c = centerline([3, 3, 3], &[]);
        assert!(matches!(build_graph(&c, UNIT_SPACING), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn min_z_placement_flips_root() {
        let on: Vec<[usize; 3]> = (0..4).map(|z| [0, 0, z]).collect();
        let c = centerline([1, 1, 4], &on);
        let g = build_graph_with(&c, UNIT_SPACING, RootPlacement::MinZ).unwrap();
        assert_eq!(g.nodes[g.root].voxels[0], [0, 0, 0]);
    }
}
