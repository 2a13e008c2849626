//! HDBSCAN from first principles: core distances, mutual reachability,
//! a dense Prim MST, single-linkage, condensed tree, and stability-based
//! flat extraction (excess-of-mass or leaf).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::cluster::union_find::LabeledUnionFind;
use crate::error::{Error, Result};

/// Density lambda used in place of 1/0 for zero-length edges; kept far from
/// f64::MAX so stability sums (lambda * cluster size) stay finite.
const LAMBDA_CAP: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    CosineDistance,
}

impl Metric {
    pub fn distance(&self, a: &[f32], b: &[f32]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = *x as f64 - *y as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Metric::CosineDistance => {
                let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
                for (x, y) in a.iter().zip(b) {
                    let (x, y) = (*x as f64, *y as f64);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    return 1.0; // zero vectors are rejected upstream
                }
                (1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Eom,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub metric: Metric,
    pub selection: Selection,
}

impl Default for ClusterParams {
    /// Conservative settings that maximize cluster count: the smallest legal
    /// cluster size, nearest-neighbor cores, leaf extraction.
    fn default() -> Self {
        ClusterParams {
            min_cluster_size: 2,
            min_samples: 1,
            metric: Metric::CosineDistance,
            selection: Selection::Leaf,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Config("min_cluster_size must be >= 2".into()));
        }
        if self.min_samples < 1 {
            return Err(Error::Config("min_samples must be >= 1".into()));
        }
        if self.min_samples > self.min_cluster_size {
            return Err(Error::Config(format!(
                "min_samples ({}) must be <= min_cluster_size ({})",
                self.min_samples, self.min_cluster_size
            )));
        }
        Ok(())
    }
}

/// One mutual-reachability MST edge; `u < v` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Flat labels (-1 = noise) plus per-point membership strength in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    pub membership_strength: Vec<f64>,
}

impl ClusterLabels {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().copied().filter(|&l| l >= 0).max().map(|m| m as usize + 1).unwrap_or(0)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }
}

/// Distance from each point to its k-th nearest *other* point. `k` is capped
/// at n-1; a lone point gets core distance 0.
pub fn core_distances(points: &[Vec<f32>], k: usize, metric: Metric) -> Vec<f64> {
    let n = points.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    let k_eff = k.min(n - 1);
    (0..n)
        .map(|i| {
            let mut dists: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| metric.distance(&points[i], &points[j]))
                .collect();
            let (_, kth, _) = dists.select_nth_unstable_by(k_eff - 1, |a, b| {
                a.partial_cmp(b).expect("distances are finite")
            });
            *kth
        })
        .collect()
}

/// max(core_i, core_j, d_ij).
pub fn mutual_reachability(core_i: f64, core_j: f64, d_ij: f64) -> f64 {
    d_ij.max(core_i).max(core_j)
}

/// Dense Prim over the implicit complete mutual-reachability graph:
/// O(n^2) time, O(n) extra space. Ties resolve toward lower indices.
pub fn build_mst(points: &[Vec<f32>], core: &[f64], metric: Metric) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut origin = vec![0usize; n];
    let mut current = 0usize;
    in_tree[0] = true;

    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = metric.distance(&points[current], &points[j]);
            let w = mutual_reachability(core[current], core[j], d);
            if w < best[j] {
                best[j] = w;
                origin[j] = current;
            }
        }
        let mut next = usize::MAX;
        let mut next_weight = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best[j] < next_weight {
                next_weight = best[j];
                next = j;
            }
        }
        let from = origin[next];
        edges.push(MstEdge { u: from.min(next), v: from.max(next), weight: next_weight });
        in_tree[next] = true;
        current = next;
    }
    edges
}

/// Single-linkage dendrogram row: children are node ids (points 0..n-1,
/// merges n..2n-2 in creation order).
#[derive(Debug, Clone)]
struct LinkageRow {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(n: usize, edges: &[MstEdge]) -> Vec<LinkageRow> {
    // Stable sort: equal-weight edges merge in MST emission order, so a
    // bridge point joins the component whose Prim traversal reached it first
    // rather than whichever side has the lower index.
    let mut sorted: Vec<&MstEdge> = edges.iter().collect();
    sorted.sort_by(|a, b| a.weight.partial_cmp(&b.weight).expect("weights are finite"));
    let mut uf = LabeledUnionFind::new(n);
    let mut rows = Vec::with_capacity(edges.len());
    for edge in sorted {
        let ra = uf.find(edge.u);
        let rb = uf.find(edge.v);
        let size = uf.size(ra) + uf.size(rb);
        uf.union(ra, rb);
        rows.push(LinkageRow { left: ra, right: rb, distance: edge.weight, size });
    }
    rows
}

/// Condensed-tree row: a point (size 1) or a child cluster leaving `parent`
/// at density `lambda`.
#[derive(Debug, Clone)]
struct CondensedRow {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

fn node_size(node: usize, n: usize, linkage: &[LinkageRow]) -> usize {
    if node < n {
        1
    } else {
        linkage[node - n].size
    }
}

/// All nodes of the linkage subtree rooted at `node`, preorder.
fn subtree_nodes(node: usize, n: usize, linkage: &[LinkageRow]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        out.push(x);
        if x >= n {
            let row = &linkage[x - n];
            stack.push(row.left);
            stack.push(row.right);
        }
    }
    out
}

fn lambda_of(distance: f64) -> f64 {
    if distance <= 0.0 {
        LAMBDA_CAP
    } else {
        (1.0 / distance).min(LAMBDA_CAP)
    }
}

/// Collapse the dendrogram: splits where both sides reach min_cluster_size
/// create child clusters; smaller sides fall out as points. Cluster ids are
/// n (root), n+1, ... in processing order.
fn condense_tree(linkage: &[LinkageRow], n: usize, min_cluster_size: usize) -> Vec<CondensedRow> {
    let root = n + linkage.len() - 1;
    let mut rows = Vec::new();
    let mut relabel: HashMap<usize, usize> = HashMap::new();
    relabel.insert(root, n);
    let mut next_label = n + 1;
    let mut ignore = vec![false; n + linkage.len()];

    // process internal nodes from the root down (ids descend from root)
    for node in (n..=root).rev() {
        if ignore[node] {
            continue;
        }
        let row = &linkage[node - n];
        let lambda = lambda_of(row.distance);
        let (left, right) = (row.left, row.right);
        let left_size = node_size(left, n, linkage);
        let right_size = node_size(right, n, linkage);
        let parent_label = relabel[&node];

        let fall_out = |child: usize, rows: &mut Vec<CondensedRow>, ignore: &mut Vec<bool>| {
            for x in subtree_nodes(child, n, linkage) {
                if x < n {
                    rows.push(CondensedRow { parent: parent_label, child: x, lambda, size: 1 });
                } else {
                    ignore[x] = true;
                }
            }
        };

        match (left_size >= min_cluster_size, right_size >= min_cluster_size) {
            (true, true) => {
                for (child, size) in [(left, left_size), (right, right_size)] {
                    let label = next_label;
                    next_label += 1;
                    relabel.insert(child, label);
                    rows.push(CondensedRow { parent: parent_label, child: label, lambda, size });
                }
            }
            (true, false) => {
                relabel.insert(left, parent_label);
                fall_out(right, &mut rows, &mut ignore);
            }
            (false, true) => {
                relabel.insert(right, parent_label);
                fall_out(left, &mut rows, &mut ignore);
            }
            (false, false) => {
                fall_out(left, &mut rows, &mut ignore);
                fall_out(right, &mut rows, &mut ignore);
            }
        }
    }
    rows
}

/// Excess-of-mass stability: sum over children of (lambda_child - lambda_birth).
fn compute_stability(condensed: &[CondensedRow], n: usize) -> BTreeMap<usize, f64> {
    let mut births: HashMap<usize, f64> = HashMap::new();
    births.insert(n, 0.0);
    for row in condensed {
        if row.child >= n {
            births.insert(row.child, row.lambda);
        }
    }
    let mut stability: BTreeMap<usize, f64> = BTreeMap::new();
    stability.insert(n, 0.0);
    for row in condensed {
        if row.child >= n {
            stability.entry(row.child).or_insert(0.0);
        }
    }
    for row in condensed {
        let birth = births[&row.parent];
        *stability.entry(row.parent).or_insert(0.0) += (row.lambda - birth) * row.size as f64;
    }
    stability
}

fn cluster_children(condensed: &[CondensedRow], n: usize) -> BTreeMap<usize, Vec<usize>> {
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for row in condensed {
        if row.child >= n {
            children.entry(row.parent).or_default().push(row.child);
        }
    }
    children
}

/// Excess-of-mass selection; the root is never selected.
fn select_eom(condensed: &[CondensedRow], n: usize) -> BTreeSet<usize> {
    let stability = compute_stability(condensed, n);
    let children = cluster_children(condensed, n);
    let mut effective: BTreeMap<usize, f64> = BTreeMap::new();
    let mut selected: BTreeSet<usize> = BTreeSet::new();

    for (&cluster, &own) in stability.iter().rev() {
        if cluster == n {
            continue;
        }
        let subtree: f64 = children
            .get(&cluster)
            .map(|ch| ch.iter().map(|c| effective[c]).sum())
            .unwrap_or(0.0);
        if children.get(&cluster).map(|c| !c.is_empty()).unwrap_or(false) && own < subtree {
            effective.insert(cluster, subtree);
        } else {
            effective.insert(cluster, own);
            selected.insert(cluster);
            // deselect all descendants
            let mut stack: Vec<usize> = children.get(&cluster).cloned().unwrap_or_default();
            while let Some(c) = stack.pop() {
                selected.remove(&c);
                if let Some(grand) = children.get(&c) {
                    stack.extend(grand);
                }
            }
        }
    }
    selected
}

/// Leaves of the cluster tree; empty when the root never splits.
fn select_leaves(condensed: &[CondensedRow], n: usize) -> BTreeSet<usize> {
    let children = cluster_children(condensed, n);
    let mut clusters: BTreeSet<usize> = BTreeSet::new();
    for (parent, kids) in &children {
        clusters.insert(*parent);
        clusters.extend(kids);
    }
    clusters.into_iter().filter(|c| !children.contains_key(c)).collect()
}

/// Flatten the condensed tree into labels per the selection strategy.
pub fn extract_clusters(n: usize, mst: &[MstEdge], params: &ClusterParams) -> Result<ClusterLabels> {
    params.validate()?;
    if n == 0 {
        return Ok(ClusterLabels { labels: Vec::new(), membership_strength: Vec::new() });
    }
    if n < params.min_cluster_size {
        return Ok(ClusterLabels { labels: vec![-1; n], membership_strength: vec![0.0; n] });
    }
    // zero-diameter degenerate: one cluster, no noise
    if mst.iter().all(|e| e.weight == 0.0) {
        return Ok(ClusterLabels { labels: vec![0; n], membership_strength: vec![1.0; n] });
    }

    let linkage = single_linkage(n, mst);
    let condensed = condense_tree(&linkage, n, params.min_cluster_size);
    let selected = match params.selection {
        Selection::Eom => select_eom(&condensed, n),
        Selection::Leaf => select_leaves(&condensed, n),
    };
    if selected.is_empty() {
        return Ok(ClusterLabels { labels: vec![-1; n], membership_strength: vec![0.0; n] });
    }

    // flat ids in condensed-id order
    let flat: BTreeMap<usize, i64> =
        selected.iter().enumerate().map(|(i, &c)| (c, i as i64)).collect();
    let mut cluster_parent: HashMap<usize, usize> = HashMap::new();
    for row in condensed.iter().filter(|r| r.child >= n) {
        cluster_parent.insert(row.child, row.parent);
    }
    let resolve = |mut cluster: usize| -> Option<usize> {
        loop {
            if selected.contains(&cluster) {
                return Some(cluster);
            }
            match cluster_parent.get(&cluster) {
                Some(&p) => cluster = p,
                None => return None,
            }
        }
    };

    let mut labels = vec![-1i64; n];
    let mut point_lambda = vec![0f64; n];
    let mut assigned_cluster: Vec<Option<usize>> = vec![None; n];
    for row in condensed.iter().filter(|r| r.child < n) {
        if let Some(owner) = resolve(row.parent) {
            labels[row.child] = flat[&owner];
            point_lambda[row.child] = row.lambda;
            assigned_cluster[row.child] = Some(owner);
        }
    }

    let mut max_lambda: HashMap<usize, f64> = HashMap::new();
    for (point, owner) in assigned_cluster.iter().enumerate() {
        if let Some(owner) = owner {
            let entry = max_lambda.entry(*owner).or_insert(0.0);
            *entry = entry.max(point_lambda[point]);
        }
    }
    let membership_strength = (0..n)
        .map(|p| match assigned_cluster[p] {
            None => 0.0,
            Some(owner) => {
                let max = max_lambda[&owner];
                if max <= 0.0 {
                    1.0
                } else {
                    (point_lambda[p] / max).clamp(0.0, 1.0)
                }
            }
        })
        .collect();

    Ok(ClusterLabels { labels, membership_strength })
}

/// Give every noise point its own fresh singleton cluster id.
pub fn promote_noise_to_singletons(labels: &ClusterLabels) -> ClusterLabels {
    let mut next = labels.cluster_count() as i64;
    let mut out_labels = Vec::with_capacity(labels.labels.len());
    let mut strengths = Vec::with_capacity(labels.labels.len());
    for (label, strength) in labels.labels.iter().zip(&labels.membership_strength) {
        if *label < 0 {
            out_labels.push(next);
            strengths.push(1.0);
            next += 1;
        } else {
            out_labels.push(*label);
            strengths.push(*strength);
        }
    }
    ClusterLabels { labels: out_labels, membership_strength: strengths }
}

/// Full pipeline: normalize (cosine metric), core distances, MST, extraction.
pub fn cluster(points: &[Vec<f32>], params: &ClusterParams) -> Result<ClusterLabels> {
    params.validate()?;
    let owned: Vec<Vec<f32>>;
    let points = match params.metric {
        Metric::CosineDistance => {
            owned = points
                .iter()
                .map(|p| crate::vector::l2_normalized(p))
                .collect::<Result<_>>()?;
            &owned[..]
        }
        Metric::Euclidean => points,
    };
    let core = core_distances(points, params.min_samples, params.metric);
    let mst = build_mst(points, &core, params.metric);
    extract_clusters(points.len(), &mst, params)
}

/// Adjusted Rand index between two labelings; noise (-1) is an ordinary
/// category. Degenerate identical partitions score 1.0.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len() as f64;
    if a.is_empty() {
        return 1.0;
    }
    let mut contingency: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    let mut rows: BTreeMap<i64, f64> = BTreeMap::new();
    let mut cols: BTreeMap<i64, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *contingency.entry((x, y)).or_insert(0.0) += 1.0;
        *rows.entry(x).or_insert(0.0) += 1.0;
        *cols.entry(y).or_insert(0.0) += 1.0;
    }
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let index: f64 = contingency.values().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n);
    let expected = sum_rows * sum_cols / total;
    let max_index = (sum_rows + sum_cols) / 2.0;
    if (max_index - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}
