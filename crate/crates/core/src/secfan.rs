//! Secondary fan of a weight matrix: chambers, bunches and the Gale-dual fans.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::cones::{hyperplane_key, Cone, Membership};
use crate::exactla::{abs_det, det_exact, dot, integer_kernel_rows, IntMatrix};
use crate::{Error, Int, Rat, Result};

/// Maximal cones are sorted 0-based column index sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SimplicialFan {
    pub maximal_cones: Vec<Vec<usize>>,
    pub is_complete: bool,
    pub is_projective: bool,
    /// Every column of V occurs as a ray.
    pub uses_all_rays: bool,
    pub source: FanSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FanSource {
    Chamber(usize),
    Enumeration,
}

impl SimplicialFan {
    pub fn rays(&self) -> BTreeSet<usize> {
        self.maximal_cones.iter().flatten().copied().collect()
    }

    pub fn same_cones(&self, other: &SimplicialFan) -> bool {
        self.maximal_cones == other.maximal_cones
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chamber {
    pub id: usize,
    pub cone: Cone,
    /// Sorted r-subsets J with det(Q_J) != 0 and cone ⊆ ⟨Q_J⟩.
    pub bunch: Vec<Vec<usize>>,
    pub fan: SimplicialFan,
    pub in_moving: bool,
}

fn complement(idx: &[usize], m: usize) -> Vec<usize> {
    (0..m).filter(|i| !idx.contains(i)).collect()
}

fn cone_of_cols(q: &IntMatrix, idx: &[usize]) -> Result<Cone> {
    Cone::from_generator_matrix_cols(&q.select_cols(idx))
}

pub fn mov_cone(q: &IntMatrix) -> Result<Cone> {
    let mut acc: Option<Cone> = None;
    for i in 0..q.cols() {
        let c = Cone::from_generator_matrix_cols(&q.drop_cols(&[i]))?;
        acc = Some(match acc {
            None => c,
            Some(a) => a.intersect(&c),
        });
    }
    acc.ok_or_else(|| Error::Shape("empty weight matrix".into()))
}

/// Distinct hyperplanes spanned by (r−1)-subsets of columns, as primitive normals.
pub fn column_hyperplanes(q: &IntMatrix) -> Vec<Vec<Int>> {
    let r = q.rows();
    let mut out = BTreeSet::new();
    for s in (0..q.cols()).combinations(r - 1) {
        let k = integer_kernel_rows(&q.select_cols(&s).transpose());
        if k.rows() == 1 {
            out.insert(hyperplane_key(&k.row(0)));
        }
    }
    out.into_iter().collect()
}

/// All r-subsets J with det(Q_J) != 0 together with ⟨Q_J⟩.
fn simplicial_subcones(q: &IntMatrix) -> Result<Vec<(Vec<usize>, Cone)>> {
    let mut out = vec![];
    for j in (0..q.cols()).combinations(q.rows()) {
        let sub = q.select_cols(&j);
        if !det_exact(&sub)?.is_zero() {
            out.push((j.clone(), Cone::from_generator_matrix_cols(&sub)?));
        }
    }
    Ok(out)
}

fn arrangement_cells(q: &IntMatrix) -> Result<Vec<Cone>> {
    let mut cells = vec![Cone::from_generator_matrix_cols(q)?];
    for h in column_hyperplanes(q) {
        let neg: Vec<Int> = h.iter().map(|x| -x).collect();
        let mut next = vec![];
        for c in cells {
            let vals: Vec<Int> = c.rays().iter().map(|x| dot(x, &h)).collect();
            if vals.iter().any(|v| v.is_positive()) && vals.iter().any(|v| v.is_negative()) {
                for half in [c.cut(&h), c.cut(&neg)] {
                    if half.is_full() {
                        next.push(half);
                    }
                }
            } else {
                next.push(c);
            }
        }
        cells = next;
    }
    Ok(cells)
}

fn bunch_fan(bunch: &[Vec<usize>], m: usize, source: FanSource, in_moving: bool) -> SimplicialFan {
    let mut cones: Vec<Vec<usize>> = bunch.iter().map(|j| complement(j, m)).collect();
    cones.sort();
    SimplicialFan { maximal_cones: cones, is_complete: true, is_projective: true, uses_all_rays: in_moving, source }
}

/// Chamber cone and bunch, keyed by the chamber's ray list.
type ChamberCells = BTreeMap<Vec<Vec<Int>>, (Cone, Vec<Vec<usize>>)>;

/// Full-dimensional chambers inside ⟨Q⟩, sorted by their ray lists.
pub fn enumerate_chambers(q: &IntMatrix) -> Result<Vec<Chamber>> {
    let m = q.cols();
    let subcones = simplicial_subcones(q)?;
    let mov = mov_cone(q)?;
    let mut found: ChamberCells = BTreeMap::new();
    for cell in arrangement_cells(q)? {
        let p = cell.interior_point();
        let containing: Vec<&(Vec<usize>, Cone)> =
            subcones.iter().filter(|(_, c)| c.contains_in_relint(&p)).collect();
        let mut cone = containing[0].1.clone();
        for (_, c) in &containing[1..] {
            cone = cone.intersect(c);
        }
        let bunch: Vec<Vec<usize>> = containing.iter().map(|(j, _)| j.clone()).collect();
        found.entry(cone.rays().to_vec()).or_insert((cone, bunch));
    }
    Ok(found
        .into_values()
        .enumerate()
        .map(|(id, (cone, bunch))| {
            let in_moving = mov.contains_cone(&cone);
            let fan = bunch_fan(&bunch, m, FanSource::Chamber(id), in_moving);
            Chamber { id, cone, bunch, fan, in_moving }
        })
        .collect())
}

pub fn fan_of_chamber(ch: &Chamber) -> SimplicialFan {
    ch.fan.clone()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChamberOfFan {
    pub cone: Cone,
    /// The intersection is full-dimensional and its bunch gives back the fan.
    pub projective: bool,
}

/// γ_Σ: intersection of the cones ⟨Q_J⟩ over complements J of the maximal cones.
pub fn chamber_of_fan(q: &IntMatrix, fan: &SimplicialFan) -> Result<ChamberOfFan> {
    let m = q.cols();
    let mut cone: Option<Cone> = None;
    for i in &fan.maximal_cones {
        let c = cone_of_cols(q, &complement(i, m))?;
        cone = Some(match cone {
            None => c,
            Some(a) => a.intersect(&c),
        });
    }
    let cone = cone.ok_or_else(|| Error::Shape("fan without maximal cones".into()))?;
    let projective = cone.is_full() && {
        let p = cone.interior_point();
        let mut bunch: Vec<Vec<usize>> = simplicial_subcones(q)?
            .into_iter()
            .filter(|(_, c)| c.contains_in_relint(&p))
            .map(|(j, _)| complement(&j, m))
            .collect();
        bunch.sort();
        bunch == fan.maximal_cones
    };
    Ok(ChamberOfFan { cone, projective })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnumerationLimits {
    /// Cap on the number of n-subsets of columns considered.
    pub max_candidates: usize,
    /// Cap on backtracking nodes.
    pub max_nodes: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits { max_candidates: 5000, max_nodes: 200_000 }
    }
}

/// Point off every hyperplane spanned by n−1 columns of V.
fn generic_point(v: &IntMatrix) -> Vec<Int> {
    let n = v.rows();
    let normals: Vec<Vec<Int>> = if n == 1 {
        vec![]
    } else {
        (0..v.cols())
            .combinations(n - 1)
            .filter_map(|s| {
                let k = integer_kernel_rows(&v.select_cols(&s).transpose());
                (k.rows() == 1).then(|| k.row(0))
            })
            .collect()
    };
    let mut base = Int::from(2);
    loop {
        let mut p = vec![];
        let mut x = Int::one();
        for _ in 0..n {
            p.push(x.clone());
            x *= &base;
        }
        p[0] += Int::from(n as i64 + 1) * &base;
        if normals.iter().all(|h| !dot(h, &p).is_zero()) {
            return p;
        }
        base += 1;
    }
}

struct FanSearch<'a> {
    cands: &'a [Vec<usize>],
    compat: &'a [Vec<bool>],
    normals: BTreeMap<Vec<usize>, Vec<Int>>,
    v: &'a IntMatrix,
    nodes: usize,
    max_nodes: usize,
    out: BTreeSet<Vec<usize>>,
}

impl FanSearch<'_> {
    /// Signed side of column `k` w.r.t. the hyperplane spanned by the ridge.
    fn side(&self, ridge: &[usize], k: usize) -> Int {
        dot(&self.normals[ridge], &self.v.col(k))
    }

    fn open_ridge(&self, chosen: &[usize]) -> Option<(Vec<usize>, usize)> {
        for &c in chosen {
            let cone = &self.cands[c];
            for drop in 0..cone.len() {
                let mut ridge = cone.clone();
                let apex = ridge.remove(drop);
                let count = chosen
                    .iter()
                    .filter(|&&d| ridge.iter().all(|x| self.cands[d].contains(x)))
                    .count();
                if count == 1 {
                    return Some((ridge, apex));
                }
            }
        }
        None
    }

    fn run(&mut self, chosen: &mut Vec<usize>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(Error::BudgetExceeded(format!("more than {} search nodes", self.max_nodes)));
        }
        let Some((ridge, apex)) = self.open_ridge(chosen) else {
            let mut set: Vec<usize> = chosen.clone();
            set.sort();
            self.out.insert(set);
            return Ok(());
        };
        let apex_side = self.side(&ridge, apex);
        for d in 0..self.cands.len() {
            if chosen.contains(&d) || !chosen.iter().all(|&c| self.compat[c][d]) {
                continue;
            }
            let cone = &self.cands[d];
            if !ridge.iter().all(|x| cone.contains(x)) {
                continue;
            }
            let other = *cone.iter().find(|x| !ridge.contains(x)).expect("n-subset");
            let s = self.side(&ridge, other);
            if s.is_zero() || s.is_positive() == apex_side.is_positive() {
                continue;
            }
            chosen.push(d);
            self.run(chosen)?;
            chosen.pop();
        }
        Ok(())
    }
}

/// True when ⟨V_I⟩ ∩ ⟨V_J⟩ = ⟨V_{I∩J}⟩.
fn meet_in_face(v: &IntMatrix, a: &Cone, b: &Cone, i: &[usize], j: &[usize]) -> Result<bool> {
    let common: Vec<usize> = i.iter().filter(|x| j.contains(x)).copied().collect();
    let face = if common.is_empty() { Cone::zero(v.rows()) } else { cone_of_cols(v, &common)? };
    Ok(a.intersect(b) == face)
}

/// All simplicial complete fans whose rays are exactly the columns of V.
pub fn enumerate_complete_fans(v: &IntMatrix, limits: EnumerationLimits) -> Result<Vec<SimplicialFan>> {
    let (n, m) = (v.rows(), v.cols());
    let subsets = num_integer::binomial(m, n);
    if subsets > limits.max_candidates {
        return Err(Error::BudgetExceeded(format!(
            "{subsets} candidate cones exceed the limit of {}",
            limits.max_candidates
        )));
    }
    let mut cands = vec![];
    let mut cones = vec![];
    for i in (0..m).combinations(n) {
        let sub = v.select_cols(&i);
        if det_exact(&sub)?.is_zero() {
            continue;
        }
        let c = Cone::from_generator_matrix_cols(&sub)?;
        let others = complement(&i, m);
        if others.iter().any(|&k| c.contains(&v.col(k))) {
            continue;
        }
        cands.push(i);
        cones.push(c);
    }
    let mut compat = vec![vec![true; cands.len()]; cands.len()];
    for a in 0..cands.len() {
        for b in a + 1..cands.len() {
            let ok = meet_in_face(v, &cones[a], &cones[b], &cands[a], &cands[b])?;
            compat[a][b] = ok;
            compat[b][a] = ok;
        }
    }
    let mut normals = BTreeMap::new();
    for i in &cands {
        for drop in 0..n {
            let mut ridge = i.clone();
            ridge.remove(drop);
            normals.entry(ridge.clone()).or_insert_with(|| {
                integer_kernel_rows(&v.select_cols(&ridge).transpose()).row(0)
            });
        }
    }
    let p = generic_point(v);
    let seeds: Vec<usize> = (0..cands.len()).filter(|&c| cones[c].contains_in_relint(&p)).collect();
    let mut search = FanSearch {
        cands: &cands,
        compat: &compat,
        normals,
        v,
        nodes: 0,
        max_nodes: limits.max_nodes,
        out: BTreeSet::new(),
    };
    for s in seeds {
        search.run(&mut vec![s])?;
    }
    let q = crate::matrices::weight_matrix(v)?;
    let mut fans = vec![];
    for set in &search.out {
        // support: the generic point lies in exactly one maximal cone
        if set.iter().filter(|&&c| cones[c].contains(&p)).count() != 1 {
            continue;
        }
        let maximal_cones: Vec<Vec<usize>> = set.iter().map(|&c| cands[c].clone()).collect();
        let mut fan = SimplicialFan {
            maximal_cones,
            is_complete: true,
            is_projective: false,
            uses_all_rays: false,
            source: FanSource::Enumeration,
        };
        fan.uses_all_rays = fan.rays().len() == m;
        if !fan.uses_all_rays {
            continue;
        }
        fan.is_projective = chamber_of_fan(&q, &fan)?.projective;
        fans.push(fan);
    }
    fans.sort_by(|a, b| b.is_projective.cmp(&a.is_projective).then(a.maximal_cones.cmp(&b.maximal_cones)));
    Ok(fans)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlipEdge {
    pub a: usize,
    pub b: usize,
    pub wall: Cone,
    /// Primitive collections of Σ_a that are not primitive collections of Σ_b, and vice versa.
    pub collections_a_only: Vec<Vec<usize>>,
    pub collections_b_only: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlipGraph {
    pub nodes: Vec<usize>,
    pub edges: Vec<FlipEdge>,
}

/// Chambers in Mov joined when they share a wall of codimension one.
pub fn flip_graph(v: &IntMatrix, chambers: &[Chamber]) -> Result<FlipGraph> {
    let inside: Vec<&Chamber> = chambers.iter().filter(|c| c.in_moving).collect();
    let mut edges = vec![];
    for (x, y) in inside.iter().tuple_combinations() {
        let wall = x.cone.intersect(&y.cone);
        let r = x.cone.ambient();
        if wall.dim() + 1 != r {
            continue;
        }
        let pa = crate::collections::primitive_collections(&x.fan, v.cols())?;
        let pb = crate::collections::primitive_collections(&y.fan, v.cols())?;
        let only = |s: &[Vec<usize>], t: &[Vec<usize>]| s.iter().filter(|p| !t.contains(p)).cloned().collect();
        edges.push(FlipEdge {
            a: x.id,
            b: y.id,
            wall,
            collections_a_only: only(&pa, &pb),
            collections_b_only: only(&pb, &pa),
        });
    }
    Ok(FlipGraph { nodes: inside.iter().map(|c| c.id).collect(), edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NefMode {
    Nef,
    Ample,
}

/// Membership of a degree class in the chamber (nef) or its interior (ample).
pub fn nefness(class: &[Int], ch: &Chamber, mode: NefMode) -> bool {
    let x: Vec<Rat> = class.iter().map(|c| Rat::from_integer(c.clone())).collect();
    match mode {
        NefMode::Nef => ch.cone.membership(&x, Membership::Closed),
        NefMode::Ample => ch.cone.membership(&x, Membership::RelativeInterior),
    }
}

/// Anticanonical class Σ_j q_j.
pub fn anticanonical_class(q: &IntMatrix) -> Vec<Int> {
    (0..q.rows()).map(|i| q.row(i).iter().sum()).collect()
}

pub fn q_fano(q: &IntMatrix, ch: &Chamber) -> bool {
    nefness(&anticanonical_class(q), ch, NefMode::Ample)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConeDeterminant {
    pub cone: Vec<usize>,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub det_v: Int,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub det_q: Int,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SingularityProfile {
    pub cones: Vec<ConeDeterminant>,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub delta: Int,
    pub non_singular: bool,
}

/// |det V_I| and |det Q^I| over the maximal cones; their ratio is the constant δ.
pub fn singularity_profile(v: &IntMatrix, q: &IntMatrix, fan: &SimplicialFan) -> Result<SingularityProfile> {
    let m = v.cols();
    let mut cones = vec![];
    let mut delta: Option<Int> = None;
    for i in &fan.maximal_cones {
        let det_v = abs_det(&v.select_cols(i));
        let det_q = abs_det(&q.select_cols(&complement(i, m)));
        if det_q.is_zero() || (&det_v % &det_q) != Int::zero() {
            return Err(Error::Internal(format!("determinants {det_v} and {det_q} are not proportional")));
        }
        let d = &det_v / &det_q;
        match &delta {
            Some(x) if *x != d => {
                return Err(Error::Internal("determinant ratio is not constant".into()));
            }
            _ => delta = Some(d),
        }
        cones.push(ConeDeterminant { cone: i.clone(), det_v, det_q });
    }
    let delta = delta.ok_or_else(|| Error::Shape("fan without maximal cones".into()))?;
    let non_singular = cones.iter().all(|c| c.det_v.is_one());
    Ok(SingularityProfile { cones, delta, non_singular })
}
