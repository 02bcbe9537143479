//! Primitive collections, primitive relations and the bordering taxonomy of chambers.

use itertools::Itertools;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::cones::{hyperplane_key, Cone};
use crate::exactla::{dot, lcm_all, IntMatrix};
use crate::secfan::{Chamber, SimplicialFan};
use crate::{Error, Int, Rat, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrimitiveCollection {
    /// 0-based column indices.
    pub p: Vec<usize>,
    /// r_Z(P), integral with coprime entries.
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub relation: Vec<Int>,
    /// n_P with Q^T n_P = relation; also the inward normal of the support hyperplane H_P.
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub numerical_class: Vec<Int>,
    pub focus: Vec<usize>,
    /// Least common denominator of the relation coefficients.
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub l: Int,
    pub is_nef: bool,
}

fn is_face(fan: &SimplicialFan, s: &[usize]) -> bool {
    fan.maximal_cones.iter().any(|c| s.iter().all(|x| c.contains(x)))
}

/// Minimal non-faces among the rays of the fan, sorted by size then lexicographically.
pub fn primitive_collections(fan: &SimplicialFan, m: usize) -> Result<Vec<Vec<usize>>> {
    let rays: Vec<usize> = fan.rays().into_iter().filter(|&i| i < m).collect();
    let n = fan.maximal_cones.first().map_or(0, |c| c.len());
    let mut out = vec![];
    for k in 2..=(n + 1).min(rays.len()) {
        for s in rays.iter().copied().combinations(k) {
            if is_face(fan, &s) {
                continue;
            }
            let minimal = (0..k).all(|drop| {
                let mut t = s.clone();
                t.remove(drop);
                is_face(fan, &t)
            });
            if minimal {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Exact relation Σ_{j∈P} v_j = Σ_{k∈focus} λ_k v_k, cleared of denominators.
pub fn primitive_relation(p: &[usize], fan: &SimplicialFan, v: &IntMatrix, q: &IntMatrix) -> Result<PrimitiveCollection> {
    let (n, m) = (v.rows(), v.cols());
    let mut vp = vec![Int::zero(); n];
    for &j in p {
        for (a, b) in vp.iter_mut().zip(v.col(j)) {
            *a += b;
        }
    }
    let target: Vec<Rat> = vp.iter().map(|x| Rat::from_integer(x.clone())).collect();
    let mut coeffs: Option<(Vec<usize>, Vec<Rat>)> = None;
    if vp.iter().all(|x| x.is_zero()) {
        coeffs = Some((vec![], vec![]));
    } else {
        for cone in &fan.maximal_cones {
            let lam = v.select_cols(cone).to_rat().solve(&target);
            if let Some(lam) = lam {
                if lam.iter().all(|x| !x.is_negative()) {
                    let support: Vec<usize> = cone.iter().zip(&lam).filter(|(_, x)| !x.is_zero()).map(|(&i, _)| i).collect();
                    let vals: Vec<Rat> = lam.into_iter().filter(|x| !x.is_zero()).collect();
                    coeffs = Some((support, vals));
                    break;
                }
            }
        }
    }
    let (focus, lam) = coeffs.ok_or_else(|| Error::Internal("v_P lies outside the fan support".into()))?;
    let mut b = vec![Rat::zero(); m];
    for &j in p {
        b[j] += Rat::from_integer(Int::from(1));
    }
    for (k, x) in focus.iter().zip(&lam) {
        b[*k] -= x;
    }
    let l = lcm_all(b.iter().map(|x| x.denom()));
    let relation: Vec<Int> = b.iter().map(|x| (x * Rat::from_integer(l.clone())).to_integer()).collect();
    let class = q
        .transpose()
        .to_rat()
        .solve(&relation.iter().map(|x| Rat::from_integer(x.clone())).collect::<Vec<_>>())
        .ok_or_else(|| Error::Internal("relation is not in the row space of Q".into()))?;
    let numerical_class = class
        .iter()
        .map(|x| x.is_integer().then(|| x.to_integer()))
        .collect::<Option<Vec<Int>>>()
        .ok_or_else(|| Error::Internal("numerical class is not integral".into()))?;
    let is_nef = relation.iter().all(|x| !x.is_negative());
    Ok(PrimitiveCollection { p: p.to_vec(), relation, numerical_class, focus, l, is_nef })
}

pub fn collections_with_relations(fan: &SimplicialFan, v: &IntMatrix, q: &IntMatrix) -> Result<Vec<PrimitiveCollection>> {
    primitive_collections(fan, v.cols())?.iter().map(|p| primitive_relation(p, fan, v, q)).collect()
}

/// Chamber criterion: γ ⊄ ⟨Q^P⟩ and γ ⊆ ⟨Q^{P∖{i}}⟩ for every i ∈ P.
pub fn is_primitive_by_chamber(q: &IntMatrix, gamma: &Cone, p: &[usize]) -> Result<bool> {
    let inside = |drop: &[usize]| -> Result<bool> {
        Ok(Cone::from_generator_matrix_cols(&q.drop_cols(drop))?.contains_cone(gamma))
    };
    if inside(p)? {
        return Ok(false);
    }
    for &i in p {
        let rest: Vec<usize> = p.iter().copied().filter(|&j| j != i).collect();
        if !inside(&rest)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// ∩_P H_P^+ over the primitive collections, cut out of ⟨Q⟩.
pub fn nef_cone_via_collections(fan: &SimplicialFan, v: &IntMatrix, q: &IntMatrix) -> Result<Cone> {
    let mut acc = Cone::from_generator_matrix_cols(q)?;
    for c in collections_with_relations(fan, v, q)? {
        acc = acc.cut(&c.numerical_class);
    }
    Ok(acc)
}

pub fn mori_generators(fan: &SimplicialFan, v: &IntMatrix, q: &IntMatrix) -> Result<Vec<Vec<Int>>> {
    Ok(collections_with_relations(fan, v, q)?.into_iter().map(|c| c.numerical_class).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderKind {
    Interior,
    Bordering,
    Intbord,
    Maxbord,
    RecursivelyMaxbord,
    TotallyMaxbord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HyperplaneReport {
    /// Inward primitive normal of a facet of ⟨Q⟩.
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub normal: Vec<Int>,
    pub face_dim: usize,
    pub bordering: bool,
    pub maxbord: bool,
    pub intbord: bool,
    /// Nef primitive collection supported on this hyperplane, if any.
    pub nef_collection: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BorderClass {
    pub kind: BorderKind,
    /// Hyperplanes witnessing `kind`.
    #[serde(serialize_with = "crate::exactla::ser::vec_vec")]
    pub hyperplanes: Vec<Vec<Int>>,
    /// Hyperplane sequence of a recursive descent; later normals lie in the span of the previous face.
    #[serde(serialize_with = "crate::exactla::ser::opt_vec_vec")]
    pub recursion: Option<Vec<Vec<Int>>>,
    pub per_hyperplane: Vec<HyperplaneReport>,
    /// intbord w.r.t. H agrees with the existence of a nef collection supported on H for every H.
    pub consistent: bool,
}

/// Flag of faces C_{r-1} ⊃ … ⊃ C_1 of ⟨Q⟩ with dim(γ ∩ C_k) = k.
pub fn recursive_flag(q_cone: &Cone, gamma: &Cone) -> Option<Vec<Vec<Int>>> {
    fn go(face: &Cone, g: &Cone, acc: &mut Vec<Vec<Int>>) -> bool {
        if face.dim() <= 1 {
            return true;
        }
        for (n, f) in face.facets_as_cones() {
            let sub = g.slice(&n);
            if sub.dim() + 1 == face.dim() {
                acc.push(n);
                if go(&f, &sub, acc) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }
    let mut acc = vec![];
    go(q_cone, gamma, &mut acc).then_some(acc)
}

fn intbord_witness(q: &IntMatrix, gamma: &Cone, h: &[Int]) -> bool {
    let on_h: Vec<Vec<Int>> = q.col_vecs().into_iter().filter(|c| dot(c, h).is_zero()).collect();
    let face = gamma.slice(h);
    gamma.facet_normals().iter().any(|n2| {
        let contains = face.rays().iter().all(|x| dot(x, n2).is_zero());
        let pos = on_h.iter().any(|c| dot(c, n2).is_positive());
        let neg = on_h.iter().any(|c| dot(c, n2).is_negative());
        contains && pos && neg
    })
}

pub fn classify_border(v: &IntMatrix, q: &IntMatrix, ch: &Chamber) -> Result<BorderClass> {
    let r = q.rows();
    let q_cone = Cone::from_generator_matrix_cols(q)?;
    let gamma = &ch.cone;
    let nef: Vec<PrimitiveCollection> =
        collections_with_relations(&ch.fan, v, q)?.into_iter().filter(|c| c.is_nef).collect();
    let mut per = vec![];
    for h in q_cone.facet_normals() {
        let face_dim = gamma.slice(h).dim();
        let bordering = face_dim >= 1;
        let maxbord = face_dim + 1 == r;
        let intbord = bordering && (maxbord || intbord_witness(q, gamma, h));
        let key = hyperplane_key(h);
        let nef_collection =
            nef.iter().find(|c| hyperplane_key(&c.numerical_class) == key).map(|c| c.p.clone());
        per.push(HyperplaneReport { normal: h.clone(), face_dim, bordering, maxbord, intbord, nef_collection });
    }
    let consistent = per.iter().filter(|h| h.bordering).all(|h| h.intbord == h.nef_collection.is_some());
    let pick = |f: fn(&HyperplaneReport) -> bool| -> Vec<Vec<Int>> {
        per.iter().filter(|h| f(h)).map(|h| h.normal.clone()).collect()
    };
    let maxbord = pick(|h| h.maxbord);
    let recursion = if r == 1 { Some(vec![]) } else { recursive_flag(&q_cone, gamma) };
    let (kind, hyperplanes) = if r == 1 || (r >= 2 && maxbord.len() >= r - 1 && !maxbord.is_empty()) {
        (BorderKind::TotallyMaxbord, maxbord)
    } else if let Some(seq) = &recursion {
        (BorderKind::RecursivelyMaxbord, vec![seq[0].clone()])
    } else if !maxbord.is_empty() {
        (BorderKind::Maxbord, maxbord)
    } else if per.iter().any(|h| h.intbord) {
        (BorderKind::Intbord, pick(|h| h.intbord))
    } else if per.iter().any(|h| h.bordering) {
        (BorderKind::Bordering, pick(|h| h.bordering))
    } else {
        (BorderKind::Interior, vec![])
    };
    Ok(BorderClass { kind, hyperplanes, recursion, per_hyperplane: per, consistent })
}
