//! Smooth complete toric varieties of rank 2: normal form, Fano test and flips.

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::cones::Cone;
use crate::exactla::{abs_det, dot, int, IntMatrix};
use crate::secfan::{enumerate_chambers, Chamber};
use crate::{Error, Int, Result};

/// X ≅ P(O ⊕ O(c_1) ⊕ … ⊕ O(c_b)) over P^a.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KleinschmidtForm {
    pub a: usize,
    pub b: usize,
    /// Nondecreasing, nonnegative.
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub c: Vec<Int>,
    /// ( 1 … 1  0  −c_1 … −c_b )
    /// ( 0 … 0  1   1   …  1  )
    pub q_normal: IntMatrix,
    /// `q_normal = alpha · Q · P` where column k of `q_normal` is column `perm[k]` of Q.
    pub alpha: IntMatrix,
    pub perm: Vec<usize>,
    /// Id of the chamber of Q the form was read from.
    pub chamber: usize,
}

/// Q_normal for given a and c.
pub fn normal_matrix(a: usize, c: &[Int]) -> IntMatrix {
    let mut top = vec![Int::one(); a + 1];
    let mut bottom = vec![Int::zero(); a + 1];
    top.push(Int::zero());
    bottom.push(Int::one());
    for x in c {
        top.push(-x);
        bottom.push(Int::one());
    }
    IntMatrix::from_int_rows(&[top, bottom])
}

fn check_rank2(q: &IntMatrix) -> Result<()> {
    if q.rows() != 2 {
        return Err(Error::Rank(format!("expected a rank-2 weight matrix, got {} rows", q.rows())));
    }
    Ok(())
}

/// |det Q_J| over the bunch, i.e. the indices of the maximal cones of the fan.
pub fn chamber_indices(q: &IntMatrix, ch: &Chamber) -> Vec<Int> {
    ch.bunch.iter().map(|j| abs_det(&q.select_cols(j))).collect()
}

fn is_smooth_chamber(q: &IntMatrix, ch: &Chamber) -> bool {
    ch.in_moving && chamber_indices(q, ch).iter().all(|d| d.is_one())
}

/// Normal form read from a smooth chamber of Q.
pub fn form_of_chamber(q: &IntMatrix, ch: &Chamber) -> Result<KleinschmidtForm> {
    check_rank2(q)?;
    if !is_smooth_chamber(q, ch) {
        return Err(Error::Singular("chamber has a maximal cone of index > 1".into()));
    }
    let q_cone = Cone::from_generator_matrix_cols(q)?;
    // boundary rays of ⟨Q⟩ shared with γ; a product touches both, then the least form wins
    let mut forms = vec![];
    for n in q_cone.facet_normals() {
        let on = q_cone.rays_on(n);
        if on.len() == 1 && ch.cone.rays().contains(&on[0]) {
            forms.push(form_along(q, &on[0], n, ch.id)?);
        }
    }
    forms
        .into_iter()
        .min_by(|x, y| (x.a, &x.c).cmp(&(y.a, &y.c)))
        .ok_or_else(|| Error::Internal("smooth chamber touches no boundary ray".into()))
}

fn form_along(q: &IntMatrix, rho: &[Int], n: &[Int], chamber: usize) -> Result<KleinschmidtForm> {
    let cols = q.col_vecs();
    if cols.iter().any(|c| !dot(c, n).is_zero() && !dot(c, n).is_one()) {
        return Err(Error::Internal("smooth chamber with a column of height > 1".into()));
    }
    // f with f·ρ = 1, then shifted so that the off-ρ values have maximum 0
    let f0 = if rho[0].is_zero() {
        vec![Int::zero(), rho[1].clone()]
    } else if rho[1].is_zero() {
        vec![rho[0].clone(), Int::zero()]
    } else {
        let e = rho[0].extended_gcd(&rho[1]);
        let sign = e.gcd.signum();
        vec![e.x * &sign, e.y * &sign]
    };
    debug_assert!(dot(&f0, rho).is_one());
    let off: Vec<usize> = (0..cols.len()).filter(|&j| !dot(&cols[j], n).is_zero()).collect();
    let on: Vec<usize> = (0..cols.len()).filter(|&j| dot(&cols[j], n).is_zero()).collect();
    let top = off.iter().map(|&j| dot(&cols[j], &f0)).max().expect("some column lies off the facet");
    let f: Vec<Int> = f0.iter().zip(n).map(|(x, y)| x - &top * y).collect();
    let mut off_sorted = off.clone();
    off_sorted.sort_by_key(|&j| -dot(&cols[j], &f));
    let alpha = IntMatrix::from_int_rows(&[f.clone(), n.to_vec()]);
    let mut perm = on.clone();
    perm.extend(off_sorted.iter().copied());
    let q_normal = alpha.mul(&q.select_cols(&perm));
    let a = on.len() - 1;
    let c: Vec<Int> = off_sorted[1..].iter().map(|&j| -dot(&cols[j], &f)).collect();
    if q_normal != normal_matrix(a, &c) {
        return Err(Error::Internal("normal form does not have the expected shape".into()));
    }
    Ok(KleinschmidtForm { a, b: c.len(), c, q_normal, alpha, perm, chamber })
}

/// Normal form of a smooth chamber of Q, the least (a, c) when two chambers are smooth;
/// fails when no chamber is smooth.
pub fn kleinschmidt_normal_form(q: &IntMatrix) -> Result<KleinschmidtForm> {
    check_rank2(q)?;
    let mut forms = vec![];
    for ch in enumerate_chambers(q)?.iter().filter(|c| is_smooth_chamber(q, c)) {
        forms.push(form_of_chamber(q, ch)?);
    }
    forms
        .into_iter()
        .min_by(|x, y| (x.a, &x.c).cmp(&(y.a, &y.c)))
        .ok_or_else(|| Error::Singular("no chamber of Q gives a non-singular fan".into()))
}

pub fn is_fano_rank2(form: &KleinschmidtForm) -> bool {
    form.c.iter().sum::<Int>() <= int(form.a as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipCase {
    /// P(O^c ⊕ O(l)): no flips.
    TwistedSingle,
    /// P^a × P^b: no flips.
    Product,
    /// P(O^c ⊕ O(1)^{1+b}): a unique smooth flip.
    SmoothFlip,
    /// Every flip is singular.
    SingularFlips,
}

impl FlipCase {
    /// Numbering 1–4 of the four alternatives.
    pub fn number(&self) -> u8 {
        match self {
            FlipCase::TwistedSingle => 1,
            FlipCase::Product => 2,
            FlipCase::SmoothFlip => 3,
            FlipCase::SingularFlips => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlipTarget {
    pub chamber: Cone,
    /// |det| of every maximal cone of the flipped fan.
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub indices: Vec<Int>,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub max_index: Int,
    pub smooth_form: Option<KleinschmidtForm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlipTaxonomy {
    pub case: FlipCase,
    pub case_number: u8,
    pub form: KleinschmidtForm,
    pub targets: Vec<FlipTarget>,
}

/// Classifies X by its c-vector and lists the flips as the other chambers of Mov.
pub fn flip_taxonomy(q: &IntMatrix) -> Result<FlipTaxonomy> {
    let form = kleinschmidt_normal_form(q)?;
    let nonzero: Vec<&Int> = form.c.iter().filter(|x| !x.is_zero()).collect();
    let case = match nonzero.len() {
        0 => FlipCase::Product,
        1 => FlipCase::TwistedSingle,
        _ if nonzero.iter().all(|x| x.is_one()) => FlipCase::SmoothFlip,
        _ => FlipCase::SingularFlips,
    };
    let qn = &form.q_normal;
    let chambers = enumerate_chambers(qn)?;
    // in normal coordinates X sits on the positive quadrant
    let quadrant = Cone::from_generator_matrix_cols(&IntMatrix::identity(2))?;
    let mut targets = vec![];
    for ch in chambers.iter().filter(|c| c.in_moving && c.cone != quadrant) {
        let indices = chamber_indices(qn, ch);
        let max_index = indices.iter().max().cloned().unwrap_or_else(Int::one);
        let smooth_form = if max_index.is_one() { Some(form_of_chamber(qn, ch)?) } else { None };
        targets.push(FlipTarget { chamber: ch.cone.clone(), indices, max_index, smooth_form });
    }
    Ok(FlipTaxonomy { case, case_number: case.number(), form, targets })
}

/// Form of P(O^c ⊕ O(1)^{1+a}) over P^b obtained by flipping a case-3 variety.
pub fn mirror_form(form: &KleinschmidtForm) -> (usize, Vec<Int>) {
    let zeros = form.c.iter().filter(|x| x.is_zero()).count() + 1;
    let ones = form.c.len() + 1 - zeros;
    let mut c = vec![Int::zero(); zeros - 1];
    c.extend(std::iter::repeat_n(Int::one(), form.a + 1));
    (ones - 1, c)
}

/// A bit weight matrix (entries 0/1) in positive REF with the same row lattice up to
/// GL₂(ℤ) and column permutation; `perm[k]` is the original column at position k.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BitForm {
    pub q_bit: IntMatrix,
    pub perm: Vec<usize>,
    /// Number of columns equal to (1,0), (1,1) and (0,1).
    pub counts: [usize; 3],
}

/// Searches the distinct column directions for a unimodular pair (u, w) with all
/// columns among u, u + w, w.
pub fn bit_form(q: &IntMatrix) -> Option<BitForm> {
    if q.rows() != 2 {
        return None;
    }
    let cols = q.col_vecs();
    let mut distinct: Vec<Vec<Int>> = cols.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.len() > 3 {
        return None;
    }
    for u in &distinct {
        for w in &distinct {
            let det = &u[0] * &w[1] - &u[1] * &w[0];
            if det.abs() != Int::one() {
                continue;
            }
            let uw: Vec<Int> = u.iter().zip(w).map(|(x, y)| x + y).collect();
            if !cols.iter().all(|c| c == u || c == w || c == &uw) {
                continue;
            }
            // inverse of (u w) sends u ↦ e_1, w ↦ e_2
            let m = IntMatrix::from_int_rows(&[
                vec![&w[1] * &det, -&w[0] * &det],
                vec![-&u[1] * &det, &u[0] * &det],
            ]);
            let mut perm: Vec<usize> = (0..cols.len()).collect();
            let rank = |c: &Vec<Int>| if c == u { 0 } else if c == &uw { 1 } else { 2 };
            perm.sort_by_key(|&j| rank(&cols[j]));
            let q_bit = m.mul(&q.select_cols(&perm));
            let mut counts = [0; 3];
            for c in &cols {
                counts[rank(c)] += 1;
            }
            return Some(BitForm { q_bit, perm, counts });
        }
    }
    None
}

/// Smoothly torically flipping: a bit form with 2 ≤ j_1 < j_2 ≤ n.
pub fn is_stf(q: &IntMatrix) -> bool {
    match bit_form(q) {
        Some(b) => {
            let [ones_first, both, ones_second] = b.counts;
            let w_ok = crate::matrices::check_w(&b.q_bit).is_w;
            w_ok && ones_first >= 2 && both >= 1 && ones_second >= 2
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collections::{classify_border, BorderKind};
    use crate::exactla::ints;
    use crate::matrices::{gale_dual, weight_matrix};
    use crate::secfan::q_fano;
    use proptest::prelude::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows)
    }

    fn f2() -> IntMatrix {
        weight_matrix(&m(&[vec![1, 0, -1, 0], vec![0, 1, 2, -1]])).unwrap()
    }

    #[test]
    fn normal_forms() {
        let k = kleinschmidt_normal_form(&m(&[vec![1, 1, 0, 0], vec![0, 0, 1, 1]])).unwrap();
        assert_eq!((k.a, k.b, k.c.clone()), (1, 1, ints(&[0])));
        let k = kleinschmidt_normal_form(&m(&[vec![1, 1, 0, -1], vec![0, 0, 1, 1]])).unwrap();
        assert_eq!((k.a, k.b, k.c.clone()), (1, 1, ints(&[1])));
        assert_eq!(k.q_normal, m(&[vec![1, 1, 0, -1], vec![0, 0, 1, 1]]));
        let noconverse = m(&[vec![1, 2, 1, 0], vec![0, 1, 1, 1]]);
        assert!(matches!(kleinschmidt_normal_form(&noconverse), Err(Error::Singular(_))));
        assert!(matches!(kleinschmidt_normal_form(&m(&[vec![1, 1]])), Err(Error::Rank(_))));
    }

    #[test]
    fn fano_agrees_with_anticanonical_test() {
        for (a, c) in [(1, ints(&[1])), (1, ints(&[2])), (2, ints(&[0, 0])), (2, ints(&[1, 1])), (2, ints(&[1, 2])), (3, ints(&[0, 1, 2]))] {
            let q = normal_matrix(a, &c);
            let form = kleinschmidt_normal_form(&q).unwrap();
            let same = (form.a, form.c.clone()) == (a, c.clone());
            assert!(same || (form.a, form.c.clone()) < (a, c.clone()), "least form is chosen");
            let ch = enumerate_chambers(&q).unwrap().into_iter().find(|x| x.id == form.chamber).unwrap();
            assert_eq!(is_fano_rank2(&form), q_fano(&q, &ch), "a={a} c={c:?}");
        }
        let f1 = kleinschmidt_normal_form(&normal_matrix(1, &ints(&[1]))).unwrap();
        assert!(is_fano_rank2(&f1));
        let f2 = kleinschmidt_normal_form(&normal_matrix(1, &ints(&[2]))).unwrap();
        assert!(!is_fano_rank2(&f2));
    }

    #[test]
    fn taxonomy_cases() {
        // P(O ⊕ O ⊕ O(3)) over P²: one nonzero twist
        let t = flip_taxonomy(&normal_matrix(2, &ints(&[0, 3]))).unwrap();
        assert_eq!(t.case_number, 1);
        assert!(t.targets.is_empty());
        let t = flip_taxonomy(&normal_matrix(2, &ints(&[0, 0]))).unwrap();
        assert_eq!(t.case_number, 2);
        assert!(t.targets.is_empty());
        // P(O ⊕ O(1)²) over P¹
        let t = flip_taxonomy(&normal_matrix(1, &ints(&[1, 1]))).unwrap();
        assert_eq!(t.case, FlipCase::SmoothFlip);
        assert_eq!(t.targets.len(), 1);
        let target = t.targets[0].smooth_form.as_ref().unwrap();
        let (ma, mc) = mirror_form(&t.form);
        assert_eq!((target.a, target.c.clone()), (ma, mc));
        // P(O ⊕ O(1) ⊕ O(2)) over P¹
        let t = flip_taxonomy(&normal_matrix(1, &ints(&[1, 2]))).unwrap();
        assert_eq!(t.case, FlipCase::SingularFlips);
        assert_eq!(t.targets.len(), 1);
        assert!(t.targets.iter().all(|x| x.max_index == int(2) && x.smooth_form.is_none()));
    }

    /// Number of singular flips is s or s − 1 depending on the multiplicity of the top twist.
    #[test]
    fn singular_flip_counts() {
        for c in [ints(&[1, 2]), ints(&[1, 2, 2]), ints(&[1, 3, 5]), ints(&[2, 2]), ints(&[1, 1, 4, 4])] {
            let t = flip_taxonomy(&normal_matrix(2, &c)).unwrap();
            let mut distinct: Vec<&Int> = c.iter().filter(|x| !x.is_zero()).collect();
            distinct.dedup();
            let s = distinct.len();
            let top = c.last().unwrap();
            let i_s = c.iter().filter(|x| *x == top).count();
            let expected = if i_s == 1 { s - 1 } else { s };
            assert_eq!(t.case, FlipCase::SingularFlips);
            assert_eq!(t.targets.len(), expected, "c = {c:?}");
            assert!(t.targets.iter().all(|x| &x.max_index <= top && x.max_index > Int::one()));
        }
    }

    #[test]
    fn stf_detection() {
        let q = m(&[vec![1, 1, 1, 0, 0], vec![0, 0, 1, 1, 1]]);
        assert!(is_stf(&q));
        assert_eq!(flip_taxonomy(&q).unwrap().case, FlipCase::SmoothFlip);
        let q = m(&[vec![1, 1, 1, 0], vec![0, 0, 1, 1]]);
        assert!(bit_form(&q).is_some());
        assert!(!is_stf(&q));
        assert!(bit_form(&f2()).is_none());
        assert!(!is_stf(&f2()));
    }

    /// No unimodular change of basis with small entries turns F₂ into a bit matrix.
    #[test]
    fn f2_has_no_bit_form_exhaustively() {
        let q = f2();
        for a in -4i64..=4 {
            for b in -4i64..=4 {
                for c in -4i64..=4 {
                    for d in -4i64..=4 {
                        if (a * d - b * c).abs() != 1 {
                            continue;
                        }
                        let g = m(&[vec![a, b], vec![c, d]]).mul(&q);
                        assert!(g.entries().iter().any(|x| !x.is_zero() && !x.is_one()));
                    }
                }
            }
        }
    }

    #[test]
    fn rank2_bordering_is_maxbord() {
        for (a, c) in [(1, ints(&[1, 2])), (2, ints(&[1, 1])), (1, ints(&[0, 3])), (2, ints(&[1, 3, 5]))] {
            let q = normal_matrix(a, &c);
            let v = gale_dual(&q).unwrap();
            for ch in enumerate_chambers(&q).unwrap().into_iter().filter(|c| c.in_moving) {
                let b = classify_border(&v, &q, &ch).unwrap();
                for h in &b.per_hyperplane {
                    assert_eq!(h.bordering, h.maxbord);
                }
                if b.kind != BorderKind::Interior {
                    assert!(b.kind >= BorderKind::Maxbord);
                }
            }
        }
    }

    #[test]
    fn nef_relation_is_bottom_row() {
        let q = normal_matrix(2, &ints(&[1, 2]));
        let v = gale_dual(&q).unwrap();
        let form = kleinschmidt_normal_form(&q).unwrap();
        let ch = enumerate_chambers(&q).unwrap().into_iter().find(|x| x.id == form.chamber).unwrap();
        let pcs = crate::collections::collections_with_relations(&ch.fan, &v, &q).unwrap();
        let nef: Vec<_> = pcs.iter().filter(|p| p.is_nef).collect();
        assert!(nef.iter().any(|p| p.relation == form.q_normal.row(1)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn form_is_invariant(a in 1usize..=2, c in proptest::collection::vec(0i64..=3, 1..=3),
                             t in -2i64..=2, swap in any::<bool>(), rot in 0usize..6) {
            let mut c = ints(&c);
            c.sort();
            let q = normal_matrix(a, &c);
            let base = kleinschmidt_normal_form(&q).unwrap();
            let g = if swap { m(&[vec![t, 1], vec![1, 0]]) } else { m(&[vec![1, t], vec![0, 1]]) };
            let mut perm: Vec<usize> = (0..q.cols()).collect();
            perm.rotate_left(rot % q.cols());
            let q2 = g.mul(&q).select_cols(&perm);
            let other = kleinschmidt_normal_form(&q2).unwrap();
            prop_assert_eq!((other.a, other.c.clone()), (base.a, base.c.clone()));
            prop_assert_eq!(other.alpha.mul(&q2.select_cols(&other.perm)), other.q_normal);
        }
    }
}
