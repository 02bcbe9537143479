//! Maximally bordering chambers as toric covers of weighted projective toric bundles.
//!
//! A chamber γ that is maxbord w.r.t. a facet hyperplane H of ⟨Q⟩ is brought to
//! the block shape
//!
//! ```text
//!     Q = ( Q'  Q'' )
//!         ( 0   W   )
//! ```
//!
//! by `transform_bordering`. The upper-left block is the weight matrix of the
//! base, `W` the fibre weights and the columns of `Q''` the classes of the
//! summands. When `Q'` is not a reduced W-matrix a rational row transform `A`
//! and a diagonal column scaling `B` produce a cover whose base block is.

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::cones::{hyperplane_key, Cone};
use crate::collections::PrimitiveCollection;
use crate::exactla::{
    abs_det, gcd_all, hnf_rows, lattice_equal, lcm_all, primitive_of_rat, rat_int, snf,
    solve_integer, IntMatrix, Rat, RatMatrix,
};
use crate::matrices::{
    bottom_row_split, check_f, check_w, gale_dual, is_positive_ref, positive_ref, transform_bordering,
};
use crate::secfan::{enumerate_chambers, Chamber, SimplicialFan};
use crate::{Error, Int, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseCase {
    /// Q′ is a reduced W-matrix.
    A,
    /// Q′ is a W-matrix whose Gale dual has non-primitive columns.
    B,
    /// The row lattice of Q′ has cotorsion.
    C,
    /// Q′ fails one of the remaining W-conditions.
    NotW,
}

/// Cover data: `q_tilde = a · Q · diag(b)` and `Vᵀ · c = diag(b) · ṽᵀ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cover {
    pub a: RatMatrix,
    pub b: IntMatrix,
    pub c: IntMatrix,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub index: Int,
    pub q_tilde: IntMatrix,
    pub v_tilde: IntMatrix,
    /// Case handled at each step of the iteration.
    pub steps: Vec<BaseCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WptwbData {
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub l: Vec<Int>,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub lambda: Int,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub d: Vec<Int>,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub a_vec: Vec<Int>,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub a: Int,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub eta: Vec<Int>,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub w_reduced: Vec<Int>,
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub galois_order: Int,
    /// diag(1, …, 1, η_0, …, η_s).
    #[serde(rename = "Lambda")]
    pub big_lambda: IntMatrix,
    /// Weight matrix of the weighted projective toric bundle covered by X.
    pub q_double_tilde: Option<IntMatrix>,
    #[serde(rename = "Phi")]
    pub phi: Option<IntMatrix>,
    /// Ramification multiplicity along the k-th fibre divisor.
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub ramification: Vec<Int>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BundleDecomposition {
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub hyperplane: Vec<Int>,
    /// `perm[k]` is the original column sitting at position k of `q_norm`.
    pub perm: Vec<usize>,
    pub alpha: IntMatrix,
    pub q_norm: IntMatrix,
    pub qprime: IntMatrix,
    pub qsecond: IntMatrix,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub weights: Vec<Int>,
    pub case: BaseCase,
    pub cover: Option<Cover>,
    pub q_tilde: IntMatrix,
    pub base_weight_matrix: IntMatrix,
    pub base_fan_matrix: IntMatrix,
    pub base_chamber: Cone,
    pub base_fan: SimplicialFan,
    /// Q̃'' after adding multiples of the bottom row until no entry is positive.
    pub qsecond_adjusted: IntMatrix,
    /// Classes d'(E_k) on the base, the negated columns of `qsecond_adjusted`.
    #[serde(serialize_with = "crate::exactla::ser::vec_vec")]
    pub divisor_classes: Vec<Vec<Int>>,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub cartier_indices: Vec<Int>,
    pub wptwb: Option<WptwbData>,
}

/// Splits a normalized weight matrix into (Q′, Q″, W).
pub fn split_weight_matrix(q: &IntMatrix) -> Result<(IntMatrix, IntMatrix, Vec<Int>)> {
    let (r, m) = (q.rows(), q.cols());
    if r < 2 {
        return Err(Error::Rank("a bundle splitting needs r ≥ 2".into()));
    }
    let z = bottom_row_split(q)
        .filter(|&z| z > 0 && z < m)
        .ok_or_else(|| Error::Shape("bottom row is not of the form (0, …, 0, w_0, …, w_s)".into()))?;
    let upper = q.top_rows(r - 1);
    let qprime = upper.select_cols(&(0..z).collect::<Vec<_>>());
    let qsecond = upper.select_cols(&(z..m).collect::<Vec<_>>());
    Ok((qprime, qsecond, q.row(r - 1)[z..].to_vec()))
}

pub fn classify_base_case(qprime: &IntMatrix) -> BaseCase {
    let f = check_w(qprime);
    let others = f.a_full_rank
        && f.c_positive_basis
        && f.d_nonzero_columns
        && f.e_no_unit_vector
        && f.f_no_opposite_pair;
    if !others {
        BaseCase::NotW
    } else if !f.b_cotorsion_free {
        BaseCase::C
    } else if !f.is_reduced {
        BaseCase::B
    } else {
        BaseCase::A
    }
}

fn int_diag(d: &[Int]) -> IntMatrix {
    IntMatrix::diag(d)
}

/// blockdiag(top, last) for a square `top`.
fn rat_block(top: &RatMatrix, last: Rat) -> RatMatrix {
    let k = top.rows();
    let mut out = RatMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] = top[(i, j)].clone();
        }
    }
    out[(k, k)] = last;
    out
}

fn scale_row(k: usize, i: usize, d: &Int) -> RatMatrix {
    let mut e = RatMatrix::identity(k);
    e[(i, i)] = Rat::new(Int::one(), d.clone());
    e
}

fn apply(a: &RatMatrix, q: &IntMatrix, b: &[Int]) -> Result<IntMatrix> {
    a.mul(&q.mul(&int_diag(b)).to_rat())
        .to_int()
        .ok_or_else(|| Error::Internal("covering transform is not integral".into()))
}

fn upper_left(q: &IntMatrix, z: usize) -> IntMatrix {
    q.top_rows(q.rows() - 1).select_cols(&(0..z).collect::<Vec<_>>())
}

/// One cotorsion step: divides one row of α·Q′ by its content d.
fn step_cotorsion(qp: &IntMatrix) -> Result<(RatMatrix, Int)> {
    let k = qp.rows();
    // prefer a row that is already divisible, keeping α = I
    for i in (0..k).rev() {
        let g = gcd_all(qp.row(i).iter());
        if g > Int::one() {
            return Ok((scale_row(k, i, &g), g));
        }
    }
    let (d, mu, _) = snf(qp);
    let i = (0..k)
        .rev()
        .find(|&i| d[(i, i)] > Int::one())
        .ok_or_else(|| Error::Internal("no cotorsion found".into()))?;
    let g = d[(i, i)].clone();
    Ok((scale_row(k, i, &g).mul(&mu.to_rat()), g))
}

/// One non-reduced step: makes column `k` of G(Q′) primitive. Returns (row transform, k, d).
fn step_nonreduced(qp: &IntMatrix) -> Result<(RatMatrix, usize, Int)> {
    let r = qp.rows();
    let vp = gale_dual(qp)?;
    let (k, d) = (0..vp.cols())
        .map(|j| (j, gcd_all(vp.col(j).iter())))
        .find(|(_, g)| *g > Int::one())
        .ok_or_else(|| Error::Internal("all columns already primitive".into()))?;
    let mut vred = vp.clone();
    for i in 0..vred.rows() {
        vred[(i, k)] = &vred[(i, k)] / &d;
    }
    let target = gale_dual(&vred)?;
    let mut dk = vec![Int::one(); qp.cols()];
    dk[k] = d.clone();
    let m = qp.mul(&int_diag(&dk));
    for i in (0..r).rev() {
        let row = m.row(i);
        if row.iter().all(|x| x.is_multiple_of(&d)) {
            let mut rows = m.row_vecs();
            rows[i] = row.iter().map(|x| x / &d).collect();
            if lattice_equal(&IntMatrix::from_int_rows_with_cols(&rows, m.cols()), &target) {
                return Ok((scale_row(r, i, &d), k, d));
            }
        }
    }
    // general case: M = X·R with |det X| = d, and the Smith form of X gives α
    let x = target
        .to_rat()
        .transpose()
        .solve_matrix(&m.to_rat().transpose())
        .and_then(|s| s.transpose().to_int())
        .ok_or_else(|| Error::Internal("reduced lattice does not contain Q′·D".into()))?;
    let (s, mu, _) = snf(&x);
    let i = (0..r)
        .rev()
        .find(|&i| s[(i, i)] > Int::one())
        .ok_or_else(|| Error::Internal("index-one refinement".into()))?;
    Ok((scale_row(r, i, &s[(i, i)]).mul(&mu.to_rat()), k, d))
}

/// Iterates the case (b)/(c) constructions until the base block is a reduced W-matrix.
/// `v` and `q` must be Gale dual with matching column order, `q` normalized.
pub fn covering_reduction(v: &IntMatrix, q: &IntMatrix) -> Result<Cover> {
    let (r, m) = (q.rows(), q.cols());
    let (qp0, _, _) = split_weight_matrix(q)?;
    let z = qp0.cols();
    let mut a = RatMatrix::identity(r);
    let mut b = vec![Int::one(); m];
    let mut qt = q.clone();
    let mut steps = vec![];
    loop {
        let qp = upper_left(&qt, z);
        let case = classify_base_case(&qp);
        let (top, scale_cols, d) = match case {
            BaseCase::A => break,
            BaseCase::NotW => return Err(Error::NotWMatrix("base block fails a W-condition".into())),
            BaseCase::C => {
                let (t, d) = step_cotorsion(&qp)?;
                (t, vec![Int::one(); z], d)
            }
            BaseCase::B => {
                let (t, k, d) = step_nonreduced(&qp)?;
                let mut dk = vec![Int::one(); z];
                dk[k] = d.clone();
                (t, dk, d)
            }
        };
        steps.push(case);
        if steps.len() > 64 {
            return Err(Error::Internal("covering iteration does not terminate".into()));
        }
        let step_a = rat_block(&top, Rat::new(Int::one(), d.clone()));
        let mut step_b = scale_cols;
        step_b.extend(std::iter::repeat_n(d, m - z));
        qt = apply(&step_a, &qt, &step_b)?;
        a = step_a.mul(&a);
        for (x, y) in b.iter_mut().zip(&step_b) {
            *x *= y;
        }
        if !is_positive_ref(&qt) {
            let normalized = positive_ref(&qt)?;
            let beta = qt
                .to_rat()
                .transpose()
                .solve_matrix(&normalized.to_rat().transpose())
                .ok_or_else(|| Error::Internal("renormalization failed".into()))?
                .transpose();
            a = beta.mul(&a);
            qt = normalized;
        }
    }
    if qt.row(r - 1) != q.row(r - 1) {
        return Err(Error::Internal("cover changed the bottom row".into()));
    }
    let bm = int_diag(&b);
    if steps.is_empty() {
        let n = v.rows();
        return Ok(Cover {
            a,
            b: bm,
            c: IntMatrix::identity(n),
            index: Int::one(),
            q_tilde: qt,
            v_tilde: v.clone(),
            steps,
        });
    }
    if !check_f(v)?.is_cf {
        return Err(Error::NotCf);
    }
    let v_tilde = gale_dual(&qt)?;
    let c = cover_matrix(v, &bm, &v_tilde)?;
    let index = abs_det(&c);
    Ok(Cover { a, b: bm, c, index, q_tilde: qt, v_tilde, steps })
}

/// C = ⁿU·B·Ṽᵀ where U·Vᵀ = (I_n; 0); checks Vᵀ·C = B·Ṽᵀ.
pub fn cover_matrix(v: &IntMatrix, b: &IntMatrix, v_tilde: &IntMatrix) -> Result<IntMatrix> {
    let n = v.rows();
    let (h, u) = hnf_rows(&v.transpose());
    if h.top_rows(n) != IntMatrix::identity(n) {
        return Err(Error::NotCf);
    }
    let rhs = b.mul(&v_tilde.transpose());
    let c = u.top_rows(n).mul(&rhs);
    if v.transpose().mul(&c) != rhs {
        return Err(Error::Internal("B·Ṽᵀ leaves the column lattice of Vᵀ".into()));
    }
    Ok(c)
}

/// Least l ≥ 1 making l·D Cartier, D = Σ coeffs_j D_j on the fan of `vbase`.
pub fn cartier_index(vbase: &IntMatrix, fan: &SimplicialFan, coeffs: &[Int]) -> Result<Int> {
    if coeffs.len() != vbase.cols() {
        return Err(Error::Shape("one coefficient per ray is required".into()));
    }
    let mut dens = vec![];
    for cone in &fan.maximal_cones {
        let vi = vbase.select_cols(cone).transpose().to_rat();
        let rhs: Vec<Rat> = cone.iter().map(|&j| rat_int(&coeffs[j])).collect();
        let m = vi.solve(&rhs).ok_or_else(|| Error::Singular("degenerate maximal cone".into()))?;
        dens.extend(m.iter().map(|x| x.denom().clone()));
    }
    Ok(lcm_all(dens.iter()))
}

/// Numerics of the weighted projective toric bundle covered by a twisted one.
/// `base_cols` is the number of columns of the base block, fixing the size of Λ.
pub fn wptwb_tower(w: &[Int], l: &[Int], base_cols: usize) -> WptwbData {
    let lw: Vec<Int> = w.iter().zip(l).map(|(x, y)| x * y).collect();
    let lambda = gcd_all(lw.iter());
    let scaled: Vec<Int> = lw.iter().map(|x| x / &lambda).collect();
    let d: Vec<Int> = (0..scaled.len())
        .map(|k| {
            let g = gcd_all(scaled.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x));
            if g.is_zero() {
                Int::one()
            } else {
                g
            }
        })
        .collect();
    let a: Int = d.iter().product();
    let a_vec: Vec<Int> = d.iter().map(|dk| &a / dk).collect();
    let eta: Vec<Int> = l.iter().zip(&d).map(|(x, y)| x * y).collect();
    let w_reduced: Vec<Int> = scaled.iter().zip(&a_vec).map(|(x, y)| x / y).collect();
    let galois_order = l.iter().product::<Int>() / &lambda;
    let mut diag = vec![Int::one(); base_cols];
    diag.extend(eta.iter().cloned());
    WptwbData {
        l: l.to_vec(),
        lambda,
        d,
        a_vec,
        a,
        ramification: eta.clone(),
        eta,
        w_reduced,
        galois_order,
        big_lambda: int_diag(&diag),
        q_double_tilde: None,
        phi: None,
    }
}

/// Fills in Q̃̃ = Δ·Q̃·Λ and Φ = ⁿŨ·Λ·Ṽ̃ᵀ for a normalized Q̃ with CF Gale dual Ṽ.
pub fn attach_cover_of_wptb(data: &mut WptwbData, q_tilde: &IntMatrix, v_tilde: &IntMatrix) -> Result<()> {
    let r = q_tilde.rows();
    let delta = rat_block(&RatMatrix::identity(r - 1), Rat::new(Int::one(), &data.lambda * &data.a));
    let qtt = delta
        .mul(&q_tilde.mul(&data.big_lambda).to_rat())
        .to_int()
        .ok_or_else(|| Error::Internal("Δ·Q̃·Λ is not integral".into()))?;
    let vtt = gale_dual(&qtt)?;
    let n = v_tilde.rows();
    let (h, u) = hnf_rows(&v_tilde.transpose());
    if h.top_rows(n) != IntMatrix::identity(n) {
        return Err(Error::NotCf);
    }
    data.phi = Some(u.top_rows(n).mul(&data.big_lambda).mul(&vtt.transpose()));
    data.q_double_tilde = Some(qtt);
    Ok(())
}

/// Primitive generators of the fan of P(W): Σ w_k e_k = 0 and the maximal minors are the weights.
///
/// When some weight is 1 the last such index carries the dependent vector and the
/// remaining indices receive the standard basis in order of decreasing weight;
/// otherwise the columns of the Gale dual of W are used.
pub fn wps_fan_generators(w: &[Int]) -> Result<Vec<Vec<Int>>> {
    let s = w.len().checked_sub(1).ok_or_else(|| Error::Shape("empty weight vector".into()))?;
    if w.iter().any(|x| !x.is_positive()) {
        return Err(Error::Shape("weights must be positive".into()));
    }
    if s == 0 {
        return Ok(vec![vec![]]);
    }
    let Some(dep) = w.iter().rposition(|x| x.is_one()) else {
        let g = gale_dual(&IntMatrix::from_int_rows(&[w.to_vec()]))?;
        return Ok(g.col_vecs());
    };
    let mut others: Vec<usize> = (0..=s).filter(|&k| k != dep).collect();
    others.sort_by(|&i, &j| w[j].cmp(&w[i]));
    let mut e = vec![vec![Int::zero(); s]; s + 1];
    for (pos, &k) in others.iter().enumerate() {
        e[k][pos] = Int::one();
    }
    for &k in &others {
        let row = e[k].clone();
        for (t, x) in row.iter().enumerate().take(s) {
            e[dep][t] -= &w[k] * x;
        }
    }
    Ok(e)
}

/// Fan matrix of the W-weighted projective toric bundle over the base with the given classes:
///
/// ```text
///     V = ( V'   0           )
///         ( V''  e_0 … e_s   )   with V''_{·j} = Σ_k a_kj e_k.
/// ```
pub fn build_fibred_fan(vbase: &IntMatrix, classes: &IntMatrix, w: &[Int]) -> Result<IntMatrix> {
    let s1 = w.len();
    if classes.rows() != s1 || classes.cols() != vbase.cols() {
        return Err(Error::Shape("classes must be (s+1) × (columns of the base fan matrix)".into()));
    }
    let e = wps_fan_generators(w)?;
    let s = s1 - 1;
    let emat = IntMatrix::from_cols(&e, s);
    let vsecond = emat.mul(classes);
    let top = vbase.hstack(&IntMatrix::zeros(vbase.rows(), s1));
    let bottom = vsecond.hstack(&emat);
    Ok(top.vstack(&bottom))
}

fn maps_cone(a: &RatMatrix, gamma: &Cone) -> Result<Cone> {
    let rays: Vec<Vec<Int>> = gamma
        .rays()
        .iter()
        .map(|x| primitive_of_rat(&a.mul(&IntMatrix::from_cols(std::slice::from_ref(x), x.len()).to_rat()).col(0)))
        .collect();
    Cone::from_generators(&rays, gamma.ambient())
}

/// Adds multiples of W to each row of Q″ until all entries are ≤ 0, with the fewest additions.
fn adjust_second_block(qsecond: &IntMatrix, w: &[Int]) -> IntMatrix {
    let mut rows = qsecond.row_vecs();
    for row in rows.iter_mut() {
        let t = row
            .iter()
            .zip(w)
            .map(|(x, wk)| (-x).div_floor(wk))
            .min()
            .unwrap_or_else(Int::zero);
        for (x, wk) in row.iter_mut().zip(w) {
            *x += &t * wk;
        }
    }
    IntMatrix::from_int_rows_with_cols(&rows, qsecond.cols())
}

/// Decomposes γ, maxbord w.r.t. the facet hyperplane `normal` of ⟨Q⟩.
pub fn decompose(v: &IntMatrix, q: &IntMatrix, gamma: &Cone, normal: &[Int]) -> Result<BundleDecomposition> {
    let r = q.rows();
    if r < 2 {
        return Err(Error::Rank("a weighted projective space has no bundle structure".into()));
    }
    if gamma.slice(normal).dim() + 1 != r {
        return Err(Error::NotMaxbord);
    }
    let bord = transform_bordering(q, normal)?;
    let v_perm = v.select_cols(&bord.perm);
    let gamma_n = maps_cone(&bord.alpha.to_rat(), gamma)?;
    let (qprime, qsecond, weights) = split_weight_matrix(&bord.q_new)?;
    let case = classify_base_case(&qprime);
    if case == BaseCase::NotW {
        return Err(Error::NotWMatrix(format!("base block fails {:?}", check_w(&qprime).failures())));
    }
    let cover = covering_reduction(&v_perm, &bord.q_new)?;
    let z = qprime.cols();
    let q_tilde = cover.q_tilde.clone();
    let base_q = upper_left(&q_tilde, z);
    let (_, qsecond_t, _) = split_weight_matrix(&q_tilde)?;

    let gamma_t = maps_cone(&cover.a, &gamma_n)?;
    let mut last = vec![Int::zero(); r];
    last[r - 1] = Int::one();
    let face = gamma_t.slice(&last);
    let base_rays: Vec<Vec<Int>> = face.rays().iter().map(|x| x[..r - 1].to_vec()).collect();
    let base_cone = Cone::from_generators(&base_rays, r - 1)?;
    let base = enumerate_chambers(&base_q)?
        .into_iter()
        .find(|c| c.cone.rays() == base_cone.rays())
        .ok_or_else(|| Error::Internal("γ ∩ H is not a chamber of the base".into()))?;
    let base_v = gale_dual(&base_q)?;

    let qsecond_adjusted = adjust_second_block(&qsecond_t, &weights);
    let divisor_classes: Vec<Vec<Int>> =
        qsecond_adjusted.col_vecs().iter().map(|c| c.iter().map(|x| -x).collect()).collect();
    let mut cartier_indices = vec![];
    for class in &divisor_classes {
        let coeffs = solve_integer(&base_q, class)
            .ok_or_else(|| Error::Internal("class has no integral divisor preimage".into()))?;
        cartier_indices.push(cartier_index(&base_v, &base.fan, &coeffs)?);
    }
    let wptwb = if cartier_indices.iter().any(|l| !l.is_one()) {
        let mut data = wptwb_tower(&weights, &cartier_indices, z);
        attach_cover_of_wptb(&mut data, &q_tilde, &gale_dual(&q_tilde)?)?;
        Some(data)
    } else {
        None
    };
    Ok(BundleDecomposition {
        hyperplane: normal.to_vec(),
        perm: bord.perm,
        alpha: bord.alpha,
        q_norm: bord.q_new,
        qprime,
        qsecond,
        weights,
        case,
        cover: (case != BaseCase::A).then_some(cover),
        q_tilde,
        base_weight_matrix: base_q,
        base_fan_matrix: base_v,
        base_chamber: base.cone,
        base_fan: base.fan,
        qsecond_adjusted,
        divisor_classes,
        cartier_indices,
        wptwb,
    })
}

fn descend(
    v: &IntMatrix,
    q: &IntMatrix,
    gamma: &Cone,
    acc: &mut Vec<BundleDecomposition>,
    deepest: &mut usize,
) -> Result<bool> {
    if q.rows() == 1 {
        return Ok(true);
    }
    let q_cone = Cone::from_generator_matrix_cols(q)?;
    for h in q_cone.facet_normals() {
        if gamma.slice(h).dim() + 1 != q.rows() {
            continue;
        }
        let d = match decompose(v, q, gamma, h) {
            Ok(d) => d,
            Err(Error::NotCf) => return Err(Error::NotCf),
            Err(_) => continue,
        };
        let (bv, bq, bc) = (d.base_fan_matrix.clone(), d.base_weight_matrix.clone(), d.base_chamber.clone());
        acc.push(d);
        *deepest = (*deepest).max(acc.len());
        if descend(&bv, &bq, &bc, acc, deepest)? {
            return Ok(true);
        }
        acc.pop();
    }
    Ok(false)
}

/// Tower of bundle decompositions ending at a weighted projective space.
/// Each stage descends on the covering weight matrix Q̃ of the previous one.
pub fn recursive_decomposition(v: &IntMatrix, q: &IntMatrix, ch: &Chamber) -> Result<Vec<BundleDecomposition>> {
    let mut acc = vec![];
    let mut deepest = 0;
    if descend(v, q, &ch.cone, &mut acc, &mut deepest)? {
        Ok(acc)
    } else {
        Err(Error::DescentStalled(deepest))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Contractibility {
    Contractible,
    PseudoContractible,
    Neither,
}

/// Verdict for the extremal class of a nef primitive collection on the fan of `ch`.
pub fn contractibility(v: &IntMatrix, q: &IntMatrix, ch: &Chamber, pc: &PrimitiveCollection) -> Result<Contractibility> {
    if !pc.is_nef {
        return Err(Error::NotNef);
    }
    let key = hyperplane_key(&pc.numerical_class);
    let q_cone = Cone::from_generator_matrix_cols(q)?;
    let Some(h) = q_cone.facet_normals().iter().find(|h| hyperplane_key(h) == key) else {
        return Ok(Contractibility::Neither);
    };
    if ch.cone.slice(h).dim() + 1 != q.rows() {
        return Ok(Contractibility::Neither);
    }
    let d = decompose(v, q, &ch.cone, h)?;
    if d.case == BaseCase::A && d.cartier_indices.iter().all(|l| l.is_one()) {
        Ok(Contractibility::Contractible)
    } else {
        Ok(Contractibility::PseudoContractible)
    }
}

/// True when exactly one column of the bunch cone lies off H, so that
/// ⟨Q_J⟩ = ⟨q⟩ + (⟨Q_J⟩ ∩ H).
pub fn splits_over_hyperplane(q: &IntMatrix, bunch_cone: &[usize], normal: &[Int]) -> bool {
    let off: Vec<Vec<Int>> = bunch_cone
        .iter()
        .map(|&j| q.col(j))
        .filter(|c| !crate::exactla::dot(c, normal).is_zero())
        .collect();
    off.len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collections::{classify_border, collections_with_relations, recursive_flag, BorderKind};
    use crate::exactla::{int, ints, primitive, rat};
    use crate::matrices::weight_matrix;
    use crate::secfan::enumerate_chambers;
    use proptest::prelude::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows)
    }

    fn chamber_with(q: &IntMatrix, rays: &[Vec<i64>]) -> Chamber {
        let want: Vec<Vec<Int>> = rays.iter().map(|r| primitive(&ints(r))).collect();
        enumerate_chambers(q)
            .unwrap()
            .into_iter()
            .find(|c| want.iter().all(|r| c.cone.rays().contains(r)) && c.cone.rays().len() == want.len())
            .expect("chamber present")
    }

    fn one_based(cones: &[Vec<usize>]) -> Vec<String> {
        let mut out: Vec<String> =
            cones.iter().map(|c| c.iter().map(|i| (i + 1).to_string()).collect::<String>()).collect();
        out.sort();
        out
    }

    fn sorted_words(s: &str) -> Vec<String> {
        let mut w: Vec<String> = s.split_whitespace().map(String::from).collect();
        w.sort();
        w
    }

    fn ptb() -> (IntMatrix, IntMatrix) {
        let v = m(&[vec![1, 0, 0, 0, -1, 1], vec![0, 1, 0, 0, -1, 1], vec![0, 0, 1, -1, -1, 1]]);
        let q = m(&[vec![1, 1, 1, 0, 1, 0], vec![0, 0, 1, 1, 0, 0], vec![0, 0, 0, 0, 1, 1]]);
        (v, q)
    }

    fn wptb_b() -> (IntMatrix, IntMatrix) {
        let v = m(&[
            vec![1, 0, 0, -1, 0, 2, -4],
            vec![0, 1, 0, -1, 0, 2, -4],
            vec![0, 0, 1, -1, 0, 1, -2],
            vec![0, 0, 0, 0, 1, -1, 1],
        ]);
        let q = m(&[vec![1, 1, 1, 1, 0, 0, 0], vec![0, 0, 1, 2, 1, 1, 0], vec![0, 0, 0, 0, 1, 2, 1]]);
        (v, q)
    }

    fn wptb_c() -> (IntMatrix, IntMatrix) {
        let v = m(&[
            vec![1, 0, -1, 0, 0, 6, -12],
            vec![0, 1, -1, 0, 0, 4, -8],
            vec![0, 0, 0, 1, 0, -2, 4],
            vec![0, 0, 0, 0, 1, -1, 1],
        ]);
        let q = m(&[vec![1, 1, 1, 0, 0, 0, 0], vec![0, 2, 6, 2, 1, 1, 0], vec![0, 0, 0, 0, 1, 2, 1]]);
        (v, q)
    }

    #[test]
    fn split_examples() {
        let (_, q) = wptb_b();
        let (qp, qs, w) = split_weight_matrix(&q).unwrap();
        assert_eq!(qp, m(&[vec![1, 1, 1, 1], vec![0, 0, 1, 2]]));
        assert_eq!(qs, m(&[vec![0, 0, 0], vec![1, 1, 0]]));
        assert_eq!(w, ints(&[1, 2, 1]));
        let (_, q) = ptb();
        let (qp, _, w) = split_weight_matrix(&q).unwrap();
        assert_eq!(qp, m(&[vec![1, 1, 1, 0], vec![0, 0, 1, 1]]));
        assert_eq!(w, ints(&[1, 1]));
        let q = m(&[vec![1, 1, 0, 0, 1], vec![0, 1, 1, 1, 0], vec![0, 0, 0, 1, 1]]);
        assert_eq!(split_weight_matrix(&q).unwrap().0, m(&[vec![1, 1, 0], vec![0, 1, 1]]));
        assert!(split_weight_matrix(&m(&[vec![1, 1, 0], vec![1, 0, 1]])).is_err());
    }

    #[test]
    fn base_cases() {
        assert_eq!(classify_base_case(&m(&[vec![1, 1, 1, 0], vec![0, 0, 1, 1]])), BaseCase::A);
        assert_eq!(classify_base_case(&m(&[vec![1, 1, 1, 1], vec![0, 0, 1, 2]])), BaseCase::B);
        assert_eq!(classify_base_case(&m(&[vec![1, 1, 1, 0], vec![0, 2, 6, 2]])), BaseCase::C);
        assert_eq!(classify_base_case(&m(&[vec![1, 1, 0], vec![0, 1, 1]])), BaseCase::NotW);
    }

    #[test]
    fn wptb_b_cover() {
        let (v, q) = wptb_b();
        let ch = chamber_with(&q, &[vec![1, 0, 0], vec![1, 1, 0], vec![1, 1, 1]]);
        assert_eq!(ch.fan.maximal_cones.len(), 12);
        let d = decompose(&v, &q, &ch.cone, &ints(&[0, 0, 1])).unwrap();
        assert_eq!(d.case, BaseCase::B);
        assert_eq!(d.weights, ints(&[1, 2, 1]));
        let cover = d.cover.as_ref().unwrap();
        assert_eq!(cover.a, RatMatrix::diag(&[rat(1, 1), rat(1, 2), rat(1, 2)]));
        assert_eq!(cover.b.diagonal(), ints(&[1, 1, 2, 1, 2, 2, 2]));
        assert_eq!(cover.index, int(4));
        assert_eq!(cover.q_tilde, m(&[vec![1, 1, 2, 1, 0, 0, 0], vec![0, 0, 1, 1, 1, 1, 0], vec![0, 0, 0, 0, 1, 2, 1]]));
        assert_eq!(d.base_weight_matrix, m(&[vec![1, 1, 2, 1], vec![0, 0, 1, 1]]));
        assert_eq!(classify_base_case(&d.base_weight_matrix), BaseCase::A);
        // the printed Ṽ spans the same kernel, and with it C is the printed diagonal up to the section
        let printed = m(&[
            vec![1, 0, 0, -1, 0, 1, -2],
            vec![0, 1, 0, -1, 0, 1, -2],
            vec![0, 0, 1, -2, 0, 1, -2],
            vec![0, 0, 0, 0, 1, -1, 1],
        ]);
        assert!(lattice_equal(&printed, &cover.v_tilde));
        let c = cover_matrix(&v, &cover.b, &printed).unwrap();
        assert_eq!(abs_det(&c), int(4));
    }

    #[test]
    fn wptb_c_gamma10_cover_and_tower() {
        let (v, q) = wptb_c();
        let ch = chamber_with(&q, &[vec![1, 2, 0], vec![1, 6, 0], vec![1, 6, 4]]);
        let want = "2357 2356 2367 2457 2456 2467 1357 1356 1367 1457 1456 1467";
        assert_eq!(one_based(&ch.fan.maximal_cones), sorted_words(want));
        let d = decompose(&v, &q, &ch.cone, &ints(&[0, 0, 1])).unwrap();
        assert_eq!(d.case, BaseCase::C);
        let cover = d.cover.as_ref().unwrap();
        assert_eq!(cover.a, RatMatrix::diag(&[rat(1, 1), rat(1, 2), rat(1, 2)]));
        assert_eq!(cover.b.diagonal(), ints(&[1, 1, 1, 1, 2, 2, 2]));
        assert_eq!(cover.index, int(2));
        assert_eq!(cover.q_tilde, m(&[vec![1, 1, 1, 0, 0, 0, 0], vec![0, 1, 3, 1, 1, 1, 0], vec![0, 0, 0, 0, 1, 2, 1]]));
        assert_eq!(d.qsecond_adjusted, m(&[vec![0, 0, 0], vec![0, -1, -1]]));
        assert_eq!(d.cartier_indices, ints(&[1, 6, 6]));
        let t = d.wptwb.as_ref().unwrap();
        assert_eq!(t.lambda, int(1));
        assert_eq!(t.eta, ints(&[6, 6, 6]));
        assert_eq!(t.w_reduced, ints(&[1, 2, 1]));
        assert_eq!(t.galois_order, int(36));
        assert_eq!(t.big_lambda.diagonal(), ints(&[1, 1, 1, 1, 6, 6, 6]));
        assert_eq!(
            t.q_double_tilde.as_ref().unwrap(),
            &m(&[vec![1, 1, 1, 0, 0, 0, 0], vec![0, 1, 3, 1, 6, 6, 0], vec![0, 0, 0, 0, 1, 2, 1]])
        );
        assert_eq!(abs_det(t.phi.as_ref().unwrap()), int(36));
        assert!(matches!(recursive_decomposition(&v, &q, &ch), Err(Error::DescentStalled(1))));
    }

    #[test]
    fn wptb_c_gamma5_is_contractible() {
        let (v, q) = wptb_c();
        let ch = chamber_with(&q, &[vec![0, 1, 1], vec![0, 1, 2], vec![1, 12, 12]]);
        let want = "2357 2347 2356 2346 1357 1347 1356 1346 1257 1247 1256 1246";
        assert_eq!(one_based(&ch.fan.maximal_cones), sorted_words(want));
        let d = decompose(&v, &q, &ch.cone, &ints(&[1, 0, 0])).unwrap();
        assert_eq!(d.case, BaseCase::A);
        assert_eq!(d.weights, ints(&[1, 1, 1]));
        assert!(d.cartier_indices.iter().all(|l| l.is_one()));
        assert!(d.wptwb.is_none());
        assert!(d.cover.is_none());
        assert_eq!(d.q_norm.row(2), ints(&[0, 0, 0, 0, 1, 1, 1]));
    }

    #[test]
    fn cartier_trivial_cases() {
        let (_, q) = ptb();
        let v = gale_dual(&q).unwrap();
        let ch = enumerate_chambers(&q).unwrap().into_iter().find(|c| c.in_moving).unwrap();
        assert_eq!(cartier_index(&v, &ch.fan, &vec![Int::zero(); 6]).unwrap(), int(1));
        assert_eq!(cartier_index(&v, &ch.fan, &ints(&[3, -1, 2, 0, 5, 1])).unwrap(), int(1));
    }

    #[test]
    fn tower_numerics() {
        let t = wptwb_tower(&ints(&[1, 2, 1]), &ints(&[1, 6, 6]), 4);
        assert_eq!(t.big_lambda.diagonal(), ints(&[1, 1, 1, 1, 6, 6, 6]));
        assert_eq!(t.galois_order, int(36));
        let t = wptwb_tower(&ints(&[1, 1]), &ints(&[2, 3]), 2);
        assert_eq!((t.lambda.clone(), t.d.clone(), t.a.clone()), (int(1), ints(&[3, 2]), int(6)));
        assert_eq!(t.eta, ints(&[6, 6]));
        assert_eq!(t.galois_order, int(6));
        let t = wptwb_tower(&ints(&[1, 1, 1]), &ints(&[1, 1, 1]), 3);
        assert_eq!(t.big_lambda, IntMatrix::identity(6));
        assert_eq!(t.galois_order, int(1));
    }

    #[test]
    fn wps_generators() {
        let e = wps_fan_generators(&ints(&[1, 1, 1])).unwrap();
        assert_eq!(e, vec![ints(&[1, 0]), ints(&[0, 1]), ints(&[-1, -1])]);
        let w = ints(&[1, 2, 1]);
        let e = wps_fan_generators(&w).unwrap();
        assert_eq!(e, vec![ints(&[0, 1]), ints(&[1, 0]), ints(&[-2, -1])]);
        assert_eq!(wps_fan_generators(&ints(&[1])).unwrap(), vec![Vec::<Int>::new()]);
        for w in [ints(&[6, 10, 15]), ints(&[2, 3, 1, 5]), ints(&[1, 2, 1])] {
            check_wps(&w);
        }
    }

    fn check_wps(w: &[Int]) {
        let e = wps_fan_generators(w).unwrap();
        let s = w.len() - 1;
        for t in 0..s {
            assert!(e.iter().zip(w).map(|(v, wk)| &v[t] * wk).sum::<Int>().is_zero());
        }
        for i in 0..=s {
            let rest: Vec<Vec<Int>> = e.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v.clone()).collect();
            assert_eq!(abs_det(&IntMatrix::from_cols(&rest, s)), w[i]);
        }
    }

    #[test]
    fn fibred_fans() {
        let p1 = m(&[vec![1, -1]]);
        let v = build_fibred_fan(&p1, &IntMatrix::zeros(2, 2), &ints(&[1, 1])).unwrap();
        assert!(lattice_equal(&gale_dual(&v).unwrap(), &m(&[vec![1, 1, 0, 0], vec![0, 0, 1, 1]])));
        let v = build_fibred_fan(&IntMatrix::zeros(0, 0), &IntMatrix::zeros(3, 0), &ints(&[1, 2, 1])).unwrap();
        assert_eq!(v, IntMatrix::from_cols(&wps_fan_generators(&ints(&[1, 2, 1])).unwrap(), 2));
        // PTB over its base with the class of the divisor sitting in column 1
        let (_, q) = ptb();
        let base_q = m(&[vec![1, 1, 1, 0], vec![0, 0, 1, 1]]);
        let base_v = gale_dual(&base_q).unwrap();
        let pre = solve_integer(&base_q, &ints(&[1, 0])).unwrap();
        let classes = IntMatrix::from_int_rows(&[vec![Int::zero(); 4], pre]);
        let v = build_fibred_fan(&base_v, &classes, &ints(&[1, 1])).unwrap();
        assert!(lattice_equal(&gale_dual(&v).unwrap(), &q));
    }

    #[test]
    fn ptb_contractibility_and_tower() {
        let (v, q) = ptb();
        let chambers: Vec<Chamber> = enumerate_chambers(&q).unwrap().into_iter().filter(|c| c.in_moving).collect();
        let s1 = chambers.iter().find(|c| c.cone.rays().contains(&ints(&[1, 0, 0]))).unwrap();
        let s2 = chambers.iter().find(|c| c.cone.rays().contains(&ints(&[1, 1, 1]))).unwrap();
        let verdict = |ch: &Chamber| {
            let pcs = collections_with_relations(&ch.fan, &v, &q).unwrap();
            let k = pcs.iter().find(|p| p.p == vec![4, 5]).unwrap();
            if k.is_nef {
                contractibility(&v, &q, ch, k).unwrap()
            } else {
                Contractibility::Neither
            }
        };
        assert_eq!(verdict(s1), Contractibility::Contractible);
        assert_eq!(verdict(s2), Contractibility::Neither);
        let tower = recursive_decomposition(&v, &q, s1).unwrap();
        assert_eq!(tower.len(), 2);
        assert!(tower.iter().all(|d| d.case == BaseCase::A && d.weights.iter().all(|w| w.is_one())));
        assert_eq!(tower[1].base_weight_matrix.rows(), 1);
    }

    #[test]
    fn nowptb_is_neither() {
        let v = m(&[vec![1, 0, -1, 1, -1], vec![0, 1, -2, 1, -1]]);
        let q = weight_matrix(&v).unwrap();
        let ch = enumerate_chambers(&q).unwrap().into_iter().find(|c| c.in_moving).unwrap();
        let pcs = collections_with_relations(&ch.fan, &v, &q).unwrap();
        let k = pcs.iter().find(|p| p.p == vec![3, 4]).unwrap();
        assert_eq!(contractibility(&v, &q, &ch, k).unwrap(), Contractibility::Neither);
        let other = pcs.iter().find(|p| !p.is_nef);
        if let Some(p) = other {
            assert_eq!(contractibility(&v, &q, &ch, p), Err(Error::NotNef));
        }
    }

    fn nototmaxbord() -> (IntMatrix, IntMatrix) {
        let v = m(&[
            vec![1, 0, 0, 0, 0, -1, 1],
            vec![0, 1, 0, 0, 0, -1, 1],
            vec![0, 0, 1, 0, -1, 0, 1],
            vec![0, 0, 0, 1, -1, 1, 0],
        ]);
        let q = m(&[vec![1, 1, 1, 0, 1, 1, 0], vec![0, 0, 1, 1, 1, 0, 0], vec![0, 0, 0, 0, 1, 1, 1]]);
        (v, q)
    }

    #[test]
    fn nototmaxbord_towers() {
        let (v, q) = nototmaxbord();
        let g2 = chamber_with(&q, &[vec![1, 0, 0], vec![1, 1, 0], vec![2, 1, 1]]);
        let tower = recursive_decomposition(&v, &q, &g2).unwrap();
        assert_eq!(tower.len(), 2);
        assert_eq!(tower[1].base_weight_matrix.rows(), 1);
        assert!(tower.iter().all(|d| d.case == BaseCase::A));
    }

    /// The algebraic descent succeeds exactly on the chambers admitting a geometric flag.
    #[test]
    fn descent_agrees_with_flag() {
        for (v, q) in [ptb(), nototmaxbord(), wptb_b(), wptb_c()] {
            let q_cone = Cone::from_generator_matrix_cols(&q).unwrap();
            for ch in enumerate_chambers(&q).unwrap().into_iter().filter(|c| c.in_moving) {
                let flag = recursive_flag(&q_cone, &ch.cone).is_some();
                let tower = recursive_decomposition(&v, &q, &ch);
                assert_eq!(tower.is_ok(), flag, "chamber {:?}", ch.cone.rays());
                let kind = classify_border(&v, &q, &ch).unwrap().kind;
                assert_eq!(flag, kind >= BorderKind::RecursivelyMaxbord);
            }
        }
    }

    #[test]
    fn maxbord_bunch_cones_split() {
        let (_, q) = nototmaxbord();
        let h = ints(&[0, 0, 1]);
        for ch in enumerate_chambers(&q).unwrap() {
            if ch.cone.slice(&h).dim() == 2 {
                assert!(ch.bunch.iter().all(|j| splits_over_hyperplane(&q, j, &h)));
            }
        }
    }

    #[test]
    fn smooth_maxbord_are_projective_bundles() {
        for (v, q) in [ptb(), nototmaxbord()] {
            let q_cone = Cone::from_generator_matrix_cols(&q).unwrap();
            for ch in enumerate_chambers(&q).unwrap().into_iter().filter(|c| c.in_moving) {
                for h in q_cone.facet_normals() {
                    if ch.cone.slice(h).dim() == 2 {
                        let d = decompose(&v, &q, &ch.cone, h).unwrap();
                        assert_eq!(d.case, BaseCase::A);
                        assert!(d.weights.iter().all(|w| w.is_one()));
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn galois_order_is_phi_index(l0 in 1i64..=6, l1 in 1i64..=6, w1 in 1i64..=3, c in 0i64..=3) {
            // P¹-bundle-like block matrix over P¹ with fibre weights (1, w1)
            let q = m(&[vec![1, 1, c, 0], vec![0, 0, 1, w1]]);
            let v = gale_dual(&q).unwrap();
            let mut t = wptwb_tower(&ints(&[1, w1]), &ints(&[l0, l1]), 2);
            attach_cover_of_wptb(&mut t, &q, &v).unwrap();
            let phi = t.phi.unwrap();
            let index: Int = crate::exactla::invariant_factors(&phi).iter().product();
            prop_assert_eq!(index, t.galois_order.clone());
            prop_assert_eq!(&t.galois_order * &t.lambda, int(l0 * l1));
        }

        #[test]
        fn wps_generators_have_weight_minors(w in proptest::collection::vec(1i64..=7, 2..=4)) {
            let g = gcd_all(ints(&w).iter());
            let w: Vec<Int> = ints(&w).iter().map(|x| x / &g).collect();
            check_wps(&w);
        }

        #[test]
        fn fibred_fan_round_trip(c0 in -3i64..=3, c1 in -3i64..=3, w1 in 1i64..=3) {
            let base_q = m(&[vec![1, 1, 1, 0], vec![0, 0, 1, 1]]);
            let base_v = gale_dual(&base_q).unwrap();
            let classes = IntMatrix::from_int_rows(&[ints(&[0, 0, 0, 0]), ints(&[c0, 0, 0, c1])]);
            let w = ints(&[1, w1]);
            let v = build_fibred_fan(&base_v, &classes, &w).unwrap();
            let cls: Vec<Vec<Int>> = classes.row_vecs().iter().map(|a| base_q.mul_vec(a)).collect();
            let mut rows = base_q.row_vecs();
            for (i, row) in rows.iter_mut().enumerate() {
                row.extend(cls.iter().map(|c| -&c[i]));
            }
            let mut last = vec![Int::zero(); 4];
            last.extend(w.iter().cloned());
            rows.push(last);
            let expected = IntMatrix::from_int_rows(&rows);
            prop_assert!(lattice_equal(&gale_dual(&v).unwrap(), &expected));
        }
    }
}
