//! Fan matrices `V`, weight matrices `Q` and the passage between them.

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::cones::{is_pointed, Cone};
use crate::exactla::{
    dot, gcd_all, hermite_basis, hnf_rows, integer_kernel_rows, invariant_factors, pivot_columns,
    primitive, rat_int, IntMatrix, Rat, RatMatrix,
};
use crate::{Error, Int, Result};

/// Per-condition report for a candidate fan matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FanFlags {
    pub full_rank: bool,
    pub complete: bool,
    pub nonzero_columns: bool,
    pub no_proportional_columns: bool,
    pub is_f: bool,
    pub is_cf: bool,
    pub is_reduced: bool,
}

/// Per-condition report for a candidate weight matrix, conditions (a)–(f).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightFlags {
    pub a_full_rank: bool,
    pub b_cotorsion_free: bool,
    pub c_positive_basis: bool,
    pub d_nonzero_columns: bool,
    pub e_no_unit_vector: bool,
    pub f_no_opposite_pair: bool,
    /// A lattice vector violating (e), if any.
    #[serde(serialize_with = "crate::exactla::ser::opt_vec")]
    pub e_witness: Option<Vec<Int>>,
    /// A lattice vector violating (f), if any.
    #[serde(serialize_with = "crate::exactla::ser::opt_vec")]
    pub f_witness: Option<Vec<Int>>,
    pub is_w: bool,
    pub is_reduced: bool,
    pub is_positive_ref: bool,
}

impl WeightFlags {
    /// Names of the failing conditions, e.g. `["f"]`.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = vec![];
        for (ok, name) in [
            (self.a_full_rank, "a"),
            (self.b_cotorsion_free, "b"),
            (self.c_positive_basis, "c"),
            (self.d_nonzero_columns, "d"),
            (self.e_no_unit_vector, "e"),
            (self.f_no_opposite_pair, "f"),
        ] {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

fn columns_reduced(m: &IntMatrix) -> bool {
    m.col_vecs().iter().all(|c| gcd_all(c).is_one())
}

pub fn check_f(v: &IntMatrix) -> Result<FanFlags> {
    let (n, m) = (v.rows(), v.cols());
    if m <= n {
        return Err(Error::Shape(format!("fan matrix needs more columns than rows, got {n}x{m}")));
    }
    let full_rank = v.rank() == n;
    let cols = v.col_vecs();
    let nonzero_columns = cols.iter().all(|c| c.iter().any(|x| !x.is_zero()));
    let prims: Vec<Vec<Int>> = cols.iter().map(|c| primitive(c)).collect();
    let no_proportional_columns = (0..m).all(|i| (i + 1..m).all(|j| prims[i] != prims[j]));
    let complete = full_rank && nonzero_columns && {
        let q = integer_kernel_rows(v);
        let qcols = q.col_vecs();
        qcols.iter().all(|c| c.iter().any(|x| !x.is_zero())) && is_pointed(&qcols, q.rows())
    };
    let is_cf = full_rank && invariant_factors(v).iter().all(|x| x.is_one());
    Ok(FanFlags {
        full_rank,
        complete,
        nonzero_columns,
        no_proportional_columns,
        is_f: full_rank && complete && nonzero_columns && no_proportional_columns,
        is_cf,
        is_reduced: columns_reduced(v),
    })
}

fn is_echelon(q: &IntMatrix) -> bool {
    let p = pivot_columns(q);
    p.len() == q.rows() && p.windows(2).all(|w| w[0] < w[1])
}

pub fn is_positive_ref(q: &IntMatrix) -> bool {
    q.entries().iter().all(|x| !x.is_negative()) && is_echelon(q)
}

/// Integer points of the 2-dimensional lattice spanned by `gens` (rows).
/// Returns a vector with coordinates of opposite strict signs if one exists.
fn opposite_sign_point(gens: &IntMatrix) -> Option<Vec<Int>> {
    let basis = hermite_basis(gens);
    match basis.rows() {
        0 => None,
        1 => {
            let g = basis.row(0);
            (g[0].is_positive() != g[1].is_positive() && !g[0].is_zero() && !g[1].is_zero())
                .then_some(g)
        }
        _ => {
            // full-rank lattice: round a far point of the open fourth quadrant
            let (u, v) = (basis.row(0), basis.row(1));
            let size: Int = u.iter().chain(v.iter()).map(|x| x.abs()).sum::<Int>() + Int::one();
            let target = [Rat::from_integer(&size * 4), Rat::from_integer(-&size * 4)];
            let m = basis.transpose().to_rat();
            let coef = m.solve(&target).expect("basis of a rank-2 lattice");
            let c: Vec<Int> = coef.iter().map(|x| x.round().to_integer()).collect();
            let p: Vec<Int> = (0..2).map(|k| &c[0] * &u[k] + &c[1] * &v[k]).collect();
            debug_assert!(p[0].is_positive() && p[1].is_negative());
            Some(p)
        }
    }
}

/// Lifts a point of the projected lattice `K·P` back to a combination `z` with z·(K·P) = point.
fn lift(kp: &IntMatrix, point: &[Int]) -> Vec<Int> {
    let (h, u) = hnf_rows(kp);
    let k = pivot_columns(&h).len();
    let basis = h.top_rows(k);
    let coef = basis.transpose().to_rat().solve(&point.iter().map(rat_int).collect::<Vec<_>>())
        .expect("point lies in the lattice");
    let coef: Vec<Int> = coef.iter().map(|x| x.to_integer()).collect();
    let mut z = vec![Int::zero(); kp.rows()];
    for (i, c) in coef.iter().enumerate() {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj += c * &u[(i, j)];
        }
    }
    z
}

/// Vector of L_r(Q) supported on `support` realizing the projected point.
fn lattice_vector_on(q: &IntMatrix, support: &[usize], want: impl Fn(&IntMatrix) -> Option<Vec<Int>>) -> Option<Vec<Int>> {
    let rest = q.drop_cols(support);
    let k = integer_kernel_rows(&rest.transpose());
    if k.rows() == 0 {
        return None;
    }
    let kp = k.mul(&q.select_cols(support));
    let point = want(&kp)?;
    let z = lift(&kp, &point);
    let y = IntMatrix::from_int_rows(&[z]).mul(&k);
    Some(y.mul(q).row(0))
}

pub fn check_w(q: &IntMatrix) -> WeightFlags {
    let (r, m) = (q.rows(), q.cols());
    let a_full_rank = r < m && q.rank() == r;
    let b_cotorsion_free = a_full_rank && invariant_factors(q).iter().all(|x| x.is_one());
    let cols = q.col_vecs();
    let d_nonzero_columns = cols.iter().all(|c| c.iter().any(|x| !x.is_zero()));
    let c_positive_basis = a_full_rank && is_pointed(&cols, r);
    let mut e_witness = None;
    let mut f_witness = None;
    if a_full_rank {
        for i in 0..m {
            e_witness = lattice_vector_on(q, &[i], |kp| {
                let g = gcd_all(kp.entries());
                g.is_one().then(|| vec![Int::one()])
            });
            if e_witness.is_some() {
                break;
            }
        }
        'pairs: for i in 0..m {
            for j in i + 1..m {
                f_witness = lattice_vector_on(q, &[i, j], opposite_sign_point);
                if f_witness.is_some() {
                    break 'pairs;
                }
            }
        }
    }
    let e_no_unit_vector = a_full_rank && e_witness.is_none();
    let f_no_opposite_pair = a_full_rank && f_witness.is_none();
    let is_w = a_full_rank
        && b_cotorsion_free
        && c_positive_basis
        && d_nonzero_columns
        && e_no_unit_vector
        && f_no_opposite_pair;
    let is_reduced = a_full_rank && columns_reduced(&integer_kernel_rows(q));
    WeightFlags {
        a_full_rank,
        b_cotorsion_free,
        c_positive_basis,
        d_nonzero_columns,
        e_no_unit_vector,
        f_no_opposite_pair,
        e_witness,
        f_witness,
        is_w,
        is_reduced,
        is_positive_ref: is_positive_ref(q),
    }
}

/// Saturated integer Gale dual: rows span {x : M·x = 0} ∩ Z^cols.
pub fn gale_dual(m: &IntMatrix) -> Result<IntMatrix> {
    if m.rank() != m.rows() {
        return Err(Error::Shape("Gale dual needs a full row rank matrix".into()));
    }
    Ok(integer_kernel_rows(m))
}

/// Positive REF in the given column order, if one exists.
fn positive_ref_fixed_order(q: &IntMatrix) -> Option<IntMatrix> {
    let h = hermite_basis(q);
    let r = h.rows();
    let m = h.cols();
    let mut rows: Vec<Vec<Int>> = h.row_vecs();
    // vanish[k][j]: rows k.. all vanish at column j (k = r means no rows)
    for i in (0..r).rev() {
        let vanish_below = |j: usize, rows: &Vec<Vec<Int>>, k: usize| (k..r).all(|t| rows[t][j].is_zero());
        let mut cur = rows[i].clone();
        if (0..m).any(|j| vanish_below(j, &rows, i + 1) && cur[j].is_negative()) {
            return None;
        }
        for k in i + 1..r {
            let mut c: Option<Int> = None;
            for j in 0..m {
                if rows[k][j].is_zero() || !vanish_below(j, &rows, k + 1) {
                    continue;
                }
                let need = (-&cur[j]).div_ceil(&rows[k][j]);
                c = Some(match c {
                    Some(x) if x >= need => x,
                    _ => need,
                });
            }
            if let Some(c) = c {
                for j in 0..m {
                    let add = &c * &rows[k][j];
                    cur[j] += add;
                }
            }
        }
        rows[i] = cur;
    }
    Some(IntMatrix::from_int_rows_with_cols(&rows, m))
}

/// Column levels along a complete flag of faces of ⟨Q⟩ starting with `top`.
fn flag_levels(q: &IntMatrix, top: Option<&[Int]>) -> Result<Vec<usize>> {
    let r = q.rows();
    let cols = q.col_vecs();
    let cone = Cone::from_generators(&cols, r).map_err(|_| Error::NoPositiveBasis)?;
    let mut flag = vec![cone.clone()];
    let mut face = cone;
    let mut first = true;
    while face.dim() > 0 {
        let facets = face.facets_as_cones();
        let next = match (first, top) {
            (true, Some(n)) => facets
                .into_iter()
                .find(|(_, f)| f.dim() + 1 == face.dim() && f.rays().iter().all(|x| dot(x, n).is_zero()))
                .map(|(_, f)| f)
                .ok_or(Error::NotAFacet)?,
            _ => facets.into_iter().map(|(_, f)| f).next().expect("pointed cone has facets"),
        };
        first = false;
        flag.push(next.clone());
        face = next;
    }
    // flag[t] has dimension r - t; level = smallest dimension of a flag face containing q_j
    Ok(cols
        .iter()
        .map(|c| flag.iter().rev().position(|f| f.contains(c)).expect("column lies in ⟨Q⟩"))
        .collect())
}

fn stable_order(levels: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..levels.len()).collect();
    idx.sort_by_key(|&j| levels[j]);
    idx
}

/// A positive row basis of L_r(Q), in row echelon form whenever the column order allows it.
pub fn positive_ref(q: &IntMatrix) -> Result<IntMatrix> {
    if q.rank() != q.rows() {
        return Err(Error::Shape("weight matrix must have full row rank".into()));
    }
    if let Some(p) = positive_ref_fixed_order(q) {
        return Ok(p);
    }
    let levels = flag_levels(q, None)?;
    let order = stable_order(&levels);
    let p = positive_ref_fixed_order(&q.select_cols(&order)).ok_or(Error::NoPositiveBasis)?;
    let mut inv = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    Ok(p.select_cols(&inv))
}

/// Divides each column by its gcd and returns the reduced pair (V_red, Q_red).
pub fn reduce(v: &IntMatrix) -> Result<(IntMatrix, IntMatrix)> {
    let flags = check_f(v)?;
    if !flags.is_f {
        return Err(Error::NotFMatrix("reduction needs an F-matrix".into()));
    }
    let cols: Vec<Vec<Int>> = v.col_vecs().iter().map(|c| primitive(c)).collect();
    let vred = IntMatrix::from_cols(&cols, v.rows());
    let qred = positive_ref(&gale_dual(&vred)?)?;
    Ok((vred, qred))
}

/// Canonical weight matrix of a fan matrix.
pub fn weight_matrix(v: &IntMatrix) -> Result<IntMatrix> {
    positive_ref(&gale_dual(v)?)
}

/// Output of [`transform_bordering`]: `q_new = alpha · Q · perm_matrix`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bordering {
    pub alpha: IntMatrix,
    /// `perm[k]` is the original index of the k-th column of `q_new`.
    pub perm: Vec<usize>,
    pub q_new: IntMatrix,
    /// Number of columns lying on the hyperplane (they come first).
    pub on_hyperplane: usize,
}

impl Bordering {
    pub fn perm_matrix(&self) -> IntMatrix {
        let m = self.perm.len();
        let mut p = IntMatrix::zeros(m, m);
        for (k, &j) in self.perm.iter().enumerate() {
            p[(j, k)] = Int::one();
        }
        p
    }
}

/// Moves the facet of ⟨Q⟩ cut by `normal` to H_r = {x_r = 0}.
pub fn transform_bordering(q: &IntMatrix, normal: &[Int]) -> Result<Bordering> {
    let r = q.rows();
    let cols = q.col_vecs();
    if normal.len() != r || cols.iter().any(|c| dot(c, normal).is_negative()) {
        return Err(Error::NotAFacet);
    }
    let on: Vec<Vec<Int>> = cols.iter().filter(|c| dot(c, normal).is_zero()).cloned().collect();
    if IntMatrix::from_int_rows_with_cols(&on, r).rank() + 1 != r {
        return Err(Error::NotAFacet);
    }
    let levels = flag_levels(q, Some(normal))?;
    let perm = stable_order(&levels);
    let qp = q.select_cols(&perm);
    let q_new = positive_ref_fixed_order(&qp).ok_or(Error::NoPositiveBasis)?;
    let alpha = qp
        .to_rat()
        .transpose()
        .solve_matrix(&q_new.to_rat().transpose())
        .and_then(|a: RatMatrix| a.transpose().to_int())
        .ok_or_else(|| Error::Internal("bordering transform is not integral".into()))?;
    let on_hyperplane = on.len();
    Ok(Bordering { alpha, perm, q_new, on_hyperplane })
}

/// Bottom-row weights of a normalized matrix, i.e. the entries after the zero block.
pub fn bottom_row_split(q: &IntMatrix) -> Option<usize> {
    let last = q.row(q.rows() - 1);
    let z = last.iter().take_while(|x| x.is_zero()).count();
    last[z..].iter().all(|x| x.is_positive()).then_some(z)
}

#[allow(dead_code)]
pub(crate) fn gcd_vec(v: &[Int]) -> Int {
    v.iter().fold(Int::zero(), |g, x| g.gcd(x))
}
