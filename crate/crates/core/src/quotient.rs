//! Universal 1-covering and finite abelian quotient data of a non-CF fan matrix.
//!
//! `V = β·V̂` with `V̂` the CF fan matrix of the covering PWS; the Smith form of
//! β presents the torsion of the class group and the matrix Γ records how the
//! torsion acts on the Cox coordinates.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exactla::{gcd_all, hermite_basis, hnf_rows, invariant_factors, pivot_columns, unimodular_inverse, IntMatrix};
use crate::matrices::{check_f, gale_dual, positive_ref, weight_matrix};
use crate::{Error, Int, Result};

/// Caller-supplied choices for the non-unique unimodular transforms of the trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PinnedTransforms {
    pub u_v: Option<IntMatrix>,
    pub u: Option<IntMatrix>,
    pub mu: Option<IntMatrix>,
    pub nu: Option<IntMatrix>,
    pub w: Option<IntMatrix>,
    pub u_g: Option<IntMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPins {
    #[serde(rename = "U_V")]
    u_v: Option<Vec<Vec<serde_json::Value>>>,
    #[serde(rename = "U")]
    u: Option<Vec<Vec<serde_json::Value>>>,
    mu: Option<Vec<Vec<serde_json::Value>>>,
    nu: Option<Vec<Vec<serde_json::Value>>>,
    #[serde(rename = "W")]
    w: Option<Vec<Vec<serde_json::Value>>>,
    #[serde(rename = "U_G")]
    u_g: Option<Vec<Vec<serde_json::Value>>>,
}

fn pin_matrix(name: &str, rows: Option<Vec<Vec<serde_json::Value>>>) -> Result<Option<IntMatrix>> {
    let Some(rows) = rows else { return Ok(None) };
    let k = rows.len();
    let mut out = vec![];
    for row in rows {
        if row.len() != k {
            return Err(Error::Pinned(format!("{name} must be square")));
        }
        let mut r = vec![];
        for x in row {
            let parsed = match &x {
                serde_json::Value::Number(n) => n.as_i64().map(Int::from),
                serde_json::Value::String(s) => s.trim().parse::<Int>().ok(),
                _ => None,
            };
            r.push(parsed.ok_or_else(|| Error::Pinned(format!("{name}: non-integer entry {x}")))?);
        }
        out.push(r);
    }
    let m = IntMatrix::from_int_rows_with_cols(&out, k);
    if unimodular_inverse(&m).is_none() {
        return Err(Error::Pinned(format!("{name} is not unimodular")));
    }
    Ok(Some(m))
}

impl PinnedTransforms {
    /// Parses a JSON object with optional keys `U_V`, `U`, `mu`, `nu`, `W`, `U_G`.
    pub fn from_json(text: &str) -> Result<PinnedTransforms> {
        let raw: RawPins = serde_json::from_str(text).map_err(|e| Error::Pinned(e.to_string()))?;
        Ok(PinnedTransforms {
            u_v: pin_matrix("U_V", raw.u_v)?,
            u: pin_matrix("U", raw.u)?,
            mu: pin_matrix("mu", raw.mu)?,
            nu: pin_matrix("nu", raw.nu)?,
            w: pin_matrix("W", raw.w)?,
            u_g: pin_matrix("U_G", raw.u_g)?,
        })
    }
}

/// Every intermediate matrix of the Γ computation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientTrace {
    #[serde(rename = "H")]
    pub h: IntMatrix,
    #[serde(rename = "U")]
    pub u: IntMatrix,
    #[serde(rename = "H_hat")]
    pub h_hat: IntMatrix,
    #[serde(rename = "U_hat")]
    pub u_hat: IntMatrix,
    pub pivots: Vec<usize>,
    #[serde(rename = "beta_H")]
    pub beta_h: IntMatrix,
    pub beta: IntMatrix,
    #[serde(rename = "Delta")]
    pub delta: IntMatrix,
    pub mu: IntMatrix,
    pub nu: IntMatrix,
    #[serde(rename = "V_prime")]
    pub v_prime: IntMatrix,
    #[serde(rename = "V_hat_prime")]
    pub v_hat_prime: IntMatrix,
    /// Number of top rows of V′ fed to the Hermite step.
    pub head_rows: usize,
    #[serde(rename = "W")]
    pub w: IntMatrix,
    #[serde(rename = "G")]
    pub g: IntMatrix,
    #[serde(rename = "U_G")]
    pub u_g: IntMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientReport {
    #[serde(rename = "V")]
    pub v: IntMatrix,
    #[serde(rename = "Q")]
    pub q: IntMatrix,
    #[serde(rename = "Vhat")]
    pub v_hat: IntMatrix,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub torsion_factors: Vec<Int>,
    pub s: usize,
    #[serde(rename = "Gamma")]
    pub gamma: IntMatrix,
    /// Each row of Γ pairs to zero with every row of V modulo its factor.
    pub gamma_annihilates_v: bool,
    /// Γ together with Q presents the class group (kernel = row lattice of V).
    pub gamma_presents_class_group: bool,
    /// gcd of each row of Γ with its modulus is 1.
    pub faithful: bool,
    pub pinned: bool,
    /// Relations a pinned transform was expected to satisfy but does not.
    pub pin_discrepancies: Vec<String>,
    pub pipeline_trace: QuotientTrace,
}

fn checked_f(v: &IntMatrix) -> Result<()> {
    let flags = check_f(v)?;
    if !flags.is_f {
        return Err(Error::NotFMatrix("quotient data needs an F-matrix".into()));
    }
    Ok(())
}

fn cover_from_q(q: &IntMatrix) -> Result<IntMatrix> {
    Ok(hermite_basis(&gale_dual(q)?))
}

/// (Q, V̂) with Q the positive REF weight matrix and V̂ = G(Q) in Hermite form.
pub fn universal_covering(v: &IntMatrix) -> Result<(IntMatrix, IntMatrix)> {
    checked_f(v)?;
    let q = weight_matrix(v)?;
    let v_hat = cover_from_q(&q)?;
    Ok((q, v_hat))
}

struct BetaData {
    h: IntMatrix,
    u: IntMatrix,
    h_hat: IntMatrix,
    u_hat: IntMatrix,
    pivots: Vec<usize>,
    beta_h: IntMatrix,
    beta: IntMatrix,
}

fn beta_data(v: &IntMatrix, v_hat: &IntMatrix, pinned_u: Option<&IntMatrix>) -> Result<BetaData> {
    let (h, u_own) = hnf_rows(v);
    let u = pinned_u.cloned().unwrap_or(u_own);
    let (h_hat, u_hat) = hnf_rows(v_hat);
    let pivots = pivot_columns(&h);
    if pivots.len() != v.rows() || pivot_columns(&h_hat) != pivots {
        return Err(Error::Internal("V and its cover have different Hermite pivots".into()));
    }
    // β_H·Ĥ = H; when Ĥ is the identity on the pivots this is just H on its pivot columns
    let bh = h.select_cols(&pivots).to_rat().mul(
        &h_hat
            .select_cols(&pivots)
            .to_rat()
            .inverse()
            .ok_or_else(|| Error::Internal("singular pivot block".into()))?,
    );
    let beta_h = bh.to_int().ok_or_else(|| Error::Internal("β_H is not integral".into()))?;
    let u_inv = unimodular_inverse(&u).ok_or_else(|| Error::Pinned("U is not unimodular".into()))?;
    let beta = u_inv.mul(&beta_h).mul(&u_hat);
    Ok(BetaData { h, u, h_hat, u_hat, pivots, beta_h, beta })
}

/// Nontrivial invariant factors of β; they present the torsion of Cl(X).
pub fn torsion_invariants(v: &IntMatrix) -> Result<Vec<Int>> {
    let (_, v_hat) = universal_covering(v)?;
    let b = beta_data(v, &v_hat, None)?;
    Ok(invariant_factors(&b.beta).into_iter().filter(|x| !x.is_one()).collect())
}

fn reduce_row_mod(row: &[Int], m: &Int) -> Vec<Int> {
    row.iter()
        .map(|x| {
            let r = x % m;
            if r.is_negative() {
                r + m
            } else {
                r
            }
        })
        .collect()
}

fn is_row_hnf_of(h: &IntMatrix) -> bool {
    hnf_rows(h).0 == *h
}

/// Full quotient report. Without pins Γ is computed from freshly chosen transforms
/// and always presents the torsion; with pins the trace uses the supplied matrices
/// and any relation they fail is listed in `pin_discrepancies`.
pub fn torsion_matrix_gamma(v: &IntMatrix, pins: Option<&PinnedTransforms>) -> Result<QuotientReport> {
    checked_f(v)?;
    let empty = PinnedTransforms::default();
    let p = pins.unwrap_or(&empty);
    let (n, m) = (v.rows(), v.cols());
    let r = m - n;
    let mut notes = vec![];

    let q = match &p.u_v {
        Some(u_v) => {
            if u_v.rows() != m {
                return Err(Error::Pinned(format!("U_V must be {m}x{m}")));
            }
            let hv = u_v.mul(&v.transpose());
            if !is_row_hnf_of(&hv) {
                notes.push("U_V·V^T is not the Hermite form of V^T".into());
            }
            let raw = u_v.bottom_rows(r);
            if !v.mul(&raw.transpose()).is_zero() {
                return Err(Error::Pinned("bottom rows of U_V are not a Gale dual of V".into()));
            }
            positive_ref(&raw)?
        }
        None => weight_matrix(v)?,
    };
    let v_hat = cover_from_q(&q)?;
    if let Some(u) = &p.u {
        if u.rows() != n {
            return Err(Error::Pinned(format!("U must be {n}x{n}")));
        }
        if u.mul(v) != hnf_rows(v).0 {
            notes.push("U·V is not the Hermite form of V".into());
        }
    }
    let b = beta_data(v, &v_hat, p.u.as_ref())?;

    let (d_own, mu_own, nu_own) = crate::exactla::snf(&b.beta);
    let mu = p.mu.clone().unwrap_or(mu_own);
    let nu = p.nu.clone().unwrap_or(nu_own);
    if mu.rows() != n || nu.rows() != n {
        return Err(Error::Pinned(format!("mu and nu must be {n}x{n}")));
    }
    let delta = d_own;
    if mu.mul(&b.beta).mul(&nu) != delta {
        notes.push("mu·beta·nu is not the Smith form of beta".into());
    }
    let diag = delta.diagonal();
    let tors_rows: Vec<usize> = (0..n).filter(|&i| !diag[i].is_one()).collect();
    let s = tors_rows.len();
    if tors_rows.iter().any(|&i| i < n - s) {
        return Err(Error::Internal("Smith form with trivial factors below nontrivial ones".into()));
    }
    let factors: Vec<Int> = tors_rows.iter().map(|&i| diag[i].clone()).collect();

    let nu_inv = unimodular_inverse(&nu).ok_or_else(|| Error::Pinned("nu is not unimodular".into()))?;
    let v_hat_prime = nu_inv.mul(&v_hat);
    let v_prime = mu.mul(v);
    if v_prime != delta.mul(&v_hat_prime) {
        notes.push("mu·V differs from Delta·nu^-1·V_hat".into());
    }

    // The rows with trivial factor span a saturated sublattice; the remaining
    // rows of W are dual coordinates on which the torsion rows of V̂′ are read off.
    let head = match &p.u_g {
        Some(ug) if ug.rows() <= m => m - ug.rows(),
        Some(_) => return Err(Error::Pinned("U_G is larger than the number of columns".into())),
        None => n - s,
    };
    let x = v_prime.top_rows(head);
    let w = match &p.w {
        Some(w) => {
            if w.rows() != m {
                return Err(Error::Pinned(format!("W must be {m}x{m}")));
            }
            if !is_row_hnf_of(&w.mul(&x.transpose())) {
                notes.push("W·(top rows of V')^T is not in Hermite form".into());
            }
            w.clone()
        }
        None => hnf_rows(&x.transpose()).1,
    };
    let tail = w.bottom_rows(m - head);
    let g = v_hat_prime.bottom_rows(s).mul(&tail.transpose());
    let u_g = match &p.u_g {
        Some(ug) => {
            if !is_row_hnf_of(&ug.mul(&g.transpose())) {
                notes.push("U_G·G^T is not in Hermite form".into());
            }
            ug.clone()
        }
        None => hnf_rows(&g.transpose()).1,
    };
    let raw_gamma = u_g.top_rows(s).mul(&tail);
    let gamma_rows: Vec<Vec<Int>> =
        (0..s).map(|i| reduce_row_mod(&raw_gamma.row(i), &factors[i])).collect();
    let gamma = IntMatrix::from_int_rows_with_cols(&gamma_rows, m);

    let annihilates = (0..s).all(|i| {
        let pair = v.mul_vec(&gamma.row(i));
        pair.iter().all(|x| (x % &factors[i]).is_zero())
    });
    let faithful = (0..s).all(|i| {
        let mut row = gamma.row(i);
        row.push(factors[i].clone());
        gcd_all(&row).is_one()
    });
    let presents = annihilates && presents_torsion(&gamma, &v_hat, &factors);

    Ok(QuotientReport {
        v: v.clone(),
        q,
        v_hat,
        torsion_factors: factors,
        s,
        gamma,
        gamma_annihilates_v: annihilates,
        gamma_presents_class_group: presents,
        faithful,
        pinned: pins.is_some(),
        pin_discrepancies: notes,
        pipeline_trace: QuotientTrace {
            h: b.h,
            u: b.u,
            h_hat: b.h_hat,
            u_hat: b.u_hat,
            pivots: b.pivots,
            beta_h: b.beta_h,
            beta: b.beta,
            delta,
            mu,
            nu,
            v_prime,
            v_hat_prime,
            head_rows: head,
            w,
            g,
            u_g,
        },
    })
}

/// Γ restricted to ker Q = rows of V̂ must map onto ⊕ Z/τ_i.
fn presents_torsion(gamma: &IntMatrix, v_hat: &IntMatrix, factors: &[Int]) -> bool {
    let s = factors.len();
    if s == 0 {
        return true;
    }
    let a = gamma.mul(&v_hat.transpose()).hstack(&IntMatrix::diag(factors));
    invariant_factors(&a).len() == s && invariant_factors(&a).iter().all(|x| x.is_one())
}

/// Torsion part of the Cox action: a modulus and one exponent per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TorsionAction {
    #[serde(serialize_with = "crate::exactla::ser::int")]
    pub modulus: Int,
    #[serde(serialize_with = "crate::exactla::ser::vec")]
    pub exponents: Vec<Int>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoxPresentation {
    /// One row per torus factor: the exponent of t_i on each coordinate.
    pub free_weights: IntMatrix,
    pub torsion: Vec<TorsionAction>,
    pub rendering: String,
}

fn power(name: &str, e: &Int) -> Option<String> {
    if e.is_zero() {
        None
    } else if e.is_one() {
        Some(name.to_string())
    } else {
        Some(format!("{name}^{e}"))
    }
}

/// Presentation of X as a quotient of the Cox space by (C*)^r ⊕ ⊕ μ_τ.
pub fn cox_presentation(v: &IntMatrix, pins: Option<&PinnedTransforms>) -> Result<CoxPresentation> {
    let rep = torsion_matrix_gamma(v, pins)?;
    Ok(cox_presentation_of(&rep))
}

pub fn cox_presentation_of(rep: &QuotientReport) -> CoxPresentation {
    let torsion: Vec<TorsionAction> = (0..rep.s)
        .map(|i| TorsionAction { modulus: rep.torsion_factors[i].clone(), exponents: rep.gamma.row(i) })
        .collect();
    let m = rep.q.cols();
    let eps = |i: usize| if rep.s == 1 { "ε".to_string() } else { format!("ε_{}", i + 1) };
    let coords: Vec<String> = (0..m)
        .map(|j| {
            let mut parts = vec![];
            for (i, t) in torsion.iter().enumerate() {
                parts.extend(power(&eps(i), &t.exponents[j]));
            }
            for i in 0..rep.q.rows() {
                parts.extend(power(&format!("t_{}", i + 1), &rep.q[(i, j)]));
            }
            parts.push(format!("x_{}", j + 1));
            parts.join(" ")
        })
        .collect();
    let mut groups: BTreeMap<usize, String> = BTreeMap::new();
    groups.insert(0, format!("(C*)^{}", rep.q.rows()));
    for (i, t) in torsion.iter().enumerate() {
        groups.insert(i + 1, format!("μ_{}", t.modulus));
    }
    let group: Vec<String> = groups.into_values().collect();
    CoxPresentation {
        free_weights: rep.q.clone(),
        torsion,
        rendering: format!("{}: ({})", group.join(" ⊕ "), coords.join(", ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{abs_det, ints, lattice_equal};
    use crate::secfan::{enumerate_chambers, fan_of_chamber, singularity_profile};
    use proptest::prelude::*;

    fn ex_quotient() -> IntMatrix {
        IntMatrix::from_rows(&[
            vec![9, 11, 13, -33, 9, 44, -97],
            vec![10, 12, 14, -36, 10, 48, -106],
            vec![54, 63, 75, -192, 51, 258, -567],
            vec![310, 365, 430, -1105, 295, 1485, -3265],
        ])
    }

    fn wptb_b_v() -> IntMatrix {
        IntMatrix::from_rows(&[
            vec![1, 0, 0, -1, 0, 2, -4],
            vec![0, 1, 0, -1, 0, 2, -4],
            vec![0, 0, 1, -1, 0, 1, -2],
            vec![0, 0, 0, 0, 1, -1, 1],
        ])
    }

    fn sample_pins() -> PinnedTransforms {
        PinnedTransforms::from_json(
            r#"{
            "U_V": [[-4,0,1,-1,-1,0,0],[9,2,5,7,7,0,0],[3,-4,5,2,2,0,0],[-1,1,-2,-1,-1,0,0],
                    [-1,-1,-1,-1,0,0,0],[-1,-1,0,1,1,1,0],[3,3,1,-1,-1,0,1]],
            "U": [[-13,36,7,-2],[-26,92,16,-5],[-22,83,17,-5],[-30,105,20,-6]],
            "mu": [[-1,1,0,0],[14,-18,1,0],[8,-22,-3,1],[-30,105,20,-6]],
            "nu": [[1,-1,4,20],[0,1,-5,-27],[0,0,1,6],[0,0,0,1]],
            "W": [[-1,0,0,0,0,0,0],[1,1,0,0,0,0,0],[0,0,1,0,0,0,0],[0,0,0,1,0,0,0],
                  [0,0,0,0,1,0,0],[0,0,0,0,0,1,0],[0,0,0,0,0,0,1]],
            "U_G": [[1,0,0,1,0,0],[0,1,0,0,0,0],[0,0,1,0,0,0],[-1,0,0,0,0,0],
                    [1,0,0,1,1,0],[-1,0,0,-1,0,1]]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn covering_of_the_torsion_example() {
        let (q, v_hat) = universal_covering(&ex_quotient()).unwrap();
        assert_eq!(
            q,
            IntMatrix::from_rows(&[vec![1, 1, 1, 1, 0, 0, 0], vec![0, 0, 1, 2, 1, 1, 0], vec![0, 0, 0, 0, 1, 2, 1]])
        );
        assert!(lattice_equal(&v_hat, &wptb_b_v()));
        assert_eq!(v_hat, wptb_b_v());
    }

    #[test]
    fn beta_and_smith_form() {
        let rep = torsion_matrix_gamma(&ex_quotient(), None).unwrap();
        let t = &rep.pipeline_trace;
        assert_eq!(
            t.h,
            IntMatrix::from_rows(&[
                vec![1, 0, 0, -1, 10, -8, 6],
                vec![0, 1, 0, -1, 27, -25, 23],
                vec![0, 0, 1, -1, 24, -23, 22],
                vec![0, 0, 0, 0, 30, -30, 30],
            ])
        );
        assert_eq!(t.pivots, vec![0, 1, 2, 4]);
        assert_eq!(t.u_hat, IntMatrix::identity(4));
        assert_eq!(
            t.beta_h,
            IntMatrix::from_rows(&[vec![1, 0, 0, 10], vec![0, 1, 0, 27], vec![0, 0, 1, 24], vec![0, 0, 0, 30]])
        );
        assert_eq!(
            t.beta,
            IntMatrix::from_rows(&[
                vec![9, 11, 13, 9],
                vec![10, 12, 14, 10],
                vec![54, 63, 75, 51],
                vec![310, 365, 430, 295],
            ])
        );
        assert_eq!(abs_det(&t.beta_h), Int::from(30));
        assert_eq!(t.delta, IntMatrix::diag(&ints(&[1, 1, 1, 30])));
        assert_eq!(rep.torsion_factors, ints(&[30]));
        assert_eq!(rep.s, 1);
        // V = β·V̂ independently of the Hermite route
        assert_eq!(t.beta.mul(&rep.v_hat), rep.v);
    }

    #[test]
    fn pinned_trace_reproduces_gamma() {
        let pins = sample_pins();
        let rep = torsion_matrix_gamma(&ex_quotient(), Some(&pins)).unwrap();
        assert_eq!(rep.gamma, IntMatrix::from_rows(&[vec![1, 1, 0, 0, 1, 0, 0]]));
        let t = &rep.pipeline_trace;
        assert_eq!(t.head_rows, 1);
        assert_eq!(t.g, IntMatrix::from_rows(&[vec![0, 0, 0, 1, -1, 1]]));
        assert_eq!(
            t.v_hat_prime,
            IntMatrix::from_rows(&[
                vec![1, 1, 1, -3, 1, 4, -9],
                vec![0, 1, 5, -6, -3, 10, -17],
                vec![0, 0, 1, -1, -6, 7, -8],
                vec![0, 0, 0, 0, 1, -1, 1],
            ])
        );
        assert_eq!(rep.q.row(0), ints(&[1, 1, 1, 1, 0, 0, 0]));
        assert!(rep.faithful);
        // the printed V′ is not μ·V, so W fails its Hermite relation and Γ does not kill V
        assert!(!rep.gamma_annihilates_v);
        assert!(rep.pin_discrepancies.iter().any(|d| d.starts_with("W")));
        assert!(!rep.pin_discrepancies.iter().any(|d| d.starts_with("U·V") || d.starts_with("mu·beta")));
    }

    #[test]
    fn unpinned_gamma_presents_the_torsion() {
        let rep = torsion_matrix_gamma(&ex_quotient(), None).unwrap();
        assert_eq!(rep.gamma.rows(), 1);
        assert!(rep.gamma_annihilates_v && rep.gamma_presents_class_group && rep.faithful);
        assert!(rep.pin_discrepancies.is_empty());
    }

    #[test]
    fn three_routes_to_delta() {
        let v = ex_quotient();
        let tors: Int = torsion_invariants(&v).unwrap().iter().product();
        let snf_v: Int = invariant_factors(&v).iter().product();
        let (q, _) = universal_covering(&v).unwrap();
        let ch = enumerate_chambers(&q).unwrap().into_iter().find(|c| c.in_moving).unwrap();
        let prof = singularity_profile(&v, &q, &fan_of_chamber(&ch)).unwrap();
        assert_eq!(tors, Int::from(30));
        assert_eq!(snf_v, tors);
        assert_eq!(prof.delta, tors);
    }

    #[test]
    fn cover_has_the_same_chambers() {
        let v = ex_quotient();
        let (q, v_hat) = universal_covering(&v).unwrap();
        let q_hat = weight_matrix(&v_hat).unwrap();
        assert_eq!(q, q_hat);
        let a: Vec<_> = enumerate_chambers(&q).unwrap().into_iter().map(|c| c.cone).collect();
        let b: Vec<_> = enumerate_chambers(&q_hat).unwrap().into_iter().map(|c| c.cone).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn cf_input_has_no_torsion() {
        let v = wptb_b_v();
        let (_, v_hat) = universal_covering(&v).unwrap();
        assert!(lattice_equal(&v_hat, &v));
        assert!(torsion_invariants(&v).unwrap().is_empty());
        let rep = torsion_matrix_gamma(&v, None).unwrap();
        assert_eq!((rep.s, rep.gamma.rows()), (0, 0));
        let cox = cox_presentation(&v, None).unwrap();
        assert_eq!(cox.free_weights.rows(), 3);
        assert!(cox.torsion.is_empty());
        assert_eq!(
            cox.rendering,
            "(C*)^3: (t_1 x_1, t_1 x_2, t_1 t_2 x_3, t_1 t_2^2 x_4, t_2 t_3 x_5, t_2 t_3^2 x_6, t_3 x_7)"
        );
    }

    #[test]
    fn wps_has_a_single_weight_row() {
        let v = IntMatrix::from_rows(&[vec![1, 0, -1], vec![0, 1, -2]]);
        let cox = cox_presentation(&v, None).unwrap();
        assert_eq!(cox.free_weights.rows(), 1);
        assert!(cox.torsion.is_empty());
    }

    #[test]
    fn pinned_cox_action_on_coordinates_1_2_5() {
        let cox = cox_presentation(&ex_quotient(), Some(&sample_pins())).unwrap();
        assert_eq!(cox.torsion.len(), 1);
        assert_eq!(cox.torsion[0].modulus, Int::from(30));
        let hit: Vec<usize> = (0..7).filter(|&j| !cox.torsion[0].exponents[j].is_zero()).collect();
        assert_eq!(hit, vec![0, 1, 4]);
        assert!(cox.rendering.starts_with("(C*)^3 ⊕ μ_30: (ε t_1 x_1, ε t_1 x_2, t_1 t_2 x_3"));
    }

    #[test]
    fn bad_pins_are_rejected() {
        assert!(matches!(PinnedTransforms::from_json(r#"{"W": [[2,0],[0,1]]}"#), Err(Error::Pinned(_))));
        assert!(matches!(PinnedTransforms::from_json(r#"{"X": []}"#), Err(Error::Pinned(_))));
        let pins = PinnedTransforms::from_json(r#"{"mu": [[1,0],[0,1]]}"#).unwrap();
        assert!(matches!(torsion_matrix_gamma(&ex_quotient(), Some(&pins)), Err(Error::Pinned(_))));
    }

    #[test]
    fn non_f_input_is_refused() {
        let v = IntMatrix::from_rows(&[vec![1, 0, 1], vec![0, 1, 1]]);
        assert!(universal_covering(&v).is_err());
    }

    // a unimodular-by-construction matrix times a diagonal of determinant d
    fn scaled(cf: &IntMatrix, d: i64, shear: i64) -> IntMatrix {
        let n = cf.rows();
        let mut left = IntMatrix::identity(n);
        left[(n - 1, n - 1)] = Int::from(d);
        if n > 1 {
            left[(0, n - 1)] = Int::from(shear);
        }
        left.mul(cf)
    }

    fn cf_examples() -> Vec<IntMatrix> {
        vec![
            IntMatrix::from_rows(&[vec![1, 0, -1, 0], vec![0, 1, 0, -1]]),
            IntMatrix::from_rows(&[vec![1, 0, -1, 1], vec![0, 1, 0, -1]]),
            IntMatrix::from_rows(&[vec![1, 0, -1], vec![0, 1, -2]]),
            IntMatrix::from_rows(&[vec![1, 0, 0, -1, 0], vec![0, 1, 0, -1, 1], vec![0, 0, 1, -1, 0]]),
            wptb_b_v(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn derived_torsion_from_a_determinant_d_factor(k in 0usize..5, d in 2i64..9, shear in -3i64..4) {
            let cf = &cf_examples()[k];
            let v = scaled(cf, d, shear);
            // the scaled matrix is an F-matrix only when its columns stay primitive-free of zero
            if check_f(&v).map(|f| f.is_f).unwrap_or(false) {
                let (_, v_hat) = universal_covering(&v).unwrap();
                prop_assert!(lattice_equal(&v_hat, cf));
                let tors: Int = torsion_invariants(&v).unwrap().iter().product();
                let snf_v: Int = invariant_factors(&v).iter().product();
                prop_assert_eq!(&tors, &Int::from(d));
                prop_assert_eq!(&snf_v, &Int::from(d));
                let rep = torsion_matrix_gamma(&v, None).unwrap();
                prop_assert!(rep.gamma_annihilates_v && rep.gamma_presents_class_group && rep.faithful);
                prop_assert!(rep.gamma.row_vecs().iter().all(|r| r.iter().any(|x| !x.is_zero())));
            }
        }
    }
}
