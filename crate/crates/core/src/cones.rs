//! Rational polyhedral cones with canonical rays and facets.

use itertools::Itertools;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::exactla::{
    dot, dot_rat, gcd_all, integer_kernel_rows, invariant_factors, primitive, IntMatrix, Rat,
};
use crate::{Error, Int, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Closed,
    RelativeInterior,
}

/// A strongly convex cone. `equations` spans the orthogonal complement of the
/// linear span; facet normals are primitive, inward, and lie in the span.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cone {
    ambient: usize,
    dim: usize,
    rays: Vec<Vec<Int>>,
    facets: Vec<Vec<Int>>,
    equations: Vec<Vec<Int>>,
}

#[derive(Serialize)]
struct ConeJson<'a> {
    dim: usize,
    rays: &'a IntMatrixView,
    facet_normals: &'a IntMatrixView,
}

type IntMatrixView = Vec<Vec<serde_json::Value>>;

impl Serialize for Cone {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let conv = |v: &Vec<Vec<Int>>| -> IntMatrixView {
            v.iter().map(|r| r.iter().map(crate::exactla::json_int).collect()).collect()
        };
        ConeJson { dim: self.dim, rays: &conv(&self.rays), facet_normals: &conv(&self.facets) }
            .serialize(s)
    }
}

fn kernel_of(rows: &[Vec<Int>], d: usize) -> IntMatrix {
    integer_kernel_rows(&IntMatrix::from_int_rows_with_cols(rows, d))
}

fn rank_of(rows: &[Vec<Int>], d: usize) -> usize {
    IntMatrix::from_int_rows_with_cols(rows, d).rank()
}

impl Cone {
    pub fn zero(ambient: usize) -> Cone {
        let equations = IntMatrix::identity(ambient).row_vecs();
        Cone { ambient, dim: 0, rays: vec![], facets: vec![], equations }
    }

    /// Canonical cone generated by `gens`; fails when the cone contains a line.
    pub fn from_generators(gens: &[Vec<Int>], ambient: usize) -> Result<Cone> {
        let mut g: Vec<Vec<Int>> =
            gens.iter().filter(|v| v.iter().any(|x| !x.is_zero())).map(|v| primitive(v)).collect();
        if g.iter().any(|v| v.len() != ambient) {
            return Err(Error::Shape("generator of wrong length".into()));
        }
        g.sort();
        g.dedup();
        if g.is_empty() {
            return Ok(Cone::zero(ambient));
        }
        let equations = kernel_of(&g, ambient).row_vecs();
        let k = ambient - equations.len();
        let mut facets: Vec<Vec<Int>> = Vec::new();
        for s in g.iter().cloned().combinations(k - 1) {
            let mut sys = equations.clone();
            sys.extend(s);
            let ker = kernel_of(&sys, ambient);
            if ker.rows() != 1 {
                continue;
            }
            let n = ker.row(0);
            let vals: Vec<Int> = g.iter().map(|x| dot(x, &n)).collect();
            let normal = if vals.iter().all(|v| !v.is_negative()) {
                n
            } else if vals.iter().all(|v| !v.is_positive()) {
                n.iter().map(|x| -x).collect()
            } else {
                continue;
            };
            if !facets.contains(&normal) {
                facets.push(normal);
            }
        }
        if rank_of(&facets, ambient) < k {
            return Err(Error::ContainsLine);
        }
        let rays: Vec<Vec<Int>> = g
            .iter()
            .filter(|x| {
                let tight: Vec<Vec<Int>> =
                    facets.iter().filter(|n| dot(x, n).is_zero()).cloned().collect();
                rank_of(&tight, ambient) == k - 1
            })
            .cloned()
            .collect();
        facets.sort();
        Ok(Cone { ambient, dim: k, rays, facets, equations })
    }

    pub fn from_generator_matrix_cols(m: &IntMatrix) -> Result<Cone> {
        Cone::from_generators(&m.col_vecs(), m.rows())
    }

    /// The cone {x : E·x = 0, N·x ≥ 0}; must be pointed.
    pub fn from_constraints(eqs: &[Vec<Int>], ineqs: &[Vec<Int>], ambient: usize) -> Result<Cone> {
        let eqs: Vec<Vec<Int>> = if eqs.is_empty() {
            vec![]
        } else {
            crate::exactla::hermite_basis(&IntMatrix::from_int_rows_with_cols(eqs, ambient)).row_vecs()
        };
        let span_dim = ambient - eqs.len();
        if span_dim == 0 {
            return Ok(Cone::zero(ambient));
        }
        let mut all = eqs.clone();
        all.extend(ineqs.iter().cloned());
        if rank_of(&all, ambient) < ambient {
            return Err(Error::ContainsLine);
        }
        let mut ineqs: Vec<Vec<Int>> = ineqs.iter().map(|v| primitive(v)).collect();
        ineqs.sort();
        ineqs.dedup();
        let mut rays = Vec::new();
        for s in ineqs.iter().cloned().combinations(span_dim - 1) {
            let mut sys = eqs.clone();
            sys.extend(s);
            let ker = kernel_of(&sys, ambient);
            if ker.rows() != 1 {
                continue;
            }
            let x = ker.row(0);
            let vals: Vec<Int> = ineqs.iter().map(|n| dot(n, &x)).collect();
            if vals.iter().all(|v| !v.is_negative()) {
                rays.push(x);
            } else if vals.iter().all(|v| !v.is_positive()) {
                rays.push(x.iter().map(|t| -t).collect());
            }
        }
        Cone::from_generators(&rays, ambient)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rays(&self) -> &[Vec<Int>] {
        &self.rays
    }

    pub fn facet_normals(&self) -> &[Vec<Int>] {
        &self.facets
    }

    pub fn equations(&self) -> &[Vec<Int>] {
        &self.equations
    }

    pub fn is_zero(&self) -> bool {
        self.dim == 0
    }

    pub fn is_full(&self) -> bool {
        self.dim == self.ambient
    }

    pub fn is_simplicial(&self) -> bool {
        self.rays.len() == self.dim
    }

    pub fn ray_matrix(&self) -> IntMatrix {
        IntMatrix::from_cols(&self.rays, self.ambient)
    }

    /// Sum of the rays, a lattice point in the relative interior.
    pub fn interior_point(&self) -> Vec<Int> {
        let mut p = vec![Int::zero(); self.ambient];
        for r in &self.rays {
            for (a, b) in p.iter_mut().zip(r) {
                *a += b;
            }
        }
        p
    }

    pub fn contains(&self, x: &[Int]) -> bool {
        self.equations.iter().all(|e| dot(e, x).is_zero())
            && self.facets.iter().all(|n| !dot(n, x).is_negative())
    }

    pub fn contains_in_relint(&self, x: &[Int]) -> bool {
        self.dim > 0
            && self.equations.iter().all(|e| dot(e, x).is_zero())
            && self.facets.iter().all(|n| dot(n, x).is_positive())
    }

    pub fn membership(&self, x: &[Rat], mode: Membership) -> bool {
        let in_span = self.equations.iter().all(|e| dot_rat(e, x).is_zero());
        if !in_span {
            return false;
        }
        match mode {
            Membership::Closed => self.facets.iter().all(|n| !dot_rat(n, x).is_negative()),
            Membership::RelativeInterior => {
                if self.dim == 0 {
                    return false;
                }
                self.facets.iter().all(|n| dot_rat(n, x).is_positive())
            }
        }
    }

    pub fn contains_cone(&self, other: &Cone) -> bool {
        other.rays.iter().all(|r| self.contains(r))
    }

    pub fn intersect(&self, other: &Cone) -> Cone {
        assert_eq!(self.ambient, other.ambient, "ambient dimension mismatch");
        if self.is_zero() || other.is_zero() {
            return Cone::zero(self.ambient);
        }
        let mut eqs = self.equations.clone();
        eqs.extend(other.equations.iter().cloned());
        let mut ineqs = self.facets.clone();
        ineqs.extend(other.facets.iter().cloned());
        Cone::from_constraints(&eqs, &ineqs, self.ambient)
            .expect("intersection of pointed cones is pointed")
    }

    /// Intersection with the closed halfspace {x : n·x ≥ 0}.
    pub fn cut(&self, n: &[Int]) -> Cone {
        if self.is_zero() {
            return self.clone();
        }
        let mut ineqs = self.facets.clone();
        ineqs.push(n.to_vec());
        Cone::from_constraints(&self.equations, &ineqs, self.ambient)
            .expect("cut of a pointed cone is pointed")
    }

    /// Intersection with the hyperplane {x : n·x = 0}.
    pub fn slice(&self, n: &[Int]) -> Cone {
        if self.is_zero() {
            return self.clone();
        }
        let mut eqs = self.equations.clone();
        eqs.push(n.to_vec());
        Cone::from_constraints(&eqs, &self.facets, self.ambient)
            .expect("slice of a pointed cone is pointed")
    }

    /// Rays lying on the hyperplane n·x = 0.
    pub fn rays_on(&self, n: &[Int]) -> Vec<Vec<Int>> {
        self.rays.iter().filter(|r| dot(r, n).is_zero()).cloned().collect()
    }

    /// |det| of the primitive ray generators relative to the lattice of the span.
    pub fn simplicial_det(&self) -> Result<Int> {
        if !self.is_simplicial() {
            return Err(Error::Shape("cone is not simplicial".into()));
        }
        if self.dim == 0 {
            return Ok(Int::from(1));
        }
        let m = IntMatrix::from_int_rows(&self.rays);
        let f = invariant_factors(&m);
        Ok(f.iter().product::<Int>().abs())
    }

    /// Faces of codimension one together with their defining normals.
    pub fn facets_as_cones(&self) -> Vec<(Vec<Int>, Cone)> {
        self.facets
            .iter()
            .map(|n| {
                let rays = self.rays_on(n);
                (n.clone(), Cone::from_generators(&rays, self.ambient).expect("face of pointed cone"))
            })
            .collect()
    }
}

/// True when the nonzero vectors admit a strictly positive linear functional.
pub fn is_pointed(gens: &[Vec<Int>], ambient: usize) -> bool {
    Cone::from_generators(gens, ambient).is_ok()
}

/// gcd-normalised copy of a normal; used to compare hyperplanes up to sign.
pub fn hyperplane_key(n: &[Int]) -> Vec<Int> {
    let p = primitive(n);
    match p.iter().find(|x| !x.is_zero()) {
        Some(x) if x.is_negative() => p.iter().map(|t| -t).collect(),
        _ => p,
    }
}

pub fn is_primitive(v: &[Int]) -> bool {
    gcd_all(v) == Int::from(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactla::{int, ints, rat};
    use proptest::prelude::*;

    fn cone(v: &[Vec<i64>], d: usize) -> Cone {
        let g: Vec<Vec<Int>> = v.iter().map(|x| ints(x)).collect();
        Cone::from_generators(&g, d).unwrap()
    }

    #[test]
    fn redundant_generators_removed() {
        let c = cone(&[vec![1, 0], vec![1, 1], vec![0, 1], vec![1, 2]], 2);
        assert_eq!(c.rays(), &[ints(&[0, 1]), ints(&[1, 0])]);
        assert_eq!(c.dim(), 2);
    }

    #[test]
    fn line_rejected() {
        let g = vec![ints(&[1, 0]), ints(&[-1, 0])];
        assert_eq!(Cone::from_generators(&g, 2), Err(Error::ContainsLine));
        let g = vec![ints(&[1, 0]), ints(&[0, 1]), ints(&[-1, -1])];
        assert_eq!(Cone::from_generators(&g, 2), Err(Error::ContainsLine));
    }

    #[test]
    fn lower_dimensional_cone() {
        let c = cone(&[vec![1, 0, 0], vec![1, 1, 0]], 3);
        assert_eq!(c.dim(), 2);
        assert!(c.contains(&ints(&[3, 1, 0])));
        assert!(!c.contains(&ints(&[3, 1, 1])));
        assert!(!c.contains(&ints(&[0, 1, 0])));
    }

    #[test]
    fn intersections() {
        let a = cone(&[vec![1, 0], vec![1, 2]], 2);
        let b = cone(&[vec![1, 1], vec![0, 1]], 2);
        let c = a.intersect(&b);
        assert_eq!(c.rays(), &[ints(&[1, 1]), ints(&[1, 2])]);
        assert_eq!(a.intersect(&a), a);
        let d = cone(&[vec![0, 1], vec![-1, 1]], 2);
        assert_eq!(a.intersect(&d).dim(), 0);
    }

    #[test]
    fn membership_modes() {
        let c = cone(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]], 3);
        let zero = vec![rat(0, 1); 3];
        assert!(c.membership(&zero, Membership::Closed));
        assert!(!c.membership(&zero, Membership::RelativeInterior));
        let face = vec![rat(1, 2), rat(1, 1), rat(0, 1)];
        assert!(c.membership(&face, Membership::Closed));
        assert!(!c.membership(&face, Membership::RelativeInterior));
    }

    #[test]
    fn simplicial_determinants() {
        assert_eq!(cone(&[vec![1, 0], vec![-1, -2]], 2).simplicial_det().unwrap(), int(2));
        assert_eq!(cone(&[vec![1, 0, 0], vec![0, 1, 0]], 3).simplicial_det().unwrap(), int(1));
        assert!(cone(&[vec![1, 0], vec![1, 1], vec![0, 1], vec![1, 2]], 2).simplicial_det().is_ok());
        assert!(cone(&[vec![1, 0, 0], vec![0, 1, 0], vec![1, 0, 1], vec![0, 1, 1]], 3)
            .simplicial_det()
            .is_err());
    }

    fn positive_vectors() -> impl Strategy<Value = Vec<Vec<i64>>> {
        proptest::collection::vec(proptest::collection::vec(0i64..=4, 3), 1..6)
    }

    proptest! {
        #[test]
        fn double_description_round_trip(v in positive_vectors()) {
            let g: Vec<Vec<Int>> = v.iter().map(|x| ints(x)).collect();
            let c = Cone::from_generators(&g, 3).unwrap();
            for r in c.rays() {
                for n in c.facet_normals() { prop_assert!(!dot(r, n).is_negative()); }
            }
            let back = Cone::from_constraints(c.equations(), c.facet_normals(), 3).unwrap();
            prop_assert_eq!(back, c.clone());
            for x in &g { prop_assert!(c.contains(x)); }
        }

        #[test]
        fn intersection_laws(a in positive_vectors(), b in positive_vectors(), e in positive_vectors()) {
            let mk = |v: &Vec<Vec<i64>>| Cone::from_generators(&v.iter().map(|x| ints(x)).collect::<Vec<_>>(), 3).unwrap();
            let (a, b, e) = (mk(&a), mk(&b), mk(&e));
            prop_assert_eq!(a.intersect(&b), b.intersect(&a));
            prop_assert_eq!(a.intersect(&b).intersect(&e), a.intersect(&b.intersect(&e)));
            prop_assert_eq!(a.intersect(&a), a.clone());
            prop_assert!(a.contains_cone(&a.intersect(&b)));
        }
    }
}
