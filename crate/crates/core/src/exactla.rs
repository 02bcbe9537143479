//! Exact integer and rational linear algebra.
//!
//! Everything here works over `BigInt` / `BigRational`; there is no floating
//! point anywhere in the crate.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

pub type Int = BigInt;
pub type Rat = BigRational;

pub fn int(v: i64) -> Int {
    BigInt::from(v)
}

pub fn rat(n: i64, d: i64) -> Rat {
    BigRational::new(int(n), int(d))
}

pub fn rat_int(v: &Int) -> Rat {
    BigRational::from_integer(v.clone())
}

pub fn ints(v: &[i64]) -> Vec<Int> {
    v.iter().map(|&x| int(x)).collect()
}

pub fn gcd_all<'a>(v: impl IntoIterator<Item = &'a Int>) -> Int {
    v.into_iter().fold(Int::zero(), |g, x| g.gcd(x))
}

pub fn lcm_all<'a>(v: impl IntoIterator<Item = &'a Int>) -> Int {
    v.into_iter().fold(Int::one(), |l, x| l.lcm(x))
}

/// Divides a vector by the gcd of its entries. The zero vector is returned unchanged.
pub fn primitive(v: &[Int]) -> Vec<Int> {
    let g = gcd_all(v);
    if g.is_zero() {
        return v.to_vec();
    }
    v.iter().map(|x| x / &g).collect()
}

/// Clears denominators and returns the primitive integer vector on the same ray.
pub fn primitive_of_rat(v: &[Rat]) -> Vec<Int> {
    let l = lcm_all(v.iter().map(|x| x.denom()));
    let scaled: Vec<Int> = v.iter().map(|x| (x * rat_int(&l)).to_integer()).collect();
    primitive(&scaled)
}

pub fn dot(a: &[Int], b: &[Int]) -> Int {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_rat(a: &[Int], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| rat_int(x) * y).sum()
}

/// Dense integer matrix, row-major. Zero-sized shapes are allowed for
/// intermediate results such as an empty kernel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Int>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Int>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape does not match entry count");
        IntMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![Int::zero(); rows * cols] }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Self::zeros(k, k);
        for i in 0..k {
            m[(i, i)] = Int::one();
        }
        m
    }

    pub fn diag(d: &[Int]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = x.clone();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let big: Vec<Vec<Int>> = rows.iter().map(|r| ints(r)).collect();
        Self::from_int_rows(&big)
    }

    /// Builds a matrix from rows; `cols` is only consulted when `rows` is empty.
    pub fn from_int_rows_with_cols(rows: &[Vec<Int>], cols: usize) -> Self {
        if rows.is_empty() {
            return Self::zeros(0, cols);
        }
        Self::from_int_rows(rows)
    }

    pub fn from_int_rows(rows: &[Vec<Int>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().cloned());
        }
        IntMatrix { rows: r, cols: c, data }
    }

    pub fn from_cols(cols: &[Vec<Int>], rows: usize) -> Self {
        Self::from_int_rows_with_cols(cols, rows).transpose()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Int] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<Int> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<Int> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<Int>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn col_vecs(&self) -> Vec<Vec<Int>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn to_i64_rows(&self) -> Vec<Vec<i64>> {
        self.row_vecs()
            .iter()
            .map(|r| r.iter().map(|x| x.to_i64().expect("entry exceeds i64")).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Int]) -> Vec<Int> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(&self.row(i), v)).collect()
    }

    pub fn neg(&self) -> IntMatrix {
        IntMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| -x).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Columns indexed by `idx`, in that order (`A_I`).
    pub fn select_cols(&self, idx: &[usize]) -> IntMatrix {
        let cols: Vec<Vec<Int>> = idx.iter().map(|&j| self.col(j)).collect();
        Self::from_cols(&cols, self.rows)
    }

    /// Columns not in `idx`, in increasing order (`A^I`).
    pub fn drop_cols(&self, idx: &[usize]) -> IntMatrix {
        let keep: Vec<usize> = (0..self.cols).filter(|j| !idx.contains(j)).collect();
        self.select_cols(&keep)
    }

    pub fn select_rows(&self, idx: &[usize]) -> IntMatrix {
        let rows: Vec<Vec<Int>> = idx.iter().map(|&i| self.row(i)).collect();
        Self::from_int_rows_with_cols(&rows, self.cols)
    }

    /// Upper `s` rows.
    pub fn top_rows(&self, s: usize) -> IntMatrix {
        self.select_rows(&(0..s).collect::<Vec<_>>())
    }

    /// Lower `s` rows.
    pub fn bottom_rows(&self, s: usize) -> IntMatrix {
        self.select_rows(&(self.rows - s..self.rows).collect::<Vec<_>>())
    }

    pub fn vstack(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        IntMatrix { rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn hstack(&self, other: &IntMatrix) -> IntMatrix {
        self.transpose().vstack(&other.transpose()).transpose()
    }

    pub fn to_rat(&self) -> RatMatrix {
        RatMatrix::new(self.rows, self.cols, self.data.iter().map(rat_int).collect())
    }

    pub fn rank(&self) -> usize {
        self.to_rat().rank()
    }

    /// Diagonal of a diagonal (possibly rectangular) matrix.
    pub fn diagonal(&self) -> Vec<Int> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].clone()).collect()
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    pub fn add_row_multiple(&mut self, dst: usize, src: usize, k: &Int) {
        if k.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = &self[(src, j)] * k;
            self[(dst, j)] += v;
        }
    }

    /// col[dst] += k * col[src]
    pub fn add_col_multiple(&mut self, dst: usize, src: usize, k: &Int) {
        if k.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = &self[(i, src)] * k;
            self[(i, dst)] += v;
        }
    }

    pub fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            self[(i, j)] = -&self[(i, j)];
        }
    }

    pub fn negate_col(&mut self, j: usize) {
        for i in 0..self.rows {
            self[(i, j)] = -&self[(i, j)];
        }
    }

    /// Replaces rows (a, b) by (x·a + y·b, p·a + q·b).
    fn combine_rows(&mut self, a: usize, b: usize, x: &Int, y: &Int, p: &Int, q: &Int) {
        for j in 0..self.cols {
            let ra = self[(a, j)].clone();
            let rb = self[(b, j)].clone();
            self[(a, j)] = x * &ra + y * &rb;
            self[(b, j)] = p * &ra + q * &rb;
        }
    }

    fn combine_cols(&mut self, a: usize, b: usize, x: &Int, y: &Int, p: &Int, q: &Int) {
        for i in 0..self.rows {
            let ca = self[(i, a)].clone();
            let cb = self[(i, b)].clone();
            self[(i, a)] = x * &ca + y * &cb;
            self[(i, b)] = p * &ca + q * &cb;
        }
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = Int;
    fn index(&self, (i, j): (usize, usize)) -> &Int {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Int {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let r: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            write!(f, "{}", r.join(" "))?;
        }
        write!(f, "]")
    }
}

/// Integers that fit in i64 serialize as JSON numbers, larger ones as decimal strings.
pub(crate) fn json_int(x: &Int) -> serde_json::Value {
    match x.to_i64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::from(x.to_string()),
    }
}

pub(crate) fn json_rat(x: &Rat) -> serde_json::Value {
    if x.is_integer() {
        json_int(x.numer())
    } else {
        serde_json::Value::from(x.to_string())
    }
}

/// `serialize_with` helpers writing integers the same way as matrix entries.
pub mod ser {
    use super::{json_int, Int};
    use serde::{Serialize, Serializer};

    pub fn int<S: Serializer>(x: &Int, s: S) -> Result<S::Ok, S::Error> {
        json_int(x).serialize(s)
    }

    pub fn vec<S: Serializer>(v: &[Int], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(json_int).collect::<Vec<_>>().serialize(s)
    }

    pub fn vec_vec<S: Serializer>(v: &[Vec<Int>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|r| r.iter().map(json_int).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }

    pub fn opt_vec<S: Serializer>(v: &Option<Vec<Int>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|r| r.iter().map(json_int).collect::<Vec<_>>()).serialize(s)
    }

    pub fn opt_vec_vec<S: Serializer>(v: &Option<Vec<Vec<Int>>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|m| m.iter().map(|r| r.iter().map(json_int).collect::<Vec<_>>()).collect::<Vec<_>>())
            .serialize(s)
    }
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<serde_json::Value>> =
            self.row_vecs().iter().map(|r| r.iter().map(json_int).collect()).collect();
        rows.serialize(s)
    }
}

/// Dense rational matrix, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Rat>) -> Self {
        assert_eq!(rows * cols, data.len());
        RatMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![Rat::zero(); rows * cols] }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Self::zeros(k, k);
        for i in 0..k {
            m[(i, i)] = Rat::one();
        }
        m
    }

    pub fn diag(d: &[Rat]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = x.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vec<Rat> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<Rat> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * &other[(k, j)];
                }
            }
        }
        out
    }

    /// Some(integer matrix) when every entry is integral.
    pub fn to_int(&self) -> Option<IntMatrix> {
        if self.data.iter().all(|x| x.is_integer()) {
            Some(IntMatrix::new(self.rows, self.cols, self.data.iter().map(|x| x.to_integer()).collect()))
        } else {
            None
        }
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut pr = 0;
        for j in 0..m.cols {
            if pr == m.rows {
                break;
            }
            let Some(p) = (pr..m.rows).find(|&i| !m[(i, j)].is_zero()) else { continue };
            for k in 0..m.cols {
                m.data.swap(pr * m.cols + k, p * m.cols + k);
            }
            let inv = m[(pr, j)].recip();
            for k in 0..m.cols {
                m[(pr, k)] = &m[(pr, k)] * &inv;
            }
            for i in 0..m.rows {
                if i != pr && !m[(i, j)].is_zero() {
                    let f = m[(i, j)].clone();
                    for k in 0..m.cols {
                        let v = &f * &m[(pr, k)];
                        m[(i, k)] -= v;
                    }
                }
            }
            pivots.push(j);
            pr += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// A solution x of self·x = b, if one exists.
    pub fn solve(&self, b: &[Rat]) -> Option<Vec<Rat>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = RatMatrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, self.cols)] = b[i].clone();
        }
        let (r, piv) = aug.rref();
        if piv.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Rat::zero(); self.cols];
        for (i, &j) in piv.iter().enumerate() {
            x[j] = r[(i, self.cols)].clone();
        }
        Some(x)
    }

    /// The unique X with self·X = B, when self has full column rank and a solution exists.
    pub fn solve_matrix(&self, b: &RatMatrix) -> Option<RatMatrix> {
        let mut out = RatMatrix::zeros(self.cols, b.cols);
        for j in 0..b.cols {
            let x = self.solve(&b.col(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Some(out)
    }

    pub fn inverse(&self) -> Option<RatMatrix> {
        if self.rows != self.cols || self.rank() != self.rows {
            return None;
        }
        self.solve_matrix(&RatMatrix::identity(self.rows))
    }

    /// Basis of the rational right kernel, one vector per row.
    pub fn kernel(&self) -> Vec<Vec<Rat>> {
        let (r, piv) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|j| !piv.contains(j)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Rat::zero(); self.cols];
                v[f] = Rat::one();
                for (i, &p) in piv.iter().enumerate() {
                    v[p] = -r[(i, f)].clone();
                }
                v
            })
            .collect()
    }
}

impl Index<(usize, usize)> for RatMatrix {
    type Output = Rat;
    fn index(&self, (i, j): (usize, usize)) -> &Rat {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rat {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let r: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            write!(f, "{}", r.join(" "))?;
        }
        write!(f, "]")
    }
}

impl Serialize for RatMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<serde_json::Value>> =
            (0..self.rows).map(|i| self.row(i).iter().map(json_rat).collect()).collect();
        rows.serialize(s)
    }
}

/// (g, x, y) with g = x·a + y·b ≥ 0; when a divides b the pivot row is kept (x = ±1, y = 0).
fn ext_gcd(a: &Int, b: &Int) -> (Int, Int, Int) {
    if !a.is_zero() && b.is_multiple_of(a) {
        return (a.abs(), a.signum(), Int::zero());
    }
    let e = a.extended_gcd(b);
    let (mut g, mut x, mut y) = (e.gcd, e.x, e.y);
    if g.is_negative() {
        g = -g;
        x = -x;
        y = -y;
    }
    (g, x, y)
}

/// Row Hermite normal form: returns (H, U) with H = U·M, U unimodular.
pub fn hnf_rows(m: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let (r, c) = (m.rows, m.cols);
    let mut h = m.clone();
    let mut u = IntMatrix::identity(r);
    let mut pr = 0;
    for j in 0..c {
        if pr == r {
            break;
        }
        for i in pr + 1..r {
            if h[(i, j)].is_zero() {
                continue;
            }
            let a = h[(pr, j)].clone();
            let b = h[(i, j)].clone();
            let (g, x, y) = ext_gcd(&a, &b);
            let p = -(&b / &g);
            let q = &a / &g;
            h.combine_rows(pr, i, &x, &y, &p, &q);
            u.combine_rows(pr, i, &x, &y, &p, &q);
        }
        if h[(pr, j)].is_zero() {
            continue;
        }
        if h[(pr, j)].is_negative() {
            h.negate_row(pr);
            u.negate_row(pr);
        }
        let piv = h[(pr, j)].clone();
        for i in 0..pr {
            let k = -h[(i, j)].div_floor(&piv);
            h.add_row_multiple(i, pr, &k);
            u.add_row_multiple(i, pr, &k);
        }
        pr += 1;
    }
    (h, u)
}

/// Pivot column of each nonzero row of a row echelon matrix.
pub fn pivot_columns(h: &IntMatrix) -> Vec<usize> {
    (0..h.rows).filter_map(|i| (0..h.cols).find(|&j| !h[(i, j)].is_zero())).collect()
}

/// Smith normal form: returns (D, mu, nu) with D = mu·M·nu.
pub fn snf(m: &IntMatrix) -> (IntMatrix, IntMatrix, IntMatrix) {
    let (r, c) = (m.rows, m.cols);
    let mut d = m.clone();
    let mut mu = IntMatrix::identity(r);
    let mut nu = IntMatrix::identity(c);
    for t in 0..r.min(c) {
        // smallest nonzero entry of the trailing block becomes the pivot
        let mut best: Option<(usize, usize)> = None;
        for i in t..r {
            for j in t..c {
                if !d[(i, j)].is_zero()
                    && best.is_none_or(|(bi, bj)| d[(i, j)].abs() < d[(bi, bj)].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        d.swap_rows(t, bi);
        mu.swap_rows(t, bi);
        d.swap_cols(t, bj);
        nu.swap_cols(t, bj);
        loop {
            for i in t + 1..r {
                if d[(i, t)].is_zero() {
                    continue;
                }
                let a = d[(t, t)].clone();
                let b = d[(i, t)].clone();
                let (g, x, y) = ext_gcd(&a, &b);
                let p = -(&b / &g);
                let q = &a / &g;
                d.combine_rows(t, i, &x, &y, &p, &q);
                mu.combine_rows(t, i, &x, &y, &p, &q);
            }
            for j in t + 1..c {
                if d[(t, j)].is_zero() {
                    continue;
                }
                let a = d[(t, t)].clone();
                let b = d[(t, j)].clone();
                let (g, x, y) = ext_gcd(&a, &b);
                let p = -(&b / &g);
                let q = &a / &g;
                d.combine_cols(t, j, &x, &y, &p, &q);
                nu.combine_cols(t, j, &x, &y, &p, &q);
            }
            let clean = (t + 1..r).all(|i| d[(i, t)].is_zero());
            if !clean {
                continue;
            }
            let piv = d[(t, t)].clone();
            let bad = (t + 1..r)
                .flat_map(|i| (t + 1..c).map(move |j| (i, j)))
                .find(|&(i, j)| !d[(i, j)].is_multiple_of(&piv));
            match bad {
                Some((i, _)) => {
                    d.add_row_multiple(t, i, &Int::one());
                    mu.add_row_multiple(t, i, &Int::one());
                }
                None => break,
            }
        }
        if d[(t, t)].is_negative() {
            d.negate_row(t);
            mu.negate_row(t);
        }
    }
    (d, mu, nu)
}

/// Invariant factors of M (the nonzero diagonal of its Smith form).
pub fn invariant_factors(m: &IntMatrix) -> Vec<Int> {
    snf(m).0.diagonal().into_iter().filter(|x| !x.is_zero()).collect()
}

/// Basis (as rows, in Hermite form) of the saturated lattice {x : M·x = 0}.
pub fn integer_kernel_rows(m: &IntMatrix) -> IntMatrix {
    let (h, u) = hnf_rows(&m.transpose());
    let k = pivot_columns(&h).len();
    let kernel = u.select_rows(&(k..u.rows).collect::<Vec<_>>());
    if kernel.rows == 0 {
        return kernel;
    }
    hermite_basis(&kernel)
}

/// Nonzero rows of the row HNF: a canonical basis of the row lattice.
pub fn hermite_basis(m: &IntMatrix) -> IntMatrix {
    let (h, _) = hnf_rows(m);
    let k = pivot_columns(&h).len();
    h.top_rows(k)
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn det_exact(m: &IntMatrix) -> Result<Int, crate::Error> {
    if m.rows != m.cols {
        return Err(crate::Error::Shape(format!("determinant of a {}x{} matrix", m.rows, m.cols)));
    }
    let n = m.rows;
    if n == 0 {
        return Ok(Int::one());
    }
    let mut a = m.clone();
    let mut sign = Int::one();
    let mut prev = Int::one();
    for k in 0..n - 1 {
        if a[(k, k)].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[(i, k)].is_zero()) else {
                return Ok(Int::zero());
            };
            a.swap_rows(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
                a[(i, j)] = v;
            }
        }
        prev = a[(k, k)].clone();
    }
    Ok(sign * &a[(n - 1, n - 1)])
}

/// |det| for square matrices; shape errors become zero.
pub fn abs_det(m: &IntMatrix) -> Int {
    det_exact(m).map(|d| d.abs()).unwrap_or_else(|_| Int::zero())
}

/// True iff the row lattices of A and B coincide.
pub fn lattice_equal(a: &IntMatrix, b: &IntMatrix) -> bool {
    if a.cols != b.cols {
        return false;
    }
    hermite_basis(a) == hermite_basis(b)
}

/// True iff the row lattice of M is saturated in Z^cols.
pub fn is_cotorsion_free(m: &IntMatrix) -> bool {
    invariant_factors(m).iter().all(|x| x.is_one())
}

/// An integer solution of M·x = b, if one exists.
pub fn solve_integer(m: &IntMatrix, b: &[Int]) -> Option<Vec<Int>> {
    let (d, mu, nu) = snf(m);
    let y = mu.mul_vec(b);
    let mut x = vec![Int::zero(); m.cols];
    for (i, yi) in y.iter().enumerate() {
        let di = if i < m.cols { d[(i, i)].clone() } else { Int::zero() };
        if di.is_zero() {
            if !yi.is_zero() {
                return None;
            }
        } else {
            if !yi.is_multiple_of(&di) {
                return None;
            }
            x[i] = yi / &di;
        }
    }
    Some(nu.mul_vec(&x))
}

/// Exact inverse of a unimodular integer matrix.
pub fn unimodular_inverse(m: &IntMatrix) -> Option<IntMatrix> {
    m.to_rat().inverse()?.to_int()
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;

    fn cofactor_det(m: &[Vec<i64>]) -> i64 {
        let n = m.len();
        if n == 0 {
            return 1;
        }
        if n == 1 {
            return m[0][0];
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<i64>> = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, &x)| x).collect())
                    .collect();
                let s = if j % 2 == 0 { 1 } else { -1 };
                s * m[0][j] * cofactor_det(&minor)
            })
            .sum()
    }

    fn ex41() -> IntMatrix {
        IntMatrix::from_rows(&[
            vec![9, 11, 13, -33, 9, 44, -97],
            vec![10, 12, 14, -36, 10, 48, -106],
            vec![54, 63, 75, -192, 51, 258, -567],
            vec![310, 365, 430, -1105, 295, 1485, -3265],
        ])
    }

    #[test]
    fn hnf_of_quotient_example() {
        let (h, u) = hnf_rows(&ex41());
        let expect = IntMatrix::from_rows(&[
            vec![1, 0, 0, -1, 10, -8, 6],
            vec![0, 1, 0, -1, 27, -25, 23],
            vec![0, 0, 1, -1, 24, -23, 22],
            vec![0, 0, 0, 0, 30, -30, 30],
        ]);
        assert_eq!(h, expect);
        assert_eq!(u.mul(&ex41()), h);
        assert_eq!(det_exact(&u).unwrap().abs(), int(1));
    }

    #[test]
    fn hnf_identity() {
        let (h, u) = hnf_rows(&IntMatrix::identity(3));
        assert_eq!(h, IntMatrix::identity(3));
        assert_eq!(u, IntMatrix::identity(3));
    }

    #[test]
    fn snf_small() {
        let (d, mu, nu) = snf(&IntMatrix::from_rows(&[vec![4, 0], vec![0, 2]]));
        assert_eq!(d, IntMatrix::from_rows(&[vec![2, 0], vec![0, 4]]));
        assert_eq!(mu.mul(&IntMatrix::from_rows(&[vec![4, 0], vec![0, 2]])).mul(&nu), d);
    }

    #[test]
    fn snf_of_quotient_beta() {
        let v = ex41();
        let beta = v.select_cols(&[0, 1, 2, 4]);
        assert_eq!(invariant_factors(&beta), ints(&[1, 1, 1, 30]));
        assert_eq!(invariant_factors(&v), ints(&[1, 1, 1, 30]));
    }

    #[test]
    fn kernel_of_row() {
        let k = integer_kernel_rows(&IntMatrix::from_rows(&[vec![1, 1]]));
        assert!(lattice_equal(&k, &IntMatrix::from_rows(&[vec![1, -1]])));
    }

    #[test]
    fn lattice_comparisons() {
        let q = IntMatrix::from_rows(&[vec![1, 2, 1, 0], vec![0, 1, 1, 1]]);
        let m = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]);
        assert!(lattice_equal(&q, &m.mul(&q)));
        let doubled = IntMatrix::from_rows(&[vec![2, 4, 2, 0], vec![0, 1, 1, 1]]);
        assert!(!lattice_equal(&q, &doubled));
    }

    #[test]
    fn rational_solve_and_inverse() {
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]).to_rat();
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), RatMatrix::identity(2));
        assert!(IntMatrix::from_rows(&[vec![1, 1], vec![2, 2]]).to_rat().inverse().is_none());
    }

    fn small_matrix(max_dim: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(-6i64..=6, c), r)
        })
    }

    proptest! {
        #[test]
        fn hnf_is_unimodular_fixed_point(rows in small_matrix(4)) {
            let m = IntMatrix::from_rows(&rows);
            let (h, u) = hnf_rows(&m);
            prop_assert_eq!(u.mul(&m), h.clone());
            prop_assert_eq!(det_exact(&u).unwrap().abs(), int(1));
            prop_assert_eq!(hnf_rows(&h).0, h);
        }

        #[test]
        fn snf_divisibility(rows in small_matrix(4)) {
            let m = IntMatrix::from_rows(&rows);
            let (d, mu, nu) = snf(&m);
            prop_assert_eq!(mu.mul(&m).mul(&nu), d.clone());
            prop_assert_eq!(det_exact(&mu).unwrap().abs(), int(1));
            prop_assert_eq!(det_exact(&nu).unwrap().abs(), int(1));
            let f = d.diagonal();
            for w in f.windows(2) {
                if !w[1].is_zero() {
                    prop_assert!(w[1].is_multiple_of(&w[0]));
                }
            }
            for i in 0..d.rows() { for j in 0..d.cols() {
                if i != j { prop_assert!(d[(i, j)].is_zero()); }
            }}
        }

        #[test]
        fn snf_product_matches_minor_gcd(rows in small_matrix(3)) {
            // product of the first k invariant factors = gcd of k×k minors
            let m = IntMatrix::from_rows(&rows);
            let f = snf(&m).0.diagonal();
            let k = f.len();
            let rs: Vec<usize> = (0..m.rows()).collect();
            let cs: Vec<usize> = (0..m.cols()).collect();
            let mut g = Int::zero();
            for ri in subsets(&rs, k) { for ci in subsets(&cs, k) {
                g = g.gcd(&det_exact(&m.select_rows(&ri).select_cols(&ci)).unwrap());
            }}
            let p: Int = f.iter().product();
            prop_assert_eq!(p.abs(), g);
        }

        #[test]
        fn kernel_is_saturated(rows in small_matrix(4)) {
            let m = IntMatrix::from_rows(&rows);
            let k = integer_kernel_rows(&m);
            prop_assert_eq!(k.rows(), m.cols() - m.rank());
            if k.rows() > 0 {
                prop_assert!(k.mul(&m.transpose()).is_zero());
                prop_assert!(is_cotorsion_free(&k));
            }
        }

        #[test]
        fn integer_solve_recovers_images(rows in small_matrix(3), x in proptest::collection::vec(-5i64..=5, 4)) {
            let m = IntMatrix::from_rows(&rows);
            let x: Vec<Int> = ints(&x[..m.cols()]);
            let b = m.mul_vec(&x);
            let sol = solve_integer(&m, &b).expect("b is an integer image");
            prop_assert_eq!(m.mul_vec(&sol), b);
        }

        #[test]
        fn bareiss_matches_cofactor(n in 1usize..=4, seed in proptest::collection::vec(-9i64..=9, 16)) {
            let rows: Vec<Vec<i64>> = (0..n).map(|i| seed[i * n..i * n + n].to_vec()).collect();
            prop_assert_eq!(det_exact(&IntMatrix::from_rows(&rows)).unwrap(), int(cofactor_det(&rows)));
        }
    }

    #[test]
    fn integer_solve_detects_obstructions() {
        let m = IntMatrix::from_rows(&[vec![2, 4], vec![0, 3]]);
        assert_eq!(solve_integer(&m, &ints(&[1, 0])), None);
        assert_eq!(solve_integer(&m, &ints(&[2, 3])), Some(ints(&[-1, 1])));
    }

    fn subsets(v: &[usize], k: usize) -> Vec<Vec<usize>> {
        v.iter().copied().combinations(k).collect()
    }
}
