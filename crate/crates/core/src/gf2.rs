//! Linear algebra over GF(2) on word-packed rows, the affine hash family
//! `h(x) = Ax + b`, and sparse parametrizations of hash kernels.
//!
//! Vectors of length at most 64 are `u64`s with coordinate `j` in bit `j`.
//! Matrix rows use the same packing, so `(Ax)_r = parity(row_r & x)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::stats::{wilson_interval, Interval, Z99};

pub const MAX_COLS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum Gf2Error {
    #[error("matrices are limited to {MAX_COLS} columns, got {0}")]
    TooWide(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("enumeration needs k·n + k ≤ {limit}, got {found}")]
    Budget { limit: usize, found: usize },
    #[error("invalid hex row {0:?}")]
    BadHex(String),
    #[error("n and k must be at least 1")]
    BadDims,
}

fn mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn parity(x: u64) -> bool {
    x.count_ones() % 2 == 1
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self, Gf2Error> {
        if cols > MAX_COLS {
            return Err(Gf2Error::TooWide(cols));
        }
        Ok(BitMatrix { rows, cols, data: vec![0; rows] })
    }

    pub fn identity(n: usize) -> Result<Self, Gf2Error> {
        let mut m = Self::zeros(n, n)?;
        for (i, r) in m.data.iter_mut().enumerate() {
            *r = 1 << i;
        }
        Ok(m)
    }

    pub fn from_rows(cols: usize, rows: Vec<u64>) -> Result<Self, Gf2Error> {
        if cols > MAX_COLS {
            return Err(Gf2Error::TooWide(cols));
        }
        if rows.iter().any(|r| r & !mask(cols) != 0) {
            return Err(Gf2Error::Shape(format!("row has bits beyond column {cols}")));
        }
        Ok(BitMatrix { rows: rows.len(), cols, data: rows })
    }

    /// Builds a matrix whose column `j` is `columns[j]` (as a `rows`-bit vector).
    pub fn from_columns(rows: usize, columns: &[u64]) -> Result<Self, Gf2Error> {
        let mut m = Self::zeros(rows, columns.len())?;
        for (j, c) in columns.iter().enumerate() {
            for (i, r) in m.data.iter_mut().enumerate() {
                if c >> i & 1 == 1 {
                    *r |= 1 << j;
                }
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> u64 {
        self.data[i]
    }

    pub fn row_words(&self) -> &[u64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i] >> j & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        if v {
            self.data[i] |= 1 << j;
        } else {
            self.data[i] &= !(1 << j);
        }
    }

    pub fn column(&self, j: usize) -> u64 {
        self.data.iter().enumerate().fold(0, |acc, (i, r)| acc | ((r >> j & 1) << i))
    }

    pub fn column_weight(&self, j: usize) -> usize {
        self.data.iter().filter(|r| *r >> j & 1 == 1).count()
    }

    pub fn ones(&self) -> usize {
        self.data.iter().map(|r| r.count_ones() as usize).sum()
    }

    pub fn mul_vec(&self, x: u64) -> u64 {
        self.data.iter().enumerate().fold(0, |acc, (i, r)| acc | (u64::from(parity(r & x)) << i))
    }

    pub fn mul(&self, other: &BitMatrix) -> Result<BitMatrix, Gf2Error> {
        if self.cols != other.rows {
            return Err(Gf2Error::Shape(format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let data = self
            .data
            .iter()
            .map(|r| (0..self.cols).filter(|j| r >> j & 1 == 1).fold(0, |acc, j| acc ^ other.data[j]))
            .collect();
        Ok(BitMatrix { rows: self.rows, cols: other.cols, data })
    }

    pub fn rank(&self) -> usize {
        eliminate(self).1
    }

    /// Inverse of a square matrix, if it exists.
    pub fn inverse(&self) -> Option<BitMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut inv: Vec<u64> = (0..n).map(|i| 1 << i).collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| a[r] >> col & 1 == 1)?;
            a.swap(col, pivot);
            inv.swap(col, pivot);
            for r in 0..n {
                if r != col && a[r] >> col & 1 == 1 {
                    a[r] ^= a[col];
                    inv[r] ^= inv[col];
                }
            }
        }
        Some(BitMatrix { rows: n, cols: n, data: inv })
    }
}

#[derive(Serialize, Deserialize)]
struct BitMatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<String>,
}

impl Serialize for BitMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BitMatrixJson { rows: self.rows, cols: self.cols, data: self.data.iter().map(|r| format!("{r:#x}")).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = BitMatrixJson::deserialize(d)?;
        let rows = j
            .data
            .iter()
            .map(|h| {
                u64::from_str_radix(h.trim_start_matches("0x"), 16).map_err(|_| Gf2Error::BadHex(h.clone()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        if rows.len() != j.rows {
            return Err(D::Error::custom(format!("expected {} rows, found {}", j.rows, rows.len())));
        }
        BitMatrix::from_rows(j.cols, rows).map_err(D::Error::custom)
    }
}

/// Reduced row echelon form (pivots in increasing column order) and rank.
pub fn eliminate(m: &BitMatrix) -> (BitMatrix, usize) {
    let mut rows = m.data.clone();
    let mut rank = 0;
    for col in 0..m.cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r] >> col & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row >> col & 1 == 1 {
                *row ^= pivot;
            }
        }
        rank += 1;
    }
    (BitMatrix { rows: m.rows, cols: m.cols, data: rows }, rank)
}

fn pivot_columns(rref: &BitMatrix, rank: usize) -> Vec<usize> {
    rref.data[..rank].iter().map(|r| r.trailing_zeros() as usize).collect()
}

/// Basis of `ker A` as the columns of an `n × d` matrix, one vector per free
/// column of the echelon form.
pub fn kernel_basis(a: &BitMatrix) -> BitMatrix {
    let (rref, rank) = eliminate(a);
    let pivots = pivot_columns(&rref, rank);
    let basis: Vec<u64> = (0..a.cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = 1u64 << free;
            for (r, &p) in pivots.iter().enumerate() {
                if rref.data[r] >> free & 1 == 1 {
                    v |= 1 << p;
                }
            }
            v
        })
        .collect();
    BitMatrix::from_columns(a.cols, &basis).expect("at most 64 columns")
}

/// Some `x` with `Ax = y`, or `None` if the system is inconsistent.
pub fn solve(a: &BitMatrix, y: u64) -> Option<u64> {
    let mut rows: Vec<(u64, bool)> = a.data.iter().enumerate().map(|(i, r)| (*r, y >> i & 1 == 1)).collect();
    let mut rank = 0;
    for col in 0..a.cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r].0 >> col & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row.0 >> col & 1 == 1 {
                row.0 ^= pivot.0;
                row.1 ^= pivot.1;
            }
        }
        rank += 1;
    }
    if rows[rank..].iter().any(|r| r.1) {
        return None;
    }
    Some(rows[..rank].iter().filter(|r| r.1).fold(0, |x, r| x | 1 << r.0.trailing_zeros()))
}

/// `h(x) = Ax + b` from `{0,1}^n` to `{0,1}^k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineMap {
    pub a: BitMatrix,
    pub b: u64,
}

impl AffineMap {
    pub fn new(a: BitMatrix, b: u64) -> Result<Self, Gf2Error> {
        if b & !mask(a.rows) != 0 {
            return Err(Gf2Error::Shape(format!("offset has bits beyond row {}", a.rows)));
        }
        Ok(AffineMap { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.cols
    }

    pub fn k(&self) -> usize {
        self.a.rows
    }

    pub fn eval(&self, x: u64) -> u64 {
        self.a.mul_vec(x) ^ self.b
    }

    /// `dim ker A` when `ker h` is non-empty.
    pub fn kernel_dim(&self) -> Option<usize> {
        solve(&self.a, self.b).map(|_| self.a.cols - self.a.rank())
    }
}

/// `g(i) = Ci + p`, an injective map onto `ker h`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelParam {
    /// `n × d`.
    pub c: BitMatrix,
    pub p: u64,
    pub d: usize,
}

impl KernelParam {
    pub fn n(&self) -> usize {
        self.c.rows
    }

    pub fn eval(&self, i: u64) -> u64 {
        self.c.mul_vec(i) ^ self.p
    }

    pub fn max_column_weight(&self) -> usize {
        (0..self.d).map(|j| self.c.column_weight(j)).max().unwrap_or(0)
    }
}

/// Parametrizes `ker h`, or returns `None` when it is empty. The basis matrix
/// is multiplied by the inverse of its first `d` independent rows, so each
/// column has a single one among those rows and at most `n − d + 1` overall.
pub fn parametrize_kernel(h: &AffineMap) -> Option<KernelParam> {
    let p = solve(&h.a, h.b)?;
    let raw = kernel_basis(&h.a);
    let d = raw.cols;
    let mut chosen = Vec::with_capacity(d);
    let mut span: Vec<u64> = Vec::with_capacity(d);
    for i in 0..raw.rows {
        let mut r = raw.data[i];
        for s in &span {
            if r & (1 << s.trailing_zeros()) != 0 {
                r ^= s;
            }
        }
        if r != 0 {
            let lead = 1 << r.trailing_zeros();
            for s in span.iter_mut() {
                if *s & lead != 0 {
                    *s ^= r;
                }
            }
            span.push(r);
            chosen.push(i);
            if chosen.len() == d {
                break;
            }
        }
    }
    let square = BitMatrix::from_rows(d, chosen.iter().map(|&i| raw.data[i]).collect()).expect("d ≤ 64");
    let q = square.inverse().expect("rows chosen independent");
    let c = raw.mul(&q).expect("shapes agree");
    Some(KernelParam { c, p, d })
}

/// Uniform `(A, b)`: the rows of `A` first, then `b`.
pub fn sample_hash<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<AffineMap, Gf2Error> {
    if n == 0 || k == 0 {
        return Err(Gf2Error::BadDims);
    }
    if n > MAX_COLS || k > MAX_COLS {
        return Err(Gf2Error::TooWide(n.max(k)));
    }
    let rows = (0..k).map(|_| rng.random::<u64>() & mask(n)).collect();
    let a = BitMatrix::from_rows(n, rows)?;
    let b = rng.random::<u64>() & mask(k);
    AffineMap::new(a, b)
}

/// Every `h_{A,b}` in `H_{n,k}`, `A` row-major in the high bits of the index.
pub fn all_hashes(n: usize, k: usize) -> impl Iterator<Item = AffineMap> {
    let total = 1u64 << (k * n + k);
    (0..total).map(move |code| {
        let b = code & mask(k);
        let rows = (0..k).map(|r| (code >> (k + r * n)) & mask(n)).collect();
        AffineMap { a: BitMatrix { rows: k, cols: n, data: rows }, b }
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HashFamily {
    Affine,
    /// `b` fixed to zero.
    Linear,
}

pub const ENUMERATION_LIMIT: usize = 20;

/// Exact check that `H_{n,k}` is pairwise independent.
pub fn pairwise_independence_check(n: usize, k: usize) -> Result<bool, Gf2Error> {
    family_pairwise_independent(n, k, HashFamily::Affine)
}

/// Exact pairwise-independence check. The `k` output bits of a random map
/// are independent single-row maps `x ↦ a·x + β`, so both conditions hold
/// for `k` rows iff they hold for one; the single-row probabilities are
/// counted over every row. For the affine family `β` is eliminated: the
/// pair condition counts rows with `a·(x₁ ⊕ x₂) = y₁ ⊕ y₂`.
pub fn family_pairwise_independent(n: usize, k: usize, family: HashFamily) -> Result<bool, Gf2Error> {
    if n == 0 || k == 0 {
        return Err(Gf2Error::BadDims);
    }
    let found = k * n + k;
    if found > ENUMERATION_LIMIT {
        return Err(Gf2Error::Budget { limit: ENUMERATION_LIMIT, found });
    }
    let size = 1u64 << n;
    let offsets: &[u64] = match family {
        HashFamily::Affine => &[0, 1],
        HashFamily::Linear => &[0],
    };
    let rows_total = size * offsets.len() as u64;
    // P(a·x + β = 0) = 1/2 for every x
    let marginal = (0..size).into_par_iter().all(|x| {
        let zeros: u64 =
            (0..size).map(|a| offsets.iter().filter(|&&beta| parity(a & x) as u64 == beta).count() as u64).sum();
        2 * zeros == rows_total
    });
    if !marginal {
        return Ok(false);
    }
    let pairs = match family {
        HashFamily::Affine => (1..size).into_par_iter().all(|delta| {
            let zeros = (0..size).filter(|a| !parity(a & delta)).count() as u64;
            2 * zeros == size
        }),
        HashFamily::Linear => (0..size).into_par_iter().all(|x1| {
            (0..size).filter(|&x2| x2 != x1).all(|x2| {
                let mut counts = [0u64; 4];
                for a in 0..size {
                    counts[(usize::from(parity(a & x1)) << 1) | usize::from(parity(a & x2))] += 1;
                }
                counts.iter().all(|&c| 4 * c == rows_total)
            })
        }),
    };
    Ok(pairs)
}

/// Brute force over every map, every point and every value. Only for tiny
/// families.
pub fn brute_force_pairwise(n: usize, k: usize, family: HashFamily) -> bool {
    let maps: Vec<AffineMap> =
        all_hashes(n, k).filter(|h| family == HashFamily::Affine || h.b == 0).collect();
    let total = maps.len() as u64;
    let ys = 1u64 << k;
    let xs = 1u64 << n;
    for x in 0..xs {
        for y in 0..ys {
            let hits = maps.iter().filter(|h| h.eval(x) == y).count() as u64;
            if hits * ys != total {
                return false;
            }
        }
    }
    for x1 in 0..xs {
        for x2 in (0..xs).filter(|&x2| x2 != x1) {
            for y1 in 0..ys {
                for y2 in 0..ys {
                    let hits = maps.iter().filter(|h| h.eval(x1) == y1 && h.eval(x2) == y2).count() as u64;
                    if hits * ys * ys != total {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Exact count of hashes in `H_{n,k}` whose kernel meets `set` in exactly
/// one point, with the family size. Rows are independent, so the set of
/// elements surviving in the kernel is tracked through a distribution over
/// subsets, one row at a time.
pub fn unique_intersection_count(n: usize, k: usize, set: &[u64]) -> (u128, u128) {
    assert!(set.len() <= 24, "set too large for subset tracking");
    let mut row_masks: HashMap<u32, u128> = HashMap::new();
    for a in 0..1u64 << n {
        for beta in [false, true] {
            let m = set
                .iter()
                .enumerate()
                .filter(|(_, &x)| parity(a & x) == beta)
                .fold(0u32, |acc, (e, _)| acc | 1 << e);
            *row_masks.entry(m).or_default() += 1;
        }
    }
    let full = (1u32 << set.len()) - 1;
    let mut dist: HashMap<u32, u128> = HashMap::from([(full, 1)]);
    for _ in 0..k {
        let mut next: HashMap<u32, u128> = HashMap::new();
        for (&alive, &count) in &dist {
            for (&row, &ways) in &row_masks {
                *next.entry(alive & row).or_default() += count * ways;
            }
        }
        dist = next;
    }
    let unique = dist.iter().filter(|(m, _)| m.count_ones() == 1).map(|(_, c)| c).sum();
    (unique, 1u128 << ((n + 1) * k))
}

/// Outcome of one sampled hash: `None` for an empty kernel.
pub type KernelDim = Option<usize>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDimDistribution {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    pub empty: u64,
    /// Count per kernel dimension `0..=n`.
    pub counts: Vec<u64>,
}

impl KernelDimDistribution {
    /// Trials with a non-empty kernel of dimension at least `d`.
    pub fn at_least(&self, d: usize) -> u64 {
        self.counts.iter().skip(d).sum()
    }

    pub fn tail_interval(&self, d: usize) -> Interval {
        wilson_interval(self.at_least(d), self.trials, Z99)
    }

    /// `d,count,frequency,ci_low,ci_high`; the empty kernel is `d = empty`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,count,frequency,ci_low,ci_high\n");
        let rows = std::iter::once(("empty".to_string(), self.empty))
            .chain(self.counts.iter().enumerate().map(|(d, &c)| (d.to_string(), c)));
        for (label, count) in rows {
            let ci = wilson_interval(count, self.trials, Z99);
            let freq = count as f64 / self.trials as f64;
            writeln!(out, "{label},{count},{freq},{},{}", ci.low, ci.high).unwrap();
        }
        out
    }
}

/// Seeded per-trial generator: stream `trial` of the seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn kernel_dim_distribution(n: usize, k: usize, trials: u64, seed: u64) -> Result<KernelDimDistribution, Gf2Error> {
    let dims: Vec<KernelDim> = (0..trials)
        .into_par_iter()
        .map(|t| sample_hash(n, k, &mut trial_rng(seed, t)).map(|h| h.kernel_dim()))
        .collect::<Result<_, _>>()?;
    let mut counts = vec![0u64; n + 1];
    let mut empty = 0;
    for d in dims {
        match d {
            Some(d) => counts[d] += 1,
            None => empty += 1,
        }
    }
    Ok(KernelDimDistribution { n, k, trials, seed, empty, counts })
}

/// Exact law of `dim ker h` for uniform `h ∈ H_{n,k}`: the rank of `A`
/// grows with each row unless the row falls in the current span, and the
/// kernel is non-empty with probability `2^{rank − k}`.
pub fn exact_kernel_dim_distribution(n: usize, k: usize) -> BTreeMap<KernelDim, f64> {
    let mut rank = vec![0.0; n.min(k) + 1];
    rank[0] = 1.0;
    for _ in 0..k {
        let mut next = vec![0.0; rank.len()];
        for (r, &p) in rank.iter().enumerate() {
            let stay = 0.5f64.powi((n - r) as i32);
            next[r] += p * stay;
            if r + 1 < rank.len() {
                next[r + 1] += p * (1.0 - stay);
            }
        }
        rank = next;
    }
    let mut out = BTreeMap::new();
    for (r, &p) in rank.iter().enumerate() {
        let consistent = 0.5f64.powi((k - r) as i32);
        *out.entry(Some(n - r)).or_insert(0.0) += p * consistent;
        *out.entry(None).or_insert(0.0) += p * (1.0 - consistent);
    }
    out
}
