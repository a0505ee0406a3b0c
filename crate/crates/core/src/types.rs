//! Labels, permutations, partial matchings and attribute databases.
//!
//! Node indices are 0-based everywhere in the library.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};

/// Community labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some(pos) = labels.iter().position(|&l| l != 1 && l != -1) {
            return Err(invalid(format!(
                "label at position {pos} is {}, expected -1 or +1",
                labels[pos]
            )));
        }
        Ok(Self(labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&l| -l).collect())
    }

    /// Labels as reals, handy for matrix-vector products.
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&l| f64::from(l)).collect()
    }

    /// Number of +1 entries.
    pub fn count_positive(&self) -> usize {
        self.0.iter().filter(|&&l| l == 1).count()
    }

    /// Relabel through a permutation: entry `pi(i)` of the result is entry `i`
    /// of `self`, i.e. the result is `self ∘ pi⁻¹`.
    pub fn permuted(&self, pi: &Permutation) -> Result<Self> {
        check_len(self.len(), pi.len())?;
        let mut out = vec![0i8; self.len()];
        for (i, &l) in self.0.iter().enumerate() {
            out[pi.apply(i)] = l;
        }
        Ok(Self(out))
    }
}

impl TryFrom<Vec<i8>> for LabelVector {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LabelVector> for Vec<i8> {
    fn from(l: LabelVector) -> Self {
        l.0
    }
}

/// A bijection on `{0, .., n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || seen[m] {
                return Err(invalid(format!("mapping is not a bijection on 0..{n}")));
            }
            seen[m] = true;
        }
        Ok(Self(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Ok(Self(other.0.iter().map(|&j| self.0[j]).collect()))
    }

    /// The restriction of this permutation to `domain`.
    pub fn restrict(&self, domain: &[usize]) -> PartialMatching {
        PartialMatching::from_pairs_unchecked(
            self.len(),
            domain.iter().map(|&i| (i, self.0[i])).collect(),
        )
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// An injective map from a subset `M ⊆ [n]` of graph-1 nodes into graph-2 nodes.
///
/// Pairs are kept sorted by source node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialMatching {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl PartialMatching {
    pub fn new(n: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        let mut src = vec![false; n];
        let mut dst = vec![false; n];
        for &(i, j) in &pairs {
            if i >= n || j >= n {
                return Err(invalid(format!("pair ({i}, {j}) out of range for n={n}")));
            }
            if src[i] || dst[j] {
                return Err(invalid(format!("pair ({i}, {j}) breaks injectivity")));
            }
            src[i] = true;
            dst[j] = true;
        }
        Ok(Self { n, pairs })
    }

    pub(crate) fn from_pairs_unchecked(n: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        Self { n, pairs }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            pairs: Vec::new(),
        }
    }

    /// Size of the node universe.
    pub fn universe(&self) -> usize {
        self.n
    }

    /// Number of matched nodes.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn domain(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(i, _)| i).collect()
    }

    pub fn image(&self) -> Vec<usize> {
        let mut img: Vec<usize> = self.pairs.iter().map(|&(_, j)| j).collect();
        img.sort_unstable();
        img
    }

    /// Lookup table `source -> Some(target)`.
    pub fn as_lookup(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n];
        for &(i, j) in &self.pairs {
            out[i] = Some(j);
        }
        out
    }

    /// Number of pairs that disagree with `truth`.
    pub fn mismatches(&self, truth: &Permutation) -> usize {
        self.pairs
            .iter()
            .filter(|&&(i, j)| truth.apply(i) != j)
            .count()
    }

    /// Converts to a permutation when the matching is total.
    pub fn to_permutation(&self) -> Result<Permutation> {
        if self.pairs.len() != self.n {
            return Err(invalid(format!(
                "matching covers {} of {} nodes",
                self.pairs.len(),
                self.n
            )));
        }
        Permutation::new(self.pairs.iter().map(|&(_, j)| j).collect())
    }
}

/// An `n × d` matrix of node attribute vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDatabase {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl AttributeDatabase {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        check_len(n * d, data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite attribute in row {}",
                pos / d.max(1)
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            check_len(d, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0, and a d = 0 database still has n empty rows
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sub-database made of the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n: idx.len(),
            d: self.d,
            data,
        }
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            d: self.d,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Row `i` of the result is row `i` plus `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        check_len(self.d, shift.len())?;
        let mut data = self.data.clone();
        if self.d > 0 {
            for row in data.chunks_exact_mut(self.d) {
                for (v, s) in row.iter_mut().zip(shift) {
                    *v += s;
                }
            }
        }
        Ok(Self {
            n: self.n,
            d: self.d,
            data,
        })
    }

    pub(crate) fn from_raw(n: usize, d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(n * d, data.len());
        Self { n, d, data }
    }
}

/// Permutes rows so that row `pi(i)` of the output is row `i` of the input,
/// i.e. output row `j` is input row `pi⁻¹(j)`.
pub fn apply_permutation(db: &AttributeDatabase, pi: &Permutation) -> Result<AttributeDatabase> {
    check_len(db.n(), pi.len())?;
    let mut data = vec![0.0; db.data.len()];
    let d = db.d();
    for i in 0..db.n() {
        let j = pi.apply(i);
        data[j * d..(j + 1) * d].copy_from_slice(db.row(i));
    }
    Ok(AttributeDatabase::from_raw(db.n(), d, data))
}

/// Fraction of positions where two maps agree.
pub fn overlap<T: PartialEq>(f: &[T], g: &[T]) -> Result<f64> {
    check_len(f.len(), g.len())?;
    if f.is_empty() {
        return Err(invalid("overlap of empty sequences"));
    }
    let agree = f.iter().zip(g).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / f.len() as f64)
}

/// Agreement of two labelings up to a global sign flip.
pub fn label_overlap_up_to_sign(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    let direct = overlap(a.as_slice(), b.as_slice())?;
    // overlap(-a, b) = 1 - overlap(a, b) for ±1 labels
    Ok(direct.max(1.0 - direct))
}

/// Squared Euclidean distance.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
