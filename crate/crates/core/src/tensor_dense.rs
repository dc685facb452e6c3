//! Totally symmetric spacetime tensors on canonical multi-indices.
//!
//! A rank-`n` tensor stores one entry per multiset of indices, i.e. per
//! count vector `c = (c0, c1, c2, c3)` with `c0 + c1 + c2 + c3 = n`.
//! Entries are ordered by `c0` descending, then `c1`, then `c2`.
//!
//! The metric is `diag(-1, 1, 1, 1)` with upper and lower components equal.
//! Contractions between two tensors assume one of them carries lower
//! indices; the storage itself is variance-agnostic.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{factorial, multinomial};
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

pub type Counts = [usize; 4];

/// The fixed Minkowski metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Metric;

impl Metric {
    /// `g_{aa}` (equal to `g^{aa}`).
    pub fn diag(a: usize) -> i64 {
        if a == 0 {
            -1
        } else {
            1
        }
    }

    pub fn component<T: Scalar>(a: usize, b: usize) -> T {
        if a == b {
            T::from_i64(Self::diag(a))
        } else {
            T::zero()
        }
    }

    pub fn tensor<T: Scalar>() -> DenseSymTensor<T> {
        DenseSymTensor::from_fn(2, |c| {
            for a in 0..4 {
                if c[a] == 2 {
                    return T::from_i64(Self::diag(a));
                }
            }
            T::zero()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Contravariant,
    Covariant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourVector<T> {
    pub c: [T; 4],
    pub variance: Variance,
}

impl<T: Scalar> FourVector<T> {
    pub fn upper(c: [T; 4]) -> Self {
        FourVector {
            c,
            variance: Variance::Contravariant,
        }
    }

    pub fn lower(c: [T; 4]) -> Self {
        FourVector {
            c,
            variance: Variance::Covariant,
        }
    }

    fn flipped(&self, variance: Variance) -> Self {
        let mut c = self.c.clone();
        c[0] = -c[0].clone();
        FourVector { c, variance }
    }

    /// Contravariant components.
    pub fn up(&self) -> [T; 4] {
        match self.variance {
            Variance::Contravariant => self.c.clone(),
            Variance::Covariant => self.flipped(Variance::Contravariant).c,
        }
    }

    /// Covariant components.
    pub fn down(&self) -> [T; 4] {
        match self.variance {
            Variance::Covariant => self.c.clone(),
            Variance::Contravariant => self.flipped(Variance::Covariant).c,
        }
    }

    pub fn to_upper(&self) -> Self {
        Self::upper(self.up())
    }

    pub fn to_lower(&self) -> Self {
        Self::lower(self.down())
    }

    /// `μ^α μ_α`
    pub fn norm_sq(&self) -> T {
        let c = &self.c;
        -(c[0].clone() * c[0].clone())
            + c[1].clone() * c[1].clone()
            + c[2].clone() * c[2].clone()
            + c[3].clone() * c[3].clone()
    }

    pub fn is_future_timelike(&self) -> bool {
        self.norm_sq() < T::zero() && self.up()[0] > T::zero()
    }

    /// `γ = √(−μ^α μ_α)` for a future-directed timelike vector.
    pub fn gamma(&self) -> Result<T> {
        if !self.is_future_timelike() {
            return Err(Error::Spacelike);
        }
        (-self.norm_sq()).try_sqrt().ok_or(Error::IrrationalGamma)
    }

    /// Unit vector `u^α = μ^α / γ`.
    pub fn velocity(&self) -> Result<[T; 4]> {
        let g = self.gamma()?;
        let up = self.up();
        Ok([
            up[0].clone() / g.clone(),
            up[1].clone() / g.clone(),
            up[2].clone() / g.clone(),
            up[3].clone() / g,
        ])
    }

    pub fn as_tensor(&self) -> DenseSymTensor<T> {
        DenseSymTensor::from_fn(1, |c| {
            let a = c.iter().position(|&x| x == 1).unwrap();
            self.c[a].clone()
        })
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> FourVector<U> {
        FourVector {
            c: [f(&self.c[0]), f(&self.c[1]), f(&self.c[2]), f(&self.c[3])],
            variance: self.variance,
        }
    }
}

fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn choose3(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Number of stored entries, `C(n+3, 3)`.
pub fn entry_count(n: usize) -> usize {
    choose3(n + 3)
}

/// Position of count vector `c` (with `|c| = n`) in canonical order.
pub fn position(n: usize, c: &Counts) -> usize {
    let r0 = n - c[0];
    let r1 = r0 - c[1];
    choose3(r0 + 2) + choose2(r1 + 1) + c[3]
}

/// All count vectors of total `n`, in canonical order.
pub fn all_counts(n: usize) -> Vec<Counts> {
    let mut out = Vec::with_capacity(entry_count(n));
    for c0 in (0..=n).rev() {
        for c1 in (0..=n - c0).rev() {
            for c2 in (0..=n - c0 - c1).rev() {
                out.push([c0, c1, c2, n - c0 - c1 - c2]);
            }
        }
    }
    out
}

pub fn counts_of(idx: &[usize]) -> Counts {
    let mut c = [0; 4];
    for &i in idx {
        c[i] += 1;
    }
    c
}

/// Sorted multi-index for a count vector.
pub fn index_of(c: &Counts) -> Vec<usize> {
    let mut v = Vec::with_capacity(c.iter().sum());
    for (a, &k) in c.iter().enumerate() {
        v.extend(std::iter::repeat(a).take(k));
    }
    v
}

/// Number of distinct orderings of the multi-index `c`.
pub fn multiplicity(c: &Counts) -> Rational {
    Rational::from_integer(multinomial(c))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSymTensor<T> {
    rank: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseSymTensor<T> {
    pub fn zeros(rank: usize) -> Self {
        DenseSymTensor {
            rank,
            data: vec![T::zero(); entry_count(rank)],
        }
    }

    pub fn scalar(v: T) -> Self {
        DenseSymTensor {
            rank: 0,
            data: vec![v],
        }
    }

    pub fn from_fn(rank: usize, mut f: impl FnMut(&Counts) -> T) -> Self {
        DenseSymTensor {
            rank,
            data: all_counts(rank).iter().map(|c| f(c)).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn at(&self, c: &Counts) -> &T {
        &self.data[position(self.rank, c)]
    }

    pub fn set(&mut self, c: &Counts, v: T) {
        let p = position(self.rank, c);
        self.data[p] = v;
    }

    /// Component for an arbitrary (unsorted) multi-index.
    pub fn get(&self, idx: &[usize]) -> &T {
        assert_eq!(idx.len(), self.rank, "index length must equal rank");
        self.at(&counts_of(idx))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Counts, &T)> {
        all_counts(self.rank).into_iter().zip(self.data.iter())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> DenseSymTensor<U> {
        DenseSymTensor {
            rank: self.rank,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> DenseSymTensor<f64> {
        self.map(|v| v.to_f64())
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|v| v.clone() * s.clone())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_rank(other)?;
        Ok(DenseSymTensor {
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_rank(other)?;
        Ok(DenseSymTensor {
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    fn same_rank(&self, other: &Self) -> Result<()> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                got: other.rank,
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Lowers (or raises) every index with the diagonal metric.
    pub fn flip_variance(&self) -> Self {
        DenseSymTensor::from_fn(self.rank, |c| {
            let v = self.at(c).clone();
            if c[0] % 2 == 1 {
                -v
            } else {
                v
            }
        })
    }

    /// Symmetrizes a full `4^n` component array (slot 0 most significant).
    pub fn symmetrize(rank: usize, raw: &[T]) -> Result<Self> {
        if raw.len() != 4usize.pow(rank as u32) {
            return Err(Error::InvalidArgument(format!(
                "raw array of length {} does not match rank {rank}",
                raw.len()
            )));
        }
        let mut acc = Self::zeros(rank);
        let mut idx = vec![0usize; rank];
        for v in raw {
            let p = position(rank, &counts_of(&idx));
            acc.data[p] = acc.data[p].clone() + v.clone();
            increment(&mut idx);
        }
        for (c, slot) in all_counts(rank).iter().zip(acc.data.iter_mut()) {
            let m = T::from_rational(&multiplicity(c));
            *slot = slot.clone() / m;
        }
        Ok(acc)
    }

    /// The full `4^n` component array.
    pub fn to_raw(&self) -> Vec<T> {
        let total = 4usize.pow(self.rank as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.rank];
        for _ in 0..total {
            out.push(self.get(&idx).clone());
            increment(&mut idx);
        }
        out
    }

    /// Contraction of the last two slots with `g`.
    pub fn trace_pair(&self) -> Result<Self> {
        if self.rank < 2 {
            return Err(Error::RankTooSmall {
                op: "trace_pair",
                rank: self.rank,
            });
        }
        let n = self.rank - 2;
        Ok(DenseSymTensor::from_fn(n, |c| {
            let mut acc = T::zero();
            for a in 0..4 {
                let mut d = *c;
                d[a] += 2;
                let v = self.at(&d).clone();
                acc = if a == 0 { acc - v } else { acc + v };
            }
            acc
        }))
    }

    /// `r`-fold [`trace_pair`](Self::trace_pair).
    pub fn trace_n(&self, r: usize) -> Result<Self> {
        let mut t = self.clone();
        for _ in 0..r {
            t = t.trace_pair()?;
        }
        Ok(t)
    }

    /// Contraction of the last slot with the covariant components of `mu`.
    pub fn contract_mu(&self, mu: &FourVector<T>) -> Result<Self> {
        if self.rank < 1 {
            return Err(Error::RankTooSmall {
                op: "contract_mu",
                rank: 0,
            });
        }
        let m = mu.down();
        Ok(DenseSymTensor::from_fn(self.rank - 1, |c| {
            let mut acc = T::zero();
            for (a, ma) in m.iter().enumerate() {
                let mut d = *c;
                d[a] += 1;
                acc = acc + ma.clone() * self.at(&d).clone();
            }
            acc
        }))
    }

    /// Full contraction of the last `m` slots with the symmetric tensor `s`,
    /// whose components are used as given (lower indices).
    pub fn contract_sym(&self, s: &DenseSymTensor<T>) -> Result<Self> {
        let m = s.rank;
        if m > self.rank {
            return Err(Error::RankTooSmall {
                op: "contract_sym",
                rank: self.rank,
            });
        }
        let weights: Vec<(Counts, T)> = s
            .iter()
            .filter(|(_, v)| **v != T::zero())
            .map(|(d, v)| (d, v.clone() * T::from_rational(&multiplicity(&d))))
            .collect();
        Ok(DenseSymTensor::from_fn(self.rank - m, |c| {
            let mut acc = T::zero();
            for (d, w) in &weights {
                let e = [c[0] + d[0], c[1] + d[1], c[2] + d[2], c[3] + d[3]];
                acc = acc + w.clone() * self.at(&e).clone();
            }
            acc
        }))
    }

    /// Symmetrized tensor product.
    pub fn sym_product(&self, other: &Self) -> Self {
        let n = self.rank + other.rank;
        DenseSymTensor::from_fn(n, |c| {
            let mut acc = T::zero();
            for a in all_counts(self.rank) {
                if (0..4).all(|i| a[i] <= c[i]) {
                    let b = [c[0] - a[0], c[1] - a[1], c[2] - a[2], c[3] - a[3]];
                    let w = multiplicity(&a) * multiplicity(&b) / multiplicity(c);
                    acc = acc + T::from_rational(&w) * self.at(&a).clone() * other.at(&b).clone();
                }
            }
            acc
        })
    }

    /// Applies `Λ^a_b` to every slot.
    pub fn transform(&self, lambda: &[[T; 4]; 4]) -> Self {
        let mut raw = self.to_raw();
        let n = self.rank;
        for slot in 0..n {
            let stride = 4usize.pow((n - 1 - slot) as u32);
            let mut next = vec![T::zero(); raw.len()];
            for (i, out) in next.iter_mut().enumerate() {
                let a = (i / stride) % 4;
                let base = i - a * stride;
                let mut acc = T::zero();
                for (b, lab) in lambda[a].iter().enumerate() {
                    acc = acc + lab.clone() * raw[base + b * stride].clone();
                }
                *out = acc;
            }
            raw = next;
        }
        DenseSymTensor::symmetrize(n, &raw).expect("raw length matches rank")
    }

    /// `Y^n_s = sym(g^s ⊗ v^{n-2s})` for the components `v` of a vector,
    /// with `g` the diagonal metric.
    pub fn gmu_basis(n: usize, s: usize, v: &[T; 4]) -> Result<Self> {
        if 2 * s > n {
            return Err(Error::InvalidArgument(format!(
                "metric count {s} out of range for rank {n}"
            )));
        }
        let lead = Rational::new(
            factorial(s as u64) * num_bigint::BigInt::from(2).pow(s as u32) * factorial((n - 2 * s) as u64),
            factorial(n as u64),
        );
        let lead = T::from_rational(&lead);
        let mut vpow: Vec<Vec<T>> = Vec::with_capacity(4);
        for va in v {
            let mut p = vec![T::one()];
            for k in 1..=n {
                let prev = p[k - 1].clone();
                p.push(prev * va.clone());
            }
            vpow.push(p);
        }
        let splits = all_counts(s);
        Ok(DenseSymTensor::from_fn(n, |c| {
            let mut acc = T::zero();
            for k in &splits {
                if (0..4).any(|a| 2 * k[a] > c[a]) {
                    continue;
                }
                let mut w = Rational::from_integer(num_bigint::BigInt::from(1));
                let mut term = T::one();
                for a in 0..4 {
                    w *= Rational::new(
                        factorial(c[a] as u64),
                        factorial(k[a] as u64)
                            * num_bigint::BigInt::from(2).pow(k[a] as u32)
                            * factorial((c[a] - 2 * k[a]) as u64),
                    );
                    if a == 0 && k[0] % 2 == 1 {
                        w = -w;
                    }
                    term = term * vpow[a][c[a] - 2 * k[a]].clone();
                }
                acc = acc + T::from_rational(&w) * term;
            }
            acc * lead.clone()
        }))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let comps: Vec<serde_json::Value> = self
            .iter()
            .map(|(c, v)| serde_json::json!({ "idx": index_of(&c), "value": v.to_json() }))
            .collect();
        serde_json::json!({ "rank": self.rank, "components": comps })
    }
}

impl DenseSymTensor<f64> {
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = || Error::InvalidArgument("malformed tensor JSON".into());
        let rank = v["rank"].as_u64().ok_or_else(bad)? as usize;
        let mut t = Self::zeros(rank);
        for comp in v["components"].as_array().ok_or_else(bad)? {
            let idx: Vec<usize> = comp["idx"]
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|x| x.as_u64().map(|x| x as usize).filter(|&x| x < 4).ok_or_else(bad))
                .collect::<Result<_>>()?;
            if idx.len() != rank {
                return Err(bad());
            }
            t.set(&counts_of(&idx), comp["value"].as_f64().ok_or_else(bad)?);
        }
        Ok(t)
    }
}

fn increment(idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < 4 {
            return;
        }
        *slot = 0;
    }
}
