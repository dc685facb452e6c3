//! Brute-force reference computations on full `4^n` component arrays.
//!
//! Nothing here goes through the canonical-storage arithmetic of
//! [`crate::tensor_dense`]; `DenseSymTensor` is used only as a container to
//! read inputs and compare outputs.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f_family::FFamilyElement;
use crate::scalar::{Rational, Scalar};
use crate::scalar_expr::{FunctionRegistry, ScalarExpr};
use crate::tensor_dense::{DenseSymTensor, FourVector};

pub const MAX_ORACLE_RANK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    Rational,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub max_rank: usize,
    pub arithmetic: Arithmetic,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_rank: 6,
            arithmetic: Arithmetic::Rational,
            fd_step: 1e-4,
            seed: 0x5eed,
        }
    }
}

impl OracleConfig {
    pub fn new(max_rank: usize, arithmetic: Arithmetic, fd_step: f64, seed: u64) -> Result<Self> {
        if max_rank > MAX_ORACLE_RANK {
            return Err(Error::RankLimit {
                rank: max_rank,
                limit: MAX_ORACLE_RANK,
            });
        }
        if fd_step <= 0.0 {
            return Err(Error::StepDegeneracy);
        }
        Ok(OracleConfig {
            max_rank,
            arithmetic,
            fd_step,
            seed,
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn guard(&self, rank: usize) -> Result<()> {
        if rank > self.max_rank {
            return Err(Error::RankLimit {
                rank,
                limit: self.max_rank,
            });
        }
        Ok(())
    }
}

/// A tensor stored as all `4^n` components, slot 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor<T> {
    pub rank: usize,
    pub data: Vec<T>,
}

fn digits(mut flat: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for slot in (0..n).rev() {
        d[slot] = flat % 4;
        flat /= 4;
    }
    d
}

fn flat(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * 4 + i)
}

fn metric<T: Scalar>(a: usize, b: usize) -> T {
    match (a == b, a) {
        (true, 0) => -T::one(),
        (true, _) => T::one(),
        _ => T::zero(),
    }
}

/// Every ordering of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn factorial_usize(n: usize) -> usize {
    (1..=n).product()
}

impl<T: Scalar> RawTensor<T> {
    pub fn zeros(rank: usize) -> Self {
        RawTensor {
            rank,
            data: vec![T::zero(); 4usize.pow(rank as u32)],
        }
    }

    pub fn from_fn(rank: usize, f: impl Fn(&[usize]) -> T) -> Self {
        let data = (0..4usize.pow(rank as u32)).map(|i| f(&digits(i, rank))).collect();
        RawTensor { rank, data }
    }

    pub fn at(&self, idx: &[usize]) -> &T {
        &self.data[flat(idx)]
    }

    /// Expands a canonical tensor component by component.
    pub fn from_sym(t: &DenseSymTensor<T>) -> Self {
        RawTensor::from_fn(t.rank(), |idx| t.get(idx).clone())
    }

    /// Largest `|self − t|` over all components.
    pub fn max_diff(&self, t: &DenseSymTensor<T>) -> f64 {
        if t.rank() != self.rank {
            return f64::INFINITY;
        }
        (0..self.data.len())
            .map(|i| {
                let idx = digits(i, self.rank);
                (self.data[i].clone() - t.get(&idx).clone()).abs_val().to_f64()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_diff_raw(&self, other: &RawTensor<T>) -> f64 {
        if other.rank != self.rank {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).abs_val().to_f64())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs_val().to_f64()).fold(0.0, f64::max)
    }

    /// Exact componentwise equality with a canonical tensor.
    pub fn equals(&self, t: &DenseSymTensor<T>) -> bool {
        t.rank() == self.rank
            && (0..self.data.len()).all(|i| self.data[i] == *t.get(&digits(i, self.rank)))
    }
}

/// Literal average over all `n!` slot permutations.
pub fn brute_symmetrize<T: Scalar>(raw: &RawTensor<T>, cfg: &OracleConfig) -> Result<DenseSymTensor<T>> {
    cfg.guard(raw.rank)?;
    let n = raw.rank;
    let perms = permutations(n);
    let denom = T::from_i64(factorial_usize(n) as i64);
    Ok(DenseSymTensor::from_fn(n, |c| {
        let mut idx = Vec::with_capacity(n);
        for (a, &k) in c.iter().enumerate() {
            idx.extend(std::iter::repeat(a).take(k));
        }
        let mut acc = T::zero();
        for p in &perms {
            let permuted: Vec<usize> = p.iter().map(|&i| idx[i]).collect();
            acc = acc + raw.at(&permuted).clone();
        }
        acc / denom.clone()
    }))
}

/// `sym(g^{s} v^{n−2s})` on every component, by summing over permutations.
pub fn brute_realize_basis<T: Scalar>(n: usize, s: usize, v: &[T; 4], cfg: &OracleConfig) -> Result<RawTensor<T>> {
    cfg.guard(n)?;
    if 2 * s > n {
        return Err(Error::InvalidArgument(format!("s = {s} too large for rank {n}")));
    }
    let perms = permutations(n);
    let denom = T::from_i64(perms.len() as i64);
    let product = |idx: &[usize]| -> T {
        let mut t = T::one();
        for pair in 0..s {
            t = t * metric::<T>(idx[2 * pair], idx[2 * pair + 1]);
        }
        for &i in &idx[2 * s..] {
            t = t * v[i].clone();
        }
        t
    };
    // only sorted index tuples are computed, the rest are copies
    let cache = RefCell::new(HashMap::new());
    Ok(RawTensor::from_fn(n, |idx| {
        let mut key = idx.to_vec();
        key.sort_unstable();
        if let Some(v) = cache.borrow().get(&key) {
            return T::clone(v);
        }
        let mut acc = T::zero();
        for p in &perms {
            let permuted: Vec<usize> = p.iter().map(|&i| key[i]).collect();
            acc = acc + product(&permuted);
        }
        let val = acc / denom.clone();
        cache.borrow_mut().insert(key, val.clone());
        val
    }))
}

/// Contraction of slots 0 and 1 with `g`.
pub fn brute_trace<T: Scalar>(raw: &RawTensor<T>, cfg: &OracleConfig) -> Result<RawTensor<T>> {
    cfg.guard(raw.rank)?;
    if raw.rank < 2 {
        return Err(Error::RankTooSmall {
            op: "brute_trace",
            rank: raw.rank,
        });
    }
    Ok(RawTensor::from_fn(raw.rank - 2, |rest| {
        let mut acc = T::zero();
        for a in 0..4 {
            let mut idx = vec![a, a];
            idx.extend_from_slice(rest);
            acc = acc + metric::<T>(a, a) * raw.at(&idx).clone();
        }
        acc
    }))
}

/// Contraction of the last slot with covariant components `mu_lower`.
pub fn brute_mu_contract<T: Scalar>(raw: &RawTensor<T>, mu_lower: &[T; 4], cfg: &OracleConfig) -> Result<RawTensor<T>> {
    cfg.guard(raw.rank)?;
    if raw.rank < 1 {
        return Err(Error::RankTooSmall {
            op: "brute_mu_contract",
            rank: 0,
        });
    }
    Ok(RawTensor::from_fn(raw.rank - 1, |rest| {
        let mut acc = T::zero();
        for (a, m) in mu_lower.iter().enumerate() {
            let mut idx = rest.to_vec();
            idx.push(a);
            acc = acc + m.clone() * raw.at(&idx).clone();
        }
        acc
    }))
}

/// Symmetrization over the first `n−1` slots only, last slot untouched.
pub fn brute_partial_symmetrize<T: Scalar>(raw: &RawTensor<T>, cfg: &OracleConfig) -> Result<RawTensor<T>> {
    cfg.guard(raw.rank)?;
    let n = raw.rank;
    let perms = permutations(n - 1);
    let denom = T::from_i64(perms.len() as i64);
    Ok(RawTensor::from_fn(n, |idx| {
        let mut acc = T::zero();
        for p in &perms {
            let mut permuted: Vec<usize> = p.iter().map(|&i| idx[i]).collect();
            permuted.push(idx[n - 1]);
            acc = acc + raw.at(&permuted).clone();
        }
        acc / denom.clone()
    }))
}

/// Product `g^{α1α2}⋯g^{α_{n−1}α_n}` without symmetrization.
pub fn raw_metric_product<T: Scalar>(n: usize) -> RawTensor<T> {
    RawTensor::from_fn(n, |idx| {
        idx.chunks(2)
            .fold(T::one(), |acc, p| acc * metric::<T>(p[0], p[1]))
    })
}

/// Term-by-term evaluation of an expression, independent of [`ScalarExpr::eval`].
pub fn eval_expr<T: Scalar>(
    e: &ScalarExpr,
    lambda: &T,
    gamma: &T,
    mass: &T,
    registry: &FunctionRegistry<T>,
) -> Result<T> {
    let mut acc = T::zero();
    for term in e.terms() {
        let mut v = T::from_rational(&term.coeff);
        let g = if term.gamma_pow >= 0 { gamma.clone() } else { T::one() / gamma.clone() };
        for _ in 0..term.gamma_pow.unsigned_abs() {
            v = v * g.clone();
        }
        let nm = -(mass.clone() * mass.clone());
        let w = if term.msq_pow >= 0 { nm } else { T::one() / nm };
        for _ in 0..term.msq_pow.unsigned_abs() {
            v = v * w.clone();
        }
        if let Some(s) = term.sym {
            v = v * registry.derivative(s.q, s.h, lambda)?;
        }
        acc = acc + v;
    }
    Ok(acc)
}

/// `Σ_s φ_s Y^n_s` built from brute basis tensors.
pub fn brute_realize<T: Scalar>(
    f: &FFamilyElement,
    lambda: &T,
    mu: &FourVector<T>,
    mass: &T,
    registry: &FunctionRegistry<T>,
    cfg: &OracleConfig,
) -> Result<RawTensor<T>> {
    let n = f.rank();
    let gamma = mu.gamma()?;
    let up = mu.up();
    let mut acc = RawTensor::<T>::zeros(n);
    for (s, phi) in f.phi().iter().enumerate() {
        if phi.is_zero() {
            continue;
        }
        let c = eval_expr(phi, lambda, &gamma, mass, registry)?;
        let b = brute_realize_basis(n, s, &up, cfg)?;
        for (a, v) in acc.data.iter_mut().zip(b.data) {
            *a = a.clone() + c.clone() * v;
        }
    }
    Ok(acc)
}

/// Central differences of `realize(F)` in each covariant `μ_β`; slot 0 of the
/// result is `β`.
pub fn fd_mu_derivative(
    f: &FFamilyElement,
    lambda: f64,
    mu: &FourVector<f64>,
    mass: f64,
    registry: &FunctionRegistry<f64>,
    step: f64,
) -> Result<RawTensor<f64>> {
    if step <= 0.0 {
        return Err(Error::StepDegeneracy);
    }
    let n = f.rank();
    let base = mu.down();
    let mut slices = Vec::with_capacity(4);
    for b in 0..4 {
        let at = |t: f64| -> Result<DenseSymTensor<f64>> {
            let mut c = base;
            c[b] += t;
            let v = FourVector::lower(c);
            if !v.is_future_timelike() {
                return Err(Error::StepDegeneracy);
            }
            f.realize(&lambda, &v, &mass, registry)
        };
        let (m2, m1, p1, p2) = (at(-2.0 * step)?, at(-step)?, at(step)?, at(2.0 * step)?);
        slices.push((m2, m1, p1, p2));
    }
    Ok(RawTensor::from_fn(n + 1, |idx| {
        let (m2, m1, p1, p2) = &slices[idx[0]];
        let rest = &idx[1..];
        (m2.get(rest) - 8.0 * m1.get(rest) + 8.0 * p1.get(rest) - p2.get(rest)) / (12.0 * step)
    }))
}

/// `K₁(z) = ∫₀^∞ e^{−z cosh t} cosh t dt` by Clenshaw–Curtis on panels.
pub fn bessel_k1(z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Err(Error::InvalidArgument("K1 needs z > 0".into()));
    }
    let upper = (1.0 + 60.0 / z).acosh();
    let panels = ((upper / 0.25).ceil() as usize).max(4);
    let w = upper / panels as f64;
    let g = |t: f64| (-z * t.cosh()).exp() * t.cosh();
    let mut total = 0.0;
    for i in 0..panels {
        let a = i as f64 * w;
        total += quadrature::clenshaw_curtis::integrate(g, a, a + w, 1e-18).integral;
    }
    Ok(total)
}

/// Closed-form `H` of the nondegenerate gas through `K₁`.
pub fn bessel_h(lambda: f64, gamma: f64, mass: f64, consts: &crate::equilibrium::Constants) -> Result<f64> {
    let z = gamma * mass / consts.k_b;
    let c = consts.w / consts.h_planck.powi(3);
    Ok(4.0 * std::f64::consts::PI * consts.k_b * c * mass.powi(3) / gamma
        * (-lambda / consts.k_b).exp()
        * bessel_k1(z)?
        / z)
}

/// Random rational in `[-range, range]` with denominator at most `den`.
pub fn random_rational(rng: &mut impl Rng, range: i64, den: i64) -> Rational {
    let d = rng.gen_range(1..=den);
    Rational::new(rng.gen_range(-range * d..=range * d).into(), d.into())
}

/// Future timelike covector with rational `γ`, built from a rational point of the unit ball.
pub fn random_timelike_rational(rng: &mut impl Rng) -> FourVector<Rational> {
    loop {
        let w: [Rational; 3] = std::array::from_fn(|_| random_rational(rng, 1, 4) / Rational::from_integer(2.into()));
        let r2 = w.iter().fold(Rational::from_integer(0.into()), |a, x| a + x * x);
        let one = Rational::from_integer(1.into());
        if r2 >= one {
            continue;
        }
        let gamma = Rational::new(rng.gen_range(1..=7).into(), rng.gen_range(1..=3).into());
        let d = &one - &r2;
        let u0 = (&one + &r2) / &d;
        let ui = |x: &Rational| Rational::from_integer(2.into()) * x / &d;
        return FourVector::upper([
            &gamma * u0,
            &gamma * ui(&w[0]),
            &gamma * ui(&w[1]),
            &gamma * ui(&w[2]),
        ])
        .to_lower();
    }
}

/// Future timelike covector with `γ ∈ [0.5, 2]` and speed below 0.6.
pub fn random_timelike_f64(rng: &mut impl Rng) -> FourVector<f64> {
    let gamma = rng.gen_range(0.5..2.0);
    let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.35..0.35));
    let lorentz = 1.0 / (1.0 - v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    FourVector::upper([
        gamma * lorentz,
        gamma * lorentz * v[0],
        gamma * lorentz * v[1],
        gamma * lorentz * v[2],
    ])
    .to_lower()
}

pub fn random_raw_rational(rank: usize, rng: &mut impl Rng) -> RawTensor<Rational> {
    let data = (0..4usize.pow(rank as u32)).map(|_| random_rational(rng, 5, 6)).collect();
    RawTensor { rank, data }
}

/// The three sides of the identity
/// `g^{(α1α2}⋯g^{αn−1αn)} μ_{αn} = g^{(α1α2}⋯g^{αn−1)αn} μ_{αn} = g^{(α1α2}⋯μ^{αn−1)}`.
pub fn single_contraction_identity(
    n: usize,
    mu: &FourVector<Rational>,
    cfg: &OracleConfig,
) -> Result<(RawTensor<Rational>, RawTensor<Rational>, RawTensor<Rational>)> {
    let low = mu.down();
    let full = brute_realize_basis(n, n / 2, &mu.up(), cfg)?;
    let a = brute_mu_contract(&full, &low, cfg)?;
    let partial = brute_partial_symmetrize(&raw_metric_product::<Rational>(n), cfg)?;
    let b = brute_mu_contract(&partial, &low, cfg)?;
    let c = brute_realize_basis(n - 1, (n - 2) / 2, &mu.up(), cfg)?;
    Ok((a, b, c))
}

/// `∂ sym(g^s μ^{n−2s})^{rest} / ∂μ_β`: every vector slot in turn becomes `g^{·β}`.
fn basis_dmu<T: Scalar>(n: usize, s: usize, up: &[T; 4], beta: usize, rest: &[usize]) -> T {
    let perms = permutations(n);
    let mut acc = T::zero();
    for p in &perms {
        let idx: Vec<usize> = p.iter().map(|&i| rest[i]).collect();
        let mut g = T::one();
        for pair in 0..s {
            g = g * metric::<T>(idx[2 * pair], idx[2 * pair + 1]);
        }
        if g == T::zero() {
            continue;
        }
        let slots = &idx[2 * s..];
        for skip in 0..slots.len() {
            let mut t = g.clone() * metric::<T>(slots[skip], beta);
            for (j, &a) in slots.iter().enumerate() {
                if j != skip {
                    t = t * up[a].clone();
                }
            }
            acc = acc + t;
        }
    }
    acc / T::from_i64(perms.len() as i64)
}

/// Exact `∂/∂μ_β` of `realize(F)` by the product rule on components, with
/// `∂γ/∂μ_β = −μ^β/γ`. Slot 0 of the result is `β`.
pub fn brute_mu_derivative<T: Scalar>(
    f: &FFamilyElement,
    lambda: &T,
    mu: &FourVector<T>,
    mass: &T,
    registry: &FunctionRegistry<T>,
    cfg: &OracleConfig,
) -> Result<RawTensor<T>> {
    let n = f.rank();
    cfg.guard(n + 1)?;
    let gamma = mu.gamma()?;
    let up = mu.up();
    let mut out = RawTensor::<T>::zeros(n + 1);
    for (s, phi) in f.phi().iter().enumerate() {
        if phi.is_zero() {
            continue;
        }
        let val = eval_expr(phi, lambda, &gamma, mass, registry)?;
        let dval = eval_expr(&phi.d_gamma(), lambda, &gamma, mass, registry)?;
        let basis = brute_realize_basis(n, s, &up, cfg)?;
        let has_vectors = n > 2 * s;
        for (i, slot) in out.data.iter_mut().enumerate() {
            let idx = digits(i, n + 1);
            let (beta, rest) = (idx[0], &idx[1..]);
            let dg = -up[beta].clone() / gamma.clone();
            let mut v = dval.clone() * dg * basis.at(rest).clone();
            if has_vectors {
                v = v + val.clone() * basis_dmu(n, s, &up, beta, rest);
            }
            *slot = slot.clone() + v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, ratio};

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(0).len(), 1);
    }

    #[test]
    fn rank_guard() {
        assert!(OracleConfig::new(9, Arithmetic::Float, 1e-4, 0).is_err());
        let cfg = OracleConfig::new(2, Arithmetic::Rational, 1e-4, 0).unwrap();
        assert!(brute_symmetrize(&RawTensor::<Rational>::zeros(3), &cfg).is_err());
    }

    #[test]
    fn symmetrize_matches() {
        let cfg = OracleConfig::default();
        let mut rng = cfg.rng();
        for rank in 0..=4 {
            let raw = random_raw_rational(rank, &mut rng);
            let fast = DenseSymTensor::symmetrize(rank, &raw.data).unwrap();
            assert_eq!(brute_symmetrize(&raw, &cfg).unwrap(), fast);
        }
    }

    #[test]
    fn trace_of_y42() {
        let cfg = OracleConfig::default();
        let v = [rat(2), rat(1), rat(0), ratio(1, 2)];
        let y = brute_realize_basis(4, 2, &v, &cfg).unwrap();
        let t = brute_trace(&y, &cfg).unwrap();
        let g = RawTensor::from_fn(2, |i| metric::<Rational>(i[0], i[1]) * rat(2));
        assert_eq!(t, g);
    }

    #[test]
    fn k1_reference_values() {
        // K1(1) = 0.6019072301972346
        assert!((bessel_k1(1.0).unwrap() - 0.601_907_230_197_234_6).abs() < 1e-14);
        assert!((bessel_k1(0.1).unwrap() - 9.853_844_780_870_606).abs() < 1e-12);
    }

    #[test]
    fn random_rational_state_is_exact() {
        let mut rng = OracleConfig::default().rng();
        for _ in 0..10 {
            let mu = random_timelike_rational(&mut rng);
            assert!(mu.gamma().is_ok());
        }
    }
}
