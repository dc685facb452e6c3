//! Closure coefficients `C^{h,k}_s` and the tensors they define.
//!
//! Two independent constructions are provided:
//!
//! * closed forms ([`closure_coeff`], [`closure_coeff_n1`]) assembled into
//!   [`build_closure_tensor`];
//! * a recursive route that starts from zero, climbs rank by trace inverses
//!   ([`FFamilyElement::lift`]) and descends by traces and λ-derivatives
//!   ([`recursive_e`], [`recursive_n1`], [`derive_c_from_e`]).
//!
//! The arbitrary functions are the registry symbols `c_q`; a free function
//! introduced by a lift at a given γ power is always re-expressed through the
//! `c_q` that owns that power.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{double_factorial, factorial_rat};
use crate::error::{Error, Result};
use crate::f_family::FFamilyElement;
use crate::scalar::{rat, Rational};
use crate::scalar_expr::{ScalarExpr, Symbol};

pub const RANK_CAP: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureSpec {
    pub m: u32,
    pub n: u32,
    pub h_max: u32,
    pub k_max: u32,
}

pub fn check_parity(m: u32, n: u32) -> Result<()> {
    if m % 2 != 0 || n % 2 == 0 {
        return Err(Error::Parity { m, n });
    }
    Ok(())
}

impl ClosureSpec {
    /// Validates parity and the rank cap. With `N = 1` only `k = 0` exists,
    /// so `k_max` is forced to zero.
    pub fn new(m: u32, n: u32, h_max: u32, k_max: u32) -> Result<Self> {
        check_parity(m, n)?;
        let k_max = if n == 1 { 0 } else { k_max };
        let spec = ClosureSpec { m, n, h_max, k_max };
        let top = spec.rank(h_max, k_max);
        if top > RANK_CAP {
            return Err(Error::CapExceeded {
                rank: top,
                cap: RANK_CAP,
            });
        }
        Ok(spec)
    }

    pub fn rank(&self, h: u32, k: u32) -> u32 {
        self.m * h + self.n * k + 1
    }

    pub fn orders(&self) -> Vec<(u32, u32)> {
        (0..=self.h_max)
            .flat_map(|h| (0..=self.k_max).map(move |k| (h, k)))
            .collect()
    }

    pub fn contains(&self, h: u32, k: u32) -> bool {
        h <= self.h_max && k <= self.k_max
    }
}

fn df_quot(a: i64, b: i64) -> Result<Rational> {
    Ok(double_factorial(a)? / double_factorial(b)?)
}

fn pow2(e: i64) -> Rational {
    Rational::from_integer(num_bigint::BigInt::from(2).pow(e as u32))
}

/// `C^h_s` for `N = 1`.
pub fn closure_coeff_n1(m: u32, h: u32, s: u32) -> Result<ScalarExpr> {
    check_parity(m, 1)?;
    let mh = (m * h) as i64;
    let s_i = s as i64;
    if 2 * s_i > mh {
        return Err(Error::InvalidArgument(format!(
            "s = {s} out of range 0..={}",
            mh / 2
        )));
    }
    let pre = pow2(mh - 2 * s_i) * factorial_rat((mh / 2) as u64)
        / factorial_rat(s as u64)
        / factorial_rat((mh + 1 - 2 * s_i) as u64);
    let mut out = ScalarExpr::zero();
    if mh < 2 {
        return Ok(out);
    }
    for q in 0..=(mh - 2) / 2 {
        let c = pre.clone() * df_quot(mh + 1, mh - 2 * q - 2)?
            * factorial_rat((q + 2 + mh / 2 - s_i) as u64)
            / factorial_rat((q + 2) as u64);
        out += &ScalarExpr::monomial(
            c,
            -6 - mh + 2 * s_i - 2 * q,
            mh / 2,
            Some(Symbol::new(q as u32, h)),
        );
    }
    Ok(out)
}

/// `C^{h,k}_s` for general odd `N` (for `N = 1` only `k = 0` is meaningful).
pub fn closure_coeff(m: u32, n: u32, h: u32, k: u32, s: u32) -> Result<ScalarExpr> {
    check_parity(m, n)?;
    let (m_i, n_i, h_i, k_i, s_i) = (m as i64, n as i64, h as i64, k as i64, s as i64);
    let rank = m_i * h_i + n_i * k_i + 1;
    let top = rank / 2;
    if s_i > top {
        return Err(Error::InvalidArgument(format!(
            "s = {s} out of range 0..={top}"
        )));
    }
    let kk = k_i / 2;
    let b = m_i * h_i + k_i * (n_i - 1);
    if b < 2 {
        return Ok(ScalarExpr::zero());
    }
    let pre = pow2(2 * top + kk - 2 * s_i) * factorial_rat(top as u64)
        / factorial_rat(s as u64)
        / factorial_rat((rank - 2 * s_i) as u64);
    let shift = (m_i * h_i + (n_i + 1) * k_i) / 2;
    let mut out = ScalarExpr::zero();
    for q in 0..=(b - 2) / 2 {
        let c = pre.clone()
            * df_quot(b + 1 + 2 * kk, b - 2 * q - 2)?
            * factorial_rat((q + 2 + shift - s_i) as u64)
            / factorial_rat((q + 2) as u64);
        out += &ScalarExpr::monomial(
            c,
            -6 - m_i * h_i - (n_i + 1) * k_i + 2 * s_i - 2 * q,
            b / 2,
            Some(Symbol::new(q as u32, h)),
        );
    }
    Ok(out)
}

/// Closed-form tensor `C_{h,k}` of rank `Mh + Nk + 1`.
pub fn build_closure_tensor(spec: &ClosureSpec, h: u32, k: u32) -> Result<FFamilyElement> {
    if !spec.contains(h, k) {
        return Err(Error::MissingOrder { h, k });
    }
    let rank = spec.rank(h, k);
    let phi = (0..=rank / 2)
        .map(|s| {
            if spec.n == 1 {
                closure_coeff_n1(spec.m, h, s)
            } else {
                closure_coeff(spec.m, spec.n, h, k, s)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FFamilyElement::new(rank as usize, phi)
}

/// All closed-form tensors of a spec, keyed by `(h, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureTensorSet {
    pub spec: ClosureSpec,
    tensors: BTreeMap<(u32, u32), FFamilyElement>,
    mutated: Option<(u32, u32)>,
}

impl ClosureTensorSet {
    pub fn build(spec: &ClosureSpec) -> Result<Self> {
        let built: Vec<((u32, u32), FFamilyElement)> = spec
            .orders()
            .into_par_iter()
            .map(|(h, k)| build_closure_tensor(spec, h, k).map(|t| ((h, k), t)))
            .collect::<Result<_>>()?;
        Ok(ClosureTensorSet {
            spec: *spec,
            tensors: built.into_iter().collect(),
            mutated: None,
        })
    }

    pub fn get(&self, h: u32, k: u32) -> Result<&FFamilyElement> {
        self.tensors.get(&(h, k)).ok_or(Error::MissingOrder { h, k })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &FFamilyElement)> {
        self.tensors.iter()
    }

    /// Negative-control hook: rescales the first term of the leading
    /// coefficient of the `index`-th (1-based) non-zero tensor by 3/2.
    /// Returns the order that was touched.
    pub fn mutate(&mut self, index: usize) -> Option<(u32, u32)> {
        if index == 0 {
            return None;
        }
        let key = *self
            .tensors
            .iter()
            .filter(|(_, t)| !t.is_zero())
            .nth(index - 1)?
            .0;
        let t = &self.tensors[&key];
        let top = t.rank() / 2;
        let perturbed = t.perturbed(top, &Rational::new(3.into(), 2.into()));
        self.tensors.insert(key, perturbed);
        self.mutated = Some(key);
        Some(key)
    }

    pub fn mutated(&self) -> Option<(u32, u32)> {
        self.mutated
    }
}

/// `(−m²)^{j}` times `D^h c_q` times an exact factor.
fn c_term(coeff: Rational, msq: i64, q: i64, h: u32) -> ScalarExpr {
    ScalarExpr::monomial(coeff, 0, msq, Some(Symbol::new(q as u32, h)))
}

/// `E_{0,j}` for `j = 0..=upto`, built by repeated trace inverses.
pub fn e_zero_chain(n: u32, upto: u32) -> Result<Vec<FFamilyElement>> {
    if n < 3 {
        return Err(Error::InvalidArgument("the E route needs N > 1".into()));
    }
    let r = ((n - 1) / 2) as usize;
    let half = ((n - 1) / 2) as i64;
    let mut chain = vec![FFamilyElement::zero(1)];
    for j in 0..upto as i64 {
        let prev = chain.last().unwrap().mul_msq(&rat(1), half);
        let b = (n as i64 - 1) * (j + 1);
        let free = (0..r as i64)
            .map(|i| {
                let q = j * half + i;
                let c = df_quot(b + 1, b - 2 * q - 2)?;
                Ok(c_term(c, b / 2, q, 0))
            })
            .collect::<Result<Vec<_>>>()?;
        chain.push(prev.lift(r, &free)?);
    }
    Ok(chain)
}

/// `E_{h,k}` of rank `Mh + (N−1)k + 1`, from `E_{0,k+Mh}` by traces and λ-derivatives.
pub fn recursive_e(spec: &ClosureSpec, h: u32, k: u32) -> Result<FFamilyElement> {
    let chain = e_zero_chain(spec.n, k + spec.m * h)?;
    e_from_chain(spec, &chain, h, k)
}

fn e_from_chain(spec: &ClosureSpec, chain: &[FFamilyElement], h: u32, k: u32) -> Result<FFamilyElement> {
    let (m, n) = (spec.m as i64, spec.n as i64);
    let base = &chain[(k + spec.m * h) as usize];
    let traces = (m * h as i64 * (n - 2) / 2) as usize;
    let leading = base
        .leading_after_traces(traces)?
        .d_lambda_n(h)
        .mul_msq(-(n - 2) * m * h as i64 / 2);
    let rank = (m * h as i64 + (n - 1) * k as i64 + 1) as usize;
    Ok(FFamilyElement::from_leading(rank, leading))
}

/// `C_{h,k}` as the `k`-fold μ-derivative of `E_{h,k}`.
pub fn derive_c_from_e(spec: &ClosureSpec, h: u32, k: u32) -> Result<FFamilyElement> {
    recursive_e(spec, h, k)?.mu_derivative_n(k as usize)
}

/// Every `C_{h,k}` of a spec through the recursive route.
pub fn derive_all_from_e(spec: &ClosureSpec) -> Result<BTreeMap<(u32, u32), FFamilyElement>> {
    let chain = e_zero_chain(spec.n, spec.k_max + spec.m * spec.h_max)?;
    spec.orders()
        .into_par_iter()
        .map(|(h, k)| {
            let e = e_from_chain(spec, &chain, h, k)?;
            Ok(((h, k), e.mu_derivative_n(k as usize)?))
        })
        .collect()
}

/// `C_h` for `N = 1`, `h = 0..=upto`, by trace inverses of λ-derivatives.
pub fn recursive_n1(m: u32, upto: u32) -> Result<Vec<FFamilyElement>> {
    check_parity(m, 1)?;
    let r = (m / 2) as usize;
    let half = (m / 2) as i64;
    let mut chain = vec![FFamilyElement::zero(1)];
    for j in 0..upto as i64 {
        let prev = chain.last().unwrap().d_lambda().mul_msq(&rat(1), half);
        let b = m as i64 * (j + 1);
        let free = (0..r as i64)
            .map(|i| {
                let q = j * half + i;
                let c = df_quot(b + 1, b - 2 * q - 2)?;
                Ok(c_term(c, b / 2, q, (j + 1) as u32))
            })
            .collect::<Result<Vec<_>>>()?;
        chain.push(prev.lift(r, &free)?);
    }
    Ok(chain)
}

/// Residuals of the two compatibility conditions at order `(h, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityReport {
    pub h: u32,
    pub k: u32,
    /// `tr^{M/2} C_{h+1,k} − (−m²)^{M/2} ∂_λ C_{h,k}`, when both sides exist.
    pub lambda_condition: Option<FFamilyElement>,
    /// `tr^{(N−1)/2} C_{h,k+1} − (−m²)^{(N−1)/2} ∂_μ C_{h,k}`, when both sides exist.
    pub mu_condition: Option<FFamilyElement>,
}

impl CompatibilityReport {
    pub fn holds(&self) -> bool {
        self.lambda_condition.as_ref().is_none_or(FFamilyElement::is_zero)
            && self.mu_condition.as_ref().is_none_or(FFamilyElement::is_zero)
    }

    pub fn checked(&self) -> usize {
        self.lambda_condition.is_some() as usize + self.mu_condition.is_some() as usize
    }
}

pub fn verify_compatibility(set: &ClosureTensorSet, h: u32, k: u32) -> Result<CompatibilityReport> {
    let spec = &set.spec;
    let c = set.get(h, k)?;
    let lambda_condition = match set.get(h + 1, k) {
        Ok(up) => {
            let lhs = up.trace_n((spec.m / 2) as usize)?;
            let rhs = c.d_lambda().mul_msq(&rat(1), (spec.m / 2) as i64);
            Some(lhs.sub(&rhs)?)
        }
        Err(_) => None,
    };
    let mu_condition = match (spec.n > 1, set.get(h, k + 1)) {
        (true, Ok(up)) => {
            let half = (spec.n - 1) / 2;
            let lhs = up.trace_n(half as usize)?;
            let rhs = c.mu_derivative()?.mul_msq(&rat(1), half as i64);
            Some(lhs.sub(&rhs)?)
        }
        _ => None,
    };
    Ok(CompatibilityReport {
        h,
        k,
        lambda_condition,
        mu_condition,
    })
}

/// One row of the exported coefficient table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureRow {
    pub h: u32,
    pub k: u32,
    pub s: u32,
    pub q: Option<u32>,
    pub coeff: String,
    pub gamma_pow: i64,
    pub msq_pow: i64,
    pub sym: Option<[u32; 2]>,
}

/// Table rows for every order of a set; a vanishing coefficient yields one row with `coeff = "0"`.
pub fn closure_rows(set: &ClosureTensorSet) -> Vec<ClosureRow> {
    let mut rows = Vec::new();
    for (&(h, k), t) in set.iter() {
        for (s, phi) in t.phi().iter().enumerate() {
            let s = s as u32;
            if phi.is_zero() {
                rows.push(ClosureRow {
                    h,
                    k,
                    s,
                    q: None,
                    coeff: "0".into(),
                    gamma_pow: 0,
                    msq_pow: 0,
                    sym: None,
                });
                continue;
            }
            for term in phi.terms() {
                rows.push(ClosureRow {
                    h,
                    k,
                    s,
                    q: term.sym.map(|x| x.q),
                    coeff: term.coeff.to_string(),
                    gamma_pow: term.gamma_pow,
                    msq_pow: term.msq_pow,
                    sym: term.sym.map(|x| [x.q, x.h]),
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(c: i64, g: i64, j: i64, q: u32, h: u32) -> ScalarExpr {
        ScalarExpr::monomial(rat(c), g, j, Some(Symbol::new(q, h)))
    }

    #[test]
    fn n1_examples() {
        assert!(closure_coeff_n1(2, 0, 0).unwrap().is_zero());
        assert_eq!(closure_coeff_n1(2, 1, 1).unwrap(), mono(3, -6, 1, 0, 1));
        assert_eq!(closure_coeff_n1(2, 1, 0).unwrap(), mono(6, -8, 1, 0, 1));
        assert!(closure_coeff_n1(2, 1, 2).is_err());
    }

    #[test]
    fn general_examples() {
        assert_eq!(closure_coeff(2, 3, 0, 1, 2).unwrap(), mono(3, -6, 1, 0, 0));
        assert!(closure_coeff(2, 3, 0, 0, 0).unwrap().is_zero());
        for h in 0..=2 {
            for s in 0..=h {
                assert_eq!(closure_coeff(2, 1, h, 0, s).unwrap(), closure_coeff_n1(2, h, s).unwrap());
            }
        }
        assert!(matches!(closure_coeff(1, 3, 0, 0, 0), Err(Error::Parity { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(ClosureSpec::new(1, 1, 1, 0), Err(Error::Parity { .. })));
        assert!(matches!(ClosureSpec::new(2, 2, 1, 0), Err(Error::Parity { .. })));
        assert_eq!(ClosureSpec::new(2, 1, 2, 2).unwrap().k_max, 0);
        assert!(matches!(ClosureSpec::new(4, 3, 3, 2), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn tensor_examples() {
        let spec = ClosureSpec::new(2, 1, 1, 0).unwrap();
        assert!(build_closure_tensor(&spec, 0, 0).unwrap().is_zero());
        let c1 = build_closure_tensor(&spec, 1, 0).unwrap();
        assert_eq!(c1.rank(), 3);
        assert_eq!(c1.coeff(1), &mono(3, -6, 1, 0, 1));
        assert_eq!(c1.coeff(0), &mono(6, -8, 1, 0, 1));
        assert!(c1.check_characteristic().holds);
    }

    #[test]
    fn recursive_examples() {
        let spec = ClosureSpec::new(2, 3, 2, 2).unwrap();
        assert!(recursive_e(&spec, 0, 0).unwrap().is_zero());
        assert_eq!(recursive_e(&spec, 1, 0).unwrap(), derive_c_from_e(&spec, 1, 0).unwrap());
        for (h, k) in [(0, 1), (1, 1)] {
            assert_eq!(
                derive_c_from_e(&spec, h, k).unwrap(),
                build_closure_tensor(&spec, h, k).unwrap(),
                "order ({h}, {k})"
            );
        }
        let n1 = recursive_n1(2, 2).unwrap();
        let spec1 = ClosureSpec::new(2, 1, 2, 0).unwrap();
        for (h, c) in n1.iter().enumerate() {
            assert_eq!(c, &build_closure_tensor(&spec1, h as u32, 0).unwrap());
        }
    }

    #[test]
    fn compatibility_examples() {
        for (m, n, hm, km) in [(2, 1, 2, 0), (2, 3, 1, 1)] {
            let spec = ClosureSpec::new(m, n, hm, km).unwrap();
            let set = ClosureTensorSet::build(&spec).unwrap();
            for (h, k) in spec.orders() {
                let rep = verify_compatibility(&set, h, k).unwrap();
                assert!(rep.holds(), "({m},{n}) order ({h},{k}): {rep:?}");
            }
        }
    }

    #[test]
    fn table_rows() {
        let spec = ClosureSpec::new(2, 1, 1, 0).unwrap();
        let rows = closure_rows(&ClosureTensorSet::build(&spec).unwrap());
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn mutation_breaks_compatibility() {
        let spec = ClosureSpec::new(2, 1, 2, 0).unwrap();
        let mut set = ClosureTensorSet::build(&spec).unwrap();
        assert_eq!(set.mutate(1), Some((1, 0)));
        let rep = verify_compatibility(&set, 0, 0).unwrap();
        assert!(!rep.holds() || !set.get(1, 0).unwrap().check_characteristic().holds);
    }
}
