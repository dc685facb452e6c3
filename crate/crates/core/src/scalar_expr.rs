//! Exact formal scalars.
//!
//! A [`ScalarExpr`] is a finite sum of terms
//! `coeff · γ^gamma_pow · (−m²)^msq_pow · dʰc_q/dλʰ`, kept in canonical form
//! (like terms merged, zero terms dropped) so equality is structural.
//!
//! The arbitrary functions `c_q(λ)` are indexed by `q` only. A
//! [`FunctionRegistry`] supplies their values and λ-derivatives when an
//! expression is evaluated.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{rat, Rational, Scalar};

pub use crate::combinatorics::{double_factorial, double_factorial_ratio, eta};

/// Formal symbol `dʰ c_q / dλʰ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub q: u32,
    pub h: u32,
}

impl Symbol {
    pub fn new(q: u32, h: u32) -> Self {
        Symbol { q, h }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub gamma_pow: i64,
    pub msq_pow: i64,
    pub sym: Option<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: Rational,
    pub gamma_pow: i64,
    pub msq_pow: i64,
    pub sym: Option<Symbol>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ScalarExpr {
    terms: BTreeMap<TermKey, Rational>,
}

impl ScalarExpr {
    pub fn zero() -> Self {
        ScalarExpr::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(c, 0, 0, None)
    }

    pub fn monomial(coeff: Rational, gamma_pow: i64, msq_pow: i64, sym: Option<Symbol>) -> Self {
        let mut e = ScalarExpr::zero();
        e.add_term(
            TermKey {
                gamma_pow,
                msq_pow,
                sym,
            },
            coeff,
        );
        e
    }

    /// `γ^p`
    pub fn gamma_pow(p: i64) -> Self {
        Self::monomial(Rational::one(), p, 0, None)
    }

    /// The bare symbol `dʰ c_q / dλʰ`.
    pub fn symbol(q: u32, h: u32) -> Self {
        Self::monomial(Rational::one(), 0, 0, Some(Symbol::new(q, h)))
    }

    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut e = ScalarExpr::zero();
        for t in terms {
            e.add_term(
                TermKey {
                    gamma_pow: t.gamma_pow,
                    msq_pow: t.msq_pow,
                    sym: t.sym,
                },
                t.coeff,
            );
        }
        e
    }

    fn add_term(&mut self, key: TermKey, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(key).or_insert_with(Rational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.terms.iter().map(|(k, c)| Term {
            coeff: c.clone(),
            gamma_pow: k.gamma_pow,
            msq_pow: k.msq_pow,
            sym: k.sym,
        })
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.terms.keys().filter_map(|k| k.sym)
    }

    /// Every term has no symbol and no γ dependence.
    pub fn is_gamma_free(&self) -> bool {
        self.terms.keys().all(|k| k.gamma_pow == 0)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return ScalarExpr::zero();
        }
        ScalarExpr {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (*k, v * c))
                .collect(),
        }
    }

    /// Multiply by `c · γ^gamma_pow · (−m²)^msq_pow`.
    pub fn mul_monomial(&self, c: &Rational, gamma_pow: i64, msq_pow: i64) -> Self {
        if c.is_zero() {
            return ScalarExpr::zero();
        }
        ScalarExpr {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| {
                    (
                        TermKey {
                            gamma_pow: k.gamma_pow + gamma_pow,
                            msq_pow: k.msq_pow + msq_pow,
                            sym: k.sym,
                        },
                        v * c,
                    )
                })
                .collect(),
        }
    }

    pub fn mul_gamma(&self, p: i64) -> Self {
        self.mul_monomial(&Rational::one(), p, 0)
    }

    pub fn mul_msq(&self, j: i64) -> Self {
        self.mul_monomial(&Rational::one(), 0, j)
    }

    /// Product of two expressions; fails if two symbols would multiply.
    pub fn try_mul(&self, other: &ScalarExpr) -> Result<Self> {
        let mut out = ScalarExpr::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let sym = match (ka.sym, kb.sym) {
                    (Some(_), Some(_)) => return Err(Error::SymbolProduct),
                    (a, b) => a.or(b),
                };
                out.add_term(
                    TermKey {
                        gamma_pow: ka.gamma_pow + kb.gamma_pow,
                        msq_pow: ka.msq_pow + kb.msq_pow,
                        sym,
                    },
                    ca * cb,
                );
            }
        }
        Ok(out)
    }

    /// `∂/∂γ`, termwise on the γ power.
    pub fn d_gamma(&self) -> Self {
        let mut out = ScalarExpr::zero();
        for (k, c) in &self.terms {
            if k.gamma_pow != 0 {
                out.add_term(
                    TermKey {
                        gamma_pow: k.gamma_pow - 1,
                        ..*k
                    },
                    c * rat(k.gamma_pow),
                );
            }
        }
        out
    }

    /// `∂/∂(γ²) = (1/2γ) ∂/∂γ`
    pub fn d_gamma_sq(&self) -> Self {
        self.d_gamma()
            .mul_monomial(&Rational::new(1.into(), 2.into()), -1, 0)
    }

    /// `∂/∂λ`: only the c-function symbols depend on λ.
    pub fn d_lambda(&self) -> Self {
        let mut out = ScalarExpr::zero();
        for (k, c) in &self.terms {
            if let Some(sym) = k.sym {
                out.add_term(
                    TermKey {
                        sym: Some(Symbol::new(sym.q, sym.h + 1)),
                        ..*k
                    },
                    c.clone(),
                );
            }
        }
        out
    }

    pub fn d_lambda_n(&self, n: u32) -> Self {
        (0..n).fold(self.clone(), |e, _| e.d_lambda())
    }

    /// Antiderivative in γ, termwise `γ^p ↦ γ^{p+1}/(p+1)`.
    pub fn integrate_gamma(&self) -> Result<Self> {
        let mut out = ScalarExpr::zero();
        for (k, c) in &self.terms {
            if k.gamma_pow == -1 {
                return Err(Error::LogarithmicAntiderivative);
            }
            out.add_term(
                TermKey {
                    gamma_pow: k.gamma_pow + 1,
                    ..*k
                },
                c / rat(k.gamma_pow + 1),
            );
        }
        Ok(out)
    }

    /// Numeric value at `(λ, γ, m)`.
    pub fn eval<T: Scalar>(
        &self,
        lambda: &T,
        gamma: &T,
        mass: &T,
        registry: &FunctionRegistry<T>,
    ) -> Result<T> {
        if *gamma <= T::zero() {
            return Err(Error::NonPositiveGamma);
        }
        let neg_msq = -(mass.clone() * mass.clone());
        let mut acc = T::zero();
        for (k, c) in &self.terms {
            let mut v = T::from_rational(c) * gamma.powi(k.gamma_pow);
            if k.msq_pow != 0 {
                v = v * neg_msq.powi(k.msq_pow);
            }
            if let Some(sym) = k.sym {
                v = v * registry.derivative(sym.q, sym.h, lambda)?;
            }
            acc = acc + v;
        }
        Ok(acc)
    }

    /// Returns a copy with the coefficient of the first term multiplied by `factor`.
    /// Used by the mutation (negative-control) harness.
    pub fn perturb_first_term(&self, factor: &Rational) -> Self {
        let mut out = self.clone();
        if let Some((_, c)) = out.terms.iter_mut().next() {
            *c *= factor;
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }
}

impl Add for &ScalarExpr {
    type Output = ScalarExpr;
    fn add(self, rhs: &ScalarExpr) -> ScalarExpr {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for ScalarExpr {
    type Output = ScalarExpr;
    fn add(mut self, rhs: ScalarExpr) -> ScalarExpr {
        self += &rhs;
        self
    }
}

impl AddAssign<&ScalarExpr> for ScalarExpr {
    fn add_assign(&mut self, rhs: &ScalarExpr) {
        for (k, c) in &rhs.terms {
            self.add_term(*k, c.clone());
        }
    }
}

impl Sub for &ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: &ScalarExpr) -> ScalarExpr {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.add_term(*k, -c.clone());
        }
        out
    }
}

impl Sub for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: ScalarExpr) -> ScalarExpr {
        &self - &rhs
    }
}

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        self.scale(&-Rational::one())
    }
}

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        -&self
    }
}

impl Mul<&Rational> for &ScalarExpr {
    type Output = ScalarExpr;
    fn mul(self, rhs: &Rational) -> ScalarExpr {
        self.scale(rhs)
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
                write!(f, "{}", c.abs())?;
            } else {
                write!(f, "{c}")?;
            }
            if k.gamma_pow != 0 {
                write!(f, "·γ^{}", k.gamma_pow)?;
            }
            if k.msq_pow != 0 {
                write!(f, "·(-m²)^{}", k.msq_pow)?;
            }
            if let Some(s) = k.sym {
                write!(f, "·D^{}c_{}", s.h, s.q)?;
            }
        }
        Ok(())
    }
}

/// JSON form of a single term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub coeff: String,
    pub gamma_pow: i64,
    pub msq_pow: i64,
    pub sym: Option<[u32; 2]>,
}

impl From<&Term> for TermRecord {
    fn from(t: &Term) -> Self {
        TermRecord {
            coeff: t.coeff.to_string(),
            gamma_pow: t.gamma_pow,
            msq_pow: t.msq_pow,
            sym: t.sym.map(|s| [s.q, s.h]),
        }
    }
}

impl TryFrom<&TermRecord> for Term {
    type Error = Error;
    fn try_from(r: &TermRecord) -> Result<Term> {
        let coeff: Rational = r
            .coeff
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad rational {:?}", r.coeff)))?;
        Ok(Term {
            coeff,
            gamma_pow: r.gamma_pow,
            msq_pow: r.msq_pow,
            sym: r.sym.map(|[q, h]| Symbol::new(q, h)),
        })
    }
}

impl Serialize for ScalarExpr {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let recs: Vec<TermRecord> = self.terms().map(|t| TermRecord::from(&t)).collect();
        recs.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ScalarExpr {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let recs = Vec::<TermRecord>::deserialize(de)?;
        let terms = recs
            .iter()
            .map(Term::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Ok(ScalarExpr::from_terms(terms))
    }
}

/// A smooth scalar function of λ with derivatives of any order.
pub trait LambdaFunction<T>: Send + Sync {
    fn derivative(&self, order: u32, lambda: &T) -> T;
}

/// Polynomial with exact rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<Rational>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        Polynomial { coeffs }
    }

    pub fn derivative_poly(&self, order: u32) -> Polynomial {
        let mut c = self.coeffs.clone();
        for _ in 0..order {
            if c.is_empty() {
                break;
            }
            c = c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, a)| a * rat(i as i64))
                .collect();
        }
        Polynomial { coeffs: c }
    }
}

impl<T: Scalar> LambdaFunction<T> for Polynomial {
    fn derivative(&self, order: u32, lambda: &T) -> T {
        let d = self.derivative_poly(order);
        d.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * lambda.clone() + T::from_rational(c))
    }
}

/// `amplitude · exp(rate · λ)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponential {
    pub amplitude: f64,
    pub rate: f64,
}

impl LambdaFunction<f64> for Exponential {
    fn derivative(&self, order: u32, lambda: &f64) -> f64 {
        self.amplitude * self.rate.powi(order as i32) * (self.rate * lambda).exp()
    }
}

/// Read-only map `q ↦ c_q(λ)` with a bound on the derivative order.
pub struct FunctionRegistry<T> {
    funcs: BTreeMap<u32, Arc<dyn LambdaFunction<T>>>,
    max_order: u32,
}

impl<T> Clone for FunctionRegistry<T> {
    fn clone(&self) -> Self {
        FunctionRegistry {
            funcs: self.funcs.clone(),
            max_order: self.max_order,
        }
    }
}

impl<T> fmt::Debug for FunctionRegistry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionRegistry")
            .field("q", &self.funcs.keys().collect::<Vec<_>>())
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl<T: Scalar> FunctionRegistry<T> {
    pub fn new(max_order: u32) -> Self {
        FunctionRegistry {
            funcs: BTreeMap::new(),
            max_order,
        }
    }

    pub fn with(mut self, q: u32, f: impl LambdaFunction<T> + 'static) -> Self {
        self.funcs.insert(q, Arc::new(f));
        self
    }

    pub fn insert(&mut self, q: u32, f: Arc<dyn LambdaFunction<T>>) {
        self.funcs.insert(q, f);
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn contains(&self, q: u32) -> bool {
        self.funcs.contains_key(&q)
    }

    pub fn derivative(&self, q: u32, h: u32, lambda: &T) -> Result<T> {
        if h > self.max_order {
            return Err(Error::DerivativeOrder {
                q,
                requested: h,
                bound: self.max_order,
            });
        }
        self.funcs
            .get(&q)
            .map(|f| f.derivative(h, lambda))
            .ok_or(Error::MissingSymbol { q, h })
    }

    /// Checks that every symbol of `expr` can be evaluated.
    pub fn covers(&self, expr: &ScalarExpr) -> Result<()> {
        for s in expr.symbols() {
            if !self.contains(s.q) {
                return Err(Error::MissingSymbol { q: s.q, h: s.h });
            }
            if s.h > self.max_order {
                return Err(Error::DerivativeOrder {
                    q: s.q,
                    requested: s.h,
                    bound: self.max_order,
                });
            }
        }
        Ok(())
    }

    /// Deterministic polynomial family `c_0 … c_{count-1}`, exact in any scalar type.
    pub fn polynomial_family(count: u32, max_order: u32) -> Self {
        let mut reg = FunctionRegistry::new(max_order);
        for q in 0..count {
            reg.insert(q, Arc::new(sample_polynomial(q)));
        }
        reg
    }
}

/// The polynomial used for `c_q` by [`FunctionRegistry::polynomial_family`].
pub fn sample_polynomial(q: u32) -> Polynomial {
    let q = q as i64;
    Polynomial::new(vec![
        Rational::new((q + 3).into(), (q + 2).into()),
        Rational::new((2 * q + 1).into(), 3.into()),
        Rational::new(1.into(), (q + 1).into()),
        Rational::new((-1i64).pow(q as u32).into(), (q + 4).into()),
        Rational::new(1.into(), (2 * q + 5).into()),
        Rational::new(1.into(), 7.into()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use proptest::prelude::*;

    fn c0_identity_registry() -> FunctionRegistry<f64> {
        FunctionRegistry::new(4).with(0, Polynomial::new(vec![rat(0), rat(1)]))
    }

    #[test]
    fn eval_examples() {
        let reg = c0_identity_registry();
        let e = ScalarExpr::monomial(rat(3), -6, 1, Some(Symbol::new(0, 1)));
        assert_eq!(e.eval(&0.0, &1.0, &1.0, &reg).unwrap(), -3.0);
        assert_eq!(ScalarExpr::zero().eval(&0.0, &1.0, &1.0, &reg).unwrap(), 0.0);
        assert_eq!(
            ScalarExpr::gamma_pow(-2).eval(&0.0, &2.0, &1.0, &reg).unwrap(),
            0.25
        );
    }

    #[test]
    fn eval_errors() {
        let reg = c0_identity_registry();
        let e = ScalarExpr::symbol(5, 0);
        assert_eq!(
            e.eval(&0.0, &1.0, &1.0, &reg),
            Err(Error::MissingSymbol { q: 5, h: 0 })
        );
        assert_eq!(
            ScalarExpr::gamma_pow(1).eval(&0.0, &0.0, &1.0, &reg),
            Err(Error::NonPositiveGamma)
        );
        assert!(matches!(
            ScalarExpr::symbol(0, 9).eval(&0.0, &1.0, &1.0, &reg),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn canonical_merging() {
        let a = ScalarExpr::monomial(rat(2), -4, 0, Some(Symbol::new(1, 0)));
        let b = ScalarExpr::monomial(rat(-2), -4, 0, Some(Symbol::new(1, 0)));
        assert!((&a + &b).is_zero());
        let c = &a + &a;
        assert_eq!(c.len(), 1);
        assert_eq!(c, a.scale(&rat(2)));
    }

    #[test]
    fn gamma_calculus() {
        let e = ScalarExpr::monomial(rat(5), -4, 0, None);
        assert_eq!(e.d_gamma(), ScalarExpr::monomial(rat(-20), -5, 0, None));
        assert_eq!(e.d_gamma_sq(), ScalarExpr::monomial(rat(-10), -6, 0, None));
        assert_eq!(
            e.integrate_gamma().unwrap(),
            ScalarExpr::monomial(ratio(-5, 3), -3, 0, None)
        );
        assert_eq!(
            ScalarExpr::gamma_pow(-1).integrate_gamma(),
            Err(Error::LogarithmicAntiderivative)
        );
    }

    #[test]
    fn lambda_derivative_bumps_symbols() {
        let e = &ScalarExpr::symbol(2, 1) + &ScalarExpr::gamma_pow(3);
        assert_eq!(e.d_lambda(), ScalarExpr::symbol(2, 2));
    }

    #[test]
    fn json_term_list() {
        let e = ScalarExpr::monomial(ratio(-3, 4), -6, 1, Some(Symbol::new(0, 1)));
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(
            s,
            r#"[{"coeff":"-3/4","gamma_pow":-6,"msq_pow":1,"sym":[0,1]}]"#
        );
        let back: ScalarExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn polynomial_derivatives() {
        let p = Polynomial::new(vec![rat(1), rat(2), rat(3)]);
        let reg = FunctionRegistry::<Rational>::new(3).with(0, p);
        assert_eq!(reg.derivative(0, 0, &rat(2)).unwrap(), rat(17));
        assert_eq!(reg.derivative(0, 1, &rat(2)).unwrap(), rat(14));
        assert_eq!(reg.derivative(0, 2, &rat(2)).unwrap(), rat(6));
        assert_eq!(reg.derivative(0, 3, &rat(2)).unwrap(), rat(0));
    }

    fn arb_expr() -> impl Strategy<Value = ScalarExpr> {
        prop::collection::vec(
            (-4i64..5, 1i64..4, -6i64..3, 0i64..2, prop::option::of((0u32..3, 0u32..2))),
            0..6,
        )
        .prop_map(|ts| {
            ScalarExpr::from_terms(ts.into_iter().map(|(n, d, g, m, s)| Term {
                coeff: ratio(n, d),
                gamma_pow: g,
                msq_pow: m,
                sym: s.map(|(q, h)| Symbol::new(q, h)),
            }))
        })
    }

    proptest! {
        // canonical equality agrees with evaluation equality at exact rational points
        #[test]
        fn canonical_form_decides_equality(a in arb_expr(), b in arb_expr()) {
            let reg = FunctionRegistry::<Rational>::polynomial_family(3, 2);
            let points = [
                (ratio(1, 3), ratio(2, 1), ratio(1, 1)),
                (ratio(-2, 5), ratio(3, 7), ratio(3, 2)),
                (ratio(5, 2), ratio(5, 3), ratio(2, 3)),
                (ratio(7, 4), ratio(1, 9), ratio(5, 4)),
                (ratio(-1, 1), ratio(11, 5), ratio(1, 2)),
            ];
            let agree = points.iter().all(|(l, g, m)| {
                a.eval(l, g, m, &reg).unwrap() == b.eval(l, g, m, &reg).unwrap()
            });
            prop_assert_eq!(a == b, agree);
        }

        #[test]
        fn sub_self_is_zero(a in arb_expr()) {
            prop_assert!((&a - &a).is_zero());
        }
    }
}
