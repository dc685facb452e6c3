//! Tensors symmetric together with their μ-derivative, in coefficient space.
//!
//! A rank-`n` element is `Σ_s φ_s Y^n_s` with `Y^n_s = sym(g^s μ^{n-2s})`,
//! `s = 0..=⌊n/2⌋`. Every coefficient is an exact [`ScalarExpr`]; the
//! top one (`s = ⌊n/2⌋`) is the leading term and fixes all the others
//! through the characteristic condition
//!
//! ```text
//! (2s/γ) ∂φ_s/∂γ + (n-2s+2)(n-2s+1) φ_{s-1} = 0,   s = 1..=⌊n/2⌋.
//! ```

use serde::{Deserialize, Serialize};

use crate::combinatorics::{double_factorial, double_factorial_ratio, eta, factorial_rat};
use crate::error::{Error, Result};
use crate::scalar::{rat, Rational, Scalar};
use crate::scalar_expr::{FunctionRegistry, ScalarExpr};
use crate::tensor_dense::{DenseSymTensor, FourVector};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FFamilyElement {
    rank: usize,
    phi: Vec<ScalarExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacteristicReport {
    pub holds: bool,
    /// Residual of the relation at `s`, stored at index `s - 1`.
    pub residuals: Vec<ScalarExpr>,
}

/// `γ^{-2(3+p)}` ↦ `p`.
pub fn admissible_p(gamma_pow: i64) -> Result<i64> {
    if gamma_pow > -6 || gamma_pow % 2 != 0 {
        return Err(Error::InadmissibleMonomial { gamma_pow });
    }
    Ok(-gamma_pow / 2 - 3)
}

impl FFamilyElement {
    pub fn new(rank: usize, phi: Vec<ScalarExpr>) -> Result<Self> {
        if phi.len() != rank / 2 + 1 {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} needs {} coefficients, got {}",
                rank / 2 + 1,
                phi.len()
            )));
        }
        Ok(FFamilyElement { rank, phi })
    }

    pub fn zero(rank: usize) -> Self {
        FFamilyElement {
            rank,
            phi: vec![ScalarExpr::zero(); rank / 2 + 1],
        }
    }

    /// The element with the given leading term; lower coefficients follow
    /// from the characteristic condition.
    pub fn from_leading(rank: usize, leading: ScalarExpr) -> Self {
        let top = rank / 2;
        let mut phi = vec![ScalarExpr::zero(); top + 1];
        phi[top] = leading;
        for s in (1..=top).rev() {
            let n = rank as i64;
            let s_i = s as i64;
            let denom = (n - 2 * s_i + 2) * (n - 2 * s_i + 1);
            phi[s - 1] = phi[s]
                .d_gamma()
                .mul_monomial(&Rational::new((-2 * s_i).into(), denom.into()), -1, 0);
        }
        FFamilyElement { rank, phi }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn phi(&self) -> &[ScalarExpr] {
        &self.phi
    }

    pub fn coeff(&self, s: usize) -> &ScalarExpr {
        &self.phi[s]
    }

    pub fn leading(&self) -> &ScalarExpr {
        &self.phi[self.rank / 2]
    }

    pub fn is_zero(&self) -> bool {
        self.phi.iter().all(ScalarExpr::is_zero)
    }

    pub fn check_characteristic(&self) -> CharacteristicReport {
        let n = self.rank as i64;
        let residuals: Vec<ScalarExpr> = (1..=self.rank / 2)
            .map(|s| {
                let s_i = s as i64;
                let a = self.phi[s].d_gamma().mul_monomial(&rat(2 * s_i), -1, 0);
                let b = self.phi[s - 1].scale(&rat((n - 2 * s_i + 2) * (n - 2 * s_i + 1)));
                a + b
            })
            .collect();
        CharacteristicReport {
            holds: residuals.iter().all(ScalarExpr::is_zero),
            residuals,
        }
    }

    fn require_characteristic(&self) -> Result<()> {
        let rep = self.check_characteristic();
        match rep.residuals.iter().position(|r| !r.is_zero()) {
            None => Ok(()),
            Some(i) => Err(Error::CharacteristicViolation {
                rank: self.rank,
                s: i + 1,
            }),
        }
    }

    /// `∂/∂μ_β`, rank `n → n+1`.
    pub fn mu_derivative(&self) -> Result<Self> {
        self.require_characteristic()?;
        let n = self.rank as i64;
        let top = (self.rank + 1) / 2;
        let mut phi = Vec::with_capacity(top + 1);
        phi.push(self.phi[0].d_gamma().mul_monomial(&rat(-1), -1, 0));
        for s in 1..=top {
            let s_i = s as i64;
            let c = Rational::new(((n + 1) * (n - 2 * s_i + 2)).into(), (2 * s_i).into());
            phi.push(self.phi[s - 1].scale(&c));
        }
        Ok(FFamilyElement {
            rank: self.rank + 1,
            phi,
        })
    }

    pub fn mu_derivative_n(&self, k: usize) -> Result<Self> {
        let mut f = self.clone();
        for _ in 0..k {
            f = f.mu_derivative()?;
        }
        Ok(f)
    }

    /// Contraction of one index pair with `g`, rank `n+2 → n`.
    pub fn trace(&self) -> Result<Self> {
        if self.rank < 2 {
            return Err(Error::RankTooSmall {
                op: "trace",
                rank: self.rank,
            });
        }
        let n = (self.rank - 2) as i64;
        let denom = Rational::from_integer(((n + 2) * (n + 1)).into());
        let phi = (0..=(self.rank - 2) / 2)
            .map(|s| {
                let s_i = s as i64;
                let a = self.phi[s + 1].scale(&rat(4 * (s_i + 1) * (n - s_i + 2)));
                let b = self.phi[s].mul_monomial(
                    &rat(-(n + 2 - 2 * s_i) * (n + 1 - 2 * s_i)),
                    2,
                    0,
                );
                (a + b).scale(&(Rational::from_integer(1.into()) / denom.clone()))
            })
            .collect();
        Ok(FFamilyElement {
            rank: self.rank - 2,
            phi,
        })
    }

    pub fn trace_n(&self, r: usize) -> Result<Self> {
        let mut f = self.clone();
        for _ in 0..r {
            f = f.trace()?;
        }
        Ok(f)
    }

    pub fn d_lambda(&self) -> Self {
        self.map(ScalarExpr::d_lambda)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        self.map(|e| e.scale(c))
    }

    /// Multiplies every coefficient by `c (−m²)^j`.
    pub fn mul_msq(&self, c: &Rational, j: i64) -> Self {
        self.map(|e| e.mul_monomial(c, 0, j))
    }

    pub fn map(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> Self {
        FFamilyElement {
            rank: self.rank,
            phi: self.phi.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_rank(other)?;
        Ok(FFamilyElement {
            rank: self.rank,
            phi: self.phi.iter().zip(&other.phi).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_rank(other)?;
        Ok(FFamilyElement {
            rank: self.rank,
            phi: self.phi.iter().zip(&other.phi).map(|(a, b)| a - b).collect(),
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

    /// One step of the trace inverse: an element of rank `n+2` whose trace is `self`.
    ///
    /// `free` is the integration constant, a function of λ only.
    pub fn lift_once(&self, free: &ScalarExpr) -> Result<Self> {
        if !free.is_gamma_free() {
            return Err(Error::GammaDependentFreeFunction);
        }
        let n = self.rank as i64;
        let half = (n + 2) / 2;
        let a = 2 * (n + 3 - half);
        let k = Rational::new(((n + 1) * (n + 2)).into(), (2 * half).into());
        let integral = self.leading().mul_gamma(a - 1).integrate_gamma()?;
        let leading = (integral + free.clone()).mul_monomial(&k, -a, 0);
        Ok(Self::from_leading(self.rank + 2, leading))
    }

    /// `r`-fold trace inverse in closed form. `free[i]` multiplies
    /// `γ^{-2(3+m+i-⌊(m+2)/2⌋)}` in the new leading term.
    pub fn lift(&self, r: usize, free: &[ScalarExpr]) -> Result<Self> {
        if free.len() != r {
            return Err(Error::Arity {
                expected: r,
                got: free.len(),
            });
        }
        if free.iter().any(|f| !f.is_gamma_free()) {
            return Err(Error::GammaDependentFreeFunction);
        }
        let m = self.rank as i64;
        let r_i = r as i64;
        let hm = m / 2;
        let lo = m - hm - 1;
        let hi = m - hm + r_i - 2;
        let pre = factorial_rat((m + 2 * r_i) as u64) / factorial_rat(m as u64)
            * double_factorial_ratio(2 * hm, 2 * hm + 2 * r_i)?;
        let mut leading = ScalarExpr::zero();
        for t in self.leading().terms() {
            let p = admissible_p(t.gamma_pow)?;
            if r > 0 && lo <= p && p <= hi {
                return Err(Error::LiftHypothesis {
                    p,
                    m: self.rank,
                    r,
                    gamma_pow: t.gamma_pow,
                });
            }
            let a = 2 * m - 2 * hm - 2 * p - 4;
            let ratio = double_factorial_ratio(a, a + 2 * r_i).map_err(|_| Error::LiftHypothesis {
                p,
                m: self.rank,
                r,
                gamma_pow: t.gamma_pow,
            })?;
            let c = t.coeff.clone() * pre.clone() * ratio;
            leading += &ScalarExpr::monomial(c, t.gamma_pow, t.msq_pow, t.sym);
        }
        let half2 = (m + 2) / 2;
        for (i, f) in free.iter().enumerate() {
            leading += &f.mul_gamma(-2 * (3 + m + i as i64 - half2));
        }
        Ok(Self::from_leading(self.rank + 2 * r, leading))
    }

    /// Leading coefficient of the `r`-fold trace, monomial by monomial.
    pub fn leading_after_traces(&self, r: usize) -> Result<ScalarExpr> {
        if 2 * r > self.rank {
            return Err(Error::RankTooSmall {
                op: "leading_after_traces",
                rank: self.rank,
            });
        }
        let r_i = r as i64;
        let nn = 2 * ((self.rank as i64 + 1) / 2);
        let pre = double_factorial(nn - 2 * r_i - 1)? / double_factorial(nn - 1)?;
        let mut out = ScalarExpr::zero();
        for t in self.leading().terms() {
            let p = admissible_p(t.gamma_pow)?;
            let e = Rational::from_integer(eta(nn - 2 * r_i - 2 - 2 * p, nn - 4 - 2 * p));
            out += &ScalarExpr::monomial(t.coeff * pre.clone() * e, t.gamma_pow, t.msq_pow, t.sym);
        }
        Ok(out)
    }

    /// `Σ_s φ_s(λ, γ) Y^n_s(μ)` at a point.
    pub fn realize<T: Scalar>(
        &self,
        lambda: &T,
        mu: &FourVector<T>,
        mass: &T,
        registry: &FunctionRegistry<T>,
    ) -> Result<DenseSymTensor<T>> {
        let gamma = mu.gamma()?;
        let up = mu.up();
        let mut acc = DenseSymTensor::zeros(self.rank);
        for (s, phi) in self.phi.iter().enumerate() {
            if phi.is_zero() {
                continue;
            }
            let v = phi.eval(lambda, &gamma, mass, registry)?;
            let basis = DenseSymTensor::gmu_basis(self.rank, s, &up)?;
            acc = acc.add(&basis.scale(&v))?;
        }
        Ok(acc)
    }

    /// Returns a copy with the first term of `φ_s` rescaled (negative controls).
    pub fn perturbed(&self, s: usize, factor: &Rational) -> Self {
        let mut out = self.clone();
        out.phi[s] = out.phi[s].perturb_first_term(factor);
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

/// Coefficients of `g^{(α1α2}⋯g^{α_{n-1}α_n)} μ_{α_{n-r+1}}⋯μ_{α_n}` in the
/// `g–μ` basis of rank `n - r`, for even `n`.
pub fn basis_mu_contraction(n: usize, r: usize) -> Result<FFamilyElement> {
    if n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("rank {n} must be even")));
    }
    if r > n {
        return Err(Error::RankTooSmall {
            op: "basis_mu_contraction",
            rank: n,
        });
    }
    let rank = n - r;
    let top = rank / 2;
    let mut phi = vec![ScalarExpr::zero(); top + 1];
    if r <= 1 {
        phi[top] = ScalarExpr::constant(rat(1));
        return FFamilyElement::new(rank, phi);
    }
    let (n_i, r_i) = (n as i64, r as i64);
    let low = (n_i / 2 - r_i).max(0) as usize;
    for (s, slot) in phi.iter_mut().enumerate().skip(low) {
        let s_i = s as i64;
        let num = factorial_rat(r as u64) * factorial_rat((n - r) as u64);
        let den = double_factorial(2 * s_i + 2 * r_i - n_i)?
            * double_factorial(2 * s_i)?
            * factorial_rat((n_i - r_i - 2 * s_i) as u64)
            * double_factorial(n_i - 1)?;
        let j = s_i + r_i - n_i / 2;
        let sign = if j % 2 == 0 { rat(1) } else { rat(-1) };
        *slot = ScalarExpr::monomial(num / den * sign, 2 * j, 0, None);
    }
    FFamilyElement::new(rank, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use crate::scalar_expr::Symbol;

    fn monomial_rank2_element() -> FFamilyElement {
        let h = ScalarExpr::gamma_pow(-4);
        let phi0 = h.d_gamma().mul_monomial(&rat(-1), -1, 0);
        FFamilyElement::new(2, vec![phi0, h]).unwrap()
    }

    #[test]
    fn characteristic_examples() {
        assert!(monomial_rank2_element().check_characteristic().holds);
        let bad = FFamilyElement::new(2, vec![ScalarExpr::zero(), ScalarExpr::gamma_pow(1)]).unwrap();
        let rep = bad.check_characteristic();
        assert!(!rep.holds);
        assert_eq!(rep.residuals[0], ScalarExpr::monomial(rat(2), -1, 0, None));
        assert!(FFamilyElement::zero(5).check_characteristic().holds);
    }

    #[test]
    fn mu_derivative_examples() {
        let mu = FFamilyElement::new(1, vec![ScalarExpr::constant(rat(1))]).unwrap();
        let g = mu.mu_derivative().unwrap();
        assert_eq!(g.phi(), &[ScalarExpr::zero(), ScalarExpr::constant(rat(1))]);

        let h = ScalarExpr::monomial(rat(1), -4, 0, Some(Symbol::new(0, 0)));
        let hmu = FFamilyElement::new(1, vec![h.clone()]).unwrap();
        let b = hmu.mu_derivative().unwrap();
        assert_eq!(b.coeff(1), &h);
        assert_eq!(b.coeff(0), &h.d_gamma().mul_monomial(&rat(-1), -1, 0));
        assert!(FFamilyElement::zero(3).mu_derivative().unwrap().is_zero());
    }

    #[test]
    fn trace_examples() {
        // 4H + γ ∂H/∂γ for H = γ^-4 is 0
        assert!(monomial_rank2_element().trace().unwrap().is_zero());
        let h = ScalarExpr::gamma_pow(-2);
        let b = FFamilyElement::new(1, vec![h.clone()]).unwrap().mu_derivative().unwrap();
        let expected = &h.scale(&rat(4)) + &h.d_gamma().mul_gamma(1);
        assert_eq!(b.trace().unwrap().coeff(0), &expected);

        let y42 = FFamilyElement::new(4, vec![ScalarExpr::zero(), ScalarExpr::zero(), ScalarExpr::constant(rat(1))]).unwrap();
        let t = y42.trace().unwrap();
        assert_eq!(t.phi(), &[ScalarExpr::zero(), ScalarExpr::constant(rat(2))]);
        assert!(matches!(FFamilyElement::zero(1).trace(), Err(Error::RankTooSmall { .. })));
    }

    #[test]
    fn lift_examples() {
        let f = ScalarExpr::monomial(rat(1), -10, 0, Some(Symbol::new(0, 0)));
        let el = FFamilyElement::from_leading(1, f.clone());
        let up = el.lift(1, &[ScalarExpr::zero()]).unwrap();
        assert_eq!(up.leading(), &f.scale(&ratio(-3, 4)));
        assert_eq!(up.trace().unwrap(), el);
        assert!(FFamilyElement::zero(3).lift(2, &[ScalarExpr::zero(), ScalarExpr::zero()]).unwrap().is_zero());
        assert!(matches!(el.lift(1, &[]), Err(Error::Arity { .. })));
        // p = 0 is excluded for m = 1, r = 1
        let bad = FFamilyElement::from_leading(1, ScalarExpr::gamma_pow(-6));
        assert!(matches!(bad.lift(1, &[ScalarExpr::zero()]), Err(Error::LiftHypothesis { .. })));
    }

    #[test]
    fn lift_once_matches_closed_form() {
        let f = ScalarExpr::monomial(ratio(5, 3), -12, 1, Some(Symbol::new(1, 2)));
        let el = FFamilyElement::from_leading(3, f);
        let c = ScalarExpr::symbol(4, 0);
        let a = el.lift_once(&c).unwrap();
        assert_eq!(a.trace().unwrap(), el);
        let n = 3i64;
        let half = (n + 2) / 2;
        let k = Rational::new(((n + 1) * (n + 2)).into(), (2 * half).into());
        let b = el.lift(1, &[c.scale(&k)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leading_after_traces_examples() {
        let el = FFamilyElement::from_leading(4, ScalarExpr::gamma_pow(-6));
        assert_eq!(el.leading_after_traces(0).unwrap(), ScalarExpr::gamma_pow(-6));
        assert!(el.leading_after_traces(1).unwrap().is_zero());
        assert_eq!(el.trace().unwrap().leading(), &ScalarExpr::zero());
    }

    #[test]
    fn prop8_table() {
        let t = basis_mu_contraction(4, 2).unwrap();
        assert_eq!(t.coeff(0), &ScalarExpr::constant(ratio(2, 3)));
        assert_eq!(t.coeff(1), &ScalarExpr::monomial(ratio(-1, 3), 2, 0, None));
        let t = basis_mu_contraction(2, 2).unwrap();
        assert_eq!(t.coeff(0), &ScalarExpr::monomial(rat(-1), 2, 0, None));
        let t = basis_mu_contraction(4, 4).unwrap();
        assert_eq!(t.coeff(0), &ScalarExpr::monomial(rat(1), 4, 0, None));
        let t = basis_mu_contraction(6, 0).unwrap();
        assert_eq!(t.leading(), &ScalarExpr::constant(rat(1)));
        assert!(t.phi()[..3].iter().all(ScalarExpr::is_zero));
        let t = basis_mu_contraction(8, 2).unwrap();
        assert!(t.coeff(0).is_zero() && t.coeff(1).is_zero());
    }

    #[test]
    fn realize_z2() {
        let reg = FunctionRegistry::<f64>::new(0);
        let mu = FourVector::upper([1.0, 0.0, 0.0, 0.0]);
        let t = monomial_rank2_element().realize(&0.0, &mu, &1.0, &reg).unwrap();
        assert_eq!(*t.get(&[0, 0]), 3.0);
        assert_eq!(*t.get(&[1, 1]), 1.0);
        assert_eq!(*t.get(&[0, 1]), 0.0);
    }

    #[test]
    fn json_shape() {
        let v = monomial_rank2_element().to_json();
        assert_eq!(v["rank"], 2);
        assert_eq!(v["phi"].as_array().unwrap().len(), 2);
        let back: FFamilyElement = serde_json::from_value(v).unwrap();
        assert_eq!(back, monomial_rank2_element());
    }
}
