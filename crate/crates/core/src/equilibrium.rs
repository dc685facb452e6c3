//! Equilibrium multipliers and thermodynamics.
//!
//! At equilibrium the potential is `h'^α = H(λ, γ) μ^α`, with
//!
//! ```text
//! H(λ, γ) = −(4π/γ) m³ ∫₀^∞ F(λ, γ m cosh ρ) sinh²ρ dρ,   ∂F/∂X = f_eq.
//! ```
//!
//! The state functions follow as `n = γ H_λ`, `p = H`, `e = −H − γ H_γ`,
//! `s = −λ − γ H_γ / H_λ` and `T = 1/γ`.
//!
//! Sign convention: `H` is taken literally from the integral above, so for the
//! Jüttner family (`F < 0`) the pressure and energy come out positive while
//! `n = γ H_λ` is negative. No sign is normalized away.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::combinatorics::double_factorial;
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};
use crate::tensor_dense::{DenseSymTensor, FourVector, Metric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    /// Nondegenerate (Maxwell–Jüttner).
    Mb,
    /// Fermi–Dirac.
    Fd,
    /// Bose–Einstein.
    Be,
}

impl std::str::FromStr for Statistics {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mb" => Ok(Statistics::Mb),
            "fd" => Ok(Statistics::Fd),
            "be" => Ok(Statistics::Be),
            other => Err(Error::InvalidArgument(format!("unknown statistics {other:?}"))),
        }
    }
}

/// Boltzmann constant, Planck constant and spin weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub k_b: f64,
    pub h_planck: f64,
    pub w: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            k_b: 1.0,
            h_planck: 1.0,
            w: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermoState<T> {
    pub lambda: T,
    pub mu: FourVector<T>,
    pub mass: T,
    pub stats: Statistics,
    pub consts: Constants,
}

impl<T: Scalar> ThermoState<T> {
    pub fn new(lambda: T, mu: FourVector<T>, mass: T, stats: Statistics) -> Result<Self> {
        if mass <= T::zero() {
            return Err(Error::InvalidArgument("mass must be positive".into()));
        }
        if !mu.is_future_timelike() {
            return Err(Error::Spacelike);
        }
        Ok(ThermoState {
            lambda,
            mu,
            mass,
            stats,
            consts: Constants::default(),
        })
    }

    pub fn with_constants(mut self, consts: Constants) -> Self {
        self.consts = consts;
        self
    }

    pub fn gamma(&self) -> Result<T> {
        self.mu.gamma()
    }

    pub fn velocity(&self) -> Result<[T; 4]> {
        self.mu.velocity()
    }

    /// `−m²`
    pub fn neg_msq(&self) -> T {
        -(self.mass.clone() * self.mass.clone())
    }

    pub fn to_f64(&self) -> ThermoState<f64> {
        ThermoState {
            lambda: self.lambda.to_f64(),
            mu: self.mu.map(|v| v.to_f64()),
            mass: self.mass.to_f64(),
            stats: self.stats,
            consts: self.consts,
        }
    }
}

fn require_parity(m: usize, n: usize) -> Result<()> {
    if m % 2 != 0 || n % 2 == 0 {
        return Err(Error::Parity {
            m: m as u32,
            n: n as u32,
        });
    }
    Ok(())
}

/// `λ g_{(β1β2}⋯g_{βM-1βM)} (−m²)^{−M/2}`, rank `M`.
pub fn lambda_equilibrium<T: Scalar>(lambda: &T, m_rank: usize, mass: &T) -> Result<DenseSymTensor<T>> {
    let zero = [T::zero(), T::zero(), T::zero(), T::zero()];
    let neg_msq = -(mass.clone() * mass.clone());
    let g = DenseSymTensor::gmu_basis(m_rank, m_rank / 2, &zero)?;
    Ok(g.scale(&(lambda.clone() * neg_msq.powi(-(m_rank as i64 / 2)))))
}

/// `μ_{(β1} g_{β2β3}⋯g_{βN-1βN)} (−m²)^{−(N−1)/2}`, rank `N`.
pub fn mu_equilibrium<T: Scalar>(mu: &FourVector<T>, n_rank: usize, mass: &T) -> Result<DenseSymTensor<T>> {
    let neg_msq = -(mass.clone() * mass.clone());
    let y = DenseSymTensor::gmu_basis(n_rank, (n_rank - 1) / 2, &mu.down())?;
    Ok(y.scale(&neg_msq.powi(-((n_rank as i64 - 1) / 2))))
}

/// Both equilibrium multiplier tensors (covariant components).
pub fn equilibrium_multipliers<T: Scalar>(
    lambda: &T,
    mu: &FourVector<T>,
    m_rank: usize,
    n_rank: usize,
    mass: &T,
) -> Result<(DenseSymTensor<T>, DenseSymTensor<T>)> {
    require_parity(m_rank, n_rank)?;
    Ok((
        lambda_equilibrium(lambda, m_rank, mass)?,
        mu_equilibrium(mu, n_rank, mass)?,
    ))
}

/// `2 (M−1)!!/(M+2)!!`
pub fn lambda_projection_factor(m_rank: usize) -> Rational {
    let m = m_rank as i64;
    Rational::from_integer(2.into()) * double_factorial(m - 1).unwrap() / double_factorial(m + 2).unwrap()
}

/// `8 N!!/(N+3)!!`
pub fn mu_projection_factor(n_rank: usize) -> Rational {
    let n = n_rank as i64;
    Rational::from_integer(8.into()) * double_factorial(n).unwrap() / double_factorial(n + 3).unwrap()
}

pub fn project_lambda<T: Scalar>(lam: &DenseSymTensor<T>, mass: &T) -> Result<T> {
    let m_rank = lam.rank();
    let neg_msq = -(mass.clone() * mass.clone());
    let tr = lam.trace_n(m_rank / 2)?;
    Ok(T::from_rational(&lambda_projection_factor(m_rank))
        * tr.values()[0].clone()
        * neg_msq.powi(m_rank as i64 / 2))
}

pub fn project_mu<T: Scalar>(mu: &DenseSymTensor<T>, mass: &T) -> Result<FourVector<T>> {
    let n_rank = mu.rank();
    let neg_msq = -(mass.clone() * mass.clone());
    let tr = mu.trace_n((n_rank - 1) / 2)?;
    let f = T::from_rational(&mu_projection_factor(n_rank)) * neg_msq.powi((n_rank as i64 - 1) / 2);
    let c = [0, 1, 2, 3].map(|a| {
        let mut cnt = [0usize; 4];
        cnt[a] = 1;
        tr.at(&cnt).clone() * f.clone()
    });
    Ok(FourVector::lower(c))
}

/// Scalar and vector projections of a pair of multiplier tensors.
pub fn project_equilibrium<T: Scalar>(
    lam: &DenseSymTensor<T>,
    mu: &DenseSymTensor<T>,
    mass: &T,
) -> Result<(T, FourVector<T>)> {
    require_parity(lam.rank(), mu.rank())?;
    Ok((project_lambda(lam, mass)?, project_mu(mu, mass)?))
}

/// A function `F(X, Y)` with `∂F/∂X = f`.
pub trait Distribution: Sync {
    fn potential(&self, x: f64, y: f64) -> f64;
    /// `∂F/∂X = f_eq`
    fn density(&self, x: f64, y: f64) -> f64;
    /// `∂F/∂Y`
    fn d_potential_dy(&self, x: f64, y: f64) -> f64;
}

/// Jüttner family `f_eq = (w/h³) / (e^{(X+Y)/k} + a)` with `a ∈ {0, 1, −1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Juttner {
    pub stats: Statistics,
    pub consts: Constants,
}

impl Juttner {
    fn weight(&self) -> f64 {
        self.consts.w / self.consts.h_planck.powi(3)
    }
}

impl Distribution for Juttner {
    fn potential(&self, x: f64, y: f64) -> f64 {
        let k = self.consts.k_b;
        let u = (x + y) / k;
        let c = self.weight();
        match self.stats {
            Statistics::Mb => -k * c * (-u).exp(),
            Statistics::Fd => -k * c * (-u).exp().ln_1p(),
            Statistics::Be => k * c * (-(-u).exp()).ln_1p(),
        }
    }

    fn density(&self, x: f64, y: f64) -> f64 {
        let u = (x + y) / self.consts.k_b;
        let c = self.weight();
        // written with e^{-u} so large u does not overflow
        let e = (-u).exp();
        match self.stats {
            Statistics::Mb => c * e,
            Statistics::Fd => c * e / (1.0 + e),
            Statistics::Be => c * e / (1.0 - e),
        }
    }

    fn d_potential_dy(&self, x: f64, y: f64) -> f64 {
        self.density(x, y)
    }
}

/// `∫₀^∞ g(ρ) dρ` for an integrand that decays at least exponentially.
pub fn integrate_half_line(g: impl Fn(f64) -> f64) -> Result<f64> {
    let step = 0.25;
    let mut rho = 0.0;
    let mut peak = 0.0f64;
    let mut peak_at = 0.0;
    loop {
        let v = g(rho).abs();
        if !v.is_finite() {
            return Err(Error::Quadrature(format!("integrand not finite at rho = {rho}")));
        }
        if v > peak {
            peak = v;
            peak_at = rho;
        }
        if rho > peak_at && v <= 1e-22 * peak {
            break;
        }
        rho += step;
        if rho > 60.0 {
            return Err(Error::Quadrature("integrand does not decay".into()));
        }
    }
    if peak == 0.0 {
        return Ok(0.0);
    }
    let upper = rho;
    let tol = 1e-16 * peak * upper;
    // panels keep the double-exponential rule well resolved
    let panels = ((upper / 2.0).ceil() as usize).max(1);
    let width = upper / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = i as f64 * width;
        let out = quadrature::double_exponential::integrate(&g, a, a + width, tol / panels as f64);
        if !out.integral.is_finite() {
            return Err(Error::Quadrature("non-finite panel".into()));
        }
        total += out.integral;
    }
    Ok(total)
}

/// `H(λ, γ)` for an arbitrary `F`.
pub fn h_from_distribution(
    f: impl Fn(f64, f64) -> f64,
    lambda: f64,
    gamma: f64,
    mass: f64,
) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::NonPositiveGamma);
    }
    let i = integrate_half_line(|rho| {
        let s = rho.sinh();
        f(lambda, gamma * mass * rho.cosh()) * s * s
    })?;
    Ok(-4.0 * PI / gamma * mass.powi(3) * i)
}

/// `H` and its two partial derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Potential {
    pub h: f64,
    pub h_lambda: f64,
    pub h_gamma: f64,
}

pub fn potential(dist: &dyn Distribution, lambda: f64, gamma: f64, mass: f64) -> Result<Potential> {
    if gamma <= 0.0 {
        return Err(Error::NonPositiveGamma);
    }
    let pre = -4.0 * PI / gamma * mass.powi(3);
    let h = h_from_distribution(|x, y| dist.potential(x, y), lambda, gamma, mass)?;
    let h_lambda = pre
        * integrate_half_line(|rho| {
            let s = rho.sinh();
            dist.density(lambda, gamma * mass * rho.cosh()) * s * s
        })?;
    let dy = integrate_half_line(|rho| {
        let (s, c) = (rho.sinh(), rho.cosh());
        dist.d_potential_dy(lambda, gamma * mass * c) * mass * c * s * s
    })?;
    Ok(Potential {
        h,
        h_lambda,
        h_gamma: -h / gamma + pre * dy,
    })
}

/// Potential of a state with its own Jüttner distribution.
pub fn state_potential(state: &ThermoState<f64>, lambda: f64, gamma: f64) -> Result<Potential> {
    if state.stats == Statistics::Be && lambda + gamma * state.mass <= 0.0 {
        return Err(Error::InvalidArgument(
            "Bose statistics need lambda + gamma m > 0".into(),
        ));
    }
    let dist = Juttner {
        stats: state.stats,
        consts: state.consts,
    };
    potential(&dist, lambda, gamma, state.mass)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquilibriumFunctions {
    pub h: f64,
    pub h_lambda: f64,
    pub h_gamma: f64,
    pub n: f64,
    pub p: f64,
    pub e: f64,
    pub s: f64,
    pub t: f64,
}

pub fn state_functions(h: f64, h_lambda: f64, h_gamma: f64, lambda: f64, gamma: f64) -> Result<EquilibriumFunctions> {
    if gamma <= 0.0 {
        return Err(Error::NonPositiveGamma);
    }
    if h_lambda == 0.0 {
        return Err(Error::UndefinedEntropy);
    }
    Ok(EquilibriumFunctions {
        h,
        h_lambda,
        h_gamma,
        n: gamma * h_lambda,
        p: h,
        e: -h - gamma * h_gamma,
        s: -lambda - gamma * h_gamma / h_lambda,
        t: 1.0 / gamma,
    })
}

pub fn functions_at(pot: &Potential, lambda: f64, gamma: f64) -> Result<EquilibriumFunctions> {
    state_functions(pot.h, pot.h_lambda, pot.h_gamma, lambda, gamma)
}

/// Relative residuals of the Gibbs relation along λ and γ, and of the
/// integrability condition `(e+p) n_p − γ n_γ = n e_p` in `(γ, p)` variables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GibbsReport {
    pub lambda_direction: f64,
    pub gamma_direction: f64,
    pub integrability: f64,
}

impl GibbsReport {
    pub fn max(&self) -> f64 {
        self.lambda_direction
            .max(self.gamma_direction)
            .max(self.integrability)
    }
}

fn five_point(f: impl Fn(f64) -> Result<[f64; 5]>, x: f64, h: f64) -> Result<[f64; 5]> {
    let a = f(x - 2.0 * h)?;
    let b = f(x - h)?;
    let c = f(x + h)?;
    let d = f(x + 2.0 * h)?;
    let mut out = [0.0; 5];
    for i in 0..5 {
        out[i] = (a[i] - 8.0 * b[i] + 8.0 * c[i] - d[i]) / (12.0 * h);
    }
    Ok(out)
}

fn rel(terms: &[f64]) -> f64 {
    let sum: f64 = terms.iter().sum();
    let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        sum.abs() / scale
    }
}

/// Gibbs and integrability residuals for a potential given as a function of `(λ, γ)`.
pub fn gibbs_residual(
    pot: impl Fn(f64, f64) -> Result<Potential>,
    lambda: f64,
    gamma: f64,
) -> Result<GibbsReport> {
    // [s, e/n, 1/n, n, e] at a point
    let fields = |l: f64, g: f64| -> Result<[f64; 5]> {
        let f = functions_at(&pot(l, g)?, l, g)?;
        Ok([f.s, f.e / f.n, 1.0 / f.n, f.n, f.e])
    };
    let f0 = functions_at(&pot(lambda, gamma)?, lambda, gamma)?;
    let hl = 1e-3 * lambda.abs().max(1.0);
    let hg = 1e-3 * gamma;
    let dl = five_point(|l| fields(l, gamma), lambda, hl)?;
    let dg = five_point(|g| fields(lambda, g), gamma, hg)?;
    let gibbs = |d: &[f64; 5]| rel(&[f0.t * d[0], -d[1], -f0.p * d[2]]);

    // p derivatives from H directly
    let p_of = |l: f64, g: f64| -> Result<[f64; 5]> { Ok([pot(l, g)?.h, 0.0, 0.0, 0.0, 0.0]) };
    let pl = five_point(|l| p_of(l, gamma), lambda, hl)?[0];
    let pg = five_point(|g| p_of(lambda, g), gamma, hg)?[0];
    let (nl, ng, el) = (dl[3], dg[3], dl[4]);
    let n_p = nl / pl;
    let e_p = el / pl;
    let n_g = ng - nl * pg / pl;
    let integrability = rel(&[(f0.e + f0.p) * n_p, -gamma * n_g, -f0.n * e_p]);
    Ok(GibbsReport {
        lambda_direction: gibbs(&dl),
        gamma_direction: gibbs(&dg),
        integrability,
    })
}

/// Equilibrium potential and first moments.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumHprime {
    pub hprime: [f64; 4],
    pub a: [f64; 4],
    pub b: DenseSymTensor<f64>,
    pub functions: EquilibriumFunctions,
}

pub fn equilibrium_hprime(state: &ThermoState<f64>) -> Result<EquilibriumHprime> {
    let gamma = state.gamma()?;
    let pot = state_potential(state, state.lambda, gamma)?;
    let functions = functions_at(&pot, state.lambda, gamma)?;
    let mu = state.mu.up();
    let hprime = mu.map(|v| pot.h * v);
    let a = mu.map(|v| pot.h_lambda * v);
    let b = DenseSymTensor::from_fn(2, |c| {
        let idx = crate::tensor_dense::index_of(c);
        let (i, j) = (idx[0], idx[1]);
        -pot.h_gamma / gamma * mu[i] * mu[j] + pot.h * Metric::component::<f64>(i, j)
    });
    Ok(EquilibriumHprime {
        hprime,
        a,
        b,
        functions,
    })
}
