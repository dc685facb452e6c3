//! Near-equilibrium expansion of the potential and kinetic moments at equilibrium.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::closure::{ClosureSpec, ClosureTensorSet};
use crate::combinatorics::{double_factorial, factorial};
use crate::equilibrium::{
    equilibrium_hprime, lambda_equilibrium, mu_equilibrium, project_lambda, project_mu, Juttner,
    Distribution, ThermoState,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scalar_expr::FunctionRegistry;
use crate::tensor_dense::{all_counts, index_of, multiplicity, DenseSymTensor, FourVector};

/// Removes the equilibrium-shaped part of a multiplier tensor. Even ranks are
/// treated as `λ`-type, odd ranks as `μ`-type.
pub fn make_deviation<T: Scalar>(raw: &DenseSymTensor<T>, mass: &T) -> Result<DenseSymTensor<T>> {
    let rank = raw.rank();
    let eq = if rank % 2 == 0 {
        lambda_equilibrium(&project_lambda(raw, mass)?, rank, mass)?
    } else {
        mu_equilibrium(&project_mu(raw, mass)?, rank, mass)?
    };
    raw.sub(&eq)
}

/// Registry with a polynomial `c_q` for every symbol a closure set uses.
pub fn registry_for(set: &ClosureTensorSet) -> FunctionRegistry<f64> {
    let mut q_max = 0;
    let mut h_max = 0;
    for (_, t) in set.iter() {
        for phi in t.phi() {
            for s in phi.symbols() {
                q_max = q_max.max(s.q);
                h_max = h_max.max(s.h);
            }
        }
    }
    FunctionRegistry::polynomial_family(q_max + 1, h_max + 1)
}

pub struct MultiplierState {
    pub base: ThermoState<f64>,
    pub lambda_dev: DenseSymTensor<f64>,
    pub mu_dev: DenseSymTensor<f64>,
    pub closure: ClosureTensorSet,
    pub registry: FunctionRegistry<f64>,
}

impl MultiplierState {
    /// Deviations are projected so that they carry no equilibrium part.
    pub fn new(
        base: ThermoState<f64>,
        lambda_dev: &DenseSymTensor<f64>,
        mu_dev: &DenseSymTensor<f64>,
        closure: ClosureTensorSet,
    ) -> Result<Self> {
        let spec = closure.spec;
        if lambda_dev.rank() != spec.m as usize || mu_dev.rank() != spec.n as usize {
            return Err(Error::RankMismatch {
                expected: (spec.m + spec.n) as usize,
                got: lambda_dev.rank() + mu_dev.rank(),
            });
        }
        let registry = registry_for(&closure);
        Ok(MultiplierState {
            lambda_dev: make_deviation(lambda_dev, &base.mass)?,
            mu_dev: make_deviation(mu_dev, &base.mass)?,
            base,
            closure,
            registry,
        })
    }

    /// A state with both deviations zero.
    pub fn at_equilibrium(base: ThermoState<f64>, closure: ClosureTensorSet) -> Result<Self> {
        let spec = closure.spec;
        let l = DenseSymTensor::zeros(spec.m as usize);
        let u = DenseSymTensor::zeros(spec.n as usize);
        Self::new(base, &l, &u, closure)
    }

    pub fn spec(&self) -> ClosureSpec {
        self.closure.spec
    }

    /// Full multipliers `λ_A = λ_eq + λ̃`, `μ_B = μ_eq + μ̃`.
    pub fn full_multipliers(&self) -> Result<(DenseSymTensor<f64>, DenseSymTensor<f64>)> {
        let spec = self.spec();
        let m = self.base.mass;
        let l = lambda_equilibrium(&self.base.lambda, spec.m as usize, &m)?.add(&self.lambda_dev)?;
        let u = mu_equilibrium(&self.base.mu, spec.n as usize, &m)?.add(&self.mu_dev)?;
        Ok((l, u))
    }
}

/// `Σ_{h,k} (1/h!k!) C_{h,k} λ̃^h μ̃^k` at the base state.
pub fn delta_hprime(state: &MultiplierState) -> Result<[f64; 4]> {
    series(
        &state.closure,
        &state.registry,
        state.base.lambda,
        &state.base.mu,
        state.base.mass,
        &state.lambda_dev,
        &state.mu_dev,
    )
}

/// Contribution of every order separately.
pub fn delta_hprime_orders(state: &MultiplierState) -> Result<Vec<((u32, u32), [f64; 4])>> {
    state
        .closure
        .iter()
        .map(|(&(h, k), c)| {
            let t = order_term(
                c,
                h,
                k,
                &state.registry,
                state.base.lambda,
                &state.base.mu,
                state.base.mass,
                &state.lambda_dev,
                &state.mu_dev,
            )?;
            Ok(((h, k), t))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn order_term(
    c: &crate::f_family::FFamilyElement,
    h: u32,
    k: u32,
    registry: &FunctionRegistry<f64>,
    lambda: f64,
    mu: &FourVector<f64>,
    mass: f64,
    lam_dev: &DenseSymTensor<f64>,
    mu_dev: &DenseSymTensor<f64>,
) -> Result<[f64; 4]> {
    if c.is_zero() || (h > 0 && lam_dev.max_abs() == 0.0) || (k > 0 && mu_dev.max_abs() == 0.0) {
        return Ok([0.0; 4]);
    }
    let mut t = c.realize(&lambda, mu, &mass, registry)?;
    for _ in 0..h {
        t = t.contract_sym(lam_dev)?;
    }
    for _ in 0..k {
        t = t.contract_sym(mu_dev)?;
    }
    let w = num_traits::ToPrimitive::to_f64(&(factorial(h as u64) * factorial(k as u64))).unwrap_or(f64::INFINITY);
    Ok([0, 1, 2, 3].map(|a| {
        let mut cnt = [0usize; 4];
        cnt[a] = 1;
        *t.at(&cnt) / w
    }))
}

fn series(
    set: &ClosureTensorSet,
    registry: &FunctionRegistry<f64>,
    lambda: f64,
    mu: &FourVector<f64>,
    mass: f64,
    lam_dev: &DenseSymTensor<f64>,
    mu_dev: &DenseSymTensor<f64>,
) -> Result<[f64; 4]> {
    let mut acc = [0.0; 4];
    for (&(h, k), c) in set.iter() {
        let t = order_term(c, h, k, registry, lambda, mu, mass, lam_dev, mu_dev)?;
        for a in 0..4 {
            acc[a] += t[a];
        }
    }
    Ok(acc)
}

/// `Δh′` as a function of the full multipliers: the base state is recovered
/// by projection and the deviations by subtraction.
fn delta_hprime_full(
    set: &ClosureTensorSet,
    registry: &FunctionRegistry<f64>,
    mass: f64,
    lam: &DenseSymTensor<f64>,
    mu: &DenseSymTensor<f64>,
) -> Result<[f64; 4]> {
    let lambda = project_lambda(lam, &mass)?;
    let mu_v = project_mu(mu, &mass)?;
    let lam_dev = lam.sub(&lambda_equilibrium(&lambda, lam.rank(), &mass)?)?;
    let mu_dev = mu.sub(&mu_equilibrium(&mu_v, mu.rank(), &mass)?)?;
    series(set, registry, lambda, &mu_v, mass, &lam_dev, &mu_dev)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// Largest antisymmetric part of `∂Δh′^α/∂λ_{α1⋯}` relative to the largest derivative.
    pub lambda: f64,
    /// Same for `μ_{β1⋯}`.
    pub mu: f64,
}

impl SymmetryReport {
    pub fn max(&self) -> f64 {
        self.lambda.max(self.mu)
    }
}

/// Derivatives `X^{α J}` of `Δh′^α` with respect to each component of the
/// `which`-th multiplier, one rank-`r` array of canonical entries per `α`.
fn derivative_table(
    state: &MultiplierState,
    which: usize,
    step: f64,
) -> Result<Vec<[f64; 4]>> {
    let (lam, mu) = state.full_multipliers()?;
    let rank = if which == 0 { lam.rank() } else { mu.rank() };
    let counts = all_counts(rank);
    let mass = state.base.mass;
    counts
        .par_iter()
        .map(|c| {
            let eval = |t: f64| -> Result<[f64; 4]> {
                let (mut l, mut u) = (lam.clone(), mu.clone());
                let target = if which == 0 { &mut l } else { &mut u };
                let v = *target.at(c);
                target.set(c, v + t);
                delta_hprime_full(&state.closure, &state.registry, mass, &l, &u)
            };
            let (a, b, d, e) = (eval(-2.0 * step)?, eval(-step)?, eval(step)?, eval(2.0 * step)?);
            // one canonical entry stands for all its permutations
            let w = multiplicity(c).to_f64();
            Ok([0, 1, 2, 3].map(|i| (a[i] - 8.0 * b[i] + 8.0 * d[i] - e[i]) / (12.0 * step * w)))
        })
        .collect()
}

fn antisymmetry(table: &[[f64; 4]], rank: usize) -> f64 {
    let counts = all_counts(rank);
    let scale = table
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let pos = |c: &[usize; 4]| crate::tensor_dense::position(rank, c);
    let mut worst = 0.0f64;
    for c in &counts {
        for alpha in 0..4 {
            for beta in 0..4 {
                if c[beta] == 0 || beta == alpha {
                    continue;
                }
                let mut d = *c;
                d[beta] -= 1;
                d[alpha] += 1;
                let diff = table[pos(c)][alpha] - table[pos(&d)][beta];
                worst = worst.max(diff.abs());
            }
        }
    }
    worst / scale
}

/// Antisymmetric part of the multiplier derivatives of `Δh′` by finite differences.
pub fn symmetry_residual(state: &MultiplierState, step: f64) -> Result<SymmetryReport> {
    if step <= 0.0 {
        return Err(Error::StepDegeneracy);
    }
    let spec = state.spec();
    let lam = derivative_table(state, 0, step)?;
    let mu = derivative_table(state, 1, step)?;
    Ok(SymmetryReport {
        lambda: antisymmetry(&lam, spec.m as usize),
        mu: antisymmetry(&mu, spec.n as usize),
    })
}

/// Boost taking the rest frame to the frame moving with `u^α`.
pub fn boost(u: &[f64; 4]) -> [[f64; 4]; 4] {
    let mut l = [[0.0; 4]; 4];
    l[0][0] = u[0];
    for i in 1..4 {
        l[0][i] = u[i];
        l[i][0] = u[i];
        for j in 1..4 {
            l[i][j] = if i == j { 1.0 } else { 0.0 } + u[i] * u[j] / (1.0 + u[0]);
        }
    }
    l
}

/// Rest-frame moment `∫ f p^{α1}⋯p^{αr} d³p/p⁰` of rank `r`.
pub fn rest_frame_moment(state: &ThermoState<f64>, rank: usize) -> Result<DenseSymTensor<f64>> {
    let gamma = state.gamma()?;
    let m = state.mass;
    let dist = Juttner {
        stats: state.stats,
        consts: state.consts,
    };
    let mut out = DenseSymTensor::zeros(rank);
    for c in all_counts(rank) {
        if c[1] % 2 == 1 || c[2] % 2 == 1 || c[3] % 2 == 1 {
            continue;
        }
        let j = (c[1] + c[2] + c[3]) as i64;
        let angular = 4.0 * PI
            * (double_factorial(c[1] as i64 - 1)?
                * double_factorial(c[2] as i64 - 1)?
                * double_factorial(c[3] as i64 - 1)?
                / double_factorial(j + 1)?)
            .to_f64();
        let radial = crate::equilibrium::integrate_half_line(|rho| {
            let (s, ch) = (rho.sinh(), rho.cosh());
            dist.density(state.lambda, gamma * m * ch) * ch.powi(c[0] as i32) * s.powi(j as i32 + 2)
        })?;
        out.set(&c, angular * m.powi(2 + c[0] as i32 + j as i32) * radial);
    }
    Ok(out)
}

/// Equilibrium kinetic moment of rank `r` in the frame of `μ`.
pub fn kinetic_moment(state: &ThermoState<f64>, rank: usize) -> Result<DenseSymTensor<f64>> {
    let rest = rest_frame_moment(state, rank)?;
    Ok(rest.transform(&boost(&state.velocity()?)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet {
    pub a: DenseSymTensor<f64>,
    pub b: DenseSymTensor<f64>,
    pub hprime: [f64; 4],
    pub truncation: (u32, u32),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceReport {
    /// `(r, |g·M_r + m² M_{r−2}| / |m² M_{r−2}|)` for each checked rank.
    pub chain: Vec<(usize, f64)>,
    pub max: f64,
}

/// Equilibrium moments of ranks `M+1` and `N+1` and the trace chain below them.
pub fn equilibrium_moments_with_traces(
    state: &ThermoState<f64>,
    spec: &ClosureSpec,
) -> Result<(MomentSet, TraceReport)> {
    let top = (spec.m.max(spec.n) + 1) as usize;
    let moments: Vec<DenseSymTensor<f64>> = (0..=top)
        .into_par_iter()
        .map(|r| kinetic_moment(state, r))
        .collect::<Result<_>>()?;
    let msq = state.mass * state.mass;
    let mut chain = Vec::new();
    for r in 2..=top {
        let tr = moments[r].trace_pair()?;
        let expect = moments[r - 2].scale(&-msq);
        let scale = expect.max_abs().max(tr.max_abs());
        let res = if scale == 0.0 {
            0.0
        } else {
            tr.sub(&expect)?.max_abs() / scale
        };
        chain.push((r, res));
    }
    let max = chain.iter().map(|c| c.1).fold(0.0, f64::max);
    let hprime = equilibrium_hprime(state)?.hprime;
    Ok((
        MomentSet {
            a: moments[spec.m as usize + 1].clone(),
            b: moments[spec.n as usize + 1].clone(),
            hprime,
            truncation: (spec.h_max, spec.k_max),
        },
        TraceReport { chain, max },
    ))
}

/// Rest-frame scalars `(n, e, p)` read off kinetic moments of rank 1 and 2.
pub fn kinetic_scalars(state: &ThermoState<f64>) -> Result<(f64, f64, f64)> {
    let u = state.velocity()?;
    let a = kinetic_moment(state, 1)?;
    let b = kinetic_moment(state, 2)?;
    let ul = [-u[0], u[1], u[2], u[3]];
    let mut n = 0.0;
    let mut e = 0.0;
    let mut tr = 0.0;
    for i in 0..4 {
        n -= a.get(&[i])* ul[i];
        for j in 0..4 {
            e += b.get(&[i, j]) * ul[i] * ul[j];
        }
        tr += b.get(&[i, i]) * if i == 0 { -1.0 } else { 1.0 };
    }
    Ok((n, e, (tr + e) / 3.0))
}

pub fn index_label(c: &[usize; 4]) -> String {
    index_of(c).iter().map(|i| i.to_string()).collect()
}
