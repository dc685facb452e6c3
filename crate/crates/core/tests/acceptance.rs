//! Exit gate: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use etclosure::cli::random_admissible;
use etclosure::closure::{
    build_closure_tensor, derive_all_from_e, recursive_n1, verify_compatibility, ClosureSpec,
    ClosureTensorSet,
};
use etclosure::equilibrium::{
    equilibrium_multipliers, gibbs_residual, project_equilibrium, state_potential, Constants,
    Statistics, ThermoState,
};
use etclosure::f_family::{basis_mu_contraction, FFamilyElement};
use etclosure::moments::{
    equilibrium_moments_with_traces, registry_for, symmetry_residual, MultiplierState,
};
use etclosure::oracle::{self, OracleConfig, RawTensor};
use etclosure::scalar::{rat, ratio};
use etclosure::scalar_expr::{FunctionRegistry, ScalarExpr, Symbol};
use etclosure::tensor_dense::{DenseSymTensor, FourVector};
use etclosure::{Rational, Result, Scalar};
use rand::Rng;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn criterion_1() -> Result<Outcome> {
    let mut rng = OracleConfig { seed: SEED, ..Default::default() }.rng();
    let mut checked = 0;
    for _ in 0..3 {
        let mu = oracle::random_timelike_rational(&mut rng);
        let lambda = oracle::random_rational(&mut rng, 4, 9);
        let mass = oracle::random_rational(&mut rng, 3, 5).abs_val() + ratio(1, 7);
        for m in [0usize, 2, 4, 6] {
            for n in [1usize, 3, 5] {
                let (l, u) = equilibrium_multipliers(&lambda, &mu, m, n, &mass)?;
                let (l2, u2) = project_equilibrium(&l, &u, &mass)?;
                if l2 != lambda || u2 != mu {
                    return outcome(false, format!("mismatch at M={m} N={n}"));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("{checked} exact round trips"))
}

const SPECS: [(u32, u32); 4] = [(2, 1), (4, 1), (2, 3), (4, 3)];

fn criterion_2() -> Result<Outcome> {
    let mut count = 0;
    for (m, n) in SPECS {
        for h in 0..=11 / m {
            for k in 0..=if n == 1 { 0 } else { 11 / n } {
                if m * h + n * k + 1 > 12 {
                    continue;
                }
                let spec = ClosureSpec::new(m, n, h, k)?;
                let c = build_closure_tensor(&spec, h, k)?;
                if !c.check_characteristic().holds {
                    return outcome(false, format!("(M,N)=({m},{n}) order ({h},{k})"));
                }
                count += 1;
            }
        }
    }
    outcome(true, format!("{count} tensors, residual identically zero"))
}

fn cross_route_sets() -> Result<(ClosureTensorSet, ClosureTensorSet)> {
    let s23 = ClosureSpec::new(2, 3, 2, 2)?;
    let s21 = ClosureSpec::new(2, 1, 3, 0)?;
    Ok((ClosureTensorSet::build(&s23)?, ClosureTensorSet::build(&s21)?))
}

fn criterion_3() -> Result<Outcome> {
    let (set23, set21) = cross_route_sets()?;
    let recursive = derive_all_from_e(&set23.spec)?;
    let mut count = 0;
    for (key, c) in set23.iter() {
        if recursive.get(key) != Some(c) {
            return outcome(false, format!("(2,3) order {key:?} differs"));
        }
        count += 1;
    }
    let chain = recursive_n1(2, 3)?;
    for (h, c) in chain.iter().enumerate() {
        if set21.get(h as u32, 0)? != c {
            return outcome(false, format!("(2,1) order h={h} differs"));
        }
        count += 1;
    }
    outcome(true, format!("{count} orders equal as exact expressions"))
}

fn criterion_4() -> Result<Outcome> {
    let (set23, set21) = cross_route_sets()?;
    let mut checked = 0;
    for set in [&set23, &set21] {
        for (h, k) in set.spec.orders() {
            let rep = verify_compatibility(set, h, k)?;
            if !rep.holds() {
                return outcome(false, format!("{:?} order ({h},{k})", (set.spec.m, set.spec.n)));
            }
            checked += rep.checked();
        }
    }
    outcome(checked > 0, format!("{checked} conditions with zero residual"))
}

/// `Σ_J s_J t^{…J}` over full components.
fn brute_contract_sym(t: &RawTensor<Rational>, s: &RawTensor<Rational>) -> RawTensor<Rational> {
    let keep = t.rank - s.rank;
    RawTensor::from_fn(keep, |head| {
        let mut acc = rat(0);
        for (j, sv) in s.data.iter().enumerate() {
            let mut idx = head.to_vec();
            let mut tail = vec![0; s.rank];
            let mut f = j;
            for slot in (0..s.rank).rev() {
                tail[slot] = f % 4;
                f /= 4;
            }
            idx.extend(tail);
            acc += sv * t.at(&idx);
        }
        acc
    })
}

fn outer(a: &RawTensor<Rational>, b: &RawTensor<Rational>) -> RawTensor<Rational> {
    RawTensor::from_fn(a.rank + b.rank, |idx| a.at(&idx[..a.rank]) * b.at(&idx[a.rank..]))
}

fn criterion_5() -> Result<Outcome> {
    let cfg = OracleConfig { seed: SEED, ..Default::default() };
    let mut rng = cfg.rng();
    let mut count = 0;
    let fail = |what: String| outcome(false, what);

    for i in 0..100 {
        let rank = i % 6;
        let raw = oracle::random_raw_rational(rank, &mut rng);
        if DenseSymTensor::symmetrize(rank, &raw.data)? != oracle::brute_symmetrize(&raw, &cfg)? {
            return fail(format!("symmetrize #{i}"));
        }
        count += 1;
    }
    let raw6 = oracle::random_raw_rational(6, &mut rng);
    if DenseSymTensor::symmetrize(6, &raw6.data)? != oracle::brute_symmetrize(&raw6, &cfg)? {
        return fail("symmetrize rank 6".into());
    }

    let mu = oracle::random_timelike_rational(&mut rng);
    let up = mu.up();
    let low = mu.down();
    for n in 0..=6 {
        for s in 0..=n / 2 {
            let fast = DenseSymTensor::gmu_basis(n, s, &up)?;
            let slow = oracle::brute_realize_basis(n, s, &up, &cfg)?;
            if !slow.equals(&fast) {
                return fail(format!("basis Y^{n}_{s}"));
            }
            if n >= 2 && !oracle::brute_trace(&slow, &cfg)?.equals(&fast.trace_pair()?) {
                return fail(format!("trace of Y^{n}_{s}"));
            }
            if n >= 1 && !oracle::brute_mu_contract(&slow, &low, &cfg)?.equals(&fast.contract_mu(&mu)?) {
                return fail(format!("mu contraction of Y^{n}_{s}"));
            }
            count += 1;
        }
    }

    // random symmetric tensors: contraction with a symmetric tensor and symmetrized products
    for i in 0..10 {
        let (ra, rb) = (rng.gen_range(1..=4usize), rng.gen_range(0..=2usize));
        let a = DenseSymTensor::symmetrize(ra, &oracle::random_raw_rational(ra, &mut rng).data)?;
        let b = DenseSymTensor::symmetrize(rb, &oracle::random_raw_rational(rb, &mut rng).data)?;
        let (ar, br) = (RawTensor::from_sym(&a), RawTensor::from_sym(&b));
        if rb <= ra && !brute_contract_sym(&ar, &br).equals(&a.contract_sym(&b)?) {
            return fail(format!("contract_sym #{i}"));
        }
        if oracle::brute_symmetrize(&outer(&ar, &br), &cfg)? != a.sym_product(&b) {
            return fail(format!("sym_product #{i}"));
        }
        count += 1;
    }

    // family operations
    let reg = FunctionRegistry::<Rational>::polynomial_family(3, 4);
    let mass = ratio(3, 2);
    for n in 0..=6 {
        let f = random_admissible(n, 0, &mut rng);
        let lam = oracle::random_rational(&mut rng, 2, 3);
        let fast = f.realize(&lam, &mu, &mass, &reg)?;
        let slow = oracle::brute_realize(&f, &lam, &mu, &mass, &reg, &cfg)?;
        if !slow.equals(&fast) {
            return fail(format!("realize rank {n}"));
        }
        if n >= 2 && !oracle::brute_trace(&slow, &cfg)?.equals(&f.trace()?.realize(&lam, &mu, &mass, &reg)?) {
            return fail(format!("family trace rank {n}"));
        }
        if n < 6 {
            let d = f.mu_derivative()?.realize(&lam, &mu, &mass, &reg)?;
            if !oracle::brute_mu_derivative(&f, &lam, &mu, &mass, &reg, &cfg)?.equals(&d) {
                return fail(format!("mu derivative rank {n}"));
            }
        }
        count += 1;
    }

    // contraction table and the single-contraction identity
    let gamma = mu.gamma()?;
    let empty = FunctionRegistry::<Rational>::new(0);
    for n in [2usize, 4, 6] {
        for r in 0..=n {
            let table = basis_mu_contraction(n, r)?;
            let mut lhs = oracle::brute_realize_basis(n, n / 2, &up, &cfg)?;
            for _ in 0..r {
                lhs = oracle::brute_mu_contract(&lhs, &low, &cfg)?;
            }
            let mut rhs = RawTensor::<Rational>::zeros(n - r);
            for (s, phi) in table.phi().iter().enumerate() {
                let c = oracle::eval_expr(phi, &rat(0), &gamma, &rat(1), &empty)?;
                let b = oracle::brute_realize_basis(n - r, s, &up, &cfg)?;
                for (a, v) in rhs.data.iter_mut().zip(b.data) {
                    *a += &c * v;
                }
            }
            if lhs != rhs {
                return fail(format!("contraction table n={n} r={r}"));
            }
            count += 1;
        }
    }
    for n in [4usize, 6] {
        let (a, b, c) = oracle::single_contraction_identity(n, &mu, &cfg)?;
        if a != b || b != c {
            return fail(format!("single contraction identity n={n}"));
        }
        count += 1;
    }
    outcome(true, format!("{count} exact comparisons"))
}

fn criterion_6() -> Result<Outcome> {
    let mut rng = OracleConfig { seed: SEED, ..Default::default() }.rng();
    for i in 0..50 {
        let n = rng.gen_range(0..=4usize);
        let r = rng.gen_range(1..=2usize);
        let f = random_admissible(n, r, &mut rng);
        let free: Vec<ScalarExpr> = (0..r)
            .map(|j| ScalarExpr::monomial(oracle::random_rational(&mut rng, 3, 4), 0, j as i64, Some(Symbol::new(7, 0))))
            .collect();
        if f.lift(r, &free)?.trace_n(r)? != f {
            return outcome(false, format!("case {i}: rank {n}, r = {r}"));
        }
    }
    let mut violations = 0;
    for m in 0..=4i64 {
        for r in 1..=2i64 {
            for p in (m - m / 2 - 1).max(0)..=(m - m / 2 + r - 2) {
                let f = FFamilyElement::from_leading(m as usize, ScalarExpr::symbol(0, 0).mul_gamma(-2 * (3 + p)));
                let free = vec![ScalarExpr::zero(); r as usize];
                match f.lift(r as usize, &free) {
                    Err(e) if e.is_singular_ratio() => violations += 1,
                    other => return outcome(false, format!("m={m} r={r} p={p}: {other:?}")),
                }
            }
        }
    }
    outcome(true, format!("50 round trips exact, {violations} excluded inputs rejected"))
}

fn criterion_7() -> Result<Outcome> {
    let mut rng = OracleConfig { seed: SEED, ..Default::default() }.rng();
    let sets = [
        ClosureTensorSet::build(&ClosureSpec::new(2, 1, 3, 0)?)?,
        ClosureTensorSet::build(&ClosureSpec::new(2, 3, 3, 2)?)?,
        ClosureTensorSet::build(&ClosureSpec::new(4, 1, 1, 0)?)?,
    ];
    let mut worst = 0.0f64;
    let mut count = 0;
    for _ in 0..10 {
        let mu = oracle::random_timelike_f64(&mut rng);
        let lambda = rng.gen_range(-1.0..1.0);
        let mass = rng.gen_range(0.5..1.5);
        for set in &sets {
            let reg = registry_for(set);
            for (_, c) in set.iter() {
                if c.rank() > 7 || c.is_zero() {
                    continue;
                }
                let exact = c.mu_derivative()?.realize(&lambda, &mu, &mass, &reg)?;
                let fd = oracle::fd_mu_derivative(c, lambda, &mu, mass, &reg, 1e-4)?;
                let diff = fd.max_diff(&exact);
                let scale = exact.max_abs();
                if diff > (1e-6 * scale).max(1e-10) {
                    return outcome(false, format!("rank {} diff {diff:e} scale {scale:e}", c.rank()));
                }
                worst = worst.max(diff / scale.max(1e-300));
                count += 1;
            }
        }
    }
    outcome(true, format!("{count} comparisons, worst relative {worst:.2e}"))
}

const DEV: f64 = 2e-6;

fn criterion_8() -> Result<Outcome> {
    let mut rng = OracleConfig { seed: SEED, ..Default::default() }.rng();
    let mut worst = 0.0f64;
    let mut control = f64::INFINITY;
    for (m, n) in [(2u32, 1u32), (2, 3)] {
        let set = ClosureTensorSet::build(&ClosureSpec::new(m, n, 2, 2)?)?;
        let mut bad = set.clone();
        let first_order = set
            .iter()
            .filter(|(_, t)| !t.is_zero())
            .position(|(&(h, k), _)| (h, k) == (1, 0))
            .expect("a first-order tensor");
        bad.mutate(first_order + 1);
        for i in 0..10 {
            let mu = oracle::random_timelike_f64(&mut rng);
            let base = ThermoState::new(rng.gen_range(-0.5..0.5), mu, 1.0, Statistics::Mb)?;
            let lam = etclosure::cli::random_deviation(m as usize, DEV, &mut rng);
            let mud = etclosure::cli::random_deviation(n as usize, DEV, &mut rng);
            let st = MultiplierState::new(base.clone(), &lam, &mud, set.clone())?;
            let res = symmetry_residual(&st, 1e-5)?.max();
            worst = worst.max(res);
            if i == 0 {
                let st = MultiplierState::new(base, &lam, &mud, bad.clone())?;
                control = control.min(symmetry_residual(&st, 1e-5)?.max());
            }
        }
    }
    outcome(
        worst <= 1e-6 && control > 1e-3,
        format!("worst residual {worst:.2e}, mutated {control:.2e}"),
    )
}

fn criterion_9() -> Result<Outcome> {
    let consts = Constants::default();
    let mut worst = 0.0f64;
    for z in [0.1, 1.0, 10.0] {
        for (lambda, mass) in [(0.0, 1.0), (0.7, 1.0), (-0.3, 2.0)] {
            let gamma = z / mass;
            let st = ThermoState::new(lambda, FourVector::upper([gamma, 0.0, 0.0, 0.0]), mass, Statistics::Mb)?;
            let h = state_potential(&st, lambda, gamma)?.h;
            let b = oracle::bessel_h(lambda, gamma, mass, &consts)?;
            let bessel = ((h - b) / b).abs();
            let rep = gibbs_residual(|l, g| state_potential(&st, l, g), lambda, gamma)?;
            worst = worst.max(bessel).max(rep.max());
        }
    }
    outcome(worst <= 1e-8, format!("worst relative residual {worst:.2e}"))
}

fn criterion_10() -> Result<Outcome> {
    let mut rng = OracleConfig { seed: SEED, ..Default::default() }.rng();
    let mut worst = 0.0f64;
    for (m, n) in [(0u32, 1u32), (2, 1)] {
        let spec = ClosureSpec::new(m, n, 0, 0)?;
        for _ in 0..3 {
            let mu = oracle::random_timelike_f64(&mut rng);
            let st = ThermoState::new(rng.gen_range(-0.5..0.5), mu, rng.gen_range(0.5..2.0), Statistics::Mb)?;
            let (_, rep) = equilibrium_moments_with_traces(&st, &spec)?;
            worst = worst.max(rep.max);
        }
    }
    outcome(worst <= 1e-8, format!("worst relative residual {worst:.2e}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Result<Outcome>, Duration); 10] = [
        ("equilibrium round trip", criterion_1, Duration::from_secs(1)),
        ("characteristic condition", criterion_2, Duration::from_secs(30)),
        ("cross-route equality", criterion_3, Duration::from_secs(60)),
        ("compatibility conditions", criterion_4, Duration::from_secs(60)),
        ("oracle equivalence", criterion_5, Duration::from_secs(60)),
        ("lift/trace round trip", criterion_6, Duration::from_secs(60)),
        ("mu-derivative vs finite differences", criterion_7, Duration::from_secs(60)),
        ("symmetry of the truncated series", criterion_8, Duration::from_secs(60)),
        ("equilibrium thermodynamics", criterion_9, Duration::from_secs(60)),
        ("kinetic trace conditions", criterion_10, Duration::from_secs(60)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let res = run();
        let dt = t0.elapsed();
        let (pass, detail) = match res {
            Ok(o) => (o.pass && dt <= *limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2}: {name} ({detail}; {:.2}s)", i + 1, dt.as_secs_f64());
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
