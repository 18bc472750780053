use std::collections::BTreeSet;

use itertools::Itertools;
use ndarray::ArrayD;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::relaxation::Event;
use crate::scenario::NetworkScenario;

/// Largest number of deterministic strategies enumerated.
pub const MAX_STRATEGIES: u128 = 10_000_000;

/// Source alphabet of the one-sided multi-source oracle.
pub const SOURCE_ALPHABET: usize = 2;

/// Closest fraction with denominator at most `max_den`, by continued
/// fractions.
pub fn rationalize(x: f64, max_den: i64) -> BigRational {
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    for _ in 0..64 {
        let a = v.floor();
        let ai = a as i128;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2 > max_den as i128 {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = v - a;
        if frac < 1e-15 || ((p1 as f64 / q1 as f64) - x.abs()).abs() < 1e-14 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return BigRational::zero();
    }
    BigRational::new(BigInt::from(sign * p1), BigInt::from(q1))
}

/// A deterministic response: per party, outcome for each effective setting.
type Strategy = Vec<Vec<usize>>;

/// Party order in which parents come first.
fn topological(net: &NetworkScenario) -> Vec<usize> {
    let n = net.n_parties();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        for p in 0..n {
            if !placed[p] && net.setting_composition[p].parents.iter().all(|&(q, _)| placed[q]) {
                placed[p] = true;
                order.push(p);
            }
        }
    }
    order
}

/// Outcomes of a deterministic strategy at the given native settings.
fn respond(net: &NetworkScenario, order: &[usize], s: &Strategy, native: &[usize]) -> Vec<usize> {
    let mut out = vec![0; net.n_parties()];
    for &p in order {
        let comp = &net.setting_composition[p];
        let parents: Vec<usize> = comp.parents.iter().map(|&(q, _)| out[q]).collect();
        out[p] = s[p][comp.compose(native[p], &parents)];
    }
    out
}

fn strategy_count(net: &NetworkScenario) -> u128 {
    (0..net.n_parties())
        .map(|p| (net.effective_outcomes[p] as u128).saturating_pow(net.effective_settings[p] as u32))
        .fold(1u128, |a, b| a.saturating_mul(b))
}

fn strategies(net: &NetworkScenario) -> Result<Vec<Strategy>> {
    let count = strategy_count(net);
    if count > MAX_STRATEGIES {
        return Err(Error::OracleLimit(format!("{count} deterministic strategies")));
    }
    let per_party: Vec<Vec<Vec<usize>>> = (0..net.n_parties())
        .map(|p| {
            (0..net.effective_settings[p])
                .map(|_| 0..net.effective_outcomes[p])
                .multi_cartesian_product()
                .collect::<Vec<_>>()
        })
        .map(|v| if v.is_empty() { vec![Vec::new()] } else { v })
        .collect();
    Ok(per_party.into_iter().multi_cartesian_product().collect())
}

fn settings_list(net: &NetworkScenario) -> Vec<Vec<usize>> {
    net.native_settings
        .iter()
        .map(|&d| 0..d)
        .multi_cartesian_product()
        .collect()
}

fn event_index(outs: &[usize], native: &[usize]) -> Vec<usize> {
    outs.iter().chain(native).copied().collect()
}

/// Exact classical feasibility.
///
/// With at most one source every party shares the same randomness and the
/// test is exact: `p` must be a convex mixture of deterministic strategies.
/// With several sources the oracle only searches models where every source
/// is uniform on [`SOURCE_ALPHABET`] values and each party responds
/// deterministically, so `true` is conclusive and `false` is not.
pub fn oracle_classical_feasible(net: &NetworkScenario, p: &ArrayD<f64>) -> Result<bool> {
    let expected: Vec<usize> = net
        .effective_outcomes
        .iter()
        .chain(&net.native_settings)
        .copied()
        .collect();
    if p.shape() != expected.as_slice() {
        return Err(Error::Distribution(format!("shape {:?}, expected {expected:?}", p.shape())));
    }
    if net.n_sources() <= 1 {
        single_source(net, p)
    } else {
        multi_source(net, p)
    }
}

fn single_source(net: &NetworkScenario, p: &ArrayD<f64>) -> Result<bool> {
    let order = topological(net);
    let strats = strategies(net)?;
    let sets = settings_list(net);
    let events: Vec<Vec<usize>> = net
        .effective_outcomes
        .iter()
        .map(|&d| 0..d)
        .multi_cartesian_product()
        .cartesian_product(sets.iter())
        .map(|(o, s)| event_index(&o, s))
        .collect();
    // rows: events; columns: strategies
    let mut a = vec![vec![BigRational::zero(); strats.len()]; events.len()];
    for (j, st) in strats.iter().enumerate() {
        for s in &sets {
            let outs = respond(net, &order, st, s);
            let idx = event_index(&outs, s);
            let row = events.iter().position(|e| *e == idx).expect("event listed");
            a[row][j] = BigRational::one();
        }
    }
    let b: Vec<BigRational> = events
        .iter()
        .map(|e| rationalize(p[e.as_slice()], 1_000_000_000))
        .collect();
    Ok(lp_feasible(a, b))
}

/// Phase-one simplex over rationals with Bland's rule: is there `x ≥ 0`
/// with `A x = b`?
fn lp_feasible(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> bool {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    for i in 0..m {
        if b[i].is_negative() {
            b[i] = -b[i].clone();
            for v in a[i].iter_mut() {
                *v = -v.clone();
            }
        }
    }
    // tableau columns: n originals then m artificials
    let mut t: Vec<Vec<BigRational>> = (0..m)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..m).map(|k| if k == i { BigRational::one() } else { BigRational::zero() }));
            row.push(b[i].clone());
            row
        })
        .collect();
    let width = n + m;
    let mut basis: Vec<usize> = (n..n + m).collect();
    // objective: minimize sum of artificials; reduced costs of row 0
    loop {
        let mut cost = vec![BigRational::zero(); width + 1];
        for (i, &bv) in basis.iter().enumerate() {
            if bv >= n {
                for (c, v) in cost.iter_mut().zip(&t[i]) {
                    *c += v;
                }
            }
        }
        for k in n..width {
            cost[k] -= BigRational::one();
        }
        // entering column: first with positive reduced cost
        let Some(enter) = (0..width).find(|&k| cost[k].is_positive() && !basis.contains(&k)) else {
            return cost[width].is_zero();
        };
        let mut leave: Option<(usize, BigRational)> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return cost[width].is_zero();
        };
        let piv = t[r][enter].clone();
        for v in t[r].iter_mut() {
            *v /= &piv;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && !row[enter].is_zero() {
                let f = row[enter].clone();
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= &f * pv;
                }
            }
        }
        basis[r] = enter;
    }
}

fn multi_source(net: &NetworkScenario, p: &ArrayD<f64>) -> Result<bool> {
    if net.is_interrupted() {
        return Err(Error::Unsupported(
            "the multi-source oracle handles networks without interruption".into(),
        ));
    }
    let k = SOURCE_ALPHABET;
    let n = net.n_parties();
    // a party's response depends on its setting and the values of its sources
    let inputs: Vec<usize> = (0..n)
        .map(|q| net.effective_settings[q] * k.pow(net.party_sources[q].len() as u32))
        .collect();
    let count = (0..n)
        .map(|q| (net.effective_outcomes[q] as u128).saturating_pow(inputs[q] as u32))
        .fold(1u128, |a, b| a.saturating_mul(b));
    if count > MAX_STRATEGIES {
        return Err(Error::OracleLimit(format!("{count} response-function combinations")));
    }
    let target: Vec<BigRational> = p.iter().map(|&x| rationalize(x, 1_000_000_000)).collect();
    let weight = BigRational::new(BigInt::one(), BigInt::from(k.pow(net.n_sources() as u32)));
    let sets = settings_list(net);
    let per_party: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|q| {
            (0..inputs[q])
                .map(|_| 0..net.effective_outcomes[q])
                .multi_cartesian_product()
                .collect()
        })
        .collect();
    let lambdas: Vec<Vec<usize>> = (0..net.n_sources()).map(|_| 0..k).multi_cartesian_product().collect();
    let shape = p.shape().to_vec();
    for responses in per_party.iter().map(|v| v.iter()).multi_cartesian_product() {
        let mut dist = ArrayD::<BigRational>::from_elem(shape.clone(), BigRational::zero());
        for lam in &lambdas {
            for s in &sets {
                let outs: Vec<usize> = (0..n)
                    .map(|q| {
                        let mut idx = s[q];
                        for &src in &net.party_sources[q] {
                            idx = idx * k + lam[src];
                        }
                        responses[q][idx]
                    })
                    .collect();
                let e = event_index(&outs, s);
                dist[e.as_slice()] += &weight;
            }
        }
        if dist.iter().zip(&target).all(|(a, b)| a == b) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Exact possibilistic test for one shared source: some set of
/// deterministic strategies produces exactly the given events.
pub fn oracle_classical_support_feasible(net: &NetworkScenario, support: &[Event]) -> Result<bool> {
    if net.n_sources() > 1 {
        return Err(Error::Unsupported("support oracle needs at most one source".into()));
    }
    let order = topological(net);
    let sets = settings_list(net);
    let allowed: BTreeSet<&Event> = support.iter().collect();
    let mut covered: BTreeSet<Event> = BTreeSet::new();
    for st in strategies(net)? {
        let produced: Vec<Event> = sets
            .iter()
            .map(|s| (respond(net, &order, &st, s), s.clone()))
            .collect();
        if produced.iter().all(|e| allowed.contains(e)) {
            covered.extend(produced);
        }
    }
    Ok(allowed.iter().all(|e| covered.contains(*e)))
}

/// Maximum of a linear functional over deterministic strategies of a
/// single-source network, which is its classical optimum.
pub fn classical_optimum(net: &NetworkScenario, f: impl Fn(&ArrayD<f64>) -> f64) -> Result<f64> {
    let order = topological(net);
    let sets = settings_list(net);
    let shape: Vec<usize> = net
        .effective_outcomes
        .iter()
        .chain(&net.native_settings)
        .copied()
        .collect();
    let mut best = f64::NEG_INFINITY;
    for st in strategies(net)? {
        let mut d = ArrayD::<f64>::zeros(shape.clone());
        for s in &sets {
            let outs = respond(net, &order, &st, s);
            d[event_index(&outs, s).as_slice()] = 1.0;
        }
        best = best.max(f(&d));
    }
    Ok(best)
}
