//! Certificates as probability polynomials and critical-parameter search.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use faer::complex_native::c64;
use faer::Mat;
use itertools::Itertools;
use ndarray::ArrayD;

use crate::error::{Error, Result};
use crate::inflation::ProbabilityLabel;
use crate::monomial::Knowability;
use crate::relaxation::{DataSymbol, Relaxation};
use crate::sdp::{self, Certificate, SdpSolution, SolveOptions, Status};

/// Largest polynomial degree accepted in a [`ParamFamily`].
pub const MAX_FAMILY_DEGREE: usize = 4;

/// Feasibility certificate written over probabilities:
/// `constant + Σ coef · Π labels ≥ 0` on every compatible distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityCertificate {
    /// Sorted label products with their coefficients.
    pub terms: BTreeMap<Vec<ProbabilityLabel>, f64>,
    pub constant: f64,
    /// LPI substitutions were active, so only the tested distribution is
    /// certified.
    pub lpi_flag: bool,
    party_names: Vec<String>,
}

impl ProbabilityCertificate {
    pub fn evaluate(&self, value: impl Fn(&ProbabilityLabel) -> f64) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(ls, c)| c * ls.iter().map(&value).product::<f64>())
                .sum::<f64>()
    }

    /// Value on a distribution of the original scenario.
    pub fn evaluate_distribution(&self, r: &Relaxation, p: &ArrayD<f64>) -> Result<f64> {
        let marginal = r.marginal_fn(p)?;
        Ok(self.evaluate(|l| marginal(l)))
    }

    /// Substitutes a one-parameter family, giving ascending coefficients.
    pub fn polynomial_in(&self, family: &ParamFamily) -> Result<Vec<f64>> {
        let mut acc = vec![self.constant];
        for (ls, c) in &self.terms {
            let mut term = vec![*c];
            for l in ls {
                let f = family.values.get(l).ok_or_else(|| {
                    Error::Distribution(format!("family has no value for {}", l.display(&self.party_names)))
                })?;
                term = poly_mul(&term, f);
            }
            acc = poly_add(&acc, &term);
        }
        Ok(acc)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Terms ordered by degree then label order, with display names and
    /// full-precision coefficients.
    pub fn named_terms(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .sorted_terms()
            .into_iter()
            .map(|(ls, c)| (self.product_name(ls), c))
            .collect();
        out.push(("1".into(), self.constant));
        out
    }

    fn sorted_terms(&self) -> Vec<(&Vec<ProbabilityLabel>, f64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(k, &c)| (k, c)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(b.0)));
        v
    }

    fn product_name(&self, ls: &[ProbabilityLabel]) -> String {
        ls.iter()
            .chunk_by(|l| *l)
            .into_iter()
            .map(|(l, group)| {
                let k = group.count();
                let name = l.display(&self.party_names);
                if k == 1 {
                    name
                } else {
                    format!("{name}^{k}")
                }
            })
            .join("*")
    }
}

impl fmt::Display for ProbabilityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut write_term = |f: &mut fmt::Formatter<'_>, c: f64, name: Option<String>| -> fmt::Result {
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match name {
                Some(n) => write!(f, "{:.3}*{n}", c.abs()),
                None => write!(f, "{:.3}", c.abs()),
            }
        };
        for (ls, c) in self.sorted_terms() {
            write_term(f, c, Some(self.product_name(ls)))?;
        }
        if self.constant != 0.0 || self.terms.is_empty() {
            write_term(f, self.constant, None)?;
        }
        Ok(())
    }
}

/// Rewrites the certificate of an infeasible solve over probabilities.
pub fn certificate_as_probs(sol: &SdpSolution, r: &Relaxation, clean: bool) -> Result<ProbabilityCertificate> {
    let cert = sol
        .certificate
        .as_ref()
        .ok_or_else(|| Error::Certificate(format!("no certificate for a {} solution", sol.status)))?;
    certificate_to_probs(cert, r, clean)
}

pub fn certificate_to_probs(cert: &Certificate, r: &Relaxation, clean: bool) -> Result<ProbabilityCertificate> {
    let mut terms: BTreeMap<Vec<ProbabilityLabel>, f64> = BTreeMap::new();
    let mut constant = 0.0;
    for (sym, &c) in &cert.terms {
        if clean && c.abs() < 1e-10 {
            continue;
        }
        let labels = match sym {
            DataSymbol::One => {
                constant += c;
                continue;
            }
            DataSymbol::Event(l) => vec![l.clone()],
            DataSymbol::Known(m) => match &r.variables()[*m].knowability {
                Knowability::Knowable(l) => vec![l.clone()],
                Knowability::Product(ls) => {
                    let mut ls = ls.clone();
                    ls.sort();
                    ls
                }
                _ => {
                    return Err(Error::Certificate(format!(
                        "moment {} is not expressible in probabilities",
                        r.variable_name(*m)
                    )))
                }
            },
        };
        *terms.entry(labels).or_insert(0.0) += c;
    }
    terms.retain(|_, c| *c != 0.0);
    Ok(ProbabilityCertificate {
        terms,
        constant,
        lpi_flag: cert.distribution_specific,
        party_names: r.inflation().network().parties.clone(),
    })
}

/// Ascending coefficients.
pub type UniPoly = Vec<f64>;

fn poly_add(a: &[f64], b: &[f64]) -> UniPoly {
    (0..a.len().max(b.len()))
        .map(|i| a.get(i).unwrap_or(&0.0) + b.get(i).unwrap_or(&0.0))
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> UniPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Real roots from the eigenvalues of the companion matrix.
pub fn real_roots(p: &[f64]) -> Vec<f64> {
    let scale = p.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut p: Vec<f64> = p.iter().map(|c| c / scale).collect();
    while p.last().is_some_and(|c| c.abs() < 1e-12) {
        p.pop();
    }
    let deg = p.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[deg];
    let companion = Mat::<f64>::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -p[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig: Vec<c64> = companion.eigenvalues::<c64>();
    let mut roots: Vec<f64> = eig
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
        .map(|z| polish(&p, z.re))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots
}

fn polish(p: &[f64], mut x: f64) -> f64 {
    let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
    for _ in 0..3 {
        let d = poly_eval(&dp, x);
        if d == 0.0 {
            break;
        }
        let step = poly_eval(p, x) / d;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// Label values as polynomials in one parameter.
#[derive(Debug, Clone)]
pub struct ParamFamily {
    pub name: String,
    pub values: HashMap<ProbabilityLabel, UniPoly>,
    pub bounds: (f64, f64),
}

impl ParamFamily {
    pub fn new(name: impl Into<String>, values: HashMap<ProbabilityLabel, UniPoly>, bounds: (f64, f64)) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(Error::Distribution(format!("empty parameter range {bounds:?}")));
        }
        if let Some((_, p)) = values.iter().find(|(_, p)| p.len() > MAX_FAMILY_DEGREE + 1) {
            return Err(Error::Distribution(format!(
                "family degree {} exceeds {MAX_FAMILY_DEGREE}",
                p.len() - 1
            )));
        }
        let fam = Self {
            name: name.into(),
            values,
            bounds,
        };
        fam.validate()?;
        Ok(fam)
    }

    /// `ν·target + (1 − ν)·noise` on every label the relaxation needs.
    pub fn mixture(r: &Relaxation, target: &ArrayD<f64>, noise: &ArrayD<f64>, bounds: (f64, f64)) -> Result<Self> {
        let mt = r.marginal_fn(target)?;
        let mn = r.marginal_fn(noise)?;
        let values = r
            .required_labels()
            .into_iter()
            .map(|l| {
                let (a, b) = (mn(&l), mt(&l));
                (l, vec![a, b - a])
            })
            .collect();
        Self::new("v", values, bounds)
    }

    /// The same distribution at every parameter value.
    pub fn constant(r: &Relaxation, p: &ArrayD<f64>, bounds: (f64, f64)) -> Result<Self> {
        let m = r.marginal_fn(p)?;
        let values = r.required_labels().into_iter().map(|l| {
            let v = m(&l);
            (l, vec![v])
        });
        Self::new("v", values.collect(), bounds)
    }

    pub fn values_at(&self, nu: f64) -> HashMap<ProbabilityLabel, f64> {
        self.values
            .iter()
            .map(|(l, p)| (l.clone(), poly_eval(p, nu)))
            .collect()
    }

    /// Values stay probabilities at both ends and the midpoint.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        for nu in [lo, 0.5 * (lo + hi), hi] {
            for (l, p) in &self.values {
                let v = poly_eval(p, nu);
                if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::Distribution(format!(
                        "label {l:?} takes value {v} at {nu}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    Bisection,
    Dual,
}

impl FromStr for SearchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bisection" => Ok(SearchMethod::Bisection),
            "dual" => Ok(SearchMethod::Dual),
            other => Err(Error::Objective(format!("unknown search method `{other}`"))),
        }
    }
}

impl fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMethod::Bisection => "bisection",
            SearchMethod::Dual => "dual",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalOptions {
    pub method: SearchMethod,
    pub tolerance: f64,
    pub use_lpi: bool,
    pub solve: SolveOptions,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self {
            method: SearchMethod::Dual,
            tolerance: 1e-4,
            use_lpi: false,
            solve: SolveOptions {
                feas_as_optim: true,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub parameter: f64,
    pub status: Status,
    pub objective_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalResult {
    pub value: f64,
    pub solves: usize,
    /// Every probe was infeasible; `value` is the lower bound.
    pub no_feasible_point: bool,
    /// No probe was infeasible; `value` is the upper bound.
    pub all_feasible: bool,
    pub probes: Vec<Probe>,
}

struct Searcher<'a> {
    r: &'a mut Relaxation,
    family: &'a ParamFamily,
    opts: &'a CriticalOptions,
    probes: Vec<Probe>,
}

impl Searcher<'_> {
    /// Solves at one parameter; unknown counts as feasible.
    fn probe(&mut self, nu: f64) -> Result<(bool, Option<Certificate>)> {
        self.r.install_label_values(&self.family.values_at(nu), self.opts.use_lpi)?;
        let (_, sol) = sdp::solve_relaxation(self.r, &self.opts.solve)?;
        log::info!(
            "{} = {nu:.8}: {} ({:?})",
            self.family.name,
            sol.status,
            sol.objective_value
        );
        self.probes.push(Probe {
            parameter: nu,
            status: sol.status,
            objective_value: sol.objective_value,
        });
        Ok(match sol.status {
            Status::Infeasible => (false, sol.certificate),
            _ => (true, None),
        })
    }
}

/// Largest parameter in the family's range whose values are feasible,
/// assuming feasibility is monotone (feasible below, infeasible above).
pub fn max_within_feasible(r: &mut Relaxation, family: &ParamFamily, opts: &CriticalOptions) -> Result<CriticalResult> {
    if !(opts.tolerance > 0.0) {
        return Err(Error::Distribution("tolerance must be positive".into()));
    }
    let mut s = Searcher {
        r,
        family,
        opts,
        probes: Vec::new(),
    };
    let (lo, hi) = family.bounds;
    let eps = opts.tolerance;
    // feasible up to `a`; infeasible above `b`
    let (mut a, mut b) = (lo, hi);
    let mut seen_feasible = false;
    let mut seen_infeasible = false;
    match opts.method {
        SearchMethod::Bisection => {
            let steps = bisection_steps(hi - lo, eps);
            for _ in 0..steps {
                let mid = 0.5 * (a + b);
                if s.probe(mid)?.0 {
                    a = mid;
                    seen_feasible = true;
                } else {
                    b = mid;
                    seen_infeasible = true;
                }
            }
        }
        SearchMethod::Dual => {
            let mut candidate = hi;
            loop {
                let (feasible, cert) = s.probe(candidate)?;
                if feasible {
                    seen_feasible = true;
                    a = candidate;
                    if b - a <= eps || candidate == hi {
                        break;
                    }
                    candidate = 0.5 * (a + b);
                    continue;
                }
                seen_infeasible = true;
                let tested = candidate;
                b = tested;
                let root = match cert {
                    Some(c) => {
                        let pc = certificate_to_probs(&c, s.r, false)?;
                        let poly = pc.polynomial_in(family)?;
                        let root = boundary_root(&poly, a, tested);
                        if let Some(rt) = root {
                            if !pc.lpi_flag {
                                // the certificate excludes (root, tested]
                                b = b.min(rt.max(a));
                            }
                        }
                        root
                    }
                    None => None,
                };
                if b - a <= eps {
                    break;
                }
                candidate = match root {
                    Some(rt) => (rt - 0.25 * eps).clamp(a + 0.25 * eps.min(b - a), b - 0.25 * eps.min(b - a)),
                    None => 0.5 * (a + b),
                };
                if !(candidate > a && candidate < tested) {
                    candidate = 0.5 * (a + b);
                }
            }
        }
    }
    let solves = s.probes.len();
    let (value, no_feasible_point, all_feasible) = if !seen_feasible && seen_infeasible && b - lo <= eps {
        (lo, true, false)
    } else if !seen_infeasible {
        (hi, false, true)
    } else {
        (a, false, false)
    };
    Ok(CriticalResult {
        value,
        solves,
        no_feasible_point,
        all_feasible,
        probes: s.probes,
    })
}

/// `⌈log₂(Δ/ε)⌉`.
pub fn bisection_steps(width: f64, eps: f64) -> usize {
    let r = width / eps;
    if r <= 1.0 {
        return 0;
    }
    let k = r.log2().ceil();
    // guard against log rounding at exact powers of two
    let mut k = k as usize;
    while k > 0 && width / 2f64.powi(k as i32 - 1) <= eps {
        k -= 1;
    }
    while width / 2f64.powi(k as i32) > eps {
        k += 1;
    }
    k
}

/// Largest root of `c` in `(a, b)` where `c` changes sign from
/// nonnegative to negative.
fn boundary_root(c: &[f64], a: f64, b: f64) -> Option<f64> {
    real_roots(c)
        .into_iter()
        .filter(|&x| x > a && x < b)
        .filter(|&x| {
            let h = 1e-9 * (1.0 + x.abs());
            poly_eval(c, x + h) <= poly_eval(c, x - h)
        })
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |y| y.max(x))))
}
