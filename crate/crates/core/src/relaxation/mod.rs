//! Symbolic moment-matrix relaxations.
//!
//! Every cell of the matrix is a variable: the canonical moment of
//! `reverse(row) · col`. Variables are numbered in order of first appearance
//! scanning the upper triangle row by row; variable 0 is the identity.

pub mod columns;
pub mod expr;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use itertools::Itertools;
use ndarray::{ArrayD, Dimension};

use crate::error::{Error, Result};
use crate::inflation::{InflationScenario, OpId, ProbabilityLabel};
use crate::monomial::{Algebra, Knowability, Monomial, Word};

pub use columns::{build_columns, columns_from_words, parse_column_spec, ColumnKind};
pub use expr::{parse_poly, Atom, Poly};

/// Marker for a cell whose word is the zero operator.
pub const ZERO_CELL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelaxationOptions {
    /// All operators commute (classical sources).
    pub commuting: bool,
    /// Rescaled possibilistic problem.
    pub supports_problem: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" | "maximize" => Ok(Direction::Max),
            "min" | "minimize" => Ok(Direction::Min),
            other => Err(Error::Objective(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub monomial: Monomial,
    pub knowability: Knowability,
    /// Physical, sandwich-positive or a diagonal cell.
    pub nonnegative: bool,
}

/// A data symbol: a number supplied from outside the SDP.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataSymbol {
    One,
    /// The value of a known variable.
    Known(usize),
    /// The probability of a full event of the original scenario.
    Event(ProbabilityLabel),
}

/// `Σ coef·var` compared with `Σ coef·symbol`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: Vec<(DataSymbol, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub terms: BTreeMap<usize, f64>,
    pub constant: f64,
    pub direction: Direction,
}

/// A full event of the original scenario: one outcome and one native
/// setting per party.
pub type Event = (Vec<usize>, Vec<usize>);

/// Key accepted by [`Relaxation::set_values`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValueKey {
    Word(Word),
    Label(ProbabilityLabel),
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    algebra: Arc<Algebra>,
    options: RelaxationOptions,
    columns: Vec<Monomial>,
    cells: Vec<u32>,
    variables: Vec<Variable>,
    index: HashMap<Monomial, usize>,
    known: BTreeMap<usize, f64>,
    /// `var = coef · other`.
    lpi: BTreeMap<usize, (f64, usize)>,
    label_values: HashMap<ProbabilityLabel, f64>,
    equalities: Vec<LinearConstraint>,
    inequalities: Vec<LinearConstraint>,
    lower_bounds: BTreeMap<usize, f64>,
    objective: Option<Objective>,
    uses_lpi: bool,
}

impl Relaxation {
    /// Fills the symbolic matrix for the given columns.
    pub fn new(algebra: Arc<Algebra>, columns: Vec<Monomial>, options: RelaxationOptions) -> Result<Self> {
        let n_ops = algebra.inflation().alphabet().len();
        if let Some(bad) = columns
            .iter()
            .find(|c| c.is_zero || c.word.iter().any(|&op| op as usize >= n_ops))
        {
            return Err(Error::ForeignOperator(format!("column {bad}")));
        }
        let mut cols: Vec<Monomial> = Vec::with_capacity(columns.len() + 1);
        cols.push(Monomial::identity());
        let mut seen: std::collections::HashSet<Monomial> = cols.iter().cloned().collect();
        for c in columns {
            if seen.insert(c.clone()) {
                cols.push(c);
            }
        }
        let n = cols.len();
        let mut cells = vec![ZERO_CELL; n * n];
        let mut index: HashMap<Monomial, usize> = HashMap::new();
        let mut monomials: Vec<Monomial> = Vec::new();
        let mut diagonal: Vec<bool> = Vec::new();
        let mut intern = |m: Monomial| -> usize {
            *index.entry(m.clone()).or_insert_with(|| {
                monomials.push(m);
                monomials.len() - 1
            })
        };
        intern(Monomial::identity());
        for i in 0..n {
            for j in i..n {
                let key = algebra.cell_key(&cols[i].word, &cols[j].word);
                if key.is_zero {
                    continue;
                }
                let id = intern(key) as u32;
                cells[i * n + j] = id;
                cells[j * n + i] = id;
                if i == j {
                    if diagonal.len() <= id as usize {
                        diagonal.resize(id as usize + 1, false);
                    }
                    diagonal[id as usize] = true;
                }
            }
        }
        let variables = monomials
            .into_iter()
            .enumerate()
            .map(|(id, monomial)| {
                let knowability = algebra.knowability(&monomial)?;
                let nonnegative = diagonal.get(id).copied().unwrap_or(false)
                    || algebra.is_nonnegative(&monomial);
                Ok(Variable {
                    monomial,
                    knowability,
                    nonnegative,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut r = Self {
            algebra,
            options,
            columns: cols,
            cells,
            variables,
            index,
            known: BTreeMap::new(),
            lpi: BTreeMap::new(),
            label_values: HashMap::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower_bounds: BTreeMap::new(),
            objective: None,
            uses_lpi: false,
        };
        r.reset_values();
        log::info!(
            "relaxation: {} columns, {} variables, {} knowable",
            r.n(),
            r.variables.len(),
            r.knowable_count()
        );
        Ok(r)
    }

    /// Convenience constructor from a column specification such as `npa2`.
    pub fn from_spec(
        inflation: Arc<InflationScenario>,
        spec: &str,
        max_monomial_length: Option<usize>,
        options: RelaxationOptions,
    ) -> Result<Self> {
        let algebra = Arc::new(Algebra::new(inflation, options.commuting));
        let kinds = parse_column_spec(spec)?;
        let cols = build_columns(&algebra, &kinds, max_monomial_length)?;
        Self::new(algebra, cols, options)
    }

    pub fn algebra(&self) -> &Arc<Algebra> {
        &self.algebra
    }

    pub fn inflation(&self) -> &Arc<InflationScenario> {
        self.algebra.inflation()
    }

    pub fn options(&self) -> RelaxationOptions {
        self.options
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Monomial] {
        &self.columns
    }

    /// Variable id of a cell, or `None` for a zero cell.
    pub fn cell(&self, i: usize, j: usize) -> Option<usize> {
        let c = self.cells[i * self.n() + j];
        (c != ZERO_CELL).then_some(c as usize)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_id(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn known_values(&self) -> &BTreeMap<usize, f64> {
        &self.known
    }

    pub fn lpi_substitutions(&self) -> &BTreeMap<usize, (f64, usize)> {
        &self.lpi
    }

    pub fn equalities(&self) -> &[LinearConstraint] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[LinearConstraint] {
        &self.inequalities
    }

    pub fn lower_bounds(&self) -> &BTreeMap<usize, f64> {
        &self.lower_bounds
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.objective.as_ref()
    }

    pub fn uses_lpi(&self) -> bool {
        self.uses_lpi
    }

    pub fn knowable_count(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| matches!(v.knowability, Knowability::Knowable(_)))
            .count()
    }

    /// Value of a data symbol under the current assignment.
    pub fn symbol_value(&self, s: &DataSymbol) -> Option<f64> {
        match s {
            DataSymbol::One => Some(1.0),
            DataSymbol::Known(m) => self.known.get(m).copied(),
            DataSymbol::Event(l) => self.label_values.get(l).copied(),
        }
    }

    pub fn variable_name(&self, id: usize) -> String {
        self.algebra.display(&self.variables[id].monomial)
    }

    fn party_names(&self) -> &[String] {
        &self.inflation().network().parties
    }

    pub fn label_name(&self, label: &ProbabilityLabel) -> String {
        label.display(self.party_names())
    }

    /// Drops every assignment and derived constraint.
    pub fn reset_values(&mut self) {
        self.known.clear();
        self.lpi.clear();
        self.label_values.clear();
        self.equalities.clear();
        self.inequalities.clear();
        self.lower_bounds.clear();
        self.uses_lpi = false;
        if self.options.supports_problem {
            self.lower_bounds.insert(0, 1.0);
        } else {
            self.known.insert(0, 1.0);
        }
    }

    /// Every full event of the original scenario.
    pub fn full_events(&self) -> Vec<Event> {
        let net = self.inflation().network();
        let outs = net.effective_outcomes.iter().map(|&d| 0..d).multi_cartesian_product();
        let sets: Vec<Vec<usize>> = net
            .native_settings
            .iter()
            .map(|&d| 0..d)
            .multi_cartesian_product()
            .collect();
        let mut events = Vec::new();
        for o in outs {
            for s in &sets {
                events.push((o.clone(), s.clone()));
            }
        }
        events
    }

    fn event_label(&self, event: &Event) -> ProbabilityLabel {
        ProbabilityLabel {
            parties: (0..event.0.len()).collect(),
            outcomes: event.0.clone(),
            settings: event.1.clone(),
        }
    }

    /// Expands `p(label)` into moments with last outcomes written as
    /// identity minus the others. Children of interrupted edges read their
    /// parents' outcomes from the label, so parents must be present.
    pub fn label_expansion(&self, label: &ProbabilityLabel) -> Result<Vec<(f64, Word)>> {
        let inflation = self.inflation();
        let net = inflation.network();
        let mut acc: Vec<(f64, Word)> = vec![(1.0, Word::new())];
        for (k, &party) in label.parties.iter().enumerate() {
            let comp = &net.setting_composition[party];
            let native = label.settings[k];
            let outcome = label.outcomes[k];
            if native >= comp.native || outcome >= net.effective_outcomes[party] {
                return Err(Error::Objective(format!(
                    "label {} out of range",
                    self.label_name(label)
                )));
            }
            let mut parent_outs = Vec::with_capacity(comp.parents.len());
            for &(parent, _) in &comp.parents {
                let pos = label.parties.iter().position(|&p| p == parent).ok_or_else(|| {
                    Error::NotRepresentable(format!(
                        "{} omits parent {} of {}",
                        self.label_name(label),
                        net.parties[parent],
                        net.parties[party]
                    ))
                })?;
                parent_outs.push(label.outcomes[pos]);
            }
            let setting = comp.compose(native, &parent_outs);
            let last = net.effective_outcomes[party] - 1;
            let factor: Vec<(f64, Option<OpId>)> = if outcome < last {
                vec![(1.0, Some(inflation.first_copy_op(party, setting, outcome)?))]
            } else {
                let mut f = vec![(1.0, None)];
                for o in 0..last {
                    f.push((-1.0, Some(inflation.first_copy_op(party, setting, o)?)));
                }
                f
            };
            acc = acc
                .iter()
                .flat_map(|(c, w)| {
                    factor.iter().map(move |(fc, op)| {
                        let mut w = w.clone();
                        w.extend(*op);
                        (c * fc, w)
                    })
                })
                .collect();
        }
        Ok(acc)
    }

    /// Collects `Σ coef·word` into `Σ coef·var`; zero words drop out.
    fn words_to_vars(&self, terms: &[(f64, Word)]) -> Result<BTreeMap<usize, f64>> {
        let mut out: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, w) in terms {
            let key = self.algebra.moment_key(w);
            if key.is_zero {
                continue;
            }
            let id = self.index.get(&key).copied().ok_or_else(|| {
                Error::NotRepresentable(self.algebra.display(&key))
            })?;
            *out.entry(id).or_insert(0.0) += c;
        }
        out.retain(|_, c| *c != 0.0);
        Ok(out)
    }

    /// Labels whose values determine every knowable variable and, for
    /// interrupted scenarios, every full event.
    pub fn required_labels(&self) -> Vec<ProbabilityLabel> {
        let mut labels: Vec<ProbabilityLabel> = Vec::new();
        for v in &self.variables {
            match &v.knowability {
                Knowability::Knowable(l) => labels.push(l.clone()),
                Knowability::Product(ls) | Knowability::Semi { known: ls, .. } => {
                    labels.extend(ls.iter().cloned())
                }
                Knowability::Unknowable => {}
            }
        }
        if self.inflation().network().is_interrupted() {
            labels.extend(self.full_events().iter().map(|e| self.event_label(e)));
        }
        labels.sort();
        labels.dedup();
        labels
    }

    /// Installs the values of all knowable variables from a distribution
    /// indexed `[out_1, .., out_n, in_1, .., in_n]` over the original
    /// scenario. In supports mode only the support (`p > 0`) is used.
    pub fn set_distribution(&mut self, p: &ArrayD<f64>, use_lpi: bool) -> Result<()> {
        let marginal = self.marginal_fn(p)?;
        if self.options.supports_problem {
            let support: Vec<Event> = self
                .full_events()
                .into_iter()
                .filter(|e| marginal(&self.event_label(e)) > 0.0)
                .collect();
            return self.set_support(&support);
        }
        let labels = self.required_labels();
        let values: HashMap<ProbabilityLabel, f64> =
            labels.into_iter().map(|l| (l.clone(), marginal(&l))).collect();
        self.install_label_values(&values, use_lpi)
    }

    /// Validates `p` and returns the marginal of any label. Absent parties
    /// are summed over at native setting 0.
    pub fn marginal_fn(&self, p: &ArrayD<f64>) -> Result<impl Fn(&ProbabilityLabel) -> f64> {
        let net = self.inflation().network();
        let n = net.n_parties();
        let expected: Vec<usize> = net
            .effective_outcomes
            .iter()
            .chain(&net.native_settings)
            .copied()
            .collect();
        if p.shape() != expected.as_slice() {
            return Err(Error::Distribution(format!(
                "shape {:?}, expected {:?}",
                p.shape(),
                expected
            )));
        }
        if let Some(x) = p.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Distribution(format!("entry {x} is not a probability")));
        }
        for s in net.native_settings.iter().map(|&d| 0..d).multi_cartesian_product() {
            let total: f64 = net
                .effective_outcomes
                .iter()
                .map(|&d| 0..d)
                .multi_cartesian_product()
                .map(|o| {
                    let idx: Vec<usize> = o.iter().chain(&s).copied().collect();
                    p[idx.as_slice()]
                })
                .sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Distribution(format!(
                    "outcomes sum to {total} at settings {s:?}"
                )));
            }
        }
        let p = p.clone();
        let outs = net.effective_outcomes.clone();
        Ok(move |label: &ProbabilityLabel| {
            let free: Vec<usize> = (0..n).filter(|q| !label.parties.contains(q)).collect();
            let ranges = free.iter().map(|&q| 0..outs[q]).multi_cartesian_product();
            let mut idx = vec![0usize; 2 * n];
            for (k, &q) in label.parties.iter().enumerate() {
                idx[q] = label.outcomes[k];
                idx[n + q] = label.settings[k];
            }
            if free.is_empty() {
                return p[idx.as_slice()];
            }
            ranges
                .map(|o| {
                    for (&q, &v) in free.iter().zip(&o) {
                        idx[q] = v;
                    }
                    p[idx.as_slice()]
                })
                .sum()
        })
    }

    /// Replaces all values with those implied by the given label values.
    pub fn install_label_values(
        &mut self,
        values: &HashMap<ProbabilityLabel, f64>,
        use_lpi: bool,
    ) -> Result<()> {
        if self.options.supports_problem {
            return Err(Error::Supports("use set_support in supports mode".into()));
        }
        self.reset_values();
        self.label_values = values.clone();
        self.uses_lpi = use_lpi;
        self.propagate_labels(use_lpi);
        if self.inflation().network().is_interrupted() {
            self.add_event_equalities()?;
        }
        Ok(())
    }

    fn propagate_labels(&mut self, use_lpi: bool) {
        let product = |ls: &[ProbabilityLabel], vals: &HashMap<ProbabilityLabel, f64>| {
            ls.iter()
                .map(|l| vals.get(l).copied())
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().product::<f64>())
        };
        for id in 1..self.variables.len() {
            if self.known.contains_key(&id) {
                continue;
            }
            match &self.variables[id].knowability {
                Knowability::Knowable(l) => {
                    if let Some(&v) = self.label_values.get(l) {
                        self.known.insert(id, v);
                    }
                }
                Knowability::Product(ls) => {
                    if let Some(v) = product(ls, &self.label_values) {
                        self.known.insert(id, v);
                    }
                }
                Knowability::Semi { known, rest } if use_lpi => {
                    if let (Some(v), Some(&other)) =
                        (product(known, &self.label_values), self.index.get(rest))
                    {
                        self.lpi.insert(id, (v, other));
                    }
                }
                _ => {}
            }
        }
    }

    /// For interrupted scenarios, off-diagonal moments are constrained by
    /// the requirement that every full event keeps its probability.
    fn add_event_equalities(&mut self) -> Result<()> {
        for event in self.full_events() {
            let label = self.event_label(&event);
            if !self.label_values.contains_key(&label) {
                continue;
            }
            let expansion = self.label_expansion(&label)?;
            let Ok(terms) = self.words_to_vars(&expansion) else {
                continue;
            };
            if terms.keys().all(|id| self.known.contains_key(id)) {
                continue;
            }
            self.equalities.push(LinearConstraint {
                terms: terms.into_iter().collect(),
                rhs: vec![(DataSymbol::Event(label), 1.0)],
            });
        }
        Ok(())
    }

    /// Assigns values to individual moments or labels, keeping earlier
    /// assignments.
    pub fn set_values(&mut self, assignments: &[(ValueKey, f64)], use_lpi: bool) -> Result<()> {
        for (key, value) in assignments {
            match key {
                ValueKey::Label(l) => {
                    if let Some(&old) = self.label_values.get(l) {
                        if (old - value).abs() > 1e-12 {
                            return Err(Error::Conflict {
                                name: self.label_name(l),
                                old,
                                new: *value,
                            });
                        }
                    }
                    self.label_values.insert(l.clone(), *value);
                }
                ValueKey::Word(w) => {
                    self.algebra.canon(w)?;
                    let key = self.algebra.moment_key(w);
                    let id = self
                        .index
                        .get(&key)
                        .copied()
                        .ok_or_else(|| Error::UnknownVariable(self.algebra.display(&key)))?;
                    self.assign(id, *value)?;
                }
            }
        }
        self.uses_lpi |= use_lpi;
        // label-derived values must agree with direct assignments
        let before = self.known.clone();
        self.propagate_labels(use_lpi);
        for (id, v) in &before {
            if let Some(&now) = self.known.get(id) {
                if (now - v).abs() > 1e-12 {
                    return Err(Error::Conflict {
                        name: self.variable_name(*id),
                        old: *v,
                        new: now,
                    });
                }
            }
        }
        Ok(())
    }

    fn assign(&mut self, id: usize, value: f64) -> Result<()> {
        if id == 0 && !self.options.supports_problem && (value - 1.0).abs() > 1e-12 {
            return Err(Error::Conflict {
                name: "1".into(),
                old: 1.0,
                new: value,
            });
        }
        if let Some(&old) = self.known.get(&id) {
            if (old - value).abs() > 1e-12 {
                return Err(Error::Conflict {
                    name: self.variable_name(id),
                    old,
                    new: value,
                });
            }
        }
        self.known.insert(id, value);
        Ok(())
    }

    /// Parses and installs an objective.
    pub fn set_objective_str(&mut self, text: &str, direction: Direction) -> Result<()> {
        let poly = parse_poly(text)?;
        self.set_objective(&poly, direction)
    }

    pub fn set_objective(&mut self, poly: &Poly, direction: Direction) -> Result<()> {
        if self.options.supports_problem {
            return Err(Error::Supports("objectives are not allowed in supports mode".into()));
        }
        let mut words: Vec<(f64, Word)> = Vec::new();
        for (coef, atoms) in poly {
            let mut acc: Vec<(f64, Word)> = vec![(*coef, Word::new())];
            for atom in atoms {
                let expansion = self.atom_expansion(atom)?;
                acc = acc
                    .iter()
                    .flat_map(|(c, w)| {
                        expansion.iter().map(move |(ec, ew)| {
                            let mut w = w.clone();
                            w.extend_from_slice(ew);
                            (c * ec, w)
                        })
                    })
                    .collect();
            }
            words.extend(acc);
        }
        let mut terms = self.words_to_vars(&words)?;
        let constant = terms.remove(&0).unwrap_or(0.0);
        self.objective = Some(Objective {
            terms,
            constant,
            direction,
        });
        Ok(())
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
    }

    fn atom_expansion(&self, atom: &Atom) -> Result<Vec<(f64, Word)>> {
        let inflation = self.inflation();
        match atom {
            Atom::Label(text) => {
                let label = ProbabilityLabel::parse(text, self.party_names())?;
                self.label_expansion(&label)
            }
            Atom::Operator(text) => Ok(vec![(1.0, self.algebra.parse_word(text)?)]),
            Atom::Correlator(factors) => {
                let net = inflation.network();
                let mut acc: Vec<(f64, Word)> = vec![(1.0, Word::new())];
                for (name, setting) in factors {
                    let party = net
                        .party_index(name)
                        .ok_or_else(|| Error::UnknownNode(name.clone()))?;
                    if net.effective_outcomes[party] != 2 {
                        return Err(Error::Objective(format!(
                            "correlator needs binary outcomes for {name}"
                        )));
                    }
                    if !net.setting_composition[party].is_identity() {
                        return Err(Error::Objective(format!(
                            "correlator undefined for interrupted party {name}"
                        )));
                    }
                    if *setting >= net.effective_settings[party] {
                        return Err(Error::Objective(format!("setting {setting} out of range for {name}")));
                    }
                    let op = inflation.first_copy_op(party, *setting, 0)?;
                    acc = acc
                        .iter()
                        .flat_map(|(c, w)| {
                            let mut with = w.clone();
                            with.push(op);
                            [(*c, w.clone()), (-2.0 * c, with)]
                        })
                        .collect();
                }
                Ok(acc)
            }
        }
    }

    /// Possibilistic constraints from the set of possible full events.
    pub fn set_support(&mut self, support: &[Event]) -> Result<()> {
        if !self.options.supports_problem {
            return Err(Error::Supports("relaxation was not built as a supports problem".into()));
        }
        if self.objective.is_some() {
            return Err(Error::Supports("an objective is set".into()));
        }
        self.reset_values();
        let net = self.inflation().network().clone();
        // marginals over absent parties are taken at setting 0
        let possible_marginal = |label: &ProbabilityLabel| {
            support.iter().any(|(o, s)| {
                (0..net.n_parties()).all(|q| match label.parties.iter().position(|&p| p == q) {
                    Some(k) => o[q] == label.outcomes[k] && s[q] == label.settings[k],
                    None => s[q] == 0,
                })
            })
        };
        for id in 1..self.variables.len() {
            match self.variables[id].knowability.clone() {
                Knowability::Knowable(l) => {
                    if possible_marginal(&l) {
                        self.lower_bounds.insert(id, 1.0);
                    } else {
                        self.known.insert(id, 0.0);
                    }
                }
                Knowability::Product(ls)
                    if ls.iter().any(|l| !possible_marginal(l)) => {
                        self.known.insert(id, 0.0);
                    }
                _ => {}
            }
        }
        for event in self.full_events() {
            let label = self.event_label(&event);
            let expansion = self.label_expansion(&label)?;
            let Ok(terms) = self.words_to_vars(&expansion) else {
                continue;
            };
            let terms: Vec<(usize, f64)> = terms.into_iter().collect();
            if support.contains(&event) {
                self.inequalities.push(LinearConstraint {
                    terms,
                    rhs: vec![(DataSymbol::One, 1.0)],
                });
            } else {
                self.equalities.push(LinearConstraint { terms, rhs: vec![] });
            }
        }
        Ok(())
    }

    /// Writes the symbolic matrix as CSV: a header of column words, then
    /// one row per column word with cell contents.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = std::iter::once(String::new())
            .chain(self.columns.iter().map(|c| self.algebra.display(c)))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row = vec![self.algebra.display(&self.columns[i])];
            for j in 0..self.n() {
                row.push(match self.cell(i, j) {
                    None => "0".into(),
                    Some(id) => self.cell_text(id),
                });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Display text of a variable: a known number, a label or a word.
    pub fn cell_text(&self, id: usize) -> String {
        if let Some(v) = self.known.get(&id) {
            if !matches!(self.variables[id].knowability, Knowability::Knowable(_) | Knowability::Product(_))
                || id == 0
            {
                return format!("{v}");
            }
        }
        match &self.variables[id].knowability {
            Knowability::Knowable(l) => self.label_name(l),
            Knowability::Product(ls) => ls.iter().map(|l| self.label_name(l)).join("*"),
            _ => self.variable_name(id),
        }
    }
}

/// Builds a dense distribution array from a function of (outcomes, settings).
pub fn distribution_from_fn(
    outcomes: &[usize],
    settings: &[usize],
    f: impl Fn(&[usize], &[usize]) -> f64,
) -> ArrayD<f64> {
    let shape: Vec<usize> = outcomes.iter().chain(settings).copied().collect();
    let n = outcomes.len();
    ArrayD::from_shape_fn(shape, |idx| {
        let idx = idx.slice();
        f(&idx[..n], &idx[n..])
    })
}
