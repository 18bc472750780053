//! The inflated scenario: operator alphabet over source copies, the
//! copy-permutation symmetry group, and probability labels of the original
//! scenario.

use std::collections::HashMap;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::scenario::NetworkScenario;

/// Index of an operator in the alphabet. Alphabet order is the operator
/// total order used for every lexicographic comparison.
pub type OpId = u16;

/// Groups larger than this are not materialized; orbit minimization then
/// iterates generators to a fixed point.
pub const DEFAULT_GROUP_CAP: usize = 40320;

#[derive(Debug, Clone, PartialEq)]
pub struct InflationSpec {
    pub network: NetworkScenario,
    pub copies_per_source: Vec<usize>,
}

impl InflationSpec {
    pub fn new(network: NetworkScenario, copies_per_source: Vec<usize>) -> Result<Self> {
        if copies_per_source.len() != network.n_sources() {
            return Err(Error::Cardinality(format!(
                "{} inflation levels for {} sources",
                copies_per_source.len(),
                network.n_sources()
            )));
        }
        if copies_per_source.contains(&0) {
            return Err(Error::Cardinality("inflation levels must be >= 1".into()));
        }
        Ok(Self {
            network,
            copies_per_source,
        })
    }
}

/// A projector `P^{copies}_{setting|outcome}`. Copy indices are 0-based
/// here and 1-based when displayed.
///
/// The derived ordering (party, copies, setting, outcome) is the alphabet
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Operator {
    pub party: usize,
    /// One copy index per source feeding the party, in source order.
    pub copies: Vec<usize>,
    pub setting: usize,
    pub outcome: usize,
}

/// Enumerates every operator, omitting the last outcome of each
/// measurement.
pub fn build_alphabet(spec: &InflationSpec) -> Vec<Operator> {
    let net = &spec.network;
    let mut ops = Vec::new();
    for party in 0..net.n_parties() {
        let ranges = net.party_sources[party]
            .iter()
            .map(|&s| 0..spec.copies_per_source[s]);
        let copy_tuples: Vec<Vec<usize>> = if net.party_sources[party].is_empty() {
            vec![Vec::new()]
        } else {
            ranges.multi_cartesian_product().collect()
        };
        for copies in copy_tuples {
            for setting in 0..net.effective_settings[party] {
                for outcome in 0..net.effective_outcomes[party] - 1 {
                    ops.push(Operator {
                        party,
                        copies: copies.clone(),
                        setting,
                        outcome,
                    });
                }
            }
        }
    }
    ops
}

/// A permutation of the alphabet, `perm[op] = image`.
pub type Permutation = Vec<OpId>;

#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    pub generators: Vec<Permutation>,
    /// All elements (identity first) when the group order is under the cap.
    pub elements: Option<Vec<Permutation>>,
    pub order: u128,
}

impl SymmetryGroup {
    pub fn is_trivial(&self) -> bool {
        self.order == 1
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// The direct product of the copy-permutation groups of every source,
/// acting on the alphabet.
pub fn symmetry_group(spec: &InflationSpec, alphabet: &[Operator], cap: usize) -> SymmetryGroup {
    let index: HashMap<&Operator, OpId> = alphabet
        .iter()
        .enumerate()
        .map(|(i, op)| (op, i as OpId))
        .collect();
    let net = &spec.network;
    // per_source[s][c] = image of copy c
    let act = |per_source: &[Vec<usize>]| -> Permutation {
        alphabet
            .iter()
            .map(|op| {
                let mut img = op.clone();
                for (slot, &s) in img.copies.iter_mut().zip(&net.party_sources[op.party]) {
                    *slot = per_source[s][*slot];
                }
                index[&img]
            })
            .collect()
    };
    let identity: Vec<Vec<usize>> = spec
        .copies_per_source
        .iter()
        .map(|&c| (0..c).collect())
        .collect();

    let mut generators = Vec::new();
    for (s, &c) in spec.copies_per_source.iter().enumerate() {
        for k in 0..c.saturating_sub(1) {
            let mut perm = identity.clone();
            perm[s].swap(k, k + 1);
            generators.push(act(&perm));
        }
    }

    let order: u128 = spec
        .copies_per_source
        .iter()
        .map(|&c| factorial(c))
        .product();
    let elements = (order <= cap as u128).then(|| {
        spec.copies_per_source
            .iter()
            .map(|&c| (0..c).permutations(c).collect::<Vec<_>>())
            .multi_cartesian_product()
            .map(|per_source| act(&per_source))
            .collect()
    });
    SymmetryGroup {
        generators,
        elements,
        order,
    }
}

/// A marginal `p_{parties}(outcomes|settings)` of the original scenario.
/// Settings are native (pre-interruption) setting indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProbabilityLabel {
    pub parties: Vec<usize>,
    pub outcomes: Vec<usize>,
    pub settings: Vec<usize>,
}

impl ProbabilityLabel {
    /// Renders as `pAB(01|00)`; indices are comma-separated when any
    /// exceeds a single digit.
    pub fn display(&self, party_names: &[String]) -> String {
        let names: String = self.parties.iter().map(|&p| party_names[p].as_str()).collect();
        let join = |v: &[usize]| {
            if v.iter().all(|&x| x < 10) {
                v.iter().map(|x| x.to_string()).collect::<String>()
            } else {
                v.iter().join(",")
            }
        };
        format!("p{names}({}|{})", join(&self.outcomes), join(&self.settings))
    }

    /// Parses the [`display`](Self::display) form.
    pub fn parse(text: &str, party_names: &[String]) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed probability label `{text}`"));
        let body = text.trim().strip_prefix('p').ok_or_else(bad)?;
        let open = body.find('(').ok_or_else(bad)?;
        let inner = body[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let mut rest = &body[..open];
        let mut parties = Vec::new();
        while !rest.is_empty() {
            // longest matching party name first
            let (idx, name) = party_names
                .iter()
                .enumerate()
                .filter(|(_, n)| rest.starts_with(n.as_str()))
                .max_by_key(|(_, n)| n.len())
                .ok_or_else(|| Error::UnknownNode(rest.to_string()))?;
            parties.push(idx);
            rest = &rest[name.len()..];
        }
        let (outs, sets) = inner.split_once('|').ok_or_else(bad)?;
        let digits = |s: &str| -> Result<Vec<usize>> {
            let s = s.trim();
            if s.contains(',') {
                s.split(',')
                    .map(|t| t.trim().parse().map_err(|_| bad()))
                    .collect()
            } else {
                s.chars()
                    .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(bad))
                    .collect()
            }
        };
        let outcomes = digits(outs)?;
        let settings = digits(sets)?;
        if outcomes.len() != parties.len() || settings.len() != parties.len() {
            return Err(bad());
        }
        let mut order: Vec<usize> = (0..parties.len()).collect();
        order.sort_by_key(|&i| parties[i]);
        let label = Self {
            parties: order.iter().map(|&i| parties[i]).collect(),
            outcomes: order.iter().map(|&i| outcomes[i]).collect(),
            settings: order.iter().map(|&i| settings[i]).collect(),
        };
        if label.parties.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad());
        }
        Ok(label)
    }
}

/// Alphabet, symmetry group and knowability rule of one inflation.
#[derive(Debug, Clone)]
pub struct InflationScenario {
    spec: InflationSpec,
    alphabet: Vec<Operator>,
    index: HashMap<Operator, OpId>,
    /// `(source, copy)` pairs each operator acts on.
    support: Vec<Vec<(usize, usize)>>,
    /// Operators of one measurement (party, copies, setting) share an id.
    measurement: Vec<u32>,
    group: SymmetryGroup,
}

impl InflationScenario {
    pub fn new(spec: InflationSpec) -> Result<Self> {
        Self::with_group_cap(spec, DEFAULT_GROUP_CAP)
    }

    pub fn with_group_cap(spec: InflationSpec, cap: usize) -> Result<Self> {
        let alphabet = build_alphabet(&spec);
        if alphabet.len() > OpId::MAX as usize {
            return Err(Error::Unsupported(format!(
                "alphabet of {} operators is too large",
                alphabet.len()
            )));
        }
        let index = alphabet
            .iter()
            .enumerate()
            .map(|(i, op)| (op.clone(), i as OpId))
            .collect();
        let support = alphabet
            .iter()
            .map(|op| {
                spec.network.party_sources[op.party]
                    .iter()
                    .copied()
                    .zip(op.copies.iter().copied())
                    .collect()
            })
            .collect();
        let mut meas_ids: HashMap<(usize, &[usize], usize), u32> = HashMap::new();
        let measurement = alphabet
            .iter()
            .map(|op| {
                let next = meas_ids.len() as u32;
                *meas_ids
                    .entry((op.party, op.copies.as_slice(), op.setting))
                    .or_insert(next)
            })
            .collect();
        let group = symmetry_group(&spec, &alphabet, cap);
        Ok(Self {
            spec,
            alphabet,
            index,
            support,
            measurement,
            group,
        })
    }

    pub fn spec(&self) -> &InflationSpec {
        &self.spec
    }

    pub fn network(&self) -> &NetworkScenario {
        &self.spec.network
    }

    pub fn alphabet(&self) -> &[Operator] {
        &self.alphabet
    }

    pub fn operator(&self, id: OpId) -> &Operator {
        &self.alphabet[id as usize]
    }

    pub fn op_id(&self, op: &Operator) -> Result<OpId> {
        self.index
            .get(op)
            .copied()
            .ok_or_else(|| Error::ForeignOperator(format!("{op:?}")))
    }

    pub fn group(&self) -> &SymmetryGroup {
        &self.group
    }

    pub fn support(&self, id: OpId) -> &[(usize, usize)] {
        &self.support[id as usize]
    }

    pub fn measurement(&self, id: OpId) -> u32 {
        self.measurement[id as usize]
    }

    pub fn shares_system(&self, a: OpId, b: OpId) -> bool {
        let sb = self.support(b);
        self.support(a).iter().any(|pair| sb.contains(pair))
    }

    /// The operator of `party` measuring the first copy of every source.
    pub fn first_copy_op(&self, party: usize, setting: usize, outcome: usize) -> Result<OpId> {
        self.op_id(&Operator {
            party,
            copies: vec![0; self.network().party_sources[party].len()],
            setting,
            outcome,
        })
    }

    /// `A^{1,2}_{0|1}`: copies 1-based, then `setting|outcome`.
    pub fn display_op(&self, id: OpId) -> String {
        let op = self.operator(id);
        let name = &self.network().parties[op.party];
        if op.copies.is_empty() {
            format!("{name}_{{{}|{}}}", op.setting, op.outcome)
        } else {
            format!(
                "{name}^{{{}}}_{{{}|{}}}",
                op.copies.iter().map(|c| c + 1).join(","),
                op.setting,
                op.outcome
            )
        }
    }

    /// Parses one operator in [`display_op`](Self::display_op) syntax.
    pub fn parse_op(&self, text: &str) -> Result<OpId> {
        let text = text.trim();
        let bad = || Error::Parse(format!("malformed operator `{text}`"));
        let (name, rest) = text.split_once(['^', '_']).ok_or_else(bad)?;
        let party = self
            .network()
            .party_index(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
        let (copies, tail) = if text[name.len()..].starts_with('^') {
            let inner = rest.strip_prefix('{').ok_or_else(bad)?;
            let (list, tail) = inner.split_once('}').ok_or_else(bad)?;
            let copies = list
                .split(',')
                .map(|c| match c.trim().parse::<usize>() {
                    Ok(c) if c >= 1 => Ok(c - 1),
                    _ => Err(bad()),
                })
                .collect::<Result<Vec<_>>>()?;
            (copies, tail.strip_prefix('_').ok_or_else(bad)?)
        } else {
            // bare `A_{x|a}` means the first copy of every source
            (vec![0; self.network().party_sources[party].len()], rest)
        };
        let inner = tail
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(bad)?;
        let (x, a) = inner.split_once('|').ok_or_else(bad)?;
        let setting = x.trim().parse().map_err(|_| bad())?;
        let outcome = a.trim().parse().map_err(|_| bad())?;
        self.op_id(&Operator {
            party,
            copies,
            setting,
            outcome,
        })
    }

    pub fn label_name(&self, label: &ProbabilityLabel) -> String {
        label.display(&self.network().parties)
    }

    /// The original-scenario marginal a word of operators equals, if any.
    ///
    /// Requires every party at most once, every source measured with a
    /// single copy index, and (for interrupted parties) every visible parent
    /// present with the outcome encoded in the child's effective setting.
    pub fn knowable_word(&self, word: &[OpId]) -> Option<ProbabilityLabel> {
        let net = self.network();
        let mut copy_of_source: Vec<Option<usize>> = vec![None; net.n_sources()];
        let mut by_party: Vec<Option<&Operator>> = vec![None; net.n_parties()];
        for &id in word {
            let op = self.operator(id);
            if by_party[op.party].replace(op).is_some() {
                return None;
            }
            for &(s, c) in self.support(id) {
                match copy_of_source[s] {
                    Some(prev) if prev != c => return None,
                    _ => copy_of_source[s] = Some(c),
                }
            }
        }
        let mut label = ProbabilityLabel {
            parties: Vec::new(),
            outcomes: Vec::new(),
            settings: Vec::new(),
        };
        for (party, op) in by_party.iter().enumerate() {
            let Some(op) = op else { continue };
            let comp = &net.setting_composition[party];
            let (native, parent_outcomes) = comp.decompose(op.setting);
            for (&(parent, _), &required) in comp.parents.iter().zip(&parent_outcomes) {
                match by_party[parent] {
                    Some(p) if p.outcome == required => {}
                    _ => return None,
                }
            }
            label.parties.push(party);
            label.outcomes.push(op.outcome);
            label.settings.push(native);
        }
        Some(label)
    }
}
