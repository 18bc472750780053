//! Canonical forms of operator words.
//!
//! Words live in a partially commutative monoid: two operators commute when
//! they belong to different parties, act on disjoint source copies, or are
//! projectors of the same measurement. On top of that, projectors are
//! idempotent and distinct outcomes of one measurement are orthogonal.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::inflation::{InflationScenario, OpId, ProbabilityLabel};

pub type Word = SmallVec<[OpId; 8]>;

/// A canonical word, or the zero operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub word: Word,
    pub is_zero: bool,
}

impl Monomial {
    pub fn identity() -> Self {
        Self {
            word: Word::new(),
            is_zero: false,
        }
    }

    pub fn zero() -> Self {
        Self {
            word: Word::new(),
            is_zero: true,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.is_zero && self.word.is_empty()
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
}

/// Zero sorts first, then shorter words, then lexicographic alphabet order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .is_zero
            .cmp(&self.is_zero)
            .then_with(|| word_cmp(&self.word, &other.word))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn word_cmp(a: &[OpId], b: &[OpId]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// How a monomial relates to probabilities of the original scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Knowability {
    /// Equal to a single marginal.
    Knowable(ProbabilityLabel),
    /// Product of marginals over independent components.
    Product(Vec<ProbabilityLabel>),
    /// Some independent components are marginals; `rest` is the canonical
    /// product of the others.
    Semi {
        known: Vec<ProbabilityLabel>,
        rest: Monomial,
    },
    Unknowable,
}

impl Knowability {
    /// The labels whose product gives the value, when fully knowable.
    pub fn labels(&self) -> Option<Vec<ProbabilityLabel>> {
        match self {
            Knowability::Knowable(l) => Some(vec![l.clone()]),
            Knowability::Product(ls) => Some(ls.clone()),
            _ => None,
        }
    }
}

/// Operator algebra of one inflation, with a shared canonicalization memo.
#[derive(Debug)]
pub struct Algebra {
    inflation: Arc<InflationScenario>,
    commuting: bool,
    n: usize,
    commute: Vec<bool>,
    orthogonal: Vec<bool>,
    memo: DashMap<Word, Monomial>,
}

impl Algebra {
    pub fn new(inflation: Arc<InflationScenario>, commuting: bool) -> Self {
        let n = inflation.alphabet().len();
        let mut commute = vec![false; n * n];
        let mut orthogonal = vec![false; n * n];
        for a in 0..n as OpId {
            for b in 0..n as OpId {
                let (oa, ob) = (inflation.operator(a), inflation.operator(b));
                let same_meas = inflation.measurement(a) == inflation.measurement(b);
                let idx = a as usize * n + b as usize;
                orthogonal[idx] = same_meas && oa.outcome != ob.outcome;
                commute[idx] = commuting
                    || oa.party != ob.party
                    || same_meas
                    || !inflation.shares_system(a, b);
            }
        }
        Self {
            inflation,
            commuting,
            n,
            commute,
            orthogonal,
            memo: DashMap::new(),
        }
    }

    pub fn inflation(&self) -> &Arc<InflationScenario> {
        &self.inflation
    }

    pub fn is_commuting(&self) -> bool {
        self.commuting
    }

    #[inline]
    pub fn commutes(&self, a: OpId, b: OpId) -> bool {
        self.commute[a as usize * self.n + b as usize]
    }

    #[inline]
    pub fn orthogonal(&self, a: OpId, b: OpId) -> bool {
        self.orthogonal[a as usize * self.n + b as usize]
    }

    fn check(&self, word: &[OpId]) -> Result<()> {
        match word.iter().find(|&&op| op as usize >= self.n) {
            Some(op) => Err(Error::ForeignOperator(format!("operator id {op}"))),
            None => Ok(()),
        }
    }

    /// Idempotency, orthogonality and commutation, without symmetry.
    pub fn normal_form(&self, word: &[OpId]) -> Monomial {
        let mut w: Word = word.into();
        loop {
            match self.find_reduction(&w) {
                None => break,
                Some(Reduction::Zero) => return Monomial::zero(),
                Some(Reduction::Merge(j)) => {
                    w.remove(j);
                }
            }
        }
        Monomial {
            word: self.lex_least(&w),
            is_zero: false,
        }
    }

    /// Looks for two equal or orthogonal letters that some sequence of
    /// commutations makes adjacent. Positions i < j can be brought together
    /// iff no k in between depends on i and is depended on by j.
    fn find_reduction(&self, w: &[OpId]) -> Option<Reduction> {
        let len = w.len();
        if len < 2 {
            return None;
        }
        debug_assert!(len <= 64);
        // after[i]: positions k > i with i before k in the dependency order
        let mut after = vec![0u64; len];
        for i in (0..len).rev() {
            for k in i + 1..len {
                if !self.commutes(w[i], w[k]) || w[i] == w[k] {
                    after[i] |= (1u64 << k) | after[k];
                }
            }
        }
        let mut before = vec![0u64; len];
        for j in 0..len {
            for k in 0..j {
                if !self.commutes(w[k], w[j]) || w[k] == w[j] {
                    before[j] |= (1u64 << k) | before[k];
                }
            }
        }
        for i in 0..len {
            for j in i + 1..len {
                let equal = w[i] == w[j];
                let orth = self.orthogonal(w[i], w[j]);
                if !(equal || orth) || after[i] & before[j] != 0 {
                    continue;
                }
                return Some(if equal {
                    Reduction::Merge(j)
                } else {
                    Reduction::Zero
                });
            }
        }
        None
    }

    /// Lexicographically least word among the commutation-equivalent ones:
    /// repeatedly emit the smallest letter with no unemitted dependency
    /// before it.
    fn lex_least(&self, w: &[OpId]) -> Word {
        let len = w.len();
        let mut used = vec![false; len];
        let mut out = Word::with_capacity(len);
        for _ in 0..len {
            let mut best: Option<usize> = None;
            for j in 0..len {
                if used[j] {
                    continue;
                }
                let free = (0..j).all(|k| used[k] || self.commutes(w[k], w[j]) && w[k] != w[j]);
                if free && best.is_none_or(|b| w[j] < w[b]) {
                    best = Some(j);
                }
            }
            let b = best.expect("a minimal element always exists");
            used[b] = true;
            out.push(w[b]);
        }
        out
    }

    fn apply(&self, perm: &[OpId], word: &[OpId]) -> Word {
        word.iter().map(|&op| perm[op as usize]).collect()
    }

    /// Least normal form over the symmetry orbit of an already reduced word.
    pub fn orbit_representative(&self, m: &Monomial) -> Monomial {
        if m.is_zero || m.word.is_empty() {
            return m.clone();
        }
        let group = self.inflation.group();
        if group.is_trivial() {
            return m.clone();
        }
        match &group.elements {
            Some(elements) => elements
                .iter()
                .map(|g| self.normal_form(&self.apply(g, &m.word)))
                .min()
                .expect("group has an identity"),
            None => {
                let mut seen: HashSet<Word> = HashSet::new();
                let mut frontier = vec![m.word.clone()];
                let mut best = m.clone();
                seen.insert(m.word.clone());
                while let Some(w) = frontier.pop() {
                    for g in &group.generators {
                        let img = self.normal_form(&self.apply(g, &w));
                        if seen.insert(img.word.clone()) {
                            if img < best {
                                best = img.clone();
                            }
                            frontier.push(img.word);
                        }
                    }
                }
                best
            }
        }
    }

    /// Full canonical form: normal form, then symmetry-orbit minimum.
    pub fn canon(&self, word: &[OpId]) -> Result<Monomial> {
        self.check(word)?;
        Ok(self.canon_unchecked(word))
    }

    pub(crate) fn canon_unchecked(&self, word: &[OpId]) -> Monomial {
        if let Some(m) = self.memo.get(word) {
            return m.clone();
        }
        let m = self.orbit_representative(&self.normal_form(word));
        self.memo.insert(word.into(), m.clone());
        m
    }

    /// Canonical label of the moment `<word>`; a word and its reversal
    /// (its adjoint) have equal real expectations.
    pub fn moment_key(&self, word: &[OpId]) -> Monomial {
        let fwd = self.canon_unchecked(word);
        if fwd.is_zero {
            return fwd;
        }
        let rev: Word = word.iter().rev().copied().collect();
        fwd.min(self.canon_unchecked(&rev))
    }

    /// Moment key of `reverse(row) · col`.
    pub fn cell_key(&self, row: &[OpId], col: &[OpId]) -> Monomial {
        let word: Word = row.iter().rev().chain(col.iter()).copied().collect();
        self.moment_key(&word)
    }

    /// Splits a word into subwords acting on pairwise disjoint source copies.
    /// Components are returned as raw subwords in order of first letter.
    pub fn components(&self, word: &[OpId]) -> Vec<Word> {
        let len = word.len();
        let mut parent: Vec<usize> = (0..len).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for i in 0..len {
            for j in i + 1..len {
                if self.inflation.shares_system(word[i], word[j]) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<(usize, Word)> = Vec::new();
        for i in 0..len {
            let r = find(&mut parent, i);
            match groups.iter_mut().find(|(root, _)| *root == r) {
                Some((_, w)) => w.push(word[i]),
                None => groups.push((r, smallvec::smallvec![word[i]])),
            }
        }
        groups.into_iter().map(|(_, w)| w).collect()
    }

    /// Connected components over shared source copies, each canonicalized
    /// on its own. The identity has no components.
    pub fn factorize(&self, m: &Monomial) -> Result<Vec<Monomial>> {
        if m.is_zero {
            return Err(Error::ZeroMonomial);
        }
        self.check(&m.word)?;
        let mut parts: Vec<Monomial> = self
            .components(&m.word)
            .iter()
            .map(|w| self.moment_key(w))
            .collect();
        parts.sort();
        Ok(parts)
    }

    /// Same-party operators pairwise commute.
    pub fn is_physical(&self, m: &Monomial) -> bool {
        if m.is_zero {
            return false;
        }
        let w = &m.word;
        (0..w.len()).all(|i| {
            (i + 1..w.len()).all(|j| {
                self.inflation.operator(w[i]).party != self.inflation.operator(w[j]).party
                    || self.commutes(w[i], w[j])
            })
        })
    }

    /// `m = reverse(u) · v · u` with `u` non-empty and `v` physical.
    pub fn is_sandwich(&self, m: &Monomial) -> bool {
        if m.is_zero {
            return false;
        }
        let w = &m.word;
        let len = w.len();
        (1..=len / 2).any(|k| {
            (0..k).all(|i| w[i] == w[len - 1 - i])
                && self.is_physical(&Monomial {
                    word: w[k..len - k].into(),
                    is_zero: false,
                })
        })
    }

    /// Physical, or sandwich of a physical word.
    pub fn is_nonnegative(&self, m: &Monomial) -> bool {
        self.is_physical(m) || self.is_sandwich(m)
    }

    pub fn knowability(&self, m: &Monomial) -> Result<Knowability> {
        if m.is_zero {
            return Err(Error::ZeroMonomial);
        }
        if let Some(label) = self.inflation.knowable_word(&m.word) {
            return Ok(Knowability::Knowable(label));
        }
        let comps = self.components(&m.word);
        let mut known = Vec::new();
        let mut rest: Word = Word::new();
        for c in &comps {
            match self.inflation.knowable_word(c) {
                Some(label) => known.push(label),
                None => rest.extend_from_slice(c),
            }
        }
        if known.is_empty() {
            return Ok(Knowability::Unknowable);
        }
        known.sort();
        if rest.is_empty() {
            Ok(Knowability::Product(known))
        } else {
            Ok(Knowability::Semi {
                known,
                rest: self.moment_key(&rest),
            })
        }
    }

    pub fn display(&self, m: &Monomial) -> String {
        if m.is_zero {
            "0".into()
        } else if m.word.is_empty() {
            "1".into()
        } else {
            m.word
                .iter()
                .map(|&op| self.inflation.display_op(op))
                .collect::<Vec<_>>()
                .join("*")
        }
    }

    /// Parses `1`, `0` or a `*`-separated operator product.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let text = text.trim();
        if text == "1" {
            return Ok(Word::new());
        }
        text.split('*')
            .map(|tok| self.inflation.parse_op(tok))
            .collect()
    }

    /// All distinct normal forms of words of length up to `max_len`,
    /// sorted by length then lexicographically. No orbit identification.
    pub fn words_up_to(&self, letters: &[OpId], max_len: usize) -> Vec<Monomial> {
        let mut all: BTreeSet<Monomial> = BTreeSet::new();
        all.insert(Monomial::identity());
        let mut layer = vec![Monomial::identity()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for m in &layer {
                for &op in letters {
                    let mut w = m.word.clone();
                    w.push(op);
                    let nf = self.normal_form(&w);
                    if !nf.is_zero && nf.len() == w.len() && all.insert(nf.clone()) {
                        next.push(nf);
                    }
                }
            }
            layer = next;
        }
        all.into_iter().collect()
    }
}

enum Reduction {
    Zero,
    Merge(usize),
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero {
            write!(f, "0")
        } else if self.word.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{:?}", self.word.as_slice())
        }
    }
}
