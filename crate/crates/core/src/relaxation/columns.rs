//! Generating sets: the operator words indexing the moment matrix.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::inflation::OpId;
use crate::monomial::{Algebra, Monomial, Word};

/// A named family of generating words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    /// All words of total length at most k.
    Npa(usize),
    /// Products over parties of words with at most k operators per party.
    Local(usize),
    /// Local words whose same-party operators pairwise commute.
    Physical(usize),
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Npa(k) => write!(f, "npa{k}"),
            ColumnKind::Local(k) => write!(f, "local{k}"),
            ColumnKind::Physical(k) => write!(f, "physical{k}"),
        }
    }
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Columns(s.to_string());
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let k: usize = s[split..].parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        match &s[..split] {
            "npa" => Ok(ColumnKind::Npa(k)),
            "local" => Ok(ColumnKind::Local(k)),
            "physical" => Ok(ColumnKind::Physical(k)),
            _ => Err(bad()),
        }
    }
}

/// Parses `npa2`, `physical2` or a union such as `npa2+local1`.
pub fn parse_column_spec(text: &str) -> Result<Vec<ColumnKind>> {
    if text.trim().is_empty() {
        return Err(Error::Columns(text.to_string()));
    }
    text.split(['+', ',']).map(str::parse).collect()
}

/// Builds the union of the given families, deduplicated by normal form,
/// identity first and sorted by length then alphabet order.
pub fn build_columns(
    alg: &Algebra,
    kinds: &[ColumnKind],
    max_monomial_length: Option<usize>,
) -> Result<Vec<Monomial>> {
    if kinds.is_empty() {
        return Err(Error::Columns("empty generating set".into()));
    }
    let mut all: BTreeSet<Monomial> = BTreeSet::new();
    for &kind in kinds {
        let words = match kind {
            ColumnKind::Npa(k) => {
                let letters: Vec<OpId> = (0..alg.inflation().alphabet().len() as OpId).collect();
                alg.words_up_to(&letters, k)
            }
            ColumnKind::Local(k) => local_words(alg, k, false),
            ColumnKind::Physical(k) => local_words(alg, k, true),
        };
        all.extend(words);
    }
    if let Some(max) = max_monomial_length {
        all.retain(|m| m.len() <= max);
    }
    all.insert(Monomial::identity());
    let cols: Vec<Monomial> = all.into_iter().collect();
    log::debug!("built {} columns from {:?}", cols.len(), kinds);
    Ok(cols)
}

fn local_words(alg: &Algebra, k: usize, physical: bool) -> Vec<Monomial> {
    let inflation = alg.inflation();
    let n_parties = inflation.network().n_parties();
    let per_party: Vec<Vec<Monomial>> = (0..n_parties)
        .map(|party| {
            let letters: Vec<OpId> = (0..inflation.alphabet().len() as OpId)
                .filter(|&op| inflation.operator(op).party == party)
                .collect();
            alg.words_up_to(&letters, k)
                .into_iter()
                .filter(|m| !physical || alg.is_physical(m))
                .collect()
        })
        .collect();
    per_party
        .iter()
        .multi_cartesian_product()
        .map(|blocks| {
            let word: Word = blocks.iter().flat_map(|m| m.word.iter().copied()).collect();
            alg.normal_form(&word)
        })
        .filter(|m| !m.is_zero)
        .collect()
}

/// Explicit generating set: every word reduced to normal form, zero words
/// dropped, duplicates merged, identity added.
pub fn columns_from_words(alg: &Algebra, words: &[Word]) -> Result<Vec<Monomial>> {
    let mut all: BTreeSet<Monomial> = BTreeSet::new();
    all.insert(Monomial::identity());
    let mut merged = 0usize;
    for w in words {
        alg.canon(w)?;
        let nf = alg.normal_form(w);
        if nf.is_zero {
            continue;
        }
        if !all.insert(nf) {
            merged += 1;
        }
    }
    if merged > 0 {
        log::info!("merged {merged} duplicate columns");
    }
    Ok(all.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inflation::{InflationScenario, InflationSpec};
    use crate::monomial::tests::triangle;
    use crate::scenario::CausalScenario;
    use indexmap::IndexMap;
    use std::sync::Arc;

    fn bell() -> Algebra {
        let s = CausalScenario::new(IndexMap::new(), vec![2, 2], vec![2, 2], None).unwrap();
        let spec = InflationSpec::new(s.interrupt(), vec![1]).unwrap();
        Algebra::new(Arc::new(InflationScenario::new(spec).unwrap()), false)
    }

    #[test]
    fn parse_specs() {
        assert_eq!(
            parse_column_spec("npa2+local1").unwrap(),
            vec![ColumnKind::Npa(2), ColumnKind::Local(1)]
        );
        assert!(parse_column_spec("npa0").is_err());
        assert!(parse_column_spec("foo2").is_err());
        assert!(parse_column_spec("npa").is_err());
        assert!(parse_column_spec("").is_err());
        assert_eq!("physical3".parse::<ColumnKind>().unwrap().to_string(), "physical3");
    }

    #[test]
    fn bell_npa1_has_five_columns() {
        let alg = bell();
        let cols = build_columns(&alg, &[ColumnKind::Npa(1)], None).unwrap();
        assert_eq!(cols.len(), 5);
        assert!(cols[0].is_identity());
    }

    #[test]
    fn bell_local1_is_products() {
        let alg = bell();
        let cols = build_columns(&alg, &[ColumnKind::Local(1)], None).unwrap();
        assert_eq!(cols.len(), 9);
    }

    #[test]
    fn physical2_triangle_count() {
        let alg = Algebra::new(triangle(2, 2, 1), false);
        let cols = build_columns(&alg, &[ColumnKind::Physical(2)], Some(4)).unwrap();
        assert_eq!(cols.len(), 287);
        assert!(cols.iter().all(|c| alg.is_physical(c)));
    }

    #[test]
    fn unions_deduplicate() {
        let alg = bell();
        let a = build_columns(&alg, &[ColumnKind::Npa(2)], None).unwrap();
        let b = build_columns(&alg, &[ColumnKind::Local(1)], None).unwrap();
        let u = build_columns(&alg, &[ColumnKind::Npa(2), ColumnKind::Local(1)], None).unwrap();
        let set: BTreeSet<_> = a.iter().chain(&b).cloned().collect();
        assert_eq!(u.len(), set.len());
    }

    #[test]
    fn explicit_words() {
        let alg = bell();
        let words: Vec<Word> = vec![
            smallvec::smallvec![0],
            smallvec::smallvec![0, 0],
            smallvec::smallvec![2, 0],
        ];
        let cols = columns_from_words(&alg, &words).unwrap();
        assert_eq!(cols.len(), 3);
        assert!(columns_from_words(&alg, &[smallvec::smallvec![99]]).is_err());
    }
}
