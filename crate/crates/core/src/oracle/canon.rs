use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::inflation::{InflationScenario, OpId};
use crate::monomial::{Monomial, Word};

pub const MAX_WORD: usize = 6;
pub const MAX_GROUP: usize = 48;

fn commute(inf: &InflationScenario, commuting: bool, a: OpId, b: OpId) -> bool {
    if commuting || a == b {
        return true;
    }
    let (x, y) = (inf.operator(a), inf.operator(b));
    if x.party != y.party {
        return true;
    }
    if x.copies == y.copies && x.setting == y.setting {
        return true;
    }
    // same party: disjoint copies of every shared source
    x.copies.iter().zip(&y.copies).all(|(p, q)| p != q)
}

fn orthogonal(inf: &InflationScenario, a: OpId, b: OpId) -> bool {
    let (x, y) = (inf.operator(a), inf.operator(b));
    x.party == y.party && x.copies == y.copies && x.setting == y.setting && x.outcome != y.outcome
}

/// Canonical form by exhaustive rewriting: every word reachable through
/// swaps of commuting neighbours and merges of equal neighbours, zero if
/// any of them has orthogonal neighbours, then the least image under the
/// symmetry group.
pub fn oracle_canon(inf: &InflationScenario, commuting: bool, word: &[OpId]) -> Result<Monomial> {
    if word.len() > MAX_WORD {
        return Err(Error::OracleLimit(format!("word length {} > {MAX_WORD}", word.len())));
    }
    let elements = match &inf.group().elements {
        Some(e) if e.len() <= MAX_GROUP => e,
        _ => {
            return Err(Error::OracleLimit(format!(
                "group order {} > {MAX_GROUP}",
                inf.group().order
            )))
        }
    };
    if let Some(&bad) = word.iter().find(|&&op| op as usize >= inf.alphabet().len()) {
        return Err(Error::ForeignOperator(format!("operator id {bad}")));
    }
    let start: Word = word.iter().copied().collect();
    let mut seen: HashSet<Word> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(w) = queue.pop_front() {
        for i in 0..w.len().saturating_sub(1) {
            let (a, b) = (w[i], w[i + 1]);
            if orthogonal(inf, a, b) {
                return Ok(Monomial::zero());
            }
            let mut next = Vec::new();
            if a == b {
                let mut m = w.clone();
                m.remove(i);
                next.push(m);
            } else if commute(inf, commuting, a, b) {
                let mut s = w.clone();
                s.swap(i, i + 1);
                next.push(s);
            }
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    let best = seen
        .iter()
        .flat_map(|w| {
            elements
                .iter()
                .map(move |g| Monomial {
                    word: w.iter().map(|&op| g[op as usize]).collect(),
                    is_zero: false,
                })
        })
        .min()
        .expect("at least the input word");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monomial::tests::triangle;
    use crate::monomial::Algebra;
    use smallvec::smallvec;

    #[test]
    fn idempotent_letter() {
        let inf = triangle(2, 2, 1);
        let m = oracle_canon(&inf, false, &[0, 0]).unwrap();
        assert_eq!(m.word.as_slice(), &[0]);
    }

    #[test]
    fn commuting_mode_sorts() {
        let inf = triangle(2, 2, 1);
        let alg = Algebra::new(inf.clone(), true);
        let w: Word = smallvec![5, 3, 5, 1];
        let m = oracle_canon(&inf, true, &w).unwrap();
        assert_eq!(m, alg.canon(&w).unwrap());
        let mut sorted: Vec<OpId> = m.word.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), m.word.len());
    }

    #[test]
    fn caps() {
        let inf = triangle(2, 2, 1);
        assert!(oracle_canon(&inf, false, &[0; 7]).is_err());
        assert!(oracle_canon(&triangle(3, 2, 1), false, &[0]).is_err());
    }
}
