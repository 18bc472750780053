use std::sync::Arc;

use faer::Mat;
use itertools::Itertools;
use ndarray::ArrayD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inflation::{InflationScenario, OpId};
use crate::monomial::Monomial;

/// Largest total Hilbert-space dimension of the inflated state.
pub const MAX_DIMENSION: usize = 1 << 16;

/// Real quantum model of an inflation: every source copy holds the same
/// pure state, one subsystem of local dimension `dim` per child, and every
/// copy of a party measures with the same projectors.
#[derive(Debug, Clone)]
pub struct ExplicitRealization {
    inflation: Arc<InflationScenario>,
    dim: usize,
    /// Per source, a unit vector on `dim^children`.
    states: Vec<Vec<f64>>,
    /// `[party][effective setting][outcome]`: row-major projectors on the
    /// party's local space.
    measurements: Vec<Vec<Vec<Vec<f64>>>>,
    /// Global qudits each operator acts on.
    op_qudits: Vec<Vec<usize>>,
    /// Global qudits of the first copy of each party.
    first_copy_qudits: Vec<Vec<usize>>,
    qudits: usize,
}

fn local_dim(dim: usize, k: usize) -> usize {
    dim.pow(k as u32)
}

impl ExplicitRealization {
    pub fn new(
        inflation: Arc<InflationScenario>,
        dim: usize,
        states: Vec<Vec<f64>>,
        measurements: Vec<Vec<Vec<Vec<f64>>>>,
    ) -> Result<Self> {
        let net = inflation.network();
        let spec = inflation.spec();
        let children: Vec<Vec<usize>> = (0..net.n_sources()).map(|s| net.source_children(s)).collect();
        let qudits: usize = (0..net.n_sources())
            .map(|s| spec.copies_per_source[s] * children[s].len())
            .sum();
        let total = (dim as f64).powi(qudits as i32);
        if dim < 1 || total > MAX_DIMENSION as f64 {
            return Err(Error::OracleLimit(format!(
                "Hilbert dimension {dim}^{qudits} exceeds {MAX_DIMENSION}"
            )));
        }
        if states.len() != net.n_sources() {
            return Err(Error::Distribution("one state per source expected".into()));
        }
        for (s, st) in states.iter().enumerate() {
            if st.len() != local_dim(dim, children[s].len()) {
                return Err(Error::Distribution(format!("state of source {s} has wrong size")));
            }
            let norm: f64 = st.iter().map(|x| x * x).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Distribution(format!("state of source {s} has norm² {norm}")));
            }
        }
        if measurements.len() != net.n_parties() {
            return Err(Error::Distribution("one measurement list per party expected".into()));
        }
        for (party, per_setting) in measurements.iter().enumerate() {
            let d = local_dim(dim, net.party_sources[party].len());
            if per_setting.len() != net.effective_settings[party] {
                return Err(Error::Distribution(format!("party {party}: wrong setting count")));
            }
            for projs in per_setting {
                if projs.len() != net.effective_outcomes[party] || projs.iter().any(|p| p.len() != d * d) {
                    return Err(Error::Distribution(format!("party {party}: malformed measurement")));
                }
                check_projective(projs, d)?;
            }
        }
        // global qudit of (source, copy, child position)
        let mut offset = vec![0usize; net.n_sources()];
        let mut acc = 0;
        for s in 0..net.n_sources() {
            offset[s] = acc;
            acc += spec.copies_per_source[s] * children[s].len();
        }
        let qudit = |s: usize, c: usize, party: usize| {
            let pos = children[s].iter().position(|&p| p == party).expect("party is a child");
            offset[s] + c * children[s].len() + pos
        };
        let op_qudits = inflation
            .alphabet()
            .iter()
            .map(|op| {
                net.party_sources[op.party]
                    .iter()
                    .zip(&op.copies)
                    .map(|(&s, &c)| qudit(s, c, op.party))
                    .collect()
            })
            .collect();
        let first_copy_qudits = (0..net.n_parties())
            .map(|p| net.party_sources[p].iter().map(|&s| qudit(s, 0, p)).collect())
            .collect();
        Ok(Self {
            inflation,
            dim,
            states,
            measurements,
            op_qudits,
            first_copy_qudits,
            qudits,
        })
    }

    /// Random real states and random projective measurements.
    pub fn random(inflation: Arc<InflationScenario>, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = inflation.network().clone();
        let states = (0..net.n_sources())
            .map(|s| {
                let d = local_dim(dim, net.source_children(s).len());
                let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= n);
                v
            })
            .collect();
        let measurements = (0..net.n_parties())
            .map(|party| {
                let d = local_dim(dim, net.party_sources[party].len());
                (0..net.effective_settings[party])
                    .map(|_| random_measurement(&mut rng, d, net.effective_outcomes[party]))
                    .collect()
            })
            .collect();
        Self::new(inflation, dim, states, measurements)
    }

    /// Every source in `|0…0⟩`, every measurement in the computational
    /// basis with basis vector `k` giving outcome `min(k, last)`.
    pub fn computational(inflation: Arc<InflationScenario>, dim: usize) -> Result<Self> {
        let net = inflation.network().clone();
        let states = (0..net.n_sources())
            .map(|s| {
                let d = local_dim(dim, net.source_children(s).len());
                let mut v = vec![0.0; d];
                v[0] = 1.0;
                v
            })
            .collect();
        let measurements = (0..net.n_parties())
            .map(|party| {
                let d = local_dim(dim, net.party_sources[party].len());
                let outs = net.effective_outcomes[party];
                let projs: Vec<Vec<f64>> = (0..outs)
                    .map(|o| {
                        let mut p = vec![0.0; d * d];
                        for k in 0..d {
                            if k.min(outs - 1) == o {
                                p[k * d + k] = 1.0;
                            }
                        }
                        p
                    })
                    .collect();
                vec![projs; net.effective_settings[party]]
            })
            .collect();
        Self::new(inflation, dim, states, measurements)
    }

    pub fn inflation(&self) -> &Arc<InflationScenario> {
        &self.inflation
    }

    /// The inflated state: a tensor product over (source, copy).
    pub fn state(&self) -> Vec<f64> {
        let spec = self.inflation.spec();
        let mut psi = vec![1.0];
        for (s, st) in self.states.iter().enumerate() {
            for _ in 0..spec.copies_per_source[s] {
                psi = psi
                    .iter()
                    .flat_map(|a| st.iter().map(move |b| a * b))
                    .collect();
            }
        }
        psi
    }

    /// Applies a local operator on the given global qudits.
    fn apply_local(&self, psi: &[f64], qudits: &[usize], op: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let k = qudits.len();
        let dl = local_dim(d, k);
        let stride = |q: usize| local_dim(d, self.qudits - 1 - q);
        let offsets: Vec<usize> = (0..dl)
            .map(|a| {
                let mut rest = a;
                let mut off = 0;
                for pos in (0..k).rev() {
                    off += (rest % d) * stride(qudits[pos]);
                    rest /= d;
                }
                off
            })
            .collect();
        let mut out = vec![0.0; psi.len()];
        let mut local = vec![0.0; dl];
        for base in 0..psi.len() {
            if qudits.iter().any(|&q| (base / stride(q)) % d != 0) {
                continue;
            }
            for (a, &o) in offsets.iter().enumerate() {
                local[a] = psi[base + o];
            }
            for (r, &o) in offsets.iter().enumerate() {
                out[base + o] = (0..dl).map(|c| op[r * dl + c] * local[c]).sum();
            }
        }
        out
    }

    fn projector(&self, op: OpId) -> &[f64] {
        let o = self.inflation.operator(op);
        &self.measurements[o.party][o.setting][o.outcome]
    }

    /// `w|ψ⟩` for `w = w₁ w₂ … wₖ`.
    pub fn apply_word(&self, psi: &[f64], word: &[OpId]) -> Vec<f64> {
        let mut v = psi.to_vec();
        for &op in word.iter().rev() {
            v = self.apply_local(&v, &self.op_qudits[op as usize], self.projector(op));
        }
        v
    }

    /// `⟨ψ|w|ψ⟩`.
    pub fn moment(&self, word: &[OpId]) -> f64 {
        let psi = self.state();
        let v = self.apply_word(&psi, word);
        psi.iter().zip(&v).map(|(a, b)| a * b).sum()
    }

    /// The distribution of the original scenario, indexed
    /// `[outcomes…, native settings…]`.
    pub fn distribution(&self) -> ArrayD<f64> {
        let net = self.inflation.network();
        let psi = self.state();
        let shape: Vec<usize> = net
            .effective_outcomes
            .iter()
            .chain(&net.native_settings)
            .copied()
            .collect();
        let n = net.n_parties();
        let mut p = ArrayD::zeros(shape);
        let outs = net.effective_outcomes.iter().map(|&d| 0..d).multi_cartesian_product();
        let sets: Vec<Vec<usize>> = net
            .native_settings
            .iter()
            .map(|&d| 0..d)
            .multi_cartesian_product()
            .collect();
        for o in outs {
            for s in &sets {
                let mut v = psi.clone();
                for party in 0..n {
                    let comp = &net.setting_composition[party];
                    let parents: Vec<usize> = comp.parents.iter().map(|&(q, _)| o[q]).collect();
                    let eff = comp.compose(s[party], &parents);
                    let proj = &self.measurements[party][eff][o[party]];
                    v = self.apply_local(&v, &self.first_copy_qudits[party], proj);
                }
                let idx: Vec<usize> = o.iter().chain(s).copied().collect();
                p[idx.as_slice()] = v.iter().map(|x| x * x).sum();
            }
        }
        p
    }
}

fn check_projective(projs: &[Vec<f64>], d: usize) -> Result<()> {
    let mut sum = vec![0.0; d * d];
    for p in projs {
        for r in 0..d {
            for c in 0..d {
                sum[r * d + c] += p[r * d + c];
                let sq: f64 = (0..d).map(|k| p[r * d + k] * p[k * d + c]).sum();
                if (sq - p[r * d + c]).abs() > 1e-9 || (p[r * d + c] - p[c * d + r]).abs() > 1e-12 {
                    return Err(Error::Distribution("measurement is not projective".into()));
                }
            }
        }
    }
    for r in 0..d {
        for c in 0..d {
            let want = if r == c { 1.0 } else { 0.0 };
            if (sum[r * d + c] - want).abs() > 1e-9 {
                return Err(Error::Distribution("projectors do not sum to identity".into()));
            }
        }
    }
    Ok(())
}

/// Random orthonormal basis split among outcomes.
fn random_measurement(rng: &mut ChaCha8Rng, d: usize, outcomes: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut projs = vec![vec![0.0; d * d]; outcomes];
    for b in &basis {
        let o = rng.gen_range(0..outcomes);
        for r in 0..d {
            for c in 0..d {
                projs[o][r * d + c] += b[r] * b[c];
            }
        }
    }
    projs
}

/// Gram matrix `⟨ψ|u† v|ψ⟩` over the given columns.
pub fn oracle_moment_matrix(real: &ExplicitRealization, columns: &[Monomial]) -> Mat<f64> {
    let psi = real.state();
    let vecs: Vec<Vec<f64>> = columns.iter().map(|c| real.apply_word(&psi, &c.word)).collect();
    let n = columns.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
            m.write(i, j, v);
            m.write(j, i, v);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monomial::tests::triangle;
    use crate::monomial::Algebra;
    use crate::relaxation::{build_columns, ColumnKind, Relaxation, RelaxationOptions};
    use faer::Side;
    use std::collections::HashMap;

    #[test]
    fn random_triangle_satisfies_builder_identifications() {
        let inf = triangle(2, 2, 1);
        let real = ExplicitRealization::random(inf.clone(), 2, 7).unwrap();
        let alg = Arc::new(Algebra::new(inf, false));
        let cols = build_columns(&alg, &[ColumnKind::Npa(2)], None).unwrap();
        let mut r = Relaxation::new(alg, cols, RelaxationOptions::default()).unwrap();
        r.set_distribution(&real.distribution(), false).unwrap();
        let m = oracle_moment_matrix(&real, r.columns());
        let ev = m.selfadjoint_eigenvalues(Side::Lower);
        assert!(ev.iter().all(|&e| e > -1e-10));
        let mut value: HashMap<usize, f64> = HashMap::new();
        for i in 0..r.n() {
            for j in 0..r.n() {
                match r.cell(i, j) {
                    None => assert!(m.read(i, j).abs() < 1e-10),
                    Some(id) => {
                        let v = *value.entry(id).or_insert(m.read(i, j));
                        assert!((v - m.read(i, j)).abs() < 1e-10, "cell ({i},{j})");
                        if r.variables()[id].nonnegative {
                            assert!(v > -1e-10);
                        }
                    }
                }
            }
        }
        for (id, v) in r.known_values() {
            assert!((value[id] - v).abs() < 1e-10, "known {}", r.variable_name(*id));
        }
    }

    #[test]
    fn computational_basis_is_deterministic() {
        let inf = triangle(2, 2, 1);
        let real = ExplicitRealization::computational(inf, 2).unwrap();
        let p = real.distribution();
        assert!((p[[0, 0, 0, 0, 0, 0]] - 1.0).abs() < 1e-12);
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!((real.moment(&[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn copies_are_exchangeable() {
        let inf = triangle(2, 2, 1);
        let real = ExplicitRealization::random(inf.clone(), 2, 3).unwrap();
        let g = inf.group().elements.as_ref().unwrap();
        let word: Vec<OpId> = vec![0, 1, 2, 3];
        let base = real.moment(&word);
        for perm in g {
            let img: Vec<OpId> = word.iter().map(|&o| perm[o as usize]).collect();
            assert!((real.moment(&img) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let inf = triangle(2, 2, 1);
        assert!(ExplicitRealization::random(triangle(3, 2, 1), 4, 0).is_err());
        assert!(ExplicitRealization::new(inf, 2, vec![], vec![]).is_err());
    }
}
