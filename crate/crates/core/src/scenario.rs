//! Causal structures over latent sources and visible parties.
//!
//! A [`CausalScenario`] is a validated DAG. Networks (sources feeding parties,
//! nothing else) are handled directly; visible-to-visible edges are removed by
//! [`CausalScenario::interrupt`], which folds each parent's outcome into the
//! child's setting and yields an equivalent [`NetworkScenario`].

use indexmap::IndexMap;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name given to the source synthesized when no DAG is supplied.
pub const GLOBAL_SOURCE: &str = "global";

/// On-disk scenario description.
///
/// ```json
/// { "dag": {"rho_AB": ["A", "B"], "rho_BC": ["B", "C"], "rho_AC": ["A", "C"]},
///   "outcomes": [2, 2, 2], "settings": [1, 1, 1],
///   "inflation": [2, 2, 2], "order": ["A", "B", "C"] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    #[serde(default)]
    pub dag: IndexMap<String, Vec<String>>,
    pub outcomes: Vec<usize>,
    pub settings: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

impl ScenarioDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validates the document, returning the scenario and the number of
    /// copies of each source (all 1 when `inflation` is absent).
    pub fn build(&self) -> Result<(CausalScenario, Vec<usize>)> {
        let scenario = CausalScenario::new(
            self.dag.clone(),
            self.outcomes.clone(),
            self.settings.clone(),
            self.order.clone(),
        )?;
        let copies = match &self.inflation {
            Some(levels) => {
                if levels.len() != scenario.latent_nodes().len() {
                    return Err(Error::Cardinality(format!(
                        "{} inflation levels given for {} latent nodes",
                        levels.len(),
                        scenario.latent_nodes().len()
                    )));
                }
                if levels.contains(&0) {
                    return Err(Error::Cardinality("inflation levels must be >= 1".into()));
                }
                levels.clone()
            }
            None => vec![1; scenario.latent_nodes().len()],
        };
        Ok((scenario, copies))
    }
}

/// Parses and validates a JSON scenario document.
pub fn parse_scenario(text: &str) -> Result<(CausalScenario, Vec<usize>)> {
    ScenarioDocument::from_json(text)?.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Network,
    VisibleToVisible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalScenario {
    dag: IndexMap<String, Vec<String>>,
    visible: Vec<String>,
    latent: Vec<String>,
    outcomes: Vec<usize>,
    settings: Vec<usize>,
    vis_edges: Vec<(usize, usize)>,
    warnings: Vec<String>,
}

impl CausalScenario {
    /// Validates a causal structure.
    ///
    /// Visible nodes are the entries of `order` when given, otherwise every
    /// node that appears as a child, sorted by name. Latent nodes are the
    /// remaining DAG keys, in insertion order.
    pub fn new(
        dag: IndexMap<String, Vec<String>>,
        outcomes: Vec<usize>,
        settings: Vec<usize>,
        order: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut warnings = Vec::new();
        let mut dag = dag;
        if dag.is_empty() {
            let parties = match order {
                Some(order) => order,
                None => default_party_names(outcomes.len()),
            };
            let msg = "the DAG must be a non-empty map from parents to children; \
                       defaulting to one global source"
                .to_string();
            log::warn!("{msg}");
            warnings.push(msg);
            dag.insert(GLOBAL_SOURCE.to_string(), parties.clone());
            return Self::validate(dag, outcomes, settings, Some(parties), warnings);
        }
        Self::validate(dag, outcomes, settings, order, warnings)
    }

    fn validate(
        dag: IndexMap<String, Vec<String>>,
        outcomes: Vec<usize>,
        settings: Vec<usize>,
        order: Option<Vec<String>>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let mut children: Vec<&String> = dag.values().flatten().collect();
        children.sort();
        children.dedup();

        let visible: Vec<String> = match order {
            Some(order) => {
                for (i, name) in order.iter().enumerate() {
                    if order[..i].contains(name) {
                        return Err(Error::Scenario(format!("party `{name}` listed twice")));
                    }
                    if !dag.contains_key(name) && !children.contains(&name) {
                        return Err(Error::UnknownNode(name.clone()));
                    }
                }
                order
            }
            None => children.iter().map(|s| s.to_string()).collect(),
        };
        let latent: Vec<String> = dag
            .keys()
            .filter(|k| !visible.contains(k))
            .cloned()
            .collect();

        for (parent, kids) in &dag {
            if kids.is_empty() {
                return Err(Error::Scenario(format!("node `{parent}` has no children")));
            }
            for kid in kids {
                if !visible.contains(kid) {
                    let what = if dag.contains_key(kid) || !children.contains(&kid) {
                        "latent node with a parent"
                    } else {
                        "edge into a latent node"
                    };
                    return Err(Error::Unsupported(format!("{what}: `{parent}` -> `{kid}`")));
                }
            }
        }

        let n = visible.len();
        if outcomes.len() != n || settings.len() != n {
            return Err(Error::Cardinality(format!(
                "{n} visible nodes but {} outcome and {} setting cardinalities",
                outcomes.len(),
                settings.len()
            )));
        }
        if outcomes.iter().chain(&settings).any(|&c| c == 0) {
            return Err(Error::Cardinality("cardinalities must be >= 1".into()));
        }

        let index = |name: &str| visible.iter().position(|v| v == name);
        let mut vis_edges = Vec::new();
        for (parent, kids) in &dag {
            if let Some(p) = index(parent) {
                for kid in kids {
                    let c = index(kid).expect("children validated as visible");
                    if !vis_edges.contains(&(p, c)) {
                        vis_edges.push((p, c));
                    }
                }
            }
        }

        let mut graph = DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
        for &(p, c) in &vis_edges {
            graph.add_edge(nodes[p], nodes[c], ());
        }
        if let Err(cycle) = petgraph::algo::toposort(&graph, None) {
            return Err(Error::Cycle(visible[graph[cycle.node_id()]].clone()));
        }

        for (i, name) in visible.iter().enumerate() {
            let has_parent = dag.values().any(|kids| kids.contains(name));
            if !has_parent {
                return Err(Error::Scenario(format!(
                    "party `{name}` has no parents (disconnected)"
                )));
            }
            debug_assert!(i < n);
        }

        Ok(Self {
            dag,
            visible,
            latent,
            outcomes,
            settings,
            vis_edges,
            warnings,
        })
    }

    pub fn dag(&self) -> &IndexMap<String, Vec<String>> {
        &self.dag
    }

    pub fn visible_nodes(&self) -> &[String] {
        &self.visible
    }

    pub fn latent_nodes(&self) -> &[String] {
        &self.latent
    }

    pub fn outcomes_per_party(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn settings_per_party(&self) -> &[usize] {
        &self.settings
    }

    pub fn vis_to_vis_edges(&self) -> &[(usize, usize)] {
        &self.vis_edges
    }

    /// Diagnostics collected during construction.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn kind(&self) -> StructureKind {
        if self.vis_edges.is_empty() {
            StructureKind::Network
        } else {
            StructureKind::VisibleToVisible
        }
    }

    fn latent_parents(&self, party: usize) -> Vec<usize> {
        let name = &self.visible[party];
        self.latent
            .iter()
            .enumerate()
            .filter(|(_, src)| self.dag[*src].contains(name))
            .map(|(i, _)| i)
            .collect()
    }

    /// Replaces every visible-to-visible edge by an extra setting factor on
    /// the child whose size is the parent's outcome cardinality.
    pub fn interrupt(&self) -> NetworkScenario {
        let n = self.visible.len();
        let party_sources: Vec<Vec<usize>> = (0..n).map(|p| self.latent_parents(p)).collect();
        let composition: Vec<SettingComposition> = (0..n)
            .map(|child| {
                let mut parents: Vec<(usize, usize)> = self
                    .vis_edges
                    .iter()
                    .filter(|&&(_, c)| c == child)
                    .map(|&(p, _)| (p, self.outcomes[p]))
                    .collect();
                parents.sort_unstable();
                SettingComposition {
                    native: self.settings[child],
                    parents,
                }
            })
            .collect();
        NetworkScenario {
            sources: self.latent.clone(),
            parties: self.visible.clone(),
            party_sources,
            effective_outcomes: self.outcomes.clone(),
            effective_settings: composition.iter().map(|c| c.size()).collect(),
            native_settings: self.settings.clone(),
            setting_composition: composition,
        }
    }
}

fn default_party_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if n <= 26 {
                char::from(b'A' + i as u8).to_string()
            } else {
                format!("P{i}")
            }
        })
        .collect()
}

/// How an effective setting of an interrupted party decomposes into its
/// native setting and the outcomes of its visible parents.
///
/// Mixed radix: the native setting varies slowest, parents follow in party
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettingComposition {
    pub native: usize,
    /// `(parent party, parent outcome cardinality)`, sorted by party.
    pub parents: Vec<(usize, usize)>,
}

impl SettingComposition {
    pub fn size(&self) -> usize {
        self.native * self.parents.iter().map(|&(_, d)| d).product::<usize>()
    }

    pub fn is_identity(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn compose(&self, native: usize, parent_outcomes: &[usize]) -> usize {
        debug_assert_eq!(parent_outcomes.len(), self.parents.len());
        let mut idx = native;
        for (&(_, d), &o) in self.parents.iter().zip(parent_outcomes) {
            idx = idx * d + o;
        }
        idx
    }

    pub fn decompose(&self, effective: usize) -> (usize, Vec<usize>) {
        let mut rest = effective;
        let mut outs = vec![0; self.parents.len()];
        for (slot, &(_, d)) in outs.iter_mut().zip(&self.parents).rev() {
            *slot = rest % d;
            rest /= d;
        }
        (rest, outs)
    }
}

/// A bipartite source-to-party network, possibly the interruption of a
/// scenario with visible-to-visible edges.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub sources: Vec<String>,
    pub parties: Vec<String>,
    /// Per party, the indices of the sources feeding it, ascending.
    pub party_sources: Vec<Vec<usize>>,
    pub effective_outcomes: Vec<usize>,
    pub effective_settings: Vec<usize>,
    /// Settings of the original scenario.
    pub native_settings: Vec<usize>,
    pub setting_composition: Vec<SettingComposition>,
}

impl NetworkScenario {
    pub fn n_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn is_interrupted(&self) -> bool {
        self.setting_composition.iter().any(|c| !c.is_identity())
    }

    /// Parties fed by a source, ascending.
    pub fn source_children(&self, source: usize) -> Vec<usize> {
        (0..self.n_parties())
            .filter(|&p| self.party_sources[p].contains(&source))
            .collect()
    }

    pub fn party_index(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(entries: &[(&str, &[&str])]) -> IndexMap<String, Vec<String>> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    fn triangle() -> CausalScenario {
        CausalScenario::new(
            dag(&[
                ("rho_AB", &["A", "B"]),
                ("rho_BC", &["B", "C"]),
                ("rho_AC", &["A", "C"]),
            ]),
            vec![2, 2, 2],
            vec![1, 1, 1],
            Some(vec!["A".into(), "B".into(), "C".into()]),
        )
        .unwrap()
    }

    #[test]
    fn triangle_is_a_network() {
        let t = triangle();
        assert_eq!(t.latent_nodes(), ["rho_AB", "rho_BC", "rho_AC"]);
        assert_eq!(t.visible_nodes(), ["A", "B", "C"]);
        assert!(t.vis_to_vis_edges().is_empty());
        assert_eq!(t.kind(), StructureKind::Network);
        let net = t.interrupt();
        assert_eq!(net.party_sources, vec![vec![0, 2], vec![0, 1], vec![1, 2]]);
        assert_eq!(net.effective_settings, vec![1, 1, 1]);
        assert!(!net.is_interrupted());
    }

    #[test]
    fn missing_dag_defaults_to_global_source() {
        let s = CausalScenario::new(IndexMap::new(), vec![2, 2], vec![2, 2], None).unwrap();
        assert_eq!(s.latent_nodes(), [GLOBAL_SOURCE]);
        assert_eq!(s.visible_nodes(), ["A", "B"]);
        assert_eq!(s.warnings().len(), 1);
        let net = s.interrupt();
        assert_eq!(net.party_sources, vec![vec![0], vec![0]]);
    }

    #[test]
    fn instrumental_interruption() {
        let s = CausalScenario::new(
            dag(&[("rhoAB", &["A", "B"]), ("A", &["B"])]),
            vec![2, 2],
            vec![3, 1],
            None,
        )
        .unwrap();
        assert_eq!(s.vis_to_vis_edges(), [(0, 1)]);
        assert_eq!(s.latent_nodes(), ["rhoAB"]);
        let net = s.interrupt();
        assert_eq!(net.effective_settings, vec![3, 2]);
        assert_eq!(net.party_sources, vec![vec![0], vec![0]]);
        assert!(net.is_interrupted());
    }

    #[test]
    fn chain_interruption() {
        let s = CausalScenario::new(
            dag(&[("rho", &["A", "B", "C"]), ("A", &["B"]), ("B", &["C"])]),
            vec![2, 2, 2],
            vec![1, 1, 1],
            None,
        )
        .unwrap();
        assert_eq!(s.interrupt().effective_settings, vec![1, 2, 2]);
    }

    #[test]
    fn default_order_is_lexicographic() {
        let s = CausalScenario::new(
            dag(&[("l1", &["Z", "B"]), ("l2", &["M"])]),
            vec![2, 3, 4],
            vec![1, 1, 1],
            None,
        )
        .unwrap();
        assert_eq!(s.visible_nodes(), ["B", "M", "Z"]);
    }

    #[test]
    fn rejects_cycles() {
        let err = CausalScenario::new(
            dag(&[("rho", &["A", "B"]), ("A", &["B"]), ("B", &["A"])]),
            vec![2, 2],
            vec![1, 1],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn rejects_cardinality_mismatch() {
        let err = CausalScenario::new(
            dag(&[("rho", &["A", "B"])]),
            vec![2],
            vec![1, 1],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cardinality(_)));
    }

    #[test]
    fn rejects_latent_with_parent() {
        let err = CausalScenario::new(
            dag(&[("l1", &["l2"]), ("l2", &["A"])]),
            vec![2],
            vec![1],
            Some(vec!["A".into()]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn rejects_unknown_and_disconnected_nodes() {
        let err = CausalScenario::new(
            dag(&[("rho", &["A"])]),
            vec![2, 2],
            vec![1, 1],
            Some(vec!["A".into(), "Q".into()]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownNode(_)));

        let err = CausalScenario::new(
            dag(&[("rho", &["B"]), ("A", &["B"])]),
            vec![2, 2],
            vec![1, 1],
            Some(vec!["A".into(), "B".into()]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Scenario(_)));
    }

    #[test]
    fn parses_documents() {
        let (s, copies) = parse_scenario(
            r#"{"dag": {"rho_AB": ["A", "B"], "rho_BC": ["B", "C"], "rho_AC": ["A", "C"]},
                "outcomes": [2, 2, 2], "settings": [1, 1, 1], "inflation": [2, 2, 2],
                "order": ["A", "B", "C"]}"#,
        )
        .unwrap();
        assert_eq!(s, triangle());
        assert_eq!(copies, vec![2, 2, 2]);

        let (bell, copies) = parse_scenario(r#"{"outcomes": [2, 2], "settings": [2, 2]}"#).unwrap();
        assert_eq!(bell.latent_nodes(), [GLOBAL_SOURCE]);
        assert_eq!(copies, vec![1]);

        assert!(parse_scenario(
            r#"{"dag": {"rho": ["A"]}, "outcomes": [2], "settings": [1], "inflation": [1, 2]}"#
        )
        .is_err());
    }

    #[test]
    fn composition_round_trip() {
        let c = SettingComposition {
            native: 3,
            parents: vec![(0, 2), (2, 3)],
        };
        assert_eq!(c.size(), 18);
        for eff in 0..c.size() {
            let (native, outs) = c.decompose(eff);
            assert_eq!(c.compose(native, &outs), eff);
        }
        assert_eq!(c.decompose(c.compose(2, &[1, 2])), (2, vec![1, 2]));
    }
}
