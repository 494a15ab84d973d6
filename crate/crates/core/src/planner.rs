//! Dependency extraction from placeholders and logical reordering.
//!
//! Reordering is a topological sort with foundation-first tie-breaking: among
//! simultaneously available sub-questions, the one with the lowest cognitive
//! load goes first, then the lowest original index. Both rules cost no extra
//! provider calls since loads were computed during decomposition.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::types::{
    find_cycle, placeholder_indices, ChainStep, DepEdge, LogicalChain, Question, SubQuestion,
};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("sub-question {index} references #{placeholder}, which does not exist")]
    DanglingPlaceholder { index: usize, placeholder: usize },

    #[error("dependency cycle: {nodes:?}")]
    Cycle { nodes: Vec<usize> },
}

/// Dependency graph over sub-question indices. An edge `from -> to` means
/// `to`'s text references `#from`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<usize>,
    pub edges: BTreeSet<DepEdge>,
}

impl DependencyGraph {
    pub fn dependencies_of(&self, index: usize) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|e| e.to == index)
            .map(|e| e.from)
            .collect()
    }
}

/// Build the dependency graph from placeholder references.
pub fn extract_dependencies(subs: &[SubQuestion]) -> Result<DependencyGraph, PlanError> {
    let nodes: BTreeSet<usize> = subs.iter().map(|s| s.index).collect();
    let mut edges = BTreeSet::new();
    for sub in subs {
        for reference in placeholder_indices(&sub.text) {
            if !nodes.contains(&reference) {
                return Err(PlanError::DanglingPlaceholder {
                    index: sub.index,
                    placeholder: reference,
                });
            }
            if reference != sub.index {
                edges.insert(DepEdge {
                    from: reference,
                    to: sub.index,
                });
            }
        }
    }
    Ok(DependencyGraph { nodes, edges })
}

/// Topologically order the sub-questions into a logical chain.
///
/// Among ready nodes the lowest load total goes first, ties broken by index.
/// Cyclic input yields an error naming one concrete cycle.
pub fn reorder(
    question: &Question,
    graph: &DependencyGraph,
    subs: &[SubQuestion],
) -> Result<LogicalChain, PlanError> {
    let by_index: BTreeMap<usize, &SubQuestion> = subs.iter().map(|s| (s.index, s)).collect();

    let mut indegree: BTreeMap<usize, usize> = graph.nodes.iter().map(|&n| (n, 0)).collect();
    let mut successors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for edge in &graph.edges {
        *indegree.entry(edge.to).or_insert(0) += 1;
        successors.entry(edge.from).or_default().push(edge.to);
    }

    // Ready set ordered by (load, index); BTreeSet keyed on a total order.
    let sort_key = |index: usize| -> (u64, usize) {
        let load = by_index
            .get(&index)
            .map(|s| s.load.total)
            .unwrap_or_default();
        (load.to_bits(), index) // loads are finite and non-negative
    };
    let mut ready: BTreeSet<(u64, usize)> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| sort_key(n))
        .collect();

    let mut order = Vec::with_capacity(graph.nodes.len());
    while let Some(&(key, index)) = ready.iter().next() {
        ready.remove(&(key, index));
        order.push(index);
        for &next in successors.get(&index).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(&next).expect("known node");
            *d -= 1;
            if *d == 0 {
                ready.insert(sort_key(next));
            }
        }
    }

    if order.len() != graph.nodes.len() {
        let cycle = find_cycle(&graph.edges, graph.nodes.iter().copied())
            .unwrap_or_default();
        return Err(PlanError::Cycle { nodes: cycle });
    }

    let steps = order
        .into_iter()
        .filter_map(|i| by_index.get(&i).map(|s| ChainStep::pending((*s).clone())))
        .collect();
    Ok(LogicalChain {
        question: question.clone(),
        steps,
        order_proof: graph.edges.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{validate_chain, CognitiveLoadReport};

    fn sub(index: usize, text: &str) -> SubQuestion {
        SubQuestion::new(index, text, CognitiveLoadReport::zero())
    }

    fn sub_with_load(index: usize, text: &str, load: f64) -> SubQuestion {
        SubQuestion::new(
            index,
            text,
            CognitiveLoadReport::from_components(load, 0.0, 0.0),
        )
    }

    #[test]
    fn scanderbeg_chain_extracts_linear_edges() {
        let subs = vec![
            sub(1, "who is the composer of the Scanderbeg?"),
            sub(2, "what is the birth city of #1?"),
            sub(3, "what is the name of the famous bridge in #2?"),
        ];
        let graph = extract_dependencies(&subs).unwrap();
        assert_eq!(graph.nodes, BTreeSet::from([1, 2, 3]));
        assert_eq!(
            graph.edges,
            BTreeSet::from([DepEdge { from: 1, to: 2 }, DepEdge { from: 2, to: 3 }])
        );
    }

    #[test]
    fn placeholder_free_subs_give_edgeless_graph() {
        let subs = vec![sub(1, "alpha"), sub(2, "beta"), sub(3, "gamma")];
        let graph = extract_dependencies(&subs).unwrap();
        assert!(graph.edges.is_empty());
        assert_eq!(graph.nodes.len(), 3);
    }

    #[test]
    fn fan_in_produces_two_edges() {
        let subs = vec![sub(1, "a"), sub(2, "b"), sub(3, "join #1 with #2")];
        let graph = extract_dependencies(&subs).unwrap();
        assert_eq!(
            graph.edges,
            BTreeSet::from([DepEdge { from: 1, to: 3 }, DepEdge { from: 2, to: 3 }])
        );
        assert_eq!(graph.dependencies_of(3), BTreeSet::from([1, 2]));
    }

    #[test]
    fn dangling_placeholder_names_the_offender() {
        let subs = vec![sub(1, "a"), sub(2, "uses #5")];
        match extract_dependencies(&subs) {
            Err(PlanError::DanglingPlaceholder { index, placeholder }) => {
                assert_eq!((index, placeholder), (2, 5));
            }
            other => panic!("expected dangling placeholder, got {other:?}"),
        }
    }

    #[test]
    fn unique_topological_order_is_respected() {
        let subs = vec![sub(1, "a"), sub(2, "b #1"), sub(3, "c #2")];
        let graph = extract_dependencies(&subs).unwrap();
        let chain = reorder(&Question::user("q", "test"), &graph, &subs).unwrap();
        let order: Vec<usize> = chain.steps.iter().map(|s| s.sub_question.index).collect();
        assert_eq!(order, vec![1, 2, 3]);
        assert!(validate_chain(&chain).is_empty());
    }

    #[test]
    fn ties_resolve_by_load_then_index() {
        let subs = vec![
            sub_with_load(1, "heavy", 0.9),
            sub_with_load(2, "light", 0.2),
            sub_with_load(3, "medium", 0.5),
        ];
        let graph = extract_dependencies(&subs).unwrap();
        let chain = reorder(&Question::user("q", "test"), &graph, &subs).unwrap();
        let order: Vec<usize> = chain.steps.iter().map(|s| s.sub_question.index).collect();
        assert_eq!(order, vec![2, 3, 1]);
    }

    #[test]
    fn equal_loads_fall_back_to_index_order() {
        let subs = vec![sub(3, "c"), sub(1, "a"), sub(2, "b")];
        let graph = extract_dependencies(&subs).unwrap();
        let chain = reorder(&Question::user("q", "test"), &graph, &subs).unwrap();
        let order: Vec<usize> = chain.steps.iter().map(|s| s.sub_question.index).collect();
        assert_eq!(order, vec![1, 2, 3]);
    }

    #[test]
    fn two_cycle_is_reported_with_its_nodes() {
        let subs = vec![sub(1, "a needs #2"), sub(2, "b needs #1")];
        let graph = extract_dependencies(&subs).unwrap();
        match reorder(&Question::user("q", "test"), &graph, &subs) {
            Err(PlanError::Cycle { nodes }) => {
                assert!(nodes.len() >= 3);
                assert_eq!(nodes.first(), nodes.last());
                let set: BTreeSet<usize> = nodes.iter().copied().collect();
                assert_eq!(set, BTreeSet::from([1, 2]));
            }
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn reorder_is_deterministic() {
        let subs = vec![
            sub_with_load(1, "x", 0.4),
            sub_with_load(2, "y #1", 0.4),
            sub_with_load(3, "z", 0.4),
            sub_with_load(4, "w #3 #2", 0.1),
        ];
        let graph = extract_dependencies(&subs).unwrap();
        let q = Question::user("q", "test");
        let one = reorder(&q, &graph, &subs).unwrap();
        let two = reorder(&q, &graph, &subs).unwrap();
        assert_eq!(one, two);
    }
}
