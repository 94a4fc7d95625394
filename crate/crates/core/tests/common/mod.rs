#![allow(dead_code)]

use threshold_lab::MultiGraph;

fn undirected(n: usize, edges: &[(usize, usize)]) -> MultiGraph {
    MultiGraph::from_undirected(n, edges).unwrap()
}

fn directed(n: usize, edges: &[(usize, usize)]) -> MultiGraph {
    let e: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1)).collect();
    MultiGraph::new(n, &e).unwrap()
}

/// Every connected simple graph on 2 to 4 vertices up to isomorphism.
pub fn simple_graphs() -> Vec<(&'static str, MultiGraph)> {
    vec![
        ("edge", undirected(2, &[(0, 1)])),
        ("path3", undirected(3, &[(0, 1), (1, 2)])),
        ("triangle", MultiGraph::cycle(3).unwrap()),
        ("path4", undirected(4, &[(0, 1), (1, 2), (2, 3)])),
        ("star4", undirected(4, &[(0, 1), (0, 2), (0, 3)])),
        ("cycle4", MultiGraph::cycle(4).unwrap()),
        ("paw", undirected(4, &[(0, 1), (1, 2), (2, 0), (2, 3)])),
        ("diamond", undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])),
        ("complete4", MultiGraph::complete(4).unwrap()),
    ]
}

/// Directed Eulerian graphs and multigraphs on at most 4 vertices.
pub fn other_eulerian_graphs() -> Vec<(&'static str, MultiGraph)> {
    vec![
        ("directed3", directed(3, &[(0, 1), (1, 2), (2, 0)])),
        ("directed4", directed(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])),
        ("directed4_chords", directed(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0)])),
        ("double_edge", MultiGraph::new(2, &[(0, 1, 2), (1, 0, 2)]).unwrap()),
        ("torus2x2", MultiGraph::torus(2, 2).unwrap()),
        ("looped_pair", MultiGraph::new(2, &[(0, 1, 1), (1, 0, 1), (0, 0, 1)]).unwrap()),
    ]
}

/// All graphs with at most 4 vertices used by the exhaustive checks.
pub fn small_graphs() -> Vec<(&'static str, MultiGraph)> {
    let mut v = simple_graphs();
    v.extend(other_eulerian_graphs());
    v
}

/// Undirected graphs with at most 6 vertices for the wave checks.
pub fn wave_graphs() -> Vec<(&'static str, MultiGraph)> {
    let mut v: Vec<_> = simple_graphs().into_iter().collect();
    v.extend([
        ("double_edge", MultiGraph::new(2, &[(0, 1, 2), (1, 0, 2)]).unwrap()),
        ("torus2x2", MultiGraph::torus(2, 2).unwrap()),
        ("cycle5", MultiGraph::cycle(5).unwrap()),
        ("cycle6", MultiGraph::cycle(6).unwrap()),
        ("torus3x2", MultiGraph::torus(3, 2).unwrap()),
    ]);
    v
}
