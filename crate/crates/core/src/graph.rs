//! Directed weighted networks: the substrate the dynamics run on.
//!
//! `adjacency[(n, m)]` is the weight with which node `m` influences node `n`,
//! i.e. the row index receives and the column index sends. On disk an edge is
//! written as `[from, to, weight]`, so `[m, n, w]` lands at `adjacency[(n, m)]`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An immutable directed (or symmetric) weighted network without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    adjacency: DMatrix<f64>,
    directed: bool,
    // incoming[n] = [(m, weight)], sorted by m
    incoming: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    n: usize,
    directed: bool,
    edges: Vec<(usize, usize, f64)>,
}

impl Network {
    /// Validates and wraps an adjacency matrix.
    pub fn from_adjacency(adjacency: DMatrix<f64>, directed: bool) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::Parameter(
                "network must have at least one node".into(),
            ));
        }
        Error::check_len(n, adjacency.ncols())?;
        let mut incoming = vec![Vec::new(); n];
        let mut edges = 0usize;
        for row in 0..n {
            for col in 0..n {
                let w = adjacency[(row, col)];
                if !w.is_finite() {
                    return Err(Error::format(
                        format!("edge [{col}, {row}]"),
                        format!("non-finite weight {w}"),
                    ));
                }
                if w == 0.0 {
                    continue;
                }
                if row == col {
                    return Err(Error::format(
                        format!("edge [{col}, {col}]"),
                        "self-loop not allowed",
                    ));
                }
                incoming[row].push((col, w));
                edges += 1;
            }
        }
        if edges == 0 {
            return Err(Error::Parameter("network has no edges".into()));
        }
        if !directed {
            for row in 0..n {
                for col in (row + 1)..n {
                    if adjacency[(row, col)] != adjacency[(col, row)] {
                        return Err(Error::format(
                            format!("edge [{row}, {col}]"),
                            "undirected network requires a symmetric adjacency",
                        ));
                    }
                }
            }
        }
        Ok(Network {
            adjacency,
            directed,
            incoming,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Senders into `node` with their weights, ordered by sender index.
    pub fn incoming(&self, node: usize) -> &[(usize, f64)] {
        &self.incoming[node]
    }

    pub fn edge_count(&self) -> usize {
        self.incoming.iter().map(Vec::len).sum()
    }

    /// Edges as `(from, to, weight)`, sorted by `(from, to)`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut edges: Vec<_> = self
            .incoming
            .iter()
            .enumerate()
            .flat_map(|(to, senders)| senders.iter().map(move |&(from, w)| (from, to, w)))
            .collect();
        edges.sort_by_key(|&(from, to, _)| (from, to));
        edges
    }
}

/// Directed Erdős–Rényi network with unit weights.
///
/// Every ordered pair `(m, n)` with `m != n` is an edge independently with
/// probability `edge_probability`. If the draw produces no edge at all the
/// seed is incremented and the draw repeated.
pub fn generate_network(n: usize, edge_probability: f64, seed: u64) -> Result<Network> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "node count must be >= 2, got {n}"
        )));
    }
    if !(edge_probability > 0.0 && edge_probability <= 1.0) {
        return Err(Error::Parameter(format!(
            "edge probability must lie in (0, 1], got {edge_probability}"
        )));
    }
    let mut seed = seed;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adjacency = DMatrix::zeros(n, n);
        let mut any = false;
        for row in 0..n {
            for col in 0..n {
                if row != col && rng.random::<f64>() < edge_probability {
                    adjacency[(row, col)] = 1.0;
                    any = true;
                }
            }
        }
        if any {
            return Network::from_adjacency(adjacency, true);
        }
        seed = seed.wrapping_add(1);
    }
}

fn parse_network(text: &str, origin: &str) -> Result<Network> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
    if file.n == 0 {
        return Err(Error::format(origin, "n must be positive"));
    }
    let mut adjacency = DMatrix::zeros(file.n, file.n);
    for (i, &(from, to, w)) in file.edges.iter().enumerate() {
        let record = format!("{origin}: edge #{i} [{from}, {to}, {w}]");
        if from >= file.n || to >= file.n {
            return Err(Error::format(
                record,
                format!("index out of range for n = {}", file.n),
            ));
        }
        if from == to {
            return Err(Error::format(record, "self-loop not allowed"));
        }
        if !w.is_finite() {
            return Err(Error::format(record, "non-finite weight"));
        }
        if adjacency[(to, from)] != 0.0 {
            return Err(Error::format(record, "duplicate edge"));
        }
        if w == 0.0 {
            return Err(Error::format(record, "zero weight edges are not stored"));
        }
        adjacency[(to, from)] = w;
    }
    Network::from_adjacency(adjacency, file.directed).map_err(|e| match e {
        Error::Format { record, message } => Error::format(format!("{origin}: {record}"), message),
        Error::Parameter(message) => Error::format(origin, message),
        other => other,
    })
}

/// Reads a network from the JSON format `{"n", "directed", "edges": [[from, to, w], ...]}`.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text, &path.display().to_string())
}

pub fn network_to_json(net: &Network) -> String {
    let file = NetworkFile {
        n: net.n(),
        directed: net.directed,
        edges: net.edges(),
    };
    serde_json::to_string(&file).expect("network serialization is infallible")
}

pub fn network_from_json(text: &str) -> Result<Network> {
    parse_network(text, "<string>")
}

/// Writes the canonical JSON form; `load_network` is its exact inverse.
pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, network_to_json(net)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_probability_gives_complete_digraph() {
        let net = generate_network(2, 1.0, 7).unwrap();
        assert_eq!(
            net.adjacency(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate_network(5, 0.5, 3).unwrap();
        let b = generate_network(5, 0.5, 3).unwrap();
        assert_eq!(a, b);
        let c = generate_network(30, 0.2, 4).unwrap();
        assert_ne!(c, generate_network(30, 0.2, 5).unwrap());
    }

    #[test]
    fn large_sparse_network() {
        let net = generate_network(500, 0.02, 1).unwrap();
        assert_eq!(net.n(), 500);
        for i in 0..500 {
            assert_eq!(net.adjacency()[(i, i)], 0.0);
        }
        // ~ 500*499*0.02 = 4990 expected edges
        let e = net.edge_count() as f64;
        assert!((4500.0..5500.0).contains(&e), "{e}");
    }

    #[test]
    fn sparse_draw_never_empty() {
        for seed in 0..20 {
            let net = generate_network(3, 1e-6, seed).unwrap();
            assert!(net.edge_count() >= 1);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            generate_network(1, 0.5, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate_network(4, 0.0, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate_network(4, 1.5, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn single_edge_orientation() {
        let net = network_from_json(r#"{"n":2,"directed":true,"edges":[[0,1,1.0]]}"#).unwrap();
        assert_eq!(
            net.adjacency(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])
        );
        assert_eq!(net.incoming(1), &[(0, 1.0)]);
    }

    #[test]
    fn load_rejects_invalid_records() {
        let err = network_from_json(r#"{"n":2,"directed":true,"edges":[[0,0,1.0]]}"#).unwrap_err();
        assert!(err.to_string().contains("self-loop"), "{err}");
        let err = network_from_json(r#"{"n":2,"directed":true,"edges":[[0,5,1.0]]}"#).unwrap_err();
        assert!(err.to_string().contains("edge #0"), "{err}");
        assert!(network_from_json(r#"{"n":2,"directed":true}"#).is_err());
        assert!(network_from_json(r#"{"n":2,"directed":false,"edges":[[0,1,1.0]]}"#).is_err());
        assert!(network_from_json(r#"{"n":2,"directed":true,"edges":[]}"#).is_err());
    }

    #[test]
    fn empty_network_cannot_be_built() {
        assert!(Network::from_adjacency(DMatrix::zeros(3, 3), true).is_err());
    }

    #[test]
    fn json_size_scales_with_edges() {
        let small = generate_network(500, 0.005, 1).unwrap();
        let large = generate_network(500, 0.02, 1).unwrap();
        let per_edge_small = network_to_json(&small).len() as f64 / small.edge_count() as f64;
        let per_edge_large = network_to_json(&large).len() as f64 / large.edge_count() as f64;
        assert!((per_edge_small / per_edge_large - 1.0).abs() < 0.1);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = generate_network(10, 0.3, 5).unwrap();
        save_network(&net, &path).unwrap();
        assert_eq!(load_network(&path).unwrap(), net);
    }
}
