#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ppi_core::network::{Edge, SpilloverNetwork};
use ppi_core::panel::{CountryInfo, Indicator, IndicatorPanel, PanelMeta, PanelParts, Role};
use ppi_core::seed::rng_from_seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

pub fn laplace<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Random directed network: each unordered pair is linked with probability
/// `p`, in a random direction, with weight drawn from `lo..hi`.
pub fn random_network(n: usize, p: f64, lo: f64, hi: f64, seed: u64) -> SpilloverNetwork {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                let weight = r.random_range(lo..hi);
                let (source, target) = if r.random::<bool>() { (i, j) } else { (j, i) };
                edges.push(Edge { source, target, weight });
            }
        }
    }
    SpilloverNetwork::from_edges(n, &edges).unwrap()
}

pub struct CountrySeries {
    pub code: String,
    /// `levels[year][indicator]`
    pub levels: Vec<Vec<f64>>,
    pub ipc: f64,
    pub budget: f64,
}

/// Panel over the given countries; indicators `I00..` with pillars
/// `1 + i % 3` and the first three indicators carrying the roles.
pub fn build_panel(countries: Vec<CountrySeries>, early: &[&str], reference: Option<&str>) -> IndicatorPanel {
    let n_years = countries[0].levels.len();
    let n_ind = countries[0].levels[0].len();
    let indicators = (0..n_ind)
        .map(|i| Indicator {
            id: format!("I{i:02}"),
            pillar: 1 + (i % 3) as u8,
            direction_adjusted: true,
        })
        .collect();
    let roles = BTreeMap::from([
        (Role::RuleOfLaw, "I00".to_string()),
        (Role::ControlOfCorruption, "I01".to_string()),
        (Role::DiversionOfFunds, "I02".to_string()),
    ]);
    let mut values = Vec::new();
    for c in &countries {
        for i in 0..n_ind {
            for y in 0..n_years {
                values.push(c.levels[y][i]);
            }
        }
    }
    let meta = PanelMeta {
        indicators,
        roles,
        countries: countries
            .iter()
            .map(|c| CountryInfo {
                code: c.code.clone(),
                ipc: c.ipc,
                budget: c.budget,
            })
            .collect(),
        early_members: early.iter().map(|s| s.to_string()).collect(),
        reference: reference.map(str::to_string),
    };
    IndicatorPanel::new(PanelParts {
        meta,
        years: (0..n_years as i32).map(|y| 2006 + y).collect(),
        values,
    })
    .unwrap()
}

/// Bounded random walk of `n_years` × `n` levels.
pub fn random_walk<R: Rng>(rng: &mut R, n: usize, n_years: usize, step_lo: f64, step_hi: f64) -> Vec<Vec<f64>> {
    let mut rows = vec![(0..n).map(|_| rng.random_range(0.1..0.7)).collect::<Vec<f64>>()];
    for _ in 1..n_years {
        let prev = rows.last().unwrap();
        rows.push(prev.iter().map(|v| (v + rng.random_range(step_lo..step_hi)).clamp(0.0, 1.0)).collect());
    }
    rows
}

/// Replays a vertex-by-vertex insertion into triangular faces, starting
/// from a K4. Succeeding proves the graph is a planar triangulation.
pub fn planar_insertion_certificate(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut removed = Vec::new();
    while alive.len() > 4 {
        let Some(&v) = alive.iter().find(|&&v| {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            nb.len() == 3 && adj[nb[0]].contains(&nb[1]) && adj[nb[0]].contains(&nb[2]) && adj[nb[1]].contains(&nb[2])
        }) else {
            return false;
        };
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &nb {
            adj[u].remove(&v);
        }
        adj[v].clear();
        alive.remove(&v);
        removed.push((v, [nb[0], nb[1], nb[2]]));
    }
    let core: Vec<usize> = alive.iter().copied().collect();
    if core.len() == 4 && !core.iter().all(|&v| adj[v].len() == 3) {
        return false;
    }
    let mut faces: BTreeSet<[usize; 3]> = BTreeSet::new();
    if core.len() == 4 {
        for skip in 0..4 {
            let mut f: Vec<usize> = core.iter().copied().enumerate().filter(|(k, _)| *k != skip).map(|(_, v)| v).collect();
            f.sort_unstable();
            faces.insert([f[0], f[1], f[2]]);
        }
    }
    let sorted = |mut f: [usize; 3]| {
        f.sort_unstable();
        f
    };
    for (v, tri) in removed.into_iter().rev() {
        let face = sorted(tri);
        if !faces.remove(&face) {
            return false;
        }
        faces.insert(sorted([face[0], face[1], v]));
        faces.insert(sorted([face[1], face[2], v]));
        faces.insert(sorted([face[0], face[2], v]));
    }
    true
}

pub fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let mut w = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(-1.0..1.0);
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    w
}

pub fn norm_edges(edges: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect()
}

/// Best 9-edge triangulation of 5 vertices that contains the best K4, by
/// exhaustive enumeration.
pub fn five_vertex_oracle(w: &[Vec<f64>]) -> BTreeSet<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
    let score = |set: &[(usize, usize)]| set.iter().map(|&(a, b)| w[a][b].abs()).sum::<f64>();
    let best_k4 = (0..5)
        .map(|out| all.iter().copied().filter(|&(a, b)| a != out && b != out).collect::<Vec<_>>())
        .max_by(|a, b| score(a).total_cmp(&score(b)))
        .unwrap();
    all.iter()
        .map(|drop| all.iter().copied().filter(|e| e != drop).collect::<Vec<_>>())
        .filter(|g| best_k4.iter().all(|e| g.contains(e)))
        .max_by(|a, b| score(a).total_cmp(&score(b)))
        .unwrap()
        .into_iter()
        .collect()
}

/// First, middle and last year for a country whose gaps are small and
/// positive, with low governance levels on the role indicators.
pub fn converging_country<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let mut first: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.7)).collect();
    first[0] = 0.05;
    first[1] = 0.05;
    let last: Vec<f64> = first.iter().map(|v| v + rng.random_range(0.011..0.05)).collect();
    let middle = first.iter().zip(&last).map(|(a, b)| (a + b) / 2.0).collect();
    vec![first, middle, last]
}
