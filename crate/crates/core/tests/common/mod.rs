//! Generators and brute-force oracles shared by the integration tests.
//! Oracles deliberately avoid the library's own partitioning and lifting.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tabanon::{Cell, CsvOptions, Dataset, GeneralizationHierarchy, Hierarchies};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn read_fixture(name: &str, marker: &str) -> Dataset {
    tabanon::read_table_csv(&fixture(name), &CsvOptions::with_marker(marker)).unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random table over a small alphabet, no hierarchies.
pub fn random_table(
    rng: &mut StdRng,
    max_rows: usize,
    max_attrs: usize,
    max_alphabet: usize,
) -> (Dataset, Vec<String>) {
    let attrs = rng.gen_range(1..=max_attrs);
    let rows = rng.gen_range(1..=max_rows);
    let alphabet: Vec<usize> = (0..attrs).map(|_| rng.gen_range(1..=max_alphabet)).collect();
    let schema: Vec<String> = (0..attrs).map(|a| format!("q{a}")).collect();
    let data = (0..rows)
        .map(|_| {
            alphabet
                .iter()
                .map(|&m| {
                    if rng.gen_bool(0.05) {
                        Cell::Suppressed
                    } else {
                        Cell::value(format!("v{}", rng.gen_range(0..m)))
                    }
                })
                .collect()
        })
        .collect();
    (Dataset::new(schema.clone(), data).unwrap(), schema)
}

/// `parents[level]` maps a level-`level` value to its level-`level + 1` parent.
#[derive(Debug, Clone)]
pub struct KnownHierarchy {
    pub ground: Vec<String>,
    pub parents: Vec<BTreeMap<String, String>>,
    pub rooted: bool,
}

impl KnownHierarchy {
    pub fn height(&self) -> usize {
        self.parents.len()
    }

    pub fn ancestor(&self, cell: &Cell, level: usize) -> Cell {
        match cell {
            Cell::Suppressed => Cell::Suppressed,
            Cell::Value(v) => {
                let mut cur = v.clone();
                for step in &self.parents[..level] {
                    cur = step[&cur].clone();
                }
                Cell::Value(cur)
            }
        }
    }

    pub fn build(&self, attr: &str) -> GeneralizationHierarchy {
        let chains: Vec<Vec<String>> = self
            .ground
            .iter()
            .map(|g| {
                let mut chain = vec![g.clone()];
                for step in &self.parents {
                    let next = step[chain.last().unwrap()].clone();
                    chain.push(next);
                }
                chain
            })
            .collect();
        GeneralizationHierarchy::from_chains(attr, &chains, &BTreeMap::new(), self.rooted).unwrap()
    }
}

pub fn random_hierarchy(rng: &mut StdRng, attr: &str, ground: usize, height: usize) -> KnownHierarchy {
    let ground_values: Vec<String> = (0..ground).map(|i| format!("{attr}_{i}")).collect();
    let rooted = rng.gen_bool(0.5);
    let mut domain = ground_values.clone();
    let mut parents = Vec::new();
    for level in 1..=height {
        let groups = rng.gen_range(1..=domain.len());
        let mut step = BTreeMap::new();
        for v in &domain {
            let parent = if rooted && level == height {
                "*".to_owned()
            } else {
                format!("{attr}^{level}_{}", rng.gen_range(0..groups))
            };
            step.insert(v.clone(), parent);
        }
        domain = step
            .values()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        parents.push(step);
    }
    KnownHierarchy {
        ground: ground_values,
        parents,
        rooted,
    }
}

/// A table whose quasi-identifiers may carry hierarchies with known maps.
#[derive(Debug, Clone)]
pub struct Instance {
    pub data: Dataset,
    pub qid: Vec<String>,
    pub known: BTreeMap<String, KnownHierarchy>,
    pub hierarchies: Hierarchies,
}

impl Instance {
    pub fn lattice_size(&self) -> usize {
        self.known.values().map(|h| h.height() + 1).product()
    }

    pub fn qid_refs(&self) -> Vec<&str> {
        self.qid.iter().map(String::as_str).collect()
    }

    /// Every node of the full-domain lattice, in lexicographic order.
    pub fn lattice(&self) -> Vec<BTreeMap<String, usize>> {
        let mut nodes = vec![BTreeMap::new()];
        for (attr, h) in &self.known {
            nodes = nodes
                .into_iter()
                .flat_map(|n| {
                    (0..=h.height()).map(move |l| {
                        let mut m = n.clone();
                        m.insert(attr.clone(), l);
                        m
                    })
                })
                .collect();
        }
        nodes
    }

    /// Oracle generalization using the known parent maps.
    pub fn generalize(&self, levels: &BTreeMap<String, usize>) -> Vec<Vec<Cell>> {
        let cols: Vec<(usize, Option<(&KnownHierarchy, usize)>)> = self
            .data
            .schema()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                (
                    i,
                    self.known
                        .get(a)
                        .map(|h| (h, levels.get(a).copied().unwrap_or(0))),
                )
            })
            .collect();
        self.data
            .rows()
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|&(i, hl)| match hl {
                        Some((h, l)) => h.ancestor(&r[i], l),
                        None => r[i].clone(),
                    })
                    .collect()
            })
            .collect()
    }
}

/// Random instance: 1..=4 quasi-identifiers (most hierarchical, heights
/// 1..=3, lattice <= 256 nodes) plus one unchecked payload column.
pub fn random_instance(rng: &mut StdRng, max_rows: usize) -> Instance {
    let q = rng.gen_range(1..=4);
    let rows = rng.gen_range(1..=max_rows);
    let mut schema = Vec::new();
    let mut known = BTreeMap::new();
    let mut alphabets = Vec::new();
    for a in 0..q {
        let attr = format!("q{a}");
        let ground = rng.gen_range(1..=6);
        if rng.gen_bool(0.8) {
            let height = rng.gen_range(1..=3);
            known.insert(attr.clone(), random_hierarchy(rng, &attr, ground, height));
        }
        alphabets.push(ground);
        schema.push(attr);
    }
    let qid = schema.clone();
    schema.push("payload".to_owned());
    let data: Vec<Vec<Cell>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Cell> = qid
                .iter()
                .zip(&alphabets)
                .map(|(a, &m)| {
                    if rng.gen_bool(0.03) {
                        Cell::Suppressed
                    } else {
                        Cell::value(format!("{a}_{}", rng.gen_range(0..m)))
                    }
                })
                .collect();
            row.push(Cell::value(format!("p{r}")));
            row
        })
        .collect();
    let hierarchies = known.iter().map(|(a, h)| (a.clone(), h.build(a))).collect();
    Instance {
        data: Dataset::new(schema, data).unwrap(),
        qid,
        known,
        hierarchies,
    }
}

/// Brute-force grouping by linear search over already-seen tuples.
pub fn oracle_partition(rows: &[Vec<Cell>], cols: &[usize]) -> Vec<(Vec<Cell>, Vec<usize>)> {
    let mut groups: Vec<(Vec<Cell>, Vec<usize>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let tuple: Vec<Cell> = cols.iter().map(|&c| row[c].clone()).collect();
        match groups.iter_mut().find(|(t, _)| *t == tuple) {
            Some((_, members)) => members.push(i),
            None => groups.push((tuple, vec![i])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    groups
}

pub fn oracle_min_class(rows: &[Vec<Cell>], cols: &[usize]) -> Option<usize> {
    oracle_partition(rows, cols).iter().map(|(_, m)| m.len()).min()
}

/// Rows sitting in tuple classes smaller than `k`.
pub fn oracle_strict_violators(rows: &[Vec<Cell>], cols: &[usize], k: usize) -> usize {
    oracle_partition(rows, cols)
        .iter()
        .map(|(_, m)| m.len())
        .filter(|&s| s < k)
        .sum()
}

/// Whether some lattice node leaves at most `allowed` strict violators.
pub fn exhaustively_feasible(inst: &Instance, k: usize, allowed: usize) -> bool {
    let cols: Vec<usize> = inst
        .qid
        .iter()
        .map(|a| inst.data.column_index(a).unwrap())
        .collect();
    inst.lattice()
        .iter()
        .any(|node| oracle_strict_violators(&inst.generalize(node), &cols, k) <= allowed)
}

/// Normalized-height precision computed from first principles.
pub fn oracle_precision(
    original_rows: usize,
    published: &[Vec<Cell>],
    schema: &[String],
    heights: &BTreeMap<String, usize>,
    levels: &BTreeMap<String, usize>,
) -> f64 {
    let measured: Vec<(usize, f64)> = schema
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            heights
                .get(a)
                .map(|&h| (i, levels.get(a).copied().unwrap_or(0) as f64 / h as f64))
        })
        .collect();
    if original_rows == 0 {
        return 1.0;
    }
    let m = measured.len() as f64;
    if measured.is_empty() {
        return 1.0 - (original_rows - published.len()) as f64 / original_rows as f64;
    }
    let mut loss = (original_rows - published.len()) as f64 * m;
    for row in published {
        for &(i, r) in &measured {
            loss += if row[i].is_suppressed() { 1.0 } else { r };
        }
    }
    1.0 - loss / (original_rows as f64 * m)
}

/// Random dataset for CSV round-trips; no cell equals `marker`.
pub fn random_csv_dataset(rng: &mut StdRng, marker: &str) -> Dataset {
    const PIECES: [&str; 12] = ["a", "B", ",", "\"", "\n", "\r\n", " ", ";", "*", "é", "x y", "''"];
    let text = |rng: &mut StdRng, min: usize| -> String {
        let len = rng.gen_range(min..=5);
        (0..len).map(|_| PIECES[rng.gen_range(0..PIECES.len())]).collect()
    };
    let attrs = rng.gen_range(1..=5);
    let mut schema = Vec::new();
    while schema.len() < attrs {
        let name = text(rng, 1);
        if name != marker && !schema.contains(&name) {
            schema.push(name);
        }
    }
    let rows = rng.gen_range(0..=15);
    let data = (0..rows)
        .map(|_| {
            (0..attrs)
                .map(|_| loop {
                    if rng.gen_bool(0.15) {
                        break Cell::Suppressed;
                    }
                    let v = text(rng, 0);
                    if v != marker {
                        break Cell::Value(v);
                    }
                })
                .collect()
        })
        .collect();
    Dataset::new(schema, data).unwrap()
}
