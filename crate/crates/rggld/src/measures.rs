//! Empirical measures of a (coloured) graph and the marginalization map
//! between them.
//!
//! Empirical measures are computed as integer counts divided once by `n`,
//! so identities between them hold exactly on the count level; the
//! `*_counts` functions expose those integers directly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{ColouredGraph, Graph};

/// Colour index into a contiguous colour set `0..k`.
pub type Colour = u32;

/// Sparse nonnegative measure on a countable, ordered index set.
#[derive(Debug, Clone, PartialEq)]
pub struct CountableMeasure<K: Ord + Clone> {
    entries: BTreeMap<K, f64>,
    total: f64,
}

impl<K: Ord + Clone> Default for CountableMeasure<K> {
    fn default() -> Self {
        CountableMeasure {
            entries: BTreeMap::new(),
            total: 0.0,
        }
    }
}

impl<K: Ord + Clone> CountableMeasure<K> {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Collects `(key, mass)` pairs, summing duplicates and dropping exact
    /// zeros. Negative or non-finite masses are rejected.
    pub fn from_entries(entries: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let mut map: BTreeMap<K, f64> = BTreeMap::new();
        for (k, mass) in entries {
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::InvalidMeasure(format!("mass {mass} not in [0,inf)")));
            }
            *map.entry(k).or_insert(0.0) += mass;
        }
        map.retain(|_, &mut m| m > 0.0);
        let total = map.values().sum();
        Ok(CountableMeasure {
            entries: map,
            total,
        })
    }

    /// Integer counts divided once by `denom`.
    pub fn from_counts(counts: &BTreeMap<K, u64>, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::UndefinedMeasure);
        }
        Self::from_entries(
            counts
                .iter()
                .map(|(k, &c)| (k.clone(), c as f64 / denom as f64)),
        )
    }

    pub fn point_mass(key: K) -> Self {
        CountableMeasure {
            entries: BTreeMap::from_iter([(key, 1.0)]),
            total: 1.0,
        }
    }

    pub fn mass(&self, key: &K) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.entries.iter().map(|(k, &m)| (k, m))
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total - 1.0).abs() <= tol
    }

    /// Pointwise scaling by `s >= 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_entries(self.iter().map(|(k, m)| (k.clone(), m * s)))
    }
}

impl CountableMeasure<u32> {
    /// First moment `sum_k k * mass(k)`; finite support keeps it finite.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(&k, m)| k as f64 * m).sum()
    }
}

/// Per-colour neighbour counts of one vertex, zero entries omitted so keys
/// compare structurally.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalityVector(Vec<(Colour, u32)>);

impl LocalityVector {
    pub fn empty() -> Self {
        LocalityVector(Vec::new())
    }

    /// Canonical form: sorted by colour, duplicate colours summed, zero
    /// counts dropped.
    pub fn from_counts(counts: impl IntoIterator<Item = (Colour, u32)>) -> Self {
        let mut map: BTreeMap<Colour, u32> = BTreeMap::new();
        for (c, k) in counts {
            if k > 0 {
                *map.entry(c).or_insert(0) += k;
            }
        }
        LocalityVector(map.into_iter().collect())
    }

    pub fn count(&self, colour: Colour) -> u32 {
        self.0
            .binary_search_by_key(&colour, |&(c, _)| c)
            .map(|idx| self.0[idx].1)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Colour, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total neighbour count, i.e. the degree of the vertex.
    pub fn degree(&self) -> u64 {
        self.0.iter().map(|&(_, k)| k as u64).sum()
    }
}

/// Sparse measure on (colour, locality-vector) pairs.
pub type NeighbourhoodMeasure = CountableMeasure<(Colour, LocalityVector)>;

/// Outcome of comparing `H2(mu)` against a pair measure entrywise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    SubConsistent,
    Inconsistent,
}

impl std::fmt::Display for Consistency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Consistency::Consistent => write!(f, "consistent"),
            Consistency::SubConsistent => write!(f, "sub_consistent"),
            Consistency::Inconsistent => write!(f, "inconsistent"),
        }
    }
}

/// Vertex counts per degree.
pub fn degree_counts(g: &Graph) -> BTreeMap<u32, u64> {
    let mut counts = BTreeMap::new();
    for v in 0..g.n() {
        *counts.entry(g.degree(v) as u32).or_insert(0) += 1;
    }
    counts
}

/// `D(m) = #{v : deg(v) = m} / n`; `<D> = 2|E|/n` exactly on counts.
pub fn degree_distribution(g: &Graph) -> Result<CountableMeasure<u32>> {
    if g.n() == 0 {
        return Err(Error::UndefinedMeasure);
    }
    CountableMeasure::from_counts(&degree_counts(g), g.n() as u64)
}

pub fn colour_counts(cg: &ColouredGraph) -> BTreeMap<Colour, u64> {
    let mut counts = BTreeMap::new();
    for &c in &cg.colours {
        *counts.entry(c).or_insert(0) += 1;
    }
    counts
}

/// Empirical colour measure `L1(a) = #{v : X(v) = a} / n`.
pub fn empirical_colour_measure(cg: &ColouredGraph) -> Result<CountableMeasure<Colour>> {
    if cg.n() == 0 {
        return Err(Error::UndefinedMeasure);
    }
    CountableMeasure::from_counts(&colour_counts(cg), cg.n() as u64)
}

/// Ordered colour-pair counts: each edge contributes to both (a,b) and
/// (b,a); a monochrome edge contributes 2 to (a,a).
pub fn pair_counts(cg: &ColouredGraph) -> BTreeMap<(Colour, Colour), u64> {
    let mut counts = BTreeMap::new();
    for (i, j) in cg.graph.edge_list() {
        let a = cg.colours[i as usize];
        let b = cg.colours[j as usize];
        *counts.entry((a, b)).or_insert(0) += 1;
        *counts.entry((b, a)).or_insert(0) += 1;
    }
    counts
}

/// Empirical pair measure; symmetric with total mass `2|E|/n`.
pub fn empirical_pair_measure(cg: &ColouredGraph) -> Result<CountableMeasure<(Colour, Colour)>> {
    if cg.n() == 0 {
        return Err(Error::UndefinedMeasure);
    }
    CountableMeasure::from_counts(&pair_counts(cg), cg.n() as u64)
}

/// Locality vector of one vertex: neighbour counts per colour.
pub fn locality_vector(cg: &ColouredGraph, v: usize) -> LocalityVector {
    let mut counts: BTreeMap<Colour, u32> = BTreeMap::new();
    for &u in cg.graph.neighbours(v) {
        *counts.entry(cg.colours[u as usize]).or_insert(0) += 1;
    }
    LocalityVector::from_counts(counts)
}

pub fn neighbourhood_counts(cg: &ColouredGraph) -> BTreeMap<(Colour, LocalityVector), u64> {
    let mut counts = BTreeMap::new();
    for v in 0..cg.n() {
        let key = (cg.colours[v], locality_vector(cg, v));
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Empirical neighbourhood measure `M(a, l) = #{v : X(v)=a, L(v)=l} / n`.
pub fn empirical_neighbourhood_measure(cg: &ColouredGraph) -> Result<NeighbourhoodMeasure> {
    if cg.n() == 0 {
        return Err(Error::UndefinedMeasure);
    }
    CountableMeasure::from_counts(&neighbourhood_counts(cg), cg.n() as u64)
}

/// Marginalization map: `H1(mu)(a) = sum_l mu(a,l)` and
/// `H2(mu)(b,a) = sum_l mu(a,l) * l(b)`.
pub fn h_map(
    mu: &NeighbourhoodMeasure,
) -> (CountableMeasure<Colour>, CountableMeasure<(Colour, Colour)>) {
    let mut h1: BTreeMap<Colour, f64> = BTreeMap::new();
    let mut h2: BTreeMap<(Colour, Colour), f64> = BTreeMap::new();
    for ((a, locality), mass) in mu.iter().map(|(k, m)| (k.clone(), m)) {
        *h1.entry(a).or_insert(0.0) += mass;
        for (b, count) in locality.iter() {
            *h2.entry((b, a)).or_insert(0.0) += mass * count as f64;
        }
    }
    (
        CountableMeasure::from_entries(h1).expect("masses nonnegative"),
        CountableMeasure::from_entries(h2).expect("masses nonnegative"),
    )
}

/// Count-level marginalization; exact integers for equality tests against
/// [`colour_counts`] and [`pair_counts`].
pub fn h_map_counts(
    counts: &BTreeMap<(Colour, LocalityVector), u64>,
) -> (BTreeMap<Colour, u64>, BTreeMap<(Colour, Colour), u64>) {
    let mut h1: BTreeMap<Colour, u64> = BTreeMap::new();
    let mut h2: BTreeMap<(Colour, Colour), u64> = BTreeMap::new();
    for ((a, locality), &c) in counts {
        *h1.entry(*a).or_insert(0) += c;
        for (b, k) in locality.iter() {
            *h2.entry((b, *a)).or_insert(0) += c * k as u64;
        }
    }
    (h1, h2)
}

/// Classifies `(varpi, mu)` by comparing `H2(mu)` with `varpi` entrywise.
pub fn consistency_check(
    varpi: &CountableMeasure<(Colour, Colour)>,
    mu: &NeighbourhoodMeasure,
    tol: f64,
) -> Consistency {
    let (_, h2) = h_map(mu);
    let mut keys: Vec<(Colour, Colour)> = h2.iter().map(|(k, _)| *k).collect();
    keys.extend(varpi.iter().map(|(k, _)| *k));
    keys.sort_unstable();
    keys.dedup();

    let mut equal_everywhere = true;
    for key in &keys {
        let h = h2.mass(key);
        let w = varpi.mass(key);
        if h > w + tol {
            return Consistency::Inconsistent;
        }
        if (h - w).abs() > tol {
            equal_everywhere = false;
        }
    }
    if equal_everywhere {
        Consistency::Consistent
    } else {
        Consistency::SubConsistent
    }
}
