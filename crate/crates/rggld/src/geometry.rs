//! Point sampling in the unit cube and radius-rule graph construction.
//!
//! Graphs are built with a uniform cell grid of side `>= r` so each point
//! only checks the 3^d adjacent cells; the result is identical to the
//! all-pairs rule `||W_i - W_j|| <= r`. Ties at distance exactly `r` count
//! as connected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Colour;

/// Hard cap on the total number of grid cells. Shrinking the grid below
/// `floor(1/r)` cells per axis only widens cells, which keeps the
/// adjacent-cell search exact.
const MAX_CELLS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Euclidean distance in `[0,1]^d`; points near the boundary see a
    /// truncated neighbourhood.
    Cube,
    /// Per-coordinate minimum-image distance; removes the O(r) boundary
    /// bias at finite n.
    Torus,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(BoundaryMode::Cube),
            "torus" => Ok(BoundaryMode::Torus),
            other => Err(Error::invalid_parameter(
                "mode",
                format!("expected `cube` or `torus`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryMode::Cube => write!(f, "cube"),
            BoundaryMode::Torus => write!(f, "torus"),
        }
    }
}

/// `n` points in the unit cube of dimension `d`, stored flat with stride `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    d: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Wraps explicit coordinates. Coordinates must lie in `[0,1]`; sampled
    /// clouds always satisfy the half-open `[0,1)`.
    pub fn from_points(d: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension);
        }
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in &points {
            if p.len() != d {
                return Err(Error::invalid_parameter(
                    "points",
                    format!("point has {} coordinates, expected {d}", p.len()),
                ));
            }
            for &x in p {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::invalid_parameter(
                        "points",
                        format!("coordinate {x} outside [0,1]"),
                    ));
                }
            }
            coords.extend_from_slice(p);
        }
        Ok(PointCloud { d, coords })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }
}

/// Undirected simple graph as per-vertex sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds from an edge list; rejects self-loops and out-of-range ends.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(i, j) in edges {
            if i == j {
                return Err(Error::invalid_parameter("edges", "self-loop"));
            }
            if i as usize >= n || j as usize >= n {
                return Err(Error::invalid_parameter("edges", "vertex out of range"));
            }
            g.adjacency[i as usize].push(j);
            g.adjacency[j as usize].push(i);
        }
        for list in &mut g.adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbours(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    /// Sorted list of edges as (min, max) pairs.
    pub fn edge_list(&self) -> Vec<(u32, u32)> {
        let mut edges = Vec::with_capacity(self.num_edges());
        for (i, list) in self.adjacency.iter().enumerate() {
            for &j in list {
                if (i as u32) < j {
                    edges.push((i as u32, j));
                }
            }
        }
        edges
    }

    fn push_edge(&mut self, i: u32, j: u32) {
        self.adjacency[i as usize].push(j);
        self.adjacency[j as usize].push(i);
    }

    fn sort_adjacency(&mut self) {
        for list in &mut self.adjacency {
            list.sort_unstable();
        }
    }
}

/// Graph plus one colour index per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColouredGraph {
    pub graph: Graph,
    pub colours: Vec<Colour>,
}

impl ColouredGraph {
    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

/// Symmetric nonnegative connection kernel over a finite colour set.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidKernel("empty kernel".into()));
        }
        let mut data = Vec::with_capacity(size * size);
        for row in &rows {
            if row.len() != size {
                return Err(Error::InvalidKernel(format!(
                    "row has {} entries, expected {size}",
                    row.len()
                )));
            }
            for &x in row {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidKernel(format!("entry {x} not in [0,inf)")));
                }
                data.push(x);
            }
        }
        let kernel = Kernel { size, data };
        for a in 0..size {
            for b in (a + 1)..size {
                if kernel.at(a as Colour, b as Colour) != kernel.at(b as Colour, a as Colour) {
                    return Err(Error::InvalidKernel(format!(
                        "asymmetric at ({a},{b})"
                    )));
                }
            }
        }
        if kernel.data.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidKernel("identically zero".into()));
        }
        Ok(kernel)
    }

    pub fn constant(size: usize, c: f64) -> Result<Self> {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::InvalidKernel(format!("constant {c} not positive")));
        }
        Kernel::new(vec![vec![c; size]; size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn at(&self, a: Colour, b: Colour) -> f64 {
        self.data[a as usize * self.size + b as usize]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|a| self.data[a * self.size..(a + 1) * self.size].to_vec())
            .collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

/// Scalar intensity `c` or a colour-dependent kernel with colour law `nu`.
#[derive(Debug, Clone, PartialEq)]
pub enum Connectivity {
    Scalar { c: f64 },
    Coloured { kernel: Kernel, nu: Vec<f64> },
}

/// Full parameter set for one simulated ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub d: u32,
    pub n: usize,
    pub connectivity: Connectivity,
    pub mode: BoundaryMode,
    pub seed: u64,
}

impl ModelParams {
    pub fn scalar(d: u32, n: usize, c: f64, mode: BoundaryMode, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension);
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid_parameter("c", format!("{c} not in (0,inf)")));
        }
        Ok(ModelParams {
            d,
            n,
            connectivity: Connectivity::Scalar { c },
            mode,
            seed,
        })
    }

    pub fn coloured(
        d: u32,
        n: usize,
        kernel: Kernel,
        nu: Vec<f64>,
        mode: BoundaryMode,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension);
        }
        if nu.len() != kernel.size() {
            return Err(Error::invalid_parameter(
                "nu",
                format!("{} entries for {} colours", nu.len(), kernel.size()),
            ));
        }
        if nu.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid_parameter("nu", "negative entry"));
        }
        let total: f64 = nu.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid_parameter(
                "nu",
                format!("sums to {total}, expected 1"),
            ));
        }
        Ok(ModelParams {
            d,
            n,
            connectivity: Connectivity::Coloured { kernel, nu },
            mode,
            seed,
        })
    }

    pub fn is_coloured(&self) -> bool {
        matches!(self.connectivity, Connectivity::Coloured { .. })
    }
}

/// Samples `n` i.i.d. uniform points in `[0,1)^d`. Identical `(n, d, seed)`
/// give bitwise-identical clouds.
pub fn sample_points(n: usize, d: u32, seed: u64) -> Result<PointCloud> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    sample_points_with(n, d, &mut rng)
}

/// As [`sample_points`] but drawing from a caller-owned stream.
pub fn sample_points_with(n: usize, d: u32, rng: &mut impl Rng) -> Result<PointCloud> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    let d = d as usize;
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        coords.push(rng.random::<f64>());
    }
    Ok(PointCloud { d, coords })
}

/// Connectivity radius `r = (c/n)^{1/d}`, clamped to at most 1.
pub fn radius_from_c(n: usize, d: u32, c: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid_parameter("c", format!("{c} not in (0,inf)")));
    }
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be >= 1"));
    }
    Ok((c / n as f64).powf(1.0 / d as f64).min(1.0))
}

/// Squared distance between two points under the given boundary mode.
#[inline]
pub fn dist2(a: &[f64], b: &[f64], mode: BoundaryMode) -> f64 {
    let mut acc = 0.0;
    match mode {
        BoundaryMode::Cube => {
            for (x, y) in a.iter().zip(b) {
                let dx = x - y;
                acc += dx * dx;
            }
        }
        BoundaryMode::Torus => {
            for (x, y) in a.iter().zip(b) {
                let dx = (x - y).abs();
                let dx = dx.min(1.0 - dx);
                acc += dx * dx;
            }
        }
    }
    acc
}

struct CellGrid {
    m: usize,
    d: usize,
    cells: Vec<Vec<u32>>,
    point_cell: Vec<Vec<usize>>,
}

impl CellGrid {
    fn build(cloud: &PointCloud, r: f64) -> Self {
        let d = cloud.dim();
        let mut m = (1.0 / r).floor().max(1.0) as usize;
        // keep m^d bounded; wider cells stay correct
        while m > 1 && (m as f64).powi(d as i32) > MAX_CELLS as f64 {
            m = (MAX_CELLS as f64).powf(1.0 / d as f64).floor().max(1.0) as usize;
        }
        let mut cells = vec![Vec::new(); m.pow(d as u32)];
        let mut point_cell = Vec::with_capacity(cloud.len());
        for (i, p) in cloud.iter().enumerate() {
            let coord: Vec<usize> = p
                .iter()
                .map(|&x| ((x * m as f64).floor() as usize).min(m - 1))
                .collect();
            cells[Self::linear(&coord, m)].push(i as u32);
            point_cell.push(coord);
        }
        CellGrid {
            m,
            d,
            cells,
            point_cell,
        }
    }

    fn linear(coord: &[usize], m: usize) -> usize {
        coord.iter().fold(0, |acc, &c| acc * m + c)
    }

    /// Deduplicated neighbour cell indices of the cell holding point `i`,
    /// including its own cell.
    fn neighbour_cells(&self, i: usize, mode: BoundaryMode) -> Vec<usize> {
        let coord = &self.point_cell[i];
        let mut axis_options: Vec<Vec<usize>> = Vec::with_capacity(self.d);
        for &c in coord {
            let mut opts: Vec<usize> = Vec::with_capacity(3);
            for off in [-1i64, 0, 1] {
                let raw = c as i64 + off;
                let idx = match mode {
                    BoundaryMode::Cube => {
                        if raw < 0 || raw >= self.m as i64 {
                            continue;
                        }
                        raw as usize
                    }
                    BoundaryMode::Torus => {
                        (raw.rem_euclid(self.m as i64)) as usize
                    }
                };
                opts.push(idx);
            }
            opts.sort_unstable();
            opts.dedup();
            axis_options.push(opts);
        }
        let mut out = Vec::with_capacity(axis_options.iter().map(|o| o.len()).product());
        let mut stack = vec![0usize; self.d];
        Self::product(&axis_options, 0, &mut stack, self.m, &mut out);
        out
    }

    fn product(
        options: &[Vec<usize>],
        axis: usize,
        stack: &mut Vec<usize>,
        m: usize,
        out: &mut Vec<usize>,
    ) {
        if axis == options.len() {
            out.push(Self::linear(stack, m));
            return;
        }
        for &c in &options[axis] {
            stack[axis] = c;
            Self::product(options, axis + 1, stack, m, out);
        }
    }
}

/// Builds the RGG with edge rule `||W_i - W_j|| <= r` via the cell grid.
pub fn build_rgg(cloud: &PointCloud, r: f64, mode: BoundaryMode) -> Result<Graph> {
    if !(r > 0.0) || r > 1.0 || !r.is_finite() {
        return Err(Error::InvalidRadius(r));
    }
    let thresholds = |_: Colour, _: Colour| r * r;
    Ok(build_with_grid(cloud, r, mode, None, &thresholds))
}

/// Colours each vertex i.i.d. from `nu` and connects within the
/// colour-dependent radius `r(a,b) = (C(a,b)/n)^{1/d}`.
pub fn build_coloured_rgg(
    cloud: &PointCloud,
    params: &ModelParams,
    colour_seed: u64,
) -> Result<ColouredGraph> {
    let mut rng = ChaCha12Rng::seed_from_u64(colour_seed);
    build_coloured_rgg_with(cloud, params, &mut rng)
}

/// As [`build_coloured_rgg`] with a caller-owned colour stream.
pub fn build_coloured_rgg_with(
    cloud: &PointCloud,
    params: &ModelParams,
    rng: &mut impl Rng,
) -> Result<ColouredGraph> {
    let (kernel, nu) = match &params.connectivity {
        Connectivity::Coloured { kernel, nu } => (kernel, nu),
        Connectivity::Scalar { .. } => {
            return Err(Error::invalid_parameter(
                "params",
                "coloured kernel and colour law required",
            ))
        }
    };
    let colours = sample_colours_with(nu, cloud.len(), rng);
    let graph = build_coloured_edges(cloud, kernel, &colours, params.d, params.mode)?;
    Ok(ColouredGraph { graph, colours })
}

/// Connects an already-coloured cloud under the kernel radius rule.
pub fn build_coloured_edges(
    cloud: &PointCloud,
    kernel: &Kernel,
    colours: &[Colour],
    d: u32,
    mode: BoundaryMode,
) -> Result<Graph> {
    if colours.len() != cloud.len() {
        return Err(Error::invalid_parameter(
            "colours",
            "length differs from point count",
        ));
    }
    if colours
        .iter()
        .any(|&c| (c as usize) >= kernel.size())
    {
        return Err(Error::invalid_parameter("colours", "index out of range"));
    }
    let n = cloud.len();
    if n == 0 {
        return Ok(Graph::empty(0));
    }
    if cloud.dim() != d as usize {
        return Err(Error::invalid_parameter("cloud", "dimension mismatch"));
    }
    let k = kernel.size();
    // pairwise squared radii; a zero kernel entry never connects
    let mut r2 = vec![0.0f64; k * k];
    let mut r_max = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            let c = kernel.at(a as Colour, b as Colour);
            if c > 0.0 {
                let r = radius_from_c(n, d, c)?;
                r2[a * k + b] = r * r;
                r_max = r_max.max(r);
            }
        }
    }
    if r_max == 0.0 {
        return Ok(Graph::empty(n));
    }
    let thresholds = move |a: Colour, b: Colour| r2[a as usize * k + b as usize];
    Ok(build_with_grid(cloud, r_max, mode, Some(colours), &thresholds))
}

/// Inverse-CDF sampling of colour indices from the probability vector `nu`.
pub fn sample_colours_with(nu: &[f64], n: usize, rng: &mut impl Rng) -> Vec<Colour> {
    let mut colours = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = nu.len() as Colour - 1;
        for (idx, &p) in nu.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = idx as Colour;
                break;
            }
        }
        colours.push(chosen);
    }
    colours
}

fn build_with_grid(
    cloud: &PointCloud,
    r_max: f64,
    mode: BoundaryMode,
    colours: Option<&[Colour]>,
    threshold2: &dyn Fn(Colour, Colour) -> f64,
) -> Graph {
    let n = cloud.len();
    let mut graph = Graph::empty(n);
    if n == 0 {
        return graph;
    }
    let grid = CellGrid::build(cloud, r_max);
    for i in 0..n {
        let pi = cloud.point(i);
        let ci = colours.map_or(0, |cs| cs[i]);
        for cell in grid.neighbour_cells(i, mode) {
            for &j in &grid.cells[cell] {
                if (j as usize) >= i {
                    continue;
                }
                let cj = colours.map_or(0, |cs| cs[j as usize]);
                let t2 = threshold2(ci, cj);
                if t2 > 0.0 && dist2(pi, cloud.point(j as usize), mode) <= t2 {
                    graph.push_edge(i as u32, j);
                }
            }
        }
    }
    graph.sort_adjacency();
    graph
}

/// All-pairs reference construction. Shares the distance helper with the
/// grid path but none of the neighbour search; used as the oracle in the
/// acceptance suite.
pub fn brute_force_rgg(cloud: &PointCloud, r: f64, mode: BoundaryMode) -> Result<Graph> {
    if !(r > 0.0) || r > 1.0 || !r.is_finite() {
        return Err(Error::InvalidRadius(r));
    }
    let n = cloud.len();
    let mut graph = Graph::empty(n);
    let r2 = r * r;
    for i in 0..n {
        for j in 0..i {
            if dist2(cloud.point(i), cloud.point(j), mode) <= r2 {
                graph.push_edge(i as u32, j as u32);
            }
        }
    }
    graph.sort_adjacency();
    Ok(graph)
}
