//! Configurations on finite tori and bounded regions, site sets, and window measures.
//!
//! Patterns on a window are indexed lexicographically over the sorted sites,
//! most significant site first, in base `|S|`. Every module uses this order.

use serde::{Deserialize, Serialize};

use crate::error::{check_distribution, PcaError, Result};

pub mod io;

/// A lattice site: integer coordinates, one per dimension.
pub type Site = Vec<i64>;

/// Row sum tolerance for probability vectors.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    group_table: Option<Vec<u8>>,
    names: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size > 256 {
            return Err(PcaError::InvalidParams(format!(
                "alphabet size must be in 1..=256, got {size}"
            )));
        }
        Ok(Alphabet {
            size,
            group_table: None,
            names: None,
        })
    }

    pub fn binary() -> Self {
        Alphabet::cyclic(2).expect("Z_2 is a valid group")
    }

    /// The cyclic group Z_n.
    pub fn cyclic(n: usize) -> Result<Self> {
        let mut a = Alphabet::new(n)?;
        let table = (0..n)
            .flat_map(|x| (0..n).map(move |y| ((x + y) % n) as u8))
            .collect();
        a.group_table = Some(table);
        Ok(a)
    }

    /// Attaches an addition table (row-major, `table[a * n + b] = a + b`).
    /// The table must define a finite Abelian group.
    pub fn with_group_table(mut self, table: Vec<u8>) -> Result<Self> {
        let n = self.size;
        if table.len() != n * n {
            return Err(PcaError::InvalidParams(format!(
                "group table has {} entries, expected {}",
                table.len(),
                n * n
            )));
        }
        let op = |a: usize, b: usize| table[a * n + b] as usize;
        if table.iter().any(|&c| c as usize >= n) {
            return Err(PcaError::InvalidParams("group table not closed".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| op(e, a) == a && op(a, e) == a))
            .ok_or_else(|| PcaError::InvalidParams("group table has no identity".into()))?;
        for a in 0..n {
            if !(0..n).any(|b| op(a, b) == identity) {
                return Err(PcaError::InvalidParams(format!("symbol {a} has no inverse")));
            }
            for b in 0..n {
                if op(a, b) != op(b, a) {
                    return Err(PcaError::InvalidParams("group table is not commutative".into()));
                }
                for c in 0..n {
                    if op(op(a, b), c) != op(a, op(b, c)) {
                        return Err(PcaError::InvalidParams(
                            "group table is not associative".into(),
                        ));
                    }
                }
            }
        }
        self.group_table = Some(table);
        Ok(self)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.size {
            return Err(PcaError::InvalidParams(format!(
                "{} symbol names for an alphabet of size {}",
                names.len(),
                self.size
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn has_group(&self) -> bool {
        self.group_table.is_some()
    }

    pub fn add(&self, a: u8, b: u8) -> Option<u8> {
        self.group_table
            .as_ref()
            .map(|t| t[a as usize * self.size + b as usize])
    }

    /// `b - a` in the group, if one is attached.
    pub fn sub(&self, b: u8, a: u8) -> Option<u8> {
        let t = self.group_table.as_ref()?;
        (0..self.size as u8).find(|&c| t[a as usize * self.size + c as usize] == b)
    }

    /// Sizes agree; group tables and names are not compared.
    pub fn compatible(&self, other: &Alphabet) -> Result<()> {
        if self.size != other.size {
            return Err(PcaError::AlphabetMismatch {
                expected: self.size,
                found: other.size,
            });
        }
        Ok(())
    }
}

/// A finite set of sites, kept sorted and duplicate-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteSet {
    dim: usize,
    sites: Vec<Site>,
}

impl SiteSet {
    pub fn new(dim: usize, mut sites: Vec<Site>) -> Result<Self> {
        if let Some(s) = sites.iter().find(|s| s.len() != dim) {
            return Err(PcaError::InvalidParams(format!(
                "site {s:?} does not have dimension {dim}"
            )));
        }
        sites.sort();
        sites.dedup();
        Ok(SiteSet { dim, sites })
    }

    pub fn empty(dim: usize) -> Self {
        SiteSet {
            dim,
            sites: Vec::new(),
        }
    }

    /// One-dimensional sites from plain integers.
    pub fn from_1d(points: &[i64]) -> Self {
        SiteSet::new(1, points.iter().map(|&p| vec![p]).collect()).expect("1d sites")
    }

    /// The one-dimensional interval `lo..=hi`.
    pub fn interval(lo: i64, hi: i64) -> Self {
        SiteSet {
            dim: 1,
            sites: (lo..=hi).map(|i| vec![i]).collect(),
        }
    }

    /// The centered hypercube `[-r, r]^d`.
    pub fn centered_box(dim: usize, r: i64) -> Self {
        let mut sites = vec![Vec::with_capacity(dim)];
        for _ in 0..dim {
            sites = sites
                .into_iter()
                .flat_map(|s| {
                    (-r..=r).map(move |c| {
                        let mut t = s.clone();
                        t.push(c);
                        t
                    })
                })
                .collect();
        }
        SiteSet { dim, sites }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        self.sites
            .binary_search_by(|s| s.as_slice().cmp(site))
            .is_ok()
    }

    pub fn position(&self, site: &[i64]) -> Option<usize> {
        self.sites.binary_search_by(|s| s.as_slice().cmp(site)).ok()
    }

    /// `{a + n : a in self, n in offsets}`.
    pub fn minkowski_sum(&self, offsets: &[Site]) -> SiteSet {
        let sites = self
            .sites
            .iter()
            .flat_map(|a| offsets.iter().map(move |n| add_sites(a, n)))
            .collect();
        SiteSet::new(self.dim, sites).expect("same dimension")
    }

    pub fn translate(&self, by: &[i64]) -> SiteSet {
        SiteSet {
            dim: self.dim,
            sites: self.sites.iter().map(|s| add_sites(s, by)).collect(),
        }
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        SiteSet::new(self.dim, sites).expect("same dimension")
    }

    /// Per-coordinate minimum and maximum; `None` when empty.
    pub fn bounds(&self) -> Option<(Site, Site)> {
        let first = self.sites.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for s in &self.sites {
            for (i, &c) in s.iter().enumerate() {
                lo[i] = lo[i].min(c);
                hi[i] = hi[i].max(c);
            }
        }
        Some((lo, hi))
    }

    /// True for a one-dimensional set of consecutive integers.
    pub fn is_interval(&self) -> bool {
        self.dim == 1
            && self
                .sites
                .windows(2)
                .all(|w| w[1][0] == w[0][0] + 1)
    }
}

pub(crate) fn add_sites(a: &[i64], b: &[i64]) -> Site {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Finite geometry carrying a configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// Periodic box with the given side lengths; coordinates wrap modulo each side.
    Torus { sides: Vec<usize> },
    /// Box `origin .. origin + sides`; sites outside read the explicit boundary symbol.
    Region {
        origin: Site,
        sides: Vec<usize>,
        boundary: u8,
    },
}

impl Geometry {
    pub fn torus(sides: &[usize]) -> Self {
        Geometry::Torus {
            sides: sides.to_vec(),
        }
    }

    pub fn ring(n: usize) -> Self {
        Geometry::Torus { sides: vec![n] }
    }

    pub fn sides(&self) -> &[usize] {
        match self {
            Geometry::Torus { sides } | Geometry::Region { sides, .. } => sides,
        }
    }

    pub fn dim(&self) -> usize {
        self.sides().len()
    }

    pub fn cell_count(&self) -> usize {
        self.sides().iter().product()
    }

    /// Flat row-major index of a site, or `None` outside a bounded region.
    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        match self {
            Geometry::Torus { sides } => {
                for (c, &l) in site.iter().zip(sides) {
                    idx = idx * l + c.rem_euclid(l as i64) as usize;
                }
            }
            Geometry::Region { origin, sides, .. } => {
                for ((c, o), &l) in site.iter().zip(origin).zip(sides) {
                    let r = c - o;
                    if r < 0 || r >= l as i64 {
                        return None;
                    }
                    idx = idx * l + r as usize;
                }
            }
        }
        Some(idx)
    }

    /// Coordinates of a flat index.
    pub fn coords(&self, mut index: usize) -> Site {
        let sides = self.sides();
        let mut c = vec![0i64; sides.len()];
        for i in (0..sides.len()).rev() {
            c[i] = (index % sides[i]) as i64;
            index /= sides[i];
        }
        if let Geometry::Region { origin, .. } = self {
            for (x, o) in c.iter_mut().zip(origin) {
                *x += o;
            }
        }
        c
    }

    /// Flat neighbor indices for every cell, `m` per cell in offset order.
    /// `usize::MAX` marks a read of the region boundary.
    pub fn stencil(&self, offsets: &[Site]) -> Result<Vec<usize>> {
        let d = self.dim();
        if let Some(o) = offsets.iter().find(|o| o.len() != d) {
            return Err(PcaError::GeometryMismatch(format!(
                "offset {o:?} has dimension {}, lattice has {d}",
                o.len()
            )));
        }
        if let Geometry::Torus { sides } = self {
            for (axis, &side) in sides.iter().enumerate() {
                let lo = offsets.iter().map(|o| o[axis]).min().unwrap_or(0);
                let hi = offsets.iter().map(|o| o[axis]).max().unwrap_or(0);
                let span = (hi - lo + 1) as usize;
                if side < span {
                    return Err(PcaError::GeometryTooSmall { axis, side, span });
                }
            }
        }
        let n = self.cell_count();
        let mut out = Vec::with_capacity(n * offsets.len());
        for k in 0..n {
            let c = self.coords(k);
            for o in offsets {
                let s = add_sites(&c, o);
                out.push(self.index_of(&s).unwrap_or(usize::MAX));
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    alphabet: Alphabet,
    geometry: Geometry,
    cells: Vec<u8>,
}

impl Configuration {
    pub fn new(alphabet: Alphabet, geometry: Geometry, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != geometry.cell_count() {
            return Err(PcaError::GeometryMismatch(format!(
                "{} cells for a geometry of {} cells",
                cells.len(),
                geometry.cell_count()
            )));
        }
        let size = alphabet.size();
        if let Some(&s) = cells.iter().find(|&&s| s as usize >= size) {
            return Err(PcaError::InvalidSymbol {
                symbol: s as usize,
                size,
            });
        }
        if let Geometry::Region { boundary, .. } = &geometry {
            if *boundary as usize >= size {
                return Err(PcaError::InvalidSymbol {
                    symbol: *boundary as usize,
                    size,
                });
            }
        }
        Ok(Configuration {
            alphabet,
            geometry,
            cells,
        })
    }

    pub fn constant(alphabet: Alphabet, geometry: Geometry, symbol: u8) -> Result<Self> {
        let n = geometry.cell_count();
        Configuration::new(alphabet, geometry, vec![symbol; n])
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Symbol at a site. Torus coordinates wrap; bounded regions return the
    /// boundary symbol outside the box.
    pub fn get(&self, site: &[i64]) -> u8 {
        match self.geometry.index_of(site) {
            Some(i) => self.cells[i],
            None => match &self.geometry {
                Geometry::Region { boundary, .. } => *boundary,
                Geometry::Torus { .. } => unreachable!("torus index always exists"),
            },
        }
    }

    pub(crate) fn with_cells(&self, cells: Vec<u8>) -> Configuration {
        debug_assert_eq!(cells.len(), self.cells.len());
        Configuration {
            alphabet: self.alphabet.clone(),
            geometry: self.geometry.clone(),
            cells,
        }
    }

    /// The translate `(σ^a x)_k = x_{k+a}` on a torus.
    pub fn shifted(&self, by: &[i64]) -> Result<Configuration> {
        if !matches!(self.geometry, Geometry::Torus { .. }) {
            return Err(PcaError::GeometryMismatch(
                "shifts are defined on tori only".into(),
            ));
        }
        let cells = (0..self.len())
            .map(|k| self.get(&add_sites(&self.geometry.coords(k), by)))
            .collect();
        Ok(self.with_cells(cells))
    }
}

/// Lexicographic index of `x_A` (most significant site first).
pub fn extract_window(config: &Configuration, window: &SiteSet) -> Result<usize> {
    if window.dim() != config.geometry().dim() {
        return Err(PcaError::WindowMismatch(format!(
            "window of dimension {} on a lattice of dimension {}",
            window.dim(),
            config.geometry().dim()
        )));
    }
    let q = config.alphabet().size();
    let mut idx = 0usize;
    for s in window.iter() {
        let i = config
            .geometry()
            .index_of(s)
            .ok_or_else(|| PcaError::OutsideRegion(s.clone()))?;
        idx = idx * q + config.cells()[i] as usize;
    }
    Ok(idx)
}

/// Decodes a pattern index into symbols, most significant first.
pub fn decode_pattern(mut index: usize, len: usize, q: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for slot in out.iter_mut().rev() {
        *slot = (index % q) as u8;
        index /= q;
    }
    out
}

pub fn encode_pattern(symbols: &[u8], q: usize) -> usize {
    symbols.iter().fold(0, |acc, &s| acc * q + s as usize)
}

/// `q^len`, or `None` on overflow.
pub fn pattern_count(q: usize, len: usize) -> Option<usize> {
    q.checked_pow(u32::try_from(len).ok()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMeasure {
    window: SiteSet,
    alphabet_size: usize,
    probs: Vec<f64>,
}

impl WindowMeasure {
    pub fn new(window: SiteSet, alphabet_size: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = pattern_count(alphabet_size, window.len()).ok_or(
            PcaError::BudgetExceeded {
                what: "window pattern count",
                needed: u128::MAX,
                budget: usize::MAX as u128,
            },
        )?;
        if probs.len() != expected {
            return Err(PcaError::WindowMismatch(format!(
                "{} probabilities for {} patterns",
                probs.len(),
                expected
            )));
        }
        check_distribution(&probs, PROB_TOL, "window measure")?;
        Ok(WindowMeasure {
            window,
            alphabet_size,
            probs,
        })
    }

    /// Product measure with the given per-site marginals (in window order).
    pub fn product(window: SiteSet, marginals: &[Vec<f64>]) -> Result<Self> {
        if marginals.len() != window.len() {
            return Err(PcaError::WindowMismatch(format!(
                "{} marginals for a window of {} sites",
                marginals.len(),
                window.len()
            )));
        }
        let q = marginals.first().map_or(1, Vec::len);
        let mut probs = vec![1.0];
        for m in marginals {
            if m.len() != q {
                return Err(PcaError::InvalidDistribution("ragged marginals".into()));
            }
            check_distribution(m, PROB_TOL, "marginal")?;
            probs = probs
                .iter()
                .flat_map(|p| m.iter().map(move |x| p * x))
                .collect();
        }
        WindowMeasure::new(window, q, probs)
    }

    pub fn window(&self) -> &SiteSet {
        &self.window
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, pattern: usize) -> f64 {
        self.probs[pattern]
    }

    /// Marginal on a sub-window.
    pub fn marginal(&self, sub: &SiteSet) -> Result<WindowMeasure> {
        let pos: Vec<usize> = sub
            .iter()
            .map(|s| {
                self.window
                    .position(s)
                    .ok_or_else(|| PcaError::WindowMismatch(format!("{s:?} not in window")))
            })
            .collect::<Result<_>>()?;
        let q = self.alphabet_size;
        let n = self.window.len();
        let mut out = vec![0.0; pattern_count(q, sub.len()).unwrap_or(0)];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let pat = decode_pattern(idx, n, q);
            let j = pos.iter().fold(0, |acc, &i| acc * q + pat[i] as usize);
            out[j] += p;
        }
        Ok(WindowMeasure {
            window: sub.clone(),
            alphabet_size: q,
            probs: out,
        })
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_nats(&self.probs)
    }
}

pub fn entropy_nats(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Normalized histogram of window patterns over a list of configurations.
pub fn empirical_window_measure(
    samples: &[Configuration],
    window: &SiteSet,
) -> Result<WindowMeasure> {
    let first = samples.first().ok_or(PcaError::EmptySamples)?;
    let q = first.alphabet().size();
    let patterns = pattern_count(q, window.len()).ok_or(PcaError::BudgetExceeded {
        what: "window pattern count",
        needed: u128::MAX,
        budget: usize::MAX as u128,
    })?;
    let mut counts = vec![0u64; patterns];
    for s in samples {
        if s.geometry() != first.geometry() {
            return Err(PcaError::GeometryMismatch(
                "samples do not share a geometry".into(),
            ));
        }
        first.alphabet().compatible(s.alphabet())?;
        counts[extract_window(s, window)?] += 1;
    }
    let n = samples.len() as f64;
    let probs = counts.iter().map(|&c| c as f64 / n).collect();
    WindowMeasure::new(window.clone(), q, probs)
}

/// Measure from raw pattern counts.
pub fn measure_from_counts(window: SiteSet, q: usize, counts: &[u64]) -> Result<WindowMeasure> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(PcaError::EmptySamples);
    }
    let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
    WindowMeasure::new(window, q, probs)
}

/// `(1/2) Σ_u |μ([u]) − ν([u])|`.
pub fn total_variation_window(mu: &WindowMeasure, nu: &WindowMeasure) -> Result<f64> {
    if mu.window != nu.window || mu.alphabet_size != nu.alphabet_size {
        return Err(PcaError::WindowMismatch(
            "measures live on different windows".into(),
        ));
    }
    Ok(total_variation(&mu.probs, &nu.probs))
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn uniform_window_measure(window: &SiteSet, alphabet: &Alphabet) -> Result<WindowMeasure> {
    let q = alphabet.size();
    let n = pattern_count(q, window.len()).ok_or(PcaError::BudgetExceeded {
        what: "window pattern count",
        needed: u128::MAX,
        budget: usize::MAX as u128,
    })?;
    WindowMeasure::new(window.clone(), q, vec![1.0 / n as f64; n])
}
