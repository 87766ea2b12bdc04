//! Envelope PCA, coupling from the past on `Z^d`, the backward samplers for
//! spreading rules and gliders with walls, and ergodicity certificates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::{build_update_function, RandomField, UpdateFunction};
use crate::error::{PcaError, Result};
use crate::lattice::{add_sites, decode_pattern, pattern_count, Site, SiteSet};
use crate::noise::{
    birth_death_update, compose_pca, is_epsilon_perturbation, NoiseKernel, PcaRule,
};
use crate::rules::{
    is_nilpotent_within, spreading_symbol, LocalRule, Neighborhood, DEFAULT_TABLE_BUDGET,
};

/// `φ̃` over the extended alphabet `S ∪ {?}`, with `?` encoded as `|S|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRule {
    pca: PcaRule,
    /// Row-major `(|S|+1)^m × (|S|+1)`; the last column is the `?` mass.
    table: Vec<f64>,
}

impl EnvelopeRule {
    pub fn pca(&self) -> &PcaRule {
        &self.pca
    }

    pub fn unknown(&self) -> u8 {
        self.pca.alphabet().size() as u8
    }

    pub fn row(&self, pattern: &[u8]) -> &[f64] {
        let e = self.pca.alphabet().size() + 1;
        let i = pattern.iter().fold(0usize, |a, &s| a * e + s as usize);
        &self.table[i * e..(i + 1) * e]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Every completion of a pattern over `S ∪ {?}`, as base-`|S|` pattern indices.
fn completions(pattern: &[u8], q: usize) -> Vec<usize> {
    let mut out = vec![0usize];
    for &a in pattern {
        out = if (a as usize) < q {
            out.iter().map(|&i| i * q + a as usize).collect()
        } else {
            out.iter()
                .flat_map(|&i| (0..q).map(move |b| i * q + b))
                .collect()
        };
    }
    out
}

pub fn envelope_rule(pca: &PcaRule) -> Result<EnvelopeRule> {
    let q = pca.alphabet().size();
    let m = pca.neighborhood().len();
    let rows = pattern_count(q + 1, m)
        .filter(|&r| r.saturating_mul(q.pow(m as u32)) <= DEFAULT_TABLE_BUDGET)
        .ok_or(PcaError::BudgetExceeded {
            what: "envelope table",
            needed: ((q + 1) as u128).saturating_pow(m as u32),
            budget: DEFAULT_TABLE_BUDGET as u128,
        })?;
    let mut table = Vec::with_capacity(rows * (q + 1));
    for i in 0..rows {
        let pat = decode_pattern(i, m, q + 1);
        let comp = completions(&pat, q);
        let mut total = 0.0;
        for b in 0..q {
            let v = comp
                .iter()
                .map(|&c| pca.row(c)[b])
                .fold(f64::INFINITY, f64::min);
            table.push(v);
            total += v;
        }
        table.push((1.0 - total).max(0.0));
    }
    Ok(EnvelopeRule {
        pca: pca.clone(),
        table,
    })
}

/// `p_? = 1 − Σ_b min_a⃗ φ(a⃗)(b)`.
pub fn p_question(pca: &PcaRule) -> f64 {
    let q = pca.alphabet().size();
    let certain: f64 = (0..q)
        .map(|b| {
            (0..pca.rows())
                .map(|p| pca.row(p)[b])
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    (1.0 - certain).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `p_c ≥ 1/|N|` by comparison with a branching process.
    Branching,
    /// `p_c ≥ 2/3` for two consecutive one-dimensional offsets.
    IntervalPair,
    /// `p_c ≥ 1/2` for three consecutive one-dimensional offsets.
    IntervalTriple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ErgodicCertified,
    Inconclusive,
}

/// Branching-process bound for nilpotent rules: ergodic when `ε < 1/(LM)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NilpotentBound {
    pub steps: u32,
    pub constant: u8,
    /// `m_i = |N^i|` for `i = 0..=steps`.
    pub sizes: Vec<usize>,
    pub l: usize,
    pub m: usize,
    pub eps: f64,
    pub eps_bound: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub p_question: f64,
    pub neighborhood_size: usize,
    pub bound: BoundKind,
    pub bound_value: f64,
    pub verdict: Verdict,
    pub nilpotent: Option<NilpotentBound>,
}

/// The strongest rigorous lower bound on the directed percolation threshold.
pub fn percolation_bound(nb: &Neighborhood) -> (BoundKind, f64) {
    let m = nb.len();
    let branching = (BoundKind::Branching, 1.0 / m as f64);
    if nb.dim() == 1 {
        let mut o: Vec<i64> = nb.offsets().iter().map(|x| x[0]).collect();
        o.sort_unstable();
        let consecutive = o.windows(2).all(|w| w[1] == w[0] + 1);
        if consecutive && m == 2 {
            return (BoundKind::IntervalPair, 2.0 / 3.0);
        }
        if consecutive && m == 3 {
            return (BoundKind::IntervalTriple, 0.5);
        }
    }
    branching
}

/// Horizon searched for nilpotency when certifying.
pub const NILPOTENT_SEARCH_HORIZON: u32 = 16;

pub fn certify(pca: &PcaRule) -> Certificate {
    let pq = p_question(pca);
    let (bound, bound_value) = percolation_bound(pca.neighborhood());
    let nilpotent = pca.decomposition().and_then(|(rule, _)| nilpotent_bound(pca, rule));
    Certificate {
        p_question: pq,
        neighborhood_size: pca.neighborhood().len(),
        bound,
        bound_value,
        verdict: if pq < bound_value {
            Verdict::ErgodicCertified
        } else {
            Verdict::Inconclusive
        },
        nilpotent,
    }
}

fn nilpotent_bound(pca: &PcaRule, rule: &LocalRule) -> Option<NilpotentBound> {
    let (steps, constant) =
        is_nilpotent_within(rule, NILPOTENT_SEARCH_HORIZON, DEFAULT_TABLE_BUDGET).ok()??;
    let nb = rule.neighborhood();
    let sizes: Vec<usize> = (0..=steps).map(|i| nb.power(i).len()).collect();
    let n = steps as usize;
    let l = sizes[n - 1] * sizes[n];
    let m: usize = sizes[..n].iter().sum();
    let eps = is_epsilon_perturbation(pca, rule).ok()?;
    let eps_bound = 1.0 / (l * m) as f64;
    Some(NilpotentBound {
        steps,
        constant,
        sizes,
        l,
        m,
        eps,
        eps_bound,
        certified: eps < eps_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub window: SiteSet,
    pub pattern: Vec<u8>,
    pub pattern_index: usize,
    /// Horizon at which the envelope first left no `?` on the window.
    pub coalescence_time: u64,
    pub seed: u64,
}

/// Above this many completions an envelope cell is set to `?` without
/// enumeration; `?` is always a valid upper bound.
const COMPLETION_CAP: usize = 4096;

/// Inclusive axis-aligned box of sites.
#[derive(Clone, Debug)]
struct SiteBox {
    lo: Site,
    hi: Site,
}

impl SiteBox {
    fn len(&self) -> usize {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l + 1) as usize)
            .product()
    }

    fn index(&self, s: &[i64]) -> usize {
        let mut idx = 0usize;
        for ((c, l), h) in s.iter().zip(&self.lo).zip(&self.hi) {
            debug_assert!(c >= l && c <= h);
            idx = idx * (h - l + 1) as usize + (c - l) as usize;
        }
        idx
    }

    fn coords(&self, mut i: usize) -> Site {
        let d = self.lo.len();
        let mut c = vec![0; d];
        for a in (0..d).rev() {
            let w = (self.hi[a] - self.lo[a] + 1) as usize;
            c[a] = self.lo[a] + (i % w) as i64;
            i /= w;
        }
        c
    }
}

/// Envelope run over the light cone of a window.
#[derive(Clone, Debug)]
pub struct EnvelopeRunner {
    uf: UpdateFunction,
    window: SiteSet,
    wlo: Site,
    whi: Site,
    nlo: Site,
    nhi: Site,
}

impl EnvelopeRunner {
    pub fn new(pca: &PcaRule, window: &SiteSet) -> Result<Self> {
        let d = pca.neighborhood().dim();
        if window.dim() != d {
            return Err(PcaError::WindowMismatch(format!(
                "window of dimension {} for a rule of dimension {d}",
                window.dim()
            )));
        }
        let (wlo, whi) = window
            .bounds()
            .ok_or_else(|| PcaError::WindowMismatch("empty window".into()))?;
        let nb = SiteSet::new(d, pca.neighborhood().offsets().to_vec())?;
        let (nlo, nhi) = nb.bounds().expect("nonempty neighborhood");
        Ok(EnvelopeRunner {
            uf: build_update_function(pca),
            window: window.clone(),
            wlo,
            whi,
            nlo,
            nhi,
        })
    }

    pub fn update_function(&self) -> &UpdateFunction {
        &self.uf
    }

    fn region(&self, depth: u64) -> SiteBox {
        let t = depth as i64;
        SiteBox {
            lo: self.wlo.iter().zip(&self.nlo).map(|(a, n)| a + t * n).collect(),
            hi: self.whi.iter().zip(&self.nhi).map(|(a, n)| a + t * n).collect(),
        }
    }

    /// Envelope cell value from its neighbors; `q` encodes `?`.
    fn cell(&self, neighbors: &[u8], u: f64) -> u8 {
        if let Some(b) = self.uf.certain(u) {
            return b;
        }
        let q = self.uf.pca().alphabet().size();
        let unknown = neighbors.iter().filter(|&&a| a as usize >= q).count();
        if unknown == 0 {
            let p = neighbors.iter().fold(0usize, |a, &s| a * q + s as usize);
            return self.uf.sample(p, u);
        }
        if q.checked_pow(unknown as u32).is_none_or(|c| c > COMPLETION_CAP) {
            return q as u8;
        }
        let mut comps = completions(neighbors, q).into_iter();
        let first = self.uf.sample(comps.next().expect("nonempty"), u);
        if comps.all(|c| self.uf.sample(c, u) == first) {
            first
        } else {
            q as u8
        }
    }

    /// Window values at time 0 after starting from all-`?` at time `−horizon`;
    /// `None` marks `?`.
    pub fn run(&self, field: &RandomField, horizon: u64) -> Vec<Option<u8>> {
        let q = self.uf.pca().alphabet().size() as u8;
        let offsets = self.uf.pca().neighborhood().offsets().to_vec();
        let mut prev_box = self.region(horizon);
        let mut prev = vec![q; prev_box.len()];
        let mut nbuf = vec![0u8; offsets.len()];
        for depth in (0..horizon).rev() {
            let t = -(depth as i64);
            let bx = self.region(depth);
            let mut cur = Vec::with_capacity(bx.len());
            for i in 0..bx.len() {
                let k = bx.coords(i);
                for (slot, o) in nbuf.iter_mut().zip(&offsets) {
                    *slot = prev[prev_box.index(&add_sites(&k, o))];
                }
                cur.push(self.cell(&nbuf, field.uniform(t, &k, 0)));
            }
            prev = cur;
            prev_box = bx;
        }
        self.window
            .iter()
            .map(|s| {
                let v = prev[prev_box.index(s)];
                (v < q).then_some(v)
            })
            .collect()
    }
}

/// Coupling from the past with horizons `1, 2, 4, ..` (and finally `t_cap`),
/// reusing the same field at every restart.
pub fn cftp_sample(
    pca: &PcaRule,
    window: &SiteSet,
    field: &RandomField,
    t_cap: u64,
) -> Result<SampleReport> {
    EnvelopeRunner::new(pca, window)?.sample(field, t_cap)
}

impl EnvelopeRunner {
    pub fn sample(&self, field: &RandomField, t_cap: u64) -> Result<SampleReport> {
        let q = self.uf.pca().alphabet().size();
        let mut horizon = 1u64;
        while horizon <= t_cap {
            let vals = self.run(field, horizon);
            if vals.iter().all(Option::is_some) {
                let pattern: Vec<u8> = vals.into_iter().map(|v| v.expect("checked")).collect();
                let pattern_index = pattern.iter().fold(0usize, |a, &s| a * q + s as usize);
                return Ok(SampleReport {
                    window: self.window.clone(),
                    pattern,
                    pattern_index,
                    coalescence_time: horizon,
                    seed: field.seed(),
                });
            }
            if horizon == t_cap {
                break;
            }
            horizon = (horizon * 2).min(t_cap);
        }
        Err(PcaError::NoCoalescence { t_cap })
    }
}

/// Exact time-0 symbol at `site` for a spreading rule with memoryless noise,
/// by exploring the backward dependence tree.
///
/// A node errs when its variable falls in the shared core (mass `ε`); its
/// value is then the replacement symbol that the core assigns. Every other
/// node applies the rule to its children. Since all internal nodes follow
/// the rule, an `α` leaf anywhere in the tree makes the root `α`. A finite
/// tree without `α` leaves is evaluated bottom-up. Once a level exceeds
/// `node_cap` nodes, only the first `node_cap` of them are followed and the
/// search continues for an `α` leaf alone.
pub fn spreading_tree_sample(
    rule: &LocalRule,
    eps: f64,
    q: &[f64],
    site: &[i64],
    field: &RandomField,
    node_cap: usize,
    depth_cap: u64,
) -> Result<u8> {
    SpreadingSampler::new(rule, eps, q)?.sample(site, field, node_cap, depth_cap)
}

#[derive(Clone, Debug)]
pub struct SpreadingSampler {
    rule: LocalRule,
    alpha: u8,
    uf: UpdateFunction,
}

struct TreeLevel {
    sites: Vec<Site>,
    /// Leaf value, or `None` for a node that follows the rule.
    leaf: Vec<Option<u8>>,
    /// Child indices into the next level, per neighbor.
    children: Vec<Vec<usize>>,
}

impl SpreadingSampler {
    pub fn new(rule: &LocalRule, eps: f64, q: &[f64]) -> Result<Self> {
        let alpha = spreading_symbol(rule).ok_or_else(|| {
            PcaError::InvalidParams("rule has no spreading symbol".into())
        })?;
        if !(eps > 0.0) {
            return Err(PcaError::InvalidParams("noise level must be positive".into()));
        }
        let noise = NoiseKernel::memoryless(rule.alphabet().clone(), eps, q.to_vec())?;
        if q[alpha as usize] <= 0.0 {
            return Err(PcaError::InvalidParams(
                "replacement law must charge the spreading symbol".into(),
            ));
        }
        let pca = compose_pca(rule, &noise)?;
        Ok(SpreadingSampler {
            rule: rule.clone(),
            alpha,
            uf: build_update_function(&pca),
        })
    }

    pub fn alpha(&self) -> u8 {
        self.alpha
    }

    /// The PCA whose stationary law is sampled.
    pub fn pca(&self) -> &PcaRule {
        self.uf.pca()
    }

    pub fn sample(
        &self,
        site: &[i64],
        field: &RandomField,
        node_cap: usize,
        depth_cap: u64,
    ) -> Result<u8> {
        let offsets = self.rule.neighborhood().offsets();
        let mut levels: Vec<TreeLevel> = Vec::new();
        let mut frontier: Vec<Site> = vec![site.to_vec()];
        let mut truncated = false;
        let mut depth = 0u64;
        loop {
            let t = -(depth as i64);
            let leaf: Vec<Option<u8>> = frontier
                .iter()
                .map(|k| self.uf.certain(field.uniform(t, k, 0)))
                .collect();
            if leaf.contains(&Some(self.alpha)) {
                return Ok(self.alpha);
            }
            let mut next: Vec<Site> = frontier
                .iter()
                .zip(&leaf)
                .filter(|(_, l)| l.is_none())
                .flat_map(|(k, _)| offsets.iter().map(move |o| add_sites(k, o)))
                .collect();
            next.sort();
            next.dedup();
            if next.is_empty() {
                if truncated {
                    return Err(PcaError::SearchExhausted {
                        nodes: node_cap,
                        depth,
                    });
                }
                levels.push(TreeLevel {
                    children: vec![Vec::new(); frontier.len()],
                    sites: frontier,
                    leaf,
                });
                return Ok(self.evaluate(&levels));
            }
            if depth >= depth_cap {
                return Err(PcaError::SearchExhausted {
                    nodes: next.len(),
                    depth,
                });
            }
            if !truncated {
                if next.len() > node_cap {
                    truncated = true;
                    levels.clear();
                } else {
                    let children = frontier
                        .iter()
                        .zip(&leaf)
                        .map(|(k, l)| match l {
                            Some(_) => Vec::new(),
                            None => offsets
                                .iter()
                                .map(|o| {
                                    next.binary_search(&add_sites(k, o)).expect("child present")
                                })
                                .collect(),
                        })
                        .collect();
                    levels.push(TreeLevel {
                        sites: frontier,
                        leaf,
                        children,
                    });
                }
            }
            if truncated {
                next.truncate(node_cap);
            }
            frontier = next;
            depth += 1;
        }
    }

    fn evaluate(&self, levels: &[TreeLevel]) -> u8 {
        let mut below: Vec<u8> = Vec::new();
        for level in levels.iter().rev() {
            let vals: Vec<u8> = level
                .leaf
                .iter()
                .zip(&level.children)
                .map(|(l, ch)| match l {
                    Some(v) => *v,
                    None => {
                        let input: Vec<u8> = ch.iter().map(|&c| below[c]).collect();
                        self.rule.eval(&input)
                    }
                })
                .collect();
            debug_assert_eq!(vals.len(), level.sites.len());
            below = vals;
        }
        below[0]
    }
}

/// Birth and death rates of the three layers (wall, right, left).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallRates {
    pub birth: [f64; 3],
    pub death: [f64; 3],
}

impl WallRates {
    pub fn uniform(birth: f64, death: f64) -> Self {
        WallRates {
            birth: [birth; 3],
            death: [death; 3],
        }
    }

    fn check(&self) -> Result<()> {
        for &r in self.birth.iter().chain(&self.death) {
            if !(r > 0.0 && r < 1.0) {
                return Err(PcaError::InvalidParams(format!(
                    "glider rates must lie in (0, 1), got {r}"
                )));
            }
        }
        Ok(())
    }

    /// The birth-death kernel in layer order W, R, L.
    pub fn noise(&self) -> Result<NoiseKernel> {
        NoiseKernel::birth_death(self.birth.to_vec(), self.death.to_vec())
    }
}

const W: u32 = 0;
const R: u32 = 1;
const L: u32 = 2;

fn decide(u: f64, birth: f64, death: f64) -> Option<bool> {
    let from0 = birth_death_update(false, u, birth, death);
    let from1 = birth_death_update(true, u, birth, death);
    (from0 == from1).then_some(from0)
}

/// Exact time-0 symbol at site `k` of the gliders-with-walls PCA on `Z`.
///
/// Walls evolve independently per site: scan back for the latest deciding
/// sample and replay forward. A moving particle is traced back along its
/// single possible ancestry, switching direction at sites holding a wall at
/// the previous time, until a deciding sample fixes it.
pub fn glider_walls_sample(
    rates: &WallRates,
    k: i64,
    field: &RandomField,
    depth_cap: u64,
) -> Result<u8> {
    rates.check()?;
    let mut walls = HashMap::new();
    let w = wall_at(rates, k, 0, field, depth_cap, &mut walls)?;
    let r = mover_at(rates, R, k, 0, field, depth_cap, &mut walls)?;
    let l = mover_at(rates, L, k, 0, field, depth_cap, &mut walls)?;
    Ok(u8::from(w) | (u8::from(r) << 1) | (u8::from(l) << 2))
}

fn wall_at(
    rates: &WallRates,
    k: i64,
    t: i64,
    field: &RandomField,
    depth_cap: u64,
    memo: &mut HashMap<(i64, i64), bool>,
) -> Result<bool> {
    if let Some(&v) = memo.get(&(k, t)) {
        return Ok(v);
    }
    let (b, d) = (rates.birth[W as usize], rates.death[W as usize]);
    let mut us = Vec::new();
    let mut s = t;
    let mut value = loop {
        if let Some(&v) = memo.get(&(k, s)) {
            break v;
        }
        if (t - s) as u64 > depth_cap {
            return Err(PcaError::SearchExhausted {
                nodes: us.len(),
                depth: depth_cap,
            });
        }
        let u = field.uniform_1d(s, k, W);
        if let Some(v) = decide(u, b, d) {
            memo.insert((k, s), v);
            break v;
        }
        us.push(u);
        s -= 1;
    };
    for (i, &u) in us.iter().rev().enumerate() {
        value = birth_death_update(value, u, b, d);
        memo.insert((k, s + 1 + i as i64), value);
    }
    Ok(value)
}

fn mover_at(
    rates: &WallRates,
    layer: u32,
    k: i64,
    t: i64,
    field: &RandomField,
    depth_cap: u64,
    walls: &mut HashMap<(i64, i64), bool>,
) -> Result<bool> {
    // path of undecided samples, from (k, t) backwards
    let mut path: Vec<(u32, f64)> = Vec::new();
    let (mut layer, mut k, mut t) = (layer, k, t);
    let mut value = loop {
        if path.len() as u64 > depth_cap {
            return Err(PcaError::SearchExhausted {
                nodes: path.len(),
                depth: depth_cap,
            });
        }
        let (b, d) = (rates.birth[layer as usize], rates.death[layer as usize]);
        let u = field.uniform_1d(t, k, layer);
        if let Some(v) = decide(u, b, d) {
            break v;
        }
        path.push((layer, u));
        // before noise: R came from k-1 and L from k+1, swapped by a wall at k
        let wall = wall_at(rates, k, t - 1, field, depth_cap, walls)?;
        let from_right = (layer == R) == wall;
        if from_right {
            layer = L;
            k += 1;
        } else {
            layer = R;
            k -= 1;
        }
        t -= 1;
    };
    for &(layer, u) in path.iter().rev() {
        value = birth_death_update(value, u, rates.birth[layer as usize], rates.death[layer as usize]);
    }
    Ok(value)
}
