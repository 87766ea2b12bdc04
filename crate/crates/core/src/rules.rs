//! Deterministic local rules, structural checks, and the rule zoo.
//!
//! Table inputs are indexed lexicographically with the first neighborhood
//! offset most significant, matching window pattern indices.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{PcaError, Result};
use crate::lattice::{
    add_sites, decode_pattern, pattern_count, Alphabet, Configuration, Geometry, Site,
};

/// Default cap on the number of table entries produced by enumeration.
pub const DEFAULT_TABLE_BUDGET: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Neighborhood {
    dim: usize,
    offsets: Vec<Site>,
}

impl Neighborhood {
    pub fn new(dim: usize, offsets: Vec<Site>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(PcaError::InvalidParams("empty neighborhood".into()));
        }
        if let Some(o) = offsets.iter().find(|o| o.len() != dim) {
            return Err(PcaError::InvalidParams(format!(
                "offset {o:?} does not have dimension {dim}"
            )));
        }
        let distinct: BTreeSet<&Site> = offsets.iter().collect();
        if distinct.len() != offsets.len() {
            return Err(PcaError::InvalidParams(
                "neighborhood offsets must be distinct".into(),
            ));
        }
        Ok(Neighborhood { dim, offsets })
    }

    pub fn from_1d(offsets: &[i64]) -> Result<Self> {
        Neighborhood::new(1, offsets.iter().map(|&o| vec![o]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Site] {
        &self.offsets
    }

    /// `max |n_i|` over offsets and coordinates.
    pub fn radius(&self) -> i64 {
        self.offsets
            .iter()
            .flat_map(|o| o.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Smallest and largest offset of a one-dimensional neighborhood.
    pub fn extent_1d(&self) -> Result<(i64, i64)> {
        if self.dim != 1 {
            return Err(PcaError::NotOneDimensional(self.dim));
        }
        let lo = self.offsets.iter().map(|o| o[0]).min().unwrap_or(0);
        let hi = self.offsets.iter().map(|o| o[0]).max().unwrap_or(0);
        Ok((lo, hi))
    }

    /// True when the offsets are `lo, lo+1, .., hi` in increasing order.
    pub fn is_contiguous_1d(&self) -> bool {
        self.dim == 1 && self.offsets.windows(2).all(|w| w[1][0] == w[0][0] + 1)
    }

    /// Sorted sumset `self + other`.
    pub fn sumset(&self, other: &Neighborhood) -> Neighborhood {
        let set: BTreeSet<Site> = self
            .offsets
            .iter()
            .flat_map(|a| other.offsets.iter().map(move |b| add_sites(a, b)))
            .collect();
        Neighborhood {
            dim: self.dim,
            offsets: set.into_iter().collect(),
        }
    }

    /// `N^t` (sorted), with `N^1` the offsets themselves sorted.
    pub fn power(&self, t: u32) -> Neighborhood {
        let mut acc = Neighborhood {
            dim: self.dim,
            offsets: vec![vec![0; self.dim]],
        };
        for _ in 0..t {
            acc = acc.sumset(self);
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalRule {
    alphabet: Alphabet,
    neighborhood: Neighborhood,
    table: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permutivity {
    Left,
    Right,
    Bi,
    None,
}

impl LocalRule {
    pub fn new(alphabet: Alphabet, neighborhood: Neighborhood, table: Vec<u8>) -> Result<Self> {
        let q = alphabet.size();
        let expected = pattern_count(q, neighborhood.len()).ok_or(PcaError::BudgetExceeded {
            what: "rule table entries",
            needed: u128::MAX,
            budget: usize::MAX as u128,
        })?;
        if table.len() != expected {
            return Err(PcaError::InvalidParams(format!(
                "rule table has {} entries, expected {expected}",
                table.len()
            )));
        }
        if let Some(&s) = table.iter().find(|&&s| s as usize >= q) {
            return Err(PcaError::InvalidSymbol {
                symbol: s as usize,
                size: q,
            });
        }
        Ok(LocalRule {
            alphabet,
            neighborhood,
            table,
        })
    }

    /// Tabulates `f` over all inputs.
    pub fn from_fn<F: Fn(&[u8]) -> u8>(
        alphabet: Alphabet,
        neighborhood: Neighborhood,
        f: F,
    ) -> Result<Self> {
        let q = alphabet.size();
        let m = neighborhood.len();
        let n = pattern_count(q, m)
            .filter(|&n| n <= DEFAULT_TABLE_BUDGET)
            .ok_or(PcaError::BudgetExceeded {
                what: "rule table entries",
                needed: (q as u128).saturating_pow(m as u32),
                budget: DEFAULT_TABLE_BUDGET as u128,
            })?;
        let table = (0..n).map(|i| f(&decode_pattern(i, m, q))).collect();
        LocalRule::new(alphabet, neighborhood, table)
    }

    pub fn identity(alphabet: Alphabet, dim: usize) -> Self {
        let q = alphabet.size();
        LocalRule {
            alphabet,
            neighborhood: Neighborhood {
                dim,
                offsets: vec![vec![0; dim]],
            },
            table: (0..q as u8).collect(),
        }
    }

    pub fn constant(alphabet: Alphabet, neighborhood: Neighborhood, symbol: u8) -> Result<Self> {
        LocalRule::from_fn(alphabet, neighborhood, |_| symbol)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.neighborhood
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    pub fn eval(&self, input: &[u8]) -> u8 {
        let q = self.alphabet.size();
        self.table[input.iter().fold(0, |acc, &a| acc * q + a as usize)]
    }

    pub fn is_constant(&self) -> Option<u8> {
        let first = self.table[0];
        self.table.iter().all(|&s| s == first).then_some(first)
    }

    /// The same map over the contiguous hull `[lo, hi]` of a 1D neighborhood.
    pub fn to_contiguous(&self) -> Result<LocalRule> {
        let (lo, hi) = self.neighborhood.extent_1d()?;
        if self.neighborhood.is_contiguous_1d() {
            return Ok(self.clone());
        }
        let hull = Neighborhood::from_1d(&(lo..=hi).collect::<Vec<_>>())?;
        let slots: Vec<usize> = self
            .neighborhood
            .offsets
            .iter()
            .map(|o| (o[0] - lo) as usize)
            .collect();
        LocalRule::from_fn(self.alphabet.clone(), hull, |w| {
            let input: Vec<u8> = slots.iter().map(|&s| w[s]).collect();
            self.eval(&input)
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {}\n",
            self.alphabet.size(),
            self.neighborhood.dim,
            self.neighborhood.len()
        );
        for o in &self.neighborhood.offsets {
            let c: Vec<String> = o.iter().map(|x| x.to_string()).collect();
            out.push_str(&c.join(" "));
            out.push('\n');
        }
        let t: Vec<String> = self.table.iter().map(|x| x.to_string()).collect();
        out.push_str(&t.join(" "));
        out.push('\n');
        out
    }

    /// Parses `|S| d m`, then `m` offset lines, then the `|S|^m` outputs.
    pub fn from_text(s: &str) -> Result<LocalRule> {
        let nums: Vec<i64> = s
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse::<i64>()
                    .map_err(|_| PcaError::Parse(format!("bad integer {t:?}")))
            })
            .collect::<Result<_>>()?;
        if nums.len() < 3 {
            return Err(PcaError::Parse("rule header needs |S| d m".into()));
        }
        let (q, d, m) = (nums[0], nums[1], nums[2]);
        if q < 1 || d < 1 || m < 1 {
            return Err(PcaError::Parse("rule header values must be positive".into()));
        }
        let (q, d, m) = (q as usize, d as usize, m as usize);
        let off_end = 3 + d * m;
        if nums.len() < off_end {
            return Err(PcaError::Parse("truncated offsets".into()));
        }
        let offsets = nums[3..off_end].chunks(d).map(|c| c.to_vec()).collect();
        let neighborhood = Neighborhood::new(d, offsets)?;
        let table_len = pattern_count(q, m)
            .ok_or_else(|| PcaError::Parse("table size overflows".into()))?;
        let table = &nums[off_end..];
        if table.len() != table_len {
            return Err(PcaError::Parse(format!(
                "rule table has {} entries, expected {table_len}",
                table.len()
            )));
        }
        let table = table
            .iter()
            .map(|&x| {
                u8::try_from(x).map_err(|_| PcaError::InvalidSymbol {
                    symbol: x.max(0) as usize,
                    size: q,
                })
            })
            .collect::<Result<_>>()?;
        LocalRule::new(Alphabet::new(q)?, neighborhood, table)
    }
}

/// `(Fx)_k = f(x_{k+n_1}, .., x_{k+n_m})` on every cell.
pub fn apply_ca(rule: &LocalRule, config: &Configuration) -> Result<Configuration> {
    rule.alphabet.compatible(config.alphabet())?;
    if rule.neighborhood.dim != config.geometry().dim() {
        return Err(PcaError::GeometryMismatch(format!(
            "rule of dimension {} on a lattice of dimension {}",
            rule.neighborhood.dim,
            config.geometry().dim()
        )));
    }
    let stencil = config.geometry().stencil(&rule.neighborhood.offsets)?;
    let boundary = match config.geometry() {
        Geometry::Region { boundary, .. } => *boundary,
        Geometry::Torus { .. } => 0,
    };
    let q = rule.alphabet.size();
    let m = rule.neighborhood.len();
    let cells = config.cells();
    let out = stencil
        .chunks(m)
        .map(|nb| {
            let idx = nb.iter().fold(0usize, |acc, &j| {
                let s = if j == usize::MAX { boundary } else { cells[j] };
                acc * q + s as usize
            });
            rule.table[idx]
        })
        .collect();
    Ok(config.with_cells(out))
}

/// Local rule of `G ∘ F` over the sorted sumset neighborhood.
pub fn compose(g: &LocalRule, f: &LocalRule, budget: usize) -> Result<LocalRule> {
    g.alphabet.compatible(&f.alphabet)?;
    if g.neighborhood.dim != f.neighborhood.dim {
        return Err(PcaError::GeometryMismatch(
            "composed rules have different dimensions".into(),
        ));
    }
    let q = f.alphabet.size();
    let sum = g.neighborhood.sumset(&f.neighborhood);
    let size = pattern_count(q, sum.len()).filter(|&n| n <= budget).ok_or(
        PcaError::BudgetExceeded {
            what: "composed rule table entries",
            needed: (q as u128).saturating_pow(sum.len() as u32),
            budget: budget as u128,
        },
    )?;
    // positions[j][i]: slot of n_g[j] + n_f[i] in the sumset
    let positions: Vec<Vec<usize>> = g
        .neighborhood
        .offsets
        .iter()
        .map(|a| {
            f.neighborhood
                .offsets
                .iter()
                .map(|b| {
                    let s = add_sites(a, b);
                    sum.offsets.binary_search(&s).expect("offset in sumset")
                })
                .collect()
        })
        .collect();
    let m = sum.len();
    let mut digits = vec![0u8; m];
    let mut table = Vec::with_capacity(size);
    for _ in 0..size {
        let gi = positions.iter().fold(0usize, |acc, pos| {
            let fi = pos
                .iter()
                .fold(0usize, |a, &p| a * q + digits[p] as usize);
            acc * q + f.table[fi] as usize
        });
        table.push(g.table[gi]);
        for d in digits.iter_mut().rev() {
            *d += 1;
            if (*d as usize) < q {
                break;
            }
            *d = 0;
        }
    }
    Ok(LocalRule {
        alphabet: f.alphabet.clone(),
        neighborhood: sum,
        table,
    })
}

/// Local rule of `F^t` with neighborhood `N^t`.
pub fn compose_power(rule: &LocalRule, t: u32, budget: usize) -> Result<LocalRule> {
    if t == 0 {
        return Err(PcaError::InvalidParams("power must be positive".into()));
    }
    let mut acc = rule.clone();
    for _ in 1..t {
        acc = compose(rule, &acc, budget)?;
    }
    Ok(acc)
}

/// Bijectivity of `a ↦ f(a w)` (left) and `a ↦ f(w a)` (right) for every `w`.
pub fn is_permutive(rule: &LocalRule) -> Result<Permutivity> {
    if rule.neighborhood.dim != 1 {
        return Err(PcaError::NotOneDimensional(rule.neighborhood.dim));
    }
    if !rule.neighborhood.is_contiguous_1d() {
        return Err(PcaError::NonContiguous);
    }
    let q = rule.alphabet.size();
    let m = rule.neighborhood.len();
    let rest = q.pow(m as u32 - 1);
    let bijective = |index: &dyn Fn(usize, usize) -> usize| {
        (0..rest).all(|w| {
            let mut seen = vec![false; q];
            (0..q).all(|a| {
                let b = rule.table[index(a, w)] as usize;
                !std::mem::replace(&mut seen[b], true)
            })
        })
    };
    let left = bijective(&|a, w| a * rest + w);
    let right = bijective(&|a, w| w * q + a);
    Ok(match (left, right) {
        (true, true) => Permutivity::Bi,
        (true, false) => Permutivity::Left,
        (false, true) => Permutivity::Right,
        (false, false) => Permutivity::None,
    })
}

/// The symbol α with `f(..) = α` whenever some input equals α, if any.
/// Requires at least two neighbors; such a symbol is unique.
pub fn spreading_symbol(rule: &LocalRule) -> Option<u8> {
    let q = rule.alphabet.size();
    let m = rule.neighborhood.len();
    if m < 2 {
        return None;
    }
    (0..q as u8).find(|&alpha| {
        rule.table.iter().enumerate().all(|(i, &out)| {
            out == alpha || !decode_pattern(i, m, q).contains(&alpha)
        })
    })
}

/// Exact surjectivity test for one-dimensional rules.
///
/// Surjectivity is equivalent to pre-injectivity on `Z`. The rule is not
/// pre-injective iff the pair graph on `(m−1)`-words has a path leaving the
/// diagonal and returning to it.
pub fn is_surjective_1d(rule: &LocalRule) -> Result<bool> {
    if rule.neighborhood.dim != 1 {
        return Err(PcaError::NotOneDimensional(rule.neighborhood.dim));
    }
    let rule = rule.to_contiguous()?;
    let q = rule.alphabet.size();
    let m = rule.neighborhood.len();

    // balance of single symbols is necessary
    let expected = q.pow(m as u32 - 1);
    let mut counts = vec![0usize; q];
    for &s in &rule.table {
        counts[s as usize] += 1;
    }
    if counts.iter().any(|&c| c != expected) {
        return Ok(false);
    }

    let words = q.pow(m as u32 - 1);
    let states = words.checked_mul(words).filter(|&s| s <= DEFAULT_TABLE_BUDGET).ok_or(
        PcaError::BudgetExceeded {
            what: "pair graph states",
            needed: (words as u128) * (words as u128),
            budget: DEFAULT_TABLE_BUDGET as u128,
        },
    )?;
    // only diverged states are stored; the undiverged part is the diagonal itself
    let mut seen = vec![false; states];
    let mut queue = VecDeque::new();
    for u in 0..words {
        for a in 0..q {
            for b in 0..q {
                if a != b && rule.table[u * q + a] == rule.table[u * q + b] {
                    let s = ((u * q + a) % words) * words + (u * q + b) % words;
                    if !seen[s] {
                        seen[s] = true;
                        queue.push_back(s);
                    }
                }
            }
        }
    }
    while let Some(s) = queue.pop_front() {
        let (u, v) = (s / words, s % words);
        if u == v {
            return Ok(false);
        }
        for a in 0..q {
            let fa = rule.table[u * q + a];
            for b in 0..q {
                if rule.table[v * q + b] == fa {
                    let t = ((u * q + a) % words) * words + (v * q + b) % words;
                    if !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Smallest `t ≤ horizon` with `F^t` constant, and the constant.
pub fn is_nilpotent_within(
    rule: &LocalRule,
    horizon: u32,
    budget: usize,
) -> Result<Option<(u32, u8)>> {
    if !periodic_orbits_die(rule, horizon)? {
        return Ok(None);
    }
    let mut power = rule.clone();
    for t in 1..=horizon {
        if t > 1 {
            power = compose(rule, &power, budget)?;
        }
        if let Some(a) = power.is_constant() {
            return Ok(Some((t, a)));
        }
    }
    Ok(None)
}

/// Necessary condition for `F^horizon` to be constant: every configuration
/// on the small tori (side ≤ 6, at most 2^12 states) collapses to one common
/// constant within `horizon`.
fn periodic_orbits_die(rule: &LocalRule, horizon: u32) -> Result<bool> {
    let q = rule.alphabet.size();
    let dim = rule.neighborhood.dim;
    let mut target = None;
    for side in 1..=6usize {
        let geometry = Geometry::torus(&vec![side; dim]);
        let n = geometry.cell_count();
        if (n as f64) * (q as f64).log2() > 12.0 {
            break;
        }
        if geometry.stencil(&rule.neighborhood.offsets).is_err() {
            continue;
        }
        for index in 0..q.pow(n as u32) {
            let mut x = Configuration::new(rule.alphabet.clone(), geometry.clone(), decode_pattern(index, n, q))?;
            for _ in 0..horizon {
                x = apply_ca(rule, &x)?;
            }
            let first = x.cells()[0];
            if x.cells().iter().any(|&c| c != first) || *target.get_or_insert(first) != first {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Parameters for zoo rules; unset fields take per-rule defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZooParams {
    /// One-dimensional offsets.
    pub offsets: Option<Vec<i64>>,
    pub modulus: Option<usize>,
    pub coefficients: Option<Vec<i64>>,
    pub constant: Option<i64>,
    /// Particle displacement per step, one entry per layer.
    pub velocities: Option<Vec<i64>>,
    /// Annihilating layer pairs (0-based), applied in order.
    pub pairs: Option<Vec<(usize, usize)>>,
}

pub const ZOO_NAMES: [&str; 10] = [
    "xor",
    "additive_affine",
    "spreading_binary",
    "spreading_product",
    "nilpotent_demo",
    "majority1d",
    "nec_majority",
    "gliders_annihilation",
    "gliders_walls",
    "permutive_demo",
];

/// Glider layer bits for the walls rule.
pub const WALL: u8 = 1;
pub const RIGHT: u8 = 2;
pub const LEFT: u8 = 4;

pub fn build_zoo(name: &str, params: &ZooParams) -> Result<LocalRule> {
    let offsets_or = |default: &[i64]| -> Result<Neighborhood> {
        Neighborhood::from_1d(params.offsets.as_deref().unwrap_or(default))
    };
    match name {
        "xor" => LocalRule::from_fn(Alphabet::binary(), offsets_or(&[0, 1])?, |w| {
            w.iter().fold(0, |a, b| a ^ b)
        }),
        "additive_affine" => {
            let n = params.modulus.unwrap_or(3);
            let nb = offsets_or(&[-1, 0, 1])?;
            let coeffs = params
                .coefficients
                .clone()
                .unwrap_or_else(|| vec![1; nb.len()]);
            if coeffs.len() != nb.len() {
                return Err(PcaError::InvalidParams(format!(
                    "{} coefficients for {} offsets",
                    coeffs.len(),
                    nb.len()
                )));
            }
            let c = params.constant.unwrap_or(0);
            LocalRule::from_fn(Alphabet::cyclic(n)?, nb, |w| {
                let s: i64 = w.iter().zip(&coeffs).map(|(&a, k)| a as i64 * k).sum();
                (s + c).rem_euclid(n as i64) as u8
            })
        }
        "spreading_binary" => LocalRule::from_fn(Alphabet::binary(), offsets_or(&[0, 1])?, |w| {
            w.iter().fold(1, |a, b| a & b)
        }),
        "spreading_product" => {
            let n = params.modulus.unwrap_or(3);
            LocalRule::from_fn(Alphabet::cyclic(n)?, offsets_or(&[-1, 0, 1])?, |w| {
                w.iter().fold(1usize, |a, &b| a * b as usize % n) as u8
            })
        }
        "nilpotent_demo" => {
            // our own rule: F(x)_k = max(x_k, x_{k+1}) - 1, floored at 0; F^2 ≡ 0
            LocalRule::from_fn(Alphabet::new(3)?, offsets_or(&[0, 1])?, |w| {
                w.iter().copied().max().unwrap_or(0).saturating_sub(1)
            })
        }
        "majority1d" => LocalRule::from_fn(Alphabet::binary(), offsets_or(&[-1, 0, 1])?, |w| {
            u8::from(2 * w.iter().filter(|&&a| a == 1).count() > w.len())
        }),
        "nec_majority" => {
            let nb = Neighborhood::new(2, vec![vec![0, 0], vec![1, 0], vec![0, 1]])?;
            LocalRule::from_fn(Alphabet::binary(), nb, |w| {
                u8::from(w.iter().filter(|&&a| a == 1).count() >= 2)
            })
        }
        "gliders_annihilation" => {
            let v = params.velocities.clone().unwrap_or_else(|| vec![1, -1]);
            let pairs = params.pairs.clone().unwrap_or_else(|| vec![(0, 1)]);
            if v.is_empty() || v.len() > 8 {
                return Err(PcaError::InvalidParams(format!(
                    "gliders need 1..=8 layers, got {}",
                    v.len()
                )));
            }
            if let Some(p) = pairs
                .iter()
                .find(|(i, j)| *i >= v.len() || *j >= v.len() || i == j)
            {
                return Err(PcaError::InvalidParams(format!(
                    "annihilation pair {p:?} out of range for {} layers",
                    v.len()
                )));
            }
            gliders(&v, |mut a| {
                for &(i, j) in &pairs {
                    let mask = (1u8 << i) | (1u8 << j);
                    if a & mask == mask {
                        a &= !mask;
                    }
                }
                a
            })
        }
        "gliders_walls" => gliders(&[0, 1, -1], |a| match a {
            x if x == WALL | RIGHT => WALL | LEFT,
            x if x == WALL | LEFT => WALL | RIGHT,
            x => x,
        }),
        "permutive_demo" => {
            LocalRule::from_fn(Alphabet::cyclic(3)?, offsets_or(&[-1, 0, 1])?, |w| {
                (w[0] + w[1] * w[2]) % 3
            })
        }
        other => Err(PcaError::UnknownRule(other.to_string())),
    }
}

/// Layer `i` (bit `i`) moves by `velocities[i]` per step, reading
/// `x_{k − v_i, i}`; `post` is applied to the gathered symbol.
fn gliders<H: Fn(u8) -> u8>(velocities: &[i64], post: H) -> Result<LocalRule> {
    let n = velocities.len();
    let reads: BTreeSet<i64> = velocities.iter().map(|v| -v).collect();
    let reads: Vec<i64> = reads.into_iter().collect();
    let slot: Vec<usize> = velocities
        .iter()
        .map(|v| reads.iter().position(|&r| r == -v).expect("read offset"))
        .collect();
    let alphabet = Alphabet::new(1 << n)?;
    LocalRule::from_fn(alphabet, Neighborhood::from_1d(&reads)?, |w| {
        let gathered = slot
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &s)| acc | (w[s] & (1 << i)));
        post(gathered)
    })
}

/// Layer count of a glider alphabet (`|S| = 2^n`).
pub fn glider_layers(alphabet: &Alphabet) -> Option<usize> {
    let q = alphabet.size();
    q.is_power_of_two().then(|| q.trailing_zeros() as usize)
}
