//! Approximation of the invariant measure of an ergodic PCA by searching
//! rational window measures that are almost invariant under one step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PcaError, Result};
use crate::lattice::{decode_pattern, pattern_count, SiteSet, WindowMeasure};
use crate::noise::PcaRule;

/// A measure on `S^C` with probabilities `counts / k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalWindowMeasure {
    pub window: SiteSet,
    pub alphabet_size: usize,
    pub counts: Vec<u64>,
    pub k: u64,
}

impl RationalWindowMeasure {
    pub fn new(window: SiteSet, alphabet_size: usize, counts: Vec<u64>) -> Result<Self> {
        let patterns = pattern_count(alphabet_size, window.len());
        if patterns != Some(counts.len()) {
            return Err(PcaError::WindowMismatch(format!(
                "{} counts for {} patterns",
                counts.len(),
                patterns.map_or("too many".into(), |p| p.to_string())
            )));
        }
        let k = counts.iter().sum();
        if k == 0 {
            return Err(PcaError::EmptySamples);
        }
        Ok(RationalWindowMeasure {
            window,
            alphabet_size,
            counts,
            k,
        })
    }

    pub fn probs(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.k as f64)
            .collect()
    }

    pub fn to_window_measure(&self) -> Result<WindowMeasure> {
        WindowMeasure::new(self.window.clone(), self.alphabet_size, self.probs())
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i + 1) as u128
    })
}

/// Number of compositions of `k` into `parts` non-negative parts.
pub fn composition_count(k: u64, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(k == 0);
    }
    binomial(k + parts as u64 - 1, parts as u64 - 1)
}

/// Default number of candidate measures examined per round.
pub const DEFAULT_MEASURE_BUDGET: u128 = 10_000_000;

/// All rational measures with denominator `k` on `window`, in descending
/// lexicographic order of their count vectors.
pub fn enumerate_measures(
    window: &SiteSet,
    alphabet_size: usize,
    k: u64,
    budget: u128,
) -> Result<Compositions> {
    let parts = pattern_count(alphabet_size, window.len()).ok_or(PcaError::BudgetExceeded {
        what: "window pattern count",
        needed: u128::MAX,
        budget,
    })?;
    let needed = composition_count(k, parts);
    if needed > budget {
        return Err(PcaError::BudgetExceeded {
            what: "rational measures",
            needed,
            budget,
        });
    }
    if k == 0 {
        return Err(PcaError::InvalidParams("denominator must be positive".into()));
    }
    let mut first = vec![0u64; parts];
    first[0] = k;
    Ok(Compositions {
        window: window.clone(),
        alphabet_size,
        next: Some(first),
    })
}

pub struct Compositions {
    window: SiteSet,
    alphabet_size: usize,
    next: Option<Vec<u64>>,
}

impl Iterator for Compositions {
    type Item = RationalWindowMeasure;

    fn next(&mut self) -> Option<RationalWindowMeasure> {
        let cur = self.next.take()?;
        let n = cur.len();
        if let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] > 0) {
            let mut c = cur.clone();
            let tail: u64 = c[i + 1..].iter().sum();
            c[i] -= 1;
            c[i + 1..].iter_mut().for_each(|x| *x = 0);
            c[i + 1] = tail + 1;
            self.next = Some(c);
        }
        let k = cur.iter().sum();
        Some(RationalWindowMeasure {
            window: self.window.clone(),
            alphabet_size: self.alphabet_size,
            counts: cur,
            k,
        })
    }
}

/// The linear map `ν ↦ νΦ|_B − ν|_B` for measures on `N(B) = B + N`.
#[derive(Clone, Debug)]
pub struct InvarianceSystem {
    pub window: SiteSet,
    pub b: SiteSet,
    q: usize,
    /// Row-major `|S|^{|N(B)|} × |S|^{|B|}`.
    defect: Vec<f64>,
}

/// Largest matrix built by [`InvarianceSystem::new`].
pub const SYSTEM_ENTRY_CAP: usize = 1 << 24;

impl InvarianceSystem {
    pub fn new(pca: &PcaRule, b: &SiteSet) -> Result<Self> {
        let q = pca.alphabet().size();
        let offsets = pca.neighborhood().offsets();
        let window = b.minkowski_sum(offsets);
        if b.iter().any(|s| !window.contains(s)) {
            return Err(PcaError::WindowMismatch(
                "B is not contained in B + N".into(),
            ));
        }
        let rows = pattern_count(q, window.len());
        let cols = pattern_count(q, b.len());
        let (rows, cols) = match (rows, cols) {
            (Some(r), Some(c)) if r.saturating_mul(c) <= SYSTEM_ENTRY_CAP => (r, c),
            _ => {
                return Err(PcaError::BudgetExceeded {
                    what: "invariance system",
                    needed: (q as u128).saturating_pow((window.len() + b.len()) as u32),
                    budget: SYSTEM_ENTRY_CAP as u128,
                })
            }
        };
        // position in the N(B) pattern of each neighbor of each site of B
        let nbr: Vec<Vec<usize>> = b
            .iter()
            .map(|s| {
                offsets
                    .iter()
                    .map(|o| {
                        let k: Vec<i64> = s.iter().zip(o).map(|(x, y)| x + y).collect();
                        window.position(&k).expect("neighbor in window")
                    })
                    .collect()
            })
            .collect();
        let own: Vec<usize> = b.iter().map(|s| window.position(s).expect("checked")).collect();
        let mut defect = vec![0.0; rows * cols];
        for u in 0..rows {
            let pat = decode_pattern(u, window.len(), q);
            let row = &mut defect[u * cols..(u + 1) * cols];
            // product law of the next symbols on B
            let mut law = vec![1.0];
            for nb in &nbr {
                let p = nb.iter().fold(0usize, |a, &i| a * q + pat[i] as usize);
                let phi = pca.row(p);
                law = law
                    .iter()
                    .flat_map(|&a| phi.iter().map(move |&x| a * x))
                    .collect();
            }
            row.copy_from_slice(&law);
            let marginal = own.iter().fold(0usize, |a, &i| a * q + pat[i] as usize);
            row[marginal] -= 1.0;
        }
        Ok(InvarianceSystem {
            window,
            b: b.clone(),
            q,
            defect,
        })
    }

    pub fn parts(&self) -> usize {
        self.defect.len() / self.cols()
    }

    fn cols(&self) -> usize {
        self.q.pow(self.b.len() as u32)
    }

    /// `‖νΦ − ν‖_B` for probabilities on `N(B)`.
    pub fn norm(&self, nu: &[f64]) -> f64 {
        let cols = self.cols();
        let mut acc = vec![0.0; cols];
        for (u, &w) in nu.iter().enumerate() {
            if w != 0.0 {
                for (a, d) in acc.iter_mut().zip(&self.defect[u * cols..(u + 1) * cols]) {
                    *a += w * d;
                }
            }
        }
        0.5 * acc.iter().map(|x| x.abs()).sum::<f64>()
    }
}

/// Total variation on `B` between one step of `ν` and `ν` itself; `ν` must
/// live on `B + N`.
pub fn restricted_invariance_norm(nu: &RationalWindowMeasure, pca: &PcaRule, b: &SiteSet) -> Result<f64> {
    let sys = InvarianceSystem::new(pca, b)?;
    if nu.window != sys.window || nu.alphabet_size != sys.q {
        return Err(PcaError::WindowMismatch(
            "measure must live on B + N".into(),
        ));
    }
    Ok(sys.norm(&nu.probs()))
}

/// A cylinder `[w]` on sites `A`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetPattern {
    pub sites: SiteSet,
    pub symbols: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Midpoint of the representatives' values of `ν([w])` in the last round.
    pub value: f64,
    pub spread: f64,
    pub m_final: u64,
    pub k: u64,
    pub representatives: u64,
    pub candidates_checked: u64,
    pub box_sites: SiteSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSearch {
    /// Accuracy `1/n`.
    pub n: u64,
    /// Candidates allowed per round.
    pub budget: u128,
}

impl InvariantSearch {
    pub fn new(n: u64) -> Self {
        InvariantSearch {
            n,
            budget: DEFAULT_MEASURE_BUDGET,
        }
    }
}

/// Searches `m = m₀, m₀+1, ..` for rational measures of denominator
/// `k = 3m|S|^{|N(B)|}` on `N(B)` with `‖νΦ − ν‖_B < 1/m`, where `B` is the
/// bounding box of the target, and stops once their values of `ν([w])`
/// spread by less than `1/(2n)`. `m₀ = ⌈2n/3⌉` keeps the rounding error of
/// the true marginal below `1/(2n)`, so the result is within `1/n` of the
/// invariant measure when one exists.
pub fn approximate_invariant(pca: &PcaRule, target: &TargetPattern, search: &InvariantSearch) -> Result<InvariantReport> {
    let q = pca.alphabet().size();
    if target.symbols.len() != target.sites.len() {
        return Err(PcaError::WindowMismatch(
            "pattern length differs from its sites".into(),
        ));
    }
    if let Some(&s) = target.symbols.iter().find(|&&s| s as usize >= q) {
        return Err(PcaError::InvalidSymbol {
            symbol: s as usize,
            size: q,
        });
    }
    if search.n == 0 {
        return Err(PcaError::InvalidParams("accuracy 1/n needs n ≥ 1".into()));
    }
    let (lo, hi) = target
        .sites
        .bounds()
        .ok_or_else(|| PcaError::WindowMismatch("empty target".into()))?;
    let b = box_between(&lo, &hi);
    let sys = InvarianceSystem::new(pca, &b)?;
    let parts = sys.parts();
    let cols = sys.cols();
    let pos: Vec<usize> = target
        .sites
        .iter()
        .map(|s| sys.window.position(s).expect("target inside B + N"))
        .collect();
    let hits: Vec<bool> = (0..parts)
        .map(|u| {
            let pat = decode_pattern(u, sys.window.len(), q);
            pos.iter().zip(&target.symbols).all(|(&i, &s)| pat[i] == s)
        })
        .collect();
    let mut checked = 0u64;
    let mut m = (2 * search.n).div_ceil(3).max(1);
    loop {
        let k = 3 * m * parts as u64;
        let needed = composition_count(k, parts);
        if needed > search.budget {
            return Err(PcaError::BudgetExceeded {
                what: "rational measures per round",
                needed,
                budget: search.budget,
            });
        }
        let threshold = 1.0 / m as f64 - 1e-9;
        let round = scan_round(&sys.defect, cols, &hits, k, threshold);
        checked += needed as u64;
        if round.count > 0 && round.max - round.min < 1.0 / (2 * search.n) as f64 {
            return Ok(InvariantReport {
                value: 0.5 * (round.min + round.max),
                spread: round.max - round.min,
                m_final: m,
                k,
                representatives: round.count,
                candidates_checked: checked,
                box_sites: b,
            });
        }
        log::info!(
            "m = {m}, k = {k}: {} representatives, spread {}",
            round.count,
            round.max - round.min
        );
        m += 1;
    }
}

fn box_between(lo: &[i64], hi: &[i64]) -> SiteSet {
    let mut sites = vec![Vec::new()];
    for (l, h) in lo.iter().zip(hi) {
        sites = sites
            .into_iter()
            .flat_map(|s: Vec<i64>| {
                (*l..=*h).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    SiteSet::new(lo.len(), sites).expect("box sites share a dimension")
}

#[derive(Clone, Copy, Debug)]
struct Round {
    count: u64,
    min: f64,
    max: f64,
}

impl Round {
    fn empty() -> Self {
        Round {
            count: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn merge(self, o: Round) -> Round {
        Round {
            count: self.count + o.count,
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }
}

/// Every composition of `k`, split on the first part for parallelism; the
/// defect vector and the target mass are accumulated along the recursion.
fn scan_round(defect: &[f64], cols: usize, hits: &[bool], k: u64, threshold: f64) -> Round {
    let parts = hits.len();
    let kf = k as f64;
    (0..=k)
        .into_par_iter()
        .map(|c0| {
            let mut acc = vec![0.0; cols * (parts + 1)];
            for (a, d) in acc[cols..2 * cols].iter_mut().zip(&defect[..cols]) {
                *a = c0 as f64 * d;
            }
            let mass = if hits[0] { c0 } else { 0 };
            let mut round = Round::empty();
            if parts == 1 {
                if c0 == k {
                    visit(&acc[cols..2 * cols], mass, kf, threshold, &mut round);
                }
                return round;
            }
            recurse(defect, cols, hits, 1, k - c0, mass, &mut acc, kf, threshold, &mut round);
            round
        })
        .reduce(Round::empty, Round::merge)
}

fn visit(sum: &[f64], mass: u64, kf: f64, threshold: f64, round: &mut Round) {
    let norm = 0.5 * sum.iter().map(|x| x.abs()).sum::<f64>() / kf;
    if norm < threshold {
        let v = mass as f64 / kf;
        round.count += 1;
        round.min = round.min.min(v);
        round.max = round.max.max(v);
    }
}

/// `acc[j·cols..]` holds the defect sum over the first `j` parts.
#[allow(clippy::too_many_arguments)]
fn recurse(
    defect: &[f64],
    cols: usize,
    hits: &[bool],
    part: usize,
    rest: u64,
    mass: u64,
    acc: &mut [f64],
    kf: f64,
    threshold: f64,
    round: &mut Round,
) {
    let parts = hits.len();
    let row = &defect[part * cols..(part + 1) * cols];
    let last = part + 1 == parts;
    let range = if last { rest..=rest } else { 0..=rest };
    for c in range {
        let (head, tail) = acc.split_at_mut((part + 1) * cols);
        let prev = &head[part * cols..];
        for ((t, p), d) in tail[..cols].iter_mut().zip(prev).zip(row) {
            *t = p + c as f64 * d;
        }
        let m = if hits[part] { mass + c } else { mass };
        if last {
            visit(&acc[(part + 1) * cols..(part + 2) * cols], m, kf, threshold, round);
        } else {
            recurse(defect, cols, hits, part + 1, rest - c, m, acc, kf, threshold, round);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Alphabet;
    use crate::noise::{compose_pca, NoiseKernel};
    use crate::rules::{build_zoo, LocalRule, ZooParams};

    fn xor_flip(eps: f64) -> PcaRule {
        let xor = build_zoo("xor", &ZooParams::default()).unwrap();
        compose_pca(&xor, &NoiseKernel::symmetric_flip(eps).unwrap()).unwrap()
    }

    #[test]
    fn enumeration_order_and_counts() {
        let w = SiteSet::from_1d(&[0]);
        let all: Vec<Vec<u64>> = enumerate_measures(&w, 2, 2, 100)
            .unwrap()
            .map(|m| m.counts)
            .collect();
        assert_eq!(all, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(enumerate_measures(&w, 2, 4, 100).unwrap().count(), 5);
        let points: Vec<Vec<u64>> = enumerate_measures(&SiteSet::interval(0, 1), 2, 1, 100)
            .unwrap()
            .map(|m| m.counts)
            .collect();
        assert_eq!(points.len(), 4);
        assert!(points.iter().all(|c| c.iter().sum::<u64>() == 1));
        let big = enumerate_measures(&SiteSet::interval(0, 1), 2, 30, 100);
        assert!(matches!(big, Err(PcaError::BudgetExceeded { .. })));
        let w3 = SiteSet::interval(0, 1);
        let all: Vec<_> = enumerate_measures(&w3, 2, 5, 1000).unwrap().collect();
        assert_eq!(all.len() as u128, composition_count(5, 4));
        assert!(all.windows(2).all(|p| p[0].counts > p[1].counts));
    }

    #[test]
    fn norm_examples() {
        let b = SiteSet::from_1d(&[0]);
        let id = PcaRule::deterministic(&LocalRule::identity(Alphabet::binary(), 1));
        let nu = RationalWindowMeasure::new(b.clone(), 2, vec![3, 5]).unwrap();
        assert_eq!(restricted_invariance_norm(&nu, &id, &b).unwrap(), 0.0);
        let pca = xor_flip(0.2);
        let point = RationalWindowMeasure::new(SiteSet::interval(0, 1), 2, vec![1, 0, 0, 0]).unwrap();
        assert!((restricted_invariance_norm(&point, &pca, &b).unwrap() - 0.2).abs() < 1e-12);
        let wrong = RationalWindowMeasure::new(b.clone(), 2, vec![1, 1]).unwrap();
        assert!(restricted_invariance_norm(&wrong, &pca, &b).is_err());
    }

    #[test]
    fn uniform_is_invariant_for_permutive_rules() {
        let rule = build_zoo("permutive_demo", &ZooParams::default()).unwrap();
        let noise = NoiseKernel::new(
            Alphabet::cyclic(3).unwrap(),
            crate::noise::NoiseModel::Additive { q: vec![0.6, 0.3, 0.1] },
        )
        .unwrap();
        let pca = compose_pca(&rule, &noise).unwrap();
        let b = SiteSet::interval(0, 1);
        let nbw = b.minkowski_sum(pca.neighborhood().offsets());
        let nu = RationalWindowMeasure::new(nbw.clone(), 3, vec![1; 3usize.pow(nbw.len() as u32)]).unwrap();
        assert!(restricted_invariance_norm(&nu, &pca, &b).unwrap() < 1e-12);
    }

    #[test]
    fn identity_flip_half() {
        let id = LocalRule::identity(Alphabet::binary(), 1);
        let pca = compose_pca(&id, &NoiseKernel::symmetric_flip(0.5).unwrap()).unwrap();
        let target = TargetPattern {
            sites: SiteSet::from_1d(&[0]),
            symbols: vec![1],
        };
        let r = approximate_invariant(&pca, &target, &InvariantSearch::new(4)).unwrap();
        assert!(r.value > 0.25 && r.value < 0.75);
        assert!((r.value - 0.5).abs() < 0.25);
    }

    #[test]
    fn deterministic_xor_exhausts_budget() {
        let det = PcaRule::deterministic(&build_zoo("xor", &ZooParams::default()).unwrap());
        let target = TargetPattern {
            sites: SiteSet::from_1d(&[0]),
            symbols: vec![1],
        };
        let search = InvariantSearch {
            n: 3,
            budget: 100_000,
        };
        assert!(matches!(
            approximate_invariant(&det, &target, &search),
            Err(PcaError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn scan_matches_enumeration() {
        let pca = xor_flip(0.3);
        let b = SiteSet::from_1d(&[0]);
        let sys = InvarianceSystem::new(&pca, &b).unwrap();
        let hits = vec![false, false, true, true];
        let k = 9;
        let r = scan_round(&sys.defect, sys.cols(), &hits, k, 0.2);
        let mut count = 0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for nu in enumerate_measures(&sys.window, 2, k, 1 << 20).unwrap() {
            if restricted_invariance_norm(&nu, &pca, &b).unwrap() < 0.2 {
                count += 1;
                let v = (nu.counts[2] + nu.counts[3]) as f64 / k as f64;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert_eq!(r.count, count);
        assert_eq!((r.min, r.max), (lo, hi));
    }
}
