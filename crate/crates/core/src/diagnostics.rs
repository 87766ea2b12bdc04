//! Monte Carlo and exact diagnostics: distance from stationarity, coupling
//! and discrepancy decay, entropy, correlations and directed percolation.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cftp::EnvelopeRunner;
use crate::engine::{build_update_function, RandomField, Stepper};
use crate::error::{PcaError, Result};
use crate::lattice::{
    decode_pattern, encode_pattern, entropy_nats, pattern_count, total_variation, Configuration,
    SiteSet,
};
use crate::noise::{is_permutation_noise, noise_matrix, NoiseKernel, NoiseModel, PcaRule};
use crate::rules::{glider_layers, LocalRule, Neighborhood};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub label: String,
    pub times: Vec<u64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl DecayCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value,stderr\n");
        for ((t, v), e) in self.times.iter().zip(&self.values).zip(&self.stderr) {
            s.push_str(&format!("{t},{v},{e}\n"));
        }
        s
    }
}

/// Cell indices of a window on a finite geometry.
fn window_cells(config: &Configuration, window: &SiteSet) -> Result<Vec<usize>> {
    window
        .iter()
        .map(|s| config.geometry().index_of(s).ok_or_else(|| PcaError::OutsideRegion(s.clone())))
        .collect()
}

fn window_pattern(cells: &[u8], idx: &[usize], q: usize) -> usize {
    idx.iter().fold(0usize, |a, &i| a * q + cells[i] as usize)
}

fn window_patterns(q: usize, window: &SiteSet) -> Result<usize> {
    pattern_count(q, window.len())
        .filter(|&n| n <= 1 << 20)
        .ok_or(PcaError::BudgetExceeded {
            what: "window pattern count",
            needed: (q as u128).saturating_pow(window.len() as u32),
            budget: 1 << 20,
        })
}

/// Empirical `d_A(t)`: the largest window total variation between the laws
/// started from any two of `inits`, for `t = 0..=horizon`. Replica `r` is
/// driven by `field.derive(r)`.
pub fn tv_decay(
    pca: &PcaRule,
    window: &SiteSet,
    inits: &[Configuration],
    horizon: u64,
    replicas: u64,
    field: &RandomField,
) -> Result<DecayCurve> {
    if inits.len() < 2 {
        return Err(PcaError::InvalidParams(
            "at least two initial configurations are needed".into(),
        ));
    }
    if replicas == 0 {
        return Err(PcaError::EmptySamples);
    }
    let geometry = inits[0].geometry();
    for x in inits {
        if x.geometry() != geometry {
            return Err(PcaError::GeometryMismatch(
                "initial configurations do not share a geometry".into(),
            ));
        }
        pca.alphabet().compatible(x.alphabet())?;
    }
    let q = pca.alphabet().size();
    let np = window_patterns(q, window)?;
    let idx = window_cells(&inits[0], window)?;
    let stepper = Stepper::new(&build_update_function(pca), geometry)?;
    let h = horizon as usize + 1;
    let block = np * h;
    let counts = (0..replicas)
        .into_par_iter()
        .fold(
            || vec![0u64; block * inits.len()],
            |mut acc, r| {
                let f = field.derive(r);
                for (i, x) in inits.iter().enumerate() {
                    let mut cells = x.cells().to_vec();
                    let mut next = vec![0u8; cells.len()];
                    acc[i * block + window_pattern(&cells, &idx, q)] += 1;
                    for t in 1..h {
                        stepper.step_cells(&cells, &mut next, &f, t as i64);
                        std::mem::swap(&mut cells, &mut next);
                        acc[i * block + t * np + window_pattern(&cells, &idx, q)] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; block * inits.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = replicas as f64;
    let mut values = Vec::with_capacity(h);
    let mut stderr = Vec::with_capacity(h);
    for t in 0..h {
        let laws: Vec<Vec<f64>> = (0..inits.len())
            .map(|i| {
                counts[i * block + t * np..i * block + (t + 1) * np]
                    .iter()
                    .map(|&c| c as f64 / n)
                    .collect()
            })
            .collect();
        let (mut best, mut err) = (0.0f64, 0.0f64);
        for i in 0..laws.len() {
            for j in i + 1..laws.len() {
                let tv = total_variation(&laws[i], &laws[j]);
                if tv >= best {
                    best = tv;
                    let var: f64 = laws[i]
                        .iter()
                        .chain(&laws[j])
                        .map(|p| p * (1.0 - p))
                        .sum();
                    err = 0.5 * (var / n).sqrt();
                }
            }
        }
        values.push(best);
        stderr.push(err);
    }
    Ok(DecayCurve {
        label: "tv_distance".into(),
        times: (0..=horizon).collect(),
        values,
        stderr,
    })
}

/// `1 − p_t` for `t = 1..=horizon`: the fraction of seeds whose envelope
/// run from all-`?` at time `−t` still shows `?` in the window at time 0.
pub fn coupling_decay(
    pca: &PcaRule,
    window: &SiteSet,
    horizon: u64,
    seeds: u64,
    field: &RandomField,
) -> Result<DecayCurve> {
    if seeds == 0 {
        return Err(PcaError::EmptySamples);
    }
    let runner = EnvelopeRunner::new(pca, window)?;
    let unresolved = (0..seeds)
        .into_par_iter()
        .fold(
            || vec![0u64; horizon as usize],
            |mut acc, s| {
                let f = field.derive(s);
                for t in 1..=horizon {
                    if runner.run(&f, t).iter().any(Option::is_none) {
                        acc[t as usize - 1] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; horizon as usize],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = seeds as f64;
    let values: Vec<f64> = unresolved.iter().map(|&c| c as f64 / n).collect();
    Ok(DecayCurve {
        label: "one_minus_p_t".into(),
        times: (1..=horizon).collect(),
        stderr: values.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect(),
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCurve {
    pub curve: DecayCurve,
    /// `(1−ε)^t (2rt+1)^d N` at each time.
    pub envelope: Vec<f64>,
    pub eps: f64,
    pub layers: usize,
}

/// Mean single-site discrepancy `E‖X_k^t − Y_k^t‖₁` between two copies of a
/// glider PCA driven by the same field, averaged over sites and replicas.
pub fn discrepancy_decay(
    pca: &PcaRule,
    x0: &Configuration,
    y0: &Configuration,
    horizon: u64,
    replicas: u64,
    field: &RandomField,
) -> Result<DiscrepancyCurve> {
    let (rule, noise) = pca.decomposition().ok_or(PcaError::NotDecomposable)?;
    let (birth, death) = match noise.model() {
        NoiseModel::BirthDeath { birth, death } => (birth, death),
        _ => {
            return Err(PcaError::InvalidParams(
                "discrepancy coupling needs birth-death noise".into(),
            ))
        }
    };
    let layers = glider_layers(pca.alphabet())
        .filter(|&l| l == birth.len())
        .ok_or_else(|| PcaError::InvalidParams("not a glider alphabet".into()))?;
    if replicas == 0 {
        return Err(PcaError::EmptySamples);
    }
    if x0.geometry() != y0.geometry() {
        return Err(PcaError::GeometryMismatch(
            "initial configurations do not share a geometry".into(),
        ));
    }
    let stepper = Stepper::new(&build_update_function(pca), x0.geometry())?;
    let h = horizon as usize + 1;
    let cells = x0.len() as f64;
    let per_replica: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let f = field.derive(r);
            let mut x = x0.cells().to_vec();
            let mut y = y0.cells().to_vec();
            let mut nx = vec![0u8; x.len()];
            let mut ny = vec![0u8; y.len()];
            let mut d = Vec::with_capacity(h);
            let disc = |a: &[u8], b: &[u8]| {
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (p ^ q).count_ones() as f64)
                    .sum::<f64>()
                    / cells
            };
            d.push(disc(&x, &y));
            for t in 1..h {
                stepper.step_cells(&x, &mut nx, &f, t as i64);
                stepper.step_cells(&y, &mut ny, &f, t as i64);
                std::mem::swap(&mut x, &mut nx);
                std::mem::swap(&mut y, &mut ny);
                d.push(disc(&x, &y));
            }
            d
        })
        .collect();
    // summed in replica order so results do not depend on thread scheduling
    let mut sum = vec![0.0; h];
    let mut sq = vec![0.0; h];
    for d in &per_replica {
        for (t, &v) in d.iter().enumerate() {
            sum[t] += v;
            sq[t] += v * v;
        }
    }
    let n = replicas as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr = values
        .iter()
        .zip(&sq)
        .map(|(m, q)| {
            let var = if n > 1.0 { (q / n - m * m).max(0.0) * n / (n - 1.0) } else { 0.0 };
            (var / n).sqrt()
        })
        .collect();
    let eps = birth
        .iter()
        .zip(death)
        .map(|(b, d)| (b + d).min(2.0 - b - d))
        .fold(f64::INFINITY, f64::min);
    let r = rule.neighborhood().radius() as f64;
    let dim = rule.neighborhood().dim() as i32;
    let envelope = (0..=horizon)
        .map(|t| {
            let t = t as f64;
            (1.0 - eps).powf(t) * (2.0 * r * t + 1.0).powi(dim) * layers as f64
        })
        .collect();
    Ok(DiscrepancyCurve {
        curve: DecayCurve {
            label: "mean_site_discrepancy".into(),
            times: (0..=horizon).collect(),
            values,
            stderr,
        },
        envelope,
        eps,
        layers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub window_sizes: Vec<usize>,
    /// Plug-in block entropies in nats.
    pub block_entropies: Vec<f64>,
    pub per_site: Vec<f64>,
    pub defect_checks: Vec<bool>,
}

/// Plug-in entropies of the blocks `[j, j+w)` of one-dimensional samples,
/// pooled over every start `j` that fits.
pub fn block_entropy(samples: &[Vec<u8>], q: usize, window_sizes: &[usize]) -> Result<EntropyReport> {
    if samples.is_empty() || samples.iter().all(Vec::is_empty) {
        return Err(PcaError::EmptySamples);
    }
    if let Some(&s) = samples.iter().flatten().find(|&&s| s as usize >= q) {
        return Err(PcaError::InvalidSymbol { symbol: s as usize, size: q });
    }
    let mut report = EntropyReport {
        window_sizes: window_sizes.to_vec(),
        block_entropies: Vec::new(),
        per_site: Vec::new(),
        defect_checks: Vec::new(),
    };
    for &w in window_sizes {
        if w == 0 {
            return Err(PcaError::InvalidParams("window size must be positive".into()));
        }
        let np = pattern_count(q, w).filter(|&n| n <= 1 << 24).ok_or(PcaError::BudgetExceeded {
            what: "block pattern count",
            needed: (q as u128).saturating_pow(w as u32),
            budget: 1 << 24,
        })?;
        let mut counts = vec![0u64; np];
        let mut total = 0u64;
        for s in samples {
            for block in s.windows(w) {
                counts[encode_pattern(block, q)] += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(PcaError::EmptySamples);
        }
        if (total as f64) < 10.0 * np as f64 {
            warn!("{total} blocks of length {w} for {np} patterns; plug-in entropy is biased low");
        }
        let p: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let h = entropy_nats(&p);
        report.block_entropies.push(h);
        report.per_site.push(h / w as f64);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectTrial {
    /// `H(X_J)`.
    pub h_in: f64,
    /// `H((FX)_J)`.
    pub h_out: f64,
    /// `6r·ln|S|`.
    pub c: f64,
    pub holds: bool,
}

/// Largest support enumerated exactly by [`entropy_defect_check`].
pub const DEFECT_SUPPORT_CAP: usize = 1 << 22;

/// Support interval of the trial laws for window `J = [0, len)`: the hull of
/// `J` and `J + N`.
pub fn defect_support(rule: &LocalRule, len: usize) -> Result<(i64, i64)> {
    let (lo, hi) = rule.neighborhood().extent_1d()?;
    Ok((lo.min(0), (len as i64 - 1 + hi).max(len as i64 - 1)))
}

/// Exact check of `H((FX)_J) ≥ H(X_J) − 6r·ln|S|` for each trial law of `X`
/// on [`defect_support`]. The bound is only claimed for surjective rules.
pub fn entropy_defect_check(rule: &LocalRule, trials: &[Vec<f64>], len: usize) -> Result<Vec<DefectTrial>> {
    let q = rule.alphabet().size();
    let (lo, hi) = defect_support(rule, len)?;
    let width = (hi - lo + 1) as usize;
    let support = pattern_count(q, width)
        .filter(|&n| n <= DEFECT_SUPPORT_CAP)
        .ok_or(PcaError::BudgetExceeded {
            what: "entropy defect support",
            needed: (q as u128).saturating_pow(width as u32),
            budget: DEFECT_SUPPORT_CAP as u128,
        })?;
    let np = q.pow(len as u32);
    let c = 6.0 * rule.neighborhood().radius() as f64 * (q as f64).ln();
    let offsets: Vec<i64> = rule.neighborhood().offsets().iter().map(|o| o[0]).collect();
    // precompute the J-pattern of X and of FX for every support pattern
    let maps: Vec<(usize, usize)> = (0..support)
        .into_par_iter()
        .map(|i| {
            let x = decode_pattern(i, width, q);
            let at = |k: i64| x[(k - lo) as usize];
            let mut input = vec![0u8; offsets.len()];
            let (mut xin, mut xout) = (0usize, 0usize);
            for k in 0..len as i64 {
                for (slot, o) in input.iter_mut().zip(&offsets) {
                    *slot = at(k + o);
                }
                xin = xin * q + at(k) as usize;
                xout = xout * q + rule.eval(&input) as usize;
            }
            (xin, xout)
        })
        .collect();
    trials
        .iter()
        .map(|p| {
            if p.len() != support {
                return Err(PcaError::WindowMismatch(format!(
                    "trial law has {} entries, support needs {support}",
                    p.len()
                )));
            }
            crate::error::check_distribution(p, 1e-9, "trial law")?;
            let mut pin = vec![0.0; np];
            let mut pout = vec![0.0; np];
            for (&(a, b), &w) in maps.iter().zip(p) {
                pin[a] += w;
                pout[b] += w;
            }
            let (h_in, h_out) = (entropy_nats(&pin), entropy_nats(&pout));
            Ok(DefectTrial {
                h_in,
                h_out,
                c,
                holds: h_out >= h_in - c - 1e-12,
            })
        })
        .collect()
}

/// Product law on the support from per-site marginals, in pattern order.
pub fn product_law(marginals: &[Vec<f64>]) -> Vec<f64> {
    marginals.iter().fold(vec![1.0], |acc, m| {
        acc.iter()
            .flat_map(|&a| m.iter().map(move |&b| a * b))
            .collect()
    })
}

/// Largest simplex grid scanned by [`entropy_gain_bound`].
pub const GAIN_GRID_CAP: usize = 20_000_000;

fn for_each_composition(total: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(rest: usize, parts: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() + 1 == parts {
            cur.push(rest);
            f(cur);
            cur.pop();
            return;
        }
        for a in (0..=rest).rev() {
            cur.push(a);
            rec(rest - a, parts, cur, f);
            cur.pop();
        }
    }
    rec(total, parts, &mut Vec::with_capacity(parts), f);
}

/// Grid minimum of `H(pθ) − H(p)` over laws `p` with `H(p) ≤ ln|S| − ε`,
/// on the simplex grid of step `resolution`.
pub fn entropy_gain_bound(noise: &NoiseKernel, eps: f64, resolution: f64) -> Result<f64> {
    let q = noise.alphabet().size();
    if q > 4 {
        return Err(PcaError::InvalidParams(format!(
            "grid search supports at most 4 symbols, got {q}"
        )));
    }
    let theta = noise_matrix(noise);
    if !is_permutation_noise(&theta, q) {
        return Err(PcaError::InvalidParams(
            "entropy gain needs additive or permutation noise".into(),
        ));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(PcaError::InvalidParams("resolution must lie in (0, 1]".into()));
    }
    let hmax = (q as f64).ln();
    if !(0.0..=hmax + 1e-12).contains(&eps) {
        return Err(PcaError::InvalidParams(format!(
            "ε must lie in [0, ln|S|] = [0, {hmax}]"
        )));
    }
    let k = (1.0 / resolution).round() as usize;
    let points = binomial(k + q - 1, q - 1);
    if points > GAIN_GRID_CAP as u128 {
        return Err(PcaError::BudgetExceeded {
            what: "entropy grid",
            needed: points,
            budget: GAIN_GRID_CAP as u128,
        });
    }
    let mut best = f64::INFINITY;
    let mut p = vec![0.0; q];
    let mut out = vec![0.0; q];
    for_each_composition(k, q, &mut |c| {
        for (pi, &ci) in p.iter_mut().zip(c) {
            *pi = ci as f64 / k as f64;
        }
        let h = entropy_nats(&p);
        if h > hmax - eps + 1e-12 {
            return;
        }
        for (b, o) in out.iter_mut().enumerate() {
            *o = (0..q).map(|a| p[a] * theta[a * q + b]).sum();
        }
        best = best.min(entropy_nats(&out) - h);
    });
    Ok(best.max(0.0))
}

/// `ρ(ε) = [ε/(2h_max − ε)]·δ̂(ε/2)`.
pub fn entropy_contraction_rate(noise: &NoiseKernel, eps: f64, resolution: f64) -> Result<f64> {
    let hmax = (noise.alphabet().size() as f64).ln();
    let delta = entropy_gain_bound(noise, eps / 2.0, resolution)?;
    Ok(eps / (2.0 * hmax - eps) * delta)
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `|π̂([u] ∩ σ^{−k}[v]) − π̂([u])π̂([v])|` per shift, from one-dimensional
/// samples where `u` sits at 0 and `v` at `k`.
pub fn correlation_decay(samples: &[Vec<u8>], u: &[u8], v: &[u8], shifts: &[usize]) -> Result<DecayCurve> {
    if samples.is_empty() {
        return Err(PcaError::EmptySamples);
    }
    let n = samples.len() as f64;
    let hit = |s: &[u8], pat: &[u8], at: usize| s.get(at..at + pat.len()) == Some(pat);
    let pu = samples.iter().filter(|s| hit(s, u, 0)).count() as f64 / n;
    let mut values = Vec::with_capacity(shifts.len());
    let mut stderr = Vec::with_capacity(shifts.len());
    for &k in shifts {
        if samples.iter().any(|s| s.len() < k + v.len() || s.len() < u.len()) {
            return Err(PcaError::WindowMismatch(format!(
                "samples too short for shift {k}"
            )));
        }
        let pv = samples.iter().filter(|s| hit(s, v, k)).count() as f64 / n;
        let puv = samples.iter().filter(|s| hit(s, u, 0) && hit(s, v, k)).count() as f64 / n;
        let sd = |p: f64| (p * (1.0 - p) / n).sqrt();
        values.push((puv - pu * pv).abs());
        stderr.push(sd(puv) + pu * sd(pv) + pv * sd(pu));
    }
    Ok(DecayCurve {
        label: "correlation".into(),
        times: shifts.iter().map(|&k| k as u64).collect(),
        values,
        stderr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub p: f64,
    pub horizon: u64,
    pub trials: u64,
    pub frequency: f64,
    pub stderr: f64,
}

/// Directed site percolation: site `(k, t)` is open when
/// `U(t, k, 0) < p` under `field.derive(trial)`, and `(k, t)` leads to
/// `(k − n, t + 1)` for `n ∈ N`. A trial survives when the open cluster of
/// an open origin reaches time `horizon`.
pub fn percolation_survival(
    p: f64,
    nb: &Neighborhood,
    horizon: u64,
    trials: u64,
    field: &RandomField,
) -> Result<SurvivalEstimate> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PcaError::InvalidParams(format!("p = {p} outside [0, 1]")));
    }
    if trials == 0 {
        return Err(PcaError::EmptySamples);
    }
    let survived = (0..trials)
        .into_par_iter()
        .filter(|&i| survives(p, nb, horizon, &field.derive(i)))
        .count() as f64;
    let n = trials as f64;
    let freq = survived / n;
    Ok(SurvivalEstimate {
        p,
        horizon,
        trials,
        frequency: freq,
        stderr: (freq * (1.0 - freq) / n).sqrt(),
    })
}

fn survives(p: f64, nb: &Neighborhood, horizon: u64, f: &RandomField) -> bool {
    let d = nb.dim();
    let open = |t: u64, k: &[i64]| f.uniform(t as i64, k, 0) < p;
    let origin = vec![0i64; d];
    if !open(0, &origin) {
        return false;
    }
    let mut active = vec![origin];
    for t in 1..=horizon {
        let mut next: Vec<Vec<i64>> = active
            .iter()
            .flat_map(|k| {
                nb.offsets()
                    .iter()
                    .map(move |n| k.iter().zip(n).map(|(a, b)| a - b).collect())
            })
            .collect();
        next.sort_unstable();
        next.dedup();
        next.retain(|k| open(t, k));
        if next.is_empty() {
            return false;
        }
        active = next;
    }
    true
}
