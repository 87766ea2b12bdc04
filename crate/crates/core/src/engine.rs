//! Forward simulation through update functions driven by a counter-based
//! random field, plus exact transition matrices of small tori.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PcaError, Result};
use crate::lattice::{decode_pattern, pattern_count, Configuration, Geometry};
use crate::noise::{birth_death_update, noise_matrix, NoiseModel, PcaRule};
use crate::rules::LocalRule;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform variables `U(t, k, channel)` computed by hashing the coordinates.
/// Repeated evaluation at the same point returns the same value, so
/// backward samplers can revisit the past without storing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomField {
    seed: u64,
}

impl RandomField {
    pub fn new(seed: u64) -> Self {
        RandomField { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent field for sub-stream `stream` (replica, trial, ...).
    pub fn derive(&self, stream: u64) -> RandomField {
        RandomField {
            seed: splitmix(splitmix(self.seed ^ 0xD1B5_4A32_D192_ED03) ^ stream),
        }
    }

    pub fn bits(&self, t: i64, site: &[i64], channel: u32) -> u64 {
        let mut h = splitmix(self.seed);
        h = splitmix(h ^ t as u64);
        for &c in site {
            h = splitmix(h ^ c as u64);
        }
        splitmix(h ^ channel as u64)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&self, t: i64, site: &[i64], channel: u32) -> f64 {
        (self.bits(t, site, channel) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_1d(&self, t: i64, k: i64, channel: u32) -> f64 {
        self.uniform(t, &[k], channel)
    }
}

/// One `[start, end)` piece of `[0, 1)` assigned to a symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub symbol: u8,
}

/// A deterministic map `u(a⃗; U)` with `P(u(a⃗; U) = b) = φ(a⃗)(b)`.
///
/// `[0, core_total)` is shared by every input: the piece of symbol `b` there
/// has length `min_a⃗ φ(a⃗)(b)`. The rest of `[0, 1)` holds the input-specific
/// remainders in symbol order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateFunction {
    pca: PcaRule,
    core: Vec<Segment>,
    core_total: f64,
    remainders: Vec<Vec<Segment>>,
}

pub fn build_update_function(pca: &PcaRule) -> UpdateFunction {
    let q = pca.alphabet().size();
    let rows = pca.rows();
    let mins: Vec<f64> = (0..q)
        .map(|b| (0..rows).map(|p| pca.row(p)[b]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut core = Vec::new();
    let mut acc = 0.0;
    for (b, &len) in mins.iter().enumerate() {
        if len > 0.0 {
            core.push(Segment {
                start: acc,
                end: acc + len,
                symbol: b as u8,
            });
            acc += len;
        }
    }
    let core_total = acc;
    let remainders = (0..rows)
        .map(|p| {
            let row = pca.row(p);
            let mut acc = core_total;
            let mut segs = Vec::new();
            for b in 0..q {
                let len = row[b] - mins[b];
                if len > 0.0 {
                    segs.push(Segment {
                        start: acc,
                        end: acc + len,
                        symbol: b as u8,
                    });
                    acc += len;
                }
            }
            segs
        })
        .collect();
    UpdateFunction {
        pca: pca.clone(),
        core,
        core_total,
        remainders,
    }
}

fn pick(segs: &[Segment], u: f64) -> Option<u8> {
    segs.iter().find(|s| u < s.end).map(|s| s.symbol)
}

impl UpdateFunction {
    pub fn pca(&self) -> &PcaRule {
        &self.pca
    }

    pub fn core(&self) -> &[Segment] {
        &self.core
    }

    pub fn core_total(&self) -> f64 {
        self.core_total
    }

    /// Pieces of `[0, 1)` for one input pattern, core first.
    pub fn segments(&self, pattern: usize) -> Vec<Segment> {
        let mut s = self.core.clone();
        s.extend_from_slice(&self.remainders[pattern]);
        s
    }

    /// The symbol shared by every input at this `u`, if `u` lies in the core.
    pub fn certain(&self, u: f64) -> Option<u8> {
        if u < self.core_total {
            pick(&self.core, u)
        } else {
            None
        }
    }

    pub fn sample(&self, pattern: usize, u: f64) -> u8 {
        if let Some(b) = self.certain(u) {
            return b;
        }
        let rem = &self.remainders[pattern];
        pick(rem, u)
            .or_else(|| rem.last().map(|s| s.symbol))
            .or_else(|| self.core.last().map(|s| s.symbol))
            .expect("a row has positive mass")
    }
}

/// A PCA bound to a finite geometry, with the neighbor stencil precomputed.
#[derive(Clone, Debug)]
pub struct Stepper {
    uf: UpdateFunction,
    geometry: Geometry,
    stencil: Vec<usize>,
    boundary: u8,
    layered: Option<Layered>,
}

#[derive(Clone, Debug)]
struct Layered {
    rule: LocalRule,
    birth: Vec<f64>,
    death: Vec<f64>,
}

impl Stepper {
    pub fn new(uf: &UpdateFunction, geometry: &Geometry) -> Result<Self> {
        let nb = uf.pca.neighborhood();
        if nb.dim() != geometry.dim() {
            return Err(PcaError::GeometryMismatch(format!(
                "rule of dimension {} on a lattice of dimension {}",
                nb.dim(),
                geometry.dim()
            )));
        }
        let stencil = geometry.stencil(nb.offsets())?;
        let boundary = match geometry {
            Geometry::Region { boundary, .. } => *boundary,
            Geometry::Torus { .. } => 0,
        };
        let layered = uf.pca.decomposition().and_then(|(rule, noise)| match noise.model() {
            NoiseModel::BirthDeath { birth, death } => Some(Layered {
                rule: rule.clone(),
                birth: birth.clone(),
                death: death.clone(),
            }),
            _ => None,
        });
        Ok(Stepper {
            uf: uf.clone(),
            geometry: geometry.clone(),
            stencil,
            boundary,
            layered,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Input pattern index of every cell.
    pub fn patterns(&self, cells: &[u8]) -> Vec<usize> {
        let q = self.uf.pca.alphabet().size();
        let m = self.uf.pca.neighborhood().len();
        self.stencil
            .chunks(m)
            .map(|nb| {
                nb.iter().fold(0usize, |acc, &j| {
                    let s = if j == usize::MAX { self.boundary } else { cells[j] };
                    acc * q + s as usize
                })
            })
            .collect()
    }

    /// Synchronous update producing time `t` from `cells`. Site `k` of a
    /// finite geometry uses the flat cell index as its field coordinate.
    /// Birth-death noise draws one variable per layer (channel `i`), all
    /// other PCA use channel 0 through the update function.
    pub fn step_cells(&self, cells: &[u8], out: &mut [u8], field: &RandomField, t: i64) {
        let patterns = self.patterns(cells);
        match &self.layered {
            Some(l) => {
                for (k, (&p, o)) in patterns.iter().zip(out.iter_mut()).enumerate() {
                    let a = l.rule.table()[p];
                    let mut b = 0u8;
                    for (i, (&beta, &delta)) in l.birth.iter().zip(&l.death).enumerate() {
                        let u = field.uniform_1d(t, k as i64, i as u32);
                        if birth_death_update((a >> i) & 1 == 1, u, beta, delta) {
                            b |= 1 << i;
                        }
                    }
                    *o = b;
                }
            }
            None => {
                for (k, (&p, o)) in patterns.iter().zip(out.iter_mut()).enumerate() {
                    *o = self.uf.sample(p, field.uniform_1d(t, k as i64, 0));
                }
            }
        }
    }

    pub fn step(&self, config: &Configuration, field: &RandomField, t: i64) -> Result<Configuration> {
        if config.geometry() != &self.geometry {
            return Err(PcaError::GeometryMismatch(
                "configuration does not match the stepper geometry".into(),
            ));
        }
        let mut out = vec![0u8; config.len()];
        self.step_cells(config.cells(), &mut out, field, t);
        Ok(config.with_cells(out))
    }

    /// Configurations at times `t0 .. t0 + steps` (inclusive of the start).
    pub fn run(
        &self,
        config: &Configuration,
        field: &RandomField,
        t0: i64,
        steps: usize,
    ) -> Result<Vec<Configuration>> {
        let mut frames = vec![config.clone()];
        for s in 0..steps {
            let next = self.step(frames.last().expect("nonempty"), field, t0 + s as i64 + 1)?;
            frames.push(next);
        }
        Ok(frames)
    }
}

/// One synchronous step producing time `t`.
pub fn step(
    config: &Configuration,
    uf: &UpdateFunction,
    field: &RandomField,
    t: i64,
) -> Result<Configuration> {
    uf.pca.alphabet().compatible(config.alphabet())?;
    Stepper::new(uf, config.geometry())?.step(config, field, t)
}

/// Matrices up to this many states are stored densely.
pub const DENSE_STATE_CAP: usize = 1 << 11;
pub const DEFAULT_STATE_BUDGET: usize = 1 << 16;

/// Transition kernel of a PCA on a ring of `n` sites. States are window
/// pattern indices over sites `0..n`.
#[derive(Clone, Debug)]
pub enum TransitionMatrix {
    Dense { states: usize, p: Vec<f64> },
    /// Deterministic image then independent per-site noise.
    Decomposed {
        n: usize,
        q: usize,
        image: Vec<u32>,
        theta: Vec<f64>,
    },
    /// Per-site input patterns of every state.
    Product {
        n: usize,
        q: usize,
        pca: PcaRule,
        patterns: Vec<u32>,
    },
}

fn ring_patterns(pca: &PcaRule, n: usize) -> Result<(usize, Vec<u32>)> {
    let q = pca.alphabet().size();
    let states = pattern_count(q, n).ok_or(PcaError::BudgetExceeded {
        what: "torus states",
        needed: u128::MAX,
        budget: usize::MAX as u128,
    })?;
    let geometry = Geometry::ring(n);
    let stencil = geometry.stencil(pca.neighborhood().offsets())?;
    let m = pca.neighborhood().len();
    let mut out = Vec::with_capacity(states * n);
    for x in 0..states {
        let cells = decode_pattern(x, n, q);
        for nb in stencil.chunks(m) {
            out.push(nb.iter().fold(0usize, |a, &j| a * q + cells[j] as usize) as u32);
        }
    }
    Ok((states, out))
}

pub fn exact_transition_matrix(pca: &PcaRule, n: usize) -> Result<TransitionMatrix> {
    exact_transition_matrix_with_budget(pca, n, DEFAULT_STATE_BUDGET)
}

pub fn exact_transition_matrix_with_budget(
    pca: &PcaRule,
    n: usize,
    budget: usize,
) -> Result<TransitionMatrix> {
    if pca.neighborhood().dim() != 1 {
        return Err(PcaError::NotOneDimensional(pca.neighborhood().dim()));
    }
    let q = pca.alphabet().size();
    let states = pattern_count(q, n).filter(|&s| s <= budget).ok_or(PcaError::BudgetExceeded {
        what: "torus states",
        needed: (q as u128).saturating_pow(n as u32),
        budget: budget as u128,
    })?;
    let (_, patterns) = ring_patterns(pca, n)?;
    if states <= DENSE_STATE_CAP {
        let mut p = vec![0.0; states * states];
        for x in 0..states {
            let pats = &patterns[x * n..(x + 1) * n];
            let mut row = vec![1.0];
            for &pt in pats {
                let phi = pca.row(pt as usize);
                row = row.iter().flat_map(|&a| phi.iter().map(move |&b| a * b)).collect();
            }
            p[x * states..(x + 1) * states].copy_from_slice(&row);
        }
        return Ok(TransitionMatrix::Dense { states, p });
    }
    if let Some((rule, noise)) = pca.decomposition() {
        let image = (0..states)
            .map(|x| {
                patterns[x * n..(x + 1) * n]
                    .iter()
                    .fold(0usize, |a, &pt| a * q + rule.table()[pt as usize] as usize)
                    as u32
            })
            .collect();
        return Ok(TransitionMatrix::Decomposed {
            n,
            q,
            image,
            theta: noise_matrix(noise),
        });
    }
    Ok(TransitionMatrix::Product {
        n,
        q,
        pca: pca.clone(),
        patterns,
    })
}

impl TransitionMatrix {
    pub fn states(&self) -> usize {
        match self {
            TransitionMatrix::Dense { states, .. } => *states,
            TransitionMatrix::Decomposed { image, .. } => image.len(),
            TransitionMatrix::Product { patterns, n, .. } => patterns.len() / n,
        }
    }

    /// The distribution `π P`.
    pub fn apply_left(&self, pi: &[f64]) -> Vec<f64> {
        match self {
            TransitionMatrix::Dense { states, p } => {
                let s = *states;
                (0..s)
                    .into_par_iter()
                    .map(|y| (0..s).map(|x| pi[x] * p[x * s + y]).sum())
                    .collect()
            }
            TransitionMatrix::Decomposed { n, q, image, theta } => {
                let mut cur = vec![0.0; pi.len()];
                for (x, &w) in pi.iter().enumerate() {
                    cur[image[x] as usize] += w;
                }
                // per-site noise: site j has stride q^(n-1-j)
                let (n, q) = (*n, *q);
                for j in 0..n {
                    let stride = q.pow((n - 1 - j) as u32);
                    let mut next = vec![0.0; cur.len()];
                    next.par_chunks_mut(stride * q)
                        .zip(cur.par_chunks(stride * q))
                        .for_each(|(dst, src)| {
                            for a in 0..q {
                                for b in 0..q {
                                    let w = theta[a * q + b];
                                    if w == 0.0 {
                                        continue;
                                    }
                                    for r in 0..stride {
                                        dst[b * stride + r] += w * src[a * stride + r];
                                    }
                                }
                            }
                        });
                    cur = next;
                }
                cur
            }
            TransitionMatrix::Product { n, q, pca, patterns } => {
                let (n, q) = (*n, *q);
                let states = pi.len();
                let mut out = vec![0.0; states];
                for x in 0..states {
                    if pi[x] == 0.0 {
                        continue;
                    }
                    let mut row = vec![pi[x]];
                    for &pt in &patterns[x * n..(x + 1) * n] {
                        let phi = pca.row(pt as usize);
                        row = row.iter().flat_map(|&a| phi.iter().map(move |&b| a * b)).collect();
                    }
                    for (o, r) in out.iter_mut().zip(&row) {
                        *o += r;
                    }
                }
                debug_assert_eq!(out.len(), q.pow(n as u32));
                out
            }
        }
    }

    /// Row `x` as a dense vector.
    pub fn row(&self, x: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.states()];
        e[x] = 1.0;
        self.apply_left(&e)
    }
}

pub const POWER_ITERATION_CAP: usize = 1_000_000;
pub const STATIONARY_TOL: f64 = 1e-12;

/// Power iteration from the uniform vector until `‖πP − π‖₁ < 1e-12`.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Vec<f64>> {
    stationary_distribution_with(p, STATIONARY_TOL, POWER_ITERATION_CAP)
}

pub fn stationary_distribution_with(
    p: &TransitionMatrix,
    tol: f64,
    cap: usize,
) -> Result<Vec<f64>> {
    let s = p.states();
    let mut pi = vec![1.0 / s as f64; s];
    let mut residual = f64::INFINITY;
    for it in 0..cap {
        let mut next = p.apply_left(&pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if residual < tol {
            log::debug!("power iteration converged after {} steps", it + 1);
            return Ok(pi);
        }
    }
    Err(PcaError::NonConvergence {
        iterations: cap,
        residual,
    })
}

/// Marginal of a ring distribution on the given cell indices.
pub fn ring_marginal(pi: &[f64], n: usize, q: usize, cells: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; q.pow(cells.len() as u32)];
    for (x, &w) in pi.iter().enumerate() {
        let c = decode_pattern(x, n, q);
        let j = cells.iter().fold(0usize, |a, &k| a * q + c[k] as usize);
        out[j] += w;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySide {
    /// Boundary word to the right of the window (left-permutive rules).
    Right,
    /// Boundary word to the left of the window (right-permutive rules).
    Left,
}

/// Kernel `P_w(x, z) = Π_k θ(y_k, z_k)` of a window of `k` cells with a
/// frozen boundary word `w` of length `m − 1`, where `y` is the rule's image
/// of `x` extended by `w`. Row-major `|S|^k × |S|^k`.
pub fn boundary_kernel_matrix(
    pca: &PcaRule,
    k: usize,
    boundary: &[u8],
    side: BoundarySide,
) -> Result<Vec<f64>> {
    let (rule, noise) = pca.decomposition().ok_or(PcaError::NotDecomposable)?;
    let nb = rule.neighborhood();
    if nb.dim() != 1 {
        return Err(PcaError::NotOneDimensional(nb.dim()));
    }
    if !nb.is_contiguous_1d() {
        return Err(PcaError::NonContiguous);
    }
    let m = nb.len();
    if boundary.len() != m - 1 {
        return Err(PcaError::InvalidParams(format!(
            "boundary word has length {}, expected {}",
            boundary.len(),
            m - 1
        )));
    }
    let q = pca.alphabet().size();
    if let Some(&s) = boundary.iter().find(|&&s| s as usize >= q) {
        return Err(PcaError::InvalidSymbol {
            symbol: s as usize,
            size: q,
        });
    }
    let states = pattern_count(q, k)
        .filter(|&s| s <= DENSE_STATE_CAP)
        .ok_or(PcaError::BudgetExceeded {
            what: "window states",
            needed: (q as u128).saturating_pow(k as u32),
            budget: DENSE_STATE_CAP as u128,
        })?;
    let theta = noise_matrix(noise);
    let mut p = vec![0.0; states * states];
    for x in 0..states {
        let cells = decode_pattern(x, k, q);
        let ext: Vec<u8> = match side {
            BoundarySide::Right => cells.iter().chain(boundary).copied().collect(),
            BoundarySide::Left => boundary.iter().chain(&cells).copied().collect(),
        };
        let mut row = vec![1.0];
        for j in 0..k {
            let y = rule.eval(&ext[j..j + m]) as usize;
            let th = &theta[y * q..(y + 1) * q];
            row = row.iter().flat_map(|&a| th.iter().map(move |&b| a * b)).collect();
        }
        p[x * states..(x + 1) * states].copy_from_slice(&row);
    }
    Ok(p)
}

/// `max_{x,x'} TV(P(x,·), P(x',·))` of a dense row-major matrix.
pub fn dobrushin_coefficient(p: &[f64], states: usize) -> f64 {
    let mut best = 0.0f64;
    for x in 0..states {
        for y in x + 1..states {
            let tv: f64 = 0.5
                * (0..states)
                    .map(|z| (p[x * states + z] - p[y * states + z]).abs())
                    .sum::<f64>();
            best = best.max(tv);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Alphabet;
    use crate::noise::{compose_pca, NoiseKernel};
    use crate::rules::{apply_ca, build_zoo, ZooParams};

    fn xor_flip(eps: f64) -> PcaRule {
        let xor = build_zoo("xor", &ZooParams::default()).unwrap();
        compose_pca(&xor, &NoiseKernel::symmetric_flip(eps).unwrap()).unwrap()
    }

    #[test]
    fn field_is_functional() {
        let f = RandomField::new(7);
        assert_eq!(f.uniform(3, &[1, 2], 0), f.uniform(3, &[1, 2], 0));
        assert_ne!(f.uniform(3, &[1, 2], 0), f.uniform(3, &[1, 2], 1));
        assert_ne!(f.uniform(3, &[1, 2], 0), f.derive(1).uniform(3, &[1, 2], 0));
        let mean: f64 = (0..100_000).map(|k| f.uniform_1d(0, k, 0)).sum::<f64>() / 1e5;
        assert!((mean - 0.5).abs() < 0.005);
    }

    #[test]
    fn update_function_measures() {
        for pca in [xor_flip(0.1), xor_flip(0.5)] {
            let uf = build_update_function(&pca);
            for p in 0..pca.rows() {
                let mut mass = [0.0; 2];
                for s in uf.segments(p) {
                    mass[s.symbol as usize] += s.end - s.start;
                }
                for b in 0..2 {
                    assert!((mass[b] - pca.row(p)[b]).abs() < 1e-12);
                }
            }
        }
        let uf = build_update_function(&xor_flip(0.1));
        assert!((uf.core_total() - 0.2).abs() < 1e-15);
        assert_eq!(uf.certain(0.05), Some(0));
        assert_eq!(uf.certain(0.15), Some(1));
        assert_eq!(uf.certain(0.25), None);
    }

    #[test]
    fn memoryless_core_is_the_replacement_law() {
        let and = build_zoo("spreading_binary", &ZooParams::default()).unwrap();
        let noise = NoiseKernel::memoryless(Alphabet::binary(), 0.2, vec![0.3, 0.7]).unwrap();
        let uf = build_update_function(&compose_pca(&and, &noise).unwrap());
        assert!((uf.core_total() - 0.2).abs() < 1e-15);
        assert!((uf.core()[0].end - 0.06).abs() < 1e-15);
    }

    #[test]
    fn noiseless_step_matches_ca() {
        let r = build_zoo("majority1d", &ZooParams::default()).unwrap();
        let uf = build_update_function(&PcaRule::deterministic(&r));
        let x = Configuration::new(Alphabet::binary(), Geometry::ring(7), vec![1, 0, 1, 1, 0, 0, 1])
            .unwrap();
        let f = RandomField::new(1);
        assert_eq!(step(&x, &uf, &f, 1).unwrap(), apply_ca(&r, &x).unwrap());
        let noisy = build_update_function(&xor_flip(0.3));
        assert_eq!(step(&x, &noisy, &f, 4).unwrap(), step(&x, &noisy, &f, 4).unwrap());
    }

    #[test]
    fn flip_frequency() {
        let eps = 0.1;
        let uf = build_update_function(&xor_flip(eps));
        let g = Geometry::ring(4);
        let st = Stepper::new(&uf, &g).unwrap();
        let xor = build_zoo("xor", &ZooParams::default()).unwrap();
        let f = RandomField::new(99);
        let mut x = Configuration::new(Alphabet::binary(), g, vec![0, 1, 1, 0]).unwrap();
        let mut flips = 0usize;
        let steps = 100_000;
        for t in 1..=steps {
            let det = apply_ca(&xor, &x).unwrap();
            let next = st.step(&x, &f, t as i64).unwrap();
            flips += det.cells().iter().zip(next.cells()).filter(|(a, b)| a != b).count();
            x = next;
        }
        let n = (steps * 4) as f64;
        let sigma = (eps * (1.0 - eps) / n).sqrt();
        assert!((flips as f64 / n - eps).abs() < 3.0 * sigma);
    }

    #[test]
    fn small_matrices() {
        let id = LocalRule::identity(Alphabet::binary(), 1);
        let pca = compose_pca(&id, &NoiseKernel::symmetric_flip(0.3).unwrap()).unwrap();
        let TransitionMatrix::Dense { p, .. } = exact_transition_matrix(&pca, 1).unwrap() else {
            panic!("expected dense")
        };
        assert_eq!(p, vec![0.7, 0.3, 0.3, 0.7]);
        let pi = stationary_distribution(&exact_transition_matrix(&pca, 1).unwrap()).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);

        let bd = PcaRule::new(
            Alphabet::binary(),
            id.neighborhood().clone(),
            vec![0.9, 0.1, 0.3, 0.7],
        )
        .unwrap();
        let pi = stationary_distribution(&exact_transition_matrix(&bd, 1).unwrap()).unwrap();
        assert!((pi[0] - 0.75).abs() < 1e-10 && (pi[1] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn deterministic_rows_are_point_masses() {
        let xor = build_zoo("xor", &ZooParams::default()).unwrap();
        let m = exact_transition_matrix(&PcaRule::deterministic(&xor), 4).unwrap();
        for x in 0..16 {
            let row = m.row(x);
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn implicit_forms_agree_with_dense() {
        let pca = xor_flip(0.2);
        let dense = exact_transition_matrix(&pca, 5).unwrap();
        let (_, patterns) = ring_patterns(&pca, 5).unwrap();
        let product = TransitionMatrix::Product {
            n: 5,
            q: 2,
            pca: pca.clone(),
            patterns,
        };
        let xor = build_zoo("xor", &ZooParams::default()).unwrap();
        let image = (0..32)
            .map(|x| {
                let c = Configuration::new(Alphabet::binary(), Geometry::ring(5), decode_pattern(x, 5, 2))
                    .unwrap();
                crate::lattice::encode_pattern(apply_ca(&xor, &c).unwrap().cells(), 2) as u32
            })
            .collect();
        let decomposed = TransitionMatrix::Decomposed {
            n: 5,
            q: 2,
            image,
            theta: vec![0.8, 0.2, 0.2, 0.8],
        };
        let pi: Vec<f64> = (0..32).map(|i| (i + 1) as f64 / 528.0).collect();
        let a = dense.apply_left(&pi);
        for other in [product.apply_left(&pi), decomposed.apply_left(&pi)] {
            for (x, y) in a.iter().zip(&other) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn xor_ring_uniform_defect() {
        // x ↦ x_i ⊕ x_{i+1} is two-to-one on a ring, so uniform·P is the
        // parity-biased law with ‖uniform·P − uniform‖₁ = (1 − 2ε)^n.
        for (eps, n) in [(0.1, 4), (0.3, 4), (0.1, 6), (0.3, 6), (0.2, 5)] {
            let m = exact_transition_matrix(&xor_flip(eps), n).unwrap();
            let s = m.states();
            let u = vec![1.0 / s as f64; s];
            let d: f64 = m.apply_left(&u).iter().map(|p| (p - 1.0 / s as f64).abs()).sum();
            let want = (1.0f64 - 2.0 * eps).abs().powi(n as i32);
            assert!((d - want).abs() < 1e-12, "eps {eps} n {n}: {d} vs {want}");
        }
    }

    #[test]
    fn budget() {
        assert!(matches!(
            exact_transition_matrix(&xor_flip(0.3), 17),
            Err(PcaError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn boundary_kernels() {
        let rule = build_zoo("permutive_demo", &ZooParams::default()).unwrap();
        let noise = NoiseKernel::new(
            Alphabet::cyclic(3).unwrap(),
            NoiseModel::Additive {
                q: vec![0.7, 0.2, 0.1],
            },
        )
        .unwrap();
        let pca = compose_pca(&rule, &noise).unwrap();
        let k = 3;
        let states = 27;
        for w0 in 0..3u8 {
            for w1 in 0..3u8 {
                let p = boundary_kernel_matrix(&pca, k, &[w0, w1], BoundarySide::Right).unwrap();
                for z in 0..states {
                    let col: f64 = (0..states).map(|x| p[x * states + z]).sum::<f64>() / states as f64;
                    assert!((col - 1.0 / states as f64).abs() < 1e-12);
                }
                assert!(dobrushin_coefficient(&p, states) < 1.0);
            }
        }
        let det = PcaRule::deterministic(&rule);
        let p = boundary_kernel_matrix(&det, 2, &[1, 2], BoundarySide::Right).unwrap();
        for z in 0..9 {
            let col: f64 = (0..9).map(|x| p[x * 9 + z]).sum();
            assert_eq!(col, 1.0);
        }
        let raw = PcaRule::new(
            Alphabet::binary(),
            build_zoo("xor", &ZooParams::default()).unwrap().neighborhood().clone(),
            vec![0.5; 8],
        )
        .unwrap();
        assert_eq!(
            boundary_kernel_matrix(&raw, 2, &[0], BoundarySide::Right),
            Err(PcaError::NotDecomposable)
        );
    }
}
