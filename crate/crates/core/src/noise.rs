//! Zero-range noise kernels and their composition with deterministic rules.

use serde::{Deserialize, Serialize};

use crate::error::{check_distribution, PcaError, Result};
use crate::lattice::{Alphabet, PROB_TOL};
use crate::rules::{glider_layers, LocalRule, Neighborhood};

/// Column sums of doubly stochastic matrices accumulate row error.
pub const DOUBLY_STOCHASTIC_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Row-major `|S| × |S|` stochastic matrix.
    ZeroRange { theta: Vec<f64> },
    /// Keep the symbol with probability `1 − eps`, otherwise redraw from `q`.
    Memoryless { eps: f64, q: Vec<f64> },
    /// Add a random group element drawn from `q`.
    Additive { q: Vec<f64> },
    /// Apply `perms[k]` with probability `weights[k]`.
    Permutation { perms: Vec<Vec<u8>>, weights: Vec<f64> },
    /// Independent per-layer birth (`0 → 1`) and death (`1 → 0`) rates.
    BirthDeath { birth: Vec<f64>, death: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseKernel {
    alphabet: Alphabet,
    model: NoiseModel,
}

fn check_unit(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(PcaError::InvalidParams(format!("{what} = {x} is not in [0, 1]")))
    }
}

impl NoiseKernel {
    pub fn new(alphabet: Alphabet, model: NoiseModel) -> Result<Self> {
        let q = alphabet.size();
        match &model {
            NoiseModel::ZeroRange { theta } => {
                if theta.len() != q * q {
                    return Err(PcaError::InvalidDistribution(format!(
                        "noise matrix has {} entries, expected {}",
                        theta.len(),
                        q * q
                    )));
                }
                for row in theta.chunks(q) {
                    check_distribution(row, PROB_TOL, "noise matrix row")?;
                }
            }
            NoiseModel::Memoryless { eps, q: repl } => {
                check_unit(*eps, "eps")?;
                if repl.len() != q {
                    return Err(PcaError::InvalidDistribution(
                        "replacement distribution has the wrong length".into(),
                    ));
                }
                check_distribution(repl, PROB_TOL, "replacement distribution")?;
            }
            NoiseModel::Additive { q: incr } => {
                if !alphabet.has_group() {
                    return Err(PcaError::InvalidParams(
                        "additive noise needs a group alphabet".into(),
                    ));
                }
                if incr.len() != q {
                    return Err(PcaError::InvalidDistribution(
                        "increment distribution has the wrong length".into(),
                    ));
                }
                check_distribution(incr, PROB_TOL, "increment distribution")?;
            }
            NoiseModel::Permutation { perms, weights } => {
                if perms.len() != weights.len() || perms.is_empty() {
                    return Err(PcaError::InvalidParams(
                        "permutation noise needs one weight per permutation".into(),
                    ));
                }
                for p in perms {
                    let mut seen = vec![false; q];
                    if p.len() != q
                        || p.iter().any(|&b| {
                            (b as usize) >= q || std::mem::replace(&mut seen[b as usize], true)
                        })
                    {
                        return Err(PcaError::InvalidParams(format!(
                            "{p:?} is not a permutation of {q} symbols"
                        )));
                    }
                }
                check_distribution(weights, PROB_TOL, "permutation weights")?;
            }
            NoiseModel::BirthDeath { birth, death } => {
                let layers = glider_layers(&alphabet).ok_or_else(|| {
                    PcaError::InvalidParams("birth-death noise needs |S| = 2^n".into())
                })?;
                if birth.len() != layers || death.len() != layers {
                    return Err(PcaError::InvalidParams(format!(
                        "birth-death noise needs {layers} rates per kind"
                    )));
                }
                for &r in birth.iter().chain(death) {
                    check_unit(r, "birth-death rate")?;
                }
            }
        }
        Ok(NoiseKernel { alphabet, model })
    }

    pub fn noiseless(alphabet: Alphabet) -> Self {
        let q = alphabet.size();
        let mut theta = vec![0.0; q * q];
        for a in 0..q {
            theta[a * q + a] = 1.0;
        }
        NoiseKernel {
            alphabet,
            model: NoiseModel::ZeroRange { theta },
        }
    }

    /// Binary noise with `θ(0,1) = p` and `θ(1,0) = q`.
    pub fn binary_flip(p: f64, q: f64) -> Result<Self> {
        check_unit(p, "p")?;
        check_unit(q, "q")?;
        NoiseKernel::new(
            Alphabet::binary(),
            NoiseModel::ZeroRange {
                theta: vec![1.0 - p, p, q, 1.0 - q],
            },
        )
    }

    pub fn symmetric_flip(eps: f64) -> Result<Self> {
        NoiseKernel::binary_flip(eps, eps)
    }

    pub fn memoryless(alphabet: Alphabet, eps: f64, q: Vec<f64>) -> Result<Self> {
        NoiseKernel::new(alphabet, NoiseModel::Memoryless { eps, q })
    }

    pub fn birth_death(birth: Vec<f64>, death: Vec<f64>) -> Result<Self> {
        let alphabet = Alphabet::new(1 << birth.len())?;
        NoiseKernel::new(alphabet, NoiseModel::BirthDeath { birth, death })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }
}

/// The induced `|S| × |S|` matrix, row-major.
pub fn noise_matrix(noise: &NoiseKernel) -> Vec<f64> {
    let n = noise.alphabet.size();
    let mut theta = vec![0.0; n * n];
    match &noise.model {
        NoiseModel::ZeroRange { theta: t } => theta.copy_from_slice(t),
        NoiseModel::Memoryless { eps, q } => {
            for a in 0..n {
                for b in 0..n {
                    theta[a * n + b] = eps * q[b] + if a == b { 1.0 - eps } else { 0.0 };
                }
            }
        }
        NoiseModel::Additive { q } => {
            for a in 0..n {
                for (c, &w) in q.iter().enumerate() {
                    let b = noise.alphabet.add(a as u8, c as u8).expect("group") as usize;
                    theta[a * n + b] += w;
                }
            }
        }
        NoiseModel::Permutation { perms, weights } => {
            for (p, &w) in perms.iter().zip(weights) {
                for a in 0..n {
                    theta[a * n + p[a] as usize] += w;
                }
            }
        }
        NoiseModel::BirthDeath { birth, death } => {
            for a in 0..n {
                for b in 0..n {
                    theta[a * n + b] = birth
                        .iter()
                        .zip(death)
                        .enumerate()
                        .map(|(i, (&beta, &delta))| {
                            let (ai, bi) = ((a >> i) & 1, (b >> i) & 1);
                            match (ai, bi) {
                                (0, 0) => 1.0 - beta,
                                (0, _) => beta,
                                (_, 0) => delta,
                                _ => 1.0 - delta,
                            }
                        })
                        .product();
                }
            }
        }
    }
    theta
}

/// Columns of a stochastic matrix also sum to one.
pub fn is_permutation_noise(theta: &[f64], q: usize) -> bool {
    (0..q).all(|b| {
        let s: f64 = (0..q).map(|a| theta[a * q + b]).sum();
        (s - 1.0).abs() <= DOUBLY_STOCHASTIC_TOL
    })
}

/// Threshold coupling of one birth-death layer: with the same `u`, both
/// starting states give the same output unless `u` falls in the gap.
pub fn birth_death_update(present: bool, u: f64, birth: f64, death: f64) -> bool {
    if present {
        u > death
    } else {
        u >= 1.0 - birth
    }
}

/// `ε_i = min{β_i + δ_i, 2 − β_i − δ_i}`: probability that a layer sample decides.
pub fn birth_death_resolution(birth: f64, death: f64) -> f64 {
    (birth + death).min(2.0 - birth - death)
}

/// A local stochastic rule `φ: S^m → P(S)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaRule {
    alphabet: Alphabet,
    neighborhood: Neighborhood,
    phi: Vec<f64>,
    decomposition: Option<(LocalRule, NoiseKernel)>,
}

impl PcaRule {
    /// A rule given directly by its rows (row-major, `|S|^m × |S|`).
    pub fn new(alphabet: Alphabet, neighborhood: Neighborhood, phi: Vec<f64>) -> Result<Self> {
        let q = alphabet.size();
        let rows = q.pow(neighborhood.len() as u32);
        if phi.len() != rows * q {
            return Err(PcaError::InvalidDistribution(format!(
                "{} transition entries, expected {}",
                phi.len(),
                rows * q
            )));
        }
        for row in phi.chunks(q) {
            check_distribution(row, PROB_TOL, "transition row")?;
        }
        Ok(PcaRule {
            alphabet,
            neighborhood,
            phi,
            decomposition: None,
        })
    }

    pub fn deterministic(rule: &LocalRule) -> Self {
        compose_pca(rule, &NoiseKernel::noiseless(rule.alphabet().clone()))
            .expect("matching alphabets")
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.neighborhood
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn row(&self, pattern: usize) -> &[f64] {
        let q = self.alphabet.size();
        &self.phi[pattern * q..(pattern + 1) * q]
    }

    pub fn rows(&self) -> usize {
        self.phi.len() / self.alphabet.size()
    }

    /// The deterministic rule and noise this PCA was composed from, if known.
    pub fn decomposition(&self) -> Option<(&LocalRule, &NoiseKernel)> {
        self.decomposition.as_ref().map(|(r, n)| (r, n))
    }
}

/// `φ(a⃗)(b) = θ(f(a⃗), b)`.
pub fn compose_pca(rule: &LocalRule, noise: &NoiseKernel) -> Result<PcaRule> {
    rule.alphabet().compatible(noise.alphabet())?;
    let q = rule.alphabet().size();
    let theta = noise_matrix(noise);
    let phi = rule
        .table()
        .iter()
        .flat_map(|&f| theta[f as usize * q..(f as usize + 1) * q].iter().copied())
        .collect();
    Ok(PcaRule {
        alphabet: rule.alphabet().clone(),
        neighborhood: rule.neighborhood().clone(),
        phi,
        decomposition: Some((rule.clone(), noise.clone())),
    })
}

/// Smallest ε such that the PCA follows `rule` with probability at least `1 − ε`.
pub fn is_epsilon_perturbation(pca: &PcaRule, rule: &LocalRule) -> Result<f64> {
    pca.alphabet.compatible(rule.alphabet())?;
    if &pca.neighborhood != rule.neighborhood() {
        return Err(PcaError::InvalidParams(
            "PCA and rule have different neighborhoods".into(),
        ));
    }
    Ok(rule
        .table()
        .iter()
        .enumerate()
        .map(|(i, &f)| 1.0 - pca.row(i)[f as usize])
        .fold(0.0f64, f64::max)
        .max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Positivity {
    pub positive_rates: bool,
    /// `φ(a⃗)(α) > 0` for every input; false when no symbol is given.
    pub alpha_positive: bool,
}

pub fn positivity_checks(pca: &PcaRule, alpha: Option<u8>) -> Positivity {
    let q = pca.alphabet.size();
    Positivity {
        positive_rates: pca.phi.iter().all(|&p| p > 0.0),
        alpha_positive: alpha
            .is_some_and(|a| pca.phi.chunks(q).all(|row| row[a as usize] > 0.0)),
    }
}
