use std::path::Path;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use pca_core::cftp::{certify, cftp_sample, SpreadingSampler};
use pca_core::cli::{parse_config, run, Command};
use pca_core::diagnostics::{coupling_decay, percolation_survival, tv_decay};
use pca_core::engine::{
    build_update_function, exact_transition_matrix, ring_marginal, stationary_distribution,
    RandomField, Stepper,
};
use pca_core::fourier::{contraction_coefficient, pca_on_character, seminorm, CharacterPca, RuleKind};
use pca_core::invariant::{approximate_invariant, InvariantSearch, TargetPattern};
use pca_core::lattice::Geometry;
use pca_core::noise::{compose_pca, NoiseKernel, NoiseModel};
use pca_core::rules::{build_zoo, ZooParams};
use pca_core::{Alphabet, Configuration, LocalRule, Neighborhood, PcaError, PcaRule, SiteSet};

create_exception!(pcakit, PcaKitError, PyException);

fn err(e: PcaError) -> PyErr {
    PcaKitError::new_err(e.to_string())
}

/// Serializes through JSON so reports arrive as plain dicts and lists.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PcaKitError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Symbols as `int` lists; `Vec<u8>` would surface as `bytes`.
fn widen(cells: &[u8]) -> Vec<u32> {
    cells.iter().map(|&c| u32::from(c)).collect()
}

fn ring(pca: &PcaRule, cells: Vec<u8>) -> PyResult<Configuration> {
    let n = cells.len();
    Configuration::new(pca.alphabet().clone(), Geometry::ring(n), cells).map_err(err)
}

fn parse_kind(kind: &str) -> PyResult<RuleKind> {
    match kind {
        "xor" => Ok(RuleKind::Xor),
        "spreading" => Ok(RuleKind::Spreading),
        other => Err(PcaKitError::new_err(format!("unknown rule kind {other:?}"))),
    }
}

/// A deterministic local rule.
#[pyclass(module = "pcakit", frozen)]
struct Rule {
    inner: LocalRule,
}

#[pymethods]
impl Rule {
    /// Build a rule from its table; patterns are read with the first
    /// neighbor as the most significant digit.
    #[new]
    fn new(q: usize, offsets: Vec<i64>, table: Vec<u8>) -> PyResult<Self> {
        let nb = Neighborhood::from_1d(&offsets).map_err(err)?;
        let inner = LocalRule::new(Alphabet::new(q).map_err(err)?, nb, table).map_err(err)?;
        Ok(Rule { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (name, offsets=None, velocities=None))]
    fn zoo(name: &str, offsets: Option<Vec<i64>>, velocities: Option<Vec<i64>>) -> PyResult<Self> {
        let params = ZooParams {
            offsets,
            velocities,
            ..Default::default()
        };
        Ok(Rule {
            inner: build_zoo(name, &params).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Rule {
            inner: LocalRule::from_text(text).map_err(err)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.alphabet().size()
    }

    #[getter]
    fn offsets(&self) -> Vec<Vec<i64>> {
        self.inner.neighborhood().offsets().to_vec()
    }

    #[getter]
    fn table(&self) -> Vec<u32> {
        widen(self.inner.table())
    }

    fn apply(&self, cells: Vec<u8>) -> PyResult<Vec<u32>> {
        let n = cells.len();
        let x = Configuration::new(self.inner.alphabet().clone(), Geometry::ring(n), cells).map_err(err)?;
        Ok(widen(pca_core::rules::apply_ca(&self.inner, &x).map_err(err)?.cells()))
    }
}

/// Zero-range noise applied after the rule.
#[pyclass(module = "pcakit", frozen)]
struct Noise {
    inner: NoiseKernel,
}

#[pymethods]
impl Noise {
    /// Binary flips `0 → 1` with probability `p` and `1 → 0` with `q`.
    #[staticmethod]
    #[pyo3(signature = (p, q=None))]
    fn flip(p: f64, q: Option<f64>) -> PyResult<Self> {
        Ok(Noise {
            inner: NoiseKernel::binary_flip(p, q.unwrap_or(p)).map_err(err)?,
        })
    }

    #[staticmethod]
    fn memoryless(eps: f64, q: Vec<f64>) -> PyResult<Self> {
        let alphabet = Alphabet::new(q.len()).map_err(err)?;
        Ok(Noise {
            inner: NoiseKernel::memoryless(alphabet, eps, q).map_err(err)?,
        })
    }

    /// Row-major stochastic matrix `theta[a][b]`.
    #[staticmethod]
    fn zero_range(theta: Vec<Vec<f64>>) -> PyResult<Self> {
        let alphabet = Alphabet::new(theta.len()).map_err(err)?;
        let model = NoiseModel::ZeroRange {
            theta: theta.concat(),
        };
        Ok(Noise {
            inner: NoiseKernel::new(alphabet, model).map_err(err)?,
        })
    }

    #[staticmethod]
    fn birth_death(birth: Vec<f64>, death: Vec<f64>) -> PyResult<Self> {
        Ok(Noise {
            inner: NoiseKernel::birth_death(birth, death).map_err(err)?,
        })
    }
}

/// A rule composed with noise.
#[pyclass(module = "pcakit", frozen)]
struct Pca {
    inner: PcaRule,
}

#[pymethods]
impl Pca {
    #[new]
    #[pyo3(signature = (rule, noise=None))]
    fn new(rule: &Rule, noise: Option<&Noise>) -> PyResult<Self> {
        let inner = match noise {
            Some(n) => compose_pca(&rule.inner, &n.inner).map_err(err)?,
            None => PcaRule::deterministic(&rule.inner),
        };
        Ok(Pca { inner })
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.alphabet().size()
    }

    /// `phi[pattern][b]`.
    #[getter]
    fn phi(&self) -> Vec<Vec<f64>> {
        (0..self.inner.rows()).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn certify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &certify(&self.inner))
    }

    /// Space-time trajectory on a ring, one row per time step.
    fn simulate(&self, init: Vec<u8>, steps: usize, seed: u64) -> PyResult<Vec<Vec<u32>>> {
        let x = ring(&self.inner, init)?;
        let uf = build_update_function(&self.inner);
        let stepper = Stepper::new(&uf, x.geometry()).map_err(err)?;
        let frames = stepper.run(&x, &RandomField::new(seed), 0, steps).map_err(err)?;
        Ok(frames.iter().map(|f| widen(f.cells())).collect())
    }

    /// Exact stationary law of the ring of `n` cells.
    fn stationary(&self, n: usize) -> PyResult<Vec<f64>> {
        let m = exact_transition_matrix(&self.inner, n).map_err(err)?;
        stationary_distribution(&m).map_err(err)
    }

    fn ring_marginal(&self, n: usize, cells: Vec<usize>) -> PyResult<Vec<f64>> {
        let pi = self.stationary(n)?;
        Ok(ring_marginal(&pi, n, self.inner.alphabet().size(), &cells))
    }

    /// Perfect sample of the window from the stationary law.
    #[pyo3(signature = (window, seed, t_cap=65536))]
    fn cftp<'py>(&self, py: Python<'py>, window: Vec<i64>, seed: u64, t_cap: u64) -> PyResult<Bound<'py, PyAny>> {
        let w = SiteSet::from_1d(&window);
        let r = cftp_sample(&self.inner, &w, &RandomField::new(seed), t_cap).map_err(err)?;
        to_py(py, &r)
    }

    #[pyo3(signature = (window, inits, horizon, replicas, seed))]
    fn tv_decay<'py>(
        &self,
        py: Python<'py>,
        window: Vec<i64>,
        inits: Vec<Vec<u8>>,
        horizon: u64,
        replicas: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let inits = inits.into_iter().map(|c| ring(&self.inner, c)).collect::<PyResult<Vec<_>>>()?;
        let c = tv_decay(&self.inner, &SiteSet::from_1d(&window), &inits, horizon, replicas, &RandomField::new(seed))
            .map_err(err)?;
        to_py(py, &c)
    }

    fn coupling_decay<'py>(
        &self,
        py: Python<'py>,
        window: Vec<i64>,
        horizon: u64,
        seeds: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let c = coupling_decay(&self.inner, &SiteSet::from_1d(&window), horizon, seeds, &RandomField::new(seed))
            .map_err(err)?;
        to_py(py, &c)
    }

    /// Bracket for the stationary probability of `symbols` on `sites`.
    #[pyo3(signature = (sites, symbols, n=3))]
    fn approximate_invariant<'py>(
        &self,
        py: Python<'py>,
        sites: Vec<i64>,
        symbols: Vec<u8>,
        n: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let target = TargetPattern {
            sites: SiteSet::from_1d(&sites),
            symbols,
        };
        let r = approximate_invariant(&self.inner, &target, &InvariantSearch::new(n)).map_err(err)?;
        to_py(py, &r)
    }
}

/// Draw of one site from a spreading rule under memoryless noise.
#[pyfunction]
#[pyo3(signature = (rule, eps, q, seed, node_cap=65536, depth_cap=1048576))]
fn spreading_tree_sample(rule: &Rule, eps: f64, q: Vec<f64>, seed: u64, node_cap: usize, depth_cap: u64) -> PyResult<u8> {
    let s = SpreadingSampler::new(&rule.inner, eps, &q).map_err(err)?;
    s.sample(&[0], &RandomField::new(seed), node_cap, depth_cap).map_err(err)
}

#[pyfunction]
fn percolation_survival_frequency(p: f64, offsets: Vec<i64>, horizon: u64, trials: u64, seed: u64) -> PyResult<f64> {
    let nb = Neighborhood::from_1d(&offsets).map_err(err)?;
    Ok(percolation_survival(p, &nb, horizon, trials, &RandomField::new(seed))
        .map_err(err)?
        .frequency)
}

/// Expansion of `Φχ_A` as `(sites, coefficient)` pairs, and its seminorm.
#[pyfunction]
#[pyo3(signature = (kind, sites, p, q, offsets=vec![0, 1]))]
fn character_action(kind: &str, sites: Vec<i64>, p: f64, q: f64, offsets: Vec<i64>) -> PyResult<(Vec<(Vec<i64>, f64)>, f64)> {
    let nb = Neighborhood::from_1d(&offsets).map_err(err)?;
    let cp = CharacterPca::new(parse_kind(kind)?, nb, p, q).map_err(err)?;
    let h = pca_on_character(&cp, &SiteSet::from_1d(&sites)).map_err(err)?;
    let terms = h
        .terms
        .iter()
        .map(|(a, c)| (a.iter().map(|s| s[0]).collect(), c.re))
        .collect();
    Ok((terms, seminorm(&h)))
}

/// `(|||Φχ_A|||, ρ)` for a dual set of the given size.
#[pyfunction]
fn contraction(kind: &str, p: f64, q: f64, dual_size: usize) -> PyResult<(f64, f64)> {
    let c = contraction_coefficient(parse_kind(kind)?, p, q, dual_size);
    Ok((c.per_character, c.rho))
}

/// Run a CLI subcommand from TOML text and return its summary.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, command: &str, config: &str, out: &str) -> PyResult<Bound<'py, PyAny>> {
    let cmd: Command = serde_json::from_value(serde_json::Value::String(command.into()))
        .map_err(|_| PcaKitError::new_err(format!("unknown command {command:?}")))?;
    let cfg = parse_config(config).map_err(err)?;
    let outcome = run(cmd, &cfg, Path::new(out)).map_err(err)?;
    to_py(
        py,
        &serde_json::json!({
            "dir": outcome.dir,
            "files": outcome.files,
            "result": outcome.summary,
        }),
    )
}

#[pymodule]
fn pcakit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PcaKitError", m.py().get_type::<PcaKitError>())?;
    m.add_class::<Rule>()?;
    m.add_class::<Noise>()?;
    m.add_class::<Pca>()?;
    m.add_function(wrap_pyfunction!(spreading_tree_sample, m)?)?;
    m.add_function(wrap_pyfunction!(percolation_survival_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(character_action, m)?)?;
    m.add_function(wrap_pyfunction!(contraction, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
