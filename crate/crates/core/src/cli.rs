//! Experiment configuration files and the subcommands of the `pca` binary.
//!
//! A run writes its artifacts and a `manifest.json` into `<out>/<hash>`,
//! where `<hash>` is derived from the subcommand and the fully materialized
//! configuration, so identical inputs land in the same place with identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cftp::{certify, EnvelopeRunner, SpreadingSampler, WallRates, glider_walls_sample};
use crate::diagnostics::{
    block_entropy, correlation_decay, coupling_decay, discrepancy_decay, percolation_survival,
    tv_decay, DecayCurve,
};
use crate::engine::{build_update_function, RandomField, Stepper};
use crate::error::{PcaError, Result};
use crate::fourier::{
    contraction_coefficient, indicator_to_basis, pca_on_observable, seminorm, CharacterPca,
};
use crate::invariant::{approximate_invariant, InvariantSearch, TargetPattern, DEFAULT_MEASURE_BUDGET};
use crate::lattice::io::{write_pgm, write_trajectory_csv};
use crate::lattice::{measure_from_counts, Alphabet, Configuration, Geometry, SiteSet};
use crate::noise::{compose_pca, NoiseKernel, NoiseModel, PcaRule};
use crate::rules::{build_zoo, LocalRule, Neighborhood, ZooParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Sample,
    Diagnose,
    Spectral,
    Invariant,
    Percolation,
    Certify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sample => "sample",
            Command::Diagnose => "diagnose",
            Command::Spectral => "spectral",
            Command::Invariant => "invariant",
            Command::Percolation => "percolation",
            Command::Certify => "certify",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    /// Zoo rule name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoo: Option<String>,
    #[serde(default)]
    pub params: ZooParams,
    /// Rule table file in the `|S| d m` text format, relative to the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    /// Binary flips `0 → 1` with probability `p` and `1 → 0` with `q`
    /// (`q` defaults to `p`).
    Flip { p: f64, q: Option<f64> },
    ZeroRange { theta: Vec<f64> },
    /// Redraw with probability `eps` from `q` (uniform by default).
    Memoryless { eps: f64, q: Option<Vec<f64>> },
    Additive { q: Vec<f64> },
    Permutation { perms: Vec<Vec<u8>>, weights: Vec<f64> },
    BirthDeath { birth: Vec<f64>, death: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Constant,
    Random,
    /// `symbol` at the first cell, 0 elsewhere.
    Single,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub init: InitKind,
    pub symbol: u8,
    /// Also write every frame as `trajectory.csv`.
    pub trajectory: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            init: InitKind::Random,
            symbol: 1,
            trajectory: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Cftp,
    SpreadingTree,
    GliderWalls,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub sampler: SamplerKind,
    pub count: u64,
    pub t_cap: u64,
    pub node_cap: usize,
    pub depth_cap: u64,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection {
            sampler: SamplerKind::Cftp,
            count: 1000,
            t_cap: 1 << 16,
            node_cap: 1 << 16,
            depth_cap: 1 << 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnoseKind {
    Tv,
    Coupling,
    Discrepancy,
    Entropy,
    Correlation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub kind: DiagnoseKind,
    pub replicas: u64,
    /// Constant initial symbols for `tv` (default: 0 and the largest symbol)
    /// and the two copies of `discrepancy`.
    pub inits: Option<Vec<u8>>,
    pub window_sizes: Vec<usize>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
    pub shifts: Vec<usize>,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection {
            kind: DiagnoseKind::Tv,
            replicas: 1000,
            inits: None,
            window_sizes: vec![1, 2, 3, 4],
            u: vec![1],
            v: vec![1],
            shifts: vec![1, 2, 3, 4, 6, 8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    /// Dual-set sizes for the per-character table.
    pub sizes: Vec<usize>,
    /// Expand `Φ 1_{[pattern]}` on the window `0..len`.
    pub pattern: Option<Vec<u8>>,
}

impl Default for SpectralSection {
    fn default() -> Self {
        SpectralSection {
            sizes: (1..=8).collect(),
            pattern: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantSection {
    pub pattern: Vec<u8>,
    /// Sites of the pattern (default `0..len`, one-dimensional).
    pub sites: Option<Vec<i64>>,
    pub n: u64,
    pub budget: u64,
}

impl Default for InvariantSection {
    fn default() -> Self {
        InvariantSection {
            pattern: vec![1],
            sites: None,
            n: 3,
            budget: DEFAULT_MEASURE_BUDGET as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PercolationSection {
    pub p: Vec<f64>,
    pub trials: u64,
    pub offsets: Vec<i64>,
}

impl Default for PercolationSection {
    fn default() -> Self {
        PercolationSection {
            p: vec![0.6, 0.8],
            trials: 1000,
            offsets: vec![0, 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_rule")]
    pub rule: RuleSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Torus side lengths.
    #[serde(default = "default_sides")]
    pub sides: Vec<usize>,
    /// One-dimensional window sites.
    #[serde(default = "default_window")]
    pub window: Vec<i64>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub spectral: SpectralSection,
    #[serde(default)]
    pub invariant: InvariantSection,
    #[serde(default)]
    pub percolation: PercolationSection,
    /// Directory for relative paths; not part of the run identity.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_horizon() -> u64 {
    100
}

fn default_rule() -> RuleSpec {
    RuleSpec {
        zoo: Some("xor".into()),
        params: ZooParams::default(),
        table: None,
    }
}

fn default_sides() -> Vec<usize> {
    vec![64]
}

fn default_window() -> Vec<i64> {
    vec![0]
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| PcaError::Parse(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let mut config = parse_config(&text)?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(t) = &config.rule.table {
        let full = config.base_dir.join(t);
        if !full.is_file() {
            return Err(PcaError::Io(format!("rule table {} not found", full.display())));
        }
    }
    Ok(config)
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PcaError::InvalidParams(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.sides.is_empty() || self.sides.contains(&0) {
            return bad("sides must be non-empty and positive".into());
        }
        if self.window.is_empty() {
            return bad("window must contain a site".into());
        }
        match (&self.rule.zoo, &self.rule.table) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("rule needs exactly one of `zoo` and `table`".into()),
        }
        if self.sample.count == 0 || self.diagnose.replicas == 0 || self.percolation.trials == 0 {
            return bad("sample counts, replicas and trials must be positive".into());
        }
        if let Some(p) = self.percolation.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("percolation probability {p} outside [0, 1]"));
        }
        if self.invariant.n == 0 {
            return bad("invariant accuracy needs n ≥ 1".into());
        }
        Ok(())
    }

    pub fn local_rule(&self) -> Result<LocalRule> {
        match (&self.rule.zoo, &self.rule.table) {
            (Some(name), None) => build_zoo(name, &self.rule.params),
            (None, Some(path)) => LocalRule::from_text(&fs::read_to_string(self.base_dir.join(path))?),
            _ => Err(PcaError::InvalidParams("rule needs exactly one of `zoo` and `table`".into())),
        }
    }

    pub fn noise_kernel(&self, alphabet: &Alphabet) -> Result<NoiseKernel> {
        let q = alphabet.size();
        let model = match &self.noise {
            NoiseSpec::None => return Ok(NoiseKernel::noiseless(alphabet.clone())),
            NoiseSpec::Flip { p, q: flip } => {
                if q != 2 {
                    return Err(PcaError::InvalidParams("flip noise needs a binary alphabet".into()));
                }
                return NoiseKernel::binary_flip(*p, flip.unwrap_or(*p));
            }
            NoiseSpec::ZeroRange { theta } => NoiseModel::ZeroRange { theta: theta.clone() },
            NoiseSpec::Memoryless { eps, q: law } => NoiseModel::Memoryless {
                eps: *eps,
                q: law.clone().unwrap_or_else(|| vec![1.0 / q as f64; q]),
            },
            NoiseSpec::Additive { q } => NoiseModel::Additive { q: q.clone() },
            NoiseSpec::Permutation { perms, weights } => NoiseModel::Permutation {
                perms: perms.clone(),
                weights: weights.clone(),
            },
            NoiseSpec::BirthDeath { birth, death } => NoiseModel::BirthDeath {
                birth: birth.clone(),
                death: death.clone(),
            },
        };
        NoiseKernel::new(alphabet.clone(), model)
    }

    pub fn pca(&self) -> Result<PcaRule> {
        let rule = self.local_rule()?;
        let noise = self.noise_kernel(rule.alphabet())?;
        compose_pca(&rule, &noise)
    }

    fn window_set(&self) -> SiteSet {
        SiteSet::from_1d(&self.window)
    }

    fn geometry(&self) -> Geometry {
        Geometry::torus(&self.sides)
    }
}

/// `sha256` of the subcommand and the materialized configuration.
pub fn run_id(command: Command, config: &ExperimentConfig) -> String {
    let canonical = json!({ "command": command.name(), "config": config });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(digest)[..16].to_string()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| PcaError::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Runs one subcommand and writes its artifacts under `out_root`.
pub fn run(command: Command, config: &ExperimentConfig, out_root: &Path) -> Result<RunOutcome> {
    let dir = out_root.join(run_id(command, config));
    fs::create_dir_all(&dir)?;
    let mut art = Artifacts {
        dir: dir.clone(),
        files: Vec::new(),
    };
    let summary = match command {
        Command::Simulate => simulate(config, &mut art)?,
        Command::Sample => sample(config, &mut art)?,
        Command::Diagnose => diagnose(config, &mut art)?,
        Command::Spectral => spectral(config, &mut art)?,
        Command::Invariant => invariant(config, &mut art)?,
        Command::Percolation => percolation(config, &mut art)?,
        Command::Certify => {
            let cert = certify(&config.pca()?);
            let v = serde_json::to_value(&cert).map_err(|e| PcaError::Io(e.to_string()))?;
            art.json("certificate.json", &v)?;
            v
        }
    };
    let manifest = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config": config,
        "files": art.files,
    });
    art.json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        dir,
        files: art.files,
        summary,
    })
}

/// Machine-readable form of a failure.
pub fn error_json(e: &PcaError) -> Value {
    match e {
        PcaError::NoCoalescence { t_cap } => json!({ "error": "no coalescence", "t_cap": t_cap }),
        PcaError::BudgetExceeded { what, needed, budget } => json!({
            "error": "budget exceeded",
            "what": what,
            "needed": needed.to_string(),
            "budget": budget.to_string(),
        }),
        PcaError::Parse(m) => json!({ "error": "invalid config", "message": m }),
        other => json!({ "error": other.to_string() }),
    }
}

fn initial(config: &ExperimentConfig, alphabet: &Alphabet) -> Result<Configuration> {
    let geometry = config.geometry();
    let s = &config.simulate;
    let n = geometry.cell_count();
    let cells = match s.init {
        InitKind::Constant => vec![s.symbol; n],
        InitKind::Single => {
            let mut c = vec![0; n];
            c[0] = s.symbol;
            c
        }
        InitKind::Random => {
            let f = RandomField::new(config.seed).derive(u64::MAX);
            let q = alphabet.size() as f64;
            (0..n)
                .map(|k| (f.uniform_1d(0, k as i64, 0) * q) as u8)
                .collect()
        }
    };
    Configuration::new(alphabet.clone(), geometry, cells)
}

fn simulate(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let pca = config.pca()?;
    let x0 = initial(config, pca.alphabet())?;
    let stepper = Stepper::new(&build_update_function(&pca), x0.geometry())?;
    let frames = stepper.run(&x0, &RandomField::new(config.seed), 0, config.horizon as usize)?;
    let mut pgm = Vec::new();
    write_pgm(&frames, &mut pgm)?;
    art.write("spacetime.pgm", &pgm)?;
    if config.simulate.trajectory {
        let mut csv = Vec::new();
        write_trajectory_csv(&frames, 0, &mut csv)?;
        art.write("trajectory.csv", &csv)?;
    }
    let last = frames.last().expect("nonempty");
    let q = pca.alphabet().size();
    let mut density = vec![0u64; q];
    for &c in last.cells() {
        density[c as usize] += 1;
    }
    let v = json!({
        "steps": config.horizon,
        "final_symbol_counts": density,
    });
    art.json("summary.json", &v)?;
    Ok(v)
}

fn sample(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let pca = config.pca()?;
    let q = pca.alphabet().size();
    let window = config.window_set();
    let s = &config.sample;
    let base = RandomField::new(config.seed);
    let draw: Box<dyn Fn(&RandomField) -> Result<(Vec<u8>, Option<u64>)> + Sync> = match s.sampler {
        SamplerKind::Cftp => {
            let runner = EnvelopeRunner::new(&pca, &window)?;
            let t_cap = s.t_cap;
            Box::new(move |f| runner.sample(f, t_cap).map(|r| (r.pattern, Some(r.coalescence_time))))
        }
        SamplerKind::SpreadingTree => {
            let (rule, noise) = pca.decomposition().ok_or(PcaError::NotDecomposable)?;
            let NoiseModel::Memoryless { eps, q: law } = noise.model() else {
                return Err(PcaError::InvalidParams("spreading tree needs memoryless noise".into()));
            };
            let sampler = SpreadingSampler::new(rule, *eps, law)?;
            let sites: Vec<i64> = window.iter().map(|x| x[0]).collect();
            let (nc, dc) = (s.node_cap, s.depth_cap);
            Box::new(move |f| {
                let p = sites
                    .iter()
                    .map(|&k| sampler.sample(&[k], f, nc, dc))
                    .collect::<Result<Vec<u8>>>()?;
                Ok((p, None))
            })
        }
        SamplerKind::GliderWalls => {
            let (_, noise) = pca.decomposition().ok_or(PcaError::NotDecomposable)?;
            let rates = match noise.model() {
                NoiseModel::BirthDeath { birth, death } if birth.len() == 3 && config.rule.zoo.as_deref() == Some("gliders_walls") => WallRates {
                    birth: [birth[0], birth[1], birth[2]],
                    death: [death[0], death[1], death[2]],
                },
                _ => {
                    return Err(PcaError::InvalidParams(
                        "glider sampler needs gliders_walls with three birth-death layers".into(),
                    ))
                }
            };
            let sites: Vec<i64> = window.iter().map(|x| x[0]).collect();
            let dc = s.depth_cap;
            Box::new(move |f| {
                let p = sites
                    .iter()
                    .map(|&k| glider_walls_sample(&rates, k, f, dc))
                    .collect::<Result<Vec<u8>>>()?;
                Ok((p, None))
            })
        }
    };
    let results: Vec<(Vec<u8>, Option<u64>)> = (0..s.count)
        .into_par_iter()
        .map(|i| draw(&base.derive(i)))
        .collect::<Result<_>>()?;
    let mut lines = String::new();
    let mut counts = vec![0u64; q.pow(window.len() as u32)];
    for (i, (pattern, t)) in results.iter().enumerate() {
        let idx = pattern.iter().fold(0usize, |a, &b| a * q + b as usize);
        counts[idx] += 1;
        let mut line = json!({ "sample": i, "pattern": pattern });
        if let Some(t) = t {
            line["coalescence_time"] = json!(t);
        }
        lines.push_str(&line.to_string());
        lines.push('\n');
    }
    art.write("samples.jsonl", lines.as_bytes())?;
    let measure = measure_from_counts(window, q, &counts)?;
    let mut csv = String::from("pattern,frequency\n");
    for (i, p) in measure.probs().iter().enumerate() {
        csv.push_str(&format!("{i},{p}\n"));
    }
    art.write("marginal.csv", csv.as_bytes())?;
    Ok(json!({ "samples": s.count, "marginal": measure.probs() }))
}

fn write_curve(art: &mut Artifacts, curve: &DecayCurve, extra: Value) -> Result<Value> {
    art.write("curve.csv", curve.to_csv().as_bytes())?;
    let v = json!({ "label": curve.label, "parameters": extra });
    art.json("curve.json", &v)?;
    Ok(v)
}

fn diagnose(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let pca = config.pca()?;
    let alphabet = pca.alphabet().clone();
    let q = alphabet.size() as u8;
    let d = &config.diagnose;
    let field = RandomField::new(config.seed);
    let geometry = config.geometry();
    let inits = d.inits.clone().unwrap_or_else(|| vec![0, q - 1]);
    let constant = |s: u8| Configuration::constant(alphabet.clone(), geometry.clone(), s);
    let window = config.window_set();
    match d.kind {
        DiagnoseKind::Tv => {
            let xs = inits.iter().map(|&s| constant(s)).collect::<Result<Vec<_>>>()?;
            let c = tv_decay(&pca, &window, &xs, config.horizon, d.replicas, &field)?;
            write_curve(art, &c, json!({ "inits": inits, "replicas": d.replicas }))
        }
        DiagnoseKind::Coupling => {
            let c = coupling_decay(&pca, &window, config.horizon, d.replicas, &field)?;
            write_curve(art, &c, json!({ "seeds": d.replicas }))
        }
        DiagnoseKind::Discrepancy => {
            if inits.len() != 2 {
                return Err(PcaError::InvalidParams("discrepancy needs two inits".into()));
            }
            let c = discrepancy_decay(&pca, &constant(inits[0])?, &constant(inits[1])?, config.horizon, d.replicas, &field)?;
            write_curve(
                art,
                &c.curve,
                json!({ "envelope": c.envelope, "eps": c.eps, "layers": c.layers, "replicas": d.replicas }),
            )
        }
        DiagnoseKind::Entropy => {
            // long-run forward proxy: independent runs of `horizon` steps
            let stepper = Stepper::new(&build_update_function(&pca), &geometry)?;
            let x0 = initial(config, &alphabet)?;
            let samples: Vec<Vec<u8>> = (0..d.replicas)
                .into_par_iter()
                .map(|r| {
                    let f = field.derive(r);
                    let mut x = x0.cells().to_vec();
                    let mut y = vec![0u8; x.len()];
                    for t in 1..=config.horizon as i64 {
                        stepper.step_cells(&x, &mut y, &f, t);
                        std::mem::swap(&mut x, &mut y);
                    }
                    x
                })
                .collect();
            let r = block_entropy(&samples, alphabet.size(), &d.window_sizes)?;
            let v = serde_json::to_value(&r).map_err(|e| PcaError::Io(e.to_string()))?;
            art.json("entropy.json", &v)?;
            Ok(v)
        }
        DiagnoseKind::Correlation => {
            let max = d.shifts.iter().max().copied().unwrap_or(0);
            let len = (max + d.v.len()).max(d.u.len()) as i64;
            let runner = EnvelopeRunner::new(&pca, &SiteSet::interval(0, len - 1))?;
            let t_cap = config.sample.t_cap;
            let samples: Vec<Vec<u8>> = (0..d.replicas)
                .into_par_iter()
                .map(|r| runner.sample(&field.derive(r), t_cap).map(|s| s.pattern))
                .collect::<Result<_>>()?;
            let c = correlation_decay(&samples, &d.u, &d.v, &d.shifts)?;
            write_curve(art, &c, json!({ "u": d.u, "v": d.v, "samples": d.replicas }))
        }
    }
}

fn spectral(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let cp = CharacterPca::from_pca(&config.pca()?)?;
    let mut csv = String::from("dual_size,per_character\n");
    for &s in &config.spectral.sizes {
        let c = contraction_coefficient(cp.kind, cp.p, cp.q, s);
        csv.push_str(&format!("{s},{}\n", c.per_character));
    }
    art.write("spectral.csv", csv.as_bytes())?;
    let global = contraction_coefficient(cp.kind, cp.p, cp.q, 1);
    let mut v = json!({
        "kind": cp.kind,
        "p": cp.p,
        "q": cp.q,
        "rho": global.rho,
        "certified": global.certified,
    });
    if let Some(u) = &config.spectral.pattern {
        let w = SiteSet::interval(0, u.len() as i64 - 1);
        let h = indicator_to_basis(cp.kind.basis(), &w, u)?;
        let image = pca_on_observable(&cp, &h)?;
        art.write("indicator.csv", h.to_csv().as_bytes())?;
        art.write("image.csv", image.to_csv().as_bytes())?;
        v["seminorm_indicator"] = json!(seminorm(&h));
        v["seminorm_image"] = json!(seminorm(&image));
    }
    art.json("spectral.json", &v)?;
    Ok(v)
}

fn invariant(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let pca = config.pca()?;
    let s = &config.invariant;
    let sites = s
        .sites
        .clone()
        .unwrap_or_else(|| (0..s.pattern.len() as i64).collect());
    let target = TargetPattern {
        sites: SiteSet::from_1d(&sites),
        symbols: s.pattern.clone(),
    };
    let search = InvariantSearch {
        n: s.n,
        budget: s.budget as u128,
    };
    let r = approximate_invariant(&pca, &target, &search)?;
    let v = json!({
        "value": r.value,
        "spread": r.spread,
        "m_final": r.m_final,
        "k": r.k,
        "representatives": r.representatives,
        "candidates_checked": r.candidates_checked,
    });
    art.json("invariant.json", &v)?;
    Ok(v)
}

fn percolation(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let s = &config.percolation;
    let nb = Neighborhood::from_1d(&s.offsets)?;
    let field = RandomField::new(config.seed);
    let mut csv = String::from("p,frequency,stderr\n");
    let mut rows = Vec::new();
    for &p in &s.p {
        let e = percolation_survival(p, &nb, config.horizon, s.trials, &field)?;
        csv.push_str(&format!("{},{},{}\n", e.p, e.frequency, e.stderr));
        rows.push(json!({ "p": e.p, "frequency": e.frequency, "stderr": e.stderr }));
    }
    art.write("percolation.csv", csv.as_bytes())?;
    let v = json!({ "horizon": config.horizon, "trials": s.trials, "survival": rows });
    art.json("percolation.json", &v)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_materialized() {
        let c = parse_config("[rule]\nzoo = \"xor\"\n[noise]\nkind = \"flip\"\np = 0.4\n").unwrap();
        assert_eq!((c.seed, c.horizon), (0, 100));
        assert_eq!(c.sample.t_cap, 1 << 16);
        assert_eq!(c.noise, NoiseSpec::Flip { p: 0.4, q: None });
    }

    #[test]
    fn unknown_keys_are_fatal() {
        let e = parse_config("[rule]\nzoo = \"xor\"\n[nois]\nkind = \"flip\"\n").unwrap_err();
        assert!(e.to_string().contains("nois"), "{e}");
        let e = parse_config("[noise]\nkind = \"flip\"\np = 0.1\nqq = 0.2\n").unwrap_err();
        assert!(e.to_string().contains("qq"), "{e}");
    }

    #[test]
    fn run_id_depends_on_config() {
        let a = parse_config("seed = 1").unwrap();
        let b = parse_config("seed = 2").unwrap();
        assert_ne!(run_id(Command::Certify, &a), run_id(Command::Certify, &b));
        assert_ne!(run_id(Command::Certify, &a), run_id(Command::Sample, &a));
        assert_eq!(run_id(Command::Certify, &a), run_id(Command::Certify, &a.clone()));
    }

    #[test]
    fn error_shapes() {
        let v = error_json(&PcaError::NoCoalescence { t_cap: 4 });
        assert_eq!(v, json!({ "error": "no coalescence", "t_cap": 4 }));
    }
}
