//! Character expansions of observables on binary configurations and the
//! action of noisy XOR and noisy spreading (AND) rules on them.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PcaError, Result};
use crate::lattice::{Configuration, SiteSet};
use crate::noise::{noise_matrix, PcaRule};
use crate::rules::{LocalRule, Neighborhood};

/// Largest window (or dual set) expanded term by term.
pub const MAX_EXPANSION_SITES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `χ(a) = (−1)^a`.
    FourierBinary,
    /// `χ(0) = 0`, `χ(1) = 1`.
    MoebiusBinary,
}

impl Basis {
    pub fn chi(self, a: u8) -> f64 {
        match (self, a) {
            (Basis::FourierBinary, 0) => 1.0,
            (Basis::FourierBinary, _) => -1.0,
            (Basis::MoebiusBinary, 0) => 0.0,
            (Basis::MoebiusBinary, _) => 1.0,
        }
    }
}

/// `h = Σ_A ĥ_A χ_A` with finitely many terms.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacterObservable {
    pub basis: Basis,
    pub terms: BTreeMap<SiteSet, Complex64>,
}

impl CharacterObservable {
    pub fn new(basis: Basis) -> Self {
        CharacterObservable {
            basis,
            terms: BTreeMap::new(),
        }
    }

    pub fn character(basis: Basis, a: SiteSet) -> Self {
        let mut h = CharacterObservable::new(basis);
        h.terms.insert(a, Complex64::new(1.0, 0.0));
        h
    }

    pub fn coefficient(&self, a: &SiteSet) -> Complex64 {
        self.terms.get(a).copied().unwrap_or_default()
    }

    fn add_term(&mut self, a: SiteSet, c: Complex64) {
        let e = self.terms.entry(a).or_default();
        *e += c;
    }

    /// Value at a configuration given as a site lookup.
    pub fn eval_with(&self, x: &dyn Fn(&[i64]) -> u8) -> Complex64 {
        self.terms
            .iter()
            .map(|(a, c)| c * char_value(self.basis, a, x))
            .sum()
    }

    pub fn eval(&self, config: &Configuration) -> Result<Complex64> {
        check_binary(config.alphabet().size())?;
        Ok(self.eval_with(&|s| config.get(s)))
    }

    /// One row per term: `sites,re,im` with sites joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sites,re,im\n");
        for (a, c) in &self.terms {
            let sites: Vec<String> = a
                .iter()
                .map(|s| s.iter().map(i64::to_string).collect::<Vec<_>>().join(" "))
                .collect();
            out.push_str(&format!("{},{},{}\n", sites.join(";"), c.re, c.im));
        }
        out
    }
}

fn check_binary(q: usize) -> Result<()> {
    if q == 2 {
        Ok(())
    } else {
        Err(PcaError::InvalidParams(format!(
            "character bases need a binary alphabet, got {q} symbols"
        )))
    }
}

fn char_value(basis: Basis, a: &SiteSet, x: &dyn Fn(&[i64]) -> u8) -> f64 {
    a.iter().map(|s| basis.chi(x(s))).product()
}

/// `χ_A(x) = Π_{i∈A} χ(x_i)`.
pub fn char_eval(basis: Basis, a: &SiteSet, config: &Configuration) -> Result<f64> {
    check_binary(config.alphabet().size())?;
    Ok(char_value(basis, a, &|s| config.get(s)))
}

fn subset(window: &SiteSet, mask: usize) -> SiteSet {
    let n = window.len();
    let sites = window
        .iter()
        .enumerate()
        .filter(|(j, _)| mask >> (n - 1 - j) & 1 == 1)
        .map(|(_, s)| s.clone())
        .collect();
    SiteSet::new(window.dim(), sites).expect("subset of a valid window")
}

/// Expansion of an observable given by its table over `{0,1}^A`, indexed
/// like window patterns (first site most significant).
pub fn observable_to_basis(basis: Basis, window: &SiteSet, table: &[f64]) -> Result<CharacterObservable> {
    let n = window.len();
    if n > MAX_EXPANSION_SITES {
        return Err(PcaError::BudgetExceeded {
            what: "character expansion window",
            needed: n as u128,
            budget: MAX_EXPANSION_SITES as u128,
        });
    }
    if table.len() != 1 << n {
        return Err(PcaError::WindowMismatch(format!(
            "table of {} entries for {} binary sites",
            table.len(),
            n
        )));
    }
    let mut c = table.to_vec();
    let mut h = 1;
    while h < c.len() {
        for i in (0..c.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (c[j], c[j + h]);
                match basis {
                    // pattern bit 0 at mask bit 0: χ = 1 / −1
                    Basis::FourierBinary => {
                        c[j] = a + b;
                        c[j + h] = a - b;
                    }
                    // Möbius inversion over subsets
                    Basis::MoebiusBinary => c[j + h] = b - a,
                }
            }
        }
        h *= 2;
    }
    if basis == Basis::FourierBinary {
        let scale = 1.0 / table.len() as f64;
        c.iter_mut().for_each(|v| *v *= scale);
    }
    let mut out = CharacterObservable::new(basis);
    for (mask, v) in c.into_iter().enumerate() {
        if v != 0.0 {
            out.terms.insert(subset(window, mask), Complex64::new(v, 0.0));
        }
    }
    Ok(out)
}

/// Expansion of the cylinder indicator `1_{[u]}` on `window`.
pub fn indicator_to_basis(basis: Basis, window: &SiteSet, u: &[u8]) -> Result<CharacterObservable> {
    if u.len() != window.len() || u.iter().any(|&a| a > 1) {
        return Err(PcaError::WindowMismatch(
            "pattern does not fit the window".into(),
        ));
    }
    if window.len() > MAX_EXPANSION_SITES {
        return Err(PcaError::BudgetExceeded {
            what: "character expansion window",
            needed: window.len() as u128,
            budget: MAX_EXPANSION_SITES as u128,
        });
    }
    let mut table = vec![0.0; 1 << window.len()];
    table[u.iter().fold(0usize, |a, &b| a * 2 + b as usize)] = 1.0;
    observable_to_basis(basis, window, &table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// `F(x)_k = Σ_{j∈N} x_{k+j} mod 2`, analysed in the Fourier basis.
    Xor,
    /// `F(x)_k = Π_{j∈N} x_{k+j}`, analysed in the Möbius basis.
    Spreading,
}

impl RuleKind {
    pub fn basis(self) -> Basis {
        match self {
            RuleKind::Xor => Basis::FourierBinary,
            RuleKind::Spreading => Basis::MoebiusBinary,
        }
    }

    /// Recognizes the binary XOR and AND rules on any neighborhood.
    pub fn of(rule: &LocalRule) -> Option<RuleKind> {
        if rule.alphabet().size() != 2 {
            return None;
        }
        let m = rule.neighborhood().len();
        let xor = (0..1usize << m).all(|i| rule.table()[i] as u32 == i.count_ones() % 2);
        let and = (0..1usize << m).all(|i| (rule.table()[i] == 1) == (i == (1 << m) - 1));
        if xor {
            Some(RuleKind::Xor)
        } else if and {
            Some(RuleKind::Spreading)
        } else {
            None
        }
    }
}

/// A noisy XOR or AND rule with binary flip noise `θ(0,1) = p`, `θ(1,0) = q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterPca {
    pub kind: RuleKind,
    pub neighborhood: Neighborhood,
    pub p: f64,
    pub q: f64,
}

impl CharacterPca {
    pub fn new(kind: RuleKind, neighborhood: Neighborhood, p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(PcaError::InvalidParams(format!(
                "flip probabilities ({p}, {q}) outside [0, 1]"
            )));
        }
        Ok(CharacterPca {
            kind,
            neighborhood,
            p,
            q,
        })
    }

    /// Reads the kind and the flip probabilities off a decomposed PCA.
    pub fn from_pca(pca: &PcaRule) -> Result<Self> {
        let (rule, noise) = pca.decomposition().ok_or(PcaError::NotDecomposable)?;
        let kind = RuleKind::of(rule).ok_or_else(|| {
            PcaError::InvalidParams("character analysis needs the XOR or AND rule".into())
        })?;
        let theta = noise_matrix(noise);
        CharacterPca::new(kind, rule.neighborhood().clone(), theta[1], theta[2])
    }

    /// `θχ = α + βχ`.
    fn affine(&self) -> (f64, f64) {
        match self.kind {
            RuleKind::Xor => (self.q - self.p, 1.0 - self.p - self.q),
            RuleKind::Spreading => (self.p, 1.0 - self.p - self.q),
        }
    }
}

/// Dual set with `χ_A ∘ F = χ_{F*A}`: sites of `A + N` hit an odd number of
/// times for XOR, all of `A + N` for the spreading rule.
pub fn f_star(kind: RuleKind, nb: &Neighborhood, a: &SiteSet) -> Result<SiteSet> {
    if nb.dim() != a.dim() {
        return Err(PcaError::WindowMismatch(format!(
            "set of dimension {} for a neighborhood of dimension {}",
            a.dim(),
            nb.dim()
        )));
    }
    let mut hits: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for s in a.iter() {
        for o in nb.offsets() {
            let k: Vec<i64> = s.iter().zip(o).map(|(x, y)| x + y).collect();
            *hits.entry(k).or_default() += 1;
        }
    }
    let sites = hits
        .into_iter()
        .filter(|(_, c)| kind == RuleKind::Spreading || c % 2 == 1)
        .map(|(k, _)| k)
        .collect();
    SiteSet::new(a.dim(), sites)
}

/// `Φχ_A = Σ_{I⊆F*A} α^{|F*A∖I|} β^{|I|} χ_I`, where `Φχ_A(x) = E[χ_A(F(θx))]`:
/// the noise acts on `F*A` before the rule is applied.
pub fn pca_on_character(pca: &CharacterPca, a: &SiteSet) -> Result<CharacterObservable> {
    let dual = f_star(pca.kind, &pca.neighborhood, a)?;
    let n = dual.len();
    if n > MAX_EXPANSION_SITES {
        return Err(PcaError::BudgetExceeded {
            what: "dual set expansion",
            needed: 1u128 << n.min(127),
            budget: 1 << MAX_EXPANSION_SITES,
        });
    }
    let (alpha, beta) = pca.affine();
    let mut out = CharacterObservable::new(pca.kind.basis());
    for mask in 0..1usize << n {
        let k = mask.count_ones() as i32;
        let c = alpha.powi(n as i32 - k) * beta.powi(k);
        out.terms.insert(subset(&dual, mask), Complex64::new(c, 0.0));
    }
    Ok(out)
}

/// `Φh` by linearity.
pub fn pca_on_observable(pca: &CharacterPca, h: &CharacterObservable) -> Result<CharacterObservable> {
    if h.basis != pca.kind.basis() {
        return Err(PcaError::InvalidParams(
            "observable is expanded in the wrong basis".into(),
        ));
    }
    let mut out = CharacterObservable::new(h.basis);
    for (a, c) in &h.terms {
        for (i, d) in pca_on_character(pca, a)?.terms {
            out.add_term(i, c * d);
        }
    }
    Ok(out)
}

/// `|||h||| = Σ_{A≠∅} |ĥ_A|`.
pub fn seminorm(h: &CharacterObservable) -> f64 {
    h.terms
        .iter()
        .filter(|(a, _)| !a.is_empty())
        .map(|(_, c)| c.norm())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    /// `|||Φχ_A|||` for a dual set of the given size.
    pub per_character: f64,
    pub rho: f64,
    pub certified: bool,
}

/// `(|α| + |β|)^s − |α|^s` for `s = |F*A|`, and `ρ = |α| + |β|`.
pub fn contraction_coefficient(kind: RuleKind, p: f64, q: f64, dual_size: usize) -> Contraction {
    let (alpha, beta) = match kind {
        RuleKind::Xor => ((q - p).abs(), (1.0 - p - q).abs()),
        RuleKind::Spreading => (p, (1.0 - p - q).abs()),
    };
    let rho = alpha + beta;
    let s = dual_size as i32;
    Contraction {
        per_character: rho.powi(s) - alpha.powi(s),
        rho,
        certified: rho < 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{decode_pattern, Alphabet, Geometry};

    fn set(points: &[i64]) -> SiteSet {
        SiteSet::from_1d(points)
    }

    fn nb01() -> Neighborhood {
        Neighborhood::from_1d(&[0, 1]).unwrap()
    }

    #[test]
    fn char_eval_examples() {
        let ones = Configuration::constant(Alphabet::binary(), Geometry::ring(6), 1).unwrap();
        assert_eq!(char_eval(Basis::FourierBinary, &SiteSet::empty(1), &ones).unwrap(), 1.0);
        assert_eq!(char_eval(Basis::MoebiusBinary, &SiteSet::empty(1), &ones).unwrap(), 1.0);
        assert_eq!(char_eval(Basis::FourierBinary, &set(&[0, 1]), &ones).unwrap(), 1.0);
        let x = Configuration::new(Alphabet::binary(), Geometry::ring(4), vec![1, 0, 1, 1]).unwrap();
        assert_eq!(char_eval(Basis::MoebiusBinary, &set(&[0, 1]), &x).unwrap(), 0.0);
        let three = Configuration::constant(Alphabet::new(3).unwrap(), Geometry::ring(4), 0).unwrap();
        assert!(char_eval(Basis::FourierBinary, &set(&[0]), &three).is_err());
    }

    #[test]
    fn indicator_expansions() {
        let h = indicator_to_basis(Basis::FourierBinary, &set(&[0]), &[1]).unwrap();
        assert_eq!(h.coefficient(&SiteSet::empty(1)).re, 0.5);
        assert_eq!(h.coefficient(&set(&[0])).re, -0.5);
        let h = indicator_to_basis(Basis::MoebiusBinary, &set(&[0]), &[1]).unwrap();
        assert_eq!(h.terms.len(), 1);
        assert_eq!(h.coefficient(&set(&[0])).re, 1.0);
        let h = indicator_to_basis(Basis::MoebiusBinary, &set(&[0, 1]), &[0, 0]).unwrap();
        assert_eq!(h.coefficient(&SiteSet::empty(1)).re, 1.0);
        assert_eq!(h.coefficient(&set(&[0])).re, -1.0);
        assert_eq!(h.coefficient(&set(&[1])).re, -1.0);
        assert_eq!(h.coefficient(&set(&[0, 1])).re, 1.0);
    }

    #[test]
    fn expansions_reproduce_tables() {
        let w = set(&[-1, 0, 2]);
        let table: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        for basis in [Basis::FourierBinary, Basis::MoebiusBinary] {
            let h = observable_to_basis(basis, &w, &table).unwrap();
            for (i, &v) in table.iter().enumerate() {
                let pat = decode_pattern(i, 3, 2);
                let x = |s: &[i64]| pat[w.position(s).unwrap()];
                assert!((h.eval_with(&x).re - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cylinder_seminorm() {
        for n in 1..=6 {
            let w = SiteSet::interval(0, n - 1);
            let u: Vec<u8> = (0..n).map(|k| (k % 2) as u8).collect();
            let h = indicator_to_basis(Basis::FourierBinary, &w, &u).unwrap();
            assert!((seminorm(&h) - (1.0 - 0.5f64.powi(n as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_sets() {
        // χ_{{0}}(F x) = χ(x_0 ⊕ x_1): the dual set is {0, 1}
        assert_eq!(f_star(RuleKind::Xor, &nb01(), &set(&[0])).unwrap(), set(&[0, 1]));
        assert_eq!(f_star(RuleKind::Xor, &nb01(), &set(&[0, 1])).unwrap(), set(&[0, 2]));
        assert_eq!(f_star(RuleKind::Spreading, &nb01(), &set(&[0])).unwrap(), set(&[0, 1]));
        assert_eq!(f_star(RuleKind::Spreading, &nb01(), &set(&[0, 1])).unwrap(), set(&[0, 1, 2]));
    }

    #[test]
    fn character_action_special_cases() {
        let a = set(&[0, 1]);
        let noiseless = CharacterPca::new(RuleKind::Xor, nb01(), 0.0, 0.0).unwrap();
        let h = pca_on_character(&noiseless, &a).unwrap();
        let nonzero: Vec<_> = h.terms.iter().filter(|(_, c)| c.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].0, &set(&[0, 2]));
        let half = CharacterPca::new(RuleKind::Xor, nb01(), 0.5, 0.5).unwrap();
        assert_eq!(seminorm(&pca_on_character(&half, &a).unwrap()), 0.0);
        assert_eq!(pca_on_character(&half, &a).unwrap().coefficient(&SiteSet::empty(1)).norm(), 0.0);
    }

    #[test]
    fn contraction_examples() {
        let c = contraction_coefficient(RuleKind::Xor, 0.5, 0.5, 3);
        assert_eq!((c.rho, c.per_character), (0.0, 0.0));
        let c = contraction_coefficient(RuleKind::Xor, 0.1, 0.2, 2);
        assert!((c.rho - 0.8).abs() < 1e-15 && c.certified);
        let c = contraction_coefficient(RuleKind::Spreading, 0.1, 0.0, 2);
        assert_eq!(c.rho, 1.0);
        assert!(!c.certified);
    }

    #[test]
    fn kinds_from_rules() {
        use crate::rules::{build_zoo, ZooParams};
        let z = |n| build_zoo(n, &ZooParams::default()).unwrap();
        assert_eq!(RuleKind::of(&z("xor")), Some(RuleKind::Xor));
        assert_eq!(RuleKind::of(&z("spreading_binary")), Some(RuleKind::Spreading));
        assert_eq!(RuleKind::of(&z("majority1d")), None);
        let pca = crate::noise::compose_pca(
            &z("xor"),
            &crate::noise::NoiseKernel::binary_flip(0.1, 0.3).unwrap(),
        )
        .unwrap();
        let cp = CharacterPca::from_pca(&pca).unwrap();
        assert_eq!((cp.kind, cp.p, cp.q), (RuleKind::Xor, 0.1, 0.3));
    }
}
