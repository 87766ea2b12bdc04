use proptest::prelude::*;

use pca_core::cftp::{envelope_rule, EnvelopeRunner};
use pca_core::diagnostics::{defect_support, entropy_defect_check, product_law};
use pca_core::engine::{build_update_function, RandomField, Stepper};
use pca_core::fourier::{
    char_eval, contraction_coefficient, f_star, indicator_to_basis, observable_to_basis,
    pca_on_character, pca_on_observable, seminorm, Basis, CharacterObservable, CharacterPca,
    RuleKind,
};
use pca_core::invariant::{composition_count, enumerate_measures};
use pca_core::lattice::{decode_pattern, encode_pattern, Configuration, Geometry};
use pca_core::noise::{compose_pca, NoiseKernel, NoiseModel};
use pca_core::rules::{build_zoo, ZooParams};
use pca_core::{Alphabet, LocalRule, Neighborhood, PcaRule, SiteSet};

use num_complex::Complex64;

fn normalize(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// A PCA on `q` symbols with `N = {0, 1}` and random rows, some of them
/// point masses.
fn arb_pca() -> impl Strategy<Value = PcaRule> {
    (2usize..=3).prop_flat_map(|q| {
        let rows = q * q;
        (
            Just(q),
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, q), rows),
            prop::collection::vec(prop::option::weighted(0.3, 0..q as u8), rows),
        )
            .prop_map(|(q, raw, point)| {
                let phi: Vec<f64> = raw
                    .iter()
                    .zip(&point)
                    .flat_map(|(r, p)| match p {
                        Some(b) => (0..q).map(|a| f64::from(u8::from(a as u8 == *b))).collect(),
                        None => normalize(r),
                    })
                    .collect();
                PcaRule::new(Alphabet::new(q).unwrap(), Neighborhood::from_1d(&[0, 1]).unwrap(), phi)
                    .unwrap()
            })
    })
}

fn arb_rule() -> impl Strategy<Value = LocalRule> {
    (2usize..=3, prop::collection::btree_set(-2i64..=2, 1..=3)).prop_flat_map(|(q, offsets)| {
        let nb = Neighborhood::from_1d(&offsets.into_iter().collect::<Vec<_>>()).unwrap();
        let len = q.pow(nb.len() as u32);
        prop::collection::vec(0..q as u8, len)
            .prop_map(move |table| LocalRule::new(Alphabet::new(q).unwrap(), nb.clone(), table).unwrap())
    })
}

fn arb_1d_set(max: usize) -> impl Strategy<Value = SiteSet> {
    prop::collection::btree_set(-4i64..=4, 1..=max)
        .prop_map(|s| SiteSet::from_1d(&s.into_iter().collect::<Vec<_>>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composed_rows_are_distributions(rule in arb_rule(), raw in prop::collection::vec(0.01f64..1.0, 9)) {
        let q = rule.alphabet().size();
        let theta: Vec<f64> = raw[..q * q].chunks(q).flat_map(normalize).collect();
        let noise = NoiseKernel::new(rule.alphabet().clone(), NoiseModel::ZeroRange { theta }).unwrap();
        let pca = compose_pca(&rule, &noise).unwrap();
        for i in 0..pca.rows() {
            let s: f64 = pca.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(pca.row(i).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn envelope_restricts_to_phi(pca in arb_pca()) {
        let env = envelope_rule(&pca).unwrap();
        let q = pca.alphabet().size();
        let e = q + 1;
        for i in 0..e * e {
            let pattern = decode_pattern(i, 2, e);
            let row = env.row(&pattern);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if pattern.iter().all(|&a| (a as usize) < q) {
                let phi = pca.row(encode_pattern(&pattern, q));
                prop_assert!(row[..q].iter().zip(phi).all(|(a, b)| (a - b).abs() < 1e-12));
                prop_assert!(row[q].abs() < 1e-12);
            }
        }
        // masses on known symbols only shrink as patterns lose information
        for i in 0..q * q {
            let pattern = decode_pattern(i, 2, q);
            for hide in 0..2 {
                let mut coarse = pattern.clone();
                coarse[hide] = q as u8;
                let fine = env.row(&pattern);
                prop_assert!(env.row(&coarse)[..q].iter().zip(fine).all(|(c, f)| *c <= f + 1e-12));
            }
        }
    }

    #[test]
    fn update_function_matches_phi(pca in arb_pca(), us in prop::collection::vec(0.0f64..1.0, 16)) {
        let uf = build_update_function(&pca);
        let q = pca.alphabet().size();
        for i in 0..pca.rows() {
            let segs = uf.segments(i);
            let mut mass = vec![0.0; q];
            let mut at = 0.0;
            for s in &segs {
                prop_assert!((s.start - at).abs() < 1e-12 && s.end >= s.start);
                mass[s.symbol as usize] += s.end - s.start;
                at = s.end;
            }
            prop_assert!((at - 1.0).abs() < 1e-12);
            prop_assert!(mass.iter().zip(pca.row(i)).all(|(a, b)| (a - b).abs() < 1e-12));
            for &u in &us {
                if let Some(b) = uf.certain(u) {
                    prop_assert_eq!(uf.sample(i, u), b);
                }
            }
        }
    }

    #[test]
    fn envelope_refines_every_concrete_run(
        pca in arb_pca(),
        seed in any::<u64>(),
        horizon in 1u64..=6,
        init in prop::collection::vec(0u8..3, 32),
    ) {
        let q = pca.alphabet().size() as u8;
        let window = SiteSet::interval(0, 1);
        let runner = EnvelopeRunner::new(&pca, &window).unwrap();
        let field = RandomField::new(seed);
        let env = runner.run(&field, horizon);
        let stepper = Stepper::new(runner.update_function(), &Geometry::ring(32)).unwrap();
        let cells: Vec<u8> = init.iter().map(|a| a % q).collect();
        let x0 = Configuration::new(pca.alphabet().clone(), Geometry::ring(32), cells).unwrap();
        let frames = stepper.run(&x0, &field, -(horizon as i64), horizon as usize).unwrap();
        let last = frames.last().unwrap();
        for (k, e) in env.iter().enumerate() {
            if let Some(v) = e {
                prop_assert_eq!(*v, last.cells()[k]);
            }
        }
    }

    #[test]
    fn compositions_sum_to_k(q in 2usize..=3, len in 1i64..=2, k in 1u64..=6) {
        let window = SiteSet::interval(0, len - 1);
        let all: Vec<_> = enumerate_measures(&window, q, k, 1 << 20).unwrap().collect();
        let parts = q.pow(len as u32);
        prop_assert_eq!(all.len() as u128, composition_count(k, parts));
        for nu in &all {
            prop_assert_eq!(nu.counts.iter().sum::<u64>(), k);
            prop_assert_eq!(nu.counts.len(), parts);
        }
        for pair in all.windows(2) {
            prop_assert!(pair[0].counts > pair[1].counts);
        }
    }

    #[test]
    fn expansions_reproduce_tables(len in 1i64..=5, table in prop::collection::vec(-1.0f64..1.0, 32)) {
        let window = SiteSet::interval(0, len - 1);
        let n = len as usize;
        for basis in [Basis::FourierBinary, Basis::MoebiusBinary] {
            let h = observable_to_basis(basis, &window, &table[..1 << n]).unwrap();
            for (i, v) in table[..1 << n].iter().enumerate() {
                let bits = decode_pattern(i, n, 2);
                let got = h.eval_with(&|s: &[i64]| bits[s[0] as usize]);
                prop_assert!((got.re - v).abs() < 1e-12 && got.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn characters_are_orthonormal(a in arb_1d_set(4), b in arb_1d_set(4)) {
        // uniform measure on the 9-cycle holding A + 4 and B + 4
        let (a, b) = (a.translate(&[4]), b.translate(&[4]));
        let table: Vec<(f64, f64)> = (0..1usize << 9)
            .map(|i| {
                let x = Configuration::new(Alphabet::binary(), Geometry::ring(9), decode_pattern(i, 9, 2)).unwrap();
                (
                    char_eval(Basis::FourierBinary, &a, &x).unwrap(),
                    char_eval(Basis::FourierBinary, &b, &x).unwrap(),
                )
            })
            .collect();
        let inner = table.iter().map(|(u, v)| u * v).sum::<f64>() / 512.0;
        prop_assert!((inner - f64::from(u8::from(a == b))).abs() < 1e-12);
        let values: Vec<f64> = table.iter().map(|t| t.0).collect();
        let h = observable_to_basis(Basis::FourierBinary, &SiteSet::interval(0, 8), &values).unwrap();
        prop_assert!((h.coefficient(&a).re - 1.0).abs() < 1e-12);
        prop_assert!((seminorm(&h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn indicator_expansion_evaluates_to_indicator(u in prop::collection::vec(0u8..2, 1..=5)) {
        let window = SiteSet::interval(0, u.len() as i64 - 1);
        for basis in [Basis::FourierBinary, Basis::MoebiusBinary] {
            let h = indicator_to_basis(basis, &window, &u).unwrap();
            for i in 0..1usize << u.len() {
                let bits = decode_pattern(i, u.len(), 2);
                let want = f64::from(u8::from(bits == u));
                prop_assert!((h.eval_with(&|s: &[i64]| bits[s[0] as usize]).re - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seminorm_matches_closed_form(a in arb_1d_set(5), p in 0.0f64..=1.0, q in 0.0f64..=1.0, xor in any::<bool>()) {
        let kind = if xor { RuleKind::Xor } else { RuleKind::Spreading };
        let nb = Neighborhood::from_1d(&[0, 1]).unwrap();
        let cp = CharacterPca::new(kind, nb.clone(), p, q).unwrap();
        let s = f_star(kind, &nb, &a).unwrap().len();
        let (al, be) = match kind {
            RuleKind::Xor => ((q - p).abs(), (1.0 - p - q).abs()),
            RuleKind::Spreading => (p, (1.0 - p - q).abs()),
        };
        let closed = (al + be).powi(s as i32) - al.powi(s as i32);
        let h = pca_on_character(&cp, &a).unwrap();
        prop_assert!((seminorm(&h) - closed).abs() < 1e-12);
        prop_assert!((contraction_coefficient(kind, p, q, s).per_character - closed).abs() < 1e-12);
    }

    #[test]
    fn seminorm_contracts(
        sets in prop::collection::vec(arb_1d_set(3), 1..=4),
        coeffs in prop::collection::vec(-1.0f64..1.0, 4),
        p in 0.0f64..=1.0,
        q in 0.0f64..=1.0,
        xor in any::<bool>(),
    ) {
        let kind = if xor { RuleKind::Xor } else { RuleKind::Spreading };
        let rho = contraction_coefficient(kind, p, q, 1).rho;
        prop_assume!(rho <= 1.0);
        let cp = CharacterPca::new(kind, Neighborhood::from_1d(&[0, 1]).unwrap(), p, q).unwrap();
        let mut h = CharacterObservable::new(kind.basis());
        for (a, c) in sets.iter().zip(&coeffs) {
            h.terms.insert(a.clone(), Complex64::new(*c, 0.0));
        }
        let out = pca_on_observable(&cp, &h).unwrap();
        prop_assert!(seminorm(&out) <= rho * seminorm(&h) + 1e-12);
    }

    #[test]
    fn rule_text_round_trips(rule in arb_rule()) {
        prop_assert_eq!(LocalRule::from_text(&rule.to_text()).unwrap(), rule);
    }

    #[test]
    fn random_field_is_a_pure_function(seed in any::<u64>(), t in -1000i64..1000, k in -1000i64..1000, c in 0u32..4) {
        let f = RandomField::new(seed);
        let u = f.uniform_1d(t, k, c);
        prop_assert!((0.0..1.0).contains(&u));
        prop_assert_eq!(u.to_bits(), RandomField::new(seed).uniform_1d(t, k, c).to_bits());
    }

    #[test]
    fn entropy_defect_holds_for_product_laws(len in 1usize..=4, ps in prop::collection::vec(0.0f64..=1.0, 8)) {
        let xor = build_zoo("xor", &ZooParams::default()).unwrap();
        let (lo, hi) = defect_support(&xor, len).unwrap();
        let width = (hi - lo + 1) as usize;
        let law = product_law(&ps[..width].iter().map(|&p| vec![1.0 - p, p]).collect::<Vec<_>>());
        let r = entropy_defect_check(&xor, &[law], len).unwrap();
        prop_assert!(r[0].holds, "{:?}", r[0]);
    }
}
