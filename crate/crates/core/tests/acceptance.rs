//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit status
//! when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pca_core::cftp::{certify, cftp_sample, p_question, SpreadingSampler, Verdict};
use pca_core::diagnostics::{
    defect_support, discrepancy_decay, entropy_defect_check, percolation_survival, product_law,
    tv_decay,
};
use pca_core::engine::{
    boundary_kernel_matrix, exact_transition_matrix, ring_marginal, stationary_distribution,
    BoundarySide, RandomField,
};
use pca_core::fourier::{
    char_eval, contraction_coefficient, f_star, pca_on_character, seminorm, Basis, CharacterPca,
    RuleKind,
};
use pca_core::invariant::{approximate_invariant, InvariantSearch, TargetPattern};
use pca_core::lattice::{decode_pattern, total_variation, Configuration, Geometry};
use pca_core::noise::{compose_pca, NoiseKernel};
use pca_core::rules::{build_zoo, ZooParams};
use pca_core::{Alphabet, LocalRule, Neighborhood, PcaRule, SiteSet};

struct Outcome {
    pass: bool,
    detail: String,
}

fn zoo(name: &str) -> LocalRule {
    build_zoo(name, &ZooParams::default()).unwrap()
}

fn xor_flip(p: f64, q: f64) -> PcaRule {
    compose_pca(&zoo("xor"), &NoiseKernel::binary_flip(p, q).unwrap()).unwrap()
}

fn ring_const(n: usize, q: usize, s: u8) -> Configuration {
    Configuration::constant(Alphabet::new(q).unwrap(), Geometry::ring(n), s).unwrap()
}

fn exact_invariance() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for eps in [0.1, 0.3] {
        for n in [4, 6] {
            let m = exact_transition_matrix(&xor_flip(eps, eps), n).unwrap();
            let s = m.states();
            let u = vec![1.0 / s as f64; s];
            let d: f64 = m.apply_left(&u).iter().map(|p| (p - 1.0 / s as f64).abs()).sum();
            worst = worst.max(d);
            parts.push(format!("eps={eps},n={n}: {d:.4e}"));
        }
    }
    // frozen-boundary window kernels, for which the uniform law is invariant
    let mut window = 0.0f64;
    for eps in [0.1, 0.3] {
        for k in [4, 6] {
            for w in 0..2u8 {
                let p = boundary_kernel_matrix(&xor_flip(eps, eps), k, &[w], BoundarySide::Right).unwrap();
                let s = 1usize << k;
                let d: f64 = (0..s)
                    .map(|z| ((0..s).map(|x| p[x * s + z]).sum::<f64>() / s as f64 - 1.0 / s as f64).abs())
                    .sum();
                window = window.max(d);
            }
        }
    }
    Outcome {
        pass: worst < 1e-12,
        detail: format!(
            "torus chain ‖uP−u‖₁: {} (bound 1e-12); frozen-boundary window kernels: max {window:.1e}",
            parts.join(", ")
        ),
    }
}

fn cftp_unbiased() -> Outcome {
    let pca = xor_flip(0.4, 0.4);
    let w = SiteSet::interval(0, 1);
    let seeds = 100_000u64;
    let mut counts = [0u64; 4];
    for s in 0..seeds {
        counts[cftp_sample(&pca, &w, &RandomField::new(s), 1 << 16).unwrap().pattern_index] += 1;
    }
    let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / seeds as f64).collect();
    let tv = total_variation(&emp, &[0.25; 4]);

    let and = zoo("spreading_binary");
    let sampler = SpreadingSampler::new(&and, 0.2, &[0.5, 0.5]).unwrap();
    let m = exact_transition_matrix(sampler.pca(), 8).unwrap();
    let pi = stationary_distribution(&m).unwrap();
    let oracle = ring_marginal(&pi, 8, 2, &[0])[1];
    let draws = 100_000u64;
    let ones = (0..draws)
        .filter(|&s| sampler.sample(&[0], &RandomField::new(s), 1 << 16, 1 << 20).unwrap() == 1)
        .count() as f64
        / draws as f64;
    let diff = (ones - oracle).abs();
    Outcome {
        pass: tv <= 0.01 && diff <= 0.02,
        detail: format!(
            "cftp window TV {tv:.4} (≤ 0.01); spreading tree P(1) = {ones:.5} vs torus-8 oracle {oracle:.5}, |diff| {diff:.5} (≤ 0.02)"
        ),
    }
}

/// `E[χ_A(F(θx))]`, summing over every noise outcome on `A + N`.
fn brute_force(kind: RuleKind, nb: &Neighborhood, p: f64, q: f64, a: &SiteSet, x: &dyn Fn(i64) -> u8) -> f64 {
    let basis = kind.basis();
    let theta = [[1.0 - p, p], [q, 1.0 - q]];
    let offsets: Vec<i64> = nb.offsets().iter().map(|o| o[0]).collect();
    let support: Vec<i64> = a
        .iter()
        .flat_map(|s| offsets.iter().map(move |o| s[0] + o))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = support.len();
    (0..1usize << n)
        .map(|yi| {
            let y = decode_pattern(yi, n, 2);
            let prob: f64 = support
                .iter()
                .zip(&y)
                .map(|(&k, &b)| theta[x(k) as usize][b as usize])
                .product();
            let at = |k: i64| y[support.iter().position(|&s| s == k).unwrap()];
            let value: f64 = a
                .iter()
                .map(|s| {
                    let vals = offsets.iter().map(|o| at(s[0] + o));
                    let fy = match kind {
                        RuleKind::Xor => vals.fold(0, |acc, v| acc ^ v),
                        RuleKind::Spreading => vals.fold(1, |acc, v| acc & v),
                    };
                    basis.chi(fy)
                })
                .product();
            prob * value
        })
        .sum()
}

fn fourier_equivalence() -> Outcome {
    let nb = Neighborhood::from_1d(&[0, 1]).unwrap();
    let field = RandomField::new(2024);
    // every nonempty A ⊆ {0..5} with |A| ≤ 4
    let sets: Vec<SiteSet> = (1usize..64)
        .filter(|m| m.count_ones() <= 4)
        .map(|m| SiteSet::from_1d(&(0..6).filter(|k| m >> k & 1 == 1).collect::<Vec<i64>>()))
        .collect();
    let mut max_expansion = 0.0f64;
    let mut max_seminorm = 0.0f64;
    for trial in 0..100 {
        let p = field.uniform_1d(trial, 0, 0);
        let q = field.uniform_1d(trial, 1, 0);
        for kind in [RuleKind::Xor, RuleKind::Spreading] {
            let cp = CharacterPca::new(kind, nb.clone(), p, q).unwrap();
            for a in &sets {
                let h = pca_on_character(&cp, a).unwrap();
                // 20 random configurations on 0..=6, which covers A + N
                for r in 0..20 {
                    let bits: Vec<u8> = (0..7).map(|k| u8::from(field.uniform_1d(trial, k, 1 + r) < 0.5)).collect();
                    let x = |k: i64| bits[k as usize];
                    let lhs = h.eval_with(&|s: &[i64]| x(s[0])).re;
                    max_expansion = max_expansion.max((lhs - brute_force(kind, &nb, p, q, a, &x)).abs());
                }
                let dual = f_star(kind, &nb, a).unwrap().len() as i32;
                let closed = match kind {
                    RuleKind::Xor => {
                        let (al, be) = ((q - p).abs(), (1.0 - p - q).abs());
                        (al + be).powi(dual) - al.powi(dual)
                    }
                    RuleKind::Spreading => {
                        let be = (1.0 - p - q).abs();
                        (p + be).powi(dual) - p.powi(dual)
                    }
                };
                let formula = contraction_coefficient(kind, p, q, dual as usize).per_character;
                max_seminorm = max_seminorm
                    .max((seminorm(&h) - closed).abs())
                    .max((formula - closed).abs());
            }
        }
    }
    // characters evaluate as products of χ on a torus as well
    let ones = ring_const(8, 2, 1);
    let chi_ok = char_eval(Basis::FourierBinary, &SiteSet::from_1d(&[0, 1]), &ones).unwrap() == 1.0;
    Outcome {
        pass: max_expansion <= 1e-12 && max_seminorm <= 1e-12 && chi_ok,
        detail: format!(
            "{} sets × 2 kinds × 100 (p,q): max expansion error {max_expansion:.1e}, max seminorm error {max_seminorm:.1e} (≤ 1e-12)",
            sets.len()
        ),
    }
}

fn tv_envelope() -> Outcome {
    let pca = xor_flip(0.1, 0.2);
    let c = tv_decay(
        &pca,
        &SiteSet::interval(0, 1),
        &[ring_const(64, 2, 0), ring_const(64, 2, 1)],
        30,
        10_000,
        &RandomField::new(7),
    )
    .unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0;
    for (t, (v, e)) in c.values.iter().zip(&c.stderr).enumerate() {
        let slack = v - (4.0 * 0.8f64.powi(t as i32) + 3.0 * e);
        if slack > worst {
            worst = slack;
            at = t;
        }
    }
    Outcome {
        pass: worst <= 0.0,
        detail: format!(
            "max of d_A(t) − (4·0.8^t + 3σ) over t ≤ 30 is {worst:.4} at t = {at}; d_A(30) = {:.4}",
            c.values[30]
        ),
    }
}

fn glider_discrepancy() -> Outcome {
    let params = ZooParams {
        velocities: Some(vec![1, -1]),
        pairs: Some(vec![(0, 1)]),
        ..Default::default()
    };
    let rule = build_zoo("gliders_annihilation", &params).unwrap();
    let pca = compose_pca(&rule, &NoiseKernel::birth_death(vec![0.1; 2], vec![0.1; 2]).unwrap()).unwrap();
    let c = discrepancy_decay(&pca, &ring_const(128, 4, 0), &ring_const(128, 4, 1), 50, 10_000, &RandomField::new(11))
        .unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut envelope_ok = true;
    for t in 0..=50usize {
        let formula = 0.8f64.powi(t as i32) * (2.0 * t as f64 + 1.0) * 2.0;
        envelope_ok &= (c.envelope[t] - formula).abs() < 1e-12;
        worst = worst.max(c.curve.values[t] - (formula + 3.0 * c.curve.stderr[t]));
    }
    Outcome {
        pass: worst <= 0.0 && envelope_ok && (c.eps - 0.2).abs() < 1e-12,
        detail: format!(
            "max of mean discrepancy − ((0.8)^t(2t+1)·2 + 3σ) over t ≤ 50 is {worst:.4}; D(1) = {:.4}, D(10) = {:.4}",
            c.curve.values[1], c.curve.values[10]
        ),
    }
}

fn entropy_defect() -> Outcome {
    let xor = zoo("xor");
    let field = RandomField::new(5);
    let mut trials = 0;
    let mut failures = 0;
    let mut min_margin = f64::INFINITY;
    for len in 1..=6usize {
        let (lo, hi) = defect_support(&xor, len).unwrap();
        let width = (hi - lo + 1) as usize;
        let laws: Vec<Vec<f64>> = (0..1000)
            .map(|i| {
                let marginals: Vec<Vec<f64>> = (0..width)
                    .map(|k| {
                        let u = field.uniform_1d(i, (len * 16 + k) as i64, 0);
                        // every tenth site is a point mass
                        let p = if field.uniform_1d(i, (len * 16 + k) as i64, 1) < 0.1 { u.round() } else { u };
                        vec![1.0 - p, p]
                    })
                    .collect();
                product_law(&marginals)
            })
            .collect();
        for r in entropy_defect_check(&xor, &laws, len).unwrap() {
            trials += 1;
            failures += usize::from(!r.holds);
            min_margin = min_margin.min(r.h_out - (r.h_in - r.c));
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("{trials} exact trials over |J| = 1..6, {failures} violations, smallest margin {min_margin:.4} nats"),
    }
}

fn invariant_soundness() -> Outcome {
    let target = TargetPattern {
        sites: SiteSet::from_1d(&[0]),
        symbols: vec![1],
    };
    let id = LocalRule::identity(Alphabet::binary(), 1);
    let cases = [
        ("identity+flip 0.5", compose_pca(&id, &NoiseKernel::symmetric_flip(0.5).unwrap()).unwrap(), 4),
        ("xor+flip 0.45", xor_flip(0.45, 0.45), 6),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, pca, n) in cases {
        let m = exact_transition_matrix(&pca, n).unwrap();
        let oracle = ring_marginal(&stationary_distribution(&m).unwrap(), n, 2, &[0])[1];
        match approximate_invariant(&pca, &target, &InvariantSearch::new(3)) {
            Ok(r) => {
                let ok = (r.value - oracle).abs() < 1.0 / 3.0;
                pass &= ok;
                parts.push(format!(
                    "{name}: {:.4} vs torus-{n} oracle {oracle:.4} (m = {}, k = {}, {} candidates)",
                    r.value, r.m_final, r.k, r.candidates_checked
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn percolation() -> Outcome {
    let nb = Neighborhood::from_1d(&[0, 1]).unwrap();
    let f = RandomField::new(13);
    let low = percolation_survival(0.6, &nb, 1000, 1000, &f).unwrap().frequency;
    let high = percolation_survival(0.8, &nb, 1000, 1000, &f).unwrap().frequency;
    Outcome {
        pass: low < 0.01 && high > 0.2,
        detail: format!("survival {low:.3} at p = 0.6 (< 0.01), {high:.3} at p = 0.8 (> 0.2)"),
    }
}

fn certificates() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    for name in ["spreading_binary", "majority1d", "xor"] {
        let rule = zoo(name);
        for &eps in &grid {
            let pca = compose_pca(&rule, &NoiseKernel::memoryless(Alphabet::binary(), eps, vec![0.3, 0.7]).unwrap()).unwrap();
            let hand = 1.0 - eps;
            let c = certify(&pca);
            checked += 1;
            if (p_question(&pca) - hand).abs() > 1e-12 || (c.verdict == Verdict::ErgodicCertified) != (hand < c.bound_value) {
                bad.push(format!("{name} memoryless {eps}"));
            }
        }
        for &p in &grid {
            for &q in &grid {
                let pca = compose_pca(&rule, &NoiseKernel::binary_flip(p, q).unwrap()).unwrap();
                // |θ(0,1) − θ(1,1)| = |p − (1 − q)|
                let hand = (p - (1.0 - q)).abs();
                let c = certify(&pca);
                checked += 1;
                if (c.p_question - hand).abs() > 1e-12 || (c.verdict == Verdict::ErgodicCertified) != (c.p_question < c.bound_value) {
                    bad.push(format!("{name} flip ({p}, {q})"));
                }
            }
        }
    }
    let bounds = [
        certify(&xor_flip(0.1, 0.1)).bound_value,
        certify(&compose_pca(&zoo("majority1d"), &NoiseKernel::symmetric_flip(0.1).unwrap()).unwrap()).bound_value,
    ];
    let bounds_ok = (bounds[0] - 2.0 / 3.0).abs() < 1e-15 && bounds[1] == 0.5;
    Outcome {
        pass: bad.is_empty() && bounds_ok,
        detail: format!(
            "{checked} cases, {} mismatches{}; bounds 2/3 for N={{0,1}}, 1/2 for N={{-1,0,1}}",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("exact-chain invariance", Duration::from_secs(5), exact_invariance),
        ("CFTP unbiasedness", Duration::from_secs(120), cftp_unbiased),
        ("Fourier formula equivalence", Duration::from_secs(30), fourier_equivalence),
        ("TV decay envelope", Duration::from_secs(120), tv_envelope),
        ("glider discrepancy bound", Duration::from_secs(180), glider_discrepancy),
        ("entropy defect", Duration::from_secs(60), entropy_defect),
        ("invariant-measure algorithm", Duration::from_secs(300), invariant_soundness),
        ("percolation consistency", Duration::from_secs(60), percolation),
        ("certificate logic", Duration::from_secs(1), certificates),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed < limit;
        failed += usize::from(!pass);
        println!(
            "criterion {} [{}] {name}: {} ({:.2} s, limit {} s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
