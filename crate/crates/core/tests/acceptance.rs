//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed; exits nonzero when any
//! criterion fails.

mod common;

use std::time::Instant;

use lyapunov_verify::arrangement::Hyperplane;
use lyapunov_verify::arrangement::{enumerate_regions, EnumerationConfig};
use lyapunov_verify::combinatorics::{
    build_flat_poset, characteristic_polynomial, region_upper_bound, zaslavsky_count, FlatPoset,
};
use lyapunov_verify::dynamics::{builtin, parse_dynamics, DynamicsModel};
use lyapunov_verify::geometry::AxisBox;
use lyapunov_verify::gopt::{global_max, Budget};
use lyapunov_verify::network::ShallowReluNet;
use lyapunov_verify::verifier::{
    householder_to_e1, validate_counterexample, verify_detailed, CounterexampleKind, Verdict, VerifyConfig,
    VerifyOutcome,
};
use rand::{rngs::StdRng, Rng, SeedableRng};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Verification runs shared between criteria.
#[derive(Default)]
struct Ledger {
    /// `(net, dynamics, box, margin, outcome)`
    runs: Vec<(ShallowReluNet, DynamicsModel, AxisBox, f64, VerifyOutcome)>,
    /// Networks whose region counts feed the bound check.
    counted: Vec<(ShallowReluNet, usize)>,
}

impl Ledger {
    fn verify(&mut self, net: &ShallowReluNet, model: &DynamicsModel, bx: &AxisBox) -> &VerifyOutcome {
        let cfg = VerifyConfig::default();
        let out = verify_detailed(net, model, bx, &cfg).expect("verification runs");
        self.counted.push((net.clone(), out.report.region_count));
        self.runs.push((net.clone(), model.clone(), bx.clone(), cfg.margin, out));
        &self.runs.last().unwrap().4
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion_1(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let mut counts = Vec::new();
    for p in 2..=6 {
        let net = ShallowReluNet::l1_norm(p);
        let bx = AxisBox::cube(-10.0, 10.0, p).unwrap();
        let n = enumerate_regions(&net, &bx, &EnumerationConfig::default()).unwrap().len();
        ledger.counted.push((net, n));
        counts.push(n);
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: counts == [4, 8, 16, 32, 64] && secs < 10.0,
        detail: format!(
            "L1-norm region counts p=2..6: {counts:?} (expected [4, 8, 16, 32, 64]) in {secs:.2}s (limit 10s)"
        ),
    }
}

fn criterion_2(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut ok = true;
    for p in 2..=6 {
        let out = ledger.verify(
            &ShallowReluNet::l1_norm(p),
            &builtin("neg_cubic", p).unwrap(),
            &AxisBox::cube(-10.0, 10.0, p).unwrap(),
        );
        let s = out.report.counterexamples.len();
        ok &= out.report.verdict == Verdict::Verified && s == 0;
        rows.push(format!("p={p}: {:?} |S|={s}", out.report.verdict));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: ok && secs < 60.0,
        detail: format!("L1-norm + neg_cubic: {} in {secs:.2}s (limit 60s)", rows.join(", ")),
    }
}

/// `n` units with zero biases along rotated, roughly evenly spread directions
/// and positive output weights: a polygonal norm, Lyapunov near the origin.
fn near_lyapunov_net(rng: &mut StdRng, n: usize) -> ShallowReluNet {
    let rot: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let w1 = (0..n)
        .map(|k| {
            let t = rot + std::f64::consts::TAU * k as f64 / n as f64 + rng.gen_range(-0.1..0.1);
            let r = rng.gen_range(0.5..2.0);
            vec![r * t.cos(), r * t.sin()]
        })
        .collect();
    let w2 = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    ShallowReluNet::new(w1, vec![0.0; n], w2, 0.0).unwrap()
}

/// Eight unit-weight directions, the back half shifted by a twentieth turn so no
/// two are opposed. Sixteen sectors; rotations near 0.7 give a Lyapunov function
/// for the oscillator, the rest of the range narrowly fails.
fn sector_net(rng: &mut StdRng) -> ShallowReluNet {
    let rot: f64 = rng.gen_range(0.6..0.8);
    let w1 = (0..8)
        .map(|k| {
            let shift = if k >= 4 { std::f64::consts::PI / 10.0 } else { 0.0 };
            let t = rot + std::f64::consts::TAU * k as f64 / 8.0 + shift + rng.gen_range(-0.01..0.01);
            vec![t.cos(), t.sin()]
        })
        .collect();
    ShallowReluNet::new(w1, vec![0.0; 8], vec![1.0; 8], 0.0).unwrap()
}

fn random_net(rng: &mut StdRng, n: usize) -> ShallowReluNet {
    let w1 = (0..n).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
    let b1 = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let w2 = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    ShallowReluNet::new(w1, b1, w2, rng.gen_range(-2.0..2.0)).unwrap()
}

/// Whether some grid point of box ∖ hole has `V <= 0`, and whether some has `V̇ >= 0`.
fn grid_violations(
    net: &ShallowReluNet,
    model: &DynamicsModel,
    bx: &AxisBox,
    half_width: &[f64],
    n: usize,
) -> (bool, bool) {
    let (mut non_pos, mut non_dec) = (false, false);
    for i in 0..n {
        for j in 0..n {
            let x = [
                bx.lo[0] + (bx.hi[0] - bx.lo[0]) * i as f64 / (n - 1) as f64,
                bx.lo[1] + (bx.hi[1] - bx.lo[1]) * j as f64 / (n - 1) as f64,
            ];
            if x[0].abs() < half_width[0] && x[1].abs() < half_width[1] {
                continue;
            }
            non_pos |= net.eval_v(&x).unwrap() <= 0.0;
            let pat = net.activation_pattern(&x).unwrap();
            non_dec |= net.eval_v_dot(&pat, &model.eval_f(&x).unwrap()).unwrap() >= 0.0;
        }
    }
    (non_pos, non_dec)
}

fn criterion_3(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x0c3);
    let model = builtin("bilinear_osc", 2).unwrap();
    let bx = AxisBox::cube(-4.0, 4.0, 2).unwrap();
    let (mut both_false, mut both_clean, mut only_verifier, mut missed) = (0, 0, 0, 0);
    // per condition: [agree violated, agree clean, verifier only, missed]
    let mut per_test = [[0usize; 4]; 2];
    let mut only_verifier_valid = true;
    const NETS: usize = 32;
    for k in 0..NETS {
        let n = rng.gen_range(3..=8);
        let net = match k % 4 {
            0 => near_lyapunov_net(&mut rng, n),
            1 | 3 => random_net(&mut rng, n),
            _ => sector_net(&mut rng),
        };
        ledger.verify(&net, &model, &bx);
        let (_, _, _, margin, out) = ledger.runs.last().unwrap();
        let (grid_pos, grid_dec) = grid_violations(&net, &model, &bx, &out.slabs.half_width, 500);
        let kinds = |kind: CounterexampleKind| out.report.counterexamples.iter().any(|c| c.kind == kind);
        for (t, (grid, found)) in
            [(grid_pos, kinds(CounterexampleKind::NonPositive)), (grid_dec, kinds(CounterexampleKind::NonDecreasing))]
                .into_iter()
                .enumerate()
        {
            per_test[t][match (grid, found) {
                (true, true) => 0,
                (false, false) => 1,
                (false, true) => 2,
                (true, false) => 3,
            }] += 1;
        }
        let falsified = out.report.verdict == Verdict::Falsified;
        match (grid_pos || grid_dec, falsified) {
            (true, true) => both_false += 1,
            (false, false) => both_clean += 1,
            (true, false) => missed += 1,
            (false, true) => {
                only_verifier += 1;
                only_verifier_valid &= out
                    .report
                    .counterexamples
                    .iter()
                    .all(|c| validate_counterexample(&net, &model, &out.regions, &out.slabs, *margin, c).unwrap());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let fmt = |c: [usize; 4]| {
        format!("{} agree violated, {} agree clean, {} verifier only, {} missed", c[0], c[1], c[2], c[3])
    };
    Outcome {
        pass: missed == 0 && per_test[0][3] == 0 && per_test[1][3] == 0 && only_verifier_valid && secs < 300.0,
        detail: format!(
            "{NETS} nets vs 500x500 grid: verdicts {both_false} both falsified, {both_clean} both clean, \
             {missed} missed, {only_verifier} verifier only (re-validated: {only_verifier_valid}); \
             V <= 0: {}; Vdot >= 0: {}; {secs:.2}s",
            fmt(per_test[0]),
            fmt(per_test[1])
        ),
    }
}

fn criterion_4(ledger: &mut Ledger) -> Outcome {
    // add runs with known violations of every kind
    let l1 = ShallowReluNet::l1_norm(2);
    let negated = ShallowReluNet::new(l1.w1().to_vec(), vec![0.0; 4], vec![-1.0; 4], 0.0).unwrap();
    let offset = ShallowReluNet::new(l1.w1().to_vec(), vec![0.0; 4], vec![1.0; 4], 0.5).unwrap();
    let bx = AxisBox::cube(-10.0, 10.0, 2).unwrap();
    let neg_cubic = builtin("neg_cubic", 2).unwrap();
    ledger.verify(&negated, &neg_cubic, &bx);
    ledger.verify(&offset, &neg_cubic, &bx);
    ledger.verify(&l1, &parse_dynamics(&["x1", "x2"], 2).unwrap(), &bx);
    let mut rng = StdRng::seed_from_u64(0x0c4);
    let coupled = builtin("coupled_bilinear", 4).unwrap();
    for _ in 0..3 {
        let n = rng.gen_range(2..=5);
        let w1 = (0..n).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let net = ShallowReluNet::new(
            w1,
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            0.0,
        )
        .unwrap();
        ledger.verify(&net, &coupled, &AxisBox::cube(-2.0, 2.0, 4).unwrap());
    }

    let (mut total, mut bad) = (0, 0);
    for (net, model, _, margin, out) in &ledger.runs {
        for c in &out.report.counterexamples {
            total += 1;
            if !validate_counterexample(net, model, &out.regions, &out.slabs, *margin, c).unwrap() {
                bad += 1;
            }
        }
    }
    Outcome {
        pass: bad == 0 && total > 0,
        detail: format!("{total} counterexamples from {} runs, {bad} failed re-validation", ledger.runs.len()),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x0c5);
    let mut worst_rot = 0.0f64;
    for p in [2, 3, 5, 10] {
        for _ in 0..1000 {
            let g: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rot = householder_to_e1(&g).unwrap();
            let err = (dot(&g, &f) - rot.scale * rot.apply(&f)[0]).abs();
            worst_rot = worst_rot.max(err / (rot.scale * dot(&f, &f).sqrt()));
        }
    }
    let mut worst_fd = 0.0f64;
    let mut nets = 0;
    while nets < 200 {
        let p = rng.gen_range(2..=6);
        let n = rng.gen_range(1..=10);
        let w1: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let net = ShallowReluNet::new(
            w1,
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            0.0,
        )
        .unwrap();
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = 1e-6;
        let clear = (0..n).all(|l| net.preactivation(l, &x).abs() > 1e-4);
        if !clear {
            continue;
        }
        nets += 1;
        let g = net.region_gradient(&net.activation_pattern(&x).unwrap()).unwrap();
        for j in 0..p {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let fd = (net.eval_v(&xp).unwrap() - net.eval_v(&xm).unwrap()) / (2.0 * h);
            worst_fd = worst_fd.max((fd - g[j]).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst_rot <= 1e-9 && worst_fd <= 1e-4 && secs < 30.0,
        detail: format!(
            "rotation: worst |g.f - a(Tf)_1| / (|g||f|) = {worst_rot:.2e} (limit 1e-9); \
             gradient vs finite differences on 200 nets: worst {worst_fd:.2e} (limit 1e-4); {secs:.2}s"
        ),
    }
}

fn mobius_holds(poset: &FlatPoset) -> bool {
    poset.mobius[0] == 1
        && (1..poset.len()).all(|y| poset.mobius[y] + poset.below[y].iter().map(|&x| poset.mobius[x]).sum::<i64>() == 0)
}

fn criterion_6() -> Outcome {
    let plane = |n: [f64; 2], b: f64| Hyperplane { unit: 0, normal: n.to_vec(), offset: b };
    let fig = [plane([0.0, 1.0], -1.0), plane([1.0, 0.0], 0.0), plane([0.0, 1.0], 1.0)];
    let poset = build_flat_poset(&fig, 2, 16).unwrap();
    let chi = characteristic_polynomial(&poset);
    let worked = chi.to_string() == "t^2 - 3t + 2" && zaslavsky_count(&chi) == 6;
    let mut mobius_ok = mobius_holds(&poset);

    let mut rng = StdRng::seed_from_u64(0x0c6);
    let mut agree = 0;
    for _ in 0..100 {
        let m = rng.gen_range(1..=4);
        let lines: Vec<_> = (0..m)
            .map(|_| {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                plane([t.cos(), t.sin()], rng.gen_range(-1.0..1.0))
            })
            .collect();
        let poset = build_flat_poset(&lines, 2, 16).unwrap();
        mobius_ok &= mobius_holds(&poset);
        let bound = zaslavsky_count(&characteristic_polynomial(&poset));
        let net = ShallowReluNet::new(
            lines.iter().map(|h| h.normal.clone()).collect(),
            lines.iter().map(|h| h.offset).collect(),
            vec![1.0; m],
            0.0,
        )
        .unwrap();
        let bx = AxisBox::cube(-1e4, 1e4, 2).unwrap();
        let counted = enumerate_regions(&net, &bx, &EnumerationConfig::default()).unwrap().len() as u64;
        if counted == bound {
            agree += 1;
        }
    }
    Outcome {
        pass: worked && agree == 100 && mobius_ok,
        detail: format!(
            "worked example chi = {chi}, regions {}; random line arrangements {agree}/100 agree; Möbius recursion exact: {mobius_ok}",
            zaslavsky_count(&chi)
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut within = 0;
    let mut identical = 0;
    let mut worst = 0.0f64;
    let cases = common::battery();
    for case in &cases {
        let oracle = common::grid_oracle_2d(&case.domain, case.f, 1000);
        let a = global_max(&case.objective(), &case.domain, &Budget::default()).unwrap();
        let b = global_max(&case.objective(), &case.domain, &Budget::default()).unwrap();
        let err = (a.value - oracle).abs();
        worst = worst.max(err);
        if err <= 1e-3 {
            within += 1;
        }
        if a == b && a.value.to_bits() == b.value.to_bits() {
            identical += 1;
        }
    }
    Outcome {
        pass: within == cases.len() && identical == cases.len(),
        detail: format!(
            "{within}/{} within 1e-3 of the dense-grid oracle (worst {worst:.2e}), {identical}/{} bit-identical repeats",
            cases.len(),
            cases.len()
        ),
    }
}

fn criterion_8(ledger: &Ledger) -> Outcome {
    let (mut checked, mut violations) = (0, 0);
    for (net, count) in &ledger.counted {
        match region_upper_bound(net, 16) {
            Ok(b) => {
                checked += 1;
                if *count as u64 > b.regions {
                    violations += 1;
                }
            }
            Err(lyapunov_verify::Error::LimitExceeded { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    Outcome {
        pass: violations == 0 && checked > 0,
        detail: format!("{checked} nets with <= 16 planes, {violations} exceed the Zaslavsky bound"),
    }
}

fn main() {
    let mut ledger = Ledger::default();
    let results = [
        ("1 region counts", criterion_1(&mut ledger)),
        ("2 desk-scale verdicts", criterion_2(&mut ledger)),
        ("3 grid-oracle completeness", criterion_3(&mut ledger)),
        ("4 counterexample soundness", criterion_4(&mut ledger)),
        ("5 rotation and gradient numerics", criterion_5()),
        ("6 combinatorics", criterion_6()),
        ("7 global optimizer quality", criterion_7()),
        ("8 Zaslavsky consistency", criterion_8(&ledger)),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        println!("{} criterion {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
