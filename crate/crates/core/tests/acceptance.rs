//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcs_loss::analysis::{self, Convention, LossCurve};
use tcs_loss::decoder::{build_weight_graph, distance_table, merge_graph_for_loss, mwpm_table};
use tcs_loss::errmodel::{step_noisy, ErrorModelParams, FrameSim};
use tcs_loss::lattice::{Lattice, LatticeType};
use tcs_loss::matching::brute_force_min;
use tcs_loss::montecarlo::{estimate, reference, wilson, RunConfig, RunResult, TCheck};
use tcs_loss::pauli::{self, cz_conjugate, Pauli, PauliString};
use tcs_loss::syndrome::{merge_lost, History};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn golden_cell() -> Outcome {
    let golden = include_str!("fixtures/derive_cell.txt");
    let got = pauli::render_tables(&pauli::derive_cell().map_err(|e| e.to_string())?);
    check(got == golden, format!("{} lines compared", golden.lines().count()))
}

fn matrix(p: Pauli) -> [[C; 2]; 2] {
    let (o, z, i) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0));
    match p {
        Pauli::I => [[o, z], [z, o]],
        Pauli::X => [[z, o], [o, z]],
        Pauli::Y => [[z, -i], [i, z]],
        Pauli::Z => [[o, z], [z, -o]],
    }
}

fn kron(s: &PauliString) -> [[C; 4]; 4] {
    let (a, b) = (matrix(s.get(0)), matrix(s.get(1)));
    let phase = C::new(0.0, 1.0).powu(s.phase() as u32);
    let mut m = [[C::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = phase * a[r / 2][c / 2] * b[r % 2][c % 2];
        }
    }
    m
}

fn conjugation() -> Outcome {
    let identities = [("IX", "ZX"), ("XI", "XZ"), ("IZ", "IZ"), ("ZI", "ZI")];
    for (from, to) in identities {
        let got = cz_conjugate(&from.parse().unwrap()).map_err(|e| e.to_string())?;
        if got != to.parse().unwrap() {
            return Err(format!("C_Z {from} C_Z gave {got}, expected {to}"));
        }
    }
    let cz = [1.0, 1.0, 1.0, -1.0];
    let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    for a in all {
        for b in all {
            let p = PauliString::new(0, vec![a, b]);
            let m = kron(&p);
            let want = kron(&cz_conjugate(&p).map_err(|e| e.to_string())?);
            for r in 0..4 {
                for c in 0..4 {
                    if (m[r][c] * cz[r] * cz[c] - want[r][c]).norm() > 1e-12 {
                        return Err(format!("matrix mismatch for {p}"));
                    }
                }
            }
        }
    }
    Ok("4 identities, 16 two-qubit Paulis".into())
}

fn decoder_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = ErrorModelParams::new(5e-3, 5e-3, 1.0).unwrap();
    let mut from_noise = 0;
    for case in 0..1000u64 {
        let d = if case % 2 == 0 { 3 } else { 5 };
        let l = Lattice::build(d).unwrap();
        let g = build_weight_graph(&l, LatticeType::Primal, &params).unwrap();
        let mut sim = FrameSim::new(&l);
        let mut h = History::new();
        sim.propagate(&[]);
        for _ in 0..6 {
            h.extend(step_noisy(&params, &mut sim, 77, case));
        }
        h.extend(sim.propagate(&[]));
        h.extend(sim.propagate(&[]));
        h.extend(sim.flush());
        let merged = merge_lost(&l, &h, LatticeType::Primal, 0, 7).map_err(|e| e.to_string())?;
        let contracted = merge_graph_for_loss(&g, &merged);
        let events = merged.detection_events();
        let mut nodes: Vec<u32> = events.events.iter().map(|&(c, _)| contracted.node_of[c]).collect();
        if nodes.is_empty() || nodes.len() > 10 {
            let k = rng.gen_range(1..=10);
            nodes.clear();
            while nodes.len() < k {
                let v = rng.gen_range(2..contracted.node_count() as u32);
                if !nodes.contains(&v) {
                    nodes.push(v);
                }
            }
        } else {
            from_noise += 1;
        }
        let table = distance_table(&contracted, &nodes, true);
        let pair: Vec<Vec<i64>> = (0..table.n).map(|i| (0..table.n).map(|j| table.pair(i, j)).collect()).collect();
        let bound: Vec<Option<i64>> = table.boundary.iter().map(|b| b.map(|x| x.0)).collect();
        let exact = brute_force_min(&pair, &bound);
        let got = mwpm_table(&table).ok().map(|m| m.weight);
        if got != exact {
            return Err(format!("instance {case} (d = {d}, {} events): matcher {got:?}, exhaustive {exact:?}", nodes.len()));
        }
    }
    Ok(format!("1000 instances, {from_noise} from simulated windows"))
}

fn superstabilizer_soundness() -> Outcome {
    let mut merged_cells = 0usize;
    let mut superstabilizers = 0usize;
    for trial in 0..10_000u64 {
        let d = if trial % 2 == 0 { 3 } else { 5 };
        let p_loss = [0.01, 0.03, 0.05][(trial / 2 % 3) as usize];
        let params = ErrorModelParams::new(0.0, p_loss, 0.0).unwrap();
        let l = Lattice::build(d).unwrap();
        let mut sim = FrameSim::new(&l);
        let mut h = History::new();
        sim.propagate(&[]);
        for _ in 0..4 {
            h.extend(step_noisy(&params, &mut sim, 5, trial));
        }
        h.extend(sim.propagate(&[]));
        h.extend(sim.propagate(&[]));
        h.extend(sim.flush());
        for lt in LatticeType::BOTH {
            let merged = merge_lost(&l, &h, lt, 1, 5).map_err(|e| e.to_string())?;
            if !merged.detection_events().events.is_empty() {
                return Err(format!("trial {trial}: spurious detection event on {lt:?}"));
            }
            for s in merged.superstabilizers(&l, &h).map_err(|e| e.to_string())? {
                if s.members.len() > 1 {
                    superstabilizers += 1;
                    merged_cells += s.members.len();
                }
                if s.product != 1 {
                    return Err(format!("trial {trial}: superstabilizer product {}", s.product));
                }
            }
        }
    }
    Ok(format!("10000 trials, {superstabilizers} merged superstabilizers over {merged_cells} cells"))
}

fn run(d: usize, p_comp: f64, p_loss: f64, p_lint: f64, failures: u64, seed: u64) -> RunResult {
    let mut cfg = RunConfig::new(d, ErrorModelParams::new(p_comp, p_loss, p_lint).unwrap(), seed);
    cfg.failures = Some(failures);
    cfg.max_rounds = 50_000_000;
    estimate(&cfg, 0).expect("run succeeds")
}

fn slope(d: usize, p_lint: f64, rates: &[f64], failures: u64) -> (analysis::SlopeFit, Vec<RunResult>) {
    let runs: Vec<RunResult> = rates.iter().map(|&p| run(d, 0.0, p, p_lint, failures, 31)).collect();
    let points: Vec<(f64, f64)> = runs.iter().map(|r| (r.params.p_loss, r.p_round)).collect();
    (analysis::fit_slope(&points).expect("positive rates"), runs)
}

fn describe(runs: &[RunResult]) -> String {
    runs.iter().map(|r| format!("{:.0e}:{:.2e}", r.params.p_loss, r.p_round)).collect::<Vec<_>>().join(" ")
}

fn asymptote_lint_off() -> Outcome {
    let (fit, runs) = slope(3, 0.0, &[0.01, 0.02, 0.03, 0.05], 400);
    check((fit.slope - 2.0).abs() <= 0.3, format!("d=3 slope {:.2} ± {:.2} [{}]", fit.slope, fit.stderr, describe(&runs)))
}

fn asymptote_lint_on() -> Outcome {
    let rates = [3e-3, 1e-2, 3e-2];
    let (f3, r3) = slope(3, 1.0, &rates, 300);
    let (f5, r5) = slope(5, 1.0, &rates, 200);
    let ok = (f3.slope - 1.0).abs() <= 0.2 && (f5.slope - 2.0).abs() <= 0.3;
    let mut detail = format!("d=3 slope {:.2} [{}]; d=5 slope {:.2} [{}]", f3.slope, describe(&r3), f5.slope, describe(&r5));
    if !ok {
        // Diagnostic only: the same fit at rates well below the lint threshold.
        let (low, runs) = slope(3, 1.0, &[1e-4, 3e-4, 1e-3], 200);
        detail += &format!("; below threshold d=3 slope {:.2} [{}]", low.slope, describe(&runs));
    }
    check(ok, detail)
}

fn separated(below: &RunResult, above: &RunResult) -> bool {
    below.ci_round.1 < above.ci_round.0
}

fn threshold_ordering() -> Outcome {
    let low3 = run(3, 1e-3, 1e-2, 0.0, 300, 41);
    let low5 = run(5, 1e-3, 1e-2, 0.0, 60, 41);
    let high3 = run(3, 1e-3, 6e-2, 0.0, 3000, 43);
    let high5 = run(5, 1e-3, 6e-2, 0.0, 3000, 43);
    let ok = separated(&low5, &low3) && separated(&high3, &high5);
    let show = |r: &RunResult| format!("{:.2e} [{:.2e}, {:.2e}]", r.p_round, r.ci_round.0, r.ci_round.1);
    check(
        ok,
        format!("p_loss=1e-2: d3 {} d5 {}; p_loss=6e-2: d3 {} d5 {}", show(&low3), show(&low5), show(&high3), show(&high5)),
    )
}

fn extrapolation() -> Outcome {
    let p = analysis::extrapolate(4.1e-4, 6.3e-5, 7, 33).map_err(|e| e.to_string())?;
    check((1.6e-15..=1.8e-15).contains(&p), format!("{p:.3e}"))
}

/// Inputs whose extrapolation first reaches `target` at distance `d`.
fn inputs_for(p_loss: f64, d_b: usize, d: Option<usize>, target: f64) -> LossCurve {
    let b = 1e-6;
    match d {
        Some(d) => {
            let steps = ((d - d_b) / 2) as f64;
            let ratio = (b / target).powf(1.0 / (steps - 0.5));
            LossCurve { p_loss, points: vec![(d_b - 2, b * ratio), (d_b, b)] }
        }
        None => LossCurve { p_loss, points: vec![(d_b - 2, 0.2), (d_b, 0.3)] },
    }
}

fn plumbing_and_overhead() -> Outcome {
    // (d, V, q_phys) as printed in the four overhead tables.
    let printed: [(usize, f64, f64); 12] = [
        (15, 3.4e4, 1.9e3),
        (19, 7.1e4, 3.1e3),
        (25, 1.7e5, 5.5e3),
        (29, 2.6e5, 7.5e3),
        (31, 3.2e5, 8.6e3),
        (33, 3.9e5, 9.7e3),
        (37, 5.6e5, 1.2e4),
        (45, 1.0e6, 1.8e4),
        (51, 1.5e6, 2.4e4),
        (63, 2.8e6, 3.6e4),
        (67, 3.4e6, 4.1e4),
        (15, 3.4e4, 1.9e3),
    ];
    let mut worst: f64 = 0.0;
    for &(d, v, q) in &printed {
        let p = analysis::plumbing(d, Convention::Floor);
        let err = ((p.volume - v) / v).abs().max(((p.qubits - q) / q).abs());
        worst = worst.max(err);
        if err > 0.10 {
            return Err(format!("d = {d}: V = {}, q = {} vs printed {v:e}, {q:e}", p.volume, p.qubits));
        }
        // One unit in the last printed digit for the rows the tables quote exactly.
        if d == 15 || d == 51 {
            let unit = |x: f64| 10f64.powi(x.log10().floor() as i32 - 1);
            if (p.volume - v).abs() >= unit(v) || (p.qubits - q).abs() >= unit(q) {
                return Err(format!("d = {d}: V = {}, q = {} not within printed precision", p.volume, p.qubits));
            }
        }
    }

    let target = 1e-15;
    type Row = (&'static str, f64, Option<usize>);
    let tables: [(&str, usize, usize, Vec<Row>); 2] = [
        (
            "lint off, p_comp 1e-3",
            31,
            9,
            vec![("1x", 2.0e-3, Some(31)), ("2x", 1.0e-2, Some(37)), ("5x", 2.5e-2, Some(51)), ("10x", 2.9e-2, Some(67)), ("-", 5.0e-2, None)],
        ),
        (
            "lint on, p_comp 1e-4",
            15,
            7,
            vec![("1x", 1.0e-5, Some(15)), ("2x", 5.0e-5, Some(19)), ("5x", 2.0e-4, Some(25)), ("10x", 5.0e-4, Some(33)), ("-", 5.0e-3, None)],
        ),
    ];
    for (name, baseline, d_b, rows) in &tables {
        let curves: Vec<LossCurve> = rows.iter().map(|&(_, p, d)| inputs_for(p, *d_b, d, target)).collect();
        let got = analysis::overhead_table(&curves, target, *baseline, Convention::Floor).map_err(|e| e.to_string())?;
        for (row, &(label, p, d)) in got[1..].iter().zip(rows) {
            let have = (analysis::overhead_label(row.overhead), row.p_loss, row.d);
            if have != (label.to_string(), Some(p), d) {
                return Err(format!("{name}: got {have:?}, expected ({label}, {p:e}, {d:?})"));
            }
        }
    }
    Ok(format!("12 plumbing rows within {:.1}%, 10 overhead rows", worst * 100.0))
}

fn harness_oracle() -> Outcome {
    let params = ErrorModelParams::new(1e-2, 0.0, 0.0).unwrap();
    let (trials, length) = (2000u64, 50u64);
    let (nf, nr) = reference::naive_estimate(3, &params, 2718, trials, length).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::new(3, params, 2718);
    cfg.trials = trials;
    cfg.rounds = Some(trials * length);
    cfg.t_check = TCheck::Fixed(1);
    let w = estimate(&cfg, 0).map_err(|e| e.to_string())?;
    let naive = wilson(nf, nr);
    let overlap = naive.0 <= w.ci_round.1 && w.ci_round.0 <= naive.1;
    check(
        overlap && nr == w.rounds,
        format!(
            "windowed {}/{} [{:.4}, {:.4}], naive {nf}/{nr} [{:.4}, {:.4}]",
            w.failures, w.rounds, w.ci_round.0, w.ci_round.1, naive.0, naive.1
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("cell derivation golden tables", golden_cell),
        ("C_Z conjugation identities", conjugation),
        ("matching equals exhaustive search", decoder_exactness),
        ("loss-only superstabilizers are +1", superstabilizer_soundness),
        ("loss-only slope, lint off", asymptote_lint_off),
        ("loss-only slopes, lint on", asymptote_lint_on),
        ("threshold ordering, lint off", threshold_ordering),
        ("extrapolation worked example", extrapolation),
        ("plumbing and overhead tables", plumbing_and_overhead),
        ("windowed vs full-history simulator", harness_oracle),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
