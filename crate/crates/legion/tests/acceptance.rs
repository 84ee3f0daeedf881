//! End-to-end acceptance gate. Each test prints exactly one
//! `criterion N: PASS ...` line (visible with `--nocapture`; on failure
//! the line plus the panic message explain what went wrong).

use std::path::PathBuf;

use legion::appfuzz::{mutate, BitString, SamplerState};
use legion::expr::Constraint;
use legion::ir::IrProgram;
use legion::lang::{lower, parse, SourceProgram};
use legion::mcts::{uct_score, Engine, HyperParams, ScoreMode, Termination};
use legion::oracle::oracle_paths;
use legion::rng::Xorshift64Star;
use legion::solver::{Model, SolverCtx};
use legion::stats::sign_test_less;
use legion::suite;

fn compile_text(text: &str) -> IrProgram {
    let src = SourceProgram::from_text(text);
    lower(&parse(&src).expect("parse")).expect("lower")
}

fn bench_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../bench")
        .join(name)
}

fn compile_bench(name: &str) -> IrProgram {
    let src = SourceProgram::from_file(&bench_path(name)).expect("read bench");
    lower(&parse(&src).expect("parse")).expect("lower")
}

fn eqchain_variant(k: usize) -> IrProgram {
    // Equality-chain programs with 8-bit inputs so total input bits
    // stay within the exhaustive-oracle limit.
    let targets = [0xA7u64, 0x3C];
    let mut body = String::new();
    let mut closes = String::new();
    for i in 0..k {
        body.push_str(&format!("    v{i} = input(8);\n"));
        body.push_str(&format!("    if (v{i} == {}) {{\n", targets[i]));
        closes.push_str("    }\n");
    }
    body.push_str("    abort;\n");
    let text = format!("fn main() {{\n{body}{closes}}}\n");
    compile_text(&text)
}

fn hp_base() -> HyperParams {
    HyperParams::default()
}

/// Oracle equivalence: every small benchmark terminates with a
/// full-exploration proof and a path registry exactly equal to the
/// exhaustive-enumeration oracle.
#[test]
fn criterion_01_oracle_equivalence() {
    let mut cases: Vec<(String, IrProgram)> = vec![
        ("chokepoint".into(), compile_bench("chokepoint.mini")),
        ("tautology".into(), compile_bench("tautology.mini")),
        ("straightline".into(), compile_bench("straightline.mini")),
        ("eqchain-k1".into(), eqchain_variant(1)),
        ("eqchain-k2".into(), eqchain_variant(2)),
    ];
    for (name, p) in cases.iter_mut() {
        assert!(
            p.total_input_bits() <= 16,
            "{name}: expected a <=16-bit benchmark"
        );
        let mut hp = hp_base();
        hp.persistent = false;
        hp.sim_budget = 10_000;
        hp.seed = 1;
        let oracle = oracle_paths(p, hp.tree_depth, hp.conex_budget).expect("oracle");
        let mut engine = Engine::new(p, hp);
        let term = engine.run_to_end();
        assert_eq!(
            term,
            Termination::FullyExplored,
            "{name}: expected a full-exploration proof, got {term:?}"
        );
        assert_eq!(
            engine.registry(),
            &oracle.paths,
            "{name}: path registry differs from oracle"
        );
    }
    println!("criterion 1: PASS — oracle set equality + full-exploration proof on {} benchmarks", cases.len());
}

/// Recursive choke-point program reaches full branch coverage,
/// including the rare assert arm, for at least 9 of 10 seeds.
#[test]
fn criterion_02_ackermann_full_coverage() {
    let p = compile_bench("ackermann.mini");
    let mut full = 0usize;
    for seed in 1..=10u64 {
        let mut hp = hp_base();
        hp.sim_budget = 2000;
        hp.seed = seed;
        let mut engine = Engine::new(&p, hp);
        engine.run_to_end();
        if engine.branch_cov() == 1.0 {
            full += 1;
        }
    }
    assert!(full >= 9, "full coverage on only {full}/10 seeds");
    println!("criterion 2: PASS — ackermann full branch coverage on {full}/10 seeds");
}

/// Mutation-generated inputs preserve the sampled path condition at a
/// rate of at least 0.60, aggregated over the run.
#[test]
fn criterion_03_path_preservation() {
    let p = compile_bench("ackermann.mini");
    let mut hp = hp_base();
    hp.sim_budget = 2000;
    hp.seed = 1;
    let mut engine = Engine::new(&p, hp);
    engine.run_to_end();
    let rate = engine.mutant_preservation();
    let (preserved, total) = engine.mutant_counts();
    assert!(total > 0, "run produced no mutants");
    assert!(
        rate >= 0.60,
        "preservation {rate:.4} < 0.60 ({preserved}/{total} mutants preserved)"
    );
    // The same aggregate is what the stats CSV reports.
    let last = engine.stats().last().expect("stats rows");
    assert!((last.preservation_rate - rate).abs() < 1e-12);
    println!("criterion 3: PASS — preservation {rate:.4} >= 0.60 over a 2000-simulation run");
}

/// Batch size law on an unconstrained sampler: 1, 1, 2, 4, 8, ... and
/// exactly one solver call per batch.
#[test]
fn criterion_04_sampler_batch_law() {
    let solver = SolverCtx::new();
    let mut sampler = SamplerState::new(Constraint::default(), vec![8]);
    let mut sizes = Vec::new();
    for _ in 0..9 {
        let batch = sampler.next_batch(&solver).expect("solve");
        sizes.push(batch.len());
    }
    assert_eq!(
        sizes,
        vec![1, 1, 2, 4, 8, 16, 32, 64, 128],
        "batch sizes violate the doubling law"
    );
    assert_eq!(
        solver.calls(),
        sampler.batches,
        "solver call counter must equal the batch count"
    );
    assert_eq!(sampler.batches, 9);
    println!("criterion 4: PASS — batch sizes 1,1,2,4,...,128 with one solver call per batch");
}

/// Mutation algebra: absorption identities and the literal bit formula
/// hold on 10^4 random triples.
#[test]
fn criterion_05_mutation_algebra() {
    let mut rng = Xorshift64Star::new(0xfeed);
    let len = 48u32;
    let widths = [8u8; 6];
    let rand_bits = |rng: &mut Xorshift64Star| {
        let bits: Vec<bool> = (0..len).map(|_| rng.next_u64() & 1 == 1).collect();
        BitString::from_model(&Model::from_bits(&widths, &bits))
    };
    for _ in 0..10_000 {
        let s = rand_bits(&mut rng);
        let s1 = rand_bits(&mut rng);
        let s2 = rand_bits(&mut rng);
        assert_eq!(mutate(&s, &s1, &s).unwrap(), s1, "mutate(s, s', s) != s'");
        assert_eq!(mutate(&s, &s1, &s1).unwrap(), s1, "mutate(s, s', s') != s'");
        let m = mutate(&s, &s1, &s2).unwrap();
        for i in 0..len {
            let (b, b1, b2) = (s.bit(i), s1.bit(i), s2.bit(i));
            let expect = b ^ ((b ^ b1) | (b ^ b2));
            assert_eq!(m.bit(i), expect, "literal formula violated at bit {i}");
        }
    }
    println!("criterion 5: PASS — mutation identities + literal formula on 10^4 triples");
}

fn sims_to_full_coverage(p: &IrProgram, seed: u64, score: ScoreMode, cap: u64) -> f64 {
    let mut hp = hp_base();
    hp.seed = seed;
    hp.sim_budget = cap;
    hp.score = score;
    let mut engine = Engine::new(p, hp);
    while engine.branch_cov() < 1.0 {
        if engine.step().is_none() {
            break;
        }
    }
    if engine.branch_cov() == 1.0 {
        engine.iterations() as f64
    } else {
        cap as f64
    }
}

/// UCT needs stochastically fewer simulations than uniform-random
/// selection to reach full branch coverage (paired one-sided sign test).
#[test]
fn criterion_06_uct_beats_random() {
    let benches = [compile_bench("chokepoint.mini"), compile_bench("rangeweave.mini")];
    let mut uct = Vec::new();
    let mut random = Vec::new();
    for seed in 1..=20u64 {
        let mut u = 0.0;
        let mut r = 0.0;
        for p in &benches {
            u += sims_to_full_coverage(p, seed, ScoreMode::Uct, 2000);
            r += sims_to_full_coverage(p, seed, ScoreMode::Random, 2000);
        }
        uct.push(u);
        random.push(r);
    }
    let p_value = sign_test_less(&uct, &random);
    assert!(
        p_value < 0.05,
        "sign test p = {p_value:.4} (uct = {uct:?}, random = {random:?})"
    );
    println!("criterion 6: PASS — UCT beats random selection, sign test p = {p_value:.5}");
}

/// No pruned subtree may contain an oracle-feasible path that is absent
/// from the path registry, at any iteration.
#[test]
fn criterion_07_pruning_soundness() {
    let cases: Vec<(String, IrProgram)> = vec![
        ("chokepoint".into(), compile_bench("chokepoint.mini")),
        ("tautology".into(), compile_bench("tautology.mini")),
        ("mismatch".into(), compile_bench("mismatch.mini")),
        ("straightline".into(), compile_bench("straightline.mini")),
        ("rangeweave".into(), compile_bench("rangeweave.mini")),
        ("eqchain-k1".into(), eqchain_variant(1)),
        ("eqchain-k2".into(), eqchain_variant(2)),
    ];
    for (name, p) in &cases {
        assert!(p.total_input_bits() <= 16, "{name}: not a <=16-bit benchmark");
        let mut hp = hp_base();
        hp.sim_budget = 300;
        hp.seed = 1;
        let oracle = oracle_paths(p, hp.tree_depth, hp.conex_budget).expect("oracle");
        let mut engine = Engine::new(p, hp);
        loop {
            // Every oracle path missing from the registry must still be
            // reachable: no node on its address chain may be pruned.
            for path in &oracle.paths {
                if engine.registry().contains(path) {
                    continue;
                }
                let mut cur = 0usize;
                assert!(
                    !engine.node_info(cur).pruned,
                    "{name}: root pruned with unseen path {path:?}"
                );
                for addr in path {
                    let info = engine.node_info(cur);
                    let next = info.children.iter().copied().find(|&c| {
                        engine.node_info(c).addr.as_ref() == Some(addr)
                    });
                    match next {
                        None => break,
                        Some(c) => {
                            assert!(
                                !engine.node_info(c).pruned,
                                "{name}: pruned subtree at {addr:?} hides unseen path {path:?}"
                            );
                            cur = c;
                        }
                    }
                }
            }
            if engine.step().is_none() {
                break;
            }
        }
    }
    println!("criterion 7: PASS — pruning never hid an unseen oracle path on {} benchmarks", cases.len());
}

/// With exploration weight 0, an unvisited child (score +inf) is still
/// chosen over an already-rewarded sibling.
#[test]
fn criterion_08_infinity_initialization() {
    assert!(uct_score(0, 0, 5, 0.0).is_infinite());
    assert_eq!(uct_score(3, 4, 5, 0.0), 0.75);

    let p = compile_bench("chokepoint.mini");
    let mut hp = hp_base();
    hp.rho = 0.0;
    hp.sim_budget = 200;
    hp.seed = 1;
    let mut engine = Engine::new(&p, hp);
    let mut observed_infinity_pick = false;
    loop {
        // Snapshot visit counts before the step.
        let before: Vec<(u64, u64, bool)> = (0..engine.node_count())
            .map(|i| {
                let n = engine.node_info(i);
                (n.n_sel, n.n_win, n.pruned)
            })
            .collect();
        let children: Vec<Vec<usize>> = (0..engine.node_count())
            .map(|i| engine.node_info(i).children.clone())
            .collect();
        let Some(report) = engine.step() else { break };
        for w in report.selected.windows(2) {
            let (parent, chosen) = (w[0], w[1]);
            if !children[parent].contains(&chosen) {
                continue; // chosen node was created during this step
            }
            let unvisited_exists = children[parent]
                .iter()
                .any(|&c| before[c].0 == 0 && !before[c].2);
            if unvisited_exists {
                assert_eq!(
                    before[chosen].0, 0,
                    "rho=0 selection took a visited child over an unvisited sibling"
                );
                if children[parent].iter().any(|&c| before[c].1 > 0) {
                    observed_infinity_pick = true;
                }
            }
        }
    }
    assert!(
        observed_infinity_pick,
        "run never exhibited an unvisited child beating a rewarded sibling"
    );
    println!("criterion 8: PASS — with rho=0 unvisited children (score +inf) preempt rewarded siblings");
}

/// Two identical runs produce byte-identical artifacts, and replaying
/// the recorded suite reproduces the recorded branch coverage.
#[test]
fn criterion_09_determinism_and_replay() {
    let source = std::fs::read_to_string(bench_path("rangeweave.mini")).expect("read");
    let p = compile_text(&source);
    let run = |dir: &std::path::Path| {
        let mut hp = hp_base();
        hp.sim_budget = 100;
        hp.seed = 7;
        let mut engine = Engine::new(&p, hp);
        engine.run_to_end();
        suite::write_suite(dir, &source, &engine).expect("write suite");
    };
    let d1 = tempfile::tempdir().expect("tempdir");
    let d2 = tempfile::tempdir().expect("tempdir");
    run(d1.path());
    run(d2.path());
    let mut names: Vec<String> = std::fs::read_dir(d1.path())
        .expect("read dir")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"suite.json".to_string()));
    assert!(names.contains(&"stats.csv".to_string()));
    for name in &names {
        let a = std::fs::read(d1.path().join(name)).expect("read a");
        let b = std::fs::read(d2.path().join(name)).expect("read b");
        assert_eq!(a, b, "artifact {name} differs between identical runs");
    }
    let recorded = suite::load_report(d1.path()).expect("report");
    let replayed = suite::replay(d1.path(), &p).expect("replay");
    assert_eq!(
        replayed.branch_cov, recorded.branch_cov,
        "replay does not reproduce recorded branch coverage"
    );
    assert_eq!(replayed.per_branch_hits.keys().collect::<Vec<_>>(),
               recorded.per_branch_hits.keys().collect::<Vec<_>>());
    println!("criterion 9: PASS — byte-identical artifacts ({} files) and replay reproduces coverage", names.len());
}

/// Equality chains starve mutation (0 mutant-discovered paths), while
/// the range-interleaved benchmark feeds it (>=1 in >=15 of 20 seeds).
#[test]
fn criterion_10_adversarial_vs_favorable() {
    let eqchain = compile_bench("eqchain.mini");
    let rangeweave = compile_bench("rangeweave.mini");
    let mut eq_total = 0u64;
    let mut rw_hits = 0usize;
    for seed in 1..=20u64 {
        let mut hp = hp_base();
        hp.sim_budget = 500;
        hp.seed = seed;
        let mut e = Engine::new(&eqchain, hp.clone());
        e.run_to_end();
        eq_total += e.mutant_new_paths();
        let mut r = Engine::new(&rangeweave, hp);
        r.run_to_end();
        if r.mutant_new_paths() >= 1 {
            rw_hits += 1;
        }
    }
    assert_eq!(eq_total, 0, "eqchain mutants discovered {eq_total} paths; expected 0");
    assert!(rw_hits >= 15, "rangeweave mutants found paths in only {rw_hits}/20 seeds");
    println!("criterion 10: PASS — eqchain mutant paths = 0; rangeweave mutants productive in {rw_hits}/20 seeds");
}
