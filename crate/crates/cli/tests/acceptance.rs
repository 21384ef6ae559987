//! Acceptance suite. Every test prints one `PASS`/`FAIL` line naming its
//! criterion, written straight to stderr so it shows without `--nocapture`.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::io::Write;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transit_sandbox::demand::{generate_passengers, PassengerState};
use transit_sandbox::engine::SimContext;
use transit_sandbox::metrics::{RunReport, KM_PER_MILE};
use transit_sandbox::policy::cost::{
    default_frequency_grid, optimize_design, total_cost, CostAssumptions, FixedCostParams, DEFAULT_STOP_RANGE,
};
use transit_sandbox::policy::insertion::candidate_count;
use transit_sandbox::scenario::{ScenarioParams, SystemDesign};
use transit_sandbox_cli::config::Config;
use transit_sandbox_cli::output::read_summary_reports;
use transit_sandbox_cli::sweep::{execute, run_sweep, SweepOptions};

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    let line = format!("criterion {n:>2} [{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn case_study() -> Config {
    Config::bundled("b63_case_study").unwrap()
}

fn design(cfg: &Config, id: &str, s: &ScenarioParams) -> SystemDesign {
    cfg.design_for(cfg.design(id).unwrap(), s).unwrap()
}

fn run_one(cfg: &Config, id: &str, lambda: f64, seed: u64) -> RunReport {
    let s = cfg.scenario_params(lambda, seed);
    let d = design(cfg, id, &s);
    let demand = generate_passengers(&s, 0.0, s.sim_length).unwrap();
    execute(&s, &d, id, &demand, None).unwrap().report
}

fn seeds(n: u64) -> Vec<u64> {
    (1..=n).collect()
}

#[test]
fn c01_insertion_matches_exhaustive_search() {
    let per_kind = 5000u64;
    let mut mismatches = 0;
    let mut count_errors = 0;
    let mut feasible = 0;
    for (flex, base) in [(false, 500_000u64), (true, 700_000u64)] {
        for seed in base..base + per_kind {
            let inst = oracle::random_instance(seed, flex);
            let (got, counter) = oracle::planner_choice(&inst);
            let want = oracle::brute_force(&inst.ctx, &inst.snap, &inst.req, inst.objective);
            mismatches += !oracle::agree(&got, &want) as u32;
            let n = inst.snap.stops.len();
            let expected = if n == 0 { 1 } else { n * (n + 1) / 2 };
            let counts_ok = counter.consistent()
                && counter.expected as usize == expected
                && candidate_count(n) == expected
                && oracle::door_sequence_count(&inst.snap) == expected;
            count_errors += !counts_ok as u32;
            feasible += got.is_some() as u32;
        }
    }
    verdict(
        1,
        "insertion oracle",
        mismatches == 0 && count_errors == 0,
        format!(
            "{} instances ({feasible} feasible), {mismatches} choice mismatches, {count_errors} candidate-count errors",
            2 * per_kind
        ),
    );
}

#[test]
fn c02_conservation_and_feasibility() {
    let cfg = case_study();
    let out = run_sweep(
        &cfg,
        &SweepOptions {
            seeds: vec![1],
            parallelism: 1,
            trace: None,
        },
    )
    .unwrap();
    let mut problems = Vec::new();
    if !out.failures.is_empty() || out.reports.len() != 15 {
        problems.push(format!("{} reports, {} failures", out.reports.len(), out.failures.len()));
    }
    for r in &out.reports {
        let s = cfg.scenario_params(r.lambda, r.seed);
        let d = design(&cfg, &r.design_id, &s);
        let ctx = SimContext::new(&s, &d).unwrap();
        let label = format!("{}@{}", r.design_id, r.scenario_id);
        if r.generated != r.ridership + r.rejected || r.passengers.len() != r.generated {
            problems.push(format!("{label}: conservation"));
        }
        if !r.audit.clean() {
            problems.push(format!("{label}: audit {:?}", r.audit));
        }
        let (wait_cap, ride_cap, backtrack) = match &d {
            SystemDesign::Fixed(_) => (None, None, None),
            SystemDesign::Flex(f) => (Some(f.zeta_w), None, Some(f.zeta_b)),
            SystemDesign::OnDemand(o) => (Some(o.zeta_w), Some(o.zeta_d), None),
        };
        for p in r.passengers.iter().filter(|p| p.state == PassengerState::Served) {
            if wait_cap.is_some_and(|c| p.t_wait > c + 1e-9) {
                problems.push(format!("{label}: passenger {} waited {}", p.id.0, p.t_wait));
            }
            if ride_cap.is_some_and(|z| p.t_invehicle > z * ctx.direct_ride_s(p.origin, p.destination) + 1e-9) {
                problems.push(format!("{label}: passenger {} rode {}", p.id.0, p.t_invehicle));
            }
        }
        if backtrack.is_some_and(|b| r.audit.max_section_backtrack_km > b + 1e-9) {
            problems.push(format!("{label}: backtrack {}", r.audit.max_section_backtrack_km));
        }
    }
    let served: usize = out.reports.iter().map(|r| r.ridership).sum();
    verdict(
        2,
        "conservation and feasibility",
        problems.is_empty(),
        format!("{} runs, {served} served, problems: {problems:?}", out.reports.len()),
    );
}

#[test]
fn c03_fixed_route_invariance_across_demand() {
    let cfg = case_study();
    let reports: Vec<RunReport> = cfg.scenario.lambda.iter().map(|&l| run_one(&cfg, "fixed_existing", l, 1)).collect();
    let SystemDesign::Fixed(f) = design(&cfg, "fixed_existing", &cfg.scenario_params(80.0, 1)) else {
        panic!("reference design is not a fixed route")
    };
    let spacing_mi = cfg.scenario.length / (f.stops - 1) as f64 / KM_PER_MILE;
    let vmt: Vec<f64> = reports.iter().map(|r| r.vmt_mi).collect();
    let spread = vmt.iter().cloned().fold(f64::MIN, f64::max) - vmt.iter().cloned().fold(f64::MAX, f64::min);
    let wtt: Vec<f64> = reports.iter().map(|r| r.avg_wtt_min.unwrap()).collect();
    let mean = wtt.iter().sum::<f64>() / wtt.len() as f64;
    let sd = (wtt.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (wtt.len() - 1) as f64).sqrt();
    let cv = sd / mean;
    verdict(
        3,
        "fixed-route invariance",
        spread <= spacing_mi && cv < 0.05,
        format!("VMT {vmt:.2?} mi (spread {spread:.3} <= {spacing_mi:.3}), wtt {wtt:.2?} min (CV {:.3}% < 5%)", cv * 100.0),
    );
}

#[test]
fn c04_fixed_route_ridership_scales_with_demand() {
    let cfg = case_study();
    let mut rows = Vec::new();
    let mut ok = true;
    for seed in seeds(5) {
        let r: Vec<f64> = [80.0, 200.0, 400.0]
            .iter()
            .map(|&l| run_one(&cfg, "fixed_existing", l, seed).ridership as f64)
            .collect();
        let (q2, q4) = (r[1] / (2.5 * r[0]), r[2] / (5.0 * r[0]));
        ok &= (q2 - 1.0).abs() <= 0.15 && (q4 - 1.0).abs() <= 0.15;
        rows.push(format!("seed {seed}: {}/{}/{} ({q2:.3}, {q4:.3})", r[0], r[1], r[2]));
    }
    verdict(4, "fixed-route ridership proportionality", ok, rows.join("; "));
}

#[test]
fn c05_extended_flex_serves_more_than_original() {
    let cfg = case_study();
    let mut every_seed = true;
    let (mut orig10, mut ext10) = (0usize, 0usize);
    let mut rows = Vec::new();
    for seed in seeds(10) {
        let s = cfg.scenario_params(80.0, seed);
        let demand = generate_passengers(&s, 0.0, s.sim_length).unwrap();
        let mut pair = Vec::new();
        for id in ["flex_sc10", "flex_sc20"] {
            let SystemDesign::Flex(ext) = design(&cfg, id, &s) else { panic!("{id} is not flex") };
            let mut orig = ext.clone();
            orig.walking_enabled = false;
            let e = execute(&s, &SystemDesign::Flex(ext), id, &demand, None).unwrap().report.ridership;
            let o = execute(&s, &SystemDesign::Flex(orig), id, &demand, None).unwrap().report.ridership;
            every_seed &= e >= o;
            pair.push((o, e));
        }
        orig10 += pair[0].0;
        ext10 += pair[0].1;
        rows.push(format!("{seed}: {}->{} / {}->{}", pair[0].0, pair[0].1, pair[1].0, pair[1].1));
    }
    let gain = ext10 as f64 / orig10 as f64 - 1.0;
    verdict(
        5,
        "extended vs original flex",
        every_seed && (0.10..=1.50).contains(&gain),
        format!(
            "extended >= original every seed: {every_seed}; gain at S_c=10 {:.1}% (bounds 10%..150%); original->extended S_c=10 / S_c=20 by seed [{}]",
            gain * 100.0,
            rows.join(", ")
        ),
    );
}

#[test]
fn c06_policy_ordering_at_high_demand() {
    let cfg = case_study();
    let mut holding = 0;
    let mut rows = Vec::new();
    for seed in seeds(10) {
        let r: Vec<RunReport> = ["fixed_existing", "flex_sc20", "flex_sc10", "on_demand"]
            .iter()
            .map(|id| run_one(&cfg, id, 400.0, seed))
            .collect();
        let ordered = r.windows(2).all(|w| w[0].ridership >= w[1].ridership);
        let ratio = r[3].vmt_mi / r[0].vmt_mi;
        let ok = ordered && (1.5..=4.5).contains(&ratio);
        holding += ok as u32;
        let rides: Vec<usize> = r.iter().map(|x| x.ridership).collect();
        rows.push(format!("{seed}: {rides:?} VMT ratio {ratio:.2}"));
    }
    verdict(
        6,
        "policy ordering at lambda=400",
        holding >= 8,
        format!("{holding}/10 seeds hold; {}", rows.join(", ")),
    );
}

#[test]
fn c07_on_demand_beats_fixed_on_travel_time() {
    let cfg = case_study();
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in seeds(10) {
        let od = run_one(&cfg, "on_demand", 80.0, seed).avg_wtt_min.unwrap();
        let fx = run_one(&cfg, "fixed_existing", 80.0, seed).avg_wtt_min.unwrap();
        wins += (od < fx) as u32;
        rows.push(format!("{od:.2}<{fx:.2}"));
    }
    verdict(
        7,
        "on-demand travel-time advantage at lambda=80",
        wins >= 8,
        format!("{wins}/10 seeds; {}", rows.join(", ")),
    );
}

fn random_params(rng: &mut ChaCha8Rng) -> FixedCostParams {
    let a = CostAssumptions {
        c: rng.gen_range(50.0..300.0),
        p_a: rng.gen_range(5.0..50.0),
        p_w: rng.gen_range(5.0..50.0),
        p_v: rng.gen_range(5.0..50.0),
        beta: rng.gen_range(1.0..15.0),
        t_s: rng.gen_range(5.0..40.0),
        l_fraction: rng.gen_range(0.1..0.9),
    };
    FixedCostParams::new(&a, &ScenarioParams::b63(rng.gen_range(10.0..1000.0), 1))
}

#[test]
fn c08_optimizer_properties() {
    // Hand-computed reference point: c = 120, P_a = 25, P_w = 20, P_v = 12,
    // beta = 10 s, t_s = 20 s, l = L/2, N = 80, S = 30, f = 1.5.
    let a = CostAssumptions {
        c: 120.0,
        p_a: 25.0,
        p_w: 20.0,
        p_v: 12.0,
        beta: 10.0,
        t_s: 20.0,
        l_fraction: 0.5,
    };
    let b = total_cost(30, 1.5, &FixedCostParams::new(&a, &ScenarioParams::b63(80.0, 1)));
    let expected = [
        (b.t_c, 1.4646833511864186),
        (b.c_o, 263.64300321355535),
        (b.access, 87.46666666666667),
        (b.wait, 533.3333333333334),
        (b.in_vehicle, 703.048008569481),
        (b.c_u, 1323.848008569481),
        (b.c_t, 1587.4910117830364),
    ];
    let worst_rel = expected.iter().map(|(got, want)| ((got - want) / want).abs()).fold(0.0, f64::max);

    let grid = default_frequency_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut not_local = 0;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let o = optimize_design(&p, DEFAULT_STOP_RANGE, &grid).unwrap();
        let fi = grid.iter().position(|&f| f == o.f).unwrap() as i64;
        let beaten = (-1i64..=1).any(|ds| {
            (-1i64..=1).any(|df| {
                let s = o.stops as i64 + ds;
                let f = fi + df;
                s >= 0
                    && DEFAULT_STOP_RANGE.contains(&(s as usize))
                    && (0..grid.len() as i64).contains(&f)
                    && total_cost(s as usize, grid[f as usize], &p).c_t < o.cost.c_t
            })
        });
        not_local += beaten as u32;
    }

    let mut monotone = true;
    let mut last = (0usize, 0.0f64);
    let mut table = Vec::new();
    for n in (20..=800).step_by(20) {
        let p = FixedCostParams::new(&CostAssumptions::default(), &ScenarioParams::b63(n as f64, 1));
        let o = optimize_design(&p, DEFAULT_STOP_RANGE, &grid).unwrap();
        monotone &= o.stops >= last.0 && o.f >= last.1;
        last = (o.stops, o.f);
        if [80, 200, 400].contains(&n) {
            table.push(format!("N={n}: S*={} f*={}", o.stops, o.f));
        }
    }
    verdict(
        8,
        "optimizer properties",
        worst_rel <= 1e-9 && not_local == 0 && monotone,
        format!(
            "spot relative error {worst_rel:.1e} (<= 1e-9), {not_local}/1000 draws not grid-local minima, monotone over N=20..800: {monotone}; {}",
            table.join(", ")
        ),
    );
}

#[test]
fn c09_demand_statistics() {
    let cfg = case_study();
    let n_seeds = 200;
    let mut counts = Vec::with_capacity(n_seeds);
    let mut too_close = 0;
    for seed in 0..n_seeds as u64 {
        let s = cfg.scenario_params(80.0, seed);
        let d = generate_passengers(&s, 0.0, s.sim_length).unwrap();
        too_close += d.iter().filter(|p| s.metric.distance(p.origin, p.destination) <= s.zeta_a).count();
        counts.push(d.len() as f64);
    }
    let expected = 80.0 * 4.0;
    let mean = counts.iter().sum::<f64>() / n_seeds as f64;
    let se = (expected / n_seeds as f64).sqrt();
    let z = (mean - expected) / se;
    verdict(
        9,
        "demand statistics",
        z.abs() <= 3.0 && too_close == 0,
        format!("mean {mean:.2} over {n_seeds} seeds vs {expected} (z = {z:.2}), {too_close} pairs within walking distance"),
    );
}

fn sandbox(args: &[&str], cwd: &Path) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_sandbox")).args(args).current_dir(cwd).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn c10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    sandbox(&["sweep", "--seed", "1", "--seed", "2", "--parallelism", "8", "--out-dir", "p8"], root);
    sandbox(&["sweep", "--seed", "1", "--seed", "2", "--parallelism", "1", "--out-dir", "p1"], root);
    let mut csvs = Vec::new();
    let mut differing = Vec::new();
    for entry in std::fs::read_dir(root.join("p1")).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name.ends_with(".csv") {
            if std::fs::read(root.join("p1").join(&name)).unwrap() != std::fs::read(root.join("p8").join(&name)).unwrap() {
                differing.push(name.clone());
            }
            csvs.push(name);
        }
    }
    csvs.sort();

    let cfg = case_study();
    sandbox(&["gen-demand", "--lambda", "80", "--seed", "3", "--out-dir", "g"], root);
    let mut round_trip_mismatch = Vec::new();
    for entry in &cfg.designs {
        let out_dir = format!("r_{}", entry.id);
        sandbox(
            &["run", "--design", &entry.id, "--lambda", "80", "--seed", "3", "--demand", "g/demand.csv", "--out-dir", &out_dir],
            root,
        );
        let from_files = read_summary_reports(&root.join(&out_dir).join("summary.json")).unwrap();
        let mut direct = run_one(&cfg, &entry.id, 80.0, 3);
        direct.passengers.clear();
        if from_files != vec![direct] {
            round_trip_mismatch.push(entry.id.clone());
        }
    }
    verdict(
        10,
        "determinism",
        csvs.contains(&"reports.csv".to_string()) && differing.is_empty() && round_trip_mismatch.is_empty(),
        format!(
            "parallelism 8 vs 1 over 30 runs: {} CSVs compared {csvs:?}, differing {differing:?}; gen-demand/run round trip mismatches {round_trip_mismatch:?}",
            csvs.len()
        ),
    );
}
