//! Release gate: one test per shipped criterion, each printing a single
//! verdict line (visible under `--nocapture`; on failure the same line is
//! the panic message). Library criteria run the checkers in-process, solver
//! and determinism criteria drive the installed binary end to end.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use gmetric::analysis::{derived_metric, g_ball, DerivedVariant};
use gmetric::axioms::{
    check_basic_properties, check_metric_axioms, check_order3_explicit, full_audit, AxiomId,
};
use gmetric::fixedpoint::solve_weak_contractive;
use gmetric::fixtures::{
    corrupt_matrix, label_sample, metric_matrix, random_table, scalar_sample, vector_sample,
    ALL_CORRUPTIONS,
};
use gmetric::space::Points;
use gmetric::{CheckConfig, Claim, GMetric, GroundSample, MetricSource, PointTuple};

fn criterion(n: usize, desc: &str, ok: bool, detail: &str) {
    if ok {
        println!("criterion {n:2}: pass - {desc}");
    } else {
        println!("criterion {n:2}: FAIL - {desc} ({detail})");
        panic!("criterion {n} failed: {desc} ({detail})");
    }
}

fn build(kind: &str, order: usize) -> GMetric {
    match kind {
        "discrete" => GMetric::discrete(order),
        "diameter" => GMetric::diameter(order),
        "norm_diameter" => GMetric::norm_diameter(order),
        "average" => GMetric::average(order),
        "max" => GMetric::max(order),
        "shortest_path" => GMetric::shortest_path(order),
        "enclosing_ball" => GMetric::enclosing_ball(order),
        other => panic!("unknown kind {other}"),
    }
    .expect("constructible")
}

fn explicit_sample(matrix: Vec<Vec<f64>>) -> GroundSample {
    let labels = (0..matrix.len()).map(|i| format!("p{i}")).collect();
    GroundSample::from_matrix_unvalidated(Points::Labels(labels), matrix).expect("symmetric")
}

fn gmetric_bin() -> &'static str {
    env!("CARGO_BIN_EXE_gmetric")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(gmetric_bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, name: &str) -> Value {
    let bytes = fs::read(dir.join(name)).expect("report written");
    serde_json::from_slice(&bytes).expect("report parses")
}

fn steps(rep: &Value) -> Vec<Value> {
    rep["trace"]["steps"].as_array().expect("trace rows").clone()
}

const SCALARS: &str =
    r#"{"points": [[0.0], [0.07], [0.16], [0.21], [0.33], [0.45], [0.58], [0.64]], "metric": "l1"}"#;

#[test]
fn criterion_01_catalog_audits_are_clean_on_seeded_samples() {
    let catalog: &[(&str, std::ops::RangeInclusive<usize>)] = &[
        ("discrete", 1..=4),
        ("diameter", 1..=4),
        ("average", 1..=4),
        ("max", 1..=4),
        ("shortest_path", 2..=2),
    ];
    let cfg = CheckConfig::default();
    let started = Instant::now();
    let mut audits = 0usize;
    let mut failing: BTreeMap<String, usize> = BTreeMap::new();
    let mut first = String::new();
    for seed in 0..50u64 {
        let sample = scalar_sample(seed, 3 + (seed as usize % 6));
        for (kind, orders) in catalog {
            for order in orders.clone() {
                let summary = full_audit(&build(kind, order), &sample, &cfg).expect("audited");
                audits += 1;
                if !summary.violations.is_empty() {
                    *failing.entry(format!("{kind} order {order}")).or_default() += 1;
                    if first.is_empty() {
                        first = format!(
                            "first: {kind} order {order} seed {seed}, {}",
                            serde_json::to_string(&summary.violations[0]).unwrap()
                        );
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let in_budget = elapsed < Duration::from_secs(60);
    let bad: usize = failing.values().sum();
    let detail = format!(
        "{bad} of {audits} audits report violations {failing:?}; {first}; elapsed {elapsed:.2?}"
    );
    criterion(
        1,
        "exhaustive audits of the catalog stay violation-free across 50 seeded samples in under 60s",
        failing.is_empty() && in_budget,
        &detail,
    );
}

#[test]
fn criterion_02_designed_failures_land_exactly_where_built() {
    let cfg = CheckConfig::default();

    let units = GroundSample::new(
        Points::Vectors(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        MetricSource::Euclidean,
    )
    .unwrap();
    let nd = full_audit(&build("norm_diameter", 1), &units, &cfg).unwrap();
    let g1_only = nd.violations.len() == 1 && nd.violations[0].axiom == AxiomId::G1;

    let two = GroundSample::scalars(&[0.0, 1.0], MetricSource::L1).unwrap();
    let kernel = GMetric::non_mi();
    let v_xxy = kernel.evaluate(&two, &PointTuple::new(vec![0, 0, 1]).unwrap()).unwrap();
    let v_xyy = kernel.evaluate(&two, &PointTuple::new(vec![0, 1, 1]).unwrap()).unwrap();
    let mi = full_audit(&kernel, &two, &cfg).unwrap();
    let witnessed = mi.mi_findings.iter().any(|f| {
        let w: Vec<&[usize]> = f.witness.iter().map(|t| t.indices()).collect();
        f.axiom == AxiomId::Mi
            && f.lhs == 2.0
            && f.rhs == 1.0
            && w.contains(&[0usize, 1, 1].as_slice())
            && w.contains(&[0usize, 0, 1].as_slice())
    });
    let ok = g1_only
        && mi.violations.is_empty()
        && witnessed
        && v_xxy == 1.0
        && v_xyy == 2.0;
    let detail = format!(
        "norm-diameter violations {}, multiplicity kernel violations {}, findings {}, g(x,x,y)={v_xxy}, g(x,y,y)={v_xyy}",
        nd.violations.len(),
        mi.violations.len(),
        mi.mi_findings.len()
    );
    criterion(
        2,
        "norm-diameter on unit vectors fails exactly the zero axiom; the two-point kernel fails only multiplicity with exact witnesses",
        ok,
        &detail,
    );
}

#[test]
fn criterion_03_order_one_audit_matches_direct_metric_check() {
    let cfg = CheckConfig::default();
    let g = build("max", 1);
    let mut agreements = 0usize;
    let mut mismatches = Vec::new();
    for seed in 0..100u64 {
        let size = 4 + (seed as usize % 4);
        let base = metric_matrix(seed, size);
        let matrix = if seed % 2 == 1 {
            let kind = ALL_CORRUPTIONS[(seed as usize / 2) % ALL_CORRUPTIONS.len()];
            corrupt_matrix(&base, kind, seed)
        } else {
            base
        };
        let direct = check_metric_axioms(&matrix, &cfg).is_empty();
        let sample = explicit_sample(matrix);
        let audited = full_audit(&g, &sample, &cfg).unwrap().violations.is_empty();
        if direct == audited {
            agreements += 1;
        } else {
            mismatches.push(format!("seed {seed}: metric-check pass={direct} audit pass={audited}"));
        }
    }
    criterion(
        3,
        "order-1 audit verdict equals the direct metric-axiom verdict on 100 seeded matrices",
        agreements == 100,
        &format!("{agreements}/100 agree; {mismatches:?}"),
    );
}

#[test]
fn criterion_04_order_three_generic_and_explicit_audits_agree() {
    let cfg = CheckConfig::default();
    let mut cases = 0usize;
    let mut disagreements = Vec::new();
    let mut record = |label: String, agree: bool, cases: &mut usize| {
        *cases += 1;
        if !agree {
            disagreements.push(label);
        }
    };

    for seed in [11u64, 12, 13] {
        let scal = scalar_sample(seed, 5);
        for kind in ["discrete", "diameter", "average", "max", "shortest_path"] {
            let a = check_order3_explicit(&build(kind, 3), &scal, &cfg).unwrap();
            record(format!("{kind} seed {seed}"), a.agree, &mut cases);
        }
        let plane = vector_sample(seed, 5, 2, MetricSource::Euclidean);
        let a = check_order3_explicit(&build("enclosing_ball", 3), &plane, &cfg).unwrap();
        record(format!("enclosing_ball seed {seed}"), a.agree, &mut cases);
    }
    for (i, kind) in ALL_CORRUPTIONS.iter().cycle().take(8).enumerate() {
        let matrix = corrupt_matrix(&metric_matrix(40 + i as u64, 5), *kind, i as u64);
        let sample = explicit_sample(matrix);
        let a = check_order3_explicit(&build("max", 3), &sample, &cfg).unwrap();
        record(format!("corrupted {kind:?} #{i}"), a.agree, &mut cases);
    }
    let summary = full_audit(&build("diameter", 3), &scalar_sample(11, 5), &cfg).unwrap();
    let field_ok = summary.order3_agreement == Some(true);

    criterion(
        4,
        "generic and explicit order-3 audits agree in verdict on every tested case",
        disagreements.is_empty() && cases >= 20 && field_ok,
        &format!("{cases} cases, disagreements {disagreements:?}, audit field {:?}", summary.order3_agreement),
    );
}

#[test]
fn criterion_05_basic_property_ladder_holds_and_collapses_at_s_one() {
    let cfg = CheckConfig::default();
    let sample = scalar_sample(5, 6);
    let mut catalog = Vec::new();
    for order in 2..=4 {
        for kind in ["discrete", "diameter", "average", "max", "shortest_path", "enclosing_ball"] {
            let g = build(kind, order);
            if g.claim() == Claim::Proven {
                catalog.push((kind, g));
            }
        }
    }
    let mut violations = Vec::new();
    let mut exact = true;
    let mut identity_cases = 0usize;
    for (kind, g) in &catalog {
        let reports = check_basic_properties(g, &sample, &cfg).unwrap();
        if !reports.is_empty() {
            violations.push(format!("{kind}/{}: {}", g.order(), reports.len()));
        }
        // At s = 1 the ladder bound and the count factor both reduce to the
        // one-vs-rest star itself, so the comparison is bitwise.
        let k = g.order() + 1;
        for x in 0..sample.size() {
            for w in 0..sample.size() {
                let mut idx = vec![w; k];
                idx[0] = x;
                let star = g.evaluate(&sample, &PointTuple::new(idx).unwrap()).unwrap();
                let ladder = 1.0 * star;
                let factor = (1 + 0 * (k - 2)) as f64 * star;
                exact &= star.to_bits() == ladder.to_bits() && star.to_bits() == factor.to_bits();
                identity_cases += 1;
            }
        }
    }
    criterion(
        5,
        "the seven basic-property inequalities hold across the proven catalog and collapse exactly at s = 1",
        violations.is_empty() && exact && catalog.len() == 11,
        &format!(
            "{} constructions, violations {violations:?}, {identity_cases} s=1 identities bitwise-exact: {exact}",
            catalog.len()
        ),
    );
}

#[test]
fn criterion_06_ball_sandwich_inclusions_are_literal() {
    let specs: &[(&str, usize)] = &[
        ("discrete", 2),
        ("diameter", 3),
        ("average", 2),
        ("max", 4),
        ("enclosing_ball", 2),
    ];
    let sample = scalar_sample(606, 7);
    let mut pairs = 0usize;
    let mut breaks = Vec::new();
    for &(kind, order) in specs {
        let g = build(kind, order);
        let d = derived_metric(&g, &sample, DerivedVariant::TwoSidedBlock { s: 1 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(600 + order as u64);
        for _ in 0..20 {
            let c = rng.gen_range(0..sample.size());
            let r = rng.gen_range(0.02..1.6);
            let outer = g_ball(&g, &sample, c, r).unwrap().members;
            let shrunk = g_ball(&g, &sample, c, r / (order + 1) as f64).unwrap().members;
            let mid: BTreeSet<usize> =
                (0..sample.size()).filter(|&y| d[c][y] < r).collect();
            pairs += 1;
            if !(shrunk.is_subset(&mid) && mid.is_subset(&outer)) {
                breaks.push(format!(
                    "{kind}/{order} c={c} r={r:.4}: {shrunk:?} vs {mid:?} vs {outer:?}"
                ));
            }
        }
    }
    criterion(
        6,
        "shrunken g-ball sits inside the derived-metric ball inside the g-ball for 20 seeded pairs per construction",
        breaks.is_empty() && pairs == 100,
        &format!("{pairs} pairs, failures {breaks:?}"),
    );
}

#[test]
fn criterion_07_halving_map_steps_match_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "fixpoint", "--map", "affine:0.5,0", "--regime", "banach", "--x0", "1",
            "--tol", "1e-13", "--trials", "5", "--seed", "11", "--out", "halving.json",
        ],
    );
    let rep = report(dir.path(), "halving.json");
    let rows = steps(&rep);
    let mut worst = 0.0f64;
    let mut covered = true;
    for k in 0..=40usize {
        match rows.get(k) {
            Some(row) => {
                let step = row["step_g"].as_f64().unwrap();
                let bound = row["bound_g"].as_f64().unwrap();
                let expected = (2.0f64).powi(-(k as i32 + 1));
                worst = worst.max((step - expected).abs()).max((step - bound).abs());
            }
            None => covered = false,
        }
    }
    let terminal = rep["trace"]["terminal"][0].as_f64().unwrap();
    let coincide = rep["uniqueness"]["coincide"].as_bool().unwrap_or(false);
    let gap = rep["uniqueness"]["max_terminal_gap"].as_f64().unwrap_or(f64::INFINITY);
    let ok = out.status.code() == Some(0)
        && covered
        && worst <= 1e-12
        && terminal.abs() <= 1e-10
        && coincide
        && gap <= 1e-10;
    criterion(
        7,
        "halving-map orbit matches step 2^-(k+1) through k = 40 and five starts share the terminal",
        ok,
        &format!(
            "exit {:?}, rows {} (k<=40 covered: {covered}), worst dev {worst:.3e}, terminal {terminal:.3e}, coincide {coincide}, gap {gap:.3e}",
            out.status.code(),
            rows.len()
        ),
    );
}

#[test]
fn criterion_08_quarter_map_obeys_the_quasi_bound_at_one_third() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "fixpoint", "--map", "affine:0.25,0", "--regime", "quasi", "--x0", "1",
            "--tol", "1e-30", "--max-iter", "100", "--out", "quasi.json",
        ],
    );
    let rep = report(dir.path(), "quasi.json");
    let rows = steps(&rep);
    let slack = rows.last().map(|r| r["step_g"].as_f64().unwrap()).unwrap_or(f64::INFINITY);
    let mut bounded = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut covered = true;
    for n in 0..=20usize {
        match rows.get(n) {
            Some(row) => {
                let bound = row["bound_g"].as_f64().unwrap();
                let actual = row["rate_to_terminal"].as_f64().unwrap();
                let expected = 3.0 * (4.0f64).powi(-(n as i32));
                worst_bound = worst_bound.max((bound / expected - 1.0).abs());
                bounded &= actual <= expected + slack;
                worst_ratio = worst_ratio.max((actual / bound - 1.0 / 3.0).abs());
            }
            None => covered = false,
        }
    }
    let diameters: Vec<f64> = rep["trace"]["orbit_diameter"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let widest = diameters.iter().fold(0.0f64, |a, &b| a.max(b));
    let ok = out.status.code() == Some(0)
        && covered
        && worst_bound <= 1e-12
        && bounded
        && worst_ratio <= 1e-9
        && widest <= 3.0 + 1e-9;
    criterion(
        8,
        "quarter-map displacement stays within 3*4^-N plus terminal slack at ratio one third, orbit diameter under 3",
        ok,
        &format!(
            "exit {:?}, rows {} (N<=20 covered: {covered}), bound dev {worst_bound:.3e}, bounded {bounded}, ratio dev {worst_ratio:.3e}, widest orbit diameter {widest}",
            out.status.code(),
            rows.len()
        ),
    );
}

#[test]
fn criterion_09_identity_psi_half_phi_runs_at_equality() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "fixpoint", "--map", "affine:0.5,0", "--regime", "psi-phi",
            "--psi", "identity", "--phi", "linear:0.5", "--x0", "1", "--out", "psiphi.json",
        ],
    );
    let rep = report(dir.path(), "psiphi.json");
    let rows = steps(&rep);
    let mut worst = 0.0f64;
    for (k, row) in rows.iter().enumerate() {
        let step = row["step_g"].as_f64().unwrap();
        let bound = row["bound_g"].as_f64().unwrap();
        worst = worst.max((step - bound).abs());
        if k + 1 < rows.len() {
            let next = rows[k + 1]["step_g"].as_f64().unwrap();
            worst = worst.max((next - 0.5 * step).abs());
        }
    }
    let ok = out.status.code() == Some(0) && rows.len() > 1 && worst <= 1e-12;
    criterion(
        9,
        "identity-psi half-phi control is met with equality along the halving orbit",
        ok,
        &format!("exit {:?}, rows {}, worst deviation {worst:.3e}", out.status.code(), rows.len()),
    );
}

#[test]
fn criterion_10_validated_tables_produce_exact_fixed_points() {
    let g = build("max", 2);
    let mut passing = 0usize;
    let mut broken = Vec::new();
    for seed in 0..20u64 {
        let size = 3 + (seed as usize % 5);
        let sample = label_sample(seed, size);
        let table = random_table(seed, size);
        let rep = solve_weak_contractive(&g, &sample, &table).unwrap();
        if rep.strictness_failures.is_empty() {
            passing += 1;
            let exact = match rep.fixed_point {
                Some(i) => rep.f_values[i] == 0.0 && i == rep.argmin,
                None => false,
            };
            if !exact {
                broken.push(format!("seed {seed}: {:?} f={:?}", rep.fixed_point, rep.f_values));
            }
        }
    }
    criterion(
        10,
        "every table passing strict-decrease validation yields a fixed point with exactly zero displacement",
        passing >= 1 && broken.is_empty(),
        &format!("{passing}/20 tables validated, defects {broken:?}"),
    );
}

#[test]
fn criterion_11_reports_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pts.json"), SCALARS).unwrap();
    fs::write(dir.path().join("tail.json"), "[7, 6, 5, 4, 3, 2, 1, 0]").unwrap();
    fs::write(dir.path().join("konst.json"), "[0, 0, 0, 0, 0, 0, 0, 0]").unwrap();
    let verbs: &[&[&str]] = &[
        &["check", "--construction", "max", "--order", "3", "--sample", "pts.json",
          "--sampled", "--budget", "500", "--seed", "5"],
        &["eval", "--construction", "diameter", "--order", "2", "--sample", "pts.json",
          "--tuple", "0,3,7"],
        &["ball", "--construction", "diameter", "--order", "2", "--sample", "pts.json",
          "--center", "0", "--radius", "0.3"],
        &["net", "--construction", "diameter", "--order", "2", "--sample", "pts.json",
          "--eps", "0.2"],
        &["seq", "--construction", "diameter", "--order", "2", "--sample", "pts.json",
          "--prefix-file", "tail.json", "--limit", "0"],
        &["fixpoint", "--map", "affine:0.5,0", "--regime", "banach", "--x0", "1",
          "--trials", "4", "--seed", "3"],
        &["lambda", "--sample", "pts.json", "--map", "table:konst.json",
          "--regime", "weak-contractive"],
    ];
    let mut diffs = Vec::new();
    for (i, verb) in verbs.iter().enumerate() {
        let a = format!("a{i}.json");
        let b = format!("b{i}.json");
        let run = |name: &str| {
            let mut args = verb.to_vec();
            args.extend(["--out", name]);
            run_in(dir.path(), &args)
        };
        let first = run(&a);
        let second = run(&b);
        let bytes_a = fs::read(dir.path().join(&a)).expect("first report");
        let bytes_b = fs::read(dir.path().join(&b)).expect("second report");
        if bytes_a != bytes_b || first.status.code() != second.status.code() {
            diffs.push(verb[0].to_string());
        }
    }
    criterion(
        11,
        "all seven verbs emit byte-identical reports on identical inputs and seed",
        diffs.is_empty(),
        &format!("differing verbs {diffs:?}"),
    );
}
