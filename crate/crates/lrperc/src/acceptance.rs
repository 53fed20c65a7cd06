//! The acceptance suite.
//!
//! Nine criteria gate a release, each pinned here with its scale and
//! tolerance. They run both from the `accept` command and from the
//! `acceptance` integration test target, which prints one pass/fail line
//! per criterion.

use crate::cli;
use crate::coupling::{self, CPrimeMode, Containment, CoupledRunner};
use crate::exploration::{self, AssertLevel, ExplorationContext, RunOptions};
use crate::lattice::{delta_of, DifferenceSet, Displacement, Kernel, Orientation, PhiFamily};
use crate::marks::MarkField;
use crate::montecarlo;
use crate::oracle::{self, DominationOutcome};
use rayon::prelude::*;
use serde::Serialize;

// Scales and tolerances, one constant per criterion knob.

/// Criterion 1: exploration vs breadth-first search seed count.
pub const BFS_EQUIVALENCE_SEEDS: u64 = 10_000;
/// Criterion 2: randomized consistency-check tuples.
pub const LEMMA_TUPLES: u64 = 10_000;
/// Criterion 3: containment seeds per radius and per orientation.
pub const CONTAINMENT_SEEDS: u64 = 100_000;
pub const CONTAINMENT_RADII: [u32; 3] = [4, 6, 8];
/// Criterion 4: reproduction tolerance for the two hand-derived instances.
pub const Q_EXACTNESS_TOL: f64 = 1e-12;
/// Criterion 5: enumeration agreement tolerance and Monte Carlo scale.
pub const EXACT_TOL: f64 = 1e-12;
pub const TINY_MC_REPLICAS: u64 = 100_000;
/// Criterion 6: separation experiment scale.
pub const SEPARATION_N: u32 = 32;
pub const SEPARATION_REPLICAS: u64 = 10_000;
pub const SEPARATION_SIGMAS: f64 = 3.0;
/// Criterion 7: decay scales.
pub const DECAY_REPLICAS: u64 = 100_000;
pub const DECAY_R2_MIN: f64 = 0.95;
pub const DECAY_LINE_SLOPE_TOL: f64 = 0.05;
/// Criterion 8: critical-density sanity window around the square-lattice
/// bond threshold 1/2.
pub const BETA_N: u32 = 32;
pub const BETA_REPLICAS: u64 = 10_000;
pub const BETA_EDGE_PROB_TOL: f64 = 0.02;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {}: {:<28} {} — {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

fn nn2(p: f64) -> Kernel {
    Kernel::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), p),
            (Displacement::new(vec![0, 1]), p),
        ],
    )
    .expect("nearest-neighbour kernel")
}

/// Criterion 1: with an empty difference set the exploration discovers
/// exactly the breadth-first cluster, on every seed.
pub fn exploration_matches_bfs() -> CriterionResult {
    let kernel = nn2(0.45);
    let delta = DifferenceSet::empty(2, Orientation::Undirected);
    let ctx = ExplorationContext::build(&kernel, &delta, 0.0, 6).expect("context");
    let opts = RunOptions {
        stop_at_boundary: false,
        ..RunOptions::default()
    };
    let mismatches: u64 = (0..BFS_EQUIVALENCE_SEEDS)
        .into_par_iter()
        .filter(|&seed| {
            let field = MarkField::new(seed);
            let outcome = match exploration::run_in_context(&ctx, &field, opts) {
                Ok(o) => o,
                Err(_) => return true,
            };
            let mut mine = outcome.discovered_vertices();
            mine.sort();
            let bfs = oracle::bfs_cluster_in(&ctx, &field);
            mine != bfs.vertices
        })
        .count() as u64;
    CriterionResult {
        id: 1,
        name: "exploration == bfs",
        passed: mismatches == 0,
        details: format!("{mismatches} mismatches over {BFS_EQUIVALENCE_SEEDS} seeds (Z^2, 0.45 nn, n=6)"),
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn unit(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 / 9007199254740992.0
}

/// Criterion 2: zero internal-consistency failures over randomized
/// (kernel, difference set, q, seed) tuples with full tracing.
pub fn lemma_checks() -> CriterionResult {
    let pool_1d = [vec![1], vec![2], vec![3]];
    let pool_2d = [
        vec![1, 0],
        vec![0, 1],
        vec![1, 1],
        vec![2, 0],
        vec![0, 2],
        vec![1, -1],
    ];
    let failures: u64 = (0..LEMMA_TUPLES)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = 0x5EED_0000u64.wrapping_add(i);
            let d = if splitmix(&mut rng).is_multiple_of(2) { 1 } else { 2 };
            let pool: Vec<Vec<i32>> = if d == 1 {
                pool_1d.to_vec()
            } else {
                pool_2d.to_vec()
            };
            let mut entries = Vec::new();
            for z in &pool {
                if unit(&mut rng) < 0.7 {
                    let roll = unit(&mut rng);
                    let value = if roll < 0.05 {
                        1.0
                    } else {
                        unit(&mut rng)
                    };
                    entries.push((Displacement::new(z.clone()), value));
                }
            }
            if entries.is_empty() {
                entries.push((Displacement::new(pool[0].clone()), unit(&mut rng)));
            }
            let kernel = Kernel::table(d, entries).expect("random table kernel");
            let mut delta_disps = Vec::new();
            if unit(&mut rng) > 0.15 {
                for z in &pool {
                    if unit(&mut rng) < 0.4 {
                        delta_disps.push(Displacement::new(z.clone()));
                    }
                }
            }
            let delta =
                DifferenceSet::from_displacements(d, Orientation::Undirected, delta_disps)
                    .expect("difference set");
            let roll = unit(&mut rng);
            let q = if roll < 0.05 {
                0.0
            } else if roll < 0.10 {
                1.0
            } else {
                unit(&mut rng)
            };
            let n = 1 + (splitmix(&mut rng) % 6) as u32;
            let seed = splitmix(&mut rng);
            exploration::run(
                &kernel,
                &delta,
                q,
                n,
                &MarkField::new(seed),
                RunOptions::with_assertions(AssertLevel::FullTrace),
            )
            .is_err()
        })
        .count() as u64;
    CriterionResult {
        id: 2,
        name: "exploration consistency",
        passed: failures == 0,
        details: format!("{failures} assertion failures over {LEMMA_TUPLES} randomized tuples"),
    }
}

fn containment_sweep(runner: &CoupledRunner, seeds: u64) -> (u64, u64, u64) {
    (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let sample = runner.sample_seed(seed).expect("coupled sample");
            match coupling::check_containment(&sample).0 {
                Containment::Holds => (1u64, 0u64, 0u64),
                Containment::NotApplicable => (0, 1, 0),
                Containment::Violated => (0, 0, 1),
            }
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2))
}

/// Criterion 3: the containment theorem produces zero violations, in both
/// the undirected and the oriented variant.
pub fn containment_theorem() -> CriterionResult {
    let mut details = Vec::new();
    let mut violated_total = 0u64;

    let j = nn2(0.45);
    let jp = j
        .with_override(Displacement::new(vec![1, 0]), 0.3)
        .expect("perturbed kernel");
    for n in CONTAINMENT_RADII {
        let runner = CoupledRunner::new(&j, &jp, n, CPrimeMode::PointwiseDominated)
            .expect("coupled runner");
        let (holds, na, violated) = containment_sweep(&runner, CONTAINMENT_SEEDS);
        violated_total += violated;
        details.push(format!("undirected n={n}: {holds} hold / {na} n.a. / {violated} violated"));
    }

    let dj = Kernel::oriented_table(
        1,
        vec![
            (Displacement::new(vec![0, 1]), 0.7),
            (Displacement::new(vec![1, 1]), 0.7),
        ],
    )
    .expect("oriented kernel");
    let djp = dj
        .with_override(Displacement::new(vec![1, 1]), 0.55)
        .expect("perturbed oriented kernel");
    for n in CONTAINMENT_RADII {
        let runner = CoupledRunner::new(&dj, &djp, n, CPrimeMode::PointwiseDominated)
            .expect("coupled runner");
        let (holds, na, violated) = containment_sweep(&runner, CONTAINMENT_SEEDS);
        violated_total += violated;
        details.push(format!("oriented n={n}: {holds} hold / {na} n.a. / {violated} violated"));
    }

    CriterionResult {
        id: 3,
        name: "containment theorem",
        passed: violated_total == 0,
        details: details.join("; "),
    }
}

/// Criterion 4: the two hand-derived thinning strengths to 1e-12.
pub fn q_exactness() -> CriterionResult {
    let j1 = Kernel::table(1, vec![(Displacement::new(vec![1]), 0.5)]).expect("kernel");
    let jp1 = j1
        .with_override(Displacement::new(vec![1]), 1.0 / 16.0)
        .expect("perturbed");
    let d1 = delta_of(&j1, &jp1).expect("delta");
    let p1 = coupling::compute_q(&j1, &jp1, &d1).expect("params");

    let j2 = nn2(0.3);
    let jp2 = j2
        .with_override(Displacement::new(vec![1, 0]), 0.3 * 0.729)
        .expect("perturbed");
    let d2 = delta_of(&j2, &jp2).expect("delta");
    let p2 = coupling::compute_q(&j2, &jp2, &d2).expect("params");

    let err1 = (p1.q - 0.25).abs();
    let err2 = (p2.q - 0.0049).abs();
    CriterionResult {
        id: 4,
        name: "thinning strength exactness",
        passed: err1 < Q_EXACTNESS_TOL && err2 < Q_EXACTNESS_TOL,
        details: format!("|q1 - 1/4| = {err1:.2e}, |q2 - 0.0049| = {err2:.2e}"),
    }
}

/// Criterion 5: exact domination on the tiny line instance, with the
/// enumeration agreeing with closed forms to 1e-12 and Monte Carlo
/// estimates within four binomial standard errors.
pub fn exact_domination_tiny() -> CriterionResult {
    let j = Kernel::table(1, vec![(Displacement::new(vec![1]), 0.5)]).expect("kernel");
    let jp = j
        .with_override(Displacement::new(vec![1]), 1.0 / 16.0)
        .expect("perturbed");
    let check = oracle::exact_domination_check(&j, &jp, 1).expect("domination check");
    let dominated = matches!(check.outcome, DominationOutcome::Dominated);

    // Closed forms: the refined cluster opens each side with probability
    // 1/16; the halo contains each side exactly when its edge is open.
    let cprime_exact = [(1u64, 0.87890625), (2, 0.1171875), (3, 0.00390625)];
    let halo_exact = [(1u64, 0.25), (2, 0.5), (3, 0.25)];
    let mut worst = 0.0f64;
    for (v, p) in cprime_exact {
        worst = worst.max((check.cprime.probability_of(v) - p).abs());
    }
    for (v, p) in halo_exact {
        worst = worst.max((check.halo.probability_of(v) - p).abs());
    }

    // Monte Carlo consistency at the pinned replica count.
    let runner = CoupledRunner::new(&j, &jp, 1, CPrimeMode::PointwiseDominated).expect("runner");
    let mut mc_ok = true;
    let mut mc_detail = String::new();
    let counts: Vec<u64> = (0..TINY_MC_REPLICAS)
        .into_par_iter()
        .map(|i| runner.cprime_size(&MarkField::new(1_000 + i)) as u64)
        .collect();
    for (v, p) in cprime_exact {
        let freq = counts.iter().filter(|c| **c == v).count() as f64 / TINY_MC_REPLICAS as f64;
        let se = (p * (1.0 - p) / TINY_MC_REPLICAS as f64).sqrt();
        if (freq - p).abs() >= 4.0 * se {
            mc_ok = false;
            mc_detail = format!("size {v}: freq {freq:.5} vs exact {p:.5}");
        }
    }
    let halo_counts: Vec<u64> = (0..TINY_MC_REPLICAS)
        .into_par_iter()
        .map(|i| {
            coupling::sample_halo_vertex_count(&runner.ctx, check.p, &MarkField::new(900_000 + i))
                as u64
        })
        .collect();
    for (v, p) in halo_exact {
        let freq =
            halo_counts.iter().filter(|c| **c == v).count() as f64 / TINY_MC_REPLICAS as f64;
        let se = (p * (1.0 - p) / TINY_MC_REPLICAS as f64).sqrt();
        if (freq - p).abs() >= 4.0 * se {
            mc_ok = false;
            mc_detail = format!("halo {v}: freq {freq:.5} vs exact {p:.5}");
        }
    }
    // Mean cluster size doubles as the susceptibility oracle (exactly 2).
    let susceptibility =
        montecarlo::estimate_susceptibility(&j, 1, TINY_MC_REPLICAS, 333).expect("susceptibility");
    let sus_ok = (susceptibility.estimate - 2.0).abs() < 4.0 * susceptibility.stderr;

    CriterionResult {
        id: 5,
        name: "exact domination (tiny)",
        passed: dominated && worst < EXACT_TOL && mc_ok && sus_ok,
        details: format!(
            "dominated={dominated}, max |enumeration - closed form| = {worst:.2e}, \
             susceptibility {:.4} +- {:.4}{}",
            susceptibility.estimate,
            susceptibility.stderr,
            if mc_detail.is_empty() {
                String::new()
            } else {
                format!(", MC deviation: {mc_detail}")
            }
        ),
    }
}

/// Criterion 6: the pseudo-critical scale separates at three combined
/// standard errors when the diagonal orbit is removed from a mixed kernel.
pub fn monotonicity_separation() -> CriterionResult {
    let j = Kernel::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), 0.25),
            (Displacement::new(vec![0, 1]), 0.25),
            (Displacement::new(vec![1, 1]), 0.15),
            (Displacement::new(vec![1, -1]), 0.15),
        ],
    )
    .expect("mixed kernel");
    let jp = j
        .with_override(Displacement::new(vec![1, 1]), 0.0)
        .expect("zeroed diagonal")
        .with_override(Displacement::new(vec![1, -1]), 0.0)
        .expect("zeroed diagonal");
    let report = match montecarlo::monotonicity_experiment(
        &j,
        &jp,
        &[SEPARATION_N],
        SEPARATION_REPLICAS,
        0.5,
        0.005,
        64.0,
        4242,
    ) {
        Ok(r) => r,
        Err(e) => {
            return CriterionResult {
                id: 6,
                name: "strict-monotonicity gap",
                passed: false,
                details: format!("experiment failed: {e}"),
            }
        }
    };
    let pt = &report.points[0];
    CriterionResult {
        id: 6,
        name: "strict-monotonicity gap",
        passed: pt.gap > 0.0 && pt.z_score >= SEPARATION_SIGMAS,
        details: format!(
            "s(J)={:.4}, s(J')={:.4}, gap={:.4} +- {:.4} (z={:.1})",
            pt.scale_base.location,
            pt.scale_perturbed.location,
            pt.gap,
            pt.combined_stderr,
            pt.z_score
        ),
    }
}

/// Criterion 7: subcritical decay. Negative slope with high R^2 on the
/// plane; slope within 0.05 of ln(1/2) on the line.
pub fn subcritical_decay() -> CriterionResult {
    let plane = nn2(0.35);
    let plane_fit =
        match montecarlo::estimate_decay(&plane, &[4, 8, 12, 16], DECAY_REPLICAS, 777) {
            Ok(f) => f,
            Err(e) => {
                return CriterionResult {
                    id: 7,
                    name: "subcritical decay",
                    passed: false,
                    details: format!("plane fit failed: {e}"),
                }
            }
        };
    let line = Kernel::table(1, vec![(Displacement::new(vec![1]), 0.5)]).expect("line kernel");
    let line_fit = match montecarlo::estimate_decay(&line, &[2, 4, 6, 8], DECAY_REPLICAS, 778) {
        Ok(f) => f,
        Err(e) => {
            return CriterionResult {
                id: 7,
                name: "subcritical decay",
                passed: false,
                details: format!("line fit failed: {e}"),
            }
        }
    };
    let line_err = (line_fit.slope - 0.5f64.ln()).abs();
    let passed = plane_fit.slope < 0.0
        && plane_fit.r_squared > DECAY_R2_MIN
        && line_err <= DECAY_LINE_SLOPE_TOL;
    CriterionResult {
        id: 7,
        name: "subcritical decay",
        passed,
        details: format!(
            "plane slope {:.4} (R2 {:.4}); line slope {:.4} vs ln(1/2) {:.4} (err {:.4})",
            plane_fit.slope,
            plane_fit.r_squared,
            line_fit.slope,
            0.5f64.ln(),
            line_err
        ),
    }
}

/// Criterion 8: the implied edge probability at the estimated critical
/// density sits inside the literature window 0.5 +- 0.02 for the square
/// lattice.
pub fn critical_density_sanity() -> CriterionResult {
    let phi = PhiFamily::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), 1.0),
            (Displacement::new(vec![0, 1]), 1.0),
        ],
    )
    .expect("phi family");
    let est = match montecarlo::bisect_beta_c(&phi, BETA_N, BETA_REPLICAS, 0.5, 0.01, 16.0, 999) {
        Ok(e) => e,
        Err(e) => {
            return CriterionResult {
                id: 8,
                name: "critical density sanity",
                passed: false,
                details: format!("bisection failed: {e}"),
            }
        }
    };
    let implied = -(-est.outcome.location).exp_m1();
    let err = (implied - 0.5).abs();
    CriterionResult {
        id: 8,
        name: "critical density sanity",
        passed: err <= BETA_EDGE_PROB_TOL,
        details: format!(
            "beta = {:.4}, implied edge probability {:.4} (|err| = {:.4}, window +-{BETA_EDGE_PROB_TOL})",
            est.outcome.location, implied, err
        ),
    }
}

/// Criterion 9: identical configs produce bit-identical output documents.
pub fn determinism() -> CriterionResult {
    let theta_config = r#"
command = "theta"
seed = 31
n = 8
replicas = 2000

[kernel]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.45 },
            { displacement = [0, 1], value = 0.45 } ]
"#;
    let couple_config = r#"
command = "couple"
seed = 7
n = 4
replicas = 50

[kernel]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.45 },
            { displacement = [0, 1], value = 0.45 } ]

[kernel_prime]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.3 },
            { displacement = [0, 1], value = 0.45 } ]
"#;
    let mut passed = true;
    let mut details = Vec::new();
    for (name, text) in [("theta", theta_config), ("couple", couple_config)] {
        let config = match cli::ExperimentConfig::from_toml(text) {
            Ok(c) => c,
            Err(e) => {
                return CriterionResult {
                    id: 9,
                    name: "determinism",
                    passed: false,
                    details: format!("config parse failed: {e}"),
                }
            }
        };
        let run = |c: &cli::ExperimentConfig| cli::run_command(c).map(|d| d.to_json_string());
        match (run(&config), run(&config)) {
            (Ok(a), Ok(b)) => {
                let same = a == b;
                passed &= same;
                details.push(format!("{name}: {}", if same { "identical" } else { "DIFFER" }));
            }
            (Err(e), _) | (_, Err(e)) => {
                passed = false;
                details.push(format!("{name}: run failed: {e}"));
            }
        }
    }
    CriterionResult {
        id: 9,
        name: "determinism",
        passed,
        details: details.join("; "),
    }
}

/// Run every criterion in order.
pub fn run_all() -> Vec<CriterionResult> {
    let rows = vec![
        exploration_matches_bfs(),
        lemma_checks(),
        containment_theorem(),
        q_exactness(),
        exact_domination_tiny(),
        monotonicity_separation(),
        subcritical_decay(),
        critical_density_sanity(),
        determinism(),
    ];
    for r in &rows {
        eprintln!("{}", r.line());
    }
    rows
}
