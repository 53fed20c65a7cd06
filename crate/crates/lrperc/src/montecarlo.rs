//! Replica-parallel Monte Carlo estimators.
//!
//! Replica i always runs on the mark field seeded seed0 + i, so every
//! report is reproducible from its digest and independent of the worker
//! count: reductions are exact integer sums collected in replica order.
//! Bisections reuse the same replica seeds across evaluations; since a
//! pointwise-larger kernel can only grow each replica's cluster under the
//! shared marks, the estimated reach probability is monotone replica by
//! replica and the crossing search needs no fresh randomness per level.

use crate::error::{Error, Result};
use crate::lattice::{delta_of, Kernel, PhiFamily};
use crate::marks::{MarkField, GENERATOR_VERSION};
use crate::oracle::ReachSampler;
use rayon::prelude::*;
use serde::Serialize;

/// Identifies a replica range precisely enough to reproduce it.
#[derive(Clone, Debug, Serialize)]
pub struct RunDigest {
    pub kernel: Kernel,
    pub n: u32,
    pub seed_start: u64,
    pub replicas: u64,
    pub generator: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: u64,
    pub digest: RunDigest,
}

fn digest(kernel: &Kernel, n: u32, seed0: u64, replicas: u64) -> RunDigest {
    RunDigest {
        kernel: kernel.clone(),
        n,
        seed_start: seed0,
        replicas,
        generator: GENERATOR_VERSION,
    }
}

fn check_replicas(replicas: u64) -> Result<()> {
    if replicas < 1 {
        return Err(Error::Validation("replicas must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of replicas whose origin cluster reaches the region complement.
pub fn estimate_theta(kernel: &Kernel, n: u32, replicas: u64, seed0: u64) -> Result<EstimateReport> {
    check_replicas(replicas)?;
    let sampler = ReachSampler::new(kernel, n)?;
    let hits = theta_hits(&sampler, replicas, seed0);
    let p = hits as f64 / replicas as f64;
    let stderr = if replicas > 1 {
        (p * (1.0 - p) / (replicas - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(EstimateReport {
        estimate: p,
        stderr,
        replicas,
        digest: digest(kernel, n, seed0, replicas),
    })
}

fn theta_hits(sampler: &ReachSampler, replicas: u64, seed0: u64) -> u64 {
    (0..replicas)
        .into_par_iter()
        .filter(|i| sampler.reaches(&MarkField::new(seed0.wrapping_add(*i))))
        .count() as u64
}

/// Mean origin-cluster size within the region.
pub fn estimate_susceptibility(
    kernel: &Kernel,
    n: u32,
    replicas: u64,
    seed0: u64,
) -> Result<EstimateReport> {
    check_replicas(replicas)?;
    let sampler = ReachSampler::new(kernel, n)?;
    let (sum, sum_sq) = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let s = sampler.cluster_size(&MarkField::new(seed0.wrapping_add(i))) as u64;
            (s, s * s)
        })
        .reduce(|| (0u64, 0u64), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = replicas as f64;
    let mean = sum as f64 / nf;
    let stderr = if replicas > 1 {
        let var = (sum_sq as f64 - nf * mean * mean) / (nf - 1.0);
        (var.max(0.0) / nf).sqrt()
    } else {
        0.0
    };
    Ok(EstimateReport {
        estimate: mean,
        stderr,
        replicas,
        digest: digest(kernel, n, seed0, replicas),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayPoint {
    pub n: u32,
    pub theta: f64,
    pub stderr: f64,
    pub log_theta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    /// Least-squares slope of log theta against n (minus the decay rate).
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<DecayPoint>,
    /// Radii whose estimate came out exactly zero and were dropped.
    pub dropped: Vec<u32>,
    pub replicas: u64,
    pub seed_start: u64,
    pub generator: &'static str,
}

/// Fit log theta_n ~ slope * n + intercept over the given radii. Radii with
/// zero hits are dropped; fewer than three usable points is an error.
pub fn estimate_decay(
    kernel: &Kernel,
    n_list: &[u32],
    replicas: u64,
    seed0: u64,
) -> Result<DecayFit> {
    check_replicas(replicas)?;
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for (idx, &n) in n_list.iter().enumerate() {
        let sampler = ReachSampler::new(kernel, n)?;
        let offset = seed0.wrapping_add(idx as u64 * replicas);
        let hits = theta_hits(&sampler, replicas, offset);
        if hits == 0 {
            eprintln!("estimate_decay: theta at n={n} is zero over {replicas} replicas; dropping");
            dropped.push(n);
            continue;
        }
        let p = hits as f64 / replicas as f64;
        let stderr = (p * (1.0 - p) / (replicas.max(2) - 1) as f64).sqrt();
        points.push(DecayPoint {
            n,
            theta: p,
            stderr,
            log_theta: p.ln(),
        });
    }
    if points.len() < 3 {
        return Err(Error::Fit {
            usable: points.len(),
        });
    }
    let (slope, intercept, r_squared) = linear_fit(
        &points.iter().map(|p| p.n as f64).collect::<Vec<_>>(),
        &points.iter().map(|p| p.log_theta).collect::<Vec<_>>(),
    );
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
        points,
        dropped,
        replicas,
        seed_start: seed0,
        generator: GENERATOR_VERSION,
    })
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r_squared)
}

#[derive(Clone, Debug, Serialize)]
pub struct BisectOutcome {
    /// Midpoint of the final bracket.
    pub location: f64,
    pub bracket: (f64, f64),
    pub theta_at_bracket: (f64, f64),
    pub evaluations: u32,
    /// Standard error of the crossing location: binomial noise divided by
    /// the local slope, combined with the bracket width.
    pub location_stderr: f64,
}

/// Monotone bisection of theta-hat against a target level, evaluating on a
/// fixed replica seed range each time.
fn bisect_crossing(
    mut theta_at: impl FnMut(f64) -> Result<f64>,
    target: f64,
    tol: f64,
    hi_max: f64,
    replicas: u64,
) -> Result<BisectOutcome> {
    if !(0.0 < target && target < 1.0) {
        return Err(Error::Validation(format!(
            "target must lie in (0,1), got {target}"
        )));
    }
    if tol <= 0.0 {
        return Err(Error::Validation(format!("tol must be positive, got {tol}")));
    }
    let mut evaluations = 0u32;
    let mut lo = 0.0f64;
    let mut theta_lo = 0.0f64;
    let mut hi = 1.0f64.min(hi_max);
    let mut theta_hi;
    loop {
        theta_hi = theta_at(hi)?;
        evaluations += 1;
        if theta_hi >= target {
            break;
        }
        if hi >= hi_max {
            return Err(Error::Bracketing(format!(
                "theta stayed at {theta_hi:.4} < {target} up to {hi}"
            )));
        }
        lo = hi;
        theta_lo = theta_hi;
        hi = (hi * 2.0).min(hi_max);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let theta_mid = theta_at(mid)?;
        evaluations += 1;
        if theta_mid >= target {
            hi = mid;
            theta_hi = theta_mid;
        } else {
            lo = mid;
            theta_lo = theta_mid;
        }
    }
    let width = hi - lo;
    let slope = if width > 0.0 && theta_hi > theta_lo {
        (theta_hi - theta_lo) / width
    } else {
        // Flat or degenerate bracket: fall back to a unit slope so the
        // binomial term still contributes.
        1.0
    };
    let binom = (0.25 / replicas as f64).sqrt() / slope;
    let location_stderr = (binom * binom + width * width / 12.0).sqrt();
    Ok(BisectOutcome {
        location: 0.5 * (lo + hi),
        bracket: (lo, hi),
        theta_at_bracket: (theta_lo, theta_hi),
        evaluations,
        location_stderr,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaEstimate {
    pub outcome: BisectOutcome,
    pub n: u32,
    pub replicas: u64,
    pub theta_target: f64,
    pub tol: f64,
    pub seed_start: u64,
    pub generator: &'static str,
}

/// Pseudo-critical edge density: the smallest beta at which the estimated
/// boundary-reach probability crosses the target level.
pub fn bisect_beta_c(
    phi: &PhiFamily,
    n: u32,
    replicas: u64,
    theta_target: f64,
    tol: f64,
    beta_max: f64,
    seed0: u64,
) -> Result<BetaEstimate> {
    check_replicas(replicas)?;
    if beta_max <= 0.0 {
        return Err(Error::Validation("beta_max must be positive".into()));
    }
    // Geometry from a positive reference density; every beta > 0 shares the
    // same support and beta = 0 is the empty kernel.
    let base = ReachSampler::new(&phi.kernel_at(1.0)?, n)?;
    let outcome = bisect_crossing(
        |beta| {
            let sampler = base.revalued(&phi.kernel_at(beta)?)?;
            Ok(theta_hits(&sampler, replicas, seed0) as f64 / replicas as f64)
        },
        theta_target,
        tol,
        beta_max,
        replicas,
    )?;
    Ok(BetaEstimate {
        outcome,
        n,
        replicas,
        theta_target,
        tol,
        seed_start: seed0,
        generator: GENERATOR_VERSION,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationPoint {
    pub n: u32,
    pub scale_base: BisectOutcome,
    pub scale_perturbed: BisectOutcome,
    pub gap: f64,
    pub combined_stderr: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub points: Vec<SeparationPoint>,
    pub replicas: u64,
    pub theta_target: f64,
    pub tol: f64,
    pub seed_start: u64,
    pub generator: &'static str,
}

/// Pseudo-critical scale of s |-> theta-hat(min(1, s K)), by bisection on a
/// shared replica seed range.
pub fn bisect_scale(
    kernel: &Kernel,
    n: u32,
    replicas: u64,
    theta_target: f64,
    tol: f64,
    scale_max: f64,
    seed0: u64,
) -> Result<BisectOutcome> {
    check_replicas(replicas)?;
    let base = ReachSampler::new(kernel, n)?;
    bisect_crossing(
        |s| {
            let sampler = base.revalued(&kernel.scale_capped_table(s)?)?;
            Ok(theta_hits(&sampler, replicas, seed0) as f64 / replicas as f64)
        },
        theta_target,
        tol,
        scale_max,
        replicas,
    )
}

/// Strict-monotonicity experiment: pseudo-critical scales of the base and
/// perturbed kernels per radius, with the separation and its combined
/// standard error.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_experiment(
    j: &Kernel,
    jp: &Kernel,
    n_list: &[u32],
    replicas: u64,
    theta_target: f64,
    tol: f64,
    scale_max: f64,
    seed0: u64,
) -> Result<SeparationReport> {
    check_replicas(replicas)?;
    // Rejects equal kernels (EmptyDelta) and disordered pairs up front.
    let _ = delta_of(j, jp)?;
    let mut points = Vec::new();
    for &n in n_list {
        let scale_base = bisect_scale(j, n, replicas, theta_target, tol, scale_max, seed0)?;
        let scale_perturbed = bisect_scale(jp, n, replicas, theta_target, tol, scale_max, seed0)?;
        let gap = scale_perturbed.location - scale_base.location;
        let combined_stderr = (scale_base.location_stderr.powi(2)
            + scale_perturbed.location_stderr.powi(2))
        .sqrt();
        points.push(SeparationPoint {
            n,
            gap,
            combined_stderr,
            z_score: gap / combined_stderr,
            scale_base,
            scale_perturbed,
        });
    }
    Ok(SeparationReport {
        points,
        replicas,
        theta_target,
        tol,
        seed_start: seed0,
        generator: GENERATOR_VERSION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Displacement;

    fn disp(coords: &[i32]) -> Displacement {
        Displacement::new(coords.to_vec())
    }

    fn nn(d: usize, p: f64) -> Kernel {
        let mut entries = Vec::new();
        for axis in 0..d {
            let mut c = vec![0; d];
            c[axis] = 1;
            entries.push((Displacement::new(c), p));
        }
        Kernel::table(d, entries).unwrap()
    }

    #[test]
    fn theta_degenerate_kernels() {
        let zero = nn(1, 0.0);
        let r = estimate_theta(&zero, 3, 100, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.stderr, 0.0);

        let one = nn(2, 1.0);
        let r = estimate_theta(&one, 3, 100, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn theta_matches_closed_form_on_the_line() {
        // One-sided escape needs n+1 consecutive open edges; two-sided
        // probability is 1 - (1 - rho^{n+1})^2.
        let k = nn(1, 0.5);
        let n = 3u32;
        let exact = 1.0 - (1.0 - 0.5f64.powi(n as i32 + 1)).powi(2);
        let r = estimate_theta(&k, n, 200_000, 7).unwrap();
        assert!(
            (r.estimate - exact).abs() < 4.0 * r.stderr.max(1e-4),
            "estimate {} vs exact {exact}",
            r.estimate
        );
    }

    #[test]
    fn theta_near_criticality_is_nondegenerate() {
        // At the square-lattice bond threshold the finite-volume reach
        // probability stays away from both 0 and 1.
        let k = nn(2, 0.5);
        let r = estimate_theta(&k, 32, 10_000, 42).unwrap();
        assert!(
            r.estimate > 0.1 && r.estimate < 0.9,
            "theta_32(0.5) = {}",
            r.estimate
        );
    }

    #[test]
    fn susceptibility_degenerate_and_exact() {
        let zero = nn(2, 0.0);
        let r = estimate_susceptibility(&zero, 4, 50, 3).unwrap();
        assert_eq!(r.estimate, 1.0);

        // Z^1 radius 1 at one half: mean cluster size is exactly 2.
        let k = nn(1, 0.5);
        let r = estimate_susceptibility(&k, 1, 100_000, 11).unwrap();
        assert!((r.estimate - 2.0).abs() < 4.0 * r.stderr, "{}", r.estimate);
    }

    #[test]
    fn susceptibility_monotone_in_radius() {
        let k = nn(1, 0.6);
        let mut last = 0.0;
        for n in 1..5u32 {
            let r = estimate_susceptibility(&k, n, 20_000, 5).unwrap();
            assert!(r.estimate >= last - 3.0 * r.stderr);
            last = r.estimate;
        }
    }

    #[test]
    fn theta_on_an_infinite_support_kernel() {
        // The polynomial family exercises the windowed boundary
        // probabilities and the all-pairs edge enumeration.
        let k = Kernel::polynomial_phi(1, 0.5, 3.0).unwrap();
        let r = estimate_theta(&k, 2, 4000, 3).unwrap();
        assert!(r.estimate > 0.05 && r.estimate < 0.95, "{}", r.estimate);
        // Monotone in beta under shared marks.
        let k_hi = Kernel::polynomial_phi(1, 1.0, 3.0).unwrap();
        let r_hi = estimate_theta(&k_hi, 2, 4000, 3).unwrap();
        assert!(r_hi.estimate >= r.estimate);
    }

    #[test]
    fn reach_is_pathwise_monotone_in_the_kernel() {
        let lo = nn(2, 0.3);
        let hi = nn(2, 0.5);
        let s_lo = ReachSampler::new(&lo, 6).unwrap();
        let s_hi = ReachSampler::new(&hi, 6).unwrap();
        for seed in 0..2000 {
            let f = MarkField::new(seed);
            if s_lo.reaches(&f) {
                assert!(s_hi.reaches(&f), "monotonicity broken at seed {seed}");
            }
        }
    }

    #[test]
    fn decay_error_paths() {
        let zero = nn(1, 0.0);
        assert!(matches!(
            estimate_decay(&zero, &[2, 4, 6, 8], 100, 1),
            Err(Error::Fit { .. })
        ));
        let k = nn(1, 0.5);
        assert!(matches!(
            estimate_decay(&k, &[1, 2], 100, 1),
            Err(Error::Fit { usable: 2 })
        ));
    }

    #[test]
    fn decay_slope_on_the_line() {
        let k = nn(1, 0.5);
        let fit = estimate_decay(&k, &[2, 4, 6, 8], 50_000, 17).unwrap();
        assert!(fit.slope < 0.0);
        assert!(fit.r_squared > 0.99, "r2 = {}", fit.r_squared);
        assert!(
            (fit.slope - 0.5f64.ln()).abs() < 0.08,
            "slope = {}",
            fit.slope
        );
    }

    #[test]
    fn bisect_beta_error_paths() {
        let empty = PhiFamily::table(2, Vec::new()).unwrap();
        assert!(matches!(
            bisect_beta_c(&empty, 4, 100, 0.5, 0.01, 8.0, 1),
            Err(Error::Bracketing(_))
        ));
    }

    #[test]
    fn bisect_beta_wide_tol_returns_bracket_midpoint() {
        let phi = PhiFamily::table(1, vec![(disp(&[1]), 1.0)]).unwrap();
        let est = bisect_beta_c(&phi, 2, 500, 0.5, 100.0, 100.0, 1).unwrap();
        let (lo, hi) = est.outcome.bracket;
        assert!((est.outcome.location - 0.5 * (lo + hi)).abs() < 1e-12);
        assert!(hi - lo <= 100.0);
    }

    #[test]
    fn bisect_beta_line_sanity() {
        // On the radius-2 line, theta(beta) = 1 - (1 - J^3)^2 with
        // J = 1 - e^-beta; crossing 0.5 means J^3 = 1 - sqrt(0.5).
        let phi = PhiFamily::table(1, vec![(disp(&[1]), 1.0)]).unwrap();
        let est = bisect_beta_c(&phi, 2, 40_000, 0.5, 0.005, 16.0, 23).unwrap();
        let j_cross = (1.0 - 0.5f64.sqrt()).powf(1.0 / 3.0);
        let beta_exact = -(1.0 - j_cross).ln();
        assert!(
            (est.outcome.location - beta_exact).abs()
                < 4.0 * est.outcome.location_stderr + est.tol,
            "beta {} vs exact {beta_exact}",
            est.outcome.location
        );
    }

    #[test]
    fn monotonicity_rejects_equal_kernels() {
        let k = nn(2, 0.4);
        assert!(matches!(
            monotonicity_experiment(&k, &k.clone(), &[4], 100, 0.5, 0.05, 16.0, 1),
            Err(Error::EmptyDelta)
        ));
    }

    #[test]
    fn monotonicity_small_scale_gap_positive() {
        // Removing the vertical orbit inside Z^2 leaves a line, which needs
        // a much larger scale to reach the boundary.
        let j = nn(2, 0.4);
        let jp = j.with_override(disp(&[0, 1]), 0.0).unwrap();
        let report = monotonicity_experiment(&j, &jp, &[8], 4000, 0.5, 0.02, 64.0, 31).unwrap();
        let pt = &report.points[0];
        assert!(pt.gap > 0.0, "gap = {}", pt.gap);
        assert!(pt.z_score > 3.0, "z = {}", pt.z_score);
    }
}
