//! Seeded property suites comparing every closed form and dual objective with
//! an independent oracle. Output is a byte-deterministic log and CSV.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{Ball, BallKind, ReferenceDistribution};
use crate::dual::{grad_duals, g_dr, g_l2, DualPoint, DualPointDR, DualPointL2};
use crate::error::Result;
use crate::patrol::{mean_hitting_time, mean_hitting_time_gradient, Graph, ReversibleChainParam};
use crate::patrol::build_transition_matrix;
use crate::risk::{cvar_hat, cvar_nonstrict, f_beta_at_var, mean_std_objective, worst_c_average, CostVector, ProbabilityLevel};
use crate::sampling::{dirichlet, random_reference, seeded, uniform_costs, SeededRng};
use crate::solver::{minimize_duals, relative_error};
use crate::worst_case::{oracle_worst_expectation, worst_expectation_dr, worst_expectation_l2};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Reduced instance counts.
    pub quick: bool,
    /// Harness self-test: perturbs analytic gradients so the gradient check fails.
    pub corrupt_gradient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn first_failure(&self) -> Option<&PropertyResult> {
        self.results.iter().find(|r| !r.passed)
    }

    pub fn log(&self) -> String {
        let mut out = format!("verify seed={}\n", self.seed);
        for r in &self.results {
            let _ = writeln!(
                out,
                "[{}] {}: instances={} max_error={:.6e} tolerance={:.1e}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.instances,
                r.max_error,
                r.tolerance
            );
        }
        let _ = writeln!(out, "{}", if self.passed() { "all properties passed" } else { "verification FAILED" });
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("property,instances,max_error,tolerance,passed\n");
        for r in &self.results {
            let _ = writeln!(out, "{},{},{:.6e},{:.1e},{}", r.name, r.instances, r.max_error, r.tolerance, r.passed);
        }
        out
    }
}

struct Tracker {
    name: &'static str,
    tolerance: f64,
    instances: usize,
    max_error: f64,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, instances: 0, max_error: 0.0 }
    }

    /// Records one instance; NaN errors count as failures.
    fn record(&mut self, error: f64) {
        self.instances += 1;
        self.max_error = if error.is_nan() { f64::INFINITY } else { self.max_error.max(error) };
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            name: self.name.to_string(),
            instances: self.instances,
            max_error: self.max_error,
            tolerance: self.tolerance,
            passed: self.instances > 0 && self.max_error <= self.tolerance,
        }
    }
}

const RADII: [f64; 3] = [0.3, 0.7, 1.5];

fn instance(rng: &mut SeededRng, k: usize) -> (CostVector<f64>, ReferenceDistribution<f64>, f64) {
    let m = 3 + k % 6;
    let costs = CostVector::new(uniform_costs(rng, m, 0.0, 10.0)).expect("finite costs");
    let q = if k.is_multiple_of(2) { ReferenceDistribution::uniform(m).expect("m > 0") } else { random_reference(rng, m) };
    (costs, q, RADII[k % 3])
}

/// Runs every suite and collects one result per property.
pub fn run_verification(options: &VerifyOptions) -> Result<VerifyReport> {
    let scale = if options.quick { 5 } else { 1 };
    let mut rng = seeded(options.seed);
    let mut results = Vec::new();

    let duality_n = 50 / scale;
    let mut dr = Tracker::new("strong duality dr", 1e-9);
    let mut l2 = Tracker::new("strong duality l2", 1e-4);
    for k in 0..duality_n {
        let (j, q, c) = instance(&mut rng, k);
        let (v, _) = minimize_duals(&j, &q, BallKind::DensityRatio, c)?;
        let o = oracle_worst_expectation(&j, &Ball::new(BallKind::DensityRatio, c, q.clone())?, &mut rng)?;
        dr.record((v - o).abs());
        let (v, _) = minimize_duals(&j, &q, BallKind::WeightedL2, c)?;
        let o = oracle_worst_expectation(&j, &Ball::new(BallKind::WeightedL2, c, q)?, &mut rng)?;
        l2.record((v - o).abs());
    }
    results.push(dr.finish());
    results.push(l2.finish());

    let mut cvar = Tracker::new("cvar equivalence", 1e-9);
    for k in 0..500 / scale {
        let (j, q, _) = instance(&mut rng, k);
        let c = rng.random_range(0.05..5.0);
        let beta = ProbabilityLevel::from_radius(c)?;
        let w = worst_expectation_dr(&j, &q, c)?.value;
        let f = f_beta_at_var(&j, &q, beta)?;
        let lo = cvar_nonstrict(&j, &q, beta)?;
        let hi = cvar_hat(&j, &q, beta)?;
        let outside = (lo - w).max(w - hi).max(0.0);
        cvar.record((w - f).abs().max(outside));
    }
    results.push(cvar.finish());

    let mut worst_c = Tracker::new("worst-c equivalence", 1e-9);
    for &m in &[4usize, 6, 8, 10] {
        let q = ReferenceDistribution::uniform(m)?;
        for _ in 0..100 / scale {
            let j = CostVector::new(uniform_costs(&mut rng, m, 0.0, 10.0))?;
            for count in 1..m {
                let c = m as f64 / count as f64 - 1.0;
                worst_c.record((worst_expectation_dr(&j, &q, c)?.value - worst_c_average(&j, count)?).abs());
            }
        }
    }
    results.push(worst_c.finish());

    let mut mean_std = Tracker::new("mean-std closed form", 1e-6);
    for k in 0..200 / scale {
        let (j, q, c) = instance(&mut rng, k);
        let w = worst_expectation_l2(&j, &q, c)?;
        if w.closed_form {
            mean_std.record((w.value - mean_std_objective(&j, &q, c)?).abs());
        }
    }
    results.push(mean_std.finish());

    let mut inclusion = Tracker::new("ball inclusion", 0.0);
    for m in [2usize, 3, 5, 8] {
        let q = random_reference::<f64, _>(&mut rng, m);
        for c in [0.1, 0.5, 1.0, 2.0] {
            let balls = [BallKind::WeightedL2, BallKind::DensityRatio, BallKind::TotalVariation]
                .map(|k| Ball::new(k, c, q.clone()).expect("valid ball"));
            for _ in 0..1000 / scale {
                let p = dirichlet::<f64, _>(&mut rng, m);
                let [l2_in, dr_in, tv_in] = [0, 1, 2].map(|i| balls[i].contains(&p).expect("same length"));
                let violated = (l2_in && !tv_in) || (c >= 1.0 && dr_in && !(l2_in && tv_in));
                inclusion.record(if violated { 1.0 } else { 0.0 });
            }
        }
    }
    results.push(inclusion.finish());

    results.push(gradient_suite(&mut rng, 100 / scale, options.corrupt_gradient)?);
    Ok(VerifyReport { seed: options.seed, results })
}

fn central(mut f: impl FnMut(f64) -> Result<f64>, x: f64) -> Result<f64> {
    const H: f64 = 1e-6;
    Ok((f(x + H)? - f(x - H)?) / (2.0 * H))
}

fn gradient_suite(rng: &mut SeededRng, points: usize, corrupt: bool) -> Result<PropertyResult> {
    let mut t = Tracker::new("gradient check", 1e-5);
    let bend = |v: Vec<f64>| if corrupt { v.into_iter().map(|g| g * 1.01 + 1e-3).collect() } else { v };
    for _ in 0..points {
        let m = rng.random_range(3..9);
        let j: Vec<f64> = uniform_costs(rng, m, 0.0, 10.0);
        let q = ReferenceDistribution::uniform(m)?;
        let c = rng.random_range(0.2..2.0);
        let (lambda, nu) = (rng.random_range(0.5..5.0), rng.random_range(0.0..10.0));
        let costs = CostVector::new(j.clone())?;
        let dual = DualPoint::WeightedL2(DualPointL2 { lambda, nu });
        let analytic = bend(grad_duals(&costs, &q, c, &dual)?.multipliers);
        let numeric = vec![
            central(|x| g_l2(&costs, &q, c, &DualPointL2 { lambda: x, nu }), lambda)?,
            central(|x| g_l2(&costs, &q, c, &DualPointL2 { lambda, nu: x }), nu)?,
        ];
        t.record(relative_error(&analytic, &numeric));

        let lambdas: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..5.0)).collect();
        let dual = DualPoint::DensityRatio(DualPointDR { lambdas: lambdas.clone(), nu });
        let analytic = bend(grad_duals(&costs, &q, c, &dual)?.multipliers);
        let mut numeric = Vec::with_capacity(m + 1);
        for i in 0..m {
            numeric.push(central(
                |x| {
                    let mut l = lambdas.clone();
                    l[i] = x;
                    g_dr(&costs, &q, c, &DualPointDR { lambdas: l, nu })
                },
                lambdas[i],
            )?);
        }
        numeric.push(central(|x| g_dr(&costs, &q, c, &DualPointDR { lambdas: lambdas.clone(), nu: x }), nu)?);
        t.record(relative_error(&analytic, &numeric));
    }

    let graph = Graph::random_connected(6, 0.3, rng.random())?;
    let max_deg = graph.degrees().into_iter().max().unwrap_or(1) as f64;
    for _ in 0..points {
        let w: Vec<f64> = graph.edges().iter().map(|_| rng.random_range(0.05..1.0) / (max_deg + 0.5)).collect();
        let param = ReversibleChainParam::new(&graph, w.clone())?;
        let goal = rng.random_range(0..graph.nodes());
        let analytic = bend(mean_hitting_time_gradient(&graph, &param, goal)?);
        let mut numeric = Vec::with_capacity(w.len());
        for e in 0..w.len() {
            numeric.push(central(
                |x| {
                    let mut v = w.clone();
                    v[e] = x;
                    let p = build_transition_matrix(&graph, &ReversibleChainParam { edge_weights: v })?;
                    mean_hitting_time(&graph, &p, goal)
                },
                w[e],
            )?);
        }
        t.record(relative_error(&analytic, &numeric));
    }
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_run_passes_and_is_deterministic() {
        let opts = VerifyOptions { seed: 7, quick: true, corrupt_gradient: false };
        let a = run_verification(&opts).unwrap();
        assert!(a.passed(), "{}", a.log());
        let b = run_verification(&opts).unwrap();
        assert_eq!(a.log(), b.log());
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let r = run_verification(&VerifyOptions { seed: 7, quick: true, corrupt_gradient: true }).unwrap();
        assert_eq!(r.first_failure().unwrap().name, "gradient check");
    }
}
