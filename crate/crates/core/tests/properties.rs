use ddro_core::distribution::{Ball, BallKind, DiscreteDistribution, ReferenceDistribution};
use ddro_core::dual::{g_dr, g_l2, DualPointDR, DualPointL2};
use ddro_core::patrol::{mean_hitting_time, build_transition_matrix, Graph, HittingTimeCost, ReversibleChainParam, MAX_ROW_SUM, MIN_WEIGHT};
use ddro_core::risk::{cvar_hat, cvar_nonstrict, CostVector, ProbabilityLevel};
use ddro_core::solver::{minimize_duals, pareto_sweep, solve_ddro, solve_soc, QuadraticModel, SolverConfig};
use ddro_core::worst_case::worst_expectation;
use ddro_core::CostModel;
use proptest::prelude::*;

const KINDS: [BallKind; 3] = [BallKind::WeightedL2, BallKind::DensityRatio, BallKind::TotalVariation];

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05..1.0f64, m).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

/// Costs, reference and a second distribution on the same support.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..9).prop_flat_map(|m| (prop::collection::vec(-5.0..20.0f64, m), simplex(m), simplex(m)))
}

fn reference(q: &[f64]) -> ReferenceDistribution<f64> {
    ReferenceDistribution::new(q.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn balls_nest((_, q, p) in instance(), c in 0.01..6.0f64) {
        let p = DiscreteDistribution::new(p).unwrap();
        let [l2, dr, tv] = KINDS.map(|k| Ball::new(k, c, reference(&q)).unwrap().contains(&p).unwrap());
        prop_assert!(!l2 || tv);
        if c >= 1.0 {
            prop_assert!(!dr || (l2 && tv));
        }
    }

    #[test]
    fn worst_case_is_attained_and_bounded((j, q, _) in instance(), c in 0.01..4.0f64) {
        let costs = CostVector::new(j.clone()).unwrap();
        let r = reference(&q);
        let mean: f64 = j.iter().zip(&q).map(|(a, b)| a * b).sum();
        let max = j.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for kind in KINDS {
            let ball = Ball::new(kind, c, r.clone()).unwrap();
            let w = worst_expectation(&costs, &ball).unwrap();
            prop_assert!(w.value >= mean - 1e-9 && w.value <= max + 1e-9, "{kind:?} {} not in [{mean}, {max}]", w.value);
            if let Some(p) = &w.distribution {
                prop_assert!(ball.contains(p).unwrap(), "{kind:?} maximizer outside the ball");
                let attained: f64 = p.mass().iter().zip(&j).map(|(a, b)| a * b).sum();
                prop_assert!((attained - w.value).abs() <= 1e-9 * (1.0 + w.value.abs()));
            }
        }
    }

    #[test]
    fn worst_case_grows_with_radius((j, q, _) in instance(), c in 0.01..3.0f64, dc in 0.0..2.0f64) {
        let costs = CostVector::new(j).unwrap();
        for kind in KINDS {
            let small = worst_expectation(&costs, &Ball::new(kind, c, reference(&q)).unwrap()).unwrap().value;
            let large = worst_expectation(&costs, &Ball::new(kind, c + dc, reference(&q)).unwrap()).unwrap().value;
            prop_assert!(large >= small - 1e-9, "{kind:?}: {large} < {small}");
        }
    }

    #[test]
    fn every_dual_point_bounds_the_worst_case(
        (j, q, _) in instance(),
        c in 0.05..3.0f64,
        lambda in 0.01..20.0f64,
        nu in -10.0..30.0f64,
        scale in prop::collection::vec(0.05..10.0f64, 8),
    ) {
        let costs = CostVector::new(j.clone()).unwrap();
        let r = reference(&q);
        let worst = |kind| worst_expectation(&costs, &Ball::new(kind, c, r.clone()).unwrap()).unwrap().value;
        let l2 = g_l2(&costs, &r, c, &DualPointL2 { lambda, nu }).unwrap();
        prop_assert!(l2 >= worst(BallKind::WeightedL2) - 1e-9);
        // Multipliers near the cost gaps keep the exponent inside the guard.
        let lambdas: Vec<f64> = j.iter().zip(&scale).map(|(&a, &s)| ((a - nu).abs() + 1.0) * s).collect();
        let dr = g_dr(&costs, &r, c, &DualPointDR { lambdas, nu }).unwrap();
        prop_assert!(dr >= worst(BallKind::DensityRatio) - 1e-9);
    }

    #[test]
    fn dual_minimum_matches_worst_case((j, q, _) in instance(), c in 0.05..3.0f64) {
        let costs = CostVector::new(j).unwrap();
        let r = reference(&q);
        for (kind, tol) in [(BallKind::WeightedL2, 1e-5), (BallKind::DensityRatio, 1e-9)] {
            let (inf, _) = minimize_duals(&costs, &r, kind, c).unwrap();
            let w = worst_expectation(&costs, &Ball::new(kind, c, r.clone()).unwrap()).unwrap().value;
            prop_assert!((inf - w).abs() <= tol * (1.0 + w.abs()), "{kind:?}: {inf} vs {w}");
        }
    }

    #[test]
    fn density_ratio_worst_case_is_sandwiched((j, q, _) in instance(), beta in 0.0..0.95f64) {
        let costs = CostVector::new(j).unwrap();
        let r = reference(&q);
        let level = ProbabilityLevel::new(beta).unwrap();
        let c = level.to_radius();
        prop_assume!(c > 0.0);
        let w = worst_expectation(&costs, &Ball::new(BallKind::DensityRatio, c, r.clone()).unwrap()).unwrap().value;
        prop_assert!(w >= cvar_nonstrict(&costs, &r, level).unwrap() - 1e-9);
        prop_assert!(w <= cvar_hat(&costs, &r, level).unwrap() + 1e-9);
    }

    #[test]
    fn patrol_projection_is_feasible_and_idempotent(
        n in 3usize..9,
        extra in 0.0..0.6f64,
        seed in 0u64..1000,
        raw in prop::collection::vec(-0.5..1.5f64, 40),
    ) {
        let graph = Graph::random_connected(n, extra, seed).unwrap();
        let model = HittingTimeCost::new(graph.clone()).unwrap();
        let x: Vec<f64> = raw.iter().cycle().take(graph.edges().len()).copied().collect();
        let p = CostModel::<f64>::project(&model, &x);
        prop_assert!(p.iter().all(|&v| v >= MIN_WEIGHT));
        for node in 0..n {
            let sum: f64 = graph.edges().iter().zip(&p).filter(|((a, b), _)| *a == node || *b == node).map(|(_, w)| w).sum();
            prop_assert!(sum <= MAX_ROW_SUM, "row {node} sums to {sum}");
        }
        prop_assert_eq!(CostModel::<f64>::project(&model, &p), p);
    }

    #[test]
    fn hitting_times_need_a_step_from_every_other_start(
        n in 2usize..9,
        extra in 0.0..0.6f64,
        seed in 0u64..1000,
        frac in prop::collection::vec(0.05..1.0f64, 40),
    ) {
        let graph = Graph::random_connected(n, extra, seed).unwrap();
        let max_deg = graph.degrees().into_iter().max().unwrap() as f64;
        let w: Vec<f64> = frac.iter().cycle().take(graph.edges().len()).map(|f| f / (max_deg + 0.5)).collect();
        let p = build_transition_matrix(&graph, &ReversibleChainParam::new(&graph, w).unwrap()).unwrap();
        for goal in 0..n {
            let j = mean_hitting_time(&graph, &p, goal).unwrap();
            // Averaged over uniform starts: (n - 1) starts need at least one step.
            prop_assert!(j >= (n as f64 - 1.0) / n as f64 - 1e-12, "goal {goal}: {j}");
        }
    }
}

fn toy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..7).prop_flat_map(|m| prop::collection::vec(prop::collection::vec(-4.0..4.0f64, 1..3), m)).prop_map(|pts| {
        let d = pts[0].len();
        pts.into_iter().map(|mut p| {
            p.resize(d, 0.0);
            p
        }).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn robust_design_beats_baseline_on_its_own_ball(anchors in toy(), c in 0.1..3.0f64) {
        let m = anchors.len();
        let model = QuadraticModel::new(anchors, -10.0, 10.0).unwrap();
        let r = ReferenceDistribution::uniform(m).unwrap();
        let cfg = SolverConfig::default();
        let soc = solve_soc(&model, &r, &cfg).unwrap();
        for kind in [BallKind::WeightedL2, BallKind::DensityRatio] {
            let ddro = solve_ddro(&model, &r, kind, c, &cfg).unwrap();
            let ball = Ball::new(kind, c, r.clone()).unwrap();
            let at_soc = worst_expectation(&CostVector::new(soc.costs.clone()).unwrap(), &ball).unwrap().value;
            prop_assert!(ddro.objective <= at_soc + 1e-6, "{kind:?}: {} > {at_soc}", ddro.objective);
        }
    }

    #[test]
    fn l2_sweep_trades_mean_for_spread(anchors in toy()) {
        let m = anchors.len();
        let model = QuadraticModel::new(anchors, -10.0, 10.0).unwrap();
        let r = ReferenceDistribution::uniform(m).unwrap();
        let points = pareto_sweep(&model, &r, &[1e-6, 0.25, 0.5, 1.0], &SolverConfig::default()).unwrap();
        // The trade-off follows from the mean-std form, so only pairs where it applies are compared.
        for w in points.windows(2).filter(|w| w.iter().all(|p| p.smooth_conditions == Some(true))) {
            let (a, b) = (&w[0], &w[1]);
            prop_assert!(b.mean.unwrap() >= a.mean.unwrap() - 1e-6, "mean {:?} -> {:?}", a.mean, b.mean);
            prop_assert!(b.std.unwrap() <= a.std.unwrap() + 1e-6, "std {:?} -> {:?}", a.std, b.std);
        }
    }
}
