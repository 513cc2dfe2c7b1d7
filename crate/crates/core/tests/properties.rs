use maxode::expr::{parse, print, BinOp, Expr, Func};
use maxode::horizon::{existence_horizon, logistic_horizon, logistic_horizon_opt, quadratic_feasible, quadratic_search, ContractionData};
use maxode::picard::picard_operator;
use maxode::trajectory::{cumint, Grid, Trajectory};
use maxode::ProblemSpec;
use proptest::prelude::*;

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..1e6f64).prop_map(Expr::Constant),
        Just(Expr::Time),
        (1usize..5).prop_map(Expr::State),
        (1usize..4).prop_map(Expr::Max),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::negate),
            (0..Func::ALL.len(), inner.clone()).prop_map(|(i, e)| Expr::call(Func::ALL[i], e)),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn print_then_parse_is_identity(e in expr_strategy()) {
        let text = print(&e);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(print(&back), text);
    }

    #[test]
    fn cumint_is_exact_for_affine_samples(a in -10.0..10.0f64, b in -10.0..10.0f64, n in 1usize..200) {
        let h = 1.0 / n as f64;
        let v: Vec<f64> = (0..=n).map(|k| a + b * k as f64 * h).collect();
        let out = cumint(&v, h);
        for (k, got) in out.iter().enumerate() {
            let t = k as f64 * h;
            prop_assert!((got - (a * t + 0.5 * b * t * t)).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn picard_operator_fixes_initial_value(x0 in -2.0..2.0f64, y0 in -2.0..2.0f64, n in 1usize..100) {
        let spec = ProblemSpec::from_strings(&["x1 - m2", "sin(x2) - m1 * t"], &["x1^2", "abs(x2)"], vec![x0, y0], 1.0).unwrap();
        let grid = Grid::over(1.0, n).unwrap();
        let guess = Trajectory::from_rows(grid, (0..=n).map(|k| vec![k as f64, -(k as f64)]).collect()).unwrap();
        let out = picard_operator(&spec, &guess).unwrap();
        prop_assert_eq!(out.state(0), &[x0, y0][..]);
    }

    #[test]
    fn horizon_respects_every_branch(
        alpha in 0.01..10.0f64,
        t_ref in 0.01..10.0f64,
        m in 0.01..100.0f64,
        l_f in 0.0..50.0f64,
        l_g in 0.0..50.0f64,
        dim in 1usize..6,
    ) {
        let data = ContractionData { alpha, t_ref, m_bound: m, l_f, l_g, dim };
        let r = existence_horizon(&data).unwrap();
        prop_assert!(r.t_sup <= alpha / m * (1.0 + 1e-15));
        prop_assert!(r.t_sup <= t_ref);
        prop_assert!(r.t_rec < r.t_sup);
        prop_assert!(r.contraction_factor < 1.0);
    }

    #[test]
    fn logistic_optimum_dominates_grid(x0 in -5.0..5.0f64) {
        let opt = logistic_horizon_opt(x0);
        for k in 1..200 {
            let alpha = 1.0 + k as f64 * 0.05;
            prop_assert!(logistic_horizon(x0, alpha).unwrap() <= opt.t_star + 1e-15);
        }
    }

    #[test]
    fn searched_c0_is_feasible(x0 in 0.001..0.3f64, y0 in 0.001..0.3f64, t in 0.01..2.0f64) {
        if let Some(c0) = quadratic_search(x0, y0, t) {
            prop_assert!(quadratic_feasible(x0, y0, t, c0).feasible);
            prop_assert!(!quadratic_feasible(x0, y0, t, c0 * 0.99).feasible || c0 <= x0.max(y0) * 1.0001);
        }
    }
}
