//! Convergence orders of the direct integrators and agreement between the
//! specialized schemes and the general Picard operator.

use maxode::catalog::Demo;
use maxode::integrate::{euler_max, heun_max};
use maxode::picard::{coupled_linear_sequence, solve_picard, PicardConfig, PicardIterates};
use maxode::trajectory::{write_csv, Grid, Trajectory};
use maxode::ProblemSpec;

fn logistic(x0: f64, t: f64) -> ProblemSpec {
    ProblemSpec::from_strings(&["x1 - m1"], &["x1^2"], vec![x0], t).unwrap()
}

fn logistic_exact(x0: f64, t: f64) -> f64 {
    x0 * t.exp() / (1.0 - x0 + x0 * t.exp())
}

fn end_error(traj: &Trajectory, exact: f64) -> f64 {
    (traj.state(traj.len() - 1)[0] - exact).abs()
}

#[test]
fn euler_is_first_order() {
    let (x0, t_end) = (0.5, 0.2);
    let spec = logistic(x0, t_end);
    // Fine Picard solution as reference, cross-checked against the closed form.
    let fine = Grid::over(t_end, 12_800).unwrap();
    let (reference, rep) = solve_picard(&spec, &PicardConfig::new(fine, 1e-14, 100)).unwrap();
    assert!(rep.converged);
    let x_ref = reference.state(reference.len() - 1)[0];
    assert!((x_ref - logistic_exact(x0, t_end)).abs() < 1e-10);

    let errs: Vec<f64> = [25, 50, 100, 200]
        .iter()
        .map(|&n| end_error(&euler_max(&spec, &Grid::over(t_end, n).unwrap()).unwrap(), x_ref))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..=2.3).contains(&ratio), "euler ratio {ratio} from {errs:?}");
    }
}

#[test]
fn heun_is_second_order() {
    let (x0, t_end) = (0.5, 0.2);
    let spec = logistic(x0, t_end);
    let exact = logistic_exact(x0, t_end);
    let errs: Vec<f64> = [10, 20, 40, 80]
        .iter()
        .map(|&n| end_error(&heun_max(&spec, &Grid::over(t_end, n).unwrap()).unwrap(), exact))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.4..=4.6).contains(&ratio), "heun ratio {ratio} from {errs:?}");
    }
}

#[test]
fn heun_and_euler_agree_to_first_order_on_quadratic_system() {
    let spec = Demo::by_name("coupled_quadratic").unwrap().spec();
    let mut prev = f64::INFINITY;
    for n in [50, 100, 200, 400] {
        let grid = Grid::over(0.5, n).unwrap();
        let d = maxode::trajectory::sup_dist(&euler_max(&spec, &grid).unwrap(), &heun_max(&spec, &grid).unwrap()).unwrap();
        assert!(d <= grid.step(), "gap {d} at h = {}", grid.step());
        assert!(d < prev);
        prev = d;
    }
}

#[test]
fn monotone_scheme_matches_general_iterates() {
    let (x0, y0) = (2.0, 1.0);
    let grid = Grid::with_step(1.0, 1e-3).unwrap();
    let spec = ProblemSpec::from_strings(&["x1 - m2", "x2 - m1"], &["x1", "x2"], vec![x0, y0], 1.0).unwrap();
    let (xs, ys) = coupled_linear_sequence(x0, y0, 12, &grid).unwrap();
    for (n, it) in PicardIterates::new(&spec, grid).take(12).enumerate() {
        let it = it.unwrap();
        let gap = (0..grid.n_nodes())
            .map(|k| (it.state(k)[0] - xs[n + 1][k]).abs().max((it.state(k)[1] - ys[n + 1][k]).abs()))
            .fold(0.0, f64::max);
        assert!(gap <= 5.0 * grid.step(), "iterate {} differs by {gap}", n + 1);
    }
}

#[test]
fn csv_running_max_columns_are_nondecreasing() {
    for demo in maxode::catalog::DEMOS {
        let spec = demo.spec();
        let grid = Grid::over(spec.horizon(), 200).unwrap();
        let traj = heun_max(&spec, &grid).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &spec, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 1 + spec.dim() + spec.n_maxima());
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), grid.n_nodes());
        for j in 1 + spec.dim()..header.len() {
            assert!(rows.windows(2).all(|w| w[1][j] >= w[0][j]), "{}: column {}", demo.name, header[j]);
        }
        // 17 significant digits round-trip exactly.
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(&row[1..=spec.dim()], traj.state(k));
        }
    }
}
