use std::sync::Arc;

use wsindy_mpc::data::FeedbackNoise;
use wsindy_mpc::dynamics::{FnRhs, ForwardOperator, Rhs};
use wsindy_mpc::mpc::{
    horizon_cost, receding_horizon_run, solve_mpc_step, MpcConfig, MpcProblem, Obstacle, PlantSetup,
};
use wsindy_mpc::plants::{lorenz_rhs, Lorenz};

fn integrator(d: usize) -> Arc<dyn Rhs> {
    Arc::new(FnRhs::new(d, d, |_x: &[f64], u: &[f64], dx: &mut [f64]| dx.copy_from_slice(u)))
}

fn lorenz_cfg() -> MpcConfig {
    MpcConfig::new(10, 10, 0.01, vec![1.0; 3], vec![0.001], vec![0.001], vec![-50.0], vec![50.0])
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn oracle_lorenz_reaches_fixed_point() {
    let target = vec![-(72f64.sqrt()), -(72f64.sqrt()), 27.0];
    let rhs: Arc<dyn Rhs> = Arc::new(Lorenz);
    let cfg = lorenz_cfg();
    let model = ForwardOperator::new(rhs.clone(), cfg.ts, 1e-3).unwrap();
    let plant = PlantSetup { rhs, dt: 1e-3, x0: vec![-8.0, 8.0, 27.0], u0: vec![0.0], t_total: 2.0 };
    let tgt = target.clone();
    let log = receding_horizon_run(&plant, &model, &cfg, &mut FeedbackNoise::none(3), &move |_| tgt.clone()).unwrap();
    assert_eq!(log.len(), 200);
    assert!(!log.failed);
    let d = dist(log.x.last().unwrap(), &target);
    assert!(d < 1.0, "distance {d}");
    assert!(log.u.iter().all(|u| (-50.0..=50.0).contains(&u[0])));
    assert!(log.stage_cost.iter().all(|c| *c >= 0.0));
    assert!(log.cum_cost.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn zero_state_weight_gives_open_loop() {
    let rhs: Arc<dyn Rhs> = Arc::new(Lorenz);
    let mut cfg = lorenz_cfg();
    cfg.q = vec![0.0; 3];
    let model = ForwardOperator::new(rhs.clone(), cfg.ts, 1e-3).unwrap();
    let plant = PlantSetup { rhs: rhs.clone(), dt: 1e-3, x0: vec![1.0, 2.0, 20.0], u0: vec![0.0], t_total: 0.2 };
    let log = receding_horizon_run(&plant, &model, &cfg, &mut FeedbackNoise::none(3), &|_| vec![0.0; 3]).unwrap();
    assert!(log.u.iter().all(|u| u[0].abs() < 1e-6));
    // independent open-loop reference with a hand-rolled RK4
    let mut x = [1.0, 2.0, 20.0];
    let h = 1e-3;
    for _ in 0..200 {
        let f = |x: &[f64; 3]| lorenz_rhs(x, 0.0);
        let k1 = f(&x);
        let x2 = [0, 1, 2].map(|i| x[i] + 0.5 * h * k1[i]);
        let k2 = f(&x2);
        let x3 = [0, 1, 2].map(|i| x[i] + 0.5 * h * k2[i]);
        let k3 = f(&x3);
        let x4 = [0, 1, 2].map(|i| x[i] + h * k3[i]);
        let k4 = f(&x4);
        x = [0, 1, 2].map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    assert!(dist(log.x.last().unwrap(), &x) < 1e-6);
}

#[test]
fn log_csv_schema() {
    let rhs = integrator(2);
    let cfg = MpcConfig::new(3, 2, 0.5, vec![1.0; 2], vec![0.1; 2], vec![0.1; 2], vec![-1.0; 2], vec![1.0; 2]);
    let model = ForwardOperator::new(rhs.clone(), cfg.ts, 0.5).unwrap();
    let plant = PlantSetup { rhs, dt: 0.1, x0: vec![1.0, -1.0], u0: vec![0.0; 2], t_total: 3.0 };
    let log = receding_horizon_run(&plant, &model, &cfg, &mut FeedbackNoise::new(vec![0.01; 2], 4), &|_| vec![0.0; 2]).unwrap();
    assert_eq!(log.len(), 6);
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "t,u_1,u_2,x_1,x_2,y_1,y_2,stage_cost,cum_cost,iters,wall_ms");
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn warm_start_is_a_fixed_point() {
    let rhs: Arc<dyn Rhs> = Arc::new(Lorenz);
    let cfg = lorenz_cfg();
    let model = ForwardOperator::new(rhs, cfg.ts, 1e-3).unwrap();
    let y = [2.0, 3.0, 24.0];
    let r = vec![vec![-(72f64.sqrt()), -(72f64.sqrt()), 27.0]; 10];
    let s1 = solve_mpc_step(&model, &y, &[0.0], &r, &cfg, None).unwrap();
    let s2 = solve_mpc_step(&model, &y, &[0.0], &r, &cfg, Some(&s1.u_seq)).unwrap();
    assert!(s2.cost <= s1.cost + 1e-8 * s1.cost.max(1.0), "{} vs {}", s2.cost, s1.cost);
    assert!((s2.cost - s1.cost).abs() < 1e-8 * s1.cost.max(1.0), "{} vs {}", s2.cost, s1.cost);
}

#[test]
fn receding_horizon_descent_on_lq_toy() {
    let rhs = integrator(1);
    let cfg = MpcConfig::new(40, 40, 0.1, vec![1.0], vec![0.1], vec![0.1], vec![-10.0], vec![10.0]);
    let model = ForwardOperator::with_substeps(rhs, 0.1, 1).unwrap();
    let r = vec![vec![0.0]; 40];
    let mut x = vec![1.0];
    let mut u_prev = vec![0.0];
    let mut warm: Option<Vec<Vec<f64>>> = None;
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..10 {
        let s = solve_mpc_step(&model, &x, &u_prev, &r, &cfg, warm.as_deref()).unwrap();
        let u = s.first()[0];
        let xn = x[0] + 0.1 * u;
        let stage = xn * xn + 0.1 * u * u + 0.1 * (u - u_prev[0]).powi(2);
        if let Some((j_prev, stage_prev)) = prev {
            assert!(s.cost <= j_prev - stage_prev + 1e-6, "{} > {} - {}", s.cost, j_prev, stage_prev);
        }
        prev = Some((s.cost, stage));
        x = vec![xn];
        u_prev = vec![u];
        warm = Some(s.shifted());
    }
}

#[test]
fn obstacle_gradient_matches_central_differences() {
    let rhs = integrator(3);
    let mut cfg = MpcConfig::new(4, 2, 0.1, vec![1.0; 3], vec![0.01; 3], vec![0.01; 3], vec![-5.0; 3], vec![5.0; 3]);
    cfg.obstacle = Some(Obstacle { center: [0.5, 0.0, 0.0], dmin: 0.35, weight: 1500.0 });
    let model = ForwardOperator::with_substeps(rhs, 0.1, 1).unwrap();
    let y = [0.3, 0.1, 0.0];
    let r = vec![vec![1.0, 0.0, 0.0]; 4];
    let prob = MpcProblem::new(&model, &y, &[0.0; 3], &r, &cfg).unwrap();
    let points = [
        vec![0.4, 0.2, 0.1, 0.3, -0.1, 0.2],
        vec![-0.5, 0.3, 0.0, 1.0, 0.5, -0.4],
        vec![1.5, -0.7, 0.2, -0.3, 0.9, 0.1],
    ];
    for z in points {
        let g = prob.gradient(&z, 0.0);
        for i in 0..z.len() {
            let h = 1e-5;
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let cd = (prob.cost(&zp) - prob.cost(&zm)) / (2.0 * h);
            let rel = (g[i] - cd).abs() / cd.abs().max(1.0);
            assert!(rel < 1e-4, "component {i}: {} vs {}", g[i], cd);
        }
    }
}

#[test]
fn horizon_cost_matches_hand_sum() {
    let cfg = MpcConfig::new(2, 2, 1.0, vec![2.0], vec![0.5], vec![3.0], vec![-1.0], vec![1.0]);
    let x = vec![vec![1.0], vec![-1.0]];
    let u = vec![vec![0.2], vec![-0.4]];
    let r = vec![vec![0.5], vec![0.0]];
    let expect = 2.0 * 0.25 + 2.0 * 1.0 + 0.5 * 0.04 + 3.0 * 0.01 + 0.5 * 0.16 + 3.0 * 0.36;
    assert!((horizon_cost(&x, &u, &[0.1], &r, &cfg).unwrap() - expect).abs() < 1e-12);
}
