use wkam_core::config::{OperatorKind, RunConfig};
use wkam_core::rates::run_convergence;

#[test]
#[ignore]
fn probe_pendulum_rate() {
    for eps in [0.0, 0.2] {
        let mut cfg = RunConfig::default();
        cfg.system_name = "forced_pendulum_1d".into();
        cfg.params.insert("a".into(), 0.025);
        cfg.params.insert("eps".into(), eps);
        cfg.grid_n = 64;
        cfg.steps_per_period = 16;
        cfg.operator = OperatorKind::New;
        cfg.n_max = 48;
        let t0 = std::time::Instant::now();
        let rep = run_convergence(&cfg).unwrap();
        println!("=== eps {eps}  ({:?}) ===", t0.elapsed());
        println!(
            "c_est {:.3e} stag {:?} period {:?} floor {:.3e} window {:?}",
            rep.c_est, rep.stagnated_at, rep.detected_period, rep.floor, rep.fit_window
        );
        for &(n, e) in &rep.series {
            println!("n {n:3}  e {e:.6e}");
        }
        if let (Some(ef), Some(pf)) = (rep.exp_fit, rep.pow_fit) {
            println!(
                "exp rho {:.4} r2 {:.5} | pow p {:.4} r2 {:.5}",
                ef.rate, ef.r2, pf.rate, pf.r2
            );
        } else {
            println!("fits unavailable");
        }
    }
}

#[test]
#[ignore]
fn probe_drift2d() {
    let mut cfg = RunConfig::default();
    cfg.system_name = "example_4_1".into();
    cfg.params.insert("c".into(), 0.5);
    cfg.grid_n = 48;
    cfg.steps_per_period = 16;
    cfg.operator = OperatorKind::Classic;
    cfg.n_max = 120;
    cfg.probe = Some(vec![0.0, 0.5]);
    cfg.even_only = true;
    cfg.barrier_n_min = 256;
    cfg.barrier_n_max = 320;
    let t0 = std::time::Instant::now();
    let rep = run_convergence(&cfg).unwrap();
    println!("=== drift2d ({:?}) ===", t0.elapsed());
    println!(
        "c_est {:.6e} (expect -1/72 = {:.6e}) stag {:?} period {:?} ubar@probe {:?}",
        rep.c_est,
        -1.0 / 72.0,
        rep.stagnated_at,
        rep.detected_period,
        rep.ubar_at_probe
    );
    for &(n, e) in rep.series.iter().take(30) {
        println!("n {n:3}  e {e:.6e}");
    }
    println!("floor {:.3e} window {:?}", rep.floor, rep.fit_window);
}
