use randkern::experiments::{
    run_privacy_sweep, run_sweep, summarize_privacy, write_privacy_csv, write_records_csv,
    BetaSpec, ExperimentPlan, KernelRule,
};
use randkern::kernels::KernelSpec;
use randkern::sampling::DistributionFamily;

fn plans() -> Vec<ExperimentPlan> {
    let poly = KernelRule::Fixed {
        kernel: KernelSpec::polynomial(1.0, 1.0, 3).unwrap(),
    };
    let lap = KernelRule::Fixed {
        kernel: KernelSpec::laplacian(0.2).unwrap(),
    };
    vec![
        ExperimentPlan::new(
            &[5, 20, 40],
            10,
            3,
            poly,
            DistributionFamily::StandardNormal,
        )
        .with_seed(1),
        ExperimentPlan::new(
            &[10, 30],
            15,
            3,
            KernelRule::GaussianLogScaled { coef: 3.0 },
            DistributionFamily::RademacherProduct,
        )
        .with_seed(2),
        ExperimentPlan::new(
            &[30],
            12,
            4,
            KernelRule::GaussianPerDimension { coef: 0.1 },
            DistributionFamily::ZeroOrSphereMixture,
        )
        .with_seed(3),
        ExperimentPlan::new(
            &[25],
            6,
            2,
            lap,
            DistributionFamily::BoundedUniform { half_width: 2.0 },
        )
        .with_seed(4),
    ]
}

fn render(plan: &ExperimentPlan) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &run_sweep(plan).unwrap(), false).unwrap();
    buf
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn sweeps_are_byte_identical_on_rerun() {
    for plan in plans() {
        assert_eq!(render(&plan), render(&plan));
    }
}

#[test]
fn sweeps_do_not_depend_on_thread_count() {
    for plan in plans() {
        assert_eq!(in_pool(1, || render(&plan)), in_pool(4, || render(&plan)));
    }
}

#[test]
fn base_seed_changes_the_output() {
    let plan = plans().remove(0);
    let other = plan.clone().with_seed(99);
    assert_ne!(render(&plan), render(&other));
}

#[test]
fn prefix_of_runs_is_stable() {
    // adding runs must not reshuffle the earlier ones
    let plan = plans().remove(1);
    let mut more = plan.clone();
    more.runs = 6;
    let short = run_sweep(&plan).unwrap();
    let long = run_sweep(&more).unwrap();
    for r in &short {
        let same = long.iter().find(|l| l.n == r.n && l.run == r.run).unwrap();
        assert_eq!(same.measured_norm, r.measured_norm);
        assert_eq!(same.seed, r.seed);
    }
}

#[test]
fn privacy_sweep_is_reproducible() {
    let plan = ExperimentPlan::new(
        &[30, 45],
        8,
        3,
        KernelRule::GaussianLogScaled { coef: 3.0 },
        DistributionFamily::StandardNormal,
    )
    .with_seed(7);
    let betas = [BetaSpec::Absolute(0.02), BetaSpec::RelativeToNorm(1.0)];
    let render = || {
        let trials = run_privacy_sweep(&plan, 0.5, &betas).unwrap();
        let mut buf = Vec::new();
        write_privacy_csv(&mut buf, &summarize_privacy(&trials, &betas)).unwrap();
        buf
    };
    assert_eq!(in_pool(1, render), in_pool(3, render));
}
