use distill_core::experiment::{sweep_csv, sweep_lambda, ExperimentConfig, SeedContext};
use distill_core::toy::{
    evaluate, generate_data, predict_logits, train, Dataset, Method, SyntheticTask, TeacherOutputs,
    ToyNetwork, TrainConfig,
};

fn setup(sigma: f64) -> (Dataset, Vec<TeacherOutputs>) {
    let task = SyntheticTask::random(5, 4, 1.5, sigma, 0, 1).unwrap();
    let data = generate_data(&task, 80, 2).unwrap();
    let teacher = ToyNetwork::new(4, 12, &[("sl", 5)], 3).unwrap();
    let t = TeacherOutputs {
        id: "fine".into(),
        logits: predict_logits(&teacher, &data, 0).unwrap(),
    };
    (data, vec![t])
}

fn cfg(method: Method) -> TrainConfig {
    TrainConfig {
        method,
        epochs: 5,
        learning_rate: 0.2,
        batch_size: 16,
        seed: 4,
    }
}

#[test]
fn lst_with_lambda_one_is_baseline() {
    let (data, teachers) = setup(0.8);
    let net = ToyNetwork::new(4, 6, &[("sl", 5)], 7).unwrap();
    let base = train(net.clone(), &data, &[], &cfg(Method::Baseline)).unwrap();
    let lst = train(
        net,
        &data,
        &teachers,
        &cfg(Method::Lst {
            lambda: 1.0,
            temperature: 5.0,
        }),
    )
    .unwrap();
    assert_eq!(base.network.params_flat(), lst.network.params_flat());
    assert_eq!(base.loss_curve, lst.loss_curve);
}

#[test]
fn multitask_with_lambda_one_ignores_the_teacher() {
    let (data, teachers) = setup(0.8);
    let base_net = ToyNetwork::new(4, 6, &[("sl", 5)], 7).unwrap();
    let mt_net = ToyNetwork::new(4, 6, &[("sl", 5), ("fine", 5)], 7).unwrap();
    let kd_before = mt_net.heads[1].clone();
    let base = train(base_net, &data, &[], &cfg(Method::Baseline))
        .unwrap()
        .network;
    let mt = train(
        mt_net,
        &data,
        &teachers,
        &cfg(Method::Multitask {
            lambda: 1.0,
            temperature: 1.0,
        }),
    )
    .unwrap()
    .network;
    assert_eq!(mt.heads[1], kd_before);
    assert_eq!(mt.trunk, base.trunk);
    assert_eq!(mt.heads[0], base.heads[0]);
}

#[test]
fn full_batch_descent_on_clean_data_never_increases_loss() {
    let (data, _) = setup(0.0);
    let net = ToyNetwork::new(4, 6, &[("sl", 5)], 8).unwrap();
    let c = TrainConfig {
        method: Method::Baseline,
        epochs: 60,
        learning_rate: 0.05,
        batch_size: data.len(),
        seed: 1,
    };
    let curve = train(net, &data, &[], &c).unwrap().loss_curve;
    assert!(curve.windows(2).all(|w| w[1] <= w[0]), "{curve:?}");
    assert!(curve.last().unwrap() < curve.first().unwrap());
}

#[test]
fn rank_accuracies_sum_to_at_most_one() {
    let (data, _) = setup(1.0);
    let net = ToyNetwork::new(4, 6, &[("sl", 5)], 9).unwrap();
    let trained = train(net, &data, &[], &cfg(Method::LabelSmooth { epsilon: 0.2 }))
        .unwrap()
        .network;
    let eval = evaluate(&trained, &data, &[1, 2, 3, 4, 5], 5).unwrap();
    let total: f64 = eval.reports.iter().map(|r| r.accuracy()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let top3: f64 = eval.reports[..3].iter().map(|r| r.accuracy()).sum();
    assert!(top3 <= 1.0);
    assert!((eval.reports[0].accuracy() - eval.accuracy).abs() < 1e-12);
}

fn small() -> ExperimentConfig {
    ExperimentConfig {
        n_train: 150,
        n_test: 100,
        hidden: 8,
        teacher_data_factor: 2,
        teacher_epochs: 2,
        epochs: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn sweep_is_deterministic() {
    let c = small();
    let methods = [c.lst(0.0), c.multitask(0.0)];
    let a = sweep_csv(&sweep_lambda(&c, &[0.1, 0.5, 0.9], &methods, &[1, 2]).unwrap());
    let b = sweep_csv(&sweep_lambda(&c, &[0.1, 0.5, 0.9], &methods, &[1, 2]).unwrap());
    assert_eq!(a, b);
}

#[test]
fn lst_lambda_one_matches_baseline_in_harness() {
    let c = small();
    let ctx = SeedContext::new(&c, 4, true).unwrap();
    let (_, base) = ctx.run(&c, Method::Baseline).unwrap();
    let (_, lst) = ctx.run(&c, c.lst(1.0)).unwrap();
    assert_eq!(base, lst);
}
