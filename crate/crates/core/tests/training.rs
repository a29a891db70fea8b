use flowcl::augment::MaskingConfig;
use flowcl::dataio::{EncodedSample, Task};
use flowcl::eval::{confusion, metrics};
use flowcl::model::{
    build_encoder, EncoderBlock, EncoderConfig, Parameterized, ProjectionHead, Representation, COMPACT,
};
use flowcl::numgrad::Tensor;
use flowcl::sscl::{
    fit_linear, head_splits, pretrain, representations, train_head, ContrastiveConfig, HeadConfig, SplitPlan,
};
use flowcl::synthetic::{generate, SyntheticSpec, CLASS_NAMES};
use flowcl::Error;

const WIDTH: usize = 16;

fn data(samples: usize, seed: u64) -> Vec<EncodedSample> {
    generate(&SyntheticSpec {
        samples,
        features: WIDTH,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .samples()
}

fn fresh(seed: u64) -> (EncoderBlock, ProjectionHead) {
    build_encoder(EncoderConfig::preset(COMPACT, WIDTH).unwrap(), seed).unwrap()
}

fn config(epochs: u32) -> ContrastiveConfig {
    ContrastiveConfig {
        epochs,
        masking: MaskingConfig::new(0.3, 5).unwrap(),
        seed: 5,
        ..ContrastiveConfig::default()
    }
}

fn checksum(params: &[&Tensor]) -> Vec<u64> {
    params
        .iter()
        .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn zero_epochs_leave_parameters_untouched() {
    let (mut e, mut p) = fresh(1);
    let before = (checksum(&e.params()), checksum(&p.params()));
    let history = pretrain(&mut e, &mut p, &data(64, 1), &[], &config(0)).unwrap();
    assert!(history.is_empty());
    assert_eq!(before, (checksum(&e.params()), checksum(&p.params())));
}

#[test]
fn too_few_samples_for_one_batch() {
    let (mut e, mut p) = fresh(1);
    let err = pretrain(&mut e, &mut p, &data(31, 1), &[], &config(1)).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
}

#[test]
fn pretraining_is_deterministic_and_learns() {
    let train = data(512, 2);
    let heldout = data(64, 3);
    let run = || {
        let (mut e, mut p) = fresh(4);
        let h = pretrain(&mut e, &mut p, &train, &heldout, &config(20)).unwrap();
        (h, checksum(&e.params()), checksum(&p.params()))
    };
    let (h1, e1, p1) = run();
    let (h2, e2, p2) = run();
    assert_eq!(h1, h2);
    assert_eq!((e1, p1), (e2, p2));
    assert_eq!(h1.len(), 20);
    assert!(
        h1[19].train_loss < h1[0].train_loss,
        "{} vs {}",
        h1[19].train_loss,
        h1[0].train_loss
    );
    assert!(h1.iter().all(|r| r.heldout_loss.is_some_and(f64::is_finite)));
    assert_eq!(h1[0].epoch, 1);
    assert!(h1[1].learning_rate < h1[0].learning_rate);
}

#[test]
fn pretrained_hidden_features_cluster_by_class() {
    let train = data(512, 6);
    let (mut e, mut p) = fresh(6);
    pretrain(&mut e, &mut p, &train, &[], &config(15)).unwrap();
    let probe = data(100, 7);
    let h = representations(&e, &p, &probe, Representation::Hidden).unwrap();
    let (mut intra, mut inter, mut ni, mut nx) = (0.0, 0.0, 0, 0);
    for i in 0..probe.len() {
        for j in i + 1..probe.len() {
            let c = cosine(h.row(i), h.row(j));
            if probe[i].label == probe[j].label {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    let (intra, inter) = (intra / ni as f64, inter / nx as f64);
    assert!(intra > inter, "intra {intra} vs inter {inter}");
}

#[test]
fn linear_head_separates_separable_features() {
    let n = 400;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            vec![
                s + 0.1 * ((i * 7 % 13) as f64 / 13.0),
                0.3 * ((i * 5 % 11) as f64 / 11.0),
            ]
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = Tensor::from_rows(&rows).unwrap();
    let cfg = HeadConfig {
        epochs: 50,
        ..HeadConfig::default()
    };
    let linear = fit_linear(&x, &labels, 2, &cfg).unwrap();
    let logits = linear.apply(&x).unwrap();
    let preds: Vec<usize> = (0..n)
        .map(|i| if logits.row(i)[1] > logits.row(i)[0] { 1 } else { 0 })
        .collect();
    let m = metrics(&confusion(&preds, &labels, 2).unwrap()).unwrap();
    assert!(m.accuracy >= 0.99, "accuracy {}", m.accuracy);
}

#[test]
fn head_training_keeps_the_encoder_frozen() {
    let (e, p) = fresh(8);
    let before = (checksum(&e.params()), checksum(&p.params()));
    let samples = data(128, 8);
    for repr in [Representation::Hidden, Representation::Context] {
        let cfg = HeadConfig {
            representation: repr,
            epochs: 3,
            ..HeadConfig::default()
        };
        let head = train_head(&e, &p, &samples, 2, &cfg).unwrap();
        let want = match repr {
            Representation::Hidden => e.hidden_dim(),
            Representation::Context => p.context_dim(),
        };
        assert_eq!(head.linear.in_dim(), want);
        assert_eq!(head.num_classes(), 2);
    }
    assert_eq!(before, (checksum(&e.params()), checksum(&p.params())));
    // Encoding itself is pure.
    let x = Tensor::from_rows(&samples[..4].iter().map(|s| s.features.clone()).collect::<Vec<_>>()).unwrap();
    assert_eq!(e.encode(&x).unwrap(), e.encode(&x).unwrap());
}

#[test]
fn one_percent_keeps_every_class() {
    // 300 samples with a rare class of 10.
    let mut samples = data(290, 9);
    for s in &mut samples {
        s.label = Some(0);
    }
    samples.extend(data(20, 10).into_iter().take(10).map(|mut s| {
        s.label = Some(1);
        s
    }));
    let names: Vec<String> = CLASS_NAMES.iter().map(|s| s.to_string()).collect();
    let plan = SplitPlan {
        task: Task::parse("all").unwrap(),
        label_fraction: 0.01,
        seed: 3,
        ..SplitPlan::default()
    };
    let splits = head_splits(&samples, &names, Some("Normal"), &plan).unwrap();
    let counts = splits.train_counts();
    assert!(counts.iter().all(|&c| c >= 1), "{counts:?}");
    assert!(counts[0] <= 3, "{counts:?}");
}
