use std::fs;
use std::path::{Path, PathBuf};

use dilrnn::config::{RunConfig, TaskName};
use dilrnn::dump::{read_batch_dump, write_batch_dump};
use dilrnn::mnist::load_mnist_idx;
use dilrnn::train::{evaluate_checkpoint, train, TaskSource};
use dilrnn_core::tasks::{encode_idx_images, encode_idx_labels, gen_copy_memory, CopyMemoryConfig};

/// Twelve synthetic 28x28 digits: image `i` lights row `i` and carries label `i % 10`.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let count = 12;
    let mut pixels = vec![0u8; count * 784];
    for i in 0..count {
        for c in 0..28 {
            pixels[i * 784 + i * 28 + c] = 255;
        }
    }
    let labels: Vec<u8> = (0..count as u8).map(|i| i % 10).collect();
    let images = dir.join("images.idx3-ubyte");
    let label_path = dir.join("labels.idx1-ubyte");
    fs::write(&images, encode_idx_images(count, 28, 28, &pixels).unwrap()).unwrap();
    fs::write(&label_path, encode_idx_labels(&labels)).unwrap();
    (images, label_path)
}

fn pixel_config(images: &Path, labels: &Path) -> RunConfig {
    let mut cfg = RunConfig::copy_memory(1, 2);
    cfg.task.name = TaskName::PixelMnist;
    cfg.task.images = Some(images.to_path_buf());
    cfg.task.labels = Some(labels.to_path_buf());
    cfg.task.holdout = 4;
    cfg.model.layers = 2;
    cfg.model.hidden = 3;
    cfg.training.batch = 3;
    cfg.training.validation_batch = 4;
    cfg.training.iterations = 2;
    cfg.training.eval_every = 2;
    cfg
}

#[test]
fn batch_dump_round_trip() {
    let batch = gen_copy_memory(&CopyMemoryConfig {
        delay: 4,
        batch: 3,
        seed: 11,
    })
    .unwrap();
    let text = write_batch_dump(&batch);
    assert!(text.starts_with("T 24 batch 3 input_dim 10 num_classes 10 seed 11\n"));
    assert_eq!(read_batch_dump(&text).unwrap(), batch);
    assert!(read_batch_dump(&text[..text.len() / 2]).is_err());
    assert!(read_batch_dump("T x batch 1").is_err());
}

#[test]
fn idx_fixture_loads() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = fixture(dir.path());
    let (imgs, labs) = load_mnist_idx(&images, &labels).unwrap();
    assert_eq!((imgs.count, imgs.rows, imgs.cols), (12, 28, 28));
    assert_eq!(labs[11], 1);
    let img = imgs.image(3);
    assert_eq!(img[3 * 28], 1.0);
    assert_eq!(img.iter().filter(|&&v| v > 0.0).count(), 28);
}

#[test]
fn idx_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = fixture(dir.path());
    let bytes = fs::read(&images).unwrap();
    let cut = dir.path().join("cut.idx");
    fs::write(&cut, &bytes[..bytes.len() - 1]).unwrap();
    let err = load_mnist_idx(&cut, &labels).unwrap_err().to_string();
    assert!(err.contains("cut.idx"), "{err}");

    let few = dir.path().join("few.idx");
    fs::write(&few, encode_idx_labels(&[1, 2])).unwrap();
    assert!(load_mnist_idx(&images, &few).unwrap_err().to_string().contains("12 images but 2 labels"));
}

#[test]
fn pixel_tasks_train_and_split_train_from_validation() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = fixture(dir.path());
    let cfg = pixel_config(&images, &labels);
    let source = TaskSource::from_config(&cfg).unwrap();
    let val = source.validation_batch(cfg.seed, 10).unwrap();
    assert_eq!(val.batch(), 4, "validation uses the held-out images only");
    assert_eq!(val.len(), 784);
    assert_eq!(val.targets[783], vec![8, 9, 0, 1]);
    let out = train(&cfg, None).unwrap();
    assert_eq!(out.summary.iterations_run, 2);

    let mut noisy = cfg.clone();
    noisy.task.name = TaskName::NoisyMnist;
    noisy.task.pad_to = Some(800);
    let source = TaskSource::from_config(&noisy).unwrap();
    let a = source.train_batch(1, 5, 2).unwrap();
    assert_eq!(a.len(), 800);
    assert_eq!(a, source.train_batch(1, 5, 2).unwrap());
    assert_ne!(a.inputs[790], source.train_batch(1, 6, 2).unwrap().inputs[790]);

    let mut bad = cfg;
    bad.task.holdout = 12;
    assert!(TaskSource::from_config(&bad).is_err());
}

#[test]
fn eval_rejects_a_checkpoint_from_another_task() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = fixture(dir.path());
    let mut copy = RunConfig::copy_memory(3, 1);
    copy.model.layers = 2;
    copy.model.hidden = 3;
    copy.training.batch = 2;
    copy.training.iterations = 1;
    train(&copy, Some(&dir.path().join("run"))).unwrap();
    let err = evaluate_checkpoint(&dir.path().join("run/best.ckpt"), &pixel_config(&images, &labels)).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("input_dim 10"), "{err}");
}
