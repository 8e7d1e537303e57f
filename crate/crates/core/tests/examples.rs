//! Every example compiles and runs to completion.

#[allow(dead_code)]
mod gen_dataset {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gen_dataset.rs"));
}

#[allow(dead_code)]
mod tensor_io {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/tensor_io.rs"));
}

#[allow(dead_code)]
mod augment_transport {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/augment_transport.rs"));
}

#[allow(dead_code)]
mod evaluate_metrics {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/evaluate_metrics.rs"));
}

#[allow(dead_code)]
mod analyze_dataset {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/analyze_dataset.rs"));
}

#[allow(dead_code)]
mod entropy_filter {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/entropy_filter.rs"));
}

#[allow(dead_code)]
mod gradient_check {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gradient_check.rs"));
}

#[allow(dead_code)]
mod train_filtermatch {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/train_filtermatch.rs"));
}

#[allow(dead_code)]
mod ablation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ablation.rs"));
}

#[test]
fn gen_dataset_example_runs() {
    gen_dataset::run_example().expect("gen_dataset example should run");
}

#[test]
fn tensor_io_example_runs() {
    tensor_io::run_example().expect("tensor_io example should run");
}

#[test]
fn augment_transport_example_runs() {
    augment_transport::run_example().expect("augment_transport example should run");
}

#[test]
fn evaluate_metrics_example_runs() {
    evaluate_metrics::run_example().expect("evaluate_metrics example should run");
}

#[test]
fn analyze_dataset_example_runs() {
    analyze_dataset::run_example().expect("analyze_dataset example should run");
}

#[test]
fn entropy_filter_example_runs() {
    entropy_filter::run_example().expect("entropy_filter example should run");
}

#[test]
fn gradient_check_example_runs() {
    gradient_check::run_example().expect("gradient_check example should run");
}

#[test]
fn train_filtermatch_example_runs() {
    train_filtermatch::run_example().expect("train_filtermatch example should run");
}

#[test]
fn ablation_example_runs() {
    ablation::run_example().expect("ablation example should run");
}
