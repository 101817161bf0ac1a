//! End-to-end behavior of the `hhsparse` binary: flag contracts, exit
//! codes, CSV shapes, the worker invocation contract, and fault handling.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use hhsparse::cluster::{self, JobSpec, WorkerCommand, WorkerOutcome};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hhsparse"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn stdout_rows(output: &Output) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_reader(output.stdout.as_slice());
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let mut rows = vec![headers];
    for record in reader.records() {
        rows.push(record.unwrap().iter().map(String::from).collect());
    }
    rows
}

fn column<'a>(rows: &'a [Vec<String>], name: &str) -> Vec<&'a str> {
    let idx = rows[0].iter().position(|h| h == name).expect("column exists");
    rows[1..].iter().map(|r| r[idx].as_str()).collect()
}

#[test]
fn gen_is_deterministic_and_tsv_matches() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(
        &["gen", "--scale", "10", "--edges", "1000", "--seed", "7", "--out", "a.bin"],
        dir.path(),
    );
    assert_exit(&a, 0);
    let b = run(
        &["gen", "--scale", "10", "--edges", "1000", "--seed", "7", "--out", "b.bin", "--tsv"],
        dir.path(),
    );
    assert_exit(&b, 0);

    let bytes_a = fs::read(dir.path().join("a.bin")).unwrap();
    let bytes_b = fs::read(dir.path().join("b.bin")).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert_eq!(bytes_a.len(), 24 + 1000 * 24);

    let tsv = fs::read_to_string(dir.path().join("b.bin.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1000);
    assert!(tsv.lines().all(|l| l.split('\t').count() == 3));
}

#[test]
fn gen_zero_edges_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["gen", "--scale", "10", "--edges", "0", "--seed", "1", "--out", "empty.bin"],
        dir.path(),
    );
    assert_exit(&out, 0);
    assert_eq!(fs::metadata(dir.path().join("empty.bin")).unwrap().len(), 24);
}

#[test]
fn gen_rejects_probabilities_that_do_not_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gen", "--scale", "10", "--edges", "10", "--seed", "1", "--probs",
            "0.5,0.5,0.5,0.5", "--out", "x.bin",
        ],
        dir.path(),
    );
    assert_exit(&out, 2);
    assert!(!dir.path().join("x.bin").exists());
}

#[test]
fn bench_requires_a_workload() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bench", "--batch", "100"], dir.path());
    assert_exit(&out, 2);
}

#[test]
fn bench_on_a_missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bench", "--in", "nope.bin"], dir.path());
    assert_exit(&out, 3);
}

#[test]
fn bench_verify_passes_and_modes_ingest_identical_edge_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut edges_seen = Vec::new();
    for mode in ["hier", "flat"] {
        let out = run(
            &[
                "bench", "--rmat", "12,20000,5", "--batch", "1000", "--cut-list", "256,2048",
                "--mode", mode, "--trials", "2", "--verify",
            ],
            dir.path(),
        );
        assert_exit(&out, 0);
        let rows = stdout_rows(&out);
        assert_eq!(rows.len(), 1 + 3, "2 trials + median");
        assert_eq!(column(&rows, "trial").last(), Some(&"median"));
        let edges = column(&rows, "edges").to_vec();
        assert!(edges.iter().all(|e| *e == "20000"));
        edges_seen.push(edges[0].to_string());
    }
    assert_eq!(edges_seen[0], edges_seen[1]);
}

#[test]
fn bench_csv_round_trips_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "bench", "--rmat", "12,10000,5", "--batch", "1000", "--cut-list", "256",
            "--trials", "1", "--out", "bench.csv",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);
    let original = fs::read_to_string(dir.path().join("bench.csv")).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join("bench.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let mut rewritten = csv::Writer::from_writer(Vec::new());
    rewritten.write_record(&headers).unwrap();
    for record in reader.records() {
        rewritten.write_record(&record.unwrap()).unwrap();
    }
    let rewritten = String::from_utf8(rewritten.into_inner().unwrap()).unwrap();
    assert_eq!(original, rewritten);
}

#[test]
fn scale_emits_one_row_per_worker_count_with_constant_edges() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "scale", "--rmat", "13,40000,5", "--batch", "2000", "--cut-list", "256,2048",
            "--workers", "1,2,4", "--trials", "1",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);
    let rows = stdout_rows(&out);
    assert_eq!(column(&rows, "workers"), vec!["1", "2", "4"]);
    assert!(column(&rows, "edges").iter().all(|e| *e == "40000"));
}

#[test]
fn sweep_emits_one_row_per_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "sweep", "--rmat", "12,20000,5", "--batch", "1000", "--bases", "64", "--ratios",
            "2,3,4,5,6,7,8", "--cut-counts", "2", "--kmin", "1", "--trials", "1",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);
    let rows = stdout_rows(&out);
    assert_eq!(
        column(&rows, "ratio"),
        vec!["2", "3", "4", "5", "6", "7", "8"]
    );
    assert!(column(&rows, "status").iter().all(|s| *s == "ok"));
}

#[test]
fn worker_contract_invocation_publishes_a_result() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("job.conf"),
        "rmat=12,20000,5\nbatch=1000\ncut-list=256,2048\nverify=true\n",
    )
    .unwrap();
    let out = run(
        &[
            "worker",
            "--worker-index", "2",
            "--shard-start", "1000",
            "--shard-end", "3000",
            "--result-dir", ".",
            "--config", "job.conf",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);

    let text = fs::read_to_string(dir.path().join("w2.result")).unwrap();
    let value: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(value["worker_index"], 2);
    assert_eq!(value["edges"], 2000);
    assert_eq!(value["status"], "ok");
    assert!(value["rate"].as_f64().unwrap() > 0.0);
    assert!(value["end_ns"].as_u64().unwrap() >= value["start_ns"].as_u64().unwrap());
    assert!(value["cascades"].is_array());
}

#[test]
fn worker_with_an_unsatisfiable_shard_reports_failure_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("job.conf"), "rmat=12,1000,5\nbatch=100\n").unwrap();
    let out = run(
        &[
            "worker",
            "--worker-index", "0",
            "--shard-start", "0",
            "--shard-end", "5000",
            "--result-dir", ".",
            "--config", "job.conf",
        ],
        dir.path(),
    );
    assert_exit(&out, 1);
    let text = fs::read_to_string(dir.path().join("w0.result")).unwrap();
    let value: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert!(value["status"]["failed"].is_string());
}

#[test]
fn cluster_emits_summary_plus_one_detail_row_per_process() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "cluster", "--processes", "4", "--rmat", "13,120000,9", "--batch", "5000",
            "--cut-list", "512,4096", "--verify", "--result-dir", "results",
        ],
        dir.path(),
    );
    assert_exit(&out, 0);
    let rows = stdout_rows(&out);
    assert_eq!(rows.len(), 1 + 1 + 4, "header, summary, 4 workers");
    assert_eq!(column(&rows, "kind"), vec!["summary", "worker", "worker", "worker", "worker"]);
    assert_eq!(column(&rows, "status")[0], "complete");
    for i in 0..4 {
        assert!(dir.path().join("results").join(format!("w{i}.result")).exists());
    }

    // Conservation: worker edge counts sum to the summary's total.
    let edges = column(&rows, "edges");
    let total: u64 = edges[0].parse().unwrap();
    let sum: u64 = edges[1..].iter().map(|e| e.parse::<u64>().unwrap()).sum();
    assert_eq!(total, sum);
    assert_eq!(total, 120_000);
}

#[test]
fn degenerate_single_process_cluster_matches_bench_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cluster_out = run(
        &[
            "cluster", "--processes", "1", "--rmat", "12,30000,11", "--batch", "1000",
            "--cut-list", "256,2048", "--verify", "--result-dir", "results",
        ],
        dir.path(),
    );
    assert_exit(&cluster_out, 0);

    let bench_out = run(
        &[
            "bench", "--rmat", "12,30000,11", "--batch", "1000", "--cut-list", "256,2048",
            "--trials", "1", "--verify",
        ],
        dir.path(),
    );
    assert_exit(&bench_out, 0);
}

#[cfg(unix)]
#[test]
fn killing_a_worker_marks_it_missing_and_the_job_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("job.conf");
    // Large enough that workers are still ingesting when the kill lands.
    fs::write(
        &config_path,
        "rmat=18,6000000,3\nbatch=100000\ncut-list=8192,65536\n",
    )
    .unwrap();
    let job = JobSpec::from_config_file(
        "kill-test",
        2,
        config_path,
        dir.path().join("results"),
        Duration::from_millis(20),
        Duration::from_secs(120),
    )
    .unwrap();
    let worker = WorkerCommand {
        program: env!("CARGO_BIN_EXE_hhsparse").into(),
        prefix_args: vec!["worker".to_string()],
    };
    let mut handle = cluster::launch(&job, &worker).unwrap();
    handle.kill_worker(1).unwrap();

    let report = cluster::collect(&mut handle, Duration::from_secs(120)).unwrap();
    assert!(!report.complete);
    assert!(matches!(report.workers[0], WorkerOutcome::Ok(_)));
    assert_eq!(report.workers[1], WorkerOutcome::Missing { worker_index: 1 });
    assert_eq!(report.total_edges, 3_000_000);
}

#[test]
fn report_projects_sweep_and_concatenates_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let header = "base,ratio,ncuts,rate,edges,wall_seconds,flush_seconds,verified,status\n";
    fs::write(
        dir.path().join("s1.csv"),
        format!("{header}64,8,2,300.0,100,1.0,0.1,true,ok\n64,2,2,100.0,100,1.0,0.1,true,ok\n"),
    )
    .unwrap();
    fs::write(
        dir.path().join("s2.csv"),
        format!("{header}64,4,3,200.0,100,1.0,0.1,true,ok\n64,3,1,0.0,0,0.0,0.0,,cut count must be >= 1\n"),
    )
    .unwrap();

    let out = run(&["report", "s1.csv", "s2.csv", "--out-dir", "dats"], dir.path());
    assert_exit(&out, 0);
    let top = fs::read_to_string(dir.path().join("dats/fig2_top.dat")).unwrap();
    assert_eq!(top, "# ratio rate\n2 100\n4 200\n8 300\n");
    let bottom = fs::read_to_string(dir.path().join("dats/fig2_bottom.dat")).unwrap();
    assert_eq!(bottom, "# ncuts rate\n2 100\n2 300\n3 200\n");
}

#[test]
fn report_names_the_mismatching_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "workers,rate\n1,10.0\n").unwrap();
    fs::write(dir.path().join("b.csv"), "workers,speed\n1,10.0\n").unwrap();
    let out = run(&["report", "a.csv", "b.csv", "--out-dir", "."], dir.path());
    assert_exit(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("`speed`"), "stderr: {stderr}");
}

#[test]
fn report_rejects_an_unrecognized_schema() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.csv"), "alpha,beta\n1,2\n").unwrap();
    let out = run(&["report", "x.csv", "--out-dir", "."], dir.path());
    assert_exit(&out, 2);
}
