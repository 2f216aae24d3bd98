use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use spic::graphdata::{load_graph, save_graph, Graph, Labels, Role};

fn spic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spic"))
        .args(args)
        .env_remove("SPIC_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Cycle of `n` nodes (2-regular), alternating labels, mixed features.
fn ring_dir(dir: &Path, n: usize) {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let adj = Graph::adjacency_from_edges(n, &edges).unwrap();
    let features = DMatrix::from_fn(n, 3, |i, j| 1.0 + ((i * 7 + j * 3) % 5) as f64);
    let labels = Labels::Single {
        classes: (0..n).map(|i| i % 2).collect(),
        num_classes: 2,
    };
    let roles = (0..n)
        .map(|i| match i % 4 {
            0 | 1 => Role::Train,
            2 => Role::Val,
            _ => Role::Test,
        })
        .collect();
    save_graph(&Graph::new(adj, features, labels, roles).unwrap(), dir).unwrap();
}

#[test]
fn sbm_writes_a_loadable_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sbm2");
    let o = spic(&[
        "sbm",
        "--blocks",
        "2",
        "--size",
        "200",
        "--pin",
        "0.05",
        "--pout",
        "0.005",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let g = load_graph(&out).unwrap();
    assert_eq!(g.num_nodes(), 400);
    assert_eq!(g.nodes_with(Role::Train).len(), 20);
}

#[test]
fn run_writes_one_schema_row() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("r.csv");
    let o = spic(&[
        "run",
        "--sbm",
        "2x40:0.3:0.02:4",
        "--sbm-features",
        "8",
        "--model",
        "rl_am",
        "--k",
        "3",
        "--runs",
        "3",
        "--epochs",
        "20",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "model,dataset,k,beta,runs,epochs,metric,mean,std,seconds_per_run"
    );
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&cells[..7], &["rl_am", "sbm2x40", "3", "0", "3", "20", "accuracy"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("±"));
}

#[test]
fn appnp_alpha_is_validated_before_compute() {
    let o = spic(&["run", "--sbm", "2x40:0.3:0.02:4", "--model", "appnp", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha must be in (0,1)"));
    let o = spic(&["run", "--sbm", "2x40:0.3:0.02:4", "--model", "da", "--alpha", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let o = spic(&["run", "--data", "/nonexistent/graph", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("graph.json"));
}

#[test]
fn entropy_of_regular_graph_is_log_of_neighborhood() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("ring");
    ring_dir(&data, 12);
    let out = tmp.path().join("ent");
    let o = spic(&[
        "entropy",
        "--data",
        data.to_str().unwrap(),
        "--model",
        "da",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("entropy.tsv")).unwrap();
    let want = spic::bench::format_sig(3f64.ln());
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().all(|l| l == want), "{text}");
    let hist = fs::read_to_string(out.join("entropy_histogram.csv")).unwrap();
    assert!(hist.starts_with("bin_start,bin_end,count\n"));
}

#[test]
fn oracle_check_converges_after_burn_in() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("sbm");
    let o = spic(&[
        "sbm",
        "--size",
        "30",
        "--pin",
        "0.3",
        "--pout",
        "0.05",
        "--labeled",
        "2",
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = tmp.path().join("conv.csv");
    let o = spic(&[
        "oracle-check",
        "--data",
        data.to_str().unwrap(),
        "--model",
        "dad",
        "--kmax",
        "30",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("spectral gap"));
    let sims: Vec<f64> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(sims.len(), 31);
    for w in sims[5..].windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "{sims:?}");
    }
    assert!(sims[30] > 0.99);
}

#[test]
fn identical_argv_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for rep in 0..2 {
        let data = tmp.path().join(format!("rep{rep}")).join("g");
        assert!(spic(&[
            "sbm",
            "--size",
            "25",
            "--pin",
            "0.3",
            "--pout",
            "0.05",
            "--labeled",
            "2",
            "--out",
            data.to_str().unwrap()
        ])
        .status
        .success());
        let emb = tmp.path().join(format!("emb{rep}.tsv"));
        assert!(spic(&[
            "propagate",
            "--data",
            data.to_str().unwrap(),
            "--model",
            "rl_sym",
            "--k",
            "3",
            "--seed",
            "4",
            "--out",
            emb.to_str().unwrap()
        ])
        .status
        .success());
        let csv = tmp.path().join(format!("r{rep}.csv"));
        assert!(spic(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--runs",
            "2",
            "--epochs",
            "10",
            "--threads",
            "2",
            "--out",
            csv.to_str().unwrap()
        ])
        .status
        .success());
        let row = fs::read_to_string(&csv).unwrap();
        // wall time is the only nondeterministic column
        let stable: Vec<String> = row.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect();
        outputs.push((
            fs::read(data.join("features.tsv")).unwrap(),
            fs::read(data.join("edges.tsv")).unwrap(),
            fs::read(&emb).unwrap(),
            stable,
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_rejects_bad_axis_and_writes_sorted_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("s.csv");
    let base = [
        "sweep",
        "--sbm",
        "2x30:0.3:0.02:3",
        "--sbm-features",
        "6",
        "--runs",
        "1",
        "--epochs",
        "5",
    ];
    let o = spic(
        &[
            &base[..],
            &["--axis", "width", "--values", "1", "--out", csv.to_str().unwrap()],
        ]
        .concat(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = spic(
        &[
            &base[..],
            &["--axis", "k", "--values", "4,1,2", "--out", csv.to_str().unwrap()],
        ]
        .concat(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ks: Vec<String> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect();
    assert_eq!(ks, ["1", "2", "4"]);
}
