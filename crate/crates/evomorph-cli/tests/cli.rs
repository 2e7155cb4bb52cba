//! Behavioural tests for the `evomorph` binary: flag precedence, archive
//! layout, reruns, analysis tables, and genome inspection.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evomorph::cppn::{CppnGenome, BIAS, OUT_EMPTY};

fn evomorph() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evomorph"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Smallest worthwhile experiment: desk-scale learning budget shrunk via the
/// config file, three generations.
fn tiny_evolve(dir: &Path, extra: &[&str]) -> PathBuf {
    let config = dir.join("tiny.cfg");
    fs::write(&config, "mu=4\niterations=2\n# comment line\npop=5\n").unwrap();
    let out = dir.join("runs");
    let mut cmd = evomorph();
    cmd.arg("evolve")
        .arg("--config")
        .arg(&config)
        .args(["--offspring", "3", "--generations", "3", "--seed", "7"])
        .arg("--out")
        .arg(&out)
        .args(extra);
    run_ok(&mut cmd);
    out
}

#[test]
fn evolve_writes_named_archive_with_expected_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_evolve(dir.path(), &[]);
    let run_dir = out.join("run_bfs_lamarckian_7");
    for file in ["config.json", "individuals.csv", "populations.csv", "learning.csv"] {
        assert!(run_dir.join(file).is_file(), "{file} missing");
    }
    let individuals = fs::read_to_string(run_dir.join("individuals.csv")).unwrap();
    // 5 founders + 2 * 3 offspring, plus the header line.
    assert_eq!(individuals.lines().count(), 12);
    assert!(individuals.starts_with("generation,individual_id,parents,"));
    // Config file pop=5 survived; flagged values too.
    let config = fs::read_to_string(run_dir.join("config.json")).unwrap();
    assert!(config.contains("\"population_size\": 5"));
    assert!(config.contains("\"generations\": 3"));
    assert!(config.contains("\"mu\": 4"));
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = tiny_evolve(dir.path(), &[]);
    let sub = tempfile::tempdir_in(dir.path()).unwrap();
    let out_b = tiny_evolve(sub.path(), &[]);
    for file in ["individuals.csv", "populations.csv", "learning.csv"] {
        let a = fs::read(out_a.join("run_bfs_lamarckian_7").join(file)).unwrap();
        let b = fs::read(out_b.join("run_bfs_lamarckian_7").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn flags_override_config_file_and_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    // File asks for pop=9; desk-scale would set 16; the flag must win.
    fs::write(&config, "pop=9\nmu=4\niterations=2\nseed=3\n").unwrap();
    let out = dir.path().join("runs");
    run_ok(evomorph().arg("evolve").arg("--config").arg(&config).args([
        "--desk-scale",
        "--pop",
        "6",
        "--offspring",
        "2",
        "--generations",
        "2",
        "--out",
    ]).arg(&out));
    let config_json =
        fs::read_to_string(out.join("run_bfs_lamarckian_3").join("config.json")).unwrap();
    assert!(config_json.contains("\"population_size\": 6"));
    // Desk-scale overrode the file-level learning budget defaults.
    assert!(config_json.contains("\"mu\": 6"));
    assert!(config_json.contains("\"iterations\": 5"));
}

#[test]
fn multiple_runs_use_consecutive_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_evolve(dir.path(), &["--runs", "2", "--system", "darwinian"]);
    assert!(out.join("run_bfs_darwinian_7").is_dir());
    assert!(out.join("run_bfs_darwinian_8").is_dir());
    let a = fs::read(out.join("run_bfs_darwinian_7/individuals.csv")).unwrap();
    let b = fs::read(out.join("run_bfs_darwinian_8/individuals.csv")).unwrap();
    assert_ne!(a, b, "different seeds produced identical runs");
}

#[test]
fn fixed_body_rerun_reuses_founder_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_evolve(dir.path(), &[]);
    let source = out.join("run_bfs_lamarckian_7");
    run_ok(evomorph().arg("fixed-body").arg("--source").arg(&source).arg("--out").arg(&out));
    let rerun = out.join("run_bfs_lamarckian_fixed_7");
    assert!(rerun.is_dir());

    let hashes = |dir: &Path| -> Vec<(String, String)> {
        fs::read_to_string(dir.join("individuals.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| {
                let fields: Vec<&str> = line.split(',').collect();
                (fields[1].to_string(), fields[7].to_string())
            })
            .collect()
    };
    let source_hashes = hashes(&source);
    let rerun_hashes = hashes(&rerun);
    // Founders carry the exact same bodies; offspring bodies never leave the
    // founder set because bodies are frozen.
    let founders: Vec<&(String, String)> =
        source_hashes.iter().take(5).collect();
    assert_eq!(founders, rerun_hashes.iter().take(5).collect::<Vec<_>>());
    let founder_set: std::collections::BTreeSet<&str> =
        founders.iter().map(|(_, h)| h.as_str()).collect();
    for (id, hash) in &rerun_hashes {
        assert!(founder_set.contains(hash.as_str()), "robot {id} grew a new body");
    }
}

#[test]
fn analyze_emits_tables_with_pinned_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_evolve(dir.path(), &[]);
    let source = out.join("run_bfs_lamarckian_7");
    run_ok(evomorph().arg("fixed-body").arg("--source").arg(&source).arg("--out").arg(&out));
    let analysis = dir.path().join("analysis");
    run_ok(
        evomorph()
            .arg("analyze")
            .arg(&source)
            .arg(out.join("run_bfs_lamarckian_fixed_7"))
            .arg("--out")
            .arg(&analysis)
            .args(["--threshold", "0.5", "--plot"]),
    );

    let expect_header = |file: &str, header: &str| {
        let text = fs::read_to_string(analysis.join(file)).unwrap();
        assert!(text.starts_with(header), "{file} header: {}", text.lines().next().unwrap_or(""));
        text
    };
    let fitness = expect_header("fitness.csv", "generation,mean_fitness,mean_ci95,max_fitness,max_ci95");
    assert_eq!(fitness.lines().count(), 4, "one row per generation plus header");
    expect_header("diversity.csv", "run,generation,mean_distance");
    let traits = expect_header(
        "traits.csv",
        "run,generation,individual,branching,rel_num_limbs,rel_length_of_limbs,coverage,rel_num_joints,rel_num_bricks,proportion_2d,symmetry",
    );
    // 2 runs x 3 generations x 5 surviving robots, plus the header.
    assert_eq!(traits.lines().count(), 31);
    let mi = expect_header("mi.csv", "generation,delta_of_delta");
    assert_eq!(mi.lines().count(), 4);
    expect_header("learning_delta.csv", "run,generation,mean_delta");
    let efficiency = expect_header("efficiency.csv", "run,assessments_to_threshold");
    assert_eq!(efficiency.lines().count(), 3);
    for chart in ["fitness.svg", "diversity.svg", "learning_delta.svg", "mi.svg"] {
        let svg = fs::read_to_string(analysis.join(chart)).unwrap();
        assert!(svg.starts_with("<svg"), "{chart} is not svg");
    }
}

#[test]
fn analyze_without_fixed_runs_skips_mi_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_evolve(dir.path(), &[]);
    let analysis = dir.path().join("analysis");
    let output = run_ok(
        evomorph().arg("analyze").arg(out.join("run_bfs_lamarckian_7")).arg("--out").arg(&analysis),
    );
    assert!(analysis.join("fitness.csv").is_file());
    assert!(!analysis.join("mi.csv").exists());
    assert!(String::from_utf8_lossy(&output.stderr).contains("skipping mi.csv"));
    // Single run: confidence half-widths are exactly zero.
    let fitness = fs::read_to_string(analysis.join("fitness.csv")).unwrap();
    for line in fitness.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2], "0");
        assert_eq!(fields[4], "0");
    }
}

#[test]
fn decode_is_deterministic_and_renders_match() {
    let dir = tempfile::tempdir().unwrap();
    let genome_path = dir.path().join("genome.json");
    fs::write(&genome_path, CppnGenome::scaffold().to_json()).unwrap();

    let decode = |query: &str| {
        run_ok(evomorph().arg("decode").arg("--genome").arg(&genome_path).args([
            "--query", query, "--seed", "5",
        ]))
        .stdout
    };
    assert_eq!(decode("bfs"), decode("bfs"));
    assert_eq!(decode("random"), decode("random"));
    let table = String::from_utf8(decode("bfs")).unwrap();
    assert!(table.contains("modules ") && table.contains("hash "));

    let ascii = run_ok(
        evomorph().arg("render").arg("--genome").arg(&genome_path).args(["--format", "ascii"]),
    );
    assert!(String::from_utf8(ascii.stdout).unwrap().contains('C'));
    let svg_path = dir.path().join("body.svg");
    run_ok(
        evomorph()
            .arg("render")
            .arg("--genome")
            .arg(&genome_path)
            .args(["--format", "svg"])
            .arg("--out")
            .arg(&svg_path),
    );
    assert!(fs::read_to_string(&svg_path).unwrap().starts_with("<svg"));

    // A genome that always answers Empty decodes to the lone core and
    // renders as a single cell.
    let mut empty_genome = CppnGenome::scaffold();
    for conn in &mut empty_genome.connections {
        if conn.source == BIAS && conn.target == OUT_EMPTY {
            conn.weight = 1.0;
        }
    }
    let empty_path = dir.path().join("empty.json");
    fs::write(&empty_path, empty_genome.to_json()).unwrap();
    let core_only = run_ok(evomorph().arg("render").arg("--genome").arg(&empty_path));
    assert_eq!(String::from_utf8(core_only.stdout).unwrap(), "C\n");
}

#[test]
fn schema_check_flags_tampering_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_evolve(dir.path(), &[]);
    let run_dir = out.join("run_bfs_lamarckian_7");
    run_ok(evomorph().arg("schema-check").arg(&run_dir));

    // Truncate one learning curve and expect a diagnostic and failure.
    let learning = run_dir.join("learning.csv");
    let text = fs::read_to_string(&learning).unwrap();
    let kept: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    fs::write(&learning, kept.join("\n") + "\n").unwrap();
    let output = evomorph().arg("schema-check").arg(&run_dir).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("problem"));
}

#[test]
fn bad_flags_and_missing_inputs_fail_cleanly() {
    let status = evomorph().args(["evolve", "--query", "dfs"]).output().unwrap();
    assert!(!status.status.success());

    let output = evomorph().args(["analyze", "/nonexistent/archive"]).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("error:"));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    fs::write(&config, "populace=5\n").unwrap();
    let output = evomorph().arg("evolve").arg("--config").arg(&config).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown key"));
}
