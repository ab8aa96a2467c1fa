//! End-to-end checks of the `dsff` binary: the full fixture -> fit ->
//! convert -> evaluate loop, exit-code mapping, and config plumbing.

use std::path::Path;
use std::process::{Command, Output};

use ndarray::Array2;

use dsff_core::feature_store::{write_feature, FeatureSequence};

fn dsff() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsff"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn dsff")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Converting an utterance to its own (only) speaker: the transposition
/// factor is exactly 1, so the converted F0 files are byte-for-byte the
/// reference analysis and the F0/CER/SIM metrics are exact. The mel side goes
/// through the fitted linear decoder, which cannot reproduce the STFT
/// perfectly, so it is held against a constant-mel baseline instead.
#[test]
fn identity_conversion_is_transparent() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    assert_ok(&run(dsff()
        .args(["gen-fixtures", "--utterances", "1", "--speakers", "1", "--seconds", "1.5"])
        .arg("--out")
        .arg(&corpus)));

    let weights = root.path().join("weights");
    assert_ok(&run(dsff()
        .args(["fit", "--lambda-rel", "1e-8", "--manifest"])
        .arg(corpus.join("train.list"))
        .arg("--weights-dir")
        .arg(&weights)));

    // Point the conversion at the utterance's own speaker.
    let convert_list = root.path().join("identity.list");
    std::fs::write(&convert_list, {
        let wav = corpus.join("wav/utt000.wav");
        let a = corpus.join("feat/utt000.enc_a.dsff");
        let b = corpus.join("feat/utt000.enc_b.dsff");
        format!("utt000|{}|spk0|{};{}\n", wav.display(), a.display(), b.display())
    })
    .unwrap();
    let out_dir = root.path().join("converted");
    let conv = run(dsff()
        .args(["convert", "--manifest"])
        .arg(&convert_list)
        .arg("--weights-dir")
        .arg(&weights)
        .arg("--out-dir")
        .arg(&out_dir));
    assert_ok(&conv);
    assert!(
        stdout(&conv).contains("transposition x1.0000"),
        "identity conversion should transpose by exactly 1: {}",
        stdout(&conv)
    );

    // Reference analysis of the same audio, plus transcript and speaker
    // embedding pairs to light up every evaluate column.
    let refs = root.path().join("refs");
    assert_ok(&run(dsff()
        .args(["extract-prosody", "--audio"])
        .arg(corpus.join("wav/utt000.wav"))
        .arg("--out-stem")
        .arg(refs.join("utt000"))));
    std::fs::write(root.path().join("hyp.txt"), "what a lovely day\n").unwrap();
    std::fs::write(root.path().join("ref.txt"), "What a lovely day.\n").unwrap();
    for name in ["emb_a", "emb_b"] {
        let emb = FeatureSequence::new(
            Array2::from_shape_fn((1, 8), |(_, j)| (j as f64 + 1.0) / 3.0),
            1.0,
            "speaker-embedding",
        )
        .unwrap();
        write_feature(&emb, root.path().join(format!("{name}.dsff"))).unwrap();
    }

    let eval_list = root.path().join("eval.list");
    std::fs::write(
        &eval_list,
        format!(
            "utt000|{c}/utt000.mel.dsff|{r}/utt000.mel.dsff|{c}/utt000.f0.dsff|{r}/utt000.f0.dsff|{t}/hyp.txt|{t}/ref.txt|{t}/emb_a.dsff|{t}/emb_b.dsff\n",
            c = out_dir.display(),
            r = refs.display(),
            t = root.path().display(),
        ),
    )
    .unwrap();
    let report = root.path().join("report.csv");
    let eval = run(dsff()
        .args(["evaluate", "--manifest"])
        .arg(&eval_list)
        .arg("--out")
        .arg(&report));
    assert_ok(&eval);

    let csv = std::fs::read_to_string(&report).unwrap();
    let mean = csv.lines().find(|l| l.starts_with("mean,")).expect("mean row");
    let cells: Vec<&str> = mean.split(',').collect();
    let mcd_fit: f64 = cells[1].parse().unwrap();
    let f0corr: f64 = cells[2].parse().unwrap();
    let f0rmse: f64 = cells[3].parse().unwrap();
    let cer: f64 = cells[5].parse().unwrap();
    let sim: f64 = cells[6].parse().unwrap();
    assert!((f0corr - 1.0).abs() < 1e-12, "identity f0corr {f0corr}");
    assert_eq!(f0rmse, 0.0, "identity F0 must round-trip exactly");
    assert_eq!(cer, 0.0, "transcripts differ only in case/punctuation");
    assert!((sim - 1.0).abs() < 1e-9, "identical embeddings, sim {sim}");

    // The decoded mel must carry real information: clearly better than
    // predicting the reference's column means everywhere.
    let reference = dsff_core::feature_store::read_feature(refs.join("utt000.mel.dsff")).unwrap();
    let n = reference.n_frames();
    let means = reference.data().mean_axis(ndarray::Axis(0)).unwrap();
    let constant = FeatureSequence::new(
        Array2::from_shape_fn((n, reference.dim()), |(_, j)| means[j]),
        reference.frame_rate(),
        "mel",
    )
    .unwrap();
    let mcd_const = dsff_core::metrics::mcd(&constant, &reference, false).unwrap();
    assert!(
        mcd_fit < 0.6 * mcd_const,
        "decoded mel ({mcd_fit:.3} dB) should beat the constant baseline ({mcd_const:.3} dB) by >= 40%"
    );
}

#[test]
fn exit_codes_follow_the_documented_contract() {
    // 2: usage errors (missing subcommand, unknown flag)
    assert_eq!(run(&mut dsff()).status.code(), Some(2));
    assert_eq!(run(dsff().arg("--no-such-flag")).status.code(), Some(2));

    // 3: config errors (unreadable file, invalid contents)
    let root = tempfile::tempdir().unwrap();
    assert_eq!(
        run(dsff().args(["--config", "/no/such/config.toml", "bench", "--quick"]))
            .status
            .code(),
        Some(3)
    );
    let bad_cfg = root.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[audio]\nsample_rate = -5\n").unwrap();
    assert_eq!(
        run(dsff().arg("--config").arg(&bad_cfg).args(["bench", "--quick"])).status.code(),
        Some(3)
    );

    // 4: missing or malformed inputs
    let out = run(dsff()
        .args(["fit", "--manifest", "/no/such/train.list", "--weights-dir"])
        .arg(root.path().join("w")));
    assert_eq!(out.status.code(), Some(4));
    let mangled = root.path().join("short.list");
    std::fs::write(&mangled, "label|only|three\n").unwrap();
    let out = run(dsff()
        .args(["fit", "--manifest"])
        .arg(&mangled)
        .arg("--weights-dir")
        .arg(root.path().join("w")));
    assert_eq!(out.status.code(), Some(4));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 1"),
        "manifest errors carry line numbers"
    );

    // 5: well-formed inputs that are semantically wrong
    let out = run(dsff().args([
        "gen-fixtures",
        "--out",
        "/tmp/never-created",
        "--utterances",
        "1",
        "--speakers",
        "3",
    ]));
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn unknown_target_speaker_exits_5() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    assert_ok(&run(dsff()
        .args(["gen-fixtures", "--utterances", "1", "--speakers", "1", "--seconds", "1.0"])
        .arg("--out")
        .arg(&corpus)));
    let weights = root.path().join("weights");
    assert_ok(&run(dsff()
        .args(["fit", "--manifest"])
        .arg(corpus.join("train.list"))
        .arg("--weights-dir")
        .arg(&weights)));

    let list = root.path().join("bad.list");
    std::fs::write(
        &list,
        format!(
            "utt000|{}|nobody|{}\n",
            corpus.join("wav/utt000.wav").display(),
            corpus.join("feat/utt000.enc_a.dsff").display()
        ),
    )
    .unwrap();
    let out = run(dsff()
        .args(["convert", "--manifest"])
        .arg(&list)
        .arg("--weights-dir")
        .arg(&weights)
        .arg("--out-dir")
        .arg(root.path().join("out")));
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nobody"));
}

#[test]
fn dumped_config_reloads_to_the_same_dump() {
    let root = tempfile::tempdir().unwrap();
    let first = run(dsff().arg("--dump-config"));
    assert_ok(&first);
    let dumped = root.path().join("dumped.toml");
    std::fs::write(&dumped, stdout(&first)).unwrap();
    let second = run(dsff().arg("--config").arg(&dumped).arg("--dump-config"));
    assert_ok(&second);
    assert_eq!(stdout(&first), stdout(&second), "dump -> load -> dump is a fixed point");

    // --seed overrides whatever the file says.
    let seeded = run(dsff().arg("--config").arg(&dumped).args(["--seed", "99", "--dump-config"]));
    assert_ok(&seeded);
    assert!(stdout(&seeded).contains("seed = 99"));
    assert_ne!(stdout(&first), stdout(&seeded));
}

/// The fusion grid comes from --frames, --rate, or the config's
/// model.target_frame_rate (100 fps), in that order.
#[test]
fn fuse_grid_comes_from_flags_or_config() {
    let root = tempfile::tempdir().unwrap();
    let a = FeatureSequence::new(
        Array2::from_shape_fn((30, 4), |(i, j)| (i as f64 * 0.3 + j as f64).sin()),
        25.0,
        "enc_a",
    )
    .unwrap();
    let pa = root.path().join("a.dsff");
    write_feature(&a, &pa).unwrap();

    // 30 frames at 25 fps = 1.2 s, so the default 100 fps grid has 120 frames.
    let defaulted = root.path().join("default.dsff");
    assert_ok(&run(dsff().arg("fuse").arg(&pa).arg("--out").arg(&defaulted)));
    let got = dsff_core::feature_store::read_feature(&defaulted).unwrap();
    assert_eq!(got.n_frames(), 120);

    let fused = root.path().join("fused.dsff");
    assert_ok(&run(dsff()
        .arg("fuse")
        .arg(&pa)
        .args(["--frames", "48"])
        .arg("--out")
        .arg(&fused)));
    let got = dsff_core::feature_store::read_feature(&fused).unwrap();
    assert_eq!(got.n_frames(), 48);
    assert_eq!(got.source_tag(), "fused");
}

/// fit/convert read paths.weights_dir from the config when --weights-dir is
/// not given, and fail cleanly when neither is set.
#[test]
fn weights_dir_falls_back_to_the_config() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    assert_ok(&run(dsff()
        .args(["gen-fixtures", "--utterances", "2", "--speakers", "1", "--seconds", "1.0"])
        .arg("--out")
        .arg(&corpus)));

    let out = run(dsff().args(["fit", "--manifest"]).arg(corpus.join("train.list")));
    assert_eq!(out.status.code(), Some(5), "no weights dir anywhere must fail");

    let weights = root.path().join("weights");
    let cfg_path = root.path().join("cfg.toml");
    std::fs::write(
        &cfg_path,
        format!("[paths]\nweights_dir = \"{}\"\n", weights.display()),
    )
    .unwrap();
    assert_ok(&run(dsff()
        .arg("--config")
        .arg(&cfg_path)
        .args(["fit", "--manifest"])
        .arg(corpus.join("train.list"))));
    assert!(weights.join("decoder.dsff").is_file());
}

#[test]
fn help_names_every_subcommand() {
    let out = run(dsff().arg("--help"));
    assert_ok(&out);
    let text = stdout(&out);
    for sub in ["gen-fixtures", "extract-prosody", "fuse", "fit", "convert", "evaluate", "bench"] {
        assert!(text.contains(sub), "--help must mention {sub}");
    }
}

/// Relative paths in manifests resolve against the manifest's directory, so a
/// corpus directory can be moved wholesale.
#[test]
fn manifests_resolve_paths_relative_to_themselves() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    assert_ok(&run(dsff()
        .args(["gen-fixtures", "--utterances", "2", "--speakers", "1", "--seconds", "1.0"])
        .arg("--out")
        .arg(&corpus)));
    let moved = root.path().join("elsewhere");
    std::fs::rename(&corpus, &moved).unwrap();
    let weights = root.path().join("weights");
    assert_ok(&run(dsff()
        .args(["fit", "--manifest"])
        .arg(moved.join("train.list"))
        .arg("--weights-dir")
        .arg(&weights)));
    assert!(weights.join("decoder.dsff").is_file());
}

/// The weights directory must be self-contained: loading it from a different
/// working directory still converts.
#[test]
fn weights_dir_is_relocatable() {
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    assert_ok(&run(dsff()
        .args(["gen-fixtures", "--utterances", "2", "--speakers", "2", "--seconds", "1.0"])
        .arg("--out")
        .arg(&corpus)));
    let weights = root.path().join("weights");
    assert_ok(&run(dsff()
        .args(["fit", "--manifest"])
        .arg(corpus.join("train.list"))
        .arg("--weights-dir")
        .arg(&weights)));
    let weights2 = root.path().join("weights-moved");
    std::fs::rename(&weights, &weights2).unwrap();
    let out_dir = root.path().join("out");
    let conv = run(dsff()
        .current_dir(root.path())
        .args(["convert", "--manifest"])
        .arg(corpus.join("convert.list"))
        .arg("--weights-dir")
        .arg(&weights2)
        .arg("--out-dir")
        .arg(&out_dir));
    assert_ok(&conv);
    assert!(out_dir.join("utt000.mel.dsff").is_file());
}

fn is_empty_or_absent(p: &Path) -> bool {
    !p.exists() || std::fs::read_dir(p).map(|mut d| d.next().is_none()).unwrap_or(false)
}

#[test]
fn gen_fixtures_rejects_zero_counts_without_writing() {
    let root = tempfile::tempdir().unwrap();
    let target = root.path().join("corpus");
    let out = run(dsff()
        .args(["gen-fixtures", "--utterances", "0"])
        .arg("--out")
        .arg(&target));
    assert_eq!(out.status.code(), Some(5));
    assert!(is_empty_or_absent(&target), "failed gen-fixtures must not leave fixtures behind");
}
