#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Small but learnable experiment settings for the synthetic corpus.
pub const DESK_CONFIG: &str = r#"
seed = 11
[split]
dev_relation_count = 5
[encoder]
hash_dim = 8192
proj_dim = 32
[train]
optimizer = "adam"
epochs = 2
eval_every = 250
"#;

/// A temporary output directory plus an experiment config inside it.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("exp.toml"), config).unwrap();
        Workspace { dir }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self) -> PathBuf {
        self.root().join("out")
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.out().join(name)
    }

    pub fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.file(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    pub fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    /// Runs `fsrc --config exp.toml --out out <args>`.
    pub fn run(&self, args: &[&str]) -> Output {
        self.run_env(args, &[])
    }

    pub fn run_env(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let config = self.root().join("exp.toml");
        let out = self.out();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fsrc"));
        cmd.current_dir(self.root())
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(args)
            .env_remove("FSRC_BRIDGE_CMD")
            .env("RUST_LOG", "warn");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    /// Runs a command that must succeed and returns its stdout.
    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "fsrc {args:?} failed with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// synth, ingest, split, then train/dev/test pairs.
    pub fn prepare(&self) {
        self.ok(&["synth"]);
        self.ok(&["ingest", self.file("synth.jsonl").to_str().unwrap()]);
        self.ok(&["split"]);
        self.ok(&["pairs", "--part", "train", "--size", "2000"]);
        self.ok(&["pairs", "--part", "dev", "--size", "500"]);
        self.ok(&["pairs", "--part", "test", "--size", "1000"]);
    }
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
