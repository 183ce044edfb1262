//! In-memory artifact set, flushed to disk only after a successful run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Plain decimal inside `[1e-4, 1e15)`, scientific outside; always
/// round-trips.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A CSV table with a header row and `\n` line endings.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let line: Vec<String> = cells.iter().map(Cell::render).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }
}

pub enum Cell {
    F(f64),
    I(usize),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => num(*x),
            Cell::I(i) => i.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'a str,
    version: &'a str,
    kind: String,
    seed: u64,
    config_sha256: String,
    created_unix: u64,
    files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Artifacts {
    pub fn add(&mut self, path: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((path.to_string(), contents.into()));
    }

    pub fn table(&mut self, path: &str, table: Table) {
        self.add(path, table.text);
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(p, _)| p.as_str())
    }

    /// A matplotlib script that plots the first two columns of every CSV.
    fn plot_script(&self) -> String {
        let mut s = String::from(
            "import csv\nimport os\nimport matplotlib.pyplot as plt\n\nHERE = os.path.dirname(os.path.abspath(__file__))\nFILES = [\n",
        );
        for p in self.paths().filter(|p| p.ends_with(".csv")) {
            let _ = writeln!(s, "    {p:?},");
        }
        s.push_str(
            "]\n\nfor name in FILES:\n    with open(os.path.join(HERE, name)) as fh:\n        rows = list(csv.reader(fh))\n    head, body = rows[0], rows[1:]\n    if len(head) < 2 or not body:\n        continue\n    try:\n        xs = [float(r[0]) for r in body]\n        fig, ax = plt.subplots()\n        for k in range(1, len(head)):\n            try:\n                ax.plot(xs, [float(r[k]) for r in body], label=head[k])\n            except ValueError:\n                pass\n    except ValueError:\n        continue\n    ax.set_xlabel(head[0])\n    ax.legend()\n    ax.set_title(name)\n    fig.savefig(os.path.join(HERE, name[:-4] + \".png\"))\n    plt.close(fig)\n",
        );
        s
    }

    /// Writes every file plus `plot.py` and `manifest.toml` under `dir`.
    pub fn write(mut self, dir: &Path, kind: &str, seed: u64, config: &[u8]) -> std::io::Result<Vec<PathBuf>> {
        let plot = self.plot_script();
        self.add("plot.py", plot);
        let files = self
            .files
            .iter()
            .map(|(p, b)| FileEntry { path: p.clone(), sha256: hex_digest(b), bytes: b.len() })
            .collect();
        let manifest = Manifest {
            software: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            kind: kind.to_string(),
            seed,
            config_sha256: hex_digest(config),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            files,
        };
        let text = toml::to_string(&manifest).map_err(std::io::Error::other)?;
        self.add("manifest.toml", text);
        let mut written = Vec::new();
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}
