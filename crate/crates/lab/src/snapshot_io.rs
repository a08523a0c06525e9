//! Snapshot text format.
//!
//! Line-oriented, one `key value` pair per line in a fixed order; arrays are a
//! `key <len>` line followed by one line of space-separated values. Floats are
//! written as `{:.16e}` (17 significant digits), which round-trips every
//! finite `f64` bit-exactly. The first line is `nmps-snapshot <version>`.
//!
//! ```text
//! nmps-snapshot 1
//! method NMPS_X_sep^ex
//! env fourrooms
//! rho 1.0000000000000000e-2
//! seed 1
//! step 50000
//! agent successor
//! features.feature_dim 10
//! ...
//! ```
//!
//! `docs/snapshot.md` lists every field of both agent kinds.

use std::fmt::Write as _;
use std::path::Path;

use nmps_core::explorer::{ActionValues, SkillDiscriminator};
use nmps_core::features::{Activation, FeatureMap};
use nmps_core::pipeline::{RunMeta, Snapshot, SnapshotAgent, SNAPSHOT_FORMAT_VERSION};
use nmps_core::sf_agent::{SuccessorRepr, SuccessorTable};

use crate::error::{io_err, LabError, Result};

const MAGIC: &str = "nmps-snapshot";

/// A malformed snapshot; `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

type Parsed<T> = std::result::Result<T, ParseError>;

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Writer {
    out: String,
}

impl Writer {
    fn field(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.out, "{key} {value}").expect("writing to a string");
    }

    fn real(&mut self, key: &str, value: f64) {
        self.field(key, float(value));
    }

    fn array(&mut self, key: &str, values: &[f64]) {
        self.field(key, values.len());
        let line: Vec<String> = values.iter().map(|&v| float(v)).collect();
        writeln!(self.out, "{}", line.join(" ")).expect("writing to a string");
    }

    fn features(&mut self, f: &FeatureMap) {
        self.field("features.feature_dim", f.feature_dim);
        self.field("features.obs_dim", f.obs_dim);
        self.field("features.activation", f.activation.name());
        self.field("features.trainable", f.trainable);
        self.real("features.learning_rate", f.learning_rate);
        self.array("features.weights", &f.weights);
    }

    fn successors(&mut self, s: &SuccessorTable) {
        self.field("successors.num_actions", s.num_actions);
        self.field("successors.feature_dim", s.feature_dim);
        self.real("successors.gamma", s.gamma);
        self.real("successors.learning_rate", s.learning_rate);
        match &s.repr {
            SuccessorRepr::Tabular { num_states, psi } => {
                self.field("successors.repr", "tabular");
                self.field("successors.size", num_states);
                self.array("successors.values", psi);
            }
            SuccessorRepr::Linear { input_dim, weights } => {
                self.field("successors.repr", "linear");
                self.field("successors.size", input_dim);
                self.array("successors.values", weights);
            }
        }
    }

    fn discriminator(&mut self, d: &SkillDiscriminator) {
        self.field("discriminator.num_skills", d.num_skills);
        self.field("discriminator.obs_dim", d.obs_dim);
        self.real("discriminator.learning_rate", d.learning_rate);
        self.array("discriminator.weights", &d.weights);
    }

    fn q(&mut self, q: &ActionValues) {
        let (repr, size, contexts, actions) = match q {
            ActionValues::Tabular {
                num_states,
                contexts,
                num_actions,
                ..
            } => ("tabular", num_states, contexts, num_actions),
            ActionValues::Linear {
                input_dim,
                contexts,
                num_actions,
                ..
            } => ("linear", input_dim, contexts, num_actions),
        };
        self.field("q.repr", repr);
        self.field("q.size", size);
        self.field("q.contexts", contexts);
        self.field("q.num_actions", actions);
        self.array("q.values", q.parameters());
    }
}

/// Renders a snapshot in the text format.
pub fn to_text(s: &Snapshot) -> String {
    let mut w = Writer { out: String::new() };
    writeln!(w.out, "{MAGIC} {}", s.format_version).expect("writing to a string");
    w.field("method", &s.meta.method);
    w.field("env", &s.meta.env);
    w.real("rho", s.meta.rho);
    w.field("seed", s.meta.seed);
    w.field("step", s.meta.step);
    match &s.agent {
        SnapshotAgent::Successor { features, successors } => {
            w.field("agent", "successor");
            w.features(features);
            w.successors(successors);
        }
        SnapshotAgent::Skill {
            discriminator,
            q,
            gamma,
            learning_rate,
        } => {
            w.field("agent", "skill");
            w.real("gamma", *gamma);
            w.real("learning_rate", *learning_rate);
            w.discriminator(discriminator);
            w.q(q);
        }
    }
    w.out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: String) -> ParseError {
        ParseError {
            line: self.line,
            message,
        }
    }

    fn next_line(&mut self) -> Parsed<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of file".into())),
        }
    }

    fn field(&mut self, key: &str) -> Parsed<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected `{key}`, found `{line}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Parsed<T> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }

    fn array(&mut self, key: &str) -> Parsed<Vec<f64>> {
        let n: usize = self.parse(key)?;
        let line = self.next_line()?;
        let values = line
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad number `{t}` in `{key}`"))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.len() != n {
            return Err(self.err(format!("`{key}` declares {n} values, found {}", values.len())));
        }
        Ok(values)
    }

    fn expect_len(&self, key: &str, got: usize, want: usize) -> Parsed<()> {
        if got == want {
            Ok(())
        } else {
            Err(self.err(format!("`{key}` has {got} values, shape needs {want}")))
        }
    }

    fn features(&mut self) -> Parsed<FeatureMap> {
        let feature_dim = self.parse("features.feature_dim")?;
        let obs_dim = self.parse("features.obs_dim")?;
        let act = self.field("features.activation")?;
        let activation = Activation::parse(act).ok_or_else(|| self.err(format!("unknown activation `{act}`")))?;
        let trainable = self.parse("features.trainable")?;
        let learning_rate = self.parse("features.learning_rate")?;
        let weights = self.array("features.weights")?;
        self.expect_len("features.weights", weights.len(), feature_dim * obs_dim)?;
        Ok(FeatureMap {
            feature_dim,
            obs_dim,
            weights,
            activation,
            trainable,
            learning_rate,
        })
    }

    fn successors(&mut self) -> Parsed<SuccessorTable> {
        let num_actions: usize = self.parse("successors.num_actions")?;
        let feature_dim: usize = self.parse("successors.feature_dim")?;
        let gamma = self.parse("successors.gamma")?;
        let learning_rate = self.parse("successors.learning_rate")?;
        let repr = self.field("successors.repr")?;
        let size: usize = self.parse("successors.size")?;
        let values = self.array("successors.values")?;
        let repr = match repr {
            "tabular" => {
                self.expect_len("successors.values", values.len(), size * num_actions * feature_dim)?;
                SuccessorRepr::Tabular {
                    num_states: size,
                    psi: values,
                }
            }
            "linear" => {
                self.expect_len("successors.values", values.len(), num_actions * feature_dim * (size + 1))?;
                SuccessorRepr::Linear {
                    input_dim: size,
                    weights: values,
                }
            }
            other => return Err(self.err(format!("unknown representation `{other}`"))),
        };
        Ok(SuccessorTable {
            repr,
            num_actions,
            feature_dim,
            gamma,
            learning_rate,
        })
    }

    fn discriminator(&mut self) -> Parsed<SkillDiscriminator> {
        let num_skills = self.parse("discriminator.num_skills")?;
        let obs_dim = self.parse("discriminator.obs_dim")?;
        let learning_rate = self.parse("discriminator.learning_rate")?;
        let weights = self.array("discriminator.weights")?;
        self.expect_len("discriminator.weights", weights.len(), num_skills * obs_dim)?;
        Ok(SkillDiscriminator {
            num_skills,
            obs_dim,
            weights,
            learning_rate,
        })
    }

    fn q(&mut self) -> Parsed<ActionValues> {
        let repr = self.field("q.repr")?;
        let size: usize = self.parse("q.size")?;
        let contexts: usize = self.parse("q.contexts")?;
        let num_actions: usize = self.parse("q.num_actions")?;
        let values = self.array("q.values")?;
        match repr {
            "tabular" => {
                self.expect_len("q.values", values.len(), size * contexts * num_actions)?;
                Ok(ActionValues::Tabular {
                    num_states: size,
                    contexts,
                    num_actions,
                    q: values,
                })
            }
            "linear" => {
                self.expect_len("q.values", values.len(), contexts * num_actions * (size + 1))?;
                Ok(ActionValues::Linear {
                    input_dim: size,
                    contexts,
                    num_actions,
                    weights: values,
                })
            }
            other => Err(self.err(format!("unknown representation `{other}`"))),
        }
    }
}

/// Parses the text format.
pub fn from_text(text: &str) -> Parsed<Snapshot> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
        line: 0,
    };
    let header = r.next_line()?;
    let version: u32 = match header.split_once(' ') {
        Some((MAGIC, v)) => v.parse().map_err(|_| r.err(format!("bad version `{v}`")))?,
        _ => return Err(r.err(format!("not a snapshot file (expected `{MAGIC} <version>`)"))),
    };
    if version != SNAPSHOT_FORMAT_VERSION {
        return Err(r.err(format!(
            "unsupported snapshot version {version} (this build reads {SNAPSHOT_FORMAT_VERSION})"
        )));
    }
    let meta = RunMeta {
        method: r.field("method")?.to_string(),
        env: r.field("env")?.to_string(),
        rho: r.parse("rho")?,
        seed: r.parse("seed")?,
        step: r.parse("step")?,
    };
    let agent = match r.field("agent")? {
        "successor" => SnapshotAgent::Successor {
            features: r.features()?,
            successors: r.successors()?,
        },
        "skill" => {
            let gamma = r.parse("gamma")?;
            let learning_rate = r.parse("learning_rate")?;
            SnapshotAgent::Skill {
                discriminator: r.discriminator()?,
                q: r.q()?,
                gamma,
                learning_rate,
            }
        }
        other => return Err(r.err(format!("unknown agent kind `{other}`"))),
    };
    if let Some((i, extra)) = r.lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(ParseError {
            line: i + 1,
            message: format!("trailing content `{extra}`"),
        });
    }
    Ok(Snapshot {
        format_version: version,
        meta,
        agent,
    })
}

pub fn write(path: &Path, snapshot: &Snapshot) -> Result<()> {
    std::fs::write(path, to_text(snapshot)).map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    from_text(&text).map_err(|e| LabError::Parse {
        path: path.to_path_buf(),
        line: e.line,
        message: e.message,
    })
}
