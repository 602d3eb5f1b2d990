//! Spawning external simulators and parsing their scalar output.

use std::io::Read;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One simulator invocation: the parsed scalar and its cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOutcome {
    pub value: f64,
    pub cost_seconds: f64,
    pub wall_seconds: f64,
    pub exit_status: i32,
}

/// Anything that can evaluate the simulator at a fidelity vector. The
/// subprocess client implements this; tests use in-process closures.
pub trait Simulator: Sync {
    fn dim(&self) -> usize;
    fn run(&self, x: &[f64]) -> Result<SimOutcome>;

    /// Cost of a run known ahead of time; `None` when costs can only be
    /// observed by running (measured or reported sources).
    fn predict_cost(&self, x: &[f64]) -> Option<f64> {
        let _ = x;
        None
    }
}

/// How the scalar is recovered from the process output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseRule {
    /// Dot-separated path into a JSON document printed on stdout.
    JsonValue { path: String },
    /// Last nonempty stdout line parsed as a float.
    LastLineFloat,
}

/// Sum of power-law terms `Σ coeff · Π x_i^{exponents[i]}`, the concrete
/// form used for predicted run costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub terms: Vec<CostTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTerm {
    pub coeff: f64,
    pub exponents: Vec<f64>,
}

impl CostModel {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.exponents
                        .iter()
                        .zip(x)
                        .map(|(&e, &v)| v.powf(e))
                        .product::<f64>()
            })
            .sum()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Config("cost model needs at least one term".into()));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.exponents.len() != dim {
                return Err(Error::Config(format!(
                    "cost term {i}: {} exponents for dimension {dim}",
                    t.exponents.len()
                )));
            }
            if !(t.coeff > 0.0) {
                return Err(Error::Config(format!(
                    "cost term {i}: coefficient must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Where run costs come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSource {
    /// Wall-clock time of the child process.
    Measured,
    /// A field of the JSON output, dot-separated path.
    Reported { path: String },
    /// Evaluated from a model of the fidelity vector before running.
    Predicted { model: CostModel },
}

/// Description of an external simulator executable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSpec {
    /// Shell command with placeholders `{x1}`..`{xd}`, each exactly once.
    pub command_template: String,
    pub parse: ParseRule,
    pub timeout_secs: f64,
    pub cost_source: CostSource,
}

impl SimulatorSpec {
    /// Number of fidelity axes, inferred from the placeholders.
    pub fn dim(&self) -> usize {
        let mut d = 0;
        while self.command_template.contains(&format!("{{x{}}}", d + 1)) {
            d += 1;
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Config(
                "command template must contain the placeholder {x1}".into(),
            ));
        }
        for i in 1..=d {
            let ph = format!("{{x{i}}}");
            if self.command_template.matches(&ph).count() != 1 {
                return Err(Error::Config(format!(
                    "placeholder {ph} must appear exactly once"
                )));
            }
        }
        // no gaps and no extras beyond d
        let extra = format!("{{x{}}}", d + 1);
        if self.command_template.contains(&extra) {
            return Err(Error::Config(format!(
                "placeholder {extra} appears but lower indices are missing"
            )));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::Config("timeout must be positive".into()));
        }
        if let CostSource::Predicted { model } = &self.cost_source {
            model.validate(d)?;
        }
        Ok(())
    }

    pub fn command_for(&self, x: &[f64]) -> String {
        let mut cmd = self.command_template.clone();
        for (i, v) in x.iter().enumerate() {
            cmd = cmd.replace(&format!("{{x{}}}", i + 1), &format!("{v}"));
        }
        cmd
    }
}

/// Runs the simulator through `sh -c`, with a timeout, one retry on a
/// nonzero exit, and scalar extraction per the parse rule.
pub struct SubprocessSimulator {
    spec: SimulatorSpec,
    run_id: String,
}

impl SubprocessSimulator {
    pub fn new(spec: SimulatorSpec) -> Result<Self> {
        spec.validate()?;
        let run_id = format!(
            "{}-{}",
            std::process::id(),
            chrono::Utc::now().timestamp_millis()
        );
        Ok(SubprocessSimulator { spec, run_id })
    }

    pub fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn spawn_once(&self, cmd: &str) -> Result<(String, String, i32, f64)> {
        let start = Instant::now();
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .env("EXTRAP_RUN_ID", &self.run_id)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let status = wait_with_timeout(&mut child, self.spec.timeout_secs)?;
        let wall = start.elapsed().as_secs_f64();
        let Some(status) = status else {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Timeout {
                command: cmd.to_string(),
                timeout_secs: self.spec.timeout_secs,
            });
        };
        let mut stdout = String::new();
        let mut stderr = String::new();
        if let Some(mut out) = child.stdout.take() {
            let _ = out.read_to_string(&mut stdout);
        }
        if let Some(mut err) = child.stderr.take() {
            let _ = err.read_to_string(&mut stderr);
        }
        Ok((stdout, stderr, status, wall))
    }

    fn parse_value(&self, stdout: &str) -> Result<f64> {
        match &self.spec.parse {
            ParseRule::JsonValue { path } => {
                let doc: serde_json::Value =
                    serde_json::from_str(stdout.trim()).map_err(|e| Error::Parse {
                        reason: format!("stdout is not JSON: {e}"),
                        output: stdout.to_string(),
                    })?;
                json_path(&doc, path)
                    .and_then(serde_json::Value::as_f64)
                    .ok_or_else(|| Error::Parse {
                        reason: format!("no numeric field at path '{path}'"),
                        output: stdout.to_string(),
                    })
            }
            ParseRule::LastLineFloat => {
                let line = stdout
                    .lines()
                    .rev()
                    .find(|l| !l.trim().is_empty())
                    .ok_or_else(|| Error::Parse {
                        reason: "stdout is empty".into(),
                        output: stdout.to_string(),
                    })?;
                line.trim().parse::<f64>().map_err(|e| Error::Parse {
                    reason: format!("last line '{}' is not a float: {e}", line.trim()),
                    output: stdout.to_string(),
                })
            }
        }
    }

    fn reported_cost(&self, stdout: &str, path: &str) -> Result<f64> {
        let doc: serde_json::Value =
            serde_json::from_str(stdout.trim()).map_err(|e| Error::Parse {
                reason: format!("stdout is not JSON (needed for reported cost): {e}"),
                output: stdout.to_string(),
            })?;
        json_path(&doc, path)
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| Error::Parse {
                reason: format!("no numeric cost field at path '{path}'"),
                output: stdout.to_string(),
            })
    }
}

fn json_path<'a>(doc: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    let mut cur = doc;
    for part in path.split('.') {
        cur = cur.get(part)?;
    }
    Some(cur)
}

fn wait_with_timeout(child: &mut Child, timeout_secs: f64) -> Result<Option<i32>> {
    let deadline = Instant::now() + Duration::from_secs_f64(timeout_secs);
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status.code().unwrap_or(-1)));
        }
        if Instant::now() >= deadline {
            return Ok(None);
        }
        std::thread::sleep(Duration::from_millis(5));
    }
}

impl Simulator for SubprocessSimulator {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn predict_cost(&self, x: &[f64]) -> Option<f64> {
        match &self.spec.cost_source {
            CostSource::Predicted { model } => Some(model.eval(x)),
            _ => None,
        }
    }

    fn run(&self, x: &[f64]) -> Result<SimOutcome> {
        if x.len() != self.spec.dim() {
            return Err(Error::Config(format!(
                "fidelity has {} coordinates, template expects {}",
                x.len(),
                self.spec.dim()
            )));
        }
        if x.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config(
                "fidelities passed to the simulator must be positive".into(),
            ));
        }
        let cmd = self.spec.command_for(x);
        let mut attempt = self.spawn_once(&cmd)?;
        if attempt.2 != 0 {
            attempt = self.spawn_once(&cmd)?;
        }
        let (stdout, stderr, status, wall) = attempt;
        if status != 0 {
            return Err(Error::SimulatorFailed {
                command: cmd,
                status: Some(status),
                output: format!("stdout:\n{stdout}\nstderr:\n{stderr}"),
            });
        }
        let value = self.parse_value(&stdout)?;
        let cost_seconds = match &self.spec.cost_source {
            CostSource::Measured => wall,
            CostSource::Reported { path } => self.reported_cost(&stdout, path)?,
            CostSource::Predicted { model } => model.eval(x),
        };
        Ok(SimOutcome {
            value,
            cost_seconds,
            wall_seconds: wall,
            exit_status: status,
        })
    }
}
