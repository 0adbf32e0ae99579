//! Plain-text checkpoints.
//!
//! ```text
//! codesign-checkpoint v1
//! iteration <completed iterations>
//! dims <d_in> <h1> <h2> <N>
//! params <count>
//! <one value per line>
//! sigma_sq <value>
//! locations <N> / shadow <N> / accumulators <N>
//! adam_t <t>
//! lr <lr_theta> <lr_x>
//! theta_m, theta_v <count> / x_m, x_v <N>
//! end
//! ```
//!
//! Floats are written with 17 significant digits so they round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::actuation::ActuatorSet;
use crate::error::{Error, Result};
use crate::optimizer::{AdamMoments, OptimizerState};
use crate::policy::PolicyParams;

pub const CHECKPOINT_HEADER: &str = "codesign-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub params: PolicyParams,
    pub actuators: ActuatorSet,
    pub optimizer: OptimizerState,
}

fn push_vec(out: &mut String, key: &str, v: &[f64]) {
    writeln!(out, "{key} {}", v.len()).unwrap();
    for x in v {
        writeln!(out, "{x:.16e}").unwrap();
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = self.params.dims();
        let o = &self.optimizer;
        writeln!(out, "{CHECKPOINT_HEADER}").unwrap();
        writeln!(out, "iteration {}", self.iteration).unwrap();
        writeln!(out, "dims {} {} {} {}", d[0], d[1], d[2], d[3]).unwrap();
        push_vec(&mut out, "params", self.params.as_slice());
        writeln!(out, "sigma_sq {:.16e}", self.actuators.sigma_sq).unwrap();
        push_vec(&mut out, "locations", &self.actuators.locations);
        push_vec(&mut out, "shadow", &o.shadow);
        push_vec(&mut out, "accumulators", &o.accumulators);
        writeln!(out, "adam_t {}", o.t).unwrap();
        writeln!(out, "lr {:.16e} {:.16e}", o.lr_theta, o.lr_x).unwrap();
        push_vec(&mut out, "theta_m", &o.theta.m);
        push_vec(&mut out, "theta_v", &o.theta.v);
        push_vec(&mut out, "x_m", &o.x.m);
        push_vec(&mut out, "x_v", &o.x.v);
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Reader {
            lines: text.lines().enumerate(),
        };
        let header = r.line()?;
        if header != CHECKPOINT_HEADER {
            return Err(Error::Checkpoint(format!("unsupported header `{header}`")));
        }
        let iteration = r.scalar::<u64>("iteration")?;
        let dims = r.fields("dims", 4)?;
        let dims: Vec<usize> = dims
            .iter()
            .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("bad dim `{s}`"))))
            .collect::<Result<_>>()?;
        let dims = [dims[0], dims[1], dims[2], dims[3]];
        let params = PolicyParams::from_flat(dims, r.vector("params")?)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let sigma_sq = r.scalar::<f64>("sigma_sq")?;
        let locations = r.vector("locations")?;
        let shadow = r.vector("shadow")?;
        let accumulators = r.vector("accumulators")?;
        let t = r.scalar::<u64>("adam_t")?;
        let lr = r.fields("lr", 2)?;
        let lr: Vec<f64> = lr
            .iter()
            .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("bad rate `{s}`"))))
            .collect::<Result<_>>()?;
        let theta = AdamMoments {
            m: r.vector("theta_m")?,
            v: r.vector("theta_v")?,
        };
        let x = AdamMoments {
            m: r.vector("x_m")?,
            v: r.vector("x_v")?,
        };
        if r.line()? != "end" {
            return Err(Error::Checkpoint("missing `end` marker".into()));
        }
        let n = locations.len();
        if dims[3] != n || shadow.len() != n || accumulators.len() != n || x.len() != n {
            return Err(Error::Checkpoint("actuator vectors disagree in length".into()));
        }
        if theta.m.len() != params.len() || theta.v.len() != params.len() || x.v.len() != n {
            return Err(Error::Checkpoint("moment vectors disagree in length".into()));
        }
        let actuators =
            ActuatorSet::new(locations, sigma_sq).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self {
            iteration,
            params,
            actuators,
            optimizer: OptimizerState {
                theta,
                x,
                t,
                lr_theta: lr[0],
                lr_x: lr[1],
                accumulators,
                shadow,
            },
        })
    }

    /// Writes through a temporary file so a crash never leaves a partial
    /// checkpoint under the final name.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_text())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

struct Reader<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: I,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Reader<'a, I> {
    fn line(&mut self) -> Result<&'a str> {
        self.lines
            .next()
            .map(|(_, l)| l.trim())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))
    }

    fn fields(&mut self, key: &str, n: usize) -> Result<Vec<&'a str>> {
        let line = self.line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Checkpoint(format!("expected `{key}`, found `{line}`")));
        }
        let rest: Vec<&str> = parts.collect();
        if rest.len() != n {
            return Err(Error::Checkpoint(format!("`{key}` expects {n} values")));
        }
        Ok(rest)
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.fields(key, 1)?[0];
        v.parse()
            .map_err(|_| Error::Checkpoint(format!("bad value `{v}` for `{key}`")))
    }

    fn vector(&mut self, key: &str) -> Result<Vec<f64>> {
        let n: usize = self.scalar(key)?;
        (0..n)
            .map(|_| {
                let l = self.line()?;
                l.parse::<f64>()
                    .map_err(|_| Error::Checkpoint(format!("bad number `{l}` in `{key}`")))
            })
            .collect()
    }
}
