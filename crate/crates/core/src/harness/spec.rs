use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{invalid, MoltError, Result};
use crate::grid::BoundaryCondition;
use crate::reaction::{FHNParams, ImexScheme};
use crate::resolvent::BetaPolicy;
use crate::splitting::SplitMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `u_t = gamma u_xx`, `u(x, 0) = sin x`.
    Heat1D,
    /// `u_t = gamma Lap u`, `u(x, y, 0) = sin x sin y`.
    Heat2D,
    /// Allen-Cahn traveling wave on a line.
    AllenCahn1D,
    /// Allen-Cahn with a circular interface.
    AllenCahn2D,
    /// FitzHugh-Nagumo on a periodic square.
    FitzHughNagumo,
}

impl ProblemKind {
    pub fn ndim(self) -> usize {
        match self {
            Self::Heat1D | Self::AllenCahn1D => 1,
            _ => 2,
        }
    }

    pub fn species(self) -> usize {
        if self == Self::FitzHughNagumo {
            2
        } else {
            1
        }
    }

    pub fn has_exact_solution(self) -> bool {
        matches!(self, Self::Heat1D | Self::Heat2D | Self::AllenCahn1D)
    }
}

impl FromStr for ProblemKind {
    type Err = MoltError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat1d" => Ok(Self::Heat1D),
            "heat2d" => Ok(Self::Heat2D),
            "ac1d" => Ok(Self::AllenCahn1D),
            "ac2d" => Ok(Self::AllenCahn2D),
            "fhn" => Ok(Self::FitzHughNagumo),
            other => Err(invalid(format!("unknown problem `{other}`"))),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Heat1D => "heat1d",
            Self::Heat2D => "heat2d",
            Self::AllenCahn1D => "ac1d",
            Self::AllenCahn2D => "ac2d",
            Self::FitzHughNagumo => "fhn",
        })
    }
}

/// How a refinement study measures error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    /// Against the exact solution at the final time.
    ExactError,
    /// `max |u_dt - u_{dt/2}|` at the final time.
    SelfConvergence,
}

impl FromStr for RefinementMode {
    type Err = MoltError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::ExactError),
            "self" => Ok(Self::SelfConvergence),
            other => Err(invalid(format!("unknown refinement mode `{other}`"))),
        }
    }
}

impl fmt::Display for RefinementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExactError => "exact",
            Self::SelfConvergence => "self",
        })
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub problem: ProblemKind,
    /// `(a, b)` per axis.
    pub domain: Vec<(f64, f64)>,
    pub cells: Vec<usize>,
    pub bc: BoundaryCondition,
    pub order: usize,
    pub policy: BetaPolicy,
    pub spatial_order: usize,
    pub split: SplitMode,
    /// Reaction rule; `None` pairs it with `order`.
    pub scheme: Option<ImexScheme>,
    pub dt: f64,
    pub t_end: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Initial interface radius of the circle problem.
    pub radius: f64,
    pub fhn: FHNParams,
    pub tol: f64,
    pub max_iter: usize,
    pub outputs: Vec<f64>,
    pub track_radius: bool,
    pub ladder: Vec<f64>,
    pub mode: RefinementMode,
}

pub const PRESETS: &[&str] = &[
    "heat1d",
    "heat2d",
    "ac1d",
    "ac2d",
    "ac_circle",
    "ac_circle_ladder",
    "fhn",
];

fn halvings(first: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| first / f64::powi(2.0, k as i32))
        .collect()
}

impl ProblemSpec {
    fn base(problem: ProblemKind) -> Self {
        Self {
            problem,
            domain: vec![(0.0, 1.0); problem.ndim()],
            cells: vec![64; problem.ndim()],
            bc: BoundaryCondition::Periodic,
            order: 2,
            policy: BetaPolicy::StiffDecay,
            spatial_order: 4,
            split: SplitMode::Composed,
            scheme: None,
            dt: 0.01,
            t_end: 1.0,
            gamma: 1.0,
            epsilon: 0.05,
            radius: 0.25,
            fhn: FHNParams::default(),
            tol: 1e-12,
            max_iter: 100,
            outputs: Vec::new(),
            track_radius: false,
            ladder: Vec::new(),
            mode: if problem.has_exact_solution() {
                RefinementMode::ExactError
            } else {
                RefinementMode::SelfConvergence
            },
        }
    }

    /// Built-in experiment setups.
    pub fn preset(name: &str) -> Result<Self> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let spec = match name {
            "heat1d" => Self {
                domain: vec![(0.0, two_pi)],
                cells: vec![1024],
                gamma: 0.18 * 0.18,
                dt: 0.1,
                t_end: 4.0,
                ladder: halvings(0.1, 5),
                ..Self::base(ProblemKind::Heat1D)
            },
            "heat2d" => Self {
                domain: vec![(0.0, two_pi); 2],
                cells: vec![512; 2],
                gamma: 0.18 * 0.18,
                dt: 0.1,
                t_end: 1.0,
                ladder: halvings(0.1, 4),
                ..Self::base(ProblemKind::Heat2D)
            },
            "ac1d" => Self {
                domain: vec![(0.0, 4.0)],
                cells: vec![4096],
                bc: BoundaryCondition::HomogeneousNeumann,
                epsilon: 0.03 * 2f64.sqrt(),
                dt: 0.025,
                t_end: 1.0,
                ladder: halvings(0.025, 5),
                ..Self::base(ProblemKind::AllenCahn1D)
            },
            "ac2d" => Self {
                cells: vec![512; 2],
                bc: BoundaryCondition::HomogeneousNeumann,
                epsilon: 0.05,
                dt: 0.00625,
                t_end: 0.5,
                ladder: halvings(0.00625, 4),
                ..Self::base(ProblemKind::AllenCahn2D)
            },
            "ac_circle" => Self {
                cells: vec![256; 2],
                bc: BoundaryCondition::HomogeneousNeumann,
                epsilon: 0.05,
                dt: 0.0256,
                t_end: 10.24,
                outputs: vec![2.56, 5.12, 10.24],
                track_radius: true,
                ..Self::base(ProblemKind::AllenCahn2D)
            },
            "ac_circle_ladder" => Self {
                cells: vec![256; 2],
                bc: BoundaryCondition::HomogeneousNeumann,
                epsilon: 0.01,
                dt: 0.064,
                t_end: 256.0,
                track_radius: true,
                ladder: vec![0.256, 0.128, 0.064],
                ..Self::base(ProblemKind::AllenCahn2D)
            },
            "fhn" => Self {
                domain: vec![(-20.0, 20.0); 2],
                cells: vec![256; 2],
                dt: 0.01,
                t_end: 4.0,
                max_iter: 200,
                outputs: vec![1.0, 2.0, 4.0],
                ..Self::base(ProblemKind::FitzHughNagumo)
            },
            other => {
                return Err(invalid(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let nd = self.problem.ndim();
        if self.domain.len() != nd || self.cells.len() != nd {
            return Err(invalid(format!("{} needs {nd} axes", self.problem)));
        }
        for &(a, b) in &self.domain {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(invalid(format!("bad interval [{a}, {b}]")));
            }
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(invalid("dt and t_end must be > 0"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(invalid("tol must be > 0 and max_iter >= 1"));
        }
        if !(self.gamma >= 0.0) || !(self.epsilon > 0.0) || !(self.radius > 0.0) {
            return Err(invalid("gamma must be >= 0, epsilon and radius > 0"));
        }
        self.fhn.validate()?;
        if self.problem == ProblemKind::FitzHughNagumo && self.bc != BoundaryCondition::Periodic {
            return Err(invalid("the FitzHugh-Nagumo setup is periodic"));
        }
        if self.track_radius && self.problem != ProblemKind::AllenCahn2D {
            return Err(invalid("radius tracking applies to ac2d only"));
        }
        if self.mode == RefinementMode::ExactError && !self.problem.has_exact_solution() {
            return Err(invalid(format!("{} has no exact solution", self.problem)));
        }
        if self.outputs.iter().any(|t| !(*t >= 0.0) || *t > self.t_end) {
            return Err(invalid("output times must lie in [0, t_end]"));
        }
        Ok(())
    }

    /// Wave speed `s = 3 eps / sqrt 2` of the traveling-wave problem.
    pub fn wave_speed(&self) -> f64 {
        3.0 * self.epsilon / 2f64.sqrt()
    }

    /// Delay `T_s = 1.5 - s T`, placing the front at `x = 1.5` at `t_end`.
    pub fn wave_delay(&self) -> f64 {
        1.5 - self.wave_speed() * self.t_end
    }

    /// Center of the domain.
    pub fn center(&self) -> Vec<f64> {
        self.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Parses `key = value` lines on top of `preset` (if given) or the
    /// problem defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| MoltError::SpecParse {
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let find = |key: &str| pairs.iter().find(|(_, k, _)| k == key);
        let mut spec = match (find("preset"), find("problem")) {
            (Some((line, _, v)), _) => Self::preset(v).map_err(|e| MoltError::SpecParse {
                line: *line,
                message: e.to_string(),
            })?,
            (None, Some((line, _, v))) => {
                Self::base(v.parse().map_err(|e: MoltError| MoltError::SpecParse {
                    line: *line,
                    message: e.to_string(),
                })?)
            }
            (None, None) => {
                return Err(MoltError::SpecParse {
                    line: 0,
                    message: "spec needs a `preset` or `problem` key".into(),
                })
            }
        };
        for (line, key, value) in &pairs {
            spec.set(key, value).map_err(|e| MoltError::SpecParse {
                line: *line,
                message: e.to_string(),
            })?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one key; the names match the manifest written by [`Self::manifest`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| invalid(format!("`{key}`: cannot parse `{v}`")))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        match key {
            "preset" => {}
            "problem" => {
                let p: ProblemKind = value.parse()?;
                if p != self.problem {
                    return Err(invalid(format!("preset is {}, not {p}", self.problem)));
                }
            }
            "domain" => {
                let v: Vec<f64> = list(key, value)?;
                if !v.len().is_multiple_of(2) {
                    return Err(invalid("`domain` takes pairs `a b` per axis"));
                }
                self.domain = v.chunks(2).map(|c| (c[0], c[1])).collect();
            }
            "cells" => self.cells = list(key, value)?,
            "bc" => self.bc = value.parse()?,
            "order" => self.order = num(key, value)?,
            "policy" => self.policy = value.parse()?,
            "spatial_order" => self.spatial_order = num(key, value)?,
            "split" => self.split = value.parse()?,
            "scheme" => {
                self.scheme = match value {
                    "auto" => None,
                    "right_endpoint" => Some(ImexScheme::BackwardEuler),
                    "trapezoidal" => Some(ImexScheme::Trapezoidal),
                    "hermite_birkhoff" => Some(ImexScheme::HermiteBirkhoff),
                    other => return Err(invalid(format!("unknown scheme `{other}`"))),
                }
            }
            "dt" => self.dt = num(key, value)?,
            "t_end" => self.t_end = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "radius" => self.radius = num(key, value)?,
            "fhn_du" => self.fhn.du = num(key, value)?,
            "fhn_dv" => self.fhn.dv = num(key, value)?,
            "fhn_a" => self.fhn.a = num(key, value)?,
            "fhn_c" => self.fhn.c = num(key, value)?,
            "fhn_d" => self.fhn.d = num(key, value)?,
            "fhn_delta" => self.fhn.delta = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "max_iter" => self.max_iter = num(key, value)?,
            "outputs" => self.outputs = list(key, value)?,
            "track_radius" => self.track_radius = num(key, value)?,
            "ladder" => self.ladder = list(key, value)?,
            "mode" => self.mode = value.parse()?,
            other => return Err(invalid(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Resolved parameters as `key = value` lines that [`Self::parse`] reads back.
    pub fn manifest(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let scheme = match self.scheme {
            None => "auto",
            Some(ImexScheme::BackwardEuler) => "right_endpoint",
            Some(ImexScheme::Trapezoidal) => "trapezoidal",
            Some(ImexScheme::HermiteBirkhoff) => "hermite_birkhoff",
        };
        let domain: Vec<f64> = self.domain.iter().flat_map(|&(a, b)| [a, b]).collect();
        let cells: Vec<String> = self.cells.iter().map(|c| c.to_string()).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("problem", self.problem.to_string());
        kv("domain", join(&domain));
        kv("cells", cells.join(" "));
        kv("bc", self.bc.to_string());
        kv("order", self.order.to_string());
        kv("policy", self.policy.to_string());
        kv("spatial_order", self.spatial_order.to_string());
        kv("split", self.split.to_string());
        kv("scheme", scheme.to_string());
        kv("dt", self.dt.to_string());
        kv("t_end", self.t_end.to_string());
        kv("gamma", self.gamma.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("radius", self.radius.to_string());
        kv("fhn_du", self.fhn.du.to_string());
        kv("fhn_dv", self.fhn.dv.to_string());
        kv("fhn_a", self.fhn.a.to_string());
        kv("fhn_c", self.fhn.c.to_string());
        kv("fhn_d", self.fhn.d.to_string());
        kv("fhn_delta", self.fhn.delta.to_string());
        kv("tol", self.tol.to_string());
        kv("max_iter", self.max_iter.to_string());
        kv("outputs", join(&self.outputs));
        kv("track_radius", self.track_radius.to_string());
        kv("ladder", join(&self.ladder));
        kv("mode", self.mode.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let spec = ProblemSpec::preset(name).unwrap();
            let back = ProblemSpec::parse(&spec.manifest()).unwrap();
            assert_eq!(spec, back, "{name}");
        }
    }

    #[test]
    fn wave_constants() {
        let spec = ProblemSpec::preset("ac1d").unwrap();
        assert!((spec.wave_speed() - 0.09).abs() < 1e-15);
        assert!((spec.wave_delay() - 1.41).abs() < 1e-14);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let text = "# heat\npreset = heat1d\norder = 3 # cubic\ncells = 256\nladder = 0.1, 0.05\n";
        let spec = ProblemSpec::parse(text).unwrap();
        assert_eq!(spec.order, 3);
        assert_eq!(spec.cells, vec![256]);
        assert_eq!(spec.ladder, vec![0.1, 0.05]);
        assert_eq!(spec.gamma, 0.18 * 0.18);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ProblemSpec::parse("preset = heat1d\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, MoltError::SpecParse { line: 3, .. }), "{err}");
        let err = ProblemSpec::parse("preset = heat1d\norder\n").unwrap_err();
        assert!(matches!(err, MoltError::SpecParse { line: 2, .. }));
        assert!(ProblemSpec::parse("order = 2\n").is_err());
        assert!(ProblemSpec::parse("problem = fhn\nmode = exact\n").is_err());
        assert!(ProblemSpec::parse("preset = heat1d\nproblem = ac1d\n").is_err());
    }
}
