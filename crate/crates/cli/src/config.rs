//! Flat `key = value` scenario configuration with dotted namespaces.

use std::collections::BTreeMap;
use std::fmt;

use levyheat::analysis::{AnalysisError, Equation, Scenario};
use levyheat::kernel::StableKernel;
use levyheat::measure::{LevyMeasure, Window};
use levyheat::solver::{InitialCondition, JumpCoefficient, MarkFactor, SolverConfig, StateFactor};

use crate::error::CliError;

/// Every accepted key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("alpha", "2"),
    ("beta", "1"),
    ("bounds.c_envelope", "auto"),
    ("bounds.norm", "auto"),
    ("check.pairs", "100"),
    ("check.samples", "1000"),
    ("dim", "1"),
    ("equation", "compensated"),
    ("lambda", "0.1"),
    ("lyapunov.tail_fraction", "0.5"),
    ("mc.levels", "8"),
    ("mc.p", "auto"),
    ("mc.replicas", "1000"),
    ("mc.t", "0.5"),
    ("mc.t1", "0.5"),
    ("mc.t2", "0.75"),
    ("mc.x", "0"),
    ("moments.points", "16"),
    ("noise.atoms", "none"),
    ("noise.cutoff", "10"),
    ("noise.eps", "0.01"),
    ("noise.exponent", "1.5"),
    ("noise.height", "1"),
    ("noise.hi", "1"),
    ("noise.kind", "atomic"),
    ("noise.lo", "-1"),
    ("noise.mark", "1"),
    ("noise.scale", "1"),
    ("noise.total_mass", "1"),
    ("override_existence_gate", "false"),
    ("seed", "1"),
    ("sigma.mark", "abs"),
    ("sigma.mark_param", "1"),
    ("sigma.state", "linear"),
    ("sigma.state_param", "1"),
    ("solve.replica", "0"),
    ("solver.dt", "auto"),
    ("solver.dx", "0.25"),
    ("solver.max_iterations", "200"),
    ("solver.tolerance", "1e-10"),
    ("u0.center", "0"),
    ("u0.hi", "1"),
    ("u0.kind", "bump"),
    ("u0.lo", "-1"),
    ("u0.mass", "1"),
    ("u0.value", "1"),
    ("u0.variance", "0.1"),
    ("verify.trend_fraction", "0.1"),
    ("window.half_width", "5"),
    ("window.horizon", "1"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Default,
    File { path: String, line: usize },
    Set,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::File { path, line } => write!(f, "{path} line {line}"),
            Origin::Set => write!(f, "--set"),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Default for Config {
    fn default() -> Self {
        let entries = KEYS
            .iter()
            .map(|(k, v)| {
                (
                    k.to_string(),
                    Entry {
                        value: v.to_string(),
                        origin: Origin::Default,
                    },
                )
            })
            .collect();
        Self { entries }
    }
}

impl Config {
    /// Applies a config file on top of the defaults.
    pub fn parse_file(&mut self, path: &str, text: &str) -> Result<(), CliError> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Validation(format!("{path} line {line}: expected `key = value`, got `{content}`")));
            };
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(CliError::Validation(format!(
                    "{path} line {line}: key `{key}` already set on line {prev}"
                )));
            }
            self.set(key, value.trim(), Origin::File { path: path.to_string(), line })?;
        }
        Ok(())
    }

    /// Applies one `--set key=value` override.
    pub fn apply_override(&mut self, arg: &str) -> Result<(), CliError> {
        let Some((key, value)) = arg.split_once('=') else {
            return Err(CliError::Validation(format!("--set {arg}: expected key=value")));
        };
        self.set(key.trim(), value.trim(), Origin::Set)
    }

    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), CliError> {
        match self.entries.get_mut(key) {
            Some(e) => {
                if value.is_empty() {
                    return Err(CliError::Validation(format!("key `{key}` ({origin}): empty value")));
                }
                e.value = value.to_string();
                e.origin = origin;
                Ok(())
            }
            None => Err(CliError::Validation(format!("unknown key `{key}` ({origin})"))),
        }
    }

    /// `key = value` lines, sorted by key.
    pub fn effective(&self) -> String {
        let mut out = String::from("# effective configuration\n");
        for (k, e) in &self.entries {
            out.push_str(&format!("{k} = {}\n", e.value));
        }
        out
    }

    pub fn raw(&self, key: &str) -> &str {
        &self.entries[key].value
    }

    fn invalid(&self, key: &str, reason: impl fmt::Display) -> CliError {
        let e = &self.entries[key];
        CliError::Validation(format!("key `{key}` = {} ({}): {reason}", e.value, e.origin))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v = self.raw(key);
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.invalid(key, "expected a finite number")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.raw(key).parse().map_err(|_| self.invalid(key, "expected a nonnegative integer"))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.raw(key).parse().map_err(|_| self.invalid(key, "expected an unsigned 64-bit integer"))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(self.invalid(key, "expected true or false")),
        }
    }

    /// `None` for `auto`.
    pub fn auto_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        if self.raw(key) == "auto" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.invalid(key, "expected a comma-separated list of numbers"))
    }

    pub fn positive(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(key, "must be positive"))
        }
    }

    pub fn equation(&self) -> Result<Equation, CliError> {
        match self.raw("equation") {
            "compensated" => Ok(Equation::Compensated),
            "noncompensated" => Ok(Equation::NonCompensated),
            _ => Err(self.invalid("equation", "expected compensated or noncompensated")),
        }
    }

    pub fn kernel(&self) -> Result<StableKernel, CliError> {
        let alpha = self.f64("alpha")?;
        let dim = self.usize("dim")?;
        StableKernel::stable(alpha, dim).map_err(|e| self.invalid("alpha", e))
    }

    pub fn window(&self) -> Result<Window, CliError> {
        let horizon = self.f64("window.horizon")?;
        let half = self.f64("window.half_width")?;
        let dim = self.usize("dim")?;
        Window::new(horizon, half, dim).map_err(|e| self.invalid("window.horizon", e))
    }

    pub fn measure(&self) -> Result<LevyMeasure, CliError> {
        match self.raw("noise.kind") {
            "atomic" => {
                let atoms = if self.raw("noise.atoms") == "none" {
                    vec![(self.f64("noise.mark")?, self.f64("noise.total_mass")?)]
                } else {
                    self.atoms()?
                };
                LevyMeasure::atomic(&atoms).map_err(|e| self.invalid("noise.atoms", e))
            }
            "uniform" => LevyMeasure::uniform(self.f64("noise.lo")?, self.f64("noise.hi")?, self.f64("noise.height")?)
                .map_err(|e| self.invalid("noise.height", e)),
            "power_law" => LevyMeasure::power_law(
                self.f64("noise.scale")?,
                self.f64("noise.exponent")?,
                self.f64("noise.eps")?,
                self.f64("noise.cutoff")?,
            )
            .map_err(|e| self.invalid("noise.exponent", e)),
            _ => Err(self.invalid("noise.kind", "expected atomic, uniform or power_law")),
        }
    }

    /// `h:mass` pairs separated by commas.
    fn atoms(&self) -> Result<Vec<(f64, f64)>, CliError> {
        self.raw("noise.atoms")
            .split(',')
            .map(|pair| {
                let (h, m) = pair.split_once(':')?;
                Some((h.trim().parse().ok()?, m.trim().parse().ok()?))
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.invalid("noise.atoms", "expected `h:mass` pairs separated by commas"))
    }

    pub fn initial(&self) -> Result<InitialCondition, CliError> {
        let u0 = match self.raw("u0.kind") {
            "constant" => InitialCondition::Constant(self.f64("u0.value")?),
            "bump" => InitialCondition::GaussianBump {
                mass: self.f64("u0.mass")?,
                center: self.f64("u0.center")?,
                variance: self.f64("u0.variance")?,
            },
            "indicator" => InitialCondition::Indicator {
                lo: self.f64("u0.lo")?,
                hi: self.f64("u0.hi")?,
                value: self.f64("u0.value")?,
            },
            _ => return Err(self.invalid("u0.kind", "expected constant, bump or indicator")),
        };
        u0.validate().map_err(|e| self.invalid("u0.kind", e))?;
        Ok(u0)
    }

    pub fn sigma(&self, measure: &LevyMeasure) -> Result<JumpCoefficient, CliError> {
        let mp = self.f64("sigma.mark_param")?;
        let mark = match self.raw("sigma.mark") {
            "abs" => MarkFactor::Abs,
            "const" => MarkFactor::Const(mp),
            "power" => MarkFactor::Power(mp),
            _ => return Err(self.invalid("sigma.mark", "expected abs, const or power")),
        };
        let sp = self.f64("sigma.state_param")?;
        let state = match self.raw("sigma.state") {
            "linear" => StateFactor::Linear(sp),
            "tanh" => StateFactor::Tanh(sp),
            "sin" => StateFactor::Sin(sp),
            "zero" => StateFactor::Zero,
            _ => return Err(self.invalid("sigma.state", "expected linear, tanh, sin or zero")),
        };
        JumpCoefficient::new(mark, state, measure).map_err(|e| self.invalid("sigma.mark", e))
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let window = self.window()?;
        let mut cfg = SolverConfig::new(window);
        cfg.lambda = self.f64("lambda")?;
        if cfg.lambda < 0.0 {
            return Err(self.invalid("lambda", "must be >= 0"));
        }
        cfg.beta = self.positive("beta")?;
        cfg.u0 = self.initial()?;
        if self.raw("solver.dt") != "auto" {
            cfg.dt = self.positive("solver.dt")?;
        }
        cfg.dx = self.positive("solver.dx")?;
        cfg.tolerance = self.positive("solver.tolerance")?;
        cfg.max_iterations = self.usize("solver.max_iterations")?;
        if cfg.max_iterations == 0 {
            return Err(self.invalid("solver.max_iterations", "must be at least 1"));
        }
        cfg.seed = self.u64("seed")?;
        cfg.override_existence_gate = self.bool("override_existence_gate")?;
        cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let kernel = self.kernel()?;
        let measure = self.measure()?;
        let sigma = self.sigma(&measure)?;
        let cfg = self.solver_config()?;
        let built = match self.equation()? {
            Equation::Compensated => Scenario::compensated(kernel, measure, sigma, cfg),
            Equation::NonCompensated => Scenario::noncompensated(kernel, measure, sigma, cfg),
        };
        built.map_err(CliError::from)
    }

    /// `mc.p`, defaulting to 2 for the compensated equation and 1 otherwise.
    pub fn moment_order(&self) -> Result<f64, CliError> {
        match self.auto_f64("mc.p")? {
            Some(p) if p > 0.0 => Ok(p),
            Some(_) => Err(self.invalid("mc.p", "must be positive")),
            None => Ok(match self.equation()? {
                Equation::Compensated => 2.0,
                Equation::NonCompensated => 1.0,
            }),
        }
    }

    pub fn point(&self) -> Result<Vec<f64>, CliError> {
        let x = self.list("mc.x")?;
        let dim = self.usize("dim")?;
        if x.len() != dim {
            return Err(self.invalid("mc.x", format!("expected {dim} coordinates")));
        }
        Ok(x)
    }

    pub fn replicas(&self) -> Result<usize, CliError> {
        let n = self.usize("mc.replicas")?;
        if n < 2 {
            return Err(self.invalid("mc.replicas", "at least 2 replicas are needed for a standard error"));
        }
        Ok(n)
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        use levyheat::solver::SolverError as S;
        match &e {
            AnalysisError::Invalid(_) => CliError::Validation(e.to_string()),
            AnalysisError::Solver(S::Config(_) | S::ExistenceGate(_) | S::Unsupported(_) | S::OutsideWindow { .. }) => {
                CliError::Validation(e.to_string())
            }
            AnalysisError::Bounds(levyheat::bounds::BoundsError::Domain(_)) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build_a_scenario() {
        let c = Config::default();
        let s = c.scenario().unwrap();
        assert_eq!(s.equation(), Equation::Compensated);
        assert_eq!(c.moment_order().unwrap(), 2.0);
    }

    #[test]
    fn file_errors_name_key_and_line() {
        let mut c = Config::default();
        let err = c.parse_file("a.cfg", "lambda = 0.2\n\nnoise.bogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("noise.bogus") && err.to_string().contains("line 3"), "{err}");
        let mut c = Config::default();
        let err = c.parse_file("a.cfg", "lambda = 0.2\nlambda = 0.3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let mut c = Config::default();
        c.parse_file("a.cfg", "# comment\nlambda = -1\n").unwrap();
        let err = c.scenario().unwrap_err();
        assert!(err.to_string().contains("lambda") && err.to_string().contains("line 2"), "{err}");
        let mut c = Config::default();
        c.parse_file("a.cfg", "alpha = 3\n").unwrap();
        assert!(c.scenario().unwrap_err().to_string().contains("`alpha`"));
    }

    #[test]
    fn overrides_round_trip_through_effective() {
        let mut c = Config::default();
        c.apply_override("noise.total_mass=2.5").unwrap();
        c.apply_override("equation = noncompensated").unwrap();
        let text = c.effective();
        let mut d = Config::default();
        d.parse_file("effective.cfg", &text).unwrap();
        assert_eq!(d.effective(), text);
        assert_eq!(d.raw("noise.total_mass"), "2.5");
        assert!(c.apply_override("nope").is_err());
        assert!(c.apply_override("nope=1").is_err());
    }

    #[test]
    fn atoms_and_lists_parse() {
        let mut c = Config::default();
        c.apply_override("noise.atoms=1:1, -2:0.5").unwrap();
        let m = c.measure().unwrap();
        assert_eq!(m.total_mass(), 1.5);
        c.apply_override("noise.atoms=1;1").unwrap();
        assert!(c.measure().is_err());
        c.apply_override("mc.x=0,1").unwrap();
        assert!(c.point().is_err());
    }
}
