//! Run configuration: bracketed sections of `key = value` lines.
//!
//! ```text
//! [gas]
//! gamma = 2.0
//! rho0 = 1.25
//! u0 = 0.8
//! L0 = -1
//! L1 = 1
//!
//! [force]
//! kind = linear        # linear | polynomial | piecewise | table
//! slope = 1.0
//! ```
//!
//! Defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `force.calibrate` | `true` (rescale the amplitude so the sonic point sits at x₁ = 0) |
//! | `force.amplitude` | `1.0` |
//! | `force.assume_positive_accel` | `false` |
//! | `discretization.N_modes` / `Q_nodes` / `M_x1` | `12` / `96` / `160` |
//! | `sigma.sigma0` / `levels` / `tol_sigma` | `1e-2` / `8` / `1e-8` |
//! | `fixed_point.eps` / `eps_max` / `tol_fp` | `1e-3` / `1e-2` / `1e-10` |
//! | `fixed_point.max_iter` / `damping` | `20` / `1.0` |
//! | `fixed_point.delta0_override` | unset (`√eps`) |
//! | `fixed_point.sweep_eps` | `1e-3, 5e-4, 2.5e-4` |
//! | `inlet.kind` / `amplitude` / `beta0` | `bump` / `2e-5` / `0.2` |
//! | `outputs.directory` / `formats` | `out` / `csv, json, gnuplot, svg` |

use std::collections::BTreeMap;

use serde::Serialize;

use crate::background::GasConfig;
use crate::error::{Error, Result};
use crate::fixed_point::{FixedPointParams, InletData, InletProfile};
use crate::force::{ForceModel, ForceShape};
use crate::linear::SigmaSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discretization {
    pub n_modes: usize,
    pub q_nodes: usize,
    pub m_x1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceConfig {
    pub shape: ForceShape,
    pub amplitude: f64,
    pub calibrate: bool,
    pub assume_positive_accel: bool,
}

impl ForceConfig {
    pub fn model(&self) -> ForceModel {
        ForceModel { shape: self.shape.clone(), amplitude: self.amplitude, assume_positive_accel: self.assume_positive_accel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub gnuplot: bool,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outputs {
    pub directory: String,
    pub formats: Formats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub gas: GasConfig,
    pub force: ForceConfig,
    pub discretization: Discretization,
    pub sigma: SigmaSchedule,
    pub eps: f64,
    pub fixed_point: FixedPointParams,
    pub sweep_eps: Vec<f64>,
    pub inlet: InletData,
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn inlet_with_eps(&self, eps: f64) -> InletData {
        self.inlet.with_eps(eps)
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("gas", &["gamma", "rho0", "u0", "L0", "L1"]),
    ("force", &["kind", "slope", "coeffs", "left", "right", "x", "f", "amplitude", "calibrate", "assume_positive_accel"]),
    ("discretization", &["N_modes", "Q_nodes", "M_x1"]),
    ("sigma", &["sigma0", "levels", "tol_sigma"]),
    ("fixed_point", &["eps", "eps_max", "tol_fp", "max_iter", "damping", "delta0_override", "sweep_eps"]),
    ("inlet", &["kind", "amplitude", "beta0"]),
    ("outputs", &["directory", "formats"]),
];

struct Entry {
    value: String,
    line: usize,
}

struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn raw(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn invalid(section: &str, key: &str, msg: impl Into<String>) -> Error {
        Error::Validation { key: format!("{section}.{key}"), msg: msg.into() }
    }

    fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.raw(section, key)
            .map(|e| {
                e.value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Self::invalid(section, key, format!("'{}' is not a finite number", e.value)))
            })
            .transpose()
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    fn f64_req(&self, section: &str, key: &str) -> Result<f64> {
        self.f64_opt(section, key)?.ok_or_else(|| Self::invalid(section, key, "required key is missing"))
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse::<usize>()
                .map_err(|_| Self::invalid(section, key, format!("'{}' is not a non-negative integer", e.value))),
        }
    }

    fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.raw(section, key).map(|e| e.value.as_str()) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(Self::invalid(section, key, format!("'{v}' is not true or false"))),
        }
    }

    fn list_opt(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(section, key)
            .map(|e| {
                e.value
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Self::invalid(section, key, format!("'{}' is not a finite number", t.trim())))
                    })
                    .collect()
            })
            .transpose()
    }

    fn list_req(&self, section: &str, key: &str) -> Result<Vec<f64>> {
        self.list_opt(section, key)?.ok_or_else(|| Self::invalid(section, key, "required key is missing"))
    }

    fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.raw(section, key).map_or(default, |e| e.value.as_str())
    }
}

fn lex(text: &str) -> Result<Table> {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line, msg: format!("malformed section header '{body}'") })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(Error::Parse { line, msg: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected key = value, found '{body}'") })?;
        let (key, value) = (key.trim(), value.trim().trim_matches('"'));
        let sec = section
            .clone()
            .ok_or_else(|| Error::Parse { line, msg: format!("key '{key}' appears before any section") })?;
        let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            return Err(Error::Parse { line, msg: format!("unknown key '{key}' in [{sec}]") });
        }
        if value.is_empty() {
            return Err(Error::Parse { line, msg: format!("empty value for '{key}'") });
        }
        if let Some(prev) = entries.get(&(sec.clone(), key.to_string())) {
            let Entry { line: first, .. } = prev;
            return Err(Error::Parse { line, msg: format!("duplicate key '{key}' in [{sec}] (first set on line {first})") });
        }
        entries.insert((sec, key.to_string()), Entry { value: value.to_string(), line });
    }
    Ok(Table { entries })
}

fn check(cond: bool, section: &str, key: &str, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Table::invalid(section, key, msg))
    }
}

fn parse_force(t: &Table) -> Result<ForceConfig> {
    let kind = t.str_or("force", "kind", "");
    let shape = match kind {
        "linear" => ForceShape::Linear { slope: t.f64_req("force", "slope")? },
        "polynomial" => ForceShape::Polynomial { coeffs: t.list_req("force", "coeffs")? },
        "piecewise" => ForceShape::Piecewise { left: t.list_req("force", "left")?, right: t.list_req("force", "right")? },
        "table" => ForceShape::Table { x: t.list_req("force", "x")?, f: t.list_req("force", "f")? },
        "" => return Err(Table::invalid("force", "kind", "required key is missing")),
        other => return Err(Table::invalid("force", "kind", format!("unknown force kind '{other}'"))),
    };
    let cfg = ForceConfig {
        shape,
        amplitude: t.f64_or("force", "amplitude", 1.0)?,
        calibrate: t.bool_or("force", "calibrate", true)?,
        assume_positive_accel: t.bool_or("force", "assume_positive_accel", false)?,
    };
    cfg.model().validate().map_err(|e| match e {
        Error::Validation { msg, .. } => Table::invalid("force", kind, msg),
        other => other,
    })?;
    Ok(cfg)
}

fn parse_formats(spec: &str) -> Result<Formats> {
    let mut f = Formats { csv: false, json: false, gnuplot: false, svg: false };
    for tok in spec.split(',').map(str::trim) {
        match tok {
            "csv" => f.csv = true,
            "json" => f.json = true,
            "gnuplot" => f.gnuplot = true,
            "svg" => f.svg = true,
            other => return Err(Table::invalid("outputs", "formats", format!("unknown format '{other}'"))),
        }
    }
    Ok(f)
}

/// Parse and validate a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let t = lex(text)?;
    let gas = GasConfig {
        gamma: t.f64_req("gas", "gamma")?,
        rho0: t.f64_req("gas", "rho0")?,
        u0: t.f64_req("gas", "u0")?,
        l0: t.f64_req("gas", "L0")?,
        l1: t.f64_req("gas", "L1")?,
    };
    gas.validate()?;
    let force = parse_force(&t)?;

    let discretization = Discretization {
        n_modes: t.usize_or("discretization", "N_modes", 12)?,
        q_nodes: t.usize_or("discretization", "Q_nodes", 96)?,
        m_x1: t.usize_or("discretization", "M_x1", 160)?,
    };
    check(discretization.n_modes >= 1, "discretization", "N_modes", "need at least one mode")?;
    check(
        discretization.q_nodes >= (4 * discretization.n_modes).max(8),
        "discretization",
        "Q_nodes",
        "need Q_nodes >= max(4 N_modes, 8) to resolve products of modes",
    )?;
    check(discretization.m_x1 >= 16, "discretization", "M_x1", "need at least 16 x1-nodes")?;

    let sigma = SigmaSchedule {
        sigma0: t.f64_or("sigma", "sigma0", 1e-2)?,
        levels: t.usize_or("sigma", "levels", 8)?,
        tol: t.f64_or("sigma", "tol_sigma", 1e-8)?,
    };
    check(sigma.sigma0 > 0.0, "sigma", "sigma0", "must be positive")?;
    check(sigma.levels >= 1, "sigma", "levels", "need at least one level")?;
    check(sigma.tol > 0.0, "sigma", "tol_sigma", "must be positive")?;

    let eps = t.f64_or("fixed_point", "eps", 1e-3)?;
    check(eps >= 0.0, "fixed_point", "eps", "must be non-negative")?;
    let fixed_point = FixedPointParams {
        delta0: t.f64_opt("fixed_point", "delta0_override")?,
        tol_fp: t.f64_or("fixed_point", "tol_fp", 1e-10)?,
        max_iter: t.usize_or("fixed_point", "max_iter", 20)?,
        damping: t.f64_or("fixed_point", "damping", 1.0)?,
        eps_max: t.f64_or("fixed_point", "eps_max", 1e-2)?,
        schedule: sigma,
    };
    check(fixed_point.tol_fp > 0.0, "fixed_point", "tol_fp", "must be positive")?;
    check(fixed_point.max_iter >= 1, "fixed_point", "max_iter", "need at least one iteration")?;
    check(fixed_point.damping > 0.0 && fixed_point.damping <= 1.0, "fixed_point", "damping", "must lie in (0, 1]")?;
    check(fixed_point.eps_max > 0.0, "fixed_point", "eps_max", "must be positive")?;
    check(fixed_point.delta0.map_or(true, |d| d > 0.0), "fixed_point", "delta0_override", "must be positive")?;
    let sweep_eps = t.list_opt("fixed_point", "sweep_eps")?.unwrap_or_else(|| vec![1e-3, 5e-4, 2.5e-4]);
    check(sweep_eps.iter().all(|&e| e >= 0.0), "fixed_point", "sweep_eps", "values must be non-negative")?;

    let beta0 = t.f64_or("inlet", "beta0", 0.2)?;
    check(beta0 > 0.0 && beta0 < 1.0, "inlet", "beta0", "must lie in (0, 1)")?;
    let profile = match t.str_or("inlet", "kind", "bump") {
        "bump" => InletProfile::Bump { amplitude: t.f64_or("inlet", "amplitude", 2e-5)? },
        "zero" => InletProfile::Zero,
        other => return Err(Table::invalid("inlet", "kind", format!("unknown inlet profile '{other}'"))),
    };
    let inlet = InletData { eps, beta0, profile };

    let outputs = Outputs {
        directory: t.str_or("outputs", "directory", "out").to_string(),
        formats: parse_formats(t.str_or("outputs", "formats", "csv, json, gnuplot, svg"))?,
    };
    Ok(RunConfig { gas, force, discretization, sigma, eps, fixed_point, sweep_eps, inlet, outputs })
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Canonical text form; `parse_config(&to_text(c)) == c`.
pub fn to_text(c: &RunConfig) -> String {
    let mut s = String::new();
    let g = &c.gas;
    s += &format!("[gas]\ngamma = {:?}\nrho0 = {:?}\nu0 = {:?}\nL0 = {:?}\nL1 = {:?}\n\n", g.gamma, g.rho0, g.u0, g.l0, g.l1);
    s += "[force]\n";
    match &c.force.shape {
        ForceShape::Linear { slope } => s += &format!("kind = linear\nslope = {slope:?}\n"),
        ForceShape::Polynomial { coeffs } => s += &format!("kind = polynomial\ncoeffs = {}\n", list(coeffs)),
        ForceShape::Piecewise { left, right } => {
            s += &format!("kind = piecewise\nleft = {}\nright = {}\n", list(left), list(right))
        }
        ForceShape::Table { x, f } => s += &format!("kind = table\nx = {}\nf = {}\n", list(x), list(f)),
    }
    s += &format!(
        "amplitude = {:?}\ncalibrate = {}\nassume_positive_accel = {}\n\n",
        c.force.amplitude, c.force.calibrate, c.force.assume_positive_accel
    );
    let d = &c.discretization;
    s += &format!("[discretization]\nN_modes = {}\nQ_nodes = {}\nM_x1 = {}\n\n", d.n_modes, d.q_nodes, d.m_x1);
    s += &format!(
        "[sigma]\nsigma0 = {:?}\nlevels = {}\ntol_sigma = {:?}\n\n",
        c.sigma.sigma0, c.sigma.levels, c.sigma.tol
    );
    let fp = &c.fixed_point;
    s += &format!(
        "[fixed_point]\neps = {:?}\neps_max = {:?}\ntol_fp = {:?}\nmax_iter = {}\ndamping = {:?}\nsweep_eps = {}\n",
        c.eps, fp.eps_max, fp.tol_fp, fp.max_iter, fp.damping, list(&c.sweep_eps)
    );
    if let Some(d0) = fp.delta0 {
        s += &format!("delta0_override = {d0:?}\n");
    }
    s += &format!("\n[inlet]\nbeta0 = {:?}\n", c.inlet.beta0);
    match c.inlet.profile {
        InletProfile::Zero => s += "kind = zero\n",
        InletProfile::Bump { amplitude } => s += &format!("kind = bump\namplitude = {amplitude:?}\n"),
    }
    let f = &c.outputs.formats;
    let fmts: Vec<&str> = [(f.csv, "csv"), (f.json, "json"), (f.gnuplot, "gnuplot"), (f.svg, "svg")]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
    s += &format!("\n[outputs]\ndirectory = {}\nformats = {}\n", c.outputs.directory, fmts.join(", "));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[gas]\ngamma = 2\nrho0 = 1.25\nu0 = 0.8\nL0 = -1\nL1 = 1\n[force]\nkind = linear\nslope = 1\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.discretization, Discretization { n_modes: 12, q_nodes: 96, m_x1: 160 });
        assert_eq!(c.sigma.sigma0, 1e-2);
        assert_eq!(c.fixed_point.delta0, None);
        assert!(c.force.calibrate);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_gamma = MINIMAL.replace("gamma = 2", "gamma = 0.9");
        match parse_config(&bad_gamma) {
            Err(Error::Validation { key, msg }) => {
                assert_eq!(key, "gas.gamma");
                assert!(msg.contains("gamma must exceed 1"));
            }
            other => panic!("{other:?}"),
        }
        let dup = format!("{MINIMAL}slope = 2\n");
        assert!(matches!(parse_config(&dup), Err(Error::Parse { line: 10, .. })));
        let unknown = format!("{MINIMAL}colour = red\n");
        assert!(matches!(parse_config(&unknown), Err(Error::Parse { line: 10, .. })));
        assert!(matches!(parse_config("gamma = 2\n"), Err(Error::Parse { line: 1, .. })));
        let neg = format!("{MINIMAL}[sigma]\nsigma0 = -1\n");
        assert!(matches!(parse_config(&neg), Err(Error::Validation { key, .. }) if key == "sigma.sigma0"));
    }

    #[test]
    fn text_round_trip() {
        let text = format!("{MINIMAL}[fixed_point]\ndelta0_override = 0.5\n[outputs]\nformats = json\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(parse_config(&to_text(&c)).unwrap(), c);
    }
}
