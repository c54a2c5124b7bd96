//! Flat `key = value` run configuration. Every key has a compiled-in default;
//! a config file and then `--set key=value` flags override it.

use std::fmt::Write as _;
use std::path::Path;

use pme::gluing::ClosedOptions;
use pme::hdmde::{EmOptions, HdmdeOptions};
use pme::pme::PmeOptions;
use pme::projection::ProjectionOptions;

use crate::CliError;

/// `None` prints and parses as `auto`.
type Auto<T> = Option<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n0: Auto<usize>,
    pub alpha: f64,
    pub eps: f64,
    pub em_max_iter: usize,
    pub n_max: Auto<usize>,
    pub eps_star: f64,
    pub max_outer_iter: usize,
    /// Tuning parameters searched by `--select`.
    pub lambda_grid: Vec<f64>,
    pub grid0: Auto<usize>,
    pub refine_tol: Auto<f64>,
    pub tie_rel: f64,
    pub proj_max_iter: usize,
    pub isomap_k: Auto<usize>,
    pub pieces: usize,
    /// Gluing axis, 1-based.
    pub g: Auto<usize>,
    pub landmarks: usize,
    pub seed: u64,
    pub threads: Auto<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pme = PmeOptions::new(1);
        Self {
            n0: None,
            alpha: pme.hdmde.alpha,
            eps: pme.hdmde.em.eps,
            em_max_iter: pme.hdmde.em.max_iter,
            n_max: None,
            eps_star: pme.eps_star,
            max_outer_iter: pme.max_outer_iter,
            lambda_grid: pme::pme::default_lambda_grid(),
            grid0: None,
            refine_tol: None,
            tie_rel: pme.projection.tie_rel,
            proj_max_iter: pme.projection.max_iter,
            isomap_k: None,
            pieces: 6,
            g: None,
            landmarks: 1000,
            seed: 0,
            threads: None,
        }
    }
}

fn parse_auto<T: std::str::FromStr>(key: &str, v: &str) -> Result<Auto<T>, CliError> {
    if v == "auto" {
        return Ok(None);
    }
    v.parse()
        .map(Some)
        .map_err(|_| CliError::Usage(format!("{key}: expected a number or 'auto', got {v:?}")))
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("{key}: expected a number, got {v:?}")))
}

fn show_auto<T: ToString>(v: &Auto<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

/// `exp:a:b` is `e^k` for integers `k = a..=b`; otherwise a comma list.
fn parse_grid(v: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("lambda_grid: expected 'exp:A:B' or a comma list, got {v:?}"));
    if let Some(rest) = v.strip_prefix("exp:") {
        let (a, b) = rest.split_once(':').ok_or_else(bad)?;
        let a: i32 = a.trim().parse().map_err(|_| bad())?;
        let b: i32 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).map(|k| (k as f64).exp()).collect());
    }
    v.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        let v = v.trim();
        match key {
            "n0" => self.n0 = parse_auto(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "eps" => self.eps = parse_num(key, v)?,
            "em_max_iter" => self.em_max_iter = parse_num(key, v)?,
            "n_max" => self.n_max = parse_auto(key, v)?,
            "eps_star" => self.eps_star = parse_num(key, v)?,
            "max_outer_iter" => self.max_outer_iter = parse_num(key, v)?,
            "lambda_grid" => self.lambda_grid = parse_grid(v)?,
            "grid0" => self.grid0 = parse_auto(key, v)?,
            "refine_tol" => self.refine_tol = parse_auto(key, v)?,
            "tie_rel" => self.tie_rel = parse_num(key, v)?,
            "proj_max_iter" => self.proj_max_iter = parse_num(key, v)?,
            "isomap_k" => self.isomap_k = parse_auto(key, v)?,
            "pieces" => self.pieces = parse_num(key, v)?,
            "g" => self.g = parse_auto(key, v)?,
            "landmarks" => self.landmarks = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "threads" => self.threads = parse_auto(key, v)?,
            _ => return Err(CliError::Usage(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(pme::Error::from)?;
        let mut c = Self::default();
        c.apply_text(&text)?;
        Ok(c)
    }

    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<(), CliError> {
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {p:?}")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Checks every field against the library's own preconditions.
    pub fn validate(&self) -> Result<(), CliError> {
        self.pme(1).validate()?;
        if !self.lambda_grid.iter().all(|l| l.is_finite() && *l >= 0.0) || self.lambda_grid.is_empty() {
            return Err(CliError::Usage("lambda_grid must be a nonempty list of finite non-negative values".into()));
        }
        if self.pieces < 3 {
            return Err(CliError::Usage("pieces must be at least 3".into()));
        }
        if matches!(self.g, Some(0)) {
            return Err(CliError::Usage("g is 1-based".into()));
        }
        if self.landmarks < 3 {
            return Err(CliError::Usage("landmarks must be at least 3".into()));
        }
        if matches!(self.threads, Some(0)) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn projection(&self) -> ProjectionOptions {
        ProjectionOptions {
            bbox: None,
            grid0: self.grid0,
            refine_tol: self.refine_tol,
            tie_rel: self.tie_rel,
            max_iter: self.proj_max_iter,
        }
    }

    pub fn hdmde(&self) -> HdmdeOptions {
        HdmdeOptions {
            n0: self.n0,
            alpha: self.alpha,
            em: EmOptions {
                eps: self.eps,
                max_iter: self.em_max_iter,
            },
            n_max: self.n_max,
            seed: self.seed,
        }
    }

    pub fn pme(&self, d: usize) -> PmeOptions {
        PmeOptions {
            d,
            hdmde: self.hdmde(),
            eps_star: self.eps_star,
            max_outer_iter: self.max_outer_iter,
            projection: self.projection(),
            isomap_k: self.isomap_k,
        }
    }

    pub fn closed(&self, d: usize, lambda: Option<f64>) -> ClosedOptions {
        let mut c = ClosedOptions::new(d, self.pieces);
        c.pme = self.pme(d);
        c.lambda = lambda;
        c.lambda_grid = self.lambda_grid.clone();
        c.g = self.g.map(|g| g - 1);
        c.landmarks = self.landmarks;
        c.isomap_k = self.isomap_k;
        c.seed = self.seed;
        c
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let grid: Vec<String> = self.lambda_grid.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "n0 = {}", show_auto(&self.n0));
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "em_max_iter = {}", self.em_max_iter);
        let _ = writeln!(s, "n_max = {}", show_auto(&self.n_max));
        let _ = writeln!(s, "eps_star = {}", self.eps_star);
        let _ = writeln!(s, "max_outer_iter = {}", self.max_outer_iter);
        let _ = writeln!(s, "lambda_grid = {}", grid.join(","));
        let _ = writeln!(s, "grid0 = {}", show_auto(&self.grid0));
        let _ = writeln!(s, "refine_tol = {}", show_auto(&self.refine_tol));
        let _ = writeln!(s, "tie_rel = {}", self.tie_rel);
        let _ = writeln!(s, "proj_max_iter = {}", self.proj_max_iter);
        let _ = writeln!(s, "isomap_k = {}", show_auto(&self.isomap_k));
        let _ = writeln!(s, "pieces = {}", self.pieces);
        let _ = writeln!(s, "g = {}", show_auto(&self.g));
        let _ = writeln!(s, "landmarks = {}", self.landmarks);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", show_auto(&self.threads));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::default();
        c.set("n0", "12").unwrap();
        c.set("lambda_grid", "exp:-2:1").unwrap();
        c.set("g", "2").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.lambda_grid.len(), 4);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut c = RunConfig::default();
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("alpha", "x").is_err());
        c.set("alpha", "1.5").unwrap();
        assert!(c.validate().is_err());
    }
}
