//! JSON run configuration with strict key checking.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::experiments::{
    preset, ConsistencyConfig, ExperimentGrid, GridCell, TestFunction, DEFAULT_BUDGET,
    DEFAULT_REPS, DEFAULT_SEED,
};
use crate::model::NoiseKind;

#[derive(Debug, Clone)]
pub struct CollapseConfig {
    pub grid: ExperimentGrid,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TheoryRequest {
    pub n: f64,
    pub d: f64,
    pub sigma_sq: f64,
    pub s1: Option<f64>,
    pub z0: Option<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub enum RunConfig {
    Collapse(CollapseConfig),
    Consistency(ConsistencyConfig),
    Theory(TheoryRequest),
}

const COLLAPSE_KEYS: &[&str] = &["kind", "label", "preset", "full", "cells", "reps", "noise", "seed", "budget"];
const CONSISTENCY_KEYS: &[&str] = &["kind", "label", "d", "n", "tests", "reps", "seed"];
const THEORY_KEYS: &[&str] = &["kind", "label", "n", "d", "sigma_sq", "s1", "z0", "eps"];
const CELL_KEYS: &[&str] = &["d", "n", "reps"];

/// Accumulates every violation found while reading one document.
struct Reader {
    problems: Vec<String>,
}

impl Reader {
    fn strict(&mut self, obj: &Map<String, Value>, allowed: &[&str], at: &str) {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                self.problems.push(format!("{at}{k}: unknown key"));
            }
        }
    }

    fn count(&mut self, obj: &Map<String, Value>, key: &str, at: &str, min: u64) -> Option<usize> {
        let v = obj.get(key)?;
        match v.as_u64() {
            Some(x) if x >= min => Some(x as usize),
            _ => {
                self.problems.push(format!("{at}{key}: expected an integer >= {min}, got {v}"));
                None
            }
        }
    }

    fn seed(&mut self, obj: &Map<String, Value>) -> u64 {
        match obj.get("seed") {
            None => DEFAULT_SEED,
            Some(v) => v.as_u64().unwrap_or_else(|| {
                self.problems.push(format!("seed: expected a non-negative integer, got {v}"));
                DEFAULT_SEED
            }),
        }
    }

    fn real(&mut self, obj: &Map<String, Value>, key: &str, positive: bool) -> Option<f64> {
        let v = obj.get(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() && (!positive || x > 0.0) => Some(x),
            _ => {
                let what = if positive { "a positive number" } else { "a finite number" };
                self.problems.push(format!("{key}: expected {what}, got {v}"));
                None
            }
        }
    }

    fn label(&mut self, obj: &Map<String, Value>, default: &str) -> String {
        match obj.get("label") {
            None => default.to_string(),
            Some(Value::String(s)) if !s.is_empty() && !s.contains([',', '\n', '"']) => s.clone(),
            Some(v) => {
                self.problems.push(format!("label: expected a plain non-empty string, got {v}"));
                default.to_string()
            }
        }
    }

    fn finish<T>(self, v: T) -> Result<T> {
        if self.problems.is_empty() {
            Ok(v)
        } else {
            Err(Error::Config(self.problems))
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("invalid JSON: {e}")]))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Config(vec!["top level must be a JSON object".into()]))?;
    match obj.get("kind").and_then(Value::as_str) {
        Some("collapse") => parse_collapse(obj).map(RunConfig::Collapse),
        Some("consistency") => parse_consistency(obj).map(RunConfig::Consistency),
        Some("theory") => parse_theory(obj).map(RunConfig::Theory),
        Some(other) => Err(Error::Config(vec![format!(
            "kind: expected collapse, consistency or theory, got '{other}'"
        )])),
        None => Err(Error::Config(vec!["kind: missing or not a string".into()])),
    }
}

fn parse_collapse(obj: &Map<String, Value>) -> Result<CollapseConfig> {
    let mut r = Reader { problems: vec![] };
    r.strict(obj, COLLAPSE_KEYS, "");
    let full = match obj.get("full") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(v) => {
            r.problems.push(format!("full: expected a boolean, got {v}"));
            false
        }
    };
    let noise = match obj.get("noise") {
        None => None,
        Some(v) => match v.as_str().and_then(NoiseKind::from_tag) {
            Some(k) => Some(k),
            None => {
                r.problems.push(format!("noise: expected gaussian, cauchy-iid or cauchy-mv, got {v}"));
                None
            }
        },
    };
    let reps = r.count(obj, "reps", "", 1);
    let budget = r.count(obj, "budget", "", 1).unwrap_or(DEFAULT_BUDGET);
    let seed = r.seed(obj);

    let mut grid = match (obj.get("preset"), obj.get("cells")) {
        (Some(_), Some(_)) => {
            r.problems.push("preset and cells are mutually exclusive".into());
            None
        }
        (Some(p), None) => match p.as_str() {
            Some(name) => match preset(name, full) {
                Ok(g) => {
                    if noise.is_some_and(|k| k != g.noise_kind) {
                        r.problems.push(format!("noise: conflicts with preset {name}"));
                    }
                    Some(g)
                }
                Err(e) => {
                    r.problems.push(format!("preset: {e}"));
                    None
                }
            },
            None => {
                r.problems.push(format!("preset: expected a string, got {p}"));
                None
            }
        },
        (None, Some(cells)) => {
            let default_reps = reps.unwrap_or(DEFAULT_REPS);
            let parsed = parse_cells(&mut r, cells, default_reps);
            let label = r.label(obj, "custom");
            if noise.is_none() {
                r.problems.push("noise: required when cells are given".into());
            }
            Some(ExperimentGrid {
                label,
                noise_kind: noise.unwrap_or(NoiseKind::GaussianIid),
                cells: parsed,
                master_seed: seed,
            })
        }
        (None, None) => {
            r.problems.push("one of preset or cells is required".into());
            None
        }
    };
    if let Some(g) = grid.as_mut() {
        g.master_seed = seed;
        if obj.contains_key("preset") {
            if let Some(reps) = reps {
                *g = g.clone().with_reps(reps);
            }
            g.label = r.label(obj, &g.label.clone());
        }
        if let Err(Error::Config(v)) = g.validate() {
            r.problems.extend(v);
        }
    }
    let grid = grid.unwrap_or_else(crate::experiments::fig1);
    r.finish(CollapseConfig { grid, budget })
}

fn parse_cells(r: &mut Reader, cells: &Value, default_reps: usize) -> Vec<GridCell> {
    let Some(arr) = cells.as_array() else {
        r.problems.push("cells: expected an array".into());
        return vec![];
    };
    let mut out = Vec::new();
    for (i, c) in arr.iter().enumerate() {
        let at = format!("cells[{i}].");
        let Some(o) = c.as_object() else {
            r.problems.push(format!("cells[{i}]: expected an object"));
            continue;
        };
        r.strict(o, CELL_KEYS, &at);
        let d = r.count(o, "d", &at, 1);
        let n = r.count(o, "n", &at, 1);
        for key in ["d", "n"] {
            if !o.contains_key(key) {
                r.problems.push(format!("{at}{key}: missing"));
            }
        }
        let reps = if o.contains_key("reps") {
            r.count(o, "reps", &at, 1)
        } else {
            Some(default_reps)
        };
        if let (Some(d), Some(n), Some(reps)) = (d, n, reps) {
            out.push(GridCell { d, n, reps });
        }
    }
    out
}

fn parse_test(r: &mut Reader, v: &Value, i: usize) -> Option<TestFunction> {
    let at = format!("tests[{i}]");
    let o = match v.as_object() {
        Some(o) => o,
        None => {
            r.problems.push(format!("{at}: expected an object"));
            return None;
        }
    };
    let coord = |r: &mut Reader| match o.get("coord").and_then(Value::as_u64) {
        Some(c) if c >= 1 => Some(c as usize - 1),
        _ => {
            r.problems.push(format!("{at}.coord: expected a 1-based coordinate index"));
            None
        }
    };
    let num = |r: &mut Reader, key: &str| match o.get(key).and_then(Value::as_f64) {
        Some(x) if x.is_finite() => Some(x),
        _ => {
            r.problems.push(format!("{at}.{key}: expected a finite number"));
            None
        }
    };
    let check_keys = |r: &mut Reader, keys: &[&str]| r.strict(o, keys, &format!("{at}."));
    match o.get("type").and_then(Value::as_str) {
        Some("constant") => {
            check_keys(r, &["type", "value"]);
            num(r, "value").map(TestFunction::Constant)
        }
        Some("indicator") => {
            check_keys(r, &["type", "coord", "threshold"]);
            let (c, t) = (coord(r), num(r, "threshold"));
            Some(TestFunction::Indicator { coord: c?, threshold: t? })
        }
        Some("clip") => {
            check_keys(r, &["type", "coord", "lo", "hi"]);
            let (c, lo, hi) = (coord(r), num(r, "lo"), num(r, "hi"));
            let (c, lo, hi) = (c?, lo?, hi?);
            if lo > hi {
                r.problems.push(format!("{at}: lo must not exceed hi"));
                return None;
            }
            Some(TestFunction::Clip { coord: c, lo, hi })
        }
        other => {
            r.problems.push(format!(
                "{at}.type: expected constant, indicator or clip, got {}",
                other.unwrap_or("nothing")
            ));
            None
        }
    }
}

fn parse_consistency(obj: &Map<String, Value>) -> Result<ConsistencyConfig> {
    let mut r = Reader { problems: vec![] };
    r.strict(obj, CONSISTENCY_KEYS, "");
    let d = r.count(obj, "d", "", 1);
    if !obj.contains_key("d") {
        r.problems.push("d: missing".into());
    }
    let n_list = match obj.get("n") {
        Some(Value::Array(a)) if !a.is_empty() => a
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match v.as_u64() {
                Some(x) if x >= 1 => Some(x as usize),
                _ => {
                    r.problems.push(format!("n[{i}]: expected an integer >= 1, got {v}"));
                    None
                }
            })
            .collect(),
        _ => {
            r.problems.push("n: expected a non-empty array of particle counts".into());
            vec![]
        }
    };
    let tests = match obj.get("tests") {
        None => vec![TestFunction::Indicator { coord: 0, threshold: 0.0 }],
        Some(Value::Array(a)) => a.iter().enumerate().filter_map(|(i, v)| parse_test(&mut r, v, i)).collect(),
        Some(v) => {
            r.problems.push(format!("tests: expected an array, got {v}"));
            vec![]
        }
    };
    let reps = r.count(obj, "reps", "", 1).unwrap_or(100);
    let master_seed = r.seed(obj);
    r.label(obj, "consistency");
    if let Some(d) = d {
        for t in &tests {
            let k = match t {
                TestFunction::Indicator { coord, .. } | TestFunction::Clip { coord, .. } => Some(*coord),
                _ => None,
            };
            if k.is_some_and(|k| k >= d) {
                r.problems.push(format!("tests: {} refers past d = {d}", t.name()));
            }
        }
    }
    r.finish(ConsistencyConfig {
        d: d.unwrap_or(1),
        n_list,
        tests,
        reps,
        master_seed,
    })
}

fn parse_theory(obj: &Map<String, Value>) -> Result<TheoryRequest> {
    let mut r = Reader { problems: vec![] };
    r.strict(obj, THEORY_KEYS, "");
    for key in ["n", "d", "sigma_sq"] {
        if !obj.contains_key(key) {
            r.problems.push(format!("{key}: missing"));
        }
    }
    let n = r.real(obj, "n", true);
    if n.is_some_and(|n| n <= 1.0) {
        r.problems.push("n: must exceed 1".into());
    }
    let d = r.real(obj, "d", true);
    let sigma_sq = r.real(obj, "sigma_sq", true);
    let s1 = r.real(obj, "s1", false);
    let z0 = r.real(obj, "z0", false);
    if z0 == Some(0.0) {
        r.problems.push("z0: must be nonzero".into());
    }
    let eps = if obj.contains_key("eps") { r.real(obj, "eps", true) } else { Some(0.1) };
    r.label(obj, "theory");
    r.finish(TheoryRequest {
        n: n.unwrap_or(2.0),
        d: d.unwrap_or(1.0),
        sigma_sq: sigma_sq.unwrap_or(1.0),
        s1,
        z0,
        eps: eps.unwrap_or(0.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{FIG1_D, FIG1_N};

    fn problems(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_collapse_config_gets_defaults() {
        let c = parse_config(r#"{"kind":"collapse","noise":"gaussian","cells":[{"d":3,"n":10}]}"#).unwrap();
        let RunConfig::Collapse(c) = c else { panic!() };
        assert_eq!(c.grid.cells, vec![GridCell { d: 3, n: 10, reps: 400 }]);
        assert_eq!(c.budget, DEFAULT_BUDGET);
        assert_eq!(c.grid.master_seed, DEFAULT_SEED);
    }

    #[test]
    fn zero_reps_names_the_field() {
        let p = problems(r#"{"kind":"collapse","noise":"gaussian","reps":0,"cells":[{"d":3,"n":10}]}"#);
        assert!(p.iter().any(|m| m.starts_with("reps")), "{p:?}");
    }

    #[test]
    fn fig1_preset_expands_exactly() {
        let RunConfig::Collapse(c) = parse_config(r#"{"kind":"collapse","preset":"fig1"}"#).unwrap() else {
            panic!()
        };
        assert_eq!(c.grid.cells.len(), 9);
        for d in FIG1_D {
            for n in FIG1_N {
                assert!(c.grid.cells.contains(&GridCell { d, n, reps: 400 }));
            }
        }
    }

    #[test]
    fn all_violations_are_reported() {
        let p = problems(
            r#"{"kind":"collapse","noise":"laplace","colour":1,"cells":[{"d":0,"n":5,"x":1},{"n":2}]}"#,
        );
        assert!(p.iter().any(|m| m.starts_with("noise")));
        assert!(p.iter().any(|m| m.starts_with("colour")));
        assert!(p.iter().any(|m| m.starts_with("cells[0].d")));
        assert!(p.iter().any(|m| m.starts_with("cells[0].x")));
        assert!(p.iter().any(|m| m.starts_with("cells[1].d: missing")));
        assert!(p.len() >= 5, "{p:?}");
    }

    #[test]
    fn consistency_and_theory_configs() {
        let RunConfig::Consistency(c) = parse_config(
            r#"{"kind":"consistency","d":5,"n":[1000,10000],"tests":[{"type":"indicator","coord":1,"threshold":0},{"type":"clip","coord":2,"lo":-1,"hi":1}]}"#,
        )
        .unwrap() else {
            panic!()
        };
        assert_eq!(c.n_list, vec![1000, 10000]);
        assert_eq!(c.tests.len(), 2);
        assert_eq!(c.reps, 100);

        let p = problems(r#"{"kind":"consistency","d":2,"n":[10],"tests":[{"type":"clip","coord":3,"lo":1,"hi":0}]}"#);
        assert!(!p.is_empty());

        let RunConfig::Theory(t) =
            parse_config(r#"{"kind":"theory","n":10000,"d":100,"sigma_sq":2,"z0":1.0}"#).unwrap()
        else {
            panic!()
        };
        assert_eq!(t.z0, Some(1.0));
        assert!(parse_config(r#"{"kind":"theory","n":1,"d":100}"#).is_err());
    }

    #[test]
    fn malformed_documents() {
        assert!(parse_config("not json").is_err());
        assert!(parse_config("[]").is_err());
        assert!(parse_config(r#"{"kind":"other"}"#).is_err());
        assert!(parse_config(r#"{"kind":"collapse"}"#).is_err());
        assert!(parse_config(r#"{"kind":"collapse","preset":"fig1","cells":[]}"#).is_err());
    }
}
