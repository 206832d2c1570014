use std::fs;
use std::io::Write;
use std::sync::Arc;

use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use carnot_gdms::conformal::sup_norm_registry;
use carnot_gdms::dimension::DimComparison;
use carnot_gdms::gdms::{distortion_estimate, limit_set_cloud, CloudMode, Gdms, ValidationConfig, WordDistribution};
use carnot_gdms::group::GroupSpec;
use carnot_gdms::systems::{preset_registry, PresetParams};
use carnot_gdms::thermo::{
    bowen_dim, gibbs_check, measure_dimension, subsystem_with_dimension, theta_estimate, transfer_eigenmeasure,
    InvariantMeasureSpec, PressureEngine, Side, WeightTable,
};
use carnot_gdms::{Error, Result};

use crate::{Cli, Command, Common, Format};

/// What is needed to rerun a computation.
#[derive(Debug, Serialize)]
struct Provenance {
    op: &'static str,
    system: String,
    group: String,
    seed: u64,
    budget: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<String>,
    truncation: Option<f64>,
    edges: usize,
    sup_mode: String,
    rigorous: bool,
    khat: f64,
}

fn preset_params(c: &Common) -> Result<PresetParams> {
    let group = Arc::new(GroupSpec::from_short_name(&c.group)?);
    let mut p = PresetParams::new(group, c.seed, c.budget);
    p.epsilon = c.epsilon;
    p.radius = c.radius;
    p.shells = c.shells;
    p.ratio = c.ratio;
    p.exponent = c.exponent;
    p.validation = ValidationConfig {
        points_per_edge: c.validation_points,
        seed: c.seed ^ 0x5eed,
        ..ValidationConfig::default()
    };
    if let Some(path) = &c.spec {
        p.spec = Some(fs::read_to_string(path).map_err(|e| {
            Error::Validation(format!("cannot read spec file {}: {e}", path.display()))
        })?);
    }
    Ok(p)
}

fn load(c: &Common) -> Result<Gdms> {
    let params = preset_params(c)?;
    let sys = preset_registry().get(&c.system)?.system(&params)?;
    info!("system '{}' with {} edges", c.system, sys.edges().len());
    Ok(sys)
}

fn weights(sys: &Gdms, c: &Common) -> Result<WeightTable> {
    let strategy = sup_norm_registry().get(&c.sup_mode)?;
    let khat = match c.khat {
        Some(k) => k,
        None => distortion_estimate(sys, c.seed)?,
    };
    WeightTable::build(sys, strategy.as_ref(), khat)
}

fn provenance(op: &'static str, sys: &Gdms, w: &WeightTable, c: &Common) -> Provenance {
    Provenance {
        op,
        system: c.system.clone(),
        group: c.group.clone(),
        seed: c.seed,
        budget: c.budget,
        epsilon: c.epsilon,
        radius: c.radius,
        shells: c.shells,
        spec: c.spec.as_ref().map(|p| p.display().to_string()),
        truncation: sys.truncation(),
        edges: sys.edges().len(),
        sup_mode: w.mode.clone(),
        rigorous: w.rigorous,
        khat: w.khat,
    }
}

fn emit(c: &Common, text: &str) -> Result<()> {
    match &c.out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_json(c: &Common, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(c, &s)
}

fn merge(base: Value, extra: impl Serialize) -> Result<Value> {
    let mut base = base;
    if let (Value::Object(a), Value::Object(b)) = (&mut base, serde_json::to_value(extra)?) {
        a.extend(b);
    }
    Ok(base)
}

/// `a:b:step`, inclusive of `b` up to rounding.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Validation(format!("bad grid '{s}', expected a:b:step")))?;
    let [a, b, step] = parts[..] else {
        return Err(Error::Validation(format!("bad grid '{s}', expected a:b:step")));
    };
    if !(step > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(Error::Validation(format!("bad grid '{s}'")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect())
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Pressure { t, t_grid, depth } => {
            let sys = load(c)?;
            let w = weights(&sys, c)?;
            let prov = provenance("pressure", &sys, &w, c);
            let engine = PressureEngine::new(&sys, w, *depth, c.budget)?;
            match (t, t_grid) {
                (_, Some(grid)) => {
                    let ts = parse_grid(grid)?;
                    let rows = ts
                        .iter()
                        .map(|&t| engine.pressure_bracket(t))
                        .collect::<Result<Vec<_>>>()?;
                    if c.format == Some(Format::Json) {
                        emit_json(c, &json!({"provenance": prov, "grid": rows}))
                    } else {
                        let mut s = String::from("t,p_lo,p_hi\n");
                        for r in rows {
                            s.push_str(&format!("{},{},{}\n", r.t, r.lower, r.upper));
                        }
                        emit(c, &s)
                    }
                }
                (Some(t), None) => {
                    let b = engine.pressure_bracket(*t)?;
                    emit_json(c, &merge(json!({"provenance": prov}), b)?)
                }
                (None, None) => Err(Error::Validation("pressure needs --t or --t-grid".into())),
            }
        }
        Command::Dim { tol, depth } => {
            let sys = load(c)?;
            let w = weights(&sys, c)?;
            let prov = provenance("dim", &sys, &w, c);
            let q = sys.group().homogeneous_dim() as f64;
            let engine = PressureEngine::new(&sys, w, *depth, c.budget)?;
            let b = bowen_dim(&engine, q, *tol)?;
            emit_json(c, &merge(json!({"provenance": prov}), b)?)
        }
        Command::Theta { count } => {
            let params = preset_params(c)?;
            let gen = preset_registry().get(&c.system)?.generator(&params)?;
            let th = theta_estimate(gen.as_ref(), *count, c.budget)?;
            let head = json!({
                "op": "theta",
                "system": c.system,
                "generator": gen.name(),
                "group": c.group,
                "seed": c.seed,
                "budget": c.budget,
            });
            emit_json(c, &merge(head, th)?)
        }
        Command::Measure { t, depth } => {
            let sys = load(c)?;
            let w = weights(&sys, c)?;
            let prov = provenance("measure", &sys, &w, c);
            let t = match t {
                Some(t) => *t,
                None => {
                    let q = sys.group().homogeneous_dim() as f64;
                    let engine = PressureEngine::new(&sys, w.clone(), *depth, c.budget)?;
                    bowen_dim(&engine, q, 1e-9)?.mid()
                }
            };
            let m = transfer_eigenmeasure(&sys, &w, t, *depth, c.budget)?;
            if c.format == Some(Format::Csv) {
                let mut s = String::from("word,mass\n");
                for (word, mass) in m.level(m.depth) {
                    s.push_str(&format!("{},{}\n", word.display(&sys), mass));
                }
                return emit(c, &s);
            }
            let g = gibbs_check(&m, &w, Side::Mid);
            emit_json(
                c,
                &json!({
                    "provenance": prov,
                    "t": t,
                    "depth": m.depth,
                    "lambda": m.lambda,
                    "gibbs_min": g.min_ratio,
                    "gibbs_max": g.max_ratio,
                    "gibbs_spread": g.spread(),
                    "consistency_defect": m.consistency_defect(),
                }),
            )
        }
        Command::Limitset { depth, chaos, ply } => {
            let sys = load(c)?;
            let mode = match chaos {
                Some(n) => CloudMode::ChaosGame {
                    samples: *n,
                    seed: c.seed,
                    distribution: WordDistribution::Uniform,
                },
                None => CloudMode::Deterministic,
            };
            let cloud = limit_set_cloud(&sys, *depth, &mode, c.budget)?;
            let mut buf = Vec::new();
            cloud.write_csv(&mut buf)?;
            if let Some(path) = ply {
                let mut p = Vec::new();
                cloud.write_ply(&mut p)?;
                fs::write(path, p)?;
            }
            let text = String::from_utf8(buf).expect("csv is ascii");
            match &c.out {
                Some(path) => {
                    fs::write(path, text)?;
                    let summary = json!({
                        "op": "limitset",
                        "system": c.system,
                        "depth": depth,
                        "points": cloud.len(),
                        "error_bound": cloud.errors.iter().copied().fold(0.0, f64::max),
                        "seed": c.seed,
                        "mode": if chaos.is_some() { "chaos" } else { "deterministic" },
                    });
                    println!("{}", serde_json::to_string_pretty(&summary)?);
                    Ok(())
                }
                None => emit(c, &text),
            }
        }
        Command::CompareDim { h } => {
            let g = GroupSpec::from_short_name(&c.group)?;
            let d = DimComparison::for_group(&g);
            let (lo, hi) = d.euclid_bounds(*h)?;
            emit_json(
                c,
                &json!({
                    "op": "compare-dim",
                    "group": c.group,
                    "h": h,
                    "topological_dim": d.n,
                    "homogeneous_dim": d.q,
                    "euclid_lo": lo,
                    "euclid_hi": hi,
                }),
            )
        }
        Command::MeasureDim { mu, bernoulli, depth } => {
            let sys = load(c)?;
            let spec = match (mu, bernoulli) {
                (Some(path), _) => {
                    let text = fs::read_to_string(path).map_err(|e| {
                        Error::Validation(format!("cannot read measure file {}: {e}", path.display()))
                    })?;
                    serde_json::from_str::<InvariantMeasureSpec>(&text)?
                }
                (None, Some(list)) => {
                    let p = list
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Validation(format!("bad probability list '{list}'")))?;
                    InvariantMeasureSpec::Bernoulli(p)
                }
                (None, None) => {
                    let n = sys.edges().len();
                    InvariantMeasureSpec::Bernoulli(vec![1.0 / n as f64; n])
                }
            };
            let w = weights(&sys, c)?;
            let prov = provenance("measure-dim", &sys, &w, c);
            let md = measure_dimension(&sys, &w, &spec, *depth, c.budget)?;
            emit_json(c, &merge(json!({"provenance": prov, "measure": spec}), md)?)
        }
        Command::Subsystem { target, tol, max_edges } => {
            let params = preset_params(c)?;
            let gen = preset_registry().get(&c.system)?.generator(&params)?;
            let q = params.group.homogeneous_dim() as f64;
            let r = subsystem_with_dimension(gen.as_ref(), *target, *tol, q, *max_edges)?;
            let head = json!({
                "op": "subsystem",
                "system": c.system,
                "generator": gen.name(),
                "target": target,
                "seed": c.seed,
            });
            emit_json(c, &merge(head, r)?)
        }
    }
}
