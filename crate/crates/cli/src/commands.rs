//! The five subcommands, each turning a validated config section into
//! tables, stream records and flags.

use serde::Serialize;
use sojourn_core::berman::{
    berman2_parabola_oracle, berman_2d_convergence, brownian_sup_oracle, estimate_berman_1d_curve,
    estimate_berman_1d_limit_curve, estimate_berman_1d_whole_line, estimate_berman_2d_curve, estimate_bhat,
    grid_refinement_check, BermanSettings, ConstantEstimate, DomainRule, LimitSettings,
};
use sojourn_core::gauss::DriftSpec;
use sojourn_core::lab::{
    conditional_sojourn_ladder, double_sum_diagnostic, queue_prediction_ladder, DoubleSumConfig, ExperimentConfig,
    QueueAsymptotics, ScalingFamily, TARGET_STREAM,
};
use sojourn_core::rng::derive_seed;
use sojourn_core::McSettings;

use crate::config::{
    require, ConstantConfig, ConstantFamily, ConvergenceConfig, DoubleSumCmdConfig, ExperimentCmdConfig,
    ExperimentKind, OracleConfig, OracleFamily, RunConfig,
};
use crate::output::{num, schema, Flag, StreamRecord, Table};
use crate::CliError;

/// What a command produced, before anything is written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub streams: Vec<StreamRecord>,
    pub flags: Vec<Flag>,
    pub result: serde_json::Value,
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn mc(cfg: &RunConfig, samples: usize, seed: u64) -> McSettings {
    McSettings { n_samples: samples, seed, chunk_size: cfg.chunk_size, workers: cfg.workers, batches: cfg.batches }
}

fn stream(label: &str, m: &McSettings) -> StreamRecord {
    StreamRecord { label: label.into(), seed: m.seed, chunk_ids: [0, m.n_chunks() as u64], chunk_size: m.chunk_size }
}

fn drift(b: f64, beta: f64) -> Result<DriftSpec, CliError> {
    if b == 0.0 {
        Ok(DriftSpec::NONE)
    } else {
        Ok(DriftSpec::new(b, beta)?)
    }
}

fn check_xs(xs: &[f64], field: &str) -> Result<(), CliError> {
    require(!xs.is_empty(), field, || "need at least one value".into())?;
    require(xs.iter().all(|&x| x >= 0.0 && x.is_finite()), field, || "values must be finite and >= 0".into())?;
    require(xs.windows(2).all(|w| w[1] > w[0]), field, || "values must be strictly increasing".into())
}

fn flags_of(e: &ConstantEstimate) -> Vec<&'static str> {
    if e.vanishing_by_bound {
        vec!["vanishing-by-bound"]
    } else {
        Vec::new()
    }
}

fn constant_row(t: &mut Table, quantity: &str, e: &ConstantEstimate, size: String, extra: &[&str]) {
    let mut flags = flags_of(e);
    flags.extend_from_slice(extra);
    t.push(vec![
        num(e.x),
        quantity.into(),
        num(e.value),
        num(e.std_err),
        size,
        num(e.grid_step),
        flags.join(";"),
    ]);
}

pub fn estimate_constant(cfg: &RunConfig, c: &ConstantConfig, seed: u64) -> Result<Outcome, CliError> {
    check_xs(&c.xs, "constant.xs")?;
    require(c.points_per_unit > 0.0, "constant.points_per_unit", || "must be positive".into())?;
    let m = mc(cfg, c.samples, seed);
    m.validate()?;
    let settings = BermanSettings { mc: m, estimator: c.estimator, antithetic: false };
    let mut out = Outcome::default();
    let mut t = Table::new("constant.csv", schema::CONSTANT);
    out.streams.push(stream("paths", &m));
    match c.family {
        ConstantFamily::Berman1d => {
            let [a, b] = c.interval;
            require(b > a, "constant.interval", || format!("need end > start, got [{a}, {b}]"))?;
            let n_grid = c.n_grid.unwrap_or(((b - a) * c.points_per_unit).round().max(1.0) as usize + 1);
            let d = drift(c.b, c.beta)?;
            let est = estimate_berman_1d_curve(c.alpha, d, &c.xs, (a, b), n_grid, &settings)?;
            let mut checks = Vec::new();
            for e in &est {
                let mut extra = Vec::new();
                if c.check_grid && !e.vanishing_by_bound {
                    let chk = grid_refinement_check(c.alpha, d, e.x, (a, b), n_grid, &settings)?;
                    if !chk.passed {
                        extra.push("grid-bias");
                        out.flags.push(Flag::new(
                            "grid-bias",
                            format!("x = {}: {} at step {} vs {} at half the step", e.x, chk.coarse.value, chk.coarse.grid_step, chk.fine.value),
                        ));
                    }
                    checks.push(chk);
                }
                if e.vanishing_by_bound {
                    out.flags.push(Flag::new("vanishing-by-bound", format!("x = {} >= interval length {}", e.x, b - a)));
                }
                constant_row(&mut t, "B", e, num(b - a), &extra);
            }
            out.result = serde_json::json!({ "estimates": to_json(&est), "grid_checks": to_json(&checks) });
        }
        ConstantFamily::Limit | ConstantFamily::Pickands => {
            let xs = if c.family == ConstantFamily::Pickands { vec![0.0] } else { c.xs.clone() };
            let limit = LimitSettings { schedule: c.schedule.clone(), points_per_unit: c.points_per_unit };
            let est = estimate_berman_1d_limit_curve(c.alpha, &xs, &limit, &settings)?;
            let quantity = if c.family == ConstantFamily::Pickands { "H" } else { "B_per_length" };
            for e in &est {
                let extra: &[&str] = if e.curvature_flag { &["curvature"] } else { &[] };
                if e.curvature_flag {
                    out.flags.push(Flag::new("curvature", format!("x = {}: schedule not yet linear", e.estimate.x)));
                }
                constant_row(&mut t, quantity, &e.estimate, "inf".into(), extra);
            }
            out.result = to_json(&est);
        }
        ConstantFamily::Berman2d => {
            let (d1, d2) = (drift(c.b, c.beta)?, drift(c.b2, c.beta2)?);
            let rule = DomainRule::for_drifts(c.s, c.alpha, d1, c.alpha2, d2)?;
            let est = estimate_berman_2d_curve(c.alpha, c.alpha2, d1, d2, &c.xs, &rule, c.points_per_unit, &settings)?;
            for e in &est {
                constant_row(&mut t, "B", e, num(c.s), &[]);
            }
            out.result = serde_json::json!({ "rule": to_json(&rule), "estimates": to_json(&est) });
        }
        ConstantFamily::Bhat => {
            let mut all = Vec::new();
            for &x in &c.xs {
                let e = estimate_bhat(&[c.alpha, c.alpha2], x, c.n1, &c.schedule, c.points_per_unit, &settings)?;
                constant_row(&mut t, "direct", &e.direct, num(c.n1), &[]);
                constant_row(&mut t, "product", &e.product, num(c.n1), &[]);
                all.push(e);
            }
            out.result = to_json(&all);
        }
        ConstantFamily::WholeLine => {
            let r = estimate_berman_1d_whole_line(c.alpha, &c.xs, c.half_width, c.points_per_unit, &settings)?;
            for (j, e) in r.constants.iter().enumerate() {
                let size = match &e.domain {
                    sojourn_core::berman::DomainDescriptor::WholeLine { half_widths } => num(2.0 * half_widths[0]),
                    _ => "inf".into(),
                };
                constant_row(&mut t, "B_per_length", e, size.clone(), &[]);
                t.push(vec![num(r.xs[j]), "ratio".into(), num(r.ratio[j]), num(r.ratio_se[j]), size, num(e.grid_step), String::new()]);
            }
            out.result = to_json(&r);
        }
    }
    out.tables.push(t);
    Ok(out)
}

pub fn run_experiment(cfg: &RunConfig, e: &ExperimentCmdConfig, seed: u64) -> Result<Outcome, CliError> {
    match e.kind {
        ExperimentKind::Conditional => conditional(cfg, e, seed),
        ExperimentKind::QueuePrediction => queue_prediction(cfg, e, seed),
    }
}

fn conditional(cfg: &RunConfig, e: &ExperimentCmdConfig, seed: u64) -> Result<Outcome, CliError> {
    let mut x = ExperimentConfig::new(e.family, e.levels.clone(), e.xs.clone(), seed);
    x.horizon = e.horizon;
    x.points_per_unit = e.points_per_unit;
    x.n_target_conditioned = e.n_target_conditioned;
    x.max_replicates = e.max_replicates;
    x.round_replicates = e.round_replicates;
    x.chunk_size = cfg.chunk_size;
    x.workers = cfg.workers;
    x.queue_regime = e.queue_regime;
    x.queue_horizon_mult = e.queue_horizon_mult;
    x.target = e.target.clone();
    x.grid_scaling = e.grid_scaling();
    let r = conditional_sojourn_ladder(&x)?;

    let mut out = Outcome::default();
    let mut curve = Table::new("experiment.csv", schema::EXPERIMENT);
    let mut levels = Table::new("levels.csv", schema::LEVELS);
    for lvl in &r.levels {
        for j in 0..lvl.x_grid.len() {
            curve.push(vec![
                num(lvl.u),
                num(lvl.x_grid[j]),
                num(lvl.ratio_hat[j]),
                num(lvl.ci_lo[j]),
                num(lvl.ci_hi[j]),
                num(lvl.target[j]),
                num(lvl.target_se[j]),
            ]);
        }
        levels.push(vec![
            num(lvl.u),
            num(lvl.v_u),
            lvl.n_conditioned.to_string(),
            lvl.n_replicates.to_string(),
            num(lvl.p_sup),
            num(lvl.sup_distance),
            lvl.low_confidence.to_string(),
            num(lvl.grid_step),
        ]);
        out.streams.push(StreamRecord {
            label: format!("replicates u={}", lvl.u),
            seed: lvl.seed,
            chunk_ids: [lvl.chunk_ids.start, lvl.chunk_ids.end],
            chunk_size: cfg.chunk_size,
        });
        if lvl.low_confidence {
            out.flags.push(Flag::new("low-confidence", format!("u = {}: {} conditioned replicates", lvl.u, lvl.n_conditioned)));
        }
        if !lvl.excluded_xs.is_empty() {
            out.flags.push(Flag::new("excluded-x", format!("u = {}: {:?} (limit undefined at x = T)", lvl.u, lvl.excluded_xs)));
        }
    }
    let target_mc = BermanSettings::new(e.target.n_samples, derive_seed(seed, TARGET_STREAM)).mc;
    out.streams.push(stream("target curve", &target_mc));
    if !r.sup_distance_nonincreasing {
        out.flags.push(Flag::new("not-monotone", "sup distance increases somewhere along the level ladder"));
    }
    out.tables.push(curve);
    out.tables.push(levels);
    out.result = to_json(&r);
    Ok(out)
}

fn queue_prediction(cfg: &RunConfig, e: &ExperimentCmdConfig, seed: u64) -> Result<Outcome, CliError> {
    let ScalingFamily::Queue { alpha, c } = e.family else {
        return Err(CliError::Config("`experiment.family`: queue-prediction needs the queue family".into()));
    };
    let m = mc(cfg, e.samples, seed);
    m.validate()?;
    let pts = queue_prediction_ladder(
        alpha,
        c,
        &e.levels,
        e.n,
        e.x,
        e.points_per_unit,
        e.queue_horizon_mult,
        &m,
        e.bhat_samples,
    )?;
    let mut out = Outcome::default();
    out.streams.push(stream("queue paths (shared by every level)", &m));
    let mut t = Table::new("queue_prediction.csv", schema::QUEUE_PREDICTION);
    for p in &pts {
        t.push(vec![
            num(p.u),
            num(p.prediction),
            num(p.simulated.probability),
            num(p.simulated.std_err),
            num(p.ratio),
            num(p.ratio_se),
            num(p.bhat),
            num(p.bhat_se),
        ]);
    }
    let toward_one = pts.windows(2).all(|w| (w[1].ratio - 1.0).abs() <= (w[0].ratio - 1.0).abs());
    if !toward_one {
        out.flags.push(Flag::new("not-monotone", "prediction/simulation ratio does not move monotonically toward 1"));
    }
    out.tables.push(t);
    out.result = to_json(&pts);
    Ok(out)
}

pub fn double_sum(cfg: &RunConfig, d: &DoubleSumCmdConfig, seed: u64) -> Result<Outcome, CliError> {
    let m = mc(cfg, d.samples, seed);
    let mut x = DoubleSumConfig::new(d.family, d.u, d.n_values.clone(), m);
    x.horizon = d.horizon;
    x.points_per_unit = d.points_per_unit;
    x.control = d.control;
    let r = double_sum_diagnostic(&x)?;
    let mut out = Outcome::default();
    out.streams.push(stream("paths", &m));
    let mut t = Table::new("double_sum.csv", schema::DOUBLE_SUM);
    for (i, row) in r.rows.iter().enumerate() {
        let (cr, cse, cb) = match (r.control.get(i), r.control_bound.get(i)) {
            (Some(c), Some(b)) => (num(c.ratio), num(c.ratio_se), num(*b)),
            _ => (String::new(), String::new(), String::new()),
        };
        t.push(vec![
            num(row.n),
            row.blocks.to_string(),
            num(row.sigma),
            num(row.sigma_sigma),
            num(row.ratio),
            num(row.ratio_se),
            num(row.max_block_p),
            cr,
            cse,
            cb,
        ]);
    }
    if !r.decreasing {
        out.flags.push(Flag::new("not-monotone", "double-sum ratio does not decrease along the schedule"));
    }
    out.tables.push(t);
    out.result = to_json(&r);
    Ok(out)
}

pub const NO_ORACLE: &str = "no closed-form oracle; use --family brownian-sup checks";

pub fn oracle(o: &OracleConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    match o.family {
        OracleFamily::Parabola => {
            let alpha = o.alpha.unwrap_or(2.0);
            if alpha != 2.0 {
                return Err(CliError::Config(format!("alpha = {alpha}: {NO_ORACLE}")));
            }
            check_xs(&o.xs, "oracle.xs")?;
            let mut t = Table::new("oracle.csv", schema::ORACLE);
            for &s in &o.s_values {
                for &x in &o.xs {
                    t.push(vec![num(x), num(s), num(berman2_parabola_oracle(x, s, o.quadrature_order)?)]);
                }
            }
            out.tables.push(t);
        }
        OracleFamily::BrownianSup => {
            let mut t = Table::new("oracle.csv", schema::ORACLE);
            for &s in &o.s_values {
                t.push(vec![num(0.0), num(s), num(brownian_sup_oracle(s)?)]);
            }
            out.tables.push(t);
        }
        OracleFamily::Queue => {
            let mut t = Table::new("queue_closed_forms.csv", schema::QUEUE_CLOSED_FORMS);
            let mut all = Vec::new();
            for &u in &o.levels {
                let q = QueueAsymptotics::new(o.alpha.unwrap_or(1.0), o.c, u)?;
                t.push(vec![
                    num(u),
                    num(q.tau_star),
                    num(q.m_u),
                    num(q.a),
                    num(q.b),
                    num(q.v_u),
                    num(q.q_u),
                    num(q.sqrt_2a_over_b()),
                ]);
                all.push(q);
            }
            out.result = to_json(&all);
            out.tables.push(t);
        }
    }
    Ok(out)
}

pub fn convergence(cfg: &RunConfig, c: &ConvergenceConfig, seed: u64) -> Result<Outcome, CliError> {
    require(c.schedule.len() >= 2, "convergence.schedule", || "need at least 2 entries".into())?;
    let m = mc(cfg, c.samples, seed);
    let settings = BermanSettings { mc: m, estimator: c.estimator, antithetic: false };
    let (d1, d2) = (drift(c.b, c.beta)?, drift(c.b2, c.beta2)?);
    let rule = DomainRule::for_drifts(c.schedule[0], c.alpha, d1, c.alpha2, d2)?;
    let table = berman_2d_convergence(c.alpha, c.alpha2, d1, d2, c.x, &rule, &c.schedule, c.points_per_unit, &settings)?;
    let mut out = Outcome::default();
    for k in 0..c.schedule.len() {
        out.streams.push(stream(&format!("S = {}", c.schedule[k]), &McSettings { seed: derive_seed(seed, k as u64), ..m }));
    }
    let mut t = Table::new("convergence.csv", schema::CONVERGENCE);
    let mut prev: Option<f64> = None;
    for (s, row) in c.schedule.iter().zip(&table.rows) {
        let change = prev.map(|p| num((row.value - p).abs() / p.abs().max(f64::MIN_POSITIVE))).unwrap_or_default();
        t.push(vec![num(*s), num(row.value), num(row.std_err), num(row.grid_step), change]);
        prev = Some(row.value);
    }
    if !table.stabilized {
        out.flags.push(Flag::new(
            "not-stabilized",
            format!("last two S differ by more than 2 SE (relative change {})", table.last_relative_change),
        ));
    }
    out.tables.push(t);
    out.result = serde_json::json!({ "rule": to_json(&rule), "table": to_json(&table) });
    Ok(out)
}
