//! Double-sum ratio `ΣΣ/Σ`: partition the parameter set into blocks of
//! side `n · v_i(u)` along each axis, and compare pairwise joint block
//! exceedances with single-block exceedances,
//! `ΣΣ/Σ = E[k(k−1)] / E[k]` where `k` counts exceeding blocks.

use serde::{Deserialize, Serialize};

use super::ScalingFamily;
use crate::error::{ensure, invalid, Error, Result};
use crate::gauss::{ProcessPlan, ProcessSpec};
use crate::grid::{Domain, GridSpec, Lattice2D};
use crate::mc::{batch_ratio, run, McSettings};
use crate::rng::derive_seed;

const CONTROL_STREAM: u64 = 0xc0_47_01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSumConfig {
    /// `Stationary1D` or `Stationary2D`.
    pub family: ScalingFamily,
    pub u: f64,
    /// Side `T` of `[0, T]` or `[0, T]²`.
    pub horizon: f64,
    pub points_per_unit: f64,
    pub n_values: Vec<f64>,
    pub mc: McSettings,
    /// Also run the independent-blocks control.
    pub control: bool,
}

impl DoubleSumConfig {
    pub fn new(family: ScalingFamily, u: f64, n_values: Vec<f64>, mc: McSettings) -> Self {
        Self {
            family,
            u,
            horizon: 2.0,
            points_per_unit: 512.0,
            n_values,
            mc,
            control: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSumRow {
    pub n: f64,
    pub blocks: usize,
    /// Block side per axis, in parameter units.
    pub block_side: Vec<f64>,
    /// `Σ = E[k]`.
    pub sigma: f64,
    /// `ΣΣ = E[k(k−1)]` (ordered pairs of distinct blocks).
    pub sigma_sigma: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    /// Largest single-block exceedance probability.
    pub max_block_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSumResult {
    pub rows: Vec<DoubleSumRow>,
    /// Same partition, blocks simulated independently of each other.
    pub control: Vec<DoubleSumRow>,
    /// `(K − 1) · max_k p_k` for each control row.
    pub control_bound: Vec<f64>,
    pub decreasing: bool,
}

struct Partition {
    /// Block index of every value (row-major for fields); `usize::MAX` for
    /// points outside the union of whole blocks.
    block_of: Vec<usize>,
    blocks: usize,
    side: Vec<f64>,
    /// Grid points per block along each axis.
    side_points: Vec<usize>,
}

fn axis_blocks(grid: &GridSpec, side: f64) -> (Vec<usize>, usize, usize) {
    let pts = ((side / grid.step()).round() as usize).max(1);
    let k = grid.n_points / pts;
    let ids = (0..grid.n_points).map(|i| if i / pts < k { i / pts } else { usize::MAX }).collect();
    (ids, k, pts)
}

fn partition(domain: &Domain, sides: &[f64]) -> Result<Partition> {
    let p = match domain {
        Domain::Line(g) => {
            let (ids, k, pts) = axis_blocks(g, sides[0]);
            Partition { block_of: ids, blocks: k, side: vec![pts as f64 * g.step()], side_points: vec![pts] }
        }
        Domain::Plane(l) => {
            let (a, k1, p1) = axis_blocks(&l.axis1, sides[0]);
            let (b, k2, p2) = axis_blocks(&l.axis2, sides[1]);
            let mut ids = Vec::with_capacity(a.len() * b.len());
            for &i in &a {
                for &j in &b {
                    ids.push(if i == usize::MAX || j == usize::MAX { usize::MAX } else { i * k2 + j });
                }
            }
            Partition {
                block_of: ids,
                blocks: k1 * k2,
                side: vec![p1 as f64 * l.axis1.step(), p2 as f64 * l.axis2.step()],
                side_points: vec![p1, p2],
            }
        }
    };
    if p.blocks < 2 {
        return Err(Error::TooFewBlocks { blocks: p.blocks });
    }
    Ok(p)
}

/// Columns: `k`, `k(k−1)`, then one exceedance indicator per block.
fn summarize(exceed: &[bool], out: &mut [f64]) {
    let k = exceed.iter().filter(|&&e| e).count() as f64;
    out[0] = k;
    out[1] = k * (k - 1.0);
    for (o, &e) in out[2..].iter_mut().zip(exceed) {
        *o = e as u8 as f64;
    }
}

fn row_from(m: &crate::mc::SampleMatrix, n: f64, part: &Partition, batches: usize) -> DoubleSumRow {
    let k = m.column(0);
    let kk = m.column(1);
    let rows = m.rows() as f64;
    let (ratio, ratio_se) = batch_ratio(&kk, &k, batches);
    let max_block_p = (0..part.blocks)
        .map(|b| m.column(2 + b).iter().sum::<f64>() / rows)
        .fold(0.0, f64::max);
    DoubleSumRow {
        n,
        blocks: part.blocks,
        block_side: part.side.clone(),
        sigma: k.iter().sum::<f64>() / rows,
        sigma_sigma: kk.iter().sum::<f64>() / rows,
        ratio,
        ratio_se,
        max_block_p,
    }
}

pub fn double_sum_diagnostic(cfg: &DoubleSumConfig) -> Result<DoubleSumResult> {
    cfg.mc.validate()?;
    cfg.family.validate()?;
    ensure(cfg.u > 0.0, "u", || "must be positive".into())?;
    ensure(cfg.horizon > 0.0, "horizon", || "must be positive".into())?;
    ensure(!cfg.n_values.is_empty(), "n_values", || "need at least one n".into())?;
    ensure(cfg.n_values.iter().all(|&n| n > 0.0), "n_values", || "must be positive".into())?;
    let u = cfg.u;
    let (spec, domain, scales) = match cfg.family {
        ScalingFamily::Stationary1D { a, alpha } => (
            ProcessSpec::StationaryExp1D { a, alpha },
            Domain::Line(GridSpec::with_density(0.0, cfg.horizon, cfg.points_per_unit)?),
            vec![a.powf(-1.0 / alpha) * u.powf(-2.0 / alpha)],
        ),
        ScalingFamily::Stationary2D { a1, a2, alpha1, alpha2 } => {
            let g = GridSpec::with_density(0.0, cfg.horizon, cfg.points_per_unit)?;
            (
                ProcessSpec::StationaryExp2D { a1, a2, alpha1, alpha2 },
                Domain::Plane(Lattice2D::new(g, g)),
                vec![a1.powf(-1.0 / alpha1) * u.powf(-2.0 / alpha1), a2.powf(-1.0 / alpha2) * u.powf(-2.0 / alpha2)],
            )
        }
        _ => return Err(invalid("family", "the double-sum diagnostic supports stationary families only")),
    };
    let parts = cfg
        .n_values
        .iter()
        .map(|&n| partition(&domain, &scales.iter().map(|s| n * s).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;

    let plan = ProcessPlan::new(spec, domain)?;
    let width: usize = parts.iter().map(|p| 2 + p.blocks).sum();
    let m = run(
        &cfg.mc,
        width,
        || (plan.sampler(), vec![0.0; plan.len()], Vec::new()),
        |(s, buf, exceed): &mut (_, Vec<f64>, Vec<bool>), rng, out| {
            s.fill(rng, buf);
            let mut off = 0;
            for p in &parts {
                exceed.clear();
                exceed.resize(p.blocks, false);
                for (&b, &w) in p.block_of.iter().zip(buf.iter()) {
                    if b != usize::MAX && w > u {
                        exceed[b] = true;
                    }
                }
                summarize(exceed, &mut out[off..off + 2 + p.blocks]);
                off += 2 + p.blocks;
            }
        },
    );
    let mut rows = Vec::new();
    let mut off = 0;
    for (p, &n) in parts.iter().zip(&cfg.n_values) {
        let sub = crate::mc::SampleMatrix {
            width: 2 + p.blocks,
            data: m.data.chunks(width).flat_map(|r| r[off..off + 2 + p.blocks].to_vec()).collect(),
        };
        rows.push(row_from(&sub, n, p, cfg.mc.batches));
        off += 2 + p.blocks;
    }

    let mut control = Vec::new();
    let mut control_bound = Vec::new();
    if cfg.control {
        for (idx, (p, &n)) in parts.iter().zip(&cfg.n_values).enumerate() {
            let (block_spec, block_domain) = match (spec, domain) {
                (s @ ProcessSpec::StationaryExp1D { .. }, Domain::Line(g)) => {
                    (s, Domain::Line(GridSpec::new(0.0, (p.side_points[0] - 1).max(1) as f64 * g.step(), p.side_points[0].max(2))?))
                }
                (s, Domain::Plane(l)) => (
                    s,
                    Domain::Plane(Lattice2D::new(
                        GridSpec::new(0.0, (p.side_points[0] - 1).max(1) as f64 * l.axis1.step(), p.side_points[0].max(2))?,
                        GridSpec::new(0.0, (p.side_points[1] - 1).max(1) as f64 * l.axis2.step(), p.side_points[1].max(2))?,
                    )),
                ),
                _ => unreachable!(),
            };
            let bplan = ProcessPlan::new(block_spec, block_domain)?;
            let blocks = p.blocks;
            let mc = McSettings { seed: derive_seed(cfg.mc.seed, CONTROL_STREAM + idx as u64), ..cfg.mc };
            let cm = run(
                &mc,
                2 + blocks,
                || (bplan.sampler(), vec![0.0; bplan.len()], vec![false; blocks]),
                |(s, buf, exceed): &mut (_, Vec<f64>, Vec<bool>), rng, out| {
                    for e in exceed.iter_mut() {
                        s.fill(rng, buf);
                        *e = buf.iter().any(|&w| w > u);
                    }
                    summarize(exceed, out);
                },
            );
            let row = row_from(&cm, n, p, cfg.mc.batches);
            control_bound.push((blocks as f64 - 1.0) * row.max_block_p);
            control.push(row);
        }
    }
    let decreasing = rows.windows(2).all(|w| w[1].ratio < w[0].ratio);
    Ok(DoubleSumResult { rows, control, control_bound, decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_values: Vec<f64>) -> DoubleSumConfig {
        let mut mc = McSettings::new(4000, 3);
        mc.chunk_size = 500;
        let mut c = DoubleSumConfig::new(ScalingFamily::Stationary1D { a: 1.0, alpha: 1.0 }, 2.0, n_values, mc);
        c.points_per_unit = 64.0;
        c
    }

    #[test]
    fn single_block_is_an_error() {
        let e = double_sum_diagnostic(&cfg(vec![100.0])).unwrap_err();
        assert!(matches!(e, Error::TooFewBlocks { blocks: 0 | 1 }));
    }

    #[test]
    fn non_stationary_family_rejected() {
        let mut c = cfg(vec![2.0]);
        c.family = ScalingFamily::Chi { m: 1, a: 1.0, alpha: 1.0 };
        assert!(double_sum_diagnostic(&c).is_err());
    }

    #[test]
    fn control_respects_independence_bound() {
        let r = double_sum_diagnostic(&cfg(vec![2.0, 4.0])).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].blocks, 4);
        for (row, bound) in r.control.iter().zip(&r.control_bound) {
            assert!(row.ratio <= bound + 3.0 * row.ratio_se, "{row:?} bound {bound}");
        }
        // blocks touch each other in the real process, so joint exceedances
        // are far more common than under independence
        assert!(r.rows[0].ratio > r.control[0].ratio);
    }

    #[test]
    fn planar_partition_counts() {
        let g = GridSpec::new(0.0, 1.0, 11).unwrap();
        let p = partition(&Domain::Plane(Lattice2D::new(g, g)), &[0.5, 0.3]).unwrap();
        assert_eq!(p.blocks, 2 * 3);
        assert_eq!(p.side_points, vec![5, 3]);
    }
}
