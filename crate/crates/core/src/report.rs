//! Result files: `summary.json`, `users.csv`, `powers.csv`, `schedule.csv`,
//! `protocol.csv` and `sweep.csv`. Column orders are fixed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::engine::{RunResult, Scenario, SpectrumPolicy, SweepPoint};
use crate::Result;

pub const USERS_HEADER: &str = "user_id,serving_bs,tier,R_bps,is_edge";
pub const POWERS_HEADER: &str = "slot,bs,subchannel,watts";
pub const SCHEDULE_HEADER: &str = "slot,bs,subchannel,user,rate_bps";
pub const SWEEP_HEADER: &str = "axis,value,algorithm,spectrum_policy,seed,gat_bps,aet_bps,aat_bps,config_hash";

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub gat_bps: f64,
    pub aet_bps: f64,
    pub aat_bps: f64,
    pub seed: u64,
    pub config_hash: &'a str,
    pub algorithm: &'static str,
    pub slots: u64,
    pub warmup_slots: u64,
    pub users: usize,
    pub edge_fraction: f64,
    pub counters: crate::engine::Counters,
    pub protocol: &'a crate::reference::ProtocolStats,
    pub scenario: &'a Scenario,
}

pub fn summary<'a>(result: &'a RunResult, scenario: &'a Scenario, hash: &'a str) -> Summary<'a> {
    Summary {
        gat_bps: result.gat_bps,
        aet_bps: result.aet_bps,
        aat_bps: result.aat_bps,
        seed: result.seed,
        config_hash: hash,
        algorithm: result.algorithm.as_str(),
        slots: result.slots,
        warmup_slots: result.warmup_slots,
        users: result.users.len(),
        edge_fraction: result.edge_fraction,
        counters: result.counters,
        protocol: &result.protocol,
        scenario,
    }
}

pub fn write_summary<W: Write>(mut out: W, result: &RunResult, scenario: &Scenario, hash: &str) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &summary(result, scenario, hash))?;
    writeln!(out)?;
    Ok(())
}

pub fn write_users<W: Write>(mut out: W, result: &RunResult) -> Result<()> {
    writeln!(out, "{USERS_HEADER}")?;
    for u in &result.users {
        writeln!(
            out,
            "{},{},{},{},{}",
            u.id,
            u.serving_bs,
            u.tier.as_str(),
            u.throughput_bps,
            u.is_edge
        )?;
    }
    Ok(())
}

pub fn write_powers<W: Write>(mut out: W, result: &RunResult) -> Result<()> {
    writeln!(out, "{POWERS_HEADER}")?;
    for (t, p) in &result.power_trace {
        for n in 0..p.bss() {
            for s in 0..p.subchannels() {
                writeln!(out, "{},{},{},{}", t, n, s, p.get(n, s))?;
            }
        }
    }
    Ok(())
}

pub fn write_schedule<W: Write>(mut out: W, result: &RunResult) -> Result<()> {
    writeln!(out, "{SCHEDULE_HEADER}")?;
    for (t, sched, rates) in &result.schedule_trace {
        for n in 0..sched.bss {
            for s in 0..sched.subchannels {
                if let Some(k) = sched.get(n, s) {
                    writeln!(out, "{},{},{},{},{}", t, n, s, k, rates[n * sched.subchannels + s])?;
                }
            }
        }
    }
    Ok(())
}

pub fn policy_label(p: SpectrumPolicy) -> String {
    match p {
        SpectrumPolicy::Sharing => "sharing".into(),
        SpectrumPolicy::Splitting { macro_subchannels } => format!("splitting:{macro_subchannels}"),
    }
}

/// One sweep row; `hash` is the hash of the run's own scenario.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub scenario: Scenario,
    pub result_gat: f64,
    pub result_aet: f64,
    pub result_aat: f64,
    pub hash: String,
}

impl SweepRow {
    pub fn new(point: &SweepPoint, scenario: &Scenario) -> SweepRow {
        SweepRow {
            axis: point.axis.as_str().to_string(),
            value: point.value.clone(),
            scenario: scenario.clone(),
            result_gat: point.result.gat_bps,
            result_aet: point.result.aet_bps,
            result_aat: point.result.aat_bps,
            hash: crate::config::config_hash(scenario),
        }
    }

    pub fn baseline(axis: &str, scenario: &Scenario, result: &RunResult) -> SweepRow {
        SweepRow {
            axis: axis.to_string(),
            value: "baseline".into(),
            scenario: scenario.clone(),
            result_gat: result.gat_bps,
            result_aet: result.aet_bps,
            result_aat: result.aat_bps,
            hash: crate::config::config_hash(scenario),
        }
    }
}

pub fn write_sweep<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.scenario.algorithm.as_str(),
            policy_label(r.scenario.spectrum_policy),
            r.scenario.seed,
            r.result_gat,
            r.result_aet,
            r.result_aat,
            r.hash
        )?;
    }
    Ok(())
}

/// Buffered file writer.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes every output of one run into `dir`.
pub fn write_run(dir: &Path, result: &RunResult, scenario: &Scenario, hash: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = create(&dir.join("summary.json"))?;
    write_summary(&mut f, result, scenario, hash)?;
    f.flush()?;
    let mut f = create(&dir.join("users.csv"))?;
    write_users(&mut f, result)?;
    f.flush()?;
    if scenario.trace.powers {
        let mut f = create(&dir.join("powers.csv"))?;
        write_powers(&mut f, result)?;
        f.flush()?;
    }
    if scenario.trace.schedule {
        let mut f = create(&dir.join("schedule.csv"))?;
        write_schedule(&mut f, result)?;
        f.flush()?;
    }
    if scenario.trace.protocol {
        let mut f = create(&dir.join("protocol.csv"))?;
        result.protocol.write_csv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}
