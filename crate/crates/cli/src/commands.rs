//! Subcommand implementations.

use std::path::Path;

use cqpolar::channel::io::{channel_from_file, channel_to_file, load_channel, ChannelFile};
use cqpolar::channel::presets::{preset, Preset};
use cqpolar::channel::{avg_fidelity, f_max, holevo_information, CqChannel};
use cqpolar::checks::{run_all, summarize, CheckId, CheckReport, CheckSummary, Family, SuiteConfig};
use cqpolar::code::{build_plan, CodeParams, CodePlan, PlanMode, SectionMode};
use cqpolar::decoder::{error_experiment, search_section_seeds, ExperimentConfig, ExperimentReport, SectionSearch};
use cqpolar::limits::Limits;
use cqpolar::linalg::NumericTolerances;
use cqpolar::mac::{one_step_losses, polarized_region_estimate, region, MacChannel, RateRegion};
use cqpolar::polarize::{polarization_scan, PolarizationRecord};
use serde::{Deserialize, Serialize};

use crate::manifest::{ManifestBuilder, RunManifest};
use crate::output::{csv_bytes, sibling, write_atomic, write_json};
use crate::{
    ChannelSource, CliError, ConstructArgs, DecodeSimArgs, FamilyName, MacRegionArgs, ModeName, PolarizeArgs,
    PresetArgs, PresetName, SectionName, VerifyArgs,
};

fn params<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn need<T: Copy>(value: Option<T>, flag: &str, preset: PresetName) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::validation(format!("preset {preset:?} needs --{flag}")))
}

fn build_preset(
    name: PresetName,
    q: Option<usize>,
    p: Option<f64>,
    lambda: Option<f64>,
    epsilon: Option<f64>,
    angles: Option<&Vec<f64>>,
    k: Option<usize>,
    seed: Option<u64>,
) -> Result<CqChannel, CliError> {
    let spec = match name {
        PresetName::ClassicalSymmetric => Preset::ClassicalSymmetric { q: need(q, "q", name)?, p: need(p, "p", name)? },
        PresetName::PureStates => Preset::PureStates {
            angles: angles.cloned().ok_or_else(|| CliError::validation("preset pure-states needs --angles"))?,
        },
        PresetName::DepolarizedOrthogonal => {
            Preset::DepolarizedOrthogonal { q: need(q, "q", name)?, lambda: need(lambda, "lambda", name)? }
        }
        PresetName::Random => Preset::Random { q: need(q, "q", name)?, k: need(k, "k", name)?, seed: seed.unwrap_or(0) },
        PresetName::Erasure => Preset::Erasure { q: need(q, "q", name)?, epsilon: need(epsilon, "epsilon", name)? },
    };
    Ok(preset(&spec)?)
}

fn load_source(src: &ChannelSource, manifest: &mut ManifestBuilder) -> Result<CqChannel, CliError> {
    match (&src.channel, src.preset) {
        (Some(path), _) => {
            let text = manifest.read_input(path)?;
            Ok(load_channel(&text, &NumericTolerances::default())?)
        }
        (None, Some(name)) => {
            build_preset(name, src.q, src.p, src.lambda, src.epsilon, src.angles.as_ref(), src.k, src.preset_seed)
        }
        (None, None) => Err(CliError::validation("give either --channel FILE or --preset NAME")),
    }
}

#[derive(Debug, Serialize)]
struct ChannelSummary {
    group: Vec<u32>,
    q: usize,
    dim: usize,
    blocks: usize,
    information: f64,
    avg_fidelity: f64,
    f_max: f64,
}

fn summary(w: &CqChannel) -> ChannelSummary {
    ChannelSummary {
        group: w.group().factor_orders().map(|o| o.to_vec()).unwrap_or_default(),
        q: w.q(),
        dim: w.dim(),
        blocks: w.num_blocks(),
        information: holevo_information(w),
        avg_fidelity: avg_fidelity(w),
        f_max: f_max(w),
    }
}

#[derive(Serialize)]
struct ValidateReport {
    manifest: RunManifest,
    channel: ChannelSummary,
}

pub fn channel_validate(file: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("channel validate", serde_json::json!({ "file": file }), None);
    let text = m.read_input(file)?;
    let w = load_channel(&text, &NumericTolerances::default())
        .map_err(|e| CliError::validation(format!("{}: {e}", file.display())))?;
    let s = summary(&w);
    println!(
        "ok: q={} dim={} blocks={} I={:.12} F={:.12} Fmax={:.12}",
        s.q, s.dim, s.blocks, s.information, s.avg_fidelity, s.f_max
    );
    if let Some(out) = out {
        write_json(out, &ValidateReport { manifest: m.finish(), channel: s })?;
    }
    Ok(())
}

pub fn channel_preset(args: &PresetArgs, out: &Path) -> Result<(), CliError> {
    let w = build_preset(
        args.preset,
        args.q,
        args.p,
        args.lambda,
        args.epsilon,
        args.angles.as_ref(),
        args.k,
        args.preset_seed,
    )?;
    write_json(out, &channel_to_file(&w)?)
}

#[derive(Serialize)]
struct ScanRow {
    branch: String,
    #[serde(rename = "I")]
    information: f64,
    #[serde(rename = "Fmax")]
    f_max: f64,
    #[serde(rename = "F")]
    avg_fidelity: f64,
    #[serde(rename = "best_H")]
    best_h: String,
    #[serde(rename = "I_quot")]
    quotient_information: f64,
    #[serde(rename = "F_quot")]
    quotient_fidelity: f64,
}

#[derive(Serialize)]
struct ScanReport {
    manifest: RunManifest,
    channel: ChannelSummary,
    n: usize,
    mean_information: f64,
    records: Vec<PolarizationRecord>,
}

pub fn polarize(args: &PolarizeArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("polarize", params(args), None);
    let w = load_source(&args.source, &mut m)?;
    let records = polarization_scan(&w, args.n, &Limits::default())?;
    let q = w.q();
    let rows: Vec<ScanRow> = records
        .iter()
        .map(|r| {
            let best = r.best_quotient(q);
            ScanRow {
                branch: r.branch.to_string(),
                information: r.information,
                f_max: r.f_max,
                avg_fidelity: r.avg_fidelity,
                best_h: best.description.clone(),
                quotient_information: best.information,
                quotient_fidelity: best.avg_fidelity,
            }
        })
        .collect();
    write_atomic(&args.out, &csv_bytes(&rows)?)?;
    let mean_information = records.iter().map(|r| r.information).sum::<f64>() / records.len() as f64;
    let report = ScanReport { manifest: m.finish(), channel: summary(&w), n: args.n, mean_information, records };
    let json = args.json.clone().unwrap_or_else(|| sibling(&args.out, "json"));
    write_json(&json, &report)
}

/// Plan file written by `construct` and read by `decode-sim`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanFile {
    pub manifest: RunManifest,
    pub channel: ChannelFile,
    pub plan: CodePlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_search: Option<SectionSearch>,
}

pub fn construct(args: &ConstructArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("construct", params(args), Some(args.seed));
    let w = load_source(&args.source, &mut m)?;
    let mode = match args.mode {
        ModeName::PaperStrict => PlanMode::PaperStrict,
        ModeName::BestEffort => PlanMode::BestEffort { tau: args.tau },
        ModeName::TopK => PlanMode::TopK { k: args.top_k.unwrap_or((1usize << args.n) / 2) },
    };
    let params = CodeParams {
        n: args.n,
        delta: args.delta,
        beta: args.beta,
        beta_prime: args.beta_prime,
        mode,
        sections: match args.sections {
            SectionName::Random => SectionMode::Random,
            SectionName::Zero => SectionMode::Zero,
        },
        seed: args.seed,
    };
    let mut plan = build_plan(&w, &params, &Limits::default())?;
    let mut section_search = None;
    if let Some(count) = args.search_sections {
        if count == 0 {
            return Err(CliError::validation("--search-sections must be at least 1"));
        }
        let seeds: Vec<u64> = (args.seed..args.seed.saturating_add(count)).collect();
        let cfg = ExperimentConfig::new(args.search_trials, args.seed);
        let found = search_section_seeds(&w, &plan, &seeds, &cfg, &Limits::default())?;
        plan = plan.with_section_seed(found.best_seed)?;
        section_search = Some(found);
    }
    eprintln!(
        "plan: N={} rate={:.6} nats bound={:.6e} unfrozen={}",
        plan.block_length(),
        plan.rate,
        plan.bound,
        plan.branches.iter().filter(|b| !b.is_frozen(w.q())).count()
    );
    write_json(&args.out, &PlanFile { manifest: m.finish(), channel: channel_to_file(&w)?, plan, section_search })
}

#[derive(Serialize)]
struct StepRow {
    branch: String,
    frozen: bool,
    alphabet: usize,
    quotient_fidelity: f64,
    step_bound: f64,
    exact_error: Option<f64>,
    mean_step_error: f64,
    empirical_step_error: f64,
}

#[derive(Serialize)]
struct DecodeReport {
    manifest: RunManifest,
    report: ExperimentReport,
}

pub fn decode_sim(args: &DecodeSimArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("decode-sim", params(args), Some(args.seed));
    let text = m.read_input(&args.plan)?;
    let file: PlanFile = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: malformed plan file: {e}", args.plan.display())))?;
    let w = channel_from_file(&file.channel, &NumericTolerances::default())?;
    let cfg = ExperimentConfig {
        trials: args.trials,
        seed: args.seed,
        random_sections: !args.fixed_sections,
        exact_profile: !args.no_exact_profile,
    };
    let report = error_experiment(&w, &file.plan, &cfg, &Limits::default())?;
    let rows: Vec<StepRow> = report
        .steps
        .iter()
        .map(|s| StepRow {
            branch: s.branch.to_string(),
            frozen: s.frozen,
            alphabet: s.alphabet,
            quotient_fidelity: s.quotient_fidelity,
            step_bound: s.step_bound,
            exact_error: s.exact_error,
            mean_step_error: s.mean_step_error,
            empirical_step_error: s.empirical_step_error,
        })
        .collect();
    let profile = args.profile.clone().unwrap_or_else(|| sibling(&args.out, "steps.csv"));
    write_atomic(&profile, &csv_bytes(&rows)?)?;
    eprintln!(
        "block errors {}/{} (rate {:.4}, bound {:.4}, within bound: {})",
        report.block_errors, report.trials, report.block_error_rate, report.bound, report.within_bound
    );
    write_json(&args.out, &DecodeReport { manifest: m.finish(), report })
}

#[derive(Serialize)]
struct VerifySummary {
    manifest: RunManifest,
    reports: usize,
    failures: usize,
    checks: Vec<CheckSummary>,
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let m = ManifestBuilder::new("verify", params(args), Some(args.seed));
    let mut cfg = SuiteConfig::new(args.seed, args.trials);
    cfg.groups = args.q.iter().map(|&q| vec![q]).collect();
    cfg.ks = args.k.clone();
    if args.checks.trim() != "all" {
        cfg.checks = args
            .checks
            .split(',')
            .map(|s| s.trim().parse::<CheckId>())
            .collect::<cqpolar::Result<Vec<_>>>()?;
    }
    let reports = run_all(&cfg)?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&serde_json::to_string(r).map_err(|e| CliError::io(e.to_string()))?);
        text.push('\n');
    }
    let failures = reports.iter().filter(|r| !r.pass).count();
    match &args.out {
        Some(out) => {
            write_atomic(out, text.as_bytes())?;
            let s = VerifySummary { manifest: m.finish(), reports: reports.len(), failures, checks: summarize(&reports) };
            write_json(&sibling(out, "summary.json"), &s)?;
        }
        None => print!("{text}"),
    }
    eprintln!("{} reports, {failures} failures", reports.len());
    if failures > 0 {
        let first: &CheckReport = reports.iter().find(|r| !r.pass).expect("a failing report");
        return Err(CliError::check_failed(format!(
            "{failures} check failures; first: {} ({}) slack {:e}",
            first.check_id, first.detail, first.slack
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct PolarizedEntry {
    n: usize,
    region: RateRegion,
    /// `I[S](W) − I^pol_n[S]` by mask.
    losses: Vec<f64>,
}

#[derive(Serialize)]
struct MacReport {
    manifest: RunManifest,
    users: Vec<Vec<u32>>,
    region: RateRegion,
    /// `2 I[S](W) − I[S](W⁻) − I[S](W⁺)` by mask.
    one_step_losses: Vec<(u32, f64)>,
    polarized: Vec<PolarizedEntry>,
}

fn parse_user(spec: &str) -> Result<Vec<u32>, CliError> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| CliError::validation(format!("user group `{spec}` is not a list of cyclic orders")))
        })
        .collect()
}

fn family(f: FamilyName) -> Family {
    match f {
        FamilyName::Random => Family::Random,
        FamilyName::NearUseless => Family::NearUseless,
        FamilyName::NearHomomorphism => Family::NearHomomorphism,
        FamilyName::Hybrid => Family::Hybrid,
        FamilyName::Pure => Family::Pure,
        FamilyName::Classical => Family::Classical,
    }
}

pub fn mac_region(args: &MacRegionArgs) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new("mac-region", params(args), Some(args.seed));
    let users = args.users.iter().map(|u| parse_user(u)).collect::<Result<Vec<_>, _>>()?;
    let w = match &args.channel {
        Some(path) => {
            let text = m.read_input(path)?;
            MacChannel::new(users.clone(), load_channel(&text, &NumericTolerances::default())?)?
        }
        None => MacChannel::random(
            users.clone(),
            args.k.unwrap_or(2),
            family(args.family.unwrap_or(FamilyName::Random)),
            args.seed,
        )?,
    };
    let base = region(&w)?;
    let limits = Limits::default();
    let polarized = (1..=args.n)
        .map(|n| {
            let r = polarized_region_estimate(&w, n, &limits)?;
            let losses = base.constraints.iter().zip(&r.constraints).map(|(a, b)| a.bound - b.bound).collect();
            Ok(PolarizedEntry { n, region: r, losses })
        })
        .collect::<cqpolar::Result<Vec<_>>>()?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["mask".to_string(), "users".to_string(), "bound".to_string()];
    header.extend(polarized.iter().map(|p| format!("polarized_n{}", p.n)));
    csv.write_record(&header).map_err(|e| CliError::io(e.to_string()))?;
    for (i, c) in base.constraints.iter().enumerate() {
        let mut row = vec![
            c.mask.to_string(),
            c.users.iter().map(|u| u.to_string()).collect::<Vec<_>>().join("+"),
            c.bound.to_string(),
        ];
        row.extend(polarized.iter().map(|p| p.region.constraints[i].bound.to_string()));
        csv.write_record(&row).map_err(|e| CliError::io(e.to_string()))?;
    }
    let bytes = csv.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    write_atomic(&args.csv.clone().unwrap_or_else(|| sibling(&args.out, "csv")), &bytes)?;

    let report = MacReport {
        manifest: m.finish(),
        users,
        one_step_losses: one_step_losses(&w)?,
        region: base,
        polarized,
    };
    write_json(&args.out, &report)
}
