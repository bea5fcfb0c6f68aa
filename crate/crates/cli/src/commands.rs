use std::fs;
use std::path::Path;

use cyclic_shift::exact::{median_sup_distance, orbit_count, ExperimentConfig, Method};
use cyclic_shift::io::{
    load_matrix, paired_difference, write_column_stats, write_json, write_matrix, write_report, zscore_transform,
    Provenance, ReportFile,
};
use cyclic_shift::null_models::load_model_spec;
use cyclic_shift::{
    column_stats, convergence_experiment, cyclic_shift_test, exhaustive_test_result, iterative_detection,
    ColumnAnnotation, Direction, LocalStatistic, MarkerMatrix, NullModelSpec, PeelConfig, TestConfig,
};
use serde::Serialize;

use crate::manifest::{sidecar, RunManifest};
use crate::{Failure, InputArgs, ModelArg, PeelArgs, SimulateArgs, TestArgs, TestFlags, TransformArgs, TransformMode, ValidateArgs};

pub struct Context {
    pub argv: Vec<String>,
    pub threads: usize,
}

fn load(args: &InputArgs) -> Result<(MarkerMatrix, Provenance), Failure> {
    let loaded = load_matrix(&args.input, args.na_policy.into())?;
    let mut provenance = loaded.provenance;
    let x = match &args.chrom {
        Some(c) => {
            provenance.notes.push(format!("restricted to chromosome {c}"));
            loaded.matrix.select_chromosome(c)?
        }
        None => loaded.matrix,
    };
    if provenance.imputed_cells > 0 {
        eprintln!("note: imputed {} missing cells with sample medians", provenance.imputed_cells);
    }
    Ok((x, provenance))
}

fn locus(col: &ColumnAnnotation) -> String {
    match (&col.chromosome, col.position_bp) {
        (Some(c), Some(p)) => format!("{} (chr {c}:{p})", col.marker_id),
        (Some(c), None) => format!("{} (chr {c})", col.marker_id),
        _ => col.marker_id.clone(),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::output(format!("{}: {e}", dir.display())))
}

/// Writes report.json, column_stats.csv and manifest.json into `dir`.
fn write_run_outputs(
    dir: &Path,
    report: &ReportFile,
    x: &MarkerMatrix,
    stat: &LocalStatistic,
    mut manifest: RunManifest,
    input: &Path,
) -> Result<(), Failure> {
    create_dir(dir)?;
    manifest.input(input)?;
    let report_path = dir.join("report.json");
    write_report(&report_path, report).map_err(Failure::output)?;
    manifest.output(&report_path)?;
    let stats_path = dir.join("column_stats.csv");
    write_column_stats(&stats_path, x.columns(), &column_stats(x, stat)).map_err(Failure::output)?;
    manifest.output(&stats_path)?;
    manifest.write(&dir.join("manifest.json"))
}

fn test_config(flags: &TestFlags) -> TestConfig {
    TestConfig::new(flags.n_shifts, flags.seed)
        .with_direction(flags.direction.into())
        .with_statistic(flags.stat.into())
}

pub fn test(ctx: &Context, args: &TestArgs) -> Result<(), Failure> {
    let flags = &args.flags;
    let (x, provenance) = load(&flags.input)?;
    let stat: LocalStatistic = flags.stat.into();
    let direction: Direction = flags.direction.into();
    let result = if args.exhaustive {
        exhaustive_test_result(&x, direction, &stat, args.budget)?
    } else {
        cyclic_shift_test(&x, &test_config(flags))?
    };

    let how = if args.exhaustive {
        format!("all {} shift vectors", result.num_shifts)
    } else {
        format!("{} random shift vectors, seed {}", result.num_shifts, result.seed)
    };
    println!(
        "cyclic shift test: {} samples x {} markers, {} of column {}s, {how}",
        x.n_rows(),
        x.n_cols(),
        if direction == Direction::Gain { "max" } else { "min" },
        result.statistic
    );
    println!("  T(X) = {} at {}", result.t0, locus(&result.peak));
    println!(
        "  p-value = {} ({} of {} at least as extreme)",
        result.p_value, result.exceed_count, result.num_shifts
    );

    if let Some(dir) = &flags.out {
        let report = ReportFile::from_test(&result, &x, provenance);
        let manifest = RunManifest::new("test", &ctx.argv, args, Some(flags.seed), ctx.threads);
        write_run_outputs(dir, &report, &x, &stat, manifest, &flags.input.input)?;
        println!("  wrote {}", dir.display());
    }
    Ok(())
}

pub fn peel(ctx: &Context, args: &PeelArgs) -> Result<(), Failure> {
    let flags = &args.flags;
    let (x, provenance) = load(&flags.input)?;
    let peel_cfg = PeelConfig {
        alpha: args.alpha,
        max_iterations: args.max_iter,
        baseline_quantile: args.baseline_quantile,
    };
    let cfg = test_config(flags);
    let report = iterative_detection(&x, &cfg, &peel_cfg)?;

    println!(
        "peeling: {} samples x {} markers, alpha {}, at most {} iterations",
        x.n_rows(),
        x.n_cols(),
        args.alpha,
        args.max_iter
    );
    for f in &report.findings {
        let region = f
            .region
            .map_or("-".to_string(), |[l, r]| format!("columns {l}..={r}"));
        println!(
            "  [{}] T = {} at {}, p = {}, peeled {region}",
            f.iteration,
            f.t0,
            locus(&f.peak),
            f.p_value
        );
    }
    println!("  stopped: {:?}", report.stop);

    if let Some(dir) = &flags.out {
        let stat: LocalStatistic = flags.stat.into();
        let file = ReportFile::from_peel(&report, cfg.direction, stat.name(), &x, provenance);
        let manifest = RunManifest::new("peel", &ctx.argv, args, Some(flags.seed), ctx.threads);
        write_run_outputs(dir, &file, &x, &stat, manifest, &flags.input.input)?;
        println!("  wrote {}", dir.display());
    }
    Ok(())
}

fn load_spec(path: &Path, expected: Option<ModelArg>) -> Result<NullModelSpec, Failure> {
    let spec = load_model_spec(path)?;
    let kind = match spec {
        NullModelSpec::Markov(_) => ModelArg::Markov,
        NullModelSpec::Ar1(_) => ModelArg::Ar1,
    };
    if expected.is_some_and(|e| e != kind) {
        return Err(Failure::usage(format!(
            "--model {:?} does not match the model in {}",
            expected.unwrap(),
            path.display()
        )));
    }
    Ok(spec)
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<(), Failure> {
    let spec = load_spec(&args.spec, args.model)?;
    let x = spec.simulate(args.n, args.m, args.seed)?;
    write_matrix(&args.out, &x).map_err(Failure::output)?;
    let mut manifest = RunManifest::new("simulate", &ctx.argv, args, Some(args.seed), ctx.threads);
    manifest.input(&args.spec)?;
    manifest.output(&args.out)?;
    manifest.write(&sidecar(&args.out))?;
    println!(
        "simulated {} x {} from {} (seed {}) -> {}",
        args.n,
        args.m,
        spec.describe(),
        args.seed,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ValidationSummary {
    m: usize,
    replicates: usize,
    method: Method,
    all_full: bool,
    median_sup_distance: f64,
}

pub fn validate(ctx: &Context, args: &ValidateArgs) -> Result<(), Failure> {
    let spec = load_spec(&args.spec, None)?;
    let mut cfg = ExperimentConfig::new(args.n, args.m_list.clone(), args.replicates, args.seed);
    cfg.method = args.method.into();
    cfg.num_samples = args.samples;
    cfg.budget = args.budget;
    if matches!(cfg.method, cyclic_shift::MethodChoice::Exact) {
        for &m in &cfg.m_values {
            let needed = orbit_count(cfg.n, m).unwrap_or(u128::MAX);
            if needed > cfg.budget as u128 {
                return Err(cyclic_shift::Error::BudgetExceeded {
                    required: needed,
                    budget: cfg.budget,
                }
                .into());
            }
        }
    }
    let results = convergence_experiment(&spec, &cfg)?;

    create_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("validate", &ctx.argv, args, Some(args.seed), ctx.threads);
    manifest.input(&args.spec)?;
    for c in &results {
        let path = args
            .out_dir
            .join(format!("comparison_m{}_rep{:03}.json", c.meta.m, c.meta.replicate));
        write_json(&path, c).map_err(Failure::output)?;
        manifest.output(&path)?;
    }
    let mut summary = Vec::new();
    println!("convergence experiment: {}, n = {}", spec.describe(), args.n);
    for &m in &args.m_list {
        let group: Vec<_> = results.iter().filter(|c| c.meta.m == m).collect();
        let row = ValidationSummary {
            m,
            replicates: group.len(),
            method: group[0].meta.method,
            all_full: group.iter().all(|c| c.meta.full),
            median_sup_distance: median_sup_distance(&results, m).unwrap_or(f64::NAN),
        };
        println!(
            "  m = {:>6}: median sup distance {:.5} over {} replicates ({:?}{})",
            m,
            row.median_sup_distance,
            row.replicates,
            row.method,
            if row.all_full { "" } else { ", some matrices not full" }
        );
        summary.push(row);
    }
    let summary_path = args.out_dir.join("summary.json");
    write_json(&summary_path, &summary).map_err(Failure::output)?;
    manifest.output(&summary_path)?;
    manifest.write(&args.out_dir.join("manifest.json"))
}

pub fn transform(ctx: &Context, args: &TransformArgs) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("transform", &ctx.argv, args, None, ctx.threads);
    let primary = load_matrix(&args.input, args.na_policy.into())?;
    manifest.input(&args.input)?;
    let out = match args.mode {
        TransformMode::Zscore => {
            let z = zscore_transform(&primary.matrix, args.floor)?;
            if z.clamped_ones > 0 {
                eprintln!("warning: {} p-values equal to 1 were clamped below 1", z.clamped_ones);
            }
            z.matrix
        }
        TransformMode::PairedDiff => {
            let normal_path = args
                .normal
                .as_ref()
                .ok_or_else(|| Failure::usage("paired-diff needs --normal"))?;
            let normal = load_matrix(normal_path, args.na_policy.into())?;
            manifest.input(normal_path)?;
            paired_difference(&primary.matrix, &normal.matrix)?
        }
    };
    write_matrix(&args.out, &out).map_err(Failure::output)?;
    manifest.output(&args.out)?;
    manifest.write(&sidecar(&args.out))?;
    println!(
        "{:?}: {} samples x {} markers -> {}",
        args.mode,
        out.n_rows(),
        out.n_cols(),
        args.out.display()
    );
    Ok(())
}
