use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{error, info};
use ocp_pinn::metrics::{error_report, ErrorReport};
use ocp_pinn::network::{write_checkpoint, CheckpointHeader, NetworkConfig, NetworkParams};
use ocp_pinn::problems::ProblemId;
use ocp_pinn::reference::{gradient_method, GridField};
use ocp_pinn::sampling::sample_dataset;
use ocp_pinn::train::Trainer;

use crate::config::RunConfig;
use crate::CliError;

/// Directory holding the outputs of one test and seed.
pub fn test_dir(out: &Path, id: ProblemId, seed: u64) -> PathBuf {
    out.join(format!("{id}-seed{seed}"))
}

pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Default)]
pub struct RunSummary {
    pub reports: Vec<(ProblemId, ErrorReport)>,
    pub failures: Vec<(ProblemId, String)>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_field(dir: &Path, name: &str, field: &GridField) -> Result<(), CliError> {
    let mut f = create(&dir.join(name))?;
    field.write_csv(&mut f)?;
    f.flush()?;
    Ok(())
}

fn checkpoint(
    path: &Path,
    id: ProblemId,
    net: &NetworkConfig,
    epoch: usize,
    nu: f64,
    params: &NetworkParams,
) -> Result<(), CliError> {
    let header = CheckpointHeader {
        problem: id.to_string(),
        layer_sizes: params.layer_sizes().to_vec(),
        activation: net.activation,
        seed: net.seed,
        epoch,
        nu,
    };
    let mut f = create(path)?;
    write_checkpoint(&mut f, &header, params)?;
    f.flush()?;
    Ok(())
}

/// Runs the whole pipeline for every configured test. A failing test leaves
/// its partial outputs plus a `FAILED` record and does not stop the others.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    // Resolve every per-test setting before touching the filesystem.
    let settings = cfg
        .tests
        .iter()
        .map(|&id| cfg.settings(id).map(|s| (id, s)))
        .collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(&cfg.out_dir)?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut manifest = create(&cfg.out_dir.join("manifest.txt"))?;
    writeln!(manifest, "# started at unix time {stamp}")?;
    manifest.write_all(cfg.render().as_bytes())?;
    manifest.flush()?;

    let mut summary = RunSummary::default();
    let mut table = create(&cfg.out_dir.join("errors.csv"))?;
    writeln!(table, "{}", ErrorReport::CSV_HEADER)?;
    for (id, settings) in settings {
        let dir = test_dir(&cfg.out_dir, id, cfg.seed);
        fs::create_dir_all(&dir)?;
        let _ = fs::remove_file(dir.join(FAILED_MARKER));
        let mut stage = "setup";
        match run_test(cfg, id, &settings, &dir, &mut stage) {
            Ok(report) => {
                writeln!(table, "{}", report.csv_row(id.as_str(), cfg.seed))?;
                table.flush()?;
                summary.reports.push((id, report));
            }
            Err(e) => {
                error!("{id}: {stage} failed: {e}");
                let mut f = create(&dir.join(FAILED_MARKER))?;
                writeln!(f, "test = {id}\nseed = {}\nstage = {stage}\nerror = {e}", cfg.seed)?;
                f.flush()?;
                summary.failures.push((id, format!("{stage}: {e}")));
            }
        }
    }
    table.flush()?;
    Ok(summary)
}

fn run_test(
    cfg: &RunConfig,
    id: ProblemId,
    settings: &crate::TestSettings,
    dir: &Path,
    stage: &mut &'static str,
) -> Result<ErrorReport, CliError> {
    let spec = cfg.spec(id);
    let seed = cfg.seed;

    *stage = "reference";
    info!("{id}: solving the reference control problem");
    let reference = gradient_method(&spec, &settings.solver_config())?;
    info!(
        "{id}: reference after {} iterations, J = {:.6e}, residual {:.2e}",
        reference.iterations,
        reference.j_history.last().copied().unwrap_or(f64::NAN),
        reference.optimality_residual
    );
    if cfg.emit_fields {
        write_field(dir, "reference_y.csv", &reference.y_star)?;
        write_field(dir, "reference_u.csv", &reference.u_star)?;
        write_field(dir, "reference_p.csv", &reference.p_star)?;
        write_field(dir, "reference_y_unc.csv", &reference.y_uncontrolled)?;
    }
    let mut f = create(&dir.join("reference_cost.csv"))?;
    writeln!(f, "iteration,J")?;
    for (k, j) in reference.j_history.iter().enumerate() {
        writeln!(f, "{k},{j}")?;
    }
    f.flush()?;

    *stage = "sampling";
    let dataset = sample_dataset(&reference, &spec, seed)?;
    let mut f = create(&dir.join("dataset.csv"))?;
    dataset.write_csv(&mut f)?;
    f.flush()?;

    *stage = "training";
    let net = settings.network_config(&spec, seed);
    let train_cfg = settings.train_config(&spec, seed);
    let trainer = Trainer::new(&spec, &dataset, &net, &train_cfg)?;
    let every = settings.checkpoint_every;
    let emit_checkpoints = cfg.emit_checkpoints;
    let mut observer = |entry: &ocp_pinn::train::HistoryEntry,
                        params: &NetworkParams,
                        model: &ocp_pinn::network::ModelParams|
     -> ocp_pinn::Result<()> {
        if emit_checkpoints && every > 0 && entry.epoch > 0 && entry.epoch.is_multiple_of(every) {
            let path = dir.join(format!("checkpoint_epoch{}.txt", entry.epoch));
            checkpoint(&path, id, &net, entry.epoch, model.nu, params)
                .map_err(|e| ocp_pinn::Error::Config(e.to_string()))?;
        }
        Ok(())
    };
    let outcome = trainer.run(&mut observer)?;
    let mut f = create(&dir.join("history.csv"))?;
    outcome.history.write_csv(&mut f)?;
    f.flush()?;
    if cfg.emit_checkpoints {
        checkpoint(
            &dir.join("checkpoint_final.txt"),
            id,
            &net,
            outcome.history.epochs,
            outcome.model.nu,
            &outcome.params,
        )?;
    }

    *stage = "metrics";
    let eval = error_report(
        &spec,
        &reference,
        &outcome.params,
        &outcome.model,
        outcome.history.epochs,
    )?;
    if cfg.emit_fields {
        write_field(dir, "pinn_y.csv", &eval.pinn.y)?;
        write_field(dir, "pinn_u.csv", &eval.pinn.u)?;
        write_field(dir, "pinn_p.csv", &eval.pinn.p)?;
        if let Some(y_unc) = &eval.pinn.y_unc {
            write_field(dir, "pinn_y_unc.csv", y_unc)?;
        }
        write_field(dir, "plugin_y.csv", &eval.y_plugin)?;
    }
    let grid = reference.grid;
    let mut f = create(&dir.join("profiles_final.csv"))?;
    writeln!(f, "x,y_star,y_plugin,y_pinn,y_uncontrolled")?;
    let rows = [
        reference.y_star.final_row(),
        eval.y_plugin.final_row(),
        eval.pinn.y.final_row(),
        reference.y_uncontrolled.final_row(),
    ];
    for i in 0..grid.nx {
        writeln!(
            f,
            "{},{},{},{},{}",
            grid.x(i),
            rows[0][i],
            rows[1][i],
            rows[2][i],
            rows[3][i]
        )?;
    }
    f.flush()?;
    let mut f = create(&dir.join("errors.csv"))?;
    writeln!(f, "{}", ErrorReport::CSV_HEADER)?;
    writeln!(f, "{}", eval.report.csv_row(id.as_str(), seed))?;
    f.flush()?;
    let r = eval.report;
    info!(
        "{id}: E1 {:.4e} E2 {:.4e} E3 {:.4e} E4 {:.4e} nu {:.5} after {} epochs",
        r.e1, r.e2, r.e3, r.e4, r.nu_learned, r.epochs
    );
    Ok(eval.report)
}
