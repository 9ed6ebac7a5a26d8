//! The four subcommands. Each writes its artifacts under the output
//! directory, named by the configuration stem, and returns their paths.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use hypofem::experiments::{mesh_with_elements, run_decay, run_level, Discretisation, LevelResult};
use hypofem::timeloop::{write_snapshot_csv, write_snapshot_vtk};

use crate::config::RunConfig;
use crate::plot::{Plot, Series};
use crate::CliError;

pub const CSV_HEADER: &str = "case,method,p,q,elements,dofs,h_max,k,err_st,err_A_final,eoc_st,wall_s,iters";
pub const DECAY_HEADER: &str = "case,method,p,q,elements,n,t,norm_A,envelope,violation";

#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
    /// Lines for the terminal.
    pub summary: Vec<String>,
}

fn prepare(cfg: &RunConfig) -> Result<Outputs, CliError> {
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("{}.json", cfg.stem()));
    fs::write(&path, cfg.to_json())?;
    Ok(Outputs { files: vec![path], summary: Vec::new() })
}

fn write_svg(out: &mut Outputs, path: PathBuf, plot: &Plot) -> Result<(), CliError> {
    fs::write(&path, plot.to_svg())?;
    out.files.push(path);
    Ok(())
}

fn csv_row(cfg: &RunConfig, r: &LevelResult, eoc: Option<f64>) -> String {
    let (err_st, err_a) = match &r.errors {
        Some(e) => (format!("{:e}", e.err_st), format!("{:e}", e.err_a_final)),
        None => (String::new(), String::new()),
    };
    let eoc = eoc.map(|v| format!("{v:.4}")).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{:e},{:e},{err_st},{err_a},{eoc},{:.3},{}",
        cfg.case, cfg.method, cfg.p, cfg.q, r.elements, r.dofs, r.h_max, r.k, r.wall_s, r.iterations
    )
}

/// Runs the mesh levels in turn, flushing one CSV row per finished level.
pub fn convergence(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let settings = cfg.settings()?;
    let mut out = prepare(cfg)?;
    let csv_path = cfg.out.join(format!("{}.csv", cfg.stem()));
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(csv, "{CSV_HEADER}")?;
    out.files.push(csv_path);
    let mut levels: Vec<LevelResult> = Vec::new();
    for &e in &cfg.levels {
        let mesh = Arc::new(mesh_with_elements(e)?);
        let result = run_level(&settings, mesh);
        let (r, _, _) = match result {
            Ok(v) => v,
            Err(err) => {
                csv.flush()?;
                return Err(err.into());
            }
        };
        let eoc = levels.last().and_then(|prev| {
            let (e0, e1) = (prev.errors.as_ref()?.err_st, r.errors.as_ref()?.err_st);
            Some((e0 / e1).ln() / (prev.h_max / r.h_max).ln())
        });
        writeln!(csv, "{}", csv_row(cfg, &r, eoc))?;
        csv.flush()?;
        out.summary.push(format!(
            "elements={:>5} dofs={:>8} err_st={:.4e} eoc={}",
            r.elements,
            r.dofs,
            r.errors.as_ref().map_or(f64::NAN, |e| e.err_st),
            eoc.map_or("-".into(), |v| format!("{v:.3}"))
        ));
        levels.push(r);
    }
    let label = format!("{} p={} q={}", cfg.method, cfg.p, cfg.q);
    let err = |r: &LevelResult| r.errors.as_ref().map_or(f64::NAN, |e| e.err_st);
    let mut by_h = vec![Series::new(label.clone(), levels.iter().map(|r| (r.h_max, err(r))).collect())];
    if let (Some(first), true) = (levels.first(), levels.len() > 1) {
        // Reference slope h^p through the coarsest point.
        let slope = levels
            .iter()
            .map(|r| (r.h_max, err(first) * (r.h_max / first.h_max).powi(cfg.p as i32)))
            .collect();
        by_h.push(Series::new(format!("O(h^{})", cfg.p), slope).dashed());
    }
    let title = format!("{} case", cfg.case);
    write_svg(
        &mut out,
        cfg.out.join(format!("{}_h.svg", cfg.stem())),
        &Plot {
            title: title.clone(),
            x_label: "h_max".into(),
            y_label: "space-time error".into(),
            log_x: true,
            log_y: true,
            series: by_h,
        },
    )?;
    write_svg(
        &mut out,
        cfg.out.join(format!("{}_dofs.svg", cfg.stem())),
        &Plot {
            title,
            x_label: "space-time dofs".into(),
            y_label: "space-time error".into(),
            log_x: true,
            log_y: true,
            series: vec![Series::new(label, levels.iter().map(|r| (r.dofs as f64, err(r))).collect())],
        },
    )?;
    Ok(out)
}

pub fn decay(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let settings = cfg.settings()?;
    let mut out = prepare(cfg)?;
    let csv_path = cfg.out.join(format!("{}.csv", cfg.stem()));
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(csv, "{DECAY_HEADER}")?;
    out.files.push(csv_path);
    let mut series = Vec::new();
    for &e in &cfg.levels {
        let r = run_decay(&settings, Arc::new(mesh_with_elements(e)?), cfg.c_pf)?;
        for (n, ((t, norm), env)) in r.times.iter().zip(&r.norms).zip(&r.envelope).enumerate() {
            let violation = u8::from(r.violations.contains(&n));
            writeln!(
                csv,
                "{},{},{},{},{},{n},{t:e},{norm:e},{env:e},{violation}",
                cfg.case, cfg.method, cfg.p, cfg.q, r.elements
            )?;
        }
        csv.flush()?;
        for &n in &r.violations {
            log::warn!("elements={e}: norm increases at breakpoint {n} (t = {})", r.times[n]);
        }
        out.summary.push(format!(
            "elements={:>5} ‖U(t_N)‖_A/‖U(0)‖_A={:.4e} envelope ratio={:.6} kappa={:.3e} monotone={} below_envelope={}",
            r.elements,
            r.norms.last().unwrap() / r.norms[0],
            r.envelope.last().unwrap() / r.envelope[0],
            r.gap.kappa,
            r.monotone(),
            r.below_envelope()
        ));
        let pts = |v: &[f64]| r.times.iter().cloned().zip(v.iter().cloned()).collect::<Vec<_>>();
        series.push(Series::new(format!("{e} elements"), pts(&r.norms)));
        series.push(Series::new(format!("{e} elements, envelope"), pts(&r.envelope)).dashed());
    }
    write_svg(
        &mut out,
        cfg.out.join(format!("{}.svg", cfg.stem())),
        &Plot {
            title: format!("decay, {} p={} q={}", cfg.method, cfg.p, cfg.q),
            x_label: "t".into(),
            y_label: "‖U(t⁻)‖_A".into(),
            log_x: false,
            log_y: true,
            series,
        },
    )?;
    Ok(out)
}

/// Largest nodal difference |U − u(t_f)| over the dof coordinates.
pub fn nodal_error(cfg: &RunConfig, disc: &Discretisation, values: &[f64]) -> Result<Option<f64>, CliError> {
    let case = hypofem::CaseDefinition::by_name(&cfg.case)?;
    if !case.has_exact() {
        return Ok(None);
    }
    let t = disc.partition.t_final();
    let mut worst: f64 = 0.0;
    for (v, &[x, y]) in values.iter().zip(disc.space.dof_coords()) {
        worst = worst.max((v - case.jet_eval(t, x, y)?.u).abs());
    }
    Ok(Some(worst))
}

pub fn solve(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let settings = cfg.settings()?;
    let mut out = prepare(cfg)?;
    let mesh = Arc::new(mesh_with_elements(cfg.levels[0])?);
    let (r, sol, disc) = run_level(&settings, mesh)?;
    let values = sol.final_value();
    let csv_path = cfg.out.join(format!("{}.csv", cfg.stem()));
    write_snapshot_csv(BufWriter::new(File::create(&csv_path)?), &values)?;
    let vtk_path = cfg.out.join(format!("{}.vtk", cfg.stem()));
    let title = format!("{} t={}", cfg.case, disc.partition.t_final());
    write_snapshot_vtk(BufWriter::new(File::create(&vtk_path)?), &disc.space, &values, &title)?;
    out.files.extend([csv_path, vtk_path]);
    out.summary.push(format!(
        "elements={} slabs={} dofs={} wall={:.3}s iterations={}",
        r.elements, r.n_slabs, r.dofs, r.wall_s, r.iterations
    ));
    if let Some(e) = &r.errors {
        out.summary.push(format!("err_st={:e} err_A_final={:e} h_max={:e} k={:e}", e.err_st, e.err_a_final, e.h_max, e.k));
    }
    if let Some(e) = nodal_error(cfg, &disc, &values)? {
        out.summary.push(format!("max_nodal_error={e:e}"));
    }
    Ok(out)
}

/// Writes the per-element stabilisation ledger.
pub fn params_dump(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let settings = cfg.settings()?;
    let mut out = prepare(cfg)?;
    let disc = Discretisation::new(&settings, Arc::new(mesh_with_elements(cfg.levels[0])?))?;
    let path = cfg.out.join(format!("{}.csv", cfg.stem()));
    disc.stab.write_csv(BufWriter::new(File::create(&path)?))?;
    out.files.push(path);
    out.summary.push(format!(
        "elements={} min C_delta={:.4e} h_min={:.4e}",
        disc.space.mesh().n_elements(),
        disc.stab.min_c_delta(),
        disc.space.mesh().h_min()
    ));
    Ok(out)
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outputs, CliError> {
    if let Some(n) = cfg.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cfg.command.as_str() {
        "convergence" => convergence(cfg),
        "decay" => decay(cfg),
        "solve" => solve(cfg),
        "params-dump" => params_dump(cfg),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}
