use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use datri_core::geodesic::{complete_frame, jacobi_radii, TangentVector};
use datri_core::lab::{REFERENCE_WORKING_RADIUS, TestGroup};
use datri_core::series::SeriesFit;
use datri_core::sphere::{
    series_prediction, sphere_series, total_scalar_hemisphere_with, total_scalar_sphere_with, SeriesGrid,
    SeriesPrediction,
};
use datri_core::tube::{knu_profile, tube_total_with, RegularCurve};
use datri_core::{run_battery, Classification, DiagnosticsReport, GeometryError, ModelSetup, Registry};
use serde::Serialize;

use crate::config::{CurveKind, RunConfig, SweepKind};

pub enum Failure {
    /// Bad arguments, unknown model or invalid configuration.
    Usage(String),
    /// A computation failed or the battery found an implementation fault.
    Compute(String),
    /// The classification differs from the registry's expectation.
    Mismatch(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Compute(_) => 2,
            Failure::Mismatch(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Compute(m) | Failure::Mismatch(m) => m,
        }
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::Compute(e.to_string())
    }
}

pub fn schema_help(registry: &Registry) -> String {
    let mut s = String::from("available models:\n");
    for e in registry.entries() {
        s.push_str(&format!("  {}\n      {}\n", e.schema(), e.summary));
    }
    s
}

pub fn resolve_model(registry: &Registry, config: &RunConfig) -> Result<ModelSetup, Failure> {
    let name = config
        .model
        .as_deref()
        .ok_or_else(|| Failure::Usage(format!("no model given (use --model)\n{}", schema_help(registry))))?;
    match registry.instantiate(name, &config.params) {
        Ok(s) => Ok(s),
        Err(e @ (GeometryError::UnknownModel(_) | GeometryError::InvalidArgument(_))) => {
            Err(Failure::Usage(format!("{e}\n{}", schema_help(registry))))
        }
        Err(e) => Err(e.into()),
    }
}

/// Output header: a single timestamp line followed by the resolved config.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    generated_at: String,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_json<T: Serialize>(path: &Path, config: &RunConfig, body: T) -> Result<(), Failure> {
    let env = Envelope {
        generated_at: timestamp(),
        config,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| Failure::Compute(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Compute(format!("cannot write {}: {e}", path.display()))
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

#[derive(Serialize)]
struct ReportBody<'a> {
    report: &'a DiagnosticsReport,
}

pub fn report(config: &RunConfig) -> Result<PathBuf, Failure> {
    let registry = Registry::builtin();
    let setup = resolve_model(&registry, config)?;
    let mut battery = config.battery.clone();
    if !config.radii.is_empty() {
        check_radii(&config.radii, REFERENCE_WORKING_RADIUS, "battery sphere radius")?;
        battery.sphere_radii = config.radii.clone();
    }
    let report = run_battery(&setup, &battery);
    prepare_out(&config.out)?;
    let json = config.out.join("report.json");
    write_json(&json, config, ReportBody { report: &report })?;
    let txt = config.out.join("report.txt");
    fs::write(&txt, summary(&report)).map_err(|e| io_failure(&txt, e))?;
    print!("{}", summary(&report));
    match report.classification {
        Classification::Invalid => Err(Failure::Compute(format!(
            "INVALID: universal identities failed: {}",
            report.failing_universal.join(", ")
        ))),
        _ if !report.matches_expected => Err(Failure::Mismatch(format!(
            "classification {} does not match expectation '{}'",
            report.classification.label(),
            serde_json::to_string(&report.expected).unwrap_or_default().trim_matches('"')
        ))),
        _ => Ok(json),
    }
}

pub fn summary(r: &DiagnosticsReport) -> String {
    let mut s = String::new();
    let params = if r.params.is_empty() {
        "no parameters".to_string()
    } else {
        r.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    s.push_str(&format!("model           {} ({params})\n", r.model));
    s.push_str(&format!(
        "expected        {}\n",
        serde_json::to_string(&r.expected).unwrap_or_default().trim_matches('"')
    ));
    s.push_str(&format!("classification  {}\n", r.classification.label()));
    s.push_str(&format!("matches         {}\n", if r.matches_expected { "yes" } else { "no" }));
    if !r.failing_universal.is_empty() {
        s.push_str(&format!("failing         {}\n", r.failing_universal.join(", ")));
    }
    s.push('\n');
    for t in &r.tests {
        let group = match t.group {
            TestGroup::Universal => "universal",
            TestGroup::Datri => "d'atri",
            TestGroup::Informational => "recorded",
        };
        let verdict = serde_json::to_string(&t.verdict).unwrap_or_default();
        let tol = if t.tolerance.is_nan() {
            "-".to_string()
        } else {
            format!("{:.1e}", t.tolerance)
        };
        s.push_str(&format!(
            "{:<26} {:<10} {:<9} defect {:>10.3e}  tolerance {tol}\n",
            t.name,
            group,
            verdict.trim_matches('"'),
            t.defect
        ));
        if let Some(e) = &t.error {
            s.push_str(&format!("    error: {e}\n"));
        }
    }
    s
}

fn check_radii(grid: &[f64], limit: f64, what: &str) -> Result<(), Failure> {
    for &r in grid {
        if !(r > 0.0) || r > limit {
            return Err(Failure::Usage(format!(
                "{what} {r} outside (0, {limit:.6}]; the grid exceeds the working radius"
            )));
        }
    }
    Ok(())
}

fn default_grid(kind: SweepKind, scale: f64, axis_length: f64) -> Vec<f64> {
    match kind {
        SweepKind::TubeTotal => [0.05, 0.1, 0.15, 0.2, 0.25].iter().map(|r| r * scale).collect(),
        SweepKind::KnuProfile => (0..=10).map(|i| axis_length * i as f64 / 10.0).collect(),
        _ => [0.1, 0.2, 0.3, 0.4, 0.5].iter().map(|r| r * scale).collect(),
    }
}

fn geodesic_start(setup: &ModelSetup, base: usize) -> Result<(TangentVector, f64), Failure> {
    match setup.curves.geodesics.get(base) {
        Some(RegularCurve::Geodesic { start, b, .. }) => Ok((*start, *b)),
        _ => Err(Failure::Usage(format!(
            "base point index {base} out of range (model has {})",
            setup.base_points.len()
        ))),
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sweep(config: &RunConfig) -> Result<PathBuf, Failure> {
    let registry = Registry::builtin();
    let setup = resolve_model(&registry, config)?;
    let scale = setup.working_radius / REFERENCE_WORKING_RADIUS;
    let (start, length) = geodesic_start(&setup, config.base)?;
    let grid = if config.radii.is_empty() {
        default_grid(config.kind, scale, length)
    } else {
        config.radii.clone()
    };
    if config.kind == SweepKind::KnuProfile {
        if let Some(t) = grid.iter().find(|t| !(**t >= 0.0 && **t <= length)) {
            return Err(Failure::Usage(format!("arc length {t} outside [0, {length}] of the test geodesic")));
        }
    } else {
        check_radii(&grid, setup.working_radius, "radius")?;
    }

    let model = &setup.model;
    let b = &config.battery;
    let p = start.base;
    let (header, rows): (Vec<&str>, Vec<Vec<f64>>) = match config.kind {
        SweepKind::SphereTotal => (
            vec!["r", "total", "relative_defect"],
            grid.iter()
                .map(|&r| {
                    let t = total_scalar_sphere_with(model, &p, r, &b.sphere)?;
                    Ok(vec![r, t, (t - 8.0 * PI) / (8.0 * PI)])
                })
                .collect::<Result<_, GeometryError>>()?,
        ),
        SweepKind::HemisphereTotal => (
            vec!["r", "total_plus", "total_minus", "relative_defect"],
            grid.iter()
                .map(|&r| {
                    let plus = total_scalar_hemisphere_with(model, &TangentVector::new(p, start.vec() * r), &b.sphere)?;
                    let minus =
                        total_scalar_hemisphere_with(model, &TangentVector::new(p, start.vec() * -r), &b.sphere)?;
                    Ok(vec![r, plus, minus, (plus - 4.0 * PI) / (4.0 * PI)])
                })
                .collect::<Result<_, GeometryError>>()?,
        ),
        SweepKind::TubeTotal => {
            let curve = match config.curve {
                CurveKind::Geodesic => setup.curves.geodesics[config.base].clone(),
                CurveKind::Arc => setup.curves.arcs[0].clone(),
                CurveKind::Loop => setup.curves.loops[0].clone(),
            };
            (
                vec!["r", "total", "absolute", "area"],
                grid.iter()
                    .map(|&r| {
                        let t = tube_total_with(model, &curve, r, &b.tube)?;
                        Ok(vec![r, t.total, t.absolute, t.area])
                    })
                    .collect::<Result<_, GeometryError>>()?,
            )
        }
        SweepKind::ThetaProfile => {
            let g = model.metric_at(&p)?;
            let mut theta = [Vec::new(), Vec::new()];
            for (i, s) in [1.0, -1.0].into_iter().enumerate() {
                let frame = complete_frame(&g, &(start.vec() * s));
                theta[i] = jacobi_radii(model, &p, &frame, &grid, &b.sphere.ode)?
                    .iter()
                    .map(|j| j.volume_density())
                    .collect();
            }
            (
                vec!["r", "theta_plus", "theta_minus", "odd_part"],
                grid.iter()
                    .enumerate()
                    .map(|(i, &r)| vec![r, theta[0][i], theta[1][i], 0.5 * (theta[0][i] - theta[1][i])])
                    .collect(),
            )
        }
        SweepKind::KnuProfile => {
            let (fit, values) = knu_profile(model, &start, &grid)?;
            (
                vec!["t", "knu", "fitted"],
                grid.iter().zip(values).map(|(&t, v)| vec![t, v, fit.eval(t)]).collect(),
            )
        }
    };

    prepare_out(&config.out)?;
    let path = config.out.join(format!("sweep_{}_{}.csv", config.kind, setup.model.name));
    write_csv(&path, config, &header, &rows)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", header.join(","));
    for row in &rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_value(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    Ok(path)
}

/// CSV with `#` comment lines carrying the timestamp and the resolved config,
/// then a header row and one row per grid value.
fn write_csv(path: &Path, config: &RunConfig, header: &[&str], rows: &[Vec<f64>]) -> Result<(), Failure> {
    let cfg = serde_json::to_string(config).map_err(|e| Failure::Compute(e.to_string()))?;
    let mut buf = Vec::new();
    writeln!(buf, "# generated_at: {}", timestamp()).expect("in-memory write");
    writeln!(buf, "# config: {cfg}").expect("in-memory write");
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(|e| Failure::Compute(e.to_string()))?;
        for row in rows {
            w.write_record(row.iter().map(|v| fmt_value(*v)))
                .map_err(|e| Failure::Compute(e.to_string()))?;
        }
        w.flush().map_err(|e| io_failure(path, e))?;
    }
    fs::write(path, buf).map_err(|e| io_failure(path, e))
}

#[derive(Serialize)]
struct CoefficientRow {
    coefficient: String,
    fitted: f64,
    uncertainty: f64,
    predicted: Option<f64>,
}

#[derive(Serialize)]
struct SeriesBody {
    model: String,
    direction: TangentVector,
    theta: SeriesFit,
    tau_sphere_theta: SeriesFit,
    prediction: SeriesPrediction,
    comparison: Vec<CoefficientRow>,
}

pub fn series(config: &RunConfig) -> Result<PathBuf, Failure> {
    let registry = Registry::builtin();
    let setup = resolve_model(&registry, config)?;
    let (start, _) = geodesic_start(&setup, config.base)?;
    if config.k_max < 4 {
        return Err(Failure::Usage("k-max must be at least 4".into()));
    }
    let mut grid = SeriesGrid::for_working_radius(setup.working_radius);
    if !config.radii.is_empty() {
        check_radii(&config.radii, setup.working_radius, "radius")?;
        grid.lo = config.radii.iter().copied().fold(f64::INFINITY, f64::min);
        grid.hi = config.radii.iter().copied().fold(0.0, f64::max);
    }
    let (theta, tau) = sphere_series(&setup.model, &start, config.k_max, &grid)?;
    let pred = series_prediction(&setup.model, &start)?;
    let rows = [
        ("a0", theta.coefficient(0), theta.uncertainty(0), Some(1.0)),
        ("a1", theta.coefficient(1), theta.uncertainty(1), Some(0.0)),
        ("a2", theta.coefficient(2), theta.uncertainty(2), Some(pred.a2)),
        ("a3", theta.coefficient(3), theta.uncertainty(3), Some(pred.a3)),
        ("b-2", tau.coefficient(-2), tau.uncertainty(-2), Some(2.0)),
        ("b-1", tau.coefficient(-1), tau.uncertainty(-1), Some(0.0)),
        ("b0", tau.coefficient(0), tau.uncertainty(0), Some(pred.b0)),
        ("b1", tau.coefficient(1), tau.uncertainty(1), Some(pred.b1)),
    ];
    let comparison: Vec<CoefficientRow> = rows
        .iter()
        .map(|(n, f, u, p)| CoefficientRow {
            coefficient: n.to_string(),
            fitted: *f,
            uncertainty: *u,
            predicted: *p,
        })
        .collect();
    println!("{:<6} {:>24} {:>12} {:>24}", "coef", "fitted", "± sigma", "predicted");
    for c in &comparison {
        println!(
            "{:<6} {:>24.16e} {:>12.2e} {:>24.16e}",
            c.coefficient,
            c.fitted,
            c.uncertainty,
            c.predicted.unwrap_or(f64::NAN)
        );
    }
    prepare_out(&config.out)?;
    let path = config
        .out
        .join(format!("series_{}_base{}.json", setup.model.name, config.base));
    write_json(
        &path,
        config,
        SeriesBody {
            model: setup.model.name.clone(),
            direction: start,
            theta,
            tau_sphere_theta: tau,
            prediction: pred,
            comparison,
        },
    )?;
    Ok(path)
}
