//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use mixprep::circuit::{evolve, postselect_coincidence, validate_geometry, CircuitSpec, Geometry};
use mixprep::designer::{
    design_general, design_two, design_two_from_rho, linear_grid, log_grid, sweep, SweepAxis,
    SweepParams, SweepTable, TwoStateDesign,
};
use mixprep::entanglement::{concurrence, eof_from_concurrence, wootters_decompose};
use mixprep::linalg::{fidelity, DensityMatrix};
use mixprep::local::waveplate_decompose;
use mixprep::tomography::{exact_records, reconstruct, simulate_counts, CountRecord};

use crate::io::{emit, load_density, parse_json, read_file, RunManifest};
use crate::{CliError, GlobalOpts};

fn to_pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("JSON serializes")
}

/// Waveplate settings for every path's photon-A and photon-B rotations.
fn waveplate_report(circuit: &CircuitSpec) -> Value {
    let mut paths = serde_json::Map::new();
    for (path, pair) in &circuit.sprs {
        let a = waveplate_decompose(&pair.u);
        let b = waveplate_decompose(&pair.v);
        paths.insert(
            path.to_string(),
            json!({
                "a": {"qwp1": a.qwp1, "hwp": a.hwp, "qwp2": a.qwp2},
                "b": {"qwp1": b.qwp1, "hwp": b.hwp, "qwp2": b.qwp2},
            }),
        );
    }
    Value::Object(paths)
}

/// Simulate a designed circuit and report how well it hits the target.
fn simulation_residuals(
    circuit: &CircuitSpec,
    target: &DensityMatrix,
    predicted: f64,
) -> Result<Value, CliError> {
    let js = evolve(circuit).map_err(CliError::infeasible)?;
    let (rho, f) = postselect_coincidence(&js).map_err(CliError::infeasible)?;
    let fid = fidelity(&rho, target);
    Ok(json!({
        "simulated_f": f,
        "target_fidelity": fid,
        "fidelity_deficit": 1.0 - fid,
        "f_prediction_error": (f - predicted).abs(),
    }))
}

pub fn cmd_decompose(input: &Path, opts: &GlobalOpts) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("decompose", None);
    let rho = load_density(input, opts.tol, &mut manifest)?;
    let c = concurrence(&rho);
    let eof = eof_from_concurrence(c.clamp(0.0, 1.0)).map_err(CliError::input_err)?;
    let decomposition = wootters_decompose(&rho).map_err(CliError::infeasible)?;
    let report = json!({
        "concurrence": c,
        "eof": eof,
        "branch_count": decomposition.branches.len(),
        "branches": decomposition,
    });
    emit(&to_pretty(&report), opts.out.as_deref(), &mut manifest)?;
    finish(manifest, opts.out.as_deref())
}

pub enum DesignInputs {
    General { input: PathBuf },
    TwoStateAngles { alpha: f64, beta: f64, p: f64 },
    TwoStateRho { input: PathBuf },
}

pub fn cmd_design(inputs: DesignInputs, opts: &GlobalOpts) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("design", None);
    let report = match inputs {
        DesignInputs::General { input } => {
            let rho = load_density(&input, opts.tol, &mut manifest)?;
            let design = design_general(&rho).map_err(CliError::infeasible)?;
            let residuals = simulation_residuals(&design.circuit, &rho, design.f_optimal)?;
            json!({
                "scheme": "general",
                "concurrence": concurrence(&rho),
                "theta0": design.theta0,
                "case_id": design.case_id,
                "etas": design.etas,
                "f_optimal": design.f_optimal,
                "decomposition": design.decomposition,
                "waveplates": waveplate_report(&design.circuit),
                "residuals": residuals,
                "circuit": design.circuit,
            })
        }
        DesignInputs::TwoStateAngles { alpha, beta, p } => {
            let (design, circuit) = design_two(alpha, beta, p).map_err(CliError::infeasible)?;
            let target = two_state_target(&design)?;
            let residuals = simulation_residuals(&circuit, &target, design.success)?;
            two_state_report(&design, &circuit, residuals)
        }
        DesignInputs::TwoStateRho { input } => {
            let rho = load_density(&input, opts.tol, &mut manifest)?;
            let (design, circuit) = design_two_from_rho(&rho).map_err(CliError::infeasible)?;
            let residuals = simulation_residuals(&circuit, &rho, design.success)?;
            two_state_report(&design, &circuit, residuals)
        }
    };
    emit(&to_pretty(&report), opts.out.as_deref(), &mut manifest)?;
    finish(manifest, opts.out.as_deref())
}

fn two_state_target(design: &TwoStateDesign) -> Result<DensityMatrix, CliError> {
    use mixprep::linalg::PureState;
    DensityMatrix::mixture(&[
        (design.p_target, PureState::schmidt(design.alpha)),
        (1.0 - design.p_target, PureState::schmidt(design.beta)),
    ])
    .map_err(CliError::input_err)
}

fn two_state_report(design: &TwoStateDesign, circuit: &CircuitSpec, residuals: Value) -> Value {
    json!({
        "scheme": "two-state",
        "alpha": design.alpha,
        "beta": design.beta,
        "p": design.p_target,
        "k1": design.k1,
        "k2": design.k2,
        "chosen_initial": design.chosen_initial,
        "threshold": design.threshold,
        "eta12": design.eta12,
        "success": design.success,
        "filters": circuit.filters,
        "waveplates": waveplate_report(circuit),
        "residuals": residuals,
        "circuit": circuit,
    })
}

pub fn cmd_simulate(
    spec_path: &Path,
    geometry_path: Option<&Path>,
    skip_geometry: bool,
    opts: &GlobalOpts,
) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("simulate", None);
    let bytes = read_file(spec_path)?;
    manifest.record_input(spec_path, &bytes);
    let spec: CircuitSpec = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::input(format!("invalid circuit spec {}: {e}", spec_path.display()))
    })?;

    let mut geometry_report = json!(null);
    if let Some(path) = geometry_path {
        let g_bytes = read_file(path)?;
        manifest.record_input(path, &g_bytes);
        let geometry: Geometry = serde_json::from_slice(&g_bytes)
            .map_err(|e| CliError::input(format!("invalid geometry {}: {e}", path.display())))?;
        let violations = validate_geometry(&geometry);
        geometry_report = json!({
            "violations": violations,
            "valid": violations.is_empty(),
        });
        if !violations.is_empty() && !skip_geometry {
            eprintln!("{}", to_pretty(&geometry_report));
            return Err(CliError::Geometry);
        }
    } else if !skip_geometry {
        return Err(CliError::input(
            "simulate needs --geometry FILE (or --skip-geometry to run the state algebra alone)"
                .to_string(),
        ));
    }

    let js = evolve(&spec).map_err(CliError::infeasible)?;
    let (rho, f) = postselect_coincidence(&js).map_err(CliError::infeasible)?;
    let diagonal: Vec<f64> = (0..4).map(|i| js.weights[i][i]).collect();
    let report = json!({
        "rho": rho,
        "f": f,
        "path_weights": diagonal,
        "geometry": geometry_report,
    });
    emit(&to_pretty(&report), opts.out.as_deref(), &mut manifest)?;
    finish(manifest, opts.out.as_deref())
}

pub struct SweepArgs {
    pub axis: String,
    pub k1: f64,
    pub k2: f64,
    pub alpha: f64,
    pub a_list: Option<Vec<f64>>,
    pub grid_n: usize,
}

pub fn cmd_sweep(args: SweepArgs, opts: &GlobalOpts) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("sweep", None);
    let (axis, default_a, grid): (SweepAxis, Vec<f64>, Vec<f64>) = match args.axis.as_str() {
        "eta1" => (
            SweepAxis::Eta1,
            vec![1e4, 1.0, 1e-4],
            linear_grid(0.0, 1.0, args.grid_n),
        ),
        "A" => (SweepAxis::RatioA, vec![], log_grid(1e-4, 1e4, args.grid_n)),
        "beta" => (
            SweepAxis::Beta,
            vec![1e-3, 1e3],
            linear_grid(0.0, args.alpha, args.grid_n),
        ),
        other => {
            return Err(CliError::input(format!(
                "unknown axis {other:?}; expected eta1, A or beta"
            )))
        }
    };
    let params = SweepParams {
        k1: args.k1,
        k2: args.k2,
        alpha: args.alpha,
        a_values: args.a_list.unwrap_or(default_a),
    };
    let table = sweep(axis, &params, &grid).map_err(CliError::input_err)?;
    emit(&render_csv(&table), opts.out.as_deref(), &mut manifest)?;
    finish(manifest, opts.out.as_deref())
}

/// CSV with metadata comments and full double precision.
fn render_csv(table: &SweepTable) -> String {
    let mut out = String::new();
    for (key, value) in &table.metadata {
        out.push_str(&format!("# {key} = {value}\n"));
    }
    out.push_str(&table.axis);
    for curve in &table.curves {
        out.push(',');
        out.push_str(&curve.label);
    }
    out.push('\n');
    for (k, x) in table.values.iter().enumerate() {
        out.push_str(&format!("{x:.17e}"));
        for curve in &table.curves {
            out.push_str(&format!(",{:.17e}", curve.values[k]));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_tomo(input: &Path, shots: u64, seed: u64, opts: &GlobalOpts) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("tomo", Some(seed));
    let rho = load_density(input, opts.tol, &mut manifest)?;
    let records: Vec<CountRecord> = if shots == 0 {
        exact_records(&rho)
    } else {
        simulate_counts(&rho, shots, seed).map_err(CliError::input_err)?
    };
    let reconstructed = reconstruct(&records).map_err(CliError::input_err)?;
    let fid = fidelity(&reconstructed, &rho);

    let counts_lines: String = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect::<Vec<_>>()
        .join("\n");

    match opts.out.as_deref() {
        Some(out) => {
            let counts_path = out.with_extension("counts.jsonl");
            let rho_path = out.with_extension("rho.json");
            std::fs::write(&counts_path, counts_lines + "\n")
                .map_err(|e| CliError::input(format!("cannot write counts: {e}")))?;
            std::fs::write(&rho_path, to_pretty(&json!(reconstructed)))
                .map_err(|e| CliError::input(format!("cannot write rho: {e}")))?;
            manifest.outputs.push(counts_path.display().to_string());
            manifest.outputs.push(rho_path.display().to_string());
            let report = json!({
                "fidelity": fid,
                "shots_per_setting": shots,
                "seed": seed,
                "counts_path": counts_path.display().to_string(),
                "rho_path": rho_path.display().to_string(),
            });
            emit(&to_pretty(&report), Some(out), &mut manifest)?;
            finish(manifest, Some(out))
        }
        None => {
            let report = json!({
                "fidelity": fid,
                "shots_per_setting": shots,
                "seed": seed,
                "reconstructed": reconstructed,
                "records": records,
            });
            emit(&to_pretty(&report), None, &mut manifest)?;
            Ok(())
        }
    }
}

pub fn cmd_validate_geometry(input: &Path, opts: &GlobalOpts) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("validate-geometry", None);
    let bytes = read_file(input)?;
    manifest.record_input(input, &bytes);
    // Parse through Value first for a friendlier error on shape problems.
    let value = parse_json(&bytes, input)?;
    let geometry: Geometry = serde_json::from_value(value)
        .map_err(|e| CliError::input(format!("invalid geometry {}: {e}", input.display())))?;
    let violations = validate_geometry(&geometry);
    let report = json!({
        "valid": violations.is_empty(),
        "violations": violations,
    });
    emit(&to_pretty(&report), opts.out.as_deref(), &mut manifest)?;
    finish(manifest, opts.out.as_deref())?;
    if report["valid"].as_bool() == Some(false) {
        return Err(CliError::Geometry);
    }
    Ok(())
}

fn finish(manifest: RunManifest, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => manifest.write(path),
        None => Ok(()),
    }
}
