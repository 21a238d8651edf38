use std::fs;
use std::path::{Path, PathBuf};

use dirconv::featurestore::{write_manifest, LayerEntry, ManifestDoc, StimulusSet};
use dirconv::pipeline::{
    self, load_results, persist_results, to_csv, InputRef, KSweepReport, Report, ResultsFile,
    RunSettings, SignificanceReport,
};
use dirconv::stats::{k_sensitivity_sweep, sign_flip_test};
use dirconv::synthetic::{generate, rho_grid, rho_sweep, GeneratorSpec};
use dirconv::{load_manifest, write_feature_matrix, Error, Modality, ModelManifest, Result};

use crate::{parse_family, Command, Common};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Every `*.manifest.json` in `dir`, in file-name order.
fn load_group(dir: &Path) -> Result<Vec<ModelManifest>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|entry| entry.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".manifest.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} contains no *.manifest.json files",
            dir.display()
        )));
    }
    paths.iter().map(load_manifest).collect()
}

fn emit(common: &Common, inputs: &[ModelManifest], report: Report) -> Result<()> {
    emit_with(
        RunSettings::new(common.k, common.distance, common.seed),
        common,
        inputs.iter().map(InputRef::from).collect(),
        report,
    )
}

fn emit_with(
    settings: RunSettings,
    common: &Common,
    inputs: Vec<InputRef>,
    report: Report,
) -> Result<()> {
    if let Some(path) = &common.csv {
        fs::write(path, to_csv(&report)).map_err(io_err(path))?;
    }
    let results = ResultsFile::new(settings, inputs, report);
    match &common.out {
        Some(path) => persist_results(&results, path),
        None => {
            print!("{}", results.to_json());
            Ok(())
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Direction {
            group_a,
            group_b,
            permutations,
            common,
        } => {
            let a = load_group(&group_a)?;
            let b = load_group(&group_b)?;
            let table = pipeline::direction_table(
                &a,
                &b,
                common.k,
                common.distance,
                permutations,
                common.seed,
            )?;
            let inputs: Vec<ModelManifest> = a.into_iter().chain(b).collect();
            emit(&common, &inputs, Report::DirectionTable(table))
        }
        Command::Grid {
            model_a,
            model_b,
            metric,
            direction,
            common,
        } => {
            let a = load_manifest(&model_a)?;
            let b = load_manifest(&model_b)?;
            let grid =
                pipeline::layer_grid(&a, &b, metric, direction, Some(common.k), common.distance)?;
            emit(&common, &[a, b], Report::LayerGrid(grid))
        }
        Command::Consensus { group, common } => {
            let models = load_group(&group)?;
            let report = pipeline::consensus(&models, common.k, common.distance)?;
            emit(&common, &models, Report::Consensus(report))
        }
        Command::Density { group, common } => {
            let models = load_group(&group)?;
            let profiles = models
                .iter()
                .map(pipeline::density_profile)
                .collect::<Result<Vec<_>>>()?;
            emit(&common, &models, Report::Density(profiles))
        }
        Command::Ksweep {
            model_a,
            model_b,
            ks,
            common,
        } => {
            let a = load_manifest(&model_a)?;
            let b = load_manifest(&model_b)?;
            if !a.stimulus_set.compatible_with(&b.stimulus_set) {
                return Err(Error::StimulusSetMismatch {
                    left: model_a.display().to_string(),
                    right: model_b.display().to_string(),
                });
            }
            let points = k_sensitivity_sweep(
                &a.load_layers::<f64>()?,
                &b.load_layers::<f64>()?,
                &ks,
                common.distance,
            )?;
            let report = KSweepReport {
                source_model: a.model_name.clone(),
                target_model: b.model_name.clone(),
                points,
            };
            emit(&common, &[a, b], Report::KSweep(report))
        }
        Command::Synthetic {
            family,
            rhos,
            rho_min,
            rho_max,
            ks,
            n_samples,
            ambient_dim,
            export_pair,
            common,
        } => {
            let families = parse_family(&family)?;
            if let Some(dir) = export_pair {
                let [family] = families[..] else {
                    return Err(Error::InvalidArgument(
                        "--export-pair needs a single --family".into(),
                    ));
                };
                let spec = GeneratorSpec::new(family, n_samples, ambient_dim, rho_max, common.seed);
                return export_pair_to(&spec, &dir);
            }
            let ks = if ks.is_empty() { vec![common.k] } else { ks };
            let grid = rho_grid(rho_min, rho_max, rhos);
            let tables = families
                .iter()
                .map(|&f| rho_sweep(f, &grid, &ks, n_samples, ambient_dim, common.seed))
                .collect::<Result<Vec<_>>>()?;
            emit(&common, &[], Report::RhoSweep(tables))
        }
        Command::Perm {
            gaps,
            permutations,
            common,
        } => {
            let values = read_gaps(&gaps)?;
            let result = sign_flip_test(&values, permutations, common.seed)?;
            emit(
                &common,
                &[],
                Report::Significance(SignificanceReport {
                    gaps: values,
                    result,
                }),
            )
        }
        Command::Report { input, csv } => {
            let results = load_results(&input)?;
            let table = to_csv(&results.results);
            match csv {
                Some(path) => fs::write(&path, table).map_err(io_err(&path)),
                None => {
                    print!("{table}");
                    Ok(())
                }
            }
        }
    }
}

/// Gaps from a direction results file, or whitespace/comma separated numbers.
fn read_gaps(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    if let Ok(results) = ResultsFile::from_json(&text) {
        return match results.results {
            Report::DirectionTable(t) => Ok(t.gaps.iter().map(|g| g.gap).collect()),
            Report::Significance(s) => Ok(s.gaps),
            _ => Err(Error::InvalidArgument(format!(
                "{} holds no gaps",
                path.display()
            ))),
        };
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("{}: {t:?} is not a number", path.display()))
            })
        })
        .collect()
}

fn export_pair_to(spec: &GeneratorSpec, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let pair = generate::<f32>(spec)?;
    let stimuli = StimulusSet {
        name: format!("{}-seed{}", spec.family, spec.seed),
        n_stimuli: spec.n_samples,
        checksum: None,
    };
    for (name, matrix) in [("compact", &pair.x), ("dispersed", &pair.y)] {
        let file = format!("{name}.npy");
        write_feature_matrix(matrix, dir.join(&file))?;
        let doc = ManifestDoc {
            model_name: name.to_string(),
            modality: Modality::PointCloud,
            param_count: None,
            stimulus_set: stimuli.clone(),
            layers: vec![LayerEntry {
                index: 0,
                path: file,
            }],
        };
        write_manifest(&doc, dir.join(format!("{name}.manifest.json")))?;
    }
    println!(
        "wrote {} (measured ratio {:.4})",
        dir.display(),
        pair.measured_ratio
    );
    Ok(())
}
