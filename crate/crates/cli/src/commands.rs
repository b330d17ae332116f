use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use acrnn::dataset::Dataset;
use acrnn::eval::{ablate, ablate_grid, cross_validate, evaluate_checkpoint, write_ablation_csv, EvalReport, FoldScore, FoldSplit};
use acrnn::io::{
    build_cache, dataset_from_segments, load_cache, load_checkpoint, load_metadata, save_checkpoint, Manifest,
    RunConfig,
};
use acrnn::model::{gradcheck_suite, Placement, DEFAULT_GRADCHECK_PLACEMENTS};
use acrnn::train::train;
use acrnn::{Error, Result};

use crate::args::{Command, Common, Data};

/// Effective settings of one invocation.
struct Run {
    command: &'static str,
    config: RunConfig,
    /// Arguments recorded in a manifest passed as `--config`.
    recorded: BTreeMap<String, String>,
    /// Arguments to record in this run's manifest.
    args: BTreeMap<String, String>,
}

impl Run {
    fn new(command: &'static str, common: &Common, mut flags: Vec<(&str, Option<String>)>) -> Result<Self> {
        let (base, recorded) = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
                let config = RunConfig::parse(&text).map_err(|e| e.in_file(path))?;
                let recorded = if text.lines().any(|l| l.trim_start().starts_with("manifest.command")) {
                    let m = Manifest::parse(&text).map_err(|e| e.in_file(path))?;
                    if m.command != command {
                        return Err(Error::Config(format!(
                            "{} is a manifest of `{}`, not `{command}`",
                            path.display(),
                            m.command
                        )));
                    }
                    m.args
                } else {
                    BTreeMap::new()
                };
                (config, recorded)
            }
            None => (RunConfig::default(), BTreeMap::new()),
        };
        flags.push(("seed", common.seed.map(|s| s.to_string())));
        flags.push(("output.dir", common.out_dir.as_ref().map(|p| p.display().to_string())));
        let mut overrides = common.set.clone();
        overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        let config = base.with_overrides(&overrides)?;
        Ok(Run {
            command,
            config,
            recorded,
            args: BTreeMap::new(),
        })
    }

    /// The value given on the command line, else the one recorded in the
    /// manifest. Either way it is recorded for this run's manifest.
    fn arg<T: FromStr + ToString>(&mut self, name: &str, given: Option<T>) -> Result<Option<T>> {
        let value = match given {
            Some(v) => Some(v),
            None => match self.recorded.get(name) {
                Some(raw) => Some(
                    raw.parse()
                        .map_err(|_| Error::Config(format!("manifest argument {name} = {raw:?} is invalid")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.args.insert(name.to_string(), v.to_string());
        }
        Ok(value)
    }

    fn path_arg(&mut self, name: &str, given: Option<PathBuf>) -> Result<Option<PathBuf>> {
        Ok(self.arg(name, given.map(|p| p.display().to_string()))?.map(PathBuf::from))
    }

    fn flag(&mut self, name: &str, given: bool) -> Result<bool> {
        Ok(self.arg(name, given.then_some(true))?.unwrap_or(false))
    }

    /// Configured output directory, else `fallback`'s parent, else the
    /// working directory.
    fn out_dir(&self, fallback: Option<&Path>) -> PathBuf {
        self.config
            .output_dir
            .clone()
            .or_else(|| fallback.and_then(Path::parent).map(Path::to_path_buf))
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn write_manifest(&self, dir: &Path) -> Result<()> {
        let manifest = Manifest {
            command: self.command.to_string(),
            args: self.args.clone(),
            config: self.config.clone(),
        };
        let path = manifest.write_to(dir)?;
        log::info!("manifest written to {}", path.display());
        Ok(())
    }
}

fn data_flags(data: &Data) -> Vec<(&'static str, Option<String>)> {
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    vec![
        ("data.cache", path(&data.cache)),
        ("data.meta", path(&data.meta)),
        ("data.variant", data.variant.clone()),
    ]
}

fn required<'a, T>(value: &'a Option<T>, what: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{what} is required")))
}

/// Cached segments as a dataset, with class names from the metadata when
/// one is configured.
fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let cache = required(&cfg.cache, "a feature cache (--cache or data.cache)")?;
    let segments = load_cache(cache)?;
    let meta = cfg.meta.as_ref().map(|m| load_metadata(m, cfg.variant)).transpose()?;
    let ds = dataset_from_segments(segments, meta.as_ref())?;
    log::info!(
        "{}: {} segments, {} classes, folds {:?}",
        cache.display(),
        ds.len(),
        ds.num_classes,
        ds.folds()
    );
    Ok(ds)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::from(e).in_file(path))?))
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    write(&mut w).and_then(|()| Ok(w.flush()?)).map_err(|e| e.in_file(path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn print_report(report: &EvalReport) {
    for f in &report.folds {
        match f.best_accuracy {
            Some(b) => println!("fold {}: {} clips, accuracy {:.4} (best epoch {:.4})", f.fold, f.clips, f.accuracy, b),
            None => println!("fold {}: {} clips, accuracy {:.4}", f.fold, f.clips, f.accuracy),
        }
    }
    println!("mean accuracy {:.4}", report.mean_accuracy());
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Extract {
            common,
            meta,
            data_dir,
            out,
            variant,
        } => {
            let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
            let run = Run::new(
                "extract",
                &common,
                vec![
                    ("data.meta", path(&meta)),
                    ("data.audio_dir", path(&data_dir)),
                    ("data.cache", path(&out)),
                    ("data.variant", variant),
                ],
            )?;
            let cfg = &run.config;
            let meta_path = required(&cfg.meta, "a metadata CSV (--meta or data.meta)")?;
            let audio_dir = required(&cfg.audio_dir, "an audio directory (--data-dir or data.audio_dir)")?;
            let out = required(&cfg.cache, "an output cache (--out or data.cache)")?;
            let meta = load_metadata(meta_path, cfg.variant)?;
            run.write_manifest(&run.out_dir(Some(out)))?;
            let summary = build_cache(&meta, audio_dir, &cfg.train.augment, out)?;
            println!(
                "{} clips, {} segments ({} from augmented copies) written to {}",
                summary.clips,
                summary.segments,
                summary.augmented_segments,
                out.display()
            );
            Ok(())
        }
        Command::Train { common, data, held_out } => {
            let mut run = Run::new("train", &common, data_flags(&data))?;
            let held_out = run.arg("held_out", held_out)?;
            let out_dir = required(&run.config.output_dir, "an output directory (--out-dir or output.dir)")?.clone();
            let ds = load_dataset(&run.config)?;
            run.write_manifest(&out_dir)?;
            let model = run.config.model_for(ds.num_classes);
            let outcome = train(&ds, &model, &run.config.train, held_out)?;
            save_checkpoint(out_dir.join("last.ckpt"), &outcome.last)?;
            save_checkpoint(out_dir.join("best.ckpt"), &outcome.best)?;
            write_file(&out_dir.join("history.csv"), |w| outcome.history.write_csv(w))?;
            let last = outcome.history.epochs.last();
            println!(
                "trained {} epoch(s); final loss {:.4}, training accuracy {:.4}",
                outcome.history.epochs.len(),
                last.map_or(f64::NAN, |e| e.train_loss),
                last.map_or(f64::NAN, |e| e.train_acc)
            );
            if let Some(acc) = outcome.best_val_acc {
                println!("best validation accuracy {acc:.4} at epoch {}", outcome.best.epoch);
            }
            Ok(())
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            fold,
            report,
            confusion,
        } => {
            let mut run = Run::new("eval", &common, data_flags(&data))?;
            let checkpoint = run.path_arg("checkpoint", checkpoint)?;
            let fold = run.arg("fold", fold)?;
            let report = run.path_arg("report", report)?;
            let confusion = run.path_arg("confusion", confusion)?;
            let checkpoint = required(&checkpoint, "--checkpoint")?;
            let fold = *required(&fold, "--fold")?;
            let out_dir = run.out_dir(report.as_deref());
            let ckpt = load_checkpoint(checkpoint)?;
            let ds = load_dataset(&run.config)?;
            if ds.num_classes != ckpt.config.num_classes {
                return Err(Error::Config(format!(
                    "the checkpoint has {} classes but the dataset {}",
                    ckpt.config.num_classes, ds.num_classes
                )));
            }
            run.write_manifest(&out_dir)?;
            let eval = evaluate_checkpoint(&ckpt, &ds, fold)?;
            let result = EvalReport {
                folds: vec![FoldScore {
                    fold,
                    clips: eval.clips.len(),
                    accuracy: eval.accuracy(),
                    best_accuracy: None,
                }],
                confusion: eval.confusion,
                class_names: ds.class_names.clone(),
            };
            write_file(&report.unwrap_or_else(|| out_dir.join("report.csv")), |w| result.write_csv(w))?;
            write_file(&confusion.unwrap_or_else(|| out_dir.join("confusion.csv")), |w| {
                result.write_confusion_csv(w)
            })?;
            print_report(&result);
            Ok(())
        }
        Command::Cv {
            common,
            data,
            report,
            confusion,
        } => {
            let mut run = Run::new("cv", &common, data_flags(&data))?;
            let report = run.path_arg("report", report)?;
            let confusion = run.path_arg("confusion", confusion)?;
            let out_dir = run.out_dir(report.as_deref());
            let ds = load_dataset(&run.config)?;
            run.write_manifest(&out_dir)?;
            let split = FoldSplit::from_dataset(&ds)?;
            let cv = cross_validate(&ds, &run.config.model_for(ds.num_classes), &run.config.train, &split)?;
            for r in &cv.runs {
                let path = out_dir.join(format!("history_fold{}.csv", r.fold));
                write_file(&path, |w| r.outcome.history.write_csv(w))?;
            }
            write_file(&report.unwrap_or_else(|| out_dir.join("report.csv")), |w| cv.report.write_csv(w))?;
            write_file(&confusion.unwrap_or_else(|| out_dir.join("confusion.csv")), |w| {
                cv.report.write_confusion_csv(w)
            })?;
            print_report(&cv.report);
            Ok(())
        }
        Command::Ablate {
            common,
            data,
            report,
            grid,
        } => {
            let mut run = Run::new("ablate", &common, data_flags(&data))?;
            let report = run.path_arg("report", report)?;
            let grid = run.flag("grid", grid)?;
            let out_dir = run.out_dir(report.as_deref());
            let ds = load_dataset(&run.config)?;
            run.write_manifest(&out_dir)?;
            let split = FoldSplit::from_dataset(&ds)?;
            let model = run.config.model_for(ds.num_classes);
            let rows = if grid {
                ablate_grid(&ds, &model, &run.config.train, &split)?
            } else {
                ablate(&ds, &model, &run.config.train, &split, &Placement::ALL)?
            };
            let default_name = if grid { "ablation_grid.csv" } else { "ablation.csv" };
            write_file(&report.unwrap_or_else(|| out_dir.join(default_name)), |w| {
                write_ablation_csv(&rows, w)
            })?;
            for row in &rows {
                println!("{:<20} {:.4}", row.label, row.accuracy);
            }
            Ok(())
        }
        Command::Gradcheck { common, placements } => {
            let mut run = Run::new("gradcheck", &common, Vec::new())?;
            let joined = (!placements.is_empty()).then(|| placements.join(","));
            let placements: Vec<Placement> = match run.arg("placements", joined)? {
                Some(list) if list == "all" => Placement::ALL.to_vec(),
                Some(list) => list
                    .split(',')
                    .map(|p| Placement::from_str(p.trim()))
                    .collect::<Result<_>>()?,
                None => DEFAULT_GRADCHECK_PLACEMENTS.to_vec(),
            };
            run.write_manifest(&run.out_dir(None))?;
            let report = gradcheck_suite(run.config.seed, &placements)?;
            print!("{}", report.table());
            if report.passes() {
                println!("all gradient checks passed");
                Ok(())
            } else {
                Err(Error::contract("gradient check failed"))
            }
        }
    }
}
