use std::fs;
use std::io::Write;
use std::path::Path;

use gradhorizon::{
    gradient_horizon, load_model, save_model, BatchRecord, Error, GradientLog, LossSmoother,
    Trainer,
};

use crate::{CliError, GenerateArgs, InspectArgs, TrainArgs, EXIT_INVALID, EXIT_NUMERIC};

fn core_error(e: Error) -> CliError {
    let code = match e {
        Error::NumericAbort { .. } => EXIT_NUMERIC,
        _ => EXIT_INVALID,
    };
    CliError { code, message: e.to_string() }
}

fn stdout_error(e: std::io::Error) -> CliError {
    CliError::io(format!("writing output: {e}"))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// Reads and validates a gradient log. Unreadable files are I/O errors;
/// anything that reads but does not validate is exit code 2.
pub(crate) fn read_log(path: &Path) -> Result<GradientLog, CliError> {
    let bytes = read(path)?;
    GradientLog::from_json_bytes(&bytes)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.config();
    cfg.validate().map_err(core_error)?;
    let bytes = read(&args.corpus)?;
    let text = String::from_utf8(bytes)
        .map_err(|e| CliError::invalid(format!("{} is not UTF-8: {e}", args.corpus.display())))?;
    let corpus_id = args
        .corpus
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    // Fail on unwritable outputs before spending time on training.
    write(&args.out, b"")?;
    if let Some(path) = &args.model_out {
        write(path, b"")?;
    }

    let mut trainer = Trainer::new(&text, cfg.clone(), corpus_id).map_err(core_error)?;
    let mut smoother = LossSmoother::new(100);
    while !trainer.is_finished() {
        let report = trainer.step().map_err(core_error)?;
        let smoothed = smoother.push(report.mean_loss);
        if report.batch_index.is_multiple_of(cfg.record_interval) {
            writeln!(out, "batch {:>6}  loss {smoothed:.4}", report.batch_index).map_err(stdout_error)?;
        }
    }
    let (params, vocab, log) = trainer.into_parts();

    write(&args.out, &log.to_json_bytes())?;
    writeln!(out, "wrote {} records to {}", log.len(), args.out.display()).map_err(stdout_error)?;
    if let Some(path) = &args.model_out {
        write(path, &save_model(&params, &vocab))?;
        writeln!(out, "wrote model to {}", path.display()).map_err(stdout_error)?;
    }
    Ok(())
}

pub fn generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.length == 0 {
        return Err(CliError::invalid("--length must be at least 1"));
    }
    let bytes = read(&args.model)?;
    let (params, vocab) = load_model(&bytes)
        .map_err(|e| CliError::invalid(format!("{}: {e}", args.model.display())))?;
    let seed_char = match args.seed_char {
        Some(c) => c,
        None => vocab.symbols()[0],
    };
    let text = gradhorizon::generate(&params, &vocab, seed_char, args.length, args.mode, args.seed)
        .map_err(core_error)?;
    writeln!(out, "{text}").map_err(stdout_error)
}

pub fn inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(args.epsilon > 0.0 && args.epsilon.is_finite()) {
        return Err(CliError::invalid("--epsilon must be positive"));
    }
    let log = read_log(&args.log)?;
    let text = match args.batch {
        None => summary_table(&log),
        Some(b) => match log.record(b) {
            Some(record) => batch_detail(record, args.epsilon)?,
            None => {
                let valid: Vec<String> = log.records().iter().map(|r| r.batch_index.to_string()).collect();
                return Err(CliError::invalid(format!(
                    "batch {b} is not in the log; recorded batches: {}",
                    valid.join(", ")
                )));
            }
        },
    };
    out.write_all(text.as_bytes()).map_err(stdout_error)
}

fn summary_table(log: &GradientLog) -> String {
    let mut s = format!("{:>6}  {:>8}  {:>12}  {:>8}\n", "record", "batch", "max_gradient", "accuracy");
    for (i, r) in log.records().iter().enumerate() {
        s += &format!("{i:>6}  {:>8}  {:>12.4e}  {:>8.3}\n", r.batch_index, r.max_gradient, r.accuracy());
    }
    s
}

fn visible(labels: &str) -> String {
    labels.chars().flat_map(char::escape_debug).collect()
}

fn batch_detail(r: &BatchRecord, epsilon: f64) -> Result<String, CliError> {
    let mut s = format!(
        "batch {}  offset {}  loss {:.4}  accuracy {:.3}  max_gradient {:.4e}\n",
        r.batch_index,
        r.char_offset,
        r.batch_loss,
        r.accuracy(),
        r.max_gradient
    );
    s += &format!("true:      {}\n", visible(&r.true_labels));
    s += &format!("predicted: {}\n", visible(&r.predicted_labels));

    let depth = r.magnitudes.iter().map(Vec::len).max().unwrap_or(0);
    s += "\nmagnitudes by origin t and distance d (gradient reaching step t - d)\n";
    s += &format!("{:>4}  {:>4}", "t", "char");
    for d in 0..depth {
        s += &format!("  {:>10}", format!("d={d}"));
    }
    s += "\n";
    let truth: Vec<char> = r.true_labels.chars().collect();
    for (t, row) in r.magnitudes.iter().enumerate() {
        let label: String = truth.get(t).map(|c| visible(&c.to_string())).unwrap_or_default();
        s += &format!("{t:>4}  {label:>4}");
        for m in row {
            s += &format!("  {m:>10.3e}");
        }
        s += "\n";
    }

    s += &format!("\ngradient horizon per origin at epsilon {epsilon:e}\n");
    s += &format!("{:>4}  {:>7}\n", "t", "horizon");
    for (t, row) in r.magnitudes.iter().enumerate() {
        let h = gradient_horizon(row, epsilon).map_err(core_error)?;
        s += &format!("{t:>4}  {h:>7}\n");
    }
    Ok(s)
}
