use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use colcirc::circuit::{set_thread_count, CircuitFileError, Direction, PortRef};
use colcirc::codec::{self, BundleError, CodecError, SchemeInstance, MANIFEST};
use colcirc::column::{frequency_distribution, io, representation_size_bytes};
use colcirc::transform::{self, TransformError};
use colcirc::{gen, Catalog, Circuit, Column, EvalError, Ports};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

#[derive(Parser)]
#[command(name = "colcirc", version, about = "Columnar circuits and column codecs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode columns under a scheme into a bundle directory.
    Encode {
        #[arg(long)]
        scheme: String,
        /// Scheme parameters as inline JSON or `@file`.
        #[arg(long, default_value = "{}")]
        params: String,
        /// Input columns as `label=path.col`, or a bare path for the label `column`.
        #[arg(required = true, num_args = 1..)]
        inputs: Vec<String>,
        /// Bundle directory to write.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Verify a bundle and write its decoded columns as `<label>.col`.
    Decode {
        bundle: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Verify a bundle.
    Verify { bundle: PathBuf },
    /// Evaluate a circuit file.
    Eval {
        circuit: PathBuf,
        /// Input columns as `label=path.col`.
        #[arg(short, long = "input")]
        inputs: Vec<String>,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the column at every port under `<out>/trace/`.
        #[arg(long)]
        trace: bool,
    },
    /// Sizes, compression ratio and value frequencies of a column file or bundle.
    Stats {
        path: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Apply a circuit transformation and write the resulting circuit file.
    Transform {
        /// The circuit to transform (not needed by `lift`).
        circuit: Option<PathBuf>,
        #[arg(long, value_enum)]
        op: TransformOp,
        /// Comma-separated vertex ids for fuse, induce and replace; fuse defaults to all.
        #[arg(long)]
        vertices: Option<String>,
        /// Name of the fused operator.
        #[arg(long, default_value = "fused")]
        name: String,
        /// Second circuit for union, replacement circuit for replace.
        #[arg(long)]
        with: Option<PathBuf>,
        /// Operator name for lift.
        #[arg(long)]
        operator: Option<String>,
        /// Operator parameters for lift, as inline JSON or `@file`.
        #[arg(long, default_value = "{}")]
        params: String,
        /// Input label for assign.
        #[arg(long)]
        label: Option<String>,
        /// Out-port `vertex.port` for assign.
        #[arg(long)]
        source: Option<String>,
        /// Label mapping for replace, `replacement=original,...`.
        #[arg(long)]
        map: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic data.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        max_run: usize,
        #[arg(long, default_value_t = 16)]
        distinct: u64,
        #[arg(long, default_value_t = 1.1)]
        exponent: f64,
        #[arg(long, default_value_t = 0)]
        intercept: i64,
        #[arg(long, default_value_t = 3)]
        slope: i64,
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.25)]
        p: f64,
        /// A `.col` file, or a directory for `lineitem`.
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformOp {
    Fuse,
    Dedup,
    Induce,
    Lift,
    Union,
    Assign,
    Replace,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Runs,
    Zipf,
    NoisyLinear,
    GeometricWidths,
    Lineitem,
}

/// A failed command: exit code and message.
struct Failure(u8, String);

type Outcome = Result<(), Failure>;

fn usage(m: impl ToString) -> Failure {
    Failure(1, m.to_string())
}

fn from_bundle(e: BundleError) -> Failure {
    match e {
        BundleError::Io(e) => Failure(1, e.to_string()),
        e => Failure(3, e.to_string()),
    }
}

fn from_circuit(e: CircuitFileError) -> Failure {
    match e {
        CircuitFileError::Io(e) => Failure(1, e.to_string()),
        e => Failure(4, e.to_string()),
    }
}

fn from_eval(e: EvalError) -> Failure {
    match e {
        EvalError::Invalid(_) => Failure(4, e.to_string()),
        EvalError::OperatorFailure { .. } => Failure(5, e.to_string()),
        e => Failure(1, e.to_string()),
    }
}

fn from_transform(e: TransformError) -> Failure {
    Failure(4, e.to_string())
}

fn read_col(path: &Path) -> Result<Column, Failure> {
    io::read_file(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_col(path: &Path, c: &Column) -> Outcome {
    io::write_file(path, c).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn json_arg(s: &str) -> Result<Json, Failure> {
    let text = match s.strip_prefix('@') {
        Some(p) => fs::read_to_string(p).map_err(|e| usage(format!("{p}: {e}")))?,
        None => s.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("bad JSON: {e}")))
}

fn labeled(args: &[String], default: Option<&str>) -> Result<Ports, Failure> {
    let mut out = Ports::new();
    for a in args {
        let (label, path) = match (a.split_once('='), default) {
            (Some((l, p)), _) => (l.to_string(), p),
            (None, Some(d)) if args.len() == 1 => (d.to_string(), a.as_str()),
            _ => return Err(usage(format!("expected label=path, got `{a}`"))),
        };
        if out.insert(label.clone(), read_col(Path::new(path))?).is_some() {
            return Err(usage(format!("label `{label}` given twice")));
        }
    }
    Ok(out)
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

fn write_ports(dir: &Path, ports: &Ports) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    for (label, c) in ports {
        write_col(&dir.join(format!("{}.col", file_stem(label))), c)?;
    }
    Ok(())
}

fn read_circuit(path: &Path) -> Result<Circuit, Failure> {
    Circuit::read_file(path, Catalog::global()).map_err(from_circuit)
}

fn encode(scheme: &str, params: &str, inputs: &[String], out: &Path) -> Outcome {
    let params = json_arg(params)?;
    let cols = labeled(inputs, Some("column"))?;
    let inst = codec::encode(scheme, &params, &cols).map_err(|e| match e {
        CodecError::NotEncodable(_) => Failure(2, e.to_string()),
        e => usage(e),
    })?;
    codec::write_bundle(out, &inst).map_err(from_bundle)?;
    println!("{} bytes in {} columns", inst.size_bytes(), inst.columns.len());
    Ok(())
}

fn verified(dir: &Path) -> Result<SchemeInstance, Failure> {
    let inst = codec::read_bundle(dir).map_err(from_bundle)?;
    codec::verify_reason(&inst).map_err(|r| Failure(3, format!("reject: {r}")))?;
    Ok(inst)
}

fn decode(bundle: &Path, out: &Path) -> Outcome {
    let inst = verified(bundle)?;
    let dec = codec::decode(&inst).map_err(|e| Failure(3, e.to_string()))?;
    write_ports(out, &dec)
}

fn eval(circuit: &Path, inputs: &[String], out: &Path, trace: bool) -> Outcome {
    let c = read_circuit(circuit)?;
    let violations = c.validate();
    if !violations.is_empty() {
        return Err(from_eval(EvalError::Invalid(violations)));
    }
    let inputs = labeled(inputs, None)?;
    if trace {
        let (outs, t) = c.evaluate_traced(&inputs).map_err(from_eval)?;
        write_ports(out, &outs)?;
        let dir = out.join("trace");
        let named: Ports = t.iter().map(|(p, col)| (port_file(p), col.clone())).collect();
        write_ports(&dir, &named)
    } else {
        let outs = c.evaluate(&inputs).map_err(from_eval)?;
        write_ports(out, &outs)
    }
}

fn port_file(p: &PortRef) -> String {
    let d = match p.dir {
        Direction::In => "in",
        Direction::Out => "out",
    };
    format!("{}.{d}.{}", p.vertex, p.port)
}

fn column_stats(label: &str, c: &Column, top: usize) -> Json {
    let f = frequency_distribution(c);
    let top: Vec<Json> = f.top(top).into_iter().map(|(v, n)| json!({"value": v.to_json(), "count": n})).collect();
    json!({
        "label": label,
        "type": c.element_type().to_string(),
        "length": c.len(),
        "bytes": representation_size_bytes([c]),
        "support": f.support_size(),
        "top": top,
    })
}

fn stats(path: &Path, as_json: bool, top: usize) -> Outcome {
    let report = if path.join(MANIFEST).is_file() {
        let inst = verified(path)?;
        let dec = codec::decode(&inst).map_err(|e| Failure(3, e.to_string()))?;
        let r = codec::compression_ratio(&inst).map_err(|e| Failure(3, e.to_string()))?;
        json!({
            "scheme": inst.scheme,
            "encoded_bytes": r.den,
            "decoded_bytes": r.num,
            "ratio": format!("{:.6}", r.as_f64()),
            "encoded": inst.columns.iter().map(|(l, c)| column_stats(l, c, top)).collect::<Vec<_>>(),
            "decoded": dec.iter().map(|(l, c)| column_stats(l, c, top)).collect::<Vec<_>>(),
        })
    } else {
        let c = read_col(path)?;
        let b = representation_size_bytes([&c]);
        json!({
            "scheme": null,
            "encoded_bytes": b,
            "decoded_bytes": b,
            "ratio": format!("{:.6}", 1.0),
            "decoded": [column_stats("column", &c, top)],
        })
    };
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
        return Ok(());
    }
    if let Some(s) = report["scheme"].as_str() {
        println!("scheme {s}");
    }
    println!(
        "encoded {} bytes, decoded {} bytes, ratio {}",
        report["encoded_bytes"],
        report["decoded_bytes"],
        report["ratio"].as_str().unwrap()
    );
    for section in ["encoded", "decoded"] {
        for c in report[section].as_array().into_iter().flatten() {
            let top: Vec<String> =
                c["top"].as_array().unwrap().iter().map(|t| format!("{}×{}", t["value"], t["count"])).collect();
            println!(
                "{section} {}: {} × {} = {} bytes, {} distinct, top {}",
                c["label"].as_str().unwrap(),
                c["type"].as_str().unwrap(),
                c["length"],
                c["bytes"],
                c["support"],
                top.join(" ")
            );
        }
    }
    Ok(())
}

fn vertex_set(c: &Circuit, arg: Option<&str>, all_by_default: bool) -> Result<BTreeSet<String>, Failure> {
    match arg {
        Some(s) => Ok(s.split(',').filter(|v| !v.is_empty()).map(str::to_string).collect()),
        None if all_by_default => Ok(c.vertices.keys().cloned().collect()),
        None => Err(usage("--vertices is required")),
    }
}

struct TransformArgs<'a> {
    circuit: Option<&'a Path>,
    op: TransformOp,
    vertices: Option<&'a str>,
    name: &'a str,
    with: Option<&'a Path>,
    operator: Option<&'a str>,
    params: &'a str,
    label: Option<&'a str>,
    source: Option<&'a str>,
    map: Option<&'a str>,
}

fn transformed(a: TransformArgs) -> Result<Circuit, Failure> {
    let catalog = Catalog::global();
    if let TransformOp::Lift = a.op {
        let name = a.operator.ok_or_else(|| usage("--operator is required"))?;
        let op = catalog.build(name, &json_arg(a.params)?).map_err(|e| Failure(4, e.to_string()))?;
        return Ok(transform::lift_operator(op));
    }
    let c = read_circuit(a.circuit.ok_or_else(|| usage("a circuit file is required"))?)?;
    let other = || read_circuit(a.with.ok_or_else(|| usage("--with is required"))?);
    match a.op {
        TransformOp::Lift => unreachable!(),
        TransformOp::Fuse => {
            let set = vertex_set(&c, a.vertices, true)?;
            transform::fuse_subcircuit(&c, &set, a.name, catalog).map_err(from_transform)
        }
        TransformOp::Dedup => Ok(transform::eliminate_duplicate_vertices(&c)),
        TransformOp::Induce => {
            transform::induced_subcircuit(&c, &vertex_set(&c, a.vertices, false)?).map_err(from_transform)
        }
        TransformOp::Union => Ok(transform::circuit_union(&c, &other()?)),
        TransformOp::Assign => {
            let label = a.label.ok_or_else(|| usage("--label is required"))?;
            let src = a.source.ok_or_else(|| usage("--source is required"))?;
            let (v, p) = src.split_once('.').ok_or_else(|| usage("--source must be vertex.port"))?;
            transform::assign_input(&c, label, &PortRef::output(v, p)).map_err(from_transform)
        }
        TransformOp::Replace => {
            let set = vertex_set(&c, a.vertices, false)?;
            let mut rho = BTreeMap::new();
            for pair in a.map.unwrap_or("").split(',').filter(|s| !s.is_empty()) {
                let (x, y) = pair.split_once('=').ok_or_else(|| usage(format!("bad mapping `{pair}`")))?;
                rho.insert(x.to_string(), y.to_string());
            }
            transform::replace_subcircuit(&c, &set, &other()?, &rho).map_err(from_transform)
        }
    }
}

fn generate(kind: GenKind, n: usize, seed: u64, g: &Command, out: &Path) -> Outcome {
    let Command::Gen { max_run, distinct, exponent, intercept, slope, sigma, p, .. } = g else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col = match kind {
        GenKind::Runs => gen::runs(&mut rng, n, *max_run, *distinct),
        GenKind::Zipf => {
            if *distinct == 0 || *exponent < 0.0 {
                return Err(usage("zipf needs --distinct > 0 and --exponent ≥ 0"));
            }
            gen::zipf(&mut rng, n, *distinct, *exponent)
        }
        GenKind::NoisyLinear => gen::noisy_linear(&mut rng, n, *intercept, *slope, *sigma),
        GenKind::GeometricWidths => {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(usage("--p must be in (0, 1]"));
            }
            gen::geometric_widths(&mut rng, n, *p)
        }
        GenKind::Lineitem => return write_ports(out, &gen::lineitem(&mut rng, n)),
    };
    write_col(out, &col)
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Encode { scheme, params, inputs, out } => encode(scheme, params, inputs, out),
        Command::Decode { bundle, out } => decode(bundle, out),
        Command::Verify { bundle } => {
            verified(bundle)?;
            println!("accept");
            Ok(())
        }
        Command::Eval { circuit, inputs, out, trace } => eval(circuit, inputs, out, *trace),
        Command::Stats { path, json, top } => stats(path, *json, *top),
        Command::Transform { circuit, op, vertices, name, with, operator, params, label, source, map, out } => {
            let c = transformed(TransformArgs {
                circuit: circuit.as_deref(),
                op: *op,
                vertices: vertices.as_deref(),
                name,
                with: with.as_deref(),
                operator: operator.as_deref(),
                params,
                label: label.as_deref(),
                source: source.as_deref(),
                map: map.as_deref(),
            })?;
            let text = serde_json::to_string_pretty(&c.to_json()).expect("json") + "\n";
            match out {
                Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        g @ Command::Gen { kind, n, seed, out, .. } => generate(*kind, *n, *seed, g, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var("COLCIRC_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        set_thread_count(n);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("colcirc: {msg}");
            ExitCode::from(code)
        }
    }
}
