//! One function per command-line experiment. Each returns its artifacts in
//! memory; [`Artifacts::write`] names and writes them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::characterization::{
    band_points, cross_check, iv_sweep, phase_diagram, power_at_frequency, power_curve,
    threshold_stats, vf_curve, DEFAULT_LOAD_RESISTOR,
};
use crate::device::{device_params, DeviceState};
use crate::error::{file_error, Error, Result};
use crate::exec::Execution;
use crate::mnist::{encode_rate, Dataset, Split};
use crate::oscillator::{
    classify_response, closed_form_period, extract_spikes, oscillating_band, simulate, DriveKind,
    DriveWaveform, NeuronCircuit, Polarity, Response,
};
use crate::report::{csv_table, emit_svg, num, Palette, Plot, Series};
use crate::snn::{
    argmax, build_transfer, demo_2x2, evaluate, network_circuit, simulate_network_timedomain,
    train, Network, TimeDomainConfig, TimeDomainRun, TrainConfig, DEFAULT_LAYER_SIZES,
    DEFAULT_TRANSFER_SAMPLES,
};

/// Seed used by every stochastic experiment unless overridden.
pub const DEFAULT_SEED: u64 = 2024;
/// Longest polyline drawn for a trace; longer traces are strided.
const MAX_PLOT_POINTS: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub subcommand: &'static str,
    pub csv: String,
    pub svg: Option<String>,
    /// object; `tag` and `files` are added on write
    pub summary: Value,
    /// further files as `(suffix, contents)`, written as `<sub>-<tag>-<suffix>`
    pub extra: Vec<(String, String)>,
}

impl Artifacts {
    /// Write `<sub>-<tag>.{csv,svg,json}` plus extras into `outdir` and
    /// return the summary as written.
    pub fn write(&self, outdir: impl AsRef<Path>, tag: &str) -> Result<Value> {
        if tag.is_empty() || tag.contains(['/', '\\']) {
            return Err(Error::InvalidParameter(format!("bad tag `{tag}`")));
        }
        let outdir = outdir.as_ref();
        fs::create_dir_all(outdir).map_err(file_error(outdir))?;
        let stem = format!("{}-{tag}", self.subcommand);
        let mut files = vec![(format!("{stem}.csv"), self.csv.as_str())];
        if let Some(svg) = &self.svg {
            files.push((format!("{stem}.svg"), svg));
        }
        for (suffix, text) in &self.extra {
            files.push((format!("{stem}-{suffix}"), text));
        }
        let mut summary = self.summary.clone();
        let json_name = format!("{stem}.json");
        let listed: Vec<&str> = files
            .iter()
            .map(|(n, _)| n.as_str())
            .chain([json_name.as_str()])
            .collect();
        let obj = summary
            .as_object_mut()
            .ok_or_else(|| Error::InvalidParameter("summary must be a JSON object".into()))?;
        obj.insert("tag".into(), json!(tag));
        obj.insert("files".into(), json!(listed));
        let json_text = serde_json::to_string_pretty(&summary)? + "\n";
        for (name, text) in files
            .iter()
            .map(|(n, t)| (n.as_str(), *t))
            .chain([(json_name.as_str(), json_text.as_str())])
        {
            let path = outdir.join(name);
            fs::write(&path, text).map_err(file_error(&path))?;
        }
        Ok(summary)
    }
}

fn response_name(r: Response) -> &'static str {
    match r {
        Response::UnFiring => "un_firing",
        Response::Oscillating => "oscillating",
        Response::Firing => "firing",
    }
}

fn state_code(s: DeviceState) -> &'static str {
    if s.is_metallic() {
        "1"
    } else {
        "0"
    }
}

fn stride<T: Copy>(xs: &[T]) -> Vec<T> {
    let step = xs.len().div_ceil(MAX_PLOT_POINTS).max(1);
    xs.iter().step_by(step).copied().collect()
}

fn line_plot(title: &str, series: Vec<Series>, x: &str, y: &str, log_y: bool) -> Result<String> {
    emit_svg(
        title,
        &Plot::Line {
            series,
            x_label: x.into(),
            y_label: y.into(),
            log_x: false,
            log_y,
        },
    )
}

/// Quasi-static I-V sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvArgs {
    pub level: i64,
    /// defaults to twice the device threshold
    pub v_max: Option<f64>,
    pub steps: usize,
    pub load_resistor: f64,
}

impl Default for IvArgs {
    fn default() -> Self {
        IvArgs {
            level: 1,
            v_max: None,
            steps: 1000,
            load_resistor: DEFAULT_LOAD_RESISTOR,
        }
    }
}

pub fn iv(args: &IvArgs) -> Result<Artifacts> {
    let device = device_params(args.level)?;
    let v_max = args.v_max.unwrap_or(2.0 * device.v_th);
    let curve = iv_sweep(&device, v_max, args.steps, args.load_resistor)?;
    let (v_th, v_h) = curve.thresholds()?;
    let csv = csv_table(
        &["v_applied", "current", "v_device", "branch", "state"],
        curve.points.iter().map(|p| {
            vec![
                num(p.v_applied),
                num(p.current),
                num(p.v_device),
                format!("{:?}", p.branch).to_lowercase(),
                state_code(p.state).to_string(),
            ]
        }),
    )?;
    let branch = |up: bool| -> Vec<(f64, f64)> {
        curve
            .points
            .iter()
            .filter(|p| (p.branch == crate::characterization::Branch::Up) == up)
            .map(|p| (p.v_applied, p.current * 1e3))
            .collect()
    };
    let svg = line_plot(
        &format!("I-V sweep, level {}", device.level),
        vec![
            Series::new("up sweep", branch(true)),
            Series::new("down sweep", branch(false)),
        ],
        "source voltage (V)",
        "current (mA)",
        false,
    )?;
    Ok(Artifacts {
        subcommand: "iv",
        csv,
        svg: Some(svg),
        summary: json!({
            "subcommand": "iv",
            "level": device.level,
            "v_max": v_max,
            "steps": args.steps,
            "step": curve.step(),
            "load_resistor": args.load_resistor,
            "v_th": v_th,
            "v_h": v_h,
            "v_th_source": curve.v_th_source,
            "v_h_source": curve.v_h_source,
        }),
        extra: Vec::new(),
    })
}

/// Repeated switching cycles with threshold jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclesArgs {
    pub level: i64,
    pub n_cycles: usize,
    pub seed: u64,
    /// jitter as a fraction of `v_th`
    pub jitter_fraction: f64,
}

impl Default for CyclesArgs {
    fn default() -> Self {
        CyclesArgs {
            level: 1,
            n_cycles: 1000,
            seed: DEFAULT_SEED,
            jitter_fraction: crate::device::DEFAULT_JITTER_FRACTION,
        }
    }
}

pub fn cycles(args: &CyclesArgs, exec: Execution) -> Result<Artifacts> {
    let device = device_params(args.level)?.with_jitter_fraction(args.jitter_fraction);
    let stats = threshold_stats(&device, args.n_cycles, args.seed, exec)?;
    let cdf: Vec<(f64, f64)> = stats.cdf().collect();
    let csv = csv_table(
        &["v_th", "cumulative_fraction"],
        cdf.iter().map(|&(v, f)| vec![num(v), num(f)]),
    )?;
    let svg = line_plot(
        &format!(
            "Threshold distribution over {} cycles, level {}",
            args.n_cycles, device.level
        ),
        vec![Series::new("cumulative fraction", cdf)],
        "threshold voltage (V)",
        "cumulative fraction",
        false,
    )?;
    Ok(Artifacts {
        subcommand: "cycles",
        csv,
        svg: Some(svg),
        summary: json!({
            "subcommand": "cycles",
            "level": device.level,
            "n_cycles": args.n_cycles,
            "seed": args.seed,
            "jitter_sigma": stats.jitter_sigma,
            "mean": stats.mean,
            "std": stats.std,
            "relative_spread": stats.relative_spread(),
            "min": stats.thresholds[0],
            "max": stats.thresholds[stats.thresholds.len() - 1],
        }),
        extra: Vec::new(),
    })
}

/// Circuit values shared by the single-neuron experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitArgs {
    pub r_series: f64,
    pub c_par: f64,
}

impl Default for CircuitArgs {
    fn default() -> Self {
        CircuitArgs {
            r_series: crate::oscillator::DEFAULT_R_SERIES,
            c_par: crate::oscillator::DEFAULT_C_PAR,
        }
    }
}

impl CircuitArgs {
    fn build(&self, level: i64) -> Result<NeuronCircuit> {
        let c = NeuronCircuit::matching(device_params(level)?)
            .with_r_series(self.r_series)
            .with_c_par(self.c_par);
        c.validate()?;
        Ok(c)
    }
}

/// Single neuron under a named drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillateArgs {
    pub level: i64,
    pub circuit: CircuitArgs,
    pub preset: String,
    pub amplitude: Option<f64>,
    /// defaults to 1/50000 of the drive duration
    pub dt: Option<f64>,
    /// threshold jitter as a fraction of `v_th`; needs `seed` when non-zero
    pub jitter_fraction: f64,
    pub seed: u64,
}

impl Default for OscillateArgs {
    fn default() -> Self {
        OscillateArgs {
            level: 1,
            circuit: CircuitArgs::default(),
            preset: "matching-pulse".into(),
            amplitude: None,
            dt: None,
            jitter_fraction: 0.0,
            seed: DEFAULT_SEED,
        }
    }
}

pub fn oscillate(args: &OscillateArgs) -> Result<Artifacts> {
    let mut circuit = args.circuit.build(args.level)?;
    circuit.device = circuit.device.with_jitter_fraction(args.jitter_fraction);
    let drive = DriveWaveform::preset(&args.preset, args.amplitude)?;
    let dt = args.dt.unwrap_or(drive.duration / 50_000.0);
    let seed = (args.jitter_fraction > 0.0).then_some(args.seed);
    let trace = simulate(&circuit, &drive, dt, seed)?;
    let response = match classify_response(&trace) {
        Ok(r) => response_name(r),
        Err(Error::Ambiguous) => "ambiguous",
        Err(e) => return Err(e),
    };
    let spikes = extract_spikes(&trace, circuit.default_spike_threshold())?;
    let csv = csv_table(
        &["t", "v_in", "v_node", "v_spike", "state"],
        (0..trace.len()).map(|i| {
            vec![
                num(trace.t[i]),
                num(trace.v_in[i]),
                num(trace.v_node[i]),
                num(trace.v_spike[i]),
                state_code(trace.state[i]).to_string(),
            ]
        }),
    )?;
    let pts: Vec<(f64, f64)> = trace
        .t
        .iter()
        .zip(&trace.v_spike)
        .map(|(&t, &v)| (t * 1e6, v))
        .collect();
    let svg = line_plot(
        &format!(
            "Neuron output, level {}, {} drive",
            circuit.device.level, args.preset
        ),
        vec![Series::new("spike output", stride(&pts))],
        "time (us)",
        "sampling-resistor voltage (V)",
        false,
    )?;
    let closed_form = match drive.kind {
        DriveKind::Constant { v } => {
            let osc = closed_form_period(&circuit, v);
            json!({ "response": response_name(osc.response()), "frequency": osc.frequency() })
        }
        _ => Value::Null,
    };
    Ok(Artifacts {
        subcommand: "oscillate",
        csv,
        svg: Some(svg),
        summary: json!({
            "subcommand": "oscillate",
            "level": circuit.device.level,
            "r_series": circuit.r_series,
            "c_par": circuit.c_par,
            "drive": drive,
            "dt": dt,
            "seed": seed,
            "response": response,
            "spikes": spikes.len(),
            "positive_spikes": spikes.count(Polarity::Positive),
            "negative_spikes": spikes.count(Polarity::Negative),
            "rate": spikes.rate,
            "closed_form": closed_form,
        }),
        extra: Vec::new(),
    })
}

/// Tri-state map over series resistance and drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseArgs {
    pub level: i64,
    pub grid: (usize, usize),
    pub r_range: (f64, f64),
    pub v_range: (f64, f64),
    pub c_par: f64,
}

impl Default for PhaseArgs {
    fn default() -> Self {
        PhaseArgs {
            level: 1,
            grid: (64, 64),
            r_range: crate::characterization::DEFAULT_R_RANGE,
            v_range: crate::characterization::DEFAULT_V_RANGE,
            c_par: crate::oscillator::DEFAULT_C_PAR,
        }
    }
}

pub fn phase(args: &PhaseArgs, exec: Execution) -> Result<Artifacts> {
    let device = device_params(args.level)?;
    let d = phase_diagram(
        &device,
        args.r_range,
        args.v_range,
        args.grid,
        args.c_par,
        exec,
    )?;
    let nv = d.v_axis.len();
    let mut rows = Vec::with_capacity(d.labels.len());
    for (ir, &r) in d.r_axis.iter().enumerate() {
        for (iv, &v) in d.v_axis.iter().enumerate() {
            rows.push(vec![
                num(r),
                num(v),
                response_name(d.label(ir, iv)).to_string(),
            ]);
        }
    }
    let csv = csv_table(&["r_series", "v_in", "label"], rows)?;
    let svg = emit_svg(
        &format!("Response map, level {}", device.level),
        &Plot::Heatmap {
            x: d.r_axis.clone(),
            y: d.v_axis.clone(),
            values: d.labels.iter().map(|&l| l as usize as f64).collect(),
            x_label: "series resistance (Ohm)".into(),
            y_label: "drive (V)".into(),
            log_x: true,
            palette: Palette::Categorical(vec![
                "un-firing".into(),
                "oscillating".into(),
                "firing".into(),
            ]),
            marker: d
                .triple_point
                .map(|(r, v)| ("triple point".to_string(), r, v)),
        },
    )?;
    let [u, o, f] = d.label_counts();
    debug_assert_eq!(u + o + f, d.r_axis.len() * nv);
    Ok(Artifacts {
        subcommand: "phase",
        csv,
        svg: Some(svg),
        summary: json!({
            "subcommand": "phase",
            "level": device.level,
            "grid": [args.grid.0, args.grid.1],
            "r_range": [args.r_range.0, args.r_range.1],
            "v_range": [args.v_range.0, args.v_range.1],
            "c_par": args.c_par,
            "label_counts": { "un_firing": u, "oscillating": o, "firing": f },
            "region_count": d.region_count(),
            "triple_point": d.triple_point.map(|(r, v)| json!({ "r_series": r, "v_in": v })),
        }),
        extra: Vec::new(),
    })
}

/// Frequency and power curves over the rising band of several levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveArgs {
    pub levels: Vec<i64>,
    pub n_points: usize,
    pub circuit: CircuitArgs,
    pub seed: u64,
    /// random points per level cross-checked by simulation
    pub checks: usize,
}

impl Default for CurveArgs {
    fn default() -> Self {
        CurveArgs {
            levels: vec![1, 2, 3, 4, 5],
            n_points: 40,
            circuit: CircuitArgs::default(),
            seed: DEFAULT_SEED,
            checks: 3,
        }
    }
}

/// Per-level curve output; `banded` holds the circuits that oscillate.
struct LevelCurves {
    rows: Vec<Vec<String>>,
    series: Vec<Series>,
    levels: Vec<Value>,
    banded: Vec<NeuronCircuit>,
}

fn level_curves(args: &CurveArgs, exec: Execution, power: bool) -> Result<LevelCurves> {
    let (mut rows, mut series, mut levels, mut banded) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &level in &args.levels {
        let circuit = args.circuit.build(level)?;
        let Some(band) = oscillating_band(&circuit) else {
            levels.push(json!({ "level": level, "band": Value::Null }));
            continue;
        };
        let v = band_points(&circuit, args.n_points)?;
        let curve = if power {
            power_curve(&circuit, &v)?
        } else {
            vf_curve(&circuit, &v)?
        };
        let checks = cross_check(
            &circuit,
            &curve,
            args.checks,
            args.seed ^ level as u64,
            1000.0,
            exec,
        )?;
        let freqs: Vec<f64> = curve.points.iter().filter_map(|p| p.frequency).collect();
        let monotone = freqs.windows(2).all(|w| w[1] > w[0]);
        for p in &curve.points {
            let f = p.frequency.map(num).unwrap_or_default();
            rows.push(vec![
                level.to_string(),
                num(p.v_in),
                f,
                num(p.power),
                response_name(p.response).into(),
            ]);
        }
        let pts = curve
            .points
            .iter()
            .filter_map(|p| {
                p.frequency.map(|f| {
                    if power {
                        (f * 1e-3, p.power * 1e3)
                    } else {
                        (p.v_in, f * 1e-3)
                    }
                })
            })
            .collect();
        series.push(Series::new(format!("level {level}"), pts));
        let max_err = |f: fn(&crate::characterization::CrossCheck) -> f64| {
            checks.iter().map(f).fold(0.0, f64::max)
        };
        levels.push(json!({
            "level": level,
            "band": { "v_on": band.v_on, "v_peak": band.v_peak, "v_latch": band.v_latch, "f_peak": band.f_peak },
            "monotone": monotone,
            "points": curve.points.len(),
            "cross_check_frequency_error": max_err(|c| c.frequency_error()),
            "cross_check_power_error": max_err(|c| c.power_error()),
        }));
        banded.push(circuit);
    }
    if series.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(LevelCurves {
        rows,
        series,
        levels,
        banded,
    })
}

const CURVE_HEADER: [&str; 5] = ["level", "v_in", "frequency", "power", "response"];

pub fn vf(args: &CurveArgs, exec: Execution) -> Result<Artifacts> {
    let LevelCurves {
        rows,
        series,
        levels,
        ..
    } = level_curves(args, exec, false)?;
    let svg = line_plot(
        "Frequency against drive",
        series,
        "drive (V)",
        "frequency (kHz)",
        false,
    )?;
    Ok(Artifacts {
        subcommand: "vf",
        csv: csv_table(&CURVE_HEADER, rows)?,
        svg: Some(svg),
        summary: json!({
            "subcommand": "vf",
            "r_series": args.circuit.r_series,
            "c_par": args.circuit.c_par,
            "seed": args.seed,
            "levels": levels,
        }),
        extra: Vec::new(),
    })
}

pub fn power(args: &CurveArgs, exec: Execution) -> Result<Artifacts> {
    let LevelCurves {
        rows,
        series,
        levels,
        banded,
    } = level_curves(args, exec, true)?;
    // half the lowest peak frequency is reachable on every rising branch
    let f_match = 0.5
        * banded
            .iter()
            .filter_map(|c| oscillating_band(c).map(|b| b.f_peak))
            .fold(f64::INFINITY, f64::min);
    let matched: Vec<Value> = banded
        .iter()
        .map(|c| json!({ "level": c.device.level, "power": power_at_frequency(c, f_match) }))
        .collect();
    let svg = line_plot(
        "Average power against frequency",
        series,
        "frequency (kHz)",
        "power (mW)",
        false,
    )?;
    Ok(Artifacts {
        subcommand: "power",
        csv: csv_table(&CURVE_HEADER, rows)?,
        svg: Some(svg),
        summary: json!({
            "subcommand": "power",
            "r_series": args.circuit.r_series,
            "c_par": args.circuit.c_par,
            "seed": args.seed,
            "levels": levels,
            "matched_frequency": f_match,
            "matched_power": matched,
        }),
        extra: Vec::new(),
    })
}

fn raster_rows(run: &TimeDomainRun, layers: &[usize]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for &l in layers {
        for (i, spikes) in run.layers[l].spikes.iter().enumerate() {
            rows.extend(
                spikes
                    .iter()
                    .map(|&t| vec![l.to_string(), i.to_string(), num(t)]),
            );
        }
    }
    rows
}

fn raster_svg(title: &str, run: &TimeDomainRun, layers: &[(usize, &str)]) -> Result<String> {
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for &(l, name) in layers {
        rows.extend(run.layers[l].spikes.iter().cloned());
        groups.push((name.to_string(), run.layers[l].spikes.len()));
    }
    emit_svg(
        title,
        &Plot::Raster {
            rows,
            groups,
            t_max: run.layers[0].window,
        },
    )
}

/// Time-domain settings shared by the network experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainArgs {
    pub window: f64,
    pub dt: f64,
}

impl Default for TimeDomainArgs {
    fn default() -> Self {
        let d = TimeDomainConfig::default();
        TimeDomainArgs {
            window: d.window,
            dt: d.dt,
        }
    }
}

impl TimeDomainArgs {
    fn config(&self) -> TimeDomainConfig {
        TimeDomainConfig {
            window: self.window,
            dt: self.dt,
            ..Default::default()
        }
    }
}

/// The two-input, two-output demonstration network.
pub fn net2x2(args: &TimeDomainArgs) -> Result<Artifacts> {
    let transfer = build_transfer(&network_circuit(), DEFAULT_TRANSFER_SAMPLES)?;
    let (demo, run) = demo_2x2(&transfer, &args.config())?;
    let (v11, v12) = (run.rates[0][0], run.rates[0][1]);
    let (v21, v22) = (run.rates[1][0], run.rates[1][1]);
    let input_mismatch = (v11 - v12).abs() / v11.max(v12);
    let svg = raster_svg("2x2 network", &run, &[(0, "inputs"), (1, "outputs")])?;
    Ok(Artifacts {
        subcommand: "net2x2",
        csv: csv_table(&["layer", "neuron", "t"], raster_rows(&run, &[0, 1]))?,
        svg: Some(svg),
        summary: json!({
            "subcommand": "net2x2",
            "window": args.window,
            "dt": args.dt,
            "weights": demo.weights,
            "biases": demo.biases,
            "input": demo.input,
            "rates": { "v11": v11, "v12": v12, "v21": v21, "v22": v22 },
            "input_mismatch": input_mismatch,
            "ordering_holds": v21 > v11.max(v12) && v11.min(v12) > v22 && input_mismatch <= 0.02,
        }),
        extra: Vec::new(),
    })
}

/// Data location and subset sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataArgs {
    pub dir: PathBuf,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl DataArgs {
    fn load(&self, split: Split) -> Result<Dataset> {
        let d = Dataset::load(&self.dir, split)?;
        let limit = match split {
            Split::Train => self.train_limit,
            Split::Test => self.test_limit,
        };
        let d = limit.map_or(d.clone(), |n| d.take(n));
        if d.is_empty() {
            return Err(Error::EmptyData);
        }
        Ok(d)
    }
}

pub fn train_network(
    data: &DataArgs,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<(Network, Artifacts)> {
    let train_set = data.load(Split::Train)?;
    let test_set = data.load(Split::Test)?;
    let transfer = build_transfer(&network_circuit(), DEFAULT_TRANSFER_SAMPLES)?;
    let mut net = Network::random(&DEFAULT_LAYER_SIZES, transfer, cfg.seed)?;
    let history = train(&mut net, &train_set, cfg, Some(&test_set), exec)?;
    let rows = history.epochs.iter().map(|e| {
        vec![
            e.epoch.to_string(),
            num(e.train_loss),
            num(e.train_accuracy),
            e.test_accuracy.map(num).unwrap_or_default(),
        ]
    });
    let csv = csv_table(
        &["epoch", "train_loss", "train_accuracy", "test_accuracy"],
        rows,
    )?;
    let acc: Vec<(f64, f64)> = history
        .epochs
        .iter()
        .filter_map(|e| e.test_accuracy.map(|a| (e.epoch as f64, 100.0 * a)))
        .collect();
    let svg = line_plot(
        "Test accuracy during training",
        vec![Series::new("test accuracy", acc)],
        "epoch",
        "accuracy (%)",
        false,
    )?;
    let last = history.epochs.last().expect("epochs >= 1");
    let summary = json!({
        "subcommand": "train",
        "seed": cfg.seed,
        "config": cfg,
        "train_size": train_set.len(),
        "test_size": test_set.len(),
        "layer_sizes": net.layer_sizes(),
        "final_train_loss": last.train_loss,
        "final_test_accuracy": last.test_accuracy,
        "history": history.epochs,
    });
    let model = net.to_json()?;
    Ok((
        net,
        Artifacts {
            subcommand: "train",
            csv,
            svg: Some(svg),
            summary,
            extra: vec![("network.json".into(), model)],
        },
    ))
}

pub fn eval(model: &Path, data: &DataArgs, exec: Execution) -> Result<Artifacts> {
    let net = Network::load(model)?;
    let test_set = data.load(Split::Test)?;
    let ev = evaluate(&net, &test_set, exec)?;
    let mut header = vec!["true".to_string()];
    header.extend((0..10).map(|p| format!("pred_{p}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = csv_table(
        &header,
        ev.confusion.iter().enumerate().map(|(t, row)| {
            std::iter::once(t.to_string())
                .chain(row.iter().map(|c| c.to_string()))
                .collect::<Vec<_>>()
        }),
    )?;
    let digits: Vec<f64> = (0..10).map(|d| d as f64).collect();
    // columns are predictions, rows true labels
    let values = (0..10)
        .flat_map(|p| (0..10).map(move |t| (p, t)))
        .map(|(p, t)| ev.confusion[t][p] as f64)
        .collect();
    let svg = emit_svg(
        "Confusion matrix",
        &Plot::Heatmap {
            x: digits.clone(),
            y: digits,
            values,
            x_label: "predicted digit".into(),
            y_label: "true digit".into(),
            log_x: false,
            palette: Palette::Sequential,
            marker: None,
        },
    )?;
    Ok(Artifacts {
        subcommand: "eval",
        csv,
        svg: Some(svg),
        summary: json!({
            "subcommand": "eval",
            "model": model.display().to_string(),
            "total": ev.total,
            "correct": ev.correct,
            "accuracy": ev.accuracy,
        }),
        extra: Vec::new(),
    })
}

/// Time-domain run of one test digit through a trained network.
pub fn run_digit(
    net: &Network,
    test_set: &Dataset,
    index: usize,
    td: &TimeDomainArgs,
) -> Result<TimeDomainRun> {
    if index >= test_set.len() {
        return Err(Error::InvalidParameter(format!(
            "index {index} outside the test set ({} images)",
            test_set.len()
        )));
    }
    let enc = encode_rate(&test_set.image(index), &net.transfer, td.window)?;
    simulate_network_timedomain(net, &enc.drives, &td.config())
}

pub fn infer(
    model: &Path,
    data: &DataArgs,
    index: usize,
    td: &TimeDomainArgs,
) -> Result<Artifacts> {
    let net = Network::load(model)?;
    let test_set = data.load(Split::Test)?;
    let run = run_digit(&net, &test_set, index, td)?;
    let forward = net.forward(&test_set.image(index))?;
    let rate_domain = forward.last().expect("output layer");
    let r_max = net.transfer.normalization.r_max;
    let out = run.output_rates();
    let csv = csv_table(
        &["neuron", "rate", "forward_rate"],
        out.iter()
            .zip(rate_domain)
            .enumerate()
            .map(|(i, (&r, &y))| vec![i.to_string(), num(r), num(y * r_max)]),
    )?;
    let svg = emit_svg(
        &format!("Output firing rates, test digit {index}"),
        &Plot::Histogram {
            labels: (0..out.len()).map(|i| i.to_string()).collect(),
            values: out.iter().map(|r| r * 1e-6).collect(),
            x_label: "output neuron".into(),
            y_label: "rate (MHz)".into(),
        },
    )?;
    Ok(Artifacts {
        subcommand: "infer",
        csv,
        svg: Some(svg),
        summary: json!({
            "subcommand": "infer",
            "model": model.display().to_string(),
            "index": index,
            "label": test_set.label(index),
            "window": td.window,
            "dt": td.dt,
            "predicted": run.predicted,
            "forward_predicted": argmax(rate_domain.as_slice().expect("contiguous")),
            "output_rates": out,
        }),
        extra: Vec::new(),
    })
}

pub fn raster(
    model: &Path,
    data: &DataArgs,
    index: usize,
    td: &TimeDomainArgs,
) -> Result<Artifacts> {
    let net = Network::load(model)?;
    let test_set = data.load(Split::Test)?;
    let run = run_digit(&net, &test_set, index, td)?;
    let last = run.layers.len() - 1;
    let layers: Vec<usize> = (1..=last).collect();
    let named: Vec<(usize, String)> = layers
        .iter()
        .map(|&l| {
            (
                l,
                if l == last {
                    "output".to_string()
                } else {
                    format!("hidden {l}")
                },
            )
        })
        .collect();
    let named_ref: Vec<(usize, &str)> = named.iter().map(|(l, n)| (*l, n.as_str())).collect();
    let svg = raster_svg(
        &format!("Spike raster, test digit {index}"),
        &run,
        &named_ref,
    )?;
    let counts: Vec<usize> = run.layers.iter().map(|r| r.total_spikes()).collect();
    Ok(Artifacts {
        subcommand: "raster",
        csv: csv_table(&["layer", "neuron", "t"], raster_rows(&run, &layers))?,
        svg: Some(svg),
        summary: json!({
            "subcommand": "raster",
            "model": model.display().to_string(),
            "index": index,
            "label": test_set.label(index),
            "window": td.window,
            "dt": td.dt,
            "spike_counts": counts,
            "predicted": run.predicted,
        }),
        extra: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifacts_are_named_by_subcommand_and_tag() {
        let dir = tempfile::tempdir().unwrap();
        let a = iv(&IvArgs::default()).unwrap();
        let summary = a.write(dir.path(), "t1").unwrap();
        for f in ["iv-t1.csv", "iv-t1.svg", "iv-t1.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(summary["files"].as_array().unwrap().len(), 3);
        assert!(a.write(dir.path(), "../x").is_err());
        let v_th = summary["v_th"].as_f64().unwrap();
        assert!((v_th - 6.5).abs() <= summary["step"].as_f64().unwrap());
    }

    #[test]
    fn phase_summary_reports_triple_point() {
        let args = PhaseArgs {
            grid: (24, 24),
            ..Default::default()
        };
        let a = phase(&args, Execution::Sequential).unwrap();
        assert_eq!(a.summary["region_count"], 3);
        assert!(a.summary["triple_point"]["r_series"].as_f64().unwrap() > 0.0);
        assert!(a.svg.unwrap().contains("triple point"));
    }

    #[test]
    fn curves_skip_level_without_band() {
        let a = vf(
            &CurveArgs {
                levels: vec![4, 5],
                n_points: 10,
                checks: 1,
                ..Default::default()
            },
            Execution::Sequential,
        )
        .unwrap();
        let levels = a.summary["levels"].as_array().unwrap();
        assert!(levels[1]["band"].is_null());
        assert_eq!(levels[0]["monotone"], true);
        assert!(levels[0]["cross_check_frequency_error"].as_f64().unwrap() < 0.01);
    }
}
