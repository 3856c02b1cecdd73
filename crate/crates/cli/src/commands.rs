use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use quasispec::analysis::{self, BlockMax, DecayFit};
use quasispec::dynamics::{self, AmplitudeSeries, StateVector};
use quasispec::measures::{self, AtomicMeasure, ConvolutionMode, FourierTrace};
use quasispec::operator::{self, ModelParams};
use quasispec::{io, spectral, Grid};

use crate::output::{ensure_dir, write_file, write_json, write_rows};
use crate::{
    AverageArgs, Cli, CliError, Command, DecayArgs, DosArgs, FactorKind, Format, ModelArgs,
    ReportArgs, Route, SpectrumArgs, TensorArgs, TimeGrid,
};

pub const DOS_HALF_WIDTH: usize = 100;
pub const DECAY_HALF_WIDTH: usize = 2000;
pub const AVERAGE_HALF_WIDTH: usize = 200;

/// Dyadic windows `[2^j, 2^{j+1})` scanned for escape of mass.
pub const ESCAPE_BLOCKS: (u32, u32) = (2, 9);

/// Cutoffs of the L² diagnostic in the report, below `xi_max`, which is always
/// the last one.
pub const L2_CUTOFFS: [f64; 3] = [250.0, 500.0, 1000.0];

/// Agreement required by `tensor-check`.
pub const TENSOR_TOLERANCE: f64 = 1e-9;

/// Default time step of the report's escape-of-mass grid.
const ESCAPE_DT: f64 = 0.05;

/// Runs one command and returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(&cli.global.out)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let out = cli.global.out.as_path();
    let format = cli.global.format;
    pool.install(|| match &cli.command {
        Command::Dos(a) => cmd_dos(a, out, format),
        Command::Decay(a) => cmd_decay(a, out, format),
        Command::Average(a) => cmd_average(a, out, format),
        Command::TensorCheck(a) => cmd_tensor_check(a, cli.global.seed, out),
        Command::Report(a) => cmd_report(a, out, format),
    })
}

pub fn model_params(m: &ModelArgs, default_half_width: usize) -> Result<ModelParams, CliError> {
    let p = ModelParams::new(m.coupling, m.half_width.unwrap_or(default_half_width))?;
    Ok(p.with_phase(m.phase)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerSummary {
    pub n: u32,
    pub mode: &'static str,
    pub bin_width: Option<f64>,
    pub mass: f64,
    pub atom_count: usize,
    pub dropped_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DosSummary {
    pub coupling: f64,
    pub half_width: usize,
    pub phase: Option<f64>,
    pub mass: f64,
    pub atom_count: usize,
    pub breakpoint_count: usize,
    pub interval_count: usize,
    pub distinct_operators: usize,
    pub power: Option<PowerSummary>,
}

pub fn cmd_dos(a: &DosArgs, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let params = model_params(&a.model, DOS_HALF_WIDTH)?;
    let partition = operator::phase_partition(&params);
    let distinct = spectral::group_by_pattern(&partition, &params)
        .operators
        .len();
    let measure = if a.single_phase {
        let op = operator::build_hamiltonian(&params);
        spectral::local_spectral_measure(&op, params.half_width)?
    } else {
        spectral::density_of_states(&params)?
    };
    let mut files = vec![write_measure(out, "dos", &measure, format)?];

    let power = if a.power > 1 {
        let mode = if a.exact {
            ConvolutionMode::Exact
        } else {
            let h = a
                .bin_width
                .unwrap_or_else(|| measures::default_bin_width(params.coupling));
            ConvolutionMode::Binned { bin_width: h }
        };
        let p = measures::convolution_power(&measure, a.power, mode)?;
        files.push(write_measure(
            out,
            &format!("dos_power{}", a.power),
            &p,
            format,
        )?);
        Some(PowerSummary {
            n: a.power,
            mode: if a.exact { "exact" } else { "binned" },
            bin_width: match mode {
                ConvolutionMode::Binned { bin_width } => Some(bin_width),
                ConvolutionMode::Exact => None,
            },
            mass: p.total_mass(),
            atom_count: p.len(),
            dropped_mass: p.dropped_mass(),
        })
    } else {
        None
    };

    let summary = DosSummary {
        coupling: params.coupling,
        half_width: params.half_width,
        phase: a.single_phase.then_some(params.phase),
        mass: measure.total_mass(),
        atom_count: measure.len(),
        breakpoint_count: partition.breakpoints().len(),
        interval_count: partition.len(),
        distinct_operators: distinct,
        power,
    };
    files.push(write_json(out, "dos_summary.json", &summary)?);
    Ok(files)
}

fn write_measure(
    out: &Path,
    stem: &str,
    m: &AtomicMeasure,
    format: Format,
) -> Result<PathBuf, CliError> {
    match format {
        Format::Csv => write_file(out, &format!("{stem}.csv"), |w| io::write_measure_csv(w, m)),
        Format::Json => write_json(out, &format!("{stem}.json"), m),
    }
}

pub fn xi_grid(s: &SpectrumArgs) -> Result<Grid, CliError> {
    if !s.xi_max.is_finite() || s.xi_max <= 0.0 {
        return Err(CliError::Config(format!(
            "--xi-max must be positive, got {}",
            s.xi_max
        )));
    }
    Ok(Grid::linear(0.0, s.xi_max, s.xi_points)?)
}

/// Fourier trace of the density of states on `[0, xi_max]`.
pub fn dos_trace(params: &ModelParams, s: &SpectrumArgs) -> Result<FourierTrace, CliError> {
    let grid = xi_grid(s)?;
    Ok(match s.route {
        Route::Moments => dynamics::dos_fourier_trace(params, &grid)?,
        Route::Eigen => measures::fourier(&spectral::density_of_states(params)?, &grid),
    })
}

pub fn fit_trace(trace: &FourierTrace, s: &SpectrumArgs) -> Result<DecayFit, CliError> {
    Ok(analysis::decay_analysis(
        trace,
        s.blocks_per_decade,
        (s.fit_min, s.xi_max),
    )?)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub coupling: f64,
    pub half_width: usize,
    pub route: Route,
    pub xi_max: f64,
    pub xi_points: usize,
    pub blocks_per_decade: usize,
    pub fit: DecayFit,
}

/// Trace and fit without writing anything.
pub fn decay(a: &DecayArgs) -> Result<(FourierTrace, DecayReport), CliError> {
    let params = model_params(&a.model, DECAY_HALF_WIDTH)?;
    let trace = dos_trace(&params, &a.spectrum)?;
    let fit = fit_trace(&trace, &a.spectrum)?;
    let report = DecayReport {
        coupling: params.coupling,
        half_width: params.half_width,
        route: a.spectrum.route,
        xi_max: a.spectrum.xi_max,
        xi_points: a.spectrum.xi_points,
        blocks_per_decade: a.spectrum.blocks_per_decade,
        fit,
    };
    Ok((trace, report))
}

pub fn cmd_decay(a: &DecayArgs, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let (trace, report) = decay(a)?;
    Ok(vec![
        write_trace(out, "decay_trace", &trace, format)?,
        write_json(out, "decay_fit.json", &report)?,
    ])
}

fn write_trace(
    out: &Path,
    stem: &str,
    t: &FourierTrace,
    format: Format,
) -> Result<PathBuf, CliError> {
    match format {
        Format::Csv => write_file(out, &format!("{stem}.csv"), |w| io::write_trace_csv(w, t)),
        Format::Json => write_json(out, &format!("{stem}.json"), t),
    }
}

pub fn time_grid(t_max: f64, points: usize, kind: TimeGrid) -> Result<Grid, CliError> {
    if !t_max.is_finite() || t_max < 0.0 {
        return Err(CliError::Config(format!(
            "--t-max must be nonnegative, got {t_max}"
        )));
    }
    match kind {
        TimeGrid::Linear => Ok(Grid::linear(0.0, t_max, points)?),
        TimeGrid::Log => {
            if t_max <= 1.0 || points < 2 {
                return Err(CliError::Config(
                    "a log time grid needs --t-max > 1 and at least 2 points".into(),
                ));
            }
            let mut pts = vec![0.0];
            pts.extend(Grid::logarithmic(1.0, t_max, points - 1)?.into_inner());
            Ok(Grid::new(pts)?)
        }
    }
}

pub fn average(a: &AverageArgs) -> Result<AmplitudeSeries, CliError> {
    let params = model_params(&a.model, AVERAGE_HALF_WIDTH)?;
    let psi = crate::state::parse_state(a.psi.as_deref(), params.half_width)?;
    let phi = crate::state::parse_state(a.phi.as_deref(), params.half_width)?;
    let grid = time_grid(a.t_max, a.t_points, a.t_grid)?;
    if a.single_phase {
        single_phase_amplitude(&psi, &phi, &grid, &params)
    } else {
        Ok(dynamics::phase_averaged_amplitude(
            &psi, &phi, &grid, &params,
        )?)
    }
}

fn single_phase_amplitude(
    psi: &StateVector,
    phi: &StateVector,
    grid: &Grid,
    params: &ModelParams,
) -> Result<AmplitudeSeries, CliError> {
    let t_max = grid.first().abs().max(grid.last().abs());
    let radius = psi.support_radius().max(phi.support_radius());
    let required = dynamics::light_cone_requirement(t_max, radius);
    if params.half_width < required {
        return Err(quasispec::Error::LightCone {
            half_width: params.half_width,
            required,
        }
        .into());
    }
    let a = params.spectral_scale();
    let degree =
        dynamics::chebyshev_bessel_coefficients(a * t_max, dynamics::AMPLITUDE_TOL, t_max)?.len()
            - 1;
    let op = operator::build_hamiltonian(params);
    let moments = dynamics::chebyshev_moments(&op, a, psi, phi, degree)?;
    Ok(AmplitudeSeries {
        t: grid.clone(),
        values: dynamics::resum_moments(&moments, a, grid),
    })
}

pub fn cmd_average(a: &AverageArgs, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let series = average(a)?;
    let path = match format {
        Format::Csv => write_file(out, "amplitudes.csv", |w| {
            io::write_amplitude_csv(w, &series)
        })?,
        Format::Json => write_json(out, "amplitudes.json", &series)?,
    };
    Ok(vec![path])
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorReport {
    pub kind: FactorKind,
    pub factors: usize,
    pub factor_dim: usize,
    pub seed: u64,
    pub cap: usize,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Factor matrices and their states.
pub type TensorInstance = (Vec<DMatrix<f64>>, Vec<Vec<Complex64>>);

/// Factor matrices and states for `tensor-check`.
pub fn tensor_instance(
    kind: FactorKind,
    factors: usize,
    dim: usize,
    coupling: f64,
    seed: u64,
) -> Result<TensorInstance, CliError> {
    if factors == 0 || dim == 0 {
        return Err(CliError::Config(
            "--factors and --factor-dim must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mats = Vec::with_capacity(factors);
    let mut states = Vec::with_capacity(factors);
    for _ in 0..factors {
        match kind {
            FactorKind::Free => {
                mats.push(DMatrix::from_fn(dim, dim, |i, j| {
                    if i.abs_diff(j) == 1 {
                        1.0
                    } else {
                        0.0
                    }
                }));
                let mut e = vec![Complex64::new(0.0, 0.0); dim];
                e[0] = Complex64::new(1.0, 0.0);
                states.push(e);
            }
            FactorKind::Fibonacci => {
                if dim % 2 == 0 {
                    return Err(CliError::Config(format!(
                        "fibonacci factors need an odd dimension 2L+1, got {dim}"
                    )));
                }
                let params = ModelParams::new(coupling, dim / 2)?;
                let phase = rng.gen_range(0.0..1.0);
                mats.push(operator::build_hamiltonian_at(phase, &params).to_dense());
                states.push(random_unit(&mut rng, dim));
            }
            FactorKind::Random => {
                let mut m = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..=i {
                        let x = rng.gen_range(-1.0..1.0);
                        m[(i, j)] = x;
                        m[(j, i)] = x;
                    }
                }
                mats.push(m);
                states.push(random_unit(&mut rng, dim));
            }
        }
    }
    Ok((mats, states))
}

pub fn cmd_tensor_check(a: &TensorArgs, seed: u64, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (mats, states) = tensor_instance(a.kind, a.factors, a.factor_dim, a.coupling, seed)?;
    let d = spectral::tensor_spectral_check(&mats, &states, a.cap)?;
    let report = TensorReport {
        kind: a.kind,
        factors: a.factors,
        factor_dim: a.factor_dim,
        seed,
        cap: a.cap,
        max_discrepancy: d,
        tolerance: TENSOR_TOLERANCE,
        pass: d <= TENSOR_TOLERANCE,
    };
    Ok(vec![write_json(out, "tensor_check.json", &report)?])
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDos {
    pub mass: f64,
    pub breakpoint_count: usize,
    pub interval_count: usize,
    pub distinct_operators: usize,
    /// Only known on the eigen route.
    pub atom_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct L2Point {
    pub cutoff: f64,
    pub partial_integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct L2Section {
    pub power: u64,
    pub partial_integrals: Vec<L2Point>,
    /// Last partial integral over the one before it.
    pub final_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EscapeSection {
    pub t_max: f64,
    pub t_points: usize,
    pub block_maxima: Vec<BlockMax>,
    pub strictly_decreasing: bool,
    /// Last block maximum over the first.
    pub last_over_first: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub coupling: f64,
    pub alpha: f64,
    pub half_width: usize,
    pub route: Route,
    pub dos: ReportDos,
    pub decay: DecayFit,
    pub min_power_for_l2: Option<u64>,
    pub l2: Option<L2Section>,
    pub escape: Option<EscapeSection>,
}

/// Largest `t_max` whose light cone fits in the box, for `δ₀`.
pub fn max_admissible_time(half_width: usize) -> Option<f64> {
    let room = half_width.checked_sub(dynamics::LIGHT_CONE_MARGIN)?;
    Some((room / 2) as f64)
}

pub fn l2_section(
    trace: &FourierTrace,
    power: u64,
    cutoffs: &[f64],
) -> Result<L2Section, CliError> {
    let values = analysis::l2_growth_diagnostic(trace, power, cutoffs)?;
    let final_ratio = match values.as_slice() {
        [.., a, b] => Some(b / a),
        _ => None,
    };
    Ok(L2Section {
        power,
        partial_integrals: cutoffs
            .iter()
            .zip(values)
            .map(|(&cutoff, partial_integral)| L2Point {
                cutoff,
                partial_integral,
            })
            .collect(),
        final_ratio,
    })
}

pub fn escape_section(
    params: &ModelParams,
    t_max: f64,
    t_points: usize,
) -> Result<EscapeSection, CliError> {
    let grid = time_grid(t_max, t_points, TimeGrid::Linear)?;
    let delta = StateVector::delta(params.half_width, 0)?;
    let series = dynamics::phase_averaged_amplitude(&delta, &delta, &grid, params)?;
    let (j_lo, j_hi) = ESCAPE_BLOCKS;
    let j_hi = j_hi.min(t_max.log2().floor() as u32);
    if j_hi < j_lo {
        return Err(CliError::Config(format!(
            "--t-max {t_max} is shorter than the first escape block [{}, {})",
            1u32 << j_lo,
            2u32 << j_lo
        )));
    }
    let moduli: Vec<f64> = series.values.iter().map(|v| v.norm()).collect();
    let blocks = analysis::dyadic_block_maxima(series.t.points(), &moduli, j_lo, j_hi)?;
    let strictly_decreasing = blocks.windows(2).all(|w| w[1].value < w[0].value);
    let last_over_first = blocks[blocks.len() - 1].value / blocks[0].value;
    Ok(EscapeSection {
        t_max,
        t_points,
        block_maxima: blocks,
        strictly_decreasing,
        last_over_first,
    })
}

pub fn report(a: &ReportArgs) -> Result<Report, CliError> {
    let params = model_params(&a.model, DECAY_HALF_WIDTH)?;
    let partition = operator::phase_partition(&params);
    let distinct = spectral::group_by_pattern(&partition, &params)
        .operators
        .len();

    let grid = xi_grid(&a.spectrum)?;
    let (trace, mass, atom_count) = match a.spectrum.route {
        Route::Moments => {
            let delta = StateVector::delta(params.half_width, 0)?;
            let m0 = dynamics::averaged_chebyshev_moments(&params, &delta, &delta, 0)?[0].re;
            (dynamics::dos_fourier_trace(&params, &grid)?, m0, None)
        }
        Route::Eigen => {
            let dos = spectral::density_of_states(&params)?;
            (
                measures::fourier(&dos, &grid),
                dos.total_mass(),
                Some(dos.len()),
            )
        }
    };
    let fit = fit_trace(&trace, &a.spectrum)?;

    let n = analysis::min_power_for_l2(fit.epsilon).ok();
    let mut cutoffs: Vec<f64> = L2_CUTOFFS
        .iter()
        .copied()
        .filter(|&c| c < a.spectrum.xi_max)
        .collect();
    cutoffs.push(a.spectrum.xi_max);
    let l2 = n.map(|n| l2_section(&trace, n, &cutoffs)).transpose()?;

    let t_max = match a.t_max {
        Some(t) => Some(t),
        None => max_admissible_time(params.half_width),
    };
    let escape = match t_max {
        Some(t) if t >= (1u32 << ESCAPE_BLOCKS.0) as f64 => {
            let points = a.t_points.unwrap_or((t / ESCAPE_DT).round() as usize + 1);
            Some(escape_section(&params, t, points)?)
        }
        Some(t) if a.t_max.is_some() => {
            return Err(CliError::Config(format!(
                "--t-max {t} is too short for escape blocks"
            )))
        }
        _ => None,
    };

    Ok(Report {
        coupling: params.coupling,
        alpha: params.alpha,
        half_width: params.half_width,
        route: a.spectrum.route,
        dos: ReportDos {
            mass,
            breakpoint_count: partition.breakpoints().len(),
            interval_count: partition.len(),
            distinct_operators: distinct,
            atom_count,
        },
        decay: fit,
        min_power_for_l2: n,
        l2,
        escape,
    })
}

pub fn cmd_report(a: &ReportArgs, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let r = report(a)?;
    match format {
        Format::Json => Ok(vec![write_json(out, "report.json", &r)?]),
        Format::Csv => write_report_csv(&r, out),
    }
}

fn write_report_csv(r: &Report, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:?}"));
    let summary = [
        ("coupling", format!("{:?}", r.coupling)),
        ("alpha", format!("{:?}", r.alpha)),
        ("half_width", r.half_width.to_string()),
        ("dos_mass", format!("{:?}", r.dos.mass)),
        ("breakpoint_count", r.dos.breakpoint_count.to_string()),
        ("interval_count", r.dos.interval_count.to_string()),
        ("distinct_operators", r.dos.distinct_operators.to_string()),
        (
            "atom_count",
            r.dos.atom_count.map_or_else(String::new, |n| n.to_string()),
        ),
        ("epsilon", format!("{:?}", r.decay.epsilon)),
        ("stderr", format!("{:?}", r.decay.stderr)),
        ("intercept", format!("{:?}", r.decay.intercept)),
        ("fit_min", format!("{:?}", r.decay.fit_window.0)),
        ("fit_max", format!("{:?}", r.decay.fit_window.1)),
        (
            "min_power_for_l2",
            r.min_power_for_l2
                .map_or_else(String::new, |n| n.to_string()),
        ),
        (
            "l2_final_ratio",
            opt(r.l2.as_ref().and_then(|l| l.final_ratio)),
        ),
        (
            "escape_strictly_decreasing",
            r.escape
                .as_ref()
                .map_or_else(String::new, |e| e.strictly_decreasing.to_string()),
        ),
        (
            "escape_last_over_first",
            opt(r.escape.as_ref().map(|e| e.last_over_first)),
        ),
    ];
    let mut files = vec![write_file(out, "report_summary.csv", |w| {
        use std::io::Write;
        writeln!(w, "key,value")?;
        for (k, v) in &summary {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })?];
    let blocks = |b: &[BlockMax]| -> Vec<Vec<f64>> {
        b.iter()
            .map(|b| vec![b.center, b.left, b.right, b.value])
            .collect()
    };
    files.push(write_rows(
        out,
        "report_envelope.csv",
        "center,left,right,value",
        &blocks(&r.decay.block_maxima),
    )?);
    if let Some(l2) = &r.l2 {
        let rows: Vec<Vec<f64>> = l2
            .partial_integrals
            .iter()
            .map(|p| vec![p.cutoff, p.partial_integral])
            .collect();
        files.push(write_rows(
            out,
            "report_l2.csv",
            "cutoff,partial_integral",
            &rows,
        )?);
    }
    if let Some(e) = &r.escape {
        files.push(write_rows(
            out,
            "report_escape.csv",
            "center,left,right,value",
            &blocks(&e.block_maxima),
        )?);
    }
    Ok(files)
}
