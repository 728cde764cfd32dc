use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, try_map_indexed, Execution};
use crate::oscillator::{
    band_edges, classify_response, closed_form_period, simulate, suggested_run, DriveWaveform,
    NeuronCircuit, Response, DEFAULT_R_SAMPLE,
};

pub const DEFAULT_R_RANGE: (f64, f64) = (100.0, 50_000.0);
pub const DEFAULT_V_RANGE: (f64, f64) = (1.0, 15.0);
const MIN_GRID: usize = 8;

/// Response labels over a log-spaced series-resistance axis and a linear
/// drive axis. `labels[ir * v_axis.len() + iv]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub device: DeviceParams,
    pub c_par: f64,
    pub r_axis: Vec<f64>,
    pub v_axis: Vec<f64>,
    pub labels: Vec<Response>,
    /// `(r, v)` where the three regions meet; `None` if the grid holds fewer
    /// than three labels or the boundaries do not cross inside it
    pub triple_point: Option<(f64, f64)>,
}

impl PhaseDiagram {
    pub fn label(&self, ir: usize, iv: usize) -> Response {
        self.labels[ir * self.v_axis.len() + iv]
    }

    pub fn circuit(&self, r_series: f64) -> NeuronCircuit {
        circuit(&self.device, r_series, self.c_par)
    }

    pub fn triple(&self) -> Result<(f64, f64)> {
        self.triple_point.ok_or(Error::NoTriplePoint)
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Number of 4-connected same-label regions.
    pub fn region_count(&self) -> usize {
        let (nr, nv) = (self.r_axis.len(), self.v_axis.len());
        let mut seen = vec![false; nr * nv];
        let mut regions = 0;
        let mut stack = Vec::new();
        for start in 0..nr * nv {
            if seen[start] {
                continue;
            }
            regions += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(k) = stack.pop() {
                let (ir, iv) = (k / nv, k % nv);
                let mut visit = |j: usize| {
                    if !seen[j] && self.labels[j] == self.labels[k] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if ir > 0 {
                    visit(k - nv);
                }
                if ir + 1 < nr {
                    visit(k + nv);
                }
                if iv > 0 {
                    visit(k - 1);
                }
                if iv + 1 < nv {
                    visit(k + 1);
                }
            }
        }
        regions
    }

    /// Lower-left corners of grid cells whose four vertices carry all three
    /// labels.
    pub fn triple_cells(&self) -> Vec<(usize, usize)> {
        let (nr, nv) = (self.r_axis.len(), self.v_axis.len());
        let mut cells = Vec::new();
        for ir in 0..nr - 1 {
            for iv in 0..nv - 1 {
                let mut mask = 0u8;
                for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    mask |= 1 << self.label(ir + a, iv + b) as u8;
                }
                if mask == 0b111 {
                    cells.push((ir, iv));
                }
            }
        }
        cells
    }
}

fn circuit(device: &DeviceParams, r_series: f64, c_par: f64) -> NeuronCircuit {
    NeuronCircuit {
        device: *device,
        r_series,
        c_par,
        r_sample: DEFAULT_R_SAMPLE,
    }
}

fn log_axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn lin_axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Classify every `(r_series, v_in)` grid vertex with the closed form, then
/// locate the triple point.
pub fn phase_diagram(
    device: &DeviceParams,
    r_range: (f64, f64),
    v_range: (f64, f64),
    (nr, nv): (usize, usize),
    c_par: f64,
    exec: Execution,
) -> Result<PhaseDiagram> {
    if nr < MIN_GRID || nv < MIN_GRID {
        return Err(Error::InvalidParameter(format!(
            "grid must be at least {MIN_GRID}x{MIN_GRID}"
        )));
    }
    if !(r_range.0 > 0.0 && r_range.1 > r_range.0 && v_range.0 > 0.0 && v_range.1 > v_range.0) {
        return Err(Error::InvalidParameter(
            "ranges must be positive and increasing".into(),
        ));
    }
    circuit(device, r_range.0, c_par).validate()?;
    let r_axis = log_axis(r_range, nr);
    let v_axis = lin_axis(v_range, nv);
    let labels = map_indexed(nr * nv, exec, |k| {
        let c = circuit(device, r_axis[k / nv], c_par);
        closed_form_period(&c, v_axis[k % nv]).response()
    });
    let mut diagram = PhaseDiagram {
        device: *device,
        c_par,
        r_axis,
        v_axis,
        labels,
        triple_point: None,
    };
    diagram.triple_point = refine_triple_point(&diagram);
    Ok(diagram)
}

/// The oscillating region opens where the band edges `v_on(r)` and
/// `v_latch(r)` cross. Both are exact boundary lines, so bisect on `r` for
/// the sign change of `v_latch - v_on`, starting from a grid cell that holds
/// all three labels.
fn refine_triple_point(d: &PhaseDiagram) -> Option<(f64, f64)> {
    let &(ir, _) = d.triple_cells().first()?;
    let gap = |r: f64| {
        let (on, latch) = band_edges(&d.circuit(r));
        latch - on
    };
    let nr = d.r_axis.len();
    let (mut lo, mut hi) = (
        d.r_axis[ir.saturating_sub(1)],
        d.r_axis[(ir + 2).min(nr - 1)],
    );
    if !(gap(lo) <= 0.0 && gap(hi) > 0.0) {
        (lo, hi) = (d.r_axis[0], d.r_axis[nr - 1]);
        if !(gap(lo) <= 0.0 && gap(hi) > 0.0) {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if gap(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let r = hi;
    let v = band_edges(&d.circuit(r)).0;
    let (v0, v1) = (d.v_axis[0], d.v_axis[d.v_axis.len() - 1]);
    (v0..=v1).contains(&v).then_some((r, v))
}

/// Simulated check of one diagram cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub r_series: f64,
    pub v_in: f64,
    pub analytic: Response,
    pub simulated: Response,
}

impl CellCheck {
    pub fn agrees(&self) -> bool {
        self.analytic == self.simulated
    }
}

/// Re-classify `n` seeded random cells from full time-domain runs.
pub fn cross_validate(
    d: &PhaseDiagram,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<CellCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<(usize, usize)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0..d.r_axis.len()),
                rng.random_range(0..d.v_axis.len()),
            )
        })
        .collect();
    try_map_indexed(n, exec, |k| {
        let (ir, iv) = cells[k];
        let (r, v) = (d.r_axis[ir], d.v_axis[iv]);
        let c = d.circuit(r);
        let (duration, dt) = suggested_run(&c, v, 10.0);
        let trace = simulate(&c, &DriveWaveform::constant(v, duration), dt, None)?;
        Ok(CellCheck {
            r_series: r,
            v_in: v,
            analytic: d.label(ir, iv),
            simulated: classify_response(&trace)?,
        })
    })
}
