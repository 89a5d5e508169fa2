//! Central finite-difference gradient checking.
//!
//! The numerical side only evaluates the forward closure; it never reads
//! gradients from the tape, so it stays independent of the backward rules
//! it verifies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub probes: Vec<Probe>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.probes.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&Probe> {
        self.probes
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps near-zero gradients from
/// dividing by rounding noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

/// Compares tape gradients of `loss_fn` with central differences at `step`.
///
/// `loss_fn` receives a fresh tape and one trainable leaf per entry of
/// `params`. When `max_probes` is smaller than the total element count,
/// elements are drawn with a seeded RNG.
pub fn check_gradients<F>(
    params: &[Tensor<f64>],
    loss_fn: F,
    step: f64,
    max_probes: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let loss = loss_fn(&mut tape, &vars)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.param(t.clone())).collect();
    let loss = loss_fn(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .map(|&v| tape.grad(v).expect("params are trainable"))
        .collect();

    let all: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(t, p)| (0..p.len()).map(move |i| (t, i)))
        .collect();
    let chosen: Vec<(usize, usize)> = if all.len() <= max_probes {
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..max_probes).map(|_| all[rng.gen_range(0..all.len())]).collect()
    };

    let mut work = params.to_vec();
    let mut report = GradCheckReport::default();
    for (t, i) in chosen {
        let orig = work[t].data()[i];
        work[t].data_mut()[i] = orig + step;
        let up = eval(&work)?;
        work[t].data_mut()[i] = orig - step;
        let down = eval(&work)?;
        work[t].data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[t].data()[i];
        report.probes.push(Probe {
            tensor: t,
            index: i,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    Ok(report)
}
