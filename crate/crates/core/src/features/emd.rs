//! Empirical mode decomposition by classic sifting, and the ensemble
//! (noise-assisted) variant used for the EEMD feature block.
//!
//! Envelopes are natural cubic splines through the interior extrema with
//! the first and last extremum mirrored across the signal ends. A sift
//! stops when SD = sum((h_prev - h_new)^2) / sum(h_prev^2) drops below the
//! threshold or the iteration cap is reached; cap events are recorded per
//! IMF. Extraction stops when the residue has fewer than three interior
//! extrema or `max_imfs` is reached.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{dist_sq, norm_sq, real, real_of, Real};
use crate::seed;

/// Ensemble-EMD parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EemdParams {
    /// Number of noise-perturbed trials averaged together.
    pub ensemble_size: usize,
    /// Noise standard deviation as a fraction of the signal's standard
    /// deviation (n-1 divisor).
    pub noise_ratio: f64,
    pub max_sift_iters: usize,
    pub sift_sd_threshold: f64,
    pub max_imfs: usize,
}

impl Default for EemdParams {
    fn default() -> Self {
        Self {
            ensemble_size: 50,
            noise_ratio: 0.2,
            max_sift_iters: 10,
            sift_sd_threshold: 0.3,
            max_imfs: 6,
        }
    }
}

impl EemdParams {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 1 {
            return Err(Error::InvalidParam {
                name: "ensemble_size",
                message: "must be >= 1".into(),
            });
        }
        if self.noise_ratio < 0.0 {
            return Err(Error::InvalidParam {
                name: "noise_ratio",
                message: "must be >= 0".into(),
            });
        }
        if self.max_imfs < 1 {
            return Err(Error::InvalidParam {
                name: "max_imfs",
                message: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Decomposition output. `sift_capped[j]` records that IMF `j` stopped on
/// the iteration cap rather than the SD criterion.
#[derive(Debug, Clone)]
pub struct EmdResult<T: Real> {
    pub imfs: Vec<Vec<T>>,
    pub residue: Vec<T>,
    pub sift_capped: Vec<bool>,
}

/// Number of EEMD mode-energy features.
pub const EEMD_FEATURES: usize = 6;

/// Minimum signal length accepted by the sifting machinery.
pub const MIN_EMD_LEN: usize = 8;

/// Interior extrema under strict neighbor comparison.
pub fn find_extrema<T: Real>(signal: &[T]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for i in 1..signal.len().saturating_sub(1) {
        if signal[i] > signal[i - 1] && signal[i] > signal[i + 1] {
            maxima.push(i);
        } else if signal[i] < signal[i - 1] && signal[i] < signal[i + 1] {
            minima.push(i);
        }
    }
    (maxima, minima)
}

/// Natural cubic spline through `(x, y)` knots (x strictly increasing),
/// evaluated at integer positions `0..n`.
fn natural_spline_eval<T: Real>(xs: &[T], ys: &[T], n: usize) -> Vec<T> {
    let m = xs.len();
    debug_assert_eq!(m, ys.len());
    debug_assert!(m >= 2);
    if m == 2 {
        // degenerate: straight line
        let slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return (0..n)
            .map(|t| ys[0] + slope * (real_of::<T>(t) - xs[0]))
            .collect();
    }

    // Second derivatives from the tridiagonal natural-spline system.
    let mut h = vec![T::zero(); m - 1];
    for i in 0..m - 1 {
        h[i] = xs[i + 1] - xs[i];
    }
    let mut diag = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); m];
    let mut upper = vec![T::zero(); m];
    diag[0] = T::one();
    for i in 1..m - 1 {
        diag[i] = (h[i - 1] + h[i]) * real(2.0);
        rhs[i] = ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]) * real(6.0);
    }
    diag[m - 1] = T::one();
    // Thomas forward sweep (natural BCs pin the first and last rows).
    for i in 1..m - 1 {
        upper[i] = h[i] / diag[i];
        let lower = h[i - 1];
        let w = lower / diag[i - 1];
        diag[i] = diag[i] - w * upper[i - 1] * diag[i - 1];
        rhs[i] = rhs[i] - w * rhs[i - 1];
    }
    let mut m2 = vec![T::zero(); m];
    for i in (1..m - 1).rev() {
        m2[i] = (rhs[i] - upper[i] * diag[i + 1] * m2[i + 1]) / diag[i];
    }

    let six = real::<T>(6.0);
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for t in 0..n {
        let tv = real_of::<T>(t);
        while seg + 2 < m && tv > xs[seg + 1] {
            seg += 1;
        }
        let hs = h[seg];
        let a = xs[seg + 1] - tv;
        let b = tv - xs[seg];
        let v = m2[seg] * a * a * a / (six * hs)
            + m2[seg + 1] * b * b * b / (six * hs)
            + (ys[seg] / hs - m2[seg] * hs / six) * a
            + (ys[seg + 1] / hs - m2[seg + 1] * hs / six) * b;
        out.push(v);
    }
    out
}

/// Envelope through the given extrema with mirrored boundary knots.
fn envelope<T: Real>(signal: &[T], extrema: &[usize]) -> Vec<T> {
    let n = signal.len();
    let first = extrema[0];
    let last = *extrema.last().unwrap();
    let mut xs: Vec<T> = Vec::with_capacity(extrema.len() + 2);
    let mut ys: Vec<T> = Vec::with_capacity(extrema.len() + 2);
    // mirror the first extremum across t = 0
    xs.push(-real_of::<T>(first));
    ys.push(signal[first]);
    for &p in extrema {
        xs.push(real_of(p));
        ys.push(signal[p]);
    }
    // mirror the last extremum across t = n - 1
    xs.push(real_of::<T>(2 * (n - 1) - last));
    ys.push(signal[last]);
    natural_spline_eval(&xs, &ys, n)
}

/// Zero crossings under strict sign change.
fn zero_crossings<T: Real>(h: &[T]) -> usize {
    h.windows(2)
        .filter(|w| {
            (w[0] > T::zero() && w[1] < T::zero()) || (w[0] < T::zero() && w[1] > T::zero())
        })
        .count()
}

/// IMF admission: zero-crossing and extrema counts differ by at most one.
fn imf_counts_ok<T: Real>(h: &[T]) -> bool {
    let (maxima, minima) = find_extrema(h);
    let extrema = maxima.len() + minima.len();
    (zero_crossings(h) as i64 - extrema as i64).abs() <= 1
}

/// Sift one IMF out of `h0`. Returns the IMF and whether the iteration cap
/// stopped it. The SD criterion alone does not guarantee the IMF
/// zero-crossing/extrema property, so a sift only stops early once both
/// hold; otherwise it runs to the cap and the cap event is recorded.
fn sift<T: Real>(h0: &[T], params: &EemdParams) -> (Vec<T>, bool) {
    let mut h = h0.to_vec();
    let mut capped = true;
    for _ in 0..params.max_sift_iters {
        let (maxima, minima) = find_extrema(&h);
        if maxima.is_empty() || minima.is_empty() {
            capped = false;
            break;
        }
        let upper = envelope(&h, &maxima);
        let lower = envelope(&h, &minima);
        let prev_energy = norm_sq(&h);
        let half = real::<T>(0.5);
        let h_new: Vec<T> = h
            .iter()
            .zip(upper.iter().zip(&lower))
            .map(|(&v, (&u, &l))| v - (u + l) * half)
            .collect();
        if prev_energy < real(1e-24) {
            h = h_new;
            capped = false;
            break;
        }
        let sd = dist_sq(&h, &h_new) / prev_energy;
        h = h_new;
        if sd < real(params.sift_sd_threshold) && imf_counts_ok(&h) {
            capped = false;
            break;
        }
    }
    (h, capped)
}

/// Decompose `signal` (optionally perturbed by `noise`) into IMFs plus a
/// residue. `sum(imfs) + residue` reproduces the input by construction.
pub fn emd<T: Real>(
    signal: &[T],
    params: &EemdParams,
    noise: Option<&[T]>,
) -> Result<EmdResult<T>> {
    if signal.len() < MIN_EMD_LEN {
        return Err(Error::Insufficient {
            what: "samples for EMD",
            needed: MIN_EMD_LEN,
            got: signal.len(),
        });
    }
    params.validate()?;
    let mut residue: Vec<T> = match noise {
        Some(eps) => {
            if eps.len() != signal.len() {
                return Err(Error::DimMismatch {
                    context: "emd noise",
                    expected: signal.len(),
                    got: eps.len(),
                });
            }
            signal.iter().zip(eps).map(|(&s, &e)| s + e).collect()
        }
        None => signal.to_vec(),
    };

    let mut imfs = Vec::new();
    let mut sift_capped = Vec::new();
    while imfs.len() < params.max_imfs {
        let (maxima, minima) = find_extrema(&residue);
        if maxima.len() + minima.len() < 3 {
            break;
        }
        let (imf, capped) = sift(&residue, params);
        for (r, v) in residue.iter_mut().zip(&imf) {
            *r = *r - *v;
        }
        imfs.push(imf);
        sift_capped.push(capped);
    }
    Ok(EmdResult {
        imfs,
        residue,
        sift_capped,
    })
}

/// Ensemble-averaged relative IMF energies EEMD1..EEMD6.
///
/// Runs `ensemble_size` EMD trials on `window + noise_i`, with trial `i`
/// seeded from `(seed, i)`; IMFs are averaged across trials in trial order
/// (missing modes contribute zeros) and each averaged mode's energy is
/// normalized by the window energy.
pub fn eemd_features<T: Real>(
    window: &[T],
    params: &EemdParams,
    seed: u64,
) -> Result<[T; EEMD_FEATURES]> {
    params.validate()?;
    let n = window.len();
    let mut out = [T::zero(); EEMD_FEATURES];
    let total = norm_sq(window);
    if total < real(1e-24) {
        return Ok(out);
    }

    // sample std (n-1 divisor), same convention as the time features
    let mu = crate::num::mean(window);
    let var = window
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - mu) * (v - mu))
        / real_of::<T>(n.max(2) - 1);
    let scale = real::<T>(params.noise_ratio) * var.sqrt();

    let mut sums: Vec<Vec<T>> = vec![vec![T::zero(); n]; EEMD_FEATURES];
    let mut noisy = vec![T::zero(); n];
    for trial in 0..params.ensemble_size {
        let mut rng = seed::rng2(seed, seed::tag::EEMD, trial as u64);
        for (slot, &v) in noisy.iter_mut().zip(window) {
            let g: f64 = StandardNormal.sample(&mut rng);
            *slot = v + scale * real(g);
        }
        let result = emd(&noisy, params, None)?;
        for (j, imf) in result.imfs.iter().take(EEMD_FEATURES).enumerate() {
            for (acc, &v) in sums[j].iter_mut().zip(imf) {
                *acc = *acc + v;
            }
        }
    }

    let count = real_of::<T>(params.ensemble_size);
    for (slot, sum) in out.iter_mut().zip(&sums) {
        let avg_energy = sum
            .iter()
            .fold(T::zero(), |acc, &v| acc + (v / count) * (v / count));
        *slot = avg_energy / total;
    }
    Ok(out)
}
