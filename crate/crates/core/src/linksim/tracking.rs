//! Pilot-aided phase tracking with linear interpolation between fields.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Role of each symbol slot in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    Guard,
    Pilot,
    Data,
}

/// Frame: `guard | P | D | P | D | … | P | guard`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    pub kinds: Vec<SlotKind>,
    pub pilot_fields: Vec<Range<usize>>,
}

impl FrameLayout {
    /// `pilot_period` data symbols separate consecutive fields of
    /// `pilot_len` pilots; `pilot_len = 0` gives an all-data frame.
    pub fn new(n_data: usize, pilot_len: usize, pilot_period: usize, guard: usize) -> Result<Self> {
        if pilot_len > 0 && pilot_len >= pilot_period {
            return invalid(format!("pilot_len ({pilot_len}) must be below pilot_period ({pilot_period})"));
        }
        let mut kinds = vec![SlotKind::Guard; guard];
        let mut pilot_fields = Vec::new();
        let mut push_field = |kinds: &mut Vec<SlotKind>| {
            let start = kinds.len();
            kinds.extend(std::iter::repeat_n(SlotKind::Pilot, pilot_len));
            pilot_fields.push(start..kinds.len());
        };
        if pilot_len == 0 {
            kinds.extend(std::iter::repeat_n(SlotKind::Data, n_data));
        } else {
            push_field(&mut kinds);
            let mut left = n_data;
            while left > 0 {
                let d = left.min(pilot_period);
                kinds.extend(std::iter::repeat_n(SlotKind::Data, d));
                left -= d;
                push_field(&mut kinds);
            }
        }
        kinds.extend(std::iter::repeat_n(SlotKind::Guard, guard));
        Ok(Self { kinds, pilot_fields })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn data_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds.iter().enumerate().filter(|(_, k)| **k == SlotKind::Data).map(|(i, _)| i)
    }
}

/// Output of [`pilot_phase_track`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    pub corrected: Vec<Complex64>,
    /// Interpolated phase estimate per slot, rad.
    pub phase: Vec<f64>,
    /// Unwrapped per-field estimates, rad.
    pub field_phases: Vec<f64>,
    /// Field-to-field jumps larger than π/2 after unwrapping.
    pub ambiguous_jumps: usize,
}

/// Estimates `arg Σ y·x*` on each pilot field, unwraps the sequence to the
/// nearest multiple of 2π, interpolates linearly between field centres (held
/// constant outside the first and last centre) and derotates every slot.
pub fn pilot_phase_track(rx: &[Complex64], reference: &[Complex64], layout: &FrameLayout) -> Result<Tracking> {
    if rx.len() != layout.len() || reference.len() != layout.len() {
        return invalid("rx, reference and layout lengths differ");
    }
    if layout.pilot_fields.is_empty() {
        return invalid("frame has no pilot fields");
    }
    let mut centres = Vec::with_capacity(layout.pilot_fields.len());
    let mut field_phases: Vec<f64> = Vec::with_capacity(layout.pilot_fields.len());
    let mut ambiguous_jumps = 0;
    for f in &layout.pilot_fields {
        let acc: Complex64 = f.clone().map(|i| rx[i] * reference[i].conj()).sum();
        let mut phi = acc.arg();
        if let Some(&prev) = field_phases.last() {
            phi += TAU * ((prev - phi) / TAU).round();
            if (phi - prev).abs() > FRAC_PI_2 {
                ambiguous_jumps += 1;
            }
        }
        field_phases.push(phi);
        centres.push(0.5 * (f.start + f.end - 1) as f64);
    }
    if ambiguous_jumps > 0 {
        log::warn!("{ambiguous_jumps} pilot-to-pilot phase jumps exceed π/2; unwrapping may have slipped");
    }

    let mut phase = vec![0.0; rx.len()];
    let mut seg = 0;
    for (k, p) in phase.iter_mut().enumerate() {
        let t = k as f64;
        while seg + 1 < centres.len() && t > centres[seg + 1] {
            seg += 1;
        }
        *p = if t <= centres[0] {
            field_phases[0]
        } else if seg + 1 >= centres.len() {
            *field_phases.last().unwrap()
        } else {
            let (c0, c1) = (centres[seg], centres[seg + 1]);
            let w = (t - c0) / (c1 - c0);
            field_phases[seg] + w * (field_phases[seg + 1] - field_phases[seg])
        };
    }
    let corrected = rx
        .iter()
        .zip(&phase)
        .map(|(y, p)| y * Complex64::from_polar(1.0, -p))
        .collect();
    Ok(Tracking {
        corrected,
        phase,
        field_phases,
        ambiguous_jumps,
    })
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap(phi: f64) -> f64 {
    let w = phi - TAU * (phi / TAU).round();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}
