//! Gray-mapped unit-energy constellations with hard decisions.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constellation {
    Qpsk,
    Qam16,
}

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/√10

/// Gray code on one 16-QAM axis: bits (b0, b1) → level.
fn pam4(b0: u8, b1: u8) -> f64 {
    match (b0, b1) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

fn pam4_bits(v: f64) -> (u8, u8) {
    if v < -2.0 {
        (0, 0)
    } else if v < 0.0 {
        (0, 1)
    } else if v < 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// Maps `bits_per_symbol` bits (values 0/1) to a symbol.
    pub fn map(self, bits: &[u8]) -> Complex64 {
        match self {
            Constellation::Qpsk => Complex64::new(
                FRAC_1_SQRT_2 * (1.0 - 2.0 * bits[0] as f64),
                FRAC_1_SQRT_2 * (1.0 - 2.0 * bits[1] as f64),
            ),
            Constellation::Qam16 => Complex64::new(
                QAM16_SCALE * pam4(bits[0], bits[1]),
                QAM16_SCALE * pam4(bits[2], bits[3]),
            ),
        }
    }

    /// Hard decision, writing the detected bits into `out`.
    pub fn demap(self, y: Complex64, out: &mut [u8]) {
        match self {
            Constellation::Qpsk => {
                out[0] = u8::from(y.re < 0.0);
                out[1] = u8::from(y.im < 0.0);
            }
            Constellation::Qam16 => {
                let (a, b) = pam4_bits(y.re / QAM16_SCALE);
                let (c, d) = pam4_bits(y.im / QAM16_SCALE);
                out.copy_from_slice(&[a, b, c, d]);
            }
        }
    }

    pub fn points(self) -> Vec<Complex64> {
        let k = self.bits_per_symbol();
        (0..1u32 << k)
            .map(|v| {
                let bits: Vec<u8> = (0..k).map(|i| ((v >> (k - 1 - i)) & 1) as u8).collect();
                self.map(&bits)
            })
            .collect()
    }
}
