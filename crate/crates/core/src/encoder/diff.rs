//! Central finite differences on unit-spaced samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the central difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stencil {
    Three,
    Five,
    Seven,
}

impl Stencil {
    pub fn points(self) -> usize {
        match self {
            Stencil::Three => 3,
            Stencil::Five => 5,
            Stencil::Seven => 7,
        }
    }

    fn half_width(self) -> usize {
        self.points() / 2
    }
}

impl TryFrom<u8> for Stencil {
    type Error = String;

    fn try_from(points: u8) -> std::result::Result<Self, String> {
        match points {
            3 => Ok(Stencil::Three),
            5 => Ok(Stencil::Five),
            7 => Ok(Stencil::Seven),
            other => Err(format!("stencil_points must be 3, 5 or 7, got {other}")),
        }
    }
}

impl From<Stencil> for u8 {
    fn from(s: Stencil) -> u8 {
        s.points() as u8
    }
}

/// First derivative of `values`, same length as the input.
///
/// Points where the requested stencil fits use it. Closer to the edges the
/// widest central stencil that fits is used, and the two end points fall back
/// to the second-order one-sided formula.
pub fn central_difference(values: &[f64], stencil: Stencil) -> Result<Vec<f64>> {
    let n = values.len();
    if n < stencil.points() {
        return Err(Error::TooShort {
            len: n,
            needed: stencil.points(),
        });
    }
    let f = values;
    let out = (0..n)
        .map(|t| match stencil.half_width().min(t).min(n - 1 - t) {
            0 if t == 0 => (-3.0 * f[0] + 4.0 * f[1] - f[2]) / 2.0,
            0 => (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / 2.0,
            1 => (f[t + 1] - f[t - 1]) / 2.0,
            2 => (-f[t + 2] + 8.0 * f[t + 1] - 8.0 * f[t - 1] + f[t - 2]) / 12.0,
            _ => {
                (f[t + 3] - 9.0 * f[t + 2] + 45.0 * f[t + 1] - 45.0 * f[t - 1] + 9.0 * f[t - 2]
                    - f[t - 3])
                    / 60.0
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_on_square() {
        let d = central_difference(&[0.0, 1.0, 4.0, 9.0], Stencil::Three).unwrap();
        assert_eq!(&d[1..3], &[2.0, 4.0]);
        // one-sided ends are exact on quadratics too
        assert_eq!(d[0], 0.0);
        assert_eq!(d[3], 6.0);
    }

    #[test]
    fn five_point_on_square() {
        let d = central_difference(&[0.0, 1.0, 4.0, 9.0, 16.0], Stencil::Five).unwrap();
        assert_eq!(d[2], 4.0);
    }

    #[test]
    fn constant_has_zero_derivative() {
        for s in [Stencil::Three, Stencil::Five, Stencil::Seven] {
            let d = central_difference(&[3.5; 12], s).unwrap();
            assert!(d.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(matches!(
            central_difference(&[1.0; 6], Stencil::Seven),
            Err(Error::TooShort { len: 6, needed: 7 })
        ));
    }

    #[test]
    fn stencil_from_json_integer() {
        let s: Stencil = serde_json::from_str("5").unwrap();
        assert_eq!(s, Stencil::Five);
        assert!(serde_json::from_str::<Stencil>("4").is_err());
        assert_eq!(serde_json::to_string(&Stencil::Seven).unwrap(), "7");
    }
}
