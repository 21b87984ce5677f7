use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ParameterPoint;
use crate::linalg::C64;

/// Ratio `d_k / d_ref` of an extra (real) parameter to a reference value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRatio {
    /// Zero-based index into [`ParameterPoint::extra`]; written `d1` for index 0.
    pub param: usize,
    pub reference: f64,
}

/// Coefficient function of an affine term: `c · s^k · (d_i / d_ref)`.
///
/// The closed form covers constants, `s`, `s²`, and dielectric-style ratios
/// together with their products. Textual form, e.g. `s^2*d1/2.5`, is what
/// system manifests store.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub constant: f64,
    pub s_power: u8,
    pub ratio: Option<ParamRatio>,
}

impl Coefficient {
    pub const ONE: Coefficient = Coefficient {
        constant: 1.0,
        s_power: 0,
        ratio: None,
    };

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::ONE
        }
    }

    pub fn s_power(k: u8) -> Self {
        assert!(k <= 2, "only s, s^2 are supported");
        Self {
            s_power: k,
            ..Self::ONE
        }
    }

    pub fn with_ratio(mut self, param: usize, reference: f64) -> Self {
        self.ratio = Some(ParamRatio { param, reference });
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.constant *= factor;
        self
    }

    pub fn eval(&self, mu: &ParameterPoint) -> C64 {
        let s = mu.s();
        let mut v = C64::new(self.constant, 0.0);
        for _ in 0..self.s_power {
            v *= s;
        }
        if let Some(r) = self.ratio {
            v *= mu.extra[r.param] / r.reference;
        }
        v
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.constant != 1.0 {
            parts.push(format!("{}", self.constant));
        }
        match self.s_power {
            0 => {}
            1 => parts.push("s".into()),
            k => parts.push(format!("s^{k}")),
        }
        if let Some(r) = self.ratio {
            parts.push(format!("d{}/{}", r.param + 1, r.reference));
        }
        if parts.is_empty() {
            parts.push("1".into());
        }
        f.write_str(&parts.join("*"))
    }
}

impl FromStr for Coefficient {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut out = Coefficient::ONE;
        for raw in text.split('*') {
            let factor = raw.trim();
            if factor == "s" {
                out.s_power += 1;
            } else if let Some(pow) = factor.strip_prefix("s^") {
                let k: u8 = pow.trim().parse().map_err(|_| format!("bad power in {factor:?}"))?;
                out.s_power += k;
            } else if let Some(rest) = factor.strip_prefix('d') {
                if out.ratio.is_some() {
                    return Err(format!("more than one parameter ratio in {text:?}"));
                }
                let (idx, reference) = rest
                    .split_once('/')
                    .ok_or_else(|| format!("ratio {factor:?} must read d<k>/<reference>"))?;
                let idx: usize = idx.trim().parse().map_err(|_| format!("bad parameter index in {factor:?}"))?;
                let reference: f64 = reference.trim().parse().map_err(|_| format!("bad reference in {factor:?}"))?;
                if idx == 0 || reference == 0.0 || !reference.is_finite() {
                    return Err(format!("ratio {factor:?} needs k >= 1 and a nonzero reference"));
                }
                out.ratio = Some(ParamRatio {
                    param: idx - 1,
                    reference,
                });
            } else {
                let c: f64 = factor.parse().map_err(|_| format!("unknown factor {factor:?} in {text:?}"))?;
                out.constant *= c;
            }
        }
        if out.s_power > 2 {
            return Err(format!("power of s above 2 in {text:?}"));
        }
        Ok(out)
    }
}

impl Serialize for Coefficient {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Coefficient {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn parses_the_supported_forms() {
        assert_eq!("1".parse::<Coefficient>().unwrap(), Coefficient::ONE);
        assert_eq!("s".parse::<Coefficient>().unwrap(), Coefficient::s_power(1));
        assert_eq!("s^2".parse::<Coefficient>().unwrap(), Coefficient::s_power(2));
        let c: Coefficient = "s^2*d2/4.5".parse().unwrap();
        assert_eq!(c, Coefficient::s_power(2).with_ratio(1, 4.5));
        assert!("s^3".parse::<Coefficient>().is_err());
        assert!("s*s*s".parse::<Coefficient>().is_err());
        assert!("d0/1".parse::<Coefficient>().is_err());
        assert!("x".parse::<Coefficient>().is_err());
    }

    #[test]
    fn evaluates_against_frequency() {
        let mu = ParameterPoint::with_extra(3.0, vec![2.0]);
        let w = 2.0 * PI * 3.0;
        let v = Coefficient::s_power(2).eval(&mu);
        assert!((v - C64::new(-w * w, 0.0)).norm() < 1e-12);
        let v = Coefficient::s_power(1).with_ratio(0, 4.0).scaled(3.0).eval(&mu);
        assert!((v - C64::new(0.0, 3.0 * w * 0.5)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn text_round_trip(c in -1e6..1e6f64, k in 0u8..=2, ratio in proptest::option::of((0usize..4, 0.1..100.0f64))) {
            let mut coef = Coefficient::constant(c);
            coef.s_power = k;
            if let Some((p, r)) = ratio {
                coef = coef.with_ratio(p, r);
            }
            let back: Coefficient = coef.to_string().parse().unwrap();
            prop_assert_eq!(back, coef);
        }
    }
}
