//! Exact time arithmetic: integer microseconds and rational frame rates.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

const US_PER_S: u128 = 1_000_000;

/// A time stamp or duration in integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Micros(pub i64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub fn from_secs_f64(s: f64) -> Micros {
        Micros((s * 1e6).round() as i64)
    }

    pub fn from_millis(ms: i64) -> Micros {
        Micros(ms * 1000)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Parses a decimal number of seconds. Up to six fractional digits are
    /// exact; anything finer is rounded to the nearest microsecond.
    pub fn parse_secs(s: &str) -> Option<Micros> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let digits = |x: &str| x.bytes().all(|b| b.is_ascii_digit());
        if (int.is_empty() && frac.is_empty()) || !digits(int) || !digits(frac) {
            let v: f64 = s.parse().ok()?;
            return v.is_finite().then(|| Micros::from_secs_f64(v));
        }
        let whole: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let mut us: i64 = 0;
        for (k, b) in frac.bytes().take(6).enumerate() {
            us += i64::from(b - b'0') * 10i64.pow(5 - k as u32);
        }
        if frac.len() > 6 && frac.as_bytes()[6] >= b'5' {
            us += 1;
        }
        let total = whole.checked_mul(1_000_000)?.checked_add(us)?;
        Some(Micros(if neg { -total } else { total }))
    }
}

impl fmt::Display for Micros {
    /// Seconds with trailing zeros trimmed but at least two decimals,
    /// e.g. `0.10`, `1.25`, `0.123457`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        let mut frac = format!("{:06}", a % 1_000_000);
        while frac.len() > 2 && frac.ends_with('0') {
            frac.pop();
        }
        write!(f, "{sign}{}.{frac}", a / 1_000_000)
    }
}

/// A frame rate in Hz held as an exact reduced fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameRate {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl FrameRate {
    pub fn new(num: u64, den: u64) -> Option<FrameRate> {
        if num == 0 || den == 0 {
            return None;
        }
        let g = gcd(num, den);
        Some(FrameRate {
            num: num / g,
            den: den / g,
        })
    }

    pub fn hz(hz: u64) -> FrameRate {
        FrameRate::new(hz, 1).expect("positive frame rate")
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Onset of frame `k`, rounded to the nearest microsecond.
    pub fn frame_onset(self, k: usize) -> Micros {
        let n = k as u128 * US_PER_S * self.den as u128;
        let d = self.num as u128;
        Micros(((2 * n + d) / (2 * d)) as i64)
    }

    /// Exact comparison of the center of frame `k` against time `t`.
    pub fn center_cmp(self, k: usize, t: Micros) -> Ordering {
        if t.0 < 0 {
            return Ordering::Greater;
        }
        let lhs = (2 * k as u128 + 1) * US_PER_S * self.den as u128;
        let rhs = 2 * self.num as u128 * t.0 as u128;
        lhs.cmp(&rhs)
    }

    /// True when `frames` differs from `duration * rate` by more than one frame.
    pub fn exceeds_one_frame(self, frames: usize, duration: Micros) -> bool {
        let f = frames as i128 * US_PER_S as i128 * self.den as i128;
        let d = duration.0 as i128 * self.num as i128;
        (f - d).abs() > US_PER_S as i128 * self.den as i128
    }

    /// True when frame `k`'s center lies at or beyond `duration` plus one
    /// whole frame.
    pub fn center_beyond_tolerance(self, k: usize, duration: Micros) -> bool {
        // center(k) >= duration + 1/rate  <=>  (2k+1)*den*1e6 >= 2*num*d + 2*den*1e6
        let lhs = (2 * k as i128 + 1) * US_PER_S as i128 * self.den as i128;
        let rhs = 2 * self.num as i128 * duration.0 as i128 + 2 * self.den as i128 * US_PER_S as i128;
        lhs >= rhs
    }
}

impl FromStr for FrameRate {
    type Err = String;

    /// Accepts `50`, `12.5` or `16000/320`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid frame rate `{s}`");
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return FrameRate::new(n, d).ok_or_else(bad);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 9 {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let num: u64 = format!("{int}{frac}").parse().map_err(|_| bad())?;
        FrameRate::new(num, den).ok_or_else(bad)
    }
}

impl fmt::Display for FrameRate {
    /// Exact decimal when the fraction terminates, `num/den` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = self.den;
        while d.is_multiple_of(2) {
            d /= 2;
        }
        while d.is_multiple_of(5) {
            d /= 5;
        }
        if d != 1 {
            return write!(f, "{}/{}", self.num, self.den);
        }
        let mut places = 0u32;
        while !10u128.pow(places).is_multiple_of(self.den as u128) {
            places += 1;
        }
        let scaled = self.num as u128 * (10u128.pow(places) / self.den as u128);
        let p = 10u128.pow(places);
        if places == 0 {
            write!(f, "{}", scaled)
        } else {
            let frac = format!("{:0width$}", scaled % p, width = places as usize);
            write!(f, "{}.{}", scaled / p, frac.trim_end_matches('0'))
        }
    }
}

impl Serialize for FrameRate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FrameRate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
