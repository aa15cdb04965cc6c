//! Spoken-PIN brute force against assistant lockout policies.
//!
//! Each attempt costs a fixed number of seconds (prompt plus spoken guess).
//! Policies either never lock, lock after `n` wrong guesses, or insert a
//! delay after every `n` wrong guesses.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Seconds per spoken unlock attempt observed against a smart lock.
pub const DEFAULT_ATTEMPT_SECONDS: f64 = 13.0;
const MAX_DIGITS: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Unlimited,
    MaxAttempts(u32),
    DelayAfter { attempts: u32, delay_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockPolicy {
    pub kind: PolicyKind,
    /// Accepted PIN lengths, inclusive.
    pub pin_lengths: (u32, u32),
}

impl LockPolicy {
    pub fn new(kind: PolicyKind, pin_lengths: (u32, u32)) -> Result<Self> {
        let policy = Self { kind, pin_lengths };
        policy.validate()?;
        Ok(policy)
    }

    /// Accepts 1 to 6 digit PINs.
    pub fn with_kind(kind: PolicyKind) -> Result<Self> {
        Self::new(kind, (1, 6))
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PolicyKind::MaxAttempts(0) | PolicyKind::DelayAfter { attempts: 0, .. } => {
                return Err(Error::range("policy attempts", "must be at least 1"))
            }
            PolicyKind::DelayAfter { delay_s, .. } if !(delay_s >= 0.0 && delay_s.is_finite()) => {
                return Err(Error::range("policy delay", format!("{delay_s} s")))
            }
            _ => {}
        }
        let (lo, hi) = self.pin_lengths;
        if !(1 <= lo && lo <= hi && hi <= MAX_DIGITS) {
            return Err(Error::range(
                "pin lengths",
                format!("({lo}, {hi}) must satisfy 1 <= min <= max <= {MAX_DIGITS}"),
            ));
        }
        Ok(())
    }

    fn check_digits(&self, digits: u32) -> Result<u64> {
        self.validate()?;
        let (lo, hi) = self.pin_lengths;
        if digits < lo || digits > hi {
            return Err(Error::range(
                "digits",
                format!("{digits} outside the policy's {lo}-{hi} digit PINs"),
            ));
        }
        Ok(10u64.pow(digits))
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Unlimited => write!(f, "unlimited"),
            PolicyKind::MaxAttempts(n) => write!(f, "max-attempts:{n}"),
            PolicyKind::DelayAfter { attempts, delay_s } => {
                write!(f, "delay-after:{attempts}:{delay_s}")
            }
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    /// `unlimited`, `max-attempts:N` or `delay-after:N:SECONDS`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |v: &str| {
            v.parse::<u32>()
                .map_err(|_| Error::Input(format!("bad attempt count {v:?} in policy {s:?}")))
        };
        match parts.as_slice() {
            ["unlimited"] => Ok(PolicyKind::Unlimited),
            ["max-attempts", n] => Ok(PolicyKind::MaxAttempts(int(n)?)),
            ["delay-after", n, d] => Ok(PolicyKind::DelayAfter {
                attempts: int(n)?,
                delay_s: d
                    .parse()
                    .map_err(|_| Error::Input(format!("bad delay {d:?} in policy {s:?}")))?,
            }),
            _ => Err(Error::Input(format!(
                "unknown policy {s:?}; use unlimited, max-attempts:N or delay-after:N:SECONDS"
            ))),
        }
    }
}

/// Candidate order for the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessOrder {
    Ascending,
    SeededShuffle(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Unlocked,
    LockedOut,
    Exhausted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Unlocked => "unlocked",
            Outcome::LockedOut => "locked_out",
            Outcome::Exhausted => "exhausted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceResult {
    pub attempts_made: u64,
    pub elapsed_s: f64,
    pub outcome: Outcome,
}

/// Every `digits`-digit PIN, as integers, in the requested order.
pub fn candidate_order(digits: u32, order: GuessOrder) -> Vec<u32> {
    let n = 10u32.pow(digits.min(MAX_DIGITS));
    let mut pins: Vec<u32> = (0..n).collect();
    if let GuessOrder::SeededShuffle(seed) = order {
        pins.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    pins
}

fn parse_secret(secret: &str, digits: u32) -> Result<u32> {
    if secret.len() != digits as usize || !secret.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Input(format!(
            "secret {secret:?} is not a {digits}-digit PIN"
        )));
    }
    secret
        .parse()
        .map_err(|_| Error::Input(format!("secret {secret:?} is not numeric")))
}

/// Speaks candidates in `order` until the lock opens, the policy locks the
/// attacker out, or the space is exhausted.
pub fn enumerate_pins(
    policy: &LockPolicy,
    digits: u32,
    per_attempt_s: f64,
    secret: &str,
    order: GuessOrder,
) -> Result<BruteForceResult> {
    policy.check_digits(digits)?;
    if !(per_attempt_s > 0.0 && per_attempt_s.is_finite()) {
        return Err(Error::range("per_attempt_s", format!("{per_attempt_s}")));
    }
    let secret = parse_secret(secret, digits)?;

    let mut attempts: u64 = 0;
    let mut wrong: u64 = 0;
    let mut delays: u64 = 0;
    let mut outcome = Outcome::Exhausted;
    for candidate in candidate_order(digits, order) {
        if let PolicyKind::DelayAfter { attempts: n, .. } = policy.kind {
            if wrong > 0 && wrong.is_multiple_of(n as u64) {
                delays += 1;
            }
        }
        attempts += 1;
        if candidate == secret {
            outcome = Outcome::Unlocked;
            break;
        }
        wrong += 1;
        if let PolicyKind::MaxAttempts(n) = policy.kind {
            if wrong >= n as u64 {
                outcome = Outcome::LockedOut;
                break;
            }
        }
    }
    let delay_s = match policy.kind {
        PolicyKind::DelayAfter { delay_s, .. } => delay_s,
        _ => 0.0,
    };
    Ok(BruteForceResult {
        attempts_made: attempts,
        elapsed_s: attempts as f64 * per_attempt_s + delays as f64 * delay_s,
        outcome,
    })
}

/// Closed-form timing for a uniformly random secret.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedTime {
    pub worst_s: f64,
    /// Mean time to unlock, conditional on the attack succeeding.
    pub mean_s: f64,
    pub success_prob: f64,
}

pub fn expected_time(policy: &LockPolicy, digits: u32, per_attempt_s: f64) -> Result<ExpectedTime> {
    let n_pins = policy.check_digits(digits)?;
    if !(per_attempt_s > 0.0 && per_attempt_s.is_finite()) {
        return Err(Error::range("per_attempt_s", format!("{per_attempt_s}")));
    }
    let t = per_attempt_s;
    Ok(match policy.kind {
        PolicyKind::Unlimited => ExpectedTime {
            worst_s: n_pins as f64 * t,
            mean_s: (n_pins + 1) as f64 * t / 2.0,
            success_prob: 1.0,
        },
        PolicyKind::MaxAttempts(n) => {
            let m = (n as u64).min(n_pins);
            ExpectedTime {
                worst_s: m as f64 * t,
                mean_s: (m + 1) as f64 * t / 2.0,
                success_prob: m as f64 / n_pins as f64,
            }
        }
        PolicyKind::DelayAfter { attempts, delay_s } => {
            let n = attempts as u64;
            // sum_{k=0}^{N-1} floor(k / n)
            let (q, r) = (n_pins / n, n_pins % n);
            let delay_sum = n * q * q.saturating_sub(1) / 2 + r * q;
            ExpectedTime {
                worst_s: n_pins as f64 * t + ((n_pins - 1) / n) as f64 * delay_s,
                mean_s: (n_pins + 1) as f64 * t / 2.0
                    + delay_s * delay_sum as f64 / n_pins as f64,
                success_prob: 1.0,
            }
        }
    })
}

/// Writes the `policy,digits,per_attempt_s,worst_s,mean_s,success_prob` table.
pub fn write_summary_csv<W: Write>(
    rows: &[(LockPolicy, u32, f64, ExpectedTime)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "policy,digits,per_attempt_s,worst_s,mean_s,success_prob")?;
    for (policy, digits, t, e) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            policy.kind, digits, t, e.worst_s, e.mean_s, e.success_prob
        )?;
    }
    Ok(())
}
