//! The activation-function catalog available to evolved networks.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// One of the eight activation functions networks may use.
///
/// The numeric definitions mirror the reference neuroevolution
/// implementation these defaults were taken from: sigmoid, tanh and
/// softplus pre-scale and clamp their argument so outputs stay finite and
/// saturate smoothly, and `log` floors its argument to stay total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    Relu,
    Log,
    Clamped,
    Hat,
    Identity,
    Softplus,
}

impl ActivationKind {
    /// All eight activations, in canonical order.
    pub const ALL: [ActivationKind; 8] = [
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Relu,
        ActivationKind::Log,
        ActivationKind::Clamped,
        ActivationKind::Hat,
        ActivationKind::Identity,
        ActivationKind::Softplus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Relu => "relu",
            ActivationKind::Log => "log",
            ActivationKind::Clamped => "clamped",
            ActivationKind::Hat => "hat",
            ActivationKind::Identity => "identity",
            ActivationKind::Softplus => "softplus",
        }
    }

    /// Apply the activation to a finite input. Output is finite for every
    /// finite `x`.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => {
                let z = (5.0 * x).clamp(-60.0, 60.0);
                1.0 / (1.0 + (-z).exp())
            }
            ActivationKind::Tanh => (2.5 * x).clamp(-60.0, 60.0).tanh(),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Log => x.max(1e-7).ln(),
            ActivationKind::Clamped => x.clamp(-1.0, 1.0),
            ActivationKind::Hat => (1.0 - x.abs()).max(0.0),
            ActivationKind::Identity => x,
            ActivationKind::Softplus => {
                let z = (5.0 * x).clamp(-60.0, 60.0);
                0.2 * z.exp().ln_1p()
            }
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownActivation(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_values() {
        assert_eq!(ActivationKind::Sigmoid.apply(0.0), 0.5);
        assert_eq!(ActivationKind::Identity.apply(-3.0), -3.0);
        assert_eq!(ActivationKind::Hat.apply(0.0), 1.0);
        assert_eq!(ActivationKind::Hat.apply(2.0), 0.0);
        assert_eq!(ActivationKind::Clamped.apply(7.3), 1.0);
        assert_eq!(ActivationKind::Relu.apply(-1.0), 0.0);
    }

    #[test]
    fn log_is_total() {
        assert!(ActivationKind::Log.apply(-5.0).is_finite());
        assert_eq!(ActivationKind::Log.apply(0.0), 1e-7f64.ln());
        assert_eq!(ActivationKind::Log.apply(1.0), 0.0);
    }

    #[test]
    fn outputs_finite_and_bounded() {
        let xs: Vec<f64> = (-2000..=2000).map(|i| i as f64 * 0.5).collect();
        for &x in &xs {
            for kind in ActivationKind::ALL {
                let y = kind.apply(x);
                assert!(y.is_finite(), "{kind}({x}) not finite");
            }
            // Mathematically open intervals; the saturated tails round to
            // the endpoints at f64 precision.
            let s = ActivationKind::Sigmoid.apply(x);
            assert!((0.0..=1.0).contains(&s) && s != 0.0);
            let t = ActivationKind::Tanh.apply(x);
            assert!((-1.0..=1.0).contains(&t));
            let c = ActivationKind::Clamped.apply(x);
            assert!((-1.0..=1.0).contains(&c));
            let h = ActivationKind::Hat.apply(x);
            assert!((0.0..=1.0).contains(&h));
            assert!(ActivationKind::Relu.apply(x) >= 0.0);
            assert!(ActivationKind::Softplus.apply(x) >= 0.0);
        }
    }

    #[test]
    fn monotone_kinds_are_non_decreasing() {
        let monotone = [
            ActivationKind::Sigmoid,
            ActivationKind::Tanh,
            ActivationKind::Relu,
            ActivationKind::Softplus,
            ActivationKind::Identity,
        ];
        let xs: Vec<f64> = (-400..400).map(|i| i as f64 * 0.25).collect();
        for kind in monotone {
            for w in xs.windows(2) {
                assert!(
                    kind.apply(w[0]) <= kind.apply(w[1]),
                    "{kind} decreased between {} and {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn name_round_trip_and_unknown() {
        for kind in ActivationKind::ALL {
            assert_eq!(kind.name().parse::<ActivationKind>().unwrap(), kind);
        }
        assert!("gauss".parse::<ActivationKind>().is_err());
        assert!("Sigmoid".parse::<ActivationKind>().is_err());
    }
}
