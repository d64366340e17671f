//! Small numeric helpers: extended-real serialization and deterministic
//! random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A random stream derived from a 64-bit seed and a subtask index.
///
/// ChaCha is counter based, so distinct `stream` values give independent
/// sequences from the same seed; concurrent subtasks stay reproducible
/// regardless of scheduling.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Compare two extended reals with `a ≤ b·(1 + rel) + abs`, treating
/// `∞ ≤ ∞` as true.
pub fn le_tol(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    if b == f64::INFINITY {
        return true;
    }
    if a == f64::INFINITY {
        return false;
    }
    a <= b + rel * b.abs() + abs
}

/// Serde adapter writing non-finite values as the strings `"inf"`,
/// `"-inf"` and `"nan"`, and accepting them back.
pub mod ext_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_str("nan")
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct ExtVisitor;

    impl Visitor<'_> for ExtVisitor {
        type Value = f64;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::custom(format!("unrecognized number string {v:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtVisitor)
    }

    /// The same encoding for optional values.
    pub mod option {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrap(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(Wrap).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Holder {
        #[serde(with = "ext_f64")]
        v: f64,
    }

    #[test]
    fn infinity_round_trips_as_string() {
        let s = serde_json::to_string(&Holder { v: f64::INFINITY }).unwrap();
        assert_eq!(s, r#"{"v":"inf"}"#);
        let back: Holder = serde_json::from_str(&s).unwrap();
        assert_eq!(back.v, f64::INFINITY);
        let finite: Holder = serde_json::from_str(r#"{"v":2}"#).unwrap();
        assert_eq!(finite.v, 2.0);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = rng_stream(7, 0).random();
        let b: u64 = rng_stream(7, 0).random();
        let c: u64 = rng_stream(7, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tolerant_comparison_handles_infinity() {
        assert!(le_tol(f64::INFINITY, f64::INFINITY, 0.0, 0.0));
        assert!(!le_tol(f64::INFINITY, 1.0, 0.0, 0.0));
        assert!(le_tol(1.0 + 1e-12, 1.0, 1e-9, 0.0));
    }
}
