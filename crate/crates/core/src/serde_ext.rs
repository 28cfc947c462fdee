//! Serde helpers for bound vectors, where JSON `null` stands for an infinite bound.

macro_rules! bound_module {
    ($name:ident, $inf:expr) => {
        pub mod $name {
            use serde::{Deserialize, Deserializer, Serialize, Serializer};

            pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                v.iter()
                    .map(|x| if x.is_finite() { Some(*x) } else { None })
                    .collect::<Vec<_>>()
                    .serialize(s)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                let raw = Vec::<Option<f64>>::deserialize(d)?;
                Ok(raw.into_iter().map(|x| x.unwrap_or($inf)).collect())
            }
        }
    };
}

bound_module!(lower, f64::NEG_INFINITY);
bound_module!(upper, f64::INFINITY);

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct B {
        #[serde(with = "super::lower")]
        lo: Vec<f64>,
        #[serde(with = "super::upper")]
        hi: Vec<f64>,
    }

    #[test]
    fn null_means_infinite() {
        let b = B { lo: vec![f64::NEG_INFINITY, 0.0], hi: vec![1.5, f64::INFINITY] };
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"lo":[null,0.0],"hi":[1.5,null]}"#);
        assert_eq!(serde_json::from_str::<B>(&s).unwrap(), b);
    }
}
