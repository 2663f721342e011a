// Copyright 2026 The tiersim Authors
// SPDX-License-Identifier: Apache-2.0

//! Byte quantities written either as integers or with a binary suffix
//! (`4KB`, `64MB`, `1GiB`; `K`, `M`, `G`, `T` all mean powers of 1024).

use serde::{de, Deserialize, Deserializer};

pub fn parse(text: &str) -> Option<u64> {
    let text = text.trim();
    let split = text
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(text.len());
    let (digits, suffix) = text.split_at(split);
    let value: u64 = digits.parse().ok()?;
    let mult: u64 = match suffix.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 1,
        "K" | "KB" | "KIB" => 1 << 10,
        "M" | "MB" | "MIB" => 1 << 20,
        "G" | "GB" | "GIB" => 1 << 30,
        "T" | "TB" | "TIB" => 1 << 40,
        _ => return None,
    };
    value.checked_mul(mult)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Int(u64),
    Text(String),
}

impl Raw {
    fn bytes<E: de::Error>(self) -> Result<u64, E> {
        match self {
            Raw::Int(v) => Ok(v),
            Raw::Text(s) => parse(&s).ok_or_else(|| E::custom(format!("invalid byte size `{s}`"))),
        }
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    Raw::deserialize(d)?.bytes()
}

pub fn deserialize_opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    Option::<Raw>::deserialize(d)?.map(Raw::bytes).transpose()
}
