//! Kernel-composition specifications, written `SE[SE]`, `SC[SE]`,
//! `SE[SE[SE]]`, ... with the outermost (exposed) kernel first and the
//! innermost kernel acting on the raw inputs.

use std::fmt;
use std::str::FromStr;

use crate::data::FidelityDataset;
use crate::error::{GpError, Result};
use crate::kernel::KernelFamily;
use crate::num::Real;

/// Kernel families ordered from the innermost layer (level 1, raw inputs)
/// to the outermost exposed GP. Depth 2 or 3.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositionSpec {
    families: Vec<KernelFamily>,
}

impl CompositionSpec {
    pub fn new(families_innermost_first: Vec<KernelFamily>) -> Result<Self> {
        let depth = families_innermost_first.len();
        if !(2..=3).contains(&depth) {
            return Err(GpError::InvalidConfig(format!(
                "composition depth must be 2 or 3, got {depth}"
            )));
        }
        Ok(CompositionSpec {
            families: families_innermost_first,
        })
    }

    pub fn depth(&self) -> usize {
        self.families.len()
    }

    /// Family of layer `i`, 0 = innermost.
    pub fn family(&self, i: usize) -> KernelFamily {
        self.families[i]
    }

    pub fn families(&self) -> &[KernelFamily] {
        &self.families
    }

    /// Checks depth against the dataset's fidelity-level count and the
    /// scalar-input restriction of an innermost squared-cosine kernel.
    pub fn validate_for<T: Real>(&self, data: &FidelityDataset<T>) -> Result<()> {
        if self.depth() != data.num_levels() {
            return Err(GpError::InvalidConfig(format!(
                "composition depth {} does not match {} fidelity levels",
                self.depth(),
                data.num_levels()
            )));
        }
        if self.families[0] == KernelFamily::SquaredCosine && data.dim() != 1 {
            return Err(GpError::ScalarInputsRequired { dim: data.dim() });
        }
        Ok(())
    }
}

impl FromStr for CompositionSpec {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut outermost_first = Vec::new();
        let mut rest = s;
        loop {
            let family = rest.get(..2).ok_or_else(|| bad_spec(s))?;
            outermost_first.push(KernelFamily::parse(family).map_err(|_| bad_spec(s))?);
            rest = &rest[2..];
            if rest.is_empty() {
                break;
            }
            if !rest.starts_with('[') || !rest.ends_with(']') {
                return Err(bad_spec(s));
            }
            rest = &rest[1..rest.len() - 1];
        }
        outermost_first.reverse();
        CompositionSpec::new(outermost_first).map_err(|_| bad_spec(s))
    }
}

fn bad_spec(s: &str) -> GpError {
    GpError::InvalidConfig(format!(
        "cannot parse composition spec '{s}' (expected e.g. SE[SE], SC[SE], SC[SC[SE]])"
    ))
}

impl fmt::Display for CompositionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (i, fam) in self.families.iter().rev().enumerate() {
            if i > 0 {
                s.push('[');
            }
            s.push_str(fam.code());
        }
        for _ in 1..self.families.len() {
            s.push(']');
        }
        f.write_str(&s)
    }
}
