use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Inputs or components removed for an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationMask {
    pub drop_image: bool,
    pub drop_abn: bool,
    pub drop_dx: bool,
    pub drop_desc: bool,
    pub disable_similarity_weighting: bool,
    pub disable_attention: bool,
    /// Overrides every other flag.
    pub drop_all_evidence: bool,
}

const NAMES: [&str; 7] = [
    "no_image",
    "no_abn",
    "no_dx",
    "no_desc",
    "no_sim_weighting",
    "no_attention",
    "no_evidence",
];

impl AblationMask {
    pub const FULL: AblationMask = AblationMask {
        drop_image: false,
        drop_abn: false,
        drop_dx: false,
        drop_desc: false,
        disable_similarity_weighting: false,
        disable_attention: false,
        drop_all_evidence: false,
    };

    pub fn effective(self) -> AblationMask {
        if self.drop_all_evidence {
            AblationMask {
                drop_all_evidence: true,
                ..AblationMask::FULL
            }
        } else {
            self
        }
    }

    pub fn is_full(&self) -> bool {
        *self == AblationMask::FULL
    }

    /// Image, abnormality text, dementia text, description.
    pub fn kept_modalities(&self) -> [bool; 4] {
        let m = self.effective();
        [!m.drop_image, !m.drop_abn, !m.drop_dx, !m.drop_desc]
    }

    pub(crate) fn concatenates_evidence(&self) -> bool {
        let m = self.effective();
        m.disable_attention && !m.drop_all_evidence
    }

    fn flags(&self) -> [bool; 7] {
        [
            self.drop_image,
            self.drop_abn,
            self.drop_dx,
            self.drop_desc,
            self.disable_similarity_weighting,
            self.disable_attention,
            self.drop_all_evidence,
        ]
    }

    fn flag_mut(&mut self, i: usize) -> &mut bool {
        match i {
            0 => &mut self.drop_image,
            1 => &mut self.drop_abn,
            2 => &mut self.drop_dx,
            3 => &mut self.drop_desc,
            4 => &mut self.disable_similarity_weighting,
            5 => &mut self.disable_attention,
            _ => &mut self.drop_all_evidence,
        }
    }

    /// The full model followed by every single-flag variant.
    pub fn standard_variants() -> Vec<AblationMask> {
        let mut out = vec![AblationMask::FULL];
        for i in 0..NAMES.len() {
            let mut m = AblationMask::FULL;
            *m.flag_mut(i) = true;
            out.push(m);
        }
        out
    }
}

impl fmt::Display for AblationMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.effective();
        let on: Vec<&str> = m
            .flags()
            .iter()
            .zip(NAMES)
            .filter(|(on, _)| **on)
            .map(|(_, n)| n)
            .collect();
        if on.is_empty() {
            f.write_str("full")
        } else {
            f.write_str(&on.join("+"))
        }
    }
}

impl FromStr for AblationMask {
    type Err = Error;

    /// `full`, or names joined by `+` or `,` such as `no_image+no_desc`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut m = AblationMask::FULL;
        for part in s.split(['+', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            if part == "full" {
                continue;
            }
            let i = NAMES
                .iter()
                .position(|n| *n == part)
                .ok_or_else(|| Error::Config(format!("unknown ablation `{part}`")))?;
            *m.flag_mut(i) = true;
        }
        Ok(m)
    }
}
