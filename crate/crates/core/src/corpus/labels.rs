use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shared behaviour of the closed label enums.
pub trait ClassLabel: Copy + Eq + fmt::Debug + 'static {
    /// Canonical order.
    const ALL: &'static [Self];

    /// Stable machine key, as used in manifests.
    fn key(self) -> &'static str;

    /// Name used in headlines and evidence tables.
    fn display_name(self) -> &'static str;

    /// Name used in confidence lines.
    fn short_name(self) -> &'static str {
        self.display_name()
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&l| l == self).expect("label in ALL")
    }

    fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn parse_key(s: &str, field: &'static str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.key() == norm)
            .ok_or_else(|| Error::Domain(format!("unknown {field} label `{s}`")))
    }
}

macro_rules! label_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $field:literal {
            $($variant:ident => $key:literal, $display:literal, $short:literal;)+
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $key)] $variant,)+
        }

        impl ClassLabel for $name {
            const ALL: &'static [Self] = &[$($name::$variant,)+];

            fn key(self) -> &'static str {
                match self { $($name::$variant => $key,)+ }
            }

            fn display_name(self) -> &'static str {
                match self { $($name::$variant => $display,)+ }
            }

            fn short_name(self) -> &'static str {
                match self { $($name::$variant => $short,)+ }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <$name as ClassLabel>::parse_key(s, $field)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.display_name())
            }
        }
    };
}

label_enum! {
    /// Structural abnormality type.
    Abnormality, "abnormality" {
        Normal => "normal", "Normal", "Normal";
        MtlAtrophy => "mtl_atrophy", "MTL Atrophy", "MTL Atrophy";
        Wmh => "wmh", "WMH", "WMH";
        OtherAtrophy => "other_atrophy", "Other Atrophy", "Other";
    }
}

label_enum! {
    /// Dementia type.
    Dementia, "dementia" {
        NonDementia => "non_dementia", "Non-Dementia", "Non-Dementia";
        Ad => "ad", "Alzheimer's Disease", "AD";
        OtherDementia => "other_dementia", "Other Dementia", "Other Dementia";
    }
}

label_enum! {
    /// Dementia severity stage.
    Severity, "severity" {
        NonDemented => "non_demented", "Non-Demented", "Non-Demented";
        VeryMild => "very_mild", "Very Mild Demented", "Very Mild";
        Mild => "mild", "Mild Demented", "Mild";
        Moderate => "moderate", "Moderate Demented", "Moderate";
    }
}

label_enum! {
    BinaryDementia, "binary" {
        NonDemented => "non_demented", "Non-Demented", "Non-Demented";
        Demented => "demented", "Demented", "Demented";
    }
}

impl Dementia {
    /// Short label used in evidence tables ("AD" rather than the full name).
    pub fn table_name(self) -> &'static str {
        self.short_name()
    }

    pub fn binary(self) -> BinaryDementia {
        match self {
            Dementia::NonDementia => BinaryDementia::NonDemented,
            _ => BinaryDementia::Demented,
        }
    }
}

/// The four diagnostic tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Abnormality,
    #[serde(alias = "binary")]
    BinaryDementia,
    #[serde(alias = "type")]
    DementiaType,
    Severity,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::Abnormality,
        Task::BinaryDementia,
        Task::DementiaType,
        Task::Severity,
    ];

    pub fn arity(self) -> usize {
        self.class_keys().len()
    }

    pub fn key(self) -> &'static str {
        match self {
            Task::Abnormality => "abnormality",
            Task::BinaryDementia => "binary_dementia",
            Task::DementiaType => "dementia_type",
            Task::Severity => "severity",
        }
    }

    pub fn class_keys(self) -> Vec<&'static str> {
        fn keys<L: ClassLabel>() -> Vec<&'static str> {
            L::ALL.iter().map(|l| l.key()).collect()
        }
        match self {
            Task::Abnormality => keys::<Abnormality>(),
            Task::BinaryDementia => keys::<BinaryDementia>(),
            Task::DementiaType => keys::<Dementia>(),
            Task::Severity => keys::<Severity>(),
        }
    }

    pub fn class_short_names(self) -> Vec<&'static str> {
        fn names<L: ClassLabel>() -> Vec<&'static str> {
            L::ALL.iter().map(|l| l.short_name()).collect()
        }
        match self {
            Task::Abnormality => names::<Abnormality>(),
            Task::BinaryDementia => names::<BinaryDementia>(),
            Task::DementiaType => names::<Dementia>(),
            Task::Severity => names::<Severity>(),
        }
    }

    pub fn class_display_name(self, index: usize) -> Option<&'static str> {
        match self {
            Task::Abnormality => Abnormality::from_index(index).map(ClassLabel::display_name),
            Task::BinaryDementia => BinaryDementia::from_index(index).map(ClassLabel::display_name),
            Task::DementiaType => Dementia::from_index(index).map(ClassLabel::display_name),
            Task::Severity => Severity::from_index(index).map(ClassLabel::display_name),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "abnormality" | "abn" => Ok(Task::Abnormality),
            "binary" | "binary_dementia" => Ok(Task::BinaryDementia),
            "type" | "dementia_type" => Ok(Task::DementiaType),
            "severity" => Ok(Task::Severity),
            other => Err(Error::Domain(format!("unknown task `{other}`"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}
