//! Human annotation records read from CSV.
//!
//! Header: `item_id,metric,mode,pairwise_outcome,scale_score,baseline,annotator_id`
//! with an optional trailing `attention_check` column (`true`/`false`).
//! Rows that failed the attention check are dropped before any tabulation.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

label_enum!(Metric {
    ImageConsistency => "image_consistency",
    TextConsistency => "text_consistency",
    ImageNovelty => "image_novelty",
    TextNovelty => "text_novelty",
    Novelty => "novelty",
    Consistency => "consistency",
    Descriptiveness => "descriptiveness",
    Coherence => "coherence",
});

label_enum!(Mode {
    Pairwise => "pairwise",
    Scale => "scale",
});

label_enum!(Outcome {
    Win => "win",
    Tie => "tie",
    Loss => "loss",
});

label_enum!(
    /// The compared method. Pairwise rows name the baseline the full method
    /// was judged against; scale rows name the method that was scored, which
    /// may be the full method itself.
    Method {
        Vcot => "vcot",
        CotPlusCoi => "cot_plus_coi",
        Cot => "cot",
        Coi => "coi",
        Random => "random",
        NoInfilling => "no_infilling",
        Reference => "reference",
    }
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub metric: Metric,
    pub mode: Mode,
    pub pairwise_outcome: Option<Outcome>,
    pub scale_score: Option<u8>,
    pub baseline: Method,
    pub annotator_id: String,
    pub attention_check: Option<bool>,
}

impl AnnotationRecord {
    pub fn passed_attention_check(&self) -> bool {
        self.attention_check != Some(false)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.mode, self.pairwise_outcome, self.scale_score) {
            (Mode::Pairwise, Some(_), None) => Ok(()),
            (Mode::Scale, None, Some(s)) if (1..=5).contains(&s) => Ok(()),
            (Mode::Scale, None, Some(s)) => Err(Error::Input(format!("scale score {s} outside 1..5"))),
            (mode, ..) => Err(Error::Input(format!(
                "a {mode} record needs exactly its own outcome field"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct Row {
    item_id: String,
    metric: Metric,
    mode: Mode,
    pairwise_outcome: Option<Outcome>,
    scale_score: Option<i64>,
    baseline: Method,
    annotator_id: String,
    #[serde(default)]
    attention_check: Option<bool>,
}

pub fn parse_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationRecord>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in csv.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Input(format!("annotation row {line}: {e}")))?;
        let scale_score = row
            .scale_score
            .map(|s| {
                u8::try_from(s).map_err(|_| Error::Input(format!("annotation row {line}: score {s} outside 1..5")))
            })
            .transpose()?;
        let record = AnnotationRecord {
            item_id: row.item_id,
            metric: row.metric,
            mode: row.mode,
            pairwise_outcome: row.pairwise_outcome,
            scale_score,
            baseline: row.baseline,
            annotator_id: row.annotator_id,
            attention_check: row.attention_check,
        };
        record
            .validate()
            .map_err(|e| Error::Input(format!("annotation row {line}: {e}")))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    parse_annotations(std::fs::File::open(path)?)
}
