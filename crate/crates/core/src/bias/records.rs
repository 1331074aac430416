use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;
use crate::{Error, Result};

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| Error::Config(format!(
                        "`{s}` is not one of {:?}",
                        $name::ALL.iter().map(|v| v.as_str()).collect::<Vec<_>>()
                    )))
            }
        }
    };
}

vocabulary!(Gender { Male => "male", Female => "female", Other => "other" });
vocabulary!(PerceivedGender { Male => "male", Female => "female", Uncertain => "uncertain" });
vocabulary!(AgeBand { Age18To29 => "18-29", Age30To49 => "30-49", Age50To64 => "50-64", Age65Plus => "65+" });
vocabulary!(PerceivedAge {
    Age18To29 => "18-29",
    Age30To49 => "30-49",
    Age50To64 => "50-64",
    Age65Plus => "65+",
    Uncertain => "uncertain",
});
vocabulary!(Race { White => "white", Poc => "poc" });
vocabulary!(PerceivedRace { White => "white", Poc => "poc", MaybePoc => "maybe_poc", Uncertain => "uncertain" });
vocabulary!(
    /// A guess about, or the true state of, a video.
    Verdict { Real => "real", Fake => "fake" }
);

/// One participant's guess on one video.
///
/// A missing perceived attribute (empty CSV field) means the participant
/// gave no answer for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub participant_gender: Gender,
    pub participant_age_band: AgeBand,
    pub participant_race: Race,
    pub perceived_gender: Option<PerceivedGender>,
    pub perceived_age_band: Option<PerceivedAge>,
    pub perceived_race: Option<PerceivedRace>,
    pub guess: Verdict,
    pub truth: Verdict,
}

pub fn read_records(path: &Path) -> Result<Vec<ResponseRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.deserialize().enumerate() {
        let rec: ResponseRecord =
            rec.map_err(|e| Error::from(e).annotate(format!("{} record {}", path.display(), line + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Attributes that can be compared between a participant and the persona
/// they perceived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Gender,
    Age,
    Race,
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            "race" => Ok(Attribute::Race),
            _ => Err(Error::Config(format!(
                "attribute `{s}` is not one of gender, age, race"
            ))),
        }
    }
}

impl ResponseRecord {
    pub fn participant_value(&self, attr: Attribute) -> &'static str {
        match attr {
            Attribute::Gender => self.participant_gender.as_str(),
            Attribute::Age => self.participant_age_band.as_str(),
            Attribute::Race => self.participant_race.as_str(),
        }
    }

    pub fn perceived_value(&self, attr: Attribute) -> Option<&'static str> {
        match attr {
            Attribute::Gender => self.perceived_gender.map(PerceivedGender::as_str),
            Attribute::Age => self.perceived_age_band.map(PerceivedAge::as_str),
            Attribute::Race => self.perceived_race.map(PerceivedRace::as_str),
        }
    }

    /// Value of a CSV column by header name; `None` for a missing answer.
    pub fn field(&self, column: &str) -> Result<Option<&'static str>> {
        Ok(match column {
            "participant_gender" => Some(self.participant_gender.as_str()),
            "participant_age_band" => Some(self.participant_age_band.as_str()),
            "participant_race" => Some(self.participant_race.as_str()),
            "perceived_gender" => self.perceived_gender.map(PerceivedGender::as_str),
            "perceived_age_band" => self.perceived_age_band.map(PerceivedAge::as_str),
            "perceived_race" => self.perceived_race.map(PerceivedRace::as_str),
            "guess" => Some(self.guess.as_str()),
            "truth" => Some(self.truth.as_str()),
            _ => return Err(Error::Config(format!("unknown record column `{column}`"))),
        })
    }
}

/// Counts guesses against truth over the records accepted by both
/// predicates.
pub fn aggregate<G, V>(records: &[ResponseRecord], group: G, video: V) -> Result<ConfusionMatrix>
where
    G: Fn(&ResponseRecord) -> bool,
    V: Fn(&ResponseRecord) -> bool,
{
    let mut cm = ConfusionMatrix::default();
    for r in records.iter().filter(|r| group(r) && video(r)) {
        cm.record(r.guess, r.truth);
    }
    if cm.total() == 0 {
        return Err(Error::EmptyGroup("participant/persona predicates".into()));
    }
    Ok(cm)
}

/// Column-equality filter such as `participant_race=white,perceived_race=poc|maybe_poc`.
/// Terms are ANDed, alternatives within a term ORed. The empty filter
/// accepts everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    terms: Vec<(String, Vec<String>)>,
}

impl FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for term in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, values) = term
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("filter term `{term}` needs key=value")))?;
            let key = key.trim().to_string();
            // reject unknown columns up front
            ResponseRecord {
                participant_gender: Gender::Male,
                participant_age_band: AgeBand::Age18To29,
                participant_race: Race::White,
                perceived_gender: None,
                perceived_age_band: None,
                perceived_race: None,
                guess: Verdict::Real,
                truth: Verdict::Real,
            }
            .field(&key)?;
            let values = values.split('|').map(|v| v.trim().to_string()).collect();
            terms.push((key, values));
        }
        Ok(Filter { terms })
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, v)| format!("{k}={}", v.join("|")))
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl Filter {
    pub fn accepts(&self, r: &ResponseRecord) -> bool {
        self.terms.iter().all(|(key, values)| {
            matches!(r.field(key), Ok(Some(v)) if values.iter().any(|x| x == v))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionResult {
    pub attribute: Attribute,
    pub homophilic: ConfusionMatrix,
    pub heterophilic: ConfusionMatrix,
    /// Records without a perceived value for the attribute.
    pub excluded: usize,
}

/// Splits records by whether the participant's attribute equals the
/// perceived persona attribute. Hedged perceptions ("maybe_poc",
/// "uncertain") never equal a participant value and land on the
/// heterophilic side.
pub fn partition_homophily(records: &[ResponseRecord], attribute: Attribute) -> PartitionResult {
    let mut out = PartitionResult {
        attribute,
        homophilic: ConfusionMatrix::default(),
        heterophilic: ConfusionMatrix::default(),
        excluded: 0,
    };
    for r in records {
        match r.perceived_value(attribute) {
            None => out.excluded += 1,
            Some(v) if v == r.participant_value(attribute) => {
                out.homophilic.record(r.guess, r.truth)
            }
            Some(_) => out.heterophilic.record(r.guess, r.truth),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(race: Race, perceived: Option<PerceivedRace>, guess: Verdict, truth: Verdict) -> ResponseRecord {
        ResponseRecord {
            participant_gender: Gender::Female,
            participant_age_band: AgeBand::Age30To49,
            participant_race: race,
            perceived_gender: Some(PerceivedGender::Male),
            perceived_age_band: Some(PerceivedAge::Age30To49),
            perceived_race: perceived,
            guess,
            truth,
        }
    }

    #[test]
    fn race_partition_follows_caption_rule() {
        use PerceivedRace as P;
        use Verdict::*;
        let records = vec![
            rec(Race::White, Some(P::White), Fake, Fake),
            rec(Race::White, Some(P::MaybePoc), Real, Fake),
            rec(Race::White, Some(P::Uncertain), Fake, Real),
            rec(Race::Poc, Some(P::Poc), Real, Real),
            rec(Race::Poc, None, Real, Real),
        ];
        let part = partition_homophily(&records, Attribute::Race);
        assert_eq!(part.homophilic, ConfusionMatrix::new(1, 0, 0, 1));
        assert_eq!(part.heterophilic, ConfusionMatrix::new(0, 1, 1, 0));
        assert_eq!(part.excluded, 1);
        let all = aggregate(&records, |r| r.perceived_race.is_some(), |_| true).unwrap();
        assert_eq!(part.homophilic + part.heterophilic, all);
    }

    #[test]
    fn aggregate_counts_and_empty_groups() {
        use Verdict::*;
        let records = vec![rec(Race::White, None, Fake, Fake); 4];
        let cm = aggregate(&records, |_| true, |_| true).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(4, 0, 0, 0));
        let err = aggregate(&records, |r| r.participant_race == Race::Poc, |_| true);
        assert!(matches!(err, Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn filters() {
        use Verdict::*;
        let r = rec(Race::White, Some(PerceivedRace::MaybePoc), Fake, Fake);
        let f: Filter = "participant_race=white,perceived_race=poc|maybe_poc".parse().unwrap();
        assert!(f.accepts(&r));
        let f: Filter = "perceived_race=poc".parse().unwrap();
        assert!(!f.accepts(&r));
        assert!(Filter::default().accepts(&r));
        assert!("nope=1".parse::<Filter>().is_err());
        assert!("participant_race".parse::<Filter>().is_err());
    }

    #[test]
    fn reads_csv_with_missing_answers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(
            &path,
            "participant_gender,participant_age_band,participant_race,perceived_gender,perceived_age_band,perceived_race,guess,truth\n\
             male,65+,poc,female,,maybe_poc,fake,real\n",
        )
        .unwrap();
        let recs = read_records(&path).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].participant_age_band, AgeBand::Age65Plus);
        assert_eq!(recs[0].perceived_age_band, None);
        assert_eq!(recs[0].perceived_race, Some(PerceivedRace::MaybePoc));

        std::fs::write(
            &path,
            "participant_gender,participant_age_band,participant_race,perceived_gender,perceived_age_band,perceived_race,guess,truth\n\
             male,40-45,poc,female,,maybe_poc,fake,real\n",
        )
        .unwrap();
        assert!(read_records(&path).is_err());
    }
}
