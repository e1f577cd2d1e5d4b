//! Seeded synthetic identities drawn from locale attribute tables.
//!
//! Generation uses ChaCha8 seeded from a `u64`, so a given seed and table
//! set yields the same profile on every platform.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::PiiCategory;
use crate::date::CivilDate;
use crate::text::contains_placeholder;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("no locale tables supplied")]
    EmptyTables,
    #[error("locale `{locale}`: weight must be positive and finite, got {weight}")]
    BadWeight { locale: String, weight: f64 },
    #[error("locale weights sum to zero")]
    ZeroTotalWeight,
    #[error("locale `{locale}`: `{field}` is missing or empty")]
    MissingList { locale: String, field: &'static str },
    #[error("locale `{locale}`: entry `{entry}` looks like a redaction placeholder")]
    PlaceholderEntry { locale: String, entry: String },
    #[error("locale `{locale}`: invalid postal pattern `{pattern}`")]
    BadPostalPattern { locale: String, pattern: String },
    #[error("invalid age range {min}..={max}")]
    BadAgeRange { min: u32, max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Default for GeoBounds {
    fn default() -> Self {
        GeoBounds {
            lat_min: -60.0,
            lat_max: 70.0,
            lon_min: -180.0,
            lon_max: 180.0,
        }
    }
}

/// Attribute lists for one locale. `cities[i]` lies in
/// `regions[i % regions.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocaleTable {
    pub locale: String,
    pub weight: f64,
    pub given_names_by_gender: BTreeMap<String, Vec<String>>,
    pub surnames: Vec<String>,
    pub cities: Vec<String>,
    pub regions: Vec<String>,
    pub races: Vec<String>,
    /// `#` is a digit, `A` an uppercase letter, anything else is literal.
    #[serde(default = "default_postal_pattern")]
    pub postal_pattern: String,
    #[serde(default)]
    pub bounds: GeoBounds,
}

fn default_postal_pattern() -> String {
    String::from("#####")
}

impl LocaleTable {
    fn validate(&self) -> Result<(), ProfileError> {
        let missing = |field| ProfileError::MissingList {
            locale: self.locale.clone(),
            field,
        };
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(ProfileError::BadWeight {
                locale: self.locale.clone(),
                weight: self.weight,
            });
        }
        if self.given_names_by_gender.is_empty()
            || self.given_names_by_gender.values().any(Vec::is_empty)
        {
            return Err(missing("given_names_by_gender"));
        }
        let lists: [(&'static str, &Vec<String>); 4] = [
            ("surnames", &self.surnames),
            ("cities", &self.cities),
            ("regions", &self.regions),
            ("races", &self.races),
        ];
        for (field, list) in lists {
            if list.is_empty() {
                return Err(missing(field));
            }
        }
        let every = self
            .given_names_by_gender
            .iter()
            .flat_map(|(g, names)| core::iter::once(g).chain(names))
            .chain(lists.iter().flat_map(|(_, l)| l.iter()));
        for entry in every {
            if entry.trim().is_empty() || contains_placeholder(entry) {
                return Err(ProfileError::PlaceholderEntry {
                    locale: self.locale.clone(),
                    entry: entry.clone(),
                });
            }
        }
        if !self.postal_pattern.contains(['#', 'A']) || contains_placeholder(&self.postal_pattern) {
            return Err(ProfileError::BadPostalPattern {
                locale: self.locale.clone(),
                pattern: self.postal_pattern.clone(),
            });
        }
        Ok(())
    }
}

/// Validated tables whose weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LocaleSet {
    tables: Vec<LocaleTable>,
}

impl LocaleSet {
    pub fn new(mut tables: Vec<LocaleTable>) -> Result<Self, ProfileError> {
        if tables.is_empty() {
            return Err(ProfileError::EmptyTables);
        }
        for t in &tables {
            t.validate()?;
        }
        let total: f64 = tables.iter().map(|t| t.weight).sum();
        if total <= 0.0 {
            return Err(ProfileError::ZeroTotalWeight);
        }
        for t in &mut tables {
            t.weight /= total;
        }
        Ok(LocaleSet { tables })
    }

    pub fn tables(&self) -> &[LocaleTable] {
        &self.tables
    }

    fn pick(&self, u: f64) -> &LocaleTable {
        let mut acc = 0.0;
        for t in &self.tables {
            acc += t.weight;
            if u < acc {
                return t;
            }
        }
        &self.tables[self.tables.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Ages are computed relative to this date.
    pub reference_date: CivilDate,
    pub min_age: u32,
    pub max_age: u32,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            reference_date: CivilDate {
                year: 2024,
                month: 1,
                day: 1,
            },
            min_age: 18,
            max_age: 95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub locale: String,
    pub full_name: String,
    pub given_name: String,
    pub surname: String,
    pub age: u32,
    pub gender: String,
    pub race: String,
    pub birth_date: CivilDate,
    pub birth_location: String,
    pub city: String,
    pub state_or_region: String,
    pub postal_code: String,
    pub latitude: f64,
    pub longitude: f64,
}

/// Profile fields that can be written into a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileAttribute {
    FullName,
    GivenName,
    Surname,
    Age,
    Gender,
    Race,
    BirthDate,
    BirthLocation,
    City,
    Region,
    PostalCode,
    Coordinates,
}

impl ProfileAttribute {
    pub const ALL: [ProfileAttribute; 12] = [
        ProfileAttribute::FullName,
        ProfileAttribute::Age,
        ProfileAttribute::Gender,
        ProfileAttribute::BirthDate,
        ProfileAttribute::City,
        ProfileAttribute::Region,
        ProfileAttribute::Race,
        ProfileAttribute::BirthLocation,
        ProfileAttribute::PostalCode,
        ProfileAttribute::Coordinates,
        ProfileAttribute::Surname,
        ProfileAttribute::GivenName,
    ];

    pub fn category(self) -> PiiCategory {
        match self {
            ProfileAttribute::FullName | ProfileAttribute::GivenName | ProfileAttribute::Surname => {
                PiiCategory::Person
            }
            ProfileAttribute::Age => PiiCategory::Age,
            ProfileAttribute::Gender => PiiCategory::Gender,
            ProfileAttribute::Race => PiiCategory::Race,
            ProfileAttribute::BirthDate => PiiCategory::DateTime,
            ProfileAttribute::BirthLocation
            | ProfileAttribute::City
            | ProfileAttribute::Region
            | ProfileAttribute::PostalCode
            | ProfileAttribute::Coordinates => PiiCategory::Location,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "full_name" => ProfileAttribute::FullName,
            "given_name" => ProfileAttribute::GivenName,
            "surname" => ProfileAttribute::Surname,
            "age" => ProfileAttribute::Age,
            "gender" => ProfileAttribute::Gender,
            "race" => ProfileAttribute::Race,
            "birth_date" => ProfileAttribute::BirthDate,
            "birth_location" => ProfileAttribute::BirthLocation,
            "city" => ProfileAttribute::City,
            "region" | "state" | "state_or_region" => ProfileAttribute::Region,
            "postal_code" => ProfileAttribute::PostalCode,
            "coordinates" => ProfileAttribute::Coordinates,
            _ => return None,
        })
    }
}

impl Profile {
    /// Text written into a document for `attr`.
    pub fn attribute(&self, attr: ProfileAttribute) -> String {
        match attr {
            ProfileAttribute::FullName => self.full_name.clone(),
            ProfileAttribute::GivenName => self.given_name.clone(),
            ProfileAttribute::Surname => self.surname.clone(),
            ProfileAttribute::Age => format!("{}", self.age),
            ProfileAttribute::Gender => self.gender.clone(),
            ProfileAttribute::Race => self.race.clone(),
            ProfileAttribute::BirthDate => format!("{}", self.birth_date),
            ProfileAttribute::BirthLocation => self.birth_location.clone(),
            ProfileAttribute::City => self.city.clone(),
            ProfileAttribute::Region => self.state_or_region.clone(),
            ProfileAttribute::PostalCode => self.postal_code.clone(),
            ProfileAttribute::Coordinates => {
                format!("{:.4}, {:.4}", self.latitude, self.longitude)
            }
        }
    }

    pub fn attributes(&self) -> Vec<(ProfileAttribute, String)> {
        ProfileAttribute::ALL
            .iter()
            .map(|&a| (a, self.attribute(a)))
            .collect()
    }

    /// Plain `key: value` listing used in the pseudonymization prompt.
    pub fn render_fake_profile(&self) -> String {
        let mut out = String::new();
        for (key, attr) in [
            ("Full name", ProfileAttribute::FullName),
            ("Age", ProfileAttribute::Age),
            ("Gender", ProfileAttribute::Gender),
            ("Race", ProfileAttribute::Race),
            ("Birth date", ProfileAttribute::BirthDate),
            ("Birth location", ProfileAttribute::BirthLocation),
            ("City", ProfileAttribute::City),
            ("State", ProfileAttribute::Region),
            ("ZIP code", ProfileAttribute::PostalCode),
            ("Coordinates", ProfileAttribute::Coordinates),
        ] {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(key);
            out.push_str(": ");
            out.push_str(&self.attribute(attr));
        }
        out
    }
}

fn choose<'a>(rng: &mut ChaCha8Rng, items: &'a [String]) -> &'a String {
    &items[rng.gen_range(0..items.len())]
}

fn round4(x: f64) -> f64 {
    libm::round(x * 10_000.0) / 10_000.0
}

fn postal_code(rng: &mut ChaCha8Rng, pattern: &str) -> String {
    pattern
        .chars()
        .map(|c| match c {
            '#' => char::from(b'0' + rng.gen_range(0..10u8)),
            'A' => char::from(b'A' + rng.gen_range(0..26u8)),
            other => other,
        })
        .collect()
}

fn shift_years(date: CivilDate, years: i32) -> CivilDate {
    let year = date.year + years;
    let day = date.day.min(crate::date::days_in_month(year, date.month));
    CivilDate {
        year,
        month: date.month,
        day,
    }
}

/// Draws one profile. Deterministic in `(seed, tables, cfg)`.
pub fn generate_profile(
    seed: u64,
    tables: &LocaleSet,
    cfg: &ProfileConfig,
) -> Result<Profile, ProfileError> {
    if cfg.min_age > cfg.max_age || cfg.max_age > 130 {
        return Err(ProfileError::BadAgeRange {
            min: cfg.min_age,
            max: cfg.max_age,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = tables.pick(rng.gen::<f64>());

    let genders: Vec<&String> = table.given_names_by_gender.keys().collect();
    let gender = genders[rng.gen_range(0..genders.len())].clone();
    let given_name = choose(&mut rng, &table.given_names_by_gender[&gender]).clone();
    let surname = choose(&mut rng, &table.surnames).clone();

    let age = rng.gen_range(cfg.min_age..=cfg.max_age);
    // Birth dates whose age on the reference date is exactly `age`.
    let reference = cfg.reference_date;
    let latest = shift_years(reference, -(age as i32)).to_days();
    let earliest = shift_years(reference, -(age as i32) - 1).to_days() + 1;
    let birth_date = CivilDate::from_days(rng.gen_range(earliest..=latest));

    let race = choose(&mut rng, &table.races).clone();
    let birth_idx = rng.gen_range(0..table.cities.len());
    let birth_location = format!(
        "{}, {}",
        table.cities[birth_idx],
        table.regions[birth_idx % table.regions.len()]
    );
    let city_idx = rng.gen_range(0..table.cities.len());
    let city = table.cities[city_idx].clone();
    let state_or_region = table.regions[city_idx % table.regions.len()].clone();
    let postal_code = postal_code(&mut rng, &table.postal_pattern);
    let b = table.bounds;
    let latitude = round4(rng.gen_range(b.lat_min..=b.lat_max)).clamp(-90.0, 90.0);
    let longitude = round4(rng.gen_range(b.lon_min..=b.lon_max)).clamp(-180.0, 180.0);

    Ok(Profile {
        locale: table.locale.clone(),
        full_name: format!("{given_name} {surname}"),
        given_name,
        surname,
        age,
        gender,
        race,
        birth_date,
        birth_location,
        city,
        state_or_region,
        postal_code,
        latitude,
        longitude,
    })
}
