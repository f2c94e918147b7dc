//! The 24-project ballot universe and its list-presentation treatments.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Size of the ballot.
pub const CATALOG_SIZE: u32 = 24;
/// The two admissible project costs in CHF.
pub const COSTS: [u32; 2] = [5000, 10000];

const BUILTIN_CSV: &str = include_str!("../fixtures/projects.csv");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate project id {0}")]
    DuplicateId(u32),
    #[error("project id {0} outside 1..={CATALOG_SIZE}")]
    IdOutOfRange(u32),
    #[error("no project for district {district}, category {category}, cost {cost}")]
    MissingCombination {
        district: District,
        category: Category,
        cost: u32,
    },
    #[error("expected {CATALOG_SIZE} projects, found {0}")]
    WrongSize(usize),
    #[error("bad value {value:?} for field `{field}`")]
    BadEnumValue { field: &'static str, value: String },
    #[error("catalog csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown displayed id {0}")]
    UnknownDisplayedId(u32),
}

/// Canonical ballot id of a project (1..=24 in the shipped catalog).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectId(pub u32);

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum District {
    Nord,
    #[serde(rename = "Süd")]
    Sud,
    Ost,
    West,
}

impl District {
    pub const ALL: [District; 4] = [District::Nord, District::Sud, District::Ost, District::West];

    pub fn as_str(self) -> &'static str {
        match self {
            District::Nord => "Nord",
            District::Sud => "Süd",
            District::Ost => "Ost",
            District::West => "West",
        }
    }
}

impl fmt::Display for District {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for District {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Nord" => Ok(District::Nord),
            // The LLaMA transcripts escape the umlaut; accept the ASCII spellings too.
            "Süd" | "Sud" | "Sued" | "S\\u00fcd" => Ok(District::Sud),
            "Ost" => Ok(District::Ost),
            "West" => Ok(District::West),
            other => Err(CatalogError::BadEnumValue {
                field: "district",
                value: other.to_string(),
            }),
        }
    }
}

/// Urban category. Declaration order is the catalog order used for tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Nature,
    Culture,
    Transportation,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Nature, Category::Culture, Category::Transportation];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Nature => "Nature",
            Category::Culture => "Culture",
            Category::Transportation => "Transportation",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Nature" => Ok(Category::Nature),
            "Culture" => Ok(Category::Culture),
            // Survey data uses the short label.
            "Transportation" | "Transport" => Ok(Category::Transportation),
            other => Err(CatalogError::BadEnumValue {
                field: "category",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Project {
    pub id: ProjectId,
    pub name: String,
    pub district: District,
    pub category: Category,
    /// Cost in CHF.
    pub cost: u32,
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    id: u32,
    name: String,
    district: String,
    category: String,
    cost: String,
}

/// Ordered project list; presentation order is list order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectCatalog {
    projects: Vec<Project>,
}

impl ProjectCatalog {
    /// The shipped 24-project catalog.
    pub fn builtin() -> Self {
        load_catalog(BUILTIN_CSV.as_bytes()).expect("builtin catalog is valid")
    }

    pub fn projects(&self) -> &[Project] {
        &self.projects
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    pub fn get(&self, id: ProjectId) -> Option<&Project> {
        self.projects.iter().find(|p| p.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = ProjectId> + '_ {
        self.projects.iter().map(|p| p.id)
    }

    pub fn contains(&self, id: ProjectId) -> bool {
        self.get(id).is_some()
    }
}

fn read_rows<R: Read>(source: R) -> Result<Vec<Project>, CatalogError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut projects = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.deserialize::<CatalogRow>() {
        let row = row?;
        let cost = row
            .cost
            .parse::<u32>()
            .ok()
            .filter(|c| COSTS.contains(c))
            .ok_or_else(|| CatalogError::BadEnumValue {
                field: "cost",
                value: row.cost.clone(),
            })?;
        if !seen.insert(row.id) {
            return Err(CatalogError::DuplicateId(row.id));
        }
        projects.push(Project {
            id: ProjectId(row.id),
            name: row.name,
            district: row.district.parse()?,
            category: row.category.parse()?,
            cost,
        });
    }
    Ok(projects)
}

/// Loads and validates a catalog: 24 unique ids in 1..=24, one project per
/// district x category x cost combination.
pub fn load_catalog<R: Read>(source: R) -> Result<ProjectCatalog, CatalogError> {
    let projects = read_rows(source)?;
    if let Some(p) = projects.iter().find(|p| p.id.0 == 0 || p.id.0 > CATALOG_SIZE) {
        return Err(CatalogError::IdOutOfRange(p.id.0));
    }
    let combos: BTreeSet<_> = projects.iter().map(|p| (p.district, p.category, p.cost)).collect();
    for district in District::ALL {
        for category in Category::ALL {
            for cost in COSTS {
                if !combos.contains(&(district, category, cost)) {
                    return Err(CatalogError::MissingCombination {
                        district,
                        category,
                        cost,
                    });
                }
            }
        }
    }
    if projects.len() != CATALOG_SIZE as usize {
        return Err(CatalogError::WrongSize(projects.len()));
    }
    Ok(ProjectCatalog { projects })
}

/// Loads a catalog checking only per-row validity and id uniqueness.
///
/// Intended for studies with other ballot sizes; treatments on such a catalog
/// relabel with `n + 1 - id`.
pub fn load_catalog_unchecked<R: Read>(source: R) -> Result<ProjectCatalog, CatalogError> {
    Ok(ProjectCatalog {
        projects: read_rows(source)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ListTreatment {
    #[default]
    Original,
    ReversedOrder,
    ReversedIds,
}

impl ListTreatment {
    pub const ALL: [ListTreatment; 3] = [
        ListTreatment::Original,
        ListTreatment::ReversedOrder,
        ListTreatment::ReversedIds,
    ];

    /// Short CLI/report code.
    pub fn code(self) -> &'static str {
        match self {
            ListTreatment::Original => "orig",
            ListTreatment::ReversedOrder => "revorder",
            ListTreatment::ReversedIds => "revid",
        }
    }
}

impl FromStr for ListTreatment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "orig" | "original" => Ok(ListTreatment::Original),
            "revorder" | "reversed-order" => Ok(ListTreatment::ReversedOrder),
            "revid" | "reversed-ids" => Ok(ListTreatment::ReversedIds),
            other => Err(format!("unknown list treatment {other:?}")),
        }
    }
}

/// One row of a presented list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedRow {
    pub displayed_id: u32,
    pub project: Project,
}

/// The catalog as shown to a voter under a treatment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedList {
    rows: Vec<PresentedRow>,
    treatment: ListTreatment,
    id_map: BTreeMap<u32, ProjectId>,
}

impl PresentedList {
    pub fn rows(&self) -> &[PresentedRow] {
        &self.rows
    }

    pub fn treatment(&self) -> ListTreatment {
        self.treatment
    }

    /// displayed id -> canonical id.
    pub fn id_map(&self) -> &BTreeMap<u32, ProjectId> {
        &self.id_map
    }

    pub fn canonical(&self, displayed: u32) -> Option<ProjectId> {
        self.id_map.get(&displayed).copied()
    }

    pub fn displayed(&self, canonical: ProjectId) -> Option<u32> {
        self.rows
            .iter()
            .find(|r| r.project.id == canonical)
            .map(|r| r.displayed_id)
    }
}

pub fn apply_list_treatment(catalog: &ProjectCatalog, treatment: ListTreatment) -> PresentedList {
    let n = catalog.len() as u32;
    let mut rows: Vec<PresentedRow> = catalog
        .projects()
        .iter()
        .map(|p| PresentedRow {
            displayed_id: match treatment {
                ListTreatment::ReversedIds => n + 1 - p.id.0,
                _ => p.id.0,
            },
            project: p.clone(),
        })
        .collect();
    if treatment == ListTreatment::ReversedOrder {
        rows.reverse();
    }
    let id_map = rows.iter().map(|r| (r.displayed_id, r.project.id)).collect();
    PresentedList {
        rows,
        treatment,
        id_map,
    }
}

/// Maps displayed ids back to canonical ids, preserving input order.
pub fn map_back<I>(ids: I, list: &PresentedList) -> Result<Vec<ProjectId>, CatalogError>
where
    I: IntoIterator<Item = u32>,
{
    ids.into_iter()
        .map(|d| list.canonical(d).ok_or(CatalogError::UnknownDisplayedId(d)))
        .collect()
}

/// One line per row: `#<displayed_id> <Name> (<District>, <Category>, <Cost>)`.
pub fn render_project_table(list: &PresentedList) -> String {
    let mut out = String::new();
    for row in &list.rows {
        let p = &row.project;
        out.push_str(&format!(
            "#{} {} ({}, {}, {})\n",
            row.displayed_id, p.name, p.district, p.category, p.cost
        ));
    }
    out.pop();
    out
}
