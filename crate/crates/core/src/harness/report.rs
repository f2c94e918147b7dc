//! Plot-ready CSV tables. Shares are fractions of vote mass, histogram
//! entries are percentages of ballots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::compare::pairwise_distances;
use super::run::{load_config_catalog, load_config_survey};
use super::{compare_runs, io_err, ExperimentRun, HarnessError, HumanBaseline, VoteGroup};
use crate::aggregation::tally;
use crate::catalog::ProjectCatalog;
use crate::metrics::{
    attribute_distribution, kendall_tau, rank_id_correlation, selection_count_histogram, self_alignment, Attribute,
    PairMode, Ranking,
};
use crate::persona::SurveyRecord;
use crate::prompting::VotingMethod;

pub const REPORT_FILES: [&str; 6] = [
    "tau_matrix.csv",
    "jaccard_dist.csv",
    "attribute_shares.csv",
    "histogram.csv",
    "self_alignment.csv",
    "stats.csv",
];

struct Entry {
    group: VoteGroup,
    /// Survey records keyed by voter id, when voters have personas.
    survey: BTreeMap<String, SurveyRecord>,
    discarded: Option<usize>,
}

fn unique_label(label: String, taken: &mut BTreeMap<String, usize>) -> String {
    let n = taken.entry(label.clone()).or_insert(0);
    *n += 1;
    if *n == 1 {
        label
    } else {
        format!("{label}#{n}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the report tables into `out_dir` and returns their paths.
/// Human groups, one per method present among the runs, come first.
pub fn report(
    runs: &[ExperimentRun],
    baseline: Option<&HumanBaseline>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let first = runs.first().ok_or(HarnessError::NoRuns)?;
    let catalog: ProjectCatalog = load_config_catalog(&first.config)?;

    let mut taken = BTreeMap::new();
    let mut entries = Vec::new();
    if let Some(b) = baseline {
        let mut methods: Vec<VotingMethod> = Vec::new();
        for r in runs {
            if !methods.contains(&r.config.method) {
                methods.push(r.config.method);
            }
        }
        for m in methods {
            let mut group = VoteGroup::from_baseline(b, m);
            if group.ballots.is_empty() {
                log::warn!("baseline has no {m} ballots");
                continue;
            }
            group.label = unique_label(group.label, &mut taken);
            entries.push(Entry {
                group,
                survey: b.survey.iter().map(|r| (r.participant_id.clone(), r.clone())).collect(),
                discarded: None,
            });
        }
    }
    let n_human = entries.len();
    for r in runs {
        let mut group = VoteGroup::from_run(r);
        group.label = unique_label(group.label, &mut taken);
        let survey = if r.config.persona {
            load_config_survey(&r.config)?
                .into_iter()
                .map(|s| (s.participant_id.clone(), s))
                .collect()
        } else {
            BTreeMap::new()
        };
        entries.push(Entry {
            group,
            survey,
            discarded: Some(r.discarded),
        });
    }

    let tallies: Vec<_> = entries
        .iter()
        .map(|e| tally::<f64>(&e.group.ballots, &catalog).ok())
        .collect();

    let mut tau = String::from("label");
    for e in &entries {
        write!(tau, ",{}", e.group.label).unwrap();
    }
    tau.push('\n');
    for (i, e) in entries.iter().enumerate() {
        tau.push_str(&e.group.label);
        for tj in &tallies {
            let v = match (&tallies[i], tj) {
                (Some(a), Some(b)) => kendall_tau(&Ranking::from(a), &Ranking::from(b)).ok(),
                _ => None,
            };
            write!(tau, ",{}", opt(v)).unwrap();
        }
        tau.push('\n');
    }

    let human_for = |m: VotingMethod| entries[..n_human].iter().find(|h| h.group.method == m);

    let mut jd = String::from("label,reference,mode,pair,distance\n");
    let mut stats = String::from("label,reference,statistic,value,p_value,dof\n");
    let mut shares = String::from("label,attribute,value,share\n");
    let mut hist = String::from("label,n_selected,percent\n");
    let mut align = String::from("label,voter_id,district_share,category_share\n");

    for (i, e) in entries.iter().enumerate() {
        let g = &e.group;
        let label = &g.label;
        writeln!(stats, "{label},,n_ballots,{},,", g.ballots.len()).unwrap();
        if let Some(d) = e.discarded {
            writeln!(stats, "{label},,discarded,{d},,").unwrap();
        }
        if let Some(t) = &tallies[i] {
            if let Ok(r) = rank_id_correlation(t) {
                writeln!(
                    stats,
                    "{label},,rank_id_pearson,{},{},{}",
                    r.statistic, r.p_value, r.dof
                )
                .unwrap();
            }
        }

        if let Ok(d) = pairwise_distances(&g.ballots) {
            if !d.is_empty() {
                for (k, v) in d.iter().enumerate() {
                    writeln!(jd, "{label},{label},within,{k},{v}").unwrap();
                }
                writeln!(
                    stats,
                    "{label},,within_dissimilarity,{},,",
                    d.iter().sum::<f64>() / d.len() as f64
                )
                .unwrap();
            }
        }

        if i >= n_human {
            if let Some(h) = human_for(g.method) {
                if let Ok(c) = compare_runs(&h.group, g, &catalog) {
                    let mode = match c.pair_mode {
                        PairMode::MatchedById => "matched",
                        PairMode::AllPairs => "all_pairs",
                    };
                    for (k, v) in c.jaccard.values.iter().enumerate() {
                        writeln!(jd, "{label},{},{mode},{k},{}", h.group.label, 1.0 - v).unwrap();
                    }
                    let href = &h.group.label;
                    writeln!(stats, "{label},{href},kendall_tau,{},,", c.tau).unwrap();
                    writeln!(stats, "{label},{href},jaccard_mean,{},,", c.jaccard.mean).unwrap();
                    if let Some(t) = c.t_test {
                        writeln!(
                            stats,
                            "{label},{href},jaccard_matched_vs_mismatched_t,{},{},{}",
                            t.statistic, t.p_value, t.dof
                        )
                        .unwrap();
                    }
                }
            }
        }

        for attribute in Attribute::ALL {
            if let Ok(d) = attribute_distribution::<f64>(&g.ballots, &catalog, attribute) {
                for (value, share) in d {
                    writeln!(shares, "{label},{},{value},{share}", attribute.name()).unwrap();
                }
            }
        }

        if g.method.is_approval_like() {
            if let Ok(h) = selection_count_histogram::<f64>(&g.ballots) {
                for (size, pct) in h {
                    writeln!(hist, "{label},{size},{pct}").unwrap();
                }
            }
        }

        if !e.survey.is_empty() {
            let (mut sd, mut sc, mut n) = (0.0, 0.0, 0usize);
            for b in &g.ballots {
                let Some(rec) = e.survey.get(&b.voter_id) else { continue };
                if let Ok(a) = self_alignment::<f64>(b, rec, &catalog) {
                    writeln!(
                        align,
                        "{label},{},{},{}",
                        b.voter_id, a.district_share, a.category_share
                    )
                    .unwrap();
                    sd += a.district_share;
                    sc += a.category_share;
                    n += 1;
                }
            }
            if n > 0 {
                writeln!(stats, "{label},,mean_district_share,{},,", sd / n as f64).unwrap();
                writeln!(stats, "{label},,mean_category_share,{},,", sc / n as f64).unwrap();
            }
        }
    }

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut paths = Vec::new();
    for (name, body) in REPORT_FILES.iter().zip([tau, jd, shares, hist, align, stats]) {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, ExperimentConfig};

    fn read(dir: &Path, name: &str) -> String {
        fs::read_to_string(dir.join(name)).unwrap()
    }

    #[test]
    fn single_run() {
        let run = run_experiment(&ExperimentConfig {
            n_agents: 20,
            ..ExperimentConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = report(&[run], None, dir.path()).unwrap();
        assert_eq!(files.len(), 6);
        let tau = read(dir.path(), "tau_matrix.csv");
        assert_eq!(tau, "label,kapp_t1_p0_c0_orig\nkapp_t1_p0_c0_orig,1\n");
        let hist = read(dir.path(), "histogram.csv");
        assert_eq!(hist, "label,n_selected,percent\nkapp_t1_p0_c0_orig,5,100\n");
    }

    #[test]
    fn shares_sum_to_one_and_matrix_shape() {
        let runs: Vec<_> = [0.0, 0.5, 1.0, 1.5, 2.0]
            .into_iter()
            .map(|t| {
                run_experiment(&ExperimentConfig {
                    n_agents: 10,
                    temperature: t,
                    method: VotingMethod::CUMULATIVE,
                    ..ExperimentConfig::default()
                })
                .unwrap()
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        report(&runs, None, dir.path()).unwrap();
        let tau = read(dir.path(), "tau_matrix.csv");
        assert_eq!(tau.lines().count(), 6);
        assert!(tau.lines().all(|l| l.split(',').count() == 6));
        let mut sums: BTreeMap<(String, String), f64> = BTreeMap::new();
        for line in read(dir.path(), "attribute_shares.csv").lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            *sums.entry((f[0].into(), f[1].into())).or_default() += f[3].parse::<f64>().unwrap();
        }
        assert_eq!(sums.len(), 15);
        assert!(sums.values().all(|s| (s - 1.0).abs() < 1e-9));
    }

    #[test]
    fn duplicate_labels_are_suffixed() {
        let cfg = ExperimentConfig {
            n_agents: 4,
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        report(&[a.clone(), a], None, dir.path()).unwrap();
        assert!(read(dir.path(), "tau_matrix.csv").starts_with("label,kapp_t1_p0_c0_orig,kapp_t1_p0_c0_orig#2\n"));
    }

    #[test]
    fn no_runs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report(&[], None, dir.path()), Err(HarnessError::NoRuns)));
    }
}
