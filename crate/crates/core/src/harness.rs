//! Episode simulation and the learning campaign.
//!
//! One campaign is strictly sequential: trial `j` learns from the memory of
//! trial `j - 1`. Trial 1 runs feedback only and is the reference every later
//! trial is scored against.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::feedback::PidState;
use crate::lffc::{compose_control, lffc_update, MemoryBank};
use crate::metrics::{build_report, IndexReport, IndexWeights, RitaeEvent};
use crate::plant::{saturate, PlantState};
use crate::scenario::ScenarioConfig;
use crate::signals::{fmt_num, read_columns, relabel, write_columns, Trajectory};

pub const EPISODE_HEADER: [&str; 13] = [
    "t", "r_1", "r_2", "y_1", "y_2", "u_N", "u_Av", "uC_N", "uC_Av", "uF_N", "uF_Av", "e_1", "e_2",
];
pub const SUMMARY_HEADER: &str = "iteration,J,effort_N,effort_Av";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const EPISODE_FILE: &str = "episode.csv";
pub const MEMORY_FILE: &str = "memory.csv";

/// All signals of one episode, each with two channels.
///
/// `u_c` is the feedback action relative to the controller's nominal command
/// (the operating-point input), so `u = clamp(nominal + u_c + u_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub r: Trajectory,
    pub y: Trajectory,
    pub u: Trajectory,
    pub u_c: Trajectory,
    pub u_f: Trajectory,
    pub e: Trajectory,
}

impl EpisodeResult {
    /// Per-channel `sum |u_C|`.
    pub fn feedback_effort(&self) -> [f64; 2] {
        [0, 1].map(|c| self.u_c.channel(c).iter().map(|v| v.abs()).sum())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let all = Trajectory::stack(&[&self.r, &self.y, &self.u, &self.u_c, &self.u_f, &self.e])?;
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let header: Vec<String> = EPISODE_HEADER.iter().map(|s| s.to_string()).collect();
        write_columns(std::io::BufWriter::new(file), &header, &all).map_err(|e| relabel(e, path))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let (names, all) = read_columns(file).map_err(|e| relabel(e, path))?;
        if names != EPISODE_HEADER[1..] {
            return Err(Error::format(
                path,
                format!("expected header {}", EPISODE_HEADER.join(",")),
            ));
        }
        let pair = |i: usize| Trajectory::stack(&[&all.select(2 * i), &all.select(2 * i + 1)]);
        Ok(Self {
            r: pair(0)?,
            y: pair(1)?,
            u: pair(2)?,
            u_c: pair(3)?,
            u_f: pair(4)?,
            e: pair(5)?,
        })
    }
}

/// Runs one closed-loop episode with the feedforward `u_f` (two channels on
/// the scenario grid) added to the feedback action.
pub fn simulate_episode(scenario: &ScenarioConfig, u_f: &Trajectory) -> Result<EpisodeResult> {
    scenario.validate()?;
    let grid = scenario.grid;
    grid.ensure_compatible(u_f.grid(), "feedforward")?;
    if u_f.channels() != 2 || !u_f.is_finite() {
        return Err(Error::param(
            "feedforward must be a finite two-channel trajectory",
        ));
    }
    let refs = scenario.references();
    let dists = scenario.disturbances();
    let plant = &scenario.plant;
    let mut state = PlantState::reset(plant, &grid)?;
    let mut pids = [PidState::default(); 2];
    let nominal = scenario.controller.nominal();
    let h = grid.h();

    let mut out = EpisodeResult {
        r: refs.clone(),
        y: Trajectory::zeros(grid, 2),
        u: Trajectory::zeros(grid, 2),
        u_c: Trajectory::zeros(grid, 2),
        u_f: u_f.clone(),
        e: Trajectory::zeros(grid, 2),
    };
    for k in 0..grid.len() {
        let r = [refs.get(0, k), refs.get(1, k)];
        let d = [dists.get(0, k), dists.get(1, k)];
        let y = state.output(plant);
        let u_fb = scenario.controller.step(&mut pids, r, y, h)?;
        let u_c = [u_fb[0] - nominal[0], u_fb[1] - nominal[1]];
        let ff = compose_control(u_c, [u_f.get(0, k), u_f.get(1, k)]);
        let u_raw = [nominal[0] + ff[0], nominal[1] + ff[1]];
        let u = saturate(u_raw, &plant.limits);
        state.step(plant, u_raw, d)?;
        for c in 0..2 {
            out.y.set(c, k, y[c]);
            out.e.set(c, k, r[c] - y[c]);
            out.u.set(c, k, u[c]);
            out.u_c.set(c, k, u_c[c]);
        }
    }
    Ok(out)
}

pub fn simulate_feedback_only(scenario: &ScenarioConfig) -> Result<EpisodeResult> {
    simulate_episode(scenario, &Trajectory::zeros(scenario.grid, 2))
}

pub fn compare(
    candidate: &EpisodeResult,
    reference: &EpisodeResult,
    events: &[RitaeEvent; 4],
    weights: &IndexWeights,
) -> Result<IndexReport> {
    build_report(
        (&candidate.e, &candidate.u),
        (&reference.e, &reference.u),
        events,
        weights,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j: f64,
    pub feedback_effort: [f64; 2],
    pub report: IndexReport,
    /// Persisted files, when the campaign writes to disk.
    pub episode_path: Option<PathBuf>,
    pub memory_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningRecord {
    pub entries: Vec<IterationRecord>,
    /// Trial-1 feedback-only episode.
    pub reference: EpisodeResult,
    pub last: EpisodeResult,
}

impl LearningRecord {
    pub fn j_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.j).collect()
    }

    pub fn summary_csv(&self) -> String {
        Self::summary_csv_rows(&self.entries)
    }
}

fn iteration_dir(root: &Path, iteration: usize) -> PathBuf {
    root.join(format!("iter_{iteration:03}"))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(contents.as_bytes())
            .map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn manifest_text(scenario: &ScenarioConfig, iteration: usize) -> String {
    let l = &scenario.learning;
    let mut s = String::from("# learning campaign manifest\n");
    s.push_str(&format!("iteration = {iteration}\n"));
    s.push_str(&format!("gamma = {}\n", fmt_num(l.gamma)));
    s.push_str(&format!("filter = {}\n", l.filter));
    if let Some(f) = &l.filter_av {
        s.push_str(&format!("filter_av = {f}\n"));
    }
    s.push_str(&format!(
        "memory = {}/{MEMORY_FILE}\n",
        iteration_dir(Path::new(""), iteration).display()
    ));
    s
}

fn manifest_entries(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Reads the summary CSV of a campaign directory.
pub fn read_summary(dir: &Path) -> Result<Vec<(usize, f64, [f64; 2])>> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(Error::format(
            &path,
            format!("expected header `{SUMMARY_HEADER}`"),
        ));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let bad = || Error::format(&path, format!("malformed row {}", n + 2));
        if cells.len() != 4 {
            return Err(bad());
        }
        let it = cells[0].parse::<usize>().map_err(|_| bad())?;
        let nums: Vec<f64> = cells[1..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        rows.push((it, nums[0], [nums[1], nums[2]]));
    }
    if rows.is_empty() {
        return Err(Error::format(&path, "campaign summary has no iterations"));
    }
    Ok(rows)
}

/// Trial-by-trial driver shared by fresh and resumed campaigns.
struct Campaign<'a> {
    scenario: &'a ScenarioConfig,
    out: Option<&'a Path>,
    reference: EpisodeResult,
    memory: MemoryBank,
    entries: Vec<IterationRecord>,
    last: Option<EpisodeResult>,
}

impl<'a> Campaign<'a> {
    fn new(scenario: &'a ScenarioConfig, out: Option<&'a Path>) -> Result<Self> {
        let reference = simulate_feedback_only(scenario)?;
        Ok(Self {
            scenario,
            out,
            reference,
            memory: MemoryBank::new(scenario.grid),
            entries: Vec::new(),
            last: None,
        })
    }

    fn run_iteration(&mut self) -> Result<()> {
        let j = self.memory.iteration + 1;
        let episode = if j == 1 {
            self.reference.clone()
        } else {
            let u_f = lffc_update(
                &self.memory,
                &self.scenario.learning,
                self.scenario.grid.h(),
            )?;
            simulate_episode(self.scenario, &u_f)?
        };
        let report = compare(
            &episode,
            &self.reference,
            &self.scenario.events,
            &self.scenario.weights,
        )?;
        self.memory = MemoryBank::from_parts(j, episode.u_f.clone(), episode.u_c.clone())?;
        let mut rec = IterationRecord {
            iteration: j,
            j: report.j,
            feedback_effort: episode.feedback_effort(),
            report,
            episode_path: None,
            memory_path: None,
        };
        if let Some(root) = self.out {
            let dir = iteration_dir(root, j);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let ep = dir.join(EPISODE_FILE);
            let mem = dir.join(MEMORY_FILE);
            episode.save_csv(&ep)?;
            self.memory.save_csv(&mem)?;
            rec.episode_path = Some(ep);
            rec.memory_path = Some(mem);
        }
        self.entries.push(rec);
        self.last = Some(episode);
        if let Some(root) = self.out {
            let summary = LearningRecord::summary_csv_rows(&self.entries);
            write_atomic(&root.join(SUMMARY_FILE), &summary)?;
            write_atomic(&root.join(MANIFEST_FILE), &manifest_text(self.scenario, j))?;
        }
        Ok(())
    }

    fn finish(self) -> LearningRecord {
        let last = self.last.unwrap_or_else(|| self.reference.clone());
        LearningRecord {
            entries: self.entries,
            reference: self.reference,
            last,
        }
    }
}

impl LearningRecord {
    fn summary_csv_rows(entries: &[IterationRecord]) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for e in entries {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.iteration,
                fmt_num(e.j),
                fmt_num(e.feedback_effort[0]),
                fmt_num(e.feedback_effort[1])
            ));
        }
        s
    }
}

/// Runs `n_iter` trials. Files go to `scenario.output_dir` when it is set.
pub fn run_learning(scenario: &ScenarioConfig, n_iter: usize) -> Result<LearningRecord> {
    run_learning_in(scenario, n_iter, scenario.output_dir.as_deref())
}

/// As [`run_learning`], persisting to `out` instead of the scenario's directory.
pub fn run_learning_in(
    scenario: &ScenarioConfig,
    n_iter: usize,
    out: Option<&Path>,
) -> Result<LearningRecord> {
    if n_iter == 0 {
        return Err(Error::param("a campaign needs at least one iteration"));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut c = Campaign::new(scenario, out)?;
    for _ in 0..n_iter {
        c.run_iteration()?;
    }
    Ok(c.finish())
}

/// Continues a persisted campaign in `dir` up to `n_iter` total trials. The
/// manifest must match the scenario's learning settings.
pub fn resume_learning(
    scenario: &ScenarioConfig,
    dir: &Path,
    n_iter: usize,
) -> Result<LearningRecord> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let entries = manifest_entries(&text);
    let get = |key: &str| {
        entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
    };
    let done: usize = get("iteration")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(&mpath, "missing iteration"))?;
    let expected = manifest_entries(&manifest_text(scenario, done));
    for key in ["gamma", "filter", "filter_av"] {
        let want = expected
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone());
        if get(key) != want {
            return Err(Error::format(
                &mpath,
                format!(
                    "`{key}` differs from the scenario ({:?} vs {:?})",
                    get(key),
                    want
                ),
            ));
        }
    }
    let rows = read_summary(dir)?;
    if rows.len() != done {
        return Err(Error::format(
            dir.join(SUMMARY_FILE),
            "summary and manifest disagree",
        ));
    }

    let mut c = Campaign::new(scenario, Some(dir))?;
    c.memory = MemoryBank::load_csv(&iteration_dir(dir, done).join(MEMORY_FILE), done)?;
    scenario
        .grid
        .ensure_compatible(c.memory.grid(), "persisted memory")?;
    for (it, _, _) in &rows {
        let ep_path = iteration_dir(dir, *it).join(EPISODE_FILE);
        let episode = EpisodeResult::load_csv(&ep_path)?;
        let report = compare(&episode, &c.reference, &scenario.events, &scenario.weights)?;
        c.entries.push(IterationRecord {
            iteration: *it,
            j: report.j,
            feedback_effort: episode.feedback_effort(),
            report,
            episode_path: Some(ep_path),
            memory_path: Some(iteration_dir(dir, *it).join(MEMORY_FILE)),
        });
        c.last = Some(episode);
    }
    while c.memory.iteration < n_iter {
        c.run_iteration()?;
    }
    Ok(c.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lffc::{FilterKind, LearningConfig};
    use crate::signals::StepProfile;

    fn quiescent() -> ScenarioConfig {
        let mut s = ScenarioConfig::default();
        s.ref_profiles = s.plant.op_y.map(StepProfile::constant);
        s.dist_profiles = s.plant.op_d.map(StepProfile::constant);
        s
    }

    #[test]
    fn quiescent_fixed_point() {
        let s = quiescent();
        let ep = simulate_feedback_only(&s).unwrap();
        for k in 0..s.grid.len() {
            for c in 0..2 {
                assert_eq!(ep.y.get(c, k), s.plant.op_y[c]);
                assert_eq!(ep.e.get(c, k), 0.0);
                assert_eq!(ep.u.get(c, k), s.plant.op_u[c]);
            }
        }
    }

    #[test]
    fn deterministic() {
        let s = ScenarioConfig::default();
        assert_eq!(
            simulate_feedback_only(&s).unwrap(),
            simulate_feedback_only(&s).unwrap()
        );
    }

    #[test]
    fn applied_input_is_clamped_composition() {
        let s = ScenarioConfig::default();
        let uf = Trajectory::from_fn(s.grid, 2, |c, t| 30.0 * (t / 50.0 + c as f64).sin());
        let ep = simulate_episode(&s, &uf).unwrap();
        let nominal = s.controller.nominal();
        for k in 0..s.grid.len() {
            for c in 0..2 {
                let expect =
                    s.plant.limits[c].clamp(nominal[c] + (ep.u_c.get(c, k) + ep.u_f.get(c, k)));
                assert_eq!(ep.u.get(c, k), expect);
            }
        }
    }

    #[test]
    fn rejects_wrong_feedforward_grid() {
        let s = ScenarioConfig::default();
        let g = crate::signals::make_grid(0.0, 100.0, 1.0).unwrap();
        assert!(matches!(
            simulate_episode(&s, &Trajectory::zeros(g, 2)),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn single_iteration_is_self_comparison() {
        let rec = run_learning(&ScenarioConfig::default(), 1).unwrap();
        assert_eq!(rec.entries.len(), 1);
        assert_eq!(rec.entries[0].j, 1.0);
        assert!(run_learning(&ScenarioConfig::default(), 0).is_err());
    }

    #[test]
    fn zero_gain_never_changes_j() {
        let mut s = ScenarioConfig::default();
        s.learning = LearningConfig::new(0.0, FilterKind::Identity);
        let rec = run_learning(&s, 4).unwrap();
        assert!(rec.j_values().iter().all(|&j| j == 1.0));
    }

    #[test]
    fn persisted_layout() {
        let dir = tempfile::tempdir().unwrap();
        let s = ScenarioConfig::default();
        let rec = run_learning_in(&s, 3, Some(dir.path())).unwrap();
        let rows = read_summary(dir.path()).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, e) in rows.iter().zip(&rec.entries) {
            assert_eq!(row.1, e.j);
            assert_eq!(row.2, e.feedback_effort);
        }
        let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("iteration = 3"));
        assert!(manifest.contains("gamma = 0.1"));
        assert!(manifest.contains("filter = low_pass tau=0 zero_phase=false"));
        assert!(dir.path().join("iter_002/memory.csv").exists());
        let ep = EpisodeResult::load_csv(&dir.path().join("iter_003/episode.csv")).unwrap();
        assert_eq!(ep, rec.last);
    }

    #[test]
    fn resume_rejects_other_gain() {
        let dir = tempfile::tempdir().unwrap();
        let s = ScenarioConfig::default();
        run_learning_in(&s, 2, Some(dir.path())).unwrap();
        let mut other = s.clone();
        other.learning.gamma = 0.2;
        assert!(resume_learning(&other, dir.path(), 4).is_err());
    }
}
